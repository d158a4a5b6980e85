use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::numerics::{discrete_norm, quadrature_inner, NormKind};

fn line(n: usize) -> Grid {
    Grid::new(1, n).unwrap()
}

fn rel_l2(a: &GridField<f64>, b: &GridField<f64>) -> f64 {
    let diff = a - b;
    let num = quadrature_inner(&diff, &diff).unwrap().sqrt();
    let den = quadrature_inner(b, b).unwrap().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Plain recursive B-spline definition on a clamped uniform knot vector.
fn reference_spline(order: usize, nint: usize, k: usize, x: f64) -> f64 {
    let p = order - 1;
    let t: Vec<f64> = (0..nint + 2 * order - 1)
        .map(|j| (j as isize - p as isize).clamp(0, nint as isize) as f64 / nint as f64)
        .collect();
    fn rec(t: &[f64], k: usize, deg: usize, x: f64) -> f64 {
        if deg == 0 {
            let last = *t.last().unwrap();
            let hit = (t[k] <= x && x < t[k + 1]) || (x == last && t[k] < x && t[k + 1] == last);
            return if hit { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        if t[k + deg] > t[k] {
            v += (x - t[k]) / (t[k + deg] - t[k]) * rec(t, k, deg - 1, x);
        }
        if t[k + deg + 1] > t[k + 1] {
            v += (t[k + deg + 1] - x) / (t[k + deg + 1] - t[k + 1]) * rec(t, k + 1, deg - 1, x);
        }
        v
    }
    rec(&t, k, p, x)
}

#[test]
fn level_zero_is_small_and_wide() {
    let f = Frame::<f64>::build(line(63), 0).unwrap();
    assert_eq!(f.len(), 7);
    for a in 0..f.len() {
        let nz = f.basis_samples(a).len();
        assert!(nz >= 8, "element {a} has only {nz} samples");
    }
    let g = Frame::<f64>::with_options(line(63), 0, FrameOptions::new(4, 0)).unwrap();
    assert_eq!(g.len(), 4);
}

#[test]
fn element_count_doubles_per_level() {
    let grid = line(1023);
    let counts: Vec<usize> = (2..=6)
        .map(|j| Frame::<f64>::build(grid, j).unwrap().len())
        .collect();
    for w in counts.windows(2) {
        let r = w[1] as f64 / w[0] as f64;
        assert!((r - 2.0).abs() <= 0.3, "ratio {r}");
    }
}

#[test]
fn coarse_grid_is_rejected() {
    assert!(matches!(
        Frame::<f64>::build(line(31), 3),
        Err(Error::Precondition(_))
    ));
    assert!(Frame::<f64>::with_options(line(63), 0, FrameOptions::new(3, 2)).is_err());
}

#[test]
fn span_elements_are_reproduced() {
    let f = Frame::<f64>::build(line(255), 3).unwrap();
    for a in [0, 5, f.level_count(0) + 2, f.len() - 1] {
        let phi = f.basis_field(a);
        let rec = f.synthesize(&f.select(&phi).unwrap()).unwrap();
        assert!(
            rel_l2(&rec, &phi) < 1e-10,
            "element {a}: {}",
            rel_l2(&rec, &phi)
        );
    }
    let a = f.position(MultiIndex { l: 1, k: [2, 0] }).unwrap();
    let phi = f.basis_field(a);
    assert!(rel_l2(&f.synthesize(&f.select(&phi).unwrap()).unwrap(), &phi) < 1e-8);
    let zero = f.select(&GridField::zeros(line(255))).unwrap();
    assert!(zero.iter().all(|&c| c == 0.0));
}

#[test]
fn smooth_function_reconstruction() {
    let grid = line(511);
    let f = Frame::<f64>::build(grid, 5).unwrap();
    let s = GridField::from_fn(grid, |x: &[f64]| (PI * x[0]).sin());
    let rec = f.synthesize(&f.select(&s).unwrap()).unwrap();
    let err = quadrature_inner(&(&rec - &s), &(&rec - &s)).unwrap().sqrt();
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn synthesize_is_linear_and_picks_samples() {
    let f = Frame::<f64>::build(line(127), 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v: Vec<f64> = (0..f.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..f.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let vw: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a + b).collect();
    let lhs = f.synthesize(&vw).unwrap();
    let rhs = &f.synthesize(&v).unwrap() + &f.synthesize(&w).unwrap();
    assert!((&lhs - &rhs).max_abs() < 1e-13);
    assert_eq!(f.synthesize(&vec![0.0; f.len()]).unwrap().max_abs(), 0.0);
    let mut e = vec![0.0; f.len()];
    e[9] = 1.0;
    assert_eq!(f.synthesize(&e).unwrap(), f.basis_field(9));
    assert!(f.synthesize(&[1.0]).is_err());
}

#[test]
fn level_weights_and_h_norm() {
    let f = Frame::<f64>::build(line(127), 2).unwrap();
    let w = f.level_weights(1.0);
    for (a, l) in f.levels().enumerate() {
        assert_eq!(w[a], [1.0, 4.0, 16.0][l]);
    }
    assert!(f.level_weights(0.0).iter().all(|&x| x == 1.0));
    let mut v = vec![0.0; f.len()];
    v[f.position(MultiIndex { l: 2, k: [3, 0] }).unwrap()] = 1.0;
    assert!((f.h_norm(&v, 1.0).unwrap().powi(2) - 16.0).abs() < 1e-12);
}

#[test]
fn resolution_rule_examples() {
    assert_eq!(resolution_level(512, 3.0, 1, 1.0), 1);
    assert_eq!(resolution_level(1 << 18, 3.0, 1, 1.0), 2);
    // A constant multiplier moves the level by a fixed offset only.
    for k in [10, 14, 18, 22] {
        let n = 1usize << k;
        let a = resolution_level(n, 3.0, 1, 1.0);
        let b = resolution_level(n, 3.0, 1, 4.0);
        assert!(b >= a && b <= a + 2);
    }
}

#[test]
fn design_matrix_matches_recursive_splines() {
    let grid = line(255);
    let f = Frame::<f64>::build(grid, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pts: Vec<[f64; 2]> = (0..50).map(|_| [rng.random_range(0.0..1.0), 0.0]).collect();
    let phi = f.design_matrix(&pts).unwrap();
    for (i, x) in pts.iter().enumerate() {
        for a in 0..f.len() {
            let mi = f.multi_index(a);
            let lev = mi.l + f.options().base_level;
            let expect = 2f64.powf(lev as f64 / 2.0) * reference_spline(4, 1 << lev, mi.k[0], x[0]);
            assert!((phi[(i, a)] - expect).abs() <= 1e-10);
        }
    }
    assert!(f.design_matrix(&[[1.5, 0.0]]).is_err());
}

#[test]
fn node_rows_match_samples() {
    for grid in [line(127), Grid::new(2, 15).unwrap()] {
        let f = Frame::<f64>::with_options(grid, 1, FrameOptions::new(4, 0)).unwrap();
        let idx = [0, 5, grid.len() / 2, grid.len() - 1];
        let pts: Vec<[f64; 2]> = idx.iter().map(|&i| grid.coords(i)).collect();
        let phi = f.design_matrix(&pts).unwrap();
        for (r, &node) in idx.iter().enumerate() {
            for a in 0..f.len() {
                assert_eq!(phi[(r, a)], f.basis_field(a).values()[node]);
            }
        }
    }
}

#[test]
fn gram_is_symmetric_with_rank_of_finest_level() {
    let f = Frame::<f64>::build(line(255), 2).unwrap();
    let g = f.gram();
    let p = f.len();
    let m = nalgebra::DMatrix::from_fn(p, p, |i, j| g[(i, j)]);
    assert!((&m - m.transpose()).abs().max() == 0.0);
    let eig = nalgebra::SymmetricEigen::new(m).eigenvalues;
    let top = eig.max();
    assert!(eig.min() > -1e-12 * top);
    let rank = eig.iter().filter(|&&e| e > 1e-9 * top).count();
    assert_eq!(rank, f.level_count(2));
}

#[test]
fn synthesis_is_adjoint_to_inner_products() {
    let grid = line(127);
    let f = Frame::<f64>::build(grid, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let v: Vec<f64> = (0..f.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w = GridField::from_fn(grid, |x: &[f64]| (3.0 * x[0]).exp() - x[0]);
    let lhs = quadrature_inner(&f.synthesize(&v).unwrap(), &w).unwrap();
    let ip = f.inner_products(&w).unwrap();
    let rhs: f64 = v.iter().zip(&ip).map(|(a, b)| a * b).sum();
    assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
}

#[test]
fn coefficient_norms_track_sobolev_norms() {
    let grid = line(511);
    let f = Frame::<f64>::build(grid, 4).unwrap();
    let tests: Vec<Box<dyn Fn(f64) -> f64>> = vec![
        Box::new(|x| (PI * x).sin()),
        Box::new(|x| (2.0 * PI * x).cos()),
        Box::new(|x| 1.0 + x * x),
        Box::new(|x| (-(x - 0.5).powi(2) / 0.02).exp()),
        Box::new(|x| x.exp()),
        Box::new(|x| (3.0 * PI * x).sin() * x),
        Box::new(|x| 1.0 / (1.0 + x)),
        Box::new(|x| (5.0 * x).tanh()),
        Box::new(|x| (x * (1.0 - x)).powi(2) * 10.0),
        Box::new(|x| (4.0 * PI * x).sin() + 0.5),
    ];
    for (s, kind) in [
        (0.0, NormKind::L2),
        (1.0, NormKind::H1),
        (2.0, NormKind::H2),
    ] {
        let ratios: Vec<f64> = tests
            .iter()
            .map(|t| {
                let u = GridField::from_fn(grid, |x: &[f64]| t(x[0]));
                let v = f.select(&u).unwrap();
                f.h_norm(&v, s).unwrap() / discrete_norm(&u, kind).unwrap()
            })
            .collect();
        let (lo, hi) = ratios
            .iter()
            .fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        // Level 0 already resolves 2^{L0} oscillations at weight 1, so the
        // equivalence constants carry a factor up to 4^{L0 s}.
        let bound = 2.0 * 4f64.powf(f.options().base_level as f64 * s);
        assert!(hi / lo < bound, "s={s}: ratios {ratios:?}");
    }
}

#[test]
fn two_dimensional_frame() {
    let grid = Grid::new(2, 31).unwrap();
    let f = Frame::<f64>::build(grid, 2).unwrap();
    assert_eq!(f.level_count(0), 16);
    assert_eq!(f.level_count(2), 49);
    let a = f.position(MultiIndex { l: 1, k: [2, 3] }).unwrap();
    let phi = f.basis_field(a);
    let rec = f.synthesize(&f.select(&phi).unwrap()).unwrap();
    assert!(rel_l2(&rec, &phi) < 1e-8);
    let x = [0.3, 0.8];
    let vals = f.eval_point(&x).unwrap();
    let mi = f.multi_index(a);
    let lev = mi.l + f.options().base_level;
    let expect = 2f64.powf(lev as f64)
        * reference_spline(4, 1 << lev, mi.k[0], x[0])
        * reference_spline(4, 1 << lev, mi.k[1], x[1]);
    let got = vals
        .iter()
        .find(|(b, _)| *b == a)
        .map(|p| p.1)
        .unwrap_or(0.0);
    assert!((got - expect).abs() < 1e-12);
}

#[test]
fn single_precision_frame() {
    let grid = line(127);
    let f = Frame::<f32>::build(grid, 2).unwrap();
    let s = GridField::from_fn(grid, |x: &[f32]| (std::f32::consts::PI * x[0]).sin());
    let rec = f.synthesize(&f.select(&s).unwrap()).unwrap();
    assert!((&rec - &s).max_abs() < 1e-3);
}

#[test]
fn cache_round_trip_and_invalidation() {
    let dir = tempfile::tempdir().unwrap();
    let grid = line(127);
    let opts = FrameOptions::default_for(1);
    let built = load_or_build::<f64>(Some(dir.path()), grid, 2, opts).unwrap();
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(files.len(), 1);
    let path = files[0].as_ref().unwrap().path();
    let loaded = load_or_build::<f64>(Some(dir.path()), grid, 2, opts).unwrap();
    assert_eq!(built.gram(), loaded.gram());
    assert_eq!(built.interior_gram(), loaded.interior_gram());

    // Corrupt the header: the file is ignored and rebuilt.
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[16] ^= 0xff;
    std::fs::write(&path, &bytes).unwrap();
    let rebuilt = load_or_build::<f64>(Some(dir.path()), grid, 2, opts).unwrap();
    assert_eq!(rebuilt.gram(), built.gram());
    assert_eq!(std::fs::read(&path).unwrap()[16], bytes[16] ^ 0xff);
}
