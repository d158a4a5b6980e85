use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::numerics::discrete_norm;
use crate::NormKind;

fn line(n: usize) -> Grid {
    Grid::new(1, n).unwrap()
}

fn max_interior_err(a: &GridField<f64>, f: impl Fn(&[f64]) -> f64) -> f64 {
    let g = *a.grid();
    g.interior_indices()
        .map(|i| {
            let x = g.coords::<f64>(i);
            (a.values()[i] - f(&x[..g.d()])).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn darcy_apply_examples() {
    let g = line(31);
    let bubble = GridField::from_fn(g, |x: &[f64]| x[0] * (1.0 - x[0]));
    let one = GridField::constant(g, 1.0);
    let lap = darcy_apply(&one, &bubble).unwrap();
    assert!(max_interior_err(&lap, |_| -2.0) < 1e-9);
    assert!(g.is_boundary(0) && lap.values()[0] == 0.0);

    let f = GridField::from_fn(g, |x: &[f64]| 1.0 + x[0]);
    let out = darcy_apply(&f, &bubble).unwrap();
    assert!(max_interior_err(&out, |x| -1.0 - 4.0 * x[0]) < 1e-9);

    let zero = darcy_apply(&f, &GridField::zeros(g)).unwrap();
    assert_eq!(zero.max_abs(), 0.0);
    assert!(darcy_apply(&f, &GridField::zeros(line(9))).is_err());
}

#[test]
fn darcy_solve_constant_source() {
    let g = line(63);
    let p = DarcyProblem::new(GridField::constant(g, 1.0), GridField::constant(g, 2.0)).unwrap();
    let u = darcy_solve(&p).unwrap();
    assert!(max_interior_err(&u, |x| x[0] * x[0] - x[0]) < 1e-10);
    assert!((u.values()[32] + 0.25).abs() < 1e-10);
    assert_eq!(u.boundary_max_abs(), 0.0);
    assert!(u.max() <= 0.0);

    let z = DarcyProblem::new(GridField::constant(g, 1.0), GridField::zeros(g)).unwrap();
    assert_eq!(darcy_solve(&z).unwrap().max_abs(), 0.0);
}

#[test]
fn darcy_manufactured_solution_converges_quadratically() {
    let errs: Vec<f64> = [31, 63, 127, 255]
        .iter()
        .map(|&n| {
            let g = line(n);
            let f = GridField::from_fn(g, |x: &[f64]| 1.0 + x[0]);
            let src = GridField::from_fn(g, |x: &[f64]| {
                PI * (PI * x[0]).cos() - (1.0 + x[0]) * PI * PI * (PI * x[0]).sin()
            });
            let u = darcy_solve(&DarcyProblem::new(f, src).unwrap()).unwrap();
            max_interior_err(&u, |x| (PI * x[0]).sin())
        })
        .collect();
    assert!(errs[0] < 1e-2);
    for w in errs.windows(2) {
        let r = w[0] / w[1];
        assert!((3.0..=5.0).contains(&r), "ratio {r}");
    }
}

#[test]
fn darcy_2d_matches_polynomial_and_dense_oracle() {
    let g = Grid::new(2, 9).unwrap();
    let u_star = GridField::from_fn(g, |x: &[f64]| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]));
    let src = GridField::from_fn(g, |x: &[f64]| {
        -2.0 * x[1] * (1.0 - x[1]) - 2.0 * x[0] * (1.0 - x[0])
    });
    let one = GridField::constant(g, 1.0);
    assert!(
        max_interior_err(&darcy_apply(&one, &u_star).unwrap(), |x| {
            -2.0 * x[1] * (1.0 - x[1]) - 2.0 * x[0] * (1.0 - x[0])
        }) < 1e-10
    );
    let u = darcy_solve(&DarcyProblem::new(one, src).unwrap()).unwrap();
    assert!(max_interior_err(&u, |x| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])) < 1e-12);

    // Variable conductivity against a dense solve of the matrix assembled
    // column by column from the apply operator.
    let f = GridField::from_fn(g, |x: &[f64]| {
        1.0 + x[0] * x[1] + 0.3 * (3.0 * x[0]).sin().powi(2)
    });
    let rhs = GridField::from_fn(g, |x: &[f64]| 1.0 + x[0] - x[1]);
    let idx: Vec<usize> = g.interior_indices().collect();
    let m = idx.len();
    let mut a = nalgebra::DMatrix::<f64>::zeros(m, m);
    for (c, &p) in idx.iter().enumerate() {
        let mut e = vec![0.0; g.len()];
        e[p] = 1.0;
        let col = darcy_apply(&f, &GridField::new(g, e).unwrap()).unwrap();
        for (r, &q) in idx.iter().enumerate() {
            a[(r, c)] = col.values()[q];
        }
    }
    let b = nalgebra::DVector::from_iterator(m, idx.iter().map(|&p| rhs.values()[p]));
    let x = a.lu().solve(&b).unwrap();
    let u = darcy_solve(&DarcyProblem::new(f, rhs).unwrap()).unwrap();
    for (k, &p) in idx.iter().enumerate() {
        assert!((u.values()[p] - x[k]).abs() < 1e-12);
    }
}

#[test]
fn darcy_rejects_nonpositive_conductivity() {
    let g = line(7);
    let mut v = vec![1.0; g.len()];
    v[3] = 0.0;
    let p = DarcyProblem::new(GridField::new(g, v).unwrap(), GridField::constant(g, 1.0)).unwrap();
    assert!(matches!(darcy_solve(&p), Err(Error::Precondition(_))));
}

#[test]
fn darcy_maximum_principle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let g = line(47);
        let vals = (0..g.len()).map(|_| rng.random_range(0.5..3.0)).collect();
        let f = GridField::new(g, vals).unwrap();
        let src = GridField::from_fn(g, |x: &[f64]| 0.1 + x[0] * x[0]);
        let u = darcy_solve(&DarcyProblem::new(f, src).unwrap()).unwrap();
        assert!(u.max() <= 0.0);
    }
}

#[test]
fn schrodinger_apply_examples() {
    let g = line(63);
    let out =
        schrodinger_apply(&GridField::constant(g, 1.0), &GridField::constant(g, 2.0)).unwrap();
    assert!(max_interior_err(&out, |_| -2.0) < 1e-12);
    let sq = GridField::from_fn(g, |x: &[f64]| x[0] * x[0]);
    let out = schrodinger_apply(&GridField::zeros(g), &sq).unwrap();
    assert!(max_interior_err(&out, |_| 1.0) < 1e-9);
    let c: f64 = 1.5;
    let k = (2.0 * c).sqrt();
    let ch = GridField::from_fn(g, |x: &[f64]| (k * x[0]).cosh());
    let out = schrodinger_apply(&GridField::constant(g, c), &ch).unwrap();
    assert!(out.max_abs() < 1e-3);
}

#[test]
fn schrodinger_solve_examples() {
    let g = line(63);
    let u = schrodinger_solve(
        &SchrodingerProblem::new(GridField::zeros(g), GridField::constant(g, 1.0f64)).unwrap(),
    )
    .unwrap();
    assert!(u.values().iter().all(|v| (v - 1.0).abs() < 1e-12));

    let s2 = 2f64.sqrt();
    let errs: Vec<f64> = [31, 63, 127]
        .iter()
        .map(|&n| {
            let g = line(n);
            let u = schrodinger_solve(
                &SchrodingerProblem::new(GridField::constant(g, 1.0), GridField::constant(g, 1.0))
                    .unwrap(),
            )
            .unwrap();
            max_interior_err(&u, |x| (s2 * (x[0] - 0.5)).cosh() / (s2 / 2.0).cosh())
        })
        .collect();
    assert!(errs[0] < 1e-4);
    for w in errs.windows(2) {
        let r = w[0] / w[1];
        assert!((3.0..=5.0).contains(&r), "ratio {r}");
    }
}

#[test]
fn schrodinger_rejects_bad_data() {
    let g = line(7);
    let neg = GridField::constant(g, -0.1);
    let one = GridField::constant(g, 1.0);
    assert!(matches!(
        schrodinger_solve(&SchrodingerProblem::new(neg, one.clone()).unwrap()),
        Err(Error::Precondition(_))
    ));
    assert!(matches!(
        schrodinger_solve(&SchrodingerProblem::new(one, GridField::zeros(g)).unwrap()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn schrodinger_positivity_on_random_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for draw in 0..100 {
        let d = if draw % 4 == 0 { 2 } else { 1 };
        let g = Grid::new(d, if d == 1 { 63 } else { 15 }).unwrap();
        let amp = rng.random_range(0.0..20.0);
        let (a, b) = (rng.random_range(0.0..6.0), rng.random_range(0.0..6.0));
        let f = GridField::from_fn(g, |x: &[f64]| {
            amp * (a * x[0] + b * x[x.len() - 1]).sin().powi(2)
        });
        let gmin = rng.random_range(0.1..2.0);
        let bd = GridField::from_fn(g, |x: &[f64]| gmin + (x[0] * 7.0).sin().powi(2));
        let u =
            schrodinger_solve(&SchrodingerProblem::new(f.clone(), bd.clone()).unwrap()).unwrap();
        let bound = schrodinger_positivity_bound(bd.boundary_min(), f.max_abs());
        assert!(u.min() >= bound, "draw {draw}: {} < {bound}", u.min());
        let res = schrodinger_apply(&f, &u).unwrap();
        assert!(res.max_abs() <= 1e-8 * (1.0 + u.max_abs() / g.h::<f64>().powi(2)));
        for i in 0..g.len() {
            if g.is_boundary(i) {
                assert_eq!(u.values()[i], bd.values()[i]);
            }
        }
    }
}

#[test]
fn single_precision_solve() {
    let g = line(31);
    let p = DarcyProblem::new(
        GridField::<f32>::constant(g, 1.0),
        GridField::constant(g, 2.0),
    )
    .unwrap();
    let u = darcy_solve(&p).unwrap();
    assert!((u.values()[16] + 0.25).abs() < 1e-4);
    let n = discrete_norm(&u, NormKind::Linf).unwrap();
    assert!((n - 0.25).abs() < 1e-4);
}

fn field(g: Grid) -> impl Strategy<Value = GridField<f64>> {
    prop::collection::vec(-2.0f64..2.0, g.len()).prop_map(move |v| GridField::new(g, v).unwrap())
}

proptest! {
    #[test]
    fn darcy_apply_is_bilinear(
        f1 in field(Grid::new(2, 5).unwrap()),
        f2 in field(Grid::new(2, 5).unwrap()),
        u1 in field(Grid::new(2, 5).unwrap()),
        u2 in field(Grid::new(2, 5).unwrap()),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let comb = |x: &GridField<f64>, y: &GridField<f64>| &(x * a) + &(y * b);
        let lhs = darcy_apply(&comb(&f1, &f2), &u1).unwrap();
        let rhs = comb(&darcy_apply(&f1, &u1).unwrap(), &darcy_apply(&f2, &u1).unwrap());
        let scale = 1.0 + lhs.max_abs();
        prop_assert!((&lhs - &rhs).max_abs() <= 1e-12 * scale);
        let lhs = darcy_apply(&f1, &comb(&u1, &u2)).unwrap();
        let rhs = comb(&darcy_apply(&f1, &u1).unwrap(), &darcy_apply(&f1, &u2).unwrap());
        let scale = 1.0 + lhs.max_abs();
        prop_assert!((&lhs - &rhs).max_abs() <= 1e-12 * scale);
    }
}
