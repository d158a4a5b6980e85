use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;

fn line(n: usize) -> Grid {
    Grid::new(1, n).unwrap()
}

#[test]
fn grid_rejects_bad_shapes() {
    assert!(Grid::new(3, 10).is_err());
    assert!(Grid::new(1, 2).is_err());
    let g = line(255);
    assert_eq!(g.h::<f64>() * 256.0, 1.0);
    assert_eq!(Grid::new(2, 7).unwrap().len(), 81);
}

#[test]
fn quadrature_of_constants_is_unit_measure() {
    for d in [1, 2] {
        let g = Grid::new(d, 17).unwrap();
        let one = GridField::constant(g, 1.0f64);
        assert!((quadrature_inner(&one, &one).unwrap() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn quadrature_of_sine_squared() {
    let g = line(255);
    let s = GridField::from_fn(g, |x: &[f64]| (PI * x[0]).sin());
    let v = quadrature_inner(&s, &s).unwrap();
    assert!((v - 0.5).abs() < 1e-4, "{v}");
    let zero = GridField::zeros(g);
    assert_eq!(quadrature_inner(&zero, &s).unwrap(), 0.0);
}

#[test]
fn quadrature_rejects_grid_mismatch() {
    let a = GridField::<f64>::zeros(line(7));
    let b = GridField::<f64>::zeros(line(9));
    assert!(quadrature_inner(&a, &b).is_err());
}

#[test]
fn norms_of_constant() {
    let g = line(63);
    let u = GridField::constant(g, -3.0f64);
    for kind in [
        NormKind::L2,
        NormKind::H1,
        NormKind::Linf,
        NormKind::H2,
        NormKind::C1,
    ] {
        let v = discrete_norm(&u, kind).unwrap();
        assert!((v - 3.0).abs() < 1e-12, "{kind}: {v}");
    }
}

#[test]
fn norms_of_sine() {
    let g = line(511);
    let u = GridField::from_fn(g, |x: &[f64]| (PI * x[0]).sin());
    let l2 = discrete_norm(&u, NormKind::L2).unwrap();
    let h1 = discrete_norm(&u, NormKind::H1).unwrap();
    assert!((l2 - 0.5f64.sqrt()).abs() < 1e-3);
    assert!((h1 - (0.5 + PI * PI / 2.0).sqrt()).abs() < 1e-2, "{h1}");
    let sq = quadrature_inner(&u, &u).unwrap();
    assert_eq!(l2 * l2, sq.sqrt() * sq.sqrt());
    assert_eq!(l2, sq.sqrt());
}

#[test]
fn second_derivative_of_quadratic_bubble() {
    let g = line(31);
    let u = GridField::from_fn(g, |x: &[f64]| x[0] * (1.0 - x[0]));
    let d2 = fd_derivative(&u, 0, 2).unwrap();
    assert!(d2.values().iter().all(|v| (v + 2.0).abs() < 1e-9));
    let semi = discrete_norm(&d2, NormKind::L2).unwrap();
    assert!((semi - 2.0).abs() < 1e-9);
    let h1 = discrete_norm(&u, NormKind::H1).unwrap();
    let h2 = discrete_norm(&u, NormKind::H2).unwrap();
    assert!((h2 * h2 - h1 * h1 - 4.0).abs() < 1e-8);
}

#[test]
fn stencils_exact_on_quadratics() {
    let g = line(15);
    let u = GridField::from_fn(g, |x: &[f64]| x[0] * x[0]);
    let d2 = fd_derivative(&u, 0, 2).unwrap();
    assert!(d2.values().iter().all(|v| (v - 2.0).abs() < 1e-10));
    let d1 = fd_derivative(&u, 0, 1).unwrap();
    for (i, v) in d1.values().iter().enumerate() {
        let x = g.coords::<f64>(i)[0];
        assert!((v - 2.0 * x).abs() < 1e-12);
    }
    let c = GridField::constant(g, 5.0);
    assert!(fd_derivative(&c, 0, 1).unwrap().max_abs() < 1e-12);
    assert!(fd_derivative(&c, 0, 3).is_err());
    assert!(fd_derivative(&c, 1, 1).is_err());
}

#[test]
fn stencils_exact_on_quadratics_2d() {
    let g = Grid::new(2, 9).unwrap();
    let u = GridField::from_fn(g, |x: &[f64]| x[0] * x[0] + 3.0 * x[0] * x[1] - x[1] * x[1]);
    let dxx = fd_derivative(&u, 0, 2).unwrap();
    let dyy = fd_derivative(&u, 1, 2).unwrap();
    let dy = fd_derivative(&u, 1, 1).unwrap();
    assert!(dxx.values().iter().all(|v| (v - 2.0).abs() < 1e-9));
    assert!(dyy.values().iter().all(|v| (v + 2.0).abs() < 1e-9));
    for (i, v) in dy.values().iter().enumerate() {
        let [x, y] = g.coords::<f64>(i);
        assert!((v - (3.0 * x - 2.0 * y)).abs() < 1e-10);
    }
}

#[test]
fn first_derivative_converges_at_second_order() {
    let errs: Vec<f64> = [63, 127, 255, 511]
        .iter()
        .map(|&n| {
            let g = line(n);
            let u = GridField::from_fn(g, |x: &[f64]| (PI * x[0]).sin());
            let du = fd_derivative(&u, 0, 1).unwrap();
            du.values()
                .iter()
                .enumerate()
                .map(|(i, v)| (v - PI * (PI * g.coords::<f64>(i)[0]).cos()).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn unknown_norm_kind_rejected() {
    assert!("h3".parse::<NormKind>().is_err());
    assert_eq!("C1".parse::<NormKind>().unwrap(), NormKind::C1);
}

#[test]
fn interpolation_matches_nodes_and_lines() {
    let g = Grid::new(2, 7).unwrap();
    let u = GridField::from_fn(g, |x: &[f64]| 1.0 + 2.0 * x[0] - x[1]);
    for p in [[0.0, 0.0], [1.0, 1.0], [0.3, 0.71], [0.125, 0.5]] {
        let v = u.interpolate(&p).unwrap();
        assert!((v - (1.0 + 2.0 * p[0] - p[1])).abs() < 1e-12);
    }
    assert!(u.interpolate(&[1.2, 0.5]).is_err());
    assert!(u.interpolate(&[0.5]).is_err());
}

#[test]
fn single_precision_fields_work() {
    let g = line(127);
    let u = GridField::<f32>::from_fn(g, |x: &[f32]| (std::f32::consts::PI * x[0]).sin());
    let l2 = discrete_norm(&u, NormKind::L2).unwrap();
    assert!((l2 - 0.5f32.sqrt()).abs() < 1e-3);
}

proptest! {
    #[test]
    fn quadrature_is_symmetric_and_exact_on_linear_interpolants(
        a in prop::collection::vec(-10.0f64..10.0, 18),
        b in prop::collection::vec(-10.0f64..10.0, 18),
    ) {
        let g = line(16);
        let fa = GridField::new(g, a.clone()).unwrap();
        let fb = GridField::new(g, b).unwrap();
        let ab = quadrature_inner(&fa, &fb).unwrap();
        let ba = quadrature_inner(&fb, &fa).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab.abs()));
        // Integral of the piecewise-linear interpolant, summed cell by cell.
        let h = 1.0 / 17.0;
        let by_cells: f64 = a.windows(2).map(|w| 0.5 * (w[0] + w[1]) * h).sum();
        let one = GridField::constant(g, 1.0);
        let q = quadrature_inner(&fa, &one).unwrap();
        prop_assert!((q - by_cells).abs() <= 1e-13 * (1.0 + by_cells.abs()));
    }

    #[test]
    fn csv_and_json_round_trip_bit_exact(
        vals in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL, 25),
    ) {
        let g = Grid::new(2, 3).unwrap();
        let f = GridField::new(g, vals).unwrap();
        let j = GridField::<f64>::from_json(&f.to_json().unwrap()).unwrap();
        let c = GridField::<f64>::read_csv(f.to_csv_string().as_bytes()).unwrap();
        for ((x, y), z) in f.values().iter().zip(j.values()).zip(c.values()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
            prop_assert_eq!(x.to_bits(), z.to_bits());
        }
    }
}
