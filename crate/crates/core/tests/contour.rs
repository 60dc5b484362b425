use std::f64::consts::PI;

use proptest::prelude::*;
use qs2l::contour::*;
use qs2l::kernels::LayerParams;
use qs2l::spectrum::{self, Branch};

fn params() -> LayerParams {
    LayerParams::new(1.0, 1.0, 1.0, 0.7).unwrap()
}

fn fast_cfg() -> SolverConfig {
    SolverConfig { n_nodes: 128, n_modes: 16, ..SolverConfig::default() }
}

#[test]
fn radius_profile_values() {
    assert_eq!(radius_profile(0.7, &[0.0; 4]).unwrap(), vec![0.7; 4]);
    let r = radius_profile(1.0, &[0.05; 3]).unwrap();
    assert!(r.iter().all(|v| (v - 1.1f64.sqrt()).abs() < 1e-15));
    let input = [0.01, -0.02, 0.3, -0.1];
    let big = radius_profile(0.8, &input).unwrap();
    for (r, big_r) in input.iter().zip(&big) {
        assert!(((big_r * big_r - 0.64) / 2.0 - r).abs() < 1e-15);
    }
    assert!(matches!(radius_profile(0.5, &[0.0, -0.2]), Err(ContourError::RadiusCollapse { .. })));
}

#[test]
fn deformation_roundtrip_and_validation() {
    let c = [vec![0.01, -0.003, 0.0005], vec![0.02, 0.001, -0.0002]];
    let d = RadialDeformation::from_coeffs(3, c.clone(), 128).unwrap();
    assert!(d.consistency_defect() < 1e-12);
    for i in 0..128 {
        let t = 2.0 * PI * i as f64 / 128.0;
        assert!((d.eval(1, t).0 - d.eval(1, -t).0).abs() < 1e-15);
        assert!((d.eval(2, t).0 - d.eval(2, t + 2.0 * PI / 3.0).0).abs() < 1e-14);
    }
    let json = serde_json::to_string(&d).unwrap();
    let back: RadialDeformation = serde_json::from_str(&json).unwrap();
    assert_eq!(back, d);
    assert!(RadialDeformation::from_coeffs(3, c.clone(), 100).is_err());
    assert!(RadialDeformation::from_coeffs(3, c.clone(), 32).is_err());
    assert!(RadialDeformation::from_coeffs(30, c, 128).is_err());
    assert!(RadialDeformation::zero(2, 8, 256).unwrap().resampled(512).unwrap().consistency_defect() == 0.0);
}

#[test]
fn boundary_table_columns() {
    let p = params();
    let d = RadialDeformation::zero(2, 8, 64).unwrap();
    let rows = d.boundary_table(&p, 16).unwrap();
    assert_eq!(rows.len(), 16);
    for r in rows {
        assert_eq!(r[1], 1.0);
        assert!((r[2] - 0.7).abs() < 1e-15);
        assert!((r[5].hypot(r[6]) - 0.7).abs() < 1e-15);
    }
}

#[test]
fn discs_are_stationary() {
    for p in [params(), LayerParams::new(1.0, 1.0, 1.0, 1.0).unwrap(), LayerParams::new(3.0, 0.5, 2.0, 1.2).unwrap()] {
        let r = RadialDeformation::zero(1, 8, 256).unwrap();
        for omega in [-1.0, 0.0, 0.5] {
            assert!(functional_f(&p, omega, &r).unwrap().sup_norm() <= 1e-10);
        }
    }
}

fn wavy(m: u32, n_nodes: usize) -> RadialDeformation {
    RadialDeformation::from_coeffs(m, [vec![0.03, -0.01, 0.004, 0.001], vec![-0.02, 0.008, 0.002, -0.001]], n_nodes).unwrap()
}

#[test]
fn even_input_gives_odd_output() {
    let n = 128;
    let f = functional_f(&params(), 0.3, &wavy(2, n)).unwrap();
    assert!(f.sup_norm() > 1e-4);
    for v in &f.values {
        for i in 0..n {
            assert!((v[i] + v[(n - i) % n]).abs() <= 1e-12, "node {i}");
        }
    }
}

#[test]
fn m_fold_output() {
    let n = 128;
    for m in [2u32, 4] {
        let f = functional_f(&params(), -0.2, &wavy(m, n)).unwrap();
        let shift = n / m as usize;
        for v in &f.values {
            for i in 0..n {
                assert!((v[i] - v[(i + shift) % n]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn linearization_is_multiplier() {
    let p = LayerParams::new(2.0, 0.8, 1.0, 0.6).unwrap();
    let r0 = RadialDeformation::zero(1, 8, 128).unwrap();
    let j = jacobian_fd(&p, 0.25, &r0, 1e-6, 8).unwrap();
    for n in 1..=8 {
        let exact = linearized_multiplier(&p, 0.25, n as u32).unwrap();
        let b = j.block(n, n);
        for a in 0..2 {
            for c in 0..2 {
                assert!((b[a][c] - exact[a][c]).abs() <= 1e-5 * exact[a][c].abs(), "n={n} ({a},{c})");
            }
        }
        for q in 1..=8 {
            if q != n {
                let off = j.block(q, n);
                assert!(off.iter().flatten().all(|v| v.abs() < 1e-8));
            }
        }
    }
}

#[test]
fn fd_step_halving_is_second_order() {
    let p = params();
    let r0 = RadialDeformation::from_coeffs(2, [vec![0.02, 0.0, 0.0, 0.0], vec![0.01, 0.0, 0.0, 0.0]], 64).unwrap();
    let ja = jacobian_fd(&p, 0.1, &r0, 1e-4, 2).unwrap();
    let jb = jacobian_fd(&p, 0.1, &r0, 5e-5, 2).unwrap();
    let jc = jacobian_fd(&p, 0.1, &r0, 2.5e-5, 2).unwrap();
    let d1 = (ja.block(1, 1)[0][0] - jb.block(1, 1)[0][0]).abs();
    let d2 = (jb.block(1, 1)[0][0] - jc.block(1, 1)[0][0]).abs();
    assert!(d1 < 1e-6 && d2 < 0.4 * d1 + 1e-10, "{d1} {d2}");
    assert!(jacobian_fd(&p, 0.1, &r0, 1e-3, 2).is_err());
}

#[test]
fn multiplier_is_singular_on_branches() {
    let p = params();
    for (m, sign) in [(2u32, Branch::Minus), (3, Branch::Plus), (5, Branch::Minus)] {
        let omega = spectrum::omega_branch(&p, m, sign).unwrap();
        let mm = linearized_multiplier(&p, omega, m).unwrap();
        let base = spectrum::matrix_m(&p, m, omega).unwrap();
        for a in 0..2 {
            for c in 0..2 {
                assert_eq!(mm[a][c], -(m as f64) * base[a][c]);
            }
        }
        let v = unit_kernel_vector(&p, m, sign).unwrap();
        let av = spectrum::apply(&mm, v);
        assert!(av[0].hypot(av[1]) < 1e-12 * spectrum::frobenius(&mm));
    }
}

#[test]
fn zero_amplitude_is_trivial_branch() {
    let p = params();
    let sol = vstate_solve(&p, 2, Branch::Minus, 0.0, None, &fast_cfg()).unwrap();
    assert_eq!(sol.omega, spectrum::omega_branch(&p, 2, Branch::Minus).unwrap());
    assert!(sol.deformation.coeffs.iter().flatten().all(|&c| c == 0.0));
}

fn tangency_remainder(sol: &VStateSolution) -> f64 {
    let s = sol.amplitude;
    let mut worst: f64 = 0.0;
    for k in 0..2 {
        for (q, c) in sol.deformation.coeffs[k].iter().enumerate() {
            let lead = if q == 0 { s * sol.direction[k] } else { 0.0 };
            worst = worst.max((c - lead).abs());
        }
    }
    worst
}

#[test]
fn small_amplitude_states() {
    let p = params();
    let cfg = SolverConfig::default();
    for (m, sign) in [(2u32, Branch::Minus), (3, Branch::Plus)] {
        let s = 1e-3;
        let sol = vstate_solve(&p, m, sign, s, None, &cfg).unwrap();
        assert!(sol.residual <= 1e-10);
        assert!(tangency_remainder(&sol) <= 10.0 * s * s);
        let omega0 = spectrum::omega_branch(&p, m, sign).unwrap();
        // |Ω − Ω_m| / s observed at 2.0e-4 and 1.9e-3
        assert!((sol.omega - omega0).abs() <= 0.01 * s);
        let dir = unit_kernel_vector(&p, m, sign).unwrap();
        let proj = dir[0] * sol.deformation.coeffs[0][0] + dir[1] * sol.deformation.coeffs[1][0];
        assert!((proj - s).abs() < 1e-15);
        let fine = sol.deformation.resampled(2 * cfg.n_nodes).unwrap();
        assert!(functional_f(&p, sol.omega, &fine).unwrap().sup_norm() <= 1e-7);
        let json = serde_json::to_value(&sol).unwrap();
        assert_eq!(json["deformation"]["n_nodes"], 256);
    }
}

#[test]
fn branch_is_continuous_and_symmetric() {
    let p = params();
    let cfg = fast_cfg();
    let grid = [1e-3, 2e-3, 4e-3];
    let out = branch_continue(&p, 2, Branch::Minus, &grid, &cfg);
    assert!(out.failure.is_none(), "{:?}", out.failure);
    assert_eq!(out.solutions.len(), 3);
    assert_eq!(out.last_good_amplitude, Some(4e-3));
    let direct = vstate_solve(&p, 2, Branch::Minus, 1e-3, None, &cfg).unwrap();
    assert!((direct.omega - out.solutions[0].omega).abs() <= 1e-9);
    let omega0 = spectrum::omega_branch(&p, 2, Branch::Minus).unwrap();
    let mut prev = (0.0, omega0);
    for sol in &out.solutions {
        assert!(sol.residual <= 1e-10);
        assert!((sol.omega - prev.1).abs() <= 0.01 * (sol.amplitude - prev.0));
        prev = (sol.amplitude, sol.omega);
        for nodal in &sol.deformation.nodal {
            let n = nodal.len();
            for q in (1..n / 2).filter(|q| q % 2 != 0) {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, v) in nodal.iter().enumerate() {
                    let a = 2.0 * PI * (q * i) as f64 / n as f64;
                    re += v * a.cos();
                    im += v * a.sin();
                }
                assert!(re.hypot(im) / n as f64 <= 1e-10);
            }
        }
    }
}

#[test]
fn branch_reports_failure() {
    let p = params();
    let out = branch_continue(&p, 2, Branch::Minus, &[1e-3, 0.5], &fast_cfg());
    assert_eq!(out.solutions.len(), 1);
    assert_eq!(out.last_good_amplitude, Some(1e-3));
    assert!(out.failure.unwrap().contains("0.5"));
}

#[test]
fn collision_parameters_are_refused() {
    let base = LayerParams::new(1.0, 1.0, 1.0, 0.5).unwrap();
    let rec = spectrum::collision_scan(&base, 3, 6, 256).unwrap();
    let hit = rec.iter().find(|r| r.n == 2).unwrap();
    let p = base.with_b2(hit.b2_root);
    let e = vstate_solve(&p, 3, Branch::Minus, 1e-3, None, &fast_cfg()).unwrap_err();
    assert!(matches!(e, ContourError::Collision { m: 3, .. }), "{e}");
    assert!(check_collisions(&params(), 2, Branch::Minus, 16, 256).is_ok());
}

#[test]
fn solver_argument_checks() {
    let p = params();
    let few = SolverConfig { n_modes: 4, ..fast_cfg() };
    assert!(matches!(vstate_solve(&p, 2, Branch::Minus, 1e-3, None, &few), Err(ContourError::InvalidGrid(_))));
    assert!(matches!(vstate_solve(&p, 2, Branch::Minus, 0.2, None, &fast_cfg()), Err(ContourError::InvalidArgument(_))));
    assert!(vstate_solve(&p, 0, Branch::Minus, 1e-3, None, &fast_cfg()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn radius_roundtrip(b in 0.1f64..3.0, frac in prop::collection::vec(-0.45f64..1.0, 1..32)) {
        let r: Vec<f64> = frac.iter().map(|f| f * b * b).collect();
        let big = radius_profile(b, &r).unwrap();
        for (x, y) in r.iter().zip(&big) {
            prop_assert!(((y * y - b * b) / 2.0 - x).abs() <= 1e-15 * (1.0 + b * b));
        }
    }

    #[test]
    fn oddness_for_random_shapes(c1 in prop::collection::vec(-0.02f64..0.02, 3), c2 in prop::collection::vec(-0.02f64..0.02, 3), omega in -1.0f64..1.0) {
        let d = RadialDeformation::from_coeffs(1, [c1, c2], 64).unwrap();
        let f = functional_f(&params(), omega, &d).unwrap();
        for v in &f.values {
            for i in 0..64 {
                prop_assert!((v[i] + v[(64 - i) % 64]).abs() <= 1e-12);
            }
        }
    }
}
