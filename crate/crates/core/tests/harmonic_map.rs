use std::f64::consts::PI;

use ncforms::harmonic::*;
use ncforms::random;
use ncforms::*;
use proptest::prelude::*;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn minkowski() -> LatticeCalculus {
    LatticeCalculus::new(CalculusSpec::minkowski(&[1.0, 1.0])).unwrap()
}

fn history_field(h: &FieldHistory) -> MatrixForm {
    field_matrix(2, h.model, &Coefficient::Grid(h.u.clone())).unwrap()
}

#[test]
fn flatness_for_random_invertible_matrices() {
    let calc = minkowski();
    let window = Window::new(vec![0, 0], vec![16, 16]).unwrap();
    let bnd = vec![Boundary::Periodic; 2];
    for i in 0..100 {
        let mut rng = random::case_rng(11, i);
        let entries = (0..4)
            .map(|k| {
                let g = random::grid(&mut rng, &window, &[1.0, 1.0], &bnd);
                let g = if k == 0 || k == 3 { g.map(|v| v + 3.0) } else { g };
                Coefficient::Grid(g)
            })
            .collect();
        let a = MatrixForm::from_functions(2, 2, entries).unwrap();
        let cur = gauge_current(&calc, &a).unwrap();
        let f = curvature(&calc, &cur.current).unwrap();
        let scale = cur.current.norm().powi(2);
        assert!(f.norm() <= 1e-10 * scale, "case {i}: {} vs {}", f.norm(), scale);
        assert!(cur.max_condition.unwrap() < 100.0);
    }
}

#[test]
fn flatness_on_expsum_matrix() {
    let calc = minkowski();
    let e = |k: f64, l: f64| Coefficient::Exp(ExpSum::exp(2, c(1.0), &[c(k), c(l)]));
    let z = Coefficient::Exp(ExpSum::zero(2));
    let x = Coefficient::Exp(ExpSum::coordinate(2, 1));
    let a = MatrixForm::from_functions(2, 2, vec![e(0.3, -0.2), x, z, e(-0.1, 0.4)]).unwrap();
    let cur = gauge_current(&calc, &a).unwrap().current;
    assert!(curvature(&calc, &cur).unwrap().is_zero_exact());
}

trait ExactZero {
    fn is_zero_exact(&self) -> bool;
}

impl ExactZero for MatrixForm {
    fn is_zero_exact(&self) -> bool {
        self.entries().iter().all(|e| e.is_zero())
    }
}

#[test]
fn telescoping_recovers_random_potential() {
    let calc = minkowski();
    let window = Window::new(vec![0, 0], vec![12, 10]).unwrap();
    let bnd = vec![Boundary::Open, Boundary::Periodic];
    for i in 0..20 {
        let mut rng = random::case_rng(5, i);
        let chi0 = random::grid(&mut rng, &window, &[1.0, 1.0], &bnd);
        let w = calc.d_function(&Coefficient::Grid(chi0.clone())).unwrap();
        let chi = integrate_closed(&calc, &w).unwrap();
        let g = chi.as_grid().unwrap();
        let base = g.window().origin.clone();
        let offset = chi0.at(&base).unwrap();
        for (k, v) in g.values().iter().enumerate() {
            let s = g.window().site(k);
            assert!((v - (chi0.at(&s).unwrap() - offset)).norm() < 1e-12);
        }
    }
}

#[test]
fn expsum_potential_recovered() {
    let calc = minkowski();
    for i in 0..30 {
        let mut rng = random::case_rng(9, i);
        let chi0 = random::expsum(&mut rng, 2, &random::ExpSumShape::default());
        let w = calc.d_function(&Coefficient::Exp(chi0.clone())).unwrap();
        if w.is_zero() {
            continue;
        }
        let chi = integrate_closed(&calc, &w).unwrap();
        let base = chi0.eval(&[c(0.0), c(0.0)]);
        let expect = Coefficient::Exp(&chi0 - &ExpSum::constant(2, base));
        let dist = chi.distance(&expect);
        assert!(dist < 1e-9 * (1.0 + chi0.norm()), "case {i}: {dist}");
    }
}

#[test]
fn non_closed_form_rejected() {
    let calc = minkowski();
    let t = Coefficient::Exp(ExpSum::coordinate(2, 0));
    let w = Form::basis(2, 0b10, t);
    assert!(matches!(integrate_closed(&calc, &w), Err(Error::NotClosed { .. })));
}

fn wave_profile(m: usize, shift: f64) -> Vec<C64> {
    (0..m)
        .map(|x| {
            let th = 2.0 * PI * (x as f64 - shift) / m as f64;
            c(th.sin() + 0.5 * (2.0 * th).cos())
        })
        .collect()
}

// d'Alembert on the lattice at Courant number one: u(n, m) = f(m - n) + g(m + n).
#[test]
fn linear_model_matches_discrete_dalembert() {
    let calc = minkowski();
    let m = 16;
    let f = |k: i64| ((2.0 * PI * k as f64 / m as f64).sin()) * 0.7;
    let g = |k: i64| ((4.0 * PI * k as f64 / m as f64).cos()) * 0.2;
    let exact = |n: i64, x: i64| c(f(x - n) + g(x + n));
    let u0: Vec<C64> = (0..m as i64).map(|x| exact(0, x)).collect();
    let u1: Vec<C64> = (0..m as i64).map(|x| exact(1, x)).collect();
    let h = solve_field_equation(&calc, Model::Linear, &u0, &u1, 20, NewtonOptions::default()).unwrap();
    for (k, v) in h.u.values().iter().enumerate() {
        let s = h.u.window().site(k);
        assert!((v - exact(s[0], s[1])).norm() < 1e-12);
    }
    let a = history_field(&h);
    let cur = gauge_current(&calc, &a).unwrap().current;
    assert!(field_residual(&calc, &cur).unwrap().norm() <= 1e-10);
}

#[test]
fn linear_wave_tower_is_conserved() {
    let calc = minkowski();
    let m = 16;
    let h = solve_field_equation(&calc, Model::Linear, &wave_profile(m, 0.0), &wave_profile(m, 1.0), 14, NewtonOptions::default())
        .unwrap();
    let r = conserved_tower(&calc, &history_field(&h), 3, 1).unwrap();
    assert_eq!(r.obstructed_at, None);
    assert_eq!(r.levels.len(), 3);
    for l in &r.levels {
        assert!(l.residual <= 1e-9, "level {}: {}", l.level, l.residual);
        assert!(l.charges.drift <= 1e-9, "level {}: {}", l.level, l.charges.drift);
    }
    assert!(r.identity_residual <= 1e-10);
}

#[test]
fn vacuum_tower_is_trivial() {
    let calc = minkowski();
    let z = vec![c(0.0); 8];
    let h = solve_field_equation(&calc, Model::Toda, &z, &z, 6, NewtonOptions::default()).unwrap();
    let r = conserved_tower(&calc, &history_field(&h), 3, 2).unwrap();
    for l in &r.levels {
        assert_eq!(l.residual, 0.0);
        assert_eq!(l.scale, 0.0);
    }
}

fn toda_complex_history(m: usize, rows: usize, eps: f64) -> FieldHistory {
    let wave = |shift: f64| -> Vec<C64> {
        (0..m).map(|x| C64::from_polar(eps, 2.0 * PI * (x as f64 - shift) / m as f64)).collect()
    };
    solve_field_equation(&minkowski(), Model::Toda, &wave(0.0), &wave(0.5), rows - 2, NewtonOptions::default()).unwrap()
}

#[test]
fn toda_history_solves_field_equation() {
    let calc = minkowski();
    let h = toda_complex_history(32, 32, 0.3);
    assert!(h.slice_residuals.iter().all(|&r| r <= 1e-12));
    let cur = gauge_current(&calc, &history_field(&h)).unwrap().current;
    let res = field_residual(&calc, &cur).unwrap().norm();
    assert!(res <= 1e-10, "{res}");
}

#[test]
fn toda_tower_depth_four() {
    let calc = minkowski();
    let h = toda_complex_history(32, 32, 0.3);
    let r = conserved_tower(&calc, &history_field(&h), 4, 3).unwrap();
    assert_eq!(r.obstructed_at, None);
    assert_eq!(r.levels.len(), 4);
    for l in &r.levels {
        assert!(l.relative_residual <= 1e-8, "level {}: {}", l.level, l.relative_residual);
        assert!(l.charges.relative_drift <= 1e-8, "level {}: {}", l.level, l.charges.relative_drift);
    }
    assert_eq!(r.epsilon_1, Some(c(1.0)));
}

// Real data whose first charge vanishes: sum_x exp(u0 - u1) = M.
fn toda_real_zero_charge(m: usize, rows: usize) -> FieldHistory {
    let u0: Vec<C64> = (0..m).map(|x| c(0.1 * (2.0 * PI * x as f64 / m as f64).cos())).collect();
    let u1: Vec<C64> = (0..m)
        .map(|x| u0[x] - (1.0 + 0.1 * (2.0 * PI * x as f64 / m as f64).sin()).ln())
        .collect();
    solve_field_equation(&minkowski(), Model::Toda, &u0, &u1, rows - 2, NewtonOptions::default()).unwrap()
}

#[test]
fn real_toda_tower_reports_obstruction_after_nonzero_charge() {
    let calc = minkowski();
    let h = toda_real_zero_charge(32, 32);
    let r = conserved_tower(&calc, &history_field(&h), 4, 4).unwrap();
    let q1 = r.levels[0].charges.values[0][0];
    assert!(q1.norm() < 1e-12, "{q1}");
    let l2 = &r.levels[1];
    let q2 = l2.charges.values[0][0].norm();
    assert!(q2 > 1e-3, "level-2 charge should be nonzero, got {q2}");
    assert!(l2.charges.drift <= 1e-9 * q2 + 1e-12);
    assert!(l2.relative_residual <= 1e-8);
    assert_eq!(r.obstructed_at, Some(2));
    let periods = l2.obstruction.as_ref().unwrap();
    assert!(periods.iter().all(|p| (p - periods[0]).abs() <= 1e-9 * periods[0]));
}

// Linearization: small Toda data evolves like the linear wave within O(amp^2).
#[test]
fn small_amplitude_toda_tracks_linear_wave() {
    let calc = minkowski();
    let m = 16;
    let mut errs = Vec::new();
    for amp in [1e-2, 5e-3] {
        let u0: Vec<C64> = wave_profile(m, 0.0).iter().map(|v| v * amp).collect();
        let u1: Vec<C64> = wave_profile(m, 1.0).iter().map(|v| v * amp).collect();
        let nl = solve_field_equation(&calc, Model::Toda, &u0, &u1, 10, NewtonOptions::default()).unwrap();
        let lin = solve_field_equation(&calc, Model::Linear, &u0, &u1, 10, NewtonOptions::default()).unwrap();
        let err = nl.u.values().iter().zip(lin.u.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        errs.push(err);
        assert!(err <= 50.0 * amp * amp, "amp {amp}: {err}");
    }
    let ratio = errs[0] / errs[1];
    assert!((ratio - 4.0).abs() < 0.5, "{ratio}");
}

#[test]
fn random_current_drifts() {
    let calc = minkowski();
    let window = Window::new(vec![0, 0], vec![6, 8]).unwrap();
    let bnd = vec![Boundary::Open, Boundary::Periodic];
    let mut rng = random::case_rng(3, 0);
    let j = MatrixForm::new(1, vec![random::form(&mut rng, 2, 1, |r| {
        Coefficient::Grid(random::grid(r, &window, &[1.0, 1.0], &bnd))
    })])
    .unwrap();
    let q = charges(&calc, &j).unwrap();
    assert!(q.drift > 1e-3);
}

#[test]
fn constant_dual_current_has_exact_charge() {
    let calc = minkowski();
    let window = Window::new(vec![0, 0], vec![5, 7]).unwrap();
    let g = GridFunction::constant(window, vec![1.0, 1.0], vec![Boundary::Open, Boundary::Periodic], c(0.25)).unwrap();
    let j = MatrixForm::new(1, vec![Form::basis(2, 0b01, Coefficient::Grid(g))]).unwrap();
    let q = charges(&calc, &j).unwrap();
    assert_eq!(q.drift, 0.0);
    assert!(q.values.iter().all(|v| v[0] == c(0.25 * 7.0)));
}

#[test]
fn open_spatial_axis_has_no_charge() {
    let calc = minkowski();
    let window = Window::new(vec![0, 0], vec![5, 7]).unwrap();
    let g = GridFunction::constant(window, vec![1.0, 1.0], vec![Boundary::Open; 2], c(1.0)).unwrap();
    let j = MatrixForm::new(1, vec![Form::basis(2, 0b01, Coefficient::Grid(g))]).unwrap();
    assert!(charges(&calc, &j).is_err());
}

#[test]
fn tower_is_sequentially_identical() {
    let calc = minkowski();
    let h = toda_complex_history(16, 12, 0.2);
    let a = history_field(&h);
    let par = conserved_tower(&calc, &a, 3, 5).unwrap();
    let seq = ncforms::par::sequential(|| conserved_tower(&calc, &a, 3, 5).unwrap());
    assert_eq!(serde_json::to_string(&par).unwrap(), serde_json::to_string(&seq).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flatness_holds_for_scalar_fields(seed in 0u64..1000) {
        let calc = minkowski();
        let window = Window::new(vec![0, 0], vec![6, 6]).unwrap();
        let mut rng = random::case_rng(seed, 0);
        let g = random::grid(&mut rng, &window, &[1.0, 1.0], &[Boundary::Open, Boundary::Periodic]).map(|v| v + 2.0);
        let a = MatrixForm::from_functions(2, 1, vec![Coefficient::Grid(g)]).unwrap();
        let cur = gauge_current(&calc, &a).unwrap().current;
        let f = curvature(&calc, &cur).unwrap();
        prop_assert!(f.norm() <= 1e-10 * cur.norm().powi(2).max(1e-300));
    }
}
