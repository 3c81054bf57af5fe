use std::f64::consts::PI;

use ncforms::random;
use ncforms::toda::*;
use ncforms::{ExpSum, C64};
use proptest::prelude::*;

fn reference_state() -> TodaState {
    TodaState::sampled(1.0, 16, |x| 2.0 * (2.0 * PI * x / 16.0).sin(), |x| 0.6 * (4.0 * PI * x / 16.0).cos() + 0.1)
        .unwrap()
}

#[test]
fn energy_and_momentum_conserved() {
    let tr = simulate(&reference_state(), 1e-3, 10.0, 100).unwrap();
    assert_eq!(tr.steps, 10_000);
    assert!(tr.energy_drift <= 1e-8, "{}", tr.energy_drift);
    assert!(tr.momentum_drift <= 1e-12, "{}", tr.momentum_drift);
    assert!((tr.last().t - 10.0).abs() < 1e-9);
}

#[test]
fn energy_drift_is_fourth_order() {
    let o = rk4_order(&reference_state(), &[0.02, 0.01, 0.005], 10.0).unwrap();
    assert!((o.order - 4.0).abs() <= 0.5, "{:?}", o);
    let ratio = o.errors[1] / o.errors[2];
    assert!((8.0..32.0).contains(&ratio), "{ratio}");
}

#[test]
fn forward_backward_returns() {
    assert!(reversibility(&reference_state(), 1e-3, 10.0).unwrap() <= 1e-6);
}

#[test]
fn constant_profile_never_moves() {
    let s = TodaState::new(0.1, vec![0.7; 40], vec![0.0; 40]).unwrap();
    let tr = simulate(&s, 0.01, 1.0, 10).unwrap();
    assert!(tr.samples.iter().all(|x| x.u.iter().all(|v| *v == 0.7) && x.v.iter().all(|v| *v == 0.0)));
}

#[test]
fn wave_limit_converges() {
    let r = wave_limit(&WaveLimitConfig::default(), &[0.2, 0.1, 0.05]).unwrap();
    assert!(r.monotone, "{:?}", r.distances);
    assert!(r.order >= 1.0, "{}", r.order);
}

#[test]
fn flat_profile_matches_wave_exactly() {
    let cfg = WaveLimitConfig { amplitude: 0.0, ..WaveLimitConfig::default() };
    let r = wave_limit(&cfg, &[0.2, 0.1]).unwrap();
    assert!(r.distances.iter().all(|d| *d == 0.0));
}

// Independent oracle: RK4 on u'' = l^-2 (u_{k+1} - 2 u_k + u_{k-1}).
fn linear_wave(ell: f64, u: &[f64], v: &[f64], dt: f64, steps: usize) -> Vec<f64> {
    let m = u.len();
    let acc = |u: &[f64]| -> Vec<f64> {
        (0..m).map(|k| (u[(k + 1) % m] - 2.0 * u[k] + u[(k + m - 1) % m]) / (ell * ell)).collect()
    };
    let (mut u, mut v) = (u.to_vec(), v.to_vec());
    for _ in 0..steps {
        let a1 = acc(&u);
        let u2: Vec<f64> = (0..m).map(|k| u[k] + 0.5 * dt * v[k]).collect();
        let v2: Vec<f64> = (0..m).map(|k| v[k] + 0.5 * dt * a1[k]).collect();
        let a2 = acc(&u2);
        let u3: Vec<f64> = (0..m).map(|k| u[k] + 0.5 * dt * v2[k]).collect();
        let v3: Vec<f64> = (0..m).map(|k| v[k] + 0.5 * dt * a2[k]).collect();
        let a3 = acc(&u3);
        let u4: Vec<f64> = (0..m).map(|k| u[k] + dt * v3[k]).collect();
        let v4: Vec<f64> = (0..m).map(|k| v[k] + dt * a3[k]).collect();
        let a4 = acc(&u4);
        for k in 0..m {
            u[k] += dt / 6.0 * (v[k] + 2.0 * v2[k] + 2.0 * v3[k] + v4[k]);
            v[k] += dt / 6.0 * (a1[k] + 2.0 * a2[k] + 2.0 * a3[k] + a4[k]);
        }
    }
    u
}

#[test]
fn small_amplitude_matches_linear_wave() {
    let mut errs = Vec::new();
    for amp in [1e-2, 5e-3, 2.5e-3] {
        let s = TodaState::sampled(0.5, 12, |x| amp * (2.0 * PI * x / 6.0).sin(), |_| 0.0).unwrap();
        let tr = simulate(&s, 0.01, 2.0, usize::MAX).unwrap();
        let lin = linear_wave(0.5, &s.u, &s.v, 0.01, 200);
        let err = tr.last().u.iter().zip(&lin).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        errs.push(err / amp);
    }
    assert!(errs.windows(2).all(|w| (w[0] / w[1] - 2.0).abs() < 0.2), "{errs:?}");
}

#[test]
fn sampled_tower_charge_converges() {
    let c = charge_cross_check(&reference_state(), &[0.04, 0.02, 0.01], 2.0).unwrap();
    assert!(c.drifts.windows(2).all(|w| w[1] < w[0]));
    assert!(c.order >= 0.95, "{:?}", c);
    let fine = charge_cross_check(&reference_state(), &[0.02, 0.01, 0.005], 2.0).unwrap();
    assert!(fine.order > c.order && fine.order <= 1.05, "{:?}", fine);
}

#[test]
fn overflow_aborts_simulation() {
    let s = TodaState::new(1.0, vec![0.0, 501.0, 0.0], vec![0.0; 3]).unwrap();
    assert!(matches!(simulate(&s, 0.1, 1.0, 1), Err(ncforms::Error::Overflow { .. })));
}

fn exp2(c: f64, l: f64, m: f64) -> ExpSum {
    ExpSum::exp(2, C64::new(c, 0.0), &[C64::new(m, 0.0), C64::new(l, 0.0)])
}

#[test]
fn reciprocal_exponentials_reduce_to_toda() {
    for (lam, mu) in [(0.3, 0.0), (-0.7, 0.2), (1.1, -0.4)] {
        let f = exp2(1.0, lam, mu);
        let g = exp2(1.0, -lam, -mu);
        let d = derive_toda(0.25, &f, &g, 1e-12).unwrap();
        assert!(d.reciprocal);
        assert!(d.report.passed(), "{:?}", d.report.failures());
        assert!(d.report.get("toda_equation").is_some());
    }
}

// u'' + l^-2 (e^{u_k - u_{k+1}} - e^{u_{k-1} - u_k}) for u = mu t + lam x is zero.
#[test]
fn affine_field_has_vanishing_toda_operator() {
    let (lam, mu, ell) = (0.6, -0.3, 0.5);
    let t = toda_bilinear(ell, &exp2(1.0, -lam, -mu), &exp2(1.0, lam, mu));
    assert!(t.norm() < 1e-12);
}

// Pointwise oracle for the bilinear Toda operator with explicit derivatives.
#[test]
fn bilinear_operator_pointwise() {
    let (a, b, ell) = (0.4, -0.9, 0.3);
    let f = &exp2(1.0, a, 0.2) + &exp2(0.5, -0.1, -0.6);
    let g = exp2(2.0, b, 0.1);
    let op = toda_bilinear(ell, &f, &g);
    let fv = |t: f64, x: f64| (a * x + 0.2 * t).exp() + 0.5 * (-0.1 * x - 0.6 * t).exp();
    let ftt = |t: f64, x: f64| 0.2 * (a * x + 0.2 * t).exp() - 0.3 * (-0.1 * x - 0.6 * t).exp();
    let gv = |t: f64, x: f64| 2.0 * (b * x + 0.1 * t).exp();
    // d_t(g f_t) = g_t f_t + g f_tt
    let kin = |t: f64, x: f64| {
        let ftt2 = 0.04 * (a * x + 0.2 * t).exp() + 0.18 * (-0.1 * x - 0.6 * t).exp();
        -(0.1 * gv(t, x) * ftt(t, x) + gv(t, x) * ftt2)
    };
    for (t, x) in [(0.0, 0.0), (0.3, -1.2), (-0.5, 2.0)] {
        let expect = kin(t, x) + (gv(t, x) * fv(t, x + ell) - gv(t, x - ell) * fv(t, x)) / (ell * ell);
        let got = op.eval(&[C64::new(t, 0.0), C64::new(x, 0.0)]);
        assert!((got.re - expect).abs() < 1e-12 * expect.abs().max(1.0) && got.im.abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn derivation_steps_hold_bilinearly(seed in 0u64..10_000, ell in 0.1f64..2.0) {
        let mut rng = random::case_rng(seed, 0);
        let shape = random::ExpSumShape::default();
        let f = random::expsum(&mut rng, 2, &shape);
        let g = random::expsum(&mut rng, 2, &shape);
        let d = derive_toda(ell, &f, &g, 1e-12).unwrap();
        prop_assert!(d.report.passed(), "{:?}", d.report.failures());
    }

    #[test]
    fn momentum_exact_for_random_data(seed in 0u64..10_000) {
        use rand::Rng;
        let mut rng = random::case_rng(seed, 1);
        let m = rng.random_range(3..12);
        let u: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = TodaState::new(0.8, u, v).unwrap();
        let tr = simulate(&s, 0.01, 1.0, 10).unwrap();
        prop_assert!(tr.momentum_drift <= 1e-12);
    }
}
