//! The Toda lattice from the semi-discrete calculus: symbolic derivation,
//! RK4 integration and the continuum limit to the wave equation.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::coeff::{Boundary, Coefficient, ExpSum, GridFunction, Window};
use crate::error::{Error, Result};
use crate::form::{Calculus, Form};
use crate::harmonic::{self, MatrixForm};
use crate::lattice::{AxisKind, CalculusSpec, LatticeCalculus};
use crate::par;
use crate::report::{relative, Check, Report};

const DT: u32 = 0b01;
const DX: u32 = 0b10;
const DTDX: u32 = 0b11;

/// Largest neighbour gap accepted by `toda_rhs`.
pub const OVERFLOW_GAP: f64 = 500.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TodaState {
    pub ell: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl TodaState {
    pub fn new(ell: f64, u: Vec<f64>, v: Vec<f64>) -> Result<TodaState> {
        if u.len() < 3 {
            return Err(Error::InvalidParameter(format!("need at least 3 sites, got {}", u.len())));
        }
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch(u.len(), v.len()));
        }
        if !(ell > 0.0) || !ell.is_finite() {
            return Err(Error::InvalidParameter(format!("spacing must be positive, got {ell}")));
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("initial state".into()));
        }
        Ok(TodaState { ell, u, v, t: 0.0 })
    }

    /// `u_k = f(k l)`, `v_k = g(k l)`.
    pub fn sampled(ell: f64, sites: usize, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> Result<TodaState> {
        let xs: Vec<f64> = (0..sites).map(|k| k as f64 * ell).collect();
        TodaState::new(ell, xs.iter().map(|&x| f(x)).collect(), xs.iter().map(|&x| g(x)).collect())
    }

    pub fn sites(&self) -> usize {
        self.u.len()
    }

    /// `H = sum v^2/2 + l^-2 sum exp(u_k - u_{k+1})`.
    pub fn energy(&self) -> f64 {
        let m = self.sites();
        let kin: f64 = self.v.iter().map(|v| 0.5 * v * v).sum();
        let pot: f64 = (0..m).map(|k| (self.u[k] - self.u[(k + 1) % m]).exp()).sum();
        kin + pot / (self.ell * self.ell)
    }

    pub fn momentum(&self) -> f64 {
        self.v.iter().sum()
    }
}

/// `u''_k = -l^-2 (exp(u_k - u_{k+1}) - exp(u_{k-1} - u_k))`, periodic.
pub fn toda_rhs(ell: f64, u: &[f64]) -> Result<Vec<f64>> {
    let m = u.len();
    let mut bond = Vec::with_capacity(m);
    for k in 0..m {
        let gap = u[k] - u[(k + 1) % m];
        if gap.abs() > OVERFLOW_GAP {
            return Err(Error::Overflow { site: k, gap });
        }
        bond.push(gap.exp());
    }
    let inv = 1.0 / (ell * ell);
    Ok((0..m).map(|k| -inv * (bond[k] - bond[(k + m - 1) % m])).collect())
}

pub fn state_rhs(state: &TodaState) -> Result<Vec<f64>> {
    toda_rhs(state.ell, &state.u)
}

fn rk4_step(ell: f64, u: &mut [f64], v: &mut [f64], h: f64) -> Result<()> {
    let m = u.len();
    let axpy = |x: &[f64], a: f64, y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p + a * q).collect() };
    let k1u = v.to_vec();
    let k1v = toda_rhs(ell, u)?;
    let k2u = axpy(v, 0.5 * h, &k1v);
    let k2v = toda_rhs(ell, &axpy(u, 0.5 * h, &k1u))?;
    let k3u = axpy(v, 0.5 * h, &k2v);
    let k3v = toda_rhs(ell, &axpy(u, 0.5 * h, &k2u))?;
    let k4u = axpy(v, h, &k3v);
    let k4v = toda_rhs(ell, &axpy(u, h, &k3u))?;
    for k in 0..m {
        u[k] += h / 6.0 * (k1u[k] + 2.0 * k2u[k] + 2.0 * k3u[k] + k4u[k]);
        v[k] += h / 6.0 * (k1v[k] + 2.0 * k2v[k] + 2.0 * k3v[k] + k4v[k]);
    }
    if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("state after RK4 step".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct Sample {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub energy: f64,
    pub momentum: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub dt: f64,
    pub steps: usize,
    pub samples: Vec<Sample>,
    /// `max |H - H0| / |H0|`.
    pub energy_drift: f64,
    /// `max |P - P0| / max(|P0|, sum |v0|)`.
    pub momentum_drift: f64,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().unwrap()
    }

    pub fn final_state(&self, ell: f64) -> TodaState {
        let s = self.last();
        TodaState { ell, u: s.u.clone(), v: s.v.clone(), t: s.t }
    }
}

fn sample(state: &TodaState) -> Sample {
    Sample { t: state.t, u: state.u.clone(), v: state.v.clone(), energy: state.energy(), momentum: state.momentum() }
}

/// Fixed-step RK4 over `round(T / |dt|)` steps; `dt < 0` integrates backward.
/// Samples are recorded every `stride` steps and at the end.
pub fn simulate(state: &TodaState, dt: f64, t_end: f64, stride: usize) -> Result<Trajectory> {
    if dt == 0.0 || !dt.is_finite() || !(t_end > 0.0) {
        return Err(Error::InvalidParameter(format!("need dt != 0 and T > 0, got dt={dt}, T={t_end}")));
    }
    let steps = (t_end / dt.abs()).round() as usize;
    let stride = stride.max(1);
    let mut s = state.clone();
    let mut samples = vec![sample(&s)];
    let t0 = s.t;
    for n in 1..=steps {
        rk4_step(s.ell, &mut s.u, &mut s.v, dt)?;
        s.t = t0 + n as f64 * dt;
        if n % stride == 0 || n == steps {
            samples.push(sample(&s));
        }
    }
    let (h0, p0) = (samples[0].energy, samples[0].momentum);
    let pscale = p0.abs().max(state.v.iter().map(|v| v.abs()).sum()).max(f64::MIN_POSITIVE);
    let energy_drift = samples.iter().map(|x| (x.energy - h0).abs()).fold(0.0, f64::max) / h0.abs();
    let momentum_drift = samples.iter().map(|x| (x.momentum - p0).abs()).fold(0.0, f64::max) / pscale;
    Ok(Trajectory { dt, steps, samples, energy_drift, momentum_drift })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderReport {
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    pub order: f64,
}

/// Energy drift over `[0, T]` for each step size, with the fitted order.
pub fn rk4_order(state: &TodaState, dts: &[f64], t_end: f64) -> Result<OrderReport> {
    let errors = par::try_map_range(dts.len(), |i| simulate(state, dts[i], t_end, 1).map(|tr| tr.energy_drift))?;
    Ok(OrderReport { steps: dts.to_vec(), order: loglog_slope(dts, &errors), errors })
}

/// Relative distance after integrating forward and then backward over `T`.
pub fn reversibility(state: &TodaState, dt: f64, t_end: f64) -> Result<f64> {
    let fwd = simulate(state, dt, t_end, usize::MAX)?.final_state(state.ell);
    let back = simulate(&fwd, -dt, t_end, usize::MAX)?.final_state(state.ell);
    let diff = state.u.iter().zip(&back.u).chain(state.v.iter().zip(&back.v)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = state.u.iter().chain(&state.v).map(|a| a.abs()).fold(0.0, f64::max).max(1.0);
    Ok(diff / scale)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveLimitConfig {
    /// Length of the periodic interval.
    pub length: f64,
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub time: f64,
    /// RK4 step as a fraction of the spacing.
    pub courant: f64,
}

impl Default for WaveLimitConfig {
    fn default() -> Self {
        WaveLimitConfig { length: 8.0, amplitude: 0.5, center: 4.0, width: 0.5, time: 1.0, courant: 0.1 }
    }
}

impl WaveLimitConfig {
    /// Periodized Gaussian profile.
    pub fn profile(&self, x: f64) -> f64 {
        let mut y = (x - self.center).rem_euclid(self.length);
        if y > 0.5 * self.length {
            y -= self.length;
        }
        self.amplitude * (-(y / self.width).powi(2)).exp()
    }

    /// d'Alembert solution with zero initial velocity.
    pub fn wave(&self, x: f64, t: f64) -> f64 {
        0.5 * (self.profile(x - t) + self.profile(x + t))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WaveLimitReport {
    pub spacings: Vec<f64>,
    pub distances: Vec<f64>,
    pub monotone: bool,
    pub order: f64,
}

/// Sup-norm distance between Toda and d'Alembert at `time`, per spacing.
pub fn wave_limit(cfg: &WaveLimitConfig, spacings: &[f64]) -> Result<WaveLimitReport> {
    let distances = par::try_map_range(spacings.len(), |i| {
        let ell = spacings[i];
        let sites = (cfg.length / ell).round() as usize;
        if ((sites as f64) * ell - cfg.length).abs() > 1e-9 * cfg.length {
            return Err(Error::InvalidParameter(format!("spacing {ell} does not divide the interval")));
        }
        let state = TodaState::sampled(ell, sites, |x| cfg.profile(x), |_| 0.0)?;
        let dt = cfg.courant * ell;
        let steps = (cfg.time / dt).round();
        let tr = simulate(&state, cfg.time / steps, cfg.time, usize::MAX)?;
        let last = tr.last();
        Ok((0..sites).map(|k| (last.u[k] - cfg.wave(k as f64 * ell, last.t)).abs()).fold(0.0, f64::max))
    })?;
    let monotone = distances.windows(2).all(|w| w[1] < w[0]);
    let order = if distances.iter().all(|d| *d > 0.0) { loglog_slope(spacings, &distances) } else { f64::INFINITY };
    Ok(WaveLimitReport { spacings: spacings.to_vec(), distances, monotone, order })
}

#[derive(Clone, Debug, Serialize)]
pub struct ChargeCrossCheck {
    pub sample_steps: Vec<f64>,
    pub drifts: Vec<f64>,
    pub order: f64,
}

/// Calculus with discrete time step `dt` and the Toda star, used to feed sampled
/// trajectories to the charge machinery.
pub fn sampled_calculus(dt: f64, ell: f64) -> Result<LatticeCalculus> {
    let mut spec = CalculusSpec::semi_discrete_toda(ell);
    spec.spacings[0] = dt;
    spec.kinds[0] = AxisKind::Discrete;
    LatticeCalculus::new(spec)
}

/// First-level charge drift of a trajectory sampled every `dt`.
pub fn sampled_charge_drift(state: &TodaState, dt: f64, t_end: f64, max_step: f64) -> Result<f64> {
    let sub = (dt / max_step).ceil().max(1.0) as usize;
    let tr = simulate(state, dt / sub as f64, t_end, sub)?;
    let m = state.sites();
    let rows = tr.samples.len();
    let values: Vec<C64> = tr.samples.iter().flat_map(|s| s.u.iter().map(|&x| C64::new(x, 0.0))).collect();
    let u = GridFunction::new(
        Window::new(vec![0, 0], vec![rows, m])?,
        vec![dt, state.ell],
        vec![Boundary::Open, Boundary::Periodic],
        values,
    )?;
    let calc = sampled_calculus(dt, state.ell)?;
    let a = harmonic::field_matrix(2, harmonic::Model::Toda, &Coefficient::Grid(u))?;
    let cur = harmonic::gauge_current(&calc, &a)?.current;
    Ok(harmonic::charges(&calc, &cur)?.drift)
}

pub fn charge_cross_check(state: &TodaState, dts: &[f64], t_end: f64) -> Result<ChargeCrossCheck> {
    let drifts = par::try_map_range(dts.len(), |i| sampled_charge_drift(state, dts[i], t_end, 1e-3))?;
    Ok(ChargeCrossCheck { sample_steps: dts.to_vec(), order: loglog_slope(dts, &drifts), drifts })
}

/// Symbolic derivation of the Toda equation from `d*A = 0` with `A = g df`,
/// `f, g` independent exponential sums in `(t, x)`.
#[derive(Clone, Debug, Serialize)]
pub struct TodaDerivation {
    pub report: Report,
    pub reciprocal: bool,
}

fn semi(ell: f64) -> Result<LatticeCalculus> {
    LatticeCalculus::new(CalculusSpec::semi_discrete_toda(ell))
}

/// Displayed Toda operator in bilinear form:
/// `-d_t(g d_t f) + l^-2 (g f(x+l) - g(x-l) f)`. With `f = e^{-u}`, `g = e^{u}`
/// this is `u'' + l^-2 (e^{u_k - u_{k+1}} - e^{u_{k-1} - u_k})`.
pub fn toda_bilinear(ell: f64, f: &ExpSum, g: &ExpSum) -> ExpSum {
    let ftt = f.partial(0);
    let kin = (g * &ftt).partial(0).scale(C64::new(-1.0, 0.0));
    let fp = f.shift(1, C64::new(ell, 0.0));
    let gm = g.shift(1, C64::new(-ell, 0.0));
    let pot = (&(g * &fp) - &(&gm * f)).scale(C64::new(1.0 / (ell * ell), 0.0));
    &kin + &pot
}

pub fn derive_toda(ell: f64, f: &ExpSum, g: &ExpSum, tol: f64) -> Result<TodaDerivation> {
    if f.nvars() != 2 || g.nvars() != 2 {
        return Err(Error::DimensionMismatch(2, f.nvars().max(g.nvars())));
    }
    let calc = semi(ell)?;
    let one = ExpSum::constant(2, C64::new(1.0, 0.0));
    let inv_l = C64::new(1.0 / ell, 0.0);
    let reciprocal = (f * g).distance(&one) <= 1e-12;

    let a = MatrixForm::from_functions(2, 1, vec![Coefficient::Exp(f.clone())])?;
    let inv = MatrixForm::from_functions(2, 1, vec![Coefficient::Exp(g.clone())])?;
    let cur = harmonic::mat_mul(&calc, &inv, &harmonic::mat_d(&calc, &a)?)?;
    let a_form = cur.entry(0, 0).clone();

    let ft = f.partial(0);
    let fx = (&f.shift(1, C64::new(ell, 0.0)) - f).scale(inv_l);
    let a_t = g * &ft;
    let a_x = g * &fx;
    let expect_a = Form::from_components(2, 1, [(DT, a_t.clone().into()), (DX, a_x.clone().into())])?;

    let star_a = calc.star(&a_form)?;
    let neg = C64::new(-1.0, 0.0);
    let expect_star =
        Form::from_components(2, 1, [(DX, a_t.scale(neg).into()), (DT, a_x.shift(1, C64::new(-ell, 0.0)).scale(neg).into())])?;

    let dstar = calc.d(&star_a)?;
    let machine = match dstar.component(DTDX) {
        Some(c) => c.as_exp()?.clone(),
        None => ExpSum::zero(2),
    };
    let expect_coeff = &a_t.partial(0).scale(neg) + &(&a_x - &a_x.shift(1, C64::new(-ell, 0.0))).scale(inv_l);
    let toda = toda_bilinear(ell, f, g);
    let gf = g * f;
    let gap = (&gf - &gf.shift(1, C64::new(-ell, 0.0))).scale(C64::new(-1.0 / (ell * ell), 0.0));

    let scale = |e: &ExpSum| e.norm().max(1.0);
    let mut rep = Report::new("Toda equation from d*A = 0 on the semi-discrete calculus");
    rep.push(Check::bound(
        "current",
        "A = g df = g f_t dt + g (f(x+l) - f)/l dx",
        relative(a_form.distance(&expect_a), a_form.norm().max(1.0)),
        tol,
        1,
    ));
    rep.push(Check::bound(
        "star_current",
        "*A = -(g f_t) dx - (g (f(x+l) - f)/l)(x-l) dt with *dt = -dx, *dx = -dt",
        relative(star_a.distance(&expect_star), star_a.norm().max(1.0)),
        tol,
        1,
    ));
    rep.push(Check::bound(
        "field_coefficient",
        "(d*A)_{dt dx} = -d_t(g f_t) + (A_x - A_x(x-l))/l",
        relative(machine.distance(&expect_coeff), scale(&machine)),
        tol,
        1,
    ));
    rep.push(Check::bound(
        "toda_bilinear",
        "(d*A)_{dt dx} - Toda(f, g) = -l^-2 (g f - (g f)(x-l))",
        relative((&machine - &toda).distance(&gap), scale(&machine)),
        tol,
        1,
    ));
    if reciprocal {
        rep.push(Check::bound(
            "toda_equation",
            "f g = 1: (d*A)_{dt dx} = u'' + l^-2 (e^{u_k - u_(k+1)} - e^{u_(k-1) - u_k})",
            relative(machine.distance(&toda), scale(&machine)),
            tol,
            1,
        ));
    }
    Ok(TodaDerivation { report: rep, reciprocal })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_profile_is_static() {
        let a = toda_rhs(0.7, &[1.5, 1.5, 1.5, 1.5]).unwrap();
        assert!(a.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn small_displacement_gives_laplacian() {
        for delta in [1e-3, 1e-4, 1e-5] {
            let a = toda_rhs(1.0, &[delta, 0.0, 0.0]).unwrap();
            assert!((a[0] + 2.0 * delta).abs() < 2.0 * delta * delta);
        }
    }

    #[test]
    fn accelerations_sum_to_zero() {
        let u = [0.3, -1.2, 0.8, 2.0, -0.4];
        let s: f64 = toda_rhs(0.5, &u).unwrap().iter().sum();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn overflow_guard() {
        match toda_rhs(1.0, &[0.0, 600.0, 0.0]) {
            Err(Error::Overflow { site, gap }) => {
                assert_eq!(site, 0);
                assert_eq!(gap, -600.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_states_rejected() {
        assert!(TodaState::new(1.0, vec![0.0; 2], vec![0.0; 2]).is_err());
        assert!(TodaState::new(0.0, vec![0.0; 3], vec![0.0; 3]).is_err());
        assert!(TodaState::new(1.0, vec![f64::NAN, 0.0, 0.0], vec![0.0; 3]).is_err());
    }

    #[test]
    fn zero_data_stays_zero() {
        let s = TodaState::new(1.0, vec![0.0; 5], vec![0.0; 5]).unwrap();
        let tr = simulate(&s, 0.01, 1.0, 10).unwrap();
        assert!(tr.samples.iter().all(|x| x.u.iter().chain(&x.v).all(|v| *v == 0.0)));
        assert_eq!(tr.samples.len(), 11);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(4)).collect();
        assert!((loglog_slope(&x, &y) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn vacuum_derivation_vanishes() {
        let one = ExpSum::constant(2, C64::new(1.0, 0.0));
        let d = derive_toda(0.5, &one, &one, 1e-12).unwrap();
        assert!(d.reciprocal);
        assert!(d.report.passed());
    }
}
