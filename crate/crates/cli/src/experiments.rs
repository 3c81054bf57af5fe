//! The six experiment kinds.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use anyhow::Result;
use ncforms::harmonic::{self, NewtonOptions, TowerReport};
use ncforms::lattice::{self, CalculusSpec, LatticeCalculus};
use ncforms::shift::{self, ShiftCalculus, ShiftCalculusSpec};
use ncforms::toda::{self, TodaState, WaveLimitConfig};
use ncforms::weyl::{self, Automorphism};
use ncforms::{random, Check, Coefficient, ExpSum, Report, C64};
use serde_json::{json, Value};

use crate::config::{CalculusConfig, ConfigFile, Experiment, Resolved, TowerData};

/// A plain numeric table written as CSV.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub reports: Vec<Report>,
    pub data: Value,
    pub tables: Vec<(String, Table)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed())
    }
}

const EXACT: f64 = 1e-12;

pub fn run(file: &ConfigFile, r: &Resolved) -> Result<Outcome> {
    match r.experiment {
        Experiment::Axioms => axioms(file, r),
        Experiment::Derive => derive(file, r),
        Experiment::Tower => tower(file, r),
        Experiment::Toda => toda_run(file, r),
        Experiment::Heisenberg => heisenberg(file, r),
        Experiment::Metric => metric(file, r),
    }
}

/// Collapse reports into one, keeping the worst value per check name.
fn merge(title: &str, reports: impl IntoIterator<Item = Report>) -> Report {
    let mut order: Vec<String> = Vec::new();
    let mut worst: BTreeMap<String, Check> = BTreeMap::new();
    for rep in reports {
        for c in rep.checks {
            match worst.get_mut(&c.name) {
                Some(w) => {
                    w.samples += c.samples;
                    w.passed &= c.passed;
                    if c.value > w.value || c.value.is_nan() {
                        w.value = c.value;
                    }
                }
                None => {
                    order.push(c.name.clone());
                    worst.insert(c.name.clone(), c);
                }
            }
        }
    }
    let mut out = Report::new(title);
    for n in order {
        out.push(worst.remove(&n).expect("name recorded"));
    }
    out
}

fn axioms(file: &ConfigFile, r: &Resolved) -> Result<Outcome> {
    let cfg = &file.axioms;
    let calc = r.calculus.clone().unwrap_or(CalculusConfig::Lattice(CalculusSpec::minkowski(&[1.0, 1.0])));
    let rep = match &calc {
        CalculusConfig::Lattice(spec) => lattice::axiom_suite(spec, cfg.samples, r.seed, r.tolerance)?,
        CalculusConfig::SemiDiscreteToda { ell } => {
            lattice::axiom_suite(&CalculusSpec::semi_discrete_toda(*ell), cfg.samples, r.seed, r.tolerance)?
        }
        CalculusConfig::Shift(spec) => {
            let c = ShiftCalculus::new(*spec)?;
            lattice::axiom_suite_with(&c, cfg.samples, r.seed, r.tolerance, shift::random_form)?
        }
        CalculusConfig::Weyl { hbar } => weyl::axiom_suite(*hbar, cfg.samples, r.seed, cfg.degree, r.tolerance),
    };
    Ok(Outcome { reports: vec![rep], data: json!({ "calculus": calc }), tables: Vec::new() })
}

fn exp2(lam: f64, mu: f64) -> ExpSum {
    ExpSum::exp(2, C64::new(1.0, 0.0), &[C64::new(mu, 0.0), C64::new(lam, 0.0)])
}

fn toda_derivations(ell: f64, samples: usize, seed: u64) -> Result<Vec<Report>> {
    let mut exact = Vec::new();
    for (lam, mu) in [(0.3, 0.0), (-0.7, 0.2), (1.1, -0.4)] {
        let d = toda::derive_toda(ell, &exp2(lam, mu), &exp2(-lam, -mu), EXACT)?;
        if !d.reciprocal {
            return Err(ncforms::Error::NotReciprocal(1.0).into());
        }
        exact.push(d.report);
    }
    let shape = random::ExpSumShape::default();
    let mut generic = Vec::with_capacity(samples);
    for i in 0..samples {
        let mut rng = random::case_rng(seed, i as u64);
        let f = random::expsum(&mut rng, 2, &shape);
        let g = random::expsum(&mut rng, 2, &shape);
        generic.push(toda::derive_toda(ell, &f, &g, EXACT)?.report);
    }
    Ok(vec![
        merge("Toda derivation, reciprocal exponentials", exact),
        merge("Toda derivation steps, random bilinear pairs", generic),
    ])
}

fn shift_reports(spec: ShiftCalculusSpec, samples: usize, seed: u64, tol: f64) -> Result<Vec<Report>> {
    let calc = ShiftCalculus::new(spec)?;
    let mut ids = shift::identity_suite(&calc, samples, seed, tol)?;
    ids.title = format!("{} (theta = {})", ids.title, spec.theta);
    let mut der = shift::derive_suite(&calc, tol)?;
    der.title = format!("{} (theta = {})", der.title, spec.theta);
    Ok(vec![ids, der])
}

fn derive(file: &ConfigFile, r: &Resolved) -> Result<Outcome> {
    let n = file.derive.samples;
    let mut reports = Vec::new();
    let mut calculi = Vec::new();
    match &r.calculus {
        Some(CalculusConfig::SemiDiscreteToda { ell }) => {
            reports.extend(toda_derivations(*ell, n, r.seed)?);
            calculi.push(r.calculus.clone());
        }
        Some(CalculusConfig::Shift(spec)) => {
            reports.extend(shift_reports(*spec, n, r.seed, r.tolerance)?);
            calculi.push(r.calculus.clone());
        }
        _ => {
            reports.extend(toda_derivations(1.0, n, r.seed)?);
            calculi.push(Some(CalculusConfig::SemiDiscreteToda { ell: 1.0 }));
            for theta in [0.0, 0.3] {
                let spec = ShiftCalculusSpec { a: 1.0, b: 0.5, theta };
                reports.extend(shift_reports(spec, n, r.seed, r.tolerance)?);
                calculi.push(Some(CalculusConfig::Shift(spec)));
            }
        }
    }
    Ok(Outcome { reports, data: json!({ "calculi": calculi }), tables: Vec::new() })
}

fn tower_data(data: TowerData, m: usize, amp: f64) -> (Vec<C64>, Vec<C64>) {
    let phase = |x: usize, shift: f64| 2.0 * PI * (x as f64 - shift) / m as f64;
    match data {
        TowerData::Traveling => {
            let w = |s: f64| (0..m).map(|x| C64::from_polar(amp, phase(x, s))).collect();
            (w(0.0), w(0.5))
        }
        TowerData::ZeroCharge => {
            let u0: Vec<C64> = (0..m).map(|x| C64::new(amp * phase(x, 0.0).cos(), 0.0)).collect();
            let u1 = (0..m).map(|x| u0[x] - (1.0 + amp * phase(x, 0.0).sin()).ln()).collect();
            (u0, u1)
        }
        TowerData::Wave => {
            let w = |s: f64| {
                (0..m).map(|x| C64::new(amp * (phase(x, s).sin() + 0.5 * (2.0 * phase(x, s)).cos()), 0.0)).collect()
            };
            (w(0.0), w(1.0))
        }
    }
}

fn charges_table(t: &TowerReport) -> Table {
    let entries = t.levels.first().map_or(0, |l| l.charges.values.first().map_or(0, |v| v.len()));
    let side = (entries as f64).sqrt().round() as usize;
    let col = |k: usize, e: usize, part: &str| {
        if entries == 1 {
            format!("Q_{k}{part}")
        } else {
            format!("Q_{k}_{}{}{part}", e / side + 1, e % side + 1)
        }
    };
    let mut header = vec!["t".to_string()];
    for part in ["", "_im"] {
        for l in &t.levels {
            for e in 0..entries {
                header.push(col(l.level, e, part));
            }
        }
    }
    let times = t.levels.first().map(|l| l.charges.times.clone()).unwrap_or_default();
    let rows = times
        .iter()
        .map(|&time| {
            let mut row = vec![time];
            for im in [false, true] {
                for l in &t.levels {
                    let at = l.charges.times.iter().position(|&s| s == time);
                    for e in 0..entries {
                        row.push(match at.and_then(|i| l.charges.values[i].get(e)) {
                            Some(q) if im => q.im,
                            Some(q) => q.re,
                            None => f64::NAN,
                        });
                    }
                }
            }
            row
        })
        .collect();
    Table { header, rows }
}

fn tower(file: &ConfigFile, r: &Resolved) -> Result<Outcome> {
    let cfg = &file.tower;
    let spec = match &r.calculus {
        Some(CalculusConfig::Lattice(s)) => s.clone(),
        _ => CalculusSpec::minkowski(&[1.0, 1.0]),
    };
    let calc = LatticeCalculus::new(spec.clone())?;
    let (u0, u1) = tower_data(cfg.data, cfg.sites, cfg.amplitude);
    let hist = harmonic::solve_field_equation(&calc, cfg.model, &u0, &u1, cfg.rows - 2, NewtonOptions::default())?;
    let a = harmonic::field_matrix(2, cfg.model, &Coefficient::Grid(hist.u.clone()))?;
    let tw = harmonic::conserved_tower(&calc, &a, cfg.depth, r.seed)?;
    let cur = harmonic::gauge_current(&calc, &a)?.current;
    let flat = ncforms::report::relative(harmonic::curvature(&calc, &cur)?.norm(), cur.norm().powi(2));

    let mut rep = Report::new("conserved-current tower");
    let solve = hist.slice_residuals.iter().copied().fold(0.0, f64::max);
    rep.push(Check::bound("field_solve", "per-site residual of the solved field equation", solve, cfg.solve_tolerance, hist.slice_residuals.len()));
    rep.push(Check::bound("field_equation", "d*A = 0 for A = a^-1 da, relative", tw.field_relative_residual, r.tolerance, 1));
    rep.push(Check::bound("gauge_flatness", "dA + AA = 0 for the solved field, relative to |A|^2", flat, cfg.flatness_tolerance, 1));
    rep.push(Check::bound(
        "covariant_identity",
        "d*D chi = D*d chi on a solution, relative",
        tw.identity_residual,
        r.tolerance,
        1,
    ));
    for l in &tw.levels {
        rep.push(Check::bound(
            &format!("level_{}_conservation", l.level),
            "d*J_k = 0, relative to |J_k| / l_min",
            l.relative_residual,
            r.tolerance,
            1,
        ));
        rep.push(Check::bound(
            &format!("level_{}_charge_drift", l.level),
            "spatial charge of J_k is time independent, relative to the density mass",
            l.charges.relative_drift,
            r.tolerance,
            l.charges.times.len(),
        ));
    }
    let flatness = harmonic::flatness_suite(&calc, cfg.flatness_samples, cfg.flatness_sites, r.seed, cfg.flatness_tolerance)?;
    let table = charges_table(&tw);
    let data = json!({
        "model": cfg.model,
        "newton_iterations": hist.iterations,
        "slice_residuals": hist.slice_residuals,
        "tower": tw,
    });
    Ok(Outcome { reports: vec![rep, flatness], data, tables: vec![("charges.csv".into(), table)] })
}

fn toda_state(ell: f64, cfg: &crate::config::TodaConfig) -> Result<TodaState> {
    let len = cfg.sites as f64 * ell;
    Ok(TodaState::sampled(
        ell,
        cfg.sites,
        |x| cfg.amplitude * (2.0 * PI * x / len).sin(),
        |x| cfg.velocity * (4.0 * PI * x / len).cos() + cfg.drift,
    )?)
}

fn toda_run(file: &ConfigFile, r: &Resolved) -> Result<Outcome> {
    let cfg = &file.toda;
    let ell = match r.calculus {
        Some(CalculusConfig::SemiDiscreteToda { ell }) => ell,
        _ => 1.0,
    };
    let state = toda_state(ell, cfg)?;
    let tr = toda::simulate(&state, cfg.dt, cfg.t_end, cfg.stride)?;
    let order = toda::rk4_order(&state, &cfg.order_steps, cfg.order_time)?;
    let rev = toda::reversibility(&state, cfg.dt, cfg.t_end)?;
    let wave = toda::wave_limit(&WaveLimitConfig::default(), &cfg.wave_spacings)?;
    let charge = toda::charge_cross_check(&state, &cfg.charge_steps, cfg.charge_time)?;

    let mut rep = Report::new("Toda lattice integration");
    rep.push(Check::bound("energy_drift", "max |H - H0| / |H0| along the trajectory", tr.energy_drift, r.tolerance, tr.steps));
    rep.push(Check::bound(
        "momentum_drift",
        "max |P - P0| / max(|P0|, sum |v0|) along the trajectory",
        tr.momentum_drift,
        cfg.momentum_tolerance,
        tr.steps,
    ));
    rep.push(Check::within(
        "rk4_order",
        "fitted order of the energy drift in the step size",
        order.order,
        cfg.order_target - cfg.order_halfwidth,
        cfg.order_target + cfg.order_halfwidth,
    ));
    rep.push(Check::bound("reversibility", "forward then backward integration returns to the start", rev, cfg.reversibility_tolerance, 1));
    rep.push(Check::flag("wave_limit_monotone", "distance to d'Alembert decreases as the spacing shrinks", wave.monotone));
    rep.push(Check::within(
        "wave_limit_order",
        "fitted order of the distance to d'Alembert in the spacing",
        wave.order,
        cfg.wave_order_min,
        f64::INFINITY,
    ));
    rep.push(Check::flag(
        "sampled_charge_decreasing",
        "first-level charge drift of the sampled trajectory decreases with the sample step",
        charge.drifts.windows(2).all(|w| w[1] < w[0]),
    ));
    rep.push(Check::within(
        "sampled_charge_order",
        "first-level charge drift of the sampled trajectory vanishes at first order",
        charge.order,
        0.95,
        1.05,
    ));
    let mut reports = vec![rep];
    reports.extend(toda_derivations(ell, 20, r.seed)?);

    let m = state.sites();
    let mut header = vec!["t".to_string()];
    header.extend((1..=m).map(|k| format!("u_{k}")));
    header.extend((1..=m).map(|k| format!("v_{k}")));
    header.extend(["H".to_string(), "P".to_string()]);
    let rows = tr
        .samples
        .iter()
        .map(|s| {
            let mut row = vec![s.t];
            row.extend(&s.u);
            row.extend(&s.v);
            row.extend([s.energy, s.momentum]);
            row
        })
        .collect();
    let data = json!({
        "ell": ell,
        "sites": m,
        "steps": tr.steps,
        "energy_drift": tr.energy_drift,
        "momentum_drift": tr.momentum_drift,
        "rk4_order": order,
        "reversibility": rev,
        "wave_limit": wave,
        "sampled_charge": charge,
    });
    Ok(Outcome { reports, data, tables: vec![("trajectory.csv".into(), Table { header, rows })] })
}

fn heisenberg(file: &ConfigFile, r: &Resolved) -> Result<Outcome> {
    let cfg = &file.heisenberg;
    let hbar = match r.calculus {
        Some(CalculusConfig::Weyl { hbar }) => hbar,
        _ => 1.0,
    };
    let tol = r.tolerance;
    let mut reports = vec![
        weyl::commutator_table(hbar),
        weyl::axiom_suite(hbar, cfg.samples, r.seed, cfg.degree, tol),
        weyl::epsilon_suite(hbar, 40, r.seed, cfg.degree, tol),
        weyl::residual_catalog(hbar, &cfg.catalog, tol)?,
    ];

    let solving: Vec<Automorphism> =
        cfg.catalog.iter().copied().filter(|a| a.expected_residual(hbar).norm() == 0.0).collect();
    let mut ident = Report::new("tower-enabling identity on the Weyl algebra");
    ident.push(Check::flag("catalog_has_solution", "the catalog contains a map solving the field equation", !solving.is_empty()));
    let mut literal = Vec::new();
    if !solving.is_empty() {
        let a = weyl::diagonal_current(hbar, &solving);
        let (mut fres, mut meas) = (0.0f64, 0.0f64);
        for i in 0..cfg.identity_samples {
            let mut rng = random::case_rng(r.seed, i as u64);
            let chi = weyl::random_matrix(&mut rng, hbar, solving.len(), cfg.degree);
            let t = weyl::tower_identity(&a, &chi)?;
            fres = fres.max(t.field_residual);
            meas = meas.max(t.measured);
            literal.push(t.literal);
        }
        ident.push(Check::bound("current_solves", "d*A = 0 for the diagonal current", fres, tol, cfg.identity_samples));
        ident.push(Check::bound(
            "tower_identity",
            "d*D(chi^dagger) = c (D*d chi)^dagger with the measured constant c",
            meas,
            tol,
            cfg.identity_samples,
        ));
    }
    reports.push(ident);

    let closed = weyl::closed_exact(hbar, cfg.max_closed_degree, r.seed);
    let mut ce = Report::new("closed 1-forms are exact");
    ce.push(Check::flag(
        "closed_is_exact",
        "dimension of closed 1-forms equals that of exact ones per degree",
        closed.iter().all(|d| d.closed_dimension == d.exact_dimension),
    ));
    ce.push(Check::bound(
        "potential_reconstruction",
        "F = (q a + b p)/(k+1) reproduces a random closed form",
        closed.iter().map(|d| d.reconstruction_residual).fold(0.0, f64::max),
        tol,
        closed.len(),
    ));
    reports.push(ce);
    let data = json!({
        "hbar": hbar,
        "epsilon": weyl::measure_epsilon(hbar),
        "dag_star_constant": weyl::measure_dag_star_constant(hbar),
        "literal_identity_residuals": literal,
        "closed_exact": closed,
    });
    Ok(Outcome { reports, data, tables: Vec::new() })
}

fn metric(file: &ConfigFile, r: &Resolved) -> Result<Outcome> {
    let rep = lattice::metric_suite(file.metric.draws, r.seed, r.tolerance)?;
    Ok(Outcome { reports: vec![rep], data: Value::Null, tables: Vec::new() })
}
