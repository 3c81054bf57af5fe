//! JSON experiment configuration and its validation.

use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};
use ncforms::harmonic::Model;
use ncforms::lattice::{AxisKind, CalculusSpec};
use ncforms::shift::ShiftCalculusSpec;
use ncforms::weyl::Automorphism;
use serde::{Deserialize, Serialize};

/// Invalid or inconsistent configuration; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn bail(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Axioms,
    Derive,
    Tower,
    Toda,
    Heisenberg,
    Metric,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Axioms,
        Experiment::Derive,
        Experiment::Tower,
        Experiment::Toda,
        Experiment::Heisenberg,
        Experiment::Metric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Axioms => "axioms",
            Experiment::Derive => "derive",
            Experiment::Tower => "tower",
            Experiment::Toda => "toda",
            Experiment::Heisenberg => "heisenberg",
            Experiment::Metric => "metric",
        }
    }

    /// Tolerance of the primary bound when neither the config nor the flag sets one.
    pub fn default_tolerance(self) -> f64 {
        match self {
            Experiment::Tower | Experiment::Toda => 1e-8,
            _ => 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CalculusConfig {
    Lattice(CalculusSpec),
    Shift(ShiftCalculusSpec),
    Weyl { hbar: f64 },
    SemiDiscreteToda { ell: f64 },
}

impl CalculusConfig {
    fn kind(&self) -> &'static str {
        match self {
            CalculusConfig::Lattice(_) => "lattice",
            CalculusConfig::Shift(_) => "shift",
            CalculusConfig::Weyl { .. } => "weyl",
            CalculusConfig::SemiDiscreteToda { .. } => "semi-discrete-toda",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AxiomsConfig {
    pub samples: usize,
    /// Polynomial degree of random Weyl elements.
    pub degree: u32,
}

impl Default for AxiomsConfig {
    fn default() -> Self {
        AxiomsConfig { samples: 1000, degree: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeriveConfig {
    /// Randomized identity samples for the (a,b) calculus and random bilinear Toda pairs.
    pub samples: usize,
}

impl Default for DeriveConfig {
    fn default() -> Self {
        DeriveConfig { samples: 200 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TowerData {
    /// Complex positive-frequency wave `amplitude * exp(2 pi i x / M)`.
    Traveling,
    /// Real data whose first charge vanishes.
    ZeroCharge,
    /// Real superposition of two modes, for the linear model.
    Wave,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TowerConfig {
    pub sites: usize,
    pub rows: usize,
    pub depth: usize,
    pub model: Model,
    pub data: TowerData,
    pub amplitude: f64,
    /// Bound on the per-site residual of the solved field.
    pub solve_tolerance: f64,
    pub flatness_samples: usize,
    pub flatness_sites: usize,
    pub flatness_tolerance: f64,
}

impl Default for TowerConfig {
    fn default() -> Self {
        TowerConfig {
            sites: 32,
            rows: 32,
            depth: 4,
            model: Model::Toda,
            data: TowerData::Traveling,
            amplitude: 0.3,
            solve_tolerance: 1e-10,
            flatness_samples: 100,
            flatness_sites: 16,
            flatness_tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TodaConfig {
    pub sites: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Steps between trajectory rows.
    pub stride: usize,
    /// `u(x) = amplitude sin(2 pi x / L)`.
    pub amplitude: f64,
    /// `v(x) = velocity cos(4 pi x / L) + drift`.
    pub velocity: f64,
    pub drift: f64,
    pub momentum_tolerance: f64,
    pub order_steps: Vec<f64>,
    pub order_time: f64,
    pub order_target: f64,
    pub order_halfwidth: f64,
    pub reversibility_tolerance: f64,
    pub wave_spacings: Vec<f64>,
    pub wave_order_min: f64,
    pub charge_steps: Vec<f64>,
    pub charge_time: f64,
}

impl Default for TodaConfig {
    fn default() -> Self {
        TodaConfig {
            sites: 16,
            dt: 1e-3,
            t_end: 10.0,
            stride: 10,
            amplitude: 2.0,
            velocity: 0.6,
            drift: 0.1,
            momentum_tolerance: 1e-12,
            order_steps: vec![0.02, 0.01, 0.005],
            order_time: 10.0,
            order_target: 4.0,
            order_halfwidth: 0.5,
            reversibility_tolerance: 1e-6,
            wave_spacings: vec![0.2, 0.1, 0.05],
            wave_order_min: 1.0,
            charge_steps: vec![0.04, 0.02, 0.01],
            charge_time: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeisenbergConfig {
    pub degree: u32,
    pub samples: usize,
    pub identity_samples: usize,
    pub max_closed_degree: u32,
    pub catalog: Vec<Automorphism>,
}

impl Default for HeisenbergConfig {
    fn default() -> Self {
        HeisenbergConfig {
            degree: 3,
            samples: 1000,
            identity_samples: 10,
            max_closed_degree: 6,
            catalog: ncforms::weyl::default_catalog(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub draws: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig { draws: 3 }
    }
}

/// The file format. Every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    pub calculus: Option<CalculusConfig>,
    pub axioms: AxiomsConfig,
    pub derive: DeriveConfig,
    pub tower: TowerConfig,
    pub toda: TodaConfig,
    pub heisenberg: HeisenbergConfig,
    pub metric: MetricConfig,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<ConfigFile> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| bail(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| bail(format!("cannot parse {}: {e}", path.display())))
    }
}

/// Fully resolved settings of one experiment, echoed into its report.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub experiment: Experiment,
    pub seed: u64,
    pub tolerance: f64,
    pub calculus: Option<CalculusConfig>,
    pub settings: serde_json::Value,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(bail(format!("{name} must be a positive finite number, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(bail(format!("{name} must be at least {min}, got {v}")))
    }
}

fn steps(name: &str, v: &[f64]) -> Result<()> {
    at_least(name, v.len(), 2)?;
    for x in v {
        positive(name, *x)?;
    }
    if v.windows(2).any(|w| w[1] >= w[0]) {
        return Err(bail(format!("{name} must be strictly decreasing")));
    }
    Ok(())
}

fn check_calculus(c: &CalculusConfig) -> Result<()> {
    match c {
        CalculusConfig::Lattice(s) => {
            at_least("calculus.spacings length", s.spacings.len(), 1)?;
            if s.spacings.len() > 4 {
                return Err(bail("lattice dimension above 4 is not supported"));
            }
            for l in &s.spacings {
                positive("calculus.spacings", *l)?;
            }
        }
        CalculusConfig::Shift(s) => {
            for (n, v) in [("a", s.a), ("b", s.b), ("theta", s.theta)] {
                if !v.is_finite() {
                    return Err(bail(format!("calculus.{n} must be finite")));
                }
            }
        }
        CalculusConfig::Weyl { hbar } => positive("calculus.hbar", *hbar)?,
        CalculusConfig::SemiDiscreteToda { ell } => positive("calculus.ell", *ell)?,
    }
    Ok(())
}

fn reject(e: Experiment, c: &CalculusConfig) -> anyhow::Error {
    bail(format!("experiment {} does not accept a {} calculus", e.name(), c.kind()))
}

impl ConfigFile {
    /// Merge flags, validate against the calculus kind, and fill defaults.
    pub fn resolve(&self, e: Experiment, seed: Option<u64>, tolerance: Option<f64>) -> Result<Resolved> {
        let seed = seed
            .or(self.seed)
            .ok_or_else(|| bail("a seed is required (set \"seed\" in the config or pass --seed)"))?;
        let tolerance = tolerance.or(self.tolerance).unwrap_or(e.default_tolerance());
        positive("tolerance", tolerance)?;
        if let Some(c) = &self.calculus {
            check_calculus(c)?;
        }
        let calc = self.calculus.clone();
        let settings = match e {
            Experiment::Axioms => {
                at_least("axioms.samples", self.axioms.samples, 1)?;
                serde_json::to_value(&self.axioms)
            }
            Experiment::Derive => {
                match &calc {
                    None | Some(CalculusConfig::Shift(_)) | Some(CalculusConfig::SemiDiscreteToda { .. }) => {}
                    Some(c) => return Err(reject(e, c)),
                }
                at_least("derive.samples", self.derive.samples, 1)?;
                serde_json::to_value(&self.derive)
            }
            Experiment::Tower => {
                match &calc {
                    None => {}
                    Some(CalculusConfig::Lattice(s)) => {
                        if s.spacings.len() != 2 || s.kinds.iter().any(|k| *k != AxisKind::Discrete) {
                            return Err(bail("tower needs a 2D fully discrete lattice"));
                        }
                    }
                    Some(c) => return Err(reject(e, c)),
                }
                let t = &self.tower;
                at_least("tower.sites", t.sites, 3)?;
                at_least("tower.rows", t.rows, 3)?;
                at_least("tower.depth", t.depth, 1)?;
                at_least("tower.flatness_sites", t.flatness_sites, 2)?;
                positive("tower.solve_tolerance", t.solve_tolerance)?;
                positive("tower.flatness_tolerance", t.flatness_tolerance)?;
                if !t.amplitude.is_finite() {
                    return Err(bail("tower.amplitude must be finite"));
                }
                match (t.model, t.data) {
                    (Model::Linear, TowerData::Wave) | (Model::Toda, TowerData::Traveling | TowerData::ZeroCharge) => {}
                    (m, d) => return Err(bail(format!("tower data {d:?} does not fit model {m:?}"))),
                }
                serde_json::to_value(t)
            }
            Experiment::Toda => {
                match &calc {
                    None | Some(CalculusConfig::SemiDiscreteToda { .. }) => {}
                    Some(c) => return Err(reject(e, c)),
                }
                let t = &self.toda;
                at_least("toda.sites", t.sites, 3)?;
                at_least("toda.stride", t.stride, 1)?;
                for (n, v) in [
                    ("toda.dt", t.dt),
                    ("toda.t_end", t.t_end),
                    ("toda.order_time", t.order_time),
                    ("toda.charge_time", t.charge_time),
                    ("toda.momentum_tolerance", t.momentum_tolerance),
                    ("toda.reversibility_tolerance", t.reversibility_tolerance),
                ] {
                    positive(n, v)?;
                }
                steps("toda.order_steps", &t.order_steps)?;
                steps("toda.wave_spacings", &t.wave_spacings)?;
                steps("toda.charge_steps", &t.charge_steps)?;
                serde_json::to_value(t)
            }
            Experiment::Heisenberg => {
                match &calc {
                    None | Some(CalculusConfig::Weyl { .. }) => {}
                    Some(c) => return Err(reject(e, c)),
                }
                let h = &self.heisenberg;
                at_least("heisenberg.samples", h.samples, 1)?;
                at_least("heisenberg.identity_samples", h.identity_samples, 1)?;
                if h.catalog.is_empty() {
                    return Err(bail("heisenberg.catalog is empty"));
                }
                serde_json::to_value(h)
            }
            Experiment::Metric => {
                if let Some(c) = &calc {
                    return Err(reject(e, c));
                }
                at_least("metric.draws", self.metric.draws, 1)?;
                serde_json::to_value(&self.metric)
            }
        }
        .context("serializing settings")?;
        Ok(Resolved { experiment: e, seed, tolerance, calculus: calc, settings })
    }
}
