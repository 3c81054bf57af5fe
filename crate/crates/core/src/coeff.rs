//! Commutative coefficient functions.
//!
//! Two representations share one contract: [`ExpSum`], an exact sum of
//! quasi-exponential terms `c * x0^p0 ... * exp(l0 x0 + ...)` that supports
//! arbitrary complex shifts, and [`GridFunction`], complex samples on a
//! rectangular window of a lattice.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Terms with |c| at or below this are dropped.
pub const ZERO_TOL: f64 = 1e-14;

fn round_sig(v: f64) -> f64 {
    if v == 0.0 || v.abs() < 1e-250 || !v.is_finite() {
        return if v.is_finite() { 0.0 } else { v };
    }
    let e = v.abs().log10().floor() as i32;
    let scale = 10f64.powi(11 - e);
    let r = (v * scale).round() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: C64,
    pub powers: Vec<u32>,
    pub freqs: Vec<C64>,
}

#[derive(Clone, Debug)]
struct Key {
    powers: Vec<u32>,
    freqs: Vec<(f64, f64)>,
}

impl Key {
    fn of(t: &Term) -> Key {
        Key {
            powers: t.powers.clone(),
            freqs: t.freqs.iter().map(|z| (round_sig(z.re), round_sig(z.im))).collect(),
        }
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.freqs.iter().zip(&other.freqs) {
            let o = a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1));
            if o != Ordering::Equal {
                return o;
            }
        }
        self.powers.cmp(&other.powers)
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

/// Exact finite sum of terms `c * prod x_k^{p_k} * exp(sum f_k x_k)`.
///
/// Terms are kept sorted and merged by (powers, frequencies), frequencies
/// compared after rounding to 12 significant digits. Equality is equality
/// of the canonical forms up to the zero tolerance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpSum {
    nvars: usize,
    terms: Vec<Term>,
}

impl ExpSum {
    pub fn new(nvars: usize, terms: Vec<Term>) -> ExpSum {
        for t in &terms {
            assert_eq!(t.powers.len(), nvars, "term power arity");
            assert_eq!(t.freqs.len(), nvars, "term frequency arity");
        }
        let mut map: BTreeMap<Key, Term> = BTreeMap::new();
        for t in terms {
            if t.coeff == C64::new(0.0, 0.0) {
                continue;
            }
            match map.entry(Key::of(&t)) {
                std::collections::btree_map::Entry::Occupied(mut e) => e.get_mut().coeff += t.coeff,
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(t);
                }
            }
        }
        let terms = map.into_values().filter(|t| t.coeff.norm() > ZERO_TOL).collect();
        ExpSum { nvars, terms }
    }

    pub fn zero(nvars: usize) -> ExpSum {
        ExpSum { nvars, terms: Vec::new() }
    }

    pub fn constant(nvars: usize, c: C64) -> ExpSum {
        ExpSum::exp(nvars, c, &vec![C64::new(0.0, 0.0); nvars])
    }

    pub fn exp(nvars: usize, c: C64, freqs: &[C64]) -> ExpSum {
        ExpSum::monomial(nvars, c, &vec![0; nvars], freqs)
    }

    pub fn monomial(nvars: usize, c: C64, powers: &[u32], freqs: &[C64]) -> ExpSum {
        ExpSum::new(
            nvars,
            vec![Term { coeff: c, powers: powers.to_vec(), freqs: freqs.to_vec() }],
        )
    }

    /// The coordinate function x_axis.
    pub fn coordinate(nvars: usize, axis: usize) -> ExpSum {
        let mut p = vec![0; nvars];
        p[axis] = 1;
        ExpSum::monomial(nvars, C64::new(1.0, 0.0), &p, &vec![C64::new(0.0, 0.0); nvars])
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn canonical(&self) -> ExpSum {
        ExpSum::new(self.nvars, self.terms.clone())
    }

    /// Sum of absolute coefficients.
    pub fn norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.norm()).sum()
    }

    pub fn scale(&self, c: C64) -> ExpSum {
        ExpSum::new(
            self.nvars,
            self.terms.iter().map(|t| Term { coeff: t.coeff * c, ..t.clone() }).collect(),
        )
    }

    fn check_arity(&self, other: &ExpSum) {
        assert_eq!(self.nvars, other.nvars, "ExpSum arity mismatch");
    }

    pub fn shift(&self, axis: usize, amount: C64) -> ExpSum {
        assert!(axis < self.nvars, "shift axis out of range");
        let mut out = Vec::new();
        for t in &self.terms {
            let factor = t.coeff * (t.freqs[axis] * amount).exp();
            let p = t.powers[axis];
            for k in 0..=p {
                let mut powers = t.powers.clone();
                powers[axis] = k;
                let c = factor * binomial(p, k) * amount.powu(p - k);
                out.push(Term { coeff: c, powers, freqs: t.freqs.clone() });
            }
        }
        ExpSum::new(self.nvars, out)
    }

    pub fn partial(&self, axis: usize) -> ExpSum {
        assert!(axis < self.nvars, "partial axis out of range");
        let mut out = Vec::new();
        for t in &self.terms {
            out.push(Term { coeff: t.coeff * t.freqs[axis], ..t.clone() });
            let p = t.powers[axis];
            if p > 0 {
                let mut powers = t.powers.clone();
                powers[axis] = p - 1;
                out.push(Term { coeff: t.coeff * p as f64, powers, freqs: t.freqs.clone() });
            }
        }
        ExpSum::new(self.nvars, out)
    }

    pub fn eval(&self, point: &[C64]) -> C64 {
        assert_eq!(point.len(), self.nvars, "eval point arity");
        self.terms
            .iter()
            .map(|t| {
                let mut v = t.coeff;
                let mut e = C64::new(0.0, 0.0);
                for k in 0..self.nvars {
                    v *= point[k].powu(t.powers[k]);
                    e += t.freqs[k] * point[k];
                }
                v * e.exp()
            })
            .sum()
    }

    /// 1/f for a single pure exponential; `None` otherwise.
    pub fn reciprocal(&self) -> Option<ExpSum> {
        match self.terms.as_slice() {
            [t] if t.powers.iter().all(|&p| p == 0) => Some(ExpSum::exp(
                self.nvars,
                C64::new(1.0, 0.0) / t.coeff,
                &t.freqs.iter().map(|f| -f).collect::<Vec<_>>(),
            )),
            _ => None,
        }
    }

    /// Decompose an affine polynomial `c0 + sum_k c_k x_k`.
    pub fn affine_parts(&self) -> Option<(C64, Vec<C64>)> {
        let mut c0 = C64::new(0.0, 0.0);
        let mut lin = vec![C64::new(0.0, 0.0); self.nvars];
        for t in &self.terms {
            if t.freqs.iter().any(|f| f.norm() != 0.0) {
                return None;
            }
            let deg: u32 = t.powers.iter().sum();
            match deg {
                0 => c0 += t.coeff,
                1 => {
                    let k = t.powers.iter().position(|&p| p == 1).unwrap();
                    lin[k] += t.coeff;
                }
                _ => return None,
            }
        }
        Some((c0, lin))
    }

    pub fn max_power(&self, axis: usize) -> u32 {
        self.terms.iter().map(|t| t.powers[axis]).max().unwrap_or(0)
    }

    pub fn distance(&self, other: &ExpSum) -> f64 {
        (self - other).norm()
    }
}

impl PartialEq for ExpSum {
    fn eq(&self, other: &ExpSum) -> bool {
        self.nvars == other.nvars && (self - other).is_zero()
    }
}

impl Add for &ExpSum {
    type Output = ExpSum;
    fn add(self, rhs: &ExpSum) -> ExpSum {
        self.check_arity(rhs);
        let mut terms = self.terms.clone();
        terms.extend(rhs.terms.iter().cloned());
        ExpSum::new(self.nvars, terms)
    }
}

impl Sub for &ExpSum {
    type Output = ExpSum;
    fn sub(self, rhs: &ExpSum) -> ExpSum {
        self + &(-rhs)
    }
}

impl Neg for &ExpSum {
    type Output = ExpSum;
    fn neg(self) -> ExpSum {
        ExpSum {
            nvars: self.nvars,
            terms: self.terms.iter().map(|t| Term { coeff: -t.coeff, ..t.clone() }).collect(),
        }
    }
}

impl Mul for &ExpSum {
    type Output = ExpSum;
    fn mul(self, rhs: &ExpSum) -> ExpSum {
        self.check_arity(rhs);
        let mut out = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                out.push(Term {
                    coeff: a.coeff * b.coeff,
                    powers: a.powers.iter().zip(&b.powers).map(|(x, y)| x + y).collect(),
                    freqs: a.freqs.iter().zip(&b.freqs).map(|(x, y)| x + y).collect(),
                });
            }
        }
        ExpSum::new(self.nvars, out)
    }
}

macro_rules! owned_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for ExpSum {
            type Output = ExpSum;
            fn $m(self, rhs: ExpSum) -> ExpSum { (&self).$m(&rhs) }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul);

impl Neg for ExpSum {
    type Output = ExpSum;
    fn neg(self) -> ExpSum {
        -&self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

/// Rectangular index range, row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub origin: Vec<i64>,
    pub extent: Vec<usize>,
}

impl Window {
    pub fn new(origin: Vec<i64>, extent: Vec<usize>) -> Result<Window> {
        if origin.len() != extent.len() {
            return Err(Error::DimensionMismatch(origin.len(), extent.len()));
        }
        if extent.contains(&0) {
            return Err(Error::InvalidParameter("window extents must be >= 1".into()));
        }
        Ok(Window { origin, extent })
    }

    pub fn cube(dim: usize, m: usize) -> Window {
        Window { origin: vec![0; dim], extent: vec![m.max(1); dim] }
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn len(&self) -> usize {
        self.extent.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, site: &[i64]) -> bool {
        site.iter()
            .zip(&self.origin)
            .zip(&self.extent)
            .all(|((&s, &o), &e)| s >= o && s < o + e as i64)
    }

    pub fn index(&self, site: &[i64]) -> usize {
        let mut idx = 0usize;
        for k in 0..self.dim() {
            idx = idx * self.extent[k] + (site[k] - self.origin[k]) as usize;
        }
        idx
    }

    pub fn site(&self, mut index: usize) -> Vec<i64> {
        let mut s = vec![0i64; self.dim()];
        for k in (0..self.dim()).rev() {
            s[k] = self.origin[k] + (index % self.extent[k]) as i64;
            index /= self.extent[k];
        }
        s
    }

    pub fn intersect(&self, other: &Window) -> Option<Window> {
        let mut origin = Vec::with_capacity(self.dim());
        let mut extent = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let lo = self.origin[k].max(other.origin[k]);
            let hi = (self.origin[k] + self.extent[k] as i64)
                .min(other.origin[k] + other.extent[k] as i64);
            if hi <= lo {
                return None;
            }
            origin.push(lo);
            extent.push((hi - lo) as usize);
        }
        Some(Window { origin, extent })
    }
}

/// Complex samples on a window of the lattice with spacings `spacing`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    window: Window,
    spacing: Vec<f64>,
    boundary: Vec<Boundary>,
    values: Vec<C64>,
}

impl GridFunction {
    pub fn new(
        window: Window,
        spacing: Vec<f64>,
        boundary: Vec<Boundary>,
        values: Vec<C64>,
    ) -> Result<GridFunction> {
        let n = window.dim();
        if spacing.len() != n || boundary.len() != n {
            return Err(Error::DimensionMismatch(n, spacing.len().min(boundary.len())));
        }
        if spacing.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParameter("grid spacings must be positive".into()));
        }
        if values.len() != window.len() {
            return Err(Error::DimensionMismatch(window.len(), values.len()));
        }
        Ok(GridFunction { window, spacing, boundary, values })
    }

    pub fn from_fn<F>(
        window: Window,
        spacing: Vec<f64>,
        boundary: Vec<Boundary>,
        f: F,
    ) -> Result<GridFunction>
    where
        F: Fn(&[i64]) -> C64 + Sync + Send,
    {
        let w = window.clone();
        let values = par::map_range(window.len(), |i| f(&w.site(i)));
        GridFunction::new(window, spacing, boundary, values)
    }

    pub fn constant(
        window: Window,
        spacing: Vec<f64>,
        boundary: Vec<Boundary>,
        c: C64,
    ) -> Result<GridFunction> {
        let n = window.len();
        GridFunction::new(window, spacing, boundary, vec![c; n])
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn boundary(&self) -> &[Boundary] {
        &self.boundary
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    fn resolve(&self, site: &[i64]) -> Result<Vec<i64>> {
        let mut s = site.to_vec();
        for k in 0..self.dim() {
            let o = self.window.origin[k];
            let e = self.window.extent[k] as i64;
            match self.boundary[k] {
                Boundary::Periodic => s[k] = o + (s[k] - o).rem_euclid(e),
                Boundary::Open => {
                    if s[k] < o || s[k] >= o + e {
                        return Err(Error::OutOfWindow(site.to_vec()));
                    }
                }
            }
        }
        Ok(s)
    }

    pub fn at(&self, site: &[i64]) -> Result<C64> {
        if site.len() != self.dim() {
            return Err(Error::DimensionMismatch(self.dim(), site.len()));
        }
        let s = self.resolve(site)?;
        Ok(self.values[self.window.index(&s)])
    }

    /// g(s) = f(s + k e_axis). Open axes relabel the window, periodic axes rotate.
    pub fn shift_sites(&self, axis: usize, k: i64) -> GridFunction {
        match self.boundary[axis] {
            Boundary::Open => {
                let mut g = self.clone();
                g.window.origin[axis] -= k;
                g
            }
            Boundary::Periodic => {
                let w = &self.window;
                let values = par::map_range(w.len(), |i| {
                    let mut s = w.site(i);
                    s[axis] += k;
                    let s = self.resolve(&s).expect("periodic axis");
                    self.values[w.index(&s)]
                });
                GridFunction { values, ..self.clone() }
            }
        }
    }

    pub fn shift(&self, axis: usize, amount: C64) -> Result<GridFunction> {
        if axis >= self.dim() {
            return Err(Error::AxisOutOfRange { axis, dim: self.dim() });
        }
        let l = self.spacing[axis];
        let k = amount.re / l;
        let kr = k.round();
        if amount.im.abs() > 1e-12 * l || (k - kr).abs() > 1e-9 {
            return Err(Error::NonLatticeShift { axis, amount: amount.to_string(), spacing: l });
        }
        Ok(self.shift_sites(axis, kr as i64))
    }

    pub fn restrict(&self, window: &Window) -> Result<GridFunction> {
        if window == &self.window {
            return Ok(self.clone());
        }
        let values = (0..window.len())
            .map(|i| self.at(&window.site(i)))
            .collect::<Result<Vec<_>>>()?;
        GridFunction::new(window.clone(), self.spacing.clone(), self.boundary.clone(), values)
    }

    fn compatible(&self, other: &GridFunction) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        if self.boundary != other.boundary || self.spacing != other.spacing {
            return Err(Error::WindowMismatch(self.window.origin.clone(), other.window.origin.clone()));
        }
        Ok(())
    }

    pub fn zip_with(&self, other: &GridFunction, op: impl Fn(C64, C64) -> C64) -> Result<GridFunction> {
        self.compatible(other)?;
        if self.window != other.window {
            return Err(Error::WindowMismatch(self.window.origin.clone(), other.window.origin.clone()));
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect();
        Ok(GridFunction { values, ..self.clone() })
    }

    /// Common window of two grids; periodic axes must already agree.
    pub fn common_window(&self, other: &GridFunction) -> Result<Window> {
        self.compatible(other)?;
        for k in 0..self.dim() {
            if self.boundary[k] == Boundary::Periodic
                && (self.window.origin[k] != other.window.origin[k]
                    || self.window.extent[k] != other.window.extent[k])
            {
                return Err(Error::WindowMismatch(self.window.origin.clone(), other.window.origin.clone()));
            }
        }
        self.window
            .intersect(&other.window)
            .ok_or_else(|| Error::WindowMismatch(self.window.origin.clone(), other.window.origin.clone()))
    }

    pub fn zip_aligned(&self, other: &GridFunction, op: impl Fn(C64, C64) -> C64) -> Result<GridFunction> {
        let w = self.common_window(other)?;
        self.restrict(&w)?.zip_with(&other.restrict(&w)?, op)
    }

    pub fn map(&self, op: impl Fn(C64) -> C64) -> GridFunction {
        GridFunction { values: self.values.iter().map(|&v| op(v)).collect(), ..self.clone() }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Evaluate at physical coordinates `point = site * spacing`.
    pub fn eval(&self, point: &[C64]) -> Result<C64> {
        let mut site = Vec::with_capacity(self.dim());
        for (k, p) in point.iter().enumerate() {
            let s = p.re / self.spacing[k];
            if p.im.abs() > 1e-12 || (s - s.round()).abs() > 1e-9 {
                return Err(Error::NonLatticeShift { axis: k, amount: p.to_string(), spacing: self.spacing[k] });
            }
            site.push(s.round() as i64);
        }
        self.at(&site)
    }
}

/// A coefficient function in one of the two representations.
#[derive(Clone, Debug, PartialEq)]
pub enum Coefficient {
    Exp(ExpSum),
    Grid(GridFunction),
}

impl From<ExpSum> for Coefficient {
    fn from(e: ExpSum) -> Self {
        Coefficient::Exp(e)
    }
}

impl From<GridFunction> for Coefficient {
    fn from(g: GridFunction) -> Self {
        Coefficient::Grid(g)
    }
}

impl Coefficient {
    pub fn kind(&self) -> &'static str {
        match self {
            Coefficient::Exp(_) => "expsum",
            Coefficient::Grid(_) => "grid",
        }
    }

    pub fn as_exp(&self) -> Result<&ExpSum> {
        match self {
            Coefficient::Exp(e) => Ok(e),
            Coefficient::Grid(_) => Err(Error::NotSymbolic),
        }
    }

    pub fn as_grid(&self) -> Option<&GridFunction> {
        match self {
            Coefficient::Grid(g) => Some(g),
            Coefficient::Exp(_) => None,
        }
    }

    fn binary(
        &self,
        other: &Coefficient,
        aligned: bool,
        exp: impl Fn(&ExpSum, &ExpSum) -> ExpSum,
        grid: impl Fn(C64, C64) -> C64,
    ) -> Result<Coefficient> {
        match (self, other) {
            (Coefficient::Exp(a), Coefficient::Exp(b)) => {
                if a.nvars() != b.nvars() {
                    return Err(Error::DimensionMismatch(a.nvars(), b.nvars()));
                }
                Ok(Coefficient::Exp(exp(a, b)))
            }
            (Coefficient::Grid(a), Coefficient::Grid(b)) => Ok(Coefficient::Grid(if aligned {
                a.zip_aligned(b, grid)?
            } else {
                a.zip_with(b, grid)?
            })),
            _ => Err(Error::KindMismatch(self.kind(), other.kind())),
        }
    }

    pub fn add(&self, other: &Coefficient) -> Result<Coefficient> {
        self.binary(other, false, |a, b| a + b, |a, b| a + b)
    }

    pub fn sub(&self, other: &Coefficient) -> Result<Coefficient> {
        self.binary(other, false, |a, b| a - b, |a, b| a - b)
    }

    pub fn mul(&self, other: &Coefficient) -> Result<Coefficient> {
        self.binary(other, false, |a, b| a * b, |a, b| a * b)
    }

    /// Like [`Coefficient::add`] but grids are first restricted to their common window.
    pub fn add_aligned(&self, other: &Coefficient) -> Result<Coefficient> {
        self.binary(other, true, |a, b| a + b, |a, b| a + b)
    }

    pub fn sub_aligned(&self, other: &Coefficient) -> Result<Coefficient> {
        self.binary(other, true, |a, b| a - b, |a, b| a - b)
    }

    pub fn mul_aligned(&self, other: &Coefficient) -> Result<Coefficient> {
        self.binary(other, true, |a, b| a * b, |a, b| a * b)
    }

    pub fn scale(&self, c: C64) -> Coefficient {
        match self {
            Coefficient::Exp(e) => Coefficient::Exp(e.scale(c)),
            Coefficient::Grid(g) => Coefficient::Grid(g.map(|v| v * c)),
        }
    }

    pub fn neg(&self) -> Coefficient {
        self.scale(C64::new(-1.0, 0.0))
    }

    pub fn shift(&self, axis: usize, amount: C64) -> Result<Coefficient> {
        match self {
            Coefficient::Exp(e) => {
                if axis >= e.nvars() {
                    return Err(Error::AxisOutOfRange { axis, dim: e.nvars() });
                }
                Ok(Coefficient::Exp(e.shift(axis, amount)))
            }
            Coefficient::Grid(g) => Ok(Coefficient::Grid(g.shift(axis, amount)?)),
        }
    }

    pub fn partial(&self, axis: usize) -> Result<Coefficient> {
        let e = self.as_exp()?;
        if axis >= e.nvars() {
            return Err(Error::AxisOutOfRange { axis, dim: e.nvars() });
        }
        Ok(Coefficient::Exp(e.partial(axis)))
    }

    pub fn eval(&self, point: &[C64]) -> Result<C64> {
        match self {
            Coefficient::Exp(e) => {
                if point.len() != e.nvars() {
                    return Err(Error::DimensionMismatch(e.nvars(), point.len()));
                }
                Ok(e.eval(point))
            }
            Coefficient::Grid(g) => g.eval(point),
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            Coefficient::Exp(e) => e.norm(),
            Coefficient::Grid(g) => g.norm(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coefficient::Exp(e) => e.is_zero(),
            Coefficient::Grid(g) => g.values().iter().all(|v| *v == C64::new(0.0, 0.0)),
        }
    }

    /// Constant function in the same representation (and window) as `self`.
    pub fn constant_like(&self, c: C64) -> Coefficient {
        match self {
            Coefficient::Exp(e) => Coefficient::Exp(ExpSum::constant(e.nvars(), c)),
            Coefficient::Grid(g) => Coefficient::Grid(g.map(|_| c)),
        }
    }

    pub fn zero_like(&self) -> Coefficient {
        self.constant_like(C64::new(0.0, 0.0))
    }

    /// Norm of the aligned difference; infinite across representations.
    pub fn distance(&self, other: &Coefficient) -> f64 {
        self.sub_aligned(other).map(|d| d.norm()).unwrap_or(f64::INFINITY)
    }

    pub fn map_grid(&self, op: impl Fn(C64) -> C64) -> Result<Coefficient> {
        match self {
            Coefficient::Grid(g) => Ok(Coefficient::Grid(g.map(op))),
            Coefficient::Exp(_) => Err(Error::KindMismatch("grid", "expsum")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn exponent_addition() {
        let a = ExpSum::exp(1, c(1.0, 0.0), &[c(0.3, 0.1)]);
        let b = ExpSum::exp(1, c(1.0, 0.0), &[c(-0.1, 0.5)]);
        assert_eq!(&a * &b, ExpSum::exp(1, c(1.0, 0.0), &[c(0.2, 0.6)]));
    }

    #[test]
    fn additive_inverse_is_empty() {
        let f = ExpSum::exp(2, c(2.0, 1.0), &[c(0.5, 0.0), c(0.0, 1.0)])
            + ExpSum::coordinate(2, 1);
        assert!((&f + &f.scale(c(-1.0, 0.0))).is_zero());
    }

    #[test]
    fn imaginary_shift_of_exponential() {
        let lam = c(0.7, 0.2);
        let a = 1.3;
        let f = ExpSum::exp(1, c(1.0, 0.0), &[lam]);
        let g = f.shift(0, c(0.0, a));
        let expect = (lam * c(0.0, a)).exp();
        assert!((g.terms()[0].coeff - expect).norm() < 1e-15);
        assert_eq!(f.shift(0, c(0.0, 0.0)), f);
    }

    #[test]
    fn polynomial_shift_is_binomial() {
        let x = ExpSum::coordinate(1, 0);
        let x2 = &x * &x;
        let s = x2.shift(0, c(1.0, 0.0));
        let expect = &(&x2 + &x.scale(c(2.0, 0.0))) + &ExpSum::constant(1, c(1.0, 0.0));
        assert!(s.distance(&expect) < 1e-15);
    }

    #[test]
    fn partial_of_constant_and_eigenfunction() {
        let mu = c(0.0, 2.0);
        let f = ExpSum::exp(2, c(1.0, 0.0), &[c(0.0, 0.0), mu]);
        assert!(f.partial(1).distance(&f.scale(mu)) < 1e-15);
        assert!(ExpSum::constant(2, c(3.0, 0.0)).partial(1).is_zero());
    }

    #[test]
    fn eval_basics() {
        let f = ExpSum::exp(1, c(1.0, 0.0), &[c(1.0, 0.0)]);
        assert!((f.eval(&[c(0.0, 0.0)]) - c(1.0, 0.0)).norm() < 1e-15);
        let w = Window::cube(1, 8);
        let ell = 0.25;
        let g = GridFunction::from_fn(w, vec![ell], vec![Boundary::Periodic], |s| {
            c((s[0] as f64 * ell).exp(), 0.0)
        })
        .unwrap();
        for k in 0..8 {
            let v = g.eval(&[c(k as f64 * ell, 0.0)]).unwrap();
            assert!((v - c((k as f64 * ell).exp(), 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn frequency_rounding_merges_near_duplicates() {
        let a = ExpSum::exp(1, c(1.0, 0.0), &[c(0.1 + 0.2, 0.0)]);
        let b = ExpSum::exp(1, c(1.0, 0.0), &[c(0.3, 0.0)]);
        assert_eq!((&a + &b).terms().len(), 1);
    }

    #[test]
    fn reciprocal_only_for_pure_exponentials() {
        let f = ExpSum::exp(2, c(2.0, 0.0), &[c(0.5, 0.0), c(0.0, -1.0)]);
        let r = f.reciprocal().unwrap();
        assert!((&f * &r).distance(&ExpSum::constant(2, c(1.0, 0.0))) < 1e-15);
        assert!((&f + &ExpSum::constant(2, c(1.0, 0.0))).reciprocal().is_none());
        assert!(ExpSum::coordinate(2, 0).reciprocal().is_none());
    }

    #[test]
    fn periodic_grid_full_period_shift() {
        let w = Window::cube(1, 8);
        let g = GridFunction::from_fn(w, vec![1.0], vec![Boundary::Periodic], |s| c(s[0] as f64, 0.0))
            .unwrap();
        assert_eq!(g.shift(0, c(8.0, 0.0)).unwrap(), g);
        let h = g.shift(0, c(1.0, 0.0)).unwrap();
        assert_eq!(h.at(&[7]).unwrap(), c(0.0, 0.0));
        assert!(g.shift(0, c(0.5, 0.0)).is_err());
    }

    #[test]
    fn open_grid_access_and_shift() {
        let w = Window::new(vec![0], vec![4]).unwrap();
        let g = GridFunction::from_fn(w, vec![1.0], vec![Boundary::Open], |s| c(s[0] as f64, 0.0)).unwrap();
        assert!(matches!(g.at(&[4]), Err(Error::OutOfWindow(_))));
        let h = g.shift_sites(0, 1);
        assert_eq!(h.window().origin, vec![-1]);
        assert_eq!(h.at(&[0]).unwrap(), c(1.0, 0.0));
        let d = Coefficient::Grid(h).sub_aligned(&Coefficient::Grid(g.clone())).unwrap();
        assert_eq!(d.as_grid().unwrap().window().extent, vec![3]);
        assert!(d.as_grid().unwrap().values().iter().all(|v| *v == c(1.0, 0.0)));
    }

    #[test]
    fn mixed_kinds_and_windows_error() {
        let g = GridFunction::constant(Window::cube(2, 3), vec![1.0; 2], vec![Boundary::Periodic; 2], c(1.0, 0.0))
            .unwrap();
        let h = GridFunction::constant(Window::cube(2, 4), vec![1.0; 2], vec![Boundary::Periodic; 2], c(1.0, 0.0))
            .unwrap();
        let e = Coefficient::Exp(ExpSum::constant(2, c(1.0, 0.0)));
        assert!(matches!(Coefficient::Grid(g.clone()).add(&e), Err(Error::KindMismatch(..))));
        assert!(matches!(
            Coefficient::Grid(g).mul(&Coefficient::Grid(h)),
            Err(Error::WindowMismatch(..))
        ));
    }

    #[test]
    fn window_index_roundtrip() {
        let w = Window::new(vec![-2, 3, 0], vec![3, 4, 5]).unwrap();
        for i in 0..w.len() {
            assert_eq!(w.index(&w.site(i)), i);
        }
    }
}
