//! Generalized harmonic maps into matrix groups on 2D calculi.
//!
//! Given `a`, an invertible N x N matrix of functions, the gauge current is
//! `A = a^{-1} da` and the model is `d*A = 0`. On a solution the recursion
//! `J1 = A`, `d chi_k = *^{-1} J_k`, `J_{k+1} = d chi_k + A chi_k` produces
//! conserved currents `d*J_k = 0`. Time is axis 0, space axis 1.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::coeff::{Boundary, Coefficient, ExpSum, GridFunction, Term, Window};
use crate::error::{Error, Result};
use crate::form::{Calculus, Form, Word};
use crate::lattice::{matrix_inverse, LatticeCalculus};
use crate::par;
use crate::random;
use crate::report::{relative, Check, Report};

/// N x N matrix of forms of one grade, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixForm {
    n: usize,
    entries: Vec<Form>,
}

impl MatrixForm {
    pub fn new(n: usize, entries: Vec<Form>) -> Result<MatrixForm> {
        if entries.len() != n * n || n == 0 {
            return Err(Error::DimensionMismatch(n * n, entries.len()));
        }
        let dim = entries[0].dim();
        let grade = entries.iter().find(|e| !e.is_zero()).map(|e| e.grade()).unwrap_or(entries[0].grade());
        for e in &entries {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch(dim, e.dim()));
            }
            if !e.is_zero() && e.grade() != grade {
                return Err(Error::GradeMismatch { expected: grade, got: e.grade() });
            }
        }
        Ok(MatrixForm { n, entries })
    }

    pub fn from_functions(dim: usize, n: usize, fs: Vec<Coefficient>) -> Result<MatrixForm> {
        MatrixForm::new(n, fs.into_iter().map(|f| Form::function(dim, f)).collect())
    }

    pub fn identity(dim: usize, n: usize, like: &Coefficient) -> MatrixForm {
        let entries = (0..n * n)
            .map(|k| {
                let v = if k / n == k % n { 1.0 } else { 0.0 };
                Form::function(dim, like.constant_like(C64::new(v, 0.0)))
            })
            .collect();
        MatrixForm { n, entries }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.entries[0].dim()
    }

    pub fn grade(&self) -> usize {
        self.entries.iter().find(|e| !e.is_zero()).map(|e| e.grade()).unwrap_or(self.entries[0].grade())
    }

    pub fn entry(&self, i: usize, j: usize) -> &Form {
        &self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[Form] {
        &self.entries
    }

    pub fn map(&self, f: impl Fn(&Form) -> Result<Form> + Sync + Send) -> Result<MatrixForm> {
        let entries = par::try_map_range(self.entries.len(), |k| f(&self.entries[k]))?;
        Ok(MatrixForm { n: self.n, entries })
    }

    pub fn add(&self, other: &MatrixForm) -> Result<MatrixForm> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(self.n, other.n));
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a.add(b)).collect::<Result<_>>()?;
        Ok(MatrixForm { n: self.n, entries })
    }

    pub fn sub(&self, other: &MatrixForm) -> Result<MatrixForm> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: C64) -> MatrixForm {
        MatrixForm { n: self.n, entries: self.entries.iter().map(|e| e.scale(c)).collect() }
    }

    /// Max over entries of the entry norm.
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    /// Grade-0 entries as coefficients (zero-like for empty entries).
    pub fn functions(&self) -> Result<Vec<Coefficient>> {
        let like = self
            .entries
            .iter()
            .find_map(|e| e.scalar().cloned())
            .ok_or_else(|| Error::InvalidParameter("matrix has no nonzero function entry".into()))?;
        self.entries
            .iter()
            .map(|e| {
                if e.grade() != 0 && !e.is_zero() {
                    return Err(Error::GradeMismatch { expected: 0, got: e.grade() });
                }
                Ok(e.scalar().cloned().unwrap_or_else(|| like.zero_like()))
            })
            .collect()
    }
}

pub fn mat_mul<C: Calculus>(calc: &C, a: &MatrixForm, b: &MatrixForm) -> Result<MatrixForm> {
    let n = a.n;
    if b.n != n {
        return Err(Error::DimensionMismatch(n, b.n));
    }
    let grade = a.grade() + b.grade();
    let entries = par::try_map_range(n * n, |k| {
        let (i, j) = (k / n, k % n);
        let mut acc = Form::zero(a.dim(), grade);
        for m in 0..n {
            acc = acc.add(&calc.wedge(a.entry(i, m), b.entry(m, j))?)?;
        }
        Ok(acc)
    })?;
    Ok(MatrixForm { n, entries })
}

pub fn mat_d<C: Calculus>(calc: &C, a: &MatrixForm) -> Result<MatrixForm> {
    a.map(|e| calc.d(e))
}

pub fn mat_star<C: Calculus>(calc: &C, a: &MatrixForm) -> Result<MatrixForm> {
    a.map(|e| calc.star(e))
}

pub fn mat_star_inv<C: Calculus>(calc: &C, a: &MatrixForm) -> Result<MatrixForm> {
    a.map(|e| calc.star_inv(e))
}

/// Covariant derivative `D chi = d chi + A chi`.
pub fn covariant<C: Calculus>(calc: &C, a_cur: &MatrixForm, chi: &MatrixForm) -> Result<MatrixForm> {
    mat_d(calc, chi)?.add(&mat_mul(calc, a_cur, chi)?)
}

#[derive(Clone, Debug)]
pub struct GaugeCurrent {
    pub current: MatrixForm,
    /// Largest Frobenius condition number over grid sites; `None` for exact sums.
    pub max_condition: Option<f64>,
}

/// Pointwise inverse of a grade-0 matrix.
pub fn pointwise_inverse(a: &MatrixForm) -> Result<(MatrixForm, Option<f64>)> {
    let n = a.n;
    let dim = a.dim();
    let fs = a.functions()?;
    match &fs[0] {
        Coefficient::Exp(_) => {
            let rows: Vec<Vec<Coefficient>> = (0..n).map(|i| fs[i * n..(i + 1) * n].to_vec()).collect();
            let inv = matrix_inverse(&rows)?;
            Ok((MatrixForm::from_functions(dim, n, inv.into_iter().flatten().collect())?, None))
        }
        Coefficient::Grid(first) => {
            let mut window = first.window().clone();
            let grids: Vec<&GridFunction> = fs
                .iter()
                .map(|f| f.as_grid().ok_or(Error::KindMismatch("grid", "expsum")))
                .collect::<Result<_>>()?;
            for g in &grids {
                window = window
                    .intersect(g.window())
                    .ok_or_else(|| Error::WindowMismatch(window.origin.clone(), g.window().origin.clone()))?;
            }
            let grids: Vec<GridFunction> = grids.iter().map(|g| g.restrict(&window)).collect::<Result<_>>()?;
            let w = window.clone();
            let per_site = par::try_map_range(window.len(), |s| -> Result<(Vec<C64>, f64)> {
                let m = DMatrix::from_fn(n, n, |i, j| grids[i * n + j].values()[s]);
                let inv = m.clone().try_inverse().ok_or_else(|| Error::Singular { site: w.site(s) })?;
                let cond = m.norm() * inv.norm();
                if !cond.is_finite() || cond > 1e14 {
                    return Err(Error::Singular { site: w.site(s) });
                }
                Ok(((0..n * n).map(|k| inv[(k / n, k % n)]).collect(), cond))
            })?;
            let cond = per_site.iter().map(|p| p.1).fold(0.0, f64::max);
            let entries = (0..n * n)
                .map(|k| {
                    let values = per_site.iter().map(|p| p.0[k]).collect();
                    GridFunction::new(window.clone(), first.spacing().to_vec(), first.boundary().to_vec(), values)
                        .map(Coefficient::Grid)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((MatrixForm::from_functions(dim, n, entries)?, Some(cond)))
        }
    }
}

/// `A = a^{-1} da` with the calculus's bimodule product.
pub fn gauge_current<C: Calculus>(calc: &C, a: &MatrixForm) -> Result<GaugeCurrent> {
    if a.grade() != 0 {
        return Err(Error::GradeMismatch { expected: 0, got: a.grade() });
    }
    let (inv, cond) = pointwise_inverse(a)?;
    let current = mat_mul(calc, &inv, &mat_d(calc, a)?)?;
    Ok(GaugeCurrent { current, max_condition: cond })
}

/// `F = dA + A A`.
pub fn curvature<C: Calculus>(calc: &C, a_cur: &MatrixForm) -> Result<MatrixForm> {
    mat_d(calc, a_cur)?.add(&mat_mul(calc, a_cur, a_cur)?)
}

/// `d*A`, entrywise.
pub fn field_residual<C: Calculus>(calc: &C, a_cur: &MatrixForm) -> Result<MatrixForm> {
    mat_d(calc, &mat_star(calc, a_cur)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// N = 1, `a = exp(-u)`.
    Toda,
    /// N = 2, `a = [[1, u], [0, 1]]`, so that `d*A = 0` is the lattice wave equation.
    Linear,
}

/// The group-valued field built from the scalar profile `u`.
pub fn field_matrix(dim: usize, model: Model, u: &Coefficient) -> Result<MatrixForm> {
    match model {
        Model::Toda => {
            let a = match u {
                Coefficient::Grid(g) => Coefficient::Grid(g.map(|v| (-v).exp())),
                Coefficient::Exp(e) => {
                    let (c0, lin) = e.affine_parts().ok_or(Error::NotLinear)?;
                    let freqs: Vec<C64> = lin.iter().map(|l| -l).collect();
                    Coefficient::Exp(ExpSum::exp(e.nvars(), (-c0).exp(), &freqs))
                }
            };
            MatrixForm::from_functions(dim, 1, vec![a])
        }
        Model::Linear => {
            let one = u.constant_like(C64::new(1.0, 0.0));
            MatrixForm::from_functions(dim, 2, vec![one.clone(), u.clone(), u.zero_like(), one])
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tolerance: 1e-12, max_iterations: 50 }
    }
}

#[derive(Clone, Debug)]
pub struct FieldHistory {
    /// `u(t, x)`, open in t and periodic in x.
    pub u: GridFunction,
    pub model: Model,
    /// Max per-site equation residual of each solved slice.
    pub slice_residuals: Vec<f64>,
    /// Max Newton iterations used per slice (0 for the explicit update).
    pub iterations: Vec<usize>,
}

fn slice_coefficients(calc: &LatticeCalculus) -> Result<(f64, f64, f64)> {
    if calc.dim() != 2 || !calc.is_fully_discrete() {
        return Err(Error::InvalidParameter("field solver needs a 2D fully discrete lattice".into()));
    }
    let st = calc.star_basis(0b01);
    let sx = calc.star_basis(0b10);
    match (st.as_slice(), sx.as_slice()) {
        ([(0b10, s_t)], [(0b01, s_x)]) => {
            let (lt, lx) = (calc.spacing(0), calc.spacing(1));
            Ok((lt, lx, (s_x.re * lt) / (s_t.re * lx)))
        }
        _ => Err(Error::InvalidParameter("star must exchange dt and dx".into())),
    }
}

/// Advance `u` slice by slice so that `d*A = 0` holds at every interior site.
///
/// With `A_mu = (exp(u - T_mu u) - 1)/l_mu` the equation at `(t, x)` reads
/// `A_t(t, x) = A_t(t-1, x) + rho (A_x(t, x) - A_x(t, x-1))` and is solved for
/// `u(t+1, x)` by Newton's method; the linear model's update is explicit.
pub fn solve_field_equation(
    calc: &LatticeCalculus,
    model: Model,
    u0: &[C64],
    u1: &[C64],
    steps: usize,
    opts: NewtonOptions,
) -> Result<FieldHistory> {
    let (lt, lx, rho) = slice_coefficients(calc)?;
    let m = u0.len();
    if m == 0 || u1.len() != m {
        return Err(Error::DimensionMismatch(m, u1.len()));
    }
    let rows = steps + 2;
    let mut u: Vec<Vec<C64>> = Vec::with_capacity(rows);
    u.push(u0.to_vec());
    u.push(u1.to_vec());
    let mut residuals = Vec::with_capacity(steps);
    let mut iterations = Vec::with_capacity(steps);
    let wrap = |x: usize, k: i64| ((x as i64 + k).rem_euclid(m as i64)) as usize;
    for t in 1..=steps {
        let (prev, cur) = (&u[t - 1], &u[t]);
        let solved = par::try_map_range(m, |x| -> Result<(C64, f64, usize)> {
            let xm = wrap(x, -1);
            let xp = wrap(x, 1);
            match model {
                Model::Toda => {
                    let a_x = |y: usize, yp: usize| ((cur[y] - cur[yp]).exp() - 1.0) / lx;
                    let a_t_prev = ((prev[x] - cur[x]).exp() - 1.0) / lt;
                    let target = a_t_prev + rho * (a_x(x, xp) - a_x(xm, x));
                    let big_r = 1.0 + lt * target;
                    let mut v = cur[x] * 2.0 - prev[x];
                    let scale = big_r.norm().max(1.0);
                    for it in 0..=opts.max_iterations {
                        let e = (cur[x] - v).exp();
                        let f = e - big_r;
                        if f.norm() <= opts.tolerance * scale {
                            return Ok((v, f.norm() / lt, it));
                        }
                        if it == opts.max_iterations || !f.norm().is_finite() {
                            return Err(Error::NewtonDiverged { site: vec![t as i64 + 1, x as i64], residual: f.norm() });
                        }
                        v += 1.0 - big_r / e;
                    }
                    unreachable!()
                }
                Model::Linear => {
                    let a_x = |y: usize, yp: usize| (cur[yp] - cur[y]) / lx;
                    let a_t_prev = (cur[x] - prev[x]) / lt;
                    let target = a_t_prev + rho * (a_x(x, xp) - a_x(xm, x));
                    let v = cur[x] + lt * target;
                    let res = ((v - cur[x]) / lt - target).norm();
                    Ok((v, res, 0))
                }
            }
        })?;
        residuals.push(solved.iter().map(|s| s.1).fold(0.0, f64::max));
        iterations.push(solved.iter().map(|s| s.2).max().unwrap_or(0));
        let next: Vec<C64> = solved.into_iter().map(|s| s.0).collect();
        if next.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite(format!("slice {}", t + 1)));
        }
        u.push(next);
    }
    let values = u.into_iter().flatten().collect();
    let grid = GridFunction::new(
        Window::new(vec![0, 0], vec![rows, m])?,
        vec![lt, lx],
        vec![Boundary::Open, Boundary::Periodic],
        values,
    )?;
    Ok(FieldHistory { u: grid, model, slice_residuals: residuals, iterations })
}

/// Potential of a closed 1-form: `d chi = w`, `chi(base) = 0`.
///
/// Grids are integrated along paths from the window origin, first along axis 0
/// then along the later axes; exponential sums are solved per frequency group.
pub fn integrate_closed<C: Calculus>(calc: &C, w: &Form) -> Result<Coefficient> {
    if w.grade() != 1 && !w.is_zero() {
        return Err(Error::GradeMismatch { expected: 1, got: w.grade() });
    }
    match w.components().values().next() {
        None => Err(Error::InvalidParameter("cannot choose a representation for the zero form".into())),
        Some(Coefficient::Grid(_)) => integrate_grid(calc, w),
        Some(Coefficient::Exp(_)) => integrate_expsum(calc, w),
    }
}

fn integrate_grid<C: Calculus>(calc: &C, w: &Form) -> Result<Coefficient> {
    let n = calc.dim();
    let grids: BTreeMap<usize, GridFunction> = w
        .components()
        .iter()
        .map(|(word, c)| {
            let g = c.as_grid().cloned().ok_or(Error::KindMismatch("grid", "expsum"))?;
            Ok((word.trailing_zeros() as usize, g))
        })
        .collect::<Result<_>>()?;
    let first = grids.values().next().unwrap().clone();
    let mut window = first.window().clone();
    for g in grids.values() {
        let cw = first.common_window(g)?;
        window = window.intersect(&cw).ok_or(Error::WindowMismatch(window.origin.clone(), cw.origin.clone()))?;
    }
    let spacing = first.spacing().to_vec();
    let boundary = first.boundary().to_vec();
    let comp = |mu: usize| -> Result<Option<GridFunction>> {
        grids.get(&mu).map(|g| g.restrict(&window)).transpose()
    };
    let comps: Vec<Option<GridFunction>> = (0..n).map(comp).collect::<Result<_>>()?;

    let lmin = spacing.iter().cloned().fold(f64::INFINITY, f64::min);
    let wn = comps.iter().flatten().map(|g| g.norm()).fold(0.0, f64::max);
    let scale = wn * 2.0 / lmin;
    let dw = calc.d(w)?.norm();
    if dw > 1e-9 * scale {
        return Err(Error::NotClosed { residual: dw, tolerance: 1e-9 * scale });
    }
    for mu in 0..n {
        if boundary[mu] != Boundary::Periodic {
            continue;
        }
        let Some(g) = &comps[mu] else { continue };
        let mut periods: BTreeMap<Vec<i64>, (C64, f64)> = BTreeMap::new();
        for (i, v) in g.values().iter().enumerate() {
            let mut key = window.site(i);
            key[mu] = 0;
            let e = periods.entry(key).or_insert((C64::new(0.0, 0.0), 0.0));
            e.0 += v * spacing[mu];
            e.1 += v.norm() * spacing[mu];
        }
        let mass = periods.values().map(|p| p.1).fold(0.0, f64::max);
        let max_period = periods.values().map(|p| p.0.norm()).fold(0.0, f64::max);
        if max_period > 1e-9 * mass.max(1e-300) && max_period > 0.0 {
            return Err(Error::PeriodObstruction {
                axis: mu,
                max_period,
                periods: periods.values().map(|p| p.0.norm()).collect(),
            });
        }
    }
    let len = window.len();
    let mut chi = vec![C64::new(0.0, 0.0); len];
    for i in 1..len {
        let s = window.site(i);
        let mu = (0..n).rev().find(|&k| s[k] != window.origin[k]).unwrap();
        let mut prev = s.clone();
        prev[mu] -= 1;
        let step = match &comps[mu] {
            Some(g) => g.at(&prev)? * spacing[mu],
            None => C64::new(0.0, 0.0),
        };
        chi[i] = chi[window.index(&prev)] + step;
    }
    Ok(Coefficient::Grid(GridFunction::new(window, spacing, boundary, chi)?))
}

fn integrate_expsum<C: Calculus>(calc: &C, w: &Form) -> Result<Coefficient> {
    let n = calc.dim();
    let comps: BTreeMap<usize, ExpSum> = w
        .components()
        .iter()
        .map(|(word, c)| Ok((word.trailing_zeros() as usize, c.as_exp()?.clone())))
        .collect::<Result<_>>()?;
    let nvars = comps.values().next().unwrap().nvars();
    let wn: f64 = comps.values().map(|e| e.norm()).fold(0.0, f64::max);
    // frequency groups, keyed by the term list of a unit exponential
    let mut groups: Vec<(Vec<C64>, Vec<u32>)> = Vec::new();
    for e in comps.values() {
        for t in e.terms() {
            let probe = ExpSum::exp(nvars, C64::new(1.0, 0.0), &t.freqs);
            match groups.iter_mut().find(|g| ExpSum::exp(nvars, C64::new(1.0, 0.0), &g.0) == probe) {
                Some(g) => {
                    for k in 0..nvars {
                        g.1[k] = g.1[k].max(t.powers[k]);
                    }
                }
                None => groups.push((t.freqs.clone(), t.powers.clone())),
            }
        }
    }
    let mut chi = ExpSum::zero(nvars);
    let mut worst = 0.0f64;
    for (freqs, maxp) in groups {
        let same = |t: &Term| ExpSum::exp(nvars, C64::new(1.0, 0.0), &t.freqs) == ExpSum::exp(nvars, C64::new(1.0, 0.0), &freqs);
        let bound: Vec<u32> = maxp.iter().map(|p| p + 1).collect();
        let monos: Vec<Vec<u32>> = {
            let mut out = vec![Vec::new()];
            for k in 0..nvars {
                out = out
                    .into_iter()
                    .flat_map(|p| (0..=bound[k]).map(move |e| {
                        let mut q = p.clone();
                        q.push(e);
                        q
                    }))
                    .collect();
            }
            out
        };
        let row_of = |mu: usize, p: &[u32]| -> Option<usize> {
            monos.iter().position(|q| q == p).map(|k| mu * monos.len() + k)
        };
        let rows = n * monos.len();
        let mut mat = DMatrix::<C64>::zeros(rows, monos.len());
        for (col, p) in monos.iter().enumerate() {
            let f = ExpSum::monomial(nvars, C64::new(1.0, 0.0), p, &freqs);
            let df = calc.d_function(&Coefficient::Exp(f))?;
            for (word, c) in df.components() {
                let mu = word.trailing_zeros() as usize;
                for t in c.as_exp()?.terms() {
                    if !same(t) {
                        continue;
                    }
                    let r = row_of(mu, &t.powers).ok_or_else(|| Error::InvalidParameter("derivative raised the degree".into()))?;
                    mat[(r, col)] += t.coeff;
                }
            }
        }
        let mut rhs = DVector::<C64>::zeros(rows);
        for (mu, e) in &comps {
            for t in e.terms().iter().filter(|t| same(t)) {
                rhs[row_of(*mu, &t.powers).unwrap()] += t.coeff;
            }
        }
        let svd = mat.clone().svd(true, true);
        let sol = svd
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::InvalidParameter(format!("least squares failed: {e}")))?;
        worst = worst.max((&mat * &sol - &rhs).norm());
        for (k, p) in monos.iter().enumerate() {
            if sol[k].norm() > 0.0 {
                chi = &chi + &ExpSum::monomial(nvars, sol[k], p, &freqs);
            }
        }
    }
    let tol = 1e-9 * wn.max(1e-300);
    if worst > tol {
        return Err(Error::NotClosed { residual: worst, tolerance: tol });
    }
    let base = chi.eval(&vec![C64::new(0.0, 0.0); nvars]);
    let chi = &chi - &ExpSum::constant(nvars, base);
    Ok(Coefficient::Exp(chi))
}

/// Conserved charges `Q(t) = l_x sum_x (*J)_x(t, x)` of a current on a grid
/// that is periodic in x.
#[derive(Clone, Debug, Serialize)]
pub struct ChargeSeries {
    pub times: Vec<f64>,
    /// Per time, the N x N charge matrix, row-major.
    pub values: Vec<Vec<C64>>,
    /// `max_t |Q(t) - Q(t0)|` over entries.
    pub drift: f64,
    /// `max_t l_x sum_x |(*J)_x|`, the scale of the charge density.
    pub mass: f64,
    pub relative_drift: f64,
}

const DX_WORD: Word = 0b10;

pub fn charges(calc: &LatticeCalculus, j: &MatrixForm) -> Result<ChargeSeries> {
    if calc.dim() != 2 {
        return Err(Error::InvalidParameter("charges need a 2D calculus".into()));
    }
    let sj = mat_star(calc, j)?;
    let n = j.size();
    let mut densities: Vec<Option<GridFunction>> = Vec::with_capacity(n * n);
    for e in sj.entries() {
        densities.push(match e.component(DX_WORD) {
            Some(c) => Some(c.as_grid().cloned().ok_or(Error::KindMismatch("grid", "expsum"))?),
            None => None,
        });
    }
    let Some(first) = densities.iter().flatten().next().cloned() else {
        return Ok(ChargeSeries { times: Vec::new(), values: Vec::new(), drift: 0.0, mass: 0.0, relative_drift: 0.0 });
    };
    if first.boundary()[1] != Boundary::Periodic {
        return Err(Error::InvalidParameter("charge needs a periodic spatial axis".into()));
    }
    let mut window = first.window().clone();
    for g in densities.iter().flatten() {
        window = window.intersect(g.window()).ok_or(Error::WindowMismatch(window.origin.clone(), g.window().origin.clone()))?;
    }
    let lx = first.spacing()[1];
    let lt = first.spacing()[0];
    let (nt, nx) = (window.extent[0], window.extent[1]);
    let mut times = Vec::with_capacity(nt);
    let mut values = Vec::with_capacity(nt);
    let mut mass = 0.0f64;
    for r in 0..nt {
        let t = window.origin[0] + r as i64;
        times.push(t as f64 * lt);
        let mut row = Vec::with_capacity(n * n);
        for d in &densities {
            let mut q = C64::new(0.0, 0.0);
            let mut m = 0.0;
            if let Some(g) = d {
                for x in 0..nx {
                    let v = g.at(&[t, window.origin[1] + x as i64])?;
                    q += v * lx;
                    m += v.norm() * lx;
                }
            }
            mass = mass.max(m);
            row.push(q);
        }
        values.push(row);
    }
    let drift = values
        .iter()
        .map(|row: &Vec<C64>| row.iter().zip(&values[0]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    Ok(ChargeSeries { times, values, drift, mass, relative_drift: relative(drift, mass) })
}

#[derive(Clone, Debug, Serialize)]
pub struct TowerLevel {
    pub level: usize,
    /// `||d*J_k||`.
    pub residual: f64,
    /// `||J_k|| / l_min`.
    pub scale: f64,
    pub relative_residual: f64,
    pub charges: ChargeSeries,
    /// Period values of `*^{-1} J_k` when `chi_k` could not be built.
    pub obstruction: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TowerReport {
    pub depth: usize,
    pub levels: Vec<TowerLevel>,
    /// First level whose potential is obstructed by nonzero periods.
    pub obstructed_at: Option<usize>,
    /// Measured `**` constant on basis 1-forms.
    pub epsilon_1: Option<C64>,
    /// `||d*A||` of the input field.
    pub field_residual: f64,
    pub field_relative_residual: f64,
    /// `||d*D chi - D*d chi||` on a random matrix of functions, relative.
    pub identity_residual: f64,
    /// Pairwise correlations of the final-time charge densities across levels.
    pub density_correlations: Vec<Vec<f64>>,
}

fn lmin(calc: &LatticeCalculus) -> f64 {
    (0..calc.dim()).map(|k| calc.spacing(k)).fold(f64::INFINITY, f64::min)
}

fn final_density(calc: &LatticeCalculus, j: &MatrixForm) -> Result<Vec<f64>> {
    let sj = mat_star(calc, j)?;
    let mut out = Vec::new();
    for e in sj.entries() {
        if let Some(Coefficient::Grid(g)) = e.component(DX_WORD) {
            let w = g.window();
            let t = w.origin[0] + w.extent[0] as i64 - 1;
            for x in 0..w.extent[1] {
                out.push(g.at(&[t, w.origin[1] + x as i64])?.re);
            }
        }
    }
    Ok(out)
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for k in 0..n {
        sab += (a[k] - ma) * (b[k] - mb);
        saa += (a[k] - ma) * (a[k] - ma);
        sbb += (b[k] - mb) * (b[k] - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// `||d*D chi - D*d chi||` relative to `||d chi|| (||A|| + 1) / l_min`, for a
/// random matrix `chi` on the window of `a`.
pub fn identity_check(calc: &LatticeCalculus, a: &MatrixForm, a_cur: &MatrixForm, seed: u64) -> Result<f64> {
    let fs = a.functions()?;
    let g = fs[0].as_grid().ok_or(Error::KindMismatch("grid", "expsum"))?;
    let mut rng = random::case_rng(seed, 0);
    let n = a.size();
    let chi = MatrixForm::from_functions(
        2,
        n,
        (0..n * n)
            .map(|_| Coefficient::Grid(random::grid(&mut rng, g.window(), g.spacing(), g.boundary())))
            .collect(),
    )?;
    let dchi = mat_d(calc, &chi)?;
    let lhs = mat_d(calc, &mat_star(calc, &covariant(calc, a_cur, &chi)?)?)?;
    let rhs = covariant(calc, a_cur, &mat_star(calc, &dchi)?)?;
    let diff = lhs
        .entries()
        .iter()
        .zip(rhs.entries())
        .map(|(x, y)| x.distance(y))
        .fold(0.0, f64::max);
    Ok(relative(diff, dchi.norm() * (a_cur.norm() + 1.0) / lmin(calc)))
}

/// Build the currents `J_1 .. J_K` of a solution `a` and measure their conservation.
pub fn conserved_tower(calc: &LatticeCalculus, a: &MatrixForm, depth: usize, seed: u64) -> Result<TowerReport> {
    let a_cur = gauge_current(calc, a)?.current;
    let fres = field_residual(calc, &a_cur)?.norm();
    let lm = lmin(calc);
    let field_scale = a_cur.norm() / lm;
    let identity_residual = identity_check(calc, a, &a_cur, seed)?;
    let mut levels = Vec::with_capacity(depth);
    let mut densities = Vec::new();
    let mut obstructed_at = None;
    let mut j = a_cur.clone();
    for k in 1..=depth {
        let res = field_residual(calc, &j)?.norm();
        let scale = j.norm() / lm;
        let series = charges(calc, &j)?;
        densities.push(final_density(calc, &j)?);
        let mut level = TowerLevel {
            level: k,
            residual: res,
            scale,
            relative_residual: relative(res, scale),
            charges: series,
            obstruction: None,
        };
        if k < depth {
            let sj = mat_star_inv(calc, &j)?;
            let chi = sj.map(|e| {
                if e.is_zero() {
                    let like = a.functions()?[0].zero_like();
                    return Ok(Form::function(2, like));
                }
                integrate_closed(calc, e).map(|c| Form::function(2, c))
            });
            match chi {
                Ok(chi) => j = covariant(calc, &a_cur, &chi)?,
                Err(Error::PeriodObstruction { periods, .. }) => {
                    level.obstruction = Some(periods);
                    obstructed_at = Some(k);
                    levels.push(level);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        levels.push(level);
    }
    let density_correlations =
        densities.iter().map(|a| densities.iter().map(|b| correlation(a, b)).collect()).collect();
    Ok(TowerReport {
        depth,
        levels,
        obstructed_at,
        epsilon_1: calc.epsilon(1),
        field_residual: fres,
        field_relative_residual: relative(fres, field_scale),
        identity_residual,
        density_correlations,
    })
}

/// `||F(a^{-1} da)||` relative to `||A||^2` for random invertible 2 x 2 grid
/// matrices on a periodic `sites x sites` window (diagonal shifted by 3).
pub fn flatness_suite(calc: &LatticeCalculus, samples: usize, sites: usize, seed: u64, tol: f64) -> Result<Report> {
    if calc.dim() != 2 {
        return Err(Error::InvalidParameter("flatness batch needs a 2D calculus".into()));
    }
    let window = Window::new(vec![0, 0], vec![sites, sites])?;
    let spacing = [calc.spacing(0), calc.spacing(1)];
    let bnd = [Boundary::Periodic; 2];
    let rows = par::try_map_range(samples, |i| {
        let mut rng = random::case_rng(seed, i as u64);
        let entries = (0..4)
            .map(|k| {
                let g = random::grid(&mut rng, &window, &spacing, &bnd);
                Coefficient::Grid(if k == 0 || k == 3 { g.map(|v| v + 3.0) } else { g })
            })
            .collect();
        let a = MatrixForm::from_functions(2, 2, entries)?;
        let cur = gauge_current(calc, &a)?;
        let f = curvature(calc, &cur.current)?;
        Ok::<_, Error>((relative(f.norm(), cur.current.norm().powi(2)), cur.max_condition.unwrap_or(1.0)))
    })?;
    let worst = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let cond = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut rep = Report::new("flatness");
    rep.push(Check::bound("flatness", "dA + AA = 0 for A = a^-1 da, relative to |A|^2", worst, tol, samples));
    rep.push(Check::bound("conditioning", "random matrices stay well conditioned", cond, 1e6, samples));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::CalculusSpec;

    fn calc() -> LatticeCalculus {
        LatticeCalculus::new(CalculusSpec::minkowski(&[1.0, 1.0])).unwrap()
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn identity_has_zero_current() {
        let cal = calc();
        let like = Coefficient::Exp(ExpSum::constant(2, c(1.0)));
        let a = MatrixForm::identity(2, 2, &like);
        let cur = gauge_current(&cal, &a).unwrap().current;
        assert!(cur.norm() == 0.0);
        assert!(curvature(&cal, &cur).unwrap().norm() == 0.0);
        assert!(field_residual(&cal, &cur).unwrap().norm() == 0.0);
    }

    #[test]
    fn vacuum_history_is_zero() {
        let cal = calc();
        let z = vec![c(0.0); 8];
        let h = solve_field_equation(&cal, Model::Toda, &z, &z, 6, NewtonOptions::default()).unwrap();
        assert!(h.u.norm() == 0.0);
    }

    #[test]
    fn integrate_exact_coordinate_form() {
        let cal = calc();
        let x = Coefficient::Exp(ExpSum::coordinate(2, 1));
        let w = cal.d_function(&x).unwrap();
        let chi = integrate_closed(&cal, &w).unwrap();
        assert!(chi.distance(&x) < 1e-12);
    }

    #[test]
    fn winding_form_is_obstructed() {
        let cal = calc();
        let g = GridFunction::constant(
            Window::new(vec![0, 0], vec![4, 8]).unwrap(),
            vec![1.0, 1.0],
            vec![Boundary::Open, Boundary::Periodic],
            c(1.0),
        )
        .unwrap();
        let w = Form::basis(2, 0b10, Coefficient::Grid(g));
        match integrate_closed(&cal, &w) {
            Err(Error::PeriodObstruction { axis, max_period, .. }) => {
                assert_eq!(axis, 1);
                assert!((max_period - 8.0).abs() < 1e-12);
            }
            other => panic!("expected obstruction, got {other:?}"),
        }
    }

    #[test]
    fn singular_matrix_reported_with_site() {
        let cal = calc();
        let w = Window::new(vec![0, 0], vec![3, 3]).unwrap();
        let g = GridFunction::from_fn(w, vec![1.0, 1.0], vec![Boundary::Periodic; 2], |s| {
            if s == [1, 2] { c(0.0) } else { c(1.0) }
        })
        .unwrap();
        let a = MatrixForm::from_functions(2, 1, vec![Coefficient::Grid(g)]).unwrap();
        match gauge_current(&cal, &a) {
            Err(Error::Singular { site }) => assert_eq!(site, vec![1, 2]),
            other => panic!("expected singular, got {other:?}"),
        }
    }
}
