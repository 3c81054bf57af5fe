//! The n-dimensional deformed lattice calculus and its metric geometry.
//!
//! Coordinates are the rescaled ones, `x' = l x`, with `[dx'^mu, x'^nu] =
//! l^mu delta^{mu nu} dx'^nu`. Axes may also be continuous, giving the mixed
//! calculus used for the Toda example (ordinary derivative in t, lattice in x).

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::coeff::{Boundary, Coefficient, ExpSum, Window};
use crate::error::{Error, Result};
use crate::form::{basis_words, binomial, grade_of, indices, word_product, Calculus, Form, Word};
use crate::random::{self, CaseRng, ExpSumShape};
use crate::report::{relative, Check, Report};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisKind {
    Discrete,
    Continuous,
}

/// Which differentials the basis Hodge formula is applied to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HodgeBasis {
    /// Unit-lattice differentials `dx = dx'/l`; primed components pick up spacing factors.
    #[default]
    Lattice,
    /// The formula is applied to `dx'` directly.
    Physical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalculusSpec {
    pub spacings: Vec<f64>,
    /// Diagonal of eta; defaults to (1, -1, ..., -1).
    #[serde(default)]
    pub signature: Vec<i8>,
    /// Per-axis kind; defaults to all discrete.
    #[serde(default)]
    pub kinds: Vec<AxisKind>,
    /// Overall sign of the Hodge operator per grade 0..=n; defaults to all +1.
    #[serde(default)]
    pub star_signs: Vec<f64>,
    #[serde(default)]
    pub hodge_basis: HodgeBasis,
}

impl CalculusSpec {
    /// Discrete Minkowski lattice with eta = diag(1, -1, ..., -1).
    pub fn minkowski(spacings: &[f64]) -> CalculusSpec {
        CalculusSpec {
            spacings: spacings.to_vec(),
            signature: Vec::new(),
            kinds: Vec::new(),
            star_signs: Vec::new(),
            hodge_basis: HodgeBasis::Lattice,
        }
    }

    /// Continuous t, lattice x with spacing `ell`, and `*dt = -dx`, `*dx = -dt`.
    pub fn semi_discrete_toda(ell: f64) -> CalculusSpec {
        CalculusSpec {
            spacings: vec![1.0, ell],
            signature: vec![1, -1],
            kinds: vec![AxisKind::Continuous, AxisKind::Discrete],
            star_signs: vec![1.0, -1.0, 1.0],
            hodge_basis: HodgeBasis::Physical,
        }
    }

    pub fn dim(&self) -> usize {
        self.spacings.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeCalculus {
    spec: CalculusSpec,
    /// `*` on every basis word, precomputed.
    star_table: BTreeMap<Word, (Word, f64)>,
}

/// Sign of the permutation that sorts the concatenation `I K`.
fn concat_sign(i: Word, k: Word) -> f64 {
    word_product(i, k).map(|(s, _)| s).unwrap_or(0.0)
}

impl LatticeCalculus {
    pub fn new(mut spec: CalculusSpec) -> Result<LatticeCalculus> {
        let n = spec.dim();
        if n == 0 || n > 16 {
            return Err(Error::InvalidParameter(format!("dimension {n} out of range 1..=16")));
        }
        if spec.spacings.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParameter("spacings must be positive and finite".into()));
        }
        if spec.signature.is_empty() {
            spec.signature = (0..n).map(|k| if k == 0 { 1 } else { -1 }).collect();
        }
        if spec.kinds.is_empty() {
            spec.kinds = vec![AxisKind::Discrete; n];
        }
        if spec.star_signs.is_empty() {
            spec.star_signs = vec![1.0; n + 1];
        }
        if spec.signature.len() != n || spec.kinds.len() != n || spec.star_signs.len() != n + 1 {
            return Err(Error::InvalidParameter("signature/kinds/star_signs lengths do not match n".into()));
        }
        if spec.signature.iter().any(|&e| e != 1 && e != -1) {
            return Err(Error::InvalidParameter("signature entries must be +1 or -1".into()));
        }
        if spec.star_signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::InvalidParameter("star signs must be +1 or -1".into()));
        }
        let full: Word = (1 << n) - 1;
        let mut star_table = BTreeMap::new();
        for w in 0..=full {
            let k = full & !w;
            let eta: f64 = indices(w).iter().map(|&m| spec.signature[m] as f64).product();
            let mut c = eta * concat_sign(w, k) * spec.star_signs[grade_of(w)];
            if spec.hodge_basis == HodgeBasis::Lattice {
                let l = |word: Word| -> f64 { indices(word).iter().map(|&m| spec.axis_scale(m)).product() };
                c *= l(w) / l(k);
            }
            star_table.insert(w, (k, c));
        }
        Ok(LatticeCalculus { spec, star_table })
    }

    pub fn spec(&self) -> &CalculusSpec {
        &self.spec
    }

    pub fn spacing(&self, mu: usize) -> f64 {
        self.spec.spacings[mu]
    }

    pub fn is_fully_discrete(&self) -> bool {
        self.spec.kinds.iter().all(|k| *k == AxisKind::Discrete)
    }

    /// Unit-spacing differential of axis `mu`, `dx^mu = dx'^mu / l^mu`.
    pub fn unit_differential(&self, mu: usize, like: &Coefficient) -> Form {
        Form::basis(self.dim(), 1 << mu, like.constant_like(C64::new(1.0 / self.spec.axis_scale(mu), 0.0)))
    }
}

impl CalculusSpec {
    fn axis_scale(&self, mu: usize) -> f64 {
        match self.kinds.get(mu) {
            Some(AxisKind::Continuous) => 1.0,
            _ => self.spacings[mu],
        }
    }
}

impl Calculus for LatticeCalculus {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn move_left(&self, mu: usize, f: &Coefficient) -> Result<Vec<(usize, Coefficient)>> {
        Ok(vec![(
            mu,
            match self.spec.kinds[mu] {
                AxisKind::Discrete => f.shift(mu, C64::new(self.spec.spacings[mu], 0.0))?,
                AxisKind::Continuous => f.clone(),
            },
        )])
    }

    fn move_right(&self, mu: usize, f: &Coefficient) -> Result<Vec<(usize, Coefficient)>> {
        Ok(vec![(
            mu,
            match self.spec.kinds[mu] {
                AxisKind::Discrete => f.shift(mu, C64::new(-self.spec.spacings[mu], 0.0))?,
                AxisKind::Continuous => f.clone(),
            },
        )])
    }

    fn partials(&self, f: &Coefficient) -> Result<Vec<(usize, Coefficient)>> {
        (0..self.dim())
            .map(|mu| {
                let p = match self.spec.kinds[mu] {
                    AxisKind::Discrete => {
                        let l = self.spec.spacings[mu];
                        f.shift(mu, C64::new(l, 0.0))?.sub_aligned(f)?.scale(C64::new(1.0 / l, 0.0))
                    }
                    AxisKind::Continuous => f.partial(mu)?,
                };
                Ok((mu, p))
            })
            .collect()
    }

    fn star_basis(&self, w: Word) -> Vec<(Word, C64)> {
        let (k, c) = self.star_table[&w];
        vec![(k, C64::new(c, 0.0))]
    }
}

/// Metric components in a coordinate system `y`.
#[derive(Clone, Debug)]
pub struct MetricTensor {
    /// `g^{mu nu} = (dy^mu, dy^nu)`.
    pub upper: Vec<Vec<Coefficient>>,
    /// `g_{mu nu}`, when the determinant is invertible in the coefficient class.
    pub lower: Option<Vec<Vec<Coefficient>>>,
    pub basis: String,
    /// Generalized Jacobian `J[mu][nu] = d_nu y^mu`.
    pub jacobian: Vec<Vec<Coefficient>>,
    /// Max distance between `(dy, dy)` and the chain-rule expression.
    pub chain_rule_residual: f64,
    /// Max |g^{mu k} g_{k nu} - delta| when `lower` exists.
    pub inverse_residual: Option<f64>,
}

fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, sign: f64, out: &mut Vec<(Vec<usize>, f64)>) {
        let n = used.len();
        if prefix.len() == n {
            out.push((prefix.clone(), sign));
            return;
        }
        for k in 0..n {
            if !used[k] {
                // inversions contributed by placing k after the prefix
                let inv = prefix.iter().filter(|&&p| p > k).count();
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, if inv % 2 == 1 { -sign } else { sign }, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], 1.0, &mut out);
    out
}

/// Determinant of a square matrix of coefficients by the Leibniz formula.
pub fn determinant(m: &[Vec<Coefficient>]) -> Result<Coefficient> {
    let n = m.len();
    let mut acc: Option<Coefficient> = None;
    for (perm, sign) in permutations(n) {
        let mut term = m[0][perm[0]].clone();
        for i in 1..n {
            term = term.mul_aligned(&m[i][perm[i]])?;
        }
        let term = term.scale(C64::new(sign, 0.0));
        acc = Some(match acc {
            None => term,
            Some(a) => a.add_aligned(&term)?,
        });
    }
    acc.ok_or_else(|| Error::InvalidParameter("empty matrix".into()))
}

fn minor(m: &[Vec<Coefficient>], r: usize, c: usize) -> Vec<Vec<Coefficient>> {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != r)
        .map(|(_, row)| row.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, x)| x.clone()).collect())
        .collect()
}

fn reciprocal(c: &Coefficient) -> Result<Coefficient> {
    match c {
        Coefficient::Exp(e) => e.reciprocal().map(Coefficient::Exp).ok_or(Error::NoReciprocal),
        Coefficient::Grid(g) => {
            for (i, v) in g.values().iter().enumerate() {
                if v.norm() == 0.0 {
                    return Err(Error::Singular { site: g.window().site(i) });
                }
            }
            Ok(Coefficient::Grid(g.map(|v| C64::new(1.0, 0.0) / v)))
        }
    }
}

/// Inverse by cofactors over the determinant; needs an invertible determinant.
pub fn matrix_inverse(m: &[Vec<Coefficient>]) -> Result<Vec<Vec<Coefficient>>> {
    let n = m.len();
    let inv_det = reciprocal(&determinant(m)?)?;
    if n == 1 {
        return Ok(vec![vec![inv_det]]);
    }
    let mut out = vec![Vec::with_capacity(n); n];
    for (i, row) in out.iter_mut().enumerate() {
        for j in 0..n {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            let cof = determinant(&minor(m, j, i))?;
            row.push(cof.mul_aligned(&inv_det)?.scale(C64::new(sign, 0.0)));
        }
    }
    Ok(out)
}

fn ensure_nonsingular(det: &Coefficient) -> Result<()> {
    match det {
        Coefficient::Exp(e) => {
            let nv = e.nvars();
            let probes = [vec![C64::new(0.0, 0.0); nv], vec![C64::new(0.37, 0.0); nv], vec![C64::new(-1.13, 0.0); nv]];
            if e.is_zero() || probes.iter().all(|p| e.eval(p).norm() < 1e-12) {
                return Err(Error::Singular { site: Vec::new() });
            }
        }
        Coefficient::Grid(g) => {
            let scale = g.norm().max(1e-300);
            for (i, v) in g.values().iter().enumerate() {
                if v.norm() <= 1e-12 * scale {
                    return Err(Error::Singular { site: g.window().site(i) });
                }
            }
        }
    }
    Ok(())
}

/// `g^{mu nu} = (dy^mu, dy^nu)` together with the chain-rule cross-check.
pub fn metric_components<C: Calculus>(calc: &C, coords: &[Coefficient]) -> Result<MetricTensor> {
    let n = calc.dim();
    if coords.len() != n {
        return Err(Error::DimensionMismatch(n, coords.len()));
    }
    let dys = coords.iter().map(|y| calc.d_function(y)).collect::<Result<Vec<_>>>()?;
    let zero = coords[0].zero_like();
    let jacobian: Vec<Vec<Coefficient>> = dys
        .iter()
        .map(|dy| (0..n).map(|nu| dy.component(1 << nu).cloned().unwrap_or_else(|| zero.clone())).collect())
        .collect();
    ensure_nonsingular(&determinant(&jacobian)?)?;

    let mut upper = vec![Vec::with_capacity(n); n];
    for mu in 0..n {
        for nu in 0..n {
            upper[mu].push(calc.scalar_product(&dys[mu], &dys[nu])?);
        }
    }
    // components of the coordinate differentials dx'
    let one = coords[0].constant_like(C64::new(1.0, 0.0));
    let dx: Vec<Form> = (0..n).map(|k| Form::basis(n, 1 << k, one.clone())).collect();
    let mut g0 = vec![Vec::with_capacity(n); n];
    for k in 0..n {
        for l in 0..n {
            g0[k].push(calc.scalar_product(&dx[k], &dx[l])?);
        }
    }
    let mut chain = 0.0f64;
    for mu in 0..n {
        for nu in 0..n {
            let mut acc = zero.clone();
            for k in 0..n {
                for l in 0..n {
                    let t = jacobian[mu][k].mul_aligned(&jacobian[nu][l])?.mul_aligned(&g0[k][l])?;
                    acc = acc.add_aligned(&t)?;
                }
            }
            chain = chain.max(acc.distance(&upper[mu][nu]));
        }
    }
    let lower = matrix_inverse(&upper).ok();
    let inverse_residual = match &lower {
        Some(low) => {
            let mut r = 0.0f64;
            for mu in 0..n {
                for nu in 0..n {
                    let mut acc = zero.clone();
                    for k in 0..n {
                        acc = acc.add_aligned(&upper[mu][k].mul_aligned(&low[k][nu])?)?;
                    }
                    let delta = zero.constant_like(C64::new(if mu == nu { 1.0 } else { 0.0 }, 0.0));
                    r = r.max(acc.distance(&delta));
                }
            }
            Some(r)
        }
        None => None,
    };
    Ok(MetricTensor {
        upper,
        lower,
        basis: "y".into(),
        jacobian,
        chain_rule_residual: chain,
        inverse_residual,
    })
}

/// Quantum-plane coordinate `y^mu = q^{x'^mu / l^mu}` as an exact exponential.
pub fn quantum_plane_coordinate(calc: &LatticeCalculus, mu: usize, q: C64) -> ExpSum {
    let n = calc.dim();
    let mut freqs = vec![C64::new(0.0, 0.0); n];
    freqs[mu] = q.ln() / calc.spacing(mu);
    ExpSum::exp(n, C64::new(1.0, 0.0), &freqs)
}

#[derive(Clone, Debug, Serialize)]
pub struct QuantumPlaneReport {
    pub q: Vec<C64>,
    /// Max residual of `dy^mu y^mu - q^mu y^mu dy^mu`.
    pub relation_residual: f64,
    /// Max residual of `dy^mu y^nu - y^nu dy^mu`, mu != nu.
    pub cross_residual: f64,
    /// Max distance between `(dy^mu, dy^nu)` and `(q^mu-1)(q^nu-1) y^mu y^nu eta^{mu nu}`.
    pub metric_residual: f64,
    /// Per axis, the factors by which `g_{mm} dy dy` placed as
    /// `g dy (x) dy`, `dy (x) g dy`, `dy (x) dy g` differ from `eta_{mm} dx (x) dx`.
    pub tensor_factors: Vec<[C64; 3]>,
    /// The same factors as powers of q.
    pub tensor_powers: Vec<[f64; 3]>,
}

/// Left coefficient of `(f dx^mu) (x)_A (h dx^mu)` in the basis `dx^mu (x) dx^mu`.
fn tensor_coefficient(calc: &LatticeCalculus, mu: usize, f: &Coefficient, h: &Coefficient) -> Result<Coefficient> {
    let moved = calc.move_left_word(1 << mu, h)?;
    let hm = moved.component(1 << mu).cloned().unwrap_or_else(|| h.zero_like());
    f.mul_aligned(&hm)
}

pub fn quantum_plane_check(calc: &LatticeCalculus, q: &[C64]) -> Result<QuantumPlaneReport> {
    let n = calc.dim();
    if q.len() != n {
        return Err(Error::DimensionMismatch(n, q.len()));
    }
    if !calc.is_fully_discrete() {
        return Err(Error::InvalidParameter("quantum plane needs a fully discrete lattice".into()));
    }
    for qm in q {
        if qm.norm() < 1e-300 || (qm - 1.0).norm() < 1e-12 {
            return Err(Error::InvalidParameter(format!("q = {qm} must avoid 0 and 1")));
        }
    }
    let ys: Vec<Coefficient> = (0..n).map(|m| Coefficient::Exp(quantum_plane_coordinate(calc, m, q[m]))).collect();
    let dys = ys.iter().map(|y| calc.d_function(y)).collect::<Result<Vec<_>>>()?;
    let mut relation = 0.0f64;
    let mut cross = 0.0f64;
    for mu in 0..n {
        for nu in 0..n {
            let y = Form::function(n, ys[nu].clone());
            let lhs = calc.wedge(&dys[mu], &y)?;
            let rhs = calc.wedge(&y, &dys[mu])?;
            if mu == nu {
                let r = lhs.distance(&rhs.scale(q[mu]));
                relation = relation.max(relative(r, lhs.norm()));
            } else {
                cross = cross.max(relative(lhs.distance(&rhs), lhs.norm()));
            }
        }
    }
    let metric = metric_components(calc, &ys)?;
    let mut metric_res = 0.0f64;
    for mu in 0..n {
        for nu in 0..n {
            let eta = if mu == nu { calc.spec().signature[mu] as f64 } else { 0.0 };
            let expect = ys[mu]
                .mul(&ys[nu])?
                .scale((q[mu] - 1.0) * (q[nu] - 1.0) * eta);
            let got = &metric.upper[mu][nu];
            metric_res = metric_res.max(relative(got.distance(&expect), expect.norm().max(got.norm())));
        }
    }
    let mut factors = Vec::with_capacity(n);
    let mut powers = Vec::with_capacity(n);
    for mu in 0..n {
        let eta = calc.spec().signature[mu] as f64;
        let g_lower = reciprocal(&metric.upper[mu][mu])?;
        // dy = c y dx with the unit-lattice dx
        let dy = dys[mu].component(1 << mu).cloned().ok_or(Error::Singular { site: Vec::new() })?;
        let c = dy.scale(C64::new(calc.spacing(mu), 0.0));
        let placements = [
            tensor_coefficient(calc, mu, &g_lower.mul(&c)?, &c)?,
            tensor_coefficient(calc, mu, &c, &g_lower.mul(&c)?)?,
            {
                // dy g = c (T g) dx
                let tg = calc.move_left_word(1 << mu, &g_lower)?.component(1 << mu).cloned().unwrap();
                tensor_coefficient(calc, mu, &c, &c.mul(&tg)?)?
            },
        ];
        let mut f = [C64::new(0.0, 0.0); 3];
        let mut p = [0.0; 3];
        for (k, coef) in placements.iter().enumerate() {
            let e = coef.as_exp()?;
            // the ratio is constant: read it off at the origin
            f[k] = e.eval(&vec![C64::new(0.0, 0.0); n]) / eta;
            p[k] = (f[k].ln() / q[mu].ln()).re;
        }
        factors.push(f);
        powers.push(p);
    }
    Ok(QuantumPlaneReport {
        q: q.to_vec(),
        relation_residual: relation,
        cross_residual: cross,
        metric_residual: metric_res,
        tensor_factors: factors,
        tensor_powers: powers,
    })
}

/// Generator of random forms for the randomized suites on this calculus:
/// periodic grids of extent 4 when every axis is discrete, exponential sums otherwise.
pub fn random_form(calc: &LatticeCalculus, rng: &mut CaseRng, grade: usize) -> Form {
    let n = calc.dim();
    if calc.is_fully_discrete() {
        let window = Window::cube(n, 4);
        let spacing = calc.spec().spacings.clone();
        let boundary = vec![Boundary::Periodic; n];
        random::form(rng, n, grade, |r| Coefficient::Grid(random::grid(r, &window, &spacing, &boundary)))
    } else {
        let shape = ExpSumShape::default();
        random::form(rng, n, grade, |r| Coefficient::Exp(random::expsum(r, n, &shape)))
    }
}

/// Randomized axioms of a differential calculus.
///
/// Each case draws a form `w` of random grade below n and checks d(dw) = 0
/// and the graded Leibniz rule against a second random form; the
/// left/right module basis property is checked on random 1-forms.
pub fn axiom_suite_with<C, G>(calc: &C, samples: usize, seed: u64, tol: f64, gen: G) -> Result<Report>
where
    C: Calculus,
    G: Fn(&mut CaseRng, usize) -> Form + Sync + Send,
{
    let n = calc.dim();
    let cases = crate::par::try_map_range(samples, |i| -> Result<[f64; 3]> {
        let mut rng = random::case_rng(seed, i as u64);
        let r = rand::Rng::random_range(&mut rng, 0..n);
        let w = gen(&mut rng, r);
        let dw = calc.d(&w)?;
        let dd = if r + 2 <= n {
            let wn = w.norm();
            let scale = wn.max(dw.norm() * dw.norm() / wn.max(1e-300));
            relative(calc.d(&dw)?.norm(), scale)
        } else {
            0.0
        };
        let r2 = rand::Rng::random_range(&mut rng, 0..n - r);
        let w2 = gen(&mut rng, r2);
        let lhs = calc.d(&calc.wedge(&w, &w2)?)?;
        let t1 = calc.wedge(&dw, &w2)?;
        let t2 = calc.wedge(&w, &calc.d(&w2)?)?;
        let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
        let rhs = t1.add(&t2.scale(C64::new(sign, 0.0)))?;
        let leib = relative(lhs.distance(&rhs), lhs.norm().max(t1.norm()).max(t2.norm()));
        let a = gen(&mut rng, 1);
        let back = calc.to_left(&calc.to_right(&a)?)?;
        let basis = relative(back.distance(&a), a.norm());
        Ok([dd, leib, basis])
    })?;
    let max = |k: usize| cases.iter().map(|c| c[k]).fold(0.0, f64::max);

    let probe = gen(&mut random::case_rng(seed, samples as u64), 0);
    let one = probe.scalar().map(|c| c.constant_like(C64::new(1.0, 0.0)));
    let d_one = match one {
        Some(c) => calc.d_function(&c)?.norm(),
        None => 0.0,
    };
    let dims_ok = (0..=n).all(|r| basis_words(n, r).len() == binomial(n, n - r));

    let mut rep = Report::new("differential calculus axioms");
    rep.push(Check::bound("d_squared", "d(d w) = 0", max(0), tol, samples));
    rep.push(Check::bound(
        "leibniz",
        "d(w w') = (dw) w' + (-1)^r w dw'",
        max(1),
        tol,
        samples,
    ));
    rep.push(Check::bound("d_one", "d1 = 0", d_one, 0.0, 1));
    rep.push(Check::bound(
        "module_basis",
        "dx^mu are a left and a right basis: left(right(a)) = a",
        max(2),
        tol,
        samples,
    ));
    rep.push(Check::flag("hodge_dims", "dim Omega^r = dim Omega^(n-r)", dims_ok));
    Ok(rep)
}

pub fn axiom_suite(spec: &CalculusSpec, samples: usize, seed: u64, tol: f64) -> Result<Report> {
    let calc = LatticeCalculus::new(spec.clone())?;
    axiom_suite_with(&calc, samples, seed, tol, |rng, r| random_form(&calc, rng, r))
}

/// Metric reproduction on random lattices: `(dx^mu', dx^nu') = l^mu l^nu eta^{mu nu}`
/// and the quantum-plane metric `(q^mu - 1)(q^nu - 1) y^mu y^nu eta^{mu nu}`.
pub fn metric_suite(draws: usize, seed: u64, tol: f64) -> Result<Report> {
    use rand::Rng;
    let mut lattice_res = 0.0f64;
    let mut qp = [0.0f64; 3];
    for i in 0..draws {
        let mut rng = random::case_rng(seed, i as u64);
        let n = rng.random_range(1..4);
        let ls: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
        let calc = LatticeCalculus::new(CalculusSpec::minkowski(&ls))?;
        let one = Coefficient::Exp(ExpSum::constant(n, C64::new(1.0, 0.0)));
        let eta = &calc.spec().signature;
        for mu in 0..n {
            for nu in 0..n {
                let a = Form::basis(n, 1 << mu, one.clone());
                let b = Form::basis(n, 1 << nu, one.clone());
                let g = calc.scalar_product(&a, &b)?;
                let e = if mu == nu { eta[mu] as f64 } else { 0.0 };
                let expect = one.scale(C64::new(ls[mu] * ls[nu] * e, 0.0));
                lattice_res = lattice_res.max(relative(g.distance(&expect), ls[mu] * ls[nu]));
            }
        }
        let mut rng = random::case_rng(seed, (draws + i) as u64);
        let n = rng.random_range(1..4);
        let ls: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
        let q: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(1.2..3.0), rng.random_range(-0.5..0.5))).collect();
        let rep = quantum_plane_check(&LatticeCalculus::new(CalculusSpec::minkowski(&ls))?, &q)?;
        qp[0] = qp[0].max(rep.relation_residual);
        qp[1] = qp[1].max(rep.cross_residual);
        qp[2] = qp[2].max(rep.metric_residual);
    }
    let mut rep = Report::new("metric reproduction");
    rep.push(Check::bound(
        "rescaled_metric",
        "(dx^mu', dx^nu') = l^mu l^nu eta^{mu nu}",
        lattice_res,
        tol,
        draws,
    ));
    rep.push(Check::bound("quantum_plane_relation", "dy y = q y dy", qp[0], tol, draws));
    rep.push(Check::bound("quantum_plane_cross", "dy^mu y^nu = y^nu dy^mu for mu != nu", qp[1], tol, draws));
    rep.push(Check::bound(
        "quantum_plane_metric",
        "(dy^mu, dy^nu) = (q^mu - 1)(q^nu - 1) y^mu y^nu eta^{mu nu}",
        qp[2],
        tol,
        draws,
    ));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::GridFunction;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn d_of_coordinate_and_square() {
        let calc = LatticeCalculus::new(CalculusSpec::minkowski(&[1.0])).unwrap();
        let x = ExpSum::coordinate(1, 0);
        let dx = calc.d_function(&Coefficient::Exp(x.clone())).unwrap();
        assert_eq!(dx, Form::basis(1, 1, Coefficient::Exp(ExpSum::constant(1, c(1.0)))));
        let dx2 = calc.d_function(&Coefficient::Exp(&x * &x)).unwrap();
        let expect = &x.scale(c(2.0)) + &ExpSum::constant(1, c(1.0));
        assert_eq!(dx2, Form::basis(1, 1, Coefficient::Exp(expect)));
    }

    #[test]
    fn dx_times_x_on_spaced_lattice() {
        let ell = 0.3;
        let calc = LatticeCalculus::new(CalculusSpec::minkowski(&[ell])).unwrap();
        let x = Coefficient::Exp(ExpSum::coordinate(1, 0));
        let one = x.constant_like(c(1.0));
        let lhs = calc.wedge(&Form::basis(1, 1, one.clone()), &Form::function(1, x.clone())).unwrap();
        let expect = x.add(&one.scale(c(ell))).unwrap();
        assert_eq!(lhs, Form::basis(1, 1, expect));
    }

    #[test]
    fn star_on_two_dim_minkowski() {
        let calc = LatticeCalculus::new(CalculusSpec::minkowski(&[1.0, 1.0])).unwrap();
        assert_eq!(calc.star_basis(0), vec![(0b11, c(1.0))]);
        assert_eq!(calc.star_basis(0b01), vec![(0b10, c(1.0))]);
        assert_eq!(calc.star_basis(0b10), vec![(0b01, c(1.0))]);
        assert_eq!(calc.star_basis(0b11), vec![(0, c(-1.0))]);
    }

    #[test]
    fn toda_fixture_star() {
        let calc = LatticeCalculus::new(CalculusSpec::semi_discrete_toda(0.5)).unwrap();
        assert_eq!(calc.star_basis(0b01), vec![(0b10, c(-1.0))]);
        assert_eq!(calc.star_basis(0b10), vec![(0b01, c(-1.0))]);
    }

    #[test]
    fn scalar_product_of_rescaled_differentials() {
        let ls = [0.5, 2.0, 1.5];
        let calc = LatticeCalculus::new(CalculusSpec::minkowski(&ls)).unwrap();
        let one = Coefficient::Exp(ExpSum::constant(3, c(1.0)));
        for mu in 0..3 {
            for nu in 0..3 {
                let a = Form::basis(3, 1 << mu, one.clone());
                let b = Form::basis(3, 1 << nu, one.clone());
                let g = calc.scalar_product(&a, &b).unwrap();
                let eta = if mu != nu { 0.0 } else if mu == 0 { 1.0 } else { -1.0 };
                assert_eq!(g, one.scale(c(ls[mu] * ls[nu] * eta)), "{mu}{nu}");
            }
        }
    }

    #[test]
    fn scalar_product_with_zero() {
        let calc = LatticeCalculus::new(CalculusSpec::minkowski(&[1.0, 1.0])).unwrap();
        let one = Coefficient::Exp(ExpSum::constant(2, c(1.0)));
        let a = Form::basis(2, 1, one);
        assert!(calc.scalar_product(&a, &Form::zero(2, 1)).unwrap().is_zero());
    }

    #[test]
    fn star_of_one_is_volume() {
        let calc = LatticeCalculus::new(CalculusSpec::minkowski(&[1.0; 4])).unwrap();
        assert_eq!(calc.star_basis(0), vec![(0b1111, c(1.0))]);
    }

    #[test]
    fn linear_map_metric_follows_chain_rule() {
        let ls = [0.5, 1.25];
        let calc = LatticeCalculus::new(CalculusSpec::minkowski(&ls)).unwrap();
        let m = [[2.0, 1.0], [0.5, -1.0]];
        let x = |k| ExpSum::coordinate(2, k);
        let ys: Vec<Coefficient> = (0..2)
            .map(|i| Coefficient::Exp(&x(0).scale(c(m[i][0])) + &x(1).scale(c(m[i][1]))))
            .collect();
        let g = metric_components(&calc, &ys).unwrap();
        let eta = [1.0, -1.0];
        for i in 0..2 {
            for j in 0..2 {
                let expect: f64 = (0..2).map(|k| m[i][k] * m[j][k] * ls[k] * ls[k] * eta[k]).sum();
                assert!(g.upper[i][j].distance(&Coefficient::Exp(ExpSum::constant(2, c(expect)))) < 1e-14);
            }
        }
        assert!(g.chain_rule_residual < 1e-14);
        assert!(g.inverse_residual.unwrap() < 1e-12);
    }

    #[test]
    fn degenerate_coordinates_rejected() {
        let calc = LatticeCalculus::new(CalculusSpec::minkowski(&[1.0, 1.0])).unwrap();
        let x = Coefficient::Exp(ExpSum::coordinate(2, 0));
        let r = metric_components(&calc, &[x.clone(), x.scale(c(2.0))]);
        assert!(matches!(r, Err(Error::Singular { .. })));
    }

    #[test]
    fn quantum_plane_one_axis() {
        let calc = LatticeCalculus::new(CalculusSpec::minkowski(&[1.0])).unwrap();
        let rep = quantum_plane_check(&calc, &[c(2.0)]).unwrap();
        assert!(rep.relation_residual < 1e-14);
        assert!(rep.metric_residual < 1e-14);
        let p = rep.tensor_powers[0];
        assert!((p[0] - 1.0).abs() < 1e-12 && (p[1] + 1.0).abs() < 1e-12 && (p[2] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn quantum_plane_rejects_unit_q() {
        let calc = LatticeCalculus::new(CalculusSpec::minkowski(&[1.0])).unwrap();
        assert!(quantum_plane_check(&calc, &[c(1.0)]).is_err());
    }

    #[test]
    fn grid_d_squared_vanishes() {
        let calc = LatticeCalculus::new(CalculusSpec::minkowski(&[0.5, 1.0])).unwrap();
        let w = Window::cube(2, 6);
        let f = GridFunction::from_fn(w, vec![0.5, 1.0], vec![Boundary::Periodic; 2], |s| {
            C64::new((s[0] * s[0]) as f64, (s[1] * 3 - s[0]) as f64)
        })
        .unwrap();
        let ddf = calc.d(&calc.d_function(&Coefficient::Grid(f)).unwrap()).unwrap();
        assert!(ddf.norm() < 1e-12);
    }
}
