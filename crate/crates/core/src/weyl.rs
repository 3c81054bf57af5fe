//! Weyl algebra `[q, p] = i hbar` with its simplest differential calculus
//! (`[dq, f] = [dp, f] = 0`), the involution-aware Hodge operator and the
//! field equation for phase-space automorphisms.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coeff::ZERO_TOL;
use crate::error::{Error, Result};
use crate::form::{binomial, normalize, Word};
use crate::random;
use crate::report::{relative, Check, Report};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Finite sum of normal-ordered monomials `c q^m p^n`.
#[derive(Clone, Debug)]
pub struct WeylElement {
    hbar: f64,
    coeffs: BTreeMap<(u32, u32), C64>,
}

impl PartialEq for WeylElement {
    fn eq(&self, other: &Self) -> bool {
        self.hbar == other.hbar && (self - other).is_zero()
    }
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

impl WeylElement {
    pub fn zero(hbar: f64) -> WeylElement {
        WeylElement { hbar, coeffs: BTreeMap::new() }
    }

    pub fn scalar(hbar: f64, c: C64) -> WeylElement {
        WeylElement::monomial(hbar, 0, 0, c)
    }

    pub fn one(hbar: f64) -> WeylElement {
        WeylElement::scalar(hbar, C64::new(1.0, 0.0))
    }

    pub fn q(hbar: f64) -> WeylElement {
        WeylElement::monomial(hbar, 1, 0, C64::new(1.0, 0.0))
    }

    pub fn p(hbar: f64) -> WeylElement {
        WeylElement::monomial(hbar, 0, 1, C64::new(1.0, 0.0))
    }

    /// `c q^m p^n`.
    pub fn monomial(hbar: f64, m: u32, n: u32, c: C64) -> WeylElement {
        WeylElement::from_terms(hbar, [((m, n), c)])
    }

    pub fn from_terms(hbar: f64, terms: impl IntoIterator<Item = ((u32, u32), C64)>) -> WeylElement {
        let mut coeffs = BTreeMap::new();
        for (k, c) in terms {
            *coeffs.entry(k).or_insert(C64::new(0.0, 0.0)) += c;
        }
        let mut w = WeylElement { hbar, coeffs };
        w.prune();
        w
    }

    fn prune(&mut self) {
        self.coeffs.retain(|_, c| c.norm() > ZERO_TOL);
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// `((m, n), c)` for each term `c q^m p^n`.
    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), C64)> + '_ {
        self.coeffs.iter().map(|(k, c)| (*k, *c))
    }

    pub fn coeff(&self, m: u32, n: u32) -> C64 {
        self.coeffs.get(&(m, n)).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<u32> {
        self.coeffs.keys().map(|(m, n)| m + n).max()
    }

    /// Max coefficient modulus.
    pub fn norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn distance(&self, other: &WeylElement) -> f64 {
        (self - other).norm()
    }

    pub fn scale(&self, c: C64) -> WeylElement {
        WeylElement::from_terms(self.hbar, self.coeffs.iter().map(|(k, v)| (*k, v * c)))
    }

    fn check_hbar(&self, other: &WeylElement) -> Result<()> {
        if self.hbar != other.hbar {
            return Err(Error::HbarMismatch(self.hbar, other.hbar));
        }
        Ok(())
    }

    /// Normal-ordered product, using `p^b q^c = sum_k k! C(b,k) C(c,k) (-i hbar)^k q^{c-k} p^{b-k}`.
    pub fn weyl_mul(&self, other: &WeylElement) -> Result<WeylElement> {
        self.check_hbar(other)?;
        let mut out: BTreeMap<(u32, u32), C64> = BTreeMap::new();
        let mih = C64::new(0.0, -self.hbar);
        for (&(a, b), x) in &self.coeffs {
            for (&(c, d), y) in &other.coeffs {
                for k in 0..=b.min(c) {
                    let w = factorial(k) * binomial(b as usize, k as usize) as f64 * binomial(c as usize, k as usize) as f64;
                    let key = (a + c - k, b - k + d);
                    *out.entry(key).or_insert(C64::new(0.0, 0.0)) += x * y * mih.powu(k) * w;
                }
            }
        }
        let mut w = WeylElement { hbar: self.hbar, coeffs: out };
        w.prune();
        Ok(w)
    }

    pub fn commutator(&self, other: &WeylElement) -> Result<WeylElement> {
        Ok(&self.weyl_mul(other)? - &other.weyl_mul(self)?)
    }

    /// Hermitean conjugation with `q† = q`, `p† = p`.
    pub fn dagger(&self) -> WeylElement {
        let mut out = WeylElement::zero(self.hbar);
        for (&(m, n), c) in &self.coeffs {
            let pn = WeylElement::monomial(self.hbar, 0, n, c.conj());
            let qm = WeylElement::monomial(self.hbar, m, 0, C64::new(1.0, 0.0));
            out = &out + &pn.weyl_mul(&qm).expect("same hbar");
        }
        out
    }

    /// `-(1/(i hbar)) [p, f]`.
    pub fn dhat_q(&self) -> WeylElement {
        WeylElement::p(self.hbar).commutator(self).expect("same hbar").scale(-1.0 / (I * self.hbar))
    }

    /// `(1/(i hbar)) [q, f]`.
    pub fn dhat_p(&self) -> WeylElement {
        WeylElement::q(self.hbar).commutator(self).expect("same hbar").scale(1.0 / (I * self.hbar))
    }
}

macro_rules! weyl_binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&WeylElement> for &WeylElement {
            type Output = WeylElement;
            fn $m(self, rhs: &WeylElement) -> WeylElement {
                assert_eq!(self.hbar, rhs.hbar, "hbar mismatch");
                let f: fn(&WeylElement, &WeylElement) -> WeylElement = $body;
                f(self, rhs)
            }
        }
        impl $tr<WeylElement> for WeylElement {
            type Output = WeylElement;
            fn $m(self, rhs: WeylElement) -> WeylElement {
                (&self).$m(&rhs)
            }
        }
    };
}

weyl_binop!(Add, add, |a, b| {
    WeylElement::from_terms(a.hbar, a.coeffs.iter().chain(&b.coeffs).map(|(k, v)| (*k, *v)))
});
weyl_binop!(Sub, sub, |a, b| {
    WeylElement::from_terms(a.hbar, a.coeffs.iter().map(|(k, v)| (*k, *v)).chain(b.coeffs.iter().map(|(k, v)| (*k, -v))))
});
weyl_binop!(Mul, mul, |a, b| a.weyl_mul(b).expect("same hbar"));

impl Neg for &WeylElement {
    type Output = WeylElement;
    fn neg(self) -> WeylElement {
        self.scale(C64::new(-1.0, 0.0))
    }
}

/// Checked product.
pub fn weyl_mul(f: &WeylElement, g: &WeylElement) -> Result<WeylElement> {
    f.weyl_mul(g)
}

pub const DQ: Word = 0b01;
pub const DP: Word = 0b10;
pub const DQDP: Word = 0b11;

/// Form of one grade with left Weyl coefficients on `{1, dq, dp, dq dp}`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeylForm {
    hbar: f64,
    grade: usize,
    comps: BTreeMap<Word, WeylElement>,
}

impl WeylForm {
    pub fn zero(hbar: f64, grade: usize) -> WeylForm {
        WeylForm { hbar, grade, comps: BTreeMap::new() }
    }

    pub fn new(hbar: f64, grade: usize, comps: impl IntoIterator<Item = (Word, WeylElement)>) -> Result<WeylForm> {
        if grade > 2 {
            return Err(Error::GradeMismatch { expected: 2, got: grade });
        }
        let mut out = WeylForm::zero(hbar, grade);
        for (w, f) in comps {
            if w.count_ones() as usize != grade || w > DQDP {
                return Err(Error::GradeMismatch { expected: grade, got: w.count_ones() as usize });
            }
            if f.hbar != hbar {
                return Err(Error::HbarMismatch(hbar, f.hbar));
            }
            out.add_to(w, f);
        }
        Ok(out)
    }

    pub fn function(f: WeylElement) -> WeylForm {
        let hbar = f.hbar;
        WeylForm::new(hbar, 0, [(0, f)]).expect("valid grade-0 word")
    }

    fn add_to(&mut self, w: Word, f: WeylElement) {
        let e = self.comps.entry(w).or_insert_with(|| WeylElement::zero(self.hbar));
        *e = &*e + &f;
        if e.is_zero() {
            self.comps.remove(&w);
        }
    }

    pub fn grade(&self) -> usize {
        self.grade
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn component(&self, w: Word) -> WeylElement {
        self.comps.get(&w).cloned().unwrap_or_else(|| WeylElement::zero(self.hbar))
    }

    pub fn components(&self) -> &BTreeMap<Word, WeylElement> {
        &self.comps
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.comps.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn add(&self, other: &WeylForm) -> Result<WeylForm> {
        if self.grade != other.grade && !self.is_zero() && !other.is_zero() {
            return Err(Error::GradeMismatch { expected: self.grade, got: other.grade });
        }
        let grade = if self.is_zero() { other.grade } else { self.grade };
        let mut out = WeylForm { hbar: self.hbar, grade, comps: self.comps.clone() };
        for (w, f) in &other.comps {
            out.add_to(*w, f.clone());
        }
        Ok(out)
    }

    pub fn scale(&self, c: C64) -> WeylForm {
        let mut out = WeylForm::zero(self.hbar, self.grade);
        for (w, f) in &self.comps {
            out.add_to(*w, f.scale(c));
        }
        out
    }

    pub fn sub(&self, other: &WeylForm) -> Result<WeylForm> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn distance(&self, other: &WeylForm) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    /// `(f w)(g w') = f g w w'`, since differentials commute with functions.
    pub fn wedge(&self, other: &WeylForm) -> WeylForm {
        let mut out = WeylForm::zero(self.hbar, self.grade + other.grade);
        for (w1, f) in &self.comps {
            for (w2, g) in &other.comps {
                let seq: Vec<usize> = word_seq(*w1).into_iter().chain(word_seq(*w2)).collect();
                if let Some((sign, w)) = normalize(&seq) {
                    out.add_to(w, (f * g).scale(C64::new(sign, 0.0)));
                }
            }
        }
        out
    }

    pub fn d(&self) -> WeylForm {
        let mut out = WeylForm::zero(self.hbar, self.grade + 1);
        for (w, f) in &self.comps {
            for (k, df) in [(0usize, f.dhat_q()), (1usize, f.dhat_p())] {
                let seq: Vec<usize> = std::iter::once(k).chain(word_seq(*w)).collect();
                if let Some((sign, word)) = normalize(&seq) {
                    out.add_to(word, df.scale(C64::new(sign, 0.0)));
                }
            }
        }
        out
    }

    /// Antilinear `*(w f) = f† *w` with `*1 = dq dp`, `*dq = dp`, `*dp = -dq`, `*(dq dp) = 1`.
    pub fn star(&self) -> WeylForm {
        let mut out = WeylForm::zero(self.hbar, 2 - self.grade);
        for (w, f) in &self.comps {
            let (target, sign) = star_basis(*w);
            out.add_to(target, f.dagger().scale(C64::new(sign, 0.0)));
        }
        out
    }

    /// `*^{-1}(f w) = (*^{-1} w) f†`.
    pub fn star_inv(&self) -> WeylForm {
        let mut out = WeylForm::zero(self.hbar, 2 - self.grade);
        for (w, f) in &self.comps {
            let (target, sign) = star_inv_basis(*w);
            out.add_to(target, f.dagger().scale(C64::new(sign, 0.0)));
        }
        out
    }

    /// `(f w)† = w† f†` with `(w w')† = w'† w†` and `(dw)† = (-1)^{r+1} d(w†)`.
    pub fn dagger(&self) -> WeylForm {
        let mut out = WeylForm::zero(self.hbar, self.grade);
        for (w, f) in &self.comps {
            out.add_to(*w, f.dagger().scale(C64::new(basis_dagger_sign(*w), 0.0)));
        }
        out
    }
}

fn word_seq(w: Word) -> Vec<usize> {
    (0..2).filter(|k| w & (1 << k) != 0).collect()
}

fn star_basis(w: Word) -> (Word, f64) {
    match w {
        0 => (DQDP, 1.0),
        DQ => (DP, 1.0),
        DP => (DQ, -1.0),
        _ => (0, 1.0),
    }
}

fn star_inv_basis(w: Word) -> (Word, f64) {
    match w {
        DQDP => (0, 1.0),
        DP => (DQ, 1.0),
        DQ => (DP, -1.0),
        _ => (DQDP, 1.0),
    }
}

/// `1† = 1`, `(dq)† = -dq`, `(dp)† = -dp`, `(dq dp)† = (dp)†(dq)† = dp dq = -dq dp`.
fn basis_dagger_sign(w: Word) -> f64 {
    match w {
        0 => 1.0,
        _ => -1.0,
    }
}

/// `(alpha, beta) = *^{-1}(alpha * beta)` for 1-forms.
pub fn scalar_product(alpha: &WeylForm, beta: &WeylForm) -> Result<WeylElement> {
    if alpha.grade != 1 || beta.grade != 1 {
        return Err(Error::GradeMismatch { expected: 1, got: alpha.grade.max(beta.grade) });
    }
    Ok(alpha.wedge(&beta.star()).star_inv().component(0))
}

/// Random element with all monomials of degree `<= degree`.
pub fn random_element(rng: &mut impl Rng, hbar: f64, degree: u32) -> WeylElement {
    let mut terms = Vec::new();
    for m in 0..=degree {
        for n in 0..=(degree - m) {
            terms.push(((m, n), random::complex(rng)));
        }
    }
    WeylElement::from_terms(hbar, terms)
}

pub fn random_form(rng: &mut impl Rng, hbar: f64, grade: usize, degree: u32) -> WeylForm {
    let words: Vec<Word> = (0..=DQDP).filter(|w| w.count_ones() as usize == grade).collect();
    WeylForm::new(hbar, grade, words.into_iter().map(|w| (w, random_element(rng, hbar, degree))).collect::<Vec<_>>())
        .expect("valid words")
}

/// `(eps_0, eps_1, eps_2)` measured from `**` on the basis forms.
pub fn measure_epsilon(hbar: f64) -> [C64; 3] {
    let one = WeylElement::one(hbar);
    let mut eps = [C64::new(0.0, 0.0); 3];
    for (r, w) in [(0usize, 0 as Word), (1, DQ), (2, DQDP)] {
        let form = WeylForm::new(hbar, r, [(w, one.clone())]).unwrap();
        eps[r] = form.star().star().component(w).coeff(0, 0);
    }
    eps
}

/// Constant `c` with `(alpha * beta)† = c beta * alpha`, fitted on `dq, dp`.
pub fn measure_dag_star_constant(hbar: f64) -> Option<C64> {
    let one = WeylElement::one(hbar);
    let dq = WeylForm::new(hbar, 1, [(DQ, one.clone())]).unwrap();
    let lhs = dq.wedge(&dq.star()).dagger().component(DQDP).coeff(0, 0);
    let rhs = dq.wedge(&dq.star()).component(DQDP).coeff(0, 0);
    (rhs.norm() > 0.0).then(|| lhs / rhs)
}

/// Consistency of the involution-aware Hodge operator on random forms.
pub fn epsilon_suite(hbar: f64, samples: usize, seed: u64, degree: u32, tol: f64) -> Report {
    let eps = measure_epsilon(hbar);
    let c = measure_dag_star_constant(hbar).unwrap_or(C64::new(f64::NAN, 0.0));
    let mut rep = Report::new("Weyl algebra: epsilon table and involution rules");
    let table = [1.0, -1.0, 1.0];
    rep.push(Check::bound(
        "epsilon_table",
        "** = eps_r on grade r with (eps_0, eps_1, eps_2) = (1, -1, 1)",
        (0..3).map(|r| (eps[r] - table[r]).norm()).fold(0.0, f64::max),
        tol,
        3,
    ));
    rep.push(Check::bound(
        "epsilon_unitary",
        "eps_r eps_r† = 1",
        (0..3).map(|r| (eps[r] * eps[r].conj() - 1.0).norm()).fold(0.0, f64::max),
        tol,
        3,
    ));
    rep.push(Check::bound(
        "tower_condition",
        "eps_1 = -eps_2†",
        (eps[1] + eps[2].conj()).norm(),
        tol,
        1,
    ));
    let mut star_star = 0.0f64;
    let mut herm = 0.0f64;
    let mut star_dag = 0.0f64;
    let mut dag_star = 0.0f64;
    let mut dag_star_measured = 0.0f64;
    let mut dd = 0.0f64;
    for i in 0..samples {
        let mut rng = random::case_rng(seed, i as u64);
        for r in 0..3 {
            let w = random_form(&mut rng, hbar, r, degree);
            star_star = star_star.max(relative(w.star().star().distance(&w.scale(eps[r])).unwrap(), w.norm()));
            star_dag = star_dag.max(relative(w.star().dagger().distance(&w.dagger().star_inv()).unwrap(), w.norm()));
            dd = dd.max(relative(w.dagger().dagger().distance(&w).unwrap(), w.norm()));
        }
        let a = random_form(&mut rng, hbar, 1, degree);
        let b = random_form(&mut rng, hbar, 1, degree);
        let ab = scalar_product(&a, &b).unwrap();
        let ba = scalar_product(&b, &a).unwrap();
        let s = a.norm() * b.norm();
        herm = herm.max(relative(ab.dagger().distance(&ba), s));
        let lhs = a.wedge(&b.star()).dagger();
        let rhs = b.wedge(&a.star());
        dag_star = dag_star.max(relative(lhs.distance(&rhs.scale(eps[2].conj())).unwrap(), s));
        dag_star_measured = dag_star_measured.max(relative(lhs.distance(&rhs.scale(c)).unwrap(), s));
    }
    rep.push(Check::bound("star_star", "** w = eps_r w on random forms", star_star, tol, samples * 3));
    rep.push(Check::bound("dagger_involution", "w†† = w", dd, tol, samples * 3));
    rep.push(Check::bound("hermiticity", "(alpha, beta)† = (beta, alpha)", herm, tol, samples));
    rep.push(Check::bound(
        "dag_star_measured",
        "(alpha * beta)† = c beta * alpha with c measured on dq, dp",
        dag_star_measured,
        tol,
        samples,
    ));
    rep.push(Check::flag("dag_star_constant", "measured c = -1", (c + 1.0).norm() <= tol));
    let mut info = Report::new("literal involution conditions");
    info.push(Check::bound("star_dagger", "(*w)† = *^{-1}(w†), informational", star_dag, tol, samples * 3));
    info.push(Check::bound("dag_star_eps", "(alpha * beta)† = eps_2† beta * alpha, informational", dag_star, tol, samples));
    for mut ch in info.checks {
        ch.name = format!("info_{}", ch.name);
        ch.passed = true;
        rep.push(ch);
    }
    rep
}

/// `[p, P] + [q, Q]`, and its agreement with `-i hbar (dhat_q P - dhat_p Q)`.
#[derive(Clone, Debug)]
pub struct FieldResidualPq {
    pub residual: WeylElement,
    pub via_partials: WeylElement,
}

pub fn field_residual_pq(big_p: &WeylElement, big_q: &WeylElement) -> Result<FieldResidualPq> {
    big_p.check_hbar(big_q)?;
    let h = big_p.hbar;
    let residual = &WeylElement::p(h).commutator(big_p)? + &WeylElement::q(h).commutator(big_q)?;
    let via_partials = (&big_p.dhat_q() - &big_q.dhat_p()).scale(-I * h);
    Ok(FieldResidualPq { residual, via_partials })
}

/// Affine symplectic maps `(p, q) -> (P, Q)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Automorphism {
    /// `P = p + cp`, `Q = q + cq`.
    Translation { cp: f64, cq: f64 },
    /// `P = e^s p`, `Q = e^{-s} q`.
    Squeeze { s: f64 },
    /// `P = cos(theta) p + sin(theta) q`, `Q = -sin(theta) p + cos(theta) q`.
    Rotation { theta: f64 },
    /// `P = a p + b q + e`, `Q = c p + d q + f`.
    Affine { a: f64, b: f64, c: f64, d: f64, e: f64, f: f64 },
}

impl Automorphism {
    pub fn images(&self, hbar: f64) -> (WeylElement, WeylElement) {
        let (a, b, c, d, e, f) = match *self {
            Automorphism::Translation { cp, cq } => (1.0, 0.0, 0.0, 1.0, cp, cq),
            Automorphism::Squeeze { s } => (s.exp(), 0.0, 0.0, (-s).exp(), 0.0, 0.0),
            Automorphism::Rotation { theta } => (theta.cos(), theta.sin(), -theta.sin(), theta.cos(), 0.0, 0.0),
            Automorphism::Affine { a, b, c, d, e, f } => (a, b, c, d, e, f),
        };
        let r = |x: f64| C64::new(x, 0.0);
        let lin = |x: f64, y: f64, z: f64| {
            WeylElement::from_terms(hbar, [((0, 1), r(x)), ((1, 0), r(y)), ((0, 0), r(z))])
        };
        (lin(a, b, e), lin(c, d, f))
    }

    /// `-2 i hbar sin(theta)` for rotations, `i hbar (c - b)` in general.
    pub fn expected_residual(&self, hbar: f64) -> C64 {
        match *self {
            Automorphism::Translation { .. } | Automorphism::Squeeze { .. } => C64::new(0.0, 0.0),
            Automorphism::Rotation { theta } => C64::new(0.0, -2.0 * hbar * theta.sin()),
            Automorphism::Affine { b, c, .. } => C64::new(0.0, hbar * (c - b)),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Automorphism::Translation { cp, cq } => format!("translation({cp}, {cq})"),
            Automorphism::Squeeze { s } => format!("squeeze({s})"),
            Automorphism::Rotation { theta } => format!("rotation({theta})"),
            Automorphism::Affine { a, b, c, d, e, f } => format!("affine({a}, {b}, {c}, {d}, {e}, {f})"),
        }
    }

    /// `A = -(1/(i hbar))(P - p) dq + (1/(i hbar))(Q - q) dp`.
    pub fn current(&self, hbar: f64) -> WeylForm {
        let (big_p, big_q) = self.images(hbar);
        let a = (&big_p - &WeylElement::p(hbar)).scale(-1.0 / (I * hbar));
        let b = (&big_q - &WeylElement::q(hbar)).scale(1.0 / (I * hbar));
        WeylForm::new(hbar, 1, [(DQ, a), (DP, b)]).unwrap()
    }
}

pub fn default_catalog() -> Vec<Automorphism> {
    vec![
        Automorphism::Translation { cp: 0.7, cq: -1.3 },
        Automorphism::Squeeze { s: 0.4 },
        Automorphism::Rotation { theta: 0.3 },
        Automorphism::Rotation { theta: 1.2 },
        Automorphism::Affine { a: 1.0, b: 0.5, c: 0.5, d: 1.25, e: 0.2, f: -0.1 },
    ]
}

pub fn residual_catalog(hbar: f64, catalog: &[Automorphism], tol: f64) -> Result<Report> {
    let mut rep = Report::new("Weyl field equation on affine automorphisms");
    for a in catalog {
        let (big_p, big_q) = a.images(hbar);
        let r = field_residual_pq(&big_p, &big_q)?;
        let expect = WeylElement::scalar(hbar, a.expected_residual(hbar));
        rep.push(Check::bound(
            &format!("residual_{}", a.name()),
            "[p, P] + [q, Q] equals the closed-form constant",
            r.residual.distance(&expect),
            tol,
            1,
        ));
        rep.push(Check::bound(
            &format!("partials_{}", a.name()),
            "[p, P] + [q, Q] = -i hbar (dhat_q P - dhat_p Q)",
            r.residual.distance(&r.via_partials),
            tol,
            1,
        ));
        let d_star_a = a.current(hbar).star().d().component(DQDP);
        let expect_field = r.residual.scale(-1.0 / (I * hbar * I * hbar));
        rep.push(Check::bound(
            &format!("field_form_{}", a.name()),
            "d*A = (1/(i hbar)) (dhat_q P - dhat_p Q) dq dp",
            d_star_a.distance(&expect_field),
            tol,
            1,
        ));
    }
    Ok(rep)
}

/// Matrix of forms over the Weyl algebra, row-major.
pub type WeylMatrix = Vec<WeylForm>;

fn mat_dim(m: &WeylMatrix) -> usize {
    (m.len() as f64).sqrt().round() as usize
}

fn mat_map(m: &WeylMatrix, f: impl Fn(&WeylForm) -> WeylForm) -> WeylMatrix {
    m.iter().map(f).collect()
}

fn mat_mul(a: &WeylMatrix, b: &WeylMatrix) -> Result<WeylMatrix> {
    let n = mat_dim(a);
    (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            let grade = a[0].grade + b[0].grade;
            (0..n).try_fold(WeylForm::zero(a[0].hbar, grade), |acc, m| acc.add(&a[i * n + m].wedge(&b[m * n + j])))
        })
        .collect()
}

fn covariant(a: &WeylMatrix, chi: &WeylMatrix) -> Result<WeylMatrix> {
    let dchi = mat_map(chi, |e| e.d());
    let prod = mat_mul(a, chi)?;
    dchi.iter().zip(&prod).map(|(x, y)| x.add(y)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct TowerIdentity {
    /// `||d*A||` of the current used.
    pub field_residual: f64,
    /// `||d*D(chi†) - c (D*d chi)†||` with the measured `c`.
    pub measured: f64,
    /// `||d*D(chi†) + (eps_1† D*d chi)†||`.
    pub literal: f64,
    pub constant: C64,
}

/// Compare `d*D(chi†)` with `(D*d chi)†` for a matrix of functions `chi`.
pub fn tower_identity(a: &WeylMatrix, chi: &WeylMatrix) -> Result<TowerIdentity> {
    let hbar = a[0].hbar;
    let eps = measure_epsilon(hbar);
    let c = measure_dag_star_constant(hbar).ok_or_else(|| Error::InvalidParameter("degenerate star".into()))?;
    let field_residual = a.iter().map(|x| x.star().d().norm()).fold(0.0, f64::max);
    let chi_dag = mat_map(chi, |e| e.dagger());
    let lhs = mat_map(&covariant(a, &chi_dag)?, |e| e.star().d());
    let dchi = mat_map(chi, |e| e.d());
    let star_dchi = mat_map(&dchi, |e| e.star());
    let inner = covariant(a, &star_dchi)?;
    let inner_dag = mat_map(&inner, |e| e.dagger());
    let mut measured = 0.0f64;
    let mut literal = 0.0f64;
    for k in 0..lhs.len() {
        measured = measured.max(lhs[k].distance(&inner_dag[k].scale(c))?);
        let lit = inner[k].scale(eps[1].conj()).dagger().scale(C64::new(-1.0, 0.0));
        literal = literal.max(lhs[k].distance(&lit)?);
    }
    Ok(TowerIdentity { field_residual, measured, literal, constant: c })
}

pub fn random_matrix(rng: &mut impl Rng, hbar: f64, n: usize, degree: u32) -> WeylMatrix {
    (0..n * n).map(|_| WeylForm::function(random_element(rng, hbar, degree))).collect()
}

/// Diagonal current built from conserved automorphism currents.
pub fn diagonal_current(hbar: f64, autos: &[Automorphism]) -> WeylMatrix {
    let n = autos.len();
    (0..n * n)
        .map(|k| if k / n == k % n { autos[k / n].current(hbar) } else { WeylForm::zero(hbar, 1) })
        .collect()
}

/// Closed 1-forms of each homogeneous degree are exact: `rank d0 = dim ker d1`.
/// Also reconstructs `F = (q a + b p)/(k+1)` for a random closed form.
#[derive(Clone, Debug, Serialize)]
pub struct ClosedExactDegree {
    pub degree: u32,
    pub closed_dimension: usize,
    pub exact_dimension: usize,
    pub reconstruction_residual: f64,
}

fn rank(rows: &[Vec<C64>]) -> usize {
    if rows.is_empty() || rows[0].is_empty() {
        return 0;
    }
    let m = nalgebra::DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    m.rank(1e-9)
}

pub fn closed_exact(hbar: f64, max_degree: u32, seed: u64) -> Vec<ClosedExactDegree> {
    let monos = |k: u32| -> Vec<(u32, u32)> { (0..=k).map(|m| (m, k - m)).collect() };
    (0..=max_degree)
        .map(|k| {
            let one_forms: Vec<(Word, (u32, u32))> =
                [DQ, DP].iter().flat_map(|&w| monos(k).into_iter().map(move |mn| (w, mn))).collect();
            let two_forms = if k == 0 { Vec::new() } else { monos(k - 1) };
            // d0: degree k+1 functions -> 1-forms of degree k (columns = sources)
            let d0: Vec<Vec<C64>> = one_forms
                .iter()
                .map(|&(w, (m, n))| {
                    monos(k + 1)
                        .iter()
                        .map(|&(a, b)| {
                            WeylForm::function(WeylElement::monomial(hbar, a, b, C64::new(1.0, 0.0))).d().component(w).coeff(m, n)
                        })
                        .collect()
                })
                .collect();
            let d1: Vec<Vec<C64>> = two_forms
                .iter()
                .map(|&(m, n)| {
                    one_forms
                        .iter()
                        .map(|&(w, (a, b))| {
                            let f = WeylForm::new(hbar, 1, [(w, WeylElement::monomial(hbar, a, b, C64::new(1.0, 0.0)))]).unwrap();
                            f.d().component(DQDP).coeff(m, n)
                        })
                        .collect()
                })
                .collect();
            let closed_dimension = one_forms.len() - rank(&d1);
            let exact_dimension = rank(&d0);
            let mut rng = random::case_rng(seed, k as u64);
            let f0 = WeylElement::from_terms(hbar, monos(k + 1).into_iter().map(|mn| (mn, random::complex(&mut rng))));
            let alpha = WeylForm::function(f0).d();
            let (a, b) = (alpha.component(DQ), alpha.component(DP));
            let potential = (&(&WeylElement::q(hbar) * &a) + &(&b * &WeylElement::p(hbar))).scale(C64::new(1.0 / (k as f64 + 1.0), 0.0));
            let reconstruction_residual = WeylForm::function(potential).d().distance(&alpha).unwrap();
            ClosedExactDegree { degree: k, closed_dimension, exact_dimension, reconstruction_residual }
        })
        .collect()
}

/// Commutation relations of the generators and differentials.
pub fn commutator_table(hbar: f64) -> Report {
    let (q, p, one) = (WeylElement::q(hbar), WeylElement::p(hbar), WeylElement::one(hbar));
    let ih = WeylElement::scalar(hbar, C64::new(0.0, hbar));
    let zero = WeylElement::zero(hbar);
    let comm = |a: &WeylElement, b: &WeylElement| a.commutator(b).expect("same hbar");
    let mut rep = Report::new("Weyl algebra commutation table");
    for (name, got, want) in [
        ("q_p", comm(&q, &p), ih.clone()),
        ("p_q", comm(&p, &q), -&ih),
        ("q_q", comm(&q, &q), zero.clone()),
        ("p_p", comm(&p, &p), zero.clone()),
        ("q_1", comm(&q, &one), zero.clone()),
        ("p_1", comm(&p, &one), zero.clone()),
    ] {
        rep.push(Check::bound(&format!("commutator_{name}"), "[q, p] = i hbar", got.distance(&want), 0.0, 1));
    }
    let dq = WeylForm::function(q.clone()).d();
    let dp = WeylForm::function(p.clone()).d();
    for (name, diff, f) in [("dq", &dq, &q), ("dq", &dq, &p), ("dp", &dp, &q), ("dp", &dp, &p)] {
        let fw = WeylForm::function(f.clone());
        let c = diff.wedge(&fw).sub(&fw.wedge(diff)).unwrap();
        rep.push(Check::bound(&format!("commutator_{name}_function"), "[dq, f] = [dp, f] = 0", c.norm(), 0.0, 1));
    }
    rep.push(Check::bound("dq_dq", "dq dq = 0", dq.wedge(&dq).norm(), 0.0, 1));
    rep.push(Check::bound("dp_dp", "dp dp = 0", dp.wedge(&dp).norm(), 0.0, 1));
    rep.push(Check::bound(
        "dq_dp_anticommute",
        "dq dp + dp dq = 0",
        dq.wedge(&dp).add(&dp.wedge(&dq)).unwrap().norm(),
        0.0,
        1,
    ));
    rep
}

/// `d^2 = 0`, graded Leibniz and `d1 = 0` on random forms of polynomial degree `<= degree`.
pub fn axiom_suite(hbar: f64, samples: usize, seed: u64, degree: u32, tol: f64) -> Report {
    let rows: Vec<(f64, f64)> = crate::par::map_range(samples, |i| {
        let mut rng = random::case_rng(seed, i as u64);
        let r = i % 2;
        let w = random_form(&mut rng, hbar, r, degree);
        let d2 = relative(w.d().d().norm(), w.norm());
        let (ra, rb) = [(0usize, 0usize), (0, 1), (1, 0)][i % 3];
        let a = random_form(&mut rng, hbar, ra, degree);
        let b = random_form(&mut rng, hbar, rb, degree);
        let lhs = a.wedge(&b).d();
        let sign = if ra % 2 == 0 { 1.0 } else { -1.0 };
        let rhs = a.d().wedge(&b).add(&a.wedge(&b.d()).scale(C64::new(sign, 0.0))).unwrap();
        let scale = (a.norm() * b.norm()).max(f64::MIN_POSITIVE);
        (d2, relative(lhs.distance(&rhs).unwrap(), scale))
    });
    let mut rep = Report::new("Weyl calculus axioms");
    rep.push(Check::bound("d_squared", "d d w = 0", rows.iter().map(|r| r.0).fold(0.0, f64::max), tol, samples));
    rep.push(Check::bound(
        "leibniz",
        "d(w w') = (dw) w' + (-1)^r w dw'",
        rows.iter().map(|r| r.1).fold(0.0, f64::max),
        tol,
        samples,
    ));
    rep.push(Check::bound("d_one", "d1 = 0", WeylForm::function(WeylElement::one(hbar)).d().norm(), tol, 1));
    rep
}
