//! Graded forms in left-coefficient normal form and the generic calculus engine.
//!
//! A differential word `dx^{i1} ... dx^{ir}` with `i1 < ... < ir` is stored as
//! a bitmask. A calculus supplies how a single differential moves past a
//! coefficient in either direction, the partial derivatives in `df`, and the
//! Hodge operator on basis words. Everything else (d, wedge, star with its
//! covariance rule, the inverse star, scalar products) is derived here.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::coeff::{Coefficient, ExpSum};
use crate::error::{Error, Result};

pub type Word = u32;

pub fn grade_of(w: Word) -> usize {
    w.count_ones() as usize
}

pub fn indices(w: Word) -> Vec<usize> {
    (0..32).filter(|k| w & (1 << k) != 0).collect()
}

pub fn word_of(indices: &[usize]) -> Word {
    indices.iter().fold(0, |w, &k| w | (1 << k))
}

/// Normalize an ordered product of differentials. `None` if one repeats.
pub fn normalize(seq: &[usize]) -> Option<(f64, Word)> {
    let mut w: Word = 0;
    let mut sign = 1.0;
    for &k in seq {
        if w & (1 << k) != 0 {
            return None;
        }
        // number of already present indices greater than k
        if (w >> (k + 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        w |= 1 << k;
    }
    Some((sign, w))
}

/// Sign and word of the product `dx^I dx^J` of two normal-ordered words.
pub fn word_product(a: Word, b: Word) -> Option<(f64, Word)> {
    if a & b != 0 {
        return None;
    }
    let mut seq = indices(a);
    seq.extend(indices(b));
    normalize(&seq)
}

/// All increasing words of grade `r` in dimension `n`, in increasing order.
pub fn basis_words(n: usize, r: usize) -> Vec<Word> {
    (0..(1u32 << n)).filter(|w| grade_of(*w) == r).collect()
}

pub fn binomial(n: usize, r: usize) -> usize {
    if r > n {
        return 0;
    }
    (0..r).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// `sum_I f_I dx^I` with coefficients on the left.
#[derive(Clone, Debug, PartialEq)]
pub struct Form {
    dim: usize,
    grade: usize,
    comps: BTreeMap<Word, Coefficient>,
}

/// `sum_I dx^I r_I` with coefficients on the right.
#[derive(Clone, Debug, PartialEq)]
pub struct RightForm {
    dim: usize,
    grade: usize,
    comps: BTreeMap<Word, Coefficient>,
}

fn accumulate(map: &mut BTreeMap<Word, Coefficient>, w: Word, c: Coefficient) -> Result<()> {
    match map.remove(&w) {
        Some(prev) => {
            map.insert(w, prev.add_aligned(&c)?);
        }
        None => {
            map.insert(w, c);
        }
    }
    Ok(())
}

fn prune(map: BTreeMap<Word, Coefficient>) -> BTreeMap<Word, Coefficient> {
    map.into_iter().filter(|(_, c)| !c.is_zero()).collect()
}

macro_rules! form_common {
    ($t:ident) => {
        impl $t {
            pub fn zero(dim: usize, grade: usize) -> $t {
                $t { dim, grade, comps: BTreeMap::new() }
            }

            pub fn from_components(
                dim: usize,
                grade: usize,
                comps: impl IntoIterator<Item = (Word, Coefficient)>,
            ) -> Result<$t> {
                let mut map = BTreeMap::new();
                for (w, c) in comps {
                    if w >> dim != 0 {
                        return Err(Error::AxisOutOfRange { axis: 31 - w.leading_zeros() as usize, dim });
                    }
                    if grade_of(w) != grade {
                        return Err(Error::GradeMismatch { expected: grade, got: grade_of(w) });
                    }
                    accumulate(&mut map, w, c)?;
                }
                Ok($t { dim, grade, comps: prune(map) })
            }

            pub fn dim(&self) -> usize {
                self.dim
            }

            pub fn grade(&self) -> usize {
                self.grade
            }

            pub fn components(&self) -> &BTreeMap<Word, Coefficient> {
                &self.comps
            }

            pub fn component(&self, w: Word) -> Option<&Coefficient> {
                self.comps.get(&w)
            }

            pub fn is_zero(&self) -> bool {
                self.comps.values().all(|c| c.is_zero())
            }

            /// Maximum over components of the coefficient norm.
            pub fn norm(&self) -> f64 {
                self.comps.values().map(|c| c.norm()).fold(0.0, f64::max)
            }

            fn check(&self, other: &$t) -> Result<()> {
                if self.dim != other.dim {
                    return Err(Error::DimensionMismatch(self.dim, other.dim));
                }
                if self.grade != other.grade && !self.comps.is_empty() && !other.comps.is_empty() {
                    return Err(Error::GradeMismatch { expected: self.grade, got: other.grade });
                }
                Ok(())
            }

            pub fn add(&self, other: &$t) -> Result<$t> {
                self.check(other)?;
                let grade = if self.comps.is_empty() { other.grade } else { self.grade };
                let mut map = self.comps.clone();
                for (w, c) in &other.comps {
                    accumulate(&mut map, *w, c.clone())?;
                }
                Ok($t { dim: self.dim, grade, comps: prune(map) })
            }

            pub fn scale(&self, c: C64) -> $t {
                $t {
                    dim: self.dim,
                    grade: self.grade,
                    comps: prune(self.comps.iter().map(|(w, f)| (*w, f.scale(c))).collect()),
                }
            }

            pub fn neg(&self) -> $t {
                self.scale(C64::new(-1.0, 0.0))
            }

            pub fn sub(&self, other: &$t) -> Result<$t> {
                self.add(&other.neg())
            }

            /// Norm of the difference; infinite if the two cannot be compared.
            pub fn distance(&self, other: &$t) -> f64 {
                self.sub(other).map(|d| d.norm()).unwrap_or(f64::INFINITY)
            }
        }
    };
}

form_common!(Form);
form_common!(RightForm);

impl Form {
    pub fn function(dim: usize, f: Coefficient) -> Form {
        Form::from_components(dim, 0, [(0, f)]).expect("grade 0")
    }

    pub fn basis(dim: usize, w: Word, f: Coefficient) -> Form {
        Form::from_components(dim, grade_of(w), [(w, f)]).expect("basis word")
    }

    /// Grade-0 coefficient, or `None` for the empty form.
    pub fn scalar(&self) -> Option<&Coefficient> {
        self.comps.get(&0)
    }
}

/// A differential calculus over a commutative coefficient algebra.
pub trait Calculus: Sync {
    fn dim(&self) -> usize;

    /// `dx^mu * f` as a left-normal sum `sum_nu g_nu dx^nu`.
    fn move_left(&self, mu: usize, f: &Coefficient) -> Result<Vec<(usize, Coefficient)>>;

    /// `f * dx^mu` as a right-normal sum `sum_nu dx^nu g_nu`.
    fn move_right(&self, mu: usize, f: &Coefficient) -> Result<Vec<(usize, Coefficient)>>;

    /// Components of `df = sum_mu (d_mu f) dx^mu`.
    fn partials(&self, f: &Coefficient) -> Result<Vec<(usize, Coefficient)>>;

    /// Hodge operator on a basis word, as constant multiples of basis words.
    fn star_basis(&self, w: Word) -> Vec<(Word, C64)>;

    fn check_form(&self, w: &Form) -> Result<()> {
        if w.dim() != self.dim() {
            return Err(Error::DimensionMismatch(self.dim(), w.dim()));
        }
        Ok(())
    }

    /// `dx^I * g` as a left-normal form.
    fn move_left_word(&self, word: Word, g: &Coefficient) -> Result<Form> {
        let mut terms: Vec<(Vec<usize>, Coefficient)> = vec![(Vec::new(), g.clone())];
        for mu in indices(word).into_iter().rev() {
            let mut next = Vec::new();
            for (seq, h) in terms {
                for (nu, h2) in self.move_left(mu, &h)? {
                    let mut s = Vec::with_capacity(seq.len() + 1);
                    s.push(nu);
                    s.extend_from_slice(&seq);
                    next.push((s, h2));
                }
            }
            terms = next;
        }
        let mut map = BTreeMap::new();
        for (seq, h) in terms {
            if let Some((sign, w)) = normalize(&seq) {
                accumulate(&mut map, w, h.scale(C64::new(sign, 0.0)))?;
            }
        }
        Form::from_components(self.dim(), grade_of(word), map)
    }

    /// `g * dx^I` as a right-normal form.
    fn move_right_word(&self, g: &Coefficient, word: Word) -> Result<RightForm> {
        let mut terms: Vec<(Vec<usize>, Coefficient)> = vec![(Vec::new(), g.clone())];
        for mu in indices(word) {
            let mut next = Vec::new();
            for (seq, h) in terms {
                for (nu, h2) in self.move_right(mu, &h)? {
                    let mut s = seq.clone();
                    s.push(nu);
                    next.push((s, h2));
                }
            }
            terms = next;
        }
        let mut map = BTreeMap::new();
        for (seq, h) in terms {
            if let Some((sign, w)) = normalize(&seq) {
                accumulate(&mut map, w, h.scale(C64::new(sign, 0.0)))?;
            }
        }
        RightForm::from_components(self.dim(), grade_of(word), map)
    }

    fn to_right(&self, w: &Form) -> Result<RightForm> {
        self.check_form(w)?;
        let mut out = RightForm::zero(self.dim(), w.grade());
        for (word, f) in w.components() {
            out = out.add(&self.move_right_word(f, *word)?)?;
        }
        Ok(out)
    }

    fn to_left(&self, w: &RightForm) -> Result<Form> {
        let mut out = Form::zero(self.dim(), w.grade());
        for (word, f) in w.components() {
            out = out.add(&self.move_left_word(*word, f)?)?;
        }
        Ok(out)
    }

    fn d(&self, w: &Form) -> Result<Form> {
        self.check_form(w)?;
        let mut map = BTreeMap::new();
        for (word, f) in w.components() {
            for (nu, g) in self.partials(f)? {
                if let Some((sign, w2)) = word_product(1 << nu, *word) {
                    accumulate(&mut map, w2, g.scale(C64::new(sign, 0.0)))?;
                }
            }
        }
        Form::from_components(self.dim(), w.grade() + 1, map)
    }

    fn d_function(&self, f: &Coefficient) -> Result<Form> {
        self.d(&Form::function(self.dim(), f.clone()))
    }

    fn wedge(&self, a: &Form, b: &Form) -> Result<Form> {
        self.check_form(a)?;
        self.check_form(b)?;
        let mut map = BTreeMap::new();
        for (i, f) in a.components() {
            for (j, g) in b.components() {
                let moved = self.move_left_word(*i, g)?;
                for (k, h) in moved.components() {
                    if let Some((sign, w)) = word_product(*k, *j) {
                        accumulate(&mut map, w, f.mul_aligned(h)?.scale(C64::new(sign, 0.0)))?;
                    }
                }
            }
        }
        Form::from_components(self.dim(), a.grade() + b.grade(), map)
    }

    /// `star(dx^I r) = r star(dx^I)` after moving coefficients to the right.
    fn star(&self, w: &Form) -> Result<Form> {
        let right = self.to_right(w)?;
        let mut map = BTreeMap::new();
        for (k, r) in right.components() {
            for (l, c) in self.star_basis(*k) {
                accumulate(&mut map, l, r.scale(c))?;
            }
        }
        Form::from_components(self.dim(), self.dim() - w.grade(), map)
    }

    /// Inverse Hodge operator on basis words of grade `r`, by matrix inversion.
    fn star_inv_basis(&self, r: usize) -> Result<BTreeMap<Word, Vec<(Word, C64)>>> {
        let n = self.dim();
        let src = basis_words(n, r);
        let dst = basis_words(n, n - r);
        let m = src.len();
        let mut mat = DMatrix::<C64>::zeros(m, m);
        for (col, w) in src.iter().enumerate() {
            for (l, c) in self.star_basis(*w) {
                let row = dst.iter().position(|x| *x == l).expect("star lands in complementary grade");
                mat[(row, col)] += c;
            }
        }
        let inv = mat.try_inverse().ok_or_else(|| Error::InvalidParameter("Hodge operator is not invertible".into()))?;
        let mut out = BTreeMap::new();
        for (col, w) in dst.iter().enumerate() {
            let img = (0..m)
                .filter(|row| inv[(*row, col)].norm() > 0.0)
                .map(|row| (src[row], inv[(row, col)]))
                .collect();
            out.insert(*w, img);
        }
        Ok(out)
    }

    /// `star_inv(f dx^I) = star_inv(dx^I) f`, brought back to left normal form.
    fn star_inv(&self, w: &Form) -> Result<Form> {
        self.check_form(w)?;
        let n = self.dim();
        let table = self.star_inv_basis(n - w.grade())?;
        let mut out = Form::zero(n, n - w.grade());
        for (word, f) in w.components() {
            for (l, c) in &table[word] {
                out = out.add(&self.move_left_word(*l, f)?.scale(*c))?;
            }
        }
        Ok(out)
    }

    /// `(alpha, beta) = star_inv(alpha star(beta))` for 1-forms.
    fn scalar_product(&self, alpha: &Form, beta: &Form) -> Result<Coefficient> {
        for f in [alpha, beta] {
            if f.grade() != 1 && !f.is_zero() {
                return Err(Error::GradeMismatch { expected: 1, got: f.grade() });
            }
        }
        let s = self.star_inv(&self.wedge(alpha, &self.star(beta)?)?)?;
        Ok(match s.scalar() {
            Some(c) => c.clone(),
            None => alpha
                .components()
                .values()
                .chain(beta.components().values())
                .next()
                .map(|c| c.zero_like())
                .unwrap_or_else(|| Coefficient::Exp(ExpSum::zero(self.dim()))),
        })
    }

    /// Grade constants of star∘star measured on each basis word of grade `r`.
    fn star_star_on_basis(&self, r: usize) -> Vec<(Word, Vec<(Word, C64)>)> {
        let n = self.dim();
        basis_words(n, r)
            .into_iter()
            .map(|w| {
                let mut acc: BTreeMap<Word, C64> = BTreeMap::new();
                for (k, c) in self.star_basis(w) {
                    for (l, c2) in self.star_basis(k) {
                        *acc.entry(l).or_default() += c * c2;
                    }
                }
                (w, acc.into_iter().filter(|(_, c)| c.norm() > 0.0).collect())
            })
            .collect()
    }

    /// The constant eps_r with star∘star = eps_r on basis words of grade `r`,
    /// or `None` if it is not a multiple of the identity there.
    fn epsilon(&self, r: usize) -> Option<C64> {
        let mut eps: Option<C64> = None;
        for (w, img) in self.star_star_on_basis(r) {
            match img.as_slice() {
                [(l, c)] if *l == w => match eps {
                    None => eps = Some(*c),
                    Some(e) if (e - c).norm() <= 1e-12 * e.norm().max(1.0) => {}
                    Some(_) => return None,
                },
                _ => return None,
            }
        }
        eps
    }
}
