//! Seeded generators for randomized suites.
//!
//! Every case draws from its own ChaCha stream, `case_rng(seed, index)`, so
//! results do not depend on how cases are scheduled across threads.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coeff::{Boundary, Coefficient, ExpSum, GridFunction, Term, Window};
use crate::form::{basis_words, Form};

pub type CaseRng = ChaCha8Rng;

pub fn case_rng(seed: u64, index: u64) -> CaseRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

pub fn complex(rng: &mut impl Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn grid(rng: &mut impl Rng, window: &Window, spacing: &[f64], boundary: &[Boundary]) -> GridFunction {
    let values = (0..window.len()).map(|_| complex(rng)).collect();
    GridFunction::new(window.clone(), spacing.to_vec(), boundary.to_vec(), values).expect("valid grid")
}

/// Shape of random quasi-exponential sums.
#[derive(Clone, Debug)]
pub struct ExpSumShape {
    pub terms: usize,
    pub max_power: u32,
    /// Frequencies are `(j + i k) * step` with |j|, |k| <= `freq_range`.
    pub freq_range: i32,
    pub freq_step: f64,
}

impl Default for ExpSumShape {
    fn default() -> Self {
        ExpSumShape { terms: 3, max_power: 1, freq_range: 2, freq_step: 0.25 }
    }
}

pub fn expsum(rng: &mut impl Rng, nvars: usize, shape: &ExpSumShape) -> ExpSum {
    let terms = (0..shape.terms)
        .map(|_| Term {
            coeff: complex(rng),
            powers: (0..nvars).map(|_| rng.random_range(0..=shape.max_power)).collect(),
            freqs: (0..nvars)
                .map(|_| {
                    let j = rng.random_range(-shape.freq_range..=shape.freq_range) as f64;
                    let k = rng.random_range(-shape.freq_range..=shape.freq_range) as f64;
                    C64::new(j, k) * shape.freq_step
                })
                .collect(),
        })
        .collect();
    ExpSum::new(nvars, terms)
}

/// Random form of the given grade with every basis component drawn by `coeff`.
pub fn form<R: Rng>(rng: &mut R, dim: usize, grade: usize, mut coeff: impl FnMut(&mut R) -> Coefficient) -> Form {
    let comps: Vec<_> = basis_words(dim, grade).into_iter().map(|w| (w, coeff(rng))).collect();
    Form::from_components(dim, grade, comps).expect("basis words")
}
