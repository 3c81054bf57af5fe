//! The two-parameter (a, b) calculus on functions of (t, x) with imaginary shifts.
//!
//! Coordinates are ordered (t, x), so `dt` is word `0b01` and `dx` is `0b10`.
//! Coefficients must be exponential sums, since `C_x` and `S_x` shift x by `+-ia`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::coeff::{Coefficient, ExpSum};
use crate::error::{Error, Result};
use crate::form::{Calculus, Form, RightForm, Word};
use crate::random::{self, CaseRng, ExpSumShape};
use crate::report::{relative, Check, Report};

pub const DT: Word = 0b01;
pub const DX: Word = 0b10;
const T: usize = 0;
const X: usize = 1;

fn re(v: f64) -> C64 {
    C64::new(v, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftCalculusSpec {
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShiftCalculus {
    a: f64,
    b: f64,
    theta: f64,
    kappa: f64,
    sigma: f64,
}

impl ShiftCalculus {
    pub fn new(spec: ShiftCalculusSpec) -> Result<ShiftCalculus> {
        if spec.a == 0.0 || spec.b == 0.0 || !spec.a.is_finite() || !spec.b.is_finite() || !spec.theta.is_finite() {
            return Err(Error::InvalidParameter("a and b must be nonzero and finite".into()));
        }
        Ok(ShiftCalculus {
            a: spec.a,
            b: spec.b,
            theta: spec.theta,
            kappa: spec.theta.cos(),
            sigma: spec.theta.sin(),
        })
    }

    pub fn spec(&self) -> ShiftCalculusSpec {
        ShiftCalculusSpec { a: self.a, b: self.b, theta: self.theta }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `C_x f = (f(x + ia) + f(x - ia)) / 2`.
    pub fn cx(&self, f: &ExpSum) -> ExpSum {
        (&f.shift(X, C64::new(0.0, self.a)) + &f.shift(X, C64::new(0.0, -self.a))).scale(re(0.5))
    }

    /// `S_x f = (f(x + ia) - f(x - ia)) / 2i`.
    pub fn sx(&self, f: &ExpSum) -> ExpSum {
        (&f.shift(X, C64::new(0.0, self.a)) - &f.shift(X, C64::new(0.0, -self.a))).scale(C64::new(0.0, -0.5))
    }

    /// `f_{t+h}`.
    pub fn tshift(&self, f: &ExpSum, h: f64) -> ExpSum {
        f.shift(T, re(h))
    }

    /// `cos(a d_x - theta) = kappa C_x + sigma S_x`.
    pub fn cos_minus(&self, f: &ExpSum) -> ExpSum {
        &self.cx(f).scale(re(self.kappa)) + &self.sx(f).scale(re(self.sigma))
    }

    /// `cos(a d_x + theta) = kappa C_x - sigma S_x`.
    pub fn cos_plus(&self, f: &ExpSum) -> ExpSum {
        &self.cx(f).scale(re(self.kappa)) - &self.sx(f).scale(re(self.sigma))
    }

    /// `sin(a d_x - theta) = kappa S_x - sigma C_x`.
    pub fn sin_minus(&self, f: &ExpSum) -> ExpSum {
        &self.sx(f).scale(re(self.kappa)) - &self.cx(f).scale(re(self.sigma))
    }

    pub fn d_ab(&self, f: &ExpSum) -> Result<Form> {
        self.d_function(&Coefficient::Exp(f.clone()))
    }

    /// `dt f`, `dx f` rewritten in left normal form.
    pub fn move_to_left(&self, basis: Word, f: &ExpSum) -> Result<Form> {
        self.move_left_word(basis, &Coefficient::Exp(f.clone()))
    }

    /// `f dt`, `f dx` rewritten in right normal form.
    pub fn move_to_right(&self, f: &ExpSum, basis: Word) -> Result<RightForm> {
        self.move_right_word(&Coefficient::Exp(f.clone()), basis)
    }

    fn check_vars(f: &ExpSum) -> Result<()> {
        if f.nvars() != 2 {
            return Err(Error::DimensionMismatch(2, f.nvars()));
        }
        Ok(())
    }

    fn function(f: ExpSum) -> Form {
        Form::function(2, Coefficient::Exp(f))
    }
}

impl Calculus for ShiftCalculus {
    fn dim(&self) -> usize {
        2
    }

    fn move_left(&self, mu: usize, f: &Coefficient) -> Result<Vec<(usize, Coefficient)>> {
        let f = f.as_exp()?;
        Self::check_vars(f)?;
        let fs = self.tshift(f, self.b);
        let (c, s) = (self.cx(&fs), self.sx(&fs));
        let r = self.b / self.a;
        Ok(match mu {
            T => vec![(T, c.into()), (X, s.scale(re(r)).into())],
            _ => vec![(T, s.scale(re(-1.0 / r)).into()), (X, c.into())],
        })
    }

    fn move_right(&self, mu: usize, f: &Coefficient) -> Result<Vec<(usize, Coefficient)>> {
        let f = f.as_exp()?;
        Self::check_vars(f)?;
        let fs = self.tshift(f, -self.b);
        let (c, s) = (self.cx(&fs), self.sx(&fs));
        let r = self.b / self.a;
        Ok(match mu {
            T => vec![(T, c.into()), (X, s.scale(re(-r)).into())],
            _ => vec![(T, s.scale(re(1.0 / r)).into()), (X, c.into())],
        })
    }

    fn partials(&self, f: &Coefficient) -> Result<Vec<(usize, Coefficient)>> {
        let f = f.as_exp()?;
        Self::check_vars(f)?;
        let fs = self.tshift(f, self.b);
        Ok(vec![
            (T, (&self.cx(&fs) - f).scale(re(1.0 / self.b)).into()),
            (X, self.sx(&fs).scale(re(1.0 / self.a)).into()),
        ])
    }

    /// `*dt = sigma dt + (b/a) kappa dx`, `*dx = (a/b) kappa dt - sigma dx`;
    /// on grades 0 and 2 the convention `*1 = dt dx`, `*(dt dx) = 1`.
    fn star_basis(&self, w: Word) -> Vec<(Word, C64)> {
        let r = self.b / self.a;
        match w {
            0 => vec![(DT | DX, re(1.0))],
            DT => vec![(DT, re(self.sigma)), (DX, re(r * self.kappa))],
            DX => vec![(DT, re(self.kappa / r)), (DX, re(-self.sigma))],
            _ => vec![(0, re(1.0))],
        }
    }
}

/// The residual of the field equation for `a = e^{-u}` with affine `u`.
#[derive(Clone, Debug)]
pub struct FieldResidualAb {
    /// `e^{u} cos(a d_x - theta) e^{-u(t+b)} - e^{-u} cos(a d_x - theta) e^{u(t-b)}`.
    pub displayed: ExpSum,
    /// `a b (d*A)_{dt dx}` computed by the calculus from `A = e^{u} d e^{-u}`.
    pub machinery: ExpSum,
    /// `e^{u} cos(a d_x + theta) e^{-u(t+b)} - e^{-u} cos(a d_x - theta) e^{u(t-b)}`,
    /// which equals `machinery` identically.
    pub corrected: ExpSum,
}

impl ShiftCalculus {
    /// `a b (d*A)_{dt dx}` for `A = g df`.
    pub fn field_coefficient(&self, f: &ExpSum, g: &ExpSum) -> Result<ExpSum> {
        let a_form = self.wedge(&Self::function(g.clone()), &self.d_ab(f)?)?;
        let dsa = self.d(&self.star(&a_form)?)?;
        Ok(match dsa.component(DT | DX) {
            Some(c) => c.as_exp()?.scale(re(self.a * self.b)),
            None => ExpSum::zero(2),
        })
    }

    /// `g cos(a d_x + theta) f_{t+b} - f cos(a d_x - theta) g_{t-b}`.
    pub fn corrected_expression(&self, f: &ExpSum, g: &ExpSum) -> ExpSum {
        &(g * &self.cos_plus(&self.tshift(f, self.b))) - &(f * &self.cos_minus(&self.tshift(g, -self.b)))
    }

    pub fn displayed_expression(&self, f: &ExpSum, g: &ExpSum) -> ExpSum {
        &(g * &self.cos_minus(&self.tshift(f, self.b))) - &(f * &self.cos_minus(&self.tshift(g, -self.b)))
    }

    pub fn field_residual_report(&self, u: &ExpSum) -> Result<FieldResidualAb> {
        Self::check_vars(u)?;
        let (c0, lin) = u.affine_parts().ok_or(Error::NotLinear)?;
        let minus = ExpSum::exp(2, (-c0).exp(), &lin.iter().map(|l| -l).collect::<Vec<_>>());
        let plus = ExpSum::exp(2, c0.exp(), &lin);
        Ok(FieldResidualAb {
            displayed: self.displayed_expression(&minus, &plus),
            machinery: self.field_coefficient(&minus, &plus)?,
            corrected: self.corrected_expression(&minus, &plus),
        })
    }

    /// The displayed residual for `u` affine in (t, x).
    pub fn field_residual_ab(&self, u: &ExpSum) -> Result<ExpSum> {
        Ok(self.field_residual_report(u)?.displayed)
    }

    /// `e^{-r b} (cos(a p + theta) - cos(a p - theta))` for `u = p x + r t`.
    pub fn field_residual_closed_form(&self, p: f64, r: f64) -> f64 {
        (-r * self.b).exp() * ((self.a * p + self.theta).cos() - (self.a * p - self.theta).cos())
    }

    /// Checks of the two displayed forms of `A = g df` and of `*A`, with `f g = 1`.
    pub fn derivation_check_a(&self, f: &ExpSum, g: &ExpSum, tol: f64) -> Result<Report> {
        Self::check_vars(f)?;
        Self::check_vars(g)?;
        let one = ExpSum::constant(2, re(1.0));
        let fg = f * g;
        let dev = relative(fg.distance(&one), 1.0);
        if dev > 1e-12 {
            return Err(Error::NotReciprocal(dev));
        }
        let (a, b) = (self.a, self.b);
        let a_form = self.wedge(&Self::function(g.clone()), &self.d_ab(f)?)?;
        let fp = self.tshift(f, b);
        let gm = self.tshift(g, -b);
        let left = Form::from_components(
            2,
            1,
            [
                (DT, (&(g * &self.cx(&fp)) - &one).scale(re(1.0 / b)).into()),
                (DX, (g * &self.sx(&fp)).scale(re(1.0 / a)).into()),
            ],
        )?;
        let right = RightForm::from_components(
            2,
            1,
            [
                (DT, (&(f * &self.cx(&gm)) - &one).scale(re(1.0 / b)).into()),
                (DX, (f * &self.sx(&gm)).scale(re(-1.0 / a)).into()),
            ],
        )?;
        let right_left = self.to_left(&right)?;
        let star_a = self.star(&a_form)?;
        let star_expect = Form::from_components(
            2,
            1,
            [
                (DT, (&one.scale(re(self.sigma)) + &(f * &self.sin_minus(&gm))).scale(re(-1.0 / b)).into()),
                (DX, (&(f * &self.cos_minus(&gm)) - &one.scale(re(self.kappa))).scale(re(1.0 / a)).into()),
            ],
        )?;
        let scale = a_form.norm().max(1.0);
        let mut rep = Report::new("(a,b) derivation of A and *A");
        rep.push(Check::bound(
            "A_left_form",
            "g df = (1/b)(g C f(t+b) - 1) dt + (1/a) g S f(t+b) dx",
            relative(a_form.distance(&left), scale),
            tol,
            1,
        ));
        rep.push(Check::bound(
            "A_right_form",
            "g df = dt (1/b)(f C g(t-b) - 1) - dx (1/a) f S g(t-b)",
            relative(a_form.distance(&right_left), scale),
            tol,
            1,
        ));
        rep.push(Check::bound(
            "star_A",
            "*A = -(1/b)[sin(theta) + f sin(a d - theta) g(t-b)] dt + (1/a)[f cos(a d - theta) g(t-b) - cos(theta)] dx",
            relative(star_a.distance(&star_expect), star_a.norm().max(1.0)),
            tol,
            1,
        ));
        Ok(rep)
    }

    /// `[dz, z] = 2 dz` and `[dz, zbar] = 0` for `z = t/b + i x/a`.
    pub fn complex_coordinate_check(&self) -> Result<(f64, f64)> {
        let t = ExpSum::coordinate(2, T).scale(re(1.0 / self.b));
        let x = ExpSum::coordinate(2, X).scale(C64::new(0.0, 1.0 / self.a));
        let z = &t + &x;
        let zbar = &t - &x;
        let dz = self.d_ab(&z)?;
        let comm = |h: &ExpSum| -> Result<Form> {
            let hf = Self::function(h.clone());
            self.wedge(&dz, &hf)?.sub(&self.wedge(&hf, &dz)?)
        };
        let r1 = comm(&z)?.distance(&dz.scale(re(2.0)));
        let r2 = comm(&zbar)?.norm();
        Ok((r1, r2))
    }
}

/// Derivation checks of `A` and `*A` for reciprocal exponentials, and the
/// field residual of affine profiles against its closed form.
pub fn derive_suite(calc: &ShiftCalculus, tol: f64) -> Result<Report> {
    let mut rep = Report::new("(a,b) calculus derivation");
    let mut worst = [0.0f64; 3];
    let profiles = [(0.0, 0.0), (0.9, -0.4), (1.7, 0.3), (-0.6, 0.8)];
    for (k, (lam, mu)) in [(0.4, 0.0), (0.3, -0.2), (-1.1, 0.5)].into_iter().enumerate() {
        let f = ExpSum::exp(2, re(1.0), &[re(mu), re(lam)]);
        let g = f.reciprocal().ok_or(Error::NoReciprocal)?;
        for mut ch in calc.derivation_check_a(&f, &g, tol)?.checks {
            ch.name = format!("{}_{k}", ch.name);
            rep.push(ch);
        }
    }
    for (p, r) in profiles {
        let u = &ExpSum::coordinate(2, 1).scale(re(p)) + &ExpSum::coordinate(2, 0).scale(re(r));
        let res = calc.field_residual_report(&u)?;
        let closed = ExpSum::constant(2, re(calc.field_residual_closed_form(p, r)));
        worst[0] = worst[0].max(res.displayed.distance(&closed));
        worst[1] = worst[1].max(res.machinery.norm());
        worst[2] = worst[2].max(res.corrected.norm());
    }
    rep.push(Check::bound(
        "field_residual_closed_form",
        "displayed residual for u = p x + r t equals e^{-rb}[cos(ap + theta) - cos(ap - theta)]",
        worst[0],
        tol,
        profiles.len(),
    ));
    rep.push(Check::bound("field_machinery_affine", "d*A = 0 for affine u", worst[1], tol, profiles.len()));
    rep.push(Check::bound(
        "field_corrected_affine",
        "g cos(a d + theta) f(t+b) - f cos(a d - theta) g(t-b) = 0 for affine u",
        worst[2],
        tol,
        profiles.len(),
    ));
    Ok(rep)
}

pub fn random_form(rng: &mut CaseRng, grade: usize) -> Form {
    let shape = ExpSumShape::default();
    random::form(rng, 2, grade, |r| Coefficient::Exp(random::expsum(r, 2, &shape)))
}

/// The randomized identity suite of the (a,b) calculus.
pub fn identity_suite(calc: &ShiftCalculus, samples: usize, seed: u64, tol: f64) -> Result<Report> {
    let shape = ExpSumShape::default();
    let cases = crate::par::try_map_range(samples, |i| -> Result<[f64; 5]> {
        let mut rng = random::case_rng(seed, i as u64);
        let f = random::expsum(&mut rng, 2, &shape);
        let h = random::expsum(&mut rng, 2, &shape);
        let (cf, sf, ch, sh) = (calc.cx(&f), calc.sx(&f), calc.cx(&h), calc.sx(&h));
        let pyth = relative((&(&calc.cx(&cf) + &calc.sx(&sf)) - &f).norm(), f.norm());
        let fh = &f * &h;
        let cprod = &calc.cx(&fh) - &(&(&cf * &ch) - &(&sf * &sh));
        let sprod = &calc.sx(&fh) - &(&(&sf * &ch) + &(&cf * &sh));
        let scale = fh.norm().max(f.norm() * h.norm());
        // star star on basis forms with t-independent coefficients
        let mut rng2 = random::case_rng(seed ^ 0x5eed, i as u64);
        let w0 = random::expsum(&mut rng2, 2, &shape);
        let xonly = ExpSum::new(
            2,
            w0.terms()
                .iter()
                .map(|t| {
                    let mut t = t.clone();
                    t.powers[T] = 0;
                    t.freqs[T] = C64::new(0.0, 0.0);
                    t
                })
                .collect(),
        );
        let alpha = Form::from_components(2, 1, [(DT, xonly.clone().into()), (DX, xonly.scale(re(0.5)).into())])?;
        let ss = calc.star(&calc.star(&alpha)?)?;
        let star_star = relative(ss.distance(&alpha), alpha.norm());
        let a1 = random_form(&mut rng, 1);
        let b1 = random_form(&mut rng, 1);
        let ab = calc.wedge(&a1, &calc.star(&b1)?)?;
        let ba = calc.wedge(&b1, &calc.star(&a1)?)?;
        let symm = relative(ab.distance(&ba), ab.norm().max(ba.norm()));
        Ok([pyth, relative(cprod.norm(), scale), relative(sprod.norm(), scale), star_star, symm])
    })?;
    let max = |k: usize| cases.iter().map(|c| c[k]).fold(0.0, f64::max);
    let mut rep = Report::new("(a,b) calculus identities");
    rep.push(Check::bound("pythagoras", "C_x^2 f + S_x^2 f = f", max(0), tol, samples));
    rep.push(Check::bound("c_product", "C_x(fh) = C_x f C_x h - S_x f S_x h", max(1), tol, samples));
    rep.push(Check::bound("s_product", "S_x(fh) = S_x f C_x h + C_x f S_x h", max(2), tol, samples));
    rep.push(Check::bound("star_star", "** w = w on 1-forms with t-independent coefficients", max(3), tol, samples));
    rep.push(Check::bound("star_symmetry", "a * b = b * a on 1-forms", max(4), tol, samples));
    let (r1, r2) = calc.complex_coordinate_check()?;
    rep.push(Check::bound("complex_coordinate", "[dz, z] = 2 dz and [dz, zbar] = 0", r1.max(r2), tol, 1));
    Ok(rep)
}
