//! Ground valued fields: iterated Laurent series contexts over `Q` or `F_p`.
//!
//! A [`GroundField`] fixes the coefficient field, the rank `n` of the value
//! group `Z^n`, and the variable names.  Variable `j` carries value `e_j`,
//! so the first listed variable is the most significant one: the context
//! for `Q(x)(y)` with `val(x) = (0,1) < val(y) = (1,0)` lists `y` first.
//!
//! Rational function expressions are normalised to an exact fraction of
//! polynomials; values are computed exactly from the fraction and expansion
//! is a single long division, so requested precision is always honoured.

pub mod base;
pub mod parser;
pub mod series;

pub use base::{BaseField, FieldElem};
pub use parser::{parse_rf, RFExpr};
pub use series::FieldSeries;

use rand::Rng;

use crate::ogroup::GroupElem;
use crate::{Error, Result};

/// Largest exponent accepted by expression expansion.
const MAX_POW: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundField {
    base: BaseField,
    rank: usize,
    vars: Vec<String>,
}

impl GroundField {
    pub fn new(base: BaseField, vars: &[&str]) -> Self {
        GroundField {
            base,
            rank: vars.len(),
            vars: vars.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// `Q(x)(y)` with `val(y) = (1,0)` dominant.
    pub fn rationals_xy() -> Self {
        Self::new(BaseField::Rationals, &["y", "x"])
    }

    /// `F_3((x))` with `val(x) = 1`.
    pub fn laurent_f3() -> Self {
        Self::new(BaseField::Prime(3), &["x"])
    }

    /// `Q(x)` with `val(x) = 1`.
    pub fn rationals_x() -> Self {
        Self::new(BaseField::Rationals, &["x"])
    }

    /// Rank one context over `Q` in the formal variable `t`.
    pub fn rationals_t() -> Self {
        Self::new(BaseField::Rationals, &["t"])
    }

    pub fn base(&self) -> BaseField {
        self.base
    }

    /// Presentation name, e.g. `Q(y,x)` or `F_3(x)`.
    pub fn name(&self) -> String {
        format!("{}({})", self.base, self.vars.join(","))
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn var_exponent(&self, j: usize) -> GroupElem {
        let mut v = vec![0i64; self.rank];
        v[j] = 1;
        GroupElem::Finite(v)
    }

    pub fn zero_series(&self) -> FieldSeries {
        FieldSeries::zero(self.base, self.rank)
    }

    pub fn one_series(&self) -> FieldSeries {
        FieldSeries::one(self.base, self.rank)
    }

    pub fn monomial(&self, gamma: GroupElem, c: FieldElem) -> FieldSeries {
        FieldSeries::monomial(self.base, gamma, c)
    }

    pub fn parse(&self, text: &str) -> Result<RFExpr> {
        parse_rf(text, &self.vars)
    }

    /// Exact fraction of polynomials equal to `e`; the denominator is a
    /// nonzero polynomial.
    pub fn normalize(&self, e: &RFExpr) -> Result<(FieldSeries, FieldSeries)> {
        match e {
            RFExpr::Lit(n) => Ok((
                FieldSeries::constant(self.base, self.rank, self.base.from_i64(*n as i64)),
                self.one_series(),
            )),
            RFExpr::Var(j) => Ok((
                self.monomial(self.var_exponent(*j), self.base.one()),
                self.one_series(),
            )),
            RFExpr::Add(a, b) => {
                let (na, da) = self.normalize(a)?;
                let (nb, db) = self.normalize(b)?;
                Ok((na.mul(&db).add(&nb.mul(&da)), da.mul(&db)))
            }
            RFExpr::Sub(a, b) => {
                let (na, da) = self.normalize(a)?;
                let (nb, db) = self.normalize(b)?;
                Ok((na.mul(&db).sub(&nb.mul(&da)), da.mul(&db)))
            }
            RFExpr::Mul(a, b) => {
                let (na, da) = self.normalize(a)?;
                let (nb, db) = self.normalize(b)?;
                Ok((na.mul(&nb), da.mul(&db)))
            }
            RFExpr::Div(a, b) => {
                let (na, da) = self.normalize(a)?;
                let (nb, db) = self.normalize(b)?;
                if nb.is_exact_zero() {
                    return Err(Error::ZeroDivision);
                }
                Ok((na.mul(&db), da.mul(&nb)))
            }
            RFExpr::Pow(a, n) => {
                if *n > MAX_POW {
                    return Err(Error::Precondition(format!(
                        "exponent {n} exceeds the expansion limit {MAX_POW}"
                    )));
                }
                let (na, da) = self.normalize(a)?;
                let mut num = self.one_series();
                let mut den = self.one_series();
                for _ in 0..*n {
                    num = num.mul(&na);
                    den = den.mul(&da);
                }
                Ok((num, den))
            }
        }
    }

    /// Exact value of the rational function; `inf` for the zero function.
    pub fn val(&self, e: &RFExpr) -> Result<GroupElem> {
        let (num, den) = self.normalize(e)?;
        if num.is_exact_zero() {
            return Ok(GroupElem::Infinity);
        }
        Ok(num.val()?.sub(&den.val()?))
    }

    /// Expand `e` as a series of precision at least `pi` (exact when the
    /// division terminates).
    pub fn expand(&self, e: &RFExpr, pi: &GroupElem) -> Result<FieldSeries> {
        let (num, den) = self.normalize(e)?;
        num.div_to(&den, pi)
    }

    /// Convenience: parse then expand.
    pub fn expand_str(&self, text: &str, pi: &GroupElem) -> Result<FieldSeries> {
        let e = self.parse(text)?;
        self.expand(&e, pi)
    }

    /// Random nonzero coefficient with small numerator and denominator.
    pub fn sample_coeff<R: Rng>(&self, rng: &mut R) -> FieldElem {
        match self.base {
            BaseField::Rationals => {
                let num = loop {
                    let n = rng.gen_range(-3i64..=3);
                    if n != 0 {
                        break n;
                    }
                };
                let den = rng.gen_range(1i64..=3);
                self.base.ratio(num, den)
            }
            BaseField::Prime(p) => self.base.from_i64(rng.gen_range(1..p) as i64),
        }
    }

    /// Random exact series: one to three terms with exponents in a window
    /// of width four around zero in the least significant coordinates.
    pub fn sample_series<R: Rng>(&self, rng: &mut R) -> FieldSeries {
        let n_terms = rng.gen_range(1..=3usize);
        let mut terms = Vec::with_capacity(n_terms);
        for _ in 0..n_terms {
            let mut coords = vec![0i64; self.rank];
            for c in coords.iter_mut() {
                *c = rng.gen_range(-2i64..=2);
            }
            terms.push((GroupElem::Finite(coords), self.sample_coeff(rng)));
        }
        let s = FieldSeries::from_terms(self.base, self.rank, terms, GroupElem::Infinity);
        if s.is_exact_zero() {
            // collisions can cancel; fall back to a unit
            self.one_series()
        } else {
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn g2(a: i64, b: i64) -> GroupElem {
        GroupElem::from_coords(&[a, b])
    }

    #[test]
    fn geometric_expansion_in_two_variables() {
        let k = GroundField::rationals_xy();
        let s = k.expand_str("1/(1-x)", &g2(0, 4)).unwrap();
        assert_eq!(s.terms().len(), 4);
        for (j, (g, c)) in s.terms().iter().enumerate() {
            assert_eq!(g, &g2(0, j as i64));
            assert!(c.is_one());
        }
        assert_eq!(s.precision(), &g2(0, 4));
    }

    #[test]
    fn exact_quotient_stays_exact() {
        let k = GroundField::rationals_xy();
        let s = k.expand_str("(1-x^2)/(1-x)", &g2(0, 3)).unwrap();
        assert!(s.is_exact());
        assert_eq!(s.terms().len(), 2);
        assert_eq!(s.terms()[0].0, g2(0, 0));
        assert_eq!(s.terms()[1].0, g2(0, 1));
    }

    #[test]
    fn polynomials_are_exact() {
        let k = GroundField::rationals_xy();
        let s = k.expand_str("x+y", &g2(2, 0)).unwrap();
        assert!(s.is_exact());
        assert_eq!(s.terms().len(), 2);
        assert_eq!(s.terms()[0].0, g2(0, 1)); // x below y
        assert_eq!(s.terms()[1].0, g2(1, 0));
    }

    #[test]
    fn exact_values_of_rational_functions() {
        let k = GroundField::rationals_xy();
        let e = k.parse("y^2*(x+2)").unwrap();
        assert_eq!(k.val(&e).unwrap(), g2(2, 0));
        let e2 = k.parse("x/(y*y)").unwrap();
        assert_eq!(k.val(&e2).unwrap(), g2(-2, 1));
        let zero = k.parse("x-x").unwrap();
        assert_eq!(k.val(&zero).unwrap(), GroupElem::Infinity);
        // value of 1/(1-x) needs no expansion
        let e3 = k.parse("1/(1-x)").unwrap();
        assert_eq!(k.val(&e3).unwrap(), g2(0, 0));
    }

    #[test]
    fn zero_denominator_is_rejected() {
        let k = GroundField::rationals_xy();
        let e = k.parse("1/(x-x)").unwrap();
        assert!(matches!(k.expand(&e, &g2(0, 3)), Err(Error::ZeroDivision)));
        assert!(matches!(k.val(&e), Err(Error::ZeroDivision)));
    }

    #[test]
    fn prime_field_ground() {
        let k = GroundField::laurent_f3();
        let s = k.expand_str("1/(1+x)", &GroupElem::from_coords(&[4])).unwrap();
        // 1/(1+x) = 1 + 2x + x^2 + 2x^3 + ... over F_3
        let cs: Vec<String> = s.terms().iter().map(|(_, c)| c.to_string()).collect();
        assert_eq!(cs, vec!["1", "2", "1", "2"]);
    }

    #[test]
    fn expansion_agrees_with_fraction_at_higher_precision() {
        let k = GroundField::rationals_xy();
        let e = k.parse("(1+x+y)/(1-x)").unwrap();
        let coarse = k.expand(&e, &g2(0, 2)).unwrap();
        let fine = k.expand(&e, &g2(0, 5)).unwrap();
        // every known coefficient of the coarse expansion must match
        for (g, c) in coarse.terms() {
            assert_eq!(&fine.known_coeff(g).unwrap(), c);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let k = GroundField::rationals_xy();
        let mut r1 = ChaCha8Rng::seed_from_u64(42);
        let mut r2 = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            assert_eq!(k.sample_series(&mut r1), k.sample_series(&mut r2));
        }
    }
}
