//! Truncated Laurent series with exponents in `Z^n` (lexicographic order).
//!
//! A series stores finitely many terms below its precision.  Precision is a
//! single cut: `Infinity` means the element is exact (polynomial support),
//! a finite cut `pi` means the element is only known on exponents `< pi`.
//! Operations propagate the guaranteed output precision:
//!
//! * sums:      `min(pi_a, pi_b)`
//! * products:  `min(pi_a + v(b), pi_b + v(a))`
//!
//! so exact inputs never degrade.

use std::collections::BTreeMap;
use std::fmt;

use crate::ogroup::GroupElem;
use crate::{Error, Result};

use super::base::{BaseField, FieldElem};

/// Hard cap on long division steps; reaching it means the requested window
/// is not materialisable (infinitely many lattice points below the target).
pub const MAX_DIV_STEPS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSeries {
    field: BaseField,
    rank: usize,
    /// Strictly increasing exponents, nonzero coefficients, all `< precision`.
    terms: Vec<(GroupElem, FieldElem)>,
    /// `Infinity` = exact.
    precision: GroupElem,
}

impl FieldSeries {
    pub fn zero(field: BaseField, rank: usize) -> Self {
        FieldSeries { field, rank, terms: Vec::new(), precision: GroupElem::Infinity }
    }

    pub fn one(field: BaseField, rank: usize) -> Self {
        Self::monomial(field, GroupElem::zero(rank), field.one())
    }

    pub fn constant(field: BaseField, rank: usize, c: FieldElem) -> Self {
        Self::monomial(field, GroupElem::zero(rank), c)
    }

    pub fn monomial(field: BaseField, gamma: GroupElem, c: FieldElem) -> Self {
        let rank = gamma.rank().expect("monomial exponent must be finite");
        let terms = if c.is_zero() { Vec::new() } else { vec![(gamma, c)] };
        FieldSeries { field, rank, terms, precision: GroupElem::Infinity }
    }

    pub fn from_terms(
        field: BaseField,
        rank: usize,
        terms: Vec<(GroupElem, FieldElem)>,
        precision: GroupElem,
    ) -> Self {
        let mut map: BTreeMap<GroupElem, FieldElem> = BTreeMap::new();
        for (g, c) in terms {
            assert_eq!(g.rank(), Some(rank), "term exponent rank mismatch");
            let entry = map.entry(g).or_insert_with(|| field.zero());
            *entry = entry.add(&c);
        }
        let terms = map
            .into_iter()
            .filter(|(g, c)| !c.is_zero() && *g < precision)
            .collect();
        FieldSeries { field, rank, terms, precision }
    }

    pub fn field(&self) -> BaseField {
        self.field
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn terms(&self) -> &[(GroupElem, FieldElem)] {
        &self.terms
    }

    pub fn precision(&self) -> &GroupElem {
        &self.precision
    }

    pub fn is_exact(&self) -> bool {
        self.precision.is_infinite()
    }

    pub fn is_exact_zero(&self) -> bool {
        self.terms.is_empty() && self.is_exact()
    }

    /// Leading term, if any coefficient is known.
    pub fn leading(&self) -> Option<(&GroupElem, &FieldElem)> {
        self.terms.first().map(|(g, c)| (g, c))
    }

    /// Exact value: `inf` for the exact zero, error when no term is known
    /// but the element is truncated (it may or may not be zero).
    pub fn val(&self) -> Result<GroupElem> {
        match self.terms.first() {
            Some((g, _)) => Ok(g.clone()),
            None if self.is_exact() => Ok(GroupElem::Infinity),
            None => Err(Error::IndistinguishableFromZero {
                precision: self.precision.to_string(),
            }),
        }
    }

    /// Best known lower bound for the value.
    pub fn val_lower_bound(&self) -> GroupElem {
        match self.terms.first() {
            Some((g, _)) => g.clone(),
            None => self.precision.clone(),
        }
    }

    /// Coefficient at `gamma`; errors when `gamma` is at or beyond precision.
    pub fn known_coeff(&self, gamma: &GroupElem) -> Result<FieldElem> {
        if *gamma >= self.precision {
            return Err(Error::InsufficientPrecision(format!(
                "coefficient at {} requested, precision is {}",
                gamma, self.precision
            )));
        }
        Ok(self
            .terms
            .iter()
            .find(|(g, _)| g == gamma)
            .map(|(_, c)| c.clone())
            .unwrap_or_else(|| self.field.zero()))
    }

    pub fn truncate(&self, pi: &GroupElem) -> FieldSeries {
        let precision = self.precision.clone().min(pi.clone());
        let terms = self.terms.iter().filter(|(g, _)| *g < precision).cloned().collect();
        FieldSeries { field: self.field, rank: self.rank, terms, precision }
    }

    pub fn neg(&self) -> FieldSeries {
        FieldSeries {
            field: self.field,
            rank: self.rank,
            terms: self.terms.iter().map(|(g, c)| (g.clone(), c.neg())).collect(),
            precision: self.precision.clone(),
        }
    }

    pub fn add(&self, other: &FieldSeries) -> FieldSeries {
        assert_eq!(self.rank, other.rank, "rank mismatch in series addition");
        assert_eq!(self.field, other.field, "field mismatch in series addition");
        let precision = self.precision.clone().min(other.precision.clone());
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::from_terms(self.field, self.rank, terms, precision)
    }

    pub fn sub(&self, other: &FieldSeries) -> FieldSeries {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &FieldSeries) -> FieldSeries {
        assert_eq!(self.rank, other.rank, "rank mismatch in series product");
        assert_eq!(self.field, other.field, "field mismatch in series product");
        // unknown tail of one factor meets the leading term of the other
        let pa = precision_add(&self.precision, &other.val_lower_bound());
        let pb = precision_add(&other.precision, &self.val_lower_bound());
        let precision = pa.min(pb);
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (ga, ca) in &self.terms {
            for (gb, cb) in &other.terms {
                terms.push((ga.add(gb), ca.mul(cb)));
            }
        }
        Self::from_terms(self.field, self.rank, terms, precision)
    }

    /// Multiply by the monomial `c * t^gamma` (exact shift).
    pub fn shift(&self, gamma: &GroupElem, c: &FieldElem) -> FieldSeries {
        self.mul(&Self::monomial(self.field, gamma.clone(), c.clone()))
    }

    pub fn scalar_mul(&self, c: &FieldElem) -> FieldSeries {
        let mut out = self.clone();
        out.terms = out
            .terms
            .into_iter()
            .map(|(g, x)| (g, x.mul(c)))
            .filter(|(_, x)| !x.is_zero())
            .collect();
        out
    }

    /// Long division by increasing exponents: a quotient `q` with
    /// `v(self - q * den) >= target + v(den)`, so `q` agrees with
    /// `self / den` below `target` (tighter bounds from the operand
    /// precisions still apply).  Division that terminates with zero
    /// remainder on exact operands yields an exact quotient.
    pub fn div_to(&self, den: &FieldSeries, target: &GroupElem) -> Result<FieldSeries> {
        assert_eq!(self.rank, den.rank, "rank mismatch in series division");
        assert_eq!(self.field, den.field, "field mismatch in series division");
        let (vd, cd) = match den.leading() {
            Some((g, c)) => (g.clone(), c.clone()),
            None if den.is_exact() => return Err(Error::ZeroDivision),
            None => {
                return Err(Error::IndistinguishableFromZero {
                    precision: den.precision.to_string(),
                })
            }
        };
        if self.is_exact_zero() {
            return Ok(FieldSeries::zero(self.field, self.rank));
        }
        // guaranteed precision of the quotient
        let p_from_num = precision_sub(&self.precision, &vd);
        let p_from_den = match (&den.precision, &self.terms.first()) {
            (GroupElem::Infinity, _) => GroupElem::Infinity,
            (pi_d, Some((va, _))) => {
                // d(num/den) from the den tail: v >= v(num) + pi_d - 2 v(den)
                va.add(pi_d).sub(&vd).sub(&vd)
            }
            (pi_d, None) => self.precision.clone().min(pi_d.clone()).sub(&vd),
        };
        let mut q_precision = target.clone().min(p_from_num).min(p_from_den);

        let mut rem = self.clone();
        let mut q_terms: Vec<(GroupElem, FieldElem)> = Vec::new();
        let mut steps = 0usize;
        let mut exact = false;
        loop {
            match rem.leading() {
                None => {
                    if rem.is_exact() && self.is_exact() && den.is_exact() {
                        exact = true;
                    }
                    break;
                }
                Some((gr, cr)) => {
                    let qexp = gr.sub(&vd);
                    if !q_precision.is_infinite() && qexp >= q_precision {
                        break;
                    }
                    let qc = cr.div(&cd);
                    let mono = FieldSeries::monomial(self.field, qexp.clone(), qc.clone());
                    rem = rem.sub(&mono.mul(den));
                    q_terms.push((qexp, qc));
                    steps += 1;
                    if steps > MAX_DIV_STEPS {
                        return Err(Error::UnreachablePrecision { steps });
                    }
                }
            }
        }
        if exact {
            q_precision = GroupElem::Infinity;
        }
        Ok(Self::from_terms(self.field, self.rank, q_terms, q_precision))
    }

    /// Multiplicative inverse to the given precision.
    pub fn inv_to(&self, target: &GroupElem) -> Result<FieldSeries> {
        FieldSeries::one(self.field, self.rank).div_to(self, target)
    }
}

/// `a + b` where either side may be `inf` (absorbing).
fn precision_add(a: &GroupElem, b: &GroupElem) -> GroupElem {
    match (a, b) {
        (GroupElem::Infinity, _) | (_, GroupElem::Infinity) => GroupElem::Infinity,
        _ => a.add(b),
    }
}

/// `a - b` with `a` possibly `inf`; `b` finite.
fn precision_sub(a: &GroupElem, b: &GroupElem) -> GroupElem {
    match a {
        GroupElem::Infinity => GroupElem::Infinity,
        _ => a.sub(b),
    }
}

impl fmt::Display for FieldSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (g, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if g.is_zero() {
                write!(f, "{c}")?;
            } else if c.is_one() {
                write!(f, "t^{g}")?;
            } else {
                write!(f, "{c}*t^{g}")?;
            }
        }
        if first && self.is_exact() {
            write!(f, "0")?;
        } else if first && !self.is_exact() {
            write!(f, "O(t^{})", self.precision)?;
            return Ok(());
        }
        if !self.is_exact() {
            write!(f, " + O(t^{})", self.precision)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q() -> BaseField {
        BaseField::Rationals
    }

    fn g1(n: i64) -> GroupElem {
        GroupElem::from_coords(&[n])
    }

    fn poly(coeffs: &[(i64, i64)]) -> FieldSeries {
        // rank 1 polynomial from (exponent, integer coefficient) pairs
        FieldSeries::from_terms(
            q(),
            1,
            coeffs.iter().map(|(e, c)| (g1(*e), q().from_i64(*c))).collect(),
            GroupElem::Infinity,
        )
    }

    #[test]
    fn constructors_and_val() {
        let z = FieldSeries::zero(q(), 1);
        assert!(z.is_exact_zero());
        assert_eq!(z.val().unwrap(), GroupElem::Infinity);

        let a = poly(&[(0, 1), (1, 1)]);
        assert_eq!(a.val().unwrap(), g1(0));
        assert_eq!(a.terms().len(), 2);

        let truncated = a.truncate(&g1(1));
        assert_eq!(truncated.terms().len(), 1);
        assert!(truncated.val().is_ok());

        let unknown = FieldSeries::from_terms(q(), 1, vec![], g1(3));
        assert!(matches!(
            unknown.val(),
            Err(Error::IndistinguishableFromZero { .. })
        ));
        assert_eq!(unknown.val_lower_bound(), g1(3));
    }

    #[test]
    fn addition_cancels_exactly() {
        let a = poly(&[(0, 1), (2, 3)]);
        let b = poly(&[(0, -1), (2, -3)]);
        assert!(a.add(&b).is_exact_zero());
    }

    #[test]
    fn product_precision_follows_values() {
        // a = 1 + O(t^3), b = t^2 exact: product known below 3 + 2
        let a = FieldSeries::from_terms(q(), 1, vec![(g1(0), q().one())], g1(3));
        let b = FieldSeries::monomial(q(), g1(2), q().one());
        let p = a.mul(&b);
        assert_eq!(p.precision(), &g1(5));
        assert_eq!(p.terms().len(), 1);

        // exact times exact stays exact
        let e = poly(&[(0, 1), (1, 1)]).mul(&poly(&[(0, 1), (1, -1)]));
        assert!(e.is_exact());
        assert_eq!(e, poly(&[(0, 1), (2, -1)]));
    }

    #[test]
    fn geometric_division() {
        let one = FieldSeries::one(q(), 1);
        let den = poly(&[(0, 1), (1, -1)]); // 1 - t
        let quot = one.div_to(&den, &g1(4)).unwrap();
        assert_eq!(quot.precision(), &g1(4));
        let expected = FieldSeries::from_terms(
            q(),
            1,
            (0..4).map(|k| (g1(k), q().one())).collect(),
            g1(4),
        );
        assert_eq!(quot, expected);
    }

    #[test]
    fn exact_quotient_is_detected() {
        let num = poly(&[(0, 1), (2, -1)]); // 1 - t^2
        let den = poly(&[(0, 1), (1, -1)]); // 1 - t
        let quot = num.div_to(&den, &g1(10)).unwrap();
        assert!(quot.is_exact());
        assert_eq!(quot, poly(&[(0, 1), (1, 1)]));
    }

    #[test]
    fn division_by_zero_family() {
        let one = FieldSeries::one(q(), 1);
        assert!(matches!(
            one.div_to(&FieldSeries::zero(q(), 1), &g1(3)),
            Err(Error::ZeroDivision)
        ));
        let masked = FieldSeries::from_terms(q(), 1, vec![], g1(2));
        assert!(matches!(
            one.div_to(&masked, &g1(3)),
            Err(Error::IndistinguishableFromZero { .. })
        ));
    }

    #[test]
    fn monomial_inverse_is_exact() {
        let m = FieldSeries::monomial(q(), g1(3), q().from_i64(2));
        let inv = m.inv_to(&g1(0)).unwrap();
        assert!(inv.is_exact());
        assert_eq!(inv, FieldSeries::monomial(q(), g1(-3), q().ratio(1, 2)));
    }

    #[test]
    fn rank_two_lex_division() {
        // 1/(1-x) in Z^2 with x = (0,1): window below (0,4)
        let f = q();
        let x = GroupElem::from_coords(&[0, 1]);
        let one2 = FieldSeries::one(f, 2);
        let den = one2.sub(&FieldSeries::monomial(f, x.clone(), f.one()));
        let quot = one2.div_to(&den, &GroupElem::from_coords(&[0, 4])).unwrap();
        assert_eq!(quot.terms().len(), 4);
        for (k, (g, c)) in quot.terms().iter().enumerate() {
            assert_eq!(g, &GroupElem::from_coords(&[0, k as i64]));
            assert!(c.is_one());
        }

        // 1/(1-y) with y = (1,0) below (2,0): terminates despite the
        // infinite lattice window, because the support is sparse
        let y = GroupElem::from_coords(&[1, 0]);
        let den_y = one2.sub(&FieldSeries::monomial(f, y.clone(), f.one()));
        let quot_y = one2.div_to(&den_y, &GroupElem::from_coords(&[2, 0])).unwrap();
        assert_eq!(quot_y.terms().len(), 2);

        // 1/(1-x) below (2,0) needs infinitely many terms: step cap trips
        assert!(matches!(
            one2.div_to(&den, &GroupElem::from_coords(&[2, 0])),
            Err(Error::UnreachablePrecision { .. })
        ));
    }

    #[test]
    fn display_shapes() {
        let a = poly(&[(0, 1), (1, 2)]);
        assert_eq!(a.to_string(), "1 + 2*t^1");
        let b = a.truncate(&g1(3));
        assert_eq!(b.to_string(), "1 + 2*t^1 + O(t^3)");
        assert_eq!(FieldSeries::zero(q(), 1).to_string(), "0");
        let masked = FieldSeries::from_terms(q(), 1, vec![], g1(2));
        assert_eq!(masked.to_string(), "O(t^2)");
    }

    fn small_poly_strategy() -> impl Strategy<Value = FieldSeries> {
        prop::collection::vec((-3i64..6, -4i64..5), 0..5).prop_map(|pairs| {
            FieldSeries::from_terms(
                q(),
                1,
                pairs
                    .into_iter()
                    .map(|(e, c)| (g1(e), q().from_i64(c)))
                    .collect(),
                GroupElem::Infinity,
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn ring_laws_on_exact_series(
            a in small_poly_strategy(), b in small_poly_strategy(), c in small_poly_strategy()
        ) {
            prop_assert_eq!(a.add(&b), b.add(&a));
            prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
            prop_assert_eq!(a.mul(&b), b.mul(&a));
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
            prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        }

        #[test]
        fn division_round_trip(
            num in small_poly_strategy(), den in small_poly_strategy()
        ) {
            prop_assume!(!den.terms().is_empty());
            let target = g1(6);
            let quot = num.div_to(&den, &target).unwrap();
            let diff = num.sub(&quot.mul(&den));
            // remainder lives at or above target + v(den)
            let floor = target.add(&den.val().unwrap());
            for (g, _) in diff.terms() {
                prop_assert!(*g >= floor, "stray remainder term at {}", g);
            }
        }
    }
}
