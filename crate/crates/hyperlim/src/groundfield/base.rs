//! Exact coefficient fields: the rationals and prime fields `F_p`.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Descriptor of the coefficient field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseField {
    Rationals,
    Prime(u64),
}

impl BaseField {
    pub fn zero(&self) -> FieldElem {
        match self {
            BaseField::Rationals => FieldElem::Rat(BigRational::zero()),
            BaseField::Prime(p) => FieldElem::Mod { value: 0, p: *p },
        }
    }

    pub fn one(&self) -> FieldElem {
        match self {
            BaseField::Rationals => FieldElem::Rat(BigRational::one()),
            BaseField::Prime(p) => FieldElem::Mod { value: 1, p: *p },
        }
    }

    pub fn from_i64(&self, n: i64) -> FieldElem {
        match self {
            BaseField::Rationals => FieldElem::Rat(BigRational::from(BigInt::from(n))),
            BaseField::Prime(p) => {
                let m = n.rem_euclid(*p as i64) as u64;
                FieldElem::Mod { value: m, p: *p }
            }
        }
    }

    pub fn ratio(&self, num: i64, den: i64) -> FieldElem {
        assert!(den != 0, "zero denominator");
        self.from_i64(num).div(&self.from_i64(den))
    }

    /// Number of elements, when finite.
    pub fn order(&self) -> Option<u64> {
        match self {
            BaseField::Rationals => None,
            BaseField::Prime(p) => Some(*p),
        }
    }

    /// Small random nonzero element, for sampling-based checks.
    pub fn sample_nonzero<R: rand::Rng>(&self, rng: &mut R) -> FieldElem {
        match self {
            BaseField::Rationals => {
                let num = if rng.gen_bool(0.5) { 1 } else { -1 } * rng.gen_range(1i64..=3);
                let den = rng.gen_range(1i64..=3);
                self.ratio(num, den)
            }
            BaseField::Prime(p) => FieldElem::Mod {
                value: rng.gen_range(1..*p),
                p: *p,
            },
        }
    }
}

impl fmt::Display for BaseField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseField::Rationals => write!(f, "Q"),
            BaseField::Prime(p) => write!(f, "F_{p}"),
        }
    }
}

/// Element of a [`BaseField`].  Mixing fields is a programming error and
/// panics; user facing mismatches are caught at handle level.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FieldElem {
    Rat(BigRational),
    Mod { value: u64, p: u64 },
}

impl FieldElem {
    pub fn field(&self) -> BaseField {
        match self {
            FieldElem::Rat(_) => BaseField::Rationals,
            FieldElem::Mod { p, .. } => BaseField::Prime(*p),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            FieldElem::Rat(r) => r.is_zero(),
            FieldElem::Mod { value, .. } => *value == 0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            FieldElem::Rat(r) => r.is_one(),
            FieldElem::Mod { value, .. } => *value == 1,
        }
    }

    pub fn add(&self, other: &FieldElem) -> FieldElem {
        match (self, other) {
            (FieldElem::Rat(a), FieldElem::Rat(b)) => FieldElem::Rat(a + b),
            (FieldElem::Mod { value: a, p }, FieldElem::Mod { value: b, p: q }) => {
                assert_eq!(p, q, "mixed prime fields");
                FieldElem::Mod { value: (a + b) % p, p: *p }
            }
            _ => panic!("mixed coefficient fields"),
        }
    }

    pub fn sub(&self, other: &FieldElem) -> FieldElem {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> FieldElem {
        match self {
            FieldElem::Rat(a) => FieldElem::Rat(-a),
            FieldElem::Mod { value, p } => FieldElem::Mod { value: (p - value) % p, p: *p },
        }
    }

    pub fn mul(&self, other: &FieldElem) -> FieldElem {
        match (self, other) {
            (FieldElem::Rat(a), FieldElem::Rat(b)) => FieldElem::Rat(a * b),
            (FieldElem::Mod { value: a, p }, FieldElem::Mod { value: b, p: q }) => {
                assert_eq!(p, q, "mixed prime fields");
                FieldElem::Mod { value: (a * b) % p, p: *p }
            }
            _ => panic!("mixed coefficient fields"),
        }
    }

    /// Multiplicative inverse; panics on zero (callers test first).
    pub fn inv(&self) -> FieldElem {
        match self {
            FieldElem::Rat(a) => {
                assert!(!a.is_zero(), "inverse of zero");
                FieldElem::Rat(a.recip())
            }
            FieldElem::Mod { value, p } => {
                assert!(*value != 0, "inverse of zero");
                // Fermat: value^(p-2) mod p
                let mut result: u64 = 1;
                let mut base = *value % p;
                let mut e = p - 2;
                while e > 0 {
                    if e & 1 == 1 {
                        result = result * base % p;
                    }
                    base = base * base % p;
                    e >>= 1;
                }
                FieldElem::Mod { value: result, p: *p }
            }
        }
    }

    pub fn div(&self, other: &FieldElem) -> FieldElem {
        self.mul(&other.inv())
    }

    pub fn pow(&self, n: i64) -> FieldElem {
        let field = self.field();
        if n == 0 {
            return field.one();
        }
        let base = if n < 0 { self.inv() } else { self.clone() };
        let mut acc = field.one();
        for _ in 0..n.unsigned_abs() {
            acc = acc.mul(&base);
        }
        acc
    }
}

impl fmt::Display for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldElem::Rat(r) => {
                if r.denom().is_one() {
                    write!(f, "{}", r.numer())
                } else if r.is_negative() {
                    write!(f, "-{}/{}", r.numer().magnitude(), r.denom())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            FieldElem::Mod { value, .. } => write!(f, "{value}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_arithmetic_is_exact() {
        let q = BaseField::Rationals;
        let half = q.ratio(1, 2);
        let third = q.ratio(1, 3);
        let sum = half.add(&third);
        assert_eq!(sum, q.ratio(5, 6));
        assert_eq!(half.mul(&third), q.ratio(1, 6));
        assert_eq!(half.inv(), q.from_i64(2));
        assert_eq!(q.ratio(-3, 6), q.ratio(-1, 2));
        assert_eq!(q.ratio(2, 4).sub(&half), q.zero());
    }

    #[test]
    fn prime_field_arithmetic() {
        let f7 = BaseField::Prime(7);
        assert_eq!(f7.from_i64(10), f7.from_i64(3));
        assert_eq!(f7.from_i64(-1), f7.from_i64(6));
        assert_eq!(f7.from_i64(3).mul(&f7.from_i64(5)), f7.from_i64(1));
        assert_eq!(f7.from_i64(3).inv(), f7.from_i64(5));
        for a in 1..7 {
            let x = f7.from_i64(a);
            assert_eq!(x.mul(&x.inv()), f7.one());
        }
    }

    #[test]
    fn display_forms() {
        let q = BaseField::Rationals;
        assert_eq!(q.ratio(3, 4).to_string(), "3/4");
        assert_eq!(q.ratio(-3, 4).to_string(), "-3/4");
        assert_eq!(q.from_i64(5).to_string(), "5");
        assert_eq!(BaseField::Prime(5).from_i64(3).to_string(), "3");
    }
}
