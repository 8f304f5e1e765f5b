//! Lexicographically ordered groups `Z^n` with a top element `inf`,
//! initial segments of the nonnegative cone, and convex subgroups.
//!
//! The first coordinate is the most significant one.  Initial segments come
//! in three closed forms: `{0}`, an interval `[0, g]`, and the nonnegative
//! part `cone(k)` of the convex subgroup `{0}^(n-k) x Z^k`.

use std::cmp::Ordering;
use std::fmt;

use crate::{Error, Result};

/// Element of `Z^n` extended by a greatest element `inf`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GroupElem {
    Finite(Vec<i64>),
    Infinity,
}

impl GroupElem {
    pub fn zero(rank: usize) -> Self {
        GroupElem::Finite(vec![0; rank])
    }

    pub fn from_coords(coords: &[i64]) -> Self {
        GroupElem::Finite(coords.to_vec())
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, GroupElem::Infinity)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            GroupElem::Finite(c) => c.iter().all(|&x| x == 0),
            GroupElem::Infinity => false,
        }
    }

    pub fn rank(&self) -> Option<usize> {
        match self {
            GroupElem::Finite(c) => Some(c.len()),
            GroupElem::Infinity => None,
        }
    }

    pub fn coords(&self) -> &[i64] {
        match self {
            GroupElem::Finite(c) => c,
            GroupElem::Infinity => panic!("inf has no coordinates"),
        }
    }

    /// Componentwise sum; `inf` is absorbing.
    pub fn add(&self, other: &GroupElem) -> GroupElem {
        match (self, other) {
            (GroupElem::Infinity, _) | (_, GroupElem::Infinity) => GroupElem::Infinity,
            (GroupElem::Finite(a), GroupElem::Finite(b)) => {
                assert_eq!(a.len(), b.len(), "rank mismatch in group addition");
                GroupElem::Finite(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
        }
    }

    /// `self - other`; `other` must be finite.
    pub fn sub(&self, other: &GroupElem) -> GroupElem {
        match (self, other) {
            (_, GroupElem::Infinity) => panic!("cannot subtract inf"),
            (GroupElem::Infinity, _) => GroupElem::Infinity,
            (GroupElem::Finite(a), GroupElem::Finite(b)) => {
                assert_eq!(a.len(), b.len(), "rank mismatch in group subtraction");
                GroupElem::Finite(a.iter().zip(b).map(|(x, y)| x - y).collect())
            }
        }
    }

    pub fn neg(&self) -> GroupElem {
        match self {
            GroupElem::Infinity => panic!("cannot negate inf"),
            GroupElem::Finite(a) => GroupElem::Finite(a.iter().map(|x| -x).collect()),
        }
    }

    pub fn double(&self) -> GroupElem {
        self.add(self)
    }

    /// Parse `(a,b,...)`, a bare integer (rank 1), or `inf`.
    pub fn parse(text: &str, rank: usize) -> Result<GroupElem> {
        let t = text.trim();
        if t == "inf" {
            return Ok(GroupElem::Infinity);
        }
        let coords: Vec<i64> = if t.starts_with('(') {
            if !t.ends_with(')') {
                return Err(Error::Syntax {
                    offset: t.len(),
                    message: "expected closing `)`".into(),
                });
            }
            let inner = &t[1..t.len() - 1];
            if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner
                    .split(',')
                    .map(|p| {
                        p.trim().parse::<i64>().map_err(|_| Error::Syntax {
                            offset: 0,
                            message: format!("bad integer `{}` in tuple", p.trim()),
                        })
                    })
                    .collect::<Result<_>>()?
            }
        } else {
            vec![t.parse::<i64>().map_err(|_| Error::Syntax {
                offset: 0,
                message: format!("bad group element `{t}`"),
            })?]
        };
        if coords.len() != rank {
            return Err(Error::Syntax {
                offset: 0,
                message: format!("expected rank {rank}, got rank {}", coords.len()),
            });
        }
        Ok(GroupElem::Finite(coords))
    }
}

impl PartialOrd for GroupElem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GroupElem {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (GroupElem::Infinity, GroupElem::Infinity) => Ordering::Equal,
            (GroupElem::Infinity, _) => Ordering::Greater,
            (_, GroupElem::Infinity) => Ordering::Less,
            (GroupElem::Finite(a), GroupElem::Finite(b)) => {
                assert_eq!(a.len(), b.len(), "rank mismatch in comparison");
                a.cmp(b)
            }
        }
    }
}

impl fmt::Display for GroupElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupElem::Infinity => write!(f, "inf"),
            GroupElem::Finite(c) if c.len() == 1 => write!(f, "{}", c[0]),
            GroupElem::Finite(c) => {
                write!(f, "(")?;
                for (i, x) in c.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Initial segment of the nonnegative cone of `Z^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum InitialSegment {
    /// `{0}`.
    Zero,
    /// `[0, g]` with `g >= 0`.
    UpTo(GroupElem),
    /// Nonnegative part of the convex subgroup on the last `k` coordinates.
    Cone { rank: usize, k: usize },
}

impl InitialSegment {
    pub fn up_to(coords: &[i64]) -> Self {
        let g = GroupElem::from_coords(coords);
        assert!(g >= GroupElem::zero(coords.len()), "segment bound must be >= 0");
        InitialSegment::UpTo(g)
    }

    pub fn cone(rank: usize, k: usize) -> Self {
        assert!(k <= rank, "cone index exceeds rank");
        InitialSegment::Cone { rank, k }
    }

    /// Parse `{0}`, `[0,g]` or `cone(k)`.
    pub fn parse(text: &str, rank: usize) -> Result<InitialSegment> {
        let t = text.trim();
        if t == "{0}" {
            return Ok(InitialSegment::Zero);
        }
        if let Some(rest) = t.strip_prefix("cone(") {
            let inner = rest.strip_suffix(')').ok_or(Error::Syntax {
                offset: t.len(),
                message: "expected closing `)`".into(),
            })?;
            let k: usize = inner.trim().parse().map_err(|_| Error::Syntax {
                offset: 5,
                message: format!("bad cone index `{}`", inner.trim()),
            })?;
            if k > rank {
                return Err(Error::Syntax {
                    offset: 5,
                    message: format!("cone index {k} exceeds rank {rank}"),
                });
            }
            return Ok(InitialSegment::Cone { rank, k });
        }
        if t.starts_with('[') && t.ends_with(']') {
            let inner = &t[1..t.len() - 1];
            let comma = inner.find(',').ok_or(Error::Syntax {
                offset: 1,
                message: "expected `[0,g]`".into(),
            })?;
            let (zero_part, g_part) = inner.split_at(comma);
            if zero_part.trim() != "0" && zero_part.trim() != "(0)" {
                return Err(Error::Syntax {
                    offset: 1,
                    message: "segment must start at 0".into(),
                });
            }
            let g = GroupElem::parse(&g_part[1..], rank)?;
            if g < GroupElem::zero(rank) {
                return Err(Error::Syntax {
                    offset: comma + 1,
                    message: "segment bound must be >= 0".into(),
                });
            }
            return Ok(InitialSegment::UpTo(g));
        }
        Err(Error::Syntax { offset: 0, message: format!("bad segment `{t}`") })
    }

    /// Membership of a finite `gamma`.
    pub fn contains(&self, gamma: &GroupElem) -> bool {
        if gamma.is_infinite() {
            return false;
        }
        let rank = gamma.rank().unwrap();
        let zero = GroupElem::zero(rank);
        match self {
            InitialSegment::Zero => gamma.is_zero(),
            InitialSegment::UpTo(g) => *gamma >= zero && gamma <= g,
            InitialSegment::Cone { rank: r, k } => {
                assert_eq!(*r, rank, "rank mismatch in segment membership");
                *gamma >= zero && gamma.coords()[..rank - k].iter().all(|&c| c == 0)
            }
        }
    }

    /// As-a-set equality with another segment.
    pub fn set_eq(&self, other: &InitialSegment) -> bool {
        self.subset_of(other) && other.subset_of(self)
    }

    /// As-a-set inclusion `self` in `other`.
    pub fn subset_of(&self, other: &InitialSegment) -> bool {
        match self {
            InitialSegment::Zero => true,
            InitialSegment::UpTo(g) => {
                if g.is_zero() {
                    return true;
                }
                match other {
                    InitialSegment::Zero => false,
                    InitialSegment::UpTo(h) => g <= h,
                    InitialSegment::Cone { .. } => other.contains(g),
                }
            }
            InitialSegment::Cone { rank, k } => {
                if *k == 0 {
                    return true;
                }
                match other {
                    InitialSegment::Cone { rank: r2, k: k2 } => {
                        assert_eq!(rank, r2, "rank mismatch in segment inclusion");
                        k <= k2
                    }
                    _ => false,
                }
            }
        }
    }

    /// Offsets of the segment as lattice points, when there are finitely many.
    ///
    /// `[0, g]` is finite exactly when all coordinates of `g` except the last
    /// are zero; `{0}` and `cone(0)` are the single point.
    pub fn window_offsets(&self, rank: usize) -> Option<Vec<GroupElem>> {
        match self {
            InitialSegment::Zero => Some(vec![GroupElem::zero(rank)]),
            InitialSegment::Cone { k: 0, .. } => Some(vec![GroupElem::zero(rank)]),
            InitialSegment::Cone { .. } => None,
            InitialSegment::UpTo(g) => {
                let c = g.coords();
                assert_eq!(c.len(), rank, "rank mismatch in window enumeration");
                if c[..rank.saturating_sub(1)].iter().any(|&x| x != 0) {
                    return None;
                }
                let m = if rank == 0 { 0 } else { c[rank - 1] };
                let mut out = Vec::with_capacity(m as usize + 1);
                for j in 0..=m {
                    let mut v = vec![0i64; rank];
                    if rank > 0 {
                        v[rank - 1] = j;
                    }
                    out.push(GroupElem::Finite(v));
                }
                Some(out)
            }
        }
    }
}

impl fmt::Display for InitialSegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialSegment::Zero => write!(f, "{{0}}"),
            InitialSegment::UpTo(g) => match g {
                GroupElem::Finite(c) if c.len() == 1 => write!(f, "[0,({})]", c[0]),
                _ => write!(f, "[0,{g}]"),
            },
            InitialSegment::Cone { k, .. } => write!(f, "cone({k})"),
        }
    }
}

/// `true` iff `gamma > rho' + base` for every `rho'` in the segment.
///
/// `gamma = inf` always passes; `base = inf` passes only for `gamma = inf`.
pub fn gt_segment(gamma: &GroupElem, rho: &InitialSegment, base: &GroupElem) -> bool {
    if base.is_infinite() {
        return gamma.is_infinite();
    }
    if gamma.is_infinite() {
        return true;
    }
    match rho {
        InitialSegment::Zero => gamma > base,
        InitialSegment::UpTo(g) => *gamma > g.add(base),
        InitialSegment::Cone { rank, k } => {
            let d = gamma.sub(base);
            let lead = &d.coords()[..rank - k];
            if lead.is_empty() {
                // cone(rank) is the whole nonnegative cone: unbounded.
                false
            } else {
                lead.iter().copied().find(|&c| c != 0).map(|c| c > 0).unwrap_or(false)
            }
        }
    }
}

/// `true` iff the pointwise double of `rho1` is contained in `rho2`.
pub fn seg_double_leq(rho1: &InitialSegment, rho2: &InitialSegment) -> bool {
    match rho1 {
        InitialSegment::Zero => true,
        InitialSegment::Cone { k: 0, .. } => true,
        InitialSegment::UpTo(g) => rho2.contains(&g.double()),
        InitialSegment::Cone { rank, k } => match rho2 {
            InitialSegment::Cone { rank: r2, k: k2 } => {
                assert_eq!(rank, r2, "rank mismatch in doubling comparison");
                k <= k2
            }
            _ => false,
        },
    }
}

/// Convex subgroup `{0}^(n-k) x Z^k` of `Z^n` under the lexicographic order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConvexSubgroup {
    pub rank: usize,
    pub k: usize,
}

impl ConvexSubgroup {
    pub fn new(rank: usize, k: usize) -> Self {
        assert!(k <= rank, "subgroup index exceeds rank");
        ConvexSubgroup { rank, k }
    }

    /// Nonnegative part, as an initial segment.
    pub fn nonneg_part(&self) -> InitialSegment {
        InitialSegment::Cone { rank: self.rank, k: self.k }
    }

    pub fn contains(&self, gamma: &GroupElem) -> bool {
        match gamma {
            GroupElem::Infinity => false,
            GroupElem::Finite(c) => {
                assert_eq!(c.len(), self.rank, "rank mismatch in subgroup membership");
                c[..self.rank - self.k].iter().all(|&x| x == 0)
            }
        }
    }

    /// Rank of the quotient group `Z^n / Delta`.
    pub fn quotient_rank(&self) -> usize {
        self.rank - self.k
    }
}

/// Image of `gamma` in `Z^n / Delta = Z^(n-k)`: drop the last `k` coordinates.
pub fn quotient_map(gamma: &GroupElem, delta: &ConvexSubgroup) -> GroupElem {
    match gamma {
        GroupElem::Infinity => GroupElem::Infinity,
        GroupElem::Finite(c) => {
            assert_eq!(c.len(), delta.rank, "rank mismatch in quotient map");
            GroupElem::Finite(c[..delta.rank - delta.k].to_vec())
        }
    }
}
