//! Hyperfield handles and their element operations.
//!
//! A [`Hyperfield`] is a handle over one of several carrier kinds: a finite
//! table, a quotient `H_rho(K)` of a ground field by the subgroup
//! `1 + {v > rho}`, or a leading-term sort.  Elements are tagged with the
//! handle id, so mixing elements of different handles is an error rather
//! than a wrong answer.
//!
//! Sums in the quotient carriers are not enumerated: a hypersum is returned
//! as a symbolic [`SumSet`], either a singleton, a ball around a witness, or
//! a ball around zero, each with an explicit value floor.  Membership,
//! probing, and value queries are exact; when a truncated representative
//! does not determine the answer the operation reports insufficient
//! precision instead of guessing.

pub mod checks;
pub mod table;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;

use crate::groundfield::{FieldElem, FieldSeries, GroundField, RFExpr};
use crate::ogroup::{gt_segment, GroupElem, InitialSegment};
use crate::rvsort::{RvValue, SplitSort};
use crate::tower::{expr_text, sample_expr, LimitCarrier, LimitElem};
use crate::{Error, Result};

pub use table::{factor_table, krasner_k, krasner_s, prime_field_table, FiniteTable};

static NEXT_HANDLE: AtomicU64 = AtomicU64::new(1);

#[derive(Debug)]
pub enum HyperfieldKind {
    Finite(FiniteTable),
    Factor {
        ground: GroundField,
        rho: InitialSegment,
    },
    Rv(SplitSort),
    Limit(LimitCarrier),
}

#[derive(Debug)]
pub struct Hyperfield {
    id: u64,
    kind: HyperfieldKind,
}

#[derive(Debug, Clone)]
pub enum Payload {
    Table(usize),
    Series(FieldSeries),
    Rv(RvValue),
    Limit(LimitElem),
}

#[derive(Debug, Clone)]
pub struct HyperElem {
    pub(crate) handle: u64,
    pub(crate) payload: Payload,
}

impl HyperElem {
    pub fn payload(&self) -> &Payload {
        &self.payload
    }
}

/// The cut `rho + base`: a value `g` is above the cut when
/// `gt_segment(g, rho, base)` holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FloorCut {
    pub rho: InitialSegment,
    pub base: GroupElem,
}

impl FloorCut {
    pub fn admits(&self, gamma: &GroupElem) -> bool {
        gt_segment(gamma, &self.rho, &self.base)
    }

    pub fn translate(&self, delta: &GroupElem) -> FloorCut {
        FloorCut {
            rho: self.rho.clone(),
            base: self.base.add(delta),
        }
    }
}

impl fmt::Display for FloorCut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.rho, self.base)
    }
}

/// Symbolic hypersum.
///
/// `Ball` is the set of classes within the floor of the witness and does not
/// contain zero; `ZeroBall` is zero together with all classes of value above
/// the floor.  `Enumerated` is used by finite tables only.
#[derive(Debug, Clone)]
pub enum SumSet {
    Empty,
    Enumerated(Vec<HyperElem>),
    Singleton(HyperElem),
    Ball { witness: HyperElem, floor: FloorCut },
    ZeroBall { floor: FloorCut },
}

/// Value set of a hypersum.
#[derive(Debug, Clone)]
pub enum SetVal {
    Single(GroupElem),
    UpSet(FloorCut),
    Many(Vec<GroupElem>),
}

/// Decide whether the value of `s` is above the cut.  For a truncated
/// series with no visible terms the answer is `true` when every value the
/// truncation still allows is above the cut, and an error otherwise.
fn val_above_cut(s: &FieldSeries, floor: &FloorCut) -> Result<bool> {
    match s.val() {
        Ok(v) => Ok(floor.admits(&v)),
        Err(_) => {
            if floor.admits(s.precision()) {
                Ok(true)
            } else {
                Err(Error::InsufficientPrecision(format!(
                    "series known only to O(t^{}) cannot be placed against the cut {}",
                    s.precision(),
                    floor
                )))
            }
        }
    }
}

/// Probe margin for representative precision relative to a segment: how far
/// past the cut a representative must extend before class questions about
/// it are decidable.
pub(crate) fn seg_margin(rho: &InitialSegment, rank: usize) -> GroupElem {
    let unit = || {
        let mut v = vec![0i64; rank];
        if rank > 0 {
            v[rank - 1] = 1;
        }
        GroupElem::Finite(v)
    };
    match rho {
        InitialSegment::Zero => unit(),
        InitialSegment::UpTo(g) => g.add(&unit()),
        InitialSegment::Cone { .. } => GroupElem::Finite(vec![3; rank]),
    }
}

/// Smallest convenient values above a floor, used to build probe elements.
/// Returns `None` when nothing finite is above the cut.
pub(crate) fn values_above(floor: &FloorCut, rank: usize, count: usize) -> Option<Vec<GroupElem>> {
    let base = match &floor.base {
        GroupElem::Infinity => return None,
        b => b.clone(),
    };
    let step = |i: i64| -> Option<GroupElem> {
        let mut v = vec![0i64; rank];
        match &floor.rho {
            InitialSegment::Zero => {
                if rank == 0 {
                    return None;
                }
                v[rank - 1] = i + 1;
                Some(base.add(&GroupElem::Finite(v)))
            }
            InitialSegment::UpTo(g) => {
                v[rank - 1] = i + 1;
                Some(base.add(g).add(&GroupElem::Finite(v)))
            }
            InitialSegment::Cone { rank: r, k } => {
                if *k >= *r {
                    return None;
                }
                v[r - k - 1] = 1;
                if rank > 0 {
                    v[rank - 1] += i;
                }
                Some(base.add(&GroupElem::Finite(v)))
            }
        }
    };
    let mut out = Vec::new();
    for i in 0..count {
        match step(i as i64) {
            Some(g) => {
                debug_assert!(floor.admits(&g), "probe value must lie above the cut");
                out.push(g);
            }
            None => return if out.is_empty() { None } else { Some(out) },
        }
    }
    Some(out)
}

impl Hyperfield {
    fn fresh(kind: HyperfieldKind) -> Arc<Hyperfield> {
        Arc::new(Hyperfield {
            id: NEXT_HANDLE.fetch_add(1, Ordering::Relaxed),
            kind,
        })
    }

    pub fn finite(table: FiniteTable) -> Arc<Hyperfield> {
        Self::fresh(HyperfieldKind::Finite(table))
    }

    /// The quotient `H_rho(K)` of a ground field presentation.
    pub fn quotient_of_ground(ground: GroundField, rho: InitialSegment) -> Arc<Hyperfield> {
        Self::fresh(HyperfieldKind::Factor { ground, rho })
    }

    pub fn split_rv(sort: SplitSort) -> Arc<Hyperfield> {
        Self::fresh(HyperfieldKind::Rv(sort))
    }

    pub(crate) fn limit(carrier: LimitCarrier) -> Arc<Hyperfield> {
        Self::fresh(HyperfieldKind::Limit(carrier))
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn kind(&self) -> &HyperfieldKind {
        &self.kind
    }

    pub fn name(&self) -> String {
        match &self.kind {
            HyperfieldKind::Finite(t) => t.name.clone(),
            HyperfieldKind::Factor { ground, rho } => {
                format!("H_{}({})", rho, ground.name())
            }
            HyperfieldKind::Rv(s) => s.name(),
            HyperfieldKind::Limit(l) => {
                format!("lim H_{}({})", l.tower.segments(), l.tower.ground().name())
            }
        }
    }

    /// Rank of the value group this handle is valued in, if any.
    pub fn value_rank(&self) -> Option<usize> {
        match &self.kind {
            HyperfieldKind::Finite(t) => t.valuation.as_ref().map(|v| v.rank),
            HyperfieldKind::Factor { ground, .. } => Some(ground.rank()),
            HyperfieldKind::Rv(s) => Some(s.rank),
            HyperfieldKind::Limit(l) => Some(l.tower.ground().rank()),
        }
    }

    pub fn norm(&self) -> Option<InitialSegment> {
        match &self.kind {
            HyperfieldKind::Finite(t) => t.valuation.as_ref().map(|v| v.norm.clone()),
            HyperfieldKind::Factor { rho, .. } => Some(rho.clone()),
            HyperfieldKind::Rv(_) => Some(InitialSegment::Zero),
            HyperfieldKind::Limit(l) => Some(l.norm.clone()),
        }
    }

    fn own(&self, x: &HyperElem) -> Result<()> {
        if x.handle == self.id {
            Ok(())
        } else {
            Err(Error::ElementsFromDifferentHandles)
        }
    }

    fn wrap(&self, payload: Payload) -> HyperElem {
        HyperElem {
            handle: self.id,
            payload,
        }
    }

    fn table(&self) -> &FiniteTable {
        match &self.kind {
            HyperfieldKind::Finite(t) => t,
            _ => unreachable!("payload kind checked against handle kind"),
        }
    }

    pub(crate) fn series_of<'a>(&self, x: &'a HyperElem) -> &'a FieldSeries {
        match &x.payload {
            Payload::Series(s) => s,
            _ => unreachable!("factor handle carries series payloads"),
        }
    }

    fn rv_of<'a>(&self, x: &'a HyperElem) -> &'a RvValue {
        match &x.payload {
            Payload::Rv(v) => v,
            _ => unreachable!("rv handle carries rv payloads"),
        }
    }

    fn idx_of(&self, x: &HyperElem) -> usize {
        match &x.payload {
            Payload::Table(i) => *i,
            _ => unreachable!("finite handle carries table payloads"),
        }
    }

    pub(crate) fn limit_of<'a>(&self, x: &'a HyperElem) -> &'a LimitElem {
        match &x.payload {
            Payload::Limit(l) => l,
            _ => unreachable!("limit handle carries limit payloads"),
        }
    }

    fn limit_carrier(&self) -> &LimitCarrier {
        match &self.kind {
            HyperfieldKind::Limit(l) => l,
            _ => unreachable!("payload kind checked against handle kind"),
        }
    }

    pub fn zero(&self) -> HyperElem {
        match &self.kind {
            HyperfieldKind::Finite(t) => self.wrap(Payload::Table(t.zero)),
            HyperfieldKind::Factor { ground, .. } => {
                self.wrap(Payload::Series(ground.zero_series()))
            }
            HyperfieldKind::Rv(s) => self.wrap(Payload::Rv(RvValue::zero(&s.field))),
            HyperfieldKind::Limit(_) => self.wrap(Payload::Limit(LimitElem::from_expr(RFExpr::Lit(0)))),
        }
    }

    pub fn one(&self) -> HyperElem {
        match &self.kind {
            HyperfieldKind::Finite(t) => self.wrap(Payload::Table(t.one)),
            HyperfieldKind::Factor { ground, .. } => {
                self.wrap(Payload::Series(ground.one_series()))
            }
            HyperfieldKind::Rv(s) => self.wrap(Payload::Rv(RvValue::one(&s.field, s.rank))),
            HyperfieldKind::Limit(_) => self.wrap(Payload::Limit(LimitElem::from_expr(RFExpr::Lit(1)))),
        }
    }

    /// An element of class `[t^gamma]`, used for surjectivity probes and
    /// ball perturbations.  `None` when the handle has no element of that
    /// value.
    pub fn elem_of_value(&self, gamma: &GroupElem) -> Option<HyperElem> {
        match &self.kind {
            HyperfieldKind::Finite(t) => {
                if gamma.is_infinite() {
                    Some(self.wrap(Payload::Table(t.zero)))
                } else if t.valuation.is_some() && *gamma == GroupElem::zero(0) {
                    Some(self.wrap(Payload::Table(t.one)))
                } else {
                    None
                }
            }
            HyperfieldKind::Factor { ground, .. } => {
                if gamma.is_infinite() {
                    return Some(self.zero());
                }
                let c = ground.base().one();
                Some(self.wrap(Payload::Series(ground.monomial(gamma.clone(), c))))
            }
            HyperfieldKind::Rv(s) => {
                if gamma.is_infinite() {
                    return Some(self.zero());
                }
                Some(self.wrap(Payload::Rv(RvValue::new(s.field.one(), gamma.clone()))))
            }
            HyperfieldKind::Limit(l) => {
                if gamma.is_infinite() {
                    return Some(self.zero());
                }
                let e = crate::tower::monomial_expr(l.tower.ground().rank(), gamma)?;
                Some(self.wrap(Payload::Limit(LimitElem::from_expr(e))))
            }
        }
    }

    /// Wrap a ground series as an element of a quotient handle.  This is
    /// the canonical map from the ground field.  Limit handles accept exact
    /// series only: a truncated representative does not pin down a class at
    /// every stage.
    pub fn from_series(&self, s: FieldSeries) -> Result<HyperElem> {
        match &self.kind {
            HyperfieldKind::Factor { ground, .. } => {
                if s.field() != ground.base() || s.rank() != ground.rank() {
                    return Err(Error::Precondition(
                        "series does not match the ground field of the handle".into(),
                    ));
                }
                Ok(self.wrap(Payload::Series(s)))
            }
            HyperfieldKind::Limit(l) => {
                let ground = l.tower.ground();
                if s.field() != ground.base() || s.rank() != ground.rank() {
                    return Err(Error::Precondition(
                        "series does not match the ground field of the handle".into(),
                    ));
                }
                if !s.is_exact() && !s.is_exact_zero() {
                    return Err(Error::InsufficientPrecision(format!(
                        "limit elements need exact representatives, got O(t^{})",
                        s.precision()
                    )));
                }
                let e = crate::tower::expr_of_series(&s).ok_or_else(|| {
                    Error::Precondition("series coefficients too large for an expression".into())
                })?;
                Ok(self.wrap(Payload::Limit(LimitElem::from_expr(e))))
            }
            _ => Err(Error::Precondition(
                "only quotient handles take series representatives".into(),
            )),
        }
    }

    /// Wrap a closed form rational expression as an element of a limit
    /// handle.  The expression is the element: every stage projection is
    /// computed from it by expansion to that stage's precision.
    pub fn from_expr(&self, e: RFExpr) -> Result<HyperElem> {
        match &self.kind {
            HyperfieldKind::Limit(l) => {
                // surfaces unknown variables and division by zero up front
                l.tower.ground().val(&e)?;
                Ok(self.wrap(Payload::Limit(LimitElem::from_expr(e))))
            }
            HyperfieldKind::Factor { ground, rho } => {
                let v = ground.val(&e)?;
                if v.is_infinite() {
                    return Ok(self.zero());
                }
                let target = v.add(&seg_margin(rho, ground.rank()));
                Ok(self.wrap(Payload::Series(ground.expand(&e, &target)?)))
            }
            _ => Err(Error::Precondition(
                "expressions denote elements of quotient or limit handles".into(),
            )),
        }
    }

    /// Parse and wrap, see [`Hyperfield::from_expr`].
    pub fn from_expr_str(&self, text: &str) -> Result<HyperElem> {
        let ground = match &self.kind {
            HyperfieldKind::Limit(l) => l.tower.ground(),
            HyperfieldKind::Factor { ground, .. } => ground,
            _ => {
                return Err(Error::Precondition(
                    "expressions denote elements of quotient or limit handles".into(),
                ))
            }
        };
        let e = ground.parse(text)?;
        self.from_expr(e)
    }

    pub fn from_rv(&self, v: RvValue) -> Result<HyperElem> {
        match &self.kind {
            HyperfieldKind::Rv(s) => {
                if !v.is_zero() && v.coeff.field() != s.field {
                    return Err(Error::Precondition(
                        "coefficient does not match the sort field".into(),
                    ));
                }
                Ok(self.wrap(Payload::Rv(v)))
            }
            _ => Err(Error::Precondition("not a leading-term sort handle".into())),
        }
    }

    pub fn table_elem(&self, name: &str) -> Result<HyperElem> {
        match &self.kind {
            HyperfieldKind::Finite(t) => match t.names.iter().position(|n| n == name) {
                Some(i) => Ok(self.wrap(Payload::Table(i))),
                None => Err(Error::Precondition(format!(
                    "no element named {name} in {}",
                    t.name
                ))),
            },
            _ => Err(Error::Precondition("not a finite handle".into())),
        }
    }

    pub fn is_zero(&self, x: &HyperElem) -> Result<bool> {
        self.own(x)?;
        match &self.kind {
            HyperfieldKind::Finite(t) => Ok(self.idx_of(x) == t.zero),
            HyperfieldKind::Factor { .. } => {
                let s = self.series_of(x);
                if s.is_exact_zero() {
                    return Ok(true);
                }
                match s.val() {
                    Ok(v) => Ok(v.is_infinite()),
                    Err(e) => Err(e),
                }
            }
            HyperfieldKind::Rv(_) => Ok(self.rv_of(x).is_zero()),
            HyperfieldKind::Limit(l) => {
                Ok(self.limit_of(x).val(l.tower.ground())?.is_infinite())
            }
        }
    }

    pub fn eq(&self, x: &HyperElem, y: &HyperElem) -> Result<bool> {
        self.own(x)?;
        self.own(y)?;
        match &self.kind {
            HyperfieldKind::Finite(_) => Ok(self.idx_of(x) == self.idx_of(y)),
            HyperfieldKind::Factor { rho, .. } => {
                let (a, b) = (self.series_of(x), self.series_of(y));
                let diff = a.sub(b);
                if diff.is_exact_zero() {
                    return Ok(true);
                }
                // class equality: v(a - b) above the cut rho + v(a)
                let va = a.val()?;
                val_above_cut(
                    &diff,
                    &FloorCut {
                        rho: rho.clone(),
                        base: va,
                    },
                )
            }
            HyperfieldKind::Rv(_) => Ok(self.rv_of(x) == self.rv_of(y)),
            HyperfieldKind::Limit(l) => {
                // class equality modulo the whole norm, decided on the
                // closed forms: v(a - b) above norm + v(a)
                let g = l.tower.ground();
                let (a, b) = (self.limit_of(x), self.limit_of(y));
                let diff = RFExpr::Sub(Box::new(a.expr().clone()), Box::new(b.expr().clone()));
                let vd = g.val(&diff)?;
                if vd.is_infinite() {
                    return Ok(true);
                }
                let va = a.val(g)?;
                if va.is_infinite() {
                    return Ok(false);
                }
                Ok(gt_segment(&vd, &l.norm, &va))
            }
        }
    }

    pub fn val(&self, x: &HyperElem) -> Result<GroupElem> {
        self.own(x)?;
        match &self.kind {
            HyperfieldKind::Finite(t) => t
                .val(self.idx_of(x))
                .ok_or_else(|| Error::Precondition("finite handle has no valuation".into())),
            HyperfieldKind::Factor { .. } => self.series_of(x).val(),
            HyperfieldKind::Rv(_) => Ok(self.rv_of(x).gamma.clone()),
            HyperfieldKind::Limit(l) => self.limit_of(x).val(l.tower.ground()),
        }
    }

    pub fn neg(&self, x: &HyperElem) -> Result<HyperElem> {
        self.own(x)?;
        Ok(match &self.kind {
            HyperfieldKind::Finite(t) => self.wrap(Payload::Table(t.neg[self.idx_of(x)])),
            HyperfieldKind::Factor { .. } => self.wrap(Payload::Series(self.series_of(x).neg())),
            HyperfieldKind::Rv(s) => {
                let v = self.rv_of(x);
                if v.is_zero() {
                    self.zero()
                } else {
                    self.wrap(Payload::Rv(RvValue::new(
                        s.field.zero().sub(&v.coeff),
                        v.gamma.clone(),
                    )))
                }
            }
            HyperfieldKind::Limit(_) => {
                let e = self.limit_of(x).expr().clone();
                self.wrap(Payload::Limit(LimitElem::from_expr(RFExpr::Sub(
                    Box::new(RFExpr::Lit(0)),
                    Box::new(e),
                ))))
            }
        })
    }

    pub fn mul(&self, x: &HyperElem, y: &HyperElem) -> Result<HyperElem> {
        self.own(x)?;
        self.own(y)?;
        Ok(match &self.kind {
            HyperfieldKind::Finite(t) => {
                self.wrap(Payload::Table(t.mul[self.idx_of(x)][self.idx_of(y)]))
            }
            HyperfieldKind::Factor { .. } => {
                self.wrap(Payload::Series(self.series_of(x).mul(self.series_of(y))))
            }
            HyperfieldKind::Rv(_) => {
                let (a, b) = (self.rv_of(x), self.rv_of(y));
                if a.is_zero() || b.is_zero() {
                    self.zero()
                } else {
                    self.wrap(Payload::Rv(RvValue::new(
                        a.coeff.mul(&b.coeff),
                        a.gamma.add(&b.gamma),
                    )))
                }
            }
            HyperfieldKind::Limit(_) => {
                let e = RFExpr::Mul(
                    Box::new(self.limit_of(x).expr().clone()),
                    Box::new(self.limit_of(y).expr().clone()),
                );
                self.wrap(Payload::Limit(LimitElem::from_expr(e)))
            }
        })
    }

    pub fn inv(&self, x: &HyperElem) -> Result<HyperElem> {
        self.own(x)?;
        if self.is_zero(x)? {
            return Err(Error::ZeroDivision);
        }
        match &self.kind {
            HyperfieldKind::Finite(t) => {
                let i = self.idx_of(x);
                t.inv(i)
                    .map(|j| self.wrap(Payload::Table(j)))
                    .ok_or(Error::ZeroDivision)
            }
            HyperfieldKind::Factor { ground, rho } => {
                let s = self.series_of(x);
                let v = s.val()?;
                let target = v.neg().add(&seg_margin(rho, ground.rank()));
                Ok(self.wrap(Payload::Series(s.inv_to(&target)?)))
            }
            HyperfieldKind::Rv(_) => {
                let v = self.rv_of(x);
                Ok(self.wrap(Payload::Rv(RvValue::new(v.coeff.inv(), v.gamma.neg()))))
            }
            HyperfieldKind::Limit(_) => {
                let e = RFExpr::Div(
                    Box::new(RFExpr::Lit(1)),
                    Box::new(self.limit_of(x).expr().clone()),
                );
                Ok(self.wrap(Payload::Limit(LimitElem::from_expr(e))))
            }
        }
    }

    /// The hypersum `x + y` as a symbolic set.
    pub fn hypersum(&self, x: &HyperElem, y: &HyperElem) -> Result<SumSet> {
        self.nary_sum_impl(&[x.clone(), y.clone()])
    }

    /// The unordered sum of two or more elements.
    pub fn nary_sum(&self, xs: &[HyperElem]) -> Result<SumSet> {
        if xs.len() < 2 {
            return Err(Error::Precondition(
                "a hypersum needs at least two summands".into(),
            ));
        }
        self.nary_sum_impl(xs)
    }

    fn nary_sum_impl(&self, xs: &[HyperElem]) -> Result<SumSet> {
        for x in xs {
            self.own(x)?;
        }
        match &self.kind {
            HyperfieldKind::Finite(t) => {
                let mut acc: Vec<usize> = vec![self.idx_of(&xs[0])];
                for x in &xs[1..] {
                    let j = self.idx_of(x);
                    let mut next = Vec::new();
                    for &i in &acc {
                        for &z in &t.add[i][j] {
                            if !next.contains(&z) {
                                next.push(z);
                            }
                        }
                    }
                    acc = next;
                }
                acc.sort_unstable();
                Ok(SumSet::Enumerated(
                    acc.into_iter().map(|i| self.wrap(Payload::Table(i))).collect(),
                ))
            }
            HyperfieldKind::Factor { rho, .. } => {
                let mut minv = GroupElem::Infinity;
                for x in xs {
                    let s = self.series_of(x);
                    if s.is_exact_zero() {
                        continue;
                    }
                    let v = s.val()?;
                    if v < minv {
                        minv = v;
                    }
                }
                if minv.is_infinite() {
                    return Ok(SumSet::Singleton(self.zero()));
                }
                let mut w = self.series_of(&xs[0]).clone();
                for x in &xs[1..] {
                    w = w.add(self.series_of(x));
                }
                let floor = FloorCut {
                    rho: rho.clone(),
                    base: minv.clone(),
                };
                match w.val() {
                    Ok(vw) => {
                        if floor.admits(&vw) {
                            Ok(SumSet::ZeroBall { floor })
                        } else if vw == minv {
                            Ok(SumSet::Singleton(self.wrap(Payload::Series(w))))
                        } else {
                            Ok(SumSet::Ball {
                                witness: self.wrap(Payload::Series(w)),
                                floor,
                            })
                        }
                    }
                    Err(_) => {
                        if floor.admits(w.precision()) {
                            Ok(SumSet::ZeroBall { floor })
                        } else {
                            Err(Error::InsufficientPrecision(format!(
                                "sum witness known only to O(t^{}) cannot be classified \
                                 against the floor {}",
                                w.precision(),
                                floor
                            )))
                        }
                    }
                }
            }
            HyperfieldKind::Rv(s) => {
                let mut minv = GroupElem::Infinity;
                for x in xs {
                    let v = self.rv_of(x);
                    if !v.is_zero() && v.gamma < minv {
                        minv = v.gamma.clone();
                    }
                }
                if minv.is_infinite() {
                    return Ok(SumSet::Singleton(self.zero()));
                }
                let mut lead = s.field.zero();
                for x in xs {
                    let v = self.rv_of(x);
                    if !v.is_zero() && v.gamma == minv {
                        lead = lead.add(&v.coeff);
                    }
                }
                let floor = FloorCut {
                    rho: InitialSegment::Zero,
                    base: minv.clone(),
                };
                if lead.is_zero() {
                    Ok(SumSet::ZeroBall { floor })
                } else {
                    Ok(SumSet::Singleton(
                        self.wrap(Payload::Rv(RvValue::new(lead, minv))),
                    ))
                }
            }
            HyperfieldKind::Limit(l) => {
                let g = l.tower.ground();
                let mut minv = GroupElem::Infinity;
                for x in xs {
                    let v = self.limit_of(x).val(g)?;
                    if v < minv {
                        minv = v;
                    }
                }
                if minv.is_infinite() {
                    return Ok(SumSet::Singleton(self.zero()));
                }
                let mut wexpr = self.limit_of(&xs[0]).expr().clone();
                for x in &xs[1..] {
                    wexpr = RFExpr::Add(Box::new(wexpr), Box::new(self.limit_of(x).expr().clone()));
                }
                let floor = FloorCut {
                    rho: l.norm.clone(),
                    base: minv,
                };
                // zero lies in the sum at every stage exactly when the value
                // of the representative sum is above norm + min; the norm is
                // the union of the stage segments, so one exact comparison
                // settles all stages at once
                if floor.admits(&g.val(&wexpr)?) {
                    return Ok(SumSet::ZeroBall { floor });
                }
                // a zero free sum of limit elements is a single class: the
                // norm is a union of doubling segments, so everything within
                // floor distance of the witness collapses to one class
                let parts: Vec<LimitElem> = xs.iter().map(|x| self.limit_of(x).clone()).collect();
                Ok(SumSet::Singleton(
                    self.wrap(Payload::Limit(LimitElem::stage_sum(parts, wexpr))),
                ))
            }
        }
    }

    /// Exact membership test for a symbolic sum.
    pub fn member(&self, s: &SumSet, z: &HyperElem) -> Result<bool> {
        self.own(z)?;
        match s {
            SumSet::Empty => Ok(false),
            SumSet::Enumerated(v) => {
                for u in v {
                    if self.eq(u, z)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            SumSet::Singleton(u) => self.eq(u, z),
            SumSet::ZeroBall { floor } => {
                if self.is_zero(z)? {
                    return Ok(true);
                }
                match &self.kind {
                    HyperfieldKind::Factor { .. } => val_above_cut(self.series_of(z), floor),
                    _ => Ok(floor.admits(&self.val(z)?)),
                }
            }
            SumSet::Ball { witness, floor } => {
                if self.is_zero(z)? {
                    return Ok(false);
                }
                match &self.kind {
                    HyperfieldKind::Factor { .. } => {
                        let diff = self.series_of(witness).sub(self.series_of(z));
                        val_above_cut(&diff, floor)
                    }
                    HyperfieldKind::Rv(_) => {
                        let d = self.rv_distance(witness, z);
                        Ok(floor.admits(&d))
                    }
                    HyperfieldKind::Limit(l) => {
                        let diff = RFExpr::Sub(
                            Box::new(self.limit_of(witness).expr().clone()),
                            Box::new(self.limit_of(z).expr().clone()),
                        );
                        Ok(floor.admits(&l.tower.ground().val(&diff)?))
                    }
                    HyperfieldKind::Finite(_) => unreachable!("finite sums are enumerated"),
                }
            }
        }
    }

    fn rv_distance(&self, x: &HyperElem, y: &HyperElem) -> GroupElem {
        let (a, b) = (self.rv_of(x), self.rv_of(y));
        if a == b {
            return GroupElem::Infinity;
        }
        match (a.is_zero(), b.is_zero()) {
            (true, true) => GroupElem::Infinity,
            (true, false) => b.gamma.clone(),
            (false, true) => a.gamma.clone(),
            (false, false) => {
                if a.gamma != b.gamma {
                    a.gamma.clone().min(b.gamma.clone())
                } else {
                    // same value, different coefficients: the difference
                    // keeps the common value
                    a.gamma.clone()
                }
            }
        }
    }

    /// Ultrametric distance `d(x, y)`: the value of `x - y`, with `inf`
    /// for equal elements.
    pub fn ultrametric_d(&self, x: &HyperElem, y: &HyperElem) -> Result<GroupElem> {
        self.own(x)?;
        self.own(y)?;
        match &self.kind {
            HyperfieldKind::Finite(_) => {
                if self.eq(x, y)? {
                    return Ok(GroupElem::Infinity);
                }
                let s = self.hypersum(x, &self.neg(y)?)?;
                let mut best = GroupElem::Infinity;
                if let SumSet::Enumerated(v) = s {
                    for u in &v {
                        let vu = self.val(u)?;
                        if vu < best {
                            best = vu;
                        }
                    }
                }
                Ok(best)
            }
            HyperfieldKind::Factor { .. } => {
                if self.eq(x, y)? {
                    return Ok(GroupElem::Infinity);
                }
                self.series_of(x).sub(self.series_of(y)).val().map_err(|_| {
                    Error::InsufficientPrecision(
                        "distance is below the written precision of the operands".into(),
                    )
                })
            }
            HyperfieldKind::Rv(_) => Ok(self.rv_distance(x, y)),
            HyperfieldKind::Limit(l) => {
                // the distance is observed stage by stage and reported at
                // the first stage where the projections split; equality up
                // to the budget is not equality, so it stays undetermined
                let (a, b) = (self.limit_of(x), self.limit_of(y));
                let budget = l.tower.budget();
                for i in 0..=budget {
                    let stage = l.tower.stage(i);
                    let (ai, bi) = (a.resolve(&l.tower, i)?, b.resolve(&l.tower, i)?);
                    if !stage.eq(&ai, &bi)? {
                        let d = stage.ultrametric_d(&ai, &bi)?;
                        if i < budget {
                            // eventual constancy: the next stage must agree
                            let next = l.tower.stage(i + 1);
                            let dn = next
                                .ultrametric_d(&a.resolve(&l.tower, i + 1)?, &b.resolve(&l.tower, i + 1)?)?;
                            debug_assert_eq!(d, dn, "distance must be stable across stages");
                        }
                        return Ok(d);
                    }
                }
                Err(Error::Undetermined(format!(
                    "d({}, {}) >= {}: projections agree at every stage up to the budget {}",
                    self.display_elem(x),
                    self.display_elem(y),
                    l.tower.segment(budget),
                    budget
                )))
            }
        }
    }

    /// Scale every member of a sum by `a`.
    pub fn scale_sum(&self, a: &HyperElem, s: &SumSet) -> Result<SumSet> {
        self.own(a)?;
        if self.is_zero(a)? {
            return Ok(SumSet::Singleton(self.zero()));
        }
        Ok(match s {
            SumSet::Empty => SumSet::Empty,
            SumSet::Enumerated(v) => SumSet::Enumerated(
                v.iter()
                    .map(|u| self.mul(a, u))
                    .collect::<Result<Vec<_>>>()?,
            ),
            SumSet::Singleton(u) => SumSet::Singleton(self.mul(a, u)?),
            SumSet::Ball { witness, floor } => SumSet::Ball {
                witness: self.mul(a, witness)?,
                floor: floor.translate(&self.val(a)?),
            },
            SumSet::ZeroBall { floor } => SumSet::ZeroBall {
                floor: floor.translate(&self.val(a)?),
            },
        })
    }

    /// A small set of certified members of a sum: the witness plus
    /// perturbations strictly inside the floor.
    pub fn probes<R: Rng>(&self, s: &SumSet, rng: &mut R, k: usize) -> Result<Vec<HyperElem>> {
        let _ = rng;
        Ok(match s {
            SumSet::Empty => Vec::new(),
            SumSet::Enumerated(v) => v.clone(),
            SumSet::Singleton(u) => vec![u.clone()],
            SumSet::Ball { witness, floor } => {
                let mut out = vec![witness.clone()];
                if let Some(vals) = values_above(floor, self.payload_rank(), k) {
                    for g in vals {
                        if let Some(d) = self.elem_of_value(&g) {
                            out.push(self.payload_add(witness, &d));
                        }
                    }
                }
                out
            }
            SumSet::ZeroBall { floor } => {
                let mut out = vec![self.zero()];
                if let Some(vals) = values_above(floor, self.payload_rank(), k) {
                    for g in vals {
                        if let Some(d) = self.elem_of_value(&g) {
                            out.push(d);
                        }
                    }
                }
                out
            }
        })
    }

    fn payload_rank(&self) -> usize {
        self.value_rank().unwrap_or(0)
    }

    /// Representative-level addition used to move a ball witness inside its
    /// ball.  Not a hyperfield operation.
    pub(crate) fn payload_add(&self, x: &HyperElem, d: &HyperElem) -> HyperElem {
        match (&x.payload, &d.payload) {
            (Payload::Series(a), Payload::Series(b)) => self.wrap(Payload::Series(a.add(b))),
            (Payload::Limit(a), Payload::Limit(b)) => {
                self.wrap(Payload::Limit(LimitElem::from_expr(RFExpr::Add(
                    Box::new(a.expr().clone()),
                    Box::new(b.expr().clone()),
                ))))
            }
            (Payload::Rv(a), Payload::Rv(b)) => {
                // the perturbation has strictly larger value, so the sum
                // keeps the leading term of `a`
                debug_assert!(a.is_zero() || b.is_zero() || a.gamma < b.gamma);
                if a.is_zero() {
                    self.wrap(Payload::Rv(b.clone()))
                } else {
                    self.wrap(Payload::Rv(a.clone()))
                }
            }
            _ => unreachable!("payload kinds are uniform per handle"),
        }
    }

    /// Representative-level subtraction.  For a leading-term payload this
    /// is the witness of `x - y`, which is what the associativity probes
    /// need: an explicit intermediate with `x in u + y`.
    pub(crate) fn payload_sub(&self, x: &HyperElem, y: &HyperElem) -> HyperElem {
        match (&x.payload, &y.payload) {
            (Payload::Series(a), Payload::Series(b)) => self.wrap(Payload::Series(a.sub(b))),
            (Payload::Limit(a), Payload::Limit(b)) => {
                self.wrap(Payload::Limit(LimitElem::from_expr(RFExpr::Sub(
                    Box::new(a.expr().clone()),
                    Box::new(b.expr().clone()),
                ))))
            }
            (Payload::Rv(a), Payload::Rv(b)) => {
                let d = match (a.is_zero(), b.is_zero()) {
                    (true, true) => return self.zero(),
                    (true, false) => RvValue::new(b.coeff.neg(), b.gamma.clone()),
                    (false, true) => a.clone(),
                    (false, false) => {
                        if a.gamma < b.gamma {
                            a.clone()
                        } else if b.gamma < a.gamma {
                            RvValue::new(b.coeff.neg(), b.gamma.clone())
                        } else {
                            let c = a.coeff.sub(&b.coeff);
                            if c.is_zero() {
                                return self.zero();
                            }
                            RvValue::new(c, a.gamma.clone())
                        }
                    }
                };
                self.wrap(Payload::Rv(d))
            }
            _ => unreachable!("payload kinds are uniform per handle"),
        }
    }

    /// Value set of a sum.
    pub fn sumset_val(&self, s: &SumSet) -> Result<SetVal> {
        match s {
            SumSet::Empty => Ok(SetVal::Many(Vec::new())),
            SumSet::Enumerated(v) => {
                let mut vals = Vec::new();
                for u in v {
                    let vu = self.val(u)?;
                    if !vals.contains(&vu) {
                        vals.push(vu);
                    }
                }
                if vals.len() == 1 {
                    Ok(SetVal::Single(vals.pop().unwrap()))
                } else {
                    Ok(SetVal::Many(vals))
                }
            }
            SumSet::Singleton(u) => Ok(SetVal::Single(self.val(u)?)),
            SumSet::Ball { witness, .. } => Ok(SetVal::Single(self.val(witness)?)),
            SumSet::ZeroBall { floor } => Ok(SetVal::UpSet(floor.clone())),
        }
    }

    /// Compare two symbolic sums, returning a witness of disagreement.
    pub fn sumsets_agree<R: Rng>(
        &self,
        s1: &SumSet,
        s2: &SumSet,
        rng: &mut R,
        k: usize,
    ) -> Result<Option<String>> {
        use SumSet::*;
        match (s1, s2) {
            (Enumerated(a), Enumerated(b)) => {
                for u in a {
                    if !self.member(s2, u)? {
                        return Ok(Some(format!("{} only on the left", self.display_elem(u))));
                    }
                }
                for u in b {
                    if !self.member(s1, u)? {
                        return Ok(Some(format!("{} only on the right", self.display_elem(u))));
                    }
                }
                Ok(None)
            }
            (Singleton(a), Singleton(b)) => {
                if self.eq(a, b)? {
                    Ok(None)
                } else {
                    Ok(Some(format!(
                        "{} vs {}",
                        self.display_elem(a),
                        self.display_elem(b)
                    )))
                }
            }
            (ZeroBall { floor: f1 }, ZeroBall { floor: f2 }) => {
                if f1 == f2 {
                    Ok(None)
                } else {
                    Ok(Some(format!("floors differ: {f1} vs {f2}")))
                }
            }
            (
                Ball {
                    witness: w1,
                    floor: f1,
                },
                Ball {
                    witness: w2,
                    floor: f2,
                },
            ) => {
                if f1 != f2 {
                    return Ok(Some(format!("floors differ: {f1} vs {f2}")));
                }
                if !self.member(s2, w1)? {
                    return Ok(Some(format!(
                        "witness {} not in the right sum",
                        self.display_elem(w1)
                    )));
                }
                if !self.member(s1, w2)? {
                    return Ok(Some(format!(
                        "witness {} not in the left sum",
                        self.display_elem(w2)
                    )));
                }
                for p in self.probes(s1, rng, k)? {
                    if !self.member(s2, &p)? {
                        return Ok(Some(format!(
                            "probe {} only on the left",
                            self.display_elem(&p)
                        )));
                    }
                }
                Ok(None)
            }
            _ => Ok(Some("sums have different shapes".into())),
        }
    }

    /// Witness member of a sum, when the shape provides one.
    pub fn witness_of(&self, s: &SumSet) -> Option<HyperElem> {
        match s {
            SumSet::Empty => None,
            SumSet::Enumerated(v) => v.first().cloned(),
            SumSet::Singleton(u) => Some(u.clone()),
            SumSet::Ball { witness, .. } => Some(witness.clone()),
            SumSet::ZeroBall { .. } => Some(self.zero()),
        }
    }

    /// Canonical map into a coarser quotient of the same ground field.
    /// Refuses representatives whose precision does not determine the
    /// target class.
    pub fn theta(&self, x: &HyperElem, target: &Hyperfield) -> Result<HyperElem> {
        self.own(x)?;
        if target.id == self.id {
            return Ok(x.clone());
        }
        match (&self.kind, &target.kind) {
            (
                HyperfieldKind::Factor { ground: g1, rho: r1 },
                HyperfieldKind::Factor { ground: g2, rho: r2 },
            ) => {
                if g1 != g2 {
                    return Err(Error::Precondition(
                        "canonical map needs the same ground field".into(),
                    ));
                }
                if !r2.subset_of(r1) {
                    return Err(Error::Precondition(format!(
                        "no canonical map: {} is not a subset of {}",
                        r2, r1
                    )));
                }
                let s = self.series_of(x);
                if !s.is_exact() && !s.is_exact_zero() {
                    let v = s.val()?;
                    let cut = FloorCut {
                        rho: r2.clone(),
                        base: v,
                    };
                    if !cut.admits(s.precision()) {
                        return Err(Error::InsufficientPrecision(format!(
                            "representative known to O(t^{}) does not determine a class \
                             modulo {}",
                            s.precision(),
                            r2
                        )));
                    }
                }
                target.from_series(s.clone())
            }
            (HyperfieldKind::Limit(l), HyperfieldKind::Factor { ground, rho }) => {
                if *ground != *l.tower.ground() {
                    return Err(Error::Precondition(
                        "canonical map needs the same ground field".into(),
                    ));
                }
                let i = l.tower.stage_index_of(rho).ok_or_else(|| {
                    Error::Precondition(format!(
                        "segment {} is not a stage of the tower {}",
                        rho,
                        l.tower.segments()
                    ))
                })?;
                let r = self.limit_of(x).resolve(&l.tower, i)?;
                target.from_series(l.tower.stage(i).series_of(&r).clone())
            }
            _ => Err(Error::Precondition(
                "canonical map is defined between quotient handles".into(),
            )),
        }
    }

    /// Further quotient of a valued handle.  When the new segment contains
    /// the norm the quotient changes nothing and the same handle is
    /// returned.
    pub fn quotient_valued(self: &Arc<Self>, rho: &InitialSegment) -> Result<Arc<Hyperfield>> {
        let norm = self
            .norm()
            .ok_or_else(|| Error::Precondition("handle has no valuation".into()))?;
        if norm.subset_of(rho) {
            return Ok(self.clone());
        }
        match &self.kind {
            HyperfieldKind::Factor { ground, rho: r1 } => {
                if !rho.subset_of(r1) {
                    return Err(Error::Precondition(format!(
                        "segment {} is not comparable with the norm {}",
                        rho, r1
                    )));
                }
                Ok(Hyperfield::quotient_of_ground(ground.clone(), rho.clone()))
            }
            HyperfieldKind::Limit(l) => {
                if !rho.subset_of(&norm) {
                    return Err(Error::Precondition(format!(
                        "segment {} is not comparable with the norm {}",
                        rho, norm
                    )));
                }
                Ok(Hyperfield::quotient_of_ground(
                    l.tower.ground().clone(),
                    rho.clone(),
                ))
            }
            _ => Err(Error::Precondition(
                "further quotients are defined for quotient handles".into(),
            )),
        }
    }

    /// Canonical finite window of a class: the value together with the
    /// coefficients on `[v, v + g]`.  `None` for the zero class.
    pub fn canonical_window(
        &self,
        x: &HyperElem,
    ) -> Result<Option<(GroupElem, Vec<FieldElem>)>> {
        self.own(x)?;
        match &self.kind {
            HyperfieldKind::Factor { ground, rho } => {
                let offsets = rho.window_offsets(ground.rank()).ok_or_else(|| {
                    Error::Precondition(format!("segment {} has no finite window", rho))
                })?;
                if self.is_zero(x)? {
                    return Ok(None);
                }
                let s = self.series_of(x);
                let v = s.val()?;
                let mut coeffs = Vec::with_capacity(offsets.len());
                for off in &offsets {
                    coeffs.push(s.known_coeff(&v.add(off))?);
                }
                Ok(Some((v, coeffs)))
            }
            _ => Err(Error::Precondition(
                "canonical windows are defined on quotient handles".into(),
            )),
        }
    }

    pub fn display_elem(&self, x: &HyperElem) -> String {
        match &x.payload {
            Payload::Table(i) => self.table().names[*i].clone(),
            Payload::Series(s) => format!("[{}]", s),
            Payload::Rv(v) => v.display(),
            Payload::Limit(l) => format!(
                "[{}]",
                expr_text(l.expr(), self.limit_carrier().tower.ground().vars())
            ),
        }
    }

    pub fn display_sum(&self, s: &SumSet) -> String {
        match s {
            SumSet::Empty => "{}".into(),
            SumSet::Enumerated(v) => {
                let items: Vec<String> = v.iter().map(|e| self.display_elem(e)).collect();
                format!("{{{}}}", items.join(", "))
            }
            SumSet::Singleton(e) => format!("{{{}}}", self.display_elem(e)),
            SumSet::Ball { witness, floor } => {
                format!("{} + {{v > {} + {}}}", self.display_elem(witness), floor.rho, floor.base)
            }
            SumSet::ZeroBall { floor } => {
                format!("{{0}} u {{v > {} + {}}}", floor.rho, floor.base)
            }
        }
    }

    pub fn enumerate(&self) -> Result<Vec<HyperElem>> {
        match &self.kind {
            HyperfieldKind::Finite(t) => Ok((0..t.size())
                .map(|i| self.wrap(Payload::Table(i)))
                .collect()),
            _ => Err(Error::NotEnumerable),
        }
    }

    /// Random element.  Specials (zero, one, minus one, monomials) are
    /// mixed in so that axiom sampling exercises the boundary cases.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> HyperElem {
        match &self.kind {
            HyperfieldKind::Finite(t) => {
                let i = rng.gen_range(0..t.size());
                self.wrap(Payload::Table(i))
            }
            HyperfieldKind::Factor { ground, .. } => match rng.gen_range(0..24u32) {
                0 => self.zero(),
                1 | 2 => self.one(),
                3 | 4 => self.wrap(Payload::Series(ground.one_series().neg())),
                5..=9 => {
                    let g = random_gamma(ground.rank(), rng);
                    let c = ground.sample_coeff(rng);
                    self.wrap(Payload::Series(ground.monomial(g, c)))
                }
                _ => self.wrap(Payload::Series(ground.sample_series(rng))),
            },
            HyperfieldKind::Rv(s) => {
                if rng.gen_range(0..12u32) == 0 {
                    self.zero()
                } else {
                    let g = random_gamma(s.rank, rng);
                    let c = s.field.sample_nonzero(rng);
                    self.wrap(Payload::Rv(RvValue::new(c, g)))
                }
            }
            HyperfieldKind::Limit(l) => {
                self.wrap(Payload::Limit(LimitElem::from_expr(sample_expr(
                    l.tower.ground(),
                    rng,
                ))))
            }
        }
    }
}

fn random_gamma<R: Rng>(rank: usize, rng: &mut R) -> GroupElem {
    GroupElem::Finite((0..rank).map(|_| rng.gen_range(-2i64..=2)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn laurent_f3_upto(n: i64) -> Arc<Hyperfield> {
        Hyperfield::quotient_of_ground(
            GroundField::laurent_f3(),
            InitialSegment::up_to(&[n]),
        )
    }

    #[test]
    fn factor_classes_of_laurent_series() {
        // H_[0,1](F_3((x))): classes see two coefficient levels
        let h = laurent_f3_upto(1);
        let a = h.from_series(h_ground().expand_str("1+x", &GroupElem::Infinity).unwrap()).unwrap();
        let b = h
            .from_series(h_ground().expand_str("1+x+x^2", &GroupElem::Infinity).unwrap())
            .unwrap();
        let c = h.from_series(h_ground().expand_str("1+x^2", &GroupElem::Infinity).unwrap()).unwrap();
        assert!(h.eq(&a, &b).unwrap());
        assert!(!h.eq(&a, &c).unwrap());
    }

    fn h_ground() -> GroundField {
        GroundField::laurent_f3()
    }

    #[test]
    fn one_minus_one_is_a_zero_ball() {
        let h = laurent_f3_upto(1);
        let one = h.one();
        let minus = h.neg(&one).unwrap();
        let s = h.hypersum(&one, &minus).unwrap();
        match &s {
            SumSet::ZeroBall { floor } => {
                assert_eq!(floor.base, GroupElem::from_coords(&[0]));
                assert!(floor.admits(&GroupElem::from_coords(&[2])));
                assert!(!floor.admits(&GroupElem::from_coords(&[1])));
            }
            other => panic!("expected a zero ball, got {other:?}"),
        }
        // x^2 is in the sum, x is not, zero is
        let x2 = h.elem_of_value(&GroupElem::from_coords(&[2])).unwrap();
        let x1 = h.elem_of_value(&GroupElem::from_coords(&[1])).unwrap();
        assert!(h.member(&s, &x2).unwrap());
        assert!(!h.member(&s, &x1).unwrap());
        assert!(h.member(&s, &h.zero()).unwrap());
    }

    #[test]
    fn sum_with_distinct_values_is_a_singleton() {
        let h = laurent_f3_upto(1);
        let one = h.one();
        let x = h.elem_of_value(&GroupElem::from_coords(&[1])).unwrap();
        let s = h.hypersum(&one, &x).unwrap();
        match &s {
            SumSet::Singleton(u) => {
                let w = h
                    .from_series(h_ground().expand_str("1+x", &GroupElem::Infinity).unwrap())
                    .unwrap();
                assert!(h.eq(u, &w).unwrap());
            }
            other => panic!("expected a singleton, got {other:?}"),
        }
    }

    #[test]
    fn cancellation_below_the_cut_gives_a_ball() {
        // (1+x) + (-1) = [x]-ball in H_[0,1]: value 1 is not above the cut 1
        let h = laurent_f3_upto(1);
        let a = h
            .from_series(h_ground().expand_str("1+x", &GroupElem::Infinity).unwrap())
            .unwrap();
        let b = h.neg(&h.one()).unwrap();
        let s = h.hypersum(&a, &b).unwrap();
        match &s {
            SumSet::Ball { witness, floor } => {
                assert_eq!(h.val(witness).unwrap(), GroupElem::from_coords(&[1]));
                assert_eq!(floor.base, GroupElem::from_coords(&[0]));
            }
            other => panic!("expected a ball, got {other:?}"),
        }
        // the ball holds [x] and [x + x^2], but not [x^2] and not zero
        let x = h.elem_of_value(&GroupElem::from_coords(&[1])).unwrap();
        assert!(h.member(&s, &x).unwrap());
        let xx2 = h
            .from_series(h_ground().expand_str("x+x^2", &GroupElem::Infinity).unwrap())
            .unwrap();
        assert!(h.member(&s, &xx2).unwrap());
        let x2 = h.elem_of_value(&GroupElem::from_coords(&[2])).unwrap();
        assert!(!h.member(&s, &x2).unwrap());
        assert!(!h.member(&s, &h.zero()).unwrap());
    }

    #[test]
    fn ultrametric_distance_example() {
        let h = laurent_f3_upto(2);
        let one = h.one();
        let b = h
            .from_series(h_ground().expand_str("1+x", &GroupElem::Infinity).unwrap())
            .unwrap();
        assert_eq!(h.ultrametric_d(&one, &b).unwrap(), GroupElem::from_coords(&[1]));
        assert_eq!(h.ultrametric_d(&one, &one).unwrap(), GroupElem::Infinity);
    }

    #[test]
    fn canonical_window_and_its_invariance() {
        // [2 + x + x^5] in H_[0,1](Q(x)): window is (0: 2, 1)
        let g = GroundField::rationals_x();
        let h = Hyperfield::quotient_of_ground(g.clone(), InitialSegment::up_to(&[1]));
        let a = h
            .from_series(g.expand_str("2+x+x^5", &GroupElem::Infinity).unwrap())
            .unwrap();
        let (v, coeffs) = h.canonical_window(&a).unwrap().unwrap();
        assert_eq!(v, GroupElem::from_coords(&[0]));
        assert_eq!(coeffs.len(), 2);
        assert_eq!(format!("{}", coeffs[0]), "2");
        assert_eq!(format!("{}", coeffs[1]), "1");

        // multiplying by 1 + u with val(u) > 1 does not move the window
        for u in ["x^2", "x^3", "x^2+x^4"] {
            let t = g
                .expand_str(&format!("(2+x+x^5)*(1+{u})"), &GroupElem::Infinity)
                .unwrap();
            let b = h.from_series(t).unwrap();
            assert!(h.eq(&a, &b).unwrap(), "1+{u} must not move the class");
            let (v2, c2) = h.canonical_window(&b).unwrap().unwrap();
            assert_eq!(v, v2);
            assert_eq!(
                coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
                c2.iter().map(|c| c.to_string()).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn theta_needs_enough_precision() {
        let g = GroundField::laurent_f3();
        let fine = Hyperfield::quotient_of_ground(g.clone(), InitialSegment::up_to(&[3]));
        let coarse = Hyperfield::quotient_of_ground(g.clone(), InitialSegment::up_to(&[1]));
        let exact = fine
            .from_series(g.expand_str("1+x", &GroupElem::Infinity).unwrap())
            .unwrap();
        let mapped = fine.theta(&exact, &coarse).unwrap();
        assert!(coarse.eq(&mapped, &coarse.from_series(
            g.expand_str("1+x", &GroupElem::Infinity).unwrap()
        ).unwrap()).unwrap());

        // a representative truncated at O(x^1) does not determine a class
        // modulo [0,1]
        let rough = fine
            .from_series(g.expand_str("1/(1-x)", &GroupElem::from_coords(&[1])).unwrap())
            .unwrap();
        assert!(matches!(
            fine.theta(&rough, &coarse),
            Err(Error::InsufficientPrecision(_))
        ));
        // the wrong direction is refused
        assert!(coarse.theta(&mapped, &fine).is_err());
    }

    #[test]
    fn quotient_by_superset_of_norm_is_identity() {
        let g = GroundField::laurent_f3();
        let h = Hyperfield::quotient_of_ground(g, InitialSegment::up_to(&[1]));
        let same = h.quotient_valued(&InitialSegment::up_to(&[5])).unwrap();
        assert_eq!(same.id(), h.id());
        let finer = h.quotient_valued(&InitialSegment::Zero).unwrap();
        assert_ne!(finer.id(), h.id());
    }

    #[test]
    fn rv_sum_rules() {
        use crate::groundfield::BaseField;
        let h = Hyperfield::split_rv(SplitSort::new(BaseField::Rationals, 1));
        let one = h.one();
        let minus = h.neg(&one).unwrap();
        // 1 + 1 = {2}
        match h.hypersum(&one, &one).unwrap() {
            SumSet::Singleton(u) => assert_eq!(h.display_elem(&u), "(2; 0)"),
            other => panic!("expected singleton, got {other:?}"),
        }
        // 1 - 1 = zero ball at 0
        match h.hypersum(&one, &minus).unwrap() {
            SumSet::ZeroBall { floor } => assert_eq!(floor.base, GroupElem::from_coords(&[0])),
            other => panic!("expected zero ball, got {other:?}"),
        }
        // absorption at distinct values
        let t = h.elem_of_value(&GroupElem::from_coords(&[1])).unwrap();
        match h.hypersum(&one, &t).unwrap() {
            SumSet::Singleton(u) => assert!(h.eq(&u, &one).unwrap()),
            other => panic!("expected singleton, got {other:?}"),
        }
    }

    #[test]
    fn nary_sum_collapses_and_balls() {
        let h = laurent_f3_upto(0);
        let one = h.one();
        let minus = h.neg(&one).unwrap();
        let x = h.elem_of_value(&GroupElem::from_coords(&[1])).unwrap();
        // 1 - 1 + x contains zero and x
        let s = h.nary_sum(&[one.clone(), minus, x.clone()]).unwrap();
        assert!(h.member(&s, &h.zero()).unwrap());
        assert!(h.member(&s, &x).unwrap());
        assert!(!h.member(&s, &one).unwrap());
        // 1 + 1 + x is the singleton [2 + x] = [2] in F_3 coefficients
        let s2 = h.nary_sum(&[one.clone(), one.clone(), x]).unwrap();
        match &s2 {
            SumSet::Singleton(_) => {}
            other => panic!("expected singleton, got {other:?}"),
        }
        assert!(h.nary_sum(&[one]).is_err());
    }

    #[test]
    fn probes_stay_inside_their_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = laurent_f3_upto(2);
        for _ in 0..40 {
            let x = h.sample(&mut rng);
            let y = h.sample(&mut rng);
            let s = match h.hypersum(&x, &y) {
                Ok(s) => s,
                Err(_) => continue,
            };
            for p in h.probes(&s, &mut rng, 3).unwrap() {
                assert!(
                    h.member(&s, &p).unwrap(),
                    "probe {} escaped {} + {}",
                    h.display_elem(&p),
                    h.display_elem(&x),
                    h.display_elem(&y)
                );
            }
        }
    }

    #[test]
    fn elements_of_different_handles_do_not_mix() {
        let h1 = laurent_f3_upto(1);
        let h2 = laurent_f3_upto(1);
        let a = h1.one();
        let b = h2.one();
        assert!(matches!(
            h1.eq(&a, &b),
            Err(Error::ElementsFromDifferentHandles)
        ));
    }
}
