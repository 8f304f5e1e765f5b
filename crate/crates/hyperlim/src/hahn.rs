//! Hahn series over a leading-term sort: finite formal sums whose
//! coefficient at an exponent is a handle element of that value class.
//! Addition is componentwise collapse, multiplication is convolution, and
//! the valuation reads off the smallest exponent.  A precision cut makes
//! the multiplicative inverse and Hensel lifting computable: refinement
//! against an explicit target stands in for the transfinite diagonal
//! argument, which has no finite analogue.  Each refinement step strictly
//! increases the value of the defect `1 - a*b`, and the caller says how
//! far to push.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::groundfield::BaseField;
use crate::hyperfield::checks::{run_sampled, CheckConfig};
use crate::hyperfield::{HyperElem, Hyperfield};
use crate::ogroup::GroupElem;
use crate::report::CheckReport;
use crate::rvsort::{recover_gamma, RecoveredGamma, RvPresentation, SplitSort};
use crate::{Error, Result};

/// Refinement steps allowed before inversion gives up.  A lexicographic
/// exponent group of rank two or more admits targets that a term by term
/// refinement approaches forever without reaching.
const REFINE_CAP: usize = 4096;

/// How much of a series is known: everything, or only the coefficients at
/// exponents strictly below a cut.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Precision {
    Exact,
    Cut(GroupElem),
}

impl Precision {
    pub fn meet(&self, other: &Precision) -> Precision {
        match (self, other) {
            (Precision::Exact, p) | (p, Precision::Exact) => p.clone(),
            (Precision::Cut(a), Precision::Cut(b)) => Precision::Cut(a.clone().min(b.clone())),
        }
    }

    /// Cut of a product with a factor of the given value.  An infinite
    /// shift means the factor is exactly zero, so nothing is unknown.
    fn shift(&self, d: &GroupElem) -> Precision {
        match self {
            Precision::Exact => Precision::Exact,
            Precision::Cut(_) if d.is_infinite() => Precision::Exact,
            Precision::Cut(p) => Precision::Cut(p.add(d)),
        }
    }

    pub fn admits(&self, g: &GroupElem) -> bool {
        match self {
            Precision::Exact => true,
            Precision::Cut(p) => g < p,
        }
    }
}

/// Smallest exponent lexicographically above `g`: step the last coordinate.
fn bump(g: &GroupElem) -> GroupElem {
    match g {
        GroupElem::Infinity => GroupElem::Infinity,
        GroupElem::Finite(c) => {
            let mut c = c.clone();
            let last = c.last_mut().expect("nontrivial exponent group");
            *last += 1;
            GroupElem::Finite(c)
        }
    }
}

/// The coefficient sort of a Hahn series: a stringent handle together with
/// its recovered exponent group.  Exponents live in the recovered quotient,
/// so a limit handle whose elements absorb across the norm window gets the
/// coarse group its classes actually order.
pub struct HahnSort {
    gamma: RecoveredGamma,
}

impl HahnSort {
    /// Run the order recovery on a stringent handle.  The recovered group
    /// must be nontrivial; series over a trivial exponent group are just
    /// coefficients wearing a hat.
    pub fn over(h: &Arc<Hyperfield>, cfg: &CheckConfig) -> Result<Arc<HahnSort>> {
        let gamma = recover_gamma(h, cfg)?;
        if gamma.rank == 0 || gamma.is_trivial() {
            return Err(Error::Precondition(
                "series need a nontrivial exponent group".into(),
            ));
        }
        Ok(Arc::new(HahnSort { gamma }))
    }

    /// Series over a split sort; the declared order always recovers.
    pub fn split(field: BaseField, rank: usize) -> Arc<HahnSort> {
        let h = Hyperfield::split_rv(SplitSort::new(field, rank));
        let cfg = CheckConfig {
            seed: 11,
            trials: 32,
            probes: 3,
        };
        Self::over(&h, &cfg).expect("the declared order of a split sort recovers")
    }

    pub fn handle(&self) -> &Arc<Hyperfield> {
        self.gamma.handle()
    }

    pub fn rank(&self) -> usize {
        self.gamma.rank
    }

    pub fn recovered(&self) -> &RecoveredGamma {
        &self.gamma
    }

    fn presentation(&self) -> &RvPresentation {
        self.gamma.presentation()
    }

    pub fn name(&self) -> String {
        format!("H^(Z^{}) over {}", self.gamma.rank, self.handle().name())
    }

    /// Exponent of a coefficient: its recovered value class.
    pub fn nu(&self, c: &HyperElem) -> Result<GroupElem> {
        self.gamma.nu(c)
    }

    /// Collapse of a finite formal sum.  Legal when all inputs share a
    /// value class or all classes are distinct; a mixed list is folded
    /// only if every ordering and bracketing agrees on the result.
    pub fn oplus_many(&self, xs: &[HyperElem]) -> Result<HyperElem> {
        let h = self.handle();
        let p = self.presentation();
        let mut nonzero = Vec::new();
        for x in xs {
            if !h.is_zero(x)? {
                nonzero.push(x.clone());
            }
        }
        match nonzero.len() {
            0 => return Ok(h.zero()),
            1 => return Ok(nonzero[0].clone()),
            _ => {}
        }
        let mut nus = Vec::new();
        for x in &nonzero {
            nus.push(self.nu(x)?);
        }
        let all_same = nus.iter().all(|g| *g == nus[0]);
        let mut sorted = nus.clone();
        sorted.sort();
        sorted.dedup();
        let all_distinct = sorted.len() == nus.len();
        let fold = |order: &[HyperElem]| -> Result<HyperElem> {
            let mut acc = order[0].clone();
            for x in &order[1..] {
                acc = p.oplus(&acc, x)?;
            }
            Ok(acc)
        };
        if all_same || all_distinct {
            return fold(&nonzero);
        }
        if nonzero.len() > 5 {
            return Err(Error::Precondition(
                "the sum mixes repeated and distinct value classes; its result depends on the ordering".into(),
            ));
        }
        let reference = fold(&nonzero)?;
        let mut agreed = true;
        each_permutation(&nonzero, &mut |order| {
            if !agreed {
                return Ok(());
            }
            for v in tree_values(p, order)? {
                if !h.eq(&v, &reference)? {
                    agreed = false;
                    break;
                }
            }
            Ok(())
        })?;
        if agreed {
            Ok(reference)
        } else {
            Err(Error::Precondition(
                "the sum mixes repeated and distinct value classes; its result depends on the ordering".into(),
            ))
        }
    }
}

fn each_permutation<F>(xs: &[HyperElem], f: &mut F) -> Result<()>
where
    F: FnMut(&[HyperElem]) -> Result<()>,
{
    let mut items = xs.to_vec();
    let n = items.len();
    let mut c = vec![0usize; n];
    f(&items)?;
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            f(&items)?;
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(())
}

fn tree_values(p: &RvPresentation, xs: &[HyperElem]) -> Result<Vec<HyperElem>> {
    if xs.len() == 1 {
        return Ok(vec![xs[0].clone()]);
    }
    let mut out = Vec::new();
    for split in 1..xs.len() {
        for l in tree_values(p, &xs[..split])? {
            for r in tree_values(p, &xs[split..])? {
                out.push(p.oplus(&l, &r)?);
            }
        }
    }
    Ok(out)
}

/// A finite support series over a sort.  Terms are exponent sorted, each
/// coefficient is nonzero with value class equal to its exponent, and
/// every exponent is admitted by the precision.
#[derive(Clone)]
pub struct HahnSeries {
    sort: Arc<HahnSort>,
    terms: Vec<(GroupElem, HyperElem)>,
    precision: Precision,
}

impl HahnSeries {
    pub fn zero(sort: &Arc<HahnSort>) -> HahnSeries {
        HahnSeries {
            sort: sort.clone(),
            terms: Vec::new(),
            precision: Precision::Exact,
        }
    }

    pub fn one(sort: &Arc<HahnSort>) -> HahnSeries {
        let h = sort.handle();
        HahnSeries {
            sort: sort.clone(),
            terms: vec![(GroupElem::zero(sort.rank()), h.one())],
            precision: Precision::Exact,
        }
    }

    pub fn from_terms(
        sort: &Arc<HahnSort>,
        terms: Vec<(GroupElem, HyperElem)>,
        precision: Precision,
    ) -> Result<HahnSeries> {
        let h = sort.handle();
        for (i, (g, c)) in terms.iter().enumerate() {
            if g.rank() != Some(sort.rank()) {
                return Err(Error::Precondition(format!(
                    "exponent {g} does not live in Z^{}",
                    sort.rank()
                )));
            }
            if h.is_zero(c)? {
                return Err(Error::Precondition(format!(
                    "zero coefficient stored at t^{g}"
                )));
            }
            let want = sort.nu(c)?;
            if want != *g {
                return Err(Error::Precondition(format!(
                    "coefficient {} sits in value class {want}, not at t^{g}",
                    h.display_elem(c)
                )));
            }
            if i > 0 && terms[i - 1].0 >= *g {
                return Err(Error::Precondition(
                    "exponents must be strictly increasing".into(),
                ));
            }
            if !precision.admits(g) {
                return Err(Error::Precondition(format!(
                    "term at t^{g} sits at or past the precision cut"
                )));
            }
        }
        Ok(HahnSeries {
            sort: sort.clone(),
            terms,
            precision,
        })
    }

    /// The one term series carrying a nonzero coefficient at its own class.
    pub fn monomial(sort: &Arc<HahnSort>, c: HyperElem) -> Result<HahnSeries> {
        let g = sort.nu(&c)?;
        if g.is_infinite() {
            return Ok(HahnSeries::zero(sort));
        }
        HahnSeries::from_terms(sort, vec![(g, c)], Precision::Exact)
    }

    pub fn sort(&self) -> &Arc<HahnSort> {
        &self.sort
    }

    pub fn terms(&self) -> &[(GroupElem, HyperElem)] {
        &self.terms
    }

    pub fn precision(&self) -> &Precision {
        &self.precision
    }

    pub fn is_exact_zero(&self) -> bool {
        self.terms.is_empty() && self.precision == Precision::Exact
    }

    pub fn neg(&self) -> Result<HahnSeries> {
        let h = self.sort.handle();
        let mut terms = Vec::with_capacity(self.terms.len());
        for (g, c) in &self.terms {
            terms.push((g.clone(), h.neg(c)?));
        }
        Ok(HahnSeries {
            sort: self.sort.clone(),
            terms,
            precision: self.precision.clone(),
        })
    }

    /// Coarsen to the meet with the given precision, dropping terms the
    /// new cut no longer admits.
    pub fn truncate(&self, p: &Precision) -> HahnSeries {
        let precision = self.precision.meet(p);
        let terms = self
            .terms
            .iter()
            .filter(|(g, _)| precision.admits(g))
            .cloned()
            .collect();
        HahnSeries {
            sort: self.sort.clone(),
            terms,
            precision,
        }
    }

    /// Term by term equality of the known parts; precision is not compared.
    pub fn same_terms(&self, other: &HahnSeries) -> Result<bool> {
        if self.terms.len() != other.terms.len() {
            return Ok(false);
        }
        let h = self.sort.handle();
        for ((g, c), (g2, c2)) in self.terms.iter().zip(&other.terms) {
            if g != g2 || !h.eq(c, c2)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn to_json(&self) -> Value {
        let h = self.sort.handle();
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|(g, c)| {
                json!({
                    "exponent": group_json(g),
                    "coefficient": h.display_elem(c),
                })
            })
            .collect();
        let precision = match &self.precision {
            Precision::Exact => json!("exact"),
            Precision::Cut(p) => group_json(p),
        };
        json!({
            "sort": self.sort.name(),
            "terms": terms,
            "precision": precision,
        })
    }
}

fn group_json(g: &GroupElem) -> Value {
    match g {
        GroupElem::Infinity => json!("inf"),
        GroupElem::Finite(c) => json!(c),
    }
}

impl fmt::Display for HahnSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.sort.handle();
        let mut first = true;
        for (g, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "({})*t^{}", h.display_elem(c), g)?;
            first = false;
        }
        match &self.precision {
            Precision::Exact => {
                if first {
                    write!(f, "0")?;
                }
            }
            Precision::Cut(p) => {
                if !first {
                    write!(f, " + ")?;
                }
                write!(f, "O(t^{p})")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for HahnSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

fn same_sort(a: &HahnSeries, b: &HahnSeries) -> Result<Arc<HahnSort>> {
    if Arc::ptr_eq(&a.sort, &b.sort) || Arc::ptr_eq(a.sort.handle(), b.sort.handle()) {
        Ok(a.sort.clone())
    } else {
        Err(Error::MixedSorts)
    }
}

/// Best known lower bound on the value, for precision bookkeeping: the
/// leading exponent, or the cut when nothing is visible.
fn value_floor(a: &HahnSeries) -> GroupElem {
    match a.terms.first() {
        Some((g, _)) => g.clone(),
        None => match &a.precision {
            Precision::Exact => GroupElem::Infinity,
            Precision::Cut(p) => p.clone(),
        },
    }
}

pub fn hs_add(a: &HahnSeries, b: &HahnSeries) -> Result<HahnSeries> {
    let sort = same_sort(a, b)?;
    let h = sort.handle();
    let p = sort.presentation();
    let precision = a.precision.meet(&b.precision);
    let mut terms = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.terms.len() || j < b.terms.len() {
        let take_a = match (a.terms.get(i), b.terms.get(j)) {
            (Some((ga, _)), Some((gb, _))) => {
                if ga == gb {
                    let c = p.oplus(&a.terms[i].1, &b.terms[j].1)?;
                    if !h.is_zero(&c)? {
                        terms.push((ga.clone(), c));
                    }
                    i += 1;
                    j += 1;
                    continue;
                }
                ga < gb
            }
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => unreachable!(),
        };
        if take_a {
            terms.push(a.terms[i].clone());
            i += 1;
        } else {
            terms.push(b.terms[j].clone());
            j += 1;
        }
    }
    terms.retain(|(g, _)| precision.admits(g));
    Ok(HahnSeries {
        sort,
        terms,
        precision,
    })
}

pub fn hs_sub(a: &HahnSeries, b: &HahnSeries) -> Result<HahnSeries> {
    hs_add(a, &b.neg()?)
}

pub fn hs_mul(a: &HahnSeries, b: &HahnSeries) -> Result<HahnSeries> {
    let sort = same_sort(a, b)?;
    let h = sort.handle();
    let precision = a
        .precision
        .shift(&value_floor(b))
        .meet(&b.precision.shift(&value_floor(a)));
    let mut grid: BTreeMap<GroupElem, Vec<HyperElem>> = BTreeMap::new();
    for (d, x) in &a.terms {
        for (e, y) in &b.terms {
            let g = d.add(e);
            if precision.admits(&g) {
                grid.entry(g).or_default().push(h.mul(x, y)?);
            }
        }
    }
    let mut terms = Vec::new();
    for (g, parts) in grid {
        // all parts share the class g, so the collapse is a plain field sum
        let s = sort.oplus_many(&parts)?;
        if !h.is_zero(&s)? {
            terms.push((g, s));
        }
    }
    Ok(HahnSeries {
        sort,
        terms,
        precision,
    })
}

/// Valuation of a series: the leading exponent.  An exact empty series has
/// value `inf`; an empty series with a cut is indistinguishable from zero.
pub fn hs_val(a: &HahnSeries) -> Result<GroupElem> {
    match a.terms.first() {
        Some((g, _)) => Ok(g.clone()),
        None => match &a.precision {
            Precision::Exact => Ok(GroupElem::Infinity),
            Precision::Cut(p) => Err(Error::IndistinguishableFromZero {
                precision: p.to_string(),
            }),
        },
    }
}

/// Multiplicative inverse, refined until the defect `1 - a*b` has value
/// above `target`.  Starts from the inverse of the leading term; each step
/// reads the leading coefficient of the defect and adds the matching
/// correction, which strictly increases the defect value.
pub fn hs_inverse(a: &HahnSeries, target: &GroupElem) -> Result<HahnSeries> {
    Ok(inverse_trace(a, target)?.0)
}

/// Inversion plus the defect values seen after each refinement.
pub(crate) fn inverse_trace(
    a: &HahnSeries,
    target: &GroupElem,
) -> Result<(HahnSeries, Vec<GroupElem>)> {
    let sort = a.sort.clone();
    let h = sort.handle();
    if target.rank() != Some(sort.rank()) {
        return Err(Error::Precondition(format!(
            "target {target} does not live in Z^{}",
            sort.rank()
        )));
    }
    let (va, lead) = match a.terms.first() {
        Some((g, c)) => (g.clone(), c.clone()),
        None => {
            return Err(match &a.precision {
                Precision::Exact => Error::ZeroDivision,
                Precision::Cut(p) => Error::IndistinguishableFromZero {
                    precision: p.to_string(),
                },
            })
        }
    };
    if let Precision::Cut(p) = &a.precision {
        let need = target.add(&va);
        if *p <= need {
            return Err(Error::InsufficientPrecision(format!(
                "inverting to t^{target} needs the input past t^{need}, it stops at t^{p}"
            )));
        }
    }
    let ilead = h.inv(&lead)?;
    let mut b = HahnSeries::from_terms(&sort, vec![(va.neg(), ilead.clone())], Precision::Exact)?;
    let one = HahnSeries::one(&sort);
    let mut trace: Vec<GroupElem> = Vec::new();
    loop {
        let c = hs_sub(&one, &hs_mul(a, &b)?)?;
        let vc = match c.terms.first() {
            Some((g, _)) => g.clone(),
            None => match &c.precision {
                Precision::Exact => {
                    trace.push(GroupElem::Infinity);
                    return Ok((b, trace));
                }
                Precision::Cut(p) => {
                    // the defect cut sits above the target by the
                    // precision check on the input
                    assert!(*p > *target, "defect cut below target");
                    break;
                }
            },
        };
        if let Some(prev) = trace.last() {
            assert!(vc > *prev, "refinement stalled at defect value {vc}");
        }
        trace.push(vc.clone());
        if vc > *target {
            break;
        }
        if trace.len() > REFINE_CAP {
            return Err(Error::UnreachablePrecision {
                steps: trace.len() - 1,
            });
        }
        let coeff = h.mul(&c.terms[0].1, &ilead)?;
        let corr = HahnSeries::from_terms(&sort, vec![(vc.sub(&va), coeff)], Precision::Exact)?;
        b = hs_add(&b, &corr)?;
    }
    let cut = Precision::Cut(bump(&target.sub(&va)));
    Ok((b.truncate(&cut), trace))
}

/// Leading coefficient of a series, the projection to its sort.  Exact
/// zero projects to the zero of the sort.
pub fn rv_project(a: &HahnSeries) -> Result<HyperElem> {
    match a.terms.first() {
        Some((_, c)) => Ok(c.clone()),
        None => match &a.precision {
            Precision::Exact => Ok(a.sort.handle().zero()),
            Precision::Cut(p) => Err(Error::IndistinguishableFromZero {
                precision: p.to_string(),
            }),
        },
    }
}

/// A random exact series with one to `max_terms` terms: sampled nonzero
/// coefficients placed at their own value classes.
pub fn random_series<R: rand::Rng>(
    sort: &Arc<HahnSort>,
    rng: &mut R,
    max_terms: usize,
) -> Result<HahnSeries> {
    let h = sort.handle();
    let k = rng.gen_range(1..=max_terms.max(1));
    let mut by_exp: BTreeMap<GroupElem, HyperElem> = BTreeMap::new();
    let mut attempts = 0;
    while by_exp.len() < k && attempts < 8 * k {
        attempts += 1;
        let c = h.sample(rng);
        if h.is_zero(&c)? {
            continue;
        }
        let g = sort.nu(&c)?;
        by_exp.entry(g).or_insert(c);
    }
    if by_exp.is_empty() {
        let c = h.one();
        by_exp.insert(sort.nu(&c)?, c);
    }
    HahnSeries::from_terms(sort, by_exp.into_iter().collect(), Precision::Exact)
}

/// The projection from series to their sort respects the structure on
/// both sides: it is multiplicative, sums project into hypersums, and the
/// induced map from the unit classes of the series field back to the sort
/// is a bijection on the sampled window.
pub fn check_rv_round_trip(sort: &Arc<HahnSort>, cfg: &CheckConfig) -> Result<CheckReport> {
    let mut report = CheckReport::new(&sort.name());
    let h = sort.handle().clone();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let s1 = sort.clone();
    report.push(run_sampled("rv-multiplicative", cfg.seed, cfg.trials, || {
        let a = random_series(&s1, &mut rng, 3)?;
        let b = random_series(&s1, &mut rng, 3)?;
        let lhs = rv_project(&hs_mul(&a, &b)?)?;
        let rhs = h.mul(&rv_project(&a)?, &rv_project(&b)?)?;
        if h.eq(&lhs, &rhs)? {
            Ok(None)
        } else {
            Ok(Some(format!(
                "rv(a*b) = {} but rv(a)*rv(b) = {}",
                h.display_elem(&lhs),
                h.display_elem(&rhs)
            )))
        }
    }));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let s2 = sort.clone();
    report.push(run_sampled("rv-sum-membership", cfg.seed, cfg.trials, || {
        let a = random_series(&s2, &mut rng, 3)?;
        let b = random_series(&s2, &mut rng, 3)?;
        let c = rv_project(&hs_add(&a, &b)?)?;
        let sum = h.hypersum(&rv_project(&a)?, &rv_project(&b)?)?;
        if h.member(&sum, &c)? {
            Ok(None)
        } else {
            Ok(Some(format!(
                "rv(a+b) = {} escapes rv(a)+rv(b) = {}",
                h.display_elem(&c),
                h.display_sum(&sum)
            )))
        }
    }));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let s3 = sort.clone();
    report.push(run_sampled("rv-iso", cfg.seed, cfg.trials, || {
        // well defined: a series and its leading monomial lie in the same
        // unit class, their difference has strictly larger value
        let a = random_series(&s3, &mut rng, 3)?;
        let m = HahnSeries::monomial(&s3, rv_project(&a)?)?;
        let d = hs_sub(&a, &m)?;
        if !d.is_exact_zero() && hs_val(&d)? <= hs_val(&a)? {
            return Ok(Some(format!(
                "a - mono(rv(a)) keeps the value of a at {}",
                hs_val(&a)?
            )));
        }
        // surjective: every sort element is hit by its own monomial
        let c = h.sample(&mut rng);
        if h.is_zero(&c)? {
            return Ok(None);
        }
        let back = rv_project(&HahnSeries::monomial(&s3, c.clone())?)?;
        if h.eq(&back, &c)? {
            Ok(None)
        } else {
            Ok(Some(format!(
                "mono({}) projects to {}",
                h.display_elem(&c),
                h.display_elem(&back)
            )))
        }
    }));

    Ok(report)
}

/// Polynomial evaluation by the Horner walk; `f` lists coefficients with
/// the constant term first.
pub fn hs_eval(f: &[HahnSeries], at: &HahnSeries) -> Result<HahnSeries> {
    let mut acc = match f.last() {
        Some(top) => top.clone(),
        None => return Ok(HahnSeries::zero(at.sort())),
    };
    for c in f[..f.len() - 1].iter().rev() {
        acc = hs_add(c, &hs_mul(at, &acc)?)?;
    }
    Ok(acc)
}

/// The element `k * 1` of the sort, by repeated collapse; picks up the
/// characteristic of the coefficient field.
fn small_scalar(sort: &Arc<HahnSort>, k: usize) -> Result<HyperElem> {
    let h = sort.handle();
    let p = sort.presentation();
    let one = h.one();
    let mut acc = h.zero();
    for _ in 0..k {
        acc = p.oplus(&acc, &one)?;
    }
    Ok(acc)
}

fn scale_by_scalar(a: &HahnSeries, s: &HyperElem) -> Result<HahnSeries> {
    let h = a.sort().handle();
    if h.is_zero(s)? {
        return Ok(HahnSeries {
            sort: a.sort.clone(),
            terms: Vec::new(),
            precision: a.precision.clone(),
        });
    }
    let mut terms = Vec::with_capacity(a.terms.len());
    for (g, c) in &a.terms {
        terms.push((g.clone(), h.mul(c, s)?));
    }
    Ok(HahnSeries {
        sort: a.sort.clone(),
        terms,
        precision: a.precision.clone(),
    })
}

fn derivative(f: &[HahnSeries], sort: &Arc<HahnSort>) -> Result<Vec<HahnSeries>> {
    let mut out = Vec::new();
    for (i, c) in f.iter().enumerate().skip(1) {
        out.push(scale_by_scalar(c, &small_scalar(sort, i)?)?);
    }
    Ok(out)
}

/// Newton refinement of a polynomial root.  `f` lists coefficients with
/// the constant term first, `r0` is the start point, and the returned root
/// satisfies the equation up to exponent `target`.  Requires the start to
/// be inside the Newton basin: `val(f(r0)) > 2 val(f'(r0))`.
pub fn hensel_lift(f: &[HahnSeries], r0: &HahnSeries, target: &GroupElem) -> Result<HahnSeries> {
    if f.len() < 2 {
        return Err(Error::Precondition(
            "a polynomial of degree at least one is needed".into(),
        ));
    }
    let sort = r0.sort().clone();
    for c in f {
        same_sort(r0, c)?;
    }
    if target.rank() != Some(sort.rank()) {
        return Err(Error::Precondition(format!(
            "target {target} does not live in Z^{}",
            sort.rank()
        )));
    }
    let fp = derivative(f, &sort)?;
    let f_at = hs_eval(f, r0)?;
    let v0 = match f_at.terms().first() {
        Some((g, _)) => g.clone(),
        None => match f_at.precision() {
            Precision::Exact => return Ok(r0.clone()),
            Precision::Cut(p) => {
                return Err(Error::InsufficientPrecision(format!(
                    "f(r) is smaller than the working precision t^{p}"
                )))
            }
        },
    };
    let v1 = hs_val(&hs_eval(&fp, r0)?).map_err(|e| match e {
        Error::IndistinguishableFromZero { precision } => Error::InsufficientPrecision(format!(
            "f'(r) is smaller than the working precision t^{precision}"
        )),
        e => e,
    })?;
    if v1.is_infinite() {
        return Err(Error::NewtonConditionFails(
            "the derivative vanishes at the start point".into(),
        ));
    }
    if v0 <= v1.double() {
        return Err(Error::NewtonConditionFails(format!(
            "val(f(r)) = {v0} is not above 2*val(f'(r)) = {}",
            v1.double()
        )));
    }
    let mut r = r0.clone();
    let mut steps = 0;
    loop {
        let fr = hs_eval(f, &r)?;
        let vfr = match fr.terms().first() {
            Some((g, _)) if *g > *target => break,
            Some((g, _)) => g.clone(),
            None => match fr.precision() {
                Precision::Exact => break,
                Precision::Cut(p) if *p > *target => break,
                Precision::Cut(p) => {
                    return Err(Error::InsufficientPrecision(format!(
                        "the defect is smaller than the working precision t^{p}"
                    )))
                }
            },
        };
        if steps >= 32 {
            return Err(Error::UnreachablePrecision { steps });
        }
        steps += 1;
        let fpr = hs_eval(&fp, &r)?;
        let vfpr = hs_val(&fpr)?;
        if vfpr.is_infinite() {
            return Err(Error::NewtonConditionFails(
                "the derivative vanished during refinement".into(),
            ));
        }
        // the correction needs accuracy target - val(f(r)) + val(f'(r));
        // anything finer is truncated away
        let inv_target = target.sub(&vfr).add(&vfpr);
        let d = hs_mul(&fr, &hs_inverse(&fpr, &inv_target)?)?;
        r = hs_sub(&r, &d)?;
    }
    Ok(r.truncate(&Precision::Cut(bump(target))))
}
