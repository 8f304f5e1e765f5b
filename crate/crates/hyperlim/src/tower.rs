//! Towers of quotient hyperfields and their inverse limit.
//!
//! A tower is the family `H_{rho_i}(K)` over one ground field, where the
//! segments `rho_i = start + i*step` increase with the stage, together with
//! the canonical projections between stages.  When every segment doubles
//! inside some later one, the compatible sequences form a hyperfield again.
//!
//! The limit carrier works on closed forms: an element of the limit is a
//! rational expression over the ground field, and its projection to stage
//! `i` is computed by expanding the expression past `rho_i`.  A zero free
//! hypersum resolves through a doubled stage: any member of the stage sum
//! at `n(i)` projects to the same class at stage `i`, which is exactly the
//! uniqueness argument run forward.  Sums that contain zero at every stage
//! come back as a `ZeroBall` over the union norm; nothing is enumerated.
//!
//! Stage caches and resolver memos sit behind mutexes and the cached values
//! are immutable once written, so handles can be shared across threads.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::groundfield::{BaseField, FieldElem, FieldSeries, GroundField, RFExpr};
use crate::hyperfield::checks::{precision_skip, run_sampled, CheckConfig};
use crate::hyperfield::{
    seg_margin, values_above, FloorCut, HyperElem, Hyperfield, HyperfieldKind, SumSet,
};
use crate::ogroup::{gt_segment, seg_double_leq, GroupElem, InitialSegment};
use crate::report::{AxiomReport, CheckReport};
use crate::{Error, Result};

/// Affine stage generator: stage `i` is the segment `[0, start + i*step]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentGen {
    pub start: Vec<i64>,
    pub step: Vec<i64>,
}

impl SegmentGen {
    pub fn new(start: &[i64], step: &[i64]) -> SegmentGen {
        SegmentGen {
            start: start.to_vec(),
            step: step.to_vec(),
        }
    }

    pub fn at(&self, i: usize) -> InitialSegment {
        let coords: Vec<i64> = self
            .start
            .iter()
            .zip(&self.step)
            .map(|(s, d)| s + (i as i64) * d)
            .collect();
        InitialSegment::UpTo(GroupElem::Finite(coords))
    }

    /// Index of the first coordinate the stages actually grow in.
    fn leading_step(&self) -> Option<usize> {
        self.step.iter().position(|&d| d != 0)
    }
}

impl fmt::Display for SegmentGen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}+i*{}",
            GroupElem::Finite(self.start.clone()),
            GroupElem::Finite(self.step.clone())
        )
    }
}

/// JSON descriptor of a tower: ground field, stage generator, stage budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TowerSpec {
    pub ground: GroundSpec,
    pub segments: SegmentGen,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn default_budget() -> usize {
    8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundSpec {
    /// "Q" or "F_p".
    pub base: String,
    pub vars: Vec<String>,
}

impl GroundSpec {
    pub fn of(g: &GroundField) -> GroundSpec {
        GroundSpec {
            base: g.base().to_string(),
            vars: g.vars().to_vec(),
        }
    }

    pub fn build(&self) -> Result<GroundField> {
        let base = if self.base == "Q" {
            BaseField::Rationals
        } else if let Some(p) = self.base.strip_prefix("F_") {
            let p: u64 = p.parse().map_err(|_| Error::Syntax {
                offset: 0,
                message: format!("bad base field `{}`", self.base),
            })?;
            BaseField::Prime(p)
        } else {
            return Err(Error::Syntax {
                offset: 0,
                message: format!("bad base field `{}`, expected Q or F_p", self.base),
            });
        };
        let vars: Vec<&str> = self.vars.iter().map(|s| s.as_str()).collect();
        Ok(GroundField::new(base, &vars))
    }
}

impl TowerSpec {
    pub fn of(t: &Tower) -> TowerSpec {
        TowerSpec {
            ground: GroundSpec::of(t.ground()),
            segments: t.segments().clone(),
            budget: t.budget(),
        }
    }

    pub fn build(&self) -> Result<Arc<Tower>> {
        Tower::new(self.ground.build()?, self.segments.clone(), self.budget)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptor serialisation cannot fail")
    }

    pub fn from_json(text: &str) -> Result<TowerSpec> {
        serde_json::from_str(text).map_err(|e| Error::Syntax {
            offset: e.column(),
            message: format!("bad tower descriptor: {e}"),
        })
    }
}

/// An increasing family of quotients of one ground field, with cached stage
/// handles.  Constructing a tower does not require the doubling hypothesis;
/// only the limit does.
#[derive(Debug)]
pub struct Tower {
    ground: GroundField,
    segs: SegmentGen,
    budget: usize,
    stages: Mutex<HashMap<usize, Arc<Hyperfield>>>,
}

impl Tower {
    pub fn new(ground: GroundField, segs: SegmentGen, budget: usize) -> Result<Arc<Tower>> {
        if segs.start.len() != ground.rank() || segs.step.len() != ground.rank() {
            return Err(Error::Precondition(format!(
                "stage generator has rank {}, ground field has rank {}",
                segs.start.len(),
                ground.rank()
            )));
        }
        if segs.start.iter().any(|&c| c < 0) {
            return Err(Error::SegmentsNotIncreasing(format!(
                "start {} leaves the nonnegative cone",
                GroupElem::Finite(segs.start.clone())
            )));
        }
        // strictly increasing segments need a lexicographically positive step
        let positive = segs
            .step
            .iter()
            .copied()
            .find(|&d| d != 0)
            .map(|d| d > 0)
            .unwrap_or(false);
        if !positive {
            return Err(Error::SegmentsNotIncreasing(format!(
                "step {} is not positive",
                GroupElem::Finite(segs.step.clone())
            )));
        }
        Ok(Arc::new(Tower {
            ground,
            segs,
            budget,
            stages: Mutex::new(HashMap::new()),
        }))
    }

    /// The tower with the default stage budget.
    pub fn canonical(ground: GroundField, segs: SegmentGen) -> Result<Arc<Tower>> {
        Tower::new(ground, segs, default_budget())
    }

    pub fn ground(&self) -> &GroundField {
        &self.ground
    }

    pub fn segments(&self) -> &SegmentGen {
        &self.segs
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn segment(&self, i: usize) -> InitialSegment {
        self.segs.at(i)
    }

    /// The quotient hyperfield at stage `i`, cached per tower.
    pub fn stage(&self, i: usize) -> Arc<Hyperfield> {
        let mut stages = self.stages.lock().unwrap();
        stages
            .entry(i)
            .or_insert_with(|| {
                Hyperfield::quotient_of_ground(self.ground.clone(), self.segs.at(i))
            })
            .clone()
    }

    /// Stage owning the given segment, if any.  Solved from the generator,
    /// not by scanning.
    pub fn stage_index_of(&self, rho: &InitialSegment) -> Option<usize> {
        let g = match rho {
            InitialSegment::UpTo(GroupElem::Finite(c)) => c,
            _ => return None,
        };
        let p = self.segs.leading_step()?;
        let d = self.segs.step[p];
        let num = g.get(p)? - self.segs.start[p];
        if num < 0 || num % d != 0 {
            return None;
        }
        let i = (num / d) as usize;
        if self.segment(i).set_eq(rho) {
            Some(i)
        } else {
            None
        }
    }

    /// Smallest stage whose segment contains the double of stage `i`'s
    /// segment.  The search is bounded; for an affine generator a doubling
    /// stage, when one exists at all, appears well inside the bound.
    pub fn doubling_stage(&self, i: usize) -> Result<usize> {
        let ri = self.segment(i);
        let cap = 4 * (i + 1) + 2 * self.budget + 32;
        for j in (i + 1)..=cap {
            if seg_double_leq(&ri, &self.segment(j)) {
                return Ok(j);
            }
        }
        Err(Error::DoublingUnavailable(format!(
            "2*{} fits in no stage segment up to stage {} of the tower {}",
            ri, cap, self.segs
        )))
    }

    /// Union of all stage segments.  The segments grow in their leading
    /// step coordinate `p` and, under the doubling hypothesis, the start is
    /// zero before `p`; the union is then the cone that is free in every
    /// coordinate from `p` on.
    pub fn norm_union(&self) -> Result<InitialSegment> {
        let rank = self.ground.rank();
        let p = self
            .segs
            .leading_step()
            .expect("constructor rejects zero steps");
        Ok(InitialSegment::cone(rank, rank - p))
    }

    /// Canonical projection from stage `j` down to stage `i`.
    pub fn theta_map(self: &Arc<Self>, j: usize, i: usize) -> Result<IsometricMap> {
        IsometricMap::canonical(&self.stage(j), &self.stage(i))
    }
}

/// Towers used throughout the examples and the command line interface.
pub fn builtin_tower(name: &str, budget: usize) -> Result<Arc<Tower>> {
    let (ground, start, step): (GroundField, &[i64], &[i64]) = match name {
        "paper-0n" => (GroundField::rationals_xy(), &[0, 0], &[0, 1]),
        "paper-n0" => (GroundField::rationals_xy(), &[0, 0], &[1, 0]),
        "paper-nn" => (GroundField::rationals_xy(), &[0, 0], &[1, 1]),
        "paper-1m" => (GroundField::rationals_xy(), &[1, 0], &[0, 1]),
        "f3" => (GroundField::laurent_f3(), &[0], &[1]),
        _ => {
            return Err(Error::Precondition(format!(
                "unknown tower `{name}`; available: paper-0n, paper-n0, paper-nn, paper-1m, f3"
            )))
        }
    };
    Tower::new(ground, SegmentGen::new(start, step), budget)
}

// ---------------------------------------------------------------------------
// isometric maps

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MapKind {
    Identity,
    Canonical,
    /// Canonical followed by multiplication with `t^{v(x)}`: stays
    /// multiplicative but doubles every value, so IH3 must fail.
    ValueTwisted,
}

/// A concrete map between two hyperfield handles, checkable against the
/// isometry axioms.
#[derive(Debug, Clone)]
pub struct IsometricMap {
    source: Arc<Hyperfield>,
    target: Arc<Hyperfield>,
    kind: MapKind,
}

impl IsometricMap {
    pub fn identity(h: &Arc<Hyperfield>) -> IsometricMap {
        IsometricMap {
            source: h.clone(),
            target: h.clone(),
            kind: MapKind::Identity,
        }
    }

    /// The canonical projection onto a coarser quotient.  Fails early when
    /// no such map exists between the handles.
    pub fn canonical(source: &Arc<Hyperfield>, target: &Arc<Hyperfield>) -> Result<IsometricMap> {
        source.theta(&source.one(), target)?;
        Ok(IsometricMap {
            source: source.clone(),
            target: target.clone(),
            kind: MapKind::Canonical,
        })
    }

    /// A deliberately broken variant for negative tests: composes the
    /// canonical map with a value dependent scaling.
    pub fn with_planted_scaling(
        source: &Arc<Hyperfield>,
        target: &Arc<Hyperfield>,
    ) -> Result<IsometricMap> {
        source.theta(&source.one(), target)?;
        Ok(IsometricMap {
            source: source.clone(),
            target: target.clone(),
            kind: MapKind::ValueTwisted,
        })
    }

    pub fn source(&self) -> &Arc<Hyperfield> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Hyperfield> {
        &self.target
    }

    pub fn apply(&self, x: &HyperElem) -> Result<HyperElem> {
        match self.kind {
            MapKind::Identity => {
                self.source.eq(x, x)?;
                Ok(x.clone())
            }
            MapKind::Canonical => self.source.theta(x, &self.target),
            MapKind::ValueTwisted => {
                let y = self.source.theta(x, &self.target)?;
                if self.target.is_zero(&y)? {
                    return Ok(y);
                }
                let v = self.target.val(&y)?;
                if v.is_zero() {
                    return Ok(y);
                }
                let m = self
                    .target
                    .elem_of_value(&v)
                    .ok_or_else(|| Error::Precondition("no monomial of that value".into()))?;
                self.target.mul(&y, &m)
            }
        }
    }

    /// Exact right inverse on classes: rebuild a source element whose image
    /// is the given target element.  Goes through the canonical window, so
    /// the lifted representative is an exact polynomial.
    fn lift(&self, x: &HyperElem) -> Result<HyperElem> {
        if let MapKind::Identity = self.kind {
            return Ok(x.clone());
        }
        let poly = match self.target.canonical_window(x)? {
            None => return Ok(self.source.zero()),
            Some((v, coeffs)) => {
                let rank = self
                    .target
                    .value_rank()
                    .ok_or_else(|| Error::Precondition("target carries no valuation".into()))?;
                let offsets = self
                    .target
                    .norm()
                    .and_then(|n| n.window_offsets(rank))
                    .ok_or_else(|| Error::Precondition("target has no finite window".into()))?;
                let mut s = FieldSeries::zero(coeffs[0].field(), rank);
                for (off, c) in offsets.iter().zip(&coeffs) {
                    s = s.add(&FieldSeries::monomial(c.field(), v.add(off), c.clone()));
                }
                s
            }
        };
        match self.source.kind() {
            HyperfieldKind::Limit(_) => {
                let e = expr_of_series(&poly).ok_or_else(|| {
                    Error::Precondition("window coefficients too large for an expression".into())
                })?;
                self.source.from_expr(e)
            }
            _ => self.source.from_series(poly),
        }
    }
}

/// IH1 (multiplicative, fixes 0 and 1), IH2' (forward sum membership), the
/// two directions of the IH2/IH2' equivalence, and IH3 (value preserving),
/// all on seeded samples.
pub fn check_isometric(m: &IsometricMap, cfg: &CheckConfig) -> Result<CheckReport> {
    let src = &m.source;
    let tgt = &m.target;
    let mut report = CheckReport::new(&format!(
        "isometric map {} -> {} (seed {}, trials {})",
        src.name(),
        tgt.name(),
        cfg.seed,
        cfg.trials
    ));

    // fixed points first: theta(0)=0, theta(1)=1
    let fixed = (|| -> Result<Option<String>> {
        if !tgt.is_zero(&m.apply(&src.zero())?)? {
            return Ok(Some("zero does not map to zero".into()));
        }
        if !tgt.eq(&m.apply(&src.one())?, &tgt.one())? {
            return Ok(Some("one does not map to one".into()));
        }
        Ok(None)
    })();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ih1 = run_sampled("IH1", cfg.seed, cfg.trials, || {
        let x = src.sample(&mut rng);
        let y = src.sample(&mut rng);
        let lhs = m.apply(&src.mul(&x, &y)?)?;
        let rhs = tgt.mul(&m.apply(&x)?, &m.apply(&y)?)?;
        if tgt.eq(&lhs, &rhs)? {
            Ok(None)
        } else {
            Ok(Some(format!(
                "x={} y={}: image of the product differs from the product of images",
                src.display_elem(&x),
                src.display_elem(&y)
            )))
        }
    });
    match fixed {
        Ok(Some(w)) => ih1 = AxiomReport::fail("IH1", w, cfg.seed, 0),
        Err(e) => return Err(e),
        Ok(None) => {}
    }
    report.push(ih1);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("IH2'", cfg.seed, cfg.trials, || {
        let x = src.sample(&mut rng);
        let y = src.sample(&mut rng);
        let s = src.hypersum(&x, &y)?;
        let ts = tgt.hypersum(&m.apply(&x)?, &m.apply(&y)?)?;
        for z in src.probes(&s, &mut rng, cfg.probes)? {
            if !tgt.member(&ts, &m.apply(&z)?)? {
                return Ok(Some(format!(
                    "x={} y={} z={}: image of a member misses the image sum",
                    src.display_elem(&x),
                    src.display_elem(&y),
                    src.display_elem(&z)
                )));
            }
        }
        Ok(None)
    }));

    // IH2 forward: replace x by x*tau with tau in the kernel of theta, so
    // the preimage classes of x', y' really get mixed, then check that the
    // sum still lands inside x' + y'
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("IH2-preimage-mix", cfg.seed, cfg.trials, || {
        let x = src.sample(&mut rng);
        let y = src.sample(&mut rng);
        let x1 = m.apply(&x)?;
        let y1 = m.apply(&y)?;
        let x0 = match kernel_perturbation(src, tgt, &mut rng)? {
            Some(tau) => {
                let moved = src.mul(&x, &tau)?;
                if !tgt.eq(&m.apply(&moved)?, &x1)? {
                    return Ok(Some(format!(
                        "tau={} should be in the kernel but moves the image of {}",
                        src.display_elem(&tau),
                        src.display_elem(&x)
                    )));
                }
                moved
            }
            None => x.clone(),
        };
        let s = src.hypersum(&x0, &y)?;
        let ts = tgt.hypersum(&x1, &y1)?;
        for z in src.probes(&s, &mut rng, cfg.probes)? {
            if !tgt.member(&ts, &m.apply(&z)?)? {
                return Ok(Some(format!(
                    "x={} y={}: perturbed sum escapes the image sum at {}",
                    src.display_elem(&x),
                    src.display_elem(&y),
                    src.display_elem(&z)
                )));
            }
        }
        Ok(None)
    }));

    // IH2 backward: every member of x' + y' lifts to the source, together
    // with a certified decomposition z in u + partner where u maps onto the
    // matching operand
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("IH2-lift", cfg.seed, cfg.trials, || {
        let x = src.sample(&mut rng);
        let y = src.sample(&mut rng);
        if src.is_zero(&x)? || src.is_zero(&y)? {
            return Ok(None);
        }
        let x1 = m.apply(&x)?;
        let y1 = m.apply(&y)?;
        let ts = tgt.hypersum(&x1, &y1)?;
        for w in tgt.probes(&ts, &mut rng, cfg.probes)? {
            let z = m.lift(&w)?;
            if !tgt.eq(&m.apply(&z)?, &w)? {
                return Ok(Some(format!(
                    "lift of {} maps back to a different class",
                    tgt.display_elem(&w)
                )));
            }
            // try subtracting either operand; the side whose image carries
            // the minimum value certifies.  Finite carriers have no
            // representative arithmetic and are searched instead.
            let mut certified = false;
            for (partner, operand_image) in [(&y, &x1), (&x, &y1)] {
                let candidates = if matches!(src.kind(), HyperfieldKind::Finite(_)) {
                    src.enumerate()?
                } else {
                    vec![src.payload_sub(&z, partner)]
                };
                for u in candidates {
                    if tgt.eq(&m.apply(&u)?, operand_image)?
                        && src.member(&src.hypersum(&u, partner)?, &z)?
                    {
                        certified = true;
                        break;
                    }
                }
                if certified {
                    break;
                }
            }
            if !certified {
                return Ok(Some(format!(
                    "member {} of {}+{} has no certified preimage decomposition",
                    tgt.display_elem(&w),
                    tgt.display_elem(&x1),
                    tgt.display_elem(&y1)
                )));
            }
        }
        Ok(None)
    }));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("IH3", cfg.seed, cfg.trials, || {
        let x = src.sample(&mut rng);
        let vs = src.val(&x)?;
        let vt = tgt.val(&m.apply(&x)?)?;
        if vs == vt {
            Ok(None)
        } else {
            Ok(Some(format!(
                "x={}: value {} maps to value {}",
                src.display_elem(&x),
                vs,
                vt
            )))
        }
    }));

    Ok(report)
}

/// An element `1 + d` with `v(d)` strictly above the target norm: a kernel
/// element of the canonical projection.  `None` when the source has no
/// such perturbation (trivially valued carriers).
fn kernel_perturbation<R: Rng>(
    src: &Arc<Hyperfield>,
    tgt: &Arc<Hyperfield>,
    rng: &mut R,
) -> Result<Option<HyperElem>> {
    let norm = match tgt.norm() {
        Some(n) => n,
        None => return Ok(None),
    };
    let rank = src.value_rank().unwrap_or(0);
    let floor = FloorCut {
        rho: norm,
        base: GroupElem::zero(rank),
    };
    let vals = match values_above(&floor, rank, 3) {
        Some(v) if !v.is_empty() => v,
        _ => return Ok(None),
    };
    let pick = &vals[rng.gen_range(0..vals.len())];
    let d = match src.elem_of_value(pick) {
        Some(d) => d,
        None => return Ok(None),
    };
    Ok(Some(src.payload_add(&src.one(), &d)))
}

/// The isomorphism induced on source classes modulo `T = theta^{-1}(1)`.
/// Runs the full isometry battery on the canonical map and then checks the
/// quotient specific items: `T` really is the kernel, the map is constant
/// on `T`-cosets, injective on them (agreement decided through canonical
/// windows, independently of the target's own equality), and surjective.
pub fn induced_iso(
    source: &Arc<Hyperfield>,
    target: &Arc<Hyperfield>,
    cfg: &CheckConfig,
) -> Result<CheckReport> {
    let m = IsometricMap::canonical(source, target)?;
    let mut report = check_isometric(&m, cfg)?;
    report.subject = format!(
        "induced iso {} / T -> {} (seed {}, trials {})",
        source.name(),
        target.name(),
        cfg.seed,
        cfg.trials
    );

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("kernel", cfg.seed, cfg.trials, || {
        let tau = match kernel_perturbation(source, target, &mut rng)? {
            Some(t) => t,
            None => return Ok(None),
        };
        if !target.eq(&m.apply(&tau)?, &target.one())? {
            return Ok(Some(format!(
                "{} lies in 1 + m but does not map to 1",
                source.display_elem(&tau)
            )));
        }
        // an element at the cut, not above it, must leave the kernel
        if let Some(InitialSegment::UpTo(g)) = target.norm() {
            if let Some(d) = source.elem_of_value(&g) {
                let boundary = source.payload_add(&source.one(), &d);
                if target.eq(&m.apply(&boundary)?, &target.one())? {
                    return Ok(Some(format!(
                        "{} sits at the cut yet still maps to 1",
                        source.display_elem(&boundary)
                    )));
                }
            }
        }
        Ok(None)
    }));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("well-defined", cfg.seed, cfg.trials, || {
        let a = source.sample(&mut rng);
        let tau = match kernel_perturbation(source, target, &mut rng)? {
            Some(t) => t,
            None => return Ok(None),
        };
        if target.eq(&m.apply(&a)?, &m.apply(&source.mul(&a, &tau)?)?)? {
            Ok(None)
        } else {
            Ok(Some(format!(
                "images of {} differ across the T-coset",
                source.display_elem(&a)
            )))
        }
    }));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("injective", cfg.seed, cfg.trials, || {
        let a = source.sample(&mut rng);
        let b = source.sample(&mut rng);
        let image_eq = target.eq(&m.apply(&a)?, &m.apply(&b)?)?;
        let class_eq = windows_agree(source, target, &a, &b)?;
        if image_eq == class_eq {
            Ok(None)
        } else {
            Ok(Some(format!(
                "a={} b={}: images {}equal but windows {}agree",
                source.display_elem(&a),
                source.display_elem(&b),
                if image_eq { "" } else { "un" },
                if class_eq { "" } else { "dis" }
            )))
        }
    }));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.trials {
        let w = target.sample(&mut rng);
        let z = match m.lift(&w) {
            Ok(z) => z,
            Err(e) if precision_skip(&e) => continue,
            Err(e) => return Err(e),
        };
        if !target.eq(&m.apply(&z)?, &w)? {
            return Err(Error::NotSurjective(target.display_elem(&w)));
        }
    }
    report.push(AxiomReport::pass("surjective", cfg.seed, cfg.trials));

    Ok(report)
}

/// Class agreement modulo the target segment, decided on the source side
/// through value and window coefficients alone.
fn windows_agree(
    source: &Arc<Hyperfield>,
    target: &Arc<Hyperfield>,
    a: &HyperElem,
    b: &HyperElem,
) -> Result<bool> {
    let (za, zb) = (source.is_zero(a)?, source.is_zero(b)?);
    if za || zb {
        return Ok(za == zb);
    }
    let (va, vb) = (source.val(a)?, source.val(b)?);
    if va != vb {
        return Ok(false);
    }
    let rho = target
        .norm()
        .ok_or_else(|| Error::Precondition("target carries no valuation".into()))?;
    let rank = source
        .value_rank()
        .ok_or_else(|| Error::Precondition("source carries no valuation".into()))?;
    let offsets = rho
        .window_offsets(rank)
        .ok_or_else(|| Error::Precondition("target segment has no finite window".into()))?;
    let (sa, sb) = (source.series_of(a), source.series_of(b));
    for off in &offsets {
        let g = va.add(off);
        if sa.known_coeff(&g)? != sb.known_coeff(&g)? {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// the limit carrier

/// Carrier data of a limit handle: the tower and the union norm.
#[derive(Debug)]
pub struct LimitCarrier {
    pub(crate) tower: Arc<Tower>,
    pub(crate) norm: InitialSegment,
}

/// Element of a limit handle: a closed rational expression, possibly
/// remembered as a hypersum of earlier elements so that resolution can run
/// through the stage sums.  Stage projections are memoised; every new
/// resolution is checked for compatibility against the memo.
#[derive(Debug, Clone)]
pub struct LimitElem {
    inner: Arc<LimitInner>,
}

#[derive(Debug)]
struct LimitInner {
    kind: LimitKind,
    val: OnceLock<GroupElem>,
    memo: Mutex<HashMap<usize, HyperElem>>,
}

#[derive(Debug)]
enum LimitKind {
    Expr(RFExpr),
    /// A zero free hypersum; `expr` is the sum of the part expressions and
    /// `base` caches the first stage whose stage sum is zero free.
    StageSum {
        parts: Vec<LimitElem>,
        expr: RFExpr,
        base: OnceLock<usize>,
    },
}

impl LimitElem {
    pub(crate) fn from_expr(e: RFExpr) -> LimitElem {
        LimitElem {
            inner: Arc::new(LimitInner {
                kind: LimitKind::Expr(e),
                val: OnceLock::new(),
                memo: Mutex::new(HashMap::new()),
            }),
        }
    }

    pub(crate) fn stage_sum(parts: Vec<LimitElem>, expr: RFExpr) -> LimitElem {
        LimitElem {
            inner: Arc::new(LimitInner {
                kind: LimitKind::StageSum {
                    parts,
                    expr,
                    base: OnceLock::new(),
                },
                val: OnceLock::new(),
                memo: Mutex::new(HashMap::new()),
            }),
        }
    }

    /// The closed form.  For a hypersum element this is the sum of the
    /// operand representatives, which is a representative of the class.
    pub fn expr(&self) -> &RFExpr {
        match &self.inner.kind {
            LimitKind::Expr(e) => e,
            LimitKind::StageSum { expr, .. } => expr,
        }
    }

    pub(crate) fn val(&self, g: &GroundField) -> Result<GroupElem> {
        if let Some(v) = self.inner.val.get() {
            return Ok(v.clone());
        }
        let v = g.val(self.expr())?;
        let _ = self.inner.val.set(v.clone());
        Ok(v)
    }

    /// Projection to stage `i`.
    ///
    /// A plain expression expands directly.  A hypersum resolves at the
    /// doubling stage `m = n(max(i, base))`: from `base` on the stage sums
    /// are zero free, and the doubled segment makes every member of the
    /// stage `m` sum project to one and the same class at stage `i`; that
    /// class is the resolution.
    pub(crate) fn resolve(&self, tower: &Arc<Tower>, i: usize) -> Result<HyperElem> {
        if let Some(e) = self.inner.memo.lock().unwrap().get(&i) {
            return Ok(e.clone());
        }
        let stage = tower.stage(i);
        let g = tower.ground();
        let out = match &self.inner.kind {
            LimitKind::Expr(e) => {
                let v = g.val(e)?;
                if v.is_infinite() {
                    stage.zero()
                } else {
                    let target = v.add(&seg_margin(&tower.segment(i), g.rank()));
                    stage.from_series(g.expand(e, &target)?)?
                }
            }
            LimitKind::StageSum { parts, expr, base } => {
                let b = match base.get() {
                    Some(b) => *b,
                    None => {
                        let b = zero_free_stage(tower, parts, expr)?;
                        let _ = base.set(b);
                        b
                    }
                };
                let m = tower.doubling_stage(i.max(b))?;
                let sm = tower.stage(m);
                let resolved: Vec<HyperElem> = parts
                    .iter()
                    .map(|p| p.resolve(tower, m))
                    .collect::<Result<_>>()?;
                let s = sm.nary_sum(&resolved)?;
                debug_assert!(
                    !matches!(s, SumSet::ZeroBall { .. }),
                    "stage sums are zero free beyond the base stage"
                );
                let w = sm
                    .witness_of(&s)
                    .expect("zero free stage sum has a witness");
                sm.theta(&w, &stage)?
            }
        };
        let mut memo = self.inner.memo.lock().unwrap();
        for (&j, prev) in memo.iter() {
            let ok = if j < i {
                let down = stage.theta(&out, &tower.stage(j))?;
                tower.stage(j).eq(&down, prev)?
            } else {
                let down = tower.stage(j).theta(prev, &stage)?;
                stage.eq(&down, &out)?
            };
            assert!(
                ok,
                "resolution at stage {i} is incompatible with the memo at stage {j}"
            );
        }
        memo.insert(i, out.clone());
        Ok(out)
    }
}

/// First stage from which on the stage sums of `parts` cannot contain
/// zero.  Exists precisely because the caller classified the sum as zero
/// free against the union norm.
fn zero_free_stage(tower: &Arc<Tower>, parts: &[LimitElem], expr: &RFExpr) -> Result<usize> {
    let g = tower.ground();
    let vw = g.val(expr)?;
    let mut minv = GroupElem::Infinity;
    for p in parts {
        let v = p.val(g)?;
        if v < minv {
            minv = v;
        }
    }
    let mut j = 0usize;
    while gt_segment(&vw, &tower.segment(j), &minv) {
        j += 1;
        assert!(
            j < 100_000,
            "witness value above every stage cut contradicts the zero free classification"
        );
    }
    Ok(j)
}

/// The inverse limit of the tower as a hyperfield handle.
///
/// Requires the doubling hypothesis on every stage within the budget;
/// without it the compatible sequences need not be closed under sums (see
/// [`detect_empty_sum`]) and the handle is refused.
pub fn limit_hyperfield(tower: &Arc<Tower>) -> Result<Arc<Hyperfield>> {
    for i in 0..=tower.budget() {
        tower.doubling_stage(i)?;
    }
    let norm = tower.norm_union()?;
    for i in 0..=tower.budget() {
        if !tower.segment(i).subset_of(&norm) {
            return Err(Error::HypothesisMismatch(format!(
                "stage segment {} escapes the union norm {}",
                tower.segment(i),
                norm
            )));
        }
    }
    Ok(Hyperfield::limit(LimitCarrier {
        tower: tower.clone(),
        norm,
    }))
}

/// `true` when the union norm is the whole nonnegative cone: every sum is
/// then a singleton or `{0}`, and the handle behaves as a valued field.
pub fn field_mode(limit: &Hyperfield) -> Result<bool> {
    match limit.kind() {
        HyperfieldKind::Limit(l) => Ok(matches!(
            l.norm,
            InitialSegment::Cone { rank, k } if k == rank
        )),
        _ => Err(Error::Precondition("not a limit handle".into())),
    }
}

/// The hypersum `a + b + c` on a limit handle, resolved per the uniqueness
/// claim: `ZeroBall` over the union norm when zero sits in every stage sum,
/// otherwise the singleton of the common projection class.
pub fn triple_sum_resolve(
    limit: &Hyperfield,
    a: &HyperElem,
    b: &HyperElem,
    c: &HyperElem,
) -> Result<SumSet> {
    if !matches!(limit.kind(), HyperfieldKind::Limit(_)) {
        return Err(Error::Precondition("not a limit handle".into()));
    }
    limit.nary_sum(&[a.clone(), b.clone(), c.clone()])
}

/// Stage stable value of a limit element.
pub fn limit_val(limit: &Hyperfield, a: &HyperElem) -> Result<GroupElem> {
    limit.val(a)
}

/// Ultrametric distance, observed stage by stage; `Undetermined` when the
/// projections agree at every stage up to the budget.
pub fn limit_d(limit: &Hyperfield, a: &HyperElem, b: &HyperElem) -> Result<GroupElem> {
    limit.ultrametric_d(a, b)
}

/// Stage bounded equality: the projections agree at every stage up to `i`.
pub fn limit_eq_up_to(limit: &Hyperfield, a: &HyperElem, b: &HyperElem, i: usize) -> Result<bool> {
    let l = match limit.kind() {
        HyperfieldKind::Limit(l) => l,
        _ => return Err(Error::Precondition("not a limit handle".into())),
    };
    let (ea, eb) = (limit.limit_of(a), limit.limit_of(b));
    for j in 0..=i {
        let stage = l.tower.stage(j);
        if !stage.eq(&ea.resolve(&l.tower, j)?, &eb.resolve(&l.tower, j)?)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The projection of the limit onto stage `i` induces an isomorphism of
/// the further quotient `H_{N_i}` with the stage itself.  Runs the full
/// isometry battery on the projection, then the quotient specific items:
/// class agreement modulo `rho_i` matches stage equality, and every stage
/// class lifts.
pub fn limit_factor_iso(
    limit: &Arc<Hyperfield>,
    i: usize,
    cfg: &CheckConfig,
) -> Result<CheckReport> {
    let l = match limit.kind() {
        HyperfieldKind::Limit(l) => l,
        _ => return Err(Error::Precondition("not a limit handle".into())),
    };
    let stage = l.tower.stage(i);
    let m = IsometricMap::canonical(limit, &stage)?;
    let mut report = check_isometric(&m, cfg)?;
    report.subject = format!(
        "limit modulo {} -> {} (seed {}, trials {})",
        l.tower.segment(i),
        stage.name(),
        cfg.seed,
        cfg.trials
    );

    let rho = l.tower.segment(i);
    let g = l.tower.ground().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("classes", cfg.seed, cfg.trials, || {
        let a = limit.sample(&mut rng);
        let b = limit.sample(&mut rng);
        // class agreement modulo rho_i, straight off the closed forms
        let diff = RFExpr::Sub(
            Box::new(limit.limit_of(&a).expr().clone()),
            Box::new(limit.limit_of(&b).expr().clone()),
        );
        let vd = g.val(&diff)?;
        let va = g.val(limit.limit_of(&a).expr())?;
        let coset_eq = if vd.is_infinite() {
            true
        } else if va.is_infinite() {
            false
        } else {
            gt_segment(&vd, &rho, &va)
        };
        let stage_eq = stage.eq(&m.apply(&a)?, &m.apply(&b)?)?;
        if coset_eq == stage_eq {
            Ok(None)
        } else {
            Ok(Some(format!(
                "a={} b={}: coset agreement {} but stage classes {}",
                limit.display_elem(&a),
                limit.display_elem(&b),
                coset_eq,
                stage_eq
            )))
        }
    }));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("surjective", cfg.seed, cfg.trials, || {
        let w = stage.sample(&mut rng);
        let z = m.lift(&w)?;
        if stage.eq(&m.apply(&z)?, &w)? {
            Ok(None)
        } else {
            Ok(Some(format!(
                "stage class {} has no preimage through the window lift",
                stage.display_elem(&w)
            )))
        }
    }));

    Ok(report)
}

// ---------------------------------------------------------------------------
// empty sums in towers without doubling

/// A stage indexed family of candidate representatives, the raw material
/// of a would-be limit element.
#[derive(Debug, Clone)]
pub enum StageFamily {
    /// The same closed form at every stage.
    Constant(RFExpr),
    /// `prefactor * (1 + t + ... + t^stage)` in the variable with the given
    /// index: one more term per stage.
    PartialPowerSum { prefactor: RFExpr, var: usize },
}

impl StageFamily {
    pub fn constant(e: RFExpr) -> StageFamily {
        StageFamily::Constant(e)
    }

    pub fn expr_at(&self, stage: usize) -> RFExpr {
        match self {
            StageFamily::Constant(e) => e.clone(),
            StageFamily::PartialPowerSum { prefactor, var } => {
                let mut sum = RFExpr::Lit(1);
                for k in 1..=stage {
                    sum = RFExpr::Add(
                        Box::new(sum),
                        Box::new(RFExpr::Pow(Box::new(RFExpr::Var(*var)), k as u32)),
                    );
                }
                RFExpr::Mul(Box::new(prefactor.clone()), Box::new(sum))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum EmptySumOutcome {
    /// The stage sums force members that no single sequence can match:
    /// the witnesses at the two quoted stages are incompatible.
    Empty {
        stage_lo: usize,
        stage_hi: usize,
        detail: String,
    },
    /// A compatible family of stage members was exhibited.
    NonEmpty { detail: String },
    Inconclusive { detail: String },
}

/// Look for a compatible family of members of the stage sums `a_n + b_n`
/// over stages `0..=m_max`.  When every stage sum is a singleton the
/// search is exhaustive: the forced witnesses either cohere under the
/// projections or the sum of the families is provably empty.
pub fn detect_empty_sum(
    tower: &Arc<Tower>,
    a: &StageFamily,
    b: &StageFamily,
    m_max: usize,
) -> Result<EmptySumOutcome> {
    if m_max == 0 {
        return Ok(EmptySumOutcome::Inconclusive {
            detail: "a single stage imposes no compatibility constraint".into(),
        });
    }
    let mut forced: Vec<(usize, HyperElem)> = Vec::new();
    let mut all_singleton = true;
    let mut all_zero = true;
    for n in 0..=m_max {
        let stage = tower.stage(n);
        let xa = stage.from_expr(a.expr_at(n))?;
        let xb = stage.from_expr(b.expr_at(n))?;
        match stage.hypersum(&xa, &xb)? {
            SumSet::Singleton(w) => {
                all_zero = false;
                forced.push((n, w));
            }
            SumSet::ZeroBall { .. } => all_singleton = false,
            _ => {
                all_singleton = false;
                all_zero = false;
            }
        }
    }
    if all_singleton {
        for hi in 1..forced.len() {
            let (m, wm) = &forced[hi];
            for (n, wn) in &forced[..hi] {
                let stage_n = tower.stage(*n);
                let down = tower.stage(*m).theta(wm, &stage_n)?;
                if !stage_n.eq(&down, wn)? {
                    let d = stage_n.ultrametric_d(&down, wn)?;
                    return Ok(EmptySumOutcome::Empty {
                        stage_lo: *n,
                        stage_hi: *m,
                        detail: format!(
                            "stage {m} forces {} which projects to {}, but stage {n} forces {}; \
                             the representatives differ at value {}, inside the cut {}",
                            tower.stage(*m).display_elem(wm),
                            stage_n.display_elem(&down),
                            stage_n.display_elem(wn),
                            d,
                            tower.segment(*n)
                        ),
                    });
                }
            }
        }
        let family = forced
            .iter()
            .map(|(n, w)| format!("stage {n}: {}", tower.stage(*n).display_elem(w)))
            .collect::<Vec<_>>()
            .join("; ");
        return Ok(EmptySumOutcome::NonEmpty {
            detail: format!("the forced members cohere: {family}"),
        });
    }
    if all_zero {
        return Ok(EmptySumOutcome::NonEmpty {
            detail: "zero is a member at every stage; the constant zero family is compatible"
                .into(),
        });
    }
    Ok(EmptySumOutcome::Inconclusive {
        detail: "mixed stage sum shapes; the bounded search covers forced members only".into(),
    })
}

// ---------------------------------------------------------------------------
// expression utilities shared with the hyperfield dispatch

/// `t^gamma` as an expression, `None` on rank mismatch.
pub(crate) fn monomial_expr(rank: usize, gamma: &GroupElem) -> Option<RFExpr> {
    let coords = match gamma {
        GroupElem::Finite(c) if c.len() == rank => c,
        _ => return None,
    };
    let mut e = RFExpr::Lit(1);
    for (j, &c) in coords.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let p = RFExpr::Pow(Box::new(RFExpr::Var(j)), c.unsigned_abs() as u32);
        e = if c > 0 {
            RFExpr::Mul(Box::new(e), Box::new(p))
        } else {
            RFExpr::Div(Box::new(e), Box::new(p))
        };
    }
    Some(e)
}

fn expr_of_coeff(c: &FieldElem) -> Option<RFExpr> {
    use num_traits::{Signed, ToPrimitive};
    match c {
        FieldElem::Mod { value, .. } => Some(RFExpr::Lit(*value)),
        FieldElem::Rat(r) => {
            let negative = r.numer().is_negative();
            let num = r.numer().abs().to_u64()?;
            let den = r.denom().to_u64()?;
            let mut e = if den == 1 {
                RFExpr::Lit(num)
            } else {
                RFExpr::Div(Box::new(RFExpr::Lit(num)), Box::new(RFExpr::Lit(den)))
            };
            if negative {
                e = RFExpr::Sub(Box::new(RFExpr::Lit(0)), Box::new(e));
            }
            Some(e)
        }
    }
}

/// An exact series as a closed form, `None` when a coefficient does not
/// fit a literal.
pub(crate) fn expr_of_series(s: &FieldSeries) -> Option<RFExpr> {
    let mut out: Option<RFExpr> = None;
    for (gamma, c) in s.terms() {
        let term = RFExpr::Mul(
            Box::new(expr_of_coeff(c)?),
            Box::new(monomial_expr(s.rank(), gamma)?),
        );
        out = Some(match out {
            None => term,
            Some(acc) => RFExpr::Add(Box::new(acc), Box::new(term)),
        });
    }
    Some(out.unwrap_or(RFExpr::Lit(0)))
}

/// Random closed form for sampling based checks, mixing the boundary cases
/// (zero, one, minus one, monomials) with small polynomials.
pub(crate) fn sample_expr<R: Rng>(g: &GroundField, rng: &mut R) -> RFExpr {
    match rng.gen_range(0..24u32) {
        0 => RFExpr::Lit(0),
        1 | 2 => RFExpr::Lit(1),
        3 | 4 => RFExpr::Sub(Box::new(RFExpr::Lit(0)), Box::new(RFExpr::Lit(1))),
        5..=9 => {
            let gamma =
                GroupElem::Finite((0..g.rank()).map(|_| rng.gen_range(-2i64..=2)).collect());
            let c = expr_of_coeff(&g.sample_coeff(rng)).expect("sampled coefficients are small");
            RFExpr::Mul(
                Box::new(c),
                Box::new(monomial_expr(g.rank(), &gamma).expect("rank matches")),
            )
        }
        _ => expr_of_series(&g.sample_series(rng)).expect("sampled series are small"),
    }
}

/// Human readable form of an expression with the ground field's variable
/// names.
pub fn expr_text(e: &RFExpr, vars: &[String]) -> String {
    fn atom(e: &RFExpr) -> bool {
        matches!(e, RFExpr::Lit(_) | RFExpr::Var(_) | RFExpr::Pow(..))
    }
    fn tight(e: &RFExpr, vars: &[String]) -> String {
        let s = go(e, vars);
        if atom(e) {
            s
        } else {
            format!("({s})")
        }
    }
    fn go(e: &RFExpr, vars: &[String]) -> String {
        match e {
            RFExpr::Lit(n) => n.to_string(),
            RFExpr::Var(j) => vars
                .get(*j)
                .cloned()
                .unwrap_or_else(|| format!("t{j}")),
            RFExpr::Sub(a, b) if matches!(**a, RFExpr::Lit(0)) => {
                format!("-{}", tight(b, vars))
            }
            RFExpr::Add(a, b) => match &**b {
                RFExpr::Sub(z, c) if matches!(**z, RFExpr::Lit(0)) => {
                    format!("{} - {}", go(a, vars), tight(c, vars))
                }
                _ => format!("{} + {}", go(a, vars), go(b, vars)),
            },
            RFExpr::Sub(a, b) => format!("{} - {}", go(a, vars), tight(b, vars)),
            RFExpr::Mul(a, b) => {
                // drop unit factors left over from monomial assembly
                if matches!(**a, RFExpr::Lit(1)) {
                    return go(b, vars);
                }
                if matches!(**b, RFExpr::Lit(1)) {
                    return go(a, vars);
                }
                format!("{}*{}", tight(a, vars), tight(b, vars))
            }
            RFExpr::Div(a, b) => format!("{}/{}", tight(a, vars), tight(b, vars)),
            RFExpr::Pow(a, n) => format!("{}^{}", tight(a, vars), n),
        }
    }
    go(e, vars)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperfield::checks::{check_hyperfield, check_valuation};

    fn cfg() -> CheckConfig {
        CheckConfig {
            seed: 1,
            trials: 48,
            probes: 3,
        }
    }

    fn paper_tower() -> Arc<Tower> {
        builtin_tower("paper-0n", 8).unwrap()
    }

    #[test]
    fn segments_and_doubling_stages() {
        let t = paper_tower();
        assert!(t.segment(3).set_eq(&InitialSegment::up_to(&[0, 3])));
        for i in 0..=6 {
            let j = t.doubling_stage(i).unwrap();
            assert!(seg_double_leq(&t.segment(i), &t.segment(j)));
            assert!(j > i);
        }
        let f3 = builtin_tower("f3", 8).unwrap();
        assert_eq!(f3.doubling_stage(3).unwrap(), 6);

        // 2*(1,m) never fits below any (1,m'): the first coordinate doubles
        let bad = builtin_tower("paper-1m", 8).unwrap();
        assert!(matches!(
            bad.doubling_stage(0),
            Err(Error::DoublingUnavailable(_))
        ));
        assert!(matches!(
            limit_hyperfield(&bad),
            Err(Error::DoublingUnavailable(_))
        ));
    }

    #[test]
    fn tower_construction_guards() {
        let g = GroundField::rationals_xy();
        assert!(matches!(
            Tower::new(g.clone(), SegmentGen::new(&[0, 0], &[0, 0]), 8),
            Err(Error::SegmentsNotIncreasing(_))
        ));
        assert!(matches!(
            Tower::new(g.clone(), SegmentGen::new(&[0, 0], &[0, -1]), 8),
            Err(Error::SegmentsNotIncreasing(_))
        ));
        assert!(matches!(
            Tower::new(g.clone(), SegmentGen::new(&[0], &[1]), 8),
            Err(Error::Precondition(_))
        ));
        // a negative trailing coordinate is fine as long as the step is
        // lexicographically positive
        assert!(Tower::new(g, SegmentGen::new(&[0, 0], &[1, -1]), 8).is_ok());
    }

    #[test]
    fn descriptor_round_trip() {
        let t = paper_tower();
        let spec = TowerSpec::of(&t);
        let json = spec.to_json();
        assert_eq!(json, TowerSpec::from_json(&json).unwrap().to_json());
        let rebuilt = TowerSpec::from_json(&json).unwrap().build().unwrap();
        assert_eq!(rebuilt.segments(), t.segments());
        assert_eq!(rebuilt.ground().name(), t.ground().name());
        assert!(TowerSpec::from_json("{\"oops\":1}").is_err());
    }

    #[test]
    fn stage_index_lookup() {
        let t = paper_tower();
        assert_eq!(t.stage_index_of(&InitialSegment::up_to(&[0, 4])), Some(4));
        assert_eq!(t.stage_index_of(&InitialSegment::up_to(&[1, 4])), None);
        assert_eq!(t.stage_index_of(&InitialSegment::cone(2, 1)), None);
    }

    #[test]
    fn canonical_projection_is_isometric() {
        let t = builtin_tower("f3", 8).unwrap();
        let m = t.theta_map(2, 1).unwrap();
        let r = check_isometric(&m, &cfg()).unwrap();
        assert!(r.passed(), "{}", r.to_json());
    }

    #[test]
    fn identity_maps_are_isometric() {
        let stage = builtin_tower("f3", 8).unwrap().stage(1);
        let r = check_isometric(&IsometricMap::identity(&stage), &cfg()).unwrap();
        assert!(r.passed(), "{}", r.to_json());

        let k = Hyperfield::finite(crate::hyperfield::krasner_k().with_trivial_valuation());
        let r = check_isometric(&IsometricMap::identity(&k), &cfg()).unwrap();
        assert!(r.passed(), "{}", r.to_json());
    }

    #[test]
    fn planted_scaling_breaks_value_preservation() {
        let t = builtin_tower("f3", 8).unwrap();
        let m = IsometricMap::with_planted_scaling(&t.stage(2), &t.stage(1)).unwrap();
        let r = check_isometric(&m, &cfg()).unwrap();
        assert!(!r.passed());
        // the twist is multiplicative, so IH1 survives; the doubled values
        // must trip IH3
        let by_name = |n: &str| r.items.iter().find(|i| i.axiom == n).unwrap();
        assert!(by_name("IH1").passed(), "{}", r.to_json());
        assert!(!by_name("IH3").passed(), "{}", r.to_json());
    }

    #[test]
    fn induced_iso_on_laurent_quotients() {
        let t = builtin_tower("f3", 8).unwrap();
        let mut c = cfg();
        c.trials = 100;
        let r = induced_iso(&t.stage(2), &t.stage(1), &c).unwrap();
        assert!(r.passed(), "{}", r.to_json());
    }

    #[test]
    fn limit_handle_satisfies_the_axioms() {
        let lim = limit_hyperfield(&paper_tower()).unwrap();
        assert!(lim.norm().unwrap().set_eq(&InitialSegment::cone(2, 1)));
        assert!(!field_mode(&lim).unwrap());
        let r = check_hyperfield(&lim, &cfg()).unwrap();
        assert!(r.passed(), "{}", r.to_json());
        let r = check_valuation(&lim, &cfg()).unwrap();
        assert!(r.passed(), "{}", r.to_json());
    }

    #[test]
    fn limit_values_and_distances() {
        let lim = limit_hyperfield(&paper_tower()).unwrap();
        let x = lim.from_expr_str("x").unwrap();
        assert_eq!(limit_val(&lim, &x).unwrap(), GroupElem::from_coords(&[0, 1]));
        assert_eq!(
            limit_val(&lim, &lim.one()).unwrap(),
            GroupElem::zero(2)
        );

        let a = lim.from_expr_str("1").unwrap();
        let b = lim.from_expr_str("1+x").unwrap();
        assert_eq!(
            limit_d(&lim, &a, &b).unwrap(),
            GroupElem::from_coords(&[0, 1])
        );

        // y sits above every stage cut: the elements are equal in the limit
        let c = lim.from_expr_str("1+y").unwrap();
        assert!(lim.eq(&a, &c).unwrap());
        assert!(limit_eq_up_to(&lim, &a, &c, 5).unwrap());
    }

    #[test]
    fn equal_constants_stay_undetermined_within_budget() {
        let t = Tower::new(
            GroundField::rationals_xy(),
            SegmentGen::new(&[0, 0], &[0, 1]),
            5,
        )
        .unwrap();
        let lim = limit_hyperfield(&t).unwrap();
        let a = lim.from_expr_str("1").unwrap();
        let b = lim.from_expr_str("1").unwrap();
        match limit_d(&lim, &a, &b) {
            Err(Error::Undetermined(msg)) => {
                assert!(msg.contains(">= [0,(0,5)]"), "{msg}");
            }
            other => panic!("expected Undetermined, got {other:?}"),
        }
    }

    #[test]
    fn triple_sums_resolve_per_the_claim() {
        let lim = limit_hyperfield(&paper_tower()).unwrap();
        let one = lim.one();
        let mone = lim.neg(&one).unwrap();
        let zero = lim.zero();
        let x = lim.from_expr_str("x").unwrap();

        match triple_sum_resolve(&lim, &one, &mone, &zero).unwrap() {
            SumSet::ZeroBall { floor } => {
                assert!(floor.rho.set_eq(&InitialSegment::cone(2, 1)));
            }
            other => panic!("expected a zero ball, got {other:?}"),
        }

        match triple_sum_resolve(&lim, &one, &one, &one).unwrap() {
            SumSet::Singleton(w) => {
                assert!(lim.eq(&w, &lim.from_expr_str("3").unwrap()).unwrap());
            }
            other => panic!("expected a singleton, got {other:?}"),
        }

        match triple_sum_resolve(&lim, &one, &mone, &x).unwrap() {
            SumSet::Singleton(w) => {
                assert!(lim.eq(&w, &x).unwrap());
            }
            other => panic!("expected a singleton, got {other:?}"),
        }
    }

    #[test]
    fn claim_resolution_matches_direct_expansion() {
        // the hypersum witness resolves through the doubled stage; the same
        // class must come out of expanding the combined closed form
        let t = paper_tower();
        let lim = limit_hyperfield(&t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut resolved = 0;
        for _ in 0..40 {
            let a = lim.sample(&mut rng);
            let b = lim.sample(&mut rng);
            let s = lim.hypersum(&a, &b).unwrap();
            if let SumSet::Singleton(w) = s {
                let via_claim = lim.limit_of(&w);
                let via_expr = LimitElem::from_expr(via_claim.expr().clone());
                for i in 0..=4 {
                    let stage = t.stage(i);
                    let lhs = via_claim.resolve(&t, i).unwrap();
                    let rhs = via_expr.resolve(&t, i).unwrap();
                    assert!(stage.eq(&lhs, &rhs).unwrap());
                }
                resolved += 1;
            }
        }
        assert!(resolved > 10, "only {resolved} singleton sums in the sample");
    }

    #[test]
    fn binary_sums_are_consistent_with_every_stage() {
        let t = paper_tower();
        let lim = limit_hyperfield(&t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut stringent_pairs = 0;
        for _ in 0..40 {
            let a = lim.sample(&mut rng);
            let b = lim.sample(&mut rng);
            let s = lim.hypersum(&a, &b).unwrap();
            match &s {
                SumSet::Singleton(w) => {
                    for i in 0..=4 {
                        let stage = t.stage(i);
                        let si = stage
                            .hypersum(
                                &lim.limit_of(&a).resolve(&t, i).unwrap(),
                                &lim.limit_of(&b).resolve(&t, i).unwrap(),
                            )
                            .unwrap();
                        let wi = lim.limit_of(w).resolve(&t, i).unwrap();
                        assert!(stage.member(&si, &wi).unwrap());
                    }
                    // stringency: b distinct from -a forces the singleton
                    if !lim.eq(&b, &lim.neg(&a).unwrap()).unwrap() {
                        stringent_pairs += 1;
                    }
                }
                SumSet::ZeroBall { .. } => {
                    assert!(lim.eq(&b, &lim.neg(&a).unwrap()).unwrap());
                }
                other => panic!("limit sums are singletons or zero balls, got {other:?}"),
            }
        }
        assert!(stringent_pairs > 10);
    }

    #[test]
    fn associativity_splits_by_zero_membership() {
        // the two cases of the associativity argument: triple sums that
        // contain zero (balls) and those that do not (singletons); both
        // must absorb the iterated binary sums on probes
        let lim = limit_hyperfield(&paper_tower()).unwrap();
        let mone = lim.neg(&lim.one()).unwrap();
        let mut triples = vec![
            (lim.one(), mone.clone(), lim.zero()),
            (lim.one(), mone.clone(), lim.from_expr_str("y").unwrap()),
            (
                lim.from_expr_str("x").unwrap(),
                lim.from_expr_str("0-x").unwrap(),
                lim.from_expr_str("x*y").unwrap(),
            ),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..24 {
            triples.push((
                lim.sample(&mut rng),
                lim.sample(&mut rng),
                lim.sample(&mut rng),
            ));
        }
        let (mut with_zero, mut zero_free) = (0, 0);
        for (x, y, z) in &triples {
            let s3 = lim.nary_sum(&[x.clone(), y.clone(), z.clone()]).unwrap();
            if lim.member(&s3, &lim.zero()).unwrap() {
                with_zero += 1;
            } else {
                zero_free += 1;
            }
            let s12 = lim.hypersum(x, y).unwrap();
            for u in lim.probes(&s12, &mut rng, 3).unwrap() {
                for w in lim.probes(&lim.hypersum(&u, z).unwrap(), &mut rng, 3).unwrap() {
                    assert!(lim.member(&s3, &w).unwrap());
                }
            }
        }
        assert!(with_zero >= 3, "zero bearing triples missing");
        assert!(zero_free > 5, "only {zero_free} zero free triples");
    }

    #[test]
    fn field_mode_tower_agrees_with_series_arithmetic() {
        let t = builtin_tower("paper-nn", 6).unwrap();
        let lim = limit_hyperfield(&t).unwrap();
        assert!(field_mode(&lim).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let a = lim.sample(&mut rng);
            let b = lim.sample(&mut rng);
            match lim.hypersum(&a, &b).unwrap() {
                SumSet::Singleton(w) => {
                    // the sum is the field sum of the closed forms
                    let direct = lim
                        .from_expr(RFExpr::Add(
                            Box::new(lim.limit_of(&a).expr().clone()),
                            Box::new(lim.limit_of(&b).expr().clone()),
                        ))
                        .unwrap();
                    assert!(lim.eq(&w, &direct).unwrap());
                    // and stagewise it is the truncated series sum
                    let wi = lim.limit_of(&w).resolve(&t, 3).unwrap();
                    let stage = t.stage(3);
                    let ai = lim.limit_of(&a).resolve(&t, 3).unwrap();
                    let bi = lim.limit_of(&b).resolve(&t, 3).unwrap();
                    let si = stage.from_series(
                        stage.series_of(&ai).add(stage.series_of(&bi)),
                    )
                    .unwrap();
                    assert!(stage.eq(&wi, &si).unwrap());
                }
                SumSet::ZeroBall { floor } => {
                    // nothing finite sits above the full cone: the ball is
                    // exactly {0}, the field sum of opposite classes
                    assert!(!floor.admits(&GroupElem::from_coords(&[9, 9])));
                    assert!(lim.eq(&b, &lim.neg(&a).unwrap()).unwrap());
                }
                other => panic!("field mode sums are single valued, got {other:?}"),
            }
        }
    }

    #[test]
    fn projections_induce_the_stage_isomorphisms() {
        let lim = limit_hyperfield(&paper_tower()).unwrap();
        let mut c = cfg();
        c.trials = 100;
        for i in [0, 2] {
            let r = limit_factor_iso(&lim, i, &c).unwrap();
            assert!(r.passed(), "stage {i}: {}", r.to_json());
        }
        let f3 = limit_hyperfield(&builtin_tower("f3", 8).unwrap()).unwrap();
        let r = limit_factor_iso(&f3, 3, &c).unwrap();
        assert!(r.passed(), "{}", r.to_json());
    }

    #[test]
    fn theta_reaches_stages_by_segment() {
        let t = paper_tower();
        let lim = limit_hyperfield(&t).unwrap();
        let x = lim.from_expr_str("1+x").unwrap();
        // an independently built handle over the same segment works too
        let outside = Hyperfield::quotient_of_ground(
            GroundField::rationals_xy(),
            InitialSegment::up_to(&[0, 2]),
        );
        let img = lim.theta(&x, &outside).unwrap();
        let direct = outside
            .from_series(t.ground().expand_str("1+x", &GroupElem::from_coords(&[0, 3])).unwrap())
            .unwrap();
        assert!(outside.eq(&img, &direct).unwrap());

        let off_tower = Hyperfield::quotient_of_ground(
            GroundField::rationals_xy(),
            InitialSegment::up_to(&[1, 2]),
        );
        assert!(lim.theta(&x, &off_tower).is_err());
    }

    #[test]
    fn empty_sum_detected_in_the_tower_without_doubling() {
        let t = builtin_tower("paper-1m", 8).unwrap();
        let ga = StageFamily::PartialPowerSum {
            prefactor: RFExpr::Lit(1),
            var: 1,
        };
        let gb = StageFamily::PartialPowerSum {
            prefactor: RFExpr::Var(0),
            var: 1,
        };
        match detect_empty_sum(&t, &ga, &gb, 3).unwrap() {
            EmptySumOutcome::Empty {
                stage_lo,
                stage_hi,
                detail,
            } => {
                assert!(stage_lo < stage_hi);
                assert!(detail.contains("forces"), "{detail}");
            }
            other => panic!("expected an empty sum witness, got {other:?}"),
        }

        let c1 = StageFamily::constant(RFExpr::Lit(1));
        match detect_empty_sum(&t, &c1, &c1.clone(), 3).unwrap() {
            EmptySumOutcome::NonEmpty { detail } => {
                assert!(detail.contains("stage 0"), "{detail}");
            }
            other => panic!("expected a compatible family, got {other:?}"),
        }

        assert!(matches!(
            detect_empty_sum(&t, &ga, &gb, 0).unwrap(),
            EmptySumOutcome::Inconclusive { .. }
        ));
    }

    #[test]
    fn expression_text_is_readable() {
        let g = GroundField::rationals_xy();
        let lim = limit_hyperfield(&paper_tower()).unwrap();
        let e = lim.from_expr_str("1 + x*y - x^2").unwrap();
        let shown = lim.display_elem(&e);
        assert_eq!(shown, format!("[{}]", expr_text(lim.limit_of(&e).expr(), g.vars())));
        assert!(shown.contains("x*y"), "{shown}");
    }
}
