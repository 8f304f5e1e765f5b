//! Axiom batteries: canonical hypergroup, hyperfield, valuation.
//!
//! Finite handles are checked exhaustively.  Quotient and leading-term
//! handles are checked on seeded random samples; membership questions on
//! symbolic sums are decided exactly, and a trial whose representatives are
//! too short to decide is skipped rather than guessed.  Associativity on
//! symbolic sums is checked constructively: every probe member of one side
//! is certified inside the other side through an explicitly constructed
//! intermediate element.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::report::{AxiomReport, CheckReport};

#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub seed: u64,
    pub trials: u64,
    /// Probe elements drawn from each symbolic sum.
    pub probes: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            seed: 0,
            trials: 64,
            probes: 3,
        }
    }
}

/// Errors that mean "this trial cannot be decided at current precision",
/// as opposed to a wrong answer.
pub(crate) fn precision_skip(e: &Error) -> bool {
    matches!(
        e,
        Error::InsufficientPrecision(_)
            | Error::UnreachablePrecision { .. }
            | Error::IndistinguishableFromZero { .. }
            | Error::Undetermined(_)
    )
}

pub(crate) fn run_sampled<F>(axiom: &str, seed: u64, trials: u64, mut f: F) -> AxiomReport
where
    F: FnMut() -> Result<Option<String>>,
{
    let mut done = 0u64;
    let mut skipped = 0u64;
    for _ in 0..trials {
        match f() {
            Ok(None) => done += 1,
            Ok(Some(w)) => return AxiomReport::fail(axiom, w, seed, done + 1),
            Err(e) if precision_skip(&e) => skipped += 1,
            Err(e) => {
                return AxiomReport::fail(axiom, format!("checker error: {e}"), seed, done + 1)
            }
        }
    }
    if done == 0 && skipped > 0 {
        AxiomReport::skipped(axiom, format!("all {skipped} trials undecidable at precision"))
    } else {
        AxiomReport::pass(axiom, seed, done)
    }
}

fn indices(s: &SumSet) -> Vec<usize> {
    match s {
        SumSet::Enumerated(v) => v
            .iter()
            .map(|e| match &e.payload {
                Payload::Table(i) => *i,
                _ => unreachable!("enumerated sums carry table payloads"),
            })
            .collect(),
        _ => unreachable!("finite sums are enumerated"),
    }
}

fn table_set_name(h: &Hyperfield, idx: &[usize]) -> String {
    let t = match h.kind() {
        HyperfieldKind::Finite(t) => t,
        _ => unreachable!(),
    };
    format!(
        "{{{}}}",
        idx.iter().map(|&i| t.names[i].clone()).collect::<Vec<_>>().join(",")
    )
}

/// CH0 through CH4 on a handle.
pub fn check_canonical_hypergroup(h: &Hyperfield, cfg: &CheckConfig) -> Result<CheckReport> {
    let mut report = CheckReport::new(&h.name());
    match h.enumerate() {
        Ok(elems) => check_ch_exhaustive(h, &elems, &mut report)?,
        Err(_) => check_ch_sampled(h, cfg, &mut report),
    }
    Ok(report)
}

fn check_ch_exhaustive(
    h: &Hyperfield,
    elems: &[HyperElem],
    report: &mut CheckReport,
) -> Result<()> {
    let n = elems.len() as u64;
    let zero = h.zero();

    // CH0: zero is the identity
    let mut item = AxiomReport::pass("CH0", 0, n);
    for x in elems {
        let s = indices(&h.hypersum(x, &zero)?);
        if s != indices(&SumSet::Enumerated(vec![x.clone()])) {
            item = AxiomReport::fail(
                "CH0",
                format!("{}+0 = {}", h.display_elem(x), table_set_name(h, &s)),
                0,
                n,
            );
            break;
        }
    }
    report.push(item);

    // CH1: associativity as set equality
    let mut item = AxiomReport::pass("CH1", 0, n * n * n);
    'ch1: for x in elems {
        for y in elems {
            for z in elems {
                let mut left: Vec<usize> = Vec::new();
                if let SumSet::Enumerated(us) = h.hypersum(x, y)? {
                    for u in &us {
                        for i in indices(&h.hypersum(u, z)?) {
                            if !left.contains(&i) {
                                left.push(i);
                            }
                        }
                    }
                }
                let mut right: Vec<usize> = Vec::new();
                if let SumSet::Enumerated(vs) = h.hypersum(y, z)? {
                    for v in &vs {
                        for i in indices(&h.hypersum(x, v)?) {
                            if !right.contains(&i) {
                                right.push(i);
                            }
                        }
                    }
                }
                left.sort_unstable();
                right.sort_unstable();
                if left != right {
                    item = AxiomReport::fail(
                        "CH1",
                        format!(
                            "({}+{})+{} = {} but {}+({}+{}) = {}",
                            h.display_elem(x),
                            h.display_elem(y),
                            h.display_elem(z),
                            table_set_name(h, &left),
                            h.display_elem(x),
                            h.display_elem(y),
                            h.display_elem(z),
                            table_set_name(h, &right)
                        ),
                        0,
                        n * n * n,
                    );
                    break 'ch1;
                }
            }
        }
    }
    report.push(item);

    // CH2: commutativity
    let mut item = AxiomReport::pass("CH2", 0, n * n);
    'ch2: for x in elems {
        for y in elems {
            let a = indices(&h.hypersum(x, y)?);
            let b = indices(&h.hypersum(y, x)?);
            if a != b {
                item = AxiomReport::fail(
                    "CH2",
                    format!(
                        "{}+{} = {} but {}+{} = {}",
                        h.display_elem(x),
                        h.display_elem(y),
                        table_set_name(h, &a),
                        h.display_elem(y),
                        h.display_elem(x),
                        table_set_name(h, &b)
                    ),
                    0,
                    n * n,
                );
                break 'ch2;
            }
        }
    }
    report.push(item);

    // CH3: unique inverse
    let mut item = AxiomReport::pass("CH3", 0, n);
    'ch3: for x in elems {
        let mut inverses = Vec::new();
        for y in elems {
            if h.member(&h.hypersum(x, y)?, &zero)? {
                inverses.push(y.clone());
            }
        }
        if inverses.len() != 1 || !h.eq(&inverses[0], &h.neg(x)?)? {
            item = AxiomReport::fail(
                "CH3",
                format!(
                    "{} has {} additive inverses",
                    h.display_elem(x),
                    inverses.len()
                ),
                0,
                n,
            );
            break 'ch3;
        }
    }
    report.push(item);

    // CH4: reversibility, z in x+y iff x in z-y
    let mut item = AxiomReport::pass("CH4", 0, n * n * n);
    'ch4: for x in elems {
        for y in elems {
            let s = h.hypersum(x, y)?;
            let ny = h.neg(y)?;
            for z in elems {
                let lhs = h.member(&s, z)?;
                let rhs = h.member(&h.hypersum(z, &ny)?, x)?;
                if lhs != rhs {
                    item = AxiomReport::fail(
                        "CH4",
                        format!(
                            "z={} in {}+{} is {} but x in z-y is {}",
                            h.display_elem(z),
                            h.display_elem(x),
                            h.display_elem(y),
                            lhs,
                            rhs
                        ),
                        0,
                        n * n * n,
                    );
                    break 'ch4;
                }
            }
        }
    }
    report.push(item);
    Ok(())
}

fn check_ch_sampled(h: &Hyperfield, cfg: &CheckConfig, report: &mut CheckReport) {
    let zero = h.zero();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("CH0", cfg.seed, cfg.trials, || {
        let x = h.sample(&mut rng);
        let s = h.hypersum(&x, &zero)?;
        match &s {
            SumSet::Singleton(u) if h.eq(u, &x)? => Ok(None),
            _ => Ok(Some(format!("{}+0 is not {{x}}", h.display_elem(&x)))),
        }
    }));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("CH1", cfg.seed, cfg.trials, || {
        let x = h.sample(&mut rng);
        let y = h.sample(&mut rng);
        let z = h.sample(&mut rng);
        let s_xy = h.hypersum(&x, &y)?;
        let s_yz = h.hypersum(&y, &z)?;
        let nary = h.nary_sum(&[x.clone(), y.clone(), z.clone()])?;
        // every probe member of the three way sum is reached through an
        // explicit intermediate on both sides; the intermediate is either
        // the representative difference, or the witness of the pair sum
        // when the difference degenerates
        let reaches = |side: &SumSet, other: &HyperElem, w: &HyperElem| -> Result<bool> {
            let mut candidates = vec![h.payload_sub(w, other)];
            if let Some(u) = h.witness_of(side) {
                candidates.push(u);
            }
            for u in &candidates {
                if h.member(side, u)? && h.member(&h.hypersum(u, other)?, w)? {
                    return Ok(true);
                }
            }
            Ok(false)
        };
        for w in h.probes(&nary, &mut rng, cfg.probes)? {
            if !reaches(&s_xy, &z, &w)? {
                return Ok(Some(format!(
                    "{} in x+y+z is not reached via (x+y)+z; x={} y={} z={}",
                    h.display_elem(&w),
                    h.display_elem(&x),
                    h.display_elem(&y),
                    h.display_elem(&z)
                )));
            }
            if !reaches(&s_yz, &x, &w)? {
                return Ok(Some(format!(
                    "{} in x+y+z is not reached via x+(y+z); x={} y={} z={}",
                    h.display_elem(&w),
                    h.display_elem(&x),
                    h.display_elem(&y),
                    h.display_elem(&z)
                )));
            }
        }
        // and composite probes land inside the three way sum
        for u in h.probes(&s_xy, &mut rng, cfg.probes)? {
            for w in h.probes(&h.hypersum(&u, &z)?, &mut rng, cfg.probes)? {
                if !h.member(&nary, &w)? {
                    return Ok(Some(format!(
                        "{} in (x+y)+z escapes x+y+z; x={} y={} z={}",
                        h.display_elem(&w),
                        h.display_elem(&x),
                        h.display_elem(&y),
                        h.display_elem(&z)
                    )));
                }
            }
        }
        for v in h.probes(&s_yz, &mut rng, cfg.probes)? {
            for w in h.probes(&h.hypersum(&x, &v)?, &mut rng, cfg.probes)? {
                if !h.member(&nary, &w)? {
                    return Ok(Some(format!(
                        "{} in x+(y+z) escapes x+y+z; x={} y={} z={}",
                        h.display_elem(&w),
                        h.display_elem(&x),
                        h.display_elem(&y),
                        h.display_elem(&z)
                    )));
                }
            }
        }
        Ok(None)
    }));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("CH2", cfg.seed, cfg.trials, || {
        let x = h.sample(&mut rng);
        let y = h.sample(&mut rng);
        let a = h.hypersum(&x, &y)?;
        let b = h.hypersum(&y, &x)?;
        Ok(h
            .sumsets_agree(&a, &b, &mut rng, cfg.probes)?
            .map(|w| format!("x={} y={}: {w}", h.display_elem(&x), h.display_elem(&y))))
    }));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("CH3", cfg.seed, cfg.trials, || {
        let x = h.sample(&mut rng);
        let nx = h.neg(&x)?;
        if !h.member(&h.hypersum(&x, &nx)?, &zero)? {
            return Ok(Some(format!(
                "0 not in {}+{}",
                h.display_elem(&x),
                h.display_elem(&nx)
            )));
        }
        for _ in 0..3 {
            let y = h.sample(&mut rng);
            if h.eq(&y, &nx)? {
                continue;
            }
            if h.member(&h.hypersum(&x, &y)?, &zero)? {
                return Ok(Some(format!(
                    "both {} and {} invert {}",
                    h.display_elem(&nx),
                    h.display_elem(&y),
                    h.display_elem(&x)
                )));
            }
        }
        Ok(None)
    }));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("CH4", cfg.seed, cfg.trials, || {
        let x = h.sample(&mut rng);
        let y = h.sample(&mut rng);
        let s = h.hypersum(&x, &y)?;
        let ny = h.neg(&y)?;
        for z in h.probes(&s, &mut rng, cfg.probes)? {
            if !h.member(&h.hypersum(&z, &ny)?, &x)? {
                return Ok(Some(format!(
                    "z={} in {}+{} but x not in z-y",
                    h.display_elem(&z),
                    h.display_elem(&x),
                    h.display_elem(&y)
                )));
            }
        }
        let z2 = h.sample(&mut rng);
        let lhs = h.member(&s, &z2)?;
        let rhs = h.member(&h.hypersum(&z2, &ny)?, &x)?;
        if lhs != rhs {
            return Ok(Some(format!(
                "z={}: in {}+{} is {} but x in z-y is {}",
                h.display_elem(&z2),
                h.display_elem(&x),
                h.display_elem(&y),
                lhs,
                rhs
            )));
        }
        Ok(None)
    }));
}

/// Full hyperfield battery: the hypergroup axioms plus multiplicative
/// group structure and distributivity.
pub fn check_hyperfield(h: &Hyperfield, cfg: &CheckConfig) -> Result<CheckReport> {
    let mut report = check_canonical_hypergroup(h, cfg)?;
    match h.enumerate() {
        Ok(elems) => check_hf_exhaustive(h, &elems, &mut report)?,
        Err(_) => check_hf_sampled(h, cfg, &mut report),
    }
    Ok(report)
}

fn check_hf_exhaustive(
    h: &Hyperfield,
    elems: &[HyperElem],
    report: &mut CheckReport,
) -> Result<()> {
    let n = elems.len() as u64;
    let zero = h.zero();
    let one = h.one();

    let mut item = AxiomReport::pass("HF2", 0, n * n * n);
    if h.eq(&zero, &one)? {
        item = AxiomReport::fail("HF2", "0 = 1".into(), 0, 1);
    }
    'hf2: for x in elems {
        if !h.eq(&h.mul(x, &one)?, x)? || !h.eq(&h.mul(x, &zero)?, &zero)? {
            item = AxiomReport::fail(
                "HF2",
                format!("unit or absorption fails at {}", h.display_elem(x)),
                0,
                n,
            );
            break 'hf2;
        }
        if !h.is_zero(x)? {
            match h.inv(x) {
                Ok(xi) if h.eq(&h.mul(x, &xi)?, &one)? => {}
                _ => {
                    item = AxiomReport::fail(
                        "HF2",
                        format!("{} has no multiplicative inverse", h.display_elem(x)),
                        0,
                        n,
                    );
                    break 'hf2;
                }
            }
        }
        for y in elems {
            if !h.eq(&h.mul(x, y)?, &h.mul(y, x)?)? {
                item = AxiomReport::fail("HF2", "multiplication is not commutative".into(), 0, n);
                break 'hf2;
            }
            for z in elems {
                let a = h.mul(&h.mul(x, y)?, z)?;
                let b = h.mul(x, &h.mul(y, z)?)?;
                if !h.eq(&a, &b)? {
                    item = AxiomReport::fail(
                        "HF2",
                        format!(
                            "({}*{})*{} differs from the right association",
                            h.display_elem(x),
                            h.display_elem(y),
                            h.display_elem(z)
                        ),
                        0,
                        n * n * n,
                    );
                    break 'hf2;
                }
            }
        }
    }
    report.push(item);

    let mut item = AxiomReport::pass("HF3", 0, n * n * n);
    'hf3: for a in elems {
        for x in elems {
            for y in elems {
                let mut lhs: Vec<usize> = indices(&h.hypersum(x, y)?)
                    .into_iter()
                    .map(|i| match h.kind() {
                        HyperfieldKind::Finite(t) => t.mul[match &a.payload {
                            Payload::Table(j) => *j,
                            _ => unreachable!(),
                        }][i],
                        _ => unreachable!(),
                    })
                    .collect();
                lhs.sort_unstable();
                lhs.dedup();
                let mut rhs = indices(&h.hypersum(&h.mul(a, x)?, &h.mul(a, y)?)?);
                rhs.sort_unstable();
                if lhs != rhs {
                    item = AxiomReport::fail(
                        "HF3",
                        format!(
                            "{}*({}+{}) = {} but {}",
                            h.display_elem(a),
                            h.display_elem(x),
                            h.display_elem(y),
                            table_set_name(h, &lhs),
                            table_set_name(h, &rhs)
                        ),
                        0,
                        n * n * n,
                    );
                    break 'hf3;
                }
            }
        }
    }
    report.push(item);

    // double distributivity inclusion, only meaningful for enumerated sums
    let mut item = AxiomReport::pass("HF-DD", 0, n * n * n * n);
    'dd: for a in elems {
        for b in elems {
            let sab = match h.hypersum(a, b)? {
                SumSet::Enumerated(v) => v,
                _ => unreachable!(),
            };
            for c in elems {
                for d in elems {
                    let scd = match h.hypersum(c, d)? {
                        SumSet::Enumerated(v) => v,
                        _ => unreachable!(),
                    };
                    let rhs = h.nary_sum(&[
                        h.mul(a, c)?,
                        h.mul(a, d)?,
                        h.mul(b, c)?,
                        h.mul(b, d)?,
                    ])?;
                    for u in &sab {
                        for v in &scd {
                            let p = h.mul(u, v)?;
                            if !h.member(&rhs, &p)? {
                                item = AxiomReport::fail(
                                    "HF-DD",
                                    format!(
                                        "({}+{})({}+{}) is not inside ac+ad+bc+bd: {}",
                                        h.display_elem(a),
                                        h.display_elem(b),
                                        h.display_elem(c),
                                        h.display_elem(d),
                                        h.display_elem(&p)
                                    ),
                                    0,
                                    n * n * n * n,
                                );
                                break 'dd;
                            }
                        }
                    }
                }
            }
        }
    }
    report.push(item);
    Ok(())
}

fn check_hf_sampled(h: &Hyperfield, cfg: &CheckConfig, report: &mut CheckReport) {
    let zero = h.zero();
    let one = h.one();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("HF2", cfg.seed, cfg.trials, || {
        if h.eq(&zero, &one)? {
            return Ok(Some("0 = 1".into()));
        }
        let x = h.sample(&mut rng);
        let y = h.sample(&mut rng);
        let z = h.sample(&mut rng);
        if !h.eq(&h.mul(&x, &one)?, &x)? || !h.eq(&h.mul(&x, &zero)?, &zero)? {
            return Ok(Some(format!(
                "unit or absorption fails at {}",
                h.display_elem(&x)
            )));
        }
        if !h.eq(&h.mul(&x, &y)?, &h.mul(&y, &x)?)? {
            return Ok(Some("multiplication is not commutative".into()));
        }
        let a = h.mul(&h.mul(&x, &y)?, &z)?;
        let b = h.mul(&x, &h.mul(&y, &z)?)?;
        if !h.eq(&a, &b)? {
            return Ok(Some("multiplication is not associative".into()));
        }
        if !h.is_zero(&x)? {
            let xi = h.inv(&x)?;
            if !h.eq(&h.mul(&x, &xi)?, &one)? {
                return Ok(Some(format!(
                    "{} * {} is not 1",
                    h.display_elem(&x),
                    h.display_elem(&xi)
                )));
            }
        }
        Ok(None)
    }));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("HF3", cfg.seed, cfg.trials, || {
        let a = h.sample(&mut rng);
        let x = h.sample(&mut rng);
        let y = h.sample(&mut rng);
        let s = h.hypersum(&x, &y)?;
        let lhs = h.scale_sum(&a, &s)?;
        let rhs = h.hypersum(&h.mul(&a, &x)?, &h.mul(&a, &y)?)?;
        Ok(h.sumsets_agree(&lhs, &rhs, &mut rng, cfg.probes)?.map(|w| {
            format!(
                "a={} x={} y={}: {w}",
                h.display_elem(&a),
                h.display_elem(&x),
                h.display_elem(&y)
            )
        }))
    }));

    report.push(AxiomReport::skipped(
        "HF-DD",
        "double distributivity is checked on enumerated carriers only".into(),
    ));
}

/// Valuation axioms against the norm of the handle.
pub fn check_valuation(h: &Hyperfield, cfg: &CheckConfig) -> Result<CheckReport> {
    let norm = h
        .norm()
        .ok_or_else(|| Error::Precondition("handle carries no valuation".into()))?;
    let rank = h.value_rank().unwrap_or(0);
    let mut report = CheckReport::new(&h.name());
    match h.enumerate() {
        Ok(elems) => check_v_exhaustive(h, &elems, &norm, &mut report)?,
        Err(_) => check_v_sampled(h, cfg, &norm, rank, &mut report),
    }
    Ok(report)
}

fn check_v_exhaustive(
    h: &Hyperfield,
    elems: &[HyperElem],
    norm: &InitialSegment,
    report: &mut CheckReport,
) -> Result<()> {
    let n = elems.len() as u64;

    let mut item = AxiomReport::pass("V0", 0, n);
    for x in elems {
        let ok = h.val(x)?.is_infinite() == h.is_zero(x)?;
        if !ok {
            item = AxiomReport::fail(
                "V0",
                format!("val({}) and zero test disagree", h.display_elem(x)),
                0,
                n,
            );
            break;
        }
    }
    report.push(item);

    let mut item = AxiomReport::pass("V1", 0, n * n);
    'v1: for x in elems {
        for y in elems {
            if h.val(&h.mul(x, y)?)? != h.val(x)?.add(&h.val(y)?) {
                item = AxiomReport::fail(
                    "V1",
                    format!(
                        "val({}*{}) is not the sum of values",
                        h.display_elem(x),
                        h.display_elem(y)
                    ),
                    0,
                    n * n,
                );
                break 'v1;
            }
        }
    }
    report.push(item);

    let mut item = AxiomReport::pass("V2", 0, n * n);
    'v2: for x in elems {
        for y in elems {
            let m = h.val(x)?.min(h.val(y)?);
            if let SumSet::Enumerated(zs) = h.hypersum(x, y)? {
                for z in &zs {
                    if h.val(z)? < m {
                        item = AxiomReport::fail(
                            "V2",
                            format!(
                                "{} in {}+{} has value below the minimum",
                                h.display_elem(z),
                                h.display_elem(x),
                                h.display_elem(y)
                            ),
                            0,
                            n * n,
                        );
                        break 'v2;
                    }
                }
            }
        }
    }
    report.push(item);

    let zero = h.zero();
    let mut item = AxiomReport::pass("V3", 0, n * n);
    'v3: for x in elems {
        for y in elems {
            let s = h.hypersum(x, y)?;
            if h.member(&s, &zero)? {
                continue;
            }
            if let SetVal::Many(vals) = h.sumset_val(&s)? {
                item = AxiomReport::fail(
                    "V3",
                    format!(
                        "0 not in {}+{} yet the sum takes {} values",
                        h.display_elem(x),
                        h.display_elem(y),
                        vals.len()
                    ),
                    0,
                    n * n,
                );
                break 'v3;
            }
        }
    }
    report.push(item);

    // V4 scan: pairs of nonzero elements first, so a failure is reported
    // on a sum that exercises the hyperaddition rather than the identity
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..elems.len() {
        for j in 0..elems.len() {
            if !h.is_zero(&elems[i])? && !h.is_zero(&elems[j])? {
                pairs.push((i, j));
            }
        }
    }
    for i in 0..elems.len() {
        for j in 0..elems.len() {
            if h.is_zero(&elems[i])? || h.is_zero(&elems[j])? {
                pairs.push((i, j));
            }
        }
    }
    let mut item = AxiomReport::pass("V4", 0, (pairs.len() as u64) * n * n);
    'v4: for &(i, j) in &pairs {
        let (x, y) = (&elems[i], &elems[j]);
        let s = h.hypersum(x, y)?;
        let m = h.val(x)?.min(h.val(y)?);
        let members = indices(&s);
        for z in elems {
            if !h.member(&s, z)? {
                continue;
            }
            for z2 in elems {
                let lhs = h.member(&s, z2)?;
                let mut rhs = true;
                let mut bad = None;
                if let SumSet::Enumerated(ws) = h.hypersum(z, &h.neg(z2)?)? {
                    for w in &ws {
                        if !gt_segment(&h.val(w)?, norm, &m) {
                            rhs = false;
                            bad = Some(w.clone());
                            break;
                        }
                    }
                }
                if lhs != rhs {
                    let detail = match bad {
                        Some(w) => format!(
                            "z-z' has member {} of value {}, floor {}+{}",
                            h.display_elem(&w),
                            h.val(&w)?,
                            norm,
                            m
                        ),
                        None => "z-z' lies above the floor yet z' is outside".to_string(),
                    };
                    item = AxiomReport::fail(
                        "V4",
                        format!(
                            "{}+{} = {}: z={} z'={} in question: {}",
                            h.display_elem(x),
                            h.display_elem(y),
                            table_set_name(h, &members),
                            h.display_elem(z),
                            h.display_elem(z2),
                            detail
                        ),
                        0,
                        (pairs.len() as u64) * n * n,
                    );
                    break 'v4;
                }
            }
        }
    }
    report.push(item);
    Ok(())
}

fn check_v_sampled(
    h: &Hyperfield,
    cfg: &CheckConfig,
    norm: &InitialSegment,
    rank: usize,
    report: &mut CheckReport,
) {
    let zero = h.zero();

    // V0: zero iff value inf, plus surjectivity on a small value grid
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grid = value_grid(rank);
    report.push(run_sampled("V0", cfg.seed, cfg.trials, || {
        let x = h.sample(&mut rng);
        if h.val(&x)?.is_infinite() != h.is_zero(&x)? {
            return Ok(Some(format!(
                "val({}) and zero test disagree",
                h.display_elem(&x)
            )));
        }
        for g in &grid {
            match h.elem_of_value(g) {
                Some(e) if h.val(&e)? == *g => {}
                _ => return Ok(Some(format!("no element of value {g}"))),
            }
        }
        Ok(None)
    }));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("V1", cfg.seed, cfg.trials, || {
        let x = h.sample(&mut rng);
        let y = h.sample(&mut rng);
        if h.val(&h.mul(&x, &y)?)? != h.val(&x)?.add(&h.val(&y)?) {
            return Ok(Some(format!(
                "val({}*{}) is not the sum of values",
                h.display_elem(&x),
                h.display_elem(&y)
            )));
        }
        Ok(None)
    }));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("V2", cfg.seed, cfg.trials, || {
        let x = h.sample(&mut rng);
        let y = h.sample(&mut rng);
        let s = h.hypersum(&x, &y)?;
        let m = h.val(&x)?.min(h.val(&y)?);
        for z in h.probes(&s, &mut rng, cfg.probes)? {
            if h.val(&z)? < m {
                return Ok(Some(format!(
                    "{} in {}+{} has value below the minimum",
                    h.display_elem(&z),
                    h.display_elem(&x),
                    h.display_elem(&y)
                )));
            }
        }
        Ok(None)
    }));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("V3", cfg.seed, cfg.trials, || {
        let x = h.sample(&mut rng);
        let y = h.sample(&mut rng);
        let s = h.hypersum(&x, &y)?;
        if h.member(&s, &zero)? {
            return Ok(None);
        }
        let v = match h.sumset_val(&s)? {
            SetVal::Single(v) => v,
            _ => {
                return Ok(Some(format!(
                    "0 not in {}+{} yet the sum has several values",
                    h.display_elem(&x),
                    h.display_elem(&y)
                )))
            }
        };
        for z in h.probes(&s, &mut rng, cfg.probes)? {
            if h.val(&z)? != v {
                return Ok(Some(format!(
                    "member {} of a zero free sum changes value",
                    h.display_elem(&z)
                )));
            }
        }
        Ok(None)
    }));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("V4", cfg.seed, cfg.trials, || {
        let x = h.sample(&mut rng);
        let y = h.sample(&mut rng);
        if h.is_zero(&x)? && h.is_zero(&y)? {
            return Ok(None);
        }
        let s = h.hypersum(&x, &y)?;
        let m = h.val(&x)?.min(h.val(&y)?);
        let floor = FloorCut {
            rho: norm.clone(),
            base: m,
        };
        let mut candidates = h.probes(&s, &mut rng, cfg.probes)?;
        candidates.push(h.sample(&mut rng));
        candidates.push(h.sample(&mut rng));
        if let Some(b) = boundary_probe(h, &s, norm) {
            candidates.push(b);
        }

        // ball geometry: membership of z' is equivalent to the distance
        // from any member z lying strictly above the floor
        let members = h.probes(&s, &mut rng, cfg.probes)?;
        for z in &members {
            for z2 in &candidates {
                let lhs = h.member(&s, z2)?;
                let d = match h.ultrametric_d(z, z2) {
                    Ok(d) => d,
                    Err(e) if precision_skip(&e) => continue,
                    Err(e) => return Err(e),
                };
                let rhs = floor.admits(&d);
                if lhs != rhs {
                    return Ok(Some(format!(
                        "x={} y={}: z={} z'={}: membership {} but distance {} vs floor {}",
                        h.display_elem(&x),
                        h.display_elem(&y),
                        h.display_elem(z),
                        h.display_elem(z2),
                        lhs,
                        d,
                        floor
                    )));
                }
            }
        }

        // quotient handles also certify membership through the subgroup
        // definition: z' = x + y t with t in 1 + {v > rho}
        if let HyperfieldKind::Factor { ground, rho } = h.kind() {
            if !h.is_zero(&x)? && !h.is_zero(&y)? {
                for z2 in &candidates {
                    let ball = h.member(&s, z2)?;
                    match v4_certificate(h, ground, rho, &x, &y, z2)? {
                        Some(cert) if cert != ball => {
                            return Ok(Some(format!(
                                "x={} y={} z'={}: ball test {} but subgroup certificate {}",
                                h.display_elem(&x),
                                h.display_elem(&y),
                                h.display_elem(z2),
                                ball,
                                cert
                            )));
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(None)
    }));
}

fn value_grid(rank: usize) -> Vec<GroupElem> {
    let mut out = Vec::new();
    let mut coords = vec![-1i64; rank];
    if rank == 0 {
        return vec![GroupElem::zero(0)];
    }
    loop {
        out.push(GroupElem::Finite(coords.clone()));
        let mut i = 0;
        loop {
            coords[i] += 1;
            if coords[i] <= 1 {
                break;
            }
            coords[i] = -1;
            i += 1;
            if i == rank {
                return out;
            }
        }
    }
}

/// An element at distance exactly the floor from the witness: a certified
/// non member of the ball, when the cut has a largest finite value.
fn boundary_probe(h: &Hyperfield, s: &SumSet, norm: &InitialSegment) -> Option<HyperElem> {
    let (w, floor) = match s {
        SumSet::Ball { witness, floor } => (witness.clone(), floor.clone()),
        SumSet::ZeroBall { floor } => (h.zero(), floor.clone()),
        _ => return None,
    };
    let cut = match norm {
        InitialSegment::Zero => floor.base.clone(),
        InitialSegment::UpTo(g) => floor.base.add(g),
        InitialSegment::Cone { .. } => return None,
    };
    if cut.is_infinite() {
        return None;
    }
    let d = h.elem_of_value(&cut)?;
    Some(h.payload_add(&w, &d))
}

fn v4_certificate(
    h: &Hyperfield,
    ground: &GroundField,
    rho: &InitialSegment,
    x: &HyperElem,
    y: &HyperElem,
    z2: &HyperElem,
) -> Result<Option<bool>> {
    let (sx, sy) = (h.series_of(x), h.series_of(y));
    let (vx, vy) = (sx.val()?, sy.val()?);
    // divide by the operand of minimal value so that the candidate factor
    // t is a unit perturbation
    let (den, other) = if vy <= vx { (sy, sx) } else { (sx, sy) };
    let num = h.series_of(z2).sub(other);
    if num.is_exact_zero() {
        // t = 0 is never in 1 + {v > rho}
        return Ok(Some(false));
    }
    let target = seg_margin(rho, ground.rank());
    let t0 = match num.div_to(den, &target) {
        Ok(t) => t,
        Err(_) => return Ok(None),
    };
    let d = t0.sub(&ground.one_series());
    if d.is_exact_zero() {
        return Ok(Some(true));
    }
    match val_above_cut(
        &d,
        &FloorCut {
            rho: rho.clone(),
            base: GroupElem::zero(ground.rank()),
        },
    ) {
        Ok(b) => Ok(Some(b)),
        Err(_) => Ok(None),
    }
}

/// Consequences of the valuation axioms: value of one and of negation,
/// absorption of strictly smaller elements, and the ball shape of sums.
pub fn check_val_lemma(h: &Hyperfield, cfg: &CheckConfig) -> Result<CheckReport> {
    let norm = h
        .norm()
        .ok_or_else(|| Error::Precondition("handle carries no valuation".into()))?;
    let rank = h.value_rank().unwrap_or(0);
    let mut report = CheckReport::new(&h.name());
    let one = h.one();

    let item = if h.val(&one)? == GroupElem::zero(rank) {
        AxiomReport::pass("val-one", cfg.seed, 1)
    } else {
        AxiomReport::fail("val-one", format!("val(1) = {}", h.val(&one)?), cfg.seed, 1)
    };
    report.push(item);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("val-neg", cfg.seed, cfg.trials, || {
        let x = h.sample(&mut rng);
        if h.val(&x)? != h.val(&h.neg(&x)?)? {
            return Ok(Some(format!("val(-{}) moved", h.display_elem(&x))));
        }
        Ok(None)
    }));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let norm_for_absorb = norm.clone();
    report.push(run_sampled("absorption", cfg.seed, cfg.trials, || {
        let x = h.sample(&mut rng);
        if h.is_zero(&x)? {
            return Ok(None);
        }
        let vx = h.val(&x)?;
        // crafted positive case: adding something strictly inside the
        // floor of x must change nothing
        let floor = FloorCut {
            rho: norm_for_absorb.clone(),
            base: vx,
        };
        if let Some(vals) = values_above(&floor, rank, 1) {
            if let Some(y) = h.elem_of_value(&vals[0]) {
                let s = h.hypersum(&x, &y)?;
                let good = match &s {
                    SumSet::Singleton(u) => h.eq(u, &x)?,
                    _ => false,
                };
                if !good {
                    return Ok(Some(format!(
                        "{} + {} is not {{x}}",
                        h.display_elem(&x),
                        h.display_elem(&y)
                    )));
                }
            }
        }
        // random case: x in x+y forces the sum to collapse to x
        let y = h.sample(&mut rng);
        let s = h.hypersum(&x, &y)?;
        if h.member(&s, &x)? {
            let good = match &s {
                SumSet::Singleton(u) => h.eq(u, &x)?,
                SumSet::Enumerated(v) => v.len() == 1 && h.eq(&v[0], &x)?,
                _ => false,
            };
            if !good {
                return Ok(Some(format!(
                    "{} in {}+{} but the sum is larger",
                    h.display_elem(&x),
                    h.display_elem(&x),
                    h.display_elem(&y)
                )));
            }
        }
        Ok(None)
    }));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    report.push(run_sampled("nary-ball", cfg.seed, cfg.trials, || {
        let k = rng.gen_range(3..=4usize);
        let xs: Vec<HyperElem> = (0..k).map(|_| h.sample(&mut rng)).collect();
        let s = h.nary_sum(&xs)?;
        let mut m = GroupElem::Infinity;
        for x in &xs {
            let v = h.val(x)?;
            if v < m {
                m = v;
            }
        }
        let zero_in = h.member(&s, &h.zero())?;
        for z in h.probes(&s, &mut rng, cfg.probes)? {
            if !h.member(&s, &z)? {
                return Ok(Some("probe escaped its own sum".into()));
            }
            if h.val(&z)? < m {
                return Ok(Some("sum member below the minimum of values".into()));
            }
            if !zero_in && !h.is_zero(&z)? {
                if let Some(w) = h.witness_of(&s) {
                    if h.val(&z)? != h.val(&w)? {
                        return Ok(Some("zero free sum is not value constant".into()));
                    }
                }
            }
        }
        Ok(None)
    }));

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperfield::table::{factor_table, krasner_k, krasner_s, prime_field_table};

    fn cfg() -> CheckConfig {
        CheckConfig {
            seed: 1,
            trials: 48,
            probes: 3,
        }
    }

    #[test]
    fn krasner_hyperfields_pass() {
        for t in [krasner_k(), krasner_s()] {
            let h = Hyperfield::finite(t);
            let r = check_hyperfield(&h, &cfg()).unwrap();
            assert!(r.passed(), "{}: {:?}", h.name(), r.first_failure());
        }
    }

    #[test]
    fn prime_fields_pass() {
        for p in [3, 5, 7] {
            let h = Hyperfield::finite(prime_field_table(p));
            let r = check_hyperfield(&h, &cfg()).unwrap();
            assert!(r.passed(), "F_{p}: {:?}", r.first_failure());
        }
    }

    #[test]
    fn f5_and_f7_factors_pass_hyperfield_axioms() {
        let f5 = prime_field_table(5);
        let f7 = prime_field_table(7);
        for (base, t) in [(&f5, vec![1usize, 4]), (&f7, vec![1, 2, 4]), (&f7, vec![1, 6])] {
            let q = Hyperfield::finite(factor_table(base, &t).unwrap());
            let r = check_hyperfield(&q, &cfg()).unwrap();
            assert!(r.passed(), "{}: {:?}", q.name(), r.first_failure());
        }
    }

    #[test]
    fn sign_hyperfield_fails_v4_with_trivial_valuation() {
        let h = Hyperfield::finite(krasner_s().with_trivial_valuation());
        let r = check_valuation(&h, &cfg()).unwrap();
        assert!(!r.passed());
        let f = r.first_failure().unwrap();
        assert_eq!(f.axiom, "V4");
        assert!(f.witness.as_ref().unwrap().contains("1+1"), "{:?}", f.witness);
    }

    #[test]
    fn f7_cube_factor_fails_v4_at_the_known_sum() {
        let q = factor_table(&prime_field_table(7), &[1, 2, 4])
            .unwrap()
            .with_trivial_valuation();
        let h = Hyperfield::finite(q);
        let r = check_valuation(&h, &cfg()).unwrap();
        assert!(!r.passed());
        let f = r.first_failure().unwrap();
        assert_eq!(f.axiom, "V4");
        let w = f.witness.as_ref().unwrap();
        assert!(w.contains("[1]+[1]"), "witness: {w}");
        assert!(w.contains("{[1],[3]}"), "witness: {w}");
    }

    #[test]
    fn f7_sign_factor_passes_valuation() {
        let q = factor_table(&prime_field_table(7), &[1, 6])
            .unwrap()
            .with_trivial_valuation();
        let h = Hyperfield::finite(q);
        let r = check_valuation(&h, &cfg()).unwrap();
        // V4 fails for any factor with classes of several elements under
        // the trivial valuation; the hyperfield axioms still hold
        assert!(!r.passed());
    }

    #[test]
    fn laurent_quotient_passes_everything() {
        let h = Hyperfield::quotient_of_ground(
            GroundField::laurent_f3(),
            InitialSegment::up_to(&[1]),
        );
        for r in [
            check_hyperfield(&h, &cfg()).unwrap(),
            check_valuation(&h, &cfg()).unwrap(),
            check_val_lemma(&h, &cfg()).unwrap(),
        ] {
            assert!(r.passed(), "{}: {:?}", h.name(), r.first_failure());
        }
    }

    #[test]
    fn rank_two_quotient_passes() {
        let h = Hyperfield::quotient_of_ground(
            GroundField::rationals_xy(),
            InitialSegment::up_to(&[0, 3]),
        );
        let r = check_hyperfield(&h, &cfg()).unwrap();
        assert!(r.passed(), "{:?}", r.first_failure());
        let rv = check_valuation(&h, &cfg()).unwrap();
        assert!(rv.passed(), "{:?}", rv.first_failure());
    }

    #[test]
    fn split_rv_passes() {
        use crate::groundfield::BaseField;
        use crate::rvsort::SplitSort;
        let h = Hyperfield::split_rv(SplitSort::new(BaseField::Rationals, 1));
        for r in [
            check_hyperfield(&h, &cfg()).unwrap(),
            check_valuation(&h, &cfg()).unwrap(),
            check_val_lemma(&h, &cfg()).unwrap(),
        ] {
            assert!(r.passed(), "{}: {:?}", h.name(), r.first_failure());
        }
    }

    #[test]
    fn zero_segment_quotient_passes() {
        let h = Hyperfield::quotient_of_ground(
            GroundField::rationals_x(),
            InitialSegment::Zero,
        );
        let r = check_hyperfield(&h, &cfg()).unwrap();
        assert!(r.passed(), "{:?}", r.first_failure());
    }
}
