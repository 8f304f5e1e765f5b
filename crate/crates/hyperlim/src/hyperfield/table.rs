//! Finite hyperfield carriers given by explicit tables.
//!
//! A table lists the carrier, the multiplication, the hyperaddition as
//! member sets, and optionally a valuation.  The two Krasner hyperfields,
//! prime fields viewed as hyperfields, and factor hyperfields of finite
//! fields by multiplicative subgroups are all built here.

use crate::ogroup::{GroupElem, InitialSegment};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct TableValuation {
    /// Rank of the value group; the trivial group is rank 0.
    pub rank: usize,
    /// Value of each nonzero element; the zero element maps to `inf`.
    pub values: Vec<GroupElem>,
    pub norm: InitialSegment,
}

#[derive(Debug, Clone)]
pub struct FiniteTable {
    pub name: String,
    pub names: Vec<String>,
    pub zero: usize,
    pub one: usize,
    pub neg: Vec<usize>,
    pub mul: Vec<Vec<usize>>,
    /// `add[i][j]`: sorted member indices of the hypersum.
    pub add: Vec<Vec<Vec<usize>>>,
    pub valuation: Option<TableValuation>,
}

impl FiniteTable {
    pub fn size(&self) -> usize {
        self.names.len()
    }

    pub fn val(&self, i: usize) -> Option<GroupElem> {
        self.valuation.as_ref().map(|v| {
            if i == self.zero {
                GroupElem::Infinity
            } else {
                v.values[i].clone()
            }
        })
    }

    /// Multiplicative inverse among the units; `None` for zero.
    pub fn inv(&self, i: usize) -> Option<usize> {
        if i == self.zero {
            return None;
        }
        (0..self.size()).find(|&j| self.mul[i][j] == self.one)
    }

    /// Attach the trivial valuation (rank zero, norm `{0}`).
    pub fn with_trivial_valuation(mut self) -> Self {
        let values = vec![GroupElem::zero(0); self.size()];
        self.valuation = Some(TableValuation {
            rank: 0,
            values,
            norm: InitialSegment::Zero,
        });
        self
    }
}

/// The Krasner hyperfield `K = {0, 1}` with `1 + 1 = {0, 1}`.
pub fn krasner_k() -> FiniteTable {
    FiniteTable {
        name: "K".into(),
        names: vec!["0".into(), "1".into()],
        zero: 0,
        one: 1,
        neg: vec![0, 1],
        mul: vec![vec![0, 0], vec![0, 1]],
        add: vec![vec![vec![0], vec![1]], vec![vec![1], vec![0, 1]]],
        valuation: None,
    }
}

/// The sign hyperfield `S = {0, 1, -1}`.
pub fn krasner_s() -> FiniteTable {
    // indices: 0 -> 0, 1 -> 1, 2 -> -1
    FiniteTable {
        name: "S".into(),
        names: vec!["0".into(), "1".into(), "-1".into()],
        zero: 0,
        one: 1,
        neg: vec![0, 2, 1],
        mul: vec![vec![0, 0, 0], vec![0, 1, 2], vec![0, 2, 1]],
        add: vec![
            vec![vec![0], vec![1], vec![2]],
            vec![vec![1], vec![1], vec![0, 1, 2]],
            vec![vec![2], vec![0, 1, 2], vec![2]],
        ],
        valuation: None,
    }
}

/// `F_p` viewed as a hyperfield: every sum is a singleton.
pub fn prime_field_table(p: u64) -> FiniteTable {
    let n = p as usize;
    let names = (0..n).map(|i| i.to_string()).collect();
    let neg = (0..n).map(|i| (n - i) % n).collect();
    let mul = (0..n)
        .map(|i| (0..n).map(|j| i * j % n).collect())
        .collect();
    let add = (0..n)
        .map(|i| (0..n).map(|j| vec![(i + j) % n]).collect())
        .collect();
    FiniteTable {
        name: format!("F_{p}"),
        names,
        zero: 0,
        one: 1,
        neg,
        mul,
        add,
        valuation: None,
    }
}

/// Factor of a finite hyperfield by a multiplicative subgroup `T`.
///
/// Classes are the `T`-orbits of the units together with `[0]`; the class
/// sum is `[x] + [y] = { [z] : z in x + y t for some t in T }`.  The input
/// must be a subgroup of the units, and the construction is checked to be
/// independent of the chosen representatives.
pub fn factor_table(base: &FiniteTable, t_set: &[usize]) -> Result<FiniteTable> {
    let t_name = || {
        format!(
            "{{{}}}",
            t_set.iter().map(|&i| base.names[i].clone()).collect::<Vec<_>>().join(",")
        )
    };
    if t_set.is_empty() || !t_set.contains(&base.one) {
        return Err(Error::TNotSubgroup(t_name(), "must contain 1".into()));
    }
    for &t in t_set {
        if t == base.zero {
            return Err(Error::TNotSubgroup(t_name(), "contains 0".into()));
        }
        for &u in t_set {
            if !t_set.contains(&base.mul[t][u]) {
                return Err(Error::TNotSubgroup(
                    t_name(),
                    format!(
                        "not closed: {} * {} = {} escapes",
                        base.names[t], base.names[u], base.names[base.mul[t][u]]
                    ),
                ));
            }
        }
        match base.inv(t) {
            Some(ti) if t_set.contains(&ti) => {}
            _ => {
                return Err(Error::TNotSubgroup(
                    t_name(),
                    format!("inverse of {} missing", base.names[t]),
                ))
            }
        }
    }

    // orbit partition of the units; class 0 is reserved for [0]
    let n = base.size();
    let mut class_of = vec![usize::MAX; n];
    class_of[base.zero] = 0;
    let mut reps: Vec<usize> = vec![base.zero];
    for x in 0..n {
        if class_of[x] != usize::MAX {
            continue;
        }
        let c = reps.len();
        reps.push(x);
        for &t in t_set {
            class_of[base.mul[x][t]] = c;
        }
        if class_of[x] != c {
            // x * T failed to cover x: cannot happen for a subgroup
            return Err(Error::TNotSubgroup(t_name(), "orbits are inconsistent".into()));
        }
    }

    let m = reps.len();
    let names: Vec<String> = reps
        .iter()
        .enumerate()
        .map(|(c, &r)| if c == 0 { "[0]".to_string() } else { format!("[{}]", base.names[r]) })
        .collect();

    let mul: Vec<Vec<usize>> = (0..m)
        .map(|i| (0..m).map(|j| class_of[base.mul[reps[i]][reps[j]]]).collect())
        .collect();
    let neg: Vec<usize> = (0..m).map(|i| class_of[base.neg[reps[i]]]).collect();

    // class sums, checked against every representative pair
    let mut add = vec![vec![Vec::new(); m]; m];
    for i in 0..m {
        for j in 0..m {
            let mut canonical: Option<Vec<usize>> = None;
            for x in (0..n).filter(|&k| class_of[k] == i) {
                for y in (0..n).filter(|&k| class_of[k] == j) {
                    let mut members: Vec<usize> = Vec::new();
                    for &t in t_set {
                        let yt = base.mul[y][t];
                        for &z in &base.add[x][yt] {
                            let c = class_of[z];
                            if !members.contains(&c) {
                                members.push(c);
                            }
                        }
                    }
                    members.sort_unstable();
                    match &canonical {
                        None => canonical = Some(members),
                        Some(prev) => {
                            assert_eq!(
                                prev, &members,
                                "factor sum depends on representatives: classes {i}+{j}"
                            );
                        }
                    }
                }
            }
            add[i][j] = canonical.expect("every class has a representative");
        }
    }

    Ok(FiniteTable {
        name: format!("{}/{}", base.name, t_name()),
        names,
        zero: 0,
        one: class_of[base.one],
        neg,
        mul,
        add,
        valuation: None,
    })
}
