//! Case statements: piecewise-constant functions of state.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::logic::{
    eval_closed, normalize, satisfying_bindings, Binding, Formula, GroundState, Reasoner, Sym, Var,
};
use crate::sitcalc::{regress, ActionTerm, ActionTheory};

/// Which action template produced a partition, with the formula over the
/// template parameters from which a binding is read off.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionTag {
    pub template: Sym,
    pub params: Vec<Var>,
    pub body: Formula,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub formula: Formula,
    pub value: f64,
    pub tag: Option<ActionTag>,
}

impl Partition {
    pub fn new(formula: Formula, value: f64) -> Partition {
        Partition {
            formula,
            value,
            tag: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Case {
    pub partitions: Vec<Partition>,
    /// Partition formulas are pairwise disjoint and exhaustive.
    pub partitioned: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseOp {
    Add,
    Sub,
    Mul,
}

impl CaseOp {
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            CaseOp::Add => a + b,
            CaseOp::Sub => a - b,
            CaseOp::Mul => a * b,
        }
    }
}

impl Case {
    pub fn empty() -> Case {
        Case {
            partitions: Vec::new(),
            partitioned: false,
        }
    }

    pub fn constant(v: f64) -> Case {
        Case {
            partitions: vec![Partition::new(Formula::True, v)],
            partitioned: true,
        }
    }

    /// Build from literal pairs, dropping partitions inconsistent at the bound.
    /// The flag is set only after disjointness and coverage are checked.
    pub fn from_pairs(pairs: Vec<(Formula, f64)>, r: &Reasoner) -> Case {
        let partitions: Vec<Partition> = pairs
            .into_iter()
            .map(|(f, v)| Partition::new(r.simplify(&normalize(&f)), v))
            .filter(|p| r.consistent(&p.formula))
            .collect();
        let mut c = Case {
            partitions,
            partitioned: false,
        };
        c.partitioned = c.check_partitioned(r);
        c
    }

    /// Indicator pair `{φ : 1 ; ¬φ : 0}`.
    pub fn indicator(phi: &Formula, r: &Reasoner) -> Case {
        Case::from_pairs(vec![(phi.clone(), 1.0), (phi.clone().negate(), 0.0)], r)
    }

    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    pub fn check_partitioned(&self, r: &Reasoner) -> bool {
        let fs: Vec<&Formula> = self.partitions.iter().map(|p| &p.formula).collect();
        for i in 0..fs.len() {
            for j in i + 1..fs.len() {
                if !r.disjoint(fs[i], fs[j]) {
                    return false;
                }
            }
        }
        !fs.is_empty() && r.valid(&Formula::or(fs.into_iter().cloned().collect()))
    }

    pub fn scale(&self, k: f64) -> Case {
        let mut c = self.clone();
        for p in &mut c.partitions {
            p.value *= k;
        }
        c
    }

    pub fn with_tag(mut self, tag: &ActionTag) -> Case {
        for p in &mut self.partitions {
            p.tag = Some(tag.clone());
        }
        self
    }

    pub fn free_vars(&self) -> std::collections::BTreeSet<Var> {
        self.partitions
            .iter()
            .flat_map(|p| p.formula.free_vars())
            .collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.partitions.iter().map(|p| p.value).collect()
    }

    /// Canonical key: normalized formulas, tags and values rounded to 1e-9.
    pub fn canonical_key(&self) -> Vec<(String, Option<Sym>, i64)> {
        let mut k: Vec<_> = self
            .partitions
            .iter()
            .map(|p| {
                (
                    normalize(&p.formula).to_string(),
                    p.tag.as_ref().map(|t| t.template.clone()),
                    (p.value * 1e9).round() as i64,
                )
            })
            .collect();
        k.sort();
        k
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{ ")?;
        for (i, p) in self.partitions.iter().enumerate() {
            if i > 0 {
                f.write_str(" ; ")?;
            }
            write!(f, "{} : {}", p.formula, p.value)?;
            if let Some(t) = &p.tag {
                write!(f, " [{}]", t.template)?;
            }
        }
        f.write_str(" }")
    }
}

/// Cross product of partitions; inconsistent pairs are discarded.
pub fn combine(op: CaseOp, c1: &Case, c2: &Case, r: &Reasoner) -> Case {
    let pairs: Vec<(usize, usize)> = (0..c1.len())
        .flat_map(|i| (0..c2.len()).map(move |j| (i, j)))
        .collect();
    let partitions: Vec<Partition> = pairs
        .par_iter()
        .filter_map(|&(i, j)| {
            let (a, b) = (&c1.partitions[i], &c2.partitions[j]);
            let f = r.simplify(&normalize(&Formula::and(vec![
                a.formula.clone(),
                b.formula.clone(),
            ])));
            if !r.consistent(&f) {
                return None;
            }
            Some(Partition {
                formula: f,
                value: op.apply(a.value, b.value),
                tag: a.tag.clone().or_else(|| b.tag.clone()),
            })
        })
        .collect();
    Case {
        partitions,
        partitioned: c1.partitioned && c2.partitioned,
    }
}

pub fn add(c1: &Case, c2: &Case, r: &Reasoner) -> Case {
    combine(CaseOp::Add, c1, c2, r)
}

/// Existentially close every partition over `vars`.
pub fn exists_case(vars: &[Var], c: &Case, r: &Reasoner) -> Case {
    let free = c.free_vars();
    let used: Vec<Var> = vars.iter().filter(|v| free.contains(*v)).cloned().collect();
    if used.is_empty() {
        return c.clone();
    }
    let partitions = c
        .partitions
        .par_iter()
        .map(|p| Partition {
            formula: r.simplify(&Formula::exists(used.clone(), p.formula.clone())),
            value: p.value,
            tag: p.tag.clone(),
        })
        .collect();
    Case {
        partitions,
        partitioned: false,
    }
}

/// Regress each partition through a deterministic action.
pub fn regress_case(c: &Case, act: &ActionTerm, theory: &ActionTheory, r: &Reasoner) -> Result<Case> {
    let regressed: Vec<Result<Option<Partition>>> = c
        .partitions
        .par_iter()
        .map(|p| {
            let f = r.simplify(&regress(&p.formula, act, theory)?);
            Ok(r.consistent(&f).then(|| Partition {
                formula: f,
                value: p.value,
                tag: p.tag.clone(),
            }))
        })
        .collect();
    let mut partitions = Vec::with_capacity(c.len());
    for p in regressed {
        if let Some(p) = p? {
            partitions.push(p);
        }
    }
    Ok(Case {
        partitions,
        partitioned: c.partitioned,
    })
}

fn max_order(a: &Partition, b: &Partition) -> Ordering {
    b.value
        .partial_cmp(&a.value)
        .unwrap_or(Ordering::Equal)
        .then_with(|| {
            let ta = a.tag.as_ref().map(|t| &t.template);
            let tb = b.tag.as_ref().map(|t| &t.template);
            ta.cmp(&tb)
        })
        .then_with(|| a.formula.cmp(&b.formula))
}

/// Sort by value, largest first, and make each partition exclude all earlier ones.
pub fn max_case(c: &Case, r: &Reasoner) -> Case {
    let mut sorted = c.partitions.clone();
    sorted.sort_by(max_order);
    let items = sorted.into_iter().map(|p| (p.formula, p.value, p.tag)).collect();
    let out: Vec<Partition> = max_with(items, r)
        .into_iter()
        .map(|(formula, value, tag)| Partition { formula, value, tag })
        .collect();
    let partitioned = !out.is_empty()
        && r.valid(&Formula::or(c.partitions.iter().map(|p| p.formula.clone()).collect()));
    Case {
        partitions: out,
        partitioned,
    }
}

/// The max construction over `(formula, value, payload)` triples. Items are
/// stably sorted by value, largest first; callers pre-sort to fix the order
/// among ties.
pub fn max_with<T>(mut items: Vec<(Formula, f64, T)>, r: &Reasoner) -> Vec<(Formula, f64, T)> {
    items.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal));
    let mut out = Vec::with_capacity(items.len());
    let mut earlier: Vec<Formula> = Vec::new();
    for (formula, value, payload) in items {
        let mut parts = vec![formula.clone()];
        parts.extend(earlier.iter().map(|e| e.clone().negate()));
        let f = r.simplify(&normalize(&Formula::and(parts)));
        if r.consistent(&f) {
            out.push((f, value, payload));
        }
        if formula == Formula::True {
            break;
        }
        earlier.push(formula);
    }
    out
}

pub fn union_case(c1: &Case, c2: &Case) -> Case {
    let mut partitions = c1.partitions.clone();
    partitions.extend(c2.partitions.iter().cloned());
    Case {
        partitions,
        partitioned: false,
    }
}

/// Indices of partitions satisfied in `s` (free variables existential).
pub fn satisfied(c: &Case, s: &GroundState) -> Result<Vec<usize>> {
    satisfied_with(c, s, &Binding::new())
}

/// Satisfied partitions under a partial binding; remaining free variables
/// are read existentially.
pub fn satisfied_with(c: &Case, s: &GroundState, b: &Binding) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, p) in c.partitions.iter().enumerate() {
        if eval_closed(&p.formula, s, b)? {
            out.push(i);
        }
    }
    Ok(out)
}

/// Value of the unique satisfied partition.
pub fn eval_case(c: &Case, s: &GroundState) -> Result<f64> {
    eval_case_with(c, s, &Binding::new())
}

pub fn eval_case_with(c: &Case, s: &GroundState, b: &Binding) -> Result<f64> {
    let hits = satisfied_with(c, s, b)?;
    match hits.as_slice() {
        [i] => Ok(c.partitions[*i].value),
        [] => Err(Error::PartitionViolation(format!("no partition of {c} holds in {s}"))),
        many => Err(Error::PartitionViolation(format!(
            "partitions {} all hold in {s}: {}",
            many.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","),
            many.iter()
                .map(|i| c.partitions[*i].formula.to_string())
                .collect::<Vec<_>>()
                .join(" ; ")
        ))),
    }
}

/// Largest value among satisfied partitions, or `None` if none holds.
pub fn eval_max(c: &Case, s: &GroundState) -> Result<Option<f64>> {
    Ok(satisfied(c, s)?
        .into_iter()
        .map(|i| c.partitions[i].value)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v)))))
}

/// Lexicographically least binding of the tag parameters satisfying the
/// tag body at `s`.
pub fn least_binding(tag: &ActionTag, s: &GroundState) -> Result<Option<Binding>> {
    Ok(satisfying_bindings(&tag.body, s, &Binding::new(), &tag.params)?
        .into_iter()
        .next())
}
