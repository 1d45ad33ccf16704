//! First-order LPs: constraints quantified over all states, written as sums
//! of case statements with affine values, solved by constraint generation.

pub mod simplex;

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::cases::{max_with, Case};
use crate::error::{Error, Result};
use crate::logic::{normalize, Formula, Reasoner, Var};

pub use simplex::{solve_lp, Cmp, LPModel, LPSolution, LinearConstraint};

/// `coeffs · w + constant`.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    pub coeffs: Vec<f64>,
    pub constant: f64,
}

impl Affine {
    pub fn zero(n: usize) -> Affine {
        Affine {
            coeffs: vec![0.0; n],
            constant: 0.0,
        }
    }

    pub fn constant(n: usize, c: f64) -> Affine {
        Affine {
            coeffs: vec![0.0; n],
            constant: c,
        }
    }

    pub fn var(n: usize, i: usize, scale: f64) -> Affine {
        let mut a = Affine::zero(n);
        a.coeffs[i] = scale;
        a
    }

    pub fn eval(&self, w: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn add(&self, o: &Affine) -> Affine {
        Affine {
            coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a + b).collect(),
            constant: self.constant + o.constant,
        }
    }

    pub fn scale(&self, k: f64) -> Affine {
        Affine {
            coeffs: self.coeffs.iter().map(|a| a * k).collect(),
            constant: self.constant * k,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coeff {
    Const(f64),
    Var { index: usize, scale: f64 },
}

impl Coeff {
    fn affine(self, n: usize) -> Affine {
        match self {
            Coeff::Const(k) => Affine::constant(n, k),
            Coeff::Var { index, scale } => Affine::var(n, index, scale),
        }
    }
}

/// A case multiplied by a constant or by an LP variable.
#[derive(Clone, Debug)]
pub struct Term {
    pub case: Case,
    pub coeff: Coeff,
    /// Indicator pair `{φ : 1 ; ¬φ : 0}` whose φ is disjoint from the φ of
    /// every other orthogonal term in the same schema.
    pub orthogonal: bool,
}

impl Term {
    pub fn new(case: Case, coeff: Coeff) -> Term {
        Term {
            case,
            coeff,
            orthogonal: false,
        }
    }
}

/// Constraint `0 ≥ Σ terms + offset` for all states (and all values of
/// free variables).
#[derive(Clone, Debug)]
pub enum Schema {
    Sum {
        id: String,
        terms: Vec<Term>,
        offset: Affine,
    },
    /// `max(∃params. Σ backup) + Σ rest + offset`: the backup part is
    /// flattened and maximized at the current weights during search.
    MaxBackup {
        id: String,
        backup: Vec<Term>,
        params: Vec<Var>,
        rest: Vec<Term>,
        offset: Affine,
    },
}

impl Schema {
    pub fn id(&self) -> &str {
        match self {
            Schema::Sum { id, .. } | Schema::MaxBackup { id, .. } => id,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FirstOrderLP {
    pub names: Vec<String>,
    /// Minimized.
    pub objective: Vec<f64>,
    pub schemas: Vec<Schema>,
}

impl FirstOrderLP {
    pub fn num_vars(&self) -> usize {
        self.names.len()
    }
}

/// A case whose values are affine in the LP variables.
#[derive(Clone, Debug, PartialEq)]
pub struct AffCase {
    pub parts: Vec<(Formula, Affine)>,
}

impl AffCase {
    fn from_term(t: &Term, n: usize) -> AffCase {
        let k = t.coeff.affine(n);
        AffCase {
            parts: t
                .case
                .partitions
                .iter()
                .map(|p| (p.formula.clone(), k.scale(p.value)))
                .collect(),
        }
    }
}

/// Cross-sum of affine cases with inconsistent partitions removed.
pub fn cross_sum(cases: &[AffCase], n: usize, r: &Reasoner) -> AffCase {
    let mut acc = AffCase {
        parts: vec![(Formula::True, Affine::zero(n))],
    };
    for c in cases {
        let pairs: Vec<(usize, usize)> = (0..acc.parts.len())
            .flat_map(|i| (0..c.parts.len()).map(move |j| (i, j)))
            .collect();
        let parts = pairs
            .par_iter()
            .filter_map(|&(i, j)| {
                let (fa, va) = &acc.parts[i];
                let (fb, vb) = &c.parts[j];
                let f = r.simplify(&normalize(&Formula::and(vec![fa.clone(), fb.clone()])));
                r.consistent(&f).then(|| (f, va.add(vb)))
            })
            .collect();
        acc = AffCase { parts };
    }
    acc
}

/// The schema as one affine case (flattened at weights `w` for the max part).
pub fn flatten_schema(s: &Schema, w: &[f64], r: &Reasoner) -> AffCase {
    let n = w.len();
    let (cases, offset) = schema_cases(s, w, r);
    let mut flat = cross_sum(&cases, n, r);
    for (_, v) in &mut flat.parts {
        *v = v.add(offset);
    }
    flat
}

fn schema_cases<'a>(s: &'a Schema, w: &[f64], r: &Reasoner) -> (Vec<AffCase>, &'a Affine) {
    let n = w.len();
    match s {
        Schema::Sum { terms, offset, .. } => {
            (terms.iter().map(|t| AffCase::from_term(t, n)).collect(), offset)
        }
        Schema::MaxBackup {
            backup,
            params,
            rest,
            offset,
            ..
        } => {
            let mut out = vec![max_backup(backup, params, w, r)];
            out.extend(rest.iter().map(|t| AffCase::from_term(t, n)));
            (out, offset)
        }
    }
}

/// ∃-close the flattened backup and apply max at the given weights,
/// keeping the affine value of each surviving partition.
fn max_backup(backup: &[Term], params: &[Var], w: &[f64], r: &Reasoner) -> AffCase {
    let n = w.len();
    let cases: Vec<AffCase> = backup.iter().map(|t| AffCase::from_term(t, n)).collect();
    let flat = cross_sum(&cases, n, r);
    let mut items: Vec<(Formula, f64, Affine)> = flat
        .parts
        .into_iter()
        .map(|(f, a)| {
            let v = a.eval(w);
            (r.simplify(&Formula::exists(params.to_vec(), f)), v, a)
        })
        .collect();
    items.sort_by(|a, b| a.0.cmp(&b.0));
    AffCase {
        parts: max_with(items, r)
            .into_iter()
            .map(|(f, _, a)| (f, a))
            .collect(),
    }
}

/// A most-violated constraint instance.
#[derive(Clone, Debug)]
pub struct ViolatedConstraint {
    pub schema: usize,
    /// Chosen partition index per case of the schema (orthogonal terms
    /// first, then the rest, in schema order).
    pub selection: Vec<usize>,
    pub formula: Formula,
    /// `expr ≤ 0` is the generated inequality.
    pub expr: Affine,
    pub violation: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    /// Skip the orthogonal fast path.
    pub exhaustive: bool,
    pub tolerance: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            exhaustive: false,
            tolerance: 1e-6,
        }
    }
}

struct Dfs<'a> {
    cases: &'a [AffCase],
    vals: Vec<Vec<f64>>,
    order: Vec<Vec<usize>>,
    suffix_max: Vec<f64>,
    r: &'a Reasoner,
    best: Option<(f64, Vec<usize>, Formula)>,
    threshold: f64,
}

impl Dfs<'_> {
    fn can_beat(&self, ub: f64) -> bool {
        ub > self.threshold || (self.best.is_none() && ub >= self.threshold)
    }

    fn run(&mut self, k: usize, acc: f64, conj: &mut Vec<Formula>, sel: &mut Vec<usize>) {
        if k == self.cases.len() {
            if self.can_beat(acc) {
                self.threshold = acc;
                self.best = Some((acc, sel.clone(), normalize(&Formula::and(conj.clone()))));
            }
            return;
        }
        for idx in 0..self.order[k].len() {
            let p = self.order[k][idx];
            let v = self.vals[k][p];
            // partitions are visited best first
            if !self.can_beat(acc + v + self.suffix_max[k + 1]) {
                break;
            }
            let f = &self.cases[k].parts[p].0;
            conj.push(f.clone());
            let ok = *f == Formula::True
                || self.r.consistent(&normalize(&Formula::and(conj.clone())));
            if ok {
                sel.push(p);
                self.run(k + 1, acc + v, conj, sel);
                sel.pop();
            }
            conj.pop();
        }
    }
}

/// Best selection over `cases` under a fixed prefix formula and value.
fn best_over(
    cases: &[AffCase],
    w: &[f64],
    prefix: &Formula,
    prefix_val: f64,
    floor: f64,
    r: &Reasoner,
) -> Option<(f64, Vec<usize>, Formula)> {
    let vals: Vec<Vec<f64>> = cases
        .iter()
        .map(|c| c.parts.iter().map(|(_, a)| a.eval(w)).collect())
        .collect();
    let order: Vec<Vec<usize>> = vals
        .iter()
        .map(|v| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
            idx
        })
        .collect();
    let mut suffix_max = vec![0.0; cases.len() + 1];
    for k in (0..cases.len()).rev() {
        let m = vals[k].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        suffix_max[k] = suffix_max[k + 1] + m;
    }
    if cases.iter().any(|c| c.parts.is_empty()) {
        return None;
    }
    let mut dfs = Dfs {
        cases,
        vals,
        order,
        suffix_max,
        r,
        best: None,
        threshold: floor - prefix_val,
    };
    let mut conj = vec![prefix.clone()];
    dfs.run(0, 0.0, &mut conj, &mut Vec::new());
    dfs.best.map(|(v, s, f)| (v + prefix_val, s, f))
}

/// Candidates from orthogonal terms: all negative, or exactly one positive.
fn orthogonal_candidates(orth: &[AffCase], w: &[f64], all_false_only: bool) -> Vec<(Formula, f64, Affine, Vec<usize>)> {
    let n = w.len();
    let neg: Vec<Formula> = orth.iter().map(|c| c.parts[1].0.clone()).collect();
    let neg_sum = orth.iter().fold(Affine::zero(n), |a, c| a.add(&c.parts[1].1));
    let mut out = vec![(
        normalize(&Formula::and(neg)),
        neg_sum.eval(w),
        neg_sum.clone(),
        vec![1; orth.len()],
    )];
    if all_false_only {
        return out;
    }
    for (i, c) in orth.iter().enumerate() {
        let aff = neg_sum.add(&c.parts[0].1).add(&c.parts[1].1.scale(-1.0));
        let mut sel = vec![1; orth.len()];
        sel[i] = 0;
        out.push((c.parts[0].0.clone(), aff.eval(w), aff, sel));
    }
    out
}

fn search(
    s: &Schema,
    schema: usize,
    w: &[f64],
    opts: &SearchOptions,
    floor: f64,
    all_false_only: bool,
    r: &Reasoner,
) -> Option<ViolatedConstraint> {
    let n = w.len();
    let (mut orth, mut rest): (Vec<AffCase>, Vec<AffCase>) = (Vec::new(), Vec::new());
    let offset = match s {
        Schema::Sum { terms, offset, .. } => {
            for t in terms {
                let ok = t.orthogonal && t.case.len() == 2 && !opts.exhaustive;
                let c = AffCase::from_term(t, n);
                if ok {
                    orth.push(c);
                } else {
                    rest.push(c);
                }
            }
            offset
        }
        Schema::MaxBackup { .. } => {
            let (cases, offset) = schema_cases(s, w, r);
            rest = cases;
            offset
        }
    };
    let cands = orthogonal_candidates(&orth, w, all_false_only);
    let mut best: Option<ViolatedConstraint> = None;
    let mut threshold = floor;
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&a, &b| cands[b].1.partial_cmp(&cands[a].1).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    for ci in order {
        let (pf, pv, paff, psel) = &cands[ci];
        if !r.consistent(pf) {
            continue;
        }
        let base = pv + offset.eval(w);
        let Some((v, sel, f)) = best_over(&rest, w, pf, base, threshold, r) else {
            continue;
        };
        if best.as_ref().is_none_or(|b| v > b.violation) {
            let mut expr = paff.add(offset);
            for (c, p) in rest.iter().zip(&sel) {
                expr = expr.add(&c.parts[*p].1);
            }
            let mut selection = psel.clone();
            selection.extend(sel);
            threshold = v;
            best = Some(ViolatedConstraint {
                schema,
                selection,
                formula: f,
                expr,
                violation: v,
            });
        }
    }
    best
}

/// The consistent selection maximizing the schema's left-hand side, if it
/// exceeds the tolerance.
pub fn find_max_violation(
    lp: &FirstOrderLP,
    schema: usize,
    w: &[f64],
    opts: &SearchOptions,
    r: &Reasoner,
) -> Option<ViolatedConstraint> {
    search(&lp.schemas[schema], schema, w, opts, opts.tolerance, false, r)
        .filter(|v| v.violation > opts.tolerance)
}

/// Maximum of the left-hand side over all consistent selections, violated or not.
pub fn max_lhs(lp: &FirstOrderLP, schema: usize, w: &[f64], opts: &SearchOptions, r: &Reasoner) -> Option<f64> {
    search(&lp.schemas[schema], schema, w, opts, f64::NEG_INFINITY, false, r).map(|v| v.violation)
}

#[derive(Clone, Debug)]
pub struct FolpConfig {
    pub max_iters: usize,
    pub search: SearchOptions,
    /// Temporary box on free variables; a variable left on it is unbounded.
    pub big_m: f64,
    pub timing: bool,
}

impl Default for FolpConfig {
    fn default() -> Self {
        FolpConfig {
            max_iters: 1000,
            search: SearchOptions::default(),
            big_m: 1e6,
            timing: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterStat {
    pub iter: usize,
    pub schema_id: String,
    pub violation: f64,
    pub num_constraints: usize,
    pub lp_objective: f64,
    pub wall_ms: u128,
}

#[derive(Clone, Debug)]
pub struct FolpSolution {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub constraints: Vec<LinearConstraint>,
    pub stats: Vec<IterStat>,
}

pub fn stats_csv(stats: &[IterStat]) -> String {
    let mut s = String::from("iter,schema_id,violation,num_constraints,lp_objective,wall_ms\n");
    for t in stats {
        let _ = writeln!(
            s,
            "{},{},{:.9},{},{:.9},{}",
            t.iter, t.schema_id, t.violation, t.num_constraints, t.lp_objective, t.wall_ms
        );
    }
    s
}

fn to_constraint(v: &ViolatedConstraint) -> LinearConstraint {
    LinearConstraint::new(v.expr.coeffs.clone(), Cmp::Le, -v.expr.constant)
}

fn at_box(x: &[f64], big_m: f64) -> bool {
    x.iter().any(|v| v.abs() >= big_m * (1.0 - 1e-9))
}

/// Solve, and if the optimum touches the temporary box, pick the point of
/// least L1 norm on the optimal face instead. Distinguishes an unbounded
/// optimal face (redundant bases) from an unbounded objective.
fn solve_tiebroken(m: &LPModel, big_m: f64) -> Result<LPSolution> {
    let sol = solve_lp(m)?;
    if !at_box(&sol.x, big_m) {
        return Ok(sol);
    }
    let n = m.num_vars();
    let mut t = LPModel::new(2 * n);
    t.names = m.names.iter().cloned().chain((0..n).map(|i| format!("abs{i}"))).collect();
    for j in 0..n {
        t.objective[n + j] = 1.0;
        t.lower[j] = m.lower[j];
        t.upper[j] = m.upper[j];
        t.lower[n + j] = Some(0.0);
    }
    let widen = |c: &[f64]| c.iter().cloned().chain(std::iter::repeat_n(0.0, n)).collect::<Vec<f64>>();
    for c in &m.constraints {
        t.add(LinearConstraint::new(widen(&c.coeffs), c.cmp, c.rhs));
    }
    let slack = 1e-9 * (1.0 + sol.objective.abs());
    t.add(LinearConstraint::new(widen(&m.objective), Cmp::Le, sol.objective + slack));
    for j in 0..n {
        for sign in [1.0, -1.0] {
            let mut row = vec![0.0; 2 * n];
            row[j] = sign;
            row[n + j] = -1.0;
            t.add(LinearConstraint::new(row, Cmp::Le, 0.0));
        }
    }
    match solve_lp(&t) {
        Ok(s2) => {
            let x: Vec<f64> = s2.x[..n].to_vec();
            let objective = m.objective.iter().zip(&x).map(|(a, b)| a * b).sum();
            Ok(LPSolution {
                x,
                objective,
                pivots: sol.pivots + s2.pivots,
            })
        }
        Err(_) => Ok(sol),
    }
}

/// Solve by constraint generation.
pub fn solve_first_order_lp(lp: &FirstOrderLP, cfg: &FolpConfig, r: &Reasoner) -> Result<FolpSolution> {
    let n = lp.num_vars();
    let start = Instant::now();
    let ms = || if cfg.timing { start.elapsed().as_millis() } else { 0 };
    let mut constraints: Vec<LinearConstraint> = Vec::new();
    let zero = vec![0.0; n];
    for (i, s) in lp.schemas.iter().enumerate() {
        if let Some(v) = search(s, i, &zero, &cfg.search, f64::NEG_INFINITY, true, r) {
            let c = to_constraint(&v);
            if !constraints.contains(&c) {
                constraints.push(c);
            }
        }
    }
    let mut stats = Vec::new();
    for iter in 1..=cfg.max_iters {
        let mut m = LPModel::new(n);
        m.names = lp.names.clone();
        m.objective = lp.objective.clone();
        m.lower = vec![Some(-cfg.big_m); n];
        m.upper = vec![Some(cfg.big_m); n];
        m.constraints = constraints.clone();
        let sol = solve_tiebroken(&m, cfg.big_m)?;
        let w = sol.x;
        let found: Vec<Option<ViolatedConstraint>> = (0..lp.schemas.len())
            .into_par_iter()
            .map(|i| find_max_violation(lp, i, &w, &cfg.search, r))
            .collect();
        let mut added = 0;
        for (i, v) in found.iter().enumerate() {
            if let Some(v) = v {
                let c = to_constraint(v);
                if !constraints.contains(&c) {
                    constraints.push(c);
                    added += 1;
                }
            }
            stats.push(IterStat {
                iter,
                schema_id: lp.schemas[i].id().to_string(),
                violation: v.as_ref().map_or(0.0, |v| v.violation),
                num_constraints: constraints.len(),
                lp_objective: sol.objective,
                wall_ms: ms(),
            });
        }
        if found.iter().all(|v| v.is_none()) || added == 0 {
            if found.iter().any(|v| v.is_some()) {
                return Err(Error::Numerical(
                    "violated constraint already present in the LP".into(),
                ));
            }
            for (j, x) in w.iter().enumerate() {
                if x.abs() >= cfg.big_m * (1.0 - 1e-9) {
                    return Err(Error::Unbounded(format!(
                        "variable {} reaches {x} in the generated LP",
                        lp.names[j]
                    )));
                }
            }
            return Ok(FolpSolution {
                weights: w,
                objective: sol.objective,
                constraints,
                stats,
            });
        }
    }
    Err(Error::IterationCap(cfg.max_iters))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_formula;

    #[test]
    fn single_partition_schema() {
        // 0 >= 5 - w, minimize w
        let r = Reasoner::with_bound(1);
        let lp = FirstOrderLP {
            names: vec!["w".into()],
            objective: vec![1.0],
            schemas: vec![Schema::Sum {
                id: "s".into(),
                terms: vec![
                    Term::new(Case::constant(5.0), Coeff::Const(1.0)),
                    Term::new(Case::constant(1.0), Coeff::Var { index: 0, scale: -1.0 }),
                ],
                offset: Affine::zero(1),
            }],
        };
        let s = solve_first_order_lp(&lp, &FolpConfig::default(), &r).unwrap();
        assert!((s.weights[0] - 5.0).abs() < 1e-9);
        assert!(find_max_violation(&lp, 0, &s.weights, &SearchOptions::default(), &r).is_none());
    }

    #[test]
    fn inconsistent_selections_are_skipped() {
        // {P:10, !P:0} - w {P:1, !P:1}: the pair (P, !P) must not be chosen
        let r = Reasoner::with_bound(1);
        let p = parse_formula("P").unwrap();
        let a = Case::from_pairs(vec![(p.clone(), 10.0), (p.clone().negate(), 0.0)], &r);
        let b = Case::from_pairs(vec![(p.clone(), 0.0), (p.clone().negate(), 20.0)], &r);
        let lp = FirstOrderLP {
            names: vec!["w".into()],
            objective: vec![1.0],
            schemas: vec![Schema::Sum {
                id: "s".into(),
                terms: vec![
                    Term::new(a, Coeff::Const(1.0)),
                    Term::new(b, Coeff::Const(1.0)),
                    Term::new(Case::constant(1.0), Coeff::Var { index: 0, scale: -1.0 }),
                ],
                offset: Affine::zero(1),
            }],
        };
        let v = max_lhs(&lp, 0, &[0.0], &SearchOptions::default(), &r).unwrap();
        assert_eq!(v, 20.0);
    }
}
