//! Regression-based generation of orthogonal indicator bases.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::cases::Case;
use crate::error::{Error, Result};
use crate::fomdp::{formula_key, Basis, FomdpModel, LinearValueFunction};
use crate::logic::{normalize, Formula};
use crate::sitcalc::regress;
use crate::solvers::{foalp_solve, foapi_solve, SolveReport, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SolverKind {
    #[default]
    Foalp,
    Foapi,
}

pub const DEFAULT_MAX_SIZE: usize = 256;

#[derive(Clone, Debug)]
pub struct BasisGenConfig {
    /// Value threshold τ.
    pub tau: f64,
    /// Iteration limit n; also the number of solver calls allowed.
    pub max_iters: usize,
    pub solver: SolverKind,
    /// Weight-discard threshold; τ when unset.
    pub discard: Option<f64>,
    pub foapi_iters: usize,
    /// Candidates with more formula nodes than this are dropped.
    pub max_size: usize,
    pub solve: SolverConfig,
}

impl Default for BasisGenConfig {
    fn default() -> Self {
        BasisGenConfig {
            tau: 0.01,
            max_iters: 3,
            solver: SolverKind::Foalp,
            discard: None,
            foapi_iters: 20,
            max_size: DEFAULT_MAX_SIZE,
            solve: SolverConfig::default(),
        }
    }
}

/// Normalized formulas that must not be generated again.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DiscardLedger {
    entries: BTreeSet<String>,
}

impl DiscardLedger {
    fn key(f: &Formula) -> String {
        formula_key(f).to_string()
    }

    pub fn insert(&mut self, f: &Formula) -> bool {
        self.entries.insert(Self::key(f))
    }

    pub fn contains(&self, f: &Formula) -> bool {
        self.entries.contains(&Self::key(f))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &String> {
        self.entries.iter()
    }
}

/// The positive formulas of a value function's bases, in basis order.
fn positive_formulas(lvf: &LinearValueFunction) -> Vec<Formula> {
    lvf.bases
        .iter()
        .flat_map(|b| b.case.partitions.iter().filter(|p| p.value > 0.0))
        .map(|p| p.formula.clone())
        .collect()
}

/// `¬φ ∧ ∃x. ∨_j Regr(φ, n_j(x))` for every positive basis partition φ and
/// every template, with inconsistent, known, ledgered and oversized
/// formulas removed.
pub fn candidate_regressions(
    lvf: &LinearValueFunction,
    model: &FomdpModel,
    ledger: &DiscardLedger,
    max_size: usize,
) -> Result<Vec<Formula>> {
    let r = &model.reasoner;
    let sources = positive_formulas(lvf);
    let pairs: Vec<(usize, usize)> = (0..sources.len())
        .flat_map(|i| (0..model.templates.len()).map(move |t| (i, t)))
        .collect();
    let raw = pairs
        .par_iter()
        .map(|&(i, ti)| {
            let phi = &sources[i];
            let t = &model.templates[ti];
            let mut alts = Vec::with_capacity(t.choices.len());
            for c in &t.choices {
                alts.push(regress(phi, &t.choice_term(c), &model.theory)?);
            }
            let reach = Formula::exists(t.params.clone(), Formula::or(alts));
            let cand = normalize(&Formula::and(vec![phi.clone().negate(), reach]));
            if cand.size() > 4 * max_size {
                return Ok(None);
            }
            let cand = r.simplify(&cand);
            Ok((cand.size() <= max_size && r.consistent(&cand)).then_some(cand))
        })
        .collect::<Result<Vec<Option<Formula>>>>()?;
    let mut out: Vec<Formula> = Vec::new();
    for cand in raw.into_iter().flatten() {
        if ledger.contains(&cand)
            || out.iter().any(|o| formula_key(o) == formula_key(&cand))
            || sources.iter().any(|e| r.equivalent(e, &cand))
        {
            continue;
        }
        out.push(cand);
    }
    Ok(out)
}

/// One row of the generation log.
#[derive(Clone, Debug, PartialEq)]
pub struct GenIter {
    pub iter: usize,
    pub num_basis: usize,
    pub num_discarded: usize,
    pub solver_objective: f64,
    pub wall_ms: u128,
}

#[derive(Clone, Debug)]
pub struct BasisGenReport {
    pub lvf: LinearValueFunction,
    pub solve: SolveReport,
    pub iterations: Vec<GenIter>,
    pub ledger: DiscardLedger,
    pub solver_calls: usize,
}

impl BasisGenReport {
    /// `iter,num_basis,num_discarded,solver_objective,wall_ms`.
    pub fn csv(&self) -> String {
        let mut s = String::from("iter,num_basis,num_discarded,solver_objective,wall_ms\n");
        for g in &self.iterations {
            let _ = writeln!(
                s,
                "{},{},{},{:.9},{}",
                g.iter, g.num_basis, g.num_discarded, g.solver_objective, g.wall_ms
            );
        }
        s
    }
}

/// A solver failure together with the basis built so far.
#[derive(Debug)]
pub struct BasisGenFailure {
    pub error: Error,
    pub partial: LinearValueFunction,
    pub iterations: Vec<GenIter>,
}

impl fmt::Display for BasisGenFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} bases)", self.error, self.partial.len())
    }
}

/// The constant basis and one indicator per positive reward partition.
/// Indicators are certified orthogonal when disjoint from every earlier
/// certified indicator.
pub fn seed_basis(model: &FomdpModel, tau: f64) -> LinearValueFunction {
    let r = &model.reasoner;
    let mut bases = vec![Basis::new(Case::constant(1.0))];
    let mut seen: Vec<Formula> = vec![Formula::True];
    for c in model.all_reward_components() {
        for p in &c.partitions {
            if p.value <= tau.max(0.0) || seen.iter().any(|s| formula_key(s) == formula_key(&p.formula)) {
                continue;
            }
            seen.push(p.formula.clone());
            bases.push(certify(Basis::new(Case::indicator(&p.formula, r)), &bases, model));
        }
    }
    LinearValueFunction::new(bases)
}

fn certify(mut b: Basis, others: &[Basis], model: &FomdpModel) -> Basis {
    let Some(f) = b.indicator_formula() else {
        return b;
    };
    let ok = b.case.len() == 2
        && others
            .iter()
            .filter(|o| o.orthogonal)
            .filter_map(|o| o.indicator_formula())
            .all(|g| model.reasoner.disjoint(f, g));
    b.orthogonal = ok;
    b
}

/// The generation loop: solve, discard small weights, regress the retained
/// positive partitions, and repeat until nothing new appears or the
/// iteration limit is reached.
pub fn generate_basis(model: &FomdpModel, cfg: &BasisGenConfig) -> std::result::Result<BasisGenReport, Box<BasisGenFailure>> {
    let start = Instant::now();
    let ms = || if cfg.solve.folp.timing { start.elapsed().as_millis() } else { 0 };
    let discard = cfg.discard.unwrap_or(cfg.tau);
    let r = &model.reasoner;
    let mut lvf = seed_basis(model, cfg.tau);
    let mut ledger = DiscardLedger::default();
    let mut iterations = Vec::new();
    let mut calls = 0;
    let fail = |error: Error, partial: &LinearValueFunction, iterations: &Vec<GenIter>| {
        Box::new(BasisGenFailure {
            error,
            partial: partial.clone(),
            iterations: iterations.clone(),
        })
    };
    loop {
        calls += 1;
        let solved = match cfg.solver {
            SolverKind::Foalp => foalp_solve(model, &lvf, &cfg.solve),
            SolverKind::Foapi => foapi_solve(model, &lvf, cfg.foapi_iters, &cfg.solve),
        };
        let report = solved.map_err(|e| fail(e, &lvf, &iterations))?;
        lvf.weights = report.final_weights().to_vec();

        // Keep the constant basis; drop indicators with small weights.
        let mut kept = Vec::new();
        let mut num_discarded = 0;
        for (i, (b, w)) in lvf.bases.iter().zip(&lvf.weights).enumerate() {
            if i > 0 && w.abs() < discard {
                for p in b.case.partitions.iter().filter(|p| p.value > 0.0) {
                    ledger.insert(&p.formula);
                }
                num_discarded += 1;
            } else {
                kept.push((b.clone(), *w));
            }
        }
        lvf = LinearValueFunction {
            weights: kept.iter().map(|k| k.1).collect(),
            bases: kept.into_iter().map(|k| k.0).collect(),
        };
        iterations.push(GenIter {
            iter: calls,
            num_basis: lvf.len(),
            num_discarded,
            solver_objective: report.objective,
            wall_ms: ms(),
        });
        if calls >= cfg.max_iters.max(1) {
            return Ok(BasisGenReport {
                lvf,
                solve: report,
                iterations,
                ledger,
                solver_calls: calls,
            });
        }

        let cands = candidate_regressions(&lvf, model, &ledger, cfg.max_size).map_err(|e| fail(e, &lvf, &iterations))?;
        let mut added = 0;
        for c in cands {
            // Exclude every certified positive formula, then verify.
            let mut parts = vec![c.clone()];
            parts.extend(
                lvf.bases
                    .iter()
                    .filter(|b| b.orthogonal)
                    .filter_map(|b| b.indicator_formula().cloned())
                    .map(Formula::negate),
            );
            let f = r.simplify(&normalize(&Formula::and(parts)));
            if f.size() > cfg.max_size
                || !r.consistent(&f)
                || ledger.contains(&f)
                || lvf.bases.iter().any(|b| b.indicator_formula().is_some_and(|g| r.equivalent(g, &f)))
            {
                ledger.insert(&c);
                continue;
            }
            let b = certify(Basis::new(Case::indicator(&f, r)), &lvf.bases, model);
            if !b.orthogonal {
                ledger.insert(&c);
                continue;
            }
            lvf.bases.push(b);
            lvf.weights.push(0.0);
            added += 1;
        }
        if added == 0 {
            return Ok(BasisGenReport {
                lvf,
                solve: report,
                iterations,
                ledger,
                solver_calls: calls,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fomdp::parse_domain;
    use crate::logic::parse_formula;

    const FLIP: &str = include_str!("../fixtures/flip.domain");

    #[test]
    fn flip_candidate_is_not_p() {
        let model = parse_domain(FLIP).unwrap();
        let lvf = seed_basis(&model, 0.01);
        assert_eq!(lvf.len(), 2);
        let c = candidate_regressions(&lvf, &model, &DiscardLedger::default(), DEFAULT_MAX_SIZE).unwrap();
        assert_eq!(c.len(), 1);
        assert!(model.reasoner.equivalent(&c[0], &parse_formula("!P").unwrap()));
    }

    #[test]
    fn ledger_filters() {
        let model = parse_domain(FLIP).unwrap();
        let lvf = seed_basis(&model, 0.01);
        let mut ledger = DiscardLedger::default();
        ledger.insert(&parse_formula("!P").unwrap());
        assert!(candidate_regressions(&lvf, &model, &ledger, DEFAULT_MAX_SIZE).unwrap().is_empty());
    }

    #[test]
    fn single_iteration_is_seed_only() {
        let model = parse_domain(FLIP).unwrap();
        let cfg = BasisGenConfig {
            max_iters: 1,
            ..Default::default()
        };
        let rep = generate_basis(&model, &cfg).unwrap();
        assert_eq!(rep.solver_calls, 1);
        assert_eq!(rep.lvf.len(), 2);
    }
}
