//! FOALP and FOAPI over linear value functions, greedy policy extraction
//! and the API loss bound.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::cases::{least_binding, max_case, satisfied, union_case, Case, Partition};
use crate::error::{Error, Result};
use crate::folp::{
    solve_first_order_lp, Affine, Coeff, FirstOrderLP, FolpConfig, IterStat, Schema, Term,
};
use crate::fomdp::{backup_linear, BackedUpLinear, FomdpModel, LinearValueFunction};
use crate::logic::{Formula, GroundAction, GroundState};

/// Which form of the backup the FOALP constraints use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BackupForm {
    /// Free action parameters; the search maximizes over them implicitly.
    #[default]
    Param,
    /// Explicit ∃-closure and max at the current weights.
    Max,
}

#[derive(Clone, Debug, Default)]
pub struct SolverConfig {
    pub folp: FolpConfig,
    pub form: BackupForm,
}

/// Σ_j t_j / |bCase_i| per basis, over retained partitions.
pub fn objective_coeffs(lvf: &LinearValueFunction) -> Vec<f64> {
    lvf.bases
        .iter()
        .map(|b| {
            let n = b.case.len().max(1) as f64;
            b.case.partitions.iter().map(|p| p.value).sum::<f64>() / n
        })
        .collect()
}

fn basis_names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("w{i}")).collect()
}

fn value_terms(lvf: &LinearValueFunction, sign: f64) -> Vec<Term> {
    lvf.bases
        .iter()
        .enumerate()
        .map(|(i, b)| Term {
            case: b.case.clone(),
            coeff: Coeff::Var { index: i, scale: sign },
            orthogonal: b.orthogonal,
        })
        .collect()
}

fn backup_terms(model: &FomdpModel, bl: &BackedUpLinear, sign: f64) -> Vec<Term> {
    let mut terms: Vec<Term> = model
        .reward_components(&bl.template)
        .into_iter()
        .map(|c| Term::new(c, Coeff::Const(sign)))
        .collect();
    for (i, f) in bl.fodtrs.iter().enumerate() {
        terms.push(Term::new(f.clone(), Coeff::Var { index: i, scale: sign }));
    }
    terms
}

/// The first-order ALP: one schema per template, `0 ≥ backup ⊖ value`.
pub fn foalp_program(model: &FomdpModel, lvf: &LinearValueFunction, form: BackupForm) -> Result<FirstOrderLP> {
    let k = lvf.len();
    let backups = model
        .templates
        .par_iter()
        .map(|t| backup_linear(lvf, t, model))
        .collect::<Result<Vec<_>>>()?;
    let schemas = backups
        .iter()
        .map(|bl| {
            let id = bl.template.to_string();
            match form {
                BackupForm::Param => {
                    let mut terms = backup_terms(model, bl, 1.0);
                    terms.extend(value_terms(lvf, -1.0));
                    Schema::Sum {
                        id,
                        terms,
                        offset: Affine::zero(k),
                    }
                }
                BackupForm::Max => Schema::MaxBackup {
                    id,
                    backup: backup_terms(model, bl, 1.0),
                    params: bl.params.clone(),
                    rest: value_terms(lvf, -1.0),
                    offset: Affine::zero(k),
                },
            }
        })
        .collect();
    Ok(FirstOrderLP {
        names: basis_names(k),
        objective: objective_coeffs(lvf),
        schemas,
    })
}

#[derive(Clone, Debug, Default)]
pub struct SolveReport {
    pub weights: Vec<Vec<f64>>,
    /// FOAPI objective per iteration; empty for FOALP.
    pub phis: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub loss_bound: Option<f64>,
    pub stats: Vec<IterStat>,
    pub wall_ms: Vec<u128>,
}

impl SolveReport {
    pub fn final_weights(&self) -> &[f64] {
        self.weights.last().map(|w| w.as_slice()).unwrap_or(&[])
    }

    /// `iter,phi,converged,wall_ms`.
    pub fn csv(&self) -> String {
        let mut s = String::from("iter,phi,converged,wall_ms\n");
        let n = self.weights.len();
        for i in 0..n {
            let phi = self.phis.get(i).copied().unwrap_or(self.objective);
            let conv = self.converged && i + 1 == n;
            let ms = self.wall_ms.get(i).copied().unwrap_or(0);
            let _ = writeln!(s, "{},{:.9},{},{}", i + 1, phi, conv, ms);
        }
        s
    }
}

/// FOALP weights for the bases of `lvf`.
pub fn foalp_solve(model: &FomdpModel, lvf: &LinearValueFunction, cfg: &SolverConfig) -> Result<SolveReport> {
    let start = Instant::now();
    let lp = foalp_program(model, lvf, cfg.form)?;
    let sol = solve_first_order_lp(&lp, &cfg.folp, &model.reasoner)?;
    Ok(SolveReport {
        weights: vec![sol.weights],
        phis: Vec::new(),
        objective: sol.objective,
        converged: true,
        loss_bound: None,
        stats: sol.stats,
        wall_ms: vec![if cfg.folp.timing { start.elapsed().as_millis() } else { 0 }],
    })
}

/// A max-case whose partitions are tagged with the action that attains them.
#[derive(Clone, Debug)]
pub struct PolicyCase {
    pub case: Case,
}

impl PolicyCase {
    /// The partition holding in `s`, its action with the least satisfying
    /// binding, and the value.
    pub fn action_at(&self, s: &GroundState) -> Result<Option<(GroundAction, f64, usize)>> {
        let Some(&i) = satisfied(&self.case, s)?.first() else {
            return Ok(None);
        };
        let p = &self.case.partitions[i];
        let tag = p
            .tag
            .as_ref()
            .ok_or_else(|| Error::Model(format!("untagged policy partition {}", p.formula)))?;
        let b = least_binding(tag, s)?.ok_or_else(|| {
            Error::PartitionViolation(format!("no binding for {} at {s}", tag.template))
        })?;
        let args = tag.params.iter().map(|v| b[v].clone()).collect();
        Ok(Some((
            GroundAction {
                name: tag.template.clone(),
                args,
            },
            p.value,
            i,
        )))
    }

    /// Normalized key compared across FOAPI iterations.
    pub fn key(&self) -> Vec<(String, Option<crate::logic::Sym>, i64)> {
        self.case.canonical_key()
    }
}

/// Per-template B^A of the value function, tagged and flattened.
pub fn template_backups(model: &FomdpModel, lvf: &LinearValueFunction) -> Result<Vec<Case>> {
    model
        .templates
        .par_iter()
        .map(|t| Ok(backup_linear(lvf, t, model)?.flatten_exists(&lvf.weights, model)))
        .collect()
}

/// max(∪_A B^A(vCase)).
pub fn extract_policy(model: &FomdpModel, lvf: &LinearValueFunction) -> Result<PolicyCase> {
    let u = template_backups(model, lvf)?
        .iter()
        .fold(Case::empty(), |acc, c| union_case(&acc, c));
    Ok(PolicyCase {
        case: max_case(&u, &model.reasoner),
    })
}

/// Partitions of the policy tagged with template `a`.
pub fn restrict_policy(p: &PolicyCase, a: &str) -> Case {
    let partitions: Vec<Partition> = p
        .case
        .partitions
        .iter()
        .filter(|q| q.tag.as_ref().is_some_and(|t| &*t.template == a))
        .cloned()
        .collect();
    Case {
        partitioned: p.case.partitioned && partitions.len() == p.case.len(),
        partitions,
    }
}

/// Bellman-error LP for a fixed policy: variables are the basis weights
/// and φ (last). For each template and both signs, the schema is
/// `±(R + Σ_j w_j (FODTR_j - bCase_j)) - φ ≤ 0` over the policy partitions
/// restricted to that template, each paired with its action body.
pub fn foapi_program(model: &FomdpModel, lvf: &LinearValueFunction, policy: &PolicyCase) -> Result<FirstOrderLP> {
    let k = lvf.len();
    let n = k + 1;
    let mut schemas = Vec::new();
    for t in &model.templates {
        let restricted = restrict_policy(policy, &t.name);
        if restricted.is_empty() {
            continue;
        }
        let region = Case {
            partitions: restricted
                .partitions
                .iter()
                .map(|p| {
                    let body = p.tag.as_ref().map_or(Formula::True, |t| t.body.clone());
                    Partition::new(
                        model.reasoner.simplify(&Formula::and(vec![p.formula.clone(), body])),
                        0.0,
                    )
                })
                .collect(),
            partitioned: false,
        };
        let bl = backup_linear(lvf, t, model)?;
        for (sign, tag) in [(1.0, "pos"), (-1.0, "neg")] {
            let mut terms = vec![Term::new(region.clone(), Coeff::Const(1.0))];
            terms.extend(backup_terms(model, &bl, sign));
            terms.extend(value_terms(lvf, -sign));
            terms.push(Term::new(Case::constant(1.0), Coeff::Var { index: k, scale: -1.0 }));
            schemas.push(Schema::Sum {
                id: format!("{}:{tag}", t.name),
                terms,
                offset: Affine::zero(n),
            });
        }
    }
    // φ ≥ 0
    schemas.push(Schema::Sum {
        id: "phi".into(),
        terms: vec![Term::new(Case::constant(1.0), Coeff::Var { index: k, scale: -1.0 })],
        offset: Affine::zero(n),
    });
    let mut names = basis_names(k);
    names.push("phi".into());
    let mut objective = vec![0.0; n];
    objective[k] = 1.0;
    Ok(FirstOrderLP {
        names,
        objective,
        schemas,
    })
}

/// Approximate policy iteration from zero weights.
pub fn foapi_solve(
    model: &FomdpModel,
    lvf: &LinearValueFunction,
    max_iters: usize,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    if max_iters == 0 {
        return Err(Error::Model("FOAPI needs at least one iteration".into()));
    }
    let start = Instant::now();
    let k = lvf.len();
    let mut cur = lvf.clone();
    cur.weights = vec![0.0; k];
    let mut policy = extract_policy(model, &cur)?;
    let mut report = SolveReport::default();
    for _ in 0..max_iters {
        let lp = foapi_program(model, &cur, &policy)?;
        let sol = solve_first_order_lp(&lp, &cfg.folp, &model.reasoner)?;
        let phi = sol.weights[k].max(0.0);
        cur.weights = sol.weights[..k].to_vec();
        report.weights.push(cur.weights.clone());
        report.phis.push(phi);
        report.objective = phi;
        report.stats.extend(sol.stats);
        report
            .wall_ms
            .push(if cfg.folp.timing { start.elapsed().as_millis() } else { 0 });
        let next = extract_policy(model, &cur)?;
        if next.key() == policy.key() {
            report.converged = true;
            report.loss_bound = Some(loss_bound(phi, model.discount)?);
            break;
        }
        policy = next;
    }
    Ok(report)
}

/// 2γφ / (1 - γ), rounded to 15 significant digits so decimal inputs give
/// decimal results (`(1, 0.9)` is 18, not 18.000000000000004).
pub fn loss_bound(phi: f64, gamma: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Model(format!("discount {gamma} outside [0,1)")));
    }
    if phi < 0.0 {
        return Err(Error::Model(format!("negative Bellman error {phi}")));
    }
    let v = 2.0 * gamma * phi / (1.0 - gamma);
    Ok(format!("{v:.14e}").parse().unwrap_or(v))
}
