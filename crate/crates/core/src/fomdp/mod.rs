//! First-order MDP model, decision-theoretic regression and backups.

mod domain;

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::cases::{add, combine, exists_case, max_case, regress_case, ActionTag, Case, CaseOp};
use crate::error::{Error, Result};
use crate::logic::{normalize, sym, Formula, GroundState, Reasoner, Sym, Term, Universe, Var};
use crate::sitcalc::{ActionTerm, ActionTheory};

pub use domain::{parse_domain, parse_domain_with, parse_instance, Instance};

pub const NOOP: &str = "noop";

/// A nature's choice of a stochastic action with its probability case.
#[derive(Clone, Debug)]
pub struct Choice {
    pub name: Sym,
    pub prob: Case,
}

#[derive(Clone, Debug)]
pub struct ActionTemplate {
    pub name: Sym,
    pub params: Vec<Var>,
    pub choices: Vec<Choice>,
}

impl ActionTemplate {
    pub fn choice_term(&self, c: &Choice) -> ActionTerm {
        ActionTerm {
            name: c.name.clone(),
            args: self.params.iter().cloned().map(Term::Var).collect(),
        }
    }

    pub fn is_noop(&self) -> bool {
        &*self.name == NOOP
    }
}

/// A reward `forall y. G(y)`, paid `noop_value` under noop and `value`
/// under any other action.
#[derive(Clone, Debug)]
pub struct UniversalReward {
    pub vars: Vec<Var>,
    pub body: Formula,
    pub value: f64,
    pub noop_value: f64,
}

impl UniversalReward {
    pub fn formula(&self) -> Formula {
        Formula::forall(self.vars.clone(), self.body.clone())
    }
}

#[derive(Clone, Debug)]
pub struct FomdpModel {
    pub name: String,
    pub theory: ActionTheory,
    /// Sorted by name; includes the implicit noop.
    pub templates: Vec<ActionTemplate>,
    /// Additive reward components per template.
    pub rewards: BTreeMap<Sym, Vec<Case>>,
    pub universal: Option<UniversalReward>,
    pub discount: f64,
    pub reasoner: Reasoner,
}

impl FomdpModel {
    pub fn template(&self, name: &str) -> Option<&ActionTemplate> {
        self.templates.iter().find(|t| &*t.name == name)
    }

    /// Reward components for one template.
    pub fn reward_components(&self, template: &str) -> Vec<Case> {
        let mut out = self.rewards.get(template).cloned().unwrap_or_default();
        if let Some(u) = &self.universal {
            let v = if template == NOOP { u.noop_value } else { u.value };
            out.push(Case::from_pairs(
                vec![(u.formula(), v), (u.formula().negate(), 0.0)],
                &self.reasoner,
            ));
        }
        out
    }

    /// rCase(s, A) as a single case.
    pub fn reward_case(&self, template: &str) -> Case {
        let r = &self.reasoner;
        self.reward_components(template)
            .iter()
            .fold(Case::constant(0.0), |acc, c| add(&acc, c, r))
    }

    /// Every distinct reward component across templates.
    pub fn all_reward_components(&self) -> Vec<Case> {
        let mut out: Vec<Case> = Vec::new();
        for t in &self.templates {
            for c in self.reward_components(&t.name) {
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        }
        out
    }

    pub fn with_discount(mut self, g: f64) -> FomdpModel {
        self.discount = g;
        self
    }

    /// Structural checks: axioms for every fluent, probabilities in range
    /// and summing to one per template.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::Model(format!("discount {} outside [0,1)", self.discount)));
        }
        for f in self.theory.signature.fluents() {
            if !self.theory.ssas.contains_key(&f.name) {
                return Err(Error::MissingSsa(f.name.to_string()));
            }
        }
        for t in &self.templates {
            check_probabilities(t, &self.reasoner)?;
        }
        Ok(())
    }
}

fn check_probabilities(t: &ActionTemplate, r: &Reasoner) -> Result<()> {
    let mut total = Case::constant(0.0);
    for c in &t.choices {
        for p in &c.prob.partitions {
            if !(-1e-12..=1.0 + 1e-12).contains(&p.value) {
                return Err(Error::Probability(format!(
                    "{}: probability {} of `{}` outside [0,1]",
                    t.name, p.value, c.name
                )));
            }
        }
        total = add(&total, &c.prob, r);
    }
    for p in &total.partitions {
        if (p.value - 1.0).abs() > 1e-9 {
            return Err(Error::Probability(format!(
                "{}: choice probabilities sum to {} where {}",
                t.name, p.value, p.formula
            )));
        }
    }
    Ok(())
}

/// γ · ⊕_j (pCase_j ⊗ Regr(v, n_j(x))).
pub fn fodtr(v: &Case, t: &ActionTemplate, model: &FomdpModel) -> Result<Case> {
    let r = &model.reasoner;
    let parts: Vec<Case> = t
        .choices
        .par_iter()
        .map(|c| {
            let reg = regress_case(v, &t.choice_term(c), &model.theory, r)?;
            Ok(combine(CaseOp::Mul, &c.prob, &reg, r))
        })
        .collect::<Result<_>>()?;
    let mut acc = match parts.first() {
        Some(p) => p.clone(),
        None => return Ok(Case::constant(0.0)),
    };
    for p in &parts[1..] {
        acc = add(&acc, p, r);
    }
    Ok(acc.scale(model.discount))
}

fn tag_for(t: &ActionTemplate, body: &Formula) -> ActionTag {
    ActionTag {
        template: t.name.clone(),
        params: t.params.clone(),
        body: body.clone(),
    }
}

fn tag_partitions(c: Case, t: &ActionTemplate) -> Case {
    let mut c = c;
    for p in &mut c.partitions {
        p.tag = Some(tag_for(t, &p.formula));
    }
    c
}

/// B^{A(x)}: reward plus FODTR, free in the template parameters.
pub fn backup_param(v: &Case, t: &ActionTemplate, model: &FomdpModel) -> Result<Case> {
    let f = fodtr(v, t, model)?;
    Ok(tag_partitions(add(&model.reward_case(&t.name), &f, &model.reasoner), t))
}

/// B^A: existential closure over the template parameters. Each partition
/// keeps its open body in the tag.
pub fn backup_exists(v: &Case, t: &ActionTemplate, model: &FomdpModel) -> Result<Case> {
    let bp = backup_param(v, t, model)?;
    Ok(exists_case(&t.params, &bp, &model.reasoner))
}

/// B^A_max.
pub fn backup_max(v: &Case, t: &ActionTemplate, model: &FomdpModel) -> Result<Case> {
    Ok(max_case(&backup_exists(v, t, model)?, &model.reasoner))
}

/// A basis case and whether it carries the orthogonality certificate.
#[derive(Clone, Debug)]
pub struct Basis {
    pub case: Case,
    /// `{φ : 1 ; ¬φ : 0}` with φ disjoint from every other certified φ.
    pub orthogonal: bool,
}

impl Basis {
    pub fn new(case: Case) -> Basis {
        Basis {
            case,
            orthogonal: false,
        }
    }

    /// Positive formula of an indicator basis.
    pub fn indicator_formula(&self) -> Option<&Formula> {
        match self.case.partitions.as_slice() {
            [p, q] if p.value == 1.0 && q.value == 0.0 => Some(&p.formula),
            [p] if p.value == 1.0 => Some(&p.formula),
            _ => None,
        }
    }
}

/// Σ w_i bCase_i.
#[derive(Clone, Debug, Default)]
pub struct LinearValueFunction {
    pub weights: Vec<f64>,
    pub bases: Vec<Basis>,
}

impl LinearValueFunction {
    pub fn new(bases: Vec<Basis>) -> LinearValueFunction {
        LinearValueFunction {
            weights: vec![0.0; bases.len()],
            bases,
        }
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn flatten(&self, r: &Reasoner) -> Case {
        self.weights
            .iter()
            .zip(&self.bases)
            .fold(Case::constant(0.0), |acc, (w, b)| add(&acc, &b.case.scale(*w), r))
    }

    /// Ground value: Σ w_i eval(bCase_i, s).
    pub fn eval(&self, s: &GroundState) -> Result<f64> {
        let mut v = 0.0;
        for (w, b) in self.weights.iter().zip(&self.bases) {
            v += w * crate::cases::eval_case(&b.case, s)?;
        }
        Ok(v)
    }

    /// `w<TAB>formula` per basis, positive partition first.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (w, b) in self.weights.iter().zip(&self.bases) {
            let f = b
                .indicator_formula()
                .map(|f| f.to_string())
                .unwrap_or_else(|| b.case.to_string());
            out.push_str(&format!("{w}\t{f}\n"));
        }
        out
    }
}

/// B^{A(x)} of a linear value function, kept per basis.
#[derive(Clone, Debug)]
pub struct BackedUpLinear {
    pub template: Sym,
    pub params: Vec<Var>,
    pub reward: Case,
    pub fodtrs: Vec<Case>,
}

pub fn backup_linear(lvf: &LinearValueFunction, t: &ActionTemplate, model: &FomdpModel) -> Result<BackedUpLinear> {
    let fodtrs = lvf
        .bases
        .par_iter()
        .map(|b| fodtr(&b.case, t, model))
        .collect::<Result<Vec<_>>>()?;
    Ok(BackedUpLinear {
        template: t.name.clone(),
        params: t.params.clone(),
        reward: model.reward_case(&t.name),
        fodtrs,
    })
}

impl BackedUpLinear {
    /// rCase ⊕ (⊕_i w_i FODTR_i), tagged by template.
    pub fn flatten(&self, weights: &[f64], model: &FomdpModel) -> Case {
        let r = &model.reasoner;
        let mut acc = self.reward.clone();
        for (w, f) in weights.iter().zip(&self.fodtrs) {
            acc = add(&acc, &f.scale(*w), r);
        }
        let t = model.template(&self.template).expect("template of backup");
        tag_partitions(acc, t)
    }

    /// B^A of the flattened backup.
    pub fn flatten_exists(&self, weights: &[f64], model: &FomdpModel) -> Case {
        exists_case(&self.params, &self.flatten(weights, model), &model.reasoner)
    }
}

/// Ground universe from a list of `(type, objects)`.
pub fn universe(objects: &[(&str, &[&str])]) -> Universe {
    let mut u = Universe::new();
    for (ty, objs) in objects {
        let mut v: Vec<Sym> = objs.iter().map(|o| sym(o)).collect();
        v.sort();
        u.insert(sym(ty), v);
    }
    u
}

/// Formula key used to deduplicate bases.
pub fn formula_key(f: &Formula) -> Formula {
    normalize(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::Partition;

    const FLIP: &str = "domain flip
predicates: P
action flip()
  choice flipS prob { true : 0.8 }
  choice flipF prob { true : 0.2 }
end
ssa P <=> a = flipS | (P & a != flipS)
reward any { P : 10 ; !P : 0 }
discount 0.9
";

    fn flip() -> FomdpModel {
        parse_domain(FLIP).unwrap()
    }

    #[test]
    fn fodtr_of_indicator() {
        let m = flip();
        let v = Case::indicator(&Formula::prop("P"), &m.reasoner);
        let f = fodtr(&v, m.template("flip").unwrap(), &m).unwrap();
        assert_eq!(f.len(), 2);
        let get = |g: &Formula| f.partitions.iter().find(|p| &p.formula == g).unwrap().value;
        assert!((get(&Formula::prop("P")) - 0.9).abs() < 1e-12);
        assert!((get(&Formula::prop("P").negate()) - 0.72).abs() < 1e-12);
    }

    #[test]
    fn backup_param_adds_reward() {
        let m = flip();
        let v = Case::indicator(&Formula::prop("P"), &m.reasoner);
        let b = backup_param(&v, m.template("flip").unwrap(), &m).unwrap();
        let vals: Vec<(String, f64)> = b
            .partitions
            .iter()
            .map(|Partition { formula, value, .. }| (formula.to_string(), *value))
            .collect();
        assert_eq!(vals.len(), 2);
        assert!(vals.iter().any(|(f, v)| f == "P" && (v - 10.9).abs() < 1e-12));
        assert!(vals.iter().any(|(f, v)| f == "!P" && (v - 0.72).abs() < 1e-12));
    }

    #[test]
    fn zero_value_and_zero_discount() {
        let m = flip();
        let t = m.template("flip").unwrap();
        let z = fodtr(&Case::constant(0.0), t, &m).unwrap();
        assert_eq!(z.values(), vec![0.0]);
        let m0 = flip().with_discount(0.0);
        let v = Case::indicator(&Formula::prop("P"), &m0.reasoner);
        assert!(fodtr(&v, t, &m0).unwrap().values().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn noop_is_implicit() {
        let m = flip();
        let names: Vec<&str> = m.templates.iter().map(|t| &*t.name).collect();
        assert_eq!(names, vec!["flip", "noop"]);
        m.validate().unwrap();
    }
}
