//! Decomposition of a universally quantified reward into one generic
//! ground goal, with Q-functions re-targeted per goal and summed online.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::cases::{exists_case, Case, Partition};
use crate::error::{Error, Result};
use crate::fomdp::{backup_linear, FomdpModel, LinearValueFunction};
use crate::logic::{
    eval_in_state, satisfying_bindings, sym, Binding, Formula, GroundAction, GroundState, Sym, Term, Var,
};
use crate::oracle::TIE_TOL;

/// The goal `G(y*)` over fresh constants, one per quantified variable.
#[derive(Clone, Debug, PartialEq)]
pub struct GenericGoal {
    pub vars: Vec<Var>,
    /// `star_<var>` constants, typed like their variables.
    pub constants: Vec<Term>,
    /// Goal body with the variables replaced by the constants.
    pub body: Formula,
}

impl GenericGoal {
    /// The goal body for one ground binding of the quantified variables.
    pub fn instance(&self, objects: &[Sym]) -> Formula {
        self.body.replace_constants(&self.constant_map(objects))
    }

    fn constant_map(&self, objects: &[Sym]) -> BTreeMap<Sym, Term> {
        self.constants
            .iter()
            .zip(objects)
            .filter_map(|(c, o)| match c {
                Term::Const { name, ty } => Some((
                    name.clone(),
                    Term::Const {
                        name: o.clone(),
                        ty: ty.clone(),
                    },
                )),
                Term::Var(_) => None,
            })
            .collect()
    }
}

/// Replaces the universal reward by `{G(y*) : r ; ¬G(y*) : 0}`, keeping the
/// noop discrimination.
pub fn make_generic_goal(model: &FomdpModel) -> Result<(FomdpModel, GenericGoal)> {
    let u = model
        .universal
        .as_ref()
        .ok_or_else(|| Error::Model("reward has no universal goal to decompose".into()))?;
    if u.vars.is_empty() {
        return Err(Error::Model("universal goal binds no variables".into()));
    }
    let mut out = model.clone();
    let mut map = BTreeMap::new();
    let mut constants = Vec::new();
    for v in &u.vars {
        let name = format!("star_{}", v.name);
        out.theory.signature.add_constant(&name, &v.ty);
        let c = Term::constant(&name, &v.ty);
        map.insert(v.clone(), c.clone());
        constants.push(c);
    }
    let body = u.body.substitute(&map);
    let r = &out.reasoner;
    for t in &model.templates {
        let v = if t.is_noop() { u.noop_value } else { u.value };
        let c = Case::from_pairs(vec![(body.clone(), v), (body.clone().negate(), 0.0)], r);
        out.rewards.entry(t.name.clone()).or_default().push(c);
    }
    out.universal = None;
    Ok((
        out,
        GenericGoal {
            vars: u.vars.clone(),
            constants,
            body,
        },
    ))
}

/// B^A of the value function for one template, partitions sorted by value
/// (largest first) and tagged with their open bodies.
#[derive(Clone, Debug)]
pub struct GenericQ {
    pub template: Sym,
    pub params: Vec<Var>,
    pub case: Case,
}

#[derive(Clone, Debug)]
pub struct GenericQSet {
    pub goal: GenericGoal,
    pub qs: Vec<GenericQ>,
}

pub fn build_generic_q(model: &FomdpModel, lvf: &LinearValueFunction, goal: &GenericGoal) -> Result<GenericQSet> {
    let mut qs = Vec::with_capacity(model.templates.len());
    for t in &model.templates {
        let flat = backup_linear(lvf, t, model)?.flatten(&lvf.weights, model);
        let mut case = exists_case(&t.params, &flat, &model.reasoner);
        case.partitions
            .sort_by(|a, b| b.value.partial_cmp(&a.value).unwrap_or(std::cmp::Ordering::Equal));
        qs.push(GenericQ {
            template: t.name.clone(),
            params: t.params.clone(),
            case,
        });
    }
    Ok(GenericQSet {
        goal: goal.clone(),
        qs,
    })
}

/// Replaces the generic constants with `objects` in every Q-function.
/// Objects must belong to the universe of `s` under the variable's type.
pub fn substitute_goal(q: &GenericQSet, objects: &[Sym], s: &GroundState) -> Result<GenericQSet> {
    let goal = &q.goal;
    if objects.len() != goal.vars.len() {
        return Err(Error::Arity {
            name: "goal".into(),
            expected: goal.vars.len(),
            found: objects.len(),
        });
    }
    for (v, o) in goal.vars.iter().zip(objects) {
        if !s.objects(&v.ty).contains(o) {
            return Err(Error::TypeMismatch(format!("{o} is not an object of type {}", v.ty)));
        }
    }
    let map = goal.constant_map(objects);
    let qs = q
        .qs
        .iter()
        .map(|g| GenericQ {
            template: g.template.clone(),
            params: g.params.clone(),
            case: Case {
                partitions: g
                    .case
                    .partitions
                    .iter()
                    .map(|p| Partition {
                        formula: p.formula.replace_constants(&map),
                        value: p.value,
                        tag: p.tag.clone().map(|mut t| {
                            t.body = t.body.replace_constants(&map);
                            t
                        }),
                    })
                    .collect(),
                partitioned: g.case.partitioned,
            },
        })
        .collect();
    Ok(GenericQSet {
        goal: GenericGoal {
            vars: goal.vars.clone(),
            constants: objects
                .iter()
                .zip(&goal.constants)
                .map(|(o, c)| match c {
                    Term::Const { ty, .. } => Term::Const {
                        name: o.clone(),
                        ty: ty.clone(),
                    },
                    other => other.clone(),
                })
                .collect(),
            body: goal.body.replace_constants(&map),
        },
        qs,
    })
}

/// Q-value of every ground action at `s`: for each template the value of
/// the best partition whose body a binding satisfies.
pub fn q_values(q: &GenericQSet, s: &GroundState) -> Result<BTreeMap<GroundAction, f64>> {
    let mut out = BTreeMap::new();
    for g in &q.qs {
        let mut done: BTreeSet<Vec<Sym>> = BTreeSet::new();
        for p in &g.case.partitions {
            let body = p.tag.as_ref().map_or(&p.formula, |t| &t.body);
            for b in satisfying_bindings(body, s, &Binding::new(), &g.params)? {
                let args: Vec<Sym> = g.params.iter().map(|v| b[v].clone()).collect();
                if done.insert(args.clone()) {
                    out.insert(
                        GroundAction {
                            name: g.template.clone(),
                            args,
                        },
                        p.value,
                    );
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct Selection {
    pub action: GroundAction,
    pub score: f64,
    /// Every scored ground action, in lexicographic order.
    pub scores: Vec<(GroundAction, f64)>,
    /// Goals that were still unsatisfied and took part in the sum.
    pub active_goals: Vec<Vec<Sym>>,
}

impl Selection {
    /// `action,score`.
    pub fn csv(&self) -> String {
        let mut out = String::from("action,score\n");
        for (a, v) in &self.scores {
            let _ = writeln!(out, "\"{a}\",{v:.9}");
        }
        out
    }
}

/// Whether goal `objects` holds in `s`.
pub fn goal_satisfied(goal: &GenericGoal, objects: &[Sym], s: &GroundState) -> Result<bool> {
    eval_in_state(&goal.instance(objects), s, &Binding::new())
}

/// Scores each ground action by the mean of its per-goal Q-values over the
/// unsatisfied goals and returns the best (lexicographically least on ties).
/// When every goal already holds, all goals are scored.
pub fn select_action(q: &GenericQSet, goals: &[Vec<Sym>], s: &GroundState) -> Result<Selection> {
    if goals.is_empty() {
        return Err(Error::Model("no goals to decompose".into()));
    }
    let mut active = Vec::new();
    for g in goals {
        if !goal_satisfied(&q.goal, g, s)? {
            active.push(g.clone());
        }
    }
    if active.is_empty() {
        active = goals.to_vec();
    }
    let n = active.len() as f64;
    let mut scores: BTreeMap<GroundAction, f64> = BTreeMap::new();
    for g in &active {
        let qj = substitute_goal(q, g, s)?;
        for (a, v) in q_values(&qj, s)? {
            *scores.entry(a).or_insert(0.0) += v / n;
        }
    }
    let best = scores.values().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (action, score) = scores
        .iter()
        .find(|(_, v)| **v >= best - TIE_TOL)
        .map(|(a, v)| (a.clone(), *v))
        .ok_or(Error::NoAction)?;
    Ok(Selection {
        action,
        score,
        scores: scores.into_iter().collect(),
        active_goals: active,
    })
}

/// Generic constant name for a goal variable.
pub fn star_name(v: &Var) -> Sym {
    sym(&format!("star_{}", v.name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fomdp::{parse_domain, parse_instance};

    const BOX: &str = include_str!("../fixtures/boxworld-mini.domain");
    const BOX_INST: &str = include_str!("../fixtures/boxworld-mini.instance");

    #[test]
    fn generic_goal_has_one_constant_per_variable() {
        let model = parse_domain(BOX).unwrap();
        let (g, goal) = make_generic_goal(&model).unwrap();
        assert_eq!(goal.constants.len(), 1);
        assert!(g.universal.is_none());
        assert!(g.theory.signature.constants.contains_key("star_b"));
        assert!(make_generic_goal(&g).is_err());
    }

    #[test]
    fn zero_value_function_gives_reward() {
        let model = parse_domain(BOX).unwrap();
        let inst = parse_instance(BOX_INST, &model).unwrap();
        let (g, goal) = make_generic_goal(&model).unwrap();
        let lvf = LinearValueFunction::new(vec![crate::fomdp::Basis::new(Case::constant(1.0))]);
        let q = build_generic_q(&g, &lvf, &goal).unwrap();
        let sel = select_action(&q, &inst.goals, &inst.init).unwrap();
        // no box is at its destination, so every action scores 0
        assert!(sel.scores.iter().all(|(_, v)| *v == 0.0));
        assert_eq!(sel.action, sel.scores[0].0);
    }

    #[test]
    fn substitution_checks_types() {
        let model = parse_domain(BOX).unwrap();
        let inst = parse_instance(BOX_INST, &model).unwrap();
        let (g, goal) = make_generic_goal(&model).unwrap();
        let lvf = LinearValueFunction::new(vec![crate::fomdp::Basis::new(Case::constant(1.0))]);
        let q = build_generic_q(&g, &lvf, &goal).unwrap();
        assert!(substitute_goal(&q, &[sym("c1")], &inst.init).is_err());
        let id = substitute_goal(&q, &[sym("b1")], &inst.init).unwrap();
        assert_eq!(id.goal.body, goal.instance(&[sym("b1")]));
    }
}
