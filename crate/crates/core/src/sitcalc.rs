//! Successor-state axioms, regression and ground progression.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::logic::{
    eval_with_action, normalize, simplify_bdd, sym, Binding, Formula, GroundAction, GroundAtom,
    GroundState, Signature, Sym, Term, Var,
};

/// `F(x) <=> body`, where the body mentions the action only through
/// `a = n(..)` atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct SuccessorStateAxiom {
    pub fluent: Sym,
    pub params: Vec<Var>,
    pub body: Formula,
}

/// A nature's-choice action applied to terms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionTerm {
    pub name: Sym,
    pub args: Vec<Term>,
}

impl ActionTerm {
    pub fn new(name: &str, args: Vec<Term>) -> ActionTerm {
        ActionTerm {
            name: sym(name),
            args,
        }
    }
}

impl fmt::Display for ActionTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// Fluents, their axioms, and the deterministic actions they mention.
#[derive(Clone, Debug, Default)]
pub struct ActionTheory {
    pub signature: Signature,
    pub ssas: BTreeMap<Sym, SuccessorStateAxiom>,
    /// Argument types of every deterministic action.
    pub actions: BTreeMap<Sym, Vec<Sym>>,
}

impl ActionTheory {
    pub fn add_ssa(&mut self, ssa: SuccessorStateAxiom) {
        self.ssas.insert(ssa.fluent.clone(), ssa);
    }

    /// Lift a ground action to a term over typed constants.
    pub fn lift(&self, act: &GroundAction) -> Result<ActionTerm> {
        let types = self.arg_types(&act.name, act.args.len())?;
        Ok(ActionTerm {
            name: act.name.clone(),
            args: act
                .args
                .iter()
                .zip(types)
                .map(|(o, ty)| Term::Const {
                    name: o.clone(),
                    ty: ty.clone(),
                })
                .collect(),
        })
    }

    fn arg_types(&self, name: &str, found: usize) -> Result<&Vec<Sym>> {
        let types = self
            .actions
            .get(name)
            .ok_or_else(|| Error::Model(format!("unknown deterministic action `{name}`")))?;
        if types.len() != found {
            return Err(Error::Arity {
                name: name.to_string(),
                expected: types.len(),
                found,
            });
        }
        Ok(types)
    }

    /// Every fluent in `f` has an axiom.
    pub fn check_covered(&self, f: &Formula) -> Result<()> {
        for p in f.predicates() {
            match self.signature.predicate(&p) {
                Some(d) if d.is_static => {}
                _ if self.ssas.contains_key(&p) => {}
                _ => return Err(Error::MissingSsa(p.to_string())),
            }
        }
        Ok(())
    }
}

/// Regression without the final simplification pass.
pub fn regress_raw(f: &Formula, act: &ActionTerm, theory: &ActionTheory) -> Result<Formula> {
    theory.arg_types(&act.name, act.args.len())?;
    let expanded = expand(f, theory)?;
    // action arguments enter through placeholders so the substitution that
    // follows can rename any binder that would capture them
    let holes: Vec<Var> = act
        .args
        .iter()
        .enumerate()
        .map(|(i, t)| Var {
            name: sym(&format!("%a{i}")),
            ty: t.ty().clone(),
        })
        .collect();
    let resolved = resolve(&expanded, &act.name, &holes);
    let map: BTreeMap<Var, Term> = holes.into_iter().zip(act.args.iter().cloned()).collect();
    Ok(resolved.substitute(&map))
}

/// Regr(f) through `act`, normalized and simplified.
pub fn regress(f: &Formula, act: &ActionTerm, theory: &ActionTheory) -> Result<Formula> {
    let raw = regress_raw(f, act, theory)?;
    Ok(simplify_bdd(&normalize(&raw)))
}

fn expand(f: &Formula, theory: &ActionTheory) -> Result<Formula> {
    Ok(match f {
        Formula::Atom { pred, args } => {
            if let Some(d) = theory.signature.predicate(pred) {
                if d.is_static {
                    return Ok(f.clone());
                }
            }
            let ssa = theory
                .ssas
                .get(pred)
                .ok_or_else(|| Error::MissingSsa(pred.to_string()))?;
            if ssa.params.len() != args.len() {
                return Err(Error::Arity {
                    name: pred.to_string(),
                    expected: ssa.params.len(),
                    found: args.len(),
                });
            }
            let map: BTreeMap<Var, Term> = ssa.params.iter().cloned().zip(args.iter().cloned()).collect();
            ssa.body.substitute(&map)
        }
        Formula::Not(g) => Formula::Not(Box::new(expand(g, theory)?)),
        Formula::And(gs) => Formula::And(gs.iter().map(|g| expand(g, theory)).collect::<Result<_>>()?),
        Formula::Or(gs) => Formula::Or(gs.iter().map(|g| expand(g, theory)).collect::<Result<_>>()?),
        Formula::Implies(a, b) => {
            Formula::Implies(Box::new(expand(a, theory)?), Box::new(expand(b, theory)?))
        }
        Formula::Exists(vs, b) => Formula::Exists(vs.clone(), Box::new(expand(b, theory)?)),
        Formula::Forall(vs, b) => Formula::Forall(vs.clone(), Box::new(expand(b, theory)?)),
        other => other.clone(),
    })
}

fn resolve(f: &Formula, name: &Sym, holes: &[Var]) -> Formula {
    match f {
        Formula::ActionEq { name: n, args } => {
            if n != name || args.len() != holes.len() {
                Formula::False
            } else {
                Formula::And(
                    args.iter()
                        .zip(holes)
                        .map(|(t, h)| Formula::Eq(t.clone(), Term::Var(h.clone())))
                        .collect(),
                )
            }
        }
        Formula::Not(g) => Formula::Not(Box::new(resolve(g, name, holes))),
        Formula::And(gs) => Formula::And(gs.iter().map(|g| resolve(g, name, holes)).collect()),
        Formula::Or(gs) => Formula::Or(gs.iter().map(|g| resolve(g, name, holes)).collect()),
        Formula::Implies(a, b) => Formula::Implies(
            Box::new(resolve(a, name, holes)),
            Box::new(resolve(b, name, holes)),
        ),
        Formula::Exists(vs, b) => Formula::Exists(vs.clone(), Box::new(resolve(b, name, holes))),
        Formula::Forall(vs, b) => Formula::Forall(vs.clone(), Box::new(resolve(b, name, holes))),
        other => other.clone(),
    }
}

/// Successor of `s` under a ground deterministic action, computed by
/// evaluating every axiom body on every typed argument tuple.
pub fn apply(theory: &ActionTheory, act: &GroundAction, s: &GroundState) -> Result<GroundState> {
    theory.arg_types(&act.name, act.args.len())?;
    let mut atoms: BTreeSet<GroundAtom> = s
        .atoms
        .iter()
        .filter(|a| {
            theory
                .signature
                .predicate(&a.pred)
                .is_some_and(|d| d.is_static)
        })
        .cloned()
        .collect();
    for ssa in theory.ssas.values() {
        let mut tuple = Vec::with_capacity(ssa.params.len());
        progress_tuples(ssa, s, act, 0, &mut tuple, &mut atoms)?;
    }
    Ok(GroundState::new(atoms, s.universe.clone()))
}

fn progress_tuples(
    ssa: &SuccessorStateAxiom,
    s: &GroundState,
    act: &GroundAction,
    i: usize,
    tuple: &mut Vec<Sym>,
    out: &mut BTreeSet<GroundAtom>,
) -> Result<()> {
    if i == ssa.params.len() {
        let binding: Binding = ssa.params.iter().cloned().zip(tuple.iter().cloned()).collect();
        if eval_with_action(&ssa.body, s, &binding, Some(act))? {
            out.insert(GroundAtom {
                pred: ssa.fluent.clone(),
                args: tuple.clone(),
            });
        }
        return Ok(());
    }
    for o in s.objects(&ssa.params[i].ty) {
        tuple.push(o.clone());
        progress_tuples(ssa, s, act, i + 1, tuple, out)?;
        tuple.pop();
    }
    Ok(())
}
