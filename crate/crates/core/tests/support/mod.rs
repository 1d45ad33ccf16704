//! Fixture loading and independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod lp;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fomdp_core::fomdp::{parse_domain, parse_instance, FomdpModel, Instance};
use fomdp_core::logic::{Formula, GroundAction, Signature, Sym, Term, Universe, Var};
use fomdp_core::oracle::{instantiate, GroundMDP, InstantiateOptions};

pub const FIXTURES: [&str; 4] = ["flip", "logistics", "boxworld-mini", "blocksworld-mini"];

pub fn fixture_text(name: &str) -> (String, String) {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let d = std::fs::read_to_string(format!("{dir}/{name}.domain")).expect("domain fixture");
    let i = std::fs::read_to_string(format!("{dir}/{name}.instance")).expect("instance fixture");
    (d, i)
}

pub fn fixture_path(name: &str, ext: &str) -> String {
    format!("{}/fixtures/{name}.{ext}", env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(name: &str) -> (FomdpModel, Instance) {
    let (d, i) = fixture_text(name);
    let model = parse_domain(&d).expect("domain parses");
    let inst = parse_instance(&i, &model).expect("instance parses");
    (model, inst)
}

/// Every fluent assignment of the instance.
pub fn full_mdp(model: &FomdpModel, inst: &Instance) -> GroundMDP {
    let opts = InstantiateOptions {
        full: true,
        ..Default::default()
    };
    instantiate(model, inst, opts).expect("instantiation")
}

pub fn reachable_mdp(model: &FomdpModel, inst: &Instance) -> GroundMDP {
    instantiate(model, inst, InstantiateOptions::default()).expect("instantiation")
}

/// Every deterministic action of the theory over the instance objects.
pub fn ground_deterministic_actions(model: &FomdpModel, universe: &Universe) -> Vec<GroundAction> {
    let mut out = Vec::new();
    for (name, types) in &model.theory.actions {
        let mut tuples: Vec<Vec<Sym>> = vec![Vec::new()];
        for ty in types {
            let objs = universe.get(ty).cloned().unwrap_or_default();
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    objs.iter().map(move |o| {
                        let mut t = t.clone();
                        t.push(o.clone());
                        t
                    })
                })
                .collect();
        }
        for args in tuples {
            out.push(GroundAction {
                name: name.clone(),
                args,
            });
        }
    }
    out
}

/// Seeded random closed formulas over a signature and an object universe.
pub struct FormulaGen<'a> {
    sig: &'a Signature,
    universe: &'a Universe,
    rng: ChaCha8Rng,
    fresh: usize,
}

impl<'a> FormulaGen<'a> {
    pub fn new(sig: &'a Signature, universe: &'a Universe, seed: u64) -> FormulaGen<'a> {
        FormulaGen {
            sig,
            universe,
            rng: ChaCha8Rng::seed_from_u64(seed),
            fresh: 0,
        }
    }

    fn types(&self) -> Vec<Sym> {
        self.universe
            .iter()
            .filter(|(_, objs)| !objs.is_empty())
            .map(|(t, _)| t.clone())
            .collect()
    }

    fn term(&mut self, ty: &Sym, scope: &[Var]) -> Option<Term> {
        let mut cands: Vec<Term> = scope.iter().filter(|v| &v.ty == ty).cloned().map(Term::Var).collect();
        // variables are preferred so quantifiers matter
        if cands.is_empty() || self.rng.gen_bool(0.25) {
            for o in self.universe.get(ty).map(|v| v.as_slice()).unwrap_or(&[]) {
                cands.push(Term::Const {
                    name: o.clone(),
                    ty: ty.clone(),
                });
            }
        }
        cands.choose(&mut self.rng).cloned()
    }

    fn leaf(&mut self, scope: &[Var]) -> Formula {
        let types = self.types();
        if !types.is_empty() && self.rng.gen_bool(0.15) {
            let ty = types.choose(&mut self.rng).unwrap().clone();
            if let (Some(a), Some(b)) = (self.term(&ty, scope), self.term(&ty, scope)) {
                return Formula::Eq(a, b);
            }
        }
        let preds: Vec<_> = self.sig.predicates.values().cloned().collect();
        for _ in 0..8 {
            let p = preds.choose(&mut self.rng).expect("signature has predicates").clone();
            let args: Option<Vec<Term>> = p.arg_types.iter().map(|t| self.term(t, scope)).collect();
            if let Some(args) = args {
                return Formula::Atom { pred: p.name, args };
            }
        }
        Formula::True
    }

    fn gen(&mut self, depth: usize, scope: &mut Vec<Var>) -> Formula {
        if depth == 0 || self.rng.gen_bool(0.2) {
            return self.leaf(scope);
        }
        let types = self.types();
        let k = if types.is_empty() { 4 } else { 6 };
        match self.rng.gen_range(0..k) {
            0 => self.gen(depth - 1, scope).negate(),
            1 => {
                let n = self.rng.gen_range(2..=3);
                Formula::And((0..n).map(|_| self.gen(depth - 1, scope)).collect())
            }
            2 => {
                let n = self.rng.gen_range(2..=3);
                Formula::Or((0..n).map(|_| self.gen(depth - 1, scope)).collect())
            }
            3 => Formula::Implies(Box::new(self.gen(depth - 1, scope)), Box::new(self.gen(depth - 1, scope))),
            q => {
                let ty = types.choose(&mut self.rng).unwrap().clone();
                self.fresh += 1;
                let v = Var::new(&format!("v{}", self.fresh), &ty);
                scope.push(v.clone());
                let body = self.gen(depth - 1, scope);
                scope.pop();
                if q == 4 {
                    Formula::Exists(vec![v], Box::new(body))
                } else {
                    Formula::Forall(vec![v], Box::new(body))
                }
            }
        }
    }

    pub fn formula(&mut self, depth: usize) -> Formula {
        self.gen(depth, &mut Vec::new())
    }

    /// Fluent-only formulas (every predicate has an axiom or is static).
    pub fn corpus(&mut self, n: usize, depth: usize) -> Vec<Formula> {
        (0..n).map(|_| self.formula(depth)).collect()
    }
}

/// Propositional truth-table consistency of a quantifier-free formula.
pub fn prop_satisfiable(f: &Formula, atoms: &[&str]) -> bool {
    (0..1u32 << atoms.len()).any(|mask| {
        let val: BTreeMap<&str, bool> = atoms.iter().enumerate().map(|(i, a)| (*a, mask >> i & 1 == 1)).collect();
        prop_eval(f, &val)
    })
}

pub fn prop_eval(f: &Formula, val: &BTreeMap<&str, bool>) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom { pred, args } if args.is_empty() => val[&**pred],
        Formula::Not(g) => !prop_eval(g, val),
        Formula::And(gs) => gs.iter().all(|g| prop_eval(g, val)),
        Formula::Or(gs) => gs.iter().any(|g| prop_eval(g, val)),
        Formula::Implies(a, b) => !prop_eval(a, val) || prop_eval(b, val),
        other => panic!("not propositional: {other}"),
    }
}
