//! Property tests for the logic, case algebra, regression and LP layers.

mod support;

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use fomdp_core::cases::{combine, eval_case, Case, CaseOp};
use fomdp_core::folp::solve_lp;
use fomdp_core::fomdp::{FomdpModel, Instance};
use fomdp_core::logic::{
    eval_in_state, is_consistent, normalize, simplify_bdd, Binding, ConsistencyBound, Formula, GroundAction, GroundAtom,
    GroundState, Reasoner, Universe,
};
use fomdp_core::oracle::all_states;
use fomdp_core::sitcalc::{apply, regress};
use fomdp_core::Error;

use support::lp::{random_lp, vertex_oracle, Verdict};
use support::*;

const ATOMS: [&str; 4] = ["A", "B", "C", "D"];

fn prop_formula() -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        (0..ATOMS.len()).prop_map(|i| Formula::prop(ATOMS[i])),
        Just(Formula::True),
        Just(Formula::False),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|f| Formula::Not(Box::new(f))),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Formula::And),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Formula::Or),
            (inner.clone(), inner).prop_map(|(a, b)| Formula::Implies(Box::new(a), Box::new(b))),
        ]
    })
}

fn valuation(mask: u32) -> BTreeMap<&'static str, bool> {
    ATOMS.iter().enumerate().map(|(i, a)| (*a, mask >> i & 1 == 1)).collect()
}

fn prop_state(mask: u32) -> GroundState {
    let atoms = ATOMS
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, a)| GroundAtom::new(a, &[]))
        .collect();
    GroundState::new(atoms, Arc::new(Universe::new()))
}

fn equivalent_by_table(a: &Formula, b: &Formula) -> bool {
    (0..1u32 << ATOMS.len()).all(|m| prop_eval(a, &valuation(m)) == prop_eval(b, &valuation(m)))
}

struct Fixture {
    model: FomdpModel,
    states: Vec<GroundState>,
    actions: Vec<GroundAction>,
    inst: Instance,
}

fn loaded(name: &'static str) -> &'static Fixture {
    static CACHE: OnceLock<Vec<Fixture>> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        ["flip", "boxworld-mini"]
            .iter()
            .map(|n| {
                let (model, inst) = fixture(n);
                let states = all_states(&model, &inst, 1 << 12).expect("states");
                let actions = ground_deterministic_actions(&model, &inst.universe);
                Fixture {
                    model,
                    states,
                    actions,
                    inst,
                }
            })
            .collect()
    });
    &all[if name == "flip" { 0 } else { 1 }]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bdd_simplification_preserves_meaning(f in prop_formula()) {
        let g = simplify_bdd(&f);
        prop_assert!(equivalent_by_table(&f, &g), "{f} became {g}");
        prop_assert!(g.size() <= normalize(&f).size());
    }

    #[test]
    fn normalize_is_idempotent_and_sound(f in prop_formula()) {
        let n = normalize(&f);
        prop_assert_eq!(normalize(&n), n.clone());
        prop_assert!(equivalent_by_table(&f, &n));
    }

    #[test]
    fn normalize_is_idempotent_on_first_order(seed in any::<u64>()) {
        let fx = loaded("boxworld-mini");
        let f = FormulaGen::new(&fx.model.theory.signature, &fx.inst.universe, seed).formula(3);
        let n = normalize(&f);
        prop_assert_eq!(normalize(&n), n.clone());
        for s in fx.states.iter().take(32) {
            prop_assert_eq!(eval_in_state(&f, s, &Binding::new()).unwrap(), eval_in_state(&n, s, &Binding::new()).unwrap());
        }
    }

    #[test]
    fn consistency_matches_truth_table(f in prop_formula()) {
        let expect = prop_satisfiable(&f, &ATOMS);
        prop_assert_eq!(is_consistent(&f, &ConsistencyBound::default()), expect);
    }

    #[test]
    fn cross_sum_is_pointwise_sum(
        f in prop_formula(),
        g in prop_formula(),
        a in -10i32..10, b in -10i32..10, c in -10i32..10, d in -10i32..10,
    ) {
        let r = Reasoner::default();
        let c1 = Case::from_pairs(vec![(f.clone(), a as f64), (f.clone().negate(), b as f64)], &r);
        let c2 = Case::from_pairs(vec![(g.clone(), c as f64), (g.clone().negate(), d as f64)], &r);
        let sum = combine(CaseOp::Add, &c1, &c2, &r);
        let prod = combine(CaseOp::Mul, &c1, &c2, &r);
        for m in 0..1u32 << ATOMS.len() {
            let s = prop_state(m);
            let (x, y) = (eval_case(&c1, &s).unwrap(), eval_case(&c2, &s).unwrap());
            prop_assert_eq!(eval_case(&sum, &s).unwrap(), x + y);
            prop_assert_eq!(eval_case(&prod, &s).unwrap(), x * y);
        }
    }

    #[test]
    fn regression_is_sound(seed in any::<u64>(), flip in any::<bool>(), si in any::<prop::sample::Index>(), ai in any::<prop::sample::Index>()) {
        let fx = loaded(if flip { "flip" } else { "boxworld-mini" });
        let theory = &fx.model.theory;
        let f = FormulaGen::new(&theory.signature, &fx.inst.universe, seed).formula(3);
        let s = &fx.states[si.index(fx.states.len())];
        let a = &fx.actions[ai.index(fx.actions.len())];
        let rf = regress(&f, &theory.lift(a).unwrap(), theory).unwrap();
        let t = apply(theory, a, s).unwrap();
        prop_assert_eq!(
            eval_in_state(&rf, s, &Binding::new()).unwrap(),
            eval_in_state(&f, &t, &Binding::new()).unwrap(),
            "{} through {}", f, a
        );
    }

    #[test]
    fn simplex_matches_vertex_enumeration(seed in any::<u64>()) {
        let lp = random_lp(seed);
        match (vertex_oracle(&lp), solve_lp(&lp)) {
            (Verdict::Optimal(v), Ok(sol)) => {
                prop_assert!((v - sol.objective).abs() <= 1e-6, "oracle {v}, simplex {}", sol.objective);
                prop_assert!(lp.constraints.iter().all(|c| c.violation(&sol.x) <= 1e-7));
            }
            (Verdict::Infeasible, Err(Error::Infeasible)) => {}
            (Verdict::Unbounded, Err(Error::Unbounded(_))) => {}
            (o, s) => prop_assert!(false, "oracle {o:?}, simplex {:?}", s.map(|s| s.objective)),
        }
    }
}
