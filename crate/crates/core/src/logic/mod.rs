pub mod bdd;
pub mod eval;
pub mod formula;
pub mod normal;
pub mod parse;
pub mod reasoner;
pub mod sat;
pub mod signature;

pub use bdd::simplify_bdd;
pub use eval::{
    eval_closed, eval_in_state, eval_with_action, satisfying_bindings, Binding, GroundAction,
    GroundAtom, GroundState, Universe,
};
pub use formula::{sym, Formula, Sym, Term, Var, DEFAULT_TYPE};
pub use normal::{miniscope, nnf, normalize};
pub use parse::{parse_formula, parse_formula_with, ParseOptions};
pub use reasoner::Reasoner;
pub use sat::{check_consistency, is_consistent, Consistency, ConsistencyBound};
pub use signature::{PredicateDecl, Signature};
