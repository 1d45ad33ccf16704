use std::collections::{BTreeMap, BTreeSet};

use super::formula::{sym, Sym};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateDecl {
    pub name: Sym,
    pub arg_types: Vec<Sym>,
    /// Static predicates never change under any action.
    pub is_static: bool,
}

/// Vocabulary used to resolve identifiers while parsing.
#[derive(Clone, Debug, Default)]
pub struct Signature {
    pub types: BTreeSet<Sym>,
    pub predicates: BTreeMap<Sym, PredicateDecl>,
    /// Named constants and their types.
    pub constants: BTreeMap<Sym, Sym>,
}

impl Signature {
    pub fn new() -> Signature {
        Signature::default()
    }

    pub fn with_type(mut self, ty: &str) -> Signature {
        self.types.insert(sym(ty));
        self
    }

    pub fn with_predicate(mut self, name: &str, arg_types: &[&str], is_static: bool) -> Signature {
        self.add_predicate(name, arg_types, is_static);
        self
    }

    pub fn add_predicate(&mut self, name: &str, arg_types: &[&str], is_static: bool) {
        for t in arg_types {
            self.types.insert(sym(t));
        }
        self.predicates.insert(
            sym(name),
            PredicateDecl {
                name: sym(name),
                arg_types: arg_types.iter().map(|t| sym(t)).collect(),
                is_static,
            },
        );
    }

    pub fn add_constant(&mut self, name: &str, ty: &str) {
        self.types.insert(sym(ty));
        self.constants.insert(sym(name), sym(ty));
    }

    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.get(name)
    }

    pub fn fluents(&self) -> impl Iterator<Item = &PredicateDecl> {
        self.predicates.values().filter(|p| !p.is_static)
    }
}
