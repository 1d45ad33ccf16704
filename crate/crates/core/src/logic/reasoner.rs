use std::collections::HashMap;

use parking_lot::Mutex;

use super::bdd::simplify_bdd;
use super::formula::Formula;
use super::normal::normalize;
use super::sat::{check_consistency, Consistency, ConsistencyBound};

/// Bounded-domain reasoning with memoized results. Shared across threads.
#[derive(Debug)]
pub struct Reasoner {
    pub bound: ConsistencyBound,
    sat_cache: Mutex<HashMap<Formula, Consistency>>,
    simp_cache: Mutex<HashMap<Formula, Formula>>,
}

impl Default for Reasoner {
    fn default() -> Self {
        Reasoner::new(ConsistencyBound::default())
    }
}

impl Clone for Reasoner {
    fn clone(&self) -> Self {
        Reasoner::new(self.bound.clone())
    }
}

impl Reasoner {
    pub fn new(bound: ConsistencyBound) -> Reasoner {
        Reasoner {
            bound,
            sat_cache: Mutex::new(HashMap::new()),
            simp_cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_bound(n: usize) -> Reasoner {
        Reasoner::new(ConsistencyBound::new(n))
    }

    pub fn check(&self, f: &Formula) -> Consistency {
        match f {
            Formula::True => return Consistency::Consistent,
            Formula::False => return Consistency::Inconsistent,
            _ => {}
        }
        if let Some(c) = self.sat_cache.lock().get(f) {
            return *c;
        }
        let c = check_consistency(f, &self.bound);
        self.sat_cache.lock().insert(f.clone(), c);
        c
    }

    /// Indeterminate counts as consistent.
    pub fn consistent(&self, f: &Formula) -> bool {
        self.check(f).possibly_true()
    }

    /// Valid at the bound: the negation is definitely inconsistent.
    pub fn valid(&self, f: &Formula) -> bool {
        self.check(&normalize(&f.clone().negate())) == Consistency::Inconsistent
    }

    pub fn disjoint(&self, a: &Formula, b: &Formula) -> bool {
        self.check(&normalize(&Formula::and(vec![a.clone(), b.clone()])))
            == Consistency::Inconsistent
    }

    pub fn equivalent(&self, a: &Formula, b: &Formula) -> bool {
        let both = Formula::and(vec![
            Formula::implies(a.clone(), b.clone()),
            Formula::implies(b.clone(), a.clone()),
        ]);
        self.valid(&both)
    }

    pub fn simplify(&self, f: &Formula) -> Formula {
        if let Some(g) = self.simp_cache.lock().get(f) {
            return g.clone();
        }
        let g = simplify_bdd(f);
        self.simp_cache.lock().insert(f.clone(), g.clone());
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse::parse_formula;

    #[test]
    fn validity_and_disjointness() {
        let r = Reasoner::with_bound(2);
        let p = parse_formula("P").unwrap();
        let np = parse_formula("!P").unwrap();
        assert!(r.disjoint(&p, &np));
        assert!(r.valid(&Formula::or(vec![p.clone(), np.clone()])));
        assert!(!r.valid(&p));
        assert!(r.equivalent(
            &parse_formula("!(P & Q)").unwrap(),
            &parse_formula("!P | !Q").unwrap()
        ));
    }
}
