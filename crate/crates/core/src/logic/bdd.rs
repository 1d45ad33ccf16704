//! Propositional simplification through a reduced ordered BDD.
//!
//! Quantifiers are first pushed inward; every maximal non-propositional
//! subformula (atom, equality, quantified subformula) becomes one BDD
//! variable, shared between syntactically identical occurrences after
//! normalization. Universal leaves are stored as negated existentials so a
//! quantified formula and its negation share a variable.

use std::collections::{BTreeMap, HashMap};

use super::formula::Formula;
use super::normal::{miniscope, nnf, normalize};

/// Default cap on distinct propositional leaves.
pub const DEFAULT_ATOM_LIMIT: usize = 64;
const NODE_LIMIT: usize = 4096;
const STEP_LIMIT: usize = 200_000;

type NodeId = u32;
const ZERO: NodeId = 0;
const ONE: NodeId = 1;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct Node {
    var: u32,
    lo: NodeId,
    hi: NodeId,
}

struct Bdd {
    nodes: Vec<Node>,
    unique: HashMap<Node, NodeId>,
    ite_memo: HashMap<(NodeId, NodeId, NodeId), NodeId>,
    /// Set once the node or step budget is exceeded; results are then meaningless.
    overflow: bool,
    steps: usize,
}

impl Bdd {
    fn new() -> Bdd {
        let term = Node {
            var: u32::MAX,
            lo: 0,
            hi: 0,
        };
        Bdd {
            nodes: vec![term, term],
            unique: HashMap::new(),
            ite_memo: HashMap::new(),
            overflow: false,
            steps: 0,
        }
    }

    fn mk(&mut self, var: u32, lo: NodeId, hi: NodeId) -> NodeId {
        if lo == hi {
            return lo;
        }
        let n = Node { var, lo, hi };
        if let Some(&id) = self.unique.get(&n) {
            return id;
        }
        let id = self.nodes.len() as NodeId;
        if self.nodes.len() > NODE_LIMIT {
            self.overflow = true;
        }
        self.nodes.push(n);
        self.unique.insert(n, id);
        id
    }

    fn var(&mut self, v: u32) -> NodeId {
        self.mk(v, ZERO, ONE)
    }

    fn top_var(&self, f: NodeId) -> u32 {
        self.nodes[f as usize].var
    }

    fn cofactors(&self, f: NodeId, v: u32) -> (NodeId, NodeId) {
        let n = self.nodes[f as usize];
        if f > ONE && n.var == v {
            (n.lo, n.hi)
        } else {
            (f, f)
        }
    }

    fn ite(&mut self, f: NodeId, g: NodeId, h: NodeId) -> NodeId {
        if f == ONE {
            return g;
        }
        if f == ZERO {
            return h;
        }
        if g == h {
            return g;
        }
        if g == ONE && h == ZERO {
            return f;
        }
        self.steps += 1;
        if self.steps > STEP_LIMIT {
            self.overflow = true;
        }
        if self.overflow {
            return ZERO;
        }
        if let Some(&r) = self.ite_memo.get(&(f, g, h)) {
            return r;
        }
        let v = [f, g, h]
            .iter()
            .filter(|&&x| x > ONE)
            .map(|&x| self.top_var(x))
            .min()
            .unwrap();
        let (f0, f1) = self.cofactors(f, v);
        let (g0, g1) = self.cofactors(g, v);
        let (h0, h1) = self.cofactors(h, v);
        let lo = self.ite(f0, g0, h0);
        let hi = self.ite(f1, g1, h1);
        let r = self.mk(v, lo, hi);
        self.ite_memo.insert((f, g, h), r);
        r
    }

    fn not(&mut self, f: NodeId) -> NodeId {
        self.ite(f, ZERO, ONE)
    }

    fn and(&mut self, f: NodeId, g: NodeId) -> NodeId {
        self.ite(f, g, ZERO)
    }

    fn or(&mut self, f: NodeId, g: NodeId) -> NodeId {
        self.ite(f, ONE, g)
    }
}

struct Abstraction {
    leaves: BTreeMap<Formula, u32>,
}

impl Abstraction {
    /// Leaf key and polarity for a non-propositional subformula.
    fn leaf(f: &Formula) -> (Formula, bool) {
        match f {
            Formula::Forall(vs, b) => {
                let neg_body = normalize(&Formula::Not(b.clone()));
                (
                    normalize(&Formula::Exists(vs.clone(), Box::new(neg_body))),
                    false,
                )
            }
            other => (other.clone(), true),
        }
    }

    fn collect(&mut self, f: &Formula) {
        match f {
            Formula::True | Formula::False => {}
            Formula::Not(g) => self.collect(g),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| self.collect(g)),
            other => {
                let (key, _) = Abstraction::leaf(other);
                let next = self.leaves.len() as u32;
                self.leaves.entry(key).or_insert(next);
            }
        }
    }

    fn build(&self, bdd: &mut Bdd, f: &Formula) -> NodeId {
        match f {
            Formula::True => ONE,
            Formula::False => ZERO,
            Formula::Not(g) => {
                let x = self.build(bdd, g);
                bdd.not(x)
            }
            Formula::And(gs) => gs.iter().fold(ONE, |acc, g| {
                if bdd.overflow {
                    return ZERO;
                }
                let x = self.build(bdd, g);
                bdd.and(acc, x)
            }),
            Formula::Or(gs) => gs.iter().fold(ZERO, |acc, g| {
                if bdd.overflow {
                    return ZERO;
                }
                let x = self.build(bdd, g);
                bdd.or(acc, x)
            }),
            other => {
                let (key, positive) = Abstraction::leaf(other);
                let v = bdd.var(self.leaves[&key]);
                if positive {
                    v
                } else {
                    bdd.not(v)
                }
            }
        }
    }
}

/// Size of the formula `read_back` would produce, saturating.
fn read_back_size(bdd: &Bdd, f: NodeId, memo: &mut HashMap<NodeId, usize>) -> usize {
    if f <= ONE {
        return 1;
    }
    if let Some(&n) = memo.get(&f) {
        return n;
    }
    let n = bdd.nodes[f as usize];
    let lo = read_back_size(bdd, n.lo, memo);
    let hi = read_back_size(bdd, n.hi, memo);
    let out = lo.saturating_add(hi).saturating_add(4);
    memo.insert(f, out);
    out
}

fn read_back(bdd: &Bdd, f: NodeId, by_var: &[Formula]) -> Formula {
    if f == ONE {
        return Formula::True;
    }
    if f == ZERO {
        return Formula::False;
    }
    let n = bdd.nodes[f as usize];
    let atom = by_var[n.var as usize].clone();
    let neg = Formula::Not(Box::new(atom.clone()));
    let lo = read_back(bdd, n.lo, by_var);
    let hi = read_back(bdd, n.hi, by_var);
    match (lo, hi) {
        (Formula::False, hi) => Formula::and(vec![atom, hi]),
        (lo, Formula::False) => Formula::and(vec![neg, lo]),
        (Formula::True, hi) => Formula::or(vec![neg, hi]),
        (lo, Formula::True) => Formula::or(vec![atom, lo]),
        (lo, hi) => Formula::or(vec![
            Formula::and(vec![atom, hi]),
            Formula::and(vec![neg, lo]),
        ]),
    }
}

/// Simplify quantifier bodies bottom-up after miniscoping.
fn simplify_inside(f: &Formula, limit: usize) -> Formula {
    match f {
        Formula::Not(g) => Formula::Not(Box::new(simplify_inside(g, limit))),
        Formula::And(gs) => Formula::And(gs.iter().map(|g| simplify_inside(g, limit)).collect()),
        Formula::Or(gs) => Formula::Or(gs.iter().map(|g| simplify_inside(g, limit)).collect()),
        Formula::Exists(vs, b) => Formula::Exists(vs.clone(), Box::new(propositional(b, limit))),
        Formula::Forall(vs, b) => Formula::Forall(vs.clone(), Box::new(propositional(b, limit))),
        other => other.clone(),
    }
}

fn propositional(f: &Formula, limit: usize) -> Formula {
    let f = normalize(&simplify_inside(f, limit));
    let mut abs = Abstraction {
        leaves: BTreeMap::new(),
    };
    abs.collect(&f);
    if abs.leaves.len() > limit {
        return f;
    }
    // variable order follows canonical leaf order
    let order: Vec<Formula> = abs.leaves.keys().cloned().collect();
    for (i, k) in order.iter().enumerate() {
        abs.leaves.insert(k.clone(), i as u32);
    }
    let mut bdd = Bdd::new();
    let root = abs.build(&mut bdd, &f);
    if bdd.overflow || bdd.nodes.len() > NODE_LIMIT {
        return f;
    }
    // A tree read back from a shared graph can be exponentially larger.
    if read_back_size(&bdd, root, &mut HashMap::new()) > 2 * f.size() + 8 {
        return f;
    }
    let back = normalize(&read_back(&bdd, root, &order));
    if back.size() <= f.size() {
        back
    } else {
        f
    }
}

/// Simplify with the default leaf limit. The result is logically
/// equivalent to the input.
pub fn simplify_bdd(f: &Formula) -> Formula {
    simplify_bdd_with_limit(f, DEFAULT_ATOM_LIMIT)
}

pub fn simplify_bdd_with_limit(f: &Formula, limit: usize) -> Formula {
    let g = miniscope(&normalize(&nnf(f)));
    let out = propositional(&g, limit);
    normalize(&out)
}
