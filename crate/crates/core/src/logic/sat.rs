//! Bounded-domain satisfiability: ground a formula over a finite typed
//! universe and decide the propositional result with a CDCL solver.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use batsat::{lbool, BasicCallbacks, Lit, Solver, SolverInterface, SolverOpts, Var as SatVar};

use super::formula::{sym, Formula, Sym, Term, Var};
use super::normal::{miniscope, nnf};

/// Objects per type used when deciding consistency.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConsistencyBound {
    pub objects_per_type: usize,
    /// Nominal time limit, enforced as a fixed work budget so results do
    /// not depend on machine load.
    pub timeout: Option<Duration>,
}

impl Default for ConsistencyBound {
    fn default() -> Self {
        ConsistencyBound {
            objects_per_type: 3,
            timeout: Some(Duration::from_millis(500)),
        }
    }
}

impl ConsistencyBound {
    pub fn new(objects_per_type: usize) -> ConsistencyBound {
        assert!(objects_per_type >= 1, "bound must be at least 1");
        ConsistencyBound {
            objects_per_type,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Consistency {
    Consistent,
    Inconsistent,
    /// The check ran out of time.
    Indeterminate,
}

impl Consistency {
    /// Indeterminate results count as consistent so pruning stays sound.
    pub fn possibly_true(self) -> bool {
        !matches!(self, Consistency::Inconsistent)
    }
}

/// True iff `f` (free variables read existentially) has a model with at most
/// `bound` anonymous objects per type besides the constants it names.
pub fn is_consistent(f: &Formula, bound: &ConsistencyBound) -> bool {
    check_consistency(f, bound).possibly_true()
}

pub fn check_consistency(f: &Formula, bound: &ConsistencyBound) -> Consistency {
    let ms = bound.timeout.map(|t| t.as_millis() as u64);
    let free: Vec<Var> = f.free_vars().into_iter().collect();
    let closed = Formula::exists(free, f.clone());
    let g = miniscope(&nnf(&closed));
    let universe = bounded_universe(&g, bound.objects_per_type);
    let mut grounder = Grounder {
        universe: &universe,
        atoms: HashMap::new(),
        env: Vec::new(),
        memo: HashMap::new(),
        free: HashMap::new(),
        num_vars: 0,
        clauses: Vec::new(),
        step_limit: ms.map(|m| m.saturating_mul(GROUND_STEPS_PER_MS)),
        steps: 0,
        expired: false,
    };
    let root = grounder.ground(&g);
    if grounder.expired {
        return Consistency::Indeterminate;
    }
    let lit = match root {
        G::Const(true) => return Consistency::Consistent,
        G::Const(false) => return Consistency::Inconsistent,
        G::Lit(l) => l,
    };
    grounder.clauses.push(vec![lit]);
    match cdcl(grounder.num_vars, grounder.clauses, ms.map(|m| m.saturating_mul(SEARCH_CHECKS_PER_MS))) {
        Some(true) => Consistency::Consistent,
        Some(false) => Consistency::Inconsistent,
        None => Consistency::Indeterminate,
    }
}

/// Work budgets per nominal millisecond of timeout.
const GROUND_STEPS_PER_MS: u64 = 20_000;
const SEARCH_CHECKS_PER_MS: u64 = 200;

/// Named constants of each type plus `extra` anonymous objects.
pub fn bounded_universe(f: &Formula, extra: usize) -> BTreeMap<Sym, Vec<Sym>> {
    let mut out: BTreeMap<Sym, BTreeSet<Sym>> = BTreeMap::new();
    for ty in f.types() {
        out.entry(ty).or_default();
    }
    for (name, ty) in f.constants() {
        out.entry(ty).or_default().insert(name);
    }
    out.into_iter()
        .map(|(ty, consts)| {
            let mut objs: Vec<Sym> = consts.into_iter().collect();
            objs.extend((0..extra).map(|i| sym(&format!("#{ty}{i}"))));
            (ty, objs)
        })
        .collect()
}

/// A grounded subformula: a truth value or a literal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum G {
    Const(bool),
    Lit(i32),
}

/// Grounds an NNF formula straight to clauses with the one-sided
/// (Plaisted-Greenbaum) encoding, which is equisatisfiable for NNF input.
/// Quantified subformulas are shared across equal bindings of their free
/// variables.
struct Grounder<'a> {
    universe: &'a BTreeMap<Sym, Vec<Sym>>,
    atoms: HashMap<(Sym, Vec<Sym>), i32>,
    env: Vec<(Var, Sym)>,
    memo: HashMap<(usize, Vec<Sym>), G>,
    free: HashMap<usize, Vec<Var>>,
    num_vars: usize,
    clauses: Vec<Vec<i32>>,
    step_limit: Option<u64>,
    steps: u64,
    expired: bool,
}

impl Grounder<'_> {
    fn lookup(&self, v: &Var) -> Sym {
        self.env
            .iter()
            .rev()
            .find(|(w, _)| w == v)
            .map(|(_, o)| o.clone())
            .expect("closed formula")
    }

    fn obj(&self, t: &Term) -> Sym {
        match t {
            Term::Const { name, .. } => name.clone(),
            Term::Var(v) => self.lookup(v),
        }
    }

    fn atom(&mut self, key: (Sym, Vec<Sym>)) -> G {
        if let Some(&l) = self.atoms.get(&key) {
            return G::Lit(l);
        }
        self.num_vars += 1;
        let l = self.num_vars as i32;
        self.atoms.insert(key, l);
        G::Lit(l)
    }

    fn node(&mut self, is_and: bool, parts: Vec<i32>) -> G {
        match parts.len() {
            0 => G::Const(is_and),
            1 => G::Lit(parts[0]),
            _ => {
                self.num_vars += 1;
                let n = self.num_vars as i32;
                if is_and {
                    for l in parts {
                        self.clauses.push(vec![-n, l]);
                    }
                } else {
                    let mut c = vec![-n];
                    c.extend(parts);
                    self.clauses.push(c);
                }
                G::Lit(n)
            }
        }
    }

    fn tick(&mut self) -> bool {
        self.steps += 1;
        if self.step_limit.is_some_and(|l| self.steps > l) {
            self.expired = true;
        }
        self.expired
    }

    fn ground(&mut self, f: &Formula) -> G {
        if self.tick() {
            return G::Const(false);
        }
        match f {
            Formula::True => G::Const(true),
            Formula::False => G::Const(false),
            Formula::Atom { pred, args } => {
                let objs = args.iter().map(|t| self.obj(t)).collect();
                self.atom((pred.clone(), objs))
            }
            Formula::ActionEq { name, args } => {
                let objs = args.iter().map(|t| self.obj(t)).collect();
                self.atom((sym(&format!("a={name}")), objs))
            }
            Formula::Eq(a, b) => G::Const(self.obj(a) == self.obj(b)),
            Formula::Not(g) => match self.ground(g) {
                G::Const(b) => G::Const(!b),
                G::Lit(l) => G::Lit(-l),
            },
            Formula::And(gs) | Formula::Or(gs) => {
                let is_and = matches!(f, Formula::And(_));
                let mut parts = Vec::new();
                for g in gs {
                    match self.ground(g) {
                        G::Const(b) if b == is_and => {}
                        G::Const(b) => return G::Const(b),
                        G::Lit(l) => parts.push(l),
                    }
                }
                self.node(is_and, parts)
            }
            Formula::Implies(..) => unreachable!("input is in negation normal form"),
            Formula::Exists(vs, b) | Formula::Forall(vs, b) => {
                let id = f as *const Formula as usize;
                let free = self
                    .free
                    .entry(id)
                    .or_insert_with(|| f.free_vars().into_iter().collect())
                    .clone();
                let key = (id, free.iter().map(|v| self.lookup(v)).collect::<Vec<_>>());
                if let Some(&g) = self.memo.get(&key) {
                    return g;
                }
                let exists = matches!(f, Formula::Exists(..));
                let mut parts = Vec::new();
                let g = if self.expand(vs, b, exists, &mut parts) {
                    G::Const(exists)
                } else {
                    self.node(!exists, parts)
                };
                self.memo.insert(key, g);
                g
            }
        }
    }

    // Returns true on short circuit (a true disjunct / false conjunct).
    fn expand(&mut self, vs: &[Var], body: &Formula, exists: bool, out: &mut Vec<i32>) -> bool {
        let Some((v, rest)) = vs.split_first() else {
            match self.ground(body) {
                G::Const(b) => return b == exists,
                G::Lit(l) => out.push(l),
            }
            return false;
        };
        let objs = self.universe.get(&v.ty).cloned().unwrap_or_default();
        for o in objs {
            self.env.push((v.clone(), o));
            let stop = self.expand(rest, body, exists, out);
            self.env.pop();
            if stop {
                return true;
            }
        }
        false
    }
}

/// CDCL search; `None` when the budget of stop checks runs out first.
fn cdcl(num_vars: usize, clauses: Vec<Vec<i32>>, budget: Option<u64>) -> Option<bool> {
    let mut cb = BasicCallbacks::new();
    if let Some(b) = budget {
        let used = AtomicU64::new(0);
        cb.set_stop(move || used.fetch_add(1, Ordering::Relaxed) >= b);
    }
    let mut solver = Solver::new(SolverOpts::default(), cb);
    let vars: Vec<SatVar> = (0..num_vars).map(|_| solver.new_var_default()).collect();
    for c in clauses {
        let mut lits: Vec<Lit> = c
            .iter()
            .map(|&l| Lit::new(vars[l.unsigned_abs() as usize - 1], l > 0))
            .collect();
        if !solver.add_clause_reuse(&mut lits) {
            return Some(false);
        }
    }
    let r = solver.solve_limited(&[]);
    if r == lbool::TRUE {
        Some(true)
    } else if r == lbool::FALSE {
        Some(false)
    } else {
        None
    }
}
