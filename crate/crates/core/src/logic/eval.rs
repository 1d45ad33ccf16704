use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use super::formula::{Formula, Sym, Term, Var};
use crate::error::{Error, Result};

/// Objects per type, each list sorted by name.
pub type Universe = BTreeMap<Sym, Vec<Sym>>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub pred: Sym,
    pub args: Vec<Sym>,
}

impl GroundAtom {
    pub fn new(pred: &str, args: &[&str]) -> GroundAtom {
        GroundAtom {
            pred: Arc::from(pred),
            args: args.iter().map(|a| Arc::from(*a)).collect(),
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pred)?;
        if !self.args.is_empty() {
            write!(f, "({})", self.args.join(","))?;
        }
        Ok(())
    }
}

/// A ground action term such as `driveS(t1,c1,c2)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAction {
    pub name: Sym,
    pub args: Vec<Sym>,
}

impl GroundAction {
    pub fn new(name: &str, args: &[&str]) -> GroundAction {
        GroundAction {
            name: Arc::from(name),
            args: args.iter().map(|a| Arc::from(*a)).collect(),
        }
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(","))
    }
}

/// Closed-world state: atoms not listed are false.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroundState {
    pub atoms: BTreeSet<GroundAtom>,
    pub universe: Arc<Universe>,
}

impl GroundState {
    pub fn new(atoms: BTreeSet<GroundAtom>, universe: Arc<Universe>) -> GroundState {
        GroundState { atoms, universe }
    }

    pub fn holds(&self, atom: &GroundAtom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn objects(&self, ty: &str) -> &[Sym] {
        self.universe.get(ty).map(|v| v.as_slice()).unwrap_or(&[])
    }
}

impl fmt::Display for GroundState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

/// Assignment of objects to variables.
pub type Binding = BTreeMap<Var, Sym>;

struct Evaluator<'a> {
    state: &'a GroundState,
    action: Option<&'a GroundAction>,
    env: Vec<(Var, Sym)>,
}

impl Evaluator<'_> {
    fn obj(&self, t: &Term) -> Result<Sym> {
        match t {
            Term::Const { name, .. } => Ok(name.clone()),
            Term::Var(v) => self
                .env
                .iter()
                .rev()
                .find(|(w, _)| w == v)
                .map(|(_, o)| o.clone())
                .ok_or_else(|| Error::UnboundVariable(v.name.to_string())),
        }
    }

    fn eval(&mut self, f: &Formula) -> Result<bool> {
        Ok(match f {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom { pred, args } => {
                let args = args.iter().map(|t| self.obj(t)).collect::<Result<Vec<_>>>()?;
                self.state.holds(&GroundAtom {
                    pred: pred.clone(),
                    args,
                })
            }
            Formula::Eq(a, b) => self.obj(a)? == self.obj(b)?,
            Formula::ActionEq { name, args } => {
                let Some(act) = self.action else {
                    return Err(Error::Model(format!(
                        "action equality `a = {name}(..)` evaluated without an action"
                    )));
                };
                if act.name != *name || act.args.len() != args.len() {
                    false
                } else {
                    let mut same = true;
                    for (t, o) in args.iter().zip(act.args.iter()) {
                        if self.obj(t)? != *o {
                            same = false;
                            break;
                        }
                    }
                    same
                }
            }
            Formula::Not(g) => !self.eval(g)?,
            Formula::And(gs) => {
                for g in gs {
                    if !self.eval(g)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Or(gs) => {
                for g in gs {
                    if self.eval(g)? {
                        return Ok(true);
                    }
                }
                false
            }
            Formula::Implies(a, b) => !self.eval(a)? || self.eval(b)?,
            Formula::Exists(vs, b) => self.quant(vs, b, true)?,
            Formula::Forall(vs, b) => self.quant(vs, b, false)?,
        })
    }

    fn quant(&mut self, vs: &[Var], body: &Formula, exists: bool) -> Result<bool> {
        let Some((v, rest)) = vs.split_first() else {
            return self.eval(body);
        };
        let state = self.state;
        for o in state.objects(&v.ty) {
            self.env.push((v.clone(), o.clone()));
            let r = self.quant(rest, body, exists);
            self.env.pop();
            if r? == exists {
                return Ok(exists);
            }
        }
        Ok(!exists)
    }
}

/// Evaluate under closed-world semantics. Every free variable must be bound.
pub fn eval_in_state(f: &Formula, s: &GroundState, binding: &Binding) -> Result<bool> {
    eval_with_action(f, s, binding, None)
}

/// Evaluation with an action in scope for `a = name(args)` atoms.
pub fn eval_with_action(
    f: &Formula,
    s: &GroundState,
    binding: &Binding,
    action: Option<&GroundAction>,
) -> Result<bool> {
    let mut ev = Evaluator {
        state: s,
        action,
        env: binding.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
    };
    ev.eval(f)
}

/// Evaluate with every unbound free variable read existentially.
pub fn eval_closed(f: &Formula, s: &GroundState, binding: &Binding) -> Result<bool> {
    let open: Vec<Var> = f
        .free_vars()
        .into_iter()
        .filter(|v| !binding.contains_key(v))
        .collect();
    if open.is_empty() {
        return eval_in_state(f, s, binding);
    }
    eval_in_state(&Formula::exists(open, f.clone()), s, binding)
}

/// All extensions of `partial` over `vars` that satisfy `f`, in
/// lexicographic order of object names taken in the order of `vars`.
pub fn satisfying_bindings(
    f: &Formula,
    s: &GroundState,
    partial: &Binding,
    vars: &[Var],
) -> Result<Vec<Binding>> {
    for v in f.free_vars() {
        if !partial.contains_key(&v) && !vars.contains(&v) {
            return Err(Error::UnboundVariable(v.name.to_string()));
        }
    }
    let mut out = Vec::new();
    let mut cur = partial.clone();
    enumerate(f, s, vars, &mut cur, &mut out)?;
    Ok(out)
}

fn enumerate(
    f: &Formula,
    s: &GroundState,
    vars: &[Var],
    cur: &mut Binding,
    out: &mut Vec<Binding>,
) -> Result<()> {
    let Some((v, rest)) = vars.split_first() else {
        if eval_in_state(f, s, cur)? {
            out.push(cur.clone());
        }
        return Ok(());
    };
    for o in s.objects(&v.ty) {
        cur.insert(v.clone(), o.clone());
        enumerate(f, s, rest, cur, out)?;
    }
    cur.remove(v);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::formula::sym;
    use crate::logic::parse::parse_formula;

    fn state(atoms: &[GroundAtom]) -> GroundState {
        let mut u = Universe::new();
        u.insert(sym("object"), vec![sym("a"), sym("b")]);
        GroundState::new(atoms.iter().cloned().collect(), Arc::new(u))
    }

    #[test]
    fn existential_bindings() {
        let s = state(&[GroundAtom::new("P", &["a"])]);
        let f = parse_formula("P(x)").unwrap();
        let x = Var::new("x", "object");
        let bs = satisfying_bindings(&f, &s, &Binding::new(), &[x.clone()]).unwrap();
        assert_eq!(bs.len(), 1);
        assert_eq!(&*bs[0][&x], "a");
        let e = parse_formula("exists x. P(x)").unwrap();
        assert!(eval_in_state(&e, &s, &Binding::new()).unwrap());
    }

    #[test]
    fn universal_fails_when_one_object_misses() {
        let s = state(&[GroundAtom::new("P", &["a"])]);
        let f = parse_formula("forall x. P(x)").unwrap();
        assert!(!eval_in_state(&f, &s, &Binding::new()).unwrap());
    }

    #[test]
    fn tautology_holds_in_empty_state() {
        let s = state(&[]);
        let f = parse_formula("(exists x. P(x)) | !(exists x. P(x))").unwrap();
        assert!(eval_in_state(&f, &s, &Binding::new()).unwrap());
    }

    #[test]
    fn unbound_variable_is_an_error() {
        let s = state(&[]);
        let f = parse_formula("P(x)").unwrap();
        assert!(matches!(
            eval_in_state(&f, &s, &Binding::new()),
            Err(Error::UnboundVariable(_))
        ));
        assert!(satisfying_bindings(&f, &s, &Binding::new(), &[]).is_err());
    }
}
