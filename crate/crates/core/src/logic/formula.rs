use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// Interned-ish symbol: cheap to clone, ordered by string content.
pub type Sym = Arc<str>;

pub fn sym(s: &str) -> Sym {
    Arc::from(s)
}

/// Type given to variables whose type cannot be inferred.
pub const DEFAULT_TYPE: &str = "object";

/// A typed variable. Two variables are the same only if name and type agree.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub name: Sym,
    pub ty: Sym,
}

impl Var {
    pub fn new(name: &str, ty: &str) -> Var {
        Var {
            name: sym(name),
            ty: sym(ty),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Var),
    Const { name: Sym, ty: Sym },
}

impl Term {
    pub fn var(name: &str, ty: &str) -> Term {
        Term::Var(Var::new(name, ty))
    }

    pub fn constant(name: &str, ty: &str) -> Term {
        Term::Const {
            name: sym(name),
            ty: sym(ty),
        }
    }

    pub fn ty(&self) -> &Sym {
        match self {
            Term::Var(v) => &v.ty,
            Term::Const { ty, .. } => ty,
        }
    }

    pub fn name(&self) -> &Sym {
        match self {
            Term::Var(v) => &v.name,
            Term::Const { name, .. } => name,
        }
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const { .. } => None,
        }
    }
}

/// First-order state formula. Situation arguments are implicit.
///
/// The variant order is the canonical node-kind rank used when sorting
/// conjuncts and disjuncts.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Atom { pred: Sym, args: Vec<Term> },
    Eq(Term, Term),
    /// `a = name(args)`: only meaningful inside successor-state axiom bodies.
    ActionEq { name: Sym, args: Vec<Term> },
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(Vec<Var>, Box<Formula>),
    Forall(Vec<Var>, Box<Formula>),
}

impl Formula {
    pub fn atom(pred: &str, args: Vec<Term>) -> Formula {
        Formula::Atom {
            pred: sym(pred),
            args,
        }
    }

    pub fn prop(pred: &str) -> Formula {
        Formula::atom(pred, Vec::new())
    }

    pub fn negate(self) -> Formula {
        match self {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(inner) => *inner,
            other => Formula::Not(Box::new(other)),
        }
    }

    pub fn and(parts: Vec<Formula>) -> Formula {
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    pub fn or(parts: Vec<Formula>) -> Formula {
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    pub fn implies(lhs: Formula, rhs: Formula) -> Formula {
        Formula::Implies(Box::new(lhs), Box::new(rhs))
    }

    pub fn exists(vars: Vec<Var>, body: Formula) -> Formula {
        if vars.is_empty() {
            body
        } else {
            Formula::Exists(vars, Box::new(body))
        }
    }

    pub fn forall(vars: Vec<Var>, body: Formula) -> Formula {
        if vars.is_empty() {
            body
        } else {
            Formula::Forall(vars, Box::new(body))
        }
    }

    pub fn is_literal(&self) -> bool {
        match self {
            Formula::Atom { .. } | Formula::Eq(..) | Formula::ActionEq { .. } => true,
            Formula::Not(inner) => matches!(
                **inner,
                Formula::Atom { .. } | Formula::Eq(..) | Formula::ActionEq { .. }
            ),
            _ => false,
        }
    }

    /// Number of nodes, used to pick the smaller of equivalent rewrites.
    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::False => 1,
            Formula::Atom { args, .. } | Formula::ActionEq { args, .. } => 1 + args.len(),
            Formula::Eq(..) => 3,
            Formula::Not(f) => 1 + f.size(),
            Formula::And(fs) | Formula::Or(fs) => 1 + fs.iter().map(Formula::size).sum::<usize>(),
            Formula::Implies(a, b) => 1 + a.size() + b.size(),
            Formula::Exists(vs, b) | Formula::Forall(vs, b) => 1 + vs.len() + b.size(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        collect_free(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn has_free_var(&self, v: &Var) -> bool {
        self.free_vars().contains(v)
    }

    /// Constants mentioned anywhere, as (name, type).
    pub fn constants(&self) -> BTreeSet<(Sym, Sym)> {
        let mut out = BTreeSet::new();
        self.visit_terms(&mut |t| {
            if let Term::Const { name, ty } = t {
                out.insert((name.clone(), ty.clone()));
            }
        });
        out
    }

    /// Every type mentioned by a variable or constant.
    pub fn types(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.visit_terms(&mut |t| {
            out.insert(t.ty().clone());
        });
        self.visit_binders(&mut |v| {
            out.insert(v.ty.clone());
        });
        out
    }

    pub fn predicates(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let Formula::Atom { pred, .. } = f {
                out.insert(pred.clone());
            }
        });
        out
    }

    pub fn visit(&self, f: &mut impl FnMut(&Formula)) {
        f(self);
        match self {
            Formula::Not(g) => g.visit(f),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| g.visit(f)),
            Formula::Implies(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Formula::Exists(_, b) | Formula::Forall(_, b) => b.visit(f),
            _ => {}
        }
    }

    fn visit_terms(&self, f: &mut impl FnMut(&Term)) {
        self.visit(&mut |node| match node {
            Formula::Atom { args, .. } | Formula::ActionEq { args, .. } => args.iter().for_each(&mut *f),
            Formula::Eq(a, b) => {
                f(a);
                f(b);
            }
            _ => {}
        });
    }

    fn visit_binders(&self, f: &mut impl FnMut(&Var)) {
        self.visit(&mut |node| {
            if let Formula::Exists(vs, _) | Formula::Forall(vs, _) = node {
                vs.iter().for_each(&mut *f);
            }
        });
    }

    /// Capture-avoiding substitution of free variables.
    pub fn substitute(&self, map: &BTreeMap<Var, Term>) -> Formula {
        if map.is_empty() {
            return self.clone();
        }
        let sub_term = |t: &Term| -> Term {
            match t {
                Term::Var(v) => map.get(v).cloned().unwrap_or_else(|| t.clone()),
                c => c.clone(),
            }
        };
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Atom { pred, args } => Formula::Atom {
                pred: pred.clone(),
                args: args.iter().map(sub_term).collect(),
            },
            Formula::ActionEq { name, args } => Formula::ActionEq {
                name: name.clone(),
                args: args.iter().map(sub_term).collect(),
            },
            Formula::Eq(a, b) => Formula::Eq(sub_term(a), sub_term(b)),
            Formula::Not(g) => Formula::Not(Box::new(g.substitute(map))),
            Formula::And(gs) => Formula::And(gs.iter().map(|g| g.substitute(map)).collect()),
            Formula::Or(gs) => Formula::Or(gs.iter().map(|g| g.substitute(map)).collect()),
            Formula::Implies(a, b) => {
                Formula::Implies(Box::new(a.substitute(map)), Box::new(b.substitute(map)))
            }
            Formula::Exists(vs, body) | Formula::Forall(vs, body) => {
                let (vs, inner) = substitute_under_binder(vs, body, map);
                if matches!(self, Formula::Exists(..)) {
                    Formula::Exists(vs, Box::new(inner))
                } else {
                    Formula::Forall(vs, Box::new(inner))
                }
            }
        }
    }

    /// Replace constants by other terms (used for goal substitution).
    pub fn replace_constants(&self, map: &BTreeMap<Sym, Term>) -> Formula {
        let rep = |t: &Term| -> Term {
            match t {
                Term::Const { name, .. } => map.get(name).cloned().unwrap_or_else(|| t.clone()),
                v => v.clone(),
            }
        };
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Atom { pred, args } => Formula::Atom {
                pred: pred.clone(),
                args: args.iter().map(rep).collect(),
            },
            Formula::ActionEq { name, args } => Formula::ActionEq {
                name: name.clone(),
                args: args.iter().map(rep).collect(),
            },
            Formula::Eq(a, b) => Formula::Eq(rep(a), rep(b)),
            Formula::Not(g) => Formula::Not(Box::new(g.replace_constants(map))),
            Formula::And(gs) => Formula::And(gs.iter().map(|g| g.replace_constants(map)).collect()),
            Formula::Or(gs) => Formula::Or(gs.iter().map(|g| g.replace_constants(map)).collect()),
            Formula::Implies(a, b) => Formula::Implies(
                Box::new(a.replace_constants(map)),
                Box::new(b.replace_constants(map)),
            ),
            Formula::Exists(vs, b) => Formula::Exists(vs.clone(), Box::new(b.replace_constants(map))),
            Formula::Forall(vs, b) => Formula::Forall(vs.clone(), Box::new(b.replace_constants(map))),
        }
    }
}

fn collect_free(f: &Formula, bound: &mut Vec<Var>, out: &mut BTreeSet<Var>) {
    let term = |t: &Term, bound: &Vec<Var>, out: &mut BTreeSet<Var>| {
        if let Term::Var(v) = t {
            if !bound.contains(v) {
                out.insert(v.clone());
            }
        }
    };
    match f {
        Formula::True | Formula::False => {}
        Formula::Atom { args, .. } | Formula::ActionEq { args, .. } => {
            args.iter().for_each(|t| term(t, bound, out))
        }
        Formula::Eq(a, b) => {
            term(a, bound, out);
            term(b, bound, out);
        }
        Formula::Not(g) => collect_free(g, bound, out),
        Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| collect_free(g, bound, out)),
        Formula::Implies(a, b) => {
            collect_free(a, bound, out);
            collect_free(b, bound, out);
        }
        Formula::Exists(vs, b) | Formula::Forall(vs, b) => {
            let n = bound.len();
            bound.extend(vs.iter().cloned());
            collect_free(b, bound, out);
            bound.truncate(n);
        }
    }
}

fn substitute_under_binder(
    vs: &[Var],
    body: &Formula,
    map: &BTreeMap<Var, Term>,
) -> (Vec<Var>, Formula) {
    let mut inner: BTreeMap<Var, Term> = map
        .iter()
        .filter(|(k, _)| !vs.contains(k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    if inner.is_empty() {
        return (vs.to_vec(), body.clone());
    }
    // names that a renamed binder must avoid
    let mut taken: BTreeSet<Sym> = inner
        .values()
        .filter_map(|t| t.as_var().map(|v| v.name.clone()))
        .collect();
    taken.extend(body.free_vars().into_iter().map(|v| v.name));
    taken.extend(vs.iter().map(|v| v.name.clone()));
    let range_names: BTreeSet<Sym> = inner
        .values()
        .filter_map(|t| t.as_var().map(|v| v.name.clone()))
        .collect();
    let mut new_vs = Vec::with_capacity(vs.len());
    for v in vs {
        if range_names.contains(&v.name) {
            let fresh = fresh_name(&v.name, &taken);
            taken.insert(fresh.clone());
            let nv = Var {
                name: fresh,
                ty: v.ty.clone(),
            };
            inner.insert(v.clone(), Term::Var(nv.clone()));
            new_vs.push(nv);
        } else {
            new_vs.push(v.clone());
        }
    }
    (new_vs, body.substitute(&inner))
}

pub(crate) fn fresh_name(base: &str, taken: &BTreeSet<Sym>) -> Sym {
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit());
    let stem = if stem.is_empty() { "v" } else { stem };
    (1..)
        .map(|k| sym(&format!("{stem}{k}")))
        .find(|n| !taken.contains(n))
        .unwrap()
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.ty)
    }
}

// Precedence levels for printing: higher binds tighter.
const PREC_IMPLIES: u8 = 1;
const PREC_OR: u8 = 2;
const PREC_AND: u8 = 3;
const PREC_NOT: u8 = 4;

fn write_args(f: &mut fmt::Formatter<'_>, name: &str, args: &[Term]) -> fmt::Result {
    f.write_str(name)?;
    if !args.is_empty() {
        f.write_str("(")?;
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")?;
    }
    Ok(())
}

fn write_formula(out: &mut fmt::Formatter<'_>, phi: &Formula, ctx: u8) -> fmt::Result {
    match phi {
        Formula::True => out.write_str("true"),
        Formula::False => out.write_str("false"),
        Formula::Atom { pred, args } => write_args(out, pred, args),
        Formula::Eq(a, b) => write!(out, "{a} = {b}"),
        Formula::ActionEq { name, args } => {
            out.write_str("a = ")?;
            write_args(out, name, args)
        }
        Formula::Not(inner) => match &**inner {
            Formula::Eq(a, b) => write!(out, "{a} != {b}"),
            Formula::ActionEq { name, args } => {
                out.write_str("a != ")?;
                write_args(out, name, args)
            }
            g => {
                out.write_str("!")?;
                write_formula(out, g, PREC_NOT)
            }
        },
        Formula::And(gs) | Formula::Or(gs) => {
            let (prec, op) = if matches!(phi, Formula::And(_)) {
                (PREC_AND, " & ")
            } else {
                (PREC_OR, " | ")
            };
            let paren = ctx > prec;
            if paren {
                out.write_str("(")?;
            }
            for (i, g) in gs.iter().enumerate() {
                if i > 0 {
                    out.write_str(op)?;
                }
                write_formula(out, g, prec + 1)?;
            }
            if paren {
                out.write_str(")")?;
            }
            Ok(())
        }
        Formula::Implies(a, b) => {
            let paren = ctx > PREC_IMPLIES;
            if paren {
                out.write_str("(")?;
            }
            write_formula(out, a, PREC_IMPLIES + 1)?;
            out.write_str(" -> ")?;
            write_formula(out, b, PREC_IMPLIES)?;
            if paren {
                out.write_str(")")?;
            }
            Ok(())
        }
        Formula::Exists(vs, b) | Formula::Forall(vs, b) => {
            let kw = if matches!(phi, Formula::Exists(..)) {
                "exists"
            } else {
                "forall"
            };
            // quantifier scope extends to the right, so bracket unless at top
            let paren = ctx > 0;
            if paren {
                out.write_str("(")?;
            }
            write!(out, "{kw} ")?;
            for (i, v) in vs.iter().enumerate() {
                if i > 0 {
                    out.write_str(", ")?;
                }
                write!(out, "{v}")?;
            }
            out.write_str(". ")?;
            write_formula(out, b, 0)?;
            if paren {
                out.write_str(")")?;
            }
            Ok(())
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self, 0)
    }
}
