//! Canonical forms: negation normal form, flattening, sorting, equality
//! elimination and level-based renaming of bound variables.

use std::collections::BTreeMap;

use super::formula::{sym, Formula, Term, Var};

/// Negation normal form. Implications are eliminated.
pub fn nnf(f: &Formula) -> Formula {
    nnf_pol(f, false)
}

fn nnf_pol(f: &Formula, neg: bool) -> Formula {
    match f {
        Formula::True => {
            if neg {
                Formula::False
            } else {
                Formula::True
            }
        }
        Formula::False => {
            if neg {
                Formula::True
            } else {
                Formula::False
            }
        }
        Formula::Atom { .. } | Formula::Eq(..) | Formula::ActionEq { .. } => {
            if neg {
                Formula::Not(Box::new(f.clone()))
            } else {
                f.clone()
            }
        }
        Formula::Not(g) => nnf_pol(g, !neg),
        Formula::And(gs) => {
            let parts = gs.iter().map(|g| nnf_pol(g, neg)).collect();
            if neg {
                Formula::Or(parts)
            } else {
                Formula::And(parts)
            }
        }
        Formula::Or(gs) => {
            let parts = gs.iter().map(|g| nnf_pol(g, neg)).collect();
            if neg {
                Formula::And(parts)
            } else {
                Formula::Or(parts)
            }
        }
        Formula::Implies(a, b) => {
            if neg {
                Formula::And(vec![nnf_pol(a, false), nnf_pol(b, true)])
            } else {
                Formula::Or(vec![nnf_pol(a, true), nnf_pol(b, false)])
            }
        }
        Formula::Exists(vs, b) => {
            let inner = Box::new(nnf_pol(b, neg));
            if neg {
                Formula::Forall(vs.clone(), inner)
            } else {
                Formula::Exists(vs.clone(), inner)
            }
        }
        Formula::Forall(vs, b) => {
            let inner = Box::new(nnf_pol(b, neg));
            if neg {
                Formula::Exists(vs.clone(), inner)
            } else {
                Formula::Forall(vs.clone(), inner)
            }
        }
    }
}

/// Canonical form: NNF, flattened sorted connectives, trivial equalities
/// decided, one-point quantifier elimination and bound variables renamed by
/// binding depth. Idempotent.
pub fn normalize(f: &Formula) -> Formula {
    let mut cur = canonical(&simplify(&nnf(f)));
    for _ in 0..16 {
        let next = canonical(&simplify(&cur));
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

fn simplify_eq(a: &Term, b: &Term) -> Formula {
    if a == b {
        return Formula::True;
    }
    if a.ty() != b.ty() {
        // typed universes are disjoint
        return Formula::False;
    }
    if let (Term::Const { .. }, Term::Const { .. }) = (a, b) {
        // unique names
        return Formula::False;
    }
    if a <= b {
        Formula::Eq(a.clone(), b.clone())
    } else {
        Formula::Eq(b.clone(), a.clone())
    }
}

fn complement(lit: &Formula) -> Option<Formula> {
    match lit {
        Formula::Not(inner) => Some((**inner).clone()),
        Formula::Atom { .. } | Formula::Eq(..) | Formula::ActionEq { .. } => {
            Some(Formula::Not(Box::new(lit.clone())))
        }
        _ => None,
    }
}

fn simplify_junction(is_and: bool, parts: Vec<Formula>) -> Formula {
    let (unit, zero) = if is_and {
        (Formula::True, Formula::False)
    } else {
        (Formula::False, Formula::True)
    };
    let mut out: Vec<Formula> = Vec::with_capacity(parts.len());
    for p in parts {
        match p {
            p if p == unit => {}
            p if p == zero => return zero,
            Formula::And(inner) if is_and => out.extend(inner),
            Formula::Or(inner) if !is_and => out.extend(inner),
            p => out.push(p),
        }
    }
    out.sort();
    out.dedup();
    for lit in out.iter().filter(|l| l.is_literal()) {
        if let Some(c) = complement(lit) {
            if out.binary_search(&c).is_ok() {
                return zero;
            }
        }
    }
    match out.len() {
        0 => unit,
        1 => out.pop().unwrap(),
        _ => {
            if is_and {
                Formula::And(out)
            } else {
                Formula::Or(out)
            }
        }
    }
}

/// Bottom-up simplification of an NNF formula.
fn simplify(f: &Formula) -> Formula {
    match f {
        Formula::True | Formula::False | Formula::Atom { .. } | Formula::ActionEq { .. } => {
            f.clone()
        }
        Formula::Eq(a, b) => simplify_eq(a, b),
        Formula::Not(g) => match simplify(g) {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(h) => *h,
            other => Formula::Not(Box::new(other)),
        },
        Formula::And(gs) => simplify_junction(true, gs.iter().map(simplify).collect()),
        Formula::Or(gs) => simplify_junction(false, gs.iter().map(simplify).collect()),
        Formula::Implies(a, b) => simplify(&nnf(&Formula::Implies(a.clone(), b.clone()))),
        Formula::Exists(vs, b) => simplify_quant(true, vs, &simplify(b)),
        Formula::Forall(vs, b) => simplify_quant(false, vs, &simplify(b)),
    }
}

fn simplify_quant(exists: bool, vs: &[Var], body: &Formula) -> Formula {
    let mut vars: Vec<Var> = vs.to_vec();
    let mut body = body.clone();
    // merge directly nested quantifiers of the same kind
    while let (Formula::Exists(inner, b), true) | (Formula::Forall(inner, b), false) = (&body, exists) {
        let inner = inner.clone();
        let b = (**b).clone();
        vars.retain(|v| !inner.contains(v));
        vars.extend(inner);
        body = b;
    }
    // one-point rule: Ex x. x = t & F  ==>  F[x := t]
    while let Some((v, t)) = find_point(exists, &vars, &body) {
        let mut map = BTreeMap::new();
        map.insert(v.clone(), t);
        body = simplify(&body.substitute(&map));
        vars.retain(|w| *w != v);
    }
    // Ex x. F where x occurs once, in a positive x = t: choose x := t
    while let Some((v, lit)) = vars
        .iter()
        .find_map(|v| lone_equality(exists, v, &body).map(|l| (v.clone(), l)))
    {
        let with = if exists { Formula::True } else { Formula::False };
        body = simplify(&replace_literal(&body, &v, &lit, &with));
        vars.retain(|w| *w != v);
    }
    let free = body.free_vars();
    vars.retain(|v| free.contains(v));
    if vars.is_empty() {
        return body;
    }
    match body {
        Formula::True | Formula::False => body,
        b => {
            if exists {
                Formula::Exists(vars, Box::new(b))
            } else {
                Formula::Forall(vars, Box::new(b))
            }
        }
    }
}

/// The single literal mentioning `v` when it is `v = t` (existential) or
/// `v != t` (universal) and `t` is visible at the quantifier.
fn lone_equality(exists: bool, v: &Var, body: &Formula) -> Option<Formula> {
    let mut found: Vec<(Formula, bool)> = Vec::new();
    let mut count = 0;
    occurrences(v, body, &mut Vec::new(), &mut count, &mut found);
    if count != 1 || found.len() != 1 {
        return None;
    }
    let (lit, visible) = found.pop()?;
    let ok = match (&lit, exists) {
        (Formula::Eq(..), true) => true,
        (Formula::Not(inner), false) => matches!(**inner, Formula::Eq(..)),
        _ => false,
    };
    (ok && visible).then_some(lit)
}

fn occurrences(v: &Var, f: &Formula, bound: &mut Vec<Var>, count: &mut usize, found: &mut Vec<(Formula, bool)>) {
    let mentions = |ts: &[Term]| ts.iter().filter(|t| t.as_var() == Some(v)).count();
    match f {
        Formula::True | Formula::False => {}
        Formula::Atom { args, .. } | Formula::ActionEq { args, .. } => *count += mentions(args),
        Formula::Eq(a, b) => eq_occurrence(v, f, a, b, bound, count, found),
        Formula::Not(g) => match &**g {
            Formula::Eq(a, b) => eq_occurrence(v, f, a, b, bound, count, found),
            _ => occurrences(v, g, bound, count, found),
        },
        Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| occurrences(v, g, bound, count, found)),
        Formula::Implies(a, b) => {
            // not NNF: give up
            *count += 2;
            occurrences(v, a, bound, count, found);
            occurrences(v, b, bound, count, found);
        }
        Formula::Exists(vs, b) | Formula::Forall(vs, b) => {
            if vs.contains(v) {
                return;
            }
            let n = bound.len();
            bound.extend(vs.iter().cloned());
            occurrences(v, b, bound, count, found);
            bound.truncate(n);
        }
    }
}

fn eq_occurrence(
    v: &Var,
    lit: &Formula,
    a: &Term,
    b: &Term,
    bound: &[Var],
    count: &mut usize,
    found: &mut Vec<(Formula, bool)>,
) {
    let other = match (a.as_var() == Some(v), b.as_var() == Some(v)) {
        (true, true) => {
            *count += 2;
            return;
        }
        (true, false) => b,
        (false, true) => a,
        (false, false) => return,
    };
    *count += 1;
    let visible = other.as_var().is_none_or(|w| !bound.contains(w));
    found.push((lit.clone(), visible));
}

/// Replaces the literal mentioning `v` outside any rebinding of `v`.
fn replace_literal(f: &Formula, v: &Var, lit: &Formula, with: &Formula) -> Formula {
    if f == lit {
        return with.clone();
    }
    match f {
        Formula::Not(g) => Formula::Not(Box::new(replace_literal(g, v, lit, with))),
        Formula::And(gs) => Formula::And(gs.iter().map(|g| replace_literal(g, v, lit, with)).collect()),
        Formula::Or(gs) => Formula::Or(gs.iter().map(|g| replace_literal(g, v, lit, with)).collect()),
        Formula::Exists(vs, b) if !vs.contains(v) => {
            Formula::Exists(vs.clone(), Box::new(replace_literal(b, v, lit, with)))
        }
        Formula::Forall(vs, b) if !vs.contains(v) => {
            Formula::Forall(vs.clone(), Box::new(replace_literal(b, v, lit, with)))
        }
        other => other.clone(),
    }
}

fn find_point(exists: bool, vars: &[Var], body: &Formula) -> Option<(Var, Term)> {
    let lits: Vec<&Formula> = match (body, exists) {
        (Formula::And(gs), true) | (Formula::Or(gs), false) => gs.iter().collect(),
        (g, _) => vec![g],
    };
    for lit in lits {
        let eq = match (lit, exists) {
            (Formula::Eq(a, b), true) => (a, b),
            (Formula::Not(inner), false) => match &**inner {
                Formula::Eq(a, b) => (a, b),
                _ => continue,
            },
            _ => continue,
        };
        for (x, t) in [(eq.0, eq.1), (eq.1, eq.0)] {
            if let Term::Var(v) = x {
                if vars.contains(v) && x != t && v.ty == *t.ty() {
                    return Some((v.clone(), t.clone()));
                }
            }
        }
    }
    None
}

/// Rename bound variables by binding depth and sort junctions.
/// Bound names start above every free `_k` so renaming cannot capture.
fn canonical(f: &Formula) -> Formula {
    let base = f
        .free_vars()
        .iter()
        .filter_map(|v| v.name.strip_prefix('_').and_then(|k| k.parse::<usize>().ok()))
        .map(|k| k + 1)
        .max()
        .unwrap_or(0);
    rename(f, &BTreeMap::new(), base)
}

fn rename(f: &Formula, map: &BTreeMap<Var, Var>, level: usize) -> Formula {
    let term = |t: &Term| match t {
        Term::Var(v) => map.get(v).map(|n| Term::Var(n.clone())).unwrap_or_else(|| t.clone()),
        c => c.clone(),
    };
    match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Atom { pred, args } => Formula::Atom {
            pred: pred.clone(),
            args: args.iter().map(term).collect(),
        },
        Formula::ActionEq { name, args } => Formula::ActionEq {
            name: name.clone(),
            args: args.iter().map(term).collect(),
        },
        Formula::Eq(a, b) => {
            let (a, b) = (term(a), term(b));
            if a <= b {
                Formula::Eq(a, b)
            } else {
                Formula::Eq(b, a)
            }
        }
        Formula::Not(g) => Formula::Not(Box::new(rename(g, map, level))),
        Formula::And(gs) | Formula::Or(gs) => {
            let mut parts: Vec<Formula> = gs.iter().map(|g| rename(g, map, level)).collect();
            parts.sort();
            parts.dedup();
            if matches!(f, Formula::And(_)) {
                Formula::And(parts)
            } else {
                Formula::Or(parts)
            }
        }
        Formula::Implies(a, b) => Formula::Implies(
            Box::new(rename(a, map, level)),
            Box::new(rename(b, map, level)),
        ),
        Formula::Exists(vs, b) | Formula::Forall(vs, b) => {
            let mut inner = map.clone();
            let mut new_vs = Vec::with_capacity(vs.len());
            for (i, v) in vs.iter().enumerate() {
                let nv = Var {
                    name: sym(&format!("_{}", level + i)),
                    ty: v.ty.clone(),
                };
                inner.insert(v.clone(), nv.clone());
                new_vs.push(nv);
            }
            let body = Box::new(rename(b, &inner, level + vs.len()));
            if matches!(f, Formula::Exists(..)) {
                Formula::Exists(new_vs, body)
            } else {
                Formula::Forall(new_vs, body)
            }
        }
    }
}

/// Push quantifiers inward as far as possible. Input must be in NNF.
pub fn miniscope(f: &Formula) -> Formula {
    match f {
        Formula::Not(g) => Formula::Not(Box::new(miniscope(g))),
        Formula::And(gs) => Formula::and(gs.iter().map(miniscope).collect()),
        Formula::Or(gs) => Formula::or(gs.iter().map(miniscope).collect()),
        Formula::Exists(vs, b) | Formula::Forall(vs, b) => {
            let exists = matches!(f, Formula::Exists(..));
            let mut body = miniscope(b);
            for v in vs.iter().rev() {
                body = push_quant(exists, v, &body);
            }
            body
        }
        other => other.clone(),
    }
}

fn push_quant(exists: bool, v: &Var, body: &Formula) -> Formula {
    if !body.has_free_var(v) {
        return body.clone();
    }
    let wrap = |b: Formula| {
        if exists {
            Formula::Exists(vec![v.clone()], Box::new(b))
        } else {
            Formula::Forall(vec![v.clone()], Box::new(b))
        }
    };
    match (body, exists) {
        // distributes
        (Formula::Or(gs), true) => Formula::or(gs.iter().map(|g| push_quant(exists, v, g)).collect()),
        (Formula::And(gs), false) => {
            Formula::and(gs.iter().map(|g| push_quant(exists, v, g)).collect())
        }
        // splits off independent parts
        (Formula::And(gs), true) | (Formula::Or(gs), false) => {
            let (with, without): (Vec<Formula>, Vec<Formula>) =
                gs.iter().cloned().partition(|g| g.has_free_var(v));
            if without.is_empty() {
                return wrap(body.clone());
            }
            let inner = if with.len() == 1 {
                push_quant(exists, v, &with[0])
            } else if exists {
                wrap(Formula::And(with))
            } else {
                wrap(Formula::Or(with))
            };
            let mut parts = without;
            parts.push(inner);
            if exists {
                Formula::and(parts)
            } else {
                Formula::or(parts)
            }
        }
        _ => wrap(body.clone()),
    }
}
