//! Domain and instance file readers.
//!
//! ```text
//! domain logistics
//! types: truck, city
//! predicates: TAt(truck,city), Dst(truck,city) [static], Snow(city) [static]
//! action drive(t:truck, c1:city, c2:city)
//!   choice driveS prob { Snow(c1) : 0.6 ; !Snow(c1) : 0.9 }
//!   choice driveF prob { Snow(c1) : 0.4 ; !Snow(c1) : 0.1 }
//! end
//! ssa TAt(t,c) <=> (exists c1. TAt(t,c1) & a = driveS(t,c1,c)) | ...
//! reward any { ... }
//! universal forall t:truck. ... : 9 noop 10
//! discount 0.9
//! ```
//!
//! A brace-delimited case literal may span several lines. `#` starts a comment.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::{ActionTemplate, Choice, FomdpModel, UniversalReward, NOOP};
use crate::cases::Case;
use crate::error::{Error, ParseError, Result};
use crate::logic::{
    parse_formula_with, sym, Formula, GroundAtom, GroundState, ParseOptions, Reasoner, Signature,
    Sym, Universe, Var,
};
use crate::sitcalc::{ActionTheory, SuccessorStateAxiom};

struct Stmt {
    line: usize,
    text: String,
}

fn statements(text: &str) -> Result<Vec<Stmt>> {
    let mut out = Vec::new();
    let mut cur: Option<Stmt> = None;
    let mut depth = 0i32;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        if cur.is_none() && line.trim().is_empty() {
            continue;
        }
        // A line opening with a connective continues the previous statement.
        let t = line.trim_start();
        if cur.is_none() && ["|", "&", "->", "<=>"].iter().any(|op| t.starts_with(op)) {
            if let Some(prev) = out.pop() {
                cur = Some(prev);
            }
        }
        depth += line.matches('{').count() as i32 - line.matches('}').count() as i32;
        match &mut cur {
            Some(s) => {
                s.text.push(' ');
                s.text.push_str(line.trim());
            }
            None => {
                cur = Some(Stmt {
                    line: i + 1,
                    text: line.trim().to_string(),
                })
            }
        }
        if depth < 0 {
            return Err(ParseError::new(i + 1, 1, "unbalanced `}`").into());
        }
        if depth == 0 {
            out.push(cur.take().unwrap());
        }
    }
    if let Some(s) = cur {
        return Err(ParseError::new(s.line, 1, "unterminated `{`").into());
    }
    Ok(out)
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    ParseError::new(line, 1, msg).into()
}

/// Shift a parse error inside a statement to file coordinates.
fn at(line: usize) -> impl Fn(ParseError) -> Error {
    move |e| ParseError::new(line + e.line - 1, e.col, e.message).into()
}

/// Split on `sep` outside parentheses.
fn split_top(s: &str, sep: char) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if c == sep && depth == 0 {
            out.push(cur.trim().to_string());
            cur.clear();
        } else {
            cur.push(c);
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn ident_ok(s: &str) -> bool {
    let mut cs = s.chars();
    cs.next().is_some_and(|c| c.is_ascii_alphabetic())
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// `name(a, b)` → ("name", ["a","b"]); `name` → ("name", []).
fn head_args(s: &str, line: usize) -> Result<(String, Vec<String>)> {
    let s = s.trim();
    match s.find('(') {
        None => {
            if !ident_ok(s) {
                return Err(err(line, format!("bad identifier `{s}`")));
            }
            Ok((s.to_string(), Vec::new()))
        }
        Some(i) => {
            if !s.ends_with(')') {
                return Err(err(line, format!("expected `)` in `{s}`")));
            }
            let name = s[..i].trim().to_string();
            if !ident_ok(&name) {
                return Err(err(line, format!("bad identifier `{name}`")));
            }
            let args = split_top(&s[i + 1..s.len() - 1], ',');
            Ok((name, args))
        }
    }
}

/// `{ f : v ; ... }` → pairs of formula text and value.
fn case_literal(s: &str, line: usize) -> Result<Vec<(String, f64)>> {
    let s = s.trim();
    if !s.starts_with('{') || !s.ends_with('}') {
        return Err(err(line, "expected a case literal `{ formula : value ; ... }`"));
    }
    let mut out = Vec::new();
    for part in s[1..s.len() - 1].split(';') {
        if part.trim().is_empty() {
            continue;
        }
        let k = part
            .rfind(':')
            .ok_or_else(|| err(line, format!("partition `{}` has no value", part.trim())))?;
        let v: f64 = part[k + 1..]
            .trim()
            .parse()
            .map_err(|_| err(line, format!("bad value `{}`", part[k + 1..].trim())))?;
        if !v.is_finite() {
            return Err(err(line, "values must be finite"));
        }
        out.push((part[..k].trim().to_string(), v));
    }
    Ok(out)
}

fn parse_case(
    text: &str,
    line: usize,
    opts: &ParseOptions<'_>,
    r: &Reasoner,
) -> Result<Case> {
    let pairs = case_literal(text, line)?
        .into_iter()
        .map(|(f, v)| Ok((parse_formula_with(&f, opts).map_err(at(line))?, v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Case::from_pairs(pairs, r))
}

fn typed_params(args: &[String], sig: &Signature, line: usize) -> Result<Vec<Var>> {
    args.iter()
        .map(|a| {
            let (n, t) = a
                .split_once(':')
                .ok_or_else(|| err(line, format!("parameter `{a}` needs a type")))?;
            let (n, t) = (n.trim(), t.trim());
            if !sig.types.contains(t) {
                return Err(err(line, format!("unknown type `{t}`")));
            }
            Ok(Var::new(n, t))
        })
        .collect()
}

struct PendingAction {
    line: usize,
    name: String,
    params: Vec<Var>,
    choices: Vec<(usize, String, String)>,
}

/// Parse a domain file.
pub fn parse_domain(text: &str) -> Result<FomdpModel> {
    parse_domain_with(text, Reasoner::default())
}

pub fn parse_domain_with(text: &str, reasoner: Reasoner) -> Result<FomdpModel> {
    let stmts = statements(text)?;
    let mut name = String::from("unnamed");
    let mut sig = Signature::new();
    let mut actions: Vec<PendingAction> = Vec::new();
    let mut open: Option<PendingAction> = None;
    let mut ssas: Vec<(usize, String)> = Vec::new();
    let mut rewards: Vec<(usize, String, String)> = Vec::new();
    let mut universal: Option<(usize, String)> = None;
    let mut discount: Option<f64> = None;

    for st in &stmts {
        let (kw, rest) = match st.text.find(|c: char| c.is_whitespace() || c == ':') {
            Some(i) => (&st.text[..i], st.text[i..].trim_start()),
            None => (st.text.as_str(), ""),
        };
        let rest_after_colon = rest.strip_prefix(':').unwrap_or(rest).trim();
        if let Some(act) = &mut open {
            match kw {
                "choice" => {
                    let (n, lit) = rest
                        .split_once("prob")
                        .ok_or_else(|| err(st.line, "expected `choice <name> prob { ... }`"))?;
                    act.choices.push((st.line, n.trim().to_string(), lit.trim().to_string()));
                    continue;
                }
                "end" => {
                    actions.push(open.take().unwrap());
                    continue;
                }
                _ => return Err(err(st.line, format!("expected `choice` or `end`, found `{kw}`"))),
            }
        }
        match kw {
            "domain" => name = rest.to_string(),
            "types" => {
                for t in split_top(rest_after_colon, ',') {
                    if !ident_ok(&t) {
                        return Err(err(st.line, format!("bad type name `{t}`")));
                    }
                    sig.types.insert(sym(&t));
                }
            }
            "predicates" => {
                for item in split_top(rest_after_colon, ',') {
                    let (decl, is_static) = match item.strip_suffix("[static]") {
                        Some(d) => (d.trim().to_string(), true),
                        None => (item.clone(), false),
                    };
                    let (p, args) = head_args(&decl, st.line)?;
                    if sig.predicate(&p).is_some() {
                        return Err(err(st.line, format!("predicate `{p}` declared twice")));
                    }
                    let args: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
                    sig.add_predicate(&p, &args, is_static);
                }
            }
            "constants" => {
                for item in split_top(rest_after_colon, ',') {
                    let (c, t) = item
                        .split_once(':')
                        .ok_or_else(|| err(st.line, format!("constant `{item}` needs a type")))?;
                    sig.add_constant(c.trim(), t.trim());
                }
            }
            "action" => {
                let (n, args) = head_args(rest, st.line)?;
                if n == NOOP {
                    return Err(err(st.line, "`noop` is implicit"));
                }
                open = Some(PendingAction {
                    line: st.line,
                    name: n,
                    params: typed_params(&args, &sig, st.line)?,
                    choices: Vec::new(),
                });
            }
            "ssa" => ssas.push((st.line, rest.to_string())),
            "reward" => {
                let (target, lit) = rest
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| err(st.line, "expected `reward <action|noop|any> { ... }`"))?;
                rewards.push((st.line, target.to_string(), lit.trim().to_string()));
            }
            "universal" => universal = Some((st.line, rest.to_string())),
            "discount" => {
                discount = Some(
                    rest.parse()
                        .map_err(|_| err(st.line, format!("bad discount `{rest}`")))?,
                )
            }
            other => return Err(err(st.line, format!("unknown statement `{other}`"))),
        }
    }
    if let Some(a) = open {
        return Err(err(a.line, format!("action `{}` has no `end`", a.name)));
    }

    let mut theory = ActionTheory {
        signature: sig.clone(),
        ..Default::default()
    };
    theory.actions.insert(sym(NOOP), Vec::new());
    let mut templates = Vec::new();
    for a in &actions {
        let opts = ParseOptions {
            signature: Some(&sig),
            free: a.params.clone(),
            action_var: false,
        };
        let mut choices = Vec::new();
        for (line, cname, lit) in &a.choices {
            if theory.actions.contains_key(cname.as_str()) {
                return Err(err(*line, format!("choice `{cname}` declared twice")));
            }
            theory
                .actions
                .insert(sym(cname), a.params.iter().map(|v| v.ty.clone()).collect());
            choices.push(Choice {
                name: sym(cname),
                prob: parse_case(lit, *line, &opts, &reasoner)?,
            });
        }
        if choices.is_empty() {
            return Err(err(a.line, format!("action `{}` has no choices", a.name)));
        }
        templates.push(ActionTemplate {
            name: sym(&a.name),
            params: a.params.clone(),
            choices,
        });
    }
    templates.push(ActionTemplate {
        name: sym(NOOP),
        params: Vec::new(),
        choices: vec![Choice {
            name: sym(NOOP),
            prob: Case::constant(1.0),
        }],
    });
    templates.sort_by(|a, b| a.name.cmp(&b.name));
    for w in templates.windows(2) {
        if w[0].name == w[1].name {
            return Err(Error::Model(format!("action `{}` declared twice", w[0].name)));
        }
    }

    for (line, text) in &ssas {
        let (lhs, body) = text
            .split_once("<=>")
            .ok_or_else(|| err(*line, "expected `ssa F(x,..) <=> formula`"))?;
        let (fluent, args) = head_args(lhs, *line)?;
        let decl = sig
            .predicate(&fluent)
            .ok_or_else(|| err(*line, format!("unknown fluent `{fluent}`")))?;
        if decl.is_static {
            return Err(err(*line, format!("`{fluent}` is static and takes no axiom")));
        }
        if decl.arg_types.len() != args.len() {
            return Err(Error::Arity {
                name: fluent,
                expected: decl.arg_types.len(),
                found: args.len(),
            });
        }
        let params: Vec<Var> = args
            .iter()
            .zip(&decl.arg_types)
            .map(|(a, ty)| Var::new(a.split(':').next().unwrap().trim(), ty))
            .collect();
        let opts = ParseOptions {
            signature: Some(&sig),
            free: params.clone(),
            action_var: true,
        };
        let body = parse_formula_with(body, &opts).map_err(at(*line))?;
        check_action_atoms(&body, &theory, *line)?;
        if theory.ssas.contains_key(fluent.as_str()) {
            return Err(err(*line, format!("second axiom for `{fluent}`")));
        }
        theory.add_ssa(SuccessorStateAxiom {
            fluent: sym(&fluent),
            params,
            body,
        });
    }

    let mut reward_map: BTreeMap<Sym, Vec<Case>> = BTreeMap::new();
    for (line, target, lit) in &rewards {
        let targets: Vec<&ActionTemplate> = if target == "any" {
            templates.iter().collect()
        } else {
            vec![templates
                .iter()
                .find(|t| &*t.name == target.as_str())
                .ok_or_else(|| err(*line, format!("reward for unknown action `{target}`")))?]
        };
        for t in targets {
            let opts = ParseOptions {
                signature: Some(&sig),
                free: t.params.clone(),
                action_var: false,
            };
            let c = parse_case(lit, *line, &opts, &reasoner)?;
            reward_map.entry(t.name.clone()).or_default().push(c);
        }
    }

    let universal = match universal {
        None => None,
        Some((line, text)) => Some(parse_universal(&text, line, &sig)?),
    };

    let model = FomdpModel {
        name,
        theory,
        templates,
        rewards: reward_map,
        universal,
        discount: discount.unwrap_or(0.9),
        reasoner,
    };
    model.validate()?;
    Ok(model)
}

fn check_action_atoms(f: &Formula, theory: &ActionTheory, line: usize) -> Result<()> {
    let mut bad = None;
    f.visit(&mut |g| {
        if let Formula::ActionEq { name, args } = g {
            match theory.actions.get(name) {
                None => bad = Some(err(line, format!("`{name}` is not a declared choice"))),
                Some(tys) if tys.len() != args.len() => {
                    bad = Some(Error::Arity {
                        name: name.to_string(),
                        expected: tys.len(),
                        found: args.len(),
                    })
                }
                _ => {}
            }
        }
    });
    bad.map_or(Ok(()), Err)
}

/// `forall y:t. G(y) : value [noop value]`
fn parse_universal(text: &str, line: usize, sig: &Signature) -> Result<UniversalReward> {
    let k = text
        .rfind(':')
        .ok_or_else(|| err(line, "expected `universal <forall formula> : value [noop value]`"))?;
    let vals: Vec<&str> = text[k + 1..].split_whitespace().collect();
    let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| err(line, format!("bad value `{s}`"))) };
    let (value, noop_value) = match vals.as_slice() {
        [v] => (num(v)?, num(v)?),
        [v, "noop", n] => (num(v)?, num(n)?),
        _ => return Err(err(line, "expected `: value` or `: value noop value`")),
    };
    let opts = ParseOptions {
        signature: Some(sig),
        ..Default::default()
    };
    let f = parse_formula_with(&text[..k], &opts).map_err(at(line))?;
    let mut vars = Vec::new();
    let mut body = f;
    while let Formula::Forall(vs, b) = body {
        vars.extend(vs);
        body = *b;
    }
    if vars.is_empty() {
        return Err(Error::Model("universal reward must start with `forall`".into()));
    }
    let free = body.free_vars();
    if free != vars.iter().cloned().collect::<BTreeSet<_>>() {
        return Err(Error::Model(
            "universal reward body must be free in exactly its quantified variables".into(),
        ));
    }
    Ok(UniversalReward {
        vars,
        body,
        value,
        noop_value,
    })
}

/// Objects, initial state and goal bindings for one ground problem.
#[derive(Clone, Debug)]
pub struct Instance {
    pub universe: Arc<Universe>,
    pub init: GroundState,
    pub goals: Vec<Vec<Sym>>,
}

pub fn parse_instance(text: &str, model: &FomdpModel) -> Result<Instance> {
    let sig = &model.theory.signature;
    let mut universe = Universe::new();
    let mut init_text: Option<(usize, String)> = None;
    let mut goals: Vec<Vec<Sym>> = Vec::new();
    for st in statements(text)? {
        let (kw, rest) = st
            .text
            .split_once(':')
            .ok_or_else(|| err(st.line, "expected `objects:`, `init:` or `goal:`"))?;
        let rest = rest.trim();
        match kw.trim() {
            "objects" => {
                let (ty, set) = rest
                    .split_once('=')
                    .ok_or_else(|| err(st.line, "expected `objects: <type> = {a,b}`"))?;
                let ty = ty.trim();
                if !sig.types.contains(ty) {
                    return Err(err(st.line, format!("unknown type `{ty}`")));
                }
                let objs = braces(set, st.line)?;
                let entry = universe.entry(sym(ty)).or_default();
                for o in split_top(&objs, ',') {
                    if !ident_ok(&o) {
                        return Err(err(st.line, format!("bad object name `{o}`")));
                    }
                    entry.push(sym(&o));
                }
                entry.sort();
                entry.dedup();
            }
            "init" => init_text = Some((st.line, braces(rest, st.line)?)),
            "goal" => {
                for g in split_top(&braces(rest, st.line)?, ',') {
                    let g = g.trim_start_matches('(').trim_end_matches(')');
                    goals.push(split_top(g, ',').iter().map(|s| sym(s)).collect());
                }
            }
            other => return Err(err(st.line, format!("unknown statement `{other}`"))),
        }
    }
    for (name, ty) in &sig.constants {
        let e = universe.entry(ty.clone()).or_default();
        if !e.contains(name) {
            e.push(name.clone());
            e.sort();
        }
    }
    for t in &sig.types {
        universe.entry(t.clone()).or_default();
    }
    let owner = |o: &str| -> Option<&Sym> {
        universe
            .iter()
            .find(|(_, objs)| objs.iter().any(|x| &**x == o))
            .map(|(t, _)| t)
    };
    let mut atoms = BTreeSet::new();
    if let Some((line, text)) = init_text {
        for a in split_top(&text, ',') {
            let (p, args) = head_args(&a, line)?;
            let decl = sig
                .predicate(&p)
                .ok_or_else(|| err(line, format!("unknown predicate `{p}`")))?;
            if decl.arg_types.len() != args.len() {
                return Err(Error::Arity {
                    name: p,
                    expected: decl.arg_types.len(),
                    found: args.len(),
                });
            }
            for (o, ty) in args.iter().zip(&decl.arg_types) {
                if owner(o) != Some(ty) {
                    return Err(Error::TypeMismatch(format!("`{o}` is not a {ty} in `{a}`")));
                }
            }
            atoms.insert(GroundAtom {
                pred: sym(&p),
                args: args.iter().map(|s| sym(s)).collect(),
            });
        }
    }
    if let Some(u) = &model.universal {
        for g in &goals {
            if g.len() != u.vars.len() {
                return Err(Error::Arity {
                    name: "goal".into(),
                    expected: u.vars.len(),
                    found: g.len(),
                });
            }
            for (o, v) in g.iter().zip(&u.vars) {
                if owner(o) != Some(&v.ty) {
                    return Err(Error::TypeMismatch(format!("goal object `{o}` is not a {}", v.ty)));
                }
            }
        }
    }
    let universe = Arc::new(universe);
    Ok(Instance {
        init: GroundState::new(atoms, universe.clone()),
        universe,
        goals,
    })
}

fn braces(s: &str, line: usize) -> Result<String> {
    let s = s.trim();
    if !s.starts_with('{') || !s.ends_with('}') {
        return Err(err(line, "expected `{ ... }`"));
    }
    Ok(s[1..s.len() - 1].to_string())
}
