//! Text syntax for state formulae.
//!
//! ```text
//! formula  := implies
//! implies  := or ( "->" implies )?
//! or       := and ( "|" and )*
//! and      := unary ( "&" unary )*
//! unary    := "!" unary | quant | primary
//! quant    := ("exists" | "forall") decl ("," decl)* "." formula
//! decl     := ident ( ":" ident )?
//! primary  := "true" | "false" | "(" formula ")" | term ("=" | "!=") term | ident args?
//! ```
//!
//! Identifiers in term position resolve, in order, to an enclosing bound
//! variable, a caller-supplied free variable, a signature constant, or a
//! fresh free variable whose type is inferred from predicate positions.

use std::collections::BTreeMap;

use super::formula::{sym, Formula, Sym, Term, Var, DEFAULT_TYPE};
use super::signature::Signature;
use crate::error::ParseError;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Colon,
    Bang,
    Amp,
    Pipe,
    Arrow,
    EqSign,
    NotEq,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let start = (line, col);
        let push = |out: &mut Vec<Token>, tok| {
            out.push(Token {
                tok,
                line: start.0,
                col: start.1,
            })
        };
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_alphabetic() {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let word: String = chars[i..j].iter().collect();
            col += j - i;
            i = j;
            push(&mut out, Tok::Ident(word));
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let (tok, width) = match (c, two.as_str()) {
            (_, "->") => (Tok::Arrow, 2),
            (_, "!=") => (Tok::NotEq, 2),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            (',', _) => (Tok::Comma, 1),
            ('.', _) => (Tok::Dot, 1),
            (':', _) => (Tok::Colon, 1),
            ('!', _) => (Tok::Bang, 1),
            ('&', _) => (Tok::Amp, 1),
            ('|', _) => (Tok::Pipe, 1),
            ('=', _) => (Tok::EqSign, 1),
            _ => {
                return Err(ParseError::new(
                    line,
                    col,
                    format!("unexpected character `{c}`"),
                ))
            }
        };
        push(&mut out, tok);
        i += width;
        col += width;
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

#[derive(Clone, Debug)]
enum RawTerm {
    Ident(String, (usize, usize)),
    Func(String, Vec<RawTerm>, (usize, usize)),
}

#[derive(Clone, Debug)]
enum Raw {
    True,
    False,
    Pred(String, Vec<RawTerm>, (usize, usize)),
    Eq(RawTerm, RawTerm, bool),
    Not(Box<Raw>),
    And(Vec<Raw>),
    Or(Vec<Raw>),
    Implies(Box<Raw>, Box<Raw>),
    Quant(bool, Vec<(String, Option<String>, (usize, usize))>, Box<Raw>),
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        let what = match self.peek() {
            Tok::Eof => "end of input".to_string(),
            t => format!("{t:?}"),
        };
        ParseError::new(line, col, format!("{} (at {})", msg.into(), what))
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn formula(&mut self) -> Result<Raw, ParseError> {
        let lhs = self.disjunction()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.formula()?;
            return Ok(Raw::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Raw, ParseError> {
        let mut parts = vec![self.conjunction()?];
        while *self.peek() == Tok::Pipe {
            self.bump();
            parts.push(self.conjunction()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Raw::Or(parts)
        })
    }

    fn conjunction(&mut self) -> Result<Raw, ParseError> {
        let mut parts = vec![self.unary()?];
        while *self.peek() == Tok::Amp {
            self.bump();
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Raw::And(parts)
        })
    }

    fn unary(&mut self) -> Result<Raw, ParseError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(Raw::Not(Box::new(self.unary()?)))
            }
            Tok::Ident(k) if k == "exists" || k == "forall" => {
                self.bump();
                let mut decls = Vec::new();
                loop {
                    let at = self.here();
                    let name = self.ident("variable name")?;
                    let ty = if *self.peek() == Tok::Colon {
                        self.bump();
                        Some(self.ident("type name")?)
                    } else {
                        None
                    };
                    decls.push((name, ty, at));
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.expect(Tok::Dot, "`.` after quantified variables")?;
                let body = self.formula()?;
                Ok(Raw::Quant(k == "exists", decls, Box::new(body)))
            }
            _ => self.primary(),
        }
    }

    fn term(&mut self) -> Result<RawTerm, ParseError> {
        let at = self.here();
        let name = self.ident("term")?;
        if *self.peek() == Tok::LParen {
            let args = self.args()?;
            Ok(RawTerm::Func(name, args, at))
        } else {
            Ok(RawTerm::Ident(name, at))
        }
    }

    fn args(&mut self) -> Result<Vec<RawTerm>, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.term()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(args)
    }

    fn primary(&mut self) -> Result<Raw, ParseError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(k) if k == "true" => {
                self.bump();
                Ok(Raw::True)
            }
            Tok::Ident(k) if k == "false" => {
                self.bump();
                Ok(Raw::False)
            }
            Tok::Ident(_) => {
                let lhs = self.term()?;
                match self.peek() {
                    Tok::EqSign | Tok::NotEq => {
                        let neg = *self.peek() == Tok::NotEq;
                        self.bump();
                        let rhs = self.term()?;
                        Ok(Raw::Eq(lhs, rhs, neg))
                    }
                    _ => Ok(match lhs {
                        RawTerm::Ident(n, at) => Raw::Pred(n, Vec::new(), at),
                        RawTerm::Func(n, args, at) => Raw::Pred(n, args, at),
                    }),
                }
            }
            _ => Err(self.err("expected formula")),
        }
    }
}

/// Resolution context for identifiers.
#[derive(Clone, Debug, Default)]
pub struct ParseOptions<'a> {
    pub signature: Option<&'a Signature>,
    /// Free variables with known types (e.g. action parameters).
    pub free: Vec<Var>,
    /// Treat `a = name(args)` as an action-equality atom.
    pub action_var: bool,
}

/// Parse a formula without a signature: every term identifier is a variable.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    parse_formula_with(text, &ParseOptions::default())
}

pub fn parse_formula_with(text: &str, opts: &ParseOptions<'_>) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let raw = p.formula()?;
    if *p.peek() != Tok::Eof {
        return Err(p.err("unexpected trailing input"));
    }
    let mut r = Resolver {
        opts,
        bound: Vec::new(),
        free_types: BTreeMap::new(),
    };
    r.infer_free(&raw, &mut Vec::new());
    r.resolve(&raw)
}

struct Resolver<'a, 'b> {
    opts: &'a ParseOptions<'b>,
    bound: Vec<Var>,
    free_types: BTreeMap<String, Sym>,
}

impl Resolver<'_, '_> {
    fn is_constant(&self, name: &str) -> Option<Sym> {
        self.opts
            .signature
            .and_then(|s| s.constants.get(name).cloned())
    }

    fn known_free(&self, name: &str) -> Option<&Var> {
        self.opts.free.iter().find(|v| &*v.name == name)
    }

    // Collect types for unbound identifiers from predicate argument positions.
    fn infer_free(&mut self, raw: &Raw, shadow: &mut Vec<String>) {
        match raw {
            Raw::Pred(name, args, _) => {
                let Some(decl) = self.opts.signature.and_then(|s| s.predicate(name)) else {
                    return;
                };
                for (a, ty) in args.iter().zip(decl.arg_types.iter()) {
                    if let RawTerm::Ident(n, _) = a {
                        if !shadow.contains(n)
                            && self.known_free(n).is_none()
                            && self.is_constant(n).is_none()
                        {
                            self.free_types.entry(n.clone()).or_insert_with(|| ty.clone());
                        }
                    }
                }
            }
            Raw::Not(f) => self.infer_free(f, shadow),
            Raw::And(fs) | Raw::Or(fs) => fs.iter().for_each(|f| self.infer_free(f, shadow)),
            Raw::Implies(a, b) => {
                self.infer_free(a, shadow);
                self.infer_free(b, shadow);
            }
            Raw::Quant(_, decls, body) => {
                let n = shadow.len();
                shadow.extend(decls.iter().map(|d| d.0.clone()));
                self.infer_free(body, shadow);
                shadow.truncate(n);
            }
            _ => {}
        }
    }

    // Infer the type of a bound variable from its first predicate use.
    fn infer_bound(&self, var: &str, raw: &Raw) -> Option<Sym> {
        match raw {
            Raw::Pred(name, args, _) => {
                let decl = self.opts.signature.and_then(|s| s.predicate(name))?;
                args.iter()
                    .zip(decl.arg_types.iter())
                    .find(|(a, _)| matches!(a, RawTerm::Ident(n, _) if n == var))
                    .map(|(_, ty)| ty.clone())
            }
            Raw::Not(f) => self.infer_bound(var, f),
            Raw::And(fs) | Raw::Or(fs) => fs.iter().find_map(|f| self.infer_bound(var, f)),
            Raw::Implies(a, b) => self.infer_bound(var, a).or_else(|| self.infer_bound(var, b)),
            Raw::Quant(_, decls, body) => {
                if decls.iter().any(|d| d.0 == var) {
                    None
                } else {
                    self.infer_bound(var, body)
                }
            }
            Raw::Eq(a, b, _) => {
                // x = c where c has a known type
                let other = match (a, b) {
                    (RawTerm::Ident(n, _), o) | (o, RawTerm::Ident(n, _)) if n == var => o,
                    _ => return None,
                };
                match other {
                    RawTerm::Ident(n, _) => self
                        .bound
                        .iter()
                        .rev()
                        .find(|v| &*v.name == n)
                        .map(|v| v.ty.clone())
                        .or_else(|| self.known_free(n).map(|v| v.ty.clone()))
                        .or_else(|| self.is_constant(n)),
                    RawTerm::Func(..) => None,
                }
            }
            _ => None,
        }
    }

    fn term(&self, t: &RawTerm) -> Result<Term, ParseError> {
        match t {
            RawTerm::Ident(n, _) => {
                if let Some(v) = self.bound.iter().rev().find(|v| &*v.name == n) {
                    return Ok(Term::Var(v.clone()));
                }
                if let Some(v) = self.known_free(n) {
                    return Ok(Term::Var(v.clone()));
                }
                if let Some(ty) = self.is_constant(n) {
                    return Ok(Term::Const { name: sym(n), ty });
                }
                let ty = self
                    .free_types
                    .get(n)
                    .cloned()
                    .unwrap_or_else(|| sym(DEFAULT_TYPE));
                Ok(Term::Var(Var { name: sym(n), ty }))
            }
            RawTerm::Func(n, _, (line, col)) => Err(ParseError::new(
                *line,
                *col,
                format!("function term `{n}(..)` is only allowed as an action"),
            )),
        }
    }

    fn is_action_var(&self, t: &RawTerm) -> bool {
        self.opts.action_var
            && matches!(t, RawTerm::Ident(n, _) if n == "a" && !self.bound.iter().any(|v| &*v.name == "a"))
    }

    fn resolve(&mut self, raw: &Raw) -> Result<Formula, ParseError> {
        Ok(match raw {
            Raw::True => Formula::True,
            Raw::False => Formula::False,
            Raw::Pred(name, args, (line, col)) => {
                let terms = args.iter().map(|a| self.term(a)).collect::<Result<Vec<_>, _>>()?;
                if let Some(sig) = self.opts.signature {
                    let decl = sig.predicate(name).ok_or_else(|| {
                        ParseError::new(*line, *col, format!("unknown predicate `{name}`"))
                    })?;
                    if decl.arg_types.len() != terms.len() {
                        return Err(ParseError::new(
                            *line,
                            *col,
                            format!(
                                "predicate `{name}` expects {} arguments, found {}",
                                decl.arg_types.len(),
                                terms.len()
                            ),
                        ));
                    }
                    for (t, ty) in terms.iter().zip(decl.arg_types.iter()) {
                        if &**t.ty() != DEFAULT_TYPE && t.ty() != ty {
                            return Err(ParseError::new(
                                *line,
                                *col,
                                format!("`{t}` has type {} but `{name}` expects {ty}", t.ty()),
                            ));
                        }
                    }
                }
                Formula::Atom {
                    pred: sym(name),
                    args: terms,
                }
            }
            Raw::Eq(a, b, neg) => {
                let f = if self.is_action_var(a) || self.is_action_var(b) {
                    let other = if self.is_action_var(a) { b } else { a };
                    let (name, args) = match other {
                        RawTerm::Ident(n, _) => (n.clone(), Vec::new()),
                        RawTerm::Func(n, args, _) => (
                            n.clone(),
                            args.iter().map(|t| self.term(t)).collect::<Result<Vec<_>, _>>()?,
                        ),
                    };
                    Formula::ActionEq {
                        name: sym(&name),
                        args,
                    }
                } else {
                    Formula::Eq(self.term(a)?, self.term(b)?)
                };
                if *neg {
                    Formula::Not(Box::new(f))
                } else {
                    f
                }
            }
            Raw::Not(f) => Formula::Not(Box::new(self.resolve(f)?)),
            Raw::And(fs) => Formula::And(fs.iter().map(|f| self.resolve(f)).collect::<Result<_, _>>()?),
            Raw::Or(fs) => Formula::Or(fs.iter().map(|f| self.resolve(f)).collect::<Result<_, _>>()?),
            Raw::Implies(a, b) => {
                Formula::Implies(Box::new(self.resolve(a)?), Box::new(self.resolve(b)?))
            }
            Raw::Quant(exists, decls, body) => {
                let mut vars = Vec::new();
                for (name, ty, (line, col)) in decls {
                    let ty = match ty {
                        Some(t) => {
                            if let Some(sig) = self.opts.signature {
                                if !sig.types.contains(t.as_str()) {
                                    return Err(ParseError::new(
                                        *line,
                                        *col,
                                        format!("unknown type `{t}`"),
                                    ));
                                }
                            }
                            sym(t)
                        }
                        None => self
                            .infer_bound(name, body)
                            .unwrap_or_else(|| sym(DEFAULT_TYPE)),
                    };
                    vars.push(Var { name: sym(name), ty });
                }
                let n = self.bound.len();
                self.bound.extend(vars.iter().cloned());
                let inner = self.resolve(body);
                self.bound.truncate(n);
                let inner = inner?;
                if *exists {
                    Formula::Exists(vars, Box::new(inner))
                } else {
                    Formula::Forall(vars, Box::new(inner))
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logistics() -> Signature {
        Signature::new()
            .with_predicate("TAt", &["truck", "city"], false)
            .with_predicate("Dst", &["truck", "city"], true)
    }

    #[test]
    fn existential_over_fluent_round_trips() {
        let sig = logistics();
        let opts = ParseOptions {
            signature: Some(&sig),
            ..Default::default()
        };
        let f = parse_formula_with("exists c. TAt(t,c)", &opts).unwrap();
        match &f {
            Formula::Exists(vs, body) => {
                assert_eq!(&*vs[0].ty, "city");
                assert!(matches!(**body, Formula::Atom { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
        let printed = f.to_string();
        assert_eq!(printed, "exists c:city. TAt(t,c)");
        assert_eq!(parse_formula_with(&printed, &opts).unwrap(), f);
        let free: Vec<_> = f.free_vars().into_iter().collect();
        assert_eq!(free, vec![Var::new("t", "truck")]);
    }

    #[test]
    fn constants_parse() {
        assert_eq!(parse_formula("true").unwrap(), Formula::True);
        assert_eq!(parse_formula("false").unwrap(), Formula::False);
    }

    #[test]
    fn unterminated_input_reports_end_of_input() {
        let e = parse_formula("(and P").unwrap_err();
        assert!(e.message.contains("expected `)`"), "{e}");
        assert_eq!((e.line, e.col), (1, 6));
        let e = parse_formula("(P").unwrap_err();
        assert!(e.message.contains("end of input"), "{e}");
        assert_eq!((e.line, e.col), (1, 3));
    }

    #[test]
    fn precedence_not_and_or_implies() {
        let f = parse_formula("!P & Q | R -> S").unwrap();
        let p = Formula::prop;
        let expect = Formula::implies(
            Formula::Or(vec![
                Formula::And(vec![Formula::Not(Box::new(p("P"))), p("Q")]),
                p("R"),
            ]),
            p("S"),
        );
        assert_eq!(f, expect);
    }

    #[test]
    fn quantifier_scope_extends_right() {
        let f = parse_formula("exists x. P(x) & Q(x)").unwrap();
        assert!(matches!(f, Formula::Exists(_, ref b) if matches!(**b, Formula::And(_))));
    }

    #[test]
    fn arity_mismatch_is_an_error() {
        let sig = logistics();
        let opts = ParseOptions {
            signature: Some(&sig),
            ..Default::default()
        };
        let e = parse_formula_with("TAt(t)", &opts).unwrap_err();
        assert!(e.message.contains("expects 2"), "{e}");
        assert!(parse_formula_with("Missing(t)", &opts).is_err());
    }

    #[test]
    fn action_equalities_in_axiom_bodies() {
        let opts = ParseOptions {
            action_var: true,
            ..Default::default()
        };
        let f = parse_formula_with("a = flipS | (P & a != flipS)", &opts).unwrap();
        let s = f.to_string();
        assert_eq!(s, "a = flipS | P & a != flipS");
        let g = parse_formula_with("a = driveS(t, c1, c)", &opts).unwrap();
        assert!(matches!(g, Formula::ActionEq { ref args, .. } if args.len() == 3));
    }
}
