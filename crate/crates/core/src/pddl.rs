//! PDDL domain emission, parsing, and ontology mining.
//!
//! The emitter targets STRIPS-level PDDL: typed parameters, binary
//! predicates, conjunctive preconditions, conjunctive effects with negation.
//! Classes are subtyped under the two node kinds (`agent` and `object`) so
//! schemas bind parameters per class while planners see the kind hierarchy.
//! The parser accepts exactly the emitted subset (plus whitespace and `;`
//! comments), which is what round-trip validation needs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{Atom, Effect, GroundedAction, LiftedAction, Variable};

#[derive(Debug, Error)]
pub enum PddlError {
    #[error("no actions to emit")]
    NoActions,
    #[error("invalid symbol {0:?}")]
    InvalidSymbol(String),
    #[error("action name {0:?} collides more than 999 times")]
    NameSuffixesExhausted(String),
    #[error("line {line}, column {col}: {message}")]
    Parse { line: usize, col: usize, message: String },
    #[error("undeclared predicate {0:?}")]
    UndeclaredPredicate(String),
    #[error("undeclared type {0:?}")]
    UndeclaredType(String),
    #[error("predicate {name:?} used with {got} arguments, declared with {declared}")]
    ArityMismatch { name: String, declared: usize, got: usize },
    #[error("parameter {0:?} unused in action {1:?}")]
    UnusedParameter(String, String),
    #[error("unknown variable {0:?} in action {1:?}")]
    UnknownVariable(String, String),
}

/// A learned planning domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub name: String,
    /// Classes subtyped under `agent`.
    pub agent_classes: BTreeSet<String>,
    /// Classes subtyped under `object`.
    pub object_classes: BTreeSet<String>,
    /// Declared predicate names with their arity.
    pub predicates: BTreeMap<String, usize>,
    pub actions: Vec<LiftedAction>,
    /// Optional typed constants (name, type).
    pub constants: Vec<(String, String)>,
}

fn is_symbol(s: &str) -> bool {
    !s.is_empty()
        && s.chars().next().unwrap().is_ascii_alphabetic()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl Domain {
    /// Builds a domain from uniquely-named actions, deriving the predicate
    /// and type declarations. `agent_classes` decides which parameter types
    /// subtype `agent`.
    pub fn from_actions(
        name: impl Into<String>,
        actions: Vec<LiftedAction>,
        agent_classes: &BTreeSet<String>,
    ) -> Result<Domain, PddlError> {
        if actions.is_empty() {
            return Err(PddlError::NoActions);
        }
        let mut domain = Domain {
            name: name.into(),
            agent_classes: BTreeSet::new(),
            object_classes: BTreeSet::new(),
            predicates: BTreeMap::new(),
            actions,
            constants: Vec::new(),
        };
        if !is_symbol(&domain.name) {
            return Err(PddlError::InvalidSymbol(domain.name.clone()));
        }
        for action in &domain.actions {
            for v in &action.parameters {
                if agent_classes.contains(&v.type_name) {
                    domain.agent_classes.insert(v.type_name.clone());
                } else {
                    domain.object_classes.insert(v.type_name.clone());
                }
            }
            for atom in action.atoms() {
                domain.predicates.insert(atom.predicate.clone(), atom.args.len());
            }
        }
        domain.validate()?;
        Ok(domain)
    }

    /// Structural invariants: declared symbols, declared parameter types,
    /// every parameter used, every variable bound.
    pub fn validate(&self) -> Result<(), PddlError> {
        for class in self.agent_classes.iter().chain(&self.object_classes) {
            if !is_symbol(class) {
                return Err(PddlError::InvalidSymbol(class.clone()));
            }
        }
        for pred in self.predicates.keys() {
            if !is_symbol(pred) {
                return Err(PddlError::InvalidSymbol(pred.clone()));
            }
        }
        for action in &self.actions {
            if !is_symbol(&action.name) {
                return Err(PddlError::InvalidSymbol(action.name.clone()));
            }
            let params: BTreeSet<&str> =
                action.parameters.iter().map(|v| v.name.as_str()).collect();
            let mut used: BTreeSet<&str> = BTreeSet::new();
            for v in &action.parameters {
                if !self.agent_classes.contains(&v.type_name)
                    && !self.object_classes.contains(&v.type_name)
                {
                    return Err(PddlError::UndeclaredType(v.type_name.clone()));
                }
            }
            for atom in action.atoms() {
                match self.predicates.get(&atom.predicate) {
                    None => return Err(PddlError::UndeclaredPredicate(atom.predicate.clone())),
                    Some(&arity) if arity != atom.args.len() => {
                        return Err(PddlError::ArityMismatch {
                            name: atom.predicate.clone(),
                            declared: arity,
                            got: atom.args.len(),
                        })
                    }
                    _ => {}
                }
                for arg in &atom.args {
                    if !params.contains(arg.as_str()) {
                        return Err(PddlError::UnknownVariable(arg.clone(), action.name.clone()));
                    }
                    used.insert(arg);
                }
            }
            if let Some(unused) = params.difference(&used).next() {
                return Err(PddlError::UnusedParameter(unused.to_string(), action.name.clone()));
            }
        }
        Ok(())
    }
}

impl LiftedAction {
    /// All atoms of the schema, preconditions then effects.
    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.preconditions.iter().chain(self.effects.iter().map(|e| match e {
            Effect::Add(a) | Effect::Del(a) => a,
        }))
    }
}

/// Makes action names unique by numeric suffix (`_2`, `_3`, ...), preserving
/// order. Errs after 999 collisions of one name.
pub fn uniquify_names(actions: &mut [LiftedAction]) -> Result<(), PddlError> {
    let mut seen: BTreeMap<String, u32> = BTreeMap::new();
    for action in actions.iter_mut() {
        let count = seen.entry(action.name.clone()).or_insert(0);
        *count += 1;
        if *count > 1 {
            if *count > 999 {
                return Err(PddlError::NameSuffixesExhausted(action.name.clone()));
            }
            action.name = format!("{}_{}", action.name, count);
        }
    }
    Ok(())
}

fn write_atom(out: &mut String, atom: &Atom) {
    out.push('(');
    out.push_str(&atom.predicate);
    for arg in &atom.args {
        out.push(' ');
        out.push_str(arg);
    }
    out.push(')');
}

/// Emits the domain as PDDL text. Output is deterministic: predicates are
/// emitted lexicographically and actions in their stored order.
pub fn emit_domain(domain: &Domain) -> Result<String, PddlError> {
    domain.validate()?;
    if domain.actions.is_empty() {
        return Err(PddlError::NoActions);
    }
    let mut out = String::new();
    let _ = writeln!(out, "(define (domain {})", domain.name);
    let _ = writeln!(out, "  (:requirements :strips :typing)");

    out.push_str("  (:types\n");
    if !domain.agent_classes.is_empty() {
        out.push_str("    agent - object\n");
        let classes: Vec<&str> = domain.agent_classes.iter().map(String::as_str).collect();
        let _ = writeln!(out, "    {} - agent", classes.join(" "));
    }
    if !domain.object_classes.is_empty() {
        let classes: Vec<&str> = domain.object_classes.iter().map(String::as_str).collect();
        let _ = writeln!(out, "    {} - object", classes.join(" "));
    }
    out.push_str("  )\n");

    if !domain.constants.is_empty() {
        out.push_str("  (:constants\n");
        for (name, ty) in &domain.constants {
            let _ = writeln!(out, "    {name} - {ty}");
        }
        out.push_str("  )\n");
    }

    out.push_str("  (:predicates\n");
    for (pred, arity) in &domain.predicates {
        out.push_str("    (");
        out.push_str(pred);
        for i in 0..*arity {
            let _ = write!(out, " ?x{i}");
        }
        out.push_str(")\n");
    }
    out.push_str("  )\n");

    for action in &domain.actions {
        // The trigger relation is consumed: it appears as a precondition and
        // is negated in the effects.
        let _ = writeln!(out, "  (:action {}", action.name);
        out.push_str("    :parameters (");
        for (i, v) in action.parameters.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{} - {}", v.name, v.type_name);
        }
        out.push_str(")\n");
        out.push_str("    :precondition (and");
        for atom in &action.preconditions {
            out.push(' ');
            write_atom(&mut out, atom);
        }
        out.push_str(")\n");
        out.push_str("    :effect (and");
        for effect in &action.effects {
            out.push(' ');
            match effect {
                Effect::Add(atom) => write_atom(&mut out, atom),
                Effect::Del(atom) => {
                    out.push_str("(not ");
                    write_atom(&mut out, atom);
                    out.push(')');
                }
            }
        }
        out.push_str(")\n  )\n");
    }
    out.push_str(")\n");
    Ok(out)
}

/// Convenience: name-uniquify, build, and emit in one call.
pub fn emit_actions(
    name: &str,
    mut actions: Vec<LiftedAction>,
    agent_classes: &BTreeSet<String>,
) -> Result<String, PddlError> {
    uniquify_names(&mut actions)?;
    let domain = Domain::from_actions(name, actions, agent_classes)?;
    emit_domain(&domain)
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Sexpr {
    Sym(String, usize, usize),
    List(Vec<Sexpr>, usize, usize),
}

impl Sexpr {
    fn pos(&self) -> (usize, usize) {
        match self {
            Sexpr::Sym(_, l, c) | Sexpr::List(_, l, c) => (*l, *c),
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

#[derive(Clone, Debug)]
enum Token {
    Open(usize, usize),
    Close(usize, usize),
    Sym(String, usize, usize),
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer { chars: text.chars().peekable(), line: 1, col: 1 }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn tokens(mut self) -> Result<Vec<Token>, PddlError> {
        let mut out = Vec::new();
        while let Some(&c) = self.chars.peek() {
            let (line, col) = (self.line, self.col);
            match c {
                ';' => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                '(' => {
                    self.bump();
                    out.push(Token::Open(line, col));
                }
                ')' => {
                    self.bump();
                    out.push(Token::Close(line, col));
                }
                c if c.is_whitespace() => {
                    self.bump();
                }
                _ => {
                    let mut sym = String::new();
                    while let Some(&c) = self.chars.peek() {
                        if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                            break;
                        }
                        sym.push(c);
                        self.bump();
                    }
                    out.push(Token::Sym(sym, line, col));
                }
            }
        }
        Ok(out)
    }
}

fn parse_sexpr(tokens: &[Token]) -> Result<Sexpr, PddlError> {
    let mut stack: Vec<(Vec<Sexpr>, usize, usize)> = Vec::new();
    let mut top: Option<Sexpr> = None;
    for token in tokens {
        if top.is_some() {
            let (l, c) = match token {
                Token::Open(l, c) | Token::Close(l, c) | Token::Sym(_, l, c) => (*l, *c),
            };
            return Err(PddlError::Parse { line: l, col: c, message: "trailing input".into() });
        }
        match token {
            Token::Open(l, c) => stack.push((Vec::new(), *l, *c)),
            Token::Close(l, c) => {
                let (items, ol, oc) = stack.pop().ok_or(PddlError::Parse {
                    line: *l,
                    col: *c,
                    message: "unbalanced ')'".into(),
                })?;
                let expr = Sexpr::List(items, ol, oc);
                match stack.last_mut() {
                    Some((parent, _, _)) => parent.push(expr),
                    None => top = Some(expr),
                }
            }
            Token::Sym(s, l, c) => {
                let expr = Sexpr::Sym(s.clone(), *l, *c);
                match stack.last_mut() {
                    Some((parent, _, _)) => parent.push(expr),
                    None => {
                        return Err(PddlError::Parse {
                            line: *l,
                            col: *c,
                            message: "symbol outside any list".into(),
                        })
                    }
                }
            }
        }
    }
    if let Some((_, l, c)) = stack.last() {
        return Err(PddlError::Parse { line: *l, col: *c, message: "unbalanced '('".into() });
    }
    top.ok_or(PddlError::Parse { line: 1, col: 1, message: "empty input".into() })
}

fn err_at(expr: &Sexpr, message: impl Into<String>) -> PddlError {
    let (line, col) = expr.pos();
    PddlError::Parse { line, col, message: message.into() }
}

fn sym(expr: &Sexpr) -> Result<&str, PddlError> {
    match expr {
        Sexpr::Sym(s, _, _) => Ok(s),
        _ => Err(err_at(expr, "expected symbol")),
    }
}

fn list(expr: &Sexpr) -> Result<&[Sexpr], PddlError> {
    match expr {
        Sexpr::List(items, _, _) => Ok(items),
        _ => Err(err_at(expr, "expected list")),
    }
}

/// Parses `name name ... - type` groups, as used in `:types` and
/// `:parameters`.
fn parse_typed_list(items: &[Sexpr]) -> Result<Vec<(String, Option<String>)>, PddlError> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let s = sym(&items[i])?;
        if s == "-" {
            let ty = sym(items.get(i + 1).ok_or_else(|| err_at(&items[i], "missing type"))?)?;
            for name in pending.drain(..) {
                out.push((name, Some(ty.to_string())));
            }
            i += 2;
        } else {
            pending.push(s.to_string());
            i += 1;
        }
    }
    for name in pending {
        out.push((name, None));
    }
    Ok(out)
}

fn parse_atom(expr: &Sexpr) -> Result<Atom, PddlError> {
    let items = list(expr)?;
    if items.is_empty() {
        return Err(err_at(expr, "empty atom"));
    }
    let predicate = sym(&items[0])?.to_string();
    let args = items[1..].iter().map(|a| sym(a).map(str::to_string)).collect::<Result<_, _>>()?;
    Ok(Atom { predicate, args })
}

/// Splits `(and a b ...)` into its conjuncts; a bare form is a single
/// conjunct.
fn conjuncts(expr: &Sexpr) -> Result<Vec<&Sexpr>, PddlError> {
    let items = list(expr)?;
    if items.first().map(sym).transpose()? == Some("and") {
        Ok(items[1..].iter().collect())
    } else {
        Ok(vec![expr])
    }
}

/// Parses a PDDL domain in the emitted subset back into a [`Domain`].
pub fn parse_domain(text: &str) -> Result<Domain, PddlError> {
    let tokens = Lexer::new(text).tokens()?;
    let root = parse_sexpr(&tokens)?;
    let items = list(&root)?;
    if items.first().map(sym).transpose()? != Some("define") {
        return Err(err_at(&root, "expected (define ...)"));
    }
    let header = list(items.get(1).ok_or_else(|| err_at(&root, "missing (domain name)"))?)?;
    if header.first().map(sym).transpose()? != Some("domain") || header.len() != 2 {
        return Err(err_at(&items[1], "expected (domain name)"));
    }
    let mut domain = Domain {
        name: sym(&header[1])?.to_string(),
        agent_classes: BTreeSet::new(),
        object_classes: BTreeSet::new(),
        predicates: BTreeMap::new(),
        actions: Vec::new(),
        constants: Vec::new(),
    };

    for section in &items[2..] {
        let body = list(section)?;
        let head = body.first().ok_or_else(|| err_at(section, "empty section"))?;
        match sym(head)? {
            ":requirements" => {}
            ":types" => {
                for (name, parent) in parse_typed_list(&body[1..])? {
                    match parent.as_deref() {
                        // The agent root itself, in either plain or
                        // `agent - object` form.
                        _ if name == "agent" => {}
                        Some("agent") => {
                            domain.agent_classes.insert(name);
                        }
                        Some("object") => {
                            domain.object_classes.insert(name);
                        }
                        Some(other) => {
                            return Err(err_at(head, format!("unknown parent type {other:?}")))
                        }
                        None => {
                            return Err(err_at(head, format!("untyped class {name:?}")));
                        }
                    }
                }
            }
            ":constants" => {
                for (name, ty) in parse_typed_list(&body[1..])? {
                    let ty = ty.ok_or_else(|| err_at(head, format!("untyped constant {name:?}")))?;
                    domain.constants.push((name, ty));
                }
            }
            ":predicates" => {
                for decl in &body[1..] {
                    let atom = parse_atom(decl)?;
                    domain.predicates.insert(atom.predicate, atom.args.len());
                }
            }
            ":action" => {
                domain.actions.push(parse_action(body)?);
            }
            other => return Err(err_at(head, format!("unknown section {other:?}"))),
        }
    }
    domain.validate()?;
    Ok(domain)
}

fn parse_action(body: &[Sexpr]) -> Result<LiftedAction, PddlError> {
    let name = sym(body.get(1).ok_or_else(|| err_at(&body[0], "missing action name"))?)?.to_string();
    let mut parameters = Vec::new();
    let mut preconditions = Vec::new();
    let mut effects = Vec::new();
    let mut i = 2;
    while i < body.len() {
        let key = sym(&body[i])?;
        let value = body
            .get(i + 1)
            .ok_or_else(|| err_at(&body[i], format!("missing value for {key}")))?;
        match key {
            ":parameters" => {
                for (pname, ty) in parse_typed_list(list(value)?)? {
                    let ty = ty.ok_or_else(|| {
                        err_at(value, format!("parameter {pname:?} missing a type"))
                    })?;
                    if !pname.starts_with('?') {
                        return Err(err_at(value, format!("parameter {pname:?} must start with ?")));
                    }
                    parameters.push(Variable { name: pname, type_name: ty });
                }
            }
            ":precondition" => {
                for conjunct in conjuncts(value)? {
                    preconditions.push(parse_atom(conjunct)?);
                }
            }
            ":effect" => {
                for conjunct in conjuncts(value)? {
                    let items = list(conjunct)?;
                    if items.first().map(sym).transpose()? == Some("not") {
                        if items.len() != 2 {
                            return Err(err_at(conjunct, "malformed (not ...)"));
                        }
                        effects.push(Effect::Del(parse_atom(&items[1])?));
                    } else {
                        effects.push(Effect::Add(parse_atom(conjunct)?));
                    }
                }
            }
            other => return Err(err_at(&body[i], format!("unknown action field {other}"))),
        }
        i += 2;
    }
    Ok(LiftedAction { name, parameters, preconditions, effects })
}

// ---------------------------------------------------------------------------
// Ontology mining
// ---------------------------------------------------------------------------

/// Object classes split by whether actions ever move them: a class is
/// movable when it appears as the subject of a positive effect; classes that
/// occur in preconditions or effects but never as a positive-effect subject
/// are static. Agent classes are excluded from both sets.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Ontology {
    pub movable: BTreeSet<String>,
    pub static_objects: BTreeSet<String>,
}

pub fn mine_ontology_grounded(
    actions: &[GroundedAction],
    agent_classes: &BTreeSet<String>,
) -> Ontology {
    let mut movable = BTreeSet::new();
    let mut mentioned = BTreeSet::new();
    for action in actions {
        mentioned.insert(action.trigger.subject.class.clone());
        mentioned.insert(action.trigger.object.class.clone());
        for t in action
            .preconditions
            .iter()
            .chain(&action.effects)
            .chain(&action.negative_effects)
        {
            mentioned.insert(t.subject.class.clone());
            mentioned.insert(t.object.class.clone());
        }
        for t in &action.effects {
            movable.insert(t.subject.class.clone());
        }
    }
    build_ontology(movable, mentioned, agent_classes)
}

pub fn mine_ontology_lifted(
    actions: &[LiftedAction],
    agent_classes: &BTreeSet<String>,
) -> Ontology {
    let mut movable = BTreeSet::new();
    let mut mentioned = BTreeSet::new();
    for action in actions {
        let type_of: BTreeMap<&str, &str> = action
            .parameters
            .iter()
            .map(|v| (v.name.as_str(), v.type_name.as_str()))
            .collect();
        let note = |atom: &Atom, mentioned: &mut BTreeSet<String>| {
            for arg in &atom.args {
                if let Some(ty) = type_of.get(arg.as_str()) {
                    mentioned.insert(ty.to_string());
                }
            }
        };
        for atom in &action.preconditions {
            note(atom, &mut mentioned);
        }
        for effect in &action.effects {
            match effect {
                Effect::Add(atom) => {
                    note(atom, &mut mentioned);
                    if let Some(subject) = atom.args.first() {
                        if let Some(ty) = type_of.get(subject.as_str()) {
                            movable.insert(ty.to_string());
                        }
                    }
                }
                Effect::Del(atom) => note(atom, &mut mentioned),
            }
        }
    }
    build_ontology(movable, mentioned, agent_classes)
}

fn build_ontology(
    movable: BTreeSet<String>,
    mentioned: BTreeSet<String>,
    agent_classes: &BTreeSet<String>,
) -> Ontology {
    let movable: BTreeSet<String> =
        movable.into_iter().filter(|c| !agent_classes.contains(c)).collect();
    let static_objects = mentioned
        .into_iter()
        .filter(|c| !movable.contains(c) && !agent_classes.contains(c))
        .collect();
    Ontology { movable, static_objects }
}
