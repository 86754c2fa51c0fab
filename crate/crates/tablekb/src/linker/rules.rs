//! Rule file parsing and validation for the entity linker.
//!
//! A rule file holds one named rule per line, `name: body -> head`. Bodies
//! are comma-separated atoms over `?X` variables, `:iri` and `"string"`
//! constants, plus `@STR_EQ(?A, ?B)` builtins. Three rule kinds are told
//! apart by their heads: `?X ~ ?Y` makes an equality rule, a head with `!Z`
//! existentials makes an existential rule minting fresh nulls, and a plain
//! atom makes an auxiliary datalog rule that is cleared and re-derived each
//! chase round.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::term::Term;

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate rule name {0}")]
    DuplicateName(String),
    #[error("unknown rule {0}")]
    UnknownRule(String),
    #[error("ruleset is not weakly acyclic: position {position} feeds its own existential through {special}")]
    Cyclic { position: String, special: String },
    #[error("reading rule file: {0}")]
    Io(#[from] std::io::Error),
}

/// One argument slot of an atom.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum RuleTerm {
    /// Universally quantified variable, written `?X`.
    Var(String),
    /// Existentially quantified head variable, written `!Z`.
    Exist(String),
    Const(Term),
}

impl fmt::Display for RuleTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleTerm::Var(v) => write!(f, "?{v}"),
            RuleTerm::Exist(v) => write!(f, "!{v}"),
            RuleTerm::Const(t) => write!(f, "{t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleAtom {
    pub predicate: String,
    pub args: Vec<RuleTerm>,
    /// Builtin atoms are tests over bound values, not stored relations.
    pub builtin: bool,
}

impl fmt::Display for RuleAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.builtin {
            write!(f, "@")?;
        }
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Datalog rule deriving one auxiliary fact; no existentials.
#[derive(Debug, Clone)]
pub struct AuxRule {
    pub name: String,
    pub body: Vec<RuleAtom>,
    pub head: RuleAtom,
}

/// Existential rule: fires only when no binding of its existentials already
/// satisfies the head.
#[derive(Debug, Clone)]
pub struct Tgd {
    pub name: String,
    pub body: Vec<RuleAtom>,
    pub head: Vec<RuleAtom>,
    /// Head-only variables bound to fresh nulls on firing.
    pub existentials: Vec<String>,
}

/// Equality rule: a body match asserts that the bindings of `x` and `y`
/// denote the same term.
#[derive(Debug, Clone)]
pub struct Egd {
    pub name: String,
    pub body: Vec<RuleAtom>,
    pub x: String,
    pub y: String,
}

#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    pub aux: Vec<AuxRule>,
    pub tgds: Vec<Tgd>,
    pub egds: Vec<Egd>,
    disabled: BTreeSet<String>,
}

impl RuleSet {
    pub fn parse(text: &str) -> Result<RuleSet, RuleError> {
        let mut set = RuleSet::default();
        let mut names = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let tokens = tokenize(raw, line)?;
            if tokens.is_empty() {
                continue;
            }
            let rule = parse_rule(&tokens, line)?;
            let name = match &rule {
                Parsed::Aux(r) => &r.name,
                Parsed::Tgd(r) => &r.name,
                Parsed::Egd(r) => &r.name,
            };
            if !names.insert(name.clone()) {
                return Err(RuleError::DuplicateName(name.clone()));
            }
            match rule {
                Parsed::Aux(r) => set.aux.push(r),
                Parsed::Tgd(r) => set.tgds.push(r),
                Parsed::Egd(r) => set.egds.push(r),
            }
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<RuleSet, RuleError> {
        RuleSet::parse(&std::fs::read_to_string(path)?)
    }

    pub fn rule_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.aux.iter().map(|r| r.name.clone()).collect();
        names.extend(self.tgds.iter().map(|r| r.name.clone()));
        names.extend(self.egds.iter().map(|r| r.name.clone()));
        names
    }

    pub fn egd_names(&self) -> Vec<String> {
        self.egds.iter().map(|r| r.name.clone()).collect()
    }

    /// Disables one rule by name.
    pub fn disable(&mut self, name: &str) -> Result<(), RuleError> {
        if !self.rule_names().iter().any(|n| n == name) {
            return Err(RuleError::UnknownRule(name.to_string()));
        }
        self.disabled.insert(name.to_string());
        Ok(())
    }

    /// Keeps only the named equality rules enabled (other rule kinds are
    /// untouched).
    pub fn restrict_egds(&mut self, keep: &[String]) -> Result<(), RuleError> {
        for name in keep {
            if !self.egds.iter().any(|r| &r.name == name) {
                return Err(RuleError::UnknownRule(name.clone()));
            }
        }
        for egd in &self.egds {
            if keep.contains(&egd.name) {
                self.disabled.remove(&egd.name);
            } else {
                self.disabled.insert(egd.name.clone());
            }
        }
        Ok(())
    }

    pub fn is_enabled(&self, name: &str) -> bool {
        !self.disabled.contains(name)
    }

    pub fn enabled_aux(&self) -> impl Iterator<Item = &AuxRule> {
        self.aux.iter().filter(|r| self.is_enabled(&r.name))
    }

    pub fn enabled_tgds(&self) -> impl Iterator<Item = &Tgd> {
        self.tgds.iter().filter(|r| self.is_enabled(&r.name))
    }

    pub fn enabled_egds(&self) -> impl Iterator<Item = &Egd> {
        self.egds.iter().filter(|r| self.is_enabled(&r.name))
    }

    /// Predicates derived by auxiliary rules; cleared before each round.
    pub fn aux_predicates(&self) -> BTreeSet<String> {
        self.aux.iter().map(|r| r.head.predicate.clone()).collect()
    }

    /// Weak acyclicity: no dependency cycle through an existential position,
    /// which bounds the chase. Edges run from each body position of a
    /// variable shared with the head to the positions it reaches; edges into
    /// existential positions are the special ones that must not sit on a
    /// cycle.
    pub fn check_acyclic(&self) -> Result<(), RuleError> {
        type Pos = (String, usize);
        let mut regular: BTreeMap<Pos, BTreeSet<Pos>> = BTreeMap::new();
        let mut special: Vec<(Pos, Pos)> = Vec::new();

        let mut add_rule = |body: &[RuleAtom], head: &[RuleAtom]| {
            let head_vars: BTreeSet<&String> = head
                .iter()
                .flat_map(|a| &a.args)
                .filter_map(|t| match t {
                    RuleTerm::Var(v) => Some(v),
                    _ => None,
                })
                .collect();
            for atom in body.iter().filter(|a| !a.builtin) {
                for (i, term) in atom.args.iter().enumerate() {
                    let RuleTerm::Var(v) = term else { continue };
                    if !head_vars.contains(v) {
                        continue;
                    }
                    let from: Pos = (atom.predicate.clone(), i);
                    for h in head {
                        for (j, ht) in h.args.iter().enumerate() {
                            let to: Pos = (h.predicate.clone(), j);
                            match ht {
                                RuleTerm::Var(w) if w == v => {
                                    regular.entry(from.clone()).or_default().insert(to);
                                }
                                RuleTerm::Exist(_) => {
                                    special.push((from.clone(), to));
                                }
                                _ => {}
                            }
                        }
                    }
                }
            }
        };

        for rule in &self.aux {
            add_rule(&rule.body, std::slice::from_ref(&rule.head));
        }
        for rule in &self.tgds {
            add_rule(&rule.body, &rule.head);
        }

        // A special edge on a cycle means some position keeps feeding fresh
        // nulls into itself. Check whether the target reaches back to the
        // source over either edge kind.
        let mut all_edges = regular.clone();
        for (from, to) in &special {
            all_edges.entry(from.clone()).or_default().insert(to.clone());
        }
        for (from, to) in &special {
            let mut seen = BTreeSet::new();
            let mut stack = vec![to.clone()];
            while let Some(node) = stack.pop() {
                if !seen.insert(node.clone()) {
                    continue;
                }
                if &node == from {
                    return Err(RuleError::Cyclic {
                        position: format!("{}[{}]", from.0, from.1 + 1),
                        special: format!("{}[{}]", to.0, to.1 + 1),
                    });
                }
                if let Some(next) = all_edges.get(&node) {
                    stack.extend(next.iter().cloned());
                }
            }
        }
        Ok(())
    }
}

/// The rules shipped with the crate.
pub fn default_rules() -> RuleSet {
    RuleSet::parse(DEFAULT_RULES_TEXT).expect("shipped rules parse")
}

pub const DEFAULT_RULES_TEXT: &str = include_str!("../../assets/rules.txt");

enum Parsed {
    Aux(AuxRule),
    Tgd(Tgd),
    Egd(Egd),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Ident(String),
    Var(String),
    Exist(String),
    Iri(String),
    Str(String),
    At,
    LParen,
    RParen,
    Comma,
    Arrow,
    Tilde,
    Colon,
}

fn tokenize(line: &str, lineno: usize) -> Result<Vec<Token>, RuleError> {
    let err = |message: String| RuleError::Parse { line: lineno, message };
    let chars: Vec<char> = line.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '#' => break,
            c if c.is_whitespace() => i += 1,
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            ',' => {
                tokens.push(Token::Comma);
                i += 1;
            }
            '~' => {
                tokens.push(Token::Tilde);
                i += 1;
            }
            '@' => {
                tokens.push(Token::At);
                i += 1;
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                tokens.push(Token::Arrow);
                i += 2;
            }
            '?' | '!' => {
                let (name, next) = take_ident(&chars, i + 1);
                if name.is_empty() {
                    return Err(err(format!("expected a variable name after '{c}'")));
                }
                tokens.push(if c == '?' { Token::Var(name) } else { Token::Exist(name) });
                i = next;
            }
            ':' => {
                let (name, next) = take_ident(&chars, i + 1);
                if name.is_empty() {
                    tokens.push(Token::Colon);
                    i += 1;
                } else {
                    tokens.push(Token::Iri(format!(":{name}")));
                    i = next;
                }
            }
            '"' => {
                let mut text = String::new();
                let mut j = i + 1;
                loop {
                    match chars.get(j) {
                        None => return Err(err("unterminated string constant".to_string())),
                        Some('"') => break,
                        Some('\\') => {
                            match chars.get(j + 1) {
                                Some('"') => text.push('"'),
                                Some('\\') => text.push('\\'),
                                Some(other) => {
                                    return Err(err(format!("unknown escape \\{other:?}")))
                                }
                                None => return Err(err("unterminated escape".to_string())),
                            }
                            j += 2;
                        }
                        Some(ch) => {
                            text.push(*ch);
                            j += 1;
                        }
                    }
                }
                tokens.push(Token::Str(text));
                i = j + 1;
            }
            c if is_ident_char(c) => {
                let (name, next) = take_ident(&chars, i);
                tokens.push(Token::Ident(name));
                i = next;
            }
            other => return Err(err(format!("unexpected character {other:?}"))),
        }
    }
    Ok(tokens)
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

fn take_ident(chars: &[char], start: usize) -> (String, usize) {
    let mut i = start;
    while i < chars.len() && is_ident_char(chars[i]) {
        i += 1;
    }
    (chars[start..i].iter().collect(), i)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    line: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: String) -> RuleError {
        RuleError::Parse { line: self.line, message }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn atom(&mut self) -> Result<RuleAtom, RuleError> {
        let builtin = if self.peek() == Some(&Token::At) {
            self.next();
            true
        } else {
            false
        };
        let predicate = match self.next() {
            Some(Token::Ident(name)) => name,
            other => return Err(self.err(format!("expected a predicate name, got {other:?}"))),
        };
        if self.next() != Some(Token::LParen) {
            return Err(self.err(format!("expected '(' after predicate {predicate}")));
        }
        let mut args = Vec::new();
        loop {
            let term = match self.next() {
                Some(Token::Var(v)) => RuleTerm::Var(v),
                Some(Token::Exist(v)) => RuleTerm::Exist(v),
                Some(Token::Iri(iri)) => RuleTerm::Const(Term::iri(&iri)),
                Some(Token::Str(s)) => RuleTerm::Const(Term::string(&s)),
                other => return Err(self.err(format!("expected an argument, got {other:?}"))),
            };
            args.push(term);
            match self.next() {
                Some(Token::Comma) => continue,
                Some(Token::RParen) => break,
                other => return Err(self.err(format!("expected ',' or ')', got {other:?}"))),
            }
        }
        if builtin && predicate != "STR_EQ" {
            return Err(self.err(format!("unknown builtin {predicate}")));
        }
        if builtin && args.len() != 2 {
            return Err(self.err("STR_EQ takes exactly two arguments".to_string()));
        }
        Ok(RuleAtom { predicate, args, builtin })
    }

    fn atoms_until_arrow(&mut self) -> Result<Vec<RuleAtom>, RuleError> {
        let mut atoms = vec![self.atom()?];
        loop {
            match self.peek() {
                Some(Token::Comma) => {
                    self.next();
                    atoms.push(self.atom()?);
                }
                Some(Token::Arrow) => {
                    self.next();
                    return Ok(atoms);
                }
                other => return Err(self.err(format!("expected ',' or '->', got {other:?}"))),
            }
        }
    }
}

fn parse_rule(tokens: &[Token], line: usize) -> Result<Parsed, RuleError> {
    let mut p = Parser { tokens, pos: 0, line };
    let name = match p.next() {
        Some(Token::Ident(name)) => name,
        other => return Err(p.err(format!("expected a rule name, got {other:?}"))),
    };
    if p.next() != Some(Token::Colon) {
        return Err(p.err(format!("expected ':' after rule name {name}")));
    }
    let body = p.atoms_until_arrow()?;
    for atom in &body {
        for arg in &atom.args {
            if let RuleTerm::Exist(v) = arg {
                return Err(p.err(format!("existential !{v} in rule body")));
            }
        }
    }
    let body_vars: BTreeSet<&String> = body
        .iter()
        .filter(|a| !a.builtin)
        .flat_map(|a| &a.args)
        .filter_map(|t| match t {
            RuleTerm::Var(v) => Some(v),
            _ => None,
        })
        .collect();
    for atom in body.iter().filter(|a| a.builtin) {
        for arg in &atom.args {
            if let RuleTerm::Var(v) = arg {
                if !body_vars.contains(v) {
                    return Err(
                        p.err(format!("builtin variable ?{v} is not bound by any body atom"))
                    );
                }
            }
        }
    }

    // Equality head.
    if let Some(Token::Var(_)) = p.peek() {
        let Some(Token::Var(x)) = p.next() else { unreachable!() };
        if p.next() != Some(Token::Tilde) {
            return Err(p.err("expected '~' in equality head".to_string()));
        }
        let y = match p.next() {
            Some(Token::Var(y)) => y,
            other => return Err(p.err(format!("expected a variable after '~', got {other:?}"))),
        };
        if p.peek().is_some() {
            return Err(p.err("trailing tokens after equality head".to_string()));
        }
        for v in [&x, &y] {
            if !body_vars.contains(v) {
                return Err(p.err(format!("equated variable ?{v} does not occur in the body")));
            }
        }
        return Ok(Parsed::Egd(Egd { name, body, x, y }));
    }

    // Atom head: existential rule or datalog rule.
    let mut head = vec![p.atom()?];
    while p.peek() == Some(&Token::Comma) {
        p.next();
        head.push(p.atom()?);
    }
    if p.peek().is_some() {
        return Err(p.err("trailing tokens after rule head".to_string()));
    }
    let mut existentials = Vec::new();
    for atom in &head {
        if atom.builtin {
            return Err(p.err("builtin atom in rule head".to_string()));
        }
        for arg in &atom.args {
            match arg {
                RuleTerm::Var(v) if !body_vars.contains(v) => {
                    return Err(p.err(format!(
                        "head variable ?{v} is neither bound in the body nor marked existential"
                    )));
                }
                RuleTerm::Exist(v) => {
                    if body_vars.contains(v) {
                        return Err(p.err(format!("existential !{v} also occurs in the body")));
                    }
                    if !existentials.contains(v) {
                        existentials.push(v.clone());
                    }
                }
                _ => {}
            }
        }
    }
    if existentials.is_empty() {
        if head.len() != 1 {
            return Err(p.err("auxiliary rules take a single head atom".to_string()));
        }
        Ok(Parsed::Aux(AuxRule { name, body, head: head.into_iter().next().unwrap() }))
    } else {
        Ok(Parsed::Tgd(Tgd { name, body, head, existentials }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_rules_parse_and_validate() {
        let rules = default_rules();
        assert_eq!(rules.tgds.len(), 2);
        assert_eq!(rules.egds.len(), 5);
        assert_eq!(rules.aux.len(), 5);
        assert_eq!(rules.egd_names(), vec!["r3", "r4", "r5", "r6", "r7"]);
        for tgd in &rules.tgds {
            assert_eq!(tgd.existentials.len(), 1, "{} mints one null", tgd.name);
        }
        let with_builtin: Vec<&str> = rules
            .egds
            .iter()
            .filter(|e| e.body.iter().any(|a| a.builtin))
            .map(|e| e.name.as_str())
            .collect();
        assert_eq!(with_builtin, vec!["r6", "r7"]);
        rules.check_acyclic().unwrap();
    }

    #[test]
    fn aux_predicates_are_the_five_label_views() {
        let names = default_rules().aux_predicates();
        let expected: BTreeSet<String> =
            ["ceNoTypLabel", "eNoTypLabel", "eTableLabel", "eTypLabel", "eAuthLabel"]
                .iter()
                .map(|s| s.to_string())
                .collect();
        assert_eq!(names, expected);
    }

    #[test]
    fn equality_rule_round_trips_variables() {
        let set = RuleSet::parse("e1: p(?X, ?L), p(?Y, ?L) -> ?X ~ ?Y").unwrap();
        assert_eq!(set.egds.len(), 1);
        assert_eq!(set.egds[0].x, "X");
        assert_eq!(set.egds[0].y, "Y");
    }

    #[test]
    fn constants_parse_as_terms() {
        let set = RuleSet::parse(r#"t: type(?X, :Column), v(?X, "f1") -> q(?X, !Z)"#).unwrap();
        let body = &set.tgds[0].body;
        assert_eq!(body[0].args[1], RuleTerm::Const(Term::iri(":Column")));
        assert_eq!(body[1].args[1], RuleTerm::Const(Term::string("f1")));
    }

    #[test]
    fn unnamed_rule_rejected() {
        assert!(matches!(
            RuleSet::parse("p(?X) -> q(?X)"),
            Err(RuleError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn unbound_head_variable_rejected() {
        let err = RuleSet::parse("a1: p(?X) -> q(?Y)").unwrap_err();
        assert!(err.to_string().contains("?Y"), "{err}");
    }

    #[test]
    fn equated_variable_must_occur_in_body() {
        let err = RuleSet::parse("e1: p(?X) -> ?X ~ ?Y").unwrap_err();
        assert!(err.to_string().contains("?Y"), "{err}");
    }

    #[test]
    fn builtin_in_head_rejected() {
        let err = RuleSet::parse("b1: p(?X, ?Y) -> @STR_EQ(?X, ?Y)").unwrap_err();
        assert!(err.to_string().contains("builtin"), "{err}");
    }

    #[test]
    fn builtin_needs_bound_variables() {
        let err = RuleSet::parse("b1: p(?X), @STR_EQ(?X, ?Z) -> q(?X)").unwrap_err();
        assert!(err.to_string().contains("?Z"), "{err}");
    }

    #[test]
    fn duplicate_names_rejected() {
        let text = "r: p(?X) -> q(?X)\nr: q(?X) -> s(?X)";
        assert!(matches!(RuleSet::parse(text), Err(RuleError::DuplicateName(n)) if n == "r"));
    }

    #[test]
    fn cyclic_ruleset_rejected() {
        let text = "c1: p(?X) -> q(?X, !Y)\nc2: q(?X, ?Y) -> p(?Y)";
        let rules = RuleSet::parse(text).unwrap();
        assert!(matches!(rules.check_acyclic(), Err(RuleError::Cyclic { .. })));
    }

    #[test]
    fn acyclic_chain_accepted() {
        let text = "c1: p(?X) -> q(?X, !Y)\nc2: q(?X, ?Y) -> r(?Y)";
        RuleSet::parse(text).unwrap().check_acyclic().unwrap();
    }

    #[test]
    fn disable_and_restrict() {
        let mut rules = default_rules();
        rules.disable("r5").unwrap();
        assert!(!rules.is_enabled("r5"));
        assert_eq!(rules.enabled_egds().count(), 4);
        assert!(rules.disable("r99").is_err());

        let mut rules = default_rules();
        rules.restrict_egds(&["r4".to_string()]).unwrap();
        let enabled: Vec<&str> = rules.enabled_egds().map(|e| e.name.as_str()).collect();
        assert_eq!(enabled, vec!["r4"]);
        assert_eq!(rules.enabled_tgds().count(), 2);
        assert!(rules.restrict_egds(&["r1".to_string()]).is_err());
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let text = "# heading\n\nr: p(?X) -> q(?X)  # trailing\n";
        let set = RuleSet::parse(text).unwrap();
        assert_eq!(set.aux.len(), 1);
    }
}
