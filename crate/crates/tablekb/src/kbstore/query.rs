//! Basic graph pattern queries over the store.
//!
//! A query is a list of triple patterns plus filters, evaluated by
//! backtracking joins with set semantics. A small text syntax covers the
//! common select/distinct/where form:
//!
//! ```text
//! select distinct ?column where {
//!   ?table :hasCol ?column ; :hasCell ?cell .
//!   ?column :hasTitle "f1" .
//!   ?cell rdf:type xsd:decimal .
//! }
//! ```
//!
//! `?x rdf:type xsd:<dt>` is sugar: it constrains the value of `?x` to carry
//! the datatype rather than matching a stored type triple.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::kbstore::FactStore;
use crate::term::{Datatype, Term};

/// One triple pattern; any position may hold a variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriplePattern {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl TriplePattern {
    pub fn new(subject: Term, predicate: Term, object: Term) -> TriplePattern {
        TriplePattern { subject, predicate, object }
    }

    fn terms(&self) -> [&Term; 3] {
        [&self.subject, &self.predicate, &self.object]
    }
}

/// Filters applied to fully bound solutions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryFilter {
    /// The variable is a literal whose lexical form equals the value.
    LiteralEq { var: String, value: String },
    /// Case-insensitive variant of `LiteralEq`, by full case folding.
    CaseInsensitiveEq { var: String, value: String },
    /// The variable is a literal whose datatype lies within the given one
    /// (`integer` lies within `decimal`).
    DatatypeWithin { var: String, datatype: Datatype },
}

impl QueryFilter {
    fn var(&self) -> &str {
        match self {
            QueryFilter::LiteralEq { var, .. }
            | QueryFilter::CaseInsensitiveEq { var, .. }
            | QueryFilter::DatatypeWithin { var, .. } => var,
        }
    }

    fn accepts(&self, term: &Term) -> bool {
        match self {
            QueryFilter::LiteralEq { value, .. } => term.lexical() == Some(value.as_str()),
            QueryFilter::CaseInsensitiveEq { value, .. } => term
                .lexical()
                .is_some_and(|lex| crate::casefold(lex) == crate::casefold(value)),
            QueryFilter::DatatypeWithin { datatype, .. } => term
                .datatype()
                .is_some_and(|dt| dt.is_subtype_of(*datatype)),
        }
    }
}

/// A basic graph pattern query with projection and filters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BgpQuery {
    pub patterns: Vec<TriplePattern>,
    pub filters: Vec<QueryFilter>,
    /// Variable names (without `?`) projected into the result bindings.
    pub projection: Vec<String>,
}

/// One solution: projected variable names to ground terms.
pub type Bindings = BTreeMap<String, Term>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("projected variable ?{0} does not occur in any pattern")]
    UnknownProjection(String),
    #[error("filter variable ?{0} does not occur in any pattern")]
    UnknownFilterVariable(String),
    #[error("query has no patterns")]
    Empty,
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
}

impl BgpQuery {
    pub fn new(patterns: Vec<TriplePattern>, projection: Vec<String>) -> BgpQuery {
        BgpQuery { patterns, filters: Vec::new(), projection }
    }

    pub fn with_filters(mut self, filters: Vec<QueryFilter>) -> BgpQuery {
        self.filters = filters;
        self
    }

    /// Every projected and filtered variable must occur in some pattern.
    pub fn validate(&self) -> Result<(), QueryError> {
        if self.patterns.is_empty() {
            return Err(QueryError::Empty);
        }
        let mut pattern_vars: BTreeSet<&str> = BTreeSet::new();
        for pattern in &self.patterns {
            for term in pattern.terms() {
                if let Term::Variable(name) = term {
                    pattern_vars.insert(name);
                }
            }
        }
        for name in &self.projection {
            if !pattern_vars.contains(name.as_str()) {
                return Err(QueryError::UnknownProjection(name.clone()));
            }
        }
        for filter in &self.filters {
            if !pattern_vars.contains(filter.var()) {
                return Err(QueryError::UnknownFilterVariable(filter.var().to_string()));
            }
        }
        Ok(())
    }

    /// Parses the select/distinct/where text form.
    pub fn parse(text: &str) -> Result<BgpQuery, QueryError> {
        parser::parse_query(text)
    }
}

impl FactStore {
    /// Evaluates a query and returns the distinct projected bindings.
    pub fn match_bgp(&self, query: &BgpQuery) -> Result<BTreeSet<Bindings>, QueryError> {
        query.validate()?;
        let mut results = BTreeSet::new();
        let mut env: BTreeMap<String, Term> = BTreeMap::new();
        self.solve(query, 0, &mut env, &mut results);
        Ok(results)
    }

    fn solve(
        &self,
        query: &BgpQuery,
        depth: usize,
        env: &mut BTreeMap<String, Term>,
        results: &mut BTreeSet<Bindings>,
    ) {
        if depth == query.patterns.len() {
            for filter in &query.filters {
                let bound = &env[filter.var()];
                if !filter.accepts(bound) {
                    return;
                }
            }
            let projected: Bindings = query
                .projection
                .iter()
                .map(|name| (name.clone(), env[name].clone()))
                .collect();
            results.insert(projected);
            return;
        }
        let pattern = &query.patterns[depth];
        let resolve = |term: &Term, env: &BTreeMap<String, Term>| -> Option<Term> {
            match term {
                Term::Variable(name) => env.get(name).cloned(),
                ground => Some(ground.clone()),
            }
        };
        let s = resolve(&pattern.subject, env);
        let p = resolve(&pattern.predicate, env);
        let o = resolve(&pattern.object, env);
        for triple in self.matching(s.as_ref(), p.as_ref(), o.as_ref()) {
            let mut bound_here: Vec<String> = Vec::new();
            let mut ok = true;
            for (term, value) in [
                (&pattern.subject, &triple.0),
                (&pattern.predicate, &triple.1),
                (&pattern.object, &triple.2),
            ] {
                if let Term::Variable(name) = term {
                    match env.get(name) {
                        Some(existing) if existing == value => {}
                        Some(_) => {
                            ok = false;
                            break;
                        }
                        None => {
                            env.insert(name.clone(), value.clone());
                            bound_here.push(name.clone());
                        }
                    }
                }
            }
            if ok {
                self.solve(query, depth + 1, env, results);
            }
            for name in bound_here {
                env.remove(&name);
            }
        }
    }
}

mod parser {
    use super::*;

    #[derive(Debug, Clone, PartialEq)]
    enum Token {
        Keyword(String),
        Var(String),
        Iri(String),
        Str(String),
        Int(String),
        Dec(String),
        Punct(char),
    }

    struct Lexer<'a> {
        chars: std::iter::Peekable<std::str::Chars<'a>>,
        line: usize,
        column: usize,
    }

    fn err(line: usize, column: usize, message: impl Into<String>) -> QueryError {
        QueryError::Parse { line, column, message: message.into() }
    }

    impl<'a> Lexer<'a> {
        fn new(text: &'a str) -> Lexer<'a> {
            Lexer { chars: text.chars().peekable(), line: 1, column: 1 }
        }

        fn bump(&mut self) -> Option<char> {
            let c = self.chars.next()?;
            if c == '\n' {
                self.line += 1;
                self.column = 1;
            } else {
                self.column += 1;
            }
            Some(c)
        }

        fn tokens(mut self) -> Result<Vec<(Token, usize, usize)>, QueryError> {
            let mut out = Vec::new();
            while let Some(&c) = self.chars.peek() {
                let (line, column) = (self.line, self.column);
                match c {
                    c if c.is_whitespace() => {
                        self.bump();
                    }
                    '#' => {
                        while let Some(&c) = self.chars.peek() {
                            if c == '\n' {
                                break;
                            }
                            self.bump();
                        }
                    }
                    '{' | '}' | ';' | ',' | '.' | '(' | ')' => {
                        self.bump();
                        out.push((Token::Punct(c), line, column));
                    }
                    '?' => {
                        self.bump();
                        let name = self.take_word();
                        if name.is_empty() {
                            return Err(err(line, column, "expected variable name after '?'"));
                        }
                        out.push((Token::Var(name), line, column));
                    }
                    '"' => {
                        self.bump();
                        let mut value = String::new();
                        loop {
                            match self.bump() {
                                Some('"') => break,
                                Some('\\') => match self.bump() {
                                    Some('"') => value.push('"'),
                                    Some('\\') => value.push('\\'),
                                    Some('n') => value.push('\n'),
                                    Some('t') => value.push('\t'),
                                    Some('r') => value.push('\r'),
                                    other => {
                                        return Err(err(
                                            self.line,
                                            self.column,
                                            format!("bad escape {other:?} in string"),
                                        ))
                                    }
                                },
                                Some(c) => value.push(c),
                                None => {
                                    return Err(err(line, column, "unterminated string literal"))
                                }
                            }
                        }
                        out.push((Token::Str(value), line, column));
                    }
                    c if c.is_ascii_digit() => {
                        let mut lex = String::new();
                        let mut decimal = false;
                        while let Some(&c) = self.chars.peek() {
                            if c.is_ascii_digit() {
                                lex.push(c);
                                self.bump();
                            } else if c == '.' && !decimal {
                                // A digit must follow, otherwise the dot ends the
                                // triple.
                                let mut ahead = self.chars.clone();
                                ahead.next();
                                if ahead.peek().is_some_and(|d| d.is_ascii_digit()) {
                                    decimal = true;
                                    lex.push('.');
                                    self.bump();
                                } else {
                                    break;
                                }
                            } else {
                                break;
                            }
                        }
                        let token = if decimal { Token::Dec(lex) } else { Token::Int(lex) };
                        out.push((token, line, column));
                    }
                    ':' => {
                        self.bump();
                        let name = self.take_word();
                        out.push((Token::Iri(format!(":{name}")), line, column));
                    }
                    c if c.is_alphabetic() || c == '_' => {
                        let word = self.take_word();
                        if self.chars.peek() == Some(&':') {
                            self.bump();
                            let local = self.take_word();
                            out.push((Token::Iri(format!("{word}:{local}")), line, column));
                        } else {
                            out.push((Token::Keyword(word), line, column));
                        }
                    }
                    other => {
                        return Err(err(line, column, format!("unexpected character {other:?}")))
                    }
                }
            }
            Ok(out)
        }

        fn take_word(&mut self) -> String {
            let mut word = String::new();
            while let Some(&c) = self.chars.peek() {
                if c.is_alphanumeric() || c == '_' || c == '-' {
                    word.push(c);
                    self.bump();
                } else {
                    break;
                }
            }
            word
        }
    }

    struct Parser {
        tokens: Vec<(Token, usize, usize)>,
        pos: usize,
        patterns: Vec<TriplePattern>,
        filters: Vec<QueryFilter>,
        hidden: usize,
    }

    pub(super) fn parse_query(text: &str) -> Result<BgpQuery, QueryError> {
        let tokens = Lexer::new(text).tokens()?;
        let mut parser = Parser { tokens, pos: 0, patterns: Vec::new(), filters: Vec::new(), hidden: 0 };
        parser.query()
    }

    impl Parser {
        fn peek(&self) -> Option<&Token> {
            self.tokens.get(self.pos).map(|(t, _, _)| t)
        }

        fn here(&self) -> (usize, usize) {
            self.tokens
                .get(self.pos)
                .or_else(|| self.tokens.last())
                .map(|&(_, l, c)| (l, c))
                .unwrap_or((1, 1))
        }

        fn next(&mut self, what: &str) -> Result<Token, QueryError> {
            let (line, column) = self.here();
            match self.tokens.get(self.pos) {
                Some((t, _, _)) => {
                    self.pos += 1;
                    Ok(t.clone())
                }
                None => Err(err(line, column, format!("expected {what}, found end of input"))),
            }
        }

        fn expect_punct(&mut self, c: char) -> Result<(), QueryError> {
            let (line, column) = self.here();
            match self.next(&format!("'{c}'"))? {
                Token::Punct(p) if p == c => Ok(()),
                other => Err(err(line, column, format!("expected '{c}', found {other:?}"))),
            }
        }

        fn expect_keyword(&mut self, word: &str) -> Result<(), QueryError> {
            let (line, column) = self.here();
            match self.next(word)? {
                Token::Keyword(w) if w == word => Ok(()),
                other => Err(err(line, column, format!("expected '{word}', found {other:?}"))),
            }
        }

        fn query(&mut self) -> Result<BgpQuery, QueryError> {
            self.expect_keyword("select")?;
            if self.peek() == Some(&Token::Keyword("distinct".into())) {
                self.pos += 1;
            }
            let mut projection = Vec::new();
            while let Some(Token::Var(name)) = self.peek() {
                projection.push(name.clone());
                self.pos += 1;
            }
            let (line, column) = self.here();
            if projection.is_empty() {
                return Err(err(line, column, "expected at least one projected variable"));
            }
            self.expect_keyword("where")?;
            self.expect_punct('{')?;
            loop {
                match self.peek() {
                    Some(Token::Punct('}')) => {
                        self.pos += 1;
                        break;
                    }
                    Some(Token::Keyword(w)) if w == "filter" => {
                        self.pos += 1;
                        self.filter()?;
                    }
                    Some(_) => self.triples_block()?,
                    None => {
                        let (line, column) = self.here();
                        return Err(err(line, column, "expected '}', found end of input"));
                    }
                }
            }
            let (line, column) = self.here();
            if self.peek().is_some() {
                return Err(err(line, column, "trailing input after '}'"));
            }
            let query = BgpQuery {
                patterns: std::mem::take(&mut self.patterns),
                filters: std::mem::take(&mut self.filters),
                projection,
            };
            query.validate()?;
            Ok(query)
        }

        fn term(&mut self, what: &str) -> Result<Term, QueryError> {
            let (line, column) = self.here();
            match self.next(what)? {
                Token::Var(name) => Ok(Term::var(name)),
                Token::Iri(iri) => Ok(Term::iri(iri)),
                Token::Str(s) => Ok(Term::string(s)),
                Token::Int(s) => Ok(Term::Literal { lexical: s, datatype: Datatype::Integer }),
                Token::Dec(s) => Ok(Term::Literal { lexical: s, datatype: Datatype::Decimal }),
                other => Err(err(line, column, format!("expected {what}, found {other:?}"))),
            }
        }

        fn triples_block(&mut self) -> Result<(), QueryError> {
            let subject = self.term("subject")?;
            loop {
                let (line, column) = self.here();
                let predicate = self.term("predicate")?;
                if !matches!(predicate, Term::Iri(_) | Term::Variable(_)) {
                    return Err(err(line, column, "predicate must be an iri or variable"));
                }
                loop {
                    let object = self.term("object")?;
                    self.add_pattern(subject.clone(), predicate.clone(), object);
                    if self.peek() == Some(&Token::Punct(',')) {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                match self.peek() {
                    Some(Token::Punct(';')) => {
                        self.pos += 1;
                        // A dangling ';' before '.' or '}' is tolerated.
                        if matches!(self.peek(), Some(Token::Punct('.')) | Some(Token::Punct('}'))) {
                            break;
                        }
                    }
                    _ => break,
                }
            }
            if self.peek() == Some(&Token::Punct('.')) {
                self.pos += 1;
            }
            Ok(())
        }

        /// `?x rdf:type xsd:<dt>` becomes a value pattern plus a datatype
        /// filter on a hidden variable; everything else is stored as-is.
        fn add_pattern(&mut self, subject: Term, predicate: Term, object: Term) {
            if predicate.as_iri() == Some("rdf:type") {
                if let Some(datatype) = object.as_iri().and_then(datatype_iri) {
                    let hidden = format!("__dt{}", self.hidden);
                    self.hidden += 1;
                    self.patterns.push(TriplePattern::new(
                        subject,
                        Term::iri("rdf:value"),
                        Term::var(hidden.clone()),
                    ));
                    self.filters.push(QueryFilter::DatatypeWithin { var: hidden, datatype });
                    return;
                }
            }
            self.patterns.push(TriplePattern::new(subject, predicate, object));
        }

        fn filter(&mut self) -> Result<(), QueryError> {
            let (line, column) = self.here();
            let name = match self.next("filter name")? {
                Token::Keyword(w) => w,
                other => {
                    return Err(err(line, column, format!("expected filter name, found {other:?}")))
                }
            };
            self.expect_punct('(')?;
            let var = match self.next("variable")? {
                Token::Var(v) => v,
                other => return Err(err(line, column, format!("expected variable, found {other:?}"))),
            };
            self.expect_punct(',')?;
            let filter = match name.as_str() {
                "eq" | "ci_eq" => {
                    let (vline, vcolumn) = self.here();
                    let value = match self.next("string literal")? {
                        Token::Str(s) => s,
                        Token::Int(s) | Token::Dec(s) => s,
                        other => {
                            return Err(err(
                                vline,
                                vcolumn,
                                format!("expected literal value, found {other:?}"),
                            ))
                        }
                    };
                    if name == "eq" {
                        QueryFilter::LiteralEq { var, value }
                    } else {
                        QueryFilter::CaseInsensitiveEq { var, value }
                    }
                }
                "datatype" => {
                    let (vline, vcolumn) = self.here();
                    let datatype = match self.next("datatype iri")? {
                        Token::Iri(iri) => datatype_iri(&iri).ok_or_else(|| {
                            err(vline, vcolumn, format!("unknown datatype {iri}"))
                        })?,
                        other => {
                            return Err(err(
                                vline,
                                vcolumn,
                                format!("expected datatype iri, found {other:?}"),
                            ))
                        }
                    };
                    QueryFilter::DatatypeWithin { var, datatype }
                }
                other => {
                    return Err(err(
                        line,
                        column,
                        format!("unknown filter '{other}', expected eq, ci_eq or datatype"),
                    ))
                }
            };
            self.expect_punct(')')?;
            if self.peek() == Some(&Token::Punct('.')) {
                self.pos += 1;
            }
            self.filters.push(filter);
            Ok(())
        }
    }

    fn datatype_iri(iri: &str) -> Option<Datatype> {
        match iri {
            "xsd:string" => Some(Datatype::String),
            "xsd:decimal" => Some(Datatype::Decimal),
            "xsd:integer" => Some(Datatype::Integer),
            _ => None,
        }
    }
}
