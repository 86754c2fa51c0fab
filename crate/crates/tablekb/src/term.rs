//! Terms of the knowledge base: iris, typed literals, labeled nulls and
//! variables, with the total order used for canonical representatives.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Datatype tag carried by literals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Datatype {
    String,
    Decimal,
    Integer,
}

impl Datatype {
    /// Membership test with `integer` a subtype of `decimal`.
    pub fn is_subtype_of(self, other: Datatype) -> bool {
        self == other || (self == Datatype::Integer && other == Datatype::Decimal)
    }
}

impl fmt::Display for Datatype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Datatype::String => write!(f, "xsd:string"),
            Datatype::Decimal => write!(f, "xsd:decimal"),
            Datatype::Integer => write!(f, "xsd:integer"),
        }
    }
}

/// A term: iri, typed literal, labeled null, or variable.
///
/// Variables only occur in rules and queries, never in a stored triple.
/// Ground terms are totally ordered: iri < literal < null, lexicographic
/// within iris, by (datatype, lexical form) within literals and by id within
/// nulls. The smallest term of an equivalence class is its canonical
/// representative.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    Iri(String),
    Literal { lexical: String, datatype: Datatype },
    Null(u64),
    Variable(String),
}

impl Term {
    pub fn iri(s: impl Into<String>) -> Term {
        Term::Iri(s.into())
    }

    pub fn string(s: impl Into<String>) -> Term {
        Term::Literal { lexical: s.into(), datatype: Datatype::String }
    }

    pub fn integer(n: i64) -> Term {
        Term::Literal { lexical: n.to_string(), datatype: Datatype::Integer }
    }

    pub fn decimal(s: impl Into<String>) -> Term {
        Term::Literal { lexical: s.into(), datatype: Datatype::Decimal }
    }

    pub fn literal(lexical: impl Into<String>, datatype: Datatype) -> Term {
        Term::Literal { lexical: lexical.into(), datatype }
    }

    pub fn null(id: u64) -> Term {
        Term::Null(id)
    }

    pub fn var(name: impl Into<String>) -> Term {
        Term::Variable(name.into())
    }

    pub fn is_ground(&self) -> bool {
        !matches!(self, Term::Variable(_))
    }

    pub fn is_iri(&self) -> bool {
        matches!(self, Term::Iri(_))
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Literal { .. })
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Term::Null(_))
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri(s) => Some(s),
            _ => None,
        }
    }

    pub fn lexical(&self) -> Option<&str> {
        match self {
            Term::Literal { lexical, .. } => Some(lexical),
            _ => None,
        }
    }

    pub fn datatype(&self) -> Option<Datatype> {
        match self {
            Term::Literal { datatype, .. } => Some(*datatype),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Term::Iri(_) => 0,
            Term::Literal { .. } => 1,
            Term::Null(_) => 2,
            Term::Variable(_) => 3,
        }
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Term::Iri(a), Term::Iri(b)) => a.cmp(b),
            (
                Term::Literal { lexical: la, datatype: da },
                Term::Literal { lexical: lb, datatype: db },
            ) => da.cmp(db).then_with(|| la.cmp(lb)),
            (Term::Null(a), Term::Null(b)) => a.cmp(b),
            (Term::Variable(a), Term::Variable(b)) => a.cmp(b),
            (a, b) => a.rank().cmp(&b.rank()),
        }
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Term {
    /// Renders the term in the line format used by the triple files:
    /// `<iri>`, `"literal"` (with a `^^xsd:…` suffix for numeric datatypes),
    /// `_:n<id>` for nulls and `?name` for variables.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(s) => write!(f, "<{s}>"),
            Term::Literal { lexical, datatype } => {
                write!(f, "\"{}\"", escape_literal(lexical))?;
                match datatype {
                    Datatype::String => Ok(()),
                    dt => write!(f, "^^{dt}"),
                }
            }
            Term::Null(id) => write!(f, "_:n{id}"),
            Term::Variable(name) => write!(f, "?{name}"),
        }
    }
}

pub(crate) fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}
