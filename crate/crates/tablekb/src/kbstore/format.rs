//! Line-based triple file format.
//!
//! One triple per line, `<subject> <predicate> <object> .`, UTF-8 with `\n`
//! line ends. Iris are angle-bracketed, literals quoted with a `^^xsd:…`
//! suffix for numeric datatypes, nulls written `_:n<id>`. Lines are emitted
//! sorted so serialization is deterministic and parse then serialize is the
//! identity on the file.

use thiserror::Error;

use crate::kbstore::{FactStore, Triple};
use crate::term::{Datatype, Term};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct TripleFormatError {
    pub line: usize,
    pub message: String,
}

fn fail(line: usize, message: impl Into<String>) -> TripleFormatError {
    TripleFormatError { line, message: message.into() }
}

/// Serializes a store to sorted triple lines (empty string for an empty
/// store, trailing newline otherwise).
pub fn serialize(store: &FactStore) -> String {
    let mut lines: Vec<String> = store
        .iter()
        .map(|(s, p, o)| format!("{s} {p} {o} ."))
        .collect();
    lines.sort();
    let mut out = lines.join("\n");
    if !out.is_empty() {
        out.push('\n');
    }
    out
}

/// Parses triple lines back into a store. Blank lines and `#` comment lines
/// are skipped.
pub fn parse(text: &str) -> Result<FactStore, TripleFormatError> {
    let mut store = FactStore::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let triple = parse_line(line, line_no)?;
        store
            .insert(triple)
            .map_err(|e| fail(line_no, e.to_string()))?;
    }
    Ok(store)
}

fn parse_line(line: &str, line_no: usize) -> Result<Triple, TripleFormatError> {
    let mut rest = line;
    let subject = take_term(&mut rest, line_no)?;
    let predicate = take_term(&mut rest, line_no)?;
    let object = take_term(&mut rest, line_no)?;
    let rest = rest.trim_start();
    if rest != "." {
        return Err(fail(line_no, format!("expected terminating '.', found {rest:?}")));
    }
    Ok((subject, predicate, object))
}

fn take_term(rest: &mut &str, line_no: usize) -> Result<Term, TripleFormatError> {
    *rest = rest.trim_start();
    let s = *rest;
    if let Some(tail) = s.strip_prefix('<') {
        let end = tail
            .find('>')
            .ok_or_else(|| fail(line_no, "unterminated iri, missing '>'"))?;
        let iri = &tail[..end];
        *rest = &tail[end + 1..];
        return Ok(Term::iri(iri));
    }
    if let Some(tail) = s.strip_prefix("_:n") {
        let end = tail
            .find(|c: char| !c.is_ascii_digit())
            .unwrap_or(tail.len());
        if end == 0 {
            return Err(fail(line_no, "expected digits after '_:n'"));
        }
        let id: u64 = tail[..end]
            .parse()
            .map_err(|_| fail(line_no, "null id out of range"))?;
        *rest = &tail[end..];
        return Ok(Term::null(id));
    }
    if let Some(tail) = s.strip_prefix('"') {
        let (lexical, after) = take_quoted(tail, line_no)?;
        let (datatype, after) = if let Some(dt_tail) = after.strip_prefix("^^") {
            if let Some(t) = dt_tail.strip_prefix("xsd:decimal") {
                (Datatype::Decimal, t)
            } else if let Some(t) = dt_tail.strip_prefix("xsd:integer") {
                (Datatype::Integer, t)
            } else if let Some(t) = dt_tail.strip_prefix("xsd:string") {
                (Datatype::String, t)
            } else {
                return Err(fail(line_no, format!("unknown datatype suffix in {dt_tail:?}")));
            }
        } else {
            (Datatype::String, after)
        };
        *rest = after;
        return Ok(Term::literal(lexical, datatype));
    }
    Err(fail(line_no, format!("expected term, found {s:?}")))
}

fn take_quoted(tail: &str, line_no: usize) -> Result<(String, &str), TripleFormatError> {
    let mut value = String::new();
    let mut chars = tail.char_indices();
    while let Some((i, c)) = chars.next() {
        match c {
            '"' => return Ok((value, &tail[i + 1..])),
            '\\' => match chars.next() {
                Some((_, '"')) => value.push('"'),
                Some((_, '\\')) => value.push('\\'),
                Some((_, 'n')) => value.push('\n'),
                Some((_, 't')) => value.push('\t'),
                Some((_, 'r')) => value.push('\r'),
                other => {
                    return Err(fail(
                        line_no,
                        format!("bad escape {:?} in literal", other.map(|(_, c)| c)),
                    ))
                }
            },
            c => value.push(c),
        }
    }
    Err(fail(line_no, "unterminated literal, missing closing '\"'"))
}
