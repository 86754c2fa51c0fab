//! Triple store with equality classes.
//!
//! The store keeps a set of ground triples together with a union-find over
//! terms. Merging two terms collapses their equivalence classes; the smallest
//! term under the total order becomes the representative and every stored
//! triple is rewritten to representatives. The set of triples is therefore
//! always canonically closed: looking at the store you only ever see
//! canonical terms.

pub mod format;
pub mod query;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::term::Term;

pub use query::{BgpQuery, Bindings, QueryError, QueryFilter, TriplePattern};

/// A ground triple. Subjects are iris or nulls, predicates are iris,
/// objects are any ground term.
pub type Triple = (Term, Term, Term);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StoreError {
    #[error("variable ?{name} in {position} position of triple {index}")]
    VariableInTriple { name: String, position: &'static str, index: usize },
    #[error("literal {0} in subject position")]
    LiteralSubject(String),
    #[error("null _:n{0} in predicate position")]
    NullPredicate(u64),
    #[error("cannot merge literal {0} into a different term")]
    MergeLiteral(String),
    #[error("cannot merge variable ?{0}")]
    MergeVariable(String),
}

/// Triple store with a union-find over its terms.
#[derive(Debug, Clone, Default)]
pub struct FactStore {
    triples: BTreeSet<Triple>,
    by_subject: BTreeMap<Term, BTreeSet<Triple>>,
    by_predicate: BTreeMap<Term, BTreeSet<Triple>>,
    by_object: BTreeMap<Term, BTreeSet<Triple>>,
    /// Union-find parent pointers; a missing entry means the term is its own
    /// representative.
    parent: BTreeMap<Term, Term>,
    next_null: u64,
}

impl PartialEq for FactStore {
    /// Stores compare by their canonical triple sets; the bookkeeping for
    /// null ids and collapsed classes is not observable.
    fn eq(&self, other: &Self) -> bool {
        self.triples == other.triples
    }
}

impl Eq for FactStore {}

impl FactStore {
    pub fn new() -> FactStore {
        FactStore::default()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Iterates triples in term order, smallest first.
    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    /// Canonical representative of a term: the smallest member of its
    /// equivalence class. Terms never merged are their own representative.
    pub fn canonical(&self, term: &Term) -> Term {
        let mut cur = term;
        while let Some(next) = self.parent.get(cur) {
            cur = next;
        }
        cur.clone()
    }

    pub fn canonical_triple(&self, triple: &Triple) -> Triple {
        (
            self.canonical(&triple.0),
            self.canonical(&triple.1),
            self.canonical(&triple.2),
        )
    }

    /// True if the two terms are in the same equivalence class.
    pub fn same_term(&self, a: &Term, b: &Term) -> bool {
        self.canonical(a) == self.canonical(b)
    }

    /// Membership up to equality classes.
    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.contains(&self.canonical_triple(triple))
    }

    /// Mints a fresh labeled null, distinct from every null seen so far.
    pub fn fresh_null(&mut self) -> Term {
        let t = Term::Null(self.next_null);
        self.next_null += 1;
        t
    }

    fn note_null(&mut self, term: &Term) {
        if let Term::Null(id) = term {
            self.next_null = self.next_null.max(id + 1);
        }
    }

    fn check_triple(triple: &Triple, index: usize) -> Result<(), StoreError> {
        for (term, position) in [
            (&triple.0, "subject"),
            (&triple.1, "predicate"),
            (&triple.2, "object"),
        ] {
            if let Term::Variable(name) = term {
                return Err(StoreError::VariableInTriple {
                    name: name.clone(),
                    position,
                    index,
                });
            }
        }
        if triple.0.is_literal() {
            return Err(StoreError::LiteralSubject(triple.0.to_string()));
        }
        match &triple.1 {
            Term::Iri(_) => {}
            Term::Null(id) => return Err(StoreError::NullPredicate(*id)),
            _ => unreachable!("variables rejected above, literals are not orderable here"),
        }
        Ok(())
    }

    /// Inserts one triple, canonicalizing it first. Returns true if it was
    /// not already present.
    pub fn insert(&mut self, triple: Triple) -> Result<bool, StoreError> {
        Self::check_triple(&triple, 0)?;
        Ok(self.insert_canonical(self.canonical_triple(&triple)))
    }

    /// Inserts a batch of triples; the error for a bad triple carries its
    /// index within the batch.
    pub fn insert_triples<I>(&mut self, triples: I) -> Result<usize, StoreError>
    where
        I: IntoIterator<Item = Triple>,
    {
        let mut added = 0;
        for (index, triple) in triples.into_iter().enumerate() {
            Self::check_triple(&triple, index)?;
            if self.insert_canonical(self.canonical_triple(&triple)) {
                added += 1;
            }
        }
        Ok(added)
    }

    fn insert_canonical(&mut self, triple: Triple) -> bool {
        self.note_null(&triple.0);
        self.note_null(&triple.2);
        if !self.triples.insert(triple.clone()) {
            return false;
        }
        self.by_subject.entry(triple.0.clone()).or_default().insert(triple.clone());
        self.by_predicate.entry(triple.1.clone()).or_default().insert(triple.clone());
        self.by_object.entry(triple.2.clone()).or_default().insert(triple);
        true
    }

    /// Removes a triple (up to equality classes). Returns true if present.
    pub fn remove(&mut self, triple: &Triple) -> bool {
        let canon = self.canonical_triple(triple);
        if !self.triples.remove(&canon) {
            return false;
        }
        for (index, key) in [
            (&mut self.by_subject, &canon.0),
            (&mut self.by_predicate, &canon.1),
            (&mut self.by_object, &canon.2),
        ] {
            if let Some(set) = index.get_mut(key) {
                set.remove(&canon);
                if set.is_empty() {
                    index.remove(key);
                }
            }
        }
        true
    }

    /// Merges the equivalence classes of two terms and rewrites affected
    /// triples to the new representative. Returns the representative.
    ///
    /// Literals only merge with themselves and variables never merge, so the
    /// value of a literal can never silently change.
    pub fn merge_terms(&mut self, a: &Term, b: &Term) -> Result<Term, StoreError> {
        if let Term::Variable(name) = a {
            return Err(StoreError::MergeVariable(name.clone()));
        }
        if let Term::Variable(name) = b {
            return Err(StoreError::MergeVariable(name.clone()));
        }
        let ra = self.canonical(a);
        let rb = self.canonical(b);
        if ra == rb {
            return Ok(ra);
        }
        // The larger representative loses its class to the smaller one.
        let (winner, loser) = if ra < rb { (ra, rb) } else { (rb, ra) };
        if winner.is_literal() || loser.is_literal() {
            // Equality applies to entity terms; a literal only ever equals
            // itself, which the ra == rb check above already handled.
            let lit = if winner.is_literal() { &winner } else { &loser };
            return Err(StoreError::MergeLiteral(lit.to_string()));
        }
        self.parent.insert(loser.clone(), winner.clone());

        let mut touched: BTreeSet<Triple> = BTreeSet::new();
        for index in [&self.by_subject, &self.by_predicate, &self.by_object] {
            if let Some(set) = index.get(&loser) {
                touched.extend(set.iter().cloned());
            }
        }
        for triple in &touched {
            self.remove_exact(triple);
        }
        for triple in touched {
            let rewritten = (
                if triple.0 == loser { winner.clone() } else { triple.0 },
                if triple.1 == loser { winner.clone() } else { triple.1 },
                if triple.2 == loser { winner.clone() } else { triple.2 },
            );
            self.insert_canonical(rewritten);
        }
        Ok(winner)
    }

    fn remove_exact(&mut self, triple: &Triple) {
        self.triples.remove(triple);
        for (index, key) in [
            (&mut self.by_subject, &triple.0),
            (&mut self.by_predicate, &triple.1),
            (&mut self.by_object, &triple.2),
        ] {
            if let Some(set) = index.get_mut(key) {
                set.remove(triple);
                if set.is_empty() {
                    index.remove(key);
                }
            }
        }
    }

    /// All triples matching the given bound positions, using the most
    /// selective available index. `None` matches anything.
    pub fn matching(
        &self,
        subject: Option<&Term>,
        predicate: Option<&Term>,
        object: Option<&Term>,
    ) -> Vec<Triple> {
        let subject = subject.map(|t| self.canonical(t));
        let predicate = predicate.map(|t| self.canonical(t));
        let object = object.map(|t| self.canonical(t));
        let empty = BTreeSet::new();
        let candidates: &BTreeSet<Triple> = if let Some(s) = &subject {
            self.by_subject.get(s).unwrap_or(&empty)
        } else if let Some(o) = &object {
            self.by_object.get(o).unwrap_or(&empty)
        } else if let Some(p) = &predicate {
            self.by_predicate.get(p).unwrap_or(&empty)
        } else {
            &self.triples
        };
        candidates
            .iter()
            .filter(|t| {
                subject.as_ref().is_none_or(|s| &t.0 == s)
                    && predicate.as_ref().is_none_or(|p| &t.1 == p)
                    && object.as_ref().is_none_or(|o| &t.2 == o)
            })
            .cloned()
            .collect()
    }

    /// Objects of all `(subject, predicate, ?)` triples.
    pub fn objects(&self, subject: &Term, predicate: &Term) -> Vec<Term> {
        self.matching(Some(subject), Some(predicate), None)
            .into_iter()
            .map(|t| t.2)
            .collect()
    }

    /// Subjects of all `(?, predicate, object)` triples.
    pub fn subjects(&self, predicate: &Term, object: &Term) -> Vec<Term> {
        self.matching(None, Some(predicate), Some(object))
            .into_iter()
            .map(|t| t.0)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str, p: &str, o: Term) -> Triple {
        (Term::iri(s), Term::iri(p), o)
    }

    #[test]
    fn insert_deduplicates() {
        let mut store = FactStore::new();
        assert!(store.insert(t(":a", ":p", Term::string("x"))).unwrap());
        assert!(!store.insert(t(":a", ":p", Term::string("x"))).unwrap());
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn insert_rejects_variable_with_position() {
        let mut store = FactStore::new();
        let err = store
            .insert_triples(vec![
                t(":a", ":p", Term::string("x")),
                (Term::iri(":a"), Term::iri(":p"), Term::var("Y")),
            ])
            .unwrap_err();
        assert_eq!(
            err,
            StoreError::VariableInTriple { name: "Y".into(), position: "object", index: 1 }
        );
    }

    #[test]
    fn insert_rejects_literal_subject() {
        let mut store = FactStore::new();
        let err = store
            .insert((Term::string("s"), Term::iri(":p"), Term::iri(":o")))
            .unwrap_err();
        assert!(matches!(err, StoreError::LiteralSubject(_)));
    }

    #[test]
    fn merge_picks_smaller_representative_and_rewrites() {
        let mut store = FactStore::new();
        store.insert(t(":e1", ":p", Term::null(5))).unwrap();
        store
            .insert((Term::null(5), Term::iri(":q"), Term::string("v")))
            .unwrap();
        let rep = store
            .merge_terms(&Term::iri(":e1"), &Term::null(5))
            .unwrap();
        assert_eq!(rep, Term::iri(":e1"));
        assert!(store.contains(&t(":e1", ":p", Term::iri(":e1"))));
        assert!(store.contains(&t(":e1", ":q", Term::string("v"))));
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn merge_is_transitive_through_classes() {
        let mut store = FactStore::new();
        store.insert(t(":x", ":p", Term::null(1))).unwrap();
        store.insert(t(":x", ":p", Term::null(2))).unwrap();
        store.merge_terms(&Term::null(1), &Term::null(2)).unwrap();
        store.merge_terms(&Term::null(2), &Term::iri(":a")).unwrap();
        assert_eq!(store.canonical(&Term::null(1)), Term::iri(":a"));
        assert_eq!(store.len(), 1);
        assert!(store.contains(&t(":x", ":p", Term::iri(":a"))));
    }

    #[test]
    fn merge_distinct_literals_rejected() {
        let mut store = FactStore::new();
        let err = store
            .merge_terms(&Term::string("a"), &Term::string("b"))
            .unwrap_err();
        assert!(matches!(err, StoreError::MergeLiteral(_)));
        let same = store
            .merge_terms(&Term::string("a"), &Term::string("a"))
            .unwrap();
        assert_eq!(same, Term::string("a"));
    }

    #[test]
    fn merge_null_into_literal_rejected() {
        let mut store = FactStore::new();
        store.insert(t(":a", ":p", Term::null(5))).unwrap();
        let err = store
            .merge_terms(&Term::null(5), &Term::string("x"))
            .unwrap_err();
        assert!(matches!(err, StoreError::MergeLiteral(_)));
        assert!(store.contains(&t(":a", ":p", Term::null(5))));
    }

    #[test]
    fn contains_sees_through_equality() {
        let mut store = FactStore::new();
        store.insert(t(":a", ":p", Term::null(9))).unwrap();
        store.merge_terms(&Term::null(9), &Term::iri(":b")).unwrap();
        assert!(store.contains(&t(":a", ":p", Term::null(9))));
        assert!(store.contains(&t(":a", ":p", Term::iri(":b"))));
    }

    #[test]
    fn fresh_null_skips_inserted_ids() {
        let mut store = FactStore::new();
        store.insert(t(":a", ":p", Term::null(7))).unwrap();
        assert_eq!(store.fresh_null(), Term::null(8));
        assert_eq!(store.fresh_null(), Term::null(9));
    }

    #[test]
    fn matching_uses_bound_positions() {
        let mut store = FactStore::new();
        store.insert(t(":a", ":p", Term::integer(1))).unwrap();
        store.insert(t(":a", ":q", Term::integer(2))).unwrap();
        store.insert(t(":b", ":p", Term::integer(1))).unwrap();
        assert_eq!(store.matching(Some(&Term::iri(":a")), None, None).len(), 2);
        assert_eq!(store.matching(None, Some(&Term::iri(":p")), None).len(), 2);
        assert_eq!(store.matching(None, None, Some(&Term::integer(1))).len(), 2);
        assert_eq!(
            store
                .matching(Some(&Term::iri(":b")), Some(&Term::iri(":p")), None)
                .len(),
            1
        );
    }

    #[test]
    fn remove_respects_equality_classes() {
        let mut store = FactStore::new();
        store.insert(t(":a", ":p", Term::null(3))).unwrap();
        store.merge_terms(&Term::null(3), &Term::iri(":c")).unwrap();
        assert!(store.remove(&t(":a", ":p", Term::null(3))));
        assert!(store.is_empty());
    }
}
