//! Restricted chase over the linking rules.
//!
//! The knowledge base triples are viewed as a relational fact store:
//! `(s, p, o)` becomes `p'(s, o)` with the predicate iri shortened to a bare
//! name. Grounding also seeds three relations the rules cannot derive:
//! `mention` for non-numeric cells outside header rows, `columnClass` for
//! predicted column classes other than `Other`, and `paperAuthor` from
//! fetched metadata. Each chase round re-derives the auxiliary label views,
//! fires existential rules only where their head is not already satisfied,
//! and applies equality rules by rewriting the losing term everywhere, until
//! nothing changes. Merged terms are always the entity nulls, so the
//! underlying triples stay untouched until materialization.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::casefold;
use crate::ingest::PaperMeta;
use crate::kbstore::{FactStore, Triple};
use crate::linker::rules::{RuleAtom, RuleError, RuleSet, RuleTerm, Tgd};
use crate::term::{Datatype, Term};
use crate::vocab;

/// Relation holding column entity assignments, written by rule r1.
pub const COL_ENTITY: &str = "colEntity";
/// Relation holding cell entity assignments, written by rule r2.
pub const CELL_ENTITY: &str = "cellEntity";
/// Seeded relation marking cells that carry an entity mention.
pub const MENTION: &str = "mention";
/// Seeded relation holding predicted non-Other column classes.
pub const COLUMN_CLASS: &str = "columnClass";
/// Seeded relation joining papers to their author iris.
pub const PAPER_AUTHOR: &str = "paperAuthor";

#[derive(Debug, Error)]
pub enum ChaseError {
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("chase exceeded its step budget ({steps} > {budget})")]
    Budget { steps: usize, budget: usize },
    #[error("auxiliary rule derives into base relation {predicate}")]
    AuxShadowsBase { predicate: String },
    #[error("{iri} ended up with two distinct entities")]
    ConflictingEntities { iri: String },
}

#[derive(Debug, Error)]
pub enum PrecisionError {
    #[error("cells missing from the gold map: {}", cells.join(", "))]
    MissingGold { cells: Vec<String> },
}

/// Named relations over ground terms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelStore {
    relations: BTreeMap<String, BTreeSet<Vec<Term>>>,
}

impl RelStore {
    pub fn new() -> RelStore {
        RelStore::default()
    }

    /// Inserts a fact; false if it was already present.
    pub fn insert(&mut self, predicate: &str, fact: Vec<Term>) -> bool {
        self.relations.entry(predicate.to_string()).or_default().insert(fact)
    }

    pub fn facts(&self, predicate: &str) -> impl Iterator<Item = &Vec<Term>> {
        self.relations.get(predicate).into_iter().flatten()
    }

    pub fn contains(&self, predicate: &str, fact: &[Term]) -> bool {
        self.relations.get(predicate).is_some_and(|facts| facts.contains(fact))
    }

    pub fn predicates(&self) -> impl Iterator<Item = &String> {
        self.relations.keys()
    }

    pub fn len(&self) -> usize {
        self.relations.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear_relation(&mut self, predicate: &str) {
        self.relations.remove(predicate);
    }

    /// Replaces every occurrence of `loser` with `winner` in every fact.
    pub fn rewrite_term(&mut self, loser: &Term, winner: &Term) {
        for facts in self.relations.values_mut() {
            let hit: Vec<Vec<Term>> =
                facts.iter().filter(|f| f.contains(loser)).cloned().collect();
            for fact in hit {
                facts.remove(&fact);
                let rewritten: Vec<Term> = fact
                    .into_iter()
                    .map(|t| if &t == loser { winner.clone() } else { t })
                    .collect();
                facts.insert(rewritten);
            }
        }
    }
}

pub type RuleBindings = BTreeMap<String, Term>;

/// Case-insensitive literal equality under full Unicode case folding.
pub fn str_eq(a: &Term, b: &Term) -> bool {
    match ((a.lexical(), a.datatype()), (b.lexical(), b.datatype())) {
        ((Some(la), Some(da)), (Some(lb), Some(db))) => da == db && casefold(la) == casefold(lb),
        _ => false,
    }
}

/// All bindings of `atoms` against the store, extending `seed`; existential
/// terms bind like variables. Deterministic: facts iterate in sorted order.
pub fn solve_atoms(atoms: &[RuleAtom], rel: &RelStore, seed: &RuleBindings) -> Vec<RuleBindings> {
    fn resolve(term: &RuleTerm, bindings: &RuleBindings) -> Option<Term> {
        match term {
            RuleTerm::Const(t) => Some(t.clone()),
            RuleTerm::Var(v) | RuleTerm::Exist(v) => bindings.get(v).cloned(),
        }
    }

    fn go(
        atoms: &[RuleAtom],
        i: usize,
        rel: &RelStore,
        bindings: &mut RuleBindings,
        out: &mut Vec<RuleBindings>,
    ) {
        let Some(atom) = atoms.get(i) else {
            out.push(bindings.clone());
            return;
        };
        if atom.builtin {
            let a = resolve(&atom.args[0], bindings);
            let b = resolve(&atom.args[1], bindings);
            if let (Some(a), Some(b)) = (a, b) {
                if str_eq(&a, &b) {
                    go(atoms, i + 1, rel, bindings, out);
                }
            }
            return;
        }
        for fact in rel.facts(&atom.predicate) {
            if fact.len() != atom.args.len() {
                continue;
            }
            let mut added: Vec<&String> = Vec::new();
            let mut ok = true;
            for (arg, value) in atom.args.iter().zip(fact) {
                match arg {
                    RuleTerm::Const(c) => {
                        if c != value {
                            ok = false;
                            break;
                        }
                    }
                    RuleTerm::Var(v) | RuleTerm::Exist(v) => match bindings.get(v) {
                        Some(bound) => {
                            if bound != value {
                                ok = false;
                                break;
                            }
                        }
                        None => {
                            bindings.insert(v.clone(), value.clone());
                            added.push(v);
                        }
                    },
                }
            }
            if ok {
                go(atoms, i + 1, rel, bindings, out);
            }
            for v in added {
                bindings.remove(v);
            }
        }
    }

    let mut out = Vec::new();
    let mut bindings = seed.clone();
    go(atoms, 0, rel, &mut bindings, &mut out);
    out
}

fn instantiate(atom: &RuleAtom, bindings: &RuleBindings) -> Vec<Term> {
    atom.args
        .iter()
        .map(|arg| match arg {
            RuleTerm::Const(t) => t.clone(),
            RuleTerm::Var(v) | RuleTerm::Exist(v) => {
                bindings.get(v).expect("validated rule binds all head terms").clone()
            }
        })
        .collect()
}

fn predicate_name(iri: &str) -> String {
    match iri {
        vocab::RDF_TYPE => "type".to_string(),
        vocab::RDF_VALUE => "value".to_string(),
        other => other.strip_prefix(':').unwrap_or(other).replace(':', "_"),
    }
}

/// Maps the store triples to relational facts and seeds the `mention`,
/// `columnClass` and `paperAuthor` relations. Papers without metadata simply
/// contribute no `paperAuthor` facts.
pub fn base_facts(store: &FactStore, metas: &[PaperMeta]) -> RelStore {
    let mut rel = RelStore::new();
    for (s, p, o) in store.iter() {
        let Some(p_iri) = p.as_iri() else { continue };
        rel.insert(&predicate_name(p_iri), vec![s.clone(), o.clone()]);
    }

    let rdf_type = Term::iri(vocab::RDF_TYPE);
    let rdf_value = Term::iri(vocab::RDF_VALUE);
    let in_row = Term::iri(vocab::IN_ROW);
    let header_row = Term::iri(vocab::HEADER_ROW);
    for (cell, _, _) in store.matching(None, Some(&rdf_type), Some(&Term::iri(vocab::CELL))) {
        let string_valued = store
            .matching(Some(&cell), Some(&rdf_value), None)
            .iter()
            .any(|(_, _, v)| v.datatype() == Some(Datatype::String));
        if !string_valued {
            continue;
        }
        let in_header = store
            .matching(Some(&cell), Some(&in_row), None)
            .iter()
            .any(|(_, _, row)| store.contains(&(row.clone(), rdf_type.clone(), header_row.clone())));
        if in_header {
            continue;
        }
        rel.insert(MENTION, vec![cell]);
    }

    let column = Term::iri(vocab::COLUMN);
    let other = Term::iri(vocab::class_iri("Other"));
    for (col, _, _) in store.matching(None, Some(&rdf_type), Some(&column)) {
        for (_, _, class) in store.matching(Some(&col), Some(&rdf_type), None) {
            if class == column || class == other {
                continue;
            }
            rel.insert(COLUMN_CLASS, vec![col.clone(), class]);
        }
    }

    for meta in metas {
        let paper = Term::iri(vocab::paper_iri(&meta.paper_id));
        for author in &meta.authors {
            rel.insert(
                PAPER_AUTHOR,
                vec![paper.clone(), Term::iri(vocab::author_iri(&author.author_id))],
            );
        }
    }
    rel
}

/// Clears and re-derives every auxiliary relation to fixpoint.
pub fn derive_aux(rel: &mut RelStore, rules: &RuleSet) {
    for predicate in rules.aux_predicates() {
        rel.clear_relation(&predicate);
    }
    loop {
        let mut grew = false;
        for rule in rules.enabled_aux() {
            for bindings in solve_atoms(&rule.body, rel, &RuleBindings::new()) {
                if rel.insert(&rule.head.predicate, instantiate(&rule.head, &bindings)) {
                    grew = true;
                }
            }
        }
        if !grew {
            break;
        }
    }
}

/// Grounded base and auxiliary facts; useful on stores that already carry
/// entity assignments, otherwise the auxiliary relations stay empty.
pub fn ground_aux_predicates(
    store: &FactStore,
    metas: &[PaperMeta],
    rules: &RuleSet,
) -> RelStore {
    let mut rel = base_facts(store, metas);
    derive_aux(&mut rel, rules);
    rel
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ChaseStats {
    pub nulls_created: usize,
    /// Merge count per equality rule name.
    pub merges: BTreeMap<String, usize>,
    pub rounds: usize,
    /// Rule applications: nulls minted plus merges performed.
    pub steps: usize,
    /// Distinct canonical entities at the end.
    pub entities: usize,
}

#[derive(Debug, Clone)]
pub struct ChaseResult {
    pub store: FactStore,
    /// Final relational facts, entity assignments included.
    pub relations: RelStore,
    /// Cell or column iri to its canonical entity term.
    pub entities: BTreeMap<String, Term>,
    pub stats: ChaseStats,
}

fn find(forwards: &BTreeMap<Term, Term>, term: &Term) -> Term {
    let mut current = term.clone();
    while let Some(next) = forwards.get(&current) {
        current = next.clone();
    }
    current
}

fn head_satisfied(tgd: &Tgd, frontier: &RuleBindings, rel: &RelStore) -> bool {
    !solve_atoms(&tgd.head, rel, frontier).is_empty()
}

/// Runs the deterministic restricted chase: per round, saturate auxiliary
/// rules, fire unsatisfied existential rules, then apply equality rules with
/// the smaller term winning each merge.
pub fn restricted_chase(
    rules: &RuleSet,
    store: &FactStore,
    metas: &[PaperMeta],
) -> Result<ChaseResult, ChaseError> {
    rules.check_acyclic()?;
    let mut work = store.clone();
    let mut rel = base_facts(store, metas);

    let mut reserved: BTreeSet<String> = rel.predicates().cloned().collect();
    reserved.extend(
        rules.tgds.iter().flat_map(|t| t.head.iter()).map(|a| a.predicate.clone()),
    );
    for predicate in rules.aux_predicates() {
        if reserved.contains(&predicate) {
            return Err(ChaseError::AuxShadowsBase { predicate });
        }
    }

    let budget = (10 * rel.len()).max(10);
    let mut stats = ChaseStats::default();
    let mut forwards: BTreeMap<Term, Term> = BTreeMap::new();

    loop {
        stats.rounds += 1;
        derive_aux(&mut rel, rules);
        let mut progress = false;

        for tgd in rules.enabled_tgds() {
            for bindings in solve_atoms(&tgd.body, &rel, &RuleBindings::new()) {
                if head_satisfied(tgd, &bindings, &rel) {
                    continue;
                }
                let mut full = bindings.clone();
                for z in &tgd.existentials {
                    full.insert(z.clone(), work.fresh_null());
                    stats.nulls_created += 1;
                }
                for atom in &tgd.head {
                    rel.insert(&atom.predicate, instantiate(atom, &full));
                }
                progress = true;
                stats.steps += 1;
                if stats.steps > budget {
                    return Err(ChaseError::Budget { steps: stats.steps, budget });
                }
            }
        }

        for egd in rules.enabled_egds() {
            for bindings in solve_atoms(&egd.body, &rel, &RuleBindings::new()) {
                let a = find(&forwards, &bindings[&egd.x]);
                let b = find(&forwards, &bindings[&egd.y]);
                if a == b {
                    continue;
                }
                let (winner, loser) = if a <= b { (a, b) } else { (b, a) };
                forwards.insert(loser.clone(), winner.clone());
                rel.rewrite_term(&loser, &winner);
                *stats.merges.entry(egd.name.clone()).or_default() += 1;
                progress = true;
                stats.steps += 1;
                if stats.steps > budget {
                    return Err(ChaseError::Budget { steps: stats.steps, budget });
                }
            }
        }

        if !progress {
            break;
        }
    }

    let mut entities: BTreeMap<String, Term> = BTreeMap::new();
    for predicate in [COL_ENTITY, CELL_ENTITY] {
        for fact in rel.facts(predicate) {
            let [subject, entity] = fact.as_slice() else { continue };
            let Some(iri) = subject.as_iri() else { continue };
            if let Some(previous) = entities.insert(iri.to_string(), entity.clone()) {
                if &previous != entity {
                    return Err(ChaseError::ConflictingEntities { iri: iri.to_string() });
                }
            }
        }
    }
    stats.entities = entities.values().collect::<BTreeSet<_>>().len();

    Ok(ChaseResult { store: work, relations: rel, entities, stats })
}

/// Canonical entity term to its materialized iri, `:E1` onward in term
/// order.
pub fn entity_numbering(result: &ChaseResult) -> BTreeMap<Term, String> {
    result
        .entities
        .values()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), format!(":E{}", i + 1)))
        .collect()
}

/// Entity iris with :denotes/:colDenotes links and the labels of each
/// entity's merged mentions. Output is sorted, so re-running is
/// byte-identical.
pub fn materialize_entities(result: &ChaseResult) -> Vec<Triple> {
    let numbering = entity_numbering(result);
    let rdf_type = Term::iri(vocab::RDF_TYPE);
    let rdf_value = Term::iri(vocab::RDF_VALUE);
    let has_title = Term::iri(vocab::HAS_TITLE);
    let column = Term::iri(vocab::COLUMN);
    let mut out: BTreeSet<Triple> = BTreeSet::new();
    for (iri, entity) in &result.entities {
        let entity_iri = Term::iri(&numbering[entity]);
        let subject = Term::iri(iri);
        let is_column =
            result.store.contains(&(subject.clone(), rdf_type.clone(), column.clone()));
        let (link, label_pred) =
            if is_column { (vocab::COL_DENOTES, &has_title) } else { (vocab::DENOTES, &rdf_value) };
        out.insert((subject.clone(), Term::iri(link), entity_iri.clone()));
        for (_, _, label) in result.store.matching(Some(&subject), Some(label_pred), None) {
            out.insert((entity_iri.clone(), Term::iri(vocab::LABEL), label));
        }
    }
    out.into_iter().collect()
}

/// The chased store plus the materialized entity triples.
pub fn linked_store(result: &ChaseResult) -> FactStore {
    let mut store = result.store.clone();
    store
        .insert_triples(materialize_entities(result))
        .expect("materialized triples are ground");
    store
}

/// Cell iris grouped by materialized entity; column links are not included.
pub fn entity_cell_groups(result: &ChaseResult) -> BTreeMap<String, Vec<String>> {
    let numbering = entity_numbering(result);
    let rdf_type = Term::iri(vocab::RDF_TYPE);
    let column = Term::iri(vocab::COLUMN);
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (iri, entity) in &result.entities {
        let subject = Term::iri(iri);
        if result.store.contains(&(subject, rdf_type.clone(), column.clone())) {
            continue;
        }
        groups.entry(numbering[entity].clone()).or_default().push(iri.clone());
    }
    groups
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRun {
    pub label: String,
    pub egds: Vec<String>,
    pub entities: usize,
    pub nulls_created: usize,
    pub merges: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationReport {
    pub runs: Vec<AblationRun>,
}

/// No equality rules, then each alone, then all together. Disabled
/// equality rules are left out entirely.
pub fn default_subsets(rules: &RuleSet) -> Vec<(String, Vec<String>)> {
    let names: Vec<String> = rules.enabled_egds().map(|e| e.name.clone()).collect();
    let mut subsets = vec![("none".to_string(), Vec::new())];
    for name in &names {
        subsets.push((name.clone(), vec![name.clone()]));
    }
    subsets.push(("all".to_string(), names));
    subsets
}

/// Chases a fresh copy per equality-rule subset; subsets run in parallel.
pub fn ablate(
    rules: &RuleSet,
    store: &FactStore,
    metas: &[PaperMeta],
    subsets: &[(String, Vec<String>)],
) -> Result<AblationReport, ChaseError> {
    let outcomes: Vec<Result<AblationRun, ChaseError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = subsets
            .iter()
            .map(|(label, egds)| {
                scope.spawn(move || {
                    let mut restricted = rules.clone();
                    restricted.restrict_egds(egds)?;
                    let result = restricted_chase(&restricted, store, metas)?;
                    Ok(AblationRun {
                        label: label.clone(),
                        egds: egds.clone(),
                        entities: result.stats.entities,
                        nulls_created: result.stats.nulls_created,
                        merges: result.stats.merges.values().sum(),
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("ablation thread panicked")).collect()
    });
    Ok(AblationReport { runs: outcomes.into_iter().collect::<Result<_, _>>()? })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrecisionReport {
    /// Entity iri to the share of its cells agreeing on one concept.
    pub per_entity: BTreeMap<String, f64>,
    pub mean: f64,
}

/// Largest same-concept subset over group size, per entity, and the mean
/// across entities (0 when there are none).
pub fn link_precision(
    groups: &BTreeMap<String, Vec<String>>,
    gold: &BTreeMap<String, String>,
) -> Result<PrecisionReport, PrecisionError> {
    let missing: BTreeSet<String> = groups
        .values()
        .flatten()
        .filter(|cell| !gold.contains_key(*cell))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(PrecisionError::MissingGold { cells: missing.into_iter().collect() });
    }
    let mut per_entity = BTreeMap::new();
    for (entity, cells) in groups {
        if cells.is_empty() {
            continue;
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for cell in cells {
            *counts.entry(gold[cell].as_str()).or_default() += 1;
        }
        let largest = counts.values().copied().max().unwrap_or(0);
        per_entity.insert(entity.clone(), largest as f64 / cells.len() as f64);
    }
    let mean = if per_entity.is_empty() {
        0.0
    } else {
        per_entity.values().sum::<f64>() / per_entity.len() as f64
    };
    Ok(PrecisionReport { per_entity, mean })
}
