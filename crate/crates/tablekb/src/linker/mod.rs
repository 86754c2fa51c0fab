//! Entity linking over the knowledge base.
//!
//! A rule file declares existential rules that assign entities to columns
//! and mention cells, auxiliary views that collect each entity's labels in
//! context, and equality rules that merge entities sharing a label within
//! the right scope. [`restricted_chase`] runs them to fixpoint and
//! [`materialize_entities`] turns the result back into triples.

pub mod chase;
pub mod rules;

pub use chase::{
    ablate, base_facts, default_subsets, entity_cell_groups, entity_numbering, link_precision,
    linked_store, materialize_entities, restricted_chase, solve_atoms, str_eq, AblationReport,
    AblationRun, ChaseError, ChaseResult, ChaseStats, PrecisionError, PrecisionReport,
    RelStore, RuleBindings,
};
pub use rules::{default_rules, AuxRule, Egd, RuleAtom, RuleError, RuleSet, RuleTerm, Tgd};
