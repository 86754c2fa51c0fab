//! Classification metrics and report rendering.
//!
//! Per-class precision, recall and F1 from the prediction/gold confusion,
//! micro averages from pooled counts, macro averages excluding the Other
//! class, which otherwise dominates with easy catch-all hits.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linker::{AblationReport, ChaseStats, PrecisionReport};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no predictions to evaluate")]
    Empty,
    #[error("predicted items missing gold labels: {}", items.join(", "))]
    MissingGold { items: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Items with this gold class.
    pub support: usize,
    /// Items predicted as this class.
    pub predicted: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_class: BTreeMap<String, ClassMetrics>,
    /// From pooled true/false positive counts over all classes.
    pub micro: Averages,
    /// Unweighted mean over classes, Other excluded.
    pub macro_avg: Averages,
    pub accuracy: f64,
    pub n_items: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_of(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Scores predictions against gold labels. Every predicted item needs a
/// gold label; extra gold items are ignored.
pub fn eval_classification(
    predictions: &BTreeMap<String, String>,
    gold: &BTreeMap<String, String>,
) -> Result<ClassificationReport, EvalError> {
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    let missing: Vec<String> =
        predictions.keys().filter(|item| !gold.contains_key(*item)).cloned().collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingGold { items: missing });
    }

    let mut classes: BTreeSet<&str> = BTreeSet::new();
    let mut tp: BTreeMap<&str, usize> = BTreeMap::new();
    let mut predicted: BTreeMap<&str, usize> = BTreeMap::new();
    let mut support: BTreeMap<&str, usize> = BTreeMap::new();
    let mut correct = 0usize;
    for (item, pred) in predictions {
        let truth = gold[item].as_str();
        classes.insert(pred);
        classes.insert(truth);
        *predicted.entry(pred).or_default() += 1;
        *support.entry(truth).or_default() += 1;
        if pred == truth {
            *tp.entry(truth).or_default() += 1;
            correct += 1;
        }
    }

    let mut per_class = BTreeMap::new();
    for class in &classes {
        let tp_c = tp.get(class).copied().unwrap_or(0);
        let precision = ratio(tp_c, predicted.get(class).copied().unwrap_or(0));
        let recall = ratio(tp_c, support.get(class).copied().unwrap_or(0));
        per_class.insert(
            class.to_string(),
            ClassMetrics {
                precision,
                recall,
                f1: f1_of(precision, recall),
                support: support.get(class).copied().unwrap_or(0),
                predicted: predicted.get(class).copied().unwrap_or(0),
            },
        );
    }

    let n = predictions.len();
    let micro_p = ratio(correct, n);
    let micro = Averages { precision: micro_p, recall: micro_p, f1: micro_p };

    let macro_classes: Vec<&ClassMetrics> = per_class
        .iter()
        .filter(|(class, _)| class.as_str() != "Other")
        .map(|(_, m)| m)
        .collect();
    let macro_avg = if macro_classes.is_empty() {
        Averages { precision: 0.0, recall: 0.0, f1: 0.0 }
    } else {
        let k = macro_classes.len() as f64;
        Averages {
            precision: macro_classes.iter().map(|m| m.precision).sum::<f64>() / k,
            recall: macro_classes.iter().map(|m| m.recall).sum::<f64>() / k,
            f1: macro_classes.iter().map(|m| m.f1).sum::<f64>() / k,
        }
    };

    Ok(ClassificationReport {
        per_class,
        micro,
        macro_avg,
        accuracy: ratio(correct, n),
        n_items: n,
    })
}

/// Everything the eval stage can report; sections are present when their
/// gold data or upstream artifact exists.
#[derive(Debug, Clone, Default, Serialize)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tables: Option<ClassificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub columns: Option<ClassificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link: Option<PrecisionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationReport>,
}

pub fn render_classification(title: &str, report: &ClassificationReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("{title} ({} items)\n", report.n_items));
    out.push_str("  class                 precision  recall     f1   gold  pred\n");
    for (class, m) in &report.per_class {
        out.push_str(&format!(
            "  {class:<22} {:>8.3} {:>7.3} {:>6.3} {:>6} {:>5}\n",
            m.precision, m.recall, m.f1, m.support, m.predicted
        ));
    }
    out.push_str(&format!(
        "  accuracy {:.3}  micro-f1 {:.3}  macro-f1 {:.3} (Other excluded)\n",
        report.accuracy, report.micro.f1, report.macro_avg.f1
    ));
    out
}

pub fn render_link(report: &PrecisionReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "link precision over {} entities: mean {:.3}\n",
        report.per_entity.len(),
        report.mean
    ));
    for (entity, p) in &report.per_entity {
        out.push_str(&format!("  {entity:<8} {p:.3}\n"));
    }
    out
}

pub fn render_ablation(report: &AblationReport) -> String {
    let mut out = String::new();
    out.push_str("ablation  entities  merges  nulls  rules\n");
    for run in &report.runs {
        out.push_str(&format!(
            "  {:<8} {:>7} {:>7} {:>6}  {}\n",
            run.label,
            run.entities,
            run.merges,
            run.nulls_created,
            if run.egds.is_empty() { "-".to_string() } else { run.egds.join(",") }
        ));
    }
    out
}

pub fn render_chase_stats(stats: &ChaseStats) -> String {
    let merges: usize = stats.merges.values().sum();
    let mut out = format!(
        "linked {} entities ({} nulls, {} merges, {} rounds)\n",
        stats.entities, stats.nulls_created, merges, stats.rounds
    );
    for (rule, count) in &stats.merges {
        out.push_str(&format!("  {rule}: {count} merges\n"));
    }
    out
}

pub fn render_eval(report: &EvalReport) -> String {
    let mut out = String::new();
    if let Some(tables) = &report.tables {
        out.push_str(&render_classification("table types", tables));
    }
    if let Some(columns) = &report.columns {
        out.push_str(&render_classification("column types", columns));
    }
    if let Some(link) = &report.link {
        out.push_str(&render_link(link));
    }
    if let Some(ablation) = &report.ablation {
        out.push_str(&render_ablation(ablation));
    }
    if out.is_empty() {
        out.push_str("nothing to evaluate\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn perfect_predictions_score_one() {
        let gold = labels(&[("a", "X"), ("b", "Y"), ("c", "X")]);
        let report = eval_classification(&gold, &gold).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.micro.f1, 1.0);
        assert_eq!(report.macro_avg.f1, 1.0);
        for m in report.per_class.values() {
            assert_eq!(m.f1, 1.0);
        }
    }

    #[test]
    fn constant_predictor_on_balanced_gold() {
        let gold = labels(&[("a", "X"), ("b", "X"), ("c", "Y"), ("d", "Y")]);
        let pred = labels(&[("a", "X"), ("b", "X"), ("c", "X"), ("d", "X")]);
        let report = eval_classification(&pred, &gold).unwrap();
        assert_eq!(report.accuracy, 0.5);
        assert_eq!(report.per_class["X"].precision, 0.5);
        assert_eq!(report.per_class["X"].recall, 1.0);
        // Y is never predicted.
        assert_eq!(report.per_class["Y"].precision, 0.0);
        assert_eq!(report.per_class["Y"].recall, 0.0);
    }

    #[test]
    fn three_class_confusion_matches_hand_computation() {
        // Gold: A x4, B x3, Other x3. Errors: one A->B, one B->Other, one
        // Other->A.
        let gold = labels(&[
            ("a1", "A"),
            ("a2", "A"),
            ("a3", "A"),
            ("a4", "A"),
            ("b1", "B"),
            ("b2", "B"),
            ("b3", "B"),
            ("o1", "Other"),
            ("o2", "Other"),
            ("o3", "Other"),
        ]);
        let pred = labels(&[
            ("a1", "A"),
            ("a2", "A"),
            ("a3", "A"),
            ("a4", "B"),
            ("b1", "B"),
            ("b2", "B"),
            ("b3", "Other"),
            ("o1", "Other"),
            ("o2", "Other"),
            ("o3", "A"),
        ]);
        let report = eval_classification(&pred, &gold).unwrap();
        let a = report.per_class["A"];
        assert!((a.precision - 0.75).abs() < 1e-12);
        assert!((a.recall - 0.75).abs() < 1e-12);
        assert!((a.f1 - 0.75).abs() < 1e-12);
        let b = report.per_class["B"];
        assert!((b.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((b.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((report.accuracy - 0.7).abs() < 1e-12);
        // Micro metrics come from pooled counts and equal accuracy here.
        assert!((report.micro.f1 - 0.7).abs() < 1e-12);
        // Macro excludes Other: mean of A and B only.
        let expected = (0.75 + 2.0 / 3.0) / 2.0;
        assert!((report.macro_avg.precision - expected).abs() < 1e-12);
        assert!((report.macro_avg.f1 - expected).abs() < 1e-12);
        // Including Other would change the macro average.
        let other = report.per_class["Other"];
        let with_other = (0.75 + 2.0 / 3.0 + other.precision) / 3.0;
        assert!((report.macro_avg.precision - with_other).abs() > 1e-6);
    }

    #[test]
    fn missing_gold_is_an_error() {
        let pred = labels(&[("a", "X"), ("b", "X")]);
        let gold = labels(&[("a", "X")]);
        let err = eval_classification(&pred, &gold).unwrap_err();
        assert!(matches!(err, EvalError::MissingGold { items } if items == vec!["b"]));
        assert!(matches!(
            eval_classification(&BTreeMap::new(), &gold).unwrap_err(),
            EvalError::Empty
        ));
    }

    #[test]
    fn rendering_mentions_every_class() {
        let gold = labels(&[("a", "X"), ("b", "Y")]);
        let report = eval_classification(&gold, &gold).unwrap();
        let text = render_classification("demo", &report);
        assert!(text.contains("X"));
        assert!(text.contains("Y"));
        assert!(text.contains("accuracy 1.000"));
    }
}
