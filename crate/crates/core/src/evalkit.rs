//! Extraction scoring: trigger exact-match F1, argument head F1 and a
//! span-overlap "types" F1.
//!
//! All metrics use one-to-one matching of predictions to golds. At corpus
//! level an empty prediction set against an empty gold set scores 1.0;
//! otherwise any `0/0` ratio scores 0.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize_whitespace, CorpusRecord, Sentence};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("sentence {sentence_id}: span {span:?} does not occur in the text")]
    SpanNotInSentence { sentence_id: String, span: String },

    #[error("no text available for sentence {0}")]
    UnknownSentence(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        if tp + fp + fn_ == 0 {
            return Self {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                tp,
                fp,
                fn_,
            };
        }
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TriggerItem {
    pub sentence_id: String,
    pub event_type: String,
    pub trigger: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArgumentItem {
    pub sentence_id: String,
    pub event_type: String,
    pub role: String,
    pub content: String,
}

/// A labelled span for overlap scoring; `label` is the event type, extended
/// with the role for arguments.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpanItem {
    pub sentence_id: String,
    pub label: String,
    pub span: String,
}

/// Greedy one-to-one matching under an equality key: each prediction takes
/// the first unmatched gold with the same key. Returns `(tp, fp, fn)`.
fn match_exact<K: Eq + std::hash::Hash>(preds: &[K], golds: &[K]) -> (usize, usize, usize) {
    let mut available: HashMap<&K, usize> = HashMap::new();
    for g in golds {
        *available.entry(g).or_default() += 1;
    }
    let mut tp = 0;
    for p in preds {
        if let Some(n) = available.get_mut(p) {
            if *n > 0 {
                *n -= 1;
                tp += 1;
            }
        }
    }
    (tp, preds.len() - tp, golds.len() - tp)
}

pub fn trigger_f1(preds: &[TriggerItem], golds: &[TriggerItem]) -> Prf {
    let (tp, fp, fn_) = match_exact(preds, golds);
    Prf::from_counts(tp, fp, fn_)
}

/// Exact argument match on (sentence, type, role, whitespace-normalized content).
pub fn argument_exact_f1(preds: &[ArgumentItem], golds: &[ArgumentItem]) -> Prf {
    let norm = |items: &[ArgumentItem]| -> Vec<ArgumentItem> {
        items
            .iter()
            .map(|a| ArgumentItem {
                content: normalize_whitespace(&a.content),
                ..a.clone()
            })
            .collect()
    };
    let (tp, fp, fn_) = match_exact(&norm(preds), &norm(golds));
    Prf::from_counts(tp, fp, fn_)
}

pub trait HeadExtractor: Send + Sync {
    fn head(&self, sentence: &Sentence, span: &str) -> Result<String, EvalError>;
}

/// Default head heuristic: with trailing punctuation stripped, the token
/// before the first `of`/`in`/`at`/`from`, otherwise the last token.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicHeads;

const HEAD_PREPOSITIONS: [&str; 4] = ["of", "in", "at", "from"];

fn strip_trailing_punct(s: &str) -> &str {
    s.trim_end_matches(|c: char| c.is_ascii_punctuation() && c != '%' && c != '$')
}

impl HeadExtractor for HeuristicHeads {
    fn head(&self, sentence: &Sentence, span: &str) -> Result<String, EvalError> {
        head_of_span(sentence, span)
    }
}

pub fn head_of_span(sentence: &Sentence, span: &str) -> Result<String, EvalError> {
    if !sentence.contains_span(span) {
        return Err(EvalError::SpanNotInSentence {
            sentence_id: sentence.id.clone(),
            span: span.to_string(),
        });
    }
    let normalized = normalize_whitespace(span);
    let stripped = strip_trailing_punct(&normalized);
    let tokens: Vec<&str> = stripped.split_whitespace().collect();
    let Some(last) = tokens.last() else {
        return Ok(normalized);
    };
    let head = tokens
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, t)| HEAD_PREPOSITIONS.contains(&t.to_lowercase().as_str()))
        .map(|(i, _)| tokens[i - 1])
        .unwrap_or(last);
    let head = strip_trailing_punct(head);
    Ok(if head.is_empty() { last.to_string() } else { head.to_string() })
}

/// Argument head F1: match on (sentence, type, role, head of content).
pub fn argument_head_f1(
    preds: &[ArgumentItem],
    golds: &[ArgumentItem],
    sentences: &HashMap<String, Sentence>,
    extractor: &dyn HeadExtractor,
) -> Result<Prf, EvalError> {
    let heads = |items: &[ArgumentItem]| -> Result<Vec<ArgumentItem>, EvalError> {
        items
            .iter()
            .map(|a| {
                let sentence = sentences
                    .get(&a.sentence_id)
                    .ok_or_else(|| EvalError::UnknownSentence(a.sentence_id.clone()))?;
                Ok(ArgumentItem {
                    content: extractor.head(sentence, &a.content)?,
                    ..a.clone()
                })
            })
            .collect()
    };
    let (tp, fp, fn_) = match_exact(&heads(preds)?, &heads(golds)?);
    Ok(Prf::from_counts(tp, fp, fn_))
}

/// Character range of the first occurrence of `span` in the sentence.
fn locate(sentence: &Sentence, span: &str) -> Option<(usize, usize)> {
    let span = normalize_whitespace(span);
    if span.is_empty() {
        return None;
    }
    let byte_start = sentence.text.find(&span)?;
    let start = sentence.text[..byte_start].chars().count();
    Some((start, start + span.chars().count()))
}

/// Overlap F1: a prediction matches a gold with the same sentence and label
/// whose span overlaps it by at least one character. Matching is one-to-one:
/// greedy, largest overlap first, then extended to maximum cardinality. Spans
/// not found in the sentence never match.
pub fn type_overlap_f1(
    preds: &[SpanItem],
    golds: &[SpanItem],
    sentences: &HashMap<String, Sentence>,
) -> Prf {
    let ranges = |items: &[SpanItem]| -> Vec<Option<(usize, usize)>> {
        items
            .iter()
            .map(|it| sentences.get(&it.sentence_id).and_then(|s| locate(s, &it.span)))
            .collect()
    };
    let pred_ranges = ranges(preds);
    let gold_ranges = ranges(golds);

    let mut pairs = Vec::new();
    for (pi, p) in preds.iter().enumerate() {
        for (gi, g) in golds.iter().enumerate() {
            if p.sentence_id != g.sentence_id || p.label != g.label {
                continue;
            }
            if let (Some(pr), Some(gr)) = (pred_ranges[pi], gold_ranges[gi]) {
                let overlap = pr.1.min(gr.1).saturating_sub(pr.0.max(gr.0));
                if overlap > 0 {
                    pairs.push((overlap, pi, gi));
                }
            }
        }
    }
    pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); preds.len()];
    let mut pred_match: Vec<Option<usize>> = vec![None; preds.len()];
    let mut gold_match: Vec<Option<usize>> = vec![None; golds.len()];
    for &(_, pi, gi) in &pairs {
        adjacency[pi].push(gi);
        if pred_match[pi].is_none() && gold_match[gi].is_none() {
            pred_match[pi] = Some(gi);
            gold_match[gi] = Some(pi);
        }
    }
    // Greedy can strand a prediction whose only gold was taken by a
    // multi-overlap prediction; augmenting paths restore a maximum matching.
    for pi in 0..preds.len() {
        if pred_match[pi].is_none() {
            let mut seen = vec![false; golds.len()];
            augment(pi, &adjacency, &mut seen, &mut pred_match, &mut gold_match);
        }
    }
    let tp = pred_match.iter().filter(|m| m.is_some()).count();
    Prf::from_counts(tp, preds.len() - tp, golds.len() - tp)
}

fn augment(
    pi: usize,
    adjacency: &[Vec<usize>],
    seen: &mut [bool],
    pred_match: &mut [Option<usize>],
    gold_match: &mut [Option<usize>],
) -> bool {
    for &gi in &adjacency[pi] {
        if seen[gi] {
            continue;
        }
        seen[gi] = true;
        let free = match gold_match[gi] {
            None => true,
            Some(other) => augment(other, adjacency, seen, pred_match, gold_match),
        };
        if free {
            pred_match[pi] = Some(gi);
            gold_match[gi] = Some(pi);
            return true;
        }
    }
    false
}

pub fn trigger_items(records: &[CorpusRecord]) -> Vec<TriggerItem> {
    records
        .iter()
        .flat_map(|r| {
            r.events.iter().map(move |e| TriggerItem {
                sentence_id: r.id.clone(),
                event_type: e.event_type.to_string(),
                trigger: normalize_whitespace(&e.trigger),
            })
        })
        .collect()
}

pub fn argument_items(records: &[CorpusRecord]) -> Vec<ArgumentItem> {
    records
        .iter()
        .flat_map(|r| {
            r.events.iter().flat_map(move |e| {
                e.arguments.iter().map(move |a| ArgumentItem {
                    sentence_id: r.id.clone(),
                    event_type: e.event_type.to_string(),
                    role: a.role.clone(),
                    content: normalize_whitespace(&a.content),
                })
            })
        })
        .collect()
}

pub fn trigger_spans(records: &[CorpusRecord]) -> Vec<SpanItem> {
    trigger_items(records)
        .into_iter()
        .map(|t| SpanItem {
            sentence_id: t.sentence_id,
            label: t.event_type,
            span: t.trigger,
        })
        .collect()
}

pub fn argument_spans(records: &[CorpusRecord]) -> Vec<SpanItem> {
    argument_items(records)
        .into_iter()
        .map(|a| SpanItem {
            sentence_id: a.sentence_id,
            label: format!("{}/{}", a.event_type, a.role),
            span: a.content,
        })
        .collect()
}

pub fn sentence_map(records: &[CorpusRecord]) -> HashMap<String, Sentence> {
    records
        .iter()
        .map(|r| (r.id.clone(), Sentence::new(r.id.clone(), &r.text)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trig(s: &str, t: &str, w: &str) -> TriggerItem {
        TriggerItem {
            sentence_id: s.into(),
            event_type: t.into(),
            trigger: w.into(),
        }
    }

    #[test]
    fn identical_sets_score_one() {
        let x = vec![trig("s1", "Attack", "war"), trig("s1", "Die", "kill")];
        let prf = trigger_f1(&x, &x);
        assert_eq!((prf.precision, prf.recall, prf.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_counted_fixture() {
        let preds = vec![trig("s1", "Attack", "war")];
        let golds = vec![trig("s1", "Attack", "war"), trig("s1", "Die", "kill")];
        let prf = trigger_f1(&preds, &golds);
        assert_eq!((prf.tp, prf.fp, prf.fn_), (1, 0, 1));
        assert_eq!(prf.precision, 1.0);
        assert_eq!(prf.recall, 0.5);
        assert!((prf.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_conventions() {
        let golds = vec![trig("s1", "Die", "kill")];
        assert_eq!(trigger_f1(&[], &golds).f1, 0.0);
        assert_eq!(trigger_f1(&golds, &[]).f1, 0.0);
        assert_eq!(trigger_f1(&[], &[]).f1, 1.0);
    }

    #[test]
    fn governments_head() {
        let text = "\" We are studying that plan , we are examining it with our friends and allies , \" Powell said , adding that talks were now underway with the South Korean, Japanese, Russian and Australian as well as other governments .";
        let s = Sentence::new("a", text);
        let span = "the South Korean, Japanese, Russian and Australian as well as other governments";
        assert_eq!(head_of_span(&s, span).unwrap(), "governments");
    }

    #[test]
    fn heuristic_cases() {
        let s = Sentence::new(
            "b",
            "McCarthy was formerly a top civil servant at the Department of Trade and Industry .",
        );
        assert_eq!(head_of_span(&s, "the Department of Trade").unwrap(), "Department");
        assert_eq!(head_of_span(&s, "McCarthy").unwrap(), "McCarthy");
        assert_eq!(head_of_span(&s, "Industry .").unwrap(), "Industry");
        assert!(matches!(
            head_of_span(&s, "Hawaii"),
            Err(EvalError::SpanNotInSentence { .. })
        ));
        let h = Sentence::new("c", "driving drunk during a Hawaiian vacation in January .");
        assert_eq!(head_of_span(&h, "Hawaiian").unwrap(), "Hawaiian");
    }

    #[test]
    fn hawaii_vs_hawaiian_heads_differ() {
        let s = Sentence::new("c", "driving drunk during a Hawaiian vacation in January .");
        let mut sentences = HashMap::new();
        sentences.insert("c".to_string(), s);
        let arg = |content: &str| ArgumentItem {
            sentence_id: "c".into(),
            event_type: "Movement:Transport".into(),
            role: "Destination".into(),
            content: content.into(),
        };
        let prf =
            argument_head_f1(&[arg("Hawaii")], &[arg("Hawaiian")], &sentences, &HeuristicHeads)
                .unwrap();
        assert_eq!((prf.tp, prf.fp, prf.fn_), (0, 1, 1));
        let exact =
            argument_head_f1(&[arg("Hawaiian")], &[arg("Hawaiian")], &sentences, &HeuristicHeads)
                .unwrap();
        assert_eq!(exact.tp, 1);
    }

    #[test]
    fn overlap_metric_cases() {
        let s = Sentence::new("s", "the rebels attacked the northern town yesterday");
        let mut sentences = HashMap::new();
        sentences.insert("s".to_string(), s);
        let span = |label: &str, text: &str| SpanItem {
            sentence_id: "s".into(),
            label: label.into(),
            span: text.into(),
        };
        let contain = type_overlap_f1(
            &[span("Attack", "attacked the northern town")],
            &[span("Attack", "northern town")],
            &sentences,
        );
        assert_eq!(contain.tp, 1);
        let wrong_type = type_overlap_f1(
            &[span("Die", "northern town")],
            &[span("Attack", "northern town")],
            &sentences,
        );
        assert_eq!((wrong_type.tp, wrong_type.fp, wrong_type.fn_), (0, 1, 1));
        let two = type_overlap_f1(
            &[span("Attack", "northern"), span("Attack", "northern town")],
            &[span("Attack", "town")],
            &sentences,
        );
        assert_eq!((two.tp, two.fp, two.fn_), (1, 1, 0));
        // "rebels attacked the" overlaps both golds; "the" only the second.
        let straddle = type_overlap_f1(
            &[span("Attack", "rebels attacked the"), span("Attack", "the northern")],
            &[span("Attack", "rebels"), span("Attack", "attacked the northern")],
            &sentences,
        );
        assert_eq!((straddle.tp, straddle.fp, straddle.fn_), (2, 0, 0));
    }

    #[test]
    fn prf_serializes_fn_key() {
        let json = serde_json::to_value(Prf::from_counts(1, 0, 1)).unwrap();
        assert_eq!(json["fn"], 1);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn items() -> impl Strategy<Value = Vec<TriggerItem>> {
            prop::collection::vec(
                ("s[12]", "(Attack|Die)", "(war|kill|shot)").prop_map(|(s, t, w)| TriggerItem {
                    sentence_id: s,
                    event_type: t,
                    trigger: w,
                }),
                0..8,
            )
        }

        proptest! {
            #[test]
            fn self_match_is_perfect(x in items()) {
                prop_assume!(!x.is_empty());
                prop_assert_eq!(trigger_f1(&x, &x).f1, 1.0);
            }

            #[test]
            fn swapping_sides_swaps_precision_and_recall(p in items(), g in items()) {
                let a = trigger_f1(&p, &g);
                let b = trigger_f1(&g, &p);
                prop_assert_eq!(a.precision, b.recall);
                prop_assert_eq!(a.recall, b.precision);
                prop_assert_eq!(a.f1, b.f1);
            }

            #[test]
            fn spurious_prediction_never_raises_precision(p in items(), g in items()) {
                let before = trigger_f1(&p, &g);
                let mut more = p.clone();
                more.push(TriggerItem { sentence_id: "s9".into(), event_type: "Attack".into(), trigger: "war".into() });
                prop_assert!(trigger_f1(&more, &g).precision <= before.precision);
            }
        }
    }
}
