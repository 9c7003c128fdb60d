//! Lexicon-based mapping of asset documentation onto the task taxonomy.

use std::collections::BTreeSet;

use thiserror::Error;

use super::taxonomy::{Taxonomy, TaxonomyEntry};
use super::text::{token_spans, tokenize, TokenSpan};
use super::{AssetRecord, SeTaskAssignment};

/// Longest rationale excerpt on either side of the matched phrase, in bytes.
const RATIONALE_CONTEXT: usize = 160;
const MIN_CONFIDENCE: f64 = 0.1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("asset `{0}` has no card text")]
    MissingDocumentation(String),
}

/// A taxonomy hit plus the detail needed by outlier detection.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskMatch {
    pub assignment: SeTaskAssignment,
    /// Distinct lexicon terms found in card, abstract or tags.
    pub matched_terms: BTreeSet<String>,
    /// Every matched term is flagged as polysemous for this task.
    pub ambiguous_only: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Source {
    Card,
    Abstract,
}

struct TextHit {
    source: Source,
    start: usize,
    end: usize,
    ambiguous: bool,
}

/// Tasks whose lexicon occurs in the asset's documentation, ordered by
/// confidence (highest first, then task id).
pub fn classify_asset(
    asset: &AssetRecord,
    taxonomy: &Taxonomy,
) -> Result<Vec<SeTaskAssignment>, ClassifyError> {
    Ok(classify_detailed(asset, taxonomy)?
        .into_iter()
        .map(|m| m.assignment)
        .collect())
}

pub fn classify_detailed(
    asset: &AssetRecord,
    taxonomy: &Taxonomy,
) -> Result<Vec<TaskMatch>, ClassifyError> {
    if asset.card_text.trim().is_empty() {
        return Err(ClassifyError::MissingDocumentation(
            asset.asset_id.to_string(),
        ));
    }
    let card = asset.card_text.as_str();
    // Front matter is metadata, not prose; offsets stay relative to card_text.
    let body_offset = card.len() - asset.card_body().len();
    let card_spans: Vec<TokenSpan> = token_spans(&card[body_offset..])
        .into_iter()
        .map(|s| TokenSpan {
            start: s.start + body_offset,
            end: s.end + body_offset,
            token: s.token,
        })
        .collect();
    let abstract_text = asset.abstract_text.as_deref().unwrap_or("");
    let abstract_spans = token_spans(abstract_text);
    let tag_tokens: Vec<Vec<String>> = asset.metadata_tags().into_iter().map(tokenize).collect();

    let mut out: Vec<TaskMatch> = taxonomy
        .entries()
        .iter()
        .filter_map(|entry| {
            match_entry(
                entry,
                card,
                abstract_text,
                &card_spans,
                &abstract_spans,
                &tag_tokens,
            )
        })
        .collect();
    out.sort_by(|a, b| {
        b.assignment
            .confidence
            .total_cmp(&a.assignment.confidence)
            .then_with(|| a.assignment.task_id.cmp(&b.assignment.task_id))
    });
    Ok(out)
}

fn match_entry(
    entry: &TaxonomyEntry,
    card: &str,
    abstract_text: &str,
    card_spans: &[TokenSpan],
    abstract_spans: &[TokenSpan],
    tag_tokens: &[Vec<String>],
) -> Option<TaskMatch> {
    let mut lexicon: Vec<(String, Vec<String>)> = Vec::new();
    for term in &entry.lexicon {
        let key = term.to_lowercase();
        let toks = tokenize(&key);
        if toks.is_empty() || lexicon.iter().any(|(k, _)| *k == key) {
            continue;
        }
        lexicon.push((key, toks));
    }
    if lexicon.is_empty() {
        return None;
    }

    let mut matched = BTreeSet::new();
    let mut hits: Vec<TextHit> = Vec::new();
    for (term, toks) in &lexicon {
        let ambiguous = entry.is_ambiguous(term);
        let mut found = false;
        for (source, spans) in [
            (Source::Card, card_spans),
            (Source::Abstract, abstract_spans),
        ] {
            if let Some((start, end)) = find_phrase(spans, toks) {
                hits.push(TextHit {
                    source,
                    start,
                    end,
                    ambiguous,
                });
                found = true;
            }
        }
        if found || tag_tokens.iter().any(|t| contains_sequence(t, toks)) {
            matched.insert(term.clone());
        }
    }
    // Only prose can justify an assignment: the rationale must be quotable.
    let best = hits
        .iter()
        .min_by_key(|h| (h.ambiguous, h.source, h.start))?;
    let text = match best.source {
        Source::Card => card,
        Source::Abstract => abstract_text,
    };
    let rationale = excerpt(text, best.start, best.end).to_string();
    let confidence = (matched.len() as f64 / lexicon.len() as f64).clamp(MIN_CONFIDENCE, 1.0);
    let ambiguous_only = matched.iter().all(|t| entry.is_ambiguous(t));
    Some(TaskMatch {
        assignment: SeTaskAssignment {
            task_id: entry.task_id.clone(),
            confidence,
            rationale,
            low_confidence: false,
        },
        matched_terms: matched,
        ambiguous_only,
    })
}

fn find_phrase(spans: &[TokenSpan], phrase: &[String]) -> Option<(usize, usize)> {
    if phrase.is_empty() || spans.len() < phrase.len() {
        return None;
    }
    spans.windows(phrase.len()).find_map(|w| {
        w.iter()
            .zip(phrase)
            .all(|(s, p)| s.token == *p)
            .then(|| (w[0].start, w[w.len() - 1].end))
    })
}

fn contains_sequence(tokens: &[String], phrase: &[String]) -> bool {
    tokens.len() >= phrase.len() && tokens.windows(phrase.len()).any(|w| w == phrase)
}

fn is_sentence_break(text: &str, idx: usize) -> bool {
    let bytes = text.as_bytes();
    match bytes[idx] {
        b'\n' => true,
        b'.' | b'!' | b'?' => bytes.get(idx + 1).is_none_or(|b| b.is_ascii_whitespace()),
        _ => false,
    }
}

/// The sentence around `[start, end)`, capped in length and trimmed. Always a
/// substring of `text` that contains the match.
fn excerpt(text: &str, start: usize, end: usize) -> &str {
    let mut lo = start;
    let floor = start.saturating_sub(RATIONALE_CONTEXT);
    while lo > floor && !is_sentence_break(text, lo - 1) {
        lo -= 1;
    }
    while !text.is_char_boundary(lo) {
        lo += 1;
    }
    let mut hi = end;
    let ceil = (end + RATIONALE_CONTEXT).min(text.len());
    while hi < ceil && !is_sentence_break(text, hi) {
        hi += 1;
    }
    if hi < text.len() && matches!(text.as_bytes()[hi], b'.' | b'!' | b'?') {
        hi += 1;
    }
    while !text.is_char_boundary(hi) {
        hi -= 1;
    }
    text[lo..hi].trim()
}
