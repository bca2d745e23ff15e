use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Splits XML into tokens: `<`, `>`, `/`, `=` and `"` stand alone, everything
/// else splits on whitespace. Case is preserved.
pub fn tokenize_xml(text: &str) -> Vec<String> {
    let mut spaced = String::with_capacity(text.len() * 2);
    for ch in text.chars() {
        if matches!(ch, '<' | '>' | '/' | '=' | '"') {
            spaced.push(' ');
            spaced.push(ch);
            spaced.push(' ');
        } else {
            spaced.push(ch);
        }
    }
    spaced.split_whitespace().map(str::to_string).collect()
}

pub const BLEU_MAX_ORDER: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    pub score: f64,
    /// Smoothed modified precisions for the orders actually used.
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    /// Either side was empty; the score is 0 by definition.
    pub degenerate: bool,
}

fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
    }
    counts
}

/// Sentence BLEU-4 with uniform weights. Orders above the candidate length
/// are dropped; a zero match count at order n is replaced by one half,
/// giving a precision of 1 / (2 * candidate n-grams).
pub fn bleu<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> BleuScore {
    let (c, r) = (candidate.len(), reference.len());
    if c == 0 || r == 0 {
        return BleuScore {
            score: 0.0,
            precisions: Vec::new(),
            brevity_penalty: 0.0,
            degenerate: true,
        };
    }
    let orders = BLEU_MAX_ORDER.min(c);
    let mut precisions = Vec::with_capacity(orders);
    for n in 1..=orders {
        let cand = ngram_counts(candidate, n);
        let refs = ngram_counts(reference, n);
        let matched: usize = cand
            .iter()
            .map(|(g, &k)| k.min(refs.get(g).copied().unwrap_or(0)))
            .sum();
        let total = c - n + 1;
        let m = if matched == 0 { 0.5 } else { matched as f64 };
        precisions.push(m / total as f64);
    }
    let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / orders as f64;
    let brevity_penalty = (1.0 - r as f64 / c as f64).exp().min(1.0);
    BleuScore {
        score: (brevity_penalty * log_mean.exp()).clamp(0.0, 1.0),
        precisions,
        brevity_penalty,
        degenerate: false,
    }
}

/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// LCS-based F1.
pub fn rouge_l<T: PartialEq>(candidate: &[T], reference: &[T]) -> f64 {
    let lcs = lcs_len(candidate, reference) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / candidate.len() as f64;
    let r = lcs / reference.len() as f64;
    2.0 * p * r / (p + r)
}
