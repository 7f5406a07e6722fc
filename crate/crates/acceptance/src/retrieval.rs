use std::collections::{BTreeMap, BTreeSet};

use agent_bench::{Domain, Fixtures};
use agent_core::providers::{Document, KbHit, KnowledgeBase, EXCERPT_CHARS};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::{ensure, Outcome};

const SEED: u64 = 0x7f1d_f00d;
const CORPORA: usize = 400;
const QUERIES_PER_CORPUS: usize = 12;
const MAX_DOCS: usize = 20;

const WORDS: [&str; 24] = [
    "refund", "Refund", "order", "bag", "baggage", "fee", "exchange", "item", "gift", "card", "flight", "cabin",
    "upgrade", "policy", "days", "30", "2L", "non", "refundable", "cancel", "ÉTÉ", "été", "kettle", "shirt",
];
const SEPARATORS: [&str; 6] = [" ", " ", ", ", ".\n", "-", "  ("];

fn oracle_terms(text: &str) -> Vec<String> {
    let mut terms = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            terms.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        terms.push(current);
    }
    terms
}

fn counts(terms: Vec<String>) -> BTreeMap<String, u32> {
    let mut tf = BTreeMap::new();
    for t in terms {
        *tf.entry(t).or_insert(0) += 1;
    }
    tf
}

/// Dense TF-IDF cosine over the whole vocabulary, every document scored,
/// then a full sort.
fn brute_force(documents: &[Document], query: &str, top_k: usize) -> Vec<KbHit> {
    let mut docs = documents.to_vec();
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let tfs: Vec<BTreeMap<String, u32>> = docs.iter().map(|d| counts(oracle_terms(&format!("{}\n{}", d.title, d.body)))).collect();
    let vocab: BTreeSet<&String> = tfs.iter().flat_map(|tf| tf.keys()).collect();
    let n = docs.len() as f64;
    let idf: Vec<f64> = vocab
        .iter()
        .map(|t| {
            let df = tfs.iter().filter(|tf| tf.contains_key(*t)).count() as f64;
            ((1.0 + n) / (1.0 + df)).ln() + 1.0
        })
        .collect();
    let weigh = |tf: &BTreeMap<String, u32>| -> Vec<f64> {
        vocab
            .iter()
            .zip(&idf)
            .map(|(t, idf)| tf.get(*t).map_or(0.0, |&c| (1.0 + f64::from(c).ln()) * idf))
            .collect()
    };
    let norm = |v: &[f64]| v.iter().fold(0.0, |acc, w| acc + w * w).sqrt();
    let q = weigh(&counts(oracle_terms(query)));
    let q_norm = norm(&q);
    if q_norm == 0.0 {
        return Vec::new();
    }
    let mut scored: Vec<(f64, &Document)> = tfs
        .iter()
        .zip(&docs)
        .filter_map(|(tf, doc)| {
            let d = weigh(tf);
            let dot = q.iter().zip(&d).fold(0.0, |acc, (a, b)| acc + a * b);
            (dot > 0.0).then(|| (dot / (q_norm * norm(&d)), doc))
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite scores").then_with(|| a.1.doc_id.cmp(&b.1.doc_id)));
    scored
        .into_iter()
        .take(top_k)
        .map(|(score, d)| KbHit { doc_id: d.doc_id.clone(), score, excerpt: d.body.chars().take(EXCERPT_CHARS).collect() })
        .collect()
}

fn text(rng: &mut StdRng, words: &[&str], max: usize) -> String {
    let mut out = String::new();
    for _ in 0..rng.random_range(0..=max) {
        out.push_str(words[rng.random_range(0..words.len())]);
        out.push_str(SEPARATORS[rng.random_range(0..SEPARATORS.len())]);
    }
    out
}

fn compare(kb: &KnowledgeBase, query: &str, top_k: usize) -> Result<(), String> {
    let got = kb.query(query, top_k).map_err(|e| e.to_string())?;
    let want = brute_force(kb.documents(), query, top_k);
    ensure!(got == want, "kb {} query {query:?} top_k {top_k}: engine {got:?}, brute force {want:?}", kb.id());
    Ok(())
}

pub fn check() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut queries = 0;
    for c in 0..CORPORA {
        let vocab_size = rng.random_range(2..=WORDS.len());
        let mut words = WORDS.to_vec();
        words.shuffle(&mut rng);
        words.truncate(vocab_size);
        let mut ids: Vec<usize> = (0..rng.random_range(1..=MAX_DOCS)).collect();
        ids.shuffle(&mut rng);
        let documents: Vec<Document> = ids
            .into_iter()
            .map(|i| Document { doc_id: format!("doc-{i:02}.md"), title: text(&mut rng, &words, 3), body: text(&mut rng, &words, 30) })
            .collect();
        let kb = KnowledgeBase::new(format!("corpus-{c}"), documents);
        for _ in 0..QUERIES_PER_CORPUS {
            compare(&kb, &text(&mut rng, &WORDS, 6), rng.random_range(1..=MAX_DOCS + 2))?;
            queries += 1;
        }
    }
    let fixtures = Fixtures::default();
    for domain in Domain::BENCHMARKED {
        let kb = KnowledgeBase::ingest_dir(domain.name(), &fixtures.kb_dir(domain)).map_err(|e| e.to_string())?;
        ensure!(kb.documents().len() <= MAX_DOCS, "fixture corpus {} has {} documents", kb.id(), kb.documents().len());
        for task in fixtures.tasks(domain).map_err(|e| e.to_string())? {
            for line in &task.user_script {
                compare(&kb, &line.utterance, 3)?;
                queries += 1;
            }
        }
    }
    Ok(format!("{queries} queries over {CORPORA} random corpora and the fixture knowledge bases rank exactly as brute force"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, body: &str) -> Document {
        Document { doc_id: id.into(), title: String::new(), body: body.into() }
    }

    #[test]
    fn oracle_by_hand() {
        let docs = [doc("b", "refund policy"), doc("a", "baggage fee")];
        let hits = brute_force(&docs, "Refund!", 5);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].doc_id, "b");
        // idf(refund) = ln(3/2)+1 = idf(policy): the query is at 45 degrees
        assert!((hits[0].score - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(brute_force(&docs, "nothing here", 5).is_empty());
    }

    #[test]
    fn oracle_tokens() {
        assert_eq!(oracle_terms("ÉTÉ-2L, été"), ["été", "2l", "été"]);
    }
}
