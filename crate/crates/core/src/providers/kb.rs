//! Lexical knowledge-base retrieval: TF-IDF vectors with log-scaled term
//! frequency (`1 + ln tf`) and smoothed inverse document frequency
//! (`ln((1 + N) / (1 + df)) + 1`), ranked by cosine similarity.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EXCERPT_CHARS: usize = 400;

#[derive(Debug, Error, PartialEq)]
pub enum KbError {
    #[error("knowledge base `{0}` not found")]
    NotFound(String),
    #[error("top_k must be at least 1")]
    InvalidTopK,
    #[error("cannot ingest {path}: {message}")]
    Ingest { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbHit {
    pub doc_id: String,
    pub score: f64,
    pub excerpt: String,
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone)]
struct Posting {
    doc: usize,
    weight: f64,
}

#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    kb_id: String,
    documents: Vec<Document>,
    postings: HashMap<String, Vec<Posting>>,
    idf: HashMap<String, f64>,
    norms: Vec<f64>,
}

impl KnowledgeBase {
    pub fn new(kb_id: impl Into<String>, mut documents: Vec<Document>) -> Self {
        documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        let n = documents.len() as f64;

        let counts: Vec<BTreeMap<String, u32>> = documents
            .iter()
            .map(|d| {
                let mut tf = BTreeMap::new();
                for term in tokenize(&format!("{}\n{}", d.title, d.body)) {
                    *tf.entry(term).or_insert(0) += 1;
                }
                tf
            })
            .collect();

        let mut df: HashMap<&str, u32> = HashMap::new();
        for tf in &counts {
            for term in tf.keys() {
                *df.entry(term).or_insert(0) += 1;
            }
        }
        let idf: HashMap<String, f64> = df
            .iter()
            .map(|(term, df)| (term.to_string(), ((1.0 + n) / (1.0 + *df as f64)).ln() + 1.0))
            .collect();

        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        let mut norms = vec![0.0; documents.len()];
        for (doc, tf) in counts.iter().enumerate() {
            for (term, count) in tf {
                let weight = (1.0 + (*count as f64).ln()) * idf[term];
                norms[doc] += weight * weight;
                postings
                    .entry(term.clone())
                    .or_default()
                    .push(Posting { doc, weight });
            }
        }
        for norm in &mut norms {
            *norm = norm.sqrt();
        }

        KnowledgeBase {
            kb_id: kb_id.into(),
            documents,
            postings,
            idf,
            norms,
        }
    }

    /// Ingest every `.md` / `.txt` file in `dir`. The file name is the
    /// doc id; a leading markdown heading becomes the title.
    pub fn ingest_dir(kb_id: impl Into<String>, dir: &Path) -> Result<Self, KbError> {
        let ingest_err = |message: String| KbError::Ingest {
            path: dir.display().to_string(),
            message,
        };
        let mut documents = Vec::new();
        let entries = std::fs::read_dir(dir).map_err(|e| ingest_err(e.to_string()))?;
        for entry in entries {
            let path = entry.map_err(|e| ingest_err(e.to_string()))?.path();
            let is_text = matches!(
                path.extension().and_then(|e| e.to_str()),
                Some("md") | Some("txt")
            );
            if !path.is_file() || !is_text {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(|e| ingest_err(e.to_string()))?;
            let doc_id = path
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default()
                .to_string();
            let (title, body) = match text.split_once('\n') {
                Some((first, rest)) if first.starts_with('#') => {
                    (first.trim_start_matches('#').trim().to_string(), rest.trim_start().to_string())
                }
                _ => (doc_id.clone(), text),
            };
            documents.push(Document {
                doc_id,
                title,
                body,
            });
        }
        Ok(KnowledgeBase::new(kb_id, documents))
    }

    pub fn id(&self) -> &str {
        &self.kb_id
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    /// Ranked by (score desc, doc_id asc); zero-score documents are dropped.
    pub fn query(&self, text: &str, top_k: usize) -> Result<Vec<KbHit>, KbError> {
        if top_k == 0 {
            return Err(KbError::InvalidTopK);
        }
        let mut query_tf: BTreeMap<String, u32> = BTreeMap::new();
        for term in tokenize(text) {
            if self.idf.contains_key(&term) {
                *query_tf.entry(term).or_insert(0) += 1;
            }
        }
        let mut query_norm = 0.0;
        let mut dots = vec![0.0; self.documents.len()];
        for (term, count) in &query_tf {
            let weight = (1.0 + (*count as f64).ln()) * self.idf[term];
            query_norm += weight * weight;
            for posting in &self.postings[term] {
                dots[posting.doc] += weight * posting.weight;
            }
        }
        let query_norm = query_norm.sqrt();
        if query_norm == 0.0 {
            return Ok(Vec::new());
        }
        let mut scored: Vec<(usize, f64)> = dots
            .into_iter()
            .enumerate()
            .filter(|(_, dot)| *dot > 0.0)
            .map(|(doc, dot)| (doc, dot / (query_norm * self.norms[doc])))
            .collect();
        // Documents are stored in doc_id order, so index order breaks ties.
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(scored
            .into_iter()
            .take(top_k)
            .map(|(doc, score)| {
                let d = &self.documents[doc];
                KbHit {
                    doc_id: d.doc_id.clone(),
                    score,
                    excerpt: d.body.chars().take(EXCERPT_CHARS).collect(),
                }
            })
            .collect())
    }
}

/// Knowledge bases bound to one agent, immutable after load.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeStore {
    bases: BTreeMap<String, KnowledgeBase>,
}

impl KnowledgeStore {
    pub fn insert(&mut self, kb: KnowledgeBase) {
        self.bases.insert(kb.kb_id.clone(), kb);
    }

    pub fn get(&self, kb_id: &str) -> Option<&KnowledgeBase> {
        self.bases.get(kb_id)
    }

    pub fn query(&self, kb_id: &str, text: &str, top_k: usize) -> Result<Vec<KbHit>, KbError> {
        self.bases
            .get(kb_id)
            .ok_or_else(|| KbError::NotFound(kb_id.to_string()))?
            .query(text, top_k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, body: &str) -> Document {
        Document {
            doc_id: id.into(),
            title: String::new(),
            body: body.into(),
        }
    }

    fn corpus() -> KnowledgeBase {
        KnowledgeBase::new(
            "policies",
            vec![
                doc("refunds", "Refunds are issued to the original payment method."),
                doc("baggage", "Each passenger may check one bag for free."),
                doc("exchanges", "Delivered items may be exchanged for another variant."),
            ],
        )
    }

    #[test]
    fn unique_term_dominates() {
        let hits = corpus().query("bag bag bag", 3).unwrap();
        assert_eq!(hits[0].doc_id, "baggage");
    }

    #[test]
    fn no_corpus_terms_yields_nothing() {
        assert!(corpus().query("zeppelin quokka", 3).unwrap().is_empty());
    }

    #[test]
    fn top_k_bounds_and_validation() {
        let kb = corpus();
        assert_eq!(kb.query("the", 1).unwrap().len(), 1);
        assert_eq!(kb.query("the", 0), Err(KbError::InvalidTopK));
    }

    #[test]
    fn ties_break_by_doc_id() {
        let kb = KnowledgeBase::new("t", vec![doc("b", "same text"), doc("a", "same text")]);
        let hits = kb.query("same", 5).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.doc_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(hits[0].score, hits[1].score);
    }

    #[test]
    fn excerpt_is_first_400_chars() {
        let long = "é".repeat(500);
        let kb = KnowledgeBase::new("t", vec![doc("x", &format!("word {long}"))]);
        let hits = kb.query("word", 1).unwrap();
        assert_eq!(hits[0].excerpt.chars().count(), EXCERPT_CHARS);
    }

    #[test]
    fn unknown_kb_is_not_found() {
        let store = KnowledgeStore::default();
        assert_eq!(
            store.query("nope", "x", 1),
            Err(KbError::NotFound("nope".into()))
        );
    }

    #[test]
    fn ingest_reads_markdown_titles() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.md"), "# Refund policy\nNo refunds on basic fares.").unwrap();
        std::fs::write(dir.path().join("skip.bin"), "ignored").unwrap();
        let kb = KnowledgeBase::ingest_dir("k", dir.path()).unwrap();
        assert_eq!(kb.documents().len(), 1);
        assert_eq!(kb.documents()[0].title, "Refund policy");
        assert_eq!(kb.query("refund", 1).unwrap()[0].doc_id, "a.md");
    }
}
