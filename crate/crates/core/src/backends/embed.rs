use super::{BackendError, EmbeddingBackend};
use crate::corpus::normalize;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "been", "but", "by", "for", "from", "had", "has",
    "have", "he", "her", "his", "in", "is", "it", "its", "of", "on", "or", "she", "that", "the",
    "their", "they", "this", "to", "was", "were", "which", "who", "with",
];

const STOPWORD_WEIGHT: f64 = 0.1;

/// Deterministic embedder: each lowercased alphanumeric word contributes its
/// character trigrams (with `^`/`$` word-boundary markers) hashed into
/// `dimension` buckets; common function words are down-weighted. The count
/// vector is L2-normalized.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
}

impl HashEmbedder {
    pub const MIN_DIMENSION: usize = 8;

    pub fn new(dimension: usize) -> Result<Self, BackendError> {
        if dimension < Self::MIN_DIMENSION {
            return Err(BackendError::InvalidConfig(format!(
                "hash embedder dimension must be at least {}, got {dimension}",
                Self::MIN_DIMENSION
            )));
        }
        Ok(Self { dimension })
    }

    fn add_trigrams(&self, word: &str, weight: f64, counts: &mut [f64]) {
        let chars: Vec<char> = std::iter::once('^')
            .chain(word.chars())
            .chain(std::iter::once('$'))
            .collect();
        let mut buf = String::new();
        for window in chars.windows(3) {
            buf.clear();
            buf.extend(window);
            let bucket = (fnv1a(buf.as_bytes()) % self.dimension as u64) as usize;
            counts[bucket] += weight;
        }
    }
}

impl EmbeddingBackend for HashEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::EmptyText);
        }
        let lower = text.to_lowercase();
        let mut counts = vec![0.0; self.dimension];
        let mut words = 0;
        for word in lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
            let weight = if STOPWORDS.contains(&word) { STOPWORD_WEIGHT } else { 1.0 };
            self.add_trigrams(word, weight, &mut counts);
            words += 1;
        }
        if words == 0 {
            // punctuation-only text still gets a non-zero vector
            self.add_trigrams(lower.trim(), 1.0, &mut counts);
        }
        Ok(normalize(&counts).expect("non-empty trigram histogram"))
    }

    fn dimension(&self) -> usize {
        self.dimension
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::dot;

    #[test]
    fn deterministic_and_distinct() {
        let e = HashEmbedder::new(64).unwrap();
        let a1 = e.embed("abc").unwrap();
        let a2 = e.embed("abc").unwrap();
        assert_eq!(a1, a2);
        let b = e.embed("abd").unwrap();
        let d = 1.0 - dot(&a1, &b);
        assert!(d > 0.0 && d <= 2.0, "distance {d}");
    }

    #[test]
    fn empty_text_rejected() {
        let e = HashEmbedder::new(8).unwrap();
        assert_eq!(e.embed(""), Err(BackendError::EmptyText));
        assert_eq!(e.embed("  "), Err(BackendError::EmptyText));
        assert!(e.embed("?!").is_ok());
    }

    #[test]
    fn shared_content_words_dominate() {
        let e = HashEmbedder::new(256).unwrap();
        let q = e.embed("He was formerly a civil servant .").unwrap();
        let near = e.embed("his former deputy").unwrap();
        let far = e.embed("The weather was mild .").unwrap();
        assert!(dot(&q, &near) > dot(&q, &far));
    }

    #[test]
    fn dimension_floor() {
        assert!(HashEmbedder::new(7).is_err());
        let e = HashEmbedder::new(8).unwrap();
        assert_eq!(e.embed("x").unwrap().len(), 8);
    }
}
