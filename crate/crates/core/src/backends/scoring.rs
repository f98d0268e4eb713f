use serde::{Deserialize, Serialize};

use super::{BackendError, ScoringBackend};

/// A key phrase the test scorer treats as the preferred completion for
/// prompts containing every string in `when`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerKey {
    #[serde(default)]
    pub when: Vec<String>,
    pub key: String,
    #[serde(default)]
    pub scale: Option<f64>,
}

/// Deterministic stand-in for a scoring language model.
///
/// For the first key whose `when` strings all occur in the prompt, the score
/// of completion `c` against key phrase `k` is
///
/// ```text
/// scale * (1 + levenshtein(c, k) + len(c)) / (1 + len(k))
/// ```
///
/// with lengths in characters. The key itself scores exactly `scale`, any
/// completion that is not a subsequence of the key scores strictly more, and
/// appending characters never lowers the score. Prompts matching no key are
/// scored against the empty key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyedScorer {
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub keys: Vec<ScorerKey>,
}

fn default_scale() -> f64 {
    1.0
}

impl Default for KeyedScorer {
    fn default() -> Self {
        Self {
            scale: default_scale(),
            keys: Vec::new(),
        }
    }
}

impl KeyedScorer {
    pub fn new(scale: f64) -> Self {
        Self {
            scale,
            keys: Vec::new(),
        }
    }

    pub fn with_key(mut self, when: &[&str], key: impl Into<String>, scale: Option<f64>) -> Self {
        self.keys.push(ScorerKey {
            when: when.iter().map(|s| s.to_string()).collect(),
            key: key.into(),
            scale,
        });
        self
    }

    fn key_for(&self, prompt: &str) -> (&str, f64) {
        self.keys
            .iter()
            .find(|k| k.when.iter().all(|w| prompt.contains(w.as_str())))
            .map(|k| (k.key.as_str(), k.scale.unwrap_or(self.scale)))
            .unwrap_or(("", self.scale))
    }
}

impl ScoringBackend for KeyedScorer {
    fn negative_log_likelihood(
        &self,
        prompt: &str,
        completion: &str,
    ) -> Result<f64, BackendError> {
        let (key, scale) = self.key_for(prompt);
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(BackendError::InvalidConfig(format!(
                "scorer scale must be finite and non-negative, got {scale}"
            )));
        }
        let distance = strsim::levenshtein(completion, key) as f64;
        let completion_len = completion.chars().count() as f64;
        let key_len = key.chars().count() as f64;
        Ok(scale * (1.0 + distance + completion_len) / (1.0 + key_len))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn key_scores_exactly_scale() {
        let s = KeyedScorer::new(0.4).with_key(&["sentence"], "[\"A\", \"b\"]", None);
        let r = s.negative_log_likelihood("the sentence", "[\"A\", \"b\"]").unwrap();
        assert_eq!(r, 0.4);
    }

    #[test]
    fn preferred_answer_scores_lower() {
        let s = KeyedScorer::new(1.0).with_key(&[], "Life:Die killed", None);
        let a = s.negative_log_likelihood("p", "Life:Die killed").unwrap();
        let b = s.negative_log_likelihood("p", "Life:Divorce split").unwrap();
        assert!(a < b);
    }

    #[test]
    fn first_matching_key_wins() {
        let s = KeyedScorer::new(1.0)
            .with_key(&["x", "y"], "k1", Some(2.0))
            .with_key(&["x"], "k2", None);
        assert_eq!(s.negative_log_likelihood("x y", "k1").unwrap(), 2.0);
        assert_eq!(s.negative_log_likelihood("x", "k2").unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn monotone_under_extension(c in "[a-z\\[\\]\" ,:]{0,20}", ext in "[a-z ]{1,5}", key in "[a-z ]{0,12}") {
            let s = KeyedScorer::new(1.0).with_key(&[], key, None);
            let base = s.negative_log_likelihood("p", &c).unwrap();
            let longer = s.negative_log_likelihood("p", &format!("{c}{ext}")).unwrap();
            prop_assert!(base >= 0.0);
            prop_assert!(longer >= base);
        }
    }
}
