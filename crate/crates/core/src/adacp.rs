//! Adaptive conformal gating of debater answers.
//!
//! A split-conformal threshold `q̂₀` is taken from calibration risks as the
//! `⌈(n+1)(1-δ)⌉`-th smallest score (or `+∞` when that index exceeds `n`).
//! Each debate round an answer is rejected when its risk, scored with the
//! retrieved reference information appended to the prompt, is strictly above
//! the current threshold; the threshold then shrinks by a constant factor
//! `β` per round.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::backends::{BackendError, ScoringBackend};

#[derive(Debug, Error, PartialEq)]
pub enum AdaCpError {
    #[error("calibration set is empty")]
    EmptyCalibrationSet,

    #[error("delta must be in (0, 1), got {0}")]
    InvalidDelta(f64),

    #[error("decay factor must be in (0, 1], got {0}")]
    InvalidDecay(f64),

    #[error("risk scores must be finite and non-negative, got {0}")]
    InvalidRisk(f64),

    #[error("cannot score an empty answer")]
    EmptyAnswer,

    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Header separating the debater prompt from the retrieved information in
/// scoring prompts.
pub const REFERENCE_HEADER: &str = "Reference information:";

/// Acceptance threshold `q̂_t` at debate round `round`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskThreshold {
    #[serde(with = "threshold_value")]
    pub value: f64,
    pub round: u32,
}

impl RiskThreshold {
    pub fn new(value: f64) -> Self {
        Self { value, round: 0 }
    }

    pub fn accept_all() -> Self {
        Self::new(f64::INFINITY)
    }

    pub fn is_accept_all(&self) -> bool {
        self.value == f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaCpConfig {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Fixed initial thresholds; when set for a task, calibration is skipped.
    #[serde(default = "TaskThresholds::fixed_defaults")]
    pub initial_threshold_override: TaskThresholds,
    /// Thresholds written by the calibrate command.
    #[serde(default)]
    pub calibrated: TaskThresholds,
    /// Number of calibration pairs to sample (seeded); all when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_sample: Option<usize>,
}

fn default_delta() -> f64 {
    0.1
}

fn default_beta() -> f64 {
    0.5
}

impl Default for AdaCpConfig {
    fn default() -> Self {
        Self {
            delta: default_delta(),
            beta: default_beta(),
            initial_threshold_override: TaskThresholds::fixed_defaults(),
            calibrated: TaskThresholds::default(),
            calibration_sample: None,
        }
    }
}

impl AdaCpConfig {
    pub fn validate(&self) -> Result<(), AdaCpError> {
        check_delta(self.delta)?;
        check_decay(self.beta)
    }

    /// Override first, then the calibrated value.
    pub fn initial_threshold(&self, task: CalibrationTask) -> Option<RiskThreshold> {
        self.initial_threshold_override
            .get(task)
            .or_else(|| self.calibrated.get(task))
            .map(RiskThreshold::new)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationTask {
    Ed,
    Eae,
}

/// Optional per-task threshold values (`+∞` serialized as `"inf"`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskThresholds {
    #[serde(default, with = "optional_threshold_value")]
    pub ed: Option<f64>,
    #[serde(default, with = "optional_threshold_value")]
    pub eae: Option<f64>,
}

impl TaskThresholds {
    /// Initial thresholds used by the reference experiments: 1 for event
    /// detection and 3 for argument extraction.
    pub fn fixed_defaults() -> Self {
        Self {
            ed: Some(1.0),
            eae: Some(3.0),
        }
    }

    pub fn get(&self, task: CalibrationTask) -> Option<f64> {
        match task {
            CalibrationTask::Ed => self.ed,
            CalibrationTask::Eae => self.eae,
        }
    }

    pub fn set(&mut self, task: CalibrationTask, value: Option<f64>) {
        match task {
            CalibrationTask::Ed => self.ed = value,
            CalibrationTask::Eae => self.eae = value,
        }
    }
}

fn check_delta(delta: f64) -> Result<(), AdaCpError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(AdaCpError::InvalidDelta(delta))
    }
}

fn check_decay(factor: f64) -> Result<(), AdaCpError> {
    if factor > 0.0 && factor <= 1.0 {
        Ok(())
    } else {
        Err(AdaCpError::InvalidDecay(factor))
    }
}

/// 1-based rank `⌈(n+1)(1-δ)⌉` of the conformal quantile; may be `n + 1`.
///
/// A tolerance of 1e-9 absorbs representation error in `1 - δ` so that
/// products which are integers in exact arithmetic are not rounded up.
pub fn quantile_rank(n: usize, delta: f64) -> usize {
    let x = (n as f64 + 1.0) * (1.0 - delta);
    (x - 1e-9).ceil().max(1.0) as usize
}

pub fn calibrate(risks: &[f64], delta: f64) -> Result<RiskThreshold, AdaCpError> {
    check_delta(delta)?;
    if risks.is_empty() {
        return Err(AdaCpError::EmptyCalibrationSet);
    }
    if let Some(bad) = risks.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(AdaCpError::InvalidRisk(*bad));
    }
    let mut sorted = risks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = quantile_rank(sorted.len(), delta);
    if rank > sorted.len() {
        return Ok(RiskThreshold::accept_all());
    }
    Ok(RiskThreshold::new(sorted[rank - 1]))
}

/// Appends the retrieved information to the scoring input; empty retrieval
/// leaves the input unchanged.
pub fn render_scoring_prompt(input: &str, retrieved: &str) -> String {
    if retrieved.trim().is_empty() {
        input.to_string()
    } else {
        format!("{input}\n\n{REFERENCE_HEADER}\n{retrieved}")
    }
}

pub fn risk_score(
    scorer: &dyn ScoringBackend,
    input: &str,
    retrieved: &str,
    answer: &str,
) -> Result<f64, AdaCpError> {
    if answer.trim().is_empty() {
        return Err(AdaCpError::EmptyAnswer);
    }
    let prompt = render_scoring_prompt(input, retrieved);
    let risk = scorer.negative_log_likelihood(&prompt, answer)?;
    if !(risk.is_finite() && risk >= 0.0) {
        return Err(AdaCpError::InvalidRisk(risk));
    }
    Ok(risk)
}

/// Rejection is strict: an answer is kept when `risk <= q̂`.
pub fn accept(risk: f64, threshold: &RiskThreshold) -> bool {
    risk <= threshold.value
}

pub fn decay_threshold(threshold: RiskThreshold, beta: f64) -> RiskThreshold {
    RiskThreshold {
        value: threshold.value * beta,
        round: threshold.round + 1,
    }
}

/// Annotated (input, gold answer) pairs with lazily computed risks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CalibrationSet {
    pub pairs: Vec<(String, String)>,
    risks: Option<Vec<f64>>,
}

impl CalibrationSet {
    pub fn new(pairs: Vec<(String, String)>) -> Self {
        Self { pairs, risks: None }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn risks(&self) -> Option<&[f64]> {
        self.risks.as_deref()
    }

    /// Scores every pair with no retrieved context and caches the result.
    pub fn score(&mut self, scorer: &dyn ScoringBackend) -> Result<&[f64], AdaCpError> {
        if self.risks.is_none() {
            let risks = self
                .pairs
                .iter()
                .map(|(input, gold)| risk_score(scorer, input, "", gold))
                .collect::<Result<Vec<_>, _>>()?;
            self.risks = Some(risks);
        }
        Ok(self.risks.as_deref().unwrap())
    }

    pub fn calibrate(
        &mut self,
        scorer: &dyn ScoringBackend,
        delta: f64,
    ) -> Result<RiskThreshold, AdaCpError> {
        let risks = self.score(scorer)?;
        calibrate(risks, delta)
    }
}

/// Equal-width histogram over `[0, max]` of the risks observed in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskHistogram {
    pub round: u32,
    pub count: usize,
    pub max: f64,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl RiskHistogram {
    pub const BINS: usize = 20;

    pub fn from_risks(round: u32, risks: &[f64]) -> Self {
        let max = risks.iter().copied().fold(0.0, f64::max);
        let width = max / Self::BINS as f64;
        let edges = (0..=Self::BINS).map(|i| width * i as f64).collect();
        let mut counts = vec![0; Self::BINS];
        for &r in risks {
            let bin = if width > 0.0 {
                ((r / width) as usize).min(Self::BINS - 1)
            } else {
                0
            };
            counts[bin] += 1;
        }
        Self {
            round,
            count: risks.len(),
            max,
            edges,
            counts,
        }
    }
}

mod threshold_value {
    use super::*;

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        if value.is_infinite() && *value > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*value)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {t:?}"
            ))),
        }
    }
}

mod optional_threshold_value {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => threshold_value::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    #[derive(Deserialize)]
    struct Wrap(#[serde(with = "threshold_value")] f64);

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::KeyedScorer;

    /// Independent oracle: with δ = p/100, the rank is the smallest integer k
    /// with 100·k ≥ (n+1)·(100-p), computed in integer arithmetic.
    fn oracle(risks: &[f64], percent: u64) -> f64 {
        let n = risks.len() as u64;
        let mut k = 0;
        while 100 * k < (n + 1) * (100 - percent) {
            k += 1;
        }
        let mut sorted = risks.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if k > n {
            f64::INFINITY
        } else {
            sorted[(k - 1) as usize]
        }
    }

    #[test]
    fn nine_point_quantile() {
        let risks: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        assert_eq!(oracle(&risks, 10), 0.9);
        let t = calibrate(&risks, 0.1).unwrap();
        assert_eq!(t.value, 0.9);
        assert_eq!(t.round, 0);
    }

    #[test]
    fn small_n_gives_accept_all() {
        let risks = [0.4, 0.1, 0.3, 0.2];
        assert_eq!(oracle(&risks, 10), f64::INFINITY);
        assert!(calibrate(&risks, 0.1).unwrap().is_accept_all());
    }

    #[test]
    fn singleton() {
        assert_eq!(calibrate(&[0.7], 0.5).unwrap().value, 0.7);
    }

    #[test]
    fn all_subsets_of_pool_match_oracle() {
        let pool = [0.42, 1.7, 0.05, 3.3, 0.9, 2.2, 0.61, 1.15];
        for percent in [5u64, 10, 20] {
            let delta = percent as f64 / 100.0;
            for mask in 1u32..(1 << pool.len()) {
                let subset: Vec<f64> = (0..pool.len())
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| pool[i])
                    .collect();
                assert_eq!(
                    calibrate(&subset, delta).unwrap().value,
                    oracle(&subset, percent),
                    "mask {mask:b} delta {delta}"
                );
            }
        }
    }

    #[test]
    fn calibrate_errors() {
        assert_eq!(calibrate(&[], 0.1), Err(AdaCpError::EmptyCalibrationSet));
        assert_eq!(calibrate(&[1.0], 0.0), Err(AdaCpError::InvalidDelta(0.0)));
        assert_eq!(calibrate(&[1.0], 1.0), Err(AdaCpError::InvalidDelta(1.0)));
        assert_eq!(calibrate(&[-1.0], 0.1), Err(AdaCpError::InvalidRisk(-1.0)));
    }

    #[test]
    fn acceptance_boundary() {
        let t = RiskThreshold::new(0.5);
        assert!(accept(0.5, &t));
        assert!(!accept(0.6, &t));
        assert!(accept(1e300, &RiskThreshold::accept_all()));
    }

    #[test]
    fn threshold_decay() {
        let t = decay_threshold(RiskThreshold::new(1.0), 0.5);
        assert_eq!((t.value, t.round), (0.5, 1));
        assert_eq!(decay_threshold(RiskThreshold::new(3.0), 0.5).value, 1.5);
        let same = decay_threshold(RiskThreshold::new(0.8), 1.0);
        assert_eq!((same.value, same.round), (0.8, 1));
        let inf = decay_threshold(RiskThreshold::accept_all(), 0.5);
        assert!(inf.is_accept_all());
        assert_eq!(inf.round, 1);
    }

    #[test]
    fn threshold_sequence_matches_closed_form() {
        for &(q0, beta) in &[(1.0, 0.5), (3.0, 0.5), (1.0, 0.9), (2.7, 0.77)] {
            let mut t = RiskThreshold::new(q0);
            for round in 0..=10 {
                let closed = q0 * f64::powi(beta, round);
                let tol = 8.0 * f64::EPSILON * closed;
                assert!((t.value - closed).abs() <= tol, "{q0} {beta} {round}");
                if beta == 0.5 {
                    assert_eq!(t.value, closed);
                }
                t = decay_threshold(t, beta);
            }
        }
    }

    #[test]
    fn empty_retrieval_is_identity() {
        let scorer = KeyedScorer::new(1.0).with_key(&["Reference"], "x", None);
        let plain = risk_score(&scorer, "sentence prompt", "", "[\"A\", \"b\"]").unwrap();
        let direct = scorer
            .negative_log_likelihood("sentence prompt", "[\"A\", \"b\"]")
            .unwrap();
        assert_eq!(plain, direct);
        assert_eq!(render_scoring_prompt("in", "  "), "in");
        assert!(render_scoring_prompt("in", "ctx").contains(REFERENCE_HEADER));
    }

    #[test]
    fn keyed_scorer_orders_answers() {
        let scorer = KeyedScorer::new(1.0).with_key(&["sent"], "[\"Life:Die\", \"killed\"]", None);
        let a = risk_score(&scorer, "sent", "defs", "[\"Life:Die\", \"killed\"]").unwrap();
        let b = risk_score(&scorer, "sent", "defs", "[\"Life:Divorce\", \"split\"]").unwrap();
        assert!(a < b);
        assert_eq!(a, risk_score(&scorer, "sent", "defs", "[\"Life:Die\", \"killed\"]").unwrap());
        assert_eq!(risk_score(&scorer, "s", "", " "), Err(AdaCpError::EmptyAnswer));
    }

    #[test]
    fn threshold_serializes_infinity() {
        let t = RiskThreshold::accept_all();
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, r#"{"value":"inf","round":0}"#);
        assert_eq!(serde_json::from_str::<RiskThreshold>(&json).unwrap(), t);
        let tt = TaskThresholds {
            ed: Some(f64::INFINITY),
            eae: None,
        };
        let json = serde_json::to_string(&tt).unwrap();
        assert_eq!(serde_json::from_str::<TaskThresholds>(&json).unwrap(), tt);
    }

    #[test]
    fn override_takes_precedence() {
        let mut cfg = AdaCpConfig::default();
        cfg.calibrated.ed = Some(0.3);
        assert_eq!(cfg.initial_threshold(CalibrationTask::Ed).unwrap().value, 1.0);
        assert_eq!(cfg.initial_threshold(CalibrationTask::Eae).unwrap().value, 3.0);
        cfg.initial_threshold_override.ed = None;
        assert_eq!(cfg.initial_threshold(CalibrationTask::Ed).unwrap().value, 0.3);
    }

    #[test]
    fn histogram_bins() {
        let h = RiskHistogram::from_risks(0, &[0.0, 1.0, 2.0, 2.0]);
        assert_eq!(h.counts.len(), 20);
        assert_eq!(h.edges.len(), 21);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[10], 1);
        assert_eq!(h.counts[19], 2);
        assert_eq!(h.counts.iter().sum::<usize>(), 4);
        let empty = RiskHistogram::from_risks(1, &[]);
        assert_eq!(empty.count, 0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn acceptance_shrinks_as_threshold_decays(
                risks in prop::collection::vec(0.0f64..10.0, 1..30),
                q0 in 0.0f64..10.0,
                beta in 0.01f64..=1.0,
            ) {
                let mut t = RiskThreshold::new(q0);
                let mut prev: Vec<bool> = risks.iter().map(|r| accept(*r, &t)).collect();
                for _ in 0..5 {
                    t = decay_threshold(t, beta);
                    let now: Vec<bool> = risks.iter().map(|r| accept(*r, &t)).collect();
                    for (n, p) in now.iter().zip(&prev) {
                        prop_assert!(!n || *p);
                    }
                    prev = now;
                }
            }
        }
    }
}
