//! Reinforcement weight sequences and the drawing-probability kernels built
//! on top of them.
//!
//! Weights are only ever handled as natural logarithms. A ball count of a
//! few thousand already pushes `rho^i` past the range of an `f64`, so every
//! probability is produced by a logistic or a max-shifted softmax over
//! log-weight differences.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Logistic inputs are clamped to this magnitude before exponentiation.
/// Past it the saturated value is within machine epsilon of the truth.
pub const LOGISTIC_CLAMP: f64 = 745.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("rho must be a finite real > 1, got {0}")]
    InvalidRho(f64),
    #[error("gamma must be finite and >= 0, got {0}")]
    InvalidGamma(f64),
    #[error("delta must be finite and > 0, got {0}")]
    InvalidDelta(f64),
    #[error("custom weight table must not be empty")]
    EmptyTable,
    #[error("custom log-weight at index {index} is not finite")]
    NonFiniteLogWeight { index: usize },
    #[error("tail log-ratio must be finite, got {0}")]
    InvalidTailRatio(f64),
    #[error("rho bound must be a finite real > 1, got {0}")]
    InvalidRhoBound(f64),
    #[error("H1 certificate fails at index {index}: log-ratio {found} < ln(rho_bound) = {required}")]
    CertificateViolated {
        index: u64,
        found: f64,
        required: f64,
    },
    #[error("lower bound requires a > b, got a = {a}, b = {b}")]
    NotMajority { a: u64, b: u64 },
}

/// Numerically stable logistic function `1 / (1 + e^{-x})`.
pub fn logistic(x: f64) -> f64 {
    let x = x.clamp(-LOGISTIC_CLAMP, LOGISTIC_CLAMP);
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Declared H1 certification of a custom table: for every index `i >= prefix`
/// the ratio `w_{i+1} / w_i` is at least `rho_bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H1Certificate {
    pub prefix: u64,
    pub rho_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomTable {
    log_weights: Vec<f64>,
    tail_log_ratio: f64,
    h1: Option<H1Certificate>,
}

impl CustomTable {
    pub fn new(
        log_weights: Vec<f64>,
        tail_log_ratio: f64,
        h1: Option<H1Certificate>,
    ) -> Result<Self, WeightError> {
        if log_weights.is_empty() {
            return Err(WeightError::EmptyTable);
        }
        if let Some(index) = log_weights.iter().position(|w| !w.is_finite()) {
            return Err(WeightError::NonFiniteLogWeight { index });
        }
        if !tail_log_ratio.is_finite() {
            return Err(WeightError::InvalidTailRatio(tail_log_ratio));
        }
        let table = CustomTable {
            log_weights,
            tail_log_ratio,
            h1,
        };
        if let Some(cert) = h1 {
            table.verify(cert)?;
        }
        Ok(table)
    }

    fn verify(&self, cert: H1Certificate) -> Result<(), WeightError> {
        if !(cert.rho_bound.is_finite() && cert.rho_bound > 1.0) {
            return Err(WeightError::InvalidRhoBound(cert.rho_bound));
        }
        let required = cert.rho_bound.ln();
        let len = self.log_weights.len() as u64;
        // Ratios inside the table, then the single ratio that governs the tail.
        for i in cert.prefix..len.saturating_sub(1) {
            let found = self.log_weights[i as usize + 1] - self.log_weights[i as usize];
            if found < required {
                return Err(WeightError::CertificateViolated {
                    index: i,
                    found,
                    required,
                });
            }
        }
        if self.tail_log_ratio < required {
            return Err(WeightError::CertificateViolated {
                index: cert.prefix.max(len - 1),
                found: self.tail_log_ratio,
                required,
            });
        }
        Ok(())
    }

    fn log_weight(&self, i: u64) -> f64 {
        let len = self.log_weights.len() as u64;
        if i < len {
            self.log_weights[i as usize]
        } else {
            let last = self.log_weights[len as usize - 1];
            last + (i - len + 1) as f64 * self.tail_log_ratio
        }
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn tail_log_ratio(&self) -> f64 {
        self.tail_log_ratio
    }

    pub fn certificate(&self) -> Option<H1Certificate> {
        self.h1
    }
}

/// A reinforcement weight sequence `w_0, w_1, ...`.
///
/// Immutable once built; share freely between concurrent runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightSpec", into = "WeightSpec")]
pub enum WeightModel {
    /// `w_i = rho^i`.
    Exponential { rho: f64, ln_rho: f64 },
    /// `w_i = (1 + i * delta)^gamma`. Violates H1; kept for experiments.
    Polynomial { gamma: f64, delta: f64 },
    CustomTable(CustomTable),
}

impl WeightModel {
    pub fn exponential(rho: f64) -> Result<Self, WeightError> {
        if !(rho.is_finite() && rho > 1.0) {
            return Err(WeightError::InvalidRho(rho));
        }
        Ok(WeightModel::Exponential {
            rho,
            ln_rho: rho.ln(),
        })
    }

    pub fn polynomial(gamma: f64, delta: f64) -> Result<Self, WeightError> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(WeightError::InvalidGamma(gamma));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(WeightError::InvalidDelta(delta));
        }
        Ok(WeightModel::Polynomial { gamma, delta })
    }

    pub fn custom(
        log_weights: Vec<f64>,
        tail_log_ratio: f64,
        h1: Option<H1Certificate>,
    ) -> Result<Self, WeightError> {
        CustomTable::new(log_weights, tail_log_ratio, h1).map(WeightModel::CustomTable)
    }

    /// `ln w_i`.
    pub fn log_weight(&self, i: u64) -> f64 {
        match self {
            WeightModel::Exponential { ln_rho, .. } => i as f64 * ln_rho,
            WeightModel::Polynomial { gamma, delta } => gamma * (i as f64 * delta).ln_1p(),
            WeightModel::CustomTable(table) => table.log_weight(i),
        }
    }

    /// `ln w_a - ln w_b`. For exponential weights this is `(a - b) ln rho`,
    /// so it depends on the difference only, bit for bit.
    pub fn log_weight_diff(&self, a: u64, b: u64) -> f64 {
        match self {
            WeightModel::Exponential { ln_rho, .. } => signed_diff(a, b) * ln_rho,
            _ => self.log_weight(a) - self.log_weight(b),
        }
    }

    /// Probability `w_a / (w_a + w_b)` of drawing the color holding `a` balls
    /// against one holding `b`.
    pub fn pi_two_color(&self, a: u64, b: u64) -> f64 {
        logistic(self.log_weight_diff(a, b))
    }

    /// Softmax of the log-weights of `counts`.
    pub fn draw_probabilities(&self, counts: &[u64]) -> Vec<f64> {
        let mut out = vec![0.0; counts.len()];
        self.draw_probabilities_into(counts, &mut out);
        out
    }

    /// Allocation-free form of [`WeightModel::draw_probabilities`].
    ///
    /// Two colors delegate to [`WeightModel::pi_two_color`], so a two-color
    /// engine and the general engine see identical numbers. With more colors
    /// the normaliser is summed in sorted order, which makes the output
    /// exactly equivariant under permutations of `counts`.
    pub fn draw_probabilities_into(&self, counts: &[u64], out: &mut [f64]) {
        assert_eq!(counts.len(), out.len());
        match counts.len() {
            0 => {}
            1 => out[0] = 1.0,
            2 => {
                out[0] = self.pi_two_color(counts[0], counts[1]);
                out[1] = self.pi_two_color(counts[1], counts[0]);
            }
            _ => {
                for (o, &c) in out.iter_mut().zip(counts) {
                    *o = self.log_weight(c);
                }
                let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for o in out.iter_mut() {
                    *o = (*o - max).exp();
                }
                let mut sorted: smallsort::Buf = smallsort::Buf::from_slice(out);
                let total: f64 = sorted.sorted().iter().sum();
                for o in out.iter_mut() {
                    *o /= total;
                }
            }
        }
    }

    /// Partial sums `sum_{i<m} 1/w_i` for `m = 1..=n`.
    pub fn srh_partial_sums(&self, n: usize) -> Vec<f64> {
        let mut acc = 0.0;
        (0..n as u64)
            .map(|i| {
                acc += (-self.log_weight(i)).exp();
                acc
            })
            .collect()
    }

    /// Whether `w_{i+1} >= w_i` for all `i`.
    pub fn is_nondecreasing(&self) -> bool {
        match self {
            WeightModel::Exponential { .. } | WeightModel::Polynomial { .. } => true,
            WeightModel::CustomTable(t) => {
                t.tail_log_ratio >= 0.0 && t.log_weights.windows(2).all(|w| w[1] >= w[0])
            }
        }
    }

    /// The declared H1 certificate, if any. Exponential weights certify
    /// themselves with `rho_bound = rho` from index 0.
    pub fn h1_certificate(&self) -> Option<H1Certificate> {
        match self {
            WeightModel::Exponential { rho, .. } => Some(H1Certificate {
                prefix: 0,
                rho_bound: *rho,
            }),
            WeightModel::Polynomial { .. } => None,
            WeightModel::CustomTable(t) => t.h1,
        }
    }

    /// Short human-readable descriptor used in run metadata.
    pub fn descriptor(&self) -> String {
        match self {
            WeightModel::Exponential { rho, .. } => format!("exponential(rho={rho})"),
            WeightModel::Polynomial { gamma, delta } => {
                format!("polynomial(gamma={gamma},delta={delta})")
            }
            WeightModel::CustomTable(t) => format!(
                "custom(len={},tail_log_ratio={})",
                t.log_weights.len(),
                t.tail_log_ratio
            ),
        }
    }
}

fn signed_diff(a: u64, b: u64) -> f64 {
    if a >= b {
        (a - b) as f64
    } else {
        -((b - a) as f64)
    }
}

/// Exponential lower bound `1 / (1 + rho_bound^{b-a})` on `pi(a, b)` for
/// weights whose successive ratios are at least `rho_bound` past some index.
pub fn pi_lower_bound(rho_bound: f64, a: u64, b: u64) -> Result<f64, WeightError> {
    if !(rho_bound.is_finite() && rho_bound > 1.0) {
        return Err(WeightError::InvalidRhoBound(rho_bound));
    }
    if a <= b {
        return Err(WeightError::NotMajority { a, b });
    }
    Ok(logistic((a - b) as f64 * rho_bound.ln()))
}

mod smallsort {
    /// Stack buffer for the handful of colors a run normally uses.
    pub enum Buf {
        Inline([f64; 8], usize),
        Heap(Vec<f64>),
    }

    impl Buf {
        pub fn from_slice(xs: &[f64]) -> Self {
            if xs.len() <= 8 {
                let mut arr = [0.0; 8];
                arr[..xs.len()].copy_from_slice(xs);
                Buf::Inline(arr, xs.len())
            } else {
                Buf::Heap(xs.to_vec())
            }
        }

        pub fn sorted(&mut self) -> &[f64] {
            let s: &mut [f64] = match self {
                Buf::Inline(arr, len) => &mut arr[..*len],
                Buf::Heap(v) => v.as_mut_slice(),
            };
            s.sort_by(f64::total_cmp);
            s
        }
    }
}

/// Config-file representation of a [`WeightModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum WeightSpec {
    Exponential {
        rho: f64,
    },
    Polynomial {
        gamma: f64,
        delta: f64,
    },
    Custom {
        log_weights: Vec<f64>,
        tail_log_ratio: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h1: Option<H1Certificate>,
    },
}

impl TryFrom<WeightSpec> for WeightModel {
    type Error = WeightError;

    fn try_from(spec: WeightSpec) -> Result<Self, Self::Error> {
        match spec {
            WeightSpec::Exponential { rho } => WeightModel::exponential(rho),
            WeightSpec::Polynomial { gamma, delta } => WeightModel::polynomial(gamma, delta),
            WeightSpec::Custom {
                log_weights,
                tail_log_ratio,
                h1,
            } => WeightModel::custom(log_weights, tail_log_ratio, h1),
        }
    }
}

impl From<WeightModel> for WeightSpec {
    fn from(model: WeightModel) -> Self {
        match model {
            WeightModel::Exponential { rho, .. } => WeightSpec::Exponential { rho },
            WeightModel::Polynomial { gamma, delta } => WeightSpec::Polynomial { gamma, delta },
            WeightModel::CustomTable(t) => WeightSpec::Custom {
                log_weights: t.log_weights,
                tail_log_ratio: t.tail_log_ratio,
                h1: t.h1,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exp2() -> WeightModel {
        WeightModel::exponential(2.0).unwrap()
    }

    #[test]
    fn log_weight_examples() {
        assert_eq!(exp2().log_weight(0), 0.0);
        assert!((exp2().log_weight(3) - 2.0794415416798357).abs() < 1e-12);
        let poly = WeightModel::polynomial(1.0, 1.0).unwrap();
        assert!((poly.log_weight(4) - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn exponential_log_increment_is_ln_rho() {
        let m = WeightModel::exponential(3.7).unwrap();
        for i in [0u64, 1, 17, 1_000_000] {
            assert_eq!(m.log_weight_diff(i + 1, i), 3.7f64.ln());
        }
    }

    #[test]
    fn pi_two_color_examples() {
        assert_eq!(exp2().pi_two_color(5, 5), 0.5);
        assert!((exp2().pi_two_color(1, 0) - 2.0 / 3.0).abs() < 1e-15);
        let p = exp2().pi_two_color(10_001, 1);
        assert!((p - 1.0).abs() < 1e-12);
        assert!(p.is_finite());
    }

    #[test]
    fn draw_probability_examples() {
        let m = exp2();
        let p = m.draw_probabilities(&[0, 0, 0]);
        for x in &p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = m.draw_probabilities(&[2, 1, 0]);
        let want = [4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0];
        for (x, w) in p.iter().zip(want) {
            assert!((x - w).abs() < 1e-15);
        }
        let p = m.draw_probabilities(&[1, 0]);
        assert_eq!(p, vec![m.pi_two_color(1, 0), m.pi_two_color(0, 1)]);
    }

    #[test]
    fn lower_bound_examples() {
        assert!((pi_lower_bound(2.0, 1, 0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(pi_lower_bound(2.0, 2000, 0).unwrap() > 1.0 - 1e-15);
        assert_eq!(
            pi_lower_bound(2.0, 3, 3),
            Err(WeightError::NotMajority { a: 3, b: 3 })
        );
        assert!(pi_lower_bound(2.0, 2, 5).is_err());
        assert!(pi_lower_bound(1.0, 2, 1).is_err());
        let m = exp2();
        for (a, b) in [(1u64, 0u64), (7, 3), (1000, 999), (5_000_000, 17)] {
            assert_eq!(m.pi_two_color(a, b), pi_lower_bound(2.0, a, b).unwrap());
        }
    }

    #[test]
    fn srh_examples() {
        assert_eq!(exp2().srh_partial_sums(3), vec![1.0, 1.5, 1.75]);
        let flat = WeightModel::polynomial(0.0, 1.0).unwrap();
        assert_eq!(flat.srh_partial_sums(3), vec![1.0, 2.0, 3.0]);
        let last = *exp2().srh_partial_sums(50).last().unwrap();
        assert!((last - 2.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(WeightModel::exponential(1.0).is_err());
        assert!(WeightModel::exponential(f64::NAN).is_err());
        assert!(WeightModel::polynomial(-1.0, 1.0).is_err());
        assert!(WeightModel::polynomial(1.0, 0.0).is_err());
        assert_eq!(
            WeightModel::custom(vec![], 1.0, None),
            Err(WeightError::EmptyTable)
        );
        assert!(WeightModel::custom(vec![0.0, f64::INFINITY], 1.0, None).is_err());
    }

    #[test]
    fn custom_tail_extends_by_ratio() {
        let m = WeightModel::custom(vec![0.0, 0.5, 2.0], 0.25, None).unwrap();
        assert_eq!(m.log_weight(2), 2.0);
        assert_eq!(m.log_weight(3), 2.25);
        assert_eq!(m.log_weight(6), 3.0);
    }

    #[test]
    fn h1_certificate_checked() {
        let cert = H1Certificate {
            prefix: 1,
            rho_bound: 1.5,
        };
        // 0 -> 0.1 is below ln 1.5 but sits inside the uncertified prefix.
        assert!(WeightModel::custom(vec![0.0, 0.1, 0.6, 1.1], 0.5, Some(cert)).is_ok());
        let err = WeightModel::custom(vec![0.0, 0.1, 0.2, 1.1], 0.5, Some(cert)).unwrap_err();
        assert!(matches!(err, WeightError::CertificateViolated { index: 1, .. }));
        assert!(WeightModel::custom(vec![0.0, 0.5, 1.0], 0.3, Some(cert)).is_err());
    }

    #[test]
    fn json_forms() {
        let m: WeightModel = serde_json::from_str(r#"{"kind": "exponential", "rho": 2.0}"#).unwrap();
        assert_eq!(m, exp2());
        let m: WeightModel =
            serde_json::from_str(r#"{"kind": "polynomial", "gamma": 1.0, "delta": 1.0}"#).unwrap();
        assert_eq!(m, WeightModel::polynomial(1.0, 1.0).unwrap());
        let m: WeightModel = serde_json::from_str(
            r#"{"kind": "custom", "log_weights": [0.0, 1.0], "tail_log_ratio": 0.7}"#,
        )
        .unwrap();
        assert_eq!(m.log_weight(3), 2.4);
        assert!(serde_json::from_str::<WeightModel>(r#"{"kind": "exponential", "rho": 0.5}"#).is_err());
        let back: WeightModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    fn any_model() -> impl Strategy<Value = WeightModel> {
        prop_oneof![
            (1.0001f64..10.0).prop_map(|r| WeightModel::exponential(r).unwrap()),
            (0.0f64..4.0, 0.01f64..5.0).prop_map(|(g, d)| WeightModel::polynomial(g, d).unwrap()),
            (prop::collection::vec(-5.0f64..5.0, 1..12), 0.0f64..3.0)
                .prop_map(|(t, r)| WeightModel::custom(t, r, None).unwrap()),
        ]
    }

    fn nondecreasing_model() -> impl Strategy<Value = WeightModel> {
        prop_oneof![
            (1.0001f64..10.0).prop_map(|r| WeightModel::exponential(r).unwrap()),
            (0.0f64..4.0, 0.01f64..5.0).prop_map(|(g, d)| WeightModel::polynomial(g, d).unwrap()),
            (prop::collection::vec(0.0f64..2.0, 1..12), 0.0f64..3.0).prop_map(|(steps, r)| {
                let table: Vec<f64> = steps
                    .iter()
                    .scan(0.0, |acc, s| {
                        *acc += s;
                        Some(*acc)
                    })
                    .collect();
                WeightModel::custom(table, r, None).unwrap()
            }),
        ]
    }

    proptest! {
        #[test]
        fn two_color_complement(m in any_model(), a in 0u64..1_000_000_000, b in 0u64..1_000_000_000) {
            let s = m.pi_two_color(a, b) + m.pi_two_color(b, a);
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn softmax_normalised(m in any_model(), counts in prop::collection::vec(0u64..1_000_000_000, 2..7)) {
            let p = m.draw_probabilities(&counts);
            let s: f64 = p.iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
        }

        #[test]
        fn exponential_translation_invariant(r in 1.0001f64..10.0, a in 0u64..1_000_000, b in 0u64..1_000_000, t in 0u64..1_000_000_000) {
            let m = WeightModel::exponential(r).unwrap();
            prop_assert_eq!(m.pi_two_color(a, b), m.pi_two_color(a + t, b + t));
        }

        #[test]
        fn monotone_in_own_count(m in nondecreasing_model(), a in 0u64..100_000, b in 0u64..100_000) {
            prop_assert!(m.is_nondecreasing());
            prop_assert!(m.pi_two_color(a + 1, b) >= m.pi_two_color(a, b));
        }

        #[test]
        fn h1_table_dominates_lower_bound(
            rho_bound in 1.05f64..4.0,
            prefix in 0u64..6,
            head in prop::collection::vec(-2.0f64..2.0, 6),
            excess in prop::collection::vec(0.01f64..1.0, 6),
            tail_excess in 0.01f64..1.0,
            a_off in 1u64..200,
            b in 0u64..200,
        ) {
            let ln_bound = rho_bound.ln();
            let mut table = head[..prefix as usize].to_vec();
            let mut last = table.last().copied().unwrap_or(0.0);
            if table.is_empty() { table.push(last); }
            for e in &excess {
                last += ln_bound + e;
                table.push(last);
            }
            let cert = H1Certificate { prefix, rho_bound };
            let m = WeightModel::custom(table, ln_bound + tail_excess, Some(cert)).unwrap();
            let b = b + prefix;
            let a = b + a_off;
            let p = m.draw_probabilities(&[a, b]);
            prop_assert!(p[0] >= pi_lower_bound(rho_bound, a, b).unwrap());
        }
    }
}
