//! Threshold calibration and the simulated user's per-run labels.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::concept::{Concept, Direction, PrevalenceTarget};
use crate::catalog::{Catalog, DesignId};
use crate::error::{Error, Result};
use crate::preference::sigmoid;

pub const SIGMOID_SLOPE: f64 = 8.0;
/// Allowed gap between the calibrated and target always-positive rate.
pub const ALWAYS_TOLERANCE: f64 = 0.001;
/// Allowed gap between the calibrated expected prevalence and its target.
pub const AVERAGE_TOLERANCE: f64 = 0.0005;

pub(crate) const LABEL_STREAM: u64 = 1;

/// A concept with its two thresholds, both in raw score units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConceptTask {
    pub concept: Concept,
    pub direction: Direction,
    /// Scores at or beyond this are always positive.
    pub theta_hard: f64,
    /// Scores at or short of this are always negative.
    pub theta_soft: f64,
    pub sigmoid_slope: f64,
}

impl ConceptTask {
    /// Probability that a design with this raw score is labeled positive.
    pub fn probability(&self, score: f64) -> f64 {
        let t = self.direction.adjust(score);
        let hard = self.direction.adjust(self.theta_hard);
        let soft = self.direction.adjust(self.theta_soft);
        if t >= hard {
            1.0
        } else if t <= soft {
            0.0
        } else {
            let u = ((t - soft) / (hard - soft)).clamp(0.0, 1.0);
            sigmoid(self.sigmoid_slope * (u - 0.5))
        }
    }

    pub fn is_always_positive(&self, score: f64) -> bool {
        self.direction.adjust(score) >= self.direction.adjust(self.theta_hard)
    }

    pub fn always_rate(&self, scores: &[f64]) -> f64 {
        scores.iter().filter(|&&s| self.is_always_positive(s)).count() as f64 / scores.len() as f64
    }

    pub fn expected_prevalence(&self, scores: &[f64]) -> f64 {
        scores.iter().map(|&s| self.probability(s)).sum::<f64>() / scores.len() as f64
    }
}

/// A calibrated task together with the catalog scores it was fitted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedTask {
    pub task: ConceptTask,
    /// Raw concept scores in catalog order.
    pub scores: Vec<f64>,
}

impl CalibratedTask {
    pub fn new(catalog: &Catalog, concept: Concept) -> Result<Self> {
        let scores = concept.score_catalog(catalog)?;
        let task = calibrate_thresholds(concept, &scores)?;
        Ok(Self { task, scores })
    }
}

/// Fits both thresholds to the concept's published prevalence targets.
pub fn calibrate_thresholds(concept: Concept, scores: &[f64]) -> Result<ConceptTask> {
    calibrate_with_target(concept, scores, concept.target())
}

pub fn calibrate_with_target(concept: Concept, scores: &[f64], target: PrevalenceTarget) -> Result<ConceptTask> {
    let fail = |reason: String| Error::Calibration {
        task: concept.name().to_string(),
        reason,
    };
    if scores.is_empty() {
        return Err(fail("no designs to calibrate on".into()));
    }
    if !(0.0 < target.always && target.always < target.average && target.average < 1.0) {
        return Err(fail(format!("targets {target:?} are not 0 < always < average < 1")));
    }
    let direction = concept.direction();
    let mut t: Vec<f64> = scores.iter().map(|&s| direction.adjust(s)).collect();
    if t.iter().any(|v| !v.is_finite()) {
        return Err(fail("non-finite score".into()));
    }
    t.sort_by(|a, b| b.total_cmp(a));
    if t[0] == t[t.len() - 1] {
        return Err(fail("scores have zero variance".into()));
    }
    let n = t.len() as f64;

    // Among distinct values, the hard threshold whose always-count is
    // closest to the target.
    let want = target.always * n;
    let mut best: Option<(f64, usize)> = None;
    let mut i = 0;
    while i < t.len() {
        let mut j = i + 1;
        while j < t.len() && t[j] == t[i] {
            j += 1;
        }
        let better = match best {
            None => true,
            Some((_, c)) => (j as f64 - want).abs() < (c as f64 - want).abs(),
        };
        if better {
            best = Some((t[i], j));
        }
        if j as f64 > want {
            break;
        }
        i = j;
    }
    let (hard, always_count) = best.expect("nonempty");
    if always_count == t.len() {
        return Err(fail("every design would be always positive".into()));
    }
    let rate = always_count as f64 / n;
    if (rate - target.always).abs() > ALWAYS_TOLERANCE {
        return Err(fail(format!(
            "always-positive rate {rate:.4} cannot reach {:.4} (tied scores)",
            target.always
        )));
    }

    let expected = |soft: f64| -> f64 {
        t.iter()
            .map(|&v| {
                if v >= hard {
                    1.0
                } else if v <= soft {
                    0.0
                } else {
                    sigmoid(SIGMOID_SLOPE * ((v - soft) / (hard - soft) - 0.5))
                }
            })
            .sum::<f64>()
            / n
    };
    let min = t[t.len() - 1];
    let mut span = (hard - min).max(f64::MIN_POSITIVE);
    let mut lo = min - span;
    while expected(lo) < target.average {
        span *= 2.0;
        lo = min - span;
        if !lo.is_finite() || span > 1e12 {
            return Err(fail(format!("expected prevalence cannot reach {:.4}", target.average)));
        }
    }
    // Expected prevalence falls as the soft threshold rises toward the hard one.
    let mut hi = hard;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if expected(mid) >= target.average {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let soft = lo;
    let got = expected(soft);
    if (got - target.average).abs() > AVERAGE_TOLERANCE {
        return Err(fail(format!(
            "expected prevalence {got:.4} cannot reach {:.4}",
            target.average
        )));
    }
    if !t.iter().any(|&v| v > soft && v < hard) {
        return Err(fail("borderline band is empty".into()));
    }
    Ok(ConceptTask {
        concept,
        direction,
        theta_hard: direction.adjust(hard),
        theta_soft: direction.adjust(soft),
        sigmoid_slope: SIGMOID_SLOPE,
    })
}

/// One run's fixed ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLabels {
    pub run_seed: u64,
    pub positives: BTreeSet<DesignId>,
}

impl RunLabels {
    pub fn label(&self, id: DesignId) -> bool {
        self.positives.contains(&id)
    }
}

/// Draws every design's label once: deterministic outside the band,
/// Bernoulli inside it.
pub fn assign_labels(task: &ConceptTask, scores: &[f64], catalog: &Catalog, run_seed: u64) -> RunLabels {
    assert_eq!(scores.len(), catalog.len(), "one score per catalog design");
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    rng.set_stream(LABEL_STREAM);
    let mut positives = BTreeSet::new();
    for (id, &s) in catalog.ids().zip(scores) {
        let p = task.probability(s);
        let positive = if p >= 1.0 {
            true
        } else if p <= 0.0 {
            false
        } else {
            rng.random::<f64>() < p
        };
        if positive {
            positives.insert(id);
        }
    }
    RunLabels { run_seed, positives }
}

/// The simulated user selects exactly the positive proposals.
pub fn simulated_select(labels: &RunLabels, proposed: &[DesignId]) -> Vec<DesignId> {
    proposed.iter().copied().filter(|&id| labels.label(id)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(direction: Direction, hard: f64, soft: f64) -> ConceptTask {
        ConceptTask {
            concept: Concept::Red,
            direction,
            theta_hard: hard,
            theta_soft: soft,
            sigmoid_slope: SIGMOID_SLOPE,
        }
    }

    #[test]
    fn probability_rules() {
        let t = task(Direction::Above, 0.8, 0.4);
        assert_eq!(t.probability(0.8), 1.0);
        assert_eq!(t.probability(0.9), 1.0);
        assert_eq!(t.probability(0.4), 0.0);
        assert_eq!(t.probability(0.1), 0.0);
        assert!((t.probability(0.6) - 0.5).abs() < 1e-12);
        assert!(t.probability(0.7) > t.probability(0.5));

        let thin = task(Direction::Below, 0.2, 0.5);
        assert_eq!(thin.probability(0.1), 1.0);
        assert_eq!(thin.probability(0.6), 0.0);
        assert!((thin.probability(0.35) - 0.5).abs() < 1e-12);
        assert!(thin.probability(0.25) > thin.probability(0.45));
    }

    #[test]
    fn band_endpoints_match_slope() {
        let t = task(Direction::Above, 1.0, 0.0);
        assert!((t.probability(1e-12) - 1.0 / (1.0 + 4f64.exp())).abs() < 1e-9);
        assert!((t.probability(1.0 - 1e-12) - 1.0 / (1.0 + (-4f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn calibration_hits_targets() {
        let scores: Vec<f64> = (0..10_000).map(|i| f64::from(i) / 10_000.0).collect();
        let target = PrevalenceTarget {
            always: 0.05,
            average: 0.09,
        };
        let t = calibrate_with_target(Concept::Red, &scores, target).unwrap();
        assert!((t.always_rate(&scores) - 0.05).abs() < 1e-9);
        assert!((t.expected_prevalence(&scores) - 0.09).abs() < AVERAGE_TOLERANCE);
        assert!(t.theta_soft < t.theta_hard);

        let thin = calibrate_with_target(Concept::Thin, &scores, target).unwrap();
        assert!(thin.theta_soft > thin.theta_hard);
        assert!((thin.always_rate(&scores) - 0.05).abs() < 1e-9);
    }

    #[test]
    fn zero_variance_is_an_error() {
        let err = calibrate_thresholds(Concept::Blue, &[0.3; 100]).unwrap_err();
        match err {
            Error::Calibration { task, .. } => assert_eq!(task, "blue"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn heavy_ties_are_reported() {
        let mut scores = vec![0.0; 900];
        scores.extend(vec![1.0; 100]);
        assert!(calibrate_with_target(
            Concept::Red,
            &scores,
            PrevalenceTarget {
                always: 0.05,
                average: 0.09
            }
        )
        .is_err());
    }
}
