use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::kernel::kernel_width;
use super::logistic::{fit_logistic, sigmoid, LogisticModel, L2_PENALTY};
use super::svm::{train_svm, SvmModel, DEFAULT_C};
use crate::catalog::DesignId;
use crate::error::{Error, Result};
use crate::imaging::Modality;
use crate::space::EmbeddingLookup;

/// Per-modality RBF classifiers stacked by a logistic combiner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceModel {
    pub per_modality: BTreeMap<Modality, SvmModel>,
    /// One weight per modality in `per_modality` key order, plus intercept.
    pub combiner: LogisticModel,
    pub trained_on: usize,
}

impl PreferenceModel {
    pub fn modalities(&self) -> impl Iterator<Item = Modality> + '_ {
        self.per_modality.keys().copied()
    }

    /// Per-modality SVM decision values, in modality order.
    pub fn decision_values(
        &self,
        embedding: impl Fn(Modality) -> Option<Vec<f64>>,
    ) -> Result<Vec<f64>> {
        self.per_modality
            .iter()
            .map(|(&m, svm)| {
                embedding(m)
                    .map(|v| svm.decision(&v))
                    .ok_or_else(|| Error::MissingModality(m.name().into()))
            })
            .collect()
    }

    /// Log-odds of a like for a design available through `lookup`.
    pub fn logit<L: EmbeddingLookup + ?Sized>(&self, lookup: &L, id: DesignId) -> Result<f64> {
        let mut z = Vec::with_capacity(self.per_modality.len());
        for (&m, svm) in &self.per_modality {
            let v = lookup
                .embedding(id, m)
                .ok_or_else(|| Error::MissingModality(m.name().into()))?;
            z.push(svm.decision(v));
        }
        Ok(self.combiner.score(&z))
    }

    /// Like-probability for a design, kept inside the open interval (0, 1).
    pub fn predict<L: EmbeddingLookup + ?Sized>(&self, lookup: &L, id: DesignId) -> Result<f64> {
        self.logit(lookup, id).map(probability)
    }

    /// Like-probability from explicit per-modality embeddings.
    pub fn predict_embeddings(&self, embeddings: &BTreeMap<Modality, Vec<f64>>) -> Result<f64> {
        let z = self.decision_values(|m| embeddings.get(&m).cloned())?;
        Ok(probability(self.combiner.score(&z)))
    }
}

/// Logistic link clamped to the open unit interval.
pub fn probability(logit: f64) -> f64 {
    const TOP: f64 = 1.0 - f64::EPSILON / 2.0;
    sigmoid(logit).clamp(f64::MIN_POSITIVE, TOP)
}

/// Full retrain on `labeled`: per modality, kernel width from the labeled
/// vectors and an SVM with `C = 100`; then a logistic combiner over the raw
/// decision values.
pub fn train_preference<L: EmbeddingLookup + ?Sized>(
    labeled: &[(DesignId, bool)],
    lookup: &L,
    modalities: &[Modality],
) -> Result<PreferenceModel> {
    let ys: Vec<bool> = labeled.iter().map(|&(_, y)| y).collect();
    if !(ys.iter().any(|&y| y) && ys.iter().any(|&y| !y)) {
        return Err(Error::ColdStart);
    }
    let mut per_modality = BTreeMap::new();
    for &m in modalities {
        let xs: Vec<&[f64]> = labeled
            .iter()
            .map(|&(id, _)| {
                lookup
                    .embedding(id, m)
                    .ok_or_else(|| Error::MissingModality(m.name().into()))
            })
            .collect::<Result<_>>()?;
        let sigma2 = kernel_width(&xs)?;
        per_modality.insert(m, train_svm(&xs, &ys, DEFAULT_C, sigma2)?);
    }
    let features: Vec<Vec<f64>> = labeled
        .iter()
        .map(|&(id, _)| {
            per_modality
                .iter()
                .map(|(&m, svm)| svm.decision(lookup.embedding(id, m).expect("checked above")))
                .collect()
        })
        .collect();
    let combiner = fit_logistic(&features, &ys, L2_PENALTY)?;
    Ok(PreferenceModel {
        per_modality,
        combiner,
        trained_on: labeled.len(),
    })
}
