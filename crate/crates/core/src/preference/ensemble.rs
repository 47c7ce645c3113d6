//! Bootstrap ensemble approximating a posterior over preference models.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{train_preference, PreferenceModel};
use crate::catalog::DesignId;
use crate::error::{Error, Result};
use crate::imaging::Modality;
use crate::space::EmbeddingLookup;

pub const DEFAULT_MEMBERS: usize = 5;
pub const DEFAULT_INCLUSION: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub dataset: Vec<(DesignId, bool)>,
    /// `None` until the dataset holds both classes.
    pub model: Option<PreferenceModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThompsonEnsemble {
    pub p: f64,
    pub members: Vec<EnsembleMember>,
}

impl Default for ThompsonEnsemble {
    fn default() -> Self {
        Self::new(DEFAULT_MEMBERS, DEFAULT_INCLUSION).expect("valid defaults")
    }
}

impl ThompsonEnsemble {
    pub fn new(k: usize, p: f64) -> Result<Self> {
        if k == 0 || !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("ensemble needs k >= 1 and p in [0,1], got k={k}, p={p}")));
        }
        Ok(Self {
            p,
            members: vec![
                EnsembleMember {
                    dataset: Vec::new(),
                    model: None,
                };
                k
            ],
        })
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn any_trained(&self) -> bool {
        self.members.iter().any(|m| m.model.is_some())
    }

    /// Adds each newly labeled design to each member independently with
    /// probability `p`, then retrains every member whose data changed and now
    /// holds both classes.
    pub fn update<L, R>(
        &mut self,
        newly_labeled: &[(DesignId, bool)],
        lookup: &L,
        modalities: &[Modality],
        rng: &mut R,
    ) -> Result<()>
    where
        L: EmbeddingLookup + Sync + ?Sized,
        R: Rng + ?Sized,
    {
        let mut changed = vec![false; self.members.len()];
        for (member, flag) in self.members.iter_mut().zip(changed.iter_mut()) {
            for &item in newly_labeled {
                if rng.random_bool(self.p) {
                    member.dataset.push(item);
                    *flag = true;
                }
            }
        }
        self.members
            .par_iter_mut()
            .zip(changed)
            .try_for_each(|(member, changed)| {
                if !changed {
                    return Ok(());
                }
                match train_preference(&member.dataset, lookup, modalities) {
                    Ok(model) => {
                        member.model = Some(model);
                        Ok(())
                    }
                    Err(Error::ColdStart) => Ok(()),
                    Err(e) => Err(e),
                }
            })
    }
}
