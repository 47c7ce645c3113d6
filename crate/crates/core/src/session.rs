//! One interactive exploration session: show a grid, take the user's likes,
//! retrain, propose the next grid.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::DesignId;
use crate::error::{Error, Result};
use crate::imaging::Modality;
use crate::metrics::{auc, log_loss};
use crate::preference::{
    probability, train_preference, PreferenceModel, ThompsonEnsemble, DEFAULT_INCLUSION,
    DEFAULT_MEMBERS,
};
use crate::proposer::{
    propose, propose_rand, ModelScorer, ProposalContext, ProposalRequest, Scorer, Strategy,
    StrategyMix, GRID_SIZE,
};
use crate::space::DesignSpace;

pub const TRANSCRIPT_SCHEMA_VERSION: u32 = 1;
pub const MODALITIES: [Modality; 2] = [Modality::Shape, Modality::Color];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub strategy: Strategy,
    pub seed: u64,
    pub grid_size: usize,
    pub mix: StrategyMix,
    pub ensemble_members: usize,
    pub inclusion_probability: f64,
    /// Designs never proposed in this session (e.g. a held-out test set).
    pub reserved: BTreeSet<DesignId>,
}

impl SessionConfig {
    pub fn new(strategy: Strategy, seed: u64) -> Self {
        Self {
            strategy,
            seed,
            grid_size: GRID_SIZE,
            mix: StrategyMix::default(),
            ensemble_members: DEFAULT_MEMBERS,
            inclusion_probability: DEFAULT_INCLUSION,
            reserved: BTreeSet::new(),
        }
    }

    pub fn with_reserved(mut self, reserved: impl IntoIterator<Item = DesignId>) -> Self {
        self.reserved = reserved.into_iter().collect();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Active,
    Ended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub proposed: Vec<DesignId>,
    pub selected: Vec<DesignId>,
    /// AUC of the pre-feedback model on this round's proposals.
    pub batch_auc: Option<f64>,
    pub log_loss: Option<f64>,
    pub num_selected: usize,
    /// Version of the model whose scores produced the metrics (0 = cold).
    pub model_version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub id: DesignId,
    pub liked: bool,
}

/// Everything needed to audit or replay a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub schema_version: u32,
    pub session_id: String,
    pub catalog_hash: String,
    pub config: SessionConfig,
    pub rounds: Vec<RoundRecord>,
    pub labels: Vec<Label>,
    /// Proposals outstanding when the session ended.
    pub final_proposals: Vec<DesignId>,
    pub model: Option<PreferenceModel>,
}

impl Transcript {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let t: Transcript = serde_json::from_str(json)?;
        if t.schema_version != TRANSCRIPT_SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "unsupported transcript schema version {}",
                t.schema_version
            )));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    config: SessionConfig,
    catalog_hash: String,
    round: u32,
    current: Vec<DesignId>,
    labeled: Vec<(DesignId, bool)>,
    label_index: HashMap<DesignId, bool>,
    model: Option<PreferenceModel>,
    model_version: u32,
    ensemble: ThompsonEnsemble,
    rng: ChaCha8Rng,
    history: Vec<RoundRecord>,
    status: SessionStatus,
    last_selected: Vec<DesignId>,
}

impl Session {
    /// Starts a session; the first grid is uniform random whatever the strategy.
    pub fn create(space: &DesignSpace, config: SessionConfig, id: impl Into<String>) -> Result<Self> {
        if config.grid_size == 0 {
            return Err(Error::Config("grid size must be positive".into()));
        }
        if config.strategy == Strategy::Everything && config.mix.total() != config.grid_size {
            return Err(Error::Config(format!(
                "strategy mix sums to {} but grid holds {}",
                config.mix.total(),
                config.grid_size
            )));
        }
        let ensemble = ThompsonEnsemble::new(config.ensemble_members, config.inclusion_probability)?;
        let pool: Vec<DesignId> = space
            .catalog()
            .ids()
            .filter(|id| !config.reserved.contains(id))
            .collect();
        if pool.len() < config.grid_size {
            return Err(Error::Config(format!(
                "catalog offers {} designs, fewer than one grid of {}",
                pool.len(),
                config.grid_size
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let empty = HashSet::new();
        let req = ProposalRequest {
            pool: &pool,
            n: config.grid_size,
            exclusions: &empty,
            last_selected: &[],
        };
        let current = propose_rand(&req, &mut rng);
        Ok(Self {
            id: id.into(),
            catalog_hash: space.catalog_hash().to_string(),
            config,
            round: 1,
            current,
            labeled: Vec::new(),
            label_index: HashMap::new(),
            model: None,
            model_version: 0,
            ensemble,
            rng,
            history: Vec::new(),
            status: SessionStatus::Active,
            last_selected: Vec::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn strategy(&self) -> Strategy {
        self.config.strategy
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn current_proposals(&self) -> &[DesignId] {
        &self.current
    }

    pub fn history(&self) -> &[RoundRecord] {
        &self.history
    }

    pub fn labeled(&self) -> &[(DesignId, bool)] {
        &self.labeled
    }

    pub fn label(&self, id: DesignId) -> Option<bool> {
        self.label_index.get(&id).copied()
    }

    pub fn model(&self) -> Option<&PreferenceModel> {
        self.model.as_ref()
    }

    pub fn model_version(&self) -> u32 {
        self.model_version
    }

    pub fn ensemble(&self) -> &ThompsonEnsemble {
        &self.ensemble
    }

    /// Labels the current grid (selected = liked, the rest = not liked),
    /// records metrics from the pre-update model, retrains, and proposes the
    /// next grid. State is only modified if every step succeeds.
    pub fn submit_feedback(&mut self, space: &DesignSpace, selected: &[DesignId]) -> Result<&[DesignId]> {
        if self.status == SessionStatus::Ended {
            return Err(Error::SessionEnded);
        }
        if space.catalog_hash() != self.catalog_hash {
            return Err(Error::Validation("session belongs to a different catalog".into()));
        }
        let mut chosen = HashSet::with_capacity(selected.len());
        for id in selected {
            if !self.current.contains(id) {
                return Err(Error::Validation(format!("design {id} is not in the current proposals")));
            }
            if !chosen.insert(*id) {
                return Err(Error::Validation(format!("design {id} selected twice")));
            }
        }
        let labels: Vec<bool> = self.current.iter().map(|id| chosen.contains(id)).collect();
        let newly: Vec<(DesignId, bool)> = self.current.iter().copied().zip(labels.iter().copied()).collect();

        let (batch_auc, batch_log_loss) = match &self.model {
            Some(model) => {
                let logits = self
                    .current
                    .iter()
                    .map(|&id| model.logit(space, id))
                    .collect::<Result<Vec<_>>>()?;
                let probs: Vec<f64> = logits.iter().map(|&s| probability(s)).collect();
                (auc(&logits, &labels), log_loss(&probs, &labels))
            }
            None => (None, None),
        };

        let mut labeled = self.labeled.clone();
        labeled.extend(newly.iter().copied());
        let (model, model_version) = match train_preference(&labeled, space, &MODALITIES) {
            Ok(m) => (Some(m), self.model_version + 1),
            Err(Error::ColdStart) => (None, self.model_version),
            Err(e) => return Err(e),
        };

        let mut rng = self.rng.clone();
        let mut ensemble = self.ensemble.clone();
        ensemble.update(&newly, space, &MODALITIES, &mut rng)?;

        let mut shown: HashSet<DesignId> = labeled.iter().map(|&(id, _)| id).collect();
        shown.extend(self.config.reserved.iter().copied());
        let pool: Vec<DesignId> = space.catalog().ids().filter(|id| !shown.contains(id)).collect();
        let last_selected: Vec<DesignId> = self.current.iter().copied().filter(|id| chosen.contains(id)).collect();
        let next = {
            let main = model.as_ref().map(|model| ModelScorer { model, lookup: space });
            let members: Vec<Option<ModelScorer<'_, DesignSpace>>> = ensemble
                .members
                .iter()
                .map(|m| m.model.as_ref().map(|model| ModelScorer { model, lookup: space }))
                .collect();
            let ctx = ProposalContext {
                model: main.as_ref().map(|s| s as &dyn Scorer),
                members: members.iter().map(|m| m.as_ref().map(|s| s as &dyn Scorer)).collect(),
                lookup: space,
                mix: self.config.mix,
            };
            let req = ProposalRequest {
                pool: &pool,
                n: self.config.grid_size,
                exclusions: &shown,
                last_selected: &last_selected,
            };
            propose(self.config.strategy, &req, &ctx, &mut rng)?
        };

        let record = RoundRecord {
            round: self.round,
            proposed: std::mem::take(&mut self.current),
            selected: last_selected.clone(),
            batch_auc,
            log_loss: batch_log_loss,
            num_selected: last_selected.len(),
            model_version: self.model_version,
        };
        for &(id, y) in &newly {
            self.label_index.insert(id, y);
        }
        self.labeled = labeled;
        self.model = model;
        self.model_version = model_version;
        self.ensemble = ensemble;
        self.rng = rng;
        self.history.push(record);
        self.current = next;
        self.last_selected = last_selected;
        self.round += 1;
        Ok(&self.current)
    }

    /// Ends the session. Ending twice returns the same transcript.
    pub fn end(&mut self) -> Transcript {
        self.status = SessionStatus::Ended;
        self.transcript()
    }

    pub fn transcript(&self) -> Transcript {
        Transcript {
            schema_version: TRANSCRIPT_SCHEMA_VERSION,
            session_id: self.id.clone(),
            catalog_hash: self.catalog_hash.clone(),
            config: self.config.clone(),
            rounds: self.history.clone(),
            labels: self
                .labeled
                .iter()
                .map(|&(id, liked)| Label { id, liked })
                .collect(),
            final_proposals: self.current.clone(),
            model: self.model.clone(),
        }
    }
}

fn same_metric(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => x.to_bits() == y.to_bits(),
        _ => false,
    }
}

/// Re-runs a transcript's selections through a fresh session and checks that
/// every proposal set and metric comes out bit-identical.
pub fn replay(space: &DesignSpace, transcript: &Transcript) -> Result<Session> {
    if transcript.catalog_hash != space.catalog_hash() {
        return Err(Error::Validation("transcript was recorded on a different catalog".into()));
    }
    let mut session = Session::create(space, transcript.config.clone(), transcript.session_id.clone())?;
    for record in &transcript.rounds {
        if session.current_proposals() != record.proposed.as_slice() {
            return Err(Error::Validation(format!("round {} proposals diverge", record.round)));
        }
        session.submit_feedback(space, &record.selected)?;
        let got = session.history().last().expect("round just recorded");
        if got.num_selected != record.num_selected
            || got.model_version != record.model_version
            || !same_metric(got.batch_auc, record.batch_auc)
            || !same_metric(got.log_loss, record.log_loss)
        {
            return Err(Error::Validation(format!("round {} metrics diverge", record.round)));
        }
    }
    if session.current_proposals() != transcript.final_proposals.as_slice() {
        return Err(Error::Validation("final proposals diverge".into()));
    }
    if session.model() != transcript.model.as_ref() {
        return Err(Error::Validation("final model diverges".into()));
    }
    Ok(session)
}
