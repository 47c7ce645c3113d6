//! Proposal strategies that fill each round's candidate grid.

mod strategies;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::DesignId;
use crate::error::{Error, Result};

pub use strategies::{
    propose, propose_everything, propose_exploit, propose_nn, propose_rand,
    propose_rand_rejection, propose_thompson, ModelScorer, ProposalContext, Scorer,
    EXPLOIT_POOL_SIZE, NN_NEIGHBORHOOD, REJECTION_ATTEMPTS_PER_SLOT, THOMPSON_RETRIES,
    THOMPSON_SAMPLE_SIZE,
};

/// Proposals per round, shown as a 3×6 grid.
pub const GRID_SIZE: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Rand,
    RandReject,
    Exploit,
    Thompson,
    Nn,
    Everything,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Rand,
        Strategy::RandReject,
        Strategy::Exploit,
        Strategy::Thompson,
        Strategy::Nn,
        Strategy::Everything,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Rand => "rand",
            Strategy::RandReject => "rand_reject",
            Strategy::Exploit => "exploit",
            Strategy::Thompson => "thompson",
            Strategy::Nn => "nn",
            Strategy::Everything => "everything",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

/// How many proposals each method contributes to an `everything` round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyMix {
    /// Filled by rejection sampling against the preference model.
    pub rand: usize,
    pub exploit: usize,
    pub thompson: usize,
    pub nn: usize,
}

impl Default for StrategyMix {
    fn default() -> Self {
        Self {
            rand: 4,
            exploit: 1,
            thompson: 9,
            nn: 4,
        }
    }
}

impl StrategyMix {
    pub fn total(&self) -> usize {
        self.rand + self.exploit + self.thompson + self.nn
    }
}

/// Inputs shared by every strategy for one round.
#[derive(Debug, Clone, Copy)]
pub struct ProposalRequest<'a> {
    /// Candidate ids, already stripped of exclusions.
    pub pool: &'a [DesignId],
    pub n: usize,
    /// Designs shown earlier in the session; never proposed again.
    pub exclusions: &'a HashSet<DesignId>,
    /// Designs the user liked in the previous round.
    pub last_selected: &'a [DesignId],
}

impl ProposalRequest<'_> {
    pub(crate) fn check(&self) -> Result<()> {
        if let Some(id) = self.pool.iter().find(|id| self.exclusions.contains(id)) {
            return Err(Error::Validation(format!("pool contains excluded design {id}")));
        }
        Ok(())
    }
}
