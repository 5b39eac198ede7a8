use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarvestError;
use crate::fsutil;
use crate::geo::TileId;

/// Resumable harvest state. Written atomically after every unit of work.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HarvestCheckpoint {
    pub completed_tile_ids: BTreeSet<String>,
    pub failed_tile_ids: BTreeMap<String, u32>,
    pub completed_sequence_ids: BTreeSet<String>,
    /// Sequence id → attempts made before giving up.
    pub failed_sequence_ids: BTreeMap<String, u32>,
    /// Recent tile-endpoint request times (ms), for the rolling budget.
    pub tile_requests: Vec<u64>,
    /// Recent image-endpoint request times (ms).
    pub image_requests: Vec<u64>,
}

pub fn tile_key(t: TileId) -> String {
    t.to_string()
}

impl HarvestCheckpoint {
    /// Loads `path`, or returns a fresh checkpoint when the file is absent.
    pub fn load_or_default(path: &Path) -> Result<Self, HarvestError> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let bytes = std::fs::read(path).map_err(|e| HarvestError::Io(path.display().to_string(), e))?;
        let cp: Self = serde_json::from_slice(&bytes).map_err(|e| HarvestError::Checkpoint(format!("{}: {e}", path.display())))?;
        cp.validate()?;
        Ok(cp)
    }

    pub fn save(&self, path: &Path) -> Result<(), HarvestError> {
        self.validate()?;
        let bytes = serde_json::to_vec_pretty(self).expect("checkpoint serializes");
        fsutil::write_atomic_bytes(path, &bytes).map_err(|e| HarvestError::Io(path.display().to_string(), e))
    }

    pub fn validate(&self) -> Result<(), HarvestError> {
        if let Some(t) = self.failed_tile_ids.keys().find(|t| self.completed_tile_ids.contains(*t)) {
            return Err(HarvestError::Checkpoint(format!("tile {t} is both completed and failed")));
        }
        if let Some(s) = self.failed_sequence_ids.keys().find(|s| self.completed_sequence_ids.contains(*s)) {
            return Err(HarvestError::Checkpoint(format!("sequence {s} is both completed and failed")));
        }
        Ok(())
    }

    /// Requests still available in the current window.
    pub fn request_budget(&self, budget: super::Budget, now: u64, tiles: bool) -> usize {
        let log = if tiles { &self.tile_requests } else { &self.image_requests };
        super::SlidingWindowLimiter::with_history(budget, log).remaining(now)
    }
}
