use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::job_rng;

/// Participant-level fold assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: BTreeMap<String, usize>,
}

impl FoldPlan {
    /// Test participants of fold `f`, sorted.
    pub fn test_ids(&self, f: usize) -> Vec<&str> {
        self.assignments
            .iter()
            .filter(|(_, &g)| g == f)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn train_ids(&self, f: usize) -> Vec<&str> {
        self.assignments
            .iter()
            .filter(|(_, &g)| g != f)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignments.get(id).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignments.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffles the sorted ids under `seed`, then deals them round-robin.
pub fn participant_kfold<S: AsRef<str>>(ids: &[S], k: usize, seed: u64) -> Result<FoldPlan> {
    let mut sorted: Vec<String> = ids.iter().map(|s| s.as_ref().to_string()).collect();
    sorted.sort();
    sorted.dedup();
    if k < 2 || sorted.len() < k {
        return Err(Error::TooFewParticipants {
            needed: k.max(2),
            have: sorted.len(),
        });
    }
    sorted.shuffle(&mut job_rng(seed, "folds"));
    let assignments = sorted
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, i % k))
        .collect();
    Ok(FoldPlan {
        k,
        seed,
        assignments,
    })
}
