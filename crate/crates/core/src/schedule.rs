//! Alternation of challenger and solver steps.
//!
//! Each cycle runs `challenger_steps` challenger updates followed by
//! `solver_steps` solver updates. Global steps are numbered from 1.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Challenger,
    Solver,
}

/// Where a global step falls in the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    /// Zero-based cycle index.
    pub cycle: u64,
    pub phase: Phase,
    /// Zero-based index of the step within its phase block.
    pub index_in_phase: u64,
}

impl Slot {
    /// First solver step of a cycle, where the training questions refresh.
    pub fn is_refresh(&self) -> bool {
        self.phase == Phase::Solver && self.index_in_phase == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub challenger_steps: u64,
    pub solver_steps: u64,
}

impl Schedule {
    pub fn cycle_len(&self) -> u64 {
        self.challenger_steps + self.solver_steps
    }

    pub fn total_steps(&self, cycles: u64) -> u64 {
        cycles * self.cycle_len()
    }

    /// Slot of global step `step` (1-based). Panics on step 0 or an empty
    /// cycle.
    pub fn slot(&self, step: u64) -> Slot {
        assert!(
            step >= 1 && self.cycle_len() > 0,
            "steps are 1-based and cycles non-empty"
        );
        let offset = (step - 1) % self.cycle_len();
        let cycle = (step - 1) / self.cycle_len();
        if offset < self.challenger_steps {
            Slot {
                cycle,
                phase: Phase::Challenger,
                index_in_phase: offset,
            }
        } else {
            Slot {
                cycle,
                phase: Phase::Solver,
                index_in_phase: offset - self.challenger_steps,
            }
        }
    }

    pub fn phases(&self, cycles: u64) -> impl Iterator<Item = Phase> + '_ {
        (1..=self.total_steps(cycles)).map(|s| self.slot(s).phase)
    }
}
