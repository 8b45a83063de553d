// SPDX-License-Identifier: Apache-2.0
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bench::BenchSpec;
use crate::detector::DetectorConfig;
use crate::timing::{AgingParams, AgingState, BaseDelayLib, VariationSpec};
use crate::trojan::TrojanSpec;

use super::ExperimentError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternConfig {
    /// Seeded random vectors added after the structured ones.
    pub n_random: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub bench: BenchSpec,
    #[serde(default)]
    pub trojans: Vec<TrojanSpec>,
    #[serde(default)]
    pub aging: AgingParams,
    #[serde(default)]
    pub lib: BaseDelayLib,
    /// Aging grid as duty percentages.
    #[serde(default = "default_duties")]
    pub duties: Vec<u32>,
    /// Clock periods as fractions of the clean, unaged critical path.
    #[serde(default = "default_fractions")]
    pub clock_fractions: Vec<f64>,
    pub patterns: PatternConfig,
    #[serde(default = "half")]
    pub train_fraction: f64,
    #[serde(default)]
    pub split_seed: Option<u64>,
    /// Simulated ICs under test. Empty means the nominal instance only.
    #[serde(default)]
    pub test_instances: Vec<VariationSpec>,
    pub k: usize,
    #[serde(rename = "B")]
    pub batch: usize,
    #[serde(default)]
    pub detector: DetectorConfig,
    pub seed: u64,
    #[serde(default)]
    pub train_seed: Option<u64>,
    /// Persist per-cell output grids (large for big pattern sets).
    #[serde(default = "yes")]
    pub keep_grids: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_duties() -> Vec<u32> {
    AgingState::grid().into_iter().map(AgingState::duty).collect()
}

pub fn default_fractions() -> Vec<f64> {
    (0..20).map(|i| 0.50 + 0.45 * i as f64 / 19.0).collect()
}

fn half() -> f64 {
    0.5
}

fn yes() -> bool {
    true
}

fn derive(seed: u64, tag: u64) -> u64 {
    let mut x = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.duties.is_empty() || self.clock_fractions.is_empty() {
            return bad("duty grid and clock sweep must be non-empty".into());
        }
        for &d in &self.duties {
            AgingState::new(d).map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        if self.duties.windows(2).any(|w| w[0] >= w[1]) {
            return bad("duties must be strictly increasing".into());
        }
        if self.clock_fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
            return bad("clock fractions must lie in (0, 1]".into());
        }
        if self.clock_fractions.windows(2).any(|w| w[0] >= w[1]) {
            return bad("clock fractions must be strictly increasing".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction {} not in (0, 1)", self.train_fraction));
        }
        if self.k == 0 || self.batch == 0 {
            return bad("k and B must be positive".into());
        }
        for v in &self.test_instances {
            v.check().map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        let w = self.bench.width_in();
        for t in &self.trojans {
            t.check(w).map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        self.aging.check().map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.lib.check().map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.detector.check().map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(())
    }

    /// Fills every unset seed from the master seed.
    pub fn resolved(mut self) -> Self {
        self.patterns.seed.get_or_insert(derive(self.seed, 1));
        self.split_seed.get_or_insert(derive(self.seed, 2));
        self.train_seed.get_or_insert(derive(self.seed, 3));
        self
    }

    pub fn pattern_seed(&self) -> u64 {
        self.patterns.seed.unwrap_or_else(|| derive(self.seed, 1))
    }

    pub fn split_seed(&self) -> u64 {
        self.split_seed.unwrap_or_else(|| derive(self.seed, 2))
    }

    pub fn train_seed(&self) -> u64 {
        self.train_seed.unwrap_or_else(|| derive(self.seed, 3))
    }

    pub fn aging_states(&self) -> Vec<AgingState> {
        self.duties.iter().map(|&d| AgingState::new(d).expect("checked")).collect()
    }

    /// Aging grid pinned to the fresh state.
    pub fn overclock_only(mut self) -> Self {
        self.duties = vec![0];
        self
    }

    /// Clock pinned at the nominal critical path, full aging grid.
    pub fn aging_only(mut self) -> Self {
        self.clock_fractions = vec![1.0];
        self.duties = default_duties();
        self
    }

    /// Names of the ICs under test.
    pub fn instance_names(&self) -> Vec<String> {
        if self.test_instances.is_empty() {
            vec!["golden".into()]
        } else {
            (1..=self.test_instances.len()).map(|i| format!("ic{i}")).collect()
        }
    }

    pub fn instance_variation(&self, name: &str) -> Option<&VariationSpec> {
        let i: usize = name.strip_prefix("ic")?.parse().ok()?;
        self.test_instances.get(i.checked_sub(1)?)
    }

    pub fn netlist_names(&self) -> Vec<String> {
        std::iter::once("clean".to_string()).chain((0..self.trojans.len()).map(|i| format!("trojan{i}"))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        serde_json::from_value(serde_json::json!({
            "name": "t",
            "bench": {"kind": "MULT_SHIFT_ADD", "width": 4},
            "patterns": {"n_random": 10},
            "k": 1, "B": 1, "seed": 7
        }))
        .unwrap()
    }

    #[test]
    fn defaults() {
        let c = base();
        assert_eq!(c.duties.len(), 11);
        assert_eq!(c.clock_fractions.len(), 20);
        assert!((c.clock_fractions[0] - 0.5).abs() < 1e-15 && (c.clock_fractions[19] - 0.95).abs() < 1e-12);
        assert_eq!(c.train_fraction, 0.5);
        c.check().unwrap();
        assert_eq!(c.instance_names(), vec!["golden"]);
    }

    #[test]
    fn seeds_resolve_stably() {
        let c = base().resolved();
        assert_eq!(c.pattern_seed(), base().pattern_seed());
        assert_ne!(c.pattern_seed(), c.split_seed());
        let again = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_bad_sweeps() {
        let mut c = base();
        c.clock_fractions = vec![0.5, 1.2];
        assert!(c.check().is_err());
        let mut c = base();
        c.duties = vec![10, 5];
        assert!(c.check().is_err());
        let mut c = base();
        c.train_fraction = 1.0;
        assert!(c.check().is_err());
        assert!(ExperimentConfig::from_json(r#"{"name":"x"}"#).is_err());
    }

    #[test]
    fn presets() {
        let c = base().overclock_only();
        assert_eq!(c.duties, vec![0]);
        let c = base().aging_only();
        assert_eq!(c.clock_fractions, vec![1.0]);
        assert_eq!(c.duties.len(), 11);
    }
}
