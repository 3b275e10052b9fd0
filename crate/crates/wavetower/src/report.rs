//! Structured scenario reports and report diffing.
//!
//! Reports are fully deterministic: field order is fixed, maps are sorted,
//! floats serialize at full round-trip precision, and no wall-clock data is
//! embedded (timestamps live in the run manifest, which is not diffed).

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub fn tool_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

/// One branch of the slice ledger, flattened for the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    /// Stable aggregation key, e.g. `site#0` or `offset=D/site=S2`.
    pub key: String,
    pub site: Option<String>,
    pub weight: f64,
    pub time: f64,
    pub phase: f64,
    pub photon_count: u32,
    pub parent: Option<u32>,
    pub id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Audits {
    pub max_norm_drift: f64,
    pub max_energy_drift: f64,
    pub residual_norm: f64,
    pub boundary_norm: f64,
    pub total_norm: f64,
    pub captures_seen: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub warnings: Vec<String>,
    pub branches: Vec<BranchRow>,
    pub audits: Audits,
    /// Scenario-specific numbers and curves; sorted keys.
    pub metrics: BTreeMap<String, serde_json::Value>,
}

impl ScenarioReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn metric_f64(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).and_then(|v| v.as_f64())
    }

    pub fn metric_array(&self, key: &str) -> Option<Vec<f64>> {
        self.metrics
            .get(key)
            .and_then(|v| v.as_array())
            .map(|a| a.iter().filter_map(|x| x.as_f64()).collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchDelta {
    pub key: String,
    pub d_weight: f64,
    pub d_time: f64,
    pub d_phase: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportDiff {
    pub branch_deltas: Vec<BranchDelta>,
    /// Keys present only in the first / only in the second report.
    pub only_in_a: Vec<String>,
    pub only_in_b: Vec<String>,
    pub max_abs_delta: f64,
}

impl ReportDiff {
    pub fn is_empty(&self) -> bool {
        self.only_in_a.is_empty()
            && self.only_in_b.is_empty()
            && self.branch_deltas.iter().all(|d| {
                d.d_weight == 0.0 && d.d_time == 0.0 && d.d_phase == 0.0
            })
    }
}

/// Per-branch weight/time/phase deltas keyed by branch key, with a
/// max-abs summary. Reports from different schema versions do not diff.
pub fn diff_reports(a: &ScenarioReport, b: &ScenarioReport) -> Result<ReportDiff> {
    if a.schema_version != b.schema_version {
        return Err(Error::SchemaMismatch(a.schema_version, b.schema_version));
    }
    let index = |r: &ScenarioReport| -> BTreeMap<String, BranchRow> {
        r.branches.iter().map(|x| (x.key.clone(), x.clone())).collect()
    };
    let ia = index(a);
    let ib = index(b);
    let mut deltas = Vec::new();
    let mut max_abs: f64 = 0.0;
    let mut only_a = Vec::new();
    for (key, ra) in &ia {
        match ib.get(key) {
            Some(rb) => {
                let d = BranchDelta {
                    key: key.clone(),
                    d_weight: rb.weight - ra.weight,
                    d_time: rb.time - ra.time,
                    d_phase: rb.phase - ra.phase,
                };
                max_abs = max_abs
                    .max(d.d_weight.abs())
                    .max(d.d_time.abs())
                    .max(d.d_phase.abs());
                deltas.push(d);
            }
            None => {
                only_a.push(key.clone());
                max_abs = f64::INFINITY;
            }
        }
    }
    let only_b: Vec<String> = ib
        .keys()
        .filter(|k| !ia.contains_key(*k))
        .cloned()
        .collect();
    if !only_b.is_empty() {
        max_abs = f64::INFINITY;
    }
    Ok(ReportDiff {
        branch_deltas: deltas,
        only_in_a: only_a,
        only_in_b: only_b,
        max_abs_delta: max_abs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(weights: &[(&str, f64)]) -> ScenarioReport {
        ScenarioReport {
            schema_version: SCHEMA_VERSION,
            tool_version: tool_version(),
            scenario: "test".into(),
            config_hash: "deadbeef".into(),
            seed: 1,
            warnings: Vec::new(),
            branches: weights
                .iter()
                .enumerate()
                .map(|(i, (k, w))| BranchRow {
                    key: k.to_string(),
                    site: None,
                    weight: *w,
                    time: 0.0,
                    phase: 0.0,
                    photon_count: 1,
                    parent: None,
                    id: i as u32,
                })
                .collect(),
            audits: Audits {
                max_norm_drift: 0.0,
                max_energy_drift: 0.0,
                residual_norm: 0.0,
                boundary_norm: 0.0,
                total_norm: 1.0,
                captures_seen: true,
            },
            metrics: BTreeMap::new(),
        }
    }

    #[test]
    fn report_diffed_with_itself_is_empty() {
        let r = report(&[("a", 0.5), ("b", 0.5)]);
        let d = diff_reports(&r, &r).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.max_abs_delta, 0.0);
    }

    #[test]
    fn weight_changes_show_up_with_max_abs() {
        let a = report(&[("a", 0.5), ("b", 0.5)]);
        let b = report(&[("a", 0.25), ("b", 0.75)]);
        let d = diff_reports(&a, &b).unwrap();
        assert!(!d.is_empty());
        assert!((d.max_abs_delta - 0.25).abs() < 1e-15);
    }

    #[test]
    fn missing_keys_are_reported() {
        let a = report(&[("a", 1.0)]);
        let b = report(&[("b", 1.0)]);
        let d = diff_reports(&a, &b).unwrap();
        assert_eq!(d.only_in_a, vec!["a".to_string()]);
        assert_eq!(d.only_in_b, vec!["b".to_string()]);
        assert!(d.max_abs_delta.is_infinite());
    }

    #[test]
    fn schema_mismatch_refuses_to_diff() {
        let a = report(&[("a", 1.0)]);
        let mut b = report(&[("a", 1.0)]);
        b.schema_version = 999;
        assert!(matches!(
            diff_reports(&a, &b),
            Err(Error::SchemaMismatch(_, _))
        ));
    }

    #[test]
    fn json_round_trip_preserves_report() {
        let mut r = report(&[("a", 0.123456789012345678), ("b", 1.0 / 3.0)]);
        r.metrics
            .insert("x".into(), serde_json::json!([0.1, 0.2, 0.3]));
        let text = r.to_json().unwrap();
        let back = ScenarioReport::from_json(&text).unwrap();
        assert_eq!(r.branches, back.branches);
        assert_eq!(r.metrics, back.metrics);
        // byte-identical re-serialization
        assert_eq!(text, back.to_json().unwrap());
    }
}
