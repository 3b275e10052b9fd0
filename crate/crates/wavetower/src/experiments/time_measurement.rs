//! Event-time measurement: a train of disjoint pulses of a single incident
//! particle crosses one adsorption site; each pulse becomes its own capture
//! cluster, and the cluster weights reproduce the per-pulse norms.

use serde_json::json;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::report::ScenarioReport;
use crate::tower::{born_statistics, BornPartition};

use super::{base_report, run_capture_engine, run_id, EngineOutput};

pub fn run_time_measurement(cfg: &ScenarioConfig) -> Result<(ScenarioReport, EngineOutput)> {
    if cfg.sites.is_empty() {
        return Err(Error::InconsistentPhysics(
            "time_measurement needs at least one site".into(),
        ));
    }
    let mut warnings = Vec::new();
    if cfg.packet.count > 1 && cfg.packet.gap_multiplier < 3 {
        warnings.push(format!(
            "unresolved-pulses: gap multiplier {} < 3; clusters may merge",
            cfg.packet.gap_multiplier
        ));
    }

    let out = run_capture_engine(cfg, &run_id(cfg)?)?;
    let mut report = base_report(cfg, &out.ledger)?;
    report.warnings = warnings;

    // Cluster table ordered by time.
    let mut clusters: Vec<(f64, f64, f64)> = out
        .ledger
        .branches
        .iter()
        .map(|b| (b.event_time, b.weight, b.phase))
        .collect();
    clusters.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let total: f64 = clusters.iter().map(|c| c.1).sum();
    let times: Vec<f64> = clusters.iter().map(|c| c.0).collect();
    let weights: Vec<f64> = clusters.iter().map(|c| c.1 / total).collect();

    let v = cfg.packet.carrier.abs() / cfg.physics.mass;
    let expected_separation = if v > 0.0 {
        (cfg.packet.gap_multiplier as f64 + 2.0) * cfg.packet.width / v
    } else {
        0.0
    };
    report
        .metrics
        .insert("cluster_times".into(), json!(times));
    report
        .metrics
        .insert("cluster_weights".into(), json!(weights));
    if times.len() >= 2 {
        report.metrics.insert(
            "cluster_separation".into(),
            json!(times[times.len() - 1] - times[0]),
        );
    }
    report
        .metrics
        .insert("expected_separation".into(), json!(expected_separation));
    report
        .metrics
        .insert("packet_speed".into(), json!(v));

    let bins = born_statistics(&out.ledger, BornPartition::ByTimeBin(cfg.physics.tau))?;
    report.metrics.insert(
        "time_bins".into(),
        json!(bins.into_iter().collect::<Vec<(String, f64)>>()),
    );

    Ok((report, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ScenarioConfig, ScenarioKind};

    #[test]
    fn two_equal_pulses_cluster_at_half_weight_each() {
        let cfg = ScenarioConfig::defaults_for(ScenarioKind::TimeMeasurement);
        let (report, out) = run_time_measurement(&cfg).unwrap();
        let weights = report.metric_array("cluster_weights").unwrap();
        assert_eq!(weights.len(), 2, "expected two clusters");
        assert!((weights[0] - 0.5).abs() < 1e-3, "w0 = {}", weights[0]);
        assert!((weights[1] - 0.5).abs() < 1e-3, "w1 = {}", weights[1]);
        // separation (n+2) tau for w = v tau
        let sep = report.metric_f64("cluster_separation").unwrap();
        let expected = report.metric_f64("expected_separation").unwrap();
        assert!(
            (sep - expected).abs() <= cfg.physics.tau,
            "separation {sep} vs {expected}"
        );
        assert!(out.ledger.audit.max_norm_drift <= 1e-6);
    }

    #[test]
    fn one_pulse_gives_one_cluster_of_full_weight() {
        let mut cfg = ScenarioConfig::defaults_for(ScenarioKind::TimeMeasurement);
        cfg.packet.count = 1;
        cfg.run.t_end = 8.0;
        let (report, _) = run_time_measurement(&cfg).unwrap();
        let weights = report.metric_array("cluster_weights").unwrap();
        assert_eq!(weights.len(), 1);
        assert!((weights[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unequal_pulse_norms_become_cluster_weights() {
        let mut cfg = ScenarioConfig::defaults_for(ScenarioKind::TimeMeasurement);
        cfg.packet.weights = Some(vec![0.8, 0.2]);
        let (report, _) = run_time_measurement(&cfg).unwrap();
        let weights = report.metric_array("cluster_weights").unwrap();
        assert_eq!(weights.len(), 2);
        assert!((weights[0] - 0.8).abs() < 1e-3, "w0 = {}", weights[0]);
        assert!((weights[1] - 0.2).abs() < 1e-3, "w1 = {}", weights[1]);
    }

    #[test]
    fn narrow_gap_warns_unresolved() {
        let mut cfg = ScenarioConfig::defaults_for(ScenarioKind::TimeMeasurement);
        cfg.packet.gap_multiplier = 2;
        cfg.run.t_end = 10.0;
        let (report, _) = run_time_measurement(&cfg).unwrap();
        assert!(report.warnings.iter().any(|w| w.contains("unresolved-pulses")));
    }
}
