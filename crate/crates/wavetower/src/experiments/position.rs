//! Broad-packet position measurement: a near-static packet spanning two
//! sites drains into one branch per site; branch weights reproduce the
//! window-norm integrals, and the report tracks how distinguishable the two
//! worlds are as their photon shells fly apart.

use serde_json::json;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::evolve::advance_shells;
use crate::report::ScenarioReport;
use crate::tower::{born_statistics, branch_distinguishability, shell_pair_overlap, BornPartition};

use super::{base_report, build_packet, run_capture_engine, run_id, EngineOutput};

pub fn run_position_measurement(cfg: &ScenarioConfig) -> Result<(ScenarioReport, EngineOutput)> {
    if cfg.sites.len() < 2 {
        return Err(Error::InconsistentPhysics(
            "position_measurement needs two sites inside the packet support".into(),
        ));
    }

    // Window-norm integrals of the initial packet: the defined comparison
    // point for the site weights.
    let initial = build_packet(cfg)?;
    let bank = crate::detector::SiteBank::new(&cfg.grid, &cfg.resolved_sites())?;
    let window_norms: Vec<f64> = (0..bank.sites().len())
        .map(|i| bank.support_norm(i, &initial))
        .collect();
    let window_total: f64 = window_norms.iter().sum();

    let out = run_capture_engine(cfg, &run_id(cfg)?)?;
    let mut report = base_report(cfg, &out.ledger)?;

    let born = born_statistics(&out.ledger, BornPartition::BySite)?;
    report.metrics.insert(
        "site_weights".into(),
        json!(born.clone().into_iter().collect::<Vec<(String, f64)>>()),
    );
    report.metrics.insert(
        "window_norm_fractions".into(),
        json!(bank
            .sites()
            .iter()
            .zip(&window_norms)
            .map(|(s, w)| (s.id.clone(), w / window_total))
            .collect::<Vec<(String, f64)>>()),
    );

    // Distinguishability curve of the first two branches over the run, with
    // the photon-sector factor isolated and its w/R products.
    if out.ledger.branches.len() >= 2 {
        let c = cfg.physics.c;
        let w = cfg.shell_thickness();
        let a0 = &out.ledger.branches[0];
        let b0 = &out.ledger.branches[1];
        let birth = 0.5 * (a0.shells[0].birth_time + b0.shells[0].birth_time);
        let mut ts = Vec::new();
        let mut dist = Vec::new();
        let mut shell_overlap = Vec::new();
        let mut radius = Vec::new();
        let mut overlap_r_over_w = Vec::new();
        let mut overlap_d_over_w = Vec::new();
        let d_sites = (a0.shells[0].origin_x - b0.shells[0].origin_x).abs();
        for row in &out.series.rows {
            let t = row[0];
            if t <= birth {
                continue;
            }
            let mut a = a0.clone();
            let mut b = b0.clone();
            a.shells = advance_shells(&a.shells, t, c);
            b.shells = advance_shells(&b.shells, t, c);
            let o = shell_pair_overlap(&a.shells[0], &b.shells[0], c);
            let r = c * (t - birth);
            ts.push(t);
            dist.push(branch_distinguishability(&a, &b, c));
            shell_overlap.push(o);
            radius.push(r);
            overlap_r_over_w.push(o * r / w);
            overlap_d_over_w.push(o * d_sites / w);
        }
        report.metrics.insert("curve_t".into(), json!(ts));
        report
            .metrics
            .insert("curve_distinguishability".into(), json!(dist));
        report
            .metrics
            .insert("curve_shell_overlap".into(), json!(shell_overlap));
        report.metrics.insert("curve_radius".into(), json!(radius));
        report
            .metrics
            .insert("curve_overlap_r_over_w".into(), json!(overlap_r_over_w));
        report
            .metrics
            .insert("curve_overlap_d_over_w".into(), json!(overlap_d_over_w));
        report.metrics.insert("site_separation".into(), json!(d_sites));
        report
            .metrics
            .insert("shell_thickness".into(), json!(w));
    }

    Ok((report, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ScenarioConfig, ScenarioKind};

    #[test]
    fn symmetric_packet_splits_half_half() {
        let cfg = ScenarioConfig::defaults_for(ScenarioKind::PositionMeasurement);
        let (report, out) = run_position_measurement(&cfg).unwrap();
        assert_eq!(out.ledger.branches.len(), 2);
        let weights = report.metrics["site_weights"].as_array().unwrap();
        for pair in weights {
            let w = pair[1].as_f64().unwrap();
            assert!((w - 0.5).abs() < 1e-3, "weight {w}");
        }
    }

    #[test]
    fn offset_packet_matches_window_integral_oracle() {
        let mut cfg = ScenarioConfig::defaults_for(ScenarioKind::PositionMeasurement);
        cfg.packet.center = 1.0; // nearer the right site
        let (report, _) = run_position_measurement(&cfg).unwrap();
        let weights = report.metrics["site_weights"].as_array().unwrap();
        let oracle = report.metrics["window_norm_fractions"].as_array().unwrap();
        for (w, o) in weights.iter().zip(oracle) {
            assert_eq!(w[0], o[0], "site order mismatch");
            let dw = w[1].as_f64().unwrap() - o[1].as_f64().unwrap();
            assert!(dw.abs() < 1e-3, "weight vs window integral: {dw}");
        }
        // the right site must dominate
        let right = weights
            .iter()
            .find(|p| p[0] == "right")
            .unwrap()[1]
            .as_f64()
            .unwrap();
        assert!(right > 0.5);
    }
}
