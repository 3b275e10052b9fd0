//! Wavefunction revival (inverse measurement): absorb a single packet at
//! two sites, hold the bound amplitude, release both atoms simultaneously,
//! and interfere the re-emitted fields. The fitted fringe phase recovers
//! the phase difference the incident wave imprinted at capture; thermal
//! phase jitter between the sites washes the ensemble-mean visibility down
//! to exp(-sigma^2 / 2).

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use crate::config::ScenarioConfig;
use crate::detector::release_atom;
use crate::error::{Error, Result};
use crate::report::ScenarioReport;
use crate::tower::interfere_slices;

use super::{base_report, bound_branch_index, post_run_audit, run_capture_engine, run_id, EngineOutput};

pub fn run_revival(cfg: &ScenarioConfig) -> Result<(ScenarioReport, EngineOutput)> {
    if cfg.sites.len() != 2 {
        return Err(Error::InconsistentPhysics(
            "revival needs exactly two sites".into(),
        ));
    }
    let mut out = run_capture_engine(cfg, &run_id(cfg)?)?;

    // Left/right by position; site 1 is the leftmost.
    let mut site_ids: Vec<(f64, String)> = cfg
        .sites
        .iter()
        .map(|s| (s.position, s.id.clone()))
        .collect();
    site_ids.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let (x1, id1) = site_ids[0].clone();
    let (x2, id2) = site_ids[1].clone();

    let ia = bound_branch_index(&out.ledger, &id1)
        .ok_or_else(|| Error::Other(format!("no bound branch at site {id1}")))?;
    let ib = bound_branch_index(&out.ledger, &id2)
        .ok_or_else(|| Error::Other(format!("no bound branch at site {id2}")))?;

    // Hold, then release both slices at the same instant.
    let t_release = cfg.run.t_end + cfg.revival.hold_time;
    out.ledger.advance(t_release);
    let k_r = cfg.revival.release_carrier;

    let bound_a = out.ledger.branches[ia].clone();
    let bound_b = out.ledger.branches[ib].clone();
    let (branch_a, emitted_a) = release_atom(&bound_a, &cfg.grid, k_r, t_release, 0.0)?;
    let (branch_b, emitted_b) = release_atom(&bound_b, &cfg.grid, k_r, t_release, 0.0)?;
    let ea = out.propagator.energy(&emitted_a);
    let eb = out.propagator.energy(&emitted_b);
    out.ledger.branches[ia] = branch_a.clone();
    out.ledger.branches[ib] = branch_b.clone();
    out.ledger.record_release(ia, ea, t_release);
    out.ledger.record_release(ib, eb, t_release);
    post_run_audit(&mut out.ledger, &out.propagator)?;

    let threshold = cfg.physics.interference_threshold;
    let c = cfg.physics.c;
    let fringe = interfere_slices(&branch_a, &branch_b, &emitted_a, &emitted_b, threshold, c, k_r)?;
    out.ledger.record_interference(
        branch_a.id,
        branch_b.id,
        fringe.visibility,
        fringe.fitted_phase,
        t_release,
    );

    let mut report = base_report(cfg, &out.ledger)?;
    let expected_phase = cfg.packet.carrier * (x1 - x2);
    report
        .metrics
        .insert("fitted_phase".into(), json!(fringe.fitted_phase));
    report
        .metrics
        .insert("expected_phase".into(), json!(wrap(expected_phase)));
    report
        .metrics
        .insert("visibility".into(), json!(fringe.visibility));
    report
        .metrics
        .insert("interference_allowed".into(), json!(fringe.allowed));
    report.metrics.insert(
        "distinguishability".into(),
        json!(fringe.distinguishability),
    );
    report
        .metrics
        .insert("hold_time".into(), json!(cfg.revival.hold_time));
    report.metrics.insert(
        "fringe_spectrum".into(),
        json!(decimate(&fringe.spectrum, 512)),
    );
    report
        .metrics
        .insert("fringe_k".into(), json!(decimate(&fringe.k_axis, 512)));

    // Thermal ensemble: one relative-phase jitter theta ~ N(0, sigma^2)
    // per seeded run, applied to the second site's release. The mean fringe
    // amplitude over the ensemble carries E[e^{i theta}] = e^{-sigma^2/2}.
    if cfg.physics.sigma_phi > 0.0 {
        let n = cfg.revival.ensemble.max(1);
        let normal = Normal::new(0.0, cfg.physics.sigma_phi)
            .map_err(|e| Error::Other(format!("jitter distribution: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.scenario.seed);
        let mut mean_fringe = Complex64::new(0.0, 0.0);
        for _ in 0..n {
            let theta: f64 = normal.sample(&mut rng);
            let (ba, fa) = release_atom(&bound_a, &cfg.grid, k_r, t_release, 0.0)?;
            let (bb, fb) = release_atom(&bound_b, &cfg.grid, k_r, t_release, theta)?;
            let f = interfere_slices(&ba, &bb, &fa, &fb, threshold, c, k_r)?;
            mean_fringe += Complex64::from_polar(f.visibility, f.fitted_phase);
        }
        mean_fringe /= n as f64;
        report
            .metrics
            .insert("ensemble_mean_visibility".into(), json!(mean_fringe.norm()));
        report
            .metrics
            .insert("ensemble_mean_phase".into(), json!(mean_fringe.arg()));
        report
            .metrics
            .insert("ensemble_size".into(), json!(n));
        report.metrics.insert(
            "ensemble_expected_visibility".into(),
            json!((-cfg.physics.sigma_phi.powi(2) / 2.0).exp()),
        );
    }

    Ok((report, out))
}

fn wrap(p: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let mut x = p.rem_euclid(tau);
    if x > std::f64::consts::PI {
        x -= tau;
    }
    x
}

fn decimate(v: &[f64], max: usize) -> Vec<f64> {
    if v.len() <= max {
        return v.to_vec();
    }
    let stride = v.len().div_ceil(max);
    v.iter().step_by(stride).copied().collect()
}
