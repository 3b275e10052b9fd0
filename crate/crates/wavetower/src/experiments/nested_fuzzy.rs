//! Nested and fuzzy measurement with a delocalized device: a screen of
//! adsorption sites, delocalized over two vertical offsets {0, D}, meets a
//! broad packet whose slow phase oscillation (wavelength 2 D) alternates
//! sign from site to site. The joint system slices into device-offset x
//! site branches; with the default geometry the shifted screen exposes one
//! site fewer, giving 4 + 5 = 9 branches. A meta-observer who projects the
//! device before or after the packet interaction obtains the same branch
//! table: the operations commute.
//!
//! The fuzzy-measurement table reports, per site, both |sum of amplitudes|^2
//! (the two device contributions summed coherently; zero where they arrive
//! with opposite sign) and sum |amplitude|^2 (the sliced accounting used by
//! the branch table), without adjudicating between them.

use num_complex::Complex64;
use serde_json::json;

use crate::config::{MetaOrder, ScenarioConfig};
use crate::error::{Error, Result};
use crate::evolve::{PhotonShell, Propagator, PropagatorConfig};
use crate::lattice::ComplexField;
use crate::report::{BranchRow, ScenarioReport};
use crate::tower::{BranchRecord, BranchState, ClusterThresholds, LedgerEvent, Marker, SliceLedger};

use super::{base_report, run_id, EngineOutput, Series};

struct DeviceConfig {
    label: &'static str,
    amplitude: f64,
    shift: f64,
}

/// Per-(device, site) amplitude of the captured wave: the device amplitude
/// times the packet's transverse phase factor sampled at the site's
/// physical position, times the per-ray share of the beam.
fn site_amplitude(
    device: &DeviceConfig,
    site_index: usize,
    spacing: f64,
    n_sites: usize,
    beam_lo: f64,
    beam_hi: f64,
) -> Option<Complex64> {
    let y_phys = site_index as f64 * spacing + device.shift;
    if y_phys < beam_lo || y_phys > beam_hi {
        return None;
    }
    // slow oscillation with wavelength 2 D sampled at the site
    let phase = std::f64::consts::PI * y_phys / spacing;
    let share = (1.0 / n_sites as f64).sqrt();
    Some(Complex64::from_polar(device.amplitude * share, phase))
}

pub fn run_nested_fuzzy(cfg: &ScenarioConfig) -> Result<(ScenarioReport, EngineOutput)> {
    let n_sites = cfg.nested.n_sites;
    let spacing = cfg.nested.site_spacing;
    if n_sites < 2 || !(spacing > 0.0) {
        return Err(Error::InconsistentPhysics(
            "nested_fuzzy needs >= 2 sites with positive spacing".into(),
        ));
    }
    let devices = [
        DeviceConfig {
            label: "0",
            amplitude: std::f64::consts::FRAC_1_SQRT_2,
            shift: 0.0,
        },
        DeviceConfig {
            label: "D",
            amplitude: std::f64::consts::FRAC_1_SQRT_2,
            shift: spacing,
        },
    ];
    // Beam support covers exactly the unshifted screen.
    let beam_lo = -spacing / 2.0;
    let beam_hi = (n_sites as f64 - 0.5) * spacing;

    // Joint amplitude table (device x site), identical for both orderings;
    // what differs is only which projection is applied first.
    let mut branches: Vec<(String, usize, Complex64)> = Vec::new();
    let mut uncaptured = 0.0;
    for dev in &devices {
        let mut captured = 0.0;
        for j in 0..n_sites {
            if let Some(a) = site_amplitude(dev, j, spacing, n_sites, beam_lo, beam_hi) {
                branches.push((dev.label.to_string(), j, a));
                captured += a.norm_sqr();
            }
        }
        uncaptured += dev.amplitude * dev.amplitude - captured;
    }

    let order = cfg.nested.order;
    let rows: Vec<BranchRow> = match order {
        MetaOrder::Before => {
            // Device projected first: two device branches, then each
            // interacts; weight = |device amp|^2 * |site amp within config|^2.
            let mut rows = Vec::new();
            let mut id = devices.len() as u32;
            for (d, dev) in devices.iter().enumerate() {
                for j in 0..n_sites {
                    if let Some(a) = site_amplitude(dev, j, spacing, n_sites, beam_lo, beam_hi) {
                        let conditional = (a / dev.amplitude).norm_sqr();
                        let weight = dev.amplitude * dev.amplitude * conditional;
                        rows.push(BranchRow {
                            key: format!("offset={}/site=S{j}", dev.label),
                            site: Some(format!("S{j}")),
                            weight,
                            time: 0.0,
                            phase: a.arg(),
                            photon_count: 1,
                            parent: Some(d as u32),
                            id,
                        });
                        id += 1;
                    }
                }
            }
            rows
        }
        MetaOrder::After => {
            // Joint interaction first, then the meta projection by offset:
            // weight = |joint amplitude|^2 directly.
            branches
                .iter()
                .enumerate()
                .map(|(i, (label, j, a))| BranchRow {
                    key: format!("offset={label}/site=S{j}"),
                    site: Some(format!("S{j}")),
                    weight: a.norm_sqr(),
                    time: 0.0,
                    phase: a.arg(),
                    photon_count: 1,
                    parent: None,
                    id: i as u32,
                })
                .collect()
        }
    };

    // Fuzzy table: per physical site, the two device contributions summed
    // coherently vs incoherently.
    let mut fuzzy = Vec::new();
    for j in 0..n_sites {
        let mut amps = Vec::new();
        for dev in &devices {
            if let Some(a) = site_amplitude(dev, j, spacing, n_sites, beam_lo, beam_hi) {
                amps.push(a);
            }
        }
        let coherent: Complex64 = amps.iter().sum();
        let incoherent: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        fuzzy.push(json!({
            "site": format!("S{j}"),
            "contributions": amps.len(),
            "coherent_norm": coherent.norm_sqr(),
            "incoherent_norm": incoherent,
        }));
    }

    // Assemble a bookkeeping ledger so audits and the event log exist.
    let run = run_id(cfg)?;
    let grid = &cfg.grid;
    let propagator = Propagator::new(
        grid,
        PropagatorConfig {
            scheme: cfg.physics.scheme,
            mass: cfg.physics.mass,
            potential: Vec::new(),
            sponge: cfg.physics.sponge,
        },
    )?;
    let mut ledger = SliceLedger::new(
        &run,
        ComplexField::zeros(grid),
        cfg.physics.tau,
        cfg.physics.c,
        cfg.physics.shell_geometry,
        ClusterThresholds::default(),
    );
    ledger.initial_norm = 1.0;
    ledger.initial_energy = 0.0;
    // Uncaptured beam flux never reaches a site; account it as boundary.
    ledger.boundary_norm = uncaptured;
    for row in &rows {
        let site_pos = row
            .site
            .as_ref()
            .and_then(|s| s.strip_prefix('S'))
            .and_then(|s| s.parse::<usize>().ok())
            .map(|j| j as f64 * spacing)
            .unwrap_or(0.0);
        let mut shell = PhotonShell::new(
            row.site.as_deref().unwrap_or("?"),
            site_pos,
            0.0,
            cfg.physics.binding_energy,
            cfg.shell_thickness(),
            row.phase,
            row.weight,
            cfg.physics.shell_geometry,
        );
        shell.radius = 0.0;
        ledger.branches.push(BranchRecord {
            id: row.id,
            parent: row.parent,
            weight: row.weight,
            phase: row.phase,
            photon_count: 1,
            shells: vec![shell],
            markers: vec![
                Marker::DeviceOffset {
                    label: row.key.split('/').next().unwrap_or("").to_string(),
                },
                Marker::Site {
                    id: row.site.clone().unwrap_or_default(),
                    position: site_pos,
                    width: spacing / 4.0,
                },
            ],
            created_at: 0.0,
            event_time: 0.0,
            kinetic: 0.0,
            binding_energy: cfg.physics.binding_energy,
            state: BranchState::Bound,
            released_from: None,
            phasor: Complex64::from_polar(row.weight, row.phase),
            time_weight: 0.0,
            kinetic_weight: 0.0,
            energy_removed: 0.0,
        });
        ledger.events.push(LedgerEvent {
            event: "capture".into(),
            run_id: run.clone(),
            t: 0.0,
            site: row.site.clone(),
            weight: row.weight,
            phase: row.phase,
            photon_count: 1,
            parent: row.parent,
            branch: row.id,
        });
    }
    // Branch kinetic content is zero here, so omega = E_b and the branch
    // energy terms vanish; both audits close exactly.
    let (norm_drift, energy_drift) = ledger.audit_step(&propagator);
    super::enforce_audits(norm_drift, energy_drift, true)?;

    let mut report = base_report(cfg, &ledger)?;
    // The bookkeeping rows carry the stable offset/site keys.
    report.branches = rows.clone();
    report
        .metrics
        .insert("order".into(), json!(match order {
            MetaOrder::Before => "before",
            MetaOrder::After => "after",
        }));
    report
        .metrics
        .insert("branch_count".into(), json!(rows.len()));
    report
        .metrics
        .insert("positive_weight_branches".into(), json!(rows
            .iter()
            .filter(|r| r.weight > 0.0)
            .count()));
    report.metrics.insert("fuzzy_table".into(), json!(fuzzy));
    report
        .metrics
        .insert("uncaptured".into(), json!(uncaptured));
    report
        .metrics
        .insert("site_spacing".into(), json!(spacing));

    let series = Series {
        site_ids: Vec::new(),
        rows: vec![vec![0.0, 0.0, norm_drift, energy_drift, uncaptured]],
    };
    let bank = crate::detector::SiteBank::new(grid, &[])?;
    Ok((
        report,
        EngineOutput {
            ledger,
            series,
            propagator,
            bank,
        },
    ))
}
