//! Back-reaction bookkeeping: a heavy molecule delocalized over two traps
//! is sliced by a measurement that selects one trap. Each branch's heavy
//! center of mass sits at its trap, so an observer-path sees a shift of
//! +-L/2, while the weight-averaged center of mass over all slices equals
//! the initial one exactly: conservation holds for the totality of slices,
//! not per path, and no compensating recoil appears anywhere.

use num_complex::Complex64;
use serde_json::json;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::evolve::{PhotonShell, Propagator, PropagatorConfig};
use crate::lattice::{raised_cosine_bump, ComplexField};
use crate::report::ScenarioReport;
use crate::tower::{BranchRecord, BranchState, ClusterThresholds, Marker, SliceLedger};

use super::{base_report, run_id, EngineOutput, Series};

/// Region expectation of x about a pivot, pairwise-stable.
fn region_cm(field: &ComplexField, lo: usize, hi: usize, pivot: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in lo..hi {
        let p = field.values[i].norm_sqr();
        num += (field.grid.x(i) - pivot) * p;
        den += p;
    }
    if den == 0.0 {
        pivot
    } else {
        pivot + num / den
    }
}

pub fn run_back_reaction(cfg: &ScenarioConfig) -> Result<(ScenarioReport, EngineOutput)> {
    let br = &cfg.back_reaction;
    let l = br.trap_separation;
    if !(l > 0.0) {
        return Err(Error::InconsistentPhysics(
            "back_reaction.trap_separation must be positive".into(),
        ));
    }
    let grid = &cfg.grid;
    let bump_width = br.trap_width.min(l / 2.0);
    if bump_width < 2.0 * grid.dx {
        return Err(Error::InconsistentPhysics(format!(
            "trap bump width {bump_width} not resolvable on dx = {}",
            grid.dx
        )));
    }
    let traps = [-l / 2.0, l / 2.0];

    // Heavy system: two bumps carrying the configured norms. The heavy
    // field is static during the measurement (large-mass freezing).
    let mut heavy = ComplexField::zeros(grid);
    for (x, w) in traps.iter().zip(&br.weights) {
        grid.check_support(*x, bump_width)?;
        let mut bump = raised_cosine_bump(grid, *x, bump_width);
        bump.normalize_to(*w);
        heavy.add_assign_field(&bump)?;
    }
    let initial_cm = crate::lattice::expectation_position(&heavy);

    let propagator = Propagator::new(
        grid,
        PropagatorConfig {
            scheme: cfg.physics.scheme,
            mass: cfg.physics.mass,
            potential: Vec::new(),
            sponge: cfg.physics.sponge,
        },
    )?;
    let initial_energy = propagator.energy(&heavy);

    let run = run_id(cfg)?;
    let mut ledger = SliceLedger::new(
        &run,
        heavy,
        cfg.physics.tau,
        cfg.physics.c,
        cfg.physics.shell_geometry,
        ClusterThresholds::default(),
    );
    ledger.set_baseline(&propagator);

    // The incident atom contacts both traps; slicing keys on the trap.
    // Project the heavy field into one branch per trap: exactly the region
    // norm, phase, and kinetic content of each bump, plus one photon.
    let mid = grid.window_indices(0.0, 0.0).0;
    let regions = [(0usize, mid), (mid, grid.n_points)];
    let mut measured_cm = Vec::new();
    let mut measured_weight = Vec::new();
    for (b, ((lo, hi), &trap)) in regions.iter().zip(&traps).enumerate() {
        let weight = ledger.residual.norm_in(*lo, *hi);
        let cm = region_cm(&ledger.residual, *lo, *hi, trap);
        let flat = vec![1.0; hi - lo];
        let kinetic = propagator.windowed_kinetic(&ledger.residual, *lo, &flat);
        let omega = cfg.physics.binding_energy + kinetic;
        let mut shell = PhotonShell::new(
            &format!("trap{b}"),
            trap,
            0.0,
            omega,
            cfg.shell_thickness(),
            0.0,
            weight,
            cfg.physics.shell_geometry,
        );
        shell.radius = 0.0;
        ledger.branches.push(BranchRecord {
            id: b as u32,
            parent: None,
            weight,
            phase: 0.0,
            photon_count: 1,
            shells: vec![shell],
            markers: vec![Marker::Site {
                id: format!("trap{b}"),
                position: trap,
                width: bump_width,
            }],
            created_at: 0.0,
            event_time: 0.0,
            kinetic,
            binding_energy: cfg.physics.binding_energy,
            state: BranchState::Bound,
            released_from: None,
            phasor: Complex64::from_polar(weight, 0.0),
            time_weight: 0.0,
            kinetic_weight: weight * kinetic,
            energy_removed: weight * kinetic,
        });
        measured_cm.push(cm);
        measured_weight.push(weight);
    }
    // All heavy amplitude is now in branch records.
    for v in &mut ledger.residual.values {
        *v = Complex64::new(0.0, 0.0);
    }
    for b in 0..2 {
        let branch = &ledger.branches[b];
        let ev = crate::tower::LedgerEvent {
            event: "capture".into(),
            run_id: run.clone(),
            t: 0.0,
            site: Some(format!("trap{b}")),
            weight: branch.weight,
            phase: branch.phase,
            photon_count: 1,
            parent: None,
            branch: b as u32,
        };
        ledger.events.push(ev);
    }
    let (norm_drift, energy_drift) = ledger.audit_step(&propagator);
    super::enforce_audits(norm_drift, energy_drift, true)?;

    let mut report = base_report(cfg, &ledger)?;
    let weighted_cm: f64 = measured_cm
        .iter()
        .zip(&measured_weight)
        .map(|(cm, w)| cm * w)
        .sum::<f64>()
        / measured_weight.iter().sum::<f64>();
    let shifts: Vec<f64> = measured_cm.iter().map(|cm| cm - 0.0).collect();

    report.metrics.insert("trap_separation".into(), json!(l));
    report
        .metrics
        .insert("initial_cm".into(), json!(initial_cm));
    report
        .metrics
        .insert("branch_cm".into(), json!(measured_cm));
    report
        .metrics
        .insert("branch_weights".into(), json!(measured_weight));
    report
        .metrics
        .insert("branch_shift".into(), json!(shifts));
    report
        .metrics
        .insert("weighted_cm".into(), json!(weighted_cm));
    report
        .metrics
        .insert("cm_conservation_error".into(), json!(weighted_cm - initial_cm));
    report
        .metrics
        .insert("initial_energy".into(), json!(initial_energy));

    let series = Series {
        site_ids: vec!["trap0".into(), "trap1".into()],
        rows: vec![vec![
            0.0,
            0.0,
            norm_drift,
            energy_drift,
            0.0,
            measured_weight[0],
            measured_weight[1],
        ]],
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

/// Least-squares slope of |shift| against L across a sweep, with the
/// per-run conservation errors.
pub fn back_reaction_sweep_summary(reports: &[ScenarioReport]) -> serde_json::Value {
    let mut ls = Vec::new();
    let mut shifts = Vec::new();
    let mut cons = Vec::new();
    for r in reports {
        let l = r.metric_f64("trap_separation").unwrap_or(f64::NAN);
        let shift = r
            .metric_array("branch_shift")
            .map(|s| s.iter().map(|x| x.abs()).sum::<f64>() / s.len() as f64)
            .unwrap_or(f64::NAN);
        ls.push(l);
        shifts.push(shift);
        cons.push(r.metric_f64("cm_conservation_error").unwrap_or(f64::NAN));
    }
    let sxx: f64 = ls.iter().map(|x| x * x).sum();
    let sxy: f64 = ls.iter().zip(&shifts).map(|(x, y)| x * y).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    json!({
        "trap_separations": ls,
        "mean_abs_shift": shifts,
        "slope_abs_shift_vs_l": slope,
        "cm_conservation_errors": cons,
    })
}
