//! The slice ledger: branch records indexed by photon count, tower-wide
//! norm and energy audits, Born aggregation, overlap metrics, and slice
//! interference.
//!
//! Branches are exact ledger objects, never sampled trajectories. Capture
//! is continuous in time, so raw branching is uncountable; contiguous
//! capture steps at a site merge into one branch (one time cluster), which
//! is the regularization that keeps the ledger finite.

mod interfere;
mod overlap;

pub use interfere::{interfere_slices, FringeReport};
pub use overlap::{branch_distinguishability, shell_overlap_fraction, shell_pair_overlap};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::detector::{spawn_branch, CaptureEvent, SiteBank};
use crate::error::{Error, Result};
use crate::evolve::{advance_shells, PhotonShell, Propagator, ShellGeometry, StepOutcome};
use crate::lattice::ComplexField;

/// What a branch binds, between captures and releases. Branches with
/// different marker sets are orthogonal worlds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marker {
    Site {
        id: String,
        position: f64,
        width: f64,
    },
    /// Device-configuration tag used by delocalized-device scenarios.
    DeviceOffset { label: String },
}

impl Marker {
    fn key(&self) -> String {
        match self {
            Marker::Site { id, .. } => format!("site:{id}"),
            Marker::DeviceOffset { label } => format!("device:{label}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchState {
    /// Still accumulating contiguous capture steps.
    Forming,
    Bound,
    Released,
}

/// One slice of the tower: a capture cluster with its bound marker, its
/// emitted photon shell, weight, phase, and parentage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub id: u32,
    pub parent: Option<u32>,
    pub weight: f64,
    /// Captured phase (weight-averaged phasor argument).
    pub phase: f64,
    /// Photons emitted along this lineage.
    pub photon_count: u32,
    /// Shells still in flight (at most one per capture in this model).
    pub shells: Vec<PhotonShell>,
    pub markers: Vec<Marker>,
    pub created_at: f64,
    /// Weight-averaged capture time of the cluster.
    pub event_time: f64,
    /// Weight-averaged kinetic estimate of the captured amplitude.
    pub kinetic: f64,
    pub binding_energy: f64,
    pub state: BranchState,
    /// Set on release so interference fits know the emitter location.
    pub released_from: Option<(String, f64)>,
    // Accumulators for weight-averaged merging while the cluster forms.
    #[serde(skip)]
    pub phasor: Complex64,
    #[serde(skip)]
    pub time_weight: f64,
    #[serde(skip)]
    pub kinetic_weight: f64,
    /// Field energy drained into this branch; its photon carries
    /// `E_b + energy_removed / weight`.
    pub energy_removed: f64,
}

impl BranchRecord {
    /// Bound-state phase at time `t`: the captured phase advanced by the
    /// binding energy. Identical law for every branch, so relative phases
    /// between same-site-kind branches are hold-time invariant.
    pub fn phase_at(&self, t: f64) -> f64 {
        self.phase + self.binding_energy * (t - self.event_time)
    }

    /// Energy carried by this branch: bound atom at -E_b plus photon omega
    /// per unit weight, or photon only after release (the freed field's
    /// energy is tracked by the ledger separately).
    pub fn energy_term(&self) -> f64 {
        let omega: f64 = self.shells.iter().map(|s| s.carrier * s.weight).sum();
        match self.state {
            BranchState::Released => omega,
            _ => omega - self.binding_energy * self.weight,
        }
    }

    /// Photon carrier that closes the energy audit.
    pub fn omega(&self) -> f64 {
        if self.weight > 0.0 {
            self.binding_energy + self.energy_removed / self.weight
        } else {
            self.binding_energy
        }
    }

    pub fn marker_key(&self) -> String {
        let mut keys: Vec<String> = self.markers.iter().map(|m| m.key()).collect();
        keys.sort();
        keys.join("+")
    }

    /// Fold one capture step into the cluster. While forming, the event
    /// time, phase, and kinetic estimate are weight-averaged and the shell
    /// tracks them; once closed only the weight absorbs stragglers.
    pub fn fold(&mut self, event: &CaptureEvent, frozen: bool) {
        self.weight += event.delta_p;
        self.energy_removed += event.energy_removed;
        if !frozen {
            self.phasor += Complex64::from_polar(event.delta_p, event.phase);
            self.time_weight += event.delta_p * event.time;
            self.kinetic_weight += event.delta_p * event.kinetic;
            self.event_time = self.time_weight / self.weight;
            self.kinetic = self.kinetic_weight / self.weight;
            self.phase = self.phasor.arg();
        }
        let omega = self.omega();
        if let Some(shell) = self.shells.last_mut() {
            shell.weight = self.weight;
            shell.carrier = omega;
            if !frozen {
                shell.birth_time = self.event_time;
                shell.phase0 = self.phase;
            }
        }
    }
}

/// Partition key for Born aggregation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BornPartition {
    BySite,
    /// Bin event times with the given width.
    ByTimeBin(f64),
}

/// One row of the JSON-lines event log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub event: String,
    pub run_id: String,
    pub t: f64,
    pub site: Option<String>,
    pub weight: f64,
    pub phase: f64,
    pub photon_count: u32,
    pub parent: Option<u32>,
    pub branch: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterThresholds {
    /// Captures below this merge instead of ever spawning a branch.
    pub branch_floor: f64,
    /// A step capture above this opens a new cluster.
    pub open: f64,
    /// A step capture below this closes the open cluster.
    pub close: f64,
}

impl Default for ClusterThresholds {
    fn default() -> Self {
        ClusterThresholds {
            branch_floor: 1e-9,
            open: 1e-6,
            close: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct AuditSummary {
    pub max_norm_drift: f64,
    pub max_energy_drift: f64,
    pub captures_seen: bool,
}

/// Residual unabsorbed field plus all branches: the object on which the
/// conservation audits and Born aggregation run.
pub struct SliceLedger {
    pub run_id: String,
    pub residual: ComplexField,
    pub branches: Vec<BranchRecord>,
    pub boundary_norm: f64,
    pub boundary_energy: f64,
    /// Sub-threshold capture per site seen before any cluster opened there:
    /// (norm, energy) pairs.
    pub dust: BTreeMap<String, (f64, f64)>,
    /// External work injected by release events (heating), so the energy
    /// audit closes across them.
    pub injected_work: f64,
    /// Energy of fields re-emitted by releases (frozen at release time).
    pub released_field_energy: f64,
    pub t: f64,
    pub events: Vec<LedgerEvent>,
    pub audit: AuditSummary,
    pub thresholds: ClusterThresholds,
    pub initial_norm: f64,
    pub initial_energy: f64,
    tau: f64,
    c: f64,
    geometry: ShellGeometry,
    next_id: u32,
    open: BTreeMap<String, usize>,
    last_closed: BTreeMap<String, usize>,
}

impl SliceLedger {
    pub fn new(
        run_id: &str,
        residual: ComplexField,
        tau: f64,
        c: f64,
        geometry: ShellGeometry,
        thresholds: ClusterThresholds,
    ) -> Self {
        SliceLedger {
            run_id: run_id.to_string(),
            residual,
            branches: Vec::new(),
            boundary_norm: 0.0,
            boundary_energy: 0.0,
            dust: BTreeMap::new(),
            injected_work: 0.0,
            released_field_energy: 0.0,
            t: 0.0,
            events: Vec::new(),
            audit: AuditSummary::default(),
            thresholds,
            initial_norm: 0.0,
            initial_energy: 0.0,
            tau,
            c,
            geometry,
            next_id: 0,
            open: BTreeMap::new(),
            last_closed: BTreeMap::new(),
        }
    }

    pub fn speed_of_light(&self) -> f64 {
        self.c
    }

    pub fn set_baseline(&mut self, propagator: &Propagator) {
        self.initial_norm = self.total_norm(None);
        self.initial_energy = self.total_energy(propagator);
    }

    /// Fold a step's capture events into clusters.
    pub fn ingest(&mut self, events: &[CaptureEvent], bank: &SiteBank, t: f64) {
        for e in events {
            if let Some(&idx) = self.open.get(&e.site) {
                let closing = e.delta_p < self.thresholds.close;
                self.branches[idx].fold(e, false);
                if closing {
                    self.close_cluster(&e.site, idx, t);
                }
            } else if e.delta_p >= self.thresholds.open {
                let site = bank
                    .site(&e.site)
                    .expect("capture event from unknown site");
                let id = self.next_id;
                self.next_id += 1;
                let mut branch =
                    spawn_branch(e, site, e.time, id, None, self.tau, self.c, self.geometry);
                branch.state = BranchState::Forming;
                if let Some((dn, de)) = self.dust.remove(&e.site) {
                    branch.weight += dn;
                    branch.energy_removed += de;
                    let omega = branch.omega();
                    if let Some(s) = branch.shells.last_mut() {
                        s.weight = branch.weight;
                        s.carrier = omega;
                    }
                }
                self.branches.push(branch);
                self.open.insert(e.site.clone(), self.branches.len() - 1);
            } else if let Some(&idx) = self.last_closed.get(&e.site) {
                self.branches[idx].fold(e, true);
            } else if e.delta_p > 0.0 {
                let entry = self.dust.entry(e.site.clone()).or_insert((0.0, 0.0));
                entry.0 += e.delta_p;
                entry.1 += e.energy_removed;
            }
        }
    }

    fn close_cluster(&mut self, site: &str, idx: usize, t: f64) {
        self.open.remove(site);
        self.last_closed.insert(site.to_string(), idx);
        let b = &mut self.branches[idx];
        b.state = BranchState::Bound;
        self.events.push(LedgerEvent {
            event: "capture".into(),
            run_id: self.run_id.clone(),
            t,
            site: Some(site.to_string()),
            weight: b.weight,
            phase: b.phase,
            photon_count: b.photon_count,
            parent: b.parent,
            branch: b.id,
        });
    }

    /// Close every still-forming cluster (end of run).
    pub fn close_all_open(&mut self) {
        let open: Vec<(String, usize)> =
            self.open.iter().map(|(s, &i)| (s.clone(), i)).collect();
        let t = self.t;
        for (site, idx) in open {
            self.close_cluster(&site, idx, t);
        }
    }

    pub fn add_boundary(&mut self, outcome: StepOutcome) {
        self.boundary_norm += outcome.absorbed_norm;
        self.boundary_energy += outcome.absorbed_energy;
    }

    /// Advance ledger time: photon shells move at c, nothing else changes.
    pub fn advance(&mut self, t: f64) {
        for b in &mut self.branches {
            b.shells = advance_shells(&b.shells, t, self.c);
        }
        self.t = t;
    }

    /// Residual + branch weights + boundary-absorbed (+ unassigned dust).
    /// `residual_norm` may be passed in when the caller just computed it.
    pub fn total_norm(&self, residual_norm: Option<f64>) -> f64 {
        let res = residual_norm.unwrap_or_else(|| self.residual.norm());
        let branch: f64 = self.branches.iter().map(|b| b.weight).sum();
        let dust: f64 = self.dust.values().map(|d| d.0).sum();
        res + branch + self.boundary_norm + dust
    }

    /// Field energy + branch terms + boundary-absorbed energy + released
    /// field energy, minus the work injected by releases.
    pub fn total_energy(&self, propagator: &Propagator) -> f64 {
        let field = propagator.energy(&self.residual);
        let branch: f64 = self.branches.iter().map(|b| b.energy_term()).sum();
        let dust: f64 = self.dust.values().map(|d| d.1).sum();
        field + branch + dust + self.boundary_energy + self.released_field_energy
            - self.injected_work
    }

    /// Update audit maxima; returns (norm_drift, energy_drift).
    pub fn audit_step(&mut self, propagator: &Propagator) -> (f64, f64) {
        let norm_drift = (self.total_norm(None) - self.initial_norm).abs();
        let scale = self.initial_energy.abs().max(1e-15);
        let energy_drift = (self.total_energy(propagator) - self.initial_energy).abs() / scale;
        if norm_drift > self.audit.max_norm_drift {
            self.audit.max_norm_drift = norm_drift;
        }
        if energy_drift > self.audit.max_energy_drift {
            self.audit.max_energy_drift = energy_drift;
        }
        if !self.branches.is_empty() || self.dust.values().any(|d| d.0 > 0.0) {
            self.audit.captures_seen = true;
        }
        (norm_drift, energy_drift)
    }

    /// Record a release event: the branch's weight moved into `emitted`,
    /// heating supplied `work = E(emitted) + weight * E_b`.
    pub fn record_release(&mut self, idx: usize, emitted_energy: f64, t: f64) {
        let b = &self.branches[idx];
        let work = emitted_energy + b.binding_energy * b.weight;
        self.injected_work += work;
        self.released_field_energy += emitted_energy;
        self.events.push(LedgerEvent {
            event: "release".into(),
            run_id: self.run_id.clone(),
            t,
            site: b.released_from.as_ref().map(|(s, _)| s.clone()),
            weight: b.weight,
            phase: b.phase,
            photon_count: b.photon_count,
            parent: b.parent,
            branch: b.id,
        });
    }

    pub fn record_interference(&mut self, a: u32, b: u32, visibility: f64, phase: f64, t: f64) {
        self.events.push(LedgerEvent {
            event: "interference".into(),
            run_id: self.run_id.clone(),
            t,
            site: None,
            weight: visibility,
            phase,
            photon_count: 0,
            parent: Some(a),
            branch: b,
        });
    }
}

/// Tower-wide norm: the discrete form of net norm conservation.
pub fn total_norm(ledger: &SliceLedger) -> f64 {
    ledger.total_norm(None)
}

/// Tower-wide energy against the propagator's discrete Hamiltonian.
pub fn total_energy(ledger: &SliceLedger, propagator: &Propagator) -> f64 {
    ledger.total_energy(propagator)
}

/// Normalized branch weights aggregated by site or by event-time bin.
pub fn born_statistics(
    ledger: &SliceLedger,
    partition: BornPartition,
) -> Result<BTreeMap<String, f64>> {
    if ledger.branches.is_empty() {
        return Err(Error::EmptyLedger);
    }
    let total: f64 = ledger.branches.iter().map(|b| b.weight).sum();
    let mut map = BTreeMap::new();
    for b in &ledger.branches {
        let key = match partition {
            BornPartition::BySite => b
                .markers
                .iter()
                .find_map(|m| match m {
                    Marker::Site { id, .. } => Some(id.clone()),
                    _ => None,
                })
                .or_else(|| b.released_from.as_ref().map(|(s, _)| s.clone()))
                .unwrap_or_else(|| format!("branch-{}", b.id)),
            BornPartition::ByTimeBin(width) => {
                let bin = (b.event_time / width).floor() as i64;
                format!("t[{bin}]")
            }
        };
        *map.entry(key).or_insert(0.0) += b.weight / total;
    }
    Ok(map)
}
