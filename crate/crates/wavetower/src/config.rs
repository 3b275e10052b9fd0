//! Run configuration: a sectioned TOML document (scenario, grid, physics,
//! packet, sites, run, output, plus per-scenario tables) resolved against
//! the scenario's default table. Unknown keys are rejected with their full
//! path; physically inconsistent settings are rejected before any run
//! starts. `parse(emit(config)) == config` holds for every resolved config.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detector::AdsorptionSite;
use crate::error::{Error, Result};
use crate::evolve::{Scheme, ShellGeometry, SpongeConfig};
use crate::lattice::{Boundary, Grid, PacketShape, PacketSpec};
use crate::tower::ClusterThresholds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    TimeMeasurement,
    PositionMeasurement,
    Revival,
    BackReaction,
    NestedFuzzy,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::TimeMeasurement => "time_measurement",
            ScenarioKind::PositionMeasurement => "position_measurement",
            ScenarioKind::Revival => "revival",
            ScenarioKind::BackReaction => "back_reaction",
            ScenarioKind::NestedFuzzy => "nested_fuzzy",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "time_measurement" => Ok(ScenarioKind::TimeMeasurement),
            "position_measurement" => Ok(ScenarioKind::PositionMeasurement),
            "revival" => Ok(ScenarioKind::Revival),
            "back_reaction" => Ok(ScenarioKind::BackReaction),
            "nested_fuzzy" => Ok(ScenarioKind::NestedFuzzy),
            other => Err(Error::SchemaViolation {
                path: "scenario.kind".into(),
                message: format!("unknown scenario `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    #[serde(default = "one")]
    pub mass: f64,
    /// Signal speed of emitted photon shells; c >> packet speeds keeps the
    /// radiation outrunning the massive sector.
    #[serde(default = "ten")]
    pub c: f64,
    /// Radiative timescale; site capture rates default to 1/tau.
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default = "one")]
    pub binding_energy: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_geometry")]
    pub shell_geometry: ShellGeometry,
    /// Std of the thermal phase jitter between the two release sites.
    #[serde(default)]
    pub sigma_phi: f64,
    #[serde(default = "default_rho_floor")]
    pub rho_floor: f64,
    /// Branch distinguishability above this forbids interference.
    #[serde(default = "default_interference_threshold")]
    pub interference_threshold: f64,
    #[serde(default)]
    pub sponge: SpongeConfig,
    #[serde(default)]
    pub thresholds: ClusterThresholds,
}

fn one() -> f64 {
    1.0
}
fn ten() -> f64 {
    10.0
}
fn default_scheme() -> Scheme {
    Scheme::CrankNicolson
}
fn default_geometry() -> ShellGeometry {
    ShellGeometry::Radial3d
}
fn default_rho_floor() -> f64 {
    1e-12
}
fn default_interference_threshold() -> f64 {
    0.5
}

impl Default for PhysicsSection {
    fn default() -> Self {
        PhysicsSection {
            mass: 1.0,
            c: 10.0,
            tau: 1.0,
            binding_energy: 1.0,
            scheme: default_scheme(),
            shell_geometry: default_geometry(),
            sigma_phi: 0.0,
            rho_floor: default_rho_floor(),
            interference_threshold: default_interference_threshold(),
            sponge: SpongeConfig::default(),
            thresholds: ClusterThresholds::default(),
        }
    }
}

/// Site entry as written in config; rate and binding energy fall back to
/// the physics section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteSection {
    pub id: String,
    pub position: f64,
    pub width: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding_energy: Option<f64>,
    #[serde(default = "yes")]
    pub active: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub t_end: f64,
    /// Record a series row every this many steps.
    #[serde(default = "default_stride")]
    pub series_stride: usize,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevivalSection {
    /// Time the captured amplitude is held bound before release.
    #[serde(default = "default_hold")]
    pub hold_time: f64,
    #[serde(default)]
    pub release_carrier: f64,
    /// Seeded ensemble size used when sigma_phi > 0.
    #[serde(default = "default_ensemble")]
    pub ensemble: usize,
}

fn default_hold() -> f64 {
    5.0
}
fn default_ensemble() -> usize {
    1000
}

impl Default for RevivalSection {
    fn default() -> Self {
        RevivalSection {
            hold_time: default_hold(),
            release_carrier: 0.0,
            ensemble: default_ensemble(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackReactionSection {
    /// Trap separation L; traps sit at +-L/2.
    #[serde(default = "default_separation")]
    pub trap_separation: f64,
    /// Norm of the heavy system in each trap.
    #[serde(default = "default_br_weights")]
    pub weights: Vec<f64>,
    #[serde(default = "one")]
    pub trap_width: f64,
}

fn default_separation() -> f64 {
    4.0
}
fn default_br_weights() -> Vec<f64> {
    vec![0.5, 0.5]
}

impl Default for BackReactionSection {
    fn default() -> Self {
        BackReactionSection {
            trap_separation: default_separation(),
            weights: default_br_weights(),
            trap_width: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaOrder {
    Before,
    After,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NestedSection {
    #[serde(default = "default_n_sites")]
    pub n_sites: usize,
    /// Site spacing D; the slow oscillation has wavelength 2 D and the
    /// device is delocalized over offsets {0, D}.
    #[serde(default = "two")]
    pub site_spacing: f64,
    /// Whether the meta-observer projects the device before or after the
    /// packet interacts.
    #[serde(default = "default_order")]
    pub order: MetaOrder,
}

fn default_n_sites() -> usize {
    5
}
fn two() -> f64 {
    2.0
}
fn default_order() -> MetaOrder {
    MetaOrder::After
}

impl Default for NestedSection {
    fn default() -> Self {
        NestedSection {
            n_sites: default_n_sites(),
            site_spacing: two(),
            order: default_order(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub directory: String,
    #[serde(default = "yes")]
    pub plots: bool,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: default_dir(),
            plots: true,
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub grid: Grid,
    pub physics: PhysicsSection,
    pub packet: PacketSpec,
    pub sites: Vec<SiteSection>,
    pub run: RunSection,
    #[serde(default)]
    pub revival: RevivalSection,
    #[serde(default)]
    pub back_reaction: BackReactionSection,
    #[serde(default)]
    pub nested: NestedSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// User-facing document: every section optional, resolved against the
/// scenario's defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: ScenarioSection,
    grid: Option<Grid>,
    physics: Option<PhysicsSection>,
    packet: Option<PacketSpec>,
    sites: Option<Vec<SiteSection>>,
    run: Option<RunSection>,
    revival: Option<RevivalSection>,
    back_reaction: Option<BackReactionSection>,
    nested: Option<NestedSection>,
    output: Option<OutputSection>,
}

impl ScenarioConfig {
    /// The turn-key default table for a scenario.
    pub fn defaults_for(kind: ScenarioKind) -> ScenarioConfig {
        let scenario = ScenarioSection {
            kind,
            seed: default_seed(),
        };
        match kind {
            ScenarioKind::TimeMeasurement => ScenarioConfig {
                scenario,
                grid: Grid {
                    n_points: 4096,
                    dx: 0.04,
                    x_min: -102.4,
                    dt: 0.005,
                    boundary: Boundary::Absorbing,
                },
                physics: PhysicsSection::default(),
                // w = v tau with v = k0 / m; k0 w >> 1 keeps the parcels
                // monochromatic so dispersion cannot bridge the gap.
                packet: PacketSpec::pulse_train(-10.0, 6.0, 8, 2, 6.0),
                sites: vec![SiteSection {
                    id: "site".into(),
                    position: 0.0,
                    width: 1.0,
                    rate: None,
                    binding_energy: None,
                    active: true,
                }],
                run: RunSection {
                    t_end: 16.0,
                    series_stride: 5,
                },
                revival: RevivalSection::default(),
                back_reaction: BackReactionSection::default(),
                nested: NestedSection::default(),
                output: OutputSection::default(),
            },
            ScenarioKind::PositionMeasurement => ScenarioConfig {
                scenario,
                grid: Grid {
                    n_points: 4096,
                    dx: 0.04,
                    dt: 0.05,
                    x_min: -81.92,
                    boundary: Boundary::Absorbing,
                },
                physics: PhysicsSection {
                    mass: 1000.0,
                    ..PhysicsSection::default()
                },
                packet: PacketSpec::gaussian(0.0, 10.0, 0.0),
                sites: vec![
                    SiteSection {
                        id: "left".into(),
                        position: -2.0,
                        width: 1.0,
                        rate: None,
                        binding_energy: None,
                        active: true,
                    },
                    SiteSection {
                        id: "right".into(),
                        position: 2.0,
                        width: 1.0,
                        rate: None,
                        binding_energy: None,
                        active: true,
                    },
                ],
                run: RunSection {
                    t_end: 20.0,
                    series_stride: 2,
                },
                revival: RevivalSection::default(),
                back_reaction: BackReactionSection::default(),
                nested: NestedSection::default(),
                output: OutputSection::default(),
            },
            ScenarioKind::Revival => ScenarioConfig {
                scenario,
                grid: Grid {
                    n_points: 2048,
                    dx: 0.04,
                    dt: 0.05,
                    x_min: -40.96,
                    boundary: Boundary::Absorbing,
                },
                physics: PhysicsSection {
                    mass: 100.0,
                    shell_geometry: ShellGeometry::Line1d,
                    ..PhysicsSection::default()
                },
                packet: PacketSpec::gaussian(0.0, 8.0, -0.25),
                sites: vec![
                    SiteSection {
                        id: "left".into(),
                        position: -2.0,
                        width: 1.0,
                        rate: None,
                        binding_energy: None,
                        active: true,
                    },
                    SiteSection {
                        id: "right".into(),
                        position: 2.0,
                        width: 1.0,
                        rate: None,
                        binding_energy: None,
                        active: true,
                    },
                ],
                run: RunSection {
                    t_end: 20.0,
                    series_stride: 2,
                },
                revival: RevivalSection::default(),
                back_reaction: BackReactionSection::default(),
                nested: NestedSection::default(),
                output: OutputSection::default(),
            },
            ScenarioKind::BackReaction => ScenarioConfig {
                scenario,
                grid: Grid {
                    n_points: 2048,
                    dx: 0.02,
                    dt: 0.01,
                    x_min: -20.48,
                    boundary: Boundary::Absorbing,
                },
                physics: PhysicsSection::default(),
                packet: PacketSpec::gaussian(0.0, 1.0, 0.0),
                sites: Vec::new(),
                run: RunSection {
                    t_end: 0.0,
                    series_stride: 1,
                },
                revival: RevivalSection::default(),
                back_reaction: BackReactionSection::default(),
                nested: NestedSection::default(),
                output: OutputSection::default(),
            },
            ScenarioKind::NestedFuzzy => ScenarioConfig {
                scenario,
                grid: Grid {
                    n_points: 1024,
                    dx: 0.02,
                    dt: 0.01,
                    x_min: -10.24,
                    boundary: Boundary::Absorbing,
                },
                physics: PhysicsSection::default(),
                packet: PacketSpec {
                    shape: PacketShape::TransversePhase,
                    center: 4.0,
                    width: 11.0,
                    carrier: 0.0,
                    gap_multiplier: 8,
                    count: 1,
                    weights: None,
                    lambda_par: 4.0,
                },
                sites: Vec::new(),
                run: RunSection {
                    t_end: 0.0,
                    series_stride: 1,
                },
                revival: RevivalSection::default(),
                back_reaction: BackReactionSection::default(),
                nested: NestedSection::default(),
                output: OutputSection::default(),
            },
        }
    }

    /// Resolved site list with physics-section fallbacks applied.
    pub fn resolved_sites(&self) -> Vec<AdsorptionSite> {
        self.sites
            .iter()
            .map(|s| AdsorptionSite {
                id: s.id.clone(),
                position: s.position,
                width: s.width,
                rate: s.rate.unwrap_or(1.0 / self.physics.tau),
                binding_energy: s.binding_energy.unwrap_or(self.physics.binding_energy),
                active: s.active,
            })
            .collect()
    }

    /// Photon shell thickness `w = c tau`.
    pub fn shell_thickness(&self) -> f64 {
        self.physics.c * self.physics.tau
    }

    /// Canonical TOML emission; `parse(emit(cfg)) == cfg`.
    pub fn emit(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Other(format!("emit config: {e}")))
    }

    /// SHA-256 of the canonical emission, hex, first 16 bytes.
    pub fn hash(&self) -> Result<String> {
        let text = self.emit()?;
        let digest = Sha256::digest(text.as_bytes());
        Ok(digest
            .iter()
            .take(16)
            .map(|b| format!("{b:02x}"))
            .collect())
    }

    /// Physical consistency checks shared by every scenario.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        Grid::new(g.n_points, g.dx, g.dt, g.x_min, g.boundary)?;
        let p = &self.physics;
        for (name, v) in [
            ("physics.mass", p.mass),
            ("physics.c", p.c),
            ("physics.tau", p.tau),
            ("physics.rho_floor", p.rho_floor),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InconsistentPhysics(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if p.sigma_phi < 0.0 {
            return Err(Error::InconsistentPhysics(
                "physics.sigma_phi cannot be negative".into(),
            ));
        }
        let packet_is_gridded = matches!(
            self.scenario.kind,
            ScenarioKind::TimeMeasurement | ScenarioKind::PositionMeasurement | ScenarioKind::Revival
        );
        if packet_is_gridded && self.grid.length() <= 10.0 * self.packet.width {
            return Err(Error::InconsistentPhysics(format!(
                "domain length {} must exceed 10x the packet width {}",
                self.grid.length(),
                self.packet.width
            )));
        }
        self.packet.pulse_weights()?;
        for s in &self.sites {
            let rate = s.rate.unwrap_or(1.0 / p.tau);
            if rate * g.dt > 0.1 {
                return Err(Error::InconsistentPhysics(format!(
                    "site {}: rate*dt = {:.3} exceeds 0.1",
                    s.id,
                    rate * g.dt
                )));
            }
            if s.width < 2.0 * g.dx {
                return Err(Error::InconsistentPhysics(format!(
                    "site {} width {} below 2 dx",
                    s.id, s.width
                )));
            }
        }
        if p.scheme == Scheme::SplitStep && g.boundary != Boundary::Periodic {
            return Err(Error::InconsistentPhysics(
                "split_step scheme requires a periodic grid".into(),
            ));
        }
        let bw: f64 = self.back_reaction.weights.iter().sum();
        if self.scenario.kind == ScenarioKind::BackReaction
            && ((bw - 1.0).abs() > 1e-9
                || self.back_reaction.weights.len() != 2
                || self.back_reaction.weights.iter().any(|&w| w <= 0.0))
        {
            return Err(Error::InconsistentPhysics(
                "back_reaction.weights must be two positive numbers summing to 1".into(),
            ));
        }
        Ok(())
    }
}

/// Turn a serde path like `sites.0.color` into `sites[0].color`.
fn pretty_path(path: &str) -> String {
    let mut out = String::new();
    for seg in path.split('.') {
        if seg.chars().all(|c| c.is_ascii_digit()) && !seg.is_empty() {
            out.push_str(&format!("[{seg}]"));
        } else {
            if !out.is_empty() {
                out.push('.');
            }
            out.push_str(seg);
        }
    }
    out
}

/// Parse a TOML document into a fully resolved, validated configuration.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let de = toml::de::Deserializer::parse(text).map_err(|e| Error::SchemaViolation {
        path: "<document>".into(),
        message: e.message().to_string(),
    })?;
    let raw: RawConfig =
        serde_path_to_error::deserialize(de).map_err(|e| Error::SchemaViolation {
            path: pretty_path(&e.path().to_string()),
            message: e.inner().message().to_string(),
        })?;
    let mut cfg = ScenarioConfig::defaults_for(raw.scenario.kind);
    cfg.scenario = raw.scenario;
    if let Some(g) = raw.grid {
        cfg.grid = g;
    }
    if let Some(p) = raw.physics {
        cfg.physics = p;
    }
    if let Some(p) = raw.packet {
        cfg.packet = p;
    }
    if let Some(s) = raw.sites {
        cfg.sites = s;
    }
    if let Some(r) = raw.run {
        cfg.run = r;
    }
    if let Some(r) = raw.revival {
        cfg.revival = r;
    }
    if let Some(b) = raw.back_reaction {
        cfg.back_reaction = b;
    }
    if let Some(n) = raw.nested {
        cfg.nested = n;
    }
    if let Some(o) = raw.output {
        cfg.output = o;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config("[scenario]\nkind = \"time_measurement\"\n").unwrap();
        assert_eq!(cfg.physics.mass, 1.0);
        assert_eq!(cfg.physics.c, 10.0);
        assert_eq!(cfg.packet.gap_multiplier, 8);
        assert_eq!(cfg.scenario.seed, 42);
        assert_eq!(cfg.sites.len(), 1);
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let text = r#"
[scenario]
kind = "time_measurement"

[[sites]]
id = "a"
position = 0.0
width = 0.4
color = "red"
"#;
        match parse_config(text) {
            Err(Error::SchemaViolation { path, .. }) => {
                assert_eq!(path, "sites[0].color");
            }
            other => panic!("expected schema violation, got {other:?}"),
        }
    }

    #[test]
    fn excessive_capture_rate_is_inconsistent() {
        let text = r#"
[scenario]
kind = "time_measurement"

[[sites]]
id = "a"
position = 0.0
width = 0.4
rate = 100.0
"#;
        match parse_config(text) {
            Err(Error::InconsistentPhysics(msg)) => assert!(msg.contains("rate*dt")),
            other => panic!("expected inconsistent-physics, got {other:?}"),
        }
    }

    #[test]
    fn emit_then_parse_round_trips() {
        for kind in [
            ScenarioKind::TimeMeasurement,
            ScenarioKind::PositionMeasurement,
            ScenarioKind::Revival,
            ScenarioKind::BackReaction,
            ScenarioKind::NestedFuzzy,
        ] {
            let cfg = ScenarioConfig::defaults_for(kind);
            let text = cfg.emit().unwrap();
            let back = parse_config(&text).unwrap();
            assert_eq!(cfg, back, "round trip failed for {kind:?}");
        }
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ScenarioConfig::defaults_for(ScenarioKind::Revival);
        let mut b = a.clone();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.scenario.seed = 43;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    }

    #[test]
    fn defaults_pass_validation() {
        for kind in [
            ScenarioKind::TimeMeasurement,
            ScenarioKind::PositionMeasurement,
            ScenarioKind::Revival,
            ScenarioKind::BackReaction,
            ScenarioKind::NestedFuzzy,
        ] {
            ScenarioConfig::defaults_for(kind).validate().unwrap();
        }
    }
}
