use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::{Boundary, ComplexField, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Unitary finite-difference step (Crank-Nicolson). Default.
    CrankNicolson,
    /// Spectral split-step; periodic boundaries only.
    SplitStep,
}

/// Sponge layer parameters for absorbing boundaries. The mask applied per
/// step is `exp(-strength * dt * ramp(xi)^2)` with `xi` the penetration
/// fraction into the layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpongeConfig {
    /// Fraction of the domain length taken by the layer on each side.
    pub width_fraction: f64,
    /// Damping rate at the outer edge, units 1/time.
    pub strength: f64,
}

impl Default for SpongeConfig {
    fn default() -> Self {
        SpongeConfig {
            width_fraction: 0.10,
            strength: 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    pub scheme: Scheme,
    pub mass: f64,
    /// Sampled external potential; empty means V = 0.
    #[serde(default)]
    pub potential: Vec<f64>,
    #[serde(default)]
    pub sponge: SpongeConfig,
}

impl PropagatorConfig {
    pub fn free(scheme: Scheme, mass: f64) -> Self {
        PropagatorConfig {
            scheme,
            mass,
            potential: Vec::new(),
            sponge: SpongeConfig::default(),
        }
    }
}

/// What one step removed at the boundary. Zero on periodic grids.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepOutcome {
    pub absorbed_norm: f64,
    pub absorbed_energy: f64,
}

/// A prepared propagator bound to one grid. Holds the factored step
/// operator and scratch buffers so stepping allocates nothing.
pub struct Propagator {
    grid: Grid,
    cfg: PropagatorConfig,
    kind: Kind,
    /// Sponge mask per point (1 outside the layer), None on periodic grids.
    sponge_mask: Option<Vec<f64>>,
}

enum Kind {
    Cn(CnSolver),
    Spectral(SpectralSolver),
}

impl Propagator {
    pub fn new(grid: &Grid, cfg: PropagatorConfig) -> Result<Self> {
        if !(cfg.mass > 0.0) {
            return Err(Error::InconsistentPhysics(format!(
                "mass must be positive, got {}",
                cfg.mass
            )));
        }
        if !cfg.potential.is_empty() && cfg.potential.len() != grid.n_points {
            return Err(Error::InconsistentPhysics(format!(
                "potential sampled on {} points but grid has {}",
                cfg.potential.len(),
                grid.n_points
            )));
        }
        let kind = match cfg.scheme {
            Scheme::CrankNicolson => Kind::Cn(CnSolver::new(grid, &cfg)),
            Scheme::SplitStep => {
                if grid.boundary != Boundary::Periodic {
                    return Err(Error::InconsistentPhysics(
                        "split_step scheme requires periodic boundaries".into(),
                    ));
                }
                Kind::Spectral(SpectralSolver::new(grid, &cfg))
            }
        };
        let sponge_mask = match grid.boundary {
            Boundary::Periodic => None,
            Boundary::Absorbing => Some(build_sponge_mask(grid, &cfg.sponge)),
        };
        Ok(Propagator {
            grid: grid.clone(),
            cfg,
            kind,
            sponge_mask,
        })
    }

    pub fn config(&self) -> &PropagatorConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Advance one step of `grid.dt` (or its reverse for `backward`).
    /// The unitary update must preserve norm to 1e-10; a larger drift in a
    /// single step aborts the run as an instability. Boundary absorption is
    /// applied after the unitary update and reported, not discarded.
    pub fn step(&mut self, field: &mut ComplexField, backward: bool) -> Result<StepOutcome> {
        if field.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        let norm_before = field.norm();
        match &mut self.kind {
            Kind::Cn(s) => s.step(&mut field.values, backward),
            Kind::Spectral(s) => s.step(&mut field.values, backward),
        }
        let norm_after = field.norm();
        if norm_before > 1e-300 {
            let drift = (norm_after - norm_before).abs() / norm_before;
            if drift > 1e-6 {
                return Err(Error::InstabilityDetected { drift });
            }
        }

        let mut outcome = StepOutcome::default();
        if let Some(mask) = &self.sponge_mask {
            let e_before = self.energy(field);
            let mut removed = 0.0;
            for (v, &m) in field.values.iter_mut().zip(mask.iter()) {
                if m < 1.0 {
                    let before = v.norm_sqr();
                    *v *= m;
                    removed += before - v.norm_sqr();
                }
            }
            outcome.absorbed_norm = removed * self.grid.dx;
            if outcome.absorbed_norm > 0.0 {
                outcome.absorbed_energy = e_before - self.energy(field);
            }
        }
        Ok(outcome)
    }

    /// Discrete energy `<psi|H|psi>` using the same operator the scheme
    /// steps with, so free evolution conserves it to rounding.
    pub fn energy(&self, field: &ComplexField) -> f64 {
        match &self.kind {
            Kind::Cn(_) => fd_energy(&self.grid, &self.cfg, &field.values),
            Kind::Spectral(s) => s.energy(&field.values, &self.cfg.potential, self.grid.dx),
        }
    }

    /// Field energy restricted to `[lo, hi)` plus the one-point stencil halo:
    /// the exact share of `<psi|H|psi>` that changes when values inside the
    /// window change. Used to attribute capture energy transfer per site.
    pub fn local_energy(&self, field: &ComplexField, lo: usize, hi: usize) -> f64 {
        let n = field.values.len();
        let lo = lo.saturating_sub(1);
        let hi = (hi + 1).min(n);
        let v = &field.values;
        let mut e = 0.0;
        match &self.kind {
            Kind::Cn(_) => {
                let periodic = self.grid.boundary == Boundary::Periodic;
                let coef = -1.0 / (2.0 * self.cfg.mass * self.grid.dx * self.grid.dx);
                for i in lo..hi {
                    let left = if i > 0 {
                        v[i - 1]
                    } else if periodic {
                        v[n - 1]
                    } else {
                        Complex64::default()
                    };
                    let right = if i + 1 < n {
                        v[i + 1]
                    } else if periodic {
                        v[0]
                    } else {
                        Complex64::default()
                    };
                    let mut h = (left - v[i] * 2.0 + right) * coef;
                    if !self.cfg.potential.is_empty() {
                        h += v[i] * self.cfg.potential[i];
                    }
                    e += (v[i].conj() * h).re;
                }
            }
            Kind::Spectral(sp) => {
                let t_psi = sp.kinetic_apply(v);
                for i in lo..hi {
                    let mut h = t_psi[i];
                    if !self.cfg.potential.is_empty() {
                        h += v[i] * self.cfg.potential[i];
                    }
                    e += (v[i].conj() * h).re;
                }
            }
        }
        e * self.grid.dx
    }

    /// Windowed kinetic estimate `Re <W psi| T |psi> / <W psi|psi>` over the
    /// window profile `profile` starting at grid index `lo`, using the
    /// scheme's own kinetic operator. Pins the carrier of an emitted photon
    /// so the energy audit closes.
    pub fn windowed_kinetic(&self, field: &ComplexField, lo: usize, profile: &[f64]) -> f64 {
        let v = &field.values;
        let n = v.len();
        let mut num = 0.0;
        let mut den = 0.0;
        match &self.kind {
            Kind::Cn(_) => {
                let periodic = self.grid.boundary == Boundary::Periodic;
                let coef = -1.0 / (2.0 * self.cfg.mass * self.grid.dx * self.grid.dx);
                for (k, &w) in profile.iter().enumerate() {
                    if w <= 0.0 {
                        continue;
                    }
                    let i = lo + k;
                    let left = if i > 0 {
                        v[i - 1]
                    } else if periodic {
                        v[n - 1]
                    } else {
                        Complex64::default()
                    };
                    let right = if i + 1 < n {
                        v[i + 1]
                    } else if periodic {
                        v[0]
                    } else {
                        Complex64::default()
                    };
                    let t = (left - v[i] * 2.0 + right) * coef;
                    num += w * (v[i].conj() * t).re;
                    den += w * v[i].norm_sqr();
                }
            }
            Kind::Spectral(s) => {
                let t_psi = s.kinetic_apply(v);
                for (k, &w) in profile.iter().enumerate() {
                    if w <= 0.0 {
                        continue;
                    }
                    let i = lo + k;
                    num += w * (v[i].conj() * t_psi[i]).re;
                    den += w * v[i].norm_sqr();
                }
            }
        }
        if den < 1e-300 {
            0.0
        } else {
            num / den
        }
    }
}

fn build_sponge_mask(grid: &Grid, sponge: &SpongeConfig) -> Vec<f64> {
    let n = grid.n_points;
    let width = (sponge.width_fraction * n as f64).round() as usize;
    let mut mask = vec![1.0; n];
    if width == 0 || sponge.strength <= 0.0 {
        return mask;
    }
    for j in 0..width.min(n) {
        // xi = 1 at the outer edge, 0 at the inner edge of the layer
        let xi = (width - j) as f64 / width as f64;
        let m = (-sponge.strength * grid.dt * xi * xi).exp();
        mask[j] = m;
        mask[n - 1 - j] = m;
    }
    mask
}

/// `<psi|H|psi>` for the three-point Laplacian plus sampled potential.
fn fd_energy(grid: &Grid, cfg: &PropagatorConfig, v: &[Complex64]) -> f64 {
    let t = fd_kinetic_apply(grid, cfg.mass, v);
    let dx = grid.dx;
    let mut e = 0.0;
    for i in 0..v.len() {
        let mut h = t[i];
        if !cfg.potential.is_empty() {
            h += v[i] * cfg.potential[i];
        }
        e += (v[i].conj() * h).re;
    }
    e * dx
}

fn fd_kinetic_apply(grid: &Grid, mass: f64, v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len();
    let periodic = grid.boundary == Boundary::Periodic;
    let coef = -1.0 / (2.0 * mass * grid.dx * grid.dx);
    (0..n)
        .map(|i| {
            let left = if i > 0 {
                v[i - 1]
            } else if periodic {
                v[n - 1]
            } else {
                Complex64::new(0.0, 0.0)
            };
            let right = if i + 1 < n {
                v[i + 1]
            } else if periodic {
                v[0]
            } else {
                Complex64::new(0.0, 0.0)
            };
            (left - v[i] * 2.0 + right) * coef
        })
        .collect()
}

/* Crank-Nicolson ***********************************************************/

/// Solves `(1 + i dt H / 2) psi' = (1 - i dt H / 2) psi` with a tridiagonal
/// (or cyclic tridiagonal, for periodic grids) direct solve per step.
struct CnSolver {
    n: usize,
    periodic: bool,
    /// off-diagonal of i*dt*H/2
    beta: Complex64,
    /// diagonal of i*dt*H/2 per point (includes potential)
    alpha: Vec<Complex64>,
    rhs: Vec<Complex64>,
    scratch: Vec<Complex64>,
    scratch2: Vec<Complex64>,
}

impl CnSolver {
    fn new(grid: &Grid, cfg: &PropagatorConfig) -> Self {
        let n = grid.n_points;
        let half_i_dt = Complex64::new(0.0, grid.dt / 2.0);
        let kin = 1.0 / (2.0 * cfg.mass * grid.dx * grid.dx);
        let beta = half_i_dt * (-kin);
        let alpha: Vec<Complex64> = (0..n)
            .map(|i| {
                let v = if cfg.potential.is_empty() {
                    0.0
                } else {
                    cfg.potential[i]
                };
                half_i_dt * (2.0 * kin + v)
            })
            .collect();
        CnSolver {
            n,
            periodic: grid.boundary == Boundary::Periodic,
            beta,
            alpha,
            rhs: vec![Complex64::default(); n],
            scratch: vec![Complex64::default(); n],
            scratch2: vec![Complex64::default(); n],
        }
    }

    fn step(&mut self, v: &mut [Complex64], backward: bool) {
        let n = self.n;
        let sign = if backward { -1.0 } else { 1.0 };
        let beta = self.beta * sign;
        // rhs = (1 - i dt H/2) psi
        for i in 0..n {
            let left = if i > 0 {
                v[i - 1]
            } else if self.periodic {
                v[n - 1]
            } else {
                Complex64::default()
            };
            let right = if i + 1 < n {
                v[i + 1]
            } else if self.periodic {
                v[0]
            } else {
                Complex64::default()
            };
            self.rhs[i] = v[i] * (Complex64::new(1.0, 0.0) - self.alpha[i] * sign)
                - (left + right) * beta;
        }
        if self.periodic {
            self.solve_cyclic(sign);
        } else {
            let diag: Vec<Complex64> = (0..n)
                .map(|i| Complex64::new(1.0, 0.0) + self.alpha[i] * sign)
                .collect();
            thomas(&diag, beta, &self.rhs, &mut self.scratch, v);
        }
        if self.periodic {
            v.copy_from_slice(&self.scratch2[..n]);
        }
    }

    /// Sherman-Morrison reduction of the cyclic tridiagonal system.
    fn solve_cyclic(&mut self, sign: f64) {
        let n = self.n;
        let beta = self.beta * sign;
        let gamma = -(Complex64::new(1.0, 0.0) + self.alpha[0] * sign);
        // modified diagonal
        let mut diag: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(1.0, 0.0) + self.alpha[i] * sign)
            .collect();
        diag[0] -= gamma;
        diag[n - 1] -= beta * beta / gamma;

        let mut y = vec![Complex64::default(); n];
        thomas(&diag, beta, &self.rhs, &mut self.scratch, &mut y);

        let mut u = vec![Complex64::default(); n];
        u[0] = gamma;
        u[n - 1] = beta;
        let mut z = vec![Complex64::default(); n];
        thomas(&diag, beta, &u, &mut self.scratch, &mut z);

        let frac = (y[0] + y[n - 1] * beta / gamma) / (Complex64::new(1.0, 0.0) + z[0] + z[n - 1] * beta / gamma);
        for i in 0..n {
            self.scratch2[i] = y[i] - frac * z[i];
        }
    }
}

/// Thomas algorithm for a constant-off-diagonal tridiagonal system.
fn thomas(
    diag: &[Complex64],
    off: Complex64,
    rhs: &[Complex64],
    cp: &mut [Complex64],
    out: &mut [Complex64],
) {
    let n = diag.len();
    cp[0] = off / diag[0];
    out[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - off * cp[i - 1];
        cp[i] = off / m;
        out[i] = (rhs[i] - off * out[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        let next = out[i + 1];
        out[i] -= cp[i] * next;
    }
}

/* Spectral split-step ******************************************************/

struct SpectralSolver {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    half_v_phase: Vec<Complex64>,
    kinetic_phase: Vec<Complex64>,
    k_sq_over_2m: Vec<f64>,
    inv_n: f64,
}

impl SpectralSolver {
    fn new(grid: &Grid, cfg: &PropagatorConfig) -> Self {
        let n = grid.n_points;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let dk = 2.0 * std::f64::consts::PI / grid.length();
        let k_sq_over_2m: Vec<f64> = (0..n)
            .map(|j| {
                let k = if j <= n / 2 {
                    j as f64 * dk
                } else {
                    (j as f64 - n as f64) * dk
                };
                k * k / (2.0 * cfg.mass)
            })
            .collect();
        let kinetic_phase = k_sq_over_2m
            .iter()
            .map(|&e| Complex64::from_polar(1.0, -e * grid.dt))
            .collect();
        let half_v_phase = (0..n)
            .map(|i| {
                let v = if cfg.potential.is_empty() {
                    0.0
                } else {
                    cfg.potential[i]
                };
                Complex64::from_polar(1.0, -v * grid.dt / 2.0)
            })
            .collect();
        SpectralSolver {
            n,
            fft,
            ifft,
            half_v_phase,
            kinetic_phase,
            k_sq_over_2m,
            inv_n: 1.0 / n as f64,
        }
    }

    fn step(&mut self, v: &mut [Complex64], backward: bool) {
        let conj_if = |c: Complex64| if backward { c.conj() } else { c };
        for (x, &p) in v.iter_mut().zip(&self.half_v_phase) {
            *x *= conj_if(p);
        }
        self.fft.process(v);
        for (x, &p) in v.iter_mut().zip(&self.kinetic_phase) {
            *x *= conj_if(p);
        }
        self.ifft.process(v);
        for x in v.iter_mut() {
            *x *= self.inv_n;
        }
        for (x, &p) in v.iter_mut().zip(&self.half_v_phase) {
            *x *= conj_if(p);
        }
    }

    fn energy(&self, v: &[Complex64], potential: &[f64], dx: f64) -> f64 {
        let t = self.kinetic_apply(v);
        let mut e = 0.0;
        for i in 0..self.n {
            let mut h = t[i];
            if !potential.is_empty() {
                h += v[i] * potential[i];
            }
            e += (v[i].conj() * h).re;
        }
        e * dx
    }

    fn kinetic_apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut buf = v.to_vec();
        self.fft.process(&mut buf);
        for (x, &e) in buf.iter_mut().zip(&self.k_sq_over_2m) {
            *x *= e;
        }
        self.ifft.process(&mut buf);
        for x in buf.iter_mut() {
            *x *= self.inv_n;
        }
        buf
    }
}
