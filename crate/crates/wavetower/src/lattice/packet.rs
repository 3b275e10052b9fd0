use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ComplexField, Grid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketShape {
    Gaussian,
    PulseTrain,
    /// Broad envelope with a slow phase oscillation along the screen
    /// coordinate; used by the delocalized-device scenario.
    TransversePhase,
}

/// Declarative description of an initial packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    pub shape: PacketShape,
    /// Gaussian center, or center of the leading pulse of a train.
    pub center: f64,
    /// Gaussian sigma, or full support width `w` of one pulse.
    pub width: f64,
    /// Carrier wavenumber k0.
    #[serde(default)]
    pub carrier: f64,
    /// Gap multiplier `n`: successive pulse centers sit `(n+2)*w` apart,
    /// i.e. a clear gap of `(n+1)*w` between supports, so capture events
    /// land `(n+2)*w/v` apart in time.
    #[serde(default = "default_gap")]
    pub gap_multiplier: u32,
    #[serde(default = "default_count")]
    pub count: u32,
    /// Per-pulse norms; defaults to equal shares summing to 1.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Slow oscillation wavelength for `TransversePhase`.
    #[serde(default)]
    pub lambda_par: f64,
}

fn default_gap() -> u32 {
    8
}
fn default_count() -> u32 {
    2
}

impl PacketSpec {
    pub fn gaussian(center: f64, sigma: f64, carrier: f64) -> Self {
        PacketSpec {
            shape: PacketShape::Gaussian,
            center,
            width: sigma,
            carrier,
            gap_multiplier: default_gap(),
            count: 1,
            weights: None,
            lambda_par: 0.0,
        }
    }

    pub fn pulse_train(center: f64, width: f64, gap_multiplier: u32, count: u32, carrier: f64) -> Self {
        PacketSpec {
            shape: PacketShape::PulseTrain,
            center,
            width,
            carrier,
            gap_multiplier,
            count,
            weights: None,
            lambda_par: 0.0,
        }
    }

    /// Center-to-center pulse spacing.
    pub fn pulse_separation(&self) -> f64 {
        (self.gap_multiplier as f64 + 2.0) * self.width
    }

    /// Center of pulse `i`; pulse 0 leads the train toward the detector,
    /// later pulses trail behind against the direction of travel.
    pub fn pulse_center(&self, i: usize) -> f64 {
        let dir = if self.carrier < 0.0 { 1.0 } else { -1.0 };
        self.center + dir * i as f64 * self.pulse_separation()
    }

    pub fn pulse_weights(&self) -> Result<Vec<f64>> {
        match &self.weights {
            None => Ok(vec![1.0 / self.count as f64; self.count as usize]),
            Some(w) => {
                if w.len() != self.count as usize {
                    return Err(Error::InconsistentPhysics(format!(
                        "{} pulse weights for count {}",
                        w.len(),
                        self.count
                    )));
                }
                let s: f64 = w.iter().sum();
                if (s - 1.0).abs() > 1e-9 || w.iter().any(|&x| x <= 0.0) {
                    return Err(Error::InconsistentPhysics(
                        "pulse weights must be positive and sum to 1".into(),
                    ));
                }
                Ok(w.clone())
            }
        }
    }
}

/// Smooth compact bump standing in for a finite-width delta: a raised-cosine
/// amplitude profile of full support `width`, normalized to unit norm on the
/// grid. Compact support keeps spectral content bounded.
pub fn raised_cosine_bump(grid: &Grid, center: f64, width: f64) -> ComplexField {
    let mut f = ComplexField::zeros(grid);
    let half = width / 2.0;
    let (lo, hi) = grid.window_indices(center, half);
    for i in lo..hi {
        let xi = (grid.x(i) - center) / width;
        let a = 0.5 * (1.0 + (2.0 * std::f64::consts::PI * xi).cos());
        f.values[i] = Complex64::new(a, 0.0);
    }
    f.normalize_to(1.0);
    f
}

/// Unit-norm Gaussian `exp(-(x-x0)^2/(4 sigma^2) + i k0 x)`.
///
/// The position spread of `|psi|^2` is `sigma`, so free spreading follows
/// `sigma(t)^2 = sigma0^2 + (t / (2 m sigma0))^2`.
pub fn make_gaussian(grid: &Grid, x0: f64, sigma: f64, k0: f64) -> Result<ComplexField> {
    if !(sigma > 0.0) {
        return Err(Error::InconsistentPhysics(format!("sigma must be positive, got {sigma}")));
    }
    if 4.0 * sigma >= grid.length() {
        return Err(Error::PacketTooWide(format!(
            "4 sigma = {} exceeds domain length {}",
            4.0 * sigma,
            grid.length()
        )));
    }
    if x0 <= grid.x_min || x0 >= grid.x_max() {
        return Err(Error::PacketTooWide(format!("center {x0} outside grid interior")));
    }
    let mut f = ComplexField::zeros(grid);
    for i in 0..grid.n_points {
        let x = grid.x(i);
        let arg = -(x - x0).powi(2) / (4.0 * sigma * sigma);
        f.values[i] = Complex64::from_polar(arg.exp(), k0 * x);
    }
    f.normalize_to(1.0);
    Ok(f)
}

/// A train of `count` disjoint raised-cosine pulses sharing one carrier.
/// Each pulse is normalized to its own weight within its support, so the
/// per-region norms are exact by construction and the total norm is 1.
pub fn make_pulse_train(grid: &Grid, spec: &PacketSpec) -> Result<ComplexField> {
    if spec.count < 1 {
        return Err(Error::InconsistentPhysics("pulse count must be >= 1".into()));
    }
    if spec.count > 1 && spec.gap_multiplier < 2 {
        return Err(Error::OverlapOfPulses(format!(
            "gap multiplier {} < 2 leaves pulses unresolved",
            spec.gap_multiplier
        )));
    }
    let weights = spec.pulse_weights()?;
    let mut f = ComplexField::zeros(grid);
    for (i, &wi) in weights.iter().enumerate() {
        let c = spec.pulse_center(i);
        grid.check_support(c, spec.width)?;
        let mut bump = raised_cosine_bump(grid, c, spec.width);
        bump.normalize_to(wi);
        for (j, v) in bump.values.iter().enumerate() {
            if v.norm_sqr() > 0.0 {
                if f.values[j].norm_sqr() > 0.0 {
                    return Err(Error::OverlapOfPulses(format!(
                        "pulse {i} support collides with an earlier pulse"
                    )));
                }
                let x = grid.x(j);
                f.values[j] = v * Complex64::from_polar(1.0, spec.carrier * x);
            }
        }
    }
    Ok(f)
}

/// Broad flat-top envelope carrying a slow transverse phase `e^{i 2 pi x / lambda_par}`.
pub fn make_transverse_phase(grid: &Grid, spec: &PacketSpec) -> Result<ComplexField> {
    if !(spec.lambda_par > 0.0) {
        return Err(Error::InconsistentPhysics(
            "transverse_phase packet needs lambda_par > 0".into(),
        ));
    }
    grid.check_support(spec.center, spec.width)?;
    let mut f = ComplexField::zeros(grid);
    let half = spec.width / 2.0;
    let taper = 0.1 * spec.width;
    let (lo, hi) = grid.window_indices(spec.center, half);
    for i in lo..hi {
        let x = grid.x(i);
        let edge = half - (x - spec.center).abs();
        let env = if edge >= taper {
            1.0
        } else {
            let u = edge / taper;
            0.5 * (1.0 - (std::f64::consts::PI * u).cos())
        };
        let phase = 2.0 * std::f64::consts::PI * x / spec.lambda_par;
        f.values[i] = Complex64::from_polar(env, phase);
    }
    f.normalize_to(1.0);
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{field_norm, Boundary};

    fn grid() -> Grid {
        Grid::new(4096, 0.01, 1e-3, -20.48, Boundary::Absorbing).unwrap()
    }

    #[test]
    fn gaussian_is_unit_norm_and_centered() {
        let g = grid();
        let f = make_gaussian(&g, 0.0, 1.0, 0.0).unwrap();
        assert!((field_norm(&f) - 1.0).abs() < 1e-12);
        assert!(crate::lattice::expectation_position(&f).abs() < 1e-10);
    }

    #[test]
    fn gaussian_momentum_matches_carrier() {
        // Independent discrete <-i d/dx> oracle: spectral first moment.
        let g = Grid::new(1024, 0.04, 1e-3, -20.48, Boundary::Periodic).unwrap();
        let k0 = 5.0;
        let f = make_gaussian(&g, 0.0, 1.0, k0).unwrap();
        let k_mean = spectral_momentum(&f);
        assert!((k_mean - k0).abs() < 1e-6, "k_mean={k_mean}");
        // conjugation flips the carrier sign
        let k_conj = spectral_momentum(&f.conjugate());
        assert!((k_conj + k0).abs() < 1e-6);
    }

    fn spectral_momentum(f: &ComplexField) -> f64 {
        use rustfft::FftPlanner;
        let n = f.values.len();
        let mut buf = f.values.clone();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let dk = 2.0 * std::f64::consts::PI / f.grid.length();
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, v) in buf.iter().enumerate() {
            let k = if j <= n / 2 {
                j as f64 * dk
            } else {
                (j as f64 - n as f64) * dk
            };
            let p = v.norm_sqr();
            num += k * p;
            den += p;
        }
        num / den
    }

    #[test]
    fn too_wide_gaussian_is_rejected() {
        let g = grid();
        assert!(matches!(
            make_gaussian(&g, 0.0, 15.0, 0.0),
            Err(Error::PacketTooWide(_))
        ));
    }

    #[test]
    fn two_equal_pulses_carry_half_norm_each() {
        let g = grid();
        let spec = PacketSpec::pulse_train(6.0, 1.0, 4, 2, 1.0);
        let f = make_pulse_train(&g, &spec).unwrap();
        assert!((field_norm(&f) - 1.0).abs() < 1e-12);
        for i in 0..2 {
            let c = spec.pulse_center(i);
            let (lo, hi) = g.window_indices(c, spec.width / 2.0);
            let w = f.norm_in(lo, hi);
            assert!((w - 0.5).abs() < 1e-10, "pulse {i} norm {w}");
        }
    }

    #[test]
    fn single_pulse_has_unit_norm() {
        let g = grid();
        let spec = PacketSpec::pulse_train(0.0, 1.0, 8, 1, 0.0);
        let f = make_pulse_train(&g, &spec).unwrap();
        assert!((field_norm(&f) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn requested_weights_become_region_norms() {
        let g = grid();
        let mut spec = PacketSpec::pulse_train(6.0, 1.0, 4, 2, 1.0);
        spec.weights = Some(vec![0.8, 0.2]);
        let f = make_pulse_train(&g, &spec).unwrap();
        let expected = [0.8, 0.2];
        for i in 0..2 {
            let (lo, hi) = g.window_indices(spec.pulse_center(i), spec.width / 2.0);
            assert!((f.norm_in(lo, hi) - expected[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn unresolved_gap_is_rejected() {
        let g = grid();
        let spec = PacketSpec::pulse_train(0.0, 1.0, 1, 2, 0.0);
        assert!(matches!(
            make_pulse_train(&g, &spec),
            Err(Error::OverlapOfPulses(_))
        ));
    }

    #[test]
    fn pulse_centers_sit_n_plus_two_widths_apart() {
        let spec = PacketSpec::pulse_train(0.0, 2.0, 8, 2, 1.0);
        assert_eq!(spec.pulse_separation(), 20.0);
        assert_eq!(spec.pulse_center(0), 0.0);
        assert_eq!(spec.pulse_center(1), -20.0);
    }
}
