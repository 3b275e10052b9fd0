use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShellGeometry {
    /// Analytic spherical shell; overlap metrics use volume fractions.
    Radial3d,
    /// Two counter-propagating 1D fronts; overlap metrics use envelope
    /// correlations. Used by interference experiments.
    Line1d,
}

/// An emitted outgoing photon wavepacket, kept parametric: radius
/// `R = c (t - t0)`, trailing envelope of thickness `w = c tau`.
///
/// Transport never changes the weight; radius and carrier phase are
/// recomputed from the birth time, so advancing by t1 then t2 is exactly
/// advancing by t1 + t2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonShell {
    pub origin_site: String,
    pub origin_x: f64,
    pub birth_time: f64,
    /// Carrier frequency omega.
    pub carrier: f64,
    /// Radial thickness `w = c * tau`.
    pub thickness: f64,
    /// Phase at birth.
    pub phase0: f64,
    pub weight: f64,
    pub geometry: ShellGeometry,
    /// Current radius, `c * (t - birth_time)`.
    pub radius: f64,
    /// Current carrier phase, `phase0 - carrier * (t - birth_time)`.
    pub phase: f64,
    /// Polarization direction tag; inert in 1D, carried for bookkeeping.
    pub polarization: [f64; 3],
}

impl PhotonShell {
    pub fn new(
        origin_site: &str,
        origin_x: f64,
        birth_time: f64,
        carrier: f64,
        thickness: f64,
        phase0: f64,
        weight: f64,
        geometry: ShellGeometry,
    ) -> Self {
        PhotonShell {
            origin_site: origin_site.to_string(),
            origin_x,
            birth_time,
            carrier,
            thickness,
            phase0,
            weight,
            geometry,
            radius: 0.0,
            phase: phase0,
            polarization: [0.0, 0.0, 1.0],
        }
    }
}

/// Transport every shell to absolute time `t` at speed `c`.
/// Requires `t >= birth_time` for each shell.
pub fn advance_shells(shells: &[PhotonShell], t: f64, c: f64) -> Vec<PhotonShell> {
    shells
        .iter()
        .map(|s| {
            let dt = t - s.birth_time;
            debug_assert!(dt >= -1e-12, "shell advanced before its birth");
            let mut out = s.clone();
            out.radius = c * dt.max(0.0);
            out.phase = s.phase0 - s.carrier * dt.max(0.0);
            out
        })
        .collect()
}

/// Radiated envelope `sqrt(1/tau) e^{-t/(2 tau)} e^{-i omega t}` for
/// `t_rel >= 0`; zero before emission. Unit L2 norm over [0, inf).
pub fn emission_envelope(t_rel: f64, tau: f64, omega: f64) -> Complex64 {
    assert!(tau > 0.0, "envelope duration must be positive");
    if t_rel < 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let amp = (1.0 / tau).sqrt() * (-t_rel / (2.0 * tau)).exp();
    Complex64::from_polar(amp, -omega * t_rel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shell(birth: f64) -> PhotonShell {
        PhotonShell::new("a", 0.0, birth, 3.0, 1.0, 0.25, 0.5, ShellGeometry::Radial3d)
    }

    #[test]
    fn radius_zero_at_birth() {
        let s = advance_shells(&[shell(2.0)], 2.0, 10.0);
        assert_eq!(s[0].radius, 0.0);
    }

    #[test]
    fn radius_is_c_times_elapsed() {
        let s = advance_shells(&[shell(0.0)], 3.0, 10.0);
        assert_eq!(s[0].radius, 30.0);
        assert_eq!(s[0].phase, 0.25 - 3.0 * 3.0);
        assert_eq!(s[0].weight, 0.5);
    }

    #[test]
    fn joint_transport_preserves_radius_difference() {
        let shells = vec![shell(0.0), shell(0.7)];
        for t in [1.0, 2.5, 9.0] {
            let out = advance_shells(&shells, t, 4.0);
            let dr = out[0].radius - out[1].radius;
            assert!((dr - 4.0 * 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn transport_composes_exactly() {
        let s0 = vec![shell(0.0)];
        let once = advance_shells(&s0, 5.0, 10.0);
        let twice = advance_shells(&advance_shells(&s0, 2.0, 10.0), 5.0, 10.0);
        assert_eq!(once, twice);
    }

    #[test]
    fn envelope_is_normalized() {
        let tau = 0.8;
        let tmax = 50.0 * tau;
        let n = 200_000;
        let dt = tmax / n as f64;
        let total: f64 = (0..n)
            .map(|i| emission_envelope((i as f64 + 0.5) * dt, tau, 2.0).norm_sqr() * dt)
            .sum();
        assert!((total - 1.0).abs() < 1e-6, "integral {total}");
    }

    #[test]
    fn envelope_decays_by_sqrt_e_at_tau() {
        let tau = 1.3;
        let r = emission_envelope(tau, tau, 5.0).norm() / emission_envelope(0.0, tau, 5.0).norm();
        assert!((r - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn zero_carrier_envelope_is_positive_real() {
        for i in 0..50 {
            let e = emission_envelope(i as f64 * 0.1, 1.0, 0.0);
            assert!(e.im == 0.0 && e.re > 0.0);
        }
    }
}
