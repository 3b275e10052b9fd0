//! Overlap metrics between branches.
//!
//! The photon-sector overlap of two branches is geometric: two spherical
//! shells of common radius R and radial thickness w whose centers sit D
//! apart intersect in a ring whose volume, relative to one shell's volume,
//! is what survives of the branches' indistinguishability. The exact value
//! comes from the two-center volume element dV = 2 pi u v / D du dv, which
//! reduces the intersection to a polynomial integral evaluated here by
//! piecewise Gauss-Legendre quadrature (exact for the cubic integrand).

use crate::evolve::{PhotonShell, ShellGeometry};
use crate::tower::BranchRecord;

/// Normalized intersection of two spherical shells of outer radius `r`,
/// thickness `w` (support `[r-w, r]`), centers `d` apart:
/// overlap volume / shell volume. 1 at d = 0, 0 once d >= 2r.
pub fn shell_overlap_fraction(r: f64, w: f64, d: f64) -> f64 {
    assert!(r > 0.0 && w > 0.0, "shell needs positive radius and thickness");
    assert!(d >= 0.0, "center distance cannot be negative");
    let a = (r - w).max(0.0);
    if d >= 2.0 * r {
        return 0.0;
    }
    if d < 1e-12 * r.max(w) {
        return 1.0;
    }
    // V = (2 pi / d) * Int_a^r u * I(u) du,
    // I(u) = Int v dv over [max(a, d-u, u-d), min(r, u+d)].
    let lo_v = |u: f64| a.max(d - u).max(u - d);
    let hi_v = |u: f64| r.min(u + d);
    let integrand = |u: f64| {
        let lo = lo_v(u);
        let hi = hi_v(u);
        if hi > lo {
            u * 0.5 * (hi * hi - lo * lo)
        } else {
            0.0
        }
    };
    // Breakpoints where the active bounds switch; the integrand is a single
    // polynomial between consecutive ones.
    let mut cuts = vec![a, r, d - a, d - r, d, d + a, r - d, d + r, d / 2.0];
    cuts.retain(|&x| x.is_finite());
    for c in cuts.iter_mut() {
        *c = c.clamp(a, r);
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-14 * r);

    // 3-point Gauss-Legendre per piece: exact through degree 5.
    const GL_X: [f64; 3] = [-0.774596669241483, 0.0, 0.774596669241483];
    const GL_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let mut integral = 0.0;
    for pair in cuts.windows(2) {
        let (x0, x1) = (pair[0], pair[1]);
        let h = 0.5 * (x1 - x0);
        let m = 0.5 * (x1 + x0);
        if h <= 0.0 {
            continue;
        }
        for (gx, gw) in GL_X.iter().zip(GL_W) {
            integral += gw * h * integrand(m + h * gx);
        }
    }
    let overlap_volume = 2.0 * std::f64::consts::PI / d * integral;
    let shell_volume = 4.0 * std::f64::consts::PI / 3.0 * (r.powi(3) - a.powi(3));
    (overlap_volume / shell_volume).clamp(0.0, 1.0)
}

/// Envelope correlation of two 1D shells: each shell is a pair of
/// counter-propagating exponential-envelope fronts, so the magnitude of the
/// overlap is the mean of the front correlations `exp(-|lag| / (2 w))`, with
/// a Lorentzian penalty when the carriers differ (`tau = w / c`).
fn line_shell_overlap(a: &PhotonShell, b: &PhotonShell, c: f64) -> f64 {
    let w = 0.5 * (a.thickness + b.thickness);
    if w <= 0.0 {
        return 0.0;
    }
    let right = ((a.origin_x + a.radius) - (b.origin_x + b.radius)).abs();
    let left = ((a.origin_x - a.radius) - (b.origin_x - b.radius)).abs();
    let corr = 0.5 * ((-right / (2.0 * w)).exp() + (-left / (2.0 * w)).exp());
    let detune_tau = (a.carrier - b.carrier) * w / c;
    corr / (1.0 + detune_tau * detune_tau).sqrt()
}

/// Overlap of one shell pair, dispatching on geometry. For radial shells a
/// radius mismatch and a center offset combine as a single effective
/// displacement `sqrt(D^2 + dR^2)`.
pub fn shell_pair_overlap(a: &PhotonShell, b: &PhotonShell, c: f64) -> f64 {
    match (a.geometry, b.geometry) {
        (ShellGeometry::Line1d, ShellGeometry::Line1d) => line_shell_overlap(a, b, c),
        _ => {
            let d_centers = (a.origin_x - b.origin_x).abs();
            let d_radii = a.radius - b.radius;
            let d_eff = (d_centers * d_centers + d_radii * d_radii).sqrt();
            let r = 0.5 * (a.radius + b.radius);
            let w = 0.5 * (a.thickness + b.thickness);
            if r <= 0.0 || d_eff < 1e-300 {
                return 1.0;
            }
            shell_overlap_fraction(r.max(1e-12), w, d_eff)
        }
    }
}

/// 1 minus the product of factor-wise overlaps: bound markers (0 unless the
/// marker sets match), photon-count superselection (branches with different
/// counts never overlap), and the in-flight shell overlaps. Shells must
/// already be advanced to a common time.
pub fn branch_distinguishability(a: &BranchRecord, b: &BranchRecord, c: f64) -> f64 {
    if a.photon_count != b.photon_count {
        return 1.0;
    }
    if a.marker_key() != b.marker_key() {
        return 1.0;
    }
    let mut overlap = 1.0;
    for (sa, sb) in a.shells.iter().zip(&b.shells) {
        overlap *= shell_pair_overlap(sa, sb, c);
    }
    (1.0 - overlap.abs()).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tower::{BranchState, Marker};
    use num_complex::Complex64;

    #[test]
    fn identical_shells_overlap_fully() {
        assert_eq!(shell_overlap_fraction(10.0, 0.5, 0.0), 1.0);
    }

    #[test]
    fn distant_shells_do_not_overlap() {
        assert_eq!(shell_overlap_fraction(10.0, 0.5, 20.6), 0.0);
        assert_eq!(shell_overlap_fraction(10.0, 0.5, 25.0), 0.0);
    }

    #[test]
    fn closed_form_matches_thin_shell_regime() {
        // For w << d << r the fraction approaches w / (2 d).
        let (r, w, d) = (200.0, 0.25, 8.0);
        let f = shell_overlap_fraction(r, w, d);
        let expected = 3.0 * w * (2.0 * r - w).powi(2)
            / (8.0 * d * (3.0 * r * r - 3.0 * r * w + w * w));
        assert!((f - expected).abs() < 1e-12, "f={f} expected={expected}");
        assert!((f - w / (2.0 * d)).abs() / f < 1e-2);
    }

    #[test]
    fn near_concentric_limit_matches() {
        // d << w: fraction -> (2w - d) / (2w) + O(w/r).
        let (r, w, d) = (100.0, 2.0, 0.5);
        let f = shell_overlap_fraction(r, w, d);
        let expected = (2.0 * w - d) / (2.0 * w);
        assert!((f - expected).abs() < 2e-2, "f={f} expected={expected}");
    }

    #[test]
    fn fraction_monotone_in_distance() {
        let mut prev = 1.0;
        for i in 0..60 {
            let d = i as f64 * 0.5;
            let f = shell_overlap_fraction(12.0, 1.0, d);
            assert!(f <= prev + 1e-12, "not monotone at d={d}");
            prev = f;
        }
    }

    fn branch(id: u32, count: u32, marker: &str, shells: Vec<PhotonShell>) -> BranchRecord {
        BranchRecord {
            id,
            parent: None,
            weight: 0.5,
            phase: 0.0,
            photon_count: count,
            shells,
            markers: vec![Marker::Site {
                id: marker.into(),
                position: 0.0,
                width: 1.0,
            }],
            created_at: 0.0,
            event_time: 0.0,
            kinetic: 0.0,
            binding_energy: 1.0,
            state: BranchState::Bound,
            released_from: None,
            phasor: Complex64::default(),
            time_weight: 0.0,
            kinetic_weight: 0.0,
            energy_removed: 0.0,
        }
    }

    fn shell_at(x: f64, birth: f64, t: f64, c: f64, w: f64) -> PhotonShell {
        let mut s = PhotonShell::new("s", x, birth, 2.0, w, 0.0, 0.5, ShellGeometry::Radial3d);
        s.radius = c * (t - birth);
        s
    }

    #[test]
    fn different_sites_are_fully_distinct() {
        let a = branch(0, 1, "left", vec![shell_at(-2.0, 0.0, 5.0, 10.0, 1.0)]);
        let b = branch(1, 1, "right", vec![shell_at(2.0, 0.0, 5.0, 10.0, 1.0)]);
        assert_eq!(branch_distinguishability(&a, &b, 10.0), 1.0);
    }

    #[test]
    fn a_branch_is_indistinguishable_from_itself() {
        let a = branch(0, 1, "x", vec![shell_at(0.0, 0.0, 5.0, 10.0, 1.0)]);
        assert_eq!(branch_distinguishability(&a, &a, 10.0), 0.0);
    }

    #[test]
    fn unequal_photon_counts_are_superselected() {
        let a = branch(0, 1, "x", vec![shell_at(0.0, 0.0, 5.0, 10.0, 1.0)]);
        let b = branch(1, 2, "x", vec![shell_at(0.0, 0.0, 5.0, 10.0, 1.0)]);
        assert_eq!(branch_distinguishability(&a, &b, 10.0), 1.0);
    }

    #[test]
    fn same_site_shells_born_apart_use_radial_offset() {
        let c = 10.0;
        let w = 5.0;
        let t = 3.0;
        let dt_birth = 0.2;
        let a = branch(0, 1, "x", vec![shell_at(0.0, 0.0, t, c, w)]);
        let b = branch(1, 1, "x", vec![shell_at(0.0, dt_birth, t, c, w)]);
        let d = branch_distinguishability(&a, &b, c);
        let r_mean = 0.5 * (c * t + c * (t - dt_birth));
        let expected = 1.0 - shell_overlap_fraction(r_mean, w, c * dt_birth);
        assert!((d - expected).abs() < 1e-12);
    }

    #[test]
    fn distinguishability_grows_with_birth_separation() {
        let c = 10.0;
        let t = 50.0;
        let mut prev = -1.0;
        for k in 0..25 {
            let dt_birth = k as f64 * 0.4;
            let a = branch(0, 1, "x", vec![shell_at(0.0, 0.0, t, c, 5.0)]);
            let b = branch(1, 1, "x", vec![shell_at(0.0, dt_birth, t, c, 5.0)]);
            let d = branch_distinguishability(&a, &b, c);
            assert!(d >= prev - 1e-9, "not monotone at dt={dt_birth}");
            prev = d;
        }
        assert!(prev > 0.9, "widely separated births should be near 1");
    }
}
