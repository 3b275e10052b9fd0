use num_complex::Complex64;

use super::{Boundary, Grid};
use crate::error::{Error, Result};

/// A complex wavefunction sampled on a [`Grid`]. Values carry units of
/// length^(-1/2) so that `sum |f|^2 dx` is dimensionless.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: &Grid) -> Self {
        ComplexField {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.n_points],
        }
    }

    pub fn norm(&self) -> f64 {
        field_norm(self)
    }

    /// Scale so the discrete norm is exactly `target`. No-op on a null field.
    pub fn normalize_to(&mut self, target: f64) {
        let n = self.norm();
        if n > 0.0 {
            let s = (target / n).sqrt();
            for v in &mut self.values {
                *v *= s;
            }
        }
    }

    pub fn conjugate(&self) -> Self {
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    /// Pointwise accumulate `self += other` (grids must match).
    pub fn add_assign_field(&mut self, other: &ComplexField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    /// `sum_W |f|^2 dx` over the window `[lo, hi)`.
    pub fn norm_in(&self, lo: usize, hi: usize) -> f64 {
        let dx = self.grid.dx;
        self.values[lo..hi].iter().map(|v| v.norm_sqr()).sum::<f64>() * dx
    }
}

/// Discrete norm `sum |f|^2 dx`.
pub fn field_norm(f: &ComplexField) -> f64 {
    f.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * f.grid.dx
}

/// Discrete inner product `sum conj(f) g dx`; conjugate-symmetric.
pub fn inner_product(f: &ComplexField, g: &ComplexField) -> Result<Complex64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    let s: Complex64 = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok(s * f.grid.dx)
}

/// `<x> = sum x |f|^2 dx / norm`.
pub fn expectation_position(f: &ComplexField) -> f64 {
    let dx = f.grid.dx;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, v) in f.values.iter().enumerate() {
        let p = v.norm_sqr();
        num += f.grid.x(i) * p;
        den += p;
    }
    if den == 0.0 {
        0.0
    } else {
        num * dx / (den * dx)
    }
}

/// Spatial derivative, 4th-order central stencil. Points near a Dirichlet
/// edge fall back to the field vanishing outside; periodic grids wrap.
fn derivative(f: &ComplexField) -> Vec<Complex64> {
    let n = f.values.len();
    let dx = f.grid.dx;
    let periodic = f.grid.boundary == Boundary::Periodic;
    let at = |i: isize| -> Complex64 {
        if periodic {
            f.values[i.rem_euclid(n as isize) as usize]
        } else if i < 0 || i >= n as isize {
            Complex64::new(0.0, 0.0)
        } else {
            f.values[i as usize]
        }
    };
    (0..n as isize)
        .map(|i| {
            (at(i - 2) - at(i - 1) * 8.0 + at(i + 1) * 8.0 - at(i + 2)) / (12.0 * dx)
        })
        .collect()
}

/// Local velocity field `v = j / rho` with `j = Im(conj(psi) d_x psi) / m`.
///
/// Points where the density sits below `rho_floor` are masked (`None`):
/// the ratio there is numerical noise, not a velocity.
pub fn local_velocity(f: &ComplexField, mass: f64, rho_floor: f64) -> Vec<Option<f64>> {
    let d = derivative(f);
    f.values
        .iter()
        .zip(d)
        .map(|(v, dv)| {
            let rho = v.norm_sqr();
            if rho <= rho_floor {
                None
            } else {
                Some((v.conj() * dv).im / (mass * rho))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_gaussian, make_pulse_train, PacketSpec};

    fn grid(n: usize, dx: f64, boundary: Boundary) -> Grid {
        Grid::new(n, dx, 1e-3, -(n as f64) * dx / 2.0, boundary).unwrap()
    }

    #[test]
    fn inner_product_of_self_is_norm() {
        let g = grid(512, 0.05, Boundary::Absorbing);
        let f = make_gaussian(&g, 0.0, 1.0, 2.0).unwrap();
        let ip = inner_product(&f, &f).unwrap();
        assert!((ip.re - field_norm(&f)).abs() < 1e-14);
        assert!(ip.im.abs() < 1e-14);
    }

    #[test]
    fn disjoint_pulses_are_orthogonal() {
        let g = grid(2048, 0.02, Boundary::Absorbing);
        let spec = PacketSpec::pulse_train(3.0, 1.0, 4, 2, 0.0);
        let train = make_pulse_train(&g, &spec).unwrap();
        // Isolate the two pulse regions and check the cross inner product.
        let mut a = train.clone();
        let mut b = train.clone();
        let mid = g.n_points / 2;
        for v in &mut a.values[mid..] {
            *v = Complex64::new(0.0, 0.0);
        }
        for v in &mut b.values[..mid] {
            *v = Complex64::new(0.0, 0.0);
        }
        let ip = inner_product(&a, &b).unwrap();
        assert!(ip.norm() < 1e-14);
    }

    #[test]
    fn expectation_position_symmetric_train_is_zero() {
        let g = grid(2048, 0.02, Boundary::Absorbing);
        let spec = PacketSpec::pulse_train(3.0, 1.0, 4, 2, 0.0);
        let train = make_pulse_train(&g, &spec).unwrap();
        // centers at +3 and -3: symmetric about 0 on the cell-centered grid
        assert!(expectation_position(&train).abs() < 1e-10);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let g1 = grid(512, 0.05, Boundary::Absorbing);
        let g2 = grid(512, 0.04, Boundary::Absorbing);
        let f1 = make_gaussian(&g1, 0.0, 1.0, 0.0).unwrap();
        let f2 = make_gaussian(&g2, 0.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            inner_product(&f1, &f2),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn plane_wave_velocity_equals_k_over_m() {
        // Lattice mode k = 2 pi m / L on a periodic grid.
        let n = 2048;
        let dx = 0.02;
        let g = grid(n, dx, Boundary::Periodic);
        let length = g.length();
        let k = 2.0 * std::f64::consts::PI * 6.0 / length;
        let mut f = ComplexField::zeros(&g);
        for i in 0..n {
            let x = g.x(i);
            f.values[i] = Complex64::from_polar(1.0, k * x);
        }
        f.normalize_to(1.0);
        for m in [1.0, 2.5] {
            let v = local_velocity(&f, m, 1e-12);
            for vi in &v {
                let vi = vi.expect("plane wave never masked");
                assert!(
                    (vi - k / m).abs() < 1e-8,
                    "v={vi} expected {}",
                    k / m
                );
            }
        }
    }

    #[test]
    fn real_field_has_zero_velocity() {
        let g = grid(512, 0.05, Boundary::Absorbing);
        let f = make_gaussian(&g, 0.0, 1.0, 0.0).unwrap();
        for v in local_velocity(&f, 1.0, 1e-12).iter().flatten() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_velocity_at_peak_is_carrier_over_mass() {
        let g = grid(4096, 0.01, Boundary::Absorbing);
        let k0 = 1.5;
        let m = 2.0;
        let f = make_gaussian(&g, 0.0, 1.0, k0).unwrap();
        let v = local_velocity(&f, m, 1e-12);
        let peak = (0..g.n_points)
            .max_by(|&a, &b| {
                f.values[a]
                    .norm_sqr()
                    .partial_cmp(&f.values[b].norm_sqr())
                    .unwrap()
            })
            .unwrap();
        let vp = v[peak].unwrap();
        assert!((vp - k0 / m).abs() / (k0 / m) < 0.01, "v={vp}");
    }

    #[test]
    fn velocity_masks_low_density() {
        let g = grid(512, 0.05, Boundary::Absorbing);
        let f = make_gaussian(&g, 0.0, 0.5, 0.0).unwrap();
        let v = local_velocity(&f, 1.0, 1e-12);
        // Far tails of a compactly-sampled Gaussian underflow the floor.
        assert!(v[0].is_none() && v[g.n_points - 1].is_none());
    }
}
