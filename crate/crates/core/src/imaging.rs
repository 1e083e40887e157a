//! Phase-conjugation imaging.
//!
//! Conjugated boundary data are back-propagated with the surface
//! representation `E*(x) = int_Gamma G(xi - x) conj(d(xi)) dsigma(xi)`;
//! the single-frequency images are `I_n = eps0 / (2 pi c0 mu0) E*_n` and the
//! broadband image integrates `E*` over the band, folding negative
//! frequencies in by conjugation symmetry.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{ComplexField, RealField};
use crate::forward::{BoundaryData, PhaseTable};
use crate::geometry::{Medium, Vec3, VoxelGrid};
use crate::greens::{apply_coeffs, dyadic_green_ee, re_green_ee, KernelFreq};

/// Per-frequency images on a common grid, plus the optional broadband one.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageStack {
    pub grid: VoxelGrid,
    pub omegas: Vec<f64>,
    pub images: Vec<ComplexField>,
    pub broadband: Option<RealField>,
}

impl ImageStack {
    pub fn validate(&self) -> Result<()> {
        if self.images.len() != self.omegas.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} images for {} frequencies",
                self.images.len(),
                self.omegas.len()
            )));
        }
        let same = self.images.iter().all(|f| f.grid.same_as(&self.grid))
            && self.broadband.as_ref().is_none_or(|b| b.grid.same_as(&self.grid));
        if !same {
            return Err(Error::DimensionMismatch("images live on different grids".into()));
        }
        Ok(())
    }

    /// Voxelwise sum over frequencies of `|I_n|`.
    pub fn magnitude_sum(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.grid.len()];
        for img in &self.images {
            for (a, m) in acc.iter_mut().zip(img.magnitudes()) {
                *a += m;
            }
        }
        acc
    }

    /// Mean of the real parts, the optional non-zero initial guess.
    pub fn mean_real(&self) -> RealField {
        let mut acc = RealField::zeros(self.grid);
        for img in &self.images {
            acc.axpy(1.0 / self.images.len() as f64, &img.re());
        }
        acc
    }
}

/// `eps0 / (2 pi c0 mu0)`
pub fn image_scale(medium: &Medium) -> f64 {
    medium.epsilon0 / (2.0 * PI * medium.c0() * medium.mu0)
}

/// Adjoint field at `x` for frequency index `n`.
pub fn adjoint_field(data: &BoundaryData, n: usize, x: &Vec3, medium: &Medium) -> Result<[Complex64; 3]> {
    let omega = data.freqs.get(n).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "frequency index {n} out of range (N = {})",
            data.n_freqs()
        ))
    })?;
    let mut acc = [Complex64::new(0.0, 0.0); 3];
    for (i, (xi, w)) in data.mesh.points.iter().zip(&data.mesh.weights).enumerate() {
        let d = xi - x;
        if d.norm() < 1e-9 {
            return Err(Error::Geometry(format!(
                "adjoint field evaluated on mesh point {i}"
            )));
        }
        let g = dyadic_green_ee(&d, omega, medium)?;
        let q = data.entry(i, n);
        let p = nalgebra::Vector3::new(q[0].conj(), q[1].conj(), q[2].conj());
        let e = g * p * Complex64::new(*w, 0.0);
        for c in 0..3 {
            acc[c] += e[c];
        }
    }
    Ok(acc)
}

/// Adjoint fields for the selected frequency indices at every voxel,
/// laid out `[voxel][selected frequency][component]`.
fn adjoint_fields_on_grid(
    data: &BoundaryData,
    indices: &[usize],
    grid: &VoxelGrid,
    medium: &Medium,
) -> Result<Vec<Complex64>> {
    data.mesh.check_encloses(grid)?;
    let nsel = indices.len();
    let kernels: Vec<KernelFreq> = indices
        .iter()
        .map(|&n| KernelFreq::new(data.freqs.omegas()[n], medium))
        .collect();
    let phases = PhaseTable::new(&kernels);
    // conj(d) * weight, [point][selected frequency]
    let sources: Vec<[Complex64; 3]> = (0..data.n_points())
        .flat_map(|i| {
            let w = data.mesh.weights[i];
            indices.iter().map(move |&n| data.entry(i, n).map(|c| c.conj() * w))
        })
        .collect();
    let centers = grid.centers();
    let mut out = vec![Complex64::new(0.0, 0.0); 3 * nsel * grid.len()];
    out.par_chunks_mut(3 * nsel)
        .zip(centers.par_iter())
        .for_each_init(
            || vec![Complex64::new(0.0, 0.0); nsel],
            |scratch, (acc, x)| {
                for (i, xi) in data.mesh.points.iter().enumerate() {
                    let d = xi - x;
                    let r = d.norm();
                    let rhat = [d.x / r, d.y / r, d.z / r];
                    phases.fill(r, scratch);
                    let src = &sources[i * nsel..(i + 1) * nsel];
                    for (s, k) in kernels.iter().enumerate() {
                        let (a, b) = k.coeffs(r, scratch[s]);
                        let e = apply_coeffs(a, b, &rhat, &src[s]);
                        acc[3 * s] += e[0];
                        acc[3 * s + 1] += e[1];
                        acc[3 * s + 2] += e[2];
                    }
                }
            },
        );
    Ok(out)
}

fn check_index(data: &BoundaryData, n: usize) -> Result<()> {
    if n >= data.n_freqs() {
        return Err(Error::InvalidArgument(format!(
            "frequency index {n} out of range (N = {})",
            data.n_freqs()
        )));
    }
    Ok(())
}

/// Single-frequency image `I_n` on `grid`.
pub fn phase_conj_single(data: &BoundaryData, n: usize, grid: &VoxelGrid, medium: &Medium) -> Result<ComplexField> {
    check_index(data, n)?;
    let scale = image_scale(medium);
    let raw = adjoint_fields_on_grid(data, &[n], grid, medium)?;
    ComplexField::from_data(*grid, raw.into_iter().map(|c| c * scale).collect())
}

/// All single-frequency images in one pass over the mesh.
pub fn phase_conj_stack(data: &BoundaryData, grid: &VoxelGrid, medium: &Medium) -> Result<ImageStack> {
    let nf = data.n_freqs();
    let indices: Vec<usize> = (0..nf).collect();
    let raw = adjoint_fields_on_grid(data, &indices, grid, medium)?;
    let scale = image_scale(medium);
    let images = (0..nf)
        .map(|n| {
            let vals = (0..grid.len())
                .flat_map(|v| {
                    let o = 3 * (v * nf + n);
                    [raw[o] * scale, raw[o + 1] * scale, raw[o + 2] * scale]
                })
                .collect();
            ComplexField::from_data(*grid, vals)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ImageStack {
        grid: *grid,
        omegas: data.freqs.omegas().to_vec(),
        images,
        broadband: None,
    })
}

/// Trapezoid weights for samples at the given abscissae.
pub fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = 0.5 * (xs[i + 1] - xs[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

/// Broadband image from single-frequency images sampled over a band.
pub fn broadband_from_stack(stack: &ImageStack) -> Result<RealField> {
    if stack.omegas.len() < 2 {
        return Err(Error::InvalidArgument(
            "broadband image needs at least 2 frequencies".into(),
        ));
    }
    let weights = trapezoid_weights(&stack.omegas);
    let mut out = RealField::zeros(stack.grid);
    for (img, w) in stack.images.iter().zip(&weights) {
        // negative half folded in: E*(-w) = conj(E*(w))
        for (o, c) in out.data.iter_mut().zip(&img.data) {
            *o += 2.0 * w * c.re;
        }
    }
    Ok(out)
}

/// Broadband image `I(x)`: trapezoid rule over the positive band of
/// `2 Re E*`, scaled by `eps0 / (2 pi c0 mu0)`.
pub fn phase_conj_full(data: &BoundaryData, grid: &VoxelGrid, medium: &Medium) -> Result<RealField> {
    if data.n_freqs() < 2 {
        return Err(Error::InvalidArgument(
            "broadband image needs at least 2 frequencies".into(),
        ));
    }
    broadband_from_stack(&phase_conj_stack(data, grid, medium)?)
}

/// Truncated-band quadrature of `(eps0 / 2 pi) int_{-W}^{W} Re G(x - y, w) dw`
/// as twice the positive-half trapezoid sum on `M` nodes of `[0, W]`. The
/// integrand vanishes at `w = 0`.
pub fn delta_identity_residual(x: &Vec3, y: &Vec3, medium: &Medium, band_max: f64, m: usize) -> Result<Matrix3<f64>> {
    if m < 8 {
        return Err(Error::InvalidArgument(format!(
            "delta identity quadrature needs M >= 8 nodes, got {m}"
        )));
    }
    if !(band_max > 0.0 && band_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "band limit must be positive, got {band_max}"
        )));
    }
    let step = band_max / (m - 1) as f64;
    let sep = x - y;
    let mut acc = Matrix3::zeros();
    for i in 1..m {
        let w = step * i as f64;
        let weight = if i == m - 1 { 0.5 * step } else { step };
        acc += re_green_ee(&sep, w, medium)? * weight;
    }
    Ok(acc * (2.0 * medium.epsilon0 / (2.0 * PI)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_point_dipole;
    use crate::forward::simulate_boundary_data;
    use crate::geometry::{make_sphere_mesh, FrequencySet, SurfaceMesh};

    fn setup() -> (VoxelGrid, Medium, BoundaryData) {
        let g = VoxelGrid::centered([0.0; 3], 0.1, [9, 9, 9]).unwrap();
        let m = Medium::default();
        let src = make_point_dipole(&g, [0.1, -0.1, 0.0], [0.0, 0.0, 1.0]).unwrap();
        let mesh = make_sphere_mesh([0.0; 3], 4.0, 1500).unwrap();
        let f = FrequencySet::new(vec![12.0, 16.0]).unwrap();
        let d = simulate_boundary_data(&src, &mesh, &f, &m).unwrap();
        (g, m, d)
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let (g, m, d) = setup();
        let z = BoundaryData::zeros(d.mesh.clone(), d.freqs.clone());
        let e = adjoint_field(&z, 0, &Vec3::zeros(), &m).unwrap();
        assert!(e.iter().all(|c| c.norm() == 0.0));
        let img = phase_conj_single(&z, 1, &g, &m).unwrap();
        assert!(img.data.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn one_point_mesh_matches_kernel() {
        let m = Medium::default();
        let xi = Vec3::new(3.0, 1.0, -2.0);
        let mesh = SurfaceMesh::new(vec![xi], vec![0.7], vec![xi.normalize()]).unwrap();
        let q = Complex64::new(0.3, -1.2);
        let vals = vec![q, q * 2.0, Complex64::new(0.0, 1.0)];
        let f = FrequencySet::new(vec![5.0]).unwrap();
        let d = BoundaryData::from_values(mesh, f, vals.clone()).unwrap();
        let x = Vec3::new(0.1, 0.2, 0.3);
        let e = adjoint_field(&d, 0, &x, &m).unwrap();
        let g = dyadic_green_ee(&(xi - x), 5.0, &m).unwrap();
        let p = nalgebra::Vector3::new(vals[0].conj(), vals[1].conj(), vals[2].conj());
        let expect = g * p * Complex64::new(0.7, 0.0);
        for c in 0..3 {
            assert!((e[c] - expect[c]).norm() < 1e-15 * expect.norm());
        }
    }

    #[test]
    fn adjoint_errors() {
        let (_, m, d) = setup();
        assert!(adjoint_field(&d, 2, &Vec3::zeros(), &m).is_err());
        let on_mesh = d.mesh.points[3];
        assert!(matches!(adjoint_field(&d, 0, &on_mesh, &m), Err(Error::Geometry(_))));
        let big = VoxelGrid::centered([0.0; 3], 1.0, [9, 9, 9]).unwrap();
        assert!(matches!(phase_conj_single(&d, 0, &big, &m), Err(Error::Geometry(_))));
    }

    #[test]
    fn grid_path_matches_pointwise_adjoint() {
        let (g, m, d) = setup();
        let img = phase_conj_single(&d, 1, &g, &m).unwrap();
        let scale = image_scale(&m);
        for v in [0, 17, 400, g.len() - 1] {
            let e = adjoint_field(&d, 1, &g.center(v), &m).unwrap();
            for c in 0..3 {
                let got = img.data[3 * v + c];
                assert!((got - e[c] * scale).norm() <= 1e-12 * img.norm().max(1e-300) / (g.voxel_volume().sqrt()));
            }
        }
        let stack = phase_conj_stack(&d, &g, &m).unwrap();
        for (a, b) in stack.images[1].data.iter().zip(&img.data) {
            assert!((a - b).norm() <= 1e-13 * b.norm().max(1e-30));
        }
    }

    #[test]
    fn conjugate_linear_in_data() {
        let (g, m, d) = setup();
        let alpha = Complex64::new(0.6, -1.7);
        let a = phase_conj_single(&d, 0, &g, &m).unwrap();
        let b = phase_conj_single(&d.scaled(alpha), 0, &g, &m).unwrap();
        let scale = b.data.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x * alpha.conj() - y).norm() <= 1e-13 * scale);
        }
    }

    #[test]
    fn focuses_on_point_source() {
        let (g, m, d) = setup();
        let img = phase_conj_single(&d, 1, &g, &m).unwrap();
        let mags = img.magnitudes();
        let best = (0..mags.len()).max_by(|a, b| mags[*a].total_cmp(&mags[*b])).unwrap();
        let truth = Vec3::new(0.1, -0.1, 0.0);
        assert!((g.center(best) - truth).norm() <= g.spacing * 1.01);
    }

    #[test]
    fn trapezoid_weights_integrate_linear() {
        let xs = [0.0, 0.5, 1.5, 2.0];
        let w = trapezoid_weights(&xs);
        let s: f64 = xs.iter().zip(&w).map(|(x, w)| x * w).sum();
        assert!((s - 2.0).abs() < 1e-15);
    }

    #[test]
    fn full_band_needs_two_frequencies() {
        let (g, m, d) = setup();
        let one = BoundaryData::from_values(
            d.mesh.clone(),
            FrequencySet::new(vec![12.0]).unwrap(),
            (0..d.n_points()).flat_map(|i| d.entry(i, 0)).collect(),
        )
        .unwrap();
        assert!(phase_conj_full(&one, &g, &m).is_err());
        let z = BoundaryData::zeros(d.mesh.clone(), d.freqs.clone());
        let img = phase_conj_full(&z, &g, &m).unwrap();
        assert!(img.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn delta_identity_shape() {
        let m = Medium::default();
        let x = Vec3::new(0.2, 0.1, -0.3);
        let d = delta_identity_residual(&x, &x, &m, 8.0, 64).unwrap();
        assert!((d - d.transpose()).norm() == 0.0);
        assert!(delta_identity_residual(&x, &x, &m, 8.0, 7).is_err());
    }
}
