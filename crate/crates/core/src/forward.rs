//! Synthetic boundary measurements: midpoint quadrature of the volume
//! representation `E(y) = int G(y - z) J(z) dz` on the measurement mesh.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::RealField;
use crate::geometry::{FrequencySet, Medium, SurfaceMesh, Vec3};
use crate::greens::{apply_coeffs, KernelFreq};

/// Complex electric field per (mesh point, frequency). Entry `(i, n)` holds
/// three components at `values[3 * (i * N + n) ..]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub mesh: SurfaceMesh,
    pub freqs: FrequencySet,
    pub values: Vec<Complex64>,
}

impl BoundaryData {
    pub fn zeros(mesh: SurfaceMesh, freqs: FrequencySet) -> Self {
        let len = 3 * mesh.len() * freqs.len();
        Self {
            mesh,
            freqs,
            values: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn from_values(mesh: SurfaceMesh, freqs: FrequencySet, values: Vec<Complex64>) -> Result<Self> {
        let expected = 3 * mesh.len() * freqs.len();
        if values.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "boundary data holds {} scalars, expected {expected}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidArgument("boundary data must be finite".into()));
        }
        Ok(Self { mesh, freqs, values })
    }

    pub fn n_points(&self) -> usize {
        self.mesh.len()
    }

    pub fn n_freqs(&self) -> usize {
        self.freqs.len()
    }

    pub fn entry(&self, point: usize, n: usize) -> [Complex64; 3] {
        let o = 3 * (point * self.n_freqs() + n);
        [self.values[o], self.values[o + 1], self.values[o + 2]]
    }

    /// Root mean square of the entry magnitudes `|E|`.
    pub fn rms(&self) -> f64 {
        let entries = (self.n_points() * self.n_freqs()) as f64;
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / entries).sqrt()
    }

    pub fn scaled(&self, alpha: Complex64) -> Self {
        Self {
            mesh: self.mesh.clone(),
            freqs: self.freqs.clone(),
            values: self.values.iter().map(|v| v * alpha).collect(),
        }
    }
}

/// `exp(i kappa_n r)` for every frequency. Evenly spaced sets use a phase
/// recurrence instead of one `sin_cos` per frequency.
pub(crate) struct PhaseTable {
    kappas: Vec<f64>,
    step: Option<f64>,
}

impl PhaseTable {
    pub fn new(kernels: &[KernelFreq]) -> Self {
        let kappas: Vec<f64> = kernels.iter().map(|k| k.kappa).collect();
        let step = if kappas.len() > 2 {
            let s = (kappas[kappas.len() - 1] - kappas[0]) / (kappas.len() - 1) as f64;
            let tol = 1e-12 * kappas[kappas.len() - 1].abs();
            kappas
                .windows(2)
                .all(|w| ((w[1] - w[0]) - s).abs() <= tol)
                .then_some(s)
        } else {
            None
        };
        Self { kappas, step }
    }

    #[inline]
    pub fn fill(&self, r: f64, out: &mut [Complex64]) {
        match self.step {
            Some(step) => {
                let mut p = Complex64::from_polar(1.0, self.kappas[0] * r);
                let q = Complex64::from_polar(1.0, step * r);
                for o in out.iter_mut() {
                    *o = p;
                    p *= q;
                }
            }
            None => {
                for (o, k) in out.iter_mut().zip(&self.kappas) {
                    *o = Complex64::from_polar(1.0, k * r);
                }
            }
        }
    }
}

/// Nonzero voxels of a source as `(center, J * h^3)`.
fn source_terms(source: &RealField) -> Vec<(Vec3, [Complex64; 3])> {
    let vol = source.grid.voxel_volume();
    (0..source.n_voxels())
        .filter_map(|v| {
            let j = source.get(v);
            (j != Vec3::zeros()).then(|| {
                (
                    source.grid.center(v),
                    [0, 1, 2].map(|c| Complex64::new(j[c] * vol, 0.0)),
                )
            })
        })
        .collect()
}

fn radiate_terms(
    terms: &[(Vec3, [Complex64; 3])],
    point: &Vec3,
    kernels: &[KernelFreq],
    phases: &PhaseTable,
    scratch: &mut [Complex64],
    out: &mut [Complex64],
) -> Result<()> {
    out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
    for (z, jv) in terms {
        let d = point - z;
        let r = d.norm();
        if r <= 1e-12 * (1.0 + z.norm()) {
            return Err(Error::Geometry(format!(
                "evaluation point ({}, {}, {}) coincides with a source voxel",
                point.x, point.y, point.z
            )));
        }
        let rhat = [d.x / r, d.y / r, d.z / r];
        phases.fill(r, scratch);
        for (n, k) in kernels.iter().enumerate() {
            let (a, b) = k.coeffs(r, scratch[n]);
            let e = apply_coeffs(a, b, &rhat, jv);
            out[3 * n] += e[0];
            out[3 * n + 1] += e[1];
            out[3 * n + 2] += e[2];
        }
    }
    Ok(())
}

/// Field radiated by `source` at `point` for one frequency.
pub fn radiate(source: &RealField, point: &Vec3, omega: f64, medium: &Medium) -> Result<[Complex64; 3]> {
    if omega == 0.0 {
        return Err(Error::Domain("radiate needs omega != 0".into()));
    }
    let kernels = [KernelFreq::new(omega, medium)];
    let phases = PhaseTable::new(&kernels);
    let mut scratch = [Complex64::new(0.0, 0.0)];
    let mut out = [Complex64::new(0.0, 0.0); 3];
    radiate_terms(&source_terms(source), point, &kernels, &phases, &mut scratch, &mut out)?;
    Ok(out)
}

/// Boundary data of `source` on `mesh` at every frequency of `freqs`.
///
/// Each mesh point is computed independently with a fixed summation
/// order, so the result is bitwise identical for any thread count.
pub fn simulate_boundary_data(
    source: &RealField,
    mesh: &SurfaceMesh,
    freqs: &FrequencySet,
    medium: &Medium,
) -> Result<BoundaryData> {
    mesh.check_encloses(&source.grid)?;
    let kernels: Vec<KernelFreq> = freqs.omegas().iter().map(|w| KernelFreq::new(*w, medium)).collect();
    let phases = PhaseTable::new(&kernels);
    let terms = source_terms(source);
    let nf = freqs.len();
    let mut values = vec![Complex64::new(0.0, 0.0); 3 * nf * mesh.len()];
    values
        .par_chunks_mut(3 * nf)
        .zip(mesh.points.par_iter())
        .try_for_each_init(
            || vec![Complex64::new(0.0, 0.0); nf],
            |scratch, (out, p)| radiate_terms(&terms, p, &kernels, &phases, scratch, out),
        )?;
    Ok(BoundaryData {
        mesh: mesh.clone(),
        freqs: freqs.clone(),
        values,
    })
}

/// Adds circular complex Gaussian noise with per-entry standard deviation
/// `relative_level * rms(|E|)`. Level 0 returns the data unchanged.
pub fn add_noise(data: &BoundaryData, relative_level: f64, seed: u64) -> Result<BoundaryData> {
    if !(relative_level >= 0.0 && relative_level.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise level must be >= 0, got {relative_level}"
        )));
    }
    if relative_level == 0.0 {
        return Ok(data.clone());
    }
    // six real degrees of freedom per 3-vector entry
    let sigma = relative_level * data.rms() / 6f64.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = data
        .values
        .iter()
        .map(|v| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            v + Complex64::new(sigma * re, sigma * im)
        })
        .collect();
    Ok(BoundaryData {
        mesh: data.mesh.clone(),
        freqs: data.freqs.clone(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_ball_source, make_point_dipole};
    use crate::geometry::{make_sphere_mesh, VoxelGrid};
    use crate::greens::dyadic_green_ee;

    fn grid() -> VoxelGrid {
        VoxelGrid::centered([0.0; 3], 0.1, [8, 8, 8]).unwrap()
    }

    #[test]
    fn zero_source_radiates_nothing() {
        let g = grid();
        let e = radiate(&RealField::zeros(g), &Vec3::new(3.0, 0.0, 0.0), 2.0, &Medium::default()).unwrap();
        assert!(e.iter().all(|c| *c == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn single_voxel_matches_kernel() {
        let g = grid();
        let m = Medium::default();
        let mut src = RealField::zeros(g);
        let v = g.index(3, 4, 2);
        let p = Vec3::new(0.3, -1.0, 2.0);
        src.set(v, p);
        let y = Vec3::new(2.5, 1.0, -0.5);
        let e = radiate(&src, &y, 7.0, &m).unwrap();
        let gk = dyadic_green_ee(&(y - g.center(v)), 7.0, &m).unwrap();
        let pc = p.map(|x| Complex64::new(x, 0.0));
        let expect = gk * pc * Complex64::new(g.voxel_volume(), 0.0);
        for c in 0..3 {
            assert!((e[c] - expect[c]).norm() <= 1e-14 * expect.norm());
        }
    }

    #[test]
    fn coincident_point_is_rejected() {
        let g = grid();
        let mut src = RealField::zeros(g);
        src.set(5, Vec3::new(1.0, 0.0, 0.0));
        assert!(matches!(
            radiate(&src, &g.center(5), 1.0, &Medium::default()),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn mirror_symmetry_parity() {
        // voxels mirrored across x = 0 with moments mirrored (px -> -px):
        // on the plane x = 0 the field's x component vanishes
        let g = VoxelGrid::centered([0.0; 3], 0.1, [8, 8, 8]).unwrap();
        let m = Medium::default();
        let mut src = RealField::zeros(g);
        let a = g.index(2, 3, 5);
        let b = g.index(5, 3, 5);
        assert!((g.center(a).x + g.center(b).x).abs() < 1e-14);
        src.set(a, Vec3::new(0.4, 0.7, -0.2));
        src.set(b, Vec3::new(-0.4, 0.7, -0.2));
        for y in [Vec3::new(0.0, 2.0, 1.0), Vec3::new(0.0, -1.0, 3.0)] {
            let e = radiate(&src, &y, 9.0, &m).unwrap();
            let scale = e.iter().map(|c| c.norm()).fold(0.0, f64::max);
            assert!(e[0].norm() < 1e-12 * scale, "{:?}", e);
        }
    }

    #[test]
    fn degenerate_sizes_and_linearity() {
        let g = grid();
        let m = Medium::default();
        let src = make_ball_source(&g, [0.0; 3], 0.2, [0.0, 1.0, 1.0]).unwrap();
        let mesh = make_sphere_mesh([0.0; 3], 2.0, 4).unwrap();
        let mesh1 = SurfaceMesh::new(vec![mesh.points[0]], vec![1.0], vec![mesh.normals[0]]).unwrap();
        let f1 = FrequencySet::new(vec![3.0]).unwrap();
        let d = simulate_boundary_data(&src, &mesh1, &f1, &m).unwrap();
        let e = radiate(&src, &mesh.points[0], 3.0, &m).unwrap();
        assert_eq!(d.entry(0, 0), e);

        let freqs = FrequencySet::new(vec![1.0, 2.5, 4.0]).unwrap();
        let d = simulate_boundary_data(&src, &mesh, &freqs, &m).unwrap();
        let d2 = simulate_boundary_data(&src.scaled(2.5), &mesh, &freqs, &m).unwrap();
        for (a, b) in d.values.iter().zip(&d2.values) {
            assert!((a * 2.5 - b).norm() <= 1e-15 * b.norm().max(1e-300));
        }
    }

    #[test]
    fn mesh_inside_grid_is_rejected() {
        let g = grid();
        let src = make_point_dipole(&g, [0.0; 3], [1.0, 0.0, 0.0]).unwrap();
        let mesh = make_sphere_mesh([0.0; 3], 0.2, 16).unwrap();
        let f = FrequencySet::new(vec![1.0]).unwrap();
        assert!(matches!(
            simulate_boundary_data(&src, &mesh, &f, &Medium::default()),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn far_field_decay() {
        let g = VoxelGrid::centered([0.0; 3], 0.05, [6, 6, 6]).unwrap();
        let m = Medium::default();
        let src = make_ball_source(&g, [0.0; 3], 0.08, [0.0, 0.0, 1.0]).unwrap();
        let w = 2.0 * std::f64::consts::PI;
        let f = FrequencySet::new(vec![w]).unwrap();
        let lambda = m.wavelength(w);
        let mean = |r: f64| {
            let mesh = make_sphere_mesh([0.0; 3], r, 400).unwrap();
            let d = simulate_boundary_data(&src, &mesh, &f, &m).unwrap();
            (0..mesh.len())
                .map(|i| {
                    let e = d.entry(i, 0);
                    e.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
                })
                .sum::<f64>()
                / mesh.len() as f64
        };
        let r = 10.0 * lambda;
        let ratio = mean(2.0 * r) / (0.5 * mean(r));
        assert!((ratio - 1.0).abs() < 0.35, "{ratio}");
    }

    #[test]
    fn noise_contract() {
        let g = grid();
        let m = Medium::default();
        let src = make_ball_source(&g, [0.0; 3], 0.2, [1.0, 0.0, 0.0]).unwrap();
        let mesh = make_sphere_mesh([0.0; 3], 3.0, 2500).unwrap();
        let f = FrequencySet::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let d = simulate_boundary_data(&src, &mesh, &f, &m).unwrap();
        assert_eq!(add_noise(&d, 0.0, 1).unwrap(), d);
        let a = add_noise(&d, 0.1, 7).unwrap();
        let b = add_noise(&d, 0.1, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, add_noise(&d, 0.1, 8).unwrap());
        // 10^4 entries
        let diff: f64 = a.values.iter().zip(&d.values).map(|(x, y)| (x - y).norm_sqr()).sum();
        let rel = (diff / (mesh.len() * f.len()) as f64).sqrt() / d.rms();
        assert!((0.09..=0.11).contains(&rel), "{rel}");
        assert!(add_noise(&d, -0.1, 0).is_err());
    }
}
