//! Physical constants, frequency sets, the voxelized source domain and
//! quadrature meshes of the measurement surface.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Homogeneous isotropic background. Defaults to normalized units
/// (`epsilon0 = mu0 = c0 = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    pub epsilon0: f64,
    pub mu0: f64,
}

impl Default for Medium {
    fn default() -> Self {
        Self {
            epsilon0: 1.0,
            mu0: 1.0,
        }
    }
}

impl Medium {
    pub fn new(epsilon0: f64, mu0: f64) -> Result<Self> {
        let m = Self { epsilon0, mu0 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon0 > 0.0 && self.epsilon0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon0 must be positive, got {}",
                self.epsilon0
            )));
        }
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "mu0 must be positive, got {}",
                self.mu0
            )));
        }
        Ok(())
    }

    /// Wave speed `1/sqrt(epsilon0 mu0)`.
    pub fn c0(&self) -> f64 {
        1.0 / (self.epsilon0 * self.mu0).sqrt()
    }

    /// Wave number `omega / c0`; odd in `omega`.
    pub fn kappa(&self, omega: f64) -> f64 {
        omega * (self.epsilon0 * self.mu0).sqrt()
    }

    pub fn omega_for_kappa(&self, kappa: f64) -> f64 {
        kappa * self.c0()
    }

    pub fn wavelength(&self, omega: f64) -> f64 {
        2.0 * PI / self.kappa(omega).abs()
    }
}

/// Ordered set of strictly positive angular frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FrequencySet {
    omegas: Vec<f64>,
}

impl FrequencySet {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::InvalidArgument(
                "frequency set must hold at least one frequency".into(),
            ));
        }
        for (i, &w) in omegas.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "frequency {i} must be positive and finite, got {w}"
                )));
            }
            if i > 0 && w < omegas[i - 1] {
                return Err(Error::InvalidArgument(format!(
                    "frequencies must be non-decreasing: {} then {}",
                    omegas[i - 1],
                    w
                )));
            }
        }
        Ok(Self { omegas })
    }

    /// `count` frequencies whose wave numbers are evenly spaced on
    /// `[kappa_min, kappa_max]` (both ends included).
    pub fn band(kappa_min: f64, kappa_max: f64, count: usize, medium: &Medium) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidArgument("band needs count >= 1".into()));
        }
        if !(kappa_min > 0.0 && kappa_max >= kappa_min) {
            return Err(Error::InvalidArgument(format!(
                "band requires 0 < kappa_min <= kappa_max, got [{kappa_min}, {kappa_max}]"
            )));
        }
        let omegas = if count == 1 {
            vec![medium.omega_for_kappa(kappa_min)]
        } else {
            let step = (kappa_max - kappa_min) / (count - 1) as f64;
            (0..count)
                .map(|i| medium.omega_for_kappa(kappa_min + step * i as f64))
                .collect()
        };
        Self::new(omegas)
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn get(&self, n: usize) -> Option<f64> {
        self.omegas.get(n).copied()
    }

    /// Common spacing if the set is evenly spaced (relative tolerance 1e-9).
    pub fn uniform_step(&self) -> Option<f64> {
        if self.omegas.len() < 2 {
            return None;
        }
        let step = (self.omegas[self.omegas.len() - 1] - self.omegas[0])
            / (self.omegas.len() - 1) as f64;
        let scale = self.omegas[self.omegas.len() - 1];
        let uniform = self
            .omegas
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * scale);
        uniform.then_some(step)
    }
}

impl TryFrom<Vec<f64>> for FrequencySet {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FrequencySet> for Vec<f64> {
    fn from(f: FrequencySet) -> Self {
        f.omegas
    }
}

/// Uniform voxel grid. `origin` is the center of voxel `(0, 0, 0)`; linear
/// indices run x fastest, then y, then z: `i + nx * (j + ny * k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub origin: [f64; 3],
    pub spacing: f64,
    pub dims: [usize; 3],
}

impl VoxelGrid {
    pub fn new(origin: [f64; 3], spacing: f64, dims: [usize; 3]) -> Result<Self> {
        let g = Self {
            origin,
            spacing,
            dims,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid of `dims` voxels centered on `center`.
    pub fn centered(center: [f64; 3], spacing: f64, dims: [usize; 3]) -> Result<Self> {
        let origin = [0, 1, 2].map(|a| center[a] - 0.5 * spacing * (dims[a] as f64 - 1.0));
        Self::new(origin, spacing, dims)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid spacing must be positive, got {}",
                self.spacing
            )));
        }
        if self.dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "grid dims must be >= 1, got {:?}",
                self.dims
            )));
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidArgument("grid origin must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    pub fn center_ijk(&self, ijk: [usize; 3]) -> Vec3 {
        Vec3::new(
            self.origin[0] + self.spacing * ijk[0] as f64,
            self.origin[1] + self.spacing * ijk[1] as f64,
            self.origin[2] + self.spacing * ijk[2] as f64,
        )
    }

    pub fn center(&self, idx: usize) -> Vec3 {
        self.center_ijk(self.ijk(idx))
    }

    pub fn centers(&self) -> Vec<Vec3> {
        (0..self.len()).map(|i| self.center(i)).collect()
    }

    /// Axis-aligned box covered by the voxel cells (not just the centers).
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let h = 0.5 * self.spacing;
        let lo = Vec3::new(self.origin[0] - h, self.origin[1] - h, self.origin[2] - h);
        let hi = Vec3::new(
            self.origin[0] + self.spacing * (self.dims[0] as f64 - 0.5),
            self.origin[1] + self.spacing * (self.dims[1] as f64 - 0.5),
            self.origin[2] + self.spacing * (self.dims[2] as f64 - 0.5),
        );
        (lo, hi)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let (lo, hi) = self.bounding_box();
        (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a])
    }

    pub fn center_point(&self) -> Vec3 {
        let (lo, hi) = self.bounding_box();
        0.5 * (lo + hi)
    }

    /// Largest distance from the box center to a corner of the box.
    pub fn half_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        0.5 * (hi - lo).norm()
    }

    /// Same box, each voxel split into `factor^3` sub-voxels.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidArgument("refinement factor must be >= 1".into()));
        }
        let h = self.spacing / factor as f64;
        let shift = 0.5 * (self.spacing - h);
        Self::new(
            self.origin.map(|o| o - shift),
            h,
            self.dims.map(|d| d * factor),
        )
    }

    pub fn same_as(&self, other: &VoxelGrid) -> bool {
        self.dims == other.dims
            && (self.spacing - other.spacing).abs() <= 1e-12 * self.spacing
            && (0..3).all(|a| (self.origin[a] - other.origin[a]).abs() <= 1e-12 * self.spacing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Sphere {
    pub fn center(&self) -> Vec3 {
        Vec3::from(self.center)
    }
}

/// Quadrature rule on the measurement surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub normals: Vec<Vec3>,
    /// Set when the mesh discretizes a sphere.
    pub sphere: Option<Sphere>,
}

impl SurfaceMesh {
    pub fn new(points: Vec<Vec3>, weights: Vec<f64>, normals: Vec<Vec3>) -> Result<Self> {
        let m = Self {
            points,
            weights,
            normals,
            sphere: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.weights.len() || self.points.len() != self.normals.len() {
            return Err(Error::DimensionMismatch(format!(
                "mesh has {} points, {} weights, {} normals",
                self.points.len(),
                self.weights.len(),
                self.normals.len()
            )));
        }
        if self.points.is_empty() {
            return Err(Error::InvalidArgument("mesh has no points".into()));
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "mesh weights must be positive, found {w}"
            )));
        }
        if let Some(n) = self.normals.iter().find(|n| (n.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "mesh normals must be unit length, found |n| = {}",
                n.norm()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Integrate a scalar function of the surface point.
    pub fn integrate(&self, f: impl Fn(&Vec3) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| f(p) * w)
            .sum()
    }

    /// Error unless every mesh point lies outside the grid's box.
    pub fn check_encloses(&self, grid: &VoxelGrid) -> Result<()> {
        if let Some(p) = self.points.iter().find(|p| grid.contains(p)) {
            return Err(Error::Geometry(format!(
                "mesh point ({:.4}, {:.4}, {:.4}) lies inside the voxel grid box",
                p.x, p.y, p.z
            )));
        }
        Ok(())
    }
}

/// Fibonacci-spiral quadrature of a sphere with equal weights
/// `4 pi R^2 / n` and outward radial normals.
pub fn make_sphere_mesh(center: [f64; 3], radius: f64, n_points: usize) -> Result<SurfaceMesh> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sphere radius must be positive, got {radius}"
        )));
    }
    if n_points < 4 {
        return Err(Error::InvalidArgument(format!(
            "sphere mesh needs at least 4 points, got {n_points}"
        )));
    }
    let c = Vec3::from(center);
    let golden = PI * (3.0 - 5f64.sqrt());
    let nf = n_points as f64;
    let weight = 4.0 * PI * radius * radius / nf;
    let mut points = Vec::with_capacity(n_points);
    let mut normals = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / nf;
        let rho = (1.0 - z * z).max(0.0).sqrt();
        let (s, co) = (golden * i as f64).sin_cos();
        let n = Vec3::new(rho * co, rho * s, z).normalize();
        normals.push(n);
        points.push(c + radius * n);
    }
    Ok(SurfaceMesh {
        points,
        weights: vec![weight; n_points],
        normals,
        sphere: Some(Sphere { center, radius }),
    })
}
