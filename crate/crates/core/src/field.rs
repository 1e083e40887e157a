//! Real and complex 3-vector fields sampled at voxel centers, and the
//! synthetic source constructors.
//!
//! Values are stored flat, three components per voxel in grid order
//! (x fastest, then y, then z), i.e. component `c` of voxel `v` lives at
//! `3 * v + c`.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{Vec3, VoxelGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    pub grid: VoxelGrid,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: VoxelGrid,
    pub data: Vec<Complex64>,
}

impl RealField {
    pub fn zeros(grid: VoxelGrid) -> Self {
        Self {
            grid,
            data: vec![0.0; 3 * grid.len()],
        }
    }

    pub fn from_data(grid: VoxelGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != 3 * grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "field of {} scalars does not fit a grid of {} voxels",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn n_voxels(&self) -> usize {
        self.grid.len()
    }

    pub fn get(&self, v: usize) -> Vec3 {
        Vec3::new(self.data[3 * v], self.data[3 * v + 1], self.data[3 * v + 2])
    }

    pub fn set(&mut self, v: usize, value: Vec3) {
        self.data[3 * v..3 * v + 3].copy_from_slice(value.as_slice());
    }

    pub fn check_grid(&self, grid: &VoxelGrid) -> Result<()> {
        if self.grid.same_as(grid) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "field grid {:?} differs from expected {:?}",
                self.grid, grid
            )))
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &RealField) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    /// Volume-weighted inner product `h^3 sum u.v`.
    pub fn dot(&self, other: &RealField) -> f64 {
        self.grid.voxel_volume() * dot_flat(&self.data, &other.data)
    }

    /// Volume-weighted squared l2 norm.
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Volume-weighted l1 norm over every scalar component.
    pub fn l1_norm(&self) -> f64 {
        self.grid.voxel_volume() * self.data.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Volume-weighted sum of voxelwise Euclidean norms.
    pub fn group_l1_norm(&self) -> f64 {
        self.grid.voxel_volume()
            * self
                .data
                .chunks_exact(3)
                .map(|c| (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt())
                .sum::<f64>()
    }

    /// Number of voxels with a nonzero vector.
    pub fn l0_count(&self) -> usize {
        self.data
            .chunks_exact(3)
            .filter(|c| c.iter().any(|v| *v != 0.0))
            .count()
    }

    pub fn support(&self) -> Vec<bool> {
        self.data
            .chunks_exact(3)
            .map(|c| c.iter().any(|v| *v != 0.0))
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Voxelwise Euclidean magnitude.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.data
            .chunks_exact(3)
            .map(|c| (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt())
            .collect()
    }

    /// Quadrature of the field over the grid.
    pub fn integral(&self) -> Vec3 {
        let mut s = Vec3::zeros();
        for c in self.data.chunks_exact(3) {
            s += Vec3::new(c[0], c[1], c[2]);
        }
        s * self.grid.voxel_volume()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Add<&RealField> for &RealField {
    type Output = RealField;

    fn add(self, rhs: &RealField) -> RealField {
        RealField {
            grid: self.grid,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub<&RealField> for &RealField {
    type Output = RealField;

    fn sub(self, rhs: &RealField) -> RealField {
        RealField {
            grid: self.grid,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul<f64> for &RealField {
    type Output = RealField;

    fn mul(self, rhs: f64) -> RealField {
        self.scaled(rhs)
    }
}

pub(crate) fn dot_flat(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ComplexField {
    pub fn zeros(grid: VoxelGrid) -> Self {
        Self {
            grid,
            data: vec![Complex64::new(0.0, 0.0); 3 * grid.len()],
        }
    }

    pub fn from_data(grid: VoxelGrid, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != 3 * grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "field of {} scalars does not fit a grid of {} voxels",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn re(&self) -> RealField {
        RealField {
            grid: self.grid,
            data: self.data.iter().map(|c| c.re).collect(),
        }
    }

    pub fn im(&self) -> RealField {
        RealField {
            grid: self.grid,
            data: self.data.iter().map(|c| c.im).collect(),
        }
    }

    /// Voxelwise magnitude `sqrt(|v_x|^2 + |v_y|^2 + |v_z|^2)`.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.data
            .chunks_exact(3)
            .map(|c| (c[0].norm_sqr() + c[1].norm_sqr() + c[2].norm_sqr()).sqrt())
            .collect()
    }

    pub fn norm(&self) -> f64 {
        (self.grid.voxel_volume() * self.data.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }
}

/// Indicator of a ball times a constant moment. Fails when the ball leaves
/// the grid box or catches no voxel center.
pub fn make_ball_source(
    grid: &VoxelGrid,
    center: [f64; 3],
    radius: f64,
    moment: [f64; 3],
) -> Result<RealField> {
    check_ball_inside(grid, center, radius)?;
    let c = Vec3::from(center);
    let m = Vec3::from(moment);
    let mut field = RealField::zeros(*grid);
    let mut hits = 0;
    for v in 0..grid.len() {
        if (grid.center(v) - c).norm() <= radius {
            field.set(v, m);
            hits += 1;
        }
    }
    if hits == 0 {
        return Err(Error::InvalidArgument(format!(
            "ball of radius {radius} at {center:?} contains no voxel center; \
             increase the radius to at least {:.4}",
            0.87 * grid.spacing
        )));
    }
    Ok(field)
}

/// Compactly supported smooth bump `(1 - r^2/a^2)^2 * moment` for `r < a`.
pub fn make_blob_source(
    grid: &VoxelGrid,
    center: [f64; 3],
    radius: f64,
    moment: [f64; 3],
) -> Result<RealField> {
    check_ball_inside(grid, center, radius)?;
    let c = Vec3::from(center);
    let m = Vec3::from(moment);
    let mut field = RealField::zeros(*grid);
    for v in 0..grid.len() {
        let t = (grid.center(v) - c).norm_squared() / (radius * radius);
        if t < 1.0 {
            field.set(v, m * (1.0 - t).powi(2));
        }
    }
    if field.l0_count() == 0 {
        return Err(Error::InvalidArgument(format!(
            "blob of radius {radius} at {center:?} contains no voxel center; increase the radius"
        )));
    }
    Ok(field)
}

/// Swirl `D psi x axis` with `psi = (1 - r^2/a^2)^3` on the ball of radius
/// `a`, where `D` is the central-difference gradient on the grid. Circulates
/// around `axis`, has peak magnitude `|axis|`, and its central-difference
/// divergence vanishes to rounding.
pub fn make_vortex_source(
    grid: &VoxelGrid,
    center: [f64; 3],
    radius: f64,
    axis: [f64; 3],
) -> Result<RealField> {
    let h = grid.spacing;
    check_ball_inside(grid, center, radius + h)?;
    let c = Vec3::from(center);
    let m = Vec3::from(axis);
    let psi = |p: Vec3| {
        let t = (p - c).norm_squared() / (radius * radius);
        if t < 1.0 { (1.0 - t).powi(3) } else { 0.0 }
    };
    let mut field = RealField::zeros(*grid);
    for v in 0..grid.len() {
        let x = grid.center(v);
        if (x - c).norm() >= radius + h {
            continue;
        }
        let mut d = Vec3::zeros();
        for a in 0..3 {
            let mut e = Vec3::zeros();
            e[a] = h;
            d[a] = (psi(x + e) - psi(x - e)) / (2.0 * h);
        }
        field.set(v, d.cross(&m));
    }
    let peak = field.magnitudes().into_iter().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "vortex of radius {radius} at {center:?} has no nonzero voxel; increase the radius"
        )));
    }
    let scale = m.norm() / peak;
    field.data.iter_mut().for_each(|x| *x *= scale);
    Ok(field)
}

/// Point dipole: the voxel nearest `position` carries `moment / h^3`, so the
/// field integrates to `moment`.
pub fn make_point_dipole(grid: &VoxelGrid, position: [f64; 3], moment: [f64; 3]) -> Result<RealField> {
    let p = Vec3::from(position);
    if !grid.contains(&p) {
        return Err(Error::Geometry(format!(
            "dipole position {position:?} lies outside the grid box"
        )));
    }
    let ijk = [0, 1, 2].map(|a| {
        let t = ((p[a] - grid.origin[a]) / grid.spacing).round();
        (t.max(0.0) as usize).min(grid.dims[a] - 1)
    });
    let mut field = RealField::zeros(*grid);
    field.set(
        grid.index(ijk[0], ijk[1], ijk[2]),
        Vec3::from(moment) / grid.voxel_volume(),
    );
    Ok(field)
}

fn check_ball_inside(grid: &VoxelGrid, center: [f64; 3], radius: f64) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "source radius must be positive, got {radius}"
        )));
    }
    let (lo, hi) = grid.bounding_box();
    for a in 0..3 {
        if center[a] - radius <= lo[a] || center[a] + radius >= hi[a] {
            return Err(Error::Geometry(format!(
                "source ball at {center:?} with radius {radius} is not strictly inside the grid box"
            )));
        }
    }
    Ok(())
}
