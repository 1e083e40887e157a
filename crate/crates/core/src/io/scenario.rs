//! JSON scenario schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{make_ball_source, make_blob_source, make_point_dipole, make_vortex_source, RealField};
use crate::geometry::{make_sphere_mesh, FrequencySet, Medium, SurfaceMesh, VoxelGrid};
use crate::inverse::{FistaConfig, KernelPath, Momentum, Penalty};
use crate::validation::ValidationSettings;

pub const SCENARIO_VERSION: u32 = 1;

/// Sub-seed offsets from the scenario seed.
pub const NOISE_SEED_OFFSET: u64 = 0;
pub const POWER_ITERATION_SEED_OFFSET: u64 = 1;
pub const VALIDATION_SEED_OFFSET: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Center of voxel (0, 0, 0). Exclusive with `center`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<[f64; 3]>,
    /// Center of the grid box. Exclusive with `origin`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 3]>,
    pub spacing: f64,
    pub dims: [usize; 3],
}

impl GridSpec {
    pub fn build(&self) -> Result<VoxelGrid> {
        match (self.origin, self.center) {
            (Some(o), None) => VoxelGrid::new(o, self.spacing, self.dims),
            (None, Some(c)) => VoxelGrid::centered(c, self.spacing, self.dims),
            _ => Err(Error::InvalidArgument(
                "grid needs exactly one of `origin` or `center`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub center: [f64; 3],
    pub radius: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum SourceSpec {
    /// Constant moment on every voxel whose center lies in the ball.
    Ball {
        center: [f64; 3],
        radius: f64,
        moment: [f64; 3],
    },
    /// Smooth bump `(1 - r^2/a^2)^2 * moment`.
    Blob {
        center: [f64; 3],
        radius: f64,
        moment: [f64; 3],
    },
    /// Divergence-free swirl around `axis`.
    Vortex {
        center: [f64; 3],
        radius: f64,
        axis: [f64; 3],
    },
    Dipole { position: [f64; 3], moment: [f64; 3] },
}

impl SourceSpec {
    pub fn rasterize(&self, grid: &VoxelGrid) -> Result<RealField> {
        match self {
            Self::Ball { center, radius, moment } => make_ball_source(grid, *center, *radius, *moment),
            Self::Blob { center, radius, moment } => make_blob_source(grid, *center, *radius, *moment),
            Self::Vortex { center, radius, axis } => make_vortex_source(grid, *center, *radius, *axis),
            Self::Dipole { position, moment } => make_point_dipole(grid, *position, *moment),
        }
    }

    pub fn center(&self) -> [f64; 3] {
        match self {
            Self::Ball { center, .. } | Self::Blob { center, .. } | Self::Vortex { center, .. } => *center,
            Self::Dipole { position, .. } => *position,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum FrequencySpec {
    /// Explicit angular frequencies.
    Omegas(Vec<f64>),
    /// `count` evenly spaced wavenumbers from `kappa_min` to `kappa_max`.
    Band { kappa_min: f64, kappa_max: f64, count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Noise RMS relative to the data RMS.
    #[serde(default)]
    pub level: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { level: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    #[default]
    Zero,
    /// Mean over frequencies of the real parts of the images.
    MeanReal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImagingSpec {
    /// Also form the broadband image (needs at least two frequencies).
    pub broadband: bool,
    /// Axis normal to the exported slices (0 = x, 1 = y, 2 = z).
    pub slice_axis: usize,
    /// Slice position along `slice_axis`; the middle when absent.
    pub slice_index: Option<usize>,
}

impl Default for ImagingSpec {
    fn default() -> Self {
        Self {
            broadband: false,
            slice_axis: 2,
            slice_index: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Fista,
    Ista,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionSpec {
    pub lambda: f64,
    pub gamma0: f64,
    pub eta: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub momentum: Momentum,
    pub penalty: Penalty,
    pub algorithm: Algorithm,
    pub kernel: KernelPath,
    pub initial_guess: InitialGuess,
}

impl Default for InversionSpec {
    fn default() -> Self {
        let c = FistaConfig::default();
        Self {
            lambda: c.lambda,
            gamma0: c.gamma0,
            eta: c.eta,
            max_iters: c.max_iters,
            rel_tol: c.rel_tol,
            momentum: c.momentum,
            penalty: c.penalty,
            algorithm: Algorithm::Fista,
            kernel: KernelPath::Fft,
            initial_guess: InitialGuess::Zero,
        }
    }
}

impl InversionSpec {
    pub fn config(&self) -> FistaConfig {
        FistaConfig {
            lambda: self.lambda,
            gamma0: self.gamma0,
            eta: self.eta,
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            momentum: self.momentum,
            penalty: self.penalty,
        }
    }
}

fn default_version() -> u32 {
    SCENARIO_VERSION
}

fn default_refinement() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub medium: Medium,
    pub grid: GridSpec,
    pub surface: SurfaceSpec,
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
    pub frequencies: FrequencySpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    /// Forward data is synthesized on the grid refined by this factor.
    #[serde(default = "default_refinement")]
    pub forward_refinement: usize,
    #[serde(default)]
    pub imaging: ImagingSpec,
    #[serde(default)]
    pub inversion: InversionSpec,
    #[serde(default)]
    pub validation: ValidationSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let scenario: Scenario =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks every precondition the commands rely on.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCENARIO_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported scenario schema_version {} (expected {SCENARIO_VERSION})",
                self.schema_version
            )));
        }
        self.medium.validate()?;
        let grid = self.grid()?;
        let mesh = self.mesh()?;
        mesh.check_encloses(&grid)?;
        let freqs = self.freqs()?;
        if freqs.is_empty() {
            return Err(Error::InvalidArgument("at least one frequency is required".into()));
        }
        if self.forward_refinement == 0 {
            return Err(Error::InvalidArgument("forward_refinement must be >= 1".into()));
        }
        if !(self.noise.level >= 0.0 && self.noise.level.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise level must be >= 0, got {}",
                self.noise.level
            )));
        }
        if self.imaging.slice_axis > 2 {
            return Err(Error::InvalidArgument(format!(
                "slice_axis must be 0, 1 or 2, got {}",
                self.imaging.slice_axis
            )));
        }
        if let Some(i) = self.imaging.slice_index {
            if i >= grid.dims[self.imaging.slice_axis] {
                return Err(Error::InvalidArgument(format!(
                    "slice_index {i} out of range for axis of length {}",
                    grid.dims[self.imaging.slice_axis]
                )));
            }
        }
        if self.imaging.broadband && freqs.len() < 2 {
            return Err(Error::InvalidArgument(
                "broadband imaging needs at least two frequencies".into(),
            ));
        }
        self.inversion.config().validate()?;
        // sources must rasterize on both the imaging and the forward grid
        self.truth()?;
        self.forward_source()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<VoxelGrid> {
        self.grid.build()
    }

    pub fn forward_grid(&self) -> Result<VoxelGrid> {
        self.grid()?.refined(self.forward_refinement)
    }

    pub fn mesh(&self) -> Result<SurfaceMesh> {
        make_sphere_mesh(self.surface.center, self.surface.radius, self.surface.n_points)
    }

    pub fn freqs(&self) -> Result<FrequencySet> {
        match &self.frequencies {
            FrequencySpec::Omegas(w) => FrequencySet::new(w.clone()),
            FrequencySpec::Band { kappa_min, kappa_max, count } => {
                FrequencySet::band(*kappa_min, *kappa_max, *count, &self.medium)
            }
        }
    }

    fn superpose(&self, grid: &VoxelGrid) -> Result<RealField> {
        let mut total = RealField::zeros(*grid);
        for s in &self.sources {
            total.axpy(1.0, &s.rasterize(grid)?);
        }
        Ok(total)
    }

    /// Ground-truth source on the imaging grid.
    pub fn truth(&self) -> Result<RealField> {
        self.superpose(&self.grid()?)
    }

    /// Source on the forward grid.
    pub fn forward_source(&self) -> Result<RealField> {
        self.superpose(&self.forward_grid()?)
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise.seed.wrapping_add(NOISE_SEED_OFFSET)
    }

    pub fn power_iteration_seed(&self) -> u64 {
        self.noise.seed.wrapping_add(POWER_ITERATION_SEED_OFFSET)
    }

    pub fn validation_seed(&self) -> u64 {
        self.noise.seed.wrapping_add(VALIDATION_SEED_OFFSET)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "grid": {"center": [0, 0, 0], "spacing": 0.5, "dims": [3, 3, 3]},
        "surface": {"center": [0, 0, 0], "radius": 5, "n_points": 4},
        "sources": [{"type": "dipole", "position": [0, 0, 0], "moment": [0, 0, 1]}],
        "frequencies": {"omegas": [3.0]}
    }"#;

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.forward_refinement, 1);
        assert_eq!(s.inversion.max_iters, 500);
        assert_eq!(s.truth().unwrap().l0_count(), 1);
        let again = Scenario::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn band_spec() {
        let text = MINIMAL.replace(
            r#"{"omegas": [3.0]}"#,
            r#"{"band": {"kappa_min": 2, "kappa_max": 4, "count": 3}}"#,
        );
        let s = Scenario::from_json(&text).unwrap();
        assert_eq!(s.freqs().unwrap().omegas(), &[2.0, 3.0, 4.0]);
    }

    #[test]
    fn rejects_invalid_scenarios() {
        // grid not inside the sphere
        let t = MINIMAL.replace(r#""radius": 5"#, r#""radius": 0.5"#);
        assert!(matches!(Scenario::from_json(&t), Err(Error::Geometry(_))));
        // source outside grid
        let t = MINIMAL.replace(r#""position": [0, 0, 0]"#, r#""position": [3, 0, 0]"#);
        assert!(Scenario::from_json(&t).is_err());
        // both origin and center
        let t = MINIMAL.replace(r#""center": [0, 0, 0], "spacing""#, r#""center": [0, 0, 0], "origin": [0, 0, 0], "spacing""#);
        assert!(Scenario::from_json(&t).is_err());
        // unknown key
        let t = MINIMAL.replace(r#""grid""#, r#""gird": 1, "grid""#);
        assert!(Scenario::from_json(&t).is_err());
        // broadband with one frequency
        let t = MINIMAL.replace(r#""frequencies""#, r#""imaging": {"broadband": true}, "frequencies""#);
        assert!(Scenario::from_json(&t).is_err());
    }
}
