//! l1-regularized refinement of the single-frequency images.
//!
//! The unknown is a real vector field `J` on the grid. The smooth part is
//! `M(J) = 1/(2N) sum_n ||A_n J - b_n||^2` with `b_n = Re I_n`, the penalty
//! is `R(J) = lambda ||J||_1`, and all inner products and norms carry the
//! voxel volume `h^3`.

mod fista;
mod operator;

pub use fista::{
    fista_backtracking, ista_baseline, lipschitz_estimate, FistaConfig, FistaTrace, IterRecord, Momentum,
};
pub use operator::{
    green_operator, DiagonalOperator, DirectKernelOperator, FftKernelOperator, FidelityOperator, KernelPath,
    KernelTable,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{dot_flat, RealField};
use crate::geometry::{FrequencySet, Medium, VoxelGrid};
use crate::imaging::ImageStack;

/// How `||J||_1` aggregates the three components of each voxel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    /// Sum of absolute values of all `3 n` scalars.
    #[default]
    Componentwise,
    /// Sum over voxels of the Euclidean norm of the vector.
    Group,
}

impl Penalty {
    pub fn value(&self, field: &RealField) -> f64 {
        match self {
            Penalty::Componentwise => field.l1_norm(),
            Penalty::Group => field.group_l1_norm(),
        }
    }
}

pub struct FidelityProblem {
    pub grid: VoxelGrid,
    operators: Vec<Box<dyn FidelityOperator>>,
    targets: Vec<RealField>,
}

impl FidelityProblem {
    pub fn new(grid: VoxelGrid, operators: Vec<Box<dyn FidelityOperator>>, targets: Vec<RealField>) -> Result<Self> {
        if operators.is_empty() || operators.len() != targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} operators for {} targets",
                operators.len(),
                targets.len()
            )));
        }
        for t in &targets {
            t.check_grid(&grid)?;
        }
        if let Some(op) = operators.iter().find(|op| op.dim() != 3 * grid.len()) {
            return Err(Error::DimensionMismatch(format!(
                "operator acts on {} scalars, grid has {}",
                op.dim(),
                3 * grid.len()
            )));
        }
        Ok(Self {
            grid,
            operators,
            targets,
        })
    }

    /// Green's-kernel operators for every frequency with the given targets.
    pub fn with_targets(
        grid: VoxelGrid,
        freqs: &FrequencySet,
        medium: &Medium,
        targets: Vec<RealField>,
        path: KernelPath,
    ) -> Result<Self> {
        let operators = freqs
            .omegas()
            .iter()
            .map(|w| green_operator(&grid, *w, medium, path))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, operators, targets)
    }

    /// Targets are the real parts of the single-frequency images.
    pub fn from_images(stack: &ImageStack, medium: &Medium, path: KernelPath) -> Result<Self> {
        stack.validate()?;
        let freqs = FrequencySet::new(stack.omegas.clone())?;
        let targets = stack.images.iter().map(|f| f.re()).collect();
        Self::with_targets(stack.grid, &freqs, medium, targets, path)
    }

    pub fn n_freqs(&self) -> usize {
        self.operators.len()
    }

    pub fn targets(&self) -> &[RealField] {
        &self.targets
    }

    fn check(&self, field: &RealField) -> Result<()> {
        field.check_grid(&self.grid)
    }

    pub fn apply_fidelity_operator(&self, field: &RealField, n: usize) -> Result<RealField> {
        self.check(field)?;
        let op = self.operators.get(n).ok_or_else(|| {
            Error::InvalidArgument(format!("frequency index {n} out of range (N = {})", self.n_freqs()))
        })?;
        let mut out = RealField::zeros(self.grid);
        op.apply(&field.data, &mut out.data);
        Ok(out)
    }

    /// `A_n J` for every frequency.
    pub(crate) fn forward_all(&self, data: &[f64]) -> Vec<Vec<f64>> {
        self.operators
            .iter()
            .map(|op| {
                let mut out = vec![0.0; data.len()];
                op.apply(data, &mut out);
                out
            })
            .collect()
    }

    /// Fidelity from precomputed `A_n J`.
    pub(crate) fn fidelity_from(&self, forward: &[Vec<f64>]) -> f64 {
        let vol = self.grid.voxel_volume();
        let n = self.n_freqs() as f64;
        forward
            .iter()
            .zip(&self.targets)
            .map(|(aj, b)| aj.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
            .sum::<f64>()
            * vol
            / (2.0 * n)
    }

    /// Gradient from precomputed `A_n J`.
    pub(crate) fn grad_from(&self, forward: &[Vec<f64>]) -> Vec<f64> {
        let n = self.n_freqs() as f64;
        let parts: Vec<Vec<f64>> = self
            .operators
            .par_iter()
            .zip(forward.par_iter().zip(&self.targets))
            .map(|(op, (aj, b))| {
                let resid: Vec<f64> = aj.iter().zip(&b.data).map(|(x, y)| x - y).collect();
                let mut out = vec![0.0; resid.len()];
                op.apply(&resid, &mut out);
                out
            })
            .collect();
        let mut grad = vec![0.0; 3 * self.grid.len()];
        // fixed summation order over frequencies
        for p in &parts {
            for (g, v) in grad.iter_mut().zip(p) {
                *g += v / n;
            }
        }
        grad
    }

    pub fn fidelity(&self, field: &RealField) -> Result<f64> {
        self.check(field)?;
        Ok(self.fidelity_from(&self.forward_all(&field.data)))
    }

    /// `grad M = (1/N) sum_n A_n (A_n J - b_n)`, the gradient for the
    /// volume-weighted inner product.
    pub fn grad_fidelity(&self, field: &RealField) -> Result<RealField> {
        self.check(field)?;
        let g = self.grad_from(&self.forward_all(&field.data));
        RealField::from_data(self.grid, g)
    }

    pub fn objective(&self, field: &RealField, lambda: f64, penalty: Penalty) -> Result<f64> {
        Ok(self.fidelity(field)? + lambda * penalty.value(field))
    }

    /// Quadratic majorizer
    /// `P(x, y) = M(y) + <x - y, grad M(y)> + gamma/2 ||x - y||^2 + R(x)`.
    pub fn majorizer(
        &self,
        lambda: f64,
        gamma: f64,
        penalty: Penalty,
        x: &RealField,
        y: &RealField,
    ) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        let fy = self.forward_all(&y.data);
        let m = self.fidelity_from(&fy);
        let g = self.grad_from(&fy);
        Ok(majorizer_value(&self.grid, m, &g, lambda, gamma, penalty, x, y))
    }

    /// Minimizer of the majorizer in `x`: `prox(y - grad M(y) / gamma, lambda / gamma)`.
    pub fn prox_step(&self, lambda: f64, gamma: f64, penalty: Penalty, y: &RealField) -> Result<RealField> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("step constant gamma must be > 0, got {gamma}")));
        }
        self.check(y)?;
        let g = self.grad_from(&self.forward_all(&y.data));
        Ok(prox_from_grad(&self.grid, &y.data, &g, lambda, gamma, penalty))
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn majorizer_value(
    grid: &VoxelGrid,
    m_y: f64,
    grad_y: &[f64],
    lambda: f64,
    gamma: f64,
    penalty: Penalty,
    x: &RealField,
    y: &RealField,
) -> f64 {
    let vol = grid.voxel_volume();
    let diff: Vec<f64> = x.data.iter().zip(&y.data).map(|(a, b)| a - b).collect();
    m_y + vol * dot_flat(&diff, grad_y) + 0.5 * gamma * vol * dot_flat(&diff, &diff) + lambda * penalty.value(x)
}

pub(crate) fn prox_from_grad(
    grid: &VoxelGrid,
    y: &[f64],
    grad: &[f64],
    lambda: f64,
    gamma: f64,
    penalty: Penalty,
) -> RealField {
    let v: Vec<f64> = y.iter().zip(grad).map(|(a, g)| a - g / gamma).collect();
    let field = RealField { grid: *grid, data: v };
    let t = lambda / gamma;
    match penalty {
        Penalty::Componentwise => shrink(field, t),
        Penalty::Group => group_shrink(field, t),
    }
}

fn shrink(mut field: RealField, t: f64) -> RealField {
    for v in field.data.iter_mut() {
        *v = soft_threshold(*v, t);
    }
    field
}

fn group_shrink(mut field: RealField, t: f64) -> RealField {
    for c in field.data.chunks_exact_mut(3) {
        let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        let f = if n > t { 1.0 - t / n } else { 0.0 };
        c.iter_mut().for_each(|v| *v *= f);
    }
    field
}

/// `sign(v) max(|v| - t, 0)`
#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Componentwise soft-thresholding of every scalar of the field.
pub fn prox_l1(field: &RealField, threshold: f64) -> Result<RealField> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be >= 0, got {threshold}"
        )));
    }
    Ok(shrink(field.clone(), threshold))
}

/// Voxelwise Euclidean shrinkage (group variant of [`prox_l1`]).
pub fn prox_group_l1(field: &RealField, threshold: f64) -> Result<RealField> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be >= 0, got {threshold}"
        )));
    }
    Ok(group_shrink(field.clone(), threshold))
}
