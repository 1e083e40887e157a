//! Shared fixtures for the integration tests.

use emloc::field::RealField;
use emloc::geometry::{FrequencySet, Medium, VoxelGrid};
use emloc::inverse::{FidelityProblem, KernelPath, Penalty};

/// Two voxels, two frequencies: six unknowns, small enough to search exhaustively.
pub fn tiny() -> (FidelityProblem, RealField) {
    let m = Medium::default();
    let grid = VoxelGrid::new([0.0; 3], 0.5, [2, 1, 1]).unwrap();
    let freqs = FrequencySet::new(vec![3.0, 5.0]).unwrap();
    let zeros = vec![RealField::zeros(grid); 2];
    let shape = FidelityProblem::with_targets(grid, &freqs, &m, zeros, KernelPath::Direct).unwrap();
    let mut truth = RealField::zeros(grid);
    truth.data.copy_from_slice(&[0.8, 0.0, -0.5, 0.0, 0.3, 0.0]);
    let mut targets: Vec<RealField> = (0..2).map(|n| shape.apply_fidelity_operator(&truth, n).unwrap()).collect();
    // perturb so the minimizer is not the truth itself
    for (n, t) in targets.iter_mut().enumerate() {
        for (i, v) in t.data.iter_mut().enumerate() {
            *v += 0.05 * v.abs().max(1e-3) * (((i + 3 * n) as f64) * 1.7).sin();
        }
    }
    let p = FidelityProblem::with_targets(grid, &freqs, &m, targets, KernelPath::Direct).unwrap();
    (p, truth)
}

pub fn lambda_max(p: &FidelityProblem) -> f64 {
    p.grad_fidelity(&RealField::zeros(p.grid)).unwrap().max_abs()
}

/// Coarse lattice search followed by exact 1-D minimization coordinate by
/// coordinate (golden section on each convex slice).
pub fn brute_force(p: &FidelityProblem, lambda: f64, radius: f64) -> (RealField, f64) {
    let obj = |x: &RealField| p.objective(x, lambda, Penalty::Componentwise).unwrap();
    let steps = 7usize;
    let coord = |i: usize| -radius + 2.0 * radius * i as f64 / (steps - 1) as f64;
    let mut best = RealField::zeros(p.grid);
    let mut best_val = obj(&best);
    let mut x = RealField::zeros(p.grid);
    for code in 0..steps.pow(6) {
        let mut c = code;
        for v in x.data.iter_mut() {
            *v = coord(c % steps);
            c /= steps;
        }
        let val = obj(&x);
        if val < best_val {
            best_val = val;
            best = x.clone();
        }
    }
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _sweep in 0..400 {
        let before = best_val;
        for i in 0..6 {
            let at = |t: f64, base: &RealField| {
                let mut y = base.clone();
                y.data[i] = t;
                obj(&y)
            };
            let (mut a, mut b) = (best.data[i] - radius, best.data[i] + radius);
            // minimizer of a convex slice may sit at a kink at zero
            let mut cands = vec![0.0];
            for _ in 0..120 {
                let c = b - gr * (b - a);
                let d = a + gr * (b - a);
                if at(c, &best) < at(d, &best) {
                    b = d;
                } else {
                    a = c;
                }
            }
            cands.push(0.5 * (a + b));
            for t in cands {
                let v = at(t, &best);
                if v < best_val {
                    best_val = v;
                    best.data[i] = t;
                }
            }
        }
        if before - best_val <= 1e-15 * best_val.abs() {
            break;
        }
    }
    (best, best_val)
}

