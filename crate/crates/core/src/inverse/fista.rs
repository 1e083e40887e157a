//! FISTA with backtracking, and the unaccelerated ISTA baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{majorizer_value, prox_from_grad, FidelityProblem, Penalty};
use crate::error::{Error, Result};
use crate::field::{dot_flat, RealField};

/// Momentum coefficient used to extrapolate `y_{k+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Momentum {
    /// `(s_k - 1) / s_{k+1}`
    #[default]
    Standard,
    /// `s_{k-1} / s_{k+1}` with `s_0 = 1`
    Lagged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FistaConfig {
    pub lambda: f64,
    pub gamma0: f64,
    pub eta: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub momentum: Momentum,
    pub penalty: Penalty,
}

impl Default for FistaConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            gamma0: 1.0,
            eta: 2.0,
            max_iters: 500,
            rel_tol: 1e-6,
            momentum: Momentum::Standard,
            penalty: Penalty::Componentwise,
        }
    }
}

impl FistaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return bad(format!("gamma0 must be > 0, got {}", self.gamma0));
        }
        if !(self.eta > 1.0 && self.eta.is_finite()) {
            return bad(format!("eta must be > 1, got {}", self.eta));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1".into());
        }
        if !(self.rel_tol >= 0.0) {
            return bad(format!("rel_tol must be >= 0, got {}", self.rel_tol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub k: usize,
    /// `L(x_k) = M(x_k) + R(x_k)`
    pub objective: f64,
    pub fidelity: f64,
    pub regularizer: f64,
    pub gamma: f64,
    /// Momentum scalar `s_k` in effect at iteration `k`.
    pub s: f64,
    /// Number of step-constant inflations at this iteration.
    pub backtracks: usize,
    pub rel_change: f64,
    /// `P_{gamma_k}(x_k, y_k)` of the accepted step.
    pub majorizer: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FistaTrace {
    pub records: Vec<IterRecord>,
    pub converged: bool,
}

impl FistaTrace {
    pub fn last(&self) -> Option<&IterRecord> {
        self.records.last()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }
}

/// Tolerance on the backtracking test, relative to `|P| + M(0)`.
pub(crate) const BACKTRACK_SLACK: f64 = 1e-12;
const MAX_BACKTRACKS: usize = 200;

/// FISTA with backtracking. Returns the last iterate and the full trace.
pub fn fista_backtracking(
    problem: &FidelityProblem,
    config: &FistaConfig,
    x0: &RealField,
) -> Result<(RealField, FistaTrace)> {
    run(problem, config, x0, true)
}

/// Proximal gradient without momentum; the objective is non-increasing.
pub fn ista_baseline(
    problem: &FidelityProblem,
    config: &FistaConfig,
    x0: &RealField,
) -> Result<(RealField, FistaTrace)> {
    run(problem, config, x0, false)
}

fn run(
    problem: &FidelityProblem,
    config: &FistaConfig,
    x0: &RealField,
    accelerated: bool,
) -> Result<(RealField, FistaTrace)> {
    config.validate()?;
    x0.check_grid(&problem.grid)?;
    let grid = problem.grid;
    let lambda = config.lambda;
    let penalty = config.penalty;
    let m_ref = problem.fidelity_from(&vec![vec![0.0; 3 * grid.len()]; problem.n_freqs()]);

    let mut trace = FistaTrace::default();
    let mut x = x0.clone();
    let mut y = x0.clone();
    let mut ax = problem.forward_all(&x.data);
    let mut ay = ax.clone();
    let mut gamma = config.gamma0;
    let (mut s, mut s_prev) = (1.0f64, 1.0f64);

    for k in 1..=config.max_iters {
        let m_y = problem.fidelity_from(&ay);
        let grad_y = problem.grad_from(&ay);

        let mut backtracks = 0;
        let (x_new, ax_new, m_x, r_x, p_val, beta) = loop {
            let beta = gamma * config.eta.powi(backtracks as i32);
            let cand = prox_from_grad(&grid, &y.data, &grad_y, lambda, beta, penalty);
            let a_cand = problem.forward_all(&cand.data);
            let m_x = problem.fidelity_from(&a_cand);
            let r_x = lambda * penalty.value(&cand);
            let p_val = majorizer_value(&grid, m_y, &grad_y, lambda, beta, penalty, &cand, &y);
            let l_x = m_x + r_x;
            if !l_x.is_finite() || !p_val.is_finite() {
                return Err(Error::Divergence {
                    iteration: k,
                    trace: Box::new(trace),
                });
            }
            if l_x <= p_val + BACKTRACK_SLACK * (p_val.abs() + m_ref) {
                break (cand, a_cand, m_x, r_x, p_val, beta);
            }
            backtracks += 1;
            if backtracks > MAX_BACKTRACKS {
                return Err(Error::Divergence {
                    iteration: k,
                    trace: Box::new(trace),
                });
            }
        };
        gamma = beta;

        let diff: Vec<f64> = x_new.data.iter().zip(&x.data).map(|(a, b)| a - b).collect();
        let dn = dot_flat(&diff, &diff).sqrt();
        let xn = dot_flat(&x_new.data, &x_new.data).sqrt();
        let rel_change = if dn == 0.0 { 0.0 } else { dn / xn.max(f64::MIN_POSITIVE) };

        trace.records.push(IterRecord {
            k,
            objective: m_x + r_x,
            fidelity: m_x,
            regularizer: r_x,
            gamma,
            s,
            backtracks,
            rel_change,
            majorizer: p_val,
        });

        let s_next = 0.5 * (1.0 + (1.0 + 4.0 * s * s).sqrt());
        let t = if !accelerated {
            0.0
        } else {
            match config.momentum {
                Momentum::Standard => (s - 1.0) / s_next,
                Momentum::Lagged => s_prev / s_next,
            }
        };
        let x_prev = std::mem::replace(&mut x, x_new);
        let ax_prev = std::mem::replace(&mut ax, ax_new);
        if t == 0.0 {
            y.data.copy_from_slice(&x.data);
            for (a, b) in ay.iter_mut().zip(&ax) {
                a.copy_from_slice(b);
            }
        } else {
            for ((yv, xv), pv) in y.data.iter_mut().zip(&x.data).zip(&x_prev.data) {
                *yv = xv + t * (xv - pv);
            }
            // A is linear: A y = A x + t (A x - A x_prev)
            for ((ayn, axn), apn) in ay.iter_mut().zip(&ax).zip(&ax_prev) {
                for ((a, b), c) in ayn.iter_mut().zip(axn).zip(apn) {
                    *a = b + t * (b - c);
                }
            }
        }
        s_prev = s;
        s = s_next;

        if rel_change < config.rel_tol {
            trace.converged = true;
            break;
        }
    }
    Ok((x, trace))
}

/// Largest eigenvalue of `(1/N) sum_n A_n^2`, the Lipschitz constant of
/// `grad M`, by power iteration.
pub fn lipschitz_estimate(problem: &FidelityProblem, iters: usize, seed: u64) -> Result<f64> {
    let n = 3 * problem.grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut estimate = 0.0;
    let nf = problem.n_freqs() as f64;
    for _ in 0..iters.max(1) {
        let norm = dot_flat(&u, &u).sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        u.iter_mut().for_each(|v| *v /= norm);
        let au = problem.forward_all(&u);
        let mut hu = vec![0.0; n];
        for (op, a) in problem.operators.iter().zip(&au) {
            let mut tmp = vec![0.0; n];
            op.apply(a, &mut tmp);
            for (h, t) in hu.iter_mut().zip(&tmp) {
                *h += t / nf;
            }
        }
        estimate = dot_flat(&u, &hu);
        u = hu;
    }
    Ok(estimate)
}
