//! Numerical self-checks of the kernel, the imaging identities and the
//! inversion gradient, collected into a pass/fail report.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Matrix3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::RealField;
use crate::geometry::{make_sphere_mesh, FrequencySet, Medium, Vec3, VoxelGrid};
use crate::greens::{convention_sign, dyadic_green_ee, hk_identity_residual, measure_convention_sign, Dyadic};
use crate::imaging::delta_identity_residual;
use crate::inverse::{green_operator, FidelityProblem, KernelPath};

/// One line of the report. Passes when `lower <= value < upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub passed: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lower: None,
            upper: Some(upper),
            passed: value < upper,
        }
    }

    pub fn within(name: impl Into<String>, value: f64, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lower: Some(lower),
            upper: Some(upper),
            passed: value >= lower && value <= upper,
        }
    }

    /// Boolean check, recorded as value 1 (holds) or 0.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            lower: Some(1.0),
            upper: None,
            passed: ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationSettings {
    /// Wavenumber of the Helmholtz-Kirchhoff sweeps.
    pub hk_kappa: f64,
    /// Sphere radii in wavelengths; the residual must strictly decrease along it.
    pub hk_radii: Vec<f64>,
    /// Mesh sizes of the point sweep, run at `hk_reference_radius`.
    pub hk_points: Vec<usize>,
    pub hk_reference_radius: f64,
    pub hk_pairs: usize,
    pub hk_tol: f64,
    /// Band edges `W` of the delta sweep.
    pub delta_bands: Vec<f64>,
    pub delta_nodes: usize,
    pub delta_exponent: [f64; 2],
    pub fd_points: usize,
    pub fd_tol: f64,
    pub fd_order: [f64; 2],
    pub gradient_tol: f64,
    pub adjoint_tol: f64,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        Self {
            hk_kappa: 2.0 * PI,
            hk_radii: vec![10.0, 20.0, 50.0, 100.0],
            hk_points: vec![5_000, 10_000, 20_000],
            hk_reference_radius: 50.0,
            hk_pairs: 5,
            hk_tol: 0.05,
            delta_bands: vec![8.0, 16.0, 32.0, 64.0],
            delta_nodes: 512,
            delta_exponent: [2.7, 3.3],
            fd_points: 20,
            fd_tol: 1e-3,
            fd_order: [1.8, 2.2],
            gradient_tol: 1e-6,
            adjoint_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HkRow {
    pub pair: usize,
    pub radius_wavelengths: f64,
    pub n_points: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub band_max: f64,
    pub separation: f64,
    pub trace: f64,
    pub max_off_diagonal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub sign_constant: f64,
    pub checks: Vec<Check>,
    pub hk_sweep: Vec<HkRow>,
    pub delta_sweep: Vec<DeltaRow>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "sign constant s = {}", self.sign_constant);
        for c in &self.checks {
            let range = match (c.lower, c.upper) {
                (Some(l), Some(u)) => format!("in [{l:e}, {u:e}]"),
                (None, Some(u)) => format!("< {u:e}"),
                (Some(l), None) => format!(">= {l:e}"),
                (None, None) => String::new(),
            };
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{tag}  {:<52} {:<14.6e} {range}", c.name, c.value);
        }
        let _ = writeln!(out, "\nHelmholtz-Kirchhoff residuals");
        for r in &self.hk_sweep {
            let _ = writeln!(
                out,
                "  pair {}  R = {:>6} wavelengths  n = {:>6}  residual {:.4e}",
                r.pair, r.radius_wavelengths, r.n_points, r.residual
            );
        }
        let _ = writeln!(out, "\nTruncated-band delta identity");
        for r in &self.delta_sweep {
            let _ = writeln!(
                out,
                "  |x-y| = {}  W = {:>5}  trace {:.6e}  max off-diagonal {:.3e}",
                r.separation, r.band_max, r.trace, r.max_off_diagonal
            );
        }
        out
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Relative residual `|curl curl G - kappa^2 G| / |kappa^2 G|` (Frobenius) of
/// the kernel at separation `sep`, with second-order central differences of
/// step `h` applied column by column.
pub fn curl_curl_residual(sep: &Vec3, omega: f64, medium: &Medium, h: f64) -> Result<f64> {
    if !(h > 0.0) || h >= 0.5 * sep.norm() {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step {h} must be positive and below half the separation"
        )));
    }
    let kappa = medium.kappa(omega);
    let g = |dx: [i32; 3]| -> Result<Dyadic> {
        let p = sep + Vec3::new(dx[0] as f64, dx[1] as f64, dx[2] as f64) * h;
        dyadic_green_ee(&p, omega, medium)
    };
    let g0 = g([0, 0, 0])?;
    // second derivative d_a d_b of every entry
    let mut d2 = [[Dyadic::zeros(); 3]; 3];
    for a in 0..3 {
        for b in a..3 {
            let m = if a == b {
                let mut e = [0; 3];
                e[a] = 1;
                let ne = e.map(|v| -v);
                (g(e)? - g0 * Complex64::new(2.0, 0.0) + g(ne)?) / Complex64::new(h * h, 0.0)
            } else {
                let st = |sa: i32, sb: i32| {
                    let mut e = [0; 3];
                    e[a] = sa;
                    e[b] = sb;
                    e
                };
                (g(st(1, 1))? - g(st(1, -1))? - g(st(-1, 1))? + g(st(-1, -1))?)
                    / Complex64::new(4.0 * h * h, 0.0)
            };
            d2[a][b] = m;
            d2[b][a] = m;
        }
    }
    // (curl curl F)_i = d_i d_j F_j - d_j d_j F_i, for each column F of G
    let mut res = Dyadic::zeros();
    for col in 0..3 {
        for i in 0..3 {
            let mut v = Complex64::new(0.0, 0.0);
            for j in 0..3 {
                v += d2[i][j][(j, col)] - d2[j][j][(i, col)];
            }
            res[(i, col)] = v - g0[(i, col)] * kappa * kappa;
        }
    }
    Ok(res.norm() / (g0.norm() * kappa * kappa))
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Runs every check. All random draws come from `seed`.
pub fn run_validation(settings: &ValidationSettings, medium: &Medium, seed: u64) -> Result<ValidationReport> {
    medium.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    let s = convention_sign();
    checks.push(Check::holds("sign constant is +1 or -1", s == 1.0 || s == -1.0));
    checks.push(Check::holds("sign constant stable on remeasurement", measure_convention_sign() == s));

    kernel_checks(settings, medium, &mut rng, &mut checks)?;
    let hk_sweep = hk_checks(settings, medium, &mut rng, &mut checks)?;
    let delta_sweep = delta_checks(settings, medium, &mut rng, &mut checks)?;
    operator_checks(settings, medium, &mut rng, &mut checks)?;

    Ok(ValidationReport {
        sign_constant: s,
        checks,
        hk_sweep,
        delta_sweep,
    })
}

fn kernel_checks(
    settings: &ValidationSettings,
    medium: &Medium,
    rng: &mut ChaCha8Rng,
    checks: &mut Vec<Check>,
) -> Result<()> {
    let mut worst_fd: f64 = 0.0;
    let mut worst_recip: f64 = 0.0;
    let mut worst_sym: f64 = 0.0;
    let mut orders = Vec::new();
    for _ in 0..settings.fd_points {
        let r = rng.random_range(0.5..2.0);
        let sep = random_unit(rng) * r;
        // residual relative to |kappa^2 G| exceeds fd_tol in the near field (kappa r < 1)
        let omega = medium.omega_for_kappa(rng.random_range(2.5..5.0));
        worst_fd = worst_fd.max(curl_curl_residual(&sep, omega, medium, r / 200.0)?);
        let hs: Vec<f64> = [25.0, 50.0, 100.0, 200.0].iter().map(|d| r / d).collect();
        let res: Vec<f64> = hs
            .iter()
            .map(|h| curl_curl_residual(&sep, omega, medium, *h))
            .collect::<Result<_>>()?;
        orders.push(loglog_slope(&hs, &res));

        let g = dyadic_green_ee(&sep, omega, medium)?;
        let gm = dyadic_green_ee(&(-sep), omega, medium)?;
        worst_recip = worst_recip.max((g - gm).norm() / g.norm());
        worst_sym = worst_sym.max((g - g.transpose()).norm() / g.norm());
    }
    let order = orders.iter().sum::<f64>() / orders.len().max(1) as f64;
    let [lo, hi] = settings.fd_order;
    checks.push(Check::below("curl-curl residual (h = r/200), max", worst_fd, settings.fd_tol));
    checks.push(Check::within("curl-curl convergence order, mean", order, lo, hi));
    checks.push(Check::below("reciprocity G(v) = G(-v), max rel", worst_recip, 1e-14));
    checks.push(Check::below("kernel symmetry G = G^T, max rel", worst_sym, 1e-14));

    // far field: r-hat . (G p) / |G p| < 2 / (kappa r) at kappa r = 100
    let omega = medium.omega_for_kappa(10.0);
    let dir = random_unit(rng);
    // the bound needs |r-hat . p| <= |p_perp|; the radial fraction carries a factor |cot theta|
    let perp = dir.cross(&random_unit(rng)).normalize();
    let p = (perp + dir * rng.random_range(-1.0..1.0)).map(|v| Complex64::new(v, 0.0));
    let gp = dyadic_green_ee(&(dir * 10.0), omega, medium)? * p;
    let radial = (dir.map(|v| Complex64::new(v, 0.0)).transpose() * gp)[0].norm();
    checks.push(Check::below("far-field radial fraction at kappa r = 100", radial / gp.norm(), 2.0 / 100.0));
    Ok(())
}

fn hk_checks(
    settings: &ValidationSettings,
    medium: &Medium,
    rng: &mut ChaCha8Rng,
    checks: &mut Vec<Check>,
) -> Result<Vec<HkRow>> {
    let kappa = settings.hk_kappa;
    let omega = medium.omega_for_kappa(kappa);
    let lambda = 2.0 * PI / kappa;
    // pair 0 is x = y = 0; the rest satisfy kappa |x - y| <= 4
    let mut pairs = vec![(Vec3::zeros(), Vec3::zeros())];
    while pairs.len() < settings.hk_pairs {
        let x = random_unit(rng) * rng.random_range(0.0..1.0 / kappa);
        let y = random_unit(rng) * rng.random_range(0.0..1.0 / kappa);
        pairs.push((x, y));
    }
    let n_max = settings.hk_points.iter().copied().max().unwrap_or(20_000);
    let mut rows = Vec::new();
    let mut worst_ref: f64 = 0.0;
    let mut decreasing = true;
    for &radius in &settings.hk_radii {
        let mesh = make_sphere_mesh([0.0; 3], radius * lambda, n_max)?;
        for (i, (x, y)) in pairs.iter().enumerate() {
            let residual = hk_identity_residual(x, y, omega, medium, &mesh)?;
            if let Some(prev) = rows.iter().rev().find(|r: &&HkRow| r.pair == i && r.n_points == n_max) {
                decreasing &= residual < prev.residual;
            }
            if radius == settings.hk_reference_radius {
                worst_ref = worst_ref.max(residual);
            }
            rows.push(HkRow {
                pair: i,
                radius_wavelengths: radius,
                n_points: n_max,
                residual,
            });
        }
    }
    for &n in settings.hk_points.iter().filter(|&&n| n != n_max) {
        let mesh = make_sphere_mesh([0.0; 3], settings.hk_reference_radius * lambda, n)?;
        for (i, (x, y)) in pairs.iter().enumerate() {
            rows.push(HkRow {
                pair: i,
                radius_wavelengths: settings.hk_reference_radius,
                n_points: n,
                residual: hk_identity_residual(x, y, omega, medium, &mesh)?,
            });
        }
    }
    if settings.hk_radii.contains(&settings.hk_reference_radius) {
        checks.push(Check::below(
            format!("HK residual at R = {} wavelengths, n = {n_max}", settings.hk_reference_radius),
            worst_ref,
            settings.hk_tol,
        ));
    }
    checks.push(Check::holds("HK residual strictly decreasing in R", decreasing));
    Ok(rows)
}

fn delta_checks(
    settings: &ValidationSettings,
    medium: &Medium,
    rng: &mut ChaCha8Rng,
    checks: &mut Vec<Check>,
) -> Result<Vec<DeltaRow>> {
    let mut rows = Vec::new();
    let x = Vec3::zeros();
    let y_off = random_unit(rng);
    let mut on = Vec::new();
    let mut off = Vec::new();
    let mut sym: f64 = 0.0;
    for &w in &settings.delta_bands {
        for (y, store) in [(x, &mut on), (y_off, &mut off)] {
            let m = delta_identity_residual(&x, &y, medium, w, settings.delta_nodes)?;
            sym = sym.max((m - m.transpose()).abs().max());
            store.push(m.trace());
            rows.push(DeltaRow {
                band_max: w,
                separation: (x - y).norm(),
                trace: m.trace(),
                max_off_diagonal: off_diagonal(&m),
            });
        }
    }
    if let (Some(first), Some(last)) = (off.first(), off.last()) {
        checks.push(Check::holds(
            "delta trace at |x-y| = 1 decays with the band",
            last.abs() < first.abs(),
        ));
    }
    if let (Some(f_off), Some(l_off), Some(f_on), Some(l_on)) = (off.first(), off.last(), on.first(), on.last()) {
        checks.push(Check::holds(
            "delta trace at |x-y| = 1 relative to x = y decays",
            (l_off / l_on).abs() < (f_off / f_on).abs(),
        ));
    }
    let abs_on: Vec<f64> = on.iter().map(|t| t.abs()).collect();
    let [lo, hi] = settings.delta_exponent;
    checks.push(Check::within(
        "delta trace growth exponent at x = y",
        loglog_slope(&settings.delta_bands, &abs_on),
        lo,
        hi,
    ));
    checks.push(Check::below("delta matrix asymmetry", sym, 1e-12));
    Ok(rows)
}

fn off_diagonal(m: &Matrix3<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                worst = worst.max(m[(i, j)].abs());
            }
        }
    }
    worst
}

fn operator_checks(
    settings: &ValidationSettings,
    medium: &Medium,
    rng: &mut ChaCha8Rng,
    checks: &mut Vec<Check>,
) -> Result<()> {
    let grid = VoxelGrid::centered([0.0; 3], 0.25, [4, 4, 4])?;
    let freqs = FrequencySet::new(vec![medium.omega_for_kappa(3.0), medium.omega_for_kappa(7.0)])?;
    let n = 3 * grid.len();
    let random_field = |rng: &mut ChaCha8Rng| {
        let data = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        RealField::from_data(grid, data)
    };

    let mut worst_adj: f64 = 0.0;
    let mut worst_path: f64 = 0.0;
    for &omega in freqs.omegas() {
        let direct = green_operator(&grid, omega, medium, KernelPath::Direct)?;
        let fft = green_operator(&grid, omega, medium, KernelPath::Fft)?;
        for _ in 0..10 {
            let u = random_field(rng)?;
            let v = random_field(rng)?;
            for op in [&direct, &fft] {
                let mut au = vec![0.0; n];
                let mut av = vec![0.0; n];
                op.apply(&u.data, &mut au);
                op.apply(&v.data, &mut av);
                let lhs: f64 = au.iter().zip(&v.data).map(|(a, b)| a * b).sum();
                let rhs: f64 = u.data.iter().zip(&av).map(|(a, b)| a * b).sum();
                let scale = (au.iter().map(|a| a * a).sum::<f64>() * v.norm_sq()).sqrt().max(f64::MIN_POSITIVE);
                worst_adj = worst_adj.max((lhs - rhs).abs() / scale);
            }
            let mut a = vec![0.0; n];
            let mut b = vec![0.0; n];
            direct.apply(&u.data, &mut a);
            fft.apply(&u.data, &mut b);
            let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            worst_path = worst_path.max(diff / norm);
        }
    }
    checks.push(Check::below("operator self-adjointness, max rel", worst_adj, settings.adjoint_tol));
    checks.push(Check::below("fast path vs direct summation, max rel", worst_path, 1e-10));

    let targets = (0..freqs.len()).map(|_| random_field(rng)).collect::<Result<Vec<_>>>()?;
    let problem = FidelityProblem::with_targets(grid, &freqs, medium, targets, KernelPath::Direct)?;
    let x = random_field(rng)?;
    let grad = problem.grad_fidelity(&x)?;
    let eps = 1e-3;
    let mut worst_grad: f64 = 0.0;
    for _ in 0..20 {
        let d = random_field(rng)?;
        let analytic = grad.dot(&d);
        let plus = problem.fidelity(&(&x + &(&d * eps)))?;
        let minus = problem.fidelity(&(&x - &(&d * eps)))?;
        let fd = (plus - minus) / (2.0 * eps);
        worst_grad = worst_grad.max((analytic - fd).abs() / analytic.abs().max(f64::MIN_POSITIVE));
    }
    checks.push(Check::below("gradient vs central differences, max rel", worst_grad, settings.gradient_tol));
    Ok(())
}
