//! Command drivers behind the `emloc` subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::container::{
    read_boundary_data, read_image_stack, write_boundary_data, write_image_stack, write_json_file,
    write_real_field, write_trace, ArrayFormat,
};
use super::pgm::{slice_image, write_pgm};
use super::scenario::{Algorithm, InitialGuess, Scenario};
use crate::error::{Error, Result};
use crate::field::RealField;
use crate::forward::{add_noise, simulate_boundary_data, BoundaryData};
use crate::imaging::{broadband_from_stack, phase_conj_stack, ImageStack};
use crate::inverse::{fista_backtracking, ista_baseline, FidelityProblem, FistaTrace};
use crate::validation::{run_validation, ValidationReport};

pub const DATA_STEM: &str = "data";
pub const TRUTH_STEM: &str = "truth";
pub const IMAGES_STEM: &str = "images";
pub const RESULT_STEM: &str = "result";
pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Directory holding the previous stage's outputs; `out` when absent.
    pub input: Option<PathBuf>,
    pub format: ArrayFormat,
}

impl RunOptions {
    pub fn new(out: impl Into<PathBuf>, format: ArrayFormat) -> Self {
        Self {
            out: out.into(),
            input: None,
            format,
        }
    }

    fn input_dir(&self) -> &Path {
        self.input.as_deref().unwrap_or(&self.out)
    }

    fn prepare(&self) -> Result<()> {
        fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutcome {
    pub data: BoundaryData,
    pub rms: f64,
    pub rows: usize,
    pub files: Vec<PathBuf>,
}

/// Synthesizes (noisy) boundary data and writes it with the ground truth.
pub fn cmd_forward(scenario: &Scenario, opts: &RunOptions) -> Result<ForwardOutcome> {
    scenario.validate()?;
    opts.prepare()?;
    let source = scenario.forward_source()?;
    let clean = simulate_boundary_data(&source, &scenario.mesh()?, &scenario.freqs()?, &scenario.medium)?;
    let data = if scenario.noise.level > 0.0 {
        add_noise(&clean, scenario.noise.level, scenario.noise_seed())?
    } else {
        clean
    };
    let files = vec![
        write_boundary_data(&opts.out, DATA_STEM, &data, &scenario.medium, opts.format)?,
        write_real_field(&opts.out, TRUTH_STEM, &scenario.truth()?, opts.format)?,
    ];
    Ok(ForwardOutcome {
        rms: data.rms(),
        rows: data.n_points() * data.n_freqs(),
        data,
        files,
    })
}

#[derive(Debug, Clone)]
pub struct ImageOutcome {
    pub stack: ImageStack,
    /// Voxel and position where the sum over frequencies of `|I_n|` peaks.
    pub peak_voxel: [usize; 3],
    pub peak_position: [f64; 3],
    pub files: Vec<PathBuf>,
}

fn check_data_matches(scenario: &Scenario, data: &BoundaryData) -> Result<()> {
    let freqs = scenario.freqs()?;
    if data.n_points() != scenario.surface.n_points {
        return Err(Error::DimensionMismatch(format!(
            "data has {} mesh points, scenario expects {}",
            data.n_points(),
            scenario.surface.n_points
        )));
    }
    let same_freqs = data.n_freqs() == freqs.len()
        && data
            .freqs
            .omegas()
            .iter()
            .zip(freqs.omegas())
            .all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs());
    if !same_freqs {
        return Err(Error::DimensionMismatch(format!(
            "data has {} frequencies that differ from the scenario's {}",
            data.n_freqs(),
            freqs.len()
        )));
    }
    Ok(())
}

/// Phase-conjugation images of the stored data on the scenario grid.
pub fn cmd_image(scenario: &Scenario, opts: &RunOptions) -> Result<ImageOutcome> {
    scenario.validate()?;
    opts.prepare()?;
    let (data, _) = read_boundary_data(&opts.input_dir().join(format!("{DATA_STEM}.json")))?;
    check_data_matches(scenario, &data)?;
    let grid = scenario.grid()?;
    let mut stack = phase_conj_stack(&data, &grid, &scenario.medium)?;
    if scenario.imaging.broadband {
        stack.broadband = Some(broadband_from_stack(&stack)?);
    }
    let mut files = vec![write_image_stack(&opts.out, IMAGES_STEM, &stack, opts.format)?];

    let sum = stack.magnitude_sum();
    let peak = sum
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (v, &m)| if m > best.1 { (v, m) } else { best })
        .0;
    let axis = scenario.imaging.slice_axis;
    let index = scenario.imaging.slice_index.unwrap_or(grid.dims[axis] / 2);
    let path = opts.out.join("slice_magnitude_sum.pgm");
    write_pgm(&path, &slice_image(&grid, &sum, axis, index)?)?;
    files.push(path);
    if let Some(b) = &stack.broadband {
        let path = opts.out.join("slice_broadband.pgm");
        write_pgm(&path, &slice_image(&grid, &b.magnitudes(), axis, index)?)?;
        files.push(path);
    }
    let c = grid.center(peak);
    Ok(ImageOutcome {
        peak_voxel: grid.ijk(peak),
        peak_position: [c.x, c.y, c.z],
        stack,
        files,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionSummary {
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `L = M + R` at the returned iterate.
    pub objective: f64,
    pub fidelity: f64,
    pub regularizer: f64,
    pub gamma: f64,
    pub l0_count: usize,
    /// `|grad M(x)| / |grad M(x0)|`
    pub gradient_norm_relative: f64,
    /// `|Im I_n| / |Re I_n|` summed over frequencies, a diagnostic of the
    /// part of the images the real-kernel model cannot explain.
    pub image_imaginary_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct InvertOutcome {
    pub field: RealField,
    pub trace: FistaTrace,
    pub summary: InversionSummary,
    pub files: Vec<PathBuf>,
}

/// l1-regularized refinement of the stored images.
pub fn cmd_invert(scenario: &Scenario, opts: &RunOptions) -> Result<InvertOutcome> {
    scenario.validate()?;
    opts.prepare()?;
    let stack = read_image_stack(&opts.input_dir().join(format!("{IMAGES_STEM}.json")))?;
    let grid = scenario.grid()?;
    if !stack.grid.same_as(&grid) {
        return Err(Error::DimensionMismatch("images were formed on a different grid".into()));
    }
    let spec = &scenario.inversion;
    let problem = FidelityProblem::from_images(&stack, &scenario.medium, spec.kernel)?;
    let x0 = match spec.initial_guess {
        InitialGuess::Zero => RealField::zeros(grid),
        InitialGuess::MeanReal => stack.mean_real(),
    };
    let config = spec.config();
    let trace_path = opts.out.join(TRACE_FILE);
    let run = match spec.algorithm {
        Algorithm::Fista => fista_backtracking(&problem, &config, &x0),
        Algorithm::Ista => ista_baseline(&problem, &config, &x0),
    };
    let (field, trace) = match run {
        Ok(r) => r,
        Err(Error::Divergence { iteration, trace }) => {
            write_trace(&trace_path, &trace)?;
            return Err(Error::Divergence { iteration, trace });
        }
        Err(e) => return Err(e),
    };
    write_trace(&trace_path, &trace)?;

    let g0 = problem.grad_fidelity(&x0)?.norm();
    let g = problem.grad_fidelity(&field)?.norm();
    let (re, im) = stack.images.iter().fold((0.0, 0.0), |(r, i), img| (r + img.re().norm(), i + img.im().norm()));
    let last = trace.last().copied();
    let fidelity = problem.fidelity(&field)?;
    let regularizer = config.lambda * config.penalty.value(&field);
    let summary = InversionSummary {
        algorithm: spec.algorithm,
        lambda: config.lambda,
        iterations: trace.records.len(),
        converged: trace.converged,
        objective: fidelity + regularizer,
        fidelity,
        regularizer,
        gamma: last.map_or(config.gamma0, |r| r.gamma),
        l0_count: field.l0_count(),
        gradient_norm_relative: if g0 > 0.0 { g / g0 } else { 0.0 },
        image_imaginary_ratio: if re > 0.0 { im / re } else { 0.0 },
    };
    let summary_path = opts.out.join(SUMMARY_FILE);
    write_json_file(&summary_path, &summary)?;
    let files = vec![
        write_real_field(&opts.out, RESULT_STEM, &field, opts.format)?,
        trace_path,
        summary_path,
    ];
    Ok(InvertOutcome {
        field,
        trace,
        summary,
        files,
    })
}

/// Runs the self-checks and writes `validation.json` and `validation.txt`.
/// Check failures are reported in the returned report, not as an error.
pub fn cmd_validate(scenario: &Scenario, opts: &RunOptions) -> Result<ValidationReport> {
    opts.prepare()?;
    let report = run_validation(&scenario.validation, &scenario.medium, scenario.validation_seed())?;
    write_json_file(&opts.out.join("validation.json"), &report)?;
    let path = opts.out.join("validation.txt");
    fs::write(&path, report.to_text()).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}
