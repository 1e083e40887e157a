use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use emloc::io::{cmd_forward, cmd_image, cmd_invert, cmd_validate, ArrayFormat, RunOptions, Scenario};
use emloc::Result;

#[derive(Parser)]
#[command(name = "emloc", version, about = "Electromagnetic source localization from boundary field data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize boundary data from the scenario's sources
    Forward(Common),
    /// Form phase-conjugation images from stored boundary data
    Image(Common),
    /// Refine stored images by l1-regularized inversion
    Invert(Common),
    /// Run the numerical self-checks
    Validate(Common),
    /// forward, image and invert in sequence
    Run(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; defaults to the scenario's output_dir, then `out`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory with the previous stage's outputs (defaults to --out)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Worker threads; 0 picks automatically, 1 is byte-reproducible
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: ArrayFormat,
}

fn parse_format(s: &str) -> std::result::Result<ArrayFormat, String> {
    s.parse().map_err(|e: emloc::Error| e.to_string())
}

fn setup(common: &Common) -> Result<(Scenario, RunOptions)> {
    if common.threads > 0 {
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(common.threads).build_global();
    }
    let scenario = Scenario::load(&common.scenario)?;
    let out = common
        .out
        .clone()
        .or_else(|| scenario.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut opts = RunOptions::new(out, common.format);
    opts.input = common.input.clone();
    Ok((scenario, opts))
}

fn forward(s: &Scenario, o: &RunOptions) -> Result<()> {
    let r = cmd_forward(s, o)?;
    println!(
        "forward: {} rows ({} points x {} frequencies), rms |E| = {:.6e}",
        r.rows,
        r.data.n_points(),
        r.data.n_freqs(),
        r.rms
    );
    Ok(())
}

fn image(s: &Scenario, o: &RunOptions) -> Result<()> {
    let r = cmd_image(s, o)?;
    let p = r.peak_position;
    println!(
        "image: {} frequencies, peak of sum |I_n| at voxel {:?} = ({:.4}, {:.4}, {:.4})",
        r.stack.images.len(),
        r.peak_voxel,
        p[0],
        p[1],
        p[2]
    );
    Ok(())
}

fn invert(s: &Scenario, o: &RunOptions) -> Result<()> {
    let r = cmd_invert(s, o)?;
    let m = &r.summary;
    println!(
        "invert: {} iterations (converged: {}), L = {:.6e}, M = {:.6e}, R = {:.6e}, nonzeros = {}",
        m.iterations, m.converged, m.objective, m.fidelity, m.regularizer, m.l0_count
    );
    Ok(())
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Forward(c) => {
            let (s, o) = setup(&c)?;
            forward(&s, &o)?;
        }
        Command::Image(c) => {
            let (s, o) = setup(&c)?;
            image(&s, &o)?;
        }
        Command::Invert(c) => {
            let (s, o) = setup(&c)?;
            invert(&s, &o)?;
        }
        Command::Run(c) => {
            let (s, mut o) = setup(&c)?;
            forward(&s, &o)?;
            o.input = None;
            image(&s, &o)?;
            invert(&s, &o)?;
        }
        Command::Validate(c) => {
            let (s, o) = setup(&c)?;
            let report = cmd_validate(&s, &o)?;
            print!("{}", report.to_text());
            return Ok(report.all_passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: one or more validation checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
