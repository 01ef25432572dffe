//! `sostensor`: generate instances, certify, decompose, run experiments.
//!
//! Exit codes: 0 success or YES, 3 certified NO, 4 UNDECIDED (relaxation did
//! not converge), 5 extraction stall, 1 usage, IO or validation error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sos_tensor::certificate::{self, Verdict};
use sos_tensor::decomposition::{self, ExtractionConfig, RefineOptions, StartMode};
use sos_tensor::instances::{self, NoiseSpec};
use sos_tensor::io::TensorFile;
use sos_tensor::lab::{self, ScalingOptions};
use sos_tensor::moment::{self, SdpVerdict, SolveOptions};
use sos_tensor::{Ensemble, Error};

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_NO: u8 = 3;
const EXIT_UNDECIDED: u8 = 4;
const EXIT_STALL: u8 = 5;

#[derive(Parser, Debug)]
#[command(
    name = "sostensor",
    version,
    about = "Certify and decompose random overcomplete 3-tensors"
)]
struct Cli {
    /// Worker threads for trial farms (0 = one per core).
    #[arg(long, default_value_t = 0, global = true)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Components,
    Sdp,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StartArg {
    Uniform,
    Contraction,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a component set (optionally with calibrated noise) and write it.
    Generate {
        #[arg(short = 'n')]
        n: usize,
        #[arg(short = 'm')]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "rademacher-normalized")]
        ensemble: String,
        /// Spectral norm of the noise unfolding (0 = no noise).
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Upper-bound the injective norm and compare it with a threshold.
    Certify {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "components")]
        mode: Mode,
        /// Defaults to 1 + 1/ln n.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Relaxation degree for --mode sdp.
        #[arg(long, default_value_t = 4)]
        degree: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover components; with --truth, match them against ground truth.
    Decompose {
        input: PathBuf,
        /// Number of components to extract (defaults to m from the file).
        #[arg(short = 'm')]
        m: Option<usize>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.99)]
        accept: f64,
        #[arg(long, default_value_t = 0.125)]
        deflation: f64,
        #[arg(long, default_value_t = 200)]
        restarts: usize,
        #[arg(long, default_value_t = 500)]
        steps: usize,
        #[arg(long, default_value_t = 1e-10)]
        ascent_tol: f64,
        #[arg(long, value_enum, default_value = "uniform")]
        start: StartArg,
        #[arg(long, default_value_t = 200)]
        sweeps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-component distances to truth as CSV (requires --truth).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Scaling regressions of the cross-term norm over an (n, m) grid.
    Scaling {
        /// Comma-separated cells `NxM`.
        #[arg(
            long,
            default_value = "100x50,100x100,100x200,100x400,50x50,200x200,400x400"
        )]
        grid: String,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Coupled versus decoupled sign sums over fixed components.
    Decouple {
        #[arg(short = 'n')]
        n: usize,
        #[arg(short = 'm')]
        m: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Solve the moment relaxation and emit the problem and pseudo-expectation.
    SdpSolve {
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        degree: usize,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long, default_value_t = 200_000)]
        max_iter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_tensor(path: &Path) -> Result<sos_tensor::SymmetricTensor3, Error> {
    TensorFile::read(path)?.to_tensor()
}

#[derive(Serialize)]
struct SdpOutput<'a> {
    problem: &'a moment::CertificationProblem,
    pseudo_expectation: &'a moment::PseudoExpectation,
    report: &'a moment::SdpSolveReport,
}

#[derive(Serialize)]
struct StallOutput {
    status: &'static str,
    stall_index: usize,
    accepted: Vec<Vec<f64>>,
    telemetry: Vec<decomposition::ComponentTelemetry>,
    best_value: f64,
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Generate {
            n,
            m,
            seed,
            ensemble,
            noise,
            out,
        } => {
            let ensemble: Ensemble = ensemble.parse()?;
            let (_, tensor) = instances::sample_instance(n, m, ensemble, seed)?;
            let tensor = instances::add_noise(&tensor, &NoiseSpec::new(noise, seed)?)?;
            TensorFile::from_tensor(&tensor).write(&out)?;
            Ok(EXIT_OK)
        }
        Command::Certify {
            input,
            mode,
            threshold,
            tol,
            degree,
            out,
        } => {
            let tensor = load_tensor(&input)?;
            match mode {
                Mode::Components => {
                    let report = certificate::certify(&tensor, threshold, tol)?;
                    emit(&report, out.as_deref())?;
                    Ok(match report.verdict {
                        Verdict::Yes => EXIT_OK,
                        Verdict::No => EXIT_NO,
                    })
                }
                Mode::Sdp => {
                    let (cert, _) =
                        moment::certify_via_sdp(&tensor, threshold, degree, tol.max(1e-9))?;
                    if cert.tie_warning {
                        eprintln!("warning: relaxation value is within tol of the threshold; reported YES");
                    }
                    emit(&cert, out.as_deref())?;
                    Ok(match cert.verdict {
                        SdpVerdict::Yes => EXIT_OK,
                        SdpVerdict::No => EXIT_NO,
                        SdpVerdict::Undecided => EXIT_UNDECIDED,
                    })
                }
            }
        }
        Command::Decompose {
            input,
            m,
            truth,
            seed,
            accept,
            deflation,
            restarts,
            steps,
            ascent_tol,
            start,
            sweeps,
            out,
            csv,
        } => {
            let file = TensorFile::read(&input)?;
            let tensor = file.to_tensor()?;
            let m = m.or(file.m).ok_or_else(|| {
                Error::Precondition("dense input: pass -m with the number of components".into())
            })?;
            let truth = match &truth {
                Some(p) => Some(TensorFile::read(p)?.to_components()?),
                None => None,
            };
            if csv.is_some() && truth.is_none() {
                return Err(Error::Precondition("--csv needs --truth".into()));
            }
            let config = ExtractionConfig {
                accept_threshold: accept,
                deflation_threshold_sq: deflation,
                restarts_per_component: restarts,
                ascent_steps: steps,
                ascent_tol,
                seed,
                start_mode: match start {
                    StartArg::Uniform => StartMode::Uniform,
                    StartArg::Contraction => StartMode::Contraction,
                },
            };
            let refine = RefineOptions {
                max_sweeps: sweeps,
                ..RefineOptions::default()
            };
            match decomposition::decompose(&tensor, m, &config, &refine, truth.as_ref()) {
                Ok(result) => {
                    if let (Some(path), Some(matching)) = (&csv, &result.matching) {
                        let mut text = String::from("truth_index,found_index,distance\n");
                        for (i, (&j, d)) in matching
                            .permutation
                            .iter()
                            .zip(&matching.distances)
                            .enumerate()
                        {
                            text.push_str(&format!("{i},{j},{d:e}\n"));
                        }
                        fs::write(path, text)?;
                    }
                    emit(&result, out.as_deref())?;
                    Ok(EXIT_OK)
                }
                Err(Error::ExtractionStall { index, partial }) => {
                    eprintln!(
                        "extraction stalled at component {index} ({} accepted)",
                        partial.accepted.len()
                    );
                    let stall = StallOutput {
                        status: "extraction-stall",
                        stall_index: index,
                        accepted: partial
                            .accepted
                            .iter()
                            .map(|v| v.iter().copied().collect())
                            .collect(),
                        telemetry: partial.telemetry,
                        best_value: partial.best_value,
                    };
                    emit(&stall, out.as_deref())?;
                    Ok(EXIT_STALL)
                }
                Err(e) => Err(e),
            }
        }
        Command::Scaling {
            grid,
            trials,
            seed,
            tol,
            out,
            csv,
        } => {
            let cells = parse_grid(&grid)?;
            let opts = ScalingOptions {
                tol,
                ..ScalingOptions::default()
            };
            let run = lab::scaling_experiment(&cells, trials, seed, &opts)?;
            if let Some(path) = &csv {
                fs::write(path, run.to_csv())?;
            }
            emit(&run, out.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Decouple {
            n,
            m,
            trials,
            seed,
            out,
            csv,
        } => {
            let summary = lab::decoupling_experiment(n, m, trials, seed)?;
            if let Some(path) = &csv {
                let mut text = String::from("trial,norm_coupled,norm_decoupled\n");
                for (t, s) in summary.samples.iter().enumerate() {
                    text.push_str(&format!(
                        "{t},{:e},{:e}\n",
                        s.norm_coupled, s.norm_decoupled
                    ));
                }
                fs::write(path, text)?;
            }
            emit(&summary, out.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::SdpSolve {
            input,
            degree,
            tol,
            max_iter,
            out,
        } => {
            let tensor = load_tensor(&input)?;
            let problem = moment::build_certification_problem(&tensor, degree)?;
            let opts = SolveOptions {
                tol,
                max_iter,
                ..SolveOptions::default()
            };
            let (pe, report) = moment::solve(&problem, &opts)?;
            emit(
                &SdpOutput {
                    problem: &problem,
                    pseudo_expectation: &pe,
                    report: &report,
                },
                out.as_deref(),
            )?;
            Ok(match report.status {
                moment::SolveStatus::Converged => EXIT_OK,
                _ => EXIT_UNDECIDED,
            })
        }
    }
}

fn parse_grid(spec: &str) -> Result<Vec<(usize, usize)>, Error> {
    spec.split(',')
        .map(|cell| {
            let (n, m) = cell
                .trim()
                .split_once('x')
                .ok_or_else(|| Error::Precondition(format!("grid cell `{cell}` is not NxM")))?;
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::Precondition(format!("grid cell `{cell}` is not NxM")))
            };
            Ok((parse(n)?, parse(m)?))
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
