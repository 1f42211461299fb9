//! `spc`: smooth PARAFAC tensor completion from the command line.
//!
//! Exit codes: 0 success (fit reached for `complete`), 1 runtime error,
//! 2 usage error, 3 rank cap reached, 4 iteration cap reached.

mod experiment;
mod input;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use spc_core::datagen::{dead_pixel_mask, phantom, random_mask};
use spc_core::io::{mask_from_image, read_mask, tensor_to_png, write_mask, write_tensor, MaskRule};
use spc_core::metrics::{mse, psnr, sdr, ssim};
use spc_core::{
    fr_spc_solve, spc_solve, spc_solve_simple, Config, EvalRegion, FrConfig, Mask, PenaltyKind, Smoothing,
    SpcError, Tensor, Termination,
};

use input::{is_png, load_tensor, parse_dims, parse_f64_list, parse_operators, usage, UsageError};

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_MAX_RANK: u8 = 3;
const EXIT_MAX_ITERS: u8 = 4;

#[derive(Parser)]
#[command(name = "spc", version, about = "Smooth PARAFAC tensor completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the seeded Gaussian-blob phantom as SPCT.
    Synth {
        /// Extents, e.g. 30,30,30.
        #[arg(long)]
        dims: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build an observation mask for a tensor or image.
    Mask(MaskArgs),
    /// Complete a partially observed tensor.
    Complete(CompleteArgs),
    /// Compare an estimate with the ground truth; CSV on stdout.
    Eval(EvalArgs),
    /// Run a batch of completions described by a TOML file.
    RunExperiment {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct MaskArgs {
    /// Tensor (SPCT) or image (PNG) the mask is for.
    #[arg(long)]
    input: PathBuf,
    /// Fraction of entries to remove at random.
    #[arg(long, conflicts_with = "mask_image", required_unless_present = "mask_image")]
    ratio: Option<f64>,
    /// PNG whose pixels mark missing entries.
    #[arg(long)]
    mask_image: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MissingRule::Zero, requires = "mask_image")]
    missing_rule: MissingRule,
    /// Remove whole pixels (all channels) of an H x W x C input.
    #[arg(long, requires = "ratio")]
    dead_pixels: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MissingRule {
    /// Black pixels are missing.
    Zero,
    /// Non-black pixels are missing.
    Nonzero,
}

#[derive(Args)]
struct CompleteArgs {
    /// Tensor (SPCT) or image (PNG).
    #[arg(long)]
    input: PathBuf,
    /// SPCT mask; omitted means fully observed.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// 1 = total variation, 2 = quadratic variation.
    #[arg(long, default_value_t = 2)]
    p: u32,
    /// Per-mode smoothness weights; defaults to 1 (p=2) or 0.01 (p=1) per mode.
    #[arg(long)]
    rho: Option<String>,
    /// Per-mode operators: chain, none or grid:HxW. Default: chain
    /// everywhere (none on the channel mode of PNG input).
    #[arg(long)]
    smooth: Option<String>,
    /// Target SDR on observed entries, dB.
    #[arg(long, default_value_t = 25.0)]
    sdr: f64,
    #[arg(long, default_value_t = 0.01)]
    nu: f64,
    #[arg(long, default_value_t = spc_core::spc::DEFAULT_MAX_RANK)]
    max_rank: usize,
    #[arg(long, default_value_t = spc_core::spc::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    /// Use `<=` instead of `<` in the rank-switch test.
    #[arg(long)]
    non_strict_switch: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Completed tensor, SPCT. A PNG next to it is added for image input.
    #[arg(long)]
    out: PathBuf,
    /// CSV trace with columns iter,mu,R,switched.
    #[arg(long)]
    trace_csv: Option<PathBuf>,
    /// Run the fixed-rank solver with this rank instead of growing the rank.
    #[arg(long, conflicts_with = "simple")]
    fixed_rank: Option<usize>,
    /// Restart the fixed-rank solver for R = 1, 2, .. instead of growing in place.
    #[arg(long)]
    simple: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    estimate: PathBuf,
    /// SPCT mask; required for --region missing|observed.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value = "psnr,ssim,sdr,mse")]
    metrics: String,
    /// SSIM always covers the whole image.
    #[arg(long, value_enum, default_value_t = RegionArg::All)]
    region: RegionArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegionArg {
    All,
    Missing,
    Observed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { dims, seed, out } => synth(&dims, seed, &out),
        Command::Mask(args) => make_mask(&args),
        Command::Complete(args) => complete(&args),
        Command::Eval(args) => eval(&args),
        Command::RunExperiment { config } => experiment::run(&config),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_RUNTIME)
            }
        }
    }
}

fn synth(dims: &str, seed: u64, out: &Path) -> Result<ExitCode> {
    let dims = parse_dims(dims)?;
    let t: Tensor = phantom(&dims, seed)?;
    write_tensor(out, &t).with_context(|| format!("writing {}", out.display()))?;
    Ok(ExitCode::SUCCESS)
}

fn make_mask(args: &MaskArgs) -> Result<ExitCode> {
    let t = load_tensor(&args.input)?;
    let dims = t.dims();
    let mask = if let Some(image) = &args.mask_image {
        let rule = match args.missing_rule {
            MissingRule::Zero => MaskRule::ZeroIsMissing,
            MissingRule::Nonzero => MaskRule::NonzeroIsMissing,
        };
        mask_from_image(image, rule, dims).with_context(|| format!("reading {}", image.display()))?
    } else {
        let ratio = args.ratio.expect("clap requires ratio without mask image");
        if !(0.0..1.0).contains(&ratio) {
            return usage(format!("--ratio must lie in [0, 1), got {ratio}"));
        }
        if args.dead_pixels {
            let (h, w, c) = match *dims {
                [h, w] => (h, w, 1),
                [h, w, c] => (h, w, c),
                _ => return usage("--dead-pixels needs a 2-D or 3-D input"),
            };
            let m = dead_pixel_mask(h, w, c, ratio, args.seed)?;
            Mask::from_vec(dims, m.as_slice().to_vec())?
        } else {
            random_mask(dims, ratio, args.seed)?
        }
    };
    if mask.observed_count() == 0 {
        return Err(SpcError::EmptyObservedSet.into());
    }
    write_mask(&args.out, &mask).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct TraceRow {
    iter: usize,
    mu: f64,
    #[serde(rename = "R")]
    rank: usize,
    switched: u8,
}

fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn smoothing_for(args: &CompleteArgs, dims: &[usize], image: bool) -> Result<Smoothing<f64>> {
    let kind = PenaltyKind::from_p(args.p).map_err(|_| UsageError(format!("--p must be 1 or 2, got {}", args.p)))?;
    let rho = match &args.rho {
        Some(s) => parse_f64_list(s, "rho")?,
        None => vec![if kind == PenaltyKind::Qv { 1.0 } else { 0.01 }; dims.len()],
    };
    if rho.len() != dims.len() {
        return usage(format!("--rho lists {} values but the input has {} modes", rho.len(), dims.len()));
    }
    if rho.iter().any(|&r| !(r >= 0.0) || !r.is_finite()) {
        return usage("--rho values must be finite and non-negative");
    }
    let default_smooth = (image && args.smooth.is_none()).then(|| "chain,chain,none".to_string());
    let operators = parse_operators(args.smooth.as_deref().or(default_smooth.as_deref()), dims)?;
    Ok(Smoothing::new(kind, rho, operators))
}

fn complete(args: &CompleteArgs) -> Result<ExitCode> {
    let image = is_png(&args.input);
    let t = load_tensor(&args.input)?;
    let mask = match &args.mask {
        Some(p) => read_mask(p).with_context(|| format!("reading {}", p.display()))?,
        None => Mask::all_observed(t.dims())?,
    };
    if mask.dims() != t.dims() {
        return usage(format!("mask dims {:?} do not match input dims {:?}", mask.dims(), t.dims()));
    }
    let smoothing = smoothing_for(args, t.dims(), image)?;
    let mut config = Config::new(smoothing.clone(), args.sdr).with_nu(args.nu).with_seed(args.seed);
    config.max_rank = args.max_rank;
    config.max_iters = args.max_iters;
    if args.non_strict_switch {
        config.comparison = spc_core::SwitchComparison::NonStrict;
    }

    let (completed, rows, termination) = if let Some(rank) = args.fixed_rank {
        let sol = fr_spc_solve(&t, &mask, &FrConfig::new(rank, smoothing).with_seed(args.seed))?;
        let mut rows = vec![TraceRow {
            iter: 0,
            mu: sol.trace.initial_residual_sq,
            rank,
            switched: 0,
        }];
        rows.extend(sol.trace.residual_sq.iter().enumerate().map(|(i, &mu)| TraceRow {
            iter: i + 1,
            mu,
            rank,
            switched: 0,
        }));
        eprintln!("fixed rank {rank}: {} sweeps, converged={}", sol.trace.residual_sq.len(), sol.trace.converged);
        (sol.completed, rows, None)
    } else if args.simple {
        let sol = spc_solve_simple(&t, &mask, &config)?;
        let rows = sol
            .attempts
            .iter()
            .enumerate()
            .map(|(i, a)| TraceRow {
                iter: i + 1,
                mu: a.fit,
                rank: a.rank,
                switched: u8::from(i > 0),
            })
            .collect();
        (sol.completed, rows, Some((sol.termination, sol.model.rank(), sol.attempts.len())))
    } else {
        let sol = spc_solve(&t, &mask, &config)?;
        let rows = sol
            .trace
            .records
            .iter()
            .map(|r| TraceRow {
                iter: r.iter,
                mu: r.mu,
                rank: r.rank,
                switched: u8::from(r.switched),
            })
            .collect();
        let summary = (sol.trace.termination, sol.trace.final_rank, sol.trace.iterations());
        (sol.completed, rows, Some(summary))
    };

    write_tensor(&args.out, &completed).with_context(|| format!("writing {}", args.out.display()))?;
    if image {
        let png = args.out.with_extension("png");
        tensor_to_png(&completed, &png).with_context(|| format!("writing {}", png.display()))?;
    }
    if let Some(path) = &args.trace_csv {
        write_trace(path, &rows)?;
    }
    let Some((termination, rank, iters)) = termination else {
        return Ok(ExitCode::SUCCESS);
    };
    eprintln!("{}: R={rank}, {iters} iterations", termination.as_str());
    Ok(match termination {
        Termination::FitReached => ExitCode::SUCCESS,
        Termination::MaxRank => ExitCode::from(EXIT_MAX_RANK),
        Termination::MaxIters => ExitCode::from(EXIT_MAX_ITERS),
    })
}

fn eval(args: &EvalArgs) -> Result<ExitCode> {
    let truth = load_tensor(&args.truth)?;
    let estimate = load_tensor(&args.estimate)?;
    if truth.dims() != estimate.dims() {
        return usage(format!(
            "truth dims {:?} do not match estimate dims {:?}",
            truth.dims(),
            estimate.dims()
        ));
    }
    let mask = args
        .mask
        .as_ref()
        .map(|p| read_mask(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let region = match (args.region, &mask) {
        (RegionArg::All, _) => EvalRegion::All,
        (RegionArg::Missing, Some(m)) => EvalRegion::Missing(m),
        (RegionArg::Observed, Some(m)) => EvalRegion::Observed(m),
        _ => return usage("--region missing|observed needs --mask"),
    };
    let names: Vec<&str> = args.metrics.split(',').map(str::trim).collect();
    let mut values = Vec::with_capacity(names.len());
    for &name in &names {
        let v = match name {
            "psnr" => psnr(&truth, &estimate, region)?,
            "ssim" => ssim(&truth, &estimate)?,
            "sdr" => sdr(&truth, &estimate, region)?,
            "mse" => mse(&truth, &estimate, region)?,
            other => return usage(format!("unknown metric '{other}'")),
        };
        values.push(v.to_string());
    }
    let mut w = csv::Writer::from_writer(std::io::stdout());
    w.write_record(&names)?;
    w.write_record(&values)?;
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}
