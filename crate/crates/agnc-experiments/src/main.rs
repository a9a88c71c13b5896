//! Command-line entry point: benchmark runners, residual-file fitting, and
//! loss-curve export.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error.

use adaptive_gnc::adaptive::{
    estimate_density, fit_mb, select_alpha_modeshifted, AlphaSearchConfig, ResidualSet,
};
use adaptive_gnc::loss::{rho_adaptive, rho_amb_numeric, weight_amb};
use adaptive_gnc::{Alpha, Kernel};
use agnc_experiments::config::{self, load_icp_config, load_linreg_config};
use agnc_experiments::report::{write_stages, StageLogRow};
use agnc_experiments::{run_icp_bench, run_linreg_mc};
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "agnc", about = "Adaptive GNC robust least-squares benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Benchmark configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for rows.csv / summary.csv / stages.csv.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Size of the trial worker pool (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Comma-separated method override, e.g. "welsch,agnc,gnc-amb".
    #[arg(long)]
    methods: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo robust linear regression benchmark.
    Linreg(RunArgs),
    /// Point-cloud alignment benchmark.
    Icp(RunArgs),
    /// Fit the residual distribution of a file (one value per line) and
    /// print the Maxwell-Boltzmann scale, mode, and shape parameter.
    Fitloss {
        /// Residual file: one nonnegative decimal per line.
        #[arg(long)]
        input: PathBuf,
        /// Residual dimension.
        #[arg(long, default_value_t = 3)]
        dim: u32,
        /// Truncation bound of the fits.
        #[arg(long, default_value_t = 5.0)]
        tau: f64,
        #[arg(long, default_value_t = 100)]
        bins: usize,
    },
    /// Emit CSV curves of the loss and weight of a kernel versus residual.
    Curves {
        /// Kernel name: adaptive | amb | cauchy | welsch | gm | tls.
        #[arg(long)]
        kernel: String,
        /// Shape parameter for the adaptive kernels ("-inf" accepted).
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<String>,
        /// Mode for the mode-shifted kernel.
        #[arg(long)]
        mode: Option<f64>,
        /// Scale (cauchy/welsch/gm) or threshold (tls).
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long, default_value_t = 3.0)]
        max_eps: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Output CSV path; "-" for stdout.
        #[arg(long, default_value = "-")]
        out: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

enum CliError {
    Config(String),
    Runtime(String),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Linreg(args) => run_linreg(args),
        Command::Icp(args) => run_icp(args),
        Command::Fitloss {
            input,
            dim,
            tau,
            bins,
        } => run_fitloss(&input, dim, tau, bins),
        Command::Curves {
            kernel,
            alpha,
            mode,
            scale,
            max_eps,
            step,
            out,
        } => run_curves(&kernel, alpha.as_deref(), mode, scale, max_eps, step, &out),
    }
}

fn setup_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn run_linreg(args: RunArgs) -> Result<(), CliError> {
    setup_threads(args.threads)?;
    let mut cfg = match &args.config {
        Some(path) => load_linreg_config(path).map_err(|e| CliError::Config(e.to_string()))?,
        None => Default::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(flag) = &args.methods {
        let methods = config::parse_methods_flag(flag).map_err(CliError::Config)?;
        cfg.methods = Some(methods.iter().map(|m| m.name().to_string()).collect());
    }
    cfg.validate().map_err(CliError::Config)?;

    let run = run_linreg_mc(&cfg).map_err(CliError::Runtime)?;
    write_outputs(&args.out, &run.stages, |dir| {
        run.report.write(dir).map_err(|e| e.to_string())
    })?;

    println!("linear regression: {} rows -> {}", run.report.rows.len(), args.out.display());
    println!("{:<10} {:>6} {:>12} {:>12} {:>12}", "method", "rate", "p50", "p75", "p90");
    for s in run.report.summaries() {
        println!(
            "{:<10} {:>6} {:>12.6} {:>12.6} {:>12.6}",
            s.method, s.rate, s.p50, s.p75, s.p90
        );
    }
    Ok(())
}

fn run_icp(args: RunArgs) -> Result<(), CliError> {
    setup_threads(args.threads)?;
    let mut cfg = match &args.config {
        Some(path) => load_icp_config(path).map_err(|e| CliError::Config(e.to_string()))?,
        None => Default::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(flag) = &args.methods {
        let methods = config::parse_methods_flag(flag).map_err(CliError::Config)?;
        cfg.methods = Some(methods.iter().map(|m| m.name().to_string()).collect());
    }
    cfg.validate().map_err(CliError::Config)?;

    let run = run_icp_bench(&cfg).map_err(CliError::Runtime)?;
    write_outputs(&args.out, &run.stages, |dir| {
        run.report.write(dir).map_err(|e| e.to_string())
    })?;
    // Final poses, 12 numbers row-major (C | r) per line, ordered like
    // rows.csv.
    let poses_path = args.out.join("poses.txt");
    let mut poses_file = std::io::BufWriter::new(
        std::fs::File::create(&poses_path)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", poses_path.display())))?,
    );
    for pose in &run.poses {
        adaptive_gnc::geometry::write_pose(&mut poses_file, pose)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }

    println!("alignment: {} rows -> {}", run.report.rows.len(), args.out.display());
    println!(
        "{:<10} {:>8} {:>10} {:>10} {:>9} {:>6}",
        "method", "diff", "rot_p50", "trans_p50", "success", "iters"
    );
    for s in run.report.summaries() {
        println!(
            "{:<10} {:>8} {:>10.3} {:>10.2} {:>9.2} {:>6}",
            s.method, s.difficulty, s.rot_p50, s.trans_p50, s.success_rate, s.median_iterations
        );
    }
    Ok(())
}

fn write_outputs(
    dir: &Path,
    stages: &[StageLogRow],
    write_report: impl FnOnce(&Path) -> Result<(), String>,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    write_report(dir).map_err(CliError::Runtime)?;
    write_stages(&dir.join("stages.csv"), stages)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}

fn run_fitloss(input: &Path, dim: u32, tau: f64, bins: usize) -> Result<(), CliError> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| CliError::Config(format!("{}: {e}", input.display())))?;
    let mut values = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let value: f64 = trimmed.parse().map_err(|_| {
            CliError::Config(format!(
                "{}:{}: not a number: {trimmed:?}",
                input.display(),
                line_no + 1
            ))
        })?;
        values.push(value);
    }
    let residuals =
        ResidualSet::new(values, dim).map_err(|e| CliError::Config(e.to_string()))?;
    let density =
        estimate_density(&residuals, bins).map_err(|e| CliError::Runtime(e.to_string()))?;
    let fit = fit_mb(&density, dim, tau).map_err(|e| CliError::Runtime(e.to_string()))?;
    let selection = select_alpha_modeshifted(&residuals, fit.mode, &AlphaSearchConfig::new(tau))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("a_star {}", fit.a_star);
    println!("mode {}", fit.mode);
    println!("alpha_star {}", selection.alpha);
    if selection.degenerate {
        println!("warning no residuals above the mode; shape defaulted to 2");
    }
    Ok(())
}

fn parse_alpha(raw: Option<&str>) -> Result<Alpha, CliError> {
    let raw = raw.ok_or_else(|| CliError::Config("--alpha is required for this kernel".into()))?;
    if raw == "-inf" {
        return Ok(Alpha::NEG_INF);
    }
    let value: f64 = raw
        .parse()
        .map_err(|_| CliError::Config(format!("bad --alpha value {raw:?}")))?;
    Alpha::new(value).map_err(|e| CliError::Config(e.to_string()))
}

fn run_curves(
    kernel: &str,
    alpha: Option<&str>,
    mode: Option<f64>,
    scale: Option<f64>,
    max_eps: f64,
    step: f64,
    out: &str,
) -> Result<(), CliError> {
    if !(max_eps > 0.0 && step > 0.0) {
        return Err(CliError::Config("max-eps and step must be positive".into()));
    }
    let grid: Vec<f64> = (0..=(max_eps / step).round() as usize)
        .map(|i| i as f64 * step)
        .collect();

    let (rho, weight): (Vec<f64>, Vec<f64>) = match kernel {
        "adaptive" => {
            let alpha = parse_alpha(alpha)?;
            let k = Kernel::adaptive(alpha);
            (
                grid.iter()
                    .map(|&e| rho_adaptive(e, alpha).expect("grid is finite"))
                    .collect(),
                grid.iter().map(|&e| k.weight(e)).collect(),
            )
        }
        "amb" => {
            let alpha = parse_alpha(alpha)?;
            let mode = mode.unwrap_or(1.0);
            let rho = rho_amb_numeric(&grid, mode, alpha)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let weight = grid.iter().map(|&e| weight_amb(e, mode, alpha)).collect();
            (rho, weight)
        }
        name => {
            let k = match name {
                "cauchy" => Kernel::cauchy(scale.unwrap_or(1.0)),
                "welsch" => Kernel::welsch(scale.unwrap_or(1.0)),
                "gm" => Kernel::geman_mcclure(scale.unwrap_or(1.0)),
                "tls" => Kernel::truncated_ls(scale.unwrap_or(1.0)),
                other => return Err(CliError::Config(format!("unknown kernel {other:?}"))),
            }
            .map_err(|e| CliError::Config(e.to_string()))?;
            (
                grid.iter().map(|&e| k.rho(e).unwrap()).collect(),
                grid.iter().map(|&e| k.weight(e)).collect(),
            )
        }
    };

    let mut text = String::from("eps,rho,weight\n");
    for ((e, r), w) in grid.iter().zip(&rho).zip(&weight) {
        text.push_str(&format!("{e},{r},{w}\n"));
    }
    if out == "-" {
        std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    } else {
        std::fs::write(out, text).map_err(|e| CliError::Runtime(format!("{out}: {e}")))?;
    }
    Ok(())
}
