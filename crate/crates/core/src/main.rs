use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use robin_coupling::diagnostics::ErrorReport;
use robin_coupling::experiments::{
    compare, convergence, run_level, write_compare_csv, write_run_csv, ExperimentConfig, Sweep,
};
use robin_coupling::schemes::Variant;
use robin_coupling::Error;

/// Convergence studies for Robin-Robin coupled parabolic interface problems.
#[derive(Parser)]
#[command(name = "robin-coupling", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one level and print every error quantity.
    Run {
        #[command(flatten)]
        common: Common,
        /// Level k: Δt = h = 2^-(k+1).
        #[arg(short, long, default_value_t = 3)]
        k: u32,
        /// Scheme variant: original, improved or monolithic.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Sweep levels kmin..=kmax and print convergence tables.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        range: Range,
        #[arg(long)]
        variant: Option<String>,
    },
    /// Sweep the same levels under several variants side by side.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        range: Range,
        /// Comma-separated variants.
        #[arg(long, value_delimiter = ',', default_value = "original,improved")]
        variants: Vec<String>,
    },
}

#[derive(Args)]
struct Common {
    /// Manufactured case: example1, example2, example3 or zero.
    #[arg(long)]
    case: Option<String>,
    /// Robin parameter.
    #[arg(long)]
    alpha: Option<f64>,
    /// Finite-element order (defaults to 1 for example1, 2 otherwise).
    #[arg(long)]
    order: Option<usize>,
    /// Final time.
    #[arg(long = "T")]
    final_time: Option<f64>,
    /// Directory for CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat TOML file with defaults for any of the settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Allow levels above 6 (at most 8).
    #[arg(long)]
    large: bool,
    /// Worker threads for parallel levels.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct Range {
    #[arg(long)]
    kmin: Option<u32>,
    #[arg(long)]
    kmax: Option<u32>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_toml_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(c) = &self.case {
            cfg.case = c.clone();
        }
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if self.order.is_some() {
            cfg.order = self.order;
        }
        if let Some(t) = self.final_time {
            cfg.final_time = t;
        }
        if self.jobs.is_some() {
            cfg.jobs = self.jobs;
        }
        cfg.allow_large |= self.large;
        Ok(cfg)
    }
}

fn apply_range(cfg: &mut ExperimentConfig, range: &Range) {
    if let Some(k) = range.kmin {
        cfg.kmin = k;
    }
    if let Some(k) = range.kmax {
        cfg.kmax = k;
    }
}

fn prepare_out(out: &Option<PathBuf>) -> Result<Option<&Path>, Error> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Ok(Some(dir.as_path()))
        }
        None => Ok(None),
    }
}

fn print_report(variant: Variant, r: &ErrorReport, fe_order: usize) {
    println!(
        "variant {variant}  k {}  dt {:e}  h {:e}  steps {}",
        r.level.map_or("-".into(), |k| k.to_string()),
        r.dt,
        r.h,
        r.n_steps
    );
    for c in ErrorReport::FINAL_COLUMNS.iter().chain(&ErrorReport::SUM_COLUMNS) {
        if *c == "e_ggdus" && fe_order == 1 {
            continue;
        }
        println!("  {c:<8} {:.2e}", r.get(c).unwrap_or(f64::NAN));
    }
}

/// Prints and saves a sweep; returns false if it stopped early.
fn emit_sweep(sweep: &Sweep, fe_order: usize, out: Option<&Path>, prefix: &str) -> Result<bool, Error> {
    println!("[{}] final time", sweep.variant);
    print!("{}", sweep.final_table().render());
    println!("[{}] sums", sweep.variant);
    print!("{}", sweep.sums_table(fe_order).render());
    if let Some(dir) = out {
        let tag = if sweep.is_partial() { "_partial" } else { "" };
        sweep
            .final_table()
            .save_csv(&dir.join(format!("{prefix}{}_final{tag}.csv", sweep.variant)))?;
        sweep
            .sums_table(fe_order)
            .save_csv(&dir.join(format!("{prefix}{}_sums{tag}.csv", sweep.variant)))?;
    }
    if let Some((k, msg)) = &sweep.failure {
        eprintln!("level {k} failed: {msg}; results above are partial");
        return Ok(false);
    }
    Ok(true)
}

fn execute(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run { common, k, variant } => {
            let mut cfg = common.resolve()?;
            if let Some(v) = variant {
                cfg.variant = v;
            }
            cfg.kmin = k;
            cfg.kmax = k;
            cfg.validate()?;
            let v = cfg.variant()?;
            let report = run_level(&cfg, v, k)?;
            print_report(v, &report, cfg.fe_order());
            if let Some(dir) = prepare_out(&common.out)? {
                write_run_csv(v, &report, &dir.join(format!("{}_{v}_k{k}.csv", cfg.case)))?;
            }
            Ok(true)
        }
        Command::Convergence {
            common,
            range,
            variant,
        } => {
            let mut cfg = common.resolve()?;
            if let Some(v) = variant {
                cfg.variant = v;
            }
            apply_range(&mut cfg, &range);
            cfg.validate()?;
            let sweep = convergence(&cfg, cfg.variant()?)?;
            let out = prepare_out(&common.out)?;
            emit_sweep(&sweep, cfg.fe_order(), out, &format!("{}_", cfg.case))
        }
        Command::Compare {
            common,
            range,
            variants,
        } => {
            let mut cfg = common.resolve()?;
            apply_range(&mut cfg, &range);
            cfg.validate()?;
            let variants: Vec<Variant> = variants.iter().map(|v| v.parse()).collect::<Result<_, _>>()?;
            if variants.is_empty() {
                return Err(Error::config("no variants given"));
            }
            let sweeps = compare(&cfg, &variants)?;
            let out = prepare_out(&common.out)?;
            let mut complete = true;
            for s in &sweeps {
                complete &= emit_sweep(s, cfg.fe_order(), out, &format!("{}_", cfg.case))?;
            }
            if let Some(dir) = out {
                let cols: Vec<&str> = ErrorReport::FINAL_COLUMNS
                    .iter()
                    .chain(&ErrorReport::SUM_COLUMNS)
                    .copied()
                    .filter(|c| cfg.fe_order() > 1 || *c != "e_ggdus")
                    .collect();
                write_compare_csv(&sweeps, &cols, &dir.join(format!("{}_compare.csv", cfg.case)))?;
            }
            Ok(complete)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.is_config() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
