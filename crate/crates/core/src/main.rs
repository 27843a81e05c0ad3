use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crf_screen::dataset::{write_binary, write_csv};
use crf_screen::harness::{
    load_dataset, parse_k_policy, run_path_experiment, verify_safety, write_atomic, write_safety,
    ExperimentConfig,
};
use crf_screen::oracle::{closed_form_suite, OracleConfig};
use crf_screen::Error;

const EXIT_VIOLATION: u8 = 1;
const EXIT_BAD_INPUT: u8 = 2;

#[derive(Parser)]
#[command(version, about = "Sparse CRF training with safe dynamic feature screening")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen(Common),
    /// Run the regularization path with and without screening.
    Run(Common),
    /// Compare screened solutions against screening-off references.
    Verify(Common),
    /// Check the closed-form screening score against a numerical minimizer.
    Oracle {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for oracle.csv.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Instances per case.
        #[arg(long, default_value_t = 200)]
        per_case: usize,
    },
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; for `gen`, the dataset file (`.csv` or binary).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_screening: bool,
    /// `roundrobin` or `fullmin`.
    #[arg(long)]
    k_policy: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.set_seed(seed);
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if self.no_screening {
            cfg.solver.screening_enabled = false;
        }
        if let Some(k) = &self.k_policy {
            cfg.solver.k_policy = parse_k_policy(k)?;
        }
        if let Some(g) = self.gamma {
            cfg.solver.gamma = g;
        }
        if let Some(e) = self.epsilon {
            cfg.solver.epsilon = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn gen(common: &Common) -> Result<u8, Error> {
    let cfg = common.resolve()?;
    let path = common.out.clone().unwrap_or_else(|| PathBuf::from("dataset.csv"));
    let raw = load_dataset(&cfg.dataset)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    if path.extension().is_some_and(|e| e == "csv") {
        write_csv(&raw, &path)?;
    } else {
        write_binary(&raw, &path)?;
    }
    println!("wrote {} samples x {} inputs to {}", raw.n_samples(), raw.n_inputs(), path.display());
    Ok(0)
}

fn run(common: &Common) -> Result<u8, Error> {
    let cfg = common.resolve()?;
    let report = run_path_experiment(&cfg)?;
    println!(
        "beta_max {:.6e}, {} grid points, time on {:.3}s off {:.3}s screening {:.3}s, speedup {:.2}",
        report.beta_max,
        report.ratios.len(),
        report.total_on_s,
        report.total_off_s,
        report.total_screen_s,
        report.speedup(),
    );
    if !report.non_converged.is_empty() {
        eprintln!("warning: {} grid points did not converge", report.non_converged.len());
    }
    println!("outputs in {}", cfg.out_dir.display());
    Ok(0)
}

fn verify(common: &Common) -> Result<u8, Error> {
    let cfg = common.resolve()?;
    let report = verify_safety(&cfg)?;
    let path = write_safety(&report, &cfg, &cfg.out_dir)?;
    println!(
        "{} grid points, {} violations, max deviation {:.3e} ({})",
        report.rows.len(),
        report.violations(),
        report.max_deviation(),
        path.display(),
    );
    Ok(if report.passed() { 0 } else { EXIT_VIOLATION })
}

fn oracle(seed: u64, out: &PathBuf, per_case: usize) -> Result<u8, Error> {
    let cfg = OracleConfig::default();
    let rows = closed_form_suite(per_case, seed, &cfg, 1e-5);
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    std::fs::create_dir_all(out)?;
    let path = out.join("oracle.csv");
    write_atomic(&path, &bytes)?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    println!("{} instances, {failed} failed ({})", rows.len(), path.display());
    Ok(if failed == 0 { 0 } else { EXIT_VIOLATION })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(c) => gen(c),
        Command::Run(c) => run(c),
        Command::Verify(c) => verify(c),
        Command::Oracle { seed, out, per_case } => oracle(*seed, out, *per_case),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_BAD_INPUT)
        }
    }
}
