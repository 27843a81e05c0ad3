use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{DatasetSource, ExperimentConfig};
use crate::dataset::{build_corrected_features, generate_synthetic, read_binary, read_csv, RawDataset};
use crate::error::Result;
use crate::model::{beta_max, CorrectedFeatureSet};
use crate::solver::{beta_ratio_grid, train_path, PathResult, SolverConfig};

/// Weights at or below this magnitude count as zero when computing `d*`.
pub const ZERO_TOL: f64 = 1e-8;

/// Largest allowed `‖w_screen − w_ref‖_∞` in [`verify_safety`].
pub const DEVIATION_TOL: f64 = 1e-6;

pub fn load_dataset(source: &DatasetSource) -> Result<RawDataset> {
    match source {
        DatasetSource::Generate(g) => generate_synthetic(g),
        DatasetSource::File(path) if path.extension().is_some_and(|e| e == "csv") => read_csv(path),
        DatasetSource::File(path) => read_binary(path),
    }
}

/// One screening trigger of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub beta_ratio: f64,
    pub trigger: usize,
    pub epoch: usize,
    pub gap: f64,
    pub d_i: usize,
    pub rejection_ratio: f64,
    pub reservation_ratio: f64,
    pub elapsed_s: f64,
}

/// Per grid point totals; times are medians over the repeats.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub beta_ratio: f64,
    pub final_gap: f64,
    pub time_on_s: f64,
    pub time_off_s: f64,
    pub screen_time_s: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub beta_max: f64,
    pub n_features: usize,
    pub ratios: Vec<f64>,
    /// `|{j : |w_ref_j| ≤ ZERO_TOL}|` per grid point.
    pub d_star: Vec<usize>,
    pub metrics: Vec<MetricsRow>,
    pub summary: Vec<SummaryRow>,
    /// Ratios whose screening (or baseline) solve hit `max_epochs`.
    pub non_converged: Vec<f64>,
    /// Totals over the path, medians over the repeats.
    pub total_on_s: f64,
    pub total_off_s: f64,
    pub total_screen_s: f64,
}

impl ExperimentReport {
    pub fn speedup(&self) -> f64 {
        self.total_off_s / self.total_on_s
    }

    /// Share of the screening run spent in screening.
    pub fn screening_share(&self) -> f64 {
        self.total_screen_s / self.total_on_s
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

fn zero_count(w: &ndarray::Array1<f64>) -> usize {
    w.iter().filter(|x| x.abs() <= ZERO_TOL).count()
}

struct Prepared {
    data: CorrectedFeatureSet,
    beta_max: f64,
    ratios: Vec<f64>,
    grid: Vec<(f64, f64)>,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let data = build_corrected_features(&load_dataset(&cfg.dataset)?)?;
    let bmax = beta_max(&data);
    let ratios = beta_ratio_grid(cfg.beta_count, cfg.ratio_hi, cfg.ratio_lo);
    let grid = ratios.iter().map(|r| (cfg.alpha, r * bmax)).collect();
    Ok(Prepared { data, beta_max: bmax, ratios, grid })
}

fn reference_path(prep: &Prepared, cfg: &ExperimentConfig) -> Result<PathResult> {
    let config = SolverConfig {
        epsilon: cfg.reference_epsilon,
        screening_enabled: false,
        ..cfg.solver.clone()
    };
    train_path(&prep.data, &prep.grid, &config)
}

/// Runs the path experiment and returns the report without writing files.
///
/// Three paths are solved: a screening-off reference at `reference_epsilon`
/// for `d*`, and the timed screening-off and screening-on paths at the
/// configured `epsilon`, `repeat` times each.
pub fn compute_path_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let prep = prepare(cfg)?;
    let d = prep.data.n_features();
    let reference = reference_path(&prep, cfg)?;
    let d_star: Vec<usize> = reference.points.iter().map(|p| zero_count(&p.w)).collect();

    let off_config = SolverConfig { screening_enabled: false, ..cfg.solver.clone() };
    let screening = cfg.solver.screening_enabled;
    let k = prep.grid.len();
    let mut off_times = vec![Vec::new(); k];
    let mut on_times = vec![Vec::new(); k];
    let mut screen_times = vec![Vec::new(); k];
    let mut first_off = None;
    let mut first_on = None;
    for _ in 0..cfg.repeat {
        let off = train_path(&prep.data, &prep.grid, &off_config)?;
        for (t, p) in off_times.iter_mut().zip(&off.points) {
            t.push(p.elapsed_s);
        }
        first_off.get_or_insert(off);
        if screening {
            let on = train_path(&prep.data, &prep.grid, &cfg.solver)?;
            for ((t, s), p) in on_times.iter_mut().zip(&mut screen_times).zip(&on.points) {
                t.push(p.elapsed_s);
                s.push(p.trace.screening_s);
            }
            first_on.get_or_insert(on);
        }
    }
    let off = first_off.expect("repeat is at least 1");

    let mut metrics = Vec::new();
    let mut summary = Vec::with_capacity(k);
    let mut non_converged = Vec::new();
    let (mut total_on, mut total_off, mut total_screen) = (0.0, 0.0, 0.0);
    for idx in 0..k {
        let ratio = prep.ratios[idx];
        let time_off_s = median(&mut off_times[idx]);
        let (time_on_s, screen_time_s, final_gap, converged) = match &first_on {
            Some(on) => {
                let p = &on.points[idx];
                for (t, trig) in p.trace.triggers.iter().enumerate() {
                    let d_i = trig.n_screened;
                    metrics.push(MetricsRow {
                        beta_ratio: ratio,
                        trigger: t,
                        epoch: trig.epoch,
                        gap: trig.trigger_gap,
                        d_i,
                        rejection_ratio: if d_star[idx] == 0 {
                            1.0
                        } else {
                            d_i as f64 / d_star[idx] as f64
                        },
                        reservation_ratio: (d - d_i) as f64 / d as f64,
                        elapsed_s: trig.elapsed_s,
                    });
                }
                (
                    median(&mut on_times[idx]),
                    median(&mut screen_times[idx]),
                    p.gap,
                    p.converged && off.points[idx].converged,
                )
            }
            None => {
                let p = &off.points[idx];
                (time_off_s, 0.0, p.gap, p.converged)
            }
        };
        if !converged {
            non_converged.push(ratio);
        }
        total_on += time_on_s;
        total_off += time_off_s;
        total_screen += screen_time_s;
        summary.push(SummaryRow {
            beta_ratio: ratio,
            final_gap,
            time_on_s,
            time_off_s,
            screen_time_s,
            speedup: if screening { time_off_s / time_on_s } else { 1.0 },
        });
    }
    Ok(ExperimentReport {
        beta_max: prep.beta_max,
        n_features: d,
        ratios: prep.ratios,
        d_star,
        metrics,
        summary,
        non_converged,
        total_on_s: total_on,
        total_off_s: total_off,
        total_screen_s: total_screen,
    })
}

/// `# key = value` lines echoing `cfg`.
pub fn echo_header(cfg: &ExperimentConfig) -> String {
    cfg.echo().iter().map(|(k, v)| format!("# {k} = {v}\n")).collect()
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_with_header<T: Serialize>(header: &str, columns: &[&str], rows: &[T]) -> Result<Vec<u8>> {
    let mut out = header.as_bytes().to_vec();
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(columns)?;
    for row in rows {
        w.serialize(row)?;
    }
    out.extend(w.into_inner().map_err(|e| e.into_error())?);
    Ok(out)
}

pub const METRICS_COLUMNS: [&str; 8] = [
    "beta_ratio",
    "trigger",
    "epoch",
    "gap",
    "d_i",
    "rejection_ratio",
    "reservation_ratio",
    "elapsed_s",
];

pub const SUMMARY_COLUMNS: [&str; 6] = [
    "beta_ratio",
    "final_gap",
    "time_on_s",
    "time_off_s",
    "screen_time_s",
    "speedup",
];

/// Writes `metrics.csv`, `summary.csv` and `run_metadata.txt` into `dir`.
pub fn write_report(report: &ExperimentReport, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let header = echo_header(cfg);
    let metrics = dir.join("metrics.csv");
    write_atomic(&metrics, &csv_with_header(&header, &METRICS_COLUMNS, &report.metrics)?)?;
    let summary = dir.join("summary.csv");
    write_atomic(&summary, &csv_with_header(&header, &SUMMARY_COLUMNS, &report.summary)?)?;

    let mut meta = header.clone();
    let converged = report.non_converged.is_empty();
    meta.push_str(&format!(
        "crate_version = {}\nbeta_max = {}\nn_features = {}\ngrid_points = {}\n\
         all_converged = {converged}\nnon_converged_ratios = {}\n\
         total_time_on_s = {}\ntotal_time_off_s = {}\ntotal_screen_time_s = {}\n",
        env!("CARGO_PKG_VERSION"),
        report.beta_max,
        report.n_features,
        report.ratios.len(),
        report
            .non_converged
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(","),
        report.total_on_s,
        report.total_off_s,
        report.total_screen_s,
    ));
    let metadata = dir.join("run_metadata.txt");
    write_atomic(&metadata, meta.as_bytes())?;
    Ok(vec![metrics, summary, metadata])
}

/// [`compute_path_experiment`] followed by [`write_report`] into
/// `cfg.out_dir`.
pub fn run_path_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let report = compute_path_experiment(cfg)?;
    write_report(&report, cfg, &cfg.out_dir)?;
    Ok(report)
}

/// Safety check at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SafetyRow {
    pub beta_ratio: f64,
    pub screened: usize,
    pub violations: usize,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafetyReport {
    pub rows: Vec<SafetyRow>,
}

impl SafetyReport {
    /// Screened features that are nonzero in the reference.
    pub fn violations(&self) -> usize {
        self.rows.iter().map(|r| r.violations).sum()
    }

    pub fn max_deviation(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.max_deviation))
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0 && self.max_deviation() <= DEVIATION_TOL
    }
}

/// Solves the grid with and without screening, both to `reference_epsilon`,
/// and compares the screened sets and weights.
pub fn verify_safety(cfg: &ExperimentConfig) -> Result<SafetyReport> {
    let prep = prepare(cfg)?;
    let reference = reference_path(&prep, cfg)?;
    let config = SolverConfig {
        epsilon: cfg.reference_epsilon,
        screening_enabled: true,
        ..cfg.solver.clone()
    };
    let screened = train_path(&prep.data, &prep.grid, &config)?;
    let rows = reference
        .points
        .iter()
        .zip(&screened.points)
        .zip(&prep.ratios)
        .map(|((r, s), &ratio)| SafetyRow {
            beta_ratio: ratio,
            screened: s.screened.len(),
            violations: s.screened.iter().filter(|&&j| r.w[j].abs() > ZERO_TOL).count(),
            max_deviation: (&r.w - &s.w).iter().fold(0.0, |m: f64, x| m.max(x.abs())),
        })
        .collect();
    Ok(SafetyReport { rows })
}

/// Writes `safety.csv` into `dir`.
pub fn write_safety(report: &SafetyReport, cfg: &ExperimentConfig, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("safety.csv");
    let columns = ["beta_ratio", "screened", "violations", "max_deviation"];
    write_atomic(&path, &csv_with_header(&echo_header(cfg), &columns, &report.rows)?)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::GeneratorConfig;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetSource::Generate(GeneratorConfig {
                n: 40,
                p: 50,
                classes: 4,
                seed: 3,
                ..GeneratorConfig::default()
            }),
            beta_count: 6,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn ratios_are_monotone_per_point() {
        let report = compute_path_experiment(&small()).unwrap();
        assert!(report.non_converged.is_empty());
        assert_eq!(report.summary.len(), 6);
        for ratio in &report.ratios {
            let rows: Vec<_> = report.metrics.iter().filter(|m| m.beta_ratio == *ratio).collect();
            assert!(!rows.is_empty());
            for pair in rows.windows(2) {
                assert!(pair[1].rejection_ratio >= pair[0].rejection_ratio);
                assert!(pair[1].reservation_ratio <= pair[0].reservation_ratio);
            }
            for m in rows {
                assert!((0.0..=1.0).contains(&m.rejection_ratio));
                assert!((0.0..=1.0).contains(&m.reservation_ratio));
            }
        }
    }

    #[test]
    fn no_screening_has_unit_speedup() {
        let mut cfg = small();
        cfg.solver.screening_enabled = false;
        let report = compute_path_experiment(&cfg).unwrap();
        assert!(report.metrics.is_empty());
        assert!(report.summary.iter().all(|s| s.speedup == 1.0 && s.screen_time_s == 0.0));
    }

    #[test]
    fn files_carry_the_config_echo() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small();
        let report = compute_path_experiment(&cfg).unwrap();
        let files = write_report(&report, &cfg, dir.path()).unwrap();
        for f in files {
            let text = fs::read_to_string(&f).unwrap();
            assert!(text.starts_with("# dataset = generate\n"), "{}", f.display());
            assert!(text.contains("# seed = 0\n# generator_seed = 3\n"));
        }
        let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        let first = metrics.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(first, METRICS_COLUMNS.join(","));
        assert!(!dir.path().join("metrics.csv.tmp").exists());
    }

    #[test]
    fn safety_on_a_small_grid() {
        let report = verify_safety(&small()).unwrap();
        assert_eq!(report.rows.len(), 6);
        assert!(report.passed(), "{report:?}");
        assert!(report.rows.iter().any(|r| r.screened > 0));
    }
}
