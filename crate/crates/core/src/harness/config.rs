//! Line-oriented `key = value` experiment configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dataset::GeneratorConfig;
use crate::error::{Error, Result};
use crate::solver::{KPolicy, SolverConfig, StepRule};

/// Where the raw dataset comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Generate(GeneratorConfig),
    /// A `.csv` file, or the binary format for any other extension.
    File(PathBuf),
}

/// Everything one `run` or `verify` invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub alpha: f64,
    pub beta_count: usize,
    /// First and last `β / β_max` of the grid.
    pub ratio_hi: f64,
    pub ratio_lo: f64,
    pub solver: SolverConfig,
    /// Gap of the screening-off reference path.
    pub reference_epsilon: f64,
    /// Timed repetitions; times are medians over these.
    pub repeat: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSource::Generate(GeneratorConfig::default()),
            alpha: 1.0,
            beta_count: 100,
            ratio_hi: 1.0,
            ratio_lo: 0.1,
            solver: SolverConfig::default(),
            reference_epsilon: 1e-10,
            repeat: 1,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse `{value}` for key `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("cannot parse `{value}` for key `{key}` as a boolean"))),
    }
}

pub fn parse_k_policy(value: &str) -> Result<KPolicy> {
    match value {
        "roundrobin" | "round-robin" => Ok(KPolicy::RoundRobin),
        "fullmin" | "full-min" => Ok(KPolicy::FullMin),
        _ => Err(Error::Config(format!("unknown k policy `{value}`"))),
    }
}

fn k_policy_name(k: KPolicy) -> &'static str {
    match k {
        KPolicy::RoundRobin => "roundrobin",
        KPolicy::FullMin => "fullmin",
    }
}

fn parse_step_rule(value: &str) -> Result<StepRule> {
    match value {
        "backtracking" => Ok(StepRule::Backtracking),
        "fixed" | "fixed-from-bound" => Ok(StepRule::FixedFromBound),
        _ => Err(Error::Config(format!("unknown step rule `{value}`"))),
    }
}

fn step_rule_name(s: StepRule) -> &'static str {
    match s {
        StepRule::Backtracking => "backtracking",
        StepRule::FixedFromBound => "fixed-from-bound",
    }
}

/// Splits `text` into `(key, value)` pairs. Blank lines and everything after
/// `#` are ignored.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected `key = value`", no + 1)));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", no + 1)));
        }
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (key, value) in parse_pairs(text)? {
            cfg.set(&key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    fn generator_mut(&mut self) -> &mut GeneratorConfig {
        if !matches!(self.dataset, DatasetSource::Generate(_)) {
            self.dataset = DatasetSource::Generate(GeneratorConfig::default());
        }
        match &mut self.dataset {
            DatasetSource::Generate(g) => g,
            DatasetSource::File(_) => unreachable!(),
        }
    }

    /// Sets both the generator and the solver seed.
    pub fn set_seed(&mut self, seed: u64) {
        if let DatasetSource::Generate(g) = &mut self.dataset {
            g.seed = seed;
        }
        self.solver.seed = seed;
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" if value == "generate" => {
                self.generator_mut();
            }
            "dataset" => self.dataset = DatasetSource::File(PathBuf::from(value)),
            "n" => self.generator_mut().n = parse(key, value)?,
            "p" => self.generator_mut().p = parse(key, value)?,
            "classes" => self.generator_mut().classes = parse(key, value)?,
            "eta" => self.generator_mut().eta = parse(key, value)?,
            "mu" => self.generator_mut().mu = parse(key, value)?,
            "var" => self.generator_mut().var = parse(key, value)?,
            "seed" => self.set_seed(parse(key, value)?),
            "generator_seed" => self.generator_mut().seed = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "beta_count" => self.beta_count = parse(key, value)?,
            "ratio_hi" => self.ratio_hi = parse(key, value)?,
            "ratio_lo" => self.ratio_lo = parse(key, value)?,
            "epsilon" => self.solver.epsilon = parse(key, value)?,
            "gamma" => self.solver.gamma = parse(key, value)?,
            "max_epochs" => self.solver.max_epochs = parse(key, value)?,
            "k_policy" => self.solver.k_policy = parse_k_policy(value)?,
            "step_rule" => self.solver.step_rule = parse_step_rule(value)?,
            "dual_update_interval" => self.solver.dual_update_interval = parse(key, value)?,
            "screening" => self.solver.screening_enabled = parse_bool(key, value)?,
            "reference_epsilon" => self.reference_epsilon = parse(key, value)?,
            "repeat" => self.repeat = parse(key, value)?,
            "out" => self.out_dir = PathBuf::from(value),
            _ => return Err(Error::UnknownConfigKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if let DatasetSource::Generate(g) = &self.dataset {
            g.validate()?;
        }
        self.solver.validate()?;
        let fail = |m: String| Err(Error::Config(m));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return fail(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.beta_count == 0 {
            return fail("beta_count must be at least 1".into());
        }
        let in_range = |r: f64| r > 0.0 && r <= 1.0;
        if !in_range(self.ratio_hi) || !in_range(self.ratio_lo) || self.ratio_lo > self.ratio_hi {
            return fail(format!(
                "ratio range [{}, {}] must satisfy 0 < lo <= hi <= 1",
                self.ratio_lo, self.ratio_hi
            ));
        }
        if !(self.reference_epsilon > 0.0) {
            return fail("reference_epsilon must be positive".into());
        }
        if self.repeat == 0 {
            return fail("repeat must be at least 1".into());
        }
        Ok(())
    }

    /// The resolved configuration as ordered `(key, value)` pairs; feeding
    /// them back through [`set`](Self::set) reproduces `self`.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out: Vec<(&str, String)> = Vec::new();
        match &self.dataset {
            DatasetSource::Generate(g) => {
                out.push(("dataset", "generate".into()));
                out.push(("n", g.n.to_string()));
                out.push(("p", g.p.to_string()));
                out.push(("classes", g.classes.to_string()));
                out.push(("eta", g.eta.to_string()));
                out.push(("mu", g.mu.to_string()));
                out.push(("var", g.var.to_string()));
            }
            DatasetSource::File(path) => out.push(("dataset", path.display().to_string())),
        }
        let s = &self.solver;
        // `seed` sets both seeds, so the generator's own follows it.
        out.push(("seed", s.seed.to_string()));
        if let DatasetSource::Generate(g) = &self.dataset {
            out.push(("generator_seed", g.seed.to_string()));
        }
        out.extend([
            ("alpha", self.alpha.to_string()),
            ("beta_count", self.beta_count.to_string()),
            ("ratio_hi", self.ratio_hi.to_string()),
            ("ratio_lo", self.ratio_lo.to_string()),
            ("epsilon", s.epsilon.to_string()),
            ("gamma", s.gamma.to_string()),
            ("max_epochs", s.max_epochs.to_string()),
            ("k_policy", k_policy_name(s.k_policy).into()),
            ("step_rule", step_rule_name(s.step_rule).into()),
            ("dual_update_interval", s.dual_update_interval.to_string()),
            ("screening", s.screening_enabled.to_string()),
            ("reference_epsilon", self.reference_epsilon.to_string()),
            ("repeat", self.repeat.to_string()),
            ("out", self.out_dir.display().to_string()),
        ]);
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let text = "# a comment\n\nn = 40   # trailing\nclasses=4\nseed = 9\nalpha = 0.5\nk_policy = fullmin\nscreening = false\n";
        let cfg = ExperimentConfig::from_text(text).unwrap();
        let DatasetSource::Generate(g) = &cfg.dataset else { panic!() };
        assert_eq!((g.n, g.classes, g.seed), (40, 4, 9));
        assert_eq!(cfg.solver.seed, 9);
        assert_eq!(cfg.alpha, 0.5);
        assert_eq!(cfg.solver.k_policy, KPolicy::FullMin);
        assert!(!cfg.solver.screening_enabled);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            ExperimentConfig::from_text("colour = red"),
            Err(Error::UnknownConfigKey(k)) if k == "colour"
        ));
        assert!(ExperimentConfig::from_text("alpha = x").is_err());
        assert!(ExperimentConfig::from_text("no equals sign").is_err());
        assert!(ExperimentConfig::from_text("ratio_lo = 0").is_err());
        assert!(ExperimentConfig::from_text("ratio_hi = 1.5").is_err());
        assert!(ExperimentConfig::from_text("beta_count = 0").is_err());
        assert!(ExperimentConfig::from_text("gamma = 1").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let text = "n = 60\np = 30\nclasses = 3\nseed = 4\nrepeat = 3\nepsilon = 1e-7\ndataset_unused_line = 1";
        assert!(ExperimentConfig::from_text(text).is_err());
        let cfg = ExperimentConfig::from_text(&text.replace("dataset_unused_line = 1", "")).unwrap();
        let echoed: String = cfg
            .echo()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        assert_eq!(ExperimentConfig::from_text(&echoed).unwrap(), cfg);

        let mut file = ExperimentConfig::default();
        file.set("dataset", "data/x.csv").unwrap();
        let echoed: String = file.echo().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        assert_eq!(ExperimentConfig::from_text(&echoed).unwrap(), file);
    }
}
