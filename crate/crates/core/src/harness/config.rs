//! Experiment configuration: a flat `key = value` text file.
//!
//! Every key in [`CONFIG_KEYS`] must appear exactly once; unknown keys are
//! rejected. Lists (`snr_db`, `methods`) are comma-separated.

use std::path::{Path, PathBuf};

use crate::array::{AngleGrid, ScenarioConfig, UpaGeometry};
use crate::baselines::Method;
use crate::error::{Error, Result};
use crate::hashing::HashFamilySpec;

/// The exact key set of the config file schema.
pub const CONFIG_KEYS: [&str; 19] = [
    "I",
    "K",
    "n_h",
    "n_v",
    "d_h",
    "d_v",
    "N1",
    "N2",
    "B",
    "L",
    "k_wise",
    "gain_gap_db",
    "snr_db",
    "trials",
    "seed",
    "methods",
    "target_error",
    "accuracy_target",
    "out_dir",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub ris_count: usize,
    pub user_count: usize,
    pub n_h: usize,
    pub n_v: usize,
    pub d_h: f64,
    pub d_v: f64,
    pub n1: usize,
    pub n2: usize,
    pub beams: usize,
    pub rounds: usize,
    pub k_wise: usize,
    pub gain_gap_db: f64,
    pub snr_points_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// `M_s` proxy: the trend check reports where the error rate first
    /// drops below `1 / target_error`.
    pub target_error: f64,
    /// Accuracy target of the overhead sweep's round search.
    pub accuracy_target: f64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            ris_count: 3,
            user_count: 3,
            n_h: 32,
            n_v: 32,
            d_h: 0.5,
            d_v: 0.5,
            n1: 32,
            n2: 1,
            beams: 8,
            rounds: 5,
            k_wise: 4,
            gain_gap_db: 3.0,
            snr_points_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            trials: 2000,
            seed: 1,
            methods: vec![Method::Hmb, Method::Exhaustive, Method::Hierarchical],
            target_error: 100.0,
            accuracy_target: 0.6,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut seen: Vec<(&'static str, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim().to_string();
            let canonical = CONFIG_KEYS
                .iter()
                .find(|&&k| k == key)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown key '{key}'")))?;
            if seen.iter().any(|(k, _)| k == canonical) {
                return Err(Error::InvalidConfig(format!("duplicate key '{key}'")));
            }
            seen.push((canonical, value));
        }
        let get = |key: &'static str| -> Result<&str> {
            seen.iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| v.as_str())
                .ok_or(Error::MissingKey(key))
        };
        fn num<T: std::str::FromStr>(key: &'static str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad value '{value}' for key '{key}'")))
        }

        let snr_points_db = get("snr_db")?
            .split(',')
            .map(|s| num::<f64>("snr_db", s.trim()))
            .collect::<Result<Vec<f64>>>()?;
        let methods = get("methods")?
            .split(',')
            .map(|s| s.trim().parse::<Method>())
            .collect::<Result<Vec<Method>>>()?;

        let cfg = Self {
            ris_count: num("I", get("I")?)?,
            user_count: num("K", get("K")?)?,
            n_h: num("n_h", get("n_h")?)?,
            n_v: num("n_v", get("n_v")?)?,
            d_h: num("d_h", get("d_h")?)?,
            d_v: num("d_v", get("d_v")?)?,
            n1: num("N1", get("N1")?)?,
            n2: num("N2", get("N2")?)?,
            beams: num("B", get("B")?)?,
            rounds: num("L", get("L")?)?,
            k_wise: num("k_wise", get("k_wise")?)?,
            gain_gap_db: num("gain_gap_db", get("gain_gap_db")?)?,
            snr_points_db,
            trials: num("trials", get("trials")?)?,
            seed: num("seed", get("seed")?)?,
            methods,
            target_error: num("target_error", get("target_error")?)?,
            accuracy_target: num("accuracy_target", get("accuracy_target")?)?,
            out_dir: PathBuf::from(get("out_dir")?),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// The embedded defaults rendered in the file schema.
    pub fn default_text() -> String {
        let d = Self::default();
        let snr: Vec<String> = d.snr_points_db.iter().map(|s| s.to_string()).collect();
        let methods: Vec<&str> = d.methods.iter().map(|m| m.name()).collect();
        format!(
            "I = {}\nK = {}\nn_h = {}\nn_v = {}\nd_h = {}\nd_v = {}\nN1 = {}\nN2 = {}\n\
             B = {}\nL = {}\nk_wise = {}\ngain_gap_db = {}\nsnr_db = {}\ntrials = {}\n\
             seed = {}\nmethods = {}\ntarget_error = {}\naccuracy_target = {}\nout_dir = {}\n",
            d.ris_count,
            d.user_count,
            d.n_h,
            d.n_v,
            d.d_h,
            d.d_v,
            d.n1,
            d.n2,
            d.beams,
            d.rounds,
            d.k_wise,
            d.gain_gap_db,
            snr.join(","),
            d.trials,
            d.seed,
            methods.join(","),
            d.target_error,
            d.accuracy_target,
            d.out_dir.display(),
        )
    }

    /// All validity and divisibility checks, before any simulation work.
    pub fn validate(&self) -> Result<()> {
        if self.ris_count == 0 || self.user_count == 0 {
            return Err(Error::InvalidConfig("I and K must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if self.snr_points_db.is_empty() {
            return Err(Error::InvalidConfig("snr_db list is empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("methods list is empty".into()));
        }
        if self.k_wise < 2 {
            return Err(Error::InvalidConfig("k_wise must be >= 2".into()));
        }
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("L must be >= 1".into()));
        }
        if self.accuracy_target <= 0.0 || self.accuracy_target > 1.0 {
            return Err(Error::InvalidConfig(
                "accuracy_target must lie in (0, 1]".into(),
            ));
        }
        if self.target_error < 1.0 {
            return Err(Error::InvalidConfig("target_error must be >= 1".into()));
        }
        if self.ris_count > self.beams {
            return Err(Error::InvalidConfig(format!(
                "B = {} must be at least I = {} so every RIS gets a slot tier",
                self.beams, self.ris_count
            )));
        }
        let grid = self.grid()?;
        let geometry = self.geometry()?;
        let directions = grid.directions();
        if self.beams == 0 || directions % self.beams != 0 {
            return Err(Error::IndivisibleGrid {
                directions,
                beams: self.beams,
            });
        }
        let arms = directions / self.beams;
        if geometry.elements() % arms != 0 {
            return Err(Error::IndivisibleArray {
                elements: geometry.elements(),
                arms,
            });
        }
        self.family()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<AngleGrid> {
        AngleGrid::new(self.n1, self.n2)
    }

    pub fn geometry(&self) -> Result<UpaGeometry<f64>> {
        UpaGeometry::new(self.n_h, self.n_v, self.d_h, self.d_v)
    }

    pub fn family(&self) -> Result<HashFamilySpec> {
        HashFamilySpec::for_keys(self.grid()?.directions(), self.beams, self.k_wise)
    }

    /// Scenario at one SNR point.
    pub fn scenario(&self, snr_db: f64) -> Result<ScenarioConfig<f64>> {
        let scenario = ScenarioConfig::with_snr(
            self.ris_count,
            self.user_count,
            self.geometry()?,
            self.grid()?,
            self.gain_gap_db,
            snr_db,
        );
        scenario.validate()?;
        Ok(scenario)
    }
}
