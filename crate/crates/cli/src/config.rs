//! Experiment configuration: presets, flat `key = value` files and validation.

use std::path::Path;
use std::str::FromStr;

use aircomp_core::{ReceiveMethod, RicianParams, SdrConfig};
use anyhow::{anyhow, bail, ensure, Context, Result};
use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// K=50, N_r=20, N_t=L=10
    Paper,
    /// K=10, N_r=8, N_t=L=4
    Desk,
}

impl FromStr for Preset {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::from_str_ci(s)
    }
}

impl Preset {
    fn from_str_ci(s: &str) -> Result<Self> {
        <Preset as ValueEnum>::from_str(s, true).map_err(|e| anyhow!("unknown preset `{s}`: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub k: usize,
    pub nt: usize,
    pub nr: usize,
    pub l: usize,
    pub p0: f64,
    /// Transmit SNR `P0/σ_n²` in dB.
    pub snr_db: f64,
    pub rician: RicianParams,
    /// Channel draws per grid point.
    pub draws: usize,
    /// Monte-Carlo symbol trials per draw; 0 reports only the analytic MSE.
    pub trials: usize,
    pub seed: u64,
    /// Sweep values; `None` selects the subcommand's default grid.
    pub grid: Option<Vec<f64>>,
    pub methods: Vec<ReceiveMethod>,
    /// Feedback rounds `M` and the denoising-factor range.
    pub rounds: usize,
    pub eta_min: f64,
    pub eta_max: f64,
    pub sdr: SdrConfig,
    /// Fill the `wall_ms` column. Off by default so that output is reproducible byte for byte.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn preset(p: Preset) -> Self {
        let desk = Self {
            k: 10,
            nt: 4,
            nr: 8,
            l: 4,
            p0: 1.0,
            snr_db: 10.0,
            rician: RicianParams::default(),
            draws: 100,
            trials: 0,
            seed: 1,
            grid: None,
            methods: ReceiveMethod::ALL.to_vec(),
            rounds: 7,
            eta_min: 0.0,
            eta_max: 100.0,
            sdr: SdrConfig::default(),
            timing: false,
        };
        match p {
            Preset::Desk => desk,
            Preset::Paper => Self {
                k: 50,
                nt: 10,
                nr: 20,
                l: 10,
                ..desk
            },
        }
    }

    /// `σ_n² = P0 / 10^(ρ_t/10)`.
    pub fn noise_variance(&self) -> f64 {
        self.p0 / 10f64.powf(self.snr_db / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.k >= 1 && self.nt >= 1 && self.nr >= 1,
            "K, N_t and N_r must be positive"
        );
        ensure!(
            self.l >= 1 && self.l <= self.nt.min(self.nr),
            "L={} must satisfy 1 <= L <= min(N_t, N_r) = {}",
            self.l,
            self.nt.min(self.nr)
        );
        ensure!(self.p0 > 0.0 && self.p0.is_finite(), "P0 must be positive");
        ensure!(self.snr_db.is_finite(), "snr_db must be finite");
        ensure!(self.rician.variance > 0.0, "channel variance must be positive");
        ensure!(self.draws >= 1, "draws must be positive");
        ensure!(!self.methods.is_empty(), "no methods selected");
        ensure!(self.rounds >= 1, "rounds must be positive");
        ensure!(self.eta_min < self.eta_max, "eta_min must be below eta_max");
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment. A `preset` key
    /// resets every field first, wherever it appears.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value, got `{raw}`", n + 1))?;
            pairs.push((n + 1, key.trim().to_string(), value.trim().to_string()));
        }
        if let Some((_, _, v)) = pairs.iter().find(|(_, k, _)| k == "preset") {
            *self = Self::preset(Preset::from_str_ci(v)?);
        }
        for (n, key, value) in pairs {
            self.set(&key, &value).with_context(|| format!("line {n}"))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.apply_text(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            v.parse().map_err(|e| anyhow!("{key}: `{v}`: {e}"))
        }
        match key {
            "preset" => {}
            "k" => self.k = num(key, value)?,
            "n_t" => self.nt = num(key, value)?,
            "n_r" => self.nr = num(key, value)?,
            "l" => self.l = num(key, value)?,
            "p0" => self.p0 = num(key, value)?,
            "snr_db" => self.snr_db = num(key, value)?,
            "mean" => self.rician.mean = aircomp_core::linalg::real(num(key, value)?),
            "variance" => self.rician.variance = num(key, value)?,
            "draws" => self.draws = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "grid" => self.grid = Some(parse_grid(value)?),
            "methods" => self.methods = parse_methods(value)?,
            "rounds" => self.rounds = num(key, value)?,
            "eta_min" => self.eta_min = num(key, value)?,
            "eta_max" => self.eta_max = num(key, value)?,
            "randomizations" => self.sdr.randomizations = num(key, value)?,
            "admm_max_iter" => self.sdr.max_iter = num(key, value)?,
            "admm_tol" => self.sdr.tol = num(key, value)?,
            "timing" => self.timing = num(key, value)?,
            other => bail!("unknown key `{other}`"),
        }
        Ok(())
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let grid = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| anyhow!("grid value `{x}`: {e}")))
        .collect::<Result<Vec<_>>>()?;
    ensure!(!grid.is_empty(), "empty grid");
    Ok(grid)
}

pub fn parse_methods(s: &str) -> Result<Vec<ReceiveMethod>> {
    s.split(',')
        .map(|t| ReceiveMethod::from_tag(t.trim()).ok_or_else(|| anyhow!("unknown method `{}`", t.trim())))
        .collect()
}
