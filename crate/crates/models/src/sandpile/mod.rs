//! Zhang and BTW sandpiles on an `L × L` lattice with open boundaries.
//!
//! Energies are stored as exceedance over the threshold `E_c`, so a site is
//! active when its value is nonnegative. Relaxation is a synchronous map:
//! every active site sheds according to its value at the start of the step
//! and receives shares from neighbours that toppled in the same step.

pub mod fss;

use std::fmt;
use std::ops::{Add, AddAssign, Sub};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use tailsim_core::tail::{self, LineFit, TailError};
use tailsim_core::{EmpiricalDistribution, Stream, StreamRng};
use thiserror::Error;

pub use fss::{fss_fit, CutoffScale, FssFit, FssOptions, FssSample};

/// Coordination number of the square lattice.
pub const Q: usize = 4;

/// Relaxation is abandoned past this many topplings in one avalanche.
pub const RUNAWAY_LIMIT: u64 = 1_000_000_000;

#[derive(Debug, Error)]
pub enum SandpileError {
    #[error("invalid lattice config: {0}")]
    Config(String),
    #[error("relaxation did not terminate after {topplings} topplings")]
    Runaway { topplings: u64 },
    #[error(transparent)]
    Tail(#[from] TailError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Active sites shed all their energy (`χ = 1`).
    Zhang,
    /// Active sites shed exactly `E_c` (`χ = 0`).
    Btw,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Zhang => "zhang",
            Model::Btw => "btw",
        })
    }
}

impl FromStr for Model {
    type Err = SandpileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zhang" => Ok(Model::Zhang),
            "btw" => Ok(Model::Btw),
            other => Err(SandpileError::Config(format!("unknown model `{other}` (zhang, btw)"))),
        }
    }
}

/// Law of the energy `δE` added per drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum DriveLaw {
    Fixed { amount: f64 },
    Uniform { max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    /// Absolute energies uniform on `[0, E_c)`.
    Uniform,
    /// All absolute energies zero.
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeConfig {
    pub side: usize,
    pub model: Model,
    pub ec: f64,
    pub drive: DriveLaw,
    pub initial: InitialState,
}

impl LatticeConfig {
    /// BTW with grains of `E_c/4`.
    pub fn btw(side: usize, ec: f64) -> Result<Self, SandpileError> {
        let c = Self { side, model: Model::Btw, ec, drive: DriveLaw::Fixed { amount: ec / Q as f64 }, initial: InitialState::Uniform };
        c.validate()?;
        Ok(c)
    }

    /// Zhang with `δE` uniform on `(0, E_c)`.
    pub fn zhang(side: usize, ec: f64) -> Result<Self, SandpileError> {
        let c = Self { side, model: Model::Zhang, ec, drive: DriveLaw::Uniform { max: ec }, initial: InitialState::Uniform };
        c.validate()?;
        Ok(c)
    }

    pub fn of_model(model: Model, side: usize, ec: f64) -> Result<Self, SandpileError> {
        match model {
            Model::Btw => Self::btw(side, ec),
            Model::Zhang => Self::zhang(side, ec),
        }
    }

    pub fn with_initial(self, initial: InitialState) -> Self {
        Self { initial, ..self }
    }

    pub fn validate(&self) -> Result<(), SandpileError> {
        let bad = |s: String| Err(SandpileError::Config(s));
        if self.side < 3 {
            return bad(format!("side length must be at least 3, got {}", self.side));
        }
        if self.side > 1 << 15 {
            return bad(format!("side length {} is too large", self.side));
        }
        if !(self.ec > 0.0 && self.ec.is_finite()) {
            return bad(format!("threshold E_c must be positive, got {}", self.ec));
        }
        match self.drive {
            DriveLaw::Fixed { amount } if !(amount > 0.0 && amount.is_finite()) => bad(format!("drive amount must be positive, got {amount}")),
            DriveLaw::Uniform { max } if !(max > 0.0 && max.is_finite()) => bad(format!("drive maximum must be positive, got {max}")),
            _ => Ok(()),
        }
    }

    pub fn sites(&self) -> usize {
        self.side * self.side
    }
}

/// Arithmetic for site energies. `f64` is the general backend; `i64`
/// counts grains of `E_c/4` and is exact for BTW.
pub trait Energy: Copy + PartialOrd + Add<Output = Self> + Sub<Output = Self> + AddAssign + fmt::Debug + Send + Sync + 'static {
    const ZERO: Self;
    const EXACT: bool;
    fn threshold(ec: f64) -> Self;
    fn initial(state: InitialState, ec: f64, rng: &mut StreamRng) -> Self;
    fn drive(law: DriveLaw, rng: &mut StreamRng) -> Self;
    fn quarter(self) -> Self;
    fn to_f64(self, ec: f64) -> f64;
}

impl Energy for f64 {
    const ZERO: Self = 0.0;
    const EXACT: bool = false;

    fn threshold(ec: f64) -> Self {
        ec
    }

    fn initial(state: InitialState, ec: f64, rng: &mut StreamRng) -> Self {
        match state {
            InitialState::Uniform => rng.random::<f64>() * ec - ec,
            InitialState::Empty => -ec,
        }
    }

    fn drive(law: DriveLaw, rng: &mut StreamRng) -> Self {
        match law {
            DriveLaw::Fixed { amount } => amount,
            // (0, max]: δE > 0.
            DriveLaw::Uniform { max } => (1.0 - rng.random::<f64>()) * max,
        }
    }

    fn quarter(self) -> Self {
        self / Q as f64
    }

    fn to_f64(self, _ec: f64) -> f64 {
        self
    }
}

impl Energy for i64 {
    const ZERO: Self = 0;
    const EXACT: bool = true;

    fn threshold(_ec: f64) -> Self {
        Q as i64
    }

    fn initial(state: InitialState, _ec: f64, rng: &mut StreamRng) -> Self {
        match state {
            InitialState::Uniform => rng.random_range(0..Q as i64) - Q as i64,
            InitialState::Empty => -(Q as i64),
        }
    }

    fn drive(_law: DriveLaw, _rng: &mut StreamRng) -> Self {
        1
    }

    fn quarter(self) -> Self {
        debug_assert_eq!(self % Q as i64, 0);
        self / Q as i64
    }

    fn to_f64(self, ec: f64) -> f64 {
        self as f64 * ec / Q as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AvalancheRecord {
    /// Total topplings.
    pub size: u64,
    /// Distinct sites that toppled.
    pub area: u64,
    /// Parallel update steps.
    pub duration: u64,
    /// Energy lost through the boundary.
    pub dissipated: f64,
}

/// One lattice with its energy bookkeeping.
#[derive(Debug, Clone)]
pub struct Sandpile<E: Energy = f64> {
    config: LatticeConfig,
    energy: Vec<E>,
    ec: E,
    injected: E,
    dissipated: E,
    rng: StreamRng,
    active: Vec<u32>,
    next_active: Vec<u32>,
    sheds: Vec<E>,
    step_mark: Vec<u64>,
    toppled_mark: Vec<u64>,
    steps: u64,
    avalanches: u64,
}

impl<E: Energy> Sandpile<E> {
    pub fn new(config: LatticeConfig, stream: Stream) -> Result<Self, SandpileError> {
        config.validate()?;
        if E::EXACT && (config.model != Model::Btw || config.drive != (DriveLaw::Fixed { amount: config.ec / Q as f64 })) {
            return Err(SandpileError::Config("exact arithmetic needs BTW with grains of E_c/4".into()));
        }
        let mut init = stream.named("init").rng();
        let n = config.sites();
        let energy = (0..n).map(|_| E::initial(config.initial, config.ec, &mut init)).collect();
        Ok(Self {
            config,
            energy,
            ec: E::threshold(config.ec),
            injected: E::ZERO,
            dissipated: E::ZERO,
            rng: stream.named("drive").rng(),
            active: Vec::new(),
            next_active: Vec::new(),
            sheds: Vec::new(),
            step_mark: vec![0; n],
            toppled_mark: vec![0; n],
            steps: 0,
            avalanches: 0,
        })
    }

    pub fn config(&self) -> &LatticeConfig {
        &self.config
    }

    /// Exceedances `E_i - E_c`, row-major.
    pub fn exceedances(&self) -> &[E] {
        &self.energy
    }

    pub fn exceedance(&self, row: usize, col: usize) -> E {
        self.energy[row * self.config.side + col]
    }

    pub fn set_exceedance(&mut self, row: usize, col: usize, value: E) {
        self.energy[row * self.config.side + col] = value;
    }

    pub fn is_quiescent(&self) -> bool {
        self.energy.iter().all(|&e| e < E::ZERO)
    }

    pub fn injected(&self) -> E {
        self.injected
    }

    pub fn dissipated(&self) -> E {
        self.dissipated
    }

    /// Total absolute energy on the lattice.
    pub fn stored(&self) -> E {
        self.energy.iter().fold(E::ZERO, |acc, &e| acc + e + self.ec)
    }

    /// Adds `δE` at a uniformly random site and relaxes.
    pub fn drive_and_relax(&mut self) -> Result<AvalancheRecord, SandpileError> {
        let site = self.rng.random_range(0..self.energy.len());
        let de = E::drive(self.config.drive, &mut self.rng);
        self.drive_site_and_relax(site, de)
    }

    /// Adds `de` at `site` (row-major index) and relaxes.
    pub fn drive_site_and_relax(&mut self, site: usize, de: E) -> Result<AvalancheRecord, SandpileError> {
        debug_assert!(self.is_quiescent_at(site));
        self.injected += de;
        self.energy[site] += de;
        self.relax(site)
    }

    fn is_quiescent_at(&self, site: usize) -> bool {
        self.energy[site] < E::ZERO
    }

    fn relax(&mut self, seed_site: usize) -> Result<AvalancheRecord, SandpileError> {
        self.avalanches += 1;
        let id = self.avalanches;
        let side = self.config.side;
        let zhang = self.config.model == Model::Zhang;
        let before = self.dissipated;
        let (mut size, mut area, mut duration) = (0u64, 0u64, 0u64);
        self.active.clear();
        if self.energy[seed_site] >= E::ZERO {
            self.active.push(seed_site as u32);
        }
        while !self.active.is_empty() {
            duration += 1;
            self.steps += 1;
            let mark = self.steps;
            size += self.active.len() as u64;
            if size > RUNAWAY_LIMIT {
                return Err(SandpileError::Runaway { topplings: size });
            }
            // Sheds from start-of-step values, then residuals, then shares.
            self.sheds.clear();
            for &i in &self.active {
                let e = self.energy[i as usize];
                self.sheds.push(if zhang { e + self.ec } else { self.ec });
            }
            for &i in &self.active {
                let i = i as usize;
                self.energy[i] = if zhang { E::ZERO - self.ec } else { self.energy[i] - self.ec };
                if self.toppled_mark[i] != id {
                    self.toppled_mark[i] = id;
                    area += 1;
                }
            }
            self.next_active.clear();
            for (k, &i) in self.active.iter().enumerate() {
                let i = i as usize;
                let share = self.sheds[k].quarter();
                let (r, c) = (i / side, i % side);
                let neighbours = [(r > 0).then(|| i - side), (r + 1 < side).then(|| i + side), (c > 0).then(|| i - 1), (c + 1 < side).then(|| i + 1)];
                for nb in neighbours {
                    match nb {
                        Some(j) => {
                            self.energy[j] += share;
                            if self.energy[j] >= E::ZERO && self.step_mark[j] != mark {
                                self.step_mark[j] = mark;
                                self.next_active.push(j as u32);
                            }
                        }
                        None => self.dissipated += share,
                    }
                }
            }
            for &i in &self.active {
                let i = i as usize;
                if self.energy[i] >= E::ZERO && self.step_mark[i] != mark {
                    self.step_mark[i] = mark;
                    self.next_active.push(i as u32);
                }
            }
            std::mem::swap(&mut self.active, &mut self.next_active);
        }
        let dissipated = (self.dissipated - before).to_f64(self.config.ec);
        Ok(AvalancheRecord { size, area, duration, dissipated })
    }
}

/// Energy audit `injected - dissipated - (stored_final - stored_initial)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyAudit {
    pub injected: f64,
    pub dissipated: f64,
    pub stored_initial: f64,
    pub stored_final: f64,
    /// Residual relative to the injected energy.
    pub relative_residual: f64,
    /// The balance holds in exact arithmetic; always false for floats.
    pub exact: bool,
}

impl EnergyAudit {
    fn of<E: Energy>(pile: &Sandpile<E>, stored_initial: E) -> Self {
        let ec = pile.config.ec;
        let (inj, dis, fin) = (pile.injected, pile.dissipated, pile.stored());
        let residual = inj.to_f64(ec) - dis.to_f64(ec) - (fin.to_f64(ec) - stored_initial.to_f64(ec));
        let exact = E::EXACT && inj + stored_initial == dis + fin;
        Self {
            injected: inj.to_f64(ec),
            dissipated: dis.to_f64(ec),
            stored_initial: stored_initial.to_f64(ec),
            stored_final: fin.to_f64(ec),
            relative_residual: residual.abs() / inj.to_f64(ec).abs().max(f64::MIN_POSITIVE),
            exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Size,
    Area,
    Duration,
}

impl Observable {
    pub const ALL: [Observable; 3] = [Observable::Size, Observable::Area, Observable::Duration];

    pub fn of(&self, r: &AvalancheRecord) -> u64 {
        match self {
            Observable::Size => r.size,
            Observable::Area => r.area,
            Observable::Duration => r.duration,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Observable::Size => "s",
            Observable::Area => "a",
            Observable::Duration => "t",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AvalancheRun {
    pub config: LatticeConfig,
    pub exact: bool,
    /// Records after the transient.
    pub records: Vec<AvalancheRecord>,
    pub transient: usize,
    pub audit: EnergyAudit,
}

impl AvalancheRun {
    /// Values of `obs` over avalanches with at least one toppling.
    pub fn values(&self, obs: Observable) -> Vec<f64> {
        self.records.iter().filter(|r| r.size > 0).map(|r| obs.of(r) as f64).collect()
    }

    /// `P(x)` over nonempty avalanches; `None` if every drive was sub-threshold.
    pub fn distribution(&self, obs: Observable) -> Option<EmpiricalDistribution> {
        EmpiricalDistribution::new(self.values(obs)).ok()
    }

    pub fn mean_size(&self) -> f64 {
        self.records.iter().map(|r| r.size as f64).sum::<f64>() / self.records.len() as f64
    }
}

/// Transient discarded before recording `n` avalanches: 20% of the total.
pub fn transient_len(n: usize) -> usize {
    n / 4
}

/// Drives `transient_len(n) + n` avalanches and keeps the last `n`.
pub fn run_avalanches<E: Energy>(config: LatticeConfig, n: usize, stream: Stream) -> Result<AvalancheRun, SandpileError> {
    if n == 0 {
        return Err(SandpileError::Config("need at least one avalanche".into()));
    }
    let mut pile = Sandpile::<E>::new(config, stream)?;
    let stored_initial = pile.stored();
    let transient = transient_len(n);
    for _ in 0..transient {
        pile.drive_and_relax()?;
    }
    let records = (0..n).map(|_| pile.drive_and_relax()).collect::<Result<Vec<_>, _>>()?;
    let audit = EnergyAudit::of(&pile, stored_initial);
    Ok(AvalancheRun { config, exact: E::EXACT, records, transient, audit })
}

/// Float or exact backend chosen at run time.
pub fn run_avalanches_with(config: LatticeConfig, n: usize, stream: Stream, exact: bool) -> Result<AvalancheRun, SandpileError> {
    if exact {
        run_avalanches::<i64>(config, n, stream)
    } else {
        run_avalanches::<f64>(config, n, stream)
    }
}

/// Independent runs in parallel, run `i` on `stream.child(i)`.
pub fn run_many(configs: &[LatticeConfig], n: usize, stream: Stream, exact: bool) -> Result<Vec<AvalancheRun>, SandpileError> {
    configs.par_iter().enumerate().map(|(i, &c)| run_avalanches_with(c, n, stream.child(i as u64), exact)).collect()
}

/// Log-binned density of `values` on `[lo, hi]`, `(geometric centre, density)`.
pub fn log_binned_density(values: &[f64], lo: f64, hi: f64, bins_per_decade: usize) -> Vec<(f64, f64)> {
    let total = values.len() as f64;
    let bins = ((hi / lo).log10() * bins_per_decade as f64).ceil().max(1.0) as usize;
    let ratio = (hi / lo).powf(1.0 / bins as f64);
    let mut counts = vec![0u64; bins];
    for &v in values {
        if v >= lo && v < hi {
            let k = ((v / lo).ln() / ratio.ln()).floor() as usize;
            counts[k.min(bins - 1)] += 1;
        }
    }
    counts
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c > 0)
        .map(|(k, &c)| {
            let a = lo * ratio.powi(k as i32);
            let b = a * ratio;
            // Integer-valued data: count the integers inside the bin.
            let width = (b.ceil() - a.ceil()).max(1.0);
            ((a * b).sqrt(), c as f64 / total / width)
        })
        .collect()
}

/// Log-log regression of the binned density over `[lo, hi]`.
pub fn density_fit(values: &[f64], lo: f64, hi: f64, bins_per_decade: usize) -> Result<LineFit, SandpileError> {
    let pts = log_binned_density(values, lo, hi, bins_per_decade);
    Ok(tail::loglog_regression(&pts)?)
}
