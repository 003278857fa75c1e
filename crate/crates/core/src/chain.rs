//! The non-homogeneous Markov chain with initial law `μ₁` and transition
//! kernels `pₙ(x, ·) = δₓ ▷ μₙ`, whose `n`-th marginal is `μ₁ ▷ ⋯ ▷ μₙ`.
//!
//! Each path owns a ChaCha8 stream keyed by `(master_seed, path index)`, so a
//! batch is bit-reproducible regardless of how paths are scheduled.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::AtomicMeasure;
use crate::monotone::{self, ConvolutionOptions, Kernel};
use crate::report::{format_float, format_opt};
use crate::sequence::SequenceSpec;

/// Statistical gates accept estimates within this many standard errors.
pub const SE_BAND: f64 = 4.0;
/// Minimum ensemble size for the moment checks.
pub const MIN_CHECK_PATHS: usize = 10_000;
/// Upper bound on stored `(path, step)` cells per batch.
pub const MAX_CELLS: usize = 50_000_000;
/// Relative rounding allowance added to every band, so that deterministic
/// chains with exactly-zero standard error are not failed by last-bit noise.
pub const ROUNDING_FLOOR: f64 = 1e-12;

const PATH_BLOCK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngPolicy {
    pub master_seed: u64,
}

impl RngPolicy {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    /// Independent stream for one path: the ChaCha key comes from the master
    /// seed and the path index selects the stream (nonce).
    pub fn stream(&self, path: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(path);
        rng
    }
}

/// Which steps of each path are stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Recording {
    Full,
    /// Sorted, deduplicated 1-based steps.
    Steps(Vec<usize>),
}

/// Exact one-step conditional law `δₓ ▷ μₙ`.
pub fn kernel_distribution(x: f64, mu_n: &AtomicMeasure) -> Result<AtomicMeasure> {
    monotone::delta_convolve(x, mu_n, &ConvolutionOptions::default())
}

/// One draw from `δₓ ▷ μₙ`, consuming exactly one uniform variate.
pub fn step_sample<R: Rng + ?Sized>(x: f64, mu_n: &AtomicMeasure, rng: &mut R) -> Result<f64> {
    let u: f64 = rng.random();
    Kernel::new(mu_n)?.sample(x, u)
}

/// Per-step quantities precomputed from a [`SequenceSpec`].
#[derive(Debug, Clone)]
pub struct ChainModel {
    first: AtomicMeasure,
    kernels: Vec<Kernel>,
    means: Vec<f64>,
    second_moments: Vec<f64>,
    variances: Vec<f64>,
    mean_prefix: Vec<f64>,
    normalizers: Option<Vec<f64>>,
}

impl ChainModel {
    pub fn new(spec: &SequenceSpec, n_steps: usize) -> Result<Self> {
        let measures = spec.measures(n_steps)?;
        let normalizers = match spec.normalizer_rule {
            Some(_) => Some(spec.normalizers(n_steps)?),
            None => None,
        };
        let kernels = measures.iter().map(Kernel::new).collect::<Result<Vec<_>>>()?;
        let means: Vec<f64> = measures.iter().map(AtomicMeasure::mean).collect();
        let mut mean_prefix = Vec::with_capacity(n_steps);
        let mut acc = 0.0;
        for &m in &means {
            acc += m;
            mean_prefix.push(acc);
        }
        Ok(Self {
            first: measures[0].clone(),
            kernels,
            second_moments: measures.iter().map(AtomicMeasure::second_moment).collect(),
            variances: measures.iter().map(AtomicMeasure::variance).collect(),
            means,
            mean_prefix,
            normalizers,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.kernels.len()
    }

    /// `m(μₖ)` for 1-based `k`.
    pub fn mean(&self, k: usize) -> f64 {
        self.means[k - 1]
    }

    pub fn second_moment(&self, k: usize) -> f64 {
        self.second_moments[k - 1]
    }

    pub fn variance(&self, k: usize) -> f64 {
        self.variances[k - 1]
    }

    /// `Σ_{j≤k} m(μⱼ)`.
    pub fn mean_sum(&self, k: usize) -> f64 {
        self.mean_prefix[k - 1]
    }

    pub fn normalizer(&self, k: usize) -> Option<f64> {
        self.normalizers.as_ref().map(|b| b[k - 1])
    }

    /// `Σ_{j≤k} var(μⱼ)/bⱼ²`, summed in step order.
    pub fn second_moment_curve(&self) -> Option<Vec<f64>> {
        let b = self.normalizers.as_ref()?;
        let mut acc = 0.0;
        Some(
            self.variances
                .iter()
                .zip(b)
                .map(|(v, b)| {
                    acc += v / (b * b);
                    acc
                })
                .collect(),
        )
    }

    fn step(&self, k: usize, x_prev: f64, u: f64) -> Result<f64> {
        if k == 1 {
            Ok(self.first.positions()[self.first.quantile_index(u)])
        } else {
            self.kernels[k - 1].sample(x_prev, u)
        }
    }
}

/// Stored paths `X₁..Xₙ` and the derived series
/// `Yₙ = Xₙ − Σ_{k≤n} m(μₖ)`, `Zₙ = Yₙ − Yₙ₋₁` (`Z₁ = Y₁`), `Sₙ = Σ_{k≤n} Zₖ/bₖ`.
///
/// Arrays are row-major, `path * recorded_steps.len() + column`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch {
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    steps: Vec<usize>,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    X,
    Y,
    Z,
    S,
}

impl TrajectoryBatch {
    /// Recorded 1-based steps.
    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn is_full(&self) -> bool {
        self.steps.len() == self.n_steps
    }

    pub fn has_normalized_series(&self) -> bool {
        !self.s.is_empty()
    }

    /// Column index of step `n`, if recorded.
    pub fn column_of(&self, n: usize) -> Option<usize> {
        self.steps.binary_search(&n).ok()
    }

    fn data(&self, series: Series) -> &[f64] {
        match series {
            Series::X => &self.x,
            Series::Y => &self.y,
            Series::Z => &self.z,
            Series::S => &self.s,
        }
    }

    pub fn value(&self, series: Series, path: usize, column: usize) -> f64 {
        self.data(series)[path * self.steps.len() + column]
    }

    /// All paths' values of `series` at step `n`.
    pub fn column(&self, series: Series, n: usize) -> Option<Vec<f64>> {
        let col = self.column_of(n)?;
        let data = self.data(series);
        if data.is_empty() {
            return None;
        }
        let width = self.steps.len();
        Some((0..self.n_paths).map(|p| data[p * width + col]).collect())
    }

    /// Recomputes `(y, z, s)` from the stored `x`; requires full recording.
    pub fn recompute_derived(&self, spec: &SequenceSpec) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        if !self.is_full() {
            return Err(Error::Config("derived series need a fully recorded batch".into()));
        }
        let model = ChainModel::new(spec, self.n_steps)?;
        let width = self.n_steps;
        let mut y = Vec::with_capacity(self.x.len());
        let mut z = Vec::with_capacity(self.x.len());
        let mut s = Vec::new();
        for row in self.x.chunks(width) {
            let mut acc = Accumulator::default();
            for (i, &x) in row.iter().enumerate() {
                let (yk, zk, sk) = acc.push(&model, i + 1, x);
                y.push(yk);
                z.push(zk);
                if let Some(sk) = sk {
                    s.push(sk);
                }
            }
        }
        Ok((y, z, s))
    }

    /// Stored `(y, z, s)`.
    pub fn derived(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.y, &self.z, &self.s)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }
}

/// Running derived-series state along one path.
#[derive(Default)]
struct Accumulator {
    y_prev: f64,
    s: f64,
}

impl Accumulator {
    fn push(&mut self, model: &ChainModel, k: usize, x: f64) -> (f64, f64, Option<f64>) {
        let y = x - model.mean_sum(k);
        let z = if k == 1 { y } else { y - self.y_prev };
        self.y_prev = y;
        let s = model.normalizer(k).map(|b| {
            self.s += z / b;
            self.s
        });
        (y, z, s)
    }
}

/// Simulates `n_paths` full paths of length `n_steps`.
pub fn simulate(spec: &SequenceSpec, n_steps: usize, n_paths: usize, rng: &RngPolicy) -> Result<TrajectoryBatch> {
    simulate_recording(spec, n_steps, n_paths, rng, &Recording::Full)
}

pub fn simulate_recording(
    spec: &SequenceSpec,
    n_steps: usize,
    n_paths: usize,
    rng: &RngPolicy,
    recording: &Recording,
) -> Result<TrajectoryBatch> {
    if n_steps == 0 || n_paths == 0 {
        return Err(Error::Config(format!(
            "need n_steps >= 1 and n_paths >= 1, got {n_steps} and {n_paths}"
        )));
    }
    let steps: Vec<usize> = match recording {
        Recording::Full => (1..=n_steps).collect(),
        Recording::Steps(list) => {
            let mut list = list.clone();
            list.sort_unstable();
            list.dedup();
            if list.is_empty() || list[0] == 0 || *list.last().unwrap() > n_steps {
                return Err(Error::Config(format!(
                    "recorded steps must lie in 1..={n_steps}, got {list:?}"
                )));
            }
            list
        }
    };
    let cells = n_paths.saturating_mul(steps.len());
    if cells > MAX_CELLS {
        return Err(Error::Resource(format!(
            "{n_paths} paths x {} recorded steps = {cells} cells exceeds {MAX_CELLS}",
            steps.len()
        )));
    }
    let model = ChainModel::new(spec, n_steps)?;
    let with_s = model.normalizers.is_some();
    let width = steps.len();

    let blocks: Vec<Block> = (0..n_paths.div_ceil(PATH_BLOCK))
        .into_par_iter()
        .map(|b| {
            let start = b * PATH_BLOCK;
            let end = (start + PATH_BLOCK).min(n_paths);
            simulate_block(&model, rng, start..end, &steps, with_s)
        })
        .collect::<Result<_>>()?;

    let mut batch = TrajectoryBatch {
        n_steps,
        n_paths,
        seed: rng.master_seed,
        steps,
        x: Vec::with_capacity(cells),
        y: Vec::with_capacity(cells),
        z: Vec::with_capacity(cells),
        s: Vec::with_capacity(if with_s { cells } else { 0 }),
    };
    for block in blocks {
        batch.x.extend(block.x);
        batch.y.extend(block.y);
        batch.z.extend(block.z);
        batch.s.extend(block.s);
    }
    debug_assert_eq!(batch.x.len(), n_paths * width);
    Ok(batch)
}

struct Block {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
}

fn simulate_block(
    model: &ChainModel,
    policy: &RngPolicy,
    paths: std::ops::Range<usize>,
    steps: &[usize],
    with_s: bool,
) -> Result<Block> {
    let cells = paths.len() * steps.len();
    let mut block = Block {
        x: Vec::with_capacity(cells),
        y: Vec::with_capacity(cells),
        z: Vec::with_capacity(cells),
        s: Vec::with_capacity(if with_s { cells } else { 0 }),
    };
    let last = *steps.last().expect("nonempty");
    for path in paths {
        let mut rng = policy.stream(path as u64);
        let mut acc = Accumulator::default();
        let mut x = 0.0;
        let mut next = 0;
        for k in 1..=last {
            let u: f64 = rng.random();
            x = model.step(k, x, u)?;
            let (y, z, s) = acc.push(model, k, x);
            if steps[next] == k {
                block.x.push(x);
                block.y.push(y);
                block.z.push(z);
                if let Some(s) = s {
                    block.s.push(s);
                }
                next += 1;
            }
        }
    }
    Ok(block)
}

/// Sample mean and its standard error, summed in path order.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// A sample mean compared with a target value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub target: f64,
    pub ok: bool,
}

impl Estimate {
    /// `scale` sizes the rounding floor: typically the mean absolute term.
    fn new(values: &[f64], target: f64, scale: f64) -> Self {
        let (mean, std_err) = mean_and_se(values);
        let band = SE_BAND * std_err + ROUNDING_FLOOR * (1.0 + scale);
        Self {
            mean,
            std_err,
            target,
            ok: (mean - target).abs() <= band,
        }
    }

    pub fn z_score(&self) -> f64 {
        if self.std_err == 0.0 {
            0.0
        } else {
            (self.mean - self.target) / self.std_err
        }
    }
}

fn mean_abs(values: &[f64]) -> f64 {
    values.iter().map(|v| v.abs()).sum::<f64>() / values.len() as f64
}

fn check_paths(batch: &TrajectoryBatch) -> Result<()> {
    if batch.n_paths < MIN_CHECK_PATHS {
        return Err(Error::Config(format!(
            "moment checks need at least {MIN_CHECK_PATHS} paths, batch has {}",
            batch.n_paths
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMomentRow {
    pub n: usize,
    /// Mean of `Xₙ − Xₙ₋₁ − m(μₙ)`.
    pub first: Estimate,
    /// Mean of `Xₙ² − Xₙ₋₁² − 2m(μₙ)Xₙ₋₁ − m₂(μₙ)`.
    pub second: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMomentReport {
    pub rows: Vec<ConditionalMomentRow>,
}

impl ConditionalMomentReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.first.ok && r.second.ok)
    }
}

/// Conditional first and second moments of the kernel, checked at every
/// recorded pair of consecutive steps `(n − 1, n)`.
pub fn conditional_moment_check(batch: &TrajectoryBatch, spec: &SequenceSpec) -> Result<ConditionalMomentReport> {
    check_paths(batch)?;
    let model = ChainModel::new(spec, batch.n_steps)?;
    let mut rows = Vec::new();
    for &n in batch.steps().iter().filter(|&&n| n >= 2) {
        let (Some(prev), Some(cur)) = (batch.column(Series::X, n - 1), batch.column(Series::X, n))
        else {
            continue;
        };
        let m = model.mean(n);
        let m2 = model.second_moment(n);
        let first: Vec<f64> = prev.iter().zip(&cur).map(|(p, c)| c - p - m).collect();
        let second: Vec<f64> = prev
            .iter()
            .zip(&cur)
            .map(|(p, c)| c * c - p * p - 2.0 * m * p - m2)
            .collect();
        let scale1 = mean_abs(&cur) + mean_abs(&prev);
        let scale2 = cur.iter().chain(&prev).map(|v| v * v).sum::<f64>() / cur.len() as f64;
        rows.push(ConditionalMomentRow {
            n,
            first: Estimate::new(&first, 0.0, scale1),
            second: Estimate::new(&second, 0.0, scale2),
        });
    }
    Ok(ConditionalMomentReport { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleRow {
    pub n: usize,
    /// `E[Sₙ²]` against `Σ_{k≤n} var(μₖ)/bₖ²`.
    pub s_squared: Estimate,
    /// `E[Zₙ]` against 0.
    pub increment: Estimate,
    /// `E[Zₙ²]` against `var(μₙ)`.
    pub increment_squared: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    pub rows: Vec<MartingaleRow>,
}

impl MartingaleReport {
    pub fn passed(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.s_squared.ok && r.increment.ok && r.increment_squared.ok)
    }

    pub fn row(&self, n: usize) -> Option<&MartingaleRow> {
        self.rows.iter().find(|r| r.n == n)
    }
}

/// `E[Sₙ²]`, `E[Zₙ]` and `E[Zₙ²]` at every recorded step.
pub fn martingale_second_moment_check(batch: &TrajectoryBatch, spec: &SequenceSpec) -> Result<MartingaleReport> {
    check_paths(batch)?;
    if !batch.has_normalized_series() {
        return Err(Error::Config("martingale check needs a normalizer schedule".into()));
    }
    let model = ChainModel::new(spec, batch.n_steps)?;
    let curve = model.second_moment_curve().expect("normalizers present");
    let mut rows = Vec::with_capacity(batch.steps().len());
    for &n in batch.steps() {
        let s = batch.column(Series::S, n).expect("recorded");
        let z = batch.column(Series::Z, n).expect("recorded");
        let s2: Vec<f64> = s.iter().map(|v| v * v).collect();
        let z2: Vec<f64> = z.iter().map(|v| v * v).collect();
        let x_scale = batch.column(Series::X, n).map(|x| mean_abs(&x)).unwrap_or(0.0);
        rows.push(MartingaleRow {
            n,
            s_squared: Estimate::new(&s2, curve[n - 1], mean_abs(&s2)),
            increment: Estimate::new(&z, 0.0, x_scale),
            increment_squared: Estimate::new(&z2, model.variance(n), x_scale * x_scale),
        });
    }
    Ok(MartingaleReport { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalityRow {
    pub n: usize,
    /// `E[Zₙ g(Xₙ₋₁)]` for `g = 1`, `g = id`, `g = clamp(·, −1, 1)`.
    pub estimates: [Estimate; 3],
}

/// Martingale-difference orthogonality of increments against functions of
/// the previous state, at consecutive recorded steps.
pub fn increment_orthogonality_check(batch: &TrajectoryBatch) -> Result<Vec<OrthogonalityRow>> {
    check_paths(batch)?;
    let mut rows = Vec::new();
    for &n in batch.steps().iter().filter(|&&n| n >= 2) {
        let (Some(prev), Some(z)) = (batch.column(Series::X, n - 1), batch.column(Series::Z, n))
        else {
            continue;
        };
        let scale = mean_abs(&z) * (1.0 + mean_abs(&prev));
        let products = |g: &dyn Fn(f64) -> f64| -> Vec<f64> {
            prev.iter().zip(&z).map(|(&p, &zz)| zz * g(p)).collect()
        };
        let estimates = [
            Estimate::new(&products(&|_| 1.0), 0.0, scale),
            Estimate::new(&products(&|p| p), 0.0, scale),
            Estimate::new(&products(&|p| p.clamp(-1.0, 1.0)), 0.0, scale),
        ];
        rows.push(OrthogonalityRow { n, estimates });
    }
    Ok(rows)
}

pub const SUMMARY_HEADER: &str = "n,mean_x,var_x,mean_s2,analytic_sum,flags";

/// Per-step summary CSV body: `n,mean_x,var_x,mean_s2,analytic_sum,flags`.
///
/// `flags` is `ok`, or a `;`-joined list of failed gates among `s2`, `z`,
/// `z2`, `cond1`, `cond2`; gates that need more paths than the batch holds
/// are skipped.
pub fn summary_csv(batch: &TrajectoryBatch, spec: &SequenceSpec) -> Result<String> {
    let model = ChainModel::new(spec, batch.n_steps)?;
    let curve = model.second_moment_curve();
    let checks_enabled = batch.n_paths >= MIN_CHECK_PATHS;
    let martingale = if checks_enabled && batch.has_normalized_series() {
        Some(martingale_second_moment_check(batch, spec)?)
    } else {
        None
    };
    let conditional = if checks_enabled {
        Some(conditional_moment_check(batch, spec)?)
    } else {
        None
    };

    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for &n in batch.steps() {
        let x = batch.column(Series::X, n).expect("recorded");
        let (mean_x, _) = mean_and_se(&x);
        let var_x = x.iter().map(|v| (v - mean_x) * (v - mean_x)).sum::<f64>() / x.len() as f64;
        let mean_s2 = batch
            .column(Series::S, n)
            .map(|s| s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64);
        let analytic = curve.as_ref().map(|c| c[n - 1]);

        let mut flags = Vec::new();
        if let Some(row) = martingale.as_ref().and_then(|m| m.row(n)) {
            if !row.s_squared.ok {
                flags.push("s2");
            }
            if !row.increment.ok {
                flags.push("z");
            }
            if !row.increment_squared.ok {
                flags.push("z2");
            }
        }
        if let Some(row) = conditional.as_ref().and_then(|c| c.rows.iter().find(|r| r.n == n)) {
            if !row.first.ok {
                flags.push("cond1");
            }
            if !row.second.ok {
                flags.push("cond2");
            }
        }
        let flags = if flags.is_empty() { "ok".to_string() } else { flags.join(";") };
        writeln!(
            out,
            "{n},{},{},{},{},{flags}",
            format_float(mean_x),
            format_float(var_x),
            format_opt(mean_s2),
            format_opt(analytic),
        )
        .expect("write to String");
    }
    Ok(out)
}
