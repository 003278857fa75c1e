//! Stability of `D_{1/bₙ}(μ₁ ▷ ⋯ ▷ μₙ)` under `Σ var(μₖ)/bₖ² < ∞`.
//!
//! Stability is a limit statement; here it is operationalized as decay of the
//! outside mass `νₙ({|t − aₙ| ≥ ε})` across checkpoints together with the
//! Chebyshev bound `Σ_{k≤n} var(μₖ) / (bₙ² ε²)`. Outside masses are computed
//! exactly for small `n` and by simulating the chain for large `n`.

use std::fmt::Write as _;
use std::path::Path;

use crate::chain::{self, Recording, RngPolicy, Series, SE_BAND};
use crate::error::{Error, Result};
use crate::measures::AtomicMeasure;
use crate::monotone::{self, ConvolutionOptions};
use crate::report::{self, format_float, format_opt};
use crate::sequence::{MeasureRule, NormalizerRule, SequenceSpec};

pub const DEFAULT_EPS: [f64; 4] = [0.05, 0.1, 0.25, 0.5];
pub const DEFAULT_MC_CHECKPOINTS: [usize; 3] = [10, 100, 1000];
pub const DEFAULT_EXACT_CHECKPOINTS: [usize; 3] = [4, 8, 12];
/// Minimum number of paths for Monte Carlo stability estimates.
pub const MIN_MC_PATHS: usize = 10_000;
/// Slack on the Chebyshev bound for Monte Carlo estimates.
pub const CHEBYSHEV_SAFETY: f64 = 1.05;
/// Absolute slack on the Chebyshev bound for exact outside masses.
pub const CHEBYSHEV_EXACT_SLACK: f64 = 1e-12;
/// First-vs-last separation, in combined standard errors, required for decay.
pub const DECAY_SEPARATION: f64 = 2.0;
/// The convergence heuristic calls a series convergent when its increment
/// over the last decade of terms is below this.
pub const HEURISTIC_INCREMENT: f64 = 1e-3;

pub const CSV_HEADER: &str =
    "n,b_n,a_n,eps,outside_mass,method,std_err,cheb_bound,cond_partial_sum,classical_outside_mass";

/// `aₙ = (1/bₙ) Σ_{k≤n} m(μₖ)`.
pub fn centers(spec: &SequenceSpec, n: usize) -> Result<f64> {
    let b = spec.normalizers(n)?[n - 1];
    let total: f64 = spec.measures(n)?.iter().map(AtomicMeasure::mean).sum();
    Ok(total / b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSums {
    /// `Σ_{k≤n} var(μₖ)/bₖ²` for `n = 1..=N`.
    pub partial_sums: Vec<f64>,
    /// `S_N − S_{⌊N/10⌋}` (or `S_N − S_1` when `N < 10`).
    pub last_decade_increment: f64,
    /// Heuristic, advisory only.
    pub heuristic_convergent: bool,
    /// Closed-form verdict for the built-in families; `None` for explicit lists.
    pub analytic_convergent: Option<bool>,
}

impl ConditionSums {
    /// Analytic verdict when available, otherwise the heuristic.
    pub fn convergent(&self) -> bool {
        self.analytic_convergent.unwrap_or(self.heuristic_convergent)
    }

    pub fn describe(&self) -> String {
        match self.analytic_convergent {
            Some(true) => "convergent (closed form)".into(),
            Some(false) => "divergent (closed form)".into(),
            None if self.heuristic_convergent => "convergent (heuristic)".into(),
            None => "non-convergent (heuristic)".into(),
        }
    }
}

pub fn condition_partial_sums(spec: &SequenceSpec, n: usize) -> Result<ConditionSums> {
    let b = spec.normalizers(n)?;
    let mus = spec.measures(n)?;
    let mut acc = 0.0;
    let partial_sums: Vec<f64> = mus
        .iter()
        .zip(&b)
        .map(|(mu, b)| {
            acc += mu.variance() / (b * b);
            acc
        })
        .collect();
    let start = (n / 10).max(1);
    let last_decade_increment = partial_sums[n - 1] - partial_sums[start - 1];
    Ok(ConditionSums {
        heuristic_convergent: last_decade_increment < HEURISTIC_INCREMENT,
        last_decade_increment,
        analytic_convergent: analytic_convergence(spec)?,
        partial_sums,
    })
}

/// Closed forms for the built-in families: with `var(μₙ) ∝ n^α` and
/// `bₙ = n^p` the series converges iff `α − 2p < −1`; geometric normalizers
/// always win against polynomial variance.
pub fn analytic_convergence(spec: &SequenceSpec) -> Result<Option<bool>> {
    let (alpha, base) = match &spec.measure_rule {
        MeasureRule::Iid(base) => (0.0, base),
        MeasureRule::Scaled { base, alpha } => (*alpha, base),
        MeasureRule::Explicit(_) => return Ok(None),
    };
    if base.materialize()?.variance() == 0.0 {
        return Ok(Some(true));
    }
    Ok(match spec.normalizer_rule {
        Some(NormalizerRule::Linear) => Some(alpha - 2.0 < -1.0),
        Some(NormalizerRule::Power(p)) => Some(alpha - 2.0 * p < -1.0),
        Some(NormalizerRule::Geometric) => Some(true),
        Some(NormalizerRule::Explicit(_)) | None => None,
    })
}

/// `Σ_{k≤n} var(μₖ) / (bₙ² ε²)`; infinite at `ε = 0`.
pub fn chebyshev_bound(spec: &SequenceSpec, n: usize, eps: f64) -> Result<f64> {
    let b = spec.normalizers(n)?[n - 1];
    let var: f64 = spec.measures(n)?.iter().map(AtomicMeasure::variance).sum();
    Ok(if eps == 0.0 { f64::INFINITY } else { var / (b * b * eps * eps) })
}

/// `ν({t : |t − center| ≥ ε})`.
pub fn outside_mass(nu: &AtomicMeasure, center: f64, eps: f64) -> f64 {
    nu.atoms()
        .filter(|&(t, _)| (t - center).abs() >= eps)
        .map(|(_, w)| w)
        .sum::<f64>()
        .min(1.0)
}

fn check_eps(eps_list: &[f64]) -> Result<()> {
    match eps_list.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        Some(e) => Err(Error::Config(format!("eps must be finite and nonnegative, got {e}"))),
        None => Ok(()),
    }
}

/// Exact outside masses of `D_{1/bₙ}(μ₁ ▷ ⋯ ▷ μₙ)` around `aₙ`, one per `ε`.
pub fn stability_exact(
    spec: &SequenceSpec,
    n: usize,
    eps_list: &[f64],
    opts: &ConvolutionOptions,
) -> Result<Vec<f64>> {
    check_eps(eps_list)?;
    let b = spec.normalizers(n)?[n - 1];
    let a = centers(spec, n)?;
    let rho = monotone::convolve_sequence(&spec.measures(n)?, opts)?;
    let scaled = rho.dilate(1.0 / b)?;
    Ok(eps_list.iter().map(|&eps| outside_mass(&scaled, a, eps)).collect())
}

/// `μ₁ * ⋯ * μₙ` by a left fold with merging after each step.
pub fn classical_sequence(mus: &[AtomicMeasure], opts: &ConvolutionOptions) -> Result<AtomicMeasure> {
    classical_prefixes(mus, &[mus.len()], opts).map(|mut v| v.pop().expect("one checkpoint"))
}

/// Classical convolutions of the prefixes ending at each (sorted) checkpoint.
fn classical_prefixes(
    mus: &[AtomicMeasure],
    checkpoints: &[usize],
    opts: &ConvolutionOptions,
) -> Result<Vec<AtomicMeasure>> {
    opts.validate()?;
    let first = mus
        .first()
        .ok_or_else(|| Error::Domain("empty measure sequence".into()))?;
    let mut rho = first.clone();
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    for (k, mu) in mus.iter().enumerate() {
        if k > 0 {
            let projected = rho.len().saturating_mul(mu.len());
            if projected > opts.max_atoms {
                return Err(Error::AtomGuard {
                    step: k + 1,
                    projected,
                    limit: opts.max_atoms,
                });
            }
            rho = rho.classical_convolve_with(mu, opts.merge_tol, opts.prune_tol)?;
        }
        while next.peek() == Some(&&(k + 1)) {
            out.push(rho.clone());
            next.next();
        }
    }
    Ok(out)
}

/// The same statistic for the classical convolution `μ₁ * ⋯ * μₙ`.
pub fn classical_baseline(
    spec: &SequenceSpec,
    n: usize,
    eps_list: &[f64],
    opts: &ConvolutionOptions,
) -> Result<Vec<f64>> {
    check_eps(eps_list)?;
    let b = spec.normalizers(n)?[n - 1];
    let a = centers(spec, n)?;
    let rho = classical_sequence(&spec.measures(n)?, opts)?.dilate(1.0 / b)?;
    Ok(eps_list.iter().map(|&eps| outside_mass(&rho, a, eps)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    Mc,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Mc => "mc",
        }
    }
}

/// One `(n, ε, method)` line of a stability report.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub n: usize,
    pub b_n: f64,
    pub a_n: f64,
    pub eps: f64,
    pub outside_mass: f64,
    pub method: Method,
    /// Binomial standard error; `None` for exact rows.
    pub std_err: Option<f64>,
    pub cheb_bound: f64,
    pub cond_partial_sum: f64,
    pub classical_outside_mass: Option<f64>,
}

/// Decay of Monte Carlo outside masses across checkpoints, for one `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayAssessment {
    pub eps: f64,
    pub checkpoints: Vec<usize>,
    pub values: Vec<f64>,
    pub std_errs: Vec<f64>,
    pub cheb_bounds: Vec<f64>,
    pub non_increasing: bool,
    pub strictly_decreasing: bool,
    /// `(first − last) / √(se_first² + se_last²)`; infinite when both SEs vanish
    /// and the values differ, zero when they coincide.
    pub separation: f64,
}

impl DecayAssessment {
    fn new(eps: f64, rows: &[&StabilityRow]) -> Self {
        let checkpoints: Vec<usize> = rows.iter().map(|r| r.n).collect();
        let values: Vec<f64> = rows.iter().map(|r| r.outside_mass).collect();
        let std_errs: Vec<f64> = rows.iter().map(|r| r.std_err.unwrap_or(0.0)).collect();
        let cheb_bounds = rows.iter().map(|r| r.cheb_bound).collect();
        let non_increasing = values.windows(2).all(|w| w[1] <= w[0]);
        let strictly_decreasing = values.windows(2).all(|w| w[1] < w[0]);
        let separation = match (values.first(), values.last()) {
            (Some(&first), Some(&last)) if values.len() >= 2 => {
                let k = std_errs.len() - 1;
                let combined = (std_errs[0].powi(2) + std_errs[k].powi(2)).sqrt();
                let gap = first - last;
                if gap == 0.0 {
                    0.0
                } else if combined == 0.0 {
                    gap.signum() * f64::INFINITY
                } else {
                    gap / combined
                }
            }
            _ => 0.0,
        };
        Self {
            eps,
            checkpoints,
            values,
            std_errs,
            cheb_bounds,
            non_increasing,
            strictly_decreasing,
            separation,
        }
    }

    /// Last checkpoint strictly below the first, separated by at least
    /// [`DECAY_SEPARATION`] combined standard errors.
    pub fn decays(&self) -> bool {
        match (self.values.first(), self.values.last()) {
            (Some(first), Some(last)) => last < first && self.separation >= DECAY_SEPARATION,
            _ => false,
        }
    }

    /// Every estimate already zero: the sequence is concentrated at its centers.
    pub fn all_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn within_chebyshev(&self) -> bool {
        self.values
            .iter()
            .zip(&self.cheb_bounds)
            .all(|(v, b)| *v <= CHEBYSHEV_SAFETY * b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McStability {
    pub rows: Vec<StabilityRow>,
    pub decay: Vec<DecayAssessment>,
}

/// Monte Carlo outside masses from one simulation to the largest checkpoint.
pub fn stability_mc(
    spec: &SequenceSpec,
    checkpoints: &[usize],
    eps_list: &[f64],
    n_paths: usize,
    rng: &RngPolicy,
) -> Result<McStability> {
    check_eps(eps_list)?;
    if n_paths < MIN_MC_PATHS {
        return Err(Error::Config(format!(
            "Monte Carlo stability needs at least {MIN_MC_PATHS} paths, got {n_paths}"
        )));
    }
    let mut checkpoints = checkpoints.to_vec();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let Some(&max_n) = checkpoints.last() else {
        return Ok(McStability {
            rows: Vec::new(),
            decay: Vec::new(),
        });
    };
    let batch = chain::simulate_recording(spec, max_n, n_paths, rng, &Recording::Steps(checkpoints.clone()))?;
    let b = spec.normalizers(max_n)?;
    let conditions = condition_partial_sums(spec, max_n)?;
    let mus = spec.measures(max_n)?;

    let mut rows = Vec::with_capacity(checkpoints.len() * eps_list.len());
    let mut mean_sum = 0.0;
    let mut var_sum = 0.0;
    let mut k = 0;
    for &n in &checkpoints {
        while k < n {
            mean_sum += mus[k].mean();
            var_sum += mus[k].variance();
            k += 1;
        }
        let b_n = b[n - 1];
        let a_n = mean_sum / b_n;
        let x = batch.column(Series::X, n).expect("checkpoint recorded");
        let deviations: Vec<f64> = x.iter().map(|x| (x / b_n - a_n).abs()).collect();
        for &eps in eps_list {
            let outside = deviations.iter().filter(|&&d| d >= eps).count();
            let p = outside as f64 / n_paths as f64;
            rows.push(StabilityRow {
                n,
                b_n,
                a_n,
                eps,
                outside_mass: p,
                method: Method::Mc,
                std_err: Some((p * (1.0 - p) / n_paths as f64).sqrt()),
                cheb_bound: if eps == 0.0 { f64::INFINITY } else { var_sum / (b_n * b_n * eps * eps) },
                cond_partial_sum: conditions.partial_sums[n - 1],
                classical_outside_mass: None,
            });
        }
    }
    let decay = eps_list
        .iter()
        .map(|&eps| {
            let per_eps: Vec<&StabilityRow> = rows.iter().filter(|r| r.eps == eps).collect();
            DecayAssessment::new(eps, &per_eps)
        })
        .collect();
    Ok(McStability { rows, decay })
}

/// Full experiment description for [`run_harness`].
#[derive(Debug, Clone, PartialEq)]
pub struct HarnessConfig {
    pub spec: SequenceSpec,
    pub eps: Vec<f64>,
    pub mc_checkpoints: Vec<usize>,
    pub exact_checkpoints: Vec<usize>,
    pub n_paths: usize,
    pub seed: u64,
    pub opts: ConvolutionOptions,
    pub classical_baseline: bool,
}

impl HarnessConfig {
    pub fn new(spec: SequenceSpec) -> Self {
        Self {
            spec,
            eps: DEFAULT_EPS.to_vec(),
            mc_checkpoints: DEFAULT_MC_CHECKPOINTS.to_vec(),
            exact_checkpoints: DEFAULT_EXACT_CHECKPOINTS.to_vec(),
            n_paths: 100_000,
            seed: 0,
            opts: ConvolutionOptions::default(),
            classical_baseline: true,
        }
    }
}

/// A named pass/fail check over a report.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    pub condition: ConditionSums,
    pub decay: Vec<DecayAssessment>,
    pub gates: Vec<Gate>,
    /// Exact or classical computations skipped by the atom guard.
    pub notes: Vec<String>,
}

impl StabilityReport {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    pub fn to_csv(&self) -> String {
        report_csv(&self.rows)
    }
}

/// Exact rows at the exact checkpoints (where the atom guard allows), Monte
/// Carlo rows at the MC checkpoints, optional classical baselines, and gates:
/// Chebyshev domination for every row, exact/MC agreement where both exist,
/// and decay per `ε > 0` when the normalizer condition holds.
pub fn run_harness(config: &HarnessConfig) -> Result<StabilityReport> {
    let spec = &config.spec;
    check_eps(&config.eps)?;
    config.opts.validate()?;
    let mut all_n: Vec<usize> = config
        .exact_checkpoints
        .iter()
        .chain(&config.mc_checkpoints)
        .copied()
        .collect();
    all_n.sort_unstable();
    all_n.dedup();
    if let Some(&bad) = all_n.iter().find(|&&n| n == 0 || n > spec.horizon) {
        return Err(Error::Config(format!(
            "checkpoint {bad} outside 1..={} of the horizon",
            spec.horizon
        )));
    }
    let condition = condition_partial_sums(spec, spec.horizon)?;
    let mut notes = Vec::new();

    let classical: Vec<Option<Vec<f64>>> = if config.classical_baseline && !all_n.is_empty() {
        classical_at(spec, &all_n, &config.eps, &config.opts, &mut notes)?
    } else {
        vec![None; all_n.len()]
    };
    let classical_for = |n: usize, i: usize| -> Option<f64> {
        let idx = all_n.binary_search(&n).ok()?;
        classical[idx].as_ref().map(|v| v[i])
    };

    let mut rows = Vec::new();
    let mut exact_ns: Vec<usize> = config.exact_checkpoints.clone();
    exact_ns.sort_unstable();
    exact_ns.dedup();
    for &n in &exact_ns {
        let masses = match stability_exact(spec, n, &config.eps, &config.opts) {
            Ok(m) => m,
            Err(Error::AtomGuard { step, projected, limit }) => {
                notes.push(format!(
                    "exact n={n} skipped: step {step} would need {projected} atoms (limit {limit})"
                ));
                continue;
            }
            Err(e) => return Err(e),
        };
        let b_n = spec.normalizers(n)?[n - 1];
        let a_n = centers(spec, n)?;
        for (i, (&eps, &mass)) in config.eps.iter().zip(&masses).enumerate() {
            rows.push(StabilityRow {
                n,
                b_n,
                a_n,
                eps,
                outside_mass: mass,
                method: Method::Exact,
                std_err: None,
                cheb_bound: chebyshev_bound(spec, n, eps)?,
                cond_partial_sum: condition.partial_sums[n - 1],
                classical_outside_mass: classical_for(n, i),
            });
        }
    }

    let mc = if config.mc_checkpoints.is_empty() {
        McStability {
            rows: Vec::new(),
            decay: Vec::new(),
        }
    } else {
        stability_mc(spec, &config.mc_checkpoints, &config.eps, config.n_paths, &RngPolicy::new(config.seed))?
    };
    for mut row in mc.rows {
        let i = config.eps.iter().position(|&e| e == row.eps).expect("eps from list");
        row.classical_outside_mass = classical_for(row.n, i);
        rows.push(row);
    }

    let gates = evaluate_gates(&rows, &mc.decay, &condition, config.n_paths);
    Ok(StabilityReport {
        rows,
        condition,
        decay: mc.decay,
        gates,
        notes,
    })
}

fn classical_at(
    spec: &SequenceSpec,
    ns: &[usize],
    eps_list: &[f64],
    opts: &ConvolutionOptions,
    notes: &mut Vec<String>,
) -> Result<Vec<Option<Vec<f64>>>> {
    let max_n = *ns.last().expect("nonempty");
    let mus = spec.measures(max_n)?;
    let b = spec.normalizers(max_n)?;
    let mut out = vec![None; ns.len()];
    // Feasible prefix of checkpoints: the guard may trip partway.
    let mut feasible = ns.len();
    let prefixes = loop {
        match classical_prefixes(&mus[..ns[feasible - 1]], &ns[..feasible], opts) {
            Ok(p) => break p,
            Err(Error::AtomGuard { step, .. }) => {
                feasible = ns.iter().take_while(|&&n| n < step).count();
                notes.push(format!(
                    "classical baseline stops before step {step} (atom guard)"
                ));
                if feasible == 0 {
                    return Ok(out);
                }
            }
            Err(e) => return Err(e),
        }
    };
    let mut mean_sum = 0.0;
    let mut k = 0;
    for (idx, rho) in prefixes.into_iter().enumerate() {
        let n = ns[idx];
        while k < n {
            mean_sum += mus[k].mean();
            k += 1;
        }
        let scaled = rho.dilate(1.0 / b[n - 1])?;
        let a_n = mean_sum / b[n - 1];
        out[idx] = Some(eps_list.iter().map(|&e| outside_mass(&scaled, a_n, e)).collect());
    }
    Ok(out)
}

fn evaluate_gates(
    rows: &[StabilityRow],
    decay: &[DecayAssessment],
    condition: &ConditionSums,
    n_paths: usize,
) -> Vec<Gate> {
    let mut gates = Vec::new();

    let exact_violations: Vec<String> = rows
        .iter()
        .filter(|r| r.method == Method::Exact && r.outside_mass > r.cheb_bound + CHEBYSHEV_EXACT_SLACK)
        .map(|r| format!("n={} eps={}", r.n, r.eps))
        .collect();
    gates.push(Gate {
        name: "chebyshev_exact".into(),
        passed: exact_violations.is_empty(),
        detail: if exact_violations.is_empty() {
            "exact outside masses within the Chebyshev bound".into()
        } else {
            format!("violations at {}", exact_violations.join(", "))
        },
    });

    let mc_violations: Vec<String> = rows
        .iter()
        .filter(|r| r.method == Method::Mc && r.outside_mass > CHEBYSHEV_SAFETY * r.cheb_bound)
        .map(|r| format!("n={} eps={}", r.n, r.eps))
        .collect();
    gates.push(Gate {
        name: "chebyshev_mc".into(),
        passed: mc_violations.is_empty(),
        detail: if mc_violations.is_empty() {
            format!("MC outside masses within {CHEBYSHEV_SAFETY} x Chebyshev bound")
        } else {
            format!("violations at {}", mc_violations.join(", "))
        },
    });

    let mut disagreements = Vec::new();
    let mut compared = 0;
    for exact in rows.iter().filter(|r| r.method == Method::Exact) {
        if let Some(mc) = rows
            .iter()
            .find(|r| r.method == Method::Mc && r.n == exact.n && r.eps == exact.eps)
        {
            compared += 1;
            let p = exact.outside_mass;
            let se = (p * (1.0 - p) / n_paths as f64).sqrt();
            if (mc.outside_mass - p).abs() > SE_BAND * se + chain::ROUNDING_FLOOR {
                disagreements.push(format!("n={} eps={}", exact.n, exact.eps));
            }
        }
    }
    if compared > 0 {
        gates.push(Gate {
            name: "exact_vs_mc".into(),
            passed: disagreements.is_empty(),
            detail: if disagreements.is_empty() {
                format!("{compared} exact/MC pairs agree within {SE_BAND} SE")
            } else {
                format!("disagreement at {}", disagreements.join(", "))
            },
        });
    }

    if condition.convergent() {
        for d in decay.iter().filter(|d| d.eps > 0.0 && d.checkpoints.len() >= 2) {
            let passed = d.decays() || d.all_zero();
            gates.push(Gate {
                name: format!("decay_eps_{}", d.eps),
                passed,
                detail: format!(
                    "outside mass {:?} at n = {:?}, separation {:.2} SE",
                    d.values, d.checkpoints, d.separation
                ),
            });
        }
    }
    gates
}

/// CSV body: [`CSV_HEADER`] then one line per row, fields in header order.
pub fn report_csv(rows: &[StabilityRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.n,
            format_float(r.b_n),
            format_float(r.a_n),
            format_float(r.eps),
            format_float(r.outside_mass),
            r.method.as_str(),
            format_opt(r.std_err),
            format_float(r.cheb_bound),
            format_float(r.cond_partial_sum),
            format_opt(r.classical_outside_mass),
        )
        .expect("write to String");
    }
    out
}

/// Writes the report CSV to `path`, preceded by `# `-prefixed preamble lines.
pub fn emit_report(report: &StabilityReport, path: &Path, preamble: &[String]) -> Result<()> {
    report::write_with_preamble(path, preamble, &report.to_csv())
}
