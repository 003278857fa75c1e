//! Randomized invariant suites over the kernel, the transforms and the
//! Nevanlinna extraction, shared by the acceptance tests and `monoconv selftest`.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::measures::AtomicMeasure;
use crate::monotone::{self, ConvolutionOptions, Kernel};
use crate::transforms;

pub const WEIGHT_SUM_TOL: f64 = 1e-10;
pub const MEAN_SHIFT_TOL: f64 = 1e-9;
pub const VARIANCE_TOL: f64 = 1e-9;
pub const SECOND_MOMENT_TOL: f64 = 1e-8;
pub const G_IDENTITY_TOL: f64 = 1e-8;
pub const NEVANLINNA_MASS_TOL: f64 = 1e-8;

const MIN_SEPARATION: f64 = 1e-3;

/// Random measure with `atoms` atoms in `[-5, 5]`, pairwise at least `1e-3`
/// apart, weights drawn from `[0.05, 1]` and normalized.
pub fn random_measure<R: Rng + ?Sized>(rng: &mut R, atoms: usize) -> AtomicMeasure {
    loop {
        let mut positions: Vec<f64> = (0..atoms).map(|_| rng.random_range(-5.0..5.0)).collect();
        positions.sort_by(f64::total_cmp);
        if positions.windows(2).any(|w| w[1] - w[0] < MIN_SEPARATION) {
            continue;
        }
        let pairs = positions.into_iter().map(|t| (t, rng.random_range(0.05..1.0)));
        return AtomicMeasure::normalized(pairs).expect("valid random measure");
    }
}

/// Worst-case deviations of the kernel `δₓ ▷ ν` from its moment identities.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KernelErrors {
    pub weight_sum: f64,
    pub mean_shift: f64,
    pub variance: f64,
    pub second_moment: f64,
    /// Cases where atoms of `ν`, poles of `F_ν` and kernel atoms fail to alternate.
    pub interlacing_failures: usize,
    pub cases: usize,
}

impl KernelErrors {
    pub fn passed(&self) -> bool {
        self.weight_sum <= WEIGHT_SUM_TOL
            && self.mean_shift <= MEAN_SHIFT_TOL
            && self.variance <= VARIANCE_TOL
            && self.second_moment <= SECOND_MOMENT_TOL
            && self.interlacing_failures == 0
    }
}

fn strictly_alternate(outer: &[f64], inner: &[f64]) -> bool {
    outer.len() == inner.len() + 1
        && inner
            .iter()
            .enumerate()
            .all(|(i, p)| outer[i] < *p && *p < outer[i + 1])
}

/// `cases` random `(x, ν)` with `ν` having 2–20 atoms and `x ∈ [-6, 6]`.
/// Uses the raw branch weights `1/F_ν′(zᵢ)`, before any normalization.
pub fn kernel_identity_suite(cases: usize, seed: u64) -> Result<KernelErrors> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errs = KernelErrors {
        cases,
        ..KernelErrors::default()
    };
    for _ in 0..cases {
        let atoms = rng.random_range(2..=20);
        let nu = random_measure(&mut rng, atoms);
        let x = rng.random_range(-6.0..6.0);
        let kernel = Kernel::new(&nu)?;
        let solutions = kernel.branch_solutions(x)?;
        let total: f64 = solutions.iter().map(|(_, w)| w).sum();
        let mean: f64 = solutions.iter().map(|(z, w)| z * w).sum();
        let m2: f64 = solutions.iter().map(|(z, w)| z * z * w).sum();
        let var: f64 = solutions.iter().map(|(z, w)| (z - mean).powi(2) * w).sum();
        let (m, m2_nu, var_nu) = (nu.mean(), nu.second_moment(), nu.variance());
        errs.weight_sum = errs.weight_sum.max((total - 1.0).abs());
        errs.mean_shift = errs.mean_shift.max((mean - (m + x)).abs());
        errs.variance = errs.variance.max((var - var_nu).abs());
        errs.second_moment = errs.second_moment.max((m2 - (x * x + 2.0 * m * x + m2_nu)).abs());

        let poles = kernel.form().poles();
        let roots: Vec<f64> = solutions.iter().map(|(z, _)| *z).collect();
        if !(strictly_alternate(nu.positions(), poles) && strictly_alternate(&roots, poles)) {
            errs.interlacing_failures += 1;
        }
    }
    Ok(errs)
}

/// Largest `|G_{μ▷ν}(z) − G_μ(F_ν(z))|` over `cases` random `(μ, ν, z)` with
/// `Im z = 1`, `μ` and `ν` having 1–8 atoms.
pub fn composition_identity_suite(cases: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = ConvolutionOptions::default();
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let (a, b) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let mu = random_measure(&mut rng, a);
        let nu = random_measure(&mut rng, b);
        let out = monotone::convolve(&mu, &nu, &opts)?;
        let z = Complex64::new(rng.random_range(-7.0..7.0), 1.0);
        let lhs = transforms::cauchy_g(&out, z)?;
        let rhs = transforms::cauchy_g(&mu, transforms::f_transform(&nu, z)?)?;
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NevanlinnaErrors {
    /// Largest `|σ(ℝ) − var| / var`.
    pub relative_mass: f64,
    pub interlacing_failures: usize,
    pub cases: usize,
}

impl NevanlinnaErrors {
    pub fn passed(&self) -> bool {
        self.relative_mass <= NEVANLINNA_MASS_TOL && self.interlacing_failures == 0
    }
}

/// `cases` random measures with 2–20 atoms.
pub fn nevanlinna_mass_suite(cases: usize, seed: u64) -> Result<NevanlinnaErrors> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errs = NevanlinnaErrors {
        cases,
        ..NevanlinnaErrors::default()
    };
    for _ in 0..cases {
        let atoms = rng.random_range(2..=20);
        let mu = random_measure(&mut rng, atoms);
        let form = transforms::nevanlinna_extract(&mu)?;
        let var = mu.variance();
        errs.relative_mass = errs.relative_mass.max((form.total_mass() - var).abs() / var);
        if !strictly_alternate(mu.positions(), form.poles()) {
            errs.interlacing_failures += 1;
        }
    }
    Ok(errs)
}

/// Selftest rows, in table order.
pub const CHECKS: [&str; 5] = ["weight-sum", "interlacing", "mean-shift", "nevanlinna-mass", "g-identity"];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

/// Runs every check in [`CHECKS`]. A row named by `fault` has its measured
/// error inflated past its tolerance, to exercise the failure path.
pub fn run(fault: Option<&str>, seed: u64) -> Vec<CheckRow> {
    let inflate = |name: &str, err: f64, tol: f64| if fault == Some(name) { err + 10.0 * tol } else { err };
    let mut rows = Vec::with_capacity(CHECKS.len());
    let mut push = |name: &'static str, started: Instant, outcome: Result<(bool, String)>| {
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        rows.push(CheckRow {
            name,
            passed,
            detail,
            seconds: started.elapsed().as_secs_f64(),
        });
    };

    let started = Instant::now();
    let kernel = kernel_identity_suite(1000, seed);
    push(
        "weight-sum",
        started,
        kernel.clone().map(|k| {
            let e = inflate("weight-sum", k.weight_sum, WEIGHT_SUM_TOL);
            (e <= WEIGHT_SUM_TOL, format!("max |sum w - 1| = {e:.3e} over {} kernels", k.cases))
        }),
    );
    push(
        "interlacing",
        Instant::now(),
        kernel.clone().map(|k| {
            let failures = k.interlacing_failures + usize::from(fault == Some("interlacing"));
            (failures == 0, format!("{failures} of {} cases fail to alternate", k.cases))
        }),
    );
    push(
        "mean-shift",
        Instant::now(),
        kernel.map(|k| {
            let e = inflate("mean-shift", k.mean_shift, MEAN_SHIFT_TOL);
            let ok = e <= MEAN_SHIFT_TOL && k.variance <= VARIANCE_TOL && k.second_moment <= SECOND_MOMENT_TOL;
            (
                ok,
                format!(
                    "mean {e:.3e}, variance {:.3e}, second moment {:.3e}",
                    k.variance, k.second_moment
                ),
            )
        }),
    );

    let started = Instant::now();
    push(
        "nevanlinna-mass",
        started,
        nevanlinna_mass_suite(1000, seed.wrapping_add(1)).map(|n| {
            let e = inflate("nevanlinna-mass", n.relative_mass, NEVANLINNA_MASS_TOL);
            (
                e <= NEVANLINNA_MASS_TOL && n.interlacing_failures == 0,
                format!("max relative |sigma(R) - var| = {e:.3e}"),
            )
        }),
    );

    let started = Instant::now();
    push(
        "g-identity",
        started,
        composition_identity_suite(200, seed.wrapping_add(2)).map(|worst| {
            let e = inflate("g-identity", worst, G_IDENTITY_TOL);
            (e < G_IDENTITY_TOL, format!("max |G_out - G_mu(F_nu)| = {e:.3e}"))
        }),
    );
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_measures_are_separated() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for atoms in 1..=20 {
            let mu = random_measure(&mut rng, atoms);
            assert_eq!(mu.len(), atoms);
            assert!(mu.positions().windows(2).all(|w| w[1] - w[0] >= MIN_SEPARATION));
        }
    }

    #[test]
    fn small_suites_pass() {
        assert!(kernel_identity_suite(50, 1).unwrap().passed());
        assert!(nevanlinna_mass_suite(50, 2).unwrap().passed());
        assert!(composition_identity_suite(20, 3).unwrap() < G_IDENTITY_TOL);
    }

    #[test]
    fn alternation() {
        assert!(strictly_alternate(&[0.0, 1.0, 2.0], &[0.5, 1.5]));
        assert!(!strictly_alternate(&[0.0, 1.0, 2.0], &[0.5, 2.5]));
        assert!(!strictly_alternate(&[0.0, 1.0], &[0.5, 0.7]));
    }

    #[test]
    fn fault_flips_only_its_row() {
        let clean = run(None, 11);
        assert!(clean.iter().all(|r| r.passed), "{clean:?}");
        for name in CHECKS {
            let rows = run(Some(name), 11);
            for row in rows {
                assert_eq!(row.passed, row.name != name, "{name}: {row:?}");
            }
        }
    }
}
