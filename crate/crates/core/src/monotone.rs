//! Exact monotone convolution of atomic measures.
//!
//! The kernel measure `δₓ ▷ ν` has F-transform `F_ν − x`. Its atoms are the
//! solutions of `F_ν(z) = x`: one on each branch of `F_ν` between consecutive
//! poles, where `F_ν` increases from `−∞` to `+∞`. The weight of the atom `z`
//! is `1/F′_ν(z)`. General `μ ▷ ν` is the `μ`-mixture of the kernel measures.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::measures::{self, AtomicMeasure, MERGE_TOL, PRUNE_TOL};
use crate::roots;
use crate::transforms::{self, NevanlinnaForm};

/// Allowed deviation of `Σ 1/F′(zᵢ)` from one.
pub const WEIGHT_CLOSURE_TOL: f64 = 1e-10;
/// Bound on `|G_{μ▷ν}(z) − G_μ(F_ν(z))|` for the optional identity check.
pub const IDENTITY_TOL: f64 = 1e-8;

const IDENTITY_SEED: u64 = 0x6d6f_6e6f_746f_6e65;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolutionOptions {
    pub merge_tol: f64,
    pub prune_tol: f64,
    pub max_atoms: usize,
    /// Number of random `z` (with `Im z = 1`) at which each convolution
    /// verifies its Cauchy transform; 0 disables the check.
    pub identity_check_points: usize,
}

impl Default for ConvolutionOptions {
    fn default() -> Self {
        Self {
            merge_tol: MERGE_TOL,
            prune_tol: PRUNE_TOL,
            max_atoms: 2_000_000,
            identity_check_points: 0,
        }
    }
}

impl ConvolutionOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.merge_tol >= 0.0 && self.prune_tol >= 0.0) {
            return Err(Error::Config(format!(
                "tolerances must be nonnegative (merge_tol {}, prune_tol {})",
                self.merge_tol, self.prune_tol
            )));
        }
        if self.max_atoms == 0 {
            return Err(Error::Config("max_atoms must be at least 1".into()));
        }
        Ok(())
    }
}

/// The one-step kernel `x ↦ δₓ ▷ ν`, holding the Nevanlinna form of `ν`.
#[derive(Debug, Clone)]
pub struct Kernel {
    form: NevanlinnaForm,
}

impl Kernel {
    pub fn new(nu: &AtomicMeasure) -> Result<Self> {
        Ok(Self {
            form: transforms::nevanlinna_extract(nu)?,
        })
    }

    pub fn form(&self) -> &NevanlinnaForm {
        &self.form
    }

    /// Number of atoms of every kernel measure (the atom count of `ν`).
    pub fn atom_count(&self) -> usize {
        self.form.poles().len() + 1
    }

    /// Open interval of branch `i`; outer branches are unbounded.
    pub fn branch(&self, i: usize) -> (f64, f64) {
        let poles = self.form.poles();
        let lo = if i == 0 { f64::NEG_INFINITY } else { poles[i - 1] };
        let hi = if i == poles.len() { f64::INFINITY } else { poles[i] };
        (lo, hi)
    }

    /// Solution of `F_ν(z) = x` on branch `i`, with its weight `1/F′_ν(z)`.
    pub fn solve_branch(&self, x: f64, i: usize) -> Result<(f64, f64)> {
        if self.form.poles().is_empty() {
            return Ok((x + self.form.mean_shift(), 1.0));
        }
        let (lo, hi) = self.outer_bracket(x, i).unwrap_or_else(|| self.branch(i));
        let z = roots::increasing_root(
            |z| self.form.shifted_value(z, x),
            |z| self.form.shifted_value_and_slope(z, x),
            lo,
            hi,
        )
        .map_err(|_| Error::NoConvergence { lo, hi })?;
        let (_, slope) = self.form.shifted_value_and_slope(z, x);
        Ok((z, 1.0 / slope))
    }

    /// On the outer branches `F_ν(z) − x` changes sign on
    /// `[x + m, x + m + σ(ℝ)/(x + m − p_last)]` when `x + m` lies beyond the
    /// last pole, and symmetrically before the first.
    fn outer_bracket(&self, x: f64, i: usize) -> Option<(f64, f64)> {
        let poles = self.form.poles();
        let anchor = x + self.form.mean_shift();
        let mass = self.form.total_mass();
        if i == poles.len() && anchor > poles[i - 1] {
            let far = anchor + mass / (anchor - poles[i - 1]);
            (far.is_finite() && far > anchor).then_some((anchor, far))
        } else if i == 0 && anchor < poles[0] {
            let far = anchor - mass / (poles[0] - anchor);
            (far.is_finite() && far < anchor).then_some((far, anchor))
        } else {
            None
        }
    }

    /// All branch solutions in increasing order, with unnormalized weights.
    pub fn branch_solutions(&self, x: f64) -> Result<Vec<(f64, f64)>> {
        (0..self.atom_count()).map(|i| self.solve_branch(x, i)).collect()
    }

    /// Exact law `δₓ ▷ ν`.
    pub fn distribution(&self, x: f64) -> Result<AtomicMeasure> {
        let atoms = self.branch_solutions(x)?;
        check_closure(x, &atoms)?;
        AtomicMeasure::normalized(atoms)
    }

    /// Inverse-CDF draw from `δₓ ▷ ν` for a uniform `u ∈ [0, 1)`, solving
    /// branches left to right only as far as needed.
    pub fn sample(&self, x: f64, u: f64) -> Result<f64> {
        let last = self.atom_count() - 1;
        let mut cumulative = 0.0;
        for i in 0..last {
            let (z, w) = self.solve_branch(x, i)?;
            cumulative += w;
            if u < cumulative {
                return Ok(z);
            }
        }
        Ok(self.solve_branch(x, last)?.0)
    }
}

fn check_closure(x: f64, atoms: &[(f64, f64)]) -> Result<()> {
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    if (total - 1.0).abs() > WEIGHT_CLOSURE_TOL {
        return Err(Error::Numeric(format!(
            "kernel weights at x = {x} sum to {total}"
        )));
    }
    Ok(())
}

/// `δₓ ▷ ν`.
pub fn delta_convolve(x: f64, nu: &AtomicMeasure, opts: &ConvolutionOptions) -> Result<AtomicMeasure> {
    opts.validate()?;
    if nu.len() > opts.max_atoms {
        return Err(Error::AtomGuard {
            step: 1,
            projected: nu.len(),
            limit: opts.max_atoms,
        });
    }
    Kernel::new(nu)?.distribution(x)
}

/// `μ ▷ ν = ∫ μ(dx) δₓ ▷ ν`.
pub fn convolve(mu: &AtomicMeasure, nu: &AtomicMeasure, opts: &ConvolutionOptions) -> Result<AtomicMeasure> {
    convolve_at_step(mu, nu, opts, 1)
}

fn convolve_at_step(
    mu: &AtomicMeasure,
    nu: &AtomicMeasure,
    opts: &ConvolutionOptions,
    step: usize,
) -> Result<AtomicMeasure> {
    opts.validate()?;
    let projected = mu.len().saturating_mul(nu.len());
    if projected > opts.max_atoms {
        return Err(Error::AtomGuard {
            step,
            projected,
            limit: opts.max_atoms,
        });
    }
    let kernel = Kernel::new(nu)?;
    let mut atoms = Vec::with_capacity(projected);
    for (x, w) in mu.atoms() {
        let solutions = kernel.branch_solutions(x)?;
        check_closure(x, &solutions)?;
        atoms.extend(solutions.into_iter().map(|(z, v)| (z, w * v)));
    }
    let out = measures::merge_unsorted(atoms, opts.merge_tol, opts.prune_tol)?;
    if opts.identity_check_points > 0 {
        check_composition_identity(&out, mu, nu, opts.identity_check_points)?;
    }
    Ok(out)
}

/// Largest `|G_{out}(z) − G_μ(F_ν(z))|` over `points` random `z = s + i`,
/// with `s` uniform over the joint support widened by one.
pub fn composition_identity_error(
    out: &AtomicMeasure,
    mu: &AtomicMeasure,
    nu: &AtomicMeasure,
    points: usize,
) -> Result<f64> {
    let lo = out.min_position().min(mu.min_position()).min(nu.min_position()) - 1.0;
    let hi = out.max_position().max(mu.max_position()).max(nu.max_position()) + 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(IDENTITY_SEED);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let z = Complex64::new(rng.random_range(lo..=hi), 1.0);
        let lhs = transforms::cauchy_g(out, z)?;
        let rhs = transforms::cauchy_g(mu, transforms::f_transform(nu, z)?)?;
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

fn check_composition_identity(
    out: &AtomicMeasure,
    mu: &AtomicMeasure,
    nu: &AtomicMeasure,
    points: usize,
) -> Result<()> {
    let err = composition_identity_error(out, mu, nu, points)?;
    if err < IDENTITY_TOL {
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "Cauchy-transform composition identity violated by {err:e}"
        )))
    }
}

/// `μ₁ ▷ ⋯ ▷ μₙ`, folded from the right: `ρ ← μₖ ▷ ρ` for `k = n−1, …, 1`.
///
/// The atom guard reports the 1-based `k` whose step would exceed
/// `max_atoms`.
pub fn convolve_sequence(mus: &[AtomicMeasure], opts: &ConvolutionOptions) -> Result<AtomicMeasure> {
    opts.validate()?;
    let (last, rest) = mus
        .split_last()
        .ok_or_else(|| Error::Domain("empty measure sequence".into()))?;
    if last.len() > opts.max_atoms {
        return Err(Error::AtomGuard {
            step: mus.len(),
            projected: last.len(),
            limit: opts.max_atoms,
        });
    }
    let mut rho = last.clone();
    for (k, mu) in rest.iter().enumerate().rev() {
        rho = convolve_at_step(mu, &rho, opts, k + 1)?;
    }
    Ok(rho)
}
