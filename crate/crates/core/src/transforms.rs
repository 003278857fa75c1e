//! Cauchy transforms `G(z) = Σ wᵢ/(z − tᵢ)`, reciprocal transforms `F = 1/G`,
//! and the Nevanlinna form `F(z) = z − m + Σ cᵢ/(pᵢ − z)` of an atomic measure.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::AtomicMeasure;
use crate::roots;

/// Real-axis evaluations closer than this to an atom or a zero of `G` are rejected.
pub const MIN_POLE_DISTANCE: f64 = 1e-10;
/// Tolerated excursion below the real axis in composed chains.
pub const HALF_PLANE_TOL: f64 = 1e-12;

/// Measures with more gaps than this extract their poles in parallel.
const PARALLEL_GAPS: usize = 256;

fn check_atom_distance(mu: &AtomicMeasure, z: Complex64) -> Result<()> {
    // Only atoms within MIN_POLE_DISTANCE of Re z can be that close to z.
    if z.im.abs() >= MIN_POLE_DISTANCE {
        return Ok(());
    }
    let positions = mu.positions();
    let i = mu.nearest_atom(z.re);
    if (z - positions[i]).norm() < MIN_POLE_DISTANCE {
        return Err(Error::Pole {
            at: z,
            reason: format!("within {MIN_POLE_DISTANCE:e} of the atom at {}", positions[i]),
        });
    }
    Ok(())
}

fn g_and_slope_complex(mu: &AtomicMeasure, z: Complex64) -> (Complex64, Complex64) {
    let mut g = Complex64::new(0.0, 0.0);
    let mut slope = Complex64::new(0.0, 0.0);
    for (t, w) in mu.atoms() {
        let r = (z - t).inv();
        g += w * r;
        slope -= w * r * r;
    }
    (g, slope)
}

/// `G(x)` and `G′(x)` on the real axis.
pub(crate) fn g_and_slope_real(positions: &[f64], weights: &[f64], x: f64) -> (f64, f64) {
    let mut g = 0.0;
    let mut slope = 0.0;
    for (&t, &w) in positions.iter().zip(weights) {
        let r = 1.0 / (x - t);
        g += w * r;
        slope -= w * r * r;
    }
    (g, slope)
}

fn g_real(positions: &[f64], weights: &[f64], x: f64) -> f64 {
    positions.iter().zip(weights).map(|(&t, &w)| w / (x - t)).sum()
}

/// Cauchy transform `G_μ(z)`.
pub fn cauchy_g(mu: &AtomicMeasure, z: Complex64) -> Result<Complex64> {
    check_atom_distance(mu, z)?;
    Ok(g_and_slope_complex(mu, z).0)
}

/// `F_μ(z)` and `F′_μ(z) = −G′/G²`, rejecting zeros of `G`.
pub fn f_and_derivative(mu: &AtomicMeasure, z: Complex64) -> Result<(Complex64, Complex64)> {
    check_atom_distance(mu, z)?;
    let (g, g_slope) = g_and_slope_complex(mu, z);
    if g.norm() == 0.0 {
        return Err(Error::Pole {
            at: z,
            reason: "G vanishes".into(),
        });
    }
    // Newton step length estimates the distance to the nearest zero of G.
    if z.im.abs() < MIN_POLE_DISTANCE && (g / g_slope).norm() < MIN_POLE_DISTANCE {
        return Err(Error::Pole {
            at: z,
            reason: format!("within about {MIN_POLE_DISTANCE:e} of a pole of F"),
        });
    }
    let f = g.inv();
    Ok((f, -g_slope * f * f))
}

pub fn f_transform(mu: &AtomicMeasure, z: Complex64) -> Result<Complex64> {
    f_and_derivative(mu, z).map(|(f, _)| f)
}

pub fn f_derivative(mu: &AtomicMeasure, z: Complex64) -> Result<Complex64> {
    f_and_derivative(mu, z).map(|(_, d)| d)
}

/// Evaluates `F_{μ₁}(F_{μ₂}(⋯F_{μₙ}(z)⋯))`, i.e. the F-transform of `μ₁ ▷ ⋯ ▷ μₙ`.
pub fn compose_f_chain(mus: &[AtomicMeasure], z: Complex64) -> Result<Complex64> {
    if mus.is_empty() {
        return Err(Error::Domain("empty measure chain".into()));
    }
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("need Im z > 0, got {z}")));
    }
    let mut w = z;
    for mu in mus.iter().rev() {
        w = f_transform(mu, w)?;
        if w.im < -HALF_PLANE_TOL || !w.is_finite() {
            return Err(Error::Numeric(format!(
                "composition left the upper half-plane: {w}"
            )));
        }
    }
    Ok(w)
}

/// `F_μ(z) = z − m + Σ cᵢ/(pᵢ − z)` with poles `pᵢ` (the zeros of `G_μ`)
/// and masses `cᵢ > 0` summing to `var(μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NevanlinnaForm {
    mean_shift: f64,
    poles: Vec<f64>,
    masses: Vec<f64>,
    total_mass: f64,
}

impl NevanlinnaForm {
    pub fn mean_shift(&self) -> f64 {
        self.mean_shift
    }

    pub fn poles(&self) -> &[f64] {
        &self.poles
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let tail: Complex64 = self
            .poles
            .iter()
            .zip(&self.masses)
            .map(|(&p, &c)| c / (p - z))
            .sum();
        z - self.mean_shift + tail
    }

    /// `F(x) − shift` and `F′(x)` on the real axis.
    #[inline]
    pub fn shifted_value_and_slope(&self, x: f64, shift: f64) -> (f64, f64) {
        let mut value = x - self.mean_shift - shift;
        let mut slope = 1.0;
        for (&p, &c) in self.poles.iter().zip(&self.masses) {
            let r = 1.0 / (p - x);
            value += c * r;
            slope += c * r * r;
        }
        (value, slope)
    }

    #[inline]
    pub fn shifted_value(&self, x: f64, shift: f64) -> f64 {
        let mut value = x - self.mean_shift - shift;
        for (&p, &c) in self.poles.iter().zip(&self.masses) {
            value += c / (p - x);
        }
        value
    }
}

/// Extracts the Nevanlinna form of `mu`.
///
/// On each gap `(tⱼ, tⱼ₊₁)` between consecutive atoms `G` falls strictly from
/// `+∞` to `−∞`, so it has exactly one zero there; that zero is bracketed by
/// bisection and polished by Newton steps. Each mass is `−1/G′` at its pole.
pub fn nevanlinna_extract(mu: &AtomicMeasure) -> Result<NevanlinnaForm> {
    let positions = mu.positions();
    let weights = mu.weights();
    let gaps = positions.len() - 1;

    let solve_gap = |j: usize| -> Result<(f64, f64)> {
        let (lo, hi) = (positions[j], positions[j + 1]);
        let (a, b) = roots::bisect(|x| -g_real(positions, weights, x), lo, hi)
            .map_err(|_| Error::NoConvergence { lo, hi })?;
        let pole = roots::newton_polish(|x| g_and_slope_real(positions, weights, x), a, b);
        if !(pole > lo && pole < hi) {
            return Err(Error::NoConvergence { lo, hi });
        }
        let (_, slope) = g_and_slope_real(positions, weights, pole);
        let mass = -1.0 / slope;
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::NoConvergence { lo, hi });
        }
        Ok((pole, mass))
    };

    let solved: Vec<(f64, f64)> = if gaps > PARALLEL_GAPS {
        (0..gaps).into_par_iter().map(solve_gap).collect::<Result<_>>()?
    } else {
        (0..gaps).map(solve_gap).collect::<Result<_>>()?
    };
    let (poles, masses): (Vec<f64>, Vec<f64>) = solved.into_iter().unzip();
    let total_mass = masses.iter().sum();
    Ok(NevanlinnaForm {
        mean_shift: mu.mean(),
        poles,
        masses,
        total_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn bernoulli() -> AtomicMeasure {
        AtomicMeasure::new([(-1.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    fn random_measure(rng: &mut ChaCha8Rng, max_atoms: usize) -> AtomicMeasure {
        let d = rng.random_range(1..=max_atoms);
        AtomicMeasure::normalized(
            (0..d).map(|_| (rng.random_range(-5.0..5.0), rng.random_range(0.05..1.0))),
        )
        .unwrap()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn cauchy_examples() {
        let delta0 = AtomicMeasure::point(0.0).unwrap();
        assert!(close(cauchy_g(&delta0, c(0.0, 1.0)).unwrap(), c(0.0, -1.0), 1e-15));
        assert!(close(cauchy_g(&bernoulli(), c(0.0, 2.0)).unwrap(), c(0.0, -0.4), 1e-15));
        assert!(matches!(cauchy_g(&bernoulli(), c(1.0, 0.0)), Err(Error::Pole { .. })));
        assert!(cauchy_g(&bernoulli(), c(1.0 + 1e-11, 0.0)).is_err());
        assert!(cauchy_g(&bernoulli(), c(1.0 + 1e-9, 0.0)).is_ok());
    }

    #[test]
    fn herglotz_sign_of_g() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mu = random_measure(&mut rng, 9);
        for _ in 0..100 {
            let z = c(rng.random_range(-10.0..10.0), rng.random_range(1e-3..10.0));
            assert!(cauchy_g(&mu, z).unwrap().im < 0.0);
        }
    }

    #[test]
    fn f_examples() {
        let b = bernoulli();
        assert!(close(f_transform(&b, c(0.0, 2.0)).unwrap(), c(0.0, 2.5), 1e-14));
        let d = f_derivative(&b, c(3.0, 0.0)).unwrap();
        assert!(close(d, c(1.0 + 1.0 / 9.0, 0.0), 1e-14));

        let dx = AtomicMeasure::point(1.75).unwrap();
        for z in [c(0.3, 1.0), c(-4.0, 0.2), c(10.0, 0.0)] {
            assert!(close(f_transform(&dx, z).unwrap(), z - 1.75, 1e-13));
        }
        // F_B has its pole at 0, the zero of G_B.
        assert!(matches!(f_transform(&b, c(0.0, 0.0)), Err(Error::Pole { .. })));
        assert!(f_transform(&b, c(1e-12, 0.0)).is_err());
    }

    #[test]
    fn real_axis_derivative_at_least_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let mu = random_measure(&mut rng, 6);
            let x = mu.max_position() + rng.random_range(0.5..5.0);
            assert!(f_derivative(&mu, c(x, 0.0)).unwrap().re >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn herglotz_property_of_f() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mu = random_measure(&mut rng, 12);
            for _ in 0..200 {
                let z = c(rng.random_range(-10.0..10.0), rng.random_range(0.1..10.0));
                let f = f_transform(&mu, z).unwrap();
                assert!(f.im >= z.im - 1e-12, "{f} vs {z}");
            }
        }
    }

    #[test]
    fn derivative_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = 1e-6;
        let mut checked = 0;
        while checked < 100 {
            let mu = random_measure(&mut rng, 6);
            let form = nevanlinna_extract(&mu).unwrap();
            let x = rng.random_range(-12.0..12.0);
            let far = mu.positions().iter().chain(form.poles()).all(|&p| (x - p).abs() >= 1.0);
            if !far {
                continue;
            }
            let analytic = f_derivative(&mu, c(x, 0.0)).unwrap().re;
            let fd = (f_transform(&mu, c(x + h, 0.0)).unwrap().re
                - f_transform(&mu, c(x - h, 0.0)).unwrap().re)
                / (2.0 * h);
            assert!(((fd - analytic) / analytic).abs() < 1e-5, "x={x}: {fd} vs {analytic}");
            checked += 1;
        }
    }

    #[test]
    fn nevanlinna_examples() {
        let form = nevanlinna_extract(&bernoulli()).unwrap();
        assert_eq!(form.mean_shift(), 0.0);
        assert_eq!(form.poles().len(), 1);
        assert!(form.poles()[0].abs() < 1e-15);
        assert!((form.masses()[0] - 1.0).abs() < 1e-14);

        let point = nevanlinna_extract(&AtomicMeasure::point(2.5).unwrap()).unwrap();
        assert_eq!(point.mean_shift(), 2.5);
        assert!(point.poles().is_empty());
        assert_eq!(point.total_mass(), 0.0);
    }

    #[test]
    fn nevanlinna_mass_matches_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let mu = AtomicMeasure::normalized(
                (0..5).map(|_| (rng.random_range(-5.0..5.0), rng.random_range(0.05..1.0))),
            )
            .unwrap();
            let form = nevanlinna_extract(&mu).unwrap();
            let var = mu.variance();
            assert!((form.total_mass() - var).abs() <= 1e-8 * var);
        }
    }

    #[test]
    fn reconstruction_matches_f() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let mu = random_measure(&mut rng, 10);
            let form = nevanlinna_extract(&mu).unwrap();
            for _ in 0..50 {
                let z = c(rng.random_range(-8.0..8.0), 1.0);
                let f = f_transform(&mu, z).unwrap();
                assert!((form.eval(z) - f).norm() <= 1e-9 * f.norm());
            }
        }
    }

    #[test]
    fn interlacing_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let mu = random_measure(&mut rng, 20);
            let form = nevanlinna_extract(&mu).unwrap();
            assert_eq!(form.poles().len(), mu.len() - 1);
            for (j, &p) in form.poles().iter().enumerate() {
                assert!(mu.positions()[j] < p && p < mu.positions()[j + 1]);
            }
        }
    }

    #[test]
    fn chain_examples() {
        let da = AtomicMeasure::point(1.5).unwrap();
        let db = AtomicMeasure::point(-0.25).unwrap();
        let z = c(0.7, 1.3);
        assert!(close(compose_f_chain(&[da, db], z).unwrap(), z - 1.25, 1e-14));

        let b = bernoulli();
        let z = c(0.0, 2.0);
        assert!(close(compose_f_chain(std::slice::from_ref(&b), z).unwrap(), c(0.0, 2.5), 1e-14));
        assert!(close(compose_f_chain(&[b.clone(), b.clone()], z).unwrap(), c(0.0, 2.9), 1e-14));

        assert!(compose_f_chain(&[], z).is_err());
        assert!(compose_f_chain(&[b], c(0.0, -1.0)).is_err());
    }
}
