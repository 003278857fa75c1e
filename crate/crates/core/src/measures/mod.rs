//! Finitely-atomic probability measures on the real line.
//!
//! [`AtomicMeasure`] is the single measure representation used throughout the
//! crate. Every constructor validates the invariants: at least one atom,
//! strictly positive weights, strictly increasing positions and a total
//! weight within [`SUM_TOL`] of one.

mod spec;

pub use spec::MeasureSpec;

use rand::Rng;

use crate::error::{Error, Result};

/// Default absolute position tolerance for merging nearby atoms.
pub const MERGE_TOL: f64 = 1e-9;
/// Default weight threshold below which atoms are dropped.
pub const PRUNE_TOL: f64 = 1e-15;
/// Maximum allowed deviation of the total weight from one.
pub const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    positions: Vec<f64>,
    weights: Vec<f64>,
}

impl AtomicMeasure {
    /// Builds a measure from `(position, weight)` pairs in any order.
    ///
    /// Exactly coincident positions are merged. The weights must already sum
    /// to one within [`SUM_TOL`].
    pub fn new<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        Self::build(atoms.into_iter().collect(), false)
    }

    /// Like [`AtomicMeasure::new`] but rescales the weights to sum to one.
    pub fn normalized<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        Self::build(atoms.into_iter().collect(), true)
    }

    /// The point mass at `t`.
    pub fn point(t: f64) -> Result<Self> {
        Self::new([(t, 1.0)])
    }

    fn build(mut atoms: Vec<(f64, f64)>, normalize: bool) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        for &(t, w) in &atoms {
            if !t.is_finite() {
                return Err(Error::InvalidMeasure(format!("non-finite position {t}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidMeasure(format!(
                    "weight {w} at position {t} is not strictly positive"
                )));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut positions = Vec::with_capacity(atoms.len());
        let mut weights: Vec<f64> = Vec::with_capacity(atoms.len());
        for (t, w) in atoms {
            match positions.last() {
                Some(&last) if last == t => *weights.last_mut().unwrap() += w,
                _ => {
                    positions.push(t);
                    weights.push(w);
                }
            }
        }

        if normalize {
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
        }
        let measure = Self { positions, weights };
        measure.check_invariants()?;
        Ok(measure)
    }

    fn check_invariants(&self) -> Result<()> {
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, not 1 within {SUM_TOL:e}"
            )));
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidMeasure("non-positive weight".into()));
        }
        if self.positions.windows(2).any(|p| !(p[0] < p[1])) {
            return Err(Error::InvalidMeasure("positions not strictly increasing".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    /// Always false; a measure has at least one atom.
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.positions.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn min_position(&self) -> f64 {
        self.positions[0]
    }

    pub fn max_position(&self) -> f64 {
        self.positions[self.positions.len() - 1]
    }

    /// Total weight of the atoms at `position`, matched exactly.
    pub fn weight_at(&self, position: f64) -> f64 {
        match self.positions.binary_search_by(|p| p.total_cmp(&position)) {
            Ok(i) => self.weights[i],
            Err(_) => 0.0,
        }
    }

    /// Index of the atom nearest to `t`.
    pub fn nearest_atom(&self, t: f64) -> usize {
        let i = self.positions.partition_point(|&p| p < t);
        if i == 0 {
            0
        } else if i == self.len() {
            i - 1
        } else if t - self.positions[i - 1] <= self.positions[i] - t {
            i - 1
        } else {
            i
        }
    }

    /// Pushforward under `t ↦ b·t`.
    pub fn dilate(&self, b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::Domain(format!("dilation factor must be positive, got {b}")));
        }
        Self::new(self.atoms().map(|(t, w)| (t * b, w)))
    }

    /// Pushforward under `t ↦ t + c`.
    pub fn translate(&self, c: f64) -> Result<Self> {
        Self::new(self.atoms().map(|(t, w)| (t + c, w)))
    }

    pub fn mean(&self) -> f64 {
        self.atoms().map(|(t, w)| w * t).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.atoms().map(|(t, w)| w * t * t).sum()
    }

    /// Central second moment, summed about the mean so that it never goes negative.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms().map(|(t, w)| w * (t - m) * (t - m)).sum()
    }

    /// Merges atoms whose consecutive gap is below `merge_tol` (at the weighted
    /// mean position), drops atoms lighter than `prune_tol`, and renormalizes.
    pub fn merge_atoms(&self, merge_tol: f64, prune_tol: f64) -> Result<Self> {
        merge_sorted(&self.positions, &self.weights, merge_tol, prune_tol)
    }

    /// Classical (independent-sum) convolution with default tolerances.
    pub fn classical_convolve(&self, other: &Self) -> Result<Self> {
        self.classical_convolve_with(other, MERGE_TOL, PRUNE_TOL)
    }

    pub fn classical_convolve_with(
        &self,
        other: &Self,
        merge_tol: f64,
        prune_tol: f64,
    ) -> Result<Self> {
        let mut atoms = Vec::with_capacity(self.len() * other.len());
        for (t, w) in self.atoms() {
            for (s, v) in other.atoms() {
                atoms.push((t + s, w * v));
            }
        }
        merge_unsorted(atoms, merge_tol, prune_tol)
    }

    /// Atom index selected by inverse CDF for a uniform `u ∈ [0, 1)`.
    pub fn quantile_index(&self, u: f64) -> usize {
        let mut cumulative = 0.0;
        for (i, &w) in self.weights.iter().enumerate() {
            cumulative += w;
            if u < cumulative {
                return i;
            }
        }
        self.len() - 1
    }

    /// Draws one atom position, consuming exactly one uniform variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.positions[self.quantile_index(u)]
    }
}

/// Sorts, then merges/prunes/renormalizes. Atoms with non-positive weight are dropped.
pub(crate) fn merge_unsorted(
    mut atoms: Vec<(f64, f64)>,
    merge_tol: f64,
    prune_tol: f64,
) -> Result<AtomicMeasure> {
    atoms.retain(|&(_, w)| w > 0.0);
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (positions, weights): (Vec<f64>, Vec<f64>) = atoms.into_iter().unzip();
    merge_sorted(&positions, &weights, merge_tol, prune_tol)
}

fn merge_sorted(
    positions: &[f64],
    weights: &[f64],
    merge_tol: f64,
    prune_tol: f64,
) -> Result<AtomicMeasure> {
    if !(merge_tol >= 0.0 && prune_tol >= 0.0) {
        return Err(Error::Domain(format!(
            "tolerances must be nonnegative (merge {merge_tol}, prune {prune_tol})"
        )));
    }
    if positions.is_empty() {
        return Err(Error::InvalidMeasure("no atoms".into()));
    }

    // Single-linkage clusters over consecutive gaps.
    let mut clusters: Vec<(f64, f64)> = Vec::with_capacity(positions.len());
    let mut moment = positions[0] * weights[0];
    let mut mass = weights[0];
    for i in 1..positions.len() {
        if positions[i] - positions[i - 1] < merge_tol {
            moment += positions[i] * weights[i];
            mass += weights[i];
        } else {
            clusters.push((moment / mass, mass));
            moment = positions[i] * weights[i];
            mass = weights[i];
        }
    }
    clusters.push((moment / mass, mass));

    let heaviest = clusters
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty");
    clusters.retain(|&(_, w)| w >= prune_tol);
    if clusters.is_empty() {
        clusters.push(heaviest);
    }
    AtomicMeasure::normalized(clusters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bernoulli() -> AtomicMeasure {
        AtomicMeasure::new([(-1.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    fn atoms_close(a: &AtomicMeasure, b: &AtomicMeasure, tol: f64) -> bool {
        a.len() == b.len()
            && a.atoms()
                .zip(b.atoms())
                .all(|((t, w), (s, v))| (t - s).abs() <= tol && (w - v).abs() <= tol)
    }

    #[test]
    fn rejects_bad_atoms() {
        assert!(AtomicMeasure::new(Vec::<(f64, f64)>::new()).is_err());
        assert!(AtomicMeasure::new([(0.0, 0.5), (1.0, 0.4)]).is_err());
        assert!(AtomicMeasure::new([(0.0, 1.5), (1.0, -0.5)]).is_err());
        assert!(AtomicMeasure::new([(f64::NAN, 1.0)]).is_err());
    }

    #[test]
    fn coincident_atoms_merge_and_sort() {
        let m = AtomicMeasure::new([(2.0, 0.25), (-1.0, 0.5), (2.0, 0.25)]).unwrap();
        assert_eq!(m.positions(), &[-1.0, 2.0]);
        assert_eq!(m.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn dilation_examples() {
        let d = bernoulli().dilate(2.0).unwrap();
        assert_eq!(d.positions(), &[-2.0, 2.0]);
        assert_eq!(bernoulli().dilate(1.0).unwrap(), bernoulli());
        let p = AtomicMeasure::point(3.0).unwrap().dilate(1.0 / 3.0).unwrap();
        assert_eq!(p.positions(), &[1.0]);
        assert!(matches!(bernoulli().dilate(0.0), Err(Error::Domain(_))));
        assert!(bernoulli().dilate(-2.0).is_err());
    }

    #[test]
    fn moment_examples() {
        let b = bernoulli();
        assert_eq!(b.mean(), 0.0);
        assert_eq!(b.variance(), 1.0);
        assert_eq!(b.second_moment(), 1.0);

        let p = AtomicMeasure::point(-7.25).unwrap();
        assert_eq!(p.mean(), -7.25);
        assert_eq!(p.variance(), 0.0);

        let m = AtomicMeasure::new([(0.0, 0.25), (2.0, 0.75)]).unwrap();
        assert_eq!(m.mean(), 1.5);
        assert_eq!(m.second_moment(), 3.0);
        assert_eq!(m.variance(), 0.75);
    }

    #[test]
    fn classical_examples() {
        let a = AtomicMeasure::point(1.5).unwrap();
        let b = AtomicMeasure::point(-4.0).unwrap();
        assert_eq!(a.classical_convolve(&b).unwrap().positions(), &[-2.5]);

        let bb = bernoulli().classical_convolve(&bernoulli()).unwrap();
        assert_eq!(bb.positions(), &[-2.0, 0.0, 2.0]);
        assert_eq!(bb.weights(), &[0.25, 0.5, 0.25]);

        let zero = AtomicMeasure::point(0.0).unwrap();
        assert_eq!(bb.classical_convolve(&zero).unwrap(), bb);
    }

    #[test]
    fn merge_examples() {
        let m = AtomicMeasure::new([(1.0, 0.5), (1.0 + 1e-13, 0.5)]).unwrap();
        let merged = m.merge_atoms(1e-9, PRUNE_TOL).unwrap();
        assert_eq!(merged.len(), 1);
        assert!((merged.positions()[0] - 1.0).abs() < 1e-12);
        assert_eq!(merged.weights(), &[1.0]);

        let disjoint = AtomicMeasure::new([(0.0, 0.3), (1e-300, 0.3), (5.0, 0.4)]).unwrap();
        assert_eq!(disjoint.merge_atoms(0.0, 0.0).unwrap(), disjoint);

        let tiny = AtomicMeasure::new([(0.0, 1.0 - 1e-16), (9.0, 1e-16)]).unwrap();
        let pruned = tiny.merge_atoms(MERGE_TOL, 1e-15).unwrap();
        assert_eq!(pruned, AtomicMeasure::point(0.0).unwrap());
    }

    #[test]
    fn sampling_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = AtomicMeasure::point(3.0).unwrap();
        assert!((0..100).all(|_| p.sample(&mut rng) == 3.0));

        let b = bernoulli();
        let n = 1_000_000;
        let ones = (0..n).filter(|_| b.sample(&mut rng) == 1.0).count();
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.002, "freq {freq}");

        let mut r1 = ChaCha8Rng::seed_from_u64(99);
        let mut r2 = ChaCha8Rng::seed_from_u64(99);
        let a: Vec<f64> = (0..64).map(|_| b.sample(&mut r1)).collect();
        let c: Vec<f64> = (0..64).map(|_| b.sample(&mut r2)).collect();
        assert_eq!(a, c);
    }

    #[test]
    fn nearest_atom_picks_closest() {
        let m = AtomicMeasure::new([(0.0, 0.2), (1.0, 0.3), (3.0, 0.5)]).unwrap();
        assert_eq!(m.nearest_atom(-5.0), 0);
        assert_eq!(m.nearest_atom(0.4), 0);
        assert_eq!(m.nearest_atom(0.6), 1);
        assert_eq!(m.nearest_atom(2.5), 2);
        assert_eq!(m.nearest_atom(9.0), 2);
    }

    fn arb_measure(max_atoms: usize) -> impl Strategy<Value = AtomicMeasure> {
        prop::collection::vec((-5.0f64..5.0, 0.05f64..1.0), 1..=max_atoms)
            .prop_map(|atoms| AtomicMeasure::normalized(atoms).unwrap())
    }

    proptest! {
        #[test]
        fn dilation_composes(m in arb_measure(8), a in 0.1f64..10.0, b in 0.1f64..10.0) {
            let lhs = m.dilate(a).unwrap().dilate(b).unwrap();
            let rhs = m.dilate(a * b).unwrap();
            prop_assert!(atoms_close(&lhs, &rhs, 1e-12));
        }

        #[test]
        fn dilation_scales_moments(m in arb_measure(8), b in 0.1f64..10.0) {
            let d = m.dilate(b).unwrap();
            let mean_err = (d.mean() - b * m.mean()).abs();
            prop_assert!(mean_err <= 1e-10 * (1.0 + (b * m.mean()).abs()));
            let var_err = (d.variance() - b * b * m.variance()).abs();
            prop_assert!(var_err <= 1e-10 * (1.0 + b * b * m.variance()));
        }

        #[test]
        fn classical_commutative_associative(
            a in arb_measure(3), b in arb_measure(3), c in arb_measure(3)
        ) {
            let ab = a.classical_convolve(&b).unwrap();
            let ba = b.classical_convolve(&a).unwrap();
            prop_assert!(atoms_close(&ab, &ba, 1e-10));
            let left = ab.classical_convolve(&c).unwrap();
            let right = a.classical_convolve(&b.classical_convolve(&c).unwrap()).unwrap();
            prop_assert!(atoms_close(&left, &right, 1e-10));
        }

        #[test]
        fn classical_moments_add(a in arb_measure(6), b in arb_measure(6)) {
            let ab = a.classical_convolve(&b).unwrap();
            prop_assert!((ab.mean() - a.mean() - b.mean()).abs() < 1e-10);
            prop_assert!((ab.variance() - a.variance() - b.variance()).abs() < 1e-10);
        }
    }
}
