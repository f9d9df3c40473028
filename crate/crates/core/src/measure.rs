use serde::{Deserialize, Serialize};

/// Finite point measure stored as its sorted atom locations (repeated for
/// multiplicity).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointMeasure {
    atoms: Vec<f64>,
}

impl PointMeasure {
    pub fn new(mut atoms: Vec<f64>) -> Self {
        assert!(atoms.iter().all(|a| a.is_finite()), "atoms must be finite");
        atoms.sort_by(f64::total_cmp);
        PointMeasure { atoms }
    }

    pub fn empty() -> Self {
        PointMeasure::default()
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn min(&self) -> Option<f64> {
        self.atoms.first().copied()
    }

    /// Atoms in `[lo, hi]`.
    pub fn restrict(&self, lo: f64, hi: f64) -> PointMeasure {
        let a = self.atoms.partition_point(|&x| x < lo);
        let b = self.atoms.partition_point(|&x| x <= hi);
        PointMeasure { atoms: self.atoms[a..b.max(a)].to_vec() }
    }

    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        let a = self.atoms.partition_point(|&x| x < lo);
        let b = self.atoms.partition_point(|&x| x <= hi);
        b.saturating_sub(a)
    }

    /// `∫ f dμ`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().map(|&x| f(x)).sum()
    }

    pub fn shifted(&self, by: f64) -> PointMeasure {
        PointMeasure { atoms: self.atoms.iter().map(|x| x + by).collect() }
    }

    pub fn extend(&mut self, other: &PointMeasure) {
        self.atoms.extend_from_slice(&other.atoms);
        self.atoms.sort_by(f64::total_cmp);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_and_restricted() {
        let m = PointMeasure::new(vec![3.0, -1.0, 2.0, 2.0]);
        assert_eq!(m.atoms(), &[-1.0, 2.0, 2.0, 3.0]);
        assert_eq!(m.count_in(2.0, 2.0), 2);
        assert_eq!(m.restrict(0.0, 2.5).len(), 2);
        assert_eq!(m.restrict(5.0, 1.0).len(), 0);
        assert_eq!(m.integrate(|x| x), 6.0);
    }
}
