//! Exhaustive enumeration of small trees of the two-child toy model.

use crate::error::{BrwError, Result};
use crate::model::{CalibratedModel, StepLaw, ToyLaw};

/// One fully specified toy tree: `generations[k]` holds the `2^k` positions of
/// generation `k`; the parent of node `i` is `i / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyTree {
    pub generations: Vec<Vec<f64>>,
    pub prob: f64,
}

impl ToyTree {
    pub fn w(&self, n: usize) -> f64 {
        self.generations[n].iter().map(|&v| (-v).exp()).sum()
    }

    /// `V(u_1), ..., V(u_n)` for leaf `idx` of generation `n`.
    pub fn path(&self, n: usize, idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        let mut i = idx;
        for d in (1..=n).rev() {
            out[d - 1] = self.generations[d][i];
            i /= 2;
        }
        out
    }
}

pub(crate) fn toy_law(model: &CalibratedModel) -> Result<ToyLaw> {
    match &model.law {
        StepLaw::Toy(t) => Ok(*t),
        StepLaw::Stretched(_) => Err(BrwError::domain("exact enumeration is only available for the toy model")),
    }
}

/// All `2^(2^(n+1) - 2)` trees of depth `n` with their probabilities.
pub fn enumerate_toy_trees(law: &ToyLaw, n: usize) -> Result<Vec<ToyTree>> {
    if n > 3 {
        return Err(BrwError::domain("enumeration is limited to depth 3"));
    }
    let atoms = law.atoms();
    let children: usize = (1..=n).map(|k| 1usize << k).sum();
    let mut out = Vec::with_capacity(1 << children);
    for code in 0u64..(1u64 << children) {
        let mut prob = 1.0;
        let mut gens = vec![vec![0.0]];
        let mut bit = 0;
        for k in 1..=n {
            let prev = &gens[k - 1];
            let mut cur = Vec::with_capacity(1 << k);
            for i in 0..(1 << k) {
                let (y, p) = atoms[((code >> bit) & 1) as usize];
                bit += 1;
                prob *= p;
                cur.push(prev[i / 2] + y);
            }
            gens.push(cur);
        }
        out.push(ToyTree { generations: gens, prob });
    }
    Ok(out)
}

/// Law of `W_1` as `(value, probability)` pairs, merged over equal values.
pub fn toy_w1_law(law: &ToyLaw) -> Vec<(f64, f64)> {
    let mut vals: Vec<(f64, f64)> = Vec::new();
    for t in enumerate_toy_trees(law, 1).expect("depth 1") {
        let w = t.w(1);
        match vals.iter_mut().find(|(v, _)| (v - w).abs() < 1e-12) {
            Some(e) => e.1 += t.prob,
            None => vals.push((w, t.prob)),
        }
    }
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    vals
}

/// Law of the spine path `(S_1, ..., S_n)` under the tilted step law.
pub fn toy_walk_paths(law: &ToyLaw, n: usize) -> Vec<(Vec<f64>, f64)> {
    let atoms = law.spine_atoms();
    let mut out = Vec::with_capacity(1 << n);
    for code in 0u64..(1u64 << n) {
        let mut s = 0.0;
        let mut p = 1.0;
        let mut path = Vec::with_capacity(n);
        for k in 0..n {
            let (x, q) = atoms[((code >> k) & 1) as usize];
            s += x;
            p *= q;
            path.push(s);
        }
        out.push((path, p));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::discrete_toy_model;

    #[test]
    fn probabilities_sum_to_one() {
        let law = toy_law(&discrete_toy_model()).unwrap();
        for n in 0..=3 {
            let total: f64 = enumerate_toy_trees(&law, n).unwrap().iter().map(|t| t.prob).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn w1_has_three_values() {
        let law = toy_law(&discrete_toy_model()).unwrap();
        let w = toy_w1_law(&law);
        assert_eq!(w.len(), 3);
        let expected = [(4.0 / 7.0, 49.0 / 64.0), (16.0 / 7.0, 14.0 / 64.0), (4.0, 1.0 / 64.0)];
        for ((v, p), (ev, ep)) in w.iter().zip(expected) {
            assert!((v - ev).abs() < 1e-12 && (p - ep).abs() < 1e-15);
        }
        let mean: f64 = w.iter().map(|(v, p)| v * p).sum();
        assert!((mean - 1.0).abs() < 1e-14);
    }
}
