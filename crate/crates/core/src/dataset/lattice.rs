use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named design parameter meshed with `count` uniform points over `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRange {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl ParameterRange {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64, count: usize) -> Self {
        Self {
            name: name.into(),
            lo,
            hi,
            count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo > self.hi {
            return Err(Error::InvalidConfig(format!(
                "range `{}` must satisfy finite lo <= hi (got [{}, {}])",
                self.name, self.lo, self.hi
            )));
        }
        if self.count == 0 {
            return Err(Error::EmptyRange(self.name.clone()));
        }
        Ok(())
    }

    /// Uniform mesh point `k`. Endpoints are exact, and the interior formula is
    /// symmetric in `(lo, hi)` so a reversed range yields the reversed list.
    pub fn point(&self, k: usize) -> f64 {
        let last = self.count.saturating_sub(1);
        if k == 0 || last == 0 {
            return self.lo;
        }
        if k == last {
            return self.hi;
        }
        (self.lo * (last - k) as f64 + self.hi * k as f64) / last as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.point(k)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo.min(self.hi) && x <= self.lo.max(self.hi)
    }

    pub fn reversed(&self) -> Self {
        Self {
            name: self.name.clone(),
            lo: self.hi,
            hi: self.lo,
            count: self.count,
        }
    }
}

/// Row-major Cartesian product of the range meshes (last range varies fastest).
pub fn build_lattice(ranges: &[ParameterRange]) -> Result<Vec<Vec<f64>>> {
    if let Some(r) = ranges.iter().find(|r| r.count == 0) {
        return Err(Error::EmptyRange(r.name.clone()));
    }
    let meshes: Vec<Vec<f64>> = ranges.iter().map(ParameterRange::points).collect();
    let total: usize = meshes.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; meshes.len()];
    for _ in 0..total {
        out.push(idx.iter().zip(&meshes).map(|(&i, m)| m[i]).collect());
        for d in (0..idx.len()).rev() {
            idx[d] += 1;
            if idx[d] < meshes[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(out)
}

/// `n` points drawn i.i.d. uniformly from the box spanned by `ranges`.
pub fn sample_test_inputs(ranges: &[ParameterRange], n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            ranges
                .iter()
                .map(|r| r.lo + rng.random::<f64>() * (r.hi - r.lo))
                .collect()
        })
        .collect()
}
