//! Target densities sampled on a uniform grid, with trapezoid-rule CDF.

use crate::error::{Error, Result};
use crate::quadrature::cumulative_trapezoid;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TargetDensity {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl TargetDensity {
    /// Builds a density from nodal values, normalising to unit trapezoid mass.
    pub fn new(lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || hi <= lo {
            return Err(Error::Config("target density needs an interval and at least two nodes".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("target density values must be finite and nonnegative".into()));
        }
        let h = (hi - lo) / (values.len() - 1) as f64;
        let raw = cumulative_trapezoid(&values, h);
        let total = *raw.last().unwrap();
        if total <= 0.0 {
            return Err(Error::Config("target density has zero mass".into()));
        }
        let values: Vec<f64> = values.iter().map(|v| v / total).collect();
        let mut cdf = cumulative_trapezoid(&values, h);
        for c in cdf.iter_mut() {
            *c = c.min(1.0);
        }
        *cdf.last_mut().unwrap() = 1.0;
        Ok(TargetDensity { lo, hi, values, cdf })
    }

    pub fn from_fn(lo: f64, hi: f64, nodes: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = (hi - lo) / (nodes - 1) as f64;
        Self::new(lo, hi, (0..nodes).map(|i| f(lo + h * i as f64)).collect())
    }

    pub fn uniform(lo: f64, hi: f64, nodes: usize) -> Self {
        Self::from_fn(lo, hi, nodes, |_| 1.0).expect("uniform density is valid")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.values.len() - 1) as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.len() {
            self.hi
        } else {
            self.lo + self.step() * i as f64
        }
    }

    fn locate(&self, y: f64) -> (usize, f64) {
        let f = ((y - self.lo) / self.step()).clamp(0.0, (self.len() - 1) as f64);
        let i = (f.floor() as usize).min(self.len() - 2);
        (i, f - i as f64)
    }

    pub fn density_at(&self, y: f64) -> f64 {
        if y < self.lo || y > self.hi {
            return 0.0;
        }
        let (i, t) = self.locate(y);
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Running integral of the piecewise-linear interpolant.
    pub fn cdf_at(&self, y: f64) -> f64 {
        if y <= self.lo {
            return 0.0;
        }
        if y >= self.hi {
            return 1.0;
        }
        let (i, t) = self.locate(y);
        let h = self.step();
        let (a, b) = (self.values[i], self.values[i + 1]);
        (self.cdf[i] + h * (a * t + 0.5 * (b - a) * t * t)).min(1.0)
    }

    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        (self.cdf_at(b) - self.cdf_at(a)).max(0.0)
    }

    /// Mean of the density under the piecewise-linear interpolant.
    pub fn mean(&self) -> f64 {
        let h = self.step();
        let mut s = 0.0;
        for i in 0..self.len() - 1 {
            let (y0, a, b) = (self.node(i), self.values[i], self.values[i + 1]);
            s += h * (a * (y0 + h / 2.0) + (b - a) * (y0 / 2.0 + h / 3.0));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_cdf_is_linear() {
        let t = TargetDensity::uniform(0.0, 2.0, 11);
        assert!((t.cdf_at(0.5) - 0.25).abs() < 1e-15);
        assert!((t.cdf.last().unwrap() - 1.0).abs() < 1e-15);
        assert!((t.mean() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cdf_matches_running_trapezoid_at_nodes() {
        let t = TargetDensity::from_fn(0.0, 1.0, 101, |y| 1.0 + y * y).unwrap();
        for i in 0..t.len() {
            assert!((t.cdf_at(t.node(i)) - t.cdf[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_negative_values() {
        assert!(TargetDensity::new(0.0, 1.0, vec![1.0, -1.0, 1.0]).is_err());
    }
}
