//! Gauss–Legendre rules on arbitrary intervals.

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct GaussRule {
    pairs: Vec<(f64, f64)>,
}

impl GaussRule {
    /// Rule with `nodes` points, exact for polynomials of degree `2 nodes - 1`.
    pub fn new(nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::invalid("quadrature_nodes", "must be at least 2"));
        }
        let rule = GaussLegendre::new(nodes).map_err(|e| Error::invalid("quadrature_nodes", e.to_string()))?;
        let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `(node, weight)` pairs mapped to `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.pairs.iter().map(|&(x, w)| (mid + half * x, half * w)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let rule = GaussRule::new(4).unwrap();
        let integral: f64 = rule.on_interval(0.0, 2.0).iter().map(|&(x, w)| w * x.powi(7)).sum();
        assert!((integral - 32.0).abs() < 1e-12);
        assert!(GaussRule::new(1).is_err());
    }
}
