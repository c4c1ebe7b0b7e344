//! Seeded attention inputs shared by the CLI, benchmarks and suites.

use crate::attention::{project, ProjectionWeights, Projections};
use crate::error::{Error, Result};
use crate::tensor::{Matrix, Real, Rng};

#[derive(Clone, Debug)]
pub struct Workload<T: Real = f64> {
    pub x: Matrix<T>,
    pub weights: ProjectionWeights<T>,
    pub qkv: Projections<T>,
}

impl<T: Real> Workload<T> {
    /// Draws `X ~ N(0, 1)` of shape `n × dx`, then `Wq`, `Wk`, `Wv` uniform
    /// on `[-0.1, 0.1)`, all from one generator seeded with `seed`, and
    /// projects.
    pub fn generate(seed: u64, n: usize, dx: usize, dk: usize, dv: usize) -> Result<Self> {
        for (name, value) in [("n", n), ("dx", dx), ("dk", dk), ("dv", dv)] {
            if value == 0 {
                return Err(Error::ZeroCount(name));
            }
        }
        let mut rng = Rng::new(seed);
        let x = rng.standard_normal_matrix(n, dx);
        let weights = ProjectionWeights::seeded(&mut rng, dx, dk, dv);
        let qkv = project(&x, &weights)?;
        Ok(Workload { x, weights, qkv })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_shaped() {
        let a = Workload::<f64>::generate(42, 16, 8, 4, 3).unwrap();
        let b = Workload::<f64>::generate(42, 16, 8, 4, 3).unwrap();
        assert_eq!(a.qkv, b.qkv);
        assert_eq!(a.qkv.q.shape(), (16, 4));
        assert_eq!(a.qkv.v.shape(), (16, 3));
        assert!(Workload::<f64>::generate(42, 0, 8, 4, 3).is_err());
    }
}
