use crate::error::{Error, Result};
use crate::tensor::{matmul, Matrix, Real, Rng};

/// The query, key and value projections `Wq: Dx×Dk`, `Wk: Dx×Dk`,
/// `Wv: Dx×Dv`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionWeights<T: Real = f64> {
    wq: Matrix<T>,
    wk: Matrix<T>,
    wv: Matrix<T>,
}

impl<T: Real> ProjectionWeights<T> {
    pub fn new(wq: Matrix<T>, wk: Matrix<T>, wv: Matrix<T>) -> Result<Self> {
        if wq.shape() != wk.shape() {
            return Err(Error::shape("projection weights (wq, wk)", wq.shape(), wk.shape()));
        }
        if wv.rows() != wq.rows() {
            return Err(Error::shape("projection weights (wq, wv)", wq.shape(), wv.shape()));
        }
        Ok(ProjectionWeights { wq, wk, wv })
    }

    /// Draws `Wq`, `Wk`, `Wv` in that order, uniform on `[-0.1, 0.1)`.
    pub fn seeded(rng: &mut Rng, dx: usize, dk: usize, dv: usize) -> Self {
        let wq = rng.init_weights(dx, dk);
        let wk = rng.init_weights(dx, dk);
        let wv = rng.init_weights(dx, dv);
        ProjectionWeights { wq, wk, wv }
    }

    pub fn wq(&self) -> &Matrix<T> {
        &self.wq
    }

    pub fn wk(&self) -> &Matrix<T> {
        &self.wk
    }

    pub fn wv(&self) -> &Matrix<T> {
        &self.wv
    }

    pub fn dx(&self) -> usize {
        self.wq.rows()
    }

    pub fn dk(&self) -> usize {
        self.wq.cols()
    }

    pub fn dv(&self) -> usize {
        self.wv.cols()
    }

    pub fn cast<U: Real>(&self) -> ProjectionWeights<U> {
        ProjectionWeights {
            wq: self.wq.cast(),
            wk: self.wk.cast(),
            wv: self.wv.cast(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projections<T: Real = f64> {
    pub q: Matrix<T>,
    pub k: Matrix<T>,
    pub v: Matrix<T>,
}

/// `Q = X Wq`, `K = X Wk`, `V = X Wv`.
pub fn project<T: Real>(x: &Matrix<T>, w: &ProjectionWeights<T>) -> Result<Projections<T>> {
    if x.cols() != w.dx() {
        return Err(Error::shape("project", x.shape(), w.wq.shape()));
    }
    Ok(Projections {
        q: matmul(x, &w.wq)?,
        k: matmul(x, &w.wk)?,
        v: matmul(x, &w.wv)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_input_projects_to_zero() {
        let mut rng = Rng::new(1);
        let w = ProjectionWeights::<f64>::seeded(&mut rng, 3, 2, 4);
        let p = project(&Matrix::zeros(5, 3), &w).unwrap();
        assert_eq!(p.q, Matrix::zeros(5, 2));
        assert_eq!(p.k, Matrix::zeros(5, 2));
        assert_eq!(p.v, Matrix::zeros(5, 4));
    }

    #[test]
    fn identity_weights_copy_input() {
        let x: Matrix = Rng::new(2).standard_normal_matrix(4, 3);
        let id = Matrix::identity(3);
        let w = ProjectionWeights::new(id.clone(), id.clone(), id).unwrap();
        let p = project(&x, &w).unwrap();
        assert_eq!((p.q == x, p.k == x, p.v == x), (true, true, true));
    }

    #[test]
    fn seeded_projection_matches_triple_loop() {
        let mut rng = Rng::new(43);
        let x: Matrix = rng.standard_normal_matrix(4, 3);
        let w = ProjectionWeights::seeded(&mut rng, 3, 2, 2);
        let p = project(&x, &w).unwrap();
        for (got, wm) in [(&p.q, w.wq()), (&p.k, w.wk()), (&p.v, w.wv())] {
            for i in 0..4 {
                for j in 0..wm.cols() {
                    let mut acc = 0.0;
                    for a in 0..3 {
                        acc += x.get(i, a) * wm.get(a, j);
                    }
                    assert_eq!(got.get(i, j), acc);
                }
            }
        }
    }

    #[test]
    fn invariants_enforced() {
        let ok = Matrix::<f64>::zeros(3, 2);
        assert!(ProjectionWeights::new(ok.clone(), Matrix::zeros(3, 3), ok.clone()).is_err());
        assert!(ProjectionWeights::new(ok.clone(), ok.clone(), Matrix::zeros(2, 2)).is_err());
        let w = ProjectionWeights::new(ok.clone(), ok.clone(), Matrix::zeros(3, 5)).unwrap();
        assert_eq!((w.dx(), w.dk(), w.dv()), (3, 2, 5));
        assert!(project(&Matrix::zeros(1, 4), &w).is_err());
    }
}
