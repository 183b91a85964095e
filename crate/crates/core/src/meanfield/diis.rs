use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

/// Direct inversion in the iterative subspace over spin-stacked Fock
/// matrices.
pub(crate) struct Diis {
    window: usize,
    samples: VecDeque<([DMatrix<f64>; 2], [DMatrix<f64>; 2])>,
}

impl Diis {
    pub fn new(window: usize) -> Self {
        Diis { window, samples: VecDeque::with_capacity(window + 1) }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    /// Adds a sample and returns the extrapolated Fock pair, or `None` when
    /// the subspace equations are ill-conditioned.
    pub fn extrapolate(&mut self, fock: &[DMatrix<f64>; 2], error: &[DMatrix<f64>; 2]) -> Option<[DMatrix<f64>; 2]> {
        self.samples.push_back((fock.clone(), error.clone()));
        if self.samples.len() > self.window {
            self.samples.pop_front();
        }
        let m = self.samples.len();
        if m < 2 {
            return Some(fock.clone());
        }
        let mut b = DMatrix::zeros(m + 1, m + 1);
        for i in 0..m {
            for j in 0..=i {
                let (_, ei) = &self.samples[i];
                let (_, ej) = &self.samples[j];
                let v = ei[0].dot(&ej[0]) + ei[1].dot(&ej[1]);
                b[(i, j)] = v;
                b[(j, i)] = v;
            }
            b[(i, m)] = -1.0;
            b[(m, i)] = -1.0;
        }
        // scale to the latest error norm for conditioning
        let scale = b[(m - 1, m - 1)].abs().max(1e-300);
        for i in 0..m {
            for j in 0..m {
                b[(i, j)] /= scale;
            }
        }
        let mut rhs = DVector::zeros(m + 1);
        rhs[m] = -1.0;
        let coeffs = b.lu().solve(&rhs)?;
        if coeffs.iter().any(|c| !c.is_finite()) || coeffs.rows(0, m).amax() > 1e4 {
            return None;
        }
        let n = fock[0].nrows();
        let mut out = [DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
        for (k, (f, _)) in self.samples.iter().enumerate() {
            out[0] += coeffs[k] * &f[0];
            out[1] += coeffs[k] * &f[1];
        }
        Some(out)
    }
}
