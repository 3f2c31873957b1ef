use nalgebra::DMatrix;

use super::{Barrier, FEASIBILITY_MARGIN};

/// `f(s) = -Σ log s_i`
pub(crate) struct NonnegBarrier {
    s: Vec<f64>,
}

impl NonnegBarrier {
    pub fn new(dim: usize) -> Self {
        NonnegBarrier { s: vec![0.0; dim] }
    }
}

fn strictly_positive(s: &[f64]) -> bool {
    let scale = s.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1.0);
    s.iter().all(|&x| x > FEASIBILITY_MARGIN * scale)
}

impl Barrier for NonnegBarrier {
    fn load(&mut self, s: &[f64]) -> bool {
        if !strictly_positive(s) {
            return false;
        }
        self.s.copy_from_slice(s);
        true
    }

    fn gradient(&mut self, g: &mut [f64]) {
        for (gi, si) in g.iter_mut().zip(&self.s) {
            *gi = -1.0 / si;
        }
    }

    fn hess_prod(&mut self, delta: &[f64], out: &mut [f64]) {
        for ((o, d), si) in out.iter_mut().zip(delta).zip(&self.s) {
            *o = d / (si * si);
        }
    }

    fn hessian(&mut self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.s.len(),
            self.s.iter().map(|x| 1.0 / (x * x)),
        ))
    }

    fn too(&mut self, delta: &[f64], out: &mut [f64]) {
        for ((o, d), si) in out.iter_mut().zip(delta).zip(&self.s) {
            *o = d * d / (si * si * si);
        }
    }

    fn inv_hess_prod(&mut self, r: &[f64], out: &mut [f64]) -> bool {
        for ((o, ri), si) in out.iter_mut().zip(r).zip(&self.s) {
            *o = si * si * ri;
        }
        true
    }

    fn dual_feasible(&self, z: &[f64]) -> Option<bool> {
        Some(strictly_positive(z))
    }
}
