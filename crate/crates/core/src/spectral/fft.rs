//! Cached 2-D complex FFTs on square power-of-two grids.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Arc<Fft2>>> = RefCell::new(HashMap::new());
}

impl Fft2 {
    pub(crate) fn get(n: usize) -> Arc<Fft2> {
        PLANS.with(|plans| {
            plans
                .borrow_mut()
                .entry(n)
                .or_insert_with(|| {
                    let mut planner = FftPlanner::new();
                    Arc::new(Fft2 {
                        n,
                        forward: planner.plan_fft_forward(n),
                        inverse: planner.plan_fft_inverse(n),
                    })
                })
                .clone()
        })
    }

    /// Unnormalized forward transform, `X_k = Σ_x x e^{−2πi k·x/n}`.
    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Unnormalized inverse transform.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n);
        let rows = |data: &mut [Complex64]| {
            let scratch_len = plan.get_inplace_scratch_len();
            data.par_chunks_mut(n).for_each_init(
                || vec![Complex64::new(0.0, 0.0); scratch_len],
                |scratch, row| plan.process_with_scratch(row, scratch),
            );
        };
        rows(data);
        transpose_square(data, n);
        rows(data);
        transpose_square(data, n);
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}
