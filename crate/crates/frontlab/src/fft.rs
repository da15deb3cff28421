//! Thin 2D transform layer over `rustfft`.
//!
//! Forward transforms carry the 1/(n1*n2) normalization so that mode (k1, k2)
//! is the coefficient of exp(i k.x) in the trigonometric interpolant.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

/// Cached plans keyed by (length, is_forward).
type PlanCache = HashMap<(usize, bool), Arc<dyn Fft<f64>>>;

thread_local! {
    static PLANS: RefCell<PlanCache> = RefCell::new(HashMap::new());
}

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    let key = (n, direction == FftDirection::Forward);
    PLANS.with(|cache| {
        cache
            .borrow_mut()
            .entry(key)
            .or_insert_with(|| FftPlanner::new().plan_fft(n, direction))
            .clone()
    })
}

/// Arrays at least this large have their row transforms fanned out to the
/// rayon pool; each row is transformed by one thread, so results are
/// bit-identical to the serial path.
#[cfg(feature = "parallel")]
const PAR_THRESHOLD: usize = 64 * 64;

/// In-place transform along the contiguous (last) axis of a standard-layout array.
fn transform_rows(a: &mut Array2<Complex64>, direction: FftDirection) {
    let n = a.ncols();
    let fft = plan(n, direction);
    let data = a.as_slice_mut().expect("standard-layout array");
    #[cfg(feature = "parallel")]
    if data.len() >= PAR_THRESHOLD {
        use rayon::prelude::*;
        let scratch_len = fft.get_inplace_scratch_len();
        data.par_chunks_mut(n).for_each_init(
            || vec![Complex64::ZERO; scratch_len],
            |scratch, row| fft.process_with_scratch(row, scratch),
        );
        return;
    }
    let mut scratch = vec![Complex64::ZERO; fft.get_inplace_scratch_len()];
    for row in data.chunks_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
}

fn transpose(a: Array2<Complex64>) -> Array2<Complex64> {
    a.reversed_axes().as_standard_layout().into_owned()
}

/// Forward 2D transform of real samples; output index (i1, i2) holds mode
/// (k1(i1), k2(i2)).
pub fn forward(values: &Array2<f64>) -> Array2<Complex64> {
    let norm = 1.0 / values.len() as f64;
    let mut buf = values.mapv(|v| Complex64::new(v * norm, 0.0));
    transform_rows(&mut buf, FftDirection::Forward); // x2 axis
    let mut buf = transpose(buf);
    transform_rows(&mut buf, FftDirection::Forward); // x1 axis
    transpose(buf)
}

/// Inverse 2D transform back to real samples (imaginary parts discarded; they
/// are rounding noise for conjugate-symmetric input).
pub fn inverse(modes: &Array2<Complex64>) -> Array2<f64> {
    let mut buf = modes.clone();
    transform_rows(&mut buf, FftDirection::Inverse);
    let mut buf = transpose(buf);
    transform_rows(&mut buf, FftDirection::Inverse);
    transpose(buf).mapv(|c| c.re)
}

/// Inverse transform along the x1 axis only, leaving x2 spectral: output
/// index (j1, i2) holds the x2-mode coefficients of grid column j1.
pub fn inverse_x1_only(modes: &Array2<Complex64>) -> Array2<Complex64> {
    let mut buf = transpose(modes.clone());
    transform_rows(&mut buf, FftDirection::Inverse); // x1 axis
    transpose(buf)
}
