use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

fn plan(m: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    // The planner caches plans internally; the lock only guards lookup.
    let mut p = planner().lock().unwrap_or_else(|e| e.into_inner());
    p.plan_fft(m, direction)
}

/// Unnormalized in-place transform of a row-major `m^d` array.
pub(crate) fn transform_nd(data: &mut [Complex64], d: usize, m: usize, direction: FftDirection) {
    for axis in 0..d {
        transform_axis(data, d, m, axis, direction);
    }
}

/// Unnormalized in-place transform along a single axis.
fn transform_axis(
    data: &mut [Complex64],
    d: usize,
    m: usize,
    axis: usize,
    direction: FftDirection,
) {
    let fft = plan(m, direction);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let stride = m.pow((d - 1 - axis) as u32);
    if stride == 1 {
        fft.process_with_scratch(data, &mut scratch);
        return;
    }
    // Gather a batch of strided lines into contiguous storage so one call
    // processes them all.
    let block = stride * m;
    let batch = stride.min(64);
    let mut lines = vec![Complex64::default(); batch * m];
    for outer in (0..data.len()).step_by(block) {
        let mut inner = 0;
        while inner < stride {
            let count = batch.min(stride - inner);
            for t in 0..m {
                let row = &data[outer + t * stride + inner..outer + t * stride + inner + count];
                for (b, v) in row.iter().enumerate() {
                    lines[b * m + t] = *v;
                }
            }
            fft.process_with_scratch(&mut lines[..count * m], &mut scratch);
            for t in 0..m {
                let row = &mut data[outer + t * stride + inner..outer + t * stride + inner + count];
                for (b, v) in row.iter_mut().enumerate() {
                    *v = lines[b * m + t];
                }
            }
            inner += count;
        }
    }
}
