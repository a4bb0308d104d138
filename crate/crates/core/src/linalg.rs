//! Dense products shared by the update rules.

use ndarray::{linalg::general_mat_mul, Array2, ArrayView2, Axis};
use rayon::prelude::*;

/// How matrix products are executed.
///
/// `Sequential` is the deterministic mode. `Parallel` splits the rows of the
/// left operand across the current rayon pool; every output entry is still
/// reduced by a single worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    #[default]
    Sequential,
    Parallel,
}

const MIN_ROWS_PER_TASK: usize = 64;

pub fn matmul(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, exec: Exec) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((a.nrows(), b.ncols()));
    match exec {
        Exec::Sequential => general_mat_mul(1.0, &a, &b, 0.0, &mut out),
        Exec::Parallel => {
            let threads = rayon::current_num_threads().max(1);
            let rows = a.nrows().div_ceil(threads).max(MIN_ROWS_PER_TASK);
            let jobs: Vec<_> = out
                .axis_chunks_iter_mut(Axis(0), rows)
                .zip(a.axis_chunks_iter(Axis(0), rows))
                .collect();
            jobs.into_par_iter().for_each(|(mut o, a_rows)| {
                general_mat_mul(1.0, &a_rows, &b, 0.0, &mut o);
            });
        }
    }
    out
}
