//! Evaluation of the model on the nonzero pattern of `V`.
//!
//! Every place the observations enter the objective or the updates
//! (`V/V̂`, `v log(v/v̂)`) vanishes wherever `v = 0`, and `Σ v̂` has a closed
//! form in the factors. Storing `V` in compressed rows therefore makes a sweep
//! cost `O(nnz·K + N·K)` instead of `O(N²·K)`.

use ndarray::{s, Array2, ArrayView2, Axis, Zip};
use rayon::prelude::*;

use super::FactorState;
use crate::linalg::Exec;

const MIN_ROWS_PER_TASK: usize = 32;

/// `V` in compressed sparse rows over the union of the nonzero patterns of
/// `V` and `Vᵀ`, so every stored entry has a stored mirror.
#[derive(Debug, Clone)]
pub(crate) struct Observed {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    /// Storage position of `(j, i)` for the entry stored at `(i, j)`.
    mirror: Vec<usize>,
}

/// `V̂` restricted to the stored entries, plus the sum of all its entries.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Recon {
    pub entries: Vec<f64>,
    pub total: f64,
}

impl Observed {
    pub fn from_dense(v: &Array2<f64>) -> Self {
        let n = v.nrows();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..n {
            for j in 0..n {
                let x = v[[i, j]];
                if x != 0.0 || v[[j, i]] != 0.0 {
                    indices.push(j);
                    values.push(x);
                }
            }
            indptr.push(indices.len());
        }
        // Rows are visited in order, so the entries of column j appear in
        // increasing row order; a cursor per row finds each mirror.
        let mut cursor: Vec<usize> = indptr[..n].to_vec();
        let mut mirror = vec![0; indices.len()];
        for i in 0..n {
            for p in indptr[i]..indptr[i + 1] {
                let j = indices[p];
                mirror[p] = cursor[j];
                cursor[j] += 1;
            }
        }
        Self {
            indptr,
            indices,
            values,
            mirror,
        }
    }

    pub fn n(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    #[cfg(test)]
    fn row(&self, i: usize) -> std::ops::Range<usize> {
        self.indptr[i]..self.indptr[i + 1]
    }

    /// `V̂ = [W | W∘M] · [H ; −(H∘Mᵀ)]` at the stored entries.
    pub fn reconstruct(&self, s: &FactorState, exec: Exec) -> Recon {
        let k = s.k();
        let ht = s.h.t();
        let mut left = Array2::zeros((s.n(), 2 * k));
        let mut right = Array2::zeros((s.n(), 2 * k));
        left.slice_mut(s![.., ..k]).assign(&s.w);
        left.slice_mut(s![.., k..]).assign(&(&s.w * &s.m));
        right.slice_mut(s![.., ..k]).assign(&ht);
        right.slice_mut(s![.., k..]).assign(&(&ht * &s.m).mapv(|x| -x));
        Recon {
            entries: self.sample(left.view(), right.view(), exec),
            total: product_total(left.view(), right.view()),
        }
    }

    /// `(A Bᵀ)ᵢⱼ` at every stored entry, for `A`, `B` with `N` rows.
    pub fn sample(&self, a: ArrayView2<f64>, b: ArrayView2<f64>, exec: Exec) -> Vec<f64> {
        let width = a.ncols();
        let a = a.as_standard_layout();
        let b = b.as_standard_layout();
        let (a, b) = (a.as_slice().unwrap(), b.as_slice().unwrap());
        let fill = |rows: std::ops::Range<usize>, out: &mut [f64]| {
            let entries = self.indptr[rows.start]..self.indptr[rows.end];
            kernels::sample(
                &self.indptr[rows.start..=rows.end],
                &self.indices[entries],
                rows.start,
                width,
                a,
                b,
                out,
            );
        };
        let mut out = vec![0.0; self.nnz()];
        match exec {
            Exec::Sequential => fill(0..self.n(), &mut out),
            Exec::Parallel => {
                let chunks = self.row_chunks();
                let mut slices = Vec::with_capacity(chunks.len());
                let mut rest = out.as_mut_slice();
                for r in &chunks {
                    let len = self.indptr[r.end] - self.indptr[r.start];
                    let (head, tail) = rest.split_at_mut(len);
                    slices.push((r.clone(), head));
                    rest = tail;
                }
                slices.into_par_iter().for_each(|(r, o)| fill(r, o));
            }
        }
        out
    }

    /// `X B` where `X` carries `x` at the stored entries of `V`.
    pub fn times(&self, x: &[f64], b: ArrayView2<f64>, exec: Exec) -> Array2<f64> {
        self.product(x, b, exec, false)
    }

    /// `Xᵀ B` where `X` carries `x` at the stored entries of `V`.
    pub fn transpose_times(&self, x: &[f64], b: ArrayView2<f64>, exec: Exec) -> Array2<f64> {
        self.product(x, b, exec, true)
    }

    fn product(&self, x: &[f64], b: ArrayView2<f64>, exec: Exec, transpose: bool) -> Array2<f64> {
        let width = b.ncols();
        let b = b.as_standard_layout();
        let b = b.as_slice().unwrap();
        let mut out = Array2::<f64>::zeros((self.n(), width));
        let fill = |rows: std::ops::Range<usize>, block: &mut [f64]| {
            let entries = self.indptr[rows.start]..self.indptr[rows.end];
            let weights: Vec<f64> = if transpose {
                entries.clone().map(|p| x[self.mirror[p]]).collect()
            } else {
                x[entries.clone()].to_vec()
            };
            kernels::product(
                &self.indptr[rows.start..=rows.end],
                &self.indices[entries],
                &weights,
                width,
                b,
                block,
            );
        };
        let flat = out.as_slice_mut().unwrap();
        match exec {
            Exec::Sequential => fill(0..self.n(), flat),
            Exec::Parallel => {
                let chunks = self.row_chunks();
                let mut jobs = Vec::with_capacity(chunks.len());
                let mut rest = flat;
                for r in &chunks {
                    let (head, tail) = rest.split_at_mut(r.len() * width);
                    jobs.push((r.clone(), head));
                    rest = tail;
                }
                jobs.into_par_iter().for_each(|(r, block)| fill(r, block));
            }
        }
        out
    }

    /// Contiguous row ranges of roughly equal stored-entry counts.
    fn row_chunks(&self) -> Vec<std::ops::Range<usize>> {
        let n = self.n();
        let tasks = rayon::current_num_threads().max(1) * 4;
        let target = self.nnz().div_ceil(tasks).max(1);
        let mut chunks = Vec::new();
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n
                && (end - start < MIN_ROWS_PER_TASK
                    || self.indptr[end] - self.indptr[start] < target)
            {
                end += 1;
            }
            chunks.push(start..end);
            start = end;
        }
        chunks
    }

    /// `V / max(V̂, eps)` at the stored entries.
    pub fn ratio(&self, vhat: &Recon, eps: f64) -> Vec<f64> {
        self.values
            .iter()
            .zip(&vhat.entries)
            .map(|(&x, &y)| if x == 0.0 { 0.0 } else { x / y.max(eps) })
            .collect()
    }

    /// Generalized KL divergence `Σ v log(v/v̂) + v̂` with `v̂` floored at
    /// `eps` inside the log.
    pub fn data_term(&self, vhat: &Recon, eps: f64) -> f64 {
        let log_part: f64 = self
            .values
            .iter()
            .zip(&vhat.entries)
            .filter(|(&x, _)| x != 0.0)
            .map(|(&x, &y)| x * (x / y.max(eps)).ln())
            .sum();
        log_part + vhat.total
    }
}

/// `Σᵢⱼ (A Bᵀ)ᵢⱼ = Σₖ (Σᵢ aᵢₖ)(Σⱼ bⱼₖ)`.
pub(crate) fn product_total(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let sa = a.sum_axis(Axis(0));
    let sb = b.sum_axis(Axis(0));
    Zip::from(&sa).and(&sb).fold(0.0, |acc, &x, &y| acc + x * y)
}

/// Inner loops of the sparse products, compiled twice: once for the
/// baseline target and once with AVX2/FMA, chosen at runtime.
mod kernels {
    /// `out[p] = ⟨a[first + r], b[indices[p]]⟩` for the entries of each row `r`
    /// of the chunk described by `indptr`.
    #[inline(always)]
    fn sample_impl(
        indptr: &[usize],
        indices: &[usize],
        first: usize,
        width: usize,
        a: &[f64],
        b: &[f64],
        out: &mut [f64],
    ) {
        let base = indptr[0];
        for r in 0..indptr.len() - 1 {
            let i = first + r;
            let ai = &a[i * width..(i + 1) * width];
            for p in indptr[r] - base..indptr[r + 1] - base {
                let j = indices[p];
                out[p] = super::dot(ai, &b[j * width..(j + 1) * width]);
            }
        }
    }

    /// `out[r] += weights[p] · b[indices[p]]` over the entries of each row `r`.
    #[inline(always)]
    fn product_impl(
        indptr: &[usize],
        indices: &[usize],
        weights: &[f64],
        width: usize,
        b: &[f64],
        out: &mut [f64],
    ) {
        let base = indptr[0];
        for r in 0..indptr.len() - 1 {
            let acc = &mut out[r * width..(r + 1) * width];
            for p in indptr[r] - base..indptr[r + 1] - base {
                let w = weights[p];
                if w == 0.0 {
                    continue;
                }
                let j = indices[p];
                for (o, &y) in acc.iter_mut().zip(&b[j * width..(j + 1) * width]) {
                    *o += w * y;
                }
            }
        }
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    fn sample_avx2(
        indptr: &[usize],
        indices: &[usize],
        first: usize,
        width: usize,
        a: &[f64],
        b: &[f64],
        out: &mut [f64],
    ) {
        sample_impl(indptr, indices, first, width, a, b, out)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    fn product_avx2(
        indptr: &[usize],
        indices: &[usize],
        weights: &[f64],
        width: usize,
        b: &[f64],
        out: &mut [f64],
    ) {
        product_impl(indptr, indices, weights, width, b, out)
    }

    fn has_avx2() -> bool {
        #[cfg(target_arch = "x86_64")]
        {
            std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma")
        }
        #[cfg(not(target_arch = "x86_64"))]
        {
            false
        }
    }

    pub(super) fn sample(
        indptr: &[usize],
        indices: &[usize],
        first: usize,
        width: usize,
        a: &[f64],
        b: &[f64],
        out: &mut [f64],
    ) {
        #[cfg(target_arch = "x86_64")]
        if has_avx2() {
            // SAFETY: the required CPU features were detected at runtime.
            return unsafe { sample_avx2(indptr, indices, first, width, a, b, out) };
        }
        sample_impl(indptr, indices, first, width, a, b, out)
    }

    pub(super) fn product(
        indptr: &[usize],
        indices: &[usize],
        weights: &[f64],
        width: usize,
        b: &[f64],
        out: &mut [f64],
    ) {
        #[cfg(target_arch = "x86_64")]
        if has_avx2() {
            // SAFETY: the required CPU features were detected at runtime.
            return unsafe { product_avx2(indptr, indices, weights, width, b, out) };
        }
        product_impl(indptr, indices, weights, width, b, out)
    }
}

#[inline(always)]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Eight independent accumulators let the loop vectorize.
    let mut acc = [0.0; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nmf::objective::{data_term, reconstruct_with};
    use crate::nmf::initial_state;
    use ndarray::array;

    fn sample_v() -> Array2<f64> {
        array![
            [0.0, 2.0, 0.0, 1.0, 0.0],
            [2.0, 0.0, 1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 3.0, 0.5],
            [1.0, 0.0, 3.0, 0.0, 0.0],
            [0.0, 0.0, 0.5, 0.0, 0.0]
        ]
    }

    #[test]
    fn mirror_points_at_transposed_entry() {
        let v = array![[0.0, 1.0, 0.0], [0.0, 0.0, 2.0], [3.0, 0.0, 0.0]];
        let o = Observed::from_dense(&v);
        // the union pattern is symmetric, with explicit zeros
        assert_eq!(o.nnz(), 6);
        for i in 0..3 {
            for p in o.row(i) {
                let j = o.indices[p];
                let q = o.mirror[p];
                assert_eq!(o.indices[q], i);
                assert!(o.row(j).contains(&q));
                assert_eq!(o.values[p], v[[i, j]]);
            }
        }
    }

    #[test]
    fn matches_dense_reconstruction_and_data_term() {
        let v = sample_v();
        let s = initial_state(5, 3, 4);
        let o = Observed::from_dense(&v);
        let dense = reconstruct_with(&s, Exec::Sequential);
        let r = o.reconstruct(&s, Exec::Sequential);
        for i in 0..5 {
            for p in o.row(i) {
                assert!((r.entries[p] - dense[[i, o.indices[p]]]).abs() < 1e-14);
            }
        }
        assert!((r.total - dense.sum()).abs() < 1e-12);
        let d = data_term(&v, &dense, 1e-12);
        assert!((o.data_term(&r, 1e-12) - d).abs() < 1e-12 * d.abs());
    }

    #[test]
    fn products_match_dense() {
        let v = sample_v();
        let o = Observed::from_dense(&v);
        let x: Vec<f64> = (0..o.nnz()).map(|p| 0.25 + p as f64).collect();
        let mut dense = Array2::<f64>::zeros((5, 5));
        for i in 0..5 {
            for p in o.row(i) {
                dense[[i, o.indices[p]]] = x[p];
            }
        }
        let b = Array2::from_shape_fn((5, 3), |(i, j)| (i * 3 + j) as f64 * 0.5);
        assert_eq!(o.times(&x, b.view(), Exec::Sequential), dense.dot(&b));
        assert_eq!(o.transpose_times(&x, b.view(), Exec::Sequential), dense.t().dot(&b));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        pool.install(|| {
            assert_eq!(o.times(&x, b.view(), Exec::Parallel), dense.dot(&b));
            assert_eq!(o.transpose_times(&x, b.view(), Exec::Parallel), dense.t().dot(&b));
            let seq = o.sample(b.view(), b.view(), Exec::Sequential);
            assert_eq!(o.sample(b.view(), b.view(), Exec::Parallel), seq);
        });
    }

    #[test]
    fn dot_handles_remainders() {
        for len in 0..11 {
            let a: Vec<f64> = (0..len).map(|x| x as f64).collect();
            let expected: f64 = a.iter().map(|x| x * x).sum();
            assert_eq!(dot(&a, &a), expected);
        }
    }
}
