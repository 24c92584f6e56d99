//! Sequential matrix kernels.
//!
//! Three accumulating variants cover forward and both backward products
//! without ever materializing a transpose:
//!
//! * `nn`: C += A·B
//! * `nt`: C += A·Bᵀ   (dA = dC·Bᵀ)
//! * `tn`: C += Aᵀ·B   (dB = Aᵀ·dC)
//!
//! Loop orders are chosen so the innermost loop walks contiguous memory;
//! reductions run in a fixed order, which keeps results bitwise reproducible
//! regardless of how callers parallelize across *independent* kernel calls.

use super::Element;

/// C[m×n] += A[m×k] · B[k×n]
pub fn matmul_nn_acc<F: Element>(a: &[F], b: &[F], m: usize, k: usize, n: usize, out: &mut [F]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &aip) in arow.iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
}

/// C[m×n] += A[m×k] · B[n×k]ᵀ
pub fn matmul_nt_acc<F: Element>(a: &[F], b: &[F], m: usize, k: usize, n: usize, out: &mut [F]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (j, o) in orow.iter_mut().enumerate() {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = F::ZERO;
            for (&av, &bv) in arow.iter().zip(brow) {
                acc += av * bv;
            }
            *o += acc;
        }
    }
}

/// C[m×n] += A[k×m]ᵀ · B[k×n]
pub fn matmul_tn_acc<F: Element>(a: &[F], b: &[F], m: usize, k: usize, n: usize, out: &mut [F]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for (i, &api) in arow.iter().enumerate() {
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += api * bv;
            }
        }
    }
}
