//! Index kernels for operators that act on a subset of tensor factors.
//!
//! Every kernel works on flat row/column indices of a `d^n` dimensional
//! space; position 0 is the most significant tensor factor.

use num_complex::Complex64 as C64;

use crate::CMatrix;

/// Flat offsets of every local multi-index placed at `positions`.
///
/// Digit `k` of the local index (most significant first) is written into
/// tensor position `positions[k]`.
pub(crate) fn offsets(d: usize, n: usize, positions: &[usize]) -> Vec<usize> {
    let m = positions.len();
    let strides: Vec<usize> = positions
        .iter()
        .map(|&p| d.pow((n - 1 - p) as u32))
        .collect();
    let count = d.pow(m as u32);
    (0..count)
        .map(|l| {
            let mut rem = l;
            let mut off = 0;
            for k in (0..m).rev() {
                off += (rem % d) * strides[k];
                rem /= d;
            }
            off
        })
        .collect()
}

pub(crate) fn complement(n: usize, positions: &[usize]) -> Vec<usize> {
    (0..n).filter(|p| !positions.contains(p)).collect()
}

/// `(L ⊗ I) X` where `L` acts on `positions`.
pub(crate) fn left_apply(d: usize, n: usize, positions: &[usize], l: &CMatrix, x: &CMatrix) -> CMatrix {
    let loc = offsets(d, n, positions);
    let rest = offsets(d, n, &complement(n, positions));
    let dim = x.nrows();
    let ml = loc.len();
    let mut out = CMatrix::zeros(dim, dim);
    let mut buf = vec![C64::new(0.0, 0.0); ml];
    for c in 0..dim {
        for &r0 in &rest {
            for (a, slot) in buf.iter_mut().enumerate() {
                *slot = x[(r0 + loc[a], c)];
            }
            for a in 0..ml {
                let mut acc = C64::new(0.0, 0.0);
                for (b, v) in buf.iter().enumerate() {
                    acc += l[(a, b)] * v;
                }
                out[(r0 + loc[a], c)] = acc;
            }
        }
    }
    out
}

/// `X (L ⊗ I)` where `L` acts on `positions`.
pub(crate) fn right_apply(d: usize, n: usize, positions: &[usize], x: &CMatrix, l: &CMatrix) -> CMatrix {
    let loc = offsets(d, n, positions);
    let rest = offsets(d, n, &complement(n, positions));
    let dim = x.nrows();
    let ml = loc.len();
    let mut out = CMatrix::zeros(dim, dim);
    let mut buf = vec![C64::new(0.0, 0.0); ml];
    for &c0 in &rest {
        for r in 0..dim {
            for (a, slot) in buf.iter_mut().enumerate() {
                *slot = x[(r, c0 + loc[a])];
            }
            for b in 0..ml {
                let mut acc = C64::new(0.0, 0.0);
                for (a, v) in buf.iter().enumerate() {
                    acc += v * l[(a, b)];
                }
                out[(r, c0 + loc[b])] = acc;
            }
        }
    }
    out
}

/// `U X U†` with `U` acting on `positions`.
pub(crate) fn conjugate(d: usize, n: usize, positions: &[usize], u: &CMatrix, x: &CMatrix) -> CMatrix {
    let ux = left_apply(d, n, positions, u, x);
    right_apply(d, n, positions, &ux, &u.adjoint())
}

/// `X A - A X` with `A` acting on `positions`.
pub(crate) fn commutator(d: usize, n: usize, positions: &[usize], x: &CMatrix, a: &CMatrix) -> CMatrix {
    right_apply(d, n, positions, x, a) - left_apply(d, n, positions, a, x)
}

/// `op` placed on `positions` and tensored with the identity elsewhere.
pub(crate) fn embed(d: usize, n: usize, positions: &[usize], op: &CMatrix) -> CMatrix {
    let loc = offsets(d, n, positions);
    let rest = offsets(d, n, &complement(n, positions));
    let dim = d.pow(n as u32);
    let mut out = CMatrix::zeros(dim, dim);
    for &r0 in &rest {
        for (b, &cb) in loc.iter().enumerate() {
            for (a, &ra) in loc.iter().enumerate() {
                out[(r0 + ra, r0 + cb)] = op[(a, b)];
            }
        }
    }
    out
}

/// Partial trace keeping the factors at `keep` (in that order).
pub(crate) fn partial_trace(d: usize, n: usize, keep: &[usize], x: &CMatrix) -> CMatrix {
    let loc = offsets(d, n, keep);
    let rest = offsets(d, n, &complement(n, keep));
    let m = loc.len();
    let mut out = CMatrix::zeros(m, m);
    for (b, &cb) in loc.iter().enumerate() {
        for (a, &ra) in loc.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &rest {
                acc += x[(ra + t, cb + t)];
            }
            out[(a, b)] = acc;
        }
    }
    out
}

/// Reorders tensor factors: new factor `k` is old factor `perm[k]`.
pub(crate) fn permute_factors(d: usize, n: usize, perm: &[usize], x: &CMatrix) -> CMatrix {
    let sigma = offsets(d, n, perm);
    let dim = x.nrows();
    CMatrix::from_fn(dim, dim, |r, c| x[(sigma[r], sigma[c])])
}

/// Kronecker product `a ⊗ b`.
pub(crate) fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}
