//! Thin safe wrappers around `matrixmultiply::zgemm` for the strided
//! complex products used by propagation and analysis.

use matrixmultiply::CGemmOption;
use num_complex::Complex64;

/// Strided read-only view of a complex matrix stored in a flat slice.
#[derive(Clone, Copy)]
pub(crate) struct MatView<'a> {
    pub data: &'a [Complex64],
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
    pub conj: bool,
}

impl<'a> MatView<'a> {
    /// Row-major `rows × cols` block with leading dimension `ld`.
    pub fn row_major(data: &'a [Complex64], ld: usize, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        MatView { data, offset: r0 * ld + c0, rows, cols, rs: ld, cs: 1, conj: false }
    }

    /// Column-major `rows × cols` block with leading dimension `ld`.
    pub fn col_major(data: &'a [Complex64], ld: usize, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        MatView { data, offset: c0 * ld + r0, rows, cols, rs: 1, cs: ld, conj: false }
    }

    /// Conjugate transpose.
    pub fn adjoint(self) -> Self {
        MatView {
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
            conj: !self.conj,
            ..self
        }
    }

    fn check(&self) {
        if self.rows == 0 || self.cols == 0 {
            return;
        }
        let last = self.offset + (self.rows - 1) * self.rs + (self.cols - 1) * self.cs;
        assert!(last < self.data.len(), "matrix view out of bounds");
    }
}

/// `c = a · b` where `c` is column-major with leading dimension `ldc`,
/// starting at `c_off`. Overwrites the target block.
///
/// The backend has no conjugation flag, so conjugated operands are handled
/// through `conj(A)·B = conj(A·conj(B))`; only `b` is ever copied.
pub(crate) fn gemm_into(a: MatView<'_>, b: MatView<'_>, c: &mut [Complex64], c_off: usize, ldc: usize) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if m == 0 || n == 0 {
        return;
    }
    assert!(ldc >= m);
    assert!(c_off + (n - 1) * ldc + m <= c.len(), "output block out of bounds");
    if k == 0 {
        for j in 0..n {
            c[c_off + j * ldc..c_off + j * ldc + m].fill(Complex64::new(0.0, 0.0));
        }
        return;
    }
    a.check();
    b.check();
    let conj_out = a.conj;
    let copied;
    let (b_data, b_off, b_rs, b_cs) = if a.conj != b.conj {
        let mut buf = Vec::with_capacity(k * n);
        for j in 0..n {
            for i in 0..k {
                buf.push(b.data[b.offset + i * b.rs + j * b.cs].conj());
            }
        }
        copied = buf;
        (&copied[..], 0, 1, k)
    } else {
        (b.data, b.offset, b.rs, b.cs)
    };
    // SAFETY: Complex64 is repr(C) {re, im}, layout-identical to [f64; 2].
    // Bounds of all three operands were checked above.
    unsafe {
        matrixmultiply::zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.data.as_ptr().add(a.offset) as *const [f64; 2],
            a.rs as isize,
            a.cs as isize,
            b_data.as_ptr().add(b_off) as *const [f64; 2],
            b_rs as isize,
            b_cs as isize,
            [0.0, 0.0],
            c.as_mut_ptr().add(c_off) as *mut [f64; 2],
            1,
            ldc as isize,
        );
    }
    if conj_out {
        for j in 0..n {
            for z in &mut c[c_off + j * ldc..c_off + j * ldc + m] {
                *z = z.conj();
            }
        }
    }
}

/// Gram-type product `aᴴ b` for two column-major blocks with `n` rows.
pub(crate) fn cross_gram(a: &[Complex64], ka: usize, b: &[Complex64], kb: usize, n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); ka * kb];
    let av = MatView::col_major(a, n, 0, 0, n, ka).adjoint();
    let bv = MatView::col_major(b, n, 0, 0, n, kb);
    gemm_into(av, bv, &mut out, 0, ka);
    out
}

/// Neumaier-compensated sum.
#[derive(Default, Clone, Copy, Debug)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn gemm_matches_naive_with_adjoint() {
        let n = 5;
        let k = 3;
        let a: Vec<_> = (0..n * n).map(|i| c(i as f64 * 0.3 - 1.0, (i % 4) as f64)).collect();
        let x: Vec<_> = (0..n * k).map(|i| c((i % 3) as f64, -(i as f64) * 0.1)).collect();
        let mut out = vec![c(0.0, 0.0); n * k];
        // out = aᴴ x, a row-major
        gemm_into(MatView::row_major(&a, n, 0, 0, n, n).adjoint(), MatView::col_major(&x, n, 0, 0, n, k), &mut out, 0, n);
        for j in 0..k {
            for i in 0..n {
                let mut s = c(0.0, 0.0);
                for l in 0..n {
                    s += a[l * n + i].conj() * x[j * n + l];
                }
                assert!((s - out[j * n + i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let s: CompensatedSum = [1e16, 1.0, -1e16, 1.0].into_iter().collect();
        assert_eq!(s.value(), 2.0);
    }
}
