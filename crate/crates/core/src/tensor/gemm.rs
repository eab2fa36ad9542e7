//! Strided f64 GEMM, backed by `matrixmultiply`.

/// Row/column strides of a matrix operand.
#[derive(Clone, Copy, Debug)]
pub struct Layout {
    pub row: isize,
    pub col: isize,
}

impl Layout {
    /// Row-major `rows x cols` storage.
    pub fn rm(cols: usize) -> Layout {
        Layout { row: cols as isize, col: 1 }
    }

    /// Transposed view of row-major storage whose *stored* shape has `cols`
    /// columns.
    pub fn rm_t(stored_cols: usize) -> Layout {
        Layout { row: 1, col: stored_cols as isize }
    }
}

/// `c = alpha * a(m x k) * b(k x n) + beta * c`.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    la: Layout,
    b: &[f64],
    lb: Layout,
    beta: f64,
    c: &mut [f64],
    lc: Layout,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(span(m, k, la) <= a.len());
    assert!(span(k, n, lb) <= b.len());
    assert!(span(m, n, lc) <= c.len());
    // SAFETY: the assertions above bound every strided access; callers
    // pass slices sized from the same shapes.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            la.row,
            la.col,
            b.as_ptr(),
            lb.row,
            lb.col,
            beta,
            c.as_mut_ptr(),
            lc.row,
            lc.col,
        );
    }
}

fn span(rows: usize, cols: usize, l: Layout) -> usize {
    if rows == 0 || cols == 0 {
        return 0;
    }
    ((rows - 1) as isize * l.row + (cols - 1) as isize * l.col) as usize + 1
}
