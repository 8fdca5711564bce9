use crate::error::TensorError;

/// Dense 2-D row-major matrix of `f64`. Scalars are represented as 1x1.
///
/// Shapes are validated at construction: the backing buffer length always
/// equals `rows * cols` and both dimensions are positive.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor from a row-major buffer, validating the length.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        if rows == 0 || cols == 0 {
            return Err(TensorError::ZeroDim { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(TensorError::InvalidBuffer {
                rows,
                cols,
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Tensor { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "tensor dimensions must be positive");
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "tensor dimensions must be positive");
        Tensor {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// 1x1 scalar.
    pub fn scalar(value: f64) -> Self {
        Tensor {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    /// Single-row tensor (1 x n).
    pub fn row(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "row must not be empty");
        Tensor {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
        }
    }

    /// Single-column tensor (n x 1).
    pub fn column(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "column must not be empty");
        Tensor {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "tensor dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Tensor { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false // dimensions are always positive
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        debug_assert!(r < self.rows);
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_slice_mut(&mut self, r: usize) -> &mut [f64] {
        debug_assert!(r < self.rows);
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// The value of a 1x1 tensor.
    pub fn value(&self) -> f64 {
        debug_assert!(
            self.rows == 1 && self.cols == 1,
            "value() requires a 1x1 tensor, got {}x{}",
            self.rows,
            self.cols
        );
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Returns a tensor with the same buffer reinterpreted as `rows x cols`.
    pub fn reshaped(&self, rows: usize, cols: usize) -> Result<Tensor, TensorError> {
        Tensor::new(rows, cols, self.data.clone())
    }

    /// Transposed copy.
    pub fn transposed(&self) -> Tensor {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub(crate) fn add_elem(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub(crate) fn scale_in_place(&mut self, k: f64) {
        for a in self.data.iter_mut() {
            *a *= k;
        }
    }

    // ---- matrix kernels -------------------------------------------------
    //
    // The three products below are the hot path of training. Loop orders are
    // chosen so the innermost loop runs over contiguous memory in both the
    // accumulator and the streamed operand, which lets the compiler
    // vectorize them.

    /// C = A · B, where A is m x k and B is k x n.
    pub(crate) fn mm_nn(&self, b: &Tensor) -> Tensor {
        debug_assert_eq!(self.cols, b.rows);
        let (m, k, n) = (self.rows, self.cols, b.cols);
        let mut out = Tensor::zeros(m, n);
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            let c_row = &mut out.data[i * n..(i + 1) * n];
            for (p, &a_ip) in a_row.iter().enumerate() {
                if a_ip == 0.0 {
                    continue;
                }
                let b_row = &b.data[p * n..(p + 1) * n];
                for (c, bv) in c_row.iter_mut().zip(b_row) {
                    *c += a_ip * bv;
                }
            }
        }
        out
    }

    /// C = A · Bᵀ, where A is m x k and B is n x k.
    pub(crate) fn mm_nt(&self, b: &Tensor) -> Tensor {
        debug_assert_eq!(self.cols, b.cols);
        let (m, k, n) = (self.rows, self.cols, b.rows);
        let mut out = Tensor::zeros(m, n);
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            let c_row = &mut out.data[i * n..(i + 1) * n];
            for (j, c) in c_row.iter_mut().enumerate() {
                let b_row = &b.data[j * k..(j + 1) * k];
                let mut acc = 0.0;
                for (av, bv) in a_row.iter().zip(b_row) {
                    acc += av * bv;
                }
                *c = acc;
            }
        }
        out
    }

    /// C = Aᵀ · B, where A is k x m and B is k x n.
    pub(crate) fn mm_tn(&self, b: &Tensor) -> Tensor {
        debug_assert_eq!(self.rows, b.rows);
        let (k, m, n) = (self.rows, self.cols, b.cols);
        let mut out = Tensor::zeros(m, n);
        for r in 0..k {
            let a_row = &self.data[r * m..(r + 1) * m];
            let b_row = &b.data[r * n..(r + 1) * n];
            for (i, &a_ri) in a_row.iter().enumerate() {
                if a_ri == 0.0 {
                    continue;
                }
                let c_row = &mut out.data[i * n..(i + 1) * n];
                for (c, bv) in c_row.iter_mut().zip(b_row) {
                    *c += a_ri * bv;
                }
            }
        }
        out
    }
}

/// Writes the numerically stable softmax of `row` into `out`.
///
/// The row maximum is subtracted before exponentiation, so entries like
/// `1e3` do not overflow. Shared by the tape operation and by action
/// sampling so both produce identical values.
pub fn softmax_row_into(row: &[f64], out: &mut [f64]) {
    debug_assert_eq!(row.len(), out.len());
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(row) {
        let e = (x - max).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Writes the numerically stable log-softmax of `row` into `out`.
pub fn log_softmax_row_into(row: &[f64], out: &mut [f64]) {
    debug_assert_eq!(row.len(), out.len());
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for &x in row {
        sum += (x - max).exp();
    }
    let log_sum = sum.ln();
    for (o, &x) in out.iter_mut().zip(row) {
        *o = (x - max) - log_sum;
    }
}
