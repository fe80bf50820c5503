//! Dense square matrices, LU factorization with partial pivoting, and the
//! plain-text matrix format used by the CLI.

use std::fmt::Write as _;

use crate::{Error, Result};

/// Pivots with magnitude below this are treated as numerically singular.
pub const SINGULAR_PIVOT: f64 = 1e-300;

/// Square `n × n` matrix of finite reals, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from `n * n` row-major entries.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMatrix("dimension must be at least 1".into()));
        }
        if data.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "entry ({}, {}) is not finite",
                k / n,
                k % n
            )));
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().position(|row| row.len() != n) {
            return Err(Error::InvalidMatrix(format!(
                "row {r} has {} entries, expected {n}",
                rows[r].len()
            )));
        }
        Self::new(n, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    /// Panics if `diag` is empty or holds non-finite values.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            data[i * n + i] = *d;
        }
        Self::new(n, data).expect("diagonal must be nonempty and finite")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n..(row + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// `c · A`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.n, self.data.iter().map(|v| v * c).collect())
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j];
            }
        }
        Self { n, data }
    }

    /// Matrix product `self · rhs`.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<Self> {
        check_dim(self.n, rhs.n)?;
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                let out = &mut data[i * n..(i + 1) * n];
                for (o, b) in out.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Self::new(n, data)
    }

    /// `A · v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, v.len())?;
        let mut out = vec![0.0; self.n];
        self.matvec_into(v, &mut out);
        Ok(out)
    }

    /// `out = A · v` without allocating. Panics on length mismatch.
    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.n, "input length must equal matrix dimension");
        assert_eq!(out.len(), self.n, "output length must equal matrix dimension");
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.n)) {
            *o = row.iter().zip(v).map(|(a, x)| a * x).sum();
        }
    }
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// `P·A = L·U` with unit-lower `L` and upper `U` packed into one buffer.
///
/// Row `i` of `P·A` is row `pivots[i]` of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LuFactorization {
    n: usize,
    lu: Vec<f64>,
    pivots: Vec<usize>,
    parity: i8,
}

/// Factorizes `m` with partial (row) pivoting.
pub fn lu_factorize(m: &DenseMatrix) -> Result<LuFactorization> {
    let n = m.n;
    let mut lu = m.data.clone();
    let mut pivots: Vec<usize> = (0..n).collect();
    let mut parity = 1i8;

    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|r| (r, lu[r * n + k].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot < SINGULAR_PIVOT {
            return Err(Error::SingularMatrix {
                column: k,
                pivot: lu[p * n + k],
            });
        }
        if p != k {
            for j in 0..n {
                lu.swap(k * n + j, p * n + j);
            }
            pivots.swap(k, p);
            parity = -parity;
        }
        let diag = lu[k * n + k];
        for r in k + 1..n {
            let factor = lu[r * n + k] / diag;
            lu[r * n + k] = factor;
            if factor == 0.0 {
                continue;
            }
            let (upper, lower) = lu.split_at_mut(r * n);
            let pivot_row = &upper[k * n + k + 1..(k + 1) * n];
            for (x, u) in lower[k + 1..n].iter_mut().zip(pivot_row) {
                *x -= factor * u;
            }
        }
    }
    Ok(LuFactorization {
        n,
        lu,
        pivots,
        parity,
    })
}

impl LuFactorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Sign of the row permutation, `+1` or `-1`.
    pub fn parity(&self) -> i8 {
        self.parity
    }

    /// Unit lower-triangular factor.
    pub fn lower(&self) -> DenseMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n..i * n + i].copy_from_slice(&self.lu[i * n..i * n + i]);
            data[i * n + i] = 1.0;
        }
        DenseMatrix { n, data }
    }

    /// Upper-triangular factor.
    pub fn upper(&self) -> DenseMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i..(i + 1) * n].copy_from_slice(&self.lu[i * n + i..(i + 1) * n]);
        }
        DenseMatrix { n, data }
    }

    /// Applies the row permutation: returns `P·m`.
    pub fn permute_rows(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim(self.n, m.n)?;
        let data = self.pivots.iter().flat_map(|&p| m.row(p).iter().copied()).collect();
        DenseMatrix::new(self.n, data)
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, b.len())?;
        let mut x = vec![0.0; self.n];
        self.solve_into(b, &mut x);
        Ok(x)
    }

    /// Solves `A x = b` into `x`. Panics on length mismatch.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n, "rhs length must equal matrix dimension");
        assert_eq!(x.len(), n, "solution length must equal matrix dimension");
        for (xi, &p) in x.iter_mut().zip(&self.pivots) {
            *xi = b[p];
        }
        // forward: L y = P b
        for i in 1..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        // backward: U x = y
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: f64 = row.iter().zip(&x[i + 1..]).map(|(u, y)| u * y).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
    }

    /// `log |det A| = Σ log |Uᵢᵢ|`.
    pub fn log_abs_det(&self) -> f64 {
        (0..self.n).map(|i| self.lu[i * self.n + i].abs().ln()).sum()
    }

    /// Sign of `det A`.
    pub fn det_sign(&self) -> f64 {
        let negatives = (0..self.n).filter(|&i| self.lu[i * self.n + i] < 0.0).count();
        let sign = if negatives % 2 == 0 { 1.0 } else { -1.0 };
        sign * f64::from(self.parity)
    }

    /// Signed determinant; overflows to ±inf for large `n`, prefer
    /// [`log_abs_det`](Self::log_abs_det).
    pub fn det(&self) -> f64 {
        self.det_sign() * self.log_abs_det().exp()
    }
}

/// Formats a float with 17 significant digits, which round-trips exactly.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses the text matrix format: a line holding `n`, then `n` lines of `n`
/// whitespace-separated decimals. Blank lines are skipped.
pub fn parse_matrix(text: &str) -> Result<DenseMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (line_no, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing dimension line".into(),
    })?;
    let n: usize = header.parse().map_err(|_| Error::Parse {
        line: line_no,
        message: format!("expected a positive integer dimension, found {header:?}"),
    })?;
    if n == 0 {
        return Err(Error::Parse {
            line: line_no,
            message: "dimension must be at least 1".into(),
        });
    }

    let mut data = Vec::with_capacity(n * n);
    for row in 0..n {
        let (line_no, line) = lines.next().ok_or(Error::Parse {
            line: line_no + row + 1,
            message: format!("expected {n} rows, found {row}"),
        })?;
        let start = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid number {tok:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("entry {tok:?} is not finite"),
                });
            }
            data.push(v);
        }
        if data.len() - start != n {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {n} entries, found {}", data.len() - start),
            });
        }
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(Error::Parse {
            line: line_no,
            message: "trailing content after matrix rows".into(),
        });
    }
    DenseMatrix::new(n, data)
}

pub fn format_matrix(m: &DenseMatrix) -> String {
    let mut out = format!("{}\n", m.n);
    for i in 0..m.n {
        let row: Vec<String> = m.row(i).iter().map(|&v| format_f64(v)).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    out
}

/// Euclidean norm, returned as its logarithm and computed with scaling so
/// that neither huge nor tiny entries overflow. `-inf` for the zero vector.
pub fn log_norm(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return f64::NEG_INFINITY;
    }
    let ss: f64 = v.iter().map(|x| (x / scale) * (x / scale)).sum();
    scale.ln() + 0.5 * ss.ln()
}

pub fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}
