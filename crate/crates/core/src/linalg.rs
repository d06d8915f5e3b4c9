//! Direct solvers for the block-tridiagonal systems produced by assembly.
//!
//! [`BlockLu`] eliminates block rows in order, pivoting only inside each pivot
//! block; the band structure is never widened. [`dense_solve`] is a plain
//! partial-pivoting LU on the expanded matrix and serves as the reference the
//! block solver is checked against.

use thiserror::Error;

/// Condition estimates above this are attached to a solve as a warning.
pub const CONDITION_WARNING: f64 = 1e15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("singular pivot block at block row {block}")]
    SingularBlock { block: usize },
    #[error("singular matrix (zero pivot in column {column})")]
    Singular { column: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
}

/// Square dense matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "row-major data must hold n*n entries");
        Self { n, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "matrix must be square");
            data.extend_from_slice(r);
        }
        Self { n, data }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn into_row_major(self) -> Vec<f64> {
        self.data
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.data[i * self.n..(i + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for l in 0..n {
                let a = self[(i, l)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[l * n + j];
                }
            }
        }
        out
    }

    fn sub_assign(&mut self, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
    }

    fn norm1(&self) -> f64 {
        (0..self.n).map(|j| (0..self.n).map(|i| self[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor(mut a: DenseMatrix) -> Result<Self, LinalgError> {
        if a.data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite("matrix"));
        }
        let n = a.n;
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let (pivot_row, pivot_abs) =
                (col..n)
                    .map(|r| (r, a[(r, col)].abs()))
                    .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs == 0.0 {
                return Err(LinalgError::Singular { column: col });
            }
            if pivot_row != col {
                for j in 0..n {
                    a.data.swap(col * n + j, pivot_row * n + j);
                }
                perm.swap(col, pivot_row);
            }
            let pivot = a[(col, col)];
            for r in col + 1..n {
                let factor = a[(r, col)] / pivot;
                a[(r, col)] = factor;
                if factor != 0.0 {
                    for j in col + 1..n {
                        a.data[r * n + j] -= factor * a.data[col * n + j];
                    }
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn size(&self) -> usize {
        self.lu.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.lu.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }

    /// Solves `A^T x = rhs`.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.lu.n;
        // A^T = U^T L^T P, so solve U^T y = rhs, L^T z = y, x = P^T z.
        let mut y = rhs.to_vec();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(j, i)] * y[j]).sum();
            y[i] = (y[i] - s) / self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(j, i)] * y[j]).sum();
            y[i] -= s;
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    /// Solves `A X = B` column by column.
    fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        let n = b.n;
        let mut out = DenseMatrix::zeros(n);
        let mut col = vec![0.0; n];
        for j in 0..n {
            for i in 0..n {
                col[i] = b[(i, j)];
            }
            let x = self.solve(&col);
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        out
    }

    pub fn inverse(&self) -> DenseMatrix {
        self.solve_matrix(&DenseMatrix::identity(self.lu.n))
    }
}

/// Solves `A x = rhs` by LU with partial pivoting on the full matrix.
pub fn dense_solve(a: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if rhs.len() != a.n {
        return Err(LinalgError::Dimension { expected: a.n, got: rhs.len() });
    }
    Ok(DenseLu::factor(a.clone())?.solve(rhs))
}

/// Block-tridiagonal matrix with `n` square blocks of size `s` per row.
///
/// Block row `i` holds `lower[i]` (coupling to `i - 1`, zero for `i = 0`),
/// `diag[i]` and `upper[i]` (coupling to `i + 1`, zero for the last row).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonal {
    block_size: usize,
    lower: Vec<DenseMatrix>,
    diag: Vec<DenseMatrix>,
    upper: Vec<DenseMatrix>,
}

impl BlockTridiagonal {
    pub fn zeros(blocks: usize, block_size: usize) -> Self {
        let z = DenseMatrix::zeros(block_size);
        Self { block_size, lower: vec![z.clone(); blocks], diag: vec![z.clone(); blocks], upper: vec![z; blocks] }
    }

    pub fn identity(blocks: usize, block_size: usize) -> Self {
        let mut m = Self::zeros(blocks, block_size);
        for d in &mut m.diag {
            *d = DenseMatrix::identity(block_size);
        }
        m
    }

    pub fn blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn dim(&self) -> usize {
        self.blocks() * self.block_size
    }

    pub fn diag(&self, i: usize) -> &DenseMatrix {
        &self.diag[i]
    }

    pub fn diag_mut(&mut self, i: usize) -> &mut DenseMatrix {
        &mut self.diag[i]
    }

    /// Coupling of block row `i` to block column `i - 1`.
    pub fn lower_mut(&mut self, i: usize) -> &mut DenseMatrix {
        assert!(i > 0, "block row 0 has no lower coupling");
        &mut self.lower[i]
    }

    pub fn lower(&self, i: usize) -> &DenseMatrix {
        &self.lower[i]
    }

    /// Coupling of block row `i` to block column `i + 1`.
    pub fn upper_mut(&mut self, i: usize) -> &mut DenseMatrix {
        assert!(i + 1 < self.blocks(), "last block row has no upper coupling");
        &mut self.upper[i]
    }

    pub fn upper(&self, i: usize) -> &DenseMatrix {
        &self.upper[i]
    }

    /// Entry `(row, col)` of the expanded matrix; zero outside the band.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        let s = self.block_size;
        let (bi, bj) = (row / s, col / s);
        let (i, j) = (row % s, col % s);
        if bi == bj {
            self.diag[bi][(i, j)]
        } else if bj + 1 == bi {
            self.lower[bi][(i, j)]
        } else if bi + 1 == bj {
            self.upper[bi][(i, j)]
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.dim();
        let mut d = DenseMatrix::zeros(n);
        for r in 0..n {
            for c in 0..n {
                d[(r, c)] = self.get(r, c);
            }
        }
        d
    }

    pub fn transpose(&self) -> Self {
        let nb = self.blocks();
        let mut t = Self::zeros(nb, self.block_size);
        for i in 0..nb {
            t.diag[i] = self.diag[i].transpose();
            if i + 1 < nb {
                // (A^T) row i, col i+1 = (A row i+1, col i)^T
                t.upper[i] = self.lower[i + 1].transpose();
                t.lower[i + 1] = self.upper[i].transpose();
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let s = self.block_size;
        let nb = self.blocks();
        let mut y = vec![0.0; nb * s];
        for i in 0..nb {
            let yi = &mut y[i * s..(i + 1) * s];
            accumulate(yi, &self.diag[i], &x[i * s..(i + 1) * s]);
            if i > 0 {
                accumulate(yi, &self.lower[i], &x[(i - 1) * s..i * s]);
            }
            if i + 1 < nb {
                accumulate(yi, &self.upper[i], &x[(i + 1) * s..(i + 2) * s]);
            }
        }
        y
    }

    pub fn norm1(&self) -> f64 {
        let s = self.block_size;
        let nb = self.blocks();
        let mut best: f64 = 0.0;
        for j in 0..nb {
            for c in 0..s {
                let mut sum = 0.0;
                for r in 0..s {
                    sum += self.diag[j][(r, c)].abs();
                    if j > 0 {
                        sum += self.upper[j - 1][(r, c)].abs();
                    }
                    if j + 1 < nb {
                        sum += self.lower[j + 1][(r, c)].abs();
                    }
                }
                best = best.max(sum);
            }
        }
        best
    }

    fn all_finite(&self) -> bool {
        self.diag.iter().chain(&self.lower).chain(&self.upper).all(|b| b.data.iter().all(|v| v.is_finite()))
    }
}

fn accumulate(y: &mut [f64], a: &DenseMatrix, x: &[f64]) {
    let s = a.n;
    for (i, yi) in y.iter_mut().enumerate() {
        *yi += a.data[i * s..(i + 1) * s].iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
    }
}

/// Block LU factorization of a [`BlockTridiagonal`] matrix.
///
/// Pivot blocks `S_i = D_i - L_i S_{i-1}^{-1} U_{i-1}` are factored with
/// partial pivoting; `lower_solved[i] = L_i S_{i-1}^{-1}`.
#[derive(Debug, Clone)]
pub struct BlockLu {
    block_size: usize,
    pivots: Vec<DenseLu>,
    lower: Vec<DenseMatrix>,
    upper: Vec<DenseMatrix>,
    transpose_pivots: Vec<DenseLu>,
    transpose_lower: Vec<DenseMatrix>,
    transpose_upper: Vec<DenseMatrix>,
    norm1: f64,
}

struct Sweep {
    pivots: Vec<DenseLu>,
    lower: Vec<DenseMatrix>,
    upper: Vec<DenseMatrix>,
}

fn factor_sweep(a: &BlockTridiagonal) -> Result<Sweep, LinalgError> {
    let nb = a.blocks();
    let mut pivots: Vec<DenseLu> = Vec::with_capacity(nb);
    let mut lower = Vec::with_capacity(nb);
    for i in 0..nb {
        let mut schur = a.diag[i].clone();
        if i > 0 {
            // L_i S_{i-1}^{-1} via the transpose system S^T X^T = L_i^T
            let prev = &pivots[i - 1];
            let lt = a.lower[i].transpose();
            let xt = {
                let n = lt.n;
                let mut out = DenseMatrix::zeros(n);
                let mut col = vec![0.0; n];
                for j in 0..n {
                    for r in 0..n {
                        col[r] = lt[(r, j)];
                    }
                    let sol = prev.solve_transpose(&col);
                    for r in 0..n {
                        out[(r, j)] = sol[r];
                    }
                }
                out
            };
            let l_solved = xt.transpose();
            schur.sub_assign(&l_solved.matmul(&a.upper[i - 1]));
            lower.push(l_solved);
        } else {
            lower.push(DenseMatrix::zeros(a.block_size));
        }
        let lu = DenseLu::factor(schur).map_err(|_| LinalgError::SingularBlock { block: i })?;
        pivots.push(lu);
    }
    Ok(Sweep { pivots, lower, upper: a.upper.clone() })
}

impl BlockLu {
    pub fn factor(a: &BlockTridiagonal) -> Result<Self, LinalgError> {
        if !a.all_finite() {
            return Err(LinalgError::NonFinite("block matrix"));
        }
        let forward = factor_sweep(a)?;
        let backward = factor_sweep(&a.transpose())?;
        Ok(Self {
            block_size: a.block_size,
            pivots: forward.pivots,
            lower: forward.lower,
            upper: forward.upper,
            transpose_pivots: backward.pivots,
            transpose_lower: backward.lower,
            transpose_upper: backward.upper,
            norm1: a.norm1(),
        })
    }

    pub fn dim(&self) -> usize {
        self.pivots.len() * self.block_size
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if rhs.len() != self.dim() {
            return Err(LinalgError::Dimension { expected: self.dim(), got: rhs.len() });
        }
        Ok(sweep_solve_parts(&self.pivots, &self.lower, &self.upper, self.block_size, rhs))
    }

    pub fn solve_transpose(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if rhs.len() != self.dim() {
            return Err(LinalgError::Dimension { expected: self.dim(), got: rhs.len() });
        }
        Ok(sweep_solve_parts(
            &self.transpose_pivots,
            &self.transpose_lower,
            &self.transpose_upper,
            self.block_size,
            rhs,
        ))
    }

    /// 1-norm condition estimate: exact `||A||_1` times Hager's estimate of
    /// `||A^{-1}||_1` (with Higham's alternating-sign safeguard).
    pub fn condition_estimate(&self) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 1.0;
        }
        let solve = |v: &[f64]| self.solve(v).expect("dimension checked");
        let solve_t = |v: &[f64]| self.solve_transpose(v).expect("dimension checked");
        let mut x = vec![1.0 / n as f64; n];
        let mut estimate = 0.0_f64;
        let mut last_index = usize::MAX;
        for _ in 0..5 {
            let y = solve(&x);
            let norm_y: f64 = y.iter().map(|v| v.abs()).sum();
            if norm_y <= estimate {
                break;
            }
            estimate = norm_y;
            let signs: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = solve_t(&signs);
            let (j, zmax) =
                z.iter().enumerate().map(|(i, v)| (i, v.abs())).fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx || j == last_index {
                break;
            }
            last_index = j;
            x = vec![0.0; n];
            x[j] = 1.0;
        }
        // alternating-sign test vector
        let alt: Vec<f64> = (0..n)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * (1.0 + i as f64 / (n.max(2) - 1) as f64)
            })
            .collect();
        let w = solve(&alt);
        let alt_est = 2.0 * w.iter().map(|v| v.abs()).sum::<f64>() / (3.0 * n as f64);
        self.norm1 * estimate.max(alt_est)
    }
}

fn sweep_solve_parts(
    pivots: &[DenseLu],
    lower: &[DenseMatrix],
    upper: &[DenseMatrix],
    s: usize,
    rhs: &[f64],
) -> Vec<f64> {
    let nb = pivots.len();
    let mut y = rhs.to_vec();
    for i in 1..nb {
        let (done, rest) = y.split_at_mut(i * s);
        let prev = &done[(i - 1) * s..];
        let l = &lower[i];
        for r in 0..s {
            let v: f64 = (0..s).map(|c| l[(r, c)] * prev[c]).sum();
            rest[r] -= v;
        }
    }
    let mut x = vec![0.0; nb * s];
    for i in (0..nb).rev() {
        let mut b = y[i * s..(i + 1) * s].to_vec();
        if i + 1 < nb {
            let (_, tail) = x.split_at((i + 1) * s);
            let next = &tail[..s];
            let u = &upper[i];
            for r in 0..s {
                b[r] -= (0..s).map(|c| u[(r, c)] * next[c]).sum::<f64>();
            }
        }
        let xi = pivots[i].solve(&b);
        x[i * s..(i + 1) * s].copy_from_slice(&xi);
    }
    x
}

/// Result of [`block_lu_solve`].
#[derive(Debug, Clone)]
pub struct BlockSolution {
    pub x: Vec<f64>,
    pub condition: f64,
    /// Set when the condition estimate exceeds [`CONDITION_WARNING`].
    pub warning: Option<String>,
}

/// Factors `a` and solves `a x = rhs`, attaching a condition estimate.
pub fn block_lu_solve(a: &BlockTridiagonal, rhs: &[f64]) -> Result<BlockSolution, LinalgError> {
    if rhs.len() != a.dim() {
        return Err(LinalgError::Dimension { expected: a.dim(), got: rhs.len() });
    }
    let lu = BlockLu::factor(a)?;
    let x = lu.solve(rhs)?;
    let condition = lu.condition_estimate();
    let warning = (condition > CONDITION_WARNING)
        .then(|| format!("condition estimate {condition:.3e} exceeds {CONDITION_WARNING:e}"));
    Ok(BlockSolution { x, condition, warning })
}

/// Order-of-magnitude 1-norm condition number of `a`.
pub fn condition_estimate(a: &BlockTridiagonal) -> Result<f64, LinalgError> {
    Ok(BlockLu::factor(a)?.condition_estimate())
}

/// Exact 1-norm condition number of a dense matrix via its inverse; test aid.
pub fn dense_condition(a: &DenseMatrix) -> Result<f64, LinalgError> {
    let inv = DenseLu::factor(a.clone())?.inverse();
    Ok(a.norm1() * inv.norm1())
}
