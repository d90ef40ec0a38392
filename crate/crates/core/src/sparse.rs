//! Compressed sparse row storage, block-system assembly and a direct LU
//! solver.
//!
//! The numeric factorization is delegated to faer's sparse LU with partial
//! pivoting (COLAMD column ordering, sequential). The wrapper adds the
//! numerical-singularity check and the dimension checks.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Col;

use crate::error::{Error, Result};

/// Row-compressed sparse matrix with sorted, duplicate-free columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Accumulates `(row, col, value)` entries; duplicates are summed on build.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> SparseMatrix {
        self.entries
            .sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        let mut it = self.entries.into_iter().peekable();
        while let Some((r, c, mut v)) = it.next() {
            while let Some(&(r2, c2, v2)) = it.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    it.next();
                } else {
                    break;
                }
            }
            if v != 0.0 {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        TripletBuilder::new(nrows, ncols).build()
    }

    pub fn identity(n: usize) -> Self {
        let mut b = TripletBuilder::with_capacity(n, n, n);
        for i in 0..n {
            b.push(i, i, 1.0);
        }
        b.build()
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut b = TripletBuilder::with_capacity(d.len(), d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            b.push(i, i, v);
        }
        b.build()
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut b = TripletBuilder::new(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols);
            for (j, &v) in row.iter().enumerate() {
                b.push(i, j, v);
            }
        }
        b.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(col, value)` over the stored entries of `row`.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col_idx[range.clone()].binary_search(&col) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            out[i][j] = v;
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `y += scale * A x`
    pub fn mul_vec_add(&self, scale: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let s: f64 = self.row(i).map(|(j, v)| v * x[j]).sum();
            *yi += scale * s;
        }
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        (0..self.nrows)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut b = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for (i, j, v) in self.triplets() {
            b.push(j, i, v);
        }
        b.build()
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        if s == 0.0 {
            return SparseMatrix::zeros(self.nrows, self.ncols);
        }
        out
    }

    /// Linear combination `sum_k c_k A_k` of equally shaped matrices.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> Result<SparseMatrix> {
        let (nrows, ncols) = terms
            .first()
            .map(|(_, m)| m.shape())
            .ok_or_else(|| Error::config("empty linear combination"))?;
        let cap = terms.iter().map(|(_, m)| m.nnz()).sum();
        let mut b = TripletBuilder::with_capacity(nrows, ncols, cap);
        for (c, m) in terms {
            if m.shape() != (nrows, ncols) {
                return Err(Error::DimensionMismatch {
                    context: "linear combination operand rows",
                    expected: nrows,
                    actual: m.nrows,
                });
            }
            for (i, j, v) in m.triplets() {
                b.push(i, j, c * v);
            }
        }
        Ok(b.build())
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
            / scale
    }

    /// Row/column elimination of the masked unknowns with unit diagonal.
    ///
    /// Only valid for homogeneous constraint values.
    pub fn constrain(&self, mask: &[bool]) -> SparseMatrix {
        assert_eq!(self.nrows, self.ncols);
        assert_eq!(mask.len(), self.nrows);
        let mut b = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz());
        for (i, j, v) in self.triplets() {
            if !mask[i] && !mask[j] {
                b.push(i, j, v);
            }
        }
        for (i, &m) in mask.iter().enumerate() {
            if m {
                b.push(i, i, 1.0);
            }
        }
        b.build()
    }

    pub fn check_invariants(&self) -> bool {
        self.row_ptr.len() == self.nrows + 1
            && self.row_ptr[self.nrows] == self.values.len()
            && (0..self.nrows).all(|i| {
                let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
                cols.windows(2).all(|w| w[0] < w[1]) && cols.iter().all(|&c| c < self.ncols)
            })
            && self.values.iter().all(|&v| v != 0.0)
    }
}

/// LU factors of a square sparse matrix, reusable for any number of solves.
pub struct Factorization {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization").field("n", &self.n).finish()
    }
}

/// Factorizes `matrix` with partial pivoting.
///
/// Structural singularity reports faer's failing elimination step. A zero
/// numeric pivot is caught afterwards by a probe solve; the reported pivot is
/// then the first unknown whose probe value is not finite (or the one with
/// the largest magnitude when all are finite but the residual is garbage).
pub fn factorize(matrix: &SparseMatrix) -> Result<Factorization> {
    if matrix.nrows != matrix.ncols {
        return Err(Error::DimensionMismatch {
            context: "factorize requires a square matrix",
            expected: matrix.nrows,
            actual: matrix.ncols,
        });
    }
    let n = matrix.nrows;
    if n == 0 {
        return Err(Error::config("cannot factorize an empty matrix"));
    }
    let triplets: Vec<Triplet<usize, usize, f64>> = matrix
        .triplets()
        .map(|(i, j, v)| Triplet::new(i, j, v))
        .collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::config(format!("sparse matrix conversion failed: {e:?}")))?;
    let lu = a.sp_lu().map_err(|e| match e {
        faer::sparse::linalg::LuError::SymbolicSingular { index } => {
            Error::SingularSystem { pivot: index }
        }
        faer::sparse::linalg::LuError::Generic(g) => {
            Error::config(format!("sparse LU failed: {g:?}"))
        }
    })?;
    let fact = Factorization { n, lu };

    // probe for zero pivots that faer does not report
    let probe: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.125).collect();
    let x = fact.solve_unchecked(&probe);
    if let Some(bad) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::SingularSystem { pivot: bad });
    }
    let ax = matrix.mul_vec(&x);
    let res = ax
        .iter()
        .zip(&probe)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let xnorm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bound = 1e-6 * (matrix.norm_inf() * xnorm + 2.0);
    if res > bound {
        let worst = x
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(k, m), (i, v)| if v.abs() > m { (i, v.abs()) } else { (k, m) })
            .0;
        return Err(Error::SingularSystem { pivot: worst });
    }
    Ok(fact)
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = rhs`. Pure in `(self, rhs)`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "right-hand side length",
                expected: self.n,
                actual: rhs.len(),
            });
        }
        Ok(self.solve_unchecked(rhs))
    }

    fn solve_unchecked(&self, rhs: &[f64]) -> Vec<f64> {
        let b = Col::<f64>::from_fn(self.n, |i| rhs[i]);
        let x = self.lu.solve(&b);
        (0..self.n).map(|i| x[i]).collect()
    }
}

/// Convenience: factorize and solve once.
pub fn solve(matrix: &SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    factorize(matrix)?.solve(rhs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub offset: usize,
    pub size: usize,
}

/// Named contiguous blocks partitioning a global unknown vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlockLayout {
    blocks: Vec<Block>,
}

impl BlockLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a block and returns its index.
    pub fn push(&mut self, name: impl Into<String>, size: usize) -> usize {
        let offset = self.dim();
        self.blocks.push(Block {
            name: name.into(),
            offset,
            size,
        });
        self.blocks.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.offset + b.size)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, idx: usize) -> &Block {
        &self.blocks[idx]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.name == name)
    }

    pub fn slice<'a>(&self, idx: usize, global: &'a [f64]) -> &'a [f64] {
        let b = &self.blocks[idx];
        &global[b.offset..b.offset + b.size]
    }

    pub fn slice_mut<'a>(&self, idx: usize, global: &'a mut [f64]) -> &'a mut [f64] {
        let b = &self.blocks[idx];
        &mut global[b.offset..b.offset + b.size]
    }
}

/// One scaled block placed at `(row_block, col_block)`.
#[derive(Debug, Clone, Copy)]
pub struct BlockContribution<'a> {
    pub row_block: usize,
    pub col_block: usize,
    pub matrix: &'a SparseMatrix,
    pub scale: f64,
}

impl<'a> BlockContribution<'a> {
    pub fn new(row_block: usize, col_block: usize, matrix: &'a SparseMatrix, scale: f64) -> Self {
        Self {
            row_block,
            col_block,
            matrix,
            scale,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub layout: BlockLayout,
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
}

/// Sums scaled block contributions into one global matrix.
pub fn assemble_block_system(
    layout: &BlockLayout,
    contributions: &[BlockContribution<'_>],
) -> Result<BlockSystem> {
    let n = layout.dim();
    let cap = contributions.iter().map(|c| c.matrix.nnz()).sum();
    let mut b = TripletBuilder::with_capacity(n, n, cap);
    for c in contributions {
        if c.row_block >= layout.blocks.len() || c.col_block >= layout.blocks.len() {
            return Err(Error::config(format!(
                "block index ({}, {}) out of range",
                c.row_block, c.col_block
            )));
        }
        let rb = layout.block(c.row_block);
        let cb = layout.block(c.col_block);
        if c.matrix.nrows != rb.size {
            return Err(Error::DimensionMismatch {
                context: "block contribution rows",
                expected: rb.size,
                actual: c.matrix.nrows,
            });
        }
        if c.matrix.ncols != cb.size {
            return Err(Error::DimensionMismatch {
                context: "block contribution columns",
                expected: cb.size,
                actual: c.matrix.ncols,
            });
        }
        if c.scale == 0.0 {
            continue;
        }
        for (i, j, v) in c.matrix.triplets() {
            b.push(rb.offset + i, cb.offset + j, c.scale * v);
        }
    }
    Ok(BlockSystem {
        layout: layout.clone(),
        matrix: b.build(),
        rhs: vec![0.0; n],
    })
}
