//! Banded and block-diagonal linear algebra.
//!
//! Every system matrix in this crate is banded once the unknowns are ordered
//! cell by cell, so the solvers here are the only ones needed: an LU
//! factorization with partial pivoting for general banded matrices, a
//! Cholesky factorization for symmetric positive definite banded matrices, a
//! dense Cholesky for small Schur complements, and a uniform block-diagonal
//! matrix with prefactored blocks for the broken mass matrix.

use crate::error::{Error, Result};

/// Symmetric-storage-free banded matrix with `kl` sub- and `ku`
/// superdiagonals, stored row-major: entry `(i, j)` lives at
/// `data[i * (kl + ku + 1) + (j - i + kl)]` for `i - kl <= j <= i + ku`.
#[derive(Debug, Clone)]
pub struct Banded {
    /// Matrix dimension.
    pub n: usize,
    /// Number of subdiagonals.
    pub kl: usize,
    /// Number of superdiagonals.
    pub ku: usize,
    data: Vec<f64>,
}

impl Banded {
    /// Zero matrix of dimension `n` with bandwidths `(kl, ku)`.
    pub fn new(n: usize, kl: usize, ku: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("banded matrix dimension must be positive"));
        }
        Ok(Banded {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        })
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n {
            return None;
        }
        if j + self.kl < i || j > i + self.ku {
            return None;
        }
        Some(i * (self.kl + self.ku + 1) + (j + self.kl - i))
    }

    /// Entry `(i, j)`; zero outside the band, panics outside the matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "index out of range");
        match self.offset(i, j) {
            Some(o) => self.data[o],
            None => 0.0,
        }
    }

    /// Sets entry `(i, j)`; errors if `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        match self.offset(i, j) {
            Some(o) => {
                self.data[o] = v;
                Ok(())
            }
            None => Err(Error::DimensionMismatch(format!(
                "entry ({i}, {j}) outside band of {}x{} matrix with kl={}, ku={}",
                self.n, self.n, self.kl, self.ku
            ))),
        }
    }

    /// Adds `v` to entry `(i, j)`; errors if `(i, j)` lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        match self.offset(i, j) {
            Some(o) => {
                self.data[o] += v;
                Ok(())
            }
            None => Err(Error::DimensionMismatch(format!(
                "entry ({i}, {j}) outside band of {}x{} matrix with kl={}, ku={}",
                self.n, self.n, self.kl, self.ku
            ))),
        }
    }

    /// Column range `[lo, hi)` of the band in row `i`.
    #[inline]
    pub fn row_range(&self, i: usize) -> (usize, usize) {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku + 1).min(self.n);
        (lo, hi)
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n, "matvec input length");
        assert_eq!(y.len(), self.n, "matvec output length");
        let w = self.kl + self.ku + 1;
        for i in 0..self.n {
            let (lo, hi) = self.row_range(i);
            let row = &self.data[i * w..(i + 1) * w];
            let mut s = 0.0;
            for j in lo..hi {
                s += row[j + self.kl - i] * x[j];
            }
            y[i] = s;
        }
    }

    /// Bilinear form `x' A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n, "bilinear input length");
        assert_eq!(y.len(), self.n, "bilinear input length");
        let w = self.kl + self.ku + 1;
        let mut s = 0.0;
        for i in 0..self.n {
            let (lo, hi) = self.row_range(i);
            let row = &self.data[i * w..(i + 1) * w];
            let mut r = 0.0;
            for j in lo..hi {
                r += row[j + self.kl - i] * y[j];
            }
            s += x[i] * r;
        }
        s
    }

    /// Maximum absolute asymmetry `max |A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            let (lo, hi) = self.row_range(i);
            for j in lo..hi {
                m = m.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        m
    }

    /// LU factorization with partial pivoting.
    pub fn factor_lu(&self) -> Result<BandedLu> {
        BandedLu::new(self)
    }

    /// Cholesky factorization; requires `kl == ku` and a symmetric positive
    /// definite matrix (only the lower band is read).
    pub fn factor_cholesky(&self) -> Result<BandedCholesky> {
        BandedCholesky::new(self)
    }
}

/// LU factorization of a banded matrix with partial pivoting, in
/// column-major band storage widened to `kl + ku` superdiagonals for fill-in.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    kuf: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    fn new(a: &Banded) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let kuf = a.kl + a.ku;
        let ldab = 2 * kl + a.ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for i in 0..n {
            let (lo, hi) = a.row_range(i);
            for j in lo..hi {
                ab[j * ldab + (i + kuf - j)] = a.get(i, j);
            }
        }
        let mut ipiv = vec![0usize; n];

        let at = |ab: &[f64], i: usize, j: usize| ab[j * ldab + (i + kuf - j)];
        for j in 0..n {
            let imax = (j + kl).min(n - 1);
            let mut piv = j;
            let mut best = at(&ab, j, j).abs();
            for i in (j + 1)..=imax {
                let v = at(&ab, i, j).abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SingularMatrix { index: j });
            }
            ipiv[j] = piv;
            let jmax = (j + kuf).min(n - 1);
            if piv != j {
                for c in j..=jmax {
                    ab.swap(c * ldab + (j + kuf - c), c * ldab + (piv + kuf - c));
                }
            }
            let pivot = at(&ab, j, j);
            for i in (j + 1)..=imax {
                let l = at(&ab, i, j) / pivot;
                ab[j * ldab + (i + kuf - j)] = l;
                for c in (j + 1)..=jmax {
                    ab[c * ldab + (i + kuf - c)] -= l * at(&ab, j, c);
                }
            }
        }

        Ok(BandedLu {
            n,
            kl,
            kuf,
            ldab,
            ab,
            ipiv,
        })
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.ab[j * self.ldab + (i + self.kuf - j)]
    }

    /// Solves `A x = b` in place.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n, "solve rhs length");
        for j in 0..self.n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let imax = (j + self.kl).min(self.n - 1);
            let bj = b[j];
            for i in (j + 1)..=imax {
                b[i] -= self.at(i, j) * bj;
            }
        }
        for j in (0..self.n).rev() {
            b[j] /= self.at(j, j);
            let bj = b[j];
            let ilo = j.saturating_sub(self.kuf);
            for i in ilo..j {
                b[i] -= self.at(i, j) * bj;
            }
        }
    }

    /// Solves `A' x = b` in place (transpose solve with the same factors).
    #[allow(clippy::needless_range_loop)]
    pub fn solve_transposed_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n, "solve rhs length");
        for j in 0..self.n {
            let ilo = j.saturating_sub(self.kuf);
            let mut s = b[j];
            for i in ilo..j {
                s -= self.at(i, j) * b[i];
            }
            b[j] = s / self.at(j, j);
        }
        for j in (0..self.n).rev() {
            let imax = (j + self.kl).min(self.n - 1);
            let mut s = b[j];
            for i in (j + 1)..=imax {
                s -= self.at(i, j) * b[i];
            }
            b[j] = s;
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
        }
    }

    /// Solves `A x = b` into a fresh vector.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Cholesky factorization `A = L L'` of a symmetric positive definite banded
/// matrix with half-bandwidth `hb`, lower band stored column-major.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    hb: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    fn new(a: &Banded) -> Result<Self> {
        if a.kl != a.ku {
            return Err(Error::invalid(
                "Cholesky factorization needs equal lower and upper bandwidths",
            ));
        }
        let n = a.n;
        let hb = a.kl;
        let ld = hb + 1;
        let mut l = vec![0.0; ld * n];
        for j in 0..n {
            let clo = j.saturating_sub(hb);
            let mut s = a.get(j, j);
            for c in clo..j {
                let v = l[c * ld + (j - c)];
                s -= v * v;
            }
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::NotPositiveDefinite { index: j });
            }
            let d = s.sqrt();
            l[j * ld] = d;
            let imax = (j + hb).min(n - 1);
            for i in (j + 1)..=imax {
                let clo_i = i.saturating_sub(hb).max(clo);
                let mut t = a.get(i, j);
                for c in clo_i..j {
                    t -= l[c * ld + (i - c)] * l[c * ld + (j - c)];
                }
                l[j * ld + (i - j)] = t / d;
            }
        }
        Ok(BandedCholesky { n, hb, l })
    }

    /// Solves `A x = b` in place.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n, "solve rhs length");
        let ld = self.hb + 1;
        for i in 0..self.n {
            let jlo = i.saturating_sub(self.hb);
            let mut s = b[i];
            for j in jlo..i {
                s -= self.l[j * ld + (i - j)] * b[j];
            }
            b[i] = s / self.l[i * ld];
        }
        for i in (0..self.n).rev() {
            let jmax = (i + self.hb).min(self.n - 1);
            let mut s = b[i];
            for j in (i + 1)..=jmax {
                s -= self.l[i * ld + (j - i)] * b[j];
            }
            b[i] = s / self.l[i * ld];
        }
    }

    /// Solves `A x = b` into a fresh vector.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Dense symmetric positive definite matrix factored by Cholesky, used for
/// small Schur complements.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
}

impl DenseCholesky {
    /// Factors the dense `n x n` row-major matrix `a` (lower part read).
    pub fn new(a: &[f64], n: usize) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "dense Cholesky: expected {} entries, got {}",
                n * n,
                a.len()
            )));
        }
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut s = a[j * n + j];
            for c in 0..j {
                s -= l[j * n + c] * l[j * n + c];
            }
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::NotPositiveDefinite { index: j });
            }
            let d = s.sqrt();
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let mut t = a[i * n + j];
                for c in 0..j {
                    t -= l[i * n + c] * l[j * n + c];
                }
                l[i * n + j] = t / d;
            }
        }
        Ok(DenseCholesky { n, l })
    }

    /// Solves `A x = b` in place.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n, "solve rhs length");
        for i in 0..self.n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.l[i * self.n + j] * b[j];
            }
            b[i] = s / self.l[i * self.n + i];
        }
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for j in (i + 1)..self.n {
                s -= self.l[j * self.n + i] * b[j];
            }
            b[i] = s / self.l[i * self.n + i];
        }
    }
}

/// Block-diagonal matrix whose diagonal blocks are all equal to one dense
/// symmetric positive definite block, prefactored at construction.
#[derive(Debug, Clone)]
pub struct BlockDiag {
    /// Number of diagonal blocks.
    pub n_blocks: usize,
    /// Edge length of each block.
    pub block_size: usize,
    block: Vec<f64>,
    chol: DenseCholesky,
}

impl BlockDiag {
    /// Builds from the repeated row-major `block_size x block_size` block.
    pub fn new(n_blocks: usize, block_size: usize, block: Vec<f64>) -> Result<Self> {
        if n_blocks == 0 || block_size == 0 {
            return Err(Error::invalid("block-diagonal matrix must be nonempty"));
        }
        let chol = DenseCholesky::new(&block, block_size)?;
        Ok(BlockDiag {
            n_blocks,
            block_size,
            block,
            chol,
        })
    }

    /// Matrix dimension.
    pub fn dim(&self) -> usize {
        self.n_blocks * self.block_size
    }

    /// Entry `(r, c)` of the repeated block.
    pub fn block_entry(&self, r: usize, c: usize) -> f64 {
        self.block[r * self.block_size + c]
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim(), "matvec input length");
        assert_eq!(y.len(), self.dim(), "matvec output length");
        let bs = self.block_size;
        for (xs, ys) in x.chunks_exact(bs).zip(y.chunks_exact_mut(bs)) {
            for (row, out) in self.block.chunks_exact(bs).zip(ys.iter_mut()) {
                *out = row.iter().zip(xs).map(|(&m, &v)| m * v).sum();
            }
        }
    }

    /// Bilinear form `x' A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "bilinear input length");
        assert_eq!(y.len(), self.dim(), "bilinear input length");
        let bs = self.block_size;
        let mut s = 0.0;
        for (xs, ys) in x.chunks_exact(bs).zip(y.chunks_exact(bs)) {
            for (row, &xr) in self.block.chunks_exact(bs).zip(xs.iter()) {
                let t: f64 = row.iter().zip(ys).map(|(&m, &v)| m * v).sum();
                s += xr * t;
            }
        }
        s
    }

    /// Solves `A x = b` in place blockwise.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.dim(), "solve rhs length");
        let bs = self.block_size;
        for blk in 0..self.n_blocks {
            self.chol.solve_in_place(&mut b[blk * bs..(blk + 1) * bs]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, kl: usize, ku: usize, rng: &mut ChaCha8Rng) -> Banded {
        let mut a = Banded::new(n, kl, ku).unwrap();
        for i in 0..n {
            let (lo, hi) = a.row_range(i);
            for j in lo..hi {
                a.set(i, j, rng.gen_range(-1.0..1.0)).unwrap();
            }
            let d = a.get(i, i);
            a.set(i, i, d + 3.0).unwrap();
        }
        a
    }

    fn to_dense(a: &Banded) -> DMatrix<f64> {
        DMatrix::from_fn(a.n, a.n, |i, j| a.get(i, j))
    }

    #[test]
    fn lu_matches_dense_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(1, 0, 0), (5, 1, 2), (12, 3, 1), (40, 4, 4), (33, 2, 5)] {
            let a = random_banded(n, kl, ku, &mut rng);
            let lu = a.factor_lu().unwrap();
            let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let x = lu.solve(&b);
            let dense = to_dense(&a);
            let xd = dense
                .clone()
                .lu()
                .solve(&nalgebra::DVector::from_column_slice(&b))
                .unwrap();
            for i in 0..n {
                assert!(
                    (x[i] - xd[i]).abs() < 1e-11,
                    "n={n} i={i}: {} vs {}",
                    x[i],
                    xd[i]
                );
            }
        }
    }

    #[test]
    fn lu_pivots_on_zero_diagonal() {
        let mut a = Banded::new(4, 1, 1).unwrap();
        let rows = [
            [0.0, 2.0, 0.0, 0.0],
            [1.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 3.0],
            [0.0, 0.0, 1.0, 1.0],
        ];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if i.abs_diff(j) <= 1 {
                    a.set(i, j, v).unwrap();
                }
            }
        }
        let lu = a.factor_lu().unwrap();
        let b = vec![1.0, 2.0, 3.0, 4.0];
        let x = lu.solve(&b);
        let mut r = vec![0.0; 4];
        a.matvec(&x, &mut r);
        for i in 0..4 {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_solve_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(n, kl, ku) in &[(6, 2, 1), (25, 3, 4), (50, 5, 2)] {
            let a = random_banded(n, kl, ku, &mut rng);
            let lu = a.factor_lu().unwrap();
            let b: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
            let mut x = b.clone();
            lu.solve_transposed_in_place(&mut x);
            let dense = to_dense(&a).transpose();
            let xd = dense
                .lu()
                .solve(&nalgebra::DVector::from_column_slice(&b))
                .unwrap();
            for i in 0..n {
                assert!((x[i] - xd[i]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut a = Banded::new(3, 1, 1).unwrap();
        a.set(0, 0, 1.0).unwrap();
        a.set(1, 1, 1.0).unwrap();
        match a.factor_lu() {
            Err(Error::SingularMatrix { index }) => assert_eq!(index, 2),
            other => panic!("expected singular matrix error, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_matches_lu_on_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(n, hb) in &[(4, 1), (20, 2), (37, 3)] {
            let mut a = Banded::new(n, hb, hb).unwrap();
            for i in 0..n {
                for j in i.saturating_sub(hb)..=(i + hb).min(n - 1) {
                    if j <= i {
                        let v = rng.gen_range(-0.3..0.3);
                        a.set(i, j, v).unwrap();
                        a.set(j, i, v).unwrap();
                    }
                }
                let d = a.get(i, i);
                a.set(i, i, d.abs() + 2.0).unwrap();
            }
            let ch = a.factor_cholesky().unwrap();
            let lu = a.factor_lu().unwrap();
            let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
            let x1 = ch.solve(&b);
            let x2 = lu.solve(&b);
            for i in 0..n {
                assert!((x1[i] - x2[i]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = Banded::new(2, 1, 1).unwrap();
        a.set(0, 0, 1.0).unwrap();
        a.set(0, 1, 2.0).unwrap();
        a.set(1, 0, 2.0).unwrap();
        a.set(1, 1, 1.0).unwrap();
        assert!(matches!(
            a.factor_cholesky(),
            Err(Error::NotPositiveDefinite { index: 1 })
        ));
    }

    #[test]
    fn block_diag_solves_blockwise() {
        let block = vec![2.0, 1.0, 1.0, 2.0];
        let m = BlockDiag::new(3, 2, block).unwrap();
        assert_eq!(m.dim(), 6);
        let x: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let mut y = vec![0.0; 6];
        m.matvec(&x, &mut y);
        assert_eq!(y[0], 1.0);
        assert_eq!(y[1], 2.0);
        assert_eq!(y[4], 13.0);
        let mut z = y.clone();
        m.solve_in_place(&mut z);
        for i in 0..6 {
            assert!((z[i] - x[i]).abs() < 1e-13);
        }
        let q = m.bilinear(&x, &x);
        let expect: f64 = x.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
        assert!((q - expect).abs() < 1e-12);
    }

    #[test]
    fn matvec_and_bilinear_agree_with_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let a = random_banded(15, 2, 3, &mut rng);
        let dense = to_dense(&a);
        let x: Vec<f64> = (0..15).map(|i| (i as f64 * 0.91).cos()).collect();
        let y: Vec<f64> = (0..15).map(|i| (i as f64 * 0.53).sin()).collect();
        let mut ax = vec![0.0; 15];
        a.matvec(&x, &mut ax);
        let axd = &dense * nalgebra::DVector::from_column_slice(&x);
        for i in 0..15 {
            assert!((ax[i] - axd[i]).abs() < 1e-12);
        }
        let q = a.bilinear(&y, &x);
        let qd = nalgebra::DVector::from_column_slice(&y).dot(&axd);
        assert!((q - qd).abs() < 1e-12);
    }
}
