//! Dense symmetric matrices.
//!
//! Thin layer over `nalgebra` with the conventions the rest of the crate
//! relies on: ascending spectra, relative tolerances anchored at
//! `max(1, λ_max)`, and exact symmetry of stored entries.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default relative tolerance for rank and PSD decisions in certificates.
pub const CERT_TOL: f64 = 1e-8;
/// Tolerance for linear-algebra self checks.
pub const LINALG_TOL: f64 = 1e-10;

/// Real symmetric matrix; `self[(i, j)] == self[(j, i)]` holds bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn zeros(m: usize) -> Self {
        SymMatrix(DMatrix::zeros(m, m))
    }

    pub fn identity(m: usize) -> Self {
        SymMatrix(DMatrix::identity(m, m))
    }

    /// The all-ones matrix `J`.
    pub fn ones(m: usize) -> Self {
        SymMatrix(DMatrix::from_element(m, m, 1.0))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// `½(M + Mᵀ)`; panics on a non-square input.
    pub fn symmetrize(m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "symmetric matrix must be square");
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    /// Accepts `m` only if it is square and exactly symmetric.
    pub fn try_from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "{}x{} matrix is not square",
                m.nrows(),
                m.ncols()
            )));
        }
        for i in 0..m.nrows() {
            for j in 0..i {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::Dimension(format!("entry ({i}, {j}) breaks symmetry")));
                }
            }
        }
        Ok(SymMatrix(m))
    }

    /// Builds from a function of `(i, j)` evaluated on the lower triangle.
    pub fn from_fn(m: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut out = DMatrix::zeros(m, m);
        for j in 0..m {
            for i in j..m {
                let v = f(i, j);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        SymMatrix(out)
    }

    /// `v vᵀ`.
    pub fn outer(v: &[f64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j])
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Writes both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.0[(i, j)] = v;
        self.0[(j, i)] = v;
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &other.0)
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix(&self.0 * s)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn sum(&self) -> f64 {
        self.0.sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    pub fn frob_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> Result<f64> {
        let s = self.eig()?;
        Ok(s.values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (&self.0 * DVector::from_column_slice(v)).as_slice().to_vec()
    }

    /// Row-major flattening, used to stack matrices as vectors.
    pub fn flatten(&self) -> Vec<f64> {
        let m = self.order();
        let mut out = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    /// Writes the matrix as headerless dense CSV, one row per line.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(path)
            .map_err(Error::from)?;
        for i in 0..self.order() {
            w.write_record(self.0.row(i).iter().map(|x| x.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    fn check_finite(&self) -> Result<()> {
        let m = self.order();
        for j in 0..m {
            for i in 0..m {
                if !self.0[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    /// Full eigendecomposition with ascending eigenvalues.
    pub fn eig(&self) -> Result<Spectrum> {
        self.check_finite()?;
        Ok(Spectrum::of_matrix(self.0.clone()))
    }

    /// `true` iff `λ_min ≥ −tol·max(1, λ_max)`.
    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        Ok(self.eig()?.is_psd(tol))
    }

    /// Number of eigenvalues with `|λ| > tol·max(1, λ_max)`.
    pub fn numeric_rank(&self, tol: f64) -> Result<usize> {
        Ok(self.eig()?.numeric_rank(tol))
    }

    /// Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped).
    pub fn proj_psd(&self) -> Result<SymMatrix> {
        self.check_finite()?;
        Ok(SymMatrix(project_psd_in_place(self.0.clone(), 0.0, f64::INFINITY)))
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Spectrum {
    pub(crate) fn of_matrix(m: DMatrix<f64>) -> Spectrum {
        let (values, vectors) = sym_eig(&m);
        Spectrum { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Threshold below which an eigenvalue counts as zero.
    pub fn zero_threshold(&self, tol: f64) -> f64 {
        tol * self.max().max(1.0)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min() >= -self.zero_threshold(tol)
    }

    pub fn numeric_rank(&self, tol: f64) -> usize {
        let t = self.zero_threshold(tol);
        self.values.iter().filter(|v| v.abs() > t).count()
    }

    pub fn kernel_dim(&self, tol: f64) -> usize {
        self.values.len() - self.numeric_rank(tol)
    }

    /// `Q Λ Qᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (k, &v) in self.values.iter().enumerate() {
            scaled.column_mut(k).scale_mut(v);
        }
        &scaled * self.vectors.transpose()
    }
}

/// Clips the spectrum of a symmetric matrix to `[lo, hi]`.
///
/// Reconstructs from whichever side of the spectrum needs fewer rank-one
/// terms: either the clipped part is added back onto the original matrix or
/// the kept part is summed from scratch.
pub(crate) fn project_psd_in_place(m: DMatrix<f64>, lo: f64, hi: f64) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return m;
    }
    let (vals, vecs) = sym_eig(&m);
    let changed: Vec<usize> = (0..n).filter(|&k| vals[k] < lo || vals[k] > hi).collect();
    if changed.is_empty() {
        return m;
    }
    if 2 * changed.len() <= n {
        // m + Σ_changed (clip(λ) − λ) q qᵀ
        let mut out = m;
        let mut q = DMatrix::zeros(n, changed.len());
        let mut w = DMatrix::zeros(n, changed.len());
        for (c, &k) in changed.iter().enumerate() {
            let delta = vals[k].clamp(lo, hi) - vals[k];
            q.set_column(c, &vecs.column(k));
            w.set_column(c, &(vecs.column(k) * delta));
        }
        out.gemm(1.0, &w, &q.transpose(), 1.0);
        symmetrize_in_place(&mut out);
        out
    } else {
        let kept: Vec<usize> = (0..n).filter(|&k| vals[k].clamp(lo, hi) != 0.0).collect();
        let mut q = DMatrix::zeros(n, kept.len());
        let mut w = DMatrix::zeros(n, kept.len());
        for (c, &k) in kept.iter().enumerate() {
            q.set_column(c, &vecs.column(k));
            w.set_column(c, &(vecs.column(k) * vals[k].clamp(lo, hi)));
        }
        let mut out = &w * q.transpose();
        symmetrize_in_place(&mut out);
        out
    }
}

/// Symmetric eigendecomposition, eigenvalues ascending, eigenvectors as columns.
///
/// Only the lower triangle of `m` is read.
pub(crate) fn sym_eig(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let fm = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let evd = fm
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigensolver converges on finite input");
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let values = order.iter().map(|&k| s[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, c| u[(i, order[c])]);
    (values, vectors)
}

pub(crate) fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in j + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Numeric rank of the matrix whose rows are `vectors`.
///
/// Uses a Householder QR of the (tall) transposed stack and counts diagonal
/// entries of `R` above `tol·max(1, max|R_kk|)` after column pivoting by norm.
pub fn stack_rank(vectors: &[Vec<f64>], tol: f64) -> Result<usize> {
    let Some(first) = vectors.first() else {
        return Err(Error::InvalidArgument("stack_rank of an empty list".into()));
    };
    let len = first.len();
    if vectors.iter().any(|v| v.len() != len) {
        return Err(Error::Dimension("stacked vectors differ in length".into()));
    }
    let mut a = DMatrix::zeros(len, vectors.len());
    for (c, v) in vectors.iter().enumerate() {
        a.set_column(c, &DVector::from_column_slice(v));
    }
    Ok(pivoted_qr_rank(a, tol))
}

/// Rank of `a` by Householder QR with column pivoting.
pub(crate) fn pivoted_qr_rank(mut a: DMatrix<f64>, tol: f64) -> usize {
    let (m, n) = a.shape();
    let steps = m.min(n);
    let mut norms: Vec<f64> = (0..n).map(|j| a.column(j).norm_squared()).collect();
    let mut first_diag = None;
    for k in 0..steps {
        let (p, &best) = norms[k..]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, v)| (i + k, v))
            .unwrap();
        if p != k {
            a.swap_columns(k, p);
            norms.swap(k, p);
        }
        let r0 = *first_diag.get_or_insert(best.sqrt());
        if best.sqrt() <= tol * r0.max(1.0) {
            return k;
        }
        // Householder reflector on column k, rows k..m.
        let mut v: Vec<f64> = (k..m).map(|i| a[(i, k)]).collect();
        let alpha = {
            let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if v[0] > 0.0 {
                -nrm
            } else {
                nrm
            }
        };
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in k..n {
                let dot: f64 = (k..m).map(|i| v[i - k] * a[(i, j)]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..m {
                    a[(i, j)] -= f * v[i - k];
                }
            }
        }
        for j in k + 1..n {
            norms[j] = (k + 1..m).map(|i| a[(i, j)] * a[(i, j)]).sum();
        }
    }
    steps
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(m: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SymMatrix::from_fn(m, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn identity_and_ones_spectra() {
        let s = SymMatrix::identity(4).eig().unwrap();
        for v in &s.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
        let j = SymMatrix::ones(3);
        let s = j.eig().unwrap();
        assert!(s.values[0].abs() < 1e-14 && s.values[1].abs() < 1e-14);
        assert!((s.values[2] - 3.0).abs() < 1e-14);
        assert!(j.is_psd(LINALG_TOL).unwrap());
        assert_eq!(j.numeric_rank(LINALG_TOL).unwrap(), 1);
        assert!((j.frob_norm() - 3.0).abs() < 1e-14);
        assert!((j.spectral_norm().unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn tolerance_semantics() {
        let d = SymMatrix::from_diagonal(&[1.0, -1e-14]);
        assert!(d.is_psd(1e-10).unwrap());
        assert_eq!(d.numeric_rank(1e-10).unwrap(), 1);
        let d = SymMatrix::from_diagonal(&[1.0, -1e-6]);
        assert!(!d.is_psd(1e-10).unwrap());
    }

    #[test]
    fn non_finite_is_rejected() {
        let mut m = SymMatrix::zeros(2);
        m.set(0, 1, f64::NAN);
        assert!(matches!(m.eig(), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn psd_projection_examples() {
        let p = SymMatrix::from_diagonal(&[2.0, -3.0]).proj_psd().unwrap();
        assert_eq!(p, SymMatrix::from_diagonal(&[2.0, 0.0]));
        let m = SymMatrix::from_diagonal(&[1.0, -1.0]);
        let p = m.proj_psd().unwrap();
        assert!((p.sub(&m).frob_norm() - 1.0).abs() < 1e-14);
        let psd = SymMatrix::ones(4);
        assert_eq!(psd.proj_psd().unwrap(), psd);
    }

    #[test]
    fn eig_residuals_up_to_order_200() {
        for (m, seed) in [(1, 1), (7, 2), (50, 3), (200, 4)] {
            let a = random_sym(m, seed);
            let s = a.eig().unwrap();
            let recon = s.reconstruct();
            let scale = 1.0 + a.frob_norm();
            assert!((recon - a.matrix()).norm() <= 1e-10 * scale);
            let qtq = s.vectors.transpose() * &s.vectors;
            assert!((qtq - DMatrix::identity(m, m)).norm() <= 1e-10 * (m as f64).sqrt());
            assert!(s.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn psd_projection_is_optimal_against_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_sym(12, 5);
        let p = m.proj_psd().unwrap();
        assert!(p.is_psd(1e-10).unwrap());
        let d = p.sub(&m).frob_norm();
        for _ in 0..100 {
            let b = DMatrix::from_fn(12, 12, |_, _| rng.gen_range(-1.0..1.0));
            let n = SymMatrix::symmetrize(&b * b.transpose());
            assert!(d <= n.sub(&m).frob_norm() + 1e-12);
        }
    }

    #[test]
    fn stack_rank_examples() {
        let e1 = vec![1.0, 0.0, 0.0];
        let e2 = vec![0.0, 1.0, 0.0];
        assert_eq!(stack_rank(&[e1.clone(), e2], 1e-10).unwrap(), 2);
        let v = vec![0.3, -1.0, 2.0];
        let w: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
        assert_eq!(stack_rank(&[v, w], 1e-10).unwrap(), 1);
        assert!(stack_rank(&[], 1e-10).is_err());
        assert!(stack_rank(&[e1, vec![1.0]], 1e-10).is_err());
    }

    #[test]
    fn csv_dump_round_trips() {
        let m = SymMatrix::from_fn(3, |i, j| (i + j) as f64 / 3.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        m.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let back: Vec<Vec<f64>> = text
            .lines()
            .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
            .collect();
        assert_eq!(back.len(), 3);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(back[i][j], m.get(i, j));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn rank_plus_kernel_is_order(m in 1usize..16, r in 0usize..16, seed in any::<u64>()) {
            let r = r.min(m);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = DMatrix::from_fn(m, r, |_, _| rng.gen_range(-1.0..1.0));
            let a = SymMatrix::symmetrize(&b * b.transpose());
            let s = a.eig().unwrap();
            prop_assert_eq!(s.numeric_rank(1e-10) + s.kernel_dim(1e-10), m);
            prop_assert_eq!(s.numeric_rank(1e-10), r);
        }

        #[test]
        fn psd_projection_is_idempotent_and_psd(m in 1usize..20, seed in any::<u64>()) {
            let a = random_sym(m, seed);
            let p = a.proj_psd().unwrap();
            prop_assert!(p.is_psd(1e-10).unwrap());
            let pp = p.proj_psd().unwrap();
            prop_assert!(pp.sub(&p).frob_norm() <= 1e-10 * (1.0 + p.frob_norm()));
        }

        #[test]
        fn stack_rank_matches_eig_rank_of_gram(rows in 1usize..8, cols in 1usize..10, rank in 1usize..8, seed in any::<u64>()) {
            let rank = rank.min(rows).min(cols);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = DMatrix::from_fn(rows, rank, |_, _| rng.gen_range(-1.0..1.0));
            let g = DMatrix::from_fn(rank, cols, |_, _| rng.gen_range(-1.0..1.0));
            let a = f * g;
            let vectors: Vec<Vec<f64>> = (0..rows).map(|i| a.row(i).iter().copied().collect()).collect();
            prop_assert_eq!(stack_rank(&vectors, 1e-10).unwrap(), rank);
        }
    }
}
