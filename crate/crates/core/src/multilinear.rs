//! Pointwise multilinear algebra on tangent-space values: symmetric 2-tensors,
//! endomorphisms, curvature-type 4-tensors, musical isomorphisms, traces and
//! Kulkarni-Nomizu products.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// A symmetric (0,2)-tensor at a point. Symmetry is exact by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Sym2Value {
    m: DMatrix<f64>,
}

impl Sym2Value {
    /// Builds from the upper triangle; the lower triangle mirrors it exactly.
    pub fn from_fn_sym(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Sym2Value { m }
    }

    /// Accepts a matrix that is already exactly symmetric.
    pub fn try_from_matrix(m: DMatrix<f64>) -> Result<Self> {
        for i in 0..m.nrows() {
            for j in (i + 1)..m.ncols() {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::NotSymmetric {
                        asym: (m[(i, j)] - m[(j, i)]).abs(),
                    });
                }
            }
        }
        Ok(Sym2Value { m })
    }

    /// Symmetrizes (averages with the transpose) and reports the discarded
    /// asymmetry.
    pub fn symmetrized(m: &DMatrix<f64>) -> (Self, f64) {
        let n = m.nrows();
        let mut asym = 0.0f64;
        let s = Sym2Value::from_fn_sym(n, |i, j| {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
            0.5 * (m[(i, j)] + m[(j, i)])
        });
        (s, asym)
    }

    pub fn zeros(n: usize) -> Self {
        Sym2Value { m: DMatrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        Sym2Value { m: DMatrix::identity(n, n) }
    }

    pub fn diag(d: &[f64]) -> Self {
        Sym2Value {
            m: DMatrix::from_diagonal(&DVector::from_row_slice(d)),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn apply(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.m[(i, j)] * x[i] * y[j];
            }
        }
        s
    }

    pub fn add(&self, o: &Sym2Value) -> Sym2Value {
        Sym2Value { m: &self.m + &o.m }
    }

    pub fn sub(&self, o: &Sym2Value) -> Sym2Value {
        Sym2Value { m: &self.m - &o.m }
    }

    pub fn scale(&self, c: f64) -> Sym2Value {
        Sym2Value { m: &self.m * c }
    }

    pub fn frobenius(&self) -> f64 {
        self.m.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().fold(0.0f64, |a, x| a.max(x.abs()))
    }
}

/// A (1,1)-tensor at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct EndoValue {
    m: DMatrix<f64>,
}

impl EndoValue {
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        EndoValue { m }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        EndoValue { m: DMatrix::from_fn(n, n, |i, j| f(i, j)) }
    }

    pub fn identity(n: usize) -> Self {
        EndoValue { m: DMatrix::identity(n, n) }
    }

    pub fn diag(d: &[f64]) -> Self {
        EndoValue {
            m: DMatrix::from_diagonal(&DVector::from_row_slice(d)),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.m[(i, j)] * x[j]).sum()).collect()
    }

    /// Eigenvalues of a g-self-adjoint endomorphism: with g = LL^T the matrix
    /// L^T B L^{-T} is symmetric and similar to B.
    pub fn eigenvalues_self_adjoint(&self, g: &MetricValue) -> Vec<f64> {
        let l = g.cholesky_l();
        let lt = l.transpose();
        let lt_inv = lt.clone().try_inverse().expect("Cholesky factor invertible");
        let c = &lt * &self.m * &lt_inv;
        let (sym, _) = Sym2Value::symmetrized(&c);
        let eig = SymmetricEigen::new(sym.m);
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }
}

/// A positive-definite symmetric 2-tensor with cached inverse and spectrum.
#[derive(Debug, Clone)]
pub struct MetricValue {
    sym: Sym2Value,
    inv: DMatrix<f64>,
    chol_l: DMatrix<f64>,
    min_eig: f64,
    cond: f64,
}

impl MetricValue {
    pub fn new(sym: Sym2Value) -> Result<Self> {
        let eig = SymmetricEigen::new(sym.m.clone());
        let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_eig = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(min_eig > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eig });
        }
        let chol = sym
            .m
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite { min_eig })?;
        let inv = chol.inverse();
        let chol_l = chol.l();
        Ok(MetricValue {
            sym,
            inv,
            chol_l,
            min_eig,
            cond: max_eig / min_eig,
        })
    }

    pub fn from_fn_sym(n: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        MetricValue::new(Sym2Value::from_fn_sym(n, f))
    }

    pub fn euclidean(n: usize) -> Self {
        MetricValue::new(Sym2Value::identity(n)).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.sym.dim()
    }

    pub fn sym(&self) -> &Sym2Value {
        &self.sym
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.sym.get(i, j)
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inv
    }

    pub fn cholesky_l(&self) -> &DMatrix<f64> {
        &self.chol_l
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eig
    }

    /// Spectral condition number; near-degenerate raising/lowering (e.g. ĝ
    /// close to an eigenvalue -1 of B) shows up here.
    pub fn condition(&self) -> f64 {
        self.cond
    }

    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        self.sym.apply(x, y)
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        self.inner(x, x).sqrt()
    }
}

/// A 4-tensor with the symmetries of a curvature tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4Value {
    n: usize,
    q: Vec<f64>,
}

impl Tensor4Value {
    pub fn zeros(n: usize) -> Self {
        Tensor4Value { n, q: vec![0.0; n * n * n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor4Value::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        t.q[((i * n + j) * n + k) * n + l] = f(i, j, k, l);
                    }
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.q[((i * self.n + j) * self.n + k) * self.n + l]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        self.q[((i * self.n + j) * self.n + k) * self.n + l] = v;
    }

    pub fn apply(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        s += self.get(i, j, k, l) * x[i] * y[j] * z[k] * w[l];
                    }
                }
            }
        }
        s
    }

    pub fn add(&self, o: &Tensor4Value) -> Tensor4Value {
        assert_eq!(self.n, o.n);
        Tensor4Value {
            n: self.n,
            q: self.q.iter().zip(&o.q).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &Tensor4Value) -> Tensor4Value {
        assert_eq!(self.n, o.n);
        Tensor4Value {
            n: self.n,
            q: self.q.iter().zip(&o.q).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Tensor4Value {
        Tensor4Value { n: self.n, q: self.q.iter().map(|a| a * c).collect() }
    }

    pub fn frobenius(&self) -> f64 {
        self.q.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.q.iter().fold(0.0f64, |a, x| a.max(x.abs()))
    }

    /// Largest violation of pair antisymmetry, pair-exchange symmetry and the
    /// first Bianchi identity, relative to the tensor's max-abs.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n;
        let scale = self.max_abs().max(1.0);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let q = self.get(i, j, k, l);
                        worst = worst.max((q + self.get(j, i, k, l)).abs());
                        worst = worst.max((q + self.get(i, j, l, k)).abs());
                        worst = worst.max((q - self.get(k, l, i, j)).abs());
                        let bianchi =
                            q + self.get(j, k, i, l) + self.get(k, i, j, l);
                        worst = worst.max(bianchi.abs());
                    }
                }
            }
        }
        worst / scale
    }

    pub fn check_symmetries(&self, tol: f64) -> Result<f64> {
        let defect = self.symmetry_defect();
        if defect > tol {
            return Err(Error::SymmetryViolation { defect, tol });
        }
        Ok(defect)
    }
}

/// Lowers an endomorphism: `(gB)(X,Y) = g(BX,Y)`. The result is symmetric
/// only for g-self-adjoint B, so the product is symmetrized after that check.
pub fn lower(g: &MetricValue, b: &EndoValue) -> Result<Sym2Value> {
    if g.dim() != b.dim() {
        return Err(Error::DimMismatch { expected: g.dim(), got: b.dim() });
    }
    let gb = g.sym().matrix() * b.matrix();
    let (sym, asym) = Sym2Value::symmetrized(&gb);
    let scale = gb.iter().fold(1.0f64, |a, x| a.max(x.abs()));
    if asym > 1e-10 * scale {
        return Err(Error::NotSymmetric { asym: asym / scale });
    }
    Ok(sym)
}

/// Raises a symmetric 2-tensor: the unique endomorphism with
/// `T(X,Y) = g((g^{-1}T)X, Y)`.
pub fn raise(g: &MetricValue, t: &Sym2Value) -> Result<EndoValue> {
    if g.dim() != t.dim() {
        return Err(Error::DimMismatch { expected: g.dim(), got: t.dim() });
    }
    Ok(EndoValue::from_matrix(g.inverse() * t.matrix()))
}

/// Metric trace of a symmetric 2-tensor: `tr(g^{-1}T)`.
pub fn trace2(g: &MetricValue, t: &Sym2Value) -> Result<f64> {
    if g.dim() != t.dim() {
        return Err(Error::DimMismatch { expected: g.dim(), got: t.dim() });
    }
    Ok((g.inverse() * t.matrix()).trace())
}

/// Kulkarni-Nomizu product of symmetric 2-tensors. Each entry is written to
/// all eight symmetry-related positions, so the output symmetries hold
/// exactly.
pub fn kulkarni_nomizu(t: &Sym2Value, s: &Sym2Value) -> Result<Tensor4Value> {
    let n = t.dim();
    if s.dim() != n {
        return Err(Error::DimMismatch { expected: n, got: s.dim() });
    }
    let mut q = Tensor4Value::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            for k in 0..n {
                for l in (k + 1)..n {
                    if (k, l) < (i, j) {
                        continue;
                    }
                    let v = t.get(i, l) * s.get(j, k) + t.get(j, k) * s.get(i, l)
                        - t.get(i, k) * s.get(j, l)
                        - t.get(j, l) * s.get(i, k);
                    q.set(i, j, k, l, v);
                    q.set(j, i, k, l, -v);
                    q.set(i, j, l, k, -v);
                    q.set(j, i, l, k, v);
                    q.set(k, l, i, j, v);
                    q.set(l, k, i, j, -v);
                    q.set(k, l, j, i, -v);
                    q.set(l, k, j, i, v);
                }
            }
        }
    }
    Ok(q)
}

/// Trace of a curvature-type 4-tensor on its first and last slots:
/// `tr_g(Q)(X,Y) = g^{il} Q(e_i, X, Y, e_l)`.
pub fn trace4(g: &MetricValue, q: &Tensor4Value) -> Result<Sym2Value> {
    let n = g.dim();
    if q.dim() != n {
        return Err(Error::DimMismatch { expected: n, got: q.dim() });
    }
    q.check_symmetries(1e-8)?;
    let ginv = g.inverse();
    let raw = DMatrix::from_fn(n, n, |j, k| {
        let mut s = 0.0;
        for i in 0..n {
            for l in 0..n {
                s += ginv[(i, l)] * q.get(i, j, k, l);
            }
        }
        s
    });
    let (sym, _) = Sym2Value::symmetrized(&raw);
    Ok(sym)
}

/// Sectional curvature of the plane spanned by `x`, `y`:
/// `sec = 2 Rm(X,Y,Y,X) / (g owedge g)(X,Y,Y,X)`.
pub fn sectional(g: &MetricValue, rm: &Tensor4Value, x: &[f64], y: &[f64]) -> Result<f64> {
    let gxx = g.inner(x, x);
    let gyy = g.inner(y, y);
    let gxy = g.inner(x, y);
    let gram = gxx * gyy - gxy * gxy;
    if gram <= 1e-12 * gxx * gyy {
        return Err(Error::DegeneratePlane);
    }
    Ok(2.0 * rm.apply(x, y, y, x) / (2.0 * gram))
}

/// Whether `g(B.,.)` is symmetric to `tol` (relative to its max-abs).
pub fn is_self_adjoint(g: &MetricValue, b: &EndoValue, tol: f64) -> bool {
    let gb = g.sym().matrix() * b.matrix();
    let scale = gb.iter().fold(1.0f64, |a, x| a.max(x.abs()));
    let n = g.dim();
    for i in 0..n {
        for j in (i + 1)..n {
            if (gb[(i, j)] - gb[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}
