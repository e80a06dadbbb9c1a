//! Transformation laws for connections, curvature and exterior covariant
//! derivatives under a conformal change of metric or a pullback by an
//! endomorphism field. Each law is exposed as a predictor computed purely
//! from base-metric data, testable against direct computation on the
//! transformed metric.

use crate::dense::T3;
use crate::jetcalc::{
    DerivEngine, EndoField, RingEval, ScalarField, ScalarJets, Sym2Field, Sym2Jets,
};
use crate::multilinear::{kulkarni_nomizu, Sym2Value, Tensor4Value};
use crate::ringmat::{mat_inverse, mat_mul, mat_transpose, mat_upper_tri, tri_to_full};
use crate::{Error, Result};
use std::sync::Arc;

/// A metric together with a conformal factor: `g̃ = e^{2u} g`.
#[derive(Clone)]
pub struct ConformalPair {
    pub base: Sym2Field,
    pub factor: ScalarField,
}

impl ConformalPair {
    pub fn new(base: Sym2Field, factor: ScalarField) -> Result<Self> {
        if base.dim() != factor.dim() {
            return Err(Error::DimMismatch { expected: base.dim(), got: factor.dim() });
        }
        Ok(ConformalPair { base, factor })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// The transformed metric `e^{2u} g` as a field.
    pub fn conformal_metric(&self) -> Sym2Field {
        Sym2Field::new(
            self.dim(),
            Arc::new(ScaledSym2Map {
                base: self.base.clone(),
                factor: self.factor.clone(),
                power: 2.0,
            }),
        )
    }

    /// Predicted `∇̃_X Y` for constant-coefficient X, Y:
    /// `∇_X Y + du(X) Y + du(Y) X - g(X,Y) ∇u`.
    pub fn conf_connection(
        &self,
        engine: &DerivEngine,
        p: &[f64],
        x: &[f64],
        y: &[f64],
    ) -> Result<Vec<f64>> {
        let n = self.dim();
        let gj = self.base.metric_jets(engine, p, 1)?;
        let uj = ScalarJets::from_jet(&self.factor.jet(engine, p, 1)?);
        let grad = gj.gradient(&uj);
        let dux: f64 = (0..n).map(|i| uj.d1[i] * x[i]).sum();
        let duy: f64 = (0..n).map(|i| uj.d1[i] * y[i]).sum();
        let mut gxy = 0.0;
        for i in 0..n {
            for j in 0..n {
                gxy += gj.g[(i, j)] * x[i] * y[j];
            }
        }
        Ok((0..n)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += gj.gamma.get(k, i, j) * x[i] * y[j];
                    }
                }
                s + dux * y[k] + duy * x[k] - gxy * grad[k]
            })
            .collect())
    }

    /// `∇̃_X Y` computed directly from the Christoffel symbols of `e^{2u} g`.
    pub fn direct_connection(
        &self,
        engine: &DerivEngine,
        p: &[f64],
        x: &[f64],
        y: &[f64],
    ) -> Result<Vec<f64>> {
        let n = self.dim();
        let mj = self.conformal_metric().metric_jets(engine, p, 1)?;
        Ok((0..n)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += mj.gamma.get(k, i, j) * x[i] * y[j];
                    }
                }
                s
            })
            .collect())
    }

    /// Predicted curvature tensor of `e^{2u} g`:
    /// `e^{2u} Rm(g) - g̃ owedge (Hess u - du² + 1/2 |∇u|² g)`.
    pub fn conf_riemann(&self, engine: &DerivEngine, p: &[f64]) -> Result<Tensor4Value> {
        let n = self.dim();
        let gj = self.base.metric_jets(engine, p, 2)?;
        let uj = ScalarJets::from_jet(&self.factor.jet(engine, p, 2)?);
        let e2u = (2.0 * uj.v).exp();
        let rm = gj.riemann();
        let hess = gj.hessian(&uj);
        let du2 = Sym2Value::from_fn_sym(n, |i, j| uj.d1[i] * uj.d1[j]);
        let grad2 = gj.grad_norm2(&uj);
        let gsym = Sym2Value::try_from_matrix(gj.g.clone()).expect("metric symmetric");
        let inner = hess.sub(&du2).add(&gsym.scale(0.5 * grad2));
        let gtilde = gsym.scale(e2u);
        Ok(rm.scale(e2u).sub(&kulkarni_nomizu(&gtilde, &inner)?))
    }

    pub fn direct_riemann(&self, engine: &DerivEngine, p: &[f64]) -> Result<Tensor4Value> {
        Ok(self.conformal_metric().metric_jets(engine, p, 2)?.riemann())
    }

    /// Predicted scalar curvature of `e^{2u} g`:
    /// `e^{-2u} (S(g) - 2(n-1) Δu - (n-2)(n-1) |∇u|²)`.
    pub fn conf_scalar(&self, engine: &DerivEngine, p: &[f64]) -> Result<f64> {
        let n = self.dim() as f64;
        let gj = self.base.metric_jets(engine, p, 2)?;
        let uj = ScalarJets::from_jet(&self.factor.jet(engine, p, 2)?);
        let s = gj.scalar();
        let lap = gj.laplacian(&uj);
        let grad2 = gj.grad_norm2(&uj);
        Ok((-2.0 * uj.v).exp() * (s - 2.0 * (n - 1.0) * lap - (n - 2.0) * (n - 1.0) * grad2))
    }

    pub fn direct_scalar(&self, engine: &DerivEngine, p: &[f64]) -> Result<f64> {
        Ok(self.conformal_metric().metric_jets(engine, p, 2)?.scalar())
    }

    /// Predicted `d^∇̃ T(X,Y,Z) = d^∇T(X,Y,Z) + (T owedge g)(∇u, X, Y, Z)`,
    /// as `out[x][y][z]`.
    pub fn conf_dnabla(
        &self,
        t: &Sym2Field,
        engine: &DerivEngine,
        p: &[f64],
    ) -> Result<T3> {
        let n = self.dim();
        let gj = self.base.metric_jets(engine, p, 1)?;
        let uj = ScalarJets::from_jet(&self.factor.jet(engine, p, 1)?);
        let grad = gj.gradient(&uj);
        let tj = Sym2Jets::from_entries(n, &t.entry_jets(engine, p, 1)?);
        let base_d = gj.dnabla_sym2(&tj);
        let tsym = Sym2Value::symmetrized(&tj.t).0;
        let gsym = Sym2Value::try_from_matrix(gj.g.clone()).expect("metric symmetric");
        let tg = kulkarni_nomizu(&tsym, &gsym)?;
        Ok(T3::from_fn(n, |x, y, z| {
            let mut s = base_d.get(x, y, z);
            for a in 0..n {
                s += grad[a] * tg.get(a, x, y, z);
            }
            s
        }))
    }

    pub fn direct_dnabla(
        &self,
        t: &Sym2Field,
        engine: &DerivEngine,
        p: &[f64],
    ) -> Result<T3> {
        let n = self.dim();
        let mj = self.conformal_metric().metric_jets(engine, p, 1)?;
        let tj = Sym2Jets::from_entries(n, &t.entry_jets(engine, p, 1)?);
        Ok(mj.dnabla_sym2(&tj))
    }
}

/// A metric pulled back by an endomorphism field: `ĝ(X,Y) = g(AX, AY)`.
#[derive(Clone)]
pub struct EndoPullback {
    pub base: Sym2Field,
    pub a: EndoField,
}

impl EndoPullback {
    pub fn new(base: Sym2Field, a: EndoField) -> Result<Self> {
        if base.dim() != a.dim() {
            return Err(Error::DimMismatch { expected: base.dim(), got: a.dim() });
        }
        Ok(EndoPullback { base, a })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// `g(A., A.)` as a field.
    pub fn pullback_metric(&self) -> Sym2Field {
        Sym2Field::new(
            self.dim(),
            Arc::new(PullbackSym2Map { base: self.base.clone(), a: self.a.clone() }),
        )
    }

    /// Predicted `∇̂_X Y = A^{-1} ∇_X (A Y)` for constant X, Y.
    pub fn pullback_connection(
        &self,
        engine: &DerivEngine,
        p: &[f64],
        x: &[f64],
        y: &[f64],
    ) -> Result<Vec<f64>> {
        let n = self.dim();
        let gj = self.base.metric_jets(engine, p, 1)?;
        let aj = self.a.endo_jets(engine, p)?;
        let a_inv = aj
            .b
            .clone()
            .try_inverse()
            .ok_or(Error::Singular { what: "pullback endomorphism" })?;
        // ∇_X (AY)^k = X^i Y^j ∂_i A^k_j + X^i Γ^k_im (AY)^m
        let ay: Vec<f64> = (0..n)
            .map(|m| (0..n).map(|j| aj.b[(m, j)] * y[j]).sum())
            .collect();
        let cov: Vec<f64> = (0..n)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += x[i] * y[j] * aj.db.get(k, j, i);
                    }
                    for m in 0..n {
                        s += x[i] * gj.gamma.get(k, i, m) * ay[m];
                    }
                }
                s
            })
            .collect();
        Ok((0..n)
            .map(|k| (0..n).map(|m| a_inv[(k, m)] * cov[m]).sum())
            .collect())
    }

    pub fn direct_connection(
        &self,
        engine: &DerivEngine,
        p: &[f64],
        x: &[f64],
        y: &[f64],
    ) -> Result<Vec<f64>> {
        let n = self.dim();
        let mj = self.pullback_metric().metric_jets(engine, p, 1)?;
        Ok((0..n)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += mj.gamma.get(k, i, j) * x[i] * y[j];
                    }
                }
                s
            })
            .collect())
    }

    /// Predicted `Rm(ĝ)(X,Y,Z,W) = Rm(g)(X,Y,AZ,AW)`.
    pub fn pullback_riemann(&self, engine: &DerivEngine, p: &[f64]) -> Result<Tensor4Value> {
        let n = self.dim();
        let gj = self.base.metric_jets(engine, p, 2)?;
        let av = self.a.value(p)?;
        let rm = gj.riemann();
        Ok(Tensor4Value::from_fn(n, |i, j, k, l| {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += rm.get(i, j, a, b) * av[(a, k)] * av[(b, l)];
                }
            }
            s
        }))
    }

    pub fn direct_riemann(&self, engine: &DerivEngine, p: &[f64]) -> Result<Tensor4Value> {
        Ok(self.pullback_metric().metric_jets(engine, p, 2)?.riemann())
    }
}

/// `e^{power * u} g` entries.
struct ScaledSym2Map {
    base: Sym2Field,
    factor: ScalarField,
    power: f64,
}

impl ScaledSym2Map {
    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        let tri = self.base.eval_ring(x)?;
        let u = self.factor.eval_ring(x)?;
        let w = u.scale(self.power).exp();
        for (o, t) in out.iter_mut().zip(&tri) {
            *o = t.mul(&w);
        }
        Ok(())
    }
    fn dims(&self) -> (usize, usize) {
        (self.base.dim(), crate::jetcalc::tri_len(self.base.dim()))
    }
}
crate::jetcalc::smooth_impl!(ScaledSym2Map);

/// `g(A., A.)` entries: `A^T g A` upper triangle.
struct PullbackSym2Map {
    base: Sym2Field,
    a: EndoField,
}

impl PullbackSym2Map {
    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        let n = self.base.dim();
        let tri = self.base.eval_ring(x)?;
        let g = tri_to_full(&tri, n);
        let a = self.a.eval_ring(x)?;
        let at = mat_transpose(&a, n);
        let m = mat_mul(&at, &mat_mul(&g, &a, n), n);
        let up = mat_upper_tri(&m, n);
        out.clone_from_slice(&up);
        Ok(())
    }
    fn dims(&self) -> (usize, usize) {
        (self.base.dim(), crate::jetcalc::tri_len(self.base.dim()))
    }
}
crate::jetcalc::smooth_impl!(PullbackSym2Map);

/// `Id + B` as a field (the pullback operator paired with a shape operator).
pub struct PlusIdentityMap {
    inner: EndoField,
}

impl PlusIdentityMap {
    pub fn field(inner: EndoField) -> EndoField {
        let n = inner.dim();
        EndoField::new(n, Arc::new(PlusIdentityMap { inner }))
    }
    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        let n = self.inner.dim();
        let b = self.inner.eval_ring(x)?;
        out.clone_from_slice(&b);
        for i in 0..n {
            out[i * n + i] = out[i * n + i].add(&x[0].lift(1.0));
        }
        Ok(())
    }
    fn dims(&self) -> (usize, usize) {
        let n = self.inner.dim();
        (n, n * n)
    }
}
crate::jetcalc::smooth_impl!(PlusIdentityMap);

/// Inverse of an endomorphism field, as a field.
pub struct InverseEndoMap {
    pub inner: EndoField,
}

impl InverseEndoMap {
    pub fn field(inner: EndoField) -> EndoField {
        let n = inner.dim();
        EndoField::new(n, Arc::new(InverseEndoMap { inner }))
    }
    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        let n = self.inner.dim();
        let a = self.inner.eval_ring(x)?;
        let inv = mat_inverse(&a, n, "endomorphism field")?;
        out.clone_from_slice(&inv);
        Ok(())
    }
    fn dims(&self) -> (usize, usize) {
        let n = self.inner.dim();
        (n, n * n)
    }
}
crate::jetcalc::smooth_impl!(InverseEndoMap);
