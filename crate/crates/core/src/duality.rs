//! Integrability residuals for hypersurface data and its boundary dual.
//!
//! A finite-side pair `(g, B)` satisfies
//! `Rm = -1/2 g owedge g + 1/2 II owedge II` and `d^∇B = 0` exactly when it
//! comes from an immersion into hyperbolic space. The algebraic dual
//! `ĝ = g(Id+B, Id+B)`, `B̂ = (Id+B)^{-1}(Id-B)` satisfies the corresponding
//! system at infinity, `Rm(ĝ) = -1/2 ĝ owedge ÎI` and `d^∇̂B̂ = 0`. This
//! module provides both residual pipelines, the dualization maps, the scaling
//! family and the trace identity.

use crate::dense::T3;
use crate::jetcalc::{DerivEngine, EndoField, RingEval, Sym2Field, Sym2Jets};
use crate::multilinear::{
    is_self_adjoint, kulkarni_nomizu, EndoValue, MetricValue, Sym2Value, Tensor4Value,
};
use crate::ringmat::{
    mat_identity, mat_inverse, mat_mul, mat_scale, mat_sub, mat_symmetrize, mat_transpose,
    mat_upper_tri, tri_to_full,
};
use crate::{Error, Result};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Finite,
    Infinity,
}

impl Side {
    pub fn name(&self) -> &'static str {
        match self {
            Side::Finite => "finite",
            Side::Infinity => "infinity",
        }
    }
}

/// A metric and shape-operator pair on a chart.
#[derive(Clone)]
pub struct DualityPair {
    n: usize,
    pub g: Sym2Field,
    pub b: EndoField,
    pub side: Side,
}

/// Sampled diagnostics for the pair invariants.
#[derive(Debug, Clone)]
pub struct PairDiagnostics {
    /// Largest relative asymmetry of `gB` over the sample points.
    pub self_adjoint_defect: f64,
    /// Smallest `|1 + eigenvalue(B)|`; dualization degenerates at zero.
    pub dual_margin: f64,
    /// Largest asymmetry discarded when symmetrizing the dual `ÎI`.
    pub dual_symmetrization: f64,
}

impl DualityPair {
    pub fn new(g: Sym2Field, b: EndoField, side: Side) -> Result<Self> {
        if g.dim() != b.dim() {
            return Err(Error::DimMismatch { expected: g.dim(), got: b.dim() });
        }
        Ok(DualityPair { n: g.dim(), g, b, side })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `II(X,Y) = g(BX,Y)` as a field (symmetrized product).
    pub fn second_fundamental(&self) -> Sym2Field {
        Sym2Field::new(
            self.n,
            Arc::new(FundamentalMap { g: self.g.clone(), b: self.b.clone(), third: false }),
        )
    }

    /// `III(X,Y) = g(BX,BY)` as a field.
    pub fn third_fundamental(&self) -> Sym2Field {
        Sym2Field::new(
            self.n,
            Arc::new(FundamentalMap { g: self.g.clone(), b: self.b.clone(), third: true }),
        )
    }

    /// Checks self-adjointness and the distance of `B`'s spectrum from -1 at
    /// the given points.
    pub fn diagnostics(&self, points: &[Vec<f64>]) -> Result<PairDiagnostics> {
        let mut sa = 0.0f64;
        let mut margin = f64::INFINITY;
        let mut sym = 0.0f64;
        for p in points {
            let g = MetricValue::new(self.g.sym2_value(p)?)?;
            let bm = self.b.value(p)?;
            let gb = g.sym().matrix() * &bm;
            let scale = gb.abs().max().max(1.0);
            let (_, asym) = Sym2Value::symmetrized(&gb);
            sa = sa.max(asym / scale);
            let b = EndoValue::from_matrix(bm);
            for ev in b.eigenvalues_self_adjoint(&g) {
                margin = margin.min((1.0 + ev).abs());
            }
            // asymmetry the dual construction would discard
            let ipb = nalgebra::DMatrix::identity(self.n, self.n) + b.matrix();
            if let Some(inv) = ipb.clone().try_inverse() {
                let bhat_raw = inv * (nalgebra::DMatrix::identity(self.n, self.n) - b.matrix());
                let ghat = ipb.transpose() * g.sym().matrix() * &ipb;
                let ii_raw = ghat * bhat_raw;
                let (_, a) = Sym2Value::symmetrized(&ii_raw);
                sym = sym.max(a / ii_raw.abs().max().max(1.0));
            }
        }
        Ok(PairDiagnostics {
            self_adjoint_defect: sa,
            dual_margin: margin,
            dual_symmetrization: sym,
        })
    }

    /// `(ĝ, B̂) = (g(Id+B, Id+B), (Id+B)^{-1}(Id-B))`, with `B̂` symmetrized
    /// with respect to `ĝ`.
    pub fn dualize(&self) -> Result<DualityPair> {
        if self.side != Side::Finite {
            return Err(Error::Schema("dualize expects a finite-side pair".into()));
        }
        Ok(DualityPair {
            n: self.n,
            g: Sym2Field::new(
                self.n,
                Arc::new(DualMetricMap { g: self.g.clone(), b: self.b.clone(), undual: false }),
            ),
            b: EndoField::new(
                self.n,
                Arc::new(DualShapeMap { g: self.g.clone(), b: self.b.clone(), undual: false }),
            ),
            side: Side::Infinity,
        })
    }

    /// Inverse transformation: `g = 1/4 ĝ(Id+B̂, Id+B̂)`,
    /// `B = (Id+B̂)^{-1}(Id-B̂)`.
    pub fn undualize(&self) -> Result<DualityPair> {
        if self.side != Side::Infinity {
            return Err(Error::Schema("undualize expects an infinity-side pair".into()));
        }
        Ok(DualityPair {
            n: self.n,
            g: Sym2Field::new(
                self.n,
                Arc::new(DualMetricMap { g: self.g.clone(), b: self.b.clone(), undual: true }),
            ),
            b: EndoField::new(
                self.n,
                Arc::new(DualShapeMap { g: self.g.clone(), b: self.b.clone(), undual: true }),
            ),
            side: Side::Finite,
        })
    }

    /// The scaling family `(e^{2t} ĝ, e^{-2t} B̂)` on the infinity side.
    pub fn scale_family(&self, t: f64) -> Result<DualityPair> {
        if self.side != Side::Infinity {
            return Err(Error::Schema("scale_family expects an infinity-side pair".into()));
        }
        Ok(DualityPair {
            n: self.n,
            g: Sym2Field::new(
                self.n,
                Arc::new(ScaleTriMap { inner: self.g.clone(), c: (2.0 * t).exp() }),
            ),
            b: EndoField::new(
                self.n,
                Arc::new(ScaleEndoMap { inner: self.b.clone(), c: (-2.0 * t).exp() }),
            ),
            side: Side::Infinity,
        })
    }

    /// Gauss residual tensor at `p` for the pair's side, together with its
    /// relative Frobenius norm (normalized by the sizes of the combined
    /// terms).
    pub fn gauss_residual(&self, engine: &DerivEngine, p: &[f64]) -> Result<(Tensor4Value, f64)> {
        let mj = self.g.metric_jets(engine, p, 2)?;
        let rm = mj.riemann();
        let g_sym = Sym2Value::try_from_matrix(mj.g.clone()).expect("metric symmetric");
        let bv = self.b.value(p)?;
        let ii_raw = &mj.g * &bv;
        let (ii, _) = Sym2Value::symmetrized(&ii_raw);
        let (residual, denom) = match self.side {
            Side::Finite => {
                // Rm + 1/2 g∧g - 1/2 II∧II
                let gg = kulkarni_nomizu(&g_sym, &g_sym)?;
                let ii2 = kulkarni_nomizu(&ii, &ii)?;
                let r = rm.add(&gg.scale(0.5)).sub(&ii2.scale(0.5));
                let d = 1.0 + rm.frobenius() + 0.5 * gg.frobenius() + 0.5 * ii2.frobenius();
                (r, d)
            }
            Side::Infinity => {
                // Rm + 1/2 ĝ∧ÎI
                let gii = kulkarni_nomizu(&g_sym, &ii)?;
                let r = rm.add(&gii.scale(0.5));
                let d = 1.0 + rm.frobenius() + 0.5 * gii.frobenius();
                (r, d)
            }
        };
        let rel = residual.frobenius() / denom;
        Ok((residual, rel))
    }

    /// Codazzi residual `d^∇B` at `p` with its relative Frobenius norm
    /// (normalized by the full covariant derivative).
    pub fn codazzi_residual(&self, engine: &DerivEngine, p: &[f64]) -> Result<(T3, f64)> {
        let mj = self.g.metric_jets(engine, p, 1)?;
        let bj = self.b.endo_jets(engine, p)?;
        let full = mj.nabla_endo(&bj);
        let d = mj.dnabla_endo(&bj);
        let rel = d.frobenius() / (1.0 + full.frobenius());
        Ok((d, rel))
    }

    /// Both residuals of the side's system at `p` (Gauss tensor, Codazzi
    /// 3-tensor, and their relative norms).
    pub fn residuals(&self, engine: &DerivEngine, p: &[f64]) -> Result<(Tensor4Value, T3, f64, f64)> {
        let (gr, grel) = self.gauss_residual(engine, p)?;
        let (cr, crel) = self.codazzi_residual(engine, p)?;
        Ok((gr, cr, grel, crel))
    }

    /// Residuals of the finite-side system `Rm + 1/2 g∧g - 1/2 II∧II` and
    /// `d^∇B`.
    pub fn gc_residual(&self, engine: &DerivEngine, p: &[f64]) -> Result<(Tensor4Value, T3)> {
        if self.side != Side::Finite {
            return Err(Error::Schema("gc_residual expects a finite-side pair".into()));
        }
        let (gr, cr, _, _) = self.residuals(engine, p)?;
        Ok((gr, cr))
    }

    /// Residuals of the boundary system `Rm + 1/2 ĝ∧ÎI` and `d^∇̂B̂`.
    pub fn gcinf_residual(&self, engine: &DerivEngine, p: &[f64]) -> Result<(Tensor4Value, T3)> {
        if self.side != Side::Infinity {
            return Err(Error::Schema("gcinf_residual expects an infinity-side pair".into()));
        }
        let (gr, cr, _, _) = self.residuals(engine, p)?;
        Ok((gr, cr))
    }

    /// `tr(B̂) + S(ĝ)/(n-1)`; vanishes for solutions of the Gauss equation
    /// at infinity.
    pub fn trace_scalar_check(&self, engine: &DerivEngine, p: &[f64]) -> Result<f64> {
        if self.side != Side::Infinity {
            return Err(Error::Schema("trace_scalar_check expects the infinity side".into()));
        }
        let mj = self.g.metric_jets(engine, p, 2)?;
        let s = mj.scalar();
        let tr = self.b.value(p)?.trace();
        Ok(tr + s / (self.n as f64 - 1.0))
    }

    /// Transport identity for the Codazzi tensors:
    /// `d^∇̂B̂ = -(Id+B)^{-1} d^∇B`. Returns the relative defect at `p`.
    pub fn codazzi_transport_defect(&self, engine: &DerivEngine, p: &[f64]) -> Result<f64> {
        if self.side != Side::Finite {
            return Err(Error::Schema("codazzi transport starts from the finite side".into()));
        }
        let n = self.n;
        let dual = self.dualize()?;
        let (lhs, _) = dual.codazzi_residual(engine, p)?;
        let (rhs_raw, _) = self.codazzi_residual(engine, p)?;
        let bv = self.b.value(p)?;
        let ipb_inv = (nalgebra::DMatrix::identity(n, n) + bv)
            .try_inverse()
            .ok_or(Error::DualDegenerate { margin: 0.0 })?;
        let mut defect = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut rhs = 0.0;
                    for m in 0..n {
                        rhs -= ipb_inv[(k, m)] * rhs_raw.get(m, i, j);
                    }
                    scale = scale.max(lhs.get(k, i, j).abs()).max(rhs.abs());
                    defect = defect.max((lhs.get(k, i, j) - rhs).abs());
                }
            }
        }
        Ok(defect / (1.0 + scale))
    }

    /// Defect of the parallel-metric expansion
    /// `1/4 e^{2t} ĝ + 1/2 ÎI + 1/4 e^{-2t} ÎII = g(A_t ., A_t .)` with
    /// `A_t = cosh(t) Id + sinh(t) B`, evaluated on values at `p`.
    pub fn expansion_defect(&self, p: &[f64], t: f64) -> Result<f64> {
        if self.side != Side::Finite {
            return Err(Error::Schema("expansion check starts from the finite side".into()));
        }
        let n = self.n;
        let g = self.g.value(p)?;
        let b = self.b.value(p)?;
        let id = nalgebra::DMatrix::identity(n, n);
        let ii = 0.5 * (&g * &b + (&g * &b).transpose());
        let iii = b.transpose() * &g * &b;
        let ghat = &g + 2.0 * &ii + &iii;
        let iihat = &g - &iii;
        let iiihat = &g - 2.0 * &ii + &iii;
        let lhs = 0.25 * (2.0 * t).exp() * ghat
            + 0.5 * iihat
            + 0.25 * (-2.0 * t).exp() * iiihat;
        let at = &id * t.cosh() + &b * t.sinh();
        let rhs = at.transpose() * &g * at;
        let scale = rhs.abs().max().max(1.0);
        Ok((lhs - rhs).abs().max() / scale)
    }
}

/// `II` (or `III`) upper-triangle entries.
struct FundamentalMap {
    g: Sym2Field,
    b: EndoField,
    third: bool,
}

impl FundamentalMap {
    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        let n = self.g.dim();
        let tri = self.g.eval_ring(x)?;
        let g = tri_to_full(&tri, n);
        let b = self.b.eval_ring(x)?;
        let m = if self.third {
            mat_mul(&mat_transpose(&b, n), &mat_mul(&g, &b, n), n)
        } else {
            mat_symmetrize(&mat_mul(&g, &b, n), n)
        };
        out.clone_from_slice(&mat_upper_tri(&m, n));
        Ok(())
    }
    fn dims(&self) -> (usize, usize) {
        let n = self.g.dim();
        (n, crate::jetcalc::tri_len(n))
    }
}
crate::jetcalc::smooth_impl!(FundamentalMap);

/// Fails with the measured margin when `Id + B` has an eigenvalue within
/// 1e-6 of zero; such points are skipped, not fatal.
fn check_dual_margin<S: crate::jet::Ring>(ipb: &[S], n: usize) -> Result<()> {
    let vals = nalgebra::DMatrix::from_fn(n, n, |i, j| ipb[i * n + j].re());
    let margin = vals
        .complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(f64::INFINITY, f64::min);
    if margin < 1e-6 {
        return Err(Error::DualDegenerate { margin });
    }
    Ok(())
}

/// Metric of the dual pair: `(Id+B)^T g (Id+B)` (or the inverse direction
/// with the extra factor 1/4).
struct DualMetricMap {
    g: Sym2Field,
    b: EndoField,
    undual: bool,
}

impl DualMetricMap {
    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        let n = self.g.dim();
        let tri = self.g.eval_ring(x)?;
        let g = tri_to_full(&tri, n);
        let b = self.b.eval_ring(x)?;
        let ipb = mat_add_identity(&b, n);
        check_dual_margin(&ipb, n)?;
        let m = mat_mul(&mat_transpose(&ipb, n), &mat_mul(&g, &ipb, n), n);
        let m = if self.undual { mat_scale(&m, 0.25) } else { m };
        out.clone_from_slice(&mat_upper_tri(&mat_symmetrize(&m, n), n));
        Ok(())
    }
    fn dims(&self) -> (usize, usize) {
        let n = self.g.dim();
        (n, crate::jetcalc::tri_len(n))
    }
}
crate::jetcalc::smooth_impl!(DualMetricMap);

/// Shape operator of the dual pair: `(Id+B)^{-1}(Id-B)`, symmetrized with
/// respect to the dual metric.
struct DualShapeMap {
    g: Sym2Field,
    b: EndoField,
    undual: bool,
}

impl DualShapeMap {
    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        let n = self.g.dim();
        let tri = self.g.eval_ring(x)?;
        let g = tri_to_full(&tri, n);
        let b = self.b.eval_ring(x)?;
        let ipb = mat_add_identity(&b, n);
        check_dual_margin(&ipb, n)?;
        let imb = mat_sub(&mat_identity(&b[0], n), &b);
        let ipb_inv = mat_inverse(&ipb, n, "Id + B")?;
        let braw = mat_mul(&ipb_inv, &imb, n);
        let ghat = mat_mul(&mat_transpose(&ipb, n), &mat_mul(&g, &ipb, n), n);
        let ghat = if self.undual { mat_scale(&ghat, 0.25) } else { ghat };
        let ii = mat_symmetrize(&mat_mul(&ghat, &braw, n), n);
        let ghat_inv = mat_inverse(&ghat, n, "dual metric")?;
        out.clone_from_slice(&mat_mul(&ghat_inv, &ii, n));
        Ok(())
    }
    fn dims(&self) -> (usize, usize) {
        let n = self.g.dim();
        (n, n * n)
    }
}
crate::jetcalc::smooth_impl!(DualShapeMap);

fn mat_add_identity<S: crate::jet::Ring>(b: &[S], n: usize) -> Vec<S> {
    let mut m = b.to_vec();
    for i in 0..n {
        m[i * n + i] = m[i * n + i].add(&b[0].lift(1.0));
    }
    m
}

struct ScaleTriMap {
    inner: Sym2Field,
    c: f64,
}

impl ScaleTriMap {
    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        let tri = self.inner.eval_ring(x)?;
        for (o, t) in out.iter_mut().zip(&tri) {
            *o = t.scale(self.c);
        }
        Ok(())
    }
    fn dims(&self) -> (usize, usize) {
        (self.inner.dim(), crate::jetcalc::tri_len(self.inner.dim()))
    }
}
crate::jetcalc::smooth_impl!(ScaleTriMap);

struct ScaleEndoMap {
    inner: EndoField,
    c: f64,
}

impl ScaleEndoMap {
    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        let e = self.inner.eval_ring(x)?;
        for (o, t) in out.iter_mut().zip(&e) {
            *o = t.scale(self.c);
        }
        Ok(())
    }
    fn dims(&self) -> (usize, usize) {
        (self.inner.dim(), self.inner.dim() * self.inner.dim())
    }
}
crate::jetcalc::smooth_impl!(ScaleEndoMap);

/// Max-abs defect of `(Id + B̂)(Id + B) = 2 Id` at `p`.
pub fn composition_identity_defect(
    finite: &DualityPair,
    dual: &DualityPair,
    p: &[f64],
) -> Result<f64> {
    let n = finite.dim();
    let id = nalgebra::DMatrix::<f64>::identity(n, n);
    let b = finite.b.value(p)?;
    let bh = dual.b.value(p)?;
    let prod = (&id + bh) * (&id + b);
    Ok((prod - 2.0 * id).abs().max())
}

/// Max-abs difference between two pairs' fields at `p` (round-trip checks).
pub fn pair_difference(a: &DualityPair, b: &DualityPair, p: &[f64]) -> Result<f64> {
    let ga = a.g.value(p)?;
    let gb = b.g.value(p)?;
    let ba = a.b.value(p)?;
    let bb = b.b.value(p)?;
    let scale = ga.abs().max().max(ba.abs().max()).max(1.0);
    Ok(((ga - gb).abs().max().max((ba - bb).abs().max())) / scale)
}

/// Self-adjointness check of the pair's `B` against its own metric at `p`.
pub fn pair_self_adjoint(pair: &DualityPair, p: &[f64], tol: f64) -> Result<bool> {
    let g = MetricValue::new(pair.g.sym2_value(p)?)?;
    let b = EndoValue::from_matrix(pair.b.value(p)?);
    Ok(is_self_adjoint(&g, &b, tol))
}

/// `d^∇T` of a symmetric field against an explicit metric field (helper for
/// residual pipelines shared with the conformal-flatness module).
pub fn dnabla_against(
    g: &Sym2Field,
    t: &Sym2Field,
    engine: &DerivEngine,
    p: &[f64],
) -> Result<T3> {
    let mj = g.metric_jets(engine, p, 1)?;
    let tj = Sym2Jets::from_entries(t.dim(), &t.entry_jets(engine, p, 1)?);
    Ok(mj.dnabla_sym2(&tj))
}

/// `B = g^{-1} T` as a field; the canonical way to build a shape-operator
/// field that is self-adjoint against `g` by construction.
pub fn raised_endo(g: &Sym2Field, t: &Sym2Field) -> Result<EndoField> {
    if g.dim() != t.dim() {
        return Err(Error::DimMismatch { expected: g.dim(), got: t.dim() });
    }
    Ok(EndoField::new(
        g.dim(),
        Arc::new(RaisedEndoMap { g: g.clone(), t: t.clone() }),
    ))
}

struct RaisedEndoMap {
    g: Sym2Field,
    t: Sym2Field,
}

impl RaisedEndoMap {
    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        let n = self.g.dim();
        let g = tri_to_full(&self.g.eval_ring(x)?, n);
        let t = tri_to_full(&self.t.eval_ring(x)?, n);
        let ginv = mat_inverse(&g, n, "metric field")?;
        out.clone_from_slice(&mat_mul(&ginv, &t, n));
        Ok(())
    }
    fn dims(&self) -> (usize, usize) {
        let n = self.g.dim();
        (n, n * n)
    }
}
crate::jetcalc::smooth_impl!(RaisedEndoMap);
