//! The hyperboloid model of hyperbolic space inside Minkowski space, and
//! immersed hypersurfaces with their induced data.
//!
//! Ambient coordinates are indexed 0..=n+1 with the LAST coordinate timelike:
//! `<x,y> = sum_{a<=n} x_a y_a - x_{n+1} y_{n+1}`. The hyperboloid is
//! `<p,p> = -1` with positive last coordinate. Shape operators are taken
//! relative to the declared normal `N`, while parallel surfaces and the
//! boundary map flow in the `-N` direction.

use crate::jet::{Jet, Ring};
use crate::jetcalc::{DerivEngine, EndoField, RingEval, SmoothMap, Sym2Field};
use crate::multilinear::{is_self_adjoint, EndoValue, MetricValue, Sym2Value};
use crate::ringmat::mat_inverse;
use crate::{Error, Result};
use nalgebra::DMatrix;
use std::sync::Arc;

/// Minkowski inner product, timelike-last.
pub fn minkowski_inner(x: &[f64], y: &[f64]) -> f64 {
    mink_ring(x, y)
}

pub(crate) fn mink_ring<S: Ring>(x: &[S], y: &[S]) -> S {
    let m = x.len();
    let mut s = x[0].lift(0.0);
    for a in 0..m - 1 {
        s = s.add(&x[a].mul(&y[a]));
    }
    s.sub(&x[m - 1].mul(&y[m - 1]))
}

fn euclid_dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// A point on the upper hyperboloid with a unit tangent vector.
#[derive(Debug, Clone)]
pub struct UnitTangent {
    pub p: Vec<f64>,
    pub v: Vec<f64>,
}

impl UnitTangent {
    pub fn new(p: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let m = p.len();
        if v.len() != m {
            return Err(Error::DimMismatch { expected: m, got: v.len() });
        }
        let pp = minkowski_inner(&p, &p);
        let vv = minkowski_inner(&v, &v);
        let pv = minkowski_inner(&p, &v);
        if (pp + 1.0).abs() > 1e-12 || p[m - 1] <= 0.0 {
            return Err(Error::InvalidTangent(format!(
                "base point not on the upper hyperboloid: <p,p> = {pp}"
            )));
        }
        if (vv - 1.0).abs() > 1e-12 || pv.abs() > 1e-12 {
            return Err(Error::InvalidTangent(format!(
                "vector not unit tangent: <v,v> = {vv}, <p,v> = {pv}"
            )));
        }
        Ok(UnitTangent { p, v })
    }

    pub fn ambient_dim(&self) -> usize {
        self.p.len()
    }
}

/// `G^t(p,v) = cosh(t) p + sinh(t) v`.
pub fn geodesic_flow(ut: &UnitTangent, t: f64) -> Vec<f64> {
    let (c, s) = (t.cosh(), t.sinh());
    ut.p.iter().zip(&ut.v).map(|(p, v)| c * p + s * v).collect()
}

/// Derivative of the geodesic flow on a split tangent `(x, y)`:
/// `cosh(t) x + sinh(t) y + sinh(t) <x,v> p`.
pub fn flow_derivative(ut: &UnitTangent, t: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_split_tangent(ut, x, y)?;
    let (c, s) = (t.cosh(), t.sinh());
    let xv = minkowski_inner(x, &ut.v);
    Ok((0..x.len())
        .map(|a| c * x[a] + s * y[a] + s * xv * ut.p[a])
        .collect())
}

fn check_split_tangent(ut: &UnitTangent, x: &[f64], y: &[f64]) -> Result<()> {
    let xp = minkowski_inner(x, &ut.p);
    let yp = minkowski_inner(y, &ut.p);
    let yv = minkowski_inner(y, &ut.v);
    if xp.abs() > 1e-10 || yp.abs() > 1e-10 || yv.abs() > 1e-10 {
        return Err(Error::InvalidTangent(format!(
            "not a split tangent: <x,p> = {xp}, <y,p> = {yp}, <y,v> = {yv}"
        )));
    }
    Ok(())
}

/// Stereographic projection onto the Poincare ball: returns the n+1 spatial
/// components of `(p + <p,e_T> e_T) / (1 - <p,e_T>)`.
pub fn stereographic(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let tau = p[m - 1];
    p[..m - 1].iter().map(|y| y / (1.0 + tau)).collect()
}

/// Ideal endpoint of the geodesic from `(p, v)`: the unit vector
/// `-(p+v)/<p+v,e_T> - e_T`, returned as its n+1 spatial components.
pub fn gauss_map(ut: &UnitTangent) -> Vec<f64> {
    let m = ut.ambient_dim();
    let w: Vec<f64> = ut.p.iter().zip(&ut.v).map(|(p, v)| p + v).collect();
    let wt = w[m - 1];
    w[..m - 1].iter().map(|a| a / wt).collect()
}

/// Derivative of the Gauss map on a split tangent, spatial components.
pub fn gauss_map_derivative(ut: &UnitTangent, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_split_tangent(ut, x, y)?;
    let m = ut.ambient_dim();
    let xv = minkowski_inner(x, &ut.v);
    let z: Vec<f64> = (0..m).map(|a| x[a] + y[a] + xv * ut.p[a]).collect();
    let w: Vec<f64> = ut.p.iter().zip(&ut.v).map(|(p, v)| p + v).collect();
    // <w, e_T> = -w_T, <z, e_T> = -z_T
    let we = -w[m - 1];
    let ze = -z[m - 1];
    Ok((0..m - 1)
        .map(|a| (ze / (we * we)) * w[a] - z[a] / we)
        .collect())
}

/// An immersed hypersurface in the hyperboloid with a unit normal field.
#[derive(Clone)]
pub struct ImmersionField {
    n: usize,
    f: Arc<dyn SmoothMap>,
    normal: Arc<dyn SmoothMap>,
}

impl ImmersionField {
    /// `normal = None` derives the unit normal from `f` by orthogonality.
    pub fn new(n: usize, f: Arc<dyn SmoothMap>, normal: Option<Arc<dyn SmoothMap>>) -> Self {
        debug_assert_eq!(f.dim_in(), n);
        debug_assert_eq!(f.dim_out(), n + 2);
        let normal = normal.unwrap_or_else(|| {
            Arc::new(CrossProductNormal { n, f: f.clone() }) as Arc<dyn SmoothMap>
        });
        ImmersionField { n, f, normal }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn f_map(&self) -> &Arc<dyn SmoothMap> {
        &self.f
    }

    pub fn normal_map(&self) -> &Arc<dyn SmoothMap> {
        &self.normal
    }

    pub fn position(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n + 2];
        self.f.eval_f64(x, &mut out)?;
        Ok(out)
    }

    pub fn normal_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n + 2];
        self.normal.eval_f64(x, &mut out)?;
        Ok(out)
    }

    /// Checks the hyperboloid and unit-normal constraints at one point.
    pub fn check_constraints(&self, x: &[f64]) -> Result<()> {
        let n = self.n;
        let engine = DerivEngine::ad();
        let fj = engine.jets(self.f.as_ref(), x, 1)?;
        let nj = engine.jets(self.normal.as_ref(), x, 0)?;
        let fv: Vec<f64> = fj.iter().map(Jet::value).collect();
        let nv: Vec<f64> = nj.iter().map(Jet::value).collect();
        let fail = |msg: String| Err(Error::Constraint { point: x.to_vec(), msg });
        let ff = minkowski_inner(&fv, &fv);
        if (ff + 1.0).abs() > 1e-10 {
            return fail(format!("<f,f> = {ff}, expected -1"));
        }
        if fv[n + 1] <= 0.0 {
            return fail("immersion leaves the upper hyperboloid".into());
        }
        let nn = minkowski_inner(&nv, &nv);
        let nf = minkowski_inner(&nv, &fv);
        if (nn - 1.0).abs() > 1e-10 || nf.abs() > 1e-10 {
            return fail(format!(
                "normal not unit or not orthogonal: <N,N> = {nn}, <N,f> = {nf}"
            ));
        }
        for i in 0..n {
            let dfi: Vec<f64> = fj.iter().map(|j| j.grad(i)).collect();
            let nd = minkowski_inner(&nv, &dfi);
            if nd.abs() > 1e-10 {
                return fail(format!("normal not orthogonal to df(e_{i}): {nd}"));
            }
        }
        // full rank via the induced metric
        let (g, _) = self.induced_data(&engine, x)?;
        if g.min_eigenvalue() <= 1e-12 {
            return fail(format!(
                "df rank deficient: induced metric eigenvalue {}",
                g.min_eigenvalue()
            ));
        }
        Ok(())
    }

    /// Pointwise induced metric and shape operator (relative to the declared
    /// normal): `g_ij = <∂_i f, ∂_j f>` and `df(B u) = -∂_u N` projected
    /// tangentially.
    pub fn induced_data(
        &self,
        engine: &DerivEngine,
        x: &[f64],
    ) -> Result<(MetricValue, EndoValue)> {
        let n = self.n;
        let m = n + 2;
        let fj = engine.jets(self.f.as_ref(), x, 1)?;
        let nj = engine.jets(self.normal.as_ref(), x, 1)?;
        let mut df = vec![vec![0.0; m]; n];
        let mut dn = vec![vec![0.0; m]; n];
        for i in 0..n {
            for a in 0..m {
                df[i][a] = fj[a].grad(i);
                dn[i][a] = nj[a].grad(i);
            }
        }
        let g = MetricValue::new(Sym2Value::from_fn_sym(n, |i, j| {
            minkowski_inner(&df[i], &df[j])
        }))?;
        let b = EndoValue::from_fn(n, |k, i| {
            let mut s = 0.0;
            for j in 0..n {
                s -= g.inverse()[(k, j)] * minkowski_inner(&df[j], &dn[i]);
            }
            s
        });
        if !is_self_adjoint(&g, &b, 1e-9) {
            return Err(Error::Constraint {
                point: x.to_vec(),
                msg: "induced shape operator is not self-adjoint".into(),
            });
        }
        Ok((g, b))
    }

    /// The induced metric as a field.
    pub fn induced_metric(&self) -> Sym2Field {
        Sym2Field::new(self.n, Arc::new(InducedMetricMap { imm: self.clone() }))
    }

    /// The shape operator as a field.
    pub fn induced_shape(&self) -> EndoField {
        EndoField::new(self.n, Arc::new(InducedShapeMap { imm: self.clone() }))
    }

    /// Flows each point for time `t` along `-N` and transports the normal:
    /// `f_t = cosh(t) f - sinh(t) N`, `N_t = cosh(t) N - sinh(t) f`.
    pub fn parallel(&self, t: f64) -> ImmersionField {
        ImmersionField {
            n: self.n,
            f: Arc::new(FlowCombination {
                f: self.f.clone(),
                normal: self.normal.clone(),
                cf: t.cosh(),
                cn: -t.sinh(),
            }),
            normal: Arc::new(FlowCombination {
                f: self.normal.clone(),
                normal: self.f.clone(),
                cf: t.cosh(),
                cn: -t.sinh(),
            }),
        }
    }

    /// The boundary map `f_inf = GaussMap(f, -N)`: spatial components of
    /// `(f - N) / (f - N)_T`.
    pub fn boundary_map(&self) -> Arc<dyn SmoothMap> {
        Arc::new(BoundaryMap { f: self.f.clone(), normal: self.normal.clone() })
    }

    /// Relative deviation between the pullback of the round metric under the
    /// boundary map and `ĝ / <f - N, e_T>^2` with `ĝ = g + 2 II + III`.
    pub fn metric_at_infinity_check(&self, engine: &DerivEngine, x: &[f64]) -> Result<f64> {
        let n = self.n;
        let m = n + 2;
        let bmap = self.boundary_map();
        let bj = engine.jets(bmap.as_ref(), x, 1)?;
        let mut dfi = vec![vec![0.0; m - 1]; n];
        for i in 0..n {
            for a in 0..m - 1 {
                dfi[i][a] = bj[a].grad(i);
            }
        }
        let pullback = DMatrix::from_fn(n, n, |i, j| euclid_dot(&dfi[i], &dfi[j]));

        let (g, b) = self.induced_data(engine, x)?;
        let gm = g.sym().matrix();
        let bm = b.matrix();
        let ii = gm * bm;
        let iii = bm.transpose() * gm * bm;
        let ghat = gm + 2.0 * &ii + iii;

        let fv = self.position(x)?;
        let nv = self.normal_at(x)?;
        let w_t = fv[m - 1] - nv[m - 1];
        let scaled = ghat / (w_t * w_t);

        let diff = (&pullback - &scaled).abs().max();
        let scale = pullback.abs().max().max(1e-30);
        Ok(diff / scale)
    }
}

/// Unit normal derived from `f` by Minkowski orthogonality to `span{∂f, f}`
/// (a generalized cross product of the rows). Jet evaluation re-seeds `f` one
/// order higher, so inputs must be chart seeds.
struct CrossProductNormal {
    n: usize,
    f: Arc<dyn SmoothMap>,
}

impl CrossProductNormal {
    fn eval_with_f_jets(&self, fj: &[Jet], out: &mut [Jet]) {
        let n = self.n;
        let m = n + 2;
        // rows: ∂_1 f .. ∂_n f, f
        let mut rows: Vec<Vec<Jet>> = Vec::with_capacity(n + 1);
        for i in 0..n {
            rows.push(fj.iter().map(|j| j.partial(i)).collect());
        }
        rows.push(fj.to_vec());
        // cofactors along the deleted column, with the Minkowski sign flip on
        // the timelike slot
        let mut npre: Vec<Jet> = Vec::with_capacity(m);
        for a in 0..m {
            let mut minor: Vec<Jet> = Vec::with_capacity((m - 1) * (m - 1));
            for row in &rows {
                for (c, v) in row.iter().enumerate() {
                    if c != a {
                        minor.push(v.clone());
                    }
                }
            }
            let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
            let c = crate::ringmat::mat_det(&minor, m - 1).scale(sign);
            npre.push(if a == m - 1 { c.neg() } else { c });
        }
        let norm2 = mink_ring(&npre, &npre);
        let inv_norm = norm2.sqrt().recip();
        for (o, v) in out.iter_mut().zip(&npre) {
            *o = v.mul(&inv_norm);
        }
    }
}

impl SmoothMap for CrossProductNormal {
    fn dim_in(&self) -> usize {
        self.n
    }
    fn dim_out(&self) -> usize {
        self.n + 2
    }
    fn eval_f64(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let engine = DerivEngine::ad();
        let fj = engine.jets(self.f.as_ref(), x, 1)?;
        let mut jets = vec![Jet::constant(0.0, self.n, 0); self.n + 2];
        self.eval_with_f_jets(&fj, &mut jets);
        for (o, j) in out.iter_mut().zip(&jets) {
            *o = j.value();
        }
        Ok(())
    }
    fn eval_jet(&self, x: &[Jet], out: &mut [Jet]) -> Result<()> {
        let order = x[0].order();
        let n = self.n;
        let vals: Vec<f64> = x.iter().map(Jet::value).collect();
        let seeds: Vec<Jet> = (0..n)
            .map(|i| Jet::variable(vals[i], i, n, (order + 1).min(crate::jet::MAX_ORDER)))
            .collect();
        let mut fj = vec![seeds[0].lift(0.0); n + 2];
        self.f.eval_jet(&seeds, &mut fj)?;
        self.eval_with_f_jets(&fj, out);
        Ok(())
    }
}

/// Induced metric entries `<∂_i f, ∂_j f>` as a field. Jet inputs must be
/// chart seeds; evaluation re-seeds `f` one order higher.
struct InducedMetricMap {
    imm: ImmersionField,
}

impl SmoothMap for InducedMetricMap {
    fn dim_in(&self) -> usize {
        self.imm.n
    }
    fn dim_out(&self) -> usize {
        crate::jetcalc::tri_len(self.imm.n)
    }
    fn eval_f64(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.imm.n;
        let engine = DerivEngine::ad();
        let fj = engine.jets(self.imm.f.as_ref(), x, 1)?;
        let mut idx = 0;
        for i in 0..n {
            let dfi: Vec<f64> = fj.iter().map(|j| j.grad(i)).collect();
            for j in i..n {
                let dfj: Vec<f64> = fj.iter().map(|jj| jj.grad(j)).collect();
                out[idx] = minkowski_inner(&dfi, &dfj);
                idx += 1;
            }
        }
        Ok(())
    }
    fn eval_jet(&self, x: &[Jet], out: &mut [Jet]) -> Result<()> {
        let n = self.imm.n;
        let order = x[0].order();
        let vals: Vec<f64> = x.iter().map(Jet::value).collect();
        let seeds: Vec<Jet> = (0..n)
            .map(|i| Jet::variable(vals[i], i, n, (order + 1).min(crate::jet::MAX_ORDER)))
            .collect();
        let mut fj = vec![seeds[0].lift(0.0); n + 2];
        self.imm.f.eval_jet(&seeds, &mut fj)?;
        let df: Vec<Vec<Jet>> = (0..n)
            .map(|i| fj.iter().map(|j| j.partial(i)).collect())
            .collect();
        let mut idx = 0;
        for i in 0..n {
            for j in i..n {
                out[idx] = mink_ring(&df[i], &df[j]);
                idx += 1;
            }
        }
        Ok(())
    }
}

/// Shape operator entries `B^k_i = -g^{kj} <∂_j f, ∂_i N>` as a field.
struct InducedShapeMap {
    imm: ImmersionField,
}

impl SmoothMap for InducedShapeMap {
    fn dim_in(&self) -> usize {
        self.imm.n
    }
    fn dim_out(&self) -> usize {
        self.imm.n * self.imm.n
    }
    fn eval_f64(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let engine = DerivEngine::ad();
        let (_, b) = self.imm.induced_data(&engine, x)?;
        let n = self.imm.n;
        for k in 0..n {
            for i in 0..n {
                out[k * n + i] = b.get(k, i);
            }
        }
        Ok(())
    }
    fn eval_jet(&self, x: &[Jet], out: &mut [Jet]) -> Result<()> {
        let n = self.imm.n;
        let order = x[0].order();
        let vals: Vec<f64> = x.iter().map(Jet::value).collect();
        let f_order = (order + 2).min(crate::jet::MAX_ORDER);
        let seeds: Vec<Jet> = (0..n)
            .map(|i| Jet::variable(vals[i], i, n, f_order))
            .collect();
        let mut fj = vec![seeds[0].lift(0.0); n + 2];
        self.imm.f.eval_jet(&seeds, &mut fj)?;
        let n_seeds: Vec<Jet> = (0..n)
            .map(|i| Jet::variable(vals[i], i, n, (order + 1).min(crate::jet::MAX_ORDER)))
            .collect();
        let mut nj = vec![n_seeds[0].lift(0.0); n + 2];
        self.imm.normal.eval_jet(&n_seeds, &mut nj)?;

        let df: Vec<Vec<Jet>> = (0..n)
            .map(|i| fj.iter().map(|j| j.partial(i)).collect())
            .collect();
        let dn: Vec<Vec<Jet>> = (0..n)
            .map(|i| nj.iter().map(|j| j.partial(i)).collect())
            .collect();
        let mut g = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                g.push(mink_ring(&df[i], &df[j]));
            }
        }
        let ginv = mat_inverse(&g, n, "induced metric")?;
        for k in 0..n {
            for i in 0..n {
                let mut s = df[0][0].lift(0.0);
                for j in 0..n {
                    s = s.sub(&ginv[k * n + j].mul(&mink_ring(&df[j], &dn[i])));
                }
                out[k * n + i] = s;
            }
        }
        Ok(())
    }
}

/// `cf * f + cn * normal` componentwise (parallel-surface positions/normals).
struct FlowCombination {
    f: Arc<dyn SmoothMap>,
    normal: Arc<dyn SmoothMap>,
    cf: f64,
    cn: f64,
}

impl FlowCombination {
    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        let m = self.f.dim_out();
        let mut a = vec![x[0].lift(0.0); m];
        let mut b = vec![x[0].lift(0.0); m];
        S::eval_map(self.f.as_ref(), x, &mut a)?;
        S::eval_map(self.normal.as_ref(), x, &mut b)?;
        for i in 0..m {
            out[i] = a[i].scale(self.cf).add(&b[i].scale(self.cn));
        }
        Ok(())
    }
    fn dims(&self) -> (usize, usize) {
        (self.f.dim_in(), self.f.dim_out())
    }
}
crate::jetcalc::smooth_impl!(FlowCombination);

/// Spatial components of `(f - N) / (f - N)_T`.
struct BoundaryMap {
    f: Arc<dyn SmoothMap>,
    normal: Arc<dyn SmoothMap>,
}

impl BoundaryMap {
    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        let m = self.f.dim_out();
        let mut fv = vec![x[0].lift(0.0); m];
        let mut nv = vec![x[0].lift(0.0); m];
        S::eval_map(self.f.as_ref(), x, &mut fv)?;
        S::eval_map(self.normal.as_ref(), x, &mut nv)?;
        let w: Vec<S> = fv.iter().zip(&nv).map(|(a, b)| a.sub(b)).collect();
        let inv_t = w[m - 1].recip();
        for a in 0..m - 1 {
            out[a] = w[a].mul(&inv_t);
        }
        Ok(())
    }
    fn dims(&self) -> (usize, usize) {
        (self.f.dim_in(), self.f.dim_out() - 1)
    }
}
crate::jetcalc::smooth_impl!(BoundaryMap);

/// Residual of the ambient Gauss formula on a parametrized patch:
/// `∂_i ∂_j f - Γ^k_ij ∂_k f - II_ij N - g_ij f`, max-abs over components.
pub fn gauss_formula_defect(imm: &ImmersionField, engine: &DerivEngine, x: &[f64]) -> Result<f64> {
    let n = imm.dim();
    let m = n + 2;
    let fj = engine.jets(imm.f_map().as_ref(), x, 2)?;
    let nv = imm.normal_at(x)?;
    let fv: Vec<f64> = fj.iter().map(Jet::value).collect();
    let g_field = imm.induced_metric();
    let mj = g_field.metric_jets(engine, x, 1)?;
    let (g, b) = imm.induced_data(engine, x)?;
    let ii = g.sym().matrix() * b.matrix();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for a in 0..m {
                let mut r = fj[a].hess(i, j);
                for k in 0..n {
                    r -= mj.gamma.get(k, i, j) * fj[a].grad(k);
                }
                r -= 0.5 * (ii[(i, j)] + ii[(j, i)]) * nv[a];
                r -= g.get(i, j) * fv[a];
                worst = worst.max(r.abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetcalc::smooth_impl;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_unit_tangent(m: usize, rng: &mut ChaCha8Rng) -> UnitTangent {
        let y: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(-0.8..0.8)).collect();
        let mut p: Vec<f64> = y.clone();
        p.push((1.0 + euclid_dot(&y, &y)).sqrt());
        let w: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // project tangentially: w + <w,p> p, then normalize
        let wp = minkowski_inner(&w, &p);
        let mut v: Vec<f64> = (0..m).map(|a| w[a] + wp * p[a]).collect();
        let vn = minkowski_inner(&v, &v).sqrt();
        for c in v.iter_mut() {
            *c /= vn;
        }
        UnitTangent::new(p, v).unwrap()
    }

    /// Admissible curve through (p, v) with initial data (x, y): geodesic in
    /// the x direction carrying the projected, renormalized extension of v.
    fn curve_at(ut: &UnitTangent, x: &[f64], y: &[f64], s: f64) -> (Vec<f64>, Vec<f64>) {
        let m = ut.ambient_dim();
        let xn = minkowski_inner(x, x).sqrt();
        let gamma: Vec<f64> = if xn < 1e-14 {
            ut.p.clone()
        } else {
            (0..m)
                .map(|a| (s * xn).cosh() * ut.p[a] + (s * xn).sinh() * x[a] / xn)
                .collect()
        };
        let w: Vec<f64> = (0..m).map(|a| ut.v[a] + s * y[a]).collect();
        let wg = minkowski_inner(&w, &gamma);
        let wt: Vec<f64> = (0..m).map(|a| w[a] + wg * gamma[a]).collect();
        let norm = minkowski_inner(&wt, &wt).sqrt();
        (gamma, wt.iter().map(|c| c / norm).collect())
    }

    fn random_split_tangent(ut: &UnitTangent, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
        let m = ut.ambient_dim();
        let rx: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xp = minkowski_inner(&rx, &ut.p);
        let x: Vec<f64> = (0..m).map(|a| rx[a] + xp * ut.p[a]).collect();
        let ry: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let yp = minkowski_inner(&ry, &ut.p);
        let mut y: Vec<f64> = (0..m).map(|a| ry[a] + yp * ut.p[a]).collect();
        let yv = minkowski_inner(&y, &ut.v);
        for a in 0..m {
            y[a] -= yv * ut.v[a];
        }
        (x, y)
    }

    #[test]
    fn minkowski_signature() {
        assert_eq!(minkowski_inner(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]), 1.0);
        assert_eq!(minkowski_inner(&[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0]), -1.0);
        // null vector
        assert_eq!(minkowski_inner(&[0.0, 1.0, 1.0], &[0.0, 1.0, 1.0]), 0.0);
    }

    #[test]
    fn flow_stays_on_hyperboloid() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ut = random_unit_tangent(4, &mut rng);
        assert_eq!(geodesic_flow(&ut, 0.0), ut.p);
        for t in [-2.0, -0.5, 0.7, 2.0] {
            let q = geodesic_flow(&ut, t);
            assert_relative_eq!(minkowski_inner(&q, &q), -1.0, epsilon = 1e-12);
        }
        // apex flowing along e1: (sinh t, 0, ..., cosh t)
        let m = 4;
        let mut p = vec![0.0; m];
        p[m - 1] = 1.0;
        let mut v = vec![0.0; m];
        v[0] = 1.0;
        let ut = UnitTangent::new(p, v).unwrap();
        let q = geodesic_flow(&ut, 1.0);
        assert_relative_eq!(q[0], 1.0f64.sinh());
        assert_relative_eq!(q[m - 1], 1.0f64.cosh());
    }

    #[test]
    fn flow_derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let ut = random_unit_tangent(4, &mut rng);
            let (x, y) = random_split_tangent(&ut, &mut rng);
            let t = rng.gen_range(-1.5..1.5);
            let got = flow_derivative(&ut, t, &x, &y).unwrap();
            // t = 0 returns x
            let at0 = flow_derivative(&ut, 0.0, &x, &y).unwrap();
            for a in 0..4 {
                assert_relative_eq!(at0[a], x[a], epsilon = 1e-12);
            }
            let h = 1e-5;
            let (gp, vp) = curve_at(&ut, &x, &y, h);
            let (gm, vm) = curve_at(&ut, &x, &y, -h);
            let qp: Vec<f64> = (0..4).map(|b| t.cosh() * gp[b] + t.sinh() * vp[b]).collect();
            let qm: Vec<f64> = (0..4).map(|b| t.cosh() * gm[b] + t.sinh() * vm[b]).collect();
            for a in 0..4 {
                let fd = (qp[a] - qm[a]) / (2.0 * h);
                assert_relative_eq!(got[a], fd, epsilon = 1e-7, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn flow_derivative_horizontal_case() {
        // y = 0 and <x,v> = 0 gives cosh(t) x
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ut = random_unit_tangent(4, &mut rng);
        let (x0, _) = random_split_tangent(&ut, &mut rng);
        let xv = minkowski_inner(&x0, &ut.v);
        let x: Vec<f64> = (0..4).map(|a| x0[a] - xv * ut.v[a]).collect();
        let y = vec![0.0; 4];
        let got = flow_derivative(&ut, 1.3, &x, &y).unwrap();
        for a in 0..4 {
            assert_relative_eq!(got[a], 1.3f64.cosh() * x[a], epsilon = 1e-12);
        }
    }

    #[test]
    fn stereographic_projection_examples() {
        // apex to origin
        let p = vec![0.0, 0.0, 0.0, 1.0];
        assert!(stereographic(&p).iter().all(|c| *c == 0.0));
        // half-angle identity
        let p = vec![1.0f64.sinh(), 0.0, 0.0, 1.0f64.cosh()];
        let q = stereographic(&p);
        assert_relative_eq!(q[0], 0.5f64.tanh(), max_relative = 1e-14);
        // containment in the unit ball
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let ut = random_unit_tangent(5, &mut rng);
            let q = stereographic(&ut.p);
            assert!(euclid_dot(&q, &q) < 1.0);
        }
    }

    #[test]
    fn gauss_map_unit_and_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        // apex with v = e1 maps to e1
        let mut p = vec![0.0; 4];
        p[3] = 1.0;
        let mut v = vec![0.0; 4];
        v[0] = 1.0;
        let ut = UnitTangent::new(p, v).unwrap();
        let g = gauss_map(&ut);
        assert_relative_eq!(g[0], 1.0);
        assert_relative_eq!(g[1], 0.0);
        assert_relative_eq!(g[2], 0.0);

        for _ in 0..10 {
            let ut = random_unit_tangent(4, &mut rng);
            let g = gauss_map(&ut);
            assert_relative_eq!(euclid_dot(&g, &g), 1.0, epsilon = 1e-12);
            // flow-limit agreement at t = 20
            let q = stereographic(&geodesic_flow(&ut, 20.0));
            let err: f64 = g.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(err < 1e-6, "limit agreement {err}");
            // antipodal flip gives a different endpoint
            let anti = UnitTangent::new(ut.p.clone(), ut.v.iter().map(|c| -c).collect()).unwrap();
            let g2 = gauss_map(&anti);
            let d: f64 = g.iter().zip(&g2).map(|(a, b)| (a - b).abs()).sum();
            assert!(d > 1e-3);
        }
    }

    #[test]
    fn gauss_map_derivative_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let ut = random_unit_tangent(4, &mut rng);
            let (x, y) = random_split_tangent(&ut, &mut rng);
            let got = gauss_map_derivative(&ut, &x, &y).unwrap();
            // zero input, zero output
            let zero = gauss_map_derivative(&ut, &[0.0; 4], &[0.0; 4]).unwrap();
            assert!(zero.iter().all(|c| c.abs() < 1e-15));
            // tangent to the sphere at the image point
            let g = gauss_map(&ut);
            assert!(euclid_dot(&got, &g).abs() < 1e-10);
            // finite differences along an admissible curve
            let h = 1e-5;
            let (gp, vp) = curve_at(&ut, &x, &y, h);
            let (gm, vm) = curve_at(&ut, &x, &y, -h);
            let qp = gauss_map(&UnitTangent::new(gp, vp).unwrap());
            let qm = gauss_map(&UnitTangent::new(gm, vm).unwrap());
            for a in 0..3 {
                let fd = (qp[a] - qm[a]) / (2.0 * h);
                assert_relative_eq!(got[a], fd, epsilon = 1e-7, max_relative = 1e-7);
            }
        }
    }

    // chart fixtures

    pub struct SliceMap {
        pub n: usize,
    }
    impl SliceMap {
        fn dims(&self) -> (usize, usize) {
            (self.n, self.n + 2)
        }
        fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> crate::Result<()> {
            let mut w = x[0].lift(1.0);
            for xi in x {
                w = w.add(&xi.mul(xi));
            }
            for i in 0..self.n {
                out[i] = x[i].clone();
            }
            out[self.n] = x[0].lift(0.0);
            out[self.n + 1] = w.sqrt();
            Ok(())
        }
    }
    smooth_impl!(SliceMap);

    pub struct SphereImmersion {
        pub n: usize,
        pub r: f64,
        /// -1 selects the inward normal (B = +coth r)
        pub orient: f64,
        pub normal: bool,
    }
    impl SphereImmersion {
        fn dims(&self) -> (usize, usize) {
            (self.n, self.n + 2)
        }
        fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> crate::Result<()> {
            // stereographic chart of the unit sphere in R^{n+1}:
            // sigma = (2x, 1 - |x|^2) / (1 + |x|^2)
            let one = x[0].lift(1.0);
            let mut q = one.clone();
            for xi in x {
                q = q.add(&xi.mul(xi));
            }
            let inv = q.recip();
            let (c, s) = (self.r.cosh(), self.r.sinh());
            let (scale, time) = if self.normal {
                (self.orient * c, self.orient * s)
            } else {
                (s, c)
            };
            for i in 0..self.n {
                out[i] = x[i].mul(&inv).scale(2.0 * scale);
            }
            let two = x[0].lift(2.0);
            out[self.n] = two.sub(&q).mul(&inv).scale(scale);
            out[self.n + 1] = x[0].lift(time);
            Ok(())
        }
    }
    smooth_impl!(SphereImmersion);

    fn geodesic_sphere(n: usize, r: f64) -> ImmersionField {
        ImmersionField::new(
            n,
            Arc::new(SphereImmersion { n, r, orient: -1.0, normal: false }),
            Some(Arc::new(SphereImmersion { n, r, orient: -1.0, normal: true })),
        )
    }

    #[test]
    fn slice_is_totally_geodesic() {
        let n = 2;
        let imm = ImmersionField::new(n, Arc::new(SliceMap { n }), None);
        let engine = DerivEngine::ad();
        let p = [0.3, -0.5];
        imm.check_constraints(&p).unwrap();
        let (g, b) = imm.induced_data(&engine, &p).unwrap();
        assert!(b.matrix().abs().max() < 1e-12, "slice B = 0");
        // hyperbolic induced metric: sec = -1
        let gf = imm.induced_metric();
        let rm = crate::jetcalc::riemann(&gf, &engine, &p).unwrap();
        let expect = crate::multilinear::kulkarni_nomizu(g.sym(), g.sym())
            .unwrap()
            .scale(-0.5);
        assert!(rm.sub(&expect).max_abs() < 1e-9);
    }

    #[test]
    fn geodesic_sphere_classical_data() {
        let engine = DerivEngine::ad();
        for r in [0.5, 1.0, 2.0] {
            let n = 2;
            let imm = geodesic_sphere(n, r);
            let p = [0.25, -0.4];
            imm.check_constraints(&p).unwrap();
            let (g, b) = imm.induced_data(&engine, &p).unwrap();
            // B = coth(r) Id for the inward normal
            let coth = 1.0 / r.tanh();
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { coth } else { 0.0 };
                    assert_relative_eq!(b.get(i, j), expect, epsilon = 1e-10, max_relative = 1e-10);
                }
            }
            // g = sinh^2(r) * round metric in the stereographic chart
            let q = 1.0 + p.iter().map(|c| c * c).sum::<f64>();
            let round = 4.0 / (q * q);
            assert_relative_eq!(
                g.get(0, 0),
                r.sinh() * r.sinh() * round,
                max_relative = 1e-12
            );
            // intrinsic sectional curvature: -1 + coth^2 r = 1/sinh^2 r
            let gf = imm.induced_metric();
            let rm = crate::jetcalc::riemann(&gf, &engine, &p).unwrap();
            let sec = crate::multilinear::sectional(&g, &rm, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
            assert_relative_eq!(sec, 1.0 / (r.sinh() * r.sinh()), max_relative = 1e-7);
        }
    }

    #[test]
    fn cross_product_normal_matches_closed_form() {
        // on the sphere immersion the derived normal is the closed form up to sign
        let n = 2;
        let r = 1.0;
        let imm_free = ImmersionField::new(
            n,
            Arc::new(SphereImmersion { n, r, orient: -1.0, normal: false }),
            None,
        );
        let p = [0.3, 0.2];
        imm_free.check_constraints(&p).unwrap();
        let derived = imm_free.normal_at(&p).unwrap();
        let mut closed = vec![0.0; n + 2];
        SphereImmersion { n, r, orient: -1.0, normal: true }
            .eval_f64(&p, &mut closed)
            .unwrap();
        let dot = minkowski_inner(&derived, &closed);
        assert_relative_eq!(dot.abs(), 1.0, epsilon = 1e-10);
        // and induced shape operators agree up to that sign
        let engine = DerivEngine::ad();
        let (_, b_free) = imm_free.induced_data(&engine, &p).unwrap();
        let sign = dot.signum();
        assert_relative_eq!(b_free.get(0, 0) * sign, 1.0 / r.tanh(), max_relative = 1e-9);
    }

    #[test]
    fn gauss_formula_on_patches() {
        let engine = DerivEngine::ad();
        let imm = geodesic_sphere(2, 1.0);
        assert!(gauss_formula_defect(&imm, &engine, &[0.2, -0.3]).unwrap() < 1e-8);
        let slice = ImmersionField::new(2, Arc::new(SliceMap { n: 2 }), None);
        assert!(gauss_formula_defect(&slice, &engine, &[0.4, 0.1]).unwrap() < 1e-8);
    }

    #[test]
    fn normal_lift_derivative_matches_fd() {
        // dF(u) = (df(u), -df(Bu)) for F = (f, N)
        let engine = DerivEngine::ad();
        let imm = geodesic_sphere(2, 0.8);
        let p = [0.15, 0.35];
        let (_, b) = imm.induced_data(&engine, &p).unwrap();
        let fj = engine.jets(imm.f_map().as_ref(), &p, 1).unwrap();
        let fd_engine = DerivEngine::fd();
        let nj = fd_engine.jets(imm.normal_map().as_ref(), &p, 1).unwrap();
        for u in 0..2 {
            for a in 0..4 {
                let mut dfbu = 0.0;
                for k in 0..2 {
                    dfbu += fj[a].grad(k) * b.get(k, u);
                }
                assert_relative_eq!(nj[a].grad(u), -dfbu, epsilon = 1e-7, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn parallel_surface_metric_law() {
        let engine = DerivEngine::ad();
        let imm = geodesic_sphere(2, 1.0);
        let p = [0.2, 0.1];
        assert_eq!(
            imm.parallel(0.0).position(&p).unwrap(),
            imm.position(&p).unwrap()
        );
        let (g, b) = imm.induced_data(&engine, &p).unwrap();
        // radius 1 collapses at t = -1 (eigenvalue -coth(t)); stay clear
        for t in [-0.5, 0.3, 1.0] {
            let par = imm.parallel(t);
            par.check_constraints(&p).unwrap();
            let (gt, _) = par.induced_data(&engine, &p).unwrap();
            // g_t = g(A_t ., A_t .) with A_t = cosh t Id + sinh t B
            let at = DMatrix::identity(2, 2) * t.cosh() + b.matrix() * t.sinh();
            let expect = at.transpose() * g.sym().matrix() * &at;
            let err = (gt.sym().matrix() - &expect).abs().max();
            assert!(err < 1e-8 * expect.abs().max(), "parallel metric law t={t}: {err}");
        }
        // geodesic sphere flows to geodesic sphere: radius r + t
        let (r, t) = (1.0, 0.5);
        let par = imm.parallel(t);
        let (_, bt) = par.induced_data(&engine, &p).unwrap();
        assert_relative_eq!(bt.get(0, 0), 1.0 / (r + t).tanh(), max_relative = 1e-9);
        assert_relative_eq!(bt.get(0, 1), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn eigenvalues_in_unit_interval_flow_for_all_time() {
        // horosphere data (B = Id) and equidistant data (B = tanh t0 Id)
        // stay immersed under arbitrarily long flows
        let engine = DerivEngine::ad();
        let n = 2;
        let horo = ImmersionField::new(n, Arc::new(HorosphereMap { n }), None);
        let p = [0.4, -0.3];
        for t in [-5.0, -2.0, 2.0, 5.0] {
            let par = horo.parallel(t);
            let (g, _) = par.induced_data(&engine, &p).unwrap();
            assert!(
                g.min_eigenvalue() > 0.0,
                "flow at t = {t} lost the immersion"
            );
        }
        // a geodesic sphere of radius 1 (B = coth 1 > 1) collapses at t = -1
        let sphere = geodesic_sphere(2, 1.0);
        let par = sphere.parallel(-1.0);
        assert!(par.induced_data(&engine, &p).is_err());
    }

    struct HorosphereMap {
        n: usize,
    }
    impl HorosphereMap {
        fn dims(&self) -> (usize, usize) {
            (self.n, self.n + 2)
        }
        fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> crate::Result<()> {
            let mut q = x[0].lift(0.0);
            for xi in x {
                q = q.add(&xi.mul(xi));
            }
            let s = q.scale(0.5);
            for i in 0..self.n {
                out[i] = x[i].clone();
            }
            out[self.n] = s.clone();
            out[self.n + 1] = s.add(&x[0].lift(1.0));
            Ok(())
        }
    }
    smooth_impl!(HorosphereMap);

    #[test]
    fn metric_at_infinity_agreement() {
        let engine = DerivEngine::ad();
        for imm in [
            geodesic_sphere(2, 1.0),
            ImmersionField::new(2, Arc::new(SliceMap { n: 2 }), None),
        ] {
            let dev = imm.metric_at_infinity_check(&engine, &[0.2, -0.25]).unwrap();
            assert!(dev < 1e-8, "metric at infinity deviation {dev}");
        }
    }
}
