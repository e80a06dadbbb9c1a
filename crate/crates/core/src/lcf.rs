//! Conformal flatness machinery: the traceless conformal differential with
//! its cocycle/naturality/Moebius-detection properties, the closed-form
//! shape operator at infinity for conformally flat metrics, Schouten and Weyl
//! tensors, and the uniqueness argument through the Kulkarni-Nomizu trace.

use crate::dense::{T3, T5};
use crate::duality::{DualityPair, Side};
use crate::jet::{Jet, Ring};
use crate::jetcalc::{
    tri_len, DerivEngine, MetricJets, RingEval, ScalarField, ScalarJets, SmoothMap, Sym2Field,
    Sym2Jets,
};
use crate::multilinear::{
    kulkarni_nomizu, trace2, trace4, MetricValue, Sym2Value, Tensor4Value,
};
use crate::ringmat::{mat_inverse, tri_to_full};
use crate::transform::ConformalPair;
use crate::{Error, Result};
use nalgebra::DMatrix;
use std::sync::Arc;

/// A conformal factor `u` presenting `ĝ = e^{2u} * reference` over a flat,
/// constant-coefficient reference metric.
#[derive(Clone)]
pub struct ConformalPresentation {
    pub reference: Sym2Field,
    pub factor: ScalarField,
    ref_value: Sym2Value,
}

impl ConformalPresentation {
    /// Standard presentation over the Euclidean reference.
    pub fn flat(n: usize, factor: ScalarField) -> Result<Self> {
        if factor.dim() != n {
            return Err(Error::DimMismatch { expected: n, got: factor.dim() });
        }
        Ok(ConformalPresentation {
            reference: crate::jetcalc::ConstSym2::identity(n),
            factor,
            ref_value: Sym2Value::identity(n),
        })
    }

    /// Presentation over an arbitrary constant-coefficient reference.
    pub fn with_reference(ref_value: Sym2Value, factor: ScalarField) -> Result<Self> {
        let n = ref_value.dim();
        if factor.dim() != n {
            return Err(Error::DimMismatch { expected: n, got: factor.dim() });
        }
        MetricValue::new(ref_value.clone())?;
        Ok(ConformalPresentation {
            reference: crate::jetcalc::ConstSym2::field(&ref_value),
            factor,
            ref_value,
        })
    }

    pub fn dim(&self) -> usize {
        self.reference.dim()
    }

    /// The presented metric `e^{2u} * reference` as a field.
    pub fn presented(&self) -> Sym2Field {
        ConformalPair::new(self.reference.clone(), self.factor.clone())
            .expect("dimensions agree")
            .conformal_metric()
    }

    /// Checks that the reference is actually flat on the given points.
    pub fn validate_reference(&self, engine: &DerivEngine, points: &[Vec<f64>]) -> Result<()> {
        for p in points {
            let rm = self.reference.metric_jets(engine, p, 2)?.riemann();
            if rm.max_abs() > 1e-10 {
                return Err(Error::Constraint {
                    point: p.clone(),
                    msg: format!("reference metric is not flat: |Rm| = {:.3e}", rm.max_abs()),
                });
            }
        }
        Ok(())
    }

    /// The closed-form solution of the boundary system: the pair
    /// `(ĝ, B̂)` with `ĝ B̂ = 2 Hess(u) - 2 du² + |∇u|² ḡ` (all terms
    /// relative to the flat reference).
    pub fn solution_at_infinity(&self) -> DualityPair {
        let n = self.dim();
        let ghat = self.presented();
        let bhat = crate::jetcalc::EndoField::new(
            n,
            Arc::new(SolutionShapeMap { pres: self.clone() }),
        );
        DualityPair::new(ghat, bhat, Side::Infinity).expect("dimensions agree")
    }

    /// Defect between the two algebraic forms of the boundary second
    /// fundamental form: `2 OS(ĝ) - S(ĝ)/(n(n-1)) ĝ` versus
    /// `2 Hess(u) - 2 du² + |∇u|² ḡ`.
    pub fn solution_form_defect(&self, engine: &DerivEngine, p: &[f64]) -> Result<f64> {
        let n = self.dim() as f64;
        let os = osgood_stowe(&self.reference, &self.factor, engine, p)?;
        let ghat_field = self.presented();
        let s = ghat_field.metric_jets(engine, p, 2)?.scalar();
        let ghat = ghat_field.sym2_value(p)?;
        let lhs = os.scale(2.0).sub(&ghat.scale(s / (n * (n - 1.0))));
        let rhs = self.fundamental_form_value(engine, p)?;
        let scale = rhs.max_abs().max(1.0);
        Ok(lhs.sub(&rhs).max_abs() / scale)
    }

    /// `2 Hess(u) - 2 du² + |∇u|² ḡ` at a point.
    pub fn fundamental_form_value(&self, engine: &DerivEngine, p: &[f64]) -> Result<Sym2Value> {
        let n = self.dim();
        let mj = self.reference.metric_jets(engine, p, 1)?;
        let uj = ScalarJets::from_jet(&self.factor.jet(engine, p, 2)?);
        let hess = mj.hessian(&uj);
        let grad2 = mj.grad_norm2(&uj);
        let du2 = Sym2Value::from_fn_sym(n, |i, j| uj.d1[i] * uj.d1[j]);
        Ok(hess
            .scale(2.0)
            .sub(&du2.scale(2.0))
            .add(&self.ref_value.scale(grad2)))
    }
}

/// Shape operator of the closed-form boundary solution:
/// `B̂ = e^{-2u} ḡ^{-1} (2 Hess u - 2 du² + |∇u|² ḡ)`. Jet inputs must be
/// chart seeds; evaluation re-seeds the factor two orders higher.
struct SolutionShapeMap {
    pres: ConformalPresentation,
}

impl SolutionShapeMap {
    fn assemble(&self, u: &[Jet], out: &mut [Jet]) -> Result<()> {
        let n = self.pres.dim();
        let u0 = &u[0];
        let du: Vec<Jet> = (0..n).map(|i| u0.partial(i)).collect();
        let proto = du[0].clone();
        let ref_tri: Vec<Jet> = {
            // constant reference lifted into the derivative ring
            let mut tri = Vec::with_capacity(tri_len(n));
            for i in 0..n {
                for j in i..n {
                    tri.push(proto.lift(self.pres.ref_value.get(i, j)));
                }
            }
            tri
        };
        let gref = tri_to_full(&ref_tri, n);
        let gref_inv = mat_inverse(&gref, n, "flat reference")?;
        // |∇u|² = g^{ab} ∂_a u ∂_b u
        let mut grad2 = proto.lift(0.0);
        for a in 0..n {
            for b in 0..n {
                grad2 = grad2.add(&gref_inv[a * n + b].mul(&du[a]).mul(&du[b]));
            }
        }
        // II entries: 2 ∂_i∂_j u - 2 ∂_i u ∂_j u + |∇u|² g_ij
        let mut ii = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let hess = du[i].partial(j);
                let e = hess
                    .scale(2.0)
                    .sub(&du[i].mul(&du[j]).scale(2.0))
                    .add(&grad2.mul(&gref[i * n + j]));
                ii.push(e);
            }
        }
        // B̂ = ĝ^{-1} II = e^{-2u} ḡ^{-1} II
        let scale = u0.scale(-2.0).exp();
        let binv = crate::ringmat::mat_mul(&gref_inv, &ii, n);
        for (o, v) in out.iter_mut().zip(&binv) {
            *o = v.mul(&scale);
        }
        Ok(())
    }
}

impl SmoothMap for SolutionShapeMap {
    fn dim_in(&self) -> usize {
        self.pres.dim()
    }
    fn dim_out(&self) -> usize {
        let n = self.pres.dim();
        n * n
    }
    fn eval_f64(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.pres.dim();
        let seeds: Vec<Jet> = (0..n).map(|i| Jet::variable(x[i], i, n, 2)).collect();
        let mut u = vec![seeds[0].lift(0.0)];
        self.pres.factor.map().eval_jet(&seeds, &mut u)?;
        let mut jets = vec![seeds[0].lift(0.0); n * n];
        self.assemble(&u, &mut jets)?;
        for (o, j) in out.iter_mut().zip(&jets) {
            *o = j.value();
        }
        Ok(())
    }
    fn eval_jet(&self, x: &[Jet], out: &mut [Jet]) -> Result<()> {
        let n = self.pres.dim();
        let order = x[0].order();
        let seeds: Vec<Jet> = (0..n)
            .map(|i| Jet::variable(x[i].value(), i, n, (order + 2).min(crate::jet::MAX_ORDER)))
            .collect();
        let mut u = vec![seeds[0].lift(0.0)];
        self.pres.factor.map().eval_jet(&seeds, &mut u)?;
        self.assemble(&u, out)
    }
}

/// The traceless conformal differential of `g2 = e^{2u} g1` relative to `g1`:
/// `Hess(u) - du ⊗ du - (1/n)(Δu - |∇u|²) g1`, all terms against the base.
pub fn osgood_stowe(
    base: &Sym2Field,
    u: &ScalarField,
    engine: &DerivEngine,
    p: &[f64],
) -> Result<Sym2Value> {
    let n = base.dim();
    let mj = base.metric_jets(engine, p, 1)?;
    let uj = ScalarJets::from_jet(&u.jet(engine, p, 2)?);
    let hess = mj.hessian(&uj);
    let lap = mj.laplacian(&uj);
    let grad2 = mj.grad_norm2(&uj);
    let du2 = Sym2Value::from_fn_sym(n, |i, j| uj.d1[i] * uj.d1[j]);
    let base_val = Sym2Value::try_from_matrix(mj.g.clone()).expect("metric symmetric");
    Ok(hess
        .sub(&du2)
        .sub(&base_val.scale((lap - grad2) / n as f64)))
}

/// Cocycle defect for `g1`, `g2 = e^{2a} g1`, `g3 = e^{2b} g2`:
/// `|OS(g3,g1) - OS(g3,g2) - OS(g2,g1)|`, relative to the largest term.
pub fn os_cocycle_defect(
    g1: &Sym2Field,
    a: &ScalarField,
    b: &ScalarField,
    engine: &DerivEngine,
    p: &[f64],
) -> Result<f64> {
    let g2 = ConformalPair::new(g1.clone(), a.clone())?.conformal_metric();
    let sum = SumScalar::field(a.clone(), b.clone());
    let lhs = osgood_stowe(g1, &sum, engine, p)?;
    let mid = osgood_stowe(&g2, b, engine, p)?;
    let rhs = osgood_stowe(g1, a, engine, p)?;
    let scale = lhs
        .max_abs()
        .max(mid.max_abs())
        .max(rhs.max_abs())
        .max(1.0);
    Ok(lhs.sub(&mid).sub(&rhs).max_abs() / scale)
}

/// A smooth chart map used for pullbacks (chart changes, Moebius maps).
#[derive(Clone)]
pub struct ConformalMap {
    pub map: Arc<dyn SmoothMap>,
    n: usize,
}

impl ConformalMap {
    pub fn new(map: Arc<dyn SmoothMap>) -> Self {
        let n = map.dim_in();
        debug_assert_eq!(map.dim_out(), n);
        ConformalMap { map, n }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n];
        self.map.eval_f64(p, &mut out)?;
        Ok(out)
    }

    fn jacobian(&self, engine: &DerivEngine, p: &[f64]) -> Result<DMatrix<f64>> {
        let jets = engine.jets(self.map.as_ref(), p, 1)?;
        Ok(DMatrix::from_fn(self.n, self.n, |a, i| jets[a].grad(i)))
    }

    /// Relative deviation of `dφ^T dφ` from a multiple of the identity.
    pub fn conformality_defect(&self, engine: &DerivEngine, p: &[f64]) -> Result<f64> {
        let j = self.jacobian(engine, p)?;
        let gram = j.transpose() * &j;
        let lambda = gram.trace() / self.n as f64;
        if lambda.abs() < 1e-14 {
            return Err(Error::Singular { what: "chart map" });
        }
        let dev = (&gram - DMatrix::identity(self.n, self.n) * lambda).abs().max();
        Ok(dev / lambda)
    }

    /// The conformal factor of `φ*δ = e^{2w} δ` (valid where φ is conformal):
    /// `w = 1/2 log(|dφ|² / n)`.
    pub fn conformal_factor(&self) -> ScalarField {
        ScalarField::new(Arc::new(MapFactorMap { map: self.map.clone(), n: self.n }))
    }

    /// The pullback `φ*g` as a field.
    pub fn pullback(&self, g: &Sym2Field) -> Sym2Field {
        Sym2Field::new(
            self.n,
            Arc::new(PullbackByMapSym2 { phi: self.map.clone(), inner: g.clone() }),
        )
    }

    /// `u ∘ φ` as a field.
    pub fn compose_scalar(&self, u: &ScalarField) -> ScalarField {
        ScalarField::new(Arc::new(ComposedScalar { phi: self.map.clone(), u: u.clone() }))
    }

    /// Pointwise pullback of a symmetric value at `φ(p)` back to `p`.
    pub fn pullback_value(
        &self,
        engine: &DerivEngine,
        p: &[f64],
        t_at_image: &Sym2Value,
    ) -> Result<Sym2Value> {
        let j = self.jacobian(engine, p)?;
        let n = self.n;
        Ok(Sym2Value::from_fn_sym(n, |i, k| {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += t_at_image.get(a, b) * j[(a, i)] * j[(b, k)];
                }
            }
            s
        }))
    }
}

/// Moebius detection: `|OS(φ*δ, δ)|` at `p`. Requires the map to be
/// conformal there (checked; tolerance 1e-6 on the Gram deviation).
pub fn mobius_defect(map: &ConformalMap, engine: &DerivEngine, p: &[f64]) -> Result<f64> {
    let conf = map.conformality_defect(engine, p)?;
    if conf > 1e-6 {
        return Err(Error::Constraint {
            point: p.to_vec(),
            msg: format!("map is not conformal at this point (defect {conf:.3e})"),
        });
    }
    let n = map.dim();
    let delta = crate::jetcalc::ConstSym2::identity(n);
    let w = map.conformal_factor();
    Ok(osgood_stowe(&delta, &w, engine, p)?.frobenius())
}

/// Naturality defect `|φ*OS(g2,g1) - OS(φ*g2, φ*g1)|` at `p` for
/// `g2 = e^{2a} g1`.
pub fn os_naturality_defect(
    map: &ConformalMap,
    g1: &Sym2Field,
    a: &ScalarField,
    engine: &DerivEngine,
    p: &[f64],
) -> Result<f64> {
    let q = map.apply(p)?;
    let os_image = osgood_stowe(g1, a, engine, &q)?;
    let lhs = map.pullback_value(engine, p, &os_image)?;
    let g1_pulled = map.pullback(g1);
    let a_pulled = map.compose_scalar(a);
    let rhs = osgood_stowe(&g1_pulled, &a_pulled, engine, p)?;
    let scale = lhs.max_abs().max(rhs.max_abs()).max(1.0);
    Ok(lhs.sub(&rhs).max_abs() / scale)
}

/// Two-chart patching: a presentation `e^{2u} δ` read through a Moebius chart
/// change φ must produce the same conformal differential. Compares
/// `φ*(OS(ĝ, δ))` with `OS(φ*ĝ, δ)` at `q` in the second chart, where
/// `φ*ĝ = e^{2(u∘φ + w)} δ`.
pub fn two_chart_os_defect(
    u: &ScalarField,
    map: &ConformalMap,
    engine: &DerivEngine,
    q: &[f64],
) -> Result<f64> {
    let n = map.dim();
    let delta = crate::jetcalc::ConstSym2::identity(n);
    let p = map.apply(q)?;
    let os_chart1 = osgood_stowe(&delta, u, engine, &p)?;
    let lhs = map.pullback_value(engine, q, &os_chart1)?;
    let factor2 = SumScalar::field(map.compose_scalar(u), map.conformal_factor());
    let rhs = osgood_stowe(&delta, &factor2, engine, q)?;
    let scale = lhs.max_abs().max(rhs.max_abs()).max(1.0);
    Ok(lhs.sub(&rhs).max_abs() / scale)
}

/// Schouten tensor `P = (Ric - S/(2(n-1)) g) / (n-2)`; requires n >= 3.
pub fn schouten(g: &Sym2Field, engine: &DerivEngine, p: &[f64]) -> Result<Sym2Value> {
    let n = g.dim();
    if n < 3 {
        return Err(Error::DimensionAtLeast { op: "schouten", required: 3, got: n });
    }
    let mj = g.metric_jets(engine, p, 2)?;
    Ok(schouten_value(&mj))
}

fn schouten_value(mj: &MetricJets) -> Sym2Value {
    let n = mj.n as f64;
    let ric = mj.ricci();
    let s = mj.scalar();
    let gsym = Sym2Value::try_from_matrix(mj.g.clone()).expect("metric symmetric");
    ric.sub(&gsym.scale(s / (2.0 * (n - 1.0)))).scale(1.0 / (n - 2.0))
}

/// Schouten tensor with its coordinate derivative (needs order-3 jets).
fn schouten_with_derivative(mj: &MetricJets) -> (Sym2Value, T3) {
    let n = mj.n;
    let nf = n as f64;
    let p = schouten_value(mj);
    let dric = mj.dricci();
    let s = mj.scalar();
    let ds = mj.dscalar();
    let dp = T3::from_fn(n, |i, j, k| {
        (dric.get(i, j, k)
            - (ds[k] * mj.g[(i, j)] + s * mj.dg.get(i, j, k)) / (2.0 * (nf - 1.0)))
            / (nf - 2.0)
    });
    (p, dp)
}

/// Weyl tensor `W = Rm - P owedge g`; requires n >= 3.
pub fn weyl(g: &Sym2Field, engine: &DerivEngine, p: &[f64]) -> Result<Tensor4Value> {
    let n = g.dim();
    if n < 3 {
        return Err(Error::DimensionAtLeast { op: "weyl", required: 3, got: n });
    }
    let mj = g.metric_jets(engine, p, 2)?;
    let rm = mj.riemann();
    let pv = schouten_value(&mj);
    let gsym = Sym2Value::try_from_matrix(mj.g.clone()).expect("metric symmetric");
    Ok(rm.sub(&kulkarni_nomizu(&pv, &gsym)?))
}

/// `d^∇P` on basis triples, `out[x][y][z]`; requires n >= 3 and order-3 jets.
pub fn dnabla_schouten(g: &Sym2Field, engine: &DerivEngine, p: &[f64]) -> Result<T3> {
    let n = g.dim();
    if n < 3 {
        return Err(Error::DimensionAtLeast { op: "dnabla_schouten", required: 3, got: n });
    }
    let mj = g.metric_jets(engine, p, 3)?;
    let (pv, dp) = schouten_with_derivative(&mj);
    let tj = Sym2Jets { n, t: pv.matrix().clone(), dt: dp };
    Ok(mj.dnabla_sym2(&tj))
}

/// Defect of `(2 OS - S/(n(n-1)) ĝ) + 2 P(ĝ)` at `p` for a conformally flat
/// presentation; both sides through independent pipelines.
pub fn schouten_solves_defect(
    pres: &ConformalPresentation,
    engine: &DerivEngine,
    p: &[f64],
) -> Result<f64> {
    let n = pres.dim() as f64;
    if pres.dim() < 3 {
        return Err(Error::DimensionAtLeast { op: "schouten_solves", required: 3, got: pres.dim() });
    }
    let ghat_field = pres.presented();
    let mj = ghat_field.metric_jets(engine, p, 2)?;
    let pv = schouten_value(&mj);
    let os = osgood_stowe(&pres.reference, &pres.factor, engine, p)?;
    let s = mj.scalar();
    let ghat = Sym2Value::try_from_matrix(mj.g.clone()).expect("metric symmetric");
    let lhs = os.scale(2.0).sub(&ghat.scale(s / (n * (n - 1.0))));
    let resid = lhs.add(&pv.scale(2.0));
    let scale = lhs.max_abs().max(pv.scale(2.0).max_abs()).max(1.0);
    Ok(resid.max_abs() / scale)
}

/// The flatness indicator by dimension: max `|d^∇P|` (n = 3) or max `|W|`
/// (n >= 4), relative to curvature scale, at one point.
pub fn weyl_schouten_indicator(g: &Sym2Field, engine: &DerivEngine, p: &[f64]) -> Result<f64> {
    let n = g.dim();
    if n < 3 {
        return Err(Error::DimensionAtLeast { op: "weyl_schouten", required: 3, got: n });
    }
    if n == 3 {
        let d = dnabla_schouten(g, engine, p)?;
        let mj = g.metric_jets(engine, p, 3)?;
        let (pv, dp) = schouten_with_derivative(&mj);
        let np = mj.nabla_sym2(&Sym2Jets { n, t: pv.matrix().clone(), dt: dp });
        Ok(d.frobenius() / (1.0 + np.frobenius()))
    } else {
        let w = weyl(g, engine, p)?;
        let mj = g.metric_jets(engine, p, 2)?;
        let rm = mj.riemann();
        Ok(w.frobenius() / (1.0 + rm.frobenius()))
    }
}

/// Covariant derivative of the Weyl tensor and the divergence identity
/// `d^∇P = -1/(n-3) g^{ab} (∇_a W)_{b...}`: returns the relative defect at
/// `p`. Requires n >= 4 and order-3 jets.
pub fn weyl_divergence_defect(g: &Sym2Field, engine: &DerivEngine, p: &[f64]) -> Result<f64> {
    let n = g.dim();
    if n < 4 {
        return Err(Error::DimensionAtLeast { op: "weyl_divergence", required: 4, got: n });
    }
    let mj = g.metric_jets(engine, p, 3)?;
    let (pv, dp) = schouten_with_derivative(&mj);

    // W and its coordinate derivative
    let rm = mj.riemann();
    let drm = mj.driemann();
    let gsym = Sym2Value::try_from_matrix(mj.g.clone()).expect("metric symmetric");
    let pg = kulkarni_nomizu(&pv, &gsym)?;
    let w = rm.sub(&pg);
    let mut dw = T5::zeros(n);
    let pm = pv.matrix();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    for m in 0..n {
                        // ∂(P∧g) by the product rule on the four-term formula
                        let dpg = dp.get(i, l, m) * mj.g[(j, k)]
                            + pm[(i, l)] * mj.dg.get(j, k, m)
                            + dp.get(j, k, m) * mj.g[(i, l)]
                            + pm[(j, k)] * mj.dg.get(i, l, m)
                            - dp.get(i, k, m) * mj.g[(j, l)]
                            - pm[(i, k)] * mj.dg.get(j, l, m)
                            - dp.get(j, l, m) * mj.g[(i, k)]
                            - pm[(j, l)] * mj.dg.get(i, k, m);
                        dw.set(i, j, k, l, m, drm.get(i, j, k, l, m) - dpg);
                    }
                }
            }
        }
    }
    // (∇_a W)_{bcde}
    let mut nw = T5::zeros(n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    for e in 0..n {
                        let mut s = dw.get(b, c, d, e, a);
                        for m in 0..n {
                            s -= mj.gamma.get(m, a, b) * w.get(m, c, d, e)
                                + mj.gamma.get(m, a, c) * w.get(b, m, d, e)
                                + mj.gamma.get(m, a, d) * w.get(b, c, m, e)
                                + mj.gamma.get(m, a, e) * w.get(b, c, d, m);
                        }
                        nw.set(a, b, c, d, e, s);
                    }
                }
            }
        }
    }
    // divergence on the first slot: div(c,d,e) = g^{ab} (∇_a W)_{bcde}
    let div = T3::from_fn(n, |c, d, e| {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += mj.ginv[(a, b)] * nw.get(a, b, c, d, e);
            }
        }
        s
    });
    // d^∇P(c,d,e) + div(c,d,e)/(n-3) should vanish
    let dnp = mj.dnabla_sym2(&Sym2Jets { n, t: pv.matrix().clone(), dt: dp });
    let mut defect = 0.0f64;
    let mut scale = 0.0f64;
    for c in 0..n {
        for d in 0..n {
            for e in 0..n {
                let lhs = dnp.get(c, d, e);
                let rhs = -div.get(c, d, e) / (n as f64 - 3.0);
                defect = defect.max((lhs - rhs).abs());
                scale = scale.max(lhs.abs()).max(rhs.abs());
            }
        }
    }
    Ok(defect / (1.0 + scale))
}

/// Recovers `S` from `Q = g owedge S` by the two-trace argument; the map has
/// a kernel in dimension 2.
pub fn recover_from_kn(g: &MetricValue, q: &Tensor4Value) -> Result<Sym2Value> {
    let n = g.dim();
    if n == 2 {
        return Err(Error::UniquenessDim2);
    }
    let tr = trace4(g, q)?;
    // tr = (n-2) S + tr_g(S) g and tr_g(tr) = 2(n-1) tr_g(S)
    let tr_s = trace2(g, &tr)? / (2.0 * (n as f64 - 1.0));
    Ok(tr.sub(&g.sym().scale(tr_s)).scale(1.0 / (n as f64 - 2.0)))
}

/// Round-trip `S -> g owedge S -> S`; the uniqueness argument in tensor form.
pub fn kn_injectivity(g: &MetricValue, s: &Sym2Value) -> Result<Sym2Value> {
    let q = kulkarni_nomizu(g.sym(), s)?;
    recover_from_kn(g, &q)
}

/// Right inverse of the first-last trace on curvature-type tensors:
/// `G(h) = 1/(n-2) (h - tr_g(h)/(2(n-1)) g) owedge g`.
pub fn right_inverse_trace(g: &MetricValue, h: &Sym2Value) -> Result<Tensor4Value> {
    let n = g.dim();
    if n < 3 {
        return Err(Error::DimensionAtLeast { op: "right_inverse_trace", required: 3, got: n });
    }
    let tr_h = trace2(g, h)?;
    let inner = h.sub(&g.sym().scale(tr_h / (2.0 * (n as f64 - 1.0))));
    Ok(kulkarni_nomizu(&inner, g.sym())?.scale(1.0 / (n as f64 - 2.0)))
}

/// Sum of two scalar fields.
pub struct SumScalar {
    a: ScalarField,
    b: ScalarField,
}

impl SumScalar {
    pub fn field(a: ScalarField, b: ScalarField) -> ScalarField {
        ScalarField::new(Arc::new(SumScalar { a, b }))
    }
    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        out[0] = self.a.eval_ring(x)?.add(&self.b.eval_ring(x)?);
        Ok(())
    }
    fn dims(&self) -> (usize, usize) {
        (self.a.dim(), 1)
    }
}
crate::jetcalc::smooth_impl!(SumScalar);

/// `u ∘ φ` for a chart map φ.
struct ComposedScalar {
    phi: Arc<dyn SmoothMap>,
    u: ScalarField,
}

impl ComposedScalar {
    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        let mut y = vec![x[0].lift(0.0); self.phi.dim_out()];
        S::eval_map(self.phi.as_ref(), x, &mut y)?;
        out[0] = self.u.eval_ring(&y)?;
        Ok(())
    }
    fn dims(&self) -> (usize, usize) {
        (self.phi.dim_in(), 1)
    }
}
crate::jetcalc::smooth_impl!(ComposedScalar);

/// `w = 1/2 log(|dφ|²/n)`, the conformal factor of `φ*δ` for conformal φ.
/// Jet inputs must be chart seeds; evaluation re-seeds φ one order higher.
struct MapFactorMap {
    map: Arc<dyn SmoothMap>,
    n: usize,
}

impl MapFactorMap {
    fn assemble(&self, phi: &[Jet], out: &mut [Jet]) {
        let n = self.n;
        let mut gram = phi[0].partial(0).lift(0.0);
        for a in 0..n {
            for i in 0..n {
                let d = phi[a].partial(i);
                gram = gram.add(&d.mul(&d));
            }
        }
        out[0] = gram.scale(1.0 / n as f64).ln().scale(0.5);
    }
}

impl SmoothMap for MapFactorMap {
    fn dim_in(&self) -> usize {
        self.n
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn eval_f64(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let engine = DerivEngine::ad();
        let phi = engine.jets(self.map.as_ref(), x, 1)?;
        let mut jets = vec![phi[0].lift(0.0)];
        self.assemble(&phi, &mut jets);
        out[0] = jets[0].value();
        Ok(())
    }
    fn eval_jet(&self, x: &[Jet], out: &mut [Jet]) -> Result<()> {
        let n = self.n;
        let order = x[0].order();
        let seeds: Vec<Jet> = (0..n)
            .map(|i| Jet::variable(x[i].value(), i, n, (order + 1).min(crate::jet::MAX_ORDER)))
            .collect();
        let mut phi = vec![seeds[0].lift(0.0); n];
        self.map.eval_jet(&seeds, &mut phi)?;
        self.assemble(&phi, out);
        Ok(())
    }
}

/// `φ*g` entries for a chart map φ. Jet inputs must be chart seeds.
struct PullbackByMapSym2 {
    phi: Arc<dyn SmoothMap>,
    inner: Sym2Field,
}

impl PullbackByMapSym2 {
    fn assemble(&self, phi: &[Jet], out: &mut [Jet]) -> Result<()> {
        let n = self.inner.dim();
        let dphi: Vec<Vec<Jet>> = (0..n)
            .map(|a| (0..n).map(|i| phi[a].partial(i)).collect())
            .collect();
        let g_tri = self.inner.eval_ring(&dphi_truncate(phi, dphi[0][0].order()))?;
        let g = tri_to_full(&g_tri, n);
        let mut idx = 0;
        for i in 0..n {
            for j in i..n {
                let mut s = dphi[0][0].lift(0.0);
                for a in 0..n {
                    for b in 0..n {
                        s = s.add(&g[a * n + b].mul(&dphi[a][i]).mul(&dphi[b][j]));
                    }
                }
                out[idx] = s;
                idx += 1;
            }
        }
        Ok(())
    }
}

/// Evaluating g at φ(x) must happen at the derivative order of dφ so the
/// product stays consistent.
fn dphi_truncate(phi: &[Jet], _order: usize) -> Vec<Jet> {
    phi.to_vec()
}

impl SmoothMap for PullbackByMapSym2 {
    fn dim_in(&self) -> usize {
        self.inner.dim()
    }
    fn dim_out(&self) -> usize {
        tri_len(self.inner.dim())
    }
    fn eval_f64(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.inner.dim();
        let engine = DerivEngine::ad();
        let phi = engine.jets(self.map_ref(), x, 1)?;
        let mut jets = vec![phi[0].lift(0.0); tri_len(n)];
        self.assemble(&phi, &mut jets)?;
        for (o, j) in out.iter_mut().zip(&jets) {
            *o = j.value();
        }
        Ok(())
    }
    fn eval_jet(&self, x: &[Jet], out: &mut [Jet]) -> Result<()> {
        let n = self.inner.dim();
        let order = x[0].order();
        let seeds: Vec<Jet> = (0..n)
            .map(|i| Jet::variable(x[i].value(), i, n, (order + 1).min(crate::jet::MAX_ORDER)))
            .collect();
        let mut phi = vec![seeds[0].lift(0.0); n];
        self.map_ref().eval_jet(&seeds, &mut phi)?;
        self.assemble(&phi, out)
    }
}

impl PullbackByMapSym2 {
    fn map_ref(&self) -> &dyn SmoothMap {
        self.phi.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetcalc::ConstSym2;
    use crate::speccat::{scalar_field_from_expr, vec_map_from_exprs};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn u(src: &str, n: usize) -> ScalarField {
        scalar_field_from_expr(n, src).unwrap()
    }

    #[test]
    fn os_constant_and_affine() {
        let eng = DerivEngine::ad();
        let n = 3;
        let delta = ConstSym2::identity(n);
        let p = [0.2, -0.4, 0.6];
        // constant factor: zero
        let os = osgood_stowe(&delta, &u("0.7", n), &eng, &p).unwrap();
        assert!(os.max_abs() < 1e-15);
        // affine u = a.x: Hess = 0, OS = -(a ⊗ a - |a|²/n δ)
        let os = osgood_stowe(&delta, &u("0.3*x1 - 0.5*x3", n), &eng, &p).unwrap();
        let a = [0.3, 0.0, -0.5];
        let norm2: f64 = a.iter().map(|c| c * c).sum();
        for i in 0..n {
            for j in 0..n {
                let expect = -(a[i] * a[j] - if i == j { norm2 / n as f64 } else { 0.0 });
                assert_relative_eq!(os.get(i, j), expect, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn os_traceless_and_fd_crosscheck() {
        let eng = DerivEngine::ad();
        let n = 2;
        let delta = ConstSym2::identity(n);
        let factor = u("log(2/(1 + x1^2 + x2^2))", n);
        let p = [0.3, -0.2];
        let os = osgood_stowe(&delta, &factor, &eng, &p).unwrap();
        // traceless against the reference
        let tr = os.get(0, 0) + os.get(1, 1);
        assert!(tr.abs() < 1e-11);
        // finite-difference oracle
        let fd = DerivEngine::fd();
        let os_fd = osgood_stowe(&delta, &factor, &fd, &p).unwrap();
        assert!(os.sub(&os_fd).max_abs() < 1e-7);
    }

    #[test]
    fn os_cocycle() {
        let eng = DerivEngine::ad();
        let n = 3;
        let delta = ConstSym2::identity(n);
        let a = u("0.2*x1*x2 - 0.1*x3", n);
        let b = u("0.15*x3^2 + 0.1*x1", n);
        let p = [0.4, 0.1, -0.3];
        let d = os_cocycle_defect(&delta, &a, &b, &eng, &p).unwrap();
        assert!(d < 1e-9, "cocycle defect {d}");
        // b ≡ 0 collapses to equality of two identical tensors
        let d0 = os_cocycle_defect(&delta, &a, &u("0", n), &eng, &p).unwrap();
        assert!(d0 < 1e-14);
        // a = -b: OS(g3, g1) = 0 branch
        let d1 = os_cocycle_defect(
            &delta,
            &u("0.3*x1", n),
            &u("-0.3*x1", n),
            &eng,
            &p,
        )
        .unwrap();
        assert!(d1 < 1e-12);
    }

    fn inversion_map(n: usize) -> ConformalMap {
        // x / |x|²
        let norm: String = (1..=n).map(|i| format!("x{i}^2")).collect::<Vec<_>>().join(" + ");
        let comps: Vec<String> = (1..=n).map(|i| format!("x{i}/({norm})")).collect();
        let refs: Vec<&str> = comps.iter().map(|s| s.as_str()).collect();
        ConformalMap::new(vec_map_from_exprs(n, &refs).unwrap())
    }

    fn rotation_dilation_map() -> ConformalMap {
        // scale 1.5, rotate by 0.4
        let (c, s) = (0.4f64.cos(), 0.4f64.sin());
        let e1 = format!("{}*x1 - {}*x2", 1.5 * c, 1.5 * s);
        let e2 = format!("{}*x1 + {}*x2", 1.5 * s, 1.5 * c);
        ConformalMap::new(vec_map_from_exprs(2, &[&e1, &e2]).unwrap())
    }

    #[test]
    fn mobius_detection() {
        let eng = DerivEngine::ad();
        // similarities are Moebius: defect at machine precision
        let m = rotation_dilation_map();
        let d = mobius_defect(&m, &eng, &[0.3, 0.4]).unwrap();
        assert!(d < 1e-12, "similarity defect {d}");
        // inversion is Moebius
        let inv3 = inversion_map(3);
        let d = mobius_defect(&inv3, &eng, &[1.0, 1.0, 1.0]).unwrap();
        assert!(d < 1e-8, "inversion defect {d}");
        // z² is conformal away from 0 but not Moebius
        let sq = ConformalMap::new(
            vec_map_from_exprs(2, &["x1^2 - x2^2", "2*x1*x2"]).unwrap(),
        );
        let d = mobius_defect(&sq, &eng, &[1.0, 1.0]).unwrap();
        assert!(d > 1e-2, "z^2 should fail the Moebius test, defect {d}");
        // frozen oracle at z = 1 + i: |OS| = 3/4 * sqrt(2)
        assert_relative_eq!(d, 0.75 * 2.0f64.sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn naturality_under_maps() {
        let eng = DerivEngine::ad();
        let n = 2;
        let delta = ConstSym2::identity(n);
        let a = u("0.3*x1 - 0.2*x1*x2", n);
        // identity map
        let idm = ConformalMap::new(vec_map_from_exprs(n, &["x1", "x2"]).unwrap());
        let d = os_naturality_defect(&idm, &delta, &a, &eng, &[0.4, 0.2]).unwrap();
        assert!(d < 1e-14);
        // rotation + dilation
        let m = rotation_dilation_map();
        let d = os_naturality_defect(&m, &delta, &a, &eng, &[0.4, 0.2]).unwrap();
        assert!(d < 1e-10, "similarity naturality {d}");
        // inversion away from the origin
        let inv = inversion_map(2);
        let d = os_naturality_defect(&inv, &delta, &a, &eng, &[0.8, 0.6]).unwrap();
        assert!(d < 1e-8, "inversion naturality {d}");
    }

    #[test]
    fn two_chart_patching() {
        let eng = DerivEngine::ad();
        let n = 2;
        let factor = u("0.25*x1^2 - 0.3*x2", n);
        let m = rotation_dilation_map();
        let d = two_chart_os_defect(&factor, &m, &eng, &[0.3, -0.2]).unwrap();
        assert!(d < 1e-10, "patching via similarity {d}");
        let inv = inversion_map(n);
        let d = two_chart_os_defect(&factor, &inv, &eng, &[0.7, 0.5]).unwrap();
        assert!(d < 1e-8, "patching via inversion {d}");
    }

    #[test]
    fn solution_at_infinity_examples() {
        let eng = DerivEngine::ad();
        // u ≡ 0: flat metric, vanishing shape operator
        let pres = ConformalPresentation::flat(3, u("0", 3)).unwrap();
        let pair = pres.solution_at_infinity();
        let p = [0.3, 0.2, -0.4];
        assert!(pair.b.value(&p).unwrap().abs().max() < 1e-15);
        // round sphere: tr(B̂) = -S/(n-1) = -n
        for n in [2usize, 3] {
            let src = match n {
                2 => "log(2/(1 + x1^2 + x2^2))",
                _ => "log(2/(1 + x1^2 + x2^2 + x3^2))",
            };
            let pres = ConformalPresentation::flat(n, u(src, n)).unwrap();
            let pair = pres.solution_at_infinity();
            let p: Vec<f64> = (0..n).map(|i| 0.1 + 0.2 * i as f64).collect();
            let tr = pair.b.value(&p).unwrap().trace();
            assert_relative_eq!(tr, -(n as f64), max_relative = 1e-10);
            // trace identity against the scalar curvature pipeline
            let d = pair.trace_scalar_check(&eng, &p).unwrap();
            assert!(d.abs() < 1e-10, "trace/scalar defect {d}");
        }
    }

    #[test]
    fn solution_solves_both_residuals() {
        let eng = DerivEngine::ad();
        for (n, src) in [
            (2usize, "0.2*x1*x2 + 0.1*x1"),
            (3, "0.15*x1*x2 - 0.2*x3 + 0.05*x3*x3*x1"),
        ] {
            let pres = ConformalPresentation::flat(n, u(src, n)).unwrap();
            let pair = pres.solution_at_infinity();
            let p: Vec<f64> = (0..n).map(|i| 0.15 - 0.1 * i as f64).collect();
            let (_, _, grel, crel) = pair.residuals(&eng, &p).unwrap();
            assert!(grel < 1e-9, "gauss-at-infinity residual {grel} (n={n})");
            assert!(crel < 1e-9, "codazzi-at-infinity residual {crel} (n={n})");
            // the two algebraic forms of ÎI agree
            let d = pres.solution_form_defect(&eng, &p).unwrap();
            assert!(d < 1e-10, "form defect {d}");
        }
    }

    #[test]
    fn schouten_weyl_constant_curvature() {
        let eng = DerivEngine::ad();
        // round sphere radius 1: P = K/2 g with K = 1, W = 0
        let pres = ConformalPresentation::flat(3, u("log(2/(1 + x1^2 + x2^2 + x3^2))", 3)).unwrap();
        let g = pres.presented();
        let p = [0.2, -0.3, 0.4];
        let pv = schouten(&g, &eng, &p).unwrap();
        let gv = g.sym2_value(&p).unwrap();
        assert!(pv.sub(&gv.scale(0.5)).max_abs() < 1e-9 * gv.max_abs());
        let w = weyl(&g, &eng, &p).unwrap();
        assert!(w.max_abs() < 1e-10);
        // flat: P = 0, W = 0
        let flat = ConstSym2::identity(3);
        assert!(schouten(&flat, &eng, &p).unwrap().max_abs() < 1e-14);
        assert!(weyl(&flat, &eng, &p).unwrap().max_abs() < 1e-14);
        // n = 2 refuses
        assert!(matches!(
            schouten(&ConstSym2::identity(2), &eng, &[0.1, 0.2]),
            Err(Error::DimensionAtLeast { .. })
        ));
    }

    #[test]
    fn weyl_decomposition_and_tracelessness() {
        let eng = DerivEngine::ad();
        let d = crate::speccat::catalog::poly_metric(4, 0);
        let loaded = crate::speccat::load_spec(&d).unwrap();
        let g = loaded.metric_field();
        let p = [0.25, -0.3, 0.4, 0.1];
        let mj = g.metric_jets(&eng, &p, 2).unwrap();
        let rm = mj.riemann();
        let pv = schouten(&g, &eng, &p).unwrap();
        let gv = Sym2Value::try_from_matrix(mj.g.clone()).unwrap();
        let w = weyl(&g, &eng, &p).unwrap();
        // Rm = W + P owedge g
        let resid = rm.sub(&w).sub(&kulkarni_nomizu(&pv, &gv).unwrap());
        assert!(resid.max_abs() < 1e-10 * rm.max_abs().max(1.0));
        // tracelessness of W
        let gm = MetricValue::new(gv).unwrap();
        let tr = trace4(&gm, &w).unwrap();
        assert!(tr.max_abs() < 1e-9 * w.max_abs().max(1.0), "trace {}", tr.max_abs());
    }

    #[test]
    fn weyl_schouten_directions() {
        let eng = DerivEngine::ad();
        // conformally flat in n = 3: d^∇P small
        let pres = ConformalPresentation::flat(3, u("0.2*x1*x2 - 0.15*x3^2", 3)).unwrap();
        let g = pres.presented();
        let ind = weyl_schouten_indicator(&g, &eng, &[0.3, 0.2, -0.1]).unwrap();
        assert!(ind < 1e-9, "LCF n=3 indicator {ind}");
        // conformally flat in n = 4: W small
        let pres = ConformalPresentation::flat(4, u("0.2*x1*x4 - 0.1*x2", 4)).unwrap();
        let g = pres.presented();
        let ind = weyl_schouten_indicator(&g, &eng, &[0.3, 0.2, -0.1, 0.15]).unwrap();
        assert!(ind < 1e-10, "LCF n=4 indicator {ind}");
        // generic n = 4 control: W sizable
        let loaded =
            crate::speccat::load_spec(&crate::speccat::catalog::non_lcf_control(0)).unwrap();
        let g = loaded.metric_field();
        let ind = weyl_schouten_indicator(&g, &eng, &[0.3, 0.2, -0.1, 0.15]).unwrap();
        assert!(ind > 1e-3, "control indicator too small: {ind}");
    }

    #[test]
    fn schouten_solves_identity() {
        let eng = DerivEngine::ad();
        for (n, src) in [
            (3usize, "0.2*x1*x2 - 0.1*x3"),
            (4, "0.1*x1*x4 + 0.15*x2^2 - 0.1*x3"),
        ] {
            let pres = ConformalPresentation::flat(n, u(src, n)).unwrap();
            let p: Vec<f64> = (0..n).map(|i| 0.2 - 0.08 * i as f64).collect();
            let d = schouten_solves_defect(&pres, &eng, &p).unwrap();
            assert!(d < 1e-9, "schouten-solves defect {d} (n={n})");
        }
    }

    #[test]
    fn weyl_divergence_identity_holds() {
        let eng = DerivEngine::ad();
        // constant curvature: both sides vanish
        let pres =
            ConformalPresentation::flat(4, u("log(2/(1 + x1^2 + x2^2 + x3^2 + x4^2))", 4)).unwrap();
        let d = weyl_divergence_defect(&pres.presented(), &eng, &[0.2, 0.1, -0.2, 0.3]).unwrap();
        assert!(d < 1e-9, "constant curvature divergence defect {d}");
        // generic n = 4 metric
        let loaded =
            crate::speccat::load_spec(&crate::speccat::catalog::non_lcf_control(1)).unwrap();
        let g = loaded.metric_field();
        let d = weyl_divergence_defect(&g, &eng, &[0.25, -0.15, 0.3, 0.05]).unwrap();
        assert!(d < 1e-6, "generic divergence defect {d}");
        // n = 3 refuses
        assert!(matches!(
            weyl_divergence_defect(&ConstSym2::identity(3), &eng, &[0.1, 0.2, 0.3]),
            Err(Error::DimensionAtLeast { .. })
        ));
    }

    #[test]
    fn kn_injectivity_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in [3usize, 4] {
            for _ in 0..20 {
                let gq = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
                let gm = &gq * gq.transpose() + DMatrix::identity(n, n);
                let g = MetricValue::new(Sym2Value::symmetrized(&gm).0).unwrap();
                let s = Sym2Value::from_fn_sym(n, |_, _| rng.gen_range(-1.0..1.0));
                let rec = kn_injectivity(&g, &s).unwrap();
                let err = rec.sub(&s).max_abs() / s.max_abs().max(1.0);
                assert!(err < 1e-12, "roundtrip error {err}");
            }
        }
        // S = 0 and S = g cases
        let g = MetricValue::euclidean(4);
        assert_eq!(
            kn_injectivity(&g, &Sym2Value::zeros(4)).unwrap().max_abs(),
            0.0
        );
        let rec = kn_injectivity(&g, g.sym()).unwrap();
        assert!(rec.sub(g.sym()).max_abs() < 1e-13);
        // dimension 2 has a kernel
        let g2 = MetricValue::euclidean(2);
        assert!(matches!(
            kn_injectivity(&g2, &Sym2Value::identity(2)),
            Err(Error::UniquenessDim2)
        ));
    }

    #[test]
    fn uniqueness_bound_from_trace_argument() {
        // |h - k| <= C |g owedge (h-k)| with C = (1 + n/(2(n-1)))/(n-2),
        // Frobenius norms against the Euclidean reference
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for n in [3usize, 4] {
            let g = MetricValue::euclidean(n);
            let c = (1.0 + n as f64 / (2.0 * (n as f64 - 1.0))) / (n as f64 - 2.0);
            for _ in 0..20 {
                let h = Sym2Value::from_fn_sym(n, |_, _| rng.gen_range(-1.0..1.0));
                let k = Sym2Value::from_fn_sym(n, |_, _| rng.gen_range(-1.0..1.0));
                let diff = h.sub(&k);
                let q = kulkarni_nomizu(g.sym(), &diff).unwrap();
                assert!(
                    diff.frobenius() <= c * q.frobenius() + 1e-12,
                    "bound violated: |h-k| = {} vs C|g∧(h-k)| = {}",
                    diff.frobenius(),
                    c * q.frobenius()
                );
            }
        }
    }

    #[test]
    fn right_inverse_of_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for n in [3usize, 4] {
            let g = MetricValue::euclidean(n);
            // explicit case h = g: G(g) = g owedge g / (2(n-1))
            let gh = right_inverse_trace(&g, g.sym()).unwrap();
            let expect = kulkarni_nomizu(g.sym(), g.sym())
                .unwrap()
                .scale(1.0 / (2.0 * (n as f64 - 1.0)));
            assert!(gh.sub(&expect).max_abs() < 1e-13);
            // trace round-trip on random h
            for _ in 0..10 {
                let h = Sym2Value::from_fn_sym(n, |_, _| rng.gen_range(-1.0..1.0));
                let q = right_inverse_trace(&g, &h).unwrap();
                let back = trace4(&g, &q).unwrap();
                assert!(back.sub(&h).max_abs() < 1e-12, "trace right-inverse failed");
            }
            // h = 0 -> 0
            assert_eq!(
                right_inverse_trace(&g, &Sym2Value::zeros(n)).unwrap().max_abs(),
                0.0
            );
        }
    }
}
