//! Smooth fields on a coordinate chart with derivatives to order 3 (order 4
//! for immersion components), plus the standard chart geometry built from
//! them: Christoffel symbols, curvature, Hessians and exterior covariant
//! derivatives.

mod curvature;
mod engine;

pub use curvature::{EndoJets, MetricJets, ScalarJets, Sym2Jets};
pub use engine::{DerivEngine, EngineMode};

use crate::dense::T3;
use crate::jet::{Jet, Ring};
use crate::multilinear::{MetricValue, Sym2Value, Tensor4Value};
use crate::{Error, Result};
use nalgebra::DMatrix;
use std::sync::Arc;

/// A smooth map between chart coordinates and R^m, evaluated either on plain
/// values or on jets. Jet inputs may be arbitrary ring elements, so maps
/// compose by nesting.
pub trait SmoothMap: Send + Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn eval_f64(&self, x: &[f64], out: &mut [f64]) -> Result<()>;
    fn eval_jet(&self, x: &[Jet], out: &mut [Jet]) -> Result<()>;
}

/// Dispatches a dyn [`SmoothMap`] evaluation at the ring type.
pub trait RingEval: Ring {
    fn eval_map(map: &dyn SmoothMap, x: &[Self], out: &mut [Self]) -> Result<()>;
}

impl RingEval for f64 {
    fn eval_map(map: &dyn SmoothMap, x: &[f64], out: &mut [f64]) -> Result<()> {
        map.eval_f64(x, out)
    }
}

impl RingEval for Jet {
    fn eval_map(map: &dyn SmoothMap, x: &[Jet], out: &mut [Jet]) -> Result<()> {
        map.eval_jet(x, out)
    }
}

/// Implements [`SmoothMap`] for a type providing `dims()` and a ring-generic
/// `eval_ring`.
macro_rules! smooth_impl {
    ($t:ty) => {
        impl $crate::jetcalc::SmoothMap for $t {
            fn dim_in(&self) -> usize {
                self.dims().0
            }
            fn dim_out(&self) -> usize {
                self.dims().1
            }
            fn eval_f64(&self, x: &[f64], out: &mut [f64]) -> $crate::Result<()> {
                self.eval_ring::<f64>(x, out)
            }
            fn eval_jet(
                &self,
                x: &[$crate::jet::Jet],
                out: &mut [$crate::jet::Jet],
            ) -> $crate::Result<()> {
                self.eval_ring::<$crate::jet::Jet>(x, out)
            }
        }
    };
}
pub(crate) use smooth_impl;

/// Axis-aligned chart domain with deterministic sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ChartBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimMismatch { expected: lo.len(), got: hi.len() });
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::Schema(format!("invalid chart interval [{a}, {b}]")));
            }
        }
        Ok(ChartBox { lo, hi })
    }

    /// The cube [-1, 1]^n.
    pub fn symmetric_unit(n: usize) -> Self {
        ChartBox { lo: vec![-1.0; n], hi: vec![1.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| v.is_finite() && v >= a && v <= b)
    }

    /// Deterministic sample plan: `count` rotated Halton points in the inner
    /// 90% of the box, plus the center and one near-boundary point. The inset
    /// leaves room for finite-difference stencils.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        use rand::{Rng, SeedableRng};
        let n = self.dim();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rot: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut pts = Vec::with_capacity(count + 2);
        pts.push(self.center());
        pts.push(self.at_fraction(0.95));
        for idx in 1..=count {
            let p: Vec<f64> = (0..n)
                .map(|i| {
                    let u = (halton(idx as u64, PRIMES[i]) + rot[i]).fract();
                    self.lo[i] + (0.05 + 0.9 * u) * (self.hi[i] - self.lo[i])
                })
                .collect();
            pts.push(p);
        }
        pts
    }

    fn at_fraction(&self, t: f64) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| a + t * (b - a))
            .collect()
    }
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

#[inline]
pub fn tri_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Index of the (i, j) entry, i <= j, in row-major upper-triangle storage.
#[inline]
pub fn tri_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

/// A scalar field on a chart.
#[derive(Clone)]
pub struct ScalarField {
    map: Arc<dyn SmoothMap>,
}

impl ScalarField {
    pub fn new(map: Arc<dyn SmoothMap>) -> Self {
        debug_assert_eq!(map.dim_out(), 1);
        ScalarField { map }
    }

    pub fn dim(&self) -> usize {
        self.map.dim_in()
    }

    pub fn map(&self) -> &Arc<dyn SmoothMap> {
        &self.map
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let mut out = [0.0];
        self.map.eval_f64(x, &mut out)?;
        Ok(out[0])
    }

    pub fn jet(&self, engine: &DerivEngine, x: &[f64], order: usize) -> Result<Jet> {
        Ok(engine.jets(self.map.as_ref(), x, order)?.pop().unwrap())
    }

    pub fn eval_ring<S: RingEval>(&self, x: &[S]) -> Result<S> {
        let mut out = vec![x[0].lift(0.0)];
        S::eval_map(self.map.as_ref(), x, &mut out)?;
        Ok(out.pop().unwrap())
    }
}

/// A field of symmetric 2-tensors; entries stored as the upper triangle in
/// row-major order.
#[derive(Clone)]
pub struct Sym2Field {
    n: usize,
    map: Arc<dyn SmoothMap>,
}

impl Sym2Field {
    pub fn new(n: usize, map: Arc<dyn SmoothMap>) -> Self {
        debug_assert_eq!(map.dim_out(), tri_len(n));
        Sym2Field { n, map }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn map(&self) -> &Arc<dyn SmoothMap> {
        &self.map
    }

    pub fn value(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let mut out = vec![0.0; tri_len(self.n)];
        self.map.eval_f64(x, &mut out)?;
        Ok(DMatrix::from_fn(self.n, self.n, |i, j| {
            out[tri_index(self.n, i, j)]
        }))
    }

    pub fn sym2_value(&self, x: &[f64]) -> Result<Sym2Value> {
        let v = self.value(x)?;
        Ok(Sym2Value::try_from_matrix(v).expect("triangle storage is symmetric"))
    }

    pub fn metric_value(&self, x: &[f64]) -> Result<MetricValue> {
        MetricValue::new(self.sym2_value(x)?)
    }

    pub fn entry_jets(&self, engine: &DerivEngine, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        engine.jets(self.map.as_ref(), x, order)
    }

    /// Full jet bundle for curvature work; `order` is the derivative order of
    /// the metric entries (2 for curvature, 3 for derivatives of curvature).
    pub fn metric_jets(&self, engine: &DerivEngine, x: &[f64], order: usize) -> Result<MetricJets> {
        let entries = self.entry_jets(engine, x, order)?;
        MetricJets::from_entries(self.n, &entries, order)
    }

    pub fn eval_ring<S: RingEval>(&self, x: &[S]) -> Result<Vec<S>> {
        let mut out = vec![x[0].lift(0.0); tri_len(self.n)];
        S::eval_map(self.map.as_ref(), x, &mut out)?;
        Ok(out)
    }
}

/// A field of endomorphisms; entries stored row-major.
#[derive(Clone)]
pub struct EndoField {
    n: usize,
    map: Arc<dyn SmoothMap>,
}

impl EndoField {
    pub fn new(n: usize, map: Arc<dyn SmoothMap>) -> Self {
        debug_assert_eq!(map.dim_out(), n * n);
        EndoField { n, map }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn map(&self) -> &Arc<dyn SmoothMap> {
        &self.map
    }

    pub fn value(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let mut out = vec![0.0; self.n * self.n];
        self.map.eval_f64(x, &mut out)?;
        Ok(DMatrix::from_fn(self.n, self.n, |i, j| out[i * self.n + j]))
    }

    pub fn entry_jets(&self, engine: &DerivEngine, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        engine.jets(self.map.as_ref(), x, order)
    }

    pub fn endo_jets(&self, engine: &DerivEngine, x: &[f64]) -> Result<EndoJets> {
        let jets = self.entry_jets(engine, x, 1)?;
        Ok(EndoJets::from_entries(self.n, &jets))
    }

    pub fn eval_ring<S: RingEval>(&self, x: &[S]) -> Result<Vec<S>> {
        let mut out = vec![x[0].lift(0.0); self.n * self.n];
        S::eval_map(self.map.as_ref(), x, &mut out)?;
        Ok(out)
    }
}

/// Constant-coefficient symmetric field (flat references, scaled identities).
pub struct ConstSym2 {
    n: usize,
    tri: Vec<f64>,
}

impl ConstSym2 {
    pub fn field(m: &Sym2Value) -> Sym2Field {
        let n = m.dim();
        let mut tri = Vec::with_capacity(tri_len(n));
        for i in 0..n {
            for j in i..n {
                tri.push(m.get(i, j));
            }
        }
        Sym2Field::new(n, Arc::new(ConstSym2 { n, tri }))
    }

    pub fn identity(n: usize) -> Sym2Field {
        ConstSym2::field(&Sym2Value::identity(n))
    }

    fn dims(&self) -> (usize, usize) {
        (self.n, self.tri.len())
    }

    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        for (o, v) in out.iter_mut().zip(&self.tri) {
            *o = x[0].lift(*v);
        }
        Ok(())
    }
}
smooth_impl!(ConstSym2);

/// Constant-coefficient endomorphism field.
pub struct ConstEndo {
    n: usize,
    entries: Vec<f64>,
}

impl ConstEndo {
    pub fn field(m: &DMatrix<f64>) -> EndoField {
        let n = m.nrows();
        let entries = (0..n * n).map(|k| m[(k / n, k % n)]).collect();
        EndoField::new(n, Arc::new(ConstEndo { n, entries }))
    }

    pub fn identity(n: usize) -> EndoField {
        ConstEndo::field(&DMatrix::identity(n, n))
    }

    fn dims(&self) -> (usize, usize) {
        (self.n, self.entries.len())
    }

    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        for (o, v) in out.iter_mut().zip(&self.entries) {
            *o = x[0].lift(*v);
        }
        Ok(())
    }
}
smooth_impl!(ConstEndo);

/// Chart geometry operations on fields.
pub fn christoffel(g: &Sym2Field, engine: &DerivEngine, p: &[f64]) -> Result<T3> {
    Ok(g.metric_jets(engine, p, 1)?.christoffel().clone())
}

pub fn riemann(g: &Sym2Field, engine: &DerivEngine, p: &[f64]) -> Result<Tensor4Value> {
    Ok(g.metric_jets(engine, p, 2)?.riemann())
}

pub fn ricci(g: &Sym2Field, engine: &DerivEngine, p: &[f64]) -> Result<Sym2Value> {
    Ok(g.metric_jets(engine, p, 2)?.ricci())
}

pub fn scalar(g: &Sym2Field, engine: &DerivEngine, p: &[f64]) -> Result<f64> {
    Ok(g.metric_jets(engine, p, 2)?.scalar())
}

pub fn hessian(
    g: &Sym2Field,
    u: &ScalarField,
    engine: &DerivEngine,
    p: &[f64],
) -> Result<Sym2Value> {
    let gj = g.metric_jets(engine, p, 1)?;
    let uj = ScalarJets::from_jet(&u.jet(engine, p, 2)?);
    Ok(gj.hessian(&uj))
}

pub fn gradient(
    g: &Sym2Field,
    u: &ScalarField,
    engine: &DerivEngine,
    p: &[f64],
) -> Result<Vec<f64>> {
    let gj = g.metric_jets(engine, p, 1)?;
    let uj = ScalarJets::from_jet(&u.jet(engine, p, 1)?);
    Ok(gj.gradient(&uj))
}

pub fn laplacian(
    g: &Sym2Field,
    u: &ScalarField,
    engine: &DerivEngine,
    p: &[f64],
) -> Result<f64> {
    let gj = g.metric_jets(engine, p, 1)?;
    let uj = ScalarJets::from_jet(&u.jet(engine, p, 2)?);
    Ok(gj.laplacian(&uj))
}

/// `d^∇B(e_i, e_j)`, returned as `out[k][i][j]`, the k-th component.
pub fn dnabla_endo(
    g: &Sym2Field,
    b: &EndoField,
    engine: &DerivEngine,
    p: &[f64],
) -> Result<T3> {
    let gj = g.metric_jets(engine, p, 1)?;
    let bj = b.endo_jets(engine, p)?;
    Ok(gj.dnabla_endo(&bj))
}

/// `d^∇T(e_x, e_y, e_z)` returned as `out[x][y][z]`.
pub fn dnabla_sym2(
    g: &Sym2Field,
    t: &Sym2Field,
    engine: &DerivEngine,
    p: &[f64],
) -> Result<T3> {
    let gj = g.metric_jets(engine, p, 1)?;
    let tj = Sym2Jets::from_entries(t.dim(), &t.entry_jets(engine, p, 1)?);
    Ok(gj.dnabla_sym2(&tj))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tri_indexing_roundtrip() {
        let n = 4;
        let mut seen = vec![false; tri_len(n)];
        for i in 0..n {
            for j in i..n {
                let t = tri_index(n, i, j);
                assert!(!seen[t]);
                seen[t] = true;
                assert_eq!(tri_index(n, j, i), t);
            }
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn sample_plan_is_deterministic_and_inside() {
        let b = ChartBox::new(vec![0.5, -1.0], vec![2.0, 1.0]).unwrap();
        let p1 = b.sample_points(16, 7);
        let p2 = b.sample_points(16, 7);
        assert_eq!(p1, p2);
        assert_eq!(p1.len(), 18);
        assert!(p1.iter().all(|p| b.contains(p)));
        let p3 = b.sample_points(16, 8);
        assert_ne!(p1, p3);
    }
}
