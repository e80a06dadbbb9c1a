//! Curvature and covariant derivatives assembled from metric entry jets.
//!
//! Convention: `R(X,Y)Z = ∇_X ∇_Y Z - ∇_Y ∇_X Z - ∇_{[X,Y]} Z` and
//! `Rm(X,Y,Z,W) = g(R(X,Y)Z, W)`, so round spheres have positive sectional
//! curvature and hyperbolic space satisfies `Rm = -1/2 g owedge g`.

use super::{tri_index, tri_len};
use crate::dense::{T3, T4, T5};
use crate::jet::Jet;
use crate::multilinear::{Sym2Value, Tensor4Value};
use crate::{Error, Result};
use nalgebra::DMatrix;

/// Scalar field data at a point: value and partials to order <= 3.
#[derive(Debug, Clone)]
pub struct ScalarJets {
    pub n: usize,
    pub order: usize,
    pub v: f64,
    pub d1: Vec<f64>,
    pub d2: DMatrix<f64>,
    pub d3: T3,
}

impl ScalarJets {
    pub fn from_jet(j: &Jet) -> Self {
        let n = j.dim();
        let order = j.order();
        ScalarJets {
            n,
            order,
            v: j.value(),
            d1: if order >= 1 {
                (0..n).map(|i| j.grad(i)).collect()
            } else {
                vec![0.0; n]
            },
            d2: if order >= 2 {
                DMatrix::from_fn(n, n, |i, k| j.hess(i, k))
            } else {
                DMatrix::zeros(n, n)
            },
            d3: if order >= 3 {
                T3::from_fn(n, |i, k, l| j.third(i, k, l))
            } else {
                T3::zeros(n)
            },
        }
    }
}

/// Endomorphism field data at a point: values and first partials.
#[derive(Debug, Clone)]
pub struct EndoJets {
    pub n: usize,
    pub b: DMatrix<f64>,
    /// db[i][j][k] = ∂_k B^i_j
    pub db: T3,
}

impl EndoJets {
    pub fn from_entries(n: usize, jets: &[Jet]) -> Self {
        let b = DMatrix::from_fn(n, n, |i, j| jets[i * n + j].value());
        let db = T3::from_fn(n, |i, j, k| jets[i * n + j].grad(k));
        EndoJets { n, b, db }
    }
}

/// Symmetric 2-tensor field data at a point: values and first partials.
#[derive(Debug, Clone)]
pub struct Sym2Jets {
    pub n: usize,
    pub t: DMatrix<f64>,
    /// dt[i][j][k] = ∂_k T_ij
    pub dt: T3,
}

impl Sym2Jets {
    pub fn from_entries(n: usize, jets: &[Jet]) -> Self {
        let t = DMatrix::from_fn(n, n, |i, j| jets[tri_index(n, i, j)].value());
        let dt = T3::from_fn(n, |i, j, k| jets[tri_index(n, i, j)].grad(k));
        Sym2Jets { n, t, dt }
    }
}

/// Metric data at a point with enough derivative structure for curvature
/// (order 2) or derivatives of curvature (order 3).
#[derive(Debug, Clone)]
pub struct MetricJets {
    pub n: usize,
    pub order: usize,
    pub g: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    pub min_eig: f64,
    /// dg[i][j][k] = ∂_k g_ij
    pub dg: T3,
    /// d2g[i][j][k][l] = ∂_k ∂_l g_ij
    pub d2g: T4,
    /// d3g[i][j][k][l][m] = ∂_k ∂_l ∂_m g_ij
    pub d3g: T5,
    pub dginv: T3,
    pub d2ginv: T4,
    /// gamma[k][i][j] = Γ^k_ij
    pub gamma: T3,
    /// dgamma[k][i][j][l] = ∂_l Γ^k_ij
    pub dgamma: T4,
    pub d2gamma: T5,
}

impl MetricJets {
    /// Builds from upper-triangle entry jets. Fails on a non-positive
    /// definite value; the caller decides whether that point is skipped.
    pub fn from_entries(n: usize, entries: &[Jet], order: usize) -> Result<Self> {
        assert_eq!(entries.len(), tri_len(n));
        let g = DMatrix::from_fn(n, n, |i, j| entries[tri_index(n, i, j)].value());
        let eig = nalgebra::SymmetricEigen::new(g.clone());
        let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min_eig > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eig });
        }
        let ginv = g.clone().try_inverse().ok_or(Error::Singular { what: "metric" })?;

        let e = |i: usize, j: usize| &entries[tri_index(n, i, j)];
        let dg = if order >= 1 {
            T3::from_fn(n, |i, j, k| e(i, j).grad(k))
        } else {
            T3::zeros(n)
        };
        let d2g = if order >= 2 {
            T4::from_fn(n, |i, j, k, l| e(i, j).hess(k, l))
        } else {
            T4::zeros(n)
        };
        let mut d3g = T5::zeros(n);
        if order >= 3 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            for m in 0..n {
                                d3g.set(i, j, k, l, m, e(i, j).third(k, l, m));
                            }
                        }
                    }
                }
            }
        }

        // ∂ g^{-1} = -g^{-1} (∂g) g^{-1}
        let dg_mat = |k: usize| DMatrix::from_fn(n, n, |i, j| dg.get(i, j, k));
        let d2g_mat =
            |k: usize, l: usize| DMatrix::from_fn(n, n, |i, j| d2g.get(i, j, k, l));
        let mut dginv = T3::zeros(n);
        let mut d2ginv = T4::zeros(n);
        if order >= 1 {
            for k in 0..n {
                let m = -(&ginv * dg_mat(k) * &ginv);
                for i in 0..n {
                    for j in 0..n {
                        dginv.set(i, j, k, m[(i, j)]);
                    }
                }
            }
        }
        if order >= 2 {
            for k in 0..n {
                for l in 0..n {
                    let a = &ginv * dg_mat(k) * &ginv * dg_mat(l) * &ginv;
                    let b = &ginv * dg_mat(l) * &ginv * dg_mat(k) * &ginv;
                    let c = &ginv * d2g_mat(k, l) * &ginv;
                    for i in 0..n {
                        for j in 0..n {
                            d2ginv.set(i, j, k, l, a[(i, j)] + b[(i, j)] - c[(i, j)]);
                        }
                    }
                }
            }
        }

        // Γ^k_ij = 1/2 g^{km} (∂_i g_{mj} + ∂_j g_{mi} - ∂_m g_{ij})
        let mut gamma = T3::zeros(n);
        let mut dgamma = T4::zeros(n);
        let mut d2gamma = T5::zeros(n);
        let a0 = |m: usize, i: usize, j: usize| {
            dg.get(m, j, i) + dg.get(m, i, j) - dg.get(i, j, m)
        };
        let a1 = |m: usize, i: usize, j: usize, l: usize| {
            d2g.get(m, j, i, l) + d2g.get(m, i, j, l) - d2g.get(i, j, m, l)
        };
        let a2 = |m: usize, i: usize, j: usize, l: usize, p: usize| {
            d3g.get(m, j, i, l, p) + d3g.get(m, i, j, l, p) - d3g.get(i, j, m, l, p)
        };
        if order >= 1 {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut s = 0.0;
                        for m in 0..n {
                            s += ginv[(k, m)] * a0(m, i, j);
                        }
                        gamma.set(k, i, j, 0.5 * s);
                    }
                }
            }
        }
        if order >= 2 {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        for l in 0..n {
                            let mut s = 0.0;
                            for m in 0..n {
                                s += dginv.get(k, m, l) * a0(m, i, j)
                                    + ginv[(k, m)] * a1(m, i, j, l);
                            }
                            dgamma.set(k, i, j, l, 0.5 * s);
                        }
                    }
                }
            }
        }
        if order >= 3 {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        for l in 0..n {
                            for p in 0..n {
                                let mut s = 0.0;
                                for m in 0..n {
                                    s += d2ginv.get(k, m, l, p) * a0(m, i, j)
                                        + dginv.get(k, m, l) * a1(m, i, j, p)
                                        + dginv.get(k, m, p) * a1(m, i, j, l)
                                        + ginv[(k, m)] * a2(m, i, j, l, p);
                                }
                                d2gamma.set(k, i, j, l, p, 0.5 * s);
                            }
                        }
                    }
                }
            }
        }

        Ok(MetricJets {
            n,
            order,
            g,
            ginv,
            min_eig,
            dg,
            d2g,
            d3g,
            dginv,
            d2ginv,
            gamma,
            dgamma,
            d2gamma,
        })
    }

    pub fn christoffel(&self) -> &T3 {
        &self.gamma
    }

    /// Coefficient of `e_l` in `R(e_i, e_j) e_k`.
    fn riemann_mixed(&self) -> T4 {
        let n = self.n;
        T4::from_fn(n, |l, i, j, k| {
            let mut s = self.dgamma.get(l, j, k, i) - self.dgamma.get(l, i, k, j);
            for m in 0..n {
                s += self.gamma.get(m, j, k) * self.gamma.get(l, i, m)
                    - self.gamma.get(m, i, k) * self.gamma.get(l, j, m);
            }
            s
        })
    }

    fn driemann_mixed(&self) -> T5 {
        let n = self.n;
        let mut out = T5::zeros(n);
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for p in 0..n {
                            let mut s = self.d2gamma.get(l, j, k, i, p)
                                - self.d2gamma.get(l, i, k, j, p);
                            for m in 0..n {
                                s += self.dgamma.get(m, j, k, p) * self.gamma.get(l, i, m)
                                    + self.gamma.get(m, j, k) * self.dgamma.get(l, i, m, p)
                                    - self.dgamma.get(m, i, k, p) * self.gamma.get(l, j, m)
                                    - self.gamma.get(m, i, k) * self.dgamma.get(l, j, m, p);
                            }
                            out.set(l, i, j, k, p, s);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn riemann(&self) -> Tensor4Value {
        let n = self.n;
        let mixed = self.riemann_mixed();
        Tensor4Value::from_fn(n, |i, j, k, l| {
            let mut s = 0.0;
            for m in 0..n {
                s += mixed.get(m, i, j, k) * self.g[(m, l)];
            }
            s
        })
    }

    /// drm[i][j][k][l][p] = ∂_p Rm_{ijkl}; needs order 3.
    pub fn driemann(&self) -> T5 {
        assert!(self.order >= 3, "driemann needs order-3 metric jets");
        let n = self.n;
        let mixed = self.riemann_mixed();
        let dmixed = self.driemann_mixed();
        let mut out = T5::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        for p in 0..n {
                            let mut s = 0.0;
                            for m in 0..n {
                                s += dmixed.get(m, i, j, k, p) * self.g[(m, l)]
                                    + mixed.get(m, i, j, k) * self.dg.get(m, l, p);
                            }
                            out.set(i, j, k, l, p, s);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn ricci(&self) -> Sym2Value {
        let n = self.n;
        let rm = self.riemann();
        let raw = DMatrix::from_fn(n, n, |j, k| {
            let mut s = 0.0;
            for i in 0..n {
                for l in 0..n {
                    s += self.ginv[(i, l)] * rm.get(i, j, k, l);
                }
            }
            s
        });
        Sym2Value::symmetrized(&raw).0
    }

    /// dric[j][k][p] = ∂_p Ric_{jk}; needs order 3.
    pub fn dricci(&self) -> T3 {
        let n = self.n;
        let rm = self.riemann();
        let drm = self.driemann();
        T3::from_fn(n, |j, k, p| {
            let mut s = 0.0;
            for i in 0..n {
                for l in 0..n {
                    s += self.dginv.get(i, l, p) * rm.get(i, j, k, l)
                        + self.ginv[(i, l)] * drm.get(i, j, k, l, p);
                }
            }
            s
        })
    }

    pub fn scalar(&self) -> f64 {
        let n = self.n;
        let ric = self.ricci();
        let mut s = 0.0;
        for j in 0..n {
            for k in 0..n {
                s += self.ginv[(j, k)] * ric.get(j, k);
            }
        }
        s
    }

    /// ds[p] = ∂_p S; needs order 3.
    pub fn dscalar(&self) -> Vec<f64> {
        let n = self.n;
        let ric = self.ricci();
        let dric = self.dricci();
        (0..n)
            .map(|p| {
                let mut s = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        s += self.dginv.get(j, k, p) * ric.get(j, k)
                            + self.ginv[(j, k)] * dric.get(j, k, p);
                    }
                }
                s
            })
            .collect()
    }

    pub fn hessian(&self, u: &ScalarJets) -> Sym2Value {
        let n = self.n;
        Sym2Value::from_fn_sym(n, |i, j| {
            let mut s = u.d2[(i, j)];
            for k in 0..n {
                s -= self.gamma.get(k, i, j) * u.d1[k];
            }
            s
        })
    }

    /// Hessian and its coordinate derivative; needs order-2 metric jets and
    /// an order-3 scalar jet.
    pub fn hessian_with_derivative(&self, u: &ScalarJets) -> (Sym2Value, T3) {
        let n = self.n;
        let h = self.hessian(u);
        let dh = T3::from_fn(n, |i, j, m| {
            let mut s = u.d3.get(i, j, m);
            for k in 0..n {
                s -= self.dgamma.get(k, i, j, m) * u.d1[k]
                    + self.gamma.get(k, i, j) * u.d2[(k, m)];
            }
            s
        });
        (h, dh)
    }

    pub fn gradient(&self, u: &ScalarJets) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|j| self.ginv[(i, j)] * u.d1[j]).sum())
            .collect()
    }

    pub fn laplacian(&self, u: &ScalarJets) -> f64 {
        let n = self.n;
        let h = self.hessian(u);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.ginv[(i, j)] * h.get(i, j);
            }
        }
        s
    }

    pub fn grad_norm2(&self, u: &ScalarJets) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.ginv[(i, j)] * u.d1[i] * u.d1[j];
            }
        }
        s
    }

    /// Full covariant derivative of an endomorphism:
    /// out[k][j][i] = ((∇_i B) e_j)^k.
    pub fn nabla_endo(&self, b: &EndoJets) -> T3 {
        let n = self.n;
        T3::from_fn(n, |k, j, i| {
            let mut s = b.db.get(k, j, i);
            for m in 0..n {
                s += self.gamma.get(k, i, m) * b.b[(m, j)]
                    - self.gamma.get(m, i, j) * b.b[(k, m)];
            }
            s
        })
    }

    /// d^∇B(e_i, e_j) = (∇_i B) e_j - (∇_j B) e_i, component k in out[k][i][j].
    pub fn dnabla_endo(&self, b: &EndoJets) -> T3 {
        let n = self.n;
        let nb = self.nabla_endo(b);
        T3::from_fn(n, |k, i, j| nb.get(k, j, i) - nb.get(k, i, j))
    }

    /// Full covariant derivative of a symmetric 2-tensor:
    /// out[i][j][k] = (∇_k T)(e_i, e_j).
    pub fn nabla_sym2(&self, t: &Sym2Jets) -> T3 {
        let n = self.n;
        T3::from_fn(n, |i, j, k| {
            let mut s = t.dt.get(i, j, k);
            for m in 0..n {
                s -= self.gamma.get(m, k, i) * t.t[(m, j)] + self.gamma.get(m, k, j) * t.t[(i, m)];
            }
            s
        })
    }

    /// d^∇T(X,Y,Z) = (∇_Y T)(X,Z) - (∇_Z T)(X,Y) on basis triples:
    /// out[x][y][z].
    pub fn dnabla_sym2(&self, t: &Sym2Jets) -> T3 {
        let n = self.n;
        let nt = self.nabla_sym2(t);
        T3::from_fn(n, |x, y, z| nt.get(x, z, y) - nt.get(x, y, z))
    }

    /// Max violation of metric compatibility ∇g = 0 (diagnostic).
    pub fn compatibility_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = self.dg.get(i, j, k);
                    for m in 0..n {
                        s -= self.gamma.get(m, k, i) * self.g[(m, j)]
                            + self.gamma.get(m, k, j) * self.g[(i, m)];
                    }
                    worst = worst.max(s.abs());
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetcalc::{
        christoffel, dnabla_endo, dnabla_sym2, hessian, laplacian, ricci, riemann, scalar,
        smooth_impl, ConstSym2, DerivEngine, EndoField, RingEval, ScalarField, Sym2Field,
    };
    use crate::multilinear::{kulkarni_nomizu, sectional, MetricValue, Sym2Value};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    // polar coordinates flat metric diag(1, r^2), coords (x1, x2) = (r, θ)
    struct PolarFlat;
    impl PolarFlat {
        fn dims(&self) -> (usize, usize) {
            (2, 3)
        }
        fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> crate::Result<()> {
            out[0] = x[0].lift(1.0);
            out[1] = x[0].lift(0.0);
            out[2] = x[0].mul(&x[0]);
            Ok(())
        }
    }
    smooth_impl!(PolarFlat);

    // upper half-space hyperbolic metric δ_ij / x_n^2
    pub struct HalfSpace {
        pub n: usize,
    }
    impl HalfSpace {
        fn dims(&self) -> (usize, usize) {
            (self.n, tri_len(self.n))
        }
        fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> crate::Result<()> {
            let w = x[self.n - 1].mul(&x[self.n - 1]).recip();
            let mut idx = 0;
            for i in 0..self.n {
                for j in i..self.n {
                    out[idx] = if i == j { w.clone() } else { x[0].lift(0.0) };
                    idx += 1;
                }
            }
            Ok(())
        }
    }
    smooth_impl!(HalfSpace);

    // round sphere radius r in stereographic coordinates
    pub struct Sphere {
        pub n: usize,
        pub r: f64,
    }
    impl Sphere {
        fn dims(&self) -> (usize, usize) {
            (self.n, tri_len(self.n))
        }
        fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> crate::Result<()> {
            let mut norm2 = x[0].lift(self.r * self.r);
            for xi in x {
                norm2 = norm2.add(&xi.mul(xi));
            }
            let c = norm2.recip().scale(2.0 * self.r * self.r);
            let f = c.mul(&c);
            let mut idx = 0;
            for i in 0..self.n {
                for j in i..self.n {
                    out[idx] = if i == j { f.clone() } else { x[0].lift(0.0) };
                    idx += 1;
                }
            }
            Ok(())
        }
    }
    smooth_impl!(Sphere);

    fn half_space(n: usize) -> Sym2Field {
        Sym2Field::new(n, Arc::new(HalfSpace { n }))
    }

    fn sphere(n: usize, r: f64) -> Sym2Field {
        Sym2Field::new(n, Arc::new(Sphere { n, r }))
    }

    #[test]
    fn flat_metric_is_flat() {
        let g = ConstSym2::identity(3);
        let eng = DerivEngine::ad();
        let p = [0.2, -0.4, 0.9];
        assert_eq!(christoffel(&g, &eng, &p).unwrap().max_abs(), 0.0);
        assert_eq!(riemann(&g, &eng, &p).unwrap().max_abs(), 0.0);
        assert_eq!(ricci(&g, &eng, &p).unwrap().max_abs(), 0.0);
        assert_eq!(scalar(&g, &eng, &p).unwrap(), 0.0);
    }

    #[test]
    fn polar_christoffel_oracle() {
        // hand computation from the ∂g formula: Γ^1_22 = -r, Γ^2_12 = 1/r
        let g = Sym2Field::new(2, Arc::new(PolarFlat));
        let eng = DerivEngine::ad();
        let r = 1.7;
        let gamma = christoffel(&g, &eng, &[r, 0.3]).unwrap();
        assert_relative_eq!(gamma.get(0, 1, 1), -r, max_relative = 1e-14);
        assert_relative_eq!(gamma.get(1, 0, 1), 1.0 / r, max_relative = 1e-14);
        assert_relative_eq!(gamma.get(1, 1, 0), 1.0 / r, max_relative = 1e-14);
        // flat in disguise: curvature vanishes
        let rm = riemann(&g, &eng, &[r, 0.3]).unwrap();
        assert!(rm.max_abs() < 1e-13);
    }

    #[test]
    fn metric_compatibility_holds() {
        let g = sphere(3, 1.0);
        let eng = DerivEngine::ad();
        let mj = g.metric_jets(&eng, &[0.3, -0.2, 0.5], 2).unwrap();
        assert!(mj.compatibility_defect() < 1e-13);
    }

    #[test]
    fn sphere_constant_curvature() {
        let eng = DerivEngine::ad();
        for (n, r) in [(2usize, 2.0f64), (3, 1.0), (3, 0.5)] {
            let g = sphere(n, r);
            let p: Vec<f64> = (0..n).map(|i| 0.1 + 0.15 * i as f64).collect();
            let rm = riemann(&g, &eng, &p).unwrap();
            assert!(rm.symmetry_defect() < 1e-9);
            let gv = g.metric_value(&p).unwrap();
            let k = 1.0 / (r * r);
            let expect = kulkarni_nomizu(gv.sym(), gv.sym()).unwrap().scale(0.5 * k);
            let err = rm.sub(&expect).max_abs() / expect.max_abs();
            assert!(err < 1e-8, "sphere n={n} r={r} err={err}");
            // sectional curvature through the tensor: 1/r^2
            let x = vec![1.0; n];
            let mut y = vec![0.0; n];
            y[n - 1] = 1.0;
            y[0] = -0.3;
            let s = sectional(&gv, &rm, &x, &y).unwrap();
            assert_relative_eq!(s, k, max_relative = 1e-9);
        }
    }

    #[test]
    fn half_space_constant_negative_curvature() {
        let eng = DerivEngine::ad();
        for n in [2usize, 3, 4] {
            let g = half_space(n);
            let mut p = vec![0.3; n];
            p[n - 1] = 0.8;
            let rm = riemann(&g, &eng, &p).unwrap();
            let gv = g.metric_value(&p).unwrap();
            let expect = kulkarni_nomizu(gv.sym(), gv.sym()).unwrap().scale(-0.5);
            let err = rm.sub(&expect).max_abs() / expect.max_abs();
            assert!(err < 1e-8, "half-space n={n} err={err}");
            assert_relative_eq!(
                scalar(&g, &eng, &p).unwrap(),
                -(n as f64) * (n as f64 - 1.0),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn constant_curvature_traces() {
        // Ric = (n-1)K g, S = n(n-1)K via the trace identity
        let eng = DerivEngine::ad();
        let n = 3;
        let g = sphere(n, 1.0);
        let p = [0.2, 0.4, -0.1];
        let ric = ricci(&g, &eng, &p).unwrap();
        let gv = g.metric_value(&p).unwrap();
        let expect = gv.sym().scale((n - 1) as f64);
        assert!(ric.sub(&expect).max_abs() / expect.max_abs() < 1e-9);
        // round S^3 radius 1: S = 6
        assert_relative_eq!(scalar(&g, &eng, &p).unwrap(), 6.0, max_relative = 1e-9);
    }

    #[test]
    fn scalar_equals_double_trace_of_riemann() {
        use crate::multilinear::{trace2, trace4};
        let eng = DerivEngine::ad();
        let g = sphere(3, 2.0);
        let p = [0.3, -0.5, 0.2];
        let s1 = scalar(&g, &eng, &p).unwrap();
        let gv = g.metric_value(&p).unwrap();
        let rm = riemann(&g, &eng, &p).unwrap();
        let s2 = trace2(&gv, &trace4(&gv, &rm).unwrap()).unwrap();
        assert_relative_eq!(s1, s2, max_relative = 1e-12);
    }

    struct Quadratic {
        n: usize,
    }
    impl Quadratic {
        fn dims(&self) -> (usize, usize) {
            (self.n, 1)
        }
        fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> crate::Result<()> {
            let mut s = x[0].lift(0.0);
            for xi in x {
                s = s.add(&xi.mul(xi));
            }
            out[0] = s.scale(0.5);
            Ok(())
        }
    }
    smooth_impl!(Quadratic);

    struct Product2;
    impl Product2 {
        fn dims(&self) -> (usize, usize) {
            (2, 1)
        }
        fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> crate::Result<()> {
            out[0] = x[0].mul(&x[1]);
            Ok(())
        }
    }
    smooth_impl!(Product2);

    #[test]
    fn hessian_gradient_laplacian() {
        let eng = DerivEngine::ad();
        let n = 3;
        let g = ConstSym2::identity(n);
        let u = ScalarField::new(Arc::new(Quadratic { n }));
        let p = [0.3, 0.9, -0.2];
        let h = hessian(&g, &u, &eng, &p).unwrap();
        assert!(h.sub(&Sym2Value::identity(n)).max_abs() < 1e-14);
        assert_relative_eq!(laplacian(&g, &u, &eng, &p).unwrap(), n as f64);

        let g2 = ConstSym2::identity(2);
        let u2 = ScalarField::new(Arc::new(Product2));
        let h2 = hessian(&g2, &u2, &eng, &[0.4, 0.7]).unwrap();
        assert_relative_eq!(h2.get(0, 1), 1.0);
        assert_relative_eq!(h2.get(0, 0), 0.0);

        // constant field: everything zero
        let c = ScalarField::new(Arc::new(ConstScalar { n, v: 3.5 }));
        assert_eq!(hessian(&g, &c, &eng, &p).unwrap().max_abs(), 0.0);
        assert_eq!(laplacian(&g, &c, &eng, &p).unwrap(), 0.0);
    }

    pub struct ConstScalar {
        pub n: usize,
        pub v: f64,
    }
    impl ConstScalar {
        fn dims(&self) -> (usize, usize) {
            (self.n, 1)
        }
        fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> crate::Result<()> {
            out[0] = x[0].lift(self.v);
            Ok(())
        }
    }
    smooth_impl!(ConstScalar);

    // B = x1 * Id on flat space
    struct LinearEndo;
    impl LinearEndo {
        fn dims(&self) -> (usize, usize) {
            (2, 4)
        }
        fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> crate::Result<()> {
            out[0] = x[0].clone();
            out[1] = x[0].lift(0.0);
            out[2] = x[0].lift(0.0);
            out[3] = x[0].clone();
            Ok(())
        }
    }
    smooth_impl!(LinearEndo);

    #[test]
    fn dnabla_endo_examples() {
        let eng = DerivEngine::ad();
        let g = ConstSym2::identity(2);
        let b = EndoField::new(2, Arc::new(LinearEndo));
        let d = dnabla_endo(&g, &b, &eng, &[0.3, 0.8]).unwrap();
        // (∇_{e1}B)e2 - (∇_{e2}B)e1 = (∂_1 f) e2 - (∂_2 f) e1 = e2
        assert_relative_eq!(d.get(0, 0, 1), 0.0);
        assert_relative_eq!(d.get(1, 0, 1), 1.0);
        // antisymmetry
        assert_relative_eq!(d.get(1, 1, 0), -1.0);
        // B = Id has d^∇B = 0 even on a curved metric
        let gs = sphere(2, 1.0);
        let id = EndoField::new(2, Arc::new(ConstEndo { n: 2, diag: 1.0 }));
        let d0 = dnabla_endo(&gs, &id, &eng, &[0.3, 0.8]).unwrap();
        assert!(d0.max_abs() < 1e-14);
    }

    pub struct ConstEndo {
        pub n: usize,
        pub diag: f64,
    }
    impl ConstEndo {
        fn dims(&self) -> (usize, usize) {
            (self.n, self.n * self.n)
        }
        fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> crate::Result<()> {
            for i in 0..self.n {
                for j in 0..self.n {
                    out[i * self.n + j] = x[0].lift(if i == j { self.diag } else { 0.0 });
                }
            }
            Ok(())
        }
    }
    smooth_impl!(ConstEndo);

    // T = diag(x2, 0) on flat 2d
    struct ShiftSym;
    impl ShiftSym {
        fn dims(&self) -> (usize, usize) {
            (2, 3)
        }
        fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> crate::Result<()> {
            out[0] = x[1].clone();
            out[1] = x[0].lift(0.0);
            out[2] = x[0].lift(0.0);
            Ok(())
        }
    }
    smooth_impl!(ShiftSym);

    #[test]
    fn dnabla_sym2_examples() {
        let eng = DerivEngine::ad();
        let g = ConstSym2::identity(2);
        let t = Sym2Field::new(2, Arc::new(ShiftSym));
        let d = dnabla_sym2(&g, &t, &eng, &[0.1, 0.2]).unwrap();
        // d^∇T(e1,e1,e2) = -∂_2 T_11 = -1
        assert_relative_eq!(d.get(0, 0, 1), -1.0);
        // antisymmetric in last two slots
        assert_relative_eq!(d.get(0, 1, 0), 1.0);
        // T = g gives zero by metric compatibility
        let gs = sphere(2, 1.5);
        let d0 = dnabla_sym2(&gs, &gs, &eng, &[0.3, -0.4]).unwrap();
        assert!(d0.max_abs() < 1e-13);
    }

    #[test]
    fn dnabla_sym2_endo_compatibility() {
        // d^∇T(X,Y,Z) = g(X, d^∇(g^{-1}T)(Y,Z))
        let eng = DerivEngine::ad();
        let n = 2;
        let gs = sphere(n, 1.0);
        let t = Sym2Field::new(n, Arc::new(ShiftSym));
        let p = [0.25, -0.35];
        let d_t = dnabla_sym2(&gs, &t, &eng, &p).unwrap();
        // build g^{-1}T as an endo field pointwise via jets: here by direct values
        let mj = gs.metric_jets(&eng, &p, 1).unwrap();
        let tj = Sym2Jets::from_entries(n, &t.entry_jets(&eng, &p, 1).unwrap());
        // compose: endo K = g^{-1} T has jets via product rule
        let kv = &mj.ginv * &tj.t;
        let mut dk = T3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for p_ in 0..n {
                    let mut s = 0.0;
                    for m in 0..n {
                        s += mj.dginv.get(i, m, p_) * tj.t[(m, j)]
                            + mj.ginv[(i, m)] * tj.dt.get(m, j, p_);
                    }
                    dk.set(i, j, p_, s);
                }
            }
        }
        let kjets = EndoJets { n, b: kv, db: dk };
        let d_k = mj.dnabla_endo(&kjets);
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    let mut rhs = 0.0;
                    for m in 0..n {
                        rhs += mj.g[(x, m)] * d_k.get(m, y, z);
                    }
                    assert_relative_eq!(d_t.get(x, y, z), rhs, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn ad_and_fd_riemann_agree() {
        let fd = DerivEngine::fd();
        let ad = DerivEngine::ad();
        let g = sphere(3, 1.0);
        let p = [0.3, -0.2, 0.5];
        let rm_ad = riemann(&g, &ad, &p).unwrap();
        let rm_fd = riemann(&g, &fd, &p).unwrap();
        let err = rm_ad.sub(&rm_fd).max_abs() / rm_ad.max_abs().max(1.0);
        assert!(err < 1e-6, "engine disagreement {err}");
    }

    #[test]
    fn degenerate_metric_reports_eigenvalue() {
        let g = Sym2Field::new(2, Arc::new(IndefiniteAt));
        let eng = DerivEngine::ad();
        match riemann(&g, &eng, &[2.0, 0.0]) {
            Err(Error::NotPositiveDefinite { min_eig }) => assert!(min_eig < 0.0),
            other => panic!("expected degenerate metric, got {other:?}"),
        }
    }

    struct IndefiniteAt;
    impl IndefiniteAt {
        fn dims(&self) -> (usize, usize) {
            (2, 3)
        }
        fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> crate::Result<()> {
            // g = diag(1 - x1, 1): not positive definite once x1 >= 1
            out[0] = x[0].lift(1.0).sub(&x[0]);
            out[1] = x[0].lift(0.0);
            out[2] = x[0].lift(1.0);
            Ok(())
        }
    }
    smooth_impl!(IndefiniteAt);
}
