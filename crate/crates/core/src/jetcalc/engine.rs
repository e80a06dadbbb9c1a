//! Differentiation engines. Forward jets are the default (exact to machine
//! precision). Central differences with optional Richardson extrapolation act
//! as an independent cross-check of every derivative the jets produce.

use super::SmoothMap;
use crate::jet::Jet;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineMode {
    /// Forward-mode truncated Taylor jets.
    Ad,
    /// Central finite differences on plain evaluations.
    Fd,
}

#[derive(Debug, Clone)]
pub struct DerivEngine {
    pub mode: EngineMode,
    /// Multiplier on the per-order default steps (finite differences only).
    pub step: f64,
    pub richardson: bool,
}

impl Default for DerivEngine {
    fn default() -> Self {
        DerivEngine::ad()
    }
}

impl DerivEngine {
    pub fn ad() -> Self {
        DerivEngine { mode: EngineMode::Ad, step: 1.0, richardson: true }
    }

    pub fn fd() -> Self {
        DerivEngine { mode: EngineMode::Fd, step: 1.0, richardson: true }
    }

    pub fn name(&self) -> &'static str {
        match self.mode {
            EngineMode::Ad => "ad",
            EngineMode::Fd => "fd",
        }
    }

    /// Jets of all outputs of `map` at `x`. Jet mode delivers the requested
    /// order exactly; difference mode is capped at order 3.
    pub fn jets(&self, map: &dyn SmoothMap, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        match self.mode {
            EngineMode::Ad => {
                let n = map.dim_in();
                let seeds: Vec<Jet> = (0..n).map(|i| Jet::variable(x[i], i, n, order)).collect();
                let mut out = vec![Jet::constant(0.0, n, order); map.dim_out()];
                map.eval_jet(&seeds, &mut out)?;
                Ok(out)
            }
            EngineMode::Fd => self.fd_jets(map, x, order.min(3)),
        }
    }

    fn fd_jets(&self, map: &dyn SmoothMap, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        let n = map.dim_in();
        let m = map.dim_out();
        let eval = |dx: &[(usize, f64)]| -> Result<Vec<f64>> {
            let mut p = x.to_vec();
            for &(i, d) in dx {
                p[i] += d;
            }
            let mut out = vec![0.0; m];
            map.eval_f64(&p, &mut out)?;
            Ok(out)
        };
        // per-axis steps, scaled by the coordinate magnitude
        let scale: Vec<f64> = x.iter().map(|v| v.abs().max(1.0)).collect();
        let (c1, c2, c3) = if self.richardson {
            (1e-3, 3e-3, 6e-3)
        } else {
            (6e-6, 1.2e-4, 8e-4)
        };

        let mut jets = vec![Jet::constant(0.0, n, order); m];
        let f0 = eval(&[])?;
        for (c, jet) in f0.iter().zip(jets.iter_mut()) {
            *jet = Jet::constant(*c, n, order);
        }
        if order == 0 {
            return Ok(jets);
        }

        let combine = |d_h: Vec<f64>, d_h2: Vec<f64>| -> Vec<f64> {
            d_h2.iter()
                .zip(&d_h)
                .map(|(a, b)| (4.0 * a - b) / 3.0)
                .collect()
        };
        let richardson = |stencil: &dyn Fn(f64) -> Result<Vec<f64>>, h: f64| -> Result<Vec<f64>> {
            if self.richardson {
                Ok(combine(stencil(h)?, stencil(0.5 * h)?))
            } else {
                stencil(h)
            }
        };

        // first derivatives
        for i in 0..n {
            let h1 = c1 * self.step * scale[i];
            let d = richardson(
                &|h| {
                    let fp = eval(&[(i, h)])?;
                    let fm = eval(&[(i, -h)])?;
                    Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
                },
                h1,
            )?;
            for (jet, v) in jets.iter_mut().zip(&d) {
                jet.set_grad(i, *v);
            }
        }
        if order == 1 {
            return Ok(jets);
        }

        // second derivatives
        for i in 0..n {
            let hi = c2 * self.step * scale[i];
            let d = richardson(
                &|h| {
                    let fp = eval(&[(i, h)])?;
                    let fm = eval(&[(i, -h)])?;
                    Ok(fp
                        .iter()
                        .zip(&fm)
                        .zip(&f0)
                        .map(|((a, b), c)| (a - 2.0 * c + b) / (h * h))
                        .collect())
                },
                hi,
            )?;
            for (jet, v) in jets.iter_mut().zip(&d) {
                jet.set_hess(i, i, *v);
            }
            for j in (i + 1)..n {
                let ratio = scale[j] / scale[i];
                let d = richardson(
                    &|h| {
                        let hj = h * ratio;
                        let pp = eval(&[(i, h), (j, hj)])?;
                        let pm = eval(&[(i, h), (j, -hj)])?;
                        let mp = eval(&[(i, -h), (j, hj)])?;
                        let mm = eval(&[(i, -h), (j, -hj)])?;
                        Ok((0..m)
                            .map(|k| (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * h * hj))
                            .collect())
                    },
                    hi,
                )?;
                for (jet, v) in jets.iter_mut().zip(&d) {
                    jet.set_hess(i, j, *v);
                }
            }
        }
        if order == 2 {
            return Ok(jets);
        }

        // third derivatives
        for i in 0..n {
            let hi = c3 * self.step * scale[i];
            // pure: f_iii
            let d = richardson(
                &|h| {
                    let p2 = eval(&[(i, 2.0 * h)])?;
                    let p1 = eval(&[(i, h)])?;
                    let m1 = eval(&[(i, -h)])?;
                    let m2 = eval(&[(i, -2.0 * h)])?;
                    Ok((0..m)
                        .map(|k| (p2[k] - 2.0 * p1[k] + 2.0 * m1[k] - m2[k]) / (2.0 * h * h * h))
                        .collect())
                },
                hi,
            )?;
            for (jet, v) in jets.iter_mut().zip(&d) {
                jet.set_third_sym(i, i, i, *v);
            }
            // mixed: f_iij = ∂_j of the pure second difference in i
            for j in 0..n {
                if j == i {
                    continue;
                }
                let ratio = scale[j] / scale[i];
                let d = richardson(
                    &|h| {
                        let hj = h * ratio;
                        let a = eval(&[(i, h), (j, hj)])?;
                        let b = eval(&[(j, hj)])?;
                        let c = eval(&[(i, -h), (j, hj)])?;
                        let d_ = eval(&[(i, h), (j, -hj)])?;
                        let e = eval(&[(j, -hj)])?;
                        let f = eval(&[(i, -h), (j, -hj)])?;
                        Ok((0..m)
                            .map(|k| {
                                ((a[k] - 2.0 * b[k] + c[k]) - (d_[k] - 2.0 * e[k] + f[k]))
                                    / (2.0 * h * h * hj)
                            })
                            .collect())
                    },
                    hi,
                )?;
                for (jet, v) in jets.iter_mut().zip(&d) {
                    jet.set_third_sym(i, i, j, *v);
                }
            }
            // fully mixed: f_ijk over distinct triples
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    let rj = scale[j] / scale[i];
                    let rk = scale[k] / scale[i];
                    let d = richardson(
                        &|h| {
                            let (hj, hk) = (h * rj, h * rk);
                            let mut acc = vec![0.0; m];
                            for si in [-1.0, 1.0] {
                                for sj in [-1.0, 1.0] {
                                    for sk in [-1.0, 1.0] {
                                        let f = eval(&[
                                            (i, si * h),
                                            (j, sj * hj),
                                            (k, sk * hk),
                                        ])?;
                                        for (a, v) in acc.iter_mut().zip(&f) {
                                            *a += si * sj * sk * v;
                                        }
                                    }
                                }
                            }
                            Ok(acc.iter().map(|v| v / (8.0 * h * hj * hk)).collect())
                        },
                        hi,
                    )?;
                    for (jet, v) in jets.iter_mut().zip(&d) {
                        jet.set_third_sym(i, j, k, *v);
                    }
                }
            }
        }
        Ok(jets)
    }
}
