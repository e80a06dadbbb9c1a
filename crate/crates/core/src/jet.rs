//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] carries the value of a smooth function of `n` chart variables
//! together with its partial derivatives up to `order` (at most 4). All
//! arithmetic propagates derivatives exactly, so chains of field operations
//! stay at machine precision. Derivative blocks are stored dense and fully
//! symmetric; `n` is small (chart dimensions at desk scale).

use std::ops::{Add, Div, Mul, Neg, Sub};

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    n: usize,
    order: usize,
    v: f64,
    d1: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
    d4: Vec<f64>,
}

fn zeros(len: usize) -> Vec<f64> {
    vec![0.0; len]
}

impl Jet {
    pub fn constant(v: f64, n: usize, order: usize) -> Self {
        assert!(order <= MAX_ORDER);
        Jet {
            n,
            order,
            v,
            d1: if order >= 1 { zeros(n) } else { Vec::new() },
            d2: if order >= 2 { zeros(n * n) } else { Vec::new() },
            d3: if order >= 3 { zeros(n * n * n) } else { Vec::new() },
            d4: if order >= 4 { zeros(n * n * n * n) } else { Vec::new() },
        }
    }

    /// Seed for the `i`-th chart coordinate.
    pub fn variable(v: f64, i: usize, n: usize, order: usize) -> Self {
        let mut j = Jet::constant(v, n, order);
        if order >= 1 {
            j.d1[i] = 1.0;
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.v
    }

    pub fn grad(&self, i: usize) -> f64 {
        debug_assert!(self.order >= 1);
        self.d1[i]
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        debug_assert!(self.order >= 2);
        self.d2[i * self.n + j]
    }

    pub fn third(&self, i: usize, j: usize, k: usize) -> f64 {
        debug_assert!(self.order >= 3);
        self.d3[(i * self.n + j) * self.n + k]
    }

    pub fn fourth(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        debug_assert!(self.order >= 4);
        self.d4[((i * self.n + j) * self.n + k) * self.n + l]
    }

    pub fn set_hess(&mut self, i: usize, j: usize, val: f64) {
        let n = self.n;
        self.d2[i * n + j] = val;
        self.d2[j * n + i] = val;
    }

    pub fn set_grad(&mut self, i: usize, val: f64) {
        self.d1[i] = val;
    }

    pub fn set_third_sym(&mut self, i: usize, j: usize, k: usize, val: f64) {
        let n = self.n;
        let mut put = |a: usize, b: usize, c: usize| {
            self.d3[(a * n + b) * n + c] = val;
        };
        put(i, j, k);
        put(i, k, j);
        put(j, i, k);
        put(j, k, i);
        put(k, i, j);
        put(k, j, i);
    }

    /// The jet of `∂_i self`, one order lower. The top coefficients of the
    /// result are truncated away, which is what limits derived fields (an
    /// immersion seeded at order 4 yields metric entries valid to order 3).
    pub fn partial(&self, i: usize) -> Jet {
        assert!(self.order >= 1, "partial of an order-0 jet");
        let n = self.n;
        let order = self.order - 1;
        let mut r = Jet::constant(self.d1[i], n, order);
        if order >= 1 {
            for j in 0..n {
                r.d1[j] = self.d2[i * n + j];
            }
        }
        if order >= 2 {
            for j in 0..n {
                for k in 0..n {
                    r.d2[j * n + k] = self.d3[(i * n + j) * n + k];
                }
            }
        }
        if order >= 3 {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        r.d3[(j * n + k) * n + l] = self.d4[((i * n + j) * n + k) * n + l];
                    }
                }
            }
        }
        r
    }

    fn mul_jet(&self, b: &Jet) -> Jet {
        let a = self;
        debug_assert_eq!(a.n, b.n);
        let n = a.n;
        let order = a.order.min(b.order);
        let mut r = Jet::constant(a.v * b.v, n, order);
        if order >= 1 {
            for i in 0..n {
                r.d1[i] = a.v * b.d1[i] + a.d1[i] * b.v;
            }
        }
        if order >= 2 {
            for i in 0..n {
                for j in 0..n {
                    let ij = i * n + j;
                    r.d2[ij] =
                        a.v * b.d2[ij] + a.d1[i] * b.d1[j] + a.d1[j] * b.d1[i] + a.d2[ij] * b.v;
                }
            }
        }
        if order >= 3 {
            for i in 0..n {
                for j in 0..n {
                    let ij = i * n + j;
                    for k in 0..n {
                        let ijk = ij * n + k;
                        let (ik, jk) = (i * n + k, j * n + k);
                        r.d3[ijk] = a.v * b.d3[ijk]
                            + a.d1[i] * b.d2[jk]
                            + a.d1[j] * b.d2[ik]
                            + a.d1[k] * b.d2[ij]
                            + a.d2[ij] * b.d1[k]
                            + a.d2[ik] * b.d1[j]
                            + a.d2[jk] * b.d1[i]
                            + a.d3[ijk] * b.v;
                    }
                }
            }
        }
        if order >= 4 {
            for i in 0..n {
                for j in 0..n {
                    let ij = i * n + j;
                    for k in 0..n {
                        let (ik, jk) = (i * n + k, j * n + k);
                        let ijk = ij * n + k;
                        for l in 0..n {
                            let (il, jl, kl) = (i * n + l, j * n + l, k * n + l);
                            let (ijl, ikl, jkl) = (ij * n + l, ik * n + l, jk * n + l);
                            let ijkl = ijk * n + l;
                            r.d4[ijkl] = a.v * b.d4[ijkl]
                                + a.d1[i] * b.d3[jkl]
                                + a.d1[j] * b.d3[ikl]
                                + a.d1[k] * b.d3[ijl]
                                + a.d1[l] * b.d3[ijk]
                                + a.d2[ij] * b.d2[kl]
                                + a.d2[ik] * b.d2[jl]
                                + a.d2[il] * b.d2[jk]
                                + a.d2[kl] * b.d2[ij]
                                + a.d2[jl] * b.d2[ik]
                                + a.d2[jk] * b.d2[il]
                                + a.d3[ijk] * b.d1[l]
                                + a.d3[ijl] * b.d1[k]
                                + a.d3[ikl] * b.d1[j]
                                + a.d3[jkl] * b.d1[i]
                                + a.d4[ijkl] * b.v;
                        }
                    }
                }
            }
        }
        r
    }

    /// Composition with a scalar function given by its derivatives
    /// `[φ(v), φ'(v), φ''(v), φ'''(v), φ''''(v)]` at the jet's value.
    fn compose(&self, d: [f64; 5]) -> Jet {
        let n = self.n;
        let order = self.order;
        let mut r = Jet::constant(d[0], n, order);
        if order >= 1 {
            for i in 0..n {
                r.d1[i] = d[1] * self.d1[i];
            }
        }
        if order >= 2 {
            for i in 0..n {
                for j in 0..n {
                    let ij = i * n + j;
                    r.d2[ij] = d[2] * self.d1[i] * self.d1[j] + d[1] * self.d2[ij];
                }
            }
        }
        if order >= 3 {
            for i in 0..n {
                for j in 0..n {
                    let ij = i * n + j;
                    for k in 0..n {
                        let ijk = ij * n + k;
                        let (ik, jk) = (i * n + k, j * n + k);
                        r.d3[ijk] = d[3] * self.d1[i] * self.d1[j] * self.d1[k]
                            + d[2]
                                * (self.d2[ij] * self.d1[k]
                                    + self.d2[ik] * self.d1[j]
                                    + self.d2[jk] * self.d1[i])
                            + d[1] * self.d3[ijk];
                    }
                }
            }
        }
        if order >= 4 {
            for i in 0..n {
                for j in 0..n {
                    let ij = i * n + j;
                    for k in 0..n {
                        let (ik, jk) = (i * n + k, j * n + k);
                        let ijk = ij * n + k;
                        for l in 0..n {
                            let (il, jl, kl) = (i * n + l, j * n + l, k * n + l);
                            let (ijl, ikl, jkl) = (ij * n + l, ik * n + l, jk * n + l);
                            let ijkl = ijk * n + l;
                            let g1 = [self.d1[i], self.d1[j], self.d1[k], self.d1[l]];
                            // partition sums over {i,j,k,l}
                            let p4 = g1[0] * g1[1] * g1[2] * g1[3];
                            let p31 = self.d3[ijk] * g1[3]
                                + self.d3[ijl] * g1[2]
                                + self.d3[ikl] * g1[1]
                                + self.d3[jkl] * g1[0];
                            let p22 = self.d2[ij] * self.d2[kl]
                                + self.d2[ik] * self.d2[jl]
                                + self.d2[il] * self.d2[jk];
                            let p211 = self.d2[ij] * g1[2] * g1[3]
                                + self.d2[ik] * g1[1] * g1[3]
                                + self.d2[il] * g1[1] * g1[2]
                                + self.d2[jk] * g1[0] * g1[3]
                                + self.d2[jl] * g1[0] * g1[2]
                                + self.d2[kl] * g1[0] * g1[1];
                            r.d4[ijkl] = d[4] * p4
                                + d[3] * p211
                                + d[2] * (p31 + p22)
                                + d[1] * self.d4[ijkl];
                        }
                    }
                }
            }
        }
        r
    }

    pub fn recip(&self) -> Jet {
        let x = self.v;
        let x2 = x * x;
        self.compose([
            1.0 / x,
            -1.0 / x2,
            2.0 / (x2 * x),
            -6.0 / (x2 * x2),
            24.0 / (x2 * x2 * x),
        ])
    }

    pub fn exp(&self) -> Jet {
        let e = self.v.exp();
        self.compose([e, e, e, e, e])
    }

    pub fn ln(&self) -> Jet {
        let x = self.v;
        let x2 = x * x;
        self.compose([x.ln(), 1.0 / x, -1.0 / x2, 2.0 / (x2 * x), -6.0 / (x2 * x2)])
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.compose([s, c, -s, -c, s])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.compose([c, -s, -c, s, c])
    }

    pub fn sinh(&self) -> Jet {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.compose([s, c, s, c, s])
    }

    pub fn cosh(&self) -> Jet {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.compose([c, s, c, s, c])
    }

    pub fn tanh(&self) -> Jet {
        let t = self.v.tanh();
        let w = 1.0 - t * t; // sech^2
        self.compose([
            t,
            w,
            -2.0 * t * w,
            w * (6.0 * t * t - 2.0),
            t * w * (16.0 - 24.0 * t * t),
        ])
    }

    pub fn sqrt(&self) -> Jet {
        let x = self.v;
        let r = x.sqrt();
        self.compose([
            r,
            0.5 / r,
            -0.25 / (r * x),
            0.375 / (r * x * x),
            -0.9375 / (r * x * x * x),
        ])
    }

    pub fn powf(&self, p: f64) -> Jet {
        let x = self.v;
        self.compose([
            x.powf(p),
            p * x.powf(p - 1.0),
            p * (p - 1.0) * x.powf(p - 2.0),
            p * (p - 1.0) * (p - 2.0) * x.powf(p - 3.0),
            p * (p - 1.0) * (p - 2.0) * (p - 3.0) * x.powf(p - 4.0),
        ])
    }

    /// Integer power by repeated squaring; valid for any base sign.
    pub fn powi(&self, k: i32) -> Jet {
        if k == 0 {
            return Jet::constant(1.0, self.n, self.order);
        }
        if k < 0 {
            return self.recip().powi(-k);
        }
        let mut base = self.clone();
        let mut acc: Option<Jet> = None;
        let mut e = k as u32;
        loop {
            if e & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul_jet(&base),
                });
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = base.mul_jet(&base);
        }
        acc.unwrap()
    }

    pub fn scale(&self, c: f64) -> Jet {
        let mut r = self.clone();
        r.v *= c;
        for x in r
            .d1
            .iter_mut()
            .chain(r.d2.iter_mut())
            .chain(r.d3.iter_mut())
            .chain(r.d4.iter_mut())
        {
            *x *= c;
        }
        r
    }

    fn zip_with(&self, b: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert_eq!(self.n, b.n);
        let n = self.n;
        let order = self.order.min(b.order);
        let mut r = Jet::constant(f(self.v, b.v), n, order);
        let blocks: [(usize, fn(&Jet) -> &Vec<f64>, fn(&mut Jet) -> &mut Vec<f64>); 4] = [
            (1, |j| &j.d1, |j| &mut j.d1),
            (2, |j| &j.d2, |j| &mut j.d2),
            (3, |j| &j.d3, |j| &mut j.d3),
            (4, |j| &j.d4, |j| &mut j.d4),
        ];
        for (ord, get, get_mut) in blocks {
            if order >= ord {
                let (xa, xb) = (get(self), get(b));
                let out = get_mut(&mut r);
                for i in 0..out.len() {
                    out[i] = f(xa[i], xb[i]);
                }
            }
        }
        r
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Div for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self.mul_jet(&rhs.recip())
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! owned_ops {
    ($($t:ident :: $m:ident),*) => {$(
        impl $t for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet { $t::$m(&self, &rhs) }
        }
    )*};
}
owned_ops!(Add::add, Sub::sub, Mul::mul, Div::div);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}

/// Scalar ring shared by plain evaluation and jet evaluation. Smooth maps are
/// written once against this trait and run over either carrier.
pub trait Ring: Clone {
    /// Constant with the same shape (dimension/order) as `self`.
    fn lift(&self, v: f64) -> Self;
    /// The underlying point value (used for pivoting and domain checks).
    fn re(&self) -> f64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn scale(&self, c: f64) -> Self;
    fn recip(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn sinh(&self) -> Self;
    fn cosh(&self) -> Self;
    fn tanh(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn powi(&self, k: i32) -> Self;
    fn powf(&self, p: f64) -> Self;
}

impl Ring for f64 {
    fn lift(&self, v: f64) -> f64 {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn add(&self, o: &f64) -> f64 {
        self + o
    }
    fn sub(&self, o: &f64) -> f64 {
        self - o
    }
    fn mul(&self, o: &f64) -> f64 {
        self * o
    }
    fn div(&self, o: &f64) -> f64 {
        self / o
    }
    fn neg(&self) -> f64 {
        -self
    }
    fn scale(&self, c: f64) -> f64 {
        self * c
    }
    fn recip(&self) -> f64 {
        1.0 / self
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
    fn ln(&self) -> f64 {
        f64::ln(*self)
    }
    fn sin(&self) -> f64 {
        f64::sin(*self)
    }
    fn cos(&self) -> f64 {
        f64::cos(*self)
    }
    fn sinh(&self) -> f64 {
        f64::sinh(*self)
    }
    fn cosh(&self) -> f64 {
        f64::cosh(*self)
    }
    fn tanh(&self) -> f64 {
        f64::tanh(*self)
    }
    fn sqrt(&self) -> f64 {
        f64::sqrt(*self)
    }
    fn powi(&self, k: i32) -> f64 {
        f64::powi(*self, k)
    }
    fn powf(&self, p: f64) -> f64 {
        f64::powf(*self, p)
    }
}

impl Ring for Jet {
    fn lift(&self, v: f64) -> Jet {
        Jet::constant(v, self.n, self.order)
    }
    fn re(&self) -> f64 {
        self.v
    }
    fn add(&self, o: &Jet) -> Jet {
        self + o
    }
    fn sub(&self, o: &Jet) -> Jet {
        self - o
    }
    fn mul(&self, o: &Jet) -> Jet {
        self * o
    }
    fn div(&self, o: &Jet) -> Jet {
        self / o
    }
    fn neg(&self) -> Jet {
        -self
    }
    fn scale(&self, c: f64) -> Jet {
        Jet::scale(self, c)
    }
    fn recip(&self) -> Jet {
        Jet::recip(self)
    }
    fn exp(&self) -> Jet {
        Jet::exp(self)
    }
    fn ln(&self) -> Jet {
        Jet::ln(self)
    }
    fn sin(&self) -> Jet {
        Jet::sin(self)
    }
    fn cos(&self) -> Jet {
        Jet::cos(self)
    }
    fn sinh(&self) -> Jet {
        Jet::sinh(self)
    }
    fn cosh(&self) -> Jet {
        Jet::cosh(self)
    }
    fn tanh(&self) -> Jet {
        Jet::tanh(self)
    }
    fn sqrt(&self) -> Jet {
        Jet::sqrt(self)
    }
    fn powi(&self, k: i32) -> Jet {
        Jet::powi(self, k)
    }
    fn powf(&self, p: f64) -> Jet {
        Jet::powf(self, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn var(v: f64, i: usize, n: usize) -> Jet {
        Jet::variable(v, i, n, 4)
    }

    #[test]
    fn product_rule_all_orders() {
        // f = x^2 y, single known polynomial: all partials explicit
        let x = var(2.0, 0, 2);
        let y = var(3.0, 1, 2);
        let f = &(&x * &x) * &y;
        assert_relative_eq!(f.value(), 12.0);
        assert_relative_eq!(f.grad(0), 12.0); // 2xy
        assert_relative_eq!(f.grad(1), 4.0); // x^2
        assert_relative_eq!(f.hess(0, 0), 6.0); // 2y
        assert_relative_eq!(f.hess(0, 1), 4.0); // 2x
        assert_relative_eq!(f.third(0, 0, 1), 2.0);
        assert_relative_eq!(f.third(0, 0, 0), 0.0);
        assert_relative_eq!(f.fourth(0, 0, 0, 1), 0.0);
    }

    #[test]
    fn exp_chain_to_fourth_order() {
        // f = exp(x*y): ∂^4/∂x^2∂y^2 at (a,b) of e^{xy}
        let (a, b) = (0.3, -0.7);
        let x = var(a, 0, 2);
        let y = var(b, 1, 2);
        let f = (&x * &y).exp();
        let e = (a * b).exp();
        assert_relative_eq!(f.value(), e, max_relative = 1e-14);
        assert_relative_eq!(f.grad(0), b * e, max_relative = 1e-14);
        assert_relative_eq!(f.hess(0, 1), (1.0 + a * b) * e, max_relative = 1e-14);
        // ∂x∂y e^{xy} = (1+xy)e^{xy}; ∂x^2∂y^2 = (x^2y^2 + 4xy + 2) e^{xy}
        let d4 = (a * a * b * b + 4.0 * a * b + 2.0) * e;
        assert_relative_eq!(f.fourth(0, 0, 1, 1), d4, max_relative = 1e-13);
    }

    #[test]
    fn quotient_and_sqrt() {
        let x = var(1.5, 0, 1);
        let one = x.lift(1.0);
        let f = (one.clone() / (&(&x * &x) + &one)).sqrt(); // 1/sqrt(1+x^2)
        let v = 1.0 / (1.0 + 1.5f64 * 1.5).sqrt();
        assert_relative_eq!(f.value(), v, max_relative = 1e-14);
        // d/dx (1+x^2)^{-1/2} = -x (1+x^2)^{-3/2}
        let d = -1.5 * (1.0 + 2.25f64).powf(-1.5);
        assert_relative_eq!(f.grad(0), d, max_relative = 1e-13);
    }

    #[test]
    fn unary_derivatives_match_finite_differences() {
        let h = 1e-3; // third differences need a coarse step to beat roundoff
        let fns: Vec<(fn(&Jet) -> Jet, fn(f64) -> f64, f64)> = vec![
            (Jet::exp, f64::exp, 0.4),
            (Jet::ln, f64::ln, 1.7),
            (Jet::sin, f64::sin, 0.9),
            (Jet::cos, f64::cos, 0.9),
            (Jet::sinh, f64::sinh, 0.6),
            (Jet::cosh, f64::cosh, 0.6),
            (Jet::tanh, f64::tanh, 0.3),
            (Jet::sqrt, f64::sqrt, 2.2),
        ];
        for (jf, ff, x0) in fns {
            let j = jf(&var(x0, 0, 1));
            let d1 = (ff(x0 + h) - ff(x0 - h)) / (2.0 * h);
            let d2 = (ff(x0 + h) - 2.0 * ff(x0) + ff(x0 - h)) / (h * h);
            let d3 = (ff(x0 + 2.0 * h) - 2.0 * ff(x0 + h) + 2.0 * ff(x0 - h) - ff(x0 - 2.0 * h))
                / (2.0 * h * h * h);
            assert_relative_eq!(j.grad(0), d1, max_relative = 1e-6);
            assert_relative_eq!(j.hess(0, 0), d2, max_relative = 1e-5, epsilon = 1e-7);
            assert_relative_eq!(j.third(0, 0, 0), d3, max_relative = 1e-3, epsilon = 1e-3);
        }
    }

    #[test]
    fn partial_shifts_coefficients() {
        // f = x^3 y at (a, b); g = ∂_x f = 3x^2 y
        let (a, b) = (1.2, 0.8);
        let f = &var(a, 0, 2).powi(3) * &var(b, 1, 2);
        let g = f.partial(0);
        assert_eq!(g.order(), 3);
        assert_relative_eq!(g.value(), 3.0 * a * a * b, max_relative = 1e-14);
        assert_relative_eq!(g.grad(0), 6.0 * a * b, max_relative = 1e-14);
        assert_relative_eq!(g.grad(1), 3.0 * a * a, max_relative = 1e-14);
        assert_relative_eq!(g.hess(0, 1), 6.0 * a, max_relative = 1e-14);
        assert_relative_eq!(g.third(0, 0, 1), 6.0);
    }

    #[test]
    fn powi_negative_base() {
        let x = var(-2.0, 0, 1);
        let f = x.powi(3);
        assert_relative_eq!(f.value(), -8.0);
        assert_relative_eq!(f.grad(0), 12.0);
        assert_relative_eq!(f.hess(0, 0), -12.0);
        assert_relative_eq!(f.third(0, 0, 0), 6.0);
    }
}
