//! Small dense rank-3/4/5 arrays used by the curvature pipelines.

#[derive(Debug, Clone, PartialEq)]
pub struct T3 {
    n: usize,
    a: Vec<f64>,
}

impl T3 {
    pub fn zeros(n: usize) -> Self {
        T3 { n, a: vec![0.0; n * n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = T3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    t.a[(i * n + j) * n + k] = f(i, j, k);
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.a[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.a[(i * self.n + j) * self.n + k] = v;
    }

    pub fn frobenius(&self) -> f64 {
        self.a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn sub(&self, o: &T3) -> T3 {
        assert_eq!(self.n, o.n);
        T3 {
            n: self.n,
            a: self.a.iter().zip(&o.a).map(|(x, y)| x - y).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct T4 {
    n: usize,
    a: Vec<f64>,
}

impl T4 {
    pub fn zeros(n: usize) -> Self {
        T4 { n, a: vec![0.0; n * n * n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = T4::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        t.a[((i * n + j) * n + k) * n + l] = f(i, j, k, l);
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
        self.a[((i * self.n + j) * self.n + k) * self.n + l]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        self.a[((i * self.n + j) * self.n + k) * self.n + l] = v;
    }

    pub fn frobenius(&self) -> f64 {
        self.a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct T5 {
    n: usize,
    a: Vec<f64>,
}

impl T5 {
    pub fn zeros(n: usize) -> Self {
        T5 { n, a: vec![0.0; n * n * n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize, m: usize) -> f64 {
        let n = self.n;
        self.a[(((i * n + j) * n + k) * n + l) * n + m]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, m: usize, v: f64) {
        let n = self.n;
        self.a[(((i * n + j) * n + k) * n + l) * n + m] = v;
    }
}
