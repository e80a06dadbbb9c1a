//! Small dense matrix routines over any scalar ring (values or jets), used by
//! field composites that need products, inverses and determinants pointwise.

use crate::jet::Ring;
use crate::{Error, Result};

/// Row-major n x n multiply.
pub fn mat_mul<S: Ring>(a: &[S], b: &[S], n: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut s = a[0].lift(0.0);
            for k in 0..n {
                s = s.add(&a[i * n + k].mul(&b[k * n + j]));
            }
            out.push(s);
        }
    }
    out
}

pub fn mat_transpose<S: Ring>(a: &[S], n: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(a[j * n + i].clone());
        }
    }
    out
}

pub fn mat_identity<S: Ring>(proto: &S, n: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(proto.lift(if i == j { 1.0 } else { 0.0 }));
        }
    }
    out
}

pub fn mat_add<S: Ring>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(x, y)| x.add(y)).collect()
}

pub fn mat_sub<S: Ring>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(x, y)| x.sub(y)).collect()
}

pub fn mat_scale<S: Ring>(a: &[S], c: f64) -> Vec<S> {
    a.iter().map(|x| x.scale(c)).collect()
}

/// Gauss-Jordan inverse with partial pivoting on the value part.
pub fn mat_inverse<S: Ring>(a: &[S], n: usize, what: &'static str) -> Result<Vec<S>> {
    let mut m = a.to_vec();
    let mut inv = mat_identity(&a[0], n);
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if m[r * n + col].re().abs() > m[piv * n + col].re().abs() {
                piv = r;
            }
        }
        if m[piv * n + col].re().abs() < 1e-13 {
            return Err(Error::Singular { what });
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
                inv.swap(col * n + c, piv * n + c);
            }
        }
        let d = m[col * n + col].recip();
        for c in 0..n {
            m[col * n + c] = m[col * n + c].mul(&d);
            inv[col * n + c] = inv[col * n + c].mul(&d);
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            // a zero VALUE does not mean the zero ring element: derivative
            // parts must still be eliminated
            let f = m[r * n + col].clone();
            for c in 0..n {
                m[r * n + c] = m[r * n + c].sub(&f.mul(&m[col * n + c]));
                inv[r * n + c] = inv[r * n + c].sub(&f.mul(&inv[col * n + c]));
            }
        }
    }
    Ok(inv)
}

/// Determinant by recursive cofactor expansion. Division-free, so it stays
/// exact over jets even where the value part vanishes (elimination with
/// value-based pivoting would silently truncate the derivative parts there).
pub fn mat_det<S: Ring>(a: &[S], n: usize) -> S {
    match n {
        0 => a[0].lift(1.0),
        1 => a[0].clone(),
        2 => a[0].mul(&a[3]).sub(&a[1].mul(&a[2])),
        _ => {
            let mut det = a[0].lift(0.0);
            for col in 0..n {
                let mut minor = Vec::with_capacity((n - 1) * (n - 1));
                for r in 1..n {
                    for c in 0..n {
                        if c != col {
                            minor.push(a[r * n + c].clone());
                        }
                    }
                }
                let term = a[col].mul(&mat_det(&minor, n - 1));
                det = if col % 2 == 0 { det.add(&term) } else { det.sub(&term) };
            }
            det
        }
    }
}

/// Symmetrize in place: (A + A^T) / 2.
pub fn mat_symmetrize<S: Ring>(a: &[S], n: usize) -> Vec<S> {
    let mut out = a.to_vec();
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = a[i * n + j].add(&a[j * n + i]).scale(0.5);
        }
    }
    out
}

/// Upper-triangle extraction (row-major) of a full symmetric matrix.
pub fn mat_upper_tri<S: Ring>(a: &[S], n: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push(a[i * n + j].clone());
        }
    }
    out
}

/// Expand upper-triangle storage to a full matrix.
pub fn tri_to_full<S: Ring>(tri: &[S], n: usize) -> Vec<S> {
    let mut out = vec![tri[0].lift(0.0); n * n];
    let mut idx = 0;
    for i in 0..n {
        for j in i..n {
            out[i * n + j] = tri[idx].clone();
            out[j * n + i] = tri[idx].clone();
            idx += 1;
        }
    }
    out
}
