//! Symbolic emission of dual pair documents for charts where the closed form
//! stays inside the DSL (pair documents of dimension <= 3; the adjugate-based
//! inverse of `Id + B` is what bounds the dimension).

use gcinf::speccat::{ExprAst, SpecDocument, SpecKind};
use gcinf::{Error, Result};

fn entry_ast(doc: &SpecDocument, key: &str, default_zero: bool) -> Result<ExprAst> {
    match doc.entries.get(key) {
        Some(src) => gcinf::speccat::parse_expr(src, doc.dim),
        None if default_zero => Ok(ExprAst::constant(0.0)),
        None => Err(Error::Schema(format!("missing entry {key}"))),
    }
}

fn metric_asts(doc: &SpecDocument) -> Result<Vec<ExprAst>> {
    let n = doc.dim;
    let mut full = vec![ExprAst::constant(0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let key = format!("g.{}.{}", i + 1, j + 1);
            let alt = format!("g.{}.{}", j + 1, i + 1);
            let ast = if doc.entries.contains_key(&key) {
                entry_ast(doc, &key, false)?
            } else if doc.entries.contains_key(&alt) {
                entry_ast(doc, &alt, false)?
            } else if i == j {
                return Err(Error::Schema(format!("missing diagonal entry {key}")));
            } else {
                ExprAst::constant(0.0)
            };
            full[i * n + j] = ast;
        }
    }
    Ok(full)
}

fn shape_asts(doc: &SpecDocument) -> Result<Vec<ExprAst>> {
    let n = doc.dim;
    let mut full = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            full.push(entry_ast(doc, &format!("B.{}.{}", i + 1, j + 1), true)?);
        }
    }
    Ok(full)
}

fn mat_mul_ast(a: &[ExprAst], b: &[ExprAst], n: usize) -> Vec<ExprAst> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut s = ExprAst::constant(0.0);
            for k in 0..n {
                s = ExprAst::add_expr(
                    s,
                    ExprAst::mul_expr(a[i * n + k].clone(), b[k * n + j].clone()),
                );
            }
            out.push(s);
        }
    }
    out
}

fn transpose_ast(a: &[ExprAst], n: usize) -> Vec<ExprAst> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(a[j * n + i].clone());
        }
    }
    out
}

fn det_ast(a: &[ExprAst], n: usize) -> ExprAst {
    match n {
        1 => a[0].clone(),
        2 => ExprAst::sub_expr(
            ExprAst::mul_expr(a[0].clone(), a[3].clone()),
            ExprAst::mul_expr(a[1].clone(), a[2].clone()),
        ),
        _ => {
            let mut det = ExprAst::constant(0.0);
            for col in 0..n {
                let mut minor = Vec::with_capacity((n - 1) * (n - 1));
                for r in 1..n {
                    for c in 0..n {
                        if c != col {
                            minor.push(a[r * n + c].clone());
                        }
                    }
                }
                let term = ExprAst::mul_expr(a[col].clone(), det_ast(&minor, n - 1));
                det = if col % 2 == 0 {
                    ExprAst::add_expr(det, term)
                } else {
                    ExprAst::sub_expr(det, term)
                };
            }
            det
        }
    }
}

/// adj(A)[i][j] = (-1)^{i+j} * minor of A with row j, column i removed.
fn adjugate_ast(a: &[ExprAst], n: usize) -> Vec<ExprAst> {
    let mut out = vec![ExprAst::constant(0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut minor = Vec::with_capacity((n - 1) * (n - 1));
            for r in 0..n {
                if r == j {
                    continue;
                }
                for c in 0..n {
                    if c == i {
                        continue;
                    }
                    minor.push(a[r * n + c].clone());
                }
            }
            let m = det_ast(&minor, n - 1);
            out[i * n + j] = if (i + j) % 2 == 0 {
                m
            } else {
                ExprAst::neg_expr(m)
            };
        }
    }
    out
}

/// The dual of a pair document as a pair document:
/// `ĝ = (Id+B)^T g (Id+B)` and `B̂ = adj(Id+B) (Id-B) / det(Id+B)`.
pub fn dual_document(doc: &SpecDocument) -> Result<SpecDocument> {
    if doc.kind != SpecKind::Pair {
        return Err(Error::Schema("dualize emits documents only for pair inputs".into()));
    }
    let n = doc.dim;
    if n > 3 {
        return Err(Error::Schema(
            "closed-form dual documents are limited to dimension <= 3".into(),
        ));
    }
    let g = metric_asts(doc)?;
    let b = shape_asts(doc)?;
    let mut a = b.clone();
    let mut imb = vec![ExprAst::constant(0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            imb[i * n + j] = ExprAst::neg_expr(b[i * n + j].clone());
        }
        a[i * n + i] = ExprAst::add_expr(a[i * n + i].clone(), ExprAst::constant(1.0));
        imb[i * n + i] = ExprAst::add_expr(imb[i * n + i].clone(), ExprAst::constant(1.0));
    }
    let ghat = mat_mul_ast(&transpose_ast(&a, n), &mat_mul_ast(&g, &a, n), n);
    let det = det_ast(&a, n);
    let bhat_num = mat_mul_ast(&adjugate_ast(&a, n), &imb, n);

    let mut entries = std::collections::BTreeMap::new();
    for i in 0..n {
        for j in i..n {
            entries.insert(
                format!("g.{}.{}", i + 1, j + 1),
                ghat[i * n + j].to_string(),
            );
        }
    }
    for i in 0..n {
        for j in 0..n {
            let e = ExprAst::div_expr(bhat_num[i * n + j].clone(), det.clone());
            entries.insert(format!("B.{}.{}", i + 1, j + 1), e.to_string());
        }
    }
    Ok(SpecDocument {
        kind: SpecKind::Pair,
        dim: n,
        chart_box: doc.chart_box.clone(),
        entries,
        meta: gcinf::speccat::Meta {
            name: format!("{}_dual", doc.meta.name),
            seed: doc.meta.seed,
        },
    })
}
