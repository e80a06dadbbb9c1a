//! Spec documents: JSON-serialized field definitions with validation.
//!
//! Schema: top-level keys `kind` (`metric` | `conformal` | `pair` |
//! `immersion`), `dim`, `box` (array of `[lo, hi]` per axis), `entries`
//! (expression strings keyed `g.1.2`, `u`, `B.1.1`, `f.1`, `N.1`; indices are
//! 1-based) and `meta` (`name`, optional `seed`). Metric entries may give
//! either triangle; missing off-diagonal entries default to zero. Immersion
//! normals are optional and derived from `f` when absent.

use super::expr::parse_expr;
use super::{ExprEndoMap, ExprSym2Map, ExprVecMap};
use crate::duality::{DualityPair, Side};
use crate::hyperbolic::ImmersionField;
use crate::jetcalc::{tri_len, ChartBox, EndoField, ScalarField, Sym2Field};
use crate::lcf::ConformalPresentation;
use crate::multilinear::{is_self_adjoint, EndoValue, MetricValue};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecKind {
    Metric,
    Conformal,
    Pair,
    Immersion,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct Meta {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecDocument {
    pub kind: SpecKind,
    pub dim: usize,
    #[serde(rename = "box")]
    pub chart_box: Vec<[f64; 2]>,
    pub entries: BTreeMap<String, String>,
    #[serde(default)]
    pub meta: Meta,
}

impl SpecDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        SpecDocument::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }
}

/// Validated field objects from a document.
pub enum LoadedSpec {
    Metric { g: Sym2Field },
    Conformal { presentation: ConformalPresentation },
    Pair { pair: DualityPair },
    Immersion { imm: ImmersionField },
}

pub struct Loaded {
    pub name: String,
    pub dim: usize,
    pub chart: ChartBox,
    pub seed: u64,
    pub spec: LoadedSpec,
}

impl Loaded {
    /// The metric field a curvature command should analyze: the metric
    /// itself, the presented conformal metric, or the pair/immersion metric.
    pub fn metric_field(&self) -> Sym2Field {
        match &self.spec {
            LoadedSpec::Metric { g } => g.clone(),
            LoadedSpec::Conformal { presentation } => presentation.presented(),
            LoadedSpec::Pair { pair } => pair.g.clone(),
            LoadedSpec::Immersion { imm } => imm.induced_metric(),
        }
    }
}

fn entry_key(prefix: &str, i: usize, j: usize) -> String {
    format!("{prefix}.{}.{}", i + 1, j + 1)
}

fn metric_entries(doc: &SpecDocument, prefix: &str) -> Result<Vec<String>> {
    let n = doc.dim;
    let mut tri = Vec::with_capacity(tri_len(n));
    for i in 0..n {
        for j in i..n {
            let a = doc.entries.get(&entry_key(prefix, i, j));
            let b = if i == j { None } else { doc.entries.get(&entry_key(prefix, j, i)) };
            let src = match (a, b) {
                (Some(x), None) | (None, Some(x)) => x.clone(),
                (Some(x), Some(y)) => {
                    if symbolically_equal(x, y, n)? {
                        x.clone()
                    } else {
                        return Err(Error::Schema(format!(
                            "entries {} and {} disagree",
                            entry_key(prefix, i, j),
                            entry_key(prefix, j, i)
                        )));
                    }
                }
                (None, None) => {
                    if i == j {
                        return Err(Error::Schema(format!(
                            "missing diagonal entry {}",
                            entry_key(prefix, i, j)
                        )));
                    }
                    "0".to_string()
                }
            };
            tri.push(src);
        }
    }
    Ok(tri)
}

/// Two entry strings agree if they parse to the same tree or evaluate
/// identically on a probe grid.
fn symbolically_equal(a: &str, b: &str, n: usize) -> Result<bool> {
    let ea = parse_expr(a, n)?;
    let eb = parse_expr(b, n)?;
    if ea == eb {
        return Ok(true);
    }
    for k in 0..5 {
        let p: Vec<f64> = (0..n).map(|i| 0.1 + 0.13 * (i as f64) + 0.07 * (k as f64)).collect();
        let va = ea.eval(&p)?;
        let vb = eb.eval(&p)?;
        if (va - vb).abs() > 1e-12 * va.abs().max(1.0) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn build_sym2(doc: &SpecDocument, prefix: &str) -> Result<Sym2Field> {
    let srcs = metric_entries(doc, prefix)?;
    let asts = srcs
        .iter()
        .map(|s| parse_expr(s, doc.dim))
        .collect::<Result<Vec<_>>>()?;
    Ok(Sym2Field::new(doc.dim, Arc::new(ExprSym2Map::new(asts, doc.dim))))
}

fn build_endo(doc: &SpecDocument, prefix: &str) -> Result<EndoField> {
    let n = doc.dim;
    let mut asts = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let src = doc
                .entries
                .get(&entry_key(prefix, i, j))
                .cloned()
                .unwrap_or_else(|| "0".to_string());
            asts.push(parse_expr(&src, n)?);
        }
    }
    Ok(EndoField::new(n, Arc::new(ExprEndoMap::new(asts, n))))
}

fn build_vec_map(doc: &SpecDocument, prefix: &str, len: usize) -> Result<Arc<ExprVecMap>> {
    let n = doc.dim;
    let mut asts = Vec::with_capacity(len);
    for a in 0..len {
        let key = format!("{prefix}.{}", a + 1);
        let src = doc
            .entries
            .get(&key)
            .ok_or_else(|| Error::Schema(format!("missing entry {key}")))?;
        asts.push(parse_expr(src, n)?);
    }
    Ok(Arc::new(ExprVecMap::new(asts, n)))
}

/// Validates a document and constructs its field objects. Validation samples
/// the chart box deterministically and reports the first violated constraint
/// with the offending point.
pub fn load_spec(doc: &SpecDocument) -> Result<Loaded> {
    if doc.dim == 0 {
        return Err(Error::Schema("dimension must be positive".into()));
    }
    if doc.chart_box.len() != doc.dim {
        return Err(Error::Schema(format!(
            "box has {} intervals for dimension {}",
            doc.chart_box.len(),
            doc.dim
        )));
    }
    let chart = ChartBox::new(
        doc.chart_box.iter().map(|i| i[0]).collect(),
        doc.chart_box.iter().map(|i| i[1]).collect(),
    )?;
    let seed = doc.meta.seed.unwrap_or(7);
    let samples = chart.sample_points(8, seed);

    let spec = match doc.kind {
        SpecKind::Metric => {
            let g = build_sym2(doc, "g")?;
            for p in &samples {
                let sym = g.sym2_value(p)?;
                MetricValue::new(sym).map_err(|e| match e {
                    Error::NotPositiveDefinite { min_eig } => Error::Constraint {
                        point: p.clone(),
                        msg: format!("metric not positive definite (eigenvalue {min_eig:.3e})"),
                    },
                    other => other,
                })?;
            }
            LoadedSpec::Metric { g }
        }
        SpecKind::Conformal => {
            let u_src = doc
                .entries
                .get("u")
                .ok_or_else(|| Error::Schema("conformal document needs entry `u`".into()))?;
            let u = ScalarField::new(Arc::new(super::ExprScalarMap::new(
                parse_expr(u_src, doc.dim)?,
                doc.dim,
            )));
            for p in &samples {
                u.value(p)?;
            }
            let presentation = ConformalPresentation::flat(doc.dim, u)?;
            LoadedSpec::Conformal { presentation }
        }
        SpecKind::Pair => {
            let g = build_sym2(doc, "g")?;
            let b = build_endo(doc, "B")?;
            for p in &samples {
                let gv = MetricValue::new(g.sym2_value(p)?).map_err(|e| Error::Constraint {
                    point: p.clone(),
                    msg: format!("pair metric invalid: {e}"),
                })?;
                let bv = EndoValue::from_matrix(b.value(p)?);
                if !is_self_adjoint(&gv, &bv, 1e-10) {
                    return Err(Error::Constraint {
                        point: p.clone(),
                        msg: "shape operator is not self-adjoint against g".into(),
                    });
                }
            }
            let pair = DualityPair::new(g, b, Side::Finite)?;
            LoadedSpec::Pair { pair }
        }
        SpecKind::Immersion => {
            let f = build_vec_map(doc, "f", doc.dim + 2)?;
            let has_normal = doc.entries.contains_key("N.1");
            let normal = if has_normal {
                Some(build_vec_map(doc, "N", doc.dim + 2)? as Arc<dyn crate::jetcalc::SmoothMap>)
            } else {
                None
            };
            let imm = ImmersionField::new(doc.dim, f, normal);
            for p in &samples {
                imm.check_constraints(p)?;
            }
            LoadedSpec::Immersion { imm }
        }
    };
    Ok(Loaded {
        name: doc.meta.name.clone(),
        dim: doc.dim,
        chart,
        seed,
        spec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetcalc::DerivEngine;
    use approx::assert_relative_eq;

    fn doc(kind: SpecKind, dim: usize, box_: &[[f64; 2]], entries: &[(&str, &str)]) -> SpecDocument {
        SpecDocument {
            kind,
            dim,
            chart_box: box_.to_vec(),
            entries: entries
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            meta: Meta { name: "test".into(), seed: Some(7) },
        }
    }

    #[test]
    fn loads_half_space_metric() {
        let d = doc(
            SpecKind::Metric,
            3,
            &[[-1.0, 1.0], [-1.0, 1.0], [0.5, 2.0]],
            &[
                ("g.1.1", "1/(x3^2)"),
                ("g.2.2", "1/(x3^2)"),
                ("g.3.3", "1/(x3^2)"),
            ],
        );
        let loaded = load_spec(&d).unwrap();
        let g = loaded.metric_field();
        let engine = DerivEngine::ad();
        let s = crate::jetcalc::scalar(&g, &engine, &[0.2, -0.4, 1.0]).unwrap();
        assert_relative_eq!(s, -6.0, max_relative = 1e-9);
    }

    #[test]
    fn asymmetric_entries_rejected() {
        let d = doc(
            SpecKind::Metric,
            2,
            &[[-1.0, 1.0], [-1.0, 1.0]],
            &[
                ("g.1.1", "1"),
                ("g.2.2", "1"),
                ("g.1.2", "x1"),
                ("g.2.1", "x2"),
            ],
        );
        match load_spec(&d) {
            Err(Error::Schema(msg)) => assert!(msg.contains("disagree")),
            other => panic!("expected symmetry error, got {:?}", other.is_ok()),
        }
    }

    #[test]
    fn non_spd_metric_rejected_with_point() {
        let d = doc(
            SpecKind::Metric,
            2,
            &[[0.0, 2.0], [-1.0, 1.0]],
            &[("g.1.1", "1 - x1"), ("g.2.2", "1")],
        );
        match load_spec(&d) {
            Err(Error::Constraint { point, msg }) => {
                assert_eq!(point.len(), 2);
                assert!(msg.contains("positive definite"));
            }
            other => panic!("expected constraint error, got {:?}", other.is_ok()),
        }
    }

    #[test]
    fn json_roundtrip() {
        let d = doc(
            SpecKind::Conformal,
            2,
            &[[-1.0, 1.0], [-1.0, 1.0]],
            &[("u", "log(2/(1 + x1^2 + x2^2))")],
        );
        let text = d.to_json();
        let back = SpecDocument::from_json(&text).unwrap();
        assert_eq!(back.dim, 2);
        assert_eq!(back.kind, SpecKind::Conformal);
        assert_eq!(back.entries["u"], d.entries["u"]);
        load_spec(&back).unwrap();
    }

    #[test]
    fn pair_self_adjointness_enforced() {
        let d = doc(
            SpecKind::Pair,
            2,
            &[[-1.0, 1.0], [-1.0, 1.0]],
            &[
                ("g.1.1", "1"),
                ("g.2.2", "1"),
                ("B.1.1", "0"),
                ("B.1.2", "1"),
                ("B.2.1", "-1"),
                ("B.2.2", "0"),
            ],
        );
        assert!(matches!(load_spec(&d), Err(Error::Constraint { .. })));
    }
}
