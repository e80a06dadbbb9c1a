//! Built-in catalog of spec documents: flat and constant-curvature metrics,
//! seeded conformal factors and perturbed metrics, integrable pairs, and the
//! immersion families used by the verification suites.

use super::document::{Meta, SpecDocument, SpecKind};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

fn doc(
    kind: SpecKind,
    dim: usize,
    chart_box: Vec<[f64; 2]>,
    entries: Vec<(String, String)>,
    name: &str,
    seed: u64,
) -> SpecDocument {
    SpecDocument {
        kind,
        dim,
        chart_box,
        entries: entries.into_iter().collect::<BTreeMap<_, _>>(),
        meta: Meta { name: name.to_string(), seed: Some(seed) },
    }
}

fn unit_box(n: usize) -> Vec<[f64; 2]> {
    vec![[-1.0, 1.0]; n]
}

fn small_box(n: usize, half: f64) -> Vec<[f64; 2]> {
    vec![[-half, half]; n]
}

fn norm2_expr(n: usize) -> String {
    (1..=n).map(|i| format!("x{i}^2")).collect::<Vec<_>>().join(" + ")
}

/// `flat{n}`: the Euclidean metric.
pub fn flat(n: usize) -> SpecDocument {
    let mut entries = Vec::new();
    for i in 1..=n {
        entries.push((format!("g.{i}.{i}"), "1".to_string()));
    }
    doc(SpecKind::Metric, n, unit_box(n), entries, &format!("flat{n}"), 7)
}

/// `sphere{n}_r{r}`: round sphere of radius `r` as a conformal presentation,
/// `u = log(2 r^2 / (r^2 + |x|^2))`.
pub fn sphere(n: usize, r: f64) -> SpecDocument {
    let u = format!("log({} / ({} + {}))", 2.0 * r * r, r * r, norm2_expr(n));
    doc(
        SpecKind::Conformal,
        n,
        unit_box(n),
        vec![("u".to_string(), u)],
        &format!("sphere{n}_r{r}"),
        7,
    )
}

/// `halfspace{n}`: hyperbolic upper half-space metric `δ_ij / x_n^2`.
pub fn half_space(n: usize) -> SpecDocument {
    let mut entries = Vec::new();
    for i in 1..=n {
        entries.push((format!("g.{i}.{i}"), format!("1/(x{n}^2)")));
    }
    let mut bx = unit_box(n);
    bx[n - 1] = [0.5, 2.0];
    doc(SpecKind::Metric, n, bx, entries, &format!("halfspace{n}"), 7)
}

/// Hyperbolic upper half-space as a conformal presentation `u = -log(x_n)`.
pub fn half_space_conformal(n: usize) -> SpecDocument {
    let mut bx = unit_box(n);
    bx[n - 1] = [0.5, 2.0];
    doc(
        SpecKind::Conformal,
        n,
        bx,
        vec![("u".to_string(), format!("-log(x{n})"))],
        &format!("halfspace{n}_conf"),
        7,
    )
}

/// A seeded polynomial/trig conformal factor expression, small enough to keep
/// curvature magnitudes tame on the unit box.
pub fn random_factor_expr(n: usize, rng: &mut ChaCha8Rng) -> String {
    let mut terms: Vec<String> = Vec::new();
    let n_poly = rng.gen_range(3..=5);
    for _ in 0..n_poly {
        let c: f64 = rng.gen_range(-0.2..0.2);
        let deg = rng.gen_range(1..=3usize);
        let mut mono = format!("{c:.6}");
        for _ in 0..deg {
            let v = rng.gen_range(1..=n);
            mono.push_str(&format!("*x{v}"));
        }
        terms.push(mono);
    }
    if rng.gen_bool(0.5) {
        let c: f64 = rng.gen_range(-0.2..0.2);
        let v = rng.gen_range(1..=n);
        let f = if rng.gen_bool(0.5) { "sin" } else { "cos" };
        terms.push(format!("{c:.6}*{f}(x{v})"));
    }
    terms.join(" + ")
}

/// `polyconf{n}_{k}`: seeded conformal factors for the locally conformally
/// flat catalog.
pub fn poly_conformal(n: usize, k: u64) -> SpecDocument {
    let seed = 1000 * n as u64 + k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_factor_expr(n, &mut rng);
    doc(
        SpecKind::Conformal,
        n,
        unit_box(n),
        vec![("u".to_string(), u)],
        &format!("polyconf{n}_{k}"),
        seed,
    )
}

fn small_poly(n: usize, rng: &mut ChaCha8Rng, scale: f64) -> String {
    let mut terms = Vec::new();
    for _ in 0..2 {
        let c: f64 = rng.gen_range(-scale..scale);
        let a = rng.gen_range(1..=n);
        let b = rng.gen_range(1..=n);
        if rng.gen_bool(0.5) {
            terms.push(format!("{c:.6}*x{a}"));
        } else {
            terms.push(format!("{c:.6}*x{a}*x{b}"));
        }
    }
    terms.join(" + ")
}

/// `polymetric{n}_{k}`: a generic curved metric `δ + (small seeded
/// perturbation)`, positive definite on the unit box by diagonal dominance.
pub fn poly_metric(n: usize, k: u64) -> SpecDocument {
    let seed = 2000 * n as u64 + k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for i in 1..=n {
        for j in i..=n {
            let e = if i == j {
                format!("1 + {}", small_poly(n, &mut rng, 0.04))
            } else {
                small_poly(n, &mut rng, 0.03)
            };
            entries.push((format!("g.{i}.{j}"), e));
        }
    }
    doc(SpecKind::Metric, n, unit_box(n), entries, &format!("polymetric{n}_{k}"), seed)
}

/// `nonlcf4_{k}`: generic n=4 controls whose Weyl tensor is far from zero.
pub fn non_lcf_control(k: u64) -> SpecDocument {
    let n = 4;
    let seed = 4000 + k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for i in 1..=n {
        for j in i..=n {
            let e = if i == j {
                format!("1 + {}", small_poly(n, &mut rng, 0.06))
            } else {
                small_poly(n, &mut rng, 0.05)
            };
            entries.push((format!("g.{i}.{j}"), e));
        }
    }
    doc(SpecKind::Metric, n, unit_box(n), entries, &format!("nonlcf4_{k}"), seed)
}

/// `horopair{n}`: flat metric with `B = Id` (horosphere data).
pub fn horosphere_pair(n: usize) -> SpecDocument {
    let mut entries = Vec::new();
    for i in 1..=n {
        entries.push((format!("g.{i}.{i}"), "1".to_string()));
        entries.push((format!("B.{i}.{i}"), "1".to_string()));
    }
    doc(SpecKind::Pair, n, unit_box(n), entries, &format!("horopair{n}"), 7)
}

/// `totgeopair{n}`: hyperbolic metric with `B = 0` (totally geodesic data).
pub fn totally_geodesic_pair(n: usize) -> SpecDocument {
    let mut entries = Vec::new();
    for i in 1..=n {
        entries.push((format!("g.{i}.{i}"), format!("1/(x{n}^2)")));
        entries.push((format!("B.{i}.{i}"), "0".to_string()));
    }
    let mut bx = unit_box(n);
    bx[n - 1] = [0.5, 2.0];
    doc(SpecKind::Pair, n, bx, entries, &format!("totgeopair{n}"), 7)
}

/// `spherepair{n}_r{r}`: induced data of the geodesic sphere of radius `r`:
/// `g = sinh^2(r) * round`, `B = coth(r) Id`.
pub fn geodesic_sphere_pair(n: usize, r: f64) -> SpecDocument {
    let q = format!("(1 + {})", norm2_expr(n));
    let round = format!("sinh({r})^2*4/{q}^2");
    let coth = format!("cosh({r})/sinh({r})");
    let mut entries = Vec::new();
    for i in 1..=n {
        entries.push((format!("g.{i}.{i}"), round.clone()));
        entries.push((format!("B.{i}.{i}"), coth.clone()));
    }
    doc(
        SpecKind::Pair,
        n,
        small_box(n, 0.6),
        entries,
        &format!("spherepair{n}_r{r}"),
        7,
    )
}

/// `slice{n}`: totally geodesic slice `f = (x, 0, sqrt(1 + |x|^2))`.
pub fn slice_immersion(n: usize) -> SpecDocument {
    let w = format!("sqrt(1 + {})", norm2_expr(n));
    let mut entries = Vec::new();
    for i in 1..=n {
        entries.push((format!("f.{i}"), format!("x{i}")));
        entries.push((format!("N.{i}"), "0".to_string()));
    }
    entries.push((format!("f.{}", n + 1), "0".to_string()));
    entries.push((format!("f.{}", n + 2), w));
    entries.push((format!("N.{}", n + 1), "1".to_string()));
    entries.push((format!("N.{}", n + 2), "0".to_string()));
    doc(SpecKind::Immersion, n, unit_box(n), entries, &format!("slice{n}"), 7)
}

/// `geosphere{n}_r{r}`: geodesic sphere about the apex in the stereographic
/// chart, with the inward normal (`B = +coth(r) Id`).
pub fn geodesic_sphere_immersion(n: usize, r: f64) -> SpecDocument {
    let q = format!("(1 + {})", norm2_expr(n));
    let mut entries = Vec::new();
    for i in 1..=n {
        entries.push((format!("f.{i}"), format!("sinh({r})*2*x{i}/{q}")));
        entries.push((format!("N.{i}"), format!("-cosh({r})*2*x{i}/{q}")));
    }
    entries.push((format!("f.{}", n + 1), format!("sinh({r})*(2 - {q})/{q}")));
    entries.push((format!("N.{}", n + 1), format!("-cosh({r})*(2 - {q})/{q}")));
    entries.push((format!("f.{}", n + 2), format!("cosh({r})")));
    entries.push((format!("N.{}", n + 2), format!("-sinh({r})")));
    doc(
        SpecKind::Immersion,
        n,
        small_box(n, 0.6),
        entries,
        &format!("geosphere{n}_r{r}"),
        7,
    )
}

/// `horosphere{n}`: the flat horosphere `f = (x, |x|^2/2, |x|^2/2 + 1)` with
/// the normal giving `B = +Id`.
pub fn horosphere_immersion(n: usize) -> SpecDocument {
    let s = format!("({})/2", norm2_expr(n));
    let mut entries = Vec::new();
    for i in 1..=n {
        entries.push((format!("f.{i}"), format!("x{i}")));
        entries.push((format!("N.{i}"), format!("-x{i}")));
    }
    entries.push((format!("f.{}", n + 1), s.clone()));
    entries.push((format!("f.{}", n + 2), format!("{s} + 1")));
    entries.push((format!("N.{}", n + 1), format!("1 - {s}")));
    entries.push((format!("N.{}", n + 2), format!("-{s}")));
    doc(SpecKind::Immersion, n, unit_box(n), entries, &format!("horosphere{n}"), 7)
}

/// `equidistant{n}`: the slice flowed for time `t0` (shape operator
/// `tanh(t0) Id`).
pub fn equidistant_immersion(n: usize, t0: f64) -> SpecDocument {
    let w = format!("sqrt(1 + {})", norm2_expr(n));
    let mut entries = Vec::new();
    for i in 1..=n {
        entries.push((format!("f.{i}"), format!("cosh({t0})*x{i}")));
        entries.push((format!("N.{i}"), format!("-sinh({t0})*x{i}")));
    }
    entries.push((format!("f.{}", n + 1), format!("-sinh({t0})")));
    entries.push((format!("f.{}", n + 2), format!("cosh({t0})*{w}")));
    entries.push((format!("N.{}", n + 1), format!("cosh({t0})")));
    entries.push((format!("N.{}", n + 2), format!("-sinh({t0})*{w}")));
    doc(
        SpecKind::Immersion,
        n,
        unit_box(n),
        entries,
        &format!("equidistant{n}"),
        7,
    )
}

/// `graph{n}_{k}`: graph immersion `f = (x, h(x), sqrt(1 + |x|^2 + h^2))`
/// with a small seeded polynomial `h`; the normal is derived. These are the
/// generic, non-constant-curvature integrable instances.
pub fn graph_immersion(n: usize, k: u64) -> SpecDocument {
    let seed = 3000 * n as u64 + k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    for _ in 0..3 {
        let c: f64 = rng.gen_range(-0.15..0.15);
        let a = rng.gen_range(1..=n);
        let b = rng.gen_range(1..=n);
        terms.push(format!("{c:.6}*x{a}*x{b}"));
    }
    let h = format!("({})", terms.join(" + "));
    let w = format!("sqrt(1 + {} + {h}^2)", norm2_expr(n));
    let mut entries = Vec::new();
    for i in 1..=n {
        entries.push((format!("f.{i}"), format!("x{i}")));
    }
    entries.push((format!("f.{}", n + 1), h));
    entries.push((format!("f.{}", n + 2), w));
    doc(
        SpecKind::Immersion,
        n,
        small_box(n, 0.8),
        entries,
        &format!("graph{n}_{k}"),
        seed,
    )
}

/// All built-in names, in a fixed order.
pub fn builtin_names() -> Vec<String> {
    let mut names = Vec::new();
    for n in 2..=5 {
        names.push(format!("flat{n}"));
    }
    for n in 2..=4 {
        names.push(format!("sphere{n}_r1"));
    }
    names.push("sphere3_r2".into());
    for n in 2..=4 {
        names.push(format!("halfspace{n}"));
        names.push(format!("halfspace{n}_conf"));
    }
    for n in 2..=4 {
        for k in 0..10 {
            names.push(format!("polyconf{n}_{k}"));
        }
    }
    for n in 3..=4 {
        for k in 0..3 {
            names.push(format!("polymetric{n}_{k}"));
        }
    }
    for k in 0..3 {
        names.push(format!("nonlcf4_{k}"));
    }
    for n in 2..=3 {
        names.push(format!("horopair{n}"));
        names.push(format!("totgeopair{n}"));
    }
    names.push("spherepair2_r1".into());
    for n in 2..=3 {
        names.push(format!("slice{n}"));
        names.push(format!("horosphere{n}"));
    }
    for r in ["0.5", "1", "2"] {
        names.push(format!("geosphere2_r{r}"));
    }
    names.push("geosphere3_r1".into());
    names.push("equidistant2".into());
    names.push("graph2_0".into());
    names.push("graph2_1".into());
    names.push("graph3_0".into());
    names
}

/// Resolves a built-in document by name.
pub fn builtin(name: &str) -> Option<SpecDocument> {
    let grab = |n: &str| n.parse::<usize>().ok();
    if let Some(rest) = name.strip_prefix("flat") {
        return grab(rest).map(flat);
    }
    if let Some(rest) = name.strip_prefix("sphere") {
        if let Some((n, r)) = rest.split_once("_r") {
            if let (Some(n), Ok(r)) = (grab(n), r.parse::<f64>()) {
                return Some(sphere(n, r));
            }
        }
    }
    if let Some(rest) = name.strip_prefix("halfspace") {
        if let Some(n) = rest.strip_suffix("_conf") {
            return grab(n).map(half_space_conformal);
        }
        return grab(rest).map(half_space);
    }
    if let Some(rest) = name.strip_prefix("polyconf") {
        if let Some((n, k)) = rest.split_once('_') {
            if let (Some(n), Ok(k)) = (grab(n), k.parse::<u64>()) {
                return Some(poly_conformal(n, k));
            }
        }
    }
    if let Some(rest) = name.strip_prefix("polymetric") {
        if let Some((n, k)) = rest.split_once('_') {
            if let (Some(n), Ok(k)) = (grab(n), k.parse::<u64>()) {
                return Some(poly_metric(n, k));
            }
        }
    }
    if let Some(rest) = name.strip_prefix("nonlcf4_") {
        return rest.parse::<u64>().ok().map(non_lcf_control);
    }
    if let Some(rest) = name.strip_prefix("horopair") {
        return grab(rest).map(horosphere_pair);
    }
    if let Some(rest) = name.strip_prefix("totgeopair") {
        return grab(rest).map(totally_geodesic_pair);
    }
    if let Some(rest) = name.strip_prefix("spherepair") {
        if let Some((n, r)) = rest.split_once("_r") {
            if let (Some(n), Ok(r)) = (grab(n), r.parse::<f64>()) {
                return Some(geodesic_sphere_pair(n, r));
            }
        }
    }
    if let Some(rest) = name.strip_prefix("slice") {
        return grab(rest).map(slice_immersion);
    }
    if let Some(rest) = name.strip_prefix("geosphere") {
        if let Some((n, r)) = rest.split_once("_r") {
            if let (Some(n), Ok(r)) = (grab(n), r.parse::<f64>()) {
                return Some(geodesic_sphere_immersion(n, r));
            }
        }
    }
    if let Some(rest) = name.strip_prefix("horosphere") {
        return grab(rest).map(horosphere_immersion);
    }
    if let Some(rest) = name.strip_prefix("equidistant") {
        return grab(rest).map(|n| equidistant_immersion(n, 0.6));
    }
    if let Some(rest) = name.strip_prefix("graph") {
        if let Some((n, k)) = rest.split_once('_') {
            if let (Some(n), Ok(k)) = (grab(n), k.parse::<u64>()) {
                return Some(graph_immersion(n, k));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::speccat::document::load_spec;

    #[test]
    fn every_builtin_loads_and_validates() {
        for name in builtin_names() {
            let d = builtin(&name).unwrap_or_else(|| panic!("unresolved builtin {name}"));
            load_spec(&d).unwrap_or_else(|e| panic!("builtin {name} failed to load: {e}"));
        }
    }

    #[test]
    fn catalog_expressions_print_parse_idempotent() {
        use crate::speccat::parse_expr;
        for name in builtin_names() {
            let d = builtin(&name).unwrap();
            for (key, src) in &d.entries {
                let a = parse_expr(src, d.dim)
                    .unwrap_or_else(|e| panic!("{name}/{key}: {e}"));
                let b = parse_expr(&a.to_string(), d.dim).unwrap();
                assert_eq!(a, b, "{name}/{key} drifted through printing");
            }
        }
    }

    #[test]
    fn builtin_documents_are_deterministic() {
        let a = poly_conformal(3, 4).to_json();
        let b = poly_conformal(3, 4).to_json();
        assert_eq!(a, b);
        let a = graph_immersion(2, 1).to_json();
        let b = graph_immersion(2, 1).to_json();
        assert_eq!(a, b);
    }
}
