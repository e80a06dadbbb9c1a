//! Property tests for the algebraic invariants: product symmetries, musical
//! isomorphisms, the dualization round trip, and parser stability.

use gcinf::duality::{raised_endo, DualityPair, Side};
use gcinf::jetcalc::{ConstSym2, tri_len};
use gcinf::multilinear::{
    is_self_adjoint, kulkarni_nomizu, lower, raise, trace2, trace4, MetricValue, Sym2Value,
};
use gcinf::speccat::parse_expr;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn sym_entries(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, tri_len(n))
}

fn spd_from(n: usize, raw: &[f64]) -> MetricValue {
    // A^T A + I/2 from a square slab of the raw entries, padded cyclically
    let a = DMatrix::from_fn(n, n, |i, j| raw[(i * n + j) % raw.len()]);
    let m = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
    MetricValue::new(Sym2Value::symmetrized(&m).0).unwrap()
}

fn sym_from(n: usize, tri: &[f64]) -> Sym2Value {
    let mut idx = 0;
    Sym2Value::from_fn_sym(n, |_, _| {
        let v = tri[idx % tri.len()];
        idx += 1;
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kn_product_is_bilinear_and_symmetric(
        t in sym_entries(4),
        s in sym_entries(4),
        c in -2.0f64..2.0,
    ) {
        let n = 4;
        let tv = sym_from(n, &t);
        let sv = sym_from(n, &s);
        let q_ts = kulkarni_nomizu(&tv, &sv).unwrap();
        let q_st = kulkarni_nomizu(&sv, &tv).unwrap();
        prop_assert!(q_ts.sub(&q_st).max_abs() < 1e-14);
        // bilinearity in the first slot
        let q_scaled = kulkarni_nomizu(&tv.scale(c), &sv).unwrap();
        prop_assert!(q_scaled.sub(&q_ts.scale(c)).max_abs() < 1e-13);
        // constructed symmetries are exact
        prop_assert_eq!(q_ts.check_symmetries(1e-15).is_ok(), true);
    }

    #[test]
    fn raise_lower_inverse(
        graw in sym_entries(3),
        t in sym_entries(3),
    ) {
        let n = 3;
        let g = spd_from(n, &graw);
        let tv = sym_from(n, &t);
        let b = raise(&g, &tv).unwrap();
        prop_assert!(is_self_adjoint(&g, &b, 1e-10));
        let back = lower(&g, &b).unwrap();
        let err = back.sub(&tv).max_abs() / tv.max_abs().max(1.0);
        prop_assert!(err < 1e-13, "round-trip error {}", err);
        // trace agreement through either route
        let tr1 = trace2(&g, &tv).unwrap();
        let tr2 = b.trace();
        prop_assert!((tr1 - tr2).abs() < 1e-12 * tr1.abs().max(1.0));
    }

    #[test]
    fn trace_kn_identity_random(
        graw in sym_entries(4),
        t in sym_entries(4),
    ) {
        let n = 4;
        let g = spd_from(n, &graw);
        let tv = sym_from(n, &t);
        let q = kulkarni_nomizu(g.sym(), &tv).unwrap();
        let lhs = trace4(&g, &q).unwrap();
        let rhs = tv
            .scale((n - 2) as f64)
            .add(&g.sym().scale(trace2(&g, &tv).unwrap()));
        prop_assert!(lhs.sub(&rhs).max_abs() < 1e-12 * rhs.max_abs().max(1.0));
    }

    #[test]
    fn dualize_undualize_roundtrip(
        graw in sym_entries(3),
        t in sym_entries(3),
    ) {
        let n = 3;
        let g_val = spd_from(n, &graw);
        let t_val = sym_from(n, &t).scale(0.3);
        let g = ConstSym2::field(g_val.sym());
        let tf = ConstSym2::field(&t_val);
        let b = raised_endo(&g, &tf).unwrap();
        let pair = DualityPair::new(g, b, Side::Finite).unwrap();
        let origin = vec![0.0; n];
        // keep clear of the eigenvalue -1 locus
        let margin = pair.diagnostics(&[origin.clone()]).unwrap().dual_margin;
        prop_assume!(margin > 0.05);
        let back = pair.dualize().unwrap().undualize().unwrap();
        let d = gcinf::duality::pair_difference(&pair, &back, &origin).unwrap();
        prop_assert!(d < 1e-12, "round-trip defect {}", d);
    }

    #[test]
    fn parser_print_roundtrip_polynomials(
        coeffs in prop::collection::vec(-5.0f64..5.0, 4),
        powers in prop::collection::vec(1u32..4, 4),
    ) {
        // build a deterministic polynomial-ish source string
        let terms: Vec<String> = coeffs
            .iter()
            .zip(&powers)
            .enumerate()
            .map(|(i, (c, p))| format!("{c}*x{}^{p}", (i % 3) + 1))
            .collect();
        let src = terms.join(" + ");
        let a = parse_expr(&src, 3).unwrap();
        let printed = a.to_string();
        let b = parse_expr(&printed, 3).unwrap();
        prop_assert_eq!(&a, &b, "print/parse drift: {} -> {}", src, printed);
        // evaluation agrees at a probe point
        let p = vec![0.37f64, -0.81, 0.52];
        let va = a.eval(&p).unwrap();
        let vb = b.eval(&p).unwrap();
        prop_assert!((va - vb).abs() <= 1e-12 * va.abs().max(1.0));
    }
}
