//! The full verification suite: every identity the library is built around,
//! run at fixed tolerances over deterministic samples. Shared by the CLI
//! `suite` command and the acceptance tests.

use crate::duality::{
    composition_identity_defect, pair_difference, raised_endo, DualityPair, Side,
};
use crate::hyperbolic::{gauss_map, geodesic_flow, stereographic, ImmersionField, UnitTangent};
use crate::jetcalc::{ConstSym2, DerivEngine, ScalarJets, Sym2Jets};
use crate::lcf::{
    kn_injectivity, mobius_defect, os_cocycle_defect, os_naturality_defect, osgood_stowe,
    right_inverse_trace, schouten_solves_defect, two_chart_os_defect, weyl_divergence_defect,
    weyl_schouten_indicator, ConformalMap, ConformalPresentation,
};
use crate::multilinear::{
    kulkarni_nomizu, sectional, trace2, trace4, MetricValue, Sym2Value,
};
use crate::report::{Report, ReportConfig, ResidualReport};
use crate::speccat::{catalog, load_spec, scalar_field_from_expr, vec_map_from_exprs, Loaded, LoadedSpec};
use crate::transform::{ConformalPair, EndoPullback, PlusIdentityMap};
use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub seed: u64,
    pub points: usize,
    pub tol_overrides: BTreeMap<String, f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { seed: 7, points: 32, tol_overrides: BTreeMap::new() }
    }
}

impl SuiteConfig {
    fn tol(&self, name: &str, default: f64) -> f64 {
        *self.tol_overrides.get(name).unwrap_or(&default)
    }

    fn light_points(&self) -> usize {
        self.points
    }

    fn curvature_points(&self) -> usize {
        self.points.min(8)
    }

    fn heavy_points(&self) -> usize {
        self.points.min(6)
    }
}

fn builtin(name: &str) -> Result<Loaded> {
    let doc = catalog::builtin(name)
        .ok_or_else(|| Error::Schema(format!("unknown builtin `{name}`")))?;
    load_spec(&doc)
}

fn metric_of(loaded: &Loaded) -> crate::jetcalc::Sym2Field {
    loaded.metric_field()
}

fn pair_of(loaded: &Loaded) -> Result<DualityPair> {
    match &loaded.spec {
        LoadedSpec::Pair { pair } => Ok(pair.clone()),
        LoadedSpec::Immersion { imm } => {
            DualityPair::new(imm.induced_metric(), imm.induced_shape(), Side::Finite)
        }
        _ => Err(Error::Schema(format!("{} is not a pair source", loaded.name))),
    }
}

fn immersion_of(loaded: &Loaded) -> Result<ImmersionField> {
    match &loaded.spec {
        LoadedSpec::Immersion { imm } => Ok(imm.clone()),
        _ => Err(Error::Schema(format!("{} is not an immersion", loaded.name))),
    }
}

fn presentation_of(loaded: &Loaded) -> Result<ConformalPresentation> {
    match &loaded.spec {
        LoadedSpec::Conformal { presentation } => Ok(presentation.clone()),
        _ => Err(Error::Schema(format!("{} is not conformal", loaded.name))),
    }
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> MetricValue {
    let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let m = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
    MetricValue::new(Sym2Value::symmetrized(&m).0).expect("positive definite by construction")
}

fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> Sym2Value {
    Sym2Value::from_fn_sym(n, |_, _| rng.gen_range(-1.0..1.0))
}

const IMMERSION_CATALOG: [&str; 10] = [
    "slice2",
    "slice3",
    "horosphere2",
    "horosphere3",
    "geosphere2_r0.5",
    "geosphere2_r1",
    "geosphere2_r2",
    "geosphere3_r1",
    "equidistant2",
    "graph2_0",
];

/// Criterion 1: the Kulkarni-Nomizu trace identity
/// `tr_g(g owedge T) = (n-2) T + tr_g(T) g` on random inputs.
pub fn criterion_trace_identity(cfg: &SuiteConfig) -> Result<Vec<ResidualReport>> {
    let tol = cfg.tol("trace-kn", 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x1);
    let mut outcomes = Vec::new();
    for i in 0..100 {
        let n = 3 + (i % 3);
        let g = random_spd(n, &mut rng);
        let t = random_sym(n, &mut rng);
        let q = kulkarni_nomizu(g.sym(), &t)?;
        let lhs = trace4(&g, &q)?;
        let rhs = t
            .scale((n - 2) as f64)
            .add(&g.sym().scale(trace2(&g, &t)?));
        let rel = lhs.sub(&rhs).max_abs() / rhs.max_abs().max(1.0);
        outcomes.push(Some(rel));
    }
    Ok(vec![ResidualReport::from_samples("trace-kn", tol, outcomes)])
}

/// Criterion 2: the transformation laws (conformal curvature, pullback by
/// `Id + B`, conformal exterior derivative, and the Hessian-curvature
/// identity), predicted versus directly computed.
pub fn criterion_transformation_laws(cfg: &SuiteConfig) -> Result<Vec<ResidualReport>> {
    let engine = DerivEngine::ad();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x2);
    let bases = ["flat2", "flat3", "halfspace3", "polymetric3_0", "polymetric4_0"];

    // conformal change of metric: curvature tensor and scalar curvature
    let mut conf = Vec::new();
    for base in bases {
        let loaded = builtin(base)?;
        let g = metric_of(&loaded);
        let n = loaded.dim;
        for _ in 0..4 {
            let u = scalar_field_from_expr(n, &catalog::random_factor_expr(n, &mut rng))?;
            let pair = ConformalPair::new(g.clone(), u)?;
            for p in loaded.chart.sample_points(1, cfg.seed) {
                let pred = pair.conf_riemann(&engine, &p)?;
                let direct = pair.direct_riemann(&engine, &p)?;
                let scale = direct.max_abs().max(1.0);
                let mut rel = pred.sub(&direct).max_abs() / scale;
                let s_pred = pair.conf_scalar(&engine, &p)?;
                let s_direct = pair.direct_scalar(&engine, &p)?;
                rel = rel.max((s_pred - s_direct).abs() / s_direct.abs().max(1.0));
                conf.push(Some(rel));
            }
        }
    }

    // pullback by A = Id + B for integrable (Codazzi) B
    let mut pull = Vec::new();
    for name in ["horopair2", "spherepair2_r1", "totgeopair3", "geosphere2_r1", "graph2_0"] {
        let loaded = builtin(name)?;
        let pair = pair_of(&loaded)?;
        let a = PlusIdentityMap::field(pair.b.clone());
        let pb = EndoPullback::new(pair.g.clone(), a)?;
        for p in loaded.chart.sample_points(cfg.heavy_points(), cfg.seed) {
            let pred = pb.pullback_riemann(&engine, &p)?;
            let direct = pb.direct_riemann(&engine, &p)?;
            let scale = direct.max_abs().max(1.0);
            let mut rel = pred.sub(&direct).max_abs() / scale;
            let x = [1.0, 0.3, -0.2, 0.1][..loaded.dim].to_vec();
            let y = [0.2, -1.0, 0.4, 0.3][..loaded.dim].to_vec();
            let c_pred = pb.pullback_connection(&engine, &p, &x, &y)?;
            let c_direct = pb.direct_connection(&engine, &p, &x, &y)?;
            let c_scale = c_direct.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (a, b) in c_pred.iter().zip(&c_direct) {
                rel = rel.max((a - b).abs() / c_scale);
            }
            pull.push(Some(rel));
        }
    }

    // conformal behavior of the exterior covariant derivative
    let mut drel = Vec::new();
    for base in ["flat3", "polymetric3_0"] {
        let loaded = builtin(base)?;
        let g = metric_of(&loaded);
        let n = loaded.dim;
        let t_loaded = builtin("polymetric3_1")?;
        let t = metric_of(&t_loaded);
        for _ in 0..10 {
            let u = scalar_field_from_expr(n, &catalog::random_factor_expr(n, &mut rng))?;
            let pair = ConformalPair::new(g.clone(), u)?;
            for p in loaded.chart.sample_points(1, cfg.seed) {
                let pred = pair.conf_dnabla(&t, &engine, &p)?;
                let direct = pair.direct_dnabla(&t, &engine, &p)?;
                let rel = pred.sub(&direct).max_abs() / (1.0 + direct.max_abs());
                drel.push(Some(rel));
            }
        }
    }

    // d^∇ Hess(u) (X,Y,Z) = Rm(∇u, X, Y, Z)
    let mut hess = Vec::new();
    for base in ["flat3", "sphere3_r1", "halfspace3", "polymetric3_0", "polymetric4_0"] {
        let loaded = builtin(base)?;
        let g = metric_of(&loaded);
        let n = loaded.dim;
        for _ in 0..4 {
            let u = scalar_field_from_expr(n, &catalog::random_factor_expr(n, &mut rng))?;
            for p in loaded.chart.sample_points(1, cfg.seed) {
                let mj = g.metric_jets(&engine, &p, 3)?;
                let uj = ScalarJets::from_jet(&u.jet(&engine, &p, 3)?);
                let (h, dh) = mj.hessian_with_derivative(&uj);
                let lhs = mj.dnabla_sym2(&Sym2Jets { n, t: h.matrix().clone(), dt: dh });
                let rm = mj.riemann();
                let grad = mj.gradient(&uj);
                let mut defect = 0.0f64;
                let mut scale = 1.0f64;
                for x in 0..n {
                    for y in 0..n {
                        for z in 0..n {
                            let mut rhs = 0.0;
                            for a in 0..n {
                                rhs += grad[a] * rm.get(a, x, y, z);
                            }
                            scale = scale.max(rhs.abs());
                            defect = defect.max((lhs.get(x, y, z) - rhs).abs());
                        }
                    }
                }
                hess.push(Some(defect / scale));
            }
        }
    }

    Ok(vec![
        ResidualReport::from_samples("conf-curvature-law", cfg.tol("conf-curvature-law", 1e-8), conf),
        ResidualReport::from_samples("pullback-curvature-law", cfg.tol("pullback-curvature-law", 1e-8), pull),
        ResidualReport::from_samples("dnabla-conformal-law", cfg.tol("dnabla-conformal-law", 1e-8), drel),
        ResidualReport::from_samples("hessian-codazzi-law", cfg.tol("hessian-codazzi-law", 1e-8), hess),
    ])
}

/// Criterion 3: every catalog immersion satisfies the integrability system;
/// geodesic spheres carry their classical data.
pub fn criterion_immersions(cfg: &SuiteConfig) -> Result<Vec<ResidualReport>> {
    let engine = DerivEngine::ad();
    let mut gc = Vec::new();
    for name in IMMERSION_CATALOG
        .iter()
        .chain(["graph2_1", "graph3_0"].iter())
    {
        let loaded = builtin(name)?;
        let pair = pair_of(&loaded)?;
        for p in loaded.chart.sample_points(cfg.heavy_points(), cfg.seed) {
            let (_, _, grel, crel) = pair.residuals(&engine, &p)?;
            gc.push(Some(grel.max(crel)));
        }
    }

    let mut shape = Vec::new();
    let mut sec = Vec::new();
    for (name, r) in [
        ("geosphere2_r0.5", 0.5f64),
        ("geosphere2_r1", 1.0),
        ("geosphere2_r2", 2.0),
        ("geosphere3_r1", 1.0),
    ] {
        let loaded = builtin(name)?;
        let imm = immersion_of(&loaded)?;
        let coth = r.cosh() / r.sinh();
        let expect_sec = 1.0 / (r.sinh() * r.sinh());
        for p in loaded.chart.sample_points(cfg.heavy_points(), cfg.seed) {
            let (g, b) = imm.induced_data(&engine, &p)?;
            let n = loaded.dim;
            let mut dev = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let e = if i == j { coth } else { 0.0 };
                    dev = dev.max((b.get(i, j) - e).abs() / coth);
                }
            }
            shape.push(Some(dev));
            let rm = imm.induced_metric().metric_jets(&engine, &p, 2)?.riemann();
            let x = vec![1.0; n];
            let mut y = vec![0.0; n];
            y[n - 1] = 1.0;
            y[0] = -0.4;
            let s = sectional(&g, &rm, &x, &y)?;
            sec.push(Some((s - expect_sec).abs() / expect_sec));
        }
    }

    Ok(vec![
        ResidualReport::from_samples("gc-immersion", cfg.tol("gc-immersion", 1e-7), gc),
        ResidualReport::from_samples("sphere-shape-operator", cfg.tol("sphere-shape-operator", 1e-8), shape),
        ResidualReport::from_samples("sphere-sectional", cfg.tol("sphere-sectional", 1e-7), sec),
    ])
}

/// Criterion 4: the equivalence of the two systems. Residual ratios
/// `r = dual_residual / (100 eps + 1e-9)` must stay below 1 in both
/// directions, plus the Codazzi transport identity.
pub fn criterion_dual_equations(cfg: &SuiteConfig) -> Result<Vec<ResidualReport>> {
    let engine = DerivEngine::ad();
    let forward_instances = [
        "slice2",
        "geosphere2_r1",
        "horosphere2",
        "equidistant2",
        "graph2_0",
        "graph2_1",
        "graph3_0",
        "spherepair2_r1",
        "totgeopair2",
    ];

    let mut forward = Vec::new();
    let mut transport = Vec::new();
    for name in forward_instances {
        let loaded = builtin(name)?;
        let pair = pair_of(&loaded)?;
        let pts = loaded.chart.sample_points(cfg.heavy_points(), cfg.seed);
        let mut eps = 0.0f64;
        for p in &pts {
            let (_, _, grel, crel) = pair.residuals(&engine, p)?;
            eps = eps.max(grel).max(crel);
        }
        let dual = pair.dualize()?;
        let bound = 100.0 * eps + 1e-9;
        for p in &pts {
            let (_, _, grel, crel) = dual.residuals(&engine, p)?;
            forward.push(Some(grel.max(crel) / bound));
            transport.push(Some(pair.codazzi_transport_defect(&engine, p)?));
        }
    }

    // backward: solutions at infinity, scaled off the eigenvalue -1 locus
    // when needed, then pulled back to the finite side
    let mut backward = Vec::new();
    let backward_sources: Vec<(String, DualityPair, crate::jetcalc::ChartBox)> = {
        let mut v = Vec::new();
        for name in ["polyconf2_0", "polyconf3_0", "sphere2_r1", "sphere3_r1"] {
            let loaded = builtin(name)?;
            let pres = presentation_of(&loaded)?;
            v.push((name.to_string(), pres.solution_at_infinity(), loaded.chart));
        }
        for name in ["geosphere2_r1", "graph2_0"] {
            let loaded = builtin(name)?;
            let pair = pair_of(&loaded)?;
            v.push((name.to_string(), pair.dualize()?, loaded.chart));
        }
        v
    };
    for (name, inf_pair, chart) in backward_sources {
        let pts = chart.sample_points(cfg.heavy_points(), cfg.seed);
        let margin = inf_pair.diagnostics(&pts)?.dual_margin;
        let working = if margin < 0.2 {
            inf_pair.scale_family(1.0)?
        } else {
            inf_pair
        };
        let mut eps = 0.0f64;
        for p in &pts {
            let (_, _, grel, crel) = working.residuals(&engine, p)?;
            eps = eps.max(grel).max(crel);
        }
        let finite = working.undualize()?;
        let bound = 100.0 * eps + 1e-9;
        for p in &pts {
            let (_, _, grel, crel) = finite.residuals(&engine, p)?;
            backward.push(Some(grel.max(crel) / bound));
        }
        let _ = name;
    }

    Ok(vec![
        ResidualReport::from_samples("dual-forward", cfg.tol("dual-forward", 1.0), forward),
        ResidualReport::from_samples("dual-backward", cfg.tol("dual-backward", 1.0), backward),
        ResidualReport::from_samples("codazzi-transport", cfg.tol("codazzi-transport", 1e-8), transport),
    ])
}

/// Criterion 5: the purely algebraic duality identities.
pub fn criterion_algebraic_duality(cfg: &SuiteConfig) -> Result<Vec<ResidualReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5);
    let mut roundtrip = Vec::new();
    let mut composition = Vec::new();
    let mut expansion = Vec::new();
    let origin = [0.0, 0.0, 0.0];

    for _ in 0..50 {
        let n = 3;
        // constant self-adjoint pair with spectrum away from -1
        let g_val = random_spd(n, &mut rng);
        let t_val = random_sym(n, &mut rng).scale(0.4);
        let g = ConstSym2::field(g_val.sym());
        let t = ConstSym2::field(&t_val);
        let b = raised_endo(&g, &t)?;
        let pair = DualityPair::new(g, b, Side::Finite)?;
        let diag = pair.diagnostics(&[origin.to_vec()])?;
        if diag.dual_margin < 0.05 {
            continue;
        }
        let dual = pair.dualize()?;
        let back = dual.undualize()?;
        roundtrip.push(Some(pair_difference(&pair, &back, &origin)?));
        composition.push(Some(composition_identity_defect(&pair, &dual, &origin)?));
        for tt in [-1.0, 0.0, 1.0] {
            expansion.push(Some(pair.expansion_defect(&origin, tt)?));
        }
    }

    // field-level pairs exercise the same identities with position dependence
    for name in ["geosphere2_r1", "graph2_0", "horopair2"] {
        let loaded = builtin(name)?;
        let pair = pair_of(&loaded)?;
        let dual = pair.dualize()?;
        let back = dual.undualize()?;
        for p in loaded.chart.sample_points(cfg.heavy_points(), cfg.seed) {
            roundtrip.push(Some(pair_difference(&pair, &back, &p)?));
            composition.push(Some(composition_identity_defect(&pair, &dual, &p)?));
            for tt in [-1.0, 0.0, 1.0] {
                expansion.push(Some(pair.expansion_defect(&p, tt)?));
            }
        }
    }

    // scaling family: second fundamental form invariance and residual
    // preservation on a solved instance
    let engine = DerivEngine::ad();
    let mut scaling = Vec::new();
    let loaded = builtin("sphere3_r1")?;
    let pres = presentation_of(&loaded)?;
    let inf = pres.solution_at_infinity();
    for p in loaded.chart.sample_points(cfg.heavy_points(), cfg.seed) {
        let ii0 = inf.second_fundamental().value(&p)?;
        for t in [-1.0, 0.5, 2.0] {
            let fam = inf.scale_family(t)?;
            let ii = fam.second_fundamental().value(&p)?;
            scaling.push(Some((ii - &ii0).abs().max() / ii0.abs().max().max(1.0)));
        }
        let fam = inf.scale_family(1.0)?;
        let (_, _, grel, crel) = fam.residuals(&engine, &p)?;
        scaling.push(Some(grel.max(crel)));
    }

    Ok(vec![
        ResidualReport::from_samples("dual-roundtrip", cfg.tol("dual-roundtrip", 1e-12), roundtrip),
        ResidualReport::from_samples("dual-composition", cfg.tol("dual-composition", 1e-12), composition),
        ResidualReport::from_samples("parallel-expansion", cfg.tol("parallel-expansion", 1e-12), expansion),
        ResidualReport::from_samples("scaling-family", cfg.tol("scaling-family", 1e-8), scaling),
    ])
}

/// Criterion 6: the boundary metric comparison and the Gauss map as the
/// limit of the flow.
pub fn criterion_boundary_metric(cfg: &SuiteConfig) -> Result<Vec<ResidualReport>> {
    let engine = DerivEngine::ad();
    let mut boundary = Vec::new();
    for name in IMMERSION_CATALOG {
        let loaded = builtin(name)?;
        let imm = immersion_of(&loaded)?;
        for p in loaded.chart.sample_points(cfg.heavy_points(), cfg.seed) {
            boundary.push(Some(imm.metric_at_infinity_check(&engine, &p)?));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6);
    let mut limit = Vec::new();
    for _ in 0..cfg.light_points() {
        let m = if rng.gen_bool(0.5) { 4 } else { 5 };
        let y: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(-0.8..0.8)).collect();
        let mut p = y.clone();
        p.push((1.0 + y.iter().map(|c| c * c).sum::<f64>()).sqrt());
        let w: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let wp = crate::hyperbolic::minkowski_inner(&w, &p);
        let mut v: Vec<f64> = (0..m).map(|a| w[a] + wp * p[a]).collect();
        let vn = crate::hyperbolic::minkowski_inner(&v, &v).sqrt();
        for c in v.iter_mut() {
            *c /= vn;
        }
        let ut = UnitTangent::new(p, v)?;
        let ideal = gauss_map(&ut);
        let far = stereographic(&geodesic_flow(&ut, 20.0));
        let err: f64 = ideal
            .iter()
            .zip(&far)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        limit.push(Some(err));
    }

    Ok(vec![
        ResidualReport::from_samples("boundary-metric", cfg.tol("boundary-metric", 1e-7), boundary),
        ResidualReport::from_samples("gauss-map-limit", cfg.tol("gauss-map-limit", 1e-6), limit),
    ])
}

/// Criterion 7: the closed-form boundary solution for conformally flat
/// metrics solves both equations; the trace identity follows.
pub fn criterion_solution_at_infinity(cfg: &SuiteConfig) -> Result<Vec<ResidualReport>> {
    let engine = DerivEngine::ad();
    let mut gauss = Vec::new();
    let mut codazzi = Vec::new();
    let mut trace = Vec::new();
    for n in 2..=4usize {
        for k in 0..10u64 {
            let loaded = builtin(&format!("polyconf{n}_{k}"))?;
            let pres = presentation_of(&loaded)?;
            let pair = pres.solution_at_infinity();
            for p in loaded.chart.sample_points(2, cfg.seed) {
                let (_, _, grel, crel) = pair.residuals(&engine, &p)?;
                gauss.push(Some(grel));
                codazzi.push(Some(crel));
                let d = pair.trace_scalar_check(&engine, &p)?;
                let tr = pair.b.value(&p)?.trace();
                trace.push(Some(d.abs() / (1.0 + tr.abs())));
            }
        }
    }
    // the round presentations give the constant-curvature instance
    for name in ["sphere2_r1", "sphere3_r1", "sphere4_r1"] {
        let loaded = builtin(name)?;
        let pres = presentation_of(&loaded)?;
        let pair = pres.solution_at_infinity();
        for p in loaded.chart.sample_points(2, cfg.seed) {
            let (_, _, grel, crel) = pair.residuals(&engine, &p)?;
            gauss.push(Some(grel));
            codazzi.push(Some(crel));
            let d = pair.trace_scalar_check(&engine, &p)?;
            let tr = pair.b.value(&p)?.trace();
            trace.push(Some(d.abs() / (1.0 + tr.abs())));
        }
    }

    Ok(vec![
        ResidualReport::from_samples("solution-gauss", cfg.tol("solution-gauss", 1e-8), gauss),
        ResidualReport::from_samples("solution-codazzi", cfg.tol("solution-codazzi", 1e-8), codazzi),
        ResidualReport::from_samples("solution-trace", cfg.tol("solution-trace", 1e-8), trace),
    ])
}

/// Criterion 8: uniqueness through the Kulkarni-Nomizu trace argument.
pub fn criterion_uniqueness(cfg: &SuiteConfig) -> Result<Vec<ResidualReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x8);
    let mut roundtrip = Vec::new();
    let mut bound = Vec::new();
    for i in 0..100 {
        let n = if i % 2 == 0 { 3 } else { 4 };
        let g = random_spd(n, &mut rng);
        let s = random_sym(n, &mut rng);
        let rec = kn_injectivity(&g, &s)?;
        roundtrip.push(Some(rec.sub(&s).max_abs() / s.max_abs().max(1.0)));
        // explicit constant from the two-trace argument (flat reference)
        let ge = MetricValue::euclidean(n);
        let h = random_sym(n, &mut rng);
        let k = random_sym(n, &mut rng);
        let diff = h.sub(&k);
        let c = (1.0 + n as f64 / (2.0 * (n as f64 - 1.0))) / (n as f64 - 2.0);
        let q = kulkarni_nomizu(ge.sym(), &diff)?;
        bound.push(Some(diff.frobenius() / (c * q.frobenius() + 1e-300)));
    }
    // right inverse of the trace
    let mut rinv = Vec::new();
    for _ in 0..20 {
        let n = if rng.gen_bool(0.5) { 3 } else { 4 };
        let g = random_spd(n, &mut rng);
        let h = random_sym(n, &mut rng);
        let q = right_inverse_trace(&g, &h)?;
        let back = trace4(&g, &q)?;
        rinv.push(Some(back.sub(&h).max_abs() / h.max_abs().max(1.0)));
    }
    // dimension 2 must report the kernel
    let g2 = MetricValue::euclidean(2);
    let dim2 = match kn_injectivity(&g2, &Sym2Value::identity(2)) {
        Err(Error::UniquenessDim2) => 0.0,
        _ => 1.0,
    };

    Ok(vec![
        ResidualReport::from_samples("kn-injectivity", cfg.tol("kn-injectivity", 1e-12), roundtrip),
        ResidualReport::from_samples("kn-uniqueness-bound", cfg.tol("kn-uniqueness-bound", 1.0), bound),
        ResidualReport::from_samples("trace-right-inverse", cfg.tol("trace-right-inverse", 1e-12), rinv),
        ResidualReport::from_samples("kn-dim2-kernel", cfg.tol("kn-dim2-kernel", 0.5), vec![Some(dim2)]),
    ])
}

fn inversion_map(n: usize) -> Result<ConformalMap> {
    let norm: String = (1..=n)
        .map(|i| format!("x{i}^2"))
        .collect::<Vec<_>>()
        .join(" + ");
    let comps: Vec<String> = (1..=n).map(|i| format!("x{i}/({norm})")).collect();
    let refs: Vec<&str> = comps.iter().map(|s| s.as_str()).collect();
    Ok(ConformalMap::new(vec_map_from_exprs(n, &refs)?))
}

fn similarity_map(n: usize, scale: f64, angle: f64, shift: f64) -> Result<ConformalMap> {
    // rotation in the (x1, x2) plane, then dilation and translation
    let (c, s) = (angle.cos(), angle.sin());
    let mut comps = Vec::new();
    comps.push(format!("{}*x1 - {}*x2 + {shift}", scale * c, scale * s));
    comps.push(format!("{}*x1 + {}*x2", scale * s, scale * c));
    for i in 3..=n {
        comps.push(format!("{scale}*x{i}"));
    }
    let refs: Vec<&str> = comps.iter().map(|s| s.as_str()).collect();
    Ok(ConformalMap::new(vec_map_from_exprs(n, &refs)?))
}

/// Criterion 9: the conformal differential is traceless, satisfies the
/// cocycle and naturality rules, detects Moebius maps, and patches across
/// charts.
pub fn criterion_conformal_differential(cfg: &SuiteConfig) -> Result<Vec<ResidualReport>> {
    let engine = DerivEngine::ad();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9);

    let mut traceless = Vec::new();
    let mut cocycle = Vec::new();
    for case in 0..20 {
        let n = 2 + (case % 3);
        let delta = ConstSym2::identity(n);
        let gref = MetricValue::euclidean(n);
        let u = scalar_field_from_expr(n, &catalog::random_factor_expr(n, &mut rng))?;
        let b = scalar_field_from_expr(n, &catalog::random_factor_expr(n, &mut rng))?;
        let box_ = crate::jetcalc::ChartBox::symmetric_unit(n);
        for p in box_.sample_points(2, cfg.seed) {
            let os = osgood_stowe(&delta, &u, &engine, &p)?;
            traceless.push(Some(trace2(&gref, &os)?.abs() / os.max_abs().max(1.0)));
            cocycle.push(Some(os_cocycle_defect(&delta, &u, &b, &engine, &p)?));
        }
    }

    let mut naturality = Vec::new();
    for n in [2usize, 3] {
        let delta = ConstSym2::identity(n);
        let a = scalar_field_from_expr(n, &catalog::random_factor_expr(n, &mut rng))?;
        let maps = [similarity_map(n, 1.4, 0.5, 0.2)?, inversion_map(n)?];
        for map in &maps {
            // keep away from the inversion singularity at the origin
            for p in [[0.8, 0.6, 0.5][..n].to_vec(), [1.1, -0.4, 0.3][..n].to_vec()] {
                naturality.push(Some(os_naturality_defect(map, &delta, &a, &engine, &p)?));
            }
        }
    }

    let mut mobius = Vec::new();
    for n in [2usize, 3] {
        let cases = [
            similarity_map(n, 1.0, 0.0, 0.7)?, // translation
            similarity_map(n, 1.0, 0.9, 0.0)?, // rotation
            similarity_map(n, 2.2, 0.0, 0.0)?, // dilation
            inversion_map(n)?,
        ];
        for map in &cases {
            let p = [1.0, 1.0, 1.0][..n].to_vec();
            mobius.push(Some(mobius_defect(map, &engine, &p)?));
        }
    }
    // the non-Moebius control: z -> z^2 at z = 1 + i
    let sq = ConformalMap::new(vec_map_from_exprs(2, &["x1^2 - x2^2", "2*x1*x2"])?);
    let control = mobius_defect(&sq, &engine, &[1.0, 1.0])?;

    let mut patch = Vec::new();
    for n in [2usize, 3] {
        let u = scalar_field_from_expr(n, &catalog::random_factor_expr(n, &mut rng))?;
        for map in [similarity_map(n, 1.3, 0.4, 0.1)?, inversion_map(n)?] {
            for q in [[0.7, 0.5, 0.6][..n].to_vec(), [0.9, -0.3, 0.4][..n].to_vec()] {
                patch.push(Some(two_chart_os_defect(&u, &map, &engine, &q)?));
            }
        }
    }

    Ok(vec![
        ResidualReport::from_samples("os-traceless", cfg.tol("os-traceless", 1e-11), traceless),
        ResidualReport::from_samples("os-cocycle", cfg.tol("os-cocycle", 1e-9), cocycle),
        ResidualReport::from_samples("os-naturality", cfg.tol("os-naturality", 1e-8), naturality),
        ResidualReport::from_samples("os-mobius", cfg.tol("os-mobius", 1e-8), mobius),
        ResidualReport::from_control("os-mobius-control", cfg.tol("os-mobius-control", 1e-2), vec![control]),
        ResidualReport::from_samples("os-two-chart", cfg.tol("os-two-chart", 1e-8), patch),
    ])
}

/// Criterion 10: the conformal-flatness indicators by dimension, the
/// Schouten identity, and the divergence identity for the trace-free part.
pub fn criterion_weyl_schouten(cfg: &SuiteConfig) -> Result<Vec<ResidualReport>> {
    let engine = DerivEngine::ad();

    let mut lcf3 = Vec::new();
    for name in ["polyconf3_0", "polyconf3_1", "polyconf3_2", "sphere3_r1", "halfspace3_conf"] {
        let loaded = builtin(name)?;
        let g = metric_of(&loaded);
        for p in loaded.chart.sample_points(cfg.curvature_points(), cfg.seed) {
            lcf3.push(Some(weyl_schouten_indicator(&g, &engine, &p)?));
        }
    }

    let mut lcf4 = Vec::new();
    for name in ["polyconf4_0", "polyconf4_1", "polyconf4_2", "sphere4_r1", "halfspace4_conf"] {
        let loaded = builtin(name)?;
        let g = metric_of(&loaded);
        for p in loaded.chart.sample_points(cfg.curvature_points(), cfg.seed) {
            lcf4.push(Some(weyl_schouten_indicator(&g, &engine, &p)?));
        }
    }

    let mut control = Vec::new();
    for k in 0..3 {
        let loaded = builtin(&format!("nonlcf4_{k}"))?;
        let g = metric_of(&loaded);
        let mut worst = 0.0f64;
        for p in loaded.chart.sample_points(cfg.curvature_points(), cfg.seed) {
            worst = worst.max(weyl_schouten_indicator(&g, &engine, &p)?);
        }
        control.push(worst);
    }

    let mut solves = Vec::new();
    for name in ["polyconf3_0", "polyconf3_3", "polyconf4_0", "polyconf4_3", "sphere3_r1"] {
        let loaded = builtin(name)?;
        let pres = presentation_of(&loaded)?;
        for p in loaded.chart.sample_points(cfg.curvature_points(), cfg.seed) {
            solves.push(Some(schouten_solves_defect(&pres, &engine, &p)?));
        }
    }

    let mut divergence = Vec::new();
    for name in ["nonlcf4_0", "nonlcf4_1", "polymetric4_0", "sphere4_r1"] {
        let loaded = builtin(name)?;
        let g = metric_of(&loaded);
        for p in loaded.chart.sample_points(cfg.curvature_points(), cfg.seed) {
            divergence.push(Some(weyl_divergence_defect(&g, &engine, &p)?));
        }
    }

    Ok(vec![
        ResidualReport::from_samples("weyl-schouten-lcf3", cfg.tol("weyl-schouten-lcf3", 1e-8), lcf3),
        ResidualReport::from_samples("weyl-lcf4", cfg.tol("weyl-lcf4", 1e-9), lcf4),
        ResidualReport::from_control("weyl-control4", cfg.tol("weyl-control4", 1e-3), control),
        ResidualReport::from_samples("schouten-solves", cfg.tol("schouten-solves", 1e-8), solves),
        ResidualReport::from_samples("weyl-divergence", cfg.tol("weyl-divergence", 1e-6), divergence),
    ])
}

/// Criterion 11: both derivative engines agree on curvature, and reports are
/// byte-deterministic.
pub fn criterion_engines(cfg: &SuiteConfig) -> Result<Vec<ResidualReport>> {
    let ad = DerivEngine::ad();
    let fd = DerivEngine::fd();
    let mut agree = Vec::new();
    let names = [
        "flat3",
        "sphere2_r1",
        "sphere3_r1",
        "halfspace2",
        "halfspace3",
        "polymetric3_0",
        "polymetric4_0",
        "nonlcf4_0",
        "polyconf3_0",
    ];
    for name in names {
        let loaded = builtin(name)?;
        let g = metric_of(&loaded);
        let n = loaded.dim;
        for p in loaded.chart.sample_points(cfg.heavy_points(), cfg.seed) {
            let ja = g.metric_jets(&ad, &p, 2)?;
            let jf = g.metric_jets(&fd, &p, 2)?;
            let rm_a = ja.riemann();
            let rm_f = jf.riemann();
            let mut rel = rm_a.sub(&rm_f).max_abs() / (1.0 + rm_a.max_abs());
            let ric_a = ja.ricci();
            let ric_f = jf.ricci();
            rel = rel.max(ric_a.sub(&ric_f).max_abs() / (1.0 + ric_a.max_abs()));
            rel = rel.max((ja.scalar() - jf.scalar()).abs() / (1.0 + ja.scalar().abs()));
            let gv = MetricValue::new(Sym2Value::try_from_matrix(ja.g.clone()).unwrap())?;
            let x = vec![1.0; n];
            let mut y = vec![0.0; n];
            y[n - 1] = 1.0;
            y[0] = -0.4;
            let sa = sectional(&gv, &rm_a, &x, &y)?;
            let sf = sectional(&gv, &rm_f, &x, &y)?;
            rel = rel.max((sa - sf).abs() / (1.0 + sa.abs()));
            agree.push(Some(rel));
        }
    }

    // byte determinism: the same sub-report built twice
    let sub = |_: ()| -> Result<Report> {
        let mut checks = Vec::new();
        for name in ["flat3", "sphere3_r1"] {
            let loaded = builtin(name)?;
            let g = metric_of(&loaded);
            let mut out = Vec::new();
            for p in loaded.chart.sample_points(4, cfg.seed) {
                let rm = g.metric_jets(&ad, &p, 2)?.riemann();
                out.push(Some(rm.symmetry_defect()));
            }
            checks.push(ResidualReport::from_samples(&format!("rm-symmetry:{name}"), 1e-9, out));
        }
        Ok(Report::new(
            "determinism-probe",
            ReportConfig {
                inputs: vec!["builtin:flat3".into(), "builtin:sphere3_r1".into()],
                points: 4,
                seed: cfg.seed,
                engine: "ad".into(),
                tol_overrides: BTreeMap::new(),
                side: None,
            },
            checks,
        ))
    };
    let r1 = sub(())?;
    let r2 = sub(())?;
    let deterministic = if r1.canonical_json() == r2.canonical_json() { 0.0 } else { 1.0 };

    Ok(vec![
        ResidualReport::from_samples("engine-agreement", cfg.tol("engine-agreement", 1e-6), agree),
        ResidualReport::from_samples(
            "report-determinism",
            cfg.tol("report-determinism", 0.5),
            vec![Some(deterministic)],
        ),
    ])
}

/// Every criterion in order, each with its named checks.
pub fn all_criteria(cfg: &SuiteConfig) -> Result<Vec<(usize, Vec<ResidualReport>)>> {
    Ok(vec![
        (1, criterion_trace_identity(cfg)?),
        (2, criterion_transformation_laws(cfg)?),
        (3, criterion_immersions(cfg)?),
        (4, criterion_dual_equations(cfg)?),
        (5, criterion_algebraic_duality(cfg)?),
        (6, criterion_boundary_metric(cfg)?),
        (7, criterion_solution_at_infinity(cfg)?),
        (8, criterion_uniqueness(cfg)?),
        (9, criterion_conformal_differential(cfg)?),
        (10, criterion_weyl_schouten(cfg)?),
        (11, criterion_engines(cfg)?),
    ])
}

/// Runs the full suite and assembles a report.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Report> {
    let start = std::time::Instant::now();
    let mut checks = Vec::new();
    for (criterion, mut batch) in all_criteria(cfg)? {
        for c in batch.iter_mut() {
            c.name = format!("c{criterion:02}/{}", c.name);
        }
        checks.append(&mut batch);
    }
    let mut report = Report::new(
        "suite",
        ReportConfig {
            inputs: vec!["builtin:*".into()],
            points: cfg.points,
            seed: cfg.seed,
            engine: "ad".into(),
            tol_overrides: cfg.tol_overrides.clone(),
            side: None,
        },
        checks,
    );
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}
