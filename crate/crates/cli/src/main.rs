//! Command-line front end: runs check suites over spec documents and emits
//! deterministic JSON reports. Exit code 0 means every check passed; 2 means
//! an input failed to load or validate.

use clap::{Args, Parser, Subcommand, ValueEnum};
use gcinf::duality::{composition_identity_defect, DualityPair, Side};
use gcinf::jetcalc::DerivEngine;
use gcinf::multilinear::MetricValue;
use gcinf::report::{Report, ReportConfig, ResidualReport};
use gcinf::speccat::{catalog, load_spec, Loaded, LoadedSpec, SpecDocument};
use gcinf::suite::{run_suite, SuiteConfig};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

mod emit;

#[derive(Parser)]
#[command(
    name = "gcinf",
    version,
    about = "Chart-level checks for hypersurface data in hyperbolic space and its boundary dual"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    Ad,
    Fd,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SideArg {
    Finite,
    Infinity,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Spec,
    Table,
}

#[derive(Args, Clone)]
struct Common {
    /// Input documents: a path, or `builtin:NAME` for catalog entries.
    #[arg(long = "input")]
    inputs: Vec<String>,
    /// Quasi-random sample points per chart box.
    #[arg(long, default_value_t = 32)]
    points: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Default relative tolerance for this command's checks.
    #[arg(long = "tol-rel")]
    tol_rel: Option<f64>,
    #[arg(long, value_enum, default_value_t = EngineArg::Ad)]
    engine: EngineArg,
    /// Report destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Curvature samples and symmetry checks for metric documents.
    Curvature(Common),
    /// Integrability residuals for pair documents (finite side by default).
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = SideArg::Finite)]
        side: SideArg,
    },
    /// Applies the boundary transformation to pair documents and emits the
    /// dual data as a new document (or a sampled table).
    Dualize {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = FormatArg::Spec)]
        format: FormatArg,
    },
    /// Conformal-flatness indicators by dimension.
    WeylSchouten(Common),
    /// Parallel-surface sweep over a t grid, with induced-metric spectra.
    Flow {
        #[command(flatten)]
        common: Common,
        /// Grid as start:step:end.
        #[arg(long, default_value = "-1:0.25:1")]
        t_grid: String,
    },
    /// The full verification suite over the built-in catalog.
    Suite(Common),
}

struct Ctx {
    common: Common,
    tol_overrides: BTreeMap<String, f64>,
    extra: Vec<(PathBuf, String)>,
    stdout_extra: Vec<String>,
}

impl Ctx {
    fn tol(&self, name: &str, default: f64) -> f64 {
        if let Some(t) = self.tol_overrides.get(name) {
            return *t;
        }
        self.common.tol_rel.unwrap_or(default)
    }

    fn engines(&self) -> Vec<DerivEngine> {
        match self.common.engine {
            EngineArg::Ad => vec![DerivEngine::ad()],
            EngineArg::Fd => vec![DerivEngine::fd()],
            EngineArg::Both => vec![DerivEngine::ad(), DerivEngine::fd()],
        }
    }

    fn engine_name(&self) -> &'static str {
        match self.common.engine {
            EngineArg::Ad => "ad",
            EngineArg::Fd => "fd",
            EngineArg::Both => "both",
        }
    }

    fn config(&self, side: Option<&str>) -> ReportConfig {
        ReportConfig {
            inputs: self.common.inputs.clone(),
            points: self.common.points,
            seed: self.common.seed,
            engine: self.engine_name().into(),
            tol_overrides: self.tol_overrides.clone(),
            side: side.map(|s| s.to_string()),
        }
    }

    fn load_inputs(&self) -> Result<Vec<(String, Loaded)>, String> {
        if self.common.inputs.is_empty() {
            return Err("no inputs: pass at least one --input PATH or --input builtin:NAME".into());
        }
        let mut out = Vec::new();
        for input in &self.common.inputs {
            let doc = resolve_document(input).map_err(|e| format!("{input}: {e}"))?;
            let loaded = load_spec(&doc).map_err(|e| format!("{input}: {e}"))?;
            let label = if loaded.name.is_empty() {
                input.clone()
            } else {
                loaded.name.clone()
            };
            out.push((label, loaded));
        }
        Ok(out)
    }
}

fn resolve_document(input: &str) -> gcinf::Result<SpecDocument> {
    if let Some(name) = input.strip_prefix("builtin:") {
        return catalog::builtin(name)
            .ok_or_else(|| gcinf::Error::Schema(format!("unknown builtin `{name}`")));
    }
    SpecDocument::from_file(Path::new(input))
}

fn sample_points(loaded: &Loaded, ctx: &Ctx) -> Vec<Vec<f64>> {
    loaded.chart.sample_points(ctx.common.points, ctx.common.seed)
}

fn skippable(e: &gcinf::Error) -> bool {
    matches!(
        e,
        gcinf::Error::NotPositiveDefinite { .. }
            | gcinf::Error::Singular { .. }
            | gcinf::Error::DualDegenerate { .. }
    )
}

/// Per-point evaluation with the skip policy for degenerate points; skipped
/// points carry a diagnostic note for the report.
fn collect_noted<F>(
    points: &[Vec<f64>],
    mut f: F,
) -> gcinf::Result<(Vec<Option<f64>>, Vec<String>)>
where
    F: FnMut(&[f64]) -> gcinf::Result<f64>,
{
    let mut out = Vec::with_capacity(points.len());
    let mut notes = Vec::new();
    for p in points {
        match f(p) {
            Ok(v) => out.push(Some(v)),
            Err(e) if skippable(&e) => {
                notes.push(format!("{p:?}: {e}"));
                out.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    Ok((out, notes))
}

fn collect<F>(points: &[Vec<f64>], f: F) -> gcinf::Result<Vec<Option<f64>>>
where
    F: FnMut(&[f64]) -> gcinf::Result<f64>,
{
    collect_noted(points, f).map(|(out, _)| out)
}

fn cmd_curvature(ctx: &mut Ctx) -> Result<Report, String> {
    let inputs = ctx.load_inputs()?;
    let mut checks = Vec::new();
    for (label, loaded) in &inputs {
        let g = loaded.metric_field();
        let pts = sample_points(loaded, ctx);
        let n = loaded.dim;
        for engine in ctx.engines() {
            let ename = engine.name();
            let sym = collect(&pts, |p| {
                Ok(g.metric_jets(&engine, p, 2)?.riemann().symmetry_defect())
            })
            .map_err(|e| format!("{label}: {e}"))?;
            checks.push(ResidualReport::from_samples(
                &format!("rm-symmetry:{label}:{ename}"),
                ctx.tol("rm-symmetry", 1e-9),
                sym,
            ));
            // informational samples: scalar curvature and one sectional value
            let scalars = collect(&pts, |p| Ok(g.metric_jets(&engine, p, 2)?.scalar()))
                .map_err(|e| format!("{label}: {e}"))?;
            checks.push(ResidualReport::from_samples(
                &format!("scalar-curvature:{label}:{ename}"),
                f64::MAX,
                scalars,
            ));
            if n >= 2 {
                let secs = collect(&pts, |p| {
                    let mj = g.metric_jets(&engine, p, 2)?;
                    let gv = MetricValue::new(
                        gcinf::multilinear::Sym2Value::try_from_matrix(mj.g.clone()).unwrap(),
                    )?;
                    let x = vec![1.0; n];
                    let mut y = vec![0.0; n];
                    y[n - 1] = 1.0;
                    y[0] = -0.4;
                    gcinf::multilinear::sectional(&gv, &mj.riemann(), &x, &y)
                })
                .map_err(|e| format!("{label}: {e}"))?;
                checks.push(ResidualReport::from_samples(
                    &format!("sectional-sample:{label}:{ename}"),
                    f64::MAX,
                    secs,
                ));
            }
        }
        if ctx.common.engine == EngineArg::Both {
            let (ad, fd) = (DerivEngine::ad(), DerivEngine::fd());
            let cross = collect(&pts, |p| {
                let ra = ad.jets(g.map().as_ref(), p, 2)?;
                let rm_a = g.metric_jets(&ad, p, 2)?.riemann();
                let rm_f = g.metric_jets(&fd, p, 2)?.riemann();
                let _ = ra;
                Ok(rm_a.sub(&rm_f).max_abs() / (1.0 + rm_a.max_abs()))
            })
            .map_err(|e| format!("{label}: {e}"))?;
            checks.push(ResidualReport::from_samples(
                &format!("engine-cross:{label}"),
                ctx.tol("engine-cross", 1e-6),
                cross,
            ));
        }
    }
    Ok(Report::new("curvature", ctx.config(None), checks))
}

fn cmd_check(ctx: &mut Ctx, side: SideArg) -> Result<Report, String> {
    let inputs = ctx.load_inputs()?;
    let side_name = match side {
        SideArg::Finite => "finite",
        SideArg::Infinity => "infinity",
    };
    let mut checks = Vec::new();
    for (label, loaded) in &inputs {
        let base = pair_from(loaded).map_err(|e| format!("{label}: {e}"))?;
        let pair = DualityPair::new(
            base.g.clone(),
            base.b.clone(),
            match side {
                SideArg::Finite => Side::Finite,
                SideArg::Infinity => Side::Infinity,
            },
        )
        .map_err(|e| format!("{label}: {e}"))?;
        let pts = sample_points(loaded, ctx);
        for engine in ctx.engines() {
            let ename = engine.name();
            let mut gauss = Vec::new();
            let mut codazzi = Vec::new();
            let mut notes = Vec::new();
            for p in &pts {
                match pair.residuals(&engine, p) {
                    Ok((_, _, grel, crel)) => {
                        gauss.push(Some(grel));
                        codazzi.push(Some(crel));
                    }
                    Err(e) if skippable(&e) => {
                        notes.push(format!("{p:?}: {e}"));
                        gauss.push(None);
                        codazzi.push(None);
                    }
                    Err(e) => return Err(format!("{label}: {e}")),
                }
            }
            checks.push(
                ResidualReport::from_samples(
                    &format!("gauss:{label}:{ename}"),
                    ctx.tol("gauss", 1e-7),
                    gauss,
                )
                .with_skip_notes(notes.clone()),
            );
            checks.push(
                ResidualReport::from_samples(
                    &format!("codazzi:{label}:{ename}"),
                    ctx.tol("codazzi", 1e-7),
                    codazzi,
                )
                .with_skip_notes(notes),
            );
        }
        if ctx.common.engine == EngineArg::Both {
            let (ad, fd) = (DerivEngine::ad(), DerivEngine::fd());
            let cross = collect(&pts, |p| {
                let (ra, _, _, _) = pair.residuals(&ad, p)?;
                let (rf, _, _, _) = pair.residuals(&fd, p)?;
                Ok(ra.sub(&rf).max_abs() / (1.0 + ra.max_abs()))
            })
            .map_err(|e| format!("{label}: {e}"))?;
            checks.push(ResidualReport::from_samples(
                &format!("engine-cross:{label}"),
                ctx.tol("engine-cross", 1e-6),
                cross,
            ));
        }
    }
    Ok(Report::new("check", ctx.config(Some(side_name)), checks))
}

fn pair_from(loaded: &Loaded) -> gcinf::Result<DualityPair> {
    match &loaded.spec {
        LoadedSpec::Pair { pair } => Ok(pair.clone()),
        LoadedSpec::Immersion { imm } => {
            DualityPair::new(imm.induced_metric(), imm.induced_shape(), Side::Finite)
        }
        _ => Err(gcinf::Error::Schema(
            "check needs a pair or immersion document".into(),
        )),
    }
}

fn cmd_dualize(ctx: &mut Ctx, format: FormatArg) -> Result<Report, String> {
    let inputs = ctx.load_inputs()?;
    let mut checks = Vec::new();
    for (label, loaded) in &inputs {
        let pair = pair_from(loaded).map_err(|e| format!("{label}: {e}"))?;
        let pts = sample_points(loaded, ctx);

        // diagnostics: margin to the eigenvalue -1 locus, and the dual
        // composition identity wherever dualization succeeds
        let diag = pair
            .diagnostics(&pts)
            .map_err(|e| format!("{label}: {e}"))?;
        checks.push(ResidualReport::from_samples(
            &format!("dual-margin:{label}"),
            f64::MAX,
            vec![Some(diag.dual_margin)],
        ));
        let dual = pair.dualize().map_err(|e| format!("{label}: {e}"))?;
        let (comp, notes) = collect_noted(&pts, |p| composition_identity_defect(&pair, &dual, p))
            .map_err(|e| format!("{label}: {e}"))?;
        checks.push(
            ResidualReport::from_samples(
                &format!("dual-composition:{label}"),
                ctx.tol("dual-composition", 1e-10),
                comp,
            )
            .with_skip_notes(notes),
        );

        // emitted artifact
        let doc = resolve_document(
            ctx.common
                .inputs
                .iter()
                .find(|i| {
                    resolve_document(i)
                        .map(|d| d.meta.name == loaded.name)
                        .unwrap_or(false)
                })
                .ok_or_else(|| format!("{label}: input document lost"))?,
        )
        .map_err(|e| format!("{label}: {e}"))?;
        let symbolic_ok = loaded.dim <= 3 && matches!(loaded.spec, LoadedSpec::Pair { .. });
        let mut emitted_spec = false;
        if format == FormatArg::Spec && symbolic_ok {
            let emitted = emit::dual_document(&doc).map_err(|e| format!("{label}: {e}"))?;
            // cross-validate the emitted closed form against the dual
            // fields; a degenerate pair fails validation and falls back to
            // the sampled table, leaving the degeneracy visible in the
            // composition check's skip counts
            match load_spec(&emitted) {
                Ok(emitted_loaded) => {
                    let epair = pair_from(&emitted_loaded).map_err(|e| format!("{label}: {e}"))?;
                    let agree = collect(&pts, |p| {
                        gcinf::duality::pair_difference(&epair, &dual, p)
                    })
                    .map_err(|e| format!("{label}: {e}"))?;
                    checks.push(ResidualReport::from_samples(
                        &format!("dual-emitted-agrees:{label}"),
                        ctx.tol("dual-emitted-agrees", 1e-10),
                        agree,
                    ));
                    ctx.push_artifact(&format!("{label}.dual.json"), emitted.to_json());
                    emitted_spec = true;
                }
                Err(e)
                    if skippable(&e)
                        || matches!(
                            e,
                            gcinf::Error::Domain(_) | gcinf::Error::Constraint { .. }
                        ) => {}
                Err(e) => return Err(format!("{label}: emitted document invalid: {e}")),
            }
        }
        if !emitted_spec {
            // sampled-field table fallback
            let mut lines = vec![format!(
                "# dual fields of {label}: columns = x1..x{n} | ghat upper triangle | bhat row-major",
                n = loaded.dim
            )];
            for p in &pts {
                let mut cols: Vec<String> = p.iter().map(|v| format!("{v:+.12e}")).collect();
                match (dual.g.value(p), dual.b.value(p)) {
                    (Ok(gh), Ok(bh)) => {
                        for i in 0..loaded.dim {
                            for j in i..loaded.dim {
                                cols.push(format!("{:+.12e}", gh[(i, j)]));
                            }
                        }
                        for i in 0..loaded.dim {
                            for j in 0..loaded.dim {
                                cols.push(format!("{:+.12e}", bh[(i, j)]));
                            }
                        }
                    }
                    _ => cols.push("degenerate".into()),
                }
                lines.push(cols.join(" "));
            }
            ctx.push_artifact(&format!("{label}.dual.table.txt"), lines.join("\n") + "\n");
        }
    }
    Ok(Report::new("dualize", ctx.config(None), checks))
}

fn cmd_weyl_schouten(ctx: &mut Ctx) -> Result<Report, String> {
    let inputs = ctx.load_inputs()?;
    let engine = DerivEngine::ad();
    let mut checks = Vec::new();
    for (label, loaded) in &inputs {
        if loaded.dim < 3 {
            return Err(format!(
                "{label}: conformal-flatness indicators need dimension >= 3"
            ));
        }
        let g = loaded.metric_field();
        let pts = sample_points(loaded, ctx);
        let ind = collect(&pts, |p| {
            gcinf::lcf::weyl_schouten_indicator(&g, &engine, p)
        })
        .map_err(|e| format!("{label}: {e}"))?;
        checks.push(ResidualReport::from_samples(
            &format!("ws-indicator:{label}"),
            f64::MAX,
            ind,
        ));
        if let LoadedSpec::Conformal { presentation } = &loaded.spec {
            let solves = collect(&pts, |p| {
                gcinf::lcf::schouten_solves_defect(presentation, &engine, p)
            })
            .map_err(|e| format!("{label}: {e}"))?;
            checks.push(ResidualReport::from_samples(
                &format!("schouten-solves:{label}"),
                ctx.tol("schouten-solves", 1e-8),
                solves,
            ));
        }
        if loaded.dim >= 4 {
            let div = collect(&pts, |p| {
                gcinf::lcf::weyl_divergence_defect(&g, &engine, p)
            })
            .map_err(|e| format!("{label}: {e}"))?;
            checks.push(ResidualReport::from_samples(
                &format!("weyl-divergence:{label}"),
                ctx.tol("weyl-divergence", 1e-6),
                div,
            ));
        }
    }
    Ok(Report::new("weyl-schouten", ctx.config(None), checks))
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.trim().split(':').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("bad t grid `{spec}`: expected start:step:end"));
    }
    let start: f64 = parts[0].parse().map_err(|_| "bad grid start".to_string())?;
    let step: f64 = parts[1].parse().map_err(|_| "bad grid step".to_string())?;
    let end: f64 = parts[2].parse().map_err(|_| "bad grid end".to_string())?;
    if step <= 0.0 || end < start {
        return Err(format!("bad t grid `{spec}`"));
    }
    let mut t = start;
    let mut out = Vec::new();
    while t <= end + 1e-12 {
        out.push(t);
        t += step;
    }
    Ok(out)
}

fn cmd_flow(ctx: &mut Ctx, t_grid: &str) -> Result<Report, String> {
    let grid = parse_grid(t_grid)?;
    let inputs = ctx.load_inputs()?;
    let engine = DerivEngine::ad();
    let mut checks = Vec::new();
    for (label, loaded) in &inputs {
        let imm = match &loaded.spec {
            LoadedSpec::Immersion { imm } => imm.clone(),
            _ => return Err(format!("{label}: flow needs an immersion document")),
        };
        let pts: Vec<Vec<f64>> = loaded
            .chart
            .sample_points(ctx.common.points.min(8), ctx.common.seed);
        let n = loaded.dim;
        let mut lines = vec![format!(
            "# parallel flow of {label}: columns = t x1..x{n} f1..f{m} eigmin eigmax [degenerate]",
            m = n + 2
        )];
        let mut law = Vec::new();
        let (g0, b0) = {
            let mut g0 = Vec::new();
            let mut b0 = Vec::new();
            for p in &pts {
                let (g, b) = imm
                    .induced_data(&engine, p)
                    .map_err(|e| format!("{label}: {e}"))?;
                g0.push(g);
                b0.push(b);
            }
            (g0, b0)
        };
        for &t in &grid {
            let par = imm.parallel(t);
            for (pi, p) in pts.iter().enumerate() {
                let mut cols = vec![format!("{t:+.6e}")];
                cols.extend(p.iter().map(|v| format!("{v:+.12e}")));
                let fx = par.position(p).map_err(|e| format!("{label}: {e}"))?;
                cols.extend(fx.iter().map(|v| format!("{v:+.12e}")));
                match par.induced_data(&engine, p) {
                    Ok((gt, _)) if gt.min_eigenvalue() > 1e-12 => {
                        let eig = nalgebra_eigs(&gt);
                        cols.push(format!("{:+.12e}", eig.0));
                        cols.push(format!("{:+.12e}", eig.1));
                        // metric law: g_t = g(A_t ., A_t .)
                        let at = b0[pi].matrix() * t.sinh()
                            + nalgebra::DMatrix::identity(n, n) * t.cosh();
                        let expect = at.transpose() * g0[pi].sym().matrix() * &at;
                        let rel = (gt.sym().matrix() - &expect).abs().max()
                            / expect.abs().max().max(1.0);
                        law.push(Some(rel));
                    }
                    Ok(_) => {
                        cols.push("degenerate".into());
                        law.push(None);
                    }
                    Err(e) if skippable(&e) => {
                        cols.push("degenerate".into());
                        law.push(None);
                    }
                    Err(e) => return Err(format!("{label}: {e}")),
                }
                lines.push(cols.join(" "));
            }
        }
        checks.push(ResidualReport::from_samples(
            &format!("flow-metric-law:{label}"),
            ctx.tol("flow-metric-law", 1e-8),
            law,
        ));
        ctx.push_artifact(&format!("{label}.flow.table.txt"), lines.join("\n") + "\n");
    }
    Ok(Report::new("flow", ctx.config(None), checks))
}

fn nalgebra_eigs(g: &MetricValue) -> (f64, f64) {
    let eig = nalgebra::SymmetricEigen::new(g.sym().matrix().clone());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in eig.eigenvalues.iter() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    (lo, hi)
}

// re-export for the flow command
use gcinf::nalgebra;

impl Ctx {
    fn push_artifact(&mut self, name: &str, content: String) {
        if let Some(out) = &self.common.out {
            let path = out.with_file_name(format!(
                "{}.{name}",
                out.file_stem().and_then(|s| s.to_str()).unwrap_or("report")
            ));
            self.extra.push((path, content));
        } else {
            self.stdout_extra
                .push(format!("--- {name} ---\n{content}"));
        }
    }
}

fn cmd_suite(ctx: &mut Ctx) -> Result<Report, String> {
    let cfg = SuiteConfig {
        seed: ctx.common.seed,
        points: ctx.common.points,
        tol_overrides: ctx.tol_overrides.clone(),
    };
    run_suite(&cfg).map_err(|e| e.to_string())
}

/// Extracts `--tol-rel.NAME VALUE` (or `--tol-rel.NAME=VALUE`) pairs, which
/// clap cannot model as dynamic flags.
fn extract_tol_overrides(args: Vec<String>) -> Result<(Vec<String>, BTreeMap<String, f64>), String> {
    let mut rest = Vec::new();
    let mut overrides = BTreeMap::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if let Some(spec) = a.strip_prefix("--tol-rel.") {
            let (name, value) = if let Some((n, v)) = spec.split_once('=') {
                (n.to_string(), v.to_string())
            } else {
                let v = it
                    .next()
                    .ok_or_else(|| format!("--tol-rel.{spec} needs a value"))?;
                (spec.to_string(), v)
            };
            let parsed: f64 = value
                .parse()
                .map_err(|_| format!("invalid tolerance `{value}` for {name}"))?;
            if !(parsed > 0.0) {
                return Err(format!("tolerance for {name} must be positive"));
            }
            overrides.insert(name, parsed);
        } else {
            rest.push(a);
        }
    }
    Ok((rest, overrides))
}

fn main() -> ExitCode {
    let (args, tol_overrides) = match extract_tol_overrides(std::env::args().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    let (common, runner): (Common, Box<dyn FnOnce(&mut Ctx) -> Result<Report, String>>) =
        match cli.cmd {
            Cmd::Curvature(c) => (c, Box::new(cmd_curvature)),
            Cmd::Check { common, side } => {
                (common, Box::new(move |ctx: &mut Ctx| cmd_check(ctx, side)))
            }
            Cmd::Dualize { common, format } => {
                (common, Box::new(move |ctx: &mut Ctx| cmd_dualize(ctx, format)))
            }
            Cmd::WeylSchouten(c) => (c, Box::new(cmd_weyl_schouten)),
            Cmd::Flow { common, t_grid } => (
                common,
                Box::new(move |ctx: &mut Ctx| cmd_flow(ctx, &t_grid)),
            ),
            Cmd::Suite(c) => (c, Box::new(cmd_suite)),
        };

    if common.points == 0 {
        eprintln!("error: --points must be at least 1");
        return ExitCode::from(2);
    }
    let mut ctx = Ctx {
        common,
        tol_overrides,
        extra: Vec::new(),
        stdout_extra: Vec::new(),
    };
    let start = std::time::Instant::now();
    let mut report = match runner(&mut ctx) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if report.wall_ms == 0.0 {
        report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    }

    for check in &report.checks {
        eprintln!("{}", check.one_line());
    }
    let json = report.to_json();
    if let Some(out) = &ctx.common.out {
        if let Err(e) = std::fs::write(out, &json) {
            eprintln!("error: cannot write {}: {e}", out.display());
            return ExitCode::from(2);
        }
    } else {
        print!("{json}");
    }
    for (path, content) in &ctx.extra {
        if let Err(e) = std::fs::write(path, content) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    for chunk in &ctx.stdout_extra {
        print!("{chunk}");
    }

    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
