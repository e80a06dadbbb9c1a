//! Input layer: the expression DSL, spec documents, and the built-in catalog.

pub mod catalog;
pub mod document;
pub mod expr;

pub use document::{load_spec, Loaded, LoadedSpec, Meta, SpecDocument, SpecKind};
pub use expr::{parse_expr, ExprAst};

use crate::jet::Jet;
use crate::jetcalc::{EndoField, RingEval, ScalarField, SmoothMap, Sym2Field};
use crate::{Error, Result};
use std::sync::Arc;

/// Jet of an expression at a point: value plus partials to `order`.
pub fn eval_jet(ast: &ExprAst, point: &[f64], order: usize) -> Result<Jet> {
    let n = point.len();
    let seeds: Vec<Jet> = (0..n)
        .map(|i| Jet::variable(point[i], i, n, order))
        .collect();
    ast.eval(&seeds)
}

/// A scalar field backed by one expression.
pub struct ExprScalarMap {
    ast: ExprAst,
    dim: usize,
}

impl ExprScalarMap {
    pub fn new(ast: ExprAst, dim: usize) -> Self {
        ExprScalarMap { ast, dim }
    }
    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        out[0] = self.ast.eval(x)?;
        Ok(())
    }
    fn dims(&self) -> (usize, usize) {
        (self.dim, 1)
    }
}
crate::jetcalc::smooth_impl!(ExprScalarMap);

/// A symmetric 2-tensor field backed by upper-triangle expressions.
pub struct ExprSym2Map {
    asts: Vec<ExprAst>,
    dim: usize,
}

impl ExprSym2Map {
    pub fn new(asts: Vec<ExprAst>, dim: usize) -> Self {
        debug_assert_eq!(asts.len(), crate::jetcalc::tri_len(dim));
        ExprSym2Map { asts, dim }
    }
    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        for (o, a) in out.iter_mut().zip(&self.asts) {
            *o = a.eval(x)?;
        }
        Ok(())
    }
    fn dims(&self) -> (usize, usize) {
        (self.dim, self.asts.len())
    }
}
crate::jetcalc::smooth_impl!(ExprSym2Map);

/// An endomorphism field backed by row-major expressions.
pub struct ExprEndoMap {
    asts: Vec<ExprAst>,
    dim: usize,
}

impl ExprEndoMap {
    pub fn new(asts: Vec<ExprAst>, dim: usize) -> Self {
        debug_assert_eq!(asts.len(), dim * dim);
        ExprEndoMap { asts, dim }
    }
    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        for (o, a) in out.iter_mut().zip(&self.asts) {
            *o = a.eval(x)?;
        }
        Ok(())
    }
    fn dims(&self) -> (usize, usize) {
        (self.dim, self.asts.len())
    }
}
crate::jetcalc::smooth_impl!(ExprEndoMap);

/// A map chart -> R^m backed by expressions (immersion components, chart
/// changes).
pub struct ExprVecMap {
    asts: Vec<ExprAst>,
    dim_in: usize,
}

impl ExprVecMap {
    pub fn new(asts: Vec<ExprAst>, dim_in: usize) -> Self {
        ExprVecMap { asts, dim_in }
    }
    fn eval_ring<S: RingEval>(&self, x: &[S], out: &mut [S]) -> Result<()> {
        for (o, a) in out.iter_mut().zip(&self.asts) {
            *o = a.eval(x)?;
        }
        Ok(())
    }
    fn dims(&self) -> (usize, usize) {
        (self.dim_in, self.asts.len())
    }
}
crate::jetcalc::smooth_impl!(ExprVecMap);

/// Parses `srcs` (upper triangle, row-major) into a symmetric field.
pub fn sym2_field_from_exprs(n: usize, srcs: &[&str]) -> Result<Sym2Field> {
    if srcs.len() != crate::jetcalc::tri_len(n) {
        return Err(Error::Schema(format!(
            "expected {} upper-triangle entries, got {}",
            crate::jetcalc::tri_len(n),
            srcs.len()
        )));
    }
    let asts = srcs
        .iter()
        .map(|s| parse_expr(s, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(Sym2Field::new(n, Arc::new(ExprSym2Map::new(asts, n))))
}

pub fn scalar_field_from_expr(n: usize, src: &str) -> Result<ScalarField> {
    Ok(ScalarField::new(Arc::new(ExprScalarMap::new(
        parse_expr(src, n)?,
        n,
    ))))
}

pub fn endo_field_from_exprs(n: usize, srcs: &[&str]) -> Result<EndoField> {
    if srcs.len() != n * n {
        return Err(Error::Schema(format!(
            "expected {} entries, got {}",
            n * n,
            srcs.len()
        )));
    }
    let asts = srcs
        .iter()
        .map(|s| parse_expr(s, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(EndoField::new(n, Arc::new(ExprEndoMap::new(asts, n))))
}

pub fn vec_map_from_exprs(dim_in: usize, srcs: &[&str]) -> Result<Arc<dyn SmoothMap>> {
    let asts = srcs
        .iter()
        .map(|s| parse_expr(s, dim_in))
        .collect::<Result<Vec<_>>>()?;
    Ok(Arc::new(ExprVecMap::new(asts, dim_in)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetcalc::DerivEngine;
    use approx::assert_relative_eq;

    #[test]
    fn expr_jets_match_central_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let mut exprs: Vec<String> = vec![
            "exp(x1)*sin(x2)".into(),
            "sinh(x1)^2 - cosh(x2)".into(),
            "1/(1 + x1^2 + x2^2)".into(),
            "log(2 + x1)*tanh(x2)".into(),
            "x1^3*x2 - 0.5*x2^2".into(),
            "sqrt(1 + x1^2)".into(),
        ];
        for _ in 0..44 {
            exprs.push(crate::speccat::catalog::random_factor_expr(2, &mut rng));
        }
        let fd = DerivEngine::fd();
        for src in &exprs {
            let ast = parse_expr(src, 2).unwrap();
            {
                let p = [rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)];
                let exact = eval_jet(&ast, &p, 3).unwrap();
                let map = ExprScalarMap::new(ast.clone(), 2);
                let approx_jet = &fd.jets(&map, &p, 3).unwrap()[0];
                for i in 0..2 {
                    assert_relative_eq!(
                        exact.grad(i),
                        approx_jet.grad(i),
                        max_relative = 1e-6,
                        epsilon = 1e-8
                    );
                    for j in 0..2 {
                        assert_relative_eq!(
                            exact.hess(i, j),
                            approx_jet.hess(i, j),
                            max_relative = 1e-6,
                            epsilon = 1e-7
                        );
                        for k in 0..2 {
                            assert_relative_eq!(
                                exact.third(i, j, k),
                                approx_jet.third(i, j, k),
                                max_relative = 1e-6,
                                epsilon = 1e-5
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn eval_jet_examples() {
        // constants have zero partials
        let ast = parse_expr("3.5", 2).unwrap();
        let j = eval_jet(&ast, &[0.1, 0.2], 2).unwrap();
        assert_eq!(j.grad(0), 0.0);
        assert_eq!(j.hess(1, 1), 0.0);
        // x1*x2 mixed second partial is 1
        let ast = parse_expr("x1*x2", 2).unwrap();
        let j = eval_jet(&ast, &[0.3, -0.8], 2).unwrap();
        assert_relative_eq!(j.hess(0, 1), 1.0);
    }
}
