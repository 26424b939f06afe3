use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{resolvent, resolvent_split, BlockDiagonal, MonotoneRelation, Structure};
use crate::error::{ensure, Result};

/// The Yosida approximation `A_λ` as a relation in its own right.
///
/// Its resolvent comes from that of `A`:
/// `(1 + μA_λ)⁻¹ = λ/(λ+μ)·I + μ/(λ+μ)·(1 + (λ+μ)A)⁻¹`.
#[derive(Debug, Clone)]
pub struct YosidaRelation {
    base: Arc<dyn MonotoneRelation>,
    lambda: f64,
    matrix: Option<DMatrix<f64>>,
    blocks: Option<BlockDiagonal>,
    zero: DMatrix<f64>,
}

impl YosidaRelation {
    pub fn new(base: Arc<dyn MonotoneRelation>, lambda: f64) -> Result<Self> {
        ensure!(lambda.is_finite() && lambda > 0.0, "Yosida parameter must be positive, got {lambda}");
        let n = base.dim();
        let mut matrix = None;
        let mut blocks = None;
        match base.structure() {
            Structure::Linear(p) => {
                let shifted = DMatrix::identity(n, n) + p * lambda;
                let inv = shifted.try_inverse().ok_or_else(|| {
                    crate::error::Error::Contract("I + λP is singular".into())
                })?;
                matrix = Some((DMatrix::identity(n, n) - inv) / lambda);
            }
            Structure::Split { linear, nonlinear } if linear.iter().all(|x| *x == 0.0) => {
                let mapped = nonlinear
                    .blocks()
                    .iter()
                    .map(|(c, r)| Ok((c.clone(), Arc::new(YosidaRelation::new(r.clone(), lambda)?) as Arc<dyn MonotoneRelation>)))
                    .collect::<Result<Vec<_>>>()?;
                blocks = Some(BlockDiagonal::new(n, mapped)?);
            }
            _ => {}
        }
        Ok(Self { base, lambda, matrix, blocks, zero: DMatrix::zeros(n, n) })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn base(&self) -> &Arc<dyn MonotoneRelation> {
        &self.base
    }

    /// `A_λ(x)`.
    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.matrix {
            Some(m) => Ok(m * x),
            None => Ok(resolvent_split(self.base.as_ref(), self.lambda, x)?.1),
        }
    }
}

impl MonotoneRelation for YosidaRelation {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn resolve(&self, mu: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        let l = self.lambda;
        let j = resolvent(self.base.as_ref(), l + mu, y)?;
        Ok(y * (l / (l + mu)) + j * (mu / (l + mu)))
    }

    fn contains_origin(&self) -> bool {
        self.base.contains_origin()
    }

    fn is_bounded(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        format!("yosida({}, {})", self.base.name(), self.lambda)
    }

    fn inclusion_residual(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<f64> {
        self.apply(x).ok().map(|ax| (v - ax).norm())
    }

    fn structure(&self) -> Structure<'_> {
        if let Some(m) = &self.matrix {
            Structure::Linear(m)
        } else if let Some(b) = &self.blocks {
            Structure::Split { linear: &self.zero, nonlinear: b }
        } else {
            Structure::Opaque
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monotone_relations::{DeviatoricSaturation, LinearRelation, SoftThreshold};
    use rand::{Rng, SeedableRng};

    #[test]
    fn resolvent_satisfies_inclusion() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let bases: Vec<Arc<dyn MonotoneRelation>> = vec![
            Arc::new(SoftThreshold::new(2, 1.0).unwrap()),
            Arc::new(DeviatoricSaturation::new(0.5).unwrap()),
            Arc::new(LinearRelation::new(DMatrix::from_row_slice(2, 2, &[1.0, 3.0, -3.0, 0.0])).unwrap()),
        ];
        for base in bases {
            let y_rel = YosidaRelation::new(base.clone(), 0.3).unwrap();
            for _ in 0..200 {
                let mu = rng.gen_range(0.01..4.0);
                let y = DVector::from_fn(base.dim(), |_, _| rng.gen_range(-4.0..4.0));
                let (x, v) = resolvent_split(&y_rel, mu, &y).unwrap();
                assert!(y_rel.inclusion_residual(&x, &v).unwrap() < 1e-10, "{}", y_rel.name());
            }
        }
    }

    #[test]
    fn structure_is_preserved() {
        let lin = YosidaRelation::new(Arc::new(LinearRelation::identity(2)), 1.0).unwrap();
        match lin.structure() {
            Structure::Linear(m) => assert!((m - DMatrix::identity(2, 2) * 0.5).norm() < 1e-15),
            _ => panic!("expected linear"),
        }
        let a: Arc<dyn MonotoneRelation> = Arc::new(SoftThreshold::new(1, 1.0).unwrap());
        let blocks = BlockDiagonal::new(3, vec![(vec![1], a)]).unwrap();
        let y = YosidaRelation::new(Arc::new(blocks), 0.5).unwrap();
        assert!(matches!(y.structure(), Structure::Split { .. }));
        let x = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let via_blocks = match y.structure() {
            Structure::Split { nonlinear, .. } => resolvent(nonlinear, 0.2, &x).unwrap(),
            _ => unreachable!(),
        };
        assert!((via_blocks - resolvent(&y, 0.2, &x).unwrap()).norm() < 1e-15);
    }
}
