use std::sync::Arc;

use nalgebra::DVector;

use super::{resolvent, resolvent_split, MonotoneRelation};
use crate::error::{ensure, Result};
use crate::weighted_space::{TimeGrid, WeightedSignal};

/// Node-wise extension of a relation to signals on a time grid.
#[derive(Debug, Clone)]
pub struct LiftedRelation {
    base: Arc<dyn MonotoneRelation>,
    grid: TimeGrid,
    rho: f64,
}

pub fn lift(base: Arc<dyn MonotoneRelation>, grid: TimeGrid, rho: f64) -> LiftedRelation {
    LiftedRelation { base, grid, rho }
}

impl LiftedRelation {
    pub fn base(&self) -> &Arc<dyn MonotoneRelation> {
        &self.base
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    fn check(&self, y: &WeightedSignal) -> Result<()> {
        ensure!(*y.grid() == self.grid, "signal grid differs from the lifted relation's grid");
        ensure!(y.rho() == self.rho, "signal weight {} differs from {}", y.rho(), self.rho);
        ensure!(y.dim() == self.base.dim(), "signal dimension {} vs relation {}", y.dim(), self.base.dim());
        Ok(())
    }

    /// Resolvent applied independently at every node.
    pub fn resolve(&self, lambda: f64, y: &WeightedSignal) -> Result<WeightedSignal> {
        self.check(y)?;
        let mut out = y.clone();
        for k in 0..y.len() {
            let x = resolvent(self.base.as_ref(), lambda, &y.node(k).into_owned())?;
            out.set_node(k, &x);
        }
        Ok(out)
    }

    /// Yosida approximation applied independently at every node.
    pub fn yosida(&self, lambda: f64, y: &WeightedSignal) -> Result<WeightedSignal> {
        self.check(y)?;
        let mut out = y.clone();
        for k in 0..y.len() {
            let (_, v) = resolvent_split(self.base.as_ref(), lambda, &y.node(k).into_owned())?;
            out.set_node(k, &v);
        }
        Ok(out)
    }

    /// Node-wise inclusion residual of the signal pair `(x, v)`; `None` if the base cannot evaluate.
    pub fn inclusion_residual(&self, x: &WeightedSignal, v: &WeightedSignal) -> Option<f64> {
        let mut worst: f64 = 0.0;
        for k in 0..x.len() {
            let r = self
                .base
                .inclusion_residual(&DVector::from(x.node(k)), &DVector::from(v.node(k)))?;
            worst = worst.max(r);
        }
        Some(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monotone_relations::{SoftThreshold, ZeroRelation};
    use crate::time_calculus::translate;
    use rand::{Rng, SeedableRng};

    fn random(seed: u64, grid: TimeGrid, dim: usize) -> WeightedSignal {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        WeightedSignal::from_fn(grid, dim, 1.0, |_| DVector::from_fn(dim, |_, _| rng.gen_range(-3.0..3.0))).unwrap()
    }

    #[test]
    fn lift_of_zero_is_identity() {
        let grid = TimeGrid::new(0.0, 0.1, 20).unwrap();
        let u = random(1, grid, 2);
        let l = lift(Arc::new(ZeroRelation::new(2)), grid, 1.0);
        assert_eq!(l.resolve(0.4, &u).unwrap(), u);
    }

    #[test]
    fn lift_commutes_with_translation() {
        let grid = TimeGrid::new(0.0, 0.1, 30).unwrap();
        let u = random(2, grid, 2);
        let l = lift(Arc::new(SoftThreshold::new(2, 1.0).unwrap()), grid, 1.0);
        for h in [-3isize, -1, 1, 4] {
            let a = l.resolve(0.7, &translate(&u, h)).unwrap();
            let b = translate(&l.resolve(0.7, &u).unwrap(), h);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn lift_thresholds_each_node() {
        let grid = TimeGrid::new(0.0, 0.1, 25).unwrap();
        let u = random(3, grid, 1);
        let l = lift(Arc::new(SoftThreshold::new(1, 1.0).unwrap()), grid, 1.0);
        let x = l.resolve(0.5, &u).unwrap();
        for k in 0..25 {
            let y = u.values()[(0, k)];
            let expect = if y > 0.5 { y - 0.5 } else if y < -0.5 { y + 0.5 } else { 0.0 };
            assert!((x.values()[(0, k)] - expect).abs() <= 1e-15 * y.abs());
        }
    }

    #[test]
    fn lifted_yosida_equals_yosida_of_base() {
        let grid = TimeGrid::new(0.0, 0.1, 25).unwrap();
        let u = random(4, grid, 3);
        let base: Arc<dyn MonotoneRelation> = Arc::new(SoftThreshold::new(3, 0.8).unwrap());
        let l = lift(base.clone(), grid, 1.0);
        let y = l.yosida(0.3, &u).unwrap();
        for k in 0..25 {
            let direct = crate::monotone_relations::yosida(base.as_ref(), 0.3, &u.node(k).into_owned()).unwrap();
            assert_eq!(y.node(k).into_owned(), direct);
        }
    }

    #[test]
    fn rejects_mismatched_signal() {
        let grid = TimeGrid::new(0.0, 0.1, 25).unwrap();
        let l = lift(Arc::new(ZeroRelation::new(2)), grid, 1.0);
        assert!(l.resolve(1.0, &random(1, grid, 3)).is_err());
    }
}
