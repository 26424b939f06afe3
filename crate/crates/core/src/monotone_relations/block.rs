use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::forward_backward::{solve_split, FbOptions};
use super::{MonotoneRelation, Structure};
use crate::error::{ensure, Result};
use crate::linalg::{min_sym_eig, spectral_norm};

/// Relations acting on disjoint coordinate blocks; uncovered coordinates carry the zero relation.
#[derive(Debug, Clone)]
pub struct BlockDiagonal {
    dim: usize,
    blocks: Vec<(Vec<usize>, Arc<dyn MonotoneRelation>)>,
    zero: DMatrix<f64>,
}

impl BlockDiagonal {
    pub fn new(dim: usize, blocks: Vec<(Vec<usize>, Arc<dyn MonotoneRelation>)>) -> Result<Self> {
        let mut seen = vec![false; dim];
        for (coords, rel) in &blocks {
            ensure!(
                coords.len() == rel.dim(),
                "block of {} coordinates carries a relation of dimension {}",
                coords.len(),
                rel.dim()
            );
            for &c in coords {
                ensure!(c < dim, "coordinate {c} out of range {dim}");
                ensure!(!seen[c], "coordinate {c} covered twice");
                seen[c] = true;
            }
        }
        Ok(Self { dim, blocks, zero: DMatrix::zeros(dim, dim) })
    }

    pub fn blocks(&self) -> &[(Vec<usize>, Arc<dyn MonotoneRelation>)] {
        &self.blocks
    }

    /// Sorted union of the covered coordinates.
    pub fn active_coords(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.blocks.iter().flat_map(|(c, _)| c.iter().copied()).collect();
        v.sort_unstable();
        v
    }

    /// Same blocks re-indexed into the positions of `coords` (which must cover them all).
    pub(crate) fn localized(&self, coords: &[usize]) -> BlockDiagonal {
        let mut pos = vec![usize::MAX; self.dim];
        for (i, &c) in coords.iter().enumerate() {
            pos[c] = i;
        }
        let blocks = self
            .blocks
            .iter()
            .map(|(c, r)| (c.iter().map(|x| pos[*x]).collect(), r.clone()))
            .collect();
        BlockDiagonal { dim: coords.len(), blocks, zero: DMatrix::zeros(0, 0) }
    }

    /// Applies `f` to every block of `y` independently.
    pub(crate) fn map_blocks<F>(&self, y: &DVector<f64>, mut f: F) -> Result<DVector<f64>>
    where
        F: FnMut(&dyn MonotoneRelation, &DVector<f64>) -> Result<DVector<f64>>,
    {
        let mut out = y.clone();
        for (coords, rel) in &self.blocks {
            let sub = DVector::from_fn(coords.len(), |i, _| y[coords[i]]);
            let r = f(rel.as_ref(), &sub)?;
            for (i, &c) in coords.iter().enumerate() {
                out[c] = r[i];
            }
        }
        Ok(out)
    }
}

impl MonotoneRelation for BlockDiagonal {
    fn dim(&self) -> usize {
        self.dim
    }
    fn resolve(&self, lambda: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.map_blocks(y, |r, sub| r.resolve(lambda, sub))
    }
    fn contains_origin(&self) -> bool {
        self.blocks.iter().all(|(_, r)| r.contains_origin())
    }
    fn is_bounded(&self) -> bool {
        self.blocks.iter().all(|(_, r)| r.is_bounded())
    }
    fn name(&self) -> String {
        let names: Vec<String> = self.blocks.iter().map(|(_, r)| r.name()).collect();
        format!("blocks[{}]", names.join(", "))
    }
    fn inclusion_residual(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<f64> {
        let mut covered = vec![false; self.dim];
        let mut sq = 0.0;
        for (coords, rel) in &self.blocks {
            let xs = DVector::from_fn(coords.len(), |i, _| x[coords[i]]);
            let vs = DVector::from_fn(coords.len(), |i, _| v[coords[i]]);
            sq += rel.inclusion_residual(&xs, &vs)?.powi(2);
            for &c in coords {
                covered[c] = true;
            }
        }
        sq += (0..self.dim).filter(|i| !covered[*i]).map(|i| v[i] * v[i]).sum::<f64>();
        Some(sq.sqrt())
    }
    fn structure(&self) -> Structure<'_> {
        Structure::Split { linear: &self.zero, nonlinear: self }
    }
}

/// `A = K + N`: a monotone matrix `K` (typically skew) plus block-diagonal `N`.
#[derive(Debug, Clone)]
pub struct SplitRelation {
    linear: DMatrix<f64>,
    nonlinear: BlockDiagonal,
    opts: FbOptions,
}

impl SplitRelation {
    pub fn new(linear: DMatrix<f64>, nonlinear: BlockDiagonal) -> Result<Self> {
        ensure!(
            linear.is_square() && linear.nrows() == nonlinear.dim(),
            "linear part must be {0}×{0}",
            nonlinear.dim()
        );
        let m = min_sym_eig(&linear);
        ensure!(
            m >= -1e-12 * spectral_norm(&linear).max(1.0),
            "linear part is not monotone (min eigenvalue of symmetric part {m})"
        );
        Ok(Self { linear, nonlinear, opts: FbOptions { tol: 1e-13, max_iter: 100_000 } })
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.linear
    }

    pub fn nonlinear(&self) -> &BlockDiagonal {
        &self.nonlinear
    }
}

impl MonotoneRelation for SplitRelation {
    fn dim(&self) -> usize {
        self.linear.nrows()
    }
    fn resolve(&self, lambda: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        // x + λ(Kx + N(x)) ∋ y  ⇔  (I/λ + K)x + N(x) ∋ y/λ
        let n = self.dim();
        let s = DMatrix::<f64>::identity(n, n) / lambda + &self.linear;
        Ok(solve_split(&s, &self.nonlinear, &(y / lambda), None, self.opts)?.x)
    }
    fn contains_origin(&self) -> bool {
        self.nonlinear.contains_origin()
    }
    fn is_bounded(&self) -> bool {
        self.linear.iter().all(|x| *x == 0.0) && self.nonlinear.is_bounded()
    }
    fn name(&self) -> String {
        format!("linear + {}", self.nonlinear.name())
    }
    fn inclusion_residual(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<f64> {
        self.nonlinear.inclusion_residual(x, &(v - &self.linear * x))
    }
    fn structure(&self) -> Structure<'_> {
        Structure::Split { linear: &self.linear, nonlinear: &self.nonlinear }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monotone_relations::{resolvent_split, DeviatoricSaturation, SoftThreshold};

    #[test]
    fn rejects_overlapping_blocks() {
        let a: Arc<dyn MonotoneRelation> = Arc::new(SoftThreshold::new(2, 1.0).unwrap());
        assert!(BlockDiagonal::new(3, vec![(vec![0, 1], a.clone()), (vec![1, 2], a.clone())]).is_err());
        assert!(BlockDiagonal::new(3, vec![(vec![0, 5], a)]).is_err());
    }

    #[test]
    fn split_resolvent_satisfies_inclusion() {
        let dev: Arc<dyn MonotoneRelation> = Arc::new(DeviatoricSaturation::new(0.5).unwrap());
        let n = 8;
        let blocks = BlockDiagonal::new(n, vec![((1..7).collect(), dev)]).unwrap();
        let mut k = DMatrix::zeros(n, n);
        k[(0, 1)] = 2.0;
        k[(1, 0)] = -2.0;
        k[(7, 3)] = 1.5;
        k[(3, 7)] = -1.5;
        let rel = SplitRelation::new(k, blocks).unwrap();
        let y = DVector::from_fn(n, |i, _| (i as f64 - 3.5) * 0.9);
        let (x, v) = resolvent_split(&rel, 0.7, &y).unwrap();
        assert!(rel.inclusion_residual(&x, &v).unwrap() < 1e-9);
    }
}
