//! Points along a geodesic and the trees where it crosses orthant
//! boundaries.

use super::GeodesicPath;
use crate::error::{Error, Result};
use crate::splits::{splits_to_tree, Split, SplitSet};
use crate::tree::Tree;

/// Split set at parameter `lambda`, with `0 < lambda < 1`.
///
/// Pair `i` of a bin moves through the star face at
/// `t_i = ||A_i|| / (||A_i|| + ||B_i||)`. Before that the `A_i` edges shrink
/// linearly to zero, after it the `B_i` edges grow from zero. At exactly
/// `t_i` neither side is present.
pub(crate) fn splits_at(p: &GeodesicPath, lambda: f64) -> SplitSet {
    let mut out: Vec<Split> = Vec::new();
    for s in p.shared_deltas.iter().chain(p.compatible_unique.iter()) {
        let w = (1.0 - lambda) * s.weight_t + lambda * s.weight_t2;
        out.push(Split::new(s.split.mask().clone(), w));
    }
    for pair in p.pairs() {
        let (na, nb) = (pair.norm_a(), pair.norm_b());
        let total = na + nb;
        let t = na / total;
        if lambda < t {
            let f = (na - lambda * total) / na;
            out.extend(pair.a.iter().map(|s| Split::new(s.mask().clone(), s.weight * f)));
        } else if lambda > t {
            let f = (lambda * total - na) / nb;
            out.extend(pair.b.iter().map(|s| Split::new(s.mask().clone(), s.weight * f)));
        }
    }
    SplitSet::new(p.universe().clone(), out)
}

/// The tree a fraction `lambda` of the way from the start to the end.
pub fn point_on_path(p: &GeodesicPath, lambda: f64) -> Result<Tree> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "path parameter {lambda} outside [0, 1]"
        )));
    }
    if lambda == 0.0 {
        return splits_to_tree(p.start());
    }
    if lambda == 1.0 {
        return splits_to_tree(p.end());
    }
    splits_to_tree(&splits_at(p, lambda))
}

/// Distinct path parameters at which the path changes orthant, ascending.
pub fn transitions(p: &GeodesicPath) -> Vec<f64> {
    let mut ts: Vec<f64> = p.pairs().map(|pair| pair.transition_time()).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// One tree per orthant transition, in path order, paired with its path
/// parameter.
pub fn boundary_trees(p: &GeodesicPath) -> Result<Vec<(f64, Tree)>> {
    transitions(p)
        .into_iter()
        .map(|t| Ok((t, splits_to_tree(&splits_at(p, t))?)))
        .collect()
}
