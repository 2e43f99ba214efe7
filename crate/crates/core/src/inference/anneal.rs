//! Simulated annealing over column weights toward a target tree.
//!
//! A proposal moves one unit of weight from a column with weight at least
//! one to another column, re-estimates the tree and compares its geodesic
//! distance to the target. Uphill moves are accepted with the Metropolis
//! probability `exp(-(d_new - d_old) / (T_k * d_scale))`, where `d_scale`
//! is the starting distance and `T_k = T0 * c^k`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alignment::Alignment;
use crate::error::{Error, Result};
use crate::geodesic::distance_splits;
use crate::splits::{tree_to_splits_in, universe_of, SplitSet};
use crate::tree::Tree;
use crate::treebuild::EstimatorConfig;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub t0: f64,
    pub cooling: f64,
    pub iterations: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            t0: 1.0,
            cooling: 0.95,
            iterations: 1000,
        }
    }
}

impl Schedule {
    fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::InvalidArgument(format!("T0 must be positive, got {}", self.t0)));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cooling factor must lie in (0, 1), got {}",
                self.cooling
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub temperature: f64,
    /// Distance of the current state after this step.
    pub distance: f64,
    pub accepted: bool,
    pub best: f64,
}

#[derive(Clone, Debug)]
pub struct AnnealResult {
    pub weights: Vec<u32>,
    pub tree: Tree,
    pub distance: f64,
    pub initial_distance: f64,
    pub trace: Vec<TraceRow>,
}

struct Scorer<'a> {
    a: &'a Alignment,
    cfg: &'a EstimatorConfig,
    target: SplitSet,
}

impl Scorer<'_> {
    fn score(&self, weights: &[u32]) -> Result<(Tree, f64)> {
        let t = self.cfg.estimate(&self.a.with_weights(weights.to_vec())?)?;
        let s = tree_to_splits_in(&t, self.target.universe())?;
        let d = distance_splits(&s, &self.target)?;
        Ok((t, d))
    }
}

pub fn anneal_to_boundary(
    a: &Alignment,
    target: &Tree,
    cfg: &EstimatorConfig,
    schedule: Schedule,
    seed: u64,
) -> Result<AnnealResult> {
    schedule.validate()?;
    let mut taxa = a.taxa().to_vec();
    taxa.sort();
    if taxa != target.sorted_labels() {
        return Err(Error::LeafSetMismatch(
            "target tree and alignment have different taxa".into(),
        ));
    }
    let p = a.n_sites();
    let scorer = Scorer {
        a,
        cfg,
        target: tree_to_splits_in(target, &universe_of(target))?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = a.weights().to_vec();
    let (tree, d0) = scorer.score(&weights)?;
    let mut cur = d0;
    let mut best = (weights.clone(), tree, d0);
    let mut trace = vec![TraceRow {
        iteration: 0,
        temperature: schedule.t0,
        distance: d0,
        accepted: true,
        best: d0,
    }];
    if weights.iter().all(|&w| w == 0) {
        return Err(Error::InvalidArgument("no column has weight to donate".into()));
    }
    let d_scale = d0;
    let mut temp = schedule.t0;
    for k in 0..schedule.iterations {
        if best.2 == 0.0 || p < 2 {
            break;
        }
        let donor = loop {
            let c = rng.random_range(0..p);
            if weights[c] >= 1 {
                break c;
            }
        };
        let mut recipient = rng.random_range(0..p - 1);
        if recipient >= donor {
            recipient += 1;
        }
        let u: f64 = rng.random();
        weights[donor] -= 1;
        weights[recipient] += 1;
        let (t_new, d_new) = scorer.score(&weights)?;
        let accept = d_new < cur || u < (-(d_new - cur) / (temp * d_scale)).exp();
        if accept {
            cur = d_new;
            if cur < best.2 {
                best = (weights.clone(), t_new, cur);
            }
        } else {
            weights[donor] += 1;
            weights[recipient] -= 1;
        }
        trace.push(TraceRow {
            iteration: k + 1,
            temperature: temp,
            distance: cur,
            accepted: accept,
            best: best.2,
        });
        temp *= schedule.cooling;
    }
    Ok(AnnealResult {
        weights: best.0,
        tree: best.1,
        distance: best.2,
        initial_distance: d0,
        trace,
    })
}

/// CSV rows `iteration,temperature,distance,accepted,best`.
pub fn write_trace<W: std::io::Write>(trace: &[TraceRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["iteration", "temperature", "distance", "accepted", "best"])?;
    for r in trace {
        out.write_record([
            r.iteration.to_string(),
            r.temperature.to_string(),
            r.distance.to_string(),
            r.accepted.to_string(),
            r.best.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newick::parse_newick;
    use crate::simulate::{evolve, EvolutionModel, ModelKind};

    fn setup() -> (Alignment, Tree) {
        let t1 = parse_newick("(((A:0.1,B:0.1):0.3,C:0.1):0.1,(D:0.1,E:0.1):0.1);").unwrap();
        let t2 = parse_newick("(((A:0.1,C:0.1):0.3,B:0.1):0.1,(D:0.1,E:0.1):0.1);").unwrap();
        let m = EvolutionModel::new(ModelKind::Cfn, 1.0).unwrap();
        let a = evolve(&t1, &m, 150, 1).unwrap();
        let b = evolve(&t2, &m, 90, 2).unwrap();
        (a.concat(&b).unwrap(), t2.root_at_outgroup("E").unwrap())
    }

    fn cfg() -> EstimatorConfig {
        EstimatorConfig {
            rooting: crate::treebuild::Rooting::Outgroup("E".into()),
            ..EstimatorConfig::default()
        }
    }

    #[test]
    fn target_equal_to_estimate_stops() {
        let (a, _) = setup();
        let est = cfg().estimate(&a).unwrap();
        let r = anneal_to_boundary(&a, &est, &cfg(), Schedule::default(), 4).unwrap();
        assert_eq!(r.distance, 0.0);
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn moves_toward_target() {
        let (a, target) = setup();
        let sched = Schedule {
            iterations: 300,
            ..Schedule::default()
        };
        let r = anneal_to_boundary(&a, &target, &cfg(), sched, 9).unwrap();
        assert!(r.distance < r.initial_distance);
        assert_eq!(r.weights.iter().map(|&w| w as u64).sum::<u64>(), a.total_weight());
        assert!(r.trace.windows(2).all(|w| w[1].best <= w[0].best));
        let again = anneal_to_boundary(&a, &target, &cfg(), sched, 9).unwrap();
        assert_eq!(r.trace, again.trace);
    }

    #[test]
    fn rejects_bad_schedule_and_taxa() {
        let (a, target) = setup();
        let bad = Schedule {
            cooling: 1.0,
            ..Schedule::default()
        };
        assert!(anneal_to_boundary(&a, &target, &cfg(), bad, 0).is_err());
        let other = parse_newick("((A,B),(C,F));").unwrap();
        assert!(anneal_to_boundary(&a, &other, &cfg(), Schedule::default(), 0).is_err());
    }
}
