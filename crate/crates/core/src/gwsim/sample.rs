use rand::Rng;

use super::{
    extinction_probability, Builder, Depth, ExtinctionInfo, GwTree, DEFAULT_EXTINCTION_TOL,
};
use crate::error::{invalid, Result};
use crate::rng::Pois;
use crate::treebp::ClauseType;

/// Default node limit for extinction-conditioned samples. Such trees are
/// finite, but near `d = 1` their size has a heavy tail.
pub const DEFAULT_NODE_BUDGET: usize = 1 << 16;

pub(crate) fn uniform_type(rng: &mut impl Rng) -> ClauseType {
    ClauseType::ALL[rng.random_range(0..4)]
}

/// Offspring laws of the tree at a fixed density `d`.
///
/// Conditioned laws use Poisson thinning: the children of a node split
/// into independent Poisson(d·zeta) surviving and Poisson(d·eta) dying
/// ones, with clause types uniform and independent of survival. A dying
/// node has Poisson(d·eta/4) children of each type, all dying.
///
/// Every sampler visits nodes in pre-order and draws all randomness of a
/// node (its child counts and types) when it is visited.
#[derive(Clone, Debug)]
pub struct GwSampler {
    info: ExtinctionInfo,
    per_type: Pois,
    dying_per_type: Pois,
    surviving: Pois,
    dying: Pois,
}

#[derive(Clone, Copy)]
enum Law {
    Plain,
    Dying,
    Surviving,
}

impl GwSampler {
    pub fn new(d: f64) -> Result<Self> {
        let info = extinction_probability(d, DEFAULT_EXTINCTION_TOL)?;
        Ok(GwSampler {
            info,
            per_type: Pois::new(d / 4.0),
            dying_per_type: Pois::new(d * info.eta / 4.0),
            surviving: Pois::new(d * info.zeta),
            dying: Pois::new(d * info.eta),
        })
    }

    pub fn d(&self) -> f64 {
        self.info.d
    }

    pub fn extinction(&self) -> ExtinctionInfo {
        self.info
    }

    /// Child types of a dying node, in type order.
    pub(crate) fn dying_children(&self, rng: &mut impl Rng, out: &mut Vec<ClauseType>) {
        for ct in ClauseType::ALL {
            let k = self.dying_per_type.sample(rng);
            out.extend(std::iter::repeat_n(ct, k));
        }
    }

    /// Child types of a surviving node: surviving children first, then
    /// dying ones. Returns the number of surviving children.
    pub(crate) fn surviving_children(
        &self,
        rng: &mut impl Rng,
        out: &mut Vec<ClauseType>,
    ) -> usize {
        let ks = self.surviving.sample_positive(rng);
        let kd = self.dying.sample(rng);
        for _ in 0..ks + kd {
            out.push(uniform_type(rng));
        }
        ks
    }

    fn plain_children(&self, rng: &mut impl Rng, out: &mut Vec<ClauseType>) {
        for ct in ClauseType::ALL {
            let k = self.per_type.sample(rng);
            out.extend(std::iter::repeat_n(ct, k));
        }
    }

    fn sample(
        &self,
        root: Law,
        levels: Option<usize>,
        budget: usize,
        rng: &mut impl Rng,
    ) -> Option<GwTree> {
        let mut b = Builder::new();
        let mut stack = vec![(None, 0usize, root)];
        let mut types = Vec::new();
        while let Some((slot, g, law)) = stack.pop() {
            if b.len() >= budget {
                return None;
            }
            let id = b.add_node(slot, g, matches!(law, Law::Surviving));
            if levels == Some(g) {
                continue;
            }
            types.clear();
            let survivors = match law {
                Law::Plain => {
                    self.plain_children(rng, &mut types);
                    0
                }
                Law::Dying => {
                    self.dying_children(rng, &mut types);
                    0
                }
                Law::Surviving => self.surviving_children(rng, &mut types),
            };
            let first = b.reserve_edges(id, types.iter().copied());
            for k in (0..types.len()).rev() {
                let child = match law {
                    Law::Plain => Law::Plain,
                    Law::Surviving if k < survivors => Law::Surviving,
                    _ => Law::Dying,
                };
                stack.push((Some(first + k), g + 1, child));
            }
        }
        let depth = levels.map_or(Depth::Complete, Depth::Truncated);
        Some(b.finish(depth, matches!(root, Law::Surviving)))
    }

    /// Unconditioned tree truncated at generation `levels`.
    pub fn sample_truncated(&self, levels: usize, rng: &mut impl Rng) -> GwTree {
        self.sample(Law::Plain, Some(levels), usize::MAX, rng)
            .expect("no budget")
    }

    /// Complete tree conditioned on extinction, or `None` if it would have more
    /// than `budget` nodes. For `d <= 1` this is the unconditioned law.
    pub fn sample_extinct(&self, budget: usize, rng: &mut impl Rng) -> Option<GwTree> {
        self.sample(Law::Dying, None, budget, rng)
    }

    /// Tree conditioned on survival, truncated at generation `levels`, with
    /// every surviving node marked.
    pub fn sample_surviving(&self, levels: usize, rng: &mut impl Rng) -> Result<GwTree> {
        if self.info.d <= 1.0 {
            return Err(invalid(format!(
                "survival has probability zero at d = {} <= 1",
                self.info.d
            )));
        }
        if levels == 0 {
            return Err(invalid("survival-conditioned trees need depth at least 1"));
        }
        Ok(self
            .sample(Law::Surviving, Some(levels), usize::MAX, rng)
            .expect("no budget"))
    }
}
