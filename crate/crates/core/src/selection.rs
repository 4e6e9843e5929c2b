//! Region-aware grasp selection: split candidates by proximity to the human
//! and robot region clouds, then rank robot-side candidates by how far they
//! sit from, and how differently they approach than, the human-side ones.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GraspCandidate, PointCloud};
use crate::grounding::RegionMaskSet;
use crate::scalar::Real;

/// Standard deviations below this normalize to all zeros.
pub const SIGMA_FLOOR: f64 = 1e-12;
pub const DEFAULT_EPSILON: f64 = 0.02;
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Score the robot-region grasps against the human-region grasps.
    Full,
    /// Score every grasp outside the human region.
    NoRobotRegion,
    /// Best-separated pair over all grasps, then a seeded coin flip.
    NoRegions,
    /// Seeded uniform pick inside the robot region.
    RandomInRobotRegion,
}

impl SelectionMode {
    pub const ALL: [SelectionMode; 4] = [
        SelectionMode::Full,
        SelectionMode::NoRobotRegion,
        SelectionMode::NoRegions,
        SelectionMode::RandomInRobotRegion,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams<T> {
    pub epsilon: T,
    pub alpha: T,
    pub mode: SelectionMode,
    pub seed: u64,
}

impl<T: Real> Default for SelectionParams<T> {
    fn default() -> Self {
        Self {
            epsilon: T::lit(DEFAULT_EPSILON),
            alpha: T::lit(DEFAULT_ALPHA),
            mode: SelectionMode::Full,
            seed: 0,
        }
    }
}

impl<T: Real> SelectionParams<T> {
    pub fn with_mode(mode: SelectionMode, seed: u64) -> Self {
        Self {
            mode,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > T::zero() && self.epsilon.is_finite()) {
            return Err(Error::param("epsilon", format!("{} is not positive", self.epsilon)));
        }
        if !(self.alpha >= T::zero() && self.alpha <= T::one()) {
            return Err(Error::param("alpha", format!("{} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }
}

/// Ids of grasps whose translation lies strictly closer than `epsilon` to
/// some cloud point.
pub fn filter_grasps<T: Real>(grasps: &[GraspCandidate<T>], cloud: &PointCloud<T>, epsilon: T) -> BTreeSet<usize> {
    grasps
        .iter()
        .filter(|g| cloud.points.iter().any(|p| g.translation.distance(p) < epsilon))
        .map(|g| g.id)
        .collect()
}

/// Angle in `[0, π]` between the approach axes of two grasps.
pub fn approach_angle<T: Real>(a: &GraspCandidate<T>, b: &GraspCandidate<T>) -> T {
    let c = a.approach().dot(&b.approach());
    c.max(-T::one()).min(T::one()).acos()
}

/// Population z-scores; a spread under [`SIGMA_FLOOR`] yields zeros.
pub fn normalize<T: Real>(values: &[T]) -> Vec<T> {
    if values.is_empty() {
        return Vec::new();
    }
    let n = T::from_usize_lossy(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let var = values.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() / n;
    let sigma = var.sqrt();
    if !(sigma >= T::lit(SIGMA_FLOOR)) {
        return vec![T::zero(); values.len()];
    }
    values.iter().map(|v| (*v - mean) / sigma).collect()
}

/// `α·d̂ + (1−α)·θ̂` per entry.
pub fn combine<T: Real>(z_distance: &[T], z_angle: &[T], alpha: T) -> Vec<T> {
    z_distance
        .iter()
        .zip(z_angle)
        .map(|(d, a)| alpha * *d + (T::one() - alpha) * *a)
        .collect()
}

/// Index of the first maximum.
pub fn argmax_first<T: Real>(scores: &[T]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        match best {
            Some(b) if !(*s > scores[b]) => {}
            _ => best = Some(i),
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore<T> {
    pub id: usize,
    pub mean_distance: T,
    /// Radians.
    pub mean_angle: T,
    pub z_distance: T,
    pub z_angle: T,
    pub score: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairChoice<T> {
    pub ids: [usize; 2],
    pub distance: T,
    pub angle: T,
    pub z_distance: T,
    pub z_angle: T,
    pub score: T,
    pub pairs_scored: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct SelectionReport<T> {
    pub chosen: GraspCandidate<T>,
    pub requested_mode: SelectionMode,
    /// Differs from `requested_mode` after a fallback.
    pub mode: SelectionMode,
    pub fallback: bool,
    pub seed: u64,
    pub epsilon: T,
    pub alpha: T,
    pub g_human_ids: Vec<usize>,
    pub g_robot_ids: Vec<usize>,
    pub pool_ids: Vec<usize>,
    /// Grasp set the mean distance and angle terms run over.
    pub reference_set: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<CandidateScore<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<PairChoice<T>>,
}

/// Mean distance and mean approach angle from each pool member to `reference`,
/// z-normalized over the pool and combined with `alpha`.
pub fn score_pool<T: Real>(pool: &[&GraspCandidate<T>], reference: &[&GraspCandidate<T>], alpha: T) -> Vec<CandidateScore<T>> {
    let k = T::from_usize_lossy(reference.len());
    let (md, ma): (Vec<T>, Vec<T>) = pool
        .iter()
        .map(|g| {
            let mut d = T::zero();
            let mut a = T::zero();
            for h in reference {
                d += g.translation.distance(&h.translation);
                a += approach_angle(g, h);
            }
            (d / k, a / k)
        })
        .unzip();
    rank_statistics(pool.iter().map(|g| g.id), &md, &ma, alpha)
}

/// Normalizes precomputed per-candidate statistics and scores them.
pub fn rank_statistics<T: Real>(
    ids: impl IntoIterator<Item = usize>,
    mean_distance: &[T],
    mean_angle: &[T],
    alpha: T,
) -> Vec<CandidateScore<T>> {
    let zd = normalize(mean_distance);
    let za = normalize(mean_angle);
    let s = combine(&zd, &za, alpha);
    ids.into_iter()
        .enumerate()
        .map(|(i, id)| CandidateScore {
            id,
            mean_distance: mean_distance[i],
            mean_angle: mean_angle[i],
            z_distance: zd[i],
            z_angle: za[i],
            score: s[i],
        })
        .collect()
}

fn best_by_score<T: Real>(scores: &[CandidateScore<T>]) -> Option<usize> {
    // Pool order is ascending id, so the first maximum has the lowest id.
    argmax_first(&scores.iter().map(|c| c.score).collect::<Vec<_>>())
}

fn by_ids<'a, T>(grasps: &'a [GraspCandidate<T>], ids: &BTreeSet<usize>) -> Vec<&'a GraspCandidate<T>> {
    let mut v: Vec<_> = grasps.iter().filter(|g| ids.contains(&g.id)).collect();
    v.sort_by_key(|g| g.id);
    v
}

fn best_pair<T: Real>(grasps: &[GraspCandidate<T>], alpha: T) -> Option<PairChoice<T>> {
    let mut sorted: Vec<&GraspCandidate<T>> = grasps.iter().collect();
    sorted.sort_by_key(|g| g.id);
    let mut ids = Vec::new();
    let mut d = Vec::new();
    let mut a = Vec::new();
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            ids.push([sorted[i].id, sorted[j].id]);
            d.push(sorted[i].translation.distance(&sorted[j].translation));
            a.push(approach_angle(sorted[i], sorted[j]));
        }
    }
    let zd = normalize(&d);
    let za = normalize(&a);
    let s = combine(&zd, &za, alpha);
    let b = argmax_first(&s)?;
    Some(PairChoice {
        ids: ids[b],
        distance: d[b],
        angle: a[b],
        z_distance: zd[b],
        z_angle: za[b],
        score: s[b],
        pairs_scored: s.len(),
    })
}

/// Chooses one grasp under `params.mode`.
pub fn select<T: Real>(
    grasps: &[GraspCandidate<T>],
    regions: &RegionMaskSet<T>,
    params: &SelectionParams<T>,
) -> Result<SelectionReport<T>> {
    params.validate()?;
    if grasps.is_empty() {
        return Err(Error::NoFeasibleGrasp("no grasp candidates".into()));
    }
    let g_human = filter_grasps(grasps, &regions.pc_human, params.epsilon);
    let g_robot = filter_grasps(grasps, &regions.pc_robot, params.epsilon);
    let lookup = |id: usize| grasps.iter().find(|g| g.id == id).cloned().expect("id from this set");

    let mut report = SelectionReport {
        chosen: grasps[0].clone(),
        requested_mode: params.mode,
        mode: params.mode,
        fallback: false,
        seed: params.seed,
        epsilon: params.epsilon,
        alpha: params.alpha,
        g_human_ids: g_human.iter().copied().collect(),
        g_robot_ids: g_robot.iter().copied().collect(),
        pool_ids: Vec::new(),
        reference_set: "g_human".into(),
        candidates: Vec::new(),
        pair: None,
    };

    match params.mode {
        SelectionMode::Full | SelectionMode::NoRobotRegion => {
            let mut mode = params.mode;
            let mut pool_ids = if mode == SelectionMode::Full {
                g_robot.clone()
            } else {
                BTreeSet::new()
            };
            if mode == SelectionMode::Full && pool_ids.is_empty() {
                mode = SelectionMode::NoRobotRegion;
                report.fallback = true;
            }
            if mode == SelectionMode::NoRobotRegion {
                pool_ids = grasps.iter().map(|g| g.id).filter(|id| !g_human.contains(id)).collect();
            }
            report.mode = mode;
            if pool_ids.is_empty() {
                return Err(Error::NoFeasibleGrasp(format!(
                    "every one of {} grasps lies within {} of the human region",
                    grasps.len(),
                    params.epsilon
                )));
            }
            if g_human.is_empty() {
                return Err(Error::DegenerateScoring(
                    "no grasp lies in the human region, so there is nothing to score against; \
                     widen epsilon or use random_in_robot_region"
                        .into(),
                ));
            }
            let pool = by_ids(grasps, &pool_ids);
            let reference = by_ids(grasps, &g_human);
            let scores = score_pool(&pool, &reference, params.alpha);
            let best = best_by_score(&scores).expect("non-empty pool");
            report.chosen = pool[best].clone();
            report.pool_ids = pool_ids.into_iter().collect();
            report.candidates = scores;
        }
        SelectionMode::NoRegions => {
            report.pool_ids = {
                let mut v: Vec<_> = grasps.iter().map(|g| g.id).collect();
                v.sort_unstable();
                v
            };
            report.reference_set = "all_pairs".into();
            match best_pair(grasps, params.alpha) {
                Some(pair) => {
                    let pick = ChaCha8Rng::seed_from_u64(params.seed).random_range(0..2usize);
                    report.chosen = lookup(pair.ids[pick]);
                    report.pair = Some(pair);
                }
                None => report.chosen = grasps[0].clone(),
            }
        }
        SelectionMode::RandomInRobotRegion => {
            if g_robot.is_empty() {
                return Err(Error::NoFeasibleGrasp("no grasp lies in the robot region".into()));
            }
            report.reference_set = "none".into();
            let ids: Vec<usize> = g_robot.iter().copied().collect();
            let pick = ChaCha8Rng::seed_from_u64(params.seed).random_range(0..ids.len());
            report.chosen = lookup(ids[pick]);
            report.pool_ids = ids;
        }
    }
    Ok(report)
}
