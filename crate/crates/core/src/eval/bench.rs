//! Ablation benchmark: every scene × strategy × trial cell selects a grasp
//! from freshly sampled candidates using ground-truth regions and scores it
//! with the plane-side metric.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::success::{evaluate_success, PlaneSide, SuccessParams, DEFAULT_SAMPLE_N, DEFAULT_THRESHOLD};
use super::synth::{generate_scene, sample_grasps, ObjectKind, SyntheticScene};
use crate::error::{Error, Result};
use crate::geometry::GraspCandidate;
use crate::selection::{filter_grasps, select, SelectionMode, SelectionParams, DEFAULT_ALPHA, DEFAULT_EPSILON};

/// Instance seeds of the default suite, one scene per kind and seed.
pub const DEFAULT_SUITE_SEEDS: [u64; 2] = [1, 2];
pub const DEFAULT_GRASPS_PER_TRIAL: usize = 100;
pub const DEFAULT_TRIALS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ablation {
    A1,
    A2,
    A3,
    B1,
    B2,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [Ablation::A1, Ablation::A2, Ablation::A3, Ablation::B1, Ablation::B2];

    pub fn mode(self) -> SelectionMode {
        match self {
            Ablation::A1 => SelectionMode::NoRegions,
            Ablation::A2 => SelectionMode::NoRobotRegion,
            Ablation::A3 | Ablation::B2 => SelectionMode::Full,
            Ablation::B1 => SelectionMode::RandomInRobotRegion,
        }
    }

    pub fn method(self) -> &'static str {
        match self {
            Ablation::A1 => "A1: w/o human and robot region",
            Ablation::A2 => "A2: w/o robot region",
            Ablation::A3 => "A3: with both regions",
            Ablation::B1 => "B1: w/o ranking criteria",
            Ablation::B2 => "B2: with ranking criteria",
        }
    }

    /// (human region, robot region, geometric ranking) used by the strategy.
    pub fn factors(self) -> (bool, bool, bool) {
        match self {
            Ablation::A1 => (false, false, true),
            Ablation::A2 => (true, false, true),
            Ablation::A3 | Ablation::B2 => (true, true, true),
            Ablation::B1 => (true, true, false),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Ablation::A1 => "a1",
            Ablation::A2 => "a2",
            Ablation::A3 => "a3",
            Ablation::B1 => "b1",
            Ablation::B2 => "b2",
        }
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::param("modes", format!("unknown strategy {s:?}, expected a1, a2, a3, b1 or b2")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchParams {
    pub trials: usize,
    pub seed: u64,
    pub grasps_per_trial: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub sample_n: usize,
    pub threshold: f64,
    /// A chosen grasp within `epsilon` of the human region also fails.
    pub require_avoid_human: bool,
    pub plane_side: PlaneSide,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            trials: DEFAULT_TRIALS,
            seed: 0,
            grasps_per_trial: DEFAULT_GRASPS_PER_TRIAL,
            epsilon: DEFAULT_EPSILON,
            alpha: DEFAULT_ALPHA,
            sample_n: DEFAULT_SAMPLE_N,
            threshold: DEFAULT_THRESHOLD,
            require_avoid_human: true,
            plane_side: PlaneSide::AlongApproach,
        }
    }
}

impl BenchParams {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        if self.grasps_per_trial == 0 {
            return Err(Error::param("grasps_per_trial", "must be at least 1"));
        }
        self.selection(SelectionMode::Full, 0).validate()?;
        self.success(0).validate()
    }

    fn selection(&self, mode: SelectionMode, seed: u64) -> SelectionParams<f64> {
        SelectionParams {
            epsilon: self.epsilon,
            alpha: self.alpha,
            mode,
            seed,
        }
    }

    fn success(&self, seed: u64) -> SuccessParams {
        SuccessParams {
            sample_n: self.sample_n,
            threshold: self.threshold,
            seed,
            resample: true,
            side: self.plane_side,
        }
    }
}

/// Stable sub-seed from the run seed and a tag path.
pub fn derive_seed(base: u64, tags: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    for t in tags {
        h.update((t.len() as u64).to_le_bytes());
        h.update(t.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub grasp_seed: u64,
    pub cell_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chosen_id: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub in_human_region: Option<bool>,
    pub fallback: bool,
    pub success: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneResult {
    pub scene: String,
    pub ablation: Ablation,
    pub successes: usize,
    pub trials: Vec<TrialOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub ablation: Ablation,
    pub method: String,
    pub mode: SelectionMode,
    pub human_region: bool,
    pub robot_region: bool,
    pub ranking: bool,
    pub successes: usize,
    pub failures: usize,
    pub trials: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub params: BenchParams,
    pub scenes: Vec<String>,
    pub summary: Vec<ModeSummary>,
    pub per_scene: Vec<SceneResult>,
}

impl BenchReport {
    pub fn rate(&self, a: Ablation) -> Option<f64> {
        self.summary.iter().find(|s| s.ablation == a).map(|s| s.rate)
    }

    /// Aligned text table: method, ablation factors, success rate.
    pub fn table(&self) -> String {
        let yn = |b: bool| if b { "yes" } else { "no" };
        let width = self.summary.iter().map(|s| s.method.len()).max().unwrap_or(6).max(6);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:<12}  {:<12}  {:<7}  {:>12}",
            "Method", "Human region", "Robot region", "Ranking", "Success rate"
        );
        let _ = writeln!(out, "{}", "-".repeat(width + 2 + 12 + 2 + 12 + 2 + 7 + 2 + 12));
        for s in &self.summary {
            let rate = format!("{:.1}% ({}/{})", 100.0 * s.rate, s.successes, s.trials);
            let _ = writeln!(
                out,
                "{:<width$}  {:<12}  {:<12}  {:<7}  {:>12}",
                s.method,
                yn(s.human_region),
                yn(s.robot_region),
                yn(s.ranking),
                rate
            );
        }
        out
    }
}

/// The five object kinds at each of [`DEFAULT_SUITE_SEEDS`].
pub fn default_suite(density: f64) -> Result<Vec<SyntheticScene>> {
    let jobs: Vec<(ObjectKind, u64)> = ObjectKind::ALL
        .into_iter()
        .flat_map(|k| DEFAULT_SUITE_SEEDS.into_iter().map(move |s| (k, s)))
        .collect();
    jobs.into_par_iter().map(|(k, s)| generate_scene(k, s, density)).collect()
}

fn run_cell(
    scene: &SyntheticScene,
    regions: &crate::grounding::RegionMaskSet<f64>,
    grasps: &[GraspCandidate<f64>],
    ablation: Ablation,
    trial: usize,
    grasp_seed: u64,
    params: &BenchParams,
) -> TrialOutcome {
    let cell_seed = derive_seed(params.seed, &[&scene.id, ablation.name(), &trial.to_string()]);
    let mut out = TrialOutcome {
        trial,
        grasp_seed,
        cell_seed,
        chosen_id: None,
        p: None,
        in_human_region: None,
        fallback: false,
        success: false,
        error: None,
    };
    let report = match select(grasps, regions, &params.selection(ablation.mode(), cell_seed)) {
        Ok(r) => r,
        Err(e) => {
            out.error = Some(e.name().to_string());
            return out;
        }
    };
    out.chosen_id = Some(report.chosen.id);
    out.fallback = report.fallback;
    let in_human = !filter_grasps(std::slice::from_ref(&report.chosen), &regions.pc_human, params.epsilon).is_empty();
    out.in_human_region = Some(in_human);
    match evaluate_success(&report.chosen, &regions.pc_human, &params.success(cell_seed)) {
        Ok(s) => {
            out.p = Some(s.p);
            out.success = s.success && !(params.require_avoid_human && in_human);
        }
        Err(e) => out.error = Some(e.name().to_string()),
    }
    out
}

/// Runs every scene × ablation × trial cell. Candidate grasps depend on the
/// scene and trial only, so all strategies see the same candidates.
pub fn run_benchmark(scenes: &[SyntheticScene], ablations: &[Ablation], params: &BenchParams) -> Result<BenchReport> {
    params.validate()?;
    if ablations.is_empty() {
        return Err(Error::param("modes", "at least one strategy is required"));
    }
    if scenes.is_empty() {
        return Err(Error::Empty("benchmark scenes"));
    }
    let regions: Vec<_> = scenes.iter().map(SyntheticScene::regions).collect();
    let jobs: Vec<(usize, usize)> = (0..scenes.len()).flat_map(|s| (0..params.trials).map(move |t| (s, t))).collect();
    let results: Vec<Result<Vec<TrialOutcome>>> = jobs
        .par_iter()
        .map(|&(s, trial)| {
            let scene = &scenes[s];
            let grasp_seed = derive_seed(params.seed, &[&scene.id, "grasps", &trial.to_string()]);
            let grasps = sample_grasps(scene, params.grasps_per_trial, grasp_seed)?;
            Ok(ablations
                .iter()
                .map(|a| run_cell(scene, &regions[s], &grasps, *a, trial, grasp_seed, params))
                .collect())
        })
        .collect();

    let mut per_scene: Vec<SceneResult> = Vec::new();
    for scene in scenes {
        for a in ablations {
            per_scene.push(SceneResult {
                scene: scene.id.clone(),
                ablation: *a,
                successes: 0,
                trials: Vec::with_capacity(params.trials),
            });
        }
    }
    for (&(s, _), r) in jobs.iter().zip(results) {
        for (ai, outcome) in r?.into_iter().enumerate() {
            let cell = &mut per_scene[s * ablations.len() + ai];
            cell.successes += usize::from(outcome.success);
            cell.trials.push(outcome);
        }
    }

    let summary = ablations
        .iter()
        .map(|a| {
            let cells = per_scene.iter().filter(|c| c.ablation == *a);
            let (successes, trials) = cells.fold((0, 0), |(s, t), c| (s + c.successes, t + c.trials.len()));
            let (human_region, robot_region, ranking) = a.factors();
            ModeSummary {
                ablation: *a,
                method: a.method().to_string(),
                mode: a.mode(),
                human_region,
                robot_region,
                ranking,
                successes,
                failures: trials - successes,
                trials,
                rate: successes as f64 / trials as f64,
            }
        })
        .collect();

    Ok(BenchReport {
        params: *params,
        scenes: scenes.iter().map(|s| s.id.clone()).collect(),
        summary,
        per_scene,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ablations_parse() {
        assert_eq!("B2".parse::<Ablation>().unwrap(), Ablation::B2);
        assert!("c1".parse::<Ablation>().is_err());
        assert_eq!(Ablation::A3.mode(), Ablation::B2.mode());
    }

    #[test]
    fn seeds_differ_by_tag() {
        assert_eq!(derive_seed(7, &["a", "b"]), derive_seed(7, &["a", "b"]));
        assert_ne!(derive_seed(7, &["a", "b"]), derive_seed(7, &["ab"]));
        assert_ne!(derive_seed(7, &["a"]), derive_seed(8, &["a"]));
    }

    #[test]
    fn totals_add_up_and_repeat() {
        let scenes = vec![generate_scene(ObjectKind::Hammer, 1, 60_000.0).unwrap()];
        let params = BenchParams {
            trials: 3,
            seed: 5,
            grasps_per_trial: 30,
            ..BenchParams::default()
        };
        let r = run_benchmark(&scenes, &Ablation::ALL, &params).unwrap();
        for s in &r.summary {
            assert_eq!(s.successes + s.failures, 3);
            assert_eq!(s.rate, s.successes as f64 / 3.0);
        }
        assert_eq!(r, run_benchmark(&scenes, &Ablation::ALL, &params).unwrap());
        assert_eq!(r.table().lines().count(), 2 + 5);
    }

    #[test]
    fn bad_params() {
        let scenes = vec![generate_scene(ObjectKind::Box, 1, 30_000.0).unwrap()];
        let p = BenchParams {
            trials: 0,
            ..BenchParams::default()
        };
        assert!(run_benchmark(&scenes, &Ablation::ALL, &p).is_err());
        assert!(run_benchmark(&scenes, &[], &BenchParams::default()).is_err());
    }
}
