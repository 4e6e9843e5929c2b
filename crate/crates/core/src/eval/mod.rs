//! Handover success metric, synthetic scenes and the ablation benchmark.

pub mod bench;
pub mod success;
pub mod synth;

pub use bench::{default_suite, derive_seed, run_benchmark, Ablation, BenchParams, BenchReport, ModeSummary};
pub use success::{evaluate_success, PlaneSide, SuccessOutcome, SuccessParams};
pub use synth::{generate_scene, sample_grasps, write_scene, ObjectKind, RegionLabel, SynthInfo, SyntheticScene};
