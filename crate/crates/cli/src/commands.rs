use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use handover_core::ergonomics::{plan_handover, ErgoResult, SolveParams};
use handover_core::eval::{
    default_suite, derive_seed, generate_scene, run_benchmark, sample_grasps, synth, write_scene, Ablation, BenchParams, ObjectKind,
    SynthInfo,
};
use handover_core::geometry::{depth_to_pointcloud, filter_cloud_by_mask, PointCloud, Vec3};
use handover_core::grounding::{ground_regions, make_grid, GroundingOutcome, RegionIndices, RegionMaskSet};
use handover_core::io::{self, read_scene, SceneBundle};
use handover_core::raster::BBox;
use handover_core::selection::{select, SelectionParams, SelectionReport};
use handover_core::vlm::{CachedClient, LiveClient, MockClient, TranscriptCache, VlmClient};
use handover_core::Error;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::GlobalConfig;
use crate::{
    AnnotateArgs, Cli, CliError, Command, EvaluateArgs, GroundArgs, PipelineArgs, PoseArgs, SelectArgs, SelectionFlags, SynthArgs, VlmArgs,
    VlmMode,
};

type CliResult<T> = Result<T, CliError>;

pub const HUMAN_MASK: &str = "human_mask.pgm";
pub const ROBOT_MASK: &str = "robot_mask.pgm";

pub fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = GlobalConfig::load(cli.config.as_deref())?;
    cfg.validate()?;
    match cli.command {
        Command::Ground(a) => cmd_ground(&mut cfg, a),
        Command::Select(a) => cmd_select(&mut cfg, a),
        Command::Evaluate(a) => cmd_evaluate(&cfg, a),
        Command::Synth(a) => cmd_synth(a),
        Command::Pose(a) => cmd_pose(&mut cfg, a),
        Command::Annotate(a) => cmd_annotate(&mut cfg, a),
        Command::Pipeline(a) => cmd_pipeline(&mut cfg, a),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("output serializes");
    bytes.push(b'\n');
    Ok(io::write_bytes(path, &bytes)?)
}

fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn scene_cloud(bundle: &SceneBundle) -> CliResult<PointCloud<f64>> {
    Ok(depth_to_pointcloud(
        &bundle.depth,
        bundle.intrinsics(),
        bundle.manifest.depth_scale,
    )?)
}

fn apply_vlm_flags(cfg: &mut GlobalConfig, a: &VlmArgs) {
    if let Some(n) = a.n {
        cfg.grid_n = n as usize;
    }
    if let Some(c) = &a.cache {
        cfg.cache_dir = Some(c.clone());
    }
}

fn make_client(cfg: &GlobalConfig, a: &VlmArgs) -> CliResult<Box<dyn VlmClient>> {
    let cache = cfg.cache_dir.as_ref().map(TranscriptCache::new);
    Ok(match a.vlm {
        VlmMode::Replay => {
            let cache = cache.ok_or_else(|| CliError::usage("--vlm replay needs --cache or cache_dir in the config"))?;
            Box::new(CachedClient::replay(cache))
        }
        VlmMode::Mock => {
            if a.mock_reply.is_empty() {
                return Err(CliError::usage("--vlm mock needs at least one --mock-reply"));
            }
            let mock = MockClient::new(a.mock_reply.iter().cloned());
            match cache {
                Some(c) => Box::new(CachedClient::record(c, Box::new(mock))),
                None => Box::new(mock),
            }
        }
        VlmMode::Live => {
            let live = LiveClient::new(cfg.vlm.clone())?;
            match cache {
                Some(c) => Box::new(CachedClient::record(c, Box::new(live))),
                None => Box::new(live),
            }
        }
    })
}

fn vlm_mode_name(m: VlmMode) -> &'static str {
    match m {
        VlmMode::Live => "live",
        VlmMode::Mock => "mock",
        VlmMode::Replay => "replay",
    }
}

#[derive(Serialize)]
struct RegionsRecord<'a> {
    config: &'a GlobalConfig,
    args: Value,
    object_query: &'a str,
    n: usize,
    indices: &'a RegionIndices,
    replies: &'a [String],
    reprompted: bool,
    human_pixels: usize,
    robot_pixels: usize,
    human_points: usize,
    robot_points: usize,
}

/// Grounds `bundle` and writes the grounding artifacts into `out`.
fn ground_into(
    cfg: &GlobalConfig,
    a: &VlmArgs,
    scene_path: &Path,
    bundle: &SceneBundle,
    cloud: &PointCloud<f64>,
    out: &Path,
) -> CliResult<GroundingOutcome<f64>> {
    let mut client = make_client(cfg, a)?;
    let g = ground_regions(
        client.as_mut(),
        &bundle.image,
        bundle.bbox(),
        cfg.grid_n,
        &bundle.manifest.object_query,
        &bundle.object_mask,
        cloud,
    )?;
    io::write_bytes(out.join("annotated.png"), &g.annotated_png)?;
    let mut reply = g.replies.last().cloned().unwrap_or_default();
    reply.push('\n');
    io::write_bytes(out.join("vlm_reply.txt"), reply.as_bytes())?;
    io::write_mask_pgm(&g.masks.m_human, out.join(HUMAN_MASK))?;
    io::write_mask_pgm(&g.masks.m_robot, out.join(ROBOT_MASK))?;
    let record = RegionsRecord {
        config: cfg,
        args: json!({ "scene": display(scene_path), "vlm": vlm_mode_name(a.vlm) }),
        object_query: &bundle.manifest.object_query,
        n: cfg.grid_n,
        indices: &g.indices,
        replies: &g.replies,
        reprompted: g.replies.len() > 1,
        human_pixels: g.masks.m_human.count(),
        robot_pixels: g.masks.m_robot.count(),
        human_points: g.masks.pc_human.len(),
        robot_points: g.masks.pc_robot.len(),
    };
    write_json(&out.join("regions.json"), &record)?;
    Ok(g)
}

fn cmd_ground(cfg: &mut GlobalConfig, a: GroundArgs) -> CliResult<()> {
    apply_vlm_flags(cfg, &a.vlm);
    cfg.validate()?;
    let bundle = read_scene(&a.scene)?;
    let cloud = scene_cloud(&bundle)?;
    let g = ground_into(cfg, &a.vlm, &a.scene, &bundle, &cloud, &a.out)?;
    println!("{}", g.indices.to_reply());
    Ok(())
}

fn selection_params(cfg: &mut GlobalConfig, s: &SelectionFlags) -> CliResult<SelectionParams<f64>> {
    if let Some(v) = s.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = s.epsilon {
        cfg.epsilon = v;
    }
    cfg.validate()?;
    Ok(SelectionParams {
        epsilon: cfg.epsilon,
        alpha: cfg.alpha,
        mode: s.mode,
        seed: derive_seed(s.seed, &["select"]),
    })
}

fn chosen_score(r: &SelectionReport<f64>) -> Option<f64> {
    r.candidates
        .iter()
        .find(|c| c.id == r.chosen.id)
        .map(|c| c.score)
        .or_else(|| r.pair.as_ref().map(|p| p.score))
}

fn print_choice(r: &SelectionReport<f64>) {
    match chosen_score(r) {
        Some(s) => println!("chosen grasp {} score {s:.6}", r.chosen.id),
        None => println!("chosen grasp {} (unranked)", r.chosen.id),
    }
}

#[derive(Serialize)]
struct SelectionRecord<'a> {
    config: &'a GlobalConfig,
    args: Value,
    report: &'a SelectionReport<f64>,
}

fn selection_args(scene: &Path, s: &SelectionFlags, p: &SelectionParams<f64>) -> Value {
    json!({
        "scene": display(scene),
        "mode": p.mode,
        "seed": s.seed,
        "selection_seed": p.seed,
    })
}

fn cmd_select(cfg: &mut GlobalConfig, a: SelectArgs) -> CliResult<()> {
    let params = selection_params(cfg, &a.sel)?;
    let bundle = read_scene(&a.scene)?;
    let cloud = scene_cloud(&bundle)?;
    let m_human = io::read_mask_pgm(a.masks.join(HUMAN_MASK))?;
    let m_robot = io::read_mask_pgm(a.masks.join(ROBOT_MASK))?;
    let regions = RegionMaskSet {
        pc_human: filter_cloud_by_mask(&cloud, &m_human)?,
        pc_robot: filter_cloud_by_mask(&cloud, &m_robot)?,
        m_human,
        m_robot,
    };
    let report = select(&bundle.grasps, &regions, &params)?;
    let mut args = selection_args(&a.scene, &a.sel, &params);
    args["masks"] = json!(display(&a.masks));
    write_json(
        &a.out,
        &SelectionRecord {
            config: cfg,
            args,
            report: &report,
        },
    )?;
    print_choice(&report);
    Ok(())
}

fn load_bench_dir(dir: &Path) -> CliResult<Vec<synth::SyntheticScene>> {
    let entries = std::fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut infos: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path().join("synth.json")))
        .filter(|p| p.is_file())
        .collect();
    infos.sort();
    if infos.is_empty() {
        return Err(Error::Empty("benchmark directory has no synth.json scenes").into());
    }
    let mut scenes = Vec::with_capacity(infos.len());
    for path in infos {
        let bytes = std::fs::read(&path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        let info: SynthInfo = serde_json::from_slice(&bytes).map_err(|e| Error::Format {
            format: "synth.json",
            reason: format!("{}: {e}", path.display()),
        })?;
        let scene = generate_scene(info.kind, info.seed, info.density)?;
        if scene.id != info.id {
            return Err(Error::field("id", format!("{} regenerates as {}", info.id, scene.id)).into());
        }
        scenes.push(scene);
    }
    Ok(scenes)
}

fn cmd_evaluate(cfg: &GlobalConfig, a: EvaluateArgs) -> CliResult<()> {
    let ablations = a
        .modes
        .iter()
        .map(|m| m.parse::<Ablation>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let params = BenchParams {
        trials: a.trials as usize,
        seed: a.seed,
        grasps_per_trial: a.grasps as usize,
        epsilon: cfg.epsilon,
        alpha: cfg.alpha,
        sample_n: cfg.sample_n,
        threshold: cfg.threshold,
        ..BenchParams::default()
    };
    let density = a.density.unwrap_or(synth::DEFAULT_DENSITY);
    let scenes = match &a.bench_dir {
        Some(d) => load_bench_dir(d)?,
        None => default_suite(density)?,
    };
    let report = run_benchmark(&scenes, &ablations, &params)?;
    let table = report.table();
    write_json(
        &a.out.join("bench.json"),
        &json!({
            "config": cfg,
            "args": {
                "bench_dir": a.bench_dir.as_deref().map(display),
                "modes": ablations,
                "trials": a.trials,
                "seed": a.seed,
                "density": density,
                "grasps": a.grasps,
            },
            "report": report,
        }),
    )?;
    io::write_bytes(a.out.join("table.txt"), table.as_bytes())?;
    print!("{table}");
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> CliResult<()> {
    let kind: ObjectKind = a.object.parse()?;
    let scene = generate_scene(kind, a.seed, a.density.unwrap_or(synth::DEFAULT_DENSITY))?;
    let grasp_seed = derive_seed(a.seed, &[&scene.id, "grasps"]);
    let grasps = sample_grasps(&scene, a.grasps as usize, grasp_seed)?;
    let manifest = write_scene(&scene, &a.out, &grasps, grasp_seed)?;
    println!("{}", manifest.display());
    Ok(())
}

#[derive(Serialize)]
struct PoseRecord<'a> {
    #[serde(flatten)]
    result: &'a ErgoResult<f64>,
    config: &'a GlobalConfig,
    args: Value,
}

fn solve_params(cfg: &GlobalConfig) -> SolveParams {
    SolveParams {
        max_reach: cfg.max_reach,
        granularity_deg: cfg.granularity_deg,
    }
}

fn cmd_pose(cfg: &mut GlobalConfig, a: PoseArgs) -> CliResult<()> {
    if let Some(v) = a.max_reach {
        cfg.max_reach = v;
    }
    if let Some(v) = a.granularity {
        cfg.granularity_deg = v;
    }
    cfg.validate()?;
    let joints = io::read_human_joints(&a.pose)?;
    let r = plan_handover(&joints, Vec3::from(a.robot_base), Vec3::from(a.up), &solve_params(cfg))?;
    write_json(
        &a.out,
        &PoseRecord {
            result: &r,
            config: cfg,
            args: json!({ "pose": display(&a.pose), "robot_base": a.robot_base, "up": a.up }),
        },
    )?;
    println!(
        "theta1 {} theta2 {} wrist [{:.4}, {:.4}, {:.4}] cost {:.6}",
        r.theta1_deg, r.theta2_deg, r.wrist.x, r.wrist.y, r.wrist.z, r.c_total
    );
    Ok(())
}

fn cmd_annotate(cfg: &mut GlobalConfig, a: AnnotateArgs) -> CliResult<()> {
    if let Some(n) = a.n {
        cfg.grid_n = n as usize;
    }
    let img = io::read_image_ppm(&a.image)?;
    let bbox = BBox::from(a.bbox);
    if !bbox.fits_in(img.width, img.height) {
        return Err(Error::field("bbox", format!("{:?} does not fit the {}x{} image", a.bbox, img.width, img.height)).into());
    }
    let grid = make_grid(bbox, cfg.grid_n)?;
    io::write_annotated_png(&img, &grid, &a.out)?;
    println!("{} cells", grid.cells.len());
    Ok(())
}

/// Robot base and up vector from flags, else from the scene's synth.json.
fn pose_frame(a: &PipelineArgs, bundle: &SceneBundle) -> Option<(Vec3<f64>, Vec3<f64>)> {
    let info: Option<SynthInfo> = std::fs::read(bundle.base_dir.join("synth.json"))
        .ok()
        .and_then(|b| serde_json::from_slice(&b).ok());
    let base = a.robot_base.map(Vec3::from).or(info.as_ref().map(|i| i.robot_base))?;
    let up = a.up.map(Vec3::from).or(info.as_ref().map(|i| i.up)).unwrap_or(Vec3::unit_z());
    Some((base, up))
}

fn cmd_pipeline(cfg: &mut GlobalConfig, a: PipelineArgs) -> CliResult<()> {
    apply_vlm_flags(cfg, &a.vlm);
    if let Some(v) = a.max_reach {
        cfg.max_reach = v;
    }
    let params = selection_params(cfg, &a.sel)?;
    let bundle = read_scene(&a.scene)?;
    let cloud = scene_cloud(&bundle)?;

    let g = ground_into(cfg, &a.vlm, &a.scene, &bundle, &cloud, &a.out)?;
    let report = select(&bundle.grasps, &g.masks, &params)?;
    let sel_args = selection_args(&a.scene, &a.sel, &params);
    write_json(
        &a.out.join("selection.json"),
        &SelectionRecord {
            config: cfg,
            args: sel_args.clone(),
            report: &report,
        },
    )?;
    print_choice(&report);

    let frame = pose_frame(&a, &bundle);
    let (handover, pose_skipped) = match (&bundle.human, frame) {
        (Some(joints), Some((base, up))) => {
            let r = plan_handover(joints, base, up, &solve_params(cfg))?;
            write_json(
                &a.out.join("handover.json"),
                &PoseRecord {
                    result: &r,
                    config: cfg,
                    args: json!({ "scene": display(&a.scene), "robot_base": base, "up": up }),
                },
            )?;
            (Some(r), None)
        }
        (None, _) => (None, Some("scene has no human pose")),
        (Some(_), None) => (None, Some("no robot base given and no synth.json beside the scene")),
    };

    let mut artifacts = BTreeMap::new();
    for name in [
        "annotated.png",
        "vlm_reply.txt",
        "regions.json",
        HUMAN_MASK,
        ROBOT_MASK,
        "selection.json",
        "handover.json",
    ] {
        let p = a.out.join(name);
        if p.is_file() {
            artifacts.insert(name, sha256_file(&p)?);
        }
    }
    write_json(
        &a.out.join("run.json"),
        &json!({
            "config": cfg,
            "args": {
                "scene": display(&a.scene),
                "vlm": vlm_mode_name(a.vlm.vlm),
                "mode": params.mode,
                "seed": a.sel.seed,
                "robot_base": frame.map(|f| f.0),
                "up": frame.map(|f| f.1),
            },
            "seeds": { "run": a.sel.seed, "selection": params.seed },
            "indices": g.indices,
            "chosen_id": report.chosen.id,
            "handover": handover,
            "pose_skipped": pose_skipped,
            "artifacts": artifacts,
        }),
    )?;
    Ok(())
}
