//! Synthetic handover scenes: composite box/cylinder objects with labeled
//! human and robot regions, surface-sampled with analytic normals, viewed by
//! a seeded pinhole camera and rendered to image, depth and masks.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, GraspCandidate, PointCloud, Rot3, Vec3};
use crate::grounding::RegionMaskSet;
use crate::io::{
    write_bytes, write_depth_pgm16, write_grasps_json, write_human_joints, write_image_ppm, write_manifest, write_mask_pgm, write_ply,
    HumanJoints, SceneManifest,
};
use crate::raster::{BBox, BinaryMask, DepthImage, RgbImage};

/// Surface samples per square meter used when none is given.
pub const DEFAULT_DENSITY: f64 = 400_000.0;
pub const IMAGE_WIDTH: usize = 320;
pub const IMAGE_HEIGHT: usize = 240;
pub const FOCAL_PX: f64 = 320.0;
pub const DEPTH_SCALE: f64 = 0.001;
/// Depth slack for the visibility test, meters.
const OCCLUSION_TOL: f64 = 0.004;
const MAX_CAMERA_DRAWS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Hammer,
    Knife,
    Mug,
    Spatula,
    Box,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 5] = [
        ObjectKind::Hammer,
        ObjectKind::Knife,
        ObjectKind::Mug,
        ObjectKind::Spatula,
        ObjectKind::Box,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectKind::Hammer => "hammer",
            ObjectKind::Knife => "knife",
            ObjectKind::Mug => "mug",
            ObjectKind::Spatula => "spatula",
            ObjectKind::Box => "box",
        }
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        ObjectKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or(Error::UnknownObjectKind(s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionLabel {
    Neither = 0,
    HumanRegion = 1,
    RobotRegion = 2,
}

impl RegionLabel {
    fn color(self) -> [u8; 3] {
        match self {
            RegionLabel::Neither => [70, 110, 200],
            RegionLabel::HumanRegion => [60, 170, 75],
            RegionLabel::RobotRegion => [200, 70, 60],
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Shape {
    Cuboid {
        min: [f64; 3],
        max: [f64; 3],
    },
    /// Axis-aligned along `axis`, base-cap center `base`.
    Cylinder {
        base: [f64; 3],
        axis: usize,
        radius: f64,
        length: f64,
    },
}

/// Ground-truth label of a surface sample from its unscaled object-frame
/// position and outward normal.
type LabelFn = fn(&Vec3<f64>, &Vec3<f64>) -> RegionLabel;

#[derive(Clone, Copy)]
struct Part {
    shape: Shape,
    label: LabelFn,
}

fn cuboid(min: [f64; 3], max: [f64; 3], label: LabelFn) -> Part {
    Part {
        shape: Shape::Cuboid { min, max },
        label,
    }
}

use RegionLabel::{HumanRegion as H, Neither as N, RobotRegion as R};

/// Object-frame parts; x runs along the object, z is up. Human surfaces stop
/// at least 4.5 cm short of robot surfaces, more than twice the default
/// grasp filter radius even at the smallest scale.
fn model(kind: ObjectKind) -> Vec<Part> {
    match kind {
        ObjectKind::Hammer => vec![
            cuboid([0.0, -0.015, 0.0], [0.25, 0.015, 0.03], |p, _| if p.x < 0.20 { H } else { N }),
            cuboid([0.25, -0.05, -0.0025], [0.285, 0.05, 0.0325], |_, _| R),
        ],
        ObjectKind::Knife => vec![
            cuboid([0.0, -0.011, 0.0], [0.11, 0.011, 0.012], |_, _| H),
            // Blade edges past the bolster gap.
            cuboid([0.11, -0.016, 0.0095], [0.31, 0.016, 0.0125], |p, _| {
                if p.x > 0.155 && p.x < 0.25 && p.y.abs() > 0.009 {
                    R
                } else {
                    N
                }
            }),
        ],
        ObjectKind::Mug => vec![
            Part {
                shape: Shape::Cylinder {
                    base: [0.0, 0.0, 0.0],
                    axis: 2,
                    radius: 0.04,
                    length: 0.10,
                },
                // Lateral wall on the far side from the handle.
                label: |p, n| if n.z == 0.0 && p.x < -0.01 { R } else { N },
            },
            cuboid([0.035, -0.006, 0.072], [0.07, 0.006, 0.082], |_, _| H),
            cuboid([0.06, -0.006, 0.02], [0.07, 0.006, 0.082], |_, _| H),
            cuboid([0.035, -0.006, 0.02], [0.07, 0.006, 0.03], |_, _| H),
        ],
        ObjectKind::Spatula => vec![
            cuboid([0.0, -0.012, 0.0], [0.18, 0.012, 0.016], |p, _| if p.x < 0.155 { H } else { N }),
            cuboid([0.18, -0.008, 0.005], [0.20, 0.008, 0.011], |_, _| N),
            cuboid([0.20, -0.04, 0.006], [0.30, 0.04, 0.010], |_, _| R),
        ],
        ObjectKind::Box => vec![
            // Side walls only; the lid under the carry handle is neither.
            cuboid([-0.11, -0.06, 0.0], [0.11, 0.06, 0.08], |_, n| if n.z == 0.0 { R } else { N }),
            cuboid([-0.06, -0.01, 0.08], [-0.05, 0.01, 0.11], |_, _| H),
            cuboid([0.05, -0.01, 0.08], [0.06, 0.01, 0.11], |_, _| H),
            cuboid([-0.06, -0.01, 0.11], [0.06, 0.01, 0.12], |_, _| H),
        ],
    }
}

const INSIDE_TOL: f64 = 1e-9;

fn contains(shape: &Shape, p: &Vec3<f64>) -> bool {
    let a = [p.x, p.y, p.z];
    match *shape {
        Shape::Cuboid { min, max } => (0..3).all(|i| a[i] >= min[i] - INSIDE_TOL && a[i] <= max[i] + INSIDE_TOL),
        Shape::Cylinder {
            base,
            axis,
            radius,
            length,
        } => {
            let t = a[axis] - base[axis];
            let (i, j) = ((axis + 1) % 3, (axis + 2) % 3);
            let r2 = (a[i] - base[i]).powi(2) + (a[j] - base[j]).powi(2);
            t >= -INSIDE_TOL && t <= length + INSIDE_TOL && r2 <= (radius + INSIDE_TOL).powi(2)
        }
    }
}

fn stochastic_count(area: f64, density: f64, rng: &mut ChaCha8Rng) -> usize {
    let x = area * density;
    let base = x.floor();
    base as usize + usize::from(rng.random::<f64>() < x - base)
}

fn axis_vec(axis: usize, sign: f64) -> Vec3<f64> {
    let mut a = [0.0; 3];
    a[axis] = sign;
    Vec3::from(a)
}

/// Area-uniform samples with outward normals.
fn sample_shape(shape: &Shape, density: f64, rng: &mut ChaCha8Rng, out: &mut Vec<(Vec3<f64>, Vec3<f64>)>) {
    match *shape {
        Shape::Cuboid { min, max } => {
            for axis in 0..3 {
                let (i, j) = ((axis + 1) % 3, (axis + 2) % 3);
                let area = (max[i] - min[i]) * (max[j] - min[j]);
                for (sign, level) in [(-1.0, min[axis]), (1.0, max[axis])] {
                    let n = stochastic_count(area, density, rng);
                    for _ in 0..n {
                        let mut a = [0.0; 3];
                        a[axis] = level;
                        a[i] = rng.random_range(min[i]..=max[i]);
                        a[j] = rng.random_range(min[j]..=max[j]);
                        out.push((Vec3::from(a), axis_vec(axis, sign)));
                    }
                }
            }
        }
        Shape::Cylinder {
            base,
            axis,
            radius,
            length,
        } => {
            let (i, j) = ((axis + 1) % 3, (axis + 2) % 3);
            let lateral = stochastic_count(std::f64::consts::TAU * radius * length, density, rng);
            for _ in 0..lateral {
                let phi = rng.random_range(0.0..std::f64::consts::TAU);
                let t = rng.random_range(0.0..=length);
                let mut a = base;
                let mut n = [0.0; 3];
                a[axis] += t;
                a[i] += radius * phi.cos();
                a[j] += radius * phi.sin();
                n[i] = phi.cos();
                n[j] = phi.sin();
                out.push((Vec3::from(a), Vec3::from(n)));
            }
            let cap_area = std::f64::consts::PI * radius * radius;
            for (sign, offset) in [(-1.0, 0.0), (1.0, length)] {
                let n = stochastic_count(cap_area, density, rng);
                for _ in 0..n {
                    let r = radius * rng.random::<f64>().sqrt();
                    let phi = rng.random_range(0.0..std::f64::consts::TAU);
                    let mut a = base;
                    a[axis] += offset;
                    a[i] += r * phi.cos();
                    a[j] += r * phi.sin();
                    out.push((Vec3::from(a), axis_vec(axis, sign)));
                }
            }
        }
    }
}

/// Camera placement in the object frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vec3<f64>,
    pub target: Vec3<f64>,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub distance: f64,
}

impl CameraPose {
    /// Rows are the camera x (right), y (down) and z (forward) axes.
    pub fn rotation(&self) -> Rot3<f64> {
        let f = (self.target - self.position).normalized().expect("camera away from target");
        let r = f.cross(&Vec3::unit_z()).normalized().expect("camera not looking straight down");
        let d = f.cross(&r);
        Rot3::from_rows_unchecked([[r.x, r.y, r.z], [d.x, d.y, d.z], [f.x, f.y, f.z]])
    }

    pub fn to_camera(&self, p: &Vec3<f64>) -> Vec3<f64> {
        self.rotation().apply(&(*p - self.position))
    }
}

/// A rendered scene with ground-truth labels for every visible sample.
#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub id: String,
    pub kind: ObjectKind,
    pub seed: u64,
    pub density: f64,
    pub scale: f64,
    pub camera: CameraPose,
    pub intrinsics: CameraIntrinsics<f64>,
    /// World up expressed in the camera frame.
    pub up: Vec3<f64>,
    /// Visible samples, camera frame.
    pub points: Vec<Vec3<f64>>,
    pub normals: Vec<Vec3<f64>>,
    pub labels: Vec<RegionLabel>,
    pub pixels: Vec<(u32, u32)>,
    /// Samples drawn before visibility culling.
    pub sampled: usize,
    pub image: RgbImage,
    pub depth: DepthImage,
    pub object_mask: BinaryMask,
    pub m_human: BinaryMask,
    pub m_robot: BinaryMask,
    pub bbox: BBox,
}

impl SyntheticScene {
    fn cloud_of(&self, label: RegionLabel) -> PointCloud<f64> {
        let mut pts = Vec::new();
        let mut px = Vec::new();
        for i in 0..self.points.len() {
            if self.labels[i] == label {
                pts.push(self.points[i]);
                px.push(self.pixels[i]);
            }
        }
        PointCloud {
            points: pts,
            pixels: Some(px),
        }
    }

    pub fn pc_human(&self) -> PointCloud<f64> {
        self.cloud_of(RegionLabel::HumanRegion)
    }

    pub fn pc_robot(&self) -> PointCloud<f64> {
        self.cloud_of(RegionLabel::RobotRegion)
    }

    /// Ground-truth region masks and clouds.
    pub fn regions(&self) -> RegionMaskSet<f64> {
        RegionMaskSet {
            m_human: self.m_human.clone(),
            m_robot: self.m_robot.clone(),
            pc_human: self.pc_human(),
            pc_robot: self.pc_robot(),
        }
    }

    pub fn count(&self, label: RegionLabel) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    pub fn cloud(&self) -> PointCloud<f64> {
        PointCloud {
            points: self.points.clone(),
            pixels: Some(self.pixels.clone()),
        }
    }

    /// A plausible receiver arm across the object from the camera, camera
    /// frame.
    pub fn human_pose(&self) -> HumanJoints {
        let away = horizontal_dir(self.camera.azimuth_deg) * -1.0;
        let shoulder = self.camera.target + away * (0.55 * self.scale.max(1.0)) + Vec3::new(0.0, 0.0, 0.45);
        let elbow = shoulder + Vec3::new(0.0, 0.0, -0.30);
        let wrist = elbow + away * -0.05 + Vec3::new(0.0, 0.0, -0.245);
        HumanJoints {
            shoulder: self.camera.to_camera(&shoulder),
            elbow: self.camera.to_camera(&elbow),
            wrist: self.camera.to_camera(&wrist),
        }
    }

    /// Robot base on the camera side of the table, camera frame.
    pub fn robot_base(&self) -> Vec3<f64> {
        let toward = horizontal_dir(self.camera.azimuth_deg);
        self.camera
            .to_camera(&(self.camera.target + toward * 0.5 + Vec3::new(0.0, 0.0, -0.05)))
    }
}

fn horizontal_dir(azimuth_deg: f64) -> Vec3<f64> {
    let a = azimuth_deg.to_radians();
    Vec3::new(a.cos(), a.sin(), 0.0)
}

fn object_bounds(parts: &[Part]) -> ([f64; 3], [f64; 3]) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in parts {
        let (a, b) = match p.shape {
            Shape::Cuboid { min, max } => (min, max),
            Shape::Cylinder {
                base,
                axis,
                radius,
                length,
            } => {
                let mut a = [base[0] - radius, base[1] - radius, base[2] - radius];
                let mut b = [base[0] + radius, base[1] + radius, base[2] + radius];
                a[axis] = base[axis];
                b[axis] = base[axis] + length;
                (a, b)
            }
        };
        for i in 0..3 {
            lo[i] = lo[i].min(a[i]);
            hi[i] = hi[i].max(b[i]);
        }
    }
    (lo, hi)
}

/// Position, normal, label and pixel of a surface sample the camera sees.
type VisiblePoint = (Vec3<f64>, Vec3<f64>, RegionLabel, (u32, u32));

struct Splat {
    width: usize,
    height: usize,
}

impl Splat {
    /// 3×3 neighborhood of `(u, v)` clipped to the image.
    fn cells(&self, (u, v): (u32, u32)) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (u, v) = (u as i64, v as i64);
        (-1..=1)
            .flat_map(move |dy| (-1..=1).map(move |dx| (u + dx, v + dy)))
            .filter(|&(x, y)| x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height)
            .map(|(x, y)| (x as usize, y as usize))
    }
}

/// Deterministic scene for `kind`; `seed` fixes size jitter, camera and
/// surface samples.
pub fn generate_scene(kind: ObjectKind, seed: u64, density: f64) -> Result<SyntheticScene> {
    if !(density > 0.0 && density.is_finite()) {
        return Err(Error::param("density", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0B1E_C7D0_0000 ^ ((kind as u64) << 40));
    let scale = rng.random_range(0.92..1.08);
    let parts = model(kind);

    // Sampled at unit scale with density raised to match the scaled area.
    let mut surface = Vec::new();
    for (pi, part) in parts.iter().enumerate() {
        let mut raw = Vec::new();
        sample_shape(&part.shape, density * scale * scale, &mut rng, &mut raw);
        for (p, n) in raw {
            let buried = parts.iter().enumerate().any(|(qi, q)| qi != pi && contains(&q.shape, &p));
            if !buried {
                surface.push((p * scale, n, (part.label)(&p, &n)));
            }
        }
    }
    let sampled = surface.len();

    let (lo, hi) = object_bounds(&parts);
    let (lo, hi) = (lo.map(|v| v * scale), hi.map(|v| v * scale));
    let target = Vec3::new((lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, (lo[2] + hi[2]) / 2.0);
    let k = CameraIntrinsics::new(
        FOCAL_PX,
        FOCAL_PX,
        (IMAGE_WIDTH as f64 - 1.0) / 2.0,
        (IMAGE_HEIGHT as f64 - 1.0) / 2.0,
        IMAGE_WIDTH,
        IMAGE_HEIGHT,
    )?;
    let splat = Splat {
        width: IMAGE_WIDTH,
        height: IMAGE_HEIGHT,
    };

    for _ in 0..MAX_CAMERA_DRAWS {
        let elevation_deg = rng.random_range(42.0..52.0);
        let azimuth_deg = rng.random_range(0.0..360.0);
        let distance = rng.random_range(0.55..0.65);
        let e = f64::to_radians(elevation_deg);
        let position = target + (horizontal_dir(azimuth_deg) * e.cos() + Vec3::unit_z() * e.sin()) * distance;
        let camera = CameraPose {
            position,
            target,
            elevation_deg,
            azimuth_deg,
            distance,
        };
        let rot = camera.rotation();

        // Front-facing samples in the camera frame with their pixel.
        let mut front = Vec::new();
        for (p, n, l) in &surface {
            let pc = rot.apply(&(*p - position));
            let nc = rot.apply(n);
            if nc.dot(&pc) >= 0.0 {
                continue;
            }
            if let Some(px) = k.project_pixel(&pc) {
                front.push((pc, nc, *l, px));
            }
        }
        let mut zbuf = vec![f64::INFINITY; IMAGE_WIDTH * IMAGE_HEIGHT];
        for (pc, _, _, px) in &front {
            for (x, y) in splat.cells(*px) {
                let z = &mut zbuf[y * IMAGE_WIDTH + x];
                *z = z.min(pc.z);
            }
        }
        let visible: Vec<_> = front
            .into_iter()
            .filter(|(pc, _, _, (u, v))| pc.z <= zbuf[*v as usize * IMAGE_WIDTH + *u as usize] + OCCLUSION_TOL)
            .collect();
        let has = |l: RegionLabel| visible.iter().any(|(_, _, x, _)| *x == l);
        if !has(RegionLabel::HumanRegion) || !has(RegionLabel::RobotRegion) {
            continue;
        }
        return Ok(render(kind, seed, density, scale, camera, k, sampled, visible, &splat));
    }
    Err(Error::Empty("visible region samples"))
}

#[allow(clippy::too_many_arguments)]
fn render(
    kind: ObjectKind,
    seed: u64,
    density: f64,
    scale: f64,
    camera: CameraPose,
    k: CameraIntrinsics<f64>,
    sampled: usize,
    visible: Vec<VisiblePoint>,
    splat: &Splat,
) -> SyntheticScene {
    let (w, h) = (IMAGE_WIDTH, IMAGE_HEIGHT);
    let mut zbuf = vec![f64::INFINITY; w * h];
    let mut shade = vec![None; w * h];
    let mut object_mask = BinaryMask::new(w, h, false);
    let mut m_human = BinaryMask::new(w, h, false);
    let mut m_robot = BinaryMask::new(w, h, false);
    for (pc, nc, l, px) in &visible {
        let view = (*pc * -1.0).normalized().map_or(1.0, |d| d.dot(nc).abs());
        for (x, y) in splat.cells(*px) {
            let i = y * w + x;
            if pc.z < zbuf[i] {
                zbuf[i] = pc.z;
                shade[i] = Some((*l, view));
            }
            object_mask.set(x, y, true);
            match l {
                RegionLabel::HumanRegion => m_human.set(x, y, true),
                RegionLabel::RobotRegion => m_robot.set(x, y, true),
                RegionLabel::Neither => {}
            }
        }
    }
    let m_robot = m_robot.and_not(&m_human);

    let mut image = RgbImage::new(w, h, [205, 205, 200]);
    let mut depth = DepthImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if let Some((l, view)) = shade[i] {
                let f = 0.55 + 0.45 * view;
                let c = l.color().map(|c| (c as f64 * f).round().clamp(0.0, 255.0) as u8);
                image.put(x, y, c);
                depth.set(x, y, (zbuf[i] / DEPTH_SCALE).round().clamp(1.0, 65535.0) as u16);
            }
        }
    }
    let bbox = object_mask.bounding_box().expect("visible samples exist");
    let up = camera.rotation().apply(&Vec3::unit_z());

    let mut points = Vec::with_capacity(visible.len());
    let mut normals = Vec::with_capacity(visible.len());
    let mut labels = Vec::with_capacity(visible.len());
    let mut pixels = Vec::with_capacity(visible.len());
    for (p, n, l, px) in visible {
        points.push(p);
        normals.push(n);
        labels.push(l);
        pixels.push(px);
    }
    SyntheticScene {
        id: format!("{}-{seed}", kind.name()),
        kind,
        seed,
        density,
        scale,
        camera,
        intrinsics: k,
        up,
        points,
        normals,
        labels,
        pixels,
        sampled,
        image,
        depth,
        object_mask,
        m_human,
        m_robot,
        bbox,
    }
}

/// `k` grasps on seeded visible samples, approaching against the outward
/// normal with a seeded tangent x-axis.
pub fn sample_grasps(scene: &SyntheticScene, k: usize, seed: u64) -> Result<Vec<GraspCandidate<f64>>> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    if scene.points.is_empty() {
        return Err(Error::Empty("scene samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..k)
        .map(|id| {
            let i = rng.random_range(0..scene.points.len());
            let psi = rng.random_range(0.0..std::f64::consts::TAU);
            let z = scene.normals[i] * -1.0;
            let a = z.any_orthogonal();
            let b = z.cross(&a);
            let x = a * psi.cos() + b * psi.sin();
            let y = z.cross(&x);
            GraspCandidate::new(id, Rot3::from_columns(x, y, z), scene.points[i])
        })
        .collect())
}

/// Extra facts about a written scene that the manifest does not carry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthInfo {
    pub id: String,
    pub kind: ObjectKind,
    pub seed: u64,
    pub density: f64,
    pub scale: f64,
    pub camera: CameraPose,
    pub up: Vec3<f64>,
    pub robot_base: Vec3<f64>,
    pub grasp_seed: u64,
    pub grasps: usize,
    pub visible_points: usize,
    pub human_points: usize,
    pub robot_points: usize,
}

pub const MANIFEST_FILE: &str = "scene.json";

/// Writes image, depth, masks, grasps, labeled cloud, human pose, manifest
/// and `synth.json` into `dir`; returns the manifest path.
pub fn write_scene(scene: &SyntheticScene, dir: impl AsRef<Path>, grasps: &[GraspCandidate<f64>], grasp_seed: u64) -> Result<PathBuf> {
    let dir = dir.as_ref();
    write_image_ppm(&scene.image, dir.join("image.ppm"))?;
    write_depth_pgm16(&scene.depth, dir.join("depth.pgm"))?;
    write_mask_pgm(&scene.object_mask, dir.join("object_mask.pgm"))?;
    write_mask_pgm(&scene.m_human, dir.join("gt_human_mask.pgm"))?;
    write_mask_pgm(&scene.m_robot, dir.join("gt_robot_mask.pgm"))?;
    write_grasps_json(grasps, dir.join("grasps.json"))?;
    write_human_joints(&scene.human_pose(), dir.join("human_pose.json"))?;
    let labels: Vec<u8> = scene.labels.iter().map(|l| *l as u8).collect();
    write_ply(&scene.cloud(), Some(&labels), dir.join("points.ply"))?;

    let manifest = SceneManifest {
        image_path: "image.ppm".into(),
        depth_path: "depth.pgm".into(),
        depth_scale: DEPTH_SCALE,
        intrinsics: scene.intrinsics,
        bbox: scene.bbox,
        object_mask_path: "object_mask.pgm".into(),
        grasps_path: "grasps.json".into(),
        human_pose_path: Some("human_pose.json".into()),
        object_query: scene.kind.name().into(),
    };
    let path = dir.join(MANIFEST_FILE);
    write_manifest(&manifest, &path)?;

    let info = SynthInfo {
        id: scene.id.clone(),
        kind: scene.kind,
        seed: scene.seed,
        density: scene.density,
        scale: scene.scale,
        camera: scene.camera,
        up: scene.up,
        robot_base: scene.robot_base(),
        grasp_seed,
        grasps: grasps.len(),
        visible_points: scene.points.len(),
        human_points: scene.count(RegionLabel::HumanRegion),
        robot_points: scene.count(RegionLabel::RobotRegion),
    };
    let mut bytes = serde_json::to_vec_pretty(&info).expect("info serializes");
    bytes.push(b'\n');
    write_bytes(dir.join("synth.json"), &bytes)?;
    Ok(path)
}
