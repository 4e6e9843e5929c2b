//! Handover region grounding: an N×N labeled grid over the object's bounding
//! box, the chat prompt that asks the model for human and robot grid cells,
//! parsing of its reply, and assembly of the clipped region masks.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{filter_cloud_by_mask, PointCloud};
use crate::io::annotated_png_bytes;
use crate::raster::{BBox, BinaryMask, RgbImage};
use crate::scalar::Real;
use crate::vlm::{ChatMessage, VlmClient};

/// Grid size used when none is configured.
pub const DEFAULT_GRID_N: usize = 5;
/// Largest number of indices accepted per region in a reply.
pub const MAX_REPLY_INDICES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCell {
    /// 1-based, row-major.
    pub label: usize,
    pub rect: BBox,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bbox: BBox,
    pub n: usize,
    pub cells: Vec<GridCell>,
}

impl GridSpec {
    pub fn cell(&self, label: usize) -> Option<&GridCell> {
        label.checked_sub(1).and_then(|i| self.cells.get(i))
    }

    pub fn max_label(&self) -> usize {
        self.n * self.n
    }
}

/// Splits `bbox` into `n × n` cells of `⌊w/n⌋ × ⌊h/n⌋`; the last column and
/// row absorb the remainder.
pub fn make_grid(bbox: BBox, n: usize) -> Result<GridSpec> {
    if n == 0 {
        return Err(Error::param("n", "grid size must be at least 1"));
    }
    if bbox.w < n || bbox.h < n {
        return Err(Error::param(
            "bbox",
            format!("{}x{} box cannot hold a {n}x{n} grid", bbox.w, bbox.h),
        ));
    }
    let (cw, ch) = (bbox.w / n, bbox.h / n);
    let span = |i: usize, base: usize, total: usize| {
        let start = i * base;
        let len = if i + 1 == n { total - start } else { base };
        (start, len)
    };
    let mut cells = Vec::with_capacity(n * n);
    for row in 0..n {
        let (oy, h) = span(row, ch, bbox.h);
        for col in 0..n {
            let (ox, w) = span(col, cw, bbox.w);
            cells.push(GridCell {
                label: row * n + col + 1,
                rect: BBox::new(bbox.x + ox, bbox.y + oy, w, h),
            });
        }
    }
    Ok(GridSpec { bbox, n, cells })
}

pub const SYSTEM_LINE: &str = "You are an intelligent service robot.";

/// The two user messages of the grounding prompt; the annotated image rides on
/// the second one.
pub fn build_prompt(object_query: &str, n: usize) -> Result<Vec<ChatMessage>> {
    if n == 0 {
        return Err(Error::param("n", "grid size must be at least 1"));
    }
    let object = object_query.trim();
    if object.is_empty() {
        return Err(Error::param("object_query", "must not be empty"));
    }
    Ok(vec![
        ChatMessage::user(SYSTEM_LINE),
        ChatMessage::user(format!(
            "When you need to hand over this {object} to people, which region would people grasp? \
             And which region would you grasp? Name 3 indices in a format like: \
             human:[id_1, id_2, id_3], robot:[id_1, id_2, id_3] indicating human and robot grasp regions."
        ))
        .with_image(),
    ])
}

/// Follow-up appended when a reply cannot be used.
pub fn correction_message(previous_reply: &str, problem: &str, n: usize) -> ChatMessage {
    ChatMessage::user(format!(
        "Your previous answer was: {previous_reply:?}. It could not be used because {problem}. \
         Answer again with grid indices between 1 and {} that cover the object, \
         strictly in the format human:[id_1, id_2, id_3], robot:[id_1, id_2, id_3].",
        n * n
    ))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionIndices {
    pub human: BTreeSet<usize>,
    pub robot: BTreeSet<usize>,
}

impl RegionIndices {
    /// Reply-format rendering, e.g. `human:[7, 12, 17], robot:[3, 4, 5]`.
    pub fn to_reply(&self) -> String {
        let join = |s: &BTreeSet<usize>| s.iter().map(usize::to_string).collect::<Vec<_>>().join(", ");
        format!("human:[{}], robot:[{}]", join(&self.human), join(&self.robot))
    }
}

fn region_regex(name: &str) -> &'static Regex {
    static HUMAN: OnceLock<Regex> = OnceLock::new();
    static ROBOT: OnceLock<Regex> = OnceLock::new();
    let cell = if name == "human" { &HUMAN } else { &ROBOT };
    cell.get_or_init(|| Regex::new(&format!(r#"(?i)\b{name}\b[\s*_"'`]*:[\s*_"'`]*\[([^\[\]]*)\]"#)).expect("valid regex"))
}

fn parse_list(text: &str, name: &'static str, n: usize) -> Result<BTreeSet<usize>> {
    let caps = region_regex(name)
        .captures(text)
        .ok_or_else(|| Error::ReplyParse(format!("no {name}:[...] list found")))?;
    let body = caps.get(1).map_or("", |m| m.as_str());
    let mut raw = Vec::new();
    for tok in body.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
        let v: i64 = tok
            .parse()
            .map_err(|_| Error::ReplyParse(format!("{name} list entry {tok:?} is not an integer")))?;
        raw.push(v);
    }
    if raw.is_empty() {
        return Err(Error::ReplyParse(format!("{name} list is empty")));
    }
    if raw.len() > MAX_REPLY_INDICES {
        return Err(Error::ReplyParse(format!(
            "{name} list has {} entries, at most {MAX_REPLY_INDICES} accepted",
            raw.len()
        )));
    }
    let max = n * n;
    raw.into_iter()
        .map(|v| {
            if v >= 1 && (v as u64) <= max as u64 {
                Ok(v as usize)
            } else {
                Err(Error::IndexOutOfRange { index: v, max })
            }
        })
        .collect()
}

/// Extracts the `human:[...]` and `robot:[...]` lists, ignoring case and
/// whitespace; duplicates collapse.
pub fn parse_region_reply(text: &str, n: usize) -> Result<RegionIndices> {
    Ok(RegionIndices {
        human: parse_list(text, "human", n)?,
        robot: parse_list(text, "robot", n)?,
    })
}

pub struct RegionMaskSet<T> {
    pub m_human: BinaryMask,
    pub m_robot: BinaryMask,
    pub pc_human: PointCloud<T>,
    pub pc_robot: PointCloud<T>,
}

impl<T: Real> RegionMaskSet<T> {
    /// Region set built directly from clouds (masks left empty), for callers
    /// that already hold region point sets.
    pub fn from_clouds(pc_human: PointCloud<T>, pc_robot: PointCloud<T>) -> Self {
        Self {
            m_human: BinaryMask::new(0, 0, false),
            m_robot: BinaryMask::new(0, 0, false),
            pc_human,
            pc_robot,
        }
    }
}

impl<T: Clone> Clone for RegionMaskSet<T> {
    fn clone(&self) -> Self {
        Self {
            m_human: self.m_human.clone(),
            m_robot: self.m_robot.clone(),
            pc_human: self.pc_human.clone(),
            pc_robot: self.pc_robot.clone(),
        }
    }
}

impl<T: std::fmt::Debug> std::fmt::Debug for RegionMaskSet<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RegionMaskSet")
            .field("m_human", &self.m_human.data.iter().filter(|b| **b).count())
            .field("m_robot", &self.m_robot.data.iter().filter(|b| **b).count())
            .field("pc_human", &self.pc_human.points.len())
            .field("pc_robot", &self.pc_robot.points.len())
            .finish()
    }
}

/// Union of the named cells as a mask of the given size.
pub fn cells_mask(grid: &GridSpec, labels: &BTreeSet<usize>, width: usize, height: usize) -> Result<BinaryMask> {
    let mut mask = BinaryMask::new(width, height, false);
    for &label in labels {
        let cell = grid.cell(label).ok_or(Error::IndexOutOfRange {
            index: label as i64,
            max: grid.max_label(),
        })?;
        let r = cell.rect;
        if !r.fits_in(width, height) {
            return Err(Error::DimensionMismatch(format!(
                "grid cell {label} extends past the {width}x{height} mask"
            )));
        }
        for y in r.y..r.y + r.h {
            for x in r.x..r.x + r.w {
                mask.set(x, y, true);
            }
        }
    }
    Ok(mask)
}

/// Clips the named cells to the object mask. The human region keeps any
/// pixels both regions claim.
pub fn assemble_masks<T: Real>(
    grid: &GridSpec,
    idx: &RegionIndices,
    object_mask: &BinaryMask,
    cloud: &PointCloud<T>,
) -> Result<RegionMaskSet<T>> {
    let (w, h) = (object_mask.width, object_mask.height);
    let m_human = cells_mask(grid, &idx.human, w, h)?.and(object_mask);
    let m_robot = cells_mask(grid, &idx.robot, w, h)?.and(object_mask).and_not(&m_human);
    if m_human.is_empty() {
        return Err(Error::RegionEmpty { region: "human" });
    }
    if m_robot.is_empty() {
        return Err(Error::RegionEmpty { region: "robot" });
    }
    let pc_human = filter_cloud_by_mask(cloud, &m_human)?;
    let pc_robot = filter_cloud_by_mask(cloud, &m_robot)?;
    Ok(RegionMaskSet {
        m_human,
        m_robot,
        pc_human,
        pc_robot,
    })
}

/// Everything produced by one grounding run.
#[derive(Debug)]
pub struct GroundingOutcome<T> {
    pub grid: GridSpec,
    pub annotated_png: Vec<u8>,
    /// Every raw model reply, in order (two when a re-prompt happened).
    pub replies: Vec<String>,
    pub indices: RegionIndices,
    pub masks: RegionMaskSet<T>,
}

fn is_retryable(e: &Error) -> bool {
    matches!(e, Error::ReplyParse(_) | Error::IndexOutOfRange { .. } | Error::RegionEmpty { .. })
}

/// Runs the prompt against `client`, re-prompting exactly once with a
/// correction when the reply cannot be parsed or covers no object pixels.
pub fn ground_regions<T: Real>(
    client: &mut dyn VlmClient,
    image: &RgbImage,
    bbox: BBox,
    n: usize,
    object_query: &str,
    object_mask: &BinaryMask,
    cloud: &PointCloud<T>,
) -> Result<GroundingOutcome<T>> {
    let grid = make_grid(bbox, n)?;
    let annotated_png = annotated_png_bytes(image, &grid);
    let mut messages = build_prompt(object_query, n)?;
    let mut replies = Vec::new();

    let attempt = |reply: &str| -> Result<(RegionIndices, RegionMaskSet<T>)> {
        let indices = parse_region_reply(reply, n)?;
        let masks = assemble_masks(&grid, &indices, object_mask, cloud)?;
        Ok((indices, masks))
    };

    let first = client.complete(&messages, &annotated_png)?;
    replies.push(first.clone());
    let (indices, masks) = match attempt(&first) {
        Ok(v) => v,
        Err(e) if is_retryable(&e) => {
            messages.push(correction_message(&first, &e.to_string(), n));
            let second = client.complete(&messages, &annotated_png)?;
            replies.push(second.clone());
            attempt(&second)?
        }
        Err(e) => return Err(e),
    };
    Ok(GroundingOutcome {
        grid,
        annotated_png,
        replies,
        indices,
        masks,
    })
}
