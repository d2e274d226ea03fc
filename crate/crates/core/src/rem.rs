//! RAM extraction: interpret a declarative per-cartridge decoder spec against
//! the 128 RAM bytes, and keep object identities stable across ticks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assign::{self, Edge};
use crate::console::RamState;
use crate::error::{Error, Result};
use crate::games::font;
use crate::games::{CategoryInfo, RamMap};
use crate::model::{BBox, Category, GameObject, ObjectList, Palette};

fn full_mask() -> u8 {
    0xFF
}

/// How one coordinate is recovered from RAM.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coord {
    Const {
        value: i32,
    },
    /// `(ram[addr] & mask) + offset`: direct and direct+offset encodings.
    Byte {
        addr: u8,
        #[serde(default = "full_mask")]
        mask: u8,
        #[serde(default)]
        offset: i32,
    },
    /// `table[ram[index_addr] & index_mask] + fine_scale * ram[fine_addr] + offset`.
    Categorical {
        index_addr: u8,
        #[serde(default = "full_mask")]
        index_mask: u8,
        table: Vec<i32>,
        #[serde(default)]
        fine_addr: Option<u8>,
        #[serde(default)]
        fine_scale: i32,
        #[serde(default)]
        offset: i32,
    },
}

impl Coord {
    fn eval(&self, ram: &RamState) -> Option<i32> {
        match self {
            Coord::Const { value } => Some(*value),
            Coord::Byte { addr, mask, offset } => Some(i32::from(ram[*addr] & mask) + offset),
            Coord::Categorical {
                index_addr,
                index_mask,
                table,
                fine_addr,
                fine_scale,
                offset,
            } => {
                let base = *table.get(usize::from(ram[*index_addr] & index_mask))?;
                let fine = fine_addr.map_or(0, |a| i32::from(ram[a]));
                Some(base + fine_scale * fine + offset)
            }
        }
    }

    fn addrs(&self) -> Vec<u8> {
        match self {
            Coord::Const { .. } => vec![],
            Coord::Byte { addr, .. } => vec![*addr],
            Coord::Categorical {
                index_addr,
                fine_addr,
                ..
            } => std::iter::once(*index_addr).chain(*fine_addr).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Presence {
    Always,
    FlagBit { addr: u8, bit: u8 },
    NonZero { addr: u8 },
}

impl Presence {
    fn holds(&self, ram: &RamState) -> bool {
        match self {
            Presence::Always => true,
            Presence::FlagBit { addr, bit } => ram[*addr] & (1 << bit) != 0,
            Presence::NonZero { addr } => ram[*addr] != 0,
        }
    }

    fn addrs(&self) -> Vec<u8> {
        match self {
            Presence::Always => vec![],
            Presence::FlagBit { addr, .. } | Presence::NonZero { addr } => vec![*addr],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SizeRule {
    Fixed { w: i32, h: i32 },
    /// Width `scale * ram[addr]`, fixed height.
    ByteScaled { addr: u8, scale: i32, h: i32 },
    /// Width of the value's rendered digit group.
    Digits,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueRule {
    Byte { addr: u8 },
    Word { lo: u8, hi: u8 },
}

impl ValueRule {
    fn eval(&self, ram: &RamState) -> i64 {
        match self {
            ValueRule::Byte { addr } => i64::from(ram[*addr]),
            ValueRule::Word { lo, hi } => i64::from(ram[*lo]) | (i64::from(ram[*hi]) << 8),
        }
    }

    fn addrs(&self) -> Vec<u8> {
        match self {
            ValueRule::Byte { addr } => vec![*addr],
            ValueRule::Word { lo, hi } => vec![*lo, *hi],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub x: Coord,
    pub y: Coord,
    pub presence: Presence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<SizeRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layout {
    /// Explicit instances, each with its own coordinate and presence rules.
    Instances { items: Vec<Instance> },
    /// Bit `col` of `ram[rows_addr + row]` marks a live cell at
    /// `(anchor_x + col * stride_x, anchor_y + row * stride_y)`.
    Bitmap {
        rows_addr: u8,
        rows: u8,
        cols: u8,
        anchor_x: u8,
        anchor_y: u8,
        stride_x: i32,
        stride_y: i32,
    },
}

impl Layout {
    pub fn slots(&self) -> usize {
        match self {
            Layout::Instances { items } => items.len(),
            Layout::Bitmap { rows, cols, .. } => usize::from(*rows) * usize::from(*cols),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryDecoder {
    pub category: Category,
    pub hud: bool,
    pub color: u8,
    pub layout: Layout,
    pub size: SizeRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<ValueRule>,
}

impl CategoryDecoder {
    fn addrs(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match &self.layout {
            Layout::Instances { items } => {
                for it in items {
                    out.extend(it.x.addrs());
                    out.extend(it.y.addrs());
                    out.extend(it.presence.addrs());
                    if let Some(SizeRule::ByteScaled { addr, .. }) = &it.size {
                        out.push(*addr);
                    }
                }
            }
            Layout::Bitmap {
                rows_addr,
                rows,
                anchor_x,
                anchor_y,
                ..
            } => {
                out.extend((0..*rows).map(|r| rows_addr.saturating_add(r)));
                out.push(*anchor_x);
                out.push(*anchor_y);
            }
        }
        if let SizeRule::ByteScaled { addr, .. } = &self.size {
            out.push(*addr);
        }
        if let Some(v) = &self.value {
            out.extend(v.addrs());
        }
        out
    }
}

/// Per-cartridge REM description, serializable next to the RAM map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderSpec {
    pub game: String,
    pub entries: Vec<CategoryDecoder>,
    #[serde(skip, default = "Palette::console")]
    palette: Palette,
}

impl DecoderSpec {
    pub fn new(game: &str, entries: Vec<CategoryDecoder>) -> Self {
        DecoderSpec {
            game: game.to_string(),
            entries,
            palette: Palette::console(),
        }
    }

    /// Parse and validate against a cartridge's categories and RAM map.
    pub fn from_json(text: &str, categories: &[CategoryInfo], ram_map: &RamMap) -> Result<Self> {
        let spec: DecoderSpec = serde_json::from_str(text)?;
        spec.validate(categories, ram_map)?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("decoder specs serialize")
    }

    /// Load-time checks: every category decoded exactly once, every referenced
    /// byte inside RAM and documented by the map.
    pub fn validate(&self, categories: &[CategoryInfo], ram_map: &RamMap) -> Result<()> {
        for c in categories {
            let n = self.entries.iter().filter(|e| e.category == c.name).count();
            if n != 1 {
                return Err(Error::Config(format!(
                    "category {} has {n} decoder entries, expected exactly 1",
                    c.name
                )));
            }
        }
        for e in &self.entries {
            if !categories.iter().any(|c| e.category == c.name) {
                return Err(Error::Config(format!("decoder for undeclared category {}", e.category)));
            }
            if self.palette.color(e.color).is_none() {
                return Err(Error::Config(format!("{}: color index {} not in palette", e.category, e.color)));
            }
            match &e.layout {
                Layout::Bitmap { rows, cols, .. } if *rows == 0 || *rows > 16 || *cols == 0 || *cols > 8 => {
                    return Err(Error::Config(format!("{}: bitmap must be 1..=16 rows x 1..=8 columns", e.category)));
                }
                Layout::Instances { items } => {
                    for it in items {
                        for c in [&it.x, &it.y] {
                            if let Coord::Categorical { table, .. } = c {
                                if table.is_empty() {
                                    return Err(Error::Config(format!("{}: empty categorical table", e.category)));
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
            for addr in e.addrs() {
                if usize::from(addr) >= RamState::LEN {
                    return Err(Error::Config(format!("{}: byte {addr} outside RAM", e.category)));
                }
                if !ram_map.documents(addr) {
                    return Err(Error::Config(format!(
                        "{}: byte {addr} is not in the {} RAM map",
                        e.category, ram_map.game
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn slot_count(&self) -> usize {
        self.entries.iter().map(|e| e.layout.slots()).sum()
    }
}

fn decode_slots(ram: &RamState, spec: &DecoderSpec, mut emit: impl FnMut(Option<GameObject>)) {
    for e in &spec.entries {
        let rgb = spec.palette.color(e.color).unwrap_or([0, 0, 0]);
        let value = e.value.as_ref().map(|v| v.eval(ram));
        let size_of = |rule: &SizeRule| -> (i32, i32) {
            match rule {
                SizeRule::Fixed { w, h } => (*w, *h),
                SizeRule::ByteScaled { addr, scale, h } => (scale * i32::from(ram[*addr]), *h),
                SizeRule::Digits => {
                    let b = font::number_box(0, 0, value.unwrap_or(0));
                    (b.w, b.h)
                }
            }
        };
        let make = |bbox: BBox| -> Option<GameObject> {
            let clipped = bbox.clip_to_frame()?;
            let mut o = GameObject::new(e.category.clone(), clipped, rgb, e.hud);
            o.value = value;
            Some(o)
        };
        match &e.layout {
            Layout::Instances { items } => {
                for it in items {
                    if !it.presence.holds(ram) {
                        emit(None);
                        continue;
                    }
                    let (w, h) = size_of(it.size.as_ref().unwrap_or(&e.size));
                    let obj = match (it.x.eval(ram), it.y.eval(ram)) {
                        (Some(x), Some(y)) if w > 0 && h > 0 => make(BBox::new(x, y, w, h)),
                        _ => None,
                    };
                    emit(obj);
                }
            }
            Layout::Bitmap {
                rows_addr,
                rows,
                cols,
                anchor_x,
                anchor_y,
                stride_x,
                stride_y,
            } => {
                let (w, h) = size_of(&e.size);
                let ax = i32::from(ram[*anchor_x]);
                let ay = i32::from(ram[*anchor_y]);
                for r in 0..*rows {
                    let bits = ram[rows_addr + r];
                    for c in 0..*cols {
                        if bits & (1 << c) == 0 {
                            emit(None);
                            continue;
                        }
                        let x = ax + i32::from(c) * stride_x;
                        let y = ay + i32::from(r) * stride_y;
                        emit(make(BBox::new(x, y, w, h)));
                    }
                }
            }
        }
    }
}

/// Decode every object whose presence rule holds. Objects decoded partly
/// off-frame are clipped; fully off-frame ones are omitted.
pub fn extract_rem(ram: &RamState, spec: &DecoderSpec) -> Vec<GameObject> {
    let mut out = Vec::with_capacity(16);
    decode_slots(ram, spec, |o| {
        if let Some(o) = o {
            out.push(o);
        }
    });
    out
}

/// Like [`extract_rem`] but with one entry per canonical slot.
pub fn extract_rem_slots(ram: &RamState, spec: &DecoderSpec) -> Vec<Option<GameObject>> {
    let mut out = Vec::with_capacity(spec.slot_count());
    decode_slots(ram, spec, |o| out.push(o));
    out
}

pub const TRACK_GATE_PX: i32 = 12;
pub const TRACK_RETIRE_TICKS: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Track {
    pub id: u32,
    pub bbox: BBox,
    pub missed: u32,
}

/// Per-episode identities. Ids are never reused.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackState {
    tracks: BTreeMap<String, Vec<Track>>,
    next_id: u32,
}

impl TrackState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn live_tracks(&self, category: &str) -> &[Track] {
        self.tracks.get(category).map_or(&[], Vec::as_slice)
    }

    pub fn issued_ids(&self) -> u32 {
        self.next_id
    }

    /// Assign track ids to `current` by nearest-center matching against the
    /// previous boxes of each category (12 px gate).
    pub fn track(&mut self, current: &ObjectList) -> ObjectList {
        let mut out = current.clone();
        let mut by_cat: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, o) in out.objects.iter().enumerate() {
            by_cat.entry(o.category.as_str().to_string()).or_default().push(i);
        }
        for (cat, tracks) in self.tracks.iter_mut() {
            if !by_cat.contains_key(cat) {
                for t in tracks.iter_mut() {
                    t.missed += 1;
                }
                tracks.retain(|t| t.missed < TRACK_RETIRE_TICKS);
            }
        }
        for (cat, idxs) in by_cat {
            let tracks = self.tracks.entry(cat).or_default();
            let gate = assign::gate_sq(TRACK_GATE_PX);
            let mut edges = Vec::new();
            for (ti, t) in tracks.iter().enumerate() {
                for (ci, &oi) in idxs.iter().enumerate() {
                    let d = assign::center_dist_sq(t.bbox.center2(), out.objects[oi].bbox().center2());
                    if d <= gate {
                        edges.push(Edge { left: ti, right: ci, dist_sq: d });
                    }
                }
            }
            edges.sort_by_key(|e| (e.dist_sq, e.left, e.right));
            let pairs = assign::match_edges(tracks.len(), idxs.len(), &edges);
            let mut matched_track = vec![false; tracks.len()];
            let mut matched_obj = vec![false; idxs.len()];
            for (ti, ci) in pairs {
                matched_track[ti] = true;
                matched_obj[ci] = true;
                let o = &mut out.objects[idxs[ci]];
                tracks[ti].bbox = o.bbox();
                tracks[ti].missed = 0;
                o.track_id = Some(tracks[ti].id);
            }
            for (ti, t) in tracks.iter_mut().enumerate() {
                if !matched_track[ti] {
                    t.missed += 1;
                }
            }
            let mut keep = matched_track.iter();
            tracks.retain(|t| *keep.next().unwrap() || t.missed < TRACK_RETIRE_TICKS);
            for (ci, &oi) in idxs.iter().enumerate() {
                if !matched_obj[ci] {
                    let o = &mut out.objects[oi];
                    let id = self.next_id;
                    self.next_id += 1;
                    o.track_id = Some(id);
                    tracks.push(Track { id, bbox: o.bbox(), missed: 0 });
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Category;

    fn ball(x: i32, y: i32) -> GameObject {
        GameObject::new(Category::from_static("Ball"), BBox::new(x, y, 2, 4), [255; 3], false)
    }

    #[test]
    fn static_scene_keeps_ids() {
        let mut ts = TrackState::new();
        let scene = ObjectList::new(0, vec![ball(10, 10), ball(50, 50)]);
        let a = ts.track(&scene);
        let b = ts.track(&scene);
        let ids = |l: &ObjectList| l.objects.iter().map(|o| o.track_id.unwrap()).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
        assert_eq!(ids(&a), vec![0, 1]);
    }

    #[test]
    fn moving_ball_keeps_one_id() {
        let mut ts = TrackState::new();
        for t in 0..100 {
            let l = ts.track(&ObjectList::new(t, vec![ball(20 + t as i32, 30 + (t as i32 % 7))]));
            assert_eq!(l.objects[0].track_id, Some(0));
        }
        assert_eq!(ts.issued_ids(), 1);
    }

    #[test]
    fn absent_objects_retire_after_eight_ticks() {
        let mut ts = TrackState::new();
        ts.track(&ObjectList::new(0, vec![ball(10, 10)]));
        for _ in 0..7 {
            ts.track(&ObjectList::new(0, vec![]));
        }
        // Seventh absence: still live, reappearance keeps the id.
        let back = ts.track(&ObjectList::new(0, vec![ball(12, 10)]));
        assert_eq!(back.objects[0].track_id, Some(0));
        for _ in 0..8 {
            ts.track(&ObjectList::new(0, vec![]));
        }
        let fresh = ts.track(&ObjectList::new(0, vec![ball(12, 10)]));
        assert_eq!(fresh.objects[0].track_id, Some(1));
    }

    #[test]
    fn far_jump_gets_fresh_id() {
        let mut ts = TrackState::new();
        ts.track(&ObjectList::new(0, vec![ball(10, 10)]));
        let l = ts.track(&ObjectList::new(1, vec![ball(40, 10)]));
        assert_eq!(l.objects[0].track_id, Some(1));
    }
}
