//! Vision extraction: palette-color filtering, 8-connected components and
//! priority-ordered pixel claiming over rendered frames.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::font;
use crate::games::CategoryInfo;
use crate::model::{BBox, Category, Frame, GameObject, Palette, FRAME_HEIGHT, FRAME_PIXELS, FRAME_WIDTH};

/// Set of palette indices, one bit per index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ColorSet(u16);

impl ColorSet {
    pub fn of(indices: &[u8]) -> Self {
        ColorSet(indices.iter().fold(0, |m, &i| m | (1u16 << (i & 15))))
    }

    #[inline]
    pub fn contains(&self, index: u8) -> bool {
        index < 16 && self.0 & (1 << index) != 0
    }

    pub fn intersects(&self, other: &ColorSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn indices(&self) -> Vec<u8> {
        (0..16).filter(|&i| self.contains(i)).collect()
    }
}

impl Serialize for ColorSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.indices().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ColorSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<u8>::deserialize(d)?;
        if let Some(bad) = v.iter().find(|&&i| i >= 16) {
            return Err(serde::de::Error::custom(format!("palette index {bad} out of range")));
        }
        Ok(ColorSet::of(&v))
    }
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
}

impl Region {
    pub const FULL: Region = Region {
        x0: 0,
        y0: 0,
        x1: FRAME_WIDTH as i32,
        y1: FRAME_HEIGHT as i32,
    };

    pub const fn new(x0: i32, y0: i32, x1: i32, y1: i32) -> Self {
        Region { x0, y0, x1, y1 }
    }

    fn clamped(&self) -> Region {
        Region {
            x0: self.x0.clamp(0, FRAME_WIDTH as i32),
            y0: self.y0.clamp(0, FRAME_HEIGHT as i32),
            x1: self.x1.clamp(0, FRAME_WIDTH as i32),
            y1: self.y1.clamp(0, FRAME_HEIGHT as i32),
        }
    }

    pub fn disjoint(&self, other: &Region) -> bool {
        self.x1 <= other.x0 || other.x1 <= self.x0 || self.y1 <= other.y0 || other.y1 <= self.y0
    }

    #[inline]
    fn contains(&self, x: i32, y: i32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisionRule {
    pub category: Category,
    pub colors: ColorSet,
    pub region: Region,
    pub min_size: (i32, i32),
    pub max_size: (i32, i32),
    pub hud: bool,
    /// Lower ranks claim pixels first.
    pub priority: u8,
    /// Union all accepted components into a single object (digit groups).
    #[serde(default)]
    pub merge: bool,
    /// Read the merged components as font digits into `value`.
    #[serde(default)]
    pub digits: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisionSpec {
    pub game: String,
    pub rules: Vec<VisionRule>,
}

impl VisionSpec {
    pub fn from_json(text: &str, categories: &[CategoryInfo]) -> Result<Self> {
        let spec: VisionSpec = serde_json::from_str(text)?;
        spec.validate(categories)?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("vision specs serialize")
    }

    pub fn validate(&self, categories: &[CategoryInfo]) -> Result<()> {
        for c in categories {
            if !self.rules.iter().any(|r| r.category == c.name) {
                return Err(Error::Config(format!("no vision rule for category {}", c.name)));
            }
        }
        for (i, a) in self.rules.iter().enumerate() {
            if !categories.iter().any(|c| a.category == c.name) {
                return Err(Error::Config(format!("vision rule for undeclared category {}", a.category)));
            }
            if a.min_size.0 < 1 || a.min_size.1 < 1 || a.min_size.0 > a.max_size.0 || a.min_size.1 > a.max_size.1 {
                return Err(Error::Config(format!("{}: inconsistent size bounds", a.category)));
            }
            for b in &self.rules[..i] {
                if a.priority == b.priority && a.colors.intersects(&b.colors) && !a.region.disjoint(&b.region) {
                    return Err(Error::Config(format!(
                        "rules {} and {} share colors, region and priority",
                        b.category, a.category
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Reusable scratch buffers for component labelling.
struct Scratch {
    claimed: Vec<bool>,
    visited: Vec<u32>,
    stamp: u32,
    stack: Vec<u32>,
    pixels: Vec<u32>,
}

impl Scratch {
    fn new() -> Self {
        Scratch {
            claimed: vec![false; FRAME_PIXELS],
            visited: vec![0; FRAME_PIXELS],
            stamp: 0,
            stack: Vec::with_capacity(256),
            pixels: Vec::with_capacity(256),
        }
    }
}

struct Component {
    bbox: BBox,
    first: u32,
    pixels: std::ops::Range<usize>,
}

/// Label maximal 8-connected groups of unclaimed `colors` pixels inside `region`.
/// Pixel lists are appended to `scratch.pixels`.
fn label(frame: &Frame, colors: ColorSet, region: Region, scratch: &mut Scratch) -> Vec<Component> {
    let r = region.clamped();
    scratch.stamp += 1;
    let stamp = scratch.stamp;
    let px = frame.pixels();
    let mut comps = Vec::new();
    for y in r.y0..r.y1 {
        for x in r.x0..r.x1 {
            let i = (y as usize) * FRAME_WIDTH + x as usize;
            if scratch.visited[i] == stamp || scratch.claimed[i] || !colors.contains(px[i]) {
                continue;
            }
            scratch.visited[i] = stamp;
            scratch.stack.push(i as u32);
            let start = scratch.pixels.len();
            let (mut x0, mut y0, mut x1, mut y1) = (x, y, x, y);
            while let Some(p) = scratch.stack.pop() {
                scratch.pixels.push(p);
                let (cx, cy) = ((p as usize % FRAME_WIDTH) as i32, (p as usize / FRAME_WIDTH) as i32);
                x0 = x0.min(cx);
                x1 = x1.max(cx);
                y0 = y0.min(cy);
                y1 = y1.max(cy);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (cx + dx, cy + dy);
                        if (dx == 0 && dy == 0) || !r.contains(nx, ny) {
                            continue;
                        }
                        let j = ny as usize * FRAME_WIDTH + nx as usize;
                        if scratch.visited[j] != stamp && !scratch.claimed[j] && colors.contains(px[j]) {
                            scratch.visited[j] = stamp;
                            scratch.stack.push(j as u32);
                        }
                    }
                }
            }
            comps.push(Component {
                bbox: BBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1),
                first: i as u32,
                pixels: start..scratch.pixels.len(),
            });
        }
    }
    comps
}

/// Bounding boxes of 8-connected pixel groups with indices in `colors`,
/// restricted to `region`, ordered by ascending y then x.
pub fn find_components(frame: &Frame, colors: ColorSet, region: Region) -> Vec<BBox> {
    let mut scratch = Scratch::new();
    let mut boxes: Vec<BBox> = label(frame, colors, region, &mut scratch)
        .into_iter()
        .map(|c| c.bbox)
        .collect();
    boxes.sort_by_key(|b| (b.y, b.x));
    boxes
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VemOutput {
    pub objects: Vec<GameObject>,
    /// Components that matched a rule's colors but failed its size bounds.
    pub dropped: usize,
}

fn size_ok(rule: &VisionRule, b: &BBox) -> bool {
    b.w >= rule.min_size.0 && b.h >= rule.min_size.1 && b.w <= rule.max_size.0 && b.h <= rule.max_size.1
}

fn read_number(frame: &Frame, colors: ColorSet, comps: &[&Component]) -> Option<i64> {
    let mut cells: Vec<BBox> = comps.iter().map(|c| c.bbox).collect();
    cells.sort_by_key(|b| b.x);
    let mut value: i64 = 0;
    for b in cells {
        if b.w != font::DIGIT_W || b.h != font::DIGIT_H {
            return None;
        }
        let d = font::read_digit(|dx, dy| colors.contains(frame.get((b.x + dx) as usize, (b.y + dy) as usize)))?;
        value = value.checked_mul(10)?.checked_add(i64::from(d))?;
    }
    Some(value)
}

pub fn extract_vem_with_diagnostics(frame: &Frame, spec: &VisionSpec, palette: &Palette) -> VemOutput {
    let mut scratch = Scratch::new();
    let mut order: Vec<usize> = (0..spec.rules.len()).collect();
    order.sort_by_key(|&i| spec.rules[i].priority);
    let mut out = VemOutput::default();
    for ri in order {
        let rule = &spec.rules[ri];
        scratch.pixels.clear();
        let comps = label(frame, rule.colors, rule.region, &mut scratch);
        let rgb_of = |c: &Component| palette.color(frame.pixels()[c.first as usize]).unwrap_or([0, 0, 0]);
        if rule.merge {
            if comps.is_empty() {
                continue;
            }
            let bbox = comps.iter().skip(1).fold(comps[0].bbox, |acc, c| acc.union(&c.bbox));
            if !size_ok(rule, &bbox) {
                out.dropped += comps.len();
                continue;
            }
            for c in &comps {
                for &p in &scratch.pixels[c.pixels.clone()] {
                    scratch.claimed[p as usize] = true;
                }
            }
            let mut o = GameObject::new(rule.category.clone(), bbox, rgb_of(&comps[0]), rule.hud);
            if rule.digits {
                let refs: Vec<&Component> = comps.iter().collect();
                o.value = read_number(frame, rule.colors, &refs);
            }
            out.objects.push(o);
        } else {
            for c in &comps {
                if !size_ok(rule, &c.bbox) {
                    out.dropped += 1;
                    continue;
                }
                for &p in &scratch.pixels[c.pixels.clone()] {
                    scratch.claimed[p as usize] = true;
                }
                out.objects.push(GameObject::new(rule.category.clone(), c.bbox, rgb_of(c), rule.hud));
            }
        }
    }
    out
}

pub fn extract_vem(frame: &Frame, spec: &VisionSpec, palette: &Palette) -> Vec<GameObject> {
    extract_vem_with_diagnostics(frame, spec, palette).objects
}
