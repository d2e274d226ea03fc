//! Shared domain types: objects, boxes, frames and palettes.

use std::borrow::Cow;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FRAME_WIDTH: usize = 160;
pub const FRAME_HEIGHT: usize = 210;
pub const FRAME_PIXELS: usize = FRAME_WIDTH * FRAME_HEIGHT;

/// Object category name. Built-in cartridges use static names so that
/// extraction never allocates for the category.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Category(Cow<'static, str>);

impl Category {
    pub const fn from_static(name: &'static str) -> Self {
        Category(Cow::Borrowed(name))
    }

    pub fn new(name: impl Into<String>) -> Self {
        Category(Cow::Owned(name.into()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl PartialEq<str> for Category {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for Category {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

/// Axis-aligned box in frame pixels, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
}

impl BBox {
    pub const fn new(x: i32, y: i32, w: i32, h: i32) -> Self {
        BBox { x, y, w, h }
    }

    pub fn right(&self) -> i32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> i32 {
        self.y + self.h
    }

    pub fn area(&self) -> i64 {
        i64::from(self.w.max(0)) * i64::from(self.h.max(0))
    }

    /// Center in half-pixel units: `(2x + w, 2y + h)`. Exact for integer boxes.
    pub fn center2(&self) -> (i32, i32) {
        (2 * self.x + self.w, 2 * self.y + self.h)
    }

    pub fn center(&self) -> (f64, f64) {
        let (cx2, cy2) = self.center2();
        (f64::from(cx2) / 2.0, f64::from(cy2) / 2.0)
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.x < other.right()
            && other.x < self.right()
            && self.y < other.bottom()
            && other.y < self.bottom()
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then(|| BBox::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn union(&self, other: &BBox) -> BBox {
        let x0 = self.x.min(other.x);
        let y0 = self.y.min(other.y);
        let x1 = self.right().max(other.right());
        let y1 = self.bottom().max(other.bottom());
        BBox::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection(other).map_or(0, |b| b.area());
        let union = self.area() + other.area() - inter;
        if union <= 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Clip to the frame; `None` when nothing remains visible.
    pub fn clip_to_frame(&self) -> Option<BBox> {
        self.intersection(&BBox::new(0, 0, FRAME_WIDTH as i32, FRAME_HEIGHT as i32))
    }

    pub fn in_frame(&self) -> bool {
        self.w >= 1
            && self.h >= 1
            && self.x >= 0
            && self.y >= 0
            && self.right() <= FRAME_WIDTH as i32
            && self.bottom() <= FRAME_HEIGHT as i32
    }

    pub fn translate(&self, dx: i32, dy: i32) -> BBox {
        BBox::new(self.x + dx, self.y + dy, self.w, self.h)
    }
}

/// One extracted object.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameObject {
    pub category: Category,
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
    pub rgb: [u8; 3],
    pub hud: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_id: Option<u32>,
}

impl GameObject {
    pub fn new(category: Category, bbox: BBox, rgb: [u8; 3], hud: bool) -> Self {
        GameObject {
            category,
            x: bbox.x,
            y: bbox.y,
            w: bbox.w,
            h: bbox.h,
            rgb,
            hud,
            orientation: None,
            value: None,
            track_id: None,
        }
    }

    pub fn with_value(mut self, value: i64) -> Self {
        self.value = Some(value);
        self
    }

    pub fn bbox(&self) -> BBox {
        BBox::new(self.x, self.y, self.w, self.h)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.bbox().in_frame() {
            return Err(Error::InvalidObject(format!(
                "{} box ({}, {}, {}, {}) outside the 160x210 frame",
                self.category, self.x, self.y, self.w, self.h
            )));
        }
        Ok(())
    }

    /// Equality on everything except the tracker-assigned id.
    pub fn same_detection(&self, other: &GameObject) -> bool {
        self.category == other.category
            && self.bbox() == other.bbox()
            && self.rgb == other.rgb
            && self.hud == other.hud
            && self.orientation == other.orientation
            && self.value == other.value
    }
}

/// Center of an object's box, `(x + w/2, y + h/2)`.
pub fn center(obj: &GameObject) -> (f64, f64) {
    obj.bbox().center()
}

/// Objects observed in one frame.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectList {
    pub frame_index: u64,
    pub objects: Vec<GameObject>,
}

impl ObjectList {
    pub fn new(frame_index: u64, objects: Vec<GameObject>) -> Self {
        ObjectList {
            frame_index,
            objects,
        }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GameObject> {
        self.objects.iter()
    }

    pub fn of_category<'a>(&'a self, category: &'a str) -> impl Iterator<Item = &'a GameObject> {
        self.objects.iter().filter(move |o| o.category == category)
    }

    pub fn without_hud(&self) -> ObjectList {
        ObjectList::new(
            self.frame_index,
            self.objects.iter().filter(|o| !o.hud).cloned().collect(),
        )
    }

    /// Sorted copy in `(category, y, x, w, h)` order, used for set comparisons.
    pub fn canonical(&self) -> Vec<GameObject> {
        let mut v = self.objects.clone();
        v.sort_by(|a, b| {
            (a.category.as_str(), a.y, a.x, a.w, a.h).cmp(&(b.category.as_str(), b.y, b.x, b.w, b.h))
        });
        v
    }

    /// Same detections as `other`, ignoring order and track ids.
    pub fn same_detections(&self, other: &ObjectList) -> bool {
        let a = self.canonical();
        let b = other.canonical();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.same_detection(y))
    }

    /// Checks the one-object-per-(category, track id) rule.
    pub fn validate_tracks(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for o in &self.objects {
            if let Some(id) = o.track_id {
                if !seen.insert((o.category.as_str(), id)) {
                    return Err(Error::InvalidObject(format!(
                        "duplicate track id {id} for {}",
                        o.category
                    )));
                }
            }
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a ObjectList {
    type Item = &'a GameObject;
    type IntoIter = std::slice::Iter<'a, GameObject>;

    fn into_iter(self) -> Self::IntoIter {
        self.objects.iter()
    }
}

/// Up to 16 distinct colors; index 0 is the background.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    colors: Vec<[u8; 3]>,
}

pub const CONSOLE_PALETTE_ID: &str = "minicart-16";

const CONSOLE_COLORS: [[u8; 3]; 16] = [
    [0, 0, 0],       // 0 background
    [255, 255, 255], // 1 ball / white
    [92, 186, 92],   // 2 paddle player
    [213, 130, 74],  // 3 paddle enemy
    [111, 111, 111], // 4 scenery
    [181, 83, 40],   // 5 aliens / climber enemies
    [252, 224, 112], // 6 player sprite
    [214, 214, 214], // 7 player missile
    [240, 128, 128], // 8 enemy missile
    [26, 102, 26],   // 9 shields
    [84, 92, 214],   // 10 climber fruit
    [236, 200, 96],  // 11 score digits
    [162, 98, 33],   // 12 lives digits
    [200, 72, 72],   // 13 ladders
    [66, 72, 200],   // 14 platforms
    [45, 109, 152],  // 15 spare
];

impl Palette {
    pub fn new(colors: Vec<[u8; 3]>) -> Result<Self> {
        if colors.is_empty() || colors.len() > 16 {
            return Err(Error::InvalidPalette(format!(
                "palette needs 1..=16 colors, got {}",
                colors.len()
            )));
        }
        for (i, c) in colors.iter().enumerate() {
            if colors[..i].contains(c) {
                return Err(Error::InvalidPalette(format!("duplicate color {c:?} at index {i}")));
            }
        }
        Ok(Palette { colors })
    }

    /// The fixed 16-color palette shared by all built-in cartridges.
    pub fn console() -> Self {
        Palette {
            colors: CONSOLE_COLORS.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn color(&self, index: u8) -> Option<[u8; 3]> {
        self.colors.get(usize::from(index)).copied()
    }

    pub fn index_of(&self, rgb: [u8; 3]) -> Option<u8> {
        self.colors.iter().position(|c| *c == rgb).map(|i| i as u8)
    }

    pub fn colors(&self) -> &[[u8; 3]] {
        &self.colors
    }
}

/// 160x210 palette-indexed raster.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    pixels: Vec<u8>,
    palette_id: Cow<'static, str>,
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Frame")
            .field("palette_id", &self.palette_id)
            .field("nonzero", &self.pixels.iter().filter(|&&p| p != 0).count())
            .finish()
    }
}

impl Default for Frame {
    fn default() -> Self {
        Frame::blank()
    }
}

impl Frame {
    pub fn blank() -> Self {
        Frame {
            pixels: vec![0; FRAME_PIXELS],
            palette_id: Cow::Borrowed(CONSOLE_PALETTE_ID),
        }
    }

    pub fn from_pixels(pixels: Vec<u8>, palette: &Palette) -> Result<Self> {
        if pixels.len() != FRAME_PIXELS {
            return Err(Error::MalformedFrame(format!(
                "expected {FRAME_PIXELS} pixels, got {}",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|&&p| usize::from(p) >= palette.len()) {
            return Err(Error::MalformedFrame(format!("palette index {bad} out of range")));
        }
        Ok(Frame {
            pixels,
            palette_id: Cow::Borrowed(CONSOLE_PALETTE_ID),
        })
    }

    pub fn palette_id(&self) -> &str {
        &self.palette_id
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * FRAME_WIDTH + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, index: u8) {
        self.pixels[y * FRAME_WIDTH + x] = index;
    }

    pub fn clear(&mut self) {
        self.pixels.fill(0);
    }

    /// Fill a rectangle, clipped to the frame.
    pub fn fill_rect(&mut self, bbox: BBox, index: u8) {
        let Some(b) = bbox.clip_to_frame() else {
            return;
        };
        for y in b.y..b.bottom() {
            let row = y as usize * FRAME_WIDTH;
            self.pixels[row + b.x as usize..row + b.right() as usize].fill(index);
        }
    }

    pub fn count_index(&self, index: u8) -> usize {
        self.pixels.iter().filter(|&&p| p == index).count()
    }
}

/// 160x210 RGB raster, row-major, 3 bytes per pixel.
pub type RgbRaster = Vec<u8>;

pub fn to_rgb(frame: &Frame, palette: &Palette) -> Result<RgbRaster> {
    let mut out = Vec::with_capacity(FRAME_PIXELS * 3);
    for &p in frame.pixels() {
        let c = palette
            .color(p)
            .ok_or_else(|| Error::MalformedFrame(format!("palette index {p} out of range")))?;
        out.extend_from_slice(&c);
    }
    Ok(out)
}

/// Inverse of [`to_rgb`]: map every RGB triple back to its palette index.
pub fn quantize(rgb: &[u8], palette: &Palette) -> Result<Frame> {
    if rgb.len() != FRAME_PIXELS * 3 {
        return Err(Error::MalformedFrame(format!(
            "expected {} RGB bytes, got {}",
            FRAME_PIXELS * 3,
            rgb.len()
        )));
    }
    let pixels = rgb
        .chunks_exact(3)
        .map(|c| {
            palette
                .index_of([c[0], c[1], c[2]])
                .ok_or_else(|| Error::MalformedFrame(format!("color {c:?} not in palette")))
        })
        .collect::<Result<Vec<u8>>>()?;
    Frame::from_pixels(pixels, palette)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obj(x: i32, y: i32, w: i32, h: i32) -> GameObject {
        GameObject::new(Category::from_static("T"), BBox::new(x, y, w, h), [1, 2, 3], false)
    }

    #[test]
    fn center_examples() {
        assert_eq!(center(&obj(0, 0, 2, 4)), (1.0, 2.0));
        assert_eq!(center(&obj(10, 20, 1, 1)), (10.5, 20.5));
        assert_eq!(center(&obj(140, 90, 4, 16)), (142.0, 98.0));
    }

    proptest! {
        #[test]
        fn center_is_translation_equivariant(
            x in 0i32..150, y in 0i32..200, w in 1i32..10, h in 1i32..10,
            dx in -50i32..50, dy in -50i32..50,
        ) {
            let (cx, cy) = center(&obj(x, y, w, h));
            let (sx, sy) = center(&obj(x + dx, y + dy, w, h));
            prop_assert_eq!(sx, cx + f64::from(dx));
            prop_assert_eq!(sy, cy + f64::from(dy));
        }
    }

    #[test]
    fn to_rgb_background_fill() {
        let p = Palette::console();
        let rgb = to_rgb(&Frame::blank(), &p).unwrap();
        assert_eq!(rgb.len(), FRAME_PIXELS * 3);
        assert!(rgb.chunks_exact(3).all(|c| c == p.color(0).unwrap()));
    }

    #[test]
    fn to_rgb_point() {
        let p = Palette::console();
        let mut f = Frame::blank();
        f.set(5, 5, 3);
        let rgb = to_rgb(&f, &p).unwrap();
        for (i, c) in rgb.chunks_exact(3).enumerate() {
            let expect = if i == 5 * FRAME_WIDTH + 5 { 3 } else { 0 };
            assert_eq!(c, p.color(expect).unwrap());
        }
    }

    #[test]
    fn out_of_range_index_is_malformed() {
        let small = Palette::new(vec![[0, 0, 0], [9, 9, 9]]).unwrap();
        let mut f = Frame::blank();
        f.set(0, 0, 5);
        assert!(matches!(to_rgb(&f, &small), Err(Error::MalformedFrame(_))));
        assert!(Frame::from_pixels(f.pixels().to_vec(), &small).is_err());
    }

    #[test]
    fn palette_rejects_duplicates() {
        assert!(Palette::new(vec![[0, 0, 0], [0, 0, 0]]).is_err());
        assert!(Palette::new(vec![[0, 0, 0]; 17]).is_err());
        let p = Palette::console();
        assert_eq!(p.len(), 16);
    }

    proptest! {
        #[test]
        fn quantize_inverts_to_rgb(seed in any::<u64>()) {
            let p = Palette::console();
            let mut s = seed | 1;
            let pixels: Vec<u8> = (0..FRAME_PIXELS)
                .map(|_| {
                    s ^= s << 13;
                    s ^= s >> 7;
                    s ^= s << 17;
                    (s % 16) as u8
                })
                .collect();
            let f = Frame::from_pixels(pixels, &p).unwrap();
            prop_assert_eq!(quantize(&to_rgb(&f, &p).unwrap(), &p).unwrap(), f);
        }
    }

    #[test]
    fn iou_and_intersection() {
        let a = BBox::new(0, 0, 4, 4);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&BBox::new(4, 0, 4, 4)), 0.0);
        assert!((a.iou(&BBox::new(2, 0, 4, 4)) - 8.0 / 24.0).abs() < 1e-12);
        assert_eq!(BBox::new(-3, 5, 10, 2).clip_to_frame(), Some(BBox::new(0, 5, 7, 2)));
        assert_eq!(BBox::new(200, 5, 10, 2).clip_to_frame(), None);
    }

    #[test]
    fn duplicate_track_ids_rejected() {
        let mut a = obj(0, 0, 1, 1);
        a.track_id = Some(3);
        let list = ObjectList::new(0, vec![a.clone(), a]);
        assert!(list.validate_tracks().is_err());
    }
}
