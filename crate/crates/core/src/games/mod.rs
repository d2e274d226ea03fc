//! Built-in cartridges and the contract the console drives them through.
//!
//! Each cartridge owns a bit-exact RAM map. Three independent views are
//! derived from the same RAM: the render rule (what VEM sees), the declarative
//! decoder spec (what REM interprets), and a hand-written ground-truth oracle.

pub mod climber;
pub mod font;
pub mod invaders;
pub mod paddle;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::console::RamState;
use crate::error::Error;
use crate::evalkit::Mismatch;
use crate::model::{Category, Frame, GameObject};
use crate::rem::DecoderSpec;
use crate::rng::Xorshift64;
use crate::vem::VisionSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameId {
    Paddle,
    Invaders,
    Climber,
}

impl GameId {
    pub const ALL: [GameId; 3] = [GameId::Paddle, GameId::Invaders, GameId::Climber];

    pub fn as_str(self) -> &'static str {
        match self {
            GameId::Paddle => "paddle",
            GameId::Invaders => "invaders",
            GameId::Climber => "climber",
        }
    }

    pub fn cartridge(self) -> &'static dyn Cartridge {
        match self {
            GameId::Paddle => &paddle::Paddle,
            GameId::Invaders => &invaders::Invaders,
            GameId::Climber => &climber::Climber,
        }
    }
}

impl fmt::Display for GameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GameId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "paddle" => Ok(GameId::Paddle),
            "invaders" => Ok(GameId::Invaders),
            "climber" => Ok(GameId::Climber),
            other => Err(Error::UnknownGame(other.to_string())),
        }
    }
}

/// Mechanisms that make the rendered frame disagree with RAM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuirkKind {
    RenderOffset,
    Blink,
    Particle,
    Freeze,
    SpriteShrink,
    SizeJitter,
}

impl fmt::Display for QuirkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuirkKind::RenderOffset => "render-offset",
            QuirkKind::Blink => "blink",
            QuirkKind::Particle => "particle",
            QuirkKind::Freeze => "freeze",
            QuirkKind::SpriteShrink => "sprite-shrink",
            QuirkKind::SizeJitter => "size-jitter",
        })
    }
}

/// A cartridge's statically declared quirk with its parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quirk {
    RenderOffset { category: String, dy: i32 },
    Blink { category: String, period: u8, phase_addr: u8, phase_bit: u8 },
    ParticleEffect { duration: u8 },
    FreezeAfterEvent { duration: u8 },
    SpriteShrink { category: String, threshold: u8 },
    SizeJitter { category: String, min: u8, max: u8 },
}

impl Quirk {
    pub fn kind(&self) -> QuirkKind {
        match self {
            Quirk::RenderOffset { .. } => QuirkKind::RenderOffset,
            Quirk::Blink { .. } => QuirkKind::Blink,
            Quirk::ParticleEffect { .. } => QuirkKind::Particle,
            Quirk::FreezeAfterEvent { .. } => QuirkKind::Freeze,
            Quirk::SpriteShrink { .. } => QuirkKind::SpriteShrink,
            Quirk::SizeJitter { .. } => QuirkKind::SizeJitter,
        }
    }
}

/// Which disagreement quirks are active. Render offsets are part of the
/// cartridge layout (the decoder knows them) and are not switchable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuirkSet {
    pub blink: bool,
    pub particle: bool,
    pub freeze: bool,
    pub sprite_shrink: bool,
    pub size_jitter: bool,
}

impl QuirkSet {
    pub const ALL: QuirkSet = QuirkSet {
        blink: true,
        particle: true,
        freeze: true,
        sprite_shrink: true,
        size_jitter: true,
    };

    pub const NONE: QuirkSet = QuirkSet {
        blink: false,
        particle: false,
        freeze: false,
        sprite_shrink: false,
        size_jitter: false,
    };

    pub fn enabled(&self, kind: QuirkKind) -> bool {
        match kind {
            QuirkKind::RenderOffset => true,
            QuirkKind::Blink => self.blink,
            QuirkKind::Particle => self.particle,
            QuirkKind::Freeze => self.freeze,
            QuirkKind::SpriteShrink => self.sprite_shrink,
            QuirkKind::SizeJitter => self.size_jitter,
        }
    }

    pub fn without(mut self, kind: QuirkKind) -> Self {
        match kind {
            QuirkKind::RenderOffset => {}
            QuirkKind::Blink => self.blink = false,
            QuirkKind::Particle => self.particle = false,
            QuirkKind::Freeze => self.freeze = false,
            QuirkKind::SpriteShrink => self.sprite_shrink = false,
            QuirkKind::SizeJitter => self.size_jitter = false,
        }
        self
    }
}

impl Default for QuirkSet {
    fn default() -> Self {
        QuirkSet::ALL
    }
}

/// Static per-category facts.
#[derive(Debug, Clone, Copy)]
pub struct CategoryInfo {
    pub name: &'static str,
    pub color: u8,
    pub hud: bool,
    /// Nominal object size; digit groups report their single-digit size.
    pub size: (i32, i32),
    pub max_instances: usize,
}

impl CategoryInfo {
    pub fn category(&self) -> Category {
        Category::from_static(self.name)
    }
}

/// Inputs to a render besides RAM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderView {
    pub frame_counter: u64,
    /// Stochastic quirk draw committed by the last tick.
    pub draw: u8,
    pub quirks: QuirkSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TickOutcome {
    pub reward: i32,
    pub terminated: bool,
    pub draw: u8,
}

/// One documented RAM byte.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RamField {
    pub addr: u8,
    pub name: String,
    pub description: String,
    /// Whether some value of this byte changes the rendered frame.
    pub renders: bool,
}

/// A ground-truth affine relation `property = a * byte + b` over frames where
/// the object is visible. `b` lists one admissible offset per grid column/row
/// for gridded categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineTruth {
    pub addr: u8,
    pub category: String,
    pub property: String,
    pub a: f64,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamMap {
    pub game: GameId,
    pub fields: Vec<RamField>,
    pub affine: Vec<AffineTruth>,
}

impl RamMap {
    pub fn documents(&self, addr: u8) -> bool {
        self.fields.iter().any(|f| f.addr == addr)
    }

    pub fn render_bytes(&self) -> Vec<u8> {
        self.fields.iter().filter(|f| f.renders).map(|f| f.addr).collect()
    }
}

pub(crate) fn field(addr: u8, name: &str, description: &str, renders: bool) -> RamField {
    RamField {
        addr,
        name: name.to_string(),
        description: description.to_string(),
        renders,
    }
}

pub(crate) fn affine(addr: u8, category: &str, property: &str, a: f64, b: Vec<f64>) -> AffineTruth {
    AffineTruth {
        addr,
        category: category.to_string(),
        property: property.to_string(),
        a,
        b,
    }
}

/// A deterministic game definition.
pub trait Cartridge: Send + Sync {
    fn id(&self) -> GameId;

    fn action_names(&self) -> &'static [&'static str];

    fn action_count(&self) -> usize {
        self.action_names().len()
    }

    /// Declaration order defines canonical observation slots.
    fn categories(&self) -> &'static [CategoryInfo];

    fn quirks(&self) -> Vec<Quirk>;

    fn init(&self, rng: &mut Xorshift64) -> RamState;

    /// Advance one tick. `action` has already been range-checked.
    fn step(&self, ram: &mut RamState, rng: &mut Xorshift64, quirks: QuirkSet, action: u8) -> TickOutcome;

    fn render(&self, ram: &RamState, view: RenderView, frame: &mut Frame);

    /// Objects present by the game's semantics, independent of render quirks.
    fn ground_truth(&self, ram: &RamState) -> Vec<GameObject>;

    fn decoder_spec(&self) -> DecoderSpec;

    fn vision_spec(&self) -> VisionSpec;

    fn ram_map(&self) -> RamMap;

    /// Player-facing score shown in the HUD.
    fn score(&self, ram: &RamState) -> i64;

    /// Whether the game is in a frozen (non-interactive) window.
    fn frozen(&self, _ram: &RamState, _quirks: QuirkSet) -> bool {
        false
    }

    /// Names the active quirk that explains a REM-vs-VEM disagreement, if any.
    fn attribute(&self, ram: &RamState, view: RenderView, mismatch: &Mismatch) -> Option<QuirkKind>;

    fn category_info(&self, name: &str) -> Option<&'static CategoryInfo> {
        self.categories().iter().find(|c| c.name == name)
    }
}
