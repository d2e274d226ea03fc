//! Gym-style wrapper: reset/step with object, RAM or stacked-grayscale
//! observations, HUD filtering and frame skipping.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::console::{Console, RamState};
use crate::error::{Error, Result};
use crate::games::{GameId, QuirkSet};
use crate::model::{Frame, ObjectList, Palette, FRAME_HEIGHT, FRAME_WIDTH};
use crate::rem::{extract_rem, extract_rem_slots, DecoderSpec};
use crate::vem::{extract_vem, VisionSpec};

pub const PLANE_SIZE: usize = 84;
pub const PLANE_LEN: usize = PLANE_SIZE * PLANE_SIZE;
pub const STACK: usize = 4;
pub const OBJECT_HISTORY: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsMode {
    Objects,
    Ram,
    Pixels,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub game: GameId,
    pub mode: ObsMode,
    pub include_hud: bool,
    pub frame_skip: u32,
    pub seed: u64,
    pub quirks: QuirkSet,
}

impl EnvConfig {
    pub fn new(game: GameId, mode: ObsMode) -> Self {
        EnvConfig {
            game,
            mode,
            include_hud: true,
            frame_skip: 1,
            seed: 0,
            quirks: QuirkSet::ALL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_skip == 0 {
            return Err(Error::Config("frame_skip must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "data", rename_all = "snake_case")]
pub enum Observation {
    /// `(x, y)` per kept slot, previous tick first; missing objects are `(0, 0)`.
    Objects(Vec<i32>),
    Ram(Vec<u8>),
    /// Four 84x84 planes, oldest first.
    Pixels(Vec<u8>),
}

impl Observation {
    pub fn len(&self) -> usize {
        match self {
            Observation::Objects(v) => v.len(),
            Observation::Ram(v) | Observation::Pixels(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Plane `k` of a pixel observation.
    pub fn plane(&self, k: usize) -> Option<&[u8]> {
        match self {
            Observation::Pixels(v) if k < STACK => Some(&v[k * PLANE_LEN..(k + 1) * PLANE_LEN]),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub frame_counter: u64,
    pub rem: ObjectList,
    pub vem: ObjectList,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observation: Observation,
    pub reward: i32,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

pub struct Env {
    config: EnvConfig,
    console: Console,
    decoder: DecoderSpec,
    vision: VisionSpec,
    palette: Palette,
    luma: Vec<u8>,
    /// Per slot: whether it survives the HUD filter.
    keep: Vec<bool>,
    planes: VecDeque<Vec<u8>>,
    history: VecDeque<Vec<i32>>,
    frame: Frame,
    terminated: bool,
}

impl Env {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let cart = config.game.cartridge();
        let decoder = cart.decoder_spec();
        let keep = decoder
            .entries
            .iter()
            .flat_map(|e| std::iter::repeat_n(config.include_hud || !e.hud, e.layout.slots()))
            .collect();
        let palette = Palette::console();
        let luma = luma_table(&palette);
        let mut env = Env {
            console: Console::with_quirks(config.game, config.seed, config.quirks),
            vision: cart.vision_spec(),
            decoder,
            palette,
            luma,
            keep,
            planes: VecDeque::with_capacity(STACK),
            history: VecDeque::with_capacity(OBJECT_HISTORY),
            frame: Frame::blank(),
            terminated: false,
            config,
        };
        env.reset(None);
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn console(&self) -> &Console {
        &self.console
    }

    pub fn action_count(&self) -> usize {
        self.console.cartridge().action_count()
    }

    /// Fresh console, re-seeded when `seed` is given.
    pub fn reset(&mut self, seed: Option<u64>) -> Observation {
        if let Some(s) = seed {
            self.config.seed = s;
        }
        self.console = Console::with_quirks(self.config.game, self.config.seed, self.config.quirks);
        self.terminated = false;
        self.planes.clear();
        self.history.clear();
        match self.config.mode {
            ObsMode::Pixels => {
                self.console.render_into(&mut self.frame);
                let plane = downsample_with(&self.frame, &self.luma);
                for _ in 0..STACK {
                    self.planes.push_back(plane.clone());
                }
            }
            ObsMode::Objects => {
                let slots = self.slot_vector();
                for _ in 0..OBJECT_HISTORY {
                    self.history.push_back(slots.clone());
                }
            }
            ObsMode::Ram => {}
        }
        self.observation()
    }

    pub fn step(&mut self, action: u8) -> Result<Step> {
        if self.terminated {
            return Err(Error::EpisodeTerminated);
        }
        let count = self.action_count();
        if usize::from(action) >= count {
            return Err(Error::InvalidAction { action, count });
        }
        let mut reward = 0;
        for _ in 0..self.config.frame_skip {
            let (r, done) = self.console.tick(action)?;
            reward += r;
            if done {
                self.terminated = true;
                break;
            }
        }
        self.console.render_into(&mut self.frame);
        match self.config.mode {
            ObsMode::Pixels => {
                self.planes.pop_front();
                self.planes.push_back(downsample_with(&self.frame, &self.luma));
            }
            ObsMode::Objects => {
                self.history.pop_front();
                let slots = self.slot_vector();
                self.history.push_back(slots);
            }
            ObsMode::Ram => {}
        }
        let fc = self.console.frame_counter();
        let info = StepInfo {
            frame_counter: fc,
            rem: ObjectList::new(fc, extract_rem(self.console.ram(), &self.decoder)),
            vem: ObjectList::new(fc, extract_vem(&self.frame, &self.vision, &self.palette)),
        };
        Ok(Step {
            observation: self.observation(),
            reward,
            terminated: self.terminated,
            truncated: false,
            info,
        })
    }

    pub fn get_ram(&self) -> RamState {
        *self.console.ram()
    }

    pub fn set_ram(&mut self, addr: usize, value: u8) -> Result<()> {
        self.console.poke(addr, value)
    }

    pub fn render(&self) -> Frame {
        self.console.render()
    }

    /// Number of `(x, y)` slots per tick after the HUD filter.
    pub fn slot_count(&self) -> usize {
        self.keep.iter().filter(|k| **k).count()
    }

    fn slot_vector(&self) -> Vec<i32> {
        let slots = extract_rem_slots(self.console.ram(), &self.decoder);
        let mut v = Vec::with_capacity(2 * slots.len());
        for (slot, keep) in slots.iter().zip(&self.keep) {
            if *keep {
                let (x, y) = slot.as_ref().map_or((0, 0), |o| (o.x, o.y));
                v.push(x);
                v.push(y);
            }
        }
        v
    }

    fn observation(&self) -> Observation {
        match self.config.mode {
            ObsMode::Ram => Observation::Ram(self.console.ram().bytes().to_vec()),
            ObsMode::Objects => Observation::Objects(self.history.iter().flatten().copied().collect()),
            ObsMode::Pixels => Observation::Pixels(self.planes.iter().flatten().copied().collect()),
        }
    }
}

/// Integer luma of each palette entry, rounded half up.
pub fn luma_table(palette: &Palette) -> Vec<u8> {
    palette
        .colors()
        .iter()
        .map(|[r, g, b]| ((299 * u32::from(*r) + 587 * u32::from(*g) + 114 * u32::from(*b) + 500) / 1000) as u8)
        .collect()
}

/// Grayscale, then area-average resample 160x210 to 84x84.
pub fn grayscale_downsample(frame: &Frame, palette: &Palette) -> Vec<u8> {
    downsample_with(frame, &luma_table(palette))
}

/// `(source index, overlap)` lists per output cell, all in units where a
/// source pixel spans `out` and an output pixel spans `src`.
fn area_weights(src: usize, out: usize) -> Vec<Vec<(usize, u32)>> {
    (0..out)
        .map(|o| {
            let (lo, hi) = (o * src, (o + 1) * src);
            (lo / out..hi.div_ceil(out))
                .filter_map(|s| {
                    let (a, b) = ((s * out).max(lo), ((s + 1) * out).min(hi));
                    (b > a).then(|| (s, (b - a) as u32))
                })
                .collect()
        })
        .collect()
}

fn downsample_with(frame: &Frame, luma: &[u8]) -> Vec<u8> {
    let wx = area_weights(FRAME_WIDTH, PLANE_SIZE);
    let wy = area_weights(FRAME_HEIGHT, PLANE_SIZE);
    let px = frame.pixels();
    // Horizontal pass: each source row becomes 84 weighted sums.
    let mut rows = vec![0u64; FRAME_HEIGHT * PLANE_SIZE];
    for y in 0..FRAME_HEIGHT {
        let src = &px[y * FRAME_WIDTH..(y + 1) * FRAME_WIDTH];
        for (j, ws) in wx.iter().enumerate() {
            rows[y * PLANE_SIZE + j] = ws.iter().map(|&(s, w)| u64::from(luma[usize::from(src[s])]) * u64::from(w)).sum();
        }
    }
    let total = (FRAME_WIDTH * FRAME_HEIGHT) as u64;
    let mut out = vec![0u8; PLANE_LEN];
    for (i, ws) in wy.iter().enumerate() {
        for j in 0..PLANE_SIZE {
            let sum: u64 = ws.iter().map(|&(s, w)| rows[s * PLANE_SIZE + j] * u64::from(w)).sum();
            out[i * PLANE_SIZE + j] = ((sum + total / 2) / total) as u8;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BBox;

    /// Direct 2-D oracle: exact rational overlap of every source pixel.
    fn brute_downsample(frame: &Frame, luma: &[u8]) -> Vec<u8> {
        let mut out = vec![0u8; PLANE_LEN];
        let (w, h, n) = (FRAME_WIDTH as u64, FRAME_HEIGHT as u64, PLANE_SIZE as u64);
        for i in 0..n {
            for j in 0..n {
                let mut sum = 0u64;
                for y in 0..h {
                    let oy = (i * h).max(y * n) as i64 - ((i + 1) * h).min((y + 1) * n) as i64;
                    if oy >= 0 {
                        continue;
                    }
                    for x in 0..w {
                        let ox = (j * w).max(x * n) as i64 - ((j + 1) * w).min((x + 1) * n) as i64;
                        if ox >= 0 {
                            continue;
                        }
                        let l = u64::from(luma[usize::from(frame.get(x as usize, y as usize))]);
                        sum += l * (-ox) as u64 * (-oy) as u64;
                    }
                }
                out[(i * n + j) as usize] = ((sum + w * h / 2) / (w * h)) as u8;
            }
        }
        out
    }

    #[test]
    fn blank_is_black_and_white_is_white() {
        let p = Palette::console();
        assert!(grayscale_downsample(&Frame::blank(), &p).iter().all(|&v| v == 0));
        let mut f = Frame::blank();
        f.fill_rect(BBox::new(0, 0, 160, 210), 1);
        assert!(grayscale_downsample(&f, &p).iter().all(|&v| v == 255));
    }

    #[test]
    fn split_frame_conserves_mean() {
        let p = Palette::console();
        let mut f = Frame::blank();
        f.fill_rect(BBox::new(0, 0, 160, 105), 1);
        let plane = grayscale_downsample(&f, &p);
        let mean = plane.iter().map(|&v| f64::from(v)).sum::<f64>() / PLANE_LEN as f64;
        assert!((mean - 127.5).abs() <= 1.0, "{mean}");

        // 101 rows end inside output row 40.
        let mut f = Frame::blank();
        f.fill_rect(BBox::new(0, 0, 160, 101), 1);
        let plane = grayscale_downsample(&f, &p);
        let row40 = &plane[40 * PLANE_SIZE..41 * PLANE_SIZE];
        assert!(row40.iter().all(|&v| v == 102), "{row40:?}");
        let mean = plane.iter().map(|&v| f64::from(v)).sum::<f64>() / PLANE_LEN as f64;
        let source_mean = 255.0 * 101.0 / 210.0;
        assert!((mean - source_mean).abs() <= 1.0, "{mean} vs {source_mean}");
    }

    #[test]
    fn matches_brute_force_on_game_frames() {
        let p = Palette::console();
        let luma = luma_table(&p);
        for g in GameId::ALL {
            let mut c = Console::new(g, 4);
            for t in 0..40 {
                c.tick((t % c.cartridge().action_count()) as u8).unwrap();
            }
            let f = c.render();
            assert_eq!(grayscale_downsample(&f, &p), brute_downsample(&f, &luma), "{g}");
        }
    }

    #[test]
    fn object_vector_lengths() {
        let mut cfg = EnvConfig::new(GameId::Paddle, ObsMode::Objects);
        let env = Env::new(cfg.clone()).unwrap();
        assert_eq!(env.observation().len(), 20);
        cfg.include_hud = false;
        let mut env = Env::new(cfg).unwrap();
        assert_eq!(env.reset(None).len(), 12);
    }

    #[test]
    fn frame_skip_sums_rewards() {
        use crate::games::paddle::{Velocity, BALL_X, BALL_Y, PLAYER_Y, VELOCITY};
        let mut cfg = EnvConfig::new(GameId::Paddle, ObsMode::Ram);
        cfg.frame_skip = 4;
        cfg.quirks = QuirkSet::NONE;
        let mut env = Env::new(cfg).unwrap();
        // The ball crosses the player's face on the second tick.
        env.set_ram(BALL_X as usize, 135).unwrap();
        env.set_ram(BALL_Y as usize, 40).unwrap();
        env.set_ram(PLAYER_Y as usize, 180).unwrap();
        env.set_ram(VELOCITY as usize, Velocity { dx: 2, dy: 0 }.encode()).unwrap();
        let s = env.step(0).unwrap();
        assert_eq!(s.reward, -1);
        assert_eq!(s.info.frame_counter, 4);
    }

    #[test]
    fn stepping_after_termination_errors() {
        let mut env = Env::new(EnvConfig::new(GameId::Climber, ObsMode::Ram)).unwrap();
        env.set_ram(crate::games::climber::LIVES as usize, 1).unwrap();
        let x = env.get_ram()[crate::games::climber::PLAYER_X];
        // Park floor 0's enemy on the player.
        env.set_ram(crate::games::climber::ENEMY as usize, 0x80 | (x - 8)).unwrap();
        let s = env.step(0).unwrap();
        assert!(s.terminated);
        assert!(matches!(env.step(0), Err(Error::EpisodeTerminated)));
        env.reset(None);
        assert!(env.step(0).is_ok());
    }

    #[test]
    fn invalid_config_and_action() {
        let mut cfg = EnvConfig::new(GameId::Paddle, ObsMode::Ram);
        cfg.frame_skip = 0;
        assert!(Env::new(cfg).is_err());
        let mut env = Env::new(EnvConfig::new(GameId::Paddle, ObsMode::Ram)).unwrap();
        assert!(matches!(env.step(9), Err(Error::InvalidAction { .. })));
    }
}
