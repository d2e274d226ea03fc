//! The deterministic mini-console: 128 bytes of RAM, one tick per action.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::{Cartridge, GameId, QuirkSet, RenderView};
use crate::model::{Frame, GameObject, ObjectList};
use crate::rng::Xorshift64;

/// Exactly 128 bytes of console memory.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RamState(#[serde(with = "ram_bytes")] [u8; 128]);

mod ram_bytes {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &[u8; 128], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(b.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 128], D::Error> {
        let v = Vec::<u8>::deserialize(d)?;
        v.try_into()
            .map_err(|v: Vec<u8>| D::Error::custom(format!("RAM needs 128 bytes, got {}", v.len())))
    }
}

impl std::fmt::Debug for RamState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, row) in self.0.chunks(16).enumerate() {
            write!(f, "{:02x}:", i * 16)?;
            for b in row {
                write!(f, " {b:02x}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl Default for RamState {
    fn default() -> Self {
        RamState([0; 128])
    }
}

impl RamState {
    pub const LEN: usize = 128;

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; 128] = bytes
            .try_into()
            .map_err(|_| Error::Config(format!("RAM needs 128 bytes, got {}", bytes.len())))?;
        Ok(RamState(arr))
    }

    pub fn bytes(&self) -> &[u8; 128] {
        &self.0
    }
}

impl Index<u8> for RamState {
    type Output = u8;

    fn index(&self, addr: u8) -> &u8 {
        &self.0[usize::from(addr & 0x7F)]
    }
}

impl IndexMut<u8> for RamState {
    fn index_mut(&mut self, addr: u8) -> &mut u8 {
        &mut self.0[usize::from(addr & 0x7F)]
    }
}

/// Value snapshot of everything that determines future ticks and renders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SavedState {
    pub game: GameId,
    pub ram: RamState,
    pub frame_counter: u64,
    pub rng: Xorshift64,
    pub draw: u8,
}

pub struct Console {
    cart: &'static dyn Cartridge,
    ram: RamState,
    frame_counter: u64,
    rng: Xorshift64,
    draw: u8,
    quirks: QuirkSet,
    seed: u64,
}

impl Clone for Console {
    fn clone(&self) -> Self {
        Console {
            cart: self.cart,
            ram: self.ram,
            frame_counter: self.frame_counter,
            rng: self.rng,
            draw: self.draw,
            quirks: self.quirks,
            seed: self.seed,
        }
    }
}

impl std::fmt::Debug for Console {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Console")
            .field("game", &self.cart.id())
            .field("frame_counter", &self.frame_counter)
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

impl Console {
    /// Console with every quirk enabled.
    pub fn new(game: GameId, seed: u64) -> Self {
        Self::with_quirks(game, seed, QuirkSet::ALL)
    }

    pub fn create(game_id: &str, seed: u64) -> Result<Self> {
        Ok(Self::new(game_id.parse()?, seed))
    }

    pub fn with_quirks(game: GameId, seed: u64, quirks: QuirkSet) -> Self {
        let cart = game.cartridge();
        let mut rng = Xorshift64::new(seed);
        let ram = cart.init(&mut rng);
        Console {
            cart,
            ram,
            frame_counter: 0,
            rng,
            draw: 0,
            quirks,
            seed,
        }
    }

    pub fn game(&self) -> GameId {
        self.cart.id()
    }

    pub fn cartridge(&self) -> &'static dyn Cartridge {
        self.cart
    }

    pub fn quirks(&self) -> QuirkSet {
        self.quirks
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn ram(&self) -> &RamState {
        &self.ram
    }

    pub fn frame_counter(&self) -> u64 {
        self.frame_counter
    }

    pub fn frozen(&self) -> bool {
        self.cart.frozen(&self.ram, self.quirks)
    }

    pub fn view(&self) -> RenderView {
        RenderView {
            frame_counter: self.frame_counter,
            draw: self.draw,
            quirks: self.quirks,
        }
    }

    /// Advance one tick. Returns `(reward, terminated)`.
    pub fn tick(&mut self, action: u8) -> Result<(i32, bool)> {
        let count = self.cart.action_count();
        if usize::from(action) >= count {
            return Err(Error::InvalidAction { action, count });
        }
        let out = self.cart.step(&mut self.ram, &mut self.rng, self.quirks, action);
        self.draw = out.draw;
        self.frame_counter += 1;
        Ok((out.reward, out.terminated))
    }

    pub fn render(&self) -> Frame {
        let mut f = Frame::blank();
        self.render_into(&mut f);
        f
    }

    pub fn render_into(&self, frame: &mut Frame) {
        frame.clear();
        self.cart.render(&self.ram, self.view(), frame);
    }

    pub fn peek(&self, addr: usize) -> Result<u8> {
        if addr >= RamState::LEN {
            return Err(Error::AddressOutOfRange(addr));
        }
        Ok(self.ram.0[addr])
    }

    pub fn poke(&mut self, addr: usize, value: u8) -> Result<()> {
        if addr >= RamState::LEN {
            return Err(Error::AddressOutOfRange(addr));
        }
        self.ram.0[addr] = value;
        Ok(())
    }

    pub fn snapshot(&self) -> SavedState {
        SavedState {
            game: self.cart.id(),
            ram: self.ram,
            frame_counter: self.frame_counter,
            rng: self.rng,
            draw: self.draw,
        }
    }

    pub fn restore(&mut self, state: &SavedState) -> Result<()> {
        if state.game != self.cart.id() {
            return Err(Error::CartridgeMismatch {
                expected: self.cart.id().to_string(),
                found: state.game.to_string(),
            });
        }
        self.ram = state.ram;
        self.frame_counter = state.frame_counter;
        self.rng = state.rng;
        self.draw = state.draw;
        Ok(())
    }

    pub fn ground_truth_objects(&self) -> ObjectList {
        let objects: Vec<GameObject> = self.cart.ground_truth(&self.ram);
        ObjectList::new(self.frame_counter, objects)
    }

    pub fn score(&self) -> i64 {
        self.cart.score(&self.ram)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn create_rejects_unknown_game() {
        assert!(matches!(Console::create("pong", 0), Err(Error::UnknownGame(_))));
        assert!(Console::create("paddle", 0).is_ok());
    }

    #[test]
    fn same_args_same_ram() {
        for g in GameId::ALL {
            assert_eq!(Console::new(g, 3).ram(), Console::new(g, 3).ram());
        }
    }

    #[test]
    fn peek_poke_bounds() {
        let mut c = Console::new(GameId::Paddle, 0);
        c.poke(99, 42).unwrap();
        assert_eq!(c.peek(99).unwrap(), 42);
        assert!(matches!(c.peek(128), Err(Error::AddressOutOfRange(128))));
        assert!(matches!(c.poke(200, 1), Err(Error::AddressOutOfRange(200))));
    }

    #[test]
    fn action_range_checked() {
        let mut c = Console::new(GameId::Paddle, 0);
        let n = c.cartridge().action_count() as u8;
        assert!(matches!(c.tick(n), Err(Error::InvalidAction { .. })));
        assert_eq!(c.frame_counter(), 0);
    }

    #[test]
    fn snapshot_restore_identity() {
        let mut c = Console::new(GameId::Invaders, 11);
        let trace = |c: &mut Console| {
            (0..100)
                .map(|t| {
                    c.tick((t % 4) as u8).unwrap();
                    *c.ram()
                })
                .collect::<Vec<_>>()
        };
        let snap = c.snapshot();
        let first = trace(&mut c);
        c.restore(&snap).unwrap();
        let second = trace(&mut c);
        assert_eq!(first, second);
    }

    #[test]
    fn snapshot_is_a_value() {
        let mut c = Console::new(GameId::Paddle, 0);
        let snap = c.snapshot();
        c.poke(0, 99).unwrap();
        c.tick(0).unwrap();
        assert_ne!(snap.ram[0], 99);
        assert_eq!(snap.frame_counter, 0);
    }

    #[test]
    fn restore_across_cartridges_fails() {
        let a = Console::new(GameId::Paddle, 0);
        let mut b = Console::new(GameId::Climber, 0);
        assert!(matches!(b.restore(&a.snapshot()), Err(Error::CartridgeMismatch { .. })));
    }

    #[test]
    fn poke_then_restore_keeps_poked_value_in_later_snapshot() {
        let mut c = Console::new(GameId::Paddle, 0);
        c.poke(10, 5).unwrap();
        let snap = c.snapshot();
        c.restore(&snap).unwrap();
        assert_eq!(c.peek(10).unwrap(), 5);
    }
}
