//! Space-Invaders-like cartridge: a bitmap-encoded alien grid, a player
//! missile that blinks and jitters in height, and explosion particles.
//!
//! RAM map:
//!
//! | addr | meaning |
//! |------|---------|
//! | 0-5 | alien rows, bit c = column c alive |
//! | 6 | player x, 4..=148 |
//! | 7, 8 | player missile x, y |
//! | 9 | player missile flags: bit 0 active, bit 1 blink phase |
//! | 10, 11, 12 | enemy missile x, y, active |
//! | 13, 14 | grid anchor x, y |
//! | 15-17 | shield hit points (width = 4 * hp) |
//! | 18, 19, 20 | explosion timer, x, y |
//! | 21 | lives |
//! | 22, 23 | score low, high byte |
//! | 24 | grid direction, 0 right, 1 left |
//! | 25 | drift counter |

use crate::console::RamState;
use crate::evalkit::{Mismatch, MismatchKind};
use crate::games::font;
use crate::games::{
    affine, field, Cartridge, CategoryInfo, GameId, Quirk, QuirkKind, QuirkSet, RamMap, RenderView, TickOutcome,
};
use crate::model::{BBox, Category, Frame, GameObject, Palette};
use crate::rem::{CategoryDecoder, Coord, DecoderSpec, Instance, Layout, Presence, SizeRule, ValueRule};
use crate::rng::Xorshift64;
use crate::vem::{ColorSet, Region, VisionRule, VisionSpec};

pub const ALIEN_ROWS: u8 = 0;
pub const PLAYER_X: u8 = 6;
pub const PM_X: u8 = 7;
pub const PM_Y: u8 = 8;
pub const PM_FLAGS: u8 = 9;
pub const EM_X: u8 = 10;
pub const EM_Y: u8 = 11;
pub const EM_ACTIVE: u8 = 12;
pub const ANCHOR_X: u8 = 13;
pub const ANCHOR_Y: u8 = 14;
pub const SHIELD_HP: u8 = 15;
pub const EXPLOSION_TIMER: u8 = 18;
pub const EXPLOSION_X: u8 = 19;
pub const EXPLOSION_Y: u8 = 20;
pub const LIVES: u8 = 21;
pub const SCORE_LO: u8 = 22;
pub const SCORE_HI: u8 = 23;
pub const DIRECTION: u8 = 24;
pub const DRIFT: u8 = 25;

pub const NOOP: u8 = 0;
pub const LEFT: u8 = 1;
pub const RIGHT: u8 = 2;
pub const FIRE: u8 = 3;

pub const ROWS: u8 = 6;
pub const COLS: u8 = 6;
pub const ALIEN_W: i32 = 8;
pub const ALIEN_H: i32 = 8;
pub const STRIDE_X: i32 = 14;
pub const STRIDE_Y: i32 = 12;
pub const ANCHOR_X0: u8 = 40;
pub const ANCHOR_Y0: u8 = 30;
pub const ANCHOR_MIN_X: i32 = 4;
pub const ANCHOR_MAX_X: i32 = 78;
pub const DRIFT_PERIOD: u8 = 4;
pub const DESCENT: u8 = 4;
pub const INVADED_Y: i32 = 156;

pub const PLAYER_Y: i32 = 184;
pub const PLAYER_W: i32 = 8;
pub const PLAYER_H: i32 = 8;
pub const PLAYER_MIN_X: i32 = 4;
pub const PLAYER_MAX_X: i32 = 148;
pub const PLAYER_SPEED: i32 = 2;

pub const PM_W: i32 = 1;
pub const PM_H: i32 = 8;
pub const PM_SPAWN_Y: u8 = 176;
pub const PM_MIN_H: u8 = 2;
pub const EM_W: i32 = 2;
pub const EM_H: i32 = 6;
pub const MISSILE_SPEED: i32 = 4;
pub const FIELD_TOP: i32 = 24;
pub const FIELD_BOTTOM: i32 = 200;
/// One in this many ticks the aliens try to fire.
pub const FIRE_ODDS: u32 = 8;

pub const SHIELD_XS: [i32; 3] = [24, 72, 120];
pub const SHIELD_Y: i32 = 160;
pub const SHIELD_H: i32 = 6;
pub const SHIELD_HP0: u8 = 4;

pub const EXPLOSION_TICKS: u8 = 8;
pub const EXPLOSION_SIZE: i32 = 6;
pub const SCORE_X: i32 = 8;
pub const LIVES_X: i32 = 148;
pub const HUD_Y: i32 = 4;
pub const LIVES0: u8 = 3;
pub const BLINK_PERIOD: u8 = 2;

const COLOR_ALIEN: u8 = 5;
const COLOR_PLAYER: u8 = 6;
const COLOR_PM: u8 = 7;
const COLOR_EM: u8 = 8;
const COLOR_SHIELD: u8 = 9;
const COLOR_SCORE: u8 = 11;
const COLOR_LIVES: u8 = 12;
const COLOR_DEBRIS: u8 = 15;

const CATEGORIES: [CategoryInfo; 7] = [
    CategoryInfo { name: "Player", color: COLOR_PLAYER, hud: false, size: (PLAYER_W, PLAYER_H), max_instances: 1 },
    CategoryInfo {
        name: "Alien",
        color: COLOR_ALIEN,
        hud: false,
        size: (ALIEN_W, ALIEN_H),
        max_instances: (ROWS * COLS) as usize,
    },
    CategoryInfo { name: "Shield", color: COLOR_SHIELD, hud: false, size: (16, SHIELD_H), max_instances: 3 },
    CategoryInfo { name: "PlayerMissile", color: COLOR_PM, hud: false, size: (PM_W, PM_H), max_instances: 1 },
    CategoryInfo { name: "EnemyMissile", color: COLOR_EM, hud: false, size: (EM_W, EM_H), max_instances: 1 },
    CategoryInfo {
        name: "Score",
        color: COLOR_SCORE,
        hud: true,
        size: (font::DIGIT_W, font::DIGIT_H),
        max_instances: 1,
    },
    CategoryInfo {
        name: "Lives",
        color: COLOR_LIVES,
        hud: true,
        size: (font::DIGIT_W, font::DIGIT_H),
        max_instances: 1,
    },
];

pub struct Invaders;

pub fn alien_box(ram: &RamState, row: u8, col: u8) -> BBox {
    BBox::new(
        i32::from(ram[ANCHOR_X]) + i32::from(col) * STRIDE_X,
        i32::from(ram[ANCHOR_Y]) + i32::from(row) * STRIDE_Y,
        ALIEN_W,
        ALIEN_H,
    )
}

fn alive(ram: &RamState, row: u8, col: u8) -> bool {
    ram[ALIEN_ROWS + row] & (1 << col) != 0
}

fn player_box(ram: &RamState) -> BBox {
    BBox::new(i32::from(ram[PLAYER_X]), PLAYER_Y, PLAYER_W, PLAYER_H)
}

fn pm_box(ram: &RamState) -> Option<BBox> {
    (ram[PM_FLAGS] & 1 != 0).then(|| BBox::new(i32::from(ram[PM_X]), i32::from(ram[PM_Y]), PM_W, PM_H))
}

fn em_box(ram: &RamState) -> Option<BBox> {
    (ram[EM_ACTIVE] != 0).then(|| BBox::new(i32::from(ram[EM_X]), i32::from(ram[EM_Y]), EM_W, EM_H))
}

fn shield_box(ram: &RamState, i: usize) -> Option<BBox> {
    let hp = ram[SHIELD_HP + i as u8];
    (hp > 0).then(|| BBox::new(SHIELD_XS[i], SHIELD_Y, 4 * i32::from(hp), SHIELD_H))
}

pub fn explosion_box(ram: &RamState) -> Option<BBox> {
    (ram[EXPLOSION_TIMER] > 0).then(|| {
        BBox::new(
            i32::from(ram[EXPLOSION_X]),
            i32::from(ram[EXPLOSION_Y]),
            EXPLOSION_SIZE,
            EXPLOSION_SIZE,
        )
    })
}

fn score(ram: &RamState) -> u16 {
    u16::from_le_bytes([ram[SCORE_LO], ram[SCORE_HI]])
}

/// Whether the blink quirk hides an active player missile this frame.
pub fn missile_hidden(ram: &RamState, view: RenderView) -> bool {
    view.quirks.blink && ram[PM_FLAGS] & 1 != 0 && (view.frame_counter % u64::from(BLINK_PERIOD)) as u8 != (ram[PM_FLAGS] >> 1) & 1
}

fn init_wave(ram: &mut RamState) {
    for r in 0..ROWS {
        ram[ALIEN_ROWS + r] = (1 << COLS) - 1;
    }
    ram[ANCHOR_X] = ANCHOR_X0;
    ram[ANCHOR_Y] = ANCHOR_Y0;
    ram[DIRECTION] = 0;
    ram[DRIFT] = 0;
}

fn grid_bottom(ram: &RamState) -> Option<i32> {
    (0..ROWS).rev().find(|&r| ram[ALIEN_ROWS + r] != 0).map(|r| alien_box(ram, r, 0).bottom())
}

impl Cartridge for Invaders {
    fn id(&self) -> GameId {
        GameId::Invaders
    }

    fn action_names(&self) -> &'static [&'static str] {
        &["NOOP", "LEFT", "RIGHT", "FIRE"]
    }

    fn categories(&self) -> &'static [CategoryInfo] {
        &CATEGORIES
    }

    fn quirks(&self) -> Vec<Quirk> {
        vec![
            Quirk::Blink {
                category: "PlayerMissile".into(),
                period: BLINK_PERIOD,
                phase_addr: PM_FLAGS,
                phase_bit: 1,
            },
            Quirk::ParticleEffect { duration: EXPLOSION_TICKS },
            Quirk::SizeJitter { category: "PlayerMissile".into(), min: PM_MIN_H, max: PM_H as u8 },
        ]
    }

    fn init(&self, _rng: &mut Xorshift64) -> RamState {
        let mut ram = RamState::default();
        init_wave(&mut ram);
        ram[PLAYER_X] = 76;
        for i in 0..3 {
            ram[SHIELD_HP + i] = SHIELD_HP0;
        }
        ram[LIVES] = LIVES0;
        ram
    }

    fn step(&self, ram: &mut RamState, rng: &mut Xorshift64, _quirks: QuirkSet, action: u8) -> TickOutcome {
        let jitter = PM_MIN_H + rng.below(u32::from(PM_H as u8 - PM_MIN_H) + 1) as u8;
        let fire_roll = rng.below(FIRE_ODDS);
        let col_roll = rng.below(u32::from(COLS)) as u8;
        let phase = u8::from(rng.bit());
        let mut reward = 0;

        if ram[EXPLOSION_TIMER] > 0 {
            ram[EXPLOSION_TIMER] -= 1;
        }

        let px = i32::from(ram[PLAYER_X]);
        ram[PLAYER_X] = match action {
            LEFT => (px - PLAYER_SPEED).clamp(PLAYER_MIN_X, PLAYER_MAX_X),
            RIGHT => (px + PLAYER_SPEED).clamp(PLAYER_MIN_X, PLAYER_MAX_X),
            _ => px,
        } as u8;

        if ram[PM_FLAGS] & 1 != 0 {
            let y = i32::from(ram[PM_Y]) - MISSILE_SPEED;
            if y < FIELD_TOP {
                ram[PM_FLAGS] = 0;
            } else {
                ram[PM_Y] = y as u8;
            }
        } else if action == FIRE {
            ram[PM_X] = ram[PLAYER_X] + 3;
            ram[PM_Y] = PM_SPAWN_Y;
            ram[PM_FLAGS] = 1 | (phase << 1);
        }

        if ram[EM_ACTIVE] != 0 {
            let y = i32::from(ram[EM_Y]) + MISSILE_SPEED;
            if y > FIELD_BOTTOM {
                ram[EM_ACTIVE] = 0;
            } else {
                ram[EM_Y] = y as u8;
            }
        } else if fire_roll == 0 {
            if let Some(row) = (0..ROWS).rev().find(|&r| alive(ram, r, col_roll)) {
                let b = alien_box(ram, row, col_roll);
                ram[EM_X] = (b.x + 3) as u8;
                ram[EM_Y] = b.bottom() as u8;
                ram[EM_ACTIVE] = 1;
            }
        }

        ram[DRIFT] = ram[DRIFT].wrapping_add(1);
        if ram[DRIFT].is_multiple_of(DRIFT_PERIOD) {
            let dir = if ram[DIRECTION] == 0 { 1 } else { -1 };
            let ax = i32::from(ram[ANCHOR_X]) + dir;
            if !(ANCHOR_MIN_X..=ANCHOR_MAX_X).contains(&ax) {
                ram[DIRECTION] ^= 1;
                ram[ANCHOR_Y] = ram[ANCHOR_Y].saturating_add(DESCENT);
            } else {
                ram[ANCHOR_X] = ax as u8;
            }
        }

        if let Some(pm) = pm_box(ram) {
            'hit: for r in 0..ROWS {
                for c in 0..COLS {
                    let b = alien_box(ram, r, c);
                    if alive(ram, r, c) && b.intersects(&pm) {
                        ram[ALIEN_ROWS + r] &= !(1 << c);
                        ram[PM_FLAGS] = 0;
                        ram[EXPLOSION_TIMER] = EXPLOSION_TICKS;
                        ram[EXPLOSION_X] = (b.x + 1) as u8;
                        ram[EXPLOSION_Y] = (b.y + 1) as u8;
                        let [lo, hi] = score(ram).saturating_add(1).to_le_bytes();
                        ram[SCORE_LO] = lo;
                        ram[SCORE_HI] = hi;
                        reward += 1;
                        break 'hit;
                    }
                }
            }
        }
        for i in 0..3 {
            if let Some(s) = shield_box(ram, i) {
                if pm_box(ram).is_some_and(|m| m.intersects(&s)) {
                    ram[SHIELD_HP + i as u8] -= 1;
                    ram[PM_FLAGS] = 0;
                }
            }
            if let Some(s) = shield_box(ram, i) {
                if em_box(ram).is_some_and(|m| m.intersects(&s)) {
                    ram[SHIELD_HP + i as u8] -= 1;
                    ram[EM_ACTIVE] = 0;
                }
            }
        }
        if em_box(ram).is_some_and(|m| m.intersects(&player_box(ram))) {
            ram[LIVES] = ram[LIVES].saturating_sub(1);
            ram[EM_ACTIVE] = 0;
        }
        if let (Some(p), Some(e)) = (pm_box(ram), em_box(ram)) {
            if p.intersects(&e) {
                ram[PM_FLAGS] = 0;
                ram[EM_ACTIVE] = 0;
            }
        }

        let cleared = (0..ROWS).all(|r| ram[ALIEN_ROWS + r] == 0);
        let invaded = grid_bottom(ram).is_some_and(|b| b >= INVADED_Y);

        TickOutcome {
            reward,
            terminated: cleared || invaded || ram[LIVES] == 0,
            draw: jitter,
        }
    }

    fn render(&self, ram: &RamState, view: RenderView, frame: &mut Frame) {
        for r in 0..ROWS {
            for c in 0..COLS {
                if alive(ram, r, c) {
                    frame.fill_rect(alien_box(ram, r, c), COLOR_ALIEN);
                }
            }
        }
        if let Some(b) = explosion_box(ram) {
            let color = if view.quirks.particle { COLOR_ALIEN } else { COLOR_DEBRIS };
            frame.fill_rect(b, color);
        }
        for i in 0..3 {
            if let Some(s) = shield_box(ram, i) {
                frame.fill_rect(s, COLOR_SHIELD);
            }
        }
        frame.fill_rect(player_box(ram), COLOR_PLAYER);
        if let Some(mut m) = pm_box(ram) {
            if !missile_hidden(ram, view) {
                if view.quirks.size_jitter && view.draw >= PM_MIN_H {
                    m.h = i32::from(view.draw.min(PM_H as u8));
                }
                frame.fill_rect(m, COLOR_PM);
            }
        }
        if let Some(m) = em_box(ram) {
            frame.fill_rect(m, COLOR_EM);
        }
        font::draw_number(frame, SCORE_X, HUD_Y, i64::from(score(ram)), COLOR_SCORE);
        font::draw_number(frame, LIVES_X, HUD_Y, i64::from(ram[LIVES]), COLOR_LIVES);
    }

    fn ground_truth(&self, ram: &RamState) -> Vec<GameObject> {
        let palette = Palette::console();
        let mut out = Vec::with_capacity(48);
        let mut push = |name: &'static str, b: BBox, color: u8, hud: bool, value: Option<i64>| {
            if let Some(b) = b.clip_to_frame() {
                let rgb = palette.color(color).expect("console color");
                let mut o = GameObject::new(Category::from_static(name), b, rgb, hud);
                o.value = value;
                out.push(o);
            }
        };
        push("Player", player_box(ram), COLOR_PLAYER, false, None);
        for r in 0..ROWS {
            for c in 0..COLS {
                if alive(ram, r, c) {
                    push("Alien", alien_box(ram, r, c), COLOR_ALIEN, false, None);
                }
            }
        }
        for i in 0..3 {
            if let Some(s) = shield_box(ram, i) {
                push("Shield", s, COLOR_SHIELD, false, None);
            }
        }
        if let Some(m) = pm_box(ram) {
            push("PlayerMissile", m, COLOR_PM, false, None);
        }
        if let Some(m) = em_box(ram) {
            push("EnemyMissile", m, COLOR_EM, false, None);
        }
        let s = i64::from(score(ram));
        let l = i64::from(ram[LIVES]);
        push("Score", font::number_box(SCORE_X, HUD_Y, s), COLOR_SCORE, true, Some(s));
        push("Lives", font::number_box(LIVES_X, HUD_Y, l), COLOR_LIVES, true, Some(l));
        out
    }

    fn decoder_spec(&self) -> DecoderSpec {
        let byte = |addr: u8| Coord::Byte { addr, mask: 0xFF, offset: 0 };
        let konst = |value: i32| Coord::Const { value };
        let one = |x: Coord, y: Coord, presence: Presence| Layout::Instances {
            items: vec![Instance { x, y, presence, size: None }],
        };
        let entry = |name: &'static str, color: u8, hud: bool, layout: Layout, size: SizeRule, value: Option<ValueRule>| {
            CategoryDecoder { category: Category::from_static(name), hud, color, layout, size, value }
        };
        let shields = (0..3u8)
            .map(|i| Instance {
                x: konst(SHIELD_XS[usize::from(i)]),
                y: konst(SHIELD_Y),
                presence: Presence::NonZero { addr: SHIELD_HP + i },
                size: Some(SizeRule::ByteScaled { addr: SHIELD_HP + i, scale: 4, h: SHIELD_H }),
            })
            .collect();
        DecoderSpec::new(
            "invaders",
            vec![
                entry(
                    "Player",
                    COLOR_PLAYER,
                    false,
                    one(byte(PLAYER_X), konst(PLAYER_Y), Presence::Always),
                    SizeRule::Fixed { w: PLAYER_W, h: PLAYER_H },
                    None,
                ),
                entry(
                    "Alien",
                    COLOR_ALIEN,
                    false,
                    Layout::Bitmap {
                        rows_addr: ALIEN_ROWS,
                        rows: ROWS,
                        cols: COLS,
                        anchor_x: ANCHOR_X,
                        anchor_y: ANCHOR_Y,
                        stride_x: STRIDE_X,
                        stride_y: STRIDE_Y,
                    },
                    SizeRule::Fixed { w: ALIEN_W, h: ALIEN_H },
                    None,
                ),
                entry(
                    "Shield",
                    COLOR_SHIELD,
                    false,
                    Layout::Instances { items: shields },
                    SizeRule::Fixed { w: 16, h: SHIELD_H },
                    None,
                ),
                entry(
                    "PlayerMissile",
                    COLOR_PM,
                    false,
                    one(byte(PM_X), byte(PM_Y), Presence::FlagBit { addr: PM_FLAGS, bit: 0 }),
                    SizeRule::Fixed { w: PM_W, h: PM_H },
                    None,
                ),
                entry(
                    "EnemyMissile",
                    COLOR_EM,
                    false,
                    one(byte(EM_X), byte(EM_Y), Presence::NonZero { addr: EM_ACTIVE }),
                    SizeRule::Fixed { w: EM_W, h: EM_H },
                    None,
                ),
                entry(
                    "Score",
                    COLOR_SCORE,
                    true,
                    one(konst(SCORE_X), konst(HUD_Y), Presence::Always),
                    SizeRule::Digits,
                    Some(ValueRule::Word { lo: SCORE_LO, hi: SCORE_HI }),
                ),
                entry(
                    "Lives",
                    COLOR_LIVES,
                    true,
                    one(konst(LIVES_X), konst(HUD_Y), Presence::Always),
                    SizeRule::Digits,
                    Some(ValueRule::Byte { addr: LIVES }),
                ),
            ],
        )
    }

    fn vision_spec(&self) -> VisionSpec {
        let field = Region::new(0, 20, 160, 210);
        let hud = Region::new(0, 0, 160, 20);
        let rule = |name: &'static str, color: u8, region: Region, max: (i32, i32), is_hud: bool| VisionRule {
            category: Category::from_static(name),
            colors: ColorSet::of(&[color]),
            region,
            min_size: (1, 1),
            max_size: max,
            hud: is_hud,
            priority: 0,
            merge: is_hud,
            digits: is_hud,
        };
        VisionSpec {
            game: "invaders".into(),
            rules: vec![
                rule("Player", COLOR_PLAYER, field, (PLAYER_W, PLAYER_H), false),
                rule("Alien", COLOR_ALIEN, field, (ALIEN_W, ALIEN_H), false),
                rule("Shield", COLOR_SHIELD, field, (16, SHIELD_H), false),
                rule("PlayerMissile", COLOR_PM, field, (PM_W, PM_H), false),
                rule("EnemyMissile", COLOR_EM, field, (EM_W, EM_H), false),
                rule("Score", COLOR_SCORE, hud, (160, 20), true),
                rule("Lives", COLOR_LIVES, hud, (160, 20), true),
            ],
        }
    }

    fn ram_map(&self) -> RamMap {
        let mut fields: Vec<_> = (0..ROWS)
            .map(|r| field(ALIEN_ROWS + r, &format!("alien_row_{r}"), "bit c set = column c alive", true))
            .collect();
        fields.extend([
            field(PLAYER_X, "player_x", "player left edge, 4..=148", true),
            field(PM_X, "player_missile_x", "player missile left edge", true),
            field(PM_Y, "player_missile_y", "player missile top edge", true),
            field(PM_FLAGS, "player_missile_flags", "bit0 active, bit1 blink phase", true),
            field(EM_X, "enemy_missile_x", "enemy missile left edge", true),
            field(EM_Y, "enemy_missile_y", "enemy missile top edge", true),
            field(EM_ACTIVE, "enemy_missile_active", "non-zero while in flight", true),
            field(ANCHOR_X, "grid_x", "left edge of alien column 0", true),
            field(ANCHOR_Y, "grid_y", "top edge of alien row 0", true),
        ]);
        for i in 0..3 {
            fields.push(field(SHIELD_HP + i, &format!("shield_{i}_hp"), "0..=4; width = 4 * hp", true));
        }
        fields.extend([
            field(EXPLOSION_TIMER, "explosion_timer", "ticks left on the explosion", true),
            field(EXPLOSION_X, "explosion_x", "explosion left edge", true),
            field(EXPLOSION_Y, "explosion_y", "explosion top edge", true),
            field(LIVES, "lives", "HUD digit", true),
            field(SCORE_LO, "score_lo", "score low byte", true),
            field(SCORE_HI, "score_hi", "score high byte", true),
            field(DIRECTION, "grid_direction", "0 right, 1 left", false),
            field(DRIFT, "drift_counter", "grid moves when a multiple of 4", false),
        ]);
        let mut affines = vec![
            affine(PLAYER_X, "Player", "x", 1.0, vec![0.0]),
            affine(PM_X, "PlayerMissile", "x", 1.0, vec![0.0]),
            affine(PM_Y, "PlayerMissile", "y", 1.0, vec![0.0]),
            affine(EM_X, "EnemyMissile", "x", 1.0, vec![0.0]),
            affine(EM_Y, "EnemyMissile", "y", 1.0, vec![0.0]),
            affine(ANCHOR_X, "Alien", "x", 1.0, (0..COLS).map(|c| f64::from(c) * f64::from(STRIDE_X)).collect()),
            affine(ANCHOR_Y, "Alien", "y", 1.0, (0..ROWS).map(|r| f64::from(r) * f64::from(STRIDE_Y)).collect()),
        ];
        for i in 0..3 {
            affines.push(affine(SHIELD_HP + i, "Shield", "w", 4.0, vec![0.0]));
        }
        RamMap {
            game: GameId::Invaders,
            fields,
            affine: affines,
        }
    }

    fn score(&self, ram: &RamState) -> i64 {
        i64::from(score(ram))
    }

    fn attribute(&self, ram: &RamState, view: RenderView, m: &Mismatch) -> Option<QuirkKind> {
        match (m.category.as_str(), m.kind) {
            ("PlayerMissile", MismatchKind::RemOnly) if missile_hidden(ram, view) => Some(QuirkKind::Blink),
            ("Alien", MismatchKind::VemOnly) if view.quirks.particle => {
                let ex = explosion_box(ram)?;
                m.reference.filter(|b| b.intersects(&ex)).map(|_| QuirkKind::Particle)
            }
            ("PlayerMissile", MismatchKind::BoxDiffers) if view.quirks.size_jitter => Some(QuirkKind::SizeJitter),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::console::Console;

    #[test]
    fn full_grid_at_start() {
        let c = Console::new(GameId::Invaders, 0);
        let gt = c.ground_truth_objects();
        assert_eq!(gt.of_category("Alien").count(), 36);
        assert_eq!(gt.of_category("Shield").count(), 3);
        assert_eq!(gt.of_category("PlayerMissile").count(), 0);
    }

    #[test]
    fn fire_spawns_missile_above_player() {
        let mut c = Console::new(GameId::Invaders, 0);
        c.tick(FIRE).unwrap();
        let ram = c.ram();
        assert_eq!(ram[PM_FLAGS] & 1, 1);
        assert_eq!(ram[PM_X], ram[PLAYER_X] + 3);
        assert_eq!(ram[PM_Y], PM_SPAWN_Y);
    }

    #[test]
    fn missile_kills_alien_and_scores() {
        let mut c = Console::new(GameId::Invaders, 1);
        // Put the missile just under alien (5, 0).
        let b = alien_box(c.ram(), 5, 0);
        c.poke(PM_X as usize, (b.x + 3) as u8).unwrap();
        c.poke(PM_Y as usize, (b.bottom() + 2) as u8).unwrap();
        c.poke(PM_FLAGS as usize, 1).unwrap();
        c.poke(DRIFT as usize, 1).unwrap();
        let (reward, _) = c.tick(NOOP).unwrap();
        assert_eq!(reward, 1);
        assert_eq!(c.ram()[ALIEN_ROWS + 5] & 1, 0);
        assert_eq!(c.ram()[EXPLOSION_TIMER], EXPLOSION_TICKS);
        assert_eq!(c.score(), 1);
    }

    #[test]
    fn particle_quirk_paints_debris_in_alien_color() {
        let mut c = Console::new(GameId::Invaders, 0);
        c.poke(ANCHOR_Y as usize, 100).unwrap();
        c.poke(EXPLOSION_TIMER as usize, 4).unwrap();
        c.poke(EXPLOSION_X as usize, 10).unwrap();
        c.poke(EXPLOSION_Y as usize, 40).unwrap();
        let quirked = c.render();
        assert_eq!(quirked.get(10, 40), COLOR_ALIEN);
        let plain = Console::with_quirks(GameId::Invaders, 0, QuirkSet::NONE);
        let mut plain = plain;
        plain.restore(&c.snapshot()).unwrap();
        assert_eq!(plain.render().get(10, 40), COLOR_DEBRIS);
    }

    #[test]
    fn grid_reverses_and_descends_at_edge() {
        let mut c = Console::new(GameId::Invaders, 0);
        c.poke(ANCHOR_X as usize, ANCHOR_MAX_X as u8).unwrap();
        c.poke(DRIFT as usize, DRIFT_PERIOD - 1).unwrap();
        c.tick(NOOP).unwrap();
        assert_eq!(c.ram()[DIRECTION], 1);
        assert_eq!(c.ram()[ANCHOR_Y], ANCHOR_Y0 + DESCENT);
    }

    #[test]
    fn jitter_only_changes_rendered_height() {
        let mut c = Console::new(GameId::Invaders, 0);
        c.poke(PM_FLAGS as usize, 1).unwrap();
        c.poke(PM_X as usize, 3).unwrap();
        c.poke(PM_Y as usize, 120).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..40 {
            c.poke(PM_Y as usize, 120).unwrap();
            c.tick(NOOP).unwrap();
            let view = c.view();
            let f = c.render();
            let lit = f.count_index(COLOR_PM);
            if missile_hidden(c.ram(), view) {
                assert_eq!(lit, 0);
            } else {
                assert!((PM_MIN_H..=PM_H as u8).contains(&view.draw));
                assert_eq!(lit, usize::from(view.draw));
                seen.insert(view.draw);
            }
            assert_eq!(c.ground_truth_objects().of_category("PlayerMissile").next().unwrap().h, PM_H);
        }
        assert!(seen.len() > 1);
    }
}
