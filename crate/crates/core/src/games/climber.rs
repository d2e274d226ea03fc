//! Kangaroo-like platformer: the player's height is a categorical floor plus
//! a fine offset, enemies patrol each floor, and a blinking fruit drifts
//! along one of them.
//!
//! RAM map:
//!
//! | addr | meaning |
//! |------|---------|
//! | 0 | player x, 0..=152 |
//! | 1 | floor index 0..=2 (0 = bottom) |
//! | 2 | fine height above the floor |
//! | 3 | flags: bit 0 jumping, bit 1 falling, bit 2 climbing |
//! | 4-6 | enemy per floor: bit 7 active, bits 0-6 patrol offset 0..=120 (x = offset + 8) |
//! | 7 | fruit x |
//! | 8 | fruit flags: bits 0-1 floor, bit 2 active, bit 3 blink phase |
//! | 9 | lives |
//! | 10 | score |
//! | 11 | enemy directions, bit f set = floor f moving left |
//! | 12-14 | enemy respawn timers |
//! | 15 | fruit respawn timer |
//! | 16 | fruit direction, 0 right, 1 left |

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

pub const PLAYER_X: u8 = 0;
pub const FLOOR: u8 = 1;
pub const FINE: u8 = 2;
pub const FLAGS: u8 = 3;
pub const ENEMY: u8 = 4;
pub const FRUIT_X: u8 = 7;
pub const FRUIT_FLAGS: u8 = 8;
pub const LIVES: u8 = 9;
pub const SCORE: u8 = 10;
pub const ENEMY_DIRS: u8 = 11;
pub const ENEMY_TIMERS: u8 = 12;
pub const FRUIT_TIMER: u8 = 15;
pub const FRUIT_DIR: u8 = 16;

pub const NOOP: u8 = 0;
pub const LEFT: u8 = 1;
pub const RIGHT: u8 = 2;
pub const JUMP: u8 = 3;
pub const UP: u8 = 4;

pub const JUMPING: u8 = 1;
pub const FALLING: u8 = 2;
pub const CLIMBING: u8 = 4;

pub const FLOORS: usize = 3;
/// Top edge of each floor's platform.
pub const FLOOR_Y: [i32; FLOORS] = [188, 128, 68];
pub const LADDER_X: [i32; FLOORS] = [132, 20, 132];
pub const LADDER_W: i32 = 8;
pub const PLATFORM_H: i32 = 4;
pub const PLAYER_W: i32 = 8;
pub const PLAYER_H: i32 = 16;
pub const PLAYER_MAX_X: i32 = 152;
pub const PLAYER_SPEED: i32 = 2;
pub const JUMP_SPEED: u8 = 4;
pub const JUMP_APEX: u8 = 31;
pub const CLIMB_SPEED: u8 = 2;
pub const CLIMB_TOP: u8 = 30;
pub const LADDER_REACH: i32 = 4;
pub const SHRINK_THRESHOLD: u8 = 24;
pub const SHRUNK_H: i32 = 12;
pub const ENEMY_W: i32 = 8;
pub const ENEMY_H: i32 = 8;
pub const ENEMY_X0: i32 = 8;
pub const ENEMY_SPAN: u8 = 120;
pub const ENEMY_ACTIVE: u8 = 0x80;
pub const FRUIT_SIZE: i32 = 6;
pub const FRUIT_MIN_X: i32 = 8;
pub const FRUIT_MAX_X: i32 = 146;
pub const RESPAWN_TICKS: u8 = 60;
pub const EXIT_REWARD: i32 = 10;
pub const SCORE_X: i32 = 8;
pub const LIVES_X: i32 = 148;
pub const HUD_Y: i32 = 4;
pub const LIVES0: u8 = 3;
pub const BLINK_PERIOD: u8 = 2;

const COLOR_ENEMY: u8 = 5;
const COLOR_PLAYER: u8 = 6;
const COLOR_FRUIT: u8 = 10;
const COLOR_SCORE: u8 = 11;
const COLOR_LIVES: u8 = 12;
const COLOR_LADDER: u8 = 13;
const COLOR_PLATFORM: u8 = 14;

const CATEGORIES: [CategoryInfo; 5] = [
    CategoryInfo { name: "Player", color: COLOR_PLAYER, hud: false, size: (PLAYER_W, PLAYER_H), max_instances: 1 },
    CategoryInfo { name: "Enemy", color: COLOR_ENEMY, hud: false, size: (ENEMY_W, ENEMY_H), max_instances: FLOORS },
    CategoryInfo { name: "Fruit", color: COLOR_FRUIT, hud: false, size: (FRUIT_SIZE, FRUIT_SIZE), max_instances: 1 },
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

pub struct Climber;

fn floor_of(ram: &RamState) -> usize {
    usize::from(ram[FLOOR]).min(FLOORS - 1)
}

pub fn player_box(ram: &RamState) -> BBox {
    let y = FLOOR_Y[floor_of(ram)] - PLAYER_H - i32::from(ram[FINE]);
    BBox::new(i32::from(ram[PLAYER_X]), y, PLAYER_W, PLAYER_H)
}

pub fn enemy_box(ram: &RamState, floor: usize) -> Option<BBox> {
    let b = ram[ENEMY + floor as u8];
    (b & ENEMY_ACTIVE != 0)
        .then(|| BBox::new(i32::from(b & 0x7F) + ENEMY_X0, FLOOR_Y[floor] - ENEMY_H, ENEMY_W, ENEMY_H))
}

pub fn fruit_box(ram: &RamState) -> Option<BBox> {
    let flags = ram[FRUIT_FLAGS];
    let floor = usize::from(flags & 3);
    (flags & 4 != 0 && floor < FLOORS).then(|| {
        BBox::new(
            i32::from(ram[FRUIT_X]),
            FLOOR_Y[floor] - PLAYER_H + 2,
            FRUIT_SIZE,
            FRUIT_SIZE,
        )
    })
}

pub fn shrunk(ram: &RamState, quirks: QuirkSet) -> bool {
    quirks.sprite_shrink && ram[FLAGS] & JUMPING != 0 && ram[FINE] >= SHRINK_THRESHOLD
}

pub fn fruit_hidden(ram: &RamState, view: RenderView) -> bool {
    view.quirks.blink
        && ram[FRUIT_FLAGS] & 4 != 0
        && (view.frame_counter % u64::from(BLINK_PERIOD)) as u8 != (ram[FRUIT_FLAGS] >> 3) & 1
}

pub fn at_ladder(ram: &RamState) -> bool {
    (i32::from(ram[PLAYER_X]) - LADDER_X[floor_of(ram)]).abs() <= LADDER_REACH
}

fn spawn_fruit(ram: &mut RamState, rng_floor: u8, rng_x: u8, phase: u8) {
    ram[FRUIT_X] = rng_x;
    ram[FRUIT_FLAGS] = (rng_floor % FLOORS as u8) | 4 | (phase << 3);
}

impl Climber {
    fn step_player(ram: &mut RamState, action: u8) -> i32 {
        let flags = ram[FLAGS];
        if flags & CLIMBING != 0 {
            if action == UP {
                if ram[FINE] >= CLIMB_TOP {
                    ram[FLAGS] = 0;
                    ram[FINE] = 0;
                    if floor_of(ram) == FLOORS - 1 {
                        return EXIT_REWARD;
                    }
                    ram[FLOOR] += 1;
                } else {
                    ram[FINE] = (ram[FINE] + CLIMB_SPEED).min(CLIMB_TOP);
                }
            }
            return 0;
        }

        let x = i32::from(ram[PLAYER_X]);
        match action {
            LEFT => ram[PLAYER_X] = (x - PLAYER_SPEED).clamp(0, PLAYER_MAX_X) as u8,
            RIGHT => ram[PLAYER_X] = (x + PLAYER_SPEED).clamp(0, PLAYER_MAX_X) as u8,
            _ => {}
        }

        if flags & JUMPING != 0 {
            if flags & FALLING == 0 {
                ram[FINE] = (ram[FINE] + JUMP_SPEED).min(JUMP_APEX);
                if ram[FINE] >= JUMP_APEX {
                    ram[FLAGS] |= FALLING;
                }
            } else {
                ram[FINE] = ram[FINE].saturating_sub(JUMP_SPEED);
                if ram[FINE] == 0 {
                    ram[FLAGS] = 0;
                }
            }
        } else if action == JUMP {
            ram[FLAGS] = JUMPING;
            ram[FINE] = JUMP_SPEED;
        } else if action == UP && at_ladder(ram) {
            ram[PLAYER_X] = LADDER_X[floor_of(ram)] as u8;
            ram[FLAGS] = CLIMBING;
            ram[FINE] = CLIMB_SPEED;
        }
        0
    }
}

impl Cartridge for Climber {
    fn id(&self) -> GameId {
        GameId::Climber
    }

    fn action_names(&self) -> &'static [&'static str] {
        &["NOOP", "LEFT", "RIGHT", "JUMP", "UP"]
    }

    fn categories(&self) -> &'static [CategoryInfo] {
        &CATEGORIES
    }

    fn quirks(&self) -> Vec<Quirk> {
        vec![
            Quirk::SpriteShrink { category: "Player".into(), threshold: SHRINK_THRESHOLD },
            Quirk::Blink {
                category: "Fruit".into(),
                period: BLINK_PERIOD,
                phase_addr: FRUIT_FLAGS,
                phase_bit: 3,
            },
        ]
    }

    fn init(&self, rng: &mut Xorshift64) -> RamState {
        let mut ram = RamState::default();
        ram[PLAYER_X] = 16;
        ram[LIVES] = LIVES0;
        ram[ENEMY] = ENEMY_ACTIVE | ENEMY_SPAN;
        ram[ENEMY + 1] = ENEMY_ACTIVE | 40;
        ram[ENEMY + 2] = ENEMY_ACTIVE | 80;
        ram[ENEMY_DIRS] = 0b001;
        let floor = rng.below(FLOORS as u32) as u8;
        let x = (FRUIT_MIN_X as u32 + rng.below((FRUIT_MAX_X - FRUIT_MIN_X) as u32)) as u8;
        spawn_fruit(&mut ram, floor, x, u8::from(rng.bit()));
        ram
    }

    fn step(&self, ram: &mut RamState, rng: &mut Xorshift64, _quirks: QuirkSet, action: u8) -> TickOutcome {
        let fruit_floor = rng.below(FLOORS as u32) as u8;
        let fruit_x = (FRUIT_MIN_X as u32 + rng.below((FRUIT_MAX_X - FRUIT_MIN_X) as u32)) as u8;
        let phase = u8::from(rng.bit());

        let mut reward = Self::step_player(ram, action);
        if reward == EXIT_REWARD {
            ram[SCORE] = ram[SCORE].saturating_add(EXIT_REWARD as u8);
            return TickOutcome { reward, terminated: true, draw: 0 };
        }

        let player = player_box(ram);
        #[allow(clippy::needless_range_loop)]
        for f in 0..FLOORS {
            let addr = ENEMY + f as u8;
            let b = ram[addr];
            if b & ENEMY_ACTIVE != 0 {
                let mut off = i32::from(b & 0x7F);
                let left = ram[ENEMY_DIRS] & (1 << f) != 0;
                off += if left { -1 } else { 1 };
                if off <= 0 || off >= i32::from(ENEMY_SPAN) {
                    ram[ENEMY_DIRS] ^= 1 << f;
                }
                ram[addr] = ENEMY_ACTIVE | off.clamp(0, i32::from(ENEMY_SPAN)) as u8;
            } else {
                let timer = ENEMY_TIMERS + f as u8;
                if ram[timer] > 0 {
                    ram[timer] -= 1;
                } else {
                    // Respawn at whichever patrol end is farther from the player.
                    let px = i32::from(ram[PLAYER_X]);
                    let mid = ENEMY_X0 + i32::from(ENEMY_SPAN) / 2;
                    let (off, dir_left) = if px > mid { (0, false) } else { (ENEMY_SPAN, true) };
                    let candidate = BBox::new(i32::from(off) + ENEMY_X0, FLOOR_Y[f] - ENEMY_H, ENEMY_W, ENEMY_H);
                    if !candidate.intersects(&player) {
                        ram[addr] = ENEMY_ACTIVE | off;
                        if dir_left {
                            ram[ENEMY_DIRS] |= 1 << f;
                        } else {
                            ram[ENEMY_DIRS] &= !(1 << f);
                        }
                    }
                }
            }
        }

        if ram[FRUIT_FLAGS] & 4 != 0 {
            let x = i32::from(ram[FRUIT_X]);
            let left = ram[FRUIT_DIR] != 0;
            let nx = x + if left { -1 } else { 1 };
            if nx <= FRUIT_MIN_X || nx >= FRUIT_MAX_X {
                ram[FRUIT_DIR] ^= 1;
            }
            ram[FRUIT_X] = nx.clamp(FRUIT_MIN_X, FRUIT_MAX_X) as u8;
        } else if ram[FRUIT_TIMER] > 0 {
            ram[FRUIT_TIMER] -= 1;
        } else {
            spawn_fruit(ram, fruit_floor, fruit_x, phase);
            if fruit_box(ram).is_some_and(|b| b.intersects(&player)) {
                ram[FRUIT_FLAGS] = 0;
            }
        }

        for f in 0..FLOORS {
            if enemy_box(ram, f).is_some_and(|e| e.intersects(&player)) {
                ram[ENEMY + f as u8] &= !ENEMY_ACTIVE;
                ram[ENEMY_TIMERS + f as u8] = RESPAWN_TICKS;
                ram[LIVES] = ram[LIVES].saturating_sub(1);
            }
        }
        if fruit_box(ram).is_some_and(|b| b.intersects(&player)) {
            ram[FRUIT_FLAGS] = 0;
            ram[FRUIT_TIMER] = RESPAWN_TICKS;
            ram[SCORE] = ram[SCORE].saturating_add(1);
            reward += 1;
        }

        TickOutcome {
            reward,
            terminated: ram[LIVES] == 0,
            draw: 0,
        }
    }

    fn render(&self, ram: &RamState, view: RenderView, frame: &mut Frame) {
        for (f, &y) in FLOOR_Y.iter().enumerate() {
            frame.fill_rect(BBox::new(0, y, 160, PLATFORM_H), COLOR_PLATFORM);
            let top = if f + 1 < FLOORS { FLOOR_Y[f + 1] + PLATFORM_H } else { 24 };
            frame.fill_rect(BBox::new(LADDER_X[f], top, LADDER_W, y - top), COLOR_LADDER);
        }
        for f in 0..FLOORS {
            if let Some(e) = enemy_box(ram, f) {
                frame.fill_rect(e, COLOR_ENEMY);
            }
        }
        if let Some(b) = fruit_box(ram) {
            if !fruit_hidden(ram, view) {
                frame.fill_rect(b, COLOR_FRUIT);
            }
        }
        let mut p = player_box(ram);
        if shrunk(ram, view.quirks) {
            p.y += PLAYER_H - SHRUNK_H;
            p.h = SHRUNK_H;
        }
        frame.fill_rect(p, COLOR_PLAYER);
        font::draw_number(frame, SCORE_X, HUD_Y, i64::from(ram[SCORE]), COLOR_SCORE);
        font::draw_number(frame, LIVES_X, HUD_Y, i64::from(ram[LIVES]), COLOR_LIVES);
    }

    fn ground_truth(&self, ram: &RamState) -> Vec<GameObject> {
        let palette = Palette::console();
        let mut out = Vec::with_capacity(7);
        let mut push = |name: &'static str, b: BBox, color: u8, hud: bool, value: Option<i64>| {
            if let Some(b) = b.clip_to_frame() {
                let rgb = palette.color(color).expect("console color");
                let mut o = GameObject::new(Category::from_static(name), b, rgb, hud);
                o.value = value;
                out.push(o);
            }
        };
        push("Player", player_box(ram), COLOR_PLAYER, false, None);
        for f in 0..FLOORS {
            if let Some(e) = enemy_box(ram, f) {
                push("Enemy", e, COLOR_ENEMY, false, None);
            }
        }
        if let Some(b) = fruit_box(ram) {
            push("Fruit", b, COLOR_FRUIT, false, None);
        }
        let s = i64::from(ram[SCORE]);
        let l = i64::from(ram[LIVES]);
        push("Score", font::number_box(SCORE_X, HUD_Y, s), COLOR_SCORE, true, Some(s));
        push("Lives", font::number_box(LIVES_X, HUD_Y, l), COLOR_LIVES, true, Some(l));
        out
    }

    fn decoder_spec(&self) -> DecoderSpec {
        let konst = |value: i32| Coord::Const { value };
        let one = |x: Coord, y: Coord, presence: Presence| Layout::Instances {
            items: vec![Instance { x, y, presence, size: None }],
        };
        let enemies = (0..FLOORS)
            .map(|f| Instance {
                x: Coord::Byte { addr: ENEMY + f as u8, mask: 0x7F, offset: ENEMY_X0 },
                y: konst(FLOOR_Y[f] - ENEMY_H),
                presence: Presence::FlagBit { addr: ENEMY + f as u8, bit: 7 },
                size: None,
            })
            .collect();
        DecoderSpec::new(
            "climber",
            vec![
                CategoryDecoder {
                    category: Category::from_static("Player"),
                    hud: false,
                    color: COLOR_PLAYER,
                    layout: one(
                        Coord::Byte { addr: PLAYER_X, mask: 0xFF, offset: 0 },
                        Coord::Categorical {
                            index_addr: FLOOR,
                            index_mask: 0xFF,
                            table: FLOOR_Y.iter().map(|y| y - PLAYER_H).collect(),
                            fine_addr: Some(FINE),
                            fine_scale: -1,
                            offset: 0,
                        },
                        Presence::Always,
                    ),
                    size: SizeRule::Fixed { w: PLAYER_W, h: PLAYER_H },
                    value: None,
                },
                CategoryDecoder {
                    category: Category::from_static("Enemy"),
                    hud: false,
                    color: COLOR_ENEMY,
                    layout: Layout::Instances { items: enemies },
                    size: SizeRule::Fixed { w: ENEMY_W, h: ENEMY_H },
                    value: None,
                },
                CategoryDecoder {
                    category: Category::from_static("Fruit"),
                    hud: false,
                    color: COLOR_FRUIT,
                    layout: one(
                        Coord::Byte { addr: FRUIT_X, mask: 0xFF, offset: 0 },
                        Coord::Categorical {
                            index_addr: FRUIT_FLAGS,
                            index_mask: 3,
                            table: FLOOR_Y.iter().map(|y| y - PLAYER_H + 2).collect(),
                            fine_addr: None,
                            fine_scale: 0,
                            offset: 0,
                        },
                        Presence::FlagBit { addr: FRUIT_FLAGS, bit: 2 },
                    ),
                    size: SizeRule::Fixed { w: FRUIT_SIZE, h: FRUIT_SIZE },
                    value: None,
                },
                CategoryDecoder {
                    category: Category::from_static("Score"),
                    hud: true,
                    color: COLOR_SCORE,
                    layout: one(konst(SCORE_X), konst(HUD_Y), Presence::Always),
                    size: SizeRule::Digits,
                    value: Some(ValueRule::Byte { addr: SCORE }),
                },
                CategoryDecoder {
                    category: Category::from_static("Lives"),
                    hud: true,
                    color: COLOR_LIVES,
                    layout: one(konst(LIVES_X), konst(HUD_Y), Presence::Always),
                    size: SizeRule::Digits,
                    value: Some(ValueRule::Byte { addr: LIVES }),
                },
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
            game: "climber".into(),
            rules: vec![
                rule("Player", COLOR_PLAYER, field, (PLAYER_W, PLAYER_H), false),
                rule("Enemy", COLOR_ENEMY, field, (ENEMY_W, ENEMY_H), false),
                rule("Fruit", COLOR_FRUIT, field, (FRUIT_SIZE, FRUIT_SIZE), false),
                rule("Score", COLOR_SCORE, hud, (160, 20), true),
                rule("Lives", COLOR_LIVES, hud, (160, 20), true),
            ],
        }
    }

    fn ram_map(&self) -> RamMap {
        let mut fields = vec![
            field(PLAYER_X, "player_x", "player left edge, 0..=152", true),
            field(FLOOR, "floor", "0 bottom .. 2 top", true),
            field(FINE, "fine_y", "height above the floor in pixels", true),
            field(FLAGS, "player_flags", "bit0 jumping, bit1 falling, bit2 climbing", true),
        ];
        for f in 0..FLOORS as u8 {
            fields.push(field(ENEMY + f, &format!("enemy_{f}"), "bit7 active, bits0-6 offset; x = offset + 8", true));
        }
        fields.extend([
            field(FRUIT_X, "fruit_x", "fruit left edge", true),
            field(FRUIT_FLAGS, "fruit_flags", "bits0-1 floor, bit2 active, bit3 blink phase", true),
            field(LIVES, "lives", "HUD digit", true),
            field(SCORE, "score", "HUD digits", true),
            field(ENEMY_DIRS, "enemy_dirs", "bit f set = floor f moving left", false),
        ]);
        for f in 0..FLOORS as u8 {
            fields.push(field(ENEMY_TIMERS + f, &format!("enemy_{f}_timer"), "respawn countdown", false));
        }
        fields.extend([
            field(FRUIT_TIMER, "fruit_timer", "respawn countdown", false),
            field(FRUIT_DIR, "fruit_dir", "0 right, 1 left", false),
        ]);
        let mut affines = vec![
            affine(PLAYER_X, "Player", "x", 1.0, vec![0.0]),
            affine(FRUIT_X, "Fruit", "x", 1.0, vec![0.0]),
        ];
        for f in 0..FLOORS as u8 {
            affines.push(affine(
                ENEMY + f,
                "Enemy",
                "x",
                1.0,
                vec![f64::from(ENEMY_X0) - f64::from(ENEMY_ACTIVE)],
            ));
        }
        RamMap {
            game: GameId::Climber,
            fields,
            affine: affines,
        }
    }

    fn score(&self, ram: &RamState) -> i64 {
        i64::from(ram[SCORE])
    }

    fn attribute(&self, ram: &RamState, view: RenderView, m: &Mismatch) -> Option<QuirkKind> {
        match (m.category.as_str(), m.kind) {
            ("Fruit", MismatchKind::RemOnly) if fruit_hidden(ram, view) => Some(QuirkKind::Blink),
            ("Player", MismatchKind::BoxDiffers) if shrunk(ram, view.quirks) => Some(QuirkKind::SpriteShrink),
            _ => None,
        }
    }
}
