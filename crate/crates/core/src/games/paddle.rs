//! Pong-like cartridge: direct coordinates, a render offset on the paddles,
//! and a post-point freeze during which the ball is not drawn.
//!
//! RAM map:
//!
//! | addr | meaning |
//! |------|---------|
//! | 0 | ball x, 4..=156 |
//! | 1 | ball y, 24..=200 |
//! | 2 | player paddle raw y (drawn at raw + 10) |
//! | 3 | enemy paddle raw y (drawn at raw + 10) |
//! | 4 | player score 0..=20 |
//! | 5 | enemy score |
//! | 6 | freeze counter |
//! | 7 | ball velocity: bits 0-3 abs(dx), bit 4 dx negative, bit 5 dy negative, bits 6-7 abs(dy) |

use crate::console::RamState;
use crate::evalkit::Mismatch;
use crate::games::font;
use crate::games::{
    affine, field, Cartridge, CategoryInfo, GameId, Quirk, QuirkKind, QuirkSet, RamMap, RenderView, TickOutcome,
};
use crate::model::{BBox, Category, Frame, GameObject, Palette};
use crate::rem::{CategoryDecoder, Coord, DecoderSpec, Instance, Layout, Presence, SizeRule, ValueRule};
use crate::rng::Xorshift64;
use crate::vem::{ColorSet, Region, VisionRule, VisionSpec};

pub const BALL_X: u8 = 0;
pub const BALL_Y: u8 = 1;
pub const PLAYER_Y: u8 = 2;
pub const ENEMY_Y: u8 = 3;
pub const PLAYER_SCORE: u8 = 4;
pub const ENEMY_SCORE: u8 = 5;
pub const FREEZE: u8 = 6;
pub const VELOCITY: u8 = 7;

pub const NOOP: u8 = 0;
pub const UP: u8 = 1;
pub const DOWN: u8 = 2;

pub const PLAYER_X: i32 = 140;
pub const ENEMY_X: i32 = 16;
pub const PADDLE_W: i32 = 4;
pub const PADDLE_H: i32 = 16;
pub const BALL_W: i32 = 2;
pub const BALL_H: i32 = 4;
pub const RENDER_OFFSET: i32 = 10;
pub const PADDLE_MIN: i32 = 24;
pub const PADDLE_MAX: i32 = 184;
pub const PADDLE_SPEED: i32 = 2;
pub const BALL_MIN_Y: i32 = 24;
pub const BALL_MAX_Y: i32 = 200;
pub const SERVE_X: u8 = 79;
pub const SERVE_Y: u8 = 110;
pub const FREEZE_TICKS: u8 = 30;
pub const WIN_SCORE: u8 = 20;
pub const PLAYER_SCORE_X: i32 = 116;
pub const ENEMY_SCORE_X: i32 = 36;
pub const SCORE_Y: i32 = 4;

const COLOR_BALL: u8 = 1;
const COLOR_PLAYER: u8 = 2;
const COLOR_ENEMY: u8 = 3;

/// Extra dead-zone pixels the enemy tracker draws each tick.
const ENEMY_JITTER: u32 = 14;
const ENEMY_DEAD_ZONE: i32 = 2;

const CATEGORIES: [CategoryInfo; 5] = [
    CategoryInfo { name: "Player", color: COLOR_PLAYER, hud: false, size: (PADDLE_W, PADDLE_H), max_instances: 1 },
    CategoryInfo { name: "Enemy", color: COLOR_ENEMY, hud: false, size: (PADDLE_W, PADDLE_H), max_instances: 1 },
    CategoryInfo { name: "Ball", color: COLOR_BALL, hud: false, size: (BALL_W, BALL_H), max_instances: 1 },
    CategoryInfo {
        name: "PlayerScore",
        color: COLOR_PLAYER,
        hud: true,
        size: (font::DIGIT_W, font::DIGIT_H),
        max_instances: 1,
    },
    CategoryInfo {
        name: "EnemyScore",
        color: COLOR_ENEMY,
        hud: true,
        size: (font::DIGIT_W, font::DIGIT_H),
        max_instances: 1,
    },
];

/// Unpacked ball velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Velocity {
    pub dx: i32,
    pub dy: i32,
}

impl Velocity {
    pub fn decode(byte: u8) -> Self {
        let adx = i32::from(byte & 0x0F);
        let ady = i32::from(byte >> 6);
        Velocity {
            dx: if byte & 0x10 != 0 { -adx } else { adx },
            dy: if byte & 0x20 != 0 { -ady } else { ady },
        }
    }

    pub fn encode(self) -> u8 {
        let mut b = (self.dx.unsigned_abs().min(15) as u8) | ((self.dy.unsigned_abs().min(3) as u8) << 6);
        if self.dx < 0 {
            b |= 0x10;
        }
        if self.dy < 0 {
            b |= 0x20;
        }
        b
    }
}

pub struct Paddle;

fn paddle_box(x: i32, raw: u8) -> BBox {
    BBox::new(x, i32::from(raw) + RENDER_OFFSET, PADDLE_W, PADDLE_H)
}

fn ball_box(ram: &RamState) -> BBox {
    BBox::new(i32::from(ram[BALL_X]), i32::from(ram[BALL_Y]), BALL_W, BALL_H)
}

fn overlaps(a0: i32, a1: i32, b0: i32, b1: i32) -> bool {
    a0 < b1 && b0 < a1
}

/// New ball velocity after hitting a paddle whose drawn top is `top`.
fn deflect(ball_y: i32, top: i32, toward: i32) -> Velocity {
    let off = (ball_y + BALL_H / 2) - (top + PADDLE_H / 2);
    let ady = (off.abs() / 3).min(2);
    let adx = if off.abs() >= 6 { 2 } else { 1 };
    Velocity {
        dx: toward * adx,
        dy: off.signum() * ady,
    }
}

impl Paddle {
    fn score_point(ram: &mut RamState, rng: &mut Xorshift64, quirks: QuirkSet, player_scored: bool) -> i32 {
        let (addr, reward, serve_dx) = if player_scored {
            (PLAYER_SCORE, 1, -1)
        } else {
            (ENEMY_SCORE, -1, 1)
        };
        ram[addr] = ram[addr].saturating_add(1);
        if quirks.freeze {
            ram[FREEZE] = FREEZE_TICKS;
        }
        ram[BALL_X] = SERVE_X;
        ram[BALL_Y] = SERVE_Y;
        let dy = if rng.bit() { 1 } else { -1 };
        ram[VELOCITY] = Velocity { dx: serve_dx, dy }.encode();
        reward
    }
}

impl Cartridge for Paddle {
    fn id(&self) -> GameId {
        GameId::Paddle
    }

    fn action_names(&self) -> &'static [&'static str] {
        &["NOOP", "UP", "DOWN"]
    }

    fn categories(&self) -> &'static [CategoryInfo] {
        &CATEGORIES
    }

    fn quirks(&self) -> Vec<Quirk> {
        vec![
            Quirk::RenderOffset { category: "Player".into(), dy: RENDER_OFFSET },
            Quirk::RenderOffset { category: "Enemy".into(), dy: RENDER_OFFSET },
            Quirk::FreezeAfterEvent { duration: FREEZE_TICKS },
        ]
    }

    fn init(&self, rng: &mut Xorshift64) -> RamState {
        let mut ram = RamState::default();
        ram[BALL_X] = SERVE_X;
        ram[BALL_Y] = SERVE_Y;
        ram[PLAYER_Y] = 100;
        ram[ENEMY_Y] = 100;
        let dy = if rng.bit() { 1 } else { -1 };
        ram[VELOCITY] = Velocity { dx: -1, dy }.encode();
        ram
    }

    fn step(&self, ram: &mut RamState, rng: &mut Xorshift64, quirks: QuirkSet, action: u8) -> TickOutcome {
        let jitter = rng.below(ENEMY_JITTER) as i32;
        if quirks.freeze && ram[FREEZE] > 0 {
            ram[FREEZE] -= 1;
            return TickOutcome::default();
        }

        let clamp = |v: i32| v.clamp(PADDLE_MIN, PADDLE_MAX) as u8;
        let player = i32::from(ram[PLAYER_Y]);
        ram[PLAYER_Y] = match action {
            UP => clamp(player - PADDLE_SPEED),
            DOWN => clamp(player + PADDLE_SPEED),
            _ => clamp(player),
        };

        let ball_cy = i32::from(ram[BALL_Y]) + BALL_H / 2;
        let enemy = i32::from(ram[ENEMY_Y]);
        let enemy_cy = enemy + RENDER_OFFSET + PADDLE_H / 2;
        let dead = ENEMY_DEAD_ZONE + jitter;
        if ball_cy < enemy_cy - dead {
            ram[ENEMY_Y] = clamp(enemy - PADDLE_SPEED);
        } else if ball_cy > enemy_cy + dead {
            ram[ENEMY_Y] = clamp(enemy + PADDLE_SPEED);
        } else {
            ram[ENEMY_Y] = clamp(enemy);
        }

        let mut v = Velocity::decode(ram[VELOCITY]);
        let bx = i32::from(ram[BALL_X]);
        let mut nx = bx + v.dx;
        let mut ny = i32::from(ram[BALL_Y]) + v.dy;
        if ny < BALL_MIN_Y {
            ny = 2 * BALL_MIN_Y - ny;
            v.dy = -v.dy;
        } else if ny > BALL_MAX_Y {
            ny = 2 * BALL_MAX_Y - ny;
            v.dy = -v.dy;
        }

        let mut reward = 0;
        if v.dx > 0 && bx + BALL_W <= PLAYER_X && nx + BALL_W > PLAYER_X {
            let top = i32::from(ram[PLAYER_Y]) + RENDER_OFFSET;
            if overlaps(ny, ny + BALL_H, top, top + PADDLE_H) {
                nx = PLAYER_X - BALL_W;
                v = deflect(ny, top, -1);
            } else {
                reward = Self::score_point(ram, rng, quirks, false);
            }
        } else if v.dx < 0 && bx >= ENEMY_X + PADDLE_W && nx < ENEMY_X + PADDLE_W {
            let top = i32::from(ram[ENEMY_Y]) + RENDER_OFFSET;
            if overlaps(ny, ny + BALL_H, top, top + PADDLE_H) {
                nx = ENEMY_X + PADDLE_W;
                v = deflect(ny, top, 1);
            } else {
                reward = Self::score_point(ram, rng, quirks, true);
            }
        }
        if reward == 0 {
            ram[BALL_X] = nx.clamp(0, 255) as u8;
            ram[BALL_Y] = ny.clamp(0, 255) as u8;
            ram[VELOCITY] = v.encode();
        }

        TickOutcome {
            reward,
            terminated: ram[PLAYER_SCORE] >= WIN_SCORE || ram[ENEMY_SCORE] >= WIN_SCORE,
            draw: 0,
        }
    }

    fn render(&self, ram: &RamState, view: RenderView, frame: &mut Frame) {
        frame.fill_rect(paddle_box(ENEMY_X, ram[ENEMY_Y]), COLOR_ENEMY);
        frame.fill_rect(paddle_box(PLAYER_X, ram[PLAYER_Y]), COLOR_PLAYER);
        if !self.frozen(ram, view.quirks) {
            frame.fill_rect(ball_box(ram), COLOR_BALL);
        }
        font::draw_number(frame, ENEMY_SCORE_X, SCORE_Y, i64::from(ram[ENEMY_SCORE]), COLOR_ENEMY);
        font::draw_number(frame, PLAYER_SCORE_X, SCORE_Y, i64::from(ram[PLAYER_SCORE]), COLOR_PLAYER);
    }

    fn ground_truth(&self, ram: &RamState) -> Vec<GameObject> {
        let palette = Palette::console();
        let rgb = |c: u8| palette.color(c).expect("console color");
        let mut out = Vec::with_capacity(5);
        let mut push = |name: &'static str, b: BBox, color: u8, hud: bool, value: Option<i64>| {
            if let Some(b) = b.clip_to_frame() {
                let mut o = GameObject::new(Category::from_static(name), b, rgb(color), hud);
                o.value = value;
                out.push(o);
            }
        };
        push("Player", paddle_box(PLAYER_X, ram[PLAYER_Y]), COLOR_PLAYER, false, None);
        push("Enemy", paddle_box(ENEMY_X, ram[ENEMY_Y]), COLOR_ENEMY, false, None);
        push("Ball", ball_box(ram), COLOR_BALL, false, None);
        let ps = i64::from(ram[PLAYER_SCORE]);
        let es = i64::from(ram[ENEMY_SCORE]);
        push("PlayerScore", font::number_box(PLAYER_SCORE_X, SCORE_Y, ps), COLOR_PLAYER, true, Some(ps));
        push("EnemyScore", font::number_box(ENEMY_SCORE_X, SCORE_Y, es), COLOR_ENEMY, true, Some(es));
        out
    }

    fn decoder_spec(&self) -> DecoderSpec {
        let single = |x: Coord, y: Coord| Layout::Instances {
            items: vec![Instance { x, y, presence: Presence::Always, size: None }],
        };
        let byte = |addr: u8, offset: i32| Coord::Byte { addr, mask: 0xFF, offset };
        let konst = |value: i32| Coord::Const { value };
        DecoderSpec::new(
            "paddle",
            vec![
                CategoryDecoder {
                    category: Category::from_static("Player"),
                    hud: false,
                    color: COLOR_PLAYER,
                    layout: single(konst(PLAYER_X), byte(PLAYER_Y, RENDER_OFFSET)),
                    size: SizeRule::Fixed { w: PADDLE_W, h: PADDLE_H },
                    value: None,
                },
                CategoryDecoder {
                    category: Category::from_static("Enemy"),
                    hud: false,
                    color: COLOR_ENEMY,
                    layout: single(konst(ENEMY_X), byte(ENEMY_Y, RENDER_OFFSET)),
                    size: SizeRule::Fixed { w: PADDLE_W, h: PADDLE_H },
                    value: None,
                },
                CategoryDecoder {
                    category: Category::from_static("Ball"),
                    hud: false,
                    color: COLOR_BALL,
                    layout: single(byte(BALL_X, 0), byte(BALL_Y, 0)),
                    size: SizeRule::Fixed { w: BALL_W, h: BALL_H },
                    value: None,
                },
                CategoryDecoder {
                    category: Category::from_static("PlayerScore"),
                    hud: true,
                    color: COLOR_PLAYER,
                    layout: single(konst(PLAYER_SCORE_X), konst(SCORE_Y)),
                    size: SizeRule::Digits,
                    value: Some(ValueRule::Byte { addr: PLAYER_SCORE }),
                },
                CategoryDecoder {
                    category: Category::from_static("EnemyScore"),
                    hud: true,
                    color: COLOR_ENEMY,
                    layout: single(konst(ENEMY_SCORE_X), konst(SCORE_Y)),
                    size: SizeRule::Digits,
                    value: Some(ValueRule::Byte { addr: ENEMY_SCORE }),
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
            game: "paddle".into(),
            rules: vec![
                rule("Player", COLOR_PLAYER, field, (PADDLE_W, PADDLE_H), false),
                rule("Enemy", COLOR_ENEMY, field, (PADDLE_W, PADDLE_H), false),
                rule("Ball", COLOR_BALL, Region::FULL, (BALL_W, BALL_H), false),
                rule("PlayerScore", COLOR_PLAYER, hud, (160, 20), true),
                rule("EnemyScore", COLOR_ENEMY, hud, (160, 20), true),
            ],
        }
    }

    fn ram_map(&self) -> RamMap {
        RamMap {
            game: GameId::Paddle,
            fields: vec![
                field(BALL_X, "ball_x", "ball left edge, 4..=156", true),
                field(BALL_Y, "ball_y", "ball top edge, 24..=200", true),
                field(PLAYER_Y, "player_y_raw", "player paddle; drawn top = raw + 10", true),
                field(ENEMY_Y, "enemy_y_raw", "enemy paddle; drawn top = raw + 10", true),
                field(PLAYER_SCORE, "player_score", "0..=20, HUD digits", true),
                field(ENEMY_SCORE, "enemy_score", "0..=20, HUD digits", true),
                field(FREEZE, "freeze", "ticks left in the post-point freeze; ball hidden while > 0", true),
                field(VELOCITY, "ball_velocity", "bits0-3 |dx|, bit4 dx<0, bit5 dy<0, bits6-7 |dy|", false),
            ],
            affine: vec![
                affine(BALL_X, "Ball", "x", 1.0, vec![0.0]),
                affine(BALL_Y, "Ball", "y", 1.0, vec![0.0]),
                affine(PLAYER_Y, "Player", "y", 1.0, vec![f64::from(RENDER_OFFSET)]),
                affine(ENEMY_Y, "Enemy", "y", 1.0, vec![f64::from(RENDER_OFFSET)]),
            ],
        }
    }

    fn score(&self, ram: &RamState) -> i64 {
        i64::from(ram[PLAYER_SCORE])
    }

    fn frozen(&self, ram: &RamState, quirks: QuirkSet) -> bool {
        quirks.freeze && ram[FREEZE] > 0
    }

    fn attribute(&self, ram: &RamState, view: RenderView, mismatch: &Mismatch) -> Option<QuirkKind> {
        (mismatch.category == "Ball" && self.frozen(ram, view.quirks)).then_some(QuirkKind::Freeze)
    }
}
