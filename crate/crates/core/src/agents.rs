//! Rollout policies: uniform random, and per-game scripted heuristics that
//! read only the object-centric state.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::games::{climber, invaders, paddle, GameId};
use crate::model::{GameObject, ObjectList};
use crate::rng::Xorshift64;

/// Stream index reserved for agent randomness; consoles use the base stream.
const AGENT_STREAM: u64 = 0xA6E7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Random,
    Scripted,
}

impl AgentKind {
    pub const ALL: [AgentKind; 2] = [AgentKind::Random, AgentKind::Scripted];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Random => "random",
            AgentKind::Scripted => "scripted",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "random" => Ok(AgentKind::Random),
            "scripted" => Ok(AgentKind::Scripted),
            other => Err(Error::Config(format!("unknown agent kind {other:?} (expected random or scripted)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Agent {
    kind: AgentKind,
    game: GameId,
    seed: u64,
    rng: Xorshift64,
}

impl Agent {
    pub fn new(kind: AgentKind, game: GameId, seed: u64) -> Self {
        Agent {
            kind,
            game,
            seed,
            rng: Xorshift64::stream(seed, AGENT_STREAM),
        }
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn act(&mut self, objects: &ObjectList) -> u8 {
        match self.kind {
            AgentKind::Random => self.rng.below(self.game.cartridge().action_count() as u32) as u8,
            AgentKind::Scripted => scripted(self.game, objects),
        }
    }
}

fn first<'a>(objects: &'a ObjectList, cat: &'a str) -> Option<&'a GameObject> {
    objects.of_category(cat).next()
}

fn cx2(o: &GameObject) -> i32 {
    o.bbox().center2().0
}

fn cy2(o: &GameObject) -> i32 {
    o.bbox().center2().1
}

/// Pure function of the object list.
pub fn scripted(game: GameId, objects: &ObjectList) -> u8 {
    match game {
        GameId::Paddle => paddle_policy(objects),
        GameId::Invaders => invaders_policy(objects),
        GameId::Climber => climber_policy(objects),
    }
}

fn paddle_policy(objects: &ObjectList) -> u8 {
    let (Some(p), Some(b)) = (first(objects, "Player"), first(objects, "Ball")) else {
        return paddle::NOOP;
    };
    // Doubled coordinates: a 2 px dead zone is 4 here.
    let d = cy2(b) - cy2(p);
    if d < -4 {
        paddle::UP
    } else if d > 4 {
        paddle::DOWN
    } else {
        paddle::NOOP
    }
}

fn invaders_policy(objects: &ObjectList) -> u8 {
    let Some(p) = first(objects, "Player") else {
        return invaders::NOOP;
    };
    let px = cx2(p);
    // Lowest alien wins ties so the bottom of the grid is cleared first.
    let target = objects
        .of_category("Alien")
        .min_by_key(|a| ((cx2(a) - px).abs(), -a.y, a.x));
    let Some(t) = target else {
        return invaders::NOOP;
    };
    let missile_live = first(objects, "PlayerMissile").is_some();
    let d = cx2(t) - px;
    if d.abs() <= 2 {
        if missile_live {
            invaders::NOOP
        } else {
            invaders::FIRE
        }
    } else if d < 0 {
        invaders::LEFT
    } else {
        invaders::RIGHT
    }
}

fn climber_floor(p: &GameObject) -> usize {
    // The lowest floor whose standing band (fine 0..=31) contains the sprite.
    (0..climber::FLOORS)
        .find(|&f| {
            let fine = climber::FLOOR_Y[f] - climber::PLAYER_H - p.y;
            (0..=31).contains(&fine)
        })
        .unwrap_or(0)
}

fn climber_policy(objects: &ObjectList) -> u8 {
    let Some(p) = first(objects, "Player") else {
        return climber::NOOP;
    };
    let floor = climber_floor(p);
    let base = climber::FLOOR_Y[floor] - climber::PLAYER_H;
    let airborne = p.y < base;
    let ladder = climber::LADDER_X[floor];
    let on_ladder = p.x == ladder && airborne;

    if on_ladder {
        return climber::UP;
    }
    let enemy_near = objects.of_category("Enemy").any(|e| {
        let same_floor = e.y == climber::FLOOR_Y[floor] - climber::ENEMY_H;
        same_floor && (cx2(e) - cx2(p)).abs() <= 2 * 16
    });
    if !airborne && enemy_near {
        return climber::JUMP;
    }
    let d = ladder - p.x;
    if !airborne && d.abs() <= climber::LADDER_REACH {
        climber::UP
    } else if d < 0 {
        climber::LEFT
    } else if d > 0 {
        climber::RIGHT
    } else {
        climber::NOOP
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::console::Console;
    use crate::model::{BBox, Category};

    fn obj(cat: &'static str, x: i32, y: i32, w: i32, h: i32) -> GameObject {
        GameObject::new(Category::from_static(cat), BBox::new(x, y, w, h), [0, 0, 0], false)
    }

    #[test]
    fn parse_kinds() {
        assert_eq!("random".parse::<AgentKind>().unwrap(), AgentKind::Random);
        assert_eq!("scripted".parse::<AgentKind>().unwrap(), AgentKind::Scripted);
        assert!("dqn".parse::<AgentKind>().is_err());
    }

    #[test]
    fn random_agent_is_roughly_uniform() {
        let mut a = Agent::new(AgentKind::Random, GameId::Climber, 3);
        let empty = ObjectList::new(0, vec![]);
        let n = 1000;
        let k = 5;
        let mut hist = [0usize; 5];
        for _ in 0..n {
            hist[usize::from(a.act(&empty))] += 1;
        }
        let expect = n as f64 / k as f64;
        let sigma = (n as f64 * (1.0 / k as f64) * (1.0 - 1.0 / k as f64)).sqrt();
        for h in hist {
            assert!((h as f64 - expect).abs() < 5.0 * sigma, "{hist:?}");
        }
    }

    #[test]
    fn paddle_moves_toward_ball() {
        let above = ObjectList::new(0, vec![obj("Player", 140, 100, 4, 16), obj("Ball", 80, 60, 2, 4)]);
        assert_eq!(scripted(GameId::Paddle, &above), paddle::UP);
        let below = ObjectList::new(0, vec![obj("Player", 140, 100, 4, 16), obj("Ball", 80, 150, 2, 4)]);
        assert_eq!(scripted(GameId::Paddle, &below), paddle::DOWN);
    }

    #[test]
    fn same_seed_same_actions() {
        let empty = ObjectList::new(0, vec![]);
        let mut a = Agent::new(AgentKind::Random, GameId::Invaders, 5);
        let mut b = Agent::new(AgentKind::Random, GameId::Invaders, 5);
        for _ in 0..100 {
            assert_eq!(a.act(&empty), b.act(&empty));
        }
    }

    #[test]
    fn scripted_paddle_scores_within_500_frames() {
        let mut c = Console::new(GameId::Paddle, 0);
        let mut agent = Agent::new(AgentKind::Scripted, GameId::Paddle, 0);
        for _ in 0..500 {
            let a = agent.act(&c.ground_truth_objects());
            c.tick(a).unwrap();
        }
        assert!(c.score() > 0);
    }
}
