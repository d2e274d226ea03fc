//! Inspector session: one console driven by JSON commands, answering every
//! command with a consistent post-tick state message.

use std::collections::BTreeMap;
use std::io::Cursor;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::agents::{Agent, AgentKind};
use crate::console::{Console, RamState};
use crate::discovery::{probe_byte, CorrelationFinding, ProbeFinding, PROBE_VALUES};
use crate::evalkit::{match_objects, mismatches, Mismatch, MATCH_TOLERANCE_PX};
use crate::games::{GameId, QuirkSet};
use crate::model::{to_rgb, Frame, GameObject, ObjectList, Palette, FRAME_HEIGHT, FRAME_WIDTH};
use crate::rem::extract_rem;
use crate::vem::extract_vem;

pub const MAX_STEP: u64 = 10_000;
pub const MAX_TICKS_PER_SECOND: f64 = 240.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Rem,
    Vem,
    Diff,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Reset { seed: Option<u64> },
    Step { n: u64 },
    Run { ticks_per_second: f64 },
    Pause,
    SetRam { addr: u8, value: u8, token: Option<String> },
    Probe { addr: u8 },
    SetAgent { kind: AgentKind },
    ToggleOverlay { layer: Layer, on: bool },
}

/// A client error that names the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandError {
    pub field: String,
    pub message: String,
}

impl CommandError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        CommandError {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for CommandError {}

fn uint(obj: &Map<String, Value>, field: &str, max: u64) -> Result<u64, CommandError> {
    let v = obj.get(field).ok_or_else(|| CommandError::new(field, "missing"))?;
    let n = v
        .as_u64()
        .ok_or_else(|| CommandError::new(field, format!("expected a non-negative integer, got {v}")))?;
    if n > max {
        return Err(CommandError::new(field, format!("{n} exceeds the maximum {max}")));
    }
    Ok(n)
}

fn string<'a>(obj: &'a Map<String, Value>, field: &str) -> Result<&'a str, CommandError> {
    let v = obj.get(field).ok_or_else(|| CommandError::new(field, "missing"))?;
    v.as_str().ok_or_else(|| CommandError::new(field, format!("expected a string, got {v}")))
}

impl Command {
    pub fn parse(text: &str) -> Result<Command, CommandError> {
        let value: Value = serde_json::from_str(text).map_err(|e| CommandError::new("body", format!("invalid JSON: {e}")))?;
        Command::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Command, CommandError> {
        let obj = value.as_object().ok_or_else(|| CommandError::new("body", "expected a JSON object"))?;
        let kind = string(obj, "type")?;
        Ok(match kind {
            "reset" => Command::Reset {
                seed: match obj.get("seed") {
                    None | Some(Value::Null) => None,
                    Some(_) => Some(uint(obj, "seed", u64::MAX)?),
                },
            },
            "step" => Command::Step {
                n: if obj.contains_key("n") { uint(obj, "n", MAX_STEP)? } else { 1 },
            },
            "run" => {
                let v = obj.get("ticks_per_second").ok_or_else(|| CommandError::new("ticks_per_second", "missing"))?;
                let tps = v
                    .as_f64()
                    .filter(|t| *t > 0.0 && *t <= MAX_TICKS_PER_SECOND)
                    .ok_or_else(|| CommandError::new("ticks_per_second", format!("expected a number in (0, {MAX_TICKS_PER_SECOND}]")))?;
                Command::Run { ticks_per_second: tps }
            }
            "pause" => Command::Pause,
            "set_ram" => Command::SetRam {
                addr: uint(obj, "addr", RamState::LEN as u64 - 1)? as u8,
                value: uint(obj, "value", 255)? as u8,
                token: match obj.get("token") {
                    None | Some(Value::Null) => None,
                    Some(_) => Some(string(obj, "token")?.to_string()),
                },
            },
            "probe" => Command::Probe {
                addr: uint(obj, "addr", RamState::LEN as u64 - 1)? as u8,
            },
            "set_agent" => Command::SetAgent {
                kind: string(obj, "kind")?.parse().map_err(|e: crate::Error| CommandError::new("kind", e.to_string()))?,
            },
            "toggle_overlay" => Command::ToggleOverlay {
                layer: match string(obj, "layer")? {
                    "rem" => Layer::Rem,
                    "vem" => Layer::Vem,
                    "diff" => Layer::Diff,
                    other => return Err(CommandError::new("layer", format!("unknown layer {other:?} (expected rem, vem or diff)"))),
                },
                on: obj
                    .get("on")
                    .ok_or_else(|| CommandError::new("on", "missing"))?
                    .as_bool()
                    .ok_or_else(|| CommandError::new("on", "expected a boolean"))?,
            },
            other => return Err(CommandError::new("type", format!("unknown command {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RunState {
    Paused,
    Running { ticks_per_second: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMessage {
    #[serde(rename = "type")]
    pub kind: String,
    pub game: GameId,
    /// Base64 PNG of the current frame.
    pub frame: String,
    pub ram: Vec<u8>,
    pub objects_rem: Vec<GameObject>,
    pub objects_vem: Vec<GameObject>,
    pub mismatches: Vec<Mismatch>,
    pub frame_index: u64,
    pub score: i64,
    pub terminated: bool,
    pub agent: AgentKind,
    pub run: RunState,
    pub overlays: BTreeMap<Layer, bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeFinding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub findings: Option<Vec<CorrelationFinding>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMessage {
    #[serde(rename = "type")]
    pub kind: String,
    pub field: String,
    pub message: String,
}

impl From<CommandError> for ErrorMessage {
    fn from(e: CommandError) -> Self {
        ErrorMessage {
            kind: "error".into(),
            field: e.field,
            message: e.message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reply {
    State(Box<StateMessage>),
    Error(ErrorMessage),
}

impl Reply {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("replies serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub game: GameId,
    pub seed: u64,
    pub quirks: QuirkSet,
    pub agent: AgentKind,
    /// Required on `set_ram` when present.
    pub token: Option<String>,
}

impl SessionConfig {
    pub fn new(game: GameId, seed: u64) -> Self {
        SessionConfig {
            game,
            seed,
            quirks: QuirkSet::ALL,
            agent: AgentKind::Random,
            token: None,
        }
    }
}

pub fn encode_png(frame: &Frame, palette: &Palette) -> crate::Result<Vec<u8>> {
    let rgb = to_rgb(frame, palette)?;
    let mut out = Vec::new();
    image::write_buffer_with_format(
        &mut Cursor::new(&mut out),
        &rgb,
        FRAME_WIDTH as u32,
        FRAME_HEIGHT as u32,
        image::ExtendedColorType::Rgb8,
        image::ImageFormat::Png,
    )?;
    Ok(out)
}

pub struct Session {
    config: SessionConfig,
    console: Console,
    agent: Agent,
    run: RunState,
    overlays: BTreeMap<Layer, bool>,
    terminated: bool,
    findings: Option<Vec<CorrelationFinding>>,
    palette: Palette,
}

impl Session {
    pub fn new(config: SessionConfig) -> Self {
        let console = Console::with_quirks(config.game, config.seed, config.quirks);
        let agent = Agent::new(config.agent, config.game, config.seed);
        Session {
            console,
            agent,
            run: RunState::Paused,
            overlays: [(Layer::Rem, true), (Layer::Vem, true), (Layer::Diff, true)].into_iter().collect(),
            terminated: false,
            findings: None,
            palette: Palette::console(),
            config,
        }
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn console(&self) -> &Console {
        &self.console
    }

    pub fn run_state(&self) -> RunState {
        self.run
    }

    pub fn set_findings(&mut self, findings: Vec<CorrelationFinding>) {
        self.findings = Some(findings);
    }

    /// Advance up to `n` ticks with the session's agent; stops at termination.
    fn advance(&mut self, n: u64) {
        let decoder = self.console.cartridge().decoder_spec();
        for _ in 0..n {
            if self.terminated {
                break;
            }
            let now = ObjectList::new(self.console.frame_counter(), extract_rem(self.console.ram(), &decoder));
            let action = self.agent.act(&now);
            match self.console.tick(action) {
                Ok((_, done)) => self.terminated = done,
                Err(_) => break,
            }
        }
        if self.terminated {
            self.run = RunState::Paused;
        }
    }

    /// One tick of a running session; `None` while paused.
    pub fn run_tick(&mut self) -> Option<StateMessage> {
        if self.run == RunState::Paused {
            return None;
        }
        self.advance(1);
        Some(self.state(None, false))
    }

    pub fn handle_text(&mut self, text: &str) -> Reply {
        match Command::parse(text) {
            Ok(cmd) => self.handle(cmd),
            Err(e) => Reply::Error(e.into()),
        }
    }

    pub fn handle(&mut self, cmd: Command) -> Reply {
        let mut probe = None;
        match cmd {
            Command::Reset { seed } => {
                let seed = seed.unwrap_or(self.config.seed);
                self.config.seed = seed;
                self.console = Console::with_quirks(self.config.game, seed, self.config.quirks);
                self.agent = Agent::new(self.config.agent, self.config.game, seed);
                self.terminated = false;
                self.run = RunState::Paused;
            }
            Command::Step { n } => {
                if self.terminated && n > 0 {
                    return Reply::Error(CommandError::new("type", "episode has terminated; send reset").into());
                }
                self.advance(n);
            }
            Command::Run { ticks_per_second } => {
                if self.terminated {
                    return Reply::Error(CommandError::new("type", "episode has terminated; send reset").into());
                }
                self.run = RunState::Running { ticks_per_second };
            }
            Command::Pause => self.run = RunState::Paused,
            Command::SetRam { addr, value, token } => {
                if let Some(expected) = &self.config.token {
                    if token.as_deref() != Some(expected.as_str()) {
                        return Reply::Error(CommandError::new("token", "missing or wrong capability token").into());
                    }
                }
                self.console.poke(usize::from(addr), value).expect("address validated on parse");
            }
            Command::Probe { addr } => {
                probe = Some(probe_byte(&mut self.console, usize::from(addr), &PROBE_VALUES).expect("address validated on parse"));
            }
            Command::SetAgent { kind } => {
                self.config.agent = kind;
                self.agent = Agent::new(kind, self.config.game, self.config.seed ^ self.console.frame_counter());
            }
            Command::ToggleOverlay { layer, on } => {
                self.overlays.insert(layer, on);
            }
        }
        Reply::State(Box::new(self.state(probe, true)))
    }

    /// Snapshot of the current post-tick state.
    pub fn state(&self, probe: Option<ProbeFinding>, with_findings: bool) -> StateMessage {
        let cart = self.console.cartridge();
        let frame = self.console.render();
        let objects_rem = extract_rem(self.console.ram(), &cart.decoder_spec());
        let objects_vem = extract_vem(&frame, &cart.vision_spec(), &self.palette);
        let m = match_objects(&objects_vem, &objects_rem, MATCH_TOLERANCE_PX);
        let index = self.console.frame_counter();
        let mut log = mismatches(index, &objects_vem, &objects_rem, &m);
        for mm in &mut log {
            mm.quirk = cart.attribute(self.console.ram(), self.console.view(), mm);
        }
        let png = encode_png(&frame, &self.palette).expect("console frames use the console palette");
        StateMessage {
            kind: "state".into(),
            game: self.config.game,
            frame: base64::engine::general_purpose::STANDARD.encode(png),
            ram: self.console.ram().bytes().to_vec(),
            objects_rem,
            objects_vem,
            mismatches: log,
            frame_index: index,
            score: self.console.score(),
            terminated: self.terminated,
            agent: self.config.agent,
            run: self.run,
            overlays: self.overlays.clone(),
            probe,
            findings: if with_findings { self.findings.clone() } else { None },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session() -> Session {
        Session::new(SessionConfig::new(GameId::Paddle, 0))
    }

    fn state(r: Reply) -> StateMessage {
        match r {
            Reply::State(s) => *s,
            Reply::Error(e) => panic!("{e:?}"),
        }
    }

    fn error(r: Reply) -> ErrorMessage {
        match r {
            Reply::Error(e) => e,
            Reply::State(_) => panic!("expected an error"),
        }
    }

    #[test]
    fn set_ram_moves_ball() {
        let mut s = session();
        let st = state(s.handle_text(r#"{"type":"set_ram","addr":0,"value":80}"#));
        let ball = st.objects_rem.iter().find(|o| o.category == "Ball").unwrap();
        assert_eq!(ball.x, 80);
        assert_eq!(st.ram[0], 80);
    }

    #[test]
    fn paused_zero_steps_are_idempotent() {
        let mut s = session();
        state(s.handle_text(r#"{"type":"step","n":7}"#));
        state(s.handle_text(r#"{"type":"pause"}"#));
        let a = s.handle_text(r#"{"type":"step","n":0}"#).to_json();
        let b = s.handle_text(r#"{"type":"step","n":0}"#).to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn probe_dead_byte() {
        let mut s = session();
        let st = state(s.handle_text(r#"{"type":"probe","addr":99}"#));
        let p = st.probe.unwrap();
        assert_eq!(p.addr, 99);
        assert!(p.diffs.iter().all(|d| d.pixels == 0 && d.bounds.is_none()));
    }

    #[test]
    fn errors_name_the_field() {
        let mut s = session();
        let cases = [
            ("not json", "body"),
            ("[1]", "body"),
            (r#"{"n":1}"#, "type"),
            (r#"{"type":"jump"}"#, "type"),
            (r#"{"type":"step","n":-1}"#, "n"),
            (r#"{"type":"set_ram","addr":128,"value":1}"#, "addr"),
            (r#"{"type":"set_ram","addr":1,"value":256}"#, "value"),
            (r#"{"type":"set_ram","addr":1}"#, "value"),
            (r#"{"type":"run","ticks_per_second":0}"#, "ticks_per_second"),
            (r#"{"type":"set_agent","kind":"dqn"}"#, "kind"),
            (r#"{"type":"toggle_overlay","layer":"x","on":true}"#, "layer"),
            (r#"{"type":"toggle_overlay","layer":"rem","on":1}"#, "on"),
        ];
        for (text, field) in cases {
            assert_eq!(error(s.handle_text(text)).field, field, "{text}");
        }
        // The session is still usable.
        assert_eq!(state(s.handle_text(r#"{"type":"step"}"#)).frame_index, 1);
    }

    #[test]
    fn token_guards_set_ram() {
        let mut cfg = SessionConfig::new(GameId::Paddle, 0);
        cfg.token = Some("k".into());
        let mut s = Session::new(cfg);
        assert_eq!(error(s.handle_text(r#"{"type":"set_ram","addr":0,"value":9}"#)).field, "token");
        assert_eq!(s.console().ram()[0], 79);
        state(s.handle_text(r#"{"type":"set_ram","addr":0,"value":9,"token":"k"}"#));
        assert_eq!(s.console().ram()[0], 9);
    }

    #[test]
    fn state_is_self_consistent() {
        let mut s = session();
        let st = state(s.handle_text(r#"{"type":"step","n":25}"#));
        let ram = RamState::from_bytes(&st.ram).unwrap();
        assert_eq!(st.objects_rem, extract_rem(&ram, &GameId::Paddle.cartridge().decoder_spec()));
        let png = base64::engine::general_purpose::STANDARD.decode(&st.frame).unwrap();
        let img = image::load_from_memory(&png).unwrap().to_rgb8();
        assert_eq!((img.width(), img.height()), (160, 210));
    }

    #[test]
    fn run_and_toggle() {
        let mut s = session();
        assert!(s.run_tick().is_none());
        let st = state(s.handle_text(r#"{"type":"run","ticks_per_second":30}"#));
        assert_eq!(st.run, RunState::Running { ticks_per_second: 30.0 });
        assert_eq!(s.run_tick().unwrap().frame_index, 1);
        let st = state(s.handle_text(r#"{"type":"toggle_overlay","layer":"vem","on":false}"#));
        assert!(!st.overlays[&Layer::Vem]);
        let st = state(s.handle_text(r#"{"type":"reset","seed":4}"#));
        assert_eq!((st.frame_index, st.run), (0, RunState::Paused));
    }
}
