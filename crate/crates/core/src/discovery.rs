//! RAM annotation toolkit: correlate VEM-observed object properties against
//! every RAM byte, fit affine decodes, and probe bytes by mutation.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentKind};
use crate::console::{Console, RamState, SavedState};
use crate::error::{Error, Result};
use crate::evalkit::episode_seed;
use crate::games::{GameId, QuirkSet, RamMap};
use crate::model::{BBox, Frame, ObjectList, Palette, FRAME_WIDTH};
use crate::rem::{extract_rem, TrackState};
use crate::rng::Xorshift64;
use crate::vem::extract_vem;

pub const DEFAULT_MIN_SUPPORT: usize = 50;
pub const DEFAULT_R_THRESHOLD: f64 = 0.95;
pub const PROBE_VALUES: [u8; 5] = [0, 1, 64, 128, 255];
/// Frames between console snapshots kept for probe sweeps.
pub const SNAPSHOT_STRIDE: usize = 5;
/// Residual bound for a sample to count as an inlier of an affine fit.
pub const INLIER_RESIDUAL: f64 = 0.5;
/// Minimum inlier share for a fit to be reported as trimmed.
pub const MIN_INLIER_SHARE: f64 = 0.9;
/// Tolerance when comparing fitted parameters to the RAM map.
pub const FIT_EPSILON: f64 = 1e-6;

const PROPERTIES: [&str; 5] = ["x", "y", "w", "h", "visible"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub game: GameId,
    pub agent: AgentKind,
    pub frames: usize,
    pub seed: u64,
    pub quirks: QuirkSet,
}

impl TraceConfig {
    pub fn new(game: GameId, agent: AgentKind, frames: usize, seed: u64) -> Self {
        TraceConfig {
            game,
            agent,
            frames,
            seed,
            quirks: QuirkSet::ALL,
        }
    }
}

/// RAM snapshots and property series on a shared frame axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub config: TraceConfig,
    pub ram: Vec<RamState>,
    /// `Cat.prop` for single-instance categories, `Cat#track.prop` otherwise.
    pub series: BTreeMap<String, Vec<Option<f64>>>,
    /// `(frame index, console state)` every [`SNAPSHOT_STRIDE`] frames.
    pub snapshots: Vec<(usize, SavedState)>,
}

impl TraceSet {
    pub fn frames(&self) -> usize {
        self.ram.len()
    }

    pub fn byte_series(&self, addr: u8) -> Vec<f64> {
        self.ram.iter().map(|r| f64::from(r[addr])).collect()
    }

    /// Copy with every byte's time series independently permuted.
    pub fn shuffled(&self, seed: u64) -> TraceSet {
        let n = self.ram.len();
        let mut out = self.clone();
        for addr in 0..RamState::LEN {
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng = Xorshift64::stream(seed, 0x5AF1_0000 + addr as u64);
            for i in (1..n).rev() {
                let j = rng.below(i as u32 + 1) as usize;
                order.swap(i, j);
            }
            for (t, &src) in order.iter().enumerate() {
                out.ram[t][addr as u8] = self.ram[src][addr as u8];
            }
        }
        out.snapshots.clear();
        out
    }
}

/// Splits a series key into category and property.
pub fn parse_key(key: &str) -> Option<(&str, &str)> {
    let (obj, prop) = key.rsplit_once('.')?;
    let cat = obj.split_once('#').map_or(obj, |(c, _)| c);
    Some((cat, prop))
}

pub fn collect_traces(config: &TraceConfig) -> Result<TraceSet> {
    if config.frames < 2 {
        return Err(Error::Config(format!("trace needs at least 2 frames, got {}", config.frames)));
    }
    let cart = config.game.cartridge();
    let vision = cart.vision_spec();
    let decoder = cart.decoder_spec();
    let palette = Palette::console();
    let singleton: BTreeSet<&str> = cart.categories().iter().filter(|c| c.max_instances == 1).map(|c| c.name).collect();

    let mut episode = 0u32;
    let mut console = Console::with_quirks(config.game, episode_seed(config.seed, episode), config.quirks);
    let mut agent = Agent::new(config.agent, config.game, episode_seed(config.seed, episode));
    let mut tracker = TrackState::new();
    let mut frame = Frame::blank();
    let mut ram = Vec::with_capacity(config.frames);
    let mut series: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
    let mut snapshots = Vec::new();

    for t in 0..config.frames {
        if t % SNAPSHOT_STRIDE == 0 {
            snapshots.push((t, console.snapshot()));
        }
        console.render_into(&mut frame);
        let vem = ObjectList::new(console.frame_counter(), extract_vem(&frame, &vision, &palette));
        let tracked = tracker.track(&vem);
        ram.push(*console.ram());

        let mut seen = BTreeSet::new();
        for o in tracked.iter() {
            let cat = o.category.as_str();
            let stem = if singleton.contains(cat) {
                cat.to_string()
            } else {
                match o.track_id {
                    Some(id) => format!("{cat}#{id}"),
                    None => continue,
                }
            };
            // Two detections of a single-instance category: keep the first.
            if !seen.insert(stem.clone()) {
                continue;
            }
            let values = [o.x, o.y, o.w, o.h, 1];
            for (p, v) in PROPERTIES.iter().zip(values) {
                let s = series.entry(format!("{stem}.{p}")).or_insert_with(|| vec![None; t]);
                s.resize(t, None);
                s.push(Some(f64::from(v)));
            }
        }
        // Visibility is defined on every frame once an object has appeared.
        for (key, s) in series.iter_mut() {
            if s.len() == t {
                s.push(key.ends_with(".visible").then_some(0.0));
            }
        }

        let rem = ObjectList::new(console.frame_counter(), extract_rem(console.ram(), &decoder));
        let action = agent.act(&rem);
        let (_, done) = console.tick(action)?;
        if done {
            episode += 1;
            console = Console::with_quirks(config.game, episode_seed(config.seed, episode), config.quirks);
            agent = Agent::new(config.agent, config.game, episode_seed(config.seed, episode));
        }
    }
    // Visibility before first appearance is zero, not missing.
    for (key, s) in series.iter_mut() {
        if key.ends_with(".visible") {
            for v in s.iter_mut() {
                v.get_or_insert(0.0);
            }
        }
    }
    Ok(TraceSet {
        config: config.clone(),
        ram,
        series,
        snapshots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineFit {
    pub a: f64,
    pub b: f64,
    pub residual: f64,
    pub inliers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFinding {
    pub addr: u8,
    pub key: String,
    pub r: f64,
    pub fit: AffineFit,
    pub support: usize,
}

impl CorrelationFinding {
    pub fn category(&self) -> &str {
        parse_key(&self.key).map_or("", |(c, _)| c)
    }

    pub fn property(&self) -> &str {
        parse_key(&self.key).map_or("", |(_, p)| p)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationDiagnostics {
    pub pairs: usize,
    pub low_support: usize,
    pub zero_variance: usize,
    pub below_threshold: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub findings: Vec<CorrelationFinding>,
    pub diagnostics: CorrelationDiagnostics,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n == 0 || n != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn least_squares(xs: &[f64], ys: &[f64], keep: &[bool]) -> Option<(f64, f64)> {
    let pts = || xs.iter().zip(ys).zip(keep).filter(|(_, k)| **k).map(|(p, _)| p);
    let n = pts().count() as f64;
    if n < 2.0 {
        return None;
    }
    let mx = pts().map(|(x, _)| x).sum::<f64>() / n;
    let my = pts().map(|(_, y)| y).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in pts() {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        return None;
    }
    let a = sxy / sxx;
    Some((a, my - a * mx))
}

/// Least squares, refit on the samples within [`INLIER_RESIDUAL`] of the
/// previous fit until the inlier set settles. Samples produced by render
/// quirks would otherwise bias an exact decode.
pub fn fit_affine(xs: &[f64], ys: &[f64]) -> Option<AffineFit> {
    let mut keep = vec![true; xs.len()];
    let (mut a, mut b) = least_squares(xs, ys, &keep)?;
    for round in 0..16 {
        let res: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (y - (a * x + b)).abs()).collect();
        // Early rounds use a loose bound so a contaminated first fit can recover.
        let mut sorted = res.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let bound = if round < 8 { INLIER_RESIDUAL.max(3.0 * median) } else { INLIER_RESIDUAL };
        let next: Vec<bool> = res.iter().map(|r| *r <= bound).collect();
        let count = next.iter().filter(|k| **k).count();
        if (count as f64) < MIN_INLIER_SHARE * xs.len() as f64 {
            break;
        }
        let Some((na, nb)) = least_squares(xs, ys, &next) else { break };
        let settled = next == keep && round >= 8;
        keep = next;
        a = na;
        b = nb;
        if settled {
            break;
        }
    }
    let mut total = 0.0;
    let mut inliers = 0;
    for ((x, y), k) in xs.iter().zip(ys).zip(&keep) {
        if *k {
            total += (y - (a * x + b)).abs();
            inliers += 1;
        }
    }
    Some(AffineFit {
        a,
        b,
        residual: if inliers > 0 { total / inliers as f64 } else { 0.0 },
        inliers,
    })
}

pub fn correlate(traces: &TraceSet, min_support: usize, r_threshold: f64) -> Correlation {
    let props: Vec<(&String, &Vec<Option<f64>>)> = traces.series.iter().collect();
    let per_byte: Vec<(Vec<CorrelationFinding>, CorrelationDiagnostics)> = (0..RamState::LEN as u8)
        .into_par_iter()
        .map(|addr| {
            let bytes = traces.byte_series(addr);
            let mut found = Vec::new();
            let mut diag = CorrelationDiagnostics::default();
            for (key, s) in &props {
                diag.pairs += 1;
                let (xs, ys): (Vec<f64>, Vec<f64>) = s.iter().zip(&bytes).filter_map(|(v, b)| v.map(|v| (*b, v))).unzip();
                if xs.len() < min_support {
                    diag.low_support += 1;
                    continue;
                }
                let Some(r) = pearson(&xs, &ys) else {
                    diag.zero_variance += 1;
                    continue;
                };
                if r.abs() < r_threshold {
                    diag.below_threshold += 1;
                    continue;
                }
                let Some(fit) = fit_affine(&xs, &ys) else {
                    diag.zero_variance += 1;
                    continue;
                };
                found.push(CorrelationFinding {
                    addr,
                    key: (*key).clone(),
                    r,
                    fit,
                    support: xs.len(),
                });
            }
            (found, diag)
        })
        .collect();

    let mut findings = Vec::new();
    let mut diagnostics = CorrelationDiagnostics::default();
    for (f, d) in per_byte {
        findings.extend(f);
        diagnostics.pairs += d.pairs;
        diagnostics.low_support += d.low_support;
        diagnostics.zero_variance += d.zero_variance;
        diagnostics.below_threshold += d.below_threshold;
    }
    findings.sort_by(|x, y| {
        y.r.abs()
            .total_cmp(&x.r.abs())
            .then(x.fit.residual.total_cmp(&y.fit.residual))
            .then(x.addr.cmp(&y.addr))
            .then(x.key.cmp(&y.key))
    });
    Correlation { findings, diagnostics }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeDiff {
    pub value: u8,
    pub pixels: usize,
    pub bounds: Option<BBox>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeFinding {
    pub addr: u8,
    pub diffs: Vec<ProbeDiff>,
}

impl ProbeFinding {
    pub fn changed_pixels(&self) -> usize {
        self.diffs.iter().map(|d| d.pixels).sum()
    }
}

pub fn frame_diff(a: &Frame, b: &Frame) -> (usize, Option<BBox>) {
    let mut count = 0;
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for (i, (p, q)) in a.pixels().iter().zip(b.pixels()).enumerate() {
        if p != q {
            count += 1;
            let (x, y) = (i % FRAME_WIDTH, i / FRAME_WIDTH);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
    }
    let bounds = (count > 0).then(|| BBox::new(x0 as i32, y0 as i32, (x1 - x0 + 1) as i32, (y1 - y0 + 1) as i32));
    (count, bounds)
}

/// Poke each value into `addr`, render, and diff against the unmodified
/// render. The console is restored before returning.
pub fn probe_byte(console: &mut Console, addr: usize, values: &[u8]) -> Result<ProbeFinding> {
    if addr >= RamState::LEN {
        return Err(Error::AddressOutOfRange(addr));
    }
    let saved = console.snapshot();
    let baseline = console.render();
    let mut frame = Frame::blank();
    let mut diffs = Vec::with_capacity(values.len());
    for &value in values {
        console.poke(addr, value)?;
        console.render_into(&mut frame);
        let (pixels, bounds) = frame_diff(&baseline, &frame);
        diffs.push(ProbeDiff { value, pixels, bounds });
        console.restore(&saved)?;
    }
    console.restore(&saved)?;
    Ok(ProbeFinding { addr: addr as u8, diffs })
}

/// Probe all 128 bytes at the console's current state.
pub fn probe_all(console: &mut Console, values: &[u8]) -> Result<Vec<ProbeFinding>> {
    (0..RamState::LEN).map(|addr| probe_byte(console, addr, values)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ByteSweep {
    pub addr: u8,
    /// Baselines at which some probe value changed the frame.
    pub hits: usize,
    pub max_pixels: usize,
    pub bounds: Option<BBox>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepReport {
    pub baselines: Vec<usize>,
    pub bytes: Vec<ByteSweep>,
    pub flagged: Vec<u8>,
    /// Render-affecting bytes in the RAM map that no probe flagged.
    pub missed: Vec<u8>,
    /// Flagged bytes the RAM map does not list as render-affecting.
    pub unexpected: Vec<u8>,
    /// Every sweep left the console bit-identical, and a rollout after the
    /// last sweep matched an unprobed control.
    pub leakage_free: bool,
}

/// Ticks rolled out after a sweep to check it left no trace.
pub const LEAKAGE_ROLLOUT: usize = 100;

/// Roll `a` and `b` forward with the same random actions; true when every
/// state and frame agrees.
pub fn rollouts_match(a: &mut Console, b: &mut Console, ticks: usize, seed: u64) -> Result<bool> {
    let mut rng = Xorshift64::stream(seed, 2);
    let n = a.cartridge().action_count() as u32;
    for _ in 0..ticks {
        let act = rng.below(n) as u8;
        let (ra, da) = a.tick(act)?;
        let (rb, db) = b.tick(act)?;
        if (ra, da) != (rb, db) || a.snapshot() != b.snapshot() || a.render() != b.render() {
            return Ok(false);
        }
        if da {
            break;
        }
    }
    Ok(true)
}

/// Probe every byte at every snapshot kept in the trace.
pub fn probe_sweep(traces: &TraceSet, values: &[u8]) -> Result<SweepReport> {
    let cfg = &traces.config;
    let mut console = Console::with_quirks(cfg.game, cfg.seed, cfg.quirks);
    let mut bytes: Vec<ByteSweep> = (0..RamState::LEN as u8)
        .map(|addr| ByteSweep {
            addr,
            hits: 0,
            max_pixels: 0,
            bounds: None,
        })
        .collect();
    let mut leakage_free = true;
    let mut last: Option<Console> = None;
    for (_, state) in &traces.snapshots {
        console.restore(state)?;
        let control = console.clone();
        let found = probe_all(&mut console, values)?;
        if console.snapshot() != *state {
            leakage_free = false;
        }
        last = Some(control);
        for f in found {
            let b = &mut bytes[usize::from(f.addr)];
            let mut hit = false;
            for d in &f.diffs {
                if d.pixels > 0 {
                    hit = true;
                    b.max_pixels = b.max_pixels.max(d.pixels);
                }
                if let Some(bb) = d.bounds {
                    b.bounds = Some(b.bounds.map_or(bb, |u| u.union(&bb)));
                }
            }
            if hit {
                b.hits += 1;
            }
        }
    }
    if let Some(mut control) = last {
        leakage_free &= rollouts_match(&mut console, &mut control, LEAKAGE_ROLLOUT, cfg.seed)?;
    }
    let flagged: Vec<u8> = bytes.iter().filter(|b| b.hits > 0).map(|b| b.addr).collect();
    let map = cfg.game.cartridge().ram_map();
    let expected: BTreeSet<u8> = map.render_bytes().into_iter().collect();
    let got: BTreeSet<u8> = flagged.iter().copied().collect();
    Ok(SweepReport {
        baselines: traces.snapshots.iter().map(|(t, _)| *t).collect(),
        bytes,
        flagged,
        missed: expected.difference(&got).copied().collect(),
        unexpected: got.difference(&expected).copied().collect(),
        leakage_free,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecovery {
    pub addr: u8,
    pub category: String,
    pub property: String,
    pub a: f64,
    pub b: Vec<f64>,
    pub recovered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub truths: Vec<TruthRecovery>,
    pub recovered: usize,
    pub recovery: f64,
    /// Findings on bytes the RAM map does not document.
    pub false_findings: usize,
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= FIT_EPSILON
}

pub fn score_discovery(findings: &[CorrelationFinding], map: &RamMap) -> RecoveryReport {
    let truths: Vec<TruthRecovery> = map
        .affine
        .iter()
        .map(|t| {
            let recovered = findings.iter().any(|f| {
                f.addr == t.addr
                    && f.category() == t.category
                    && f.property() == t.property
                    && close(f.fit.a, t.a)
                    && t.b.iter().any(|b| close(f.fit.b, *b))
            });
            TruthRecovery {
                addr: t.addr,
                category: t.category.clone(),
                property: t.property.clone(),
                a: t.a,
                b: t.b.clone(),
                recovered,
            }
        })
        .collect();
    let recovered = truths.iter().filter(|t| t.recovered).count();
    RecoveryReport {
        recovery: if truths.is_empty() { 0.0 } else { recovered as f64 / truths.len() as f64 },
        recovered,
        truths,
        false_findings: findings.iter().filter(|f| !map.documents(f.addr)).count(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoverConfig {
    pub trace: TraceConfig,
    pub min_support: usize,
    pub r_threshold: f64,
    pub probe: bool,
}

impl DiscoverConfig {
    pub fn new(game: GameId, frames: usize, seed: u64) -> Self {
        DiscoverConfig {
            trace: TraceConfig::new(game, AgentKind::Random, frames, seed),
            min_support: DEFAULT_MIN_SUPPORT,
            r_threshold: DEFAULT_R_THRESHOLD,
            probe: false,
        }
    }
}

/// Correlation on byte-shuffled traces; a sound pipeline recovers nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlReport {
    pub findings: usize,
    pub recovered: usize,
    pub recovery: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryReport {
    pub config: DiscoverConfig,
    pub config_hash: String,
    pub series: Vec<String>,
    pub findings: Vec<CorrelationFinding>,
    pub diagnostics: CorrelationDiagnostics,
    pub recovery: RecoveryReport,
    pub control: ControlReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepReport>,
}

pub fn discover(config: &DiscoverConfig) -> Result<DiscoveryReport> {
    let traces = collect_traces(&config.trace)?;
    let map = config.trace.game.cartridge().ram_map();
    let c = correlate(&traces, config.min_support, config.r_threshold);
    let recovery = score_discovery(&c.findings, &map);
    let ctl = correlate(&traces.shuffled(config.trace.seed), config.min_support, config.r_threshold);
    let ctl_rec = score_discovery(&ctl.findings, &map);
    let sweep = if config.probe { Some(probe_sweep(&traces, &PROBE_VALUES)?) } else { None };
    Ok(DiscoveryReport {
        config_hash: crate::report::config_hash(config),
        config: config.clone(),
        series: traces.series.keys().cloned().collect(),
        findings: c.findings,
        diagnostics: c.diagnostics,
        recovery,
        control: ControlReport {
            findings: ctl.findings.len(),
            recovered: ctl_rec.recovered,
            recovery: ctl_rec.recovery,
        },
        sweep,
    })
}

impl DiscoveryReport {
    pub fn summary(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(s, "{:<6} {:<28} {:>7} {:>9} {:>9} {:>7}", "byte", "property", "r", "a", "b", "support");
        for f in self.findings.iter().take(40) {
            let _ = writeln!(s, "{:<6} {:<28} {:>7.3} {:>9.3} {:>9.3} {:>7}", f.addr, f.key, f.r, f.fit.a, f.fit.b, f.support);
        }
        if self.findings.len() > 40 {
            let _ = writeln!(s, "... {} more findings in the report file", self.findings.len() - 40);
        }
        for t in &self.recovery.truths {
            let _ = writeln!(s, "truth byte {:>3} -> {}.{}: {}", t.addr, t.category, t.property, if t.recovered { "recovered" } else { "missed" });
        }
        let _ = writeln!(
            s,
            "recovery={}/{} ({:.1}%) false_findings={} control_findings={}",
            self.recovery.recovered,
            self.recovery.truths.len(),
            100.0 * self.recovery.recovery,
            self.recovery.false_findings,
            self.control.findings
        );
        if let Some(sw) = &self.sweep {
            let _ = writeln!(
                s,
                "probe sweep: baselines={} flagged={:?} missed={:?} unexpected={:?} leakage_free={}",
                sw.baselines.len(),
                sw.flagged,
                sw.missed,
                sw.unexpected,
                sw.leakage_free
            );
        }
        s
    }
}
