//! Comparison of a candidate object list (REM) against a reference (VEM):
//! center-tolerance matching, per-category detection metrics, rollout
//! comparisons with a mismatch log, and the extraction speed benchmark.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentKind};
use crate::assign::{center_dist_sq, gate_sq, match_edges, Edge};
use crate::console::Console;
use crate::error::{Error, Result};
use crate::games::{GameId, QuirkKind, QuirkSet};
use crate::model::{BBox, Category, Frame, GameObject, ObjectList, Palette};
use crate::rem::extract_rem;
use crate::vem::extract_vem;

pub const MATCH_TOLERANCE_PX: i32 = 5;
pub const DEFAULT_FRAMES: usize = 500;
pub const DEFAULT_BENCH_STEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub reference: usize,
    pub candidate: usize,
    /// Center distance in pixels.
    pub distance: f64,
    pub iou: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryMatching {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_reference: Vec<usize>,
    pub unmatched_candidate: Vec<usize>,
}

/// Per-category one-to-one matching. Indices refer to the input lists.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub categories: BTreeMap<String, CategoryMatching>,
}

impl Matching {
    pub fn matched(&self) -> usize {
        self.categories.values().map(|c| c.pairs.len()).sum()
    }
}

/// Match within each category: gated pairs are taken in ascending center
/// distance (ties by reference y, x, then candidate y, x), and augmenting
/// paths then guarantee a maximum-cardinality result.
pub fn match_objects(reference: &[GameObject], candidate: &[GameObject], tolerance_px: i32) -> Matching {
    let mut by_cat: BTreeMap<&str, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, o) in reference.iter().enumerate() {
        by_cat.entry(o.category.as_str()).or_default().0.push(i);
    }
    for (i, o) in candidate.iter().enumerate() {
        by_cat.entry(o.category.as_str()).or_default().1.push(i);
    }
    let gate = gate_sq(tolerance_px);
    let mut out = Matching::default();
    for (cat, (refs, cands)) in by_cat {
        let mut edges = Vec::new();
        for (li, &r) in refs.iter().enumerate() {
            for (ri, &c) in cands.iter().enumerate() {
                let d = center_dist_sq(reference[r].bbox().center2(), candidate[c].bbox().center2());
                if d <= gate {
                    edges.push(Edge { left: li, right: ri, dist_sq: d });
                }
            }
        }
        edges.sort_by_key(|e| {
            let r = &reference[refs[e.left]];
            let c = &candidate[cands[e.right]];
            (e.dist_sq, r.y, r.x, c.y, c.x)
        });
        let pairs = match_edges(refs.len(), cands.len(), &edges);
        let mut cm = CategoryMatching::default();
        let mut used_l = vec![false; refs.len()];
        let mut used_r = vec![false; cands.len()];
        for (l, r) in pairs {
            used_l[l] = true;
            used_r[r] = true;
            let (a, b) = (reference[refs[l]].bbox(), candidate[cands[r]].bbox());
            let d = center_dist_sq(a.center2(), b.center2());
            cm.pairs.push(MatchedPair {
                reference: refs[l],
                candidate: cands[r],
                distance: (d as f64).sqrt() / 2.0,
                iou: a.iou(&b),
            });
        }
        cm.unmatched_reference = refs.iter().zip(&used_l).filter(|(_, u)| !**u).map(|(i, _)| *i).collect();
        cm.unmatched_candidate = cands.iter().zip(&used_r).filter(|(_, u)| !**u).map(|(i, _)| *i).collect();
        out.categories.insert(cat.to_string(), cm);
    }
    out
}

/// Pooled detection counts for one category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub iou_sum: f64,
}

impl Counts {
    pub fn add(&mut self, m: &CategoryMatching) {
        self.tp += m.pairs.len() as u64;
        self.fp += m.unmatched_candidate.len() as u64;
        self.fn_ += m.unmatched_reference.len() as u64;
        self.iou_sum += m.pairs.iter().map(|p| p.iou).sum::<f64>();
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }

    pub fn mean_iou(&self) -> Option<f64> {
        (self.tp > 0).then(|| self.iou_sum / self.tp as f64)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Mean IOU over matched pairs; absent when nothing matched.
    pub iou: Option<f64>,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub frames: usize,
    pub categories: BTreeMap<String, CategoryMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub macro_iou: f64,
}

/// Aggregate pooled per-category counts. Macro averages run over categories
/// seen at least once in the reference; IOU over categories with matches.
pub fn detection_metrics(counts: &BTreeMap<String, Counts>, frames: usize) -> Result<Metrics> {
    if frames == 0 {
        return Err(Error::EmptyEpisode);
    }
    let mut categories = BTreeMap::new();
    let (mut p, mut r, mut f, mut n) = (0.0, 0.0, 0.0, 0usize);
    let (mut iou, mut n_iou) = (0.0, 0usize);
    for (name, c) in counts {
        let m = CategoryMetrics {
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
            iou: c.mean_iou(),
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
        };
        if c.tp + c.fn_ > 0 {
            p += m.precision;
            r += m.recall;
            f += m.f1;
            n += 1;
        }
        if let Some(v) = m.iou {
            iou += v;
            n_iou += 1;
        }
        categories.insert(name.clone(), m);
    }
    let avg = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    Ok(Metrics {
        frames,
        categories,
        macro_precision: avg(p, n),
        macro_recall: avg(r, n),
        macro_f1: avg(f, n),
        macro_iou: avg(iou, n_iou),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MismatchKind {
    /// Seen by VEM, not matched by REM.
    VemOnly,
    /// Reported by REM, not matched by VEM.
    RemOnly,
    /// Matched, but the boxes differ.
    BoxDiffers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub frame_index: u64,
    pub kind: MismatchKind,
    pub category: Category,
    pub reference: Option<BBox>,
    pub candidate: Option<BBox>,
    /// The declared quirk that explains this disagreement, if any.
    pub quirk: Option<QuirkKind>,
}

/// Per-frame disagreements implied by a matching, before attribution.
pub fn mismatches(frame_index: u64, reference: &[GameObject], candidate: &[GameObject], m: &Matching) -> Vec<Mismatch> {
    let mut out = Vec::new();
    for (cat, cm) in &m.categories {
        let category = Category::new(cat.clone());
        for p in &cm.pairs {
            let (a, b) = (reference[p.reference].bbox(), candidate[p.candidate].bbox());
            if a != b {
                out.push(Mismatch {
                    frame_index,
                    kind: MismatchKind::BoxDiffers,
                    category: category.clone(),
                    reference: Some(a),
                    candidate: Some(b),
                    quirk: None,
                });
            }
        }
        for &i in &cm.unmatched_reference {
            out.push(Mismatch {
                frame_index,
                kind: MismatchKind::VemOnly,
                category: category.clone(),
                reference: Some(reference[i].bbox()),
                candidate: None,
                quirk: None,
            });
        }
        for &i in &cm.unmatched_candidate {
            out.push(Mismatch {
                frame_index,
                kind: MismatchKind::RemOnly,
                category: category.clone(),
                reference: None,
                candidate: Some(candidate[i].bbox()),
                quirk: None,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub game: GameId,
    pub agent: AgentKind,
    pub frames: usize,
    pub seed: u64,
    pub quirks: QuirkSet,
    pub tolerance_px: i32,
}

impl ComparisonConfig {
    pub fn new(game: GameId, agent: AgentKind, frames: usize, seed: u64, quirks: QuirkSet) -> Self {
        ComparisonConfig {
            game,
            agent,
            frames,
            seed,
            quirks,
            tolerance_px: MATCH_TOLERANCE_PX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub config: ComparisonConfig,
    pub config_hash: String,
    pub episodes: u32,
    pub metrics: Metrics,
    pub mismatches: Vec<Mismatch>,
    pub unattributed: usize,
    pub attributed: BTreeMap<QuirkKind, usize>,
}

/// Seed for the `episode`-th episode of a run seeded with `seed`.
pub fn episode_seed(seed: u64, episode: u32) -> u64 {
    crate::rng::splitmix64(seed ^ u64::from(episode).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Roll out `frames` ticks (auto-resetting finished episodes), extracting REM
/// and VEM on every post-tick frame with VEM as the reference.
pub fn run_comparison(config: &ComparisonConfig) -> Result<ComparisonReport> {
    let cart = config.game.cartridge();
    let vision = cart.vision_spec();
    let decoder = cart.decoder_spec();
    let palette = Palette::console();
    let mut episode = 0u32;
    let mut console = Console::with_quirks(config.game, episode_seed(config.seed, episode), config.quirks);
    let mut agent = Agent::new(config.agent, config.game, episode_seed(config.seed, episode));
    let mut frame = Frame::blank();
    let mut counts: BTreeMap<String, Counts> = cart.categories().iter().map(|c| (c.name.to_string(), Counts::default())).collect();
    let mut log = Vec::new();

    for index in 0..config.frames as u64 {
        let rem_now = ObjectList::new(console.frame_counter(), extract_rem(console.ram(), &decoder));
        let action = agent.act(&rem_now);
        let (_, done) = console.tick(action)?;
        console.render_into(&mut frame);
        let vem = extract_vem(&frame, &vision, &palette);
        let rem = extract_rem(console.ram(), &decoder);
        let m = match_objects(&vem, &rem, config.tolerance_px);
        for (cat, cm) in &m.categories {
            counts.entry(cat.clone()).or_default().add(cm);
        }
        for mut mm in mismatches(index, &vem, &rem, &m) {
            mm.quirk = cart.attribute(console.ram(), console.view(), &mm);
            log.push(mm);
        }
        if done {
            episode += 1;
            console = Console::with_quirks(config.game, episode_seed(config.seed, episode), config.quirks);
            agent = Agent::new(config.agent, config.game, episode_seed(config.seed, episode));
        }
    }

    let metrics = detection_metrics(&counts, config.frames)?;
    let unattributed = log.iter().filter(|m| m.quirk.is_none()).count();
    let mut attributed = BTreeMap::new();
    for q in log.iter().filter_map(|m| m.quirk) {
        *attributed.entry(q).or_insert(0) += 1;
    }
    Ok(ComparisonReport {
        config_hash: crate::report::config_hash(config),
        config: config.clone(),
        episodes: episode + 1,
        metrics,
        mismatches: log,
        unattributed,
        attributed,
    })
}

impl ComparisonReport {
    /// Fixed-width table, one row per category plus the macro average.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let _ = writeln!(
            s,
            "game={} agent={} frames={} seed={} quirks={} config_hash={}",
            c.game,
            c.agent,
            c.frames,
            c.seed,
            if c.quirks == QuirkSet::NONE { "off" } else { "on" },
            self.config_hash
        );
        let _ = writeln!(s, "IOU is averaged over matched pairs only");
        let _ = writeln!(
            s,
            "{:<16} {:>9} {:>9} {:>9} {:>9} {:>7} {:>7} {:>7}",
            "category", "precision", "recall", "f1", "iou", "tp", "fp", "fn"
        );
        for (name, m) in &self.metrics.categories {
            let iou = m.iou.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
            let _ = writeln!(
                s,
                "{:<16} {:>9.3} {:>9.3} {:>9.3} {:>9} {:>7} {:>7} {:>7}",
                name, m.precision, m.recall, m.f1, iou, m.tp, m.fp, m.fn_
            );
        }
        let m = &self.metrics;
        let _ = writeln!(
            s,
            "{:<16} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
            "macro", m.macro_precision, m.macro_recall, m.macro_f1, m.macro_iou
        );
        let _ = writeln!(s, "mismatches={} unattributed={}", self.mismatches.len(), self.unattributed);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub game: GameId,
    pub steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub config_hash: String,
    pub t_rem: f64,
    pub t_vem: f64,
    pub ratio: f64,
    /// Objects extracted over each timed run.
    pub rem_objects: usize,
    pub vem_objects: usize,
}

/// Time `steps` ticks with REM-only extraction against `steps` ticks with
/// render + VEM extraction, replaying one pre-drawn action sequence.
pub fn bench_speed(config: &BenchConfig) -> Result<BenchReport> {
    let cart = config.game.cartridge();
    let decoder = cart.decoder_spec();
    let vision = cart.vision_spec();
    let palette = Palette::console();
    let mut rng = crate::rng::Xorshift64::stream(config.seed, 1);
    let n = cart.action_count() as u32;
    let actions: Vec<u8> = (0..config.steps).map(|_| rng.below(n) as u8).collect();

    let run = |vem: bool| -> Result<(f64, usize)> {
        let mut episode = 0;
        let mut console = Console::new(config.game, episode_seed(config.seed, episode));
        let mut frame = Frame::blank();
        let mut objects = 0;
        let start = Instant::now();
        for &a in &actions {
            let (_, done) = console.tick(a)?;
            if vem {
                console.render_into(&mut frame);
                objects += extract_vem(&frame, &vision, &palette).len();
            } else {
                objects += extract_rem(console.ram(), &decoder).len();
            }
            if done {
                episode += 1;
                console = Console::new(config.game, episode_seed(config.seed, episode));
            }
        }
        Ok((start.elapsed().as_secs_f64(), objects))
    };
    let (t_rem, rem_objects) = run(false)?;
    let (t_vem, vem_objects) = run(true)?;
    Ok(BenchReport {
        config_hash: crate::report::config_hash(config),
        config: config.clone(),
        t_rem,
        t_vem,
        ratio: if t_rem > 0.0 { t_vem / t_rem } else { f64::INFINITY },
        rem_objects,
        vem_objects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(cat: &'static str, x: i32, y: i32, w: i32, h: i32) -> GameObject {
        GameObject::new(Category::from_static(cat), BBox::new(x, y, w, h), [1, 2, 3], false)
    }

    #[test]
    fn identical_lists_match_perfectly() {
        let a = vec![obj("A", 0, 0, 4, 4), obj("A", 20, 20, 4, 4), obj("B", 50, 50, 2, 2)];
        let m = match_objects(&a, &a, 5);
        assert_eq!(m.matched(), 3);
        assert!(m.categories.values().all(|c| c.unmatched_candidate.is_empty() && c.unmatched_reference.is_empty()));
    }

    #[test]
    fn six_pixel_shift_does_not_match() {
        let a = vec![obj("A", 10, 10, 4, 4)];
        let b = vec![obj("A", 16, 10, 4, 4)];
        assert_eq!(match_objects(&a, &b, 5).matched(), 0);
        let c = vec![obj("A", 15, 10, 4, 4)];
        assert_eq!(match_objects(&a, &c, 5).matched(), 1);
    }

    #[test]
    fn categories_never_cross_match() {
        let a = vec![obj("A", 10, 10, 4, 4)];
        let b = vec![obj("B", 10, 10, 4, 4)];
        assert_eq!(match_objects(&a, &b, 5).matched(), 0);
    }

    #[test]
    fn hand_evaluated_half_precision() {
        let reference = vec![obj("A", 10, 10, 4, 4)];
        let candidate = vec![obj("A", 10, 10, 4, 4), obj("A", 80, 80, 4, 4)];
        let m = match_objects(&reference, &candidate, 5);
        let mut counts = BTreeMap::new();
        counts.entry("A".to_string()).or_insert_with(Counts::default).add(&m.categories["A"]);
        let metrics = detection_metrics(&counts, 1).unwrap();
        let a = &metrics.categories["A"];
        assert_eq!(a.precision, 0.5);
        assert_eq!(a.recall, 1.0);
        assert!((a.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_episode_is_an_error() {
        assert!(matches!(detection_metrics(&BTreeMap::new(), 0), Err(Error::EmptyEpisode)));
    }

    #[test]
    fn macro_skips_categories_absent_from_reference() {
        let mut counts = BTreeMap::new();
        counts.insert("A".to_string(), Counts { tp: 4, fp: 0, fn_: 0, iou_sum: 4.0 });
        counts.insert("B".to_string(), Counts { tp: 0, fp: 3, fn_: 0, iou_sum: 0.0 });
        let m = detection_metrics(&counts, 10).unwrap();
        assert_eq!(m.macro_f1, 1.0);
        assert_eq!(m.categories["B"].precision, 0.0);
    }

    #[test]
    fn mismatch_kinds() {
        let reference = vec![obj("A", 10, 10, 4, 4), obj("A", 100, 100, 4, 4)];
        let candidate = vec![obj("A", 10, 10, 4, 6), obj("A", 50, 50, 4, 4)];
        let m = match_objects(&reference, &candidate, 5);
        let mut kinds: Vec<_> = mismatches(0, &reference, &candidate, &m).iter().map(|m| m.kind).collect();
        kinds.sort();
        assert_eq!(kinds, [MismatchKind::VemOnly, MismatchKind::RemOnly, MismatchKind::BoxDiffers]);
    }

    #[test]
    fn cardinality_is_symmetric() {
        let mut rng = crate::rng::Xorshift64::new(9);
        for _ in 0..500 {
            let gen = |rng: &mut crate::rng::Xorshift64| {
                (0..rng.below(6))
                    .map(|_| obj("A", rng.below(30) as i32, rng.below(30) as i32, 1 + rng.below(6) as i32, 1 + rng.below(6) as i32))
                    .collect::<Vec<_>>()
            };
            let a = gen(&mut rng);
            let b = gen(&mut rng);
            assert_eq!(match_objects(&a, &b, 5).matched(), match_objects(&b, &a, 5).matched());
        }
    }
}
