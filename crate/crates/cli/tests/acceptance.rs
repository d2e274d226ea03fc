//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use minicart_core::agents::{Agent, AgentKind};
use minicart_core::discovery::{collect_traces, discover, DiscoverConfig, TraceConfig, FIT_EPSILON};
use minicart_core::env::{grayscale_downsample, Env, EnvConfig, ObsMode, Observation, PLANE_LEN, PLANE_SIZE, STACK};
use minicart_core::evalkit::{bench_speed, detection_metrics, match_objects, run_comparison, BenchConfig, ComparisonConfig, Counts, MATCH_TOLERANCE_PX};
use minicart_core::oda::{self, DatasetConfig};
use minicart_core::rem::extract_rem;
use minicart_core::rng::Xorshift64;
use minicart_core::vem::extract_vem;
use minicart_core::{BBox, Category, Console, Frame, GameId, GameObject, ObjectList, Palette, QuirkSet};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn quirk_free_equivalence() -> Outcome {
    let mut notes = Vec::new();
    for game in GameId::ALL {
        let start = Instant::now();
        for agent in AgentKind::ALL {
            let r = run_comparison(&ComparisonConfig::new(game, agent, 500, 0, QuirkSet::NONE)).map_err(|e| e.to_string())?;
            check(
                r.metrics.macro_f1 == 1.0 && r.metrics.macro_iou == 1.0,
                format!("{game}/{agent}: F1 {} IOU {}", r.metrics.macro_f1, r.metrics.macro_iou),
            )?;
        }
        let secs = start.elapsed().as_secs_f64();
        check(secs < 10.0, format!("{game} took {secs:.1}s"))?;
        notes.push(format!("{game} {secs:.2}s"));
    }
    Ok(format!("F1=IOU=1.000 for random and scripted; {}", notes.join(", ")))
}

fn quirked_fidelity() -> Outcome {
    let mut notes = Vec::new();
    for game in GameId::ALL {
        for seed in [0, 1, 2] {
            let r = run_comparison(&ComparisonConfig::new(game, AgentKind::Random, 500, seed, QuirkSet::ALL)).map_err(|e| e.to_string())?;
            let f1 = r.metrics.macro_f1;
            check((0.85..=0.995).contains(&f1), format!("{game} seed {seed}: macro F1 {f1:.4}"))?;
            check(r.unattributed == 0, format!("{game} seed {seed}: {} unattributed mismatches", r.unattributed))?;
            if seed == 0 {
                notes.push(format!("{game} F1 {f1:.3} ({} mismatches)", r.mismatches.len()));
            }
        }
    }
    Ok(format!("{}; zero unattributed over seeds 0-2", notes.join(", ")))
}

fn speed() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    for game in GameId::ALL {
        let r = bench_speed(&BenchConfig { game, steps: 10_000, seed: 0 }).map_err(|e| e.to_string())?;
        check(r.ratio >= 10.0, format!("{game}: ratio {:.1}", r.ratio))?;
        notes.push(format!("{game} {:.0}x", r.ratio));
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 60.0, format!("bench took {secs:.1}s"))?;
    Ok(format!("{} in {secs:.1}s", notes.join(", ")))
}

/// Maximum matching by exhaustive search over candidate assignments.
fn brute_max(adj: &[Vec<bool>], i: usize, used: u32) -> usize {
    if i == adj.len() {
        return 0;
    }
    let mut best = brute_max(adj, i + 1, used);
    for (j, ok) in adj[i].iter().enumerate() {
        if *ok && used & (1 << j) == 0 {
            best = best.max(1 + brute_max(adj, i + 1, used | (1 << j)));
        }
    }
    best
}

fn within_tolerance(a: &GameObject, b: &GameObject) -> bool {
    // Doubled centers keep everything integral; 5 px becomes 10.
    let (ax, ay) = (2 * a.x + a.w, 2 * a.y + a.h);
    let (bx, by) = (2 * b.x + b.w, 2 * b.y + b.h);
    let (dx, dy) = (i64::from(ax - bx), i64::from(ay - by));
    dx * dx + dy * dy <= i64::from(2 * MATCH_TOLERANCE_PX).pow(2)
}

fn metrics_oracle() -> Outcome {
    let cats = ["A", "B", "C"];
    let mut rng = Xorshift64::new(2024);
    let obj = |rng: &mut Xorshift64, cat: &'static str| {
        // A small arena makes overlapping gates common.
        let w = 1 + rng.below(6) as i32;
        let h = 1 + rng.below(6) as i32;
        GameObject::new(Category::from_static(cat), BBox::new(40 + rng.below(16) as i32, 60 + rng.below(16) as i32, w, h), [0, 0, 0], false)
    };
    let instances = 10_000;
    for inst in 0..instances {
        let mut reference = Vec::new();
        let mut candidate = Vec::new();
        for cat in cats {
            for _ in 0..rng.below(7) {
                reference.push(obj(&mut rng, cat));
            }
            for _ in 0..rng.below(7) {
                candidate.push(obj(&mut rng, cat));
            }
        }
        let m = match_objects(&reference, &candidate, MATCH_TOLERANCE_PX);
        let mut counts = BTreeMap::new();
        for cat in cats {
            let refs: Vec<&GameObject> = reference.iter().filter(|o| o.category == cat).collect();
            let cands: Vec<&GameObject> = candidate.iter().filter(|o| o.category == cat).collect();
            let adj: Vec<Vec<bool>> = refs.iter().map(|r| cands.iter().map(|c| within_tolerance(r, c)).collect()).collect();
            let best = brute_max(&adj, 0, 0);
            let got = m.categories.get(cat).map_or(0, |c| c.pairs.len());
            check(got == best, format!("instance {inst} category {cat}: matched {got}, maximum {best}"))?;
            if let Some(cm) = m.categories.get(cat) {
                for p in &cm.pairs {
                    check(within_tolerance(&reference[p.reference], &candidate[p.candidate]), format!("instance {inst}: pair outside tolerance"))?;
                }
                let mut c = Counts::default();
                c.add(cm);
                counts.insert(cat.to_string(), c);
            }
            // Direct counting.
            let (tp, fp, fn_) = (best as f64, (cands.len() - best) as f64, (refs.len() - best) as f64);
            let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
            let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            if let Some(c) = counts.get(cat) {
                check(c.precision() == p && c.recall() == r && c.f1() == f, format!("instance {inst} category {cat}: P/R/F1 differ from direct counts"))?;
            }
        }
        let metrics = detection_metrics(&counts, 1).map_err(|e| e.to_string())?;
        for (cat, c) in &counts {
            let cm = &metrics.categories[cat];
            check(cm.tp == c.tp && cm.fp == c.fp && cm.fn_ == c.fn_, format!("instance {inst}: aggregated counts differ"))?;
        }
    }
    Ok(format!("{instances} instances, matching cardinality and P/R/F1 exact"))
}

fn discovery_recovery() -> Outcome {
    let mut notes = Vec::new();
    for game in GameId::ALL {
        let mut cfg = DiscoverConfig::new(game, 500, 0);
        cfg.probe = true;
        let r = discover(&cfg).map_err(|e| e.to_string())?;
        check(r.recovery.recovery >= 0.9, format!("{game}: recovery {}/{}", r.recovery.recovered, r.recovery.truths.len()))?;
        let sweep = r.sweep.as_ref().expect("probe requested");
        check(sweep.missed.is_empty(), format!("{game}: sweep missed render bytes {:?}", sweep.missed))?;
        check(sweep.leakage_free, format!("{game}: probe sweep leaked console state"))?;
        if game == GameId::Paddle {
            let f = r
                .findings
                .iter()
                .find(|f| f.addr == 2 && f.key == "Player.y")
                .ok_or("paddle: no Player.y finding on byte 2")?;
            check(
                (f.fit.a - 1.0).abs() <= FIT_EPSILON && (f.fit.b - 10.0).abs() <= FIT_EPSILON,
                format!("paddle: Player.y fit a={} b={}", f.fit.a, f.fit.b),
            )?;
        }
        notes.push(format!("{game} {}/{}", r.recovery.recovered, r.recovery.truths.len()));
    }
    Ok(format!("{}; probe sweeps complete and leak-free", notes.join(", ")))
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_minicart")).current_dir(dir).args(args).output().map_err(|e| e.to_string())?;
    check(out.status.success(), format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))?;
    Ok(out.stdout)
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let invocations: [&[&str]; 4] = [
        &["eval", "--game", "invaders", "--frames", "300", "--seed", "11", "--report", "out/eval.json"],
        &["discover", "--game", "climber", "--frames", "300", "--seed", "11", "--probe", "--report", "out/discover.json"],
        &["dataset", "--out", "out/ds", "--episodes", "3", "--frames", "40", "--seed", "11"],
        &["play", "--game", "paddle", "--seed", "11", "--dump", "out/play", "--frames", "40"],
    ];
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    for args in invocations {
        let sa = run_cli(a.path(), args)?;
        let sb = run_cli(b.path(), args)?;
        check(sa == sb, format!("{}: stdout differs", args[0]))?;
    }
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    check(ta.len() == tb.len(), "file sets differ")?;
    for (k, v) in &ta {
        check(tb.get(k) == Some(v), format!("{k} differs between runs"))?;
    }
    for game in GameId::ALL {
        let cfg = TraceConfig::new(game, AgentKind::Scripted, 300, 11);
        check(collect_traces(&cfg).ok() == collect_traces(&cfg).ok(), format!("{game}: traces differ"))?;
    }
    Ok(format!("{} files byte-identical across repeated eval/discover/dataset/play; traces identical", ta.len()))
}

fn oda_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = DatasetConfig::new(GameId::ALL.to_vec(), 10, 60, 5);
    let manifest = oda::generate(&cfg, dir.path()).map_err(|e| e.to_string())?;
    let palette = Palette::console();
    let mut rows_total = 0;
    for gm in &manifest.games {
        check(
            gm.random_episodes == 3 && gm.scripted_episodes == 7,
            format!("{}: {} random + {} scripted", gm.game, gm.random_episodes, gm.scripted_episodes),
        )?;
        let rows = oda::parse(&dir.path().join(&gm.csv)).map_err(|e| e.to_string())?;
        check(rows.len() == gm.rows, format!("{}: parsed {} rows, manifest {}", gm.game, rows.len(), gm.rows))?;
        let cart = gm.game.cartridge();
        let (decoder, vision) = (cart.decoder_spec(), cart.vision_spec());
        let mut it = rows.iter();
        // Replay every episode from the manifest and compare each parsed row.
        for ep in &gm.episodes {
            let mut console = Console::with_quirks(gm.game, ep.seed, cfg.quirks);
            let mut agent = Agent::new(ep.agent, gm.game, ep.seed);
            let mut frame = Frame::blank();
            for t in 0..ep.frames {
                let now = ObjectList::new(console.frame_counter(), extract_rem(console.ram(), &decoder));
                console.tick(agent.act(&now)).map_err(|e| e.to_string())?;
                console.render_into(&mut frame);
                let rem = extract_rem(console.ram(), &decoder);
                let vem = extract_vem(&frame, &vision, &palette);
                let row = it.next().ok_or("fewer rows than the manifest promises")?;
                let index = oda::format_index(ep.episode, t + 1);
                check(row.index == index, format!("{}: expected index {index}, got {}", gm.game, row.index))?;
                check(row.vis == vem, format!("{} {index}: VIS differs", gm.game))?;
                check(row.hud.iter().all(|o| o.hud) && row.ram.iter().all(|o| !o.hud), format!("{} {index}: HUD and RAM overlap", gm.game))?;
                let mut union: Vec<GameObject> = row.hud.iter().chain(&row.ram).cloned().collect();
                let mut expect = rem.clone();
                union.sort_by_key(|o| format!("{o:?}"));
                expect.sort_by_key(|o| format!("{o:?}"));
                check(union == expect, format!("{} {index}: HUD + RAM is not the REM extraction", gm.game))?;
            }
        }
        rows_total += rows.len();
    }
    Ok(format!("3 random + 7 scripted per game; {rows_total} rows field-identical; HUD/RAM disjoint"))
}

fn env_api() -> Outcome {
    let palette = Palette::console();
    let mut steps = 0;
    for game in GameId::ALL {
        let mut env = Env::new(EnvConfig::new(game, ObsMode::Pixels)).map_err(|e| e.to_string())?;
        let mut obs = env.reset(Some(3));
        let mut rng = Xorshift64::new(17);
        for _ in 0..1000 {
            check(obs.len() == STACK * PLANE_SIZE * PLANE_SIZE, format!("{game}: observation length {}", obs.len()))?;
            let s = env.step(rng.below(env.action_count() as u32) as u8).map_err(|e| e.to_string())?;
            for k in 0..STACK - 1 {
                check(s.observation.plane(k) == obs.plane(k + 1), format!("{game}: plane {k} did not roll"))?;
            }
            let fresh = grayscale_downsample(&env.render(), &palette);
            check(s.observation.plane(STACK - 1) == Some(&fresh[..]), format!("{game}: newest plane is not the current frame"))?;
            check(fresh.len() == PLANE_LEN, "plane size")?;
            steps += 1;
            obs = if s.terminated { env.reset(None) } else { s.observation };
        }

        let mut with = EnvConfig::new(game, ObsMode::Objects);
        with.include_hud = true;
        let mut without = with.clone();
        without.include_hud = false;
        let mut e1 = Env::new(with).map_err(|e| e.to_string())?;
        let mut e2 = Env::new(without).map_err(|e| e.to_string())?;
        let hud_slots: usize = game.cartridge().categories().iter().filter(|c| c.hud).map(|c| c.max_instances).sum();
        let (o1, o2) = (e1.reset(None), e2.reset(None));
        check(o1.len() == 2 * 2 * e1.slot_count() && o2.len() == 2 * 2 * e2.slot_count(), format!("{game}: object lengths"))?;
        check(e1.slot_count() == e2.slot_count() + hud_slots, format!("{game}: HUD flag removed the wrong slot count"))?;
        check(hud_slots > 0 && o1.len() > o2.len(), format!("{game}: HUD flag had no effect"))?;

        let mut ram_env = Env::new(EnvConfig::new(game, ObsMode::Ram)).map_err(|e| e.to_string())?;
        ram_env.reset(None);
        for addr in 0..128 {
            let v = (addr as u8).wrapping_mul(37).wrapping_add(5);
            ram_env.set_ram(addr, v).map_err(|e| e.to_string())?;
            check(ram_env.get_ram()[addr as u8] == v, format!("{game}: byte {addr} did not round-trip"))?;
        }
        check(ram_env.set_ram(128, 0).is_err(), "address 128 accepted")?;
        if let Observation::Ram(r) = ram_env.reset(None) {
            check(r.len() == 128, "ram observation length")?;
        }
    }
    Ok(format!("4x84x84 planes roll exactly over {steps} steps; HUD flag and RAM round trip verified"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("quirk-free equivalence", quirk_free_equivalence),
        ("quirked-regime fidelity", quirked_fidelity),
        ("speed", speed),
        ("metrics oracle", metrics_oracle),
        ("discovery recovery", discovery_recovery),
        ("determinism", determinism),
        ("ODA round trip", oda_round_trip),
        ("env API", env_api),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
