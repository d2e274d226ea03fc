use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use minicart_core::agents::{Agent, AgentKind};
use minicart_core::discovery::{discover, DiscoverConfig, DEFAULT_MIN_SUPPORT, DEFAULT_R_THRESHOLD};
use minicart_core::evalkit::{bench_speed, run_comparison, BenchConfig, ComparisonConfig, DEFAULT_BENCH_STEPS, DEFAULT_FRAMES, MATCH_TOLERANCE_PX};
use minicart_core::oda::{generate, DatasetConfig, DEFAULT_RANDOM_FRACTION};
use minicart_core::overlay::{overlay, save_png};
use minicart_core::rem::extract_rem;
use minicart_core::report::{config_hash, write};
use minicart_core::vem::extract_vem;
use minicart_core::{Console, Frame, GameId, ObjectList, Palette, QuirkSet};
use minicart_inspector::ServiceConfig;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "minicart", version, about = "RAM and vision object extraction on a deterministic mini-console")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare REM against VEM over an episode.
    Eval(EvalArgs),
    /// Time REM against render + VEM.
    Bench(BenchArgs),
    /// Write an object-centric dataset.
    Dataset(DatasetArgs),
    /// Correlate RAM bytes with observed object properties.
    Discover(DiscoverArgs),
    /// Dump frames with REM (solid) and VEM (dashed) boxes.
    Play(PlayArgs),
    /// Run the inspector service.
    Serve(ServeArgs),
}

fn game(s: &str) -> Result<GameId, String> {
    s.parse().map_err(|e: minicart_core::Error| e.to_string())
}

fn agent(s: &str) -> Result<AgentKind, String> {
    s.parse().map_err(|e: minicart_core::Error| e.to_string())
}

fn quirks(no_quirks: bool) -> QuirkSet {
    if no_quirks {
        QuirkSet::NONE
    } else {
        QuirkSet::ALL
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_parser = game)]
    game: GameId,
    #[arg(long, value_parser = agent, default_value = "random")]
    agent: AgentKind,
    #[arg(long, default_value_t = DEFAULT_FRAMES)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Disable every render quirk.
    #[arg(long)]
    no_quirks: bool,
    #[arg(long, default_value_t = MATCH_TOLERANCE_PX)]
    tolerance: i32,
    /// Report path; defaults to reports/eval_<game>_<agent>_s<seed>[_noquirks].json.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_parser = game)]
    game: GameId,
    #[arg(long, default_value_t = DEFAULT_BENCH_STEPS)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = game, value_delimiter = ',', default_value = "paddle,invaders,climber")]
    games: Vec<GameId>,
    #[arg(long, default_value_t = 10)]
    episodes: usize,
    #[arg(long, default_value_t = DEFAULT_FRAMES)]
    frames: usize,
    /// Fraction of episodes played by the random agent.
    #[arg(long, default_value_t = DEFAULT_RANDOM_FRACTION)]
    mix: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Inline RGB pixels in the OBS column.
    #[arg(long)]
    inline_obs: bool,
    #[arg(long)]
    no_quirks: bool,
}

#[derive(Args)]
struct DiscoverArgs {
    #[arg(long, value_parser = game)]
    game: GameId,
    #[arg(long, default_value_t = DEFAULT_FRAMES)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = agent, default_value = "random")]
    agent: AgentKind,
    /// Also mutate every byte and diff the frames.
    #[arg(long)]
    probe: bool,
    #[arg(long)]
    no_quirks: bool,
    #[arg(long, default_value_t = DEFAULT_MIN_SUPPORT)]
    min_support: usize,
    #[arg(long, default_value_t = DEFAULT_R_THRESHOLD)]
    r_threshold: f64,
    /// Report path; defaults to reports/discover_<game>_s<seed>.json.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PlayArgs {
    #[arg(long, value_parser = game)]
    game: GameId,
    #[arg(long, value_parser = agent, default_value = "scripted")]
    agent: AgentKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    dump: PathBuf,
    #[arg(long, default_value_t = 100)]
    frames: usize,
    #[arg(long)]
    no_quirks: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8765)]
    port: u16,
    #[arg(long, value_parser = game, default_value = "paddle")]
    game: GameId,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Capability token for set_ram; generated when binding beyond loopback.
    #[arg(long)]
    token: Option<String>,
    /// Directory holding the built UI bundle.
    #[arg(long)]
    ui: Option<PathBuf>,
    #[arg(long)]
    no_quirks: bool,
}

fn announce<T: Serialize>(seed: u64, config: &T) {
    println!("seed={seed} config_hash={}", config_hash(config));
}

fn save<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, value).with_context(|| format!("writing {}", path.display()))?;
    println!("report: {}", path.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let mut cfg = ComparisonConfig::new(a.game, a.agent, a.frames, a.seed, quirks(a.no_quirks));
    cfg.tolerance_px = a.tolerance;
    announce(a.seed, &cfg);
    let report = run_comparison(&cfg)?;
    print!("{}", report.table());
    println!("macro F1 {:.3} mean IOU {:.3}", report.metrics.macro_f1, report.metrics.macro_iou);
    let path = a.report.unwrap_or_else(|| {
        let suffix = if a.no_quirks { "_noquirks" } else { "" };
        PathBuf::from(format!("reports/eval_{}_{}_s{}{suffix}.json", a.game, a.agent, a.seed))
    });
    save(&path, &report)
}

fn bench(a: BenchArgs) -> Result<()> {
    let cfg = BenchConfig {
        game: a.game,
        steps: a.steps,
        seed: a.seed,
    };
    announce(a.seed, &cfg);
    let r = bench_speed(&cfg)?;
    println!(
        "game={} steps={} t_rem={:.6}s t_vem={:.6}s ratio={:.1}",
        a.game, a.steps, r.t_rem, r.t_vem, r.ratio
    );
    if let Some(path) = a.report {
        save(&path, &r)?;
    }
    Ok(())
}

fn dataset(a: DatasetArgs) -> Result<()> {
    let cfg = DatasetConfig {
        random_fraction: a.mix,
        inline_obs: a.inline_obs,
        quirks: quirks(a.no_quirks),
        ..DatasetConfig::new(a.games, a.episodes, a.frames, a.seed)
    };
    cfg.validate()?;
    announce(a.seed, &cfg);
    let m = generate(&cfg, &a.out).with_context(|| format!("writing dataset to {}", a.out.display()))?;
    for g in &m.games {
        println!(
            "{}: {} rows, {} random + {} scripted episodes -> {}",
            g.game,
            g.rows,
            g.random_episodes,
            g.scripted_episodes,
            a.out.join(&g.csv).display()
        );
    }
    println!("manifest: {}", a.out.join(minicart_core::oda::MANIFEST_FILE).display());
    Ok(())
}

fn discover_cmd(a: DiscoverArgs) -> Result<()> {
    let mut cfg = DiscoverConfig::new(a.game, a.frames, a.seed);
    cfg.trace.agent = a.agent;
    cfg.trace.quirks = quirks(a.no_quirks);
    cfg.min_support = a.min_support;
    cfg.r_threshold = a.r_threshold;
    cfg.probe = a.probe;
    announce(a.seed, &cfg);
    let report = discover(&cfg)?;
    print!("{}", report.summary());
    let path = a
        .report
        .unwrap_or_else(|| PathBuf::from(format!("reports/discover_{}_s{}.json", a.game, a.seed)));
    save(&path, &report)
}

#[derive(Serialize)]
struct PlayConfig {
    game: GameId,
    agent: AgentKind,
    seed: u64,
    frames: usize,
    quirks: QuirkSet,
}

fn play(a: PlayArgs) -> Result<()> {
    let cfg = PlayConfig {
        game: a.game,
        agent: a.agent,
        seed: a.seed,
        frames: a.frames,
        quirks: quirks(a.no_quirks),
    };
    announce(a.seed, &cfg);
    std::fs::create_dir_all(&a.dump).with_context(|| format!("creating {}", a.dump.display()))?;
    let cart = a.game.cartridge();
    let (decoder, vision, palette) = (cart.decoder_spec(), cart.vision_spec(), Palette::console());
    let mut console = Console::with_quirks(a.game, a.seed, cfg.quirks);
    let mut agent = Agent::new(a.agent, a.game, a.seed);
    let mut frame = Frame::blank();
    let mut written = 0;
    for t in 0..=a.frames {
        console.render_into(&mut frame);
        let rem = extract_rem(console.ram(), &decoder);
        let vem = extract_vem(&frame, &vision, &palette);
        save_png(&overlay(&frame, &palette, &rem, &vem)?, &a.dump.join(format!("{t:05}.png")))?;
        written += 1;
        if t == a.frames {
            break;
        }
        let (_, done) = console.tick(agent.act(&ObjectList::new(console.frame_counter(), rem)))?;
        if done {
            console.render_into(&mut frame);
            let rem = extract_rem(console.ram(), &decoder);
            let vem = extract_vem(&frame, &vision, &palette);
            save_png(&overlay(&frame, &palette, &rem, &vem)?, &a.dump.join(format!("{:05}.png", t + 1)))?;
            written += 1;
            break;
        }
    }
    println!("wrote {written} frames to {} (score {})", a.dump.display(), console.score());
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut cfg = ServiceConfig::new(a.game, a.seed, a.port);
    cfg.host = a.host;
    cfg.token = a.token;
    cfg.ui_dir = a.ui;
    cfg.quirks = quirks(a.no_quirks);
    #[derive(Serialize)]
    struct Shown {
        game: GameId,
        seed: u64,
        quirks: QuirkSet,
        host: IpAddr,
        port: u16,
    }
    announce(
        a.seed,
        &Shown {
            game: cfg.game,
            seed: cfg.seed,
            quirks: cfg.quirks,
            host: cfg.host,
            port: cfg.port,
        },
    );
    if let Some(token) = cfg.ensure_token() {
        println!("set_ram token: {token}");
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let (addr, handle) = minicart_inspector::bind(cfg).await?;
        println!("listening on http://{addr}");
        handle.await.map_err(std::io::Error::other)?
    })
    .context("inspector service failed")?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Dataset(a) => dataset(a),
        Command::Discover(a) => discover_cmd(a),
        Command::Play(a) => play(a),
        Command::Serve(a) => serve(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("{line} (see --help)");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
