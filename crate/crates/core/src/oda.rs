//! Object-centric dataset generation and parsing.
//!
//! One CSV per game with columns `index,OBS,HUD,RAM,VIS,PNG`. Object cells
//! hold semicolon-separated entries `category,x,y,w,h,r,g,b[,orientation][,value]`.
//! A value without an orientation leaves the orientation field empty.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentKind};
use crate::console::Console;
use crate::error::{Error, Result};
use crate::games::{GameId, QuirkSet};
use crate::model::{to_rgb, Category, Frame, GameObject, ObjectList, Palette, FRAME_HEIGHT, FRAME_WIDTH};
use crate::rem::extract_rem;
use crate::rng::splitmix64;
use crate::vem::extract_vem;

pub const DEFAULT_RANDOM_FRACTION: f64 = 0.3;
pub const COLUMNS: [&str; 6] = ["index", "OBS", "HUD", "RAM", "VIS", "PNG"];
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub games: Vec<GameId>,
    pub episodes: usize,
    pub frames: usize,
    pub random_fraction: f64,
    pub seed: u64,
    pub inline_obs: bool,
    pub quirks: QuirkSet,
}

impl DatasetConfig {
    pub fn new(games: Vec<GameId>, episodes: usize, frames: usize, seed: u64) -> Self {
        DatasetConfig {
            games,
            episodes,
            frames,
            random_fraction: DEFAULT_RANDOM_FRACTION,
            seed,
            inline_obs: false,
            quirks: QuirkSet::ALL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.random_fraction) {
            return Err(Error::Config(format!("random fraction {} outside [0, 1]", self.random_fraction)));
        }
        if self.episodes > 99_999 || self.frames > 99_999 {
            return Err(Error::Config("episodes and frames must fit the 5-digit index".into()));
        }
        Ok(())
    }

    /// Episodes played by the random agent; the rest are scripted.
    pub fn random_episodes(&self) -> usize {
        ((self.random_fraction * self.episodes as f64).ceil() as usize).min(self.episodes)
    }

    pub fn agent_for(&self, episode: usize) -> AgentKind {
        if episode < self.random_episodes() {
            AgentKind::Random
        } else {
            AgentKind::Scripted
        }
    }

    pub fn episode_seed(&self, game: GameId, episode: usize) -> u64 {
        let g = GameId::ALL.iter().position(|x| *x == game).unwrap_or(0) as u64;
        splitmix64(self.seed ^ splitmix64((g << 32) | episode as u64))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// 1-based, as in the row index.
    pub episode: usize,
    pub agent: AgentKind,
    pub seed: u64,
    pub frames: usize,
    /// The game ended before the frame budget was used up.
    pub terminated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameManifest {
    pub game: GameId,
    pub csv: String,
    pub rows: usize,
    pub random_episodes: usize,
    pub scripted_episodes: usize,
    pub episodes: Vec<EpisodeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: DatasetConfig,
    pub config_hash: String,
    pub games: Vec<GameManifest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub index: String,
    /// Row-major RGB triples, when inlined.
    pub obs: Option<Vec<u8>>,
    pub hud: Vec<GameObject>,
    pub ram: Vec<GameObject>,
    pub vis: Vec<GameObject>,
    pub png: String,
}

pub fn format_index(episode: usize, frame: usize) -> String {
    format!("{episode:05}_{frame:05}")
}

/// `(episode, frame)` from an index of the form `DDDDD_DDDDD`.
pub fn parse_index(index: &str) -> Option<(usize, usize)> {
    let (e, f) = index.split_once('_')?;
    let five = |s: &str| s.len() == 5 && s.bytes().all(|b| b.is_ascii_digit());
    if !five(e) || !five(f) {
        return None;
    }
    Some((e.parse().ok()?, f.parse().ok()?))
}

pub fn format_object(o: &GameObject) -> String {
    let mut s = format!("{},{},{},{},{},{},{},{}", o.category, o.x, o.y, o.w, o.h, o.rgb[0], o.rgb[1], o.rgb[2]);
    match (o.orientation, o.value) {
        (None, None) => {}
        (Some(r), None) => s.push_str(&format!(",{r}")),
        (r, Some(v)) => s.push_str(&format!(",{},{v}", r.map(|r| r.to_string()).unwrap_or_default())),
    }
    s
}

pub fn format_objects(objects: &[GameObject]) -> String {
    objects.iter().map(format_object).collect::<Vec<_>>().join(";")
}

fn num<T: std::str::FromStr>(field: &str, what: &str) -> std::result::Result<T, String> {
    field.parse().map_err(|_| format!("bad {what} {field:?}"))
}

/// One entry; `hud` is not encoded in the cell and comes from the column.
pub fn parse_object(entry: &str, hud: bool) -> std::result::Result<GameObject, String> {
    let f: Vec<&str> = entry.split(',').collect();
    if !(8..=10).contains(&f.len()) {
        return Err(format!("object entry {entry:?} has {} fields, expected 8 to 10", f.len()));
    }
    if f[0].is_empty() || f[0].contains(char::is_whitespace) {
        return Err(format!("bad category {:?}", f[0]));
    }
    let mut o = GameObject {
        category: Category::new(f[0]),
        x: num(f[1], "x")?,
        y: num(f[2], "y")?,
        w: num(f[3], "w")?,
        h: num(f[4], "h")?,
        rgb: [num(f[5], "r")?, num(f[6], "g")?, num(f[7], "b")?],
        hud,
        orientation: None,
        value: None,
        track_id: None,
    };
    if let Some(r) = f.get(8).filter(|r| !r.is_empty()) {
        o.orientation = Some(num(r, "orientation")?);
    }
    if let Some(v) = f.get(9) {
        o.value = Some(num(v, "value")?);
    }
    if f.len() == 9 && o.orientation.is_none() {
        return Err("empty orientation without a value".into());
    }
    o.validate().map_err(|e| e.to_string())?;
    Ok(o)
}

pub fn parse_objects(cell: &str, hud: bool) -> std::result::Result<Vec<GameObject>, String> {
    if cell.is_empty() {
        return Ok(Vec::new());
    }
    cell.split(';').map(|e| parse_object(e, hud)).collect()
}

fn format_obs(rgb: &[u8]) -> String {
    rgb.iter().map(u8::to_string).collect::<Vec<_>>().join(",")
}

fn parse_obs(cell: &str) -> std::result::Result<Option<Vec<u8>>, String> {
    if cell.is_empty() {
        return Ok(None);
    }
    let px: Vec<u8> = cell.split(',').map(|v| num(v, "pixel")).collect::<std::result::Result<_, _>>()?;
    if px.len() != FRAME_WIDTH * FRAME_HEIGHT * 3 {
        return Err(format!("{} pixel values, expected {}", px.len(), FRAME_WIDTH * FRAME_HEIGHT * 3));
    }
    Ok(Some(px))
}

fn png_rel(game: GameId, index: &str) -> String {
    format!("png/{game}/{index}.png")
}

fn write_png(path: &Path, rgb: Vec<u8>) -> Result<()> {
    let img = image::RgbImage::from_raw(FRAME_WIDTH as u32, FRAME_HEIGHT as u32, rgb)
        .ok_or_else(|| Error::MalformedFrame("raster size mismatch".into()))?;
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

struct Episode {
    record: EpisodeRecord,
    rows: Vec<DatasetRow>,
}

fn run_episode(config: &DatasetConfig, game: GameId, ep: usize, outdir: &Path) -> Result<Episode> {
    let cart = game.cartridge();
    let decoder = cart.decoder_spec();
    let vision = cart.vision_spec();
    let palette = Palette::console();
    let seed = config.episode_seed(game, ep);
    let kind = config.agent_for(ep);
    let mut console = Console::with_quirks(game, seed, config.quirks);
    let mut agent = Agent::new(kind, game, seed);
    let mut frame = Frame::blank();
    let mut rows = Vec::with_capacity(config.frames);
    let mut terminated = false;

    for t in 0..config.frames {
        let now = ObjectList::new(console.frame_counter(), extract_rem(console.ram(), &decoder));
        let (_, done) = console.tick(agent.act(&now))?;
        console.render_into(&mut frame);
        let rem = extract_rem(console.ram(), &decoder);
        let vis = extract_vem(&frame, &vision, &palette);
        let index = format_index(ep + 1, t + 1);
        let png = png_rel(game, &index);
        let rgb = to_rgb(&frame, &palette)?;
        let obs = config.inline_obs.then(|| rgb.clone());
        write_png(&outdir.join(&png), rgb)?;
        let (hud, ram): (Vec<_>, Vec<_>) = rem.into_iter().partition(|o| o.hud);
        rows.push(DatasetRow { index, obs, hud, ram, vis, png });
        if done {
            terminated = t + 1 < config.frames;
            break;
        }
    }
    Ok(Episode {
        record: EpisodeRecord {
            episode: ep + 1,
            agent: kind,
            seed,
            frames: rows.len(),
            terminated,
        },
        rows,
    })
}

pub fn csv_name(game: GameId) -> String {
    format!("{game}.csv")
}

pub fn write_rows(path: &Path, rows: &[DatasetRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(COLUMNS)?;
    for r in rows {
        let obs = r.obs.as_deref().map(format_obs).unwrap_or_default();
        w.write_record([
            r.index.as_str(),
            obs.as_str(),
            &format_objects(&r.hud),
            &format_objects(&r.ram),
            &format_objects(&r.vis),
            r.png.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Generate CSVs, PNGs and the manifest under `outdir`. Episodes end early
/// when the game terminates.
pub fn generate(config: &DatasetConfig, outdir: &Path) -> Result<Manifest> {
    config.validate()?;
    fs::create_dir_all(outdir)?;
    let mut games = Vec::new();
    for &game in &config.games {
        fs::create_dir_all(outdir.join("png").join(game.as_str()))?;
        let episodes: Vec<Episode> = (0..config.episodes)
            .into_par_iter()
            .map(|ep| run_episode(config, game, ep, outdir))
            .collect::<Result<_>>()?;
        let rows: Vec<DatasetRow> = episodes.iter().flat_map(|e| e.rows.iter().cloned()).collect();
        let csv = csv_name(game);
        write_rows(&outdir.join(&csv), &rows)?;
        let records: Vec<EpisodeRecord> = episodes.into_iter().map(|e| e.record).collect();
        games.push(GameManifest {
            game,
            csv,
            rows: rows.len(),
            random_episodes: records.iter().filter(|r| r.agent == AgentKind::Random).count(),
            scripted_episodes: records.iter().filter(|r| r.agent == AgentKind::Scripted).count(),
            episodes: records,
        });
    }
    let manifest = Manifest {
        config_hash: crate::report::config_hash(config),
        config: config.clone(),
        games,
    };
    crate::report::write(&outdir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

fn parse_err(index: &str, column: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        index: index.to_string(),
        column: column.to_string(),
        message: message.into(),
    }
}

/// Parse CSV text for `game`; VIS objects take their HUD flag from the game's
/// category table.
pub fn parse_reader<R: Read>(reader: R, game: GameId) -> Result<Vec<DatasetRow>> {
    let cart = game.cartridge();
    let mut r = csv::ReaderBuilder::new().flexible(true).has_headers(false).from_reader(reader);
    let mut records = r.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(parse_err("header", "index", "missing header")),
    };
    if header.iter().ne(COLUMNS) {
        return Err(parse_err("header", "index", format!("expected header {}", COLUMNS.join(","))));
    }
    let mut rows: Vec<DatasetRow> = Vec::new();
    let mut last: Option<(usize, usize)> = None;
    for rec in records {
        let rec = rec?;
        let index = rec.get(0).unwrap_or("").to_string();
        if rec.len() < COLUMNS.len() {
            return Err(parse_err(&index, COLUMNS[rec.len()], format!("row has {} of {} columns", rec.len(), COLUMNS.len())));
        }
        if rec.len() > COLUMNS.len() {
            return Err(parse_err(&index, "PNG", format!("row has {} columns, expected {}", rec.len(), COLUMNS.len())));
        }
        let Some((ep, fr)) = parse_index(&index) else {
            return Err(parse_err(&index, "index", "index must be DDDDD_DDDDD"));
        };
        if let Some((le, lf)) = last {
            let ok = (ep == le && fr > lf) || ep > le;
            if !ok {
                return Err(parse_err(&index, "index", "index out of order"));
            }
        }
        last = Some((ep, fr));
        let obs = parse_obs(&rec[1]).map_err(|m| parse_err(&index, "OBS", m))?;
        let hud = parse_objects(&rec[2], true).map_err(|m| parse_err(&index, "HUD", m))?;
        let ram = parse_objects(&rec[3], false).map_err(|m| parse_err(&index, "RAM", m))?;
        let mut vis = parse_objects(&rec[4], false).map_err(|m| parse_err(&index, "VIS", m))?;
        for o in &mut vis {
            let info = cart
                .category_info(o.category.as_str())
                .ok_or_else(|| parse_err(&index, "VIS", format!("unknown category {}", o.category)))?;
            o.hud = info.hud;
        }
        if rec[5].is_empty() {
            return Err(parse_err(&index, "PNG", "missing frame path"));
        }
        rows.push(DatasetRow {
            index,
            obs,
            hud,
            ram,
            vis,
            png: rec[5].to_string(),
        });
    }
    Ok(rows)
}

/// Parse a generated CSV; the game is taken from the file stem.
pub fn parse(path: &Path) -> Result<Vec<DatasetRow>> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    let game: GameId = stem.parse()?;
    parse_reader(fs::File::open(path)?, game)
}

pub fn read_manifest(outdir: &Path) -> Result<Manifest> {
    Ok(serde_json::from_str(&fs::read_to_string(outdir.join(MANIFEST_FILE))?)?)
}

pub fn csv_path(outdir: &Path, game: GameId) -> PathBuf {
    outdir.join(csv_name(game))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BBox;

    fn obj(cat: &str) -> GameObject {
        GameObject::new(Category::new(cat), BBox::new(3, 4, 5, 6), [1, 2, 3], false)
    }

    #[test]
    fn index_format() {
        assert_eq!(format_index(1, 1), "00001_00001");
        assert_eq!(parse_index("00012_00340"), Some((12, 340)));
        for bad in ["1_1", "00001-00001", "0000a_00001", "00001_000001"] {
            assert_eq!(parse_index(bad), None, "{bad}");
        }
    }

    #[test]
    fn object_cell_variants_round_trip() {
        let plain = obj("Ball");
        let mut oriented = obj("Ship");
        oriented.orientation = Some(3);
        let valued = obj("Score").with_value(42);
        let mut both = obj("Ship").with_value(-1);
        both.orientation = Some(0);
        let all = vec![plain, oriented, valued, both];
        let cell = format_objects(&all);
        assert_eq!(cell, "Ball,3,4,5,6,1,2,3;Ship,3,4,5,6,1,2,3,3;Score,3,4,5,6,1,2,3,,42;Ship,3,4,5,6,1,2,3,0,-1");
        assert_eq!(parse_objects(&cell, false).unwrap(), all);
        assert_eq!(parse_objects("", true).unwrap(), vec![]);
    }

    #[test]
    fn object_cell_errors() {
        for bad in ["Ball,1,2,3", "Ball,1,2,3,4,5,6,x", "Ball,1,2,0,4,5,6,7", "Ball,1,2,3,4,5,6,7,", ",1,2,3,4,5,6,7"] {
            assert!(parse_objects(bad, false).is_err(), "{bad}");
        }
    }

    #[test]
    fn agent_split_rounds_up() {
        let mut c = DatasetConfig::new(vec![GameId::Paddle], 10, 5, 0);
        assert_eq!(c.random_episodes(), 3);
        c.episodes = 3;
        assert_eq!(c.random_episodes(), 1);
        c.random_fraction = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_episodes_gives_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate(&DatasetConfig::new(vec![GameId::Paddle], 0, 10, 0), dir.path()).unwrap();
        assert_eq!(m.games[0].rows, 0);
        let text = fs::read_to_string(csv_path(dir.path(), GameId::Paddle)).unwrap();
        assert_eq!(text, "index,OBS,HUD,RAM,VIS,PNG\n");
        assert!(parse(&csv_path(dir.path(), GameId::Paddle)).unwrap().is_empty());
    }

    #[test]
    fn truncated_row_names_index() {
        let text = "index,OBS,HUD,RAM,VIS,PNG\n00001_00001,,,Ball,1,2,3,4,5,6,7\n";
        let text = text.replace("Ball,1,2,3,4,5,6,7", "\"Ball,1,2,3,4,5,6,7\"");
        match parse_reader(text.as_bytes(), GameId::Paddle) {
            Err(Error::Parse { index, column, .. }) => {
                assert_eq!(index, "00001_00001");
                assert_eq!(column, "VIS");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn out_of_order_index_rejected() {
        let text = "index,OBS,HUD,RAM,VIS,PNG\n00001_00002,,,,,a.png\n00001_00001,,,,,b.png\n";
        assert!(matches!(
            parse_reader(text.as_bytes(), GameId::Paddle),
            Err(Error::Parse { ref index, ref column, .. }) if index == "00001_00001" && column == "index"
        ));
    }
}
