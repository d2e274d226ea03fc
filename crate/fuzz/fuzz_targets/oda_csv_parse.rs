#![no_main]

use libfuzzer_sys::fuzz_target;
use minicart_core::oda::{parse_reader, write_rows};
use minicart_core::GameId;

// First byte picks the game; the rest is CSV text.
fuzz_target!(|data: &[u8]| {
    let Some((&g, text)) = data.split_first() else { return };
    let game = GameId::ALL[usize::from(g) % 3];
    if let Ok(rows) = parse_reader(text, game) {
        let dir = std::env::temp_dir().join(format!("minicart-fuzz-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("{game}.csv"));
        write_rows(&path, &rows).unwrap();
        let again = parse_reader(std::fs::File::open(&path).unwrap(), game).unwrap();
        assert_eq!(again, rows);
    }
});
