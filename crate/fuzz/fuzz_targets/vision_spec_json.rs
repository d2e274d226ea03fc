#![no_main]

use libfuzzer_sys::fuzz_target;
use minicart_core::vem::{extract_vem, VisionSpec};
use minicart_core::{Console, GameId, Palette};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    for game in GameId::ALL {
        let cart = game.cartridge();
        if let Ok(spec) = VisionSpec::from_json(s, cart.categories()) {
            let again = VisionSpec::from_json(&spec.to_json(), cart.categories()).unwrap();
            assert_eq!(again, spec);
            let frame = Console::new(game, 0).render();
            let _ = extract_vem(&frame, &spec, &Palette::console());
        }
    }
});
