#![no_main]

use libfuzzer_sys::fuzz_target;
use minicart_core::rem::{extract_rem, DecoderSpec};
use minicart_core::{GameId, RamState};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    for game in GameId::ALL {
        let cart = game.cartridge();
        let map = cart.ram_map();
        if let Ok(spec) = DecoderSpec::from_json(s, cart.categories(), &map) {
            let again = DecoderSpec::from_json(&spec.to_json(), cart.categories(), &map).unwrap();
            assert_eq!(again, spec);
            // Accepted specs decode any RAM without panicking.
            let ram = RamState::from_bytes(&[0xA5; 128]).unwrap();
            let _ = extract_rem(&ram, &spec);
        }
    }
});
