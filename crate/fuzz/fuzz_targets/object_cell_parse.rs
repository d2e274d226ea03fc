#![no_main]

use libfuzzer_sys::fuzz_target;
use minicart_core::oda::{format_objects, parse_objects};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(objects) = parse_objects(s, false) {
            let text = format_objects(&objects);
            assert_eq!(parse_objects(&text, false).unwrap(), objects);
        }
    }
});
