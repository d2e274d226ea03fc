#![no_main]

use libfuzzer_sys::fuzz_target;
use minicart_core::inspector::{Command, Reply, Session, SessionConfig};
use minicart_core::GameId;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let mut session = Session::new(SessionConfig::new(GameId::Invaders, 1));
        let reply = session.handle_text(s);
        if let Err(e) = Command::parse(s) {
            assert!(matches!(reply, Reply::Error(ref m) if m.field == e.field));
        }
        // The session stays usable after any input.
        assert!(matches!(session.handle_text(r#"{"type":"reset"}"#), Reply::State(_)));
    }
});
