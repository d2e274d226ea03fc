use minicart_core::agents::AgentKind;
use minicart_core::evalkit::{run_comparison, ComparisonConfig};
use minicart_core::{GameId, QuirkSet};

fn run(game: GameId, seed: u64, quirks: QuirkSet) -> minicart_core::evalkit::ComparisonReport {
    run_comparison(&ComparisonConfig::new(game, AgentKind::Random, 400, seed, quirks)).unwrap()
}

#[test]
fn quirks_lower_f1_and_are_all_attributed() {
    for game in GameId::ALL {
        let clean = run(game, 7, QuirkSet::NONE);
        assert_eq!(clean.metrics.macro_f1, 1.0, "{game}");
        assert!(clean.mismatches.is_empty());

        let quirked = run(game, 7, QuirkSet::ALL);
        assert!(quirked.metrics.macro_f1 < 1.0, "{game}");
        assert_eq!(quirked.unattributed, 0, "{game}");
        assert!(!quirked.attributed.is_empty());
    }
}

#[test]
fn single_quirk_attributes_only_itself() {
    let only_blink = QuirkSet { blink: true, ..QuirkSet::NONE };
    for game in GameId::ALL {
        let r = run(game, 3, only_blink);
        assert_eq!(r.unattributed, 0, "{game}");
        for kind in r.attributed.keys() {
            assert!(only_blink.enabled(*kind), "{game}: {kind:?}");
        }
    }
}

#[test]
fn reports_are_deterministic() {
    let a = serde_json::to_string(&run(GameId::Invaders, 11, QuirkSet::ALL)).unwrap();
    let b = serde_json::to_string(&run(GameId::Invaders, 11, QuirkSet::ALL)).unwrap();
    assert_eq!(a, b);
}
