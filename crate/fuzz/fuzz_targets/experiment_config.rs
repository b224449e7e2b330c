#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = saer::harness::parse_config(text) {
        let json = serde_json::to_string(&cfg).unwrap();
        let again = saer::harness::parse_config(&json).unwrap();
        assert_eq!(
            (again.kind, again.c, again.d, again.trials),
            (cfg.kind, cfg.c, cfg.d, cfg.trials)
        );
    }
});
