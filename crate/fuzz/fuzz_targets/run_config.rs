#![no_main]
use lanczos_net_cli::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_json(text) {
        // The resolved document is itself accepted and resolves to itself.
        if let Ok(r) = cfg.resolved(cfg.seed) {
            let again = RunConfig::from_json(&r.to_json()).unwrap();
            assert_eq!(again, r);
        }
    }
});
