#![no_main]
use lanczos_net::io::{parse_decomposition, write_decomposition};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(d) = parse_decomposition(text) {
        assert_eq!(parse_decomposition(&write_decomposition(&d)).unwrap(), d);
    }
});
