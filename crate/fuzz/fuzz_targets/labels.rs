#![no_main]
use lanczos_net::io::{parse_labels, write_labels};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(l) = parse_labels(text) {
        assert_eq!(parse_labels(&write_labels(&l)).unwrap(), l);
    }
});
