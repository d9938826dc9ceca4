#![no_main]
use lanczos_net::io::{parse_graph_set, write_graph_set};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(set) = parse_graph_set(text) {
        assert_eq!(parse_graph_set(&write_graph_set(&set)).unwrap(), set);
    }
});
