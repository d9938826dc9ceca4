#![no_main]
use lanczos_net::io::{parse_graph, write_graph};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = parse_graph(text) {
        // Accepted graphs survive a write-then-parse round trip.
        assert_eq!(parse_graph(&write_graph(&g)).unwrap(), g);
    }
});
