#![no_main]
use lanczos_net::io::{parse_checkpoint, write_checkpoint};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_checkpoint(text) {
        let back = parse_checkpoint(&write_checkpoint(&m)).unwrap();
        assert_eq!(back.config, m.config);
        assert_eq!(back.named_params(), m.named_params());
    }
});
