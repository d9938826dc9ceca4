#![no_main]
use lanczos_net::io::{parse_matrix_csv, write_matrix_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_matrix_csv(text) {
        assert_eq!(parse_matrix_csv(&write_matrix_csv(&m)).unwrap(), m);
    }
});
