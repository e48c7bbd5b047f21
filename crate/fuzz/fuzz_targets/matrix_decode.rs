#![no_main]

use kflow_core::calabi_functional::{decode_matrix, encode_matrix};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = decode_matrix(data) {
        // The format has no slack, so a successful decode is canonical.
        assert_eq!(encode_matrix(&m), data);
    }
});
