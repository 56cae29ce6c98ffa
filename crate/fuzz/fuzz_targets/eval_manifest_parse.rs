#![no_main]
//! Fuzz the evaluation pairs manifest parser.

use libfuzzer_sys::fuzz_target;

use hazesep_core::config::parse_eval_manifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_eval_manifest(text);
    }
});
