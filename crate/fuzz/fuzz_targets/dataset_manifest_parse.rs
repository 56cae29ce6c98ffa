#![no_main]
//! Fuzz the dataset manifest parser.

use libfuzzer_sys::fuzz_target;

use hazesep_core::phantom::parse_dataset_manifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_dataset_manifest(text);
    }
});
