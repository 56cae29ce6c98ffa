#![no_main]
//! Fuzz the JSON run-config parser: unknown keys, bad values, and arbitrary
//! JSON must be rejected without panicking; accepted configs must validate.

use libfuzzer_sys::fuzz_target;

use hazesep_core::config::parse_config;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = parse_config(text) {
            // parse_config validates; these must not fail afterwards.
            config.schedule().unwrap();
            config.compand_params().unwrap();
            config.patch_layout().unwrap();
        }
    }
});
