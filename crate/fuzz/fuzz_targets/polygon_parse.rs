#![no_main]
//! Fuzz the polygon JSON parser and the rasterizer behind it.

use libfuzzer_sys::fuzz_target;

use hazesep_core::roi::{parse_polygon_json, rasterize_polygon};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(keys) = parse_polygon_json(text) {
            for key in keys.iter().take(4) {
                let _ = rasterize_polygon(&key.vertices, 32, 32);
            }
        }
    }
});
