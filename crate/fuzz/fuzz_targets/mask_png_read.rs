#![no_main]
//! Fuzz the ROI mask PNG reader: dimension caps, color-type handling, and
//! the nonzero-pixel rule must hold for arbitrary input bytes.

use libfuzzer_sys::fuzz_target;

use hazesep_core::roi::RoiMask;

fuzz_target!(|data: &[u8]| {
    if let Ok(mask) = RoiMask::read_png_bytes(data) {
        assert!(mask.rows() >= 1 && mask.cols() >= 1);
        let _ = mask.count();
    }
});
