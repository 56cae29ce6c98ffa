#![no_main]
//! Fuzz the .hsnet checkpoint loader: framing, JSON header, architecture /
//! parameter-count consistency, and value validation must never panic.

use libfuzzer_sys::fuzz_target;

use hazesep_core::grid::RFGrid;
use hazesep_core::score::load_checkpoint_bytes;

fuzz_target!(|data: &[u8]| {
    if let Ok(checkpoint) = load_checkpoint_bytes(data) {
        // A loaded model must evaluate on its declared patch shape.
        let rows = checkpoint.header.patch_rows.min(16);
        let cols = checkpoint.header.patch_cols.min(16);
        if (rows, cols) == (checkpoint.header.patch_rows, checkpoint.header.patch_cols) {
            let x = RFGrid::zeros(rows, cols).unwrap();
            let _ = checkpoint.model.evaluate(&x, 0.5);
        }
    }
});
