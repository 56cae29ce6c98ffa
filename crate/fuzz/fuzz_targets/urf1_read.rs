#![no_main]
//! Fuzz the URF1 tensor reader: arbitrary bytes must either parse into a
//! valid finite grid or fail cleanly, and a successful parse must survive a
//! write/read round trip unchanged.

use libfuzzer_sys::fuzz_target;

use hazesep_core::grid::RFGrid;

fuzz_target!(|data: &[u8]| {
    if let Ok(grid) = RFGrid::read_urf1(data) {
        assert!(grid.is_finite());
        assert!(grid.rows() >= 1 && grid.cols() >= 1);
        let mut bytes = Vec::new();
        grid.write_urf1(&mut bytes).unwrap();
        let back = RFGrid::read_urf1(bytes.as_slice()).unwrap();
        assert_eq!(grid, back);
    }
});
