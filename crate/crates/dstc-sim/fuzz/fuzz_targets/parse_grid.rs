//! The a:b:c / comma-list grid grammar must never panic and must only
//! produce finite, strictly ascending, size-capped grids.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(grid) = dstc_sim::config::parse_grid(text) {
        assert!(!grid.is_empty());
        assert!(grid.len() <= 100_000);
        assert!(grid.iter().all(|v| v.is_finite()));
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }
});
