//! The config parser must never panic on arbitrary text, and accepted
//! configs must satisfy their invariants.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = dstc_sim::config::parse_config(text, &[]) {
        assert!(cfg.snr_grid_db.windows(2).all(|w| w[0] < w[1]));
        assert!(cfg.imbalance_grid_db.windows(2).all(|w| w[0] < w[1]));
        assert!(cfg.positions_km.iter().all(|p| p.is_finite()));
        assert!(cfg.n_realizations >= 1);
    }
    // Flag overrides are appended after file entries; the merge path must
    // be equally robust.
    let overrides = [("seed".to_string(), "1".to_string())];
    let _ = dstc_sim::config::parse_config(text, &overrides);
});
