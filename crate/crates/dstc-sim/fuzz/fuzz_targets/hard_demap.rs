//! The hard demapper must accept any float input (including NaN/inf)
//! without panicking and stay consistent with the bit mapping.

#![no_main]

use libfuzzer_sys::fuzz_target;
use num_complex::Complex64;

use dstc_sim::detect::hard_demap;
use dstc_sim::modulation::{Constellation, ModulationName};

fuzz_target!(|data: &[u8]| {
    let mut symbols = Vec::new();
    for chunk in data.chunks_exact(16) {
        let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
        symbols.push(Complex64::new(re, im));
    }
    for m in [ModulationName::Qpsk, ModulationName::Qam16] {
        let c = Constellation::new(m);
        let bits = hard_demap(&symbols, &c);
        assert_eq!(bits.len(), symbols.len() * c.bits_per_symbol());
        assert!(bits.iter().all(|&b| b <= 1));
        // Exact constellation points must round-trip to themselves.
        let exact: Vec<Complex64> = (0..c.size()).map(|l| c.point(l)).collect();
        let round = hard_demap(&exact, &c);
        let remapped = c.map_bits(&round).unwrap();
        assert_eq!(remapped, exact);
    }
});
