//! Differential fuzzing of the two ML detectors: on any fuzzer-chosen code,
//! constellation, channel seed and noise level, the sphere decoder must be
//! decision-identical to exhaustive enumeration.

#![no_main]

use arbitrary::Arbitrary;
use libfuzzer_sys::fuzz_target;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use dstc_sim::detect::{ml_exhaustive, sphere_decode, DetectionProblem, DEFAULT_SEARCH_CAP};
use dstc_sim::modulation::{Constellation, ModulationName};
use dstc_sim::stc::{effective_real_channel, encode, realvec, CodeName, STCode};

#[derive(Arbitrary, Debug)]
struct Input {
    code: u8,
    use_qam: bool,
    zero_site2: bool,
    noise_sel: u8,
    seed: u64,
}

fuzz_target!(|input: Input| {
    let name = CodeName::all()[input.code as usize % 10];
    let code = STCode::new(name);
    let m = if input.use_qam && code.n_symbols <= 4 {
        ModulationName::Qam16
    } else {
        ModulationName::Qpsk
    };
    let constellation = Constellation::new(m);
    let mut rng = ChaCha12Rng::seed_from_u64(input.seed);

    let mut h = dstc_sim::channel::sample_iid_rayleigh(code.n_rx, code.n_tx, &mut rng);
    if input.zero_site2 {
        // Rank-deficient case: a dark second site must route through the
        // exhaustive fallback and still agree.
        for i in 0..code.n_rx {
            for j in code.site1_tx..code.n_tx {
                h[(i, j)] = num_complex::Complex64::new(0.0, 0.0);
            }
        }
    }
    let g = effective_real_channel(&code, &h).unwrap();
    let s: Vec<num_complex::Complex64> = (0..code.n_symbols)
        .map(|_| constellation.point(rng.random_range(0..constellation.size())))
        .collect();
    let x = encode(&code, &s).unwrap();
    let mut y = realvec(&(&h * &x));
    let sigma2: f64 = [0.0, 0.01, 0.1, 1.0][input.noise_sel as usize % 4];
    if sigma2 > 0.0 {
        let amp = (sigma2 / 2.0).sqrt();
        for v in y.iter_mut() {
            let w: f64 = rng.sample(rand_distr::StandardNormal);
            *v += amp * w;
        }
    }

    let p = DetectionProblem::new(g.as_slice(), g.nrows(), &y, &constellation, code.n_symbols)
        .unwrap();
    let ex = ml_exhaustive(&p, DEFAULT_SEARCH_CAP).unwrap();
    let (sp, _) = sphere_decode(&p, DEFAULT_SEARCH_CAP).unwrap();
    let el: Vec<usize> = ex.iter().map(|&v| constellation.nearest_label(v)).collect();
    let sl: Vec<usize> = sp.iter().map(|&v| constellation.nearest_label(v)).collect();
    assert_eq!(el, sl, "{name:?}/{m:?} decision mismatch");
});
