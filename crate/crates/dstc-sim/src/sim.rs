//! Monte-Carlo BER engine: bit generation, Gray mapping, ST encoding,
//! quasi-static Rayleigh fading, exact-ML sphere detection and error
//! counting with early stopping.
//!
//! Every (SNR, imbalance) grid point runs on its own random stream derived
//! from the experiment seed and the point's coordinates, so sweeps are
//! reproducible bit-for-bit regardless of how points are scheduled across
//! workers, and an imbalance sweep at 0 dB reproduces the SNR-sweep record
//! at the same coordinates exactly.
//!
//! SNR convention (receive-referenced): `snr_db = 10 log10(E_rx / sigma_n^2)`
//! where `E_rx` is the average received signal energy per receive antenna
//! per time slot. Codewords radiate unit total power per slot, channel
//! entries have unit variance, and under power imbalance the received power
//! is renormalized to 1, so `E_rx = 1` for every code and constellation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::channel::sample_cn01;
use crate::detect::{sphere_decode, DetectionProblem, DEFAULT_SEARCH_CAP};
use crate::modulation::Constellation;
use crate::stc::{encode, CodeEncoder, STCode};
use crate::{derive_seed, Error, Result};

/// One BER experiment: a code/constellation pairing plus grids, stopping
/// rules and the base seed.
#[derive(Debug, Clone)]
pub struct BerExperiment {
    pub code: STCode,
    pub constellation: Constellation,
    pub snr_grid_db: Vec<f64>,
    pub imbalance_grid_db: Vec<f64>,
    pub max_codewords: u64,
    pub min_bit_errors: u64,
    pub seed: u64,
}

impl BerExperiment {
    pub fn new(code: STCode, constellation: Constellation, seed: u64) -> Self {
        BerExperiment {
            code,
            constellation,
            snr_grid_db: Vec::new(),
            imbalance_grid_db: Vec::new(),
            max_codewords: 10_000_000,
            min_bit_errors: 400,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_bit_errors < 100 {
            return Err(Error::InvalidParameter(format!(
                "min_bit_errors must be >= 100, got {}",
                self.min_bit_errors
            )));
        }
        if self.max_codewords == 0 {
            return Err(Error::InvalidParameter("max_codewords must be >= 1".into()));
        }
        Ok(())
    }
}

/// One measured BER point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerRecord {
    pub snr_db: f64,
    pub imbalance_db: f64,
    pub bit_errors: u64,
    pub bits_simulated: u64,
    pub ber: f64,
    pub sphere_fallbacks: u64,
}

/// Imbalance-sweep output: BER at the fixed working SNR plus the SNR
/// required to reach the target BER at this imbalance ratio.
#[derive(Debug, Clone, Copy)]
pub struct ImbalanceRecord {
    pub record: BerRecord,
    pub fixed_snr_db: f64,
    pub target_ber: f64,
    pub required_snr_db: Option<f64>,
}

/// Noise variance realizing `snr_db` under the receive-referenced
/// convention: unit-power codewords and unit-variance channels give unit
/// received energy per antenna per slot, so doubling the antenna count at
/// fixed `snr_db` leaves the definition unchanged.
pub fn snr_to_noise_variance(snr_db: f64, code: &STCode, _constellation: &Constellation) -> f64 {
    let e_rx = CodeEncoder::new(*code).power_per_slot();
    e_rx * 10f64.powf(-snr_db / 10.0)
}

/// Runs one (SNR, imbalance) grid point until `min_bit_errors` or
/// `max_codewords`, whichever comes first.
pub fn run_ber_point(
    exp: &BerExperiment,
    snr_db: f64,
    imbalance_db: f64,
    rng: &mut ChaCha12Rng,
) -> Result<BerRecord> {
    exp.validate()?;
    let code = &exp.code;
    let c = &exp.constellation;
    let enc = CodeEncoder::new(*code);
    let q = code.n_symbols;
    let m_points = c.size();
    let bits_per_symbol = c.bits_per_symbol() as u64;

    let sigma2 = snr_to_noise_variance(snr_db, code, c);
    let noise_amp = (sigma2 / 2.0).sqrt();

    // Site-2 power ratio and received-power renormalization.
    let beta = 10f64.powf(-imbalance_db / 10.0);
    let [w1, w2] = enc.site_power_fractions();
    let renorm = 1.0 / (w1 + beta * w2).sqrt();
    let amp2 = beta.sqrt() * renorm;

    let rows = 2 * code.n_rx * code.n_slots;
    let mut g = vec![0.0f64; rows * 2 * q];
    let mut y = vec![0.0f64; rows];
    let mut h = DMatrix::<Complex64>::zeros(code.n_rx, code.n_tx);
    let mut tx_labels = vec![0usize; q];
    let mut symbols = vec![Complex64::new(0.0, 0.0); q];

    let mut bit_errors = 0u64;
    let mut bits = 0u64;
    let mut fallbacks = 0u64;
    let mut codewords = 0u64;

    while codewords < exp.max_codewords && bit_errors < exp.min_bit_errors {
        // Bits -> symbols. Labels are the Gray bit patterns, so drawing a
        // uniform label is the bit source.
        for (label, sym) in tx_labels.iter_mut().zip(symbols.iter_mut()) {
            *label = (rng.next_u32() as usize) & (m_points - 1);
            *sym = c.point(*label);
        }
        let x = encode(code, &symbols)?;

        // Quasi-static per-codeword channel with the site-2 block scaled.
        for i in 0..code.n_rx {
            for a in 0..code.n_tx {
                let scale = if a < code.site1_tx { renorm } else { amp2 };
                h[(i, a)] = sample_cn01(rng) * scale;
            }
        }

        // y = realvec(H X + W).
        let half = code.n_rx * code.n_slots;
        for t in 0..code.n_slots {
            for i in 0..code.n_rx {
                let mut v = Complex64::new(0.0, 0.0);
                for a in 0..code.n_tx {
                    v += h[(i, a)] * x[(a, t)];
                }
                let wr: f64 = rng.sample(rand_distr::StandardNormal);
                let wi: f64 = rng.sample(rand_distr::StandardNormal);
                y[t * code.n_rx + i] = v.re + noise_amp * wr;
                y[half + t * code.n_rx + i] = v.im + noise_amp * wi;
            }
        }

        enc.fill_effective_real_channel(&h, &mut g);
        let problem = DetectionProblem::new(&g, rows, &y, c, q)?;
        let (detected, stats) = sphere_decode(&problem, DEFAULT_SEARCH_CAP)?;
        if stats.fell_back {
            fallbacks += 1;
        }

        for (sym, &tx) in detected.iter().zip(tx_labels.iter()) {
            let rx = c.nearest_label(*sym);
            bit_errors += ((tx ^ rx) as u64).count_ones() as u64;
        }
        bits += q as u64 * bits_per_symbol;
        codewords += 1;
    }

    Ok(BerRecord {
        snr_db,
        imbalance_db,
        bit_errors,
        bits_simulated: bits,
        ber: if bits > 0 { bit_errors as f64 / bits as f64 } else { 0.0 },
        sphere_fallbacks: fallbacks,
    })
}

fn point_rng(seed: u64, snr_db: f64, imbalance_db: f64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(seed, &[snr_db.to_bits(), imbalance_db.to_bits()]))
}

/// BER versus SNR at balanced power, one record per grid point.
pub fn run_snr_sweep(exp: &BerExperiment) -> Result<Vec<BerRecord>> {
    exp.validate()?;
    if exp.snr_grid_db.is_empty() {
        return Err(Error::InvalidParameter("empty SNR grid".into()));
    }
    exp.snr_grid_db
        .par_iter()
        .map(|&snr| {
            let mut rng = point_rng(exp.seed, snr, 0.0);
            run_ber_point(exp, snr, 0.0, &mut rng)
        })
        .collect()
}

/// BER versus site power imbalance at a fixed working SNR.
///
/// When `fixed_snr_db` is `None` the working point is chosen so that the
/// balanced-power BER is about `target_ber`. Each record also reports the
/// SNR required to reach `target_ber` at that imbalance, found by bisection.
pub fn run_imbalance_sweep(
    exp: &BerExperiment,
    fixed_snr_db: Option<f64>,
    target_ber: f64,
) -> Result<Vec<ImbalanceRecord>> {
    exp.validate()?;
    if exp.imbalance_grid_db.is_empty() {
        return Err(Error::InvalidParameter("empty imbalance grid".into()));
    }
    if !(target_ber > 0.0 && target_ber < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "target BER must be in (0, 0.5), got {target_ber}"
        )));
    }
    let fixed = match fixed_snr_db {
        Some(v) => v,
        None => find_snr_for_target_ber(exp, 0.0, target_ber)?,
    };
    exp.imbalance_grid_db
        .par_iter()
        .map(|&imb| {
            let mut rng = point_rng(exp.seed, fixed, imb);
            let record = run_ber_point(exp, fixed, imb, &mut rng)?;
            let required_snr_db = find_snr_for_target_ber(exp, imb, target_ber).ok();
            Ok(ImbalanceRecord {
                record,
                fixed_snr_db: fixed,
                target_ber,
                required_snr_db,
            })
        })
        .collect()
}

/// SNR (dB) at which the BER crosses `target_ber` at the given imbalance,
/// located by coarse bracketing plus bisection to about 0.1 dB and refined
/// by log-linear interpolation of the final bracket.
pub fn find_snr_for_target_ber(
    exp: &BerExperiment,
    imbalance_db: f64,
    target_ber: f64,
) -> Result<f64> {
    let eval = |snr: f64| -> Result<f64> {
        let mut rng = point_rng(exp.seed, snr, imbalance_db);
        Ok(run_ber_point(exp, snr, imbalance_db, &mut rng)?.ber)
    };
    let mut lo = -10.0;
    let mut ber_lo = eval(lo)?;
    if ber_lo < target_ber {
        return Err(Error::InvalidParameter(format!(
            "BER {ber_lo} already below target {target_ber} at {lo} dB"
        )));
    }
    let mut hi = lo;
    let mut ber_hi = ber_lo;
    while ber_hi >= target_ber {
        hi += 4.0;
        if hi > 70.0 {
            return Err(Error::InvalidParameter(format!(
                "target BER {target_ber} not reached by 70 dB"
            )));
        }
        lo = hi - 4.0;
        ber_lo = ber_hi;
        ber_hi = eval(hi)?;
    }
    for _ in 0..5 {
        let mid = 0.5 * (lo + hi);
        let b = eval(mid)?;
        if b >= target_ber {
            lo = mid;
            ber_lo = b;
        } else {
            hi = mid;
            ber_hi = b;
        }
    }
    // Log-linear interpolation inside the final bracket.
    if ber_hi > 0.0 && ber_lo > 0.0 && ber_lo > ber_hi {
        let t = (target_ber.log10() - ber_lo.log10()) / (ber_hi.log10() - ber_lo.log10());
        Ok(lo + t.clamp(0.0, 1.0) * (hi - lo))
    } else {
        Ok(0.5 * (lo + hi))
    }
}

/// Least-squares slope of log10(BER) in decades per decade of SNR
/// (i.e. per 10 dB); the high-SNR magnitude approximates diversity order.
/// Zero-error records are skipped.
pub fn fit_ber_slope(records: &[BerRecord]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.ber > 0.0)
        .map(|r| (r.snr_db / 10.0, r.ber.log10()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

/// Closed-form bit error rate of Gray-mapped QPSK over a flat Rayleigh
/// channel with L-branch maximum-ratio combining, at per-bit per-branch
/// SNR `gamma_b`. L = 1 is the plain SISO curve.
pub fn rayleigh_qpsk_mrc_ber(gamma_b: f64, l: u32) -> f64 {
    let mu = (gamma_b / (1.0 + gamma_b)).sqrt();
    let p = 0.5 * (1.0 - mu);
    match l {
        1 => p,
        2 => p * p * (1.0 + 2.0 * (1.0 - p)),
        _ => {
            // General form: p^L sum_{k=0}^{L-1} C(L-1+k, k) (1-p)^k.
            let q = 1.0 - p;
            let mut sum = 0.0;
            let mut binom = 1.0f64;
            for k in 0..l {
                if k > 0 {
                    binom *= (l - 1 + k) as f64 / k as f64;
                }
                sum += binom * q.powi(k as i32);
            }
            p.powi(l as i32) * sum
        }
    }
}
