//! Monte-Carlo ergodic capacity estimators for the three broadcast
//! scenarios, and the receiver-position coverage sweep.
//!
//! All estimators average an instantaneous capacity expression over i.i.d.
//! Rayleigh channel realizations:
//!
//! * SFN (two transmitters, one antenna each, one receive antenna):
//!   `log2(1 + (rho/2) (l1 |H1|^2 + l2 |H2|^2))`
//! * single-cell MIMO: `log2 det(I + (rho/NT) H H^H)`
//! * distributed MIMO (NT antennas per site):
//!   `log2 det(I + (rho/(2 NT)) [sqrt(l1) H1  sqrt(l2) H2] [.]^H)`
//!
//! where `rho = P/(N sigma_n^2)` is the reference SNR and the `l` factors
//! are pathloss power scales. Entries are i.i.d. across subcarriers, so the
//! per-subcarrier average is absorbed into the realization count and flat
//! matrices are sampled directly.
//!
//! The per-channel `*_for_channel` functions expose the deterministic
//! integrand; quadrature versions of the SFN capacity back the noise-floor
//! calibration without Monte-Carlo noise.

use nalgebra::DMatrix;
use num_complex::Complex64;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::channel::{pathloss, sample_cn01, sample_iid_rayleigh, NoiseSpec, ScenarioGeometry};
use crate::{derive_seed, Error, Result};

/// Broadcast deployment under study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Sfn,
    MimoSingleCell,
    MimoDistributed,
}

impl Scenario {
    pub fn all() -> [Scenario; 3] {
        [Scenario::Sfn, Scenario::MimoSingleCell, Scenario::MimoDistributed]
    }

    pub fn token(self) -> &'static str {
        match self {
            Scenario::Sfn => "sfn",
            Scenario::MimoSingleCell => "mimo-single-cell",
            Scenario::MimoDistributed => "mimo-distributed",
        }
    }

    pub fn parse_token(s: &str) -> Result<Self> {
        Scenario::all()
            .into_iter()
            .find(|sc| sc.token() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown scenario `{s}` (valid: sfn, mimo-single-cell, mimo-distributed)"
                ))
            })
    }
}

/// Monte-Carlo settings shared by the capacity estimators.
#[derive(Debug, Clone)]
pub struct CapacityConfig {
    pub n_realizations: usize,
    /// Subcarriers sampled per realization; statistically equivalent to
    /// scaling `n_realizations`, kept as a separate knob.
    pub n_subcarriers: usize,
    /// Per-site transmit power shares; must sum to 1.
    pub power_split: [f64; 2],
}

impl Default for CapacityConfig {
    fn default() -> Self {
        CapacityConfig {
            n_realizations: 20_000,
            n_subcarriers: 1,
            power_split: [0.5, 0.5],
        }
    }
}

impl CapacityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_realizations < 1 || self.n_subcarriers < 1 {
            return Err(Error::InvalidParameter(
                "realization and subcarrier counts must be >= 1".into(),
            ));
        }
        let [w1, w2] = self.power_split;
        if w1 < 0.0 || w2 < 0.0 || (w1 + w2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "power split [{w1}, {w2}] must be nonnegative and sum to 1"
            )));
        }
        Ok(())
    }

    fn total_samples(&self) -> usize {
        self.n_realizations * self.n_subcarriers
    }
}

/// Sample mean and standard error of a Monte-Carlo capacity estimate.
#[derive(Debug, Clone, Copy)]
pub struct CapacityEstimate {
    pub mean: f64,
    pub std_err: f64,
}

/// One measured point of a coverage sweep.
#[derive(Debug, Clone)]
pub struct CapacityRecord {
    pub rx_position_km: f64,
    pub scenario: Scenario,
    pub capacity_bps_hz: f64,
    pub std_err: f64,
}

fn estimate<F: FnMut(&mut ChaCha12Rng) -> f64>(
    n: usize,
    rng: &mut ChaCha12Rng,
    mut f: F,
) -> CapacityEstimate {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let v = f(rng);
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    CapacityEstimate {
        mean,
        std_err: (var / n as f64).sqrt(),
    }
}

/// Instantaneous SFN capacity for explicit channel draws.
pub fn sfn_capacity_for_channel(
    h1: Complex64,
    h2: Complex64,
    lambda1: f64,
    lambda2: f64,
    rho: f64,
) -> f64 {
    (1.0 + 0.5 * rho * (lambda1 * h1.norm_sqr() + lambda2 * h2.norm_sqr())).log2()
}

/// Ergodic SFN capacity (two coherently combined transmitters at P/2 each).
pub fn capacity_sfn(
    lambda1: f64,
    lambda2: f64,
    rho: f64,
    cfg: &CapacityConfig,
    rng: &mut ChaCha12Rng,
) -> CapacityEstimate {
    estimate(cfg.total_samples(), rng, |r| {
        sfn_capacity_for_channel(sample_cn01(r), sample_cn01(r), lambda1, lambda2, rho)
    })
}

/// `log2 det(I + c H H^H)` through the Cholesky factorization of the
/// Hermitian positive-definite Gram matrix.
pub fn log2_det_i_plus_scaled_gram(h: &DMatrix<Complex64>, c: f64) -> f64 {
    let n_r = h.nrows();
    let mut a = h * h.adjoint() * Complex64::new(c, 0.0);
    for i in 0..n_r {
        a[(i, i)] += Complex64::new(1.0, 0.0);
    }
    let chol = a.cholesky().expect("I + c H H^H is positive definite");
    let l = chol.l();
    (0..n_r).map(|i| l[(i, i)].re.log2()).sum::<f64>() * 2.0
}

/// Instantaneous single-cell MIMO capacity for an explicit channel.
pub fn mimo_capacity_for_channel(h: &DMatrix<Complex64>, rho: f64) -> f64 {
    log2_det_i_plus_scaled_gram(h, rho / h.ncols() as f64)
}

/// Ergodic capacity of the single-cell `n_t x n_r` MIMO channel.
pub fn capacity_mimo(
    n_t: usize,
    n_r: usize,
    rho: f64,
    cfg: &CapacityConfig,
    rng: &mut ChaCha12Rng,
) -> CapacityEstimate {
    estimate(cfg.total_samples(), rng, |r| {
        let h = sample_iid_rayleigh(n_r, n_t, r);
        mimo_capacity_for_channel(&h, rho)
    })
}

/// Instantaneous distributed MIMO capacity for explicit per-site channels.
pub fn distributed_capacity_for_channel(
    h1: &DMatrix<Complex64>,
    h2: &DMatrix<Complex64>,
    lambda1: f64,
    lambda2: f64,
    rho: f64,
) -> f64 {
    let n_t = h1.ncols();
    let n_r = h1.nrows();
    let mut g = DMatrix::<Complex64>::zeros(n_r, 2 * n_t);
    let (a1, a2) = (lambda1.sqrt(), lambda2.sqrt());
    for i in 0..n_r {
        for j in 0..n_t {
            g[(i, j)] = h1[(i, j)] * a1;
            g[(i, j + n_t)] = h2[(i, j)] * a2;
        }
    }
    log2_det_i_plus_scaled_gram(&g, rho / (2.0 * n_t as f64))
}

/// Ergodic capacity of the distributed MIMO channel: two sites of
/// `n_t_per_site` antennas at P/2 each.
pub fn capacity_distributed(
    n_t_per_site: usize,
    n_r: usize,
    lambda1: f64,
    lambda2: f64,
    rho: f64,
    cfg: &CapacityConfig,
    rng: &mut ChaCha12Rng,
) -> CapacityEstimate {
    estimate(cfg.total_samples(), rng, |r| {
        let h1 = sample_iid_rayleigh(n_r, n_t_per_site, r);
        let h2 = sample_iid_rayleigh(n_r, n_t_per_site, r);
        distributed_capacity_for_channel(&h1, &h2, lambda1, lambda2, rho)
    })
}

/// Reference SNR `rho = P / (N sigma_n^2)` for a geometry and noise floor.
pub fn reference_snr(geometry: &ScenarioGeometry, noise: &NoiseSpec, cfg: &CapacityConfig) -> f64 {
    geometry.total_power_w / (cfg.n_subcarriers as f64 * noise.variance())
}

/// Sweeps receiver positions and estimates the scenario capacity at each.
///
/// Power accounting follows the comparison setup: SFN and distributed MIMO
/// split P across the two sites by `cfg.power_split`, single-cell MIMO
/// radiates the full P from site 1. Positions run in parallel on
/// independent derived streams and are reported in input order.
pub fn coverage_sweep(
    geometry: &ScenarioGeometry,
    scenario: Scenario,
    noise: &NoiseSpec,
    cfg: &CapacityConfig,
    positions: &[f64],
    seed: u64,
) -> Result<Vec<CapacityRecord>> {
    geometry.validate()?;
    cfg.validate()?;
    let rho = reference_snr(geometry, noise, cfg);
    let [w1, w2] = cfg.power_split;
    let records: Vec<CapacityRecord> = positions
        .par_iter()
        .map(|&pos| {
            let g = geometry.at_position(pos);
            let l1 = pathloss(&g, 0);
            let l2 = pathloss(&g, 1);
            let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(
                seed,
                &[scenario as u64, pos.to_bits()],
            ));
            let est = match scenario {
                // Eq. 7 carries rho/2; fold a non-default split into the
                // lambdas so w = 1/2 is neutral.
                Scenario::Sfn => {
                    capacity_sfn(2.0 * w1 * l1, 2.0 * w2 * l2, rho, cfg, &mut rng)
                }
                Scenario::MimoSingleCell => capacity_mimo(2, 2, rho * l1, cfg, &mut rng),
                Scenario::MimoDistributed => capacity_distributed(
                    2,
                    2,
                    2.0 * w1 * l1,
                    2.0 * w2 * l2,
                    rho,
                    cfg,
                    &mut rng,
                ),
            };
            CapacityRecord {
                rx_position_km: pos,
                scenario,
                capacity_bps_hz: est.mean,
                std_err: est.std_err,
            }
        })
        .collect();
    Ok(records)
}

// ---------------------------------------------------------------------------
// Quadrature path (deterministic): E[log2(1 + a1 X + a2 Y)], X,Y ~ Exp(1).
// Used for noise-floor calibration and as a cross-check of the estimators.
// ---------------------------------------------------------------------------

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
                + rec(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// `E[log2(1 + a X)]` for X ~ Erlang(k, 1), k in {1, 2}, by quadrature.
pub fn expected_log2_1p_scaled_erlang(a: f64, k: u32) -> f64 {
    assert!(k == 1 || k == 2);
    if a == 0.0 {
        return 0.0;
    }
    // t = u/(1-u) maps (0,1) onto (0,inf).
    let f = move |u: f64| -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        let t = u / (1.0 - u);
        let jac = 1.0 / ((1.0 - u) * (1.0 - u));
        let density = if k == 1 { (-t).exp() } else { t * (-t).exp() };
        if density == 0.0 {
            return 0.0;
        }
        density * (1.0 + a * t).log2() * jac
    };
    adaptive_simpson(&f, 0.0, 1.0, 1e-12)
}

/// Deterministic SFN ergodic capacity
/// `E[log2(1 + (rho/2)(l1 X + l2 Y))]`, X, Y ~ Exp(1) independent.
pub fn sfn_capacity_quadrature(lambda1: f64, lambda2: f64, rho: f64) -> f64 {
    let a1 = 0.5 * rho * lambda1;
    let a2 = 0.5 * rho * lambda2;
    let (hi, lo) = if a1 >= a2 { (a1, a2) } else { (a2, a1) };
    if hi == 0.0 {
        return 0.0;
    }
    if lo == 0.0 {
        return expected_log2_1p_scaled_erlang(hi, 1);
    }
    if ((hi - lo) / hi).abs() < 1e-9 {
        return expected_log2_1p_scaled_erlang(hi, 2);
    }
    // Hypoexponential density of Z = a1 X + a2 Y:
    // f(z) = (exp(-z/hi) - exp(-z/lo)) / (hi - lo).
    let f = move |u: f64| -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        let z = hi * u / (1.0 - u);
        let jac = hi / ((1.0 - u) * (1.0 - u));
        let density = ((-z / hi).exp() - (-z / lo).exp()) / (hi - lo);
        if density == 0.0 {
            return 0.0;
        }
        density * (1.0 + z).log2() * jac
    };
    adaptive_simpson(&f, 0.0, 1.0, 1e-12)
}

/// Reference SNR at which the SFN capacity at the coverage minimum (the
/// midpoint between the sites) equals `target_bits`, found by bisection on
/// the quadrature capacity.
pub fn calibrate_rho_for_sfn_min(geometry: &ScenarioGeometry, target_bits: f64) -> Result<f64> {
    geometry.validate()?;
    if !(target_bits > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target capacity must be > 0, got {target_bits}"
        )));
    }
    let mid = 0.5 * (geometry.site_positions_km[0] + geometry.site_positions_km[1]);
    let g = geometry.at_position(mid);
    let l = pathloss(&g, 0);
    let cap = |rho: f64| sfn_capacity_quadrature(l, l, rho);
    let (mut lo, mut hi) = (1e-12, 1e18);
    if cap(hi) < target_bits {
        return Err(Error::InvalidParameter(format!(
            "target {target_bits} bits/s/Hz unreachable"
        )));
    }
    for _ in 0..200 {
        let mid_rho = (lo * hi).sqrt();
        if cap(mid_rho) < target_bits {
            lo = mid_rho;
        } else {
            hi = mid_rho;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Noise floor realizing [`calibrate_rho_for_sfn_min`] for the geometry.
pub fn calibrate_noise_for_sfn_min(
    geometry: &ScenarioGeometry,
    cfg: &CapacityConfig,
    target_bits: f64,
) -> Result<NoiseSpec> {
    let rho = calibrate_rho_for_sfn_min(geometry, target_bits)?;
    NoiseSpec::new(geometry.total_power_w / (cfg.n_subcarriers as f64 * rho))
}
