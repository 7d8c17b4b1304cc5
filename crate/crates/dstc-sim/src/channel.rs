//! Random MIMO channel generation, pathloss and the two-site distributed
//! geometry.
//!
//! Channels live in two domains: an L-tap impulse response
//! ([`ChannelTaps`], one complex gain matrix per tap) and the per-subcarrier
//! frequency response ([`FreqResponse`]) obtained by evaluating the DFT of
//! the tap sequence at every subcarrier. Fading is i.i.d. Rayleigh: every
//! tap / subcarrier entry is a circularly-symmetric complex Gaussian drawn
//! from an explicit random stream, so all operations here are pure and safe
//! to run from any number of independently seeded workers.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Time-domain L-tap MIMO channel: `taps[l]` is the `n_rx x n_tx` gain
/// matrix arriving `delays[l]` samples late.
#[derive(Debug, Clone)]
pub struct ChannelTaps {
    taps: Vec<DMatrix<Complex64>>,
    delays: Vec<usize>,
}

impl ChannelTaps {
    /// Builds a tap set; delays must be strictly increasing and every tap
    /// matrix must have identical dimensions.
    pub fn new(taps: Vec<DMatrix<Complex64>>, delays: Vec<usize>) -> Result<Self> {
        if taps.is_empty() || taps.len() != delays.len() {
            return Err(Error::Dimension(format!(
                "{} tap matrices for {} delays",
                taps.len(),
                delays.len()
            )));
        }
        let (n_rx, n_tx) = (taps[0].nrows(), taps[0].ncols());
        for t in &taps {
            if t.nrows() != n_rx || t.ncols() != n_tx {
                return Err(Error::Dimension(format!(
                    "tap dimension {}x{} differs from {}x{}",
                    t.nrows(),
                    t.ncols(),
                    n_rx,
                    n_tx
                )));
            }
        }
        if !delays.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Dimension("tap delays must be strictly increasing".into()));
        }
        Ok(ChannelTaps { taps, delays })
    }

    /// Single tap at delay zero (flat channel).
    pub fn flat(matrix: DMatrix<Complex64>) -> Self {
        ChannelTaps {
            taps: vec![matrix],
            delays: vec![0],
        }
    }

    pub fn taps(&self) -> &[DMatrix<Complex64>] {
        &self.taps
    }

    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    pub fn n_rx(&self) -> usize {
        self.taps[0].nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.taps[0].ncols()
    }

    pub fn max_delay(&self) -> usize {
        *self.delays.last().unwrap()
    }
}

/// Per-subcarrier frequency response of a MIMO-OFDM channel.
#[derive(Debug, Clone)]
pub struct FreqResponse {
    per_subcarrier: Vec<DMatrix<Complex64>>,
}

impl FreqResponse {
    pub fn n_subcarriers(&self) -> usize {
        self.per_subcarrier.len()
    }

    pub fn subcarrier(&self, k: usize) -> &DMatrix<Complex64> {
        &self.per_subcarrier[k]
    }

    pub fn per_subcarrier(&self) -> &[DMatrix<Complex64>] {
        &self.per_subcarrier
    }
}

/// Two-site broadcast geometry on a line, with power-law pathloss.
///
/// Distances are in km with a 1 km pathloss reference, so a receiver 1 km
/// from a site sees power scale 1. Distances below `min_distance_km` are
/// clamped to keep the d^(-m) law finite near a transmitter.
#[derive(Debug, Clone)]
pub struct ScenarioGeometry {
    pub site_positions_km: [f64; 2],
    pub rx_position_km: f64,
    pub pathloss_exponent: f64,
    pub total_power_w: f64,
    pub min_distance_km: f64,
}

impl ScenarioGeometry {
    /// Two sites at 0 and `separation_km`, receiver initially at 0.
    pub fn two_site(
        separation_km: f64,
        pathloss_exponent: f64,
        total_power_w: f64,
        min_distance_km: f64,
    ) -> Result<Self> {
        let g = ScenarioGeometry {
            site_positions_km: [0.0, separation_km],
            rx_position_km: 0.0,
            pathloss_exponent,
            total_power_w,
            min_distance_km,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pathloss_exponent > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "pathloss exponent must be > 0, got {}",
                self.pathloss_exponent
            )));
        }
        if !(self.total_power_w > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "total power must be > 0, got {}",
                self.total_power_w
            )));
        }
        if !(self.min_distance_km > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "min distance must be > 0, got {}",
                self.min_distance_km
            )));
        }
        Ok(())
    }

    pub fn at_position(&self, rx_position_km: f64) -> Self {
        let mut g = self.clone();
        g.rx_position_km = rx_position_km;
        g
    }

    pub fn separation_km(&self) -> f64 {
        (self.site_positions_km[1] - self.site_positions_km[0]).abs()
    }
}

/// Noise power per complex receive sample.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    variance: f64,
}

impl NoiseSpec {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be positive and finite, got {variance}"
            )));
        }
        Ok(NoiseSpec { variance })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// One CN(0,1) draw: real and imaginary parts each N(0, 1/2).
#[inline]
pub fn sample_cn01<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Draws an `n_rx x n_tx` matrix of i.i.d. CN(0,1) entries.
pub fn sample_iid_rayleigh<R: Rng + ?Sized>(n_rx: usize, n_tx: usize, rng: &mut R) -> DMatrix<Complex64> {
    DMatrix::from_fn(n_rx, n_tx, |_, _| sample_cn01(rng))
}

/// Evaluates the tap-domain channel on every subcarrier of an `n_fft`-point
/// OFDM system: `H[k] = sum_l taps[l] * exp(-i 2 pi k delay_l / n_fft)`.
pub fn taps_to_freq_response(taps: &ChannelTaps, n_fft: usize) -> Result<FreqResponse> {
    if taps.max_delay() >= n_fft {
        return Err(Error::Dimension(format!(
            "tap delay {} >= FFT size {}",
            taps.max_delay(),
            n_fft
        )));
    }
    let (n_rx, n_tx) = (taps.n_rx(), taps.n_tx());
    let mut per_subcarrier = Vec::with_capacity(n_fft);
    for k in 0..n_fft {
        let mut h = DMatrix::<Complex64>::zeros(n_rx, n_tx);
        for (tap, &delay) in taps.taps().iter().zip(taps.delays()) {
            let phase = -2.0 * std::f64::consts::PI * (k as f64) * (delay as f64) / (n_fft as f64);
            let twiddle = Complex64::from_polar(1.0, phase);
            h += tap * twiddle;
        }
        per_subcarrier.push(h);
    }
    Ok(FreqResponse { per_subcarrier })
}

/// Power scale of the link from `site_index` to the receiver:
/// `lambda = max(d, min_distance)^(-m)`.
pub fn pathloss(geometry: &ScenarioGeometry, site_index: usize) -> f64 {
    let d = (geometry.rx_position_km - geometry.site_positions_km[site_index]).abs();
    d.max(geometry.min_distance_km)
        .powf(-geometry.pathloss_exponent)
}

/// Concatenates two per-site channels into the equivalent distributed MIMO
/// channel `[H1  sqrt(beta) H2]`, shifting every tap of the second site by
/// `extra_delay` samples and scaling its amplitude by `sqrt(beta)`.
pub fn build_distributed_channel(
    ch1: &ChannelTaps,
    ch2: &ChannelTaps,
    beta: f64,
    extra_delay: usize,
) -> Result<ChannelTaps> {
    if ch1.n_rx() != ch2.n_rx() {
        return Err(Error::Dimension(format!(
            "receive antenna mismatch: {} vs {}",
            ch1.n_rx(),
            ch2.n_rx()
        )));
    }
    if !(beta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "power ratio beta must be >= 0, got {beta}"
        )));
    }
    let n_rx = ch1.n_rx();
    let (n_tx1, n_tx2) = (ch1.n_tx(), ch2.n_tx());
    let amp = beta.sqrt();

    // Merge the two delay sets; site 1 occupies columns 0..n_tx1, site 2 the rest.
    let mut merged: Vec<(usize, DMatrix<Complex64>)> = Vec::new();
    let mut upsert = |delay: usize, cols: std::ops::Range<usize>, tap: &DMatrix<Complex64>, scale: f64| {
        let entry = match merged.iter_mut().find(|(d, _)| *d == delay) {
            Some((_, m)) => m,
            None => {
                merged.push((delay, DMatrix::zeros(n_rx, n_tx1 + n_tx2)));
                &mut merged.last_mut().unwrap().1
            }
        };
        for (j, col) in cols.enumerate() {
            for i in 0..n_rx {
                entry[(i, col)] += tap[(i, j)] * scale;
            }
        }
    };
    for (tap, &d) in ch1.taps().iter().zip(ch1.delays()) {
        upsert(d, 0..n_tx1, tap, 1.0);
    }
    for (tap, &d) in ch2.taps().iter().zip(ch2.delays()) {
        let delay = d.checked_add(extra_delay).ok_or_else(|| {
            Error::Dimension(format!("delay {d} + {extra_delay} overflows"))
        })?;
        upsert(delay, n_tx1..n_tx1 + n_tx2, tap, amp);
    }
    merged.sort_by_key(|(d, _)| *d);
    let (delays, taps): (Vec<_>, Vec<_>) = merged.into_iter().map(|(d, m)| (d, m)).unzip();
    ChannelTaps::new(taps, delays)
}

/// Applies `Y = H X + W` with W entries i.i.d. CN(0, sigma2_n).
///
/// `sigma2_n = 0` gives the noiseless channel.
pub fn apply_channel<R: Rng + ?Sized>(
    h: &DMatrix<Complex64>,
    x: &DMatrix<Complex64>,
    sigma2_n: f64,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    if h.ncols() != x.nrows() {
        return Err(Error::Dimension(format!(
            "channel is {}x{} but block has {} rows",
            h.nrows(),
            h.ncols(),
            x.nrows()
        )));
    }
    if !(sigma2_n >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be >= 0, got {sigma2_n}"
        )));
    }
    let mut y = h * x;
    if sigma2_n > 0.0 {
        let amp = sigma2_n.sqrt();
        for v in y.iter_mut() {
            *v += sample_cn01(rng) * amp;
        }
    }
    Ok(y)
}
