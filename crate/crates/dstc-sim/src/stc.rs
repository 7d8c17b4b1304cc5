//! Space-time block code encoders and their real-valued effective channels.
//!
//! Ten schemes are implemented in a uniform antennas x time-slots codeword
//! layout (rows = transmit antennas, columns = slots): four classical
//! benchmarks (SISO in SFN, Alamouti 2x1, MRC 1x2, Alamouti 2x2) and six
//! distributed four-antenna codes built hierarchically from an intra-cell
//! code and an inter-cell arrangement: Jafarkhani, the L2 code, rate-one
//! Alamouti-in-SFN, the Golden/Alamouti 3D code, 4x2 spatial multiplexing
//! in SFN, and rate-two stacked Alamouti.
//!
//! The `encode_*` functions return the codeword matrices exactly as printed
//! in their defining equations; [`encode`] additionally applies the power
//! normalization that makes every scheme radiate unit total power per time
//! slot (half per site for the two-site codes), so BER comparisons across
//! codes share one SNR convention.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

/// Identifier for one ST coding scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodeName {
    SisoSfn,
    MisoAlamouti,
    SimoMrc,
    MimoAlamouti,
    Jafarkhani,
    L2,
    R1Alamouti,
    ThreeD,
    Sm4x2,
    R2Alamouti,
}

impl CodeName {
    pub fn all() -> [CodeName; 10] {
        [
            CodeName::SisoSfn,
            CodeName::MisoAlamouti,
            CodeName::SimoMrc,
            CodeName::MimoAlamouti,
            CodeName::Jafarkhani,
            CodeName::L2,
            CodeName::R1Alamouti,
            CodeName::ThreeD,
            CodeName::Sm4x2,
            CodeName::R2Alamouti,
        ]
    }

    /// The six four-antenna distributed codes.
    pub fn distributed() -> [CodeName; 6] {
        [
            CodeName::Jafarkhani,
            CodeName::L2,
            CodeName::R1Alamouti,
            CodeName::ThreeD,
            CodeName::Sm4x2,
            CodeName::R2Alamouti,
        ]
    }

    /// Config/CLI token.
    pub fn token(self) -> &'static str {
        match self {
            CodeName::SisoSfn => "siso-sfn",
            CodeName::MisoAlamouti => "miso-alamouti",
            CodeName::SimoMrc => "simo-mrc",
            CodeName::MimoAlamouti => "mimo-alamouti",
            CodeName::Jafarkhani => "jafarkhani",
            CodeName::L2 => "l2",
            CodeName::R1Alamouti => "r1-alamouti",
            CodeName::ThreeD => "3d",
            CodeName::Sm4x2 => "sm-4x2",
            CodeName::R2Alamouti => "r2-alamouti",
        }
    }

    pub fn parse_token(s: &str) -> Result<Self> {
        CodeName::all()
            .into_iter()
            .find(|c| c.token() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = CodeName::all().iter().map(|c| c.token()).collect();
                Error::InvalidParameter(format!(
                    "unknown code `{s}` (valid: {})",
                    valid.join(", ")
                ))
            })
    }
}

/// Descriptor of one ST scheme: antenna/slot/symbol counts and the power
/// normalization applied on top of the printed codeword matrix.
#[derive(Debug, Clone, Copy)]
pub struct STCode {
    pub name: CodeName,
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_slots: usize,
    pub n_symbols: usize,
    /// Antennas 0..site1_tx belong to site 1, the rest to site 2.
    pub site1_tx: usize,
    /// Amplitude applied to the printed codeword for unit power per slot.
    pub amp_scale: f64,
}

impl STCode {
    pub fn new(name: CodeName) -> Self {
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        // (n_tx, n_rx, n_slots, n_symbols, site1_tx, amp_scale)
        let (n_tx, n_rx, n_slots, n_symbols, site1_tx, amp_scale) = match name {
            CodeName::SisoSfn => (2, 1, 1, 1, 1, inv_sqrt2),
            CodeName::MisoAlamouti => (2, 1, 2, 2, 1, inv_sqrt2),
            CodeName::SimoMrc => (1, 2, 1, 1, 1, 1.0),
            CodeName::MimoAlamouti => (2, 2, 2, 2, 1, inv_sqrt2),
            CodeName::Jafarkhani => (4, 2, 4, 4, 2, 0.5),
            CodeName::L2 => (4, 2, 4, 4, 2, 0.5),
            CodeName::R1Alamouti => (4, 2, 2, 2, 2, 0.5),
            CodeName::ThreeD => (4, 2, 4, 8, 2, 0.5),
            CodeName::Sm4x2 => (4, 2, 1, 2, 2, 0.5),
            CodeName::R2Alamouti => (4, 2, 2, 4, 2, 0.5),
        };
        STCode {
            name,
            n_tx,
            n_rx,
            n_slots,
            n_symbols,
            site1_tx,
            amp_scale,
        }
    }

    /// Symbols per channel use.
    pub fn rate(&self) -> f64 {
        self.n_symbols as f64 / self.n_slots as f64
    }

    pub fn is_distributed(&self) -> bool {
        CodeName::distributed().contains(&self.name)
    }

    /// Spectral efficiency (Q/T) * bits per symbol, in bits/s/Hz.
    pub fn spectral_efficiency(&self, constellation_bits: usize) -> f64 {
        self.rate() * constellation_bits as f64
    }
}

/// Constants of the Golden code: theta = (1+sqrt 5)/2.
#[derive(Debug, Clone, Copy)]
pub struct GoldenConstants {
    pub theta: f64,
    pub theta_bar: f64,
    pub alpha: Complex64,
    pub alpha_bar: Complex64,
    pub scale: f64,
}

impl GoldenConstants {
    pub fn new() -> Self {
        let theta = (1.0 + 5f64.sqrt()) / 2.0;
        let theta_bar = 1.0 - theta;
        GoldenConstants {
            theta,
            theta_bar,
            alpha: Complex64::new(1.0, 1.0 - theta),
            alpha_bar: Complex64::new(1.0, 1.0 - theta_bar),
            scale: 1.0 / 5f64.sqrt(),
        }
    }
}

impl Default for GoldenConstants {
    fn default() -> Self {
        Self::new()
    }
}

fn mat(rows: usize, cols: usize, data: &[Complex64]) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(rows, cols, data)
}

/// Alamouti 2x2 block: rows are antennas, columns time slots.
pub fn encode_alamouti(s1: Complex64, s2: Complex64) -> DMatrix<Complex64> {
    mat(2, 2, &[s1, -s2.conj(), s2, s1.conj()])
}

/// Jafarkhani quasi-orthogonal code: Alamouti blocks A, B arranged again in
/// an Alamouti pattern `[[A, -B*], [B, A*]]`.
pub fn encode_jafarkhani(s: &[Complex64; 4]) -> DMatrix<Complex64> {
    let [s1, s2, s3, s4] = *s;
    mat(
        4,
        4,
        &[
            s1, -s2.conj(), -s3.conj(), s4,
            s2, s1.conj(), -s4.conj(), -s3,
            s3, -s4.conj(), s1.conj(), -s2,
            s4, s3.conj(), s2.conj(), s1,
        ],
    )
}

/// L2 code: Alamouti-like intra-cell blocks with a Hermitian inter-cell
/// arrangement `[[A, -B^H], [B, A^H]]`; full diversity, non-vanishing gain.
pub fn encode_l2(s: &[Complex64; 4]) -> DMatrix<Complex64> {
    let [s1, s2, s3, s4] = *s;
    let i = Complex64::i();
    mat(
        4,
        4,
        &[
            s1, i * s2, -s3.conj(), -s4.conj(),
            s2, s1, i * s4.conj(), -s3.conj(),
            s3, i * s4, s1.conj(), s2.conj(),
            s4, s3, -i * s2.conj(), s1.conj(),
        ],
    )
}

/// Rate-one Alamouti: the same Alamouti codeword from both sites (SFN).
pub fn encode_r1_alamouti(s1: Complex64, s2: Complex64) -> DMatrix<Complex64> {
    let a = encode_alamouti(s1, s2);
    stack_vertical(&a, &a)
}

/// Golden code 2x2 block carrying four symbols, used per site by the 3D code.
fn golden_block(g: &GoldenConstants, x1: Complex64, x2: Complex64, x3: Complex64, x4: Complex64) -> DMatrix<Complex64> {
    let i = Complex64::i();
    let th = Complex64::new(g.theta, 0.0);
    let thb = Complex64::new(g.theta_bar, 0.0);
    mat(
        2,
        2,
        &[
            g.alpha * (x1 + th * x2) * g.scale,
            g.alpha * (x3 + th * x4) * g.scale,
            i * g.alpha_bar * (x3 + thb * x4) * g.scale,
            g.alpha_bar * (x1 + thb * x2) * g.scale,
        ],
    )
}

/// 3D (Space-Time-Space) code: Golden coding within each site, Alamouti
/// across sites, `[[A, -B*], [B, A*]]` with conjugation elementwise.
pub fn encode_3d(s: &[Complex64; 8]) -> DMatrix<Complex64> {
    let g = GoldenConstants::new();
    let a = golden_block(&g, s[0], s[1], s[2], s[3]);
    let b = golden_block(&g, s[4], s[5], s[6], s[7]);
    let mut x = DMatrix::<Complex64>::zeros(4, 4);
    for r in 0..2 {
        for c in 0..2 {
            x[(r, c)] = a[(r, c)];
            x[(r, c + 2)] = -b[(r, c)].conj();
            x[(r + 2, c)] = b[(r, c)];
            x[(r + 2, c + 2)] = a[(r, c)].conj();
        }
    }
    x
}

/// 4x2 spatial multiplexing in SFN: both sites transmit the SM column.
pub fn encode_sm(s1: Complex64, s2: Complex64) -> DMatrix<Complex64> {
    mat(4, 1, &[s1, s2, s1, s2])
}

/// Rate-two Alamouti: two independent Alamouti codewords stacked (SM across
/// sites).
pub fn encode_r2_alamouti(s: &[Complex64; 4]) -> DMatrix<Complex64> {
    let a = encode_alamouti(s[0], s[1]);
    let b = encode_alamouti(s[2], s[3]);
    stack_vertical(&a, &b)
}

fn stack_vertical(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.view_mut((a.nrows(), 0), (b.nrows(), b.ncols())).copy_from(b);
    out
}

/// Encodes `code.n_symbols` symbols into the power-normalized codeword
/// (antennas x slots).
pub fn encode(code: &STCode, s: &[Complex64]) -> Result<DMatrix<Complex64>> {
    if s.len() != code.n_symbols {
        return Err(Error::Dimension(format!(
            "{} symbols supplied to {} (needs {})",
            s.len(),
            code.name.token(),
            code.n_symbols
        )));
    }
    let raw = match code.name {
        CodeName::SisoSfn => mat(2, 1, &[s[0], s[0]]),
        CodeName::MisoAlamouti | CodeName::MimoAlamouti => encode_alamouti(s[0], s[1]),
        CodeName::SimoMrc => mat(1, 1, &[s[0]]),
        CodeName::Jafarkhani => encode_jafarkhani(&[s[0], s[1], s[2], s[3]]),
        CodeName::L2 => encode_l2(&[s[0], s[1], s[2], s[3]]),
        CodeName::R1Alamouti => encode_r1_alamouti(s[0], s[1]),
        CodeName::ThreeD => encode_3d(&[s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7]]),
        CodeName::Sm4x2 => encode_sm(s[0], s[1]),
        CodeName::R2Alamouti => encode_r2_alamouti(&[s[0], s[1], s[2], s[3]]),
    };
    Ok(raw * Complex64::new(code.amp_scale, 0.0))
}

/// Precomputed linear-dispersion basis of a code: the codewords produced by
/// unit real and unit imaginary excitation of each symbol. Both `encode`
/// outputs and effective channel matrices are real-linear combinations of
/// these.
#[derive(Debug, Clone)]
pub struct CodeEncoder {
    code: STCode,
    /// `basis[j]` for j < Q is X(e_j); `basis[Q + j]` is X(i e_j).
    basis: Vec<DMatrix<Complex64>>,
}

impl CodeEncoder {
    pub fn new(code: STCode) -> Self {
        let q = code.n_symbols;
        let mut basis = Vec::with_capacity(2 * q);
        let mut s = vec![Complex64::new(0.0, 0.0); q];
        for part in 0..2 {
            for j in 0..q {
                s[j] = if part == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 1.0)
                };
                basis.push(encode(&code, &s).expect("basis encode"));
                s[j] = Complex64::new(0.0, 0.0);
            }
        }
        CodeEncoder { code, basis }
    }

    pub fn code(&self) -> &STCode {
        &self.code
    }

    pub fn basis(&self) -> &[DMatrix<Complex64>] {
        &self.basis
    }

    /// Mean transmitted power per time slot for unit-energy symbols.
    /// 1.0 for every scheme by construction.
    pub fn power_per_slot(&self) -> f64 {
        let e: f64 = self.basis.iter().map(|x| x.norm_squared()).sum();
        e / (2.0 * self.code.n_slots as f64)
    }

    /// Fraction of the per-slot power radiated by each antenna.
    pub fn antenna_power_fractions(&self) -> Vec<f64> {
        let slots = self.code.n_slots as f64;
        (0..self.code.n_tx)
            .map(|a| {
                self.basis
                    .iter()
                    .map(|x| x.row(a).iter().map(|v| v.norm_sqr()).sum::<f64>())
                    .sum::<f64>()
                    / (2.0 * slots)
            })
            .collect()
    }

    /// Per-site shares of the transmitted power; `[w1, w2]` sums to 1.
    pub fn site_power_fractions(&self) -> [f64; 2] {
        let per_antenna = self.antenna_power_fractions();
        let w1: f64 = per_antenna[..self.code.site1_tx].iter().sum();
        let w2: f64 = per_antenna[self.code.site1_tx..].iter().sum();
        [w1, w2]
    }

    /// Fills the column-major real effective channel G (2 n_rx T x 2 Q) for
    /// receive channel `h` (n_rx x n_tx): realvec(H X(s)) = G realvec(s),
    /// where realvec stacks real parts then imaginary parts.
    pub fn fill_effective_real_channel(&self, h: &DMatrix<Complex64>, g: &mut [f64]) {
        let (n_rx, n_tx) = (h.nrows(), h.ncols());
        let t = self.code.n_slots;
        let half = n_rx * t;
        let rows = 2 * half;
        debug_assert_eq!(n_tx, self.code.n_tx);
        debug_assert_eq!(g.len(), rows * 2 * self.code.n_symbols);
        for (col, xb) in self.basis.iter().enumerate() {
            let gcol = &mut g[col * rows..(col + 1) * rows];
            for slot in 0..t {
                for i in 0..n_rx {
                    let mut y = Complex64::new(0.0, 0.0);
                    for a in 0..n_tx {
                        y += h[(i, a)] * xb[(a, slot)];
                    }
                    gcol[slot * n_rx + i] = y.re;
                    gcol[half + slot * n_rx + i] = y.im;
                }
            }
        }
    }
}

/// Real effective channel of `code` for receive channel `h`, as a matrix.
///
/// G satisfies realvec(H X(s)) = G realvec(s) for every symbol vector s,
/// with realvec stacking real parts, then imaginary parts (codeword entries
/// in column-major order).
pub fn effective_real_channel(code: &STCode, h: &DMatrix<Complex64>) -> Result<DMatrix<f64>> {
    if h.ncols() != code.n_tx {
        return Err(Error::Dimension(format!(
            "channel has {} columns, {} has {} antennas",
            h.ncols(),
            code.name.token(),
            code.n_tx
        )));
    }
    let enc = CodeEncoder::new(*code);
    let rows = 2 * h.nrows() * code.n_slots;
    let cols = 2 * code.n_symbols;
    let mut buf = vec![0.0; rows * cols];
    enc.fill_effective_real_channel(h, &mut buf);
    Ok(DMatrix::from_column_slice(rows, cols, &buf))
}

/// Stacks a complex vector/matrix (column-major) into [Re...; Im...].
pub fn realvec(m: &DMatrix<Complex64>) -> Vec<f64> {
    let n = m.len();
    let mut out = Vec::with_capacity(2 * n);
    out.extend(m.iter().map(|v| v.re));
    out.extend(m.iter().map(|v| v.im));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_iid_rayleigh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_symbols<R: Rng>(q: usize, rng: &mut R) -> Vec<Complex64> {
        (0..q)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn table_descriptors_match() {
        for name in CodeName::all() {
            let code = STCode::new(name);
            let tuple = (code.n_tx, code.n_slots, code.n_symbols);
            let expect = match name {
                CodeName::SisoSfn => (2, 1, 1),
                CodeName::MisoAlamouti => (2, 2, 2),
                CodeName::SimoMrc => (1, 1, 1),
                CodeName::MimoAlamouti => (2, 2, 2),
                CodeName::Jafarkhani => (4, 4, 4),
                CodeName::L2 => (4, 4, 4),
                CodeName::R1Alamouti => (4, 2, 2),
                CodeName::ThreeD => (4, 4, 8),
                CodeName::Sm4x2 => (4, 1, 2),
                CodeName::R2Alamouti => (4, 2, 4),
            };
            assert_eq!(tuple, expect, "{name:?}");
            if code.is_distributed() {
                assert!(code.rate() == 1.0 || code.rate() == 2.0);
            }
        }
    }

    #[test]
    fn alamouti_basic_patterns() {
        let x = encode_alamouti(c(1.0, 0.0), c(0.0, 0.0));
        assert_eq!(x, mat(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)]));
        let x = encode_alamouti(c(0.0, 0.0), c(1.0, 0.0));
        assert_eq!(x, mat(2, 2, &[c(0., 0.), c(-1., 0.), c(1., 0.), c(0., 0.)]));
    }

    #[test]
    fn alamouti_orthogonality() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..20 {
            let s = random_symbols(2, &mut rng);
            let x = encode_alamouti(s[0], s[1]);
            let gram = &x * x.adjoint();
            let e = s[0].norm_sqr() + s[1].norm_sqr();
            assert!((gram[(0, 0)].re - e).abs() < 1e-12);
            assert!((gram[(1, 1)].re - e).abs() < 1e-12);
            assert!(gram[(0, 1)].norm() < 1e-12);
        }
    }

    #[test]
    fn jafarkhani_unit_input_is_identity() {
        let x = encode_jafarkhani(&[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]);
        assert!((x - DMatrix::<Complex64>::identity(4, 4)).norm() < 1e-15);
    }

    #[test]
    fn jafarkhani_gram_quasi_orthogonal_pattern() {
        // Off-diagonal coupling only between symbol pairs {1,4} and {2,3}.
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut saw_coupling = false;
        for _ in 0..50 {
            let s = random_symbols(4, &mut rng);
            let x = encode_jafarkhani(&[s[0], s[1], s[2], s[3]]);
            let gram = x.adjoint() * &x;
            for a in 0..4 {
                for b in 0..4 {
                    if a == b || (a, b) == (0, 3) || (a, b) == (3, 0) || (a, b) == (1, 2) || (a, b) == (2, 1)
                    {
                        continue;
                    }
                    assert!(gram[(a, b)].norm() < 1e-12, "G[{a}{b}] = {}", gram[(a, b)]);
                }
            }
            if gram[(0, 3)].norm() > 1e-3 {
                saw_coupling = true;
            }
        }
        assert!(saw_coupling);

        let ones = encode_jafarkhani(&[c(1., 0.); 4]);
        let gram = ones.adjoint() * &ones;
        for a in 0..4 {
            for b in 0..4 {
                if a != b && !((a, b) == (0, 3) || (a, b) == (3, 0) || (a, b) == (1, 2) || (a, b) == (2, 1)) {
                    assert!(gram[(a, b)].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn l2_printed_matrix() {
        let x = encode_l2(&[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]);
        assert!((x - DMatrix::<Complex64>::identity(4, 4)).norm() < 1e-15);

        let x = encode_l2(&[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        assert!((x[(0, 1)] - c(0., 1.)).norm() < 1e-15);
        assert!((x[(1, 0)] - c(1., 0.)).norm() < 1e-15);
        assert!((x[(3, 2)] - c(0., -1.)).norm() < 1e-15);
        assert!(x[(0, 0)].norm() < 1e-15);

        let zero = encode_l2(&[c(0., 0.); 4]);
        assert!(zero.norm() < 1e-15);
    }

    #[test]
    fn r1_alamouti_duplicates_sites() {
        let x = encode_r1_alamouti(c(1., 0.), c(0., 0.));
        let rows: Vec<_> = (0..4).map(|r| (x[(r, 0)], x[(r, 1)])).collect();
        assert_eq!(rows[0], (c(1., 0.), c(0., 0.)));
        assert_eq!(rows[1], (c(0., 0.), c(1., 0.)));
        assert_eq!(rows[0], rows[2]);
        assert_eq!(rows[1], rows[3]);

        // Power-normalized codeword carries the site split.
        let code = STCode::new(CodeName::R1Alamouti);
        let scaled = encode(&code, &[c(1., 0.), c(0., 0.)]).unwrap();
        assert!((scaled[(0, 0)] - c(0.5, 0.)).norm() < 1e-15);
    }

    #[test]
    fn golden_constants_invariants() {
        let g = GoldenConstants::new();
        assert!((g.theta - 1.6180339887498949).abs() < 1e-12);
        assert!((g.theta_bar + 0.6180339887498949).abs() < 1e-12);
        assert!((g.theta * g.theta_bar + 1.0).abs() < 1e-12);
        assert!((g.alpha.norm_sqr() + g.alpha_bar.norm_sqr() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn three_d_unit_input_diagonal() {
        let mut s = [c(0., 0.); 8];
        s[0] = c(1., 0.);
        let x = encode_3d(&s);
        let g = GoldenConstants::new();
        let expect = [g.alpha, g.alpha_bar, g.alpha.conj(), g.alpha_bar.conj()];
        for (k, e) in expect.iter().enumerate() {
            assert!((x[(k, k)] - e * g.scale).norm() < 1e-15, "diag {k}");
        }
        let diag_energy: f64 = (0..4).map(|k| x[(k, k)].norm_sqr()).sum();
        assert!((x.norm_squared() - diag_energy).abs() < 1e-15, "off-diagonal nonzero");
    }

    #[test]
    fn three_d_alamouti_outer_symmetry() {
        // Swapping the two symbol halves maps columns (1,2) onto (3,4)
        // through the outer Alamouti pattern.
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..20 {
            let s = random_symbols(8, &mut rng);
            let mut swapped = [c(0., 0.); 8];
            swapped[..4].copy_from_slice(&s[4..8]);
            swapped[4..].copy_from_slice(&s[..4]);
            let x = encode_3d(&[s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7]]);
            let xs = encode_3d(&swapped);
            for r in 0..2 {
                for col in 0..2 {
                    let want_top = -xs[(r, col)].conj();
                    let want_bot = xs[(r + 2, col)].conj();
                    assert!((x[(r, col + 2)] - want_top).norm() < 1e-14);
                    assert!((x[(r + 2, col + 2)] - want_bot).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn sm_duplicates_sites() {
        let x = encode_sm(c(1., 0.), c(0., 0.));
        assert_eq!(x, mat(4, 1, &[c(1., 0.), c(0., 0.), c(1., 0.), c(0., 0.)]));
    }

    #[test]
    fn r2_alamouti_independent_blocks() {
        let x = encode_r2_alamouti(&[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]);
        assert_eq!(x.row(0).clone_owned(), mat(1, 2, &[c(1., 0.), c(0., 0.)]));
        assert_eq!(x.row(1).clone_owned(), mat(1, 2, &[c(0., 0.), c(1., 0.)]));
        assert!(x.rows(2, 2).norm() < 1e-15);

        let x = encode_r2_alamouti(&[c(0., 0.), c(0., 0.), c(1., 0.), c(0., 0.)]);
        assert!(x.rows(0, 2).norm() < 1e-15);
        assert_eq!(x.row(2).clone_owned(), mat(1, 2, &[c(1., 0.), c(0., 0.)]));
        assert_eq!(x.row(3).clone_owned(), mat(1, 2, &[c(0., 0.), c(1., 0.)]));
    }

    #[test]
    fn zero_input_encodes_to_zero() {
        for name in CodeName::all() {
            let code = STCode::new(name);
            let s = vec![c(0., 0.); code.n_symbols];
            assert!(encode(&code, &s).unwrap().norm() < 1e-15, "{name:?}");
        }
    }

    #[test]
    fn unit_power_per_slot_across_all_codes() {
        for name in CodeName::all() {
            let enc = CodeEncoder::new(STCode::new(name));
            let p = enc.power_per_slot();
            assert!((p - 1.0).abs() < 1e-9, "{name:?}: power/slot = {p}");
        }
    }

    #[test]
    fn two_site_codes_split_power_evenly() {
        for name in CodeName::distributed() {
            let enc = CodeEncoder::new(STCode::new(name));
            let [w1, w2] = enc.site_power_fractions();
            assert!((w1 - 0.5).abs() < 1e-12, "{name:?}: w1 = {w1}");
            assert!((w2 - 0.5).abs() < 1e-12, "{name:?}: w2 = {w2}");
        }
        let enc = CodeEncoder::new(STCode::new(CodeName::SimoMrc));
        assert_eq!(enc.site_power_fractions(), [1.0, 0.0]);
    }

    #[test]
    fn effective_channel_identity_all_codes() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for name in CodeName::all() {
            let code = STCode::new(name);
            for _ in 0..100 {
                let h = sample_iid_rayleigh(code.n_rx, code.n_tx, &mut rng);
                let g = effective_real_channel(&code, &h).unwrap();
                let s = random_symbols(code.n_symbols, &mut rng);
                let x = encode(&code, &s).unwrap();
                let y = &h * &x;
                let direct = realvec(&y);
                let sv = realvec(&DMatrix::from_column_slice(code.n_symbols, 1, &s));
                let via_g = &g * DMatrix::from_column_slice(2 * code.n_symbols, 1, &sv);
                let err: f64 = direct
                    .iter()
                    .zip(via_g.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                assert!(err < 1e-10, "{name:?}: err = {err}");
            }
        }
    }

    #[test]
    fn alamouti_effective_channel_orthogonal() {
        let h = DMatrix::from_row_slice(1, 2, &[c(1., 0.), c(0., 0.)]);
        let code = STCode::new(CodeName::MisoAlamouti);
        let g = effective_real_channel(&code, &h).unwrap();
        let gram = g.transpose() * &g;
        let scale = gram[(0, 0)];
        assert!(scale > 0.0);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { scale } else { 0.0 };
                assert!((gram[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_channel_gives_zero_effective_matrix() {
        let code = STCode::new(CodeName::ThreeD);
        let h = DMatrix::<Complex64>::zeros(2, 4);
        let g = effective_real_channel(&code, &h).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn effective_channel_rejects_bad_dims() {
        let code = STCode::new(CodeName::ThreeD);
        let h = DMatrix::<Complex64>::zeros(2, 3);
        assert!(effective_real_channel(&code, &h).is_err());
    }

    #[test]
    fn three_d_full_diversity_spot_check() {
        // det((X(s)-X(s')) (X(s)-X(s'))^H) != 0 for distinct QPSK vectors.
        use crate::modulation::{Constellation, ModulationName};
        let qpsk = Constellation::new(ModulationName::Qpsk);
        let code = STCode::new(CodeName::ThreeD);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut min_det = f64::INFINITY;
        for _ in 0..1000 {
            let sa: Vec<Complex64> = (0..8).map(|_| qpsk.point(rng.random_range(0..4))).collect();
            let mut sb = sa.clone();
            while sb == sa {
                sb = (0..8).map(|_| qpsk.point(rng.random_range(0..4))).collect();
            }
            let xa = encode(&code, &sa).unwrap();
            let xb = encode(&code, &sb).unwrap();
            let d = &xa - &xb;
            let det = (&d * d.adjoint()).determinant().norm();
            min_det = min_det.min(det);
        }
        assert!(min_det > 1e-9, "min |det| = {min_det}");
    }

    #[test]
    fn spectral_efficiency_pairings() {
        assert_eq!(STCode::new(CodeName::ThreeD).spectral_efficiency(2), 4.0);
        assert_eq!(STCode::new(CodeName::L2).spectral_efficiency(4), 4.0);
        assert_eq!(STCode::new(CodeName::Sm4x2).spectral_efficiency(2), 4.0);
        assert_eq!(STCode::new(CodeName::Jafarkhani).spectral_efficiency(2), 2.0);
    }

    #[test]
    fn token_round_trip() {
        for name in CodeName::all() {
            assert_eq!(CodeName::parse_token(name.token()).unwrap(), name);
        }
        assert!(CodeName::parse_token("golden").is_err());
    }
}
