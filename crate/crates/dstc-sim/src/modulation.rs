//! Gray-mapped QPSK and 16QAM constellations with unit average energy.
//!
//! Both constellations are square: the in-phase and quadrature axes carry
//! independent Gray-coded PAM levels, which is what lets the sphere decoder
//! search each real dimension separately. A symbol label is the integer
//! formed by its bits (first bit most significant); the first half of the
//! bits selects the I level, the second half the Q level.

use num_complex::Complex64;

use crate::{Error, Result};

/// Constellation identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulationName {
    Qpsk,
    Qam16,
}

impl ModulationName {
    /// Config/CLI token.
    pub fn token(self) -> &'static str {
        match self {
            ModulationName::Qpsk => "qpsk",
            ModulationName::Qam16 => "16qam",
        }
    }

    pub fn parse_token(s: &str) -> Result<Self> {
        match s {
            "qpsk" => Ok(ModulationName::Qpsk),
            "16qam" | "qam16" => Ok(ModulationName::Qam16),
            _ => Err(Error::InvalidParameter(format!(
                "unknown constellation `{s}` (valid: qpsk, 16qam)"
            ))),
        }
    }
}

/// A finite complex symbol alphabet with Gray bit labeling.
///
/// `points[label]` is the symbol whose bit pattern equals `label` read
/// most-significant-bit first. Average symbol energy is exactly 1.
#[derive(Debug, Clone)]
pub struct Constellation {
    name: ModulationName,
    points: Vec<Complex64>,
    axis_levels: Vec<f64>,
    bits_per_axis: usize,
}

impl Constellation {
    pub fn new(name: ModulationName) -> Self {
        // Per-axis amplitude for Gray value v. Axis labels are chosen so that
        // the all-zeros label maps to the most positive level, making
        // (1+i)/sqrt(2) carry bits (0,0) on QPSK.
        let (axis_levels, bits_per_axis) = match name {
            ModulationName::Qpsk => {
                let a = 1.0 / 2f64.sqrt();
                (vec![a, -a], 1)
            }
            ModulationName::Qam16 => {
                let a = 1.0 / 10f64.sqrt();
                // Gray value v -> level: 00 -> +3, 01 -> +1, 11 -> -1, 10 -> -3.
                (vec![3.0 * a, a, -3.0 * a, -a], 2)
            }
        };
        let m_axis = axis_levels.len();
        let mut points = Vec::with_capacity(m_axis * m_axis);
        for label in 0..m_axis * m_axis {
            let i_bits = label >> bits_per_axis;
            let q_bits = label & (m_axis - 1);
            points.push(Complex64::new(axis_levels[i_bits], axis_levels[q_bits]));
        }
        Constellation {
            name,
            points,
            axis_levels,
            bits_per_axis,
        }
    }

    pub fn name(&self) -> ModulationName {
        self.name
    }

    /// Number of constellation points M.
    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis
    }

    /// All points, indexed by bit label.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    /// PAM amplitudes one axis can take, indexed by the axis Gray value.
    pub fn axis_levels(&self) -> &[f64] {
        &self.axis_levels
    }

    /// Label of the nearest point; exact ties go to the smaller label.
    pub fn nearest_label(&self, s: Complex64) -> usize {
        let mut best = 0usize;
        let mut best_d = (s - self.points[0]).norm_sqr();
        for (label, p) in self.points.iter().enumerate().skip(1) {
            let d = (s - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = label;
            }
        }
        best
    }

    /// Recombines two per-axis Gray values into a symbol label.
    pub fn label_from_axes(&self, i_value: usize, q_value: usize) -> usize {
        (i_value << self.bits_per_axis) | q_value
    }

    /// Maps a bit sequence onto symbols, `bits_per_symbol` bits each,
    /// first bit most significant.
    pub fn map_bits(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        let bps = self.bits_per_symbol();
        if bits.len() % bps != 0 {
            return Err(Error::Dimension(format!(
                "bit count {} not divisible by {} bits/symbol",
                bits.len(),
                bps
            )));
        }
        Ok(bits
            .chunks(bps)
            .map(|chunk| {
                let label = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
                self.points[label]
            })
            .collect())
    }

    /// Writes the label's bits (MSB first) into `out`.
    pub fn label_bits(&self, label: usize, out: &mut Vec<u8>) {
        let bps = self.bits_per_symbol();
        for k in (0..bps).rev() {
            out.push(((label >> k) & 1) as u8);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qpsk_zero_bits_map_to_first_quadrant() {
        let c = Constellation::new(ModulationName::Qpsk);
        let s = c.map_bits(&[0, 0]).unwrap()[0];
        let a = 1.0 / 2f64.sqrt();
        assert!((s - Complex64::new(a, a)).norm() < 1e-15);
    }

    #[test]
    fn map_demap_round_trip_all_labels() {
        for name in [ModulationName::Qpsk, ModulationName::Qam16] {
            let c = Constellation::new(name);
            for label in 0..c.size() {
                let mut bits = Vec::new();
                c.label_bits(label, &mut bits);
                let s = c.map_bits(&bits).unwrap()[0];
                assert_eq!(c.nearest_label(s), label);
            }
        }
    }

    #[test]
    fn unit_average_energy() {
        for name in [ModulationName::Qpsk, ModulationName::Qam16] {
            let c = Constellation::new(name);
            let e: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / c.size() as f64;
            assert!((e - 1.0).abs() < 1e-12, "{name:?}: E={e}");
        }
    }

    #[test]
    fn labels_unique_and_gray_adjacent() {
        for name in [ModulationName::Qpsk, ModulationName::Qam16] {
            let c = Constellation::new(name);
            let mut seen = vec![false; c.size()];
            for label in 0..c.size() {
                assert!(!seen[label]);
                seen[label] = true;
            }
            // Neighbors along one axis at minimum spacing differ in one bit.
            let points = c.points();
            let spacing = match name {
                ModulationName::Qpsk => 2.0 / 2f64.sqrt(),
                ModulationName::Qam16 => 2.0 / 10f64.sqrt(),
            };
            for a in 0..c.size() {
                for b in 0..c.size() {
                    let d = points[a] - points[b];
                    let adjacent = (d.re.abs() < 1e-12 && (d.im.abs() - spacing).abs() < 1e-9)
                        || (d.im.abs() < 1e-12 && (d.re.abs() - spacing).abs() < 1e-9);
                    if adjacent {
                        assert_eq!((a ^ b).count_ones(), 1, "{name:?}: {a:#x} vs {b:#x}");
                    }
                }
            }
        }
    }

    #[test]
    fn midpoint_tie_goes_to_smaller_label() {
        let c = Constellation::new(ModulationName::Qpsk);
        // Equidistant from all four points.
        assert_eq!(c.nearest_label(Complex64::new(0.0, 0.0)), 0);
        // Equidistant between labels 0 and 1 (shared I, opposite Q).
        let a = 1.0 / 2f64.sqrt();
        assert_eq!(c.nearest_label(Complex64::new(a, 0.0)), 0);
    }

    #[test]
    fn map_bits_rejects_ragged_input() {
        let c = Constellation::new(ModulationName::Qam16);
        assert!(c.map_bits(&[0, 1, 0]).is_err());
    }
}
