//! Experiment orchestration behind the `dstc-sim` binary: dispatches the
//! configured mode, writes deterministic CSV results and prints a summary.
//!
//! CSV files are byte-for-byte reproducible for a given config and seed:
//! floats are serialized with 17 significant digits, rows are emitted in
//! grid order, and the newline is always `\n`.

use std::fs;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::capacity::{
    calibrate_noise_for_sfn_min, capacity_distributed, capacity_mimo, capacity_sfn,
    coverage_sweep, mimo_capacity_for_channel, reference_snr, sfn_capacity_quadrature,
    CapacityConfig,
};
use crate::channel::{sample_iid_rayleigh, NoiseSpec, ScenarioGeometry};
use crate::config::{ExperimentConfig, Mode};
use crate::detect::{ml_exhaustive, sphere_decode, DetectionProblem, DEFAULT_SEARCH_CAP};
use crate::modulation::{Constellation, ModulationName};
use crate::sim::{run_imbalance_sweep, run_snr_sweep, BerExperiment};
use crate::stc::{effective_real_channel, encode, realvec, CodeEncoder, CodeName, STCode};
use crate::{derive_seed, Error, Result};

/// What a run produced.
#[derive(Debug)]
pub struct RunSummary {
    pub csv_path: Option<PathBuf>,
    pub rows: usize,
    pub checks_failed: usize,
}

/// Serializes a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(path: &PathBuf, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text.as_bytes())?;
    Ok(())
}

/// Runs the configured experiment to completion and writes `results.csv`
/// under the output directory (except in validate mode).
pub fn run(config: &ExperimentConfig) -> Result<RunSummary> {
    match config.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
            pool.install(|| run_inner(config))
        }
        None => run_inner(config),
    }
}

fn run_inner(config: &ExperimentConfig) -> Result<RunSummary> {
    match config.mode {
        Mode::CapacitySweep => run_capacity(config),
        Mode::BerSnrSweep => run_ber_snr(config),
        Mode::BerImbalanceSweep => run_ber_imbalance(config),
        Mode::Validate => run_validate(config),
    }
}

fn out_csv(config: &ExperimentConfig) -> Result<PathBuf> {
    fs::create_dir_all(&config.out_dir)?;
    Ok(config.out_dir.join("results.csv"))
}

fn run_capacity(config: &ExperimentConfig) -> Result<RunSummary> {
    let geometry = ScenarioGeometry::two_site(
        config.separation_km,
        config.pathloss_exponent,
        config.total_power_w,
        config.min_distance_km,
    )?;
    let cap_cfg = CapacityConfig {
        n_realizations: config.n_realizations,
        ..CapacityConfig::default()
    };
    let noise = match config.noise_variance {
        Some(v) => NoiseSpec::new(v)?,
        None => calibrate_noise_for_sfn_min(&geometry, &cap_cfg, config.sfn_target_bits)?,
    };
    let rho = reference_snr(&geometry, &noise, &cap_cfg);

    let header = [
        "position_km",
        "scenario",
        "capacity_bps_hz",
        "std_err",
        "rho",
        "noise_variance",
        "n_realizations",
        "pathloss_exponent",
        "separation_km",
        "total_power_w",
        "min_distance_km",
        "seed",
    ];
    let mut rows = Vec::new();
    for scenario in config.scenario.scenarios() {
        let records = coverage_sweep(
            &geometry,
            scenario,
            &noise,
            &cap_cfg,
            &config.positions_km,
            config.seed,
        )?;
        let lo = records
            .iter()
            .map(|r| r.capacity_bps_hz)
            .fold(f64::INFINITY, f64::min);
        let hi = records
            .iter()
            .map(|r| r.capacity_bps_hz)
            .fold(f64::NEG_INFINITY, f64::max);
        println!(
            "{}: {} positions, capacity {:.3} .. {:.3} bits/s/Hz",
            scenario.token(),
            records.len(),
            lo,
            hi
        );
        for r in records {
            rows.push(vec![
                fmt_f64(r.rx_position_km),
                r.scenario.token().to_string(),
                fmt_f64(r.capacity_bps_hz),
                fmt_f64(r.std_err),
                fmt_f64(rho),
                fmt_f64(noise.variance()),
                config.n_realizations.to_string(),
                fmt_f64(config.pathloss_exponent),
                fmt_f64(config.separation_km),
                fmt_f64(config.total_power_w),
                fmt_f64(config.min_distance_km),
                config.seed.to_string(),
            ]);
        }
    }
    let path = out_csv(config)?;
    write_csv(&path, &header, &rows)?;
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(RunSummary {
        csv_path: Some(path),
        rows: rows.len(),
        checks_failed: 0,
    })
}

fn ber_experiment(config: &ExperimentConfig) -> Result<BerExperiment> {
    let code = config
        .code
        .ok_or_else(|| Error::InvalidParameter("ber modes need a code".into()))?;
    let constellation = config
        .constellation
        .ok_or_else(|| Error::InvalidParameter("ber modes need a constellation".into()))?;
    let mut exp = BerExperiment::new(
        STCode::new(code),
        Constellation::new(constellation),
        config.seed,
    );
    exp.snr_grid_db = config.snr_grid_db.clone();
    exp.imbalance_grid_db = config.imbalance_grid_db.clone();
    exp.min_bit_errors = config.min_bit_errors;
    exp.max_codewords = config.max_codewords;
    exp.validate()?;
    Ok(exp)
}

fn ber_row_prefix(exp: &BerExperiment, r: &crate::sim::BerRecord) -> Vec<String> {
    vec![
        exp.code.name.token().to_string(),
        exp.constellation.name().token().to_string(),
        fmt_f64(r.snr_db),
        fmt_f64(r.imbalance_db),
        r.bits_simulated.to_string(),
        r.bit_errors.to_string(),
        fmt_f64(r.ber),
        r.sphere_fallbacks.to_string(),
    ]
}

fn run_ber_snr(config: &ExperimentConfig) -> Result<RunSummary> {
    let exp = ber_experiment(config)?;
    let records = run_snr_sweep(&exp)?;
    let header = [
        "code",
        "constellation",
        "snr_db",
        "imbalance_db",
        "bits",
        "errors",
        "ber",
        "sphere_fallbacks",
        "min_bit_errors",
        "max_codewords",
        "seed",
    ];
    let mut rows = Vec::new();
    println!(
        "{} / {}: BER vs SNR",
        exp.code.name.token(),
        exp.constellation.name().token()
    );
    for r in &records {
        println!("  {:>6.2} dB  ber {:.3e}  ({} / {} bits)", r.snr_db, r.ber, r.bit_errors, r.bits_simulated);
        let mut row = ber_row_prefix(&exp, r);
        row.extend([
            exp.min_bit_errors.to_string(),
            exp.max_codewords.to_string(),
            exp.seed.to_string(),
        ]);
        rows.push(row);
    }
    let path = out_csv(config)?;
    write_csv(&path, &header, &rows)?;
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(RunSummary {
        csv_path: Some(path),
        rows: rows.len(),
        checks_failed: 0,
    })
}

fn run_ber_imbalance(config: &ExperimentConfig) -> Result<RunSummary> {
    let exp = ber_experiment(config)?;
    let records = run_imbalance_sweep(&exp, config.fixed_snr_db, config.target_ber)?;
    let header = [
        "code",
        "constellation",
        "snr_db",
        "imbalance_db",
        "bits",
        "errors",
        "ber",
        "sphere_fallbacks",
        "fixed_snr_db",
        "required_snr_db",
        "target_ber",
        "min_bit_errors",
        "max_codewords",
        "seed",
    ];
    let mut rows = Vec::new();
    println!(
        "{} / {}: BER vs site power imbalance at fixed SNR {:.2} dB",
        exp.code.name.token(),
        exp.constellation.name().token(),
        records.first().map(|r| r.fixed_snr_db).unwrap_or(f64::NAN)
    );
    for r in &records {
        println!(
            "  {:>6.2} dB imbalance  ber {:.3e}  required snr {}",
            r.record.imbalance_db,
            r.record.ber,
            r.required_snr_db
                .map(|v| format!("{v:.2} dB"))
                .unwrap_or_else(|| "-".into())
        );
        let mut row = ber_row_prefix(&exp, &r.record);
        row.extend([
            fmt_f64(r.fixed_snr_db),
            r.required_snr_db.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.target_ber),
            exp.min_bit_errors.to_string(),
            exp.max_codewords.to_string(),
            exp.seed.to_string(),
        ]);
        rows.push(row);
    }
    let path = out_csv(config)?;
    write_csv(&path, &header, &rows)?;
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(RunSummary {
        csv_path: Some(path),
        rows: rows.len(),
        checks_failed: 0,
    })
}

/// Outcome of one named validation check.
pub struct CheckResult {
    pub name: &'static str,
    pub outcome: std::result::Result<String, String>,
}

/// Prints one PASS/FAIL line per check; `Err` if any failed.
pub fn report_checks(results: &[CheckResult]) -> Result<usize> {
    let mut failed = 0;
    for c in results {
        match &c.outcome {
            Ok(detail) => println!("PASS {}: {detail}", c.name),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}: {detail}", c.name);
            }
        }
    }
    if failed > 0 {
        return Err(Error::InvalidParameter(format!(
            "{failed} validation check(s) failed"
        )));
    }
    Ok(results.len())
}

fn run_validate(config: &ExperimentConfig) -> Result<RunSummary> {
    let results = builtin_checks(config.seed);
    let n = report_checks(&results)?;
    println!("{n} checks passed");
    Ok(RunSummary {
        csv_path: None,
        rows: 0,
        checks_failed: 0,
    })
}

/// The oracle suites behind `validate` mode.
pub fn builtin_checks(seed: u64) -> Vec<CheckResult> {
    vec![
        CheckResult {
            name: "codeword-energy-normalization",
            outcome: check_energy_normalization(),
        },
        CheckResult {
            name: "effective-channel-identity",
            outcome: check_effective_channel(seed),
        },
        CheckResult {
            name: "sphere-vs-exhaustive",
            outcome: check_sphere_vs_exhaustive(seed),
        },
        CheckResult {
            name: "capacity-identities",
            outcome: check_capacity_identities(seed),
        },
    ]
}

fn check_energy_normalization() -> std::result::Result<String, String> {
    for name in CodeName::all() {
        let enc = CodeEncoder::new(STCode::new(name));
        let p = enc.power_per_slot();
        if (p - 1.0).abs() > 1e-9 {
            return Err(format!("{}: power per slot {p}", name.token()));
        }
    }
    Ok("unit power per slot across all 10 codes (1e-9)".into())
}

fn check_effective_channel(seed: u64) -> std::result::Result<String, String> {
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, &[1]));
    let mut worst: f64 = 0.0;
    for name in CodeName::all() {
        let code = STCode::new(name);
        for _ in 0..100 {
            let h = sample_iid_rayleigh(code.n_rx, code.n_tx, &mut rng);
            let g = effective_real_channel(&code, &h).map_err(|e| e.to_string())?;
            let s: Vec<num_complex::Complex64> = (0..code.n_symbols)
                .map(|_| crate::channel::sample_cn01(&mut rng))
                .collect();
            let x = encode(&code, &s).map_err(|e| e.to_string())?;
            let direct = realvec(&(&h * &x));
            let sv = realvec(&nalgebra::DMatrix::from_column_slice(code.n_symbols, 1, &s));
            let via = &g * nalgebra::DMatrix::from_column_slice(2 * code.n_symbols, 1, &sv);
            let err: f64 = direct
                .iter()
                .zip(via.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(err);
            if err > 1e-10 {
                return Err(format!("{}: residual {err}", name.token()));
            }
        }
    }
    Ok(format!("realvec(HX(s)) = G realvec(s), worst residual {worst:.2e}"))
}

fn check_sphere_vs_exhaustive(seed: u64) -> std::result::Result<String, String> {
    let qpsk = Constellation::new(ModulationName::Qpsk);
    let qam = Constellation::new(ModulationName::Qam16);
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, &[2]));
    let mut compared = 0u64;
    for name in CodeName::all() {
        let code = STCode::new(name);
        for constellation in [&qpsk, &qam] {
            if (constellation.size() as u128).pow(code.n_symbols as u32) > 70_000 {
                continue;
            }
            for trial in 0..40 {
                let sigma2: f64 = [1.0, 0.1, 0.01][trial % 3];
                let h = sample_iid_rayleigh(code.n_rx, code.n_tx, &mut rng);
                let g = effective_real_channel(&code, &h).map_err(|e| e.to_string())?;
                let s: Vec<num_complex::Complex64> = (0..code.n_symbols)
                    .map(|_| {
                        use rand::Rng;
                        constellation.point(rng.random_range(0..constellation.size()))
                    })
                    .collect();
                let x = encode(&code, &s).map_err(|e| e.to_string())?;
                let mut y = realvec(&(&h * &x));
                {
                    use rand::Rng;
                    let amp = (sigma2 / 2.0).sqrt();
                    for v in y.iter_mut() {
                        let w: f64 = rng.sample(rand_distr::StandardNormal);
                        *v += amp * w;
                    }
                }
                let p = DetectionProblem::new(g.as_slice(), g.nrows(), &y, constellation, code.n_symbols)
                    .map_err(|e| e.to_string())?;
                let ex = ml_exhaustive(&p, DEFAULT_SEARCH_CAP).map_err(|e| e.to_string())?;
                let (sp, _) = sphere_decode(&p, DEFAULT_SEARCH_CAP).map_err(|e| e.to_string())?;
                let el: Vec<usize> = ex.iter().map(|&v| constellation.nearest_label(v)).collect();
                let sl: Vec<usize> = sp.iter().map(|&v| constellation.nearest_label(v)).collect();
                if el != sl {
                    return Err(format!("{}: decision mismatch", name.token()));
                }
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} instances decision-identical"))
}

fn check_capacity_identities(seed: u64) -> std::result::Result<String, String> {
    let cfg = CapacityConfig {
        n_realizations: 50_000,
        ..CapacityConfig::default()
    };
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, &[3]));

    // Deterministic identity channel: log2 det(I + I) = n_r.
    let h = nalgebra::DMatrix::<num_complex::Complex64>::identity(2, 2);
    let c = mimo_capacity_for_channel(&h, 2.0);
    if (c - 2.0).abs() > 1e-12 {
        return Err(format!("identity-channel capacity {c} != 2"));
    }

    let rho = 6.0;
    let a = capacity_mimo(1, 1, rho, &cfg, &mut rng);
    let b = capacity_sfn(1.0, 0.0, 2.0 * rho, &cfg, &mut rng);
    let tol = 3.0 * (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
    if (a.mean - b.mean).abs() > tol {
        return Err(format!(
            "mimo(1,1) {} vs sfn(1,0) {} exceeds 3 SE",
            a.mean, b.mean
        ));
    }

    let d = capacity_distributed(2, 2, 1.0, 0.0, rho, &cfg, &mut rng);
    let e = capacity_mimo(2, 2, rho * 0.5, &cfg, &mut rng);
    let tol = 3.0 * (d.std_err.powi(2) + e.std_err.powi(2)).sqrt();
    if (d.mean - e.mean).abs() > tol {
        return Err(format!(
            "distributed(l2=0) {} vs mimo at rho/2 {} exceeds 3 SE",
            d.mean, e.mean
        ));
    }

    let q = sfn_capacity_quadrature(1.0, 0.6, rho);
    let mc = capacity_sfn(1.0, 0.6, rho, &cfg, &mut rng);
    if (q - mc.mean).abs() > 3.0 * mc.std_err {
        return Err(format!("quadrature {q} vs MC {} exceeds 3 SE", mc.mean));
    }

    Ok("estimator equivalences within 3 SE, identity channel exact".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_f64_has_17_significant_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        let x = std::f64::consts::PI;
        let parsed: f64 = fmt_f64(x).parse().unwrap();
        assert_eq!(parsed, x);
    }

    #[test]
    fn failing_check_yields_error() {
        let results = vec![
            CheckResult {
                name: "ok-check",
                outcome: Ok("fine".into()),
            },
            CheckResult {
                name: "broken-detector",
                outcome: Err("stub mismatch".into()),
            },
        ];
        assert!(report_checks(&results).is_err());
        let all_ok = vec![CheckResult {
            name: "ok-check",
            outcome: Ok("fine".into()),
        }];
        assert_eq!(report_checks(&all_ok).unwrap(), 1);
    }

    #[test]
    fn builtin_validate_suite_passes() {
        let results = builtin_checks(42);
        for c in &results {
            assert!(c.outcome.is_ok(), "{}: {:?}", c.name, c.outcome);
        }
    }
}
