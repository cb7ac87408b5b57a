//! BER, EVM and Q-factor, plus constellation export.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;
use statrs::function::erf::erfc_inv;

use crate::dsp::Complex64;
use crate::error::{Error, Result};
use crate::txgen::qpsk_slice;

/// Hard-decision threshold of the 7% overhead FEC. A BER equal to it passes.
pub const FEC_THRESHOLD: f64 = 4.5e-3;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelBer {
    pub bit_errors: u64,
    pub bits_counted: u64,
    pub ber: f64,
    pub ci95_halfwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerResult {
    pub bit_errors: u64,
    pub bits_counted: u64,
    pub ber: f64,
    /// Half the width of the 95% Wilson score interval.
    pub ci95_halfwidth: f64,
    pub fec_pass: bool,
    pub per_channel: Vec<ChannelBer>,
}

impl BerResult {
    /// 95% Wilson interval `(lo, hi)`.
    pub fn ci95(&self) -> (f64, f64) {
        wilson_interval(self.bit_errors, self.bits_counted, Z95)
    }
}

/// Wilson score interval for `errors` successes out of `n` at normal quantile `z`.
pub fn wilson_interval(errors: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let den = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / den;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / den;
    let lo = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    (lo, (center + half).min(1.0))
}

fn channel_ber(errors: u64, n: u64) -> ChannelBer {
    let (lo, hi) = wilson_interval(errors, n, Z95);
    ChannelBer {
        bit_errors: errors,
        bits_counted: n,
        ber: if n == 0 { 0.0 } else { errors as f64 / n as f64 },
        ci95_halfwidth: 0.5 * (hi - lo),
    }
}

fn hamming(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| (**x != 0) != (**y != 0)).count() as u64
}

/// Counts bit errors after skipping the first `skip` bits of each stream.
pub fn count_ber(tx_bits: &[u8], rx_bits: &[u8], skip: usize) -> Result<BerResult> {
    count_ber_channels(&[tx_bits], &[rx_bits], skip, 0)
}

/// Multi-channel count over bits `[skip, len - tail)` of each channel.
pub fn count_ber_channels<T: AsRef<[u8]>, R: AsRef<[u8]>>(
    tx_bits: &[T],
    rx_bits: &[R],
    skip: usize,
    tail: usize,
) -> Result<BerResult> {
    if tx_bits.len() != rx_bits.len() {
        return Err(Error::Parameter(format!(
            "{} tx channels vs {} rx channels",
            tx_bits.len(),
            rx_bits.len()
        )));
    }
    let mut per_channel = Vec::with_capacity(tx_bits.len());
    for (t, r) in tx_bits.iter().zip(rx_bits) {
        let (t, r) = (t.as_ref(), r.as_ref());
        if t.len() != r.len() {
            return Err(Error::Parameter(format!(
                "bit stream lengths differ: {} vs {}",
                t.len(),
                r.len()
            )));
        }
        if skip + tail > t.len() {
            return Err(Error::Parameter(format!(
                "skip {skip} + tail {tail} exceeds {} bits",
                t.len()
            )));
        }
        let end = t.len() - tail;
        per_channel.push(channel_ber(
            hamming(&t[skip..end], &r[skip..end]),
            (end - skip) as u64,
        ));
    }
    let errors = per_channel.iter().map(|c| c.bit_errors).sum();
    let n = per_channel.iter().map(|c| c.bits_counted).sum();
    let total = channel_ber(errors, n);
    Ok(BerResult {
        bit_errors: errors,
        bits_counted: n,
        ber: total.ber,
        ci95_halfwidth: total.ci95_halfwidth,
        fec_pass: total.ber <= FEC_THRESHOLD,
        per_channel,
    })
}

/// Q-factor in dB for Gray-coded QPSK, `20 log10(sqrt(2) erfcinv(2 BER))`.
pub fn q_factor_db(ber: f64) -> f64 {
    if ber <= 0.0 {
        return f64::INFINITY;
    }
    if ber >= 0.5 {
        return f64::NEG_INFINITY;
    }
    20.0 * (2f64.sqrt() * erfc_inv(2.0 * ber)).log10()
}

/// Complex gain `g` minimizing `sum |g s - ref|^2`.
pub fn ls_gain(symbols: &[Complex64], reference: &[Complex64]) -> Complex64 {
    let num: Complex64 = symbols.iter().zip(reference).map(|(s, r)| s.conj() * r).sum();
    let den: f64 = symbols.iter().map(|s| s.norm_sqr()).sum();
    if den > 0.0 {
        num / den
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Error vector magnitude in dB after scalar least-squares gain normalization.
///
/// Returns `-inf` when the symbols are an exact complex multiple of the reference.
pub fn evm_db(symbols: &[Complex64], reference: &[Complex64]) -> Result<f64> {
    if symbols.len() != reference.len() {
        return Err(Error::Parameter(format!(
            "EVM length mismatch: {} vs {}",
            symbols.len(),
            reference.len()
        )));
    }
    let p_ref: f64 = reference.iter().map(|r| r.norm_sqr()).sum();
    if !(p_ref > 0.0) {
        return Err(Error::Degenerate("reference has zero power".into()));
    }
    let g = ls_gain(symbols, reference);
    let err: f64 = symbols
        .iter()
        .zip(reference)
        .map(|(s, r)| (g * s - r).norm_sqr())
        .sum();
    // rounding floor for an exact match
    if err <= 1e-24 * p_ref {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(10.0 * (err / p_ref).log10())
}

/// Mean squared distance to the nearest QPSK point after scaling to unit power.
pub fn cluster_variance(symbols: &[Complex64]) -> f64 {
    let p = crate::dsp::mean_power(symbols);
    if p == 0.0 {
        return 0.0;
    }
    let s = p.sqrt();
    symbols
        .iter()
        .map(|v| {
            let u = v / s;
            (u - qpsk_slice(u)).norm_sqr()
        })
        .sum::<f64>()
        / symbols.len() as f64
}

/// File name for one constellation dump: `const_<scheme>_<channel>_it<iteration>.csv`.
///
/// Characters outside `[A-Za-z0-9_.-]` in the parts are replaced by `_`.
pub fn constellation_file_name(scheme: &str, channel: &str, iteration: usize) -> String {
    let clean = |s: &str| -> String {
        s.chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-') {
                    c
                } else {
                    '_'
                }
            })
            .collect()
    };
    format!("const_{}_{}_it{iteration}.csv", clean(scheme), clean(channel))
}

/// Writes `re,im` rows, one per symbol, with a header line.
pub fn constellation_dump(symbols: &[Complex64], path: &Path) -> Result<()> {
    if symbols.is_empty() {
        return Err(Error::Parameter("no symbols to dump".into()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(["re", "im"])?;
    for s in symbols {
        w.write_record([format!("{:e}", s.re), format!("{:e}", s.im)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads back a file written by [`constellation_dump`].
pub fn read_constellation(path: &Path) -> Result<Vec<Complex64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Serde(format!("bad constellation row in {}", path.display())))
        };
        out.push(Complex64::new(parse(0)?, parse(1)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::SimRng;
    use proptest::prelude::*;
    use rand_distr::{Binomial, Distribution};

    #[test]
    fn four_bit_example() {
        let r = count_ber(&[1, 0, 1, 0], &[1, 0, 1, 1], 0).unwrap();
        assert_eq!(r.bit_errors, 1);
        assert_eq!(r.ber, 0.25);
        assert!(!r.fec_pass);
    }

    #[test]
    fn identical_streams_pass() {
        let b = SimRng::new(1).bits(1000);
        let r = count_ber(&b, &b, 10).unwrap();
        assert_eq!(r.ber, 0.0);
        assert_eq!(r.bits_counted, 990);
        assert!(r.fec_pass);
    }

    #[test]
    fn threshold_is_inclusive() {
        let n = 200_000usize;
        let errors = (FEC_THRESHOLD * n as f64).round() as usize;
        let tx = vec![0u8; n];
        let mut rx = tx.clone();
        rx[..errors].iter_mut().for_each(|b| *b = 1);
        let r = count_ber(&tx, &rx, 0).unwrap();
        assert_eq!(r.ber, FEC_THRESHOLD);
        assert!(r.fec_pass);
        rx[errors] = 1;
        assert!(!count_ber(&tx, &rx, 0).unwrap().fec_pass);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(count_ber(&[0, 1], &[0], 0).is_err());
        assert!(count_ber(&[0, 1], &[0, 1], 3).is_err());
    }

    fn naive(tx: &[u8], rx: &[u8], skip: usize) -> u64 {
        let mut e = 0;
        for i in skip..tx.len() {
            if tx[i] != rx[i] {
                e += 1;
            }
        }
        e
    }

    #[test]
    fn exhaustive_short_streams() {
        for len in 0..=8usize {
            for a in 0..(1u32 << len) {
                for b in [0u32, a, !a, a ^ 0b1011] {
                    let tx: Vec<u8> = (0..len).map(|i| ((a >> i) & 1) as u8).collect();
                    let rx: Vec<u8> = (0..len).map(|i| ((b >> i) & 1) as u8).collect();
                    let r = count_ber(&tx, &rx, 0).unwrap();
                    assert_eq!(r.bit_errors, naive(&tx, &rx, 0));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn matches_naive_loop(tx in proptest::collection::vec(0u8..2, 17..400),
                              flips in proptest::collection::vec(any::<bool>(), 400),
                              skip in 0usize..16) {
            let rx: Vec<u8> = tx.iter().zip(&flips).map(|(b, f)| if *f { 1 - b } else { *b }).collect();
            let r = count_ber(&tx, &rx, skip).unwrap();
            prop_assert_eq!(r.bit_errors, naive(&tx, &rx, skip));
            prop_assert!((0.0..=1.0).contains(&r.ber));
        }
    }

    #[test]
    fn wilson_coverage() {
        let (p, n) = (5e-3, 100_000u64);
        let dist = Binomial::new(n, p).unwrap();
        let mut rng = SimRng::new(42);
        let covered = (0..1000)
            .filter(|_| {
                let k = dist.sample(rng.rng_mut());
                let (lo, hi) = wilson_interval(k, n, Z95);
                lo <= p && p <= hi
            })
            .count();
        assert!(covered >= 930, "{covered}");
    }

    #[test]
    fn wilson_valid_at_zero_errors() {
        let (lo, hi) = wilson_interval(0, 1000, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
    }

    #[test]
    fn q_factor_reference_points() {
        // Q = 6 (15.56 dB) at BER ~ 1e-9 for the erfc form
        let ber = 0.5 * statrs::function::erf::erfc(6.0 / 2f64.sqrt());
        assert!((q_factor_db(ber) - 20.0 * 6f64.log10()).abs() < 1e-6);
        assert_eq!(q_factor_db(0.0), f64::INFINITY);
    }

    #[test]
    fn evm_contract() {
        let mut rng = SimRng::new(3);
        let r: Vec<Complex64> = (0..20_000).map(|_| rng.qpsk_symbol()).collect();
        assert_eq!(evm_db(&r, &r).unwrap(), f64::NEG_INFINITY);
        let scaled: Vec<Complex64> = r.iter().map(|v| v * 2.0).collect();
        assert_eq!(evm_db(&scaled, &r).unwrap(), f64::NEG_INFINITY);
        let noisy: Vec<Complex64> = r.iter().map(|v| v + rng.complex_gaussian(0.01)).collect();
        let e = evm_db(&noisy, &r).unwrap();
        assert!((e + 20.0).abs() < 0.2, "{e}");
        let zero = vec![Complex64::new(0.0, 0.0); 4];
        assert!(matches!(evm_db(&zero, &zero), Err(Error::Degenerate(_))));
    }

    #[test]
    fn constellation_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = SimRng::new(9);
        let s: Vec<Complex64> = (0..4).map(|_| rng.qpsk_symbol()).collect();
        let path = dir.path().join(constellation_file_name("upic12", "LP11a-X", 2));
        assert!(path.ends_with("const_upic12_LP11a-X_it2.csv"));
        constellation_dump(&s, &path).unwrap();
        let back = read_constellation(&path).unwrap();
        assert_eq!(back.len(), 4);
        for (a, b) in s.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(constellation_dump(&[], &path).is_err());
    }

    #[test]
    fn noiseless_qpsk_has_four_points() {
        let mut rng = SimRng::new(10);
        let s: Vec<Complex64> = (0..1000).map(|_| rng.qpsk_symbol()).collect();
        let mut pts: Vec<Complex64> = Vec::new();
        for v in &s {
            if !pts.iter().any(|p| (p - v).norm() < 1e-12) {
                pts.push(*v);
            }
        }
        assert_eq!(pts.len(), 4);
        assert!(cluster_variance(&s) < 1e-24);
    }
}
