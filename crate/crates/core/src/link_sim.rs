//! Monte-Carlo bit error rate over an AWGN channel.
//!
//! All constellations have unit average symbol energy, so at a given
//! Eb/N0 the noise density is `N0 = 1 / (Eb/N0 * info_bits_per_symbol)`.
//! A coded scenario carries `k` information bits per target symbol and
//! therefore spends the same energy per information bit as the uncoded
//! source constellation.

use std::fmt::Write as _;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::constellation::{Modulation, ModulationKind};
use crate::error::{Error, Result};
use crate::gtcm_code::{pack_bits, CodeSpec};
use crate::interleave::{is_prime, InterleaveContext, LinearInterleaver};
use crate::viterbi::ViterbiDecoder;

pub const CSV_HEADER: &str = "scenario,ebn0_db,bits,errors,ber";

/// Gaussian tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// One-sided noise density for unit-energy symbols carrying
/// `info_bits_per_symbol` information bits.
pub fn noise_density(ebn0_db: f64, info_bits_per_symbol: f64) -> f64 {
    1.0 / (db_to_linear(ebn0_db) * info_bits_per_symbol)
}

/// Es/N0 in dB for the given Eb/N0 and information rate.
pub fn esn0_db(ebn0_db: f64, info_bits_per_symbol: f64) -> f64 {
    ebn0_db + 10.0 * info_bits_per_symbol.log10()
}

/// Adds complex Gaussian noise of variance `N0 / 2` per dimension.
pub fn awgn<R: Rng + ?Sized>(
    symbols: &[Complex<f64>],
    ebn0_db: f64,
    info_bits_per_symbol: f64,
    rng: &mut R,
) -> Vec<Complex<f64>> {
    let mut out = symbols.to_vec();
    add_noise(&mut out, ebn0_db, info_bits_per_symbol, rng);
    out
}

fn add_noise<R: Rng + ?Sized>(
    samples: &mut [Complex<f64>],
    ebn0_db: f64,
    info_bits_per_symbol: f64,
    rng: &mut R,
) {
    let sigma = (noise_density(ebn0_db, info_bits_per_symbol) / 2.0).sqrt();
    if sigma == 0.0 {
        return;
    }
    for s in samples {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *s += Complex::new(re * sigma, im * sigma);
    }
}

/// Closed-form (Gray-mapped, nearest-neighbour) uncoded bit error rate.
pub fn theoretical_uncoded_ber(kind: ModulationKind, ebn0_db: f64) -> f64 {
    let g = db_to_linear(ebn0_db);
    let b = kind.bits_per_symbol() as f64;
    let m = kind.order() as f64;
    match kind {
        ModulationKind::Bpsk | ModulationKind::Qpsk => q_function((2.0 * g).sqrt()),
        ModulationKind::Psk8 => {
            (2.0 / b) * q_function((2.0 * b * g).sqrt() * (std::f64::consts::PI / m).sin())
        }
        ModulationKind::Qam16 | ModulationKind::Qam64 => {
            (4.0 / b) * (1.0 - 1.0 / m.sqrt()) * q_function((3.0 * b / (m - 1.0) * g).sqrt())
        }
    }
}

fn gray(x: usize) -> usize {
    x ^ (x >> 1)
}

fn gray_inverse(mut g: usize) -> usize {
    let mut x = 0;
    while g != 0 {
        x ^= g;
        g >>= 1;
    }
    x
}

/// Binary-reflected Gray labeling: PSK around the circle, QAM per axis.
pub fn gray_modulation(kind: ModulationKind) -> Modulation<f64> {
    let order = kind.order();
    let labels: Vec<usize> = if kind.is_psk() {
        (0..order).map(gray_inverse).collect()
    } else {
        let half = kind.bits_per_symbol() / 2;
        let side = 1 << half;
        (0..order)
            .map(|s| {
                let col = gray_inverse(s & (side - 1));
                let row = gray_inverse(s >> half);
                row * side + col
            })
            .collect()
    };
    debug_assert!((0..order).all(|s| gray(gray_inverse(s)) == s));
    Modulation::relabeled(kind, &labels).expect("gray labels form a permutation")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// Bits mapped straight onto a (Gray-labelled) constellation.
    Uncoded { modulation: Modulation<f64> },
    /// Bits encoded and sent on `target`, decoded with Viterbi.
    Coded {
        code: CodeSpec,
        target: Modulation<f64>,
        name: String,
    },
}

impl Scenario {
    pub fn uncoded(kind: ModulationKind) -> Self {
        Scenario::Uncoded {
            modulation: gray_modulation(kind),
        }
    }

    pub fn coded(code: CodeSpec, target: Modulation<f64>, name: impl Into<String>) -> Result<Self> {
        if target.order() != code.num_outputs() {
            return Err(Error::ModulationMismatch {
                points: target.order(),
                outputs: code.num_outputs(),
            });
        }
        Ok(Scenario::Coded {
            code,
            target,
            name: name.into(),
        })
    }

    pub fn name(&self) -> String {
        match self {
            Scenario::Uncoded { modulation } => {
                format!("uncoded:{}", modulation.kind().name().to_ascii_lowercase())
            }
            Scenario::Coded { name, .. } => name.clone(),
        }
    }

    pub fn info_bits_per_symbol(&self) -> usize {
        match self {
            Scenario::Uncoded { modulation } => modulation.bits_per_symbol(),
            Scenario::Coded { code, .. } => code.k(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub ebn0_start_db: f64,
    pub ebn0_step_db: f64,
    pub ebn0_stop_db: f64,
    pub bits_per_point: u64,
    pub error_stop: u64,
    pub seed: u64,
    pub scenario: Scenario,
    /// Interleave coded symbols in blocks of this prime size.
    pub interleave_block: Option<u64>,
}

impl SweepConfig {
    pub fn new(scenario: Scenario, ebn0_stop_db: f64) -> Self {
        SweepConfig {
            ebn0_start_db: 0.0,
            ebn0_step_db: 0.5,
            ebn0_stop_db,
            bits_per_point: 10_000_000,
            error_stop: 1000,
            seed: 0,
            scenario,
            interleave_block: None,
        }
    }

    pub fn levels(&self) -> Vec<f64> {
        let count = ((self.ebn0_stop_db - self.ebn0_start_db) / self.ebn0_step_db + 1e-9).floor();
        (0..=count.max(0.0) as usize)
            .map(|i| self.ebn0_start_db + i as f64 * self.ebn0_step_db)
            .collect()
    }

    fn check(&self) -> Result<()> {
        if !(self.ebn0_step_db > 0.0) {
            return Err(Error::InvalidSweep("step must be positive".into()));
        }
        if self.ebn0_stop_db < self.ebn0_start_db {
            return Err(Error::InvalidSweep("stop below start".into()));
        }
        if self.error_stop < 100 {
            return Err(Error::InvalidSweep("error stop must be at least 100".into()));
        }
        if self.bits_per_point == 0 {
            return Err(Error::InvalidSweep("empty bit budget".into()));
        }
        if let Some(m) = self.interleave_block {
            if !is_prime(m) {
                return Err(Error::NotPrime(m));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub ebn0_db: f64,
    pub bits_sent: u64,
    pub bit_errors: u64,
    pub ber: f64,
    /// False when the bit budget ran out before `error_stop` errors.
    pub reached_error_stop: bool,
}

impl BerPoint {
    /// Half-width of the 3-sigma binomial band around a reference rate `p`.
    pub fn three_sigma(&self, p: f64) -> f64 {
        3.0 * (p * (1.0 - p) / self.bits_sent as f64).sqrt()
    }
}

const CHUNK_SYMBOLS: usize = 1 << 13;

struct Channel<'a> {
    ebn0_db: f64,
    rate: f64,
    interleave: Option<(u64, u64)>,
    key: &'a [u8],
}

impl Channel<'_> {
    fn apply(&self, symbols: &[usize], modulation: &Modulation<f64>, rng: &mut ChaCha8Rng, block_no: &mut u64) -> Vec<Complex<f64>> {
        let points = modulation.points();
        let mut tx: Vec<Complex<f64>> = symbols.iter().map(|&s| points[s]).collect();
        let itl = |blk: u64, m: u64, packet: u64| {
            LinearInterleaver::derive(&InterleaveContext {
                key: self.key,
                packet,
                block: blk,
                block_size: m,
            })
            .expect("prime block size checked")
        };
        match self.interleave {
            None => {
                add_noise(&mut tx, self.ebn0_db, self.rate, rng);
                tx
            }
            Some((m, packet)) => {
                let mut out = Vec::with_capacity(tx.len());
                for block in tx.chunks(m as usize) {
                    let il = itl(*block_no, m, packet);
                    *block_no += 1;
                    let mut air = il.permute(block).expect("chunk is a whole number of blocks");
                    add_noise(&mut air, self.ebn0_db, self.rate, rng);
                    out.extend(il.inverse_permute(&air).expect("same length"));
                }
                out
            }
        }
    }
}

fn simulate_point(config: &SweepConfig, index: usize, ebn0_db: f64) -> Result<BerPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let rate = config.scenario.info_bits_per_symbol();
    let block = config.interleave_block.map_or(1, |m| m as usize);
    // last chunk shrinks to the remaining budget, in whole interleaver blocks
    let chunk_bits = |sent: u64| {
        let left = (config.bits_per_point - sent) as usize;
        let symbols = left.div_ceil(rate).min(CHUNK_SYMBOLS).div_ceil(block) * block;
        symbols * rate
    };
    let channel = Channel {
        ebn0_db,
        rate: rate as f64,
        interleave: config.interleave_block.map(|m| (m, index as u64)),
        key: b"link-sim",
    };
    let mut block_no = 0u64;
    let mut sent = 0u64;
    let mut errors = 0u64;

    match &config.scenario {
        Scenario::Uncoded { modulation } => {
            while sent < config.bits_per_point && errors < config.error_stop {
                let bits: Vec<u8> = (0..chunk_bits(sent)).map(|_| rng.gen_range(0..2u8)).collect();
                let symbols: Vec<usize> = bits.chunks(rate).map(pack_bits).collect();
                let rx = channel.apply(&symbols, modulation, &mut rng, &mut block_no);
                for (r, chunk) in rx.iter().zip(bits.chunks(rate)) {
                    let s = modulation.nearest(*r);
                    errors += chunk
                        .iter()
                        .enumerate()
                        .filter(|&(i, &b)| ((s >> i) & 1) as u8 != b)
                        .count() as u64;
                }
                sent += bits.len() as u64;
            }
        }
        Scenario::Coded { code, target, .. } => {
            let decoder = ViterbiDecoder::new(code, target)?;
            let mut stream = decoder.stream();
            let trellis = crate::gtcm_code::Trellis::new(code);
            let mut state = 0usize;
            let mut pending: std::collections::VecDeque<u8> = std::collections::VecDeque::new();
            let mut decided = Vec::new();
            let mut send_chunk = |bits: &[u8],
                                  rng: &mut ChaCha8Rng,
                                  block_no: &mut u64,
                                  stream: &mut crate::viterbi::StreamDecoder<'_, f64>,
                                  decided: &mut Vec<u8>| {
                let symbols: Vec<usize> = bits
                    .chunks(rate)
                    .map(|c| {
                        let x = pack_bits(c);
                        let y = trellis.output(state, x);
                        state = trellis.next(state, x);
                        y
                    })
                    .collect();
                let rx = channel.apply(&symbols, target, rng, block_no);
                stream.push(&rx, decided);
            };
            while sent < config.bits_per_point && errors < config.error_stop {
                let bits: Vec<u8> = (0..chunk_bits(sent)).map(|_| rng.gen_range(0..2u8)).collect();
                pending.extend(&bits);
                send_chunk(&bits, &mut rng, &mut block_no, &mut stream, &mut decided);
                for d in decided.drain(..) {
                    let b = pending.pop_front().expect("decoder never runs ahead");
                    errors += u64::from(b != d);
                }
                sent += bits.len() as u64;
            }
            // flush with uncounted padding so the last counted bits get full depth
            let pad_steps = decoder.default_traceback_depth() * 2;
            let pad_symbols = match config.interleave_block {
                Some(m) => pad_steps.div_ceil(m as usize) * m as usize,
                None => pad_steps,
            };
            let pad: Vec<u8> = (0..pad_symbols * rate).map(|_| rng.gen_range(0..2u8)).collect();
            let counted = pending.len();
            pending.extend(&pad);
            send_chunk(&pad, &mut rng, &mut block_no, &mut stream, &mut decided);
            stream.finish(&mut decided);
            for (i, d) in decided.drain(..).enumerate() {
                let b = pending.pop_front().expect("decoder never runs ahead");
                if i < counted {
                    errors += u64::from(b != d);
                }
            }
        }
    }
    Ok(BerPoint {
        ebn0_db,
        bits_sent: sent,
        bit_errors: errors,
        ber: errors as f64 / sent as f64,
        reached_error_stop: errors >= config.error_stop,
    })
}

/// Runs every Eb/N0 level of the sweep. Levels run in parallel, each on its
/// own random stream derived from `(seed, level index)`.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<BerPoint>> {
    config.check()?;
    config
        .levels()
        .into_par_iter()
        .enumerate()
        .map(|(i, level)| simulate_point(config, i, level))
        .collect()
}

/// Renders points as CSV rows under [`CSV_HEADER`]. With `esn0_rate`
/// (information bits per symbol) an `esn0_db` column is appended.
pub fn sweep_csv(scenario: &str, points: &[BerPoint], header: bool, esn0_rate: Option<f64>) -> String {
    let mut out = String::new();
    if header {
        out.push_str(CSV_HEADER);
        if esn0_rate.is_some() {
            out.push_str(",esn0_db");
        }
        out.push('\n');
    }
    for p in points {
        let _ = write!(
            out,
            "{scenario},{:.2},{},{},{:.6e}",
            p.ebn0_db, p.bits_sent, p.bit_errors, p.ber
        );
        if let Some(rate) = esn0_rate {
            let _ = write!(out, ",{:.2}", esn0_db(p.ebn0_db, rate));
        }
        out.push('\n');
    }
    out
}

/// Eb/N0 where the measured curve first crosses `target`, interpolating
/// log10(BER) linearly between neighbouring points.
pub fn ebn0_at_ber(points: &[BerPoint], target: f64) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        if a.ber >= target && b.ber < target {
            if b.bit_errors == 0 {
                return None;
            }
            let (la, lb, lt) = (a.ber.log10(), b.ber.log10(), target.log10());
            Some(a.ebn0_db + (la - lt) / (la - lb) * (b.ebn0_db - a.ebn0_db))
        } else {
            None
        }
    })
}

/// Eb/N0 where the closed-form curve crosses `target` (bisection).
pub fn theoretical_ebn0_at_ber(kind: ModulationKind, target: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if theoretical_uncoded_ber(kind, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
