//! Randomized and exhaustive search for good codes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constellation::{Modulation, ModulationKind};
use crate::error::{Error, Result};
use crate::free_distance::{coding_gain_db, compute_distance};
use crate::gtcm_code::{CodeSpec, Validity};

/// Default cap on the exhaustive search space, in bits of generator coefficients.
pub const FULL_SEARCH_MAX_BITS: u32 = 24;

/// Trial budget used when none is given.
pub fn default_trials(v: usize) -> u64 {
    if v <= 6 {
        100_000
    } else {
        1_000_000
    }
}

/// Splits `v` register cells over `k` inputs as evenly as possible, the
/// remainder going to the lower-indexed inputs.
pub fn even_reg_lengths(v: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| v / k + usize::from(i < v % k)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpec {
    pub k: usize,
    pub n: usize,
    pub reg_lengths: Vec<usize>,
    pub target: ModulationKind,
    pub trials: u64,
    pub seed: u64,
    /// Stop distance computations early once a code cannot beat the best so far.
    pub prune: bool,
}

impl SearchSpec {
    /// A spec for upgrading `source` to `target` with total constraint length `v`.
    pub fn new(source: ModulationKind, target: ModulationKind, v: usize) -> Self {
        let k = source.bits_per_symbol();
        SearchSpec {
            k,
            n: target.bits_per_symbol(),
            reg_lengths: even_reg_lengths(v, k),
            target,
            trials: default_trials(v),
            seed: 0,
            prune: true,
        }
    }

    pub fn with_reg_lengths(mut self, reg_lengths: Vec<usize>) -> Self {
        self.reg_lengths = reg_lengths;
        self
    }

    pub fn with_trials(mut self, trials: u64) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_prune(mut self, prune: bool) -> Self {
        self.prune = prune;
        self
    }

    pub fn v(&self) -> usize {
        self.reg_lengths.iter().sum()
    }

    fn check(&self) -> Result<(Modulation<f64>, Modulation<f64>)> {
        if self.trials == 0 {
            return Err(Error::InvalidCode("trial budget must be at least 1".into()));
        }
        if self.target.bits_per_symbol() != self.n {
            return Err(Error::ModulationMismatch {
                points: self.target.order(),
                outputs: 1 << self.n,
            });
        }
        if self.reg_lengths.len() != self.k || self.k == 0 || self.k >= self.n {
            return Err(Error::InvalidCode(format!(
                "k={} n={} with {} register lengths",
                self.k,
                self.n,
                self.reg_lengths.len()
            )));
        }
        let source = ModulationKind::from_bits(self.k).ok_or_else(|| {
            Error::UnsupportedModulation(format!("{}-bit source constellation", self.k))
        })?;
        Ok((Modulation::new(source), Modulation::new(self.target)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best_code: CodeSpec,
    pub d_sq_free: f64,
    pub beta_db: f64,
    pub trials_run: u64,
    pub valid_count: u64,
    pub pruned_count: u64,
}

/// Draws every coefficient of every generator polynomial independently and
/// uniformly from {0, 1}; `g_ij` has degree at most `reg_lengths[i]`.
pub fn generate_code<R: Rng + ?Sized>(
    k: usize,
    n: usize,
    reg_lengths: &[usize],
    rng: &mut R,
) -> Result<CodeSpec> {
    let gen = reg_lengths
        .iter()
        .map(|&len| {
            (0..n)
                .map(|_| {
                    (0..=len).fold(0u64, |acc, l| acc | (u64::from(rng.gen::<bool>()) << l))
                })
                .collect()
        })
        .collect();
    CodeSpec::new(k, n, reg_lengths.to_vec(), gen)
}

struct Best {
    code: Option<CodeSpec>,
    d: f64,
    valid: u64,
    pruned: u64,
}

impl Best {
    fn new() -> Self {
        Best {
            code: None,
            d: 0.0,
            valid: 0,
            pruned: 0,
        }
    }

    fn consider(&mut self, code: CodeSpec, target: &Modulation<f64>, prune: bool) -> Result<()> {
        if code.validate() != Validity::Valid {
            return Ok(());
        }
        self.valid += 1;
        let bound = if prune { self.d } else { 0.0 };
        let r = compute_distance(&code, target, bound)?;
        if r.pruned {
            self.pruned += 1;
        } else if r.d_sq_free > self.d {
            self.d = r.d_sq_free;
            self.code = Some(code);
        }
        Ok(())
    }

    fn finish(self, trials: u64, source: &Modulation<f64>) -> Result<SearchResult> {
        let best_code = self.code.ok_or(Error::NoValidCode(trials))?;
        Ok(SearchResult {
            beta_db: coding_gain_db(self.d, source)?,
            best_code,
            d_sq_free: self.d,
            trials_run: trials,
            valid_count: self.valid,
            pruned_count: self.pruned,
        })
    }
}

/// Tries `spec.trials` random codes and keeps the one with the largest
/// squared free distance. Deterministic for a fixed seed.
pub fn random_search(spec: &SearchSpec) -> Result<SearchResult> {
    let (source, target) = spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut best = Best::new();
    for _ in 0..spec.trials {
        let code = generate_code(spec.k, spec.n, &spec.reg_lengths, &mut rng)?;
        best.consider(code, &target, spec.prune)?;
    }
    best.finish(spec.trials, &source)
}

/// Enumerates every generator matrix for the spec's register lengths.
/// `spec.trials` and `spec.seed` are ignored.
pub fn full_search(spec: &SearchSpec, max_bits: u32) -> Result<SearchResult> {
    let (source, target) = spec.check()?;
    let widths: Vec<usize> = spec
        .reg_lengths
        .iter()
        .flat_map(|&len| std::iter::repeat(len + 1).take(spec.n))
        .collect();
    let bits: u32 = widths.iter().sum::<usize>() as u32;
    if bits > max_bits {
        return Err(Error::SearchSpaceTooLarge { bits, cap: max_bits });
    }
    let mut best = Best::new();
    let total = 1u64 << bits;
    for word in 0..total {
        let mut rest = word;
        let mut masks = widths.iter().map(|&w| {
            let m = rest & ((1 << w) - 1);
            rest >>= w;
            m
        });
        let gen: Vec<Vec<u64>> = (0..spec.k)
            .map(|_| masks.by_ref().take(spec.n).collect())
            .collect();
        let code = CodeSpec::new(spec.k, spec.n, spec.reg_lengths.clone(), gen)?;
        best.consider(code, &target, spec.prune)?;
    }
    best.finish(total, &source)
}
