//! Soft-decision Viterbi decoding over complex samples.
//!
//! Branch metrics are squared Euclidean distances between the received
//! sample and the constellation point of the branch output. In
//! compare-select the lowest predecessor state wins ties.

use num_complex::Complex;
use num_traits::Float;

use crate::constellation::Modulation;
use crate::error::{Error, Result};
use crate::gtcm_code::{CodeSpec, Trellis};

#[derive(Debug, Clone, Copy)]
struct Branch {
    from: u32,
    input: u16,
    output: u16,
}

/// Trellis of a code prepared for decoding on one constellation.
#[derive(Debug, Clone)]
pub struct ViterbiDecoder<T> {
    k: usize,
    memory: usize,
    v: usize,
    num_states: usize,
    fan_in: usize,
    // incoming branches of state t at [t * fan_in .. (t + 1) * fan_in]
    branches: Vec<Branch>,
    points: Vec<Complex<T>>,
}

impl<T: Float> ViterbiDecoder<T> {
    pub fn new(code: &CodeSpec, modulation: &Modulation<T>) -> Result<Self> {
        if modulation.order() != code.num_outputs() {
            return Err(Error::ModulationMismatch {
                points: modulation.order(),
                outputs: code.num_outputs(),
            });
        }
        let trellis = Trellis::new(code);
        let num_states = trellis.num_states();
        let mut incoming: Vec<Vec<Branch>> = vec![Vec::new(); num_states];
        for s in 0..num_states {
            for x in 0..trellis.num_inputs() {
                incoming[trellis.next(s, x)].push(Branch {
                    from: s as u32,
                    input: x as u16,
                    output: trellis.output(s, x) as u16,
                });
            }
        }
        let fan_in = incoming[0].len();
        if incoming.iter().any(|b| b.len() != fan_in) {
            return Err(Error::InvalidCode("irregular trellis".into()));
        }
        Ok(ViterbiDecoder {
            k: code.k(),
            memory: code.memory(),
            v: code.v(),
            num_states,
            fan_in,
            branches: incoming.into_iter().flatten().collect(),
            points: modulation.points().to_vec(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Decision delay of the streaming decoder: `6 v` steps (at least one).
    pub fn default_traceback_depth(&self) -> usize {
        (6 * self.v).max(1)
    }

    fn start_metrics(&self) -> Vec<T> {
        let mut m = vec![T::infinity(); self.num_states];
        m[0] = T::zero();
        m
    }

    /// One add-compare-select step. Writes the winning branch slot of each
    /// state into `survivors`.
    fn acs(
        &self,
        sample: Complex<T>,
        metrics: &[T],
        next: &mut [T],
        survivors: &mut [u16],
        branch_metric: &mut [T],
    ) {
        for (bm, p) in branch_metric.iter_mut().zip(&self.points) {
            *bm = (sample - *p).norm_sqr();
        }
        let mut floor = T::infinity();
        for t in 0..self.num_states {
            let incoming = &self.branches[t * self.fan_in..(t + 1) * self.fan_in];
            let mut best = T::infinity();
            let mut slot = 0u16;
            // branches are ordered by predecessor, so strict < keeps the lowest
            for (j, b) in incoming.iter().enumerate() {
                let cand = metrics[b.from as usize] + branch_metric[b.output as usize];
                if cand < best {
                    best = cand;
                    slot = j as u16;
                }
            }
            next[t] = best;
            survivors[t] = slot;
            floor = floor.min(best);
        }
        if floor.is_finite() {
            for m in next.iter_mut() {
                *m = *m - floor;
            }
        }
    }

    fn best_state(metrics: &[T]) -> usize {
        let mut best = 0;
        for (s, &m) in metrics.iter().enumerate() {
            if m < metrics[best] {
                best = s;
            }
        }
        best
    }

    /// Follows survivors back from `state`; returns inputs oldest first.
    fn traceback(&self, survivors: &[u16], steps: usize, mut state: usize) -> Vec<u16> {
        let mut inputs = vec![0u16; steps];
        for t in (0..steps).rev() {
            let slot = survivors[t * self.num_states + state] as usize;
            let b = self.branches[state * self.fan_in + slot];
            inputs[t] = b.input;
            state = b.from as usize;
        }
        inputs
    }

    fn unpack(&self, inputs: &[u16]) -> Vec<u8> {
        inputs
            .iter()
            .flat_map(|&x| (0..self.k).map(move |i| ((x >> i) & 1) as u8))
            .collect()
    }

    /// Decodes a whole block that started in state 0. With `terminated`
    /// the path is forced to end in state 0 and the tail bits are dropped.
    pub fn decode(&self, received: &[Complex<T>], terminated: bool) -> Result<Vec<u8>> {
        let mut bits = self.decode_between(received, 0, terminated.then_some(0))?;
        if terminated {
            bits.truncate(received.len().saturating_sub(self.memory) * self.k);
        }
        Ok(bits)
    }

    /// Decodes a block starting in `start`; the path ends in `end` when
    /// given, otherwise in the best state. Returns every decided bit.
    pub fn decode_between(&self, received: &[Complex<T>], start: usize, end: Option<usize>) -> Result<Vec<u8>> {
        if received.is_empty() {
            return Err(Error::EmptyInput);
        }
        if start >= self.num_states || end.is_some_and(|e| e >= self.num_states) {
            return Err(Error::InvalidCode(format!("state outside {} states", self.num_states)));
        }
        let steps = received.len();
        let mut metrics = vec![T::infinity(); self.num_states];
        metrics[start] = T::zero();
        let mut next = vec![T::zero(); self.num_states];
        let mut bm = vec![T::zero(); self.points.len()];
        let mut survivors = vec![0u16; steps * self.num_states];
        for (t, &r) in received.iter().enumerate() {
            let row = &mut survivors[t * self.num_states..(t + 1) * self.num_states];
            self.acs(r, &metrics, &mut next, row, &mut bm);
            std::mem::swap(&mut metrics, &mut next);
        }
        let end = end.unwrap_or_else(|| Self::best_state(&metrics));
        Ok(self.unpack(&self.traceback(&survivors, steps, end)))
    }

    /// Total squared distance between `received` and the codeword of `bits`.
    pub fn path_metric(&self, code: &CodeSpec, bits: &[u8], received: &[Complex<T>], terminated: bool) -> Result<T> {
        let symbols = code.encode(bits, terminated)?;
        Ok(symbols
            .iter()
            .zip(received)
            .fold(T::zero(), |acc, (&y, &r)| acc + (r - self.points[y]).norm_sqr()))
    }

    pub fn stream(&self) -> StreamDecoder<'_, T> {
        self.stream_with_depth(self.default_traceback_depth())
    }

    pub fn stream_with_depth(&self, depth: usize) -> StreamDecoder<'_, T> {
        StreamDecoder {
            decoder: self,
            depth: depth.max(1),
            metrics: self.start_metrics(),
            next: vec![T::zero(); self.num_states],
            bm: vec![T::zero(); self.points.len()],
            survivors: Vec::new(),
            steps: 0,
        }
    }
}

/// Continuous decoding with a fixed decision delay.
///
/// Decisions older than the traceback depth are released in chunks of
/// `depth` steps, each traced back from the currently best state.
#[derive(Debug)]
pub struct StreamDecoder<'a, T> {
    decoder: &'a ViterbiDecoder<T>,
    depth: usize,
    metrics: Vec<T>,
    next: Vec<T>,
    bm: Vec<T>,
    survivors: Vec<u16>,
    steps: usize,
}

impl<T: Float> StreamDecoder<'_, T> {
    /// Feeds samples; appends decided bits (k per step) to `out`.
    pub fn push(&mut self, samples: &[Complex<T>], out: &mut Vec<u8>) {
        let ns = self.decoder.num_states;
        for &r in samples {
            let base = self.survivors.len();
            self.survivors.resize(base + ns, 0);
            self.decoder
                .acs(r, &self.metrics, &mut self.next, &mut self.survivors[base..], &mut self.bm);
            std::mem::swap(&mut self.metrics, &mut self.next);
            self.steps += 1;
            if self.steps >= 2 * self.depth {
                self.release(self.steps - self.depth, out);
            }
        }
    }

    fn release(&mut self, count: usize, out: &mut Vec<u8>) {
        let ns = self.decoder.num_states;
        let best = ViterbiDecoder::best_state(&self.metrics);
        let inputs = self.decoder.traceback(&self.survivors, self.steps, best);
        out.extend(self.decoder.unpack(&inputs[..count]));
        self.survivors.drain(..count * ns);
        self.steps -= count;
    }

    /// Releases everything still buffered, tracing back from the best state.
    pub fn finish(mut self, out: &mut Vec<u8>) {
        if self.steps > 0 {
            let steps = self.steps;
            self.release(steps, out);
        }
    }
}
