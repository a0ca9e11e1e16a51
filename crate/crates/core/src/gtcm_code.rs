//! Feed-forward rate k/n convolutional codes.
//!
//! Input `i` feeds a shift register of `reg_lengths[i]` cells. Bit `l` of the
//! mask `gen[i][j]` taps input `i` delayed by `l` steps into output `j`
//! (bit 0 is the current input). Output bit `j` carries weight `2^j` in the
//! emitted symbol. The state packs the registers end to end, register `i`
//! starting at bit `sum(reg_lengths[..i])`, newest bit lowest.

use std::fmt;

use crate::error::{Error, Result};

/// Outcome of [`CodeSpec::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validity {
    Valid,
    Catastrophic,
    NonEquiprobable,
}

/// A rate k/n feed-forward convolutional code.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CodeSpec {
    k: usize,
    n: usize,
    reg_lengths: Vec<usize>,
    gen: Vec<Vec<u64>>,
    offsets: Vec<usize>,
}

/// Largest total register length accepted.
pub const MAX_CONSTRAINT: usize = 24;

impl CodeSpec {
    pub fn new(k: usize, n: usize, reg_lengths: Vec<usize>, gen: Vec<Vec<u64>>) -> Result<Self> {
        if k == 0 || k >= n {
            return Err(Error::InvalidCode(format!("need 1 <= k < n, got k={k} n={n}")));
        }
        if n > 8 {
            return Err(Error::InvalidCode(format!("n={n} exceeds 8 output bits")));
        }
        if reg_lengths.len() != k {
            return Err(Error::InvalidCode(format!(
                "{} register lengths given for k={k}",
                reg_lengths.len()
            )));
        }
        let v: usize = reg_lengths.iter().sum();
        if v > MAX_CONSTRAINT {
            return Err(Error::InvalidCode(format!("constraint length {v} too large")));
        }
        if gen.len() != k || gen.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidCode(format!("generator must be {k}x{n}")));
        }
        for (i, row) in gen.iter().enumerate() {
            for (j, &mask) in row.iter().enumerate() {
                if mask >> (reg_lengths[i] + 1) != 0 {
                    return Err(Error::InvalidCode(format!(
                        "g[{i}][{j}] = {mask:o} has degree above v_{i} = {}",
                        reg_lengths[i]
                    )));
                }
            }
        }
        let offsets = reg_lengths
            .iter()
            .scan(0, |acc, &len| {
                let off = *acc;
                *acc += len;
                Some(off)
            })
            .collect();
        Ok(CodeSpec {
            k,
            n,
            reg_lengths,
            gen,
            offsets,
        })
    }

    /// Parses the octal matrix text used in the code tables, e.g.
    /// `"(0 0 1) (2 5 1)"`. Parentheses are optional when `k = 1`.
    pub fn parse(text: &str, k: usize, n: usize, reg_lengths: Vec<usize>) -> Result<Self> {
        let gen = parse_octal_rows(text)?;
        if gen.len() != k {
            return Err(Error::MalformedGenerator(format!(
                "expected {k} rows, found {}",
                gen.len()
            )));
        }
        if let Some(row) = gen.iter().find(|row| row.len() != n) {
            return Err(Error::MalformedGenerator(format!(
                "expected {n} columns, found {}",
                row.len()
            )));
        }
        for (row, &len) in gen.iter().zip(&reg_lengths) {
            if row.iter().any(|&m| m >> (len + 1) != 0) {
                return Err(Error::MalformedGenerator(format!(
                    "coefficient degree exceeds register length {len}"
                )));
            }
        }
        Self::new(k, n, reg_lengths, gen)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn reg_lengths(&self) -> &[usize] {
        &self.reg_lengths
    }

    pub fn generator(&self) -> &[Vec<u64>] {
        &self.gen
    }

    /// Total constraint length.
    pub fn v(&self) -> usize {
        self.reg_lengths.iter().sum()
    }

    pub fn num_states(&self) -> usize {
        1 << self.v()
    }

    pub fn num_inputs(&self) -> usize {
        1 << self.k
    }

    pub fn num_outputs(&self) -> usize {
        1 << self.n
    }

    /// Longest register; the number of zero steps that flush the encoder.
    pub fn memory(&self) -> usize {
        self.reg_lengths.iter().copied().max().unwrap_or(0)
    }

    /// One encoder transition: returns `(next_state, output_symbol)`.
    pub fn step(&self, state: usize, x: usize) -> (usize, usize) {
        debug_assert!(x < self.num_inputs() && state < self.num_states());
        let mut next = 0;
        let mut y = 0;
        for i in 0..self.k {
            let len = self.reg_lengths[i];
            let reg = (state >> self.offsets[i]) & ((1 << len) - 1);
            let word = ((reg << 1) | ((x >> i) & 1)) as u64;
            for (j, &mask) in self.gen[i].iter().enumerate() {
                y ^= (((mask & word).count_ones() & 1) as usize) << j;
            }
            next |= (word as usize & ((1 << len) - 1)) << self.offsets[i];
        }
        (next, y)
    }

    /// Encodes `bits` (one `0`/`1` per entry) starting from the zero state.
    /// Each group of `k` bits forms one input, bit `i` of the group feeding
    /// input `i`. With `terminate`, [`memory`](Self::memory) zero steps
    /// are appended so the encoder ends in state 0.
    pub fn encode(&self, bits: &[u8], terminate: bool) -> Result<Vec<usize>> {
        if bits.len() % self.k != 0 {
            return Err(Error::BitLengthNotMultiple {
                len: bits.len(),
                k: self.k,
            });
        }
        let tail = if terminate { self.memory() } else { 0 };
        let mut out = Vec::with_capacity(bits.len() / self.k + tail);
        let mut state = 0;
        let inputs = bits
            .chunks(self.k)
            .map(pack_bits)
            .chain(std::iter::repeat(0).take(tail));
        for x in inputs {
            let (next, y) = self.step(state, x);
            out.push(y);
            state = next;
        }
        Ok(out)
    }

    /// Encodes `bits` from an arbitrary `start` state without termination;
    /// returns the symbols and the final state.
    pub fn encode_from(&self, start: usize, bits: &[u8]) -> Result<(Vec<usize>, usize)> {
        if start >= self.num_states() {
            return Err(Error::InvalidCode(format!(
                "start state {start} outside {} states",
                self.num_states()
            )));
        }
        if bits.len() % self.k != 0 {
            return Err(Error::BitLengthNotMultiple {
                len: bits.len(),
                k: self.k,
            });
        }
        let mut state = start;
        let out = bits
            .chunks(self.k)
            .map(|c| {
                let (next, y) = self.step(state, pack_bits(c));
                state = next;
                y
            })
            .collect();
        Ok((out, state))
    }

    /// Checks the code is non-catastrophic and equiprobable.
    pub fn validate(&self) -> Validity {
        let trellis = Trellis::new(self);
        if trellis.has_zero_output_cycle() {
            Validity::Catastrophic
        } else if !trellis.is_equiprobable() {
            Validity::NonEquiprobable
        } else {
            Validity::Valid
        }
    }

    /// The generator matrix in the table notation, e.g. `(0 0 1) (2 5 1)`.
    pub fn to_octal(&self) -> String {
        self.gen
            .iter()
            .map(|row| {
                let cols: Vec<String> = row.iter().map(|m| format!("{m:o}")).collect();
                format!("({})", cols.join(" "))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for CodeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_octal())
    }
}

pub(crate) fn pack_bits(bits: &[u8]) -> usize {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | (((b & 1) as usize) << i))
}

/// Splits the octal table notation into rows of masks.
pub fn parse_octal_rows(text: &str) -> Result<Vec<Vec<u64>>> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::MalformedGenerator("empty generator".into()));
    }
    let groups: Vec<&str> = if text.contains('(') || text.contains(')') {
        let mut groups = Vec::new();
        let mut rest = text;
        loop {
            rest = rest.trim_start();
            if rest.is_empty() {
                break;
            }
            let body = rest
                .strip_prefix('(')
                .ok_or_else(|| Error::MalformedGenerator(format!("expected '(' at {rest:?}")))?;
            let end = body
                .find(')')
                .ok_or_else(|| Error::MalformedGenerator("unbalanced parenthesis".into()))?;
            groups.push(&body[..end]);
            rest = &body[end + 1..];
        }
        groups
    } else {
        vec![text]
    };
    groups
        .into_iter()
        .map(|g| {
            let row: Vec<u64> = g
                .split_whitespace()
                .map(|tok| {
                    u64::from_str_radix(tok, 8)
                        .map_err(|_| Error::MalformedGenerator(format!("bad octal number {tok:?}")))
                })
                .collect::<Result<_>>()?;
            if row.is_empty() {
                return Err(Error::MalformedGenerator("empty row".into()));
            }
            Ok(row)
        })
        .collect()
}

/// Precomputed transitions of a code: `next[s * 2^k + x]` and `output[..]`.
#[derive(Debug, Clone)]
pub struct Trellis {
    num_states: usize,
    num_inputs: usize,
    num_outputs: usize,
    next: Vec<u32>,
    output: Vec<u16>,
}

impl Trellis {
    pub fn new(code: &CodeSpec) -> Self {
        let num_states = code.num_states();
        let num_inputs = code.num_inputs();
        let mut next = Vec::with_capacity(num_states * num_inputs);
        let mut output = Vec::with_capacity(num_states * num_inputs);
        for s in 0..num_states {
            for x in 0..num_inputs {
                let (t, y) = code.step(s, x);
                next.push(t as u32);
                output.push(y as u16);
            }
        }
        Trellis {
            num_states,
            num_inputs,
            num_outputs: code.num_outputs(),
            next,
            output,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    #[inline]
    pub fn next(&self, state: usize, x: usize) -> usize {
        self.next[state * self.num_inputs + x] as usize
    }

    #[inline]
    pub fn output(&self, state: usize, x: usize) -> usize {
        self.output[state * self.num_inputs + x] as usize
    }

    /// Transitions out of `state` as `(next, output)` pairs indexed by input.
    #[inline]
    pub(crate) fn row(&self, state: usize) -> (&[u32], &[u16]) {
        let lo = state * self.num_inputs;
        let hi = lo + self.num_inputs;
        (&self.next[lo..hi], &self.output[lo..hi])
    }

    /// Every output symbol occurs equally often over all (state, input) pairs.
    pub fn is_equiprobable(&self) -> bool {
        let pairs = self.num_states * self.num_inputs;
        if pairs < self.num_outputs {
            return false;
        }
        let mut hist = vec![0usize; self.num_outputs];
        for &y in &self.output {
            hist[y as usize] += 1;
        }
        let expected = pairs / self.num_outputs;
        hist.iter().all(|&c| c == expected)
    }

    /// True when the zero-output transitions, minus the zero-state
    /// zero-input self loop, contain a cycle.
    pub fn has_zero_output_cycle(&self) -> bool {
        // iterative three-colour DFS
        const WHITE: u8 = 0;
        const GREY: u8 = 1;
        const BLACK: u8 = 2;
        let mut colour = vec![WHITE; self.num_states];
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for root in 0..self.num_states {
            if colour[root] != WHITE {
                continue;
            }
            colour[root] = GREY;
            stack.push((root, 0));
            while let Some(&mut (s, ref mut x)) = stack.last_mut() {
                if *x == self.num_inputs {
                    colour[s] = BLACK;
                    stack.pop();
                    continue;
                }
                let input = *x;
                *x += 1;
                if (s == 0 && input == 0) || self.output(s, input) != 0 {
                    continue;
                }
                let t = self.next(s, input);
                match colour[t] {
                    GREY => return true,
                    WHITE => {
                        colour[t] = GREY;
                        stack.push((t, 0));
                    }
                    _ => {}
                }
            }
        }
        false
    }
}
