//! Reference implementations used only by the tests. They share no code
//! with the library beyond plain data (generator masks, register lengths).

#![allow(dead_code)]

use std::collections::HashMap;

use num_complex::Complex;

/// Straight shift-register encoder: `regs[i]` holds the last inputs of
/// input `i`, newest first.
#[derive(Debug, Clone)]
pub struct RefEncoder {
    pub gen: Vec<Vec<u64>>,
    pub reg_lengths: Vec<usize>,
}

pub type RefState = Vec<Vec<u8>>;

impl RefEncoder {
    pub fn new(gen: &[Vec<u64>], reg_lengths: &[usize]) -> Self {
        RefEncoder {
            gen: gen.to_vec(),
            reg_lengths: reg_lengths.to_vec(),
        }
    }

    pub fn k(&self) -> usize {
        self.gen.len()
    }

    pub fn n(&self) -> usize {
        self.gen[0].len()
    }

    pub fn zero_state(&self) -> RefState {
        self.reg_lengths.iter().map(|&l| vec![0; l]).collect()
    }

    pub fn all_states(&self) -> Vec<RefState> {
        let v: usize = self.reg_lengths.iter().sum();
        (0..1usize << v)
            .map(|mut word| {
                self.reg_lengths
                    .iter()
                    .map(|&l| {
                        (0..l)
                            .map(|_| {
                                let b = (word & 1) as u8;
                                word >>= 1;
                                b
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// `inputs[i]` is the bit on input `i`.
    pub fn step(&self, state: &RefState, inputs: &[u8]) -> (RefState, usize) {
        let mut y = 0usize;
        for j in 0..self.n() {
            let mut bit = 0u8;
            for i in 0..self.k() {
                let g = self.gen[i][j];
                bit ^= (g & 1) as u8 & inputs[i];
                for (l, &past) in state[i].iter().enumerate() {
                    bit ^= ((g >> (l + 1)) & 1) as u8 & past;
                }
            }
            y |= (bit as usize) << j;
        }
        let next = state
            .iter()
            .zip(inputs)
            .map(|(reg, &u)| {
                let mut r = reg.clone();
                if !r.is_empty() {
                    r.pop();
                    r.insert(0, u);
                }
                r
            })
            .collect();
        (next, y)
    }

    /// Bits grouped `k` at a time, then `max(reg)` zero steps.
    pub fn encode_terminated(&self, bits: &[u8]) -> Vec<usize> {
        let mut state = self.zero_state();
        let tail = self.reg_lengths.iter().copied().max().unwrap_or(0);
        let zeros = vec![0u8; self.k()];
        let mut out = Vec::new();
        for group in bits.chunks(self.k()).chain(std::iter::repeat(&zeros[..]).take(tail)) {
            let (next, y) = self.step(&state, group);
            out.push(y);
            state = next;
        }
        out
    }
}

/// Unit-energy constellation points computed from first principles.
pub fn ref_points(name: &str) -> Vec<Complex<f64>> {
    let psk = |m: usize| {
        (0..m)
            .map(|s| Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * s as f64 / m as f64))
            .collect()
    };
    let qam = |m: usize| {
        let side = (m as f64).sqrt() as usize;
        let raw: Vec<Complex<f64>> = (0..m)
            .map(|s| {
                Complex::new(
                    (2 * (s % side)) as f64 - (side - 1) as f64,
                    (2 * (s / side)) as f64 - (side - 1) as f64,
                )
            })
            .collect();
        let e = raw.iter().map(|p| p.norm_sqr()).sum::<f64>() / m as f64;
        raw.into_iter().map(|p| p / e.sqrt()).collect()
    };
    match name {
        "BPSK" => psk(2),
        "QPSK" => psk(4),
        "8-PSK" => psk(8),
        "16-QAM" => qam(16),
        "64-QAM" => qam(64),
        other => panic!("no reference constellation {other}"),
    }
}

fn input_bits(x: usize, k: usize) -> Vec<u8> {
    (0..k).map(|i| ((x >> i) & 1) as u8).collect()
}

/// Minimum squared Euclidean distance over all pairs of paths that leave a
/// common state with different inputs and merge again within `max_depth`
/// steps. Depth-first branch and bound over path pairs.
pub fn brute_force_free_distance(enc: &RefEncoder, points: &[Complex<f64>], max_depth: usize) -> f64 {
    let k = enc.k();
    let inputs: Vec<Vec<u8>> = (0..1usize << k).map(|x| input_bits(x, k)).collect();
    let d = |a: usize, b: usize| (points[a] - points[b]).norm_sqr();
    let mut best = f64::INFINITY;
    // cheapest distance seen for a state pair at or before a depth
    let mut seen: HashMap<(RefState, RefState), Vec<(usize, f64)>> = HashMap::new();

    fn dominated(seen: &HashMap<(RefState, RefState), Vec<(usize, f64)>>, key: &(RefState, RefState), depth: usize, dist: f64) -> bool {
        seen.get(key)
            .is_some_and(|v| v.iter().any(|&(dd, ds)| dd <= depth && ds <= dist))
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        enc: &RefEncoder,
        inputs: &[Vec<u8>],
        d: &dyn Fn(usize, usize) -> f64,
        a: RefState,
        b: RefState,
        dist: f64,
        depth: usize,
        max_depth: usize,
        best: &mut f64,
        seen: &mut HashMap<(RefState, RefState), Vec<(usize, f64)>>,
    ) {
        if dist >= *best {
            return;
        }
        if a == b {
            *best = dist;
            return;
        }
        if depth == max_depth {
            return;
        }
        let key = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
        if dominated(seen, &key, depth, dist) {
            return;
        }
        seen.entry(key).or_default().push((depth, dist));
        for u in inputs {
            for w in inputs {
                let (na, ya) = enc.step(&a, u);
                let (nb, yb) = enc.step(&b, w);
                dfs(enc, inputs, d, na, nb, dist + d(ya, yb), depth + 1, max_depth, best, seen);
            }
        }
    }

    for s in enc.all_states() {
        for (xi, u) in inputs.iter().enumerate() {
            for w in &inputs[xi + 1..] {
                let (na, ya) = enc.step(&s, u);
                let (nb, yb) = enc.step(&s, w);
                dfs(enc, &inputs, &d, na, nb, d(ya, yb), 1, max_depth, &mut best, &mut seen);
            }
        }
    }
    best
}

/// Smallest squared distance between `received` and any terminated
/// codeword of `n_bits` information bits, by enumeration.
pub fn exhaustive_ml_metric(enc: &RefEncoder, points: &[Complex<f64>], n_bits: usize, received: &[Complex<f64>]) -> f64 {
    (0..1usize << n_bits)
        .map(|word| {
            let bits: Vec<u8> = (0..n_bits).map(|i| ((word >> i) & 1) as u8).collect();
            enc.encode_terminated(&bits)
                .iter()
                .zip(received)
                .map(|(&y, r)| (r - points[y]).norm_sqr())
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}
