//! Squared free Euclidean distance of a code over a target constellation.
//!
//! The search keeps, for every pair of states, the smallest accumulated
//! squared distance of two equal-length paths that left a common state and
//! end in that pair. Pairs are extended sweep by sweep; a pair is expanded
//! again only after its distance improved, and only while it is below the
//! best merge distance found so far. The run ends once no pair is active.

use num_traits::{Float, FloatConst};

use crate::constellation::Modulation;
use crate::error::{Error, Result};
use crate::gtcm_code::{CodeSpec, Trellis};

/// Largest constraint length the pairwise table is allocated for.
pub const MAX_DISTANCE_CONSTRAINT: usize = 12;

/// Pairwise state distances, stored once per unordered pair.
#[derive(Debug, Clone)]
pub struct StateDistanceTable<T> {
    num_states: usize,
    dist: Vec<T>,
}

impl<T: Float> StateDistanceTable<T> {
    pub fn new(num_states: usize) -> Self {
        StateDistanceTable {
            num_states,
            dist: vec![T::infinity(); num_states * num_states],
        }
    }

    #[inline]
    fn index(&self, s: usize, t: usize) -> usize {
        if s <= t {
            s * self.num_states + t
        } else {
            t * self.num_states + s
        }
    }

    /// `D[s, t]`; the same entry backs `D[t, s]`.
    #[inline]
    pub fn get(&self, s: usize, t: usize) -> T {
        self.dist[self.index(s, t)]
    }

    /// Lowers `D[s, t]` to `d` if that is an improvement.
    #[inline]
    pub fn relax(&mut self, s: usize, t: usize, d: T) -> bool {
        let idx = self.index(s, t);
        if d < self.dist[idx] {
            self.dist[idx] = d;
            true
        } else {
            false
        }
    }

    /// One update step: extends the pair `(s, x)`, `(s2, x2)` by a
    /// transition each. When `s == s2` the paths diverge here and the
    /// candidate distance is the branch distance alone, otherwise the
    /// stored `D[s, s2]` is added. A merge below `d_free` lowers it.
    #[allow(clippy::too_many_arguments)]
    pub fn update_distance(
        &mut self,
        trellis: &Trellis,
        modulation: &Modulation<T>,
        s: usize,
        x: usize,
        s2: usize,
        x2: usize,
        d_free: &mut T,
    ) -> bool {
        let (t, y) = (trellis.next(s, x), trellis.output(s, x));
        let (t2, y2) = (trellis.next(s2, x2), trellis.output(s2, x2));
        let branch = (modulation.points()[y] - modulation.points()[y2]).norm_sqr();
        let d = if s == s2 { branch } else { branch + self.get(s, s2) };
        let changed = self.relax(t, t2, d);
        if changed && t == t2 && d < *d_free {
            *d_free = d;
        }
        changed
    }
}

/// Result of [`compute_distance`].
#[derive(Debug, Clone, PartialEq)]
pub struct FreeDistanceResult<T> {
    /// Squared free distance, or the first merge distance at or below the
    /// pruning bound when `pruned` is set.
    pub d_sq_free: T,
    /// Path length at which `d_sq_free` was reached.
    pub merge_depth: usize,
    /// Stopped early because the distance fell to the pruning bound.
    pub pruned: bool,
    /// Main-loop sweeps executed.
    pub sweeps: usize,
    /// Smallest active pair distance at the start of each sweep.
    pub frontier_minima: Vec<T>,
}

/// Computes the squared free distance of `code` on `modulation`.
///
/// `d_best` is a pruning bound: as soon as a merge at or below it is found
/// the computation stops and reports `pruned`. Pass zero (or a negative
/// value) for the exact distance. The code should be validated first; a
/// catastrophic code trips the sweep cap of `10 v + 50`.
pub fn compute_distance<T: Float + FloatConst>(
    code: &CodeSpec,
    modulation: &Modulation<T>,
    d_best: T,
) -> Result<FreeDistanceResult<T>> {
    if modulation.order() != code.num_outputs() {
        return Err(Error::ModulationMismatch {
            points: modulation.order(),
            outputs: code.num_outputs(),
        });
    }
    let v = code.v();
    if v > MAX_DISTANCE_CONSTRAINT {
        return Err(Error::InvalidCode(format!(
            "constraint length {v} above the distance search limit {MAX_DISTANCE_CONSTRAINT}"
        )));
    }
    let trellis = Trellis::new(code);
    let num_states = trellis.num_states();
    let num_inputs = trellis.num_inputs();
    let num_outputs = trellis.num_outputs();
    let branch = modulation.distance_table();
    let cap = 10 * v + 50;

    let mut table = StateDistanceTable::<T>::new(num_states);
    let mut queued = vec![false; num_states * num_states];
    let mut changed: Vec<(u32, u32)> = Vec::new();
    let mut d_free = T::infinity();
    let mut merge_depth = 0;

    let done = |d_free: T, depth, sweeps, minima| {
        Ok(FreeDistanceResult {
            d_sq_free: d_free,
            merge_depth: depth,
            pruned: true,
            sweeps,
            frontier_minima: minima,
        })
    };

    // paths diverge from a common state
    for s in 0..num_states {
        let (next, out) = trellis.row(s);
        for x in 0..num_inputs {
            for x2 in x + 1..num_inputs {
                let (t, t2) = (next[x] as usize, next[x2] as usize);
                let d = branch[out[x] as usize * num_outputs + out[x2] as usize];
                if t == t2 {
                    if d < d_free {
                        d_free = d;
                        merge_depth = 1;
                    }
                } else if d < d_free && table.relax(t, t2, d) {
                    let idx = table.index(t, t2);
                    if !queued[idx] {
                        queued[idx] = true;
                        changed.push((t.min(t2) as u32, t.max(t2) as u32));
                    }
                }
            }
        }
        if d_free <= d_best {
            return done(d_free, merge_depth, 0, Vec::new());
        }
    }

    let mut frontier_minima = Vec::new();
    let mut active: Vec<(u32, u32, T)> = Vec::new();
    let mut sweeps = 0;
    loop {
        active.clear();
        for &(s, s2) in &changed {
            let idx = table.index(s as usize, s2 as usize);
            queued[idx] = false;
            let d = table.dist[idx];
            if d < d_free {
                active.push((s, s2, d));
            }
        }
        changed.clear();
        if active.is_empty() {
            break;
        }
        if sweeps == cap {
            return Err(Error::IterationCap(cap));
        }
        sweeps += 1;
        let depth = sweeps + 1;
        frontier_minima.push(
            active
                .iter()
                .fold(T::infinity(), |m, &(_, _, d)| m.min(d)),
        );

        for &(s, s2, base) in &active {
            if base >= d_free {
                continue;
            }
            let (next_a, out_a) = trellis.row(s as usize);
            let (next_b, out_b) = trellis.row(s2 as usize);
            for x in 0..num_inputs {
                let t = next_a[x] as usize;
                let row = &branch[out_a[x] as usize * num_outputs..][..num_outputs];
                for x2 in 0..num_inputs {
                    let t2 = next_b[x2] as usize;
                    let d = base + row[out_b[x2] as usize];
                    if d >= d_free {
                        continue;
                    }
                    if t == t2 {
                        d_free = d;
                        merge_depth = depth;
                    } else if table.relax(t, t2, d) {
                        let idx = table.index(t, t2);
                        if !queued[idx] {
                            queued[idx] = true;
                            changed.push((t.min(t2) as u32, t.max(t2) as u32));
                        }
                    }
                }
            }
            if d_free <= d_best {
                return done(d_free, merge_depth, sweeps, frontier_minima);
            }
        }
    }

    Ok(FreeDistanceResult {
        d_sq_free: d_free,
        merge_depth,
        pruned: false,
        sweeps,
        frontier_minima,
    })
}

/// Asymptotic coding gain in dB of a squared free distance over the
/// uncoded `source` constellation.
pub fn coding_gain_db<T: Float>(d_sq_free: T, source: &Modulation<T>) -> Result<T> {
    if !(d_sq_free > T::zero()) {
        return Err(Error::NonPositiveDistance(d_sq_free.to_f64().unwrap_or(f64::NAN)));
    }
    let ten = T::from(10.0).expect("10 fits any float");
    Ok(ten * (d_sq_free / source.min_sq_distance()).log10())
}
