//! Constellations used as source and target modulations.
//!
//! All constellations are scaled to unit average symbol energy. m-PSK
//! places symbol `s` at `exp(j 2 pi s / m)`. Square m-QAM places symbol 0
//! at the bottom-left corner, the low-order half of the label selects the
//! column and the high-order half selects the row.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use num_traits::{Float, FloatConst};

use crate::error::{Error, Result};

/// The five supported constellations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModulationKind {
    Bpsk,
    Qpsk,
    Psk8,
    Qam16,
    Qam64,
}

impl ModulationKind {
    pub const ALL: [ModulationKind; 5] = [
        ModulationKind::Bpsk,
        ModulationKind::Qpsk,
        ModulationKind::Psk8,
        ModulationKind::Qam16,
        ModulationKind::Qam64,
    ];

    pub fn bits_per_symbol(self) -> usize {
        match self {
            ModulationKind::Bpsk => 1,
            ModulationKind::Qpsk => 2,
            ModulationKind::Psk8 => 3,
            ModulationKind::Qam16 => 4,
            ModulationKind::Qam64 => 6,
        }
    }

    pub fn order(self) -> usize {
        1 << self.bits_per_symbol()
    }

    pub fn is_psk(self) -> bool {
        matches!(
            self,
            ModulationKind::Bpsk | ModulationKind::Qpsk | ModulationKind::Psk8
        )
    }

    /// The constellation carrying `bits` bits per symbol, if one is supported.
    pub fn from_bits(bits: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.bits_per_symbol() == bits)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModulationKind::Bpsk => "BPSK",
            ModulationKind::Qpsk => "QPSK",
            ModulationKind::Psk8 => "8-PSK",
            ModulationKind::Qam16 => "16-QAM",
            ModulationKind::Qam64 => "64-QAM",
        }
    }
}

impl fmt::Display for ModulationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModulationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "bpsk" | "2psk" => Ok(ModulationKind::Bpsk),
            "qpsk" | "4psk" => Ok(ModulationKind::Qpsk),
            "8psk" | "psk8" => Ok(ModulationKind::Psk8),
            "16qam" | "qam16" => Ok(ModulationKind::Qam16),
            "64qam" | "qam64" => Ok(ModulationKind::Qam64),
            _ => Err(Error::UnsupportedModulation(s.to_string())),
        }
    }
}

pub(crate) fn cast<T: Float>(x: f64) -> T {
    T::from(x).expect("f64 constant representable in scalar type")
}

/// A constellation with its symbol-to-point map.
#[derive(Debug, Clone, PartialEq)]
pub struct Modulation<T = f64> {
    kind: ModulationKind,
    points: Vec<Complex<T>>,
    min_sq_distance: T,
}

impl<T: Float + FloatConst> Modulation<T> {
    /// Builds one of the supported constellations with the natural labeling.
    pub fn new(kind: ModulationKind) -> Self {
        let order = kind.order();
        let points: Vec<Complex<T>> = if kind.is_psk() {
            let m: T = cast(order as f64);
            (0..order)
                .map(|s| {
                    let phase = T::TAU() * cast(s as f64) / m;
                    if s == 0 {
                        Complex::new(T::one(), T::zero())
                    } else {
                        Complex::from_polar(T::one(), phase)
                    }
                })
                .map(|p| snap_axis(p))
                .collect()
        } else {
            let side = (order as f64).sqrt() as usize;
            let corner = -((side - 1) as f64);
            // unnormalized grid has pitch 2; average energy 2(m-1)/3
            let energy = 2.0 * (order as f64 - 1.0) / 3.0;
            let scale: T = cast(1.0 / energy.sqrt());
            (0..order)
                .map(|s| {
                    let low = s % side;
                    let high = s / side;
                    let x: T = cast(corner + 2.0 * low as f64);
                    let y: T = cast(corner + 2.0 * high as f64);
                    Complex::new(x * scale, y * scale)
                })
                .collect()
        };
        let min_sq_distance = brute_min_sq_distance(&points);
        Modulation {
            kind,
            points,
            min_sq_distance,
        }
    }

    /// Builds a constellation by name (`"qpsk"`, `"16-QAM"`, ...).
    pub fn build(name: &str) -> Result<Self> {
        Ok(Self::new(name.parse()?))
    }

    /// Relabels the natural constellation: symbol `s` is sent on the point
    /// that carries label `labels[s]` in the natural mapping.
    pub fn relabeled(kind: ModulationKind, labels: &[usize]) -> Result<Self> {
        let base = Self::new(kind);
        let order = kind.order();
        let mut seen = vec![false; order];
        if labels.len() != order {
            return Err(Error::InvalidCode(format!(
                "relabeling has {} entries, expected {order}",
                labels.len()
            )));
        }
        for &l in labels {
            if l >= order || seen[l] {
                return Err(Error::InvalidCode("relabeling is not a permutation".into()));
            }
            seen[l] = true;
        }
        let points = labels.iter().map(|&l| base.points[l]).collect();
        Ok(Modulation {
            kind,
            points,
            min_sq_distance: base.min_sq_distance,
        })
    }

    /// Arbitrary point set of the same order as `kind`.
    pub(crate) fn from_points(kind: ModulationKind, points: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(points.len(), kind.order());
        let min_sq_distance = brute_min_sq_distance(&points);
        Modulation {
            kind,
            points,
            min_sq_distance,
        }
    }
}

impl<T: Float> Modulation<T> {
    pub fn kind(&self) -> ModulationKind {
        self.kind
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.kind.bits_per_symbol()
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    pub fn point(&self, s: usize) -> Result<Complex<T>> {
        self.points.get(s).copied().ok_or(Error::SymbolOutOfRange {
            symbol: s,
            order: self.order(),
        })
    }

    /// Squared Euclidean distance between the points of two symbols.
    pub fn sq_distance(&self, s: usize, t: usize) -> Result<T> {
        Ok((self.point(s)? - self.point(t)?).norm_sqr())
    }

    /// Minimum squared distance between distinct points.
    pub fn min_sq_distance(&self) -> T {
        self.min_sq_distance
    }

    /// Row-major `order x order` table of squared distances.
    pub fn distance_table(&self) -> Vec<T> {
        let m = self.order();
        let mut table = Vec::with_capacity(m * m);
        for a in &self.points {
            for b in &self.points {
                table.push((*a - *b).norm_sqr());
            }
        }
        table
    }

    /// Index of the point nearest to `r` (lowest index on ties).
    pub fn nearest(&self, r: Complex<T>) -> usize {
        let mut best = 0;
        let mut best_d = T::infinity();
        for (s, p) in self.points.iter().enumerate() {
            let d = (r - *p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = s;
            }
        }
        best
    }

    pub fn average_energy(&self) -> T {
        let sum = self
            .points
            .iter()
            .fold(T::zero(), |acc, p| acc + p.norm_sqr());
        sum / cast(self.order() as f64)
    }
}

// Removes the ~1e-16 residue sin/cos leave on points that sit on an axis.
fn snap_axis<T: Float>(p: Complex<T>) -> Complex<T> {
    let eps: T = cast(1e-15);
    let snap = |v: T| {
        if v.abs() < eps {
            T::zero()
        } else if (v.abs() - T::one()).abs() < eps {
            T::one().copysign(v)
        } else {
            v
        }
    };
    Complex::new(snap(p.re), snap(p.im))
}

fn brute_min_sq_distance<T: Float>(points: &[Complex<T>]) -> T {
    let mut best = T::infinity();
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.min((*a - *b).norm_sqr());
        }
    }
    best
}
