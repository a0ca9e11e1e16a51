//! Keyed affine interleaving of symbol blocks.
//!
//! Each block of `m` symbols (`m` prime) is permuted by `x -> A x + B mod m`,
//! with `A` and `B` derived from SHA-256 of the session key, the packet
//! number and the block index:
//!
//! ```text
//! h_d = SHA-256(K || s as u64 BE || i as u64 BE || d)    d = 0x00, 0x01
//! A   = (h_0 mod (m - 1)) + 1
//! B   =  h_1 mod m
//! ```
//!
//! Digests are read as big-endian integers. Output position `x` carries
//! input symbol `(A x + B) mod m`.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Default block size in symbols.
pub const DEFAULT_BLOCK_SIZE: u64 = 251;

pub fn is_prime(m: u64) -> bool {
    if m < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= m {
        if m % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterleaveContext<'a> {
    pub key: &'a [u8],
    pub packet: u64,
    pub block: u64,
    pub block_size: u64,
}

/// The permutation `x -> (a x + b) mod m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LinearInterleaver {
    a: u64,
    b: u64,
    m: u64,
}

fn digest_mod(ctx: &InterleaveContext<'_>, domain: u8, modulus: u64) -> u64 {
    let digest = Sha256::new()
        .chain_update(ctx.key)
        .chain_update(ctx.packet.to_be_bytes())
        .chain_update(ctx.block.to_be_bytes())
        .chain_update([domain])
        .finalize();
    digest
        .iter()
        .fold(0u128, |acc, &byte| ((acc << 8) | u128::from(byte)) % u128::from(modulus)) as u64
}

impl LinearInterleaver {
    pub fn new(a: u64, b: u64, m: u64) -> Result<Self> {
        if !is_prime(m) {
            return Err(Error::NotPrime(m));
        }
        if a == 0 || a >= m || b >= m {
            return Err(Error::InvalidCode(format!(
                "interleaver coefficients A={a} B={b} out of range for m={m}"
            )));
        }
        Ok(LinearInterleaver { a, b, m })
    }

    /// Derives the interleaver of one block from the keyed hash.
    pub fn derive(ctx: &InterleaveContext<'_>) -> Result<Self> {
        let m = ctx.block_size;
        if !is_prime(m) {
            return Err(Error::NotPrime(m));
        }
        let a = digest_mod(ctx, 0x00, m - 1) + 1;
        let b = digest_mod(ctx, 0x01, m);
        Ok(LinearInterleaver { a, b, m })
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    pub fn block_size(&self) -> usize {
        self.m as usize
    }

    /// `(A x + B) mod m`.
    pub fn index(&self, x: u64) -> u64 {
        ((u128::from(self.a) * u128::from(x) + u128::from(self.b)) % u128::from(self.m)) as u64
    }

    /// `A^-1 mod m` by Fermat's little theorem.
    pub fn a_inverse(&self) -> u64 {
        let m = u128::from(self.m);
        let mut base = u128::from(self.a) % m;
        let mut exp = self.m - 2;
        let mut acc = 1u128;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base % m;
            }
            base = base * base % m;
            exp >>= 1;
        }
        acc as u64
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.block_size() {
            return Err(Error::LengthMismatch {
                expected: self.block_size(),
                got: len,
            });
        }
        Ok(())
    }

    /// `out[x] = block[(A x + B) mod m]`.
    pub fn permute<S: Copy>(&self, block: &[S]) -> Result<Vec<S>> {
        self.check_len(block.len())?;
        Ok((0..self.m).map(|x| block[self.index(x) as usize]).collect())
    }

    /// Undoes [`permute`](Self::permute): `out[y] = block[A^-1 (y - B) mod m]`.
    pub fn inverse_permute<S: Copy>(&self, block: &[S]) -> Result<Vec<S>> {
        self.check_len(block.len())?;
        let inv = u128::from(self.a_inverse());
        let m = u128::from(self.m);
        Ok((0..self.m)
            .map(|y| {
                let x = (u128::from(y) + m - u128::from(self.b)) % m * inv % m;
                block[x as usize]
            })
            .collect())
    }
}
