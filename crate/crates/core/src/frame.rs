//! Rate-concealing frames.
//!
//! Wire layout, bits most significant first:
//!
//! ```text
//! preamble      64 bits   public constant, BPSK
//! header       388 bits   (7,5) code over 192 bits, BPSK
//!                         = AES-128(mcs 8 | seq 32 | len 16 | r 64 | 0 8)
//!                           | HMAC-SHA256(ciphertext)[..8]
//! payload        N symbols  GTCM on the target constellation, N a multiple
//!                           of the block size, each block interleaved with
//!                           derive(K, seq, block index)
//! ```
//!
//! The payload encoder starts in a keyed state and is terminated with keyed
//! tail inputs (both from SHA-256 of a label, K, seq and r) rather than
//! zeros, so the frame edges do not reveal the code.
//!
//! The 128-bit header block is encrypted as a single AES block; the random
//! `r` field makes equal headers encrypt differently. Cipher and MAC keys
//! are SHA-256 of a label and the session key. Interleaving follows
//! [`LinearInterleaver::permute`]: position `x` of a sent block carries
//! coded symbol `(A x + B) mod m`.
//!
//! The byte form used by the CLI is `preamble (8 bytes) | header bits packed
//! into 49 bytes (4 zero pad bits) | one byte per payload symbol index`.

use aes::cipher::generic_array::GenericArray;
use aes::cipher::{BlockDecrypt, BlockEncrypt, KeyInit};
use aes::Aes128;
use hmac::{Hmac, Mac};
use num_complex::Complex;
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::catalog::CatalogEntry;
use crate::constellation::{Modulation, ModulationKind};
use crate::error::{Error, Result};
use crate::gtcm_code::CodeSpec;
use crate::interleave::{InterleaveContext, LinearInterleaver};
use crate::viterbi::ViterbiDecoder;

pub const PREAMBLE: u64 = 0xD5E8_B3C6_1A2F_4977;
pub const PREAMBLE_BITS: usize = 64;
/// Ciphertext plus tag.
pub const SEALED_HEADER_BYTES: usize = 24;
pub const HEADER_CODED_BITS: usize = 2 * (8 * SEALED_HEADER_BYTES + 2);
const HEADER_PACKED_BYTES: usize = HEADER_CODED_BITS.div_ceil(8);
const TAG_BYTES: usize = 8;
pub const MAX_PAYLOAD_BITS: usize = u16::MAX as usize;

type HmacSha256 = Hmac<Sha256>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameHeader {
    /// Index into the code catalog.
    pub mcs_id: u8,
    pub seq: u32,
    /// Payload length in bits.
    pub payload_len: u16,
    /// Fresh random value per packet.
    pub r: u64,
}

impl FrameHeader {
    fn to_block(self) -> [u8; 16] {
        let mut b = [0u8; 16];
        b[0] = self.mcs_id;
        b[1..5].copy_from_slice(&self.seq.to_be_bytes());
        b[5..7].copy_from_slice(&self.payload_len.to_be_bytes());
        b[7..15].copy_from_slice(&self.r.to_be_bytes());
        b
    }

    fn from_block(b: &[u8; 16]) -> Result<Self> {
        if b[15] != 0 {
            return Err(Error::MalformedFrame("nonzero header padding".into()));
        }
        Ok(FrameHeader {
            mcs_id: b[0],
            seq: u32::from_be_bytes(b[1..5].try_into().expect("4 bytes")),
            payload_len: u16::from_be_bytes(b[5..7].try_into().expect("2 bytes")),
            r: u64::from_be_bytes(b[7..15].try_into().expect("8 bytes")),
        })
    }
}

/// A frame before modulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    /// Coded header bits, each sent as one BPSK symbol.
    pub header_bits: Vec<u8>,
    /// Interleaved symbol indices on `target`.
    pub payload_symbols: Vec<usize>,
    pub target: ModulationKind,
}

impl Frame {
    /// Baseband samples: preamble and header on BPSK, payload on the target.
    pub fn samples(&self) -> Vec<Complex<f64>> {
        let target = Modulation::<f64>::new(self.target);
        preamble_bits()
            .into_iter()
            .chain(self.header_bits.iter().copied())
            .map(bpsk)
            .chain(self.payload_symbols.iter().map(|&s| target.points()[s]))
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = PREAMBLE.to_be_bytes().to_vec();
        out.extend(pack_msb(&self.header_bits));
        out.extend(self.payload_symbols.iter().map(|&s| s as u8));
        out
    }
}

fn bpsk(bit: u8) -> Complex<f64> {
    Complex::new(if bit == 0 { 1.0 } else { -1.0 }, 0.0)
}

fn preamble_bits() -> Vec<u8> {
    (0..PREAMBLE_BITS).map(|i| ((PREAMBLE >> (63 - i)) & 1) as u8).collect()
}

fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).map(move |i| (b >> (7 - i)) & 1))
        .collect()
}

fn pack_msb(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b << (7 - i))))
        .collect()
}

fn derive_key(label: &[u8], key: &[u8]) -> [u8; 32] {
    Sha256::new().chain_update(label).chain_update(key).finalize().into()
}

fn header_mac(key: &[u8], ciphertext: &[u8]) -> HmacSha256 {
    let mut mac = <HmacSha256 as Mac>::new_from_slice(&derive_key(b"cbm/header-mac", key))
        .expect("hmac takes any key length");
    mac.update(ciphertext);
    mac
}

fn header_cipher(key: &[u8]) -> Aes128 {
    let k = derive_key(b"cbm/header-enc", key);
    Aes128::new(GenericArray::from_slice(&k[..16]))
}

/// Encrypts and authenticates the header: ciphertext (16 bytes) then tag (8 bytes).
pub fn seal_header(key: &[u8], header: &FrameHeader) -> [u8; SEALED_HEADER_BYTES] {
    let mut block = GenericArray::from(header.to_block());
    header_cipher(key).encrypt_block(&mut block);
    let tag = header_mac(key, &block).finalize().into_bytes();
    let mut out = [0u8; SEALED_HEADER_BYTES];
    out[..16].copy_from_slice(&block);
    out[16..].copy_from_slice(&tag[..TAG_BYTES]);
    out
}

/// Checks the tag, then decrypts.
pub fn open_header(key: &[u8], sealed: &[u8; SEALED_HEADER_BYTES]) -> Result<FrameHeader> {
    header_mac(key, &sealed[..16])
        .verify_truncated_left(&sealed[16..])
        .map_err(|_| Error::AuthenticationFailed)?;
    let mut block = GenericArray::clone_from_slice(&sealed[..16]);
    header_cipher(key).decrypt_block(&mut block);
    FrameHeader::from_block(&block.into())
}

fn header_code() -> CodeSpec {
    CodeSpec::parse("(7 5)", 1, 2, vec![2]).expect("fixed header code")
}

/// Two BPSK samples per trellis step, seen as one point of a square
/// four-point constellation.
fn header_modulation() -> Modulation<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let points = (0..4)
        .map(|y| Complex::new(bpsk(y & 1).re * s, bpsk((y >> 1) & 1).re * s))
        .collect();
    Modulation::from_points(ModulationKind::Qpsk, points)
}

/// Encodes the sealed header with the public (7,5) code.
pub fn encode_header(sealed: &[u8; SEALED_HEADER_BYTES]) -> Vec<u8> {
    header_code()
        .encode(&bytes_to_bits(sealed), true)
        .expect("k = 1")
        .into_iter()
        .flat_map(|y| [(y & 1) as u8, (y >> 1) as u8])
        .collect()
}

/// Soft-decodes the header from BPSK sample amplitudes.
pub fn decode_header(amplitudes: &[f64]) -> Result<[u8; SEALED_HEADER_BYTES]> {
    if amplitudes.len() != HEADER_CODED_BITS {
        return Err(Error::LengthMismatch {
            expected: HEADER_CODED_BITS,
            got: amplitudes.len(),
        });
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let rx: Vec<Complex<f64>> = amplitudes
        .chunks(2)
        .map(|p| Complex::new(p[0] * s, p[1] * s))
        .collect();
    let decoder = ViterbiDecoder::new(&header_code(), &header_modulation())?;
    let bits = decoder.decode(&rx, true)?;
    Ok(pack_msb(&bits).try_into().expect("192 bits"))
}

/// Code and target constellation of a catalog index.
pub fn resolve_mcs(catalog: &[CatalogEntry], mcs_id: u8) -> Result<(CodeSpec, ModulationKind)> {
    let entry = catalog.get(mcs_id as usize).ok_or(Error::UnknownMcs(mcs_id))?;
    Ok((entry.code()?, entry.target))
}

fn payload_steps(code: &CodeSpec, payload_len: usize) -> usize {
    payload_len.div_ceil(code.k()) + code.memory()
}

/// Keyed start state and tail inputs of the payload encoder. Starting and
/// terminating on pseudo-random inputs keeps the first and last symbols of
/// a frame as uniform as the rest.
struct Edges {
    start: usize,
    tail: Vec<u8>,
    end: usize,
}

fn payload_edges(key: &[u8], header: &FrameHeader, code: &CodeSpec) -> Result<Edges> {
    let digest = Sha256::new()
        .chain_update(b"cbm/payload-edges")
        .chain_update(key)
        .chain_update(header.seq.to_be_bytes())
        .chain_update(header.r.to_be_bytes())
        .finalize();
    let start = u64::from_be_bytes(digest[..8].try_into().expect("8 bytes")) as usize
        & (code.num_states() - 1);
    let tail: Vec<u8> = bytes_to_bits(&digest[8..])
        .into_iter()
        .take(code.memory() * code.k())
        .collect();
    // every register holds only tail inputs afterwards
    let (_, end) = code.encode_from(0, &tail)?;
    Ok(Edges { start, tail, end })
}

fn block_interleaver(key: &[u8], seq: u32, block: usize, block_size: u64) -> Result<LinearInterleaver> {
    LinearInterleaver::derive(&InterleaveContext {
        key,
        packet: u64::from(seq),
        block: block as u64,
        block_size,
    })
}

/// Builds a frame. `header.payload_len` must equal `payload.len()`; random
/// symbols pad the last interleaver block.
pub fn build_frame<R: Rng + ?Sized>(
    key: &[u8],
    header: &FrameHeader,
    payload: &[u8],
    catalog: &[CatalogEntry],
    block_size: u64,
    rng: &mut R,
) -> Result<Frame> {
    if payload.len() > MAX_PAYLOAD_BITS {
        return Err(Error::PayloadTooLong(payload.len()));
    }
    if usize::from(header.payload_len) != payload.len() {
        return Err(Error::LengthMismatch {
            expected: usize::from(header.payload_len),
            got: payload.len(),
        });
    }
    let (code, target) = resolve_mcs(catalog, header.mcs_id)?;
    let edges = payload_edges(key, header, &code)?;
    let mut bits = payload.to_vec();
    bits.resize(payload.len().div_ceil(code.k()) * code.k(), 0);
    bits.extend(&edges.tail);
    let (mut coded, end) = code.encode_from(edges.start, &bits)?;
    debug_assert_eq!(end, edges.end);
    let m = block_size as usize;
    let padded = coded.len().div_ceil(m) * m;
    while coded.len() < padded {
        coded.push(rng.gen_range(0..target.order()));
    }
    let mut payload_symbols = Vec::with_capacity(padded);
    for (i, block) in coded.chunks(m).enumerate() {
        payload_symbols.extend(block_interleaver(key, header.seq, i, block_size)?.permute(block)?);
    }
    Ok(Frame {
        header_bits: encode_header(&seal_header(key, header)),
        payload_symbols,
        target,
    })
}

/// Decodes header and payload that follow a located preamble. Samples past
/// the frame's end are ignored.
fn decode_body(
    key: &[u8],
    header_amplitudes: &[f64],
    payload: &[Complex<f64>],
    catalog: &[CatalogEntry],
    block_size: u64,
) -> Result<(FrameHeader, Vec<u8>)> {
    let header = open_header(key, &decode_header(header_amplitudes)?)?;
    let (code, target) = resolve_mcs(catalog, header.mcs_id)?;
    let len = usize::from(header.payload_len);
    let steps = payload_steps(&code, len);
    let m = block_size as usize;
    let total = steps.div_ceil(m) * m;
    if payload.len() < total {
        return Err(Error::MalformedFrame(format!(
            "payload has {} symbols, header implies {total}",
            payload.len()
        )));
    }
    let mut rx = Vec::with_capacity(total);
    for (i, block) in payload[..total].chunks(m).enumerate() {
        rx.extend(block_interleaver(key, header.seq, i, block_size)?.inverse_permute(block)?);
    }
    rx.truncate(steps);
    let edges = payload_edges(key, &header, &code)?;
    let decoder = ViterbiDecoder::new(&code, &Modulation::new(target))?;
    let mut bits = decoder.decode_between(&rx, edges.start, Some(edges.end))?;
    bits.truncate(len);
    Ok((header, bits))
}

/// Parses a frame from baseband samples, starting at the first exact
/// match of the preamble on hard BPSK decisions.
pub fn parse_frame_samples(
    key: &[u8],
    samples: &[Complex<f64>],
    catalog: &[CatalogEntry],
    block_size: u64,
) -> Result<(FrameHeader, Vec<u8>)> {
    let start = find_preamble(samples).ok_or(Error::PreambleNotFound)?;
    let body = &samples[start + PREAMBLE_BITS..];
    if body.len() < HEADER_CODED_BITS {
        return Err(Error::MalformedFrame("truncated header".into()));
    }
    let amplitudes: Vec<f64> = body[..HEADER_CODED_BITS].iter().map(|c| c.re).collect();
    decode_body(key, &amplitudes, &body[HEADER_CODED_BITS..], catalog, block_size)
}

/// Offset of the first preamble in `samples`.
pub fn find_preamble(samples: &[Complex<f64>]) -> Option<usize> {
    let pattern = preamble_bits();
    let hard: Vec<u8> = samples.iter().map(|c| u8::from(c.re < 0.0)).collect();
    hard.windows(PREAMBLE_BITS).position(|w| w == pattern.as_slice())
}

/// Parses the byte form produced by [`Frame::to_bytes`].
pub fn parse_frame_bytes(
    key: &[u8],
    bytes: &[u8],
    catalog: &[CatalogEntry],
    block_size: u64,
) -> Result<(FrameHeader, Vec<u8>)> {
    if bytes.len() < 8 || bytes[..8] != PREAMBLE.to_be_bytes() {
        return Err(Error::PreambleNotFound);
    }
    let rest = &bytes[8..];
    if rest.len() < HEADER_PACKED_BYTES {
        return Err(Error::MalformedFrame("truncated header".into()));
    }
    let amplitudes: Vec<f64> = bytes_to_bits(&rest[..HEADER_PACKED_BYTES])[..HEADER_CODED_BITS]
        .iter()
        .map(|&b| bpsk(b).re)
        .collect();
    let header = open_header(key, &decode_header(&amplitudes)?)?;
    let (_, target) = resolve_mcs(catalog, header.mcs_id)?;
    let points = Modulation::<f64>::new(target);
    let payload = rest[HEADER_PACKED_BYTES..]
        .iter()
        .map(|&s| points.point(usize::from(s)))
        .collect::<Result<Vec<_>>>()?;
    decode_body(key, &amplitudes, &payload, catalog, block_size)
}
