//! The published code tables as data, and their verification.
//!
//! The catalog is a CSV file with header `source,target,v,beta_db,generator`,
//! one row per code, the generator in the octal table notation. Rows are
//! verified by recomputing the squared free distance and the coding gain.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::constellation::{Modulation, ModulationKind};
use crate::error::{Error, Result};
use crate::free_distance::{coding_gain_db, compute_distance};
use crate::gtcm_code::{parse_octal_rows, CodeSpec, Validity};

/// The embedded catalog of published codes.
pub const CATALOG_CSV: &str = include_str!("../data/catalog.csv");

/// Environment variable naming an alternative catalog file.
pub const CATALOG_ENV: &str = "CBM_CATALOG";

/// Allowed gap between a recomputed and a published coding gain.
pub const BETA_TOLERANCE_DB: f64 = 0.01;

const CSV_HEADER: &str = "source,target,v,beta_db,generator";

/// How octal digits map onto polynomial coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OctalConvention {
    /// Least significant bit is the coefficient of `D^0`.
    LsbFirst,
    /// Most significant bit of a `v_i + 1`-bit word is the coefficient of `D^0`.
    MsbFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub source: ModulationKind,
    pub target: ModulationKind,
    pub v: usize,
    pub beta_db_published: f64,
    pub generator: String,
    pub verified: bool,
}

impl CatalogEntry {
    pub fn k(&self) -> usize {
        self.source.bits_per_symbol()
    }

    pub fn n(&self) -> usize {
        self.target.bits_per_symbol()
    }

    /// The code under the least-significant-bit-first reading, register
    /// lengths taken from the highest tap of each row.
    pub fn code(&self) -> Result<CodeSpec> {
        let rows = self.rows()?;
        let regs = infer_reg_lengths(&rows, self.v);
        CodeSpec::new(self.k(), self.n(), regs, rows)
    }

    /// All codes the row text can denote under `convention`.
    pub fn candidate_codes(&self, convention: OctalConvention) -> Result<Vec<CodeSpec>> {
        let rows = self.rows()?;
        match convention {
            OctalConvention::LsbFirst => Ok(vec![self.code()?]),
            OctalConvention::MsbFirst => Ok(compositions(self.v, self.k())
                .into_iter()
                .filter(|regs| {
                    rows.iter()
                        .zip(regs)
                        .all(|(row, &len)| row.iter().all(|&m| m >> (len + 1) == 0))
                })
                .filter_map(|regs| {
                    let gen = rows
                        .iter()
                        .zip(&regs)
                        .map(|(row, &len)| row.iter().map(|&m| reverse_bits(m, len + 1)).collect())
                        .collect();
                    CodeSpec::new(self.k(), self.n(), regs, gen).ok()
                })
                .collect()),
        }
    }

    fn rows(&self) -> Result<Vec<Vec<u64>>> {
        let rows = parse_octal_rows(&self.generator)?;
        if rows.len() != self.k() || rows.iter().any(|r| r.len() != self.n()) {
            return Err(Error::MalformedGenerator(format!(
                "{} is not {}x{}",
                self.generator,
                self.k(),
                self.n()
            )));
        }
        Ok(rows)
    }

    /// Stable identifier used as the MCS field of frame headers.
    pub fn label(&self) -> String {
        format!("{}->{} v={}", self.source, self.target, self.v)
    }
}

/// Register lengths from the tap degrees of each row (least significant bit
/// first). Cells the degrees do not account for go to the last input.
pub fn infer_reg_lengths(rows: &[Vec<u64>], v: usize) -> Vec<usize> {
    let mut regs: Vec<usize> = rows
        .iter()
        .map(|row| {
            let all = row.iter().fold(0, |acc, m| acc | m);
            (64 - all.leading_zeros() as usize).saturating_sub(1)
        })
        .collect();
    let used: usize = regs.iter().sum();
    if used < v {
        if let Some(last) = regs.last_mut() {
            *last += v - used;
        }
    }
    regs
}

fn reverse_bits(mask: u64, width: usize) -> u64 {
    (0..width).fold(0, |acc, b| acc | (((mask >> b) & 1) << (width - 1 - b)))
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    (0..=total)
        .flat_map(|first| {
            compositions(total - first, parts - 1)
                .into_iter()
                .map(move |mut rest| {
                    rest.insert(0, first);
                    rest
                })
        })
        .collect()
}

pub fn parse_catalog(text: &str) -> Result<Vec<CatalogEntry>> {
    let mut entries = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (no == 0 && line == CSV_HEADER) {
            continue;
        }
        let bad = |reason: &str| Error::MalformedCatalog {
            line: no + 1,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.splitn(5, ',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(bad("expected 5 fields"));
        }
        let source = fields[0].parse().map_err(|_| bad("unknown source modulation"))?;
        let target = fields[1].parse().map_err(|_| bad("unknown target modulation"))?;
        let v = fields[2].parse().map_err(|_| bad("bad constraint length"))?;
        let beta = fields[3].parse().map_err(|_| bad("bad coding gain"))?;
        entries.push(CatalogEntry {
            source,
            target,
            v,
            beta_db_published: beta,
            generator: fields[4].to_string(),
            verified: false,
        });
    }
    Ok(entries)
}

/// The embedded catalog.
pub fn load_catalog() -> Vec<CatalogEntry> {
    parse_catalog(CATALOG_CSV).expect("embedded catalog parses")
}

/// The catalog named by `CBM_CATALOG`, or the embedded one.
pub fn load_catalog_from_env() -> Result<Vec<CatalogEntry>> {
    match std::env::var_os(CATALOG_ENV) {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::MalformedCatalog {
                line: 0,
                reason: format!("{}: {e}", path.to_string_lossy()),
            })?;
            parse_catalog(&text)
        }
        None => Ok(load_catalog()),
    }
}

pub fn catalog_to_csv(entries: &[CatalogEntry]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for e in entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.source, e.target, e.v, e.beta_db_published, e.generator
        );
    }
    out
}

/// Recomputed figures for one catalog row.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryVerification {
    pub entry: CatalogEntry,
    /// Convention under which the row reproduced its coding gain.
    pub convention: Option<OctalConvention>,
    /// Code used for the reported figures (the matching one if any).
    pub code: Option<CodeSpec>,
    pub validity: Option<Validity>,
    pub d_sq_free: f64,
    pub beta_db: f64,
    pub merge_depth: usize,
    pub error: Option<String>,
}

impl EntryVerification {
    pub fn verified(&self) -> bool {
        self.entry.verified
    }

    pub fn delta_db(&self) -> f64 {
        self.beta_db - self.entry.beta_db_published
    }
}

fn measure(code: &CodeSpec, entry: &CatalogEntry) -> Result<(f64, f64, usize)> {
    let target = Modulation::<f64>::new(entry.target);
    let source = Modulation::<f64>::new(entry.source);
    let r = compute_distance(code, &target, 0.0)?;
    Ok((r.d_sq_free, coding_gain_db(r.d_sq_free, &source)?, r.merge_depth))
}

fn matches(beta: f64, published: f64) -> bool {
    (beta - published).abs() <= BETA_TOLERANCE_DB + 1e-9
}

/// Recomputes one row, falling back to the most-significant-bit-first
/// reading when the direct reading does not reproduce the published gain.
pub fn verify_entry(entry: &CatalogEntry) -> EntryVerification {
    let mut entry = entry.clone();
    entry.verified = false;
    let mut report = EntryVerification {
        entry: entry.clone(),
        convention: None,
        code: None,
        validity: None,
        d_sq_free: f64::NAN,
        beta_db: f64::NAN,
        merge_depth: 0,
        error: None,
    };
    let primary = match entry.code() {
        Ok(c) => c,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    let validity = primary.validate();
    report.validity = Some(validity);
    match measure(&primary, &entry) {
        Ok((d, beta, depth)) => {
            report.d_sq_free = d;
            report.beta_db = beta;
            report.merge_depth = depth;
            report.code = Some(primary.clone());
            if matches(beta, entry.beta_db_published) {
                report.entry.verified = true;
                report.convention = Some(OctalConvention::LsbFirst);
                return report;
            }
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    if let Ok(candidates) = entry.candidate_codes(OctalConvention::MsbFirst) {
        for code in candidates {
            if code.validate() != Validity::Valid {
                continue;
            }
            if let Ok((d, beta, depth)) = measure(&code, &entry) {
                if matches(beta, entry.beta_db_published) {
                    report.validity = Some(Validity::Valid);
                    report.d_sq_free = d;
                    report.beta_db = beta;
                    report.merge_depth = depth;
                    report.code = Some(code);
                    report.entry.verified = true;
                    report.convention = Some(OctalConvention::MsbFirst);
                    report.error = None;
                    return report;
                }
            }
        }
    }
    report
}

/// Verifies every entry with `v <= max_v`, in catalog order.
pub fn verify_catalog(entries: &[CatalogEntry], max_v: usize) -> Vec<EntryVerification> {
    entries
        .par_iter()
        .filter(|e| e.v <= max_v)
        .map(verify_entry)
        .collect()
}

/// Renders verification reports as CSV, with a trailing summary line.
pub fn verification_csv(reports: &[EntryVerification]) -> String {
    let mut out = String::from(
        "source,target,v,beta_published,beta_recomputed,d_sq_free,merge_depth,convention,verified\n",
    );
    for r in reports {
        let conv = match r.convention {
            Some(OctalConvention::LsbFirst) => "lsb",
            Some(OctalConvention::MsbFirst) => "msb",
            None => "none",
        };
        let _ = writeln!(
            out,
            "{},{},{},{:.2},{:.4},{:.6},{},{},{}",
            r.entry.source,
            r.entry.target,
            r.entry.v,
            r.entry.beta_db_published,
            r.beta_db,
            r.d_sq_free,
            r.merge_depth,
            conv,
            r.verified()
        );
    }
    let mismatches = reports.iter().filter(|r| !r.verified()).count();
    let _ = writeln!(
        out,
        "# summary: {} entries, {} verified, {} mismatches",
        reports.len(),
        reports.len() - mismatches,
        mismatches
    );
    out
}
