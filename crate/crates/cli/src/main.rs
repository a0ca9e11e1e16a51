//! `cbm`: code search, distance verification, BER sweeps and frame tooling.
//!
//! All tabular output is CSV with a header row on standard output. Errors
//! go to standard error as a single line `error: <code>: <message>` with
//! exit status 1; bad flags exit with status 2.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use cbm::catalog::{self, CatalogEntry};
use cbm::code_search::{self, SearchSpec};
use cbm::frame::{self, FrameHeader};
use cbm::interleave::{InterleaveContext, LinearInterleaver, DEFAULT_BLOCK_SIZE};
use cbm::link_sim::{self, Scenario, SweepConfig};
use cbm::{free_distance, CodeSpec, Modulation, ModulationKind};
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] cbm::Error),
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Input(_) => "bad_input",
            CliError::Io { .. } => "io",
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "cbm", version, about = "Rate-concealing trellis coded modulation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Random (or exhaustive) search for the code with the largest free distance.
    Search {
        #[arg(long)]
        source: ModulationKind,
        #[arg(long)]
        target: ModulationKind,
        #[arg(long)]
        v: usize,
        /// Per-input register lengths, comma separated (default: even split).
        #[arg(long, value_delimiter = ',')]
        reg_lengths: Option<Vec<usize>>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Enumerate every generator matrix instead of sampling.
        #[arg(long)]
        full: bool,
        #[arg(long, default_value_t = code_search::FULL_SEARCH_MAX_BITS)]
        max_bits: u32,
        #[arg(long)]
        no_prune: bool,
    },
    /// Recompute the coding gain of every catalog code.
    VerifyCatalog {
        /// Catalog CSV (default: $CBM_CATALOG, else the built-in catalog).
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        max_v: usize,
    },
    /// Squared free distance, coding gain and merge depth of one code.
    Distance {
        /// Generator matrix in octal, e.g. "(1 3)" or "(0 5 0 2) (7 2 2 7)".
        #[arg(long)]
        code: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        /// Total constraint length (default: from the tap degrees).
        #[arg(long)]
        v: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        reg_lengths: Option<Vec<usize>>,
        #[arg(long)]
        target: ModulationKind,
        /// Reference constellation for the gain (default: the k-bit one).
        #[arg(long)]
        source: Option<ModulationKind>,
    },
    /// Monte-Carlo BER sweep over Eb/N0.
    Sweep {
        /// uncoded:<mod> | catalog:<index> | catalog:<source>:<target>:<v> |
        /// code:<target>:<k>:<octal> | gray-code:<target>:<k>:<octal>
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, default_value_t = 0.5)]
        step: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        /// Bits per point (accepts 1e7 notation).
        #[arg(long, default_value = "1e7")]
        budget: f64,
        #[arg(long, default_value_t = 1000)]
        error_stop: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Interleave symbols in blocks of this prime size.
        #[arg(long)]
        interleave: Option<u64>,
        /// Append an esn0_db column.
        #[arg(long)]
        esn0_column: bool,
    },
    /// Build a frame; prints its byte form as hex.
    FrameEncode {
        #[arg(long)]
        key: String,
        /// Catalog index of the code.
        #[arg(long)]
        mcs: u8,
        #[arg(long, default_value_t = 0)]
        seq: u32,
        /// Payload as a string of 0/1 characters.
        #[arg(long, conflicts_with = "random_bits")]
        payload_bits: Option<String>,
        /// Random payload of this many bits (drawn from --seed).
        #[arg(long)]
        random_bits: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_BLOCK_SIZE)]
        block_size: u64,
        /// Also write the payload symbol indices as CSV.
        #[arg(long)]
        symbols_csv: Option<PathBuf>,
    },
    /// Decode a hex frame; prints the header fields and payload bits.
    FrameDecode {
        #[arg(long)]
        key: String,
        #[arg(long, conflicts_with = "input")]
        hex: Option<String>,
        /// File holding the hex frame.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_BLOCK_SIZE)]
        block_size: u64,
    },
    /// List the keyed permutation of one interleaver block.
    InterleaveDemo {
        #[arg(long)]
        key: String,
        #[arg(long, default_value_t = 0)]
        seq: u64,
        #[arg(long, default_value_t = 0)]
        block: u64,
        #[arg(long, default_value_t = DEFAULT_BLOCK_SIZE)]
        m: u64,
    },
}

/// Shortest decimal form, keeping at least one fractional digit.
fn fmt_num(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    let s = s.trim_end_matches('0');
    if s.ends_with('.') {
        format!("{s}0")
    } else {
        s.to_string()
    }
}

fn load_catalog(path: Option<&PathBuf>) -> CliResult<Vec<CatalogEntry>> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                path: p.clone(),
                source,
            })?;
            Ok(catalog::parse_catalog(&text)?)
        }
        None => Ok(catalog::load_catalog_from_env()?),
    }
}

fn parse_code(text: &str, k: usize, n: usize, v: Option<usize>, regs: Option<Vec<usize>>) -> CliResult<CodeSpec> {
    let rows = cbm::gtcm_code::parse_octal_rows(text)?;
    if rows.len() != k || rows.iter().any(|r| r.len() != n) {
        return Err(cbm::Error::MalformedGenerator(format!("{text} is not {k}x{n}")).into());
    }
    let regs = match regs {
        Some(r) => r,
        None => {
            let inferred: usize = catalog::infer_reg_lengths(&rows, 0).iter().sum();
            catalog::infer_reg_lengths(&rows, v.unwrap_or(inferred))
        }
    };
    if let Some(v) = v {
        if regs.iter().sum::<usize>() != v {
            return Err(CliError::Input(format!(
                "register lengths {regs:?} do not sum to v = {v}"
            )));
        }
    }
    Ok(CodeSpec::new(k, n, regs, rows)?)
}

fn source_for(k: usize) -> CliResult<ModulationKind> {
    ModulationKind::from_bits(k)
        .ok_or_else(|| CliError::Input(format!("no {k}-bit source constellation; pass --source")))
}

fn parse_scenario(text: &str) -> CliResult<Scenario> {
    let parts: Vec<&str> = text.splitn(4, ':').collect();
    let bad = || CliError::Input(format!("unrecognised scenario {text:?}"));
    let name = text.replace(',', " ");
    match parts.as_slice() {
        ["uncoded", m] => Ok(Scenario::uncoded(m.parse()?)),
        ["catalog", idx] => {
            let id: u8 = idx.parse().map_err(|_| bad())?;
            let (code, target) = frame::resolve_mcs(&load_catalog(None)?, id)?;
            Ok(Scenario::coded(code, Modulation::new(target), name)?)
        }
        ["catalog", src, dst, v] => {
            let (src, dst): (ModulationKind, ModulationKind) = (src.parse()?, dst.parse()?);
            let v: usize = v.parse().map_err(|_| bad())?;
            let entry = load_catalog(None)?
                .into_iter()
                .find(|e| e.source == src && e.target == dst && e.v == v)
                .ok_or_else(|| CliError::Input(format!("no catalog code {src}->{dst} v={v}")))?;
            Ok(Scenario::coded(entry.code()?, Modulation::new(dst), name)?)
        }
        [kind @ ("code" | "gray-code"), dst, k, octal] => {
            let dst: ModulationKind = dst.parse()?;
            let k: usize = k.parse().map_err(|_| bad())?;
            let code = parse_code(octal, k, dst.bits_per_symbol(), None, None)?;
            let target = if *kind == "gray-code" {
                link_sim::gray_modulation(dst)
            } else {
                Modulation::new(dst)
            };
            Ok(Scenario::coded(code, target, name)?)
        }
        _ => Err(bad()),
    }
}

fn parse_bits(text: &str) -> CliResult<Vec<u8>> {
    text.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(CliError::Input(format!("payload bit {c:?} is not 0 or 1"))),
        })
        .collect()
}

fn run(command: Command) -> CliResult<String> {
    let mut out = String::new();
    match command {
        Command::Search {
            source,
            target,
            v,
            reg_lengths,
            trials,
            seed,
            full,
            max_bits,
            no_prune,
        } => {
            let mut spec = SearchSpec::new(source, target, v).with_seed(seed).with_prune(!no_prune);
            if let Some(r) = reg_lengths {
                spec = spec.with_reg_lengths(r);
            }
            if let Some(t) = trials {
                spec = spec.with_trials(t);
            }
            let r = if full {
                code_search::full_search(&spec, max_bits)?
            } else {
                code_search::random_search(&spec)?
            };
            out.push_str("source,target,v,code,d_sq,beta_db,trials,valid,pruned\n");
            let _ = writeln!(
                out,
                "{source},{target},{},{},{},{:.2},{},{},{}",
                spec.v(),
                r.best_code.to_octal(),
                fmt_num(r.d_sq_free, 6),
                r.beta_db,
                r.trials_run,
                r.valid_count,
                r.pruned_count
            );
        }
        Command::VerifyCatalog { catalog, max_v } => {
            let entries = load_catalog(catalog.as_ref())?;
            out = catalog::verification_csv(&catalog::verify_catalog(&entries, max_v));
        }
        Command::Distance {
            code,
            k,
            n,
            v,
            reg_lengths,
            target,
            source,
        } => {
            let code = parse_code(&code, k, n, v, reg_lengths)?;
            let source = match source {
                Some(s) => s,
                None => source_for(k)?,
            };
            let r = free_distance::compute_distance(&code, &Modulation::new(target), 0.0)?;
            let beta = free_distance::coding_gain_db(r.d_sq_free, &Modulation::new(source))?;
            out.push_str("d_sq,beta_db,L\n");
            let _ = writeln!(out, "{},{beta:.2},{}", fmt_num(r.d_sq_free, 6), r.merge_depth);
        }
        Command::Sweep {
            scenario,
            from,
            step,
            to,
            budget,
            error_stop,
            seed,
            interleave,
            esn0_column,
        } => {
            if !(budget >= 1.0) || budget > u64::MAX as f64 {
                return Err(CliError::Input(format!("bad bit budget {budget}")));
            }
            let scen = parse_scenario(&scenario)?;
            let name = scen.name();
            let rate = scen.info_bits_per_symbol() as f64;
            let mut config = SweepConfig::new(scen, to);
            config.ebn0_start_db = from;
            config.ebn0_step_db = step;
            config.bits_per_point = budget as u64;
            config.error_stop = error_stop;
            config.seed = seed;
            config.interleave_block = interleave;
            let points = link_sim::run_sweep(&config)?;
            for p in points.iter().filter(|p| !p.reached_error_stop) {
                eprintln!(
                    "warning: {name} at {:.2} dB stopped on the bit budget with {} errors",
                    p.ebn0_db, p.bit_errors
                );
            }
            out = link_sim::sweep_csv(&name, &points, true, esn0_column.then_some(rate));
        }
        Command::FrameEncode {
            key,
            mcs,
            seq,
            payload_bits,
            random_bits,
            seed,
            block_size,
            symbols_csv,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let payload = match (payload_bits, random_bits) {
                (Some(text), _) => parse_bits(&text)?,
                (None, Some(n)) => (0..n).map(|_| rng.gen_range(0..2u8)).collect(),
                (None, None) => {
                    return Err(CliError::Input("give --payload-bits or --random-bits".into()))
                }
            };
            if payload.len() > frame::MAX_PAYLOAD_BITS {
                return Err(cbm::Error::PayloadTooLong(payload.len()).into());
            }
            let header = FrameHeader {
                mcs_id: mcs,
                seq,
                payload_len: payload.len() as u16,
                r: rng.gen(),
            };
            let catalog = load_catalog(None)?;
            let f = frame::build_frame(key.as_bytes(), &header, &payload, &catalog, block_size, &mut rng)?;
            if let Some(path) = symbols_csv {
                let mut csv = String::from("index,symbol\n");
                for (i, s) in f.payload_symbols.iter().enumerate() {
                    let _ = writeln!(csv, "{i},{s}");
                }
                std::fs::write(&path, csv).map_err(|source| CliError::Io { path, source })?;
            }
            out.push_str(&hex::encode(f.to_bytes()));
            out.push('\n');
        }
        Command::FrameDecode {
            key,
            hex: hex_text,
            input,
            block_size,
        } => {
            let text = match (hex_text, input) {
                (Some(h), _) => h,
                (None, Some(path)) => {
                    std::fs::read_to_string(&path).map_err(|source| CliError::Io { path, source })?
                }
                (None, None) => return Err(CliError::Input("give --hex or --input".into())),
            };
            let bytes = hex::decode(text.trim())
                .map_err(|e| CliError::Input(format!("frame is not hex: {e}")))?;
            let catalog = load_catalog(None)?;
            let (h, bits) = frame::parse_frame_bytes(key.as_bytes(), &bytes, &catalog, block_size)?;
            out.push_str("mcs_id,seq,payload_len,r,payload_bits\n");
            let bits: String = bits.iter().map(|&b| char::from(b'0' + b)).collect();
            let _ = writeln!(out, "{},{},{},{},{bits}", h.mcs_id, h.seq, h.payload_len, h.r);
        }
        Command::InterleaveDemo { key, seq, block, m } => {
            let itl = LinearInterleaver::derive(&InterleaveContext {
                key: key.as_bytes(),
                packet: seq,
                block,
                block_size: m,
            })?;
            out.push_str("x,input_index,a,b\n");
            for x in 0..m {
                let _ = writeln!(out, "{x},{},{},{}", itl.index(x), itl.a(), itl.b());
            }
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}: {e}", e.code());
            ExitCode::from(1)
        }
    }
}
