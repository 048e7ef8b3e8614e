//! The `kbresize` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or format
//! error (unreadable, corrupt or mismatched inputs), 3 internal error.
//! Every failure prints exactly one line of the form
//! `kbresize: error[<kind>]: <message>` on stderr.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::codebook::EuclideanCodebook;
use crate::codec::{self, FeatureGrid, IndexGrid, Payload};
use crate::error::Error;
use crate::fsio::write_atomic;
use crate::harness::{self, EvalConfig};
use crate::ranking::{self, ImportanceRanking};

#[derive(Debug, Parser)]
#[command(
    name = "kbresize",
    version,
    about = "Zero-shot codebook resizing and transmission tools"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the importance ranking of a parent codebook.
    Rank {
        /// Parent codebook (.kbf, or .csv with one vector per row).
        #[arg(long)]
        input: PathBuf,
        /// Ranking file to write (.kbr).
        #[arg(long)]
        output: PathBuf,
    },
    /// Cut a child codebook of a given size out of a ranked parent.
    Resize {
        /// Parent codebook (.kbf or .csv).
        #[arg(long)]
        input: PathBuf,
        /// Ranking computed from the same parent.
        #[arg(long)]
        ranking: PathBuf,
        /// Target size, between 1 and the parent size.
        #[arg(long)]
        size: usize,
        /// Child codebook to write (.kbf or .csv).
        #[arg(long)]
        output: PathBuf,
    },
    /// Map every cell of a feature grid to its nearest codebook index.
    Quantize {
        /// Feature grid (.kbx).
        #[arg(long)]
        features: PathBuf,
        /// Codebook (.kbf or .csv).
        #[arg(long)]
        kb: PathBuf,
        /// Index grid to write (.kbi).
        #[arg(long)]
        output: PathBuf,
    },
    /// Replace every index of a grid by its codebook vector.
    Dequantize {
        /// Index grid (.kbi).
        #[arg(long)]
        indices: PathBuf,
        /// Codebook (.kbf or .csv) the indices refer to.
        #[arg(long)]
        kb: PathBuf,
        /// Feature grid to write (.kbx).
        #[arg(long)]
        output: PathBuf,
    },
    /// Bit-pack an index grid into a payload.
    Pack {
        /// Index grid (.kbi).
        #[arg(long)]
        indices: PathBuf,
        /// Payload to write (.kbp).
        #[arg(long)]
        output: PathBuf,
    },
    /// Decode a payload back into an index grid.
    Unpack {
        /// Payload (.kbp).
        #[arg(long)]
        input: PathBuf,
        /// Index grid to write (.kbi).
        #[arg(long)]
        output: PathBuf,
    },
    /// Write the semantic tree of a codebook as an edge list or Graphviz DOT.
    TreeExport {
        /// Codebook (.kbf or .csv).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = TreeFormat::Edges)]
        format: TreeFormat,
        /// File to write.
        #[arg(long)]
        output: PathBuf,
    },
    /// Run the rate-distortion sweep and write records and summary CSVs.
    Eval {
        /// TOML configuration; every key is optional.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for the CSV files; created if missing.
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Replace the configured seeds with a single seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print size, dimension, bits per index and fingerprint of a codebook.
    KbInfo {
        /// Codebook (.kbf or .csv).
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TreeFormat {
    Edges,
    Dot,
}

/// A failure carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            kind: "usage",
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_line = self
            .message
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        write!(f, "error[{}]: {}", self.kind, one_line)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Config(_) => (1, "config"),
            Error::InvalidInput(_) => (2, "invalid-input"),
            Error::Domain(_) => (2, "domain"),
            Error::StaleRanking { .. } => (2, "stale-ranking"),
            Error::Decode { .. } => (2, "decode"),
            Error::Io(_) => (2, "io"),
        };
        Self {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

fn with_path(path: &Path) -> impl Fn(Error) -> CliError + '_ {
    move |e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    }
}

fn load_kb(path: &Path) -> Result<EuclideanCodebook, CliError> {
    EuclideanCodebook::load(path).map_err(with_path(path))
}

/// Executes a parsed command, writing human-readable progress to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let report = |e: std::io::Error| CliError {
        code: 3,
        kind: "internal",
        message: e.to_string(),
    };
    match cli.command {
        Command::Rank { input, output } => {
            let kb = load_kb(&input)?;
            let start = Instant::now();
            let ranking = ranking::compute_ranking(&kb)?;
            let elapsed = start.elapsed();
            ranking.write(&output).map_err(with_path(&output))?;
            writeln!(
                out,
                "ranked K={} dim={} root={} in {:.3}s",
                kb.size(),
                kb.dim(),
                ranking.root(),
                elapsed.as_secs_f64()
            )
            .map_err(report)?;
        }
        Command::Resize {
            input,
            ranking,
            size,
            output,
        } => {
            let kb = load_kb(&input)?;
            let rk = ImportanceRanking::read(&ranking).map_err(with_path(&ranking))?;
            if size == 0 || size > kb.size() {
                return Err(CliError::usage(format!(
                    "--size {size} outside 1..={}",
                    kb.size()
                )));
            }
            let child = ranking::resize(&kb, &rk, size)?;
            child.save(&output).map_err(with_path(&output))?;
            writeln!(out, "resized K={} -> K={size}", kb.size()).map_err(report)?;
        }
        Command::Quantize {
            features,
            kb,
            output,
        } => {
            let grid = FeatureGrid::read(&features).map_err(with_path(&features))?;
            let kb = load_kb(&kb)?;
            let indices = codec::quantize(&grid, &kb)?;
            indices.write(&output).map_err(with_path(&output))?;
            writeln!(
                out,
                "quantized {}x{} cells with K={} ({} bits per index)",
                grid.height(),
                grid.width(),
                kb.size(),
                codec::bits_per_index(kb.size() as u64)?
            )
            .map_err(report)?;
        }
        Command::Dequantize {
            indices,
            kb,
            output,
        } => {
            let grid = IndexGrid::read(&indices).map_err(with_path(&indices))?;
            let kb = load_kb(&kb)?;
            let features = codec::dequantize(&grid, &kb)?;
            features.write(&output).map_err(with_path(&output))?;
            writeln!(out, "dequantized {}x{} cells", grid.height(), grid.width())
                .map_err(report)?;
        }
        Command::Pack { indices, output } => {
            let grid = IndexGrid::read(&indices).map_err(with_path(&indices))?;
            let payload = codec::pack(&grid);
            payload.write(&output).map_err(with_path(&output))?;
            writeln!(
                out,
                "packed {} indices at {} bits: {} payload bits",
                grid.indices().len(),
                payload.bits_per_index,
                payload.payload_bits()
            )
            .map_err(report)?;
        }
        Command::Unpack { input, output } => {
            let payload = Payload::read(&input).map_err(with_path(&input))?;
            let grid = codec::unpack(&payload).map_err(with_path(&input))?;
            grid.write(&output).map_err(with_path(&output))?;
            writeln!(out, "unpacked {}x{} indices", grid.height(), grid.width()).map_err(report)?;
        }
        Command::TreeExport {
            input,
            format,
            output,
        } => {
            let kb = load_kb(&input)?;
            let (_, tree) = ranking::build_semantic_tree(&kb)?;
            let text = match format {
                TreeFormat::Edges => tree.to_edge_list(),
                TreeFormat::Dot => tree.to_dot(),
            };
            write_atomic(&output, text.as_bytes()).map_err(with_path(&output))?;
            writeln!(
                out,
                "tree with {} nodes, root {}, total weight {}",
                tree.node_count(),
                tree.root(),
                crate::format::fmt_g17(tree.total_weight())
            )
            .map_err(report)?;
        }
        Command::Eval {
            config,
            out_dir,
            threads,
            seed,
        } => {
            let mut cfg = match &config {
                Some(path) => EvalConfig::load(path)?,
                None => EvalConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.sweep.seeds = vec![seed];
            }
            if threads == Some(0) {
                return Err(CliError::usage("--threads must be >= 1"));
            }
            let source = cfg.source.build()?;
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(n) = threads {
                pool = pool.num_threads(n);
            }
            let pool = pool.build().map_err(|e| CliError {
                code: 3,
                kind: "internal",
                message: e.to_string(),
            })?;
            let records = pool.install(|| harness::run_sweep(&source, &cfg.sweep))?;
            let summary = harness::summarize(&records);
            std::fs::create_dir_all(&out_dir).map_err(|e| with_path(&out_dir)(Error::Io(e)))?;
            let records_path = out_dir.join(&cfg.output.records);
            let summary_path = out_dir.join(&cfg.output.summary);
            write_atomic(&records_path, harness::records_csv(&records).as_bytes())
                .map_err(with_path(&records_path))?;
            write_atomic(&summary_path, harness::summary_csv(&summary).as_bytes())
                .map_err(with_path(&summary_path))?;
            writeln!(out, "{} records", records.len()).map_err(report)?;
            writeln!(out, "K,zero_shot_over_dedicated").map_err(report)?;
            for row in summary
                .iter()
                .filter(|r| r.method == harness::Method::ZeroShot)
            {
                if let Some(ratio) = row.ratio_to_dedicated {
                    writeln!(out, "{},{:.4}", row.kb_size, ratio).map_err(report)?;
                }
            }
            let max_k = cfg.sweep.parent_size / 16;
            if let Some(rate) = harness::zero_shot_win_rate(&records, max_k) {
                writeln!(
                    out,
                    "zero-shot <= random-subset in {:.1}% of cells with K <= {max_k}",
                    100.0 * rate
                )
                .map_err(report)?;
            }
        }
        Command::KbInfo { input } => {
            let kb = load_kb(&input)?;
            let norms: Vec<f64> = kb.vectors().map(crate::geometry::norm).collect();
            let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
            let max = norms.iter().copied().fold(0.0, f64::max);
            writeln!(out, "K={}", kb.size()).map_err(report)?;
            writeln!(out, "dim={}", kb.dim()).map_err(report)?;
            writeln!(
                out,
                "bits_per_index={}",
                codec::bits_per_index(kb.size() as u64)?
            )
            .map_err(report)?;
            writeln!(out, "norm_min={}", crate::format::fmt_g17(min)).map_err(report)?;
            writeln!(out, "norm_max={}", crate::format::fmt_g17(max)).map_err(report)?;
            writeln!(out, "fingerprint={}", kb.fingerprint()).map_err(report)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_with_args<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            write!(out, "{e}").map_err(|e| CliError {
                code: 3,
                kind: "internal",
                message: e.to_string(),
            })?;
            return Ok(());
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            return Err(CliError::usage(first.trim_start_matches("error: ")));
        }
    };
    run(cli, out)
}

pub fn main() -> ExitCode {
    let outcome = std::panic::catch_unwind(|| {
        let stdout = std::io::stdout();
        run_with_args(std::env::args_os(), &mut stdout.lock())
    });
    let err = match outcome {
        Ok(Ok(())) => return ExitCode::SUCCESS,
        Ok(Err(e)) => e,
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unexpected panic".into());
            CliError {
                code: 3,
                kind: "internal",
                message,
            }
        }
    };
    eprintln!("kbresize: {err}");
    ExitCode::from(err.code)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> Result<String, CliError> {
        let mut out = Vec::new();
        run_with_args(
            std::iter::once("kbresize").chain(args.iter().copied()),
            &mut out,
        )?;
        Ok(String::from_utf8(out).unwrap())
    }

    #[test]
    fn help_and_version_succeed() {
        assert!(run_args(&["--help"]).unwrap().contains("resize"));
        assert!(run_args(&["--version"])
            .unwrap()
            .contains(env!("CARGO_PKG_VERSION")));
        assert!(run_args(&["resize", "--help"])
            .unwrap()
            .contains("--ranking"));
    }

    #[test]
    fn usage_errors_exit_one() {
        for args in [
            &["frobnicate"][..],
            &["rank", "--input", "a.kbf"],
            &["resize", "--size", "x"],
        ] {
            let err = run_args(args).unwrap_err();
            assert_eq!(err.code, 1, "{err}");
            assert!(!err.to_string().contains('\n'));
        }
    }

    #[test]
    fn error_kinds_map_to_codes() {
        assert_eq!(CliError::from(Error::Config("x".into())).code, 1);
        assert_eq!(CliError::from(Error::decode(3, "bad")).code, 2);
        let stale = Error::StaleRanking {
            expected: "a".into(),
            found: "b".into(),
        };
        assert_eq!(CliError::from(stale).code, 2);
        let line = CliError::usage("two\nlines").to_string();
        assert_eq!(line, "error[usage]: two lines");
    }
}
