//! Command-line front end: runs the local analysis and the global search,
//! persists certificates, and renders the comparison report.

use clap::{Parser, Subcommand, ValueEnum};
use hemimax::cert::{
    build_report, parse_global, parse_local, serialize_global, serialize_local, GLOBAL_HEADER,
    LOCAL_HEADER,
};
use hemimax::exact::{parse_rat, rat, rat_to_f64};
use hemimax::geometry::NeighborhoodSpec;
use hemimax::local::{j_positivity_witness, verify_local, MajorizerChoice};
use hemimax::oracle;
use hemimax::search::{run_global, RecordMode, SearchConfig};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_VERIFICATION_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "hemimax",
    version,
    about = "Certified verification that four points on the closed unit hemisphere span a distance sum of at most 4 + 4*sqrt(2)"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MajorizerArg {
    Exact,
    Rounded,
    Steep,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    /// Distance-order filter active (its tabled bounds are trusted).
    Filtered,
    /// Sum test only; slower but assumption-free.
    Trustless,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SwitchArg {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RecordsArg {
    Off,
    Failures,
    Full,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the exact local analysis on the box [-r0, r0]^4.
    VerifyLocal {
        /// Box radius as an exact rational, e.g. 1/7 (decimals are rejected).
        #[arg(long, default_value = "1/7")]
        r0: String,
        /// Which majorizer backs the soundness claim.
        #[arg(long, value_enum, default_value_t = MajorizerArg::Exact)]
        majorizer: MajorizerArg,
        /// Accept radii beyond 1/7 up to the enlarged analyzed range.
        #[arg(long)]
        allow_extended: bool,
        /// Random samples for the positivity-witness hunt on failure.
        #[arg(long, default_value_t = 20000)]
        witness_samples: u32,
        /// Write the certificate to this path.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the global cube search over the feasible set.
    VerifyGlobal {
        /// filtered: with the distance-order filter; trustless: sum test only.
        #[arg(long, value_enum, default_value_t = ModeArg::Filtered)]
        mode: ModeArg,
        /// Square-root precision exponent (bound denominators are 2^k).
        #[arg(long, default_value_t = 30)]
        precision: u32,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Exclude the neighborhoods handled by the local analysis.
        #[arg(long, value_enum, default_value_t = SwitchArg::On)]
        exclude_neighborhood: SwitchArg,
        /// Breadth-first edges, comma separated exact rationals.
        #[arg(long, default_value = "1/8,1/32")]
        bfs_edges: String,
        /// Finest depth-first edge (exact rational).
        #[arg(long, default_value = "1/2048")]
        dfs_max_edge: String,
        /// Per-cube record detail in the certificate.
        #[arg(long, value_enum, default_value_t = RecordsArg::Failures)]
        records: RecordsArg,
        /// Stop after this many failed cubes (diagnostic runs only).
        #[arg(long)]
        fail_fast: Option<usize>,
        /// Write the certificate to this path.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Floating-point cross-checks (never part of a certificate).
    Oracle {
        #[arg(long, default_value_t = 100)]
        restarts: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Restrict the search to v >= this exact rational.
        #[arg(long)]
        v_floor: Option<String>,
    },
    /// Compare certificates against the reference tallies.
    Report {
        /// Certificate files (local and/or global).
        paths: Vec<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn write_out(path: &Option<PathBuf>, content: &str) -> std::io::Result<()> {
    if let Some(p) = path {
        std::fs::write(p, content)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::VerifyLocal {
            r0,
            majorizer,
            allow_extended,
            witness_samples,
            output,
        } => {
            let r0 = match parse_rat(&r0) {
                Ok(r) => r,
                Err(e) => return usage_error(&e.to_string()),
            };
            if r0 <= rat(0, 1) || r0 > rat(1, 1) {
                return usage_error("r0 must satisfy 0 < r0 <= 1");
            }
            let standard_limit = rat(1, 7);
            let extended_limit = rat(2000, 13569);
            if r0 > standard_limit && !allow_extended {
                eprintln!(
                    "note: r0 = {r0} exceeds the standard radius 1/7; verification is expected to fail (pass --allow-extended for the enlarged analyzed range)"
                );
            } else if allow_extended && r0 > extended_limit {
                eprintln!("note: r0 = {r0} exceeds even the enlarged analyzed range");
            }
            let choice = match majorizer {
                MajorizerArg::Exact => MajorizerChoice::Exact,
                MajorizerArg::Rounded => MajorizerChoice::Rounded,
                MajorizerArg::Steep => MajorizerChoice::Steep,
            };
            let mut cert = verify_local(&r0, choice);
            if !cert.valid {
                cert.positivity_witness = j_positivity_witness(&cert.j, &r0, witness_samples, 2024);
            }
            let text = serialize_local(&cert);
            if let Err(e) = write_out(&output, &text) {
                return usage_error(&e.to_string());
            }
            println!(
                "local analysis on [-{r0}, {r0}]^4: {}",
                if cert.valid { "VALID" } else { "INVALID" }
            );
            for s in &cert.stages {
                println!(
                    "  stage {:<22} {}",
                    s.name,
                    if s.passed { "pass" } else { "FAIL" }
                );
            }
            if let Some((p, v)) = &cert.positivity_witness {
                println!(
                    "  positivity witness: s={} t={} u={} v={} value~{:.4}",
                    p.s,
                    p.t,
                    p.u,
                    p.v,
                    v.to_f64()
                );
            }
            if cert.valid {
                ExitCode::from(EXIT_OK)
            } else {
                println!(
                    "  failing stage: {}",
                    cert.failing_stage().unwrap_or("unknown")
                );
                ExitCode::from(EXIT_VERIFICATION_FAILED)
            }
        }
        Cmd::VerifyGlobal {
            mode,
            precision,
            workers,
            exclude_neighborhood,
            bfs_edges,
            dfs_max_edge,
            records,
            fail_fast,
            output,
        } => {
            let mut levels = Vec::new();
            for part in bfs_edges.split(',') {
                let e = match parse_rat(part) {
                    Ok(e) => e,
                    Err(e) => return usage_error(&e.to_string()),
                };
                match SearchConfig::level_for_edge(&e) {
                    Some(l) => levels.push(l),
                    None => return usage_error(&format!("edge {part} is not a grid level")),
                }
            }
            let max_edge = match parse_rat(&dfs_max_edge) {
                Ok(e) => e,
                Err(e) => return usage_error(&e.to_string()),
            };
            let dfs_max_level = match SearchConfig::level_for_edge(&max_edge) {
                Some(l) => l,
                None => return usage_error("dfs-max-edge is not a grid level"),
            };
            let cfg = SearchConfig {
                bfs_levels: levels,
                dfs_subdivision: 4,
                dfs_max_level,
                use_bound_filter: matches!(mode, ModeArg::Filtered),
                sqrt_precision: precision,
                worker_count: workers,
                exclude_neighborhood: matches!(exclude_neighborhood, SwitchArg::On),
                record_mode: match records {
                    RecordsArg::Off => RecordMode::Off,
                    RecordsArg::Failures => RecordMode::FailuresOnly,
                    RecordsArg::Full => RecordMode::Full,
                },
                fail_fast,
            };
            let cert = match run_global(&cfg, &NeighborhoodSpec::default()) {
                Ok(c) => c,
                Err(e) => return usage_error(&e.to_string()),
            };
            let text = serialize_global(&cert);
            if let Err(e) = write_out(&output, &text) {
                return usage_error(&e.to_string());
            }
            for r in &cert.rounds {
                println!(
                    "round level={} input={} feasible={} anchor={} excluded={} bound={} sum={} survivors={} ({:.1}s)",
                    r.level,
                    r.input,
                    r.feasible,
                    r.anchor_eliminated,
                    r.excluded,
                    r.bound_eliminated,
                    r.sum_eliminated,
                    r.survivors,
                    r.seconds
                );
            }
            println!(
                "dfs roots={} failures={} skipped={} ({:.1}s)",
                cert.dfs.roots, cert.dfs.failures, cert.dfs.skipped, cert.dfs.seconds
            );
            let parsed = parse_global(&text).expect("just serialized");
            print!("{}", build_report(None, Some(&parsed)).render());
            if cert.valid {
                println!("global search: VALID");
                ExitCode::from(EXIT_OK)
            } else {
                println!(
                    "global search: INVALID ({} witnesses)",
                    cert.witnesses.len()
                );
                for w in cert.witnesses.iter().take(10) {
                    println!("  witness {w}");
                }
                ExitCode::from(EXIT_VERIFICATION_FAILED)
            }
        }
        Cmd::Oracle {
            restarts,
            seed,
            v_floor,
        } => {
            let floor = match v_floor {
                None => 0.0,
                Some(s) => match parse_rat(&s) {
                    Ok(r) => rat_to_f64(&r),
                    Err(e) => return usage_error(&e.to_string()),
                },
            };
            let out = oracle::numeric_max_search_with_floor(restarts, seed, floor);
            println!(
                "best value {:.10} at s={:.6} t={:.6} u={:.6} v={:.6}",
                out.value, out.params[0], out.params[1], out.params[2], out.params[3]
            );
            println!("proven maximum {:.10}", oracle::OPT_VALUE);
            println!(
                "criticality at the square configuration: {:.3e}",
                oracle::criticality_check(&[0.0; 4], 1e-5)
            );
            let s = (std::f64::consts::PI / 12.0).tan();
            println!(
                "triangle-plus-pole value {:.10} (expected {:.10})",
                oracle::objective(&[s, s, 0.0, 1.0]),
                oracle::TRIANGLE_POLE_VALUE
            );
            ExitCode::from(EXIT_OK)
        }
        Cmd::Report { paths, output } => {
            if paths.is_empty() {
                return usage_error("report needs at least one certificate path");
            }
            let mut local = None;
            let mut global = None;
            for p in &paths {
                let text = match std::fs::read_to_string(p) {
                    Ok(t) => t,
                    Err(e) => return usage_error(&format!("{}: {e}", p.display())),
                };
                if text.starts_with(LOCAL_HEADER) {
                    match parse_local(&text) {
                        Ok(c) => local = Some(c),
                        Err(e) => return usage_error(&format!("{}: {e}", p.display())),
                    }
                } else if text.starts_with(GLOBAL_HEADER) {
                    match parse_global(&text) {
                        Ok(c) => global = Some(c),
                        Err(e) => return usage_error(&format!("{}: {e}", p.display())),
                    }
                } else {
                    return usage_error(&format!(
                        "{}: unrecognized certificate header",
                        p.display()
                    ));
                }
            }
            let report = build_report(local.as_ref(), global.as_ref());
            let rendered = report.render();
            print!("{rendered}");
            if let Err(e) = write_out(&output, &rendered) {
                return usage_error(&e.to_string());
            }
            if report.has_failure() {
                ExitCode::from(EXIT_VERIFICATION_FAILED)
            } else {
                ExitCode::from(EXIT_OK)
            }
        }
    }
}
