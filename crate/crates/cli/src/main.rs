use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use clique_factor::bench::{bench, to_json, write_csv, BenchConfig, Grid};
use clique_factor::certificate::verify_document;
use clique_factor::gen::{generate, GenKind, GenSpec};
use clique_factor::solver::solve;
use clique_factor::{Graph, Mode, SolverConfig, Verdict};

#[derive(Parser)]
#[command(name = "clique-factor", version, about = "Decide whether a graph has a K_r-factor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and print or write the result document.
    Solve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        r: usize,
        /// Override the degree deficit computed from the graph.
        #[arg(long, allow_hyphen_values = true)]
        c: Option<i64>,
        #[arg(long, default_value = "auto")]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate an instance; metadata goes next to it as `<out>.meta.json`.
    Gen {
        #[arg(long)]
        kind: GenKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 1)]
        s: usize,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        c: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check a result document against a graph. Exit 0 if it holds, 1 if not.
    Verify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
    },
    /// Run a TOML grid; rows go to `--out` as CSV and to `<out>.json`.
    Bench {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

const EXIT_INPUT: u8 = 3;

fn read_graph(path: &Path) -> Result<Graph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Graph::parse_edge_list(&text).with_context(|| format!("parsing {}", path.display()))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve { input, r, c, mode, seed, out } => {
            let g = read_graph(&input)?;
            let cfg = SolverConfig {
                mode,
                seed,
                c_override: c,
                ..SolverConfig::default()
            };
            let cert = solve(&g, r, &cfg)?;
            let doc = cert.to_json();
            match out {
                Some(p) => fs::write(&p, doc + "\n").with_context(|| format!("writing {}", p.display()))?,
                None => println!("{doc}"),
            }
            Ok(match cert.verdict {
                Verdict::FactorFound => 0,
                Verdict::NoFactor => 1,
                Verdict::Inconclusive => 2,
            })
        }
        Command::Gen { kind, n, r, s, c, seed, noise, out } => {
            let spec = GenSpec::new(kind, n, r).s(s).c(c).seed(seed).noise(noise);
            let gen = generate(&spec)?;
            fs::write(&out, gen.graph.to_edge_list()).with_context(|| format!("writing {}", out.display()))?;
            let meta = serde_json::to_string_pretty(&gen.meta)?;
            fs::write(sibling(&out, ".meta.json"), meta + "\n")?;
            Ok(0)
        }
        Command::Verify { input, certificate } => {
            let g = read_graph(&input)?;
            let text = fs::read_to_string(&certificate)
                .with_context(|| format!("reading {}", certificate.display()))?;
            let ok = verify_document(&g, &text)?;
            println!("{}", if ok { "valid" } else { "invalid" });
            Ok(if ok { 0 } else { 1 })
        }
        Command::Bench { grid, out } => {
            let text = fs::read_to_string(&grid).with_context(|| format!("reading {}", grid.display()))?;
            let grid: Grid = toml::from_str(&text).with_context(|| format!("parsing {}", grid.display()))?;
            let specs = grid.expand();
            if specs.iter().any(|s| s.r == 0) {
                bail!("grid contains r = 0");
            }
            let rows = bench(&specs, &BenchConfig::default());
            let file = fs::File::create(&out).with_context(|| format!("writing {}", out.display()))?;
            write_csv(&rows, file)?;
            fs::write(sibling(&out, ".json"), to_json(&rows) + "\n")?;
            eprintln!("{} rows", rows.len());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
