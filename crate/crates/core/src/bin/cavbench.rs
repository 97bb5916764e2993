use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cavbench::cav::{load_cav, save_cav};
use cavbench::harness::{
    cav_stem, exit_code, extract_one, prepare, run_prepared, write_outputs, write_synthetic,
    BenchmarkConfig,
};
use cavbench::ingest::SyntheticSpec;
use cavbench::{Error, MethodId};

#[derive(Parser)]
#[command(name = "cavbench", version, about = "CAV extraction and steering benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (method, concept, seed) cell of a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds, overriding the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Write a planted-concept dataset from a TOML spec.
    GenSynthetic {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract one CAV with the config's first seed.
    Extract {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        method: String,
        #[arg(long)]
        concept: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a stored CAV: norm, largest components and metadata.
    InspectCav { path: PathBuf },
}

fn load_config(path: &PathBuf) -> Result<BenchmarkConfig, Error> {
    BenchmarkConfig::from_file(path)
}

fn run(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Run {
            config,
            seeds,
            out,
            jobs,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(seeds) = seeds {
                cfg.seeds = seeds;
            }
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.unwrap_or(0))
                .build()
                .map_err(|e| Error::ConfigInvalid(e.to_string()))?;
            let report = pool.install(|| {
                let inputs = prepare(&cfg)?;
                run_prepared(&cfg, &inputs)
            })?;
            write_outputs(&report, &out)?;
            let failed = report.failed_rows();
            println!(
                "{} rows ({} failed) -> {}",
                report.rows.len(),
                failed,
                out.display()
            );
            Ok(if failed > 0 { 2 } else { 0 })
        }
        Command::GenSynthetic { spec, out } => {
            let text = std::fs::read_to_string(&spec).map_err(|e| Error::Io {
                path: spec.clone(),
                source: e,
            })?;
            let spec: SyntheticSpec = toml::from_str(&text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            write_synthetic(&spec, &out)?;
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Extract {
            config,
            method,
            concept,
            out,
        } => {
            let cfg = load_config(&config)?;
            let method: MethodId = method.parse()?;
            let inputs = prepare(&cfg)?;
            let cav = extract_one(&cfg, &inputs, method, &concept)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone()).join("cavs");
            let stem = cav_stem(method, &concept, cav.meta.seed);
            save_cav(&dir, &stem, &cav)?;
            println!("{}", dir.join(format!("{stem}.cavb")).display());
            Ok(0)
        }
        Command::InspectCav { path } => {
            let (v, meta) = load_cav(&path)?;
            let x = v.as_slice();
            let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            println!("dim  {}", x.len());
            println!("norm {norm:.9}");
            let mut idx: Vec<usize> = (0..x.len()).collect();
            idx.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
            println!("top components:");
            for &i in idx.iter().take(8) {
                println!("  [{i:>5}] {:+.6}", x[i]);
            }
            for (k, val) in meta {
                println!("{k} = {val}");
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
