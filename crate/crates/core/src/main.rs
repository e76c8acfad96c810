use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use covlab::covering::build_c0_covering;
use covlab::format::{read_covering, read_vector, read_vectors, write_covering, BuildConfig};
use covlab::probes::{c0_counterexample, kottman_greedy, parse_rational, SeparatedFamily};
use covlab::verifier::{verify, Status, VerificationReport, VerifyOptions};
use covlab::{eval_dual_norm, eval_norm, DualFunctional, Error, NormSpec};

/// Build and certify staged coverings of truncated c0(Γ) by smooth bodies.
///
/// Exit codes: 0 ok, 2 input error, 3 infeasible build, 4 coverage miss,
/// 5 disjointness failure, 6 unresolved pairs.
#[derive(Parser)]
#[command(name = "covlab", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a norm (and optionally its dual) on a vector file.
    Norm {
        #[command(flatten)]
        norm: NormArgs,
        #[arg(long)]
        vec: PathBuf,
        #[arg(long)]
        dual: bool,
    },
    /// Build a covering from a JSON config.
    Build {
        config: PathBuf,
        /// Overrides the config's output path; stdout when neither is set.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Verify a covering file and print the report.
    Verify {
        file: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Directory for degree_histogram.csv and misses.csv.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Separation probes.
    #[command(subcommand)]
    Probe(Probe),
}

#[derive(Subcommand)]
enum Probe {
    /// Translated sup-norm unit balls witnessing the failure of (I).
    C0 {
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value = "0.1", allow_hyphen_values = true)]
        delta: String,
    },
    /// Minimal pairwise distance of a family of unit vectors.
    Sep {
        #[arg(long)]
        vecs: PathBuf,
        #[command(flatten)]
        norm: NormArgs,
    },
    /// Greedy lower bound for the separation of `size` unit vectors.
    Kottman {
        #[command(flatten)]
        norm: NormArgs,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 6)]
        size: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    M,
    Scaled,
    Sup,
}

#[derive(Args)]
struct NormArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long = "M")]
    m: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    gamma0: Vec<u32>,
    #[arg(long)]
    q: Option<f64>,
}

impl NormArgs {
    fn spec(&self) -> Result<NormSpec, Error> {
        let need_m = || self.m.ok_or_else(|| Error::Parameter("--M is required for this norm".into()));
        let spec = match self.kind {
            Kind::Sup => NormSpec::Sup,
            Kind::M => NormSpec::m_norm(need_m()?),
            Kind::Scaled => NormSpec::scaled(
                need_m()?,
                self.gamma0.iter().copied(),
                self.q.ok_or_else(|| Error::Parameter("--q is required for the scaled norm".into()))?,
            ),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible(_) => 3,
        _ => 2,
    }
}

fn status_code(s: Status) -> u8 {
    match s {
        Status::Ok => 0,
        Status::Coverage => 4,
        Status::Disjointness => 5,
        Status::Unresolved => 6,
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

fn write_csv(dir: &Path, universe: &[u32], r: &VerificationReport) -> Result<(), Error> {
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("degree_histogram.csv")).map_err(csv_err)?;
    w.write_record(["degree", "count"]).map_err(csv_err)?;
    for (d, c) in &r.graph.histogram {
        w.write_record([d.to_string(), c.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("misses.csv")).map_err(csv_err)?;
    let mut head = vec!["piece".to_string(), "nearest_body".into(), "nearest_gauge".into()];
    head.extend(universe.iter().map(|i| format!("x{i}")));
    w.write_record(&head).map_err(csv_err)?;
    for m in &r.coverage.misses {
        let mut row = vec![
            m.piece.to_string(),
            m.nearest_body.map_or(String::new(), |b| b.to_string()),
            m.nearest_gauge.to_string(),
        ];
        row.extend(universe.iter().map(|&i| m.point.get(i).to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.cmd {
        Cmd::Norm { norm, vec, dual } => {
            let spec = norm.spec()?;
            let x = read_vector(&vec)?;
            println!("{}", eval_norm(&spec, &x)?);
            if dual {
                println!("{}", eval_dual_norm(&spec, &DualFunctional(x))?);
            }
            Ok(0)
        }
        Cmd::Build { config, output } => {
            let cfg = BuildConfig::from_json(&std::fs::read_to_string(&config)?)?;
            let schedule = cfg.schedule()?;
            let cov = build_c0_covering(&cfg.gamma(), cfg.n_stages, &schedule, &cfg.truncation()?)?;
            match output.or(cfg.output.map(PathBuf::from)) {
                Some(p) => {
                    write_covering(&p, &cov)?;
                    eprintln!("wrote {} bodies to {}", cov.bodies().len(), p.display());
                }
                None => print!("{}", covlab::format::covering_to_json(&cov)),
            }
            Ok(0)
        }
        Cmd::Verify { file, samples, seed, tol, csv, report } => {
            let cov = read_covering(&file)?;
            let r = verify(&cov, &VerifyOptions { samples, seed, tol })?;
            if let Some(dir) = csv {
                write_csv(&dir, &cov.universe, &r)?;
            }
            let text = json(&r) + "\n";
            match report {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
            Ok(status_code(r.status))
        }
        Cmd::Probe(Probe::C0 { n, delta }) => {
            let r = c0_counterexample(n, parse_rational(&delta)?)?;
            println!("{}", json(&r));
            Ok(0)
        }
        Cmd::Probe(Probe::Sep { vecs, norm }) => {
            let fam = SeparatedFamily::new(read_vectors(&vecs)?, norm.spec()?)?;
            println!("{}", json(&fam));
            Ok(0)
        }
        Cmd::Probe(Probe::Kottman { norm, dim, size }) => {
            println!("{}", json(&kottman_greedy(&norm.spec()?, dim, size)?));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("COVLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().ok();
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("covlab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
