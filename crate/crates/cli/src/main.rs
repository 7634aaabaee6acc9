use std::path::PathBuf;
use std::process::ExitCode;

use agas_core::experiments::{self, ExperimentConfig, ExperimentKind, LatticeSpec};
use agas_core::{par, Beta, Error};
use clap::{Args, Parser, Subcommand};

/// Arboreal gas simulation and exact verification.
#[derive(Parser)]
#[command(name = "agas", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact law of one (graph, phi, beta) by enumeration.
    Oracle(RunArgs),
    /// Draw samples (written as `<out>.jsonl`) and compare them with the oracle.
    Sample(RunArgs),
    /// Resampling invariance of a component.
    ResampleCheck(RunArgs),
    /// Dyadic intersection profile of two-sided walks.
    Intersect(RunArgs),
    /// Markov-type displacement ratios.
    Displace(RunArgs),
    /// Cluster observables over a beta grid on a torus.
    Sweep(RunArgs),
    /// Exact invariant suite.
    Validate(RunArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// JSON config; flags given on the command line override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Graph JSON file or `suite:<name>`.
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    side: Option<usize>,
    #[arg(long)]
    torus: bool,
    /// Site-percolation probability on the `--dim`/`--side` box.
    #[arg(long)]
    percolation: Option<f64>,
    /// `free`, `wired`, or a partition JSON file.
    #[arg(long)]
    phi: Option<String>,
    #[arg(long)]
    phi_mixture: Option<String>,
    /// Comma separated; `inf` for the spanning-forest limit.
    #[arg(long, value_delimiter = ',')]
    beta: Vec<Beta>,
    #[arg(long)]
    samples: Option<usize>,
    /// Burn-in sweeps.
    #[arg(long)]
    sweeps: Option<u64>,
    #[arg(long)]
    thin: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    origin: Option<usize>,
    #[arg(long = "observable", value_delimiter = ',')]
    observables: Vec<String>,
    #[arg(long)]
    scales: Option<u32>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    ns: Vec<usize>,
    #[arg(long)]
    walks: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    c0: Option<f64>,
    /// Observable scale for sweeps.
    #[arg(long)]
    scale: Option<usize>,
    #[arg(long)]
    out: Option<String>,
}

impl RunArgs {
    fn into_config(self, kind: ExperimentKind) -> anyhow::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                let c: ExperimentConfig = serde_json::from_str(&text)?;
                if c.kind != kind {
                    anyhow::bail!("config kind {:?} does not match this subcommand", c.kind);
                }
                c
            }
            None => ExperimentConfig::new(kind, String::new()),
        };
        if let Some(g) = self.graph {
            c.graph = Some(g);
            c.lattice = None;
        }
        if self.dim.is_some() || self.side.is_some() || self.torus {
            let prev = c.lattice;
            let dim = self.dim.or(prev.map(|l| l.dim));
            let side = self.side.or(prev.map(|l| l.side));
            let side = match (side, kind) {
                (Some(s), _) => s,
                // intersect sizes its own window
                (None, ExperimentKind::IntersectProfile) => 0,
                (None, _) => anyhow::bail!("`--side` is required with `--dim`"),
            };
            let Some(dim) = dim else { anyhow::bail!("`--dim` is required with `--side`") };
            let torus = self.torus || prev.is_some_and(|l| l.torus) || kind == ExperimentKind::TorusSweep;
            c.lattice = Some(LatticeSpec { dim, side, torus });
            c.graph = None;
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = Some(v); } )* };
        }
        set!(percolation, samples, sweeps, thin, origin, scales, pairs, walks, epsilon, c0, scale);
        if let Some(p) = self.phi {
            c.phi = Some(p);
            c.phi_mixture = None;
        }
        if let Some(p) = self.phi_mixture {
            c.phi_mixture = Some(p);
            c.phi = None;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if !self.beta.is_empty() {
            c.beta = self.beta;
        }
        if !self.observables.is_empty() {
            c.observables = self.observables;
        }
        if !self.ns.is_empty() {
            c.ns = self.ns;
        }
        if let Some(o) = self.out {
            c.out = o;
        }
        if c.out.is_empty() {
            anyhow::bail!("`--out` is required");
        }
        Ok(c)
    }
}

fn thread_cap() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("AGAS_THREADS") {
        let n: usize = v.parse().map_err(|_| anyhow::anyhow!("AGAS_THREADS must be a positive integer"))?;
        if n == 0 {
            anyhow::bail!("AGAS_THREADS must be a positive integer");
        }
        par::set_thread_cap(n);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Oracle(a) => (ExperimentKind::ExactLaw, a),
        Command::Sample(a) => (ExperimentKind::SampleVsOracle, a),
        Command::ResampleCheck(a) => (ExperimentKind::ResampleCheck, a),
        Command::Intersect(a) => (ExperimentKind::IntersectProfile, a),
        Command::Displace(a) => (ExperimentKind::DisplaceCheck, a),
        Command::Sweep(a) => (ExperimentKind::TorusSweep, a),
        Command::Validate(a) => (ExperimentKind::OracleValidate, a),
    };
    let config = match thread_cap().and_then(|_| args.into_config(kind)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("agas: {e}");
            return ExitCode::from(2);
        }
    };
    match experiments::run(&config) {
        Ok(record) => {
            for c in &record.criteria {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("wrote {}", config.csv_path().display());
            if record.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e @ (Error::InvalidArgument(_) | Error::Json(_))) => {
            eprintln!("agas: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("agas: {e}");
            ExitCode::from(1)
        }
    }
}
