//! Reproducible experiment runs: a JSON config in, a CSV table and a JSON
//! run record out.
//!
//! CSV schema version 1: comma separated, header row first, floats written
//! with 17 significant digits. Everything in the CSV is a function of the
//! config; wall times only appear in the run record.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::beta::Beta;
use crate::error::{invalid, Error, Result};
use crate::forest;
use crate::graph::{build_lattice_window, EdgeId, FiniteGraph, VertexId};
use crate::observables::{cluster_observables, default_scale, ClusterObservables};
use crate::oracle::{self, EdgeMask, ExactLaw};
use crate::partition::{BoundaryMixture, BoundaryPartition};
use crate::resample::{invariance_statistic, resample_push_forward, Observable};
use crate::rng;
use crate::sampler::{sample_map, SamplingPlan};
use crate::stats::{chi_square_vs_law, empirical_tv_vs_law, Histogram, Moments};
use crate::suite;
use crate::validate;
use crate::walks::{
    self, dyadic_profile, estimate_c0, max_displacement_ratio, profile_constants, profile_window_side,
    EmbeddedGraph, LatticeBox, ScaleProfile,
};

pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const SIGNIFICANCE: f64 = 1e-3;
/// Confinement level implied by the default tolerance `1 - epsilon`.
pub const MIN_CONFINEMENT: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Exact law of one (graph, phi, beta); written as `<out>.json` too.
    ExactLaw,
    OracleValidate,
    SampleVsOracle,
    ResampleCheck,
    TorusSweep,
    IntersectProfile,
    DisplaceCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub dim: usize,
    /// Ignored by intersect-profile, which sizes its own window.
    #[serde(default)]
    pub side: usize,
    #[serde(default)]
    pub torus: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Graph JSON path, or `suite:<name>` for a built-in suite graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
    /// Site-percolation probability applied to `lattice` (displace-check).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percolation: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub beta: Vec<Beta>,
    /// `free`, `wired`, or a path to a partition JSON file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<String>,
    /// Path to a boundary-mixture JSON file; replaces `phi`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_mixture: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Burn-in sweeps of each heat-bath chain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<u64>,
    /// Sweeps between retained samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thin: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observables: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<VertexId>,
    /// Largest dyadic scale of an intersection profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ns: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Fixes `C0` instead of estimating it from a pilot run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    /// Observable scale `r` for torus sweeps; defaults to side / 4.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<usize>,
    /// Output stem: the run writes `<out>.csv` and `<out>.meta.json`.
    pub out: String,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, out: impl Into<String>) -> Self {
        ExperimentConfig {
            kind,
            graph: None,
            lattice: None,
            percolation: None,
            beta: Vec::new(),
            phi: None,
            phi_mixture: None,
            samples: None,
            sweeps: None,
            thin: None,
            seed: 0,
            observables: Vec::new(),
            origin: None,
            scales: None,
            pairs: None,
            ns: Vec::new(),
            walks: None,
            epsilon: None,
            c0: None,
            scale: None,
            out: out.into(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        ExperimentConfig::from_json(&fs::read_to_string(path)?)
    }

    /// Checks kind-specific required fields and numeric ranges, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        fn need<T>(field: &str, v: &Option<T>) -> Result<()> {
            match v {
                Some(_) => Ok(()),
                None => invalid(format!("field `{field}` is required for this kind")),
            }
        }
        fn positive(field: &str, v: Option<usize>) -> Result<()> {
            match v {
                Some(0) => invalid(format!("field `{field}` must be positive")),
                _ => Ok(()),
            }
        }
        if self.out.is_empty() {
            return invalid("field `out` must name an output stem");
        }
        positive("samples", self.samples)?;
        positive("pairs", self.pairs)?;
        positive("walks", self.walks)?;
        positive("scale", self.scale)?;
        if self.thin == Some(0) {
            return invalid("field `thin` must be positive");
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e < 1.0) {
                return invalid("field `epsilon` must lie in (0, 1)");
            }
        }
        if let Some(c) = self.c0 {
            if !(c > 0.0) || !c.is_finite() {
                return invalid("field `c0` must be positive");
            }
        }
        if let Some(p) = self.percolation {
            if !(0.0..=1.0).contains(&p) {
                return invalid("field `percolation` must lie in [0, 1]");
            }
        }
        if self.graph.is_some() && self.lattice.is_some() {
            return invalid("fields `graph` and `lattice` are mutually exclusive");
        }
        if self.phi.is_some() && self.phi_mixture.is_some() {
            return invalid("fields `phi` and `phi_mixture` are mutually exclusive");
        }
        for o in &self.observables {
            if self.kind == ExperimentKind::ResampleCheck {
                o.parse::<Observable>()?;
            }
        }
        if self.ns.contains(&0) {
            return invalid("field `ns` must contain positive step counts");
        }
        if let Some(l) = self.lattice {
            if self.kind != ExperimentKind::IntersectProfile && l.side < 2 {
                return invalid("field `lattice.side` must be at least 2");
            }
        }
        let has_graph = self.graph.is_some() || self.lattice.is_some();
        match self.kind {
            ExperimentKind::OracleValidate => Ok(()),
            ExperimentKind::ExactLaw => {
                if !has_graph {
                    return invalid("field `graph` or `lattice` is required for exact-law");
                }
                if self.beta.len() != 1 {
                    return invalid("field `beta` must hold exactly one value for exact-law");
                }
                Ok(())
            }
            ExperimentKind::SampleVsOracle | ExperimentKind::ResampleCheck => {
                if !has_graph {
                    return invalid("field `graph` or `lattice` is required for this kind");
                }
                need("samples", &self.samples)?;
                if self.beta.is_empty() {
                    return invalid("field `beta` must list at least one value");
                }
                if self.kind == ExperimentKind::ResampleCheck {
                    need("origin", &self.origin)?;
                }
                Ok(())
            }
            ExperimentKind::TorusSweep => {
                let Some(l) = self.lattice else {
                    return invalid("field `lattice` is required for torus-sweep");
                };
                if !l.torus {
                    return invalid("field `lattice.torus` must be true for torus-sweep");
                }
                need("samples", &self.samples)?;
                if self.beta.is_empty() {
                    return invalid("field `beta` must list at least one value");
                }
                Ok(())
            }
            ExperimentKind::IntersectProfile => {
                let Some(l) = self.lattice else {
                    return invalid("field `lattice` (dim) is required for intersect-profile");
                };
                if !(1..=5).contains(&l.dim) {
                    return invalid("field `lattice.dim` must lie in 1..=5");
                }
                need("scales", &self.scales)?;
                need("pairs", &self.pairs)?;
                match self.scales {
                    Some(n) if (1..=walks::MAX_PROFILE_SCALE).contains(&n) => Ok(()),
                    _ => invalid(format!("field `scales` must lie in 1..={}", walks::MAX_PROFILE_SCALE)),
                }
            }
            ExperimentKind::DisplaceCheck => {
                if !has_graph {
                    return invalid("field `graph` or `lattice` is required for displace-check");
                }
                need("walks", &self.walks)?;
                if self.ns.is_empty() {
                    return invalid("field `ns` must list at least one step count");
                }
                Ok(())
            }
        }
    }

    pub fn csv_path(&self) -> PathBuf {
        PathBuf::from(format!("{}.csv", self.stem()))
    }

    pub fn meta_path(&self) -> PathBuf {
        PathBuf::from(format!("{}.meta.json", self.stem()))
    }

    /// Path of an extra artifact, e.g. `jsonl` for drawn samples.
    pub fn artifact_path(&self, ext: &str) -> PathBuf {
        PathBuf::from(format!("{}.{ext}", self.stem()))
    }

    fn stem(&self) -> &str {
        [".csv", ".jsonl", ".json"]
            .iter()
            .find_map(|ext| self.out.strip_suffix(ext))
            .unwrap_or(&self.out)
    }

    fn plan(&self) -> SamplingPlan {
        let mut plan = SamplingPlan::new(self.samples.unwrap_or(1));
        if let Some(s) = self.sweeps {
            plan.burn_in = s;
        }
        if let Some(t) = self.thin {
            plan.thin = t;
        }
        plan
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Criterion {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Criterion { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub tool_version: String,
    pub rng_algorithm: String,
    pub csv_schema_version: u32,
    pub wall_time: f64,
    pub summaries: Value,
    pub criteria: Vec<Criterion>,
    pub passed: bool,
}

/// One experiment's output before it is written to disk.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub csv: String,
    /// Extra files keyed by extension.
    pub artifacts: Vec<(String, String)>,
    pub summaries: Value,
    pub criteria: Vec<Criterion>,
}

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

struct Table {
    text: String,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { text: format!("{}\n", header.join(",")) }
    }

    fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.text, "{}", cells.join(","));
    }
}

/// A resolved graph with the boundary set used for `free` and `wired`.
pub struct LoadedGraph {
    pub graph: Arc<FiniteGraph>,
    pub boundary: Option<Vec<VertexId>>,
}

pub fn load_graph(spec: &str) -> Result<LoadedGraph> {
    if let Some(name) = spec.strip_prefix("suite:") {
        let s = suite::by_name(name).ok_or_else(|| Error::InvalidArgument(format!("unknown suite graph {name:?}")))?;
        return Ok(LoadedGraph { graph: s.graph, boundary: Some(s.boundary) });
    }
    let g = FiniteGraph::from_json(&fs::read_to_string(spec)?)?;
    let boundary = g.ambient_boundary();
    Ok(LoadedGraph { graph: Arc::new(g), boundary })
}

fn config_graph(config: &ExperimentConfig) -> Result<LoadedGraph> {
    if let Some(spec) = &config.graph {
        return load_graph(spec);
    }
    if let Some(l) = config.lattice {
        let g = build_lattice_window(l.dim, l.side, l.torus)?;
        let boundary = g.ambient_boundary();
        return Ok(LoadedGraph { graph: Arc::new(g), boundary });
    }
    invalid("no graph given")
}

/// Resolves `free`, `wired` or a partition file against the graph's boundary set.
pub fn resolve_phi(spec: Option<&str>, g: &LoadedGraph) -> Result<BoundaryPartition> {
    let boundary = || {
        g.boundary.clone().ok_or_else(|| {
            Error::InvalidArgument("graph has no boundary designation; pass a partition file".into())
        })
    };
    let phi = match spec.unwrap_or("free") {
        "free" => BoundaryPartition::free(g.boundary.clone().unwrap_or_default()),
        "wired" => BoundaryPartition::wired(boundary()?),
        path => serde_json::from_str(&fs::read_to_string(path)?)?,
    };
    if phi.ground_set().iter().any(|&v| v >= g.graph.vertex_count()) {
        return invalid("boundary partition names a vertex outside the graph");
    }
    Ok(phi)
}

fn resolve_mixture(config: &ExperimentConfig, g: &LoadedGraph) -> Result<BoundaryMixture> {
    match &config.phi_mixture {
        Some(path) => Ok(serde_json::from_str(&fs::read_to_string(path)?)?),
        None => Ok(BoundaryMixture::point(resolve_phi(config.phi.as_deref(), g)?)),
    }
}

/// Runs the experiment and writes `<out>.csv` and `<out>.meta.json`.
pub fn run(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let start = Instant::now();
    let output = execute(config)?;
    let passed = output.criteria.iter().all(|c| c.passed);
    let record = RunRecord {
        config: config.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        rng_algorithm: rng::RNG_ALGORITHM.to_string(),
        csv_schema_version: CSV_SCHEMA_VERSION,
        wall_time: start.elapsed().as_secs_f64(),
        summaries: output.summaries,
        criteria: output.criteria,
        passed,
    };
    let csv_path = config.csv_path();
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&csv_path, output.csv)?;
    for (ext, text) in &output.artifacts {
        fs::write(config.artifact_path(ext), text)?;
    }
    fs::write(config.meta_path(), serde_json::to_string_pretty(&record)?)?;
    Ok(record)
}

/// Runs the experiment without touching the filesystem for outputs.
pub fn execute(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    match config.kind {
        ExperimentKind::ExactLaw => exact_law(config),
        ExperimentKind::OracleValidate => oracle_validate(config),
        ExperimentKind::SampleVsOracle => sample_vs_oracle(config),
        ExperimentKind::ResampleCheck => resample_check(config),
        ExperimentKind::TorusSweep => torus_sweep(config),
        ExperimentKind::IntersectProfile => intersect_profile(config),
        ExperimentKind::DisplaceCheck => displace_check(config),
    }
}

fn exact_law(config: &ExperimentConfig) -> Result<RunOutput> {
    let g = config_graph(config)?;
    let nu = resolve_mixture(config, &g)?;
    let beta = config.beta[0];
    let law = oracle::mixture_pmf(&g.graph, &nu, beta)?;
    let mut t = Table::new(&["edges", "prob"]);
    for (m, p) in law.iter() {
        let ids: Vec<String> = oracle::mask_to_ids(m).iter().map(|e| e.to_string()).collect();
        t.row(&[ids.join(";"), float(p)]);
    }
    let mass = oracle::kahan_sum(law.probs().iter().copied());
    let criteria = vec![Criterion::new("law has unit mass", (mass - 1.0).abs() < 1e-12, format!("total mass {mass}"))];
    Ok(RunOutput {
        csv: t.text,
        artifacts: vec![("json".into(), law.to_json())],
        summaries: json!({ "beta": beta, "support": law.len() }),
        criteria,
    })
}

fn oracle_validate(config: &ExperimentConfig) -> Result<RunOutput> {
    let checks = validate::run_all(config.seed)?;
    let mut t = Table::new(&["check", "passed", "cases", "worst"]);
    let mut criteria = Vec::new();
    for c in &checks {
        t.row(&[c.name.clone(), c.passed.to_string(), c.cases.to_string(), float(c.worst)]);
        criteria.push(Criterion::new(&c.name, c.passed, format!("{} cases, worst deviation {:e}", c.cases, c.worst)));
    }
    Ok(RunOutput { csv: t.text, artifacts: Vec::new(), summaries: json!({ "checks": checks }), criteria })
}

/// Samples from a boundary mixture: atom counts are multinomial, then each
/// atom is sampled on its own stream. Each sample is returned as sorted edge
/// ids together with whether it extends its atom.
fn sample_mixture(
    g: &Arc<FiniteGraph>,
    nu: &BoundaryMixture,
    beta: Beta,
    plan: SamplingPlan,
    seed: u64,
) -> Result<Vec<(Vec<EdgeId>, bool)>> {
    let atoms = nu.atoms();
    let mut counts = vec![0usize; atoms.len()];
    if atoms.len() == 1 {
        counts[0] = plan.samples;
    } else {
        let mut r = rng::stream(seed, u64::MAX);
        for _ in 0..plan.samples {
            let mut u: f64 = r.random();
            let mut pick = atoms.len() - 1;
            for (i, (_, w)) in atoms.iter().enumerate() {
                if u < *w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            counts[pick] += 1;
        }
    }
    let mut out = Vec::with_capacity(plan.samples);
    for (i, ((phi, _), &n)) in atoms.iter().zip(&counts).enumerate() {
        if n == 0 {
            continue;
        }
        let atom_plan = SamplingPlan { samples: n, ..plan };
        let atom_seed = seed.wrapping_add((i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let (drawn, _) = sample_map(g, phi, beta, atom_plan, atom_seed, |e, _| {
            let ids: Vec<EdgeId> = (0..e.len()).filter(|&k| e[k]).collect();
            (ids, forest::extends(g, phi, e))
        })?;
        out.extend(drawn);
    }
    Ok(out)
}

fn sample_vs_oracle(config: &ExperimentConfig) -> Result<RunOutput> {
    let g = config_graph(config)?;
    let nu = resolve_mixture(config, &g)?;
    let exact = g.graph.edge_count() <= oracle::ENUMERATION_GUARD;
    let plan = config.plan();
    let mut t = Table::new(&["beta", "samples", "mean_edges", "support", "chi2", "dof", "p_value", "tv"]);
    let mut criteria = Vec::new();
    let mut summaries = Vec::new();
    let mut lines = String::new();
    for (i, &beta) in config.beta.iter().enumerate() {
        let drawn = sample_mixture(&g.graph, &nu, beta, plan, config.seed.wrapping_add(i as u64))?;
        let mut size = Moments::default();
        for (ids, _) in &drawn {
            size.push(ids.len() as f64);
            lines.push_str(&serde_json::to_string(ids)?);
            lines.push('\n');
        }
        let all_forests = drawn.iter().all(|(_, ok)| *ok);
        criteria.push(Criterion::new(format!("samples extend phi at beta={beta}"), all_forests, "acyclic in the quotient"));
        let mut row = vec![beta.to_string(), plan.samples.to_string(), float(size.mean)];
        if exact {
            let law: ExactLaw = oracle::mixture_pmf(&g.graph, &nu, beta)?;
            let hist: Histogram<EdgeMask> = drawn.iter().map(|(ids, _)| oracle::ids_to_mask(ids)).collect();
            let chi = chi_square_vs_law(&hist, &law)?;
            let tv = empirical_tv_vs_law(&hist, &law);
            row.extend([law.len().to_string(), float(chi.statistic), chi.dof.to_string(), float(chi.p_value), float(tv)]);
            criteria.push(Criterion::new(
                format!("chi-square vs oracle at beta={beta}"),
                chi.p_value > SIGNIFICANCE,
                format!("p = {:e}, tv = {tv:e}", chi.p_value),
            ));
            summaries.push(json!({ "beta": beta, "edges": size, "chi_square": chi, "tv": tv }));
        } else {
            row.extend(["".into(), "".into(), "".into(), "".into(), "".into()]);
            summaries.push(json!({ "beta": beta, "edges": size }));
        }
        t.row(&row);
    }
    Ok(RunOutput {
        csv: t.text,
        artifacts: vec![("jsonl".into(), lines)],
        summaries: Value::Array(summaries),
        criteria,
    })
}

fn resample_check(config: &ExperimentConfig) -> Result<RunOutput> {
    let g = config_graph(config)?;
    let phi = resolve_phi(config.phi.as_deref(), &g)?;
    let o = config.origin.expect("validated");
    if o >= g.graph.vertex_count() {
        return invalid(format!("origin {o} is not a vertex"));
    }
    let observables: Vec<Observable> = if config.observables.is_empty() {
        vec![Observable::ComponentSizeOfO]
    } else {
        config.observables.iter().map(|s| s.parse()).collect::<Result<_>>()?
    };
    let plan = config.plan();
    let mut t = Table::new(&["beta", "observable", "samples", "tv", "chi2", "dof", "p_value"]);
    let mut criteria = Vec::new();
    let mut summaries = Vec::new();
    for (i, &beta) in config.beta.iter().enumerate() {
        if g.graph.edge_count() <= oracle::ENUMERATION_GUARD {
            let law = oracle::exact_pmf(&g.graph, &phi, beta)?;
            let pushed = resample_push_forward(&g.graph, &phi, &law, o)?;
            let tv = oracle::total_variation(&law, &pushed);
            criteria.push(Criterion::new(format!("exact kernel invariance at beta={beta}"), tv < 1e-10, format!("tv = {tv:e}")));
        }
        for (j, &obs) in observables.iter().enumerate() {
            let seed = config.seed.wrapping_add((i * observables.len() + j) as u64);
            let r = invariance_statistic(&g.graph, &phi, beta, o, plan, obs, seed)?;
            t.row(&[
                beta.to_string(),
                obs.to_string(),
                r.samples.to_string(),
                float(r.tv),
                float(r.chi_square.statistic),
                r.chi_square.dof.to_string(),
                float(r.chi_square.p_value),
            ]);
            criteria.push(Criterion::new(
                format!("{obs} invariance at beta={beta}"),
                r.chi_square.p_value > SIGNIFICANCE,
                format!("tv = {:e}, p = {:e}", r.tv, r.chi_square.p_value),
            ));
            summaries.push(json!({ "beta": beta, "report": r }));
        }
    }
    Ok(RunOutput { csv: t.text, artifacts: Vec::new(), summaries: Value::Array(summaries), criteria })
}

fn torus_sweep(config: &ExperimentConfig) -> Result<RunOutput> {
    let l = config.lattice.expect("validated");
    let g = Arc::new(build_lattice_window(l.dim, l.side, true)?);
    let r = config.scale.unwrap_or_else(|| default_scale(l.side));
    // Tori have no boundary, so the free and wired conditions coincide.
    let phi = BoundaryPartition::free([]);
    let plan = config.plan();
    let mut header = vec!["beta".to_string(), "samples".to_string(), "r".to_string()];
    for n in ClusterObservables::NAMES {
        header.push(format!("{n}_mean"));
        header.push(format!("{n}_stderr"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new(&header_refs);
    let mut criteria = Vec::new();
    let mut summaries = Vec::new();
    for (i, &beta) in config.beta.iter().enumerate() {
        let (drawn, report) = sample_map(&g, &phi, beta, plan, config.seed.wrapping_add(i as u64), |e, _| {
            (cluster_observables(&g, e, r), forest::extends(&g, &phi, e))
        })?;
        let acyclic = drawn.iter().all(|(_, ok)| *ok);
        let obs: Vec<ClusterObservables> = drawn.into_iter().map(|(o, _)| o).collect::<Result<_>>()?;
        let mut moments = [Moments::default(); 5];
        let mut crossing: Histogram<u64> = Histogram::new();
        for o in &obs {
            for (m, v) in moments.iter_mut().zip(o.values()) {
                m.push(v);
            }
            crossing.add(o.crossing_trees);
        }
        let mut row = vec![beta.to_string(), plan.samples.to_string(), r.to_string()];
        for m in &moments {
            row.push(float(m.mean));
            row.push(float(m.stderr()));
        }
        t.row(&row);
        criteria.push(Criterion::new(format!("forests acyclic at beta={beta}"), acyclic, "every sample checked"));
        if beta.is_infinite() {
            let anchored = obs.iter().all(|o| o.largest_fraction == 1.0 && o.crossing_trees == 1);
            criteria.push(Criterion::new(
                "beta=inf spanning-tree anchor",
                anchored,
                "every sample is a spanning tree with one crossing tree",
            ));
        }
        summaries.push(json!({
            "beta": beta,
            "surrogate_observables": true,
            "crossing_trees_histogram": crossing,
            "steps": report.steps,
        }));
    }
    Ok(RunOutput { csv: t.text, artifacts: Vec::new(), summaries: Value::Array(summaries), criteria })
}

/// Side of the implicit box used by pilot displacement runs of `steps` steps.
fn pilot_side(steps: usize) -> usize {
    2 * (16.0 * (steps as f64).sqrt()).ceil() as usize + 1
}

/// `C0` from a pilot displacement run over `4^1 .. 4^n_max`.
pub fn pilot_c0(dim: usize, n_max: u32, walks: usize, seed: u64) -> Result<f64> {
    let ns: Vec<usize> = (1..=n_max).map(|n| walks::dyadic_time(n) as usize).collect();
    let bx = LatticeBox::new(dim, pilot_side(*ns.last().unwrap_or(&1)))?;
    estimate_c0(&bx, bx.center(), &ns, walks, seed)
}

pub const PILOT_WALKS: usize = 2000;

/// The dyadic profile a run of `intersect-profile` computes.
pub fn profile_for(dim: usize, n_max: u32, pairs: usize, epsilon: f64, c0: Option<f64>, seed: u64) -> Result<(ScaleProfile, f64, usize)> {
    let c0 = match c0 {
        Some(c) => c,
        None => pilot_c0(dim, n_max, PILOT_WALKS, seed ^ 0x5eed_c0c0)?,
    };
    let (c1, c2) = profile_constants(c0, epsilon);
    let side = profile_window_side(n_max, c1);
    let bx = LatticeBox::new(dim, side)?;
    Ok((dyadic_profile(&bx, bx.center(), n_max, c1, c2, pairs, seed)?, c0, side))
}

/// Dimension-specific scaling verdict over scales `2..=n_max`, if it applies.
pub fn trichotomy(profile: &ScaleProfile) -> Option<(String, bool, f64)> {
    let rows: Vec<_> = profile.rows.iter().filter(|r| r.n >= 2).collect();
    if rows.len() < 2 {
        return None;
    }
    let first = rows[0].intersections;
    let last = rows[rows.len() - 1].intersections;
    match profile.dim {
        3 => Some(("I_last / I_2 > 4".into(), last / first > 4.0, last / first)),
        4 => {
            let max = rows.iter().map(|r| r.intersections).fold(f64::MIN, f64::max);
            let min = rows.iter().map(|r| r.intersections).fold(f64::MAX, f64::min);
            Some(("max I_n / min I_n <= 3".into(), max / min <= 3.0, max / min))
        }
        5 => Some(("I_last / I_2 < 1/2".into(), last / first < 0.5, last / first)),
        _ => None,
    }
}

fn intersect_profile(config: &ExperimentConfig) -> Result<RunOutput> {
    let l = config.lattice.expect("validated");
    let n_max = config.scales.expect("validated");
    let epsilon = config.epsilon.unwrap_or(walks::DEFAULT_EPSILON);
    let (profile, c0, side) = profile_for(l.dim, n_max, config.pairs.expect("validated"), epsilon, config.c0, config.seed)?;
    let mut t = Table::new(&["n", "t_n", "r_n", "I_n", "stderr", "confinement_frac", "attrition"]);
    for r in &profile.rows {
        t.row(&[
            r.n.to_string(),
            r.t_n.to_string(),
            r.r_n.to_string(),
            float(r.intersections),
            float(r.stderr),
            float(r.confinement_frac),
            float(r.attrition),
        ]);
    }
    let mut criteria = Vec::new();
    let worst = profile.rows.iter().map(|r| r.confinement_frac).fold(1.0, f64::min);
    criteria.push(Criterion::new(
        "confinement at every scale",
        worst >= 1.0 - epsilon,
        format!("smallest confinement fraction {worst}"),
    ));
    if let Some((name, ok, value)) = trichotomy(&profile) {
        criteria.push(Criterion::new(format!("d={} scaling: {name}", l.dim), ok, format!("observed {value}")));
    }
    let summaries = json!({
        "c0": c0,
        "c1": profile.c1,
        "c2": profile.c2,
        "epsilon": epsilon,
        "window_side": side,
        "profile": profile,
    });
    Ok(RunOutput { csv: t.text, artifacts: Vec::new(), summaries, criteria })
}

fn displace_check(config: &ExperimentConfig) -> Result<RunOutput> {
    let walks_n = config.walks.expect("validated");
    let mut t = Table::new(&["n", "ratio", "stderr"]);
    let estimates: Vec<(usize, walks::Estimate)> = match (config.lattice, config.percolation, &config.graph) {
        (Some(l), Some(p), _) => {
            let (g, rho) = walks::percolation_cluster(l.dim, l.side, p, config.seed ^ 0xc105)?;
            let e = EmbeddedGraph::new(&g)?;
            let rho = config.origin.unwrap_or(rho);
            config
                .ns
                .iter()
                .enumerate()
                .map(|(i, &n)| Ok((n, max_displacement_ratio(&e, rho, n, walks_n, config.seed.wrapping_add(i as u64))?)))
                .collect::<Result<_>>()?
        }
        (Some(l), None, _) if !l.torus => {
            let bx = LatticeBox::new(l.dim, l.side)?;
            let rho = config.origin.unwrap_or(bx.center());
            config
                .ns
                .iter()
                .enumerate()
                .map(|(i, &n)| Ok((n, max_displacement_ratio(&bx, rho, n, walks_n, config.seed.wrapping_add(i as u64))?)))
                .collect::<Result<_>>()?
        }
        _ => {
            let g = config_graph(config)?;
            let e = EmbeddedGraph::new(&g.graph)?;
            let rho = config.origin.unwrap_or(0);
            config
                .ns
                .iter()
                .enumerate()
                .map(|(i, &n)| Ok((n, max_displacement_ratio(&e, rho, n, walks_n, config.seed.wrapping_add(i as u64))?)))
                .collect::<Result<_>>()?
        }
    };
    for (n, est) in &estimates {
        t.row(&[n.to_string(), float(est.mean), float(est.stderr)]);
    }
    let mut criteria = Vec::new();
    if let Some((_, one)) = estimates.iter().find(|(n, _)| *n == 1) {
        criteria.push(Criterion::new("single-step ratio is 1", one.mean == 1.0, format!("observed {}", one.mean)));
    }
    let band: Vec<f64> = estimates.iter().filter(|(n, _)| *n > 1).map(|(_, e)| e.mean).collect();
    if band.len() >= 2 {
        let max = band.iter().copied().fold(f64::MIN, f64::max);
        let min = band.iter().copied().fold(f64::MAX, f64::min);
        criteria.push(Criterion::new("ratios within a factor 4 band", max <= 4.0 * min, format!("max/min = {}", max / min)));
    }
    let summaries = json!({ "estimates": estimates.iter().map(|(n, e)| json!({"n": n, "estimate": e})).collect::<Vec<_>>() });
    Ok(RunOutput { csv: t.text, artifacts: Vec::new(), summaries, criteria })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = r#"{"kind": "oracle-validate", "out": "x", "sead": 3}"#;
        assert!(ExperimentConfig::from_json(bad).is_err());
        let good = r#"{"kind": "oracle-validate", "out": "x", "seed": 3}"#;
        assert_eq!(ExperimentConfig::from_json(good).unwrap().seed, 3);
    }

    #[test]
    fn missing_fields_are_named() {
        let c = ExperimentConfig::new(ExperimentKind::IntersectProfile, "x");
        match c.validate() {
            Err(Error::InvalidArgument(m)) => assert!(m.contains("lattice"), "{m}"),
            other => panic!("{other:?}"),
        }
        let mut c = ExperimentConfig::new(ExperimentKind::SampleVsOracle, "x");
        c.graph = Some("suite:C3".into());
        c.beta = vec![Beta::Finite(1.0)];
        assert!(c.validate().is_err());
        c.samples = Some(10);
        assert!(c.validate().is_ok());
        c.samples = Some(0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_round_trip() {
        let mut c = ExperimentConfig::new(ExperimentKind::TorusSweep, "out/sweep");
        c.lattice = Some(LatticeSpec { dim: 2, side: 6, torus: true });
        c.beta = vec![Beta::Finite(0.5), Beta::Infinite];
        c.samples = Some(4);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
        assert_eq!(c.csv_path(), PathBuf::from("out/sweep.csv"));
        assert_eq!(c.meta_path(), PathBuf::from("out/sweep.meta.json"));
    }

    #[test]
    fn sample_vs_oracle_on_triangle() {
        let mut c = ExperimentConfig::new(ExperimentKind::SampleVsOracle, "x");
        c.graph = Some("suite:C3".into());
        c.beta = vec![Beta::Finite(1.0), Beta::Infinite];
        c.samples = Some(5000);
        c.seed = 3;
        let out = execute(&c).unwrap();
        assert!(out.criteria.iter().all(|k| k.passed), "{:?}", out.criteria);
        assert_eq!(out.csv.lines().count(), 3);
        assert_eq!(out.artifacts[0].1.lines().count(), 10000);
        assert_eq!(execute(&c).unwrap().csv, out.csv);
    }

    #[test]
    fn torus_sweep_anchor() {
        let mut c = ExperimentConfig::new(ExperimentKind::TorusSweep, "x");
        c.lattice = Some(LatticeSpec { dim: 2, side: 6, torus: true });
        c.beta = vec![Beta::Finite(1.0), Beta::Infinite];
        c.samples = Some(40);
        c.sweeps = Some(50);
        let out = execute(&c).unwrap();
        assert!(out.criteria.iter().all(|k| k.passed), "{:?}", out.criteria);
        assert!(out.csv.lines().nth(2).unwrap().starts_with("inf,40,1,1.0000000000000000e0,"));
    }

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(float(0.1), "1.0000000000000001e-1");
        assert_eq!(float(1.0 / 3.0).len(), "3.3333333333333331e-1".len());
    }

    #[test]
    fn mixture_file_atoms() {
        let dir = std::env::temp_dir().join(format!("agas-mix-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mix.json");
        fs::write(&path, r#"[{"classes": [[0], [1]], "prob": 0.5}, {"classes": [[0, 1]], "prob": 0.5}]"#).unwrap();
        let mut c = ExperimentConfig::new(ExperimentKind::SampleVsOracle, "x");
        c.graph = Some("suite:edge".into());
        c.phi_mixture = Some(path.to_string_lossy().into_owned());
        c.beta = vec![Beta::Finite(1.0)];
        c.samples = Some(8000);
        let out = execute(&c).unwrap();
        assert!(out.criteria[0].passed, "{:?}", out.criteria);
        fs::remove_dir_all(dir).unwrap();
    }
}
