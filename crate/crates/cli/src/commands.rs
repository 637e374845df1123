//! Subcommand definitions and their runs. Every run is a pure function of
//! its resolved parameters and seed; the caller owns the I/O.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use mbtree_core::cuttree::{cut_tree, cuts_to_isolate_root, CutBase};
use mbtree_core::ensembles::{
    count_labeled, count_labeled_rooted, count_ordered, otter_counts, sample_cayley, sample_recursive,
    sample_uniform_ordered, PolyaSampler,
};
use mbtree_core::growth::{grow, GrowthModel};
use mbtree_core::gw::{sample_gw, sample_gw_n_leaves, sample_gw_n_vertices, GwOutcome, OffspringLaw};
use mbtree_core::leafchain::{moment_compare, phi_from_nu, LeafChain, LimitLaw};
use mbtree_core::mb::{marked_spine_sizes, sample_mb};
use mbtree_core::metric::{gh_rooted, gh_upper, ghp_upper, MeasuredMetricTree, Weights, GH_EXACT_MAX};
use mbtree_core::rng::Streams;
use mbtree_core::splitting::{parse_family, DislocationMeasure, Indexing};
use mbtree_core::stats::{ks_two_sample, mean_var};
use mbtree_core::RootedTree;

use crate::config::{load_file, need, resolve, Resolved};
use crate::error::{CliError, CliResult, Kind};

#[derive(Parser, Debug)]
#[command(name = "mbtree", version, about = "Markov-branching random tree experiments")]
pub struct Cli {
    /// Master seed; falls back to the config file, then MBTREE_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (outputs do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON object of parameters; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Main artifact path (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Summary JSON path (stderr when absent).
    #[arg(long, global = true)]
    pub summary: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Counting and uniform sampling of classical tree ensembles.
    #[command(subcommand)]
    Ensembles(EnsemblesCmd),
    /// Galton–Watson trees, optionally conditioned on their size.
    #[command(subcommand)]
    Gw(GwCmd),
    /// Markov-branching trees from a splitting family.
    #[command(subcommand)]
    Mb(MbCmd),
    /// Sequential growth models.
    Grow(GrowArgs),
    /// Edge deletion on Cayley or recursive trees.
    Cut(CutArgs),
    /// The size-biased leaf chain.
    #[command(subcommand)]
    Chain(ChainCmd),
    /// Distances between small measured metric trees.
    #[command(subcommand)]
    Metric(MetricCmd),
    /// The acceptance suite.
    #[command(subcommand)]
    Acceptance(AcceptanceCmd),
}

#[derive(Subcommand, Debug)]
pub enum EnsemblesCmd {
    Count(EnsCountArgs),
    Sample(EnsSampleArgs),
}

#[derive(Subcommand, Debug)]
pub enum GwCmd {
    Sample(GwSampleArgs),
}

#[derive(Subcommand, Debug)]
pub enum MbCmd {
    Sample(MbSampleArgs),
}

#[derive(Subcommand, Debug)]
pub enum ChainCmd {
    Absorb(ChainArgs),
}

#[derive(Subcommand, Debug)]
pub enum MetricCmd {
    Gh(GhArgs),
}

#[derive(Subcommand, Debug)]
pub enum AcceptanceCmd {
    Run(AcceptanceArgs),
}

macro_rules! params {
    ($(#[$meta:meta])* $name:ident { $($(#[$fmeta:meta])* $field:ident : $ty:ty),* $(,)? }) => {
        $(#[$meta])*
        #[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            $(
                $(#[$fmeta])*
                #[arg(long)]
                #[serde(skip_serializing_if = "Option::is_none", default)]
                pub $field: Option<$ty>,
            )*
        }
    };
}

params!(EnsCountArgs {
    /// ordered | labeled | labeled-rooted | polya
    family: String,
    n: usize,
});

params!(EnsSampleArgs {
    /// ordered | cayley | recursive | polya
    family: String,
    n: usize,
    reps: usize,
});

params!(GwSampleArgs {
    /// geo2 | poisson1 | binary | leafless-binary | stable:alpha=A,kappa=K
    offspring: String,
    /// vertices=N | leaves=N (unconditioned when absent)
    condition: String,
    reps: usize,
    /// Vertex cap for unconditioned trees.
    cap: usize,
});

params!(MbSampleArgs {
    /// Splitting family spec, e.g. ford:alpha=0.4
    family: String,
    /// leaves | vertices (must agree with the family)
    index: String,
    n: usize,
    reps: usize,
    /// height | diameter | leaves | vertices | spine | tree
    stat: String,
});

params!(GrowArgs {
    /// remy | ford:alpha=A | kary:k=K | marchal:beta=B
    model: String,
    steps: usize,
    emit_every: usize,
    reps: usize,
});

params!(CutArgs {
    /// cayley | recursive
    base: String,
    n: usize,
    reps: usize,
    /// cuts | first-split | cuttree-height
    emit: String,
});

params!(ChainArgs {
    /// Splitting family spec (leaves-indexed)
    family: String,
    n: usize,
    reps: usize,
    /// Self-similarity index; defaults to the family's own
    gamma: f64,
    /// Compare moments of A_n / n^γ up to this order
    compare_moments: usize,
    /// Monte Carlo size for stable dislocation measures
    limit_samples: usize,
});

params!(GhArgs {
    /// Parent-array JSON file
    a: PathBuf,
    /// Parent-array JSON file
    b: PathBuf,
    scale_a: f64,
    scale_b: f64,
    /// leaf | vertex
    weights: String,
});

params!(AcceptanceArgs {
    /// all, or a comma list of criterion ids
    suite: String,
});

/// What a run produced.
#[derive(Debug, Default)]
pub struct Output {
    pub primary: String,
    pub summary: Option<String>,
    pub failed: bool,
}

fn resolved<T: Serialize + serde::de::DeserializeOwned>(
    cli: &Cli,
    name: &str,
    args: &T,
) -> CliResult<Resolved<T>> {
    let file = cli.config.as_deref().map(load_file).transpose()?;
    resolve(name, args, cli.seed, file)
}

fn json_line(r: &Resolved<impl Sized>, mut obj: Map<String, Value>) -> CliResult<String> {
    r.stamp(&mut obj);
    Ok(serde_json::to_string_pretty(&Value::Object(obj))? + "\n")
}

fn tree_line(t: &RootedTree) -> String {
    serde_json::to_string(t).expect("trees serialize")
}

/// Collects per-replica results, surfacing the first error in replica order.
fn replicate<T: Send>(
    r: &Resolved<impl Sized>,
    domain: &str,
    reps: usize,
    f: impl Fn(&mut mbtree_core::rng::StreamRng) -> CliResult<T> + Sync + Send,
) -> CliResult<Vec<T>> {
    Streams::new(r.seed, domain)
        .replicate(reps, |_, rng| f(rng))
        .into_iter()
        .collect()
}

pub fn run(cli: &Cli) -> CliResult<Output> {
    match &cli.command {
        Command::Ensembles(EnsemblesCmd::Count(a)) => ensembles_count(&resolved(cli, "ensembles count", a)?),
        Command::Ensembles(EnsemblesCmd::Sample(a)) => ensembles_sample(&resolved(cli, "ensembles sample", a)?),
        Command::Gw(GwCmd::Sample(a)) => gw_sample(&resolved(cli, "gw sample", a)?),
        Command::Mb(MbCmd::Sample(a)) => mb_sample(&resolved(cli, "mb sample", a)?),
        Command::Grow(a) => grow_run(&resolved(cli, "grow", a)?),
        Command::Cut(a) => cut_run(&resolved(cli, "cut", a)?),
        Command::Chain(ChainCmd::Absorb(a)) => chain_absorb(&resolved(cli, "chain absorb", a)?),
        Command::Metric(MetricCmd::Gh(a)) => metric_gh(&resolved(cli, "metric gh", a)?),
        Command::Acceptance(AcceptanceCmd::Run(a)) => acceptance_run(&resolved(cli, "acceptance run", a)?),
    }
}

fn ensembles_count(r: &Resolved<EnsCountArgs>) -> CliResult<Output> {
    let p = &r.params;
    let (family, n) = (need(&p.family, "family")?, need(&p.n, "n")?);
    let count = match family.as_str() {
        "ordered" => count_ordered(n)?,
        "labeled" => count_labeled(n)?,
        "labeled-rooted" => count_labeled_rooted(n)?,
        "polya" => otter_counts(n)?.pop().expect("n ≥ 1"),
        _ => return Err(CliError::spec(format!("unknown ensemble {family:?}"))),
    };
    let obj = json!({"family": family, "n": n, "count": count.to_string()});
    Ok(Output {
        primary: json_line(r, obj.as_object().unwrap().clone())?,
        ..Output::default()
    })
}

fn ensembles_sample(r: &Resolved<EnsSampleArgs>) -> CliResult<Output> {
    let p = &r.params;
    let (family, n, reps) = (need(&p.family, "family")?, need(&p.n, "n")?, p.reps.unwrap_or(1));
    let polya = match family.as_str() {
        "polya" => Some(PolyaSampler::new(n)?),
        "ordered" | "cayley" | "recursive" => None,
        _ => return Err(CliError::spec(format!("unknown ensemble {family:?}"))),
    };
    let trees = replicate(r, "ensembles sample", reps, |rng| {
        Ok(match family.as_str() {
            "ordered" => sample_uniform_ordered(n, rng)?,
            "cayley" => sample_cayley(n, rng)?.tree,
            "recursive" => sample_recursive(n, rng)?.tree,
            _ => polya.as_ref().unwrap().sample(n, rng)?,
        })
    })?;
    let mut out = r.header();
    for t in &trees {
        out.push_str(&tree_line(t));
        out.push('\n');
    }
    Ok(Output {
        primary: out,
        ..Output::default()
    })
}

fn gw_sample(r: &Resolved<GwSampleArgs>) -> CliResult<Output> {
    let p = &r.params;
    let law = OffspringLaw::builtin(&need(&p.offspring, "offspring")?)?;
    let reps = p.reps.unwrap_or(1);
    let cap = p.cap.unwrap_or(1_000_000);
    let condition = match p.condition.as_deref() {
        None => None,
        Some(c) => {
            let (what, n) = c
                .split_once('=')
                .ok_or_else(|| CliError::general(format!("condition must be vertices=N or leaves=N, got {c:?}")))?;
            let n: usize = n
                .parse()
                .map_err(|_| CliError::general(format!("bad size in condition {c:?}")))?;
            if what != "vertices" && what != "leaves" {
                return Err(CliError::general(format!("condition must be vertices=N or leaves=N, got {c:?}")));
            }
            Some((what.to_string(), n))
        }
    };
    let trees = replicate(r, "gw sample", reps, |rng| match &condition {
        Some((w, n)) if w == "vertices" => Ok(Some(sample_gw_n_vertices(&law, *n, rng)?)),
        Some((_, n)) => Ok(Some(sample_gw_n_leaves(&law, *n, rng)?)),
        None => Ok(match sample_gw(&law, rng, cap) {
            GwOutcome::Tree(t) => Some(t),
            GwOutcome::Overflow => None,
        }),
    })?;
    let mut out = r.header();
    for t in &trees {
        match t {
            Some(t) => out.push_str(&tree_line(t)),
            None => out.push_str(r#"{"overflow":true}"#),
        }
        out.push('\n');
    }
    Ok(Output {
        primary: out,
        ..Output::default()
    })
}

fn mb_sample(r: &Resolved<MbSampleArgs>) -> CliResult<Output> {
    let p = &r.params;
    let family = parse_family(&need(&p.family, "family")?)?;
    if let Some(index) = p.index.as_deref() {
        let want = match index {
            "leaves" => Indexing::Leaves,
            "vertices" => Indexing::Vertices,
            _ => return Err(CliError::spec(format!("index must be leaves or vertices, got {index:?}"))),
        };
        if want != family.indexing() {
            return Err(CliError::spec(format!("{} is not indexed by {index}", family.name())));
        }
    }
    let n = need(&p.n, "n")?;
    let reps = p.reps.unwrap_or(1);
    let stat = p.stat.clone().unwrap_or_else(|| "height".into());
    if !["height", "diameter", "leaves", "vertices", "spine", "tree"].contains(&stat.as_str()) {
        return Err(CliError::general(format!("unknown statistic {stat:?}")));
    }
    if stat == "spine" && family.indexing() != Indexing::Leaves {
        return Err(CliError::spec("spine sizes need a leaves-indexed family"));
    }
    let rows = replicate(r, "mb sample", reps, |rng| {
        if stat == "spine" {
            let s = marked_spine_sizes(family.as_ref(), n, rng)?;
            return Ok(s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"));
        }
        let t = sample_mb(family.as_ref(), n, rng)?;
        Ok(match stat.as_str() {
            "height" => t.height().to_string(),
            "diameter" => t.diameter().to_string(),
            "leaves" => t.leaf_count().to_string(),
            "vertices" => t.len().to_string(),
            _ => format!("\"{}\"", tree_line(&t).replace('"', "\"\"")),
        })
    })?;
    let mut out = r.header();
    writeln!(out, "replica,{stat}").unwrap();
    for (i, v) in rows.iter().enumerate() {
        writeln!(out, "{i},{v}").unwrap();
    }
    Ok(Output {
        primary: out,
        ..Output::default()
    })
}

fn grow_run(r: &Resolved<GrowArgs>) -> CliResult<Output> {
    let p = &r.params;
    let model = GrowthModel::parse(&need(&p.model, "model")?)?;
    let steps = need(&p.steps, "steps")?;
    let every = p.emit_every.unwrap_or(steps).max(1);
    let reps = p.reps.unwrap_or(1);
    let rows = replicate(r, "grow", reps, |rng| {
        let run = grow(model, steps, rng)?;
        let mut rows = Vec::new();
        for k in (every..=steps).step_by(every) {
            let t = run.tree_at(k)?;
            rows.push((k, t.leaf_count(), t.len(), t.height(), t.diameter()));
        }
        Ok(rows)
    })?;
    let mut out = r.header();
    out.push_str("replica,step,leaves,vertices,height,diameter\n");
    for (i, rs) in rows.iter().enumerate() {
        for (k, l, v, h, d) in rs {
            writeln!(out, "{i},{k},{l},{v},{h},{d}").unwrap();
        }
    }
    Ok(Output {
        primary: out,
        ..Output::default()
    })
}

fn cut_run(r: &Resolved<CutArgs>) -> CliResult<Output> {
    let p = &r.params;
    let base = CutBase::parse(&need(&p.base, "base")?)?;
    let n = need(&p.n, "n")?;
    let reps = p.reps.unwrap_or(1);
    let emit = p.emit.clone().unwrap_or_else(|| "cuts".into());
    if !["cuts", "first-split", "cuttree-height"].contains(&emit.as_str()) {
        return Err(CliError::general(format!("unknown emit {emit:?}")));
    }
    if emit == "first-split" && n < 2 {
        return Err(CliError::general("the first cut needs n ≥ 2"));
    }
    let rows = replicate(r, "cut", reps, |rng| {
        let t = base.sample(n, rng)?;
        Ok(match emit.as_str() {
            "cuts" => cuts_to_isolate_root(&t, rng).to_string(),
            "cuttree-height" => cut_tree(&t, rng)?.tree.height().to_string(),
            _ => {
                let e = rng.random_range(1..n);
                let below = t.subtree_sizes()[e];
                format!("{}+{}", below.max(n - below), below.min(n - below))
            }
        })
    })?;
    let mut out = r.header();
    writeln!(out, "replica,{emit}").unwrap();
    for (i, v) in rows.iter().enumerate() {
        writeln!(out, "{i},{v}").unwrap();
    }
    Ok(Output {
        primary: out,
        ..Output::default()
    })
}

/// Self-similarity index and limit law for families with a known scaling
/// limit.
pub fn known_limit(spec: &str, limit_samples: usize) -> CliResult<Option<(f64, LimitLaw)>> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let param = |key: &str| -> CliResult<f64> {
        rest.split(',')
            .filter_map(|kv| kv.split_once('='))
            .find(|(k, _)| k.trim() == key)
            .ok_or_else(|| CliError::spec(format!("missing {key} in {spec:?}")))?
            .1
            .trim()
            .parse()
            .map_err(|_| CliError::spec(format!("bad {key} in {spec:?}")))
    };
    Ok(match name {
        "basic" => {
            let a = param("alpha")?;
            Some((a, LimitLaw::new(|l| Ok(1.0 - 2f64.powf(-l)), a)))
        }
        "ford" => {
            let a = param("alpha")?;
            Some((a, phi_from_nu(DislocationMeasure::nu_ford(a)?, a)))
        }
        "remy" => Some((0.5, phi_from_nu(DislocationMeasure::nu_ford(0.5)?, 0.5))),
        "kary" => {
            let k = param("k")? as usize;
            let g = 1.0 / k as f64;
            Some((g, phi_from_nu(DislocationMeasure::nu_k(k)?, g)))
        }
        "marchal" => {
            let b = param("beta")?;
            let g = 1.0 - 1.0 / b;
            Some((g, phi_from_nu(DislocationMeasure::nu_stable(b, limit_samples)?, g)))
        }
        _ => None,
    })
}

/// `∫ 2^{−γ ξ}`-type functional for the basic family: `Σ_k 2^{−γk} E_k`.
fn basic_limit_sample(gamma: f64, reps: usize, seed: u64) -> Vec<f64> {
    Streams::new(seed, "chain limit").replicate(reps, |_, rng| {
        let mut total: f64 = 0.0;
        let mut w = 1.0;
        while w > 1e-17 {
            let e: f64 = Exp1.sample(rng);
            total += w * e;
            w *= 2f64.powf(-gamma);
        }
        total
    })
}

fn chain_absorb(r: &Resolved<ChainArgs>) -> CliResult<Output> {
    let p = &r.params;
    let spec = need(&p.family, "family")?;
    let family = parse_family(&spec)?;
    if family.indexing() != Indexing::Leaves {
        return Err(CliError::spec("the leaf chain needs a leaves-indexed family"));
    }
    let n = need(&p.n, "n")?;
    let reps = p.reps.unwrap_or(1);
    let limit = known_limit(&family.name(), p.limit_samples.unwrap_or(20_000))?;
    let gamma = match (p.gamma, &limit) {
        (Some(g), _) => g,
        (None, Some((g, _))) => *g,
        (None, None) => {
            return Err(CliError::spec(format!(
                "no known self-similarity index for {}; pass --gamma",
                family.name()
            )))
        }
    };
    let chain = LeafChain::new(Arc::clone(&family), gamma)?;
    let times = replicate(r, "chain absorb", reps, |rng| Ok(chain.absorption_time(n, rng)?))?;
    let scale = (n as f64).powf(gamma);
    let rescaled: Vec<f64> = times.iter().map(|&a| a as f64 / scale).collect();
    let mut out = r.header();
    out.push_str("replica,A_n\n");
    for (i, a) in times.iter().enumerate() {
        writeln!(out, "{i},{a}").unwrap();
    }
    let (mean, var) = mean_var(&rescaled);
    let ks = match family.name().split_once(':') {
        Some(("basic", _)) if p.gamma.is_none_or(|g| Some(g) == limit.as_ref().map(|l| l.0)) => {
            Some(ks_two_sample(&rescaled, &basic_limit_sample(gamma, 100_000, r.seed)))
        }
        _ => None,
    };
    let moment_errors = match (p.compare_moments, &limit) {
        (Some(k), Some((g, law))) if (*g - gamma).abs() < 1e-15 => {
            Some(serde_json::to_value(moment_compare(&rescaled, law, k)?)?)
        }
        (Some(_), _) => {
            return Err(CliError::spec(format!(
                "no limit law to compare moments for {} at γ = {gamma}",
                family.name()
            )))
        }
        _ => None,
    };
    let summary = json!({
        "family": family.name(),
        "n": n,
        "reps": reps,
        "gamma": gamma,
        "mean": mean,
        "var": var,
        "ks": ks,
        "moment_errors": moment_errors,
    });
    Ok(Output {
        primary: out,
        summary: Some(json_line(r, summary.as_object().unwrap().clone())?),
        failed: false,
    })
}

fn read_tree(path: &PathBuf) -> CliResult<RootedTree> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::new(Kind::Io, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::general(format!("{}: {e}", path.display())))
}

fn metric_gh(r: &Resolved<GhArgs>) -> CliResult<Output> {
    let p = &r.params;
    let weights = match p.weights.as_deref().unwrap_or("leaf") {
        "leaf" => Weights::LeafUniform,
        "vertex" => Weights::VertexUniform,
        w => return Err(CliError::general(format!("weights must be leaf or vertex, got {w:?}"))),
    };
    let a = MeasuredMetricTree::from_discrete(&read_tree(&need(&p.a, "a")?)?, p.scale_a.unwrap_or(1.0), weights)?;
    let b = MeasuredMetricTree::from_discrete(&read_tree(&need(&p.b, "b")?)?, p.scale_b.unwrap_or(1.0), weights)?;
    let exact = if a.len().max(b.len()) <= GH_EXACT_MAX {
        Some(gh_rooted(&a, &b)?)
    } else {
        None
    };
    let obj = json!({
        "points_a": a.len(),
        "points_b": b.len(),
        "height_a": a.height(),
        "height_b": b.height(),
        "gh_rooted": exact,
        "gh_upper": gh_upper(&a, &b),
        "ghp_upper": ghp_upper(&a, &b)?,
    });
    Ok(Output {
        primary: json_line(r, obj.as_object().unwrap().clone())?,
        ..Output::default()
    })
}

fn acceptance_run(r: &Resolved<AcceptanceArgs>) -> CliResult<Output> {
    let suite = r.params.suite.clone().unwrap_or_else(|| "all".into());
    let ctx = crate::acceptance::Context {
        seed: r.seed,
        exe: std::env::current_exe().ok(),
    };
    let results = crate::acceptance::run_suite(&suite, &ctx)?;
    let mut out = r.header();
    let mut failed = false;
    for (c, o) in &results {
        out.push_str(&crate::acceptance::format_line(c, o));
        out.push('\n');
        failed |= !o.pass;
    }
    Ok(Output {
        primary: out,
        summary: None,
        failed,
    })
}
