//! The acceptance suite: one check per criterion, each returning a verdict
//! with the measured quantities.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;

use mbtree_core::cuttree::{cuts_to_isolate_root, first_split_law, CutBase};
use mbtree_core::ensembles::{
    count_labeled, count_labeled_rooted, count_ordered, enumerate_ordered, otter_counts, PolyaSampler,
    OTTER_KAPPA,
};
use mbtree_core::growth::{grow, root_edge_strip, GrowthModel};
use mbtree_core::gw::{sample_gw_n_vertices, OffspringLaw};
use mbtree_core::leafchain::{moment_compare, LeafChain, LimitLaw};
use mbtree_core::mb::marked_spine_sizes;
use mbtree_core::metric::{gh_rooted, MeasuredMetricTree, Weights};
use mbtree_core::rng::Streams;
use mbtree_core::splitting::{
    hypothesis_h_functional, partitions_of, BasicFamily, CutCayleyFamily, CutRecursiveFamily,
    DislocationMeasure, FordFamily, IntPartition, KaryFamily, MarchalFamily, RemyFamily,
    SplittingFamily,
};
use mbtree_core::stats::{chi_square, ks_statistic, ols_slope, quantile, tally, tv_counts};
use mbtree_core::{CanonicalCode, RootedTree};
use rand::Rng;

use crate::error::{CliError, CliResult};

pub const OTTER_C: f64 = 0.4399;
pub const OTTER_RATIO_TOL: f64 = 0.05;
pub const CHI_SQUARE_P_MIN: f64 = 0.01;
pub const TV_MAX: f64 = 0.01;
pub const IDENTITY_TOL: f64 = 1e-10;
pub const H_EXACT_TOL: f64 = 1e-12;
pub const REL_TOL: f64 = 0.05;
pub const KS_MAX: f64 = 0.05;
pub const TRIANGLE_TOL: f64 = 1e-9;
pub const POLYA_SLOPE: f64 = 0.5;
pub const POLYA_SLOPE_TOL: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct Context {
    pub seed: u64,
    /// The `mbtree` binary, for the determinism check.
    pub exe: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

type Check = fn(&Context) -> CliResult<Outcome>;

#[derive(Clone, Copy)]
pub struct Criterion {
    pub id: &'static str,
    pub title: &'static str,
    check: Check,
}

impl std::fmt::Debug for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Criterion({})", self.id)
    }
}

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: "1", title: "counting", check: counting },
        Criterion { id: "2", title: "GW and combinatorial ensembles", check: gw_equivalences },
        Criterion { id: "3", title: "algorithm identities", check: identities },
        Criterion { id: "4", title: "Remy tree is binary GW", check: remy_gw },
        Criterion { id: "5", title: "growth root splits", check: growth_bridge },
        Criterion { id: "6", title: "spine step vs leaf chain", check: chain_bridge },
        Criterion { id: "7", title: "hypothesis H numerics", check: h_numerics },
        Criterion { id: "8", title: "absorption-time moments", check: absorption },
        Criterion { id: "9", title: "cut-tree Rayleigh and first splits", check: cut_rayleigh },
        Criterion { id: "10", title: "metric layer", check: metric_layer },
        Criterion { id: "11", title: "CLI determinism", check: determinism },
        Criterion { id: "polya", title: "Polya height scaling", check: polya_slope },
    ]
}

/// Runs `all` or a comma list of ids, in suite order.
pub fn run_suite(selection: &str, ctx: &Context) -> CliResult<Vec<(Criterion, Outcome)>> {
    let all = criteria();
    let chosen: Vec<Criterion> = if selection.trim() == "all" {
        all
    } else {
        let ids: Vec<&str> = selection.split(',').map(str::trim).collect();
        for id in &ids {
            if !all.iter().any(|c| c.id == *id) {
                return Err(CliError::general(format!("unknown criterion {id:?}")));
            }
        }
        all.into_iter().filter(|c| ids.contains(&c.id)).collect()
    };
    chosen
        .into_iter()
        .map(|c| {
            let o = (c.check)(ctx).unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
            Ok((c, o))
        })
        .collect()
}

pub fn format_line(c: &Criterion, o: &Outcome) -> String {
    format!(
        "{} [{}] {}: {}",
        if o.pass { "PASS" } else { "FAIL" },
        c.id,
        c.title,
        o.detail
    )
}

fn streams(ctx: &Context, domain: &str) -> Streams {
    Streams::new(ctx.seed, &format!("acceptance {domain}"))
}

fn big_to_f64(x: &impl ToString) -> f64 {
    x.to_string().parse().expect("decimal integer")
}

/// Spanning trees of `K_n` by testing every `(n − 1)`-edge subset.
fn brute_labeled(n: usize) -> u64 {
    if n <= 2 {
        return 1;
    }
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let mut count = 0;
    let mut pick: Vec<usize> = (0..n - 1).collect();
    loop {
        let mut comp: Vec<usize> = (0..n).collect();
        fn find(c: &[usize], mut x: usize) -> usize {
            while c[x] != x {
                x = c[x];
            }
            x
        }
        let mut ok = true;
        for &i in &pick {
            let (a, b) = edges[i];
            let (ra, rb) = (find(&comp, a), find(&comp, b));
            if ra == rb {
                ok = false;
                break;
            }
            comp[ra] = rb;
        }
        count += ok as u64;
        // Next combination.
        let k = pick.len();
        let mut i = k;
        while i > 0 && pick[i - 1] == edges.len() - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return count;
        }
        pick[i - 1] += 1;
        for j in i..k {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

fn counting(_: &Context) -> CliResult<Outcome> {
    let mut bad = Vec::new();
    for n in 1..=7 {
        let ordered = enumerate_ordered(n)?;
        let shapes: HashSet<CanonicalCode> = ordered.iter().map(|t| t.canonical_code()).collect();
        let labeled = brute_labeled(n);
        if big_to_f64(&count_ordered(n)?) != ordered.len() as f64 {
            bad.push(format!("ordered n={n}"));
        }
        if big_to_f64(&count_labeled(n)?) != labeled as f64 {
            bad.push(format!("labeled n={n}"));
        }
        if big_to_f64(&count_labeled_rooted(n)?) != (labeled * n as u64) as f64 {
            bad.push(format!("labeled-rooted n={n}"));
        }
        if big_to_f64(&otter_counts(n)?[n - 1]) != shapes.len() as f64 {
            bad.push(format!("polya n={n}"));
        }
    }
    let t = otter_counts(100)?;
    let worst = (50..=100)
        .map(|n| {
            let nf = n as f64;
            let approx = OTTER_C * OTTER_KAPPA.powf(nf) * nf.powf(-1.5);
            (big_to_f64(&t[n - 1]) / approx - 1.0).abs()
        })
        .fold(0.0, f64::max);
    let pass = bad.is_empty() && worst < OTTER_RATIO_TOL;
    Ok(Outcome::new(
        pass,
        format!(
            "exact counts n<=7 {}; max |t_n/(c k^n n^-1.5) - 1| over n in [50,100] = {worst:.4} (tol {OTTER_RATIO_TOL})",
            if bad.is_empty() { "match".to_string() } else { format!("differ: {}", bad.join(", ")) }
        ),
    ))
}

/// Unordered shapes of the `n^{n−1}` rooted labeled trees on `n` vertices.
fn labeled_shape_law(n: usize) -> HashMap<CanonicalCode, f64> {
    let mut counts: HashMap<CanonicalCode, usize> = HashMap::new();
    let mut total = 0;
    for root in 0..n {
        let others: Vec<usize> = (0..n).filter(|&v| v != root).collect();
        let combos = n.pow(others.len() as u32);
        for mut code in 0..combos {
            let mut parent = vec![None; n];
            for &v in &others {
                parent[v] = Some(code % n);
                code /= n;
            }
            // Acyclic iff every vertex reaches the root.
            let reaches = others.iter().all(|&v| {
                let (mut x, mut steps) = (v, 0);
                while let Some(p) = parent[x] {
                    x = p;
                    steps += 1;
                    if steps > n {
                        return false;
                    }
                }
                x == root
            });
            if !reaches {
                continue;
            }
            let t = from_any_parents(&parent, root);
            *counts.entry(t.canonical_code()).or_default() += 1;
            total += 1;
        }
    }
    assert_eq!(total, n.pow(n as u32 - 1));
    counts.into_iter().map(|(k, c)| (k, c as f64 / total as f64)).collect()
}

fn from_any_parents(parent: &[Option<usize>], root: usize) -> RootedTree {
    let n = parent.len();
    let depth = |mut v: usize| {
        let mut d = 0;
        while let Some(p) = parent[v] {
            v = p;
            d += 1;
        }
        d
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (depth(v), v));
    debug_assert_eq!(order[0], root);
    let mut id = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        id[v] = i;
    }
    let parents: Vec<Option<usize>> = order.iter().map(|&v| parent[v].map(|p| id[p])).collect();
    RootedTree::from_parents(&parents).expect("a tree")
}

fn gw_equivalences(ctx: &Context) -> CliResult<Outcome> {
    let draws = 100_000;
    let geo = OffspringLaw::geometric_half();
    let ordered = streams(ctx, "2 geometric").replicate(draws, |_, rng| {
        sample_gw_n_vertices(&geo, 5, rng).map(|t| t.parent_array())
    });
    let ordered: Vec<Vec<i64>> = ordered.into_iter().collect::<Result<_, _>>()?;
    let shapes: Vec<Vec<i64>> = enumerate_ordered(5)?.iter().map(|t| t.parent_array()).collect();
    let counts = tally(ordered);
    let observed: Vec<usize> = shapes.iter().map(|s| counts.get(s).copied().unwrap_or(0)).collect();
    let stray = draws - observed.iter().sum::<usize>();
    let chi = chi_square(&observed, &vec![1.0 / shapes.len() as f64; shapes.len()]);

    let poisson = OffspringLaw::poisson_one();
    let law = labeled_shape_law(4);
    let sampled = streams(ctx, "2 poisson").replicate(draws, |_, rng| {
        sample_gw_n_vertices(&poisson, 4, rng).map(|t| t.canonical_code())
    });
    let sampled: Vec<CanonicalCode> = sampled.into_iter().collect::<Result<_, _>>()?;
    let tv = tv_counts(&tally(sampled), &law);
    let pass = shapes.len() == 14 && stray == 0 && chi.p_value > CHI_SQUARE_P_MIN && tv < TV_MAX;
    Ok(Outcome::new(
        pass,
        format!(
            "geometric n=5: {} shapes, chi2 p = {:.4} (min {CHI_SQUARE_P_MIN}); poisson n=4 vs 64 labeled trees: TV = {tv:.5} (max {TV_MAX})",
            shapes.len(),
            chi.p_value
        ),
    ))
}

fn identities(_: &Context) -> CliResult<Outcome> {
    let ford = FordFamily::new(0.5)?;
    let remy = RemyFamily::new();
    let marchal = MarchalFamily::new(2.0)?;
    let kary = KaryFamily::new(2)?;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for n in 1..=10 {
        let mut lambdas: Vec<IntPartition> = partitions_of(n)?.collect();
        if n == 1 {
            lambdas.push(IntPartition::cemetery());
        }
        for l in lambdas {
            let p = ford.pmf(&l);
            for q in [remy.pmf(&l), marchal.pmf(&l), kary.pmf(&l)] {
                worst = worst.max((p - q).abs());
            }
            checked += 1;
        }
    }
    Ok(Outcome::new(
        worst < IDENTITY_TOL,
        format!("ford(1/2) = remy = marchal(2) = kary(2) on {checked} partitions, n <= 10: max diff {worst:.2e} (tol {IDENTITY_TOL:e})"),
    ))
}

fn gw_shape_law(law: &OffspringLaw, n: usize) -> CliResult<HashMap<CanonicalCode, f64>> {
    let mut out: HashMap<CanonicalCode, f64> = HashMap::new();
    for t in enumerate_ordered(n)? {
        let p = law.tree_probability(&t);
        if p > 0.0 {
            *out.entry(t.canonical_code()).or_default() += p;
        }
    }
    let z: f64 = out.values().sum();
    out.values_mut().for_each(|p| *p /= z);
    Ok(out)
}

fn remy_gw(ctx: &Context) -> CliResult<Outcome> {
    let law = gw_shape_law(&OffspringLaw::binary(), 7)?;
    let draws = streams(ctx, "4").replicate(100_000, |_, rng| {
        let t = grow(GrowthModel::Remy, 4, rng)?.final_tree();
        root_edge_strip(&t).map(|s| s.canonical_code())
    });
    let draws: Vec<CanonicalCode> = draws.into_iter().collect::<Result<_, _>>()?;
    let tv = tv_counts(&tally(draws), &law);
    Ok(Outcome::new(
        tv < TV_MAX,
        format!("stripped T_4 vs binary GW on 7 vertices, 1e5 draws: TV = {tv:.5} (max {TV_MAX})"),
    ))
}

fn root_split(t: &RootedTree) -> CliResult<IntPartition> {
    let leaves = t.subtree_leaf_counts();
    Ok(IntPartition::new(t.children(t.root()).iter().map(|&c| leaves[c]).collect())?)
}

fn growth_bridge(ctx: &Context) -> CliResult<Outcome> {
    let cases: Vec<(GrowthModel, Arc<dyn SplittingFamily>)> = vec![
        (GrowthModel::Ford(0.3), Arc::new(FordFamily::new(0.3)?)),
        (GrowthModel::Ford(0.5), Arc::new(FordFamily::new(0.5)?)),
        (GrowthModel::Kary(3), Arc::new(KaryFamily::new(3)?)),
        (GrowthModel::Marchal(1.5), Arc::new(MarchalFamily::new(1.5)?)),
    ];
    let mut worst: (f64, String) = (0.0, String::new());
    for (model, family) in cases {
        for steps in 2.. {
            let n = model.leaves_at(steps);
            if n > 6 {
                break;
            }
            let draws = streams(ctx, &format!("5 {model} {steps}")).replicate(100_000, |_, rng| {
                let t = grow(model, steps, rng)?.final_tree();
                Ok::<_, CliError>(root_split(&root_edge_strip(&t)?)?)
            });
            let draws: Vec<IntPartition> = draws.into_iter().collect::<Result<_, _>>()?;
            let law: HashMap<IntPartition, f64> =
                partitions_of(n)?.map(|l| (l.clone(), family.pmf(&l))).collect();
            let tv = tv_counts(&tally(draws), &law);
            if tv >= worst.0 {
                worst = (tv, format!("{model} n={n}"));
            }
        }
    }
    Ok(Outcome::new(
        worst.0 < TV_MAX,
        format!("max TV over ford 0.3/0.5, kary 3, marchal 1.5 at n <= 6, 1e5 draws: {:.5} at {} (max {TV_MAX})", worst.0, worst.1),
    ))
}

fn chain_bridge(ctx: &Context) -> CliResult<Outcome> {
    let family = Arc::new(FordFamily::new(0.3)?);
    let chain = LeafChain::new(family.clone(), 0.3)?;
    let mut parts = Vec::new();
    let mut worst: f64 = 0.0;
    for i in [2, 10, 100] {
        let draws = streams(ctx, &format!("6 {i}")).replicate(1_000_000, |_, rng| {
            marked_spine_sizes(family.as_ref(), i, rng).map(|s| s.get(1).copied().unwrap_or(0))
        });
        let draws: Vec<usize> = draws.into_iter().collect::<Result<_, _>>()?;
        let p = chain.transition_pmf(i)?;
        let law: HashMap<usize, f64> = p.iter().copied().enumerate().collect();
        let tv = tv_counts(&tally(draws), &law);
        worst = worst.max(tv);
        parts.push(format!("i={i}: {tv:.5}"));
    }
    Ok(Outcome::new(
        worst < TV_MAX,
        format!("ford(0.3), 1e6 draws, TV {} (max {TV_MAX})", parts.join(", ")),
    ))
}

fn h_numerics(ctx: &Context) -> CliResult<Outcome> {
    let mut rng = streams(ctx, "7").stream(0);
    let basic = BasicFamily::new(1.0)?;
    let mut worst_basic: f64 = 0.0;
    for n in (2..=1000).step_by(2) {
        let v = hypothesis_h_functional(&basic, n, &|_| 1.0, 1.0, 0, &mut rng)?;
        worst_basic = worst_basic.max((v.value - 0.5).abs());
    }
    let mut parts = Vec::new();
    let mut worst_ford: f64 = 0.0;
    for alpha in [0.3, 0.5] {
        let at = hypothesis_h_functional(&FordFamily::new(alpha)?, 10_000, &|_| 1.0, alpha, 10_000, &mut rng)?;
        let limit = DislocationMeasure::nu_ford(alpha)?.h_integral(&|_| 1.0)?.value;
        let rel = (at.value / limit - 1.0).abs();
        worst_ford = worst_ford.max(rel);
        parts.push(format!("alpha={alpha}: {:.5} vs {limit:.5}", at.value));
    }
    Ok(Outcome::new(
        worst_basic < H_EXACT_TOL && worst_ford < REL_TOL,
        format!(
            "basic(1), even n <= 1000: max |H - 1/2| = {worst_basic:.1e}; ford at n=1e4 {} (max rel {:.4}, tol {REL_TOL})",
            parts.join(", "),
            worst_ford
        ),
    ))
}

fn absorption(ctx: &Context) -> CliResult<Outcome> {
    let chain = LeafChain::new(Arc::new(BasicFamily::new(1.0)?), 1.0)?;
    let n = 1usize << 20;
    let xs = streams(ctx, "8").replicate(10_000, |_, rng| {
        chain.absorption_time(n, rng).map(|a| a as f64 / n as f64)
    });
    let xs: Vec<f64> = xs.into_iter().collect::<Result<_, _>>()?;
    let law = LimitLaw::new(|l| Ok(1.0 - 2f64.powf(-l)), 1.0);
    let rows = moment_compare(&xs, &law, 3)?;
    let worst = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    let text: Vec<String> = rows
        .iter()
        .map(|r| format!("k={}: {:.4} vs {:.4}", r.k, r.empirical, r.theoretical))
        .collect();
    Ok(Outcome::new(
        worst < REL_TOL,
        format!("basic(1), n=2^20, 1e4 reps: {} (max rel {worst:.4}, tol {REL_TOL})", text.join(", ")),
    ))
}

fn cut_rayleigh(ctx: &Context) -> CliResult<Outcome> {
    let n = 1000;
    let xs = streams(ctx, "9 rayleigh").replicate(10_000, |_, rng| {
        CutBase::Cayley
            .sample(n, rng)
            .map(|t| cuts_to_isolate_root(&t, rng) as f64 / (n as f64).sqrt())
    });
    let xs: Vec<f64> = xs.into_iter().collect::<Result<_, _>>()?;
    let ks = ks_statistic(&xs, |x| 1.0 - (-x * x / 2.0).exp());
    let mut rng = streams(ctx, "9 first split").stream(0);
    let mut worst: f64 = 0.0;
    for n in 2..=12 {
        for (base, family) in [
            (CutBase::Cayley, &CutCayleyFamily::new() as &dyn SplittingFamily),
            (CutBase::Recursive, &CutRecursiveFamily::new()),
        ] {
            let emp = first_split_law(base, n, 100_000, &mut rng)?;
            let emp: BTreeMap<IntPartition, f64> = emp.into_iter().collect();
            let tv = 0.5
                * partitions_of(n)?
                    .map(|l| (emp.get(&l).copied().unwrap_or(0.0) - family.pmf(&l)).abs())
                    .sum::<f64>();
            worst = worst.max(tv);
        }
    }
    Ok(Outcome::new(
        ks < KS_MAX && worst < TV_MAX,
        format!(
            "cuts/sqrt(n) at n=1000, 1e4 reps: KS to Rayleigh = {ks:.4} (max {KS_MAX}); first-split TV n <= 12: {worst:.5} (max {TV_MAX})"
        ),
    ))
}

/// Fifty random trees on at most six vertices, unit edges.
fn metric_corpus(ctx: &Context) -> Vec<RootedTree> {
    let mut rng = streams(ctx, "10 corpus").stream(0);
    (0..50)
        .map(|_| {
            let n = rng.random_range(1..=6);
            let mut parents = vec![None];
            parents.extend((1..n).map(|i| Some(rng.random_range(0..i))));
            RootedTree::from_parents(&parents).expect("parent before child")
        })
        .collect()
}

fn metric_layer(ctx: &Context) -> CliResult<Outcome> {
    use rayon::prelude::*;
    let trees = metric_corpus(ctx);
    let spaces: Vec<MeasuredMetricTree> = trees
        .iter()
        .map(|t| MeasuredMetricTree::from_discrete(t, 1.0, Weights::LeafUniform))
        .collect::<Result<_, _>>()?;
    let m = spaces.len();
    let gh = |a: &[MeasuredMetricTree], b: &[MeasuredMetricTree]| -> CliResult<Vec<f64>> {
        (0..m * m)
            .into_par_iter()
            .map(|ij| Ok(gh_rooted(&a[ij / m], &b[ij % m])?))
            .collect()
    };
    let d = gh(&spaces, &spaces)?;
    let mut asym = 0usize;
    let mut zero_mismatch = 0usize;
    let mut tri: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            if d[i * m + j] != d[j * m + i] {
                asym += 1;
            }
            let same = trees[i].canonical_code() == trees[j].canonical_code();
            if (d[i * m + j] == 0.0) != same {
                zero_mismatch += 1;
            }
            for k in 0..m {
                tri = tri.max(d[i * m + k] - d[i * m + j] - d[j * m + k]);
            }
        }
    }
    let mut scale_bad = 0usize;
    for a in [0.5, 2.0] {
        let scaled: Vec<MeasuredMetricTree> = spaces.iter().map(|s| s.scaled(a)).collect();
        let ds = gh(&scaled, &scaled)?;
        scale_bad += ds.iter().zip(&d).filter(|(x, y)| **x != a * **y).count();
    }
    let pass = asym == 0 && zero_mismatch == 0 && tri <= TRIANGLE_TOL && scale_bad == 0;
    Ok(Outcome::new(
        pass,
        format!(
            "50-tree corpus: {asym} asymmetric pairs, max triangle excess {tri:.1e} (tol {TRIANGLE_TOL:e}), {zero_mismatch} zero/isomorphism mismatches, {scale_bad} scaling mismatches"
        ),
    ))
}

/// Command lines exercised by the determinism check; `{dir}` is replaced by
/// a scratch directory.
const DETERMINISM_RUNS: &[&[&str]] = &[
    &["mb", "sample", "--family", "ford:alpha=0.5", "--n", "1000", "--reps", "100", "--seed", "7"],
    &["mb", "sample", "--family", "gw-vertices:offspring=poisson1", "--n", "200", "--reps", "50", "--stat", "tree", "--seed", "3"],
    &["chain", "absorb", "--family", "basic:alpha=1", "--n", "65536", "--reps", "300", "--compare-moments", "3", "--seed", "5", "--summary", "{dir}/summary.json"],
    &["cut", "--base", "cayley", "--n", "300", "--reps", "100", "--emit", "cuttree-height", "--seed", "2"],
    &["grow", "--model", "marchal:beta=1.5", "--steps", "400", "--emit-every", "100", "--reps", "8", "--seed", "4"],
    &["ensembles", "sample", "--family", "polya", "--n", "60", "--reps", "30", "--seed", "6"],
    &["gw", "sample", "--offspring", "geo2", "--condition", "vertices=50", "--reps", "30", "--seed", "8"],
];

fn run_once(exe: &PathBuf, args: &[&str], threads: usize, dir: &std::path::Path) -> CliResult<Vec<u8>> {
    let args: Vec<String> = args
        .iter()
        .map(|a| a.replace("{dir}", &dir.display().to_string()))
        .collect();
    let out = Command::new(exe)
        .args(&args)
        .args(["--threads", &threads.to_string()])
        .env_remove(crate::config::SEED_ENV)
        .output()?;
    if !out.status.success() {
        return Err(CliError::general(format!(
            "{} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        )));
    }
    let mut bytes = out.stdout;
    let summary = dir.join("summary.json");
    if summary.exists() {
        bytes.extend(std::fs::read(&summary)?);
        std::fs::remove_file(summary)?;
    }
    Ok(bytes)
}

fn determinism(ctx: &Context) -> CliResult<Outcome> {
    let Some(exe) = &ctx.exe else {
        return Ok(Outcome::new(false, "mbtree binary unavailable"));
    };
    let dir = std::env::temp_dir().join(format!("mbtree-determinism-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let mut differing = Vec::new();
    for args in DETERMINISM_RUNS {
        let a = run_once(exe, args, 1, &dir)?;
        let b = run_once(exe, args, 1, &dir)?;
        let c = run_once(exe, args, 4, &dir)?;
        if a != b || a != c {
            differing.push(args[..2].join(" "));
        }
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(Outcome::new(
        differing.is_empty(),
        format!(
            "{} command lines, each run twice at 1 thread and once at 4: {}",
            DETERMINISM_RUNS.len(),
            if differing.is_empty() {
                "byte-identical".to_string()
            } else {
                format!("differ for {}", differing.join(", "))
            }
        ),
    ))
}

fn polya_slope(ctx: &Context) -> CliResult<Outcome> {
    let sizes: Vec<usize> = (8..=13).map(|e| 1usize << e).collect();
    let sampler = PolyaSampler::new(*sizes.last().unwrap())?;
    let mut log_n = Vec::new();
    let mut log_med = Vec::new();
    for &n in &sizes {
        let hs = streams(ctx, &format!("polya {n}")).replicate(400, |_, rng| {
            sampler.sample(n, rng).map(|t| t.height() as f64)
        });
        let hs: Vec<f64> = hs.into_iter().collect::<Result<_, _>>()?;
        log_n.push((n as f64).ln());
        log_med.push(quantile(&hs, 0.5).ln());
    }
    let slope = ols_slope(&log_n, &log_med);
    Ok(Outcome::new(
        (slope - POLYA_SLOPE).abs() <= POLYA_SLOPE_TOL,
        format!("log-log slope of median height over n = 2^8..2^13, 400 reps each: {slope:.4} (target {POLYA_SLOPE} +- {POLYA_SLOPE_TOL})"),
    ))
}
