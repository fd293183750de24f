//! Verification suites behind `verify --suite`.

use std::path::PathBuf;

use anyhow::{ensure, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use swalloc_core::function::{is_nonnegative, is_submodular, materialize, EPS};
use swalloc_core::matroid::{ParallelPadding, PartitionPadding};
use swalloc_core::online::{exact_lemma_k_vs_p, worst_order};
use swalloc_core::rrg::{
    bound_gap, closed_form_bounds, constants, default_t, exact_free_part_distribution,
    exact_greedy_orders, exact_original_rrg, exact_smooth_partition, limit_ratio, residual_base,
    same_distribution, Distribution,
};
use swalloc_core::verify::{
    brute_force_opt_matroid, check_recursions, check_sampling_lemma, check_sampling_lemma_mc,
    check_selection_frequency, chi_squared_homogeneity, coupling_counts, hit_part_counts,
    random_product_distribution,
};
use swalloc_core::{Allocation, ItemSet, Oracle, PartitionStructure};

use crate::corpus::{compute_opt, corpus_root, load_dir, CorpusEntry};
use crate::format::LoadedMatroid;
use crate::generate::{generate, Family, GeneratorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Submodularity,
    SamplingLemma,
    LemmaKp,
    Recursions,
    Obs3,
    Coupling,
    Bounds,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Submodularity => "submodularity",
            Suite::SamplingLemma => "sampling-lemma",
            Suite::LemmaKp => "lemma-kp",
            Suite::Recursions => "recursions",
            Suite::Obs3 => "obs3",
            Suite::Coupling => "coupling",
            Suite::Bounds => "bounds",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Overrides each suite's default sample count.
    pub trials: Option<u64>,
    pub corpus: PathBuf,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: None,
            corpus: corpus_root(),
        }
    }
}

impl SuiteConfig {
    fn trials(&self, default: u64) -> u64 {
        self.trials.unwrap_or(default)
    }

    fn group(&self, name: &str) -> anyhow::Result<Vec<CorpusEntry>> {
        load_dir(&self.corpus.join(name))
    }
}

/// One checked quantity: `holds` compares `observed` against `bound`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteRow {
    pub suite: String,
    pub case: String,
    pub quantity: String,
    pub observed: f64,
    pub bound: f64,
    pub stderr: f64,
    pub holds: bool,
}

pub const SUITE_HEADER: [&str; 7] = [
    "suite", "case", "quantity", "observed", "bound", "stderr", "holds",
];

pub struct Rows {
    suite: Suite,
    rows: Vec<SuiteRow>,
}

impl Rows {
    pub fn new(suite: Suite) -> Self {
        Self {
            suite,
            rows: Vec::new(),
        }
    }

    pub fn into_rows(self) -> Vec<SuiteRow> {
        self.rows
    }

    fn push(
        &mut self,
        case: impl Into<String>,
        quantity: &str,
        observed: f64,
        bound: f64,
        stderr: f64,
        holds: bool,
    ) {
        self.rows.push(SuiteRow {
            suite: self.suite.name().into(),
            case: case.into(),
            quantity: quantity.into(),
            observed,
            bound,
            stderr,
            holds,
        });
    }
}

pub fn run_suite(suite: Suite, config: &SuiteConfig) -> anyhow::Result<Vec<SuiteRow>> {
    let mut rows = Rows::new(suite);
    match suite {
        Suite::Submodularity => submodularity(config, &mut rows)?,
        Suite::SamplingLemma => sampling_lemma(config, &mut rows, &[0.0, 0.25, 0.5, 1.0], 1000)?,
        Suite::LemmaKp => lemma_kp(config, &mut rows, 3)?,
        Suite::Recursions => recursions(config, &mut rows)?,
        Suite::Obs3 => obs3(config, &mut rows)?,
        Suite::Coupling => coupling(config, &mut rows)?,
        Suite::Bounds => bounds(&mut rows)?,
    }
    Ok(rows.rows)
}

fn partition_of(entry: &CorpusEntry) -> anyhow::Result<Option<(Oracle, PartitionStructure)>> {
    let instance = entry.file.to_welfare()?;
    Ok(match entry.file.matroid()? {
        Some(LoadedMatroid::Partition(p)) => Some((instance.bidder(0).clone(), p)),
        _ => None,
    })
}

fn submodularity(config: &SuiteConfig, rows: &mut Rows) -> anyhow::Result<()> {
    for group in ["welfare", "matroid", "general"] {
        for e in config.group(group)? {
            let instance = e.file.to_welfare()?;
            for (j, o) in instance.oracles().iter().enumerate() {
                let t = materialize(o.function().as_ref())?;
                let ok = is_nonnegative(&t) && is_submodular(&t);
                rows.push(
                    &e.id,
                    &format!("bidder {} valid", j + 1),
                    f64::from(u8::from(ok)),
                    1.0,
                    0.0,
                    ok,
                );
            }
            let fresh = compute_opt(&e.file)?;
            if let Some(stored) = &e.opt {
                let ok =
                    (stored.value - fresh.value).abs() <= EPS && stored.witness == fresh.witness;
                rows.push(&e.id, "sidecar opt", stored.value, fresh.value, 0.0, ok);
            }
            if e.file.matroid.is_none() {
                let (f, parts) = instance.to_partition();
                let reduced = brute_force_opt_matroid(&f, &parts)?;
                let ok = (reduced.value - fresh.value).abs() <= EPS;
                rows.push(&e.id, "reduction opt", reduced.value, fresh.value, 0.0, ok);
            }
        }
    }
    Ok(())
}

/// Random validated table over 1 to 5 items.
pub fn random_table(rng: &mut ChaCha8Rng) -> anyhow::Result<swalloc_core::function::TableFunction> {
    let spec = GeneratorSpec {
        family: Family::RandomTable,
        items: rng.gen_range(1..=5),
        bidders: 1,
        matroid: None,
        max_weight: 5,
        density: rng.gen_range(0.2..0.8),
        seed: rng.gen(),
    };
    let inst = generate(&spec)?.to_welfare()?;
    Ok(materialize(inst.bidder(0).function().as_ref())?)
}

/// Exact check over `tables` random tables and product distributions with
/// marginals in `[0, p]`, then a correlated all-or-nothing sampler by Monte
/// Carlo.
pub fn sampling_lemma(
    config: &SuiteConfig,
    rows: &mut Rows,
    ps: &[f64],
    tables: usize,
) -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let fs = (0..tables)
        .map(|_| random_table(&mut rng))
        .collect::<anyhow::Result<Vec<_>>>()?;
    for &p in ps {
        let mut failures = 0;
        let mut slack = f64::INFINITY;
        for f in &fs {
            let probs = random_product_distribution(f.items(), p, &mut rng);
            let r = check_sampling_lemma(f, &probs, p)?;
            failures += usize::from(!r.holds);
            slack = slack.min(r.expected - r.bound);
        }
        rows.push(
            format!("product p={p}"),
            "failures",
            failures as f64,
            0.0,
            0.0,
            failures == 0,
        );
        rows.push(
            format!("product p={p}"),
            "min slack",
            slack,
            -EPS,
            0.0,
            slack >= -EPS,
        );
    }
    let trials = config.trials(10_000) as usize;
    for (i, f) in fs.iter().take(5).enumerate() {
        let p = 0.5;
        let full: ItemSet = (0..f.items()).collect();
        let r = check_sampling_lemma_mc(
            f,
            |rng| {
                if rng.gen_bool(p) {
                    full.clone()
                } else {
                    ItemSet::new()
                }
            },
            p,
            trials,
            config.seed ^ i as u64,
        )?;
        rows.push(
            format!("correlated #{i} p={p}"),
            "E[f(A)]",
            r.expected,
            r.bound,
            r.stderr,
            r.holds,
        );
    }
    Ok(())
}

/// Exact `E[K^i] <= 2·E[P^i]` on the first `count` welfare instances under
/// the file order and the worst order, against the sidecar optimum.
pub fn lemma_kp(config: &SuiteConfig, rows: &mut Rows, count: usize) -> anyhow::Result<()> {
    for e in config.group("welfare")?.into_iter().take(count) {
        let instance = e.file.to_welfare()?;
        let reference = e.opt()?.allocation();
        let given: Vec<usize> = (0..instance.items()).collect();
        let (worst, _) = worst_order(&instance)?;
        for (name, order) in [("given", given), ("worst", worst)] {
            for r in exact_lemma_k_vs_p(&instance, &order, &reference)? {
                rows.push(
                    format!("{} {name} i={}", e.id, r.iteration),
                    "E[K]-2E[P]",
                    r.mean_hybrid - 2.0 * r.mean_profit,
                    0.0,
                    0.0,
                    r.holds,
                );
            }
        }
    }
    Ok(())
}

/// Monte Carlo recursions on every rank-3 partition instance.
pub fn recursions(config: &SuiteConfig, rows: &mut Rows) -> anyhow::Result<()> {
    let trials = config.trials(100_000) as usize;
    for e in config.group("matroid")? {
        let Some((f, parts)) = partition_of(&e)? else {
            continue;
        };
        if parts.k() != 3 {
            continue;
        }
        let t = default_t(3);
        for r in check_recursions(&f, &parts, t, trials, config.seed)? {
            let case = format!("{} i={}", e.id, r.iteration);
            if let (Some(p), Some(d)) = (r.progress, r.decay) {
                rows.push(&case, "progress", p.mean, 0.0, p.stderr, p.non_negative());
                rows.push(&case, "decay", d.mean, 0.0, d.stderr, d.non_negative());
            }
            let exact = r.iteration == 0;
            let v_ok = r.value.mean >= r.bounds.solution - 3.0 * r.value.stderr - EPS;
            let u_ok = if exact {
                r.union.mean >= r.bounds.union - EPS
            } else {
                r.union.mean >= r.bounds.union - 3.0 * r.union.stderr - EPS
            };
            rows.push(
                &case,
                "E[f(S_i)]",
                r.value.mean,
                r.bounds.solution,
                r.value.stderr,
                v_ok,
            );
            rows.push(
                &case,
                "E[f(O_S u S_i)]",
                r.union.mean,
                r.bounds.union,
                r.union.stderr,
                u_ok,
            );
        }
    }
    Ok(())
}

/// One-iteration selection frequencies on every rank-4 general matroid
/// instance, from the empty state and from a one-element state.
pub fn obs3(config: &SuiteConfig, rows: &mut Rows) -> anyhow::Result<()> {
    let iterations = config.trials(1_000_000);
    let mut case = 0u64;
    for e in config.group("general")? {
        let instance = e.file.to_welfare()?;
        let m = e
            .file
            .matroid()?
            .context("general instances carry a matroid")?;
        let pad = ParallelPadding::new(m.as_dyn());
        if m.as_dyn().rank() != 4 {
            continue;
        }
        let f = instance.bidder(0);
        let first = residual_base(f, &pad, &ItemSet::new())?
            .iter()
            .next()
            .context("empty base")?;
        for s in [ItemSet::new(), ItemSet::singleton(first)] {
            case += 1;
            let r =
                check_selection_frequency(f, &pad, &s, iterations, config.seed.wrapping_add(case))?;
            rows.push(
                format!("{} |S|={}", e.id, s.len()),
                "max |freq-1/k|/sigma",
                r.max_deviation,
                4.0,
                r.sigma,
                r.holds,
            );
        }
    }
    Ok(())
}

pub fn chi_squared_p_value(stat: f64, df: usize) -> anyhow::Result<f64> {
    if df == 0 {
        return Ok(1.0);
    }
    Ok(ChiSquared::new(df as f64)?.sf(stat))
}

fn to_allocations(
    dist: &Distribution<ItemSet>,
    items: usize,
    bidders: usize,
) -> Distribution<Allocation> {
    let mut out = Distribution::new();
    for (s, p) in dist {
        *out.entry(Allocation::from_ground_set(
            &s.truncated(items * bidders),
            items,
            bidders,
        ))
        .or_insert(0.0) += p;
    }
    out
}

/// Law of intersected parts against the coupling law at `k = 3`, `T = 5`,
/// and original RRG against random-order greedy on welfare instances with
/// at most 4 items.
pub fn coupling(config: &SuiteConfig, rows: &mut Rows) -> anyhow::Result<()> {
    let samples = config.trials(100_000);
    let t = 5;
    let mut any = false;
    for e in config.group("matroid")? {
        let Some((f, parts)) = partition_of(&e)? else {
            continue;
        };
        if parts.k() != 3 {
            continue;
        }
        any = true;
        let hits = hit_part_counts(&f, &parts, t, samples, config.seed)?;
        let coupled = coupling_counts(3, t, samples, config.seed.wrapping_add(1))?;
        let (stat, df) = chi_squared_homogeneity(&hits, &coupled)?;
        let p = chi_squared_p_value(stat, df)?;
        rows.push(&e.id, "chi-squared p", p, 0.001, 0.0, p > 0.001);

        let exact = exact_smooth_partition(&f, &parts, t)?;
        let mut by_size = [0.0; 4];
        for (s, q) in &exact {
            by_size[s.len()] += q;
        }
        let law = exact_free_part_distribution(3, t);
        let gap = by_size
            .iter()
            .zip(&law)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        rows.push(&e.id, "exact law gap", gap, 1e-12, 0.0, gap <= 1e-12);
    }
    ensure!(any, "no rank-3 partition instance in the corpus");
    for e in config.group("welfare")? {
        let instance = e.file.to_welfare()?;
        if instance.items() > 4 {
            continue;
        }
        let (f, parts) = instance.to_partition();
        let rrg = exact_original_rrg(&f, &PartitionPadding::new(parts))?;
        let rrg = to_allocations(&rrg, instance.items(), instance.bidders());
        let greedy = exact_greedy_orders(&instance)?;
        let gap = rrg
            .keys()
            .chain(greedy.keys())
            .map(|a| (rrg.get(a).unwrap_or(&0.0) - greedy.get(a).unwrap_or(&0.0)).abs())
            .fold(0.0, f64::max);
        let same = same_distribution(&rrg, &greedy, 1e-12);
        rows.push(&e.id, "rrg vs greedy law gap", gap, 1e-12, 0.0, same);
    }
    Ok(())
}

/// Constants, the grid checks in `k` and the closed-form recursions.
pub fn bounds(rows: &mut Rows) -> anyhow::Result<()> {
    let c = constants();
    let limit = limit_ratio();
    rows.push(
        "constants",
        "a",
        c.a,
        0.381966,
        1e-6,
        (c.a - 0.381966).abs() <= 1e-6,
    );
    rows.push(
        "constants",
        "b",
        c.b,
        2.61803,
        1e-5,
        (c.b - 2.61803).abs() <= 1e-5,
    );
    rows.push(
        "constants",
        "x*",
        c.x_star,
        0.8608179,
        1e-7,
        (c.x_star - 0.8608179).abs() <= 1e-7,
    );
    rows.push(
        "constants",
        "limit ratio",
        limit,
        0.27493,
        1e-5,
        (0.27492..=0.27494).contains(&limit),
    );
    let s5 = 5f64.sqrt();
    let mut monotone = true;
    let mut floor = f64::INFINITY;
    let mut prev = f64::INFINITY;
    for k in 3..=1000 {
        let real = bound_gap(k, c.x_star * k as f64);
        monotone &= real <= prev + 1e-15;
        prev = real;
        floor = floor.min(bound_gap(k, default_t(k) as f64));
    }
    rows.push(
        "k=3..1000",
        "gap(k, x*k) non-increasing",
        f64::from(u8::from(monotone)),
        1.0,
        0.0,
        monotone,
    );
    rows.push(
        "k=3..1000",
        "min gap(k, ceil(x*k))",
        floor,
        s5 * limit,
        0.0,
        floor >= s5 * limit - 1e-12,
    );
    for k in [3, 4, 5, 10, 100] {
        let mut ok = true;
        for i in 1..=default_t(k) {
            let prev = closed_form_bounds(k, i - 1, 1.0)?;
            let cur = closed_form_bounds(k, i, 1.0)?;
            let kf = k as f64;
            let progress = prev.solution + (prev.union - prev.solution) / kf;
            let decay = (1.0 - 2.0 / kf) * prev.union + prev.solution / kf;
            ok &= (cur.solution - progress).abs() <= 1e-12 && (cur.union - decay).abs() <= 1e-12;
        }
        let end = closed_form_bounds(k, default_t(k), 1.0)?.solution;
        rows.push(
            format!("k={k}"),
            "recursion identity",
            f64::from(u8::from(ok)),
            1.0,
            0.0,
            ok,
        );
        rows.push(
            format!("k={k}"),
            "ratio at T",
            end,
            limit,
            0.0,
            end >= limit - 1e-12,
        );
    }
    Ok(())
}
