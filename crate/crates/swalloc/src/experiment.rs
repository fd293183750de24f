//! Experiment configs, per-(instance, algorithm, order) statistics and CSV
//! output.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use swalloc_core::matroid::{ParallelPadding, PartitionPadding};
use swalloc_core::online::{check_lemma_k_vs_p, exact_lemma_k_vs_p, run_adversarial, KpIteration};
use swalloc_core::perm::all_permutations;
use swalloc_core::rrg::{
    default_t, deterministic_greedy, original_rrg, smooth_rrg_matroid, smooth_rrg_partition,
};
use swalloc_core::{Error, Oracle, PartitionStructure, TrialStats, WelfareInstance};

use crate::corpus::{compute_opt, load_dir, load_instance, OptSidecar};
use crate::format::{parse_matroid, InstanceFile, LoadedMatroid};
use crate::generate::{generate, GeneratorSpec};
use crate::parallel::{par_map, par_trials};

/// Target ratio for the adversarial allocator.
pub const ADVERSARIAL_TARGET: f64 = 0.25;
/// Target ratio for random-order greedy and smooth RRG.
pub const RANDOM_ORDER_TARGET: f64 = 0.27493;
/// Order enumeration is capped at `8!` orders.
pub const MAX_ENUMERATED_ITEMS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Alg {
    /// Randomized rank allocator on adversarial orders.
    Adv,
    /// Deterministic greedy.
    Greedy,
    /// Smooth residual random greedy.
    RrgSmooth,
    /// Original residual random greedy.
    Rrg,
}

impl Alg {
    pub fn name(self) -> &'static str {
        match self {
            Alg::Adv => "adv",
            Alg::Greedy => "greedy",
            Alg::RrgSmooth => "rrg-smooth",
            Alg::Rrg => "rrg",
        }
    }

    pub fn target(self) -> f64 {
        match self {
            Alg::Adv | Alg::Rrg => ADVERSARIAL_TARGET,
            Alg::Greedy | Alg::RrgSmooth => RANDOM_ORDER_TARGET,
        }
    }

    fn is_online(self) -> bool {
        matches!(self, Alg::Adv | Alg::Greedy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OrderMode {
    /// Items arrive in file order.
    Given,
    /// Every trial draws a uniform order.
    Random,
    /// One row per permutation.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceSource {
    File {
        path: PathBuf,
    },
    /// Every `*.swi` file in the directory.
    Dir {
        path: PathBuf,
    },
    Generated {
        id: String,
        spec: GeneratorSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub sources: Vec<InstanceSource>,
    /// Matroid file replacing any matroid block of the instances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matroid: Option<PathBuf>,
    pub algs: Vec<Alg>,
    pub order: OrderMode,
    pub trials: usize,
    pub seed: u64,
    /// Smooth RRG iterations; `None` is `default_t(k)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    /// Also report `E[K^i]` against `2·E[P^i]` for `adv`.
    #[serde(default)]
    pub diagnostics: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ExperimentInstance {
    pub id: String,
    pub file: InstanceFile,
    pub opt: Option<OptSidecar>,
}

impl ExperimentInstance {
    pub fn opt(&self) -> anyhow::Result<OptSidecar> {
        match &self.opt {
            Some(o) => Ok(o.clone()),
            None => compute_opt(&self.file),
        }
    }
}

/// Loads every instance named by the config, in source order.
pub fn resolve(config: &ExperimentConfig) -> anyhow::Result<Vec<ExperimentInstance>> {
    let mut out = Vec::new();
    for source in &config.sources {
        match source {
            InstanceSource::File { path } => {
                let e = load_instance(path)?;
                out.push(ExperimentInstance {
                    id: e.id,
                    file: e.file,
                    opt: e.opt,
                });
            }
            InstanceSource::Dir { path } => {
                out.extend(load_dir(path)?.into_iter().map(|e| ExperimentInstance {
                    id: e.id,
                    file: e.file,
                    opt: e.opt,
                }))
            }
            InstanceSource::Generated { id, spec } => out.push(ExperimentInstance {
                id: id.clone(),
                file: generate(spec)?,
                opt: None,
            }),
        }
    }
    if let Some(path) = &config.matroid {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let (items, spec) =
            parse_matroid(&text).with_context(|| format!("parsing {}", path.display()))?;
        for inst in &mut out {
            ensure!(
                inst.file.items == items,
                "{}: matroid has {items} elements, instance has {} items",
                inst.id,
                inst.file.items
            );
            ensure!(
                inst.file.bidders.len() == 1,
                "{}: a matroid instance must have exactly one bidder",
                inst.id
            );
            inst.file.matroid = Some(spec.clone());
            inst.opt = None;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub instance_id: String,
    pub alg: String,
    pub order_id: String,
    pub trials: usize,
    pub seed: u64,
    pub mean_welfare: f64,
    pub stderr: f64,
    pub opt: f64,
    pub ratio_lower: f64,
}

impl Row {
    fn new(id: &str, alg: Alg, order_id: String, seed: u64, stats: &TrialStats, opt: f64) -> Self {
        Self {
            instance_id: id.to_string(),
            alg: alg.name().to_string(),
            order_id,
            trials: stats.trials(),
            seed,
            mean_welfare: stats.mean(),
            stderr: stats.stderr(),
            opt,
            ratio_lower: ratio_lower(stats.mean(), stats.stderr(), opt),
        }
    }

    pub fn meets_target(&self) -> bool {
        let target = match self.alg.as_str() {
            "adv" | "rrg" => ADVERSARIAL_TARGET,
            _ => RANDOM_ORDER_TARGET,
        };
        self.ratio_lower >= target
    }
}

/// `(mean - 3·stderr) / opt`; an instance with `opt = 0` counts as ratio 1.
pub fn ratio_lower(mean: f64, stderr: f64, opt: f64) -> f64 {
    if opt <= 0.0 {
        1.0
    } else {
        (mean - 3.0 * stderr) / opt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub instance_id: String,
    pub order_id: String,
    pub iteration: usize,
    pub mean_k: f64,
    pub mean_p: f64,
    pub stderr: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<Row>,
    pub diagnostics: Vec<DiagnosticRow>,
}

impl ExperimentOutput {
    /// Every row meets its target ratio and every diagnostic holds.
    pub fn passed(&self) -> bool {
        self.rows.iter().all(Row::meets_target) && self.diagnostics.iter().all(|d| d.holds)
    }
}

/// 1-based item indices joined by dots; `given` and `random` name the other
/// modes.
pub fn order_id(order: &[usize]) -> String {
    order
        .iter()
        .map(|i| (i + 1).to_string())
        .collect::<Vec<_>>()
        .join(".")
}

fn orders(mode: OrderMode, items: usize) -> anyhow::Result<Vec<(String, Option<Vec<usize>>)>> {
    Ok(match mode {
        OrderMode::Given => vec![("given".into(), Some((0..items).collect()))],
        OrderMode::Random => vec![("random".into(), None)],
        OrderMode::All => {
            ensure!(
                items <= MAX_ENUMERATED_ITEMS,
                "order enumeration needs at most {MAX_ENUMERATED_ITEMS} items"
            );
            all_permutations(items)
                .into_iter()
                .map(|o| (order_id(&o), Some(o)))
                .collect()
        }
    })
}

fn online_stats(
    alg: Alg,
    instance: &WelfareInstance,
    order: Option<&[usize]>,
    trials: usize,
    seed: u64,
) -> anyhow::Result<TrialStats> {
    let items = instance.items();
    par_trials(trials, seed, |rng| {
        let drawn;
        let order = match order {
            Some(o) => o,
            None => {
                let mut o: Vec<usize> = (0..items).collect();
                o.shuffle(rng);
                drawn = o;
                &drawn
            }
        };
        Ok(match alg {
            Alg::Adv => run_adversarial(instance, order, rng, None)?.welfare,
            _ => deterministic_greedy(instance, order)?.1,
        })
    })
}

/// Objective and constraint of the offline algorithms: the first bidder under
/// the instance matroid, or the welfare reduction when there is none.
enum Offline {
    Partition(Oracle, PartitionStructure),
    General(Oracle, LoadedMatroid),
}

fn offline(file: &InstanceFile) -> anyhow::Result<Offline> {
    let instance = file.to_welfare()?;
    Ok(match file.matroid()? {
        None => {
            let (f, parts) = instance.to_partition();
            Offline::Partition(f, parts)
        }
        Some(LoadedMatroid::Partition(parts)) => {
            Offline::Partition(instance.bidder(0).clone(), parts)
        }
        Some(m) => Offline::General(instance.bidder(0).clone(), m),
    })
}

fn offline_stats(
    alg: Alg,
    file: &InstanceFile,
    t: Option<usize>,
    trials: usize,
    seed: u64,
) -> anyhow::Result<TrialStats> {
    match offline(file)? {
        Offline::Partition(f, parts) => {
            let t = t.unwrap_or_else(|| default_t(parts.k()));
            let pad = PartitionPadding::new(parts.clone());
            par_trials(trials, seed, |rng| {
                Ok(match alg {
                    Alg::RrgSmooth => smooth_rrg_partition(&f, &parts, t, rng)?.value,
                    _ => original_rrg(&f, &pad, rng)?.value,
                })
            })
        }
        Offline::General(f, m) => {
            let pad = ParallelPadding::new(m.as_dyn());
            let t = t.unwrap_or_else(|| default_t(m.as_dyn().rank()));
            par_trials(trials, seed, |rng| {
                Ok(match alg {
                    Alg::RrgSmooth => smooth_rrg_matroid(&f, &pad, t, rng)?.value,
                    _ => original_rrg(&f, &pad, rng)?.value,
                })
            })
        }
    }
}

fn diagnostics(
    inst: &ExperimentInstance,
    order_id: &str,
    order: &[usize],
    opt: &OptSidecar,
    trials: usize,
    seed: u64,
) -> anyhow::Result<Vec<DiagnosticRow>> {
    let instance = inst.file.to_welfare()?;
    let reference = opt.allocation();
    let rows: Vec<KpIteration> = match exact_lemma_k_vs_p(&instance, order, &reference) {
        Err(Error::Capacity { .. }) => {
            check_lemma_k_vs_p(&instance, order, &reference, trials, seed)?
        }
        other => other?,
    };
    Ok(rows
        .into_iter()
        .map(|r| DiagnosticRow {
            instance_id: inst.id.clone(),
            order_id: order_id.to_string(),
            iteration: r.iteration,
            mean_k: r.mean_hybrid,
            mean_p: r.mean_profit,
            stderr: r.stderr,
            holds: r.holds,
        })
        .collect())
}

fn run_pair(
    config: &ExperimentConfig,
    inst: &ExperimentInstance,
    alg: Alg,
) -> anyhow::Result<ExperimentOutput> {
    let opt = inst.opt()?;
    let mut out = ExperimentOutput::default();
    if alg.is_online() {
        if inst.file.matroid.is_some() {
            bail!("{} needs a welfare instance without a matroid", alg.name());
        }
        let instance = inst.file.to_welfare()?;
        for (id, order) in orders(config.order, instance.items())? {
            let stats = online_stats(alg, &instance, order.as_deref(), config.trials, config.seed)?;
            out.rows.push(Row::new(
                &inst.id,
                alg,
                id.clone(),
                config.seed,
                &stats,
                opt.value,
            ));
            if let (true, Alg::Adv, Some(order)) = (config.diagnostics, alg, &order) {
                out.diagnostics.extend(diagnostics(
                    inst,
                    &id,
                    order,
                    &opt,
                    config.trials,
                    config.seed,
                )?);
            }
        }
    } else {
        let stats = offline_stats(alg, &inst.file, config.t, config.trials, config.seed)?;
        out.rows.push(Row::new(
            &inst.id,
            alg,
            "-".into(),
            config.seed,
            &stats,
            opt.value,
        ));
    }
    Ok(out)
}

/// Runs every (instance, algorithm) pair concurrently. Rows follow source
/// order, then algorithm order, then order enumeration.
pub fn run_experiment(config: &ExperimentConfig) -> anyhow::Result<ExperimentOutput> {
    ensure!(config.trials >= 1, "at least one trial is required");
    let instances = resolve(config)?;
    let pairs: Vec<(&ExperimentInstance, Alg)> = instances
        .iter()
        .flat_map(|i| config.algs.iter().map(move |&a| (i, a)))
        .collect();
    let results = par_map(&pairs, |(inst, alg)| {
        run_pair(config, inst, *alg).with_context(|| format!("instance {}", inst.id))
    });
    let mut out = ExperimentOutput::default();
    for r in results {
        let r = r?;
        out.rows.extend(r.rows);
        out.diagnostics.extend(r.diagnostics);
    }
    Ok(out)
}

/// CSV with a header even when there are no records.
pub fn write_csv<T: Serialize, W: Write>(
    records: &[T],
    header: &[&str],
    out: W,
) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(header)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const ROW_HEADER: [&str; 9] = [
    "instance_id",
    "alg",
    "order_id",
    "trials",
    "seed",
    "mean_welfare",
    "stderr",
    "opt",
    "ratio_lower",
];

pub const DIAGNOSTIC_HEADER: [&str; 7] = [
    "instance_id",
    "order_id",
    "iteration",
    "mean_k",
    "mean_p",
    "stderr",
    "holds",
];

pub fn rows_to_csv(rows: &[Row]) -> anyhow::Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &ROW_HEADER, &mut buf)?;
    Ok(String::from_utf8(buf)?)
}

pub fn write_rows(rows: &[Row], path: &Path) -> anyhow::Result<()> {
    std::fs::write(path, rows_to_csv(rows)?).with_context(|| format!("writing {}", path.display()))
}
