use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use swalloc::corpus::{compute_opt, load_instance, load_manifest, render_manifest, OPT_EXT};
use swalloc::experiment::{
    run_experiment, write_csv, Alg, ExperimentConfig, InstanceSource, OrderMode, DIAGNOSTIC_HEADER,
    ROW_HEADER,
};
use swalloc::format::parse_matroid;
use swalloc::generate::{generate, Family, GeneratorSpec, MatroidChoice};
use swalloc::suites::{run_suite, Suite, SuiteConfig, SUITE_HEADER};
use swalloc_core::hardness::{allocator_by_name, run_hardness, HardnessCase};
use swalloc_core::rrg::{closed_form_bounds, default_t, limit_ratio};

#[derive(Parser)]
#[command(
    name = "swalloc",
    version,
    about = "Online submodular welfare experiments"
)]
struct Cli {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// CSV output path; stdout when absent.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Suppress the summary on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance, or regenerate a corpus from its manifest.
    Gen(GenArgs),
    /// Run algorithms and write one CSV row per (instance, algorithm, order).
    Run(RunArgs),
    /// Brute-force optimum of an instance.
    Opt(OptArgs),
    /// Run a verification suite; exits 1 if any check fails.
    Verify(VerifyArgs),
    /// Play the two-item construction against a deterministic allocator.
    Hardness(HardnessArgs),
    /// Closed-form lower bounds after `i` smooth iterations at rank `k`.
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Regenerate every instance and sidecar listed in this manifest.
    #[arg(long, conflicts_with = "family")]
    manifest: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    family: Option<Family>,
    #[arg(long, default_value_t = 4)]
    items: usize,
    /// Defaults to 2, or 1 with a matroid.
    #[arg(long)]
    bidders: Option<usize>,
    /// Partition matroid with this many parts.
    #[arg(long, conflicts_with_all = ["graphic", "uniform"])]
    parts: Option<usize>,
    /// Graphic matroid on this many vertices.
    #[arg(long, conflicts_with = "uniform")]
    graphic: Option<usize>,
    /// Uniform matroid of this rank.
    #[arg(long)]
    uniform: Option<usize>,
    #[arg(long, default_value_t = 4)]
    max_weight: u32,
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    /// Output file, or directory with `--manifest`; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config as JSON; replaces the other run options.
    #[arg(long, conflicts_with_all = ["instance", "dir"])]
    config: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "config")]
    alg: Vec<Alg>,
    #[arg(long)]
    instance: Vec<PathBuf>,
    /// Every `*.swi` file in a directory.
    #[arg(long)]
    dir: Vec<PathBuf>,
    #[arg(long)]
    matroid: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OrderMode::Given)]
    order: OrderMode,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Smooth RRG iterations: a number or `auto`.
    #[arg(long = "T", value_parser = parse_horizon, default_value = "auto")]
    t: Horizon,
    /// Also write `E[K^i]` against `2·E[P^i]` rows (to `<csv>.diagnostics.csv`).
    #[arg(long)]
    diagnostics: bool,
    /// Exit 1 unless every row meets its target ratio.
    #[arg(long)]
    gate: bool,
}

#[derive(Clone, Copy)]
struct Horizon(Option<usize>);

fn parse_horizon(s: &str) -> Result<Horizon, String> {
    if s == "auto" {
        return Ok(Horizon(None));
    }
    s.parse()
        .map(|t| Horizon(Some(t)))
        .map_err(|_| format!("expected a number or 'auto', found '{s}'"))
}

#[derive(Args)]
struct OptArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    matroid: Option<PathBuf>,
    /// Write the `.opt` sidecar next to the instance.
    #[arg(long)]
    sidecar: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    /// Sample count override.
    #[arg(long)]
    trials: Option<u64>,
    /// Corpus root with `welfare/`, `matroid/` and `general/`.
    #[arg(long)]
    corpus: Option<PathBuf>,
}

#[derive(Args)]
struct HardnessArgs {
    /// greedy, discard or first.
    #[arg(long)]
    alg: String,
    #[arg(long = "M", default_value_t = 100.0)]
    big: f64,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    i: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    opt: f64,
}

fn emit<T: Serialize>(records: &[T], header: &[&str], path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            let file =
                std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            write_csv(records, header, file)
        }
        None => write_csv(records, header, std::io::stdout().lock()),
    }
}

fn gen(cli: &Cli, args: &GenArgs) -> anyhow::Result<bool> {
    if let Some(manifest) = &args.manifest {
        let root = manifest.parent().context("manifest directory")?;
        let out = args.out.as_deref().unwrap_or(root);
        let files = render_manifest(&load_manifest(root)?)?;
        for (rel, text) in &files {
            let path = out.join(rel);
            std::fs::create_dir_all(path.parent().context("output directory")?)?;
            std::fs::write(&path, text)?;
        }
        if !cli.quiet {
            eprintln!("wrote {} files under {}", files.len(), out.display());
        }
        return Ok(true);
    }
    let matroid = match (args.parts, args.graphic, args.uniform) {
        (Some(parts), _, _) => Some(MatroidChoice::Partition { parts }),
        (_, Some(vertices), _) => Some(MatroidChoice::Graphic { vertices }),
        (_, _, Some(rank)) => Some(MatroidChoice::Uniform { rank }),
        _ => None,
    };
    let spec = GeneratorSpec {
        family: args.family.context("--family is required")?,
        items: args.items,
        bidders: args
            .bidders
            .unwrap_or(if matroid.is_some() { 1 } else { 2 }),
        matroid,
        max_weight: args.max_weight,
        density: args.density,
        seed: cli.seed,
    };
    let text = generate(&spec)?.to_string();
    match &args.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(true)
}

fn run(cli: &Cli, args: &RunArgs) -> anyhow::Result<bool> {
    let config = match &args.config {
        Some(p) => serde_json::from_str::<ExperimentConfig>(&std::fs::read_to_string(p)?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => ExperimentConfig {
            sources: args
                .instance
                .iter()
                .map(|p| InstanceSource::File { path: p.clone() })
                .chain(
                    args.dir
                        .iter()
                        .map(|p| InstanceSource::Dir { path: p.clone() }),
                )
                .collect(),
            matroid: args.matroid.clone(),
            algs: args.alg.clone(),
            order: args.order,
            trials: args.trials,
            seed: cli.seed,
            t: args.t.0,
            diagnostics: args.diagnostics,
            output: cli.csv.clone(),
        },
    };
    let out = run_experiment(&config)?;
    let path = config.output.clone().or(cli.csv.clone());
    emit(&out.rows, &ROW_HEADER, path.as_deref())?;
    if config.diagnostics {
        let diag = path.as_ref().map(|p| p.with_extension("diagnostics.csv"));
        emit(&out.diagnostics, &DIAGNOSTIC_HEADER, diag.as_deref())?;
    }
    let passed = out.passed();
    if !cli.quiet {
        let below = out.rows.iter().filter(|r| !r.meets_target()).count();
        eprintln!("{} rows, {below} below target", out.rows.len());
    }
    Ok(passed || !args.gate)
}

fn opt(cli: &Cli, args: &OptArgs) -> anyhow::Result<bool> {
    let mut entry = load_instance(&args.instance)?;
    if let Some(p) = &args.matroid {
        let (items, spec) = parse_matroid(&std::fs::read_to_string(p)?)?;
        if items != entry.file.items {
            bail!(
                "matroid has {items} elements, instance has {} items",
                entry.file.items
            );
        }
        entry.file.matroid = Some(spec);
    }
    let opt = compute_opt(&entry.file)?;
    if args.sidecar {
        std::fs::write(args.instance.with_extension(OPT_EXT), opt.to_string())?;
    } else {
        print!("{opt}");
    }
    if !cli.quiet {
        eprintln!("{}: opt {}", entry.id, opt.value);
    }
    Ok(true)
}

fn verify(cli: &Cli, args: &VerifyArgs) -> anyhow::Result<bool> {
    let mut config = SuiteConfig {
        seed: cli.seed,
        trials: args.trials,
        ..SuiteConfig::default()
    };
    if let Some(c) = &args.corpus {
        config.corpus = c.clone();
    }
    let rows = run_suite(args.suite, &config)?;
    emit(&rows, &SUITE_HEADER, cli.csv.as_deref())?;
    let failed = rows.iter().filter(|r| !r.holds).count();
    if !cli.quiet {
        eprintln!(
            "{}: {} checks, {failed} failed",
            args.suite.name(),
            rows.len()
        );
    }
    Ok(failed == 0)
}

#[derive(Serialize)]
struct HardnessRow {
    alg: String,
    big: f64,
    case: &'static str,
    alg_value: f64,
    opt_value: f64,
    ratio: f64,
    allocation: String,
}

fn hardness(cli: &Cli, args: &HardnessArgs) -> anyhow::Result<bool> {
    let mut alg = allocator_by_name(&args.alg)
        .with_context(|| format!("unknown allocator '{}'", args.alg))?;
    let o = run_hardness(alg.as_mut(), args.big)?;
    let held: Vec<String> = o.allocation.iter().map(|i| format!("v{}", i + 1)).collect();
    let row = HardnessRow {
        alg: args.alg.clone(),
        big: args.big,
        case: match o.case {
            HardnessCase::A => "A",
            HardnessCase::B => "B",
        },
        alg_value: o.alg_value,
        opt_value: o.opt_value,
        ratio: o.ratio,
        allocation: held.join(" "),
    };
    emit(
        &[row],
        &[
            "alg",
            "M",
            "case",
            "alg_value",
            "opt_value",
            "ratio",
            "allocation",
        ],
        cli.csv.as_deref(),
    )?;
    Ok(true)
}

#[derive(Serialize)]
struct BoundsRow {
    k: usize,
    i: usize,
    opt: f64,
    solution: f64,
    union: f64,
    ratio: f64,
}

fn bounds(cli: &Cli, args: &BoundsArgs) -> anyhow::Result<bool> {
    let iterations: Vec<usize> = match args.i {
        Some(i) => vec![i],
        None => (0..=default_t(args.k)).collect(),
    };
    let rows = iterations
        .into_iter()
        .map(|i| {
            let b = closed_form_bounds(args.k, i, args.opt)?;
            Ok(BoundsRow {
                k: args.k,
                i,
                opt: args.opt,
                solution: b.solution,
                union: b.union,
                ratio: if args.opt > 0.0 {
                    b.solution / args.opt
                } else {
                    0.0
                },
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    emit(
        &rows,
        &["k", "i", "opt", "solution", "union", "ratio"],
        cli.csv.as_deref(),
    )?;
    if !cli.quiet {
        eprintln!(
            "default T = {}, limit ratio = {:.6}",
            default_t(args.k),
            limit_ratio()
        );
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => gen(&cli, a),
        Command::Run(a) => run(&cli, a),
        Command::Opt(a) => opt(&cli, a),
        Command::Verify(a) => verify(&cli, a),
        Command::Hardness(a) => hardness(&cli, a),
        Command::Bounds(a) => bounds(&cli, a),
    };
    let _ = std::io::stdout().flush();
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
