//! Seeded instance generators.

use anyhow::{bail, ensure, Context};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use swalloc_core::function::{
    materialize, CoverageFunction, CutFunction, PricedFunction, SetFunction,
};
use swalloc_core::matroid::{GraphicMatroid, Matroid};
use swalloc_core::ItemSet;

use crate::format::{InstanceFile, MatroidSpec, Utility};

/// Give up on rejection sampling after this many attempts.
pub const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Priced coverage plus a random cut plus a constant, written as an
    /// explicit table.
    RandomTable,
    Coverage,
    Cut,
    /// Coverage minus item prices, written as an explicit table.
    Priced,
}

impl std::str::FromStr for Family {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .with_context(|| format!("unknown family '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MatroidChoice {
    /// `parts` non-empty parts, the first `parts` items one per part.
    Partition {
        parts: usize,
    },
    Uniform {
        rank: usize,
    },
    /// Cycle matroid of a random connected multigraph with one edge per
    /// item, written as the list of its bases.
    Graphic {
        vertices: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub items: usize,
    pub bidders: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matroid: Option<MatroidChoice>,
    /// Weights and prices are integers in `1..=max_weight` and `0..=max_weight`.
    #[serde(default = "default_max_weight")]
    pub max_weight: u32,
    /// Probability of each cover relation or cut edge.
    #[serde(default = "default_density")]
    pub density: f64,
    pub seed: u64,
}

fn default_max_weight() -> u32 {
    4
}

fn default_density() -> f64 {
    0.5
}

fn weight<R: Rng>(max: u32, rng: &mut R) -> f64 {
    f64::from(rng.gen_range(1..=max))
}

fn coverage<R: Rng>(spec: &GeneratorSpec, rng: &mut R) -> CoverageFunction {
    let universe = spec.items + 2;
    let weights = (0..universe)
        .map(|_| weight(spec.max_weight, rng))
        .collect();
    let covers = (0..spec.items)
        .map(|_| {
            let mut c: ItemSet = (0..universe)
                .filter(|_| rng.gen_bool(spec.density))
                .collect();
            if c.is_empty() {
                c.insert(rng.gen_range(0..universe));
            }
            c
        })
        .collect();
    CoverageFunction::new(weights, covers).expect("weights are positive and covers in range")
}

fn cut<R: Rng>(spec: &GeneratorSpec, rng: &mut R) -> CutFunction {
    let mut edges = Vec::new();
    for a in 0..spec.items {
        for b in a + 1..spec.items {
            if rng.gen_bool(spec.density) {
                edges.push((a, b, weight(spec.max_weight, rng)));
            }
        }
    }
    CutFunction::new(spec.items, edges).expect("edges are in range")
}

fn priced<R: Rng>(spec: &GeneratorSpec, rng: &mut R) -> anyhow::Result<PricedFunction> {
    for _ in 0..MAX_ATTEMPTS {
        let base = coverage(spec, rng);
        let prices = (0..spec.items)
            .map(|_| f64::from(rng.gen_range(0..=spec.max_weight)))
            .collect();
        if let Ok(f) = PricedFunction::new(base, prices) {
            return Ok(f);
        }
    }
    bail!("no non-negative priced coverage function in {MAX_ATTEMPTS} attempts")
}

fn table(f: &dyn SetFunction) -> anyhow::Result<Utility> {
    Ok(Utility::Table {
        values: materialize(f)?.values().to_vec(),
    })
}

fn utility<R: Rng>(spec: &GeneratorSpec, rng: &mut R) -> anyhow::Result<Utility> {
    Ok(match spec.family {
        Family::Coverage => {
            let f = coverage(spec, rng);
            Utility::Coverage {
                weights: f.weights().to_vec(),
                covers: f.covers().iter().map(|c| c.iter().collect()).collect(),
            }
        }
        Family::Cut => Utility::Cut {
            edges: cut(spec, rng).edges().to_vec(),
        },
        Family::Priced => table(&priced(spec, rng)?)?,
        Family::RandomTable => {
            let p = materialize(&priced(spec, rng)?)?;
            let c = materialize(&cut(spec, rng))?;
            let offset = f64::from(rng.gen_range(0..=spec.max_weight));
            Utility::Table {
                values: p
                    .values()
                    .iter()
                    .zip(c.values())
                    .map(|(a, b)| a + b + offset)
                    .collect(),
            }
        }
    })
}

fn partition<R: Rng>(items: usize, parts: usize, rng: &mut R) -> anyhow::Result<MatroidSpec> {
    ensure!(parts >= 1 && parts <= items, "need 1 <= parts <= items");
    let mut out: Vec<Vec<usize>> = (0..parts).map(|j| vec![j]).collect();
    for i in parts..items {
        out[rng.gen_range(0..parts)].push(i);
    }
    Ok(MatroidSpec::Partition(out))
}

fn graphic<R: Rng>(items: usize, vertices: usize, rng: &mut R) -> anyhow::Result<MatroidSpec> {
    ensure!(
        vertices >= 2 && items >= vertices - 1,
        "need at least vertices-1 items"
    );
    let mut order: Vec<usize> = (0..vertices).collect();
    order.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = (1..vertices)
        .map(|i| (order[rng.gen_range(0..i)], order[i]))
        .collect();
    while edges.len() < items {
        let a = rng.gen_range(0..vertices);
        let b = (a + rng.gen_range(1..vertices)) % vertices;
        edges.push((a, b));
    }
    edges.shuffle(rng);
    let m = GraphicMatroid::new(vertices, edges)?;
    let rank = vertices - 1;
    let bases = (0..1u64 << items)
        .filter(|mask| mask.count_ones() as usize == rank)
        .map(ItemSet::from_mask)
        .filter(|s| m.is_independent(s))
        .map(|s| s.iter().collect())
        .collect();
    Ok(MatroidSpec::Table(bases))
}

pub fn generate(spec: &GeneratorSpec) -> anyhow::Result<InstanceFile> {
    ensure!(
        spec.items >= 1 && spec.items <= 16,
        "items must be in 1..=16"
    );
    ensure!(spec.bidders >= 1, "at least one bidder is required");
    ensure!(
        spec.matroid.is_none() || spec.bidders == 1,
        "a matroid instance must have exactly one bidder"
    );
    ensure!(spec.max_weight >= 1, "max_weight must be positive");
    ensure!(
        (0.0..=1.0).contains(&spec.density),
        "density must be in [0, 1]"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bidders = (0..spec.bidders)
        .map(|_| utility(spec, &mut rng))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let matroid = match spec.matroid {
        None => None,
        Some(MatroidChoice::Partition { parts }) => Some(partition(spec.items, parts, &mut rng)?),
        Some(MatroidChoice::Uniform { rank }) => Some(MatroidSpec::Uniform(rank)),
        Some(MatroidChoice::Graphic { vertices }) => Some(graphic(spec.items, vertices, &mut rng)?),
    };
    let file = InstanceFile {
        items: spec.items,
        bidders,
        matroid,
    };
    file.to_welfare()?;
    file.matroid()?;
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use swalloc_core::function::{is_nonnegative, is_submodular};

    fn spec(family: Family, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            family,
            items: 5,
            bidders: 1,
            matroid: Some(MatroidChoice::Partition { parts: 3 }),
            max_weight: 4,
            density: 0.5,
            seed,
        }
    }

    #[test]
    fn every_family_is_valid_and_deterministic() {
        for family in [
            Family::RandomTable,
            Family::Coverage,
            Family::Cut,
            Family::Priced,
        ] {
            for seed in 0..20 {
                let a = generate(&spec(family, seed)).unwrap();
                assert_eq!(a, generate(&spec(family, seed)).unwrap());
                let inst = a.to_welfare().unwrap();
                for o in inst.oracles() {
                    let t = materialize(o.function().as_ref()).unwrap();
                    assert!(is_nonnegative(&t) && is_submodular(&t));
                }
            }
        }
    }

    #[test]
    fn graphic_bases_have_rank_vertices_minus_one() {
        let mut s = spec(Family::Coverage, 7);
        s.items = 7;
        s.matroid = Some(MatroidChoice::Graphic { vertices: 5 });
        let f = generate(&s).unwrap();
        let m = f.matroid().unwrap().unwrap();
        assert_eq!(m.as_dyn().rank(), 4);
    }

    #[test]
    fn family_names() {
        assert_eq!(
            "random-table".parse::<Family>().unwrap(),
            Family::RandomTable
        );
        assert!("xor".parse::<Family>().is_err());
        let json = serde_json::to_string(&spec(Family::Priced, 1)).unwrap();
        assert_eq!(
            serde_json::from_str::<GeneratorSpec>(&json).unwrap(),
            spec(Family::Priced, 1)
        );
    }
}
