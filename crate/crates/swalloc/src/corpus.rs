//! The golden corpus: instance files with OPT sidecars, regenerable from a
//! manifest of generator specs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use serde::{Deserialize, Serialize};
use swalloc_core::verify::{brute_force_opt_matroid, brute_force_opt_welfare};
use swalloc_core::Allocation;

use crate::format::{parse_instance, InstanceFile};
use crate::generate::{generate, GeneratorSpec};

pub const INSTANCE_EXT: &str = "swi";
pub const OPT_EXT: &str = "opt";

/// Optimum with its witness: the items of each bidder, or for a matroid
/// instance the chosen set as bidder 1.
#[derive(Debug, Clone, PartialEq)]
pub struct OptSidecar {
    pub value: f64,
    pub witness: Vec<Vec<usize>>,
}

impl OptSidecar {
    pub fn allocation(&self) -> Allocation {
        Allocation::from_sets(
            self.witness
                .iter()
                .map(|s| s.iter().copied().collect())
                .collect(),
        )
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let value = match lines
            .next()
            .map(|l| l.split_whitespace().collect::<Vec<_>>())
        {
            Some(t) if t.len() == 2 && t[0] == "opt" => t[1].parse::<f64>().context("opt value")?,
            _ => bail!("sidecar must start with 'opt <value>'"),
        };
        let mut witness = Vec::new();
        for (j, line) in lines.enumerate() {
            let Some(rest) = line.strip_prefix(&format!("bidder {}:", j + 1)) else {
                bail!("expected 'bidder {}:', found '{line}'", j + 1);
            };
            let items = rest
                .split_whitespace()
                .map(|x| x.parse::<usize>().ok().filter(|i| *i >= 1).map(|i| i - 1))
                .collect::<Option<Vec<_>>>()
                .context("witness items are 1-based integers")?;
            witness.push(items);
        }
        Ok(Self { value, witness })
    }
}

impl std::fmt::Display for OptSidecar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut out = format!("opt {}\n", self.value);
        for (j, s) in self.witness.iter().enumerate() {
            let items: Vec<String> = s.iter().map(|i| (i + 1).to_string()).collect();
            let _ = writeln!(out, "bidder {}: {}", j + 1, items.join(" "));
        }
        f.write_str(&out)
    }
}

/// Brute-force optimum: over independent sets of the first bidder when the
/// instance carries a matroid, over allocations otherwise.
pub fn compute_opt(file: &InstanceFile) -> anyhow::Result<OptSidecar> {
    let instance = file.to_welfare()?;
    match file.matroid()? {
        Some(m) => {
            ensure!(
                instance.bidders() == 1,
                "matroid instances have exactly one bidder"
            );
            let r = brute_force_opt_matroid(instance.bidder(0), m.as_dyn())?;
            Ok(OptSidecar {
                value: r.value,
                witness: vec![r.witness.iter().collect()],
            })
        }
        None => {
            let r = brute_force_opt_welfare(&instance)?;
            Ok(OptSidecar {
                value: r.value,
                witness: r
                    .witness
                    .sets()
                    .iter()
                    .map(|s| s.iter().collect())
                    .collect(),
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    /// File stem.
    pub id: String,
    pub path: PathBuf,
    pub file: InstanceFile,
    pub opt: Option<OptSidecar>,
}

impl CorpusEntry {
    /// The sidecar optimum, or a fresh brute-force one.
    pub fn opt(&self) -> anyhow::Result<OptSidecar> {
        match &self.opt {
            Some(o) => Ok(o.clone()),
            None => compute_opt(&self.file),
        }
    }
}

pub fn load_instance(path: &Path) -> anyhow::Result<CorpusEntry> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file = parse_instance(&text).with_context(|| format!("parsing {}", path.display()))?;
    let sidecar = path.with_extension(OPT_EXT);
    let opt = if sidecar.exists() {
        let text = std::fs::read_to_string(&sidecar)?;
        Some(OptSidecar::parse(&text).with_context(|| format!("parsing {}", sidecar.display()))?)
    } else {
        None
    };
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .context("instance file name")?
        .to_string();
    Ok(CorpusEntry {
        id,
        path: path.to_path_buf(),
        file,
        opt,
    })
}

/// All `*.swi` files of a directory, sorted by name. A missing directory is
/// an empty corpus.
pub fn load_dir(dir: &Path) -> anyhow::Result<Vec<CorpusEntry>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == INSTANCE_EXT));
    paths.sort();
    paths.iter().map(|p| load_instance(p)).collect()
}

/// Shipped corpus root.
pub fn corpus_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Subdirectory of the corpus root.
    pub group: String,
    pub spec: GeneratorSpec,
}

pub fn load_manifest(root: &Path) -> anyhow::Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(root.join("manifest.json"))?;
    Ok(serde_json::from_str(&text)?)
}

/// Relative path and contents of every instance and sidecar file.
pub fn render_manifest(entries: &[ManifestEntry]) -> anyhow::Result<Vec<(PathBuf, String)>> {
    let mut out = Vec::new();
    for e in entries {
        let file = generate(&e.spec).with_context(|| format!("generating {}", e.id))?;
        let opt = compute_opt(&file).with_context(|| format!("optimum of {}", e.id))?;
        let base = Path::new(&e.group).join(&e.id);
        out.push((base.with_extension(INSTANCE_EXT), file.to_string()));
        out.push((base.with_extension(OPT_EXT), opt.to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_roundtrip() {
        let s = OptSidecar {
            value: 7.5,
            witness: vec![vec![0, 2], vec![], vec![1]],
        };
        assert_eq!(OptSidecar::parse(&s.to_string()).unwrap(), s);
        assert!(OptSidecar::parse("opt x\n").is_err());
        assert!(OptSidecar::parse("opt 1\nbidder 2: 1\n").is_err());
    }

    #[test]
    fn missing_directory_is_empty() {
        assert!(load_dir(Path::new("/nonexistent/corpus"))
            .unwrap()
            .is_empty());
    }
}
