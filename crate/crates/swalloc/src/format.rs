//! The `swinstance 1` text format.
//!
//! ```text
//! swinstance 1
//! items 2
//! bidders 2
//! bidder 1 table
//!   values 0 1 1 0            # index = subset bitmask, bit i-1 is item i
//! bidder 2 coverage
//!   universe 3
//!   weights 1 1 1
//!   covers 1: 1 2
//!   covers 2: 2 3
//! ```
//!
//! Items, bidders, universe elements and parts are numbered from 1 in the
//! file and from 0 in memory. `#` starts a comment. Bidders may also be
//! `bidder <j> cut` with `edge <a> <b> <w>` lines. A single-bidder file may
//! end with `matroid partition` and `part <j>: <items>` lines,
//! `matroid uniform <r>`, or `matroid table` with
//! `independent: <set> ; <set> ; ...`.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use swalloc_core::function::{CoverageFunction, CutFunction, SetFunction, TableFunction};
use swalloc_core::matroid::{Matroid, PartitionStructure, TableMatroid, UniformMatroid};
use swalloc_core::{ItemSet, WelfareInstance};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        message: message.into(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Utility {
    Table {
        values: Vec<f64>,
    },
    Coverage {
        weights: Vec<f64>,
        /// Universe elements covered by each item.
        covers: Vec<Vec<usize>>,
    },
    Cut {
        edges: Vec<(usize, usize, f64)>,
    },
}

impl Utility {
    pub fn kind(&self) -> &'static str {
        match self {
            Utility::Table { .. } => "table",
            Utility::Coverage { .. } => "coverage",
            Utility::Cut { .. } => "cut",
        }
    }

    /// The set function, with tables checked for non-negativity and
    /// submodularity.
    pub fn build(&self, items: usize) -> swalloc_core::Result<Arc<dyn SetFunction>> {
        Ok(match self {
            Utility::Table { values } => Arc::new(TableFunction::validated(items, values.clone())?),
            Utility::Coverage { weights, covers } => Arc::new(CoverageFunction::new(
                weights.clone(),
                covers.iter().map(|c| c.iter().copied().collect()).collect(),
            )?),
            Utility::Cut { edges } => Arc::new(CutFunction::new(items, edges.clone())?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatroidSpec {
    Partition(Vec<Vec<usize>>),
    Uniform(usize),
    Table(Vec<Vec<usize>>),
}

/// A matroid over the instance items.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedMatroid {
    Partition(PartitionStructure),
    Uniform(UniformMatroid),
    Table(TableMatroid),
}

impl LoadedMatroid {
    pub fn as_dyn(&self) -> &dyn Matroid {
        match self {
            LoadedMatroid::Partition(m) => m,
            LoadedMatroid::Uniform(m) => m,
            LoadedMatroid::Table(m) => m,
        }
    }
}

impl MatroidSpec {
    pub fn build(&self, elements: usize) -> swalloc_core::Result<LoadedMatroid> {
        Ok(match self {
            MatroidSpec::Partition(parts) => {
                LoadedMatroid::Partition(PartitionStructure::new(elements, parts.clone())?)
            }
            MatroidSpec::Uniform(rank) => LoadedMatroid::Uniform(UniformMatroid {
                elements,
                rank: *rank,
            }),
            MatroidSpec::Table(sets) => LoadedMatroid::Table(TableMatroid::new(
                elements,
                sets.iter()
                    .map(|s| s.iter().copied().collect::<ItemSet>())
                    .collect(),
            )?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub items: usize,
    pub bidders: Vec<Utility>,
    pub matroid: Option<MatroidSpec>,
}

impl InstanceFile {
    pub fn to_welfare(&self) -> swalloc_core::Result<WelfareInstance> {
        let utilities = self
            .bidders
            .iter()
            .map(|u| u.build(self.items))
            .collect::<swalloc_core::Result<Vec<_>>>()?;
        WelfareInstance::new(self.items, utilities)
    }

    pub fn matroid(&self) -> swalloc_core::Result<Option<LoadedMatroid>> {
        self.matroid
            .as_ref()
            .map(|m| m.build(self.items))
            .transpose()
    }
}

enum Block {
    None,
    Bidder {
        index: usize,
        line: usize,
        partial: PartialUtility,
    },
    Matroid {
        line: usize,
        partial: PartialMatroid,
    },
}

enum PartialUtility {
    Table(Option<Vec<f64>>),
    Coverage {
        universe: Option<usize>,
        weights: Option<Vec<f64>>,
        covers: Vec<Option<Vec<usize>>>,
    },
    Cut(Vec<(usize, usize, f64)>),
}

enum PartialMatroid {
    Partition(Vec<(usize, Vec<usize>)>),
    Uniform(usize),
    Table(Option<Vec<Vec<usize>>>),
}

fn number<T: std::str::FromStr>(line: usize, token: &str, what: &str) -> Result<T, ParseError> {
    token
        .parse()
        .or_else(|_| err(line, format!("expected {what}, found '{token}'")))
}

fn real(line: usize, token: &str) -> Result<f64, ParseError> {
    let v: f64 = number(line, token, "a number")?;
    if !v.is_finite() {
        return err(line, format!("'{token}' is not finite"));
    }
    Ok(v)
}

/// Parses a 1-based index in `1..=bound` into 0-based.
fn index(line: usize, token: &str, bound: usize, what: &str) -> Result<usize, ParseError> {
    let i: usize = number(line, token, what)?;
    if i == 0 || i > bound {
        return err(line, format!("{what} {i} is outside 1..={bound}"));
    }
    Ok(i - 1)
}

/// Splits `<head>: <elements>` into the head and the element tokens.
fn split_label(line: usize, tokens: &[&str]) -> Result<(String, Vec<String>), ParseError> {
    let joined = tokens.join(" ");
    let Some((head, rest)) = joined.split_once(':') else {
        return err(line, "expected '<index>: <elements>'");
    };
    Ok((
        head.trim().to_string(),
        rest.split_whitespace().map(String::from).collect(),
    ))
}

struct Parser {
    items: Option<usize>,
    bidder_count: Option<usize>,
    bidders: Vec<Option<Utility>>,
    matroid: Option<MatroidSpec>,
    block: Block,
}

impl Parser {
    fn items(&self, line: usize) -> Result<usize, ParseError> {
        self.items
            .map_or_else(|| err(line, "'items' must come first"), Ok)
    }

    fn finish_block(&mut self) -> Result<(), ParseError> {
        match std::mem::replace(&mut self.block, Block::None) {
            Block::None => {}
            Block::Bidder {
                index,
                line,
                partial,
            } => {
                let utility = match partial {
                    PartialUtility::Table(None) => {
                        return err(line, "table bidder without 'values'")
                    }
                    PartialUtility::Table(Some(values)) => Utility::Table { values },
                    PartialUtility::Coverage {
                        universe,
                        weights,
                        covers,
                    } => {
                        let (Some(u), Some(weights)) = (universe, weights) else {
                            return err(line, "coverage bidder needs 'universe' and 'weights'");
                        };
                        if weights.len() != u {
                            return err(
                                line,
                                format!("{} weights for a universe of {u}", weights.len()),
                            );
                        }
                        Utility::Coverage {
                            weights,
                            covers: covers.into_iter().map(Option::unwrap_or_default).collect(),
                        }
                    }
                    PartialUtility::Cut(edges) => Utility::Cut { edges },
                };
                if self.bidders[index].replace(utility).is_some() {
                    return err(line, format!("bidder {} defined twice", index + 1));
                }
            }
            Block::Matroid { line, partial } => {
                let spec = match partial {
                    PartialMatroid::Partition(mut parts) => {
                        parts.sort_by_key(|(j, _)| *j);
                        for (expected, (j, _)) in parts.iter().enumerate() {
                            if *j != expected {
                                return err(
                                    line,
                                    format!("part {} is missing or repeated", expected + 1),
                                );
                            }
                        }
                        MatroidSpec::Partition(parts.into_iter().map(|(_, p)| p).collect())
                    }
                    PartialMatroid::Uniform(r) => MatroidSpec::Uniform(r),
                    PartialMatroid::Table(None) => {
                        return err(line, "table matroid without 'independent:'")
                    }
                    PartialMatroid::Table(Some(sets)) => MatroidSpec::Table(sets),
                };
                if self.matroid.replace(spec).is_some() {
                    return err(line, "more than one matroid block");
                }
            }
        }
        Ok(())
    }

    fn top_level(&mut self, line: usize, t: &[&str]) -> Result<(), ParseError> {
        match t {
            ["items", m] => {
                if self.items.is_some() {
                    return err(line, "'items' given twice");
                }
                let m: usize = number(line, m, "an item count")?;
                if m > 63 {
                    return err(line, "at most 63 items are supported");
                }
                self.items = Some(m);
            }
            ["bidders", n] => {
                self.items(line)?;
                if self.bidder_count.is_some() {
                    return err(line, "'bidders' given twice");
                }
                let n: usize = number(line, n, "a bidder count")?;
                self.bidder_count = Some(n);
                self.bidders = vec![None; n];
            }
            ["bidder", j, kind] => {
                let items = self.items(line)?;
                let n = self
                    .bidder_count
                    .map_or_else(|| err(line, "'bidders' must precede bidder blocks"), Ok)?;
                let index = index(line, j, n, "bidder")?;
                let partial = match *kind {
                    "table" => PartialUtility::Table(None),
                    "coverage" => PartialUtility::Coverage {
                        universe: None,
                        weights: None,
                        covers: vec![None; items],
                    },
                    "cut" => PartialUtility::Cut(Vec::new()),
                    other => return err(line, format!("unknown bidder kind '{other}'")),
                };
                self.block = Block::Bidder {
                    index,
                    line,
                    partial,
                };
            }
            ["matroid", kind, rest @ ..] => {
                self.items(line)?;
                let partial = match (*kind, rest) {
                    ("partition", []) => PartialMatroid::Partition(Vec::new()),
                    ("uniform", [r]) => PartialMatroid::Uniform(number(line, r, "a rank")?),
                    ("table", []) => PartialMatroid::Table(None),
                    ("partition" | "uniform" | "table", _) => {
                        return err(line, format!("malformed 'matroid {kind}' line"))
                    }
                    (other, _) => return err(line, format!("unknown matroid kind '{other}'")),
                };
                self.block = Block::Matroid { line, partial };
            }
            _ => return err(line, format!("unexpected '{}'", t.join(" "))),
        }
        Ok(())
    }

    fn inner(&mut self, line: usize, t: &[&str]) -> Result<bool, ParseError> {
        let items = self.items.unwrap_or(0);
        match &mut self.block {
            Block::None => return Ok(false),
            Block::Bidder { partial, .. } => match (partial, t) {
                (PartialUtility::Table(values), ["values", rest @ ..]) => {
                    if values.is_some() {
                        return err(line, "'values' given twice");
                    }
                    let v = rest
                        .iter()
                        .map(|x| real(line, x))
                        .collect::<Result<Vec<_>, _>>()?;
                    if v.len() != 1 << items {
                        return err(
                            line,
                            format!("expected {} values, found {}", 1u64 << items, v.len()),
                        );
                    }
                    *values = Some(v);
                }
                (PartialUtility::Coverage { universe, .. }, ["universe", u]) => {
                    *universe = Some(number(line, u, "a universe size")?);
                }
                (PartialUtility::Coverage { weights, .. }, ["weights", rest @ ..]) => {
                    *weights = Some(
                        rest.iter()
                            .map(|x| real(line, x))
                            .collect::<Result<Vec<_>, _>>()?,
                    );
                }
                (
                    PartialUtility::Coverage {
                        universe, covers, ..
                    },
                    ["covers", ..],
                ) => {
                    let u = universe
                        .map_or_else(|| err(line, "'universe' must precede 'covers'"), Ok)?;
                    let (head, rest) = split_label(line, &t[1..])?;
                    let i = index(line, &head, items, "item")?;
                    let elems = rest
                        .iter()
                        .map(|e| index(line, e, u, "universe element"))
                        .collect::<Result<Vec<_>, _>>()?;
                    if covers[i].replace(elems).is_some() {
                        return err(line, format!("covers of item {} given twice", i + 1));
                    }
                }
                (PartialUtility::Cut(edges), ["edge", a, b, w]) => {
                    let (a, b) = (
                        index(line, a, items, "item")?,
                        index(line, b, items, "item")?,
                    );
                    if a == b {
                        return err(line, "self-loop");
                    }
                    let w = real(line, w)?;
                    if w < 0.0 {
                        return err(line, "negative edge weight");
                    }
                    edges.push((a, b, w));
                }
                _ => return Ok(false),
            },
            Block::Matroid { partial, .. } => match (partial, t) {
                (PartialMatroid::Partition(parts), ["part", ..]) => {
                    let (head, rest) = split_label(line, &t[1..])?;
                    let j: usize = number(line, &head, "a part index")?;
                    if j == 0 {
                        return err(line, "parts are numbered from 1");
                    }
                    let elems = rest
                        .iter()
                        .map(|e| index(line, e, items, "element"))
                        .collect::<Result<Vec<_>, _>>()?;
                    parts.push((j - 1, elems));
                }
                (PartialMatroid::Table(sets), [first, ..])
                    if first.trim_end_matches(':') == "independent" =>
                {
                    let joined = t.join(" ");
                    let body = joined.split_once(':').map_or("", |(_, b)| b);
                    let mut out = Vec::new();
                    for chunk in body.split(';') {
                        let set = chunk
                            .split_whitespace()
                            .filter(|x| *x != "{}")
                            .map(|e| index(line, e, items, "element"))
                            .collect::<Result<Vec<_>, _>>()?;
                        out.push(set);
                    }
                    sets.get_or_insert_with(Vec::new).extend(out);
                }
                _ => return Ok(false),
            },
        }
        Ok(true)
    }
}

fn lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let content = l.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        (!tokens.is_empty()).then_some((i + 1, tokens))
    })
}

fn parse(text: &str) -> Result<Parser, ParseError> {
    let mut it = lines(text);
    match it.next() {
        Some((_, t)) if t == ["swinstance", "1"] => {}
        Some((line, _)) => return err(line, "expected header 'swinstance 1'"),
        None => return err(1, "empty file"),
    }
    let mut p = Parser {
        items: None,
        bidder_count: None,
        bidders: Vec::new(),
        matroid: None,
        block: Block::None,
    };
    for (line, tokens) in it {
        if !p.inner(line, &tokens)? {
            p.finish_block()?;
            p.top_level(line, &tokens)?;
        }
    }
    p.finish_block()?;
    Ok(p)
}

pub fn parse_instance(text: &str) -> Result<InstanceFile, ParseError> {
    let last = text.lines().count().max(1);
    let p = parse(text)?;
    let items = p.items.map_or_else(|| err(last, "missing 'items'"), Ok)?;
    if p.bidder_count.is_none() {
        return err(last, "missing 'bidders'");
    }
    let bidders = p
        .bidders
        .into_iter()
        .enumerate()
        .map(|(j, b)| b.map_or_else(|| err(last, format!("bidder {} is not defined", j + 1)), Ok))
        .collect::<Result<Vec<_>, _>>()?;
    if p.matroid.is_some() && bidders.len() != 1 {
        return err(last, "a matroid instance must have exactly one bidder");
    }
    Ok(InstanceFile {
        items,
        bidders,
        matroid: p.matroid,
    })
}

/// Reads a file holding only the header, `items` and a matroid block.
pub fn parse_matroid(text: &str) -> Result<(usize, MatroidSpec), ParseError> {
    let last = text.lines().count().max(1);
    let p = parse(text)?;
    let items = p.items.map_or_else(|| err(last, "missing 'items'"), Ok)?;
    let spec = p
        .matroid
        .map_or_else(|| err(last, "no matroid block"), Ok)?;
    Ok((items, spec))
}

fn join<T: fmt::Display>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn one_based(xs: &[usize]) -> String {
    join(xs.iter().map(|x| x + 1))
}

fn write_matroid(out: &mut String, m: &MatroidSpec) {
    match m {
        MatroidSpec::Partition(parts) => {
            out.push_str("matroid partition\n");
            for (j, p) in parts.iter().enumerate() {
                let _ = writeln!(out, "  part {}: {}", j + 1, one_based(p));
            }
        }
        MatroidSpec::Uniform(r) => {
            let _ = writeln!(out, "matroid uniform {r}");
        }
        MatroidSpec::Table(sets) => {
            let body: Vec<String> = sets
                .iter()
                .map(|s| {
                    if s.is_empty() {
                        "{}".into()
                    } else {
                        one_based(s)
                    }
                })
                .collect();
            let _ = writeln!(out, "matroid table\n  independent: {}", body.join(" ; "));
        }
    }
}

impl fmt::Display for InstanceFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "swinstance 1\nitems {}\nbidders {}",
            self.items,
            self.bidders.len()
        );
        for (j, b) in self.bidders.iter().enumerate() {
            let _ = writeln!(out, "bidder {} {}", j + 1, b.kind());
            match b {
                Utility::Table { values } => {
                    let _ = writeln!(out, "  values {}", join(values));
                }
                Utility::Coverage { weights, covers } => {
                    let _ = writeln!(
                        out,
                        "  universe {}\n  weights {}",
                        weights.len(),
                        join(weights)
                    );
                    for (i, c) in covers.iter().enumerate().filter(|(_, c)| !c.is_empty()) {
                        let _ = writeln!(out, "  covers {}: {}", i + 1, one_based(c));
                    }
                }
                Utility::Cut { edges } => {
                    for (a, b, w) in edges {
                        let _ = writeln!(out, "  edge {} {} {w}", a + 1, b + 1);
                    }
                }
            }
        }
        if let Some(m) = &self.matroid {
            write_matroid(&mut out, m);
        }
        f.write_str(&out)
    }
}

/// Standalone matroid file for `--matroid`.
pub fn write_matroid_file(items: usize, m: &MatroidSpec) -> String {
    let mut out = format!("swinstance 1\nitems {items}\n");
    write_matroid(&mut out, m);
    out
}
