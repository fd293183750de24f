use std::collections::BTreeSet;

use swalloc::corpus::{compute_opt, corpus_root, load_dir, load_manifest, render_manifest};
use swalloc::format::{LoadedMatroid, Utility};
use swalloc::generate::Family;

#[test]
fn manifest_regenerates_the_shipped_files_byte_for_byte() {
    let root = corpus_root();
    for (rel, text) in render_manifest(&load_manifest(&root).unwrap()).unwrap() {
        let on_disk = std::fs::read_to_string(root.join(&rel)).unwrap();
        assert_eq!(
            on_disk,
            text,
            "{} differs from its manifest entry",
            rel.display()
        );
    }
}

#[test]
fn sidecars_match_brute_force() {
    for group in ["welfare", "matroid", "general"] {
        for e in load_dir(&corpus_root().join(group)).unwrap() {
            assert_eq!(
                e.opt.clone().unwrap(),
                compute_opt(&e.file).unwrap(),
                "{}",
                e.id
            );
        }
    }
}

#[test]
fn welfare_corpus_spans_the_required_shapes() {
    let manifest = load_manifest(&corpus_root()).unwrap();
    let entries = load_dir(&corpus_root().join("welfare")).unwrap();
    assert!(entries.len() >= 20);
    let items: BTreeSet<usize> = entries.iter().map(|e| e.file.items).collect();
    let bidders: BTreeSet<usize> = entries.iter().map(|e| e.file.bidders.len()).collect();
    assert_eq!(items, BTreeSet::from([3, 4, 5, 6]));
    assert_eq!(bidders, BTreeSet::from([1, 2, 3]));
    let families: BTreeSet<String> = manifest
        .iter()
        .filter(|m| m.group == "welfare")
        .map(|m| format!("{:?}", m.spec.family))
        .collect();
    for f in [
        Family::RandomTable,
        Family::Coverage,
        Family::Cut,
        Family::Priced,
    ] {
        assert!(families.contains(&format!("{f:?}")));
    }
    let kinds: BTreeSet<&str> = entries
        .iter()
        .flat_map(|e| e.file.bidders.iter().map(Utility::kind))
        .collect();
    assert_eq!(kinds, BTreeSet::from(["coverage", "cut", "table"]));
}

#[test]
fn matroid_corpus_ranks() {
    let mut partition_ranks = BTreeSet::new();
    for e in load_dir(&corpus_root().join("matroid")).unwrap() {
        match e.file.matroid().unwrap().unwrap() {
            LoadedMatroid::Partition(p) => partition_ranks.insert(p.k()),
            other => panic!("{}: expected a partition matroid, got {other:?}", e.id),
        };
    }
    assert_eq!(partition_ranks, BTreeSet::from([3, 4, 5]));
    let general = load_dir(&corpus_root().join("general")).unwrap();
    assert!(!general.is_empty());
    for e in general {
        assert_eq!(
            e.file.matroid().unwrap().unwrap().as_dyn().rank(),
            4,
            "{}",
            e.id
        );
    }
}
