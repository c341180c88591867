//! Rewrites the bundled fixtures. Run with `--ignored` after changing the
//! scripted world, the prompts or anything that alters the trees.

mod common;

use std::fs;

use btprop_core::hmt::EmissionTable;
use common::{btprop, decomposition, fixtures, single_node, three_node};

#[test]
#[ignore]
fn regenerate_fixtures() {
    let root = fixtures();
    for (name, tree) in [
        ("single_095", single_node(0.95)),
        ("three_node", three_node()),
        ("decomposition", decomposition()),
    ] {
        fs::write(
            root.join(format!("trees/{name}.tree.json")),
            tree.to_canonical_string(),
        )
        .unwrap();
    }
    fs::write(
        root.join("emission/table1.json"),
        EmissionTable::default().to_json(),
    )
    .unwrap();

    let corpus = root.join("corpus");
    let replay = corpus.join("replay");
    let golden = corpus.join("golden");
    for dir in [&replay, &golden] {
        if dir.exists() {
            fs::remove_dir_all(dir).unwrap();
        }
    }
    let path = |p: &std::path::Path| p.to_str().unwrap().to_owned();
    let scratch = tempfile::tempdir().unwrap();

    let recorded = btprop(&[
        "detect",
        "--config",
        &path(&corpus.join("btprop.toml")),
        "--provider",
        "scripted",
        "--script",
        &path(&corpus.join("world.json")),
        "--cache",
        &path(&replay),
        "--dataset",
        &path(&corpus.join("dataset.jsonl")),
        "--out",
        &path(&scratch.path().join("predictions.jsonl")),
    ]);
    assert!(
        recorded.status.success(),
        "{}",
        String::from_utf8_lossy(&recorded.stderr)
    );

    fs::create_dir_all(&golden).unwrap();
    let replayed = btprop(&[
        "detect",
        "--config",
        &path(&corpus.join("btprop.toml")),
        "--dataset",
        &path(&corpus.join("dataset.jsonl")),
        "--out",
        &path(&golden.join("predictions.jsonl")),
        "--report",
        &path(&golden.join("report.json")),
        "--keep-trees",
    ]);
    assert!(
        replayed.status.success(),
        "{}",
        String::from_utf8_lossy(&replayed.stderr)
    );
}
