use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn treemilo(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treemilo")).args(args).current_dir(dir).output().expect("binary runs")
}

/// XOR over two features plus a noise column, with a manifest.
fn write_dataset(dir: &Path) {
    let data = dir.join("data");
    fs::create_dir_all(&data).unwrap();
    let mut csv = String::from("a,b,c,y\n");
    for i in 0..16 {
        let (a, b, c) = (i & 1, (i >> 1) & 1, (i >> 2) & 1);
        csv.push_str(&format!("{a},{b},{c},{}\n", if a ^ b == 1 { "yes" } else { "no" }));
    }
    fs::write(data.join("xor.csv"), csv).unwrap();
    fs::write(
        data.join("xor.json"),
        r#"{"name":"xor","file":"xor.csv","label_column":"y","columns":{"a":"categorical","b":"categorical","c":"categorical"},"source":"synthetic"}"#,
    )
    .unwrap();
    fs::write(
        dir.join("run.toml"),
        "datasets = [\"xor\"]\nheights = [2]\nreplicates = 2\ntime_limit_s = 30\nformulations = [\"FlowOCT\", \"CUT2\"]\n",
    )
    .unwrap();
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn train_writes_tree_and_lp() {
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(tmp.path());
    let o = treemilo(
        &["train", "--dataset", "xor", "--height", "2", "--formulation", "MCF1", "--tree-out", "tree.json", "--lp-out", "m.lp"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("train accuracy 1.0000"), "{}", stderr(&o));
    let tree: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("tree.json")).unwrap()).unwrap();
    assert_eq!(tree["height"], 2);
    assert!(fs::read_to_string(tmp.path().join("m.lp")).unwrap().starts_with("Maximize"));
}

#[test]
fn train_with_lazy_cuts_logs_them() {
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(tmp.path());
    let o = treemilo(
        &["train", "--dataset", "xor", "--height", "2", "--formulation", "CUT1", "--strategy", "LAZY", "--cut-log", "cuts.csv"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let log = fs::read_to_string(tmp.path().join("cuts.csv")).unwrap();
    assert!(log.starts_with("iter,i,v,c,violation,phase"));
}

#[test]
fn bench_writes_tables_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(tmp.path());
    let o = treemilo(&["bench", "--config", "run.toml", "--out", "out"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = tmp.path().join("out");
    for f in ["cells.csv", "summary.csv", "table.txt", "manifest.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let cells = fs::read_to_string(out.join("cells.csv")).unwrap();
    // 2 formulations + 2 CART variants, 2 replicates each.
    assert_eq!(cells.lines().count(), 1 + 8);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["backend"].as_str().unwrap().starts_with("highs-"));
}

#[test]
fn bench_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(tmp.path());
    let cols = |dir: &str| {
        let o = treemilo(&["bench", "--config", "run.toml", "--out", dir], tmp.path());
        assert!(o.status.success(), "{}", stderr(&o));
        let text = fs::read_to_string(tmp.path().join(dir).join("cells.csv")).unwrap();
        // Drop the time column, which is never reproducible.
        text.lines()
            .map(|l| l.split(',').enumerate().filter(|(i, _)| *i != 9).map(|(_, c)| c).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
    };
    assert_eq!(cols("a"), cols("b"));
}

#[test]
fn cuts_reports_ratios() {
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(tmp.path());
    let o = treemilo(&["cuts", "--config", "run.toml", "--out", "out", "--replicates", "1"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(tmp.path().join("out/ratios.txt")).unwrap();
    assert!(table.contains("FRAC3"));
    // The config lists CUT2 only among the cut formulations.
    assert_eq!(table.lines().count(), 2 + 1);
    assert!(table.contains("CUT2") && !table.contains("CUT1"));
}

#[test]
fn pareto_writes_frontier() {
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(tmp.path());
    let o = treemilo(&["pareto", "--dataset", "xor", "--height", "2", "--out", "out", "--svg"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("out/pareto_xor_h2_CUT2.csv")).unwrap();
    assert!(csv.starts_with("dataset,formulation,h,k,train_obj,test_acc,status,seconds,dominant"));
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(tmp.path().join("out/pareto_xor_h2_CUT2.svg").exists());
}

#[test]
fn oracle_check_passes_on_small_batch() {
    let tmp = tempfile::tempdir().unwrap();
    let o = treemilo(&["oracle-check", "--instances", "4"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 disagreements"));
}

#[test]
fn relax_check_flags_the_cut1_gap() {
    // Random instance 43 has a CUT1 relaxation strictly above MCF1's.
    let tmp = tempfile::tempdir().unwrap();
    let o = treemilo(&["relax-check", "--first", "43", "--instances", "1"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("CUT1 = MCF1 fails"), "{}", stderr(&o));
}

#[test]
fn bad_config_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "datasets = []\nheights = [2]\n").unwrap();
    let o = treemilo(&["bench", "--config", "bad.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse_and_find_their_data() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["bench.toml", "cuts.toml"] {
        let cfg = treemilo::experiments::ExperimentConfig::read(dir.join(name)).unwrap();
        cfg.validate().unwrap();
        for d in &cfg.datasets {
            assert!(cfg.data_dir.join(format!("{d}.json")).exists(), "{name}: {d}");
        }
    }
}
