use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use icnn_opf::icnn::{IcnnModel, NetConfig, OutputLayer};

fn data(name: &str) -> String {
    format!("{}/../core/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icnn-opf")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn manifest(p: &str) -> serde_json::Value {
    let mut m = PathBuf::from(p).into_os_string();
    m.push(".manifest.json");
    serde_json::from_str(&fs::read_to_string(m).unwrap()).unwrap()
}

fn small_dataset(dir: &Path, case: &str, count: &str) -> String {
    let out = path(dir, "data.jsonl");
    ok(&["dataset", "generate", "--case", &data(case), "--count", count, "--seed", "3", "--out", &out]);
    out
}

fn quick_config(dir: &Path) -> String {
    let p = path(dir, "quick.cfg");
    fs::write(&p, "max_epochs = 10 # short run\nlearning_rate = 0.003\n").unwrap();
    p
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&[]), 64);
    assert_eq!(code(&["frobnicate"]), 64);
    assert_eq!(code(&["export-formulation", "--case", &data("toy2.m"), "--kind", "dcx", "--out", "/dev/null"]), 64);
    assert_eq!(code(&["certify", "--model", "m", "--dataset", "d", "--theorem", "3", "--out", "o"]), 64);
    assert_eq!(code(&["certify", "--model", "m", "--dataset", "d", "--theorem", "1", "--samples", "0", "--out", "o"]), 64);
    assert_eq!(code(&["--threads", "0", "case", "inspect", &data("toy2.m")]), 64);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn inspect_reports_counts_and_rejects_bad_files() {
    let text = ok(&["case", "inspect", &data("case14.m")]);
    let field = |name: &str| -> String {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap_or_else(|| panic!("no {name} in {text}"));
        line.split_whitespace().last().unwrap().to_string()
    };
    assert_eq!((field("buses").as_str(), field("branches").as_str(), field("generators").as_str()), ("14", "20", "5"));

    let dir = tempfile::tempdir().unwrap();
    let bad = path(dir.path(), "bad.m");
    fs::write(&bad, "function mpc = bad\nmpc.baseMVA = 100;\nmpc.bus = [ 1 3 0 ];\n").unwrap();
    assert_eq!(code(&["case", "inspect", &bad]), 2);
    assert_eq!(code(&["case", "inspect", &path(dir.path(), "missing.m")]), 2);
}

#[test]
fn generate_writes_samples_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_dataset(dir.path(), "toy2.m", "10");
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 11);
    assert!(lines[0].contains("\"schema_version\":1"));
    assert!(lines[1..].iter().all(|l| l.contains("\"status\":\"optimal\"")));

    let m = manifest(&out);
    assert_eq!(m["command"], "dataset generate");
    assert_eq!(m["seeds"]["dataset"], 3);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(m["outputs"][0]["sha256"].as_str().unwrap().len(), 64);

    let again = path(dir.path(), "again.jsonl");
    ok(&["dataset", "generate", "--case", &data("toy2.m"), "--count", "10", "--seed", "3", "--out", &again]);
    assert_eq!(text, fs::read_to_string(&again).unwrap());
    assert_eq!(manifest(&out)["config_hash"], manifest(&again)["config_hash"]);
}

#[test]
fn generate_rejects_bad_ranges_and_empty_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "d.jsonl");
    let toy = data("toy2.m");
    assert_eq!(code(&["dataset", "generate", "--case", &toy, "--alpha-min", "1.2", "--alpha-max", "1.0", "--out", &out]), 64);
    // the generator's 200 MW cannot serve a tripled 100 MW load
    let args = ["dataset", "generate", "--case", &toy, "--count", "5", "--alpha-min", "3", "--alpha-max", "3.1", "--out", &out];
    assert_eq!(code(&args), 3);
    assert!(!Path::new(&out).exists());
}

#[test]
fn train_attests_convexity_only_for_icnn() {
    let dir = tempfile::tempdir().unwrap();
    let d = small_dataset(dir.path(), "case5.m", "60");
    let cfg = quick_config(dir.path());
    let icnn = path(dir.path(), "icnn.json");
    let dnn = path(dir.path(), "dnn.json");
    let text = ok(&["train", "--dataset", &d, "--config", &cfg, "--widths", "8,8", "--out", &icnn]);
    assert!(text.contains("convexity attested"));
    ok(&["train", "--dataset", &d, "--config", &cfg, "--arch", "dnn", "--widths", "8,8", "--out", &dnn]);

    let m = IcnnModel::load(&fs::read_to_string(&icnn).unwrap()).unwrap();
    assert!(m.is_convex() && m.min_convex_weight() >= 0.0);
    let b = IcnnModel::load(&fs::read_to_string(&dnn).unwrap()).unwrap();
    assert!(!b.is_convex());
    let min_w = b.layers.iter().skip(1).flat_map(|l| l.w.data.iter()).chain(&b.output.w).copied().fold(f64::INFINITY, f64::min);
    assert!(min_w < 0.0);

    let csv = fs::read_to_string(format!("{icnn}.train.csv")).unwrap();
    assert!(csv.lines().count() >= 2);
    assert_eq!(manifest(&icnn)["outputs"].as_array().unwrap().len(), 2);
    assert_eq!(code(&["train", "--dataset", &path(dir.path(), "none.jsonl"), "--out", &icnn]), 2);
    assert_eq!(code(&["train", "--dataset", &d, "--widths", "8,0", "--out", &icnn]), 64);
}

#[test]
fn eval_renders_one_or_two_columns() {
    let dir = tempfile::tempdir().unwrap();
    let d = small_dataset(dir.path(), "case5.m", "60");
    let cfg = quick_config(dir.path());
    let icnn = path(dir.path(), "icnn.json");
    let dnn = path(dir.path(), "dnn.json");
    ok(&["train", "--dataset", &d, "--config", &cfg, "--widths", "8", "--out", &icnn]);
    ok(&["train", "--dataset", &d, "--config", &cfg, "--arch", "dnn", "--widths", "8", "--out", &dnn]);

    let solo = path(dir.path(), "solo");
    ok(&["eval", "--model", &icnn, "--dataset", &d, "--out", &solo]);
    let md = fs::read_to_string(Path::new(&solo).join("report.md")).unwrap();
    assert!(md.contains("ICNN mean gap (%)") && !md.contains("DNN"));
    assert!(!Path::new(&solo).join("gaps_baseline.csv").exists());

    let both = path(dir.path(), "both");
    ok(&["eval", "--model", &icnn, "--baseline", &dnn, "--dataset", &d, "--out", &both]);
    let md = fs::read_to_string(Path::new(&both).join("report.md")).unwrap();
    assert!(md.contains("ICNN mean gap (%)") && md.contains("DNN mean gap (%)"));
    for f in ["gaps.csv", "gaps_baseline.csv", "hist.svg", "scatter.svg"] {
        assert!(Path::new(&both).join(f).exists(), "{f}");
    }

    let other = path(dir.path(), "toy.jsonl");
    ok(&["dataset", "generate", "--case", &data("toy2.m"), "--count", "5", "--out", &other]);
    assert_eq!(code(&["eval", "--model", &icnn, "--dataset", &other, "--out", &both]), 2);
}

fn abs_model() -> IcnnModel {
    let mut m = IcnnModel::init(&NetConfig::new(1, &[2], true, 0)).unwrap();
    m.layers[0].h.data = vec![1.0, -1.0];
    m.layers[0].d = vec![0.0, 0.0];
    m.output = OutputLayer { w: vec![1.0, 1.0], h: vec![0.0], d: 0.0 };
    m
}

/// `|b|` sampled at ±1, both in the training split.
fn abs_dataset(dir: &Path) -> String {
    let p = path(dir, "abs.jsonl");
    let sample = |id: usize, b: f64| {
        format!(
            r#"{{"id":{id},"seed":0,"alpha":1,"formulation":"dc","pd":[{b}],"qd":null,"z":1,"y":[{b}],"status":"optimal","split":"train"}}"#
        )
    };
    let header = r#"{"schema_version":1,"case":"abs","config_hash":"none"}"#;
    fs::write(&p, format!("{header}\n{}\n{}\n", sample(0, -1.0), sample(1, 1.0))).unwrap();
    p
}

#[test]
fn certify_on_the_absolute_value() {
    let dir = tempfile::tempdir().unwrap();
    let d = abs_dataset(dir.path());
    let model = path(dir.path(), "abs.json");
    fs::write(&model, abs_model().save()).unwrap();

    let exact = path(dir.path(), "exact.json");
    ok(&["certify", "--model", &model, "--dataset", &d, "--theorem", "1", "--exact-1d", "--out", &exact]);
    let cert: serde_json::Value = serde_json::from_str(&fs::read_to_string(&exact).unwrap()).unwrap();
    assert_eq!(cert["kind"], "theorem1-exact1d");
    assert_eq!(cert["bound"], 1.0);

    let closed = path(dir.path(), "closed.json");
    let text = ok(&["certify", "--model", &model, "--dataset", &d, "--theorem", "2", "--out", &closed]);
    assert!(!text.contains("NOT BINDING"));
    let cert: serde_json::Value = serde_json::from_str(&fs::read_to_string(&closed).unwrap()).unwrap();
    assert_eq!(cert["bound"], 2.0);
    assert_eq!(cert["binding"], true);

    // a shifted model no longer fits the data values
    let mut off = abs_model();
    off.output.d = 0.5;
    fs::write(&model, off.save()).unwrap();
    let out = run(&["certify", "--model", &model, "--dataset", &d, "--theorem", "2", "--out", &closed]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("NOT BINDING"));

    assert_eq!(code(&["certify", "--model", &model, "--dataset", &d, "--theorem", "2", "--exact-1d", "--out", &closed]), 64);
    let empty = path(dir.path(), "valid-only.jsonl");
    fs::write(&empty, fs::read_to_string(&d).unwrap().replace("\"train\"", "\"valid\"")).unwrap();
    assert_eq!(code(&["certify", "--model", &model, "--dataset", &empty, "--theorem", "2", "--out", &closed]), 3);
}

#[test]
fn export_formulations() {
    let dir = tempfile::tempdir().unwrap();
    let dc = path(dir.path(), "dc.json");
    ok(&["export-formulation", "--case", &data("toy2.m"), "--kind", "dc", "--out", &dc]);
    let f: serde_json::Value = serde_json::from_str(&fs::read_to_string(&dc).unwrap()).unwrap();
    assert_eq!(f["formulation"], "dc");
    assert!(f["objective"].is_object());

    let soc = path(dir.path(), "soc.json");
    ok(&["export-formulation", "--case", &data("case14.m"), "--kind", "soc", "--out", &soc]);
    let text = fs::read_to_string(&soc).unwrap();
    let f = icnn_opf::opf::import_formulation(&text).unwrap();
    assert_eq!(f.count_kind("jabr"), 20);

    let loads = path(dir.path(), "loads.json");
    fs::write(&loads, r#"{"pd": [0.0, 0.5]}"#).unwrap();
    let ac = path(dir.path(), "ac.json");
    ok(&["export-formulation", "--case", &data("toy2.m"), "--kind", "ac", "--loads", &loads, "--out", &ac]);
    assert_eq!(manifest(&ac)["inputs"].as_array().unwrap().len(), 2);
    fs::write(&loads, r#"{"pd": [0.5]}"#).unwrap();
    assert_eq!(code(&["export-formulation", "--case", &data("toy2.m"), "--kind", "dc", "--loads", &loads, "--out", &ac]), 2);
}
