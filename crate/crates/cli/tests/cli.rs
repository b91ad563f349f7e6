use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use finegrain::instances::{deserialize, validate, Instance};
use finegrain::ledger::parse_ledger;

fn fg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finegrain")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "ledger.jsonl")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn generated_3sum_parses() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(code(&fg(t.path(), &["gen", "3sum", "n=8", "seed=1", "--out", "a.json"])), 0);
    let (inst, prov) = deserialize(&fs::read_to_string(t.path().join("a.json")).unwrap()).unwrap();
    assert!(matches!(inst, Instance::ThreeSum(_)));
    assert_eq!(prov.seed, Some(1));
}

#[test]
fn generated_light_trico_validates() {
    let t = tempfile::tempdir().unwrap();
    let o = fg(t.path(), &["gen", "trico", "light", "p=2", "--seed", "4"]);
    assert_eq!(code(&o), 0);
    let (inst, _) = deserialize(&stdout(&o)).unwrap();
    validate(&inst).unwrap();
    assert!(matches!(inst, Instance::TriCo(_)));
}

#[test]
fn bad_kind_is_a_usage_error() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(code(&fg(t.path(), &["gen", "nope", "n=3"])), 2);
    assert_eq!(code(&fg(t.path(), &["gen", "3sum", "n=lots"])), 2);
    assert_eq!(code(&fg(t.path(), &["verify", "no-such-pipeline", "--seed", "1"])), 2);
    assert_eq!(code(&fg(t.path(), &["frobnicate"])), 2);
}

#[test]
fn reduce_writes_targets_decode_and_ledger() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    assert_eq!(code(&fg(d, &["gen", "minplus", "n=8", "d=8", "--seed", "2", "--out", "mp.json"])), 0);
    assert_eq!(code(&fg(d, &["reduce", "apsp-sparse", "mp.json", "--out", "x"])), 2, "seed is mandatory");
    assert_eq!(code(&fg(d, &["reduce", "apsp-sparse", "mp.json", "--seed", "9", "--d", "2", "--out", "x"])), 0);
    let out = files(&d.join("x"));
    let targets: Vec<_> = out.iter().filter(|(n, _)| n.starts_with("target-")).collect();
    assert!(!targets.is_empty());
    for (_, bytes) in &targets {
        let (g, prov) = deserialize(std::str::from_utf8(bytes).unwrap()).unwrap();
        validate(&g).unwrap();
        assert_eq!(prov.pipeline.as_deref(), Some("apsp-sparse"));
    }
    let decode: serde_json::Value = serde_json::from_slice(&out.iter().find(|(n, _)| n == "decode.json").unwrap().1).unwrap();
    assert_eq!(decode["targets"].as_array().unwrap().len(), targets.len());
    assert_eq!(decode["answer"]["values"].as_array().unwrap().len(), 8);
    let rows = parse_ledger(&fs::read_to_string(d.join("x/ledger.jsonl")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].instances as usize, targets.len());
    assert!(rows[0].comparisons > 0 && rows[0].violations().is_empty());
}

#[test]
fn repeated_reduce_is_byte_identical() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    for (kind, pipeline, extra) in [("minplus", "apsp-sparse", "d=8"), ("3sum", "3sum-sparse", "n=9"), ("ov", "ov-trico", "f=4")] {
        assert_eq!(code(&fg(d, &["gen", kind, "n=8", extra, "--seed", "3", "--out", "src.json"])), 0);
        for out in ["one", "two"] {
            assert_eq!(code(&fg(d, &["reduce", pipeline, "src.json", "--seed", "5", "--out", out])), 0, "{pipeline}");
        }
        assert_eq!(files(&d.join("one")), files(&d.join("two")), "{pipeline}");
        let a = fs::read_to_string(d.join("one/ledger.jsonl")).unwrap();
        let b = fs::read_to_string(d.join("two/ledger.jsonl")).unwrap();
        assert_eq!(a, b);
        fs::remove_dir_all(d.join("one")).unwrap();
        fs::remove_dir_all(d.join("two")).unwrap();
    }
}

#[test]
fn too_many_colors_exits_with_usage_error() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    assert_eq!(code(&fg(d, &["gen", "mono", "n=4", "colors=12", "--seed", "1", "--out", "m.json"])), 0);
    let o = fg(d, &["reduce", "mono-intexact", "m.json", "--limit", "16", "--out", "x"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colors exceed"));
    assert_eq!(code(&fg(d, &["reduce", "mono-intexact", "m.json", "--out", "y"])), 0);
}

#[test]
fn verify_passes_on_apsp() {
    let t = tempfile::tempdir().unwrap();
    let o = fg(t.path(), &["verify", "apsp-sparse", "--n", "16", "--d", "4", "--trials", "20", "--seed", "1"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("20/20 trials agree"));
}

#[test]
fn verify_with_fixed_input_and_overrides() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    assert_eq!(code(&fg(d, &["gen", "exacttri", "n=6", "--seed", "8", "--out", "e.json"])), 0);
    let o = fg(d, &["verify", "exacttri-count", "--input", "e.json", "--trials", "4", "--seed", "2", "--jobs", "2"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let o = fg(d, &["verify", "cbmm-strings", "f=3", "--n", "8", "--trials", "3"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn injected_fault_fails_with_a_counterexample() {
    let t = tempfile::tempdir().unwrap();
    let o = fg(t.path(), &["verify", "ov-cbmm", "--n", "16", "--trials", "3", "--seed", "4", "--inject-fault"]);
    assert_eq!(code(&o), 1);
    let text = stdout(&o);
    let at = text.find("smallest failing instance").unwrap();
    let json = &text[text[at..].find('\n').unwrap() + at + 1..];
    let (small, _) = deserialize(json).unwrap();
    let Instance::Ov(ov) = small else { panic!("not an OV instance") };
    assert!(ov.vectors.len() < 16);
}

#[test]
fn zero_trials_pass_vacuously_with_a_warning() {
    let t = tempfile::tempdir().unwrap();
    let o = fg(t.path(), &["verify", "trico-light", "--trials", "0"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn account_groups_rows_and_flags_overruns() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    assert_eq!(code(&fg(d, &["gen", "minplus", "n=8", "d=8", "--seed", "2", "--out", "mp.json"])), 0);
    assert_eq!(code(&fg(d, &["gen", "trico", "light", "p=2", "--out", "t.json"])), 0);
    assert_eq!(code(&fg(d, &["reduce", "apsp-sparse", "mp.json", "--seed", "1", "--out", "x"])), 0);
    assert_eq!(code(&fg(d, &["reduce", "light-star2", "t.json", "--out", "x"])), 0);
    let o = fg(d, &["account", "x/ledger.jsonl"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("== apsp-sparse (1 runs)") && text.contains("== light-star2 (1 runs)"));
    assert!(text.contains("2*d") && text.contains("p^3"));
    assert!(!text.contains("OVER"));

    let mut row = parse_ledger(&fs::read_to_string(d.join("x/ledger.jsonl")).unwrap()).unwrap().remove(0);
    row.checks[0].measured = row.checks[0].bound + 1;
    fs::write(d.join("bad.jsonl"), row.to_line() + "\n").unwrap();
    let text = stdout(&fg(d, &["account", "bad.jsonl"]));
    assert!(text.contains("OVER") && text.contains("1 checks exceed"));
}

#[test]
fn empty_or_absent_ledger_is_missing() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("empty.jsonl"), "\n").unwrap();
    for f in ["empty.jsonl", "absent.jsonl"] {
        let o = fg(t.path(), &["account", f]);
        assert_eq!(code(&o), 2);
        assert!(String::from_utf8_lossy(&o.stderr).contains("MissingLedger"));
    }
}
