use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ubnin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ubnin"))
        .args(args)
        .current_dir(dir)
        .env_remove("UBNIN_SEED")
        .output()
        .expect("run ubnin")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const PATH5: &str = "a,b,c,d,e\n0,1,0,0,0\n1,0,1,0,0\n0,1,0,1,0\n0,0,1,0,1\n0,0,0,1,0\n";

#[test]
fn encode_then_decode_reproduces_the_matrix() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.csv"), PATH5).unwrap();
    let enc = ubnin(&["encode", "m.csv"], dir.path());
    assert_eq!(enc.status.code(), Some(0), "{}", stderr(&enc));
    let record = stdout(&enc);
    assert!(record.contains("\"decimal\":\"8.578125\""), "{record}");
    fs::write(dir.path().join("code.json"), &record).unwrap();

    let dec = ubnin(&["decode", "code.json"], dir.path());
    assert_eq!(dec.status.code(), Some(0), "{}", stderr(&dec));
    assert_eq!(stdout(&dec), PATH5);

    let lit = ubnin(&["decode", "8.578125", "--nodes", "5", "--output", "out.csv"], dir.path());
    assert_eq!(lit.status.code(), Some(0), "{}", stderr(&lit));
    assert_eq!(fs::read_to_string(dir.path().join("out.csv")).unwrap(), PATH5.replace("a,b,c,d,e", "1,2,3,4,5"));
}

#[test]
fn decode_rejects_codes_outside_the_node_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let o = ubnin(&["decode", "511.999999999985448084771633148193359375", "--nodes", "9"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("scale"), "{}", stderr(&o));
    let o = ubnin(&["decode", "8.578125"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn asymmetric_matrix_names_the_cell() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.csv"), "a,b,c\n0,1,0\n0,0,1\n0,1,0\n").unwrap();
    let o = ubnin(&["encode", "m.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("(1, 2)"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ubnin(&["encode", "--bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(ubnin(&["--help"], dir.path()).status.code(), Some(0));
}

fn subjects_csv(rows: usize, ages: impl Fn(usize) -> u32) -> String {
    let regions = 6;
    let mut text = String::from("id,age,gender,group");
    for r in 1..=regions {
        text.push_str(&format!(",R{r}"));
    }
    text.push('\n');
    for k in 0..rows {
        text.push_str(&format!("s{k},{},F,PD", ages(k)));
        for r in 0..regions {
            // Deterministic, non-collinear pseudo-volumes.
            let v = 3.0 + ((k * 7 + r * 13 + k * r * 5) % 17) as f64 / 10.0;
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    text
}

#[test]
fn fingerprint_writes_a_registry() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.csv"), subjects_csv(8, |_| 50)).unwrap();
    let o = ubnin(&["fingerprint", "--input", "s.csv", "--out-dir", "res"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("res/registry.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("res/registry.json")).unwrap()).unwrap();
    assert_eq!(json["records"].as_array().unwrap().len(), 8);
    assert_eq!(json["config"]["threshold"], "consistency:0.3:per-subject");
}

#[test]
fn cohort_exit_codes_follow_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.csv"), subjects_csv(5, |k| 30 + 10 * k as u32)).unwrap();
    let o = ubnin(&["cohort", "--input", "s.csv", "--out-dir", "res"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("skipped"));

    // Identical volumes in one region make its correlations undefined.
    let flat: String = subjects_csv(6, |_| 30)
        .lines()
        .enumerate()
        .map(|(k, l)| if k == 0 { format!("{l}\n") } else { format!("{},1.0\n", l.rsplit_once(',').unwrap().0) })
        .collect();
    fs::write(dir.path().join("flat.csv"), flat).unwrap();
    let o = ubnin(
        &["cohort", "--input", "flat.csv", "--out-dir", "res2", "--iterations", "10", "--n-rand", "2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("degenerate"));
}

#[test]
fn environment_overrides_flags_defaults() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.csv"), subjects_csv(8, |_| 50)).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ubnin"))
        .args(["fingerprint", "--input", "s.csv"])
        .current_dir(dir.path())
        .env("UBNIN_OUT_DIR", "from-env")
        .env("UBNIN_THRESHOLD", "sparsity:0.5")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json = fs::read_to_string(dir.path().join("from-env/registry.json")).unwrap();
    assert!(json.contains("sparsity:0.5"));
}
