use serde_json::{json, Value};
use std::process::{Command, Output};

fn qconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qconv")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn schema() -> Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/schema/qconv-output.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Valid against the shipped schema as a whole, and against the named shape.
fn assert_schema(v: &Value, def: &str) {
    let full = schema();
    let whole = jsonschema::validator_for(&full).unwrap();
    let errs: Vec<String> = whole.iter_errors(v).map(|e| e.to_string()).collect();
    assert!(errs.is_empty(), "{def}: {errs:?}\n{v:#}");
    let mut one = full.clone();
    one.as_object_mut().unwrap().remove("oneOf");
    one["$ref"] = json!(format!("#/$defs/{def}"));
    let part = jsonschema::validator_for(&one).unwrap();
    assert!(part.is_valid(v), "not a {def} document");
}

#[test]
fn eval_examples() {
    let o = qconv(&["eval", "--q", "0.5", "--fn", "Eq", "--x", "0"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "1.0000000000000000e0 0.0000000000000000e0");

    // e_{q^2}(-1) = 1/(-1;q^2)_inf, 30-digit reference product
    let o = qconv(&["eval", "--q", "0.5", "--fn", "gauss_e", "--x", "1"]);
    let re: f64 = String::from_utf8_lossy(&o.stdout).split_whitespace().next().unwrap().parse().unwrap();
    let want = 0.368756127076900562750845672281;
    assert!((re - want).abs() < 1e-13 * want, "{re}");

    let o = qconv(&["eval", "--fn", "hermite2", "--k", "4", "--x", "i"]);
    let line = String::from_utf8_lossy(&o.stdout).to_string();
    let v: Vec<f64> = line.split_whitespace().map(|s| s.parse().unwrap()).collect();
    assert!((v[0] - 64.0).abs() < 1e-12 && v[1].abs() < 1e-12, "{line}");
    // 17 significant digits
    assert_eq!(line.split_whitespace().next().unwrap().split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
}

#[test]
fn eval_json_and_lattice_only_functions() {
    let o = qconv(&["eval", "--fn", "alt", "--x", "0.25,-4", "--json"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_schema(&v, "eval");
    assert_eq!(v["values"].as_array().unwrap().len(), 2);

    let o = qconv(&["eval", "--fn", "alt", "--x", "0.3"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("DomainError"));
}

#[test]
fn bad_input_exits_2() {
    for args in [
        &["eval", "--q", "1.5", "--fn", "Eq", "--x", "0"][..],
        &["eval", "--fn", "nope", "--x", "0"],
        &["eval", "--fn", "Eq", "--x", "abc"],
        &["eval", "--fn", "strip:-1", "--x", "0"],
        &["moments", "--gamma", "-1", "--fn", "gauss_e"],
        &["moments"],
        &["moments", "--fn", "gauss_e", "--table", "/nonexistent.csv"],
        &["verify", "--only", "[", "--q", "0.5"],
        &["frobnicate"],
    ] {
        let o = qconv(args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn numeric_failure_exits_3() {
    // the bilateral-sum function has every derivative bound fail; the
    // convolution series on it diverges
    let o = qconv(&["convolve", "--f", "gauss_e", "--g", "alt", "--x", "1"]);
    assert_eq!(code(&o), 3);
    let v = stdout_json(&o);
    assert_schema(&v, "convolve");
    assert_eq!(v["results"][0]["status"], "DIVERGENT");

    let o = qconv(&["moments", "--fn", "gauss_e", "--max-terms", "5", "--E", "2"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn moments_match_closed_form() {
    let o = qconv(&["moments", "--fn", "gauss_e", "--E", "12"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_schema(&v, "moments");
    let cq = v["entries"][0]["mu_re"].as_f64().unwrap();
    let q: f64 = 0.5;
    for k in 0..=6usize {
        let poch: f64 = (0..k).map(|j| 1.0 - q * q.powi(2 * j as i32)).product();
        let want = cq * poch * q.powi((k * k + k) as i32);
        let got = v["entries"][2 * k]["mu_re"].as_f64().unwrap();
        assert!((got - want).abs() <= 1e-9 * want, "k={k}: {got} vs {want}");
    }
}

#[test]
fn classify_and_certify() {
    let o = qconv(&["classify", "--fn", "gauss_E", "--gamma", "1", "--strict", "--decay"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_schema(&v, "classify");
    assert!((v["classification"]["alpha_hat"].as_f64().unwrap() - 1.0).abs() < 0.05);

    let o = qconv(&["classify", "--fn", "alt", "--certify", "--r", "2", "--C", "10"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_schema(&v, "certificate");
    assert_eq!(v["holds"], false);
}

#[test]
fn convolve_example() {
    let o = qconv(&["convolve", "--f", "gm:0", "--g", "gauss_e", "--x", "1"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_schema(&v, "convolve");
    assert!(v["results"][0]["re"].as_f64().unwrap().abs() < 1e-10);
}

#[test]
fn fourier_forms_agree() {
    let o = qconv(&["fourier", "--fn", "gauss_e", "--y", "1,-0.5,0.5i"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_schema(&v, "fourier");
    let r = v["results"].as_array().unwrap();
    assert_eq!(r.len(), 6);
    for pair in r.chunks(2) {
        let (a, b) = (pair[0]["re"].as_f64().unwrap(), pair[1]["re"].as_f64().unwrap());
        assert!((a - b).abs() < 1e-8 * a.abs().max(1.0));
    }
}

#[test]
fn csv_table_round_trip() {
    let o = qconv(&["eval", "--fn", "gauss_e", "--sample", "-20:80"]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.starts_with(b"epsilon,k,re,im\n"));
    let path = std::env::temp_dir().join(format!("qconv-cli-test-{}.csv", std::process::id()));
    std::fs::write(&path, &o.stdout).unwrap();
    let p = path.to_str().unwrap();
    let from_table = stdout_json(&qconv(&["moments", "--table", p, "--E", "6"]));
    let from_rule = stdout_json(&qconv(&["moments", "--fn", "gauss_e", "--E", "6"]));
    for e in 0..=6 {
        let (a, b) = (from_table["entries"][e]["mu_re"].as_f64().unwrap(), from_rule["entries"][e]["mu_re"].as_f64().unwrap());
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "e={e}");
    }
    let o = qconv(&["eval", "--table", p, "--x", "0.5"]);
    assert_eq!(code(&o), 0);
    let o = qconv(&["moments", "--fn", "gauss_e", "--table", p]);
    assert_eq!(code(&o), 2);
    std::fs::remove_file(path).ok();
}

#[test]
fn human_tables() {
    let o = qconv(&["moments", "--fn", "gauss_e", "--E", "3", "--table"]);
    assert_eq!(code(&o), 0);
    let s = String::from_utf8_lossy(&o.stdout);
    assert!(s.starts_with("   e"), "{s}");
    assert_eq!(s.lines().count(), 5);
}

#[test]
fn verify_subset_passes_and_is_deterministic() {
    let args = ["verify", "--only", "hermite", "--q", "0.7", "--gamma", "0.5"];
    let a = qconv(&args);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let b = qconv(&args);
    let (va, vb) = (stdout_json(&a), stdout_json(&b));
    assert_schema(&va, "verify");
    assert_eq!(va["report"], vb["report"]);
    assert_eq!(serde_json::to_string(&va["report"]).unwrap(), serde_json::to_string(&vb["report"]).unwrap());
    let table = String::from_utf8_lossy(&a.stderr);
    assert!(table.contains("PASS  hermite.value-at-i"));
    assert!(table.contains("SKIP  constants.bq"));
}

#[test]
fn verify_full_suite_reports_every_check() {
    let o = qconv(&["verify"]);
    // three identities fail for mathematical reasons, so the suite exits 1
    assert_eq!(code(&o), 1);
    let v = stdout_json(&o);
    assert_schema(&v, "verify");
    let checks = v["report"]["checks"].as_array().unwrap();
    assert!(checks.len() >= 20);
    assert_eq!(v["report"]["status"], "FAIL");
    let failed: Vec<&str> = checks.iter().filter(|c| c["status"] == "FAIL").map(|c| c["id"].as_str().unwrap()).collect();
    assert_eq!(failed, ["moments.gauss-big", "commut.strip", "alt.right-positive"]);
    let mut criteria: Vec<u64> = checks.iter().filter_map(|c| c["criterion"].as_u64()).collect();
    criteria.dedup();
    assert_eq!(criteria, (1..=15).collect::<Vec<u64>>(), "report order follows the criteria");
    for c in checks {
        let anchor = c["anchor"].as_str().unwrap().to_lowercase();
        assert!(!anchor.contains("eq.") && !anchor.contains("paper") && !anchor.contains("theorem"), "{anchor}");
    }
}
