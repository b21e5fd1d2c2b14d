use num_complex::Complex64;
use qconv::analytic::certify_bounds;
use qconv::lattice::{LatticeFunction, Parity, Table};
use qconv::moments::moment_sequence;
use qconv::qcore::QContext;
use qconv::special::{SpecialFunction, SpecialKind};

fn ctx() -> QContext {
    QContext::new(0.5).unwrap()
}

#[test]
fn table_csv_round_trip_is_exact() {
    let c = ctx();
    let f = SpecialFunction::new(SpecialKind::Gm(1), &c).on_lattice(1.0).unwrap();
    let t = Table::sample(&f, 1.0, -6, 20, &c).unwrap();
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("epsilon,k,re,im\n"));
    let first = text.lines().nth(1).unwrap();
    let re = first.split(',').nth(2).unwrap();
    let mantissa = re.split('e').next().unwrap().replace(['-', '.'], "");
    assert!(mantissa.len() >= 17, "{re}");
    let back = Table::read_csv(buf.as_slice(), 1.0).unwrap();
    assert_eq!(back, t);
}

#[test]
fn table_csv_rejects_malformed_input() {
    let bad = [
        "e,k,re,im\n1,0,1,0\n-1,0,1,0\n",
        "epsilon,k,re,im\n2,0,1,0\n",
        "epsilon,k,re,im\n1,0,1,0\n",
        "epsilon,k,re,im\n1,0,1,0\n-1,0,1,0\n1,0,2,0\n",
        "epsilon,k,re,im\n1,0,x,0\n-1,0,1,0\n",
        "epsilon,k,re,im\n",
    ];
    for s in bad {
        let e = Table::read_csv(s.as_bytes(), 1.0).unwrap_err();
        assert_eq!(e.name(), "ParseError", "{s:?}");
    }
}

#[test]
fn table_function_matches_rule_on_window() {
    let c = ctx();
    let f = SpecialFunction::new(SpecialKind::GaussSmall, &c).on_lattice(1.0).unwrap();
    let short = LatticeFunction::table("short", Table::sample(&f, 1.0, -10, 40, &c).unwrap(), Parity::Even);
    // q^40 is not yet below the tail tolerance: the sum needs rows the table lacks
    let e = moment_sequence(&short, 0, 1.0, &c).unwrap_err();
    assert_eq!(e.name(), "WindowExceeded");
    let t = Table::sample(&f, 1.0, -20, 80, &c).unwrap();
    let g = LatticeFunction::table("gauss table", t, Parity::Even);
    let a = moment_sequence(&f, 6, 1.0, &c).unwrap();
    let b = moment_sequence(&g, 6, 1.0, &c).unwrap();
    for e in 0..=6 {
        let (x, y) = (a.mu(e).unwrap(), b.mu(e).unwrap());
        assert!((x - y).norm() <= 1e-12 * a.nu(e).unwrap(), "e={e}: {x} vs {y}");
    }
}

#[test]
fn moment_sequence_json_shape() {
    let c = ctx();
    let f = SpecialFunction::new(SpecialKind::GaussSmall, &c).on_lattice(1.0).unwrap();
    let j = moment_sequence(&f, 12, 1.0, &c).unwrap().to_json();
    assert_eq!(j["gamma"], 1.0);
    assert_eq!(j["q"], 0.5);
    let entries = j["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 13);
    for (i, en) in entries.iter().enumerate() {
        let keys: Vec<&str> = en.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        for k in ["e", "mu_re", "mu_im", "nu", "log_abs_mu", "status"] {
            assert!(keys.contains(&k), "{k} missing");
        }
        assert_eq!(en["e"], i);
        assert_eq!(en["status"], "CONVERGED");
    }
    // odd moments of an even function vanish exactly
    assert_eq!(entries[1]["mu_re"], 0.0);
    assert!(entries[1]["log_abs_mu"].is_null());
}

#[test]
fn certificate_json_shape() {
    let c = ctx();
    let t = Table::new(1.0, 0, vec![Complex64::new(1.0, 0.0); 30], vec![Complex64::new(1.0, 0.0); 30]).unwrap();
    let g = LatticeFunction::table("one", t, Parity::Even);
    let j = certify_bounds(&g, 2.0, 2.0, 4, &c).unwrap().to_json();
    let mut keys: Vec<&str> = j.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    keys.sort();
    assert_eq!(keys, ["C", "epsilon_agreement", "holds", "k_max", "r", "worst_ratio"]);
    assert_eq!(j["holds"], true);
}
