use serde_json::Value;
use symwalk::cli::{run, EXIT_CAP, EXIT_OK, EXIT_USAGE, EXIT_VERIFY};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("symwalk").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

#[test]
fn spectrum_csv_lists_three_lines_at_2_2() {
    let (code, out, _) = call(&["spectrum", "--n", "2", "--q", "2"]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "lambda,phi,multiplicity,type_count");
    assert_eq!(lines.len(), 4);
    let phis: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.rsplit(',').nth(2).unwrap())
        .collect();
    assert_eq!(phis, ["1", "1/15", "-1/3"]);
}

#[test]
fn spectrum_at_n_1_is_the_trivial_line() {
    let (code, out, _) = call(&["spectrum", "--n", "1", "--q", "3", "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(v.to_string().contains("\"1\""));
}

#[test]
fn field_can_be_given_as_p_and_k() {
    let (a, out_a, _) = call(&["spectrum", "--n", "2", "--q", "4"]);
    let (b, out_b, _) = call(&["spectrum", "--n", "2", "--p", "2", "--k", "2"]);
    assert_eq!((a, b), (EXIT_OK, EXIT_OK));
    assert_eq!(out_a, out_b);
}

#[test]
fn bounds_with_exact_fills_every_column() {
    let (code, out, _) = call(&[
        "bounds",
        "--n",
        "2",
        "--q",
        "2",
        "--k-range",
        "1..3",
        "--with-exact",
    ]);
    assert_eq!(code, EXIT_OK);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("1,13/28,"));
    assert!(rows[1].starts_with("2,19/140,"));
}

#[test]
fn bounds_switch_to_log_float_above_the_exact_limit() {
    let (code, out, _) = call(&["bounds", "--n", "12", "--q", "2", "--k-range", "12..13"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.lines().skip(1).all(|l| l.ends_with(",logfloat")));
}

#[test]
fn chain_csv_starts_at_the_twisted_form() {
    let (code, out, _) = call(&["chain", "--n", "2", "--q", "2", "--kmax", "2"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "k,tv,stderr\n0,27/28,\n1,13/28,\n2,19/140,\n");
}

#[test]
fn simulate_is_reproducible_from_the_seed() {
    let args = [
        "simulate", "--n", "2", "--q", "3", "--steps", "2", "--trials", "3000", "--seed", "9",
    ];
    let (c1, a, _) = call(&args);
    let (c2, b, _) = call(&args);
    assert_eq!((c1, c2), (EXIT_OK, EXIT_OK));
    assert_eq!(a, b);
    let seq: Vec<&str> = args
        .iter()
        .copied()
        .chain(["--exec", "sequential"])
        .collect();
    assert_eq!(call(&seq).1, a);
}

#[test]
fn group_walk_runs() {
    let (code, out, _) = call(&[
        "simulate", "--n", "2", "--q", "2", "--steps", "1", "--trials", "500", "--walk", "group",
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 3);
}

#[test]
fn out_writes_to_a_file() {
    let dir = std::env::temp_dir().join(format!("symwalk-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("spectrum.json");
    let p = path.to_str().unwrap();
    let (code, out, _) = call(&[
        "spectrum", "--n", "2", "--q", "3", "--format", "json", "--out", p,
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["q"], 3);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn verify_passes_and_fault_injection_fails() {
    let (code, out, _) = call(&["verify", "--suite", "combinat", "--max-n", "3"]);
    assert_eq!(code, EXIT_OK, "{out}");
    let (code, out, _) = call(&[
        "verify",
        "--suite",
        "combinat",
        "--max-n",
        "3",
        "--inject-fault",
    ]);
    assert_eq!(code, EXIT_VERIFY);
    assert!(out.contains("non-integral"));
}

#[test]
fn usage_errors_exit_with_one() {
    for args in [
        &["spectrum", "--q", "6"][..],
        &["spectrum", "--q", "2", "--p", "3"],
        &["bounds", "--n", "2", "--k-range", "5..2"],
        &["bounds", "--n", "1"],
        &["simulate", "--trials", "0"],
        &["verify", "--suite", "nonsense"],
        &["frobnicate"],
    ] {
        let (code, _, err) = call(args);
        assert_eq!(code, EXIT_USAGE, "{args:?}: {err}");
        assert!(!err.is_empty());
    }
}

#[test]
fn resource_caps_exit_with_three() {
    let (code, _, err) = call(&["chain", "--n", "4", "--q", "3"]);
    assert_eq!(code, EXIT_CAP);
    assert!(err.contains("state space"));
    let (code, _, _) = call(&["spectrum", "--n", "20"]);
    assert_eq!(code, EXIT_CAP);
    let (code, _, _) = call(&["chain", "--n", "2", "--q", "3", "--state-cap", "100"]);
    assert_eq!(code, EXIT_CAP);
}

#[test]
fn help_goes_to_stdout_with_success() {
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("spectrum"));
}

#[test]
fn upper_bound_column_is_monotone_at_n_12() {
    let (code, out, _) = call(&["bounds", "--n", "12", "--q", "2", "--k-range", "12..22"]);
    assert_eq!(code, EXIT_OK);
    let upper: Vec<f64> = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(upper.len(), 11);
    assert!(upper.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn spectrum_json_at_n_3() {
    let (code, out, _) = call(&["spectrum", "--n", "3", "--q", "2", "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    let lines = v["lines"].as_array().unwrap();
    let total: u64 = lines
        .iter()
        .map(|l| {
            l["multiplicity"].as_str().unwrap().parse::<u64>().unwrap()
                * l["type_count"].as_str().unwrap().parse::<u64>().unwrap()
        })
        .sum();
    // |GL_6(F_2)| / |Sp_6(F_2)|
    assert_eq!(total, 20_158_709_760 / 1_451_520);
    assert!(lines.iter().all(|l| l["phi"].is_string()));
}
