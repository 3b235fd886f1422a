//! End-to-end tests for the model schema and the binary.

use std::io::Write;
use std::process::Command;

use nalgebra::DMatrix;
use tempfile::NamedTempFile;

use entlab::GibbsModel;
use entlab_cli::parse_model_str;

fn write_model(text: &str) -> NamedTempFile {
    let mut file = NamedTempFile::new().unwrap();
    file.write_all(text.as_bytes()).unwrap();
    file.flush().unwrap();
    file
}

fn run(args: &[&str]) -> (i32, String, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_entlab"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stdout).into_owned(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

const MINIMAL: &str = "
[[sites]]
size = 2

[[sites]]
size = 2
";

#[test]
fn minimal_file_builds_a_product_measure() {
    let parsed = parse_model_str(MINIMAL).unwrap();
    assert!(parsed.model.is_product());
    let mu = parsed.model.build_measure().unwrap();
    for &w in mu.weights() {
        assert!((w - 0.25).abs() < 1e-15);
    }
}

#[test]
fn named_kernel_matches_programmatic_builder() {
    // 6-cycle ferromagnet at beta = 0.02 through the file format
    let mut text = String::from("beta = 0.02\n");
    for _ in 0..6 {
        text.push_str("[[sites]]\nsize = 2\n");
    }
    for a in 0..6usize {
        let b = (a + 1) % 6;
        let (i, j) = (a.min(b), a.max(b));
        text.push_str(&format!(
            "[[couplings]]\ni = {i}\nj = {j}\nJ = 1.0\nkernel = \"product\"\n"
        ));
    }
    let parsed = parse_model_str(&text).unwrap();

    let mut j = DMatrix::<f64>::zeros(6, 6);
    for a in 0..6 {
        let b = (a + 1) % 6;
        j[(a, b)] = 1.0;
        j[(b, a)] = 1.0;
    }
    let programmatic = GibbsModel::ising(&j, 0.02, &[]).unwrap();

    let mu_file = parsed.model.build_measure().unwrap();
    let mu_prog = programmatic.build_measure().unwrap();
    for (a, b) in mu_file.weights().iter().zip(mu_prog.weights()) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn scalar_fields_follow_the_spin_convention() {
    // top-level keys precede the site tables, as TOML requires
    let text = "
fields = [0.3, -0.1]

[[sites]]
size = 2

[[sites]]
size = 2
";
    let parsed = parse_model_str(text).unwrap();
    let mut j = DMatrix::<f64>::zeros(2, 2);
    j.fill(0.0);
    let programmatic = GibbsModel::ising(&j, 0.0, &[0.3, -0.1]).unwrap();
    let a = parsed.model.build_measure().unwrap();
    let b = programmatic.build_measure().unwrap();
    for (x, y) in a.weights().iter().zip(b.weights()) {
        assert!((x - y).abs() < 1e-15);
    }
}

#[test]
fn asymmetric_couplings_are_rejected_with_the_field_named() {
    let text = "
[[sites]]
size = 2

[[sites]]
size = 2

[[couplings]]
i = 0
j = 1
J = 1.0
kernel = \"product\"

[[couplings]]
i = 1
j = 0
J = 2.0
kernel = \"product\"
";
    let err = parse_model_str(text).unwrap_err().to_string();
    assert!(err.contains("asymmetric"), "got: {err}");
}

#[test]
fn unknown_keys_are_named() {
    let err = parse_model_str("[[sites]]\nsize = 2\nbogus = 1\n")
        .unwrap_err()
        .to_string();
    assert!(err.contains("bogus"), "got: {err}");
}

#[test]
fn product_kernel_needs_binary_sites() {
    let text = "
[[sites]]
size = 3

[[sites]]
size = 2

[[couplings]]
i = 0
j = 1
J = 1.0
kernel = \"product\"
";
    let err = parse_model_str(text).unwrap_err().to_string();
    assert!(err.contains("binary"), "got: {err}");
}

#[test]
fn birth_death_sites_parse_with_metadata() {
    let text = "
beta = 0.04

[[sites]]
poisson = 1.0
n_max = 30

[[sites]]
poisson = 1.0
n_max = 30

[[couplings]]
i = 0
j = 1
J = 1.0
kernel = \"equality\"
";
    let parsed = parse_model_str(text).unwrap();
    assert!((parsed.model.max_c0().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(parsed.model.space().site_size(0), 31);
}

#[test]
fn covers_parse_and_validate() {
    let text = "
[[sites]]
size = 2

[[sites]]
size = 2

[[sites]]
size = 2

[covers]
pairs = [[0, 1], [1, 2], [0, 2]]
";
    let parsed = parse_model_str(text).unwrap();
    assert_eq!(parsed.covers["pairs"].n_minus(), 2);
    let bad = "
[[sites]]
size = 2

[covers]
empty = [[]]
";
    assert!(parse_model_str(bad).is_err());
}

#[test]
fn check_command_passes_tensorization_on_products() {
    let file = write_model(MINIMAL);
    let (code, stdout, _) = run(&[
        "check",
        "--model",
        file.path().to_str().unwrap(),
        "--kind",
        "at",
        "--C",
        "1",
        "--budget",
        "20",
    ]);
    assert_eq!(code, 0, "stdout: {stdout}");
    assert!(stdout.starts_with("tag,kind,trial,"));
    assert_eq!(stdout.lines().count(), 21);
}

#[test]
fn check_command_fails_below_the_optimal_constant() {
    let file = write_model(MINIMAL);
    let (code, _, stderr) = run(&[
        "check",
        "--model",
        file.path().to_str().unwrap(),
        "--kind",
        "at",
        "--C",
        "0.5",
        "--budget",
        "20",
    ]);
    assert_eq!(code, 1, "stderr: {stderr}");
}

#[test]
fn constant_command_reports_absence_reason() {
    // mean-field N = 4 at a temperature past the interaction-strength
    // threshold: q >= 2/3 so only the other two constants remain
    let mut text = String::from("beta = 0.4\n");
    for _ in 0..4 {
        text.push_str("[[sites]]\nsize = 2\n");
    }
    for a in 0..4usize {
        for b in (a + 1)..4 {
            text.push_str(&format!(
                "[[couplings]]\ni = {a}\nj = {b}\nJ = 0.25\nkernel = \"product\"\n"
            ));
        }
    }
    let file = write_model(&text);
    let (code, stdout, _) = run(&["constant", "--model", file.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    let corollary_line = stdout
        .lines()
        .find(|l| l.contains("C_corollary"))
        .expect("corollary row present");
    assert!(corollary_line.contains("false"));
    assert!(corollary_line.contains("q < 2/3 violated"));
}

#[test]
fn reports_are_deterministic() {
    let file = write_model(MINIMAL);
    let args = [
        "check",
        "--model",
        file.path().to_str().unwrap(),
        "--kind",
        "mls",
        "--C",
        "2",
        "--seed",
        "42",
        "--budget",
        "15",
    ];
    let (c1, out1, _) = run(&args);
    let (c2, out2, _) = run(&args);
    assert_eq!(c1, c2);
    assert_eq!(out1, out2, "identical configuration must give identical bytes");
}

#[test]
fn json_lines_mirror_the_csv_fields() {
    let file = write_model(MINIMAL);
    let (code, stdout, _) = run(&[
        "constant",
        "--model",
        file.path().to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(code, 0);
    for line in stdout.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("tag").is_some() && v.get("constant").is_some());
    }
}

#[test]
fn missing_model_file_exits_with_validation_code() {
    let (code, _, stderr) = run(&["coeffs", "--model", "/nonexistent/model.toml"]);
    assert_eq!(code, 2, "stderr: {stderr}");
}

#[test]
fn usage_errors_exit_with_code_two() {
    let (code, _, _) = run(&["check", "--kind", "at"]);
    assert_eq!(code, 2);
}

#[test]
fn capacity_overflow_exits_with_code_three() {
    // 25 binary sites exceed the dense-state budget
    let mut text = String::new();
    for _ in 0..25 {
        text.push_str("[[sites]]\nsize = 2\n");
    }
    let file = write_model(&text);
    let (code, _, stderr) = run(&["coeffs", "--model", file.path().to_str().unwrap()]);
    assert_eq!(code, 3, "stderr: {stderr}");
}

#[test]
fn decay_and_optimize_and_shearer_and_prooflab_run_clean() {
    let mut text = String::from("beta = 0.05\n");
    for _ in 0..3 {
        text.push_str("[[sites]]\nsize = 2\n");
    }
    text.push_str(
        "[[couplings]]\ni = 0\nj = 1\nJ = 1.0\nkernel = \"product\"\n\
         [[couplings]]\ni = 1\nj = 2\nJ = -0.5\nkernel = \"product\"\n\
         [covers]\npairs = [[0, 1], [1, 2], [0, 2]]\n",
    );
    let file = write_model(&text);
    let path = file.path().to_str().unwrap();
    let (code, stdout, stderr) = run(&["decay", "--model", path, "--budget", "3", "--grid", "12"]);
    assert_eq!(code, 0, "decay failed: {stderr}\n{stdout}");
    assert!(stdout.lines().count() > 12);

    let (code, stdout, stderr) = run(&["optimize", "--model", path, "--budget", "2"]);
    assert_eq!(code, 0, "optimize failed: {stderr}\n{stdout}");
    assert!(stdout.contains("Prop.1.1"));

    let (code, stdout, stderr) = run(&[
        "shearer", "--model", path, "--cover", "pairs", "--budget", "10",
    ]);
    assert_eq!(code, 0, "shearer failed: {stderr}\n{stdout}");
    assert!(stdout.contains("Eq.2.18"));

    let (code, stdout, stderr) = run(&["prooflab", "--model", path, "--budget", "2"]);
    assert_eq!(code, 0, "prooflab failed: {stderr}\n{stdout}");
    assert!(stdout.contains("Eq.3.12") && stdout.contains("Eq.3.22"));
}
