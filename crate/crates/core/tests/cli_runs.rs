use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fiberscat(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fiberscat")).current_dir(dir).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

const DECOUPLED_ATLAS: &str = r#"
command = "atlas"
preset = "polaron"
nu = 1
rho.family = "gaussian"
rho.g = 0.0
rho.sigma = 1.0
grid.n = 128
grid.kmax = 6.0
P = [0.0, 0.5, 1.0, 2.0]
"#;

#[test]
fn atlas_of_a_decoupled_model_is_the_free_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.toml", DECOUPLED_ATLAS);
    let out = fiberscat(dir.path(), &["run", "a.toml", "--out", "atlas", "-q"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("atlas.csv")).unwrap();
    assert!(csv.starts_with("# fiberscat "));
    assert!(csv.contains("# rho.g = 0.0"));
    // Free polaron fibers: flat field band at 1, so the continuum starts at 1
    // and the vacuum level P^2/2 is a bound state only below it.
    let rows: Vec<Vec<&str>> =
        csv.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let p: f64 = row[0].parse().unwrap();
        assert_eq!(row[1].parse::<f64>().unwrap(), 1.0);
        if p * p / 2.0 < 1.0 {
            assert!((row[2].parse::<f64>().unwrap() - p * p / 2.0).abs() < 1e-12, "{row:?}");
        } else {
            assert!(row[2].is_empty(), "{row:?}");
        }
    }
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("atlas.json")).unwrap()).unwrap();
    assert_eq!(json["records"].as_array().unwrap().len(), 4);
    assert_eq!(json["command"], "atlas");
}

#[test]
fn bad_configurations_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.toml", "command = \"spectrum\"\nbogus = 1\n");
    let out = fiberscat(dir.path(), &["run", "bad.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
    assert!(!dir.path().join("results").exists());

    let out = fiberscat(dir.path(), &["run", "missing.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn failed_checks_exit_with_two_and_still_write_results() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "v.toml",
        r#"
preset = "polaron"
nu = 1
rho.family = "power_law"
rho.g = 0.3
rho.s = 1.2
grid.n = 256
grid.kmax = 8.0
P = [0.0]
"#,
    );
    let out = fiberscat(dir.path(), &["validate", "v.toml", "--out", "v"]);
    assert_eq!(out.status.code(), Some(2));
    let csv = fs::read_to_string(dir.path().join("v.csv")).unwrap();
    assert!(csv.lines().any(|l| l.contains(",false,")));
}

#[test]
fn runs_are_byte_for_byte_reproducible() {
    let config = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/thresholds_2d.toml")).unwrap();
    let outputs: Vec<(Vec<u8>, Vec<u8>)> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            write(dir.path(), "t.toml", &config);
            let out = fiberscat(dir.path(), &["run", "t.toml", "--out", "res/t", "-q"]);
            assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
            (fs::read(dir.path().join("res/t.csv")).unwrap(), fs::read(dir.path().join("res/t.json")).unwrap())
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
}
