use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nanoevo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nanoevo")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A small world so the end-to-end runs stay quick.
fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    fs::write(
        &path,
        "master_seed = 7\n\
         [world]\nwidth = 20\nheight = 20\ncc_count = 30\nhc_count = 60\nagent_count = 30\n\
         [learning]\nsteps = 200\n\
         [simulation]\ntotal_dose = 500\n",
    )
    .unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn learn_then_simulate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let learn = tmp.path().join("learn");
    let o = nanoevo(&["learn", "--config", &cfg, "--out", learn.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["stats.csv", "final_population.json", "run_manifest.json", "fitness.svg", "param_hist.svg"] {
        assert!(learn.join(f).exists(), "missing {f}");
    }

    let sim = tmp.path().join("sim");
    let pop = learn.join("final_population.json");
    let o = nanoevo(&[
        "simulate",
        "--config",
        &cfg,
        "--genomes",
        pop.to_str().unwrap(),
        "--out",
        sim.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let outcome: serde_json::Value = serde_json::from_slice(&fs::read(sim.join("outcome.json")).unwrap()).unwrap();
    let kf = outcome["kill_fraction_cc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&kf));
    assert!(sim.join("timeseries.csv").exists());
}

#[test]
fn zero_dose_kills_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let genomes = tmp.path().join("g.json");
    fs::write(&genomes, r#"[{"speed": 2, "p_a": 1.0, "p_d": 0.0, "p_i": 1.0, "p_k": 1.0}]"#).unwrap();
    let out = tmp.path().join("sim");
    let o = nanoevo(&[
        "simulate",
        "--config",
        &cfg,
        "--genomes",
        genomes.to_str().unwrap(),
        "--dose",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let outcome: serde_json::Value = serde_json::from_slice(&fs::read(out.join("outcome.json")).unwrap()).unwrap();
    assert_eq!(outcome["kill_fraction_cc"].as_f64(), Some(0.0));
}

#[test]
fn empty_genome_list_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let genomes = tmp.path().join("g.json");
    fs::write(&genomes, "[]").unwrap();
    let out = tmp.path().join("sim");
    let o = nanoevo(&["simulate", "--genomes", genomes.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!out.join("outcome.json").exists());
}

#[test]
fn missing_config_names_the_path() {
    let o = nanoevo(&["validate", "--config", "/nonexistent/run.toml", "--out", "/tmp/unused"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/nonexistent/run.toml"), "{}", stderr(&o));
}

#[test]
fn invalid_config_value_is_reported_by_field() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "[kinetics]\ncuriosity = 1.5\n").unwrap();
    let o = nanoevo(&["learn", "--config", path.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("curiosity"), "{}", stderr(&o));
}

#[test]
fn map_units_prints_and_writes_constants() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nanoevo(&["map-units", "--pa", "0.3", "--pd", "1.0", "--pi", "0.5", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let k: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("units.json")).unwrap()).unwrap();
    assert!((k["ka"].as_f64().unwrap() / 361.0 - 1.0).abs() < 5e-3);
    assert_eq!(k["kd"].as_f64(), Some(2e-4));
    assert_eq!(k["ki"].as_f64(), Some(1e-4));
}

#[test]
fn validate_is_reproducible_from_its_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let o = nanoevo(&["validate", "--replicates", "2", "--seed", "11", "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = a.join("run_manifest.json");
    let o = nanoevo(&["validate", "--config", manifest.to_str().unwrap(), "--jobs", "1", "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["trajectory.csv", "aggregate.csv", "depth.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}
