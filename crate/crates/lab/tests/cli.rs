use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn oneclass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oneclass")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = oneclass(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn small_ratings(path: &Path) {
    let mut text = String::new();
    for u in 1..=12 {
        for i in 1..=8 {
            if (u + i) % 3 != 0 {
                let stars = if (u * i) % 2 == 0 { "4.5" } else { "2" };
                text.push_str(&format!("{u}::{i}::{stars}::{}\n", 1000 + u * 10 + i));
            }
        }
    }
    fs::write(path, text).unwrap();
}

#[test]
fn bounds_prints_every_quantity_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bounds.csv");
    let out = ok(&["bounds", "--n_users", "2000", "--pf", "0.5", "--csv", csv.to_str().unwrap()]);
    for key in ["t_start", "reward_lower_bound", "prop1_bound", "recommended_k", "flag_eta_q_floor"] {
        assert!(out.lines().any(|l| l.starts_with(key)), "{key} missing from\n{out}");
    }
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("key,value\nt_start,"));
    assert_eq!(text.lines().count(), out.lines().count() + 1);
}

#[test]
fn unknown_keys_are_rejected() {
    let out = oneclass(&["bounds", "--nope", "1"]);
    assert!(!out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "replicates = 2\nnot_a_key = 3\n").unwrap();
    let out = oneclass(&["exp", "sim-scaling", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn synth_writes_curve_trace_matrix_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let (curve, trace, matrix) = (p("curve.csv"), p("trace.csv"), p("model.txt"));
    ok(&[
        "synth", "--n_users", "30", "--n_items", "40", "--n_types", "3", "--horizon", "25", "--k_neighbors", "5",
        "--output", &curve, "--trace", &trace, "--matrix", &matrix,
    ]);
    let pm = oneclass_lab::io::read_preference_matrix(Path::new(&matrix)).unwrap();
    assert_eq!((pm.n_users(), pm.n_items(), pm.n_types()), (30, 40, 3));
    let rows = oneclass_lab::io::read_trace(&fs::read_to_string(&trace).unwrap()).unwrap();
    assert!(rows.iter().all(|r| r.t < 25 && r.user < 30 && r.item < 40));
    let table = oneclass_lab::curves::CurveTable::read_csv(Path::new(&curve)).unwrap();
    assert_eq!(table.curve("likable").len(), 25);
    let meta = fs::read_to_string(format!("{curve}.meta")).unwrap();
    assert!(meta.contains("n_users = 30") && meta.contains("late_quarter_likable"), "{meta}");
}

#[test]
fn ingest_and_export_build_grids() {
    let dir = tempfile::tempdir().unwrap();
    let ratings = dir.path().join("ratings.dat");
    small_ratings(&ratings);
    let grid = dir.path().join("corpus.grid");
    let out = ok(&[
        "ingest", "--input", ratings.to_str().unwrap(), "--out", grid.to_str().unwrap(),
        "--users", "10", "--items", "4", "--bias_tolerance", "1",
    ]);
    assert!(out.starts_with("10x4 corpus"), "{out}");
    let m = oneclass_lab::ingest::read_grid(&grid).unwrap();
    assert_eq!((m.n_rows(), m.n_cols()), (10, 4));
    let meta = fs::read_to_string(dir.path().join("corpus.grid.meta")).unwrap();
    assert!(meta.contains("mode = debiased") && meta.contains("rows_read = "), "{meta}");

    let export = dir.path().join("figure.grid");
    ok(&["export-matrix", "--input", ratings.to_str().unwrap(), "--out", export.to_str().unwrap(), "--users", "12", "--items", "8"]);
    let m = oneclass_lab::ingest::read_grid(&export).unwrap();
    assert_eq!((m.n_rows(), m.n_cols()), (12, 8));
    assert!(fs::read_to_string(dir.path().join("figure.grid.meta")).unwrap().contains("mode = most-rated"));

    let too_many = oneclass(&["ingest", "--input", ratings.to_str().unwrap(), "--out", grid.to_str().unwrap(), "--users", "50"]);
    assert!(!too_many.status.success());
}

#[test]
fn exp_is_byte_identical_across_threads_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# small pref-scaling run\nseed = 11\nreplicates = 4\nn_users = 60\nn_items = 120\nn_types = 3\n\
         k_neighbors = 8\ntr_grid = 0,4,16\nsim_warmup = 10\n",
    )
    .unwrap();
    let mut csvs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("pref{threads}.csv"));
        ok(&["exp", "pref-scaling", "--config", cfg.to_str().unwrap(), "--threads", threads, "--output", out.to_str().unwrap()]);
        csvs.push(fs::read(&out).unwrap());
        let meta = fs::read_to_string(format!("{}.meta", out.display())).unwrap();
        assert!(meta.contains("experiment = pref-scaling") && meta.contains("seed = 11") && meta.contains("x_axis"), "{meta}");
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs.remove(0)).unwrap();
    assert!(text.starts_with("x,mean,stderr,n,label\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 3);
}
