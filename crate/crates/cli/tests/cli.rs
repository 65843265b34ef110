use efie2d::assembly::read_ef2d;
use efie2d::kernels::KernelSpec;
use efie2d::oracle;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn efie2d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_efie2d"))
        .args(args)
        .env_remove("EFIE2D_THREADS")
        .output()
        .expect("spawn efie2d")
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).skip(1).collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn static_filtered_spectrum_has_one_row_per_segment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let run = efie2d(&[
        "spectrum", "--curve", "circle:1", "--N", "128", "--k", "0", "--kernel", "static-filtered", "--alpha", "8",
        "--op", "S", "--out", path_str(&out),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let primary = fs::read_to_string(&out).unwrap();
    assert_eq!(data_rows(&primary).len(), 128);
    assert!(primary.contains("# curve=circle:1\n") && primary.contains("# alpha=8\n"));
    let reference = fs::read_to_string(dir.path().join("s.unfiltered.csv")).unwrap();
    let rows = data_rows(&reference);
    assert_eq!(rows.len(), 128);
    assert!(rows[5].contains(",static,"));
}

#[test]
fn config_errors_exit_with_two() {
    let cases: &[&[&str]] = &[
        &["spectrum", "--N", "32", "--k", "2", "--kernel", "ms-filtered"],
        &["spectrum", "--N", "32", "--k", "2", "--kernel", "fourier-filtered", "--alpha", "0.5k"],
        &["spectrum", "--N", "32", "--k", "2", "--kernel", "static"],
        &["spectrum", "--N", "32", "--k", "2", "--freq", "1e9", "--kernel", "dynamic"],
        &["spectrum", "--k", "2", "--kernel", "dynamic"],
        &["spectrum", "--N", "32", "--h", "0.1", "--k", "2", "--kernel", "dynamic"],
        &["spectrum", "--N", "32", "--curve", "torus:1", "--k", "2", "--kernel", "dynamic"],
        &["verify", "--level", "thorough"],
    ];
    for args in cases {
        let run = efie2d(args);
        assert_eq!(run.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&run.stderr));
    }
}

fn parse_trace(text: &str) -> Vec<[f64; 3]> {
    data_rows(text)
        .iter()
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        })
        .collect()
}

#[test]
fn static_trace_vanishes_at_unit_distance() {
    let run = efie2d(&["kernel-trace", "--kernel", "static"]);
    assert!(run.status.success());
    let rows = parse_trace(&String::from_utf8(run.stdout).unwrap());
    let unit = rows.iter().find(|r| r[0] == 1.0).expect("r = 1 on the grid");
    assert_eq!(unit[1], 0.0);
    assert_eq!(unit[2], 0.0);
}

#[test]
fn filtered_traces_start_at_zero_and_match_oracle() {
    for (family, k) in [("static-filtered", "0"), ("fourier-filtered", "2"), ("ms-filtered", "2")] {
        let run = efie2d(&[
            "kernel-trace", "--kernel", family, "--k", k, "--alpha", "7", "--r-min", "1e-3", "--r-max", "10",
            "--points", "20",
        ]);
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
        let rows = parse_trace(&String::from_utf8(run.stdout).unwrap());
        assert_eq!(rows.len(), 21);
        assert_eq!(rows[0][0], 0.0);
        assert!(rows[0][1].is_finite() && rows[0][2].is_finite());
        let spec = KernelSpec::new(family.parse().unwrap(), k.parse().unwrap(), Some(7.0)).unwrap();
        for r in &rows[1..] {
            let exact = oracle::kernel(&spec, r[0]).unwrap();
            let err = ((r[1] - exact.re).powi(2) + (r[2] - exact.im).powi(2)).sqrt();
            assert!(err < 1e-8 * exact.norm().max(1.0), "{family} r = {}: {err:e}", r[0]);
        }
    }
}

#[test]
fn verify_quick_passes_and_sign_flip_fails() {
    let ok = efie2d(&["verify", "--level", "quick"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let flipped = efie2d(&["verify", "--inject-ms-sign-flip"]);
    assert_eq!(flipped.status.code(), Some(1));
    let table = String::from_utf8(flipped.stdout).unwrap();
    let line = table.lines().find(|l| l.starts_with("ms-consistency")).unwrap();
    assert!(line.contains("FAIL"));
    assert!(String::from_utf8_lossy(&flipped.stderr).contains("ms-consistency"));
}

#[test]
fn verify_full_writes_agreement_table() {
    let dir = tempfile::tempdir().unwrap();
    let artifact = dir.path().join("table.json");
    let run = efie2d(&["verify", "--level", "full", "--artifact", path_str(&artifact)]);
    assert_eq!(run.status.code(), Some(0));
    let table: serde_json::Value = serde_json::from_str(&fs::read_to_string(&artifact).unwrap()).unwrap();
    let rows = table.as_array().unwrap();
    assert!(rows.len() >= 10);
    assert!(rows.iter().all(|r| r["passed"] == true));
}

#[test]
fn quad_selftest_passes() {
    let run = efie2d(&["quad-selftest"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stdout));
}

#[test]
fn thread_count_does_not_change_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "8"] {
        let out = dir.path().join(format!("t{threads}.csv"));
        let run = efie2d(&[
            "--threads", threads, "spectrum", "--curve", "kite", "--N", "64", "--k", "3", "--kernel", "ms-filtered",
            "--alpha", "3k", "--op", "calderon", "--out", path_str(&out),
        ]);
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
        let solve = efie2d(&[
            "--threads", threads, "solve", "--curve", "ellipse:1,0.5", "--N", "48", "--k", "2", "--kernel", "dynamic",
            "--polarization", "te", "--angle", "30",
        ]);
        assert!(solve.status.success(), "{}", String::from_utf8_lossy(&solve.stderr));
        outputs.push((
            fs::read(&out).unwrap(),
            fs::read(dir.path().join(format!("t{threads}.unfiltered.csv"))).unwrap(),
            solve.stdout,
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn threads_env_is_honoured() {
    let run = Command::new(env!("CARGO_BIN_EXE_efie2d"))
        .args(["kernel-trace", "--kernel", "dynamic", "--k", "1", "--points", "3"])
        .env("EFIE2D_THREADS", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn config_file_supplies_missing_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# sweep\ncurve = circle:0.5\nN = 40\nkernel = fourier-filtered\nk = 2\nalpha = 4k\n").unwrap();
    let out = dir.path().join("f.csv");
    let run = efie2d(&["spectrum", "--config", path_str(&cfg), "--N", "24", "--out", path_str(&out)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.contains("# N=24\n") && csv.contains("# alpha=8\n") && csv.contains("# curve=circle:0.5\n"));
    assert_eq!(data_rows(&csv).len(), 24);

    let missing = efie2d(&["spectrum", "--config", path_str(&dir.path().join("nope.conf"))]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn frequency_and_relative_mesh_size() {
    let run = efie2d(&[
        "spectrum", "--curve", "circle:0.1", "--freq", "1e9", "--h-over-lambda", "0.05", "--kernel", "dynamic", "--op",
        "N",
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = String::from_utf8(run.stdout).unwrap();
    let k = 2.0 * std::f64::consts::PI * 1e9 / 299_792_458.0;
    assert!(csv.contains(&format!("# k={k}\n")));
    // circumference 0.2 pi over h = 0.05 lambda, about 42 chords
    let n: usize = csv.lines().find_map(|l| l.strip_prefix("# N=")).unwrap().parse().unwrap();
    assert!((42..=44).contains(&n), "N = {n}");
}

#[test]
fn assemble_exports_binary_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("s.ef2d");
    let run = efie2d(&["assemble", "--N", "16", "--k", "1.5", "--kernel", "dynamic", "--out", path_str(&bin)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let m = read_ef2d(fs::File::open(&bin).unwrap()).unwrap();
    assert_eq!(m.nrows(), 16);
    assert!((m[(2, 5)] - m[(5, 2)]).norm() < 1e-12 * m[(2, 5)].norm());

    let csv = dir.path().join("n.csv");
    let run = efie2d(&["assemble", "--N", "16", "--kernel", "static", "--op", "N", "--out", path_str(&csv)]);
    assert!(run.status.success());
    assert_eq!(data_rows(&fs::read_to_string(&csv).unwrap()).len(), 256);

    let too_big = efie2d(&["assemble", "--N", "300", "--kernel", "static", "--format", "csv", "--out", path_str(&csv)]);
    assert_eq!(too_big.status.code(), Some(2));
}

#[test]
fn tm_solve_matches_series_current() {
    let run = efie2d(&["solve", "--curve", "circle:1", "--N", "128", "--k", "2", "--kernel", "dynamic", "--eta", "1"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = String::from_utf8(run.stdout).unwrap();
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 128);
    let mie = oracle::mie_series_current_tm(1.0, 2.0, 1.0, 0.0).unwrap();
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for row in rows {
        let v: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        let exact = mie.current(v[2].atan2(v[1]));
        err = err.max(((v[3] - exact.re).powi(2) + (v[4] - exact.im).powi(2)).sqrt());
        scale = scale.max(exact.norm());
    }
    assert!(err < 0.02 * scale, "{err:e} vs {scale:e}");
}
