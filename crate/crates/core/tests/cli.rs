use serde_json::Value;
use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

fn layerconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_layerconv")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn convert_example_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let run = layerconv(&[
        "convert",
        "--mode",
        "dl2sl-int",
        "--k",
        "1.0",
        "--surface",
        "sphere:1.0",
        "--res",
        "16",
        "--density",
        "harmonics:[(0,0,1.0),(2,1,0.5i)]",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let r = read_json(&out);
    assert_eq!(r["command"], "convert");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["mode"], "dl2sl_interior");
    assert_eq!(r["config"]["resolution"], 16);
    assert_eq!(r["compatible"], true);
    assert!(r["field_equality_error"].as_f64().unwrap() <= 5e-3);
    assert!(r.get("timings_ms").is_none());
    for key in ["null_dim", "rhs_incompat_norm", "residual_rel", "input_density", "output_density"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn resonance_scan_example_finds_sphere_resonances() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.json");
    let run = layerconv(&[
        "resonance-scan",
        "--k-range",
        "0.5:5.0",
        "--surface",
        "sphere:1.0",
        "--res",
        "24",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let r = read_json(&out);
    let ks: Vec<f64> = r["table"].as_array().unwrap().iter().map(|e| e["k"].as_f64().unwrap()).collect();
    for target in [PI, 4.493409] {
        assert!(ks.iter().any(|k| (k - target).abs() < 1e-3), "{target} missing from {ks:?}");
    }
    for d in r["dips"].as_array().unwrap() {
        assert!(d["ratio"].as_f64().unwrap() >= 10.0, "{d}");
    }
}

#[test]
fn malformed_density_file_exits_4_without_report() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1.0,zz\n").unwrap();
    let out = dir.path().join("r.json");
    let density = format!("csv:{}", path_str(&bad));
    let run = layerconv(&["convert", "--mode", "dl2sl-int", "--density", &density, "--out", path_str(&out)]);
    assert_eq!(code(&run), 4);
    assert!(!out.exists());
    // wrong number of nodal values
    std::fs::write(&bad, "1.0\n2.0\n").unwrap();
    let run = layerconv(&["convert", "--mode", "dl2sl-int", "--density", &density, "--out", path_str(&out)]);
    assert_eq!(code(&run), 4);
    assert!(!out.exists());
}

#[test]
fn nodal_density_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("mu.csv");
    // resolution 8: 8 × 16 nodes
    let rows: String = (0..128).map(|i| format!("{},{}\n", (i as f64 * 0.1).cos(), 0.0)).collect();
    std::fs::write(&csv, rows).unwrap();
    let out = dir.path().join("r.json");
    let density = format!("csv:{}", path_str(&csv));
    let run = layerconv(&["convert", "--mode", "dl2sl-int", "--res", "8", "--density", &density, "--out", path_str(&out)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(read_json(&out)["input_density"]["values"].as_array().unwrap().len(), 128);
}

#[test]
fn usage_errors_exit_4() {
    assert_eq!(code(&layerconv(&["convert", "--k", "abc"])), 4);
    assert_eq!(code(&layerconv(&["convert", "--mode", "sideways"])), 4);
    assert_eq!(code(&layerconv(&["convert"])), 4);
    assert_eq!(code(&layerconv(&["convert", "--mode", "dl2sl-int", "--k", "-1"])), 4);
    assert_eq!(code(&layerconv(&["convert", "--mode", "dl2sl-int", "--res", "3"])), 4);
    assert_eq!(code(&layerconv(&["convert", "--mode", "dl2sl-int", "--compat-tol", "2"])), 4);
    assert_eq!(code(&layerconv(&["convert", "--mode", "dl2sl-int", "--surface", "torus:1"])), 4);
    assert_eq!(code(&layerconv(&["frobnicate"])), 4);
    assert_eq!(code(&layerconv(&["--help"])), 0);
    assert_eq!(code(&layerconv(&["--version"])), 0);
    let bad_threads = Command::new(env!("CARGO_BIN_EXE_layerconv"))
        .args(["spectrum", "--res", "4"])
        .env("LAYERCONV_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&bad_threads), 4);
}

#[test]
fn incompatible_exterior_conversion_exits_2_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let k = format!("{PI}");
    let run = layerconv(&[
        "convert",
        "--mode",
        "dl2sl-ext",
        "--k",
        &k,
        "--res",
        "16",
        "--density",
        "harmonics:[(0,0,1.0),(2,1,0.3-0.2i)]",
        "--null-threshold",
        "1e-3",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&run), 2);
    let r = read_json(&out);
    assert_eq!(r["compatible"], false);
    assert_eq!(r["null_dim"], 1);
}

#[test]
fn resonant_uniqueness_probe_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let k = format!("{PI}");
    let run = layerconv(&["convert", "--mode", "sl2dl-int", "--k", &k, "--res", "8", "--uniqueness-probe", "--out", path_str(&out)]);
    assert_eq!(code(&run), 3);
    let r = read_json(&out);
    assert_eq!(r["uniqueness"]["status"], "refused");
    assert_eq!(r["uniqueness"]["l"], 0);

    let run = layerconv(&["convert", "--mode", "sl2dl-int", "--k", "1", "--res", "8", "--uniqueness-probe", "--out", path_str(&out)]);
    assert_eq!(code(&run), 0);
    let r = read_json(&out);
    assert_eq!(r["uniqueness"]["status"], "completed");
    assert!(r["uniqueness"]["path_distance"].as_f64().unwrap() < 1e-8);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"surface": {"type": "ellipsoid", "semi_axes": [1.0, 0.9, 0.8]}, "k": 2.0, "resolution": 8,
            "mode": "sl2dl_exterior", "density": {"type": "random", "seed": 4, "l_max": 2}}"#,
    )
    .unwrap();
    let out = dir.path().join("r.json");
    let run = layerconv(&["convert", "--config", path_str(&cfg), "--k", "1.5", "--out", path_str(&out)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let r = read_json(&out);
    assert_eq!(r["config"]["k"].as_f64(), Some(1.5));
    assert_eq!(r["config"]["surface"]["type"], "ellipsoid");
    assert_eq!(r["mode"], "sl2dl_exterior");
    assert_eq!(r["verification_points"].as_array().unwrap().len(), 78);

    std::fs::write(&cfg, r#"{"k": 1.0, "wavenumber": 2.0}"#).unwrap();
    let run = layerconv(&["convert", "--config", path_str(&cfg), "--mode", "dl2sl-int"]);
    assert_eq!(code(&run), 4);
}

#[test]
fn verify_recomputes_stored_error() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let run = layerconv(&["convert", "--mode", "sl2dl-int", "--k", "2", "--res", "12", "--seed", "5", "--out", path_str(&report)]);
    assert_eq!(code(&run), 0);
    let out = dir.path().join("v.json");
    let run = layerconv(&["verify", "--report", path_str(&report), "--out", path_str(&out)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let v = read_json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["field_equality_error"], v["stored_field_equality_error"]);

    // corrupt the output density: verification fails
    let mut r = read_json(&report);
    r["output_density"]["values"][0] = serde_json::json!([10.0, 0.0]);
    std::fs::write(&report, serde_json::to_string(&r).unwrap()).unwrap();
    let run = layerconv(&["verify", "--report", path_str(&report), "--out", path_str(&out)]);
    assert_eq!(code(&run), 1);
    assert_eq!(read_json(&out)["passed"], false);

    std::fs::write(&report, "{}").unwrap();
    assert_eq!(code(&layerconv(&["verify", "--report", path_str(&report)])), 4);
}

#[test]
fn timings_only_when_requested() {
    let run = layerconv(&["spectrum", "--res", "6", "--timings"]);
    assert_eq!(code(&run), 0);
    let r: Value = serde_json::from_slice(&run.stdout).unwrap();
    assert!(r["timings_ms"]["spectrum"].as_f64().unwrap() >= 0.0);
}

#[test]
fn assemble_writes_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let dumps = dir.path().join("dumps");
    let run = layerconv(&["assemble", "--res", "6", "--operator", "Q,A,Aprime,B", "--dump", path_str(&dumps)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let r: Value = serde_json::from_slice(&run.stdout).unwrap();
    let n = r["nodes"].as_u64().unwrap();
    assert_eq!(n, 72);
    assert!(r["transpose_duality_defect"].as_f64().unwrap() < 1e-12);
    assert!(r["operators"][0]["weighted_symmetry_defect"].as_f64().unwrap() < 1e-12);
    for (name, tag) in [("Q", 0u64), ("A", 1), ("Aprime", 2), ("FactorB", 5)] {
        let bytes = std::fs::read(dumps.join(format!("{name}.bin"))).unwrap();
        assert_eq!(bytes.len() as u64, 16 + n * n * 16);
        assert_eq!(u64::from_le_bytes(bytes[0..8].try_into().unwrap()), n);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), tag);
    }
}

#[test]
fn convergence_writes_csv() {
    let run = layerconv(&["convergence", "--mode", "dl2sl-ext", "--ladder", "6,8", "--surface", "ellipsoid:1,0.9,0.8"]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let text = String::from_utf8(run.stdout).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(reader.headers().unwrap().iter().next(), Some("resolution"));
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[1][0], "8");
    assert_eq!(&rows[1][1], "128");
    assert!(rows[1][2].parse::<f64>().unwrap() < 5e-2);
}

#[test]
fn spectrum_of_factor_b() {
    let run = layerconv(&["spectrum", "--res", "8", "--operator", "B"]);
    assert_eq!(code(&run), 0);
    let r: Value = serde_json::from_slice(&run.stdout).unwrap();
    let s: Vec<f64> = r["singular_values"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(s.len(), 128);
    assert!(s.windows(2).all(|w| w[0] >= w[1]));
    assert!(r["label"].as_str().unwrap().contains("I"));
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let args = |out: &Path| {
        vec![
            "convert".to_string(),
            "--mode".into(),
            "sl2dl-ext".into(),
            "--surface".into(),
            "ellipsoid:1,0.8,0.7".into(),
            "--res".into(),
            "8".into(),
            "--seed".into(),
            "11".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let first = Command::new(env!("CARGO_BIN_EXE_layerconv")).args(args(&a)).output().unwrap();
    assert_eq!(code(&first), 0);
    let bytes = std::fs::read(&a).unwrap();
    for threads in ["1", "3"] {
        let again = Command::new(env!("CARGO_BIN_EXE_layerconv"))
            .args(args(&a))
            .env("LAYERCONV_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&again), 0);
        assert!(std::fs::read(&a).unwrap() == bytes, "report differs with {threads} threads");
    }
}
