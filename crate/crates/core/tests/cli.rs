use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use regolith::model::{ModelParams, RunLogRow};
use regolith::{model, terrain};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_regolith"))
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn regolith")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn run_bundled_flat_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        "--config",
        s(&bundled("flat_1p17.json")),
        "--out-dir",
        s(dir.path()),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    let (header, rows) = csv_rows(&dir.path().join("telemetry.csv"));
    assert_eq!(header.join(","), regolith::sim::TELEMETRY_HEADER);
    assert_eq!(rows.len(), 300);
    let v_col = header.iter().position(|h| h == "v").unwrap();
    let s_col = header.iter().position(|h| h == "s").unwrap();
    let steady_v = 1.17 * (1.0 - (0.0265 * 1.17 + 0.0256));
    let last = rows.last().unwrap();
    assert!((last[v_col] - steady_v).abs() < 1e-5, "{}", last[v_col]);
    assert!((last[s_col] - (0.0265 * 1.17 + 0.0256)).abs() < 1e-5);

    let errors: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("errors.json")).unwrap())
            .unwrap();
    assert!(errors["slip_mae"].as_f64().unwrap() < 0.02);
    assert!(errors["sinkage_mae"].as_f64().unwrap() < 0.25);
    for f in ["dem_depth.asc", "dem_rendered.asc", "dem_mask.asc"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn every_bundled_config_runs() {
    for entry in std::fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let dir = tempfile::tempdir().unwrap();
        let out = run(&["run", "--config", s(&path), "--out-dir", s(dir.path())]);
        assert!(out.status.success(), "{}: {}", path.display(), stderr(&out));
    }
}

#[test]
fn invalid_config_exits_one_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{ "sim": { "dt_hz": 0 } }"#).unwrap();
    let out = run(&["run", "--config", s(&cfg), "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("sim.dt_hz"), "{}", stderr(&out));

    std::fs::write(&cfg, r#"{ "sim": { "dt_hz": 30, "warp": 2 } }"#).unwrap();
    let out = run(&["run", "--config", s(&cfg), "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("warp"), "{}", stderr(&out));

    let out = run(&[
        "run",
        "--config",
        s(&dir.path().join("missing.json")),
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(run(&["fly"]).status.code(), Some(1));
    assert_eq!(run(&["sweep", "--config"]).status.code(), Some(1));
}

fn synthetic_log(v_w: f64, alpha: f64, s: f64, load: Option<(f64, f64)>) -> Vec<RunLogRow> {
    let radius = 0.1;
    let mut rows = Vec::new();
    for k in 0..30 {
        let t = k as f64 * 0.05;
        // Encoder and velocity streams arrive on interleaved timestamps.
        rows.push(RunLogRow {
            t,
            v: None,
            omega: Some(v_w / radius),
            alpha: None,
            f_z: None,
            z: None,
        });
        rows.push(RunLogRow {
            t: t + 0.025,
            v: Some((1.0 - s) * v_w),
            omega: None,
            alpha: Some(alpha),
            f_z: load.map(|l| l.0),
            z: load.map(|l| l.1),
        });
    }
    rows
}

fn sig4(got: f64, want: f64) -> bool {
    ((got - want) / want).abs() < 5e-5
}

#[test]
fn fit_recovers_flat_and_slope_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let slip = |v: f64, a: f64| 0.0265 * v + 0.0256 + (0.00522 * v + 0.00105) * a * a;
    for v in [0.23, 0.47, 0.82, 1.17] {
        let p = dir.path().join(format!("flat_{v}.csv"));
        model::write_run_log(&p, &synthetic_log(v, 0.0, slip(v, 0.0), None)).unwrap();
    }
    let out = dir.path().join("flat.json");
    let o = run(&[
        "fit",
        "--data",
        s(&dir.path().join("flat_*.csv")),
        "--kind",
        "slip_flat",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("a_v"));
    let p = ModelParams::load(&out).unwrap();
    assert!(
        sig4(p.slip.a_v, 0.0265) && sig4(p.slip.b_v, 0.0256),
        "{p:?}"
    );

    for v in [0.2, 0.47] {
        for a in [0.0, 5.0, 10.0, 15.0] {
            let path = dir.path().join(format!("slope_{v}_{a}.csv"));
            model::write_run_log(&path, &synthetic_log(v, a, slip(v, a), None)).unwrap();
        }
    }
    let out = dir.path().join("slope.json");
    let o = run(&[
        "fit",
        "--data",
        s(&dir.path().join("slope_*.csv")),
        "--kind",
        "slip_slope",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let p = ModelParams::load(&out).unwrap().slip;
    assert!(sig4(p.a_v, 0.0265) && sig4(p.b_v, 0.0256));
    assert!(
        sig4(p.a_alpha, 0.00522) && sig4(p.b_alpha, 0.00105),
        "{p:?}"
    );
}

#[test]
fn fit_recovers_sinkage_plane() {
    let dir = tempfile::tempdir().unwrap();
    for s_true in [0.05, 0.2, 0.4] {
        for f in [3.72, 8.72, 13.72] {
            let z = -33.56 * s_true - 0.9291 * (f - 8.72) - 3.11;
            let path = dir.path().join(format!("sink_{s_true}_{f}.csv"));
            model::write_run_log(&path, &synthetic_log(0.5, 0.0, s_true, Some((f, z)))).unwrap();
        }
    }
    let out = dir.path().join("sink.json");
    let o = run(&[
        "fit",
        "--data",
        s(&dir.path().join("sink_*.csv")),
        "--kind",
        "sinkage",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let p = ModelParams::load(&out).unwrap().sinkage;
    assert!(
        sig4(p.c_s, -33.56) && sig4(p.c_f, -0.9291) && sig4(p.c_0, -3.11),
        "{p:?}"
    );
}

#[test]
fn fit_rejects_degenerate_data() {
    let dir = tempfile::tempdir().unwrap();
    for k in 0..3 {
        let path = dir.path().join(format!("one_{k}.csv"));
        model::write_run_log(&path, &synthetic_log(0.47, 0.0, 0.04, None)).unwrap();
    }
    let out = dir.path().join("out.json");
    let o = run(&[
        "fit",
        "--data",
        s(&dir.path().join("one_*.csv")),
        "--kind",
        "slip_flat",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());

    let o = run(&[
        "fit",
        "--data",
        s(&dir.path().join("none_*.csv")),
        "--kind",
        "slip_flat",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "time,speed\n0,1\n").unwrap();
    let o = run(&[
        "fit",
        "--data",
        s(&bad),
        "--kind",
        "slip_flat",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_single_point_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled("reference.json");
    let out = dir.path().join("one.csv");
    let o = run(&[
        "sweep",
        "--config",
        s(&cfg),
        "--v-list",
        "0.47",
        "--alpha-list",
        "0",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&out);
    assert_eq!(header.join(","), regolith::sim::SWEEP_HEADER);
    assert_eq!(rows.len(), 1);
    assert!((rows[0][2] - 0.038055).abs() < 2e-4, "{:?}", rows[0]);

    let out = dir.path().join("grid.csv");
    let o = run(&[
        "sweep",
        "--config",
        s(&cfg),
        "--v-list",
        "1.17,0.23,0.82,0.47",
        "--alpha-list",
        "10,-10,0,5,-5",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = csv_rows(&out);
    assert_eq!(rows.len(), 20);
    for w in rows.windows(2) {
        assert!((w[0][0], w[0][1]) < (w[1][0], w[1][1]));
    }
}

#[test]
fn sweep_rejects_bad_lists() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled("reference.json");
    let out = dir.path().join("x.csv");
    for (v, a) in [("0.47", "30"), ("0", "0"), ("-0.2", "0")] {
        let o = run(&[
            "sweep",
            "--config",
            s(&cfg),
            "--v-list",
            v,
            "--alpha-list",
            a,
            "--out",
            s(&out),
        ]);
        assert_eq!(o.status.code(), Some(1), "{v}/{a}: {}", stderr(&o));
    }
    let code = regolith::cli::commands::sweep(&cfg, &[], &[0.0], &out, 1);
    assert_eq!(code, 1);
}

#[test]
fn export_dem_depth_and_mask() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ruts.asc");
    let o = run(&[
        "export-dem",
        "--config",
        s(&bundled("skid_stop.json")),
        "--channel",
        "depth",
        "--threshold-mm",
        "12",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let depth = terrain::read_asc(&out).unwrap();
    let mask = terrain::read_asc(&dir.path().join("ruts_mask.asc")).unwrap();
    let (mut deep, mut any) = (0, 0);
    for j in 0..depth.ny() {
        for i in 0..depth.nx() {
            let d = depth.base(i, j);
            assert!(d <= 0.0);
            any += (d < 0.0) as usize;
            let want = if d < -0.012 { 1.0 } else { 0.0 };
            assert_eq!(mask.base(i, j), want, "({i},{j}) depth {d}");
            deep += want as usize;
        }
    }
    assert!(any > 0 && deep > 0 && deep < any, "{deep} of {any}");
}

#[test]
fn export_dem_without_motion_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("still.json");
    std::fs::write(
        &cfg,
        r#"{ "command": { "waypoints": [{ "t": 0, "v_w": 0 }] }, "sim": { "duration_s": 2 } }"#,
    )
    .unwrap();
    let out = dir.path().join("still.asc");
    let o = run(&[
        "export-dem",
        "--config",
        s(&cfg),
        "--channel",
        "depth",
        "--threshold-mm",
        "12",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mask = terrain::read_asc(&dir.path().join("still_mask.asc")).unwrap();
    for j in 0..mask.ny() {
        for i in 0..mask.nx() {
            assert_eq!(mask.base(i, j), 0.0);
        }
    }
}

#[test]
fn export_dem_requires_deformation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rigid.json");
    std::fs::write(&cfg, r#"{ "terrain": { "deformation": false } }"#).unwrap();
    let o = run(&[
        "export-dem",
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("x.asc")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("terrain.deformation"));
}

#[test]
fn unreadable_heightmap_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hm.json");
    std::fs::write(
        &cfg,
        r#"{ "terrain": { "shape": { "heightmap": { "path": "nowhere.asc" } } } }"#,
    )
    .unwrap();
    let o = run(&["run", "--config", s(&cfg), "--out-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("terrain.shape.heightmap.path"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn heightmap_terrain_is_resolved_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let tan = 10f64.to_radians().tan();
    let grid = terrain::TerrainGrid::from_fn(161, 81, 0.025, (-1.0, -1.0), |x, _| tan * x).unwrap();
    std::fs::create_dir(dir.path().join("maps")).unwrap();
    terrain::write_asc(
        &grid,
        terrain::Channel::Base,
        &dir.path().join("maps/ramp.asc"),
    )
    .unwrap();
    let cfg = dir.path().join("ramp.json");
    std::fs::write(
        &cfg,
        r#"{
            "terrain": { "shape": { "heightmap": { "path": "maps/ramp.asc" } } },
            "command": { "waypoints": [{ "t": 0, "v_w": 0.47 }] },
            "sim": { "duration_s": 5 }
        }"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let o = run(&["run", "--config", s(&cfg), "--out-dir", s(&out_dir)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&out_dir.join("telemetry.csv"));
    let a_col = header.iter().position(|h| h == "alpha").unwrap();
    let s_col = header.iter().position(|h| h == "s").unwrap();
    let last = rows.last().unwrap();
    assert!((last[a_col] - 10.0).abs() < 0.01, "{}", last[a_col]);
    let want = 0.0265 * 0.47 + 0.0256 + (0.00522 * 0.47 + 0.00105) * 100.0;
    assert!(
        (last[s_col] - want).abs() < 1e-4,
        "{} vs {want}",
        last[s_col]
    );
}
