use std::path::{Path, PathBuf};
use std::process::Command;

use starksim_cli::{run_cli_with, EXIT_OK, EXIT_PARSE, EXIT_RUNTIME, EXIT_USAGE, THREADS_VAR};
use starksim_core::output::tables_from_csv;

const MINIMAL: &str = "config\nend\nsequence\n  delay 1ms\nend\n";

fn programs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../programs")
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Runs in-process; returns (exit code, stdout, stderr).
fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("starksim").chain(args.iter().copied());
    let code = run_cli_with(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_starksim"))
}

#[test]
fn run_minimal_program() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "min.pulse", MINIMAL);
    let (code, out, err) = cli(&["run", p.to_str().unwrap(), "--donors", "1"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "# schema=run version=1");
    assert_eq!(lines[1], "point,sweep_value,readout,donors,x,y,z,echo");
    assert_eq!(lines.len(), 3);
    let tables = tables_from_csv(&out).unwrap();
    assert_eq!(tables.len(), 1);
    assert_eq!(tables[0].column("echo").unwrap(), vec![-1.0]);
}

#[test]
fn run_json_mirrors_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "min.pulse", MINIMAL);
    let (code, out, _) = cli(&["run", p.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["schema"], "run");
    assert_eq!(doc["version"], 1);
    assert_eq!(doc["columns"][7], "echo");
    assert_eq!(doc["rows"][0][7], -1.0);
}

#[test]
fn tomo_noiseless_y180() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        &dir,
        "gate.pulse",
        "config\n  transition nmr ms=+1/2 mi=-1/2\n  rf_rabi 500Hz\nend\nsequence\n  readout\nend\n",
    );
    let (code, out, err) = cli(&[
        "tomo",
        p.to_str().unwrap(),
        "--gate",
        "y180",
        "--voltage",
        "off",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(err.contains("process fidelity vs y180: 1.000"), "{err}");
    let tables = tables_from_csv(&out).unwrap();
    assert_eq!(tables[0].schema, "process_fidelity");
    assert!((tables[0].column("fidelity").unwrap()[0] - 1.0).abs() < 1e-9);
    assert_eq!(tables[1].schema, "chi");
    assert_eq!(tables[1].rows.len(), 16);

    let (code, _, err) = cli(&[
        "tomo",
        p.to_str().unwrap(),
        "--gate",
        "identity",
        "--voltage",
        "on",
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(err.contains("vs identity"));
}

#[test]
fn sweep_fig2c_grid() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        &dir,
        "pg.pulse",
        "config\n  tau_rf_steps 6\n  tau_v_steps 4\n  donors 3\nend\nsequence\n  readout\nend\n",
    );
    let (code, out, err) = cli(&["sweep", p.to_str().unwrap(), "--preset", "fig2c"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let t = &tables_from_csv(&out).unwrap()[0];
    assert_eq!(t.columns, ["tau_rf_s", "tau_v_s", "echo"]);
    assert_eq!(t.rows.len(), 24);
}

#[test]
fn sweep_every_figure_file() {
    for preset in ["fig1b", "fig2c", "fig3c", "fig3def", "fig4b"] {
        let file = programs().join(format!("{preset}.pulse"));
        let (code, out, err) = cli(&[
            "sweep",
            file.to_str().unwrap(),
            "--preset",
            preset,
            "--donors",
            "20",
        ]);
        assert_eq!(code, EXIT_OK, "{preset}: {err}");
        assert!(!tables_from_csv(&out).unwrap().is_empty());
    }
}

#[test]
fn fit_recovers_a_lorentzian() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("# schema=line version=1\nf,y\n");
    for k in 0..201 {
        let f = -1000.0 + 10.0 * k as f64;
        let y = 2.0 / (1.0 + ((f - 120.0) / 75.0).powi(2)) - 1.0;
        csv.push_str(&format!("{f},{y}\n"));
    }
    let p = write(&dir, "line.csv", &csv);
    let (code, out, err) = cli(&[
        "fit",
        p.to_str().unwrap(),
        "--model",
        "lorentzian",
        "--baseline",
        "-1",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let t = &tables_from_csv(&out).unwrap()[0];
    assert!((t.column("center").unwrap()[0] - 120.0).abs() < 1e-6);
    assert!((t.column("fwhm").unwrap()[0] - 150.0).abs() < 1e-6);

    let flat = write(&dir, "flat.csv", "f,y\n0,1\n1,1\n2,1\n3,1\n4,1\n");
    let (code, _, err) = cli(&["fit", flat.to_str().unwrap(), "--model", "gaussian"]);
    assert_eq!(code, EXIT_RUNTIME);
    assert!(err.contains("fit error"), "{err}");

    let (code, _, _) = cli(&[
        "fit",
        p.to_str().unwrap(),
        "--model",
        "gaussian",
        "--y",
        "nope",
    ]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn fit_reads_preset_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("endor.csv");
    let file = programs().join("fig3c.pulse");
    let (code, _, err) = cli(&[
        "sweep",
        file.to_str().unwrap(),
        "--preset",
        "fig3c",
        "--donors",
        "50",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let (code, text, err) = cli(&[
        "fit",
        out.to_str().unwrap(),
        "--model",
        "lorentzian",
        "--table",
        "endor_spectrum",
        "--y",
        "echo_square",
        "--baseline",
        "-1",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let center = tables_from_csv(&text).unwrap()[0].column("center").unwrap()[0];
    assert!((center + 2500.0).abs() < 100.0, "{center}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(&dir, "bad.pulse", "config\nend\nsequence\n  delay 1\nend\n");
    let (code, _, err) = cli(&["run", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_PARSE);
    assert!(err.contains("line 4, column 9"), "{err}");

    let wrong = write(
        &dir,
        "mw.pulse",
        "config\nend\nsequence\n  pulse mw 1us\nend\n",
    );
    let (code, _, err) = cli(&["run", wrong.to_str().unwrap()]);
    assert_eq!(code, EXIT_RUNTIME, "{err}");

    assert_eq!(cli(&["explode"]).0, EXIT_USAGE);
    assert_eq!(cli(&["run"]).0, EXIT_USAGE);
    assert_eq!(cli(&["run", "/nonexistent/x.pulse"]).0, EXIT_USAGE);
    let min = write(&dir, "min.pulse", MINIMAL);
    assert_eq!(
        cli(&["sweep", min.to_str().unwrap(), "--preset", "fig9"]).0,
        EXIT_USAGE
    );
    assert_eq!(
        cli(&[
            "sweep",
            min.to_str().unwrap(),
            "--preset",
            "fig1b",
            "--apodize",
            "1V"
        ])
        .0,
        EXIT_USAGE
    );
    let (code, out, _) = cli(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("tomo"));
}

#[test]
fn binary_exit_codes_and_thread_cap() {
    let dir = tempfile::tempdir().unwrap();
    let p = programs().join("nmr_ramsey.pulse");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (threads, path) in [("1", &a), ("4", &b)] {
        let status = bin()
            .env(THREADS_VAR, threads)
            .args(["run", p.to_str().unwrap(), "--seed", "9", "--out"])
            .arg(path)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(EXIT_OK));
    }
    // thread count does not change a single byte
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let status = bin()
        .env(THREADS_VAR, "zero")
        .args(["run", p.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&status.stderr).contains(THREADS_VAR));

    let bad = write(
        &dir,
        "bad.pulse",
        "config\nend\nsequence\n  nonsense\nend\n",
    );
    let out = bin().args(["run", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_PARSE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let p = programs().join("fig3def.pulse");
    let mut outputs = Vec::new();
    for i in 0..2 {
        let path = dir.path().join(format!("{i}.json"));
        let (code, _, err) = cli(&[
            "sweep",
            p.to_str().unwrap(),
            "--preset",
            "fig3def",
            "--format",
            "json",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK, "{err}");
        outputs.push(std::fs::read(path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn csv_fields_parse_back() {
    use starksim_core::program::{parse_program, records_table, run_program, RunOptions};
    let p = programs().join("nmr_ramsey.pulse");
    let (code, out, _) = cli(&["run", p.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let doc = parse_program(&std::fs::read_to_string(&p).unwrap()).unwrap();
    let direct = records_table(&run_program(&doc, RunOptions::default()).unwrap());
    let read = &tables_from_csv(&out).unwrap()[0];
    for (a, b) in read.rows.iter().zip(&direct.rows) {
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
