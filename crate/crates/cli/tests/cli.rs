use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn brainnoc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brainnoc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = brainnoc(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn failure(dir: &Path, args: &[&str]) -> String {
    let out = brainnoc(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

#[test]
fn mesh_metrics_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["metrics", "--mesh", "32"]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("avg_hop,links,wire_length,comm_cost,basic_power_w"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], &["21.33", "1984", "397"]);
}

#[test]
fn generation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let read = |f: &str| fs::read_to_string(p.join(f)).unwrap();
    ok(p, &["generate", "--n", "144", "--out", "a.topo"]);
    ok(p, &["--seed", "9", "generate", "--n", "144", "--out", "b.topo"]);
    assert_eq!(read("a.topo"), read("b.topo"));

    ok(
        p,
        &[
            "--seed", "7", "generate", "--kind", "ba", "--n", "144", "--out", "c.topo",
        ],
    );
    ok(
        p,
        &[
            "--seed", "7", "generate", "--kind", "ba", "--n", "144", "--out", "d.topo",
        ],
    );
    ok(
        p,
        &[
            "--seed", "8", "generate", "--kind", "ba", "--n", "144", "--out", "e.topo",
        ],
    );
    assert_eq!(read("c.topo"), read("d.topo"));
    assert_ne!(read("c.topo"), read("e.topo"));
}

#[test]
fn toy_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(
        p.join("run.cfg"),
        "seed = 3\nsim.warmup_cycles = 500\nsim.measure_cycles = 4000\nsim.drain_cycles = 4000\n",
    )
    .unwrap();
    let c = ["--config", "run.cfg"];
    let run = |args: &[&str]| ok(p, &[&c[..], args].concat());
    run(&["generate", "--n", "144", "--out", "net.topo"]);
    run(&[
        "communities",
        "--topology",
        "net.topo",
        "--max-size",
        "40",
        "--out",
        "net.part",
        "--hubs-out",
        "net.hubs",
    ]);
    run(&["synth-tasks", "--tasks", "100", "--clusters", "5", "--out", "app.tasks"]);
    run(&[
        "map",
        "--topology",
        "net.topo",
        "--tasks",
        "app.tasks",
        "--partition",
        "net.part",
        "--out",
        "app.place",
    ]);
    run(&[
        "route",
        "--topology",
        "net.topo",
        "--tasks",
        "app.tasks",
        "--placement",
        "app.place",
        "--out",
        "app.routes",
        "--traffic-out",
        "app.traffic",
    ]);
    let out = run(&[
        "simulate",
        "--topology",
        "net.topo",
        "--routes",
        "app.routes",
        "--traffic",
        "app.traffic",
        "--csv",
        "sim.csv",
    ]);
    assert!(out.contains("congested false"), "{out}");
    let csv = fs::read_to_string(p.join("sim.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    for f in [
        "net.topo",
        "net.part",
        "net.hubs",
        "app.tasks",
        "app.place",
        "app.routes",
        "app.traffic",
    ] {
        assert!(!fs::read_to_string(p.join(f)).unwrap().is_empty(), "{f} is empty");
    }
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("bad.cfg"), "# comment\nseed = 1\ngrowth.nodes\n").unwrap();
    let err = failure(p, &["--config", "bad.cfg", "metrics", "--mesh", "4"]);
    assert!(err.contains("line 3"), "{err}");

    fs::write(p.join("unknown.cfg"), "seed = 1\n\nrouting.k = 4\n").unwrap();
    let err = failure(p, &["--config", "unknown.cfg", "metrics", "--mesh", "4"]);
    assert!(err.contains("line 3") && err.contains("unknown key"), "{err}");

    fs::write(p.join("value.cfg"), "growth.n = many\n").unwrap();
    let err = failure(p, &["--config", "value.cfg", "generate", "--out", "x.topo"]);
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn malformed_inputs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("broken.topo"), "2 4\n0 0 0\n1 0 x\n").unwrap();
    let err = failure(p, &["metrics", "--topology", "broken.topo"]);
    assert!(err.contains("broken.topo") && err.contains("line 3"), "{err}");
}
