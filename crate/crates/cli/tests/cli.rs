use std::io::Write;
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use smooth_arap::mesh::read_path;
use smooth_arap::{deform, DeformParams, HalfEdgeMesh, MeshGenerator};
use tungstenite::Message;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_smooth-arap"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

fn write_json(path: &Path, value: &Value) {
    std::fs::write(path, value.to_string()).unwrap();
}

fn stderr_error(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .expect("JSON error on stderr");
    serde_json::from_str(line).unwrap()
}

#[test]
fn deform_with_handles_at_rest_keeps_the_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("job.json");
    let mesh_out = dir.path().join("out.obj");
    let report = dir.path().join("report.json");
    write_json(
        &config,
        &json!({
            "mesh": {"generator": {"kind": "bumpy_plane", "resolution": 12, "seed": 3}},
            "fix_boundary": true,
            "handles": [{"vertex": 66}],
            "output": {"mesh": mesh_out, "report": report}
        }),
    );
    let out = bin().args(["deform", "--config"]).arg(&config).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["converged"], true);

    let rest = smooth_arap::mesh::make_test_mesh(&MeshGenerator::BumpyPlane {
        resolution: 12,
        size: 1.0,
        bumps: 8,
        amplitude: 0.04,
        bump_radius: 0.06,
        seed: 3,
    })
    .unwrap();
    let deformed = read_path(&mesh_out).unwrap();
    let diag = rest.bbox_diagonal();
    for (a, b) in rest.positions.iter().zip(&deformed.positions) {
        assert!((a - b).norm() <= 1e-8 * diag);
    }
    assert_eq!(deformed.triangles, rest.triangles);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(report["trace"].is_array());
}

#[test]
fn deform_report_matches_library_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("job.json");
    let generator = json!({"kind": "bumpy_plane", "resolution": 14, "seed": 5});
    write_json(
        &config,
        &json!({
            "mesh": {"generator": generator},
            "params": {"lambda": 0.0, "init": "original_mesh"},
            "fix_boundary": true,
            "handles": [{"vertex": 105, "offset": [0.0, 0.0, 0.25]}],
            "output": {"mesh": dir.path().join("out.off"), "report": dir.path().join("r.json")}
        }),
    );
    let out = bin().args(["deform", "--config"]).arg(&config).output().unwrap();
    assert!(out.status.success());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();

    let g: MeshGenerator = serde_json::from_value(generator).unwrap();
    let mesh = HalfEdgeMesh::new(smooth_arap::mesh::make_test_mesh(&g).unwrap()).unwrap();
    let mut c = smooth_arap::harness::boundary_constraints(&mesh);
    let mut target = mesh.positions()[105];
    target.z += 0.25;
    c.insert(105, target).unwrap();
    let params = DeformParams {
        lambda: 0.0,
        init: smooth_arap::Initialization::OriginalMesh,
        ..Default::default()
    };
    let lib = deform(&mesh, &c, &params).unwrap();
    assert_eq!(report["iterations"], lib.iterations);
}

#[test]
fn malformed_config_exits_with_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, "{\"mesh\": ").unwrap();
    let out = bin().args(["deform", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["error"]["code"], "parse_error");
}

#[test]
fn bad_inputs_are_reported() {
    let out = bin()
        .args(["deform", "--config", "/nonexistent/job.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_error(&out)["error"]["code"], "io_error");

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("job.json");
    write_json(
        &config,
        &json!({
            "mesh": {"generator": {"kind": "grid_plane", "resolution": 4}},
            "handles": [{"vertex": 40}],
            "output": {"mesh": dir.path().join("o.obj")}
        }),
    );
    let out = bin().args(["deform", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["error"]["code"], "invalid_config");

    let out = bin()
        .args(["trace", "--preset", "teapot", "--out", "x"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bench.json");
    write_json(
        &config,
        &json!({
            "cases": [{"name": "plane", "preset": "bumpy-plane-spike",
                       "generator": {"kind": "bumpy_plane", "resolution": 10}}],
            "runs": 1
        }),
    );
    let out = bin()
        .args(["bench", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("report.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);
    assert!(report["machine"]["threads"].as_u64().unwrap() >= 1);
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn trace_writes_both_fits() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["trace", "--preset", "spiky-plane", "--max-iterations", "3", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "spiky-plane-edge_only.csv",
        "spiky-plane-full.csv",
        "spiky-plane-summary.json",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

fn script() -> Vec<String> {
    [
        json!({"version": 1, "id": 1, "type": "LoadMesh", "generator": {"kind": "grid_plane", "resolution": 6}}),
        json!({"version": 1, "id": 2, "type": "AddHandle", "vertex": 0}),
        json!({"version": 1, "id": 3, "type": "AddHandle", "vertex": 35}),
        json!({"version": 1, "id": 4, "type": "MoveHandle", "vertex": 35, "position": [1.0, 1.0, 0.3]}),
        json!({"version": 1, "id": 5, "type": "AddHandle", "vertex": 35}),
        json!({"version": 1, "id": 6, "type": "Shutdown"}),
    ]
    .iter()
    .map(|m| m.to_string())
    .collect()
}

fn check_replies(replies: &[Value]) {
    let kinds: Vec<&str> = replies.iter().map(|r| r["type"].as_str().unwrap()).collect();
    assert_eq!(
        kinds,
        [
            "Ack",
            "MeshTopology",
            "Frame",
            "Ack",
            "Ack",
            "Ack",
            "Frame",
            "Error",
            "Ack"
        ]
    );
    assert_eq!(replies[7]["code"], "duplicate_handle");
    assert_eq!(replies[7]["id"], 5);
}

#[test]
fn serve_over_stdio() {
    let mut child = bin()
        .args(["serve", "--stdio"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    {
        let mut stdin = child.stdin.take().unwrap();
        for m in script() {
            writeln!(stdin, "{m}").unwrap();
        }
    }
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let replies: Vec<Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    check_replies(&replies);
}

#[test]
fn serve_over_websocket() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = bin().args(["serve", "--port", &port.to_string()]).spawn().unwrap();
    let url = format!("ws://127.0.0.1:{port}");
    let deadline = Instant::now() + Duration::from_secs(20);
    let (mut socket, _) = loop {
        match tungstenite::connect(&url) {
            Ok(s) => break s,
            Err(_) if Instant::now() < deadline => thread::sleep(Duration::from_millis(50)),
            Err(e) => panic!("could not connect: {e}"),
        }
    };
    for m in script() {
        socket.send(Message::text(m)).unwrap();
    }
    let mut replies = Vec::new();
    while replies.len() < 9 {
        match socket.read().unwrap() {
            Message::Text(t) => replies.push(serde_json::from_str::<Value>(&t).unwrap()),
            Message::Close(_) => break,
            _ => {}
        }
    }
    check_replies(&replies);

    // A second client gets its own session.
    let (mut other, _) = tungstenite::connect(&url).unwrap();
    other
        .send(Message::text(
            json!({"version": 1, "id": 1, "type": "Step"}).to_string(),
        ))
        .unwrap();
    let reply: Value = match other.read().unwrap() {
        Message::Text(t) => serde_json::from_str(&t).unwrap(),
        m => panic!("unexpected {m:?}"),
    };
    assert_eq!(reply["code"], "no_mesh");
    child.kill().unwrap();
    child.wait().unwrap();
}
