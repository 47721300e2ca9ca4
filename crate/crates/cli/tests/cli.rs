use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn cmd(dir: &Path) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_embed-router"));
    c.current_dir(dir)
        .env("EMBED_ROUTER_DATA_DIR", data_dir())
        .env("RUST_LOG", "warn");
    c
}

fn run_ok(c: &mut Command) -> Output {
    let out = c.output().unwrap();
    assert!(
        out.status.success(),
        "{:?} failed: {}",
        c,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn free_addr() -> String {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    l.local_addr().unwrap().to_string()
}

struct Serve(Child);

impl Drop for Serve {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn serve(dir: &Path, addr: &str) -> Serve {
    let child = cmd(dir)
        .args(["serve", "--addr", addr])
        .stdout(Stdio::null())
        .spawn()
        .unwrap();
    let start = Instant::now();
    while std::net::TcpStream::connect(addr).is_err() {
        assert!(start.elapsed() < Duration::from_secs(10), "server did not start");
        std::thread::sleep(Duration::from_millis(50));
    }
    Serve(child)
}

#[test]
fn train_is_deterministic_and_logs_every_epoch() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a.emae", "b.emae"] {
        run_ok(cmd(dir.path()).args(["train", "--dataset", "synth-blobs", "-o", out]));
    }
    let a = std::fs::read(dir.path().join("a.emae")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.emae")).unwrap());
    assert_eq!(&a[..4], b"EMAE");
    let csv = std::fs::read_to_string(dir.path().join("a.loss.csv")).unwrap();
    let losses: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(losses.len(), 45);
    assert!(losses[44] < losses[0]);
}

#[test]
fn register_and_match_through_the_server() {
    let dir = tempfile::tempdir().unwrap();
    let addr = free_addr();
    run_ok(cmd(dir.path()).args(["train", "--dataset", "synth-blobs", "--epochs", "3", "-o", "s.emae"]));
    run_ok(cmd(dir.path()).args(["train", "--dataset", "synth-blobs", "--role", "a", "--epochs", "3", "-o", "c.emae"]));
    let _server = serve(dir.path(), &addr);

    let reg = |id: &str| {
        let out = run_ok(cmd(dir.path()).args([
            "register", "--model", "s.emae", "--dataset", "synth-blobs", "--expert-id", id, "--addr", &addr,
        ]));
        String::from_utf8(out.stdout).unwrap()
    };
    assert!(reg("0").contains("server holds 1 experts"));
    let again = reg("0");
    assert!(again.contains("replacing") && again.contains("server holds 1 experts"), "{again}");
    for id in 1..6 {
        reg(&id.to_string());
    }
    assert!(reg("5").contains("server holds 6 experts"));

    let out = run_ok(cmd(dir.path()).args([
        "match", "--model", "c.emae", "--dataset", "synth-blobs", "--samples", "4", "--addr", &addr,
    ]));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    // all six experts hold identical centroids, so ties resolve to id 0
    assert!(rows.iter().all(|r| r.split(',').nth(2) == Some("0")), "{text}");

    let out = run_ok(cmd(dir.path()).args([
        "match", "--model", "c.emae", "--dataset", "synth-blobs", "--samples", "2", "--coarse-only",
        "--threshold", "1.0", "--addr", &addr,
    ]));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().skip(1).all(|r| r.ends_with(",-,-,") || r.contains(",-,-,")), "{text}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "datasets = []\n").unwrap();
    let code = |args: &[&str]| cmd(dir.path()).args(args).output().unwrap().status.code();
    assert_eq!(code(&["evaluate", "--config", "bad.toml"]), Some(2));
    assert_eq!(code(&["evaluate", "--config", "missing.toml"]), Some(2));
    assert_eq!(code(&["train", "--dataset", "no-such-spec", "-o", "x.emae"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));
    run_ok(cmd(dir.path()).args(["train", "--dataset", "synth-blobs", "--epochs", "1", "-o", "m.emae"]));
    let dead = free_addr();
    assert_eq!(
        code(&["register", "--model", "m.emae", "--dataset", "synth-blobs", "--expert-id", "0", "--addr", &dead]),
        Some(3)
    );
}

#[test]
fn evaluate_and_ablation_csvs() {
    let dir = tempfile::tempdir().unwrap();
    for (name, lo, hi) in [("p", 0.0, 0.4), ("q", 0.6, 1.0)] {
        std::fs::write(
            dir.path().join(format!("{name}.spec")),
            format!(
                "name = {name}\nsource = synthetic\nclasses = 3\nsamples_per_class = 20\nproto_min = {lo}\nproto_max = {hi}\n"
            ),
        )
        .unwrap();
    }
    std::fs::write(
        dir.path().join("exp.toml"),
        "datasets = [\"p.spec\", \"q.spec\"]\nseed = 3\noutput_dir = \"out\"\n[train]\nepochs = 2\nbatch_size = 16\n",
    )
    .unwrap();
    run_ok(cmd(dir.path()).args(["evaluate", "--config", "exp.toml"]));
    let first = std::fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    assert_eq!(first.lines().next(), Some("client,dataset,metric,method,accuracy"));
    assert_eq!(first.lines().count(), 1 + 2 * 2 * 3);
    run_ok(cmd(dir.path()).args(["evaluate", "--config", "exp.toml", "--output-dir", "again"]));
    assert_eq!(first, std::fs::read_to_string(dir.path().join("again/results.csv")).unwrap());

    run_ok(cmd(dir.path()).args(["seed-ablation", "--config", "exp.toml"]));
    let ab = std::fs::read_to_string(dir.path().join("out/seed_ablation.csv")).unwrap();
    assert_eq!(ab.lines().count(), 1 + 2 * 12);
    let shared: Vec<String> = ab
        .lines()
        .filter_map(|l| l.strip_prefix("shared,"))
        .map(String::from)
        .collect();
    assert_eq!(shared, first.lines().skip(1).map(String::from).collect::<Vec<_>>());
}
