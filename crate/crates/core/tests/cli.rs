use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gibbs-partition"));
    c.env_remove("GIBBS_PARTITION_SEED");
    c
}

fn models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("models")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn exact_prints_enumerated_values() {
    let out = bin().args(["exact", "--model"]).arg(models().join("ising2.toml")).args(["--beta", "0,0.5"]).output().unwrap();
    let text = stdout(&out);
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rows.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["beta", "Z", "z", "E_H", "lambda", "tau_rx", "pi_min"]);
    let recs: Vec<csv::StringRecord> = rows.records().map(|r| r.unwrap()).collect();
    assert_eq!(recs.len(), 2);
    let z0: f64 = recs[0][1].parse().unwrap();
    assert_eq!(z0, 16.0);
    let z: f64 = recs[1][1].parse().unwrap();
    let edges = [(0, 1), (2, 3), (0, 2), (1, 3)];
    let direct: f64 = (0u32..16)
        .map(|s| {
            let agree = edges.iter().filter(|&&(a, b)| (s >> a) & 1 == (s >> b) & 1).count();
            (0.5 * agree as f64).exp()
        })
        .sum();
    assert!((z - direct).abs() <= 1e-9 * direct, "{z} vs {direct}");
}

#[test]
fn estimate_is_reproducible_from_the_seed_variable() {
    let run = |seed: &str| {
        let out = bin()
            .env("GIBBS_PARTITION_SEED", seed)
            .args(["estimate", "--model"])
            .arg(models().join("ising2.toml"))
            .args(["--beta-max", "0.5", "--eps", "0.2", "--method", "parallel"])
            .output()
            .unwrap();
        stdout(&out)
    };
    let strip = |s: &str| -> Vec<String> {
        s.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
    };
    let a = run("11");
    assert!(a.starts_with("method,model,beta_max,eps,delta,seed,Z_hat,Q_hat,steps,schedule_len,cap_hit,wall_ms"));
    assert_eq!(strip(&a), strip(&run("11")));
    assert_ne!(strip(&a), strip(&run("12")));
}

#[test]
fn estimate_writes_iteration_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("iters.csv");
    let est = dir.path().join("est.csv");
    let out = bin()
        .args(["estimate", "--model"])
        .arg(models().join("ising2.toml"))
        .args(["--beta-max", "0.5", "--eps", "0.1", "--out"])
        .arg(&est)
        .arg("--log")
        .arg(&log)
        .output()
        .unwrap();
    stdout(&out);
    assert_eq!(fs::read_to_string(&est).unwrap().lines().count(), 2);
    let text = fs::read_to_string(&log).unwrap();
    assert!(text.starts_with("run,i,m,mu_hat,v_hat,u,eps_add,mu_clamped,eps_rel,steps,cap_hit"));
    assert!(text.lines().count() > 1);
}

#[test]
fn schedule_is_increasing_and_ends_at_beta_max() {
    let out = bin()
        .args(["schedule", "--model"])
        .arg(models().join("ising3.toml"))
        .args(["--beta-max", "1.0", "--k", "4", "--d", "2", "--exact-sampler", "--seed", "5"])
        .output()
        .unwrap();
    let text = stdout(&out);
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let betas: Vec<f64> = rows.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(betas[0], 0.0);
    assert_eq!(*betas.last().unwrap(), 1.0);
    assert!(betas.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn usage_and_fatal_errors_exit_one() {
    let out = bin().args(["estimate", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["exact", "--model", "/nonexistent/model.toml", "--beta", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn failed_sweep_cell_exits_two_and_plots_follow() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.toml");
    let good = models().join("ising2.toml");
    fs::write(
        &spec,
        format!(
            "out_dir = \"out\"\ndelta = 0.1\neps = [0.2]\nmethods = [\"super\", \"baseline\"]\n\
             [[models]]\nfile = {:?}\nbeta_max = 0.3\n[[models]]\nfile = \"missing.toml\"\nbeta_max = 0.3\n",
            good.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = bin().arg("sweep").arg(&spec).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let results = dir.path().join("out/results.csv");
    let text = fs::read_to_string(&results).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert_eq!(text.lines().filter(|l| l.contains(",error: ")).count(), 2);

    let out = bin().arg("plots").arg(&results).output().unwrap();
    let listed = stdout(&out);
    assert_eq!(listed.lines().count(), 3);
    for name in ["plot_steps.py", "plot_error.py", "plot_scatter.py"] {
        let script = fs::read_to_string(dir.path().join("out").join(name)).unwrap();
        assert!(script.contains("METHODS = [\"super\", \"baseline\"]"));
    }
}
