use std::path::Path;

use convseq::cli::run;
use serde_json::Value;

fn cli(args: &[&str]) -> i32 {
    let mut argv = vec!["convseq"];
    argv.extend_from_slice(args);
    run(argv)
}

fn report(dir: &Path, cmd: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(format!("{cmd}_report.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn small_dataset(dir: &Path) -> (String, String) {
    let out = dir.to_str().unwrap();
    let code = cli(&[
        "-o", out, "--seed", "2", "generate", "--preset", "single-seq", "--neurons", "120", "--bins", "5000",
        "--members", "50",
    ]);
    assert_eq!(code, 0);
    let base = dir.join("single-seq_isi400_jit10");
    (
        base.with_extension("coo").to_str().unwrap().to_string(),
        base.with_extension("truth").to_str().unwrap().to_string(),
    )
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    for (rank, i) in idx.into_iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let mean = (n - 1.0) / 2.0;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - mean) * (y - mean)).sum();
    let var: f64 = ra.iter().map(|x| (x - mean).powi(2)).sum();
    cov / var
}

#[test]
fn pipeline_recovers_member_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (raster, truth) = small_dataset(dir.path());
    assert_eq!(cli(&["-o", out, "--seed", "1", "fit", "--input", &raster]), 0);
    assert_eq!(cli(&["-o", out, "sort", "--input", &raster, "--bank", &format!("{out}/bank.json")]), 0);
    assert_eq!(
        cli(&["-o", out, "score", "--traces", &format!("{out}/traces.csv"), "--truth", &truth, "--alpha", "0"]),
        0
    );

    let gen = report(dir.path(), "generate");
    let members: Vec<usize> = gen["config"]["datasets"][0]["sequences"][0]["member_neurons"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as usize)
        .collect();
    let order: Vec<(usize, f64)> = std::fs::read_to_string(dir.path().join("order.txt"))
        .unwrap()
        .lines()
        .map(|l| {
            let mut it = l.split_whitespace();
            (it.next().unwrap().parse().unwrap(), it.next().unwrap().parse().unwrap())
        })
        .collect();
    assert_eq!(order.len(), 120);
    // Latencies along the sorted order never decrease.
    assert!(order.windows(2).all(|w| w[0].1 <= w[1].1));
    // Member neurons land in sequence order.
    let latency: std::collections::HashMap<usize, f64> = order.iter().copied().collect();
    let pos: Vec<f64> = (0..members.len()).map(|i| i as f64).collect();
    let lat: Vec<f64> = members.iter().map(|n| latency[n]).collect();
    let rho = spearman(&pos, &lat);
    assert!(rho > 0.9, "rank correlation {rho}");

    let sorted = convseq::SpikeMatrix::load(&dir.path().join("sorted.coo"), convseq::SpikeFormat::CooText).unwrap();
    let x = convseq::SpikeMatrix::load(Path::new(&raster), convseq::SpikeFormat::CooText).unwrap();
    assert_eq!(sorted.nnz(), x.nnz());
    assert!(dir.path().join("score.json").exists());
}

#[test]
fn xcor_weight_defaults_by_filter_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (raster, _) = small_dataset(dir.path());
    for (k, expected) in [("1", 0.0), ("2", 10.0)] {
        assert_eq!(cli(&["-o", out, "fit", "--input", &raster, "--k", k, "--steps", "2"]), 0);
        let r = report(dir.path(), "fit");
        assert_eq!(r["config"]["beta_xcor"].as_f64().unwrap(), expected);
        assert_eq!(r["config"]["j"].as_u64().unwrap(), 100);
    }
    assert_eq!(
        cli(&["-o", out, "fit", "--input", &raster, "--k", "2", "--steps", "2", "--beta-xcor", "3"]),
        0
    );
    assert_eq!(report(dir.path(), "fit")["config"]["beta_xcor"].as_f64().unwrap(), 3.0);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (raster, _) = small_dataset(dir.path());
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, format!("seed = 11\n[fit]\ninput = \"{raster}\"\nsteps = 3\nm = 40\n")).unwrap();
    let cfg = cfg.to_str().unwrap();

    assert_eq!(cli(&["--config", cfg, "-o", out, "fit"]), 0);
    let r = report(dir.path(), "fit");
    assert_eq!(r["seed"], 11);
    assert_eq!(r["config"]["n_steps"], 3);
    assert_eq!(r["config"]["m"], 40);
    assert_eq!(r["loss"]["steps_run"], 3);

    assert_eq!(cli(&["--config", cfg, "-o", out, "--seed", "4", "fit", "--steps", "2"]), 0);
    let r = report(dir.path(), "fit");
    assert_eq!(r["seed"], 4);
    assert_eq!(r["config"]["n_steps"], 2);
    assert_eq!(r["config"]["m"], 40);
}

#[test]
fn same_seed_same_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = d.path().to_str().unwrap();
        let (raster, _) = small_dataset(d.path());
        assert_eq!(cli(&["-o", out, "--seed", "5", "fit", "--input", &raster, "--steps", "5"]), 0);
    }
    let read = |d: &tempfile::TempDir, f: &str| std::fs::read(d.path().join(f)).unwrap();
    assert_eq!(read(&a, "traces.csv"), read(&b, "traces.csv"));
    assert_eq!(read(&a, "bank.json"), read(&b, "bank.json"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(cli(&["--help"]), 0);
    assert_eq!(cli(&["no-such-command"]), 2);
    assert_eq!(cli(&["-o", out, "fit", "--k", "not-a-number"]), 2);
    assert_eq!(cli(&["-o", out, "fit"]), 1);
    assert_eq!(cli(&["-o", out, "fit", "--input", "/nonexistent/x.coo"]), 1);
    assert_eq!(cli(&["-o", out, "generate", "--preset", "nope"]), 1);
}
