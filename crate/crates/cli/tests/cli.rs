use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pass"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn config(n: usize, kind: &str, rate: f64, warmup: usize, total: usize) -> String {
    format!(
        r#"
seeds = [1]

[dataset]
n = {n}
d = 4
classes = 3
separation = 4.0
noise_kind = "{kind}"
noise_rate = {rate}
test_fraction = 0.2

[train]
hidden_sizes = [16]
learning_rate = 0.01
momentum = 0.9
batch_size = 32
weight_decay = 5e-4

[selector]
warmup_epochs = {warmup}
total_epochs = {total}
partition_method = "otsu"
degenerate_policy = "all_clean"
"#
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn realized(out: &str) -> f64 {
    let field = out
        .split_whitespace()
        .find_map(|t| t.strip_prefix("realized_noise_rate="))
        .expect("rate printed");
    field.parse().unwrap()
}

#[test]
fn generate_idn_reports_realized_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &config(3000, "idn", 0.4, 1, 2));
    let out = dir.path().join("data");
    let o = pass(&["generate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rate = realized(&stdout(&o));
    assert!((rate - 0.4).abs() <= 0.02, "{rate}");
    let csv = fs::read_to_string(out.join("dataset-seed-1.csv")).unwrap();
    assert!(csv.starts_with("id,f0,f1,f2,f3,clean_label,noisy_label\n"));
    assert_eq!(csv.lines().count(), 3001);
}

#[test]
fn generate_symmetric_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &config(1000, "symmetric", 0.5, 1, 2));
    let o = pass(&["generate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(realized(&stdout(&o)), 0.5);
}

#[test]
fn invalid_rate_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &config(1000, "idn", 1.5, 1, 2));
    let o = pass(&["generate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("noise_rate out of range"), "{}", stderr(&o));
}

#[test]
fn missing_config_and_bad_flags_exit_2() {
    assert_eq!(pass(&["run", "--config", "/nonexistent.toml"]).status.code(), Some(2));
    assert_eq!(pass(&["run"]).status.code(), Some(2));
    assert_eq!(pass(&["--threads", "0", "stats", "x.csv"]).status.code(), Some(2));
}

#[test]
fn run_is_deterministic_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &config(600, "idn", 0.3, 2, 5));
    let out = dir.path().join("out");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (keep, threads) in [(&a, "1"), (&b, "3")] {
        let o = pass(&[
            "--threads",
            threads,
            "run",
            "--config",
            &cfg,
            "--seeds",
            "1,2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::rename(&out, keep).unwrap();
    }
    for seed in ["seed-1", "seed-2"] {
        for arm in ["pass", "small_loss", "none"] {
            for file in ["records.csv", "accuracy.csv", "summary.json"] {
                let rel = Path::new(seed).join(arm).join(file);
                assert_eq!(
                    fs::read(a.join(&rel)).unwrap(),
                    fs::read(b.join(&rel)).unwrap(),
                    "{}",
                    rel.display()
                );
            }
        }
    }
    assert_eq!(
        fs::read(a.join("summary.json")).unwrap(),
        fs::read(b.join("summary.json")).unwrap()
    );
    assert!(a.join("timing.json").exists());
}

#[test]
fn summary_matches_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &config(600, "idn", 0.4, 2, 4));
    let out = dir.path().join("o");
    let o = pass(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let arms = summary["seeds"][0]["arms"].as_array().unwrap();
    assert_eq!(arms.len(), 3);
    for arm in arms {
        let name = arm["arm"].as_str().unwrap();
        let records = fs::read_to_string(out.join("seed-1").join(name).join("records.csv")).unwrap();
        let rows: Vec<Vec<String>> = records
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(String::from).collect())
            .collect();
        let last = rows.iter().map(|r| r[0].parse::<usize>().unwrap()).max().unwrap();
        assert_eq!(last, 4);
        let finals: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == last.to_string()).collect();
        let expected_rows = if name == "pass" { 3 } else { 1 };
        assert_eq!(finals.len(), expected_rows);
        let mean = |col: usize| {
            finals.iter().map(|r| r[col].parse::<f64>().unwrap()).sum::<f64>() / finals.len() as f64
        };
        let sel = &arm["selection"];
        assert!((sel["precision"].as_f64().unwrap() - mean(6)).abs() < 1e-12);
        assert!((sel["f1"].as_f64().unwrap() - mean(8)).abs() < 1e-12);
        assert!((sel["clean_ratio"].as_f64().unwrap() - mean(9)).abs() < 1e-12);

        let acc = fs::read_to_string(out.join("seed-1").join(name).join("accuracy.csv")).unwrap();
        let final_acc: f64 = acc.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(arm["test_acc"].as_f64().unwrap(), final_acc);
    }
    assert_eq!(summary["config"]["dataset"]["noise_rate"].as_f64(), Some(0.4));
    assert_eq!(summary["aggregate"]["pass"]["f1"]["std"].as_f64(), Some(0.0));
}

#[test]
fn warmup_only_schedule_matches_none_arm() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &config(1500, "idn", 0.2, 8, 8));
    let out = dir.path().join("o");
    let o = pass(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let arms = summary["seeds"][0]["arms"].as_array().unwrap();
    let arm = |name: &str| arms.iter().find(|a| a["arm"] == name).unwrap();
    let member0 = arm("pass")["member_test_acc"][0].as_f64().unwrap();
    assert_eq!(member0, arm("none")["test_acc"].as_f64().unwrap());
    assert!(arm("none").get("member_test_acc").is_none());
    let small = fs::read_to_string(out.join("seed-1/small_loss/records.csv")).unwrap();
    let none = fs::read_to_string(out.join("seed-1/none/records.csv")).unwrap();
    assert_eq!(small.replace("warmup", "none"), none);
}

#[test]
fn ablate_emits_one_row_per_seed_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &config(500, "idn", 0.4, 2, 4));
    let out = dir.path().join("o");
    let o = pass(&["ablate", "--config", &cfg, "--seeds", "3,4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("ablation.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "seed,method,f1,precision,clean_ratio,test_acc");
    assert_eq!(lines.len(), 1 + 3 * 2);
    let methods: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(methods, ["otsu", "kmeans", "gmm", "otsu", "kmeans", "gmm"]);
}

fn ranked_table(rows: &[[u8; 3]]) -> String {
    let mut s = String::from("dataset,a,b,c\n");
    for (i, r) in rows.iter().enumerate() {
        // Higher score is better: rank 1 gets the highest score.
        let score = |rank: u8| 1.0 - 0.1 * rank as f64;
        s += &format!("d{i},{},{},{}\n", score(r[0]), score(r[1]), score(r[2]));
    }
    s
}

#[test]
fn stats_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = vec![[1, 2, 3]; 8];
    rows.push([1, 3, 2]);
    rows.push([2, 1, 3]);
    let scores = write(dir.path(), "s.csv", &ranked_table(&rows));
    let o = pass(&["stats", &scores, "--alpha", "0.10", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!stderr(&o).contains("unreliable"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("stats.json")).unwrap()).unwrap();
    assert!((json["statistic"].as_f64().unwrap() - 16.2).abs() < 1e-9);
    assert!((json["p_value"].as_f64().unwrap() - 3.035e-4).abs() < 1e-7);
    assert_eq!(json["mean_ranks"][0].as_f64(), Some(1.1));
    assert_eq!(json["pairs"].as_array().unwrap().len(), 3);
    let cd = fs::read_to_string(dir.path().join("cd_diagram.csv")).unwrap();
    assert_eq!(cd.lines().count(), 4);
    assert!(cd.starts_with("method,mean_rank,cd\n"));
}

#[test]
fn stats_guards() {
    let dir = tempfile::tempdir().unwrap();
    let small = write(dir.path(), "small.csv", &ranked_table(&[[1, 2, 3], [1, 3, 2]]));
    let o = pass(&["stats", &small, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("χ² approximation unreliable for small N"));

    let mut wide = String::from("dataset");
    for m in 0..12 {
        wide += &format!(",m{m}");
    }
    wide += "\n";
    for d in 0..5 {
        wide += &format!("d{d}");
        for m in 0..12 {
            wide += &format!(",{}", (m * 7 + d * 3) % 11);
        }
        wide += "\n";
    }
    let wide = write(dir.path(), "wide.csv", &wide);
    let o = pass(&["stats", &wide, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("q-table supports k ≤ 10"), "{}", stderr(&o));

    let bad = write(dir.path(), "bad.csv", "dataset,a,b\nd0,0.1,0.2\nd1,0.3\n");
    let o = pass(&["stats", &bad, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = pass(&["stats", &small, "--alpha", "0.2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
