use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use mesoshrink_cli::{run_cli, Manifest};
use mesoshrink_core::io::read_scalars;
use tempfile::TempDir;

const TINY: &str = r#"{
  "gen": {"template": {"height": 16, "width": 16, "pitch_mm": 2.0, "classes": [],
          "min_clearance_mm": 2.0, "max_attempts": 10000, "fraction_tolerance": 0.05,
          "scenario": "uniform", "seed": 0}},
  "train": {"epochs": 1, "batch_size": 2}
}"#;

fn run(args: &[&str]) -> u8 {
    run_cli(std::iter::once("mesoshrink").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Relative path → contents of every file below `root`.
fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

struct Fixture {
    _dir: TempDir,
    config: PathBuf,
    micros: PathBuf,
    sims: PathBuf,
}

/// Four generated and simulated tiny cells shared by the tests.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("job.json");
        fs::write(&config, TINY).unwrap();
        let micros = dir.path().join("micros");
        let sims = dir.path().join("sims");
        assert_eq!(
            run(&[
                "--config",
                s(&config),
                "gen",
                "-n",
                "4",
                "--seed",
                "7",
                "--out",
                s(&micros)
            ]),
            0
        );
        let code = run(&[
            "--config",
            s(&config),
            "simulate",
            "--control",
            "--data",
            s(&micros),
            "--out",
            s(&sims),
            "--workers",
            "2",
        ]);
        assert_eq!(code, 0);
        Fixture {
            _dir: dir,
            config,
            micros,
            sims,
        }
    })
}

#[test]
fn gen_is_deterministic_and_resumable() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let again = dir.path().join("again");
    assert_eq!(
        run(&[
            "--config",
            s(&f.config),
            "gen",
            "-n",
            "4",
            "--seed",
            "7",
            "--out",
            s(&again)
        ]),
        0
    );
    assert_eq!(tree(&f.micros), tree(&again));

    fs::remove_file(again.join("000002.fgrd")).unwrap();
    assert_eq!(
        run(&[
            "--config",
            s(&f.config),
            "gen",
            "-n",
            "4",
            "--seed",
            "7",
            "--out",
            s(&again),
            "--workers",
            "3"
        ]),
        0
    );
    assert_eq!(tree(&f.micros), tree(&again));

    let other = dir.path().join("other");
    assert_eq!(
        run(&[
            "--config",
            s(&f.config),
            "gen",
            "-n",
            "4",
            "--seed",
            "8",
            "--out",
            s(&other)
        ]),
        0
    );
    assert_ne!(
        tree(&f.micros).get(Path::new("000000.fgrd")),
        tree(&other).get(Path::new("000000.fgrd"))
    );
}

#[test]
fn empty_dataset_has_an_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("none");
    assert_eq!(run(&["gen", "-n", "0", "--out", s(&out)]), 0);
    let m = Manifest::load(&out).unwrap();
    assert!(m.entries.is_empty() && m.failures.is_empty());
}

#[test]
fn exceeding_the_failure_quota_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("job.json");
    // One 16 mm particle alone covers more than 10% of a 16 px cell.
    let job = TINY
        .replace(
            r#""classes": []"#,
            r#""classes": [{"diameter_mm": 16.0, "target_fraction": 0.1}]"#,
        )
        .replace(r#""fraction_tolerance": 0.05"#, r#""fraction_tolerance": 0.001"#)
        .replace(r#""max_attempts": 10000"#, r#""max_attempts": 50"#)
        .replace(
            r#""scenario": "uniform", "seed": 0}}"#,
            r#""scenario": "uniform", "seed": 0}, "random_grading": false}"#,
        );
    fs::write(&config, job).unwrap();
    let out = dir.path().join("fail");
    assert_eq!(run(&["--config", s(&config), "gen", "-n", "3", "--out", s(&out)]), 1);
    let m = Manifest::load(&out).unwrap();
    assert_eq!(m.failures.len() + m.entries.len(), 3);
    assert!(m.failures.len() > 0);
}

#[test]
fn control_cell_matches_the_closed_form() {
    let f = fixture();
    let rows = read_scalars(&f.sims.join("control.csv")).unwrap();
    assert_eq!(rows.len(), 11);
    for r in rows {
        let eps = -100e-6 * r.t as f64;
        assert!((r.eps_observed - eps).abs() <= 1e-8 * eps.abs().max(1e-300), "{r:?}");
        assert!((r.k_pa / 25e9 - 1.0).abs() <= 1e-8, "{r:?}");
        assert_eq!(r.omega_total, 0.0);
    }
}

#[test]
fn simulation_outputs_do_not_depend_on_workers() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one");
    let args = |out: &Path, w: &'static str| {
        run(&[
            "--config",
            s(&f.config),
            "simulate",
            "--control",
            "--data",
            s(&f.micros),
            "--out",
            s(out),
            "--workers",
            w,
        ])
    };
    assert_eq!(args(&one, "1"), 0);
    assert_eq!(tree(&one), tree(&f.sims));
    // A rerun picks up the existing files and leaves them untouched.
    assert_eq!(args(&one, "3"), 0);
    assert_eq!(tree(&one), tree(&f.sims));
}

#[test]
fn scenario_mismatch_stops_before_any_work() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let code = run(&[
        "--scenario",
        "nonuniform",
        "simulate",
        "--data",
        s(&f.micros),
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 2);
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"sead": 3}"#).unwrap();
    assert_eq!(run(&["--config", s(&bad), "gen", "-n", "1", "--out", s(dir.path())]), 2);
    assert_eq!(run(&["gen", "-n", "1"]), 2);
    assert_eq!(run(&["train", "--out", s(dir.path())]), 2);
    assert_eq!(run(&["--workers", "0", "gen", "--out", s(dir.path())]), 2);
}

#[test]
fn stored_manifest_reproduces_its_directory() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("replay");
    let stored = f.micros.join("manifest.json");
    assert_eq!(run(&["--config", s(&stored), "gen", "--out", s(&out)]), 0);
    assert_eq!(tree(&out), tree(&f.micros));
}

#[test]
fn train_rollout_eval_pipeline() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let base = ["--config", s(&f.config), "--data", s(&f.micros), "--sims", s(&f.sims)];
    let with = |extra: &[&str]| run(&[&base[..], extra].concat());
    assert_eq!(with(&["train", "--net", "unet", "--out", s(&p("unet"))]), 0);
    assert_eq!(with(&["train", "--net", "cnn", "--out", s(&p("cnn"))]), 0);
    assert!(p("unet").join("unet.nnwt").is_file() && p("unet").join("unet_history.csv").is_file());
    // A U-Net checkpoint is not accepted as property network.
    assert_eq!(
        with(&[
            "rollout",
            "--unet",
            s(&p("unet")),
            "--cnn",
            s(&p("unet")),
            "--out",
            s(&p("bad"))
        ]),
        2
    );
    assert_eq!(
        with(&[
            "rollout",
            "--unet",
            s(&p("unet")),
            "--cnn",
            s(&p("cnn")),
            "--out",
            s(&p("pred"))
        ]),
        0
    );

    assert_eq!(with(&["eval", "--pred", s(&f.sims), "--out", s(&p("self"))]), 0);
    let summary = fs::read_to_string(p("self").join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..4], ["t", "e_omega_mean", "e_omega_std", "e_omega_n"]);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 11);
    for row in &rows {
        for (h, v) in header.iter().zip(row) {
            if h.starts_with("e_") && (h.ends_with("_mean") || h.ends_with("_std")) && !v.is_empty() {
                assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{h} at t = {}", row[0]);
            }
        }
    }

    assert_eq!(with(&["eval", "--pred", s(&p("pred")), "--out", s(&p("eval"))]), 0);
    let summary = fs::read_to_string(p("eval").join("summary.csv")).unwrap();
    assert!(summary.starts_with(&header.join(",")));
    assert_eq!(summary.lines().count(), 12);

    // A lost prediction is reported, not dropped.
    let mut m = Manifest::load(&p("pred")).unwrap();
    let lost = m.entries.remove(1);
    m.save(&p("pred")).unwrap();
    assert_eq!(with(&["eval", "--pred", s(&p("pred")), "--out", s(&p("lossy"))]), 1);
    let report = Manifest::load(&p("lossy")).unwrap();
    assert_eq!(report.entries.len() + report.failures.len(), 4);
    assert_eq!(report.failures[0].stem, lost.stem);
}

#[test]
fn explore_commands() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let base = ["--config", s(&f.config), "--data", s(&f.micros), "--sims", s(&f.sims)];
    let with = |extra: &[&str]| run(&[&base[..], extra].concat());

    assert_eq!(with(&["explore", "smooth", "--s-bar", "0", "--out", s(&p("s0"))]), 0);
    let (a, b) = (tree(&f.micros), tree(&p("s0")));
    for (k, v) in &a {
        if k != Path::new("manifest.json") {
            assert_eq!(b.get(k), Some(v), "{}", k.display());
        }
    }

    assert_eq!(with(&["explore", "smooth", "--subset", "2", "--out", s(&p("s"))]), 0);
    let m = Manifest::load(&p("s")).unwrap();
    assert_eq!(m.entries.len(), 2);
    assert!(m.entries.iter().all(|e| (0.1..=0.5).contains(&e.param.unwrap())));

    assert_eq!(
        with(&["explore", "erase-layer", "--thickness", "5", "--out", s(&p("e"))]),
        0
    );
    let m = Manifest::load(&p("e")).unwrap();
    assert!(m.entries.iter().all(|e| e.param == Some(5.0)));

    assert_eq!(with(&["explore", "stats", "--out", s(&p("stats"))]), 0);
    let scatter = fs::read_to_string(p("stats").join("scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 5);
    assert!(scatter.starts_with("aggregate_fraction,Omega_final,eps_sh_final,k_initial,k_final,cluster,r,g,b"));
    let binned = fs::read_to_string(p("stats").join("binned.csv")).unwrap();
    assert_eq!(binned.lines().count(), 11);
    // Comparing a dataset with itself leaves every non-empty difference at zero.
    for line in binned.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        for v in &cells[12..] {
            assert!(v.is_empty() || v.parse::<f64>().unwrap() == 0.0, "{line}");
        }
    }
    let profile = fs::read_to_string(p("stats").join("row_profile.csv")).unwrap();
    assert_eq!(profile.lines().count(), 17);
}
