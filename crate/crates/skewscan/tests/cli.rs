use std::path::Path;

use skewscan::cli::run_from_args;

fn run(args: &[&str]) -> i32 {
    run_from_args(std::iter::once("skewscan").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--help"]), 0);
    assert_eq!(run(&["frobnicate"]), 1);
    assert_eq!(run(&["attack", "--mode", "sideways"]), 1);
    assert_eq!(run(&["attack", "--scenes", "1", "--iters", "0", "--out", s(&dir.path().join("x"))]), 1);
    assert_eq!(run(&["attack", "--input", s(&dir.path().join("missing"))]), 2);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[attack]\nepsilon = 1\n").unwrap();
    assert_eq!(run(&["--config", s(&bad), "simulate"]), 2);
    let poses = dir.path().join("p.txt");
    std::fs::write(&poses, "0 0 0 0 1 0 0 0\n").unwrap();
    let pts = dir.path().join("pts.bin");
    std::fs::write(&pts, [0u8; 16]).unwrap();
    std::fs::write(dir.path().join("pts.bin.packets"), "1\n").unwrap();
    let out = dir.path().join("o.bin");
    assert_eq!(run(&["distort", "--points", s(&pts), "--poses", s(&poses), "--output", s(&out)]), 2);
}

#[test]
fn eval_clean_against_clean_reports_no_drop() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let out = dir.path().join("eval");
    assert_eq!(run(&["simulate", "--seed", "2", "--out", s(&sim)]), 0);
    let clean = sim.join("clean.bin");
    assert_eq!(run(&["eval", "--input", s(&sim), "--attacked", s(&clean), "--out", s(&out)]), 0);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    for row in report["attacked"]["drop"].as_array().unwrap() {
        assert_eq!(row["absolute"].as_f64().unwrap(), 0.0, "{row}");
    }
}

#[test]
fn attack_outputs_and_compensate_agree() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let att = dir.path().join("att");
    assert_eq!(run(&["simulate", "--seed", "4", "--steps", "50", "--out", s(&sim)]), 0);
    let code = run(&[
        "attack", "--input", s(&sim), "--mode", "full", "--branch", "classification", "--iters", "20", "--eps-t", "0.1",
        "--eps-r", "0.01", "--out", s(&att),
    ]);
    assert_eq!(code, 0);
    for f in ["perturbation.json", "loss_trace.csv", "attacked.bin", "attacked.bin.packets", "report.json", "report.csv", "detections.csv"] {
        assert!(att.join(f).exists(), "{f}");
    }
    let trace = std::fs::read_to_string(att.join("loss_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 22);
    let rebuilt = dir.path().join("rebuilt.bin");
    let code = run(&[
        "compensate",
        "--points",
        s(&sim.join("distorted.bin")),
        "--poses",
        s(&sim.join("poses.txt")),
        "--perturbation",
        s(&att.join("perturbation.json")),
        "--output",
        s(&rebuilt),
    ]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read(&rebuilt).unwrap(), std::fs::read(att.join("attacked.bin")).unwrap());

    let plots = dir.path().join("plots");
    assert_eq!(run(&["plot", "--input", s(&att), "--out", s(&plots)]), 0);
    for f in ["loss.svg", "pr.svg", "bev.svg", "bev.csv"] {
        assert!(plots.join(f).exists(), "{f}");
    }
}

#[test]
fn distort_then_compensate_restores_the_clean_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert_eq!(run(&["simulate", "--seed", "8", "--out", s(&sim)]), 0);
    let poses = sim.join("poses.txt");
    let d = dir.path().join("d.bin");
    let c = dir.path().join("c.bin");
    assert_eq!(run(&["distort", "--points", s(&sim.join("clean.bin")), "--poses", s(&poses), "--output", s(&d)]), 0);
    assert_eq!(run(&["compensate", "--points", s(&d), "--poses", s(&poses), "--output", s(&c)]), 0);
    let a = skewscan::io::read_points(&sim.join("clean.bin"), None).unwrap();
    let b = skewscan::io::read_points(&c, None).unwrap();
    assert_eq!(a.packet_counts(), b.packet_counts());
    let worst = a.points().zip(b.points()).flat_map(|(p, q)| (0..3).map(move |k| (p[k] - q[k]).abs())).fold(0.0, f64::max);
    // Both files hold f32 coordinates.
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn config_file_drives_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("out");
    std::fs::write(&cfg, format!("seed = 3\nscenes = 2\nsteps = 30\noutput = {:?}\n[attack]\nmode = \"translation\"\niters = 3\n", s(&out))).unwrap();
    assert_eq!(run(&["--config", s(&cfg), "eval"]), 0);
    let written = skewscan::config::RunConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(written.seed, 3);
    assert_eq!(written.steps, 30);
    assert_eq!(written.attack.iters, 3);
    let per_scene = std::fs::read_to_string(out.join("per_scene.csv")).unwrap();
    assert_eq!(per_scene.lines().collect::<Vec<_>>()[1..].iter().map(|l| l.split(',').next().unwrap()).collect::<Vec<_>>(), ["3", "4"]);
}
