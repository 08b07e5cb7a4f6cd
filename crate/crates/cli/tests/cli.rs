use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gamecert::io::{game_from_json, game_to_json, read_game};
use gamecert::poly::{Monomial, Polynomial};
use gamecert::sdp::{parse_sdpa, to_sdpa_string};
use gamecert::{corpus, PolynomialGame};
use serde_json::Value;

fn corpus_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    run_with_threads(args, None)
}

fn run_with_threads(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gamecert"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("GAMECERT_THREADS", t),
        None => cmd.env_remove("GAMECERT_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "report is not JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn lambda(r: &Value, k: usize) -> f64 {
    r["result"]["levels"][k]["result"]["lambda"]
        .as_f64()
        .unwrap()
}

fn write_game(dir: &Path, name: &str, game: &PolynomialGame) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, game_to_json(game, None)).unwrap();
    path
}

#[test]
fn certify_exit_codes() {
    let out = run(&["certify", "--kind", "monotone", "--level", "2", path_str(&corpus_file("driver.game.json"))]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["status"], "certified");
    assert!((lambda(&r, 0) + 6.0).abs() < 1e-4);
    assert_eq!(r["result"]["levels"][0]["result"]["status"], "StrictlyCertified");

    let out = run(&["certify", "--kind", "monotone", "--level", "2", path_str(&corpus_file("fig1.game.json"))]);
    assert_eq!(code(&out), 2);
    let r = report(&out);
    assert_eq!(r["status"], "inconclusive");
    assert!((lambda(&r, 0) - 10.0).abs() < 1e-3);
}

#[test]
fn malformed_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"players\": [").unwrap();
    for cmd in ["certify", "project", "gauge", "efg2poly", "export-sdpa"] {
        let out = run(&[cmd, path_str(&bad)]);
        assert_eq!(code(&out), 1, "{cmd}");
        assert!(!out.stderr.is_empty());
    }
    let out = run(&["certify", path_str(&dir.path().join("missing.json"))]);
    assert_eq!(code(&out), 1);
    // usage errors are reported by the argument parser
    let out = run(&["certify", "--kind", "convex", path_str(&bad)]);
    assert_ne!(code(&out), 0);
}

#[test]
fn certify_level_range_and_verification() {
    let out = run(&[
        "certify",
        "--levels",
        "2..4",
        "--verify",
        "500",
        path_str(&corpus_file("fig1.game.json")),
    ]);
    assert_eq!(code(&out), 2);
    let r = report(&out);
    let levels = r["result"]["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 3);
    for k in 0..3 {
        assert!((lambda(&r, k) - 10.0).abs() < 1e-3);
    }
    let v = &r["result"]["verification"];
    assert!((v["sampled"]["max"].as_f64().unwrap() - 10.0).abs() < 1e-9);
    assert_eq!(v["contradicted_levels"].as_array().unwrap().len(), 0);
}

#[test]
fn concave_certification() {
    let out = run(&["certify", "--kind", "concave", path_str(&corpus_file("driver.game.json"))]);
    assert_eq!(code(&out), 0);
    assert!((lambda(&report(&out), 0) + 6.0).abs() < 1e-4);
}

#[test]
fn reports_are_reproducible() {
    let game = corpus_file("deg4.game.json");
    let args = ["certify", "--level", "2", "--verify", "300", path_str(&game)];
    let a = run_with_threads(&args, Some("1"));
    let b = run_with_threads(&args, Some("4"));
    let c = run_with_threads(&args, Some("4"));
    assert_eq!(code(&a), code(&b));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(b.stdout, c.stdout);
    let r = report(&a);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["config"]["verify"], 300);
    assert_eq!(r["config"]["seed"], 0x5EED);
}

#[test]
fn project_fig1() {
    let dir = tempfile::tempdir().unwrap();
    let out_game = dir.path().join("projected.game.json");
    let out_report = dir.path().join("report.json");
    let out = run(&[
        "project",
        "--level",
        "2",
        "--zero-sum",
        "--preserve-support",
        "--game-out",
        path_str(&out_game),
        "--output",
        path_str(&out_report),
        path_str(&corpus_file("fig1.game.json")),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out_report).unwrap()).unwrap();
    assert!((r["result"]["distance"].as_f64().unwrap() - 10.0).abs() < 1e-3);
    assert_eq!(r["config"]["projection"]["zero_sum"], true);

    let projected = read_game(&out_game).unwrap();
    let x1x2 = Monomial::new(vec![1, 1, 0]);
    assert!(projected.payoff(0).coeff(&x1x2).abs() <= 1e-4);
    let zero_sum = projected.payoff(0).add(projected.payoff(1)).unwrap();
    assert!(zero_sum.terms().all(|(_, c)| c.abs() < 1e-12));
    let embedded = serde_json::to_string(&r["result"]["game"]).unwrap();
    assert_eq!(game_from_json(&embedded).unwrap(), projected);
}

#[test]
fn project_fig3_at_level_six() {
    let out = run(&[
        "project",
        "--level",
        "6",
        "--zero-sum",
        "--preserve-support",
        path_str(&corpus_file("fig3.game.json")),
    ]);
    assert_eq!(code(&out), 0);
    let d = report(&out)["result"]["distance"].as_f64().unwrap();
    assert!((d - 49.0).abs() < 0.5, "{d}");
}

#[test]
fn project_certified_game_is_identity() {
    let out = run(&["project", path_str(&corpus_file("driver.game.json"))]);
    assert_eq!(code(&out), 0);
    let d = report(&out)["result"]["distance"].as_f64().unwrap();
    assert!(d.abs() < 1e-6, "{d}");
}

#[test]
fn infeasible_projection_exits_three() {
    // zero-sum requires u_2 = -u_1, but both constants are pinned at 1
    let dir = tempfile::tempdir().unwrap();
    let u = corpus::poly(2, &[(1.0, &[0, 0]), (-1.0, &[2, 0])]);
    let v = corpus::poly(2, &[(1.0, &[0, 0]), (-1.0, &[0, 2])]);
    let g = PolynomialGame::new(&[1, 1], vec![u, v], corpus::unit_box(2)).unwrap();
    let path = write_game(dir.path(), "pinned.game.json", &g);
    let out = run(&[
        "project",
        "--zero-sum",
        "--freeze",
        "0:0,0",
        "--freeze",
        "1:0,0",
        path_str(&path),
    ]);
    assert_eq!(code(&out), 3);
    assert_eq!(report(&out)["status"], "infeasible");
}

#[test]
fn efg2poly_matches_corpus() {
    for name in ["driver", "fig1", "fig3"] {
        let out = run(&["efg2poly", path_str(&corpus_file(&format!("{name}.efg.json")))]);
        assert_eq!(code(&out), 0);
        let converted = game_from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
        let expected = read_game(&corpus_file(&format!("{name}.game.json"))).unwrap();
        assert_eq!(converted.block_sizes(), expected.block_sizes());
        for (a, b) in converted.payoffs().iter().zip(expected.payoffs()) {
            assert!(a.add(&b.negate()).unwrap().terms().all(|(_, c)| c.abs() <= 1e-12));
        }
        let map: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert!(map["infosets"].is_object());
    }
}

#[test]
fn efg2poly_single_leaf_and_malformed() {
    let dir = tempfile::tempdir().unwrap();
    let leaf = dir.path().join("leaf.efg.json");
    std::fs::write(
        &leaf,
        r#"{"players": 1, "root": {"owner": "terminal", "payoffs": [2.5]}}"#,
    )
    .unwrap();
    let out = run(&["efg2poly", path_str(&leaf)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let g = game_from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(g.n_vars(), 0);
    assert_eq!(g.payoff(0), &Polynomial::constant(0, 2.5));

    let bad = dir.path().join("bad.efg.json");
    std::fs::write(
        &bad,
        r#"{"players": 1, "root": {"owner": 0, "infoset": "I", "actions": ["a"], "children": []}}"#,
    )
    .unwrap();
    assert_eq!(code(&run(&["efg2poly", path_str(&bad)])), 1);
}

#[test]
fn export_sdpa_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str]); 3] = [
        ("fig1.game.json", &["--level", "2"]),
        ("driver.game.json", &["--kind", "concave"]),
        (
            "fig1.game.json",
            &["--problem", "project", "--zero-sum", "--preserve-support"],
        ),
    ];
    for (k, (file, extra)) in cases.iter().enumerate() {
        let dat = dir.path().join(format!("p{k}.dat-s"));
        let input = corpus_file(file);
        let mut args = vec!["export-sdpa", "--output", path_str(&dat)];
        args.extend_from_slice(extra);
        args.push(path_str(&input));
        let out = run(&args);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let text = std::fs::read_to_string(&dat).unwrap();
        let parsed = parse_sdpa(&text).unwrap();
        assert!(parsed.n_constraints() > 0);
        assert_eq!(to_sdpa_string(&parsed).unwrap(), text);
    }
    let out = run(&[
        "export-sdpa",
        "--kind",
        "concave",
        "--player",
        "3",
        path_str(&corpus_file("fig1.game.json")),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn gauge_values() {
    let out = run(&["gauge", "--level", "2", path_str(&corpus_file("fig1.game.json"))]);
    assert_eq!(code(&out), 0);
    let eps = report(&out)["result"]["epsilon"].as_f64().unwrap();
    assert!((eps - 5.0).abs() < 1e-3, "{eps}");

    let dir = tempfile::tempdir().unwrap();
    let u = corpus::poly(1, &[(3.0, &[2]), (-4.0, &[1])]);
    let g = PolynomialGame::new(&[1], vec![u], corpus::unit_box(1)).unwrap();
    let path = write_game(dir.path(), "convex.game.json", &g);
    let out = run(&["gauge", path_str(&path)]);
    assert_eq!(code(&out), 0);
    let eps = report(&out)["result"]["epsilon"].as_f64().unwrap();
    assert!((eps - 3.0).abs() < 1e-3, "{eps}");

    let out = run(&["gauge", "--kind", "concave", path_str(&path)]);
    assert_eq!(code(&out), 1);
}
