use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clique-factor"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("clique-factor-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn code(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

#[test]
fn solve_exit_codes_follow_verdict() {
    let dir = scratch("codes");
    let k6 = dir.join("k6.txt");
    let mut text = String::from("6 15\n");
    for u in 0..6 {
        for v in u + 1..6 {
            text.push_str(&format!("{u} {v}\n"));
        }
    }
    fs::write(&k6, text).unwrap();
    assert_eq!(code(bin().args(["solve", "--r", "3", "--input"]).arg(&k6)), 0);
    assert_eq!(code(bin().args(["solve", "--r", "4", "--input"]).arg(&k6)), 1);
    assert_eq!(code(bin().args(["solve", "--r", "3", "--input"]).arg(dir.join("missing"))), 3);
    assert_eq!(code(bin().args(["solve", "--r", "0", "--input"]).arg(&k6)), 3);
    fs::write(dir.join("bad.txt"), "3 1\n0 7\n").unwrap();
    assert_eq!(code(bin().args(["solve", "--r", "3", "--input"]).arg(dir.join("bad.txt"))), 3);
}

#[test]
fn gen_solve_verify_round_trip() {
    let dir = scratch("trip");
    let g = dir.join("ext.txt");
    let cert = dir.join("ext.json");
    assert_eq!(
        code(bin().args(["gen", "--kind", "extremal", "--n", "12", "--r", "3", "--seed", "4", "--out"]).arg(&g)),
        0
    );
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("ext.txt.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["answer"], "no-factor");
    assert_eq!(meta["hollow"].as_array().unwrap().len(), 5);

    assert_eq!(code(bin().args(["solve", "--r", "3", "--input"]).arg(&g).arg("--out").arg(&cert)), 1);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cert).unwrap()).unwrap();
    assert_eq!(doc["verdict"], "NoFactor");
    assert_eq!(doc["evidence"]["kind"], "IndependentSetTooLarge");
    assert_eq!(doc["evidence"]["set"].as_array().unwrap().len(), 5);

    let out = bin().args(["verify", "--input"]).arg(&g).arg("--certificate").arg(&cert).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "valid");

    let mut forged = doc.clone();
    forged["verdict"] = "FactorFound".into();
    fs::write(&cert, forged.to_string()).unwrap();
    assert_eq!(code(bin().args(["verify", "--input"]).arg(&g).arg("--certificate").arg(&cert)), 1);

    fs::write(&cert, "{\"verdict\": 5}").unwrap();
    assert_eq!(code(bin().args(["verify", "--input"]).arg(&g).arg("--certificate").arg(&cert)), 3);
}

#[test]
fn solve_output_is_deterministic() {
    let dir = scratch("det");
    let g = dir.join("dense.txt");
    bin().args(["gen", "--kind", "random-dense", "--n", "21", "--r", "3", "--seed", "9", "--out"])
        .arg(&g)
        .status()
        .unwrap();
    let run = || {
        let out = bin().args(["solve", "--r", "3", "--seed", "2", "--input"]).arg(&g).output().unwrap();
        let mut v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v["timing_ms"] = 0.into();
        v
    };
    assert_eq!(run(), run());
}

#[test]
fn bench_grid_writes_csv_and_json() {
    let dir = scratch("bench");
    let grid = dir.join("grid.toml");
    fs::write(&grid, "[axes]\nkind = [\"random-dense\"]\nn = [12, 18, 24]\nr = [3]\nc = [0, 1, 2]\n").unwrap();
    let csv = dir.join("rows.csv");
    assert_eq!(code(bin().args(["bench", "--grid"]).arg(&grid).arg("--out").arg(&csv)), 0);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 10);
    let rows: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(dir.join("rows.csv.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r["consistent"] == true));

    fs::write(&grid, "").unwrap();
    assert_eq!(code(bin().args(["bench", "--grid"]).arg(&grid).arg("--out").arg(&csv)), 0);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 1);

    fs::write(&grid, "[axes]\nkind = [\"nonsense\"]\n").unwrap();
    assert_eq!(code(bin().args(["bench", "--grid"]).arg(&grid).arg("--out").arg(&csv)), 3);
}
