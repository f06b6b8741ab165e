use std::path::Path;
use std::process::{Command, Output};

fn pktwin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pktwin"))
        .current_dir(dir)
        .env_remove("PKTWIN_SEED")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = pktwin(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(dir: &Path, args: &[&str]) -> serde_json::Value {
    let mut full = vec!["--json"];
    full.extend(args);
    serde_json::from_str(&ok(dir, &full)).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// synth → ingest → label → encode, leaving `all.pkw` in `dir`.
fn prepare(dir: &Path, packets: &str) {
    ok(dir, &["synth", "--packets", packets, "--pcap", "raw.pcap", "--rules", "rules.csv", "--seed", "3"]);
    ok(dir, &["ingest", "raw.pcap", "-o", "clean.pcap"]);
    ok(dir, &["label", "clean.pcap", "--rules", "rules.csv", "-o", "labels.csv"]);
    ok(dir, &["encode", "clean.pcap", "--labels", "labels.csv", "-o", "all.pkw"]);
}

#[test]
fn split_is_reproducible_for_a_fixed_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    prepare(d, "5000");
    ok(d, &["split", "all.pkw", "--groups", "1000", "--seed", "7", "--out-dir", "a"]);
    ok(d, &["split", "all.pkw", "--groups", "1000", "--seed", "7", "--out-dir", "b"]);
    ok(d, &["split", "all.pkw", "--groups", "1000", "--seed", "8", "--out-dir", "c"]);
    for part in ["train.pkw", "val.pkw", "test.pkw"] {
        let a = std::fs::read(d.join("a").join(part)).unwrap();
        assert_eq!(a, std::fs::read(d.join("b").join(part)).unwrap(), "{part}");
    }
    assert_ne!(
        std::fs::read(d.join("a/train.pkw")).unwrap(),
        std::fs::read(d.join("c/train.pkw")).unwrap()
    );
}

#[test]
fn split_report_counts_groups_and_vectors() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    prepare(d, "5000");
    let r = json(d, &["split", "all.pkw", "--groups", "100", "--out-dir", "p"]);
    let rows = r["partitions"].as_array().unwrap();
    let groups: Vec<u64> = rows.iter().map(|row| row["groups"].as_u64().unwrap()).collect();
    let vectors: Vec<u64> = rows.iter().map(|row| row["vectors"].as_u64().unwrap()).collect();
    assert_eq!(groups, [50, 10, 40]);
    assert_eq!(vectors, [2500, 500, 2000]);
}

#[test]
fn untrained_model_is_near_chance_on_balanced_data() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    prepare(d, "20000");
    ok(d, &["split", "all.pkw", "--out-dir", "p"]);
    ok(d, &["balance", "p/test.pkw", "-o", "test_bal.pkw", "--mode", "packets"]);
    for seed in ["1", "2", "3"] {
        ok(d, &["train", "--train", "p/train.pkw", "--val", "p/val.pkw", "--epochs", "0", "-o", "m.ckpt", "--seed", seed]);
        let r = json(d, &["eval", "--checkpoint", "m.ckpt", "--data", "test_bal.pkw"]);
        let acc = r["accuracy"].as_f64().unwrap();
        assert!((acc - 0.5).abs() <= 0.1, "seed {seed}: accuracy {acc}");
    }
}

#[test]
fn training_writes_history_and_checkpoint_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    prepare(d, "20000");
    ok(d, &["split", "all.pkw", "--out-dir", "p"]);
    let r = json(
        d,
        &["train", "--train", "p/train.pkw", "--val", "p/val.pkw", "--epochs", "2", "-o", "m.ckpt", "--history", "h.csv"],
    );
    assert_eq!(r["command"], "train");
    let history = std::fs::read_to_string(d.join("h.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);
    let e1 = json(d, &["eval", "--checkpoint", "m.ckpt", "--data", "p/test.pkw"]);
    let e2 = json(d, &["eval", "--checkpoint", "m.ckpt", "--data", "p/test.pkw", "-o", "e.json"]);
    assert_eq!(e1, e2);
    let saved: serde_json::Value = serde_json::from_reader(std::fs::File::open(d.join("e.json")).unwrap()).unwrap();
    assert_eq!(saved["accuracy"], e1["accuracy"]);
    assert!(e1["confusion"]["fn"].is_u64());
}

#[test]
fn saliency_writes_pgm_and_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    prepare(d, "3000");
    ok(d, &["split", "all.pkw", "--groups", "100", "--out-dir", "p"]);
    ok(d, &["train", "--train", "p/train.pkw", "--val", "p/val.pkw", "--model", "cnnlstm", "--epochs", "0", "-o", "m.ckpt"]);
    ok(d, &["saliency", "--checkpoint", "m.ckpt", "--data", "p/test.pkw", "--batch", "2", "--pgm", "s.pgm", "--csv", "s.csv"]);
    let pgm = std::fs::read(d.join("s.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n351 150\n255\n"));
    assert_eq!(pgm.len(), b"P5\n351 150\n255\n".len() + 150 * 351);
    let csv = std::fs::read_to_string(d.join("s.csv")).unwrap();
    assert_eq!(csv.lines().count(), 150);
    assert!(csv.lines().all(|l| l.split(',').count() == 351));
}

#[test]
fn missing_input_reports_error_line() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pktwin(tmp.path(), &["ingest", "nope.pcap", "-o", "x.pcap"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.starts_with("error code=missing_file msg=\""), "{err}");
    assert!(err.contains("nope.pcap"));
}

#[test]
fn malformed_config_reports_error_line() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("bad.toml"), "seed = \"many\"\n").unwrap();
    std::fs::write(d.join("unknown.toml"), "colour = 3\n").unwrap();
    for cfg in ["bad.toml", "unknown.toml"] {
        let out = pktwin(d, &["--config", cfg, "synth", "--pcap", "a.pcap", "--rules", "r.csv"]);
        assert_eq!(out.status.code(), Some(1));
        assert!(stderr(&out).starts_with("error code=malformed_config"), "{}", stderr(&out));
    }
}

#[test]
fn invalid_enum_value_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pktwin(tmp.path(), &["train", "--train", "a", "--val", "b", "--model", "resnet", "-o", "m"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error code=usage"), "{}", stderr(&out));
    assert_eq!(stderr(&out).lines().count(), 1);
}

#[test]
fn corrupted_container_reports_offset() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    prepare(d, "1000");
    let mut bytes = std::fs::read(d.join("all.pkw")).unwrap();
    bytes[0] = b'X';
    std::fs::write(d.join("bad.pkw"), bytes).unwrap();
    let out = pktwin(d, &["split", "bad.pkw", "--groups", "10", "--out-dir", "p"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.starts_with("error code="), "{err}");
    assert!(err.contains("offset 0"), "{err}");
}

fn synth_first_pcap(dir: &Path, extra: &[&str], env: Option<&str>) -> Vec<u8> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pktwin"));
    cmd.current_dir(dir).env_remove("PKTWIN_SEED");
    if let Some(v) = env {
        cmd.env("PKTWIN_SEED", v);
    }
    cmd.args(extra).args(["synth", "--packets", "200", "--pcap", "s.pcap", "--rules", "s.csv"]);
    assert!(cmd.output().unwrap().status.success());
    std::fs::read(dir.join("s.pcap")).unwrap()
}

#[test]
fn seed_precedence_is_flag_then_config_then_env() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("c.toml"), "seed = 5\n").unwrap();
    let s = |n: &str| synth_first_pcap(d, &["--seed", n], None);
    let (five, six, seven, one) = (s("5"), s("6"), s("7"), s("1"));
    assert_ne!(five, six);

    assert_eq!(synth_first_pcap(d, &["--config", "c.toml", "--seed", "7"], Some("6")), seven);
    assert_eq!(synth_first_pcap(d, &["--config", "c.toml"], Some("6")), five);
    assert_eq!(synth_first_pcap(d, &[], Some("6")), six);
    assert_eq!(synth_first_pcap(d, &[], None), one);
}

#[test]
fn text_report_aligns_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let text = ok(d, &["synth", "--packets", "500", "--pcap", "s.pcap", "--rules", "s.csv"]);
    let cols: Vec<usize> = text
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| l.find("  ").unwrap() + l[l.find("  ").unwrap()..].find(|c: char| c != ' ').unwrap())
        .collect();
    assert!(cols.windows(2).all(|w| w[0] == w[1]), "{text}");
}
