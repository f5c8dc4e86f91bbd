use std::path::Path;
use std::process::{Command, Output};

fn l3ae(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_l3ae")).args(args).current_dir(cwd).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn end_to_end_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("run.toml"),
        "out = \"run\"\ninteractions = \"data/interactions.tsv\"\nembeddings = \"data/embeddings.bin\"\n\n\
         [synth]\nusers = 200\nitems = 60\nclusters = 3\ndim = 16\n",
    )
    .unwrap();
    let o = l3ae(&["synth", "--config", "run.toml", "--out", "data", "--seed", "4"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = l3ae(&["prepare", "--config", "run.toml"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("users\titems\tratings\tdensity"));

    let o = l3ae(&["fit", "--config", "run.toml", "--model", "l3ae", "--lambda-x", "40", "--lambda-kd", "20", "--lambda-f", "2"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = l3ae(&["eval", "--config", "run.toml", "--model", "l3ae", "--k", "5,10"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = String::from_utf8_lossy(&o.stdout).to_string();
    assert!(table.starts_with("slice\tusers\tR@5\tR@10\tN@5\tN@10\n"), "{table}");
    assert!(d.join("run/eval-l3ae-test.json").exists());

    let o = l3ae(&["spectrum", "--config", "run.toml"], d);
    assert_eq!(code(&o), 0);
    assert!(d.join("run/spectrum.tsv").exists());

    // 3·n²·8 bytes for n = 60 exceeds a 1 kB cap
    let o = l3ae(&["fit", "--config", "run.toml", "--model", "ease", "--lambda", "10", "--memory-cap", "1000"], d);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn exit_codes_for_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&l3ae(&["fit", "--model", "slim"], dir.path())), 1);
    assert_eq!(code(&l3ae(&["nonsense"], dir.path())), 1);
    assert_eq!(code(&l3ae(&["prepare", "--interactions", "missing.tsv"], dir.path())), 2);
    assert_eq!(code(&l3ae(&["fit", "--model", "ease"], dir.path())), 2);
    assert_eq!(code(&l3ae(&["--help"], dir.path())), 0);
}
