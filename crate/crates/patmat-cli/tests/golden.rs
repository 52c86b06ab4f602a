use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn patmat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_patmat")).current_dir(fixtures()).args(args).output().expect("run patmat")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn golden(name: &str) -> String {
    fs::read_to_string(fixtures().join("golden").join(name)).unwrap()
}

fn check(args: &[&str], name: &str, code: i32) {
    let o = patmat(args);
    assert_eq!(o.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), golden(name), "{args:?}");
}

#[test]
fn zgrep_ananas() {
    check(&["zgrep", "-k", "2", "base", "ananas.pmzl"], "zgrep.txt", 0);
}

#[test]
fn tree_commands() {
    check(&["tree-ed", "t1.tree", "t2.tree"], "tree-ed.txt", 0);
    check(&["tree-align", "t1.tree", "t2.tree"], "tree-align.txt", 0);
    check(&["tree-incl", "--report-roots", "incl-pattern.tree", "incl-text.tree"], "tree-incl.txt", 0);
    check(&["tps", "tps-pattern.tree", "tps-text.tree"], "tps.txt", 0);
    check(&["tps", "--fast", "--micro-size", "2", "tps-pattern.tree", "tps-text.tree"], "tps.txt", 0);
}

#[test]
fn string_commands() {
    check(&["regex", "an(a|e)", "ananas.txt"], "regex.txt", 0);
    check(&["--json", "agrep", "-k", "2", "base", "ananas.txt"], "agrep.json", 0);
    // the compressed search agrees with the plain one
    let plain = stdout(&patmat(&["regex", "an(a|e)", "ananas.txt"]));
    assert_eq!(stdout(&patmat(&["zregex", "an(a|e)", "ananas.pmzl", "--tau", "1"])), plain);
}

#[test]
fn every_engine_agrees() {
    let want = golden("regex.txt");
    for e in ["classic", "simple", "bitpar", "separator", "fr", "nested", "auto"] {
        let o = patmat(&["--word-bits", "16", "regex", "--engine", e, "an(a|e)", "ananas.txt"]);
        assert_eq!(stdout(&o), want, "{e}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(patmat(&["regex", "zzz", "ananas.txt"]).status.code(), Some(1));
    assert_eq!(patmat(&["tree-incl", "incl-text.tree", "incl-pattern.tree"]).status.code(), Some(1));
    assert_eq!(patmat(&["regex", "(ab", "ananas.txt"]).status.code(), Some(2));
    assert_eq!(patmat(&["agrep", "-k", "4", "base", "ananas.txt"]).status.code(), Some(2));
    assert_eq!(patmat(&["zgrep", "-k", "1", "ab", "missing.pmzl"]).status.code(), Some(3));
    assert_eq!(patmat(&["zgrep", "-k", "1", "ab", "ananas.txt"]).status.code(), Some(4));
    assert_eq!(patmat(&["bench", "nope"]).status.code(), Some(2));
    assert_eq!(patmat(&[]).status.code(), Some(2));
}

#[test]
fn round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let src = fixtures().join("ananas.txt");
    for scheme in ["zl78", "zlw"] {
        let z = dir.path().join(format!("a.{scheme}"));
        let back = dir.path().join("back.txt");
        let o = patmat(&["zl", "compress", src.to_str().unwrap(), "-o", z.to_str().unwrap(), "--scheme", scheme]);
        assert!(o.status.success());
        let o = patmat(&["zl", "decompress", z.to_str().unwrap(), "-o", back.to_str().unwrap()]);
        assert!(o.status.success());
        assert_eq!(fs::read(&back).unwrap(), fs::read(&src).unwrap());
        let hits = stdout(&patmat(&["zgrep", "-k", "2", "base", z.to_str().unwrap()]));
        assert_eq!(hits, golden("zgrep.txt"), "{scheme}");
    }
    let idx = dir.path().join("a.idx");
    assert!(patmat(&["subseq", "build", src.to_str().unwrap(), "-o", idx.to_str().unwrap()]).status.success());
    let yes = patmat(&["subseq", "query", idx.to_str().unwrap(), "nnbr"]);
    assert_eq!((yes.status.code(), stdout(&yes).as_str()), (Some(0), "yes\n"));
    let no = patmat(&["subseq", "query", idx.to_str().unwrap(), "rb"]);
    assert_eq!((no.status.code(), stdout(&no).as_str()), (Some(1), "no\n"));
}

#[test]
fn threads_keep_file_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for i in 0..5 {
        let p = dir.path().join(format!("f{i}.txt"));
        fs::write(&p, "ab".repeat(i + 1)).unwrap();
        paths.push(p.to_str().unwrap().to_string());
    }
    let mut args = vec!["--json", "regex", "ab"];
    args.extend(paths.iter().map(String::as_str));
    let one = stdout(&patmat(&args));
    let mut args4 = vec!["--threads", "4"];
    args4.extend(&args);
    assert_eq!(stdout(&patmat(&args4)), one);
    let lines: Vec<serde_json::Value> = one.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    for (i, v) in lines.iter().enumerate() {
        assert_eq!(v["file"], paths[i].as_str());
        assert_eq!(v["matches"].as_array().unwrap().len(), i + 1);
    }
}

#[test]
fn bench_lists_suites() {
    let o = patmat(&["bench"]);
    assert!(o.status.success());
    let s = stdout(&o);
    for suite in ["regex-engines", "approx", "zl"] {
        assert!(s.contains(suite));
    }
}
