use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_treespace"));
    c.env_remove("TREESPACE_JOBS");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Output with the `#` metadata lines removed.
fn body(s: &str) -> String {
    s.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}

fn value(s: &str, key: &str) -> f64 {
    s.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}\t")))
        .unwrap_or_else(|| panic!("no `{key}` in {s}"))
        .parse()
        .unwrap()
}

fn setup() -> TempDir {
    let d = TempDir::new().unwrap();
    fs::write(d.path().join("a.nwk"), "((A:1,B:1):1,C:1,D:1);\n").unwrap();
    fs::write(d.path().join("b.nwk"), "((A:1,C:1):1,B:1,D:1);\n").unwrap();
    fs::write(d.path().join("e.nwk"), "((A:1,B:1):1,C:1,E:1);\n").unwrap();
    let s2 = std::f64::consts::SQRT_2;
    fs::write(
        d.path().join("square.csv"),
        format!(",a,b,c,d\na,0,1,{s2},1\nb,1,0,1,{s2}\nc,{s2},1,0,1\nd,1,{s2},1,0\n"),
    )
    .unwrap();
    d
}

#[test]
fn dist_examples() {
    let d = setup();
    let o = run(&["dist", "a.nwk", "a.nwk"], d.path());
    assert!(o.status.success());
    assert_eq!(value(&stdout(&o), "distance"), 0.0);
    let o = run(&["dist", "a.nwk", "b.nwk", "--path", "--boundary"], d.path());
    let s = stdout(&o);
    assert!((value(&s, "distance") - 2.0).abs() < 1e-12);
    assert!(s.contains("pair\t1\t0.500000\t{A,B}\t{A,C}"));
    assert!(s.contains("boundary\t0.500000\t(A:1,B:1,C:1,D:1);"));
    let o = run(&["dist", "a.nwk", "e.nwk"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("leaf set"));
}

#[test]
fn metadata_header() {
    let d = setup();
    let o = run(&["--seed", "42", "dist", "a.nwk", "b.nwk"], d.path());
    let s = stdout(&o);
    let head: Vec<&str> = s.lines().take(3).collect();
    assert!(head[0].starts_with("# treespace "));
    assert!(head[1].starts_with("# command: ") && head[1].ends_with("--seed 42 dist a.nwk b.nwk"));
    assert_eq!(head[2], "# seed: 42");
}

#[test]
fn matrix_examples() {
    let d = setup();
    fs::write(d.path().join("one.nwk"), "((A:1,B:1):1,C:1);\n").unwrap();
    let o = run(&["matrix", "one.nwk"], d.path());
    assert_eq!(body(&stdout(&o)), ",t1\nt1,0\n");
    fs::write(d.path().join("dup.nwk"), "((A:1,B:1):1,C:1);\n((A:1,B:1):1,C:1);\n").unwrap();
    let o = run(&["matrix", "dup.nwk"], d.path());
    assert_eq!(body(&stdout(&o)), ",t1,t2\nt1,0,0\nt2,0,0\n");
}

#[test]
fn delta_and_mds() {
    let d = setup();
    let o = run(&["delta", "square.csv"], d.path());
    assert!((value(&stdout(&o), "delta") - (2f64.sqrt() - 1.0)).abs() < 1e-12);
    let o = run(&["delta", "square.csv", "--norm", "max"], d.path());
    assert!((value(&stdout(&o), "ratio") - (2f64.sqrt() - 1.0) / 2f64.sqrt()).abs() < 1e-12);
    fs::write(d.path().join("tri.csv"), ",p,q,r\np,0,3,4\nq,3,0,5\nr,4,5,0\n").unwrap();
    let o = run(&["mds", "tri.csv", "-k", "2"], d.path());
    assert!(o.status.success());
    let s = stdout(&o);
    let stress: f64 = s.lines().find_map(|l| l.strip_prefix("# stress: ")).unwrap().parse().unwrap();
    assert!(stress < 1e-10);
    let o = run(&["mds", "tri.csv", "--kernel", "0"], d.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn hclust_runs() {
    let d = setup();
    fs::write(d.path().join("m.csv"), ",p,q,r\np,0,1,4\nq,1,0,5\nr,4,5,0\n").unwrap();
    let o = run(&["hclust", "m.csv", "--clusters", "2"], d.path());
    let s = body(&stdout(&o));
    assert!(s.starts_with("((p:1,q:1):3,r:4);"), "{s}");
    assert!(s.contains("p\t1\nq\t1\nr\t2\n"));
}

#[test]
fn saturation_is_domain_error() {
    let d = setup();
    fs::write(d.path().join("sat.fa"), ">a\nacgt\n>b\ncatg\n>c\ngtac\n").unwrap();
    let o = run(&["bootstrap", "sat.fa", "-B", "2", "--distance", "jc69", "--out-dir", "o"], d.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    fs::write(d.path().join("bad.fa"), ">a\nacgt\n>b\nac\n").unwrap();
    let o = run(&["bootstrap", "bad.fa", "--out-dir", "o"], d.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_bootstrap_pipeline_ignores_worker_count() {
    let d = setup();
    let o = run(&["--seed", "5", "simulate", "-n", "8", "--rate", "0.3", "--length", "300", "--out-dir", "sim"], d.path());
    assert!(o.status.success());
    let fa = fs::read_to_string(d.path().join("sim/alignment.fasta")).unwrap();
    assert_eq!(body(&fa).lines().filter(|l| l.starts_with('>')).count(), 8);
    let truth = fs::read_to_string(d.path().join("sim/truth.nwk")).unwrap();
    assert_eq!(body(&truth), "(((A:1,B:1):1,(C:1,D:1):1):1,((E:1,F:1):1,(G:1,H:1):1):1);\n");

    let mut outs = Vec::new();
    for jobs in ["1", "3"] {
        let dir = format!("boot{jobs}");
        let o = run(
            &["--jobs", jobs, "bootstrap", "sim/alignment.fasta", "-B", "30", "--root-at", "A", "--out-dir", &dir],
            d.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let files: Vec<String> = ["trees.nwk", "bins.tsv", "diversity.tsv", "distances.csv"]
            .iter()
            .map(|f| body(&fs::read_to_string(d.path().join(&dir).join(f)).unwrap()))
            .collect();
        outs.push(files);
    }
    assert_eq!(outs[0], outs[1]);
    let div = &outs[0][2];
    assert_eq!(value(div, "trees"), 30.0);
    assert!(value(div, "shannon_2n") < value(div, "shannon_2n_plus_2"));

    // Environment variable stands in for --jobs.
    let o = bin()
        .args(["bootstrap", "sim/alignment.fasta", "-B", "30", "--root-at", "A", "--out-dir", "bootenv"])
        .env("TREESPACE_JOBS", "2")
        .current_dir(d.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    let t = body(&fs::read_to_string(d.path().join("bootenv/trees.nwk")).unwrap());
    assert_eq!(t, outs[0][0]);
}

#[test]
fn rate_sweep_pools_trees() {
    let d = setup();
    let o = run(
        &["simulate", "-n", "4", "--outgroup", "--rates", "0.1,0.2", "--replicates", "3", "--length", "100", "--root-at", "OUT", "--out-dir", "sw"],
        d.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trees = body(&fs::read_to_string(d.path().join("sw/sweep.nwk")).unwrap());
    assert_eq!(trees.lines().count(), 7);
    let labels = body(&fs::read_to_string(d.path().join("sw/sweep_labels.tsv")).unwrap());
    assert_eq!(labels.lines().nth(1), Some("0\ttruth"));
    assert_eq!(labels.lines().last(), Some("6\t0.2"));
    let o = run(&["matrix", "sw/sweep.nwk"], d.path());
    assert!(o.status.success());
}

#[test]
fn anneal_writes_outputs() {
    let d = setup();
    let o = run(&["simulate", "-n", "4", "--outgroup", "--rate", "0.4", "--length", "120", "--out-dir", "s"], d.path());
    assert!(o.status.success());
    fs::write(d.path().join("target.nwk"), "(OUT:1,(A:1,C:1):1,(B:1,D:1):1);\n").unwrap();
    let o = run(
        &["anneal", "s/alignment.fasta", "target.nwk", "--iterations", "40", "--root-at", "OUT", "--out-dir", "an"],
        d.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(value(&s, "final_distance") <= value(&s, "initial_distance"));
    let w = body(&fs::read_to_string(d.path().join("an/weights.csv")).unwrap());
    let total: u32 = w.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<u32>().unwrap()).sum();
    assert_eq!(total, 120);
    let trace = body(&fs::read_to_string(d.path().join("an/trace.csv")).unwrap());
    assert!(trace.starts_with("iteration,temperature,distance,accepted,best\n0,"));
}
