use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cak(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cak"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).to_string()
}

fn write(dir: &Path, name: &str, contents: &str) {
    fs::write(dir.join(name), contents).unwrap();
}

const KRIPKE: &str = r#"{
  "functor": "powerset",
  "carrier": ["s0", "s1", "s2"],
  "sigma": { "s0": ["s1"], "s1": ["s2"], "s2": [] },
  "valuation": { "q": ["s2"] },
  "root": "s0",
  "frame": { "s0": ["s1"], "s1": ["s2"], "s2": [] }
}"#;

#[test]
fn eval_and_compile_and_accept_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "m.json", KRIPKE);
    write(d, "f.mu", "mu x . (q or lift dia(x))\n");

    let ev = cak(d, &["eval", "--model", "m.json", "--formula", "f.mu", "--flavor", "mu", "--point", "s0"]);
    assert!(ev.status.success());
    assert!(stdout(&ev).contains("satisfied: true"));

    let co = cak(d, &["compile", "--flavor", "mu", "--formula", "f.mu", "--functor", "powerset", "-o", "a.json"]);
    assert!(co.status.success(), "{}", String::from_utf8_lossy(&co.stderr));

    let ac = cak(d, &["accept", "--automaton", "a.json", "--model", "m.json", "--point", "s0", "--mode", "full"]);
    assert!(ac.status.success());
    assert!(stdout(&ac).contains("accepted: true"));
}

#[test]
fn mso_pipeline_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "m.json", KRIPKE);
    write(d, "f.mso", "exists r . (r sub q and lift dia(r, r))\n");

    let co = cak(d, &["compile", "--flavor", "mso", "--formula", "f.mso", "--functor", "powerset", "-o", "a.json"]);
    assert!(co.status.success(), "{}", String::from_utf8_lossy(&co.stderr));
    let ac = cak(
        d,
        &["accept", "--automaton", "a.json", "--model", "m.json", "--point", "s0", "--mode", "tree", "--dump-game", "g.dot"],
    );
    assert!(ac.status.success());
    assert!(stdout(&ac).contains("accepted: true"));
    let dot = fs::read_to_string(d.join("g.dot")).unwrap();
    assert!(dot.starts_with("digraph game"));

    // complement through the construct subcommand flips the verdict
    let mono = cak(d, &["construct", "--op", "monotonize", "a.json", "-o", "am.json"]);
    assert!(mono.status.success());
    let comp = cak(d, &["construct", "--op", "complement", "am.json", "-o", "ac.json"]);
    assert!(comp.status.success());
    let ac2 = cak(d, &["accept", "--automaton", "ac.json", "--model", "m.json", "--point", "s0", "--mode", "tree"]);
    assert!(stdout(&ac2).contains("accepted: false"));
}

#[test]
fn translate_and_unravel_transfer() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        d,
        "bag.json",
        r#"{
  "functor": "bag",
  "carrier": ["a", "b"],
  "sigma": { "a": {"b": 2}, "b": {} },
  "valuation": { "p": ["b"] }
}"#,
    );
    write(
        d,
        "aut.json",
        r#"{
  "states": ["s", "t"],
  "initial": "s",
  "priority": { "s": 0, "t": 0 },
  "chromatic": ["p"],
  "flavor": "so1",
  "functor": "bag",
  "liftings": [],
  "delta": {
    "s": { "": "lift atleast1(t)", "p": "top" },
    "t": { "": "bot", "p": "top" }
  }
}"#,
    );
    let un = cak(
        d,
        &["unravel", "--model", "bag.json", "--point", "a", "--construction", "bag", "--depth", "6", "-o", "tree.json"],
    );
    assert!(un.status.success(), "{}", String::from_utf8_lossy(&un.stderr));
    assert!(stdout(&un).contains("total: true"));

    let tr = cak(
        d,
        &["translate", "--so-to-ml", "--automaton", "aut.json", "--construction", "bag", "--k", "1", "--m", "1", "-o", "ml.json"],
    );
    assert!(tr.status.success(), "{}", String::from_utf8_lossy(&tr.stderr));

    let on_tree = cak(d, &["accept", "--automaton", "aut.json", "--model", "tree.json", "--point", "n0", "--mode", "tree"]);
    let on_model = cak(d, &["accept", "--automaton", "ml.json", "--model", "bag.json", "--point", "a", "--mode", "full"]);
    let v1 = stdout(&on_tree);
    let v2 = stdout(&on_model);
    assert!(v1.contains("accepted:"), "{v1}");
    assert_eq!(
        v1.contains("accepted: true"),
        v2.contains("accepted: true"),
        "transfer mismatch: tree={v1} model={v2}"
    );
}

#[test]
fn bisim_and_demo() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        d,
        "m1.json",
        r#"{ "functor": "monnbhd", "carrier": ["a", "b"],
  "sigma": { "a": [["b"]], "b": [["b"]] },
  "valuation": { "p": ["b"] } }"#,
    );
    write(
        d,
        "m2.json",
        r#"{ "functor": "monnbhd", "carrier": ["a", "b1", "b2"],
  "sigma": { "a": [["b1"], ["b2"]], "b1": [["b1"]], "b2": [["b2"]] },
  "valuation": { "p": ["b1", "b2"] } }"#,
    );
    let bi = cak(d, &["bisim", "m1.json", "m2.json", "--point1", "b", "--point2", "b1", "--global"]);
    assert!(bi.status.success());
    assert!(stdout(&bi).contains("related: true"));

    let demo = cak(d, &["demo", "counterexample"]);
    assert!(demo.status.success());
    assert!(stdout(&demo).contains("all_ok: true"));
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "m.json", KRIPKE);
    write(d, "f.mu", "lift box(q)\n");
    let run = |seed: &str| {
        let o = cak(
            d,
            &["--json", "--seed", seed, "eval", "--model", "m.json", "--formula", "f.mu", "--flavor", "mu", "--point", "s2"],
        );
        // strip the timing field, everything else must be byte-identical
        let mut v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        v.as_object_mut().unwrap().remove("elapsed_ms");
        serde_json::to_string(&v).unwrap()
    };
    assert_eq!(run("7"), run("7"));
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "m.json", KRIPKE);
    write(d, "bad.mu", "mu p . not p\n");
    let o = cak(d, &["eval", "--model", "m.json", "--formula", "bad.mu", "--flavor", "mu", "--point", "s0"]);
    assert_eq!(o.status.code(), Some(1));

    // oversized carrier for the second-order quantifier cap -> exit 2
    let atoms: Vec<String> = (0..12).map(|i| format!("\"x{i:02}\"")).collect();
    let sigma: Vec<String> = (0..12).map(|i| format!("\"x{i:02}\": []")).collect();
    write(
        d,
        "big.json",
        &format!(
            r#"{{ "functor": "powerset", "carrier": [{}], "sigma": {{ {} }}, "valuation": {{ "q": [] }} }}"#,
            atoms.join(", "),
            sigma.join(", ")
        ),
    );
    write(d, "f.mso", "exists r . (r sub q)\n");
    let o2 = cak(d, &["eval", "--model", "big.json", "--formula", "f.mso", "--flavor", "mso", "--point", "x00"]);
    assert_eq!(o2.status.code(), Some(2), "{}", String::from_utf8_lossy(&o2.stderr));
}

#[test]
fn selftest_quick_criterion_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = cak(dir.path(), &["selftest", "--level", "quick", "--criterion", "11"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("PASS"));
}
