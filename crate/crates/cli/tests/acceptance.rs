//! One PASS/FAIL line per acceptance criterion. Runs the release CLI end to end.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use morse_forge::morse::{cm_of, delta_of, Gauge};
use morse_forge::rational::{fmt_q, int, Q};
use serde_json::{json, Value};
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: Vec<u8>,
    elapsed: Duration,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.stdout).unwrap_or(Value::Null)
    }
}

fn cli(args: &[&str]) -> Run {
    let t = Instant::now();
    let o: Output = Command::new(env!("CARGO_BIN_EXE_morse-forge")).args(args).output().expect("binary runs");
    if !o.stderr.is_empty() {
        eprintln!("{}", String::from_utf8_lossy(&o.stderr));
    }
    Run { code: o.status.code().unwrap_or(-1), stdout: o.stdout, elapsed: t.elapsed() }
}

fn config(dir: &Path, name: &str, body: Value) -> PathBuf {
    let mut cfg = json!({ "schema": 1 });
    for (k, v) in body.as_object().expect("object") {
        cfg[k] = v.clone();
    }
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    p
}

fn line_line() -> Value {
    json!({ "a": { "kind": "line" }, "b": { "kind": "line" } })
}

struct Ledger {
    results: Vec<(usize, bool)>,
}

impl Ledger {
    fn record(&mut self, id: usize, name: &str, pass: bool, detail: String) {
        println!("criterion {id:>2} {name:<28} {} {detail}", if pass { "PASS" } else { "FAIL" });
        self.results.push((id, pass));
    }
}

fn verified(r: &Run) -> bool {
    let v = r.json();
    r.code == 0 && v["status"] == "verified" && v["counterexample_count"] == 0 && v["vacuous"] == false
}

fn summary(r: &Run) -> String {
    let v = r.json();
    format!("[exit {}, {} instances, {} counterexamples, {:.1?}]", r.code, v["instances"], v["counterexample_count"], r.elapsed)
}

fn main() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let s = |p: &PathBuf| p.to_str().unwrap().to_string();
    let mut ledger = Ledger { results: Vec::new() };
    // (args, first stdout) for the determinism re-runs
    let mut replay: Vec<(Vec<String>, Vec<u8>)> = Vec::new();
    let mut remember = |args: Vec<String>, r: &Run| replay.push((args, r.stdout.clone()));

    let zz = config(d, "zz.json", json!({ "groups": [line_line()] }));
    let dihedral = config(d, "z2z2.json", json!({ "groups": [{ "a": { "kind": "cyclic", "n": 2 }, "b": { "kind": "cyclic", "n": 2 } }] }));
    let lattice = config(d, "z2z.json", json!({ "groups": [{ "a": { "kind": "lattice", "dim": 2 }, "b": { "kind": "line" } }] }));

    // 1. prefix transit, radius 5, length ≤ d(e, w) + 2, under a minute each
    {
        let mut ok = true;
        let mut detail = Vec::new();
        for cfg in [&zz, &dihedral] {
            let args = vec!["check".into(), "prefix-transit".into(), "--radius".into(), "5".into(), "--extra".into(), "2".into(), "--config".into(), s(cfg)];
            let r = cli(&args.iter().map(String::as_str).collect::<Vec<_>>());
            ok &= verified(&r) && r.elapsed < Duration::from_secs(60);
            detail.push(summary(&r));
            remember(args, &r);
        }
        ledger.record(1, "prefix-transit", ok, detail.join(" "));
    }

    // 2. projection to Γ_A, radius 4, grid (1,0) (1,2) (2,1) (3,0), bound λ²ε + ε + 1
    {
        let mut ok = true;
        let mut detail = Vec::new();
        for cfg in [&zz, &lattice] {
            let args = vec!["check".into(), "projection-qg".into(), "--radius".into(), "4".into(), "--config".into(), s(cfg)];
            let r = cli(&args.iter().map(String::as_str).collect::<Vec<_>>());
            let grid = r.json()["details"]["grid"].as_array().map(|g| g.len()).unwrap_or(0);
            ok &= verified(&r) && grid == 4;
            detail.push(summary(&r));
            remember(args, &r);
        }
        ledger.record(2, "projection-qg", ok, detail.join(" "));
    }

    // 3. concatenation, radius 4: every instance with |t − t′| ≥ 3λ(d(p, γ) + d(q, γ)) is (3λ, ε+1)
    {
        let args = vec!["check".into(), "concat-qg".into(), "--radius".into(), "4".into(), "--config".into(), s(&zz)];
        let r = cli(&args.iter().map(String::as_str).collect::<Vec<_>>());
        ledger.record(3, "concat-qg", verified(&r), summary(&r));
        remember(args, &r);
    }

    // 4. closed-form constants, exact rationals
    {
        let sum = Gauge::affine(int(1), int(1), int(0)).unwrap();
        let zero = Gauge::zero();
        let got = (delta_of(&sum).ok(), delta_of(&zero).ok(), cm_of(&zero, 10).ok());
        let want = (Some(int(54)), Some(int(0)), Some(int(10)));
        ledger.record(4, "closed-form constants", got == want, {
            let show = |q: &Option<Q>| q.as_ref().map_or("error".to_string(), fmt_q);
            format!("[δ(λ+ε) = {}, δ(0) = {}, C_0(10) = {}]", show(&got.0), show(&got.1), show(&got.2))
        });
    }

    // 5. Φ/Ψ round trip over all CombRays of depth ≤ 4, period ≤ 2, in ℤ∗ℤ
    let pop = config(d, "pop.json", json!({ "groups": [line_line()], "population": { "depth": 4, "period": 2, "centers": 200, "members": 16 }, "seed": 7 }));
    {
        let args = vec!["check".into(), "phi-psi".into(), "--config".into(), s(&pop)];
        let r = cli(&args.iter().map(String::as_str).collect::<Vec<_>>());
        ledger.record(5, "phi-psi round trip", verified(&r), summary(&r));
        remember(args, &r);
    }

    // 6. neighborhood-system axioms on the same population
    {
        let args = vec!["check".into(), "v-system".into(), "--config".into(), s(&pop)];
        let r = cli(&args.iter().map(String::as_str).collect::<Vec<_>>());
        ledger.record(6, "v-system axioms", verified(&r), summary(&r));
        remember(args, &r);
    }

    // 7 and 8. matching for Identity, LineSwap and a signed generator permutation, 20 rounds
    {
        let homeos = [
            ("identity", json!({ "a": { "rule": "identity" }, "b": { "rule": "identity" } })),
            ("line-swap", json!({ "a": { "rule": "line_swap" }, "b": { "rule": "line_swap" } })),
            ("permutation", json!({ "a": { "rule": "permutation", "images": ["x^-1"] }, "b": { "rule": "permutation", "images": ["y^-1"] } })),
        ];
        let mut ok7 = true;
        let mut ok8 = true;
        let mut d7 = Vec::new();
        let mut d8 = Vec::new();
        let mut total = Duration::ZERO;
        for (name, h) in homeos {
            let out = d.join(format!("match-{name}"));
            let cfg = config(
                d,
                &format!("match-{name}.json"),
                json!({
                    "groups": [line_line(), line_line()],
                    "homeos": h,
                    "budgets": { "match_steps": 20, "continuity_k": 12 },
                    "population": { "depth": 4, "period": 2, "centers": 200 },
                    "seed": 7,
                    "output": out,
                }),
            );
            let args = vec!["match".into(), "--config".into(), s(&cfg)];
            let r = cli(&args.iter().map(String::as_str).collect::<Vec<_>>());
            total += r.elapsed;
            let v = r.json();
            let inv = v["invariants"].as_array().cloned().unwrap_or_default();
            let invariants_hold = inv.len() == 2
                && inv.iter().all(|f| {
                    f["bijective"] == true
                        && f["identity_pair"] == true
                        && f["roles_consistent"] == true
                        && f["alternation"] == true
                        && f["certified"] == true
                        && f["targets_on_rays"] == true
                        && f["duality_failures"].as_array().is_some_and(|a| a.is_empty())
                        && f["duality_checked"].as_u64().unwrap_or(0) > 0
                });
            ok7 &= r.code == 0 && invariants_hold && v["rounds"] == 20;
            d7.push(format!("[{name}: exit {}, {} pairs, {:.1?}]", r.code, v["pairs"], r.elapsed));
            let induced = &v["induced_containment"];
            let cont = &v["continuity"];
            let ends = v["continuity_ends"].as_array().cloned().unwrap_or_default();
            let witnessed = ends.len() == 12 && ends.iter().all(|e| !e["k"].is_null() && e["vacuous"] == false && e["l"].as_u64().unwrap_or(0) <= 3);
            ok8 &= induced["status"] == "verified"
                && induced["instances"].as_u64().unwrap_or(0) > 0
                && cont["status"] == "verified"
                && witnessed;
            d8.push(format!(
                "[{name}: {} containments, {} counterexamples, {} ends witnessed]",
                induced["instances"], induced["counterexample_count"], ends.len()
            ));
            let transcript = std::fs::read(out.join("transcript.jsonl")).unwrap_or_default();
            replay.push((args, [r.stdout.clone(), transcript].concat()));
        }
        ok7 &= total < Duration::from_secs(300);
        ledger.record(7, "matching pipeline", ok7, format!("{} total {total:.1?}", d7.join(" ")));
        ledger.record(8, "induced-map containment", ok8, d8.join(" "));
    }

    // 9. empty-boundary branch on a ℤ² factor
    {
        let out = d.join("match-lattice");
        let cfg = config(
            d,
            "match-lattice.json",
            json!({
                "groups": [{ "a": { "kind": "lattice", "dim": 2 }, "b": { "kind": "line" } }, { "a": { "kind": "lattice", "dim": 2 }, "b": { "kind": "line" } }],
                "budgets": { "match_steps": 20 },
                "output": out,
            }),
        );
        let args = vec!["match".into(), "--quick".into(), "--config".into(), s(&cfg)];
        let r = cli(&args.iter().map(String::as_str).collect::<Vec<_>>());
        let v = r.json();
        let a = &v["invariants"][0];
        let transcript = std::fs::read(out.join("transcript.jsonl")).unwrap_or_default();
        let first_a = String::from_utf8_lossy(&transcript)
            .lines()
            .filter_map(|l| serde_json::from_str::<Value>(l).ok())
            .find(|p| p["factor"] == "A");
        let in_order = first_a.is_some_and(|p| p["x"] == "p" && p["y"] == "p" && p["branch"] == "empty-boundary");
        let ok = r.code == 0 && a["empty_boundary"] == true && a["bijective"] == true && a["identity_pair"] == true && in_order;
        ledger.record(9, "empty-boundary branch", ok, format!("[exit {}, {} pairs on A]", r.code, a["pairs"]));
        replay.push((args, [r.stdout.clone(), transcript].concat()));
    }

    // 10. determinism: every command above, again, byte for byte
    {
        let mut same = 0;
        for (args, first) in &replay {
            let r = cli(&args.iter().map(String::as_str).collect::<Vec<_>>());
            let mut again = r.stdout.clone();
            if args[0] == "match" {
                let cfg: Value = serde_json::from_str(&std::fs::read_to_string(args.last().unwrap()).unwrap()).unwrap();
                let out = PathBuf::from(cfg["output"].as_str().unwrap());
                again.extend(std::fs::read(out.join("transcript.jsonl")).unwrap_or_default());
            }
            if &again == first {
                same += 1;
            }
        }
        ledger.record(10, "determinism", same == replay.len(), format!("[{same}/{} commands byte-identical]", replay.len()));
    }

    let failed: Vec<usize> = ledger.results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    println!("{} of {} criteria pass", ledger.results.len() - failed.len(), ledger.results.len());
    if !failed.is_empty() {
        eprintln!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
