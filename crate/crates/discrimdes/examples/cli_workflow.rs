//! The command-line workflow, driven in process.
//!
//! The `discrimdes` binary reads a JSON problem description and exposes the
//! solvers, checkers, and simulators as subcommands. This run writes a
//! problem file, solves it, feeds the solved design back through `verify`,
//! and sweeps a power curve to CSV, exactly as a shell session would:
//!
//!   discrimdes solve       --spec problem.json --json out.json
//!   discrimdes verify      --spec problem.json
//!   discrimdes power-curve --spec problem.json --csv curve.csv
//!
//! Exit codes: 0 success, 1 invalid request, 2 numerical failure.

use discrimdes::cli::run;
use std::fs;

fn main() {
    let dir = std::env::temp_dir().join(format!("discrimdes-workflow-{}", std::process::id()));
    fs::create_dir_all(&dir).expect("temp dir");
    let problem = dir.join("problem.json");
    let solved = dir.join("solved.json");
    let verify_spec = dir.join("verify.json");
    let curve = dir.join("curve.csv");

    fs::write(
        &problem,
        r#"{
  "design_space": {"lower": -1.0, "upper": 1.0},
  "true_model": {"polynomial": {"coefficients": [1.0, 1.0, 0.0, 1.0]}},
  "rival": {"basis": {"monomials_upto": 1}},
  "criterion": "T"
}"#,
    )
    .expect("write problem file");

    println!("$ discrimdes solve --spec problem.json --json solved.json");
    let code = run([
        "discrimdes",
        "solve",
        "--spec",
        problem.to_str().unwrap(),
        "--json",
        solved.to_str().unwrap(),
    ]);
    println!("(exit {code})\n");

    // Splice the solved design back into the problem and check it; the
    // emitted numbers survive the round trip bit for bit.
    let mut spec: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&problem).unwrap()).unwrap();
    let out: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&solved).unwrap()).unwrap();
    spec["design"] = out["design"].clone();
    fs::write(&verify_spec, spec.to_string()).unwrap();

    println!("$ discrimdes verify --spec verify.json");
    let code = run([
        "discrimdes",
        "verify",
        "--spec",
        verify_spec.to_str().unwrap(),
    ]);
    println!("(exit {code})\n");

    // Power curve for the F-test of the cubic extension under the solved
    // design: sweep the x^3 coefficient of the truth.
    spec["criterion"] = "Ds".into();
    spec["sim"] = serde_json::json!({
        "study": "power", "n": 50, "sigma2": 0.1, "reps": 300, "seed": 11
    });
    spec["sweep"] = serde_json::json!({ "coefficient": 3, "values": [0.0, 0.5, 1.0] });
    fs::write(&verify_spec, spec.to_string()).unwrap();

    println!("$ discrimdes power-curve --spec verify.json --csv curve.csv");
    let code = run([
        "discrimdes",
        "power-curve",
        "--spec",
        verify_spec.to_str().unwrap(),
        "--csv",
        curve.to_str().unwrap(),
    ]);
    println!("(exit {code})\n");
    println!("curve.csv:\n{}", fs::read_to_string(&curve).unwrap());

    // Invalid requests come back as exit 1 with a machine-readable line on
    // standard error instead of a panic.
    println!("$ discrimdes enumerate --spec verify.json   (criterion Ds)");
    let code = run([
        "discrimdes",
        "enumerate",
        "--spec",
        verify_spec.to_str().unwrap(),
    ]);
    println!("(exit {code})");

    let _ = fs::remove_dir_all(&dir);
}
