use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use hybrid_iss::lyapunov::{check_sandwich, check_subsystem_flow, check_subsystem_jump, CheckReport, Verdict as CheckVerdict};
use hybrid_iss::pipeline::{
    dwell_region, run_pipeline, simulate_outcome, validate_by_simulation, ModeChoice, NetworkSpec, RunOptions,
    ValidateOptions,
};
use hybrid_iss::system::csv_columns;

const INPUT_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "hybrid-iss", version, about = "Small-gain ISS certification for interconnected hybrid systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Adt,
    Radt,
    Auto,
}

#[derive(Subcommand)]
enum Command {
    /// Run the certification pipeline and print the certificate JSON.
    Certify {
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        mode: Mode,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also simulate this many trajectories and attach the report.
        #[arg(long)]
        validate: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simulate the (augmented) network and write one CSV per trajectory.
    Simulate {
        spec: PathBuf,
        #[arg(long, default_value_t = 1)]
        traj: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Falsify the per-subsystem certificates of a spec.
    CheckLyap {
        spec: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Dwell-time region for composite rates `c` and `d`.
    Region {
        #[arg(allow_negative_numbers = true)]
        c: f64,
        #[arg(allow_negative_numbers = true)]
        d: f64,
    },
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(INPUT_ERROR)
}

fn load(path: &PathBuf) -> Result<NetworkSpec, String> {
    let src = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    NetworkSpec::from_json(&src).map_err(|e| e.to_string())
}

fn emit(value: &Value, out: Option<&PathBuf>) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())? + "\n";
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn certify(spec: &PathBuf, mode: Mode, out: Option<PathBuf>, validate: Option<usize>, seed: Option<u64>) -> ExitCode {
    let spec = match load(spec) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let opts = RunOptions {
        mode: match mode {
            Mode::Adt => ModeChoice::Adt,
            Mode::Radt => ModeChoice::Radt,
            Mode::Auto => ModeChoice::Auto,
        },
        ..RunOptions::default()
    };
    let outcome = match run_pipeline(&spec, &opts) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    let verdict = outcome.certificate.verdict;
    let mut report = serde_json::to_value(&outcome.certificate).expect("certificate serializes");
    if let Some(n) = validate {
        if verdict.certified() {
            let mut vo = ValidateOptions::from_spec(&spec);
            vo.trajectories = n;
            if let Some(s) = seed {
                vo.seed = s;
            }
            match validate_by_simulation(&outcome, &spec, &vo) {
                Ok(rep) => report["validation"] = serde_json::to_value(rep).expect("report serializes"),
                Err(e) => return fail(e),
            }
        } else {
            eprintln!("skipping validation: verdict is {verdict:?}");
        }
    }
    if let Err(e) = emit(&report, out.as_ref()) {
        return fail(e);
    }
    for line in &outcome.certificate.summary {
        eprintln!("{line}");
    }
    ExitCode::from(verdict.exit_code() as u8)
}

fn simulate(spec_path: &PathBuf, traj: usize, seed: u64, csv: Option<PathBuf>) -> ExitCode {
    let spec = match load(spec_path) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let outcome = match run_pipeline(&spec, &RunOptions::default()) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    let mut vo = ValidateOptions::from_spec(&spec);
    vo.trajectories = traj;
    vo.seed = seed;
    let (sys, trajs) = match simulate_outcome(&outcome, &spec, &vo) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    if let Some(dir) = &csv {
        if let Err(e) = std::fs::create_dir_all(dir) {
            return fail(format!("{}: {e}", dir.display()));
        }
    }
    let (states, inputs) = csv_columns(&sys);
    let mut code = ExitCode::SUCCESS;
    for (i, t) in trajs.iter().enumerate() {
        match t {
            Ok(t) => {
                if let Some(dir) = &csv {
                    let path = dir.join(format!("traj_{i:04}.csv"));
                    if let Err(e) = std::fs::write(&path, t.to_csv(&states, &inputs)) {
                        return fail(format!("{}: {e}", path.display()));
                    }
                }
                let end = t.len() - 1;
                let line = json!({
                    "trajectory": i,
                    "samples": t.len(),
                    "jumps": t.jumps.len(),
                    "end": t.end,
                    "final_t": t.times[end],
                    "final_state": t.last_state(),
                });
                println!("{line}");
            }
            Err(e) => {
                println!("{}", json!({ "trajectory": i, "error": e.to_string() }));
                code = ExitCode::from(1);
            }
        }
    }
    code
}

fn check_lyap(spec_path: &PathBuf, samples: Option<usize>) -> ExitCode {
    let mut spec = match load(spec_path) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    if let Some(n) = samples {
        spec.samples = n;
    }
    let net = spec.interconnection();
    let sys = match net.compile() {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let certs = spec.certificates();
    let plan = spec.plan();
    let mut results = Vec::new();
    let mut worst = 0u8;
    for i in 0..certs.len() {
        let reports: [(&str, Result<CheckReport, _>); 3] = [
            ("flow", check_subsystem_flow(&sys, &certs, i, &plan)),
            ("jump", check_subsystem_jump(&sys, &certs, i, &plan)),
            ("sandwich", check_sandwich(&sys, &certs[i], Some(i), &plan)),
        ];
        for (what, rep) in reports {
            let rep = match rep {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            worst = worst.max(match rep.verdict {
                CheckVerdict::Pass => 0,
                CheckVerdict::Inconclusive => 1,
                CheckVerdict::Fail => 2,
            });
            let mut v = serde_json::to_value(&rep).expect("report serializes");
            v["subsystem"] = json!(i + 1);
            v["condition"] = json!(what);
            results.push(v);
        }
    }
    if let Err(e) = emit(&Value::Array(results), None) {
        return fail(e);
    }
    ExitCode::from(worst)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(INPUT_ERROR);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match cli.command {
        Command::Certify { spec, mode, out, validate, seed } => certify(&spec, mode, out, validate, seed),
        Command::Simulate { spec, traj, seed, csv } => simulate(&spec, traj, seed, csv),
        Command::CheckLyap { spec, samples } => check_lyap(&spec, samples),
        Command::Region { c, d } => {
            if !(c.is_finite() && d.is_finite()) {
                return fail("rates must be finite");
            }
            let region = dwell_region(c, d);
            let v = json!({ "c": c, "d": d, "region": region, "default_choice": region.default_choice() });
            match emit(&v, None) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(e),
            }
        }
    }
}
