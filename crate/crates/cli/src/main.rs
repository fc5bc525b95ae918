//! `dynperc`: simulate the coupled chain, run oracle checks and experiments,
//! validate configuration files and print output schemas.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use dynperc::dynamics::{burn_in, run, write_event_log, CoupledState, History, RngStream, RunOptions, RNG_ALGORITHM};
use dynperc::experiments::{
    all_schemas, run_experiment, write_outputs, ExperimentConfig, ExperimentKind, CODE_VERSION, MANIFEST_TABLE,
    SEED_RULE,
};
use dynperc::observables::{interface_of, pivotal, pivotal_of};
use dynperc::oracle::{
    enumerate_conditioned, exact_stationary, pivotal_bruteforce, stationary_chain_check, y_detailed_balance_defect,
    ChainCheckOptions,
};
use dynperc::{BoxLattice, Config};

/// Environment variable naming the default output directory.
const OUTPUT_DIR_ENV: &str = "DYNPERC_OUTPUT_DIR";

/// Marginal total-variation bound for `oracle --check stationary`.
const EXACT_TV_TOLERANCE: f64 = 1e-10;
/// Detailed-balance defect bound for `oracle --check conditioned`.
const BALANCE_TOLERANCE: f64 = 1e-12;

#[derive(Parser, Debug)]
#[command(name = "dynperc", version, about = "Coupled dynamical percolation in a box")]
struct Cli {
    /// More progress output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count, conflicts_with = "quiet")]
    verbose: u8,
    /// Only errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the coupled chain and write a run summary and manifest.
    Simulate(SimulateArgs),
    /// Check the implementation against exact computations on tiny boxes.
    Oracle(OracleArgs),
    /// Run a statistical experiment; writes CSV, JSON summary and manifest.
    Experiment(ExperimentArgs),
    /// Check a configuration file and print its normalized form.
    Validate(ValidateArgs),
    /// Print the CSV and JSON schemas of every experiment.
    EmitSchema(EmitSchemaArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct BoxArgs {
    /// Dimension.
    #[arg(short = 'd', long = "dim")]
    d: Option<usize>,
    /// Side length of the box [0, L]^d.
    #[arg(short = 'L', long = "side")]
    side: Option<usize>,
    /// Edge-opening probability.
    #[arg(short = 'p', long = "p")]
    p: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    lattice: BoxArgs,
    /// Steps after burn-in.
    #[arg(long)]
    steps: Option<u64>,
    /// Burn-in multiplier c_b (0 disables burn-in).
    #[arg(long = "burn-in")]
    burn_in: Option<f64>,
    /// Check the coupling invariants every this many steps (0 disables).
    #[arg(long = "check-every")]
    check_every: Option<u64>,
    /// Also write the post-burn-in update log as CSV.
    #[arg(long)]
    events: bool,
    /// TOML file with the same keys; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OracleCheck {
    /// Exact stationary vector of the coupled kernel against its marginals.
    Stationary,
    /// Enumerated conditioned law and detailed balance of the Y kernel.
    Conditioned,
    /// Pivotal extraction against brute force on random configurations.
    Pivotal,
    /// Empirical chain against the exact stationary law.
    Chain,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long, value_enum)]
    check: OracleCheck,
    #[command(flatten)]
    lattice: BoxArgs,
    /// Chain steps for `chain`.
    #[arg(long)]
    steps: Option<u64>,
    /// Random configurations for `pivotal`.
    #[arg(long)]
    samples: Option<u64>,
    /// Also write the report and a manifest into this directory.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Experiment name; optional when the config names one.
    name: Option<ExperimentKind>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    lattice: BoxArgs,
    #[arg(long)]
    replicas: Option<u64>,
    /// Samples (windows, for speed) per replica.
    #[arg(long)]
    samples: Option<u64>,
    /// Burn-in multiplier c_b.
    #[arg(long = "burn-in")]
    burn_in: Option<f64>,
    /// Steps between measurements; 0 means one sweep.
    #[arg(long)]
    cadence: Option<u64>,
    /// Comma-separated tail thresholds.
    #[arg(long = "ell-grid", value_delimiter = ',')]
    ell_grid: Option<Vec<f64>>,
    /// Comma-separated lags for speed.
    #[arg(long, value_delimiter = ',')]
    lags: Option<Vec<u64>>,
    #[arg(long = "window-c")]
    window_c: Option<f64>,
    /// Triples per replica for stp-validity.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long = "max-lookback")]
    max_lookback: Option<u64>,
    /// Output directory [default: $DYNPERC_OUTPUT_DIR, else .].
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Worker threads for replicas [default: all cores].
    #[arg(short, long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    config: PathBuf,
}

#[derive(Args, Debug)]
struct EmitSchemaArgs {
    /// Restrict to one experiment.
    #[arg(long)]
    experiment: Option<ExperimentKind>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn runtime(msg: impl ToString) -> Failure {
    Failure::Runtime(msg.to_string())
}

struct Ui {
    verbose: u8,
    quiet: bool,
}

impl Ui {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn progress(&self, msg: impl AsRef<str>) {
        if self.verbose > 0 && !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let ui = Ui {
        verbose: cli.verbose,
        quiet: cli.quiet,
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a, &ui),
        Command::Oracle(a) => oracle(a, &ui),
        Command::Experiment(a) => experiment(a, &ui),
        Command::Validate(a) => validate(a),
        Command::EmitSchema(a) => emit_schema(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn output_dir(flag: Option<PathBuf>, from_config: Option<PathBuf>) -> PathBuf {
    flag.or(from_config)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_text(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Outcome {
    std::fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))
}

fn lattice(d: usize, side: usize) -> Result<BoxLattice, Failure> {
    BoxLattice::new(d, side).map_err(|e| usage(format!("invalid box: {e}")))
}

fn check_p(p: f64) -> Outcome {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(usage(format!("invalid value {p} for '-p': must lie in (0, 1)")))
    }
}

/// A `[manifest]` table describing how a file set was produced.
fn manifest_table(extra: &[(&str, String)]) -> toml::Table {
    let mut t = toml::Table::new();
    t.insert("code_version".into(), CODE_VERSION.into());
    t.insert("rng_algorithm".into(), RNG_ALGORITHM.into());
    t.insert("seed_rule".into(), SEED_RULE.into());
    for (k, v) in extra {
        t.insert((*k).into(), v.clone().into());
    }
    t
}

fn with_manifest<T: Serialize>(body: &T, extra: &[(&str, String)]) -> String {
    let mut doc = toml::Table::new();
    doc.insert(MANIFEST_TABLE.into(), manifest_table(extra).into());
    format!(
        "{}\n{}",
        toml::to_string(body).expect("config serializes"),
        toml::to_string(&doc).expect("manifest serializes")
    )
}

/// Parameters of a `simulate` run; also the layout of its config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    d: usize,
    #[serde(rename = "L")]
    side: usize,
    p: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_steps")]
    steps: u64,
    #[serde(default)]
    burn_in: f64,
    #[serde(default)]
    check_every: u64,
    #[serde(default)]
    events: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<PathBuf>,
}

fn default_steps() -> u64 {
    100_000
}

fn read_config_table(path: &Path) -> Result<toml::Table, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| usage(format!("{}: {}", path.display(), e.to_string().trim_end())))?;
    table.remove(MANIFEST_TABLE);
    Ok(table)
}

fn simulate_config(a: &SimulateArgs) -> Result<SimulateConfig, Failure> {
    let mut table = match &a.config {
        Some(path) => read_config_table(path)?,
        None => toml::Table::new(),
    };
    let mut set = |k: &str, v: Option<toml::Value>| {
        if let Some(v) = v {
            table.insert(k.into(), v);
        }
    };
    let l = &a.lattice;
    set("d", l.d.map(|v| toml::Value::Integer(v as i64)));
    set("L", l.side.map(|v| toml::Value::Integer(v as i64)));
    set("p", l.p.map(toml::Value::Float));
    set("seed", l.seed.map(|v| toml::Value::Integer(v as i64)));
    set("steps", a.steps.map(|v| toml::Value::Integer(v as i64)));
    set("burn_in", a.burn_in.map(toml::Value::Float));
    set("check_every", a.check_every.map(|v| toml::Value::Integer(v as i64)));
    if a.events {
        set("events", Some(toml::Value::Boolean(true)));
    }
    for (key, flag) in [("d", "-d"), ("L", "-L"), ("p", "-p")] {
        if !table.contains_key(key) {
            return Err(usage(format!("missing required value for '{flag}' (give the flag or a config file)")));
        }
    }
    let origin = a.config.as_ref().map_or("flags".to_string(), |p| p.display().to_string());
    let cfg: SimulateConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| usage(format!("{origin}: {}", e.to_string().trim_end())))?;
    check_p(cfg.p)?;
    if cfg.burn_in != 0.0 && !(cfg.burn_in >= 1.0 && cfg.burn_in.is_finite()) {
        return Err(usage(format!("invalid value {} for '--burn-in': 0 or at least 1", cfg.burn_in)));
    }
    Ok(cfg)
}

fn simulate(a: SimulateArgs, ui: &Ui) -> Outcome {
    let cfg = simulate_config(&a)?;
    let lat = lattice(cfg.d, cfg.side)?;
    let dir = output_dir(a.output.clone(), cfg.output.clone());
    create_dir(&dir)?;
    let mut rng = RngStream::new(cfg.seed);
    let mut state = CoupledState::init(&lat, cfg.p, &mut rng).map_err(runtime)?;
    let burn = if cfg.burn_in > 0.0 {
        ui.progress("burning in");
        burn_in(&mut state, cfg.burn_in, &mut rng).map_err(runtime)?
    } else {
        0
    };
    let start = state.t();
    let mut history = cfg.events.then(|| History::new(&state, cfg.steps, cfg.steps.max(1)));
    ui.progress(format!("running {} steps", cfg.steps));
    let options = RunOptions {
        cadence: 0,
        check_every: cfg.check_every,
    };
    let summary = run(&mut state, cfg.steps, &mut rng, options, &mut [], history.as_mut()).map_err(runtime)?;
    let stem = format!("simulate_{}d_L{}_p{}_seed{}", cfg.d, cfg.side, cfg.p, cfg.seed);
    let mut outputs = vec![("summary", format!("{stem}.json"))];
    if let Some(h) = &history {
        let path = dir.join(format!("{stem}_events.csv"));
        let f = std::fs::File::create(&path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        let mut w = std::io::BufWriter::new(f);
        write_event_log(&mut w, h.events_between(start, state.t()))
            .and_then(|()| w.flush())
            .map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        outputs.push(("events", format!("{stem}_events.csv")));
    }
    let report = json!({
        "config": cfg,
        "code_version": CODE_VERSION,
        "burn_in_steps": burn,
        "run": summary,
        "final": {
            "t": state.t(),
            "x_open": state.x().open_count(),
            "y_open": state.y().open_count(),
            "pivotal_count": pivotal_of(&state).len(),
            "interface_count": interface_of(&state).len(),
            "rng_position": rng.position() as u64,
        },
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_text(&dir.join(format!("{stem}.json")), &text)?;
    let manifest = dir.join(format!("{stem}.manifest.toml"));
    let extra: Vec<(&str, String)> = outputs.iter().map(|(k, v)| (*k, v.clone())).collect();
    write_text(&manifest, &with_manifest(&cfg, &extra))?;
    ui.say(format!(
        "{} steps: opened {}, closed {}, vetoed {}; |P| = {}",
        summary.steps,
        summary.opened,
        summary.closed,
        summary.vetoed,
        pivotal_of(&state).len()
    ));
    ui.say(format!("wrote {}", manifest.display()));
    Ok(())
}

fn require_box(l: &BoxArgs) -> Result<(usize, usize, f64), Failure> {
    let d = l.d.ok_or_else(|| usage("missing required value for '-d'"))?;
    let side = l.side.ok_or_else(|| usage("missing required value for '-L'"))?;
    let p = l.p.ok_or_else(|| usage("missing required value for '-p'"))?;
    check_p(p)?;
    Ok((d, side, p))
}

fn oracle(a: OracleArgs, ui: &Ui) -> Outcome {
    let (d, side, p) = require_box(&a.lattice)?;
    if a.steps.is_some() && a.check != OracleCheck::Chain {
        return Err(usage("'--steps' only applies to '--check chain'"));
    }
    if a.samples.is_some() && a.check != OracleCheck::Pivotal {
        return Err(usage("'--samples' only applies to '--check pivotal'"));
    }
    let lat = lattice(d, side)?;
    let seed = a.lattice.seed.unwrap_or(0);
    let (pass, report) = match a.check {
        OracleCheck::Stationary => {
            let s = exact_stationary(&lat, p).map_err(runtime)?;
            let pass = s.y_marginal_tv < EXACT_TV_TOLERANCE && s.x_marginal_tv < EXACT_TV_TOLERANCE;
            (
                pass,
                json!({
                    "states": s.law.len(),
                    "iterations": s.iterations,
                    "residual": s.residual,
                    "y_marginal_tv": s.y_marginal_tv,
                    "x_marginal_tv": s.x_marginal_tv,
                    "tolerance": EXACT_TV_TOLERANCE,
                }),
            )
        }
        OracleCheck::Conditioned => {
            let c = enumerate_conditioned(&lat, p).map_err(runtime)?;
            let defect = y_detailed_balance_defect(&lat, p).map_err(runtime)?;
            let mass = c.law.total_mass();
            (
                defect < BALANCE_TOLERANCE && (mass - 1.0).abs() < BALANCE_TOLERANCE,
                json!({
                    "states": c.law.len(),
                    "disconnection_probability": c.disconnection_probability,
                    "total_mass": mass,
                    "detailed_balance_defect": defect,
                    "tolerance": BALANCE_TOLERANCE,
                }),
            )
        }
        OracleCheck::Pivotal => {
            let n = a.samples.unwrap_or(1000);
            let mut rng = RngStream::new(seed);
            let (mut tested, mut equal, mut attempts) = (0u64, 0u64, 0u64);
            while tested < n && attempts < 1000 * n.max(1) {
                attempts += 1;
                let bits = (0..lat.edge_count()).map(|_| rng.draw_coin(p)).collect();
                let cfg = Config::from_bits(&lat, bits).expect("length matches");
                let Ok(fast) = pivotal(&lat, &cfg) else { continue };
                tested += 1;
                equal += u64::from(fast == pivotal_bruteforce(&lat, &cfg).map_err(runtime)?);
            }
            (
                tested > 0 && equal == tested,
                json!({"tested": tested, "equal": equal, "attempts": attempts}),
            )
        }
        OracleCheck::Chain => {
            let steps = a.steps.unwrap_or(1_000_000);
            let r = stationary_chain_check(&lat, p, steps, seed, ChainCheckOptions::default()).map_err(runtime)?;
            (r.pass, serde_json::to_value(&r).expect("report serializes"))
        }
    };
    let check = a.check.to_possible_value().expect("named").get_name().to_string();
    let full = json!({"check": check, "d": d, "L": side, "p": p, "seed": seed, "pass": pass, "report": report});
    let text = serde_json::to_string_pretty(&full).expect("report serializes");
    ui.say(&text);
    if let Some(dir) = a.output {
        create_dir(&dir)?;
        let stem = format!("oracle_{check}_{d}d_L{side}_p{p}_seed{seed}");
        write_text(&dir.join(format!("{stem}.json")), &(text + "\n"))?;
        #[derive(Serialize)]
        struct OracleManifest<'a> {
            check: &'a str,
            d: usize,
            #[serde(rename = "L")]
            side: usize,
            p: f64,
            seed: u64,
            #[serde(skip_serializing_if = "Option::is_none")]
            steps: Option<u64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            samples: Option<u64>,
        }
        let body = OracleManifest {
            check: &check,
            d,
            side,
            p,
            seed,
            steps: a.steps,
            samples: a.samples,
        };
        write_text(
            &dir.join(format!("{stem}.manifest.toml")),
            &with_manifest(&body, &[("report", format!("{stem}.json"))]),
        )?;
    }
    if pass {
        Ok(())
    } else {
        Err(runtime(format!("oracle check `{check}` failed")))
    }
}

fn experiment_config(a: &ExperimentArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| usage(e.to_string()))?,
        None => {
            let kind = a
                .name
                .ok_or_else(|| usage("missing experiment name (give it or a config file)"))?;
            let (d, side, p) = require_box(&a.lattice)?;
            ExperimentConfig::new(kind, d, side, p)
        }
    };
    if let Some(k) = a.name {
        cfg.experiment = k;
    }
    let l = &a.lattice;
    macro_rules! apply {
        ($($src:expr => $dst:ident),* $(,)?) => {
            $(if let Some(v) = $src.clone() { cfg.$dst = v; })*
        };
    }
    apply!(
        l.d => d, l.side => side, l.p => p, l.seed => seed,
        a.replicas => replicas, a.samples => samples, a.burn_in => burn_in, a.cadence => cadence,
        a.ell_grid => ell_grid, a.lags => lags, a.window_c => window_c, a.trials => trials,
        a.max_lookback => max_lookback,
    );
    if let Some(o) = &a.output {
        cfg.output = Some(o.clone());
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn experiment(a: ExperimentArgs, ui: &Ui) -> Outcome {
    let cfg = experiment_config(&a)?;
    let dir = output_dir(a.output.clone(), cfg.output.clone());
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = a.jobs {
        if j == 0 {
            return Err(usage("invalid value 0 for '--jobs': must be at least 1"));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(runtime)?;
    ui.progress(format!("running {} ({})", cfg.experiment, cfg.file_stem()));
    let out = pool.install(|| run_experiment(&cfg)).map_err(runtime)?;
    let paths = write_outputs(&out, &dir).map_err(runtime)?;
    ui.say(format!("{}: {} records", cfg.experiment, out.rows.len()));
    for p in [&paths.csv, &paths.summary, &paths.manifest] {
        ui.say(format!("wrote {}", p.display()));
    }
    Ok(())
}

fn validate(a: ValidateArgs) -> Outcome {
    let cfg = ExperimentConfig::load(&a.config).map_err(|e| usage(e.to_string()))?;
    let normalized = cfg.normalized().map_err(|e| usage(e.to_string()))?;
    print!("{}", normalized.to_toml_string());
    Ok(())
}

fn emit_schema(a: EmitSchemaArgs) -> Outcome {
    let schemas: Vec<_> = all_schemas()
        .into_iter()
        .filter(|s| a.experiment.is_none_or(|k| k.as_str() == s.experiment))
        .collect();
    let doc = json!({"code_version": CODE_VERSION, "experiments": schemas});
    println!("{}", serde_json::to_string_pretty(&doc).expect("schemas serialize"));
    Ok(())
}
