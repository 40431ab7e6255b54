use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};

use cak_core::accgame::{accepts, build_acceptance_game, Mode};
use cak_core::automaton::{automaton_from_json, automaton_to_json, Automaton};
use cak_core::carrier::Bits;
use cak_core::construct::{
    complement_aut, compile_mso, compile_mu, monotonize, project_aut, quotient_aut, simulate,
    union_aut,
};
use cak_core::corpus;
use cak_core::error::{Caps, Error};
use cak_core::game::solve_parity;
use cak_core::lifting::Lambda;
use cak_core::logic::{eval_mso, eval_mu, parse_mso, parse_mu};
use cak_core::model::{functor_from_json, model_from_json, model_to_json, LoadedModel};
use cak_core::monotone::{counterexample_demo, largest_nbhd_bisim};
use cak_core::selftest::{run_all, run_criterion, Level};
use cak_core::uniform::{translate_automaton, unravel, UniformConstruction};
use cak_core::FunctorSpec;

/// Coalgebraic automata kit: evaluate coalgebraic fixpoint and second-order
/// logics on finite models, compile formulas to parity automata, decide
/// acceptance by game solving, and run the uniform-construction machinery.
#[derive(Parser)]
#[command(name = "cak", version, about)]
struct Cli {
    /// Seed for randomized sampling (reports are deterministic per seed)
    #[arg(long, global = true, default_value_t = 0xCAC0)]
    seed: u64,
    /// Emit the run report as JSON on stdout instead of plain text
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a formula on a pointed model by direct semantics
    Eval(EvalArgs),
    /// Compile a formula into a parity automaton file
    Compile(CompileArgs),
    /// Decide acceptance of a model by an automaton via the parity game
    Accept(AcceptArgs),
    /// Apply an automaton construction (union, complement, ...)
    Construct(ConstructArgs),
    /// Translate a second-order automaton into a modal one
    Translate(TranslateArgs),
    /// Unravel a pointed model into a tree model
    Unravel(UnravelArgs),
    /// Compute the greatest (optionally global) neighborhood bisimulation
    Bisim(BisimArgs),
    /// Replay built-in demonstrations
    Demo(DemoArgs),
    /// Run the acceptance-criteria suite
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FlavorArg {
    Mu,
    Mso,
}

#[derive(Args)]
struct EvalArgs {
    /// Model file (JSON)
    #[arg(long)]
    model: PathBuf,
    /// Formula file (text)
    #[arg(long)]
    formula: PathBuf,
    #[arg(long, value_enum)]
    flavor: FlavorArg,
    /// Point of evaluation (a carrier atom)
    #[arg(long)]
    point: String,
}

#[derive(Args)]
struct CompileArgs {
    #[arg(long, value_enum)]
    flavor: FlavorArg,
    /// Formula file (text)
    #[arg(long)]
    formula: PathBuf,
    /// Functor: powerset | bag | monnbhd | monnbhdstar, or @file with a
    /// functor spec in JSON
    #[arg(long)]
    functor: String,
    /// Output automaton file
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Tree,
}

#[derive(Args)]
struct AcceptArgs {
    #[arg(long)]
    automaton: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    point: String,
    #[arg(long, value_enum, default_value = "tree")]
    mode: ModeArg,
    /// Write the constructed game graph as DOT text
    #[arg(long)]
    dump_game: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OpArg {
    Union,
    Complement,
    Monotonize,
    Project,
    Simulate,
    Quotient,
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long, value_enum)]
    op: OpArg,
    /// Input automaton file(s): one, or two for union
    inputs: Vec<PathBuf>,
    /// Chromatic variable to project away (for --op project)
    #[arg(long)]
    var: Option<String>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstructionArg {
    Powerset,
    Bag,
    Polynomial,
    Monstar,
}

#[derive(Args)]
struct TranslateArgs {
    /// Translate second-order transitions into induced modal atoms
    #[arg(long)]
    so_to_ml: bool,
    #[arg(long)]
    automaton: PathBuf,
    #[arg(long, value_enum)]
    construction: ConstructionArg,
    /// Quantifier-depth parameter
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Truncation parameter for omega-fold copies
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct UnravelArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    point: String,
    #[arg(long, value_enum)]
    construction: ConstructionArg,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long)]
    depth: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct BisimArgs {
    /// Two monotone-neighborhood model files
    models: Vec<PathBuf>,
    #[arg(long)]
    point1: String,
    #[arg(long)]
    point2: String,
    /// Additionally require the Forth/Back totality conditions
    #[arg(long)]
    global: bool,
}

#[derive(Args)]
struct DemoArgs {
    /// Demo name (counterexample)
    name: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, value_enum, default_value = "quick")]
    level: LevelArg,
    /// Run a single criterion (1..=11)
    #[arg(long)]
    criterion: Option<usize>,
}

// -------------------------------------------------------------------------
// Run reports
// -------------------------------------------------------------------------

struct Report {
    subcommand: String,
    seed: u64,
    inputs: Vec<(String, String)>,
    verdicts: Vec<(String, Json)>,
    warnings: Vec<String>,
    started: Instant,
}

impl Report {
    fn new(subcommand: &str, seed: u64) -> Report {
        Report {
            subcommand: subcommand.into(),
            seed,
            inputs: Vec::new(),
            verdicts: Vec::new(),
            warnings: Vec::new(),
            started: Instant::now(),
        }
    }

    fn input(&mut self, path: &Path, contents: &str) {
        let mut hasher = Sha256::new();
        hasher.update(contents.as_bytes());
        self.inputs
            .push((path.display().to_string(), hex::encode(hasher.finalize())));
    }

    fn verdict(&mut self, key: &str, value: Json) {
        self.verdicts.push((key.into(), value));
    }

    fn warn(&mut self, msg: String) {
        self.warnings.push(msg);
    }

    fn emit(&self, as_json: bool) {
        if as_json {
            let doc = json!({
                "subcommand": self.subcommand,
                "seed": self.seed,
                "inputs": self.inputs.iter().map(|(p, h)| json!({"path": p, "sha256": h})).collect::<Vec<_>>(),
                "verdicts": Json::Object(self.verdicts.iter().cloned().map(|(k, v)| (k, v)).collect()),
                "warnings": self.warnings,
                "elapsed_ms": self.started.elapsed().as_millis() as u64,
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("report"));
        } else {
            for (k, v) in &self.verdicts {
                match v {
                    Json::String(s) => println!("{k}: {s}"),
                    other => println!("{k}: {other}"),
                }
            }
            for w in &self.warnings {
                eprintln!("warning: {w}");
            }
        }
    }
}

fn read_input(report: &mut Report, path: &Path) -> Result<String, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    report.input(path, &text);
    Ok(text)
}

fn caps_from_env() -> Caps {
    match std::env::var("CAK_CAPS").ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(factor) if factor > 1 => Caps::scaled(factor),
        _ => Caps::default(),
    }
}

fn parse_functor_arg(s: &str) -> Result<FunctorSpec, Error> {
    if let Some(path) = s.strip_prefix('@') {
        let text = fs::read_to_string(path)?;
        let j: Json = serde_json::from_str(&text)?;
        return functor_from_json(&j);
    }
    match s {
        "powerset" => Ok(FunctorSpec::Powerset),
        "bag" => Ok(FunctorSpec::Bag),
        "monnbhd" => Ok(FunctorSpec::MonNbhd),
        "monnbhdstar" => Ok(FunctorSpec::MonNbhdStar),
        other => Err(Error::Malformed(format!(
            "unknown functor {other}; use powerset|bag|monnbhd|monnbhdstar or @file"
        ))),
    }
}

fn construction_for(
    arg: ConstructionArg,
    functor: &FunctorSpec,
    k: usize,
    m: usize,
) -> Result<UniformConstruction, Error> {
    let ok = match arg {
        ConstructionArg::Powerset => *functor == FunctorSpec::Powerset,
        ConstructionArg::Bag => *functor == FunctorSpec::Bag,
        ConstructionArg::Monstar => *functor == FunctorSpec::MonNbhdStar,
        ConstructionArg::Polynomial => !matches!(
            functor,
            FunctorSpec::Powerset | FunctorSpec::Bag | FunctorSpec::MonNbhd | FunctorSpec::MonNbhdStar
        ),
    };
    if !ok {
        return Err(Error::Malformed(format!(
            "construction choice does not match the functor {functor}"
        )));
    }
    Ok(UniformConstruction::standard(functor.clone(), m, k))
}

/// Load an automaton file, rebuilding induced modal atoms when the file
/// carries a star section.
fn load_automaton(text: &str) -> Result<Automaton, Error> {
    let doc: Json = serde_json::from_str(text)?;
    let aut = automaton_from_json(text)?;
    if let Some(star) = doc.get("star") {
        let k = star.get("k").and_then(|v| v.as_u64()).unwrap_or(1) as usize;
        let m = star.get("m").and_then(|v| v.as_u64()).unwrap_or(2) as usize;
        let construction = UniformConstruction::standard(aut.functor.clone(), m, k);
        return translate_automaton(&aut, &construction);
    }
    Ok(aut)
}

// -------------------------------------------------------------------------
// Subcommand bodies
// -------------------------------------------------------------------------

fn run(cli: Cli) -> Result<(Report, bool), Error> {
    let caps = caps_from_env();
    match cli.command {
        Command::Eval(args) => {
            let mut report = Report::new("eval", cli.seed);
            let model_text = read_input(&mut report, &args.model)?;
            let formula_text = read_input(&mut report, &args.formula)?;
            let loaded = model_from_json(&model_text)?;
            let point = loaded.model.carrier.index_of(&args.point)?;
            let lam = Lambda::standard(&loaded.model.functor);
            let value = match args.flavor {
                FlavorArg::Mu => {
                    let phi = parse_mu(formula_text.trim())?;
                    eval_mu(&phi, &loaded.model, point, &lam)?
                }
                FlavorArg::Mso => {
                    let phi = parse_mso(formula_text.trim())?;
                    eval_mso(&phi, &loaded.model, point, &lam, caps.quantifier)?
                }
            };
            report.verdict("satisfied", json!(value));
            Ok((report, true))
        }
        Command::Compile(args) => {
            let mut report = Report::new("compile", cli.seed);
            let formula_text = read_input(&mut report, &args.formula)?;
            let functor = parse_functor_arg(&args.functor)?;
            let lam = Lambda::standard(&functor);
            let aut = match args.flavor {
                FlavorArg::Mu => compile_mu(&parse_mu(formula_text.trim())?, &functor, &lam)?,
                FlavorArg::Mso => {
                    compile_mso(&parse_mso(formula_text.trim())?, &functor, &lam, &caps)?
                }
            };
            fs::write(&args.output, automaton_to_json(&aut))?;
            report.verdict("states", json!(aut.states.len()));
            report.verdict("output", json!(args.output.display().to_string()));
            Ok((report, true))
        }
        Command::Accept(args) => {
            let mut report = Report::new("accept", cli.seed);
            let aut_text = read_input(&mut report, &args.automaton)?;
            let model_text = read_input(&mut report, &args.model)?;
            let aut = load_automaton(&aut_text)?;
            let loaded = model_from_json(&model_text)?;
            let point = loaded.model.carrier.index_of(&args.point)?;
            let (mode, frame): (Mode, Option<Vec<Bits>>) = match args.mode {
                ModeArg::Full => (Mode::Full, None),
                ModeArg::Tree => {
                    let LoadedModel { frame, .. } = &loaded;
                    (
                        Mode::Tree,
                        Some(frame.clone().ok_or_else(|| {
                            Error::Malformed("tree mode requires a frame in the model file".into())
                        })?),
                    )
                }
            };
            if let Some(dot_path) = &args.dump_game {
                let built = build_acceptance_game(
                    &aut,
                    &loaded.model,
                    frame.as_deref(),
                    point,
                    mode,
                    &caps,
                    true,
                )?;
                fs::write(dot_path, built.game.to_dot())?;
                let solved = solve_parity(&built.game);
                report.verdict("positions", json!(built.game.len()));
                report.verdict("accepted", json!(solved.exists_wins(built.start_position)));
            } else {
                let verdict = accepts(&aut, &loaded.model, frame.as_deref(), point, mode, &caps)?;
                report.verdict("accepted", json!(verdict));
            }
            Ok((report, true))
        }
        Command::Construct(args) => {
            let mut report = Report::new("construct", cli.seed);
            let mut autos = Vec::new();
            for p in &args.inputs {
                let text = read_input(&mut report, p)?;
                autos.push(load_automaton(&text)?);
            }
            let out = match args.op {
                OpArg::Union => {
                    if autos.len() != 2 {
                        return Err(Error::Malformed("union expects two input automata".into()));
                    }
                    union_aut(&autos[0], &autos[1])?
                }
                OpArg::Complement => one_input(&autos, "complement").map(complement_aut)??,
                OpArg::Monotonize => one_input(&autos, "monotonize").map(monotonize)??,
                OpArg::Simulate => simulate(one_input(&autos, "simulate")?, &caps)?,
                OpArg::Quotient => quotient_aut(one_input(&autos, "quotient")?),
                OpArg::Project => {
                    let var = args
                        .var
                        .as_deref()
                        .ok_or_else(|| Error::Malformed("project requires --var".into()))?;
                    project_aut(one_input(&autos, "project")?, var)?
                }
            };
            fs::write(&args.output, automaton_to_json(&out))?;
            report.verdict("states", json!(out.states.len()));
            report.verdict("output", json!(args.output.display().to_string()));
            Ok((report, true))
        }
        Command::Translate(args) => {
            let mut report = Report::new("translate", cli.seed);
            if !args.so_to_ml {
                return Err(Error::Malformed("only --so-to-ml is available".into()));
            }
            let text = read_input(&mut report, &args.automaton)?;
            let aut = automaton_from_json(&text)?;
            let construction = construction_for(args.construction, &aut.functor, args.k, args.m)?;
            // validate the translation up front
            let translated = translate_automaton(&aut, &construction)?;
            // the output file keeps the second-order transitions plus the
            // construction parameters, so it reloads exactly
            let mut doc: Json = serde_json::from_str(&automaton_to_json(&aut))?;
            doc.as_object_mut().expect("object").insert(
                "star".into(),
                json!({"k": args.k, "m": args.m}),
            );
            fs::write(&args.output, serde_json::to_string_pretty(&doc)?)?;
            report.verdict("states", json!(translated.states.len()));
            report.verdict("liftings", json!(translated.lambda.names().len()));
            report.verdict("output", json!(args.output.display().to_string()));
            Ok((report, true))
        }
        Command::Unravel(args) => {
            let mut report = Report::new("unravel", cli.seed);
            let text = read_input(&mut report, &args.model)?;
            let loaded = model_from_json(&text)?;
            let point = loaded.model.carrier.index_of(&args.point)?;
            let construction =
                construction_for(args.construction, &loaded.model.functor, args.k, args.m)?;
            let u = unravel(&loaded.model, point, &construction, args.depth)?;
            if !u.is_total() {
                report.warn("frontier nodes received the empty-support leaf value".into());
            }
            fs::write(
                &args.output,
                model_to_json(&u.tree.model, Some(u.tree.root), Some(&u.tree.frame)),
            )?;
            report.verdict("nodes", json!(u.tree.model.carrier.len()));
            report.verdict("total", json!(u.is_total()));
            report.verdict("output", json!(args.output.display().to_string()));
            Ok((report, true))
        }
        Command::Bisim(args) => {
            let mut report = Report::new("bisim", cli.seed);
            if args.models.len() != 2 {
                return Err(Error::Malformed("bisim expects two model files".into()));
            }
            let t1 = read_input(&mut report, &args.models[0])?;
            let t2 = read_input(&mut report, &args.models[1])?;
            let m1 = model_from_json(&t1)?.model;
            let m2 = model_from_json(&t2)?.model;
            let p1 = m1.carrier.index_of(&args.point1)?;
            let p2 = m2.carrier.index_of(&args.point2)?;
            let rel = largest_nbhd_bisim(&m1, &m2, args.global)?;
            match rel {
                None => {
                    report.verdict("global_bisimulation_exists", json!(false));
                    report.verdict("related", json!(false));
                }
                Some(pairs) => {
                    let related = pairs.contains(&(p1, p2));
                    report.verdict("related", json!(related));
                    let printable: Vec<String> = pairs
                        .iter()
                        .map(|&(a, b)| {
                            format!("{}~{}", m1.carrier.atom(a), m2.carrier.atom(b))
                        })
                        .collect();
                    report.verdict("relation", json!(printable));
                }
            }
            Ok((report, true))
        }
        Command::Demo(args) => {
            let mut report = Report::new("demo", cli.seed);
            if args.name != "counterexample" {
                return Err(Error::Malformed(format!("unknown demo {}", args.name)));
            }
            let demo = counterexample_demo()?;
            for (i, step) in demo.steps.iter().enumerate() {
                report.verdict(
                    &format!("step{}", i + 1),
                    json!({
                        "label": step.label,
                        "outcome": step.outcome,
                        "ok": step.ok,
                    }),
                );
            }
            report.verdict("all_ok", json!(demo.all_ok()));
            Ok((report, demo.all_ok()))
        }
        Command::Selftest(args) => {
            let mut report = Report::new("selftest", cli.seed);
            let level = match args.level {
                LevelArg::Quick => Level::Quick,
                LevelArg::Full => Level::Full,
            };
            let results = match args.criterion {
                Some(id) => vec![run_criterion(id, level, cli.seed)?],
                None => run_all(level, cli.seed)?,
            };
            let mut all_pass = true;
            for r in &results {
                println!("{}", r.line());
                all_pass &= r.pass;
                report.verdict(
                    &format!("criterion{}", r.id),
                    json!({"name": r.name, "pass": r.pass, "details": r.details}),
                );
            }
            report.verdict("all_pass", json!(all_pass));
            Ok((report, all_pass))
        }
    }
}

fn one_input<'a>(autos: &'a [Automaton], op: &str) -> Result<&'a Automaton, Error> {
    if autos.len() != 1 {
        return Err(Error::Malformed(format!("{op} expects exactly one input automaton")));
    }
    Ok(&autos[0])
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let as_json = cli.json;
    match run(cli) {
        Ok((report, ok)) => {
            report.emit(as_json);
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_cap() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

// keep corpus linked for selftest sampling docs
#[allow(dead_code)]
fn _corpus_witness() {
    let _ = corpus::tree_shapes(1);
}
