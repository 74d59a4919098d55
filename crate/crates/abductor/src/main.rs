use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use abductor::analysis::{check_theorem_termsub, compare_with_oracle, run_generalize, CLI_CANDIDATE_CAP};
use abductor::pipeline::{compile_task, load_files, parse_fact, run_program, warnings_text, AppError, Overrides};
use abductor::service::{serve, DEFAULT_PORT};
use abductor::solver::{keep_program, SolverConfig, DEFAULT_TIMEOUT};
use abductor_core::extract::GraphJson;
use abductor_core::generalize::{GeneralizeError, GeneralizeOptions, DEFAULT_MAX_ITERS};
use abductor_core::proof_graph::{
    apply_subst, build_abstract, minimize, preimages, semires_theta, AddedFact, ProofGraph, ProofGraphJson, QueryNode,
};
use abductor_core::validate::classify_simple;
use abductor_core::{TaskSpec, Variant};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

const EXIT_USAGE: u8 = 1;
const EXIT_ORACLE_MISMATCH: u8 = 4;

#[derive(Parser)]
#[command(name = "abduce", version, about = "Abductive proof generation over ASP rule sets")]
struct Cli {
    /// Solver executable; defaults to $ABDUCTOR_SOLVER, then clingo on PATH.
    #[arg(long, global = true)]
    solver_path: Option<PathBuf>,
    /// Solver timeout in seconds.
    #[arg(long, global = true)]
    timeout: Option<f64>,
    /// Enumerate every optimal model (pass `false` to stop at one).
    #[arg(long, global = true, num_args = 0..=1, default_value_t = true, default_missing_value = "true", action = clap::ArgAction::Set)]
    all_optimal: bool,
    /// Write the program sent to the solver to this file.
    #[arg(long, global = true)]
    keep_program: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct TaskArgs {
    rules: String,
    task: String,
    /// Overrides the task's depth bound.
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    /// Extra ground user fact; repeatable.
    #[arg(long = "fact")]
    facts: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphFormat {
    Dot,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKind {
    Abstract,
    Minimal,
    Concrete,
}

#[derive(Clone, Copy, ValueEnum)]
enum Added {
    Query,
    Fact,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate; report diagnostics and task simplicity.
    Validate {
        rules: String,
        task: Option<String>,
    },
    /// Print the derived program.
    Compile {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        /// Leave out the justification rules.
        #[arg(long)]
        no_justification: bool,
    },
    /// Solve and print the optimal solution as JSON.
    Solve {
        #[command(flatten)]
        task: TaskArgs,
    },
    /// Print the justification graph of the optimal solution.
    Justify {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long, value_enum, default_value = "dot")]
        format: GraphFormat,
    },
    /// Compare the solver with brute-force abduction.
    Oracle {
        #[command(flatten)]
        task: TaskArgs,
        /// Largest candidate space the brute force will enumerate.
        #[arg(long, default_value_t = CLI_CANDIDATE_CAP)]
        cap: usize,
    },
    /// Abstract, minimal and concrete proof graphs of the query predicate.
    Analyze {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long, value_enum, default_value = "json")]
        format: GraphFormat,
        /// Graph printed with `--format dot`.
        #[arg(long, value_enum, default_value = "minimal")]
        graph: GraphKind,
        /// Concrete node to substitute, as `atom` or `atom@level`; runs the
        /// term-substitution check.
        #[arg(long, requires = "with")]
        node: Option<String>,
        /// Replacement atom for `--node`.
        #[arg(long)]
        with: Option<String>,
        /// Minimal-graph preimage of `--node` (default: the first).
        #[arg(long)]
        preimage: Option<String>,
        /// How the replacement enters the program.
        #[arg(long, value_enum, default_value = "query")]
        added: Added,
    },
    /// Replace extVar with fresh constants until none remains.
    Generalize {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
        max_iters: usize,
        /// extVar atom to instantiate first.
        #[arg(long)]
        pick: Option<String>,
    },
    /// Run the HTTP session service.
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long)]
        state_dir: Option<PathBuf>,
    },
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::parse(s).ok_or_else(|| format!("unknown variant {s} (expected res, exp or semi-res)"))
}

enum Failure {
    App(AppError),
    Exit(u8),
}

impl From<AppError> for Failure {
    fn from(e: AppError) -> Self {
        Failure::App(e)
    }
}

type CliResult = Result<(), Failure>;

struct Ctx {
    cfg: SolverConfig,
    keep: Option<PathBuf>,
}

impl TaskArgs {
    fn load(&self) -> Result<TaskSpec, AppError> {
        let facts = self.facts.iter().map(|f| parse_fact(f)).collect::<Result<Vec<_>, _>>()?;
        let ov = Overrides { depth: self.depth, variant: self.variant, facts };
        let loaded = load_files(&self.rules, &self.task, &ov)?;
        if let Some(w) = warnings_text(&loaded.warnings) {
            eprintln!("{w}");
        }
        Ok(loaded.task)
    }
}

/// Writes to stdout; a closed pipe is not an error worth a panic.
fn emit(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn print_json(v: &impl serde::Serialize) {
    emit(&format!("{}\n", serde_json::to_string_pretty(v).expect("plain data serializes")));
}

fn solve(ctx: &Ctx, task: &TaskSpec) -> Result<abductor::pipeline::Solved, AppError> {
    let program = compile_task(task, true)?;
    if let Some(p) = &ctx.keep {
        keep_program(p, &program.text).map_err(|e| AppError::Io(format!("{}: {e}", p.display())))?;
    }
    run_program(program, &ctx.cfg)
}

fn validate(rules: &str, task: Option<&str>) -> CliResult {
    match task {
        Some(t) => {
            let loaded = load_files(rules, t, &Overrides::default())?;
            let report = classify_simple(&loaded.task);
            let warnings: Vec<String> = loaded.warnings.iter().map(ToString::to_string).collect();
            for w in &warnings {
                eprintln!("{w}");
            }
            let reasons: Vec<&str> = report.violations.iter().map(|v| v.reason.as_str()).collect();
            print_json(&json!({ "valid": true, "warnings": warnings, "simple": report.is_simple, "notSimple": reasons }));
        }
        None => {
            let text = std::fs::read_to_string(rules).map_err(|e| AppError::Io(format!("{rules}: {e}")))?;
            let parsed =
                abductor_core::parse_rules(rules, &text).map_err(|d| AppError::Validation(d.to_string()))?;
            let violations = abductor_core::validate::validate_ruleset(&parsed.value);
            if !violations.is_empty() {
                let text: Vec<String> = violations.iter().map(|v| format!("{rules}: {v}")).collect();
                return Err(AppError::Validation(text.join("\n")).into());
            }
            let warnings: Vec<String> = parsed.warnings.iter().map(ToString::to_string).collect();
            print_json(&json!({ "valid": true, "warnings": warnings }));
        }
    }
    Ok(())
}

/// `atom` or `atom@level`; without a level the lowest matching node wins.
fn find_node(g: &ProofGraph, spec: &str) -> Result<QueryNode, AppError> {
    let (atom, level) = match spec.rsplit_once('@') {
        Some((a, l)) => (a.trim(), Some(l.trim().parse::<u32>().map_err(|_| AppError::Validation(format!("bad level in {spec}")))?)),
        None => (spec.trim(), None),
    };
    g.nodes
        .iter()
        .filter(|n| n.atom.to_string() == atom && level.is_none_or(|l| l == n.level))
        .min_by_key(|n| n.level)
        .cloned()
        .ok_or_else(|| AppError::Validation(format!("{spec} is not a node of the graph")))
}

#[allow(clippy::too_many_arguments)]
fn analyze(
    ctx: &Ctx,
    args: &TaskArgs,
    format: GraphFormat,
    kind: GraphKind,
    node: Option<&str>,
    with: Option<&str>,
    preimage: Option<&str>,
    added: Added,
) -> CliResult {
    let task = args.load()?;
    let query = task.query.atom().clone();
    let (g, inst) = build_abstract(&task.rules, &query.predicate, task.depth).map_err(|e| AppError::Validation(e.to_string()))?;
    let m = minimize(&g);
    let theta = semires_theta(&m, &query);
    let (c, ci) = apply_subst(&m, &inst, &theta);
    if let GraphFormat::Dot = format {
        let dot = match kind {
            GraphKind::Abstract => g.to_dot(),
            GraphKind::Minimal => m.to_dot(),
            GraphKind::Concrete => c.to_dot(),
        };
        emit(&dot);
        return Ok(());
    }
    let mut out = json!({
        "abstract": ProofGraphJson::new(&g, &inst),
        "minimal": ProofGraphJson::new(&m, &inst),
        "concrete": ProofGraphJson::new(&c, &ci),
        "theta": theta.restricted(&m.terms()).rendered(),
    });
    if let (Some(node), Some(with)) = (node, with) {
        let q_c = find_node(&c, node)?;
        let pre = preimages(&m, &theta, &q_c).map_err(|e| AppError::Validation(e.to_string()))?;
        let q_o = match preimage {
            Some(p) => find_node(&m, p)?,
            None => pre.first().cloned().ok_or_else(|| AppError::Validation(format!("{q_c} has no preimage")))?,
        };
        let q_f = QueryNode::new(parse_fact(with)?, q_c.level);
        let added = match added {
            Added::Query => AddedFact::Query,
            Added::Fact => AddedFact::UserFact,
        };
        let verdict = check_theorem_termsub(&task, &theta, &q_c, &q_o, &q_f, added, &ctx.cfg)?;
        out["termsub"] = json!({
            "qC": q_c.to_string(),
            "qO": q_o.to_string(),
            "qF": q_f.to_string(),
            "verdict": verdict,
        });
    }
    print_json(&out);
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    let mut cfg = SolverConfig { executable: cli.solver_path, all_optimal: cli.all_optimal, ..Default::default() };
    cfg.timeout = cli.timeout.map_or(DEFAULT_TIMEOUT, Duration::from_secs_f64);
    let ctx = Ctx { cfg, keep: cli.keep_program };
    match cli.command {
        Command::Validate { rules, task } => validate(&rules, task.as_deref()),
        Command::Compile { task, output, no_justification } => {
            let program = compile_task(&task.load()?, !no_justification)?;
            match output {
                Some(p) => std::fs::write(&p, &program.text).map_err(|e| AppError::Io(format!("{}: {e}", p.display())))?,
                None => emit(&program.text),
            }
            Ok(())
        }
        Command::Solve { task } => {
            let solved = solve(&ctx, &task.load()?)?;
            print_json(&solved.json());
            Ok(())
        }
        Command::Justify { task, format } => {
            let solved = solve(&ctx, &task.load()?)?;
            match format {
                GraphFormat::Dot => emit(&solved.graph.to_dot()),
                GraphFormat::Json => print_json(&GraphJson::from(&solved.graph)),
            }
            Ok(())
        }
        Command::Oracle { task, cap } => {
            let report = compare_with_oracle(&task.load()?, cap, &ctx.cfg)?;
            eprintln!("{}", report.summary);
            print_json(&report);
            if report.agree {
                Ok(())
            } else {
                Err(Failure::Exit(EXIT_ORACLE_MISMATCH))
            }
        }
        Command::Analyze { task, format, graph, node, with, preimage, added } => {
            analyze(&ctx, &task, format, graph, node.as_deref(), with.as_deref(), preimage.as_deref(), added)
        }
        Command::Generalize { task, max_iters, pick } => {
            let pick = pick.as_deref().map(parse_fact).transpose()?;
            let opts = GeneralizeOptions { max_iters, pick };
            match run_generalize(&task.load()?, &opts, &ctx.cfg) {
                Ok(g) => {
                    print_json(&g);
                    Ok(())
                }
                Err(GeneralizeError::Solve(e)) => Err(e.into()),
                Err(GeneralizeError::CapReached(n, partial)) => {
                    print_json(&partial);
                    Err(AppError::Solver(format!("extVar remains after {n} iterations")).into())
                }
                Err(e @ GeneralizeError::VariantMismatch(_)) => Err(AppError::VariantMismatch(e.to_string()).into()),
                Err(e) => Err(AppError::Validation(e.to_string()).into()),
            }
        }
        Command::Serve { port, state_dir } => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| AppError::Io(e.to_string()))?;
            rt.block_on(serve(port, state_dir, ctx.cfg)).map_err(|e| AppError::Io(e.to_string()))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Exit(code)) => ExitCode::from(code),
        Err(Failure::App(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
