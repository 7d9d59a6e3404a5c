//! Command-line front end. Results go to standard output, diagnostics and
//! errors to standard error.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::assist::{Diagnostic, Suggestion};
use crate::bench::{run_benchmark, BenchConfig};
use crate::error::EngineError;
use crate::ontology::{ClassRef, OntologyFormat};
use crate::planner::{AbstractRequest, Plan};
use crate::process::{CompositeProcess, Placement};
use crate::registry::{DiscoveryQuery, StatusPattern};
use crate::session::{self, export_process, import_process, Engine, ExportFormat, Request, Response, WorkingContext};
use crate::workspace::{read_file, Workspace, DEFAULT_WORKSPACE, WORKSPACE_ENV};

#[derive(Parser, Debug)]
#[command(name = "semcompose", version, about = "Semantic service discovery and composition", arg_required_else_help = true)]
pub struct Cli {
    /// Directory holding ontologies, profiles and sessions.
    #[arg(long, global = true, env = WORKSPACE_ENV, default_value = DEFAULT_WORKSPACE)]
    pub workspace: PathBuf,
    /// Print structured JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Triples,
    Structured,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SuggestKind {
    Consolidation,
    Ordering,
    Insertion,
    Removal,
    Relaxation,
    Conflicts,
    Completion,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ExportArg {
    ProfileBundle,
    PlanReport,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Add an ontology document to the workspace.
    LoadOntology {
        file: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Compute the subclass and subproperty closures.
    Classify,
    /// Register a profile file, a bundle, or every .json file in a directory.
    Register { path: PathBuf },
    /// Remove a registered service.
    Deregister { id: String },
    /// List registered services.
    Services,
    /// Find services by inputs, outputs and effects.
    Discover {
        /// A discovery query document; flags are merged into it.
        query: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        input: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        output: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        effect: Vec<String>,
        #[arg(long)]
        max: Option<usize>,
    },
    /// Compose plans for a request.
    Plan {
        request: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Continuation token from an earlier run.
        #[arg(long)]
        resume: Option<String>,
    },
    /// Check a process's dataflow and control flow.
    Verify {
        process: PathBuf,
        #[arg(long)]
        request: Option<PathBuf>,
    },
    /// Ask for suggestions on a process.
    Suggest {
        #[arg(value_enum)]
        kind: SuggestKind,
        process: PathBuf,
        #[arg(long)]
        request: Option<PathBuf>,
        #[arg(long)]
        producer: Option<String>,
        #[arg(long)]
        consumer: Option<String>,
        /// Candidate service for conflict detection.
        #[arg(long)]
        service: Option<String>,
        #[arg(long)]
        outcome: Option<String>,
        /// end, after:STEP, before:STEP or parallel:STEP
        #[arg(long, default_value = "end")]
        position: String,
    },
    /// Serve the wire API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Run the benchmark harness.
    Bench {
        config: PathBuf,
        /// Also write CSV rows here; '-' for standard output.
        #[arg(long)]
        csv: Option<String>,
    },
    /// Export the process of a saved session.
    Export {
        session: PathBuf,
        #[arg(long, value_enum, default_value = "profile-bundle")]
        format: ExportArg,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    Engine(EngineError),
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Malformed(_) | EngineError::Storage(_) | EngineError::Ontology(crate::error::OntologyError::Parse(_)) => {
                Failure::Usage(e.to_string())
            }
            e => Failure::Engine(e),
        }
    }
}

struct Out<'a> {
    json: bool,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Out<'_> {
    fn emit<T: Serialize>(&mut self, value: &T, text: impl FnOnce() -> String) {
        let rendered = if self.json {
            serde_json::to_string_pretty(value).expect("output serializes")
        } else {
            text()
        };
        let _ = writeln!(self.stdout, "{}", rendered.trim_end());
    }

    fn note(&mut self, line: impl AsRef<str>) {
        let _ = writeln!(self.stderr, "{}", line.as_ref());
    }
}

fn parse_json<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// A bare process, an exported bundle, or a saved session.
fn read_process(path: &Path) -> Result<CompositeProcess, Failure> {
    let text = read_file(path)?;
    if let Ok(p) = serde_json::from_str::<CompositeProcess>(&text) {
        return Ok(p);
    }
    if let Ok(p) = import_process(&text) {
        return Ok(p);
    }
    serde_json::from_str::<WorkingContext>(&text)
        .map(|c| c.process)
        .map_err(|e| Failure::Usage(format!("{}: not a process, bundle or session: {e}", path.display())))
}

fn parse_position(text: &str) -> Result<Placement, Failure> {
    let bad = || Failure::Usage(format!("bad position '{text}': use end, after:STEP, before:STEP or parallel:STEP"));
    if text == "end" {
        return Ok(Placement::End);
    }
    let (how, step) = text.split_once(':').ok_or_else(bad)?;
    let step = step.to_string();
    match how {
        "after" => Ok(Placement::After(step)),
        "before" => Ok(Placement::Before(step)),
        "parallel" => Ok(Placement::ParallelWith(step)),
        _ => Err(bad()),
    }
}

fn plan_line(plan: &Plan) -> String {
    plan.layers
        .iter()
        .map(|l| {
            let names: Vec<String> = l.iter().map(|s| format!("{}[{}]", s.service, s.outcome)).collect();
            format!("{{{}}}", names.join(", "))
        })
        .collect::<Vec<_>>()
        .join(" -> ")
}

fn diagnostic_line(d: &Diagnostic) -> String {
    let sev = if d.is_error() { "error" } else { "warning" };
    let kind = serde_json::to_value(d.kind).expect("kind serializes");
    format!("{sev}[{}]: {}", kind.as_str().unwrap_or_default(), d.explanation)
}

fn suggestion_lines(list: &[Suggestion]) -> String {
    if list.is_empty() {
        return "no suggestions".into();
    }
    list.iter()
        .map(|s| {
            let kind = serde_json::to_value(s.kind).expect("kind serializes");
            let weak = if s.weak { " (weak)" } else { "" };
            format!("{} {}{weak}: {}", s.id, kind.as_str().unwrap_or_default(), s.justification)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// A throwaway session holding `process` and `request`.
fn scratch(engine: &Engine, process: CompositeProcess, request: Option<AbstractRequest>) -> Result<String, EngineError> {
    let id = engine.create_session()?;
    if let Some(r) = request {
        engine.set_request(&id, r)?;
    }
    if !process.is_empty() {
        let delta = CompositeProcess::default().replacement_delta(&process);
        engine.invoke(&id, Request::EditProcess { delta })?;
    }
    Ok(id)
}

fn execute(cli: Cli, out: &mut Out<'_>) -> Result<i32, Failure> {
    let mut ws = Workspace::open(&cli.workspace)?;
    match cli.command {
        Command::LoadOntology { file, format } => {
            let format = format.map(|f| match f {
                FormatArg::Triples => OntologyFormat::Triples,
                FormatArg::Structured => OntologyFormat::Structured,
            });
            let r = ws.load_ontology(&file, format)?;
            for w in &r.warnings {
                out.note(format!("warning: {w}"));
            }
            out.emit(&r, || {
                format!(
                    "loaded {} triples ({} classes, {} properties, {} inert)",
                    r.triples_added, r.classes_added, r.properties_added, r.inert_statements
                )
            });
        }
        Command::Classify => {
            let r = ws.classify()?;
            for w in &r.warnings {
                out.note(format!("warning: {w}"));
            }
            out.emit(&r, || {
                format!("classified {} classes, {} subclass pairs", r.classes, r.subclass_pairs)
            });
        }
        Command::Register { path } => {
            let r = ws.register(&path)?;
            for reg in &r {
                for w in &reg.warnings {
                    out.note(format!("warning: {}: {w}", reg.id));
                }
            }
            out.emit(&r, || {
                r.iter()
                    .map(|x| format!("registered {}", x.id))
                    .collect::<Vec<_>>()
                    .join("\n")
            });
        }
        Command::Deregister { id } => {
            let p = ws.deregister(&id)?;
            out.emit(&p, || format!("removed {}", p.id));
        }
        Command::Services => {
            let list = ws.engine(false)?.services();
            out.emit(&list, || {
                list.iter()
                    .map(|p| {
                        let ins: Vec<String> = p.inputs.iter().map(|i| i.ty.to_string()).collect();
                        let outs: Vec<String> = p.outputs.iter().map(|o| o.ty.to_string()).collect();
                        format!("{}: ({}) -> ({})", p.id, ins.join(", "), outs.join(", "))
                    })
                    .collect::<Vec<_>>()
                    .join("\n")
            });
        }
        Command::Discover {
            query,
            input,
            output,
            effect,
            max,
        } => {
            let mut q: DiscoveryQuery = match query {
                Some(path) => parse_json(&path)?,
                None => DiscoveryQuery::default(),
            };
            q.required_inputs.extend(input.into_iter().map(ClassRef::new));
            q.desired_outputs.extend(output.into_iter().map(ClassRef::new));
            q.desired_effects.extend(effect.into_iter().map(StatusPattern::new));
            if max.is_some() {
                q.max_results = max;
            }
            let engine = ws.engine(false)?;
            let id = engine.create_session()?;
            let r = engine.invoke(&id, Request::Discover { query: q })?;
            out.emit(&r, || match &r {
                Response::Services { matches } if matches.is_empty() => "no matching services".into(),
                Response::Services { matches } => matches
                    .iter()
                    .map(|m| {
                        let weak = if m.weak { " (weak)" } else { "" };
                        format!(
                            "{}{weak}: exact {}, plugin {}, distance {}",
                            m.id, m.score.exact, m.score.plugin, m.score.distance
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("\n"),
                _ => unreachable!("discover answers with services"),
            });
        }
        Command::Plan { request, k, resume } => {
            let request: AbstractRequest = parse_json(&request)?;
            let engine = ws.engine(false)?;
            let id = scratch(&engine, CompositeProcess::default(), Some(request))?;
            let r = engine.invoke(
                &id,
                Request::Plan {
                    k,
                    resume,
                    restart: false,
                },
            )?;
            let Response::Plans {
                plans, token, terminal, ..
            } = &r
            else {
                unreachable!("plan answers with plans")
            };
            if plans.is_empty() {
                out.note("no (further) plans");
            }
            out.emit(&r, || {
                let mut lines: Vec<String> = plans
                    .iter()
                    .enumerate()
                    .map(|(i, p)| format!("plan {}: {}", i + 1, plan_line(p)))
                    .collect();
                lines.push(format!("token: {token}"));
                if *terminal {
                    lines.push("no more plans".into());
                }
                lines.join("\n")
            });
        }
        Command::Verify { process, request } => {
            let process = read_process(&process)?;
            let request: Option<AbstractRequest> = request.map(|p| parse_json(&p)).transpose()?;
            let engine = ws.engine(false)?;
            let id = scratch(&engine, process, request)?;
            let r = engine.invoke(&id, Request::Verify)?;
            let Response::Diagnostics { diagnostics } = &r else {
                unreachable!("verify answers with diagnostics")
            };
            for d in diagnostics {
                out.note(diagnostic_line(d));
            }
            let errors = diagnostics.iter().filter(|d| d.is_error()).count();
            out.emit(&r, || format!("{errors} error(s), {} warning(s)", diagnostics.len() - errors));
            return Ok(if errors > 0 { 1 } else { 0 });
        }
        Command::Suggest {
            kind,
            process,
            request,
            producer,
            consumer,
            service,
            outcome,
            position,
        } => {
            let process = read_process(&process)?;
            let request: Option<AbstractRequest> = request.map(|p| parse_json(&p)).transpose()?;
            let need = |v: Option<String>, flag: &str| v.ok_or_else(|| Failure::Usage(format!("--{flag} is required")));
            let call = match kind {
                SuggestKind::Consolidation => Request::SuggestConsolidations {
                    producer: need(producer, "producer")?,
                    consumer: need(consumer, "consumer")?,
                },
                SuggestKind::Ordering => Request::SuggestOrderings,
                SuggestKind::Insertion => Request::SuggestInsertions,
                SuggestKind::Removal => Request::SuggestRemovals,
                SuggestKind::Relaxation => Request::Relax,
                SuggestKind::Completion => Request::CompleteDataflow,
                SuggestKind::Conflicts => Request::DetectConflicts {
                    service: need(service, "service")?,
                    outcome,
                    position: parse_position(&position)?,
                },
            };
            let engine = ws.engine(false)?;
            let id = scratch(&engine, process, request)?;
            let r = engine.invoke(&id, call)?;
            out.emit(&r, || match &r {
                Response::Suggestions { suggestions } => suggestion_lines(suggestions),
                Response::Conflicts { report } => {
                    let mut lines: Vec<String> = report.diagnostics.iter().map(diagnostic_line).collect();
                    lines.push(suggestion_lines(&report.suggestions));
                    lines.join("\n")
                }
                Response::Completion {
                    applied, ambiguous, process, ..
                } => format!(
                    "linked {} input(s); {} ambiguous\n{}",
                    applied.len(),
                    ambiguous.len(),
                    serde_json::to_string_pretty(process).expect("process serializes")
                ),
                other => serde_json::to_string_pretty(other).expect("response serializes"),
            });
        }
        Command::Serve { port, host } => {
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| Failure::Usage(format!("bad address: {e}")))?;
            let engine = Arc::new(ws.engine(true)?);
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Usage(e.to_string()))?;
            rt.block_on(session::wire::serve(engine, addr))
                .map_err(|e| Failure::Engine(EngineError::Storage(e.to_string())))?;
        }
        Command::Bench { config, csv } => {
            let config: BenchConfig = parse_json(&config)?;
            let report = run_benchmark(&config).map_err(|e| Failure::Usage(e.to_string()))?;
            out.emit(&report, || report.table());
            match csv.as_deref() {
                Some("-") => {
                    let _ = write!(out.stdout, "{}", report.csv());
                }
                Some(path) => std::fs::write(path, report.csv())
                    .map_err(|e| Failure::Usage(format!("{path}: {e}")))?,
                None => {}
            }
        }
        Command::Export { session, format } => {
            let ctx: WorkingContext = parse_json(&session)?;
            let format = match format {
                ExportArg::ProfileBundle => ExportFormat::ProfileBundle,
                ExportArg::PlanReport => ExportFormat::PlanReport,
            };
            let engine = ws.engine(false)?;
            let snap = engine.snapshot();
            let doc = export_process(&ctx.process, ctx.request.as_ref(), format, snap.catalog())?;
            let _ = writeln!(out.stdout, "{doc}");
        }
    }
    Ok(0)
}

/// Runs the CLI on `argv` and returns the exit code: 0 on success, 1 on
/// errors found in the user's inputs, 2 on usage or parse failures.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
            } else {
                let _ = write!(stdout, "{text}");
            }
            return e.exit_code();
        }
    };
    let mut out = Out {
        json: cli.json,
        stdout,
        stderr,
    };
    match execute(cli, &mut out) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            out.note(format!("error: {msg}"));
            2
        }
        Err(Failure::Engine(e)) => {
            out.note(format!("error[{}]: {e}", e.kind()));
            1
        }
    }
}
