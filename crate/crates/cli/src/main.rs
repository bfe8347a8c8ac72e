//! `ifcnav` command line.
//!
//! Exit codes: 0 success, 1 I/O or missing artifacts, 2 IFC parse failure,
//! 3 no IfcBuilding in the model, 4 model backend unavailable, 64 usage error.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use ifcnav_cli::{router, BackendArgs, ServiceState};
use ifcnav_core::agent::{AgentError, AgentRun, BackendError, ChatMessage, Conversation, LlmBackend};
use ifcnav_core::app::{
    build_scene, compute_metrics, ingest, load_transcripts, run_eval, write_traces, Bindings, FixedBackends,
    HighlightSpec, LoadedModel, ScenarioSuite,
};
use ifcnav_core::geometry::Tolerance;
use ifcnav_core::graph::{build_model_graph, export_graph, ExportFormat, GraphConfig, NodeRef, PathWeight};
use ifcnav_core::semantics::extract_model;
use ifcnav_core::step::StepFile;

const USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "ifcnav", version, about = "Ask questions about IFC building models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Copy)]
struct GraphArgs {
    /// Adjacency tolerance in meters.
    #[arg(long, default_value_t = Tolerance::DEFAULT.get())]
    eps: f64,
    /// Door box growth across the wall, meters.
    #[arg(long, default_value_t = ifcnav_core::graph::DEFAULT_DOOR_EXPAND)]
    door_expand: f64,
}

impl GraphArgs {
    fn config(self) -> Result<GraphConfig, Failure> {
        let eps = Tolerance::new(self.eps).map_err(|e| Failure::usage(e.to_string()))?;
        if !(self.door_expand.is_finite() && self.door_expand >= 0.0) {
            return Err(Failure::usage("--door-expand must be a non-negative number"));
        }
        Ok(GraphConfig { eps, door_expand: self.door_expand })
    }

    fn is_default(self) -> bool {
        self.eps == Tolerance::DEFAULT.get() && self.door_expand == ifcnav_core::graph::DEFAULT_DOOR_EXPAND
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build `<name>.db`, `<name>.graph.json` and `<name>.report.json` from an IFC file.
    Ingest {
        ifc: PathBuf,
        /// Output directory.
        #[arg(long, short, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        graph: GraphArgs,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Answer one question.
    Query {
        /// The `.db` written by `ingest`.
        db: PathBuf,
        text: String,
        #[command(flatten)]
        backend: BackendArgs,
        /// Print the answer and full trace as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Interactive session; one question per line.
    Repl {
        db: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Write a scene document for the viewer.
    Render {
        db: PathBuf,
        /// Highlight the path from this node (id or name).
        #[arg(long, requires = "to")]
        from: Option<String>,
        #[arg(long, requires = "from")]
        to: Option<String>,
        /// `hops` or `distance`.
        #[arg(long, default_value = "hops")]
        weight: String,
        /// Include full element meshes.
        #[arg(long)]
        meshes: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Export the topology graph as JSON, GraphML or a Cypher script.
    ExportGraph {
        /// An IFC file, or a `.db` whose graph file is reused.
        input: PathBuf,
        #[arg(long, default_value = "json")]
        format: String,
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run the scenario suite and report accuracy.
    Eval {
        db: PathBuf,
        /// Scenario file; the shipped suite by default.
        #[arg(long)]
        suite: Option<PathBuf>,
        /// Parameter bindings; the FZK-Haus bindings by default.
        #[arg(long)]
        bindings: Option<PathBuf>,
        /// Per-scenario scripted replies; otherwise the live backend is used.
        #[arg(long)]
        transcripts: Option<PathBuf>,
        /// Directory for `report.json` and per-scenario traces.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long)]
        json: bool,
    },
    /// Serve the HTTP JSON API.
    Serve {
        db: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Directory for session history files.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Environment variable holding a bearer token clients must send.
        #[arg(long)]
        auth_token_env: Option<String>,
        #[command(flatten)]
        backend: BackendArgs,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self::new(USAGE, message)
    }

    fn io(message: impl std::fmt::Display) -> Self {
        Self::new(1, message.to_string())
    }
}

impl From<AgentError> for Failure {
    fn from(e: AgentError) -> Self {
        let code = match e {
            AgentError::BackendUnavailable { .. } | AgentError::TranscriptExhausted { .. } => 4,
            AgentError::InvalidConfig(_) => USAGE,
            AgentError::Store(_) => 1,
        };
        Failure::new(code, e.to_string())
    }
}

fn open(db: &Path) -> Result<LoadedModel, Failure> {
    LoadedModel::open(db).map_err(Failure::io)
}

fn write_out(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::io(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn print_run(run: &AgentRun, json: bool) {
    if json {
        println!("{}", run.to_json());
        return;
    }
    println!("{}", run.answer);
    if run.incomplete {
        eprintln!("(stopped at the iteration limit; the answer may be incomplete)");
    }
}

/// Stands in when `serve` has no backend configured.
struct Unconfigured;

impl LlmBackend for Unconfigured {
    fn name(&self) -> &str {
        "unconfigured"
    }

    fn complete(&self, _: &[ChatMessage]) -> Result<String, BackendError> {
        Err(BackendError::Unavailable {
            backend: "unconfigured".into(),
            message: "no model backend configured".into(),
            retryable: false,
        })
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Ingest { ifc, out, graph, json } => {
            let config = graph.config()?;
            match ingest(&ifc, &out, config) {
                Ok((paths, report)) => {
                    if json {
                        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
                    } else {
                        println!("wrote {}", paths.db.display());
                        println!("wrote {}", paths.graph.display());
                        println!("wrote {}", paths.report.display());
                        for t in ["storey", "room", "door", "stair", "wall", "window", "property"] {
                            println!("{t:>10}: {}", report.counts[t]);
                        }
                        println!("graph: {} nodes, {} edges", report.nodes, report.edges);
                        println!("rdb {:.4} s, gdb {:.4} s", report.rdb_seconds, report.gdb_seconds);
                        if !report.warnings.is_empty() {
                            println!("{} warnings in the report", report.warnings.len());
                        }
                    }
                    Ok(())
                }
                Err(e) => {
                    let code = e.exit_code() as u8;
                    Err(Failure::new(code, e.to_string()))
                }
            }
        }
        Command::Query { db, text, backend, json } => {
            let model = open(&db)?;
            let agent = backend.agent().map_err(Failure::usage)?;
            match agent.run(model.stores(), &mut Conversation::default(), &text) {
                Ok(run) => {
                    print_run(&run, json);
                    Ok(())
                }
                Err(failure) => {
                    if json {
                        println!("{}", serde_json::to_string(&*failure.state).expect("trace serializes"));
                    }
                    Err(failure.error.into())
                }
            }
        }
        Command::Repl { db, backend } => {
            let model = open(&db)?;
            let agent = backend.agent().map_err(Failure::usage)?;
            let mut conversation = Conversation::default();
            let stdin = std::io::stdin();
            let mut out = std::io::stdout();
            loop {
                print!("> ");
                out.flush().map_err(Failure::io)?;
                let mut line = String::new();
                if stdin.lock().read_line(&mut line).map_err(Failure::io)? == 0 {
                    break;
                }
                let line = line.trim();
                match line {
                    "" => continue,
                    ":quit" | ":q" => break,
                    _ => match agent.run(model.stores(), &mut conversation, line) {
                        Ok(run) => print_run(&run, false),
                        Err(f) => eprintln!("error: {}", f.error),
                    },
                }
            }
            Ok(())
        }
        Command::Render { db, from, to, weight, meshes, output } => {
            let model = open(&db)?;
            let weight: PathWeight = serde_json::from_value(serde_json::Value::String(weight.clone()))
                .map_err(|_| Failure::usage(format!("unknown weight '{weight}', expected hops or distance")))?;
            let highlight = from.zip(to).map(|(from, to)| HighlightSpec {
                from: NodeRef::Text(from),
                to: NodeRef::Text(to),
                weight,
            });
            let scene =
                build_scene(&model.graph, highlight.as_ref(), meshes.then_some(&model.store)).map_err(Failure::io)?;
            write_out(output.as_deref(), &scene.to_json())
        }
        Command::ExportGraph { input, format, graph, output } => {
            let format: ExportFormat =
                format.parse().map_err(|e: ifcnav_core::graph::GraphError| Failure::usage(e.to_string()))?;
            let is_ifc = input.extension().is_some_and(|e| e.eq_ignore_ascii_case("ifc"));
            let topo = if is_ifc {
                let file = StepFile::open(&input).map_err(|e| Failure::new(2, e.to_string()))?;
                let model = extract_model(&file).map_err(|e| {
                    let code = if matches!(e, ifcnav_core::semantics::SemanticsError::NoBuilding) { 3 } else { 2 };
                    Failure::new(code, e.to_string())
                })?;
                build_model_graph(&model, graph.config()?).graph
            } else {
                if !graph.is_default() {
                    return Err(Failure::usage("--eps and --door-expand need an IFC input"));
                }
                open(&input)?.graph
            };
            write_out(output.as_deref(), &export_graph(&topo, format))
        }
        Command::Eval { db, suite, bindings, transcripts, out, backend, json } => {
            let model = open(&db)?;
            let suite = match suite {
                Some(p) => ScenarioSuite::load(p).map_err(Failure::io)?,
                None => ScenarioSuite::builtin(),
            };
            let bindings = match bindings {
                Some(p) => Bindings::load(p).map_err(Failure::io)?,
                None => Bindings::fzk(),
            };
            let scenarios = suite.bind(&bindings).map_err(Failure::io)?;
            let config = backend.config().map_err(Failure::usage)?;
            let traces = match transcripts {
                Some(p) => {
                    let set = load_transcripts(p).map_err(Failure::io)?;
                    run_eval(&scenarios, model.stores(), &set, &config)
                }
                None => {
                    let backends = FixedBackends {
                        primary: backend.primary().map_err(Failure::usage)?,
                        fallback: backend.fallback().map_err(Failure::usage)?,
                    };
                    run_eval(&scenarios, model.stores(), &backends, &config)
                }
            };
            let report = compute_metrics(&traces);
            if let Some(dir) = out {
                write_traces(dir.join("traces"), &traces).map_err(Failure::io)?;
                std::fs::write(dir.join("report.json"), report.to_json()).map_err(Failure::io)?;
            }
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_table());
            }
            Ok(())
        }
        Command::Serve { db, addr, data_dir, auth_token_env, backend } => {
            let model = open(&db)?;
            let agent = match backend.agent() {
                Ok(a) => a,
                Err(e) if backend.endpoint.is_none() && backend.transcript.is_none() => {
                    log::warn!("{e}; messages will fail with 503");
                    ifcnav_core::agent::Agent::new(backend.config().map_err(Failure::usage)?, Arc::new(Unconfigured))
                }
                Err(e) => return Err(Failure::usage(e)),
            };
            let token = match auth_token_env {
                Some(var) => Some(std::env::var(&var).map_err(|_| Failure::usage(format!("{var} is not set")))?),
                None => None,
            };
            let state = ServiceState::new(model, agent, data_dir).map_err(Failure::io)?.with_auth_token(token);
            let runtime = tokio::runtime::Runtime::new().map_err(Failure::io)?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&addr).await.map_err(Failure::io)?;
                eprintln!("listening on http://{}", listener.local_addr().map_err(Failure::io)?);
                axum::serve(listener, router(Arc::new(state)))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
                    .map_err(Failure::io)
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
