//! Command-line entry point. Exit codes: 0 success, 1 validation or scenario
//! failure, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use crate::a2a::{
    parse_and_validate_agent_card, A2aHttpHandler, A2aServer, Artifact, LifecycleEvent, Part,
    TaskContext,
};
use crate::fault::FaultSpec;
use crate::guard::{evaluate_tool_against_registry, Decision, PinSet};
use crate::harness::{
    parse_consent, run_scenario, ReportFormat, ScenarioConfig, ScenarioName, TransportMode,
    A2A_PATH,
};
use crate::mcp::{serve_stdio, HandlerRegistry, McpHttpHandler, McpServer, McpServerDescriptor};
use crate::net::{HttpServer, LateHandler};
use crate::trace::{build_trace_tree, classify_failure, deserialize_trace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "agentlink",
    version,
    about = "A2A and MCP agent interop toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Agent card operations.
    Card {
        #[command(subcommand)]
        action: CardAction,
    },
    /// Serve an agent or a tool server.
    Serve {
        #[command(subcommand)]
        target: ServeTarget,
    },
    /// Run deterministic scenarios.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// Inspect trace files.
    Trace {
        #[command(subcommand)]
        action: TraceAction,
    },
    /// Pin tool definitions and check them for drift.
    Tools {
        #[command(subcommand)]
        action: ToolsAction,
    },
}

#[derive(Debug, Subcommand)]
enum CardAction {
    /// Parse and validate an agent card.
    Validate { file: PathBuf },
}

#[derive(Debug, Subcommand)]
enum ServeTarget {
    /// Serve an echo agent for the given card over HTTP.
    A2a {
        #[arg(long)]
        card: PathBuf,
        #[arg(long, default_value_t = 0)]
        port: u16,
        /// Bearer token required by cards with bearer auth.
        #[arg(long)]
        token: Option<String>,
    },
    /// Serve the tools, resources and prompts of a descriptor.
    Mcp {
        #[arg(long)]
        descriptor: PathBuf,
        #[arg(long, conflicts_with = "port", required_unless_present = "port")]
        stdio: bool,
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Debug, Subcommand)]
enum ScenarioAction {
    /// Run one scenario and write report.json, trace.jsonl and audit.jsonl.
    Run {
        name: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// site:mode:index, e.g. mcp-tool(sendEmail):error:0. Repeatable.
        #[arg(long = "fault")]
        faults: Vec<String>,
        /// Comma-separated consent answers, e.g. y,n.
        #[arg(long)]
        consent: Option<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value = "loopback")]
        transport: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Debug, Subcommand)]
enum TraceAction {
    /// Print a trace file as an indented tree with its classification.
    Show { file: PathBuf },
}

#[derive(Debug, Subcommand)]
enum ToolsAction {
    /// Pin every tool of a descriptor.
    Pin {
        descriptor: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a descriptor's tools against a pin file.
    Check {
        descriptor: PathBuf,
        #[arg(long)]
        pins: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn failed(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_FAILURE,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load_descriptor(path: &Path) -> Result<McpServerDescriptor, Failure> {
    McpServerDescriptor::parse(&read(path)?).map_err(|e| failed(format!("{}: {e}", path.display())))
}

/// Runs the CLI on `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Card {
            action: CardAction::Validate { file },
        } => {
            let card =
                parse_and_validate_agent_card(&read(&file)?).map_err(|e| failed(e.to_string()))?;
            let _ = writeln!(out, "valid: {} ({} skills)", card.name, card.skills.len());
            Ok(EXIT_OK)
        }
        Command::Serve { target } => serve(target, out),
        Command::Scenario { action } => scenario(action, out),
        Command::Trace {
            action: TraceAction::Show { file },
        } => {
            let spans = deserialize_trace(&read(&file)?).map_err(|e| failed(e.to_string()))?;
            let tree = build_trace_tree(&spans).map_err(|e| failed(e.to_string()))?;
            let _ = write!(out, "{}", tree.render_text());
            let _ = writeln!(out, "classification: {}", classify_failure(&tree));
            Ok(EXIT_OK)
        }
        Command::Tools { action } => tools(action, out),
    }
}

fn serve(target: ServeTarget, out: &mut dyn Write) -> Result<i32, Failure> {
    match target {
        ServeTarget::A2a { card, port, token } => {
            let mut card =
                parse_and_validate_agent_card(&read(&card)?).map_err(|e| failed(e.to_string()))?;
            let bind = format!("127.0.0.1:{port}");
            let late = Arc::new(LateHandler::default());
            let socket = HttpServer::bind(&bind, Arc::clone(&late) as _)
                .map_err(|e| failed(e.to_string()))?;
            card.url = format!("{}{A2A_PATH}", socket.base_url());
            let mut server = A2aServer::new(card, Arc::new(echo_agent));
            if let Some(t) = token {
                server = server.with_bearer_token(t);
            }
            late.set(Arc::new(A2aHttpHandler::new(Arc::new(server))));
            let _ = writeln!(out, "listening on {}{A2A_PATH}", socket.base_url());
            let _ = out.flush();
            socket.join();
            Ok(EXIT_OK)
        }
        ServeTarget::Mcp {
            descriptor,
            stdio,
            port,
        } => {
            let server = Arc::new(
                McpServer::new(
                    load_descriptor(&descriptor)?,
                    Arc::new(HandlerRegistry::new()),
                )
                .map_err(|e| failed(e.to_string()))?,
            );
            if stdio {
                serve_stdio(server, std::io::stdin(), std::io::stdout())
                    .map_err(|e| failed(e.to_string()))?;
                return Ok(EXIT_OK);
            }
            let bind = format!("127.0.0.1:{}", port.unwrap_or(0));
            let socket = HttpServer::bind(&bind, Arc::new(McpHttpHandler::new(server)))
                .map_err(|e| failed(e.to_string()))?;
            let _ = writeln!(out, "listening on {}", socket.base_url());
            let _ = out.flush();
            socket.join();
            Ok(EXIT_OK)
        }
    }
}

/// Completes every task with one artifact that repeats the request.
fn echo_agent(ctx: &mut TaskContext<'_>) -> LifecycleEvent {
    let parts: Vec<Part> = ctx.latest_message().parts.clone();
    match ctx.emit(Artifact::whole(0, "echo", parts)) {
        Ok(()) => LifecycleEvent::Complete,
        Err(e) => LifecycleEvent::Fail(e.to_string()),
    }
}

fn scenario(action: ScenarioAction, out: &mut dyn Write) -> Result<i32, Failure> {
    let ScenarioAction::Run {
        name,
        seed,
        faults,
        consent,
        out: dir,
        transport,
        format,
    } = action;
    let name: ScenarioName = name
        .parse()
        .map_err(|e: crate::harness::HarnessError| usage(e.to_string()))?;
    let transport: TransportMode = transport.parse().map_err(usage)?;
    let mut config = ScenarioConfig::new(name, seed).with_transport(transport);
    for f in faults {
        config = config.with_fault(f.parse::<FaultSpec>().map_err(|e| usage(e.to_string()))?);
    }
    if let Some(c) = consent {
        config = config.with_consent(parse_consent(&c).map_err(|e| usage(e.to_string()))?);
    }
    config.validate().map_err(|e| usage(e.to_string()))?;
    let run = run_scenario(&config).map_err(|e| failed(e.to_string()))?;
    fs::create_dir_all(&dir)
        .and_then(|_| run.write_to(&dir))
        .map_err(|e| failed(format!("cannot write {}: {e}", dir.display())))?;
    let format = match format {
        Format::Text => ReportFormat::Text,
        Format::Json => ReportFormat::Json,
    };
    let _ = write!(out, "{}", run.render(format));
    Ok(if run.report.succeeded() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    })
}

fn tools(action: ToolsAction, out: &mut dyn Write) -> Result<i32, Failure> {
    match action {
        ToolsAction::Pin {
            descriptor,
            out: pin_file,
        } => {
            let d = load_descriptor(&descriptor)?;
            let pins = PinSet::pin_all(&d.server_name, &d.tools, 0);
            fs::write(&pin_file, pins.to_jsonl())
                .map_err(|e| failed(format!("cannot write {}: {e}", pin_file.display())))?;
            let _ = writeln!(out, "pinned {} tools of {}", pins.len(), d.server_name);
            Ok(EXIT_OK)
        }
        ToolsAction::Check { descriptor, pins } => {
            let d = load_descriptor(&descriptor)?;
            let pins = PinSet::from_jsonl(&read(&pins)?).map_err(|e| failed(e.to_string()))?;
            let mut clean = true;
            for tool in &d.tools {
                let verdict =
                    evaluate_tool_against_registry(tool, &d.server_name, &pins, Decision::Deny);
                clean &= verdict.is_allow();
                let _ = writeln!(out, "{}/{}: {verdict}", d.server_name, tool.name);
            }
            Ok(if clean { EXIT_OK } else { EXIT_FAILURE })
        }
    }
}
