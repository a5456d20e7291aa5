use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cplanner::grid::{CellKind, GridMap, MoveAction};
use cplanner::mapfile::{parse_map, reference_map};
use cplanner::montecarlo::monte_carlo_estimate;
use cplanner::solver::SolverConfig;
use cplanner::textgen::{contrast_sentence, format_number, generate, ExplanationType};
use cplanner::{Error, ExtValue, StateId};
use cplanner_service::{AppState, PropertyChoice, Session};
use serde_json::{json, Value};

/// Plans routes on grid maps and explains the plan.
#[derive(Parser, Debug)]
#[command(name = "cplanner", version)]
struct Cli {
    /// Map file; the bundled reference map when omitted.
    #[arg(long, global = true)]
    map: Option<PathBuf>,
    /// Criticality threshold.
    #[arg(long, global = true, default_value_t = 0.0)]
    alpha: f64,
    /// Value-iteration stopping tolerance.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, global = true, default_value_t = 100_000)]
    max_iterations: usize,
    #[arg(long, global = true, value_enum, default_value_t = Property::MinCost)]
    property: Property,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Seed for Monte-Carlo checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Property {
    MinCost,
    MaxReach,
    MinReach,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the value and policy of every state.
    Solve {
        /// Also simulate this many episodes from the start.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Print an explanation of the nominal route.
    Explain {
        #[arg(long = "type")]
        kind: String,
        /// Focus state for single-state explanations.
        #[arg(long)]
        state: Option<usize>,
    },
    /// List critical states with their impact bounds.
    Critical,
    /// Explain one action against an alternative.
    Contrast {
        #[arg(long)]
        state: usize,
        #[arg(long)]
        chosen: String,
        #[arg(long)]
        alt: String,
    },
    /// Draw the map with the route and critical states.
    Render,
    /// Serve the HTTP API on localhost.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

#[derive(Debug)]
enum Failure {
    Input(String),
    NotConverged(String),
    Usage(String),
    Bind(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::NotConverged(_) => 2,
            Failure::Usage(_) => 3,
            Failure::Bind(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::NotConverged(m) | Failure::Usage(m) | Failure::Bind(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NotConverged { .. } => Failure::NotConverged(msg),
            Error::InvalidArgument(_)
            | Error::NotCritical(_)
            | Error::NotOnRoute(_)
            | Error::UnknownState(_)
            | Error::UnknownAction(_)
            | Error::ActionNotEnabled { .. } => Failure::Usage(msg),
            _ => Failure::Input(msg),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("CPLANNER_LOG", "error")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(out) => {
            if !out.is_empty() {
                // A closed pipe (`| head`) is not an error.
                let _ = writeln!(std::io::stdout().lock(), "{out}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn load_map(cli: &Cli) -> Result<GridMap, Failure> {
    match &cli.map {
        None => Ok(reference_map()),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            parse_map(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
        }
    }
}

fn load(cli: &Cli) -> Result<Session, Failure> {
    if !(cli.alpha.is_finite() && cli.alpha >= 0.0) {
        return Err(Failure::Usage(format!("--alpha must be non-negative, got {}", cli.alpha)));
    }
    if !(cli.tolerance.is_finite() && cli.tolerance > 0.0) {
        return Err(Failure::Usage(format!("--tolerance must be positive, got {}", cli.tolerance)));
    }
    let map = load_map(cli)?;
    let property = match cli.property {
        Property::MinCost => PropertyChoice::MinCost,
        Property::MaxReach => PropertyChoice::MaxReach,
        Property::MinReach => PropertyChoice::MinReach,
    };
    let cfg = SolverConfig {
        tolerance: cli.tolerance,
        max_iterations: cli.max_iterations,
    };
    let session = Session::solve(map, property, cli.alpha, &cfg)?;
    log::info!(
        "solved {} states in {} iterations (residual {:e})",
        session.mdp.num_states(),
        session.values.iterations,
        session.values.residual
    );
    Ok(session)
}

fn run(cli: &Cli) -> Result<String, Failure> {
    let session = load(cli)?;
    let structured = cli.format == Format::Structured;
    let doc = match &cli.command {
        Command::Solve { episodes } => return solve(cli, &session, *episodes),
        Command::Explain { kind, state } => {
            let kind: ExplanationType = kind.parse()?;
            let route = session.route()?;
            let doc = generate(kind, &session.mdp, route, &session.report, state.map(StateId))?;
            if !structured {
                return Ok(doc.text());
            }
            let mut v = serde_json::to_value(&doc).expect("explanation serializes");
            v["text"] = json!(doc.text());
            v
        }
        Command::Critical => return Ok(critical(&session, structured)),
        Command::Contrast { state, chosen, alt } => {
            let chosen = session.mdp.action_by_label(chosen)?;
            let alt = session.mdp.action_by_label(alt)?;
            let sentence = contrast_sentence(&session.mdp, &session.report, StateId(*state), chosen, alt)?;
            if !structured {
                return Ok(sentence);
            }
            json!({ "state": state, "sentence": sentence })
        }
        Command::Render => {
            let rows = render(&session);
            if !structured {
                return Ok(rows.join("\n"));
            }
            json!({ "rows": rows })
        }
        Command::Serve { port } => return serve(session, *port).map(|()| String::new()),
    };
    Ok(serde_json::to_string_pretty(&doc).expect("json"))
}

fn value_text(v: ExtValue<f64>) -> String {
    match v {
        ExtValue::Finite(x) => format!("{x:.3}"),
        ExtValue::Unreachable => "unreachable".to_string(),
    }
}

fn solve(cli: &Cli, s: &Session, episodes: Option<usize>) -> Result<String, Failure> {
    let estimate = episodes
        .map(|n| monte_carlo_estimate(&s.mdp, &s.policy, &s.values.property, s.mdp.initial(), n, cli.seed))
        .transpose()?;
    if cli.format == Format::Structured {
        let doc = json!({ "values": s.values, "policy": s.policy, "monte_carlo": estimate });
        return Ok(serde_json::to_string_pretty(&doc).expect("json"));
    }
    let mut lines: Vec<String> = s
        .values
        .iter(&s.mdp)
        .map(|(id, v)| {
            let arrow = s
                .policy
                .action(id)
                .and_then(MoveAction::from_action_id)
                .map_or('-', MoveAction::arrow);
            format!("g{} {} {arrow}", id.0, value_text(v))
        })
        .collect();
    if let Some(e) = estimate {
        lines.push(format!(
            "monte-carlo g{}: {} ± {} over {} episodes ({} censored)",
            s.mdp.initial().0,
            format_number(e.mean),
            format_number(e.stderr),
            e.completed,
            e.censored
        ));
    }
    Ok(lines.join("\n"))
}

fn critical(s: &Session, structured: bool) -> String {
    let rows: Vec<_> = s
        .report
        .states
        .values()
        .map(|f| {
            let gap = f.bounds.gap().unwrap_or(ExtValue::Unreachable);
            (f.state, f.bounds.lambda_min, f.bounds.lambda_max, gap)
        })
        .collect();
    if structured {
        let rows: Vec<Value> = rows
            .iter()
            .map(|(id, lo, hi, gap)| json!({ "state": id, "lambda_min": lo, "lambda_max": hi, "gap": gap }))
            .collect();
        let doc = json!({ "alpha": s.alpha, "critical": rows });
        return serde_json::to_string_pretty(&doc).expect("json");
    }
    rows.iter()
        .map(|(id, lo, hi, gap)| format!("g{} {} {} {}", id.0, value_text(*lo), value_text(*hi), value_text(*gap)))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Two characters per cell: `*` for critical states, then the route arrow,
/// `#` for buildings, or the cell code.
fn render(s: &Session) -> Vec<String> {
    let map = &s.map;
    let mut arrows = vec![None; map.len()];
    if let Some(route) = &s.route {
        for step in &route.steps {
            arrows[step.state.0] = MoveAction::from_action_id(step.action).map(MoveAction::arrow);
        }
    }
    (0..map.height)
        .map(|r| {
            (0..map.width)
                .map(|c| {
                    let i = r * map.width + c;
                    let mark = if s.report.critical.contains(StateId(i)) { '*' } else { ' ' };
                    let glyph = match (arrows[i], map.cells[i]) {
                        (Some(a), _) => a,
                        (None, CellKind::Building) => '#',
                        (None, kind) => kind.code(),
                    };
                    format!("{mark}{glyph}")
                })
                .collect::<Vec<_>>()
                .join(" ")
                .trim_end()
                .to_string()
        })
        .collect()
}

fn serve(session: Session, port: u16) -> Result<(), Failure> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Input(e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", port))
            .await
            .map_err(|e| Failure::Bind(format!("cannot bind 127.0.0.1:{port}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| Failure::Bind(e.to_string()))?;
        println!("listening on http://{addr}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        cplanner_service::serve(listener, AppState::new(session), shutdown)
            .await
            .map_err(|e| Failure::Input(e.to_string()))
    })
}
