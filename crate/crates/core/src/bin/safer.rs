use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use safer::gateway::{Backend, Completion, GatewayError, LlmRequestParams};
use safer::orchestrator::{load_config, Runner, TaskStatus};

#[derive(Parser)]
#[command(name = "safer", version, about = "Safety requirement analysis task runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tasks of a parameters file in order.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only the named task(s); may be repeated.
        #[arg(long)]
        task: Vec<String>,
        /// Re-run tasks whose outputs already exist.
        #[arg(long)]
        force: bool,
        #[arg(long, value_parser = ["http", "mock"])]
        backend: Option<String>,
        /// Fixture directory for the mock backend (overrides `llm.mock_dir`).
        #[arg(long)]
        mock_dir: Option<PathBuf>,
        #[arg(long)]
        version_tag: Option<String>,
        #[arg(long)]
        verbose: bool,
        /// Print the plan without sending prompts or writing files.
        #[arg(long)]
        dry_run: bool,
    },
}

/// Stands in for the HTTP backend during a dry run, which needs no API key.
struct Offline;

impl Backend for Offline {
    fn complete(&self, _: &str, _: &LlmRequestParams) -> Result<Completion, GatewayError> {
        Err(GatewayError::Transport { attempts: 0, message: "dry run".into() })
    }

    fn name(&self) -> &str {
        "offline"
    }
}

fn main() -> ExitCode {
    let Command::Run { config, task, force, backend, mock_dir, version_tag, verbose, dry_run } = Cli::parse().command;
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if verbose { "debug" } else { "info" }))
        .format_timestamp(None)
        .init();

    let mut cfg = match load_config(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(unknown) = task.iter().find(|t| !cfg.tasks.iter().any(|c| &c.task_name == *t)) {
        eprintln!("error: no task named `{unknown}` in {}", config.display());
        return ExitCode::from(2);
    }
    if !task.is_empty() {
        cfg.tasks.retain(|c| task.contains(&c.task_name));
    }
    for t in &mut cfg.tasks {
        t.verbose |= verbose;
    }
    if mock_dir.is_some() {
        cfg.llm.mock_dir = mock_dir;
    }

    let backend = backend.as_deref();
    let gateway = if dry_run && backend.unwrap_or(&cfg.llm.backend) == "http" {
        safer::Gateway::new(Offline, cfg.llm.params.clone())
    } else {
        match cfg.llm.gateway(backend) {
            Ok(g) => g,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        }
    };
    let runner = Runner::new(&gateway).force(force).version_tag(version_tag).thresholds(cfg.thresholds);

    if dry_run {
        for p in runner.plan(&cfg.tasks) {
            let prompts = p.prompts.map_or("?".to_string(), |n| n.to_string());
            println!("{:<32} {:<12} {:<40} prompts={prompts} -> {}", p.task_name, p.version_tag, p.action, p.primary_output.display());
        }
        return ExitCode::SUCCESS;
    }

    let outcomes = runner.run_all(&cfg.tasks);
    let mut failed = false;
    for o in &outcomes {
        println!("{:<32} {:?} (tag {}, {} call(s))", o.task_name, o.status, o.version_tag, o.calls);
        for out in &o.outputs {
            println!("    wrote {}", out.display());
        }
        if o.status == TaskStatus::Failed {
            failed = true;
            for d in &o.diagnostics {
                println!("    {d}");
            }
        }
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
