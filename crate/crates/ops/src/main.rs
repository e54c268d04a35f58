use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cis_domain::{contract, Policy};
use cis_middleware::capture::describe_capture;
use cis_middleware::parse_idl;
use cis_ops::api::Api;
use cis_ops::bench::{BenchOptions, Mix};
use cis_ops::deploy::{run_tier, shutdown_signal, Deployment, Tier};
use cis_ops::plan::Plan;
use cis_ops::{audit_store, bench_plan, seed, smoke_plan, OpsError};

/// Runs and exercises the campus information system.
#[derive(Parser)]
#[command(name = "fnucis", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start every tier of a plan and supervise them until interrupted.
    Run { plan: PathBuf },
    /// Load a fixture through the HTTP API. Existing records are skipped.
    Seed {
        fixture: PathBuf,
        /// Take the gateway address and admin account from this plan.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        gateway: String,
        #[arg(long, default_value = "admin")]
        user: String,
        #[arg(long, env = "FNUCIS_ADMIN_PASSWORD")]
        password: Option<String>,
    },
    /// Deploy a plan on a fresh store, run the end-to-end scenario and print its transcript.
    Smoke {
        plan: PathBuf,
        /// Compare against this transcript and fail on any difference.
        #[arg(long)]
        golden: Option<PathBuf>,
        /// Also write the transcript here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Deploy a plan, fire a request mix at it and audit the store afterwards.
    Bench {
        plan: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        c: usize,
        #[arg(long, default_value = "read")]
        mix: Mix,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Summary file; printed to stdout as well.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Describe the frames of a captured byte stream.
    Decode {
        capture: PathBuf,
        /// Interface definition used to decode bodies; defaults to the system contract.
        #[arg(long)]
        idl: Option<PathBuf>,
    },
    /// Check every domain invariant over a stopped store.
    Audit {
        db_dir: PathBuf,
        /// Use the policy of this plan instead of the defaults.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Run a single tier of a plan in this process.
    #[command(hide = true)]
    Tier {
        tier: Tier,
        #[arg(long)]
        plan: PathBuf,
    },
}

fn load(path: &Path) -> Result<Plan, OpsError> {
    Plan::load(path).map_err(|e| OpsError::Deploy(e.into()))
}

fn read(path: &Path) -> Result<Vec<u8>, OpsError> {
    std::fs::read(path).map_err(|e| OpsError::Usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), OpsError> {
    std::fs::write(path, text).map_err(|e| OpsError::Usage(format!("{}: {e}", path.display())))
}

fn exe() -> Result<PathBuf, OpsError> {
    std::env::current_exe().map_err(|e| OpsError::Usage(format!("locating own executable: {e}")))
}

async fn execute(command: Command) -> Result<ExitCode, OpsError> {
    match command {
        Command::Run { plan } => {
            let plan = load(&plan)?;
            let mut d = Deployment::start(&plan, &exe()?).await?;
            println!("{} deployment ready at {}", d.mode(), d.gateway_url());
            let outcome = tokio::select! {
                _ = shutdown_signal() => Ok(()),
                e = d.exited() => Err(e),
            };
            d.stop().await?;
            outcome?;
        }
        Command::Seed { fixture, plan, gateway, user, password } => {
            let text = String::from_utf8_lossy(&read(&fixture)?).into_owned();
            let (url, user, password) = match plan {
                Some(p) => {
                    let p = load(&p)?;
                    let url = format!("http://{}", p.gateway.listen.replace("0.0.0.0", "127.0.0.1"));
                    (url, p.app.admin_user.clone(), p.app.admin_password.clone())
                }
                None => (gateway, user, password),
            };
            let password = password.ok_or_else(|| OpsError::Usage("an admin password is required".into()))?;
            let api = Api::new(url);
            let token = api.login(&user, &password).await.map_err(seed::SeedError::from)?;
            print!("{}", seed::seed(&api, &token, &text, false).await?);
        }
        Command::Smoke { plan, golden, out } => {
            let plan = load(&plan)?;
            let transcript: String = smoke_plan(&plan, &exe()?).await?.iter().map(|l| format!("{l}\n")).collect();
            print!("{transcript}");
            if let Some(out) = out {
                write(&out, &transcript)?;
            }
            if let Some(golden) = golden {
                let expected = String::from_utf8_lossy(&read(&golden)?).into_owned();
                if expected != transcript {
                    eprintln!("transcript differs from {}", golden.display());
                    return Ok(ExitCode::from(2));
                }
            }
        }
        Command::Bench { plan, n, c, mix, seed, out } => {
            let plan = load(&plan)?;
            let summary = bench_plan(&plan, &exe()?, BenchOptions { requests: n, concurrency: c, mix, seed }).await?;
            let tsv = summary.to_tsv();
            print!("{tsv}");
            if let Some(out) = out {
                write(&out, &tsv)?;
            }
            if summary.audit_violations != Some(0) {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Decode { capture, idl } => {
            let doc = match idl {
                Some(p) => {
                    let text = String::from_utf8_lossy(&read(&p)?).into_owned();
                    std::sync::Arc::new(parse_idl(&text).map_err(|e| OpsError::Usage(format!("{}: {e}", p.display())))?)
                }
                None => contract::doc(),
            };
            print!("{}", describe_capture(&read(&capture)?, Some(&doc)));
        }
        Command::Audit { db_dir, plan } => {
            let policy = match plan {
                Some(p) => load(&p)?.app.policy,
                None => Policy::default(),
            };
            let violations = audit_store(&db_dir, &policy)?;
            for v in &violations {
                println!("{v}");
            }
            if !violations.is_empty() {
                return Ok(ExitCode::from(2));
            }
            println!("no violations");
        }
        Command::Tier { tier, plan } => run_tier(tier, &load(&plan)?).await?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().expect("tokio runtime");
    match runtime.block_on(execute(cli.command)) {
        Ok(code) => code,
        Err(OpsError::Usage(m)) => {
            eprintln!("fnucis: {m}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("fnucis: {e}");
            ExitCode::from(2)
        }
    }
}
