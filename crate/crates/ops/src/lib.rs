//! Deployment, seeding and verification tooling for the campus system.

pub mod api;
pub mod bench;
pub mod deploy;
pub mod plan;
pub mod seed;
pub mod smoke;

use std::path::Path;

use cis_appserver::storage::ViewRepo;
use cis_domain::{contract, DomainError, Policy};
use cis_store::{Store, StoreError};
use thiserror::Error;

use api::Api;
use bench::{BenchError, BenchOptions, Summary};
use deploy::{DeployError, Deployment};
use plan::Plan;
use seed::SeedError;
use smoke::SmokeError;

#[derive(Debug, Error)]
pub enum OpsError {
    #[error(transparent)]
    Deploy(#[from] DeployError),
    #[error(transparent)]
    Seed(#[from] SeedError),
    #[error(transparent)]
    Smoke(#[from] SmokeError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("audit: {0}")]
    Audit(DomainError),
    #[error("{0}")]
    Usage(String),
}

/// Recomputes every domain invariant over the store in `dir`. The store
/// must not be open elsewhere.
pub fn audit_store(dir: &Path, policy: &Policy) -> Result<Vec<String>, OpsError> {
    let store = Store::open(dir)?;
    let doc = contract::doc();
    let result = store
        .view()
        .map_err(OpsError::from)
        .and_then(|view| cis_domain::audit::audit(&ViewRepo { view, doc: &doc }, policy).map_err(OpsError::Audit));
    store.close()?;
    result
}

fn admin_credentials(plan: &Plan) -> Result<(&str, &str), OpsError> {
    let pw = plan.app.admin_password.as_deref().ok_or_else(|| OpsError::Usage("[app] needs admin_password".into()))?;
    Ok((&plan.app.admin_user, pw))
}

/// Deploys `plan`, runs the smoke scenario and tears the deployment down.
pub async fn smoke_plan(plan: &Plan, exe: &Path) -> Result<Vec<String>, OpsError> {
    let (user, pw) = admin_credentials(plan)?;
    let d = Deployment::start(plan, exe).await?;
    let result = smoke::smoke(&Api::new(d.gateway_url()), user, pw).await;
    d.stop().await?;
    Ok(result?)
}

/// Deploys `plan`, loads the demo fixture when missing, runs the benchmark,
/// stops the deployment and audits the store.
pub async fn bench_plan(plan: &Plan, exe: &Path, opts: BenchOptions) -> Result<Summary, OpsError> {
    let (user, pw) = admin_credentials(plan)?;
    let d = Deployment::start(plan, exe).await?;
    let api = Api::new(d.gateway_url());
    let result = async {
        let token = api.login(user, pw).await.map_err(SeedError::from)?;
        seed::seed(&api, &token, smoke::DEMO_FIXTURE, false).await?;
        Ok::<_, OpsError>(bench::run(&api, &plan.mode.to_string(), opts).await?)
    }
    .await;
    d.stop().await?;
    let mut summary = result?;
    let dir = plan.app.db_dir.as_deref().ok_or_else(|| OpsError::Usage("[app] needs db_dir".into()))?;
    summary.audit_violations = Some(audit_store(dir, &plan.app.policy)?.len());
    Ok(summary)
}
