//! Persistence and HTTP API for mesh annotations.
//!
//! [`Store`] keeps models, annotations, heat maps, schemas and the detector
//! registry on disk; [`api::router`] exposes it over HTTP; [`report`]
//! renders printable summaries.

pub mod api;
pub mod error;
pub mod report;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

pub use error::{DocumentViolation, ServiceError};
pub use store::{ModelEntry, Store, StoreOptions};

/// Settings for [`serve`].
#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub store: PathBuf,
    pub detectors_file: Option<PathBuf>,
    pub detector_timeout: Duration,
}

pub fn open_store(config: &ServiceConfig) -> Result<Store, ServiceError> {
    Store::open_with(
        &config.store,
        StoreOptions {
            detectors_file: config.detectors_file.clone(),
            detector_timeout: config.detector_timeout,
        },
    )
}

/// Serves the API until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let store = open_store(&config).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(config.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, store = %config.store.display(), "listening");
    axum::serve(listener, api::router(Arc::new(store)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
