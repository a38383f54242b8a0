//! HTTP service for the explanation user study.
//!
//! [`prepare_materials`] builds or reuses one explanation bundle per study
//! target; [`router`] exposes session creation, trial delivery, response
//! capture, export and bundle assets over JSON.

pub mod api;
pub mod materials;

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use bteach_core::study::{SessionError, SessionStore};

pub use api::{router, AppState, API_SCHEMA_VERSION};
pub use materials::{prepare_materials, MaterialsError, StudyMaterials};

/// Opens the session store under `sessions_dir` and wires up the router.
pub fn app(materials: StudyMaterials, sessions_dir: &Path) -> Result<axum::Router, SessionError> {
    let store = SessionStore::open(sessions_dir, materials.targets.clone())?;
    Ok(router(Arc::new(AppState { store, materials })))
}

/// Serves `app` on `addr` until the process is stopped.
pub fn serve_blocking(addr: SocketAddr, app: axum::Router, on_ready: impl FnOnce(SocketAddr)) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        on_ready(listener.local_addr()?);
        axum::serve(listener, app).await
    })
}
