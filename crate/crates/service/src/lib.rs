//! Exploration service: loads pipeline artifacts and serves map data,
//! semantic search, region summaries, timeline filtering and idea
//! generation over HTTP.

pub mod api;
pub mod explore;
pub mod state;

use std::future::Future;
use std::sync::Arc;

use tokio::net::TcpListener;

pub use api::{router, ApiError, SharedState};
pub use explore::{
    filter_timeline, map_payload, rank_by_cosine, search, summarize_region, ExploreError, MapPayload,
    RegionSummary, SearchHit, SearchResult, TimeWindow,
};
pub use state::{load_state, ServiceState, StateError};

/// Serves the API on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: ServiceState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(Arc::new(state));
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}
