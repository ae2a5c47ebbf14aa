//! WebSocket transport for [`ProtocolSession`].
//!
//! Each connection gets its own session seeded with the server's chain.
//! Sessions never share state.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use kinesnap::ChainDefinition;
use tokio::net::TcpListener;

use crate::protocol::ProtocolSession;

#[derive(Clone)]
struct AppState {
    chain: Arc<ChainDefinition>,
}

pub fn router(chain: ChainDefinition) -> Router {
    Router::new()
        .route("/ws", get(upgrade))
        .route("/health", get(|| async { "ok" }))
        .with_state(AppState {
            chain: Arc::new(chain),
        })
}

/// Binds `addr` and returns the bound address together with the serving future.
pub async fn bind(
    chain: ChainDefinition,
    addr: SocketAddr,
) -> std::io::Result<(
    SocketAddr,
    impl std::future::Future<Output = std::io::Result<()>>,
)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let app = router(chain);
    Ok((local, async move { axum::serve(listener, app).await }))
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, (*state.chain).clone()))
}

async fn connection(mut socket: WebSocket, chain: ChainDefinition) {
    tracing::info!(chain = chain.name(), "session opened");
    let mut session = Some(ProtocolSession::new(chain));
    while let Some(msg) = socket.recv().await {
        let text = match msg {
            Ok(Message::Text(t)) => t.to_string(),
            Ok(Message::Binary(b)) => String::from_utf8_lossy(&b).into_owned(),
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => continue,
        };
        // solves are CPU-bound, keep them off the async workers
        let mut s = session
            .take()
            .expect("session is returned after each message");
        let (s, reply) = match tokio::task::spawn_blocking(move || {
            let reply = s.handle_text(&text);
            (s, reply)
        })
        .await
        {
            Ok(pair) => pair,
            Err(e) => {
                tracing::error!(error = %e, "session handler panicked");
                break;
            }
        };
        session = Some(s);
        tracing::debug!(%reply, "reply");
        if socket.send(Message::Text(reply.into())).await.is_err() {
            break;
        }
    }
    tracing::info!("session closed");
}
