//! Live biofeedback service: tracks formants from an audio source, maps
//! them to tongue contours through a lookup table, and streams display
//! frames to websocket clients at `/ws`.

pub mod audio;
pub mod hub;
pub mod protocol;
pub mod session;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use thiserror::Error;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use tongue_core::formants::AnalysisConfig;
use tongue_core::lut::{LookupTable, LutError};
use tongue_core::regress::BundleError;
use tongue_core::ModelBundleF64;

pub use hub::{Hub, HubOptions};
pub use protocol::{ClientMessage, DisplayFrame, ServerMessage};
pub use session::{ConfigRejection, Session};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("model: {0}")]
    Model(#[from] BundleError),
    #[error("lookup table: {0}")]
    Lut(#[from] LutError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Config(#[from] ConfigRejection),
    #[error("runtime: {0}")]
    Runtime(#[from] std::io::Error),
}

impl ServeError {
    /// Process exit code: 2 for unreadable artifacts, 1 for a bad device
    /// or analysis setting, 3 for failures to run.
    pub fn exit_code(&self) -> i32 {
        match self {
            ServeError::MissingFile(_) | ServeError::Model(_) | ServeError::Lut(_) => 2,
            ServeError::Config(_) => 1,
            ServeError::Bind { .. } | ServeError::Runtime(_) => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub addr: SocketAddr,
    pub device: String,
    pub config: AnalysisConfig,
    pub hub: HubOptions,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            addr: SocketAddr::from(([127, 0, 0, 1], 8765)),
            device: "synth".into(),
            config: AnalysisConfig::default(),
            hub: HubOptions::default(),
        }
    }
}

/// A loaded lookup table plus startup banner lines, including a warning
/// when the table was compiled from a different model.
pub struct Artifacts {
    pub lut: Arc<LookupTable>,
    pub banner: Vec<String>,
    pub digest_mismatch: bool,
}

pub fn load_artifacts(model: &Path, lut: &Path) -> Result<Artifacts, ServeError> {
    for p in [model, lut] {
        if !p.is_file() {
            return Err(ServeError::MissingFile(p.to_path_buf()));
        }
    }
    let bundle = ModelBundleF64::load(model)?;
    let table = LookupTable::load(lut)?;
    let (n1, n2) = table.dims();
    let h = &table.header;
    let mut banner = vec![
        format!("model {} (corpus sha256 {})", model.display(), bundle.metadata.corpus_sha256),
        format!(
            "lookup table {}: {n1}x{n2} nodes, F1 {}-{} Hz, F2 {}-{} Hz",
            lut.display(),
            h.f1.lo,
            h.f1.hi,
            h.f2.lo,
            h.f2.hi
        ),
    ];
    let digest_mismatch = table.header.digest != bundle.digest_bytes();
    if digest_mismatch {
        banner.push("WARNING: lookup table was compiled from a different model; contours follow the table".into());
    }
    Ok(Artifacts {
        lut: Arc::new(table),
        banner,
        digest_mismatch,
    })
}

pub struct ServerHandle {
    pub addr: SocketAddr,
    pub hub: Arc<Hub>,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ServerHandle {
    pub async fn shutdown(mut self) -> Result<(), ServeError> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.wait().await
    }

    pub async fn wait(self) -> Result<(), ServeError> {
        match self.task.await {
            Ok(r) => Ok(r?),
            Err(e) => Err(ServeError::Runtime(std::io::Error::other(e))),
        }
    }
}

/// Binds the socket and starts serving in the background. Capture starts
/// with the first client.
pub async fn serve(lut: Arc<LookupTable>, options: ServeOptions) -> Result<ServerHandle, ServeError> {
    let session = Session::new(options.config.clone(), options.device.clone(), lut)?;
    let hub = Hub::new(session, options.hub.clone());
    let listener = tokio::net::TcpListener::bind(options.addr).await.map_err(|source| ServeError::Bind {
        addr: options.addr,
        source,
    })?;
    let addr = listener.local_addr()?;
    let app = Router::new()
        .route("/ws", get(upgrade))
        .route("/", get(|| async { "tongue service: connect a websocket to /ws\n" }))
        .with_state(hub.clone());
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    Ok(ServerHandle {
        addr,
        hub,
        shutdown: Some(tx),
        task,
    })
}

/// Loads the artifacts, prints the banner to stderr, and serves until
/// interrupted.
pub fn run(model: &Path, lut: &Path, options: ServeOptions) -> Result<(), ServeError> {
    let artifacts = load_artifacts(model, lut)?;
    for line in &artifacts.banner {
        eprintln!("{line}");
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let handle = serve(artifacts.lut, options).await?;
        eprintln!("listening on ws://{}/ws", handle.addr);
        tokio::signal::ctrl_c().await?;
        handle.shutdown().await
    })
}

async fn upgrade(ws: WebSocketUpgrade, State(hub): State<Arc<Hub>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client_session(socket, hub))
}

async fn client_session(socket: WebSocket, hub: Arc<Hub>) {
    let client = hub.connect();
    let (mut tx, mut rx) = socket.split();
    let writer = {
        let (client, hub) = (client.clone(), hub.clone());
        tokio::spawn(async move {
            let mut batch = Vec::new();
            loop {
                client.drain(&mut batch);
                if batch.is_empty() && client.is_closed() {
                    break;
                }
                for out in batch.drain(..) {
                    if tx.send(Message::Text(out.text.into())).await.is_err() {
                        return;
                    }
                    if let Some(t) = out.published {
                        hub.record_latency(t.elapsed());
                    }
                }
                client.notified().await;
            }
            let _ = tx.close().await;
        })
    };
    while let Some(msg) = rx.next().await {
        match msg {
            Ok(Message::Text(t)) => hub.handle_text(&client, t.as_str()),
            Ok(Message::Binary(_)) => client.push_control(&ServerMessage::error(serde_json::Value::Null, "expected a JSON text message")),
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => {}
        }
    }
    hub.disconnect(client.id);
    client.close();
    let _ = writer.await;
}
