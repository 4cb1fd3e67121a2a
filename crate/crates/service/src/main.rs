use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;
use diagraph_service::{router, AppState, Store};

#[derive(Debug, Parser)]
#[command(name = "diagraph-service", version, about = "Annotation review service")]
struct Args {
    /// Store directory.
    #[arg(long)]
    data: PathBuf,
    /// Synthesized dataset directories to register before serving.
    #[arg(long)]
    import: Vec<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
}

#[tokio::main]
async fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DIAGRAPH_LOG", "info")).init();
    let args = Args::parse();
    let store = match Store::open(&args.data) {
        Ok(s) => s,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": { "kind": "io", "message": e.to_string() } })
            );
            std::process::exit(2);
        }
    };
    for dir in &args.import {
        match store.import_dataset(dir) {
            Ok(n) => log::info!("imported {n} diagrams from {}", dir.display()),
            Err(e) => {
                eprintln!(
                    "{}",
                    serde_json::json!({ "error": { "kind": "import", "message": e.to_string() } })
                );
                std::process::exit(2);
            }
        }
    }
    let listener = match tokio::net::TcpListener::bind(args.addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": { "kind": "io", "message": e.to_string() } })
            );
            std::process::exit(2);
        }
    };
    log::info!("listening on {}", args.addr);
    if let Err(e) = axum::serve(listener, router(AppState::new(store))).await {
        log::error!("server stopped: {e}");
        std::process::exit(2);
    }
}
