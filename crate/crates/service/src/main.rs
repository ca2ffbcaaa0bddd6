use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use natproof_service::{app, AppState, ServiceConfig, DEFAULT_MAX_BODY};

#[derive(Parser, Debug)]
#[command(name = "natproof-service", version, about = "HTTP service for the proof checker")]
struct Args {
    #[arg(long, env = "PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, env = "BIND", default_value = "127.0.0.1")]
    bind: IpAddr,
    /// Library directory searched before the bundled libraries.
    #[arg(long = "lib-dir", env = "LIB_DIR")]
    lib_dir: Option<PathBuf>,
    /// Per-obligation timeout in seconds.
    #[arg(long, env = "TIMEOUT_S", default_value_t = 10.0)]
    timeout_s: f64,
    /// Largest accepted request body in bytes.
    #[arg(long, default_value_t = DEFAULT_MAX_BODY)]
    max_body: usize,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let args = Args::parse();
    if !(args.timeout_s.is_finite() && args.timeout_s > 0.0) {
        return Err(format!("timeout must be positive, got {}", args.timeout_s).into());
    }
    let config = ServiceConfig {
        lib_dirs: args.lib_dir.into_iter().collect(),
        timeout: Duration::from_secs_f64(args.timeout_s),
        max_body: args.max_body,
        ..ServiceConfig::default()
    };
    let addr = SocketAddr::new(args.bind, args.port);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {addr}");
    axum::serve(listener, app(AppState::new(config))).await?;
    Ok(())
}
