use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;

use clap::Args;
use reqlens_core::{RuleConfig, TaxonomyConfig};
use reqlens_service::ServiceConfig;

use crate::{input_err, CliError, EXIT_OK};

#[derive(Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: IpAddr,
    /// Sessions and rater results live here
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Corpus to serve; repeatable
    #[arg(long = "corpus", required = true)]
    pub corpora: Vec<PathBuf>,
    /// Annotation UI bundle
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    #[arg(long)]
    pub rules_config: Option<PathBuf>,
    #[arg(long)]
    pub taxonomy_config: Option<PathBuf>,
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    log::info!("shutting down");
}

pub fn serve(args: ServeArgs) -> Result<u8, CliError> {
    let config = ServiceConfig {
        data_dir: args.data_dir,
        corpora: args.corpora,
        ui_dir: args.ui_dir,
        rules: match &args.rules_config {
            Some(p) => RuleConfig::load(p).map_err(input_err)?,
            None => RuleConfig::default(),
        },
        taxonomy: match &args.taxonomy_config {
            Some(p) => TaxonomyConfig::load(p).map_err(input_err)?,
            None => TaxonomyConfig::default(),
        },
    };
    let addr = SocketAddr::new(args.bind, args.port);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Input(e.to_string()))?;
    runtime
        .block_on(reqlens_service::serve(config, addr, shutdown_signal(), |bound| {
            println!("listening on http://{bound}");
            use std::io::Write;
            let _ = std::io::stdout().flush();
        }))
        .map_err(input_err)?;
    Ok(EXIT_OK)
}
