use std::io::Write;
use std::process::ExitCode;

use afva_core::annotation::{router, AppState, ServiceConfig};
use anyhow::Context;

use crate::ServeArgs;

async fn shutdown_signal() {
    let interrupt = tokio::signal::ctrl_c();
    #[cfg(unix)]
    {
        let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate())
            .expect("installing SIGTERM handler");
        tokio::select! {
            _ = interrupt => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = interrupt.await;
    }
}

pub fn serve(args: ServeArgs) -> anyhow::Result<ExitCode> {
    let mut config = ServiceConfig::new(&args.images, &args.log, args.seed);
    config.ui_dir = args.ui_dir.clone();
    if let Some(dir) = &config.ui_dir {
        anyhow::ensure!(dir.is_dir(), "ui directory {} does not exist", dir.display());
    }
    let state = AppState::open(&config)?;
    let app = router(state.clone(), config.ui_dir.as_deref());
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.listen)
            .await
            .with_context(|| format!("binding {}", args.listen))?;
        println!("listening on {}", listener.local_addr()?);
        std::io::stdout().flush()?;
        axum::serve(listener, app)
            .with_graceful_shutdown(shutdown_signal())
            .await?;
        anyhow::Ok(())
    })?;
    state.flush()?;
    eprintln!("rating log flushed; bye");
    Ok(ExitCode::SUCCESS)
}
