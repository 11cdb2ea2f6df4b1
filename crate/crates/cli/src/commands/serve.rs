use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use idtrace_service::{serve, ServiceConfig, ServiceState};
use serde::Serialize;

use crate::error::CliError;
use crate::output::{emit, Format, Render};

#[derive(Debug, Serialize)]
pub struct Listening {
    pub listening: String,
    pub data_dir: String,
    pub datasets: usize,
    pub sessions: usize,
    pub skipped_sessions: usize,
}

impl Render for Listening {
    fn csv(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let header = [
            "listening",
            "data_dir",
            "datasets",
            "sessions",
            "skipped_sessions",
        ]
        .map(String::from)
        .to_vec();
        let row = vec![
            self.listening.clone(),
            self.data_dir.clone(),
            self.datasets.to_string(),
            self.sessions.to_string(),
            self.skipped_sessions.to_string(),
        ];
        (header, vec![row])
    }

    fn text(&self) -> String {
        format!(
            "listening on http://{} ({} datasets, {} sessions)\n",
            self.listening, self.datasets, self.sessions
        )
    }
}

pub fn run(
    addr: &str,
    data_dir: &Path,
    display_threshold: usize,
    static_dir: Option<PathBuf>,
    format: Format,
) -> Result<(), CliError> {
    let config = ServiceConfig {
        data_dir: data_dir.to_path_buf(),
        display_threshold,
    };
    let (state, report) = ServiceState::open(&config)?;
    for (id, reason) in &report.skipped {
        tracing::warn!(session = %id, %reason, "session not restored");
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::from(e).context(format!("binding {addr}")))?;
        let banner = Listening {
            listening: listener.local_addr()?.to_string(),
            data_dir: data_dir.display().to_string(),
            datasets: report.datasets,
            sessions: report.sessions,
            skipped_sessions: report.skipped.len(),
        };
        let mut stdout = io::stdout().lock();
        emit(format, &banner, &mut stdout)?;
        stdout.flush()?;
        drop(stdout);
        serve(listener, Arc::new(state), static_dir).await?;
        Ok(())
    })
}
