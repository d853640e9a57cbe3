//! Serves the REST API on an ephemeral port, drives one run through it with
//! the HTTP client, and shuts down cleanly.

use std::sync::Arc;
use std::time::Duration;

use autosteer::client::ApiClient;
use autosteer::data::gaussian_blobs;
use autosteer::service::{RunRequest, Store};

#[tokio::main]
async fn main() -> autosteer::error::Result<()> {
    let store = Arc::new(Store::in_memory());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(autosteer::api::serve(store, listener, async {
        let _ = stop_rx.await;
    }));
    println!("serving on http://{addr}");

    let client = ApiClient::remote(&format!("http://{addr}"));
    let ds = client.add_dataset(gaussian_blobs(100, 3, 1.5, 2).to_csv().into_bytes(), "blobs").await?;
    let req = RunRequest { metric: Some("f1_cv3".into()), start: true, ..RunRequest::new(&ds.id, 25, 1) };
    let run = client.create_run(&req).await?;
    let done = client.wait_for(&run.run.id, Duration::from_millis(50)).await?;
    let o = client.overview(&done.run.id, 3).await?;
    println!("{} {} after {} trials, best {:?}", done.run.id, done.reported_status, done.n_trials, o.best_score);
    let page = client.trials(&done.run.id, 20).await?;
    println!("trials after #20: {:?}", page.trials.iter().map(|t| t.trial_id).collect::<Vec<_>>());

    let _ = stop_tx.send(());
    server.await.expect("server task")?;
    Ok(())
}
