use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use conceptbench_core::promptgen::PromptRecord;
use conceptbench_core::stats::EvalRecord;

use crate::client::{ClientError, RemoteClient};

/// Evaluates `prompts` with at most `max_in_flight` concurrent requests.
///
/// Output order matches input order. Prompts whose requests fail are returned
/// as unevaluated records carrying the error. An authentication failure
/// aborts the whole batch.
pub fn run_batch(
    prompts: &[PromptRecord],
    client: &RemoteClient,
    max_in_flight: usize,
) -> Result<Vec<EvalRecord>, ClientError> {
    if max_in_flight == 0 {
        return Err(ClientError::Config("max_in_flight must be at least 1".into()));
    }
    let slots: Vec<Mutex<Option<EvalRecord>>> = prompts.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let auth_error: Mutex<Option<ClientError>> = Mutex::new(None);

    let worker = || loop {
        if abort.load(Ordering::SeqCst) {
            return;
        }
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(prompt) = prompts.get(i) else { return };
        let record = match client.predict(&prompt.text) {
            Ok(outcome) => {
                let mut r = EvalRecord::scored(
                    prompt.concept_id.clone(),
                    prompt.prompt_index,
                    prompt.answer,
                    outcome.prediction,
                );
                r.attempts = Some(outcome.attempts);
                r
            }
            Err(ClientError::Endpoint { attempts, source }) => {
                let mut r = EvalRecord::failed(
                    prompt.concept_id.clone(),
                    prompt.prompt_index,
                    prompt.answer,
                    source.to_string(),
                );
                r.attempts = Some(attempts);
                r
            }
            Err(e) => {
                abort.store(true, Ordering::SeqCst);
                auth_error.lock().unwrap().get_or_insert(e);
                return;
            }
        };
        *slots[i].lock().unwrap() = Some(record);
    };

    std::thread::scope(|scope| {
        for _ in 0..max_in_flight.min(prompts.len()) {
            scope.spawn(worker);
        }
    });

    if let Some(e) = auth_error.into_inner().unwrap() {
        return Err(e);
    }
    Ok(slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every prompt evaluated"))
        .collect())
}
