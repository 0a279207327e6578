use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use super::{invoke_cached, InvokeRequest, Invoker, RawResponse, ResponseCache};
use crate::error::Result;

#[derive(Debug)]
pub struct DispatchOutcome {
    /// One slot per request, in input order. `None` means the request was
    /// not attempted because an earlier one failed.
    pub responses: Vec<Option<Result<RawResponse>>>,
    pub cache_hits: usize,
}

impl DispatchOutcome {
    pub fn first_error(&self) -> Option<&crate::error::Error> {
        self.responses.iter().flatten().find_map(|r| r.as_ref().err())
    }
}

/// Run requests on up to `parallelism` worker threads, each issuing one
/// request at a time. The first failure stops workers from taking new
/// requests.
pub fn dispatch(
    invoker: &dyn Invoker,
    cache: Option<&ResponseCache>,
    requests: &[InvokeRequest],
    parallelism: usize,
) -> DispatchOutcome {
    let workers = parallelism.max(1).min(requests.len().max(1));
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let hits = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<RawResponse>>>> = Mutex::new((0..requests.len()).map(|_| None).collect());

    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if failed.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(request) = requests.get(i) else { break };
                let result = invoke_cached(invoker, request, cache);
                match &result {
                    Ok(r) if r.from_cache => {
                        hits.fetch_add(1, Ordering::Relaxed);
                    }
                    Err(_) => failed.store(true, Ordering::SeqCst),
                    _ => {}
                }
                slots.lock().expect("dispatch slots")[i] = Some(result);
            });
        }
    });

    DispatchOutcome {
        responses: slots.into_inner().expect("dispatch slots"),
        cache_hits: hits.into_inner(),
    }
}
