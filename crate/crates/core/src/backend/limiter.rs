use std::sync::{Condvar, Mutex};

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
pub(crate) struct AdmissionLimiter {
    available: Mutex<usize>,
    released: Condvar,
}

pub(crate) struct Permit<'a> {
    limiter: &'a AdmissionLimiter,
}

impl AdmissionLimiter {
    pub(crate) fn new(capacity: usize) -> Self {
        AdmissionLimiter {
            available: Mutex::new(capacity.max(1)),
            released: Condvar::new(),
        }
    }

    pub(crate) fn acquire(&self) -> Permit<'_> {
        let mut available = self.available.lock().unwrap_or_else(|e| e.into_inner());
        while *available == 0 {
            available = self.released.wait(available).unwrap_or_else(|e| e.into_inner());
        }
        *available -= 1;
        Permit { limiter: self }
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut available = self.limiter.available.lock().unwrap_or_else(|e| e.into_inner());
        *available += 1;
        self.limiter.released.notify_one();
    }
}
