use std::sync::{Condvar, Mutex};
use std::time::Duration;

/// Depth-1 latest-wins buffer: a new arrival replaces an unconsumed old one,
/// bounding staleness under overload.
pub struct Mailbox<T> {
    slot: Mutex<Slot<T>>,
    cv: Condvar,
}

struct Slot<T> {
    item: Option<T>,
    closed: bool,
}

impl<T> Default for Mailbox<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> Mailbox<T> {
    pub fn new() -> Self {
        Self {
            slot: Mutex::new(Slot {
                item: None,
                closed: false,
            }),
            cv: Condvar::new(),
        }
    }

    /// Deposits an item; returns true when an unconsumed item was replaced.
    pub fn put(&self, item: T) -> bool {
        let mut slot = self.slot.lock().unwrap();
        if slot.closed {
            return false;
        }
        let replaced = slot.item.replace(item).is_some();
        self.cv.notify_one();
        replaced
    }

    /// Blocks until an item arrives or the mailbox closes.
    pub fn take(&self) -> Option<T> {
        let mut slot = self.slot.lock().unwrap();
        loop {
            if let Some(item) = slot.item.take() {
                return Some(item);
            }
            if slot.closed {
                return None;
            }
            slot = self.cv.wait(slot).unwrap();
        }
    }

    /// Like [`take`](Self::take) but gives up after `timeout`.
    pub fn take_timeout(&self, timeout: Duration) -> Option<T> {
        let deadline = std::time::Instant::now() + timeout;
        let mut slot = self.slot.lock().unwrap();
        loop {
            if let Some(item) = slot.item.take() {
                return Some(item);
            }
            if slot.closed {
                return None;
            }
            let now = std::time::Instant::now();
            if now >= deadline {
                return None;
            }
            let (guard, _) = self.cv.wait_timeout(slot, deadline - now).unwrap();
            slot = guard;
        }
    }

    pub fn close(&self) {
        self.slot.lock().unwrap().closed = true;
        self.cv.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.slot.lock().unwrap().closed
    }
}
