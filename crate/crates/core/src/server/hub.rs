//! Fan-out of broadcast messages to independent bounded subscriber queues.
//!
//! The producer never waits on a subscriber: a full queue drops its oldest
//! message and counts the drop against that subscriber only.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use crossbeam::queue::ArrayQueue;
use crossbeam::sync::{Parker, Unparker};

use super::control::SubscriberStats;

/// An encoded wire message shared by all subscribers.
pub type Frame = Arc<Vec<u8>>;

struct Slot {
    id: u64,
    queue: ArrayQueue<Frame>,
    dropped: AtomicU64,
    sent: AtomicU64,
    closed: AtomicBool,
    unparker: Unparker,
}

#[derive(Default)]
pub struct Hub {
    slots: RwLock<Vec<Arc<Slot>>>,
    next_id: AtomicU64,
}

impl Hub {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(&self, capacity: usize) -> Subscription {
        let parker = Parker::new();
        let slot = Arc::new(Slot {
            id: self.next_id.fetch_add(1, Ordering::Relaxed),
            queue: ArrayQueue::new(capacity.max(1)),
            dropped: AtomicU64::new(0),
            sent: AtomicU64::new(0),
            closed: AtomicBool::new(false),
            unparker: parker.unparker().clone(),
        });
        let mut slots = self.slots.write().unwrap_or_else(|e| e.into_inner());
        slots.retain(|s| !s.closed.load(Ordering::Acquire));
        slots.push(slot.clone());
        Subscription { slot, parker }
    }

    /// Enqueue `frame` for every live subscriber without blocking.
    pub fn publish(&self, frame: Frame) {
        let slots = self.slots.read().unwrap_or_else(|e| e.into_inner());
        for s in slots.iter() {
            if s.closed.load(Ordering::Relaxed) {
                continue;
            }
            if s.queue.force_push(frame.clone()).is_some() {
                s.dropped.fetch_add(1, Ordering::Relaxed);
            }
            s.sent.fetch_add(1, Ordering::Relaxed);
            s.unparker.unpark();
        }
    }

    pub fn stats(&self) -> Vec<SubscriberStats> {
        let slots = self.slots.read().unwrap_or_else(|e| e.into_inner());
        slots
            .iter()
            .filter(|s| !s.closed.load(Ordering::Relaxed))
            .map(|s| SubscriberStats {
                id: s.id,
                queued: s.queue.len(),
                sent: s.sent.load(Ordering::Relaxed),
                dropped: s.dropped.load(Ordering::Relaxed),
            })
            .collect()
    }

    pub fn subscriber_count(&self) -> usize {
        self.stats().len()
    }
}

/// Receiving end of one subscriber queue. Dropping it unsubscribes.
pub struct Subscription {
    slot: Arc<Slot>,
    parker: Parker,
}

impl Subscription {
    pub fn id(&self) -> u64 {
        self.slot.id
    }

    pub fn try_recv(&self) -> Option<Frame> {
        self.slot.queue.pop()
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Option<Frame> {
        if let Some(f) = self.try_recv() {
            return Some(f);
        }
        self.parker.park_timeout(timeout);
        self.try_recv()
    }

    pub fn dropped(&self) -> u64 {
        self.slot.dropped.load(Ordering::Relaxed)
    }

    pub fn queued(&self) -> usize {
        self.slot.queue.len()
    }
}

impl Drop for Subscription {
    fn drop(&mut self) {
        self.slot.closed.store(true, Ordering::Release);
    }
}
