//! Lossy fixed-delay message channel.

use rand::Rng;
use std::collections::VecDeque;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub publisher: String,
    pub key: String,
    pub value: String,
}

/// Drops each message independently with probability `p_loss`; survivors are
/// due `delay` ticks after `tick`, in their original order.
pub fn channel_deliver(
    messages: Vec<Envelope>,
    p_loss: f64,
    delay: u64,
    tick: u64,
    rng: &mut impl Rng,
) -> (Vec<(u64, Envelope)>, usize) {
    let mut kept = Vec::with_capacity(messages.len());
    let mut dropped = 0;
    for m in messages {
        // one draw per message keeps the random stream aligned across runs
        if rng.random::<f64>() < p_loss {
            dropped += 1;
        } else {
            kept.push((tick + delay, m));
        }
    }
    (kept, dropped)
}

/// Messages in flight.
#[derive(Clone, Debug, Default)]
pub struct Channel {
    pub p_loss: f64,
    pub delay: u64,
    pending: VecDeque<(u64, Envelope)>,
    pub sent: u64,
    pub dropped: u64,
}

impl Channel {
    pub fn new(p_loss: f64, delay: u64) -> Self {
        Self {
            p_loss,
            delay,
            ..Self::default()
        }
    }

    /// Queues `messages`; returns the ones that were lost.
    pub fn submit(&mut self, messages: Vec<Envelope>, tick: u64, rng: &mut impl Rng) -> Vec<Envelope> {
        self.sent += messages.len() as u64;
        let mut lost = Vec::new();
        for m in messages {
            if rng.random::<f64>() < self.p_loss {
                lost.push(m);
            } else {
                self.pending.push_back((tick + self.delay, m));
            }
        }
        self.dropped += lost.len() as u64;
        lost
    }

    /// Removes and returns every message due at or before `tick`.
    pub fn release(&mut self, tick: u64) -> Vec<Envelope> {
        let mut out = Vec::new();
        while self.pending.front().is_some_and(|(due, _)| *due <= tick) {
            out.push(self.pending.pop_front().expect("front exists").1);
        }
        out
    }

    pub fn in_flight(&self) -> usize {
        self.pending.len()
    }
}
