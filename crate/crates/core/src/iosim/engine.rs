use std::collections::BinaryHeap;

use rustc_hash::{FxHashMap, FxHashSet};

use super::Policy;

/// One operand of an operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Access {
    pub id: u64,
    pub input: bool,
    pub output: bool,
    /// Schedule position of the next use after the current operation.
    pub next: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub compulsory_reads: u64,
    pub reloads: u64,
    pub spills: u64,
    pub output_flushes: u64,
    pub peak: usize,
    pub executed: u64,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    ver: u32,
    dirty: bool,
    pinned: bool,
    output: bool,
}

/// Fast memory of fixed capacity with dirty tracking.
#[derive(Debug)]
pub struct Memory {
    cap: usize,
    policy: Policy,
    resident: FxHashMap<u64, Entry>,
    /// Eviction candidates `(priority, id, version)`; stale entries are skipped.
    heap: BinaryHeap<(u64, u64, u32)>,
    inputs_read: FxHashSet<u64>,
    tally: Tally,
}

impl Memory {
    pub fn new(cap: usize, policy: Policy) -> Self {
        Self {
            cap,
            policy,
            resident: FxHashMap::default(),
            heap: BinaryHeap::new(),
            inputs_read: FxHashSet::default(),
            tally: Tally::default(),
        }
    }

    /// Higher priority is evicted first.
    fn priority(&self, t: u64, next: u64) -> u64 {
        match self.policy {
            Policy::Belady => next,
            Policy::Lru => u64::MAX - t,
        }
    }

    fn evict_one(&mut self) {
        while let Some((_, id, ver)) = self.heap.pop() {
            let Some(e) = self.resident.get(&id) else { continue };
            if e.ver != ver || e.pinned {
                continue;
            }
            if e.dirty {
                self.tally.spills += 1;
            }
            self.resident.remove(&id);
            return;
        }
        panic!("fast memory holds only pinned values; capacity check failed");
    }

    fn make_room(&mut self, extra: usize) {
        while self.resident.len() + extra > self.cap {
            self.evict_one();
        }
    }

    fn enqueue(&mut self, id: u64, t: u64, next: u64) {
        let p = self.priority(t, next);
        let e = self.resident.get_mut(&id).expect("resident");
        e.ver = e.ver.wrapping_add(1);
        e.pinned = false;
        let ver = e.ver;
        self.heap.push((p, id, ver));
        if self.heap.len() > 4 * self.resident.len() + 4096 {
            self.compact();
        }
    }

    fn compact(&mut self) {
        let mut fresh: Vec<(u64, u64, u32)> = Vec::with_capacity(self.resident.len());
        for (p, id, ver) in self.heap.drain() {
            if self.resident.get(&id).is_some_and(|e| e.ver == ver && !e.pinned) {
                fresh.push((p, id, ver));
            }
        }
        self.heap = BinaryHeap::from(fresh);
    }

    /// Execute operation `v` at schedule position `t`.
    pub fn execute(&mut self, t: u64, v: u64, operands: &[Access], next: Option<u64>, output: bool) {
        for a in operands {
            if let Some(e) = self.resident.get_mut(&a.id) {
                e.pinned = true;
                continue;
            }
            self.make_room(1);
            if a.input && self.inputs_read.insert(a.id) {
                self.tally.compulsory_reads += 1;
            } else {
                self.tally.reloads += 1;
            }
            self.resident.insert(a.id, Entry { ver: 0, dirty: false, pinned: true, output: a.output });
        }
        self.make_room(1);
        self.tally.executed += 1;
        self.tally.peak = self.tally.peak.max(self.resident.len() + 1);
        for a in operands {
            match a.next {
                Some(nu) => {
                    if self.resident.get(&a.id).is_some_and(|e| e.pinned) {
                        self.enqueue(a.id, t, nu);
                    }
                }
                None => {
                    if let Some(e) = self.resident.remove(&a.id) {
                        if e.dirty && e.output {
                            self.tally.output_flushes += 1;
                        }
                    }
                }
            }
        }
        match next {
            Some(nu) => {
                self.resident.insert(v, Entry { ver: 0, dirty: true, pinned: true, output });
                self.enqueue(v, t, nu);
            }
            None if output => self.tally.output_flushes += 1,
            None => {}
        }
    }

    pub fn resident(&self) -> usize {
        self.resident.len()
    }

    /// Write back outputs still dirty and return the tallies.
    pub fn finish(mut self) -> Tally {
        self.tally.output_flushes += self.resident.values().filter(|e| e.dirty && e.output).count() as u64;
        self.tally
    }
}
