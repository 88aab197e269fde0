//! Cycle stepping of one matrix-vector phase across the lane grid.

use super::config::{AcceleratorConfig, Derived};
use super::partition::LaneAssignment;
use super::stats::{LaneCycles, SimStats};
use crate::error::{Error, Result};
use crate::model::SignSplitAcc;
use crate::sparse::{CompactMatrix, CompactVector};

/// Work of one lane for one output column.
#[derive(Clone, Copy, Debug)]
struct Seg {
    col: u32,
    start: u32,
    /// One past the last item still unclaimed from the back.
    end: u32,
    /// First item that lies in the duplicated tail rows.
    tail: u32,
    acc: SignSplitAcc,
}

#[derive(Clone, Debug, Default)]
struct Lane {
    items: Vec<(i16, i16)>,
    segs: Vec<Seg>,
    cur: usize,
    front: u32,
    pending: bool,
    queue: usize,
    done: bool,
    /// Set once stealing has failed; victims' tails only shrink, so it
    /// stays failed for the rest of the phase.
    dry: bool,
    steal: bool,
    /// Cycles of the current phase, flushed into the run totals at the end.
    cyc: LaneCycles,
}

impl Lane {
    fn reset(&mut self) {
        self.items.clear();
        self.segs.clear();
        self.cur = 0;
        self.front = 0;
        self.pending = false;
        self.queue = 0;
        self.done = false;
        self.dry = !self.steal;
        self.cyc = LaneCycles::default();
    }
}

/// Reusable lane state for one accelerator configuration.
pub(crate) struct Engine {
    h: usize,
    v: usize,
    depth: usize,
    fill: u64,
    dense: bool,
    lanes: Vec<Lane>,
    /// Lanes each lane may steal from, in preference order.
    victims: Vec<Vec<usize>>,
    popped: Vec<usize>,
    ncols: Vec<usize>,
    /// Lanes of each horizontal group whose queue is non-empty.
    ready: Vec<usize>,
    /// Lanes still stepped every cycle, ascending.
    active: Vec<usize>,
    /// Cycle at which a lane left `active`; it idles from then on.
    retired_at: Vec<u64>,
    stolen: u64,
}

pub(crate) struct PhaseInput<'a> {
    pub w: &'a CompactMatrix,
    pub act: &'a [i16],
    /// Same activations in compact form.
    pub act_compact: &'a CompactVector<i16>,
    pub skip: Option<&'a [bool]>,
    pub assign: &'a LaneAssignment,
    pub row_slice: &'a [u16],
    pub col_slice: &'a [u16],
}

impl Engine {
    pub fn new(cfg: &AcceleratorConfig, derived: &Derived, dense: bool) -> Self {
        let (h, v) = (cfg.horiz_lanes, cfg.vert_lanes);
        let per_pe = derived.lanes_per_pe;
        let victims = (0..h * v)
            .map(|id| {
                let (hi, vi) = (id / v, id % v);
                let mut out = Vec::new();
                if cfg.load_balance.vertical() && v > 1 {
                    out.push(hi * v + (vi + 1) % v);
                }
                if cfg.load_balance.horizontal() && per_pe > 1 {
                    let base = hi / per_pe * per_pe;
                    out.push((base + (hi - base + 1) % per_pe) * v + vi);
                }
                out
            })
            .collect::<Vec<Vec<usize>>>();
        let mut lanes = vec![Lane::default(); h * v];
        for (l, vs) in lanes.iter_mut().zip(&victims) {
            l.steal = !vs.is_empty();
        }
        Engine {
            h,
            v,
            depth: cfg.queue_depth,
            fill: cfg.pipeline_fill,
            dense,
            lanes,
            victims,
            popped: vec![0; h],
            ncols: vec![0; h],
            ready: vec![0; h],
            active: Vec::with_capacity(h * v),
            retired_at: vec![0; h * v],
            stolen: 0,
        }
    }

    fn build(&mut self, p: &PhaseInput) {
        for l in &mut self.lanes {
            l.reset();
        }
        self.ncols.iter_mut().for_each(|n| *n = 0);
        self.popped.iter_mut().for_each(|n| *n = 0);
        self.ready.iter_mut().for_each(|n| *n = 0);
        let v = self.v;
        let mut dense_col = Vec::new();
        for c in 0..p.w.cols() {
            if p.skip.is_some_and(|s| s[c]) {
                continue;
            }
            let hi = p.col_slice[c] as usize;
            self.ncols[hi] += 1;
            for vi in 0..v {
                let lane = &mut self.lanes[hi * v + vi];
                let at = lane.items.len() as u32;
                lane.segs.push(Seg {
                    col: c as u32,
                    start: at,
                    end: at,
                    tail: u32::MAX,
                    acc: SignSplitAcc::default(),
                });
            }
            let mut push = |r: usize, w: i16, a: i16| {
                let vi = p.row_slice[r] as usize;
                let lane = &mut self.lanes[hi * v + vi];
                let seg = lane.segs.last_mut().expect("segment opened above");
                if seg.tail == u32::MAX && r >= p.assign.tail_start(vi) {
                    seg.tail = lane.items.len() as u32;
                }
                lane.items.push((w, a));
                seg.end += 1;
            };
            if self.dense {
                dense_col.clear();
                dense_col.extend(p.w.column(c).decode());
                for (r, &w) in dense_col.iter().enumerate() {
                    push(r, w, p.act[r]);
                }
            } else {
                for (r, w, a) in p.w.column(c).joint(p.act_compact) {
                    push(r, w, a);
                }
            }
            for vi in 0..v {
                let lane = &mut self.lanes[hi * v + vi];
                let seg = lane.segs.last_mut().expect("segment opened above");
                if seg.tail == u32::MAX {
                    seg.tail = seg.end;
                }
            }
        }
        for l in &mut self.lanes {
            l.front = l.segs.first().map_or(0, |s| s.start);
        }
    }

    /// Takes one unclaimed tail item from a victim lane, back first.
    fn try_steal(&mut self, id: usize) -> bool {
        if self.lanes[id].dry {
            return false;
        }
        for vi in 0..self.victims[id].len() {
            let u = self.victims[id][vi];
            let lane = &mut self.lanes[u];
            for k in lane.cur..lane.segs.len() {
                let lo_front = if k == lane.cur { lane.front } else { lane.segs[k].start };
                let seg = &mut lane.segs[k];
                let lo = seg.tail.max(lo_front);
                if seg.end > lo {
                    seg.end -= 1;
                    let (w, a) = lane.items[seg.end as usize];
                    seg.acc.mac(w, a);
                    self.stolen += 1;
                    self.lanes[id].cyc.mac_busy += 1;
                    return true;
                }
            }
        }
        self.lanes[id].dry = true;
        false
    }

    /// Advances one lane by a cycle. Returns true once the lane can do
    /// nothing but idle for the rest of the phase.
    fn step_lane(&mut self, id: usize) -> bool {
        let lane = &mut self.lanes[id];
        if lane.done {
            if !lane.dry && self.try_steal(id) {
                return false;
            }
            self.lanes[id].cyc.idle += 1;
            return true;
        }
        let mut pushed = false;
        if lane.pending {
            if lane.queue < self.depth {
                if lane.queue == 0 {
                    self.ready[id / self.v] += 1;
                }
                lane.queue += 1;
                lane.pending = false;
                pushed = true;
            } else {
                if !(!lane.dry && self.try_steal(id)) {
                    self.lanes[id].cyc.stall += 1;
                }
                return false;
            }
        }
        if lane.cur == lane.segs.len() {
            lane.done = true;
            if pushed {
                lane.cyc.frontend += 1;
            } else {
                lane.cyc.idle += 1;
            }
            return lane.dry;
        }
        let seg = &mut lane.segs[lane.cur];
        let finished = if lane.front < seg.end {
            let (w, a) = lane.items[lane.front as usize];
            seg.acc.mac(w, a);
            lane.front += 1;
            lane.cyc.mac_busy += 1;
            lane.front == seg.end
        } else {
            lane.cyc.frontend += 1;
            true
        };
        if finished {
            lane.pending = true;
            lane.cur += 1;
            if let Some(next) = lane.segs.get(lane.cur) {
                lane.front = next.start;
            }
        }
        false
    }

    /// Cycles from now during which the lane only issues MACs inside its
    /// current segment (or stalls with nothing to steal), so it cannot
    /// affect any other lane. `u64::MAX` means it waits on others.
    fn quiet_for(&self, id: usize) -> u64 {
        let l = &self.lanes[id];
        if l.done {
            return if l.dry { u64::MAX } else { 0 };
        }
        if l.pending {
            let blocked = l.queue >= self.depth && l.dry && self.ready[id / self.v] < self.v;
            return if blocked { u64::MAX } else { 0 };
        }
        match l.segs.get(l.cur) {
            Some(seg) if l.front < seg.end => (seg.end - l.front - 1) as u64,
            _ => 0,
        }
    }

    /// Applies `k` quiet cycles at once. Returns how many horizontal
    /// groups drained their last column meanwhile.
    fn skip(&mut self, k: u64) -> usize {
        let mut finished = 0;
        let v = self.v;
        for hi in 0..self.h {
            if self.ready[hi] != v || self.popped[hi] == self.ncols[hi] {
                continue;
            }
            let group = &mut self.lanes[hi * v..(hi + 1) * v];
            let minq = group.iter().map(|l| l.queue).min().unwrap_or(0) as u64;
            let n = k.min(minq).min((self.ncols[hi] - self.popped[hi]) as u64) as usize;
            for l in group.iter_mut() {
                l.queue -= n;
                if l.queue == 0 {
                    self.ready[hi] -= 1;
                }
            }
            self.popped[hi] += n;
            if self.popped[hi] == self.ncols[hi] {
                finished += 1;
            }
        }
        for &id in &self.active {
            let lane = &mut self.lanes[id];
            if lane.pending {
                lane.cyc.stall += k;
                continue;
            }
            let seg = &mut lane.segs[lane.cur];
            for &(w, a) in &lane.items[lane.front as usize..lane.front as usize + k as usize] {
                seg.acc.mac(w, a);
            }
            lane.front += k as u32;
            lane.cyc.mac_busy += k;
        }
        finished
    }

    /// Runs one phase to completion and returns per-column accumulators
    /// (skipped columns stay zero) and the phase length in cycles.
    pub fn run_phase(&mut self, p: &PhaseInput, stats: &mut SimStats) -> Result<(Vec<SignSplitAcc>, u64)> {
        self.build(p);
        let (h, v) = (self.h, self.v);
        let mut remaining = self.ncols.iter().filter(|n| **n > 0).count();
        let mut accs = vec![SignSplitAcc::default(); p.w.cols()];
        if remaining == 0 {
            return Ok((accs, 0));
        }
        self.stolen = 0;
        self.active.clear();
        self.active.extend(0..h * v);
        self.retired_at.iter_mut().for_each(|c| *c = u64::MAX);
        let mut cycles = self.fill;
        // Generous bound: every lane serializing every item plus per-column
        // overheads. Exceeding it means the schedule deadlocked.
        let budget: u64 = self.lanes.iter().map(|l| l.items.len() as u64 + 2 * l.segs.len() as u64).sum::<u64>() + 16;
        loop {
            let quiet = self.active.iter().map(|&id| self.quiet_for(id)).min().unwrap_or(0);
            if quiet > 0 && quiet != u64::MAX {
                cycles += quiet;
                remaining -= self.skip(quiet);
            }
            cycles += 1;
            if cycles > budget + self.fill {
                return Err(Error::Integrity(format!("phase exceeded {budget} cycles")));
            }
            for hi in 0..h {
                if self.popped[hi] == self.ncols[hi] {
                    continue;
                }
                if self.ready[hi] == v {
                    let group = &mut self.lanes[hi * v..(hi + 1) * v];
                    for l in group.iter_mut() {
                        l.queue -= 1;
                        if l.queue == 0 {
                            self.ready[hi] -= 1;
                        }
                    }
                    self.popped[hi] += 1;
                    if self.popped[hi] == self.ncols[hi] {
                        remaining -= 1;
                    }
                }
            }
            if remaining == 0 {
                for (id, l) in self.lanes.iter().enumerate() {
                    if !l.done || l.pending || l.queue != 0 {
                        return Err(Error::Integrity(format!("lane {id} still busy after final pop")));
                    }
                }
                // Active lanes idle through the final cycle; retired ones
                // idle from their retirement on.
                for &id in &self.active {
                    self.lanes[id].cyc.idle += 1;
                }
                for (l, &at) in self.lanes.iter_mut().zip(&self.retired_at) {
                    if at != u64::MAX {
                        l.cyc.idle += cycles - at;
                    }
                }
                break;
            }
            let mut retired = false;
            for k in 0..self.active.len() {
                let id = self.active[k];
                if self.step_lane(id) {
                    self.retired_at[id] = cycles;
                    retired = true;
                }
            }
            if retired {
                let at = &self.retired_at;
                self.active.retain(|&id| at[id] != cycles);
            }
        }

        let mut executed = 0;
        let mut work = 0;
        let mut segs = 0;
        for (l, total) in self.lanes.iter().zip(stats.lanes.iter_mut()) {
            executed += l.cyc.mac_busy;
            work += l.items.len() as u64;
            segs += l.segs.len() as u64;
            total.mac_busy += l.cyc.mac_busy;
            total.idle += l.cyc.idle;
            total.stall += l.cyc.stall;
            total.frontend += l.cyc.frontend + self.fill;
            for s in &l.segs {
                accs[s.col as usize].merge(&s.acc);
            }
        }
        if executed != work {
            return Err(Error::Integrity(format!("executed {executed} MACs for {work} work items")));
        }
        stats.mac_count += executed;
        stats.stolen_macs += self.stolen;
        stats.sram_reads.weight += executed;
        stats.sram_reads.weight_mask += segs;
        stats.regfile_reads += executed + segs;
        stats.queue_pushes += segs;
        stats.queue_pops += segs;
        stats.fill_cycles += self.fill;
        stats.matvec_cycles += cycles;
        stats.total_cycles += cycles;
        stats.phases += 1;
        Ok((accs, cycles))
    }
}
