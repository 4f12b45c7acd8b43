//! The wired N-source network and its event handler.
//!
//! Every output port serializes one cell per cell time onto its link; the
//! cell arrives at the far end after the link's propagation delay. Host
//! ports have unbounded queues, switch ports a finite [`SwitchBuffer`].
//! The satellite hop is a pure delay element: switch 1's forward port feeds
//! switch 2 directly.

use std::collections::{HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aal5::{cells_for_payload, Aal5Frame, Cell, Direction, ReassemblyEvent, Reassembler, VcId, CELL_BYTES};
use crate::contract::{Policer, TrafficDescriptor};
use crate::sim::{EventQueue, Handler, SimError, SimEvent, SimTime};
use crate::switch::{DropPolicy, EnqueueOutcome, SwitchBuffer, VcCounters};
use crate::tcp::{Segment, SenderStats, TcpReceiver, TcpSender};
use crate::topology::{ConfigError, ScenarioConfig};

pub type PortId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Node {
    Switch1,
    Switch2,
    Source(VcId),
    Sink(VcId),
}

#[derive(Clone, Copy, Debug)]
pub enum NetEvent {
    Start(VcId),
    TxDone(PortId),
    Arrive(Node, Cell),
    Timer(VcId),
}

#[derive(Debug, Default)]
struct HostQueue {
    frames: VecDeque<Aal5Frame>,
    next_index: u32,
    pending_cells: u64,
}

impl HostQueue {
    fn pop(&mut self) -> Option<Cell> {
        let frame = self.frames.front()?;
        let cell = frame.cell(self.next_index);
        self.next_index += 1;
        if self.next_index == frame.cell_count {
            self.frames.pop_front();
            self.next_index = 0;
        }
        self.pending_cells -= 1;
        Some(cell)
    }
}

#[derive(Debug)]
enum PortQueue {
    Host(HostQueue),
    Switch(SwitchBuffer),
}

#[derive(Debug)]
struct Port {
    queue: PortQueue,
    cell_time: SimTime,
    prop: SimTime,
    dest: Node,
    busy: bool,
    cells_sent: u64,
}

/// Per-connection state.
#[derive(Debug)]
struct Conn {
    sender: TcpSender,
    receiver: TcpReceiver,
    /// Reassembles ACK frames at the source.
    ack_reasm: Reassembler,
    /// Reassembles data frames at the sink.
    data_reasm: Reassembler,
    timer_event: Option<SimTime>,
    start: SimTime,
    src_port: PortId,
    sink_port: PortId,
    policer: Policer,
    policer_nonconforming: u64,
    policer_dropped: u64,
    wire_bytes_enqueued: u64,
    delivered_in_window: u64,
}

/// Occupancy statistics of the bottleneck port.
#[derive(Debug, Default, Clone, Copy)]
struct OccupancyTrace {
    last_change: SimTime,
    last_value: u32,
    area: f64,
}

impl OccupancyTrace {
    fn record(&mut self, now: SimTime, value: u32) {
        self.area += self.last_value as f64 * (now - self.last_change).as_nanos() as f64;
        self.last_change = now;
        self.last_value = value;
    }
}

/// Counters of one switch output port.
#[derive(Clone, Debug)]
pub struct PortReport {
    pub name: String,
    pub per_vc: Vec<VcCounters>,
    pub max_occupancy: u32,
}

/// Raw outcome of one run.
#[derive(Clone, Debug)]
pub struct RunStats {
    pub per_vc_delivered_bytes: Vec<u64>,
    pub measured_seconds: f64,
    pub realized_rate_bps: f64,
    pub mss: u32,
    pub cells_sent_by_hosts: u64,
    pub switch_ports: Vec<PortReport>,
    pub bottleneck_mean_occupancy: f64,
    pub bottleneck_max_occupancy: u32,
    pub cells_wasted: u64,
    pub policer_nonconforming: u64,
    pub policer_dropped: u64,
    pub sender_stats: Vec<SenderStats>,
    pub start_times: Vec<SimTime>,
    pub events: u64,
    pub trace_digest: u64,
}

impl RunStats {
    pub fn cells_dropped_selective(&self) -> u64 {
        self.switch_ports
            .iter()
            .flat_map(|p| p.per_vc.iter())
            .map(|c| c.cells_dropped_selective)
            .sum()
    }

    pub fn cells_dropped_overflow(&self) -> u64 {
        self.switch_ports
            .iter()
            .flat_map(|p| p.per_vc.iter())
            .map(|c| c.cells_dropped_overflow)
            .sum()
    }

    pub fn frames_dropped_selective(&self) -> u64 {
        self.switch_ports
            .iter()
            .flat_map(|p| p.per_vc.iter())
            .map(|c| c.frames_dropped_selective)
            .sum()
    }

    pub fn frames_dropped_overflow(&self) -> u64 {
        self.switch_ports
            .iter()
            .flat_map(|p| p.per_vc.iter())
            .map(|c| c.frames_dropped_overflow)
            .sum()
    }
}

pub struct Network {
    cfg: ScenarioConfig,
    ports: Vec<Port>,
    conns: Vec<Conn>,
    /// Segment carried by each in-flight AAL5 frame.
    frames: HashMap<u64, Segment>,
    next_frame_id: u64,
    sw1_fwd: PortId,
    sw2_rev: PortId,
    sw1_rev_base: PortId,
    sw2_fwd_base: PortId,
    warmup: SimTime,
    bottleneck_trace: OccupancyTrace,
    events: u64,
}

const AUDIT_EVERY: u64 = 10_000;

impl Network {
    /// Wires sources, switches, links and sinks for `cfg`.
    pub fn build(cfg: &ScenarioConfig) -> Result<Network, ConfigError> {
        cfg.validate()?;
        let n = cfg.n_sources as usize;
        let access = cfg.access_link();
        let sat = cfg.bottleneck();
        let k = cfg.buffer_cells();
        let tcp = cfg.tcp_config();

        let switch_port = |dest: Node, prop: SimTime| Port {
            queue: PortQueue::Switch(SwitchBuffer::new(k, n, cfg.policy, cfg.selective_drop)),
            cell_time: access.cell_time(),
            prop,
            dest,
            busy: false,
            cells_sent: 0,
        };
        let host_port = |dest: Node| Port {
            queue: PortQueue::Host(HostQueue::default()),
            cell_time: access.cell_time(),
            prop: access.prop(),
            dest,
            busy: false,
            cells_sent: 0,
        };

        // Port layout: [src nics][sink nics][sw1 fwd][sw2 rev][sw1 rev * n][sw2 fwd * n]
        let mut ports = Vec::with_capacity(4 * n + 2);
        for _ in 0..n {
            ports.push(host_port(Node::Switch1));
        }
        for _ in 0..n {
            ports.push(host_port(Node::Switch2));
        }
        let sw1_fwd = ports.len() as PortId;
        ports.push(Port {
            cell_time: sat.cell_time(),
            ..switch_port(Node::Switch2, sat.prop())
        });
        let sw2_rev = ports.len() as PortId;
        ports.push(Port {
            cell_time: sat.cell_time(),
            ..switch_port(Node::Switch1, sat.prop())
        });
        let sw1_rev_base = ports.len() as PortId;
        for i in 0..n {
            ports.push(switch_port(Node::Source(i as VcId), access.prop()));
        }
        let sw2_fwd_base = ports.len() as PortId;
        for i in 0..n {
            ports.push(switch_port(Node::Sink(i as VcId), access.prop()));
        }

        let pcr = cfg.policer.pcr.map(|p| p * cfg.scale).unwrap_or_else(|| cfg.cell_rate());
        let descriptor = TrafficDescriptor::ubr(pcr, cfg.policer.cdvt)
            .map_err(|e| ConfigError::new("pcr_cells_per_s", e.to_string()))?;
        let policer = Policer::new(&descriptor).map_err(|e| ConfigError::new("policer", e.to_string()))?;

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let jitter_ns = SimTime::from_secs_f64(cfg.start_jitter).as_nanos();
        let conns = (0..n)
            .map(|i| Conn {
                sender: TcpSender::new(tcp.clone()),
                receiver: TcpReceiver::new(),
                ack_reasm: Reassembler::new(i as VcId),
                data_reasm: Reassembler::new(i as VcId),
                timer_event: None,
                start: SimTime::from_nanos(if jitter_ns == 0 { 0 } else { rng.gen_range(0..=jitter_ns) }),
                src_port: i as PortId,
                sink_port: (n + i) as PortId,
                policer: policer.clone(),
                policer_nonconforming: 0,
                policer_dropped: 0,
                wire_bytes_enqueued: 0,
                delivered_in_window: 0,
            })
            .collect();

        Ok(Network {
            cfg: cfg.clone(),
            ports,
            conns,
            frames: HashMap::new(),
            next_frame_id: 0,
            sw1_fwd,
            sw2_rev,
            sw1_rev_base,
            sw2_fwd_base,
            warmup: SimTime::from_secs_f64(cfg.warmup),
            bottleneck_trace: OccupancyTrace::default(),
            events: 0,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn start_times(&self) -> Vec<SimTime> {
        self.conns.iter().map(|c| c.start).collect()
    }

    /// Schedules the connection starts.
    pub fn prime(&self, queue: &mut EventQueue<NetEvent>) -> Result<(), SimError> {
        for (i, c) in self.conns.iter().enumerate() {
            queue.schedule(c.start, self.conn_target(i as VcId), NetEvent::Start(i as VcId))?;
        }
        Ok(())
    }

    /// Builds, runs for the configured duration and collects statistics.
    pub fn run(cfg: &ScenarioConfig) -> Result<RunStats, RunError> {
        let mut net = Network::build(cfg)?;
        let mut queue = EventQueue::new();
        net.prime(&mut queue)?;
        let end = SimTime::from_secs_f64(cfg.duration);
        let events = queue.run_until(end, &mut net)?;
        net.bottleneck_trace.record(end, net.occupancy(net.sw1_fwd));
        net.audit()?;
        net.final_audit()?;
        Ok(net.stats(end, events, queue.trace_digest()))
    }

    fn conn_target(&self, vc: VcId) -> u32 {
        self.ports.len() as u32 + vc
    }

    fn node_target(&self, node: Node) -> u32 {
        let base = self.ports.len() as u32 + self.conns.len() as u32;
        match node {
            Node::Switch1 => base,
            Node::Switch2 => base + 1,
            Node::Source(i) => self.conn_target(i),
            Node::Sink(i) => base + 2 + i,
        }
    }

    fn occupancy(&self, port: PortId) -> u32 {
        match &self.ports[port as usize].queue {
            PortQueue::Switch(b) => b.occupancy(),
            PortQueue::Host(h) => h.pending_cells as u32,
        }
    }

    fn send_segments(&mut self, vc: VcId, segs: Vec<Segment>, dir: Direction, now: SimTime, q: &mut EventQueue<NetEvent>) -> Result<(), SimError> {
        if segs.is_empty() {
            return Ok(());
        }
        let conn = &mut self.conns[vc as usize];
        let port = match dir {
            Direction::Forward => conn.src_port,
            Direction::Reverse => conn.sink_port,
        };
        for seg in segs {
            let frame = Aal5Frame::new(vc, dir, self.next_frame_id, seg.len);
            self.next_frame_id += 1;
            if dir == Direction::Forward {
                conn.wire_bytes_enqueued += CELL_BYTES as u64 * cells_for_payload(seg.len) as u64;
            }
            self.frames.insert(frame.frame_id, seg);
            let PortQueue::Host(h) = &mut self.ports[port as usize].queue else {
                unreachable!("host port expected");
            };
            h.pending_cells += frame.cell_count as u64;
            h.frames.push_back(frame);
        }
        if !self.ports[port as usize].busy {
            self.start_tx(port, now, q)?;
        }
        Ok(())
    }

    /// Starts serializing the next cell on `port`, if any.
    fn start_tx(&mut self, port_id: PortId, now: SimTime, q: &mut EventQueue<NetEvent>) -> Result<(), SimError> {
        loop {
            let port = &mut self.ports[port_id as usize];
            let cell = match &mut port.queue {
                PortQueue::Host(h) => h.pop(),
                PortQueue::Switch(b) => b.dequeue_cell(),
            };
            let Some(cell) = cell else {
                port.busy = false;
                return Ok(());
            };
            let (cell_time, prop, dest) = (port.cell_time, port.prop, port.dest);
            if port_id == self.sw1_fwd {
                let occ = self.occupancy(port_id);
                self.bottleneck_trace.record(now, occ);
            }
            if let Node::Switch1 = dest {
                if cell.dir == Direction::Forward {
                    // source NIC output: traffic contract conformance
                    let conn = &mut self.conns[cell.vc as usize];
                    let verdict = conn
                        .policer
                        .check(now)
                        .map_err(|e| SimError::Protocol(e.to_string()))?;
                    if !verdict.is_conforming() {
                        conn.policer_nonconforming += 1;
                        if self.cfg.policer.police {
                            conn.policer_dropped += 1;
                            continue;
                        }
                    }
                }
            }
            let port = &mut self.ports[port_id as usize];
            port.busy = true;
            port.cells_sent += 1;
            let arrive_target = self.node_target(dest);
            q.schedule(now + cell_time + prop, arrive_target, NetEvent::Arrive(dest, cell))?;
            q.schedule(now + cell_time, port_id, NetEvent::TxDone(port_id))?;
            return Ok(());
        }
    }

    fn switch_enqueue(&mut self, port_id: PortId, cell: Cell, now: SimTime, q: &mut EventQueue<NetEvent>) -> Result<(), SimError> {
        let port = &mut self.ports[port_id as usize];
        let PortQueue::Switch(buf) = &mut port.queue else {
            unreachable!("switch port expected");
        };
        let outcome = buf.enqueue_cell(cell);
        if outcome == EnqueueOutcome::Queued {
            if port_id == self.sw1_fwd {
                let occ = buf.occupancy();
                self.bottleneck_trace.record(now, occ);
            }
            if !self.ports[port_id as usize].busy {
                self.start_tx(port_id, now, q)?;
            }
        }
        Ok(())
    }

    fn on_sink_cell(&mut self, vc: VcId, cell: Cell, now: SimTime, q: &mut EventQueue<NetEvent>) -> Result<(), SimError> {
        let events = self.conns[vc as usize]
            .data_reasm
            .push(cell)
            .map_err(|e| SimError::Protocol(e.to_string()))?;
        for ev in events {
            match ev {
                ReassemblyEvent::Complete { frame_id, .. } => {
                    let seg = self.take_frame(frame_id)?;
                    let conn = &mut self.conns[vc as usize];
                    let before = conn.receiver.delivered();
                    let ack = conn.receiver.on_data(&seg);
                    if now >= self.warmup {
                        conn.delivered_in_window += conn.receiver.delivered() - before;
                    }
                    self.send_segments(vc, vec![ack], Direction::Reverse, now, q)?;
                }
                ReassemblyEvent::Discarded { frame_id, .. } => {
                    self.take_frame(frame_id)?;
                }
            }
        }
        Ok(())
    }

    fn on_source_cell(&mut self, vc: VcId, cell: Cell, now: SimTime, q: &mut EventQueue<NetEvent>) -> Result<(), SimError> {
        let events = self.conns[vc as usize]
            .ack_reasm
            .push(cell)
            .map_err(|e| SimError::Protocol(e.to_string()))?;
        for ev in events {
            match ev {
                ReassemblyEvent::Complete { frame_id, .. } => {
                    let ack = self.take_frame(frame_id)?;
                    let segs = self.conns[vc as usize].sender.on_ack(&ack, now);
                    self.send_segments(vc, segs, Direction::Forward, now, q)?;
                    self.sync_timer(vc, q)?;
                }
                ReassemblyEvent::Discarded { frame_id, .. } => {
                    self.take_frame(frame_id)?;
                }
            }
        }
        Ok(())
    }

    fn take_frame(&mut self, frame_id: u64) -> Result<Segment, SimError> {
        self.frames
            .remove(&frame_id)
            .ok_or_else(|| SimError::Accounting(format!("frame {frame_id} reassembled twice or never sent")))
    }

    /// Makes sure an event is pending no later than the sender's timer.
    fn sync_timer(&mut self, vc: VcId, q: &mut EventQueue<NetEvent>) -> Result<(), SimError> {
        let target = self.conn_target(vc);
        let conn = &mut self.conns[vc as usize];
        if let Some(deadline) = conn.sender.timer() {
            if conn.timer_event.is_none_or(|pending| deadline < pending) {
                q.schedule(deadline, target, NetEvent::Timer(vc))?;
                conn.timer_event = Some(deadline);
            }
        }
        Ok(())
    }

    fn on_timer(&mut self, vc: VcId, now: SimTime, q: &mut EventQueue<NetEvent>) -> Result<(), SimError> {
        let conn = &mut self.conns[vc as usize];
        if conn.timer_event == Some(now) {
            conn.timer_event = None;
        }
        if conn.sender.timer().is_some_and(|d| d <= now) {
            let segs = conn.sender.on_timeout(now);
            self.send_segments(vc, segs, Direction::Forward, now, q)?;
        }
        self.sync_timer(vc, q)
    }

    /// Switch accounting must match queue contents.
    pub fn audit(&self) -> Result<(), SimError> {
        for (i, p) in self.ports.iter().enumerate() {
            match &p.queue {
                PortQueue::Switch(b) => b
                    .audit()
                    .map_err(|e| SimError::Accounting(format!("port {i}: {e}")))?,
                PortQueue::Host(h) => {
                    if !p.busy && h.pending_cells > 0 {
                        return Err(SimError::Accounting(format!("port {i} idle with queued cells")));
                    }
                }
            }
            if let PortQueue::Switch(b) = &p.queue {
                if !p.busy && !b.is_empty() {
                    return Err(SimError::Accounting(format!("port {i} idle with queued cells")));
                }
            }
        }
        Ok(())
    }

    /// End-of-run conservation checks.
    fn final_audit(&self) -> Result<(), SimError> {
        for (i, c) in self.conns.iter().enumerate() {
            let sent = c.sender.stats().new_data_bytes;
            if c.receiver.delivered() > sent {
                return Err(SimError::Accounting(format!(
                    "vc {i}: delivered {} bytes but only {sent} were sent",
                    c.receiver.delivered()
                )));
            }
            let PortQueue::Host(h) = &self.ports[c.src_port as usize].queue else {
                unreachable!()
            };
            let emitted = self.ports[c.src_port as usize].cells_sent;
            let cells = emitted + h.pending_cells + c.policer_dropped;
            if c.wire_bytes_enqueued != cells * CELL_BYTES as u64 {
                return Err(SimError::Accounting(format!(
                    "vc {i}: wire bytes {} != 53 x {cells} cells",
                    c.wire_bytes_enqueued
                )));
            }
        }
        Ok(())
    }

    fn stats(&self, end: SimTime, events: u64, trace_digest: u64) -> RunStats {
        let mut switch_ports = Vec::new();
        for (i, p) in self.ports.iter().enumerate() {
            let PortQueue::Switch(b) = &p.queue else { continue };
            let i = i as PortId;
            let name = if i == self.sw1_fwd {
                "switch1.satellite".to_string()
            } else if i == self.sw2_rev {
                "switch2.satellite".to_string()
            } else if i >= self.sw2_fwd_base {
                format!("switch2.sink{}", i - self.sw2_fwd_base)
            } else {
                format!("switch1.source{}", i - self.sw1_rev_base)
            };
            switch_ports.push(PortReport {
                name,
                per_vc: b.counters().to_vec(),
                max_occupancy: b.max_occupancy(),
            });
        }
        let bottleneck_max_occupancy = switch_ports[0].max_occupancy;
        let elapsed = end.as_nanos().max(1) as f64;
        RunStats {
            per_vc_delivered_bytes: self.conns.iter().map(|c| c.delivered_in_window).collect(),
            measured_seconds: (end - self.warmup.min(end)).as_secs_f64(),
            realized_rate_bps: self.cfg.bottleneck().realized_rate_bps(),
            mss: self.cfg.effective_mss(),
            cells_sent_by_hosts: self.ports[..2 * self.conns.len()].iter().map(|p| p.cells_sent).sum(),
            switch_ports,
            bottleneck_mean_occupancy: self.bottleneck_trace.area / elapsed,
            bottleneck_max_occupancy,
            cells_wasted: self
                .conns
                .iter()
                .map(|c| c.data_reasm.cells_wasted + c.ack_reasm.cells_wasted)
                .sum(),
            policer_nonconforming: self.conns.iter().map(|c| c.policer_nonconforming).sum(),
            policer_dropped: self.conns.iter().map(|c| c.policer_dropped).sum(),
            sender_stats: self.conns.iter().map(|c| *c.sender.stats()).collect(),
            start_times: self.start_times(),
            events,
            trace_digest,
        }
    }
}

impl Handler<NetEvent> for Network {
    fn handle(&mut self, event: SimEvent<NetEvent>, q: &mut EventQueue<NetEvent>) -> Result<(), SimError> {
        let now = event.fire_at;
        self.events += 1;
        if cfg!(debug_assertions) && self.events.is_multiple_of(AUDIT_EVERY) {
            self.audit()?;
        }
        match event.payload {
            NetEvent::Start(vc) => {
                let segs = self.conns[vc as usize].sender.maybe_send(now);
                self.send_segments(vc, segs, Direction::Forward, now, q)?;
                self.sync_timer(vc, q)
            }
            NetEvent::TxDone(port) => {
                self.ports[port as usize].busy = false;
                self.start_tx(port, now, q)
            }
            NetEvent::Arrive(node, cell) => match node {
                Node::Switch1 => {
                    let port = match cell.dir {
                        Direction::Forward => self.sw1_fwd,
                        Direction::Reverse => self.sw1_rev_base + cell.vc,
                    };
                    self.switch_enqueue(port, cell, now, q)
                }
                Node::Switch2 => {
                    let port = match cell.dir {
                        Direction::Forward => self.sw2_fwd_base + cell.vc,
                        Direction::Reverse => self.sw2_rev,
                    };
                    self.switch_enqueue(port, cell, now, q)
                }
                Node::Sink(vc) => self.on_sink_cell(vc, cell, now, q),
                Node::Source(vc) => self.on_source_cell(vc, cell, now, q),
            },
            NetEvent::Timer(vc) => self.on_timer(vc, now, q),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl DropPolicy {
    pub fn all() -> [DropPolicy; 2] {
        [DropPolicy::SelectiveDrop, DropPolicy::TailDrop]
    }
}
