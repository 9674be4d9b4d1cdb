//! Broadcast hub: owns the session, the capture and analysis threads, and
//! one outbound queue per client.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard, Weak};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use tokio::sync::Notify;
use tongue_core::formants::{FormantFrame, Tracker};

use crate::audio::{self, Source, BUILTIN_DEVICES};
use crate::protocol::{parse_client, ClientMessage, ConfigPatch, DisplayFrame, ServerMessage};
use crate::session::Session;

/// Sample blocks buffered between capture and analysis.
pub const CAPTURE_QUEUE_BLOCKS: usize = 8;
/// Default number of frames buffered per client before the oldest is dropped.
pub const DEFAULT_CLIENT_QUEUE: usize = 16;
const LATENCY_LOG: usize = 8192;

struct Queued {
    frame: Arc<DisplayFrame>,
    published: Instant,
}

enum Entry {
    Control(String),
    Frame(Queued),
}

#[derive(Default)]
struct ClientInner {
    queue: VecDeque<Entry>,
    frames: usize,
    dropped: u64,
    closed: bool,
}

/// Outbound messages for one client, kept in order. Replies and acks are
/// never dropped; frames are bounded and drop oldest first.
pub struct ClientQueue {
    pub id: u64,
    capacity: usize,
    inner: Mutex<ClientInner>,
    notify: Notify,
}

/// A serialized message ready for the socket, with the publish time of
/// frames for latency accounting.
pub struct Outgoing {
    pub text: String,
    pub published: Option<Instant>,
}

impl ClientQueue {
    pub fn new(id: u64, capacity: usize) -> Self {
        Self {
            id,
            capacity: capacity.max(1),
            inner: Mutex::new(ClientInner::default()),
            notify: Notify::new(),
        }
    }

    fn lock(&self) -> MutexGuard<'_, ClientInner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn push_frame(&self, frame: Arc<DisplayFrame>, published: Instant) {
        {
            let mut g = self.lock();
            if g.frames == self.capacity {
                if let Some(k) = g.queue.iter().position(|e| matches!(e, Entry::Frame(_))) {
                    g.queue.remove(k);
                    g.frames -= 1;
                    g.dropped += 1;
                }
            }
            g.queue.push_back(Entry::Frame(Queued { frame, published }));
            g.frames += 1;
        }
        self.notify.notify_one();
    }

    pub fn push_control(&self, msg: &ServerMessage) {
        self.lock().queue.push_back(Entry::Control(msg.to_json()));
        self.notify.notify_one();
    }

    /// Moves everything queued into `out` in order. Frames carry the
    /// client's drop count at the time they are taken.
    pub fn drain(&self, out: &mut Vec<Outgoing>) {
        let mut g = self.lock();
        let dropped = g.dropped;
        g.frames = 0;
        out.extend(g.queue.drain(..).map(|e| match e {
            Entry::Control(text) => Outgoing { text, published: None },
            Entry::Frame(q) => {
                let mut f = (*q.frame).clone();
                f.dropped = dropped;
                Outgoing {
                    text: ServerMessage::Frame(f).to_json(),
                    published: Some(q.published),
                }
            }
        }));
    }

    pub fn dropped(&self) -> u64 {
        self.lock().dropped
    }

    pub fn close(&self) {
        self.lock().closed = true;
        self.notify.notify_one();
    }

    pub fn is_closed(&self) -> bool {
        self.lock().closed
    }

    /// Resolves once something new was queued or the queue was closed.
    pub async fn notified(&self) {
        self.notify.notified().await
    }
}

/// Bounded sample-block queue between the capture and analysis threads.
struct BlockQueue {
    q: Mutex<VecDeque<Vec<f64>>>,
    cv: Condvar,
}

impl BlockQueue {
    fn new() -> Self {
        Self {
            q: Mutex::new(VecDeque::with_capacity(CAPTURE_QUEUE_BLOCKS)),
            cv: Condvar::new(),
        }
    }

    fn push(&self, block: Vec<f64>) {
        let mut q = self.q.lock().unwrap_or_else(|e| e.into_inner());
        if q.len() == CAPTURE_QUEUE_BLOCKS {
            q.pop_front();
            log::warn!("analysis fell behind; dropped one capture block");
        }
        q.push_back(block);
        self.cv.notify_one();
    }

    fn pop(&self, timeout: Duration) -> Option<Vec<f64>> {
        let q = self.q.lock().unwrap_or_else(|e| e.into_inner());
        let (mut q, _) = self.cv.wait_timeout_while(q, timeout, |q| q.is_empty()).unwrap_or_else(|e| e.into_inner());
        q.pop_front()
    }
}

struct Engine {
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl Engine {
    fn signal_stop(&self) {
        self.stop.store(true, Ordering::SeqCst);
    }
}

struct State {
    session: Session,
    clients: Vec<Arc<ClientQueue>>,
    engine: Option<Engine>,
    generation: u64,
    t_offset_ms: f64,
    last_t_ms: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct HubOptions {
    pub client_queue: usize,
    /// Start capture when the first client connects. When off, frames
    /// enter only through [`Hub::feed`].
    pub capture: bool,
}

impl Default for HubOptions {
    fn default() -> Self {
        Self {
            client_queue: DEFAULT_CLIENT_QUEUE,
            capture: true,
        }
    }
}

pub struct Hub {
    me: Weak<Hub>,
    state: Mutex<State>,
    options: HubOptions,
    next_id: AtomicU64,
    engine_starts: AtomicU64,
    latency_us: Mutex<VecDeque<f64>>,
}

impl Hub {
    pub fn new(session: Session, options: HubOptions) -> Arc<Self> {
        Arc::new_cyclic(|me| Self {
            me: me.clone(),
            state: Mutex::new(State {
                session,
                clients: Vec::new(),
                engine: None,
                generation: 0,
                t_offset_ms: 0.0,
                last_t_ms: None,
            }),
            options,
            next_id: AtomicU64::new(1),
            engine_starts: AtomicU64::new(0),
            latency_us: Mutex::new(VecDeque::with_capacity(LATENCY_LOG)),
        })
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Registers a client, queues the current configuration for it, and
    /// starts capture if it is the first.
    pub fn connect(&self) -> Arc<ClientQueue> {
        let client = Arc::new(ClientQueue::new(self.next_id.fetch_add(1, Ordering::Relaxed), self.options.client_queue));
        let mut st = self.lock();
        client.push_control(&ServerMessage::Ack {
            config: st.session.effective_config(),
        });
        st.clients.push(client.clone());
        if self.options.capture && st.engine.is_none() {
            self.start_engine(&mut st);
        }
        client
    }

    /// Removes a client; capture stops with the last one.
    pub fn disconnect(&self, id: u64) {
        let engine = {
            let mut st = self.lock();
            st.clients.retain(|c| c.id != id);
            if st.clients.is_empty() {
                self.stop_engine(&mut st)
            } else {
                None
            }
        };
        if let Some(e) = engine {
            for t in e.threads {
                let _ = t.join();
            }
        }
    }

    pub fn client_count(&self) -> usize {
        self.lock().clients.len()
    }

    pub fn engine_running(&self) -> bool {
        self.lock().engine.is_some()
    }

    /// Number of times capture has been started since the hub was created.
    pub fn engine_starts(&self) -> u64 {
        self.engine_starts.load(Ordering::Relaxed)
    }

    pub fn effective_config(&self) -> crate::protocol::EffectiveConfig {
        self.lock().session.effective_config()
    }

    fn stop_engine(&self, st: &mut State) -> Option<Engine> {
        let e = st.engine.take()?;
        e.signal_stop();
        st.generation += 1;
        if let Some(t) = st.last_t_ms {
            st.t_offset_ms = t + hop_ms(&st.session);
        }
        st.session.reset();
        Some(e)
    }

    fn start_engine(&self, st: &mut State) {
        st.generation += 1;
        let generation = st.generation;
        let config = st.session.config().clone();
        let source = audio::resolve_device(st.session.device()).and_then(|d| Source::open(&d, config.sample_rate));
        let mut source = match source {
            Ok(s) => s,
            Err(e) => {
                let msg = ServerMessage::error(serde_json::Value::Null, format!("audio device unavailable: {e}"));
                for c in &st.clients {
                    c.push_control(&msg);
                }
                return;
            }
        };
        let mut tracker = match Tracker::<f64>::new(config.clone()) {
            Ok(t) => t,
            Err(e) => {
                log::error!("tracker rejected a validated config: {e}");
                return;
            }
        };
        let stop = Arc::new(AtomicBool::new(false));
        let blocks = Arc::new(BlockQueue::new());
        let block_len = config.hop_size;
        let period = Duration::from_secs_f64(block_len as f64 / config.sample_rate as f64);

        let capture = {
            let (stop, blocks) = (stop.clone(), blocks.clone());
            thread::Builder::new()
                .name("capture".into())
                .spawn(move || {
                    let mut deadline = Instant::now();
                    while !stop.load(Ordering::SeqCst) {
                        let mut block = vec![0.0; block_len];
                        source.fill(&mut block);
                        blocks.push(block);
                        deadline += period;
                        let now = Instant::now();
                        if deadline > now {
                            thread::sleep(deadline - now);
                        } else if now - deadline > Duration::from_millis(200) {
                            deadline = now;
                        }
                    }
                })
                .expect("spawn capture thread")
        };
        let analysis = {
            let hub = self.me.clone();
            let stop = stop.clone();
            thread::Builder::new()
                .name("analysis".into())
                .spawn(move || {
                    while !stop.load(Ordering::SeqCst) {
                        let Some(block) = blocks.pop(Duration::from_millis(50)) else {
                            continue;
                        };
                        let frames = tracker.push(&block);
                        let Some(hub) = hub.upgrade() else { break };
                        if !hub.publish(generation, &frames) {
                            break;
                        }
                    }
                })
                .expect("spawn analysis thread")
        };
        self.engine_starts.fetch_add(1, Ordering::Relaxed);
        st.engine = Some(Engine {
            stop,
            threads: vec![capture, analysis],
        });
    }

    /// Sends tracker frames to every client; returns false when the
    /// generation is stale and the producer should stop.
    fn publish(&self, generation: u64, frames: &[FormantFrame]) -> bool {
        let mut st = self.lock();
        if st.generation != generation {
            return false;
        }
        self.broadcast(&mut st, frames);
        true
    }

    /// Feeds frames as if they came from capture, shifted onto the
    /// session's timeline.
    pub fn feed(&self, frames: &[FormantFrame]) {
        let mut st = self.lock();
        self.broadcast(&mut st, frames);
    }

    fn broadcast(&self, st: &mut State, frames: &[FormantFrame]) {
        for f in frames {
            let mut d = st.session.display_frame(f);
            d.t_ms += st.t_offset_ms;
            st.last_t_ms = Some(d.t_ms);
            let d = Arc::new(d);
            let now = Instant::now();
            for c in &st.clients {
                c.push_frame(d.clone(), now);
            }
        }
    }

    /// Applies a config patch, restarting capture if needed, and
    /// broadcasts the acknowledgment; a rejection goes only to `from`.
    pub fn apply_config(&self, from: &ClientQueue, patch: &ConfigPatch) {
        let old = {
            let mut st = self.lock();
            match st.session.apply_config(patch) {
                Ok(applied) => {
                    let old = if applied.restart_engine && st.engine.is_some() {
                        let old = self.stop_engine(&mut st);
                        self.start_engine(&mut st);
                        old
                    } else {
                        None
                    };
                    let ack = ServerMessage::Ack {
                        config: st.session.effective_config(),
                    };
                    for c in &st.clients {
                        c.push_control(&ack);
                    }
                    old
                }
                Err(e) => {
                    from.push_control(&ServerMessage::error(serde_json::Value::Null, e.to_string()));
                    None
                }
            }
        };
        if let Some(e) = old {
            for t in e.threads {
                let _ = t.join();
            }
        }
    }

    pub fn device_names(&self) -> Vec<String> {
        let mut names: Vec<String> = BUILTIN_DEVICES.iter().map(|s| s.to_string()).collect();
        let current = self.lock().session.device().to_string();
        if !names.contains(&current) {
            names.push(current);
        }
        names
    }

    /// Handles one text message from a client.
    pub fn handle_text(&self, from: &ClientQueue, text: &str) {
        match parse_client(text) {
            Err(e) => from.push_control(&e),
            Ok(ClientMessage::Config(patch)) => self.apply_config(from, &patch),
            Ok(ClientMessage::Invert { id, f1, f2 }) => {
                let reply = self.lock().session.invert_request(id, f1, f2);
                from.push_control(&reply);
            }
            Ok(ClientMessage::ListDevices) => from.push_control(&ServerMessage::Devices { names: self.device_names() }),
        }
    }

    pub fn record_latency(&self, d: Duration) {
        let mut g = self.latency_us.lock().unwrap_or_else(|e| e.into_inner());
        if g.len() == LATENCY_LOG {
            g.pop_front();
        }
        g.push_back(d.as_secs_f64() * 1e6);
    }

    /// Recent publish-to-socket-write latencies in microseconds.
    pub fn latencies_us(&self) -> Vec<f64> {
        self.latency_us.lock().unwrap_or_else(|e| e.into_inner()).iter().copied().collect()
    }
}

fn hop_ms(s: &Session) -> f64 {
    let c = s.config();
    c.hop_size as f64 * 1000.0 / c.sample_rate as f64
}

impl Drop for Hub {
    fn drop(&mut self) {
        if let Some(e) = self.state.get_mut().unwrap_or_else(|e| e.into_inner()).engine.take() {
            e.signal_stop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::tests::small_lut;
    use serde_json::Value;
    use tongue_core::formants::{AnalysisConfig, Formant};

    fn hub(capture: bool, device: &str) -> Arc<Hub> {
        let s = Session::new(AnalysisConfig::default(), device, small_lut()).unwrap();
        Hub::new(
            s,
            HubOptions {
                client_queue: 4,
                capture,
            },
        )
    }

    fn frames(t0: usize, n: usize) -> Vec<FormantFrame> {
        (t0..t0 + n)
            .map(|k| FormantFrame {
                t_ms: k as f64 * 10.0,
                rms_db: -12.0,
                voiced: true,
                formants: vec![
                    Formant {
                        freq_hz: 500.0,
                        bandwidth_hz: 70.0,
                    },
                    Formant {
                        freq_hz: 1500.0,
                        bandwidth_hz: 90.0,
                    },
                ],
                envelope_db: vec![0.0; 257],
            })
            .collect()
    }

    fn messages(c: &ClientQueue) -> Vec<Value> {
        let mut out = Vec::new();
        c.drain(&mut out);
        out.iter().map(|o| serde_json::from_str(&o.text).unwrap()).collect()
    }

    #[test]
    fn first_message_is_the_ack() {
        let h = hub(false, "silence");
        let c = h.connect();
        let m = messages(&c);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0]["type"], "ack");
        assert_eq!(m[0]["config"]["lpc_order"], 18);
        assert_eq!(m[0]["config"]["lut"]["f1_lo"], 320.0);
    }

    #[test]
    fn slow_client_drops_oldest_and_counts() {
        let h = hub(false, "silence");
        let fast = h.connect();
        let slow = h.connect();
        messages(&fast);
        messages(&slow);
        let mut seen = Vec::new();
        for k in 0..10 {
            h.feed(&frames(k, 1));
            seen.extend(messages(&fast));
        }
        assert_eq!(seen.len(), 10);
        assert!(seen.iter().all(|m| m["dropped"] == 0));
        let m = messages(&slow);
        let t: Vec<f64> = m.iter().map(|v| v["t_ms"].as_f64().unwrap()).collect();
        assert_eq!(t, vec![60.0, 70.0, 80.0, 90.0]);
        assert!(m.iter().all(|v| v["dropped"] == 6));
        assert_eq!(slow.dropped(), 6);
    }

    #[test]
    fn replies_go_only_to_the_sender() {
        let h = hub(false, "silence");
        let a = h.connect();
        let b = h.connect();
        messages(&a);
        messages(&b);
        h.handle_text(&a, r#"{"type":"invert","id":1,"f1":0,"f2":900}"#);
        h.handle_text(&a, "{");
        h.handle_text(&a, r#"{"type":"list_devices"}"#);
        let m = messages(&a);
        assert_eq!(m.len(), 3);
        assert_eq!(m[0]["type"], "error");
        assert_eq!(m[0]["id"], 1);
        assert_eq!(m[1]["type"], "error");
        assert_eq!(m[2]["names"], serde_json::json!(["synth", "silence"]));
        assert!(messages(&b).is_empty());
    }

    #[test]
    fn config_ack_is_broadcast_and_rejection_is_private() {
        let h = hub(false, "silence");
        let a = h.connect();
        let b = h.connect();
        messages(&a);
        messages(&b);
        h.handle_text(&a, r#"{"type":"config","lpc_order":12}"#);
        assert_eq!(messages(&b)[0]["config"]["lpc_order"], 12);
        assert_eq!(messages(&a)[0]["config"]["lpc_order"], 12);
        h.handle_text(&a, r#"{"type":"config","frame_size":5}"#);
        let m = messages(&a);
        assert_eq!(m[0]["type"], "error");
        assert!(m[0]["message"].as_str().unwrap().contains("frame_size"));
        assert!(messages(&b).is_empty());
        assert_eq!(h.effective_config().analysis.frame_size, 400);
    }

    #[test]
    fn capture_is_lazy_and_stops_with_the_last_client() {
        let h = hub(true, "silence");
        assert!(!h.engine_running());
        let a = h.connect();
        let b = h.connect();
        assert!(h.engine_running());
        assert_eq!(h.engine_starts(), 1);
        h.disconnect(a.id);
        assert!(h.engine_running());
        h.disconnect(b.id);
        assert!(!h.engine_running());
    }

    #[test]
    fn timestamps_stay_monotone_across_restarts() {
        let h = hub(true, "silence");
        let c = h.connect();
        let mut t = Vec::new();
        let collect = |t: &mut Vec<f64>| {
            for m in messages(&c) {
                if m["type"] == "frame" {
                    t.push(m["t_ms"].as_f64().unwrap());
                }
            }
        };
        for order in [12, 14, 16] {
            thread::sleep(Duration::from_millis(120));
            collect(&mut t);
            h.handle_text(&c, &format!(r#"{{"type":"config","lpc_order":{order}}}"#));
        }
        thread::sleep(Duration::from_millis(120));
        collect(&mut t);
        assert_eq!(h.engine_starts(), 4);
        assert!(t.len() > 10, "{t:?}");
        assert!(t.windows(2).all(|w| w[1] > w[0]), "{t:?}");
        h.disconnect(c.id);
    }
}
