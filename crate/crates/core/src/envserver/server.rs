//! Network front end. One simulation thread owns the environment; every
//! connection forwards parsed requests to it and receives replies and view
//! frames through its own bounded outbox. The first client to send a
//! simulation command becomes the controller until it disconnects.
//!
//! A stream connection speaks line-delimited JSON. A connection whose first
//! bytes are an HTTP `GET` is upgraded to WebSocket and exchanges the same
//! messages as text frames.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, SyncSender, TrySendError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde_json::json;
use tungstenite::Message;

use crate::envserver::demo::{DemoHeader, DemoWriter};
use crate::envserver::protocol::{error_message, hello_message, parse_request, view_frame, RecordMode, Request};
use crate::envserver::Env;
use crate::error::{Error, ProtocolError};

type ConnId = u64;
const OUTBOX: usize = 256;
const POLL: Duration = Duration::from_millis(5);

enum Event {
    Request { conn: ConnId, req: Request, out: SyncSender<Arc<str>> },
    Closed(ConnId),
    Shutdown,
}

struct Viewer {
    out: SyncSender<Arc<str>>,
    decimation: usize,
    every: u64,
}

struct Sim {
    env: Env,
    controller: Option<ConnId>,
    viewers: HashMap<ConnId, Viewer>,
    recorder: Option<DemoWriter<BufWriter<File>>>,
}

impl Sim {
    fn handle(&mut self, conn: ConnId, req: Request, out: &SyncSender<Arc<str>>) {
        if req.needs_control() {
            match self.controller {
                Some(c) if c != conn => return reply(out, error_message(&ProtocolError::ControllerBusy)),
                _ => self.controller = Some(conn),
            }
        }
        let msg = match req {
            Request::Hello => hello_message(&self.env),
            Request::Reset { seed } => {
                self.stop_recording();
                let seed = seed.unwrap_or(self.env.seed());
                let obs = self.env.reset(seed);
                let msg = json!({ "obs": obs, "reward": 0.0, "done": false, "info": { "seed": seed, "distance": self.env.distance() } });
                reply(out, msg.to_string());
                self.broadcast(true);
                return;
            }
            Request::Step { action } => match self.env.step(&action) {
                Ok(t) => {
                    if let Some(r) = &mut self.recorder {
                        if let Err(e) = r.append(&t) {
                            log::warn!("demo recording failed: {e}");
                            self.recorder = None;
                        }
                    }
                    reply(out, serde_json::to_string(&t).expect("transition serializes"));
                    self.broadcast(t.done);
                    return;
                }
                Err(e) => error_message(&e),
            },
            Request::SubscribeView { particle_decimation, hz } => {
                let every = ((1.0 / (hz * self.env.dt())).round() as u64).max(1);
                self.viewers.insert(conn, Viewer { out: out.clone(), decimation: particle_decimation, every });
                reply(out, json!({ "subscribed": true, "every_steps": every }).to_string());
                let _ = out.try_send(view_frame(&self.env, particle_decimation).into());
                return;
            }
            Request::Unsubscribe => {
                self.viewers.remove(&conn);
                json!({ "subscribed": false }).to_string()
            }
            Request::Record { mode: RecordMode::Start, path } => self.start_recording(path.unwrap_or_default()),
            Request::Record { mode: RecordMode::Stop, .. } => match self.stop_recording() {
                Some(n) => json!({ "recording": false, "transitions": n }).to_string(),
                None => error_message(&ProtocolError::Request("not recording".into())),
            },
        };
        reply(out, msg);
    }

    fn start_recording(&mut self, path: String) -> String {
        if self.recorder.is_some() {
            return error_message(&ProtocolError::Request("already recording".into()));
        }
        if !self.env.active() || self.env.steps() != 0 {
            return error_message(&ProtocolError::Request("recording starts at the beginning of an episode; send reset first".into()));
        }
        let header = DemoHeader::new(self.env.scenario(), self.env.seed(), self.env.dt());
        let started = File::create(&path).map_err(Into::into).and_then(|f| DemoWriter::new(BufWriter::new(f), &header));
        match started {
            Ok(w) => {
                self.recorder = Some(w);
                json!({ "recording": true, "path": path }).to_string()
            }
            Err(e) => error_message(&e),
        }
    }

    fn stop_recording(&mut self) -> Option<usize> {
        let w = self.recorder.take()?;
        let n = w.len();
        if let Err(e) = w.finish() {
            log::warn!("demo flush failed: {e}");
        }
        Some(n)
    }

    /// Send a frame to every viewer due one; slow viewers miss frames.
    fn broadcast(&mut self, force: bool) {
        let step = self.env.steps();
        let mut cache: HashMap<usize, Arc<str>> = HashMap::new();
        self.viewers.retain(|_, v| {
            if !force && !step.is_multiple_of(v.every) {
                return true;
            }
            let frame = cache.entry(v.decimation).or_insert_with(|| view_frame(&self.env, v.decimation).into()).clone();
            !matches!(v.out.try_send(frame), Err(TrySendError::Disconnected(_)))
        });
    }

    fn closed(&mut self, conn: ConnId) {
        self.viewers.remove(&conn);
        if self.controller == Some(conn) {
            self.controller = None;
            self.stop_recording();
        }
    }
}

fn reply(out: &SyncSender<Arc<str>>, msg: String) {
    let _ = out.send(msg.into());
}

fn run_sim(env: Env, events: Receiver<Event>) {
    let mut sim = Sim { env, controller: None, viewers: HashMap::new(), recorder: None };
    while let Ok(ev) = events.recv() {
        match ev {
            Event::Request { conn, req, out } => sim.handle(conn, req, &out),
            Event::Closed(conn) => sim.closed(conn),
            Event::Shutdown => break,
        }
    }
    sim.stop_recording();
}

/// Forward one raw message; malformed input gets an error reply.
fn dispatch(conn: ConnId, text: &str, events: &Sender<Event>, out: &SyncSender<Arc<str>>) -> bool {
    let text = text.trim();
    if text.is_empty() {
        return true;
    }
    match parse_request(text) {
        Ok(req) => events.send(Event::Request { conn, req, out: out.clone() }).is_ok(),
        Err(e) => {
            reply(out, error_message(&e));
            true
        }
    }
}

fn serve_stream(conn: ConnId, stream: TcpStream, events: Sender<Event>) {
    let (out, inbox) = mpsc::sync_channel::<Arc<str>>(OUTBOX);
    let writer = match stream.try_clone() {
        Ok(w) => w,
        Err(_) => return,
    };
    let writer = thread::spawn(move || {
        let mut w = BufWriter::new(writer);
        for msg in inbox {
            if w.write_all(msg.as_bytes()).and_then(|_| w.write_all(b"\n")).and_then(|_| w.flush()).is_err() {
                break;
            }
        }
    });
    for line in BufReader::new(stream).lines() {
        match line {
            Ok(l) if dispatch(conn, &l, &events, &out) => {}
            _ => break,
        }
    }
    let _ = events.send(Event::Closed(conn));
    drop(out);
    let _ = writer.join();
}

fn serve_websocket(conn: ConnId, stream: TcpStream, events: Sender<Event>) {
    let mut ws = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(e) => {
            log::debug!("websocket handshake failed: {e}");
            return;
        }
    };
    if ws.get_ref().set_read_timeout(Some(POLL)).is_err() {
        return;
    }
    let (out, inbox) = mpsc::sync_channel::<Arc<str>>(OUTBOX);
    'session: loop {
        match ws.read() {
            Ok(Message::Text(t)) => {
                if !dispatch(conn, t.as_str(), &events, &out) {
                    break;
                }
            }
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => break,
        }
        while let Ok(msg) = inbox.try_recv() {
            if ws.send(Message::text(msg.as_ref())).is_err() {
                break 'session;
            }
        }
    }
    let _ = events.send(Event::Closed(conn));
}

fn serve_connection(conn: ConnId, stream: TcpStream, events: Sender<Event>) {
    let _ = stream.set_nodelay(true);
    let mut head = [0u8; 4];
    let is_http = matches!(stream.peek(&mut head), Ok(4) if &head == b"GET ");
    if is_http {
        serve_websocket(conn, stream, events);
    } else {
        serve_stream(conn, stream, events);
    }
}

/// A running server; dropping it does not stop it, call [`ServerHandle::shutdown`].
pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Arc<AtomicBool>,
    events: Sender<Event>,
    accept: Option<JoinHandle<()>>,
    sim: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = self.events.send(Event::Shutdown);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
        if let Some(h) = self.sim.take() {
            let _ = h.join();
        }
    }

    /// Block until the server stops.
    pub fn wait(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

/// Start serving `env` on an already bound listener.
pub fn spawn(env: Env, listener: TcpListener) -> Result<ServerHandle, Error> {
    let addr = listener.local_addr().map_err(|e| Error::Io { path: "listener".into(), source: e })?;
    listener.set_nonblocking(true).map_err(|e| Error::Io { path: addr.to_string().into(), source: e })?;
    let (events, rx) = mpsc::channel();
    let sim = thread::spawn(move || run_sim(env, rx));
    let stop = Arc::new(AtomicBool::new(false));
    let next = AtomicU64::new(1);
    let accept = {
        let stop = stop.clone();
        let events = events.clone();
        thread::spawn(move || {
            while !stop.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, peer)) => {
                        let _ = stream.set_nonblocking(false);
                        let conn = next.fetch_add(1, Ordering::SeqCst);
                        log::info!("connection {conn} from {peer}");
                        let events = events.clone();
                        thread::spawn(move || serve_connection(conn, stream, events));
                    }
                    Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(20)),
                    Err(e) => log::warn!("accept failed: {e}"),
                }
            }
        })
    };
    Ok(ServerHandle { addr, stop, events, accept: Some(accept), sim: Some(sim) })
}
