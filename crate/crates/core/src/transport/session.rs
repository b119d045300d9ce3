//! Session drivers: handshake, round scheduling and abort handling.
//!
//! Training dialogue, after the handshake:
//!
//! ```text
//! Alice: Control(Weights)            request a round
//! Bob:   E[w] ... Alice: E[w'] ...   steps 1 to 12
//! Bob:   Control(Update, converged)  round status
//! ...
//! Alice: Control(Done)
//! ```
//!
//! Any failure on either side sends a single abort frame, discards the
//! round in progress and closes the channel.

use std::net::TcpListener;
use std::sync::{Mutex, MutexGuard};
use std::thread;
use std::time::{Duration, Instant};

use super::{inproc_pair, Channel, TcpChannel};
use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::features::SparseBinaryVector;
use crate::logistic::Model;
use crate::paillier::{KeyPair, PublicKey};
use crate::protocol::{
    AliceTrainer, BobEvaluator, BobTrainer, CarolEvaluator, MessageType, OpCounters, ProtocolMessage,
    SessionParams, Stage, StepTimings,
};

/// How long a client keeps retrying a server that is not listening yet.
pub const CONNECT_PATIENCE: Duration = Duration::from_secs(10);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Transport {
    InProc,
    /// `host:port`. Bob listens, Alice or Carol connects.
    Tcp(String),
}

#[derive(Clone, Debug)]
pub struct TrainingSession {
    pub params: SessionParams,
    /// Passes over the data owner's blocks.
    pub epochs: usize,
    /// Bob stops early once a round changes no weight by `tol` or more.
    pub tol: f64,
    pub seed: u64,
    pub transport: Transport,
    pub timeout: Option<Duration>,
}

pub enum Party<'a> {
    Alice { data: &'a LabeledDataset },
    Bob { keys: KeyPair, model: Model },
    Both { keys: KeyPair, model: Model, data: &'a LabeledDataset },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingReport {
    /// Present on Bob's side only.
    pub model: Option<Model>,
    pub counters: OpCounters,
    pub timings: StepTimings,
    pub rounds: u64,
    pub converged: bool,
}

fn guard<C: Channel, T>(chan: &mut C, session_id: u64, r: Result<T>) -> Result<T> {
    if let Err(e) = &r {
        if !matches!(e, Error::Aborted(_)) {
            chan.abort(session_id, &e.to_string());
        }
    }
    r
}

fn recv_checked<C: Channel>(chan: &mut C) -> Result<ProtocolMessage> {
    let msg = chan.recv()?;
    msg.check_abort()?;
    Ok(msg)
}

fn handshake_fields(pk: Option<&PublicKey>, params: &SessionParams) -> Vec<Vec<u8>> {
    let mut fields = Vec::new();
    if let Some(pk) = pk {
        fields.push(pk.to_bytes());
    }
    fields.extend(params.to_fields());
    fields
}

fn check_params(own: &SessionParams, theirs: &SessionParams) -> Result<()> {
    let diff = own.mismatches(theirs);
    if diff.is_empty() {
        Ok(())
    } else {
        Err(Error::Handshake(format!("parameters differ: {}", diff.join(", "))))
    }
}

/// Bob's handshake: announce key and parameters, check the peer's echo.
fn bob_handshake<C: Channel>(chan: &mut C, pk: &PublicKey, params: &SessionParams, session_id: u64) -> Result<()> {
    chan.send(&ProtocolMessage::new(
        session_id,
        MessageType::Handshake,
        handshake_fields(Some(pk), params),
    ))?;
    let reply = recv_checked(chan)?;
    let r = (|| {
        if reply.kind != MessageType::Handshake || reply.session_id != session_id {
            return Err(Error::Handshake("expected a handshake reply".into()));
        }
        check_params(params, &SessionParams::from_fields(&reply.fields)?)
    })();
    guard(chan, session_id, r)
}

/// Data owner's handshake: returns Bob's key and the session id.
fn peer_handshake<C: Channel>(chan: &mut C, params: &SessionParams) -> Result<(PublicKey, u64)> {
    let msg = recv_checked(chan)?;
    let session_id = msg.session_id;
    let r = (|| {
        if msg.kind != MessageType::Handshake || msg.fields.is_empty() {
            return Err(Error::Handshake("expected a handshake".into()));
        }
        let pk = PublicKey::from_bytes(&msg.fields[0])?;
        check_params(params, &SessionParams::from_fields(&msg.fields[1..])?)?;
        if pk.bits() != params.key_bits {
            return Err(Error::Handshake(format!(
                "key has {} bits, expected {}",
                pk.bits(),
                params.key_bits
            )));
        }
        Ok(pk)
    })();
    let pk = guard(chan, session_id, r)?;
    chan.send(&ProtocolMessage::new(
        session_id,
        MessageType::Handshake,
        handshake_fields(None, params),
    ))?;
    Ok((pk, session_id))
}

/// Serves training rounds until the data owner is done. Returns the number
/// of rounds and whether the last one met the tolerance.
pub fn bob_serve_training<C: Channel>(chan: &mut C, bob: &mut BobTrainer, tol: f64) -> Result<(u64, bool)> {
    serve_rounds(chan, bob, tol, None)
}

/// Like [`bob_serve_training`], against a model shared with other sessions.
/// Each round starts from the current shared weights; its update is
/// committed under the registry lock once Step 12 has decrypted it.
pub fn bob_serve_shared<C: Channel>(
    chan: &mut C,
    bob: &mut BobTrainer,
    tol: f64,
    registry: &Mutex<Model>,
) -> Result<(u64, bool)> {
    serve_rounds(chan, bob, tol, Some(registry))
}

fn lock(registry: &Mutex<Model>) -> MutexGuard<'_, Model> {
    registry.lock().unwrap_or_else(|p| p.into_inner())
}

fn serve_rounds<C: Channel>(
    chan: &mut C,
    bob: &mut BobTrainer,
    tol: f64,
    registry: Option<&Mutex<Model>>,
) -> Result<(u64, bool)> {
    let sid = bob.session_id();
    let pk = bob.public_key().clone();
    let params = bob.params().clone();
    bob_handshake(chan, &pk, &params, sid)?;
    let mut rounds = 0;
    let mut converged = false;
    loop {
        let msg = match recv_checked(chan) {
            Ok(m) => m,
            Err(e) => {
                bob.reset();
                return Err(e);
            }
        };
        let stage = guard(chan, sid, msg.stage());
        let r = match (msg.kind, stage?) {
            (MessageType::Control, Stage::Done) => return Ok((rounds, converged)),
            (MessageType::Control, Stage::Weights) => (|| {
                let base = match registry {
                    Some(r) => {
                        let w = lock(r).w.clone();
                        bob.set_weights(w.clone())?;
                        Some(w)
                    }
                    None => None,
                };
                chan.send(&bob.start_round()?)?;
                let m3 = recv_checked(chan)?;
                chan.send(&bob.exponentiate_share(&m3)?)?;
                let m7 = recv_checked(chan)?;
                chan.send(&bob.reciprocal(&m7)?)?;
                let m11 = recv_checked(chan)?;
                let change = bob.finish_round(&m11)?;
                if let (Some(r), Some(base)) = (registry, base) {
                    let mut shared = lock(r);
                    for ((s, new), old) in shared.w.iter_mut().zip(&bob.model().w).zip(&base) {
                        *s += new - old;
                    }
                }
                converged = tol > 0.0 && change < tol;
                chan.send(&ProtocolMessage::control(sid, Stage::Update, &[converged as u8]))
            })(),
            (kind, stage) => Err(Error::Protocol(format!("unexpected {kind:?}/{stage} between rounds"))),
        };
        if let Err(e) = guard(chan, sid, r) {
            bob.reset();
            return Err(e);
        }
        rounds += 1;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AliceReport {
    pub counters: OpCounters,
    pub timings: StepTimings,
    pub rounds: u64,
    pub converged: bool,
}

/// Runs `epochs` passes of online training over `data` in blocks of `K`.
pub fn alice_run_training<C: Channel>(
    chan: &mut C,
    params: &SessionParams,
    data: &LabeledDataset,
    epochs: usize,
    seed: u64,
) -> Result<AliceReport> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("no training documents".into()));
    }
    let (pk, sid) = peer_handshake(chan, params)?;
    let blocks: Vec<LabeledDataset> = data.blocks(params.block_size as usize).collect();
    let r = AliceTrainer::new(pk, params.clone(), blocks[0].clone(), sid, seed);
    let mut alice = guard(chan, sid, r)?;
    let mut rounds = 0;
    let mut converged = false;
    'outer: for _ in 0..epochs {
        for block in &blocks {
            let r = (|| {
                alice.set_block(block.clone())?;
                chan.send(&ProtocolMessage::control(sid, Stage::Weights, &[]))?;
                let m1 = recv_checked(chan)?;
                chan.send(&alice.blind_margins(&m1)?)?;
                let m5 = recv_checked(chan)?;
                chan.send(&alice.unblind_and_scale(&m5)?)?;
                let m8 = recv_checked(chan)?;
                chan.send(&alice.finish_gradient(&m8)?)?;
                let status = recv_checked(chan)?;
                if status.kind != MessageType::Control || status.stage()? != Stage::Update {
                    return Err(Error::Protocol("expected round status".into()));
                }
                Ok(status.fields.get(1).and_then(|f| f.first()) == Some(&1))
            })();
            match guard(chan, sid, r) {
                Ok(c) => {
                    rounds += 1;
                    converged = c;
                    if c {
                        break 'outer;
                    }
                }
                Err(e) => {
                    alice.reset();
                    return Err(e);
                }
            }
        }
    }
    chan.send(&ProtocolMessage::control(sid, Stage::Done, &[]))?;
    Ok(AliceReport {
        counters: *alice.counters(),
        timings: *alice.timings(),
        rounds,
        converged,
    })
}

fn check_data(params: &SessionParams, data: &LabeledDataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("no training documents".into()));
    }
    if data.dim() != params.dim {
        return Err(Error::Dimension(format!(
            "data has dimension {}, session expects {}",
            data.dim(),
            params.dim
        )));
    }
    Ok(())
}

fn bob_side<C: Channel>(chan: &mut C, sess: &TrainingSession, keys: KeyPair, model: Model) -> Result<TrainingReport> {
    let mut bob = BobTrainer::new(keys, model, sess.params.clone(), sess.seed)?;
    let (rounds, converged) = bob_serve_training(chan, &mut bob, sess.tol)?;
    Ok(TrainingReport {
        counters: *bob.counters(),
        timings: *bob.timings(),
        rounds,
        converged,
        model: Some(bob.into_model()),
    })
}

fn merge(bob: TrainingReport, alice: AliceReport) -> TrainingReport {
    let mut counters = bob.counters;
    counters += alice.counters;
    let mut timings = bob.timings;
    timings += alice.timings;
    TrainingReport {
        counters,
        timings,
        ..bob
    }
}

/// Runs a training session for the given party (or both, in one process).
pub fn run_training_session(sess: &TrainingSession, party: Party<'_>) -> Result<TrainingReport> {
    sess.params.validate()?;
    match (party, &sess.transport) {
        (Party::Both { keys, model, data }, Transport::InProc) => {
            check_data(&sess.params, data)?;
            let (a, b) = inproc_pair();
            let (mut a, mut b) = match sess.timeout {
                Some(t) => (a.with_timeout(t), b.with_timeout(t)),
                None => (a, b),
            };
            thread::scope(|s| {
                let bob = s.spawn(move || bob_side(&mut b, sess, keys, model));
                let alice = alice_run_training(&mut a, &sess.params, data, sess.epochs, sess.seed);
                drop(a);
                let bob = bob.join().expect("bob thread panicked");
                Ok(merge(bob?, alice?))
            })
        }
        (Party::Both { keys, model, data }, Transport::Tcp(addr)) => {
            check_data(&sess.params, data)?;
            let listener = TcpListener::bind(addr)?;
            let local = listener.local_addr()?;
            thread::scope(|s| {
                let bob = s.spawn(move || {
                    let mut chan = TcpChannel::accept(&listener, sess.timeout)?;
                    bob_side(&mut chan, sess, keys, model)
                });
                let alice = TcpChannel::connect(local, sess.timeout)
                    .and_then(|mut chan| alice_run_training(&mut chan, &sess.params, data, sess.epochs, sess.seed));
                let bob = bob.join().expect("bob thread panicked");
                Ok(merge(bob?, alice?))
            })
        }
        (Party::Bob { keys, model }, Transport::Tcp(addr)) => {
            let listener = TcpListener::bind(addr)?;
            let mut chan = TcpChannel::accept(&listener, sess.timeout)?;
            bob_side(&mut chan, sess, keys, model)
        }
        (Party::Alice { data }, Transport::Tcp(addr)) => {
            check_data(&sess.params, data)?;
            let mut chan = TcpChannel::connect_patiently(addr, sess.timeout, CONNECT_PATIENCE)?;
            let alice = alice_run_training(&mut chan, &sess.params, data, sess.epochs, sess.seed)?;
            Ok(TrainingReport {
                model: None,
                counters: alice.counters,
                timings: alice.timings,
                rounds: alice.rounds,
                converged: alice.converged,
            })
        }
        (_, Transport::InProc) => Err(Error::Config(
            "an in-process session needs both parties; use a socket address for a single role".into(),
        )),
    }
}

/// Accepts `sessions` training connections on `listener`, each served on
/// its own thread against one shared model. Returns the shared model and
/// the summed counters.
pub fn serve_training_sessions(
    listener: &TcpListener,
    keys: &KeyPair,
    model: Model,
    sess: &TrainingSession,
    sessions: usize,
) -> Result<TrainingReport> {
    let registry = Mutex::new(model);
    let reports: Vec<Result<(OpCounters, StepTimings, u64, bool)>> = thread::scope(|s| {
        let mut handles = Vec::new();
        for i in 0..sessions {
            let chan = TcpChannel::accept(listener, sess.timeout);
            let registry = &registry;
            let seed = sess.seed.wrapping_add(i as u64);
            handles.push(s.spawn(move || {
                let mut chan = chan?;
                let snapshot = lock(registry).clone();
                let mut bob = BobTrainer::new(keys.clone(), snapshot, sess.params.clone(), seed)?;
                let (rounds, converged) = bob_serve_shared(&mut chan, &mut bob, sess.tol, registry)?;
                Ok((*bob.counters(), *bob.timings(), rounds, converged))
            }));
        }
        handles.into_iter().map(|h| h.join().expect("session thread panicked")).collect()
    });
    let mut total = TrainingReport {
        model: None,
        counters: OpCounters::default(),
        timings: StepTimings::default(),
        rounds: 0,
        converged: true,
    };
    for r in reports {
        let (counters, timings, rounds, converged) = r?;
        total.counters += counters;
        total.timings += timings;
        total.rounds += rounds;
        total.converged &= converged;
    }
    total.model = Some(registry.into_inner().unwrap_or_else(|p| p.into_inner()));
    Ok(total)
}

/// Accepts `sessions` evaluation connections, one thread each. Every
/// session owns its evaluator; nothing mutable is shared.
pub fn serve_eval_sessions(
    listener: &TcpListener,
    keys: &KeyPair,
    model: &Model,
    params: &SessionParams,
    seed: u64,
    sessions: usize,
    timeout: Option<Duration>,
) -> Result<Vec<Label>> {
    thread::scope(|s| {
        let mut handles = Vec::new();
        for i in 0..sessions {
            let chan = TcpChannel::accept(listener, timeout);
            let seed = seed.wrapping_add(i as u64);
            handles.push(s.spawn(move || {
                let mut chan = chan?;
                let mut bob = BobEvaluator::new(keys.clone(), model.clone(), params.clone(), seed)?;
                bob_serve_eval(&mut chan, &mut bob)
            }));
        }
        handles.into_iter().map(|h| h.join().expect("session thread panicked")).collect()
    })
}

/// Serves one evaluation. Returns the label, which Bob learns as well.
pub fn bob_serve_eval<C: Channel>(chan: &mut C, bob: &mut BobEvaluator) -> Result<Label> {
    let sid = bob.next_session_id();
    let pk = bob.public_key().clone();
    let params = bob.params().clone();
    bob_handshake(chan, &pk, &params, sid)?;
    let r = (|| {
        let (mut sess, m1) = bob.open(sid)?;
        chan.send(&m1)?;
        let m2 = recv_checked(chan)?;
        chan.send(&bob.receive_share(&mut sess, &m2)?)?;
        let m4 = recv_checked(chan)?;
        let (label, m5) = bob.decide(&mut sess, &m4)?;
        chan.send(&m5)?;
        Ok(label)
    })();
    guard(chan, sid, r)
}

/// Classifies `x` against a remote model.
pub fn carol_run_eval<C: Channel>(
    chan: &mut C,
    params: &SessionParams,
    x: &SparseBinaryVector,
    seed: u64,
) -> Result<Label> {
    let (pk, sid) = peer_handshake(chan, params)?;
    let r = (|| {
        let mut carol = CarolEvaluator::new(pk, params.clone(), x.clone(), sid, seed)?;
        let m1 = recv_checked(chan)?;
        chan.send(&carol.inner_product(&m1)?)?;
        let m3 = recv_checked(chan)?;
        chan.send(&carol.mask(&m3)?)?;
        let m5 = recv_checked(chan)?;
        carol.learn(&m5)
    })();
    guard(chan, sid, r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub label: Label,
    pub seconds: f64,
}

/// Both evaluation parties in one process, over the given transport.
pub fn run_eval_session(
    bob: &mut BobEvaluator,
    x: &SparseBinaryVector,
    seed: u64,
    transport: &Transport,
) -> Result<EvalReport> {
    let params = bob.params().clone();
    let t = Instant::now();
    let (bob_label, label) = match transport {
        Transport::InProc => {
            let (mut a, mut b) = inproc_pair();
            thread::scope(|s| {
                let h = s.spawn(move || bob_serve_eval(&mut b, bob));
                let carol = carol_run_eval(&mut a, &params, x, seed);
                drop(a);
                let bob = h.join().expect("bob thread panicked");
                Ok::<_, Error>((bob?, carol?))
            })?
        }
        Transport::Tcp(addr) => {
            let listener = TcpListener::bind(addr)?;
            let local = listener.local_addr()?;
            thread::scope(|s| {
                let h = s.spawn(move || {
                    let mut chan = TcpChannel::accept(&listener, None)?;
                    bob_serve_eval(&mut chan, bob)
                });
                let carol = TcpChannel::connect(local, None).and_then(|mut c| carol_run_eval(&mut c, &params, x, seed));
                let bob = h.join().expect("bob thread panicked");
                Ok::<_, Error>((bob?, carol?))
            })?
        }
    };
    if bob_label != label {
        return Err(Error::Protocol("parties disagree on the label".into()));
    }
    Ok(EvalReport {
        label,
        seconds: t.elapsed().as_secs_f64(),
    })
}
