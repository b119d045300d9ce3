use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;

use pplr::bench::{run_bench, slowdown_factors, write_csv, BenchGrid, BenchMode};
use pplr::config::RunConfig;
use pplr::dataset::{Label, LabeledDataset};
use pplr::dimreduce::{Method, ProjectionState};
use pplr::features::ingest_corpus;
use pplr::logistic::{auc, scores, train_online_blocks, Model};
use pplr::paillier::{keygen, KeyPair};
use pplr::protocol::BobEvaluator;
use pplr::rng::derive_rng;
use pplr::synth::{planted, SynthSpec};
use pplr::transport::{
    carol_run_eval, run_eval_session, run_training_session, serve_eval_sessions, Party, TcpChannel,
    TrainingSession, Transport, CONNECT_PATIENCE,
};

const SECURE_KEY_BITS: u32 = 1024;

#[derive(Parser)]
#[command(name = "pplr", version, about = "Private logistic regression for spam filtering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Permit keys shorter than 1024 bits.
    #[arg(long)]
    allow_insecure_keys: bool,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => RunConfig::default(),
        };
        for kv in &self.set {
            let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn check_key_bits(&self, bits: u32) -> Result<()> {
        if bits < SECURE_KEY_BITS && !self.allow_insecure_keys {
            bail!("{bits}-bit keys are insecure; pass --allow-insecure-keys to use them anyway");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainRole {
    Alice,
    Bob,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalRole {
    Bob,
    Carol,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Paillier key pair.
    Keygen {
        #[arg(long)]
        bits: Option<u32>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the public half here.
        #[arg(long)]
        public_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Extract 4-gram features from a labeled corpus.
    Features {
        #[arg(long)]
        corpus_root: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a reduction on a dataset and project it.
    Reduce {
        #[arg(long)]
        data: PathBuf,
        /// `method:target`; defaults to the config's dimred.
        #[arg(long)]
        dimred: Option<String>,
        /// Apply a previously fitted state instead of fitting.
        #[arg(long, conflicts_with = "dimred")]
        state: Option<PathBuf>,
        #[arg(long)]
        state_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train in the clear with the same block schedule as the protocol.
    TrainPlain {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        model_out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train through the private protocol.
    Train {
        #[arg(long, value_enum, default_value = "both")]
        role: TrainRole,
        /// Alice's labeled data.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Bob's key pair.
        #[arg(long)]
        keys: Option<PathBuf>,
        /// Feature dimension, for Bob when he has no data.
        #[arg(long)]
        dim: Option<u32>,
        /// Bob's starting model; zeros if absent.
        #[arg(long)]
        model_in: Option<PathBuf>,
        #[arg(long)]
        model_out: Option<PathBuf>,
        /// Per-step timing CSV.
        #[arg(long)]
        timings_csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Classify documents privately.
    Eval {
        #[arg(long, value_enum, default_value = "both")]
        role: EvalRole,
        #[arg(long)]
        keys: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Documents to classify (Carol or both).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Sessions Bob serves before exiting.
        #[arg(long, default_value_t = 1)]
        sessions: usize,
        /// Feature dimension, for Carol.
        #[arg(long)]
        dim: Option<u32>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a benchmark grid and write a results CSV.
    Bench {
        /// Labeled data; split by the config's test_fraction.
        #[arg(long, conflicts_with = "synthetic")]
        data: Option<PathBuf>,
        /// `docs:dim` of a planted separable corpus instead of --data.
        #[arg(long)]
        synthetic: Option<String>,
        /// Comma-separated; `none` means no reduction.
        #[arg(long, default_value = "none")]
        methods: String,
        #[arg(long, default_value = "")]
        dims: String,
        #[arg(long)]
        block_sizes: Option<String>,
        #[arg(long)]
        key_bits: Option<String>,
        #[arg(long, default_value = "plain")]
        mode: String,
        #[arg(long)]
        max_docs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Print a model's parameters and largest weights.
    InspectModel {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
}

fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(LabeledDataset::from_text(&text).with_context(|| format!("parsing {}", path.display()))?)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn read_keys(path: &Path) -> Result<KeyPair> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(KeyPair::from_bytes(&bytes)?)
}

fn read_model(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Model::from_bytes(&bytes)?)
}

fn provenance(cfg: &RunConfig, extra: &[(&str, String)]) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = cfg.pairs().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    out.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
    out
}

fn list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse().map_err(|_| anyhow::anyhow!("bad {what} {t:?}")))
        .collect()
}

/// Shuffled split by the config's test fraction.
fn split(data: &LabeledDataset, cfg: &RunConfig) -> (LabeledDataset, LabeledDataset) {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut derive_rng(cfg.seed, "cli-split"));
    let n_test = ((data.len() as f64) * cfg.test_fraction).round() as usize;
    let (test, train) = order.split_at(n_test);
    (data.subset(train), data.subset(test))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Keygen {
            bits,
            out,
            public_out,
            common,
        } => {
            let cfg = common.load()?;
            let bits = bits.unwrap_or(cfg.key_bits);
            common.check_key_bits(bits)?;
            let keys = keygen(bits, &mut derive_rng(cfg.seed, "cli-keygen"))?;
            write_file(&out, &keys.to_bytes())?;
            if let Some(p) = public_out {
                write_file(&p, &keys.public.to_bytes())?;
            }
            println!("wrote {bits}-bit key pair to {}", out.display());
        }

        Command::Features {
            corpus_root,
            labels,
            out,
            common,
        } => {
            let cfg = common.load()?;
            let root = corpus_root.or(cfg.corpus_root.clone()).context("no corpus_root given")?;
            let labels = labels.or(cfg.labels.clone()).context("no labels file given")?;
            let (data, manifest) = ingest_corpus(&root, &labels, cfg.prefix_limit, cfg.hash_space)?;
            write_file(&out, data.to_text().as_bytes())?;
            println!(
                "{} documents ({} spam, {} ham, spam fraction {:.5}) -> {}",
                manifest.total(),
                manifest.spam,
                manifest.ham,
                manifest.spam_fraction(),
                out.display()
            );
        }

        Command::Reduce {
            data,
            dimred,
            state,
            state_out,
            out,
            common,
        } => {
            let cfg = common.load()?;
            let data = read_dataset(&data)?;
            let fitted = match state {
                Some(p) => ProjectionState::from_text(&fs::read_to_string(&p)?)?,
                None => {
                    let d = match dimred {
                        Some(s) => s.parse()?,
                        None => cfg.dimred.context("no dimred given")?,
                    };
                    ProjectionState::fit(&d.spec(data.dim(), cfg.seed)?, &data)?
                }
            };
            let reduced = fitted.project_dataset(&data)?;
            write_file(&out, reduced.to_text().as_bytes())?;
            if let Some(p) = state_out {
                write_file(&p, fitted.to_text().as_bytes())?;
            }
            println!("{} -> {} features ({})", data.dim(), reduced.dim(), fitted.spec().method);
        }

        Command::TrainPlain {
            data,
            test,
            model_out,
            common,
        } => {
            let cfg = common.load()?;
            let data = read_dataset(&data)?;
            let model = train_online_blocks(&data, cfg.block_size as usize, cfg.epochs, cfg.eta, cfg.reg_lambda)?;
            write_file(&model_out, &model.to_bytes())?;
            if let Some(t) = test {
                let test = read_dataset(&t)?;
                println!("test AUC {:.6}", auc(&scores(&model, &test), &test.labels())?);
            }
        }

        Command::Train {
            role,
            data,
            keys,
            dim,
            model_in,
            model_out,
            timings_csv,
            common,
        } => {
            let cfg = common.load()?;
            common.check_key_bits(cfg.key_bits)?;
            if cfg.block_size == 1 {
                eprintln!("warning: block_size = 1 lets Bob see each document's gradient contribution");
            }
            let data = data.map(|p| read_dataset(&p)).transpose()?;
            let dim = match (&data, dim) {
                (Some(d), _) => d.dim(),
                (None, Some(d)) => d,
                (None, None) => bail!("give --data or --dim"),
            };
            let sess = TrainingSession {
                params: cfg.session_params(dim)?,
                epochs: cfg.epochs,
                tol: cfg.tol,
                seed: cfg.seed,
                transport: cfg.transport.clone(),
                timeout: cfg.timeout,
            };
            let bob_state = || -> Result<(KeyPair, Model)> {
                let keys = read_keys(keys.as_deref().context("Bob needs --keys")?)?;
                let model = match &model_in {
                    Some(p) => read_model(p)?,
                    None => Model::zeros(dim as usize, cfg.eta, cfg.reg_lambda)?,
                };
                Ok((keys, model))
            };
            let party = match role {
                TrainRole::Alice => Party::Alice {
                    data: data.as_ref().context("Alice needs --data")?,
                },
                TrainRole::Bob => {
                    let (keys, model) = bob_state()?;
                    Party::Bob { keys, model }
                }
                TrainRole::Both => {
                    let (keys, model) = bob_state()?;
                    Party::Both {
                        keys,
                        model,
                        data: data.as_ref().context("--data is required")?,
                    }
                }
            };
            let report = run_training_session(&sess, party)?;
            println!(
                "{} rounds{}; {}",
                report.rounds,
                if report.converged { ", converged" } else { "" },
                report.counters
            );
            if let (Some(p), Some(m)) = (&model_out, &report.model) {
                write_file(p, &m.to_bytes())?;
            }
            if let Some(p) = timings_csv {
                let mut out = Vec::new();
                for (k, v) in provenance(&cfg, &[("dim", dim.to_string())]) {
                    writeln!(out, "# {k}={v}")?;
                }
                out.extend_from_slice(report.timings.to_csv().as_bytes());
                write_file(&p, &out)?;
            }
        }

        Command::Eval {
            role,
            keys,
            model,
            data,
            sessions,
            dim,
            common,
        } => {
            let cfg = common.load()?;
            common.check_key_bits(cfg.key_bits)?;
            match role {
                EvalRole::Bob => {
                    let model = read_model(model.as_deref().context("--model is required")?)?;
                    let keys = read_keys(keys.as_deref().context("--keys is required")?)?;
                    let Transport::Tcp(addr) = &cfg.transport else {
                        bail!("Bob alone needs transport = host:port");
                    };
                    let params = cfg.session_params(model.dim() as u32)?;
                    let listener = TcpListener::bind(addr)?;
                    let labels = serve_eval_sessions(&listener, &keys, &model, &params, cfg.seed, sessions, cfg.timeout)?;
                    println!("served {} sessions", labels.len());
                }
                EvalRole::Carol => {
                    let data = read_dataset(data.as_deref().context("--data is required")?)?;
                    let Transport::Tcp(addr) = &cfg.transport else {
                        bail!("Carol alone needs transport = host:port");
                    };
                    let params = cfg.session_params(dim.unwrap_or(data.dim()))?;
                    for (i, (x, _)) in data.iter().enumerate() {
                        let mut chan = TcpChannel::connect_patiently(addr, cfg.timeout, CONNECT_PATIENCE)?;
                        let label = carol_run_eval(&mut chan, &params, x, cfg.seed.wrapping_add(i as u64))?;
                        println!("{}", label.sign());
                    }
                }
                EvalRole::Both => {
                    let model = read_model(model.as_deref().context("--model is required")?)?;
                    let keys = read_keys(keys.as_deref().context("--keys is required")?)?;
                    let data = read_dataset(data.as_deref().context("--data is required")?)?;
                    let params = cfg.session_params(model.dim() as u32)?;
                    let mut bob = BobEvaluator::new(keys, model.clone(), params, cfg.seed)?;
                    let mut agree = 0;
                    for (i, (x, _)) in data.iter().enumerate() {
                        let r = run_eval_session(&mut bob, x, cfg.seed.wrapping_add(i as u64), &cfg.transport)?;
                        let plain = if model.margin(x) > 0.0 { Label::Positive } else { Label::Negative };
                        agree += (plain == r.label) as usize;
                        println!("{}\t{:.3}s", r.label.sign(), r.seconds);
                    }
                    eprintln!("{agree}/{} agree with the plaintext classifier; {}", data.len(), bob.counters());
                }
            }
        }

        Command::Bench {
            data,
            synthetic,
            methods,
            dims,
            block_sizes,
            key_bits,
            mode,
            max_docs,
            out,
            common,
        } => {
            let cfg = common.load()?;
            let all = match (data, &synthetic) {
                (Some(p), _) => read_dataset(&p)?,
                (None, Some(s)) => {
                    let (n, d) = s.split_once(':').context("--synthetic expects docs:dim")?;
                    planted(&SynthSpec::separable(n.parse()?, d.parse()?, cfg.seed))?.0
                }
                (None, None) => bail!("give --data or --synthetic"),
            };
            let (train, test) = split(&all, &cfg);
            let methods = methods
                .split(',')
                .map(|m| match m.trim() {
                    "none" => Ok(None),
                    other => Ok(Some(other.parse::<Method>()?)),
                })
                .collect::<Result<Vec<_>>>()?;
            let mode = match mode.as_str() {
                "plain" => BenchMode::Plain,
                "private" => BenchMode::Private,
                other => bail!("unknown mode {other:?}"),
            };
            let grid = BenchGrid {
                methods,
                dims: list(&dims, "dim")?,
                block_sizes: match &block_sizes {
                    Some(s) => list(s, "block size")?,
                    None => vec![cfg.block_size],
                },
                key_bits: match &key_bits {
                    Some(s) => list(s, "key size")?,
                    None => vec![cfg.key_bits],
                },
                mode,
                epochs: cfg.epochs,
                eta: cfg.eta,
                scale: cfg.scale,
                max_docs,
                seed: cfg.seed,
            };
            if mode == BenchMode::Private {
                for &b in &grid.key_bits {
                    common.check_key_bits(b)?;
                }
            }
            let rows = run_bench(&grid, &train, &test)?;
            let extra = [
                ("methods", grid.methods.iter().map(|m| m.map_or("none", Method::name)).collect::<Vec<_>>().join(",")),
                ("dims", dims.clone()),
                ("block_sizes", block_sizes.unwrap_or_default()),
                ("key_bits_grid", key_bits.unwrap_or_default()),
                ("mode", mode.name().to_string()),
                ("synthetic", synthetic.unwrap_or_default()),
                ("max_docs", max_docs.map(|m| m.to_string()).unwrap_or_default()),
            ];
            let file = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_csv(file, &provenance(&cfg, &extra), &rows)?;
            let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
            println!("{} rows ({failed} failed) -> {}", rows.len(), out.display());
            for (m, d, k, lo, hi, f) in slowdown_factors(&rows) {
                println!("{m} dim={d} K={k}: {hi}-bit keys {f:.1}x slower than {lo}-bit");
            }
        }

        Command::InspectModel { model, top } => {
            let m = read_model(&model)?;
            println!("dim {}  eta {}  lambda {}", m.dim(), m.eta, m.reg_lambda);
            let norm = m.w.iter().map(|w| w * w).sum::<f64>().sqrt();
            println!("|w| = {norm:.6}");
            let mut idx: Vec<usize> = (0..m.dim()).collect();
            idx.sort_by(|&a, &b| m.w[b].abs().total_cmp(&m.w[a].abs()));
            for i in idx.into_iter().take(top) {
                println!("{i}\t{:+.6}", m.w[i]);
            }
        }
    }
    Ok(())
}
