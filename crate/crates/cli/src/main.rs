use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use ref_nsm::datagen::{generate_dataset, read_dataset, write_dataset, GeneratorConfig};
use ref_nsm::gesture::GroundPoint;
use ref_nsm::reasoner::TrainConfig;
use ref_nsm::{EmbedMode, EmbeddingTable, Engine, Error, Lexicon, ModelParams, Pointing, Scene, StopWords, Trajectory};

#[derive(Parser)]
#[command(
    name = "ref-nsm",
    version,
    about = "Resolve multimodal referring expressions with a neural state machine"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for generation, initialization and shuffling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Pretrained embeddings in `token v1 … vd` text format.
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    embed_mode: Option<Mode>,
    #[arg(long, global = true, default_value_t = 50)]
    dim: usize,
    /// Lexicon JSON; defaults to the built-in lexicon.
    #[arg(long, global = true, env = "REF_NSM_LEXICON")]
    lexicon: Option<PathBuf>,
    /// Stop-word list, one token per line.
    #[arg(long, global = true)]
    stopwords: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    File,
    Hash,
    Onehot,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        train: usize,
        #[arg(long, default_value_t = 100)]
        val: usize,
        /// Also write a split over the held-out object names, sized like val.
        #[arg(long)]
        generalization: bool,
    },
    /// Compile an instruction into a reasoning program.
    Parse {
        #[arg(long, required_unless_present = "conllu", conflicts_with = "conllu")]
        instruction: Option<String>,
        /// Pre-parsed dependency tree in CoNLL-U format.
        #[arg(long)]
        conllu: Option<PathBuf>,
    },
    /// Score scene objects against a pointing trajectory.
    Point {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        scene: PathBuf,
    },
    /// Resolve one instruction in one scene.
    Reason {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        instruction: String,
        #[arg(long)]
        conllu: Option<PathBuf>,
        #[arg(long, conflicts_with = "target")]
        trajectory: Option<PathBuf>,
        /// Pointed ground location `x,y` instead of a trajectory.
        #[arg(long, value_parser = parse_point)]
        target: Option<GroundPoint>,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        no_gesture: bool,
    },
    /// Train the state machine on a dataset split.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "train")]
        split: String,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 1)]
        batch_size: usize,
        #[arg(long, default_value_t = 0.01)]
        init_noise: f64,
    },
    /// Accuracy of trained parameters on a dataset split.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "val")]
        split: String,
        #[arg(long)]
        params: PathBuf,
        /// Ignore pointing gestures.
        #[arg(long)]
        no_gesture: bool,
        /// Include per-episode predictions.
        #[arg(long)]
        predictions: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Trained parameters; without them a model is trained at startup on
        /// a synthetic dataset.
        #[arg(long)]
        params: Option<PathBuf>,
    },
}

fn parse_point(s: &str) -> Result<GroundPoint, String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [x, y] => {
            let x = x.trim().parse::<f64>().map_err(|e| e.to_string())?;
            let y = y.trim().parse::<f64>().map_err(|e| e.to_string())?;
            Ok(GroundPoint::new(x, y))
        }
        _ => Err("expected `x,y`".into()),
    }
}

enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn emit<T: Serialize>(value: &T) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).expect("output serializes");
    // a closed pipe (e.g. `| head`) is not an error worth reporting
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })
}

fn read_text(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

impl Global {
    fn lexicon(&self) -> Result<Lexicon, Error> {
        match &self.lexicon {
            Some(path) => Lexicon::load(path),
            None => Ok(Lexicon::default()),
        }
    }

    fn engine(&self) -> Result<Engine, Error> {
        let lexicon = self.lexicon()?;
        let mode = match (self.embed_mode, &self.embeddings) {
            (Some(Mode::File), _) | (None, Some(_)) => EmbedMode::File,
            (Some(Mode::Hash), _) => EmbedMode::Hash,
            (Some(Mode::Onehot), _) | (None, None) => EmbedMode::OneHot,
        };
        // the OOV seed stays fixed so training and evaluation agree
        let embeddings = EmbeddingTable::from_mode(mode, self.dim, &lexicon, self.embeddings.as_deref(), 0)?;
        let mut engine = Engine::new(lexicon, embeddings);
        if let Some(path) = &self.stopwords {
            engine.stopwords = StopWords::load(path)?;
        }
        Ok(engine)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let g = &cli.global;
    match cli.command {
        Command::Gen {
            out,
            train,
            val,
            generalization,
        } => {
            if train == 0 {
                return Err(Failure::Usage("--train must be at least 1".into()));
            }
            let lexicon = g.lexicon()?;
            let config = GeneratorConfig {
                seed: g.seed,
                train,
                val,
                generalization: if generalization { val } else { 0 },
                ..Default::default()
            };
            let dataset = generate_dataset(&config, &lexicon)?;
            write_dataset(&out, &dataset)?;
            let splits: serde_json::Map<String, serde_json::Value> = dataset
                .manifest
                .splits
                .iter()
                .map(|(k, v)| (k.clone(), json!(v.len())))
                .collect();
            emit(&json!({ "out": out, "episodes": dataset.episodes.len(), "splits": splits }));
        }
        Command::Parse { instruction, conllu } => {
            let engine = g.engine()?;
            let program = match conllu {
                Some(path) => engine.compile(instruction.as_deref().unwrap_or(""), Some(&read_text(&path)?))?,
                None => engine.compile(instruction.as_deref().unwrap_or(""), None)?,
            };
            emit(&program);
        }
        Command::Point { trajectory, scene } => {
            let engine = g.engine()?;
            let scene: Scene = read_json(&scene)?;
            let trajectory: Trajectory = read_json(&trajectory)?;
            emit(&engine.point(&scene, &Pointing::Trajectory(trajectory))?);
        }
        Command::Reason {
            scene,
            instruction,
            conllu,
            trajectory,
            target,
            params,
            trace,
            no_gesture,
        } => {
            let engine = g.engine()?;
            let scene: Scene = read_json(&scene)?;
            let params = ModelParams::load(&params)?;
            let conllu = conllu.map(|p| read_text(&p)).transpose()?;
            let program = engine.compile(&instruction, conllu.as_deref())?;
            let pointing = match (trajectory, target) {
                _ if no_gesture => None,
                (Some(path), _) => Some(Pointing::Trajectory(read_json(&path)?)),
                (None, Some(target)) => Some(Pointing::Target { target }),
                (None, None) => None,
            };
            let pointing = pointing.map(|p| engine.point(&scene, &p)).transpose()?;
            let result = engine.reason(&scene, &program, pointing.as_ref(), &params)?;
            let mut out = json!({
                "prediction": result.prediction,
                "node_ids": result.node_ids,
                "final_p": result.final_p(),
                "program": program,
                "pointing": pointing,
            });
            if trace {
                out["p0"] = json!(result.p0);
                out["trace"] = json!(result.steps);
            }
            emit(&out);
        }
        Command::Train {
            data,
            out,
            split,
            epochs,
            lr,
            batch_size,
            init_noise,
        } => {
            let engine = g.engine()?;
            let dataset = read_dataset(&data)?;
            let episodes = dataset.split(&split)?;
            let config = TrainConfig {
                learning_rate: lr,
                epochs,
                batch_size,
                seed: g.seed,
                init_noise,
            };
            let report = engine.train(&episodes, &config)?;
            report.params.save(&out)?;
            emit(&json!({
                "out": out,
                "n": episodes.len(),
                "epochs": epochs,
                "initial_loss": report.initial_loss,
                "epoch_losses": report.epoch_losses,
            }));
        }
        Command::Eval {
            data,
            split,
            params,
            no_gesture,
            predictions,
        } => {
            let engine = g.engine()?;
            let dataset = read_dataset(&data)?;
            let episodes = dataset.split(&split)?;
            let params = ModelParams::load(&params)?;
            let mut report = engine.evaluate(&episodes, &params, no_gesture)?;
            if !predictions {
                report.predictions.clear();
            }
            let mut out = serde_json::to_value(&report).expect("report serializes");
            out["split"] = json!(split);
            out["no_gesture"] = json!(no_gesture);
            if !predictions {
                out.as_object_mut().expect("object").remove("predictions");
            }
            emit(&out);
        }
        Command::Serve { port, host, params } => {
            let engine = g.engine()?;
            let params = match params {
                Some(path) => ModelParams::load(&path)?,
                None => {
                    eprintln!("no --params given; training on a synthetic dataset (seed {})", g.seed);
                    let config = GeneratorConfig {
                        seed: g.seed,
                        val: 0,
                        ..Default::default()
                    };
                    let dataset = generate_dataset(&config, &engine.lexicon)?;
                    let train = dataset.split("train")?;
                    engine
                        .train(
                            &train,
                            &TrainConfig {
                                seed: g.seed,
                                ..Default::default()
                            },
                        )?
                        .params
                }
            };
            if params.dim != engine.embeddings.dim() {
                return Err(Failure::Domain(Error::Dimension {
                    expected: engine.embeddings.dim(),
                    actual: params.dim,
                }));
            }
            let state = Arc::new(ref_nsm_service::AppState { engine, params });
            let addr = format!("{host}:{port}");
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::Io {
                path: PathBuf::from(&addr),
                source: e,
            })?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| Error::Io {
                    path: PathBuf::from(&addr),
                    source: e,
                })?;
                eprintln!("listening on http://{addr}");
                ref_nsm_service::serve(listener, state).await.map_err(|e| Error::Io {
                    path: PathBuf::from(&addr),
                    source: e,
                })
            })?;
        }
    }
    Ok(())
}
