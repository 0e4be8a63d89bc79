use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use meddm_core::flowgraph::{is_flowchart_candidate, DEFAULT_MIN_SHAPES};
use meddm_core::kb::read_tree;
use meddm_core::stats::{load_summaries, stats};
use meddm_core::synthgen::{gen_case, GenParams};
use meddm_core::{
    parse_ieet, reconstruct, serialize_ieet, to_cgt, validate_cgt, Cgt, DetectionFile, FlowGraph, Kb, LabelLexicon,
    ReconstructConfig, TransformConfig, TreeKind, TreeMeta,
};
use meddm_service::ServiceConfig;

mod consult;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
enum Failure {
    Validation(anyhow::Error),
    Io(anyhow::Error),
    Config(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Io(_) => 2,
            Failure::Config(_) => 3,
        }
    }
}

type Res<T = ()> = Result<T, Failure>;

fn io_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Io(e.into())
}

fn invalid(msg: impl std::fmt::Display) -> Failure {
    Failure::Validation(anyhow!("{msg}"))
}

#[derive(Parser)]
#[command(name = "meddm", version, about = "Flowchart to guidance-tree pipeline and consultation tools")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Rebuild a flow graph from a detection file.
    Reconstruct {
        detection: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Reconstruction parameters as JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Refuse inputs with fewer non-arrow shapes than this (0 disables).
        #[arg(long, default_value_t = DEFAULT_MIN_SHAPES)]
        min_shapes: usize,
    },
    /// Normalize a flow graph into a guidance tree.
    Transform {
        flowgraph: PathBuf,
        #[arg(long)]
        title: String,
        /// differential_diagnosis or treatment_suggestion
        #[arg(long)]
        kind: TreeKind,
        #[arg(long)]
        department: String,
        /// Tree id; defaults to the input file stem.
        #[arg(long)]
        id: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a tree file.
    Validate {
        tree: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Print a tree in IEET form.
    ExportIeet {
        tree: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Read IEET text (`-` for stdin) back into a tree.
    ImportIeet {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Compare with this tree instead of writing; exits 1 on a difference.
        #[arg(long)]
        diff: Option<PathBuf>,
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        kind: Option<TreeKind>,
        #[arg(long)]
        department: Option<String>,
    },
    /// Per-department counts of a knowledge base.
    Stats {
        kb_dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Write synthetic detection files with their ground truth.
    GenSynthetic {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        jitter: Option<f64>,
        /// Generator parameters as JSON; `--seed` and `--jitter` override it.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Print the retrieval index of a knowledge base.
    Index {
        kb_dir: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Interactive consultation in the terminal.
    Consult {
        kb_dir: PathBuf,
        #[arg(long)]
        tree: Option<String>,
        /// keyword, scripted:<file> or llm
        #[arg(long, default_value = "keyword")]
        judge: String,
        /// Service config holding the llm section, for `--judge llm`.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Chief complaint; read from the first input line when absent.
        #[arg(long)]
        complaint: Option<String>,
        #[arg(long, default_value_t = meddm_core::engine::DEFAULT_TURN_LIMIT)]
        turn_limit: usize,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Res<T> {
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(io_err)?;
    serde_json::from_str(&raw).with_context(|| format!("parsing {}", path.display())).map_err(io_err)
}

fn emit(output: Option<&Path>, text: &str) -> Res {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())).map_err(io_err),
        None => io::stdout().write_all(text.as_bytes()).context("writing stdout").map_err(io_err),
    }
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("value serializes") + "\n"
}

fn load_tree(path: &Path) -> Res<Cgt> {
    read_tree(path).map_err(|e| match e {
        meddm_core::kb::KbError::Invalid { .. } => Failure::Validation(e.into()),
        other => io_err(other),
    })
}

fn file_stem(path: &Path) -> String {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("tree");
    let name = name.strip_suffix(".json").unwrap_or(name);
    let name = name.strip_suffix(".flowgraph").unwrap_or(name);
    name.to_string()
}

fn run(cli: Cli) -> Res {
    match cli.cmd {
        Cmd::Reconstruct { detection, output, config, min_shapes } => {
            let det: DetectionFile = read_json(&detection)?;
            let cfg = match config {
                Some(p) => read_json(&p).map_err(|f| match f {
                    Failure::Io(e) => Failure::Config(e),
                    other => other,
                })?,
                None => ReconstructConfig::default(),
            };
            if min_shapes > 0 && !is_flowchart_candidate(&det, min_shapes) {
                return Err(invalid(format!("fewer than {min_shapes} shapes; not treated as a flowchart")));
            }
            let (g, warnings) = reconstruct(&det, &cfg).map_err(|e| Failure::Validation(e.into()))?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            emit(output.as_deref(), &pretty(&g))
        }
        Cmd::Transform { flowgraph, title, kind, department, id, output } => {
            let g: FlowGraph = read_json(&flowgraph)?;
            let meta = TreeMeta {
                id: id.unwrap_or_else(|| file_stem(&flowgraph)),
                title,
                kind,
                department,
                source: serde_json::json!({ "flowgraph": flowgraph.display().to_string() }),
            };
            let (tree, report) = to_cgt(&g, &meta, &LabelLexicon::default(), &TransformConfig::default())
                .map_err(|e| Failure::Validation(e.into()))?;
            for d in &report.diagnostics {
                eprintln!("note: [{}] {}: {}", d.step, d.code, d.message);
            }
            eprintln!(
                "labels collapsed: {}, cycles cut: {}, nodes replicated: {}",
                report.labels_collapsed, report.cycles_cut, report.nodes_replicated
            );
            emit(output.as_deref(), &pretty(&tree))
        }
        Cmd::Validate { tree, json } => {
            let t: Cgt = read_json(&tree)?;
            let report = validate_cgt(&t);
            if json {
                println!("{}", serde_json::to_string(&report).expect("report serializes"));
            } else if report.ok {
                println!("ok: {} nodes", t.nodes.len());
            } else {
                for v in &report.violations {
                    println!("{v:?}");
                }
            }
            if report.ok {
                Ok(())
            } else {
                Err(invalid(format!("{} violation(s)", report.violations.len())))
            }
        }
        Cmd::ExportIeet { tree, output } => {
            let t = load_tree(&tree)?;
            let doc = serialize_ieet(&t).map_err(|e| Failure::Validation(e.into()))?;
            emit(output.as_deref(), &doc.text)
        }
        Cmd::ImportIeet { input, output, diff, id, kind, department } => {
            let text = if input.as_os_str() == "-" {
                let mut s = String::new();
                io::stdin().read_to_string(&mut s).context("reading stdin").map_err(io_err)?;
                s
            } else {
                fs::read_to_string(&input).with_context(|| format!("reading {}", input.display())).map_err(io_err)?
            };
            let mut tree = parse_ieet(&text).map_err(|e| Failure::Validation(e.into()))?;
            if let Some(reference) = diff {
                let want = load_tree(&reference)?;
                if tree.structurally_eq(&want) {
                    println!("identical");
                    return Ok(());
                }
                return Err(invalid(format!("tree differs from {}", reference.display())));
            }
            if let Some(id) = id {
                tree.id = id;
            }
            if let Some(k) = kind {
                tree.kind = k;
            }
            if let Some(d) = department {
                tree.department = d;
            }
            emit(output.as_deref(), &pretty(&tree))
        }
        Cmd::Stats { kb_dir, json } => {
            let summaries = load_summaries(&kb_dir).map_err(io_err)?;
            let table = stats(&summaries).map_err(|e| Failure::Validation(e.into()))?;
            if json {
                emit(None, &pretty(&table))
            } else {
                emit(None, &table.render())
            }
        }
        Cmd::GenSynthetic { seed, count, output, jitter, params } => {
            let mut base: GenParams = match params {
                Some(p) => read_json(&p).map_err(|f| match f {
                    Failure::Io(e) => Failure::Config(e),
                    other => other,
                })?,
                None => GenParams::default(),
            };
            if let Some(j) = jitter {
                base.jitter = j;
            }
            base.validate().map_err(|e| Failure::Config(e.into()))?;
            fs::create_dir_all(&output).with_context(|| format!("creating {}", output.display())).map_err(io_err)?;
            generate(&base, seed, count, &output)
        }
        Cmd::Index { kb_dir, output } => {
            let kb = Kb::load_dir(&kb_dir).map_err(io_err)?;
            emit(output.as_deref(), &pretty(kb.index()))
        }
        Cmd::Consult { kb_dir, tree, judge, config, complaint, turn_limit } => {
            let kb = Kb::load_dir(&kb_dir).map_err(io_err)?;
            let stdin = io::stdin();
            let opts = consult::Options { tree, judge, config, complaint, turn_limit };
            consult::run(&kb, &opts, &mut stdin.lock(), &mut io::stdout())
        }
        Cmd::Serve { config } => {
            let cfg = ServiceConfig::load(&config).map_err(|e| Failure::Config(e.into()))?;
            let rt = tokio::runtime::Runtime::new().context("starting runtime").map_err(io_err)?;
            rt.block_on(meddm_service::serve(&cfg)).map_err(|e| match e {
                meddm_service::StartupError::Config(c) => Failure::Config(c.into()),
                other => io_err(other),
            })
        }
    }
}

fn generate(base: &GenParams, seed: u64, count: u64, dir: &Path) -> Res {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(count.max(1) as usize);
    let results: Vec<Res> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers as u64)
            .map(|w| {
                s.spawn(move || -> Res {
                    let mut i = w;
                    while i < count {
                        let p = GenParams { seed: seed + i, ..base.clone() };
                        let (det, truth) = gen_case(&p).map_err(|e| Failure::Config(e.into()))?;
                        let stem = format!("case-{:06}", p.seed);
                        emit(Some(&dir.join(format!("{stem}.detection.json"))), &pretty(&det))?;
                        emit(Some(&dir.join(format!("{stem}.truth.json"))), &pretty(&truth))?;
                        i += workers as u64;
                    }
                    Ok(())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("generator thread panicked")).collect()
    });
    results.into_iter().collect::<Res<Vec<()>>>()?;
    eprintln!("wrote {count} case(s) to {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Validation(e) | Failure::Io(e) | Failure::Config(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
