use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use rewire_core::curvature::{curvature_bounds_check, curvature_on_diffusion, curvature_report};
use rewire_core::gnn::{
    build_model, experiment_synthetic, synthetic_dataset, train_on_dataset, Dataset, ExperimentConfig, ModelKind,
    ModelSpec, TrainConfig,
};
use rewire_core::graph::{gen_er, gen_named, gen_sbm};
use rewire_core::io::{format_edge_list, load_checkpoint, load_tu_dataset, parse_edge_list, save_checkpoint, Checkpoint, Report};
use rewire_core::rewiring::{train_ct_embedder, train_gap_layer, CtTrainConfig, GapMode, GapTrainConfig};
use rewire_core::sparsify::{greedy_sparsify, sample_sparsify, spectral_similarity_report};
use rewire_core::spectral::{
    bounds_report, cheeger_exact, cheeger_sweep, fiedler_exact, resistance_bound_check, resistance_matrix, spectral_cte,
    CHEEGER_EXACT_MAX_N,
};
use rewire_core::{Error, Graph, Matrix, Result};

/// Commute-time and spectral-gap rewiring, sparsification and curvature.
#[derive(Parser)]
#[command(name = "rewire", version)]
struct Cli {
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random choice a command makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph as an edge list.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Spectral (or learned) commute-time embedding and resistances.
    Embed {
        /// Edge-list file, `-` for stdin.
        graph: String,
        /// Use a trained CT layer instead of the exact embedding.
        #[arg(long)]
        learned: Option<PathBuf>,
    },
    /// Resistance bounds and Cheeger diagnostics.
    Bounds {
        graph: String,
        /// Exponent of the degree-dependent resistance bound, in (0, 1/2].
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
    },
    /// Apply a trained rewiring layer to a graph.
    Rewire {
        layer: LayerKind,
        graph: String,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        mode: Option<GapMode>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Effective-resistance sparsification.
    Sparsify {
        graph: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = Method::Greedy)]
        method: Method,
        /// Random probe vectors in the similarity report.
        #[arg(long, default_value_t = 16)]
        probes: usize,
    },
    /// Resistance curvature of nodes and edges.
    Curvature {
        graph: String,
        /// Diffusion matrix (JSON matrix, or a `rewire` report) replacing R.
        #[arg(long)]
        diffusion: Option<PathBuf>,
    },
    /// Train a rewiring layer or a graph classifier.
    Train(TrainArgs),
    /// Synthetic comparison of the model kinds.
    Experiment {
        #[command(subcommand)]
        which: ExperimentKind,
    },
}

#[derive(Subcommand)]
enum GenKind {
    Er {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
    },
    Sbm {
        #[arg(long)]
        n1: usize,
        #[arg(long)]
        n2: usize,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
    },
    /// One of K3, P2, P3, C4, barbell6.
    Named { name: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum LayerKind {
    Ct,
    Gap,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Greedy,
    Sample,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainTarget {
    Ct,
    Gap,
    Gnn,
}

#[derive(Args)]
struct TrainArgs {
    target: TrainTarget,
    /// TU dataset directory, or `er:COUNT:N:P`, `sbm:COUNT:N1:N2:P:Q`,
    /// `synthetic-sbm[:COUNT]`, `synthetic-er[:COUNT]`.
    #[arg(long)]
    data: String,
    /// JSON (inline or a file) merged over the default configuration.
    #[arg(long)]
    config: Option<String>,
    /// Model kind for `gnn`.
    #[arg(long, default_value = "baseline")]
    model: ModelKind,
    /// Where to write the trained parameters.
    #[arg(long)]
    ckpt: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExperimentKind {
    Synthetic {
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 200)]
        graphs: usize,
        #[arg(long, default_value_t = 60)]
        epochs: usize,
    },
}

fn read_input(path: &str) -> Result<String> {
    if path == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| Error::Domain(format!("cannot read {path}: {e}")))
    }
}

fn read_graph(path: &str) -> Result<Graph> {
    parse_edge_list(&read_input(path)?)
}

/// Recursively overlays `patch` onto `base`.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn with_overrides<T: Serialize + for<'de> Deserialize<'de>>(default: T, config: Option<&str>) -> Result<T> {
    let Some(text) = config else { return Ok(default) };
    let text = if text.trim_start().starts_with('{') {
        text.to_string()
    } else {
        read_input(text)?
    };
    let mut base = serde_json::to_value(default)?;
    merge(&mut base, serde_json::from_str(&text)?);
    serde_json::from_value(base).map_err(|e| Error::Domain(format!("invalid config: {e}")))
}

fn field<T: std::str::FromStr>(parts: &[&str], i: usize, spec: &str) -> Result<T> {
    parts
        .get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Domain(format!("invalid data spec '{spec}'")))
}

fn load_data(spec: &str, seed: u64) -> Result<Vec<Graph>> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts[0] {
        "er" if parts.len() == 4 => {
            let (count, n, p): (u64, usize, f64) = (field(&parts, 1, spec)?, field(&parts, 2, spec)?, field(&parts, 3, spec)?);
            (0..count).map(|i| gen_er(n, p, seed.wrapping_mul(1_000_003).wrapping_add(i))).collect()
        }
        "sbm" if parts.len() == 6 => {
            let count: u64 = field(&parts, 1, spec)?;
            let sizes = (field(&parts, 2, spec)?, field(&parts, 3, spec)?);
            let (p, q) = (field(&parts, 4, spec)?, field(&parts, 5, spec)?);
            (0..count)
                .map(|i| Ok(gen_sbm(sizes, p, q, seed.wrapping_mul(1_000_003).wrapping_add(i))?.graph))
                .collect()
        }
        "synthetic-sbm" | "synthetic-er" if parts.len() <= 2 => {
            let mut cfg = ExperimentConfig::default();
            if parts.len() == 2 {
                cfg.graphs_per_dataset = field(&parts, 1, spec)?;
            }
            let d = if parts[0] == "synthetic-sbm" { Dataset::Sbm } else { Dataset::Er };
            synthetic_dataset(d, &cfg, seed)
        }
        _ if Path::new(spec).is_dir() => Ok(load_tu_dataset(spec)?.graphs),
        _ => Err(Error::Domain(format!(
            "invalid data spec '{spec}' (not a directory, er:COUNT:N:P, sbm:COUNT:N1:N2:P:Q or synthetic-sbm|er[:COUNT])"
        ))),
    }
}

#[derive(Serialize, Deserialize)]
struct GnnConfig {
    hidden_dim: usize,
    k_pool: usize,
    train: TrainConfig,
}

fn lambda2(g: &Graph) -> Option<f64> {
    g.is_connected().then(|| fiedler_exact(g, false).map(|(l, _)| l).ok()).flatten()
}

fn read_diffusion(path: &Path) -> Result<Matrix> {
    let v: Value = serde_json::from_str(&read_input(&path.to_string_lossy())?)?;
    let m = match v.get("results") {
        Some(r) => {
            let layer = r.get("layer").unwrap_or(r);
            layer
                .get("t_ct")
                .or_else(|| layer.get("t_gap"))
                .cloned()
                .ok_or_else(|| Error::Domain("report holds no t_ct or t_gap matrix".into()))?
        }
        None => v,
    };
    let m: Matrix = serde_json::from_value(m).map_err(|e| Error::Domain(format!("invalid diffusion matrix: {e}")))?;
    if m.data().len() != m.rows() * m.cols() {
        return Err(Error::Domain("diffusion matrix data does not match its shape".into()));
    }
    Ok(m)
}

enum Output {
    Text(String),
    Json(Report),
}

fn run(command: Command, seed: u64) -> Result<Output> {
    let report = match command {
        Command::Gen { kind } => {
            let g = match kind {
                GenKind::Er { n, p } => gen_er(n, p, seed)?,
                GenKind::Sbm { n1, n2, p, q } => gen_sbm((n1, n2), p, q, seed)?.graph,
                GenKind::Named { name } => gen_named(&name)?,
            };
            return Ok(Output::Text(format_edge_list(&g)));
        }
        Command::Embed { graph, learned } => {
            let g = read_graph(&graph)?;
            let r = resistance_matrix(&g)?;
            match learned {
                None => {
                    let cte = spectral_cte(&g)?;
                    Report::new(
                        "embed",
                        Some(seed),
                        json!({"graph": graph, "method": "spectral"}),
                        json!({"z": cte.node_rows(), "volume": cte.volume, "resistance": r.r}),
                    )?
                }
                Some(path) => {
                    let ct = load_checkpoint(&path)?.to_ct()?;
                    let out = ct.forward(&g)?;
                    Report::new(
                        "embed",
                        Some(seed),
                        json!({"graph": graph, "method": "learned", "ckpt": path}),
                        json!({"z": out.z, "t_ct": out.t_ct, "loss_ct": out.loss_ct, "resistance": r.r}),
                    )?
                }
            }
        }
        Command::Bounds { graph, eps } => {
            let g = read_graph(&graph)?;
            let bounds = bounds_report(&g)?;
            let cheeger = if g.n() <= CHEEGER_EXACT_MAX_N {
                let (h, set) = cheeger_exact(&g)?;
                json!({"value": h, "method": "exact", "set": set})
            } else {
                json!({"value": cheeger_sweep(&g)?, "method": "sweep"})
            };
            let resistance = resistance_bound_check(&g, eps)?;
            Report::new(
                "bounds",
                Some(seed),
                json!({"graph": graph, "eps": eps}),
                json!({"bounds": bounds, "cheeger": cheeger, "resistance_bound": resistance}),
            )?
        }
        Command::Rewire { layer, graph, ckpt, mode, mu, alpha } => {
            let g = read_graph(&graph)?;
            let ckpt_data = load_checkpoint(&ckpt)?;
            let before = lambda2(&g);
            match layer {
                LayerKind::Ct => {
                    if mode.is_some() || mu.is_some() || alpha.is_some() {
                        return Err(Error::Domain("--mode, --mu and --alpha apply to the gap layer only".into()));
                    }
                    let out = ckpt_data.to_ct()?.forward(&g)?;
                    let after = lambda2(&g.reweighted(out.t_ct.clone())?);
                    Report::new(
                        "rewire",
                        Some(seed),
                        json!({"layer": "ct", "graph": graph, "ckpt": ckpt}),
                        json!({"layer": out, "lambda2_before": before, "lambda2_after": after}),
                    )?
                }
                LayerKind::Gap => {
                    let mut gap = ckpt_data.to_gap()?;
                    if let Some(m) = mode {
                        gap.layer.cfg.mode = m;
                    }
                    if let Some(m) = mu {
                        gap.layer.cfg.mu = m;
                    }
                    if let Some(a) = alpha {
                        gap.layer.cfg.alpha = a;
                    }
                    gap.layer.cfg.validate()?;
                    let out = gap.forward(&g)?;
                    let after = lambda2(&g.reweighted(out.t_gap.clone())?);
                    Report::new(
                        "rewire",
                        Some(seed),
                        json!({"layer": "gap", "graph": graph, "ckpt": ckpt, "gap": gap.layer.cfg}),
                        json!({"layer": out, "lambda2_before": before, "lambda2_after": after}),
                    )?
                }
            }
        }
        Command::Sparsify { graph, eps, method, probes } => {
            let g = read_graph(&graph)?;
            let result = match method {
                Method::Greedy => greedy_sparsify(&g, eps)?,
                Method::Sample => sample_sparsify(&g, eps, seed)?,
            };
            let similarity = spectral_similarity_report(&g, &result.subgraph, probes, eps, seed)?;
            Report::new(
                "sparsify",
                Some(seed),
                json!({"graph": graph, "eps": eps, "method": method, "probes": probes}),
                json!({"sparsifier": result, "similarity": similarity}),
            )?
        }
        Command::Curvature { graph, diffusion } => {
            let g = read_graph(&graph)?;
            match diffusion {
                None => {
                    let report = curvature_report(&g)?;
                    let bounds = if g.is_unweighted() { Some(curvature_bounds_check(&g, &report)?) } else { None };
                    Report::new(
                        "curvature",
                        Some(seed),
                        json!({"graph": graph, "source": "resistance"}),
                        json!({"curvature": report, "bounds": bounds}),
                    )?
                }
                Some(path) => {
                    let t = read_diffusion(&path)?;
                    let report = curvature_on_diffusion(&g, &t)?;
                    Report::new(
                        "curvature",
                        Some(seed),
                        json!({"graph": graph, "source": "diffusion", "diffusion": path}),
                        json!({"curvature": report}),
                    )?
                }
            }
        }
        Command::Train(args) => train(args, seed)?,
        Command::Experiment {
            which: ExperimentKind::Synthetic { seeds, graphs, epochs },
        } => {
            let mut cfg = ExperimentConfig {
                graphs_per_dataset: graphs,
                ..ExperimentConfig::default()
            };
            cfg.train.epochs = epochs;
            let table = experiment_synthetic(&seeds, &cfg)?;
            eprint!("{table}");
            Report::new("experiment synthetic", None, &cfg, json!({"seeds": seeds, "rows": table.rows}))?
        }
    };
    Ok(Output::Json(report))
}

fn train(args: TrainArgs, seed: u64) -> Result<Report> {
    let graphs = load_data(&args.data, seed)?;
    let config = args.config.as_deref();
    let (ckpt, config, results) = match args.target {
        TrainTarget::Ct => {
            let mut cfg = with_overrides(CtTrainConfig::default(), config)?;
            cfg.fit.seed = seed;
            let t = train_ct_embedder(&graphs, &cfg)?;
            (Checkpoint::from_ct(&t)?, serde_json::to_value(cfg)?, json!({"loss_trace": t.loss_trace}))
        }
        TrainTarget::Gap => {
            let mut cfg = with_overrides(GapTrainConfig::default(), config)?;
            cfg.fit.seed = seed;
            let t = train_gap_layer(&graphs, &cfg)?;
            (Checkpoint::from_gap(&t)?, serde_json::to_value(cfg)?, json!({"loss_trace": t.loss_trace}))
        }
        TrainTarget::Gnn => {
            let defaults = GnnConfig {
                hidden_dim: 32,
                k_pool: 8,
                train: TrainConfig::default(),
            };
            let mut cfg = with_overrides(defaults, config)?;
            cfg.train.seed = seed;
            let attribute_dim = graphs.first().and_then(|g| g.features()).map_or(1, Matrix::cols);
            let classes = graphs.iter().filter_map(Graph::label).max().map_or(2, |m| (m + 1).max(2));
            let spec = ModelSpec {
                hidden_dim: cfg.hidden_dim,
                k_pool: cfg.k_pool,
                ..ModelSpec::new(args.model, attribute_dim, classes)
            };
            let mut model = build_model(spec, seed)?;
            let metrics = train_on_dataset(&mut model, &graphs, &cfg.train)?;
            let config = json!({"model": spec, "train": cfg.train});
            (Checkpoint::from_model(&model)?, config, serde_json::to_value(metrics)?)
        }
    };
    if let Some(path) = &args.ckpt {
        save_checkpoint(&ckpt, path)?;
    }
    let target = match args.target {
        TrainTarget::Ct => "ct",
        TrainTarget::Gap => "gap",
        TrainTarget::Gnn => "gnn",
    };
    Report::new(
        "train",
        Some(seed),
        json!({"target": target, "data": args.data, "graphs": graphs.len(), "config": config, "ckpt": args.ckpt}),
        results,
    )
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(cli.command, cli.seed).and_then(|output| {
        let text = match output {
            Output::Text(t) => t,
            Output::Json(r) => r.to_json()?,
        };
        emit(&text, cli.out.as_deref())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
