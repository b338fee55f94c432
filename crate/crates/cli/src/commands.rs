use std::fs;
use std::path::{Path, PathBuf};

use nst_core::baselines::GeometryKind;
use nst_core::graph::{
    dag_to_poset, diameter, doubling_constant_estimate, generate_random_dag, generate_tree,
    hasse_reduction, is_dag, poset_width, separation, shortest_paths, GraphError, SyntheticMetric,
    UndirectedView, WeightedDigraph, MAX_DOUBLING_POINTS,
};
use nst_core::training::{
    all_pair_targets, edge_targets, evaluate_targets, loss_curve_csv, train as fit, BatchMode,
    EmbeddingReport, Model, TargetMode, TrainConfig, TrainOutcome,
};
use serde::Serialize;

use crate::failure::Failure;
use crate::{EvaluateArgs, GenerateArgs, GraphInput, InspectArgs, ReproTable1Args, ReproTreeArgs, TrainArgs, TrainFlags};

#[derive(Serialize)]
struct Generator {
    kind: &'static str,
    nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    edge_prob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metric: Option<SyntheticMetric>,
    #[serde(skip_serializing_if = "Option::is_none")]
    branching: Option<usize>,
    seed: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'static str,
    version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    generator: Option<Generator>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<&'a TrainConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    targets: Option<TargetMode>,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl<'a> Manifest<'a> {
    fn new(command: &'static str) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            generator: None,
            config: None,
            targets: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

/// Writes files into `dir` and remembers their names for the manifest.
struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    fn create(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Failure::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, mut manifest: Manifest) -> Result<(), Failure> {
        manifest.outputs = std::mem::take(&mut self.written);
        manifest.outputs.push("manifest.json".into());
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        self.write("manifest.json", &(text + "\n"))
    }
}

fn load_dag(input: &GraphInput) -> Result<WeightedDigraph, Failure> {
    let graph = WeightedDigraph::load(&input.edges, input.features.as_deref())?;
    if !is_dag(&graph) {
        return Err(GraphError::CyclicInput.into());
    }
    Ok(graph)
}

fn input_names(input: &GraphInput) -> Vec<String> {
    let mut v = vec![input.edges.display().to_string()];
    v.extend(input.features.iter().map(|p| p.display().to_string()));
    v
}

fn resolve(flags: &TrainFlags, base: TrainConfig) -> Result<TrainConfig, Failure> {
    let mut cfg = match &flags.config {
        Some(path) => serde_json::from_str(&read(path)?)
            .map_err(|e| Failure::Malformed(format!("{}: {e}", path.display())))?,
        None => base,
    };
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = flags.$field {
                cfg.$field = v;
            }
        )*};
    }
    set!(space_dim, time_dim, geometry, epochs, lr, clip, seed, causality, epsilon, targets);
    if let Some(size) = flags.batch {
        cfg.batch = BatchMode::Pairs(size);
    }
    cfg.deterministic |= flags.deterministic;
    cfg.validate()?;
    Ok(cfg)
}

fn targets_for(graph: &WeightedDigraph, mode: TargetMode) -> Result<Vec<(usize, usize, f64)>, Failure> {
    Ok(match mode {
        TargetMode::Edges => edge_targets(graph),
        TargetMode::AllPairs => all_pair_targets(graph)?,
    })
}

fn summary(r: &EmbeddingReport) -> String {
    let show = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    format!(
        "{}: avg distortion {}, std {}, max {}, directionality {}, mse {:.6}",
        r.geometry,
        show(r.avg_distortion),
        show(r.std_distortion),
        show(r.max_distortion),
        show(r.directionality),
        r.final_distance_loss
    )
}

fn write_run(out: &mut OutDir, prefix: &str, run: &TrainOutcome) -> Result<(), Failure> {
    out.write(&format!("{prefix}report.json"), &(run.report.to_json() + "\n"))?;
    out.write(&format!("{prefix}loss.csv"), &loss_curve_csv(&run.curve))?;
    out.write(&format!("{prefix}checkpoint.json"), &run.model.to_json())
}

pub fn generate(a: &GenerateArgs) -> Result<(), Failure> {
    let (graph, generator) = if a.tree {
        let tree = generate_tree(a.branching, a.nodes, a.seed)?;
        let g = Generator {
            kind: "tree",
            nodes: a.nodes,
            edge_prob: None,
            metric: None,
            branching: Some(a.branching),
            seed: a.seed,
        };
        (tree.graph, g)
    } else {
        let dag = generate_random_dag(a.nodes, a.edge_prob, a.metric, a.seed)?;
        let g = Generator {
            kind: "random-dag",
            nodes: a.nodes,
            edge_prob: Some(a.edge_prob),
            metric: Some(a.metric),
            branching: None,
            seed: a.seed,
        };
        (dag.graph, g)
    };
    let mut out = OutDir::create(&a.out)?;
    out.write("edges.tsv", &graph.edge_list_tsv())?;
    out.write("features.csv", &graph.features_csv())?;
    println!("{} nodes, {} edges -> {}", graph.node_count(), graph.edge_count(), a.out.display());
    let mut m = Manifest::new("generate");
    m.generator = Some(generator);
    out.finish(m)
}

pub fn train(a: &TrainArgs) -> Result<(), Failure> {
    let graph = load_dag(&a.input)?;
    let cfg = resolve(&a.flags, TrainConfig::default())?;
    let run = fit(&graph, &cfg)?;
    let mut out = OutDir::create(&a.out)?;
    write_run(&mut out, "", &run)?;
    println!("{}", summary(&run.report));
    let mut m = Manifest::new("train");
    m.config = Some(&cfg);
    m.inputs = input_names(&a.input);
    out.finish(m)
}

pub fn evaluate(a: &EvaluateArgs) -> Result<(), Failure> {
    let model = Model::from_json(&read(&a.checkpoint)?)?;
    let graph = load_dag(&a.input)?;
    let targets = targets_for(&graph, a.targets)?;
    let report = evaluate_targets(&model, &graph, &targets)?;
    let mut out = OutDir::create(&a.out)?;
    out.write("report.json", &(report.to_json() + "\n"))?;
    println!("{}", summary(&report));
    let mut m = Manifest::new("evaluate");
    m.targets = Some(a.targets);
    m.inputs = input_names(&a.input);
    m.inputs.push(a.checkpoint.display().to_string());
    out.finish(m)
}

pub fn inspect(a: &InspectArgs) -> Result<(), Failure> {
    let graph = load_dag(&a.input)?;
    let poset = dag_to_poset(&graph)?;
    let width = poset_width(&poset);
    let k = graph.node_count();
    println!("nodes: {k}");
    println!("edges: {}", graph.edge_count());
    println!("width: {width}");
    println!("hasse_edges: {}", hasse_reduction(&poset).len());
    let distances = shortest_paths(&UndirectedView::from_digraph(&graph))?;
    match distances.to_metric() {
        Ok(metric) if k >= 2 => {
            println!("diameter: {}", diameter(&metric));
            println!("separation: {}", separation(&metric));
            if k <= MAX_DOUBLING_POINTS {
                println!("doubling: {}", doubling_constant_estimate(&metric)?);
            } else {
                println!("doubling: skipped (more than {MAX_DOUBLING_POINTS} nodes)");
            }
        }
        Ok(_) => {
            println!("diameter: 0");
            println!("separation: n/a");
            println!("doubling: 1");
        }
        Err(_) => {
            println!("diameter: disconnected");
            println!("separation: disconnected");
            println!("doubling: disconnected");
        }
    }
    println!("suggested_time_dim: {width}");
    Ok(())
}

pub fn repro_table1(a: &ReproTable1Args) -> Result<(), Failure> {
    let cfg = resolve(&a.flags, TrainConfig::new(10, 10))?;
    let dag = generate_random_dag(a.nodes, a.edge_prob, a.metric, cfg.seed)?;
    let run = fit(&dag.graph, &cfg)?;
    let mut out = OutDir::create(&a.out)?;
    out.write("edges.tsv", &dag.graph.edge_list_tsv())?;
    out.write("features.csv", &dag.graph.features_csv())?;
    write_run(&mut out, "", &run)?;
    println!("{}", summary(&run.report));
    let mut m = Manifest::new("repro-table1");
    m.generator = Some(Generator {
        kind: "random-dag",
        nodes: a.nodes,
        edge_prob: Some(a.edge_prob),
        metric: Some(a.metric),
        branching: None,
        seed: cfg.seed,
    });
    m.config = Some(&cfg);
    out.finish(m)
}

#[derive(Serialize)]
struct TreeRow {
    geometry: GeometryKind,
    avg_distortion: Option<f64>,
    std_distortion: Option<f64>,
    max_distortion: Option<f64>,
    mse: f64,
}

pub fn repro_tree(a: &ReproTreeArgs) -> Result<(), Failure> {
    let base = TrainConfig {
        epochs: 250,
        lr: 3e-3,
        clip: 1.0,
        batch: BatchMode::Pairs(10_000),
        targets: TargetMode::AllPairs,
        ..TrainConfig::new(2, 0)
    };
    let cfg = resolve(&a.flags, base)?;
    let geometries = match a.flags.geometry {
        Some(g) => vec![g],
        None => vec![GeometryKind::Nst, GeometryKind::Euclidean, GeometryKind::SnowflakeV1],
    };
    let tree = generate_tree(a.branching, a.nodes, cfg.seed)?;
    let mut out = OutDir::create(&a.out)?;
    out.write("edges.tsv", &tree.graph.edge_list_tsv())?;
    out.write("features.csv", &tree.graph.features_csv())?;
    let mut rows = Vec::new();
    for geometry in geometries {
        let run = fit(&tree.graph, &TrainConfig { geometry, ..cfg.clone() })?;
        write_run(&mut out, &format!("{geometry}-"), &run)?;
        println!("{}", summary(&run.report));
        let r = &run.report;
        rows.push(TreeRow {
            geometry,
            avg_distortion: r.avg_distortion,
            std_distortion: r.std_distortion,
            max_distortion: r.max_distortion,
            mse: r.final_distance_loss,
        });
    }
    out.write("summary.json", &(serde_json::to_string_pretty(&rows).expect("rows serialise") + "\n"))?;
    let mut m = Manifest::new("repro-tree");
    m.generator = Some(Generator {
        kind: "tree",
        nodes: a.nodes,
        edge_prob: None,
        metric: None,
        branching: Some(a.branching),
        seed: cfg.seed,
    });
    m.config = Some(&cfg);
    out.finish(m)
}
