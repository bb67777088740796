use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use ndarray::Array2;
use sdmscr::analysis::{
    linear_probe, orthogonality_comparison, spectral_report, subspace_ablation,
    variance_reduction_experiment,
};
use sdmscr::decoupler::{
    decouple_graph, read_records, write_records, ChatBackend, DecoupleOptions, HttpBackendConfig,
    HttpChatBackend, MockBackend, TaskInstruction,
};
use sdmscr::embedding::{embed_views, load_matrix_f64, save_matrix_f64, ViewTriple};
use sdmscr::encoder::{load_checkpoint, save_checkpoint, CheckpointMeta, Encoder};
use sdmscr::graph::{load_graph, save_graph, TextAttributedGraph};
use sdmscr::lexicon::default_lexicon;
use sdmscr::report::{emit_report, read_metrics, Metrics, METRICS_CSV, METRICS_JSON};
use sdmscr::synthetic::{generate_sbm, plant_views};
use sdmscr::trainer::{train, TrainConfig};
use serde::Serialize;
use serde_json::Value;

use crate::config::{BackendKind, RunConfig};
use crate::{Cli, Command, DecoupleArgs, EmbedArgs, EvalArgs, GenArgs, Suite, TrainArgs};

const GRAPH: &str = "graph.json";
const LEXICON: &str = "lexicon.json";
const DECOUPLE: &str = "decouple.jsonl";
const CHECKPOINT: &str = "checkpoint";
const MANIFEST: &str = "manifest.json";
const VIEW_FILES: [&str; 3] = ["views_ori.emb1", "views_rel.emb1", "views_irr.emb1"];
const PLANTED_FILES: [(&str, &str); 4] = [
    ("signal", "planted_signal.emb1"),
    ("noise", "planted_noise.emb1"),
    ("residual", "planted_residual.emb1"),
    ("leak", "planted_leak.emb1"),
];

#[derive(Debug, Serialize)]
struct RunManifest {
    command: &'static str,
    version: &'static str,
    seed: u64,
    config: RunConfig,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    duration_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    requests_issued: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cache_hits: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    degraded: Option<usize>,
}

struct Run {
    out: PathBuf,
    config: RunConfig,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    stats: Option<(usize, usize, usize)>,
}

impl Run {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn input(&mut self, name: &str) -> Result<PathBuf> {
        let p = self.path(name);
        ensure!(p.exists(), "missing input {}", p.display());
        self.inputs.push(p.clone());
        Ok(p)
    }

    fn output(&mut self, name: &str) -> PathBuf {
        let p = self.path(name);
        self.outputs.push(p.clone());
        p
    }

    fn finish(self, command: &'static str, started: Instant) -> Result<()> {
        let (requests_issued, cache_hits, degraded) = match self.stats {
            Some((r, c, d)) => (Some(r), Some(c), Some(d)),
            None => (None, None, None),
        };
        let manifest = RunManifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.config.seed,
            config: self.config,
            inputs: self.inputs,
            outputs: self.outputs,
            duration_secs: started.elapsed().as_secs_f64(),
            requests_issued,
            cache_hits,
            degraded,
        };
        let path = self.out.join(MANIFEST);
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let started = Instant::now();
    let mut config = RunConfig::load(cli.config.as_deref())?;
    config.apply_seed(cli.seed);
    fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating output directory {}", cli.out.display()))?;
    let mut run = Run {
        out: cli.out,
        config,
        inputs: Vec::new(),
        outputs: Vec::new(),
        stats: None,
    };
    let name = match cli.command {
        Command::Gen(a) => {
            gen(&mut run, a)?;
            "gen"
        }
        Command::Decouple(a) => {
            decouple(&mut run, a)?;
            "decouple"
        }
        Command::Embed(a) => {
            embed(&mut run, a)?;
            "embed"
        }
        Command::Train(a) => {
            train_cmd(&mut run, a)?;
            "train"
        }
        Command::Eval(a) => {
            eval(&mut run, a)?;
            "eval"
        }
    };
    run.finish(name, started)
}

fn gen(run: &mut Run, a: GenArgs) -> Result<()> {
    let sbm = &mut run.config.sbm;
    sbm.num_classes = a.classes.unwrap_or(sbm.num_classes);
    sbm.per_class = a.per_class.unwrap_or(sbm.per_class);
    sbm.p_intra = a.p.unwrap_or(sbm.p_intra);
    sbm.q_inter = a.q.unwrap_or(sbm.q_inter);
    sbm.heterophily |= a.heterophily;
    let plant = &mut run.config.plant;
    plant.dim = a.dim.unwrap_or(plant.dim);
    plant.sigma_noise = a.sigma_noise.unwrap_or(plant.sigma_noise);
    plant.sigma_residual = a.sigma_residual.unwrap_or(plant.sigma_residual);
    plant.sigma_leak = a.sigma_leak.unwrap_or(plant.sigma_leak);
    plant.sigma_jitter = a.sigma_jitter.unwrap_or(plant.sigma_jitter);

    let g = generate_sbm(&run.config.sbm)?;
    let (planted, views) = plant_views(&g, &run.config.plant)?;
    save_graph(&g, run.output(GRAPH))?;
    write_views(run, &views)?;
    for ((_, file), m) in PLANTED_FILES
        .iter()
        .zip([&planted.signal, &planted.noise, &planted.residual, &planted.leak])
    {
        save_matrix_f64(m, run.output(file))?;
    }
    let lexicon = default_lexicon(run.config.sbm.num_classes);
    fs::write(run.output(LEXICON), serde_json::to_string_pretty(&lexicon)? + "\n")?;
    println!(
        "generated {} nodes, {} edges",
        g.num_nodes(),
        g.num_edges()
    );
    Ok(())
}

fn read_lexicon(path: &Path) -> Result<Vec<String>> {
    let raw = fs::read_to_string(path).with_context(|| format!("reading lexicon {}", path.display()))?;
    let value: Value = serde_json::from_str(&raw).with_context(|| format!("parsing lexicon {}", path.display()))?;
    let mut words = Vec::new();
    let Value::Array(items) = value else {
        bail!("lexicon {} must be a JSON array", path.display());
    };
    for item in items {
        match item {
            Value::String(s) => words.push(s),
            Value::Array(inner) => {
                for w in inner {
                    match w {
                        Value::String(s) => words.push(s),
                        other => bail!("lexicon entries must be strings, got {other}"),
                    }
                }
            }
            other => bail!("lexicon entries must be strings, got {other}"),
        }
    }
    Ok(words)
}

fn decouple(run: &mut Run, a: DecoupleArgs) -> Result<()> {
    let cfg = &mut run.config.decouple;
    cfg.backend = a.backend.unwrap_or(cfg.backend);
    cfg.concurrency = a.concurrency.unwrap_or(cfg.concurrency);
    if let Some(t) = a.task {
        cfg.task = t;
    }
    if a.lexicon.is_some() {
        cfg.lexicon = a.lexicon;
    }
    let cfg = cfg.clone();

    // configuration problems surface before any file is touched
    let backend: Box<dyn ChatBackend> = match cfg.backend {
        BackendKind::Llm => Box::new(HttpChatBackend::new(HttpBackendConfig::from_env()?)),
        BackendKind::Mock => {
            let path = match &cfg.lexicon {
                Some(p) => p.clone(),
                None => run.path(LEXICON),
            };
            ensure!(path.exists(), "mock backend needs a lexicon; {} not found", path.display());
            run.inputs.push(path.clone());
            Box::new(MockBackend::new(read_lexicon(&path)?)?)
        }
    };
    let instr = TaskInstruction::new(cfg.task.clone())?;
    let g = load_graph(run.input(GRAPH)?)?;
    let cache = run.output(DECOUPLE);
    if !a.resume && cache.exists() {
        fs::remove_file(&cache)?;
    }
    let opts = DecoupleOptions {
        concurrency: cfg.concurrency,
        ..Default::default()
    };
    let outcome = decouple_graph(&g, &instr, backend.as_ref(), Some(&cache), &opts)?;
    write_records(&cache, &outcome.records)?;
    run.stats = Some((outcome.requests_issued, outcome.cache_hits, outcome.degraded));
    println!(
        "{} requests issued, {} cache hits, {} degraded",
        outcome.requests_issued, outcome.cache_hits, outcome.degraded
    );
    Ok(())
}

fn embed(run: &mut Run, a: EmbedArgs) -> Result<()> {
    run.config.embed.dim = a.dim.unwrap_or(run.config.embed.dim);
    let g = load_graph(run.input(GRAPH)?)?;
    let records = read_records(&run.input(DECOUPLE)?)?;
    let views = embed_views(&records, g.num_nodes(), run.config.embed.dim)?;
    write_views(run, &views)?;
    Ok(())
}

fn write_views(run: &mut Run, views: &ViewTriple) -> Result<()> {
    for (file, m) in VIEW_FILES.iter().zip([&views.ori, &views.rel, &views.irr]) {
        save_matrix_f64(m, run.output(file))?;
    }
    Ok(())
}

fn read_views(run: &mut Run, g: &TextAttributedGraph) -> Result<ViewTriple> {
    let mut mats = Vec::with_capacity(3);
    for file in VIEW_FILES {
        mats.push(load_matrix_f64(run.input(file)?)?);
    }
    let irr = mats.pop().expect("three views");
    let rel = mats.pop().expect("three views");
    let ori = mats.pop().expect("three views");
    let views = ViewTriple::new(ori, rel, irr)?;
    ensure!(
        views.num_nodes() == g.num_nodes(),
        "views have {} rows but the graph has {} nodes",
        views.num_nodes(),
        g.num_nodes()
    );
    Ok(views)
}

fn train_cmd(run: &mut Run, a: TrainArgs) -> Result<()> {
    let t = &mut run.config.train;
    t.lambda = a.lambda.unwrap_or(t.lambda);
    t.tau = a.tau.unwrap_or(t.tau);
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.learning_rate = a.lr.unwrap_or(t.learning_rate);
    t.weight_decay = a.weight_decay.unwrap_or(t.weight_decay);
    t.hidden_dim = a.hidden.unwrap_or(t.hidden_dim);
    t.output_dim = a.output_dim.unwrap_or(t.output_dim);
    t.identity_encoder |= a.identity_encoder;
    let cfg = run.config.train.clone();

    let g = load_graph(run.input(GRAPH)?)?;
    let views = read_views(run, &g)?;
    let outcome = train(&g, &views, &cfg)?;
    let meta = CheckpointMeta {
        d: views.dim(),
        h: cfg.hidden_dim,
        o: cfg.output_dim,
        seed: cfg.seed,
        epoch: cfg.epochs,
        identity: cfg.identity_encoder,
        config: serde_json::to_value(&cfg)?,
    };
    save_checkpoint(&run.out, CHECKPOINT, &outcome.encoder, &meta)?;
    if !cfg.identity_encoder {
        run.output(&format!("{CHECKPOINT}.w1.emb1"));
        run.output(&format!("{CHECKPOINT}.w2.emb1"));
    }
    run.output(&format!("{CHECKPOINT}.json"));

    let metrics = Metrics {
        loss_history: outcome.history,
        ..Default::default()
    };
    emit_report(&metrics, &run.out)?;
    run.output(METRICS_JSON);
    run.output(METRICS_CSV);
    if let (Some(first), Some(last)) = (metrics.loss_history.first(), metrics.loss_history.last()) {
        println!(
            "lambda {} tau {} seed {}: loss {:.6} -> {:.6}",
            cfg.lambda, cfg.tau, cfg.seed, first.l_total, last.l_total
        );
    }
    Ok(())
}

fn selected(suites: &[Suite], s: Suite) -> bool {
    suites.contains(&Suite::All) || suites.contains(&s)
}

fn eval(run: &mut Run, a: EvalArgs) -> Result<()> {
    let var = &mut run.config.variance;
    var.trials = a.trials.unwrap_or(var.trials);
    var.sigma = a.sigma.unwrap_or(var.sigma);
    let probe = &mut run.config.probe;
    probe.repeats = a.repeats.unwrap_or(probe.repeats);
    probe.train_frac = a.train_frac.unwrap_or(probe.train_frac);

    let g = load_graph(run.input(GRAPH)?)?;
    let views = read_views(run, &g)?;
    let (encoder, train_cfg) = if a.identity_encoder {
        let cfg = TrainConfig {
            identity_encoder: true,
            ..run.config.train.clone()
        };
        (Encoder::Identity, cfg)
    } else {
        let sidecar = run.input(&format!("{CHECKPOINT}.json"))?;
        let (encoder, meta) = load_checkpoint(&run.out, CHECKPOINT)
            .with_context(|| format!("loading checkpoint {}", sidecar.display()))?;
        let cfg: TrainConfig = serde_json::from_value(meta.config)
            .context("checkpoint sidecar carries an invalid training config")?;
        (encoder, cfg)
    };

    // only the loss history survives from an earlier train run
    let previous = run.path(METRICS_JSON);
    let loss_history = if previous.exists() {
        read_metrics(&previous)
            .map(|m| m.loss_history)
            .unwrap_or_default()
    } else {
        Vec::new()
    };
    let mut metrics = Metrics {
        loss_history,
        ..Default::default()
    };

    let adj = g.normalized_adjacency();
    let encoded = [
        encoder.encode(&adj, &views.ori)?,
        encoder.encode(&adj, &views.rel)?,
        encoder.encode(&adj, &views.irr)?,
    ];
    let labels = g.labels();
    let probe = run.config.probe.clone();

    if selected(&a.suite, Suite::Probe) {
        metrics
            .probe
            .insert("encoded_ori".into(), linear_probe(&encoded[0], labels, &probe)?);
        metrics
            .probe
            .insert("encoded_rel".into(), linear_probe(&encoded[1], labels, &probe)?);
    }
    if selected(&a.suite, Suite::Ablation) {
        let ab = subspace_ablation(&views, labels, &probe)?;
        metrics.ablation.insert("ori".into(), ab.ori);
        metrics.ablation.insert("rel".into(), ab.rel);
        metrics.ablation.insert("irr".into(), ab.irr);
    }
    if selected(&a.suite, Suite::Spectral) {
        let mut planted: Vec<(String, Array2<f64>)> = Vec::new();
        for (name, file) in PLANTED_FILES {
            if run.path(file).exists() {
                planted.push((format!("planted_{name}"), load_matrix_f64(run.input(file)?)?));
            }
        }
        let mut signals: Vec<(&str, &Array2<f64>)> = vec![
            ("raw_ori", &views.ori),
            ("raw_rel", &views.rel),
            ("raw_irr", &views.irr),
            ("encoded_ori", &encoded[0]),
            ("encoded_rel", &encoded[1]),
            ("encoded_irr", &encoded[2]),
        ];
        signals.extend(planted.iter().map(|(n, m)| (n.as_str(), m)));
        metrics.spectral = Some(spectral_report(&g, &signals)?);
    }
    if selected(&a.suite, Suite::Variance) {
        let v = &run.config.variance;
        metrics.variance = variance_reduction_experiment(&g, v.sigma, v.trials, run.config.seed)?;
    }
    if selected(&a.suite, Suite::Orthogonality) {
        metrics.orthogonality = Some(orthogonality_comparison(
            &g,
            &views,
            &encoder,
            &train_cfg,
            &run.config.augment,
        )?);
    }

    emit_report(&metrics, &run.out)?;
    run.output(METRICS_JSON);
    run.output(METRICS_CSV);
    if let Some(p) = metrics.probe.get("encoded_ori") {
        println!("probe encoded_ori: {:.4} ± {:.4}", p.accuracy, p.std);
    }
    if let Some(p) = metrics.ablation.get("ori") {
        println!("probe raw ori: {:.4} ± {:.4}", p.accuracy, p.std);
    }
    Ok(())
}
