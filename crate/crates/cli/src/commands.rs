use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use netblock::admm::{self, AdmmConfig, Problem};
use netblock::baseline;
use netblock::cluster::{self, ClusterAssignment, ClusterOptions, Engine};
use netblock::experiment::{self, presets, ExperimentConfig};
use netblock::io::{self, IngestOptions, FORMAT_VERSION};
use netblock::model::{average_layers, MembershipMatrix, NetworkSample};
use netblock::multilayer::{self, FeatureLevel, LambdaChoice, LayerGrouping, MultiSettings, Scree};
use netblock::tuning::{CvKind, CvReport, CvSpec};
use netblock::{NetError, Result};

use crate::{
    BenchArgs, Clustering, Command, ConfigSource, CvArgs, CvOptions, EngineArg, EstimateArgs, MembershipArgs,
    MultiArgs, SampleArgs, ScreeArgs, ScreeSource, SimulateArgs,
};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Multi(a) => multi(a),
        Command::Cv(a) => cv(a),
        Command::Bench(a) => bench(a),
        Command::Scree(a) => scree(a),
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn usage(msg: impl Into<String>) -> NetError {
    NetError::InvalidParameter(msg.into())
}

fn make_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| NetError::Io { path: dir.to_path_buf(), source: e })
}

/// Writes `report` to `dir/name`, or to stdout without a directory.
fn emit<T: Serialize>(dir: Option<&Path>, name: &str, report: &T) -> Result<()> {
    match dir {
        Some(d) => {
            make_dir(d)?;
            io::write_json(&d.join(name), report)
        }
        None => {
            let text = io::to_json_string(report)?;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| NetError::Io { path: PathBuf::from("<stdout>"), source: e })
        }
    }
}

fn load_config(src: &ConfigSource) -> Result<ExperimentConfig> {
    let mut cfg = match (&src.config, &src.preset) {
        (Some(path), _) => io::read_json::<ExperimentConfig>(path)?,
        (None, Some(name)) => presets::by_name(name, src.full_scale).ok_or_else(|| {
            usage(format!("unknown preset `{name}`; known: {}", presets::NAMES.join(", ")))
        })?,
        (None, None) => return Err(usage("either --config or --preset is required")),
    };
    if let Some(seed) = src.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_sample(a: &SampleArgs) -> Result<NetworkSample> {
    let s = io::ingest_sample(&a.manifest, IngestOptions { no_self_loops: a.no_self_loops })?;
    if a.k == 0 || a.k > s.n() {
        return Err(usage(format!("--k {} outside [1, n = {}]", a.k, s.n())));
    }
    match a.rho {
        Some(rho) => NetworkSample::new(s.n(), s.layers().to_vec(), rho, s.group_labels().map(<[usize]>::to_vec)),
        None => Ok(s),
    }
}

fn engine(e: EngineArg) -> Engine {
    match e {
        EngineArg::Gmm => Engine::Gmm,
        EngineArg::Kmeans => Engine::Kmeans,
    }
}

fn bias_adjusted(sample: &NetworkSample, k: usize, seed: u64) -> Result<ClusterAssignment> {
    let defaults = MultiSettings::default();
    let opts = ClusterOptions {
        scaled: defaults.node_scaled,
        ..ClusterOptions::new(defaults.node_engine, seed)
    };
    cluster::bias_adjusted_spectral(sample, k, &opts)
}

fn membership(
    sample: &NetworkSample,
    k: usize,
    m: &MembershipArgs,
    seed: u64,
) -> Result<(MembershipMatrix, Option<ClusterAssignment>)> {
    if let Some(path) = &m.labels {
        let z = io::read_labels(path)?;
        if z.n() != sample.n() || z.k() != k {
            return Err(NetError::DimensionMismatch(format!(
                "labels describe n = {}, K = {}; sample has n = {} and --k {k}",
                z.n(),
                z.k(),
                sample.n()
            )));
        }
        return Ok((z, None));
    }
    let assignment = match m.clustering {
        Clustering::BiasAdjusted => bias_adjusted(sample, k, seed)?,
        Clustering::Gmm | Clustering::Kmeans => {
            let e = if m.clustering == Clustering::Gmm { Engine::Gmm } else { Engine::Kmeans };
            let avg = average_layers(sample, None)?;
            cluster::spectral_cluster_with(&avg, k, m.embed_dim.unwrap_or(k), &ClusterOptions::new(e, seed))?
        }
    };
    let z = assignment.membership()?;
    if let Some(c) = z.first_empty_community() {
        return Err(NetError::EmptyCommunity(c));
    }
    Ok((z, Some(assignment)))
}

fn cv_spec(o: &CvOptions, seed: u64) -> CvSpec {
    CvSpec {
        kind: match o.train_size {
            Some(train_size) => CvKind::Repeated { train_size },
            None => CvKind::Mfold { folds: o.folds },
        },
        grid_count: o.grid_count,
        floor_ratio: o.floor_ratio,
        seed,
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let cfg = load_config(&a.source)?;
    let sim = experiment::simulate(&cfg, cfg.seed)?;
    let manifest = io::write_sample(&a.out, &sim.sample)?;
    io::write_labels(&a.out.join("labels.txt"), &sim.membership)?;
    if sim.truth.len() == 1 {
        io::write_matrix_csv(&a.out.join("b_true.csv"), sim.truth[0].entries())?;
    } else {
        for (g, b) in sim.truth.iter().enumerate() {
            io::write_matrix_csv(&a.out.join(format!("b_true_group{}.csv", g + 1)), b.entries())?;
        }
    }
    io::write_json(&a.out.join("config.json"), &cfg)?;
    eprintln!("wrote {}", manifest.display());
    Ok(())
}

#[derive(Serialize)]
struct Averaging {
    b_hat: Vec<Vec<f64>>,
    d_hat: usize,
}

#[derive(Serialize)]
struct EstimateReport {
    format_version: u32,
    n: usize,
    k: usize,
    layers: usize,
    rho: f64,
    clustering: Option<ClusterAssignment>,
    lambda: f64,
    lambda_max: f64,
    d_hat: usize,
    b_hat: Vec<Vec<f64>>,
    b_unclipped: Vec<Vec<f64>>,
    converged: bool,
    iterations: usize,
    objective: f64,
    averaging: Averaging,
    cv: Option<CvReport>,
}

fn write_estimate_files(dir: Option<&Path>, z: &MembershipMatrix, b: &DMatrix<f64>) -> Result<()> {
    if let Some(d) = dir {
        make_dir(d)?;
        io::write_matrix_csv(&d.join("b_hat.csv"), b)?;
        io::write_labels(&d.join("labels.txt"), z)?;
    }
    Ok(())
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let sample = load_sample(&a.sample)?;
    let seed = a.sample.seed;
    let (z, clustering) = membership(&sample, a.sample.k, &a.membership, seed)?;
    let cfg = AdmmConfig::new(1.0);
    let rho = sample.rho();
    let avg = average_layers(&sample, None)?;
    let (solve, lambda_max, cv) = match a.lambda {
        Some(lambda) => {
            let c = cfg.with_lambda(lambda);
            c.validate()?;
            let lambda_max = Problem::from_membership(&avg, &z, c.scaling)?.lambda_max();
            (admm::admm_solve(&avg, &z, rho, &c)?, lambda_max, None)
        }
        None => {
            let run = cv_spec(&a.cv_options, seed).run(&sample, &z, &cfg)?;
            (run.refit, run.lambda_max, Some(run.report))
        }
    };
    let averaging = baseline::averaging_estimator(&avg, &z, rho)?;
    let report = EstimateReport {
        format_version: FORMAT_VERSION,
        n: sample.n(),
        k: z.k(),
        layers: sample.num_layers(),
        rho,
        clustering,
        lambda: solve.lambda_used,
        lambda_max,
        d_hat: solve.d_hat,
        b_hat: rows(solve.b_hat.entries()),
        b_unclipped: rows(&solve.b_unclipped),
        converged: solve.converged,
        iterations: solve.iterations,
        objective: solve.objective_value,
        averaging: Averaging { b_hat: rows(averaging.b_hat.entries()), d_hat: averaging.d_hat },
        cv,
    };
    let dir = a.sample.out.as_deref();
    write_estimate_files(dir, &z, solve.b_hat.entries())?;
    emit(dir, "report.json", &report)
}

#[derive(Serialize)]
struct GroupReport {
    layers: Vec<usize>,
    lambda: f64,
    lambda_max: f64,
    no_cv: bool,
    d_hat: usize,
    b_hat: Vec<Vec<f64>>,
    averaging: Averaging,
    cv: Option<CvReport>,
}

#[derive(Serialize)]
struct MultiReport {
    format_version: u32,
    n: usize,
    k: usize,
    layers: usize,
    rho: f64,
    membership: ClusterAssignment,
    grouping: LayerGrouping,
    scree: Option<Scree>,
    groups: Vec<GroupReport>,
    between_layer_error: Option<f64>,
}

fn multi(a: MultiArgs) -> Result<()> {
    let sample = load_sample(&a.sample)?;
    let seed = a.sample.seed;
    let settings = MultiSettings {
        lambda: match a.lambda {
            Some(l) => LambdaChoice::Fixed(l),
            None => LambdaChoice::CrossValidated(cv_spec(&a.cv_options, seed)),
        },
        layer_engine: engine(a.layer_engine),
        seed,
        ..MultiSettings::default()
    };
    let r = multilayer::multisbm_estimate(&sample, a.sample.k, a.l_tilde, &settings)?;
    let dir = a.sample.out.as_deref();
    if let Some(d) = dir {
        make_dir(d)?;
        io::write_labels(&d.join("labels.txt"), &r.membership.membership()?)?;
        for (g, est) in r.groups.iter().enumerate() {
            io::write_matrix_csv(&d.join(format!("group{}_b_hat.csv", g + 1)), est.solve.b_hat.entries())?;
        }
    }
    let report = MultiReport {
        format_version: FORMAT_VERSION,
        n: sample.n(),
        k: a.sample.k,
        layers: sample.num_layers(),
        rho: sample.rho(),
        groups: r
            .groups
            .iter()
            .map(|g| GroupReport {
                layers: g.layers.clone(),
                lambda: g.lambda,
                lambda_max: g.lambda_max,
                no_cv: g.no_cv,
                d_hat: g.solve.d_hat,
                b_hat: rows(g.solve.b_hat.entries()),
                averaging: Averaging { b_hat: rows(g.averaging.b_hat.entries()), d_hat: g.averaging.d_hat },
                cv: g.cv.clone(),
            })
            .collect(),
        membership: r.membership,
        grouping: r.grouping,
        scree: r.scree,
        between_layer_error: r.between_layer_error,
    };
    emit(dir, "report.json", &report)
}

#[derive(Serialize)]
struct CvOutput {
    format_version: u32,
    lambda_max: f64,
    report: CvReport,
    refit_d_hat: usize,
    refit_b_hat: Vec<Vec<f64>>,
}

fn cv(a: CvArgs) -> Result<()> {
    let sample = load_sample(&a.sample)?;
    let seed = a.sample.seed;
    let (z, _) = membership(&sample, a.sample.k, &a.membership, seed)?;
    let run = cv_spec(&a.cv_options, seed).run(&sample, &z, &AdmmConfig::new(1.0))?;
    let out = CvOutput {
        format_version: FORMAT_VERSION,
        lambda_max: run.lambda_max,
        refit_d_hat: run.refit.d_hat,
        refit_b_hat: rows(run.refit.b_hat.entries()),
        report: run.report,
    };
    emit(a.sample.out.as_deref(), "cv.json", &out)
}

fn parse_ranks(spec: &str, n: usize) -> Result<Vec<usize>> {
    if spec == "all" {
        return Ok((1..=n).collect());
    }
    spec.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| usage(format!("bad rank `{t}` in --sweep"))))
        .collect()
}

fn bench(a: BenchArgs) -> Result<()> {
    let mut cfg = load_config(&a.source)?;
    if let Some(r) = a.replicates {
        cfg.replicates = r;
    }
    let (dir, name) = match &a.out {
        Some(p) => (p.parent().map(Path::to_path_buf), p.file_name().map(|f| f.to_string_lossy().into_owned())),
        None => (None, None),
    };
    let target = |default: &str| name.clone().unwrap_or_else(|| default.to_string());
    let dir = dir.map(|d| if d.as_os_str().is_empty() { PathBuf::from(".") } else { d });
    match &a.sweep {
        Some(spec) => {
            let ranks = parse_ranks(spec, cfg.n)?;
            let curve = experiment::sweep_truncation(&cfg, &ranks)?;
            emit(dir.as_deref(), &target("sweep.json"), &curve)
        }
        None => {
            let report = experiment::run_experiment(&cfg)?;
            emit(dir.as_deref(), &target("bench.json"), &report)
        }
    }
}

#[derive(Serialize)]
struct ScreeReport {
    format_version: u32,
    source: &'static str,
    scree: Scree,
}

fn scree(a: ScreeArgs) -> Result<()> {
    let sample = load_sample(&a.sample)?;
    let seed = a.sample.seed;
    let z = || -> Result<MembershipMatrix> {
        match &a.labels {
            Some(p) => io::read_labels(p),
            None => bias_adjusted(&sample, a.sample.k, seed)?.membership(),
        }
    };
    let (label, m) = match a.source {
        ScreeSource::PerLayerA => ("per-layer-a", multilayer::layer_features(&sample, &z()?, sample.rho(), FeatureLevel::PerLayerA)?),
        ScreeSource::PerLayerB => ("per-layer-b", multilayer::layer_features(&sample, &z()?, sample.rho(), FeatureLevel::PerLayerB)?),
        ScreeSource::Averaging => {
            let avg = average_layers(&sample, None)?;
            ("averaging", baseline::averaging_estimator(&avg, &z()?, sample.rho())?.b_hat.into_entries())
        }
    };
    let cap = a.max_groups.min(m.nrows()).min(m.ncols());
    if cap == 0 {
        return Err(usage("--max-groups must be positive"));
    }
    let scree = multilayer::estimate_l_tilde(&m, cap)?;
    emit(
        a.sample.out.as_deref(),
        "scree.json",
        &ScreeReport { format_version: FORMAT_VERSION, source: label, scree },
    )
}
