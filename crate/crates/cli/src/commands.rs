use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use vdecor::bench::{default_learners, run_benchmark, BenchmarkConfig};
use vdecor::dataset::{format_f64, QuerySet, SpatialDataset};
use vdecor::kernel::Family;
use vdecor::learners::{FitReport, LearnerSpec};
use vdecor::simgen::{generate_scenario, SimulationConfig, Truth};
use vdecor::tune::{
    cross_validate, default_ranges, final_fit, final_fit_best, CellResult, CvOptions, CvResult, Pipeline, TuningGrid,
    DEFAULT_NUGGETS, DEFAULT_RANGE_COUNT,
};
use vdecor::vecchia::{compute_factors, DEFAULT_NEIGHBORS};

use crate::config::{require, RunConfig};
use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn open_read(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| io_err(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

/// `path`, or standard output when absent.
fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    Ok(dir)
}

fn write_json<T: Serialize>(mut w: impl Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::Io(e.to_string()))
}

fn read_training(cfg: &RunConfig) -> Result<SpatialDataset, CliError> {
    let path = require(&cfg.train, "--train")?;
    SpatialDataset::read_csv(open_read(&path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn family(cfg: &RunConfig) -> Family {
    cfg.kernel.unwrap_or(Family::Exponential)
}

/// Grid over every model setting not pinned by a single value.
fn grid(cfg: &RunConfig, train: &SpatialDataset) -> TuningGrid {
    TuningGrid {
        family: family(cfg),
        nuggets: cfg
            .nugget
            .map(|v| vec![v])
            .or_else(|| cfg.nuggets.clone())
            .unwrap_or_else(|| DEFAULT_NUGGETS.to_vec()),
        ranges: cfg
            .range
            .map(|v| vec![v])
            .or_else(|| cfg.ranges.clone())
            .unwrap_or_else(|| default_ranges(&train.locations, DEFAULT_RANGE_COUNT)),
        learners: cfg
            .learner
            .map(|l| vec![l])
            .or_else(|| cfg.learners.clone())
            .unwrap_or_else(default_learners),
    }
}

fn cv_options(cfg: &RunConfig) -> CvOptions {
    let d = CvOptions::default();
    CvOptions {
        folds: cfg.folds.unwrap_or(d.folds),
        seed: cfg.seed.unwrap_or(d.seed),
        neighbors: cfg.neighbors.unwrap_or(DEFAULT_NEIGHBORS),
        split: cfg.split.unwrap_or(d.split),
    }
}

#[derive(Serialize)]
struct SimulationSidecar<'a> {
    config: &'a RunConfig,
    simulation: &'a SimulationConfig,
    truth: &'a Truth,
    train_rows: &'a [usize],
    test_rows: &'a [usize],
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let mut sim_cfg = cfg.simulation.clone().unwrap_or_default();
    sim_cfg.scenario = require(&cfg.scenario, "--scenario")?;
    if let Some(n) = cfg.n {
        sim_cfg.n = n;
    }
    if let Some(seed) = cfg.seed {
        sim_cfg.seed = seed;
    }
    sim_cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let sim = generate_scenario(&sim_cfg)?;
    let dir = out_dir(cfg)?;
    sim.train_set().write_csv(create(&dir.join("train.csv"))?)?;
    sim.test_set().write_csv(create(&dir.join("test.csv"))?)?;
    write_json(
        create(&dir.join("simulation.json"))?,
        &SimulationSidecar {
            config: cfg,
            simulation: &sim.config,
            truth: &sim.truth,
            train_rows: &sim.train,
            test_rows: &sim.test,
        },
    )?;
    log::info!("wrote {} training and {} test rows to {}", sim.train.len(), sim.test.len(), dir.display());
    Ok(())
}

#[derive(Serialize)]
struct FitOutput<'a> {
    config: &'a RunConfig,
    nugget: f64,
    range: f64,
    learner: LearnerSpec,
    report: &'a FitReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    cv: Option<&'a CvResult>,
}

pub fn fit(cfg: &RunConfig) -> Result<(), CliError> {
    let train = read_training(cfg)?;
    let neighbors = cfg.neighbors.unwrap_or(DEFAULT_NEIGHBORS);
    let (pipeline, report, cv) = match (cfg.nugget, cfg.range, cfg.learner) {
        (Some(nugget), Some(range), Some(learner)) => {
            let model = vdecor::kernel::CorrelationModel {
                family: family(cfg),
                range,
                nugget,
            }
            .validated()
            .map_err(|e| CliError::Usage(e.to_string()))?;
            let (p, r) = final_fit(&train, &model, neighbors, &learner)?;
            (p, r, None)
        }
        _ => {
            let grid = grid(cfg, &train);
            let cv = cross_validate(&train, &grid, &cv_options(cfg))?;
            let (p, r) = final_fit_best(&train, &grid, &cv, neighbors)?;
            (p, r, Some(cv))
        }
    };
    let dir = out_dir(cfg)?;
    let mut w = create(&dir.join("pipeline.json"))?;
    pipeline.write_json(&mut w)?;
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    write_json(
        create(&dir.join("fit_report.json"))?,
        &FitOutput {
            config: cfg,
            nugget: pipeline.model.nugget,
            range: pipeline.model.range,
            learner: pipeline.learner_spec,
            report: &report,
            cv: cv.as_ref(),
        },
    )
}

pub fn predict(cfg: &RunConfig) -> Result<(), CliError> {
    let path = require(&cfg.pipeline, "--pipeline")?;
    let pipeline = Pipeline::read_json(std::io::BufReader::new(open_read(&path)?))?;
    let qpath = require(&cfg.query, "--query")?;
    let query = QuerySet::read_csv(open_read(&qpath)?).map_err(|e| CliError::Usage(format!("{}: {e}", qpath.display())))?;
    let pred = pipeline.predict(&query)?;
    let mut w = csv::Writer::from_writer(output(cfg.out.as_ref())?);
    let csv_err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(["y"]).map_err(csv_err)?;
    for p in pred {
        w.write_record([format_f64(p)]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Serialize)]
struct TuneOutput<'a> {
    config: &'a RunConfig,
    grid: &'a TuningGrid,
    best: &'a CellResult,
    cv: &'a CvResult,
}

pub fn tune(cfg: &RunConfig) -> Result<(), CliError> {
    let train = read_training(cfg)?;
    let grid = grid(cfg, &train);
    grid.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let cv = cross_validate(&train, &grid, &cv_options(cfg))?;
    write_json(
        output(cfg.out.as_ref())?,
        &TuneOutput {
            config: cfg,
            grid: &grid,
            best: cv.best_cell(),
            cv: &cv,
        },
    )
}

#[derive(Serialize)]
struct BenchmarkOutput<'a> {
    config: &'a RunConfig,
    report: &'a vdecor::bench::BenchmarkReport,
}

pub fn benchmark(cfg: &RunConfig) -> Result<(), CliError> {
    let d = BenchmarkConfig::default();
    let bench = BenchmarkConfig {
        scenario: require(&cfg.scenario, "--scenario")?,
        replicates: cfg.replicates.unwrap_or(d.replicates),
        n: cfg.n.unwrap_or(d.n),
        seed: cfg.seed.unwrap_or(d.seed),
        neighbors: cfg.neighbors.unwrap_or(d.neighbors),
        folds: cfg.folds.unwrap_or(d.folds),
        family: family(cfg),
        nuggets: cfg.nuggets.clone().unwrap_or(d.nuggets),
        ranges: cfg.range.map(|r| vec![r]).or_else(|| cfg.ranges.clone()),
        learners: cfg.learner.map(|l| vec![l]).or_else(|| cfg.learners.clone()).unwrap_or(d.learners),
    };
    bench.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let report = run_benchmark(&bench)?;
    for l in &report.learners {
        log::info!(
            "{}: spatial {:.4} non-spatial {:.4} wins {}/{}",
            l.family,
            l.spatial_mean_rmse,
            l.non_spatial_mean_rmse,
            l.spatial_wins,
            report.replicates
        );
    }
    write_json(output(cfg.out.as_ref())?, &BenchmarkOutput { config: cfg, report: &report })
}

pub fn transform(cfg: &RunConfig) -> Result<(), CliError> {
    let train = read_training(cfg)?;
    let model = vdecor::kernel::CorrelationModel {
        family: family(cfg),
        range: require(&cfg.range, "--range")?,
        nugget: require(&cfg.nugget, "--nugget")?,
    }
    .validated()
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let factors = compute_factors(&train.locations, &model, cfg.neighbors.unwrap_or(DEFAULT_NEIGHBORS))?;
    let (y, x) = factors.transform(&train.response, train.design().view())?.into_input_order();

    let mut w = csv::Writer::from_writer(output(cfg.out.as_ref())?);
    let csv_err = |e: csv::Error| CliError::Io(e.to_string());
    let d = train.locations.dim();
    let mut header: Vec<String> = (1..=d).map(|i| format!("loc_{i}")).collect();
    header.extend((0..x.ncols()).map(|j| format!("x_{j}")));
    header.push("y".into());
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..train.len() {
        let mut rec: Vec<String> = train.locations.point(i).iter().map(|&v| format_f64(v)).collect();
        rec.extend(x.row(i).iter().map(|&v| format_f64(v)));
        rec.push(format_f64(y[i]));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}
