use std::f64::consts::PI;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use ntk_core::angles::{gradient_angle, gradient_angle_linear};
use ntk_core::data::{
    gen_blobs, gen_gaussian, labels_as_classes, load_csv, load_matrix_csv, CsvOptions, SyntheticSpec,
};
use ntk_core::kernel::{gram, min_gradient_angle, ntk_deep, ntk_linear, KernelMatrix};
use ntk_core::linalg::symmetric_eig;
use ntk_core::mcnet::{
    binomial_sigma, empirical_angles, lemma2_expected, lemma3_expected, lemma4_expected, mean_empirical_ntk,
    pair_at_angle, validate_lemma1, validate_lemma2, validate_lemma3, validate_lemma4, DEFAULT_VALIDATION_WIDTH,
    EXPERIMENT_WIDTH,
};
use ntk_core::rng::replica_seed;
use ntk_core::train::{depth_convergence_sweep, Loss, Targets, TrainConfig};
use ntk_core::{Activation, DatasetMatrix, Matrix, NetworkConfig, Normalization};

use crate::args::{
    ActivationArg, AngleCurveArgs, Command, DataSource, DepthSweepArgs, EigArgs, GlobalArgs, LossArg,
    McValidateArgs, NormalizeArg, Suite, SweepKind, TrainSweepArgs,
};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

pub const ANGLE_CURVE_DEPTHS: [usize; 5] = [1, 2, 4, 8, 16];
pub const TRAIN_DEPTHS: [usize; 3] = [1, 4, 8];
pub const TRAIN_WIDTH: usize = 128;
pub const BLOB_SEPARATION: f64 = 2.0;
/// Lemma checks are evaluated at these input angles.
pub const LEMMA_ANGLES: [f64; 4] = [0.0, PI / 4.0, PI / 2.0, PI];
pub const NTK_RELATIVE_TOLERANCE: f64 = 0.03;
pub const ANGLE_TOLERANCE: f64 = 0.03;
pub const LEMMA_BAND: f64 = 0.05;

/// What a command produced; the first output anchors the manifest.
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub resolved: serde_json::Value,
    pub derived_seeds: Vec<u64>,
    pub passed: bool,
}

pub fn dispatch(command: &Command, global: &GlobalArgs) -> Result<Outcome> {
    match command {
        Command::AngleCurve(a) => angle_curve(global, a),
        Command::DepthSweep(a) => depth_sweep(global, a),
        Command::McValidate(a) => mc_validate(global, a),
        Command::TrainSweep(a) => train_sweep(global, a),
        Command::Eig(a) => eig(global, a),
        Command::Replay(_) => Err(CliError::Usage("replay cannot be nested".into())),
    }
}

fn normalization(global: &GlobalArgs) -> Normalization {
    match global.normalize {
        NormalizeArg::Raw => Normalization::Raw,
        NormalizeArg::Averaged => Normalization::Averaged,
    }
}

fn output_path(global: &GlobalArgs, default: &str) -> Result<PathBuf> {
    let path = global.output.clone().unwrap_or_else(|| PathBuf::from(default));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(path)
}

/// Shortest representation that parses back to the same `f64`.
fn num(v: f64) -> String {
    v.to_string()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(File::create(path)?);
    let io = |e: csv::Error| CliError::Failed(e.to_string());
    csv.write_record(header).map_err(io)?;
    for row in rows {
        csv.write_record(row).map_err(io)?;
    }
    csv.flush()?;
    Ok(())
}

struct LoadedData {
    data: DatasetMatrix,
    targets: Option<Targets>,
    description: serde_json::Value,
}

/// Resolves `--data` and the synthetic size flags.
fn load_data(global: &GlobalArgs, default: DataSource, default_n: usize, default_d: usize) -> Result<LoadedData> {
    let source = global.data.clone().unwrap_or(default);
    let n = global.n.unwrap_or(default_n);
    let d = global.d.unwrap_or(default_d);
    let (data, targets, description) = match &source {
        DataSource::Gaussian => {
            let mut spec = SyntheticSpec::gaussian(n, d, global.seed);
            if global.unit_norm {
                spec = spec.unit_norm();
            }
            (gen_gaussian(&spec)?, None, json!({ "source": "gaussian", "n": n, "d": d }))
        }
        DataSource::Blobs => {
            let classes = global.classes.unwrap_or(2);
            let separation = global.separation.unwrap_or(BLOB_SEPARATION);
            let mut spec = SyntheticSpec::blobs(n, d, classes, separation, global.seed);
            if global.unit_norm {
                spec = spec.unit_norm();
            }
            let (x, labels) = gen_blobs(&spec)?;
            let description = json!({
                "source": "blobs", "n": n, "d": d, "classes": classes, "separation": separation
            });
            (x, Some(Targets::Classes(labels)), description)
        }
        DataSource::Csv(path) => {
            let options = CsvOptions {
                has_labels: global.labels,
                has_header: global.header,
            };
            let (x, labels) = load_csv(path, options)?;
            let x = if global.unit_norm { x.unit_normalized() } else { x };
            let targets = labels.map(|l| match labels_as_classes(&l) {
                Ok(classes) => Targets::Classes(classes),
                Err(_) => Targets::Values(l),
            });
            let description = json!({ "source": source.to_string(), "n": x.n(), "d": x.d() });
            (x, targets, description)
        }
    };
    let mut description = description;
    description["unit_norm"] = json!(global.unit_norm);
    Ok(LoadedData {
        data,
        targets,
        description,
    })
}

fn angle_grid(args: &AngleCurveArgs) -> Result<Vec<f64>> {
    let (start, stop, step) = (args.theta_start, args.theta_stop, args.theta_step);
    let valid = [start, stop, step].iter().all(|v| v.is_finite())
        && step > 0.0
        && start >= 0.0
        && start <= stop
        && stop < 180.0;
    if !valid {
        return Err(CliError::Usage(format!(
            "angle grid must satisfy 0 <= start <= stop < 180 and step > 0, got {start}..{stop} step {step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

fn angle_curve(global: &GlobalArgs, args: &AngleCurveArgs) -> Result<Outcome> {
    let depths = global
        .depths
        .as_ref()
        .map_or(ANGLE_CURVE_DEPTHS.to_vec(), |d| d.0.clone());
    let grid = angle_grid(args)?;
    let output = output_path(global, "angle_curve.csv")?;

    let mut header = vec!["theta_in_deg".to_string()];
    header.extend(depths.iter().map(|l| format!("phi_deg_L{l}")));
    header.push("phi_deg_linear".into());

    let mut rows = Vec::with_capacity(grid.len());
    for &theta_deg in &grid {
        let theta = theta_deg.to_radians();
        let mut row = vec![num(theta_deg)];
        for &depth in &depths {
            let phi = gradient_angle(theta, depth)?.phi.expect("gradient angle is filled");
            row.push(num(phi.to_degrees()));
        }
        let linear = gradient_angle_linear(theta, depths.iter().copied().max().unwrap_or(0))?;
        // degree/radian conversions only round-trip to within an ulp, so an
        // unchanged angle keeps its exact input value
        let linear_deg = if linear == theta { theta_deg } else { linear.to_degrees() };
        row.push(num(linear_deg));
        rows.push(row);
    }
    write_table(&output, &header, &rows)?;
    Ok(Outcome {
        outputs: vec![output],
        resolved: json!({ "depths": depths, "theta_deg": grid }),
        derived_seeds: Vec::new(),
        passed: true,
    })
}

struct SweepRow {
    depth: usize,
    min_phi: f64,
    kappa_relu: f64,
    kappa_linear: f64,
}

fn depth_sweep(global: &GlobalArgs, args: &DepthSweepArgs) -> Result<Outcome> {
    let depths = global.depths.as_ref().map_or((0..=10).collect(), |d| d.0.clone());
    let loaded = load_data(global, DataSource::Gaussian, 200, 5)?;
    let data = &loaded.data;
    let norm = normalization(global);
    let width = global.width.unwrap_or(EXPERIMENT_WIDTH);
    let output = output_path(global, "depth_sweep.csv")?;
    let replicas = args.replicas;
    if args.kind == SweepKind::Empirical && replicas == 0 {
        return Err(CliError::Usage("--replicas must be at least 1".into()));
    }

    let rows: Vec<SweepRow> = depths
        .par_iter()
        .map(|&depth| -> Result<SweepRow> {
            let kappa = |k: KernelMatrix| k.condition_number();
            if depth == 0 {
                // no hidden layer: every kernel is the Gram matrix
                let k = kappa(gram(data))?;
                let min_phi = min_gradient_angle(data, 0, Activation::Identity)?;
                return Ok(SweepRow {
                    depth,
                    min_phi,
                    kappa_relu: k,
                    kappa_linear: k,
                });
            }
            match args.kind {
                SweepKind::Analytic => Ok(SweepRow {
                    depth,
                    min_phi: min_gradient_angle(data, depth, Activation::Relu)?,
                    kappa_relu: kappa(ntk_deep(data, depth, norm))?,
                    kappa_linear: kappa(ntk_linear(data, depth, norm))?,
                }),
                SweepKind::Empirical => {
                    let relu = NetworkConfig::new(depth, width, Activation::Relu, global.seed);
                    let linear = NetworkConfig::new(depth, width, Activation::Identity, global.seed);
                    let angles = empirical_angles(&relu, data, replicas)?;
                    Ok(SweepRow {
                        depth,
                        min_phi: angles.min_phi(),
                        kappa_relu: kappa(mean_empirical_ntk(&relu, data, replicas, norm)?)?,
                        kappa_linear: kappa(mean_empirical_ntk(&linear, data, replicas, norm)?)?,
                    })
                }
            }
        })
        .collect::<Result<_>>()?;

    let header = ["depth", "min_phi_deg", "kappa_relu", "kappa_linear"].map(String::from);
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.depth.to_string(),
                num(r.min_phi.to_degrees()),
                num(r.kappa_relu),
                num(r.kappa_linear),
            ]
        })
        .collect();
    write_table(&output, &header, &table)?;
    let derived_seeds = match args.kind {
        SweepKind::Analytic => Vec::new(),
        SweepKind::Empirical => (0..replicas as u64).map(|r| replica_seed(global.seed, r)).collect(),
    };
    Ok(Outcome {
        outputs: vec![output],
        resolved: json!({
            "depths": depths, "data": loaded.description, "kind": args.kind,
            "width": width, "replicas": replicas, "normalize": global.normalize,
        }),
        derived_seeds,
        passed: true,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: f64,
    pub observed: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: String, expected: f64, observed: f64, tolerance: f64) -> Self {
        Check {
            pass: (observed - expected).abs() <= tolerance,
            name,
            expected,
            observed,
            tolerance,
        }
    }
}

#[derive(Debug, Serialize)]
struct ValidationReport {
    suite: Suite,
    seed: u64,
    width: usize,
    replicas: usize,
    checks: Vec<Check>,
    passed: bool,
}

/// Three unit inputs with pairwise angles between 0.5 and 1.1 rad.
pub fn reference_triplet() -> DatasetMatrix {
    DatasetMatrix::from_rows(&[
        vec![1.0, 0.0, 0.0],
        vec![0.5f64.cos(), 0.5f64.sin(), 0.0],
        vec![1.0f64.cos(), 0.0, 1.0f64.sin()],
    ])
    .expect("non-zero rows")
}

fn lemma_checks(seed: u64, trials: usize) -> Result<(Vec<Check>, Vec<u64>)> {
    let mut seeds = (0u64..).map(|k| replica_seed(seed, k));
    let mut used = Vec::new();
    let mut next = || {
        let s = seeds.next().unwrap();
        used.push(s);
        s
    };
    let mut checks = Vec::new();

    let m = 10 * trials;
    let deviation = validate_lemma1(4, m, next())?;
    checks.push(Check::new(
        format!("lemma1 d=4 m={m} max|AtA/m - I|"),
        0.0,
        deviation,
        10.0 / (m as f64).sqrt(),
    ));
    for theta in LEMMA_ANGLES {
        let p = lemma2_expected(theta);
        let observed = validate_lemma2(theta, trials, next())?;
        checks.push(Check::new(
            format!("lemma2 theta={theta:.6} joint half-space probability"),
            p,
            observed,
            3.0 * binomial_sigma(p, trials),
        ));
    }
    for theta in LEMMA_ANGLES {
        checks.push(Check::new(
            format!("lemma3 theta={theta:.6} <u1,u2>"),
            lemma3_expected(theta),
            validate_lemma3(theta, trials, next())?,
            LEMMA_BAND,
        ));
    }
    for theta in LEMMA_ANGLES {
        let a = validate_lemma4(theta, 4, trials, next())?;
        let target = Matrix::identity(4).scaled(lemma4_expected(theta));
        checks.push(Check::new(
            format!("lemma4 theta={theta:.6} s=4 max|A1A2t - c I|"),
            0.0,
            a.max_abs_diff(&target),
            LEMMA_BAND,
        ));
    }
    Ok((checks, used))
}

fn max_relative_error(observed: &Matrix, expected: &Matrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..expected.rows() {
        for j in 0..expected.cols() {
            worst = worst.max((observed[(i, j)] - expected[(i, j)]).abs() / expected[(i, j)].abs());
        }
    }
    worst
}

fn mc_validate(global: &GlobalArgs, args: &McValidateArgs) -> Result<Outcome> {
    if args.replicas == 0 || args.trials == 0 {
        return Err(CliError::Usage("--replicas and --trials must be at least 1".into()));
    }
    let width = global.width.unwrap_or(DEFAULT_VALIDATION_WIDTH);
    let depths = global.depths.as_ref().map_or(vec![1, 3], |d| d.0.clone());
    let suite_name = match args.suite {
        Suite::Lemmas => "lemmas",
        Suite::Ntk => "ntk",
        Suite::Angles => "angles",
    };
    let output = output_path(global, &format!("mc_validate_{suite_name}.json"))?;
    let replica_seeds: Vec<u64> = (0..args.replicas as u64).map(|r| replica_seed(global.seed, r)).collect();
    let norm = normalization(global);

    let (checks, derived_seeds) = match args.suite {
        Suite::Lemmas => lemma_checks(global.seed, args.trials)?,
        Suite::Ntk => {
            let data = match global.data {
                Some(_) => load_data(global, DataSource::Gaussian, 3, 3)?.data,
                None => reference_triplet(),
            };
            let checks = depths
                .par_iter()
                .map(|&depth| -> Result<Check> {
                    let config = NetworkConfig::new(depth, width, Activation::Relu, global.seed);
                    let empirical = mean_empirical_ntk(&config, &data, args.replicas, norm)?;
                    let analytic = ntk_deep(&data, depth, norm);
                    Ok(Check::new(
                        format!("ntk L={depth} m={width} max relative entry error"),
                        0.0,
                        max_relative_error(&empirical.k, &analytic.k),
                        NTK_RELATIVE_TOLERANCE,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            (checks, replica_seeds)
        }
        Suite::Angles => {
            let activation = match args.activation {
                ActivationArg::Relu => Activation::Relu,
                ActivationArg::Identity => Activation::Identity,
            };
            let mut cases = Vec::new();
            for (k, theta) in [0.2, 0.5, 1.0].into_iter().enumerate() {
                for &depth in &depths {
                    cases.push((theta, depth, replica_seed(global.seed, 1000 + k as u64)));
                }
            }
            let mut checks = cases
                .par_iter()
                .map(|&(theta, depth, data_seed)| -> Result<Check> {
                    let data = pair_at_angle(theta, 5, data_seed)?;
                    let config = NetworkConfig::new(depth, width, activation, global.seed);
                    let observed = empirical_angles(&config, &data, args.replicas)?.phi[(0, 1)];
                    let expected = match activation {
                        Activation::Relu => gradient_angle(theta, depth)?.phi.expect("filled"),
                        Activation::Identity => theta,
                    };
                    Ok(Check::new(
                        format!("phi {} theta={theta} L={depth} m={width}", args.activation.name()),
                        expected,
                        observed,
                        ANGLE_TOLERANCE,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let duplicated = DatasetMatrix::from_rows(&[vec![0.3, -1.0, 2.0], vec![0.3, -1.0, 2.0]])?;
            let config = NetworkConfig::new(depths[0], width.min(256), activation, global.seed);
            checks.push(Check::new(
                "phi duplicated inputs".into(),
                0.0,
                empirical_angles(&config, &duplicated, 1)?.phi[(0, 1)],
                0.0,
            ));
            (checks, replica_seeds)
        }
    };

    let passed = checks.iter().all(|c| c.pass);
    let report = ValidationReport {
        suite: args.suite,
        seed: global.seed,
        width,
        replicas: args.replicas,
        checks,
        passed,
    };
    write_json(&output, &report)?;
    Ok(Outcome {
        outputs: vec![output],
        resolved: json!({ "width": width, "depths": depths, "normalize": global.normalize }),
        derived_seeds,
        passed,
    })
}

#[derive(Debug, Serialize)]
struct DepthSummary {
    depth: usize,
    learning_rate: f64,
    epochs_to_threshold: Option<usize>,
    kappa_at_init: f64,
    initial_loss: f64,
    final_loss: f64,
    diverged: bool,
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    threshold_fraction: f64,
    depths: Vec<DepthSummary>,
    /// Depths from fastest to slowest convergence; unconverged runs last.
    order_by_epochs_to_threshold: Vec<usize>,
    any_diverged: bool,
}

fn train_sweep(global: &GlobalArgs, args: &TrainSweepArgs) -> Result<Outcome> {
    let depths = global.depths.as_ref().map_or(TRAIN_DEPTHS.to_vec(), |d| d.0.clone());
    let loaded = load_data(global, DataSource::Blobs, 500, 5)?;
    let targets = loaded
        .targets
        .ok_or_else(|| CliError::Usage("train-sweep needs labelled data (blobs or csv with --labels)".into()))?;
    let loss = match args.loss {
        LossArg::CrossEntropy => Loss::CrossEntropy,
        LossArg::Square => Loss::Square,
    };
    if args.rates.0.is_empty() {
        return Err(CliError::Usage("--rates is empty".into()));
    }
    let width = global.width.unwrap_or(TRAIN_WIDTH);
    let output = output_path(global, "train_sweep.csv")?;
    let summary_path = output.with_extension("summary.json");

    let mut template = TrainConfig::new(
        NetworkConfig::new(depths[0], width, Activation::Relu, global.seed),
        loss,
        args.batch_size,
        0.0,
        args.epochs,
    );
    template.threshold_fraction = args.threshold;
    let sweep = depth_convergence_sweep(&depths, &loaded.data, &targets, &template, &args.rates.0)
        .map_err(|e| match e {
            ntk_core::Error::AllRatesDiverged => CliError::Failed(e.to_string()),
            other => other.into(),
        })?;

    let mut header = vec!["epoch".to_string()];
    header.extend(sweep.records.iter().map(|r| format!("loss_L{}", r.depth)));
    let rows: Vec<Vec<String>> = (0..=args.epochs)
        .map(|t| {
            let mut row = vec![t.to_string()];
            row.extend(
                sweep
                    .records
                    .iter()
                    .map(|r| r.losses.get(t).map_or(String::new(), |&l| num(l))),
            );
            row
        })
        .collect();
    write_table(&output, &header, &rows)?;

    let summary = TrainSummary {
        threshold_fraction: args.threshold,
        depths: sweep
            .records
            .iter()
            .map(|r| DepthSummary {
                depth: r.depth,
                learning_rate: r.learning_rate,
                epochs_to_threshold: r.epochs_to_threshold,
                kappa_at_init: r.kappa_at_init,
                initial_loss: r.losses[0],
                final_loss: r.final_loss(),
                diverged: r.diverged,
            })
            .collect(),
        order_by_epochs_to_threshold: sweep.order.clone(),
        any_diverged: sweep.records.iter().any(|r| r.diverged),
    };
    write_json(&summary_path, &summary)?;
    Ok(Outcome {
        outputs: vec![output, summary_path],
        resolved: json!({
            "depths": depths, "data": loaded.description, "width": width,
            "loss": args.loss, "grid_search_epochs": ntk_core::train::GRID_SEARCH_EPOCHS,
        }),
        derived_seeds: Vec::new(),
        passed: true,
    })
}

fn eig(global: &GlobalArgs, args: &EigArgs) -> Result<Outcome> {
    let matrix = load_matrix_csv(&args.input, global.header)?;
    let report = symmetric_eig(&matrix)?;
    let output = output_path(global, "eig.json")?;
    write_json(&output, &report)?;
    Ok(Outcome {
        outputs: vec![output],
        resolved: json!({ "n": matrix.rows() }),
        derived_seeds: Vec::new(),
        passed: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_inclusive() {
        let args = AngleCurveArgs {
            theta_start: 0.0,
            theta_stop: 175.0,
            theta_step: 5.0,
        };
        let grid = angle_grid(&args).unwrap();
        assert_eq!(grid.len(), 36);
        assert_eq!(grid[35], 175.0);
    }

    #[test]
    fn bad_grids_rejected() {
        for (start, stop, step) in [(0.0, 180.0, 5.0), (-5.0, 10.0, 5.0), (0.0, 10.0, 0.0), (20.0, 10.0, 1.0)] {
            let args = AngleCurveArgs {
                theta_start: start,
                theta_stop: stop,
                theta_step: step,
            };
            assert!(angle_grid(&args).is_err());
        }
    }

    #[test]
    fn triplet_angles() {
        let t = reference_triplet();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert!((0.5..=1.1).contains(&t.angle(i, j)));
        }
    }

    #[test]
    fn relative_error_is_entrywise() {
        let a = Matrix::new(1, 2, vec![1.0, 2.0]).unwrap();
        let b = Matrix::new(1, 2, vec![1.1, 2.0]).unwrap();
        assert!((max_relative_error(&b, &a) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn lemma_suite_passes_at_defaults() {
        let (checks, seeds) = lemma_checks(0, 100_000).unwrap();
        assert_eq!(checks.len(), 13);
        assert_eq!(seeds.len(), 13);
        for c in &checks {
            assert!(c.pass, "{c:?}");
        }
    }
}
