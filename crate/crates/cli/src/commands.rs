//! The five subcommands: two trainers, an evaluator, the partition/cost
//! planner, and the Gauss-Newton self-check.
//!
//! Trainers print the run history as CSV (`iter,elapsed_sec,f,metric`) to
//! stdout; with `--out DIR` the same bytes land in `DIR/metrics.csv` and the
//! final model in `DIR/model.ckpt`. In-process runs zero the elapsed column
//! so identical configurations reproduce identical files; multi-process runs
//! keep wall-clock seconds.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ndarray::Axis;

use gridnewton_core::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointHeader};
use gridnewton_core::data::{apply_scaling, fit_scaling, LabelMap};
use gridnewton_core::net::{objective_ref, Batch, NetConfig};
use gridnewton_core::partition::{
    balance_report, build_partitions, cost_estimate, CostModelParams, SplitStructure,
};
use gridnewton_core::rng::Rng;
use gridnewton_core::sgd::sgd_train;
use gridnewton_dist::check::gn_check;
use gridnewton_dist::context::MetricKind;
use gridnewton_dist::newton::eval_metric;
use gridnewton_dist::plan::extract_theta_slice;
use gridnewton_dist::runner::{
    build_worker_data, coordinator_index, default_timeout, gather_theta, newton_train,
    run_workers, TestSet, TrainSetup, TransportMode,
};

use crate::config::{MetricName, Overrides, RunConfig, TransportName};
use crate::dataio::{initial_theta, load_one, load_run_data};
use crate::mesh;
use crate::report::{rows_from_records, write_csv, CsvRow};

/// Trains with the distributed Newton method.
pub fn cmd_train_newton(over: &Overrides) -> Result<()> {
    let mut cfg = RunConfig::load(&over.config)?;
    cfg.apply(over);
    cfg.validate()?;
    let net = cfg.net()?;
    let split = cfg.split();
    let data = load_run_data(&cfg, &net)?;
    let hyper = cfg.newton_for(data.train.len());
    let theta0 = initial_theta(&cfg, &net);

    let (rows, theta, lambda) = match cfg.transport {
        TransportName::Inproc => {
            let setup = TrainSetup {
                net: &net,
                split: &split,
                train: &data.train,
                test: data.test.as_ref(),
                metric: cfg.metric.kind(),
                hyper: &hyper,
                theta0: &theta0,
                seed: cfg.seed,
                max_iter: cfg.max_iter,
                mode: TransportMode::InProc,
                timeout: default_timeout(),
            };
            let outputs = newton_train(&setup)?;
            let parts = build_partitions(&net, &split)?;
            let coord = coordinator_index(&parts, net.depth());
            let rows = rows_from_records(&outputs[coord].records, true);
            let lambda = outputs[coord]
                .records
                .last()
                .map_or(hyper.lambda1, |r| r.lambda_after);
            let theta = gather_theta(&net, &split, &outputs)?;
            (rows, theta, lambda)
        }
        TransportName::Tcp => {
            let (report, theta) = mesh::run_tcp_training(&cfg)?;
            let rows: Vec<CsvRow> = report.iter().map(|r| r.row).collect();
            let lambda = report.last().map_or(hyper.lambda1, |r| r.lambda);
            (rows, theta, lambda)
        }
    };

    let iteration = rows.last().map_or(0, |r| r.iter);
    finish_training(&net, &data.map, &rows, theta, iteration, lambda, over.out.as_deref())
}

/// Trains with momentum SGD as the baseline; always a single process.
pub fn cmd_train_sgd(over: &Overrides) -> Result<()> {
    let mut cfg = RunConfig::load(&over.config)?;
    cfg.apply(over);
    cfg.validate()?;
    if cfg.transport == TransportName::Tcp {
        bail!("the stochastic trainer runs in one process; use --transport inproc");
    }
    let net = cfg.net()?;
    let split = cfg.split();
    let data = load_run_data(&cfg, &net)?;
    let hyper = cfg.sgd_for(data.train.len());
    let theta0 = initial_theta(&cfg, &net);

    let metric_of = |theta: &[f64]| -> Result<Option<f64>> {
        match &data.test {
            Some(test) => dist_metric(
                &net,
                &split,
                &data.train,
                test,
                cfg.metric.kind(),
                theta,
                cfg.newton.chunks,
            ),
            None => Ok(None),
        }
    };

    let mut rows = vec![CsvRow {
        iter: 0,
        elapsed_sec: 0.0,
        f: objective_ref(&net, &theta0, &data.train, hyper.c_reg),
        metric: metric_of(&theta0)?,
    }];
    let mut epoch_err: Option<anyhow::Error> = None;
    let outcome = sgd_train(
        &net,
        &data.train,
        &hyper,
        cfg.seed,
        cfg.max_iter,
        theta0,
        |epoch, _validation_obj, theta| {
            if epoch_err.is_some() {
                return;
            }
            let f = objective_ref(&net, theta, &data.train, hyper.c_reg);
            match metric_of(theta) {
                Ok(metric) => rows.push(CsvRow { iter: epoch, elapsed_sec: 0.0, f, metric }),
                Err(e) => epoch_err = Some(e),
            }
        },
    )?;
    if let Some(e) = epoch_err {
        return Err(e);
    }

    finish_training(
        &net,
        &data.map,
        &rows,
        outcome.theta,
        outcome.epochs,
        0.0,
        over.out.as_deref(),
    )
}

/// Prints the CSV history and, under `--out`, persists it plus the model.
fn finish_training(
    net: &NetConfig,
    map: &LabelMap,
    rows: &[CsvRow],
    theta: Vec<f64>,
    iteration: usize,
    lambda: f64,
    out: Option<&Path>,
) -> Result<()> {
    let mut text = Vec::new();
    write_csv(&mut text, rows)?;
    std::io::stdout().write_all(&text)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output dir {}", dir.display()))?;
        std::fs::write(dir.join("metrics.csv"), &text)?;
        let ckpt = Checkpoint {
            header: CheckpointHeader {
                net: net.clone(),
                iteration,
                lambda,
                classes: Some(map.classes().to_vec()),
            },
            theta,
        };
        save_checkpoint(&ckpt, &dir.join("model.ckpt"))?;
    }
    Ok(())
}

/// Scores a dataset through the same partitioned evaluation the trainers
/// use, so a reported metric is reproduced exactly.
fn dist_metric(
    net: &NetConfig,
    split: &SplitStructure,
    train: &Batch,
    test: &TestSet,
    metric: MetricKind,
    theta: &[f64],
    chunks: usize,
) -> Result<Option<f64>> {
    let parts = build_partitions(net, split)?;
    let coord = coordinator_index(&parts, net.depth());
    let data = parts
        .iter()
        .enumerate()
        .map(|(rank, p)| build_worker_data(net, p, rank == coord, train, Some(test), metric))
        .collect();
    let outs = run_workers(
        net,
        split,
        TransportMode::InProc,
        default_timeout(),
        data,
        |ctx| {
            let theta_p = extract_theta_slice(net, &ctx.plan.part, theta);
            eval_metric(ctx, &theta_p, chunks)
        },
    )?;
    Ok(outs[coord])
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Run configuration; supplies the data paths, scaling, and split.
    #[arg(long)]
    pub config: PathBuf,
    /// Checkpoint written by a training run.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset to score; defaults to the configuration's test set.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Metric to report; defaults to the configuration's metric.
    #[arg(long, value_enum)]
    pub metric: Option<MetricName>,
}

/// Scores a checkpoint on a dataset and prints `<metric>,<value>`.
pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(m) = args.metric {
        cfg.metric = m;
    }
    cfg.validate()?;
    let net = cfg.net()?;
    let ckpt = load_checkpoint(&args.checkpoint)?;
    if ckpt.header.net.layer_sizes != net.layer_sizes {
        bail!(
            "checkpoint was trained on layers {:?} but the configuration says {:?}",
            ckpt.header.net.layer_sizes,
            net.layer_sizes
        );
    }
    let split = cfg.split();
    let n0 = net.width(0);
    let n_l = net.width(net.depth());

    // The training set pins the feature scaling; the scored set follows it.
    let train_ds = load_one(&cfg.train_path, n0)?;
    let eval_path = args
        .data
        .clone()
        .or_else(|| cfg.test_path.clone())
        .context("nothing to score: pass --data or set test_path in the configuration")?;
    let mut eval_ds = load_one(&eval_path, n0)?;
    let mut train_scaled = train_ds.clone();
    let spec = fit_scaling(cfg.scaling, &[&train_ds])?;
    apply_scaling(&mut train_scaled, &spec);
    apply_scaling(&mut eval_ds, &spec);

    let map = match &ckpt.header.classes {
        Some(classes) => LabelMap::fit(classes, n_l)?,
        None => LabelMap::fit(&eval_ds.labels, n_l)?,
    };
    let train = Batch {
        x: train_scaled.to_dense(),
        y: map.targets(&train_scaled.labels)?,
    };
    let test = TestSet {
        x: eval_ds.to_dense(),
        labels: eval_ds.labels.clone(),
        map,
    };
    let value = dist_metric(
        &net,
        &split,
        &train,
        &test,
        cfg.metric.kind(),
        &ckpt.theta,
        cfg.newton.chunks,
    )?
    .context("the coordinator produced no metric")?;
    println!("{},{}", cfg.metric.label(), value);
    Ok(())
}

#[derive(Debug, clap::Args)]
pub struct PlanArgs {
    /// Run configuration describing the network and split.
    #[arg(long)]
    pub config: PathBuf,
}

/// Prints the partition table with per-partition cost estimates as CSV,
/// followed by `#`-prefixed summary lines.
pub fn cmd_partition_plan(args: &PlanArgs) -> Result<()> {
    let cfg = RunConfig::load(&args.config)?;
    cfg.validate()?;
    let net = cfg.net()?;
    let split = cfg.split();
    let parts = build_partitions(&net, &split)?;
    let ds = load_one(&cfg.train_path, net.width(0))?;
    let l = ds.len();
    let hyper = cfg.newton_for(l);
    let sample = hyper.sample_size(l);
    let n_l = net.width(net.depth());
    let cost = cost_estimate(&net, &split, &parts, l, n_l, sample, &CostModelParams::default());
    let balance = balance_report(&parts);

    let mut out = String::from(
        "partition,layer,in_group,out_group,in_start,in_end,out_start,out_end,\
         owns_bias,weight_vars,total_vars,memory,compute,reduce_comm,bcast_comm\n",
    );
    for (p, c) in parts.iter().zip(&cost.per_partition) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            p.index,
            p.layer,
            p.in_group,
            p.out_group,
            p.in_range.start,
            p.in_range.end,
            p.out_range.start,
            p.out_range.end,
            p.owns_bias,
            p.weight_vars(),
            p.total_vars(),
            c.memory,
            c.compute,
            c.reduce_comm,
            c.bcast_comm,
        ));
    }
    out.push_str(&format!("# rows,{l}\n# sample,{sample}\n"));
    out.push_str(&format!(
        "# max_memory,{}\n# max_compute,{}\n# max_comm,{}\n",
        cost.max_memory, cost.max_compute, cost.max_comm
    ));
    out.push_str(&format!(
        "# balance_max_vars,{}\n# balance_min_vars,{}\n# balance_ratio,{}\n",
        balance.max_vars, balance.min_vars, balance.ratio
    ));
    print!("{out}");
    Ok(())
}

#[derive(Debug, clap::Args)]
pub struct GnCheckArgs {
    /// Run configuration describing the network, data, and split.
    #[arg(long)]
    pub config: PathBuf,
    /// Seed override for the probe vectors and the subsample.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of random probe vectors per product.
    #[arg(long, default_value_t = 5)]
    pub vectors: usize,
    /// Instances drawn from the training set for the comparison.
    #[arg(long, default_value_t = 40)]
    pub rows: usize,
}

/// Compares the factored Jacobians and both Gauss-Newton products against
/// dense references and prints the largest deviations.
pub fn cmd_gn_check(args: &GnCheckArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let net = cfg.net()?;
    if net.num_params() > 20_000 {
        bail!(
            "the dense reference grows quadratically with the parameter count; \
             {} parameters is past the limit of 20000 — check a smaller network",
            net.num_params()
        );
    }
    let split = cfg.split();
    let data = load_run_data(&cfg, &net)?;
    let l = data.train.len();
    let hyper = cfg.newton_for(l);
    let k = args.rows.clamp(1, l);
    let mut rng = Rng::for_purpose(cfg.seed, "gn-check/batch", 0);
    let idx = rng.sample_indices(l, k);
    let batch = Batch {
        x: data.train.x.select(Axis(0), &idx),
        y: data.train.y.select(Axis(0), &idx),
    };
    let theta = initial_theta(&cfg, &net);
    let report = gn_check(
        &net,
        &split,
        &batch,
        &theta,
        hyper.lambda1,
        hyper.c_reg,
        args.vectors,
        cfg.seed,
    )?;
    println!("jacobian_dev,{}", report.jacobian_dev);
    println!("diag_dev,{}", report.diag_dev);
    println!("full_dev,{}", report.full_dev);
    println!("# vectors,{}", report.vectors);
    println!("# sample,{}", report.sample);
    Ok(())
}
