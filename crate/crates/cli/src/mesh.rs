//! Multi-process training: one OS process per partition, meeting over a
//! file-based rendezvous in the scratch directory.
//!
//! The parent writes the resolved run configuration into a fresh scratch
//! subdirectory and spawns one `worker` child per partition. Each child
//! binds its own loopback listener, publishes the address as a file,
//! collects everyone else's, and dials the mesh. The coordinator child
//! writes the training records to a binary report; every child writes its
//! final parameter slice. The parent reassembles both once all children
//! have exited.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};

use gridnewton_collectives::tcp::establish_tcp_mesh;
use gridnewton_core::partition::build_partitions;
use gridnewton_dist::context::{AnyTransport, MemoryMeter, WorkerContext};
use gridnewton_dist::newton::newton_worker;
use gridnewton_dist::plan::{build_plan, extract_theta_slice, scatter_theta_slice};
use gridnewton_dist::runner::{build_worker_data, coordinator_index, default_timeout};

use crate::config::RunConfig;
use crate::dataio::{initial_theta, load_run_data};
use crate::report::{
    load_report, load_theta_slice, rows_from_records, save_report, save_theta_slice, ReportRow,
};

/// Scratch-directory root; `GRIDNEWTON_SCRATCH` overrides the system
/// temporary directory.
pub fn scratch_root() -> PathBuf {
    std::env::var_os("GRIDNEWTON_SCRATCH")
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir)
}

fn fresh_scratch_dir() -> Result<PathBuf> {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.subsec_nanos() as u128 + d.as_secs() as u128 * 1_000_000_000);
    let dir = scratch_root().join(format!("gridnewton-{}-{}", std::process::id(), nanos));
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create scratch dir {}", dir.display()))?;
    Ok(dir)
}

fn addr_path(dir: &Path, rank: usize) -> PathBuf {
    dir.join(format!("addr-{rank}"))
}

fn theta_path(dir: &Path, rank: usize) -> PathBuf {
    dir.join(format!("theta-{rank}.bin"))
}

fn report_path(dir: &Path) -> PathBuf {
    dir.join("report.bin")
}

fn config_path(dir: &Path) -> PathBuf {
    dir.join("run.json")
}

/// Publishes a rendezvous file atomically (write-then-rename), so readers
/// never observe a partial file.
fn publish(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn await_file(path: &Path, deadline: Instant) -> Result<String> {
    loop {
        match std::fs::read_to_string(path) {
            Ok(s) => return Ok(s),
            Err(_) if Instant::now() < deadline => {
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(e) => {
                return Err(e).with_context(|| {
                    format!("rendezvous file {} never appeared", path.display())
                })
            }
        }
    }
}

/// Runs a full multi-process Newton training and returns the coordinator's
/// report rows plus the reassembled final parameters.
pub fn run_tcp_training(cfg: &RunConfig) -> Result<(Vec<ReportRow>, Vec<f64>)> {
    let net = cfg.net()?;
    let split = cfg.split();
    let parts = build_partitions(&net, &split)?;
    let world = parts.len();

    let dir = fresh_scratch_dir()?;
    let result = run_tcp_inner(cfg, &dir, world, &net, &split);
    let _ = std::fs::remove_dir_all(&dir);
    result
}

fn run_tcp_inner(
    cfg: &RunConfig,
    dir: &Path,
    world: usize,
    net: &gridnewton_core::net::NetConfig,
    split: &gridnewton_core::partition::SplitStructure,
) -> Result<(Vec<ReportRow>, Vec<f64>)> {
    std::fs::write(config_path(dir), serde_json::to_vec_pretty(cfg)?)?;

    let exe = std::env::current_exe().context("cannot locate own executable")?;
    let mut children = Vec::with_capacity(world);
    for rank in 0..world {
        let child = Command::new(&exe)
            .arg("worker")
            .arg("--scratch")
            .arg(dir)
            .arg("--rank")
            .arg(rank.to_string())
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .spawn()
            .with_context(|| format!("cannot spawn worker {rank}"))?;
        children.push(child);
    }

    let mut failed = Vec::new();
    for (rank, mut child) in children.into_iter().enumerate() {
        let status = child
            .wait()
            .with_context(|| format!("cannot wait for worker {rank}"))?;
        if !status.success() {
            failed.push(rank);
        }
    }
    if !failed.is_empty() {
        bail!("workers {failed:?} exited with errors");
    }

    let rows = load_report(&report_path(dir))?;
    let parts = build_partitions(net, split)?;
    let mut theta = vec![0.0; net.num_params()];
    for part in &parts {
        let slice = load_theta_slice(&theta_path(dir, part.index), part.total_vars())?;
        scatter_theta_slice(net, part, &slice, &mut theta);
    }
    Ok((rows, theta))
}

/// Entry point of the hidden `worker` subcommand: one partition's whole
/// life, from rendezvous to result files.
pub fn run_worker(scratch: &Path, rank: usize) -> Result<()> {
    let cfg = RunConfig::load(&config_path(scratch))?;
    cfg.validate()?;
    let net = cfg.net()?;
    let split = cfg.split();
    let parts = build_partitions(&net, &split)?;
    let world = parts.len();
    if rank >= world {
        bail!("rank {rank} out of range for {world} partitions");
    }
    let coord = coordinator_index(&parts, net.depth());

    let data = load_run_data(&cfg, &net)?;
    let l = data.train.len();
    let hyper = cfg.newton_for(l);
    hyper.validate()?;
    let theta0 = initial_theta(&cfg, &net);
    let theta_p = extract_theta_slice(&net, &parts[rank], &theta0);

    // Rendezvous: bind, publish, collect, dial.
    let listener = std::net::TcpListener::bind("127.0.0.1:0")?;
    publish(&addr_path(scratch, rank), &listener.local_addr()?.to_string())?;
    let timeout = default_timeout();
    let deadline = Instant::now() + timeout;
    let mut addrs = Vec::with_capacity(world);
    for r in 0..world {
        let text = await_file(&addr_path(scratch, r), deadline)?;
        let addr: SocketAddr = text
            .trim()
            .parse()
            .with_context(|| format!("bad rendezvous address for rank {r}: {text:?}"))?;
        addrs.push(addr);
    }
    let peer = establish_tcp_mesh(rank, listener, &addrs, timeout)?;

    let worker_data = build_worker_data(
        &net,
        &parts[rank],
        rank == coord,
        &data.train,
        data.test.as_ref(),
        cfg.metric.kind(),
    );
    let mut ctx = WorkerContext {
        transport: AnyTransport::Tcp(peer),
        plan: build_plan(&net, &split, &parts[rank]),
        data: worker_data,
        meter: MemoryMeter::default(),
    };

    let out = newton_worker(&mut ctx, theta_p, &hyper, cfg.seed, cfg.max_iter)?;

    save_theta_slice(&out.theta, &theta_path(scratch, rank))?;
    if rank == coord {
        let rows = rows_from_records(&out.records, false);
        let report: Vec<ReportRow> = rows
            .iter()
            .zip(&out.records)
            .map(|(&row, rec)| ReportRow {
                row,
                lambda: rec.lambda_after,
            })
            .collect();
        save_report(&report, &report_path(scratch))?;
    }
    Ok(())
}
