mod input;
mod verify;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{ensure, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use wrenchlab::oracle::mc_force_closure;
use wrenchlab::pong::{GradMode, PongSetup};
use wrenchlab::synth::{sweep, SweepOptions, SweepRecord};
use wrenchlab::{
    basis_wrenches, grasp_metrics, l_fc, l_fc_gradient, synthesize, McEstimate, PongGradient, SynthProblem, SynthResult,
};

use input::{GraspInput, Source, SCHEMA};
use verify::Theorem;

const EXIT_CLOSURE: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_NO_CLOSURE: u8 = 2;

#[derive(Parser)]
#[command(name = "wrenchlab", version, about = "Grasp wrench-space metrics and probabilistic force-closure bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Force closure and quality metrics of a grasp (contact JSON or wrench CSV).
    Metrics {
        input: PathBuf,
        /// Also compute the L_FC bound (contact JSON only).
        #[arg(long)]
        pong: bool,
        /// Monte Carlo samples for the closure probability; 0 skips it.
        #[arg(long, default_value_t = 0)]
        mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check a certificate or bound on a seeded random corpus.
    Verify {
        #[arg(value_enum)]
        theorem: Theorem,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// L_FC with per-finger polygons and an optional Monte Carlo cross-check.
    Pong {
        input: PathBuf,
        /// Monte Carlo samples; 0 omits the estimate.
        #[arg(long, default_value_t = 10_000)]
        mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Gradient of L_FC with respect to contact positions and normal tilts.
    PongGrad {
        input: PathBuf,
        /// Central differences of the whole bound instead of LP sensitivities.
        #[arg(long)]
        fd: bool,
    },
    /// Contact synthesis on a surface, or a seeded sweep of syntheses.
    Synth {
        input: PathBuf,
        #[arg(long)]
        sweep: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        /// Monte Carlo samples per sweep grasp; 0 skips them.
        #[arg(long, default_value_t = 10_000)]
        mc: usize,
        /// Sweep CSV destination.
        #[arg(long, requires = "sweep")]
        out: Option<PathBuf>,
    },
}

fn emit<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Finite values pass through; the rest become `null` with a warning.
fn finite(name: &str, v: Option<f64>, warnings: &mut Vec<String>) -> Option<f64> {
    match v {
        Some(x) if !x.is_finite() => {
            warnings.push(format!("{name} is not finite ({x})"));
            None
        }
        other => other,
    }
}

#[derive(Serialize)]
struct GraspReport {
    schema: u32,
    fingerprint: String,
    n_w: usize,
    force_closure: bool,
    l_star: Option<f64>,
    l_star_normalized: Option<f64>,
    epsilon: Option<f64>,
    delta: Option<f64>,
    bound_holds: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    l_fc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mc_estimate: Option<McEstimate>,
    warnings: Vec<String>,
}

fn cmd_metrics(path: &PathBuf, pong: bool, mc: usize, seed: u64) -> Result<u8> {
    let src = Source::read(path)?;
    let mut warnings = Vec::new();
    let (w, grasp) = if src.is_json() {
        let g: GraspInput = src.json()?;
        let contacts = g.resolve()?;
        (basis_wrenches(&contacts, &g.friction, None)?, Some((g, contacts)))
    } else {
        ensure!(!pong && mc == 0, "--pong and --mc need a contact JSON input");
        (src.wrenches()?, None)
    };
    let m = grasp_metrics(&w)?;
    if m.hull_perturbed {
        warnings.push("degenerate wrench set: facets were enumerated on jittered input".into());
    }
    if m.force_closure && m.l_star.is_some_and(|l| l <= 0.0) {
        warnings.push("origin lies on the hull boundary".into());
    }
    let (mut l_fc_value, mut mc_estimate) = (None, None);
    if let Some((g, contacts)) = &grasp {
        if pong {
            l_fc_value = Some(l_fc(contacts, &g.friction, &g.pong)?.l_fc);
        }
        if mc > 0 {
            mc_estimate = Some(mc_force_closure(contacts, &g.friction, mc, seed)?);
        }
    }
    let report = GraspReport {
        schema: SCHEMA,
        fingerprint: src.fingerprint,
        n_w: m.n_w,
        force_closure: m.force_closure,
        l_star: finite("l_star", m.l_star, &mut warnings),
        l_star_normalized: finite("l_star_normalized", m.l_star_normalized, &mut warnings),
        epsilon: finite("epsilon", m.epsilon, &mut warnings),
        delta: finite("delta", m.delta, &mut warnings),
        bound_holds: m.bound_holds,
        l_fc: l_fc_value,
        mc_estimate,
        warnings,
    };
    emit(&report)?;
    Ok(if report.force_closure { EXIT_CLOSURE } else { EXIT_NO_CLOSURE })
}

fn cmd_verify(theorem: Theorem, trials: usize, seed: u64) -> Result<u8> {
    ensure!(trials >= 1, "--trials must be at least 1");
    let summary = verify::run(theorem, trials, seed)?;
    emit(&summary)?;
    Ok(if summary.failed == 0 { EXIT_CLOSURE } else { EXIT_NO_CLOSURE })
}

#[derive(Serialize)]
struct FingerReport {
    mass: f64,
    polygon: Vec<[f64; 2]>,
    thetas: Vec<f64>,
}

#[derive(Serialize)]
struct PongOutput {
    schema: u32,
    fingerprint: String,
    l_fc: f64,
    mean_force_closure: bool,
    clamped: bool,
    fingers: Vec<FingerReport>,
    /// Every reported polygon vertex passed the inclusion LPs.
    vertices_verified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    mc_estimate: Option<McEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound_below_mc: Option<bool>,
}

/// Vertices pulled toward the origin by this factor before the inclusion
/// check, so the LP is not asked about its own boundary.
const VERTEX_SHRINK: f64 = 1.0 - 1e-9;

fn cmd_pong(path: &PathBuf, mc: usize, seed: u64) -> Result<u8> {
    let src = Source::read(path)?;
    let g: GraspInput = src.json()?;
    let contacts = g.resolve()?;
    let report = l_fc(&contacts, &g.friction, &g.pong)?;
    let setup = PongSetup::new(&contacts, &g.friction)?;
    // without mean closure no perturbation is certified, so no polygon is reported
    let polygons: Vec<Vec<[f64; 2]>> =
        report.polygons.iter().map(|p| if report.mean_force_closure { p.vertices.clone() } else { Vec::new() }).collect();
    let vertices_verified = polygons.iter().enumerate().all(|(i, p)| {
        p.iter().all(|v| setup.inclusion_holds(i, [v[0] * VERTEX_SHRINK, v[1] * VERTEX_SHRINK]))
    });
    let mc_estimate = if mc > 0 { Some(mc_force_closure(&contacts, &g.friction, mc, seed)?) } else { None };
    let out = PongOutput {
        schema: SCHEMA,
        fingerprint: src.fingerprint,
        l_fc: report.l_fc,
        mean_force_closure: report.mean_force_closure,
        clamped: report.clamped,
        fingers: report
            .per_finger
            .iter()
            .zip(polygons)
            .zip(&report.thetas)
            .map(|((m, polygon), t)| FingerReport { mass: *m, polygon, thetas: t.clone() })
            .collect(),
        vertices_verified,
        bound_below_mc: mc_estimate.map(|e| report.l_fc <= e.p_hat + 3.0 * e.std_err),
        mc_estimate,
    };
    emit(&out)?;
    Ok(EXIT_CLOSURE)
}

#[derive(Serialize)]
struct GradOutput {
    schema: u32,
    fingerprint: String,
    #[serde(flatten)]
    gradient: PongGradient,
}

fn cmd_pong_grad(path: &PathBuf, fd: bool) -> Result<u8> {
    let src = Source::read(path)?;
    let g: GraspInput = src.json()?;
    let contacts = g.resolve()?;
    let mut config = g.pong;
    if fd {
        config.grad_mode = GradMode::FiniteDifference;
    }
    let mut gradient = l_fc_gradient(&contacts, &g.friction, &config)?;
    if !gradient.min_side_gap.is_finite() {
        // no contributing vertex step; JSON has no infinity
        gradient.min_side_gap = 0.0;
    }
    emit(&GradOutput { schema: SCHEMA, fingerprint: src.fingerprint, gradient })?;
    Ok(EXIT_CLOSURE)
}

#[derive(Serialize)]
struct SynthOutput {
    schema: u32,
    fingerprint: String,
    seed: u64,
    result: SynthResult,
}

#[derive(Serialize)]
struct SweepRow {
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<SynthResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<wrenchlab::GraspMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    l_fc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mc_estimate: Option<McEstimate>,
}

#[derive(Serialize)]
struct SweepOutput {
    schema: u32,
    fingerprint: String,
    seed: u64,
    n_grasps: usize,
    failures: usize,
    records: Vec<SweepRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_sweep_csv(path: &PathBuf, n_f: usize, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header: Vec<String> = vec!["seed".into()];
    for i in 0..n_f {
        header.extend(["x", "y", "z"].iter().map(|c| format!("{c}{i}")));
    }
    header.extend(
        ["l_star", "l_star_normalized", "epsilon", "delta", "l_fc", "mc_p_hat", "mc_std_err", "converged", "feasible", "error"]
            .map(String::from),
    );
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.seed.to_string()];
        match &r.result {
            Ok(res) => row.extend(res.contacts.iter().flat_map(|p| p.map(|v| v.to_string()))),
            Err(_) => row.extend(std::iter::repeat_n(String::new(), 3 * n_f)),
        }
        let m = r.metrics.as_ref();
        row.push(opt(m.and_then(|m| m.l_star)));
        row.push(opt(m.and_then(|m| m.l_star_normalized)));
        row.push(opt(m.and_then(|m| m.epsilon)));
        row.push(opt(m.and_then(|m| m.delta)));
        row.push(opt(r.l_fc));
        row.push(opt(r.mc.map(|e| e.p_hat)));
        row.push(opt(r.mc.map(|e| e.std_err)));
        let res = r.result.as_ref().ok();
        row.push(res.map(|x| x.converged.to_string()).unwrap_or_default());
        row.push(res.map(|x| x.feasible.to_string()).unwrap_or_default());
        row.push(r.result.as_ref().err().cloned().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_synth(path: &PathBuf, n: Option<usize>, seed: u64, max_iters: usize, mc: usize, out: Option<&PathBuf>) -> Result<u8> {
    let src = Source::read(path)?;
    let problem: SynthProblem = src.json()?;
    let Some(n) = n else {
        let result = synthesize(&problem, seed, max_iters)?;
        emit(&SynthOutput { schema: SCHEMA, fingerprint: src.fingerprint, seed, result })?;
        return Ok(EXIT_CLOSURE);
    };
    let records = sweep(&problem, n, seed, &SweepOptions { max_iters, mc_samples: mc })?;
    if let Some(p) = out {
        write_sweep_csv(p, problem.n_f, &records)?;
    }
    let rows: Vec<SweepRow> = records
        .into_iter()
        .map(|r| {
            let (result, error) = match r.result {
                Ok(x) => (Some(x), None),
                Err(e) => (None, Some(e)),
            };
            SweepRow { seed: r.seed, error, result, metrics: r.metrics, l_fc: r.l_fc, mc_estimate: r.mc }
        })
        .collect();
    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    emit(&SweepOutput { schema: SCHEMA, fingerprint: src.fingerprint, seed, n_grasps: n, failures, records: rows })?;
    Ok(EXIT_CLOSURE)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("WRENCHLAB_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("WRENCHLAB_THREADS={v:?}"))?;
        ensure!(n >= 1, "WRENCHLAB_THREADS must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    configure_threads()?;
    match cli.command {
        Command::Metrics { input, pong, mc, seed } => cmd_metrics(&input, pong, mc, seed),
        Command::Verify { theorem, trials, seed } => cmd_verify(theorem, trials, seed),
        Command::Pong { input, mc, seed } => cmd_pong(&input, mc, seed),
        Command::PongGrad { input, fd } => cmd_pong_grad(&input, fd),
        Command::Synth { input, sweep, seed, max_iters, mc, out } => cmd_synth(&input, sweep, seed, max_iters, mc, out.as_ref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_ERROR);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
