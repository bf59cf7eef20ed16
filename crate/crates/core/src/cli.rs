//! Command-line front end: one subcommand per experiment, results written to `--out-dir`.

use crate::admissibility::{check_condition_a, shell_covector};
use crate::classical::uprime::{assemble_u, probe_multiplicity, solve_base_point, solve_uprime};
use crate::classical::{flow, write_trace, PhasePoint};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::linalg::det2;
use crate::lowdisc::halton;
use crate::manifest::{commented_csv, family_hash, ExperimentManifest};
use crate::metric::{check_positive_definite, DefiniteMargin, MetricFamily};
use crate::moments::{decay_study, estimate_moments, make_measure, write_moment_rows, DecayTable, MomentReport};
use crate::quantum::{
    build_operator, default_resolution, evaluate, flat_eigenfunction, loschmidt_echo, propagate, save_snapshot,
    EchoPoint, PropagationStats,
};
use crate::theory::{beta, compare, BetaReport, Comparison};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::ffi::OsString;
use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "echolab", version, about = "Perturbed propagated eigenfunctions on the flat 2-torus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Seed for randomized quadrature.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Admissibility certificate and positive-definiteness margin.
    CheckAdmissible { config: PathBuf },
    /// Trajectory dump with monodromy summary.
    Flow { config: PathBuf },
    /// u' Newton diagnostics over a sample of shell directions.
    Uprime { config: PathBuf },
    /// Propagate the flat eigenfunction at the configured u and store a snapshot.
    Propagate { config: PathBuf },
    /// Survival probability curve.
    Echo { config: PathBuf },
    /// Moments of Re φ over the deformation measure.
    Moments { config: PathBuf },
    /// Odd-moment decay table across the configured lattice vectors.
    Decay { config: PathBuf },
    /// Predicted limiting variance.
    Beta { config: PathBuf },
    /// Prediction against measured variance.
    Compare {
        config: PathBuf,
        /// Reuse a `moments.json` result instead of recomputing.
        #[arg(long)]
        moments: Option<PathBuf>,
        /// Reuse a `beta.json` result instead of recomputing.
        #[arg(long)]
        beta: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CheckAdmissible { .. } => "check-admissible",
            Command::Flow { .. } => "flow",
            Command::Uprime { .. } => "uprime",
            Command::Propagate { .. } => "propagate",
            Command::Echo { .. } => "echo",
            Command::Moments { .. } => "moments",
            Command::Decay { .. } => "decay",
            Command::Beta { .. } => "beta",
            Command::Compare { .. } => "compare",
        }
    }

    fn config(&self) -> &Path {
        match self {
            Command::CheckAdmissible { config }
            | Command::Flow { config }
            | Command::Uprime { config }
            | Command::Propagate { config }
            | Command::Echo { config }
            | Command::Moments { config }
            | Command::Decay { config }
            | Command::Beta { config }
            | Command::Compare { config, .. } => config,
        }
    }
}

/// Every JSON result: the manifest, its hash, and the payload.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultFile<T> {
    pub manifest_hash: String,
    pub manifest: ExperimentManifest,
    pub result: T,
}

/// Read a result file back, re-validate its configuration and check the hash.
pub fn read_result<T: DeserializeOwned>(path: &Path) -> Result<ResultFile<T>> {
    let file: ResultFile<T> = serde_json::from_slice(&std::fs::read(path)?)?;
    file.manifest.config.validate()?;
    let h = file.manifest.hash()?;
    if h != file.manifest_hash {
        return Err(Error::validation("manifest_hash", format!("stored {} but manifest hashes to {h}", file.manifest_hash)));
    }
    Ok(file)
}

struct Run {
    manifest: ExperimentManifest,
    hash: String,
    out_dir: PathBuf,
}

impl Run {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write_json<T: Serialize>(&self, name: &str, result: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let body = serde_json::json!({
            "manifest_hash": self.hash,
            "manifest": self.manifest,
            "result": result,
        });
        let mut text = serde_json::to_string_pretty(&body)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }

    fn csv_header(&self) -> Vec<String> {
        vec![format!("manifest_hash={}", self.hash), format!("command={}", self.manifest.command)]
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(name))?))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdmissibilityOutput {
    pub report: crate::admissibility::AdmissibilityReport,
    pub definite_margin: DefiniteMargin,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowSummary {
    pub start: [f64; 4],
    pub endpoint: [f64; 4],
    pub u: Vec<f64>,
    pub s: f64,
    pub monodromy: [[f64; 4]; 4],
    pub energy_drift: f64,
    pub symplectic_defect: f64,
    pub steps: usize,
    pub rejected: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UprimeRow {
    pub theta: f64,
    pub target: [f64; 2],
    pub recovered: [f64; 2],
    pub iterations: usize,
    pub residual: f64,
    /// `det(Jacobian) / t²`.
    pub scaled_det: f64,
    pub mixed_hessian_det: f64,
    pub roots: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UprimeSummary {
    pub rows: Vec<UprimeRow>,
    pub failures: Vec<String>,
    pub max_recovery_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropagateSummary {
    pub u: Vec<f64>,
    pub h: f64,
    pub t: f64,
    pub m: [i64; 2],
    pub grid: usize,
    pub energy: f64,
    pub value_at_x: [f64; 2],
    pub weighted_norm: f64,
    pub reference_norm: f64,
    pub band_leakage: f64,
    pub stats: PropagationStats,
    pub snapshot: String,
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global() {
            log::warn!("worker pool already configured: {e}");
        }
    }
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error [{}]: {e}", e.invariant());
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let config = ExperimentConfig::load(cli.command.config())?;
    std::fs::create_dir_all(&cli.out_dir)?;
    let manifest = ExperimentManifest::new(cli.command.name(), cli.seed, config);
    let hash = manifest.hash()?;
    let run = Run { manifest, hash, out_dir: cli.out_dir.clone() };
    let cfg = &run.manifest.config;
    let family = cfg.build_family()?;
    match &cli.command {
        Command::CheckAdmissible { .. } => check_admissible(&run, &family),
        Command::Flow { .. } => flow_cmd(&run, &family),
        Command::Uprime { .. } => uprime_cmd(&run, &family),
        Command::Propagate { .. } => propagate_cmd(&run, &family),
        Command::Echo { .. } => echo_cmd(&run, &family),
        Command::Moments { .. } => moments_cmd(&run, &family).map(|(p, _)| p),
        Command::Decay { .. } => decay_cmd(&run, &family),
        Command::Beta { .. } => beta_cmd(&run, &family).map(|(p, _)| p),
        Command::Compare { moments, beta, .. } => compare_cmd(&run, &family, moments.as_deref(), beta.as_deref()),
    }
}

fn check_admissible(run: &Run, family: &MetricFamily) -> Result<Vec<PathBuf>> {
    let cfg = &run.manifest.config;
    let definite_margin = check_positive_definite(family, 64)?;
    let report = check_condition_a(family, cfg.physics.energy, cfg.physics.uprime_indices, &cfg.admissibility)?;
    let passed = report.passed();
    let out = AdmissibilityOutput { report, definite_margin, passed };
    let path = run.write_json("admissibility.json", &out)?;
    if !passed {
        let a = &out.report.condition_a;
        let b = &out.report.condition_b;
        return Err(Error::NotAdmissible(format!(
            "condition A {} (min |det| {:e} at x = {:?}, ξ = {:?}); condition B {} (min |a| {:e} at x = {:?}); report at {}",
            if a.passed { "holds" } else { "fails" },
            a.min_abs_det,
            a.witness.x,
            a.witness.xi,
            if b.passed { "holds" } else { "fails" },
            b.min_abs_factor,
            b.witness_x,
            path.display()
        )));
    }
    Ok(vec![path])
}

fn flow_cmd(run: &Run, family: &MetricFamily) -> Result<Vec<PathBuf>> {
    let cfg = &run.manifest.config;
    let z0 = match cfg.classical.z0 {
        Some(z) => PhasePoint::new([z[0], z[1]], [z[2], z[3]]),
        None => {
            let xi = shell_covector(family, cfg.physics.x, cfg.physics.energy, 0.0).ok_or(Error::Caustic {
                y: cfg.physics.x,
                gap: cfg.physics.energy - family.potential().value(cfg.physics.x),
                margin: 0.0,
            })?;
            PhasePoint::new(cfg.physics.x, xi)
        }
    };
    let u = cfg.u();
    let mut opts = cfg.classical.flow_options();
    opts.record_trace = true;
    let jet = flow(family, &u, cfg.classical.s, z0, &opts)?;
    let mut w = run.create("flow.csv")?;
    write_trace(&jet.trace, &run.csv_header(), &mut w)?;
    w.flush()?;
    let mono = jet.monodromy;
    let summary = FlowSummary {
        start: [z0.x[0], z0.x[1], z0.xi[0], z0.xi[1]],
        endpoint: [jet.endpoint.x[0], jet.endpoint.x[1], jet.endpoint.xi[0], jet.endpoint.xi[1]],
        u,
        s: cfg.classical.s,
        monodromy: std::array::from_fn(|r| std::array::from_fn(|c| mono[(r, c)])),
        energy_drift: jet.energy_drift,
        symplectic_defect: jet.symplectic_defect(),
        steps: jet.steps,
        rejected: jet.rejected,
    };
    let json = run.write_json("flow.json", &summary)?;
    Ok(vec![run.path("flow.csv"), json])
}

fn uprime_cmd(run: &Run, family: &MetricFamily) -> Result<Vec<PathBuf>> {
    let cfg = &run.manifest.config;
    let p = &cfg.physics;
    let k = family.k();
    let eps = family.epsilon();
    let u = cfg.u();
    let urest: Vec<f64> = (0..k).filter(|j| !p.uprime_indices.contains(j)).map(|j| u[j]).collect();
    let newton = cfg.classical.newton_options();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for i in 0..cfg.classical.uprime_samples {
        let theta = TAU * i as f64 / cfg.classical.uprime_samples as f64;
        let target = [eps * (halton(i as u64, 0) - 0.5), eps * (halton(i as u64, 1) - 0.5)];
        let Some(eta) = shell_covector(family, p.x, p.energy, theta) else {
            failures.push(format!("theta = {theta}: empty shell fibre"));
            continue;
        };
        let full = assemble_u(k, p.uprime_indices, target, &urest);
        let outcome = solve_base_point(family, &full, p.t, p.x, eta, &newton).and_then(|(z, _)| {
            let sol = solve_uprime(family, p.x, p.uprime_indices, &urest, p.t, z, &newton)?;
            let roots = probe_multiplicity(family, p.x, p.uprime_indices, &urest, p.t, z, &newton);
            Ok((z, sol, roots))
        });
        match outcome {
            Ok((z, sol, roots)) => rows.push(UprimeRow {
                theta,
                target,
                recovered: sol.uprime,
                iterations: sol.iterations,
                residual: sol.residual,
                scaled_det: sol.jacobian.determinant() / (p.t * p.t),
                mixed_hessian_det: det2(family.mixed_hessian(p.x, z.xi, p.uprime_indices)),
                roots,
            }),
            Err(e) => failures.push(format!("theta = {theta}: [{}] {e}", e.invariant())),
        }
    }
    let max_recovery_error = rows
        .iter()
        .map(|r| (r.recovered[0] - r.target[0]).hypot(r.recovered[1] - r.target[1]))
        .fold(0.0, f64::max);
    let mut w = commented_csv(run.create("uprime.csv")?, &run.csv_header())?;
    w.write_record(["theta", "target1", "target2", "uprime1", "uprime2", "iterations", "residual", "scaled_det", "mixed_hessian_det", "roots"])?;
    for r in &rows {
        w.serialize((
            r.theta,
            r.target[0],
            r.target[1],
            r.recovered[0],
            r.recovered[1],
            r.iterations,
            r.residual,
            r.scaled_det,
            r.mixed_hessian_det,
            r.roots,
        ))?;
    }
    w.flush()?;
    let json = run.write_json("uprime.json", &UprimeSummary { rows, failures, max_recovery_error })?;
    Ok(vec![run.path("uprime.csv"), json])
}

fn propagate_cmd(run: &Run, family: &MetricFamily) -> Result<Vec<PathBuf>> {
    let cfg = &run.manifest.config;
    let p = &cfg.physics;
    let h = cfg.h(family);
    let n = cfg.quantum.grid.unwrap_or_else(|| default_resolution(p.m));
    let u = cfg.u();
    let v0 = family.potential().mean_coefficient();
    let (phi, energy) = flat_eigenfunction(p.m, h, n, v0);
    crate::quantum::check_resolution(n, p.m, energy, h, 4.0)?;
    let op = build_operator(family, &u, h, n)?;
    let (psi, stats) = propagate(&phi, &op, p.t, &cfg.quantum.krylov)?;
    let snap = run.path("propagate.bin");
    save_snapshot(&psi, &family_hash(cfg)?, &run.hash, &snap)?;
    let v = evaluate(&psi, p.x);
    let e0 = energy - v0;
    let band = (cfg.admissibility.safety + 1.0) * family.epsilon() * e0.max(1.0);
    let summary = PropagateSummary {
        u,
        h,
        t: p.t,
        m: p.m,
        grid: n,
        energy,
        value_at_x: [v.re, v.im],
        weighted_norm: psi.norm(),
        reference_norm: psi.reference_norm(),
        band_leakage: psi.band_leakage(e0 - band, e0 + band),
        stats,
        snapshot: "propagate.bin".into(),
    };
    let json = run.write_json("propagate.json", &summary)?;
    Ok(vec![snap, json])
}

fn echo_cmd(run: &Run, family: &MetricFamily) -> Result<Vec<PathBuf>> {
    let cfg = &run.manifest.config;
    let p = &cfg.physics;
    let h = cfg.h(family);
    let n = cfg.quantum.grid.unwrap_or_else(|| default_resolution(p.m));
    let curve: Vec<EchoPoint> = loschmidt_echo(family, &cfg.u(), h, p.m, n, &cfg.echo.times(), &cfg.quantum.krylov)?;
    let mut w = commented_csv(run.create("echo.csv")?, &run.csv_header())?;
    w.write_record(["t", "M_LE"])?;
    for pt in &curve {
        w.serialize((pt.t, pt.echo))?;
    }
    w.flush()?;
    let json = run.write_json("echo.json", &curve)?;
    Ok(vec![run.path("echo.csv"), json])
}

fn moments_cmd(run: &Run, family: &MetricFamily) -> Result<(Vec<PathBuf>, MomentReport)> {
    let cfg = &run.manifest.config;
    let p = &cfg.physics;
    let measure = make_measure(family.k(), family.epsilon())?;
    let h = cfg.h(family);
    let report = estimate_moments(family, &measure, p.x, p.t, h, p.m, cfg.moments.p_max, &cfg.budget(), run.manifest.seed)?;
    write_moment_rows(std::slice::from_ref(&report), &run.csv_header(), run.create("moments.csv")?)?;
    let json = run.write_json("moments.json", &report)?;
    Ok((vec![run.path("moments.csv"), json], report))
}

fn decay_cmd(run: &Run, family: &MetricFamily) -> Result<Vec<PathBuf>> {
    let cfg = &run.manifest.config;
    let p = &cfg.physics;
    let measure = make_measure(family.k(), family.epsilon())?;
    let gap = p.energy - family.potential().mean_coefficient();
    let table: DecayTable = decay_study(
        family,
        &measure,
        p.x,
        p.t,
        gap,
        &cfg.decay.lattice,
        &cfg.decay.p,
        &cfg.budget(),
        run.manifest.seed,
    )?;
    write_moment_rows(&table.reports, &run.csv_header(), run.create("decay.csv")?)?;
    let json = run.write_json("decay.json", &table)?;
    Ok(vec![run.path("decay.csv"), json])
}

fn beta_cmd(run: &Run, family: &MetricFamily) -> Result<(Vec<PathBuf>, BetaReport)> {
    let cfg = &run.manifest.config;
    let measure = make_measure(family.k(), family.epsilon())?;
    let report = beta(family, &measure, &cfg.beta_config())?;
    let json = run.write_json("beta.json", &report)?;
    Ok((vec![json], report))
}

fn compare_cmd(run: &Run, family: &MetricFamily, moments: Option<&Path>, beta_file: Option<&Path>) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    let moment_report = match moments {
        Some(path) => read_result::<MomentReport>(path)?.result,
        None => {
            let (p, r) = moments_cmd(run, family)?;
            paths.extend(p);
            r
        }
    };
    let beta_report = match beta_file {
        Some(path) => read_result::<BetaReport>(path)?.result,
        None => {
            let (p, r) = beta_cmd(run, family)?;
            paths.extend(p);
            r
        }
    };
    let cmp: Comparison = compare(&beta_report, &moment_report)?;
    paths.push(run.write_json("compare.json", &cmp)?);

    let ledger = run.path("compare-ledger.csv");
    let fresh = !ledger.exists();
    let file = std::fs::OpenOptions::new().create(true).append(true).open(&ledger)?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record([
            "manifest_hash", "mode", "t", "h", "predicted", "predicted_error", "measured_variance", "variance_error",
            "relative_deviation", "tolerance", "agrees",
        ])?;
    }
    w.serialize((
        &run.hash,
        &cmp.mode,
        cmp.t,
        cmp.h,
        cmp.predicted,
        cmp.predicted_error,
        cmp.measured_variance,
        cmp.variance_error,
        cmp.relative_deviation,
        cmp.tolerance,
        cmp.agrees,
    ))?;
    w.flush()?;
    paths.push(ledger);
    Ok(paths)
}
