//! Scenario execution and the files it leaves behind.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use flatflow::diagnostics::{apriori_report, good_times};
use flatflow::excess::{
    decay_probe, default_base_count, fit_frame, lambda_accumulate, perturb_w, rescale_v, window_steps,
    write_decay_csv, Cylinder, DecayLevel,
};
use flatflow::harnack::{
    abp_ratio, write_density_csv, AbpReport, BaseLattice, CaloricBumps, CenterBox, SpaceTimeField, Window,
};
use flatflow::mms::{run_flow_with, FlowOptions, FlowTrace, StepRecord, TRACE_COLUMNS};
use flatflow::shapes::generate_initial;
use flatflow::{Error, GridField, Region};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExcessProbeConfig, GoodTimesConfig, HarnackConfig, HarnackSource, ScenarioConfig};
use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.toml";
pub const CONFIG_ECHO: &str = "config.toml";
/// Full per-step records, a superset of the trace columns.
pub const RECORDS: &str = "records.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";

const EXTRA_COLUMNS: [&str; 3] = ["solver_rel_gap", "max_prev_distance", "kappa_p99"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub command: String,
    pub version: String,
    pub wall_clock_seconds: f64,
    /// SHA-256 of every output file, keyed by path relative to the output
    /// directory.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("manifest: {e}")))
    }

    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Output directory that remembers what was written.
struct Outputs {
    dir: PathBuf,
    written: BTreeSet<String>,
}

impl Outputs {
    fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: BTreeSet::new() })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> flatflow::Result<()>) -> CliResult<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut out = BufWriter::new(File::create(&path)?);
        f(&mut out)?;
        out.flush()?;
        self.written.insert(name.to_string());
        Ok(())
    }

    fn finish(&self, command: &str, started: Instant, result: &CliResult<()>) -> CliResult<()> {
        let mut files = BTreeMap::new();
        for name in &self.written {
            let bytes = fs::read(self.dir.join(name))?;
            let digest = Sha256::digest(&bytes);
            files.insert(name.clone(), digest.iter().map(|b| format!("{b:02x}")).collect());
        }
        let manifest = Manifest {
            status: if result.is_ok() { "ok" } else { "FAILED" }.into(),
            error: result.as_ref().err().map(|e| e.to_string()),
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            files,
        };
        let text = toml::to_string(&manifest).expect("manifest serializes");
        fs::write(self.dir.join(MANIFEST), text)?;
        Ok(())
    }
}

/// Runs `body` against a fresh output directory and always leaves a
/// manifest, marked FAILED when `body` fails.
fn with_outputs(
    cfg: &ScenarioConfig,
    command: &str,
    body: impl FnOnce(&mut Outputs) -> CliResult<()>,
) -> CliResult<()> {
    let started = Instant::now();
    let mut out = Outputs::create(&cfg.output.dir)?;
    out.write(CONFIG_ECHO, |w| Ok(w.write_all(cfg.to_toml().as_bytes())?))?;
    let result = body(&mut out);
    out.finish(command, started, &result)?;
    result
}

fn snapshot_name(step: usize, ext: &str) -> String {
    format!("{SNAPSHOT_DIR}/step_{step:06}.{ext}")
}

fn write_records(out: &mut Outputs, records: &[StepRecord], h: f64) -> CliResult<()> {
    // the trace writer only needs the records
    let shell = FlowTrace {
        h,
        v: f64::NAN,
        mode: flatflow::mms::Mode::Constrained,
        records: records.to_vec(),
        snapshots: Vec::new(),
        recent: Vec::new(),
        truncated: None,
    };
    out.write("trace.csv", |w| shell.write_csv(w))?;
    out.write(RECORDS, |w| {
        writeln!(w, "{},{}", TRACE_COLUMNS.join(","), EXTRA_COLUMNS.join(","))?;
        for r in records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.step,
                r.t,
                r.lambda,
                r.area,
                r.perimeter,
                r.kappa_dev,
                r.kappa_lambda_dev,
                r.hausdorff,
                r.el_residual_median,
                r.n_contours,
                r.tie_measure,
                r.solver_gap,
                r.solver_iters,
                r.solver_rel_gap,
                r.max_prev_distance,
                r.kappa_p99
            )?;
        }
        Ok(())
    })?;
    out.write("contours.csv", |w| {
        writeln!(w, "step,contour,total_curvature")?;
        for r in records {
            for (i, k) in r.total_curvatures.iter().enumerate() {
                writeln!(w, "{},{i},{k}", r.step)?;
            }
        }
        Ok(())
    })
}

fn write_regions<'a>(out: &mut Outputs, regions: impl IntoIterator<Item = (usize, &'a Region)>) -> CliResult<()> {
    for (k, region) in regions {
        out.write(&snapshot_name(k, "bin"), |w| region.level_set().write_binary(w))?;
        out.write(&snapshot_name(k, "pgm"), |w| region.level_set().write_pgm(w))?;
    }
    Ok(())
}

/// Runs the flow of `cfg`, keeping the regions its probes need. On failure
/// the records completed so far are returned with the error.
fn simulate(cfg: &ScenarioConfig) -> (Vec<StepRecord>, CliResult<FlowTrace>) {
    let mut records = Vec::new();
    let result = (|| {
        let grid = cfg.grid()?;
        let e0 = generate_initial(&grid, &cfg.shape()?, cfg.shape.area)?;
        let opts = FlowOptions {
            step: cfg.step_options(),
            snapshot_every: cfg.output.snapshot_every,
            keep_last: cfg.output.keep_last,
        };
        let wanted: BTreeSet<usize> = cfg.probe_steps().into_iter().collect();
        let mut kept = Vec::new();
        let mut trace =
            run_flow_with(&e0, cfg.flow.h, cfg.flow.steps, cfg.shape.area, cfg.mode(), &opts, |rec, region| {
                records.push(rec.clone());
                if wanted.contains(&rec.step) {
                    kept.push((rec.step, region.clone()));
                }
            })?;
        for (k, region) in kept {
            if trace.region_at(k).is_none() {
                trace.snapshots.push((k, region));
            }
        }
        trace.snapshots.sort_by_key(|s| s.0);
        Ok(trace)
    })();
    (records, result)
}

fn stored_regions(trace: &FlowTrace) -> Vec<(usize, &Region)> {
    let mut all: BTreeMap<usize, &Region> = BTreeMap::new();
    for (k, r) in trace.snapshots.iter().chain(&trace.recent) {
        all.entry(*k).or_insert(r);
    }
    all.into_iter().collect()
}

/// `run <config>`: the flow, every configured diagnostic, and the manifest.
pub fn run_scenario(cfg: &ScenarioConfig) -> CliResult<()> {
    cfg.validate()?;
    with_outputs(cfg, "run", |out| {
        let (records, result) = simulate(cfg);
        write_records(out, &records, cfg.flow.h)?;
        let trace = result?;
        write_regions(out, stored_regions(&trace))?;
        write_diagnostics(out, cfg, &trace)?;
        if !cfg.diagnostics.excess.is_empty() {
            let probes = cfg
                .diagnostics
                .excess
                .iter()
                .map(|p| Ok((p.point, excess_levels(&trace, p)?)))
                .collect::<CliResult<Vec<_>>>()?;
            out.write("excess_probe.csv", |w| write_decay_csv(w, &probes))?;
        }
        if let Some(hc) = &cfg.diagnostics.harnack {
            harnack_outputs(out, cfg, hc, Some(&trace))?;
        }
        Ok(())
    })
}

fn write_diagnostics(out: &mut Outputs, cfg: &ScenarioConfig, trace: &FlowTrace) -> CliResult<()> {
    if cfg.diagnostics.apriori {
        let rep = apriori_report(trace);
        out.write("apriori.csv", |w| rep.write_csv(w, trace))?;
    }
    if let Some(GoodTimesConfig { t_start, eps0, delta0 }) = cfg.diagnostics.good_times {
        let gt = good_times(trace, t_start, eps0, delta0)?;
        out.write("good_times.csv", |w| gt.write_csv(w))?;
    }
    Ok(())
}

fn excess_levels(trace: &FlowTrace, p: &ExcessProbeConfig) -> CliResult<Vec<DecayLevel>> {
    let t0 = p.t0.unwrap_or_else(|| final_time(trace));
    Ok(decay_probe(trace, p.point, t0, p.r, p.sigma, p.alpha, p.depth, p.c0)?)
}

fn final_time(trace: &FlowTrace) -> f64 {
    trace.records.last().map_or(0.0, |r| r.t)
}

/// `w_r^-` on the window `(t0 - r^2, t0]` at the frame fitted at `point`,
/// in rescaled coordinates.
pub fn flow_w_minus(trace: &FlowTrace, point: [f64; 2], t0: f64, r: f64, alpha: f64) -> CliResult<SpaceTimeField> {
    let lambda = lambda_accumulate(trace, t0)?;
    let mut slices = Vec::new();
    for k in window_steps(lambda.k0, trace.h, r) {
        let region = trace
            .region_at(k)
            .ok_or_else(|| Error::InvalidArgument(format!("region at step {k} was not kept")))?;
        slices.push((k, region));
    }
    let cyl = Cylinder::with_radius(r)?;
    let fit = fit_frame(&slices, point, &cyl, &lambda, None)?;
    let spacing = slices[0].1.grid().spacing();
    let n = default_base_count(r, spacing);
    let v = rescale_v(&slices, &fit.frame, r, &cyl, &lambda, alpha, n)?;
    let (wm, _) = perturb_w(&v, &lambda);
    let base = BaseLattice::line(n, v.y[0], v.y[n - 1])?;
    Ok(SpaceTimeField::new(base, v.times[0], trace.h / (r * r), wm)?)
}

/// Caloric polynomial plus one to three convex bumps drawn from the seed.
pub fn synthetic_field(cfg: &ScenarioConfig, n: usize) -> CliResult<SpaceTimeField> {
    let mut rng = cfg.rng();
    let c = [rng.gen_range(0.0..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(-0.5..0.5)];
    let nb = rng.gen_range(1..4);
    let bumps = (0..nb).map(|_| (rng.gen_range(-0.8..0.8), rng.gen_range(0.1..1.0))).collect();
    Ok(CaloricBumps { c, bumps }.field(n)?)
}

fn harnack_outputs(
    out: &mut Outputs,
    cfg: &ScenarioConfig,
    hc: &HarnackConfig,
    trace: Option<&FlowTrace>,
) -> CliResult<()> {
    let w = match hc.source {
        HarnackSource::Synthetic => synthetic_field(cfg, hc.n)?,
        HarnackSource::Flow => {
            let trace = trace.ok_or_else(|| CliError::Config("harnack flow source without a run".into()))?;
            let (point, r) = (hc.point.unwrap_or_default(), hc.r.unwrap_or_default());
            flow_w_minus(trace, point, hc.t0.unwrap_or_else(|| final_time(trace)), r, hc.alpha)?
        }
    };
    let g = CenterBox { lo: [hc.xi[0], 0.0], hi: [hc.xi[1], 0.0], tau_lo: hc.tau[0], tau_hi: hc.tau[1] };
    let report = match abp_ratio(hc.a, &g, &w, Window::all(&w), hc.samples) {
        Ok(r) => Some(r),
        Err(Error::EmptyContactSet) => None,
        Err(e) => return Err(e.into()),
    };
    out.write("harnack_summary.csv", |o| write_abp_summary(o, hc.a, report.as_ref()))?;
    let contacts = report.as_ref().map(|r| r.contacts.clone()).unwrap_or_default();
    out.write("harnack.csv", |o| contacts.write_csv(o, &w))?;
    let t_last = w.time(w.slices() - 1);
    let rows: Vec<_> = [1.0, 0.5, 0.25]
        .iter()
        .map(|&rho| ([0.0, 0.0], t_last, rho, contacts.density_in(&w, [0.0, 0.0], t_last, rho)))
        .collect();
    out.write("harnack_density.csv", |o| write_density_csv(o, &rows))
}

fn write_abp_summary(out: &mut dyn Write, a: f64, rep: Option<&AbpReport>) -> flatflow::Result<()> {
    writeln!(out, "a,ratio,box_ratio,g_measure,touching_fraction,a_measure,outside_regime")?;
    match rep {
        Some(r) => writeln!(
            out,
            "{a},{},{},{},{},{},{}",
            r.ratio,
            r.box_ratio,
            r.g_measure,
            r.touching_fraction,
            r.a_measure,
            u8::from(r.outside_regime)
        )?,
        None => writeln!(out, "{a},NaN,NaN,NaN,0,0,0")?,
    }
    Ok(())
}

/// `probe-harnack <config>`: only the contact-set probe, running the flow
/// first when the field comes from it.
pub fn probe_harnack(cfg: &ScenarioConfig) -> CliResult<()> {
    cfg.validate()?;
    let hc = cfg
        .diagnostics
        .harnack
        .clone()
        .ok_or_else(|| CliError::Config("no [diagnostics.harnack] section".into()))?;
    with_outputs(cfg, "probe-harnack", |out| {
        let trace = match hc.source {
            HarnackSource::Flow => Some(simulate(cfg).1?),
            HarnackSource::Synthetic => None,
        };
        harnack_outputs(out, cfg, &hc, trace.as_ref())
    })
}

/// Rebuilds the trace of a finished run directory: the echoed config, the
/// per-step records and every stored region.
pub fn load_run(dir: &Path) -> CliResult<(ScenarioConfig, FlowTrace)> {
    let text = fs::read_to_string(dir.join(CONFIG_ECHO))
        .map_err(|e| CliError::Config(format!("{}: {e}", dir.join(CONFIG_ECHO).display())))?;
    let mut cfg = ScenarioConfig::parse(&text)?;
    cfg.output.dir = dir.to_path_buf();
    let records = read_records(&fs::read_to_string(dir.join(RECORDS))?)?;
    let mut snapshots = Vec::new();
    let snap_dir = dir.join(SNAPSHOT_DIR);
    if snap_dir.is_dir() {
        let mut names: Vec<PathBuf> = fs::read_dir(&snap_dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        names.sort();
        for path in names.iter().filter(|p| p.extension().is_some_and(|e| e == "bin")) {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let step: usize = stem
                .strip_prefix("step_")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Format(format!("snapshot name {}", path.display())))?;
            let field = GridField::read_binary(BufReader::new(File::open(path)?))?;
            snapshots.push((step, Region::from_level_set(field)));
        }
    }
    let trace = FlowTrace {
        h: cfg.flow.h,
        v: cfg.shape.area,
        mode: cfg.mode(),
        records,
        snapshots,
        recent: Vec::new(),
        truncated: None,
    };
    Ok((cfg, trace))
}

fn read_records(text: &str) -> CliResult<Vec<StepRecord>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let expected: Vec<&str> = TRACE_COLUMNS.iter().chain(&EXTRA_COLUMNS).copied().collect();
    if header != expected {
        return Err(Error::Format(format!("{RECORDS} header {header:?}")).into());
    }
    let bad = |line: &str| Error::Format(format!("{RECORDS} row `{line}`"));
    let mut records = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != expected.len() {
            return Err(bad(line).into());
        }
        let real = |i: usize| f[i].parse::<f64>().map_err(|_| bad(line));
        let int = |i: usize| f[i].parse::<usize>().map_err(|_| bad(line));
        records.push(StepRecord {
            step: int(0)?,
            t: real(1)?,
            lambda: real(2)?,
            area: real(3)?,
            perimeter: real(4)?,
            kappa_dev: real(5)?,
            kappa_lambda_dev: real(6)?,
            hausdorff: real(7)?,
            el_residual_median: real(8)?,
            n_contours: int(9)?,
            tie_measure: real(10)?,
            solver_gap: real(11)?,
            solver_iters: int(12)?,
            solver_rel_gap: real(13)?,
            max_prev_distance: real(14)?,
            kappa_p99: real(15)?,
            total_curvatures: Vec::new(),
        });
    }
    Ok(records)
}

/// `diagnose <trace-dir>`: recomputes apriori.csv and good_times.csv in
/// place. `good` overrides the configured good-times parameters.
pub fn diagnose(dir: &Path, good: Option<GoodTimesConfig>) -> CliResult<()> {
    let (mut cfg, trace) = load_run(dir)?;
    cfg.diagnostics.apriori = true;
    if good.is_some() {
        cfg.diagnostics.good_times = good;
    }
    let mut out = Outputs::create(dir)?;
    write_diagnostics(&mut out, &cfg, &trace)
}

/// `probe-excess <trace-dir>`: decay probe on stored regions, written to
/// `excess_probe.csv` in the run directory.
pub fn probe_excess(dir: &Path, probe: &ExcessProbeConfig) -> CliResult<Vec<DecayLevel>> {
    let (_, trace) = load_run(dir)?;
    let levels = excess_levels(&trace, probe)?;
    let mut out = Outputs::create(dir)?;
    out.write("excess_probe.csv", |w| write_decay_csv(w, &[(probe.point, levels.clone())]))?;
    Ok(levels)
}
