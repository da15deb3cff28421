//! End-to-end experiment pipeline: sample a scenario, integrate it, track
//! the front and the stream-function modulus along the way, and leave a
//! self-contained artifact bundle on disk.
//!
//! Bundle layout under `output_dir`:
//!   config.txt        full config echo, defaults included
//!   diagnostics.csv   one row per snapshot
//!   boundfit.json     fitted collapse envelope, when a fit was possible
//!   pairs.csv         modulus probe dump, when requested
//!   checkpoints/      resumable solver states
//!   abort.txt         present only when the run aborted
//!   manifest.txt      run summary; its wall-clock line is the only
//!                     nondeterministic byte in the bundle
//!
//! Rerunning the same config overwrites the same files, so bundles can be
//! diffed byte-for-byte (manifest aside).

use crate::config::{dump_config, parse_config, RunConfig};
use crate::error::{Error, Result};
use crate::evolve::{self, SimulationState};
use crate::field::Equation;
use crate::front::{
    extract_level_curve, fit_bound_envelope, BoundFit, BoundModel, FrontDiagnostics, GronwallInputs,
};
use crate::grid::Grid;
use crate::modulus::{estimate_modulus, probe_pairs, FocusRegion, PointPair, SamplingPlan};
use crate::scenario::find_scenario;
use std::fmt;
use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Version stamped into every bundle file this module writes.
pub const BUNDLE_FORMAT_VERSION: u32 = 1;

/// Snapshots between periodic checkpoints.
const CHECKPOINT_STRIDE: usize = 10;

/// A front thinner than this many cells is unresolved; the run stops there.
const RESOLUTION_EXIT_CELLS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbortKind {
    /// Integration failed: non-finite field or CFL step underflow.
    Solver,
    /// The level-curve ansatz broke: no crossing or a fold in the window.
    Front,
}

impl fmt::Display for AbortKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AbortKind::Solver => "solver",
            AbortKind::Front => "front",
        })
    }
}

#[derive(Debug, Clone)]
pub struct AbortRecord {
    pub kind: AbortKind,
    pub t: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ReachedEnd,
    /// delta_min fell below the resolvable scale.
    ResolutionLimit,
    /// The tracked area reached zero: the curves touched.
    Collapsed,
    Aborted,
}

impl StopReason {
    fn label(&self) -> &'static str {
        match self {
            StopReason::ReachedEnd => "reached-end",
            StopReason::ResolutionLimit => "resolution-limit",
            StopReason::Collapsed => "collapsed",
            StopReason::Aborted => "aborted",
        }
    }
}

/// One diagnostics row: always a time and the velocity-sup integral, front
/// and modulus values when those pipelines ran at this snapshot.
#[derive(Debug, Clone)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub u_sup_integral: f64,
    pub front: Option<FrontDiagnostics>,
    pub m_hat: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExperimentOptions {
    /// Also write pairs.csv with every modulus probe (z1, z2, tau, psi
    /// difference, ratio).
    pub pair_dump: bool,
}

/// What a run left behind, mirrored in the bundle on disk.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub bundle_dir: PathBuf,
    pub rows: Vec<DiagnosticsRow>,
    pub fit: Option<BoundFit>,
    pub stop: StopReason,
    pub abort: Option<AbortRecord>,
    pub final_t: f64,
    pub steps: u64,
}

fn classify_abort(e: &Error) -> Option<AbortKind> {
    match e {
        Error::Blowup { .. } | Error::DtUnderflow { .. } | Error::NonFinite { .. } => {
            Some(AbortKind::Solver)
        }
        Error::NoCrossing { .. } | Error::NonGraph { .. } | Error::BadWindow { .. } => {
            Some(AbortKind::Front)
        }
        _ => None,
    }
}

/// Remove every artifact a previous run may have left, keeping unrelated
/// files in the directory alone.
fn clean_bundle(dir: &Path) -> Result<()> {
    for name in [
        "config.txt",
        "diagnostics.csv",
        "boundfit.json",
        "pairs.csv",
        "abort.txt",
        "manifest.txt",
    ] {
        let p = dir.join(name);
        if p.exists() {
            fs::remove_file(&p)?;
        }
    }
    let ckpts = dir.join("checkpoints");
    if ckpts.exists() {
        fs::remove_dir_all(&ckpts)?;
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn diagnostics_csv(rows: &[DiagnosticsRow], equation: Equation, with_modulus: bool) -> String {
    let mut out = format!("# format-version = {BUNDLE_FORMAT_VERSION}\n");
    out.push_str("t,delta_min,delta_max,c,area_a,flux_f,u_sup_integral,loglog_a");
    if with_modulus {
        out.push_str(match equation {
            Equation::Qg => ",m_hat",
            Equation::Euler => ",m_lip",
        });
    }
    out.push('\n');
    for row in rows {
        let f = row.front.as_ref();
        out.push_str(&format!(
            "{:e},{},{},{},{},{},{:e},{}",
            row.t,
            fmt_opt(f.map(|d| d.delta_min)),
            fmt_opt(f.map(|d| d.delta_max)),
            fmt_opt(f.map(|d| d.semi_uniformity_c)),
            fmt_opt(f.map(|d| d.area_a)),
            fmt_opt(f.map(|d| d.flux_f)),
            row.u_sup_integral,
            fmt_opt(f.and_then(|d| d.loglog_area())),
        ));
        if with_modulus {
            out.push(',');
            out.push_str(&fmt_opt(row.m_hat));
        }
        out.push('\n');
    }
    out
}

fn pairs_csv(rows: &[(f64, crate::modulus::PairProbe)]) -> String {
    let mut out = format!("# format-version = {BUNDLE_FORMAT_VERSION}\n");
    out.push_str("t,z1_x1,z1_x2,z2_x1,z2_x2,tau,psi_diff,ratio\n");
    for (t, p) in rows {
        out.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            t,
            p.pair.z1().0,
            p.pair.z1().1,
            p.pair.z2().0,
            p.pair.z2().1,
            p.pair.tau(),
            p.psi_diff,
            p.ratio
        ));
    }
    out
}

fn boundfit_json(fit: &BoundFit) -> Result<String> {
    let mut obj = serde_json::Map::new();
    obj.insert(
        "format-version".into(),
        serde_json::Value::from(BUNDLE_FORMAT_VERSION),
    );
    let fit_value = serde_json::to_value(fit).map_err(|e| Error::Malformed {
        what: "bound-fit record",
        detail: e.to_string(),
    })?;
    if let serde_json::Value::Object(m) = fit_value {
        obj.extend(m);
    }
    let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(obj)).map_err(|e| {
        Error::Malformed {
            what: "bound-fit record",
            detail: e.to_string(),
        }
    })?;
    text.push('\n');
    Ok(text)
}

/// Run an experiment from its initial condition. See the module docs for the
/// bundle layout; aborts still produce a parseable partial bundle.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentOutcome> {
    run_experiment_with(config, &ExperimentOptions::default())
}

pub fn run_experiment_with(
    config: &RunConfig,
    options: &ExperimentOptions,
) -> Result<ExperimentOutcome> {
    let scenario = find_scenario(&config.scenario)
        .ok_or_else(|| Error::Config(vec![format!("unknown scenario '{}'", config.scenario)]))?;
    let grid = Grid::new(config.resolution.0, config.resolution.1)?;
    let sampled = scenario.sample(grid, config.equation, &config.scenario_params)?;
    let state = SimulationState::new(sampled.field)?;
    run_pipeline(config, options, state, sampled.mean_shift)
}

/// Continue an experiment from a checkpoint, integrating toward the config's
/// t_end and writing a fresh bundle from the resume point onward.
pub fn resume_experiment(
    config: &RunConfig,
    checkpoint: &Path,
    options: &ExperimentOptions,
) -> Result<ExperimentOutcome> {
    let state = evolve::read_checkpoint(checkpoint)?;
    if state.q().kind() != config.equation {
        return Err(Error::BundleMismatch(format!(
            "checkpoint holds a {} state but the config says {}",
            state.q().kind().name(),
            config.equation.name()
        )));
    }
    let g = state.q().grid();
    if (g.n1(), g.n2()) != config.resolution {
        return Err(Error::BundleMismatch(format!(
            "checkpoint grid {}x{} does not match configured resolution {}x{}",
            g.n1(),
            g.n2(),
            config.resolution.0,
            config.resolution.1
        )));
    }
    run_pipeline(config, options, state, f64::NAN)
}

fn run_pipeline(
    config: &RunConfig,
    options: &ExperimentOptions,
    mut state: SimulationState,
    mean_shift: f64,
) -> Result<ExperimentOutcome> {
    let wall = Instant::now();
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir)?;
    clean_bundle(&dir)?;
    let ckpt_dir = dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;
    fs::write(dir.join("config.txt"), dump_config(config))?;

    let grid = state.q().grid();
    let pairs: Vec<PointPair> = match &config.modulus {
        Some(m) => SamplingPlan {
            pair_count: m.pair_count,
            seed: config.seed,
            tau_floor: m.tau_floor,
            tau_max: m.tau_max,
            focus: config.front.map(|f| FocusRegion {
                x1: f.window,
                x2: f.bracket,
            }),
        }
        .generate()?,
        None => Vec::new(),
    };

    let mut rows: Vec<DiagnosticsRow> = Vec::new();
    let mut pair_rows: Vec<(f64, crate::modulus::PairProbe)> = Vec::new();
    let mut stop = StopReason::ReachedEnd;
    let mut snapshot_index = 0usize;
    let mut next_modulus_mark: u64 = 0;

    let observe = |st: &SimulationState| -> Result<ControlFlow<()>> {
        let t = st.t();
        let needs_psi = config.front.is_some() || config.modulus.is_some();
        let psi = if needs_psi {
            Some(st.q().stream_function()?)
        } else {
            None
        };

        let front = match &config.front {
            Some(fc) => {
                let psi = psi.as_ref().expect("stream function computed above");
                let q_spec = st.q().to_spectral();
                let c1 = extract_level_curve(&q_spec, fc.g1, fc.window, fc.bracket)?
                    .with_rho_label(fc.g1);
                let c2 = extract_level_curve(&q_spec, fc.g2, fc.window, fc.bracket)?
                    .with_rho_label(fc.g2);
                Some(FrontDiagnostics::measure(
                    t,
                    st.u_sup_integral(),
                    psi,
                    &c1,
                    &c2,
                )?)
            }
            None => None,
        };

        let mut m_hat = None;
        if let Some(mc) = &config.modulus {
            let mark = (t / mc.interval).round();
            let due = (t - mark * mc.interval).abs() < 1e-9 && mark as u64 >= next_modulus_mark;
            if due {
                next_modulus_mark = mark as u64 + 1;
                let psi = psi.as_ref().expect("stream function computed above");
                let est = estimate_modulus(psi, config.equation, &pairs)?;
                m_hat = Some(est.m_hat);
                if options.pair_dump {
                    for probe in probe_pairs(psi, config.equation, &pairs) {
                        pair_rows.push((t, probe));
                    }
                }
            }
        }

        if snapshot_index > 0 && snapshot_index.is_multiple_of(CHECKPOINT_STRIDE) {
            evolve::write_checkpoint(st, &ckpt_dir.join(format!("snap{snapshot_index:05}.ckpt")))?;
        }
        snapshot_index += 1;

        rows.push(DiagnosticsRow {
            t,
            u_sup_integral: st.u_sup_integral(),
            front,
            m_hat,
        });

        if let Some(f) = &rows.last().expect("just pushed").front {
            if f.area_a <= 0.0 {
                stop = StopReason::Collapsed;
                return Ok(ControlFlow::Break(()));
            }
            if f.delta_min < RESOLUTION_EXIT_CELLS * grid.h_min() {
                stop = StopReason::ResolutionLimit;
                return Ok(ControlFlow::Break(()));
            }
        }
        Ok(ControlFlow::Continue(()))
    };

    let run_result = {
        let mut observe = observe;
        evolve::run(&mut state, &config.solver, &mut observe)
    };
    let abort = match run_result {
        Ok(_) => None,
        Err(e) => match classify_abort(&e) {
            Some(kind) => {
                stop = StopReason::Aborted;
                Some(AbortRecord {
                    kind,
                    t: state.t(),
                    detail: e.to_string(),
                })
            }
            None => return Err(e),
        },
    };

    evolve::write_checkpoint(&state, &ckpt_dir.join("final.ckpt"))?;
    fs::write(
        dir.join("diagnostics.csv"),
        diagnostics_csv(&rows, config.equation, config.modulus.is_some()),
    )?;
    if options.pair_dump && !pair_rows.is_empty() {
        fs::write(dir.join("pairs.csv"), pairs_csv(&pair_rows))?;
    }

    let area_series: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.front.as_ref().map(|f| (r.t, f.area_a)))
        .collect();
    let fit = if area_series.len() >= 2 {
        let model = match config.equation {
            Equation::Qg => BoundModel::DoubleExponential,
            Equation::Euler => BoundModel::Exponential,
        };
        let last_m = rows.iter().rev().find_map(|r| r.m_hat);
        let gronwall = last_m.map(|m| GronwallInputs {
            modulus_constant: m,
            c_min: rows
                .iter()
                .filter_map(|r| r.front.as_ref().map(|f| f.semi_uniformity_c))
                .fold(f64::INFINITY, f64::min),
            front_length: rows
                .iter()
                .find_map(|r| r.front.as_ref().map(|f| f.front_length))
                .expect("area series implies front rows"),
        });
        match fit_bound_envelope(&area_series, model, gronwall.as_ref()) {
            Ok(f) => Some(f),
            Err(Error::Unfittable { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    if let Some(f) = &fit {
        fs::write(dir.join("boundfit.json"), boundfit_json(f)?)?;
    }

    if let Some(a) = &abort {
        fs::write(
            dir.join("abort.txt"),
            format!(
                "format-version = {BUNDLE_FORMAT_VERSION}\nkind = {}\nt = {}\ndetail = {}\n",
                a.kind, a.t, a.detail
            ),
        )?;
    }

    let mut manifest = String::new();
    manifest.push_str(&format!("format-version = {BUNDLE_FORMAT_VERSION}\n"));
    manifest.push_str(&format!("code-version = {}\n", env!("CARGO_PKG_VERSION")));
    manifest.push_str(&format!("scenario = {}\n", config.scenario));
    manifest.push_str(&format!("equation = {}\n", config.equation.name()));
    manifest.push_str(&format!(
        "resolution = {} {}\n",
        config.resolution.0, config.resolution.1
    ));
    if mean_shift.is_finite() {
        manifest.push_str(&format!("mean-shift = {mean_shift:e}\n"));
    }
    manifest.push_str(&format!("stop = {}\n", stop.label()));
    manifest.push_str(&format!("final-t = {}\n", state.t()));
    manifest.push_str(&format!("steps = {}\n", state.step_count()));
    manifest.push_str(&format!(
        "wall-clock-seconds = {:.3}\n",
        wall.elapsed().as_secs_f64()
    ));
    fs::write(dir.join("manifest.txt"), manifest)?;

    Ok(ExperimentOutcome {
        bundle_dir: dir,
        rows,
        fit,
        stop,
        abort,
        final_t: state.t(),
        steps: state.step_count(),
    })
}

/// A bundle read back from disk, as `compare_runs` consumes it.
#[derive(Debug)]
pub struct Bundle {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub fit: Option<BoundFit>,
}

pub fn read_bundle(dir: &Path) -> Result<Bundle> {
    let config = parse_config(&fs::read_to_string(dir.join("config.txt"))?)?;
    let text = fs::read_to_string(dir.join("diagnostics.csv"))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l.trim() == format!("# format-version = {BUNDLE_FORMAT_VERSION}") => {}
        other => {
            return Err(Error::Malformed {
                what: "diagnostics CSV",
                detail: format!("bad or missing format-version line: {other:?}"),
            })
        }
    }
    let header: Vec<String> = lines
        .next()
        .ok_or(Error::Malformed {
            what: "diagnostics CSV",
            detail: "missing header".into(),
        })?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<Option<f64>> = line
            .split(',')
            .map(|c| {
                if c.is_empty() {
                    Ok(None)
                } else {
                    c.parse::<f64>().map(Some).map_err(|_| Error::Malformed {
                        what: "diagnostics CSV",
                        detail: format!("bad number '{c}'"),
                    })
                }
            })
            .collect::<Result<_>>()?;
        if cells.len() != header.len() {
            return Err(Error::Malformed {
                what: "diagnostics CSV",
                detail: format!("row has {} cells, header has {}", cells.len(), header.len()),
            });
        }
        rows.push(cells);
    }
    let fit_path = dir.join("boundfit.json");
    let fit = if fit_path.exists() {
        let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&fit_path)?)
            .map_err(|e| Error::Malformed {
                what: "bound-fit record",
                detail: e.to_string(),
            })?;
        if value.get("format-version").and_then(|v| v.as_u64())
            != Some(BUNDLE_FORMAT_VERSION as u64)
        {
            return Err(Error::Malformed {
                what: "bound-fit record",
                detail: "bad or missing format-version".into(),
            });
        }
        Some(serde_json::from_value(value).map_err(|e| Error::Malformed {
            what: "bound-fit record",
            detail: e.to_string(),
        })?)
    } else {
        None
    };
    Ok(Bundle {
        dir: dir.to_path_buf(),
        config,
        header,
        rows,
        fit,
    })
}

impl Bundle {
    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Last non-empty value in a column.
    fn last_value(&self, name: &str) -> Option<f64> {
        let i = self.column(name)?;
        self.rows.iter().rev().find_map(|r| r[i])
    }
}

/// One bundle's summary line in a comparison.
#[derive(Debug, Clone)]
pub struct CompareRow {
    pub dir: String,
    pub resolution: (usize, usize),
    pub dt_init: f64,
    pub final_t: Option<f64>,
    pub area: Option<f64>,
    pub delta_min: Option<f64>,
    pub m_hat: Option<f64>,
    pub a_hat: Option<f64>,
    pub b_hat: Option<f64>,
}

#[derive(Debug)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
    /// Convergence notes: Richardson ratios across dt halvings, modulus
    /// agreement across resolutions.
    pub annotations: Vec<String>,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<24} {:>9} {:>10} {:>8} {:>12} {:>12} {:>12} {:>12} {:>12}",
            "bundle", "grid", "dt_init", "final_t", "area", "delta_min", "m_hat", "a_hat", "b_hat"
        )?;
        let show = |v: Option<f64>| match v {
            Some(x) => format!("{x:.4e}"),
            None => "-".into(),
        };
        for r in &self.rows {
            writeln!(
                f,
                "{:<24} {:>9} {:>10} {:>8} {:>12} {:>12} {:>12} {:>12} {:>12}",
                r.dir,
                format!("{}x{}", r.resolution.0, r.resolution.1),
                format!("{}", r.dt_init),
                r.final_t.map(|t| format!("{t:.3}")).unwrap_or("-".into()),
                show(r.area),
                show(r.delta_min),
                show(r.m_hat),
                show(r.a_hat),
                show(r.b_hat),
            )?;
        }
        for a in &self.annotations {
            writeln!(f, "note: {a}")?;
        }
        Ok(())
    }
}

/// Summarize bundles side by side. All bundles must share a scenario and
/// equation; rows keep the caller's order.
pub fn compare_runs(dirs: &[PathBuf]) -> Result<Comparison> {
    if dirs.is_empty() {
        return Err(Error::Malformed {
            what: "comparison",
            detail: "no bundles given".into(),
        });
    }
    let bundles: Vec<Bundle> = dirs.iter().map(|d| read_bundle(d)).collect::<Result<_>>()?;
    let first = &bundles[0].config;
    for b in &bundles[1..] {
        if b.config.scenario != first.scenario || b.config.equation != first.equation {
            return Err(Error::BundleMismatch(format!(
                "bundle {} runs {}/{} but {} runs {}/{}",
                b.dir.display(),
                b.config.scenario,
                b.config.equation.name(),
                bundles[0].dir.display(),
                first.scenario,
                first.equation.name()
            )));
        }
    }

    let rows: Vec<CompareRow> = bundles
        .iter()
        .map(|b| CompareRow {
            dir: b.dir.display().to_string(),
            resolution: b.config.resolution,
            dt_init: b.config.solver.dt_init,
            final_t: b.last_value("t"),
            area: b.last_value("area_a"),
            delta_min: b.last_value("delta_min"),
            m_hat: b.last_value("m_hat").or_else(|| b.last_value("m_lip")),
            a_hat: b.fit.map(|f| f.a_hat),
            b_hat: b.fit.map(|f| f.b_hat),
        })
        .collect();

    let mut annotations = Vec::new();
    // Richardson ratios: consecutive dt-halving triples at a shared grid.
    for w in rows.windows(3) {
        let same_grid = w[0].resolution == w[1].resolution && w[1].resolution == w[2].resolution;
        let halving = (w[0].dt_init / w[1].dt_init - 2.0).abs() < 1e-9
            && (w[1].dt_init / w[2].dt_init - 2.0).abs() < 1e-9;
        if let (true, true, Some(a0), Some(a1), Some(a2)) =
            (same_grid, halving, w[0].area, w[1].area, w[2].area)
        {
            let denom = (a1 - a2).abs();
            if denom > 0.0 {
                annotations.push(format!(
                    "Richardson ratio on final area, dt {} / {} / {}: {:.2}",
                    w[0].dt_init,
                    w[1].dt_init,
                    w[2].dt_init,
                    (a0 - a1).abs() / denom
                ));
            }
        }
    }
    // Modulus agreement across resolutions.
    for w in rows.windows(2) {
        if let (Some(m0), Some(m1)) = (w[0].m_hat, w[1].m_hat) {
            if w[0].resolution != w[1].resolution && m0.max(m1) > 0.0 {
                annotations.push(format!(
                    "modulus constant {}x{} vs {}x{}: relative difference {:.2}%",
                    w[0].resolution.0,
                    w[0].resolution.1,
                    w[1].resolution.0,
                    w[1].resolution.1,
                    100.0 * (m0 - m1).abs() / m0.max(m1)
                ));
            }
        }
    }

    Ok(Comparison { rows, annotations })
}
