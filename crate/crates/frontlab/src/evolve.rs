//! RK4 time integration of the transport equation (d/dt + u.grad) q = 0,
//! with CFL step control, two-thirds dealiasing, optional hyperviscous
//! dissipation, snapshot scheduling, and binary checkpoints.

use crate::error::{Error, Result};
use crate::fft;
use crate::field::{Axis2, Equation, ScalarField};
use crate::grid::Grid;
use ndarray::Array2;
use std::io::{Read as _, Write as _};
use std::ops::ControlFlow;
use std::path::Path;

/// Velocity floor in the CFL rule; keeps dt finite for near-rest states.
const U_SUP_FLOOR: f64 = 1e-8;

/// CFL steps below this signal velocity blow-up at the current resolution.
const DT_MIN: f64 = 1e-10;

/// Times within this of a snapshot boundary are snapped onto it, so resumed
/// runs see bit-identical schedules.
const SNAP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dealias {
    TwoThirds,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dissipation {
    None,
    /// Adds -nu (-Lap)^p q to the tendency. Explicit integration: stable only
    /// while nu * dt * |k_max|^(2p) stays below the RK4 real-axis limit (~2.8).
    Hyperviscous {
        nu: f64,
        p: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt_init: f64,
    pub cfl: f64,
    /// Absolute target time; a resumed state keeps integrating toward it.
    pub t_end: f64,
    pub dealias: Dealias,
    pub dissipation: Dissipation,
    pub snapshot_interval: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt_init: 1e-2,
            cfl: 0.5,
            t_end: 1.0,
            dealias: Dealias::TwoThirds,
            dissipation: Dissipation::None,
            snapshot_interval: 0.05,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.dt_init > 0.0 && self.dt_init.is_finite()) {
            problems.push(format!("dt_init must be positive, got {}", self.dt_init));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            problems.push(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            problems.push(format!("t_end must be finite and >= 0, got {}", self.t_end));
        }
        if !(self.snapshot_interval > 0.0 && self.snapshot_interval.is_finite()) {
            problems.push(format!(
                "snapshot_interval must be positive, got {}",
                self.snapshot_interval
            ));
        }
        if let Dissipation::Hyperviscous { nu, p } = self.dissipation {
            if !(nu >= 0.0 && nu.is_finite()) {
                problems.push(format!("dissipation nu must be >= 0, got {nu}"));
            }
            if p == 0 {
                problems.push("dissipation order p must be >= 1".into());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Tendency dq/dt = -u.grad q (+ optional dissipation), evaluated
/// pseudo-spectrally: velocity and gradients in spectral space, the product
/// in physical space, the product's transform dealiased and mean-zeroed.
pub fn rhs(q: &ScalarField, cfg: &SolverConfig) -> Result<ScalarField> {
    rhs_signed(q, cfg, 1.0)
}

/// `sign` multiplies the velocity coupling: -1 plays the inviscid transport
/// backwards while t still advances.
fn rhs_signed(q: &ScalarField, cfg: &SolverConfig, sign: f64) -> Result<ScalarField> {
    let mut qs = q.to_spectral();
    if cfg.dealias == Dealias::TwoThirds {
        qs.dealias_two_thirds();
    }
    let psi = qs.invert_fractional_laplacian(q.kind().inversion_power())?;
    let minus_dpsi_dx2 = psi.derivative(Axis2::X2).scaled(-1.0);
    let u1 = fft::inverse(minus_dpsi_dx2.modes());
    let u2 = fft::inverse(psi.derivative(Axis2::X1).modes());
    let g1 = fft::inverse(qs.derivative(Axis2::X1).modes());
    let g2 = fft::inverse(qs.derivative(Axis2::X2).modes());

    let mut product = Array2::zeros(u1.dim());
    ndarray::azip!((f in &mut product, &a in &u1, &b in &u2, &c in &g1, &d in &g2) {
        *f = -sign * (a * c + b * d);
    });

    let mut out = crate::field::SpectralCoeffs::from_modes(q.grid(), fft::forward(&product))?;
    if cfg.dealias == Dealias::TwoThirds {
        out.dealias_two_thirds();
    }
    out.zero_mean_mode();
    if let Dissipation::Hyperviscous { nu, p } = cfg.dissipation {
        if nu > 0.0 {
            let mut modes = out.modes().clone();
            for ((i1, i2), c) in modes.indexed_iter_mut() {
                let k1 = q.grid().k1(i1) as f64;
                let k2 = q.grid().k2(i2) as f64;
                let k_sq = k1 * k1 + k2 * k2;
                *c -= nu * k_sq.powi(p as i32) * qs.modes()[(i1, i2)];
            }
            out = crate::field::SpectralCoeffs::from_modes(q.grid(), modes)?;
        }
    }
    Ok(out.to_field(q.kind()))
}

/// Integration state. `u_sup_integral` carries the running integral of
/// |u|_inf dt (trapezoid rule), the sharp-front blow-up functional.
#[derive(Debug, Clone)]
pub struct SimulationState {
    q: ScalarField,
    t: f64,
    step_count: u64,
    u_sup_integral: f64,
    /// |u|_inf of the current q, maintained across steps so the trapezoid
    /// rule and the CFL bound reuse one velocity evaluation per step.
    sup_now: f64,
}

impl SimulationState {
    pub fn new(q: ScalarField) -> Result<Self> {
        let sup_now = q.velocity()?.sup();
        Ok(Self {
            q,
            t: 0.0,
            step_count: 0,
            u_sup_integral: 0.0,
            sup_now,
        })
    }

    pub fn q(&self) -> &ScalarField {
        &self.q
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn u_sup_integral(&self) -> f64 {
        self.u_sup_integral
    }

    pub fn velocity_sup(&self) -> f64 {
        self.sup_now
    }

    /// One RK4 step at the CFL-limited dt. Returns the dt taken.
    pub fn step(&mut self, cfg: &SolverConfig) -> Result<f64> {
        self.step_impl(cfg, 1.0, None)
    }

    /// Forward step of the time-reversed dynamics (velocity coupling negated).
    /// After stepping a state from t0 for a duration T, stepping the result
    /// reversed for T returns it to the t0 field, up to O(dt^4).
    pub fn step_reversed(&mut self, cfg: &SolverConfig) -> Result<f64> {
        self.step_impl(cfg, -1.0, None)
    }

    fn step_impl(&mut self, cfg: &SolverConfig, sign: f64, cap: Option<f64>) -> Result<f64> {
        let grid = self.q.grid();
        let kind = self.q.kind();
        let dt_stable = cfg
            .dt_init
            .min(cfg.cfl * grid.h_min() / self.sup_now.max(U_SUP_FLOOR));
        if dt_stable < DT_MIN {
            return Err(Error::DtUnderflow {
                dt: dt_stable,
                t: self.t,
            });
        }
        // A cap only trims the step to land on a schedule boundary; it is
        // exempt from the underflow check, which watches for blow-up.
        let dt = match cap {
            Some(c) => dt_stable.min(c),
            None => dt_stable,
        };

        let blowup = |e: Error| match e {
            Error::NonFinite { .. } => Error::Blowup {
                step: self.step_count,
                t: self.t,
            },
            other => other,
        };
        let mk = |values: Array2<f64>| ScalarField::new(grid, values, kind).map_err(blowup);

        let k1 = rhs_signed(&self.q, cfg, sign)?;
        let k2 = rhs_signed(
            &mk(self.q.values() + &(k1.values() * (dt / 2.0)))?,
            cfg,
            sign,
        )?;
        let k3 = rhs_signed(
            &mk(self.q.values() + &(k2.values() * (dt / 2.0)))?,
            cfg,
            sign,
        )?;
        let k4 = rhs_signed(&mk(self.q.values() + &(k3.values() * dt))?, cfg, sign)?;

        let mut next = self.q.values()
            + &((k1.values() + &(k2.values() * 2.0) + &(k3.values() * 2.0) + k4.values())
                * (dt / 6.0));
        // Exact recentring keeps the zero-mean invariant from drifting with
        // accumulated FFT rounding.
        let mean = next.sum() / next.len() as f64;
        next.mapv_inplace(|v| v - mean);
        let q_next = mk(next)?;

        let sup_next = q_next.velocity().map_err(blowup)?.sup();
        if !sup_next.is_finite() {
            return Err(Error::Blowup {
                step: self.step_count,
                t: self.t,
            });
        }
        self.u_sup_integral += dt / 2.0 * (self.sup_now + sup_next);
        self.sup_now = sup_next;
        self.q = q_next;
        self.t += dt;
        self.step_count += 1;
        Ok(dt)
    }
}

/// How a `run` finished: reached the configured t_end, or an observer asked
/// to stop (for example, the front thinned below the resolution floor).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    ReachedEnd,
    StoppedByObserver,
}

/// Advance to `cfg.t_end`, invoking `observer` on the initial state and then
/// at every multiple of `snapshot_interval` (steps are clipped so snapshot
/// times are hit exactly). The observer returns `Break` to stop the run
/// early. Deterministic: identical config and state give a bit-identical
/// snapshot series.
pub fn run<F>(
    state: &mut SimulationState,
    cfg: &SolverConfig,
    mut observer: F,
) -> Result<RunOutcome>
where
    F: FnMut(&SimulationState) -> Result<ControlFlow<()>>,
{
    cfg.validate()?;
    if observer(state)?.is_break() {
        return Ok(RunOutcome::StoppedByObserver);
    }
    let t0 = state.t;
    let mut snap_idx: u64 = 1;
    while state.t < cfg.t_end - SNAP_TOL {
        let target = (t0 + snap_idx as f64 * cfg.snapshot_interval).min(cfg.t_end);
        while state.t < target - SNAP_TOL {
            state.step_impl(cfg, 1.0, Some(target - state.t))?;
        }
        state.t = target;
        if observer(state)?.is_break() {
            return Ok(RunOutcome::StoppedByObserver);
        }
        snap_idx += 1;
    }
    Ok(RunOutcome::ReachedEnd)
}

const CHECKPOINT_MAGIC: &[u8; 7] = b"FLABCKP";
const CHECKPOINT_VERSION: u8 = 1;

/// Self-describing binary checkpoint: magic, format-version byte, kind tag,
/// grid dims, t, step_count, accumulated integral, then row-major samples,
/// all little-endian.
pub fn write_checkpoint(state: &SimulationState, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&[CHECKPOINT_VERSION])?;
    w.write_all(&[match state.q.kind() {
        Equation::Qg => 0u8,
        Equation::Euler => 1u8,
    }])?;
    w.write_all(&(state.q.grid().n1() as u32).to_le_bytes())?;
    w.write_all(&(state.q.grid().n2() as u32).to_le_bytes())?;
    w.write_all(&state.t.to_le_bytes())?;
    w.write_all(&state.step_count.to_le_bytes())?;
    w.write_all(&state.u_sup_integral.to_le_bytes())?;
    for v in state.q.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<SimulationState> {
    let bad = |detail: String| Error::Malformed {
        what: "checkpoint",
        detail,
    };
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 7];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("magic bytes do not match".into()));
    }
    let mut byte = [0u8; 1];
    r.read_exact(&mut byte)?;
    if byte[0] != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported format version {}", byte[0])));
    }
    r.read_exact(&mut byte)?;
    let kind = match byte[0] {
        0 => Equation::Qg,
        1 => Equation::Euler,
        other => return Err(bad(format!("unknown kind tag {other}"))),
    };
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let n1 = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u32buf)?;
    let n2 = u32::from_le_bytes(u32buf) as usize;
    let grid = Grid::new(n1, n2)?;
    let mut f64buf = [0u8; 8];
    r.read_exact(&mut f64buf)?;
    let t = f64::from_le_bytes(f64buf);
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)?;
    let step_count = u64::from_le_bytes(u64buf);
    r.read_exact(&mut f64buf)?;
    let u_sup_integral = f64::from_le_bytes(f64buf);
    if !(t.is_finite() && u_sup_integral.is_finite()) {
        return Err(bad("non-finite t or accumulated integral".into()));
    }
    let mut values = Array2::zeros((n1, n2));
    for v in values.iter_mut() {
        r.read_exact(&mut f64buf)?;
        *v = f64::from_le_bytes(f64buf);
    }
    let mut trailer = [0u8; 1];
    if r.read(&mut trailer)? != 0 {
        return Err(bad("trailing bytes after samples".into()));
    }
    let q = ScalarField::new(grid, values, kind)?;
    let sup_now = q.velocity()?.sup();
    Ok(SimulationState {
        q,
        t,
        step_count,
        u_sup_integral,
        sup_now,
    })
}
