//! Direct measurement of the stream function's modulus of continuity: the
//! log-Lipschitz constant M with |psi(z1) - psi(z2)| <= M tau |log tau| for
//! QG, the plain Lipschitz constant for Euler, and the three-region
//! decomposition I1 + I2 + I3 of the kernel difference integral behind those
//! bounds.
//!
//! psi differences are computed spectrally. The free-space kernel 1/|y - z|
//! appears only in `kernel_split`, which checks the tau-growth shape of each
//! region bound; on the torus the true Green's kernel differs from 1/|y| by a
//! smooth correction, so the split is never asserted to sum to the spectral
//! difference.

use crate::error::{Error, Result};
use crate::field::{Equation, ScalarField, SpectralCoeffs};
use crate::grid::{wrap, Grid, TWO_PI};
use crate::par;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

/// Pair separations must stay below 1/e: there |log tau| > 1 and the
/// log-Lipschitz ratio is monotone in the separation.
pub const TAU_CEILING: f64 = 1.0 / std::f64::consts::E;

/// Default smallest separation in sampling plans.
pub const TAU_FLOOR_DEFAULT: f64 = 1e-6;

/// Default outer radius of the kernel split's middle region.
pub const K_CUTOFF_DEFAULT: f64 = 1.0;

/// Two probe points on the torus with their minimum-image separation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointPair {
    z1: (f64, f64),
    z2: (f64, f64),
    tau: f64,
}

impl PointPair {
    /// Coordinates are wrapped into [0, 2 pi); the separation is the torus
    /// metric and must lie in (0, 1/e).
    pub fn new(z1: (f64, f64), z2: (f64, f64)) -> Result<Self> {
        if ![z1.0, z1.1, z2.0, z2.1].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "pair coordinates",
            });
        }
        let z1 = (wrap(z1.0), wrap(z1.1));
        let z2 = (wrap(z2.0), wrap(z2.1));
        let tau = Grid::distance(z1, z2);
        if !(tau > 0.0 && tau < TAU_CEILING) {
            return Err(Error::TauOutOfRange { tau });
        }
        Ok(Self { z1, z2, tau })
    }

    pub fn z1(&self) -> (f64, f64) {
        self.z1
    }

    pub fn z2(&self) -> (f64, f64) {
        self.z2
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// Subregion of the torus where extra pairs are planted, usually the tracked
/// front window.
#[derive(Debug, Clone, Copy)]
pub struct FocusRegion {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
}

/// Seeded recipe for a deterministic batch of probe pairs, log-uniform in
/// separation (the bound's content lives at small tau).
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    pub pair_count: usize,
    pub seed: u64,
    pub tau_floor: f64,
    pub tau_max: f64,
    /// When set, half of the pairs anchor inside this region.
    pub focus: Option<FocusRegion>,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            pair_count: 2000,
            seed: 0x0f0c_a11e,
            tau_floor: TAU_FLOOR_DEFAULT,
            tau_max: 0.36,
            focus: None,
        }
    }
}

impl SamplingPlan {
    pub fn generate(&self) -> Result<Vec<PointPair>> {
        if self.pair_count == 0 {
            return Err(Error::EmptyPlan);
        }
        if !(self.tau_floor > 0.0 && self.tau_floor < self.tau_max && self.tau_max < TAU_CEILING) {
            return Err(Error::Config(vec![format!(
                "pair separations must satisfy 0 < tau_floor < tau_max < 1/e, got [{}, {}]",
                self.tau_floor, self.tau_max
            )]));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let log_floor = self.tau_floor.ln();
        let log_span = self.tau_max.ln() - log_floor;
        let mut pairs = Vec::with_capacity(self.pair_count);
        while pairs.len() < self.pair_count {
            let z1 = match self.focus {
                Some(region) if rng.gen::<f64>() < 0.5 => (
                    region.x1.0 + rng.gen::<f64>() * (region.x1.1 - region.x1.0),
                    region.x2.0 + rng.gen::<f64>() * (region.x2.1 - region.x2.0),
                ),
                _ => (rng.gen::<f64>() * TWO_PI, rng.gen::<f64>() * TWO_PI),
            };
            let tau = (log_floor + rng.gen::<f64>() * log_span).exp();
            let angle = rng.gen::<f64>() * TWO_PI;
            let z2 = (z1.0 + tau * angle.cos(), z1.1 + tau * angle.sin());
            pairs.push(PointPair::new(z1, z2)?);
        }
        Ok(pairs)
    }
}

/// Spectral evaluation of psi(z1) - psi(z2).
pub fn psi_difference(psi: &SpectralCoeffs, pair: &PointPair) -> f64 {
    psi.value_at(pair.z1.0, pair.z1.1) - psi.value_at(pair.z2.0, pair.z2.1)
}

/// Denominator of the modulus ratio: tau |log tau| for QG, tau for Euler.
pub fn modulus_denominator(kind: Equation, tau: f64) -> f64 {
    match kind {
        Equation::Qg => tau * (-tau.ln()),
        Equation::Euler => tau,
    }
}

/// One probed pair with its measured difference and modulus ratio.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PairProbe {
    pub pair: PointPair,
    pub psi_diff: f64,
    pub ratio: f64,
}

/// Evaluate every pair in plan order. Pair evaluations run in parallel; the
/// returned order is the plan order, so downstream reductions stay
/// deterministic.
pub fn probe_pairs(psi: &SpectralCoeffs, kind: Equation, pairs: &[PointPair]) -> Vec<PairProbe> {
    par::map_collect(pairs, |pair| {
        let psi_diff = psi_difference(psi, pair);
        PairProbe {
            pair: *pair,
            psi_diff,
            ratio: psi_diff.abs() / modulus_denominator(kind, pair.tau),
        }
    })
}

/// Kernel-split record for one pair: the three region integrals.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegionSplit {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub k_cutoff: f64,
}

/// Sup of the modulus ratio over a pair batch.
#[derive(Debug, Clone, Serialize)]
pub struct ModulusEstimate {
    /// QG: sup |delta psi| / (tau |log tau|); Euler: sup |delta psi| / tau.
    pub m_hat: f64,
    pub pair_count: usize,
    pub worst_pair: PointPair,
    /// Kernel splits per pair, present only when requested alongside the
    /// quadrature inputs.
    pub split: Option<Vec<RegionSplit>>,
}

/// Estimate the modulus constant over a probe batch. The sup keeps the first
/// maximizer in plan order, so the result is deterministic for a seeded plan.
pub fn estimate_modulus(
    psi: &SpectralCoeffs,
    kind: Equation,
    pairs: &[PointPair],
) -> Result<ModulusEstimate> {
    if pairs.is_empty() {
        return Err(Error::EmptyPlan);
    }
    let probes = probe_pairs(psi, kind, pairs);
    let mut m_hat = f64::NEG_INFINITY;
    let mut worst = 0usize;
    for (i, p) in probes.iter().enumerate() {
        if p.ratio > m_hat {
            m_hat = p.ratio;
            worst = i;
        }
    }
    if !m_hat.is_finite() {
        return Err(Error::NonFinite {
            context: "modulus ratio",
        });
    }
    Ok(ModulusEstimate {
        m_hat,
        pair_count: pairs.len(),
        worst_pair: pairs[worst],
        split: None,
    })
}

/// `estimate_modulus` plus a kernel split for every pair, computed from the
/// scalar field itself (psi is derived internally).
pub fn estimate_modulus_with_splits(
    theta: &ScalarField,
    pairs: &[PointPair],
    k_cutoff: f64,
) -> Result<ModulusEstimate> {
    let psi = theta.stream_function()?;
    let mut estimate = estimate_modulus(&psi, theta.kind(), pairs)?;
    let splits: Result<Vec<RegionSplit>> = pairs
        .iter()
        .map(|p| kernel_split(theta, p, k_cutoff))
        .collect();
    estimate.split = Some(splits?);
    Ok(estimate)
}

/// Geometric shell ratio for the middle-region quadrature.
const SHELL_RATIO: f64 = 17.0 / 16.0;
/// Angular nodes per shell. Uniform angles cancel every dipole harmonic up
/// to order 64 exactly, which is what makes the middle region's near-field
/// cancellation survive discretization.
const SHELL_ANGLES: usize = 64;
/// Fine-patch cells per 2 tau radius in the inner region (cell size tau/8).
const PATCH_CELLS: i64 = 16;
/// Hard ceiling on quadrature nodes per split; exceeding it marks the tau
/// unresolvable instead of grinding.
const NODE_BUDGET: usize = 4_000_000;

/// Nearest-sample lookup; the quadratures treat theta as cell-constant.
fn nearest_sample(theta: &ScalarField, p: (f64, f64)) -> f64 {
    let g = theta.grid();
    let j1 = (wrap(p.0) / g.h1()).round() as usize % g.n1();
    let j2 = (wrap(p.1) / g.h2()).round() as usize % g.n2();
    theta.values()[(j1, j2)]
}

/// Integral of 1/|y - z| over a disc of area s^2 centered on the
/// singularity: 2 sqrt(pi) s.
fn singular_cell_integral(s: f64) -> f64 {
    2.0 * PI.sqrt() * s
}

/// Quadrature of the kernel-difference integral
/// integral of theta(y) (1/|y - z1| - 1/|y - z2|) dy
/// over the three proof regions (all centered on z1):
/// I1 over |y - z1| <= 2 tau, I2 over 2 tau < |y - z1| <= k, I3 beyond k.
///
/// Composite rule: I1 uses a Cartesian patch with cell tau/8 (both singular
/// cells replaced by analytic disc integrals), I2 a log-polar annulus with
/// geometric shells and uniform angles, I3 the field's own grid. Distances
/// are minimum-image; theta is read at nearest grid samples.
pub fn kernel_split(theta: &ScalarField, pair: &PointPair, k_cutoff: f64) -> Result<RegionSplit> {
    if !(k_cutoff.is_finite() && k_cutoff > 0.0 && k_cutoff < PI) {
        return Err(Error::Malformed {
            what: "kernel cutoff",
            detail: format!("k_cutoff must lie in (0, pi), got {k_cutoff}"),
        });
    }
    let tau = pair.tau;
    if tau >= k_cutoff / 2.0 {
        return Err(Error::TauTooLarge { tau, k_cutoff });
    }
    let grid = theta.grid();
    let z1 = pair.z1;
    // Displacement z2 - z1 in the local (unwrapped) frame.
    let d = (
        Grid::min_image(pair.z2.0 - z1.0),
        Grid::min_image(pair.z2.1 - z1.1),
    );

    let n_shells = ((k_cutoff / (2.0 * tau)).ln() / SHELL_RATIO.ln()).ceil() as usize;
    let patch = (2 * PATCH_CELLS + 1) as usize;
    if patch * patch + n_shells * SHELL_ANGLES + grid.len() > NODE_BUDGET {
        return Err(Error::Unresolvable { tau });
    }

    // I1: Cartesian patch, cells of side s = tau/8 centered on z1.
    let s = tau / 8.0;
    let cell_z2 = ((d.0 / s).round() as i64, (d.1 / s).round() as i64);
    let mut i1 = 0.0;
    for i in -PATCH_CELLS..=PATCH_CELLS {
        for j in -PATCH_CELLS..=PATCH_CELLS {
            let off = (i as f64 * s, j as f64 * s);
            let r1 = off.0.hypot(off.1);
            if r1 > 2.0 * tau {
                continue;
            }
            let y = (z1.0 + off.0, z1.1 + off.1);
            let v = nearest_sample(theta, y);
            if i == 0 && j == 0 {
                // z1's own cell: analytic near part, regular far part.
                i1 += v * singular_cell_integral(s);
                i1 -= v / (off.0 - d.0).hypot(off.1 - d.1) * s * s;
            } else if (i, j) == cell_z2 {
                // z2's cell: regular near part, analytic far part.
                i1 += v / r1 * s * s;
                i1 -= nearest_sample(theta, (z1.0 + d.0, z1.1 + d.1)) * singular_cell_integral(s);
            } else {
                let r2 = (off.0 - d.0).hypot(off.1 - d.1);
                i1 += v * (1.0 / r1 - 1.0 / r2) * s * s;
            }
        }
    }

    // I2: log-polar annulus from 2 tau to k around z1. Shell nodes sit at the
    // geometric mean radius; weights carry the exact ring area.
    let mut i2 = 0.0;
    let d_theta = TWO_PI / SHELL_ANGLES as f64;
    for sh in 0..n_shells {
        let r_lo = 2.0 * tau * SHELL_RATIO.powi(sh as i32);
        if r_lo >= k_cutoff {
            break;
        }
        let r_hi = (r_lo * SHELL_RATIO).min(k_cutoff);
        let r = (r_lo * r_hi).sqrt();
        let w = 0.5 * (r_hi * r_hi - r_lo * r_lo) * d_theta;
        for a in 0..SHELL_ANGLES {
            let phi = (a as f64 + 0.5) * d_theta;
            let off = (r * phi.cos(), r * phi.sin());
            let r2 = (off.0 - d.0).hypot(off.1 - d.1);
            let v = nearest_sample(theta, (z1.0 + off.0, z1.1 + off.1));
            i2 += v * (1.0 / r - 1.0 / r2) * w;
        }
    }

    // I3: the field's own grid beyond k (minimum-image distances are bounded
    // below by k - tau > 0, so no singular cells).
    let mut i3 = 0.0;
    let da = grid.cell_area();
    for ((j1, j2), &v) in theta.values().indexed_iter() {
        let x = (grid.x1(j1), grid.x2(j2));
        let off = (Grid::min_image(x.0 - z1.0), Grid::min_image(x.1 - z1.1));
        let r1 = off.0.hypot(off.1);
        if r1 <= k_cutoff {
            continue;
        }
        let r2 = Grid::distance(x, pair.z2);
        i3 += v * (1.0 / r1 - 1.0 / r2) * da;
    }

    Ok(RegionSplit {
        i1,
        i2,
        i3,
        k_cutoff,
    })
}

/// Probe placement for `verify_region_bounds`: the same seeded anchors and
/// directions are reused at every tau so the sweep is comparable.
#[derive(Debug, Clone, Copy)]
pub struct RegionProbes {
    pub per_tau: usize,
    pub seed: u64,
}

impl Default for RegionProbes {
    fn default() -> Self {
        Self {
            per_tau: 4,
            seed: 11,
        }
    }
}

/// Per-region sweep result: the bound constant at each tau and its growth
/// relative to the constant fitted at the largest tau.
#[derive(Debug, Clone, Serialize)]
pub struct RegionSweep {
    /// (tau, constant) pairs, largest tau first.
    pub constants: Vec<(f64, f64)>,
    /// Constant at the largest tau; the bound shape predicts the rest stay
    /// within a modest factor of it.
    pub fitted_constant: f64,
    pub max_growth: f64,
    pub within_factor_two: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionBoundsReport {
    pub k_cutoff: f64,
    /// |I1| / tau per tau.
    pub i1: RegionSweep,
    /// |I2| / (tau |log tau|) per tau.
    pub i2: RegionSweep,
    /// |I3| / tau per tau.
    pub i3: RegionSweep,
    /// Taus dropped because the quadrature budget was exceeded.
    pub excluded: Vec<f64>,
}

fn sweep_from(constants: Vec<(f64, f64)>) -> RegionSweep {
    let fitted = constants.first().map_or(0.0, |c| c.1);
    let max_growth = constants
        .iter()
        .skip(1)
        .map(|c| {
            if fitted > 0.0 {
                c.1 / fitted
            } else if c.1 == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0f64, f64::max);
    RegionSweep {
        constants,
        fitted_constant: fitted,
        within_factor_two: max_growth <= 2.0,
        max_growth,
    }
}

/// Sweep the kernel split down in tau and check each region's bound shape:
/// |I1| and |I3| scale like tau, |I2| like tau |log tau|. The constant is
/// fitted at the largest tau (max over probe pairs); smaller taus must not
/// grow past twice it.
pub fn verify_region_bounds(
    theta: &ScalarField,
    taus: &[f64],
    k_cutoff: f64,
    probes: RegionProbes,
) -> Result<RegionBoundsReport> {
    let mut sweep: Vec<f64> = taus.to_vec();
    if sweep.len() < 3
        || !sweep
            .iter()
            .all(|t| t.is_finite() && *t > 0.0 && *t < TAU_CEILING)
    {
        return Err(Error::Malformed {
            what: "tau sweep",
            detail: "need at least 3 separations inside (0, 1/e)".into(),
        });
    }
    sweep.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if sweep[0] / sweep[sweep.len() - 1] < 99.0 {
        return Err(Error::Malformed {
            what: "tau sweep",
            detail: "sweep must span at least three decades".into(),
        });
    }
    if probes.per_tau == 0 {
        return Err(Error::EmptyPlan);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(probes.seed);
    let anchors: Vec<((f64, f64), f64)> = (0..probes.per_tau)
        .map(|_| {
            (
                (rng.gen::<f64>() * TWO_PI, rng.gen::<f64>() * TWO_PI),
                rng.gen::<f64>() * TWO_PI,
            )
        })
        .collect();

    let mut c1 = Vec::new();
    let mut c2 = Vec::new();
    let mut c3 = Vec::new();
    let mut excluded = Vec::new();
    for &tau in &sweep {
        let mut worst = (0.0f64, 0.0f64, 0.0f64);
        let mut unresolvable = false;
        for &(z1, angle) in &anchors {
            let z2 = (z1.0 + tau * angle.cos(), z1.1 + tau * angle.sin());
            let pair = PointPair::new(z1, z2)?;
            match kernel_split(theta, &pair, k_cutoff) {
                Ok(split) => {
                    worst.0 = worst.0.max(split.i1.abs());
                    worst.1 = worst.1.max(split.i2.abs());
                    worst.2 = worst.2.max(split.i3.abs());
                }
                Err(Error::Unresolvable { .. }) => {
                    unresolvable = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if unresolvable {
            excluded.push(tau);
            continue;
        }
        c1.push((tau, worst.0 / tau));
        c2.push((tau, worst.1 / modulus_denominator(Equation::Qg, tau)));
        c3.push((tau, worst.2 / tau));
    }

    Ok(RegionBoundsReport {
        k_cutoff,
        i1: sweep_from(c1),
        i2: sweep_from(c2),
        i3: sweep_from(c3),
        excluded,
    })
}
