//! Level curves of the active scalar as graphs x2 = phi(x1) over an x1
//! window, the thickness and semi-uniformity of the band between two curves,
//! the window-averaged area A(t) and its boundary-flux time derivative, and
//! least-squares fits of the collapse lower-bound envelopes
//! (A(t) > exp(-exp(A_hat t + B_hat)) for QG, exp(-(A_hat t + B_hat)) for
//! Euler).

use crate::error::{Error, Result};
use crate::fft;
use crate::field::SpectralCoeffs;
use crate::grid::{Grid, TWO_PI};
use serde::{Deserialize, Serialize};

/// Contour residual tolerance, as a fraction of the field's sup-norm bound.
pub const CONTOUR_TOL_FACTOR: f64 = 1e-9;

/// An x1 window snapped onto grid columns. Snapping keeps every quadrature
/// and endpoint evaluation on exact column positions, so two curves over the
/// same requested window always share columns.
#[derive(Debug, Clone, Copy)]
pub struct Window {
    a: f64,
    b: f64,
    first_col: i64,
    n_cols: usize,
    /// Full-period windows close the loop: quadrature is periodic and the
    /// endpoint corner terms cancel identically.
    full_period: bool,
}

impl PartialEq for Window {
    fn eq(&self, other: &Self) -> bool {
        self.first_col == other.first_col
            && self.n_cols == other.n_cols
            && self.full_period == other.full_period
    }
}

impl Window {
    /// Snap a requested window onto grid columns: `a` moves right to the next
    /// column, `b` moves left. Spans of at least one period become periodic.
    pub fn snap(grid: Grid, a: f64, b: f64) -> Result<Window> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::BadWindow { a, b });
        }
        let h1 = grid.h1();
        if b - a >= TWO_PI - 1e-9 {
            let first_col = (a / h1).round() as i64;
            let a_snap = first_col as f64 * h1;
            return Ok(Window {
                a: a_snap,
                b: a_snap + TWO_PI,
                first_col,
                n_cols: grid.n1(),
                full_period: true,
            });
        }
        // The 1e-9 nudges keep exact grid multiples on their own column
        // despite rounding in a/h1.
        let first_col = (a / h1 - 1e-9).ceil() as i64;
        let last_col = (b / h1 + 1e-9).floor() as i64;
        if last_col - first_col < 1 {
            return Err(Error::BadWindow { a, b });
        }
        Ok(Window {
            a: first_col as f64 * h1,
            b: last_col as f64 * h1,
            first_col,
            n_cols: (last_col - first_col + 1) as usize,
            full_period: false,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// b - a after snapping; one full period for periodic windows.
    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn is_full_period(&self) -> bool {
        self.full_period
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// x1 of the i-th column, unwrapped (monotone across the window even when
    /// the window crosses the 2 pi seam).
    fn x1(&self, grid: Grid, i: usize) -> f64 {
        (self.first_col + i as i64) as f64 * grid.h1()
    }

    /// Grid column index of the i-th sample.
    fn col(&self, grid: Grid, i: usize) -> usize {
        let n = grid.n1() as i64;
        ((self.first_col + i as i64) % n + n) as usize % grid.n1()
    }
}

/// One level set q = G sampled as a graph x2 = phi(x1) on the window's grid
/// columns. phi values stay inside the root-isolation bracket.
#[derive(Debug, Clone)]
pub struct LevelCurve {
    rho_label: f64,
    contour_value: f64,
    window: Window,
    bracket: (f64, f64),
    /// (x1, phi) pairs ordered by x1, one per window column.
    samples: Vec<(f64, f64)>,
}

impl LevelCurve {
    pub fn rho_label(&self) -> f64 {
        self.rho_label
    }

    pub fn contour_value(&self) -> f64 {
        self.contour_value
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn bracket(&self) -> (f64, f64) {
        self.bracket
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    /// Relabel the curve with the parameter value rho for which G(rho) equals
    /// the extracted contour value.
    pub fn with_rho_label(mut self, rho: f64) -> Self {
        self.rho_label = rho;
        self
    }

    fn same_columns(&self, other: &LevelCurve) -> bool {
        self.window == other.window && self.samples.len() == other.samples.len()
    }
}

/// Find the level curve q = `contour_value` over `window`, isolating one root
/// per column inside `bracket` (x2 interval, may cross the 2 pi seam).
///
/// Grid x2 samples spanning the bracket locate the sign change; the root is
/// then bisected and Newton-polished on the column's trigonometric
/// interpolant until the residual is below `CONTOUR_TOL_FACTOR` times the
/// field's sup-norm bound. Zero crossings on the column samples are counted
/// first: none is `NoCrossing`, more than one is `NonGraph` (the front has
/// folded and the graph ansatz fails; reported, never repaired).
pub fn extract_level_curve(
    q: &SpectralCoeffs,
    contour_value: f64,
    window: (f64, f64),
    bracket: (f64, f64),
) -> Result<LevelCurve> {
    let grid = q.grid();
    let win = Window::snap(grid, window.0, window.1)?;
    let (lo, hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::BadWindow { a: lo, b: hi });
    }
    let tol = CONTOUR_TOL_FACTOR * q.sup_norm_bound();
    let cols = q.column_interpolants();

    // x2 ladder: bracket ends plus every grid multiple strictly inside.
    let h2 = grid.h2();
    let mut ladder = vec![lo];
    let j_lo = (lo / h2 - 1e-9).ceil() as i64;
    let j_hi = (hi / h2 + 1e-9).floor() as i64;
    for j in j_lo..=j_hi {
        let x = j as f64 * h2;
        if x > lo + 1e-12 && x < hi - 1e-12 {
            ladder.push(x);
        }
    }
    ladder.push(hi);

    let mut samples = Vec::with_capacity(win.n_cols());
    for i in 0..win.n_cols() {
        let j1 = win.col(grid, i);
        let x1 = win.x1(grid, i);
        let f = |x2: f64| cols.value(j1, x2) - contour_value;

        // Classify the ladder: samples inside tol are roots outright; sign
        // flips between consecutive samples are bracketed roots.
        let vals: Vec<f64> = ladder.iter().map(|&x| f(x)).collect();
        let mut exact_roots = Vec::new();
        let mut flips = Vec::new();
        for (idx, &v) in vals.iter().enumerate() {
            if v.abs() <= tol {
                exact_roots.push(ladder[idx]);
            } else if idx + 1 < vals.len() && vals[idx + 1].abs() > tol && v * vals[idx + 1] < 0.0 {
                flips.push((ladder[idx], ladder[idx + 1]));
            }
        }
        let crossings = exact_roots.len() + flips.len();
        match crossings {
            0 => return Err(Error::NoCrossing { x1 }),
            1 => {}
            _ => return Err(Error::NonGraph { x1, crossings }),
        }

        let phi = if let Some(&root) = exact_roots.first() {
            root
        } else {
            let (mut a2, mut b2) = flips[0];
            let mut fa = f(a2);
            for _ in 0..100 {
                if b2 - a2 < 1e-12 * (1.0 + a2.abs()) {
                    break;
                }
                let mid = 0.5 * (a2 + b2);
                let fm = f(mid);
                if fm.abs() <= tol {
                    a2 = mid;
                    b2 = mid;
                    break;
                }
                if fa * fm < 0.0 {
                    b2 = mid;
                } else {
                    a2 = mid;
                    fa = fm;
                }
            }
            let mut x = 0.5 * (a2 + b2);
            for _ in 0..5 {
                let (v, d) = cols.value_and_slope(j1, x);
                let r = v - contour_value;
                if r.abs() <= 0.1 * tol || d == 0.0 {
                    break;
                }
                let next = x - r / d;
                if next < lo || next > hi {
                    break;
                }
                x = next;
            }
            x
        };
        debug_assert!(f(phi).abs() <= tol);
        samples.push((x1, phi));
    }

    Ok(LevelCurve {
        rho_label: contour_value,
        contour_value,
        window: win,
        bracket,
        samples,
    })
}

/// Front thickness between two curves over one window.
#[derive(Debug, Clone, Copy)]
pub struct Thickness {
    pub delta_min: f64,
    pub delta_max: f64,
    /// delta_min / delta_max; zero flags touching (collapsed) curves.
    pub semi_uniformity_c: f64,
}

/// Pointwise gap |phi2 - phi1| reduced to min, max, and their ratio.
pub fn thickness(c1: &LevelCurve, c2: &LevelCurve) -> Result<Thickness> {
    if !c1.same_columns(c2) {
        return Err(Error::WindowMismatch);
    }
    let mut delta_min = f64::INFINITY;
    let mut delta_max = 0.0f64;
    for (s1, s2) in c1.samples.iter().zip(&c2.samples) {
        let d = (s2.1 - s1.1).abs();
        delta_min = delta_min.min(d);
        delta_max = delta_max.max(d);
    }
    let semi_uniformity_c = if delta_max > 0.0 {
        delta_min / delta_max
    } else {
        0.0
    };
    Ok(Thickness {
        delta_min,
        delta_max,
        semi_uniformity_c,
    })
}

/// Window-averaged band area A = integral of (phi2 - phi1) dx1 / (b - a),
/// by trapezoid quadrature on the window columns (periodic sum when the
/// window is a full period).
pub fn area_between_curves(c1: &LevelCurve, c2: &LevelCurve) -> Result<f64> {
    if !c1.same_columns(c2) {
        return Err(Error::WindowMismatch);
    }
    let gaps = c1
        .samples
        .iter()
        .zip(&c2.samples)
        .map(|(s1, s2)| s2.1 - s1.1);
    let h1 = c1.window.length()
        / if c1.window.full_period {
            c1.samples.len() as f64
        } else {
            (c1.samples.len() - 1) as f64
        };
    let total: f64 = if c1.window.full_period {
        gaps.sum()
    } else {
        let g: Vec<f64> = gaps.collect();
        g.iter().sum::<f64>() - 0.5 * (g[0] + g[g.len() - 1])
    };
    Ok(total * h1 / c1.window.length())
}

/// Instantaneous dA/dt from the stream function alone: the transport
/// identity turns the area derivative into the four-corner combination
/// [psi(b, phi2(b)) - psi(a, phi2(a)) + psi(a, phi1(a)) - psi(b, phi1(b))]
/// divided by (b - a). Identically zero over a full period, where the
/// endpoint corners coincide.
pub fn flux_form_derivative(psi: &SpectralCoeffs, c1: &LevelCurve, c2: &LevelCurve) -> Result<f64> {
    if !c1.same_columns(c2) {
        return Err(Error::WindowMismatch);
    }
    if c1.window.full_period {
        return Ok(0.0);
    }
    let first = 0;
    let last = c1.samples.len() - 1;
    let (a, b) = (c1.window.a, c1.window.b);
    let corners = psi.evaluate_at(&[
        (b, c2.samples[last].1),
        (a, c2.samples[first].1),
        (a, c1.samples[first].1),
        (b, c1.samples[last].1),
    ])?;
    Ok((corners[0] - corners[1] + corners[2] - corners[3]) / (b - a))
}

/// Agreement between the measured area series and the flux-form derivative.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AreaFluxReport {
    pub max_abs_mismatch: f64,
    /// Largest |flux| over the interior points; the scale for the relative
    /// figure. A zero scale with zero mismatch reports 0.
    pub flux_scale: f64,
    pub relative_mismatch: f64,
    pub points_checked: usize,
}

/// Compare centered differences of A(t) against the flux series at interior
/// snapshots. The two sides discretize the same identity through unrelated
/// code paths, so their gap measures end-to-end consistency.
pub fn verify_area_flux(area_series: &[(f64, f64)], flux_series: &[f64]) -> Result<AreaFluxReport> {
    if area_series.len() != flux_series.len() {
        return Err(Error::Malformed {
            what: "diagnostic series",
            detail: format!(
                "area series has {} points but flux series has {}",
                area_series.len(),
                flux_series.len()
            ),
        });
    }
    if area_series.len() < 3 {
        return Err(Error::Unfittable {
            points: area_series.len(),
            excluded: 0,
        });
    }
    let mut max_abs = 0.0f64;
    let mut scale = 0.0f64;
    for i in 1..area_series.len() - 1 {
        let (t_prev, a_prev) = area_series[i - 1];
        let (t_next, a_next) = area_series[i + 1];
        let slope = (a_next - a_prev) / (t_next - t_prev);
        max_abs = max_abs.max((slope - flux_series[i]).abs());
        scale = scale.max(flux_series[i].abs());
    }
    let relative = if scale > 0.0 {
        max_abs / scale
    } else if max_abs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(AreaFluxReport {
        max_abs_mismatch: max_abs,
        flux_scale: scale,
        relative_mismatch: relative,
        points_checked: area_series.len() - 2,
    })
}

/// One time slice handed to `verify_graph_evolution`: the stream function and
/// the tracked curve at time t.
pub struct CurveSnapshot {
    pub t: f64,
    pub psi: SpectralCoeffs,
    pub curve: LevelCurve,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GraphEvolutionReport {
    pub max_abs_mismatch: f64,
    /// max |d phi / dt| over compared columns; the scale for the relative
    /// figure.
    pub lhs_scale: f64,
    pub relative_mismatch: f64,
    pub snapshots_used: usize,
    pub columns_compared: usize,
}

/// Check the graph transport identity d phi/dt = d/dx1 [psi(x1, phi(x1))]
/// across a snapshot series: left side by centered time differences of phi
/// per column, right side by x1-differentiation of the sampled composite.
/// Full-period windows differentiate spectrally; partial windows fall back to
/// 4th-order centered differences on interior columns.
pub fn verify_graph_evolution(snaps: &[CurveSnapshot]) -> Result<GraphEvolutionReport> {
    if snaps.len() < 3 {
        return Err(Error::Unfittable {
            points: snaps.len(),
            excluded: 0,
        });
    }
    let first = &snaps[0].curve;
    if !snaps.iter().all(|s| s.curve.same_columns(first)) {
        return Err(Error::WindowMismatch);
    }
    let m = first.samples.len();
    let full = first.window.full_period;
    if !full && m < 5 {
        return Err(Error::BadWindow {
            a: first.window.a,
            b: first.window.b,
        });
    }
    let grid = snaps[0].psi.grid();
    let h1 = grid.h1();

    let mut max_abs = 0.0f64;
    let mut lhs_scale = 0.0f64;
    let mut columns = 0usize;
    for i in 1..snaps.len() - 1 {
        let dt_pair = snaps[i + 1].t - snaps[i - 1].t;
        let points: Vec<(f64, f64)> = snaps[i].curve.samples.clone();
        let g = snaps[i].psi.evaluate_at(&points)?;
        let rhs = if full {
            spectral_derivative_closed_loop(&g, h1)
        } else {
            fd4_derivative_interior(&g, h1)
        };
        let col_range = if full { 0..m } else { 2..m - 2 };
        for j in col_range {
            let lhs = (snaps[i + 1].curve.samples[j].1 - snaps[i - 1].curve.samples[j].1) / dt_pair;
            let r = if full { rhs[j] } else { rhs[j - 2] };
            max_abs = max_abs.max((lhs - r).abs());
            lhs_scale = lhs_scale.max(lhs.abs());
            columns += 1;
        }
    }
    let relative = if lhs_scale > 0.0 {
        max_abs / lhs_scale
    } else if max_abs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(GraphEvolutionReport {
        max_abs_mismatch: max_abs,
        lhs_scale,
        relative_mismatch: relative,
        snapshots_used: snaps.len() - 2,
        columns_compared: columns,
    })
}

/// Exact derivative of the trigonometric interpolant through a periodic
/// sample loop (Nyquist zeroed as usual).
fn spectral_derivative_closed_loop(g: &[f64], h: f64) -> Vec<f64> {
    let m = g.len();
    let arr = ndarray::Array2::from_shape_vec((1, m), g.to_vec()).expect("row shape");
    let mut modes = fft::forward(&arr);
    let period = m as f64 * h;
    for (i, c) in modes.iter_mut().enumerate() {
        if i == m / 2 {
            *c = num_complex::Complex64::ZERO;
        } else {
            let k = Grid::wavenumber(i, m) as f64 * TWO_PI / period;
            *c *= num_complex::Complex64::new(0.0, k);
        }
    }
    fft::inverse(&modes).into_iter().collect()
}

/// 4th-order centered differences; returns values for columns 2..m-2.
fn fd4_derivative_interior(g: &[f64], h: f64) -> Vec<f64> {
    (2..g.len() - 2)
        .map(|j| (8.0 * (g[j + 1] - g[j - 1]) - (g[j + 2] - g[j - 2])) / (12.0 * h))
        .collect()
}

/// Per-snapshot front record: everything the diagnostics CSV carries.
#[derive(Debug, Clone, Copy)]
pub struct FrontDiagnostics {
    pub t: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub semi_uniformity_c: f64,
    pub area_a: f64,
    pub flux_f: f64,
    pub u_sup_integral: f64,
    pub front_length: f64,
}

impl FrontDiagnostics {
    pub fn measure(
        t: f64,
        u_sup_integral: f64,
        psi: &SpectralCoeffs,
        c1: &LevelCurve,
        c2: &LevelCurve,
    ) -> Result<Self> {
        let th = thickness(c1, c2)?;
        let area_a = area_between_curves(c1, c2)?;
        let flux_f = flux_form_derivative(psi, c1, c2)?;
        Ok(FrontDiagnostics {
            t,
            delta_min: th.delta_min,
            delta_max: th.delta_max,
            semi_uniformity_c: th.semi_uniformity_c,
            area_a,
            flux_f,
            u_sup_integral,
            front_length: c1.window.length(),
        })
    }

    /// log|log A|, defined only where A < 1/e (so the transform is monotone);
    /// the CSV leaves the column empty elsewhere.
    pub fn loglog_area(&self) -> Option<f64> {
        loglog_transform(self.area_a)
    }
}

fn loglog_transform(v: f64) -> Option<f64> {
    if v > 0.0 && v < std::f64::consts::E.recip() {
        Some((-v.ln()).ln())
    } else {
        None
    }
}

/// Which collapse envelope a series is fitted against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundModel {
    /// delta(t) > exp(-exp(At + B)): the QG lower bound.
    #[serde(rename = "double-exponential")]
    DoubleExponential,
    /// delta(t) > exp(-(At + B)): the Euler lower bound.
    #[serde(rename = "exponential")]
    Exponential,
}

/// Constants feeding the Gronwall slope bound C * M / (b - a), with
/// C instantiated as 1 / c_min.
#[derive(Debug, Clone, Copy)]
pub struct GronwallInputs {
    /// Stream-function modulus constant (M for QG, the Lipschitz constant
    /// for Euler).
    pub modulus_constant: f64,
    /// Minimum semi-uniformity ratio observed over the run.
    pub c_min: f64,
    pub front_length: f64,
}

/// Fitted envelope record; serialized as the run's bound-fit report.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundFit {
    pub model: BoundModel,
    pub a_hat: f64,
    pub b_hat: f64,
    /// C * M / (b - a) when the modulus constants were supplied.
    pub slope_bound: Option<f64>,
    /// Largest |dG/dt| between consecutive transformed points.
    pub empirical_slope: f64,
    /// max over the series of envelope(t) - value(t); at or below zero means
    /// the measured series never dips under the fitted envelope.
    pub max_violation: f64,
    pub points_used: usize,
    pub points_excluded: usize,
    /// True when the series reached zero (touching curves); the fit covers
    /// the prefix before the collapse.
    pub collapsed: bool,
}

/// Least-squares envelope fit of a positive series (t, value).
///
/// Double-exponential model: fit log|log v| against t using only points with
/// v < 1/e (the transform is monotone there); exponential model: fit -log v
/// using all positive points. Points at or below zero mark a collapse and
/// truncate the series.
pub fn fit_bound_envelope(
    series: &[(f64, f64)],
    model: BoundModel,
    gronwall: Option<&GronwallInputs>,
) -> Result<BoundFit> {
    let cut = series.iter().position(|&(_, v)| v <= 0.0);
    let (active, collapsed) = match cut {
        Some(i) => (&series[..i], true),
        None => (series, false),
    };

    let transform = |v: f64| -> Option<f64> {
        match model {
            BoundModel::DoubleExponential => loglog_transform(v),
            BoundModel::Exponential => Some(-v.ln()),
        }
    };
    let pts: Vec<(f64, f64)> = active
        .iter()
        .filter_map(|&(t, v)| transform(v).map(|g| (t, g)))
        .collect();
    let excluded = active.len() - pts.len();
    if pts.len() < 2 {
        return Err(Error::Unfittable {
            points: pts.len(),
            excluded,
        });
    }

    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_g = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(t, g) in &pts {
        sxx += (t - mean_t) * (t - mean_t);
        sxy += (t - mean_t) * (g - mean_g);
    }
    if sxx == 0.0 {
        return Err(Error::Unfittable {
            points: pts.len(),
            excluded,
        });
    }
    let a_hat = sxy / sxx;
    let b_hat = mean_g - a_hat * mean_t;

    let envelope = |t: f64| -> f64 {
        match model {
            BoundModel::DoubleExponential => (-(a_hat * t + b_hat).exp()).exp(),
            BoundModel::Exponential => (-(a_hat * t + b_hat)).exp(),
        }
    };
    let max_violation = active
        .iter()
        .map(|&(t, v)| envelope(t) - v)
        .fold(f64::NEG_INFINITY, f64::max);

    let empirical_slope = pts
        .windows(2)
        .filter(|w| w[1].0 > w[0].0)
        .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
        .fold(0.0f64, f64::max);

    Ok(BoundFit {
        model,
        a_hat,
        b_hat,
        slope_bound: gronwall.map(|g| g.modulus_constant / (g.c_min * g.front_length)),
        empirical_slope,
        max_violation,
        points_used: pts.len(),
        points_excluded: excluded,
        collapsed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Equation, ScalarField};
    use std::f64::consts::PI;

    fn spectral(n: usize, f: impl Fn(f64, f64) -> f64) -> SpectralCoeffs {
        ScalarField::from_fn(Grid::square(n).unwrap(), Equation::Qg, f)
            .unwrap()
            .to_spectral()
    }

    const FULL: (f64, f64) = (0.0, TWO_PI);

    #[test]
    fn extracts_flat_curve_at_zero() {
        let q = spectral(64, |_, x2| x2.sin());
        let c = extract_level_curve(&q, 0.0, FULL, (-1.0, 1.0)).unwrap();
        assert_eq!(c.samples().len(), 64);
        assert!(c.samples().iter().all(|&(_, phi)| phi.abs() < 1e-10));
    }

    #[test]
    fn extracts_flat_curve_at_half() {
        let q = spectral(64, |_, x2| x2.sin());
        let c = extract_level_curve(&q, 0.5, FULL, (0.0, PI / 2.0)).unwrap();
        assert!(c
            .samples()
            .iter()
            .all(|&(_, phi)| (phi - PI / 6.0).abs() < 1e-10));
    }

    #[test]
    fn extracts_exact_composition() {
        let q = spectral(64, |x1, x2| (x2 - 0.3 * x1.sin()).sin());
        let c = extract_level_curve(&q, 0.0, FULL, (-1.0, 1.0)).unwrap();
        for &(x1, phi) in c.samples() {
            assert!((phi - 0.3 * x1.sin()).abs() < 1e-9, "at x1 = {x1}");
        }
    }

    #[test]
    fn reports_no_crossing() {
        let q = spectral(64, |_, x2| x2.sin());
        assert!(matches!(
            extract_level_curve(&q, 0.5, FULL, (-0.4, 0.4)),
            Err(Error::NoCrossing { .. })
        ));
    }

    #[test]
    fn reports_fold_as_non_graph() {
        let q = spectral(64, |_, x2| (2.0 * x2).sin());
        assert!(matches!(
            extract_level_curve(&q, 0.0, FULL, (-0.5, 2.0)),
            Err(Error::NonGraph { crossings: 2, .. })
        ));
    }

    #[test]
    fn window_snaps_to_columns() {
        let g = Grid::square(64).unwrap();
        let h = g.h1();
        let w = Window::snap(g, 0.3 * h, 5.2 * h).unwrap();
        assert!((w.a() - h).abs() < 1e-14);
        assert!((w.b() - 5.0 * h).abs() < 1e-14);
        assert_eq!(w.n_cols(), 5);
        assert!(!w.is_full_period());

        // Exact multiples stay put.
        let w = Window::snap(g, 2.0 * h, 6.0 * h).unwrap();
        assert_eq!(w.n_cols(), 5);

        let w = Window::snap(g, 0.0, TWO_PI).unwrap();
        assert!(w.is_full_period());
        assert_eq!(w.n_cols(), 64);

        assert!(Window::snap(g, 1.0, 1.0).is_err());
        assert!(Window::snap(g, 1.0, 1.0 + 0.5 * h).is_err());
    }

    #[test]
    fn thickness_of_constant_gap() {
        let q1 = spectral(64, |_, x2| x2.sin());
        let q2 = spectral(64, |_, x2| (x2 - 0.1).sin());
        let c1 = extract_level_curve(&q1, 0.0, FULL, (-1.0, 1.0)).unwrap();
        let c2 = extract_level_curve(&q2, 0.0, FULL, (-1.0, 1.0)).unwrap();
        let th = thickness(&c1, &c2).unwrap();
        assert!((th.delta_min - 0.1).abs() < 1e-9);
        assert!((th.delta_max - 0.1).abs() < 1e-9);
        assert!((th.semi_uniformity_c - 1.0).abs() < 1e-7);
    }

    #[test]
    fn thickness_of_modulated_gap() {
        // phi1 = 0, phi2 = 0.1 + 0.05 sin x1: extremes 0.05 and 0.15 are hit
        // exactly on grid columns (n divisible by 4).
        let q1 = spectral(64, |_, x2| x2.sin());
        let q2 = spectral(64, |x1, x2| (x2 - 0.1 - 0.05 * x1.sin()).sin());
        let c1 = extract_level_curve(&q1, 0.0, FULL, (-1.0, 1.0)).unwrap();
        let c2 = extract_level_curve(&q2, 0.0, FULL, (-1.0, 1.0)).unwrap();
        let th = thickness(&c1, &c2).unwrap();
        assert!((th.delta_min - 0.05).abs() < 1e-9);
        assert!((th.delta_max - 0.15).abs() < 1e-9);
        assert!((th.semi_uniformity_c - 1.0 / 3.0).abs() < 1e-7);
    }

    #[test]
    fn touching_curves_flagged_by_zero_ratio() {
        let q1 = spectral(64, |_, x2| x2.sin());
        let q2 = spectral(64, |x1, x2| (x2 - 0.05 - 0.05 * x1.sin()).sin());
        let c1 = extract_level_curve(&q1, 0.0, FULL, (-1.0, 1.0)).unwrap();
        let c2 = extract_level_curve(&q2, 0.0, FULL, (-0.5, 1.0)).unwrap();
        // Different brackets are fine; only windows and columns must agree.
        let th = thickness(&c1, &c2).unwrap();
        assert!(th.delta_min < 1e-9);
        assert!((th.delta_max - 0.1).abs() < 1e-9);
        assert!(th.semi_uniformity_c < 1e-7);
    }

    #[test]
    fn window_mismatch_rejected() {
        let q = spectral(64, |_, x2| x2.sin());
        let c1 = extract_level_curve(&q, 0.0, FULL, (-1.0, 1.0)).unwrap();
        let c2 = extract_level_curve(&q, 0.0, (1.0, 3.0), (-1.0, 1.0)).unwrap();
        assert!(matches!(thickness(&c1, &c2), Err(Error::WindowMismatch)));
    }

    #[test]
    fn area_of_constant_gap() {
        let q1 = spectral(64, |_, x2| x2.sin());
        let q2 = spectral(64, |_, x2| (x2 - 0.1).sin());
        let c1 = extract_level_curve(&q1, 0.0, (1.0, 4.0), (-1.0, 1.0)).unwrap();
        let c2 = extract_level_curve(&q2, 0.0, (1.0, 4.0), (-1.0, 1.0)).unwrap();
        assert!((area_between_curves(&c1, &c2).unwrap() - 0.1).abs() < 1e-9);
    }

    #[test]
    fn area_averages_out_sine_over_full_period() {
        let q1 = spectral(64, |_, x2| x2.sin());
        let q2 = spectral(64, |x1, x2| (x2 - 0.1 - 0.05 * x1.sin()).sin());
        let c1 = extract_level_curve(&q1, 0.0, FULL, (-1.0, 1.0)).unwrap();
        let c2 = extract_level_curve(&q2, 0.0, FULL, (-1.0, 1.0)).unwrap();
        assert!((area_between_curves(&c1, &c2).unwrap() - 0.1).abs() < 1e-9);
    }

    #[test]
    fn area_of_rectified_sine_gap() {
        // On [0, pi] the gap 0.3 sin x1 equals 0.3|sin x1|; its mean is
        // 0.6/pi. Trapezoid error is O(h^2).
        let n = 128;
        let q1 = spectral(n, |_, x2| x2.sin());
        let q2 = spectral(n, |x1, x2| (x2 - 0.3 * x1.sin()).sin());
        let c1 = extract_level_curve(&q1, 0.0, (0.0, PI), (-1.0, 1.0)).unwrap();
        let c2 = extract_level_curve(&q2, 0.0, (0.0, PI), (-1.0, 1.0)).unwrap();
        let mean = area_between_curves(&c1, &c2).unwrap();
        let expect = 0.6 / PI;
        assert!((mean - expect).abs() < 1e-3, "mean {mean} vs {expect}");
    }

    #[test]
    fn flux_vanishes_for_shear_stream_function() {
        let psi = spectral(64, |_, x2| x2.cos());
        let q1 = spectral(64, |_, x2| x2.sin());
        let q2 = spectral(64, |_, x2| (x2 - 0.1).sin());
        let c1 = extract_level_curve(&q1, 0.0, (1.0, 4.0), (-1.0, 1.0)).unwrap();
        let c2 = extract_level_curve(&q2, 0.0, (1.0, 4.0), (-1.0, 1.0)).unwrap();
        let f = flux_form_derivative(&psi, &c1, &c2).unwrap();
        assert!(f.abs() < 1e-10);
    }

    #[test]
    fn flux_cancels_when_psi_ignores_x2() {
        let psi = spectral(64, |x1, _| x1.sin());
        let q1 = spectral(64, |_, x2| (x2 - 0.1).sin());
        let q2 = spectral(64, |_, x2| (x2 - 0.2).sin());
        let c1 = extract_level_curve(&q1, 0.0, (0.0, PI / 2.0), (-1.0, 1.0)).unwrap();
        let c2 = extract_level_curve(&q2, 0.0, (0.0, PI / 2.0), (-1.0, 1.0)).unwrap();
        let f = flux_form_derivative(&psi, &c1, &c2).unwrap();
        assert!(f.abs() < 1e-10);
    }

    #[test]
    fn flux_matches_closed_form_corners() {
        let psi = spectral(64, |x1, x2| x1.sin() * x2.cos());
        let q1 = spectral(64, |_, x2| (x2 - 0.1).sin());
        let q2 = spectral(64, |_, x2| (x2 - 0.2).sin());
        let c1 = extract_level_curve(&q1, 0.0, (0.0, PI / 2.0), (-1.0, 1.0)).unwrap();
        let c2 = extract_level_curve(&q2, 0.0, (0.0, PI / 2.0), (-1.0, 1.0)).unwrap();
        let f = flux_form_derivative(&psi, &c1, &c2).unwrap();
        // Corners: psi(b, 0.2) - psi(a, 0.2) + psi(a, 0.1) - psi(b, 0.1)
        // with a = 0, b = pi/2.
        let expect = (0.2f64.cos() - 0.1f64.cos()) * 1.0 / (PI / 2.0);
        assert!((f - expect).abs() < 1e-9, "flux {f} vs {expect}");
    }

    #[test]
    fn flux_identically_zero_over_full_period() {
        let psi = spectral(64, |x1, x2| x1.sin() * x2.cos() + (x2 - 0.4).sin());
        let q1 = spectral(64, |_, x2| x2.sin());
        let q2 = spectral(64, |x1, x2| (x2 - 0.1 - 0.02 * x1.cos()).sin());
        let c1 = extract_level_curve(&q1, 0.0, FULL, (-1.0, 1.0)).unwrap();
        let c2 = extract_level_curve(&q2, 0.0, FULL, (-1.0, 1.0)).unwrap();
        assert_eq!(flux_form_derivative(&psi, &c1, &c2).unwrap(), 0.0);
    }

    #[test]
    fn sandwich_bounds_hold() {
        let q1 = spectral(64, |x1, x2| (x2 - 0.3 * x1.sin()).sin());
        let q2 = spectral(64, |x1, x2| (x2 - 0.2 - 0.1 * (2.0 * x1).cos()).sin());
        let c1 = extract_level_curve(&q1, 0.0, FULL, (-1.2, 1.2)).unwrap();
        let c2 = extract_level_curve(&q2, 0.0, FULL, (-1.2, 1.2)).unwrap();
        let th = thickness(&c1, &c2).unwrap();
        let a = area_between_curves(&c1, &c2).unwrap();
        assert!(th.delta_min <= a + 1e-12 && a <= th.delta_max + 1e-12);
    }

    #[test]
    fn area_flux_consistency_on_synthetic_series() {
        let dt = 0.01;
        let series: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let t = i as f64 * dt;
                (t, (-t).exp())
            })
            .collect();
        let flux: Vec<f64> = series.iter().map(|&(t, _)| -(-t).exp()).collect();
        let rep = verify_area_flux(&series, &flux).unwrap();
        // Centered difference of e^{-t} carries an error of about dt^2/6.
        assert!(rep.max_abs_mismatch < dt * dt / 5.0);
        assert!(rep.relative_mismatch < 1e-4);
    }

    #[test]
    fn area_flux_zero_for_steady_series() {
        let series: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 * 0.1, 0.25)).collect();
        let flux = vec![0.0; 10];
        let rep = verify_area_flux(&series, &flux).unwrap();
        assert_eq!(rep.max_abs_mismatch, 0.0);
        assert_eq!(rep.relative_mismatch, 0.0);
    }

    #[test]
    fn graph_evolution_zero_for_steady_shear() {
        let q = spectral(64, |_, x2| x2.sin());
        let psi = spectral(64, |_, x2| -x2.sin());
        let snaps: Vec<CurveSnapshot> = (0..3)
            .map(|i| CurveSnapshot {
                t: i as f64 * 0.1,
                psi: psi.clone(),
                curve: extract_level_curve(&q, 0.0, FULL, (-1.0, 1.0)).unwrap(),
            })
            .collect();
        let rep = verify_graph_evolution(&snaps).unwrap();
        assert!(rep.max_abs_mismatch < 1e-9);
    }

    #[test]
    fn graph_evolution_matches_frozen_shear_transport() {
        // Frozen stream function psi = 0.2 cos x2 advects along x1 with
        // u1 = 0.2 sin x2; the exact solution is q0(x1 - u1(x2) t, x2) and
        // the graph identity holds exactly, so the only errors are the
        // centered time difference O(dt^2) and spectral interpolation.
        let n = 64;
        let dt = 5e-3;
        let psi = spectral(n, |_, x2| 0.2 * x2.cos());
        let snaps: Vec<CurveSnapshot> = (0..5)
            .map(|i| {
                let t = i as f64 * dt;
                let q = spectral(n, move |x1, x2| {
                    (x2 - 0.3 * (x1 - 0.2 * x2.sin() * t).sin()).sin()
                });
                CurveSnapshot {
                    t,
                    psi: psi.clone(),
                    curve: extract_level_curve(&q, 0.0, FULL, (-1.0, 1.0)).unwrap(),
                }
            })
            .collect();
        let rep = verify_graph_evolution(&snaps).unwrap();
        assert!(rep.lhs_scale > 1e-3, "profile must actually move");
        assert!(
            rep.relative_mismatch < 1e-3,
            "relative mismatch {}",
            rep.relative_mismatch
        );
    }

    #[test]
    fn fit_recovers_exact_double_exponential() {
        let series: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.01;
                (t, (-(2.0 * t + 1.0).exp()).exp())
            })
            .collect();
        let fit = fit_bound_envelope(&series, BoundModel::DoubleExponential, None).unwrap();
        assert!((fit.a_hat - 2.0).abs() < 1e-6);
        assert!((fit.b_hat - 1.0).abs() < 1e-6);
        assert!(fit.max_violation <= 1e-12);
        assert_eq!(fit.points_used, 50);
        assert_eq!(fit.points_excluded, 0);
        assert!(!fit.collapsed);
        assert!((fit.empirical_slope - 2.0).abs() < 1e-6);
    }

    #[test]
    fn fit_recovers_exact_exponential() {
        let series: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.05;
                (t, (-(3.0 * t + 0.5)).exp())
            })
            .collect();
        let fit = fit_bound_envelope(&series, BoundModel::Exponential, None).unwrap();
        assert!((fit.a_hat - 3.0).abs() < 1e-9);
        assert!((fit.b_hat - 0.5).abs() < 1e-9);
        assert!(fit.max_violation <= 1e-12);
    }

    #[test]
    fn fit_excludes_points_above_one_over_e() {
        // exp(-exp(2t - 1)) is above 1/e for t < 0.5; the half-step offset
        // keeps every point clear of the cutoff itself.
        let series: Vec<(f64, f64)> = (0..100)
            .map(|i| {
                let t = (i as f64 + 0.5) * 0.01;
                (t, (-(2.0 * t - 1.0).exp()).exp())
            })
            .collect();
        let fit = fit_bound_envelope(&series, BoundModel::DoubleExponential, None).unwrap();
        assert_eq!(fit.points_excluded, 50);
        assert_eq!(fit.points_used, 50);
        assert!((fit.a_hat - 2.0).abs() < 1e-6);
        assert!((fit.b_hat + 1.0).abs() < 1e-6);
    }

    #[test]
    fn fit_truncates_at_collapse() {
        let mut series: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let t = i as f64 * 0.1;
                (t, (-(1.0 * t + 2.0)).exp())
            })
            .collect();
        series.push((2.0, 0.0));
        series.push((2.1, 0.05));
        let fit = fit_bound_envelope(&series, BoundModel::Exponential, None).unwrap();
        assert!(fit.collapsed);
        assert_eq!(fit.points_used, 20);
        assert!((fit.a_hat - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fit_reports_unfittable_for_thin_series() {
        let series = vec![(0.0, 0.5), (0.1, 0.45)]; // both above 1/e
        assert!(matches!(
            fit_bound_envelope(&series, BoundModel::DoubleExponential, None),
            Err(Error::Unfittable { points: 0, .. })
        ));
    }

    #[test]
    fn fit_carries_gronwall_slope_bound() {
        let series: Vec<(f64, f64)> = (0..10)
            .map(|i| {
                let t = i as f64 * 0.1;
                (t, (-(2.0 * t + 1.5).exp()).exp())
            })
            .collect();
        let g = GronwallInputs {
            modulus_constant: 4.0,
            c_min: 0.5,
            front_length: 2.0,
        };
        let fit = fit_bound_envelope(&series, BoundModel::DoubleExponential, Some(&g)).unwrap();
        assert!((fit.slope_bound.unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn diagnostics_record_is_self_consistent() {
        let psi = spectral(64, |x1, x2| x1.sin() * x2.cos());
        let q1 = spectral(64, |x1, x2| (x2 - 0.3 * x1.sin()).sin());
        let q2 = spectral(64, |x1, x2| (x2 - 0.25 - 0.3 * x1.sin()).sin());
        let c1 = extract_level_curve(&q1, 0.0, (1.0, 4.0), (-1.5, 1.5)).unwrap();
        let c2 = extract_level_curve(&q2, 0.0, (1.0, 4.0), (-1.0, 1.8)).unwrap();
        let d = FrontDiagnostics::measure(0.7, 0.33, &psi, &c1, &c2).unwrap();
        assert!(d.delta_min <= d.area_a && d.area_a <= d.delta_max);
        assert!((d.semi_uniformity_c - d.delta_min / d.delta_max).abs() < 1e-12);
        assert_eq!(d.t, 0.7);
        assert_eq!(d.u_sup_integral, 0.33);
        // Window (1, 4) snapped inward onto columns of the 64-grid.
        assert!(d.front_length > 2.7 && d.front_length < 3.0);
        // Constant gap 0.25: loglog transform applies since 0.25 < 1/e.
        let g = d.loglog_area().unwrap();
        assert!((g - (-(0.25f64.ln())).ln()).abs() < 1e-6);
    }
}
