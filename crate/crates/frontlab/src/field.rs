//! Periodic scalar fields, their spectral representation, and the operator
//! toolbox shared by both equations: fractional-Laplacian inversion, velocity
//! recovery, norms, and off-grid evaluation.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::{fft, par};
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which active scalar equation a field belongs to. The tag selects the
/// stream-function inversion: psi = (-Lap)^(-1/2) theta for QG, and
/// psi = (-Lap)^(-1) omega for 2D Euler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    Qg,
    Euler,
}

impl Equation {
    pub fn inversion_power(&self) -> FractionalPower {
        match self {
            Equation::Qg => FractionalPower::Half,
            Equation::Euler => FractionalPower::One,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Equation::Qg => "qg",
            Equation::Euler => "euler",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "qg" => Some(Equation::Qg),
            "euler" => Some(Equation::Euler),
            _ => None,
        }
    }
}

/// Exponent `a` of the inverse fractional Laplacian (-Lap)^(-a).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FractionalPower {
    Half,
    One,
}

impl FractionalPower {
    /// Multiplier applied to a mode with squared wavenumber `k_sq` > 0.
    fn multiplier(&self, k_sq: f64) -> f64 {
        match self {
            FractionalPower::Half => 1.0 / k_sq.sqrt(),
            FractionalPower::One => 1.0 / k_sq,
        }
    }
}

/// Grid-quadrature norms of a scalar field.
#[derive(Debug, Clone, Copy)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// Physical-space samples of the active scalar q (theta or omega).
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Grid,
    values: Array2<f64>,
    kind: Equation,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Array2<f64>, kind: Equation) -> Result<Self> {
        if values.dim() != (grid.n1(), grid.n2()) {
            return Err(Error::GridMismatch("value array shape"));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "scalar field samples",
            });
        }
        Ok(Self { grid, values, kind })
    }

    /// Sample a closed-form datum on the grid.
    pub fn from_fn(grid: Grid, kind: Equation, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = Array2::from_shape_fn((grid.n1(), grid.n2()), |(j1, j2)| {
            f(grid.x1(j1), grid.x2(j2))
        });
        Self::new(grid, values, kind)
    }

    pub fn zeros(grid: Grid, kind: Equation) -> Self {
        Self {
            grid,
            values: Array2::zeros((grid.n1(), grid.n2())),
            kind,
        }
    }

    /// Band-limited random field with modes |k1|,|k2| <= k_max, unit sup-norm,
    /// zero mean. Deterministic in the seed.
    pub fn random_band_limited(grid: Grid, kind: Equation, k_max: i64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut modes = Array2::<Complex64>::zeros((grid.n1(), grid.n2()));
        let half1 = (grid.n1() as i64 / 2 - 1).min(k_max);
        let half2 = (grid.n2() as i64 / 2 - 1).min(k_max);
        for k1 in 0..=half1 {
            for k2 in -half2..=half2 {
                if k1 == 0 && k2 <= 0 {
                    continue; // conjugate partner covers these
                }
                let k_sq = (k1 * k1 + k2 * k2) as f64;
                let amp = 1.0 / (1.0 + k_sq);
                let c = Complex64::new(
                    amp * (rng.gen::<f64>() - 0.5),
                    amp * (rng.gen::<f64>() - 0.5),
                );
                modes[(Grid::bin(k1, grid.n1()), Grid::bin(k2, grid.n2()))] = c;
                modes[(Grid::bin(-k1, grid.n1()), Grid::bin(-k2, grid.n2()))] = c.conj();
            }
        }
        let mut values = fft::inverse(&modes);
        let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sup > 0.0 {
            values.mapv_inplace(|v| v / sup);
        }
        Self { grid, values, kind }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn kind(&self) -> Equation {
        self.kind
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.sum() / self.grid.len() as f64
    }

    /// Subtract the grid mean; returns the recentred field and the amount removed.
    pub fn recentred(mut self) -> (Self, f64) {
        let shift = self.mean();
        self.values.mapv_inplace(|v| v - shift);
        (self, shift)
    }

    pub fn to_spectral(&self) -> SpectralCoeffs {
        SpectralCoeffs {
            grid: self.grid,
            modes: fft::forward(&self.values),
        }
    }

    pub fn norms(&self) -> Norms {
        let da = self.grid.cell_area();
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        let mut linf = 0.0f64;
        for &v in &self.values {
            l1 += v.abs();
            l2 += v * v;
            linf = linf.max(v.abs());
        }
        Norms {
            l1: l1 * da,
            l2: (l2 * da).sqrt(),
            linf,
        }
    }

    /// Stream function psi = (-Lap)^(-a) q with `a` chosen by the kind tag.
    pub fn stream_function(&self) -> Result<SpectralCoeffs> {
        self.to_spectral()
            .invert_fractional_laplacian(self.kind.inversion_power())
    }

    /// Velocity u = (-d psi/dx2, d psi/dx1), computed spectrally.
    pub fn velocity(&self) -> Result<VelocityField> {
        let psi = self.stream_function()?;
        Ok(VelocityField {
            grid: self.grid,
            u1: fft::inverse(&psi.derivative(Axis2::X2).scaled(-1.0).modes),
            u2: fft::inverse(&psi.derivative(Axis2::X1).modes),
        })
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Fourier-mode representation; index (i1, i2) holds wavevector
/// (k1(i1), k2(i2)) with k in [-n/2, n/2).
#[derive(Debug, Clone)]
pub struct SpectralCoeffs {
    grid: Grid,
    modes: Array2<Complex64>,
}

/// Axis selector for spectral derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis2 {
    X1,
    X2,
}

impl SpectralCoeffs {
    pub fn from_modes(grid: Grid, modes: Array2<Complex64>) -> Result<Self> {
        if modes.dim() != (grid.n1(), grid.n2()) {
            return Err(Error::GridMismatch("mode array shape"));
        }
        Ok(Self { grid, modes })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn modes(&self) -> &Array2<Complex64> {
        &self.modes
    }

    /// Coefficient of exp(i(k1 x1 + k2 x2)).
    pub fn mode(&self, k1: i64, k2: i64) -> Complex64 {
        self.modes[(Grid::bin(k1, self.grid.n1()), Grid::bin(k2, self.grid.n2()))]
    }

    pub fn to_field(&self, kind: Equation) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: fft::inverse(&self.modes),
            kind,
        }
    }

    /// Sum of |c_k|: an upper bound on the field's sup-norm, used as the
    /// scale for relative tolerances (zero-mean check, contour residuals).
    pub fn sup_norm_bound(&self) -> f64 {
        self.modes.iter().map(|c| c.norm()).sum()
    }

    /// (-Lap)^(-a): multiply each mode by |k|^(-2a). The mean mode must be
    /// zero; below 1e-12 of the field's sup-norm bound it is zeroed, above it
    /// the caller passed a non-zero-mean scalar and the call is rejected.
    pub fn invert_fractional_laplacian(&self, a: FractionalPower) -> Result<SpectralCoeffs> {
        let mean = self.modes[(0, 0)].norm();
        let tol = 1e-12 * self.sup_norm_bound();
        if mean > tol {
            return Err(Error::NonZeroMean { mean, tol });
        }
        let mut out = self.modes.clone();
        for ((i1, i2), c) in out.indexed_iter_mut() {
            let k1 = self.grid.k1(i1) as f64;
            let k2 = self.grid.k2(i2) as f64;
            let k_sq = k1 * k1 + k2 * k2;
            if k_sq == 0.0 {
                *c = Complex64::ZERO;
            } else {
                *c *= a.multiplier(k_sq);
            }
        }
        Ok(SpectralCoeffs {
            grid: self.grid,
            modes: out,
        })
    }

    /// Spectral partial derivative. The Nyquist bin of the chosen axis is
    /// zeroed: its odd-derivative image is not representable on the grid.
    pub fn derivative(&self, axis: Axis2) -> SpectralCoeffs {
        let mut out = self.modes.clone();
        let (n1, n2) = (self.grid.n1(), self.grid.n2());
        for ((i1, i2), c) in out.indexed_iter_mut() {
            let k = match axis {
                Axis2::X1 => {
                    if i1 == n1 / 2 {
                        *c = Complex64::ZERO;
                        continue;
                    }
                    self.grid.k1(i1) as f64
                }
                Axis2::X2 => {
                    if i2 == n2 / 2 {
                        *c = Complex64::ZERO;
                        continue;
                    }
                    self.grid.k2(i2) as f64
                }
            };
            *c *= Complex64::new(0.0, k);
        }
        SpectralCoeffs {
            grid: self.grid,
            modes: out,
        }
    }

    pub fn scaled(mut self, s: f64) -> SpectralCoeffs {
        self.modes.mapv_inplace(|c| c * s);
        self
    }

    /// Zero all modes with |k1| > n1/3 or |k2| > n2/3 (two-thirds rule).
    pub fn dealias_two_thirds(&mut self) {
        let (n1, n2) = (self.grid.n1(), self.grid.n2());
        let (c1, c2) = (n1 as i64 / 3, n2 as i64 / 3);
        for ((i1, i2), c) in self.modes.indexed_iter_mut() {
            if Grid::wavenumber(i1, n1).abs() > c1 || Grid::wavenumber(i2, n2).abs() > c2 {
                *c = Complex64::ZERO;
            }
        }
    }

    pub fn zero_mean_mode(&mut self) {
        self.modes[(0, 0)] = Complex64::ZERO;
    }

    /// L2 norm over the torus computed from the mode sum (Parseval route).
    pub fn l2_norm(&self) -> f64 {
        let sum_sq: f64 = self.modes.iter().map(|c| c.norm_sqr()).sum();
        crate::grid::TWO_PI * sum_sq.sqrt()
    }

    /// Exact trigonometric interpolation at one point.
    pub fn value_at(&self, x1: f64, x2: f64) -> f64 {
        let (e1, e2) = self.phase_tables(x1, x2);
        let mut total = Complex64::ZERO;
        for (i1, row) in self.modes.rows().into_iter().enumerate() {
            let mut inner = Complex64::ZERO;
            let row = row.as_slice().expect("standard layout");
            for (c, e) in row.iter().zip(&e2) {
                inner += c * e;
            }
            total += e1[i1] * inner;
        }
        total.re
    }

    fn phase_tables(&self, x1: f64, x2: f64) -> (Vec<Complex64>, Vec<Complex64>) {
        let e1: Vec<Complex64> = (0..self.grid.n1())
            .map(|i1| Complex64::from_polar(1.0, self.grid.k1(i1) as f64 * x1))
            .collect();
        let e2: Vec<Complex64> = (0..self.grid.n2())
            .map(|i2| Complex64::from_polar(1.0, self.grid.k2(i2) as f64 * x2))
            .collect();
        (e1, e2)
    }

    /// Exact trigonometric interpolation (full mode sum) at each point.
    pub fn evaluate_at(&self, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::NonFinite {
                context: "evaluation points",
            });
        }
        Ok(par::map_collect(points, |&(x1, x2)| self.value_at(x1, x2)))
    }

    /// Mixed representation for per-column work along x2: physical in x1,
    /// spectral in x2.
    pub fn column_interpolants(&self) -> ColumnInterpolants {
        ColumnInterpolants {
            grid: self.grid,
            coeffs: fft::inverse_x1_only(&self.modes),
        }
    }
}

/// x2-interpolants of every grid column j1, used by level-curve extraction.
pub struct ColumnInterpolants {
    grid: Grid,
    coeffs: Array2<Complex64>,
}

impl ColumnInterpolants {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn value(&self, j1: usize, x2: f64) -> f64 {
        self.sum(j1, x2).0
    }

    /// Value and x2-derivative of column j1 at x2 (Nyquist dropped from the
    /// derivative as in `SpectralCoeffs::derivative`).
    pub fn value_and_slope(&self, j1: usize, x2: f64) -> (f64, f64) {
        self.sum(j1, x2)
    }

    fn sum(&self, j1: usize, x2: f64) -> (f64, f64) {
        let n2 = self.grid.n2();
        let mut v = Complex64::ZERO;
        let mut d = Complex64::ZERO;
        for i2 in 0..n2 {
            let k2 = self.grid.k2(i2) as f64;
            let term = self.coeffs[(j1, i2)] * Complex64::from_polar(1.0, k2 * x2);
            v += term;
            if i2 != n2 / 2 {
                d += term * Complex64::new(0.0, k2);
            }
        }
        (v.re, d.re)
    }
}

/// Physical-space incompressible velocity (u1, u2).
#[derive(Debug, Clone)]
pub struct VelocityField {
    grid: Grid,
    u1: Array2<f64>,
    u2: Array2<f64>,
}

impl VelocityField {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn u1(&self) -> &Array2<f64> {
        &self.u1
    }

    pub fn u2(&self) -> &Array2<f64> {
        &self.u2
    }

    /// sup over samples of the Euclidean speed |u|.
    pub fn sup(&self) -> f64 {
        self.u1
            .iter()
            .zip(self.u2.iter())
            .fold(0.0f64, |m, (a, b)| m.max(a.hypot(*b)))
    }

    /// Largest spectral divergence |i k1 u1_hat + i k2 u2_hat| relative to the
    /// largest velocity mode; diagnostic for the incompressibility invariant.
    pub fn divergence_sup_relative(&self) -> f64 {
        let m1 = fft::forward(&self.u1);
        let m2 = fft::forward(&self.u2);
        let mut div_max = 0.0f64;
        let mut amp_max = 0.0f64;
        for ((i1, i2), c1) in m1.indexed_iter() {
            let k1 = self.grid.k1(i1) as f64;
            let k2 = self.grid.k2(i2) as f64;
            let c2 = m2[(i1, i2)];
            let div = Complex64::new(0.0, k1) * c1 + Complex64::new(0.0, k2) * c2;
            div_max = div_max.max(div.norm());
            amp_max = amp_max.max(c1.norm().max(c2.norm()));
        }
        if amp_max == 0.0 {
            0.0
        } else {
            div_max / amp_max
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TWO_PI;

    fn grid(n: usize) -> Grid {
        Grid::square(n).unwrap()
    }

    fn field(n: usize, kind: Equation, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        ScalarField::from_fn(grid(n), kind, f).unwrap()
    }

    #[test]
    fn round_trip_reproduces_samples() {
        let f = ScalarField::random_band_limited(grid(32), Equation::Qg, 10, 42);
        let back = f.to_spectral().to_field(Equation::Qg);
        assert!(f.max_abs_diff(&back) < 1e-12);
    }

    #[test]
    fn zero_field_has_zero_modes() {
        let f = ScalarField::zeros(grid(16), Equation::Qg);
        let c = f.to_spectral();
        assert!(c.modes().iter().all(|m| m.norm() == 0.0));
    }

    #[test]
    fn rejects_non_finite_samples() {
        let mut v = Array2::zeros((16, 16));
        v[(3, 4)] = f64::NAN;
        assert!(matches!(
            ScalarField::new(grid(16), v, Equation::Qg),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn inversion_eigenfunctions() {
        // sin(x1), a = 1/2: |k| = 1 eigenvalue 1.
        let f = field(32, Equation::Qg, |x1, _| x1.sin());
        let psi = f.stream_function().unwrap().to_field(Equation::Qg);
        assert!(f.max_abs_diff(&psi) < 1e-13);

        // sin(2 x1), a = 1/2: eigenvalue 1/2.
        let f = field(32, Equation::Qg, |x1, _| (2.0 * x1).sin());
        let psi = f.stream_function().unwrap().to_field(Equation::Qg);
        let expect = field(32, Equation::Qg, |x1, _| (2.0 * x1).sin() / 2.0);
        assert!(psi.max_abs_diff(&expect) < 1e-13);

        // cos(x1 + x2), a = 1: |k|^2 = 2.
        let f = field(32, Equation::Euler, |x1, x2| (x1 + x2).cos());
        let psi = f.stream_function().unwrap().to_field(Equation::Euler);
        let expect = field(32, Equation::Euler, |x1, x2| (x1 + x2).cos() / 2.0);
        assert!(psi.max_abs_diff(&expect) < 1e-13);
    }

    #[test]
    fn inversion_rejects_nonzero_mean() {
        let f = field(16, Equation::Qg, |x1, _| x1.sin() + 0.5);
        assert!(matches!(
            f.stream_function(),
            Err(Error::NonZeroMean { .. })
        ));
    }

    #[test]
    fn velocity_of_product_mode_qg() {
        // theta = sin x1 sin x2: |k| = sqrt(2) shell, psi = theta / sqrt(2).
        let f = field(64, Equation::Qg, |x1, x2| x1.sin() * x2.sin());
        let u = f.velocity().unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        for j1 in 0..64 {
            for j2 in 0..64 {
                let (x1, x2) = (grid(64).x1(j1), grid(64).x2(j2));
                assert!((u.u1()[(j1, j2)] + s * x1.sin() * x2.cos()).abs() < 1e-12);
                assert!((u.u2()[(j1, j2)] - s * x1.cos() * x2.sin()).abs() < 1e-12);
            }
        }
        assert!(u.divergence_sup_relative() < 1e-12);
    }

    #[test]
    fn shear_velocity_has_no_u2() {
        let f = field(32, Equation::Qg, |_, x2| (3.0 * x2).cos());
        let u = f.velocity().unwrap();
        assert!(u.u2().iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn taylor_green_velocity_sup_is_half() {
        let f = field(64, Equation::Euler, |x1, x2| x1.sin() * x2.sin());
        let u = f.velocity().unwrap();
        assert!((u.sup() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn norms_closed_forms() {
        let f = field(128, Equation::Qg, |x1, _| x1.sin());
        let n = f.norms();
        assert!((n.linf - 1.0).abs() < 1e-14);
        assert!((n.l2 - (2.0 * std::f64::consts::PI.powi(2)).sqrt()).abs() < 1e-12);
        // Rectangle-rule L1 of |sin| has the discrete closed form
        // (8 pi^2 / n) cot(pi / n); it approaches 8 pi at O(1/n^2).
        let n1 = 128.0;
        let discrete =
            8.0 * std::f64::consts::PI.powi(2) / n1 * (std::f64::consts::PI / n1).tan().recip();
        assert!((n.l1 - discrete).abs() < 1e-10);
        assert!((n.l1 - 8.0 * std::f64::consts::PI).abs() < 2e-2);

        let z = ScalarField::zeros(grid(16), Equation::Qg);
        let nz = z.norms();
        assert_eq!((nz.l1, nz.l2, nz.linf), (0.0, 0.0, 0.0));
    }

    #[test]
    fn parseval_l2_agreement() {
        let f = ScalarField::random_band_limited(grid(48), Equation::Euler, 14, 7);
        let phys = f.norms().l2;
        let spec = f.to_spectral().l2_norm();
        assert!((phys - spec).abs() / phys < 1e-10);
    }

    #[test]
    fn evaluate_at_matches_closed_form_and_grid() {
        let f = field(32, Equation::Qg, |x1, _| x1.sin());
        let c = f.to_spectral();
        let vals = c
            .evaluate_at(&[
                (std::f64::consts::FRAC_PI_2, 0.0),
                (std::f64::consts::FRAC_PI_4, 2.5),
            ])
            .unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-13);
        assert!((vals[1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-13);

        let f = ScalarField::random_band_limited(grid(32), Equation::Qg, 9, 3);
        let c = f.to_spectral();
        for (j1, j2) in [(0, 0), (5, 17), (31, 2), (16, 16)] {
            let x = (f.grid().x1(j1), f.grid().x2(j2));
            let v = c.value_at(x.0, x.1);
            assert!((v - f.values()[(j1, j2)]).abs() < 1e-12);
        }
    }

    #[test]
    fn evaluate_rejects_non_finite_points() {
        let f = field(16, Equation::Qg, |x1, _| x1.sin());
        assert!(f.to_spectral().evaluate_at(&[(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn derivative_of_pure_mode() {
        let f = field(32, Equation::Qg, |x1, x2| (3.0 * x1).sin() * x2.cos());
        let dx1 = f.to_spectral().derivative(Axis2::X1).to_field(Equation::Qg);
        let expect = field(32, Equation::Qg, |x1, x2| 3.0 * (3.0 * x1).cos() * x2.cos());
        assert!(dx1.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn transport_term_integrates_to_zero() {
        // u . grad q has zero torus mean for divergence-free u.
        for seed in [1u64, 2, 3] {
            let q = ScalarField::random_band_limited(grid(48), Equation::Qg, 12, seed);
            let u = q.velocity().unwrap();
            let qs = q.to_spectral();
            let g1 = fft::inverse(&qs.derivative(Axis2::X1).modes);
            let g2 = fft::inverse(&qs.derivative(Axis2::X2).modes);
            let mut total = 0.0;
            let mut scale = 0.0f64;
            for ((j, g1v), g2v) in g1.indexed_iter().zip(g2.iter()) {
                let t = u.u1()[j] * g1v + u.u2()[j] * g2v;
                total += t;
                scale = scale.max(t.abs());
            }
            total *= q.grid().cell_area();
            assert!(total.abs() <= 1e-10 * scale.max(1.0) * TWO_PI * TWO_PI);
        }
    }
}
