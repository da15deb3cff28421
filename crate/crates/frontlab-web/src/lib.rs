//! Browser bindings for the simulator: one wrapped simulation plus the
//! extraction and sampling calls the demo page needs. Everything is
//! synchronous and single-threaded; the page budgets work per frame.

use frontlab::evolve::{run, SimulationState, SolverConfig};
use frontlab::front::{area_between_curves, extract_level_curve, flux_form_derivative, thickness};
use frontlab::modulus::{probe_pairs, SamplingPlan};
use frontlab::scenario::{find_scenario, ParamMap};
use frontlab::{Equation, Grid};
use std::ops::ControlFlow;
use wasm_bindgen::prelude::*;

fn js_err(e: frontlab::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// One live simulation: the evolving scalar plus the solver settings used
/// to advance it between frames.
#[wasm_bindgen]
pub struct DemoSim {
    state: SimulationState,
    solver: SolverConfig,
}

#[wasm_bindgen]
impl DemoSim {
    /// Start a scenario. `eps` feeds the two-band perturbation parameter
    /// and is ignored by scenarios that do not declare it.
    #[wasm_bindgen(constructor)]
    pub fn new(
        scenario: &str,
        equation: &str,
        resolution: usize,
        eps: f64,
    ) -> Result<DemoSim, JsError> {
        let kind = match equation {
            "qg" => Equation::Qg,
            "euler" => Equation::Euler,
            other => return Err(JsError::new(&format!("unsupported equation '{other}'"))),
        };
        let grid = Grid::square(resolution).map_err(js_err)?;
        let spec = find_scenario(scenario)
            .ok_or_else(|| JsError::new(&format!("unknown scenario '{scenario}'")))?;
        let mut params = ParamMap::new();
        if spec.params.iter().any(|p| p.name == "eps") {
            params.insert("eps".into(), eps);
        }
        let sampled = spec.sample(grid, kind, &params).map_err(js_err)?;
        let state = SimulationState::new(sampled.field).map_err(js_err)?;
        Ok(DemoSim {
            state,
            solver: SolverConfig::default(),
        })
    }

    /// Integrate forward by roughly `horizon` time units (CFL decides the
    /// actual step count) and return the new simulation time.
    pub fn advance(&mut self, horizon: f64) -> Result<f64, JsError> {
        if !(horizon > 0.0 && horizon <= 1.0) {
            return Err(JsError::new("horizon must lie in (0, 1]"));
        }
        let mut cfg = self.solver;
        cfg.t_end = self.state.t() + horizon;
        cfg.snapshot_interval = horizon;
        run(&mut self.state, &cfg, |_| Ok(ControlFlow::Continue(()))).map_err(js_err)?;
        Ok(self.state.t())
    }

    pub fn t(&self) -> f64 {
        self.state.t()
    }

    pub fn resolution(&self) -> usize {
        self.state.q().grid().n1()
    }

    pub fn sup(&self) -> f64 {
        self.state.q().norms().linf
    }

    /// RGBA bytes for putImageData: width n1, height n2, x2 increasing
    /// upward, diverging palette scaled to the current sup.
    pub fn heatmap_rgba(&self) -> Vec<u8> {
        let q = self.state.q();
        let grid = q.grid();
        let (n1, n2) = (grid.n1(), grid.n2());
        let sup = self.sup().max(1e-12);
        let values = q.values();
        let mut out = vec![0u8; n1 * n2 * 4];
        for py in 0..n2 {
            let j2 = n2 - 1 - py;
            for px in 0..n1 {
                let v = (values[(px, j2)] / sup).clamp(-1.0, 1.0);
                let (r, g, b) = diverging(v);
                let at = 4 * (py * n1 + px);
                out[at] = r;
                out[at + 1] = g;
                out[at + 2] = b;
                out[at + 3] = 255;
            }
        }
        out
    }

    /// Column samples (x1, phi) of one level curve, flattened, for drawing
    /// as a polyline over the heatmap.
    pub fn curve(
        &self,
        contour: f64,
        a: f64,
        b: f64,
        lo: f64,
        hi: f64,
    ) -> Result<Vec<f64>, JsError> {
        let spec = self.state.q().to_spectral();
        let c = extract_level_curve(&spec, contour, (a, b), (lo, hi)).map_err(js_err)?;
        let mut flat = Vec::with_capacity(2 * c.samples().len());
        for &(x1, phi) in c.samples() {
            flat.push(x1);
            flat.push(phi);
        }
        Ok(flat)
    }

    /// Thickness, semi-uniformity, area, and boundary flux for the band
    /// between two tracked contours: [delta_min, delta_max, c, area, flux].
    pub fn front_metrics(
        &self,
        g1: f64,
        g2: f64,
        a: f64,
        b: f64,
        lo: f64,
        hi: f64,
    ) -> Result<Vec<f64>, JsError> {
        let spec = self.state.q().to_spectral();
        let c1 = extract_level_curve(&spec, g1, (a, b), (lo, hi)).map_err(js_err)?;
        let c2 = extract_level_curve(&spec, g2, (a, b), (lo, hi)).map_err(js_err)?;
        let th = thickness(&c1, &c2).map_err(js_err)?;
        let area = area_between_curves(&c1, &c2).map_err(js_err)?;
        let psi = self.state.q().stream_function().map_err(js_err)?;
        let flux = flux_form_derivative(&psi, &c1, &c2).map_err(js_err)?;
        Ok(vec![
            th.delta_min,
            th.delta_max,
            th.semi_uniformity_c,
            area,
            flux,
        ])
    }

    /// Sample stream-function increments over random point pairs and return
    /// [m_hat, tau_0, ratio_0, tau_1, ratio_1, ...] for the scatter plot.
    /// The ratio divides by tau |log tau| for the half inversion and by tau
    /// for the full one.
    pub fn modulus_scatter(
        &self,
        pair_count: usize,
        seed: u32,
        tau_floor: f64,
    ) -> Result<Vec<f64>, JsError> {
        let plan = SamplingPlan {
            pair_count: pair_count.clamp(1, 5000),
            seed: seed as u64,
            tau_floor,
            ..SamplingPlan::default()
        };
        let pairs = plan.generate().map_err(js_err)?;
        let psi = self.state.q().stream_function().map_err(js_err)?;
        let probes = probe_pairs(&psi, self.state.q().kind(), &pairs);
        let m_hat = probes.iter().map(|p| p.ratio).fold(0.0f64, f64::max);
        let mut flat = Vec::with_capacity(1 + 2 * probes.len());
        flat.push(m_hat);
        for p in &probes {
            flat.push(p.pair.tau());
            flat.push(p.ratio);
        }
        Ok(flat)
    }
}

/// Blue-white-red ramp over [-1, 1].
fn diverging(v: f64) -> (u8, u8, u8) {
    let mix = |a: f64, b: f64, s: f64| (a + (b - a) * s) as u8;
    if v < 0.0 {
        let s = 1.0 + v; // 0 at full blue, 1 at white
        (
            mix(43.0, 245.0, s),
            mix(83.0, 245.0, s),
            mix(190.0, 245.0, s),
        )
    } else {
        let s = v; // 0 at white, 1 at full red
        (
            mix(245.0, 177.0, s),
            mix(245.0, 31.0, s),
            mix(245.0, 41.0, s),
        )
    }
}
