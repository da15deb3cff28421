//! Named initial data. Each scenario is a closed-form scalar over (x1, x2)
//! with documented parameters; sampling recentres the grid values to zero
//! mean and reports the subtracted amount so runs can log it.

use crate::error::{Error, Result};
use crate::field::{Equation, ScalarField};
use crate::grid::Grid;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Parameter overrides by name. BTreeMap keeps iteration (and therefore
/// error-message order) deterministic.
pub type ParamMap = BTreeMap<String, f64>;

/// One named scenario parameter with its default.
#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub doc: &'static str,
}

/// A closed-form initial scalar. `eval` receives the resolved parameter
/// values in `params` declaration order.
pub struct Scenario {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static [ParamSpec],
    eval: fn(&[f64], f64, f64) -> f64,
    check: fn(&[f64]) -> Vec<String>,
}

/// Grid sampling of a scenario: the recentred field plus the mean that was
/// subtracted to reach zero.
pub struct SampledScenario {
    pub field: ScalarField,
    pub mean_shift: f64,
}

impl Scenario {
    /// Merge overrides onto defaults, rejecting unknown names. All problems
    /// are reported together.
    pub fn resolve_params(&self, overrides: &ParamMap) -> Result<Vec<f64>> {
        let mut errors: Vec<String> = overrides
            .keys()
            .filter(|k| !self.params.iter().any(|p| p.name == k.as_str()))
            .map(|k| format!("scenario '{}' has no parameter '{k}'", self.name))
            .collect();
        let resolved: Vec<f64> = self
            .params
            .iter()
            .map(|p| overrides.get(p.name).copied().unwrap_or(p.default))
            .collect();
        for (spec, v) in self.params.iter().zip(&resolved) {
            if !v.is_finite() {
                errors.push(format!("parameter '{}' must be finite", spec.name));
            }
        }
        errors.extend((self.check)(&resolved));
        if errors.is_empty() {
            Ok(resolved)
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn sample(
        &self,
        grid: Grid,
        kind: Equation,
        overrides: &ParamMap,
    ) -> Result<SampledScenario> {
        let p = self.resolve_params(overrides)?;
        let raw = ScalarField::from_fn(grid, kind, |x1, x2| (self.eval)(&p, x1, x2))?;
        let (field, mean_shift) = raw.recentred();
        Ok(SampledScenario { field, mean_shift })
    }
}

fn no_check(_: &[f64]) -> Vec<String> {
    Vec::new()
}

fn saddle_eval(_: &[f64], x1: f64, x2: f64) -> f64 {
    x1.sin() * x2.sin() + x2.cos()
}

fn shear_eval(_: &[f64], _x1: f64, x2: f64) -> f64 {
    x2.sin()
}

fn taylor_green_eval(_: &[f64], x1: f64, x2: f64) -> f64 {
    x1.sin() * x2.sin()
}

fn two_band_eval(p: &[f64], x1: f64, x2: f64) -> f64 {
    let (d, w, eps) = (p[0], p[1], p[2]);
    ((x2 - PI - 0.5 * d) / w).tanh() - ((x2 - PI + 0.5 * d) / w).tanh() + eps * x1.sin()
}

fn two_band_check(p: &[f64]) -> Vec<String> {
    let mut errors = Vec::new();
    if !(p[0] > 0.0 && p[0] < PI) {
        errors.push(format!("parameter 'd' must lie in (0, pi), got {}", p[0]));
    }
    if p[1] <= 0.0 {
        errors.push(format!("parameter 'w' must be positive, got {}", p[1]));
    }
    errors
}

const TWO_BAND_PARAMS: &[ParamSpec] = &[
    ParamSpec {
        name: "d",
        default: 1.0,
        doc: "separation between the two band centers",
    },
    ParamSpec {
        name: "w",
        default: 0.2,
        doc: "band transition width",
    },
    ParamSpec {
        name: "eps",
        default: 0.0,
        doc: "amplitude of a sin(x1) perturbation that sets the bands in motion",
    },
];

/// The built-in registry. First access runs a cheap sanity check: the shear
/// profile must be an exact fixed point of the right-hand side under both
/// equations, which guards the operator wiring the scenarios rely on.
pub fn builtin_scenarios() -> &'static [Scenario] {
    static REGISTRY: OnceLock<Vec<Scenario>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let registry = vec![
            Scenario {
                name: "saddle",
                summary: "sin(x1) sin(x2) + cos(x2): level sets carry a hyperbolic \
                          saddle, the standard front-collapse datum of the numerical \
                          literature",
                params: &[],
                eval: saddle_eval,
                check: no_check,
            },
            Scenario {
                name: "shear",
                summary: "sin(x2): parallel shear, an exact steady state of both \
                          equations",
                params: &[],
                eval: shear_eval,
                check: no_check,
            },
            Scenario {
                name: "taylor-green",
                summary: "sin(x1) sin(x2): inversion eigenfunction, steady under \
                          both equations",
                params: &[],
                eval: taylor_green_eval,
                check: no_check,
            },
            Scenario {
                name: "two-band",
                summary: "tanh((x2-pi-d/2)/w) - tanh((x2-pi+d/2)/w), recentred: a \
                          pair of parallel fronts a distance d apart; eps > 0 tilts \
                          them via a sin(x1) perturbation",
                params: TWO_BAND_PARAMS,
                eval: two_band_eval,
                check: two_band_check,
            },
        ];
        registration_self_test(&registry);
        registry
    })
}

pub fn find_scenario(name: &str) -> Option<&'static Scenario> {
    builtin_scenarios().iter().find(|s| s.name == name)
}

fn registration_self_test(registry: &[Scenario]) {
    let shear = registry
        .iter()
        .find(|s| s.name == "shear")
        .expect("registry must contain shear");
    let grid = Grid::square(16).expect("16 is a valid grid size");
    let cfg = crate::evolve::SolverConfig::default();
    for kind in [Equation::Qg, Equation::Euler] {
        let sampled = shear
            .sample(grid, kind, &ParamMap::new())
            .expect("shear has no parameters to misconfigure");
        let tendency =
            crate::evolve::rhs(&sampled.field, &cfg).expect("shear right-hand side must evaluate");
        let sup = tendency.norms().linf;
        assert!(
            sup < 1e-12,
            "shear must be a fixed point, right-hand side reached {sup}"
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{rhs, SimulationState, SolverConfig};

    fn params(entries: &[(&str, f64)]) -> ParamMap {
        entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn registry_contains_the_documented_scenarios() {
        for name in ["saddle", "shear", "taylor-green", "two-band"] {
            assert!(find_scenario(name).is_some(), "missing scenario {name}");
        }
        assert!(find_scenario("mhd").is_none());
    }

    #[test]
    fn shear_tendency_vanishes_under_both_equations() {
        let shear = find_scenario("shear").unwrap();
        let grid = Grid::square(32).unwrap();
        let cfg = SolverConfig::default();
        for kind in [Equation::Qg, Equation::Euler] {
            let s = shear.sample(grid, kind, &ParamMap::new()).unwrap();
            let t = rhs(&s.field, &cfg).unwrap();
            assert!(t.norms().linf < 1e-12);
        }
    }

    #[test]
    fn taylor_green_is_steady_over_100_steps() {
        let tg = find_scenario("taylor-green").unwrap();
        let s = tg
            .sample(Grid::square(32).unwrap(), Equation::Euler, &ParamMap::new())
            .unwrap();
        let q0 = s.field.clone();
        let mut state = SimulationState::new(s.field).unwrap();
        let cfg = SolverConfig {
            dt_init: 1e-2,
            ..SolverConfig::default()
        };
        for _ in 0..100 {
            state.step(&cfg).unwrap();
        }
        assert!(state.q().max_abs_diff(&q0) < 1e-10);
    }

    #[test]
    fn sampling_recentres_and_reports_the_shift() {
        let tb = find_scenario("two-band").unwrap();
        let s = tb
            .sample(Grid::square(128).unwrap(), Equation::Qg, &ParamMap::new())
            .unwrap();
        assert!(s.field.mean().abs() < 1e-14);
        // The raw profile's mean is -2 d / (2 pi) up to exponentially small
        // boundary terms (d = 1 default).
        assert!(
            (s.mean_shift - (-1.0 / PI)).abs() < 1e-3,
            "shift {}",
            s.mean_shift
        );
        // Band interior value: -2 tanh(d / 2w) before recentring.
        let g = s.field.grid();
        let center = s.field.values()[(0, 64)];
        let expect = -2.0 * (1.0f64 / 0.4).tanh() - s.mean_shift;
        assert!(
            (center - expect).abs() < 1e-10,
            "center {center} vs {expect}"
        );
        assert_eq!(g.n1(), 128);
    }

    #[test]
    fn parameter_overrides_apply_and_bad_ones_are_collected() {
        let tb = find_scenario("two-band").unwrap();
        let grid = Grid::square(32).unwrap();
        let wide = tb
            .sample(grid, Equation::Euler, &params(&[("d", 1.6)]))
            .unwrap();
        let default = tb.sample(grid, Equation::Euler, &ParamMap::new()).unwrap();
        assert!(wide.field.max_abs_diff(&default.field) > 0.1);

        let err = tb
            .resolve_params(&params(&[("q", 1.0), ("w", -0.5)]))
            .unwrap_err();
        match err {
            Error::Config(list) => {
                assert_eq!(list.len(), 2, "{list:?}");
                assert!(list[0].contains("no parameter 'q'"));
                assert!(list[1].contains("'w' must be positive"));
            }
            other => panic!("expected Config error, got {other:?}"),
        }
    }

    #[test]
    fn perturbed_bands_are_not_a_steady_state() {
        let tb = find_scenario("two-band").unwrap();
        let s = tb
            .sample(
                Grid::square(64).unwrap(),
                Equation::Euler,
                &params(&[("eps", 0.3)]),
            )
            .unwrap();
        let t = rhs(&s.field, &SolverConfig::default()).unwrap();
        assert!(t.norms().linf > 1e-3, "perturbation must drive motion");
    }

    #[test]
    fn saddle_gradient_grows_over_long_horizon() {
        let saddle = find_scenario("saddle").unwrap();
        let s = saddle
            .sample(Grid::square(128).unwrap(), Equation::Qg, &ParamMap::new())
            .unwrap();
        let cfg = SolverConfig {
            dt_init: 1e-2,
            t_end: 4.0,
            snapshot_interval: 0.5,
            ..SolverConfig::default()
        };
        let mut state = SimulationState::new(s.field).unwrap();
        let mut grad_sups = Vec::new();
        crate::evolve::run(&mut state, &cfg, |st| {
            let spec = st.q().to_spectral();
            let g1 = spec
                .derivative(crate::field::Axis2::X1)
                .to_field(st.q().kind());
            let g2 = spec
                .derivative(crate::field::Axis2::X2)
                .to_field(st.q().kind());
            let sup = g1
                .values()
                .iter()
                .zip(g2.values())
                .map(|(a, b)| a.hypot(*b))
                .fold(0.0f64, f64::max);
            grad_sups.push(sup);
            Ok(std::ops::ControlFlow::Continue(()))
        })
        .unwrap();
        assert_eq!(grad_sups.len(), 9);
        for pair in grad_sups.windows(2) {
            assert!(
                pair[1] > pair[0],
                "gradient sup must keep growing: {grad_sups:?}"
            );
        }
        assert!(
            grad_sups[8] > 1.5 * grad_sups[0],
            "expected substantial steepening: {grad_sups:?}"
        );
    }
}
