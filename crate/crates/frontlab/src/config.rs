//! Run configuration: a flat `key = value` text format and its validated
//! in-memory form.
//!
//! Grammar: one `key = value` pair per line; `#` starts a comment (full-line
//! or trailing); blank lines are ignored; keys may repeat never. Optional
//! groups use dotted prefixes (`front.`, `modulus.`), and scenario parameters
//! ride under `scenario.<param>`. Parsing collects every problem before
//! reporting, so one round trip fixes a config rather than one error at a
//! time.
//!
//! ```text
//! format-version = 1
//! equation = qg
//! resolution = 256
//! scenario = saddle
//! t_end = 4
//! front.g1 = 0.2
//! front.g2 = 0.4
//! front.window = 2.6 3.7
//! front.bracket = 0.4 2.6
//! ```

use crate::error::{Error, Result};
use crate::evolve::{Dealias, Dissipation, SolverConfig};
use crate::field::Equation;
use crate::grid::{Grid, TWO_PI};
use crate::modulus::TAU_CEILING;
use crate::scenario::{find_scenario, ParamMap};
use std::collections::BTreeMap;
use std::path::PathBuf;

/// The one format version this build reads and writes.
pub const CONFIG_FORMAT_VERSION: u32 = 1;

/// Level-curve tracking request: two contour values bracketing the front,
/// the x1 window of the graph ansatz, and the x2 interval to search for
/// crossings. The curve of g2 must lie above the curve of g1 inside the
/// bracket; the tracked area is their signed gap, and a nonpositive gap
/// stops the run as a collapse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontConfig {
    pub g1: f64,
    pub g2: f64,
    pub window: (f64, f64),
    pub bracket: (f64, f64),
}

/// Stream-function modulus estimation request. `interval` is the simulation
/// time between estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusConfig {
    pub pair_count: usize,
    pub tau_floor: f64,
    pub tau_max: f64,
    pub interval: f64,
}

impl Default for ModulusConfig {
    fn default() -> Self {
        Self {
            pair_count: 2000,
            tau_floor: 1e-6,
            tau_max: 0.36,
            interval: 0.5,
        }
    }
}

/// Everything one experiment needs. `parse_config` fills defaults and
/// validates; `dump` echoes every field so the on-disk record is complete.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub equation: Equation,
    pub resolution: (usize, usize),
    pub scenario: String,
    pub scenario_params: ParamMap,
    pub solver: SolverConfig,
    pub front: Option<FrontConfig>,
    pub modulus: Option<ModulusConfig>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

/// Raw key store with line numbers, consumed key-by-key so leftovers can be
/// rejected by name.
struct RawKeys {
    map: BTreeMap<String, (String, usize)>,
    errors: Vec<String>,
}

impl RawKeys {
    fn scan(text: &str) -> Self {
        let mut map = BTreeMap::new();
        let mut errors = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(cut) => &raw_line[..cut],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {}: expected 'key = value'", idx + 1));
                continue;
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                errors.push(format!("line {}: empty key", idx + 1));
                continue;
            }
            if map.insert(key.clone(), (value, idx + 1)).is_some() {
                errors.push(format!("line {}: duplicate key '{key}'", idx + 1));
            }
        }
        Self { map, errors }
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key).map(|(v, _)| v)
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        self.map.keys().any(|k| k.starts_with(prefix))
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Option<T> {
        let v = self.take(key)?;
        match v.parse() {
            Ok(t) => Some(t),
            Err(_) => {
                self.errors.push(format!("key '{key}': cannot parse '{v}'"));
                None
            }
        }
    }

    fn parse_or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> T {
        match self.map.contains_key(key) {
            true => self.parse(key).unwrap_or(default),
            false => default,
        }
    }

    fn require(&mut self, key: &str) -> Option<String> {
        let v = self.take(key);
        if v.is_none() {
            self.errors.push(format!("missing required key '{key}'"));
        }
        v
    }

    /// A pair of floats, or a single float used for both slots.
    fn pair(&mut self, key: &str) -> Option<(f64, f64)> {
        let v = self.take(key)?;
        let parts: Vec<&str> = v.split_whitespace().collect();
        let parsed: Option<Vec<f64>> = parts.iter().map(|p| p.parse().ok()).collect();
        match parsed.as_deref() {
            Some([a]) => Some((*a, *a)),
            Some([a, b]) => Some((*a, *b)),
            _ => {
                self.errors.push(format!(
                    "key '{key}': expected one or two numbers, got '{v}'"
                ));
                None
            }
        }
    }
}

/// Parse and validate a config document. Every problem found is reported in
/// one `Error::Config` list: unknown keys, missing keys, bad values, and
/// semantic violations all together.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut raw = RawKeys::scan(text);

    let version: u32 = raw.parse_or("format-version", CONFIG_FORMAT_VERSION);
    if version != CONFIG_FORMAT_VERSION {
        raw.errors.push(format!(
            "unsupported format-version {version} (this build reads {CONFIG_FORMAT_VERSION})"
        ));
    }

    let equation = match raw.require("equation").as_deref() {
        Some("qg") => Equation::Qg,
        Some("euler") => Equation::Euler,
        Some(other) => {
            raw.errors.push(format!("unsupported equation '{other}'"));
            Equation::Qg
        }
        None => Equation::Qg,
    };

    let resolution = match raw.require("resolution") {
        Some(v) => {
            let parts: Option<Vec<usize>> = v.split_whitespace().map(|p| p.parse().ok()).collect();
            let pair = match parts.as_deref() {
                Some([n]) => Some((*n, *n)),
                Some([n1, n2]) => Some((*n1, *n2)),
                _ => None,
            };
            match pair {
                Some((n1, n2)) => {
                    if let Err(e) = Grid::new(n1, n2) {
                        raw.errors.push(format!("resolution: {e}"));
                    }
                    (n1, n2)
                }
                None => {
                    raw.errors.push(format!(
                        "resolution: expected one or two integers, got '{v}'"
                    ));
                    (0, 0)
                }
            }
        }
        None => (0, 0),
    };

    let scenario = raw.require("scenario").unwrap_or_default();
    let mut scenario_params = ParamMap::new();
    let param_keys: Vec<String> = raw
        .map
        .keys()
        .filter(|k| k.starts_with("scenario."))
        .cloned()
        .collect();
    for key in param_keys {
        let name = key["scenario.".len()..].to_string();
        if let Some(v) = raw.parse::<f64>(&key) {
            scenario_params.insert(name, v);
        }
    }
    if !scenario.is_empty() {
        match find_scenario(&scenario) {
            Some(s) => {
                if let Err(Error::Config(list)) = s.resolve_params(&scenario_params) {
                    raw.errors.extend(list);
                }
            }
            None => raw.errors.push(format!("unknown scenario '{scenario}'")),
        }
    }

    let defaults = SolverConfig::default();
    let dealias = match raw.take("dealias").as_deref() {
        None | Some("two-thirds") => Dealias::TwoThirds,
        Some("none") => Dealias::None,
        Some(other) => {
            raw.errors.push(format!(
                "dealias must be 'two-thirds' or 'none', got '{other}'"
            ));
            Dealias::TwoThirds
        }
    };
    let dissipation = match raw.take("dissipation").as_deref() {
        None | Some("none") => {
            for k in ["nu", "p"] {
                if raw.take(k).is_some() {
                    raw.errors
                        .push(format!("key '{k}' requires dissipation = hyperviscous"));
                }
            }
            Dissipation::None
        }
        Some("hyperviscous") => {
            let nu = raw.parse::<f64>("nu");
            let p = raw.parse::<u32>("p");
            if nu.is_none() {
                raw.errors
                    .push("dissipation = hyperviscous requires key 'nu'".into());
            }
            if p.is_none() {
                raw.errors
                    .push("dissipation = hyperviscous requires key 'p'".into());
            }
            Dissipation::Hyperviscous {
                nu: nu.unwrap_or(0.0),
                p: p.unwrap_or(1),
            }
        }
        Some(other) => {
            raw.errors.push(format!(
                "dissipation must be 'none' or 'hyperviscous', got '{other}'"
            ));
            Dissipation::None
        }
    };
    let t_end = raw.require("t_end").and_then(|v| match v.parse() {
        Ok(t) => Some(t),
        Err(_) => {
            raw.errors.push(format!("key 't_end': cannot parse '{v}'"));
            None
        }
    });
    let solver = SolverConfig {
        dt_init: raw.parse_or("dt_init", defaults.dt_init),
        cfl: raw.parse_or("cfl", defaults.cfl),
        t_end: t_end.unwrap_or(defaults.t_end),
        dealias,
        dissipation,
        snapshot_interval: raw.parse_or("snapshot_interval", defaults.snapshot_interval),
    };
    if let Err(Error::Config(list)) = solver.validate() {
        raw.errors.extend(list);
    }

    let front = if raw.has_prefix("front.") {
        let g1 = raw.parse::<f64>("front.g1");
        let g2 = raw.parse::<f64>("front.g2");
        let window = raw.pair("front.window");
        let bracket = raw.pair("front.bracket");
        for (key, present) in [
            ("front.g1", g1.is_some()),
            ("front.g2", g2.is_some()),
            ("front.window", window.is_some()),
            ("front.bracket", bracket.is_some()),
        ] {
            if !present && !raw.errors.iter().any(|e| e.contains(key)) {
                raw.errors.push(format!("missing required key '{key}'"));
            }
        }
        match (g1, g2, window, bracket) {
            (Some(g1), Some(g2), Some(window), Some(bracket)) => {
                if g1 == g2 {
                    raw.errors.push(format!(
                        "front.g1 and front.g2 must be distinct, both are {g1}"
                    ));
                }
                if window.0 >= window.1 {
                    raw.errors.push(format!(
                        "front.window: a must be less than b, got {} {}",
                        window.0, window.1
                    ));
                } else if window.1 - window.0 > TWO_PI {
                    raw.errors.push(format!(
                        "front.window: span exceeds the period, got {} {}",
                        window.0, window.1
                    ));
                }
                if bracket.0 >= bracket.1 {
                    raw.errors.push(format!(
                        "front.bracket: low must be less than high, got {} {}",
                        bracket.0, bracket.1
                    ));
                }
                Some(FrontConfig {
                    g1,
                    g2,
                    window,
                    bracket,
                })
            }
            _ => None,
        }
    } else {
        None
    };

    let modulus = if raw.has_prefix("modulus.") {
        let d = ModulusConfig::default();
        let m = ModulusConfig {
            pair_count: raw.parse_or("modulus.pair_count", d.pair_count),
            tau_floor: raw.parse_or("modulus.tau_floor", d.tau_floor),
            tau_max: raw.parse_or("modulus.tau_max", d.tau_max),
            interval: raw.parse_or("modulus.interval", d.interval),
        };
        if m.pair_count == 0 {
            raw.errors.push("modulus.pair_count must be >= 1".into());
        }
        if !(m.tau_floor > 0.0 && m.tau_floor < m.tau_max && m.tau_max < TAU_CEILING) {
            raw.errors.push(format!(
                "modulus separations must satisfy 0 < tau_floor < tau_max < 1/e, got {} and {}",
                m.tau_floor, m.tau_max
            ));
        }
        if !(m.interval.is_finite() && m.interval > 0.0) {
            raw.errors.push(format!(
                "modulus.interval must be positive, got {}",
                m.interval
            ));
        }
        Some(m)
    } else {
        None
    };

    let output_dir = PathBuf::from(raw.take("output_dir").unwrap_or_else(|| "out".into()));
    let seed = raw.parse_or("seed", 0u64);

    for key in raw.map.keys() {
        raw.errors.push(format!("unknown key '{key}'"));
    }

    if raw.errors.is_empty() {
        Ok(RunConfig {
            equation,
            resolution,
            scenario,
            scenario_params,
            solver,
            front,
            modulus,
            output_dir,
            seed,
        })
    } else {
        Err(Error::Config(raw.errors))
    }
}

/// Echo a config with every field explicit, defaults included. Floats print
/// in shortest round-trip form, so `parse_config(dump_config(c)) == c`.
pub fn dump_config(c: &RunConfig) -> String {
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(format!("format-version = {CONFIG_FORMAT_VERSION}"));
    line(format!("equation = {}", c.equation.name()));
    line(format!(
        "resolution = {} {}",
        c.resolution.0, c.resolution.1
    ));
    line(format!("scenario = {}", c.scenario));
    for (k, v) in &c.scenario_params {
        line(format!("scenario.{k} = {v}"));
    }
    line(format!("seed = {}", c.seed));
    line(format!("output_dir = {}", c.output_dir.display()));
    line(format!("t_end = {}", c.solver.t_end));
    line(format!("dt_init = {}", c.solver.dt_init));
    line(format!("cfl = {}", c.solver.cfl));
    line(format!(
        "snapshot_interval = {}",
        c.solver.snapshot_interval
    ));
    line(format!(
        "dealias = {}",
        match c.solver.dealias {
            Dealias::TwoThirds => "two-thirds",
            Dealias::None => "none",
        }
    ));
    match c.solver.dissipation {
        Dissipation::None => line("dissipation = none".into()),
        Dissipation::Hyperviscous { nu, p } => {
            line("dissipation = hyperviscous".into());
            line(format!("nu = {nu}"));
            line(format!("p = {p}"));
        }
    }
    if let Some(f) = &c.front {
        line(format!("front.g1 = {}", f.g1));
        line(format!("front.g2 = {}", f.g2));
        line(format!("front.window = {} {}", f.window.0, f.window.1));
        line(format!("front.bracket = {} {}", f.bracket.0, f.bracket.1));
    }
    if let Some(m) = &c.modulus {
        line(format!("modulus.pair_count = {}", m.pair_count));
        line(format!("modulus.tau_floor = {}", m.tau_floor));
        line(format!("modulus.tau_max = {}", m.tau_max));
        line(format!("modulus.interval = {}", m.interval));
    }
    out
}
