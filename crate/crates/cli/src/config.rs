//! Flat `key = value` run configuration with dotted keys, `#` comments and
//! environment overrides.

use std::collections::BTreeMap;
use std::sync::Arc;

use singular_core::singularity::Kind;
use singular_core::solver::default_schedule;
use singular_core::{Grid, RadonMeasure, ScalarField, SingularNonlinearity, SolverConfig};

use crate::error::CliError;

/// Prefix for environment overrides: `h.gamma` is read from `SINGULAR_H_GAMMA`.
pub const ENV_PREFIX: &str = "SINGULAR_";

/// Keys that may appear more than once; every occurrence is kept.
const REPEATABLE: &[&str] = &["measure.atom"];

pub const KEYS: &[&str] = &[
    "domain.dim",
    "domain.cells",
    "domain.margins",
    "h.kind",
    "h.gamma",
    "h.theta",
    "h.shift",
    "h.plateau",
    "f",
    "measure.atom",
    "measure.density",
    "solver.schedule",
    "solver.tol_fp",
    "solver.tol_lin",
    "solver.max_iters",
    "solver.damping",
    "solver.adaptive",
    "solver.tol_mono",
    "solver.tol_seq",
    "sweep.gamma",
    "sweep.cells",
    "sweep.mass",
    "kato.mu2_scale",
    "seed",
];

pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.to_uppercase().replace('.', "_"))
}

/// Raw key/value pairs in file order.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, Vec<String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(i) => &line[..i],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::config(
                    format!("line {}", lineno + 1),
                    "expected `key = value`",
                ));
            };
            raw.set(key.trim(), value.trim())?;
        }
        Ok(raw)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !KEYS.contains(&key) {
            return Err(CliError::config(key, "unknown key"));
        }
        let slot = self.entries.entry(key.to_string()).or_default();
        if !slot.is_empty() && !REPEATABLE.contains(&key) {
            return Err(CliError::config(key, "given more than once"));
        }
        slot.push(value.to_string());
        Ok(())
    }

    /// Replaces keys from the environment. A repeatable key takes its
    /// occurrences separated by `;`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        for key in KEYS {
            if let Some(v) = lookup(&env_name(key)) {
                let values = if REPEATABLE.contains(key) {
                    v.split(';').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
                } else {
                    vec![v.trim().to_string()]
                };
                self.entries.insert(key.to_string(), values);
            }
        }
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).and_then(|v| v.first()).map(String::as_str)
    }

    fn all(&self, key: &str) -> &[String] {
        self.entries.get(key).map_or(&[], Vec::as_slice)
    }

    fn number<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|_| CliError::config(key, format!("cannot parse `{v}`"))))
            .transpose()
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.get(key).map(|v| parse_list(key, v)).transpose()
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    let inner = value.trim().trim_start_matches('[').trim_end_matches(']');
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .map_err(|_| CliError::config(key, format!("cannot parse `{s}` as a number")))
        })
        .collect()
}

/// `name` or `name(a, b, ...)`.
fn parse_call(key: &str, value: &str) -> Result<(String, Vec<f64>), CliError> {
    let value = value.trim();
    match value.split_once('(') {
        None => Ok((value.to_string(), Vec::new())),
        Some((name, rest)) => {
            let Some(args) = rest.strip_suffix(')') else {
                return Err(CliError::config(key, format!("unbalanced parentheses in `{value}`")));
            };
            Ok((name.trim().to_string(), parse_list(key, args)?))
        }
    }
}

fn expect_args(key: &str, name: &str, args: &[f64], n: usize) -> Result<(), CliError> {
    if args.len() != n {
        return Err(CliError::config(
            key,
            format!("`{name}` takes {n} argument(s), got {}", args.len()),
        ));
    }
    Ok(())
}

fn parse_field(key: &str, value: &str, gamma: f64, density: bool) -> Result<ScalarField, CliError> {
    let (name, args) = parse_call(key, value)?;
    let field = match name.as_str() {
        "zero" => {
            expect_args(key, &name, &args, 0)?;
            ScalarField::Zero
        }
        "constant" => {
            expect_args(key, &name, &args, 1)?;
            ScalarField::Constant(args[0])
        }
        "gaussian_bump" => {
            expect_args(key, &name, &args, 3)?;
            ScalarField::GaussianBump {
                center: vec![args[0]],
                width: args[1],
                scale: args[2],
            }
        }
        "sin_product" if !density => {
            expect_args(key, &name, &args, 1)?;
            ScalarField::SinProduct { scale: args[0] }
        }
        "manufactured" if !density => {
            expect_args(key, &name, &args, 0)?;
            ScalarField::Manufactured { gamma }
        }
        other => return Err(CliError::config(key, format!("unknown builtin `{other}`"))),
    };
    Ok(field)
}

#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub gamma: Vec<f64>,
    pub cells: Vec<usize>,
    pub mass: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dim: usize,
    pub cells: usize,
    pub margins: Vec<f64>,
    pub kind: Kind,
    pub gamma: f64,
    pub theta: Option<f64>,
    pub f: ScalarField,
    pub measure: RadonMeasure,
    pub schedule: Vec<u64>,
    pub solver: SolverConfig,
    pub sweep: SweepGrid,
    pub kato_mu2_scale: f64,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_text(text: &str, env: impl Fn(&str) -> Option<String>) -> Result<Self, CliError> {
        let mut raw = RawConfig::parse(text)?;
        raw.apply_env(env);
        Self::from_raw(&raw)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let dim = raw.number::<usize>("domain.dim")?.unwrap_or(1);
        if !(1..=3).contains(&dim) {
            return Err(CliError::config("domain.dim", format!("{dim} is not 1, 2 or 3")));
        }
        let cells = raw.number::<usize>("domain.cells")?.unwrap_or(64);
        Grid::new(dim, cells, 0.0).map_err(|e| CliError::config("domain.cells", e.to_string()))?;
        let margins = raw.list("domain.margins")?.unwrap_or_else(|| vec![0.125, 0.25]);
        if let Some(m) = margins.iter().find(|m| !(0.0..0.5).contains(*m)) {
            return Err(CliError::config("domain.margins", format!("{m} is outside [0, 0.5)")));
        }

        let gamma = raw.number::<f64>("h.gamma")?.unwrap_or(0.5);
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(CliError::config("h.gamma", format!("{gamma} must be positive")));
        }
        let theta = raw.number::<f64>("h.theta")?;
        let kind = match raw.get("h.kind").unwrap_or("pure_power") {
            "pure_power" => Kind::PurePower,
            "shifted_power" => Kind::ShiftedPower {
                shift: raw.number("h.shift")?.unwrap_or(1.0),
            },
            "bounded_plateau" => Kind::BoundedPlateau {
                plateau: raw.number("h.plateau")?.unwrap_or(1.0),
            },
            other => return Err(CliError::config("h.kind", format!("unknown kind `{other}`"))),
        };
        SingularNonlinearity::new(kind, gamma, theta).map_err(|e| CliError::config("h", e.to_string()))?;

        let f = parse_field("f", raw.get("f").unwrap_or("constant(1)"), gamma, false)?;
        f.validate(dim).map_err(|e| CliError::config("f", e.to_string()))?;

        let mut measure = match raw.get("measure.density") {
            Some(v) => RadonMeasure::with_density(parse_field("measure.density", v, gamma, true)?),
            None => RadonMeasure::zero(),
        };
        for atom in raw.all("measure.atom") {
            let nums = parse_list("measure.atom", atom)?;
            if nums.len() < dim + 1 {
                return Err(CliError::config(
                    "measure.atom",
                    format!("`{atom}` needs {dim} coordinate(s) and a mass"),
                ));
            }
            let mass = nums[nums.len() - 1];
            measure = measure.with_atom(&nums[..dim], mass);
        }
        measure.validate(dim).map_err(|e| CliError::config("measure", e.to_string()))?;

        let schedule = match raw.list("solver.schedule")? {
            Some(list) => list
                .iter()
                .map(|&x| {
                    if x >= 1.0 && x.fract() == 0.0 {
                        Ok(x as u64)
                    } else {
                        Err(CliError::config("solver.schedule", format!("{x} is not a positive integer")))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => default_schedule(),
        };
        if schedule.is_empty() || schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::config("solver.schedule", "must be non-empty and strictly increasing"));
        }

        let mut solver = SolverConfig::for_dim(dim);
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::config(key, format!("{v} must be positive")))
            }
        };
        if let Some(v) = raw.number("solver.tol_fp")? {
            solver.tol_fp = positive("solver.tol_fp", v)?;
        }
        if let Some(v) = raw.number("solver.tol_lin")? {
            solver.tol_lin = positive("solver.tol_lin", v)?;
        }
        if let Some(v) = raw.number("solver.tol_mono")? {
            solver.tol_mono = positive("solver.tol_mono", v)?;
        }
        if let Some(v) = raw.number("solver.tol_seq")? {
            solver.tol_seq = positive("solver.tol_seq", v)?;
        }
        if let Some(v) = raw.number::<usize>("solver.max_iters")? {
            if v == 0 {
                return Err(CliError::config("solver.max_iters", "must be >= 1"));
            }
            solver.max_iters = v;
        }
        if let Some(v) = raw.number::<f64>("solver.damping")? {
            if !(v > 0.0 && v <= 1.0) {
                return Err(CliError::config("solver.damping", format!("{v} is outside (0, 1]")));
            }
            solver.damping = Some(v);
        }
        if let Some(v) = raw.number::<bool>("solver.adaptive")? {
            solver.adaptive_damping = v;
        }

        let sweep = SweepGrid {
            gamma: raw.list("sweep.gamma")?.unwrap_or_else(|| vec![gamma]),
            cells: match raw.list("sweep.cells")? {
                Some(list) => list
                    .iter()
                    .map(|&c| {
                        if c >= 2.0 && c.fract() == 0.0 {
                            Ok(c as usize)
                        } else {
                            Err(CliError::config("sweep.cells", format!("{c} is not an integer >= 2")))
                        }
                    })
                    .collect::<Result<_, _>>()?,
                None => vec![cells],
            },
            mass: raw.list("sweep.mass")?.unwrap_or_else(|| vec![1.0]),
        };
        if let Some(g) = sweep.gamma.iter().find(|g| !(**g > 0.0)) {
            return Err(CliError::config("sweep.gamma", format!("{g} must be positive")));
        }
        if let Some(m) = sweep.mass.iter().find(|m| !(**m >= 0.0)) {
            return Err(CliError::config("sweep.mass", format!("{m} must be >= 0")));
        }

        let kato_mu2_scale = raw.number::<f64>("kato.mu2_scale")?.unwrap_or(0.5);
        if !(kato_mu2_scale >= 0.0) {
            return Err(CliError::config("kato.mu2_scale", "must be >= 0"));
        }

        Ok(RunConfig {
            dim,
            cells,
            margins,
            kind,
            gamma,
            theta,
            f,
            measure,
            schedule,
            solver,
            sweep,
            kato_mu2_scale,
            seed: raw.number("seed")?.unwrap_or(0),
        })
    }

    pub fn nonlinearity(&self, gamma: f64) -> Result<SingularNonlinearity, CliError> {
        let theta = self.theta.map(|t| t.min(gamma));
        SingularNonlinearity::new(self.kind, gamma, theta).map_err(|e| CliError::config("h", e.to_string()))
    }

    pub fn grid(&self, cells: usize) -> Result<Arc<Grid>, CliError> {
        Grid::new(self.dim, cells, 0.0).map_err(|e| CliError::config("domain.cells", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::from_text(text, |_| None)
    }

    #[test]
    fn defaults() {
        let c = parse("").unwrap();
        assert_eq!((c.dim, c.cells), (1, 64));
        assert_eq!(c.schedule, default_schedule());
        assert_eq!(c.margins, vec![0.125, 0.25]);
        assert!(c.measure.atoms.is_empty());
    }

    #[test]
    fn full_file() {
        let c = parse(
            "# a comment\n\
             domain.dim = 2\n\
             domain.cells = 16   # trailing\n\
             h.kind = shifted_power\n\
             h.gamma = 2\n\
             h.shift = 0.5\n\
             f = gaussian_bump(0.5, 0.2, 3)\n\
             measure.atom = [0.25, 0.5, 0.0, 1.5]\n\
             measure.atom = [0.75, 0.5, 2]\n\
             measure.density = constant(0.1)\n\
             solver.schedule = [4, 16, 64]\n\
             sweep.gamma = 0.5, 1\n",
        )
        .unwrap();
        assert_eq!(c.dim, 2);
        assert_eq!(c.kind, Kind::ShiftedPower { shift: 0.5 });
        assert_eq!(c.measure.atoms.len(), 2);
        assert_eq!(c.measure.atoms[0].location, vec![0.25, 0.5]);
        assert_eq!(c.measure.atoms[1].mass, 2.0);
        assert_eq!(c.schedule, vec![4, 16, 64]);
        assert_eq!(c.sweep.gamma, vec![0.5, 1.0]);
        assert_eq!(c.sweep.cells, vec![16]);
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            ("h.gamma = -1", "h.gamma"),
            ("bogus = 1", "bogus"),
            ("h.gamma = 1\nh.gamma = 2", "h.gamma"),
            ("domain.dim = 4", "domain.dim"),
            ("solver.schedule = [4, 2]", "solver.schedule"),
            ("measure.atom = [0.5]", "measure.atom"),
            ("f = cubic(1)", "f"),
            ("solver.tol_fp = 0", "solver.tol_fp"),
            ("just text", "line 1"),
        ];
        for (text, key) in cases {
            match parse(text) {
                Err(CliError::Config { key: k, .. }) => assert_eq!(k, key, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn environment_overrides_file() {
        let env = |name: &str| match name {
            "SINGULAR_H_GAMMA" => Some("2.5".to_string()),
            "SINGULAR_MEASURE_ATOM" => Some("[0.2, 1]; [0.8, 3]".to_string()),
            _ => None,
        };
        let c = RunConfig::from_text("h.gamma = 0.5\nmeasure.atom = [0.5, 1]", env).unwrap();
        assert_eq!(c.gamma, 2.5);
        let masses: Vec<f64> = c.measure.atoms.iter().map(|a| a.mass).collect();
        assert_eq!(masses, vec![1.0, 3.0]);
        assert_eq!(env_name("solver.tol_fp"), "SINGULAR_SOLVER_TOL_FP");
    }
}
