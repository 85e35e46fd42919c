//! Experiment configuration: a strict sectioned key=value format, named
//! presets for the shipped benchmark families, and a canonical serializer
//! whose output parses back to the same specification.
//!
//! Sections are `[experiment]`, `[data]`, `[solver]`, and `[output]`. Unknown
//! keys and malformed values are errors carrying the offending line number.

use std::path::PathBuf;

use fracsolve_core::admm::AdmmConfig;
use fracsolve_core::solver::{SolverConfig, SolverMode};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    L1Sk,
    Ct,
    Portfolio,
    Sharpe,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::L1Sk => "l1sk",
            Family::Ct => "ct",
            Family::Portfolio => "portfolio",
            Family::Sharpe => "sharpe",
        }
    }

    fn parse(s: &str) -> Option<Family> {
        match s {
            "l1sk" => Some(Family::L1Sk),
            "ct" => Some(Family::Ct),
            "portfolio" => Some(Family::Portfolio),
            "sharpe" => Some(Family::Sharpe),
            _ => None,
        }
    }
}

/// Family-specific dataset dimensions.
#[derive(Debug, Clone, PartialEq)]
pub enum DataParams {
    L1Sk {
        m: usize,
        n: usize,
        kappa: usize,
        coherence: f64,
        noise: f64,
        lambda: f64,
    },
    Ct {
        side: usize,
        angles: usize,
        max_angle: f64,
        rays: usize,
        noise: f64,
        lambda: f64,
    },
    Portfolio {
        n: usize,
        m: usize,
    },
    Sharpe {
        n: usize,
    },
}

impl DataParams {
    pub fn family(&self) -> Family {
        match self {
            DataParams::L1Sk { .. } => Family::L1Sk,
            DataParams::Ct { .. } => Family::Ct,
            DataParams::Portfolio { .. } => Family::Portfolio,
            DataParams::Sharpe { .. } => Family::Sharpe,
        }
    }

    /// Compact `key=value;...` label used in result rows.
    pub fn label(&self) -> String {
        match self {
            DataParams::L1Sk { m, n, kappa, coherence, noise, lambda } => format!(
                "m={m};n={n};kappa={kappa};F={coherence};noise={noise};lambda={lambda}"
            ),
            DataParams::Ct { side, angles, max_angle, rays, noise, lambda } => format!(
                "side={side};angles={angles};max_angle={max_angle};rays={rays};noise={noise};lambda={lambda}"
            ),
            DataParams::Portfolio { n, m } => format!("n={n};m={m}"),
            DataParams::Sharpe { n } => format!("n={n}"),
        }
    }
}

/// A fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub data: DataParams,
    pub solver: SolverConfig,
    pub admm: AdmmConfig,
    pub repetitions: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub write_trace: bool,
    pub write_json: bool,
}

impl ExperimentSpec {
    pub fn family(&self) -> Family {
        self.data.family()
    }

    fn base(data: DataParams) -> ExperimentSpec {
        ExperimentSpec {
            data,
            solver: SolverConfig::default(),
            admm: AdmmConfig::default(),
            repetitions: 1,
            seed: 0,
            out_dir: PathBuf::from("out"),
            write_trace: true,
            write_json: true,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.solver
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.admm
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.repetitions == 0 {
            return Err(CliError::Config("repetitions must be at least 1".into()));
        }
        match &self.data {
            DataParams::L1Sk { m, n, kappa, coherence, noise, lambda } => {
                if *m == 0 || *n == 0 || *kappa == 0 || *kappa > *n {
                    return Err(CliError::Config(
                        "l1sk needs m, n >= 1 and kappa in [1, n]".into(),
                    ));
                }
                if *coherence <= 0.0 || *noise < 0.0 || *lambda < 0.0 {
                    return Err(CliError::Config(
                        "l1sk needs F > 0, noise >= 0, lambda >= 0".into(),
                    ));
                }
                if *kappa as f64 * 2.0 * coherence > *n as f64 {
                    return Err(CliError::Config(format!(
                        "support spacing infeasible: kappa * 2F = {} exceeds n = {n}",
                        *kappa as f64 * 2.0 * coherence
                    )));
                }
            }
            DataParams::Ct { side, angles, max_angle, rays, noise, lambda } => {
                if *side < 16 {
                    return Err(CliError::Config("ct needs side >= 16".into()));
                }
                if *angles == 0 || *rays == 0 || *max_angle <= 0.0 {
                    return Err(CliError::Config(
                        "ct needs angles >= 1, rays >= 1, max_angle > 0".into(),
                    ));
                }
                if *noise < 0.0 || *lambda < 0.0 {
                    return Err(CliError::Config("ct needs noise >= 0 and lambda >= 0".into()));
                }
            }
            DataParams::Portfolio { n, m } => {
                if *n < 2 || *m == 0 || *m >= *n {
                    return Err(CliError::Config(
                        "portfolio needs n >= 2 and 1 <= m < n".into(),
                    ));
                }
            }
            DataParams::Sharpe { n } => {
                if *n < 2 {
                    return Err(CliError::Config("sharpe needs n >= 2".into()));
                }
            }
        }
        Ok(())
    }
}

fn default_rays(side: usize) -> usize {
    (side as f64 * std::f64::consts::SQRT_2).ceil() as usize
}

/// Named presets reproducing the shipped benchmark setups, one flag per
/// experiment family.
pub fn preset(name: &str) -> Result<ExperimentSpec, CliError> {
    let spec = match name {
        "l1sk" => {
            let mut s = ExperimentSpec::base(DataParams::L1Sk {
                m: 64,
                n: 1024,
                kappa: 4,
                coherence: 1.0,
                noise: 0.0,
                lambda: 1e-3,
            });
            s.solver.mode = SolverMode::LineSearch;
            s.solver.sigma = 1.35;
            s.solver.rho1 = 1e-3;
            s.solver.bb_damping = 0.8;
            s.solver.q = 0.9;
            s.solver.window = 20;
            s.solver.max_backtracks = 250;
            s.solver.tol = 1e-6;
            s.solver.max_iter = 5000;
            s
        }
        "ct" | "ct-noise05" => {
            let (lambda, noise) = if name == "ct" { (0.25, 0.0) } else { (1.0, 0.005) };
            let mut s = ExperimentSpec::base(DataParams::Ct {
                side: 128,
                angles: 30,
                max_angle: 150.0,
                rays: default_rays(128),
                noise,
                lambda,
            });
            s.solver.mode = SolverMode::LineSearch;
            s.solver.sigma = 1.0;
            s.solver.bb_damping = 0.8;
            s.solver.q = 0.95;
            s.solver.window = 5;
            s.solver.rho1 = 1e-3;
            s.solver.max_backtracks = 250;
            s.solver.tol = 1e-6;
            s.solver.max_iter = 5000;
            s.admm = AdmmConfig::default();
            s
        }
        "portfolio" => {
            let mut s = ExperimentSpec::base(DataParams::Portfolio { n: 200, m: 1 });
            s.solver.mode = SolverMode::LineSearch;
            s.solver.sigma = 1.05;
            s.solver.rho1 = 1e-3;
            s.solver.bb_damping = 0.82;
            s.solver.q = 0.95;
            s.solver.window = 20;
            s.solver.max_backtracks = 250;
            s.solver.tol = 1e-8;
            s.solver.max_iter = 3000;
            s
        }
        "sharpe" => {
            let mut s = ExperimentSpec::base(DataParams::Sharpe { n: 10 });
            s.solver.mode = SolverMode::LineSearch;
            s
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown preset {other:?}; available: l1sk, ct, ct-noise05, portfolio, sharpe"
            )))
        }
    };
    Ok(spec)
}

struct RawEntry {
    section: String,
    key: String,
    value: String,
    line: usize,
}

fn tokenize(text: &str) -> Result<Vec<RawEntry>, CliError> {
    let mut entries = Vec::new();
    let mut section = String::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| {
                CliError::Config(format!("line {line_no}: unterminated section header"))
            })?;
            section = name.trim().to_string();
            if !matches!(section.as_str(), "experiment" | "data" | "solver" | "output") {
                return Err(CliError::Config(format!(
                    "line {line_no}: unknown section [{section}]"
                )));
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("line {line_no}: expected `key = value`"))
        })?;
        if section.is_empty() {
            return Err(CliError::Config(format!(
                "line {line_no}: key outside of any section"
            )));
        }
        entries.push(RawEntry {
            section: section.clone(),
            key: key.trim().to_string(),
            value: value.trim().to_string(),
            line: line_no,
        });
    }
    Ok(entries)
}

fn bad_value(e: &RawEntry, what: &str) -> CliError {
    CliError::Config(format!(
        "line {}: key `{}` in section [{}] expects {what}, got {:?}",
        e.line, e.key, e.section, e.value
    ))
}

fn parse_f64(e: &RawEntry) -> Result<f64, CliError> {
    e.value.parse().map_err(|_| bad_value(e, "a number"))
}

fn parse_usize(e: &RawEntry) -> Result<usize, CliError> {
    e.value.parse().map_err(|_| bad_value(e, "a nonnegative integer"))
}

fn parse_u64(e: &RawEntry) -> Result<u64, CliError> {
    e.value.parse().map_err(|_| bad_value(e, "a nonnegative integer"))
}

fn parse_bool(e: &RawEntry) -> Result<bool, CliError> {
    match e.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad_value(e, "true or false")),
    }
}

/// Parse a configuration file into a fully resolved spec.
///
/// `[experiment] preset` (when present) seeds every field; later keys
/// override. Without a preset, `family` is required and family defaults
/// apply.
pub fn parse_config(text: &str) -> Result<ExperimentSpec, CliError> {
    let entries = tokenize(text)?;

    // Pass 1: preset and family decide the base spec.
    let mut preset_name: Option<(String, usize)> = None;
    let mut family: Option<(Family, usize)> = None;
    for e in entries.iter().filter(|e| e.section == "experiment") {
        match e.key.as_str() {
            "preset" => preset_name = Some((e.value.clone(), e.line)),
            "family" => {
                let f = Family::parse(&e.value).ok_or_else(|| {
                    bad_value(e, "one of l1sk, ct, portfolio, sharpe")
                })?;
                family = Some((f, e.line));
            }
            _ => {}
        }
    }
    let mut spec = match (&preset_name, &family) {
        (Some((name, _)), fam) => {
            let s = preset(name)?;
            if let Some((f, line)) = fam {
                if *f != s.family() {
                    return Err(CliError::Config(format!(
                        "line {line}: family {} conflicts with preset {name:?}",
                        f.as_str()
                    )));
                }
            }
            s
        }
        (None, Some((f, _))) => default_spec_for(*f),
        (None, None) => {
            return Err(CliError::Config(
                "missing required key `family` (or `preset`) in [experiment]".into(),
            ))
        }
    };

    // Pass 2: apply overrides strictly.
    let mut rays_set = false;
    let mut side_set = false;
    for e in &entries {
        match e.section.as_str() {
            "experiment" => match e.key.as_str() {
                "preset" | "family" => {}
                "repetitions" => spec.repetitions = parse_usize(e)?,
                "seed" => spec.seed = parse_u64(e)?,
                _ => return Err(unknown_key(e)),
            },
            "data" => apply_data_key(&mut spec.data, e, &mut rays_set, &mut side_set)?,
            "solver" => apply_solver_key(&mut spec.solver, &mut spec.admm, e)?,
            "output" => match e.key.as_str() {
                "dir" => spec.out_dir = PathBuf::from(&e.value),
                "trace" => spec.write_trace = parse_bool(e)?,
                "json" => spec.write_json = parse_bool(e)?,
                _ => return Err(unknown_key(e)),
            },
            _ => unreachable!("sections validated during tokenizing"),
        }
    }

    // A changed side re-derives the default detector count unless rays was
    // given explicitly.
    if side_set && !rays_set {
        if let DataParams::Ct { side, rays, .. } = &mut spec.data {
            *rays = default_rays(*side);
        }
    }

    spec.validate()?;
    Ok(spec)
}

fn default_spec_for(family: Family) -> ExperimentSpec {
    match family {
        Family::L1Sk => preset("l1sk").expect("built-in preset"),
        Family::Ct => preset("ct").expect("built-in preset"),
        Family::Portfolio => preset("portfolio").expect("built-in preset"),
        Family::Sharpe => preset("sharpe").expect("built-in preset"),
    }
}

fn unknown_key(e: &RawEntry) -> CliError {
    CliError::Config(format!(
        "line {}: unknown key `{}` in section [{}]",
        e.line, e.key, e.section
    ))
}

fn apply_data_key(
    data: &mut DataParams,
    e: &RawEntry,
    rays_set: &mut bool,
    side_set: &mut bool,
) -> Result<(), CliError> {
    match data {
        DataParams::L1Sk { m, n, kappa, coherence, noise, lambda } => match e.key.as_str() {
            "m" => *m = parse_usize(e)?,
            "n" => *n = parse_usize(e)?,
            "kappa" => *kappa = parse_usize(e)?,
            "F" => *coherence = parse_f64(e)?,
            "noise" => *noise = parse_f64(e)?,
            "lambda" => *lambda = parse_f64(e)?,
            _ => return Err(unknown_key(e)),
        },
        DataParams::Ct { side, angles, max_angle, rays, noise, lambda } => match e.key.as_str() {
            "side" => {
                *side = parse_usize(e)?;
                *side_set = true;
            }
            "angles" => *angles = parse_usize(e)?,
            "max_angle" => *max_angle = parse_f64(e)?,
            "rays" => {
                *rays = parse_usize(e)?;
                *rays_set = true;
            }
            "noise" => *noise = parse_f64(e)?,
            "lambda" => *lambda = parse_f64(e)?,
            _ => return Err(unknown_key(e)),
        },
        DataParams::Portfolio { n, m } => match e.key.as_str() {
            "n" => *n = parse_usize(e)?,
            "m" => *m = parse_usize(e)?,
            _ => return Err(unknown_key(e)),
        },
        DataParams::Sharpe { n } => match e.key.as_str() {
            "n" => *n = parse_usize(e)?,
            _ => return Err(unknown_key(e)),
        },
    }
    Ok(())
}

fn apply_solver_key(
    solver: &mut SolverConfig,
    admm: &mut AdmmConfig,
    e: &RawEntry,
) -> Result<(), CliError> {
    match e.key.as_str() {
        "mode" => {
            solver.mode = match e.value.as_str() {
                "fixed" => SolverMode::Fixed,
                "linesearch" => SolverMode::LineSearch,
                _ => return Err(bad_value(e, "fixed or linesearch")),
            }
        }
        "delta" => solver.delta = parse_f64(e)?,
        "sigma" => solver.sigma = parse_f64(e)?,
        "rho1" => solver.rho1 = parse_f64(e)?,
        "q" => solver.q = parse_f64(e)?,
        "T" => solver.window = parse_usize(e)?,
        "N" => solver.max_backtracks = parse_usize(e)?,
        "varsigma" => solver.bb_damping = parse_f64(e)?,
        "tol" => solver.tol = parse_f64(e)?,
        "max_iter" => solver.max_iter = parse_usize(e)?,
        "delta_min" => solver.delta_min = parse_f64(e)?,
        "delta_max" => solver.delta_max = parse_f64(e)?,
        "override_delta_guard" => solver.override_delta_guard = parse_bool(e)?,
        "trace_statres" => solver.trace_statres = parse_bool(e)?,
        "admm_alpha" => admm.alpha = parse_f64(e)?,
        "admm_beta" => admm.beta = parse_f64(e)?,
        "admm_outer" => admm.max_outer = parse_usize(e)?,
        "admm_cg_tol" => admm.cg_tol = parse_f64(e)?,
        "admm_cg_max" => admm.cg_max = parse_usize(e)?,
        "admm_outer_tol" => admm.outer_tol = parse_f64(e)?,
        _ => return Err(unknown_key(e)),
    }
    Ok(())
}

/// Canonical serialization; `parse_config(serialize(spec)) == spec`.
pub fn serialize(spec: &ExperimentSpec) -> String {
    let mut out = String::new();
    out.push_str("[experiment]\n");
    out.push_str(&format!("family = {}\n", spec.family().as_str()));
    out.push_str(&format!("repetitions = {}\n", spec.repetitions));
    out.push_str(&format!("seed = {}\n", spec.seed));
    out.push_str("\n[data]\n");
    match &spec.data {
        DataParams::L1Sk { m, n, kappa, coherence, noise, lambda } => {
            out.push_str(&format!("m = {m}\n"));
            out.push_str(&format!("n = {n}\n"));
            out.push_str(&format!("kappa = {kappa}\n"));
            out.push_str(&format!("F = {coherence}\n"));
            out.push_str(&format!("noise = {noise}\n"));
            out.push_str(&format!("lambda = {lambda}\n"));
        }
        DataParams::Ct { side, angles, max_angle, rays, noise, lambda } => {
            out.push_str(&format!("side = {side}\n"));
            out.push_str(&format!("angles = {angles}\n"));
            out.push_str(&format!("max_angle = {max_angle}\n"));
            out.push_str(&format!("rays = {rays}\n"));
            out.push_str(&format!("noise = {noise}\n"));
            out.push_str(&format!("lambda = {lambda}\n"));
        }
        DataParams::Portfolio { n, m } => {
            out.push_str(&format!("n = {n}\n"));
            out.push_str(&format!("m = {m}\n"));
        }
        DataParams::Sharpe { n } => {
            out.push_str(&format!("n = {n}\n"));
        }
    }
    out.push_str("\n[solver]\n");
    let s = &spec.solver;
    out.push_str(&format!(
        "mode = {}\n",
        match s.mode {
            SolverMode::Fixed => "fixed",
            SolverMode::LineSearch => "linesearch",
        }
    ));
    out.push_str(&format!("delta = {}\n", s.delta));
    out.push_str(&format!("sigma = {}\n", s.sigma));
    out.push_str(&format!("rho1 = {}\n", s.rho1));
    out.push_str(&format!("q = {}\n", s.q));
    out.push_str(&format!("T = {}\n", s.window));
    out.push_str(&format!("N = {}\n", s.max_backtracks));
    out.push_str(&format!("varsigma = {}\n", s.bb_damping));
    out.push_str(&format!("tol = {}\n", s.tol));
    out.push_str(&format!("max_iter = {}\n", s.max_iter));
    out.push_str(&format!("delta_min = {}\n", s.delta_min));
    out.push_str(&format!("delta_max = {}\n", s.delta_max));
    out.push_str(&format!("override_delta_guard = {}\n", s.override_delta_guard));
    out.push_str(&format!("trace_statres = {}\n", s.trace_statres));
    if spec.family() == Family::Ct {
        out.push_str(&format!("admm_alpha = {}\n", spec.admm.alpha));
        out.push_str(&format!("admm_beta = {}\n", spec.admm.beta));
        out.push_str(&format!("admm_outer = {}\n", spec.admm.max_outer));
        out.push_str(&format!("admm_cg_tol = {}\n", spec.admm.cg_tol));
        out.push_str(&format!("admm_cg_max = {}\n", spec.admm.cg_max));
        out.push_str(&format!("admm_outer_tol = {}\n", spec.admm.outer_tol));
    }
    out.push_str("\n[output]\n");
    out.push_str(&format!("dir = {}\n", spec.out_dir.display()));
    out.push_str(&format!("trace = {}\n", spec.write_trace));
    out.push_str(&format!("json = {}\n", spec.write_json));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_documented_defaults() {
        let spec = parse_config("[experiment]\nfamily = sharpe\n").unwrap();
        assert_eq!(spec.family(), Family::Sharpe);
        assert_eq!(spec.solver.sigma, 1.0);
        assert_eq!(spec.solver.q, 0.95);
        assert_eq!(spec.solver.window, 5);
        assert_eq!(spec.solver.rho1, 1e-3);
        assert_eq!(spec.solver.tol, 1e-6);
        assert_eq!(spec.solver.max_iter, 5000);
        assert_eq!(spec.repetitions, 1);
    }

    #[test]
    fn misspelled_key_is_an_error_naming_key_and_section() {
        let err = parse_config("[experiment]\nfamily = sharpe\n[solver]\nsigmaa = 1.0\n")
            .unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("sigmaa"), "{msg}");
        assert!(msg.contains("[solver]"), "{msg}");
        assert!(msg.contains("line 4"), "{msg}");
    }

    #[test]
    fn unknown_section_and_missing_family_are_errors() {
        assert!(parse_config("[wat]\nx = 1\n").is_err());
        assert!(parse_config("[solver]\nsigma = 1.0\n").is_err());
    }

    #[test]
    fn preset_plus_overrides() {
        let text = "[experiment]\npreset = portfolio\nrepetitions = 20\nseed = 3\n\
                    [data]\nm = 5\n[solver]\ntol = 1e-9\n";
        let spec = parse_config(text).unwrap();
        assert_eq!(spec.family(), Family::Portfolio);
        assert_eq!(spec.repetitions, 20);
        assert_eq!(spec.seed, 3);
        assert_eq!(spec.solver.tol, 1e-9);
        assert_eq!(spec.solver.sigma, 1.05);
        match spec.data {
            DataParams::Portfolio { n, m } => {
                assert_eq!((n, m), (200, 5));
            }
            _ => panic!("wrong family"),
        }
    }

    #[test]
    fn ct_rays_default_tracks_side_override() {
        let spec = parse_config("[experiment]\npreset = ct\n[data]\nside = 32\n").unwrap();
        match spec.data {
            DataParams::Ct { side, rays, .. } => {
                assert_eq!(side, 32);
                assert_eq!(rays, 46);
            }
            _ => panic!("wrong family"),
        }
        let spec =
            parse_config("[experiment]\npreset = ct\n[data]\nside = 32\nrays = 10\n").unwrap();
        match spec.data {
            DataParams::Ct { rays, .. } => assert_eq!(rays, 10),
            _ => panic!("wrong family"),
        }
    }

    #[test]
    fn roundtrip_through_serializer() {
        for name in ["l1sk", "ct", "ct-noise05", "portfolio", "sharpe"] {
            let mut spec = preset(name).unwrap();
            spec.seed = 17;
            spec.repetitions = 3;
            let text = serialize(&spec);
            let back = parse_config(&text).unwrap();
            assert_eq!(back, spec, "preset {name} does not round-trip");
            // Serialization is canonical: a second pass is identical.
            assert_eq!(serialize(&back), text);
        }
    }

    #[test]
    fn family_preset_conflict_detected() {
        let err = parse_config("[experiment]\npreset = ct\nfamily = sharpe\n").unwrap_err();
        assert!(format!("{err}").contains("conflicts"));
    }
}
