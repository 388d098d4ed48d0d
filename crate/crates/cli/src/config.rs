//! Scenario configuration: flat `key: value` lines under `[section]`
//! headers. Every key in [`SCHEMA`] is required; unknown or repeated keys
//! are rejected.

use std::path::Path;
use std::str::FromStr;

use ini::Ini;
use waveguide_core::grid::ObservedSide;
use waveguide_core::{SpaceTimeGrid, WaveguideDomain};

use crate::CliError;

/// `(section, key, reference value, description)`.
pub const SCHEMA: &[(&str, &str, &str, &str)] = &[
    ("run", "seed", "7", "seed of the random test functions"),
    ("domain", "half_length", "1.0", "L, half-length of the bounded waveguide"),
    ("domain", "height", "1.0", "h, cross-section height"),
    ("domain", "final_time", "1.0", "T"),
    ("domain", "alpha", "0.0", "anchor abscissa, inside (-L, L)"),
    ("domain", "observed", "top", "observed wall: top or bottom"),
    ("grid", "n1", "31", "interior nodes in x1"),
    ("grid", "n2", "31", "interior nodes in x2"),
    ("grid", "nt", "64", "time steps"),
    ("weights", "lambda", "1.0", "weight sharpness for the bounded regime"),
    ("weights", "delta", "0.5", "offset of psi2 on the non-observed wall"),
    ("weights", "c1", "0.5", "minimum of psi1 in the bounded regime"),
    ("weights", "open_radius", "1.0", "truncation radius R checked by check-weights"),
    ("forward", "preset", "separable", "separable (closed-form oracle) or scenario"),
    ("forward", "q0", "1.0", "amplitude of the separable oracle potential"),
    ("scenario", "q0", "1.0", "amplitude of the scenario potential q"),
    ("scenario", "f_amplitude", "0.5", "amplitude a of f = 1 + a cos(pi x1 / L)"),
    ("scenario", "theta", "0.1", "perturbation size for the pipeline z"),
    ("lemmas", "s_list", "1,2,4,8,16", "Carleman parameters for the bounded lemma"),
    ("lemmas", "draws", "10", "number of random F draws"),
    ("lemmas", "modes", "4", "cosine modes per direction in each draw"),
    ("lemmas", "open_radius", "1.0", "truncation radius for the open lemma"),
    ("lemmas", "open_n1", "399", "interior nodes in x1 for the open lemma"),
    ("lemmas", "open_n2", "15", "interior nodes in x2 for the open lemma"),
    ("lemmas", "open_nt", "16", "time steps for the open lemma"),
    ("lemmas", "open_final_time", "1.0", "T for the open lemma"),
    ("lemmas", "open_lambda", "1.5", "weight sharpness for the open lemma"),
    ("lemmas", "open_s_list", "4,8,16,32,64", "Carleman parameters for the open lemma"),
    ("carleman", "s_list", "2,4,8,16,32", "Carleman parameters for the bounded estimate"),
    ("carleman", "open_radius", "0.5", "truncation radius for the open estimate"),
    ("carleman", "open_n", "31", "interior nodes per direction for the open estimate"),
    ("carleman", "open_nt", "64", "time steps for the open estimate"),
    ("carleman", "open_final_time", "4.0", "T for the open estimate"),
    ("carleman", "open_lambda", "0.5", "weight sharpness for the open estimate"),
    ("carleman", "open_s_list", "1,2,4", "Carleman parameters for the open estimate"),
    ("stability", "thetas", "0.1,0.05,0.025", "perturbation sizes"),
    ("stability", "epsilons", "0.05,0.1,0.2", "time margins"),
];

/// The reference configuration with one comment line per key.
pub fn reference_text() -> String {
    let mut out = String::new();
    let mut section = "";
    for (sec, key, value, doc) in SCHEMA {
        if *sec != section {
            if !section.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!("[{sec}]\n"));
            section = sec;
        }
        out.push_str(&format!("# {doc}\n{key}: {value}\n"));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainConfig {
    pub half_length: f64,
    pub height: f64,
    pub final_time: f64,
    pub alpha: f64,
    pub observed: ObservedSide,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub n1: usize,
    pub n2: usize,
    pub nt: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightsConfig {
    pub lambda: f64,
    pub delta: f64,
    pub c1: f64,
    pub open_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardPreset {
    Separable,
    Scenario,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardConfig {
    pub preset: ForwardPreset,
    pub q0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSection {
    pub q0: f64,
    pub f_amplitude: f64,
    pub theta: f64,
}

/// A truncated-domain experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenSetup {
    pub radius: f64,
    pub n1: usize,
    pub n2: usize,
    pub nt: usize,
    pub final_time: f64,
    pub lambda: f64,
    pub s_list: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmasConfig {
    pub s_list: Vec<f64>,
    pub draws: u64,
    pub modes: usize,
    pub open: OpenSetup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarlemanConfig {
    pub s_list: Vec<f64>,
    pub open: OpenSetup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityConfig {
    pub thetas: Vec<f64>,
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub domain: DomainConfig,
    pub grid: GridConfig,
    pub weights: WeightsConfig,
    pub forward: ForwardConfig,
    pub scenario: ScenarioSection,
    pub lemmas: LemmasConfig,
    pub carleman: CarlemanConfig,
    pub stability: StabilityConfig,
}

struct Raw(Ini);

impl Raw {
    fn text(&self, sec: &str, key: &str) -> Result<&str, CliError> {
        self.0
            .section(Some(sec))
            .and_then(|p| p.get(key))
            .map(str::trim)
            .ok_or_else(|| CliError::Config(format!("missing key `{sec}.{key}`")))
    }

    fn parse<T: FromStr>(&self, sec: &str, key: &str) -> Result<T, CliError> {
        let v = self.text(sec, key)?;
        v.parse()
            .map_err(|_| CliError::Config(format!("key `{sec}.{key}`: cannot parse `{v}`")))
    }

    fn list(&self, sec: &str, key: &str) -> Result<Vec<f64>, CliError> {
        parse_list(self.text(sec, key)?).map_err(|e| CliError::Config(format!("key `{sec}.{key}`: {e}")))
    }
}

/// Comma-separated list of positive finite reals.
pub fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    let items: Result<Vec<f64>, String> = text
        .split(',')
        .map(|s| {
            let s = s.trim();
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
                _ => Err(format!("`{s}` is not a positive number")),
            }
        })
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err("empty list".into());
    }
    Ok(items)
}

fn check_keys(ini: &Ini) -> Result<(), CliError> {
    for (sec, props) in ini.iter() {
        let Some(sec) = sec else {
            if let Some((k, _)) = props.iter().next() {
                return Err(CliError::Config(format!("key `{k}` appears before any section header")));
            }
            continue;
        };
        if !SCHEMA.iter().any(|e| e.0 == sec) {
            return Err(CliError::Config(format!("unknown section `[{sec}]`")));
        }
        for (k, _) in props.iter() {
            if !SCHEMA.iter().any(|e| e.0 == sec && e.1 == k) {
                return Err(CliError::Config(format!("unknown key `{sec}.{k}`")));
            }
            if props.get_all(k).count() > 1 {
                return Err(CliError::Config(format!("key `{sec}.{k}` is repeated")));
            }
        }
    }
    Ok(())
}

fn open_setup(raw: &Raw, sec: &str, n_keys: &[&str], prefix_s: &str) -> Result<OpenSetup, CliError> {
    let (n1, n2) = match n_keys {
        [n] => {
            let v = raw.parse(sec, n)?;
            (v, v)
        }
        [a, b] => (raw.parse(sec, a)?, raw.parse(sec, b)?),
        _ => unreachable!("one or two node-count keys"),
    };
    Ok(OpenSetup {
        radius: raw.parse(sec, "open_radius")?,
        n1,
        n2,
        nt: raw.parse(sec, "open_nt")?,
        final_time: raw.parse(sec, "open_final_time")?,
        lambda: raw.parse(sec, "open_lambda")?,
        s_list: raw.list(sec, prefix_s)?,
    })
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(format!("malformed config: {e}")))?;
        check_keys(&ini)?;
        let raw = Raw(ini);
        let observed = raw.text("domain", "observed")?;
        let preset = raw.text("forward", "preset")?;
        let cfg = ScenarioConfig {
            seed: raw.parse("run", "seed")?,
            domain: DomainConfig {
                half_length: raw.parse("domain", "half_length")?,
                height: raw.parse("domain", "height")?,
                final_time: raw.parse("domain", "final_time")?,
                alpha: raw.parse("domain", "alpha")?,
                observed: ObservedSide::from_name(observed)
                    .ok_or_else(|| CliError::Config(format!("key `domain.observed`: `{observed}` is not top or bottom")))?,
            },
            grid: GridConfig {
                n1: raw.parse("grid", "n1")?,
                n2: raw.parse("grid", "n2")?,
                nt: raw.parse("grid", "nt")?,
            },
            weights: WeightsConfig {
                lambda: raw.parse("weights", "lambda")?,
                delta: raw.parse("weights", "delta")?,
                c1: raw.parse("weights", "c1")?,
                open_radius: raw.parse("weights", "open_radius")?,
            },
            forward: ForwardConfig {
                preset: match preset {
                    "separable" => ForwardPreset::Separable,
                    "scenario" => ForwardPreset::Scenario,
                    other => {
                        return Err(CliError::Config(format!(
                            "key `forward.preset`: `{other}` is not separable or scenario"
                        )))
                    }
                },
                q0: raw.parse("forward", "q0")?,
            },
            scenario: ScenarioSection {
                q0: raw.parse("scenario", "q0")?,
                f_amplitude: raw.parse("scenario", "f_amplitude")?,
                theta: raw.parse("scenario", "theta")?,
            },
            lemmas: LemmasConfig {
                s_list: raw.list("lemmas", "s_list")?,
                draws: raw.parse("lemmas", "draws")?,
                modes: raw.parse("lemmas", "modes")?,
                open: open_setup(&raw, "lemmas", &["open_n1", "open_n2"], "open_s_list")?,
            },
            carleman: CarlemanConfig {
                s_list: raw.list("carleman", "s_list")?,
                open: open_setup(&raw, "carleman", &["open_n"], "open_s_list")?,
            },
            stability: StabilityConfig {
                thetas: raw.list("stability", "thetas")?,
                epsilons: raw.list("stability", "epsilons")?,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.bounded_grid()?;
        let bad = |key: &str, why: String| Err(CliError::Config(format!("key `{key}`: {why}")));
        if self.lemmas.draws == 0 {
            return bad("lemmas.draws", "must be at least 1".into());
        }
        if self.lemmas.modes == 0 {
            return bad("lemmas.modes", "must be at least 1".into());
        }
        if self.scenario.theta.is_nan() || self.scenario.theta <= 0.0 {
            return bad("scenario.theta", "must be positive".into());
        }
        let half = 0.5 * self.domain.final_time;
        if let Some(e) = self.stability.epsilons.iter().find(|e| **e >= half) {
            return bad("stability.epsilons", format!("{e} is not below T/2 = {half}"));
        }
        for (key, setup) in [("lemmas", &self.lemmas.open), ("carleman", &self.carleman.open)] {
            self.open_grid(setup).map_err(|e| CliError::Config(format!("section `[{key}]` open setup: {e}")))?;
        }
        self.open_grid(&OpenSetup {
            radius: self.weights.open_radius,
            n1: self.grid.n1,
            n2: self.grid.n2,
            nt: self.grid.nt,
            final_time: self.domain.final_time,
            lambda: self.weights.lambda,
            s_list: vec![1.0],
        })
        .map_err(|e| CliError::Config(format!("key `weights.open_radius`: {e}")))?;
        Ok(())
    }

    pub fn bounded_grid(&self) -> Result<SpaceTimeGrid, CliError> {
        let d = &self.domain;
        let domain = WaveguideDomain::bounded(d.half_length, d.height, d.final_time, d.alpha)
            .map_err(|e| CliError::Config(format!("section `[domain]`: {e}")))?
            .with_observed(d.observed);
        SpaceTimeGrid::new(domain, self.grid.n1, self.grid.n2, self.grid.nt)
            .map_err(|e| CliError::Config(format!("section `[grid]`: {e}")))
    }

    pub fn open_grid(&self, setup: &OpenSetup) -> Result<SpaceTimeGrid, CliError> {
        let d = &self.domain;
        let domain = WaveguideDomain::truncated(setup.radius, d.height, setup.final_time, d.alpha)
            .map_err(|e| CliError::Config(e.to_string()))?
            .with_observed(d.observed);
        SpaceTimeGrid::new(domain, setup.n1, setup.n2, setup.nt).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_parses() {
        let cfg = ScenarioConfig::parse(&reference_text()).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.lemmas.s_list, vec![1.0, 2.0, 4.0, 8.0, 16.0]);
        assert_eq!(cfg.carleman.open.n1, 31);
        assert_eq!(cfg.forward.preset, ForwardPreset::Separable);
    }

    #[test]
    fn missing_key_is_named() {
        let text = reference_text().replace("\nnt: 64\n", "\n");
        let err = ScenarioConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("grid.nt"), "{err}");
    }

    #[test]
    fn unknown_and_repeated_keys_rejected() {
        let text = reference_text().replace("[grid]\n", "[grid]\nbogus: 1\n");
        assert!(ScenarioConfig::parse(&text).unwrap_err().to_string().contains("grid.bogus"));
        let text = reference_text().replace("[grid]\n", "[grid]\nn1: 15\n");
        assert!(ScenarioConfig::parse(&text).unwrap_err().to_string().contains("repeated"));
    }

    #[test]
    fn bad_values_rejected() {
        let text = reference_text().replace("observed: top", "observed: left");
        assert!(ScenarioConfig::parse(&text).unwrap_err().to_string().contains("domain.observed"));
        let text = reference_text().replace("alpha: 0.0", "alpha: 3.0");
        assert!(ScenarioConfig::parse(&text).is_err());
        assert!(parse_list("1,-2").is_err());
        assert!(parse_list("").is_err());
        assert_eq!(parse_list(" 1, 2.5 ").unwrap(), vec![1.0, 2.5]);
    }
}
