//! Experiment config files: `[section]` headers, `key = value` lines, `#` comments.

use std::fmt;
use std::str::FromStr;

use monoconv::lln::{HarnessConfig, DEFAULT_EPS, DEFAULT_EXACT_CHECKPOINTS, DEFAULT_MC_CHECKPOINTS};
use monoconv::{ConvolutionOptions, MeasureRule, MeasureSpec, NormalizerRule, SequenceSpec};

const SECTIONS: [(&str, &[&str]); 4] = [
    (
        "lln_harness",
        &[
            "measure_rule",
            "base",
            "alpha",
            "measures",
            "normalizer_rule",
            "power",
            "normalizers",
            "horizon",
            "eps",
            "mc_checkpoints",
            "exact_checkpoints",
            "classical_baseline",
        ],
    ),
    ("markov_chain", &["paths", "seed", "steps", "record"]),
    ("monotone_conv", &["merge_tol", "prune_tol", "max_atoms", "identity_check_points"]),
    ("cli", &["out", "quiet"]),
];

pub const DEFAULT_PATHS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    section: &'static str,
    key: &'static str,
    value: String,
    line: usize,
}

/// Syntactically valid config: every key known and set at most once.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigFile {
    entries: Vec<Entry>,
}

impl ConfigFile {
    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.section == section && e.key == key)
    }
}

impl FromStr for ConfigFile {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut entries: Vec<Entry> = Vec::new();
        let mut section: Option<(&'static str, &'static [&'static str])> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(line, format!("malformed section header `{content}`")))?
                    .trim();
                section = Some(
                    SECTIONS
                        .iter()
                        .find(|(s, _)| *s == name)
                        .copied()
                        .ok_or_else(|| ConfigError::at(line, format!("unknown section [{name}]")))?,
                );
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let (section_name, keys) =
                section.ok_or_else(|| ConfigError::at(line, format!("key `{key}` appears before any section")))?;
            let key = keys
                .iter()
                .find(|k| **k == key)
                .copied()
                .ok_or_else(|| ConfigError::at(line, format!("unknown key `{key}` in [{section_name}]")))?;
            if value.is_empty() {
                return Err(ConfigError::at(line, format!("empty value for `{key}`")));
            }
            if let Some(prev) = entries.iter().find(|e| e.section == section_name && e.key == key) {
                return Err(ConfigError::at(
                    line,
                    format!("duplicate key `{key}` (first set on line {})", prev.line),
                ));
            }
            entries.push(Entry {
                section: section_name,
                key,
                value: value.to_string(),
                line,
            });
        }
        Ok(Self { entries })
    }
}

fn parse_value<T: FromStr>(entry: &Entry, what: &str) -> Result<T, ConfigError> {
    entry
        .value
        .parse()
        .map_err(|_| ConfigError::at(entry.line, format!("`{}` must be {what}, got `{}`", entry.key, entry.value)))
}

fn parse_list<T: FromStr>(entry: &Entry, sep: char, what: &str) -> Result<Vec<T>, ConfigError> {
    entry
        .value
        .split(sep)
        .map(|item| {
            item.trim().parse().map_err(|_| {
                ConfigError::at(entry.line, format!("`{}` entries must be {what}, got `{}`", entry.key, item.trim()))
            })
        })
        .collect()
}

fn parse_measure(entry: &Entry, text: &str) -> Result<MeasureSpec, ConfigError> {
    text.trim()
        .parse()
        .map_err(|e| ConfigError::at(entry.line, format!("`{}`: `{}`: {e}", entry.key, text.trim())))
}

fn parse_bool(entry: &Entry) -> Result<bool, ConfigError> {
    match entry.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(ConfigError::at(entry.line, format!("`{}` must be true or false, got `{other}`", entry.key))),
    }
}

fn join<T: fmt::Display>(items: &[T], sep: &str) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(sep)
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub out: Option<String>,
    pub quiet: bool,
}

/// Fully resolved experiment parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub harness: HarnessConfig,
    pub steps: usize,
    pub record: Option<Vec<usize>>,
    pub out: Option<String>,
    pub quiet: bool,
}

impl RunConfig {
    pub fn resolve(file: &ConfigFile, overrides: &Overrides) -> Result<Self, ConfigError> {
        let get = |section: &str, key: &str| file.get(section, key);
        let lln = |key: &str| file.get("lln_harness", key);

        let eps = lln("eps").map(|e| parse_list(e, ',', "numbers")).transpose()?;
        let eps = eps.unwrap_or_else(|| DEFAULT_EPS.to_vec());
        if let Some(bad) = eps.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
            return Err(ConfigError::at(lln("eps").expect("set").line, format!("eps must be nonnegative, got {bad}")));
        }
        let checkpoints = |key, default: &[usize]| -> Result<Vec<usize>, ConfigError> {
            match lln(key) {
                Some(e) => {
                    let list: Vec<usize> = parse_list(e, ',', "positive integers")?;
                    if list.contains(&0) {
                        return Err(ConfigError::at(e.line, format!("`{key}` entries must be at least 1")));
                    }
                    Ok(list)
                }
                None => Ok(default.to_vec()),
            }
        };
        let mc_checkpoints = checkpoints("mc_checkpoints", &DEFAULT_MC_CHECKPOINTS)?;
        let exact_checkpoints = checkpoints("exact_checkpoints", &DEFAULT_EXACT_CHECKPOINTS)?;

        let rule_entry = lln("measure_rule")
            .ok_or_else(|| ConfigError::global("missing `measure_rule` in [lln_harness]"))?;
        let require = |key: &str| {
            lln(key).ok_or_else(|| {
                ConfigError::at(
                    rule_entry.line,
                    format!("measure_rule = {} needs `{key}`", rule_entry.value),
                )
            })
        };
        let measure_rule = match rule_entry.value.as_str() {
            "iid" => {
                let base = require("base")?;
                MeasureRule::Iid(parse_measure(base, &base.value)?)
            }
            "scaled" => {
                let base = require("base")?;
                let alpha = require("alpha")?;
                MeasureRule::Scaled {
                    base: parse_measure(base, &base.value)?,
                    alpha: parse_value(alpha, "a number")?,
                }
            }
            "explicit" => {
                let list = require("measures")?;
                let specs = list
                    .value
                    .split(';')
                    .map(|s| parse_measure(list, s))
                    .collect::<Result<Vec<_>, _>>()?;
                MeasureRule::Explicit(specs)
            }
            other => {
                return Err(ConfigError::at(
                    rule_entry.line,
                    format!("measure_rule must be iid, scaled or explicit, got `{other}`"),
                ))
            }
        };

        let normalizer_rule = match lln("normalizer_rule") {
            None => NormalizerRule::Linear,
            Some(e) => match e.value.as_str() {
                "linear" => NormalizerRule::Linear,
                "geometric" => NormalizerRule::Geometric,
                "power" => {
                    let p = lln("power")
                        .ok_or_else(|| ConfigError::at(e.line, "normalizer_rule = power needs `power`"))?;
                    NormalizerRule::Power(parse_value(p, "a number")?)
                }
                "explicit" => {
                    let list = lln("normalizers")
                        .ok_or_else(|| ConfigError::at(e.line, "normalizer_rule = explicit needs `normalizers`"))?;
                    NormalizerRule::Explicit(parse_list(list, ',', "numbers")?)
                }
                other => {
                    return Err(ConfigError::at(
                        e.line,
                        format!("normalizer_rule must be linear, power, geometric or explicit, got `{other}`"),
                    ))
                }
            },
        };

        let chain = |key: &str| file.get("markov_chain", key);
        let steps_entry = chain("steps");
        let steps: Option<usize> = steps_entry.map(|e| parse_value(e, "a positive integer")).transpose()?;
        let horizon = match lln("horizon") {
            Some(e) => parse_value(e, "a positive integer")?,
            None => match &measure_rule {
                MeasureRule::Explicit(list) => list.len(),
                _ => mc_checkpoints
                    .iter()
                    .chain(&exact_checkpoints)
                    .copied()
                    .chain(steps)
                    .max()
                    .unwrap_or(1),
            },
        };
        if horizon == 0 {
            return Err(ConfigError::global("horizon must be at least 1"));
        }
        let spec = SequenceSpec::new(measure_rule, Some(normalizer_rule), horizon);
        spec.validate().map_err(|e| ConfigError::at(rule_entry.line, format!("invalid sequence: {e}")))?;

        let steps = steps.unwrap_or(horizon);
        if steps == 0 || steps > horizon {
            return Err(ConfigError::at(
                steps_entry.expect("explicit steps").line,
                format!("steps must lie in 1..={horizon}"),
            ));
        }
        let record = chain("record")
            .map(|e| {
                let list: Vec<usize> = parse_list(e, ',', "positive integers")?;
                match list.iter().find(|&&n| n == 0 || n > steps) {
                    Some(bad) => Err(ConfigError::at(e.line, format!("record step {bad} outside 1..={steps}"))),
                    None => Ok(list),
                }
            })
            .transpose()?;
        let paths = match overrides.paths {
            Some(p) => p,
            None => chain("paths").map(|e| parse_value(e, "a positive integer")).transpose()?.unwrap_or(DEFAULT_PATHS),
        };
        let seed = match overrides.seed {
            Some(s) => s,
            None => chain("seed").map(|e| parse_value(e, "an unsigned integer")).transpose()?.unwrap_or(0),
        };

        let conv = |key: &str| file.get("monotone_conv", key);
        let defaults = ConvolutionOptions::default();
        let opts = ConvolutionOptions {
            merge_tol: conv("merge_tol").map(|e| parse_value(e, "a number")).transpose()?.unwrap_or(defaults.merge_tol),
            prune_tol: conv("prune_tol").map(|e| parse_value(e, "a number")).transpose()?.unwrap_or(defaults.prune_tol),
            max_atoms: conv("max_atoms")
                .map(|e| parse_value(e, "a positive integer"))
                .transpose()?
                .unwrap_or(defaults.max_atoms),
            identity_check_points: conv("identity_check_points")
                .map(|e| parse_value(e, "an integer"))
                .transpose()?
                .unwrap_or(defaults.identity_check_points),
        };
        opts.validate().map_err(|e| ConfigError::global(e.to_string()))?;

        let classical_baseline = lln("classical_baseline").map(parse_bool).transpose()?.unwrap_or(true);
        let out = overrides
            .out
            .clone()
            .or_else(|| get("cli", "out").map(|e| e.value.clone()));
        let quiet = overrides.quiet || get("cli", "quiet").map(parse_bool).transpose()?.unwrap_or(false);

        Ok(Self {
            harness: HarnessConfig {
                spec,
                eps,
                mc_checkpoints,
                exact_checkpoints,
                n_paths: paths,
                seed,
                opts,
                classical_baseline,
            },
            steps,
            record,
            out,
            quiet,
        })
    }

    /// The resolved configuration in config-file syntax, one line per entry.
    pub fn echo(&self) -> Vec<String> {
        let h = &self.harness;
        let mut lines = vec!["[lln_harness]".to_string()];
        match &h.spec.measure_rule {
            MeasureRule::Iid(base) => {
                lines.push("measure_rule = iid".into());
                lines.push(format!("base = {base}"));
            }
            MeasureRule::Scaled { base, alpha } => {
                lines.push("measure_rule = scaled".into());
                lines.push(format!("base = {base}"));
                lines.push(format!("alpha = {alpha}"));
            }
            MeasureRule::Explicit(list) => {
                lines.push("measure_rule = explicit".into());
                lines.push(format!("measures = {}", join(list, "; ")));
            }
        }
        match h.spec.normalizer_rule.as_ref().expect("resolved configs carry normalizers") {
            NormalizerRule::Linear => lines.push("normalizer_rule = linear".into()),
            NormalizerRule::Geometric => lines.push("normalizer_rule = geometric".into()),
            NormalizerRule::Power(p) => {
                lines.push("normalizer_rule = power".into());
                lines.push(format!("power = {p}"));
            }
            NormalizerRule::Explicit(values) => {
                lines.push("normalizer_rule = explicit".into());
                lines.push(format!("normalizers = {}", join(values, ",")));
            }
        }
        lines.push(format!("horizon = {}", h.spec.horizon));
        lines.push(format!("eps = {}", join(&h.eps, ",")));
        lines.push(format!("mc_checkpoints = {}", join(&h.mc_checkpoints, ",")));
        lines.push(format!("exact_checkpoints = {}", join(&h.exact_checkpoints, ",")));
        lines.push(format!("classical_baseline = {}", h.classical_baseline));
        lines.push("[markov_chain]".into());
        lines.push(format!("paths = {}", h.n_paths));
        lines.push(format!("seed = {}", h.seed));
        lines.push(format!("steps = {}", self.steps));
        if let Some(record) = &self.record {
            lines.push(format!("record = {}", join(record, ",")));
        }
        lines.push("[monotone_conv]".into());
        lines.push(format!("merge_tol = {:e}", h.opts.merge_tol));
        lines.push(format!("prune_tol = {:e}", h.opts.prune_tol));
        lines.push(format!("max_atoms = {}", h.opts.max_atoms));
        lines.push(format!("identity_check_points = {}", h.opts.identity_check_points));
        if let Some(out) = &self.out {
            lines.push("[cli]".into());
            lines.push(format!("out = {out}"));
        }
        lines
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "\
# comment
[lln_harness]
measure_rule = iid
base = two_point(-1, 1, 0.5)   # trailing comment
eps = 0.25
mc_checkpoints = 10,100
exact_checkpoints = 4

[markov_chain]
paths = 20000
seed = 7
";

    fn resolve(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::resolve(&text.parse()?, &Overrides::default())
    }

    #[test]
    fn basic_resolution() {
        let cfg = resolve(BASIC).unwrap();
        assert_eq!(cfg.harness.spec.horizon, 100);
        assert_eq!(cfg.harness.eps, vec![0.25]);
        assert_eq!(cfg.harness.n_paths, 20_000);
        assert_eq!(cfg.harness.seed, 7);
        assert_eq!(cfg.steps, 100);
        assert!(cfg.harness.classical_baseline);
        assert_eq!(cfg.harness.spec.normalizer_rule, Some(NormalizerRule::Linear));
    }

    #[test]
    fn echo_round_trips() {
        for text in [
            BASIC,
            "[lln_harness]\nmeasure_rule = scaled\nbase = uniform_atoms(0,1,3)\nalpha = 0.5\nnormalizer_rule = power\npower = 1.5\n[cli]\nout = x.csv\n",
            "[lln_harness]\nmeasure_rule = explicit\nmeasures = point(1); explicit[(0,0.5),(2,0.5)]\nnormalizer_rule = explicit\nnormalizers = 1,2.5\nmc_checkpoints = 2\nexact_checkpoints = 1\n[markov_chain]\nrecord = 1,2\n",
        ] {
            let cfg = resolve(text).unwrap();
            let again = resolve(&cfg.echo().join("\n")).unwrap();
            assert_eq!(cfg, again);
        }
    }

    #[test]
    fn overrides_take_precedence() {
        let file: ConfigFile = BASIC.parse().unwrap();
        let overrides = Overrides {
            seed: Some(99),
            paths: Some(12_345),
            out: Some("o.csv".into()),
            quiet: true,
        };
        let cfg = RunConfig::resolve(&file, &overrides).unwrap();
        assert_eq!((cfg.harness.seed, cfg.harness.n_paths), (99, 12_345));
        assert_eq!(cfg.out.as_deref(), Some("o.csv"));
        assert!(cfg.quiet);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("[lln_harness]\nmeasure_rule = iid\nbogus = 1\n", 3, "unknown key"),
            ("[nope]\n", 1, "unknown section"),
            ("measure_rule = iid\n", 1, "before any section"),
            ("[lln_harness]\nmeasure_rule iid\n", 2, "key = value"),
            ("[lln_harness]\nmeasure_rule = iid\nmeasure_rule = iid\n", 3, "duplicate"),
            ("[lln_harness\n", 1, "malformed"),
            ("[lln_harness]\nmeasure_rule = iid\nbase = two_pint(1,2,0.5)\n", 3, "position 0"),
            ("[lln_harness]\nmeasure_rule = iid\nbase = point(0)\neps = 0.1,x\n", 4, "numbers"),
            ("[lln_harness]\nmeasure_rule = sideways\n", 2, "measure_rule must be"),
            ("[lln_harness]\nmeasure_rule = scaled\nbase = point(0)\n", 2, "needs `alpha`"),
            ("[lln_harness]\nmeasure_rule = iid\nbase = point(0)\n[markov_chain]\npaths = -3\n", 5, "positive integer"),
        ];
        for (text, line, needle) in cases {
            let err = resolve(text).unwrap_err();
            assert_eq!(err.line, Some(line), "{text:?}: {err}");
            assert!(err.to_string().contains(needle), "{text:?}: {err}");
        }
        assert_eq!(resolve("").unwrap_err().line, None);
    }

    #[test]
    fn invalid_sequences_are_rejected() {
        let text = "[lln_harness]\nmeasure_rule = iid\nbase = point(0)\nnormalizer_rule = explicit\nnormalizers = 1,1\nhorizon = 2\nmc_checkpoints = 2\nexact_checkpoints = 1\n";
        let err = resolve(text).unwrap_err();
        assert!(err.to_string().contains("increase strictly"), "{err}");
    }
}
