//! Strict TOML configuration for the runner.
//!
//! Every key is optional and has a documented default, but *unknown* keys
//! are rejected (with a spelling suggestion where one is close enough).
//! Silent typos in a config file are far more expensive than a hard error,
//! so the parser walks the file key by key instead of deserializing into a
//! permissive struct.

use std::path::{Path, PathBuf};

use iekf::sim::{OmegaProfile, ScenarioConfig};
use iekf::{IekfConfig, So3Convention, UpdateVariant};
use nalgebra::Vector3;
use toml::{Table, Value};

use crate::error::CliError;

/// The only schema version this build understands.
const SCHEMA_VERSION: i64 = 1;

/// What the tool should do with the scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// One trajectory, one filter run, per-step CSV.
    Single,
    /// Repeated runs over different seeds plus an aggregate summary.
    MonteCarlo,
    /// The same trajectory filtered with one update iteration and with the
    /// configured iteration budget, side by side.
    Compare,
}

impl Mode {
    fn parse(text: &str) -> Result<Self, CliError> {
        match text {
            "single" => Ok(Mode::Single),
            "monte-carlo" => Ok(Mode::MonteCarlo),
            "compare" => Ok(Mode::Compare),
            other => Err(CliError::ConfigValue(format!(
                "`mode` must be one of \"single\", \"monte-carlo\", \"compare\", got \"{other}\""
            ))),
        }
    }
}

/// A fully resolved run description: config file plus defaults plus any
/// command-line overrides.
#[derive(Clone, Debug)]
pub struct RunManifest {
    pub scenario: ScenarioConfig,
    pub filter: IekfConfig,
    pub output_path: PathBuf,
    pub mode: Mode,
    pub trials: usize,
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<RunManifest, CliError> {
    let text = std::fs::read_to_string(path).map_err(|err| {
        CliError::ConfigAccess(format!("cannot read config {}: {err}", path.display()))
    })?;
    parse_manifest(&text)
}

/// Parses config text. Split from the file read so tests can feed strings.
pub fn parse_manifest(text: &str) -> Result<RunManifest, CliError> {
    let root: Table = text
        .parse()
        .map_err(|err| CliError::ConfigSyntax(format!("config is not valid TOML: {err}")))?;

    const ROOT_KEYS: &[&str] = &[
        "schema_version",
        "mode",
        "output",
        "trials",
        "scenario",
        "filter",
    ];
    const ROOT_ALIASES: &[(&str, &str)] = &[
        ("out", "output"),
        ("runs", "trials"),
        ("version", "schema_version"),
    ];
    reject_unknown_keys(&root, "the top level", ROOT_KEYS, ROOT_ALIASES)?;

    let reader = SectionReader {
        section: "the top level",
        table: &root,
    };
    let schema_version = reader.integer("schema_version", SCHEMA_VERSION)?;
    if schema_version != SCHEMA_VERSION {
        return Err(CliError::ConfigValue(format!(
            "`schema_version` must be {SCHEMA_VERSION}, got {schema_version}"
        )));
    }
    let mode = match reader.string("mode")? {
        Some(text) => Mode::parse(&text)?,
        None => Mode::Single,
    };
    let output_path = PathBuf::from(
        reader
            .string("output")?
            .unwrap_or_else(|| "results.csv".to_owned()),
    );
    let trials = reader.count("trials", 10)?;
    if trials == 0 {
        return Err(CliError::ConfigValue(
            "`trials` must be at least 1".to_owned(),
        ));
    }

    let scenario = parse_scenario(section(&root, "scenario")?)?;
    let filter = parse_filter(section(&root, "filter")?)?;

    Ok(RunManifest {
        scenario,
        filter,
        output_path,
        mode,
        trials,
    })
}

/// Fetches a sub-table, treating an absent section as empty (all defaults).
fn section<'a>(root: &'a Table, name: &'static str) -> Result<Option<&'a Table>, CliError> {
    match root.get(name) {
        None => Ok(None),
        Some(Value::Table(table)) => Ok(Some(table)),
        Some(_) => Err(CliError::ConfigValue(format!(
            "`{name}` must be a table ([{name}] section)"
        ))),
    }
}

fn parse_scenario(table: Option<&Table>) -> Result<ScenarioConfig, CliError> {
    const KEYS: &[&str] = &[
        "duration",
        "dt",
        "omega_constant",
        "omega_sinusoidal_amplitude",
        "omega_sinusoidal_frequency_hz",
        "gyro_noise_density",
        "reference_directions",
        "measurement_noise_std",
        "initial_attitude_error_std",
        "convention",
        "seed",
    ];
    const ALIASES: &[(&str, &str)] = &[
        ("noise_std", "measurement_noise_std"),
        ("measurement_noise", "measurement_noise_std"),
        ("gyro_noise", "gyro_noise_density"),
        ("directions", "reference_directions"),
        ("timestep", "dt"),
        ("step", "dt"),
        ("length", "duration"),
        ("sigma0", "initial_attitude_error_std"),
        ("initial_error_std", "initial_attitude_error_std"),
        ("omega", "omega_constant"),
    ];

    let empty = Table::new();
    let table = table.unwrap_or(&empty);
    reject_unknown_keys(table, "[scenario]", KEYS, ALIASES)?;
    let reader = SectionReader {
        section: "[scenario]",
        table,
    };

    let omega_profile = parse_omega(&reader)?;
    let default_directions = vec![Vector3::new(0.0, 0.0, 1.0), Vector3::new(1.0, 0.0, 0.0)];
    let convention = match reader.string("convention")? {
        None => So3Convention::RightPerturbation,
        Some(text) => match text.as_str() {
            "right" => So3Convention::RightPerturbation,
            "left" => So3Convention::LeftPerturbation,
            other => {
                return Err(CliError::ConfigValue(format!(
                    "`convention` in [scenario] must be \"right\" or \"left\", got \"{other}\""
                )))
            }
        },
    };

    let config = ScenarioConfig {
        duration: reader.number("duration", 10.0)?,
        dt: reader.number("dt", 0.02)?,
        omega_profile,
        gyro_noise_density: reader.number("gyro_noise_density", 0.005)?,
        reference_directions: reader.direction_list("reference_directions", default_directions)?,
        measurement_noise_std: reader.number("measurement_noise_std", 0.02)?,
        initial_attitude_error_std: reader.number("initial_attitude_error_std", 0.1)?,
        convention,
        seed: reader.seed("seed", 42)?,
    };
    config
        .validate()
        .map_err(|err| CliError::ConfigValue(format!("invalid [scenario]: {err}")))?;
    Ok(config)
}

/// The angular-rate profile is either a constant vector or a sinusoid;
/// mixing the two families in one config is almost certainly a mistake.
fn parse_omega(reader: &SectionReader<'_>) -> Result<OmegaProfile, CliError> {
    let constant = reader.vector3("omega_constant")?;
    let amplitude = reader.vector3("omega_sinusoidal_amplitude")?;
    let frequency = reader.optional_number("omega_sinusoidal_frequency_hz")?;

    match (constant, amplitude, frequency) {
        (Some(_), Some(_), _) | (Some(_), None, Some(_)) => Err(CliError::ConfigValue(
            "`omega_constant` and `omega_sinusoidal_*` are mutually exclusive; configure one profile"
                .to_owned(),
        )),
        (None, None, Some(_)) => Err(CliError::ConfigValue(
            "`omega_sinusoidal_frequency_hz` requires `omega_sinusoidal_amplitude`".to_owned(),
        )),
        (Some(omega), None, None) => Ok(OmegaProfile::Constant(omega)),
        (None, Some(amplitude), frequency) => Ok(OmegaProfile::Sinusoidal {
            amplitude,
            frequency_hz: frequency.unwrap_or(0.25),
        }),
        (None, None, None) => Ok(OmegaProfile::Constant(Vector3::new(0.3, -0.2, 0.5))),
    }
}

fn parse_filter(table: Option<&Table>) -> Result<IekfConfig, CliError> {
    const KEYS: &[&str] = &[
        "max_iterations",
        "termination_threshold",
        "exact_jacobian",
        "variant",
    ];
    const ALIASES: &[(&str, &str)] = &[
        ("epsilon", "termination_threshold"),
        ("eps", "termination_threshold"),
        ("threshold", "termination_threshold"),
        ("tolerance", "termination_threshold"),
        ("iterations", "max_iterations"),
        ("max_iter", "max_iterations"),
        ("exact_j", "exact_jacobian"),
        ("update_variant", "variant"),
    ];

    let empty = Table::new();
    let table = table.unwrap_or(&empty);
    reject_unknown_keys(table, "[filter]", KEYS, ALIASES)?;
    let reader = SectionReader {
        section: "[filter]",
        table,
    };

    let variant = match reader.string("variant")? {
        None => UpdateVariant::Standard,
        Some(text) => parse_variant(&text)?,
    };
    let config = IekfConfig {
        max_iterations: reader.count("max_iterations", 10)?,
        termination_threshold: reader.number("termination_threshold", 1e-8)?,
        exact_jacobian: reader.boolean("exact_jacobian", true)?,
        update_variant: variant,
    };
    config
        .validate()
        .map_err(|err| CliError::ConfigValue(format!("invalid [filter]: {err}")))?;
    Ok(config)
}

/// Shared by the config key and the `--variant` command-line flag.
pub fn parse_variant(text: &str) -> Result<UpdateVariant, CliError> {
    match text {
        "standard" => Ok(UpdateVariant::Standard),
        "qr" => Ok(UpdateVariant::QrCompressed),
        "information" => Ok(UpdateVariant::InformationForm),
        other => Err(CliError::ConfigValue(format!(
            "`variant` must be one of \"standard\", \"qr\", \"information\", got \"{other}\""
        ))),
    }
}

/// Rejects keys outside the known set, suggesting the nearest canonical
/// key when the typo is close to a valid key or a common alias.
fn reject_unknown_keys(
    table: &Table,
    section: &str,
    keys: &[&str],
    aliases: &[(&str, &str)],
) -> Result<(), CliError> {
    for key in table.keys() {
        if keys.contains(&key.as_str()) {
            continue;
        }
        let message = match suggest(key, keys, aliases) {
            Some(canonical) => {
                format!("unknown key `{key}` in {section}; did you mean `{canonical}`?")
            }
            None => format!("unknown key `{key}` in {section}"),
        };
        return Err(CliError::ConfigValue(message));
    }
    Ok(())
}

/// Picks the canonical key whose name (or known alias) is closest to the
/// typo, if any is close enough to be a plausible intent.
fn suggest(key: &str, keys: &[&str], aliases: &[(&str, &str)]) -> Option<String> {
    let candidates = keys
        .iter()
        .map(|&k| (k, k))
        .chain(aliases.iter().copied())
        .map(|(spelling, canonical)| (edit_distance(key, spelling), canonical));
    let (best_distance, canonical) = candidates.min_by_key(|&(distance, _)| distance)?;
    let limit = (key.chars().count() / 3).max(2);
    (best_distance <= limit).then(|| canonical.to_owned())
}

/// Plain Levenshtein distance; config keys are short so the quadratic DP
/// is more than fast enough.
fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut previous: Vec<usize> = (0..=b.len()).collect();
    let mut current = vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        current[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let substitute = previous[j] + usize::from(ca != cb);
            current[j + 1] = substitute.min(previous[j + 1] + 1).min(current[j] + 1);
        }
        std::mem::swap(&mut previous, &mut current);
    }
    previous[b.len()]
}

/// Typed access to one TOML table with uniform error messages.
struct SectionReader<'a> {
    section: &'static str,
    table: &'a Table,
}

impl SectionReader<'_> {
    fn get(&self, key: &str) -> Option<&Value> {
        self.table.get(key)
    }

    /// A float-valued key; integers are accepted (TOML users write
    /// `duration = 10`, not `10.0`).
    fn number(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.optional_number(key)?.unwrap_or(default))
    }

    fn optional_number(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(n)) => Ok(Some(*n as f64)),
            Some(_) => Err(self.type_error(key, "a number")),
        }
    }

    fn integer(&self, key: &str, default: i64) -> Result<i64, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Integer(n)) => Ok(*n),
            Some(_) => Err(self.type_error(key, "an integer")),
        }
    }

    /// A non-negative count (iteration budgets, trial counts).
    fn count(&self, key: &str, default: usize) -> Result<usize, CliError> {
        let value = self.integer(key, default as i64)?;
        usize::try_from(value).map_err(|_| {
            CliError::ConfigValue(format!("`{key}` in {} must not be negative", self.section))
        })
    }

    fn seed(&self, key: &str, default: u64) -> Result<u64, CliError> {
        let value = self.integer(key, default as i64)?;
        u64::try_from(value).map_err(|_| {
            CliError::ConfigValue(format!("`{key}` in {} must not be negative", self.section))
        })
    }

    fn boolean(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(self.type_error(key, "a boolean")),
        }
    }

    fn string(&self, key: &str) -> Result<Option<String>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(self.type_error(key, "a string")),
        }
    }

    fn vector3(&self, key: &str) -> Result<Option<Vector3<f64>>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(value) => self.value_as_vector3(key, value).map(Some),
        }
    }

    fn direction_list(
        &self,
        key: &str,
        default: Vec<Vector3<f64>>,
    ) -> Result<Vec<Vector3<f64>>, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Array(items)) => items
                .iter()
                .map(|item| self.value_as_vector3(key, item))
                .collect(),
            Some(_) => Err(self.type_error(key, "an array of 3-vectors")),
        }
    }

    fn value_as_vector3(&self, key: &str, value: &Value) -> Result<Vector3<f64>, CliError> {
        let items = match value {
            Value::Array(items) if items.len() == 3 => items,
            _ => return Err(self.type_error(key, "a 3-vector like [0.0, 0.0, 1.0]")),
        };
        let mut out = Vector3::zeros();
        for (slot, item) in out.iter_mut().zip(items) {
            *slot = match item {
                Value::Float(x) => *x,
                Value::Integer(n) => *n as f64,
                _ => return Err(self.type_error(key, "a 3-vector of numbers")),
            };
        }
        Ok(out)
    }

    fn type_error(&self, key: &str, expected: &str) -> CliError {
        CliError::ConfigValue(format!("`{key}` in {} must be {expected}", self.section))
    }
}
