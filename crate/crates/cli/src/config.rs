//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    HeatCovariance,
    OuLimit,
    Holder,
    Regularity,
    Invariant,
    ItoIsometry,
    AllenCahn,
    NavierStokes,
    HarrisCertify,
}

impl Kind {
    pub const ALL: [Kind; 9] = [
        Kind::HeatCovariance,
        Kind::OuLimit,
        Kind::Holder,
        Kind::Regularity,
        Kind::Invariant,
        Kind::ItoIsometry,
        Kind::AllenCahn,
        Kind::NavierStokes,
        Kind::HarrisCertify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::HeatCovariance => "heat-covariance",
            Kind::OuLimit => "ou-limit",
            Kind::Holder => "holder",
            Kind::Regularity => "regularity",
            Kind::Invariant => "invariant",
            Kind::ItoIsometry => "ito-isometry",
            Kind::AllenCahn => "allen-cahn",
            Kind::NavierStokes => "navier-stokes",
            Kind::HarrisCertify => "harris-certify",
        }
    }

    pub fn from_name(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Keys accepted for this kind (besides `kind`, `seed`, `output`), with
    /// their types and defaults.
    pub fn schema(self) -> &'static [Field] {
        use Ty::*;
        match self {
            Kind::HeatCovariance => {
                const F: &[Field] = &[
                    Field::new("N", Int, "1024"),
                    Field::new("nu", Float, "1"),
                    Field::new("radius", Float, "3"),
                    Field::new("samples", Int, "100000"),
                    Field::new("structure_samples", Int, "20000"),
                ];
                F
            }
            Kind::OuLimit => {
                const F: &[Field] = &[
                    Field::new("a", Floats, "1,4"),
                    Field::new("N", Int, "512"),
                    Field::new("radius", Float, "2"),
                    Field::new("relax", Float, "10"),
                    Field::new("samples", Int, "10000"),
                ];
                F
            }
            Kind::Holder => {
                const F: &[Field] = &[
                    Field::new("N", Int, "1024"),
                    Field::new("nu", Float, "1"),
                    Field::new("t", Float, "1"),
                    Field::new("paths", Int, "200"),
                    Field::new("dt", Float, "0.000244140625"),
                    Field::new("steps", Int, "512"),
                    Field::new("x_points", Int, "16"),
                    Field::new("space_levels", Ints, "3,4,5,6,7,8,9"),
                    Field::new("time_levels", Ints, "2,3,4,5,6,7,8,9"),
                ];
                F
            }
            Kind::Regularity => {
                const F: &[Field] = &[
                    Field::new("N", Ints, "128,256,512,1024"),
                    Field::new("alpha", Float, "0"),
                    Field::new("nu", Float, "1"),
                    Field::new("mass", Float, "1"),
                    Field::new("sobolev", Floats, "0.4,0.6"),
                    Field::new("t", Float, "1"),
                    Field::new("samples", Int, "400"),
                    Field::new("holder_dt", Float, "0.000244140625"),
                    Field::new("holder_steps", Int, "512"),
                    Field::new("holder_paths", Int, "100"),
                ];
                F
            }
            Kind::Invariant => {
                const F: &[Field] = &[
                    Field::new("N", Int, "16"),
                    Field::new("nu", Float, "1"),
                    Field::new("mass", Float, "1"),
                    Field::new("q", Float, "1"),
                    Field::new("samples", Int, "20000"),
                    Field::new("t_burn", Float, "5"),
                    Field::new("far", Float, "3"),
                ];
                F
            }
            Kind::ItoIsometry => {
                const F: &[Field] = &[
                    Field::new("N", Int, "8"),
                    Field::new("cases", Int, "200"),
                    Field::new("reps", Int, "100000"),
                ];
                F
            }
            Kind::AllenCahn => {
                const F: &[Field] = &[
                    Field::new("N", Int, "128"),
                    Field::new("dt", Float, "0.01"),
                    Field::new("t_end", Float, "50"),
                    Field::new("noise", Float, "0.1"),
                    Field::new("sup_bound", Float, "1.5"),
                    Field::new("strong_samples", Int, "100"),
                    Field::new("strong_levels", Int, "3"),
                ];
                F
            }
            Kind::NavierStokes => {
                const F: &[Field] = &[
                    Field::new("N", Int, "128"),
                    Field::new("nu", Float, "0.05"),
                    Field::new("dt", Float, "0.0025"),
                    Field::new("t_end", Float, "10"),
                    Field::new("noise", Float, "0.5"),
                    Field::new("probes", Int, "100"),
                ];
                F
            }
            Kind::HarrisCertify => {
                const F: &[Field] = &[
                    Field::new("gamma", Float, "0.5"),
                    Field::new("K", Float, "1"),
                    Field::new("delta", Float, "0.5"),
                    Field::new("chains", Int, "200"),
                    Field::new("steps", Int, "20"),
                    Field::new("tv_points", Int, "61"),
                ];
                F
            }
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Int,
    Float,
    Ints,
    Floats,
}

#[derive(Debug, Clone, Copy)]
pub struct Field {
    pub key: &'static str,
    pub ty: Ty,
    pub default: &'static str,
}

impl Field {
    const fn new(key: &'static str, ty: Ty, default: &'static str) -> Self {
        Self { key, ty, default }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(u64),
    Float(f64),
    Ints(Vec<u64>),
    Floats(Vec<f64>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join<T: fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v}"),
            Value::Ints(v) => f.write_str(&join(v)),
            Value::Floats(v) => f.write_str(&join(v)),
        }
    }
}

/// A problem with one configuration line or field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn field(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: Some(field.to_string()),
            line: None,
            message: message.into(),
        }
    }

    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            field: None,
            line: Some(line),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.field, self.line) {
            (Some(k), Some(l)) => write!(f, "line {l}, {k}: {}", self.message),
            (Some(k), None) => write!(f, "{k}: {}", self.message),
            (None, Some(l)) => write!(f, "line {l}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    pub output: Option<PathBuf>,
    values: BTreeMap<&'static str, Value>,
}

fn parse_value(ty: Ty, raw: &str) -> Result<Value, String> {
    let ints = |s: &str| -> Result<Vec<u64>, String> {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<u64>()
                    .map_err(|_| format!("`{}` is not a non-negative integer", p.trim()))
            })
            .collect()
    };
    let floats = |s: &str| -> Result<Vec<f64>, String> {
        s.split(',')
            .map(|p| {
                let v = p.trim().parse::<f64>().map_err(|_| format!("`{}` is not a number", p.trim()))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(format!("`{}` is not finite", p.trim()))
                }
            })
            .collect()
    };
    match ty {
        Ty::Int => Ok(Value::Int(
            ints(raw)?
                .into_iter()
                .next()
                .filter(|_| !raw.contains(','))
                .ok_or("expected one integer")?,
        )),
        Ty::Float => Ok(Value::Float(
            floats(raw)?
                .into_iter()
                .next()
                .filter(|_| !raw.contains(','))
                .ok_or("expected one number")?,
        )),
        Ty::Ints => Ok(Value::Ints(ints(raw)?)),
        Ty::Floats => Ok(Value::Floats(floats(raw)?)),
    }
}

impl ExperimentConfig {
    /// Defaults of `kind` with the given seed.
    pub fn defaults(kind: Kind, seed: u64) -> Self {
        let values = kind
            .schema()
            .iter()
            .map(|f| (f.key, parse_value(f.ty, f.default).expect("defaults parse")))
            .collect();
        Self {
            kind,
            seed,
            output: None,
            values,
        }
    }

    pub fn get(&self, key: &str) -> &Value {
        self.values.get(key).unwrap_or_else(|| panic!("{key} is not a {} key", self.kind))
    }

    pub fn int(&self, key: &str) -> usize {
        match self.get(key) {
            Value::Int(v) => *v as usize,
            other => panic!("{key} is {other:?}"),
        }
    }

    pub fn float(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Float(v) => *v,
            other => panic!("{key} is {other:?}"),
        }
    }

    pub fn ints(&self, key: &str) -> Vec<usize> {
        match self.get(key) {
            Value::Ints(v) => v.iter().map(|x| *x as usize).collect(),
            other => panic!("{key} is {other:?}"),
        }
    }

    pub fn floats(&self, key: &str) -> Vec<f64> {
        match self.get(key) {
            Value::Floats(v) => v.clone(),
            other => panic!("{key} is {other:?}"),
        }
    }

    /// Replaces a value, parsing it as the schema type.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), ConfigError> {
        let field = self
            .kind
            .schema()
            .iter()
            .find(|f| f.key == key)
            .ok_or_else(|| ConfigError::field(key, format!("unknown key for {}", self.kind)))?;
        let v = parse_value(field.ty, raw).map_err(|m| ConfigError::field(key, m))?;
        self.values.insert(field.key, v);
        Ok(())
    }

    /// Canonical text: `kind`, `seed`, `output` (if any), then the schema keys
    /// in order. Parses back to an equal configuration.
    pub fn to_text(&self) -> String {
        let mut out = format!("kind = {}\nseed = {}\n", self.kind, self.seed);
        if let Some(o) = &self.output {
            out.push_str(&format!("output = {}\n", o.display()));
        }
        for f in self.kind.schema() {
            out.push_str(&format!("{} = {}\n", f.key, self.values[f.key]));
        }
        out
    }
}

/// Parses and validates configuration text; every problem found is reported.
pub fn validate_config(text: &str) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let mut errors = Vec::new();
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                let k = k.trim().to_string();
                if entries.iter().any(|(_, e, _)| *e == k) {
                    errors.push(ConfigError::at(i + 1, format!("duplicate key `{k}`")));
                } else {
                    entries.push((i + 1, k, v.trim().to_string()));
                }
            }
            _ => errors.push(ConfigError::at(i + 1, format!("expected `key = value`, found `{line}`"))),
        }
    }
    let lookup = |key: &str| entries.iter().find(|(_, k, _)| k == key);
    let kind = match lookup("kind") {
        None => {
            errors.push(ConfigError::field("kind", "kind missing"));
            None
        }
        Some((l, _, v)) => match Kind::from_name(v) {
            Some(k) => Some(k),
            None => {
                errors.push(ConfigError {
                    field: Some("kind".into()),
                    line: Some(*l),
                    message: format!("unknown experiment kind `{v}`"),
                });
                None
            }
        },
    };
    let seed = match lookup("seed") {
        None => {
            errors.push(ConfigError::field("seed", "seed missing"));
            None
        }
        Some((l, _, v)) => match v.parse::<u64>() {
            Ok(s) => Some(s),
            Err(_) => {
                errors.push(ConfigError {
                    field: Some("seed".into()),
                    line: Some(*l),
                    message: format!("`{v}` is not a 64-bit unsigned integer"),
                });
                None
            }
        },
    };
    let (Some(kind), Some(seed)) = (kind, seed) else {
        return Err(errors);
    };
    let mut cfg = ExperimentConfig::defaults(kind, seed);
    for (line, key, value) in &entries {
        match key.as_str() {
            "kind" | "seed" => {}
            "output" => cfg.output = Some(PathBuf::from(value)),
            _ => {
                if let Err(mut e) = cfg.set(key, value) {
                    e.line = Some(*line);
                    errors.push(e);
                }
            }
        }
    }
    errors.extend(crate::experiments::check_ranges(&cfg));
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(errors)
    }
}
