//! Configuration files: TOML tables with explicit seeds.

use std::fmt::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use tubelab::energy::Curve;
use tubelab::scalar::parse_rational;
use tubelab::Rational;

use crate::error::{invalid, CliError, CliResult};

/// A parsed configuration with the keys shared by every subcommand split off.
#[derive(Debug)]
pub struct Config {
    pub hash: String,
    pub seed: Option<u64>,
    pub svg: bool,
    table: toml::Table,
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| CliError::Invalid(format!("config: {e}")))?;
        if table.is_empty() {
            return invalid("config is empty");
        }
        let seed = match table.remove("seed") {
            None => None,
            Some(toml::Value::Integer(v)) if v >= 0 => Some(v as u64),
            Some(other) => return invalid(format!("seed must be a nonnegative integer, got {other}")),
        };
        let svg = match table.remove("svg") {
            None => false,
            Some(toml::Value::Boolean(b)) => b,
            Some(other) => return invalid(format!("svg must be a boolean, got {other}")),
        };
        let digest = Sha256::digest(text.as_bytes());
        let mut hash = String::with_capacity(64);
        for b in digest.iter() {
            let _ = write!(hash, "{b:02x}");
        }
        Ok(Config { hash, seed, svg, table })
    }

    /// Deserializes the remaining keys into the subcommand's schema.
    pub fn command<T: DeserializeOwned>(&self) -> CliResult<T> {
        toml::Value::Table(self.table.clone()).try_into().map_err(|e| CliError::Invalid(format!("config: {e}")))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawRational {
    Int(i64),
    Float(f64),
    Text(String),
}

/// An exact rational written as `"p/q"`, an integer or a decimal.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(try_from = "RawRational")]
pub struct Q(pub Rational);

impl TryFrom<RawRational> for Q {
    type Error = String;

    fn try_from(raw: RawRational) -> Result<Self, String> {
        match raw {
            RawRational::Int(v) => Ok(Q(Rational::from_integer(v as i128))),
            RawRational::Float(v) => parse_rational(&v.to_string()).map(Q).ok_or(format!("bad rational {v}")),
            RawRational::Text(t) => parse_rational(&t).map(Q).ok_or(format!("bad rational {t:?}")),
        }
    }
}

/// A value or a list of values.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum CurveSpec {
    Named(String),
    Polynomial { coeffs: Vec<f64>, min_curvature: f64 },
}

impl CurveSpec {
    pub fn curve(&self) -> CliResult<Curve> {
        let c = match self {
            CurveSpec::Named(n) if n == "parabola" => Curve::Parabola,
            CurveSpec::Named(n) if n == "circle" => Curve::CircleArc,
            CurveSpec::Named(n) => return invalid(format!("unknown curve {n:?}; use parabola, circle or a polynomial")),
            CurveSpec::Polynomial { coeffs, min_curvature } => {
                Curve::Polynomial { coeffs: coeffs.clone(), min_curvature: *min_curvature }
            }
        };
        c.validate()?;
        Ok(c)
    }
}

pub fn need<T: Clone>(v: &Option<T>, name: &str) -> CliResult<T> {
    v.clone().ok_or_else(|| CliError::Invalid(format!("missing key {name:?}")))
}
