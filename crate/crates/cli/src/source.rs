//! Family sources: generators and family files named in a config.

use serde::Deserialize;
use tubelab::constructions::{area_saturation, bush_example, maximal_random, train_track};
use tubelab::grid::read_family;
use tubelab::sets::{generate_ad_regular, generate_random_frostman};
use tubelab::{AnyFamily, Family, Interval, Rational, Scale, Square, Tube};

use crate::config::{need, Q};
use crate::error::{invalid, CliError, CliResult};

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    AdRegular,
    Frostman,
    FullGrid,
    Bush,
    TrainTrack,
    AreaSaturation,
    MaximalRandom,
    File,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum KindName {
    Intervals,
    Squares,
    Tubes,
}

/// Which component of a structured construction to return.
#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Part {
    Tubes,
    Directions,
    Roots,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub generator: Generator,
    pub kind: Option<KindName>,
    pub e: Option<u32>,
    /// Block exponent `T`.
    pub block: Option<u32>,
    pub s: Option<Q>,
    pub t: Option<Q>,
    pub k: Option<Q>,
    pub path: Option<String>,
    pub part: Option<Part>,
}

impl SourceSpec {
    fn scale(&self) -> CliResult<Scale> {
        Ok(Scale::new(need(&self.e, "e")?, self.block.unwrap_or(2))?)
    }

    fn s(&self) -> CliResult<Rational> {
        Ok(need(&self.s, "s")?.0)
    }

    pub fn build(&self, seed: u64) -> CliResult<AnyFamily> {
        let part = self.part.unwrap_or(Part::Tubes);
        let fam: AnyFamily = match self.generator {
            Generator::AdRegular => generate_ad_regular(self.scale()?, &self.s()?, seed)?.into(),
            Generator::Frostman => {
                let k = self.k.map(|q| q.0).unwrap_or(Rational::from_integer(1));
                match self.kind.unwrap_or(KindName::Intervals) {
                    KindName::Intervals => generate_random_frostman::<Interval>(self.scale()?, &self.s()?, seed, &k)?.into(),
                    KindName::Squares => generate_random_frostman::<Square>(self.scale()?, &self.s()?, seed, &k)?.into(),
                    KindName::Tubes => return invalid("frostman generation supports intervals and squares"),
                }
            }
            Generator::FullGrid => match self.kind.unwrap_or(KindName::Intervals) {
                KindName::Intervals => Family::<Interval>::full_grid(self.scale()?).into(),
                KindName::Squares => Family::<Square>::full_grid(self.scale()?).into(),
                KindName::Tubes => {
                    let scale = self.scale()?;
                    let n = scale.side();
                    Family::new(scale, (0..=n).flat_map(|a| (-n..n).map(move |b| Tube::new(a, b))))?.into()
                }
            },
            Generator::Bush => {
                let b = bush_example(need(&self.e, "e")?, &self.s()?)?;
                match part {
                    Part::Tubes => b.tubes.into(),
                    Part::Directions => b.directions.into(),
                    Part::Roots => b.roots.into(),
                }
            }
            Generator::TrainTrack => {
                let t = train_track(need(&self.e, "e")?)?;
                match part {
                    Part::Tubes => t.tubes.into(),
                    Part::Directions => t.directions.into(),
                    Part::Roots => return invalid("train track has no roots; use tubes or directions"),
                }
            }
            Generator::AreaSaturation => {
                let a = area_saturation(need(&self.e, "e")?, &self.s()?, &need(&self.t, "t")?.0, seed)?;
                match part {
                    Part::Tubes => a.tubes.into(),
                    Part::Directions => a.directions.into(),
                    Part::Roots => return invalid("area saturation has no roots; use tubes or directions"),
                }
            }
            Generator::MaximalRandom => {
                let m = maximal_random(need(&self.e, "e")?, &self.s()?, seed)?;
                match part {
                    Part::Tubes => m.tubes.into(),
                    Part::Directions => m.directions().into(),
                    Part::Roots => return invalid("maximal random families have no roots"),
                }
            }
            Generator::File => {
                let path = need(&self.path, "path")?;
                let text = std::fs::read_to_string(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
                read_family(&text)?
            }
        };
        Ok(fam)
    }

    pub fn tubes(&self, seed: u64) -> CliResult<Family<Tube>> {
        match self.build(seed)? {
            AnyFamily::Tubes(t) => Ok(t),
            other => invalid(format!("expected a tube family, got {}", other.kind().name())),
        }
    }
}
