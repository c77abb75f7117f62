use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lsl::LanguageId;

pub type Direction = (LanguageId, LanguageId);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DirectionMode {
    Full,
    /// Pairs involving the center language plus pairs within one family.
    EnglishCentricPlusGroups,
}

impl fmt::Display for DirectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DirectionMode::Full => "full",
            DirectionMode::EnglishCentricPlusGroups => "centric",
        })
    }
}

impl FromStr for DirectionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(DirectionMode::Full),
            "centric" => Ok(DirectionMode::EnglishCentricPlusGroups),
            other => Err(Error::Parse(format!("direction mode must be full|centric, got `{other}`"))),
        }
    }
}

/// Training directions and their complement among all ordered pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectionSplit {
    pub train: Vec<Direction>,
    pub zero_shot: Vec<Direction>,
}

impl DirectionSplit {
    pub fn is_zero_shot(&self, dir: &Direction) -> bool {
        self.zero_shot.contains(dir)
    }
}

pub fn all_directions(languages: &[LanguageId]) -> Vec<Direction> {
    let mut out = Vec::new();
    for s in languages {
        for t in languages {
            if s != t {
                out.push((s.clone(), t.clone()));
            }
        }
    }
    out
}

pub fn direction_filter(languages: &[(LanguageId, usize)], mode: DirectionMode, center: &LanguageId) -> Result<DirectionSplit> {
    let family = |l: &LanguageId| languages.iter().find(|(id, _)| id == l).map(|&(_, f)| f);
    if family(center).is_none() {
        return Err(Error::Routing(center.to_string()));
    }
    let ids: Vec<LanguageId> = languages.iter().map(|(l, _)| l.clone()).collect();
    let (train, zero_shot) = all_directions(&ids).into_iter().partition(|(s, t)| match mode {
        DirectionMode::Full => true,
        DirectionMode::EnglishCentricPlusGroups => s == center || t == center || family(s) == family(t),
    });
    Ok(DirectionSplit { train, zero_shot })
}
