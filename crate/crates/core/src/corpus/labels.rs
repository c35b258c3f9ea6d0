use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Speaker gender. Declaration order is the fixed tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Male, Gender::Female];

    pub fn opposite(self) -> Gender {
        match self {
            Gender::Male => Gender::Female,
            Gender::Female => Gender::Male,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Claimant,
    Imposter,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Claimant => "claimant",
            Role::Imposter => "imposter",
        }
    }
}

macro_rules! label_impls {
    ($t:ty, $($v:ident),+) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self, Error> {
                $(if s.eq_ignore_ascii_case(<$t>::$v.as_str()) {
                    return Ok(<$t>::$v);
                })+
                Err(Error::ManifestParse(format!(
                    "unknown {} label {s:?}",
                    stringify!($t).to_lowercase()
                )))
            }
        }
    };
}

label_impls!(Gender, Male, Female);
label_impls!(Split, Train, Test);
label_impls!(Role, Claimant, Imposter);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_parse_and_print() {
        assert_eq!("Female".parse::<Gender>().unwrap(), Gender::Female);
        assert_eq!(Gender::Male.opposite(), Gender::Female);
        assert_eq!(Split::Test.to_string(), "test");
        assert!("robot".parse::<Gender>().is_err());
        assert_eq!("imposter".parse::<Role>().unwrap(), Role::Imposter);
    }
}
