//! Example systems shipped with the crate.

use crate::config::{self, Family, Parsed};
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct Example {
    pub name: &'static str,
    pub text: &'static str,
    /// Identity stays out of the closure of the generated semigroup.
    pub semidiscrete: bool,
    /// No common fixed point.
    pub irreducible: bool,
}

impl Example {
    pub fn parse(&self) -> Result<Parsed> {
        config::parse_config_str(self.text, self.name)
    }
}

macro_rules! example {
    ($name:literal, $sd:expr, $irr:expr) => {
        Example {
            name: $name,
            text: include_str!(concat!("../configs/", $name, ".cfg")),
            semidiscrete: $sd,
            irreducible: $irr,
        }
    };
}

pub const EXAMPLES: &[Example] = &[
    example!("positive-pair", true, true),
    example!("diag-pair", true, false),
    example!("single-diag", true, false),
    example!("single-parabolic", true, false),
    example!("parabolic-repeller", true, false),
    example!("attractor-repeller", true, false),
    example!("stern-brocot", true, true),
    example!("elliptic", false, true),
    example!("inverse-pair", false, false),
    example!("symmetric-elliptic", false, true),
];

pub const FAMILIES: &[(&str, &str)] = &[
    ("interior", include_str!("../configs/interior.fam")),
    ("degenerating", include_str!("../configs/degenerating.fam")),
];

pub fn example(name: &str) -> Option<&'static Example> {
    EXAMPLES.iter().find(|e| e.name == name)
}

pub fn family(name: &str) -> Option<Result<Family>> {
    FAMILIES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| config::parse_family_str(text, n))
}
