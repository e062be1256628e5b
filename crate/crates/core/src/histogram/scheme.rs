//! Fusion-scheme grammar.
//!
//! ```text
//! SCHEME := [("CLDP_" | "CLBP_")] GROUP ("_" GROUP)*
//! GROUP  := COMP ("/" COMP)*
//! COMP   := "S" | "M" | "D" | "C"
//! ```
//!
//! `_` concatenates independent histograms, `/` builds a joint histogram.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::patterns::Component;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Clbp,
    Cldp,
}

impl Family {
    fn prefix(self) -> &'static str {
        match self {
            Family::Clbp => "CLBP_",
            Family::Cldp => "CLDP_",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SchemeExpr {
    family: Option<Family>,
    groups: Vec<Vec<Component>>,
}

impl SchemeExpr {
    pub fn groups(&self) -> &[Vec<Component>] {
        &self.groups
    }

    /// Explicit prefix if one was written, otherwise CLDP iff `D` is used.
    pub fn family(&self) -> Family {
        self.family.unwrap_or(if self.uses(Component::D) {
            Family::Cldp
        } else {
            Family::Clbp
        })
    }

    pub fn uses(&self, c: Component) -> bool {
        self.groups.iter().flatten().any(|&x| x == c)
    }

    pub fn components(&self) -> impl Iterator<Item = Component> + '_ {
        self.groups.iter().flatten().copied()
    }

    /// Groups only, without a family prefix; equal for schemes that build identical histograms.
    pub fn canonical(&self) -> String {
        self.groups
            .iter()
            .map(|g| g.iter().map(|c| c.symbol().to_string()).collect::<Vec<_>>().join("/"))
            .collect::<Vec<_>>()
            .join("_")
    }

    /// Name with a family prefix, e.g. `CLDP_S/M/D/C`.
    pub fn display_name(&self) -> String {
        format!("{}{}", self.family().prefix(), self.canonical())
    }

    /// Same bins as `other` (family prefixes are ignored).
    pub fn same_layout(&self, other: &SchemeExpr) -> bool {
        self.groups == other.groups
    }
}

impl fmt::Display for SchemeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(family) = self.family {
            f.write_str(family.prefix())?;
        }
        f.write_str(&self.canonical())
    }
}

impl FromStr for SchemeExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_scheme(s)
    }
}

pub fn parse_scheme(text: &str) -> Result<SchemeExpr> {
    let err = |position: usize, message: String| Error::Scheme {
        text: text.to_string(),
        position,
        message,
    };
    let (family, body, offset) = if let Some(rest) = text.strip_prefix("CLDP_") {
        (Some(Family::Cldp), rest, 5)
    } else if let Some(rest) = text.strip_prefix("CLBP_") {
        (Some(Family::Clbp), rest, 5)
    } else {
        (None, text, 0)
    };

    let mut groups: Vec<Vec<Component>> = vec![Vec::new()];
    let mut seen: Vec<Component> = Vec::new();
    let mut expect_component = true;
    for (i, ch) in body.char_indices() {
        let pos = offset + i;
        match ch {
            '_' | '/' if expect_component => {
                return Err(err(pos, format!("expected a component before {ch:?}")));
            }
            '_' => {
                check_group(groups.last().expect("non-empty")).map_err(|m| err(pos, m))?;
                groups.push(Vec::new());
                expect_component = true;
            }
            '/' => expect_component = true,
            _ if !expect_component => {
                return Err(err(pos, format!("expected '_' or '/' before {ch:?}")));
            }
            _ => {
                let c = Component::from_symbol(ch)
                    .ok_or_else(|| err(pos, format!("unknown component {ch:?} (expected S, M, D or C)")))?;
                if seen.contains(&c) {
                    return Err(err(pos, format!("component {c} appears twice")));
                }
                if c == Component::D && family == Some(Family::Clbp) {
                    return Err(err(pos, "CLBP schemes cannot use the derivative component D".into()));
                }
                seen.push(c);
                groups.last_mut().expect("non-empty").push(c);
                expect_component = false;
            }
        }
    }
    let end = offset + body.len();
    if expect_component {
        return Err(err(end, "scheme ends without a component".into()));
    }
    check_group(groups.last().expect("non-empty")).map_err(|m| err(end, m))?;
    Ok(SchemeExpr { family, groups })
}

fn check_group(group: &[Component]) -> std::result::Result<(), String> {
    if group == [Component::C] {
        return Err("C must be joined with another component (e.g. M/C)".into());
    }
    Ok(())
}
