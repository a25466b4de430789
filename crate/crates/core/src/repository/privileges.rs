use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Per-user, per-file access flags. Stored normalized: `admin` implies every
/// other flag and `edit` implies `view`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Privileges {
    pub edit: bool,
    pub view: bool,
    pub audit: bool,
    pub download: bool,
    pub admin: bool,
}

impl Privileges {
    pub const NONE: Privileges = Privileges {
        edit: false,
        view: false,
        audit: false,
        download: false,
        admin: false,
    };

    pub const ALL: Privileges = Privileges {
        edit: true,
        view: true,
        audit: true,
        download: true,
        admin: true,
    };

    pub fn normalized(self) -> Self {
        if self.admin {
            return Self::ALL;
        }
        Self {
            view: self.view || self.edit,
            ..self
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::NONE
    }

    pub fn can_read_history(&self) -> bool {
        self.view || self.audit || self.download
    }

    pub fn can_fetch(&self) -> bool {
        self.view || self.download
    }

    /// Flag names in a fixed order: edit, view, audit, download, admin.
    pub fn names(&self) -> Vec<&'static str> {
        [
            (self.edit, "edit"),
            (self.view, "view"),
            (self.audit, "audit"),
            (self.download, "download"),
            (self.admin, "admin"),
        ]
        .into_iter()
        .filter_map(|(on, name)| on.then_some(name))
        .collect()
    }
}

impl fmt::Display for Privileges {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.names();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

/// Parses a comma-separated flag list such as `view,audit`, or `none`.
impl FromStr for Privileges {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Privileges::NONE;
        for flag in s.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            match flag {
                "edit" => p.edit = true,
                "view" => p.view = true,
                "audit" => p.audit = true,
                "download" => p.download = true,
                "admin" => p.admin = true,
                "none" => {}
                other => return Err(format!("unknown privilege {other:?}")),
            }
        }
        Ok(p.normalized())
    }
}
