use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Learning task; each has its own window length and output head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Texture,
    Localize,
    Velocity,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Texture, Task::Localize, Task::Velocity];

    /// Default window length in samples at 2000 Hz.
    pub fn default_window(self) -> usize {
        match self {
            Task::Texture => 500,
            Task::Localize => 100,
            Task::Velocity => 200,
        }
    }

    pub fn default_max_epochs(self) -> usize {
        match self {
            Task::Texture => 20,
            Task::Localize => 60,
            Task::Velocity => 30,
        }
    }

    pub fn output_dim(self) -> usize {
        match self {
            Task::Texture => 4,
            Task::Localize => 2,
            Task::Velocity => 1,
        }
    }

    pub fn is_regression(self) -> bool {
        !matches!(self, Task::Texture)
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Texture => "texture",
            Task::Localize => "localize",
            Task::Velocity => "velocity",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "texture" => Ok(Task::Texture),
            "localize" | "position" => Ok(Task::Localize),
            "velocity" => Ok(Task::Velocity),
            _ => Err(Error::InvalidArgument(format!("unknown task `{s}`"))),
        }
    }
}
