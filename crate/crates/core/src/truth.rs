//! Ground-truth labels for synthetic data and their sidecar file format.
//!
//! ```text
//! # convseq ground truth
//! # types=2
//! # members 0: 4 17 9
//! # members 1: 30 2 11
//! # k center_bin direction warp
//! 0 200 forward 1
//! 1 400 reverse 0.6
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" | "fwd" => Ok(Direction::Forward),
            "reverse" | "rev" => Ok(Direction::Reverse),
            other => Err(Error::invalid(format!("unknown direction '{other}'"))),
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Reverse => "reverse",
        })
    }
}

/// One embedded pattern instance; `center_bin` marks the middle of the
/// (warped) sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occurrence {
    pub type_index: usize,
    pub center_bin: usize,
    pub direction: Direction,
    pub warp: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub occurrences: Vec<Occurrence>,
    /// Member neurons of each type, in forward firing order.
    pub members_per_type: Vec<Vec<usize>>,
}

impl GroundTruth {
    pub fn n_types(&self) -> usize {
        self.members_per_type.len()
    }

    /// Centers of every occurrence of type `k`, in file order.
    pub fn centers_of(&self, k: usize) -> Vec<usize> {
        self.occurrences
            .iter()
            .filter(|o| o.type_index == k)
            .map(|o| o.center_bin)
            .collect()
    }

    pub fn all_centers(&self) -> Vec<usize> {
        self.occurrences.iter().map(|o| o.center_bin).collect()
    }

    pub fn count_of(&self, k: usize) -> usize {
        self.occurrences.iter().filter(|o| o.type_index == k).count()
    }

    /// Rename type `k` to `mapping[k]`.
    pub fn relabel(&self, mapping: &[usize]) -> GroundTruth {
        let mut members = vec![Vec::new(); self.members_per_type.len()];
        for (k, m) in self.members_per_type.iter().enumerate() {
            members[mapping[k]] = m.clone();
        }
        GroundTruth {
            occurrences: self
                .occurrences
                .iter()
                .map(|o| Occurrence {
                    type_index: mapping[o.type_index],
                    ..*o
                })
                .collect(),
            members_per_type: members,
        }
    }

    pub fn to_sidecar_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# convseq ground truth");
        let _ = writeln!(s, "# types={}", self.n_types());
        for (k, m) in self.members_per_type.iter().enumerate() {
            let list: Vec<String> = m.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(s, "# members {k}: {}", list.join(" "));
        }
        let _ = writeln!(s, "# k center_bin direction warp");
        for o in &self.occurrences {
            let _ = writeln!(s, "{} {} {} {}", o.type_index, o.center_bin, o.direction, o.warp);
        }
        s
    }

    pub fn parse_sidecar(text: &str) -> Result<GroundTruth> {
        let mut n_types: Option<usize> = None;
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut occurrences = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() {
                continue;
            }
            if let Some(rest) = l.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("types=") {
                    let k: usize = v
                        .parse()
                        .map_err(|_| Error::parse(line, format!("bad type count '{v}'")))?;
                    n_types = Some(k);
                    members = vec![Vec::new(); k];
                } else if let Some(v) = rest.strip_prefix("members ") {
                    let (idx, list) = v
                        .split_once(':')
                        .ok_or_else(|| Error::parse(line, "expected 'members <k>: ...'"))?;
                    let k: usize = idx
                        .trim()
                        .parse()
                        .map_err(|_| Error::parse(line, format!("bad type index '{idx}'")))?;
                    if k >= members.len() {
                        return Err(Error::parse(line, format!("type {k} exceeds declared count")));
                    }
                    members[k] = list
                        .split_whitespace()
                        .map(|t| t.parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::parse(line, "bad member index"))?;
                }
                continue;
            }
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 4 {
                return Err(Error::parse(line, "expected 'k center_bin direction warp'"));
            }
            let type_index: usize = f[0]
                .parse()
                .map_err(|_| Error::parse(line, format!("bad type '{}'", f[0])))?;
            let center_bin: usize = f[1]
                .parse()
                .map_err(|_| Error::parse(line, format!("bad center '{}'", f[1])))?;
            let direction: Direction = f[2].parse().map_err(|_| Error::parse(line, "bad direction"))?;
            let warp: f64 = f[3]
                .parse()
                .map_err(|_| Error::parse(line, format!("bad warp '{}'", f[3])))?;
            if n_types.is_some_and(|k| type_index >= k) {
                return Err(Error::parse(line, format!("type {type_index} exceeds declared count")));
            }
            occurrences.push(Occurrence {
                type_index,
                center_bin,
                direction,
                warp,
            });
        }
        if n_types.is_none() {
            let k = occurrences.iter().map(|o| o.type_index + 1).max().unwrap_or(0);
            members = vec![Vec::new(); k];
        }
        Ok(GroundTruth {
            occurrences,
            members_per_type: members,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_sidecar_string())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<GroundTruth> {
        Self::parse_sidecar(&std::fs::read_to_string(path)?)
    }
}
