use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::{FamilyError, FoldSaddleParams, Tau};

/// A labelled configuration of the family: `index` orders the configurations
/// of one slice along the `lambda` axis, `tag` (1–6) names the slice by fold
/// type and sign of `mu`. Displayed as `"9_2"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CaseId {
    pub index: u8,
    pub tag: u8,
}

impl CaseId {
    pub const fn new(index: u8, tag: u8) -> Self {
        Self { index, tag }
    }

    pub fn tau(&self) -> Tau {
        if self.tag <= 3 {
            Tau::Invisible
        } else {
            Tau::Visible
        }
    }

    /// Whether the pair occurs at all.
    pub fn is_valid(&self) -> bool {
        match self.tag {
            1 => (1..=17).contains(&self.index),
            2 | 3 => (1..=19).contains(&self.index),
            4..=6 => (1..=13).contains(&self.index),
            _ => false,
        }
    }
}

impl Ord for CaseId {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.tag, self.index).cmp(&(other.tag, other.index))
    }
}

impl PartialOrd for CaseId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.index, self.tag)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed case id {0:?}")]
pub struct ParseCaseIdError(String);

impl FromStr for CaseId {
    type Err = ParseCaseIdError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseCaseIdError(s.to_string());
        let (index, tag) = s.split_once('_').ok_or_else(err)?;
        let id = CaseId::new(
            index.parse().map_err(|_| err())?,
            tag.parse().map_err(|_| err())?,
        );
        if id.is_valid() {
            Ok(id)
        } else {
            Err(err())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuSign {
    Zero,
    Positive,
    Negative,
}

pub fn mu_sign(mu: f64, tol_eq: f64) -> MuSign {
    if mu.abs() <= tol_eq {
        MuSign::Zero
    } else if mu > 0.0 {
        MuSign::Positive
    } else {
        MuSign::Negative
    }
}

pub fn slice_tag(tau: Tau, mu: f64, tol_eq: f64) -> u8 {
    let offset = match tau {
        Tau::Invisible => 0,
        Tau::Visible => 3,
    };
    offset
        + match mu_sign(mu, tol_eq) {
            MuSign::Zero => 1,
            MuSign::Positive => 2,
            MuSign::Negative => 3,
        }
}

/// The `lambda` values at which the configuration changes for `beta > 0`,
/// in increasing order.
///
/// Invisible fold: `d = h`, upper arc from `h` lands on the lower fold,
/// `d` at the origin and `d` on the lower fold (one value when `mu = 0`),
/// upper arc from `j` lands on the lower fold, `d = j`. Visible fold: `d = h`,
/// `d` on the lower fold, `d = j`.
pub fn event_thresholds(params: &FoldSaddleParams, tol_eq: f64) -> Vec<f64> {
    let beta = params.beta;
    let alpha = params.alpha();
    let i1 = params.lower_fold_x();
    match params.tau {
        Tau::Visible => vec![-beta, i1, beta],
        Tau::Invisible => {
            let from_h = alpha * beta / (1.0 - alpha);
            let from_j = beta / (1.0 - alpha);
            let mut events = vec![-beta, from_h];
            if mu_sign(params.mu, tol_eq) == MuSign::Zero {
                events.push(0.0);
            } else {
                events.push(i1.min(0.0));
                events.push(i1.max(0.0));
            }
            events.extend([from_j, beta]);
            events
        }
    }
}

fn compare(a: f64, b: f64, tol: f64) -> Ordering {
    if (a - b).abs() <= tol {
        Ordering::Equal
    } else if a < b {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

/// Position of `lambda` among increasing thresholds: `first` for values
/// below the first one, `first + 1` on it, and so on.
fn locate(lambda: f64, thresholds: &[f64], first: u8, tol: f64) -> u8 {
    for (k, &t) in thresholds.iter().enumerate() {
        match compare(lambda, t, tol) {
            Ordering::Less => return first + 2 * k as u8,
            Ordering::Equal => return first + 2 * k as u8 + 1,
            Ordering::Greater => {}
        }
    }
    first + 2 * thresholds.len() as u8
}

/// Labels a parameter point by exact predicates on `lambda`, `beta` and the
/// sign of `mu`.
pub fn classify_case(params: &FoldSaddleParams, tol_eq: f64) -> Result<CaseId, FamilyError> {
    params.validate()?;
    let tag = slice_tag(params.tau, params.mu, tol_eq);
    let index = match compare(params.beta, 0.0, tol_eq) {
        Ordering::Less => locate(params.lambda, &[params.lower_fold_x()], 1, tol_eq),
        Ordering::Equal => locate(params.lambda, &[0.0], 4, tol_eq),
        Ordering::Greater => locate(params.lambda, &event_thresholds(params, tol_eq), 7, tol_eq),
    };
    Ok(CaseId::new(index, tag))
}
