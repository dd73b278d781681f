//! A combinatorial summary of a phase portrait.
//!
//! Two parameter points with equal signatures are treated as topologically
//! equivalent. The signature holds no coordinates, only the order of the
//! switching-line intervals, the fold types, the pseudo-equilibria, the
//! position of the saddle and the cycles and connections that close up.
//!
//! A bounded sliding or escaping interval squeezed between two folds, with
//! sewing on both sides and no pseudo-equilibrium inside, is a "transit":
//! orbits slide across it in finite time and leave along the same side they
//! would have taken had the two folds merged. Such intervals, and double
//! folds flanked by sewing that are not of invisible–invisible type, are
//! dropped from the itinerary so that the configuration on either side of
//! the merger compares equal.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::family::{build_system, FoldSaddleParams, Tau};
use crate::field::NonSmoothSystem;
use crate::integrator::{
    detect_separatrix_connection, detect_sigma_center, find_canard_cycles, first_return,
    CanardKind, CycleStability,
};
use crate::sigma::{
    partition_sigma, sigma_extent, FoldKind, PseudoStability, SigmaClass, SigmaPartition,
    SlidingRegion, Tangency,
};

use super::AtlasConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    Sewing,
    Sliding,
    Escaping,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SaddlePosition {
    Above,
    On,
    Below,
}

/// How orbits behave next to a double fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LocalBehavior {
    /// Nearby orbits are closed.
    Center,
    Attracting,
    Repelling,
    /// The double fold separates sliding or escaping intervals.
    Junction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TangencyMark {
    pub upper: Option<FoldKind>,
    pub lower: Option<FoldKind>,
    /// Set only for double folds that are kept as a single point.
    pub behavior: Option<LocalBehavior>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PseudoEqMark {
    pub region: SlidingRegion,
    pub stability: PseudoStability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CycleMark {
    pub kind: CanardKind,
    pub stability: CycleStability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeparatrixMark {
    pub present: bool,
    /// `Neutral` when absent.
    pub stability: CycleStability,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TopoSignature {
    pub itinerary: Vec<Region>,
    /// Sorted; fold order along the line is not part of the signature.
    pub tangencies: Vec<TangencyMark>,
    /// In order along the line.
    pub pseudo_equilibria: Vec<PseudoEqMark>,
    pub saddle: SaddlePosition,
    pub canard_cycles: Vec<CycleMark>,
    pub sigma_center: bool,
    pub separatrix: SeparatrixMark,
}

impl TopoSignature {
    /// Stable textual form; the hash is computed from it.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("signature serializes")
    }

    /// First 16 hex digits of the SHA-256 of [`canonical`](Self::canonical).
    pub fn hash_hex(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn summary(&self) -> String {
        let mut lines = Vec::new();
        let itinerary: Vec<String> = self.itinerary.iter().map(|r| format!("{r:?}")).collect();
        lines.push(format!("sigma: {}", itinerary.join(" | ")));
        for t in &self.tangencies {
            let mut parts = Vec::new();
            if let Some(k) = t.upper {
                parts.push(format!("upper {k:?}"));
            }
            if let Some(k) = t.lower {
                parts.push(format!("lower {k:?}"));
            }
            let mut line = format!("fold: {}", parts.join(" + "));
            if let Some(b) = t.behavior {
                line.push_str(&format!(" ({b:?})"));
            }
            lines.push(line);
        }
        for pe in &self.pseudo_equilibria {
            lines.push(format!(
                "pseudo-equilibrium: {:?} in {:?}",
                pe.stability, pe.region
            ));
        }
        lines.push(format!("saddle: {:?}", self.saddle));
        for c in &self.canard_cycles {
            lines.push(format!(
                "canard cycle: kind {:?}, {:?}",
                c.kind, c.stability
            ));
        }
        if self.sigma_center {
            lines.push("sigma-center: yes".to_string());
        }
        if self.separatrix.present {
            lines.push(format!("separatrix loop: {:?}", self.separatrix.stability));
        }
        lines.push(format!("hash: {}", self.hash_hex()));
        lines.join("\n")
    }
}

fn region_of(class: SigmaClass) -> Region {
    match class {
        SigmaClass::Sliding => Region::Sliding,
        SigmaClass::Escaping => Region::Escaping,
        _ => Region::Sewing,
    }
}

fn single_marks(t: &Tangency) -> Vec<TangencyMark> {
    let mut marks = Vec::new();
    if let Some(k) = t.upper {
        marks.push(TangencyMark {
            upper: Some(k),
            lower: None,
            behavior: None,
        });
    }
    if let Some(k) = t.lower {
        marks.push(TangencyMark {
            upper: None,
            lower: Some(k),
            behavior: None,
        });
    }
    marks
}

/// Starting points `x0` whose upper arc lands where the lower field carries
/// it back around the saddle: `x0 < lambda` and `2 lambda - x0` between the
/// lower fold and `j`. Empty unless the fold is invisible and `beta > 0`.
pub fn return_bracket(params: &FoldSaddleParams) -> Option<(f64, f64)> {
    if params.tau != Tau::Invisible || params.beta <= 0.0 {
        return None;
    }
    let lambda = params.lambda;
    let lo = (2.0 * lambda - params.beta).max(-1.0);
    let hi = lambda.min(2.0 * lambda - params.lower_fold_x());
    if lo.partial_cmp(&hi) != Some(Ordering::Less) {
        return None;
    }
    let margin = 1e-5 * (hi - lo);
    Some((lo + margin, hi - margin))
}

fn one_sided_behavior(
    system: &NonSmoothSystem,
    x0: f64,
    cfg: &AtlasConfig,
    toward_positive: CycleStability,
) -> CycleStability {
    match first_return(system, x0, &cfg.flow) {
        Ok(eta) if (eta - x0).abs() <= cfg.center_tol => CycleStability::Neutral,
        Ok(eta) if eta > x0 => toward_positive,
        Ok(_) => match toward_positive {
            CycleStability::Attracting => CycleStability::Repelling,
            CycleStability::Repelling => CycleStability::Attracting,
            CycleStability::Neutral => CycleStability::Neutral,
        },
        Err(_) => CycleStability::Neutral,
    }
}

/// Behavior next to an invisible–invisible double fold at `d`, read off the
/// return map just to its left: orbits that come back closer to `d` are
/// attracted.
fn double_fold_behavior(
    params: &FoldSaddleParams,
    system: &NonSmoothSystem,
    d: f64,
    cfg: &AtlasConfig,
) -> LocalBehavior {
    let x0 = d - cfg.probe_offset * params.beta.abs().max(1e-3);
    match one_sided_behavior(system, x0, cfg, CycleStability::Attracting) {
        CycleStability::Neutral => LocalBehavior::Center,
        CycleStability::Attracting => LocalBehavior::Attracting,
        CycleStability::Repelling => LocalBehavior::Repelling,
    }
}

fn reduce_partition(
    params: &FoldSaddleParams,
    system: &NonSmoothSystem,
    partition: &SigmaPartition,
    cfg: &AtlasConfig,
) -> (Vec<Region>, Vec<TangencyMark>) {
    let segments = &partition.segments;
    let n = segments.len();
    let has_pe = |k: usize| {
        partition
            .pseudo_equilibria
            .iter()
            .any(|pe| segments[k].contains(pe.x))
    };
    let class = |k: usize| region_of(segments[k].class);

    // a bounded sliding/escaping segment between sewing neighbours, with no pseudo-equilibrium
    let transit: Vec<bool> = (0..n)
        .map(|k| {
            k > 0
                && k + 1 < n
                && class(k) != Region::Sewing
                && !has_pe(k)
                && class(k - 1) == Region::Sewing
                && class(k + 1) == Region::Sewing
        })
        .collect();

    let mut itinerary: Vec<Region> = Vec::new();
    for (k, &through) in transit.iter().enumerate().take(n) {
        let r = if through { Region::Sewing } else { class(k) };
        if itinerary.last() != Some(&r) {
            itinerary.push(r);
        }
    }

    let mut marks = Vec::new();
    for t in &partition.tangencies {
        let left = segments.iter().position(|s| s.hi == t.x);
        let right = segments.iter().position(|s| s.lo == t.x);
        let sewing_around = match (left, right) {
            (Some(l), Some(r)) => class(l) == Region::Sewing && class(r) == Region::Sewing,
            _ => false,
        };
        if !t.is_coincident() {
            marks.extend(single_marks(t));
            continue;
        }
        let invisible_pair =
            t.upper == Some(FoldKind::Invisible) && t.lower == Some(FoldKind::Invisible);
        let behavior = if !sewing_around {
            LocalBehavior::Junction
        } else if invisible_pair {
            double_fold_behavior(params, system, t.x, cfg)
        } else {
            marks.extend(single_marks(t));
            continue;
        };
        marks.push(TangencyMark {
            upper: t.upper,
            lower: t.lower,
            behavior: Some(behavior),
        });
    }
    marks.sort();
    (itinerary, marks)
}

/// Stability of the loop formed by the upper arc from `h` to `j` and the two
/// lower separatrices, from where orbits starting just inside it return.
fn separatrix_stability(
    params: &FoldSaddleParams,
    system: &NonSmoothSystem,
    cfg: &AtlasConfig,
) -> CycleStability {
    let x0 = -params.beta + cfg.probe_offset * params.beta;
    // returning further right means moving away from h, so away from the loop
    one_sided_behavior(system, x0, cfg, CycleStability::Repelling)
}

pub fn topo_signature(params: &FoldSaddleParams, cfg: &AtlasConfig) -> TopoSignature {
    let system = build_system(params).expect("validated parameters");
    let partition = partition_sigma(&system, sigma_extent(&system), &cfg.flow.sigma);
    let (itinerary, tangencies) = reduce_partition(params, &system, &partition, cfg);

    let pseudo_equilibria = partition
        .pseudo_equilibria
        .iter()
        .map(|pe| PseudoEqMark {
            region: pe.region,
            stability: pe.stability,
        })
        .collect();

    let saddle = if params.beta.abs() <= cfg.tol_eq {
        SaddlePosition::On
    } else if params.beta < 0.0 {
        SaddlePosition::Above
    } else {
        SaddlePosition::Below
    };

    let mut sigma_center = false;
    let mut canard_cycles = Vec::new();
    if let Some(bracket) = return_bracket(params) {
        sigma_center = detect_sigma_center(&system, bracket, &cfg.flow);
        if !sigma_center {
            canard_cycles = find_canard_cycles(&system, bracket, &cfg.flow)
                .into_iter()
                .map(|c| CycleMark {
                    kind: c.kind,
                    stability: c.stability,
                })
                .collect();
            canard_cycles.sort();
        }
    }

    let present = detect_separatrix_connection(params, &cfg.flow);
    let separatrix = SeparatrixMark {
        present,
        stability: if present {
            separatrix_stability(params, &system, cfg)
        } else {
            CycleStability::Neutral
        },
    };

    TopoSignature {
        itinerary,
        tangencies,
        pseudo_equilibria,
        saddle,
        canard_cycles,
        sigma_center,
        separatrix,
    }
}
