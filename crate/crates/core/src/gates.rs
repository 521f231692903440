//! The two deterministic confidence gates that merge the coarse and fine
//! passes.
//!
//! Operators follow the gate definitions literally: Gate 1 uses strict `<`
//! against the boundary tolerance, Gate 2 uses inclusive `<=` against the
//! margin. A margin of zero disables the spatial gate entirely, so even an
//! invalid `-1` coordinate from the fine pass is admitted.

use serde::{Deserialize, Serialize};

use crate::parser::{Pass1Result, Pass2Result, GRID_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Pass1,
    Pass2,
}

/// Merged time and point with the branch each gate took.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub t_star: f64,
    pub point_star: (f64, f64),
    pub time_source: Source,
    pub space_source: Source,
}

/// Distances within this many seconds of `tau` count as equal to it, so
/// decimal inputs like `|7.3 - 7.0|` against `0.3` are not decided by f64
/// representation error.
pub const TIME_EPS: f64 = 1e-9;

fn within(distance: f64, tau: f64) -> bool {
    distance < tau - TIME_EPS
}

/// Temporal fallback. Keeps `t1` when the fine pass abstained (`t2 < 0`) or
/// hedged onto a window edge; otherwise takes `t2`.
pub fn gate1_temporal(t1: f64, pass2: &Pass2Result, window: (f64, f64), tau: f64) -> (f64, Source) {
    let t2 = pass2.t2;
    let (w_min, w_max) = window;
    if t2 < 0.0 || within((t2 - w_min).abs(), tau) || within((t2 - w_max).abs(), tau) {
        (t1, Source::Pass1)
    } else {
        (t2, Source::Pass2)
    }
}

/// Spatial merge on the raw `[0, 1000]²` grid. Returns normalized
/// coordinates.
pub fn gate2_spatial(raw1: (f64, f64), raw2: (f64, f64), margin: f64) -> ((f64, f64), Source) {
    let fine = (raw2.0 / GRID_MAX, raw2.1 / GRID_MAX);
    if margin == 0.0 {
        return (fine, Source::Pass2);
    }
    let lo = margin;
    let hi = GRID_MAX - margin;
    let inside = |v: f64| lo <= v && v <= hi;
    if inside(raw2.0) && inside(raw2.1) {
        (fine, Source::Pass2)
    } else {
        ((raw1.0 / GRID_MAX, raw1.1 / GRID_MAX), Source::Pass1)
    }
}

/// Runs both gates. A failed fine pass is represented by
/// [`Pass2Result::SENTINEL`], which both gates reject for any `m > 0`.
pub fn merge(pass1: &Pass1Result, pass2: &Pass2Result, window: (f64, f64), tau: f64, margin: f64) -> GateDecision {
    let (t_star, time_source) = gate1_temporal(pass1.t1, pass2, window, tau);
    let (point_star, space_source) =
        gate2_spatial((pass1.raw_x1, pass1.raw_y1), (pass2.raw_x2, pass2.raw_y2), margin);
    GateDecision {
        t_star,
        point_star,
        time_source,
        space_source,
    }
}
