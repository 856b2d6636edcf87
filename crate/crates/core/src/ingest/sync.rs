//! Pairing evaluated fixes with the reference trajectory.
//!
//! Each evaluated epoch is matched to the pair of reference samples that
//! bracket it. Positions are interpolated linearly in ECEF, which is the same
//! as interpolating in any NED frame since the two differ by an affine map.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{EvalEpoch, RefEpoch};
use crate::geodesy::{
    ecef_to_geodetic, geodetic_to_ecef_unchecked, wrap_angle, Ecef, EulerAttitude, LocalFrame,
    LocalVector,
};

pub const DEFAULT_MAX_GAP_S: f64 = 0.5;

/// Timestamps closer than this are treated as the same instant, absorbing the
/// last-bit differences between decimal time formats.
pub const NODE_SNAP_S: f64 = 1e-6;

/// An evaluated fix with the reference state at the same instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedEpoch {
    /// Equal to `eval.t`.
    pub t: f64,
    /// Reference state interpolated to `t`.
    pub reference: RefEpoch,
    pub eval: EvalEpoch,
    pub ref_ecef: Ecef,
    pub eval_ecef: Option<Ecef>,
    /// Reference position in the run's NED frame.
    pub ref_ned: LocalVector,
    /// Evaluated position in the run's NED frame, when the fix has one.
    pub eval_ned: Option<LocalVector>,
    /// Span of the reference bracket used; zero for an exact node.
    pub bracket_gap: f64,
}

impl PairedEpoch {
    /// Re-expresses both positions in another tangent frame.
    pub fn reanchor(&mut self, frame: &LocalFrame) {
        self.ref_ned = frame.to_local(&self.ref_ecef);
        self.eval_ned = self.eval_ecef.map(|e| frame.to_local(&e));
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SyncStats {
    pub eval_epochs: usize,
    pub paired: usize,
    /// Outside the reference time span.
    pub dropped_outside: usize,
    /// Bracketing reference samples farther apart than `max_gap`.
    pub dropped_gap: usize,
    /// Not strictly after the previous paired epoch.
    pub dropped_duplicate: usize,
}

#[derive(Debug, Clone, Default)]
pub struct SyncResult {
    pub pairs: Vec<PairedEpoch>,
    pub stats: SyncStats,
    pub warnings: Vec<String>,
}

fn lerp(a: f64, b: f64, f: f64) -> f64 {
    a + (b - a) * f
}

/// Interpolates an angle along the shorter arc.
fn lerp_angle(a: f64, b: f64, f: f64) -> f64 {
    wrap_angle(a + wrap_angle(b - a) * f)
}

fn interpolate(r0: &RefEpoch, r1: &RefEpoch, e0: &Ecef, e1: &Ecef, t: f64) -> (RefEpoch, Ecef) {
    let f = (t - r0.t) / (r1.t - r0.t);
    let ecef = Ecef::new(lerp(e0.x, e1.x, f), lerp(e0.y, e1.y, f), lerp(e0.z, e1.z, f));
    let position = ecef_to_geodetic(&ecef).unwrap_or(r0.position);
    let nearer = if f <= 0.5 { r0 } else { r1 };
    let attitude = EulerAttitude {
        yaw: lerp_angle(r0.attitude.yaw, r1.attitude.yaw, f),
        pitch: lerp(r0.attitude.pitch, r1.attitude.pitch, f),
        roll: lerp_angle(r0.attitude.roll, r1.attitude.roll, f),
    };
    let epoch = RefEpoch {
        t,
        position,
        attitude,
        sigma_h: lerp(r0.sigma_h, r1.sigma_h, f),
        mode: nearer.mode,
        num_sats: nearer.num_sats,
        hdop: nearer.hdop,
        corr_age: nearer.corr_age,
    };
    (epoch, ecef)
}

/// Pairs every evaluated epoch that falls inside a reference bracket no wider
/// than `max_gap`. Both inputs must be sorted by time.
///
/// Position and σ_H are interpolated linearly, Euler angles along the
/// shortest arc, and categorical fields come from the nearer sample.
pub fn synchronize(
    refs: &[RefEpoch],
    evals: &[EvalEpoch],
    frame: &LocalFrame,
    max_gap: f64,
) -> SyncResult {
    assert!(max_gap > 0.0, "max_gap must be positive");
    let mut out = SyncResult::default();
    out.stats.eval_epochs = evals.len();
    if refs.is_empty() || evals.is_empty() {
        return out;
    }

    let ecef_of = |r: &RefEpoch| geodetic_to_ecef_unchecked(&r.position);
    let (t_first, t_last) = (refs[0].t, refs[refs.len() - 1].t);
    let mut k = 0usize;
    // ECEF of refs[k] and refs[k + 1], recomputed only when the bracket moves.
    let mut cached: Option<(usize, Ecef, Ecef)> = None;
    let mut last_t = f64::NEG_INFINITY;

    for e in evals {
        if e.t < t_first - NODE_SNAP_S || e.t > t_last + NODE_SNAP_S {
            out.stats.dropped_outside += 1;
            continue;
        }
        if e.t <= last_t {
            out.stats.dropped_duplicate += 1;
            continue;
        }
        while k + 1 < refs.len() && refs[k + 1].t <= e.t {
            k += 1;
        }

        let node = if (e.t - refs[k].t).abs() <= NODE_SNAP_S {
            Some(k)
        } else if k + 1 < refs.len() && (refs[k + 1].t - e.t).abs() <= NODE_SNAP_S {
            Some(k + 1)
        } else if k == 0 && e.t < refs[0].t {
            Some(0)
        } else {
            None
        };

        let (reference, ref_ecef, gap) = match node {
            Some(i) => (refs[i].clone(), ecef_of(&refs[i]), 0.0),
            None => {
                if k + 1 >= refs.len() {
                    out.stats.dropped_outside += 1;
                    continue;
                }
                let gap = refs[k + 1].t - refs[k].t;
                if gap > max_gap {
                    out.stats.dropped_gap += 1;
                    continue;
                }
                let (e0, e1) = match cached {
                    Some((i, a, b)) if i == k => (a, b),
                    _ => {
                        let pair = (ecef_of(&refs[k]), ecef_of(&refs[k + 1]));
                        cached = Some((k, pair.0, pair.1));
                        pair
                    }
                };
                let (r, ecef) = interpolate(&refs[k], &refs[k + 1], &e0, &e1, e.t);
                (r, ecef, gap)
            }
        };

        let eval_ecef = e.position.as_ref().map(geodetic_to_ecef_unchecked);
        last_t = e.t;
        out.pairs.push(PairedEpoch {
            t: e.t,
            ref_ned: frame.to_local(&ref_ecef),
            eval_ned: eval_ecef.map(|p| frame.to_local(&p)),
            reference,
            eval: e.clone(),
            ref_ecef,
            eval_ecef,
            bracket_gap: gap,
        });
    }
    out.stats.paired = out.pairs.len();
    if out.pairs.is_empty() {
        let msg = format!(
            "no evaluated epoch overlaps the reference span [{t_first}, {t_last}] s within max_gap {max_gap} s"
        );
        warn!("{msg}");
        out.warnings.push(msg);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::GeodeticPosition;
    use crate::ingest::PositionMode;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn frame() -> LocalFrame {
        LocalFrame::new(GeodeticPosition::new(37.0, -122.0, 10.0).unwrap()).unwrap()
    }

    fn ref_at(frame: &LocalFrame, t: f64, ned: LocalVector, yaw_deg: f64, sigma: f64) -> RefEpoch {
        RefEpoch {
            t,
            position: frame.local_to_geodetic(&ned).unwrap(),
            attitude: EulerAttitude::wrapped(yaw_deg.to_radians(), 0.0, 0.0).unwrap(),
            sigma_h: sigma,
            mode: PositionMode::RtkFixed,
            num_sats: Some(12),
            hdop: Some(0.8),
            corr_age: Some(1.0),
        }
    }

    fn eval_at(t: f64) -> EvalEpoch {
        EvalEpoch {
            t,
            position: Some(GeodeticPosition::new(37.0, -122.0, 10.0).unwrap()),
            num_sats: Some(10),
            hdop: Some(0.9),
            fix_quality: 1,
            corr_age: None,
        }
    }

    #[test]
    fn node_match_is_exact() {
        let f = frame();
        let refs = vec![
            ref_at(&f, 0.0, LocalVector::ZERO, 10.0, 0.02),
            ref_at(&f, 1.0, LocalVector::new(3.0, 0.0, 0.0), 20.0, 0.04),
        ];
        let r = synchronize(&refs, &[eval_at(1.0)], &f, 0.5 + 1.0);
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r.pairs[0].reference, refs[1]);
        assert_eq!(r.pairs[0].bracket_gap, 0.0);
    }

    #[test]
    fn linear_midpoint() {
        let f = frame();
        let refs = vec![
            ref_at(&f, 0.0, LocalVector::ZERO, 0.0, 0.02),
            ref_at(&f, 1.0, LocalVector::new(3.0, 0.0, 0.0), 0.0, 0.04),
        ];
        let r = synchronize(&refs, &[eval_at(0.5)], &f, 1.0);
        let p = &r.pairs[0];
        assert_abs_diff_eq!(p.ref_ned.north, 1.5, epsilon = 1e-9);
        assert_abs_diff_eq!(p.ref_ned.east, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.reference.sigma_h, 0.03, epsilon = 1e-15);
    }

    #[test]
    fn yaw_takes_the_short_way_across_the_seam() {
        // Oracle: average the unit vectors of the two headings.
        let (a, b) = (179.0f64.to_radians(), (-179.0f64).to_radians());
        let oracle = (a.sin() + b.sin()).atan2(a.cos() + b.cos());
        assert_abs_diff_eq!(oracle.abs(), PI, epsilon = 1e-12);

        let f = frame();
        let refs = vec![
            ref_at(&f, 0.0, LocalVector::ZERO, 179.0, 0.02),
            ref_at(&f, 1.0, LocalVector::ZERO, -179.0, 0.02),
        ];
        let r = synchronize(&refs, &[eval_at(0.5)], &f, 1.0);
        let yaw = r.pairs[0].reference.attitude.yaw;
        assert_abs_diff_eq!(wrap_angle(yaw - oracle), 0.0, epsilon = 1e-12);
        assert!((-PI..PI).contains(&yaw));
    }

    #[test]
    fn drops_wide_brackets_and_out_of_span() {
        let f = frame();
        let refs = vec![
            ref_at(&f, 0.0, LocalVector::ZERO, 0.0, 0.02),
            ref_at(&f, 0.4, LocalVector::ZERO, 0.0, 0.02),
            ref_at(&f, 2.0, LocalVector::ZERO, 0.0, 0.02),
        ];
        let evals = [eval_at(-1.0), eval_at(0.2), eval_at(1.0), eval_at(3.0)];
        let r = synchronize(&refs, &evals, &f, DEFAULT_MAX_GAP_S);
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r.stats.dropped_gap, 1);
        assert_eq!(r.stats.dropped_outside, 2);
    }

    #[test]
    fn empty_and_disjoint_inputs() {
        let f = frame();
        let r = synchronize(&[], &[eval_at(0.0)], &f, 0.5);
        assert!(r.pairs.is_empty());
        let refs = vec![ref_at(&f, 0.0, LocalVector::ZERO, 0.0, 0.02), ref_at(&f, 0.1, LocalVector::ZERO, 0.0, 0.02)];
        let r = synchronize(&refs, &[eval_at(100.0)], &f, 0.5);
        assert!(r.pairs.is_empty());
        assert_eq!(r.warnings.len(), 1);
    }

    proptest! {
        #[test]
        fn output_bounded_and_sigma_monotone(
            ref_dt in proptest::collection::vec(0.05f64..1.0, 2..40),
            sigmas in proptest::collection::vec(0.0f64..1.0, 40),
            eval_dt in proptest::collection::vec(0.01f64..0.7, 1..60),
        ) {
            let f = frame();
            let mut t = 0.0;
            let mut refs = Vec::new();
            for (i, dt) in ref_dt.iter().enumerate() {
                refs.push(ref_at(&f, t, LocalVector::new(t * 10.0, 0.0, 0.0), 0.0, sigmas[i]));
                t += dt;
            }
            let mut te = -0.2;
            let mut evals = Vec::new();
            for dt in &eval_dt {
                evals.push(eval_at(te));
                te += dt;
            }
            let r = synchronize(&refs, &evals, &f, 0.5);
            prop_assert!(r.pairs.len() <= evals.len());
            for p in &r.pairs {
                prop_assert!(p.bracket_gap <= 0.5);
                prop_assert_eq!(p.t, p.eval.t);
                let k = refs.iter().rposition(|x| x.t <= p.t + NODE_SNAP_S).unwrap();
                let lo = refs[k].sigma_h.min(refs.get(k + 1).map_or(refs[k].sigma_h, |x| x.sigma_h));
                let hi = refs[k].sigma_h.max(refs.get(k + 1).map_or(refs[k].sigma_h, |x| x.sigma_h));
                prop_assert!(p.reference.sigma_h >= lo - 1e-15 && p.reference.sigma_h <= hi + 1e-15);
            }
            let s = r.stats;
            prop_assert_eq!(s.paired + s.dropped_gap + s.dropped_outside + s.dropped_duplicate, evals.len());
        }
    }
}
