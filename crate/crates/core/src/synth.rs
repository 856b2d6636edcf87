//! Synthetic drives with known alignment parameters.
//!
//! A route is laid out in a NED frame anchored at its first point. The
//! evaluated receiver's positions come from inverting the measurement
//! equation for a drawn set of parameters, so the solver's answer is known
//! exactly. Optional Gaussian noise is added to the reference positions
//! afterwards.

use std::f64::consts::{PI, TAU};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Normal, StandardNormal};

use crate::align::{AlignmentParameters, Observation};
use crate::geodesy::{euler_to_rotation, EulerAttitude, GeodeticPosition, LocalFrame, LocalVector, RotationMatrix3};
use crate::ingest::nmea::{format_gga, GgaRecord};
use crate::ingest::{write_ref_csv, EvalEpoch, PositionMode, RefEpoch};

const SECONDS_PER_DAY: f64 = 86_400.0;
const TERRAIN_AMPLITUDE_M: f64 = 6.0;
const TERRAIN_WAVELENGTH_M: f64 = 350.0;
const ROLL_AMPLITUDE_DEG: f64 = 3.0;
const ROLL_WAVELENGTH_M: f64 = 230.0;
const WANDER_AMPLITUDE_M: f64 = 4.0;
const WANDER_WAVELENGTH_M: f64 = 300.0;
/// Geoid separation written into generated GGA sentences.
pub const GEOID_SEPARATION_M: f64 = -30.0;

/// Position-mode and correction-age marginals for the reference stream.
/// Counts follow the fractions exactly (largest remainder); the order is
/// shuffled into runs of geometric length so the series has realistic
/// persistence.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeMix {
    /// In [`PositionMode::ALL`] order.
    pub mode_fractions: [f64; 5],
    /// `(low, high, fraction)`: ages drawn uniformly from `[low, high)`.
    pub age_bins: Vec<(f64, f64, f64)>,
    pub mean_run: f64,
}

impl ModeMix {
    /// A drive dominated by RTK fixed with a third standard positioning, and
    /// corrections that are fresh 96% of the time.
    pub fn urban_highway() -> Self {
        Self {
            mode_fractions: [0.499, 0.141, 0.003, 0.330, 0.027],
            age_bins: vec![
                (0.0, 2.0, 0.960),
                (2.0, 10.0, 0.013),
                (10.0, 120.0, 0.010),
                (120.0, 600.0, 0.017),
            ],
            mean_run: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n: usize,
    pub rate_hz: f64,
    pub start_unix: f64,
    pub anchor: GeodeticPosition,
    pub speed_mps: f64,
    /// Long runs slow down rather than drive off the anchor's tangent plane.
    pub max_route_m: f64,
    /// Heading change from start to end of the route.
    pub heading_sweep_deg: f64,
    /// Straight drive with fixed attitude and a weaving, undulating path.
    /// The global offset is then drawn as zero, since it cannot be told
    /// apart from the lever arm.
    pub constant_heading: bool,
    pub max_rotation_deg: f64,
    pub max_offset_m: f64,
    /// Standard deviation of the noise on each reference coordinate.
    pub noise_sigma_m: f64,
    pub mode_mix: Option<ModeMix>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n: 1000,
            rate_hz: 10.0,
            start_unix: 1_530_000_000.0,
            anchor: GeodeticPosition {
                latitude: 37.4,
                longitude: -122.1,
                altitude: 10.0,
            },
            speed_mps: 15.0,
            max_route_m: 20_000.0,
            heading_sweep_deg: 180.0,
            constant_heading: false,
            max_rotation_deg: 5.0,
            max_offset_m: 10.0,
            noise_sigma_m: 0.0,
            mode_mix: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticRun {
    pub truth: AlignmentParameters,
    pub frame: LocalFrame,
    pub observations: Vec<Observation>,
    pub refs: Vec<RefEpoch>,
    pub evals: Vec<EvalEpoch>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn random_direction(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
        let n: f64 = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

/// Rotation by at most `max_deg` about a uniformly random axis, and offsets
/// of norm at most `max_offset_m`.
pub fn draw_truth(rng: &mut ChaCha8Rng, max_deg: f64, max_offset_m: f64, zero_global_offset: bool) -> AlignmentParameters {
    let axis = Unit::new_normalize(random_direction(rng));
    let angle = rng.random_range(0.0..=max_deg.to_radians());
    let rotation = RotationMatrix3(Rotation3::from_axis_angle(&axis, angle).into_inner());
    let y_body = random_direction(rng) * rng.random_range(0.0..=max_offset_m);
    let y_eval = if zero_global_offset {
        Vector3::zeros()
    } else {
        random_direction(rng) * rng.random_range(0.0..=max_offset_m)
    };
    AlignmentParameters {
        rotation,
        y_body: LocalVector::from_vector(y_body),
        y_eval: LocalVector::from_vector(y_eval),
    }
}

/// Category counts for `n` items by largest remainder.
pub fn quota_counts(fractions: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = fractions.iter().sum();
    let exact: Vec<f64> = fractions.iter().map(|f| f / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut short = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    for i in order.into_iter().cycle() {
        if short == 0 {
            break;
        }
        counts[i] += 1;
        short -= 1;
    }
    counts
}

/// A category per item with exactly `counts[c]` items of category `c`,
/// arranged in runs of mean length about `mean_run`.
pub fn quota_sequence(counts: &[usize], mean_run: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut remaining = counts.to_vec();
    let mut left: usize = remaining.iter().sum();
    let geo = Geometric::new(1.0 / mean_run.max(1.0)).expect("probability in (0, 1]");
    let mut out = Vec::with_capacity(left);
    while left > 0 {
        let mut pick = rng.random_range(0..left);
        let c = remaining
            .iter()
            .position(|&r| {
                if pick < r {
                    true
                } else {
                    pick -= r;
                    false
                }
            })
            .expect("pick below total");
        let run = (1 + geo.sample(rng) as usize).min(remaining[c]);
        out.extend(std::iter::repeat_n(c, run));
        remaining[c] -= run;
        left -= run;
    }
    out
}

fn sigma_h_for(mode: PositionMode) -> f64 {
    match mode {
        PositionMode::RtkFixed => 0.02,
        PositionMode::RtkFloat => 0.25,
        PositionMode::DiffCode => 0.6,
        PositionMode::Sps => 1.5,
        PositionMode::None => 5.0,
    }
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

struct RoutePoint {
    x: Vector3<f64>,
    attitude: EulerAttitude,
}

fn route_point(cfg: &GeneratorConfig, heading0: f64, length: f64, s: f64) -> RoutePoint {
    let terrain_k = TAU / TERRAIN_WAVELENGTH_M;
    let down = -TERRAIN_AMPLITUDE_M * (terrain_k * s).sin();
    if cfg.constant_heading {
        let w = WANDER_AMPLITUDE_M * (TAU * s / WANDER_WAVELENGTH_M).sin();
        let (sn, cs) = heading0.sin_cos();
        return RoutePoint {
            x: Vector3::new(s * cs - w * sn, s * sn + w * cs, down),
            attitude: EulerAttitude::wrapped(heading0, 1f64.to_radians(), -0.5f64.to_radians())
                .expect("fixed attitude is valid"),
        };
    }
    let sweep = cfg.heading_sweep_deg.to_radians();
    let (heading, north, east) = if length > 0.0 && sweep != 0.0 {
        let kappa = sweep / length;
        let h = heading0 + kappa * s;
        (h, (h.sin() - heading0.sin()) / kappa, (heading0.cos() - h.cos()) / kappa)
    } else {
        (heading0, s * heading0.cos(), s * heading0.sin())
    };
    let pitch = (TERRAIN_AMPLITUDE_M * terrain_k * (terrain_k * s).cos()).atan();
    let roll = ROLL_AMPLITUDE_DEG.to_radians() * (TAU * s / ROLL_WAVELENGTH_M).sin();
    RoutePoint {
        x: Vector3::new(north, east, down),
        attitude: EulerAttitude::wrapped(heading, pitch, roll).expect("generated attitude is valid"),
    }
}

pub fn generate(cfg: &GeneratorConfig) -> SyntheticRun {
    let frame = LocalFrame::new(cfg.anchor).expect("anchor is a valid position");
    let truth = draw_truth(
        &mut stream(cfg.seed, 0),
        cfg.max_rotation_deg,
        cfg.max_offset_m,
        cfg.constant_heading,
    );
    let mut route_rng = stream(cfg.seed, 1);
    let mut noise_rng = stream(cfg.seed, 2);
    let mut meta_rng = stream(cfg.seed, 3);
    let noise = Normal::new(0.0, cfg.noise_sigma_m.max(0.0)).expect("finite sigma");

    let n = cfg.n;
    let duration = n.saturating_sub(1) as f64 / cfg.rate_hz;
    let length = (cfg.speed_mps * duration).min(cfg.max_route_m);
    let heading0 = route_rng.random_range(-PI..PI);

    let (modes, ages) = match &cfg.mode_mix {
        Some(mix) => {
            let mut mix_rng = stream(cfg.seed, 4);
            let modes = quota_sequence(&quota_counts(&mix.mode_fractions, n), mix.mean_run, &mut mix_rng);
            let fractions: Vec<f64> = mix.age_bins.iter().map(|b| b.2).collect();
            let bins = quota_sequence(&quota_counts(&fractions, n), mix.mean_run, &mut mix_rng);
            let ages = bins
                .iter()
                .map(|&b| {
                    let (lo, hi, _) = mix.age_bins[b];
                    mix_rng.random_range(lo..hi)
                })
                .collect();
            (modes.into_iter().map(|m| PositionMode::ALL[m]).collect(), ages)
        }
        None => (vec![PositionMode::RtkFixed; n], vec![1.0; n]),
    };

    let r_inv = truth.rotation.0.transpose();
    let mut observations = Vec::with_capacity(n);
    let mut refs = Vec::with_capacity(n);
    let mut evals = Vec::with_capacity(n);
    for i in 0..n {
        let t = cfg.start_unix + i as f64 / cfg.rate_hz;
        let s = if n > 1 { length * i as f64 / (n - 1) as f64 } else { 0.0 };
        let p = route_point(cfg, heading0, length, s);
        let r_body = euler_to_rotation(&p.attitude).0;
        let x_eval = r_inv * (p.x - r_body * truth.y_body.to_vector() - truth.y_eval.to_vector());
        let mut x_ref = p.x;
        if cfg.noise_sigma_m > 0.0 {
            x_ref += Vector3::from_fn(|_, _| noise.sample(&mut noise_rng));
        }
        let num_sats = Some(meta_rng.random_range(8..=18u32));
        let hdop = Some(round1(meta_rng.random_range(0.6..2.0)));
        refs.push(RefEpoch {
            t,
            position: frame
                .local_to_geodetic(&LocalVector::from_vector(x_ref))
                .expect("route stays near the anchor"),
            attitude: p.attitude,
            sigma_h: sigma_h_for(modes[i]),
            mode: modes[i],
            num_sats,
            hdop,
            corr_age: Some(ages[i]),
        });
        evals.push(EvalEpoch {
            t,
            position: Some(
                frame
                    .local_to_geodetic(&LocalVector::from_vector(x_eval))
                    .expect("route stays near the anchor"),
            ),
            num_sats,
            hdop,
            fix_quality: PositionMode::RtkFixed.gga_quality(),
            corr_age: Some(round1(ages[i])),
        });
        observations.push(Observation { t, x_eval, r_body, x_ref });
    }
    SyntheticRun {
        truth,
        frame,
        observations,
        refs,
        evals,
    }
}

/// UTC date of the first reference epoch, needed to read the NMEA file back.
pub fn first_date(run: &SyntheticRun) -> Option<chrono::NaiveDate> {
    let t = run.refs.first()?.t;
    chrono::DateTime::from_timestamp(t.floor() as i64, 0).map(|d| d.date_naive())
}

pub fn write_reference_csv(run: &SyntheticRun, path: &Path) -> io::Result<()> {
    write_ref_csv(&run.refs, BufWriter::new(File::create(path)?))
}

/// One GGA sentence per evaluated epoch, CRLF terminated.
pub fn write_eval_nmea(run: &SyntheticRun, path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in &run.evals {
        let tod = e.t - (e.t / SECONDS_PER_DAY).floor() * SECONDS_PER_DAY;
        let rec = GgaRecord {
            time_of_day: tod,
            position: e.position,
            quality: e.fix_quality,
            num_sats: e.num_sats,
            hdop: e.hdop,
            geoid_separation: GEOID_SEPARATION_M,
            corr_age: e.corr_age,
        };
        w.write_all(format_gga("GN", &rec).as_bytes())?;
        w.write_all(b"\r\n")?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::heading_span_deg;

    #[test]
    fn forward_model_is_exact() {
        let run = generate(&GeneratorConfig::default());
        for o in &run.observations {
            let pred = run.truth.predict(o);
            assert!((pred - o.x_ref).norm() < 1e-9);
        }
        let yaws: Vec<f64> = run.refs.iter().map(|r| r.attitude.yaw).collect();
        assert!((heading_span_deg(&yaws) - 180.0).abs() < 1e-6);
        assert!(run.truth.rotation.is_orthonormal(1e-12));
        assert!(run.truth.y_body.norm() <= 10.0 && run.truth.y_eval.norm() <= 10.0);
        let first = run.frame.geodetic_to_local(&run.refs[0].position).unwrap();
        assert!(first.norm() < 1e-6);
    }

    #[test]
    fn seeds_are_reproducible_and_distinct() {
        let a = generate(&GeneratorConfig { n: 50, ..Default::default() });
        let b = generate(&GeneratorConfig { n: 50, ..Default::default() });
        let c = generate(&GeneratorConfig { n: 50, seed: 2, ..Default::default() });
        assert_eq!(a.refs, b.refs);
        assert_ne!(a.truth, c.truth);
    }

    #[test]
    fn constant_heading_has_no_global_offset() {
        let run = generate(&GeneratorConfig { constant_heading: true, ..Default::default() });
        assert_eq!(run.truth.y_eval, LocalVector::ZERO);
        let yaws: Vec<f64> = run.refs.iter().map(|r| r.attitude.yaw).collect();
        assert_eq!(heading_span_deg(&yaws), 0.0);
    }

    #[test]
    fn quotas_are_exact() {
        let counts = quota_counts(&[0.499, 0.141, 0.003, 0.330, 0.027], 100_000);
        assert_eq!(counts, vec![49_900, 14_100, 300, 33_000, 2_700]);
        let counts = quota_counts(&[1.0, 1.0, 1.0], 10);
        assert_eq!(counts.iter().sum::<usize>(), 10);
        let mut rng = stream(5, 0);
        let seq = quota_sequence(&[30, 5, 0, 65], 8.0, &mut rng);
        for (c, want) in [30, 5, 0, 65].iter().enumerate() {
            assert_eq!(seq.iter().filter(|&&x| x == c).count(), *want);
        }
    }

    #[test]
    fn long_runs_stay_bounded() {
        let cfg = GeneratorConfig { n: 20_000, rate_hz: 1.0, ..Default::default() };
        let run = generate(&cfg);
        let far = run.observations.iter().map(|o| o.x_ref.norm()).fold(0.0, f64::max);
        assert!(far <= cfg.max_route_m);
    }
}
