//! Synthetic paired scenes: vessels in a channel observed by a positional
//! broadcast sensor (A) and an affine camera (B).

use std::f64::consts::{PI, TAU};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::affine::AffineTransform2D;
use crate::error::{CoreError, Result};
use crate::metrics::GroundTruth;
use crate::trajectory::{read_tracks_jsonl, write_tracks_jsonl, BoundingBox, Modality, RawTrack, TrackPoint};

pub const TRACKS_A: &str = "tracks_a.jsonl";
pub const TRACKS_B: &str = "tracks_b.jsonl";
pub const TRUTH: &str = "truth.json";
pub const SPEC: &str = "spec.json";
pub const MISSING_SWEEP: [usize; 6] = [0, 2, 4, 6, 8, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingModality {
    A,
    B,
    Either,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Density {
    Low,
    Moderate,
    High,
}

impl Density {
    pub const ALL: [Density; 3] = [Self::Low, Self::Moderate, Self::High];

    pub fn vessels(self) -> usize {
        match self {
            Self::Low => 10,
            Self::Moderate => 20,
            Self::High => 30,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Low => "low",
            Self::Moderate => "moderate",
            Self::High => "high",
        }
    }
}

impl std::str::FromStr for Density {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| CoreError::Config(format!("unknown density {s:?} (low, moderate, high)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub n_vessels: usize,
    /// Seconds.
    pub duration: i64,
    pub sample_period: i64,
    pub channel: BoundingBox,
    /// Units per second.
    pub speed_range: [f64; 2],
    /// Radians per √second.
    pub turn_rate_std: f64,
    pub ais_dropout_p: f64,
    pub pixel_noise_std: f64,
    /// Constant per-track camera offset (pixels), a stand-in for systematic
    /// coordinate conversion error.
    pub track_bias_std: f64,
    pub camera_transform: AffineTransform2D,
    pub occlusion_radius: f64,
    pub missing_targets: usize,
    pub missing_modality: MissingModality,
    pub seed: u64,
    /// Seed of the kinematics and sensing streams when it differs from `seed`
    /// (deletion always follows `seed`).
    pub scene_seed: Option<u64>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            n_vessels: 10,
            duration: 600,
            sample_period: 10,
            channel: BoundingBox::unit(),
            speed_range: [0.005, 0.02],
            turn_rate_std: 0.05,
            ais_dropout_p: 0.05,
            pixel_noise_std: 0.003,
            track_bias_std: 0.0,
            camera_transform: AffineTransform2D::new([[1.2, 0.1], [-0.05, 0.9]], [0.3, -0.2]),
            occlusion_radius: 0.01,
            missing_targets: 0,
            missing_modality: MissingModality::A,
            seed: 0,
            scene_seed: None,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        let err = |m: String| Err(CoreError::Config(m));
        if !prob(self.ais_dropout_p) {
            return err(format!("ais_dropout_p {} outside [0, 1]", self.ais_dropout_p));
        }
        if self.missing_targets > self.n_vessels {
            return err(format!(
                "missing_targets {} exceeds n_vessels {}",
                self.missing_targets, self.n_vessels
            ));
        }
        if self.duration < 0 || self.sample_period <= 0 {
            return err("duration must be >= 0 and sample_period > 0".into());
        }
        let [lo, hi] = self.speed_range;
        if !(lo >= 0.0 && hi >= lo) {
            return err(format!("bad speed range {:?}", self.speed_range));
        }
        if [self.turn_rate_std, self.pixel_noise_std, self.track_bias_std, self.occlusion_radius]
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return err("noise levels and radii must be finite and non-negative".into());
        }
        self.channel.check()?;
        if !self.camera_transform.is_finite() {
            return err("camera transform is not finite".into());
        }
        Ok(())
    }

    /// No noise, no dropout, no occlusion, identity camera.
    pub fn noiseless(mut self) -> Self {
        self.ais_dropout_p = 0.0;
        self.pixel_noise_std = 0.0;
        self.track_bias_std = 0.0;
        self.occlusion_radius = 0.0;
        self.camera_transform = AffineTransform2D::identity();
        self
    }
}

pub fn density_preset(level: Density, seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        n_vessels: level.vessels(),
        seed,
        ..ScenarioSpec::default()
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One spec per deletion count over the same scene, each with its own
/// deletion seed.
pub fn missing_sweep(base: &ScenarioSpec, counts: &[usize]) -> Result<Vec<ScenarioSpec>> {
    let scene = base.scene_seed.unwrap_or(base.seed);
    counts
        .iter()
        .enumerate()
        .map(|(n, &c)| {
            if c > base.n_vessels {
                return Err(CoreError::Config(format!(
                    "missing count {c} exceeds n_vessels {}",
                    base.n_vessels
                )));
            }
            Ok(ScenarioSpec {
                missing_targets: c,
                seed: splitmix(base.seed ^ splitmix(n as u64 + 1)),
                scene_seed: Some(scene),
                ..base.clone()
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    /// Pairs whose tracks both survive deletion.
    pub pairs: GroundTruth,
    /// The full roster before deletion.
    pub original: GroundTruth,
    pub deleted_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub tracks_a: Vec<RawTrack>,
    pub tracks_b: Vec<RawTrack>,
    pub truth: GroundTruth,
    pub original_truth: GroundTruth,
    pub spec: ScenarioSpec,
    pub deleted_ids: Vec<String>,
}

fn reflect(v: &mut f64, heading: &mut f64, lo: f64, hi: f64, vertical: bool) {
    // A large step could overshoot twice; fold until inside.
    while *v < lo || *v > hi {
        *v = if *v < lo { 2.0 * lo - *v } else { 2.0 * hi - *v };
        *heading = if vertical { -*heading } else { PI - *heading };
    }
}

/// True positions on the sampling grid, one vector per vessel.
fn kinematics(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<[f64; 2]>> {
    let c = &spec.channel;
    let steps = (spec.duration / spec.sample_period) as usize + 1;
    let turn = Normal::new(0.0, spec.turn_rate_std).expect("validated std");
    (0..spec.n_vessels)
        .map(|_| {
            let mut p = [rng.gen_range(c.min_x..=c.max_x), rng.gen_range(c.min_y..=c.max_y)];
            let mut heading = rng.gen_range(0.0..TAU);
            let [lo, hi] = spec.speed_range;
            let speed = if hi > lo { rng.gen_range(lo..hi) } else { lo };
            let mut out = Vec::with_capacity(steps);
            out.push(p);
            for _ in 1..steps {
                for _ in 0..spec.sample_period {
                    heading += turn.sample(rng);
                    p[0] += speed * heading.cos();
                    p[1] += speed * heading.sin();
                    reflect(&mut p[0], &mut heading, c.min_x, c.max_x, false);
                    reflect(&mut p[1], &mut heading, c.min_y, c.max_y, true);
                }
                out.push(p);
            }
            out
        })
        .collect()
}

pub fn simulate(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.scene_seed.unwrap_or(spec.seed));
    let truth_pos = kinematics(spec, &mut rng);
    let n = spec.n_vessels;
    let times: Vec<i64> = (0..=spec.duration / spec.sample_period)
        .map(|s| s * spec.sample_period)
        .collect();

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let id_a = |i: usize| format!("A{i:03}");
    let id_b = |i: usize| format!("B{:03}", perm[i]);

    let mut tracks_a = Vec::with_capacity(n);
    for (i, pos) in truth_pos.iter().enumerate() {
        let pts = times
            .iter()
            .zip(pos)
            .filter(|_| !rng.gen_bool(spec.ais_dropout_p))
            .map(|(&t, p)| TrackPoint::new(t, p[0], p[1]))
            .collect();
        tracks_a.push(RawTrack::new(id_a(i), Modality::A, pts)?);
    }

    let cam = &spec.camera_transform;
    let bias_dist = Normal::new(0.0, spec.track_bias_std).expect("validated std");
    let noise = Normal::new(0.0, spec.pixel_noise_std).expect("validated std");
    let bias: Vec<[f64; 2]> = (0..n).map(|_| [bias_dist.sample(&mut rng), bias_dist.sample(&mut rng)]).collect();
    let pixel: Vec<Vec<[f64; 2]>> = truth_pos
        .iter()
        .zip(&bias)
        .map(|(pos, b)| {
            pos.iter()
                .map(|&p| {
                    let q = cam.apply(p);
                    [q[0] + b[0], q[1] + b[1]]
                })
                .collect()
        })
        .collect();
    let mut visible = vec![vec![true; times.len()]; n];
    for s in 0..times.len() {
        for i in 0..n {
            for j in i + 1..n {
                let (p, q) = (pixel[i][s], pixel[j][s]);
                if (p[0] - q[0]).hypot(p[1] - q[1]) < spec.occlusion_radius {
                    let far = if p[0].hypot(p[1]) > q[0].hypot(q[1]) { i } else { j };
                    visible[far][s] = false;
                }
            }
        }
    }
    let mut tracks_b = Vec::with_capacity(n);
    for i in 0..n {
        let mut pts = Vec::new();
        for (s, &t) in times.iter().enumerate() {
            let (dx, dy) = (noise.sample(&mut rng), noise.sample(&mut rng));
            if visible[i][s] {
                let p = pixel[i][s];
                pts.push(TrackPoint::new(t, p[0] + dx, p[1] + dy));
            }
        }
        tracks_b.push((id_b(i), pts));
    }

    let original = GroundTruth::new((0..n).map(|i| (id_a(i), id_b(i))))?;
    let mut del_rng = ChaCha8Rng::seed_from_u64(splitmix(spec.seed ^ 0xD1B5_4A32_D192_ED03));
    let mut victims: Vec<usize> = (0..n).collect();
    victims.shuffle(&mut del_rng);
    victims.truncate(spec.missing_targets);
    victims.sort_unstable();
    let mut drop_a = vec![false; n];
    let mut drop_b = vec![false; n];
    for &v in &victims {
        let from_a = match spec.missing_modality {
            MissingModality::A => true,
            MissingModality::B => false,
            MissingModality::Either => del_rng.gen_bool(0.5),
        };
        if from_a {
            drop_a[v] = true;
        } else {
            drop_b[v] = true;
        }
    }
    let mut deleted_ids = Vec::new();
    let tracks_a: Vec<RawTrack> = tracks_a
        .into_iter()
        .enumerate()
        .filter_map(|(i, tr)| {
            if drop_a[i] {
                deleted_ids.push(tr.target_id);
                None
            } else {
                Some(tr)
            }
        })
        .collect();
    let mut kept_b = Vec::new();
    for (i, (id, pts)) in tracks_b.into_iter().enumerate() {
        if drop_b[i] {
            deleted_ids.push(id);
        } else {
            kept_b.push(RawTrack::new(id, Modality::B, pts)?);
        }
    }
    kept_b.sort_by(|a, b| a.target_id.cmp(&b.target_id));
    deleted_ids.sort();

    let alive = |tracks: &[RawTrack], id: &str| tracks.iter().any(|t| t.target_id == id && !t.points.is_empty());
    let truth = GroundTruth::new(
        original
            .iter()
            .filter(|(a, b)| alive(&tracks_a, a) && alive(&kept_b, b))
            .cloned(),
    )?;
    Ok(Scenario {
        tracks_a,
        tracks_b: kept_b,
        truth,
        original_truth: original,
        spec: spec.clone(),
        deleted_ids,
    })
}

impl Scenario {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(File::create(dir.join(TRACKS_A))?);
        write_tracks_jsonl(&mut w, &self.tracks_a)?;
        w.flush()?;
        let mut w = BufWriter::new(File::create(dir.join(TRACKS_B))?);
        write_tracks_jsonl(&mut w, &self.tracks_b)?;
        w.flush()?;
        let truth = TruthFile {
            pairs: self.truth.clone(),
            original: self.original_truth.clone(),
            deleted_ids: self.deleted_ids.clone(),
        };
        fs::write(dir.join(TRUTH), serde_json::to_string_pretty(&truth)? + "\n")?;
        fs::write(dir.join(SPEC), serde_json::to_string_pretty(&self.spec)? + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read_tracks = |name: &str| -> Result<Vec<RawTrack>> {
            let path = dir.join(name);
            let f = File::open(&path).map_err(|e| CoreError::Format {
                path: path.display().to_string(),
                line: 0,
                msg: e.to_string(),
            })?;
            read_tracks_jsonl(BufReader::new(f), &path.display().to_string())
        };
        let read_json = |name: &str| -> Result<String> {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|e| CoreError::Format {
                path: path.display().to_string(),
                line: 0,
                msg: e.to_string(),
            })
        };
        let truth: TruthFile = serde_json::from_str(&read_json(TRUTH)?)?;
        let spec: ScenarioSpec = serde_json::from_str(&read_json(SPEC)?)?;
        Ok(Self {
            tracks_a: read_tracks(TRACKS_A)?,
            tracks_b: read_tracks(TRACKS_B)?,
            truth: truth.pairs,
            original_truth: truth.original,
            spec,
            deleted_ids: truth.deleted_ids,
        })
    }
}
