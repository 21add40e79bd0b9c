//! Scenario → aligned, normalized, paired windows with graphs and truth.

use serde::{Deserialize, Serialize};

use crate::affine::{fit_affine, AffineTransform2D};
use crate::error::Result;
use crate::graph::{build_graph, GraphOptions};
use crate::metrics::GroundTruth;
use crate::net::GraphContext;
use crate::sim::Scenario;
use crate::trajectory::{
    normalize_coords, pair_observations, resample_track, slice_windows_in, snap_to_grid, tracks_span, BoundingBox,
    ObservationSet, RawTrack, TrackPoint,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub k: usize,
    /// Step between training window starts.
    pub stride: usize,
    pub period: i64,
    /// Spline-resample tracks onto the grid instead of snapping timestamps.
    pub resample: bool,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            k: 6,
            stride: 1,
            period: 10,
            resample: false,
        }
    }
}

impl WindowConfig {
    /// Non-overlapping windows, used for evaluation.
    pub fn evaluation(&self) -> Self {
        Self {
            stride: self.k,
            ..self.clone()
        }
    }
}

/// One paired window ready for the network.
#[derive(Debug, Clone)]
pub struct Window {
    pub index: usize,
    pub a: ObservationSet,
    pub b: ObservationSet,
    pub ctx_a: GraphContext,
    pub ctx_b: GraphContext,
    /// Truth pairs with both ids present in the window.
    pub truth: GroundTruth,
}

impl Window {
    /// Truth over the scored pairs, in `pairs` order.
    pub fn pair_targets(&self, pairs: &[(usize, usize)]) -> Vec<f64> {
        let t = self.truth.matrix(&self.a, &self.b);
        pairs.iter().map(|&(i, j)| t[i * self.b.n() + j]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct PreparedScenario {
    pub windows: Vec<Window>,
    pub camera_fit: AffineTransform2D,
    pub bounds: BoundingBox,
}

impl PreparedScenario {
    /// Windows that have at least one truth pair.
    pub fn labeled(&self) -> impl Iterator<Item = &Window> {
        self.windows.iter().filter(|w| !w.truth.is_empty())
    }
}

/// Maps camera tracks into the broadcast frame using truth correspondences at
/// co-observed timestamps, as a surveyor would with reference points.
pub fn calibrate(tracks_a: &[RawTrack], tracks_b: &[RawTrack], truth: &GroundTruth) -> Result<AffineTransform2D> {
    let mut pairs = Vec::new();
    for (ia, ib) in truth.iter() {
        let (Some(ta), Some(tb)) = (
            tracks_a.iter().find(|t| &t.target_id == ia),
            tracks_b.iter().find(|t| &t.target_id == ib),
        ) else {
            continue;
        };
        for pb in &tb.points {
            if let Ok(k) = ta.points.binary_search_by_key(&pb.t, |p| p.t) {
                pairs.push((pb.pos(), ta.points[k].pos()));
            }
        }
    }
    fit_affine(&pairs)
}

fn align(tracks: &[RawTrack], cfg: &WindowConfig) -> Result<Vec<RawTrack>> {
    tracks
        .iter()
        .filter(|t| !t.points.is_empty())
        .map(|t| {
            if cfg.resample && t.points.len() >= 2 {
                resample_track(t, cfg.period)
            } else {
                Ok(snap_to_grid(t, cfg.period))
            }
        })
        .collect()
}

fn transform(tracks: &[RawTrack], tf: &AffineTransform2D) -> Vec<RawTrack> {
    tracks
        .iter()
        .map(|t| RawTrack {
            points: t
                .points
                .iter()
                .map(|p| {
                    let q = tf.apply(p.pos());
                    TrackPoint::new(p.t, q[0], q[1])
                })
                .collect(),
            ..t.clone()
        })
        .collect()
}

pub fn prepare(sc: &Scenario, cfg: &WindowConfig, opts: &GraphOptions) -> Result<PreparedScenario> {
    let camera_fit = calibrate(&sc.tracks_a, &sc.tracks_b, &sc.truth)?;
    prepare_with(sc, cfg, opts, camera_fit)
}

/// Like [`prepare`] with a given camera-to-broadcast transform.
pub fn prepare_with(
    sc: &Scenario,
    cfg: &WindowConfig,
    opts: &GraphOptions,
    camera_fit: AffineTransform2D,
) -> Result<PreparedScenario> {
    let a = align(&sc.tracks_a, cfg)?;
    let b = align(&transform(&sc.tracks_b, &camera_fit), cfg)?;
    let bounds = BoundingBox::from_points(sc.tracks_a.iter().flat_map(|t| &t.points))
        .unwrap_or_else(BoundingBox::unit)
        .expanded(0.05);
    bounds.check()?;
    let Some(span) = tracks_span(a.iter().chain(&b)) else {
        return Ok(PreparedScenario {
            windows: Vec::new(),
            camera_fit,
            bounds,
        });
    };
    let wa = slice_windows_in(&a, cfg.k, cfg.stride, cfg.period, span)?;
    let wb = slice_windows_in(&b, cfg.k, cfg.stride, cfg.period, span)?;
    let mut windows = Vec::with_capacity(wa.len());
    for (index, (oa, ob)) in wa.into_iter().zip(wb).enumerate() {
        let (oa, ob) = pair_observations(oa, ob);
        let oa = normalize_coords(&oa, &bounds)?;
        let ob = normalize_coords(&ob, &bounds)?;
        let truth = sc.truth.restrict(&oa, &ob);
        windows.push(Window {
            index,
            ctx_a: GraphContext::new(&build_graph(&oa, opts)),
            ctx_b: GraphContext::new(&build_graph(&ob, opts)),
            a: oa,
            b: ob,
            truth,
        });
    }
    Ok(PreparedScenario {
        windows,
        camera_fit,
        bounds,
    })
}
