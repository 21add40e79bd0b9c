//! Trajectory types, grid alignment, windowing and coordinate normalization.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Default sampling period in seconds.
pub const DEFAULT_PERIOD: i64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub t: i64,
    pub x: f64,
    pub y: f64,
}

impl TrackPoint {
    pub fn new(t: i64, x: f64, y: f64) -> Self {
        Self { t, x, y }
    }

    pub fn pos(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTrack {
    pub target_id: String,
    pub modality: Modality,
    pub points: Vec<TrackPoint>,
}

impl RawTrack {
    /// Validates that timestamps are strictly increasing.
    pub fn new(target_id: impl Into<String>, modality: Modality, points: Vec<TrackPoint>) -> Result<Self> {
        let target_id = target_id.into();
        for w in points.windows(2) {
            if w[1].t <= w[0].t {
                return Err(CoreError::UnorderedTrack { id: target_id, t: w[1].t });
            }
        }
        Ok(Self {
            target_id,
            modality,
            points,
        })
    }

    pub fn span(&self) -> Option<(i64, i64)> {
        Some((self.points.first()?.t, self.points.last()?.t))
    }
}

/// Equally spaced timestamps of one window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub timestamps: Vec<i64>,
}

impl TimeWindow {
    pub fn new(start: i64, period: i64, k: usize) -> Self {
        Self {
            timestamps: (0..k as i64).map(|i| start + i * period).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.timestamps.len()
    }

    pub fn start(&self) -> i64 {
        self.timestamps[0]
    }

    pub fn index_of(&self, t: i64) -> Option<usize> {
        self.timestamps.binary_search(&t).ok()
    }
}

/// Zero-padded observations of one modality over one window.
///
/// `coords` and `mask` are stored target-major: entry `i * k + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub window: TimeWindow,
    /// `None` marks a padding row.
    pub ids: Vec<Option<String>>,
    pub coords: Vec<[f64; 2]>,
    pub mask: Vec<bool>,
}

impl ObservationSet {
    pub fn empty(window: TimeWindow) -> Self {
        Self {
            window,
            ids: Vec::new(),
            coords: Vec::new(),
            mask: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn k(&self) -> usize {
        self.window.k()
    }

    pub fn coord(&self, i: usize, t: usize) -> [f64; 2] {
        self.coords[i * self.k() + t]
    }

    pub fn observed(&self, i: usize, t: usize) -> bool {
        self.mask[i * self.k() + t]
    }

    pub fn id(&self, i: usize) -> Option<&str> {
        self.ids[i].as_deref()
    }

    /// Whether target `i` has at least one observed timestep.
    pub fn target_valid(&self, i: usize) -> bool {
        let k = self.k();
        self.mask[i * k..(i + 1) * k].iter().any(|&m| m)
    }

    pub fn valid_targets(&self) -> Vec<bool> {
        (0..self.n()).map(|i| self.target_valid(i)).collect()
    }

    pub fn n_valid(&self) -> usize {
        (0..self.n()).filter(|&i| self.target_valid(i)).count()
    }

    /// Appends padding rows until there are `n` targets.
    pub fn pad_to(&mut self, n: usize) {
        let k = self.k();
        while self.ids.len() < n {
            self.ids.push(None);
            self.coords.extend(std::iter::repeat([0.0, 0.0]).take(k));
            self.mask.extend(std::iter::repeat(false).take(k));
        }
    }

    /// Row index of a target id.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x.as_deref() == Some(id))
    }
}

/// Natural-order snap of timestamps to the nearest grid multiple. When two
/// samples land on the same grid time the one closer to it is kept.
pub fn snap_to_grid(track: &RawTrack, period: i64) -> RawTrack {
    let mut best: BTreeMap<i64, (i64, TrackPoint)> = BTreeMap::new();
    for p in &track.points {
        let g = (p.t as f64 / period as f64).round() as i64 * period;
        let dist = (p.t - g).abs();
        match best.get(&g) {
            Some((d, _)) if *d <= dist => {}
            _ => {
                best.insert(g, (dist, TrackPoint::new(g, p.x, p.y)));
            }
        }
    }
    RawTrack {
        target_id: track.target_id.clone(),
        modality: track.modality,
        points: best.into_values().map(|(_, p)| p).collect(),
    }
}

/// Interpolating cubic spline with not-a-knot end conditions. With exactly
/// four knots this is the interpolating cubic.
struct CubicSpline {
    t: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    fn fit(t: &[f64], y: &[f64]) -> Option<Self> {
        let n = t.len();
        debug_assert!(n >= 4);
        let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        let u = n - 2;
        let mut a = DMatrix::<f64>::zeros(u, u);
        let mut r = DVector::<f64>::zeros(u);
        for i in 1..n - 1 {
            let row = i - 1;
            r[row] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
            let mut add = |col: usize, v: f64| a[(row, col - 1)] += v;
            // M0 = M1·(1 + h0/h1) − M2·h0/h1
            if i - 1 == 0 {
                add(1, h[0] * (1.0 + h[0] / h[1]));
                add(2, -h[0] * h[0] / h[1]);
            } else {
                add(i - 1, h[i - 1]);
            }
            add(i, 2.0 * (h[i - 1] + h[i]));
            // M_{n-1} = M_{n-2}·(1 + h_{n-2}/h_{n-3}) − M_{n-3}·h_{n-2}/h_{n-3}
            if i + 1 == n - 1 {
                add(n - 2, h[i] * (1.0 + h[n - 2] / h[n - 3]));
                add(n - 3, -h[i] * h[n - 2] / h[n - 3]);
            } else {
                add(i + 1, h[i]);
            }
        }
        let inner = a.lu().solve(&r)?;
        let mut m = vec![0.0; n];
        m[1..n - 1].copy_from_slice(inner.as_slice());
        m[0] = m[1] * (1.0 + h[0] / h[1]) - m[2] * h[0] / h[1];
        m[n - 1] = m[n - 2] * (1.0 + h[n - 2] / h[n - 3]) - m[n - 3] * h[n - 2] / h[n - 3];
        Some(Self {
            t: t.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.t.len();
        let i = match self.t.partition_point(|&v| v <= x) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let h = t1 - t0;
        let (a, b) = (t1 - x, x - t0);
        self.m[i] * a.powi(3) / (6.0 * h)
            + self.m[i + 1] * b.powi(3) / (6.0 * h)
            + (self.y[i] / h - self.m[i] * h / 6.0) * a
            + (self.y[i + 1] / h - self.m[i + 1] * h / 6.0) * b
    }
}

fn linear_eval(t: &[f64], y: &[f64], x: f64) -> f64 {
    let n = t.len();
    let i = match t.partition_point(|&v| v <= x) {
        0 => 0,
        p => (p - 1).min(n - 2),
    };
    let w = (x - t[i]) / (t[i + 1] - t[i]);
    y[i] + w * (y[i + 1] - y[i])
}

/// Resamples a track onto the `period` grid inside its own time range.
/// Uses a cubic spline per axis, or linear interpolation below four points.
pub fn resample_track(track: &RawTrack, period: i64) -> Result<RawTrack> {
    if period <= 0 {
        return Err(CoreError::Config(format!("period must be positive, got {period}")));
    }
    let n = track.points.len();
    if n < 2 {
        return Err(CoreError::DegenerateTrack {
            id: track.target_id.clone(),
            msg: format!("need at least 2 points to resample, got {n}"),
        });
    }
    let ts: Vec<f64> = track.points.iter().map(|p| p.t as f64).collect();
    let xs: Vec<f64> = track.points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = track.points.iter().map(|p| p.y).collect();
    let (t0, t1) = (track.points[0].t, track.points[n - 1].t);
    let first = t0.div_euclid(period) * period + if t0.rem_euclid(period) == 0 { 0 } else { period };

    let splines = if n >= 4 {
        let degenerate = || CoreError::DegenerateTrack {
            id: track.target_id.clone(),
            msg: "spline system is singular".into(),
        };
        Some((
            CubicSpline::fit(&ts, &xs).ok_or_else(degenerate)?,
            CubicSpline::fit(&ts, &ys).ok_or_else(degenerate)?,
        ))
    } else {
        None
    };

    let by_time: BTreeMap<i64, &TrackPoint> = track.points.iter().map(|p| (p.t, p)).collect();
    let mut points = Vec::new();
    let mut g = first;
    while g <= t1 {
        let p = match (by_time.get(&g), &splines) {
            // knots are reproduced exactly
            (Some(p), _) => **p,
            (None, Some((sx, sy))) => TrackPoint::new(g, sx.eval(g as f64), sy.eval(g as f64)),
            (None, None) => TrackPoint::new(g, linear_eval(&ts, &xs, g as f64), linear_eval(&ts, &ys, g as f64)),
        };
        points.push(p);
        g += period;
    }
    Ok(RawTrack {
        target_id: track.target_id.clone(),
        modality: track.modality,
        points,
    })
}

/// Common time span of a set of tracks.
pub fn tracks_span<'a>(tracks: impl IntoIterator<Item = &'a RawTrack>) -> Option<(i64, i64)> {
    tracks
        .into_iter()
        .filter_map(RawTrack::span)
        .reduce(|(a0, a1), (b0, b1)| (a0.min(b0), a1.max(b1)))
}

/// Windows over the tracks' own time span. Tracks must already sit on the
/// `period` grid.
pub fn slice_windows(tracks: &[RawTrack], k: usize, stride: usize, period: i64) -> Result<Vec<ObservationSet>> {
    match tracks_span(tracks) {
        None => Ok(Vec::new()),
        Some(span) => slice_windows_in(tracks, k, stride, period, span),
    }
}

/// Windows of `k` grid steps starting every `stride` steps inside `span`.
/// Ids are sorted lexicographically; a target is present iff it has at least
/// one observation in the window.
pub fn slice_windows_in(
    tracks: &[RawTrack],
    k: usize,
    stride: usize,
    period: i64,
    span: (i64, i64),
) -> Result<Vec<ObservationSet>> {
    if k < 2 || stride < 1 || period <= 0 {
        return Err(CoreError::Config(format!(
            "window needs k >= 2, stride >= 1 and period > 0 (got k={k}, stride={stride}, period={period})"
        )));
    }
    let mut sorted: Vec<&RawTrack> = tracks.iter().collect();
    sorted.sort_by(|a, b| a.target_id.cmp(&b.target_id));
    let lookup: Vec<BTreeMap<i64, [f64; 2]>> = sorted
        .iter()
        .map(|tr| tr.points.iter().map(|p| (p.t, p.pos())).collect())
        .collect();

    let first = span.0.div_euclid(period) * period + if span.0.rem_euclid(period) == 0 { 0 } else { period };
    let step = stride as i64 * period;
    let mut out = Vec::new();
    let mut start = first;
    while start + (k as i64 - 1) * period <= span.1 {
        let window = TimeWindow::new(start, period, k);
        let mut obs = ObservationSet::empty(window.clone());
        for (tr, pts) in sorted.iter().zip(&lookup) {
            let row: Vec<Option<[f64; 2]>> = window.timestamps.iter().map(|t| pts.get(t).copied()).collect();
            if row.iter().all(Option::is_none) {
                continue;
            }
            obs.ids.push(Some(tr.target_id.clone()));
            for p in row {
                obs.coords.push(p.unwrap_or([0.0, 0.0]));
                obs.mask.push(p.is_some());
            }
        }
        out.push(obs);
        start += step;
    }
    Ok(out)
}

/// Pads the two modalities of one window to a common `N = max(N_a, N_b)`.
pub fn pair_observations(mut a: ObservationSet, mut b: ObservationSet) -> (ObservationSet, ObservationSet) {
    let n = a.n().max(b.n());
    a.pad_to(n);
    b.pad_to(n);
    (a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a TrackPoint>) -> Option<Self> {
        pts.into_iter().fold(None, |acc, p| {
            Some(match acc {
                None => Self::new(p.x, p.y, p.x, p.y),
                Some(b) => Self::new(b.min_x.min(p.x), b.min_y.min(p.y), b.max_x.max(p.x), b.max_y.max(p.y)),
            })
        })
    }

    /// Grows each side by `frac` of the box extent.
    pub fn expanded(&self, frac: f64) -> Self {
        let (dx, dy) = (self.width() * frac, self.height() * frac);
        Self::new(self.min_x - dx, self.min_y - dy, self.max_x + dx, self.max_y + dy)
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.min_x..=self.max_x).contains(&x) && (self.min_y..=self.max_y).contains(&y)
    }

    pub fn check(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.width()) && ok(self.height()) {
            Ok(())
        } else {
            Err(CoreError::DegenerateBounds(format!("{self:?}")))
        }
    }
}

/// Maps observed coordinates linearly so that `bounds` becomes `[0,1]²`.
/// Padded entries stay at the origin.
pub fn normalize_coords(obs: &ObservationSet, bounds: &BoundingBox) -> Result<ObservationSet> {
    bounds.check()?;
    let mut out = obs.clone();
    for (c, &m) in out.coords.iter_mut().zip(&obs.mask) {
        if m {
            *c = [(c[0] - bounds.min_x) / bounds.width(), (c[1] - bounds.min_y) / bounds.height()];
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct PointRecord {
    id: String,
    modality: Modality,
    t: i64,
    x: f64,
    y: f64,
}

/// Writes tracks as JSON lines, one observation per line.
pub fn write_tracks_jsonl(mut w: impl Write, tracks: &[RawTrack]) -> Result<()> {
    for tr in tracks {
        for p in &tr.points {
            let rec = PointRecord {
                id: tr.target_id.clone(),
                modality: tr.modality,
                t: p.t,
                x: p.x,
                y: p.y,
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Reads JSON-lines observations, grouping by `(id, modality)`. `origin` is
/// used in error messages.
pub fn read_tracks_jsonl(r: impl BufRead, origin: &str) -> Result<Vec<RawTrack>> {
    let mut groups: BTreeMap<(String, Modality), Vec<TrackPoint>> = BTreeMap::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PointRecord = serde_json::from_str(&line).map_err(|e| CoreError::Format {
            path: origin.to_string(),
            line: n + 1,
            msg: e.to_string(),
        })?;
        groups
            .entry((rec.id, rec.modality))
            .or_default()
            .push(TrackPoint::new(rec.t, rec.x, rec.y));
    }
    groups
        .into_iter()
        .map(|((id, modality), mut pts)| {
            pts.sort_by_key(|p| p.t);
            RawTrack::new(id, modality, pts)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(pts: &[(i64, f64, f64)]) -> RawTrack {
        RawTrack::new("v", Modality::A, pts.iter().map(|&(t, x, y)| TrackPoint::new(t, x, y)).collect()).unwrap()
    }

    #[test]
    fn on_grid_track_unchanged() {
        let tr = track(&[(0, 0.1, 0.2), (10, 0.3, 0.1), (20, 0.5, 0.5), (30, 0.2, 0.9), (40, 0.0, 0.0)]);
        assert_eq!(resample_track(&tr, 10).unwrap(), tr);
    }

    #[test]
    fn linear_fallback_midpoint() {
        let tr = track(&[(0, 0.0, 0.0), (20, 2.0, 2.0)]);
        let out = resample_track(&tr, 10).unwrap();
        assert_eq!(out.points, vec![
            TrackPoint::new(0, 0.0, 0.0),
            TrackPoint::new(10, 1.0, 1.0),
            TrackPoint::new(20, 2.0, 2.0)
        ]);
    }

    #[test]
    fn resample_reproduces_cubic() {
        let f = |t: f64| t.powi(3);
        let times = [0i64, 7, 13, 22, 31, 44];
        let tr = track(&times.iter().map(|&t| (t, f(t as f64), -2.0 * f(t as f64) + 1.0)).collect::<Vec<_>>());
        let out = resample_track(&tr, 10).unwrap();
        assert_eq!(out.points.iter().map(|p| p.t).collect::<Vec<_>>(), vec![0, 10, 20, 30, 40]);
        for p in &out.points {
            let want = f(p.t as f64);
            assert!((p.x - want).abs() <= 1e-9 * want.abs().max(1.0), "t={} {} vs {}", p.t, p.x, want);
        }
    }

    #[test]
    fn degenerate_track_rejected() {
        let tr = track(&[(0, 0.0, 0.0)]);
        assert!(matches!(resample_track(&tr, 10), Err(CoreError::DegenerateTrack { .. })));
    }

    #[test]
    fn unordered_points_rejected() {
        let pts = vec![TrackPoint::new(10, 0.0, 0.0), TrackPoint::new(10, 1.0, 1.0)];
        assert!(RawTrack::new("x", Modality::B, pts).is_err());
    }

    #[test]
    fn snap_keeps_closest_on_collision() {
        let tr = track(&[(8, 1.0, 1.0), (11, 2.0, 2.0), (19, 3.0, 3.0)]);
        let s = snap_to_grid(&tr, 10);
        assert_eq!(s.points, vec![TrackPoint::new(10, 2.0, 2.0), TrackPoint::new(20, 3.0, 3.0)]);
    }

    #[test]
    fn window_counts() {
        let six = track(&(0..6).map(|i| (i * 10, 0.1, 0.1)).collect::<Vec<_>>());
        let w = slice_windows(&[six], 6, 1, 10).unwrap();
        assert_eq!(w.len(), 1);
        assert!(w[0].mask.iter().all(|&m| m));

        let eight = track(&(0..8).map(|i| (i * 10, 0.1, 0.1)).collect::<Vec<_>>());
        assert_eq!(slice_windows(&[eight], 6, 1, 10).unwrap().len(), 3);
        assert!(slice_windows(&[], 6, 1, 10).unwrap().is_empty());
    }

    #[test]
    fn padding_rule() {
        let full = RawTrack::new("a", Modality::A, (0..6).map(|i| TrackPoint::new(i * 10, 0.5, 0.5)).collect()).unwrap();
        let sparse = RawTrack::new("b", Modality::A, vec![TrackPoint::new(0, 0.3, 0.4), TrackPoint::new(20, 0.6, 0.7)]).unwrap();
        let w = slice_windows(&[sparse, full], 6, 1, 10).unwrap();
        assert_eq!(w.len(), 1);
        let obs = &w[0];
        assert_eq!(obs.ids, vec![Some("a".to_string()), Some("b".to_string())]);
        assert_eq!(&obs.mask[6..], &[true, false, true, false, false, false]);
        assert_eq!(obs.coord(1, 1), [0.0, 0.0]);
        assert_eq!(obs.coord(1, 2), [0.6, 0.7]);
    }

    #[test]
    fn normalization() {
        let tr = track(&[(0, 0.5, 0.5), (10, 0.25, 1.0)]);
        let obs = &slice_windows(&[tr], 2, 1, 10).unwrap()[0];
        let same = normalize_coords(obs, &BoundingBox::unit()).unwrap();
        assert_eq!(&same, obs);
        let boxed = normalize_coords(obs, &BoundingBox::new(-1.0, 0.0, 2.0, 1.0)).unwrap();
        assert_eq!(boxed.coord(0, 0), [0.5, 0.5]);
        assert!(normalize_coords(obs, &BoundingBox::new(0.0, 0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let tr = track(&[(0, 0.5, 0.25), (10, 0.125, 1.0)]);
        let mut buf = Vec::new();
        write_tracks_jsonl(&mut buf, std::slice::from_ref(&tr)).unwrap();
        let first = String::from_utf8(buf.clone()).unwrap();
        assert!(first.starts_with(r#"{"id":"v","modality":"A","t":0,"x":0.5,"y":0.25}"#));
        assert_eq!(read_tracks_jsonl(buf.as_slice(), "mem").unwrap(), vec![tr]);
        let err = read_tracks_jsonl("{}\n".as_bytes(), "f.jsonl").unwrap_err().to_string();
        assert!(err.starts_with("f.jsonl:1:"), "{err}");
    }
}
