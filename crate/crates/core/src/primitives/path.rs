use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Pose};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl PathSample {
    pub fn new(t: f64, x: f64, y: f64, heading: f64) -> Self {
        Self { t, x, y, heading }
    }

    pub fn from_pose(t: f64, p: Pose) -> Self {
        Self::new(t, p.x, p.y, p.heading)
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.heading)
    }
}

/// A time-stamped sequence of planar poses starting at `t = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PosePath {
    samples: Vec<PathSample>,
}

impl PosePath {
    /// Validates timestamps: first at zero, strictly increasing, all finite.
    pub fn new(samples: Vec<PathSample>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::InvalidParams("empty path".into()));
        };
        if first.t != 0.0 {
            return Err(Error::InvalidParams(format!(
                "path must start at t = 0, got {}",
                first.t
            )));
        }
        if samples
            .iter()
            .any(|s| !(s.t.is_finite() && s.x.is_finite() && s.y.is_finite() && s.heading.is_finite()))
        {
            return Err(Error::InvalidParams("non-finite path sample".into()));
        }
        if samples.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidParams(
                "timestamps must be strictly increasing".into(),
            ));
        }
        Ok(Self { samples })
    }

    pub(crate) fn from_samples_unchecked(samples: Vec<PathSample>) -> Self {
        debug_assert!(!samples.is_empty());
        Self { samples }
    }

    pub fn samples(&self) -> &[PathSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> PathSample {
        self.samples[0]
    }

    pub fn last(&self) -> PathSample {
        *self.samples.last().expect("path is never empty")
    }

    pub fn duration(&self) -> f64 {
        self.last().t
    }

    pub fn polyline_length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
            .sum()
    }

    /// Expresses a path given in `origin`'s frame in the parent frame.
    pub fn transformed(&self, origin: &Pose) -> PosePath {
        let samples = self
            .samples
            .iter()
            .map(|s| PathSample::from_pose(s.t, origin.compose(&s.pose())))
            .collect();
        PosePath { samples }
    }

    /// Re-expresses the path in the frame of its first pose, with time shifted to start at zero.
    pub fn normalized(&self) -> PosePath {
        let origin = self.first().pose();
        let t0 = self.first().t;
        let samples = self
            .samples
            .iter()
            .map(|s| PathSample::from_pose(s.t - t0, origin.relative(&s.pose())))
            .collect();
        PosePath { samples }
    }

    /// Linearly interpolated pose at time `t` (clamped to the path's time span).
    pub fn pose_at_time(&self, t: f64) -> Pose {
        let (i, f) = self.segment_at(t);
        if f == 0.0 {
            return self.samples[i].pose();
        }
        let (a, b) = (self.samples[i], self.samples[i + 1]);
        Pose::new(
            a.x + f * (b.x - a.x),
            a.y + f * (b.y - a.y),
            a.heading + f * wrap_angle(b.heading - a.heading),
        )
    }

    /// Index of the segment containing `t` and the fraction along it.
    pub fn segment_at(&self, t: f64) -> (usize, f64) {
        let n = self.samples.len();
        if n == 1 || t <= 0.0 {
            return (0, 0.0);
        }
        let i = self.samples.partition_point(|s| s.t <= t);
        if i >= n {
            return (n - 2, 1.0);
        }
        let i = i - 1;
        let (a, b) = (self.samples[i], self.samples[i + 1]);
        (i, (t - a.t) / (b.t - a.t))
    }

    /// Speed and curvature of the segment containing `t`.
    pub fn rates_at_time(&self, t: f64) -> (f64, f64) {
        if self.samples.len() < 2 {
            return (0.0, 0.0);
        }
        let (i, _) = self.segment_at(t);
        let (a, b) = (self.samples[i], self.samples[i + 1]);
        let len = (b.x - a.x).hypot(b.y - a.y);
        let speed = len / (b.t - a.t);
        let curvature = if len > 1e-12 {
            wrap_angle(b.heading - a.heading) / len
        } else {
            0.0
        };
        (speed, curvature)
    }

    /// Densified positions: the first sample, then every segment split into
    /// `ceil(len / ds)` equal pieces. Each segment is subdivided independently,
    /// so the point set of a path prefix is a prefix of the full point set.
    pub fn resample_xy(&self, ds: f64) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.samples.len() * 2);
        let s0 = self.samples[0];
        out.push([s0.x, s0.y]);
        for w in self.samples.windows(2) {
            for_each_segment_point(&w[0], &w[1], ds, |x, y| out.push([x, y]));
        }
        out
    }
}

/// Visits the points subdividing segment `a → b` at spacing `<= ds`, excluding `a`, including `b`.
#[inline]
pub(crate) fn for_each_segment_point(
    a: &PathSample,
    b: &PathSample,
    ds: f64,
    mut f: impl FnMut(f64, f64),
) {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len = dx.hypot(dy);
    let n = ((len / ds).ceil() as usize).max(1);
    let inv = 1.0 / n as f64;
    for i in 1..n {
        let f_i = i as f64 * inv;
        f(a.x + f_i * dx, a.y + f_i * dy);
    }
    f(b.x, b.y);
}

/// Cuts a long log into windows of `window` seconds every `stride` seconds,
/// each re-expressed in the frame of its first pose.
pub fn slice_log(log: &PosePath, window: f64, stride: f64) -> Vec<PosePath> {
    const EPS: f64 = 1e-9;
    let mut out = Vec::new();
    if window <= 0.0 || stride <= 0.0 {
        return out;
    }
    let t0 = log.first().t;
    let end = log.last().t;
    let mut k = 0usize;
    loop {
        let start = t0 + k as f64 * stride;
        let stop = start + window;
        if stop > end + EPS {
            break;
        }
        let slice: Vec<PathSample> = log
            .samples
            .iter()
            .copied()
            .filter(|s| s.t >= start - EPS && s.t <= stop + EPS)
            .collect();
        if slice.len() >= 2 {
            out.push(PosePath { samples: slice }.normalized());
        }
        k += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_log(duration: f64, dt: f64, speed: f64) -> PosePath {
        let n = (duration / dt).round() as usize;
        let samples = (0..=n)
            .map(|i| {
                let t = i as f64 * dt;
                // gently curving so that frame normalization is non-trivial
                let h = 0.1 * t;
                PathSample::new(t, speed * t, 0.05 * t * t, h)
            })
            .collect();
        PosePath::new(samples).unwrap()
    }

    #[test]
    fn slice_counts() {
        assert_eq!(slice_log(&line_log(30.0, 0.01, 2.0), 2.0, 2.0).len(), 15);
        assert_eq!(slice_log(&line_log(3.0, 0.01, 2.0), 2.0, 2.0).len(), 1);
        assert!(slice_log(&line_log(1.5, 0.01, 2.0), 2.0, 2.0).is_empty());
        assert_eq!(slice_log(&line_log(4.0, 0.01, 2.0), 2.0, 1.0).len(), 3);
    }

    #[test]
    fn slices_start_at_origin() {
        for s in slice_log(&line_log(30.0, 0.01, 2.0), 2.0, 2.0) {
            let f = s.first();
            assert_eq!(f.t, 0.0);
            assert!(f.x.abs() < 1e-12 && f.y.abs() < 1e-12 && f.heading.abs() < 1e-12);
            assert!((s.duration() - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_timestamps() {
        let bad = vec![PathSample::new(0.0, 0.0, 0.0, 0.0), PathSample::new(0.0, 1.0, 0.0, 0.0)];
        assert!(PosePath::new(bad).is_err());
        let late = vec![PathSample::new(0.5, 0.0, 0.0, 0.0)];
        assert!(PosePath::new(late).is_err());
        assert!(PosePath::new(vec![]).is_err());
    }

    #[test]
    fn interpolation_and_rates() {
        let p = PosePath::new(vec![
            PathSample::new(0.0, 0.0, 0.0, 0.0),
            PathSample::new(1.0, 2.0, 0.0, 0.0),
            PathSample::new(2.0, 2.0, 2.0, 1.0),
        ])
        .unwrap();
        let q = p.pose_at_time(0.5);
        assert_eq!((q.x, q.y), (1.0, 0.0));
        assert_eq!(p.pose_at_time(5.0), p.last().pose());
        assert_eq!(p.rates_at_time(0.2), (2.0, 0.0));
        assert_eq!(p.rates_at_time(1.5), (2.0, 0.5));
    }

    #[test]
    fn resample_spacing() {
        let p = PosePath::new(vec![
            PathSample::new(0.0, 0.0, 0.0, 0.0),
            PathSample::new(1.0, 0.105, 0.0, 0.0),
        ])
        .unwrap();
        let pts = p.resample_xy(0.01);
        assert_eq!(pts.len(), 12);
        assert_eq!(pts.last().unwrap(), &[0.105, 0.0]);
        for w in pts.windows(2) {
            assert!(w[1][0] - w[0][0] <= 0.01 + 1e-15);
        }
    }
}
