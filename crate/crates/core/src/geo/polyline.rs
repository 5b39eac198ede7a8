use serde::{Deserialize, Serialize};

use super::{haversine, BBox, GeoError, GeoPoint, METERS_PER_DEGREE};

/// An ordered chain of at least two distinct consecutive points with its
/// great-circle length cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<GeoPoint>", into = "Vec<GeoPoint>")]
pub struct Polyline {
    points: Vec<GeoPoint>,
    length_m: f64,
}

impl Polyline {
    pub fn new(points: Vec<GeoPoint>) -> Result<Self, GeoError> {
        if points.len() < 2 {
            return Err(GeoError::TooFewPoints(points.len()));
        }
        for p in &points {
            GeoPoint::new(p.lon, p.lat)?;
        }
        if let Some(i) = points.windows(2).position(|w| w[0] == w[1]) {
            return Err(GeoError::RepeatedPoint(i + 1));
        }
        let length_m = points.windows(2).map(|w| haversine(w[0], w[1])).sum();
        Ok(Self { points, length_m })
    }

    /// Builds a polyline after dropping consecutive duplicates.
    ///
    /// Returns `None` when fewer than two distinct points remain, e.g. for a
    /// sequence whose camera never moved.
    pub fn from_track<I: IntoIterator<Item = GeoPoint>>(points: I) -> Option<Self> {
        let mut pts: Vec<GeoPoint> = Vec::new();
        for p in points {
            if pts.last() != Some(&p) {
                pts.push(p);
            }
        }
        Self::new(pts).ok()
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.points
    }

    pub fn length_m(&self) -> f64 {
        self.length_m
    }

    pub fn bbox(&self) -> BBox {
        BBox::from_points(self.points.iter().copied()).expect("polyline has points")
    }

    /// The point halfway along the line by length.
    pub fn midpoint(&self) -> GeoPoint {
        let mut remaining = self.length_m / 2.0;
        for w in self.points.windows(2) {
            let d = haversine(w[0], w[1]);
            if remaining <= d {
                let t = if d > 0.0 { remaining / d } else { 0.0 };
                return lerp(w[0], w[1], t);
            }
            remaining -= d;
        }
        *self.points.last().unwrap()
    }

    /// Length in metres of the part of the line inside `b`.
    pub fn clipped_length(&self, b: &BBox) -> f64 {
        self.points
            .windows(2)
            .filter_map(|w| clip_edge(w[0], w[1], b))
            .map(|(a, c)| haversine(a, c))
            .sum()
    }
}

impl TryFrom<Vec<GeoPoint>> for Polyline {
    type Error = GeoError;
    fn try_from(points: Vec<GeoPoint>) -> Result<Self, Self::Error> {
        Self::new(points)
    }
}

impl From<Polyline> for Vec<GeoPoint> {
    fn from(line: Polyline) -> Self {
        line.points
    }
}

fn lerp(a: GeoPoint, b: GeoPoint, t: f64) -> GeoPoint {
    GeoPoint { lon: a.lon + (b.lon - a.lon) * t, lat: a.lat + (b.lat - a.lat) * t }
}

// Liang-Barsky in degree space.
fn clip_edge(a: GeoPoint, b: GeoPoint, bbox: &BBox) -> Option<(GeoPoint, GeoPoint)> {
    let (dx, dy) = (b.lon - a.lon, b.lat - a.lat);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    let checks = [
        (-dx, a.lon - bbox.min_lon),
        (dx, bbox.max_lon - a.lon),
        (-dy, a.lat - bbox.min_lat),
        (dy, bbox.max_lat - a.lat),
    ];
    for (p, q) in checks {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
            if t0 > t1 {
                return None;
            }
        }
    }
    Some((lerp(a, b, t0), lerp(a, b, t1)))
}

fn wrap_lon_delta(d: f64) -> f64 {
    if d > 180.0 {
        d - 360.0
    } else if d < -180.0 {
        d + 360.0
    } else {
        d
    }
}

fn normalize_lon(lon: f64) -> f64 {
    wrap_lon_delta(lon)
}

/// Shortest distance from `p` to the line and the closest point on it.
///
/// Each edge is projected into an equirectangular plane centred on `p`, the
/// projection parameter is clamped to the edge, and the resulting point is
/// measured back with [`haversine`].
///
/// ```
/// use surface_forge::geo::{point_to_polyline_distance, GeoPoint, Polyline};
/// let line = Polyline::new(vec![
///     GeoPoint::new(-0.001, 0.0).unwrap(),
///     GeoPoint::new(0.001, 0.0).unwrap(),
/// ]).unwrap();
/// let (d, closest) = point_to_polyline_distance(GeoPoint::new(0.0, 0.0001).unwrap(), &line);
/// assert!((d - 11.119).abs() < 1e-3);
/// assert!(closest.lat.abs() < 1e-12);
/// ```
pub fn point_to_polyline_distance(p: GeoPoint, line: &Polyline) -> (f64, GeoPoint) {
    let kx = METERS_PER_DEGREE * p.lat.to_radians().cos().max(1e-12);
    let ky = METERS_PER_DEGREE;
    let to_plane = |q: GeoPoint| (wrap_lon_delta(q.lon - p.lon) * kx, (q.lat - p.lat) * ky);

    let mut best = (f64::INFINITY, line.points[0]);
    let mut consider = |q: GeoPoint| {
        let d = haversine(p, q);
        if d < best.0 {
            best = (d, q);
        }
    };
    for w in line.points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ax, ay) = to_plane(a);
        let (bx, by) = to_plane(b);
        let (dx, dy) = (bx - ax, by - ay);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 { (-(ax * dx + ay * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let closest = GeoPoint {
            lon: normalize_lon(p.lon + (ax + t * dx) / kx),
            lat: (p.lat + (ay + t * dy) / ky).clamp(-90.0, 90.0),
        };
        consider(closest);
        consider(a);
        consider(b);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(lon: f64, lat: f64) -> GeoPoint {
        GeoPoint::new(lon, lat).unwrap()
    }

    fn line(pts: &[(f64, f64)]) -> Polyline {
        Polyline::new(pts.iter().map(|&(x, y)| p(x, y)).collect()).unwrap()
    }

    #[test]
    fn rejects_short_and_repeated() {
        assert_eq!(Polyline::new(vec![p(0.0, 0.0)]), Err(GeoError::TooFewPoints(1)));
        assert_eq!(
            Polyline::new(vec![p(0.0, 0.0), p(0.0, 0.0), p(1.0, 0.0)]),
            Err(GeoError::RepeatedPoint(1))
        );
        assert!(Polyline::from_track([p(1.0, 1.0), p(1.0, 1.0)]).is_none());
        assert_eq!(Polyline::from_track([p(1.0, 1.0), p(1.0, 1.0), p(2.0, 1.0)]).unwrap().points().len(), 2);
    }

    #[test]
    fn cached_length_matches_edges() {
        let l = line(&[(0.0, 0.0), (0.01, 0.0), (0.01, 0.01)]);
        let expected = haversine(p(0.0, 0.0), p(0.01, 0.0)) + haversine(p(0.01, 0.0), p(0.01, 0.01));
        assert!((l.length_m() - expected).abs() <= expected * 1e-12);
    }

    #[test]
    fn on_vertex_is_zero() {
        let l = line(&[(10.0, 50.0), (10.001, 50.0), (10.001, 50.001)]);
        let (d, c) = point_to_polyline_distance(p(10.001, 50.0), &l);
        assert_eq!(d, 0.0);
        assert_eq!(c, p(10.001, 50.0));
    }

    #[test]
    fn perpendicular_at_equator() {
        let l = line(&[(-0.001, 0.0), (0.001, 0.0)]);
        let (d, _) = point_to_polyline_distance(p(0.0, 0.0001), &l);
        let expected = 0.0001 * METERS_PER_DEGREE;
        assert!((d - expected).abs() < 1e-6);
        assert!((d - 11.119).abs() < 1e-3);
    }

    #[test]
    fn beyond_end_clamps_to_endpoint() {
        let l = line(&[(0.0, 0.0), (0.001, 0.0)]);
        let q = p(0.002, 0.0005);
        let (d, c) = point_to_polyline_distance(q, &l);
        assert_eq!(c, p(0.001, 0.0));
        assert!((d - haversine(q, p(0.001, 0.0))).abs() < 1e-9);
    }

    #[test]
    fn midpoint_of_straight_line() {
        let l = line(&[(0.0, 0.0), (0.002, 0.0), (0.004, 0.0)]);
        let m = l.midpoint();
        assert!((m.lon - 0.002).abs() < 1e-9 && m.lat.abs() < 1e-12);
    }

    #[test]
    fn clipping_to_box() {
        let l = line(&[(-1.0, 0.5), (2.0, 0.5)]);
        let b = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let expected = haversine(p(0.0, 0.5), p(1.0, 0.5));
        assert!((l.clipped_length(&b) - expected).abs() < 1e-6);
        let outside = line(&[(3.0, 3.0), (4.0, 4.0)]);
        assert_eq!(outside.clipped_length(&b), 0.0);
        let inside = line(&[(0.1, 0.1), (0.2, 0.2)]);
        assert!((inside.clipped_length(&b) - inside.length_m()).abs() < 1e-9);
    }

    #[test]
    fn serde_validates() {
        let l = line(&[(0.0, 0.0), (1.0, 1.0)]);
        let json = serde_json::to_string(&l).unwrap();
        let back: Polyline = serde_json::from_str(&json).unwrap();
        assert_eq!(back, l);
        assert!(serde_json::from_str::<Polyline>(r#"[{"lon":0.0,"lat":0.0}]"#).is_err());
    }

    // Local fixture: a short random polyline near a random mid-latitude origin
    // and a query point within a few hundred metres.
    fn arb_fixture() -> impl Strategy<Value = (GeoPoint, Polyline)> {
        (-170.0..170.0f64, -60.0..60.0f64, prop::collection::vec((-0.003..0.003f64, -0.003..0.003f64), 2..5), (-0.004..0.004f64, -0.004..0.004f64))
            .prop_filter_map("degenerate line", |(lon, lat, offs, (qx, qy))| {
                let pts: Vec<GeoPoint> = offs.iter().map(|&(dx, dy)| GeoPoint { lon: lon + dx, lat: lat + dy }).collect();
                let l = Polyline::from_track(pts)?;
                Some((GeoPoint { lon: lon + qx, lat: lat + qy }, l))
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn never_beaten_by_dense_samples((q, l) in arb_fixture()) {
            let (d, closest) = point_to_polyline_distance(q, &l);
            for v in l.points() {
                prop_assert!(d <= haversine(q, *v) + 1e-9);
            }
            for w in l.points().windows(2) {
                let len = haversine(w[0], w[1]);
                let steps = len.ceil().max(1.0) as usize;
                for i in 0..=steps {
                    let s = lerp(w[0], w[1], i as f64 / steps as f64);
                    prop_assert!(d <= haversine(q, s) + 0.01, "d={d} sample={}", haversine(q, s));
                }
            }
            prop_assert!((haversine(q, closest) - d).abs() < 1e-9);
        }
    }
}
