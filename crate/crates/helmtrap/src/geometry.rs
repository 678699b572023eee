//! Obstacle boundaries as unions of closed counterclockwise loops of
//! parametrised arcs, together with the radial sign tests used to classify
//! them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::gauss_legendre;

pub type Point = [f64; 2];

/// `e^{1/4}`: the minimal admissible ratio `R1 / R0`.
pub fn ratio_threshold() -> f64 {
    0.25f64.exp()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid geometry: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(GeometryError::Invalid(msg.into()))
}

/// Shape of a single smooth arc, parametrised over `t` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ArcShape {
    Line { a: Point, b: Point },
    /// `center + (sx cos th, sy sin th)` with `th` running from `theta0` to `theta1`.
    Ellipse {
        center: Point,
        semi: [f64; 2],
        theta0: f64,
        theta1: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub shape: ArcShape,
    length: f64,
}

impl Arc {
    pub fn new(shape: ArcShape) -> Result<Self> {
        let mut arc = Arc { shape, length: 0.0 };
        match &arc.shape {
            ArcShape::Line { a, b } => {
                if dist(*a, *b) <= 0.0 {
                    return invalid("degenerate line segment");
                }
            }
            ArcShape::Ellipse { semi, theta0, theta1, .. } => {
                if semi[0] <= 0.0 || semi[1] <= 0.0 || theta0 == theta1 {
                    return invalid("degenerate elliptic arc");
                }
            }
        }
        arc.length = arc.compute_length();
        Ok(arc)
    }

    pub fn line(a: Point, b: Point) -> Result<Self> {
        Arc::new(ArcShape::Line { a, b })
    }

    pub fn point(&self, t: f64) -> Point {
        match &self.shape {
            ArcShape::Line { a, b } => [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])],
            ArcShape::Ellipse { center, semi, theta0, theta1 } => {
                let th = theta0 + t * (theta1 - theta0);
                [center[0] + semi[0] * th.cos(), center[1] + semi[1] * th.sin()]
            }
        }
    }

    /// First derivative with respect to `t`.
    pub fn d1(&self, t: f64) -> Point {
        match &self.shape {
            ArcShape::Line { a, b } => [b[0] - a[0], b[1] - a[1]],
            ArcShape::Ellipse { semi, theta0, theta1, .. } => {
                let dth = theta1 - theta0;
                let th = theta0 + t * dth;
                [-semi[0] * th.sin() * dth, semi[1] * th.cos() * dth]
            }
        }
    }

    /// Second derivative with respect to `t`.
    pub fn d2(&self, t: f64) -> Point {
        match &self.shape {
            ArcShape::Line { .. } => [0.0, 0.0],
            ArcShape::Ellipse { semi, theta0, theta1, .. } => {
                let dth = theta1 - theta0;
                let th = theta0 + t * dth;
                [-semi[0] * th.cos() * dth * dth, -semi[1] * th.sin() * dth * dth]
            }
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.shape, ArcShape::Line { .. })
    }

    /// Outward unit normal for a counterclockwise loop: the unit tangent
    /// rotated clockwise.
    pub fn normal(&self, t: f64) -> Point {
        let d = self.d1(t);
        let s = d[0].hypot(d[1]);
        [d[1] / s, -d[0] / s]
    }

    /// Signed curvature, positive where the loop is locally convex.
    pub fn curvature(&self, t: f64) -> f64 {
        let d = self.d1(t);
        let dd = self.d2(t);
        let s = d[0].hypot(d[1]);
        (d[0] * dd[1] - d[1] * dd[0]) / (s * s * s)
    }

    pub fn speed(&self, t: f64) -> f64 {
        let d = self.d1(t);
        d[0].hypot(d[1])
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Arc length between parameters `t0 < t1`.
    pub fn length_between(&self, t0: f64, t1: f64) -> f64 {
        match &self.shape {
            ArcShape::Line { .. } => (t1 - t0) * self.speed(0.0),
            ArcShape::Ellipse { .. } => {
                let (x, w) = gauss_legendre(32);
                let pieces = 8;
                let mut total = 0.0;
                for p in 0..pieces {
                    let a = t0 + (t1 - t0) * p as f64 / pieces as f64;
                    let b = t0 + (t1 - t0) * (p + 1) as f64 / pieces as f64;
                    let h = 0.5 * (b - a);
                    let c = 0.5 * (a + b);
                    total += x.iter().zip(&w).map(|(xi, wi)| wi * self.speed(c + h * xi)).sum::<f64>() * h;
                }
                total
            }
        }
    }

    fn compute_length(&self) -> f64 {
        self.length_between(0.0, 1.0)
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// A closed loop. `corner[j]` marks a tangent discontinuity at the start of
/// arc `j` (equivalently the end of arc `j - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Loop {
    pub arcs: Vec<Arc>,
    pub corner: Vec<bool>,
}

impl Loop {
    fn from_arcs(arcs: Vec<Arc>) -> Result<Self> {
        if arcs.is_empty() {
            return invalid("empty loop");
        }
        let n = arcs.len();
        let mut corner = vec![false; n];
        for j in 0..n {
            let prev = &arcs[(j + n - 1) % n];
            let end = prev.point(1.0);
            let start = arcs[j].point(0.0);
            let scale = 1.0 + norm(end).max(norm(start));
            if dist(end, start) > 1e-12 * scale {
                return invalid(format!("loop does not close between arcs {} and {}", (j + n - 1) % n, j));
            }
            let t0 = prev.d1(1.0);
            let t1 = arcs[j].d1(0.0);
            let cross = (t0[0] * t1[1] - t0[1] * t1[0]) / (norm(t0) * norm(t1));
            let dot = t0[0] * t1[0] + t0[1] * t1[1];
            corner[j] = cross.abs() > 1e-9 || dot < 0.0;
        }
        Ok(Loop { arcs, corner })
    }

    pub fn length(&self) -> f64 {
        self.arcs.iter().map(|a| a.length()).sum()
    }

    /// Dense polyline through the loop, `per_arc` points per arc.
    pub fn polyline(&self, per_arc: usize) -> Vec<Point> {
        let mut pts = Vec::with_capacity(self.arcs.len() * per_arc);
        for arc in &self.arcs {
            let m = if arc.is_flat() { 1 } else { per_arc };
            for i in 0..m {
                pts.push(arc.point(i as f64 / m as f64));
            }
        }
        pts
    }

    fn signed_area(&self) -> f64 {
        let p = self.polyline(512);
        let n = p.len();
        (0..n)
            .map(|i| {
                let a = p[i];
                let b = p[(i + 1) % n];
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>()
            * 0.5
    }
}

/// A pair of facing vertical flat segments `{x1 = a1}` (normal `+e1`) and
/// `{x1 = a2}` (normal `-e1`), with the common `x2` range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FacingSegments {
    pub a1: f64,
    pub a2: f64,
    /// Overlap of the two segments in `x2`.
    pub lo: f64,
    pub hi: f64,
}

/// Bump half-width as a fraction of the overlap half-height.
pub const BUMP_FRACTION: f64 = 0.4;

impl FacingSegments {
    pub fn gap(&self) -> f64 {
        self.a2 - self.a1
    }

    /// `(center, half_width)` of the quasimode bump in `x2`.
    pub fn bump_window(&self) -> (f64, f64) {
        (0.5 * (self.lo + self.hi), BUMP_FRACTION * 0.5 * (self.hi - self.lo))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metadata {
    pub label: String,
    pub facing: Option<FacingSegments>,
    /// Gap `a` when the facing segments bound a trapped strip in the exterior.
    pub parallel_gap: Option<f64>,
    /// Given `(R0, R1)` when the constructor knows them.
    pub radii: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    pub loops: Vec<Loop>,
    pub meta: Metadata,
}

/// User-facing description of a geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GeometrySpec {
    Circle {
        radius: f64,
        #[serde(default)]
        center: Point,
    },
    Polygon {
        vertices: Vec<Point>,
    },
    TwoSquares {
        side: f64,
        gap: f64,
    },
    TwoDiscs {
        radius: f64,
        gap: f64,
    },
    EllipticCavity {
        semi_x: f64,
        semi_y: f64,
        aperture_deg: f64,
        thickness: f64,
    },
    UCavity {
        width: f64,
        wall_height: f64,
        peak_height: f64,
        margin: f64,
        depth: f64,
    },
}

impl GeometrySpec {
    pub fn default_elliptic_cavity() -> Self {
        GeometrySpec::EllipticCavity {
            semi_x: 0.5,
            semi_y: 1.0,
            aperture_deg: 50.0,
            thickness: 1.8,
        }
    }

    pub fn default_u_cavity() -> Self {
        GeometrySpec::UCavity {
            width: 4.0,
            wall_height: 1.0,
            peak_height: 1.5,
            margin: 1.0,
            depth: 2.0,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return invalid(format!("{name} must be positive, got {v}"));
    }
    Ok(())
}

fn polygon_loop(vertices: &[Point]) -> Result<Loop> {
    let n = vertices.len();
    let arcs = (0..n)
        .map(|i| Arc::line(vertices[i], vertices[(i + 1) % n]))
        .collect::<Result<Vec<_>>>()?;
    Loop::from_arcs(arcs)
}

fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let orient = |a: Point, b: Point, c: Point| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn check_simple_polygon(v: &[Point]) -> Result<()> {
    let n = v.len();
    if n < 3 {
        return invalid("polygon needs at least 3 vertices");
    }
    for i in 0..n {
        if dist(v[i], v[(i + 1) % n]) <= 0.0 {
            return invalid(format!("repeated vertex {i}"));
        }
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return invalid(format!("self-intersecting polygon: edges {i} and {j} cross"));
            }
        }
    }
    Ok(())
}

fn polygon_area(v: &[Point]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i][0] * v[(i + 1) % n][1] - v[i][1] * v[(i + 1) % n][0]).sum::<f64>()
}

fn ccw(mut v: Vec<Point>) -> Vec<Point> {
    if polygon_area(&v) < 0.0 {
        v.reverse();
    }
    v
}

fn circle_loop(center: Point, r: f64) -> Result<Loop> {
    let arc = Arc::new(ArcShape::Ellipse {
        center,
        semi: [r, r],
        theta0: 0.0,
        theta1: 2.0 * std::f64::consts::PI,
    })?;
    Loop::from_arcs(vec![arc])
}

/// Build a boundary from its description.
pub fn make_geometry(spec: &GeometrySpec) -> Result<Boundary> {
    let b = match spec {
        GeometrySpec::Circle { radius, center } => {
            positive("radius", *radius)?;
            Boundary {
                loops: vec![circle_loop(*center, *radius)?],
                meta: Metadata {
                    label: "circle".into(),
                    ..Default::default()
                },
            }
        }
        GeometrySpec::Polygon { vertices } => {
            check_simple_polygon(vertices)?;
            let v = ccw(vertices.clone());
            Boundary {
                loops: vec![polygon_loop(&v)?],
                meta: Metadata {
                    label: "polygon".into(),
                    ..Default::default()
                },
            }
        }
        GeometrySpec::TwoSquares { side, gap } => {
            positive("side", *side)?;
            positive("gap", *gap)?;
            let s = *side;
            let g = *gap;
            let first = [[0.0, 0.0], [s, 0.0], [s, s], [0.0, s]];
            let x0 = s + g;
            let second = [[x0, -0.5 * s], [x0 + s, -0.5 * s], [x0 + s, 0.5 * s], [x0, 0.5 * s]];
            Boundary {
                loops: vec![polygon_loop(&first)?, polygon_loop(&second)?],
                meta: Metadata {
                    label: "two_squares".into(),
                    facing: Some(FacingSegments {
                        a1: s,
                        a2: x0,
                        lo: 0.0,
                        hi: 0.5 * s,
                    }),
                    parallel_gap: Some(g),
                    radii: None,
                },
            }
        }
        GeometrySpec::TwoDiscs { radius, gap } => {
            positive("radius", *radius)?;
            positive("gap", *gap)?;
            let c = radius + 0.5 * gap;
            Boundary {
                loops: vec![circle_loop([-c, 0.0], *radius)?, circle_loop([c, 0.0], *radius)?],
                meta: Metadata {
                    label: "two_discs".into(),
                    ..Default::default()
                },
            }
        }
        GeometrySpec::EllipticCavity {
            semi_x,
            semi_y,
            aperture_deg,
            thickness,
        } => {
            positive("semi_x", *semi_x)?;
            positive("semi_y", *semi_y)?;
            positive("thickness", *thickness)?;
            if !(*aperture_deg > 0.0 && *aperture_deg < 90.0) {
                return invalid("aperture_deg must lie in (0, 90)");
            }
            let ap = aperture_deg.to_radians();
            let pi = std::f64::consts::PI;
            let semi = [*semi_x, *semi_y];
            let c = [0.0, 0.0];
            let e = |th: f64| [semi_x * th.cos(), semi_y * th.sin()];
            // Left mirror: arc traversed upward from angle pi + ap to pi - ap.
            let (lb, lt) = (e(pi + ap), e(pi - ap));
            let left = Loop::from_arcs(vec![
                Arc::new(ArcShape::Ellipse {
                    center: c,
                    semi,
                    theta0: pi + ap,
                    theta1: pi - ap,
                })?,
                Arc::line(lt, [lt[0] - thickness, lt[1]])?,
                Arc::line([lt[0] - thickness, lt[1]], [lb[0] - thickness, lb[1]])?,
                Arc::line([lb[0] - thickness, lb[1]], lb)?,
            ])?;
            // Right mirror: arc traversed downward from angle ap to -ap.
            let (rt, rb) = (e(ap), e(-ap));
            let right = Loop::from_arcs(vec![
                Arc::new(ArcShape::Ellipse {
                    center: c,
                    semi,
                    theta0: ap,
                    theta1: -ap,
                })?,
                Arc::line(rb, [rb[0] + thickness, rb[1]])?,
                Arc::line([rb[0] + thickness, rb[1]], [rt[0] + thickness, rt[1]])?,
                Arc::line([rt[0] + thickness, rt[1]], rt)?,
            ])?;
            Boundary {
                loops: vec![left, right],
                meta: Metadata {
                    label: "elliptic_cavity".into(),
                    ..Default::default()
                },
            }
        }
        GeometrySpec::UCavity {
            width,
            wall_height,
            peak_height,
            margin,
            depth,
        } => {
            for (n, v) in [
                ("width", width),
                ("wall_height", wall_height),
                ("margin", margin),
                ("depth", depth),
            ] {
                positive(n, *v)?;
            }
            if *peak_height <= 0.0 {
                return invalid("peak_height must be positive so the floor blocks the strip between the walls");
            }
            let (a, h, m, d, p) = (*width, *wall_height, *margin, *depth, *peak_height);
            let v = vec![
                [-m, -d],
                [a + m, -d],
                [a + m, h],
                [a, h],
                [a, 0.0],
                [0.5 * a, p],
                [0.0, 0.0],
                [0.0, h],
                [-m, h],
            ];
            check_simple_polygon(&v)?;
            Boundary {
                loops: vec![polygon_loop(&ccw(v))?],
                meta: Metadata {
                    label: "u_cavity".into(),
                    facing: Some(FacingSegments {
                        a1: 0.0,
                        a2: a,
                        lo: 0.0,
                        hi: h,
                    }),
                    parallel_gap: None,
                    radii: None,
                },
            }
        }
    };
    b.validate()?;
    Ok(b)
}

/// A sample point on the boundary away from corners.
#[derive(Debug, Clone, Copy)]
pub struct BoundarySample {
    pub loop_index: usize,
    pub arc_index: usize,
    pub t: f64,
    pub x: Point,
    pub n: Point,
}

impl Boundary {
    fn validate(&self) -> Result<()> {
        for (i, l) in self.loops.iter().enumerate() {
            if l.signed_area() <= 0.0 {
                return invalid(format!("loop {i} is not counterclockwise"));
            }
        }
        let polys: Vec<Vec<Point>> = self.loops.iter().map(|l| l.polyline(256)).collect();
        for i in 0..polys.len() {
            for j in i + 1..polys.len() {
                let (p, q) = (&polys[i], &polys[j]);
                for a in 0..p.len() {
                    for b in 0..q.len() {
                        if segments_cross(p[a], p[(a + 1) % p.len()], q[b], q[(b + 1) % q.len()]) {
                            return invalid(format!("loops {i} and {j} intersect"));
                        }
                    }
                }
                if point_in_polygon(p[0], q) || point_in_polygon(q[0], p) {
                    return invalid(format!("loops {i} and {j} are nested"));
                }
            }
        }
        Ok(())
    }

    pub fn label(&self) -> &str {
        &self.meta.label
    }

    pub fn total_length(&self) -> f64 {
        self.loops.iter().map(|l| l.length()).sum()
    }

    pub fn corner_count(&self) -> usize {
        self.loops.iter().map(|l| l.corner.iter().filter(|c| **c).count()).sum()
    }

    /// Excluded parameters `(loop, arc, t)`: every corner appears twice, as
    /// the end of one arc and the start of the next.
    pub fn corner_parameters(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (li, l) in self.loops.iter().enumerate() {
            let n = l.arcs.len();
            for j in 0..n {
                if l.corner[j] {
                    out.push((li, (j + n - 1) % n, 1.0));
                    out.push((li, j, 0.0));
                }
            }
        }
        out
    }

    /// Whether `p` lies in the closure-free interior of the obstacle, by ray
    /// parity against a dense polyline.
    pub fn contains(&self, p: Point) -> bool {
        self.loops.iter().any(|l| point_in_polygon(p, &l.polyline(2048)))
    }

    /// `count` points spread over the boundary proportionally to arc
    /// length, skipping parameters that coincide with corners.
    pub fn samples(&self, count: usize) -> Vec<BoundarySample> {
        let total = self.total_length();
        let mut out = Vec::with_capacity(count + 16);
        for (li, l) in self.loops.iter().enumerate() {
            let na = l.arcs.len();
            for (ai, arc) in l.arcs.iter().enumerate() {
                let m = ((count as f64) * arc.length() / total).ceil().max(2.0) as usize;
                let start_corner = l.corner[ai];
                let end_corner = l.corner[(ai + 1) % na];
                for i in 0..=m {
                    if (i == 0 && start_corner) || (i == m && end_corner) {
                        continue;
                    }
                    if i == m && !end_corner {
                        // shared with the next arc's start
                        continue;
                    }
                    let t = i as f64 / m as f64;
                    out.push(BoundarySample {
                        loop_index: li,
                        arc_index: ai,
                        t,
                        x: arc.point(t),
                        n: arc.normal(t),
                    });
                }
            }
        }
        out
    }
}

pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// `R_Gamma = max |x|` over the boundary.
pub fn r_gamma(b: &Boundary) -> f64 {
    let mut best: f64 = 0.0;
    for l in &b.loops {
        for arc in &l.arcs {
            let m = 400;
            let mut bi: usize = 0;
            let mut bv = -1.0;
            for i in 0..=m {
                let v = norm(arc.point(i as f64 / m as f64));
                if v > bv {
                    bv = v;
                    bi = i;
                }
            }
            best = best.max(bv);
            if !arc.is_flat() {
                let lo = (bi.saturating_sub(1)) as f64 / m as f64;
                let hi = ((bi + 1).min(m)) as f64 / m as f64;
                let f = |t: f64| -norm(arc.point(t));
                let t = golden_min(&f, lo, hi, 1e-14);
                best = best.max(norm(arc.point(t)));
            }
        }
    }
    best
}

/// Golden-section minimisation on `[lo, hi]`.
pub fn golden_min<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let m = 0.5 * (a + b);
    let candidates = [(lo, f(lo)), (hi, f(hi)), (m, f(m))];
    candidates.iter().min_by(|x, y| x.1.partial_cmp(&y.1).unwrap()).unwrap().0
}

/// Feasible radii window for the strongly (R0, R1) sign conditions:
/// `x.n >= 0` for `|x| >= r0_min` and `x2 n2 >= 0` for `|x| <= r1_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiiWindow {
    /// Smallest admissible `R0`; zero when `x.n >= 0` everywhere.
    pub r0_min: f64,
    /// Largest admissible `R1`; infinite when `x2 n2 >= 0` everywhere.
    pub r1_max: f64,
}

impl RadiiWindow {
    /// A concrete admissible pair `(R0, R1)` with `R1 > e^{1/4} R0`.
    pub fn representative(&self, r_gamma: f64) -> (f64, f64) {
        let e = ratio_threshold();
        let mut r0 = if self.r0_min > 0.0 { self.r0_min } else { 0.5 * r_gamma };
        let r1 = if self.r1_max.is_finite() {
            self.r1_max
        } else {
            r_gamma.max(1.5 * e * r0)
        };
        if r1 <= e * r0 {
            r0 = r1 / (1.5 * e);
        }
        (r0, r1)
    }
}

/// Radial scan of the strongly (R0, R1) sign conditions over `samples`
/// boundary points. Violations are bracketed by their neighbouring samples
/// so the result survives re-sampling at higher density.
pub fn classify_strongly_r0r1(b: &Boundary, samples: usize) -> Option<RadiiWindow> {
    let rg = r_gamma(b);
    let tol = 1e-10 * (1.0 + rg);
    let pts = b.samples(samples.max(1000));
    let mut r0_min: f64 = 0.0;
    let mut r1_max = f64::INFINITY;
    for (li, l) in b.loops.iter().enumerate() {
        for (ai, arc) in l.arcs.iter().enumerate() {
            let on_arc: Vec<&BoundarySample> = pts.iter().filter(|s| s.loop_index == li && s.arc_index == ai).collect();
            let m = on_arc.len();
            for (i, s) in on_arc.iter().enumerate() {
                let r = norm(s.x);
                // radii of the neighbours, or the arc ends when at the boundary of the arc
                let r_prev = if i == 0 { norm(arc.point(0.0)) } else { norm(on_arc[i - 1].x) };
                let r_next = if i + 1 == m { norm(arc.point(1.0)) } else { norm(on_arc[i + 1].x) };
                let xn = s.x[0] * s.n[0] + s.x[1] * s.n[1];
                let xdn = s.x[1] * s.n[1];
                if xn < -tol {
                    r0_min = r0_min.max(r.max(r_prev).max(r_next));
                }
                if xdn < -tol {
                    r1_max = r1_max.min(r.min(r_prev).min(r_next));
                }
            }
        }
    }
    if r1_max > ratio_threshold() * r0_min {
        Some(RadiiWindow { r0_min, r1_max })
    } else {
        None
    }
}

/// Gap `a` of a parallel-trapping configuration recorded by the constructor.
pub fn detect_parallel_trapping(b: &Boundary) -> Option<f64> {
    b.meta.parallel_gap
}

/// Trapping class label with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "label", rename_all = "snake_case")]
pub enum TrappingClass {
    StarShapedBall { radius: f64 },
    StronglyR0R1 { r0: f64, r1: f64 },
    R0R1 { r0: f64, r1: f64 },
    ParallelTrapping { r0: f64, r1: f64, a: f64 },
    Unclassified,
}

/// Classification used by the reporting layer.
pub fn classify(b: &Boundary, samples: usize) -> TrappingClass {
    if b.loops.len() == 1 && b.loops[0].arcs.len() == 1 {
        if let ArcShape::Ellipse { semi, theta0, theta1, .. } = &b.loops[0].arcs[0].shape {
            if semi[0] == semi[1] && ((theta1 - theta0).abs() - 2.0 * std::f64::consts::PI).abs() < 1e-14 {
                return TrappingClass::StarShapedBall { radius: semi[0] };
            }
        }
    }
    let rg = r_gamma(b);
    match classify_strongly_r0r1(b, samples) {
        Some(w) => {
            let (r0, r1) = w.representative(rg);
            if let Some(a) = detect_parallel_trapping(b) {
                TrappingClass::ParallelTrapping { r0, r1, a }
            } else {
                TrappingClass::StronglyR0R1 { r0, r1 }
            }
        }
        None => TrappingClass::Unclassified,
    }
}
