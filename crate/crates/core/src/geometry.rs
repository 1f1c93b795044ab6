//! Oriented 3D box math: corners, point containment, BEV polygon clipping,
//! and IoU in bird's-eye view and 3D.
//!
//! Boxes are upright (rotation about +z only), which is what KITTI-style
//! labels provide. BEV intersection uses Sutherland-Hodgman clipping of the
//! convex footprints; 3D IoU combines the footprint intersection area with
//! the vertical overlap. The two IoU functions canonicalize argument order
//! before computing, so `iou(a, b) == iou(b, a)` holds bit-exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// On-edge tolerance for polygon clipping and vertex dedup, in meters.
const CLIP_EPS: f64 = 1e-9;
/// Intersection areas below this are treated as empty.
const DEGENERATE_AREA: f64 = 1e-12;

/// Wrap an angle into (-pi, pi].
pub fn normalize_angle(angle: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = (angle + std::f64::consts::PI).rem_euclid(two_pi);
    if r == 0.0 {
        std::f64::consts::PI
    } else {
        r - std::f64::consts::PI
    }
}

/// An upright oriented 3D bounding box.
///
/// `center` is the 3D centroid. `size` is (length, width, height) along the
/// box-local x, y, z axes. `yaw` rotates local x away from world +x,
/// counterclockwise about +z, and is kept normalized to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox3D {
    pub center: [f64; 3],
    pub size: [f64; 3],
    pub yaw: f64,
}

impl OrientedBox3D {
    pub fn new(center: [f64; 3], size: [f64; 3], yaw: f64) -> Result<Self> {
        if center.iter().any(|c| !c.is_finite()) || !yaw.is_finite() {
            return Err(Error::Validation(format!(
                "box has non-finite parameters: center {center:?}, yaw {yaw}"
            )));
        }
        if size.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::Validation(format!(
                "box sizes must be strictly positive, got {size:?}"
            )));
        }
        Ok(Self {
            center,
            size,
            yaw: normalize_angle(yaw),
        })
    }

    pub fn volume(&self) -> f64 {
        self.size[0] * self.size[1] * self.size[2]
    }

    /// Footprint corners in the ground plane, counterclockwise.
    pub fn bev_corners(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.yaw.sin_cos();
        let hl = self.size[0] / 2.0;
        let hw = self.size[1] / 2.0;
        let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
        local.map(|[x, y]| {
            [
                self.center[0] + c * x - s * y,
                self.center[1] + s * x + c * y,
            ]
        })
    }

    /// The 8 corners: bottom face counterclockwise, then top face in the
    /// same footprint order. The corner centroid equals `center`.
    pub fn corners(&self) -> [[f64; 3]; 8] {
        let bev = self.bev_corners();
        let hh = self.size[2] / 2.0;
        let mut out = [[0.0; 3]; 8];
        for (i, [x, y]) in bev.iter().enumerate() {
            out[i] = [*x, *y, self.center[2] - hh];
            out[i + 4] = [*x, *y, self.center[2] + hh];
        }
        out
    }

    /// Rotate the box about the world z axis through the origin.
    pub fn rotated_z(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let [x, y, z] = self.center;
        Self {
            center: [c * x - s * y, s * x + c * y, z],
            size: self.size,
            yaw: normalize_angle(self.yaw + angle),
        }
    }

    pub fn translated(&self, delta: [f64; 3]) -> Self {
        Self {
            center: [
                self.center[0] + delta[0],
                self.center[1] + delta[1],
                self.center[2] + delta[2],
            ],
            ..*self
        }
    }

    /// Similarity transform: scales both the center and the extents.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            center: self.center.map(|c| c * factor),
            size: self.size.map(|s| s * factor),
            yaw: self.yaw,
        }
    }

    /// Mirror across the x-z plane (y negation).
    pub fn flipped_y(&self) -> Self {
        Self {
            center: [self.center[0], -self.center[1], self.center[2]],
            size: self.size,
            yaw: normalize_angle(-self.yaw),
        }
    }

    /// Point membership test with an inflation margin on every axis.
    pub fn contains(&self, point: [f64; 3], margin: f64) -> bool {
        let (s, c) = self.yaw.sin_cos();
        let dx = point[0] - self.center[0];
        let dy = point[1] - self.center[1];
        let dz = point[2] - self.center[2];
        let lx = dx * c + dy * s;
        let ly = -dx * s + dy * c;
        lx.abs() <= self.size[0] / 2.0 + margin
            && ly.abs() <= self.size[1] / 2.0 + margin
            && dz.abs() <= self.size[2] / 2.0 + margin
    }
}

/// Indices of points inside the box, inflated by `margin` on every axis.
pub fn points_in_box<I>(points: I, bbox: &OrientedBox3D, margin: f64) -> Vec<usize>
where
    I: IntoIterator<Item = [f64; 3]>,
{
    points
        .into_iter()
        .enumerate()
        .filter(|(_, p)| bbox.contains(*p, margin))
        .map(|(i, _)| i)
        .collect()
}

/// A convex counterclockwise polygon in the ground plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2D {
    vertices: Vec<[f64; 2]>,
}

impl Polygon2D {
    /// Validates convexity, counterclockwise winding, and absence of
    /// duplicate consecutive vertices (within 1e-9).
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::Validation(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            if (a[0] - b[0]).abs() <= CLIP_EPS && (a[1] - b[1]).abs() <= CLIP_EPS {
                return Err(Error::Validation(format!(
                    "duplicate consecutive vertices at index {i}"
                )));
            }
        }
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            if cross < -CLIP_EPS {
                return Err(Error::Validation(format!(
                    "polygon is not convex counterclockwise at index {i}"
                )));
            }
        }
        if polygon_area(&vertices) <= 0.0 {
            return Err(Error::Validation(
                "polygon winding is not counterclockwise".into(),
            ));
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }
}

/// Signed shoelace area; positive for counterclockwise winding.
pub fn polygon_area(vertices: &[[f64; 2]]) -> f64 {
    if vertices.len() < 3 {
        return 0.0;
    }
    let n = vertices.len();
    let mut acc = 0.0;
    for i in 0..n {
        let [x0, y0] = vertices[i];
        let [x1, y1] = vertices[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    acc / 2.0
}

/// Clip `subject` against one half-plane (left of the directed edge a -> b).
fn clip_halfplane(subject: &[[f64; 2]], a: [f64; 2], b: [f64; 2]) -> Vec<[f64; 2]> {
    let side = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    let mut out = Vec::with_capacity(subject.len() + 1);
    let n = subject.len();
    for i in 0..n {
        let s = subject[i];
        let e = subject[(i + 1) % n];
        let sd = side(s);
        let ed = side(e);
        // Points within CLIP_EPS of the edge count as inside.
        let s_in = sd >= -CLIP_EPS;
        let e_in = ed >= -CLIP_EPS;
        if s_in != e_in {
            let denom = sd - ed;
            if denom.abs() > DEGENERATE_AREA {
                let t = sd / denom;
                out.push([s[0] + (e[0] - s[0]) * t, s[1] + (e[1] - s[1]) * t]);
            }
        }
        if e_in {
            out.push(e);
        }
    }
    out
}

/// Sutherland-Hodgman intersection of two convex counterclockwise polygons.
/// Collinear or degenerate results collapse to an empty polygon rather than
/// erroring, so streaming callers (NMS) never abort.
pub fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    if subject.len() < 3 || clip.len() < 3 {
        return Vec::new();
    }
    let mut result = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if result.len() < 3 {
            return Vec::new();
        }
        result = clip_halfplane(&result, clip[i], clip[(i + 1) % n]);
    }
    dedup_ring(result)
}

/// Remove consecutive duplicates (within CLIP_EPS), treating the vertex list
/// as a ring. Keeps the intersection of two rectangles at <= 8 vertices.
fn dedup_ring(mut vertices: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    vertices.dedup_by(|a, b| (a[0] - b[0]).abs() <= CLIP_EPS && (a[1] - b[1]).abs() <= CLIP_EPS);
    while vertices.len() > 1 {
        let first = vertices[0];
        let last = *vertices.last().unwrap();
        if (first[0] - last[0]).abs() <= CLIP_EPS && (first[1] - last[1]).abs() <= CLIP_EPS {
            vertices.pop();
        } else {
            break;
        }
    }
    vertices
}

/// Total order over box parameters; used to canonicalize argument order so
/// the IoU functions are exactly symmetric.
fn box_before(a: &OrientedBox3D, b: &OrientedBox3D) -> bool {
    let ka = [
        a.center[0], a.center[1], a.center[2], a.size[0], a.size[1], a.size[2], a.yaw,
    ];
    let kb = [
        b.center[0], b.center[1], b.center[2], b.size[0], b.size[1], b.size[2], b.yaw,
    ];
    for (x, y) in ka.iter().zip(kb.iter()) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    true
}

fn ordered<'a>(
    a: &'a OrientedBox3D,
    b: &'a OrientedBox3D,
) -> (&'a OrientedBox3D, &'a OrientedBox3D) {
    if box_before(a, b) {
        (a, b)
    } else {
        (b, a)
    }
}

fn bev_intersection_area(a: &OrientedBox3D, b: &OrientedBox3D) -> f64 {
    let pa = a.bev_corners();
    let pb = b.bev_corners();
    let inter = clip_convex(&pa, &pb);
    polygon_area(&inter).max(0.0)
}

/// Bird's-eye-view IoU of the two footprints, in [0, 1].
pub fn bev_iou(a: &OrientedBox3D, b: &OrientedBox3D) -> f64 {
    let (a, b) = ordered(a, b);
    let inter = bev_intersection_area(a, b);
    if inter < DEGENERATE_AREA {
        return 0.0;
    }
    // Footprint areas via the same shoelace route as the intersection, so
    // identical boxes yield exactly 1.0.
    let area_a = polygon_area(&a.bev_corners());
    let area_b = polygon_area(&b.bev_corners());
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Volumetric IoU: BEV intersection area times vertical overlap, over the
/// volume union.
pub fn iou_3d(a: &OrientedBox3D, b: &OrientedBox3D) -> f64 {
    let (a, b) = ordered(a, b);
    let inter_area = bev_intersection_area(a, b);
    if inter_area < DEGENERATE_AREA {
        return 0.0;
    }
    let lo = (a.center[2] - a.size[2] / 2.0).max(b.center[2] - b.size[2] / 2.0);
    let hi = (a.center[2] + a.size[2] / 2.0).min(b.center[2] + b.size[2] / 2.0);
    let dz = hi - lo;
    if dz <= 0.0 {
        return 0.0;
    }
    let inter_vol = inter_area * dz;
    let vol_a = polygon_area(&a.bev_corners()) * a.size[2];
    let vol_b = polygon_area(&b.bev_corners()) * b.size[2];
    let union = vol_a + vol_b - inter_vol;
    if union <= 0.0 {
        return 0.0;
    }
    (inter_vol / union).clamp(0.0, 1.0)
}
