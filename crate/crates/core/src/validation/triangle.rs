//! Point-to-triangle distance with closest-feature classification, and the
//! per-query check of how far the nearest-vertex distance can overestimate it.

use crate::error::{Error, Result};
use crate::geometry::Point3;

const MIN_AREA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    a: Point3,
    b: Point3,
    c: Point3,
}

impl Triangle {
    pub fn new(a: Point3, b: Point3, c: Point3) -> Result<Self> {
        let area = 0.5 * (b - a).cross(&(c - a)).norm();
        if !(area > MIN_AREA) {
            return Err(Error::DegenerateTriangle(area));
        }
        Ok(Self { a, b, c })
    }

    pub fn vertices(&self) -> [Point3; 3] {
        [self.a, self.b, self.c]
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.b - self.a).cross(&(self.c - self.a)).norm()
    }

    pub fn unit_normal(&self) -> Point3 {
        (self.b - self.a).cross(&(self.c - self.a)).normalize()
    }

    /// Edge lengths `|ab|, |bc|, |ca|`.
    pub fn edge_lengths(&self) -> [f64; 3] {
        [(self.b - self.a).norm(), (self.c - self.b).norm(), (self.a - self.c).norm()]
    }
}

/// Which feature of the triangle holds the closest point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosestFeature {
    /// Case (a): a vertex, by index 0..3.
    Vertex(usize),
    /// Case (b): the open edge between two vertex indices.
    Edge(usize, usize),
    /// Case (c): the interior of the face.
    Interior,
}

impl ClosestFeature {
    pub fn label(&self) -> char {
        match self {
            ClosestFeature::Vertex(_) => 'a',
            ClosestFeature::Edge(..) => 'b',
            ClosestFeature::Interior => 'c',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleDistance {
    pub distance: f64,
    pub feature: ClosestFeature,
    pub closest: Point3,
}

/// Exact Euclidean distance via Voronoi-region tests on the triangle's features.
pub fn point_triangle_distance(q: &Point3, tri: &Triangle) -> TriangleDistance {
    let (a, b, c) = (tri.a, tri.b, tri.c);
    let ab = b - a;
    let ac = c - a;
    let finish = |closest: Point3, feature| TriangleDistance { distance: (q - closest).norm(), feature, closest };

    let ap = q - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return finish(a, ClosestFeature::Vertex(0));
    }
    let bp = q - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return finish(b, ClosestFeature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let t = d1 / (d1 - d3);
        return finish(a + ab * t, ClosestFeature::Edge(0, 1));
    }
    let cp = q - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return finish(c, ClosestFeature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let t = d2 / (d2 - d6);
        return finish(a + ac * t, ClosestFeature::Edge(0, 2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return finish(b + (c - b) * t, ClosestFeature::Edge(1, 2));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    finish(a + ab * v + ac * w, ClosestFeature::Interior)
}

/// One query's error analysis against a single triangle.
///
/// `error` is the nearest-vertex distance minus the exact distance. The
/// per-feature bound on `error^2` is 0 for a vertex, `edge^2 / 4` for an edge
/// and `min_edge^2 / 3` for the interior; the combined bound is `max_edge^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundEntry {
    pub exact: f64,
    pub vertex_distance: f64,
    pub feature: ClosestFeature,
    pub error: f64,
    pub case_bound: f64,
    pub case_holds: bool,
    pub final_bound: f64,
    pub final_holds: bool,
}

pub fn bound_check(q: &Point3, tri: &Triangle) -> BoundEntry {
    let td = point_triangle_distance(q, tri);
    let verts = tri.vertices();
    let vertex_distance = verts.iter().map(|v| (q - v).norm()).fold(f64::INFINITY, f64::min);
    // vertices lie on the triangle, so any negative value is rounding
    let error = (vertex_distance - td.distance).max(0.0);
    let e2 = error * error;
    let edges = tri.edge_lengths();
    let max_edge = edges.iter().cloned().fold(0.0, f64::max);
    let min_edge = edges.iter().cloned().fold(f64::INFINITY, f64::min);
    let case_bound = match td.feature {
        ClosestFeature::Vertex(_) => 0.0,
        ClosestFeature::Edge(i, j) => (verts[i] - verts[j]).norm_squared() / 4.0,
        ClosestFeature::Interior => min_edge * min_edge / 3.0,
    };
    let final_bound = max_edge * max_edge;
    let slack = 1e-12 * final_bound.max(1e-300);
    BoundEntry {
        exact: td.distance,
        vertex_distance,
        feature: td.feature,
        error,
        case_bound,
        case_holds: e2 <= case_bound + slack,
        final_bound,
        final_holds: e2 <= final_bound + slack,
    }
}

/// Aggregated bound-check outcome over many queries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundReport {
    pub entries: Vec<BoundEntry>,
}

impl BoundReport {
    pub fn case_violations(&self) -> usize {
        self.entries.iter().filter(|e| !e.case_holds).count()
    }

    pub fn final_violations(&self) -> usize {
        self.entries.iter().filter(|e| !e.final_holds).count()
    }

    /// Query counts per case label a, b, c.
    pub fn case_counts(&self) -> [usize; 3] {
        let mut n = [0; 3];
        for e in &self.entries {
            n[(e.feature.label() as u8 - b'a') as usize] += 1;
        }
        n
    }

    pub fn max_error(&self) -> f64 {
        self.entries.iter().map(|e| e.error).fold(0.0, f64::max)
    }
}
