//! Iso-surface extraction with a case table derived from the cube's face
//! topology instead of a hand-written lookup table.
//!
//! On every face, each maximal run of outside corners is cut off by one
//! segment; this also settles ambiguous faces consistently between
//! neighboring cells. The segments chain into closed loops per cell, which
//! are fanned into triangles.

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::geometry::Point3;

use super::VoxelSDF;

const CORNERS: [[usize; 3]; 8] =
    [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]];

const EDGES: [[usize; 2]; 12] =
    [[0, 1], [1, 2], [2, 3], [3, 0], [4, 5], [5, 6], [6, 7], [7, 4], [0, 4], [1, 5], [2, 6], [3, 7]];

/// Face corner cycles with their outward normals.
const FACES: [([usize; 4], [i32; 3]); 6] = [
    ([0, 1, 2, 3], [0, 0, -1]),
    ([4, 5, 6, 7], [0, 0, 1]),
    ([0, 1, 5, 4], [0, -1, 0]),
    ([3, 2, 6, 7], [0, 1, 0]),
    ([0, 3, 7, 4], [-1, 0, 0]),
    ([1, 2, 6, 5], [1, 0, 0]),
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
    pub normals: Option<Vec<Vector3<f64>>>,
}

impl TriangleMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }
}

fn corner_pos(c: usize) -> Vector3<f64> {
    let [x, y, z] = CORNERS[c];
    Vector3::new(x as f64, y as f64, z as f64)
}

fn edge_of(a: usize, b: usize) -> usize {
    EDGES
        .iter()
        .position(|e| (e[0] == a && e[1] == b) || (e[0] == b && e[1] == a))
        .expect("adjacent corners share an edge")
}

/// Corner cycles re-ordered counter-clockwise about the outward normal.
fn oriented_faces() -> [[usize; 4]; 6] {
    FACES.map(|(mut cyc, n)| {
        let p: Vec<_> = cyc.iter().map(|&c| corner_pos(c)).collect();
        let normal = (p[1] - p[0]).cross(&(p[2] - p[1]));
        let outward = Vector3::new(n[0] as f64, n[1] as f64, n[2] as f64);
        if normal.dot(&outward) < 0.0 {
            cyc.reverse();
        }
        cyc
    })
}

/// Triangles (as cube-edge triples) for a case; bit `i` set = corner `i` outside.
fn triangulate_case(case: u8, faces: &[[usize; 4]; 6]) -> Vec<[usize; 3]> {
    let outside = |c: usize| case & (1 << c) != 0;
    let mut next: HashMap<usize, usize> = HashMap::new();
    for cyc in faces {
        for i in 0..4 {
            let prev = cyc[(i + 3) % 4];
            if !outside(cyc[i]) || outside(prev) {
                continue;
            }
            // run of outside corners starts at i
            let mut j = i;
            while outside(cyc[(j + 1) % 4]) {
                j = (j + 1) % 4;
            }
            let entry = edge_of(prev, cyc[i]);
            let exit = edge_of(cyc[j], cyc[(j + 1) % 4]);
            next.insert(exit, entry);
        }
    }
    let mut tris = Vec::new();
    let mut starts: Vec<usize> = next.keys().copied().collect();
    starts.sort_unstable();
    let mut seen = [false; 12];
    for s in starts {
        if seen[s] {
            continue;
        }
        let mut lp = vec![s];
        seen[s] = true;
        let mut e = next[&s];
        while e != s {
            seen[e] = true;
            lp.push(e);
            e = next[&e];
        }
        tris.extend(triangulate_loop(&lp, faces));
    }
    tris
}

/// All triangulations of a polygon, preserving its orientation.
fn triangulations(lp: &[usize]) -> Vec<Vec<[usize; 3]>> {
    let n = lp.len();
    if n < 3 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    // the closing edge lp[0]-lp[n-1] lies in exactly one triangle
    for k in 1..n - 1 {
        for left in triangulations(&lp[..=k]) {
            for right in triangulations(&lp[k..]) {
                let mut t = left.clone();
                t.extend(right);
                t.push([lp[0], lp[k], lp[n - 1]]);
                out.push(t);
            }
        }
    }
    out
}

/// Triangulates a loop without diagonals between two vertices on one cube
/// face: such a diagonal lies in the face and may be produced again by the
/// neighboring cell, making the edge non-manifold.
fn triangulate_loop(lp: &[usize], faces: &[[usize; 4]; 6]) -> Vec<[usize; 3]> {
    let face_edges: Vec<[usize; 4]> =
        faces.iter().map(|c| [0, 1, 2, 3].map(|i| edge_of(c[i], c[(i + 1) % 4]))).collect();
    let coface = |a: usize, b: usize| face_edges.iter().any(|f| f.contains(&a) && f.contains(&b));
    let n = lp.len();
    let on_loop = |a: usize, b: usize| {
        let (i, j) = (lp.iter().position(|&x| x == a).unwrap(), lp.iter().position(|&x| x == b).unwrap());
        (i + 1) % n == j || (j + 1) % n == i
    };
    triangulations(lp)
        .into_iter()
        .find(|tris| {
            tris.iter().all(|t| {
                (0..3).all(|r| {
                    let (a, b) = (t[r], t[(r + 1) % 3]);
                    on_loop(a, b) || !coface(a, b)
                })
            })
        })
        .expect("every cube loop admits a triangulation with interior diagonals")
}

fn case_table() -> &'static [Vec<[usize; 3]>] {
    static TABLE: OnceLock<Vec<Vec<[usize; 3]>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let faces = oriented_faces();
        let mut table: Vec<_> = (0..=255u8).map(|c| triangulate_case(c, &faces)).collect();
        // orient so normals point from inside to outside: probe the case
        // with only corner 0 inside
        let mid = |e: usize| 0.5 * (corner_pos(EDGES[e][0]) + corner_pos(EDGES[e][1]));
        let t = table[0xfe][0];
        let n = (mid(t[1]) - mid(t[0])).cross(&(mid(t[2]) - mid(t[0])));
        if n.dot(&Vector3::new(1.0, 1.0, 1.0)) < 0.0 {
            for tris in &mut table {
                for t in tris.iter_mut() {
                    t.swap(1, 2);
                }
            }
        }
        table
    })
}

type EdgeKey = (usize, usize, usize, u8);

/// Global key of a cube edge: its lower grid corner and axis.
fn edge_key(i: usize, j: usize, k: usize, e: usize) -> EdgeKey {
    let [a, b] = EDGES[e];
    let (pa, pb) = (CORNERS[a], CORNERS[b]);
    let lo = [pa[0].min(pb[0]), pa[1].min(pb[1]), pa[2].min(pb[2])];
    let axis = (0..3).find(|&d| pa[d] != pb[d]).expect("edge spans one axis") as u8;
    (i + lo[0], j + lo[1], k + lo[2], axis)
}

/// Extracts the `iso` level set. Cells with any invalid corner are skipped;
/// normals point towards values above `iso`.
pub fn marching_cubes(grid: &VoxelSDF, iso: f64) -> TriangleMesh {
    let [nx, ny, nz] = grid.dims;
    if nx < 2 || ny < 2 || nz < 2 {
        return TriangleMesh::default();
    }
    let table = case_table();
    let slabs: Vec<Vec<[EdgeKey; 3]>> = (0..nz - 1)
        .into_par_iter()
        .map(|k| {
            let mut out = Vec::new();
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let mut case = 0u8;
                    let mut complete = true;
                    for (c, off) in CORNERS.iter().enumerate() {
                        match grid.value(i + off[0], j + off[1], k + off[2]) {
                            Some(x) if x >= iso => case |= 1 << c,
                            Some(_) => {}
                            None => complete = false,
                        }
                    }
                    if !complete || case == 0 || case == 255 {
                        continue;
                    }
                    for t in &table[case as usize] {
                        out.push(t.map(|e| edge_key(i, j, k, e)));
                    }
                }
            }
            out
        })
        .collect();

    let mut index: HashMap<EdgeKey, usize> = HashMap::new();
    let mut mesh = TriangleMesh::default();
    let mut vertex = |key: EdgeKey, verts: &mut Vec<Point3>| -> usize {
        *index.entry(key).or_insert_with(|| {
            let (i, j, k, axis) = key;
            let mut end = [i, j, k];
            end[axis as usize] += 1;
            let va = grid.value(i, j, k).expect("cell corners are valid");
            let vb = grid.value(end[0], end[1], end[2]).expect("cell corners are valid");
            let t = (iso - va) / (vb - va);
            let pa = grid.center(i, j, k);
            let pb = grid.center(end[0], end[1], end[2]);
            verts.push(pa + (pb - pa) * t);
            verts.len() - 1
        })
    };
    for tri in slabs.into_iter().flatten() {
        let ids = tri.map(|key| vertex(key, &mut mesh.vertices));
        let [a, b, c] = ids.map(|i| mesh.vertices[i]);
        if 0.5 * (b - a).cross(&(c - a)).norm() > 1e-12 {
            mesh.triangles.push(ids);
        }
    }

    let mut normals = vec![Vector3::zeros(); mesh.vertices.len()];
    for t in &mesh.triangles {
        let [a, b, c] = t.map(|i| mesh.vertices[i]);
        let n = (b - a).cross(&(c - a));
        for &i in t {
            normals[i] += n;
        }
    }
    for n in &mut normals {
        let len = n.norm();
        if len > 0.0 {
            *n /= len;
        }
    }
    mesh.normals = Some(normals);
    mesh
}
