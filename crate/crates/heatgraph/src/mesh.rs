//! Planar triangle meshes and their cotangent Laplacians.
//!
//! A [`TriangleMesh`] stores 2D vertex coordinates and triangles as vertex
//! index triples (0-based in the API, 1-based in files). Validation at
//! construction rejects out-of-range indices, degenerate triangles, and
//! meshes whose edge graph is disconnected.
//!
//! [`cotan_laplacian`] assembles the standard finite-element weights: the
//! weight of edge (i, j) is half the sum of the cotangents of the angles
//! opposite that edge in the triangles containing it. Obtuse triangles
//! yield negative edge weights; they are kept as computed, and the result
//! is still positive semidefinite.
//!
//! [`generate_plate_with_cavity`] triangulates a rectangular plate on a
//! structured grid, optionally carving out an axis-aligned rectangular
//! hole. The construction is fully deterministic: grid points are split
//! into two triangles per cell along the lower-left to upper-right
//! diagonal, cavity-interior vertices are dropped, and survivors are
//! renumbered row-major. Runs with equal parameters produce identical
//! meshes, so vertex indices are stable enough to reference in scenario
//! files.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{reachable_from, Laplacian};

/// A validated planar triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Validates vertex references, non-degeneracy, and connectivity.
    ///
    /// A triangle is degenerate when its absolute area is at most
    /// `1e-12` times the area of the mesh bounding box.
    pub fn new(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidMesh(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(Error::InvalidMesh(format!(
                    "vertex {i} has non-finite coordinates"
                )));
            }
        }
        let n = vertices.len();
        let area_floor = 1e-12 * bounding_box_area(&vertices);
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    return Err(Error::InvalidMesh(format!(
                        "triangle {t} references vertex {v}, but only {n} exist"
                    )));
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} repeats a vertex"
                )));
            }
            let area = signed_area(&vertices, tri);
            if area.abs() <= area_floor {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} is degenerate (area {area:.3e})"
                )));
            }
        }

        let mesh = TriangleMesh {
            vertices,
            triangles,
        };
        let adj = mesh.adjacency();
        if reachable_from(0, n, &adj) != n {
            return Err(Error::Disconnected(
                "mesh edge graph does not connect all vertices".into(),
            ));
        }
        Ok(mesh)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Undirected mesh edges as `(low, high)` pairs, sorted and unique.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[0], t[2])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (a, b) in self.edges() {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }
}

fn bounding_box_area(vertices: &[[f64; 2]]) -> f64 {
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vertices {
        min_x = min_x.min(v[0]);
        max_x = max_x.max(v[0]);
        min_y = min_y.min(v[1]);
        max_y = max_y.max(v[1]);
    }
    (max_x - min_x) * (max_y - min_y)
}

fn signed_area(vertices: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

/// Cotangent-weighted Laplacian of a triangle mesh.
///
/// Edge weight: `w(i,j) = 1/2 * sum of cot(angle opposite (i,j))` over the
/// one or two triangles containing the edge. The diagonal is the negated
/// off-diagonal row sum, so rows sum to zero exactly up to rounding.
pub fn cotan_laplacian(mesh: &TriangleMesh) -> Laplacian {
    let n = mesh.vertex_count();
    let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for tri in mesh.triangles() {
        for corner in 0..3 {
            let apex = tri[corner];
            let b = tri[(corner + 1) % 3];
            let c = tri[(corner + 2) % 3];
            let pa = mesh.vertices()[apex];
            let pb = mesh.vertices()[b];
            let pc = mesh.vertices()[c];
            let u = [pb[0] - pa[0], pb[1] - pa[1]];
            let v = [pc[0] - pa[0], pc[1] - pa[1]];
            let dot = u[0] * v[0] + u[1] * v[1];
            let cross = (u[0] * v[1] - u[1] * v[0]).abs();
            // cross = 2 * |area| > 0 by mesh validation, and the angle at
            // the apex lies in (0, pi), so cot = dot / cross is finite.
            let cot = dot / cross;
            *weights.entry((b.min(c), b.max(c))).or_insert(0.0) += 0.5 * cot;
        }
    }

    let mut m = DMatrix::<f64>::zeros(n, n);
    for (&(i, j), &w) in &weights {
        m[(i, j)] = -w;
        m[(j, i)] = -w;
    }
    for i in 0..n {
        let off_sum: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
        m[(i, i)] = -off_sum;
    }
    Laplacian::new(m).expect("cotangent assembly preserves Laplacian invariants")
}

/// Axis-aligned rectangular hole, given by its lower-left and upper-right
/// corners. Vertices strictly inside the open rectangle are removed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cavity {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Cavity {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Cavity { x0, y0, x1, y1 }
    }

    fn contains_strictly(&self, x: f64, y: f64) -> bool {
        x > self.x0 && x < self.x1 && y > self.y0 && y < self.y1
    }
}

/// Triangulates a `width` x `height` plate on an `nx` x `ny` cell grid,
/// optionally removing the vertices inside an open rectangular cavity
/// (together with their incident triangles).
///
/// The cavity must lie strictly inside the plate; a cavity that touches
/// the boundary is rejected, and one that disconnects the mesh (or strands
/// a vertex without triangles) fails the connectivity check.
pub fn generate_plate_with_cavity(
    width: f64,
    height: f64,
    nx: usize,
    ny: usize,
    cavity: Option<Cavity>,
) -> Result<TriangleMesh> {
    if !(width.is_finite() && height.is_finite()) || width <= 0.0 || height <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "plate dimensions must be positive, got {width} x {height}"
        )));
    }
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid must have at least 2 cells per side, got {nx} x {ny}"
        )));
    }
    if let Some(c) = cavity {
        let finite = [c.x0, c.y0, c.x1, c.y1].iter().all(|v| v.is_finite());
        if !finite || c.x0 >= c.x1 || c.y0 >= c.y1 {
            return Err(Error::InvalidArgument(format!(
                "cavity corners must be ordered, got ({}, {}) to ({}, {})",
                c.x0, c.y0, c.x1, c.y1
            )));
        }
        if c.x0 <= 0.0 || c.y0 <= 0.0 || c.x1 >= width || c.y1 >= height {
            return Err(Error::InvalidArgument(
                "cavity must lie strictly inside the plate".into(),
            ));
        }
    }

    let dx = width / nx as f64;
    let dy = height / ny as f64;
    let grid_index = |i: usize, j: usize| j * (nx + 1) + i;

    // Row-major renumbering of the surviving grid points.
    let mut new_id = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            let (x, y) = (i as f64 * dx, j as f64 * dy);
            let removed = cavity.is_some_and(|c| c.contains_strictly(x, y));
            if !removed {
                new_id[grid_index(i, j)] = vertices.len();
                vertices.push([x, y]);
            }
        }
    }

    let mut triangles = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let corners = [
                grid_index(i, j),
                grid_index(i + 1, j),
                grid_index(i + 1, j + 1),
                grid_index(i, j + 1),
            ];
            for tri in [
                [corners[0], corners[1], corners[2]],
                [corners[0], corners[2], corners[3]],
            ] {
                let mapped = [new_id[tri[0]], new_id[tri[1]], new_id[tri[2]]];
                if mapped.iter().all(|&v| v != usize::MAX) {
                    triangles.push(mapped);
                }
            }
        }
    }

    TriangleMesh::new(vertices, triangles)
}

/// Serialized mesh: `{"vertices": [[x, y], ...], "triangles": [[i, j, k], ...]}`
/// with 1-based vertex indices.
#[derive(Serialize, Deserialize)]
struct MeshFile {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
}

/// Parses a mesh from JSON text. Triangle indices in the file are 1-based.
pub fn mesh_from_json(text: &str) -> Result<TriangleMesh> {
    let file: MeshFile = serde_json::from_str(text)?;
    let mut triangles = Vec::with_capacity(file.triangles.len());
    for tri in file.triangles {
        if tri.contains(&0) {
            return Err(Error::InvalidMesh(
                "triangle index 0 in file; indices are 1-based".into(),
            ));
        }
        triangles.push([tri[0] - 1, tri[1] - 1, tri[2] - 1]);
    }
    TriangleMesh::new(file.vertices, triangles)
}

/// Serializes a mesh to JSON text, converting indices to 1-based.
pub fn mesh_to_json(mesh: &TriangleMesh) -> String {
    let file = MeshFile {
        vertices: mesh.vertices().to_vec(),
        triangles: mesh
            .triangles()
            .iter()
            .map(|t| [t[0] + 1, t[1] + 1, t[2] + 1])
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("mesh serialization cannot fail")
}

pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    mesh_from_json(&std::fs::read_to_string(path)?)
}

pub fn save_mesh(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, mesh_to_json(mesh))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::eigendecompose;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equilateral_triangle_weights() {
        // All angles are 60 degrees, cot(60) = 1/sqrt(3), and each edge
        // belongs to one triangle, so every weight is 1/(2 sqrt(3)).
        let mesh = TriangleMesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.5, 3.0_f64.sqrt() / 2.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let lap = cotan_laplacian(&mesh);
        let w = 1.0 / (2.0 * 3.0_f64.sqrt());
        assert!((w - 0.288_675_134_594_812_9).abs() < 1e-15);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 * w } else { -w };
                assert!(
                    (lap.matrix()[(i, j)] - want).abs() < 1e-12,
                    "entry ({i}, {j})"
                );
            }
        }
    }

    #[test]
    fn right_isosceles_hypotenuse_weight_vanishes() {
        // Angles: 90 at the corner, 45 at the legs. The hypotenuse sits
        // opposite the right angle, so its weight is cot(90)/2 = 0; each
        // leg sits opposite a 45-degree angle, weight cot(45)/2 = 1/2.
        let mesh = TriangleMesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let lap = cotan_laplacian(&mesh);
        assert_eq!(lap.matrix()[(1, 2)], 0.0);
        assert_eq!(lap.matrix()[(0, 1)], -0.5);
        assert_eq!(lap.matrix()[(0, 2)], -0.5);
        assert_eq!(lap.matrix()[(0, 0)], 1.0);
        assert_eq!(lap.matrix()[(1, 1)], 0.5);
        assert_eq!(lap.matrix()[(2, 2)], 0.5);
    }

    #[test]
    fn unit_grid_reproduces_five_point_stencil() {
        // Square cells split into right isosceles triangles: every grid
        // edge collects cot(45)/2 = 1/2 from each adjacent cell, and cell
        // diagonals sit opposite two right angles, so their weight is 0.
        // For unit spacing all of this is exact in floating point.
        let (nx, ny) = (4, 4);
        let mesh = generate_plate_with_cavity(4.0, 4.0, nx, ny, None).unwrap();
        let lap = cotan_laplacian(&mesh);
        let id = |i: usize, j: usize| j * (nx + 1) + i;

        let mut expected = DMatrix::<f64>::zeros(25, 25);
        for j in 0..=ny {
            for i in 0..=nx {
                // Horizontal edge (i,j)-(i+1,j): adjacent cells are those
                // above and below the edge that exist in the grid.
                if i < nx {
                    let cells = (j > 0) as usize + (j < ny) as usize;
                    expected[(id(i, j), id(i + 1, j))] = -0.5 * cells as f64;
                    expected[(id(i + 1, j), id(i, j))] = -0.5 * cells as f64;
                }
                if j < ny {
                    let cells = (i > 0) as usize + (i < nx) as usize;
                    expected[(id(i, j), id(i, j + 1))] = -0.5 * cells as f64;
                    expected[(id(i, j + 1), id(i, j))] = -0.5 * cells as f64;
                }
            }
        }
        for d in 0..25 {
            let off: f64 = (0..25).filter(|&j| j != d).map(|j| expected[(d, j)]).sum();
            expected[(d, d)] = -off;
        }
        assert_eq!(lap.matrix(), &expected);
    }

    #[test]
    fn small_plate_without_cavity_counts() {
        let mesh = generate_plate_with_cavity(2.0, 2.0, 2, 2, None).unwrap();
        assert_eq!(mesh.vertex_count(), 9);
        assert_eq!(mesh.triangle_count(), 8);
    }

    #[test]
    fn cavity_removes_exactly_the_strict_interior_grid_points() {
        let (width, height, nx, ny) = (4.0, 4.0, 8, 8);
        let cavity = Cavity::new(1.5, 1.5, 2.5, 2.5);
        let mesh = generate_plate_with_cavity(width, height, nx, ny, Some(cavity)).unwrap();

        // Independent enumeration of the removed grid points.
        let mut removed = 0;
        for j in 0..=ny {
            for i in 0..=nx {
                let x = i as f64 * width / nx as f64;
                let y = j as f64 * height / ny as f64;
                if cavity.contains_strictly(x, y) {
                    removed += 1;
                }
            }
        }
        assert_eq!(removed, 1);
        assert_eq!(mesh.vertex_count(), 81 - removed);
        for v in mesh.vertices() {
            assert!(!cavity.contains_strictly(v[0], v[1]));
        }
    }

    #[test]
    fn vertex_numbering_is_row_major() {
        let (nx, ny) = (3, 2);
        let mesh = generate_plate_with_cavity(3.0, 2.0, nx, ny, None).unwrap();
        for j in 0..=ny {
            for i in 0..=nx {
                let v = mesh.vertices()[j * (nx + 1) + i];
                assert_eq!(v, [i as f64, j as f64]);
            }
        }
    }

    #[test]
    fn cavity_covering_the_center_of_a_tiny_plate_disconnects() {
        let err = generate_plate_with_cavity(2.0, 2.0, 2, 2, Some(Cavity::new(0.9, 0.9, 1.1, 1.1)))
            .unwrap_err();
        assert!(matches!(err, Error::Disconnected(_)), "got {err}");
    }

    #[test]
    fn cavity_touching_the_boundary_is_rejected() {
        for c in [
            Cavity::new(0.0, 1.0, 2.0, 3.0),
            Cavity::new(1.0, 1.0, 4.0, 3.0),
            Cavity::new(1.0, 0.0, 2.0, 3.0),
            Cavity::new(1.0, 1.0, 2.0, 4.0),
        ] {
            let err = generate_plate_with_cavity(4.0, 4.0, 8, 8, Some(c)).unwrap_err();
            assert!(matches!(err, Error::InvalidArgument(_)), "cavity {c:?}");
        }
    }

    #[test]
    fn invalid_generator_arguments_are_rejected() {
        assert!(generate_plate_with_cavity(0.0, 1.0, 4, 4, None).is_err());
        assert!(generate_plate_with_cavity(1.0, 1.0, 1, 4, None).is_err());
        assert!(
            generate_plate_with_cavity(4.0, 4.0, 4, 4, Some(Cavity::new(2.0, 1.0, 1.0, 3.0)))
                .is_err()
        );
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_plate_with_cavity(4.0, 4.0, 12, 12, Some(Cavity::new(1.25, 1.25, 2.75, 2.75)))
            .unwrap();
        let b = generate_plate_with_cavity(4.0, 4.0, 12, 12, Some(Cavity::new(1.25, 1.25, 2.75, 2.75)))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mesh_json_round_trip_is_exact_and_one_based() {
        let mesh = generate_plate_with_cavity(2.0, 2.0, 2, 2, None).unwrap();
        let text = mesh_to_json(&mesh);
        assert_eq!(mesh_from_json(&text).unwrap(), mesh);

        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        let smallest = value["triangles"]
            .as_array()
            .unwrap()
            .iter()
            .flat_map(|t| t.as_array().unwrap().iter())
            .map(|v| v.as_u64().unwrap())
            .min()
            .unwrap();
        assert_eq!(smallest, 1);
    }

    #[test]
    fn mesh_files_with_bad_triangles_are_rejected() {
        let zero_index = r#"{"vertices": [[0,0],[1,0],[0,1]], "triangles": [[0,1,2]]}"#;
        assert!(matches!(
            mesh_from_json(zero_index),
            Err(Error::InvalidMesh(_))
        ));

        let collinear = r#"{"vertices": [[0,0],[1,0],[2,0]], "triangles": [[1,2,3]]}"#;
        assert!(matches!(
            mesh_from_json(collinear),
            Err(Error::InvalidMesh(_))
        ));

        let disconnected = r#"{
            "vertices": [[0,0],[1,0],[0,1],[5,5],[6,5],[5,6]],
            "triangles": [[1,2,3],[4,5,6]]
        }"#;
        assert!(matches!(
            mesh_from_json(disconnected),
            Err(Error::Disconnected(_))
        ));
    }

    /// Plates with deterministically jittered interior vertices: angles
    /// go obtuse (negative weights) but all Laplacian invariants and
    /// positive semidefiniteness must survive.
    #[test]
    fn randomized_meshes_keep_laplacian_invariants() {
        for seed in 0..20u64 {
            let nx = 3 + (seed as usize % 4);
            let ny = 3 + (seed as usize / 4 % 4);
            let base = generate_plate_with_cavity(nx as f64, ny as f64, nx, ny, None).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
            let mut vertices = base.vertices().to_vec();
            for v in vertices.iter_mut() {
                let interior = v[0] > 0.0 && v[0] < nx as f64 && v[1] > 0.0 && v[1] < ny as f64;
                if interior {
                    v[0] += 0.3 * (rng.random::<f64>() - 0.5);
                    v[1] += 0.3 * (rng.random::<f64>() - 0.5);
                }
            }
            let jittered = TriangleMesh::new(vertices, base.triangles().to_vec()).unwrap();
            let lap = cotan_laplacian(&jittered);
            // Construction validated symmetry and row sums; check PSD.
            let spectrum = eigendecompose(&lap).unwrap();
            assert!(spectrum.eigenvalues()[0] >= 0.0, "seed {seed}");
        }
    }
}
