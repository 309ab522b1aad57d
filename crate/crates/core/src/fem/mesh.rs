use rayon::prelude::*;

use crate::geometry::{Point, TrapezoidSpec};
use crate::{Error, Result};

/// Structured triangulation of a trapezoid: the bilinear image of an
/// `n x n` grid on the unit square, each cell cut along its `(0,0)-(1,1)`
/// diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub n: usize,
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
    /// Longest edge.
    pub mesh_size: f64,
}

impl Mesh {
    /// Grid coordinates `(i, j)` of vertex `v`.
    pub fn grid_coords(&self, v: usize) -> (usize, usize) {
        (v % (self.n + 1), v / (self.n + 1))
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    }
}

pub fn generate_mesh(t: &TrapezoidSpec, n: usize) -> Result<Mesh> {
    if n < 2 {
        return Err(Error::Precondition(format!("mesh needs n >= 2 subdivisions, got {n}")));
    }
    let [v0, v1, v2, v3] = t.vertices();
    let np = n + 1;
    let lerp = |a: Point, b: Point, s: f64| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
    let mut vertices = Vec::with_capacity(np * np);
    let mut boundary = Vec::with_capacity(np * np);
    for j in 0..np {
        let tj = j as f64 / n as f64;
        let left = lerp(v0, v3, tj);
        let right = lerp(v1, v2, tj);
        for i in 0..np {
            vertices.push(lerp(left, right, i as f64 / n as f64));
            boundary.push(i == 0 || i == n || j == 0 || j == n);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let a = j * np + i;
            let (b, c, d) = (a + 1, a + np + 1, a + np);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let mut mesh = Mesh { n, vertices, triangles, boundary, mesh_size: 0.0 };
    let min_area = 1e-14 * t.diameter().powi(2);
    let edge = |p: Point, q: Point| (p[0] - q[0]).hypot(p[1] - q[1]);
    let mut h: f64 = 0.0;
    for (index, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.triangle_area(index);
        if !(area > min_area) {
            return Err(Error::DegenerateElement { index, area });
        }
        let [a, b, c] = tri.map(|i| mesh.vertices[i]);
        h = h.max(edge(a, b)).max(edge(b, c)).max(edge(c, a));
    }
    mesh.mesh_size = h;
    Ok(mesh)
}

/// P1 element stiffness and consistent mass matrices of a triangle.
pub fn element_matrices(p: [Point; 3]) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]));
    // gradient of basis function a is the rotated opposite edge over 2 area
    let grad: [[f64; 2]; 3] = std::array::from_fn(|a| {
        let (q, r) = (p[(a + 1) % 3], p[(a + 2) % 3]);
        [(q[1] - r[1]) / (2.0 * area), (r[0] - q[0]) / (2.0 * area)]
    });
    let mut k = [[0.0; 3]; 3];
    let mut m = [[0.0; 3]; 3];
    for a in 0..3 {
        for c in 0..3 {
            k[a][c] = area * (grad[a][0] * grad[c][0] + grad[a][1] * grad[c][1]);
            m[a][c] = area / 12.0 * if a == c { 2.0 } else { 1.0 };
        }
    }
    (k, m)
}

/// Element contributions as `(row, col, k, m)` in element order.
pub(crate) fn element_triplets(mesh: &Mesh) -> Vec<(usize, usize, f64, f64)> {
    mesh.triangles
        .par_iter()
        .flat_map_iter(|tri| {
            let (k, m) = element_matrices(tri.map(|i| mesh.vertices[i]));
            (0..9).map(move |e| {
                let (a, c) = (e / 3, e % 3);
                (tri[a], tri[c], k[a][c], m[a][c])
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn counts() {
        let m = generate_mesh(&TrapezoidSpec::rectangle(1.0, 1.0).unwrap(), 2).unwrap();
        assert_eq!(m.vertices.len(), 9);
        assert_eq!(m.triangles.len(), 8);
        assert_eq!(m.boundary.iter().filter(|&&b| !b).count(), 1);
        assert!(generate_mesh(&TrapezoidSpec::rectangle(1.0, 1.0).unwrap(), 1).is_err());
    }

    #[test]
    fn areas_and_size() {
        let a = 2f64.atan();
        let t = TrapezoidSpec::new(1.0, 1.0, a, a).unwrap();
        let m32 = generate_mesh(&t, 32).unwrap();
        let m64 = generate_mesh(&t, 64).unwrap();
        let total: f64 = (0..m64.triangles.len()).map(|i| m64.triangle_area(i)).sum();
        assert_relative_eq!(total, t.area(), epsilon = 1e-12);
        assert!((0..m64.triangles.len()).all(|i| m64.triangle_area(i) > 0.0));
        assert_relative_eq!(m32.mesh_size / m64.mesh_size, 2.0, epsilon = 0.02);
    }

    #[test]
    fn boundary_flags_lie_on_edges() {
        let t = TrapezoidSpec::new(0.7, 1.3, 1.1, 0.6).unwrap();
        let m = generate_mesh(&t, 10).unwrap();
        let tol = 1e-10;
        for (p, &b) in m.vertices.iter().zip(&m.boundary) {
            assert!(t.contains(*p, tol));
            let v = t.vertices();
            let on_edge = (0..4).any(|i| {
                let (a, c) = (v[i], v[(i + 1) % 4]);
                let cross = (c[0] - a[0]) * (p[1] - a[1]) - (c[1] - a[1]) * (p[0] - a[0]);
                (cross / crate::geometry::dist(a, c)).abs() < tol
            });
            assert_eq!(on_edge, b);
        }
    }

    #[test]
    fn reference_triangle() {
        let (k, m) = element_matrices([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let k_ref = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for a in 0..3 {
            for c in 0..3 {
                assert_relative_eq!(k[a][c], k_ref[a][c], epsilon = 1e-15);
                let w = if a == c { 2.0 } else { 1.0 };
                assert_relative_eq!(m[a][c], 0.5 / 12.0 * w, epsilon = 1e-15);
            }
            assert!(k[a].iter().sum::<f64>().abs() < 1e-15);
        }
    }
}
