use super::mesh::{element_triplets, Mesh};
use super::sparse::{grid_nested_dissection, CsrMatrix};
use super::BoundaryCondition;

/// Global P1 stiffness and mass matrices on the free degrees of freedom.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub bc: BoundaryCondition,
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    /// Mesh vertex of each degree of freedom.
    pub dof_vertex: Vec<usize>,
    /// Nested-dissection order of the degrees of freedom.
    pub ordering: Vec<usize>,
    pub mesh_size: f64,
}

/// Dirichlet conditions drop the boundary vertices; Neumann keeps every vertex.
pub fn assemble(mesh: &Mesh, bc: BoundaryCondition) -> Assembled {
    let nv = mesh.vertices.len();
    let mut dof_of = vec![usize::MAX; nv];
    let mut dof_vertex = Vec::new();
    for v in 0..nv {
        if bc == BoundaryCondition::Neumann || !mesh.boundary[v] {
            dof_of[v] = dof_vertex.len();
            dof_vertex.push(v);
        }
    }
    let mut kt = Vec::new();
    let mut mt = Vec::new();
    for (r, c, k, m) in element_triplets(mesh) {
        let (i, j) = (dof_of[r], dof_of[c]);
        if i != usize::MAX && j != usize::MAX {
            kt.push((i, j, k));
            mt.push((i, j, m));
        }
    }
    let n = dof_vertex.len();
    let coords: Vec<(i64, i64)> = dof_vertex
        .iter()
        .map(|&v| {
            let (i, j) = mesh.grid_coords(v);
            (i as i64, j as i64)
        })
        .collect();
    Assembled {
        bc,
        stiffness: CsrMatrix::from_triplets(n, &kt),
        mass: CsrMatrix::from_triplets(n, &mt),
        dof_vertex,
        ordering: grid_nested_dissection(&coords),
        mesh_size: mesh.mesh_size,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::generate_mesh;
    use crate::geometry::TrapezoidSpec;
    use approx::assert_relative_eq;

    #[test]
    fn structure() {
        let t = TrapezoidSpec::new(1.0, 1.5, 1.2, 0.9).unwrap();
        let mesh = generate_mesh(&t, 12).unwrap();
        let n = assemble(&mesh, BoundaryCondition::Neumann);
        assert_eq!(n.stiffness.n(), 13 * 13);
        assert!(n.stiffness.is_symmetric(1e-14));
        assert!(n.mass.is_symmetric(1e-14));
        assert!(n.stiffness.same_pattern(&n.mass));
        let ones = vec![1.0; n.stiffness.n()];
        assert!(n.stiffness.matvec(&ones).iter().all(|v| v.abs() < 1e-12));
        // the mass matrix integrates constants to the area
        let total: f64 = n.mass.matvec(&ones).iter().sum();
        assert_relative_eq!(total, t.area(), epsilon = 1e-12);

        let d = assemble(&mesh, BoundaryCondition::Dirichlet);
        assert_eq!(d.stiffness.n(), 11 * 11);
        assert_eq!(d.stiffness.n(), mesh.boundary.iter().filter(|b| !**b).count());
    }
}
