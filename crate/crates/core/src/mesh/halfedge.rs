//! Half-edge connectivity over a [`TriangleMesh`].
//!
//! Half-edges are stored implicitly: triangle `t = [a, b, c]` owns half-edges
//! `3t` (a->b), `3t+1` (b->c) and `3t+2` (c->a), so `next`, `face` and the
//! opposite corner are index arithmetic. Only twins and per-vertex incident
//! faces are stored.

use std::collections::HashMap;

use nalgebra::Vector3;

use super::{MeshError, TriangleMesh};

const NO_TWIN: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfEdge(pub usize);

impl HalfEdge {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }

    #[inline]
    pub fn face(self) -> usize {
        self.0 / 3
    }

    #[inline]
    pub fn next(self) -> HalfEdge {
        HalfEdge(3 * (self.0 / 3) + (self.0 + 1) % 3)
    }

    #[inline]
    pub fn prev(self) -> HalfEdge {
        HalfEdge(3 * (self.0 / 3) + (self.0 + 2) % 3)
    }
}

#[derive(Debug, Clone)]
pub struct HalfEdgeMesh {
    mesh: TriangleMesh,
    twins: Vec<usize>,
    face_offsets: Vec<usize>,
    incident: Vec<usize>,
}

impl HalfEdgeMesh {
    pub fn new(mesh: TriangleMesh) -> Result<Self, MeshError> {
        let n = mesh.num_vertices();
        let nh = 3 * mesh.num_triangles();

        let mut faces_per_edge: HashMap<(usize, usize), u32> = HashMap::with_capacity(nh);
        for tri in &mesh.triangles {
            for i in 0..3 {
                let (u, v) = (tri[i], tri[(i + 1) % 3]);
                let count = faces_per_edge.entry((u.min(v), u.max(v))).or_insert(0);
                *count += 1;
                if *count > 2 {
                    return Err(MeshError::NonManifold(u.min(v), u.max(v)));
                }
            }
        }

        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(nh);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for i in 0..3 {
                let key = (tri[i], tri[(i + 1) % 3]);
                if directed.insert(key, 3 * t + i).is_some() {
                    return Err(MeshError::InconsistentOrientation(key.0, key.1));
                }
            }
        }

        let mut twins = vec![NO_TWIN; nh];
        for (&(u, v), &h) in &directed {
            if let Some(&g) = directed.get(&(v, u)) {
                twins[h] = g;
            }
        }

        let mut face_offsets = vec![0usize; n + 1];
        for tri in &mesh.triangles {
            for &v in tri {
                face_offsets[v + 1] += 1;
            }
        }
        for v in 0..n {
            face_offsets[v + 1] += face_offsets[v];
        }
        let mut fill = face_offsets.clone();
        let mut incident = vec![0usize; face_offsets[n]];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for &v in tri {
                incident[fill[v]] = t;
                fill[v] += 1;
            }
        }

        Ok(Self {
            mesh,
            twins,
            face_offsets,
            incident,
        })
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.mesh.positions
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.mesh.triangles
    }

    pub fn num_vertices(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn num_faces(&self) -> usize {
        self.mesh.num_triangles()
    }

    pub fn num_halfedges(&self) -> usize {
        self.twins.len()
    }

    pub fn halfedges(&self) -> impl Iterator<Item = HalfEdge> + '_ {
        (0..self.num_halfedges()).map(HalfEdge)
    }

    /// The three half-edges of triangle `t`, in counterclockwise order.
    pub fn face_halfedges(&self, t: usize) -> [HalfEdge; 3] {
        [HalfEdge(3 * t), HalfEdge(3 * t + 1), HalfEdge(3 * t + 2)]
    }

    #[inline]
    pub fn origin(&self, h: HalfEdge) -> usize {
        self.mesh.triangles[h.face()][h.0 % 3]
    }

    #[inline]
    pub fn target(&self, h: HalfEdge) -> usize {
        self.mesh.triangles[h.face()][(h.0 + 1) % 3]
    }

    /// The corner of `h`'s triangle that is not on `h`.
    #[inline]
    pub fn opposite_vertex(&self, h: HalfEdge) -> usize {
        self.mesh.triangles[h.face()][(h.0 + 2) % 3]
    }

    #[inline]
    pub fn twin(&self, h: HalfEdge) -> Option<HalfEdge> {
        match self.twins[h.0] {
            NO_TWIN => None,
            g => Some(HalfEdge(g)),
        }
    }

    pub fn is_boundary(&self, h: HalfEdge) -> bool {
        self.twins[h.0] == NO_TWIN
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.incident_faces(v).iter().any(|&t| {
            self.face_halfedges(t)
                .into_iter()
                .any(|h| self.is_boundary(h) && (self.origin(h) == v || self.target(h) == v))
        })
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut flags = vec![false; self.num_vertices()];
        for h in self.halfedges().filter(|&h| self.is_boundary(h)) {
            flags[self.origin(h)] = true;
            flags[self.target(h)] = true;
        }
        flags.iter().enumerate().filter_map(|(v, &b)| b.then_some(v)).collect()
    }

    /// Triangles containing `v`.
    pub fn incident_faces(&self, v: usize) -> &[usize] {
        &self.incident[self.face_offsets[v]..self.face_offsets[v + 1]]
    }

    /// Spokes-and-rims neighborhood: every half-edge of every triangle
    /// containing `v`. Spokes appear twice (once per direction when both
    /// sides exist), rims once.
    pub fn spokes_and_rims(&self, v: usize) -> Vec<HalfEdge> {
        self.incident_faces(v)
            .iter()
            .flat_map(|&t| self.face_halfedges(t))
            .collect()
    }

    /// Half-edges with `v` as origin or target.
    pub fn halfedges_at(&self, v: usize) -> impl Iterator<Item = HalfEdge> + '_ {
        self.incident_faces(v).iter().flat_map(move |&t| {
            self.face_halfedges(t)
                .into_iter()
                .filter(move |&h| self.origin(h) == v || self.target(h) == v)
        })
    }

    /// Outgoing half-edges of an interior vertex, walked by `twin(prev(h))`.
    /// Returns `None` for boundary vertices, where the fan is not closed.
    pub fn circulate(&self, v: usize) -> Option<Vec<HalfEdge>> {
        let &first_face = self.incident_faces(v).first()?;
        let start = self
            .face_halfedges(first_face)
            .into_iter()
            .find(|&h| self.origin(h) == v)?;
        let mut out = vec![start];
        let mut h = start;
        loop {
            h = self.twin(h.prev())?;
            if h == start {
                return Some(out);
            }
            out.push(h);
            if out.len() > self.incident_faces(v).len() {
                return None;
            }
        }
    }

    /// Edge vector `target - origin` under `positions`.
    #[inline]
    pub fn vector(&self, h: HalfEdge, positions: &[Vector3<f64>]) -> Vector3<f64> {
        positions[self.target(h)] - positions[self.origin(h)]
    }
}
