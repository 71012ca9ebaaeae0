//! Conforming triangulations of convex polygons and point location.
//!
//! The structured constructor produces Friedrichs–Keller meshes: every grid
//! square is split along its `(x0, y0)–(x1, y1)` diagonal, so all triangles are
//! right triangles and the mesh is weakly acute.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Absolute tolerance on barycentric coordinates for inside tests.
pub const GEOM_TOL: f64 = 1e-12;

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub const fn unit_square() -> Self {
        Self::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Result of a point location query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointLocation {
    Inside { cell: usize, bary: [f64; 3] },
    Outside,
}

impl PointLocation {
    pub fn is_inside(&self) -> bool {
        matches!(self, PointLocation::Inside { .. })
    }
}

/// Uniform background grid of cell buckets.
#[derive(Debug, Clone)]
struct BinGrid {
    origin: [f64; 2],
    size: [f64; 2],
    dims: [usize; 2],
    // bucket contents are sorted ascending by construction
    buckets: Vec<Vec<usize>>,
}

impl BinGrid {
    fn new(vertices: &[[f64; 2]], cells: &[[usize; 3]], target: f64) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        let mut dims = [1usize; 2];
        let mut size = [1.0; 2];
        for k in 0..2 {
            let extent = (hi[k] - lo[k]).max(f64::MIN_POSITIVE);
            dims[k] = ((extent / target).ceil() as usize).clamp(1, 4096);
            size[k] = extent / dims[k] as f64;
        }
        let mut grid = BinGrid {
            origin: lo,
            size,
            dims,
            buckets: vec![Vec::new(); dims[0] * dims[1]],
        };
        for (c, tri) in cells.iter().enumerate() {
            let (mut clo, mut chi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for &v in tri {
                for k in 0..2 {
                    clo[k] = clo[k].min(vertices[v][k]);
                    chi[k] = chi[k].max(vertices[v][k]);
                }
            }
            // inflate so that tolerance-inside points always see the cell
            let pad = 1e-9 * (1.0 + target);
            let (i0, j0) = grid.bin_of([clo[0] - pad, clo[1] - pad]);
            let (i1, j1) = grid.bin_of([chi[0] + pad, chi[1] + pad]);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    grid.buckets[j * dims[0] + i].push(c);
                }
            }
        }
        grid
    }

    fn bin_of(&self, p: [f64; 2]) -> (usize, usize) {
        let f = |k: usize| {
            let t = ((p[k] - self.origin[k]) / self.size[k]).floor();
            if t < 0.0 {
                0
            } else {
                (t as usize).min(self.dims[k] - 1)
            }
        };
        (f(0), f(1))
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        let pad = 1e-9;
        (0..2).all(|k| {
            p[k] >= self.origin[k] - pad
                && p[k] <= self.origin[k] + self.size[k] * self.dims[k] as f64 + pad
        })
    }

    fn candidates(&self, p: [f64; 2]) -> &[usize] {
        let (i, j) = self.bin_of(p);
        &self.buckets[j * self.dims[0] + i]
    }
}

/// A conforming triangulation with interior/boundary node classification.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    cells: Vec<[usize; 3]>,
    areas: Vec<f64>,
    is_boundary: Vec<bool>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    interior_pos: Vec<Option<usize>>,
    stars: Vec<Vec<usize>>,
    h: f64,
    weakly_acute: bool,
    locator: BinGrid,
}

/// Friedrichs–Keller triangulation of `rect` with `n` subdivisions per side.
pub fn build_structured_mesh(n: usize, rect: Rect) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "subdivision count must be at least 1".into(),
        ));
    }
    if !(rect.width() > 0.0 && rect.height() > 0.0) || !rect.area().is_finite() {
        return Err(Error::InvalidParameter(format!(
            "degenerate rectangle {rect:?}"
        )));
    }
    let dx = rect.width() / n as f64;
    let dy = rect.height() / n as f64;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let x = if i == n { rect.x1 } else { rect.x0 + i as f64 * dx };
            let y = if j == n { rect.y1 } else { rect.y0 + j as f64 * dy };
            vertices.push([x, y]);
        }
    }
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v01, v11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            cells.push([v00, v10, v11]);
            cells.push([v00, v11, v01]);
        }
    }
    Mesh::new(vertices, cells)
}

impl Mesh {
    /// Builds a mesh from raw tables. Clockwise triangles are reoriented;
    /// zero-area triangles and non-manifold edges are rejected.
    pub fn new(vertices: Vec<[f64; 2]>, mut cells: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() || cells.is_empty() {
            return Err(Error::InvalidMesh("empty vertex or cell table".into()));
        }
        let nv = vertices.len();
        let mut areas = Vec::with_capacity(cells.len());
        for (c, tri) in cells.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!(
                    "cell {c} references a missing vertex"
                )));
            }
            let a = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            let scale = edge_lengths(&vertices, *tri)
                .iter()
                .fold(0.0f64, |m, &l| m.max(l));
            if a.abs() <= 1e-14 * scale * scale {
                return Err(Error::DegenerateCell { cell: c, area: a });
            }
            if a < 0.0 {
                tri.swap(1, 2);
            }
            areas.push(a.abs());
        }

        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for (c, tri) in cells.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let e = (a.min(b), a.max(b));
                let count = edge_count.entry(e).or_insert(0);
                *count += 1;
                if *count > 2 {
                    return Err(Error::InvalidMesh(format!(
                        "edge {e:?} shared by more than two cells (cell {c})"
                    )));
                }
            }
        }
        let mut is_boundary = vec![false; nv];
        for (&(a, b), &count) in &edge_count {
            if count == 1 {
                is_boundary[a] = true;
                is_boundary[b] = true;
            }
        }

        let mut stars = vec![Vec::new(); nv];
        for (c, tri) in cells.iter().enumerate() {
            for &v in tri {
                stars[v].push(c);
            }
        }
        if let Some(v) = stars.iter().position(|s| s.is_empty()) {
            return Err(Error::InvalidMesh(format!("vertex {v} belongs to no cell")));
        }

        let mut interior = Vec::new();
        let mut boundary = Vec::new();
        let mut interior_pos = vec![None; nv];
        for v in 0..nv {
            if is_boundary[v] {
                boundary.push(v);
            } else {
                interior_pos[v] = Some(interior.len());
                interior.push(v);
            }
        }

        let h = cells
            .iter()
            .flat_map(|&tri| edge_lengths(&vertices, tri))
            .fold(0.0f64, f64::max);
        let weakly_acute = (0..cells.len()).all(|c| max_angle(&vertices, cells[c]) <= FRAC_PI_2_TOL);
        let locator = BinGrid::new(&vertices, &cells, h);

        Ok(Self {
            vertices,
            cells,
            areas,
            is_boundary,
            interior,
            boundary,
            interior_pos,
            stars,
            h,
            weakly_acute,
            locator,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> [f64; 2] {
        self.vertices[v]
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        self.areas[c]
    }

    pub fn num_nodes(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.is_boundary[v]
    }

    /// Position of `v` in [`Mesh::interior_nodes`], if interior.
    pub fn interior_position(&self, v: usize) -> Option<usize> {
        self.interior_pos[v]
    }

    pub fn star(&self, v: usize) -> &[usize] {
        &self.stars[v]
    }

    /// Maximum edge length.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn is_weakly_acute(&self) -> bool {
        self.weakly_acute
    }

    /// Returns the first cell with an obtuse angle, if any.
    pub fn check_weakly_acute(&self) -> Result<()> {
        for (c, &tri) in self.cells.iter().enumerate() {
            let a = max_angle(&self.vertices, tri);
            if a > FRAC_PI_2_TOL {
                return Err(Error::NotWeaklyAcute {
                    cell: c,
                    angle_deg: a.to_degrees(),
                });
            }
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Area-weighted centroid of the domain.
    pub fn centroid(&self) -> [f64; 2] {
        let mut acc = [0.0; 2];
        for (tri, a) in self.cells.iter().zip(&self.areas) {
            let c = self.cell_centroid_of(*tri);
            acc[0] += a * c[0];
            acc[1] += a * c[1];
        }
        let total = self.area();
        [acc[0] / total, acc[1] / total]
    }

    /// Radius of the smallest ball about `center` containing every vertex.
    pub fn radius_about(&self, center: [f64; 2]) -> f64 {
        self.vertices
            .iter()
            .map(|v| (v[0] - center[0]).hypot(v[1] - center[1]))
            .fold(0.0, f64::max)
    }

    pub fn cell_centroid(&self, c: usize) -> [f64; 2] {
        self.cell_centroid_of(self.cells[c])
    }

    fn cell_centroid_of(&self, tri: [usize; 3]) -> [f64; 2] {
        let [a, b, c] = tri.map(|v| self.vertices[v]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Area of the star (support of the hat function) of node `z`.
    pub fn star_volume(&self, z: usize) -> Result<f64> {
        if z >= self.num_nodes() {
            return Err(Error::InvalidNode {
                node: z,
                count: self.num_nodes(),
            });
        }
        Ok(self.stars[z].iter().map(|&c| self.areas[c]).sum())
    }

    /// Barycentric coordinates of `p` with respect to cell `c`.
    pub fn barycentric(&self, c: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, d] = self.cells[c].map(|v| self.vertices[v]);
        let det = (b[1] - d[1]) * (a[0] - d[0]) + (d[0] - b[0]) * (a[1] - d[1]);
        let l0 = ((b[1] - d[1]) * (p[0] - d[0]) + (d[0] - b[0]) * (p[1] - d[1])) / det;
        let l1 = ((d[1] - a[1]) * (p[0] - d[0]) + (a[0] - d[0]) * (p[1] - d[1])) / det;
        [l0, l1, 1.0 - l0 - l1]
    }

    fn try_cell(&self, c: usize, p: [f64; 2]) -> Option<PointLocation> {
        let bary = self.barycentric(c, p);
        bary.iter()
            .all(|&l| l >= -GEOM_TOL)
            .then_some(PointLocation::Inside { cell: c, bary })
    }

    /// Locates `p` using the bin grid. Ties on shared edges resolve to the
    /// lowest cell index.
    pub fn locate(&self, p: [f64; 2]) -> PointLocation {
        if !self.locator.contains(p) {
            return PointLocation::Outside;
        }
        self.locator
            .candidates(p)
            .iter()
            .find_map(|&c| self.try_cell(c, p))
            .unwrap_or(PointLocation::Outside)
    }

    /// Exhaustive scan over all cells; reference for [`Mesh::locate`].
    pub fn locate_exhaustive(&self, p: [f64; 2]) -> PointLocation {
        (0..self.cells.len())
            .find_map(|c| self.try_cell(c, p))
            .unwrap_or(PointLocation::Outside)
    }

    /// Writes the node table (`id x y interior|boundary`) followed by the
    /// cell table (`id v0 v1 v2`).
    pub fn write_tables<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# nodes {}", self.num_nodes())?;
        for (i, v) in self.vertices.iter().enumerate() {
            let kind = if self.is_boundary[i] { "boundary" } else { "interior" };
            writeln!(out, "{i} {} {} {kind}", v[0], v[1])?;
        }
        writeln!(out, "# cells {}", self.num_cells())?;
        for (c, tri) in self.cells.iter().enumerate() {
            writeln!(out, "{c} {} {} {}", tri[0], tri[1], tri[2])?;
        }
        Ok(())
    }

    /// Parses the format produced by [`Mesh::write_tables`]. Node kinds in the
    /// file are ignored and recomputed from the topology.
    pub fn read_tables<R: BufRead>(input: R) -> Result<Self> {
        enum Section {
            None,
            Nodes,
            Cells,
        }
        let mut section = Section::None;
        let mut vertices = Vec::new();
        let mut cells = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim_start();
                if rest.starts_with("nodes") {
                    section = Section::Nodes;
                } else if rest.starts_with("cells") {
                    section = Section::Cells;
                }
                continue;
            }
            let bad = |what: &str| Error::InvalidMesh(format!("line {}: {what}", lineno + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            match section {
                Section::Nodes => {
                    if fields.len() < 3 {
                        return Err(bad("expected `id x y [kind]`"));
                    }
                    let id: usize = fields[0].parse().map_err(|_| bad("bad node id"))?;
                    if id != vertices.len() {
                        return Err(bad("node ids must be consecutive from 0"));
                    }
                    let x: f64 = fields[1].parse().map_err(|_| bad("bad x"))?;
                    let y: f64 = fields[2].parse().map_err(|_| bad("bad y"))?;
                    vertices.push([x, y]);
                }
                Section::Cells => {
                    if fields.len() != 4 {
                        return Err(bad("expected `id v0 v1 v2`"));
                    }
                    let id: usize = fields[0].parse().map_err(|_| bad("bad cell id"))?;
                    if id != cells.len() {
                        return Err(bad("cell ids must be consecutive from 0"));
                    }
                    let mut tri = [0usize; 3];
                    for k in 0..3 {
                        tri[k] = fields[k + 1].parse().map_err(|_| bad("bad vertex index"))?;
                    }
                    cells.push(tri);
                }
                Section::None => return Err(bad("data before a `# nodes` header")),
            }
        }
        Mesh::new(vertices, cells)
    }
}

const FRAC_PI_2_TOL: f64 = std::f64::consts::FRAC_PI_2 + 1e-10;

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_lengths(vertices: &[[f64; 2]], tri: [usize; 3]) -> [f64; 3] {
    let p = tri.map(|v| vertices[v]);
    [0, 1, 2].map(|k| {
        let (a, b) = (p[k], p[(k + 1) % 3]);
        (b[0] - a[0]).hypot(b[1] - a[1])
    })
}

fn max_angle(vertices: &[[f64; 2]], tri: [usize; 3]) -> f64 {
    let p = tri.map(|v| vertices[v]);
    (0..3)
        .map(|k| {
            let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
            let u = [b[0] - a[0], b[1] - a[1]];
            let v = [c[0] - a[0], c[1] - a[1]];
            let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
            cos.clamp(-1.0, 1.0).acos()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Mesh {
        build_structured_mesh(n, Rect::unit_square()).unwrap()
    }

    #[test]
    fn smallest_mesh() {
        let m = unit(1);
        assert_eq!(m.num_cells(), 2);
        assert!(m.interior_nodes().is_empty());
    }

    #[test]
    fn two_by_two_has_single_center_node() {
        let m = unit(2);
        assert_eq!(m.num_cells(), 8);
        assert_eq!(m.interior_nodes(), &[4]);
        assert_eq!(m.vertex(4), [0.5, 0.5]);
    }

    #[test]
    fn four_by_four_counts_and_h() {
        let m = unit(4);
        assert_eq!(m.num_cells(), 32);
        assert_eq!(m.interior_nodes().len(), 9);
        assert!((m.h() - 2f64.sqrt() / 4.0).abs() < 1e-15);
        assert!(m.is_weakly_acute());
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(build_structured_mesh(0, Rect::unit_square()).is_err());
        assert!(build_structured_mesh(3, Rect::new(0.0, 0.0, 0.0, 1.0)).is_err());
        let r = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            vec![[0, 1, 2]],
        );
        assert!(matches!(r, Err(Error::DegenerateCell { cell: 0, .. })));
    }

    #[test]
    fn star_volumes() {
        let m = unit(2);
        assert!((m.star_volume(4).unwrap() - 0.75).abs() < 1e-15);
        // the diagonal runs from (0,0) to (1,1)
        assert_eq!(m.star(0).len(), 2);
        assert_eq!(m.star(2).len(), 1);
        assert_eq!(m.star(6).len(), 1);
        assert_eq!(m.star(8).len(), 2);
        assert!((m.star_volume(0).unwrap() - 0.25).abs() < 1e-15);
        assert!((m.star_volume(2).unwrap() - 0.125).abs() < 1e-15);
        assert!(m.star_volume(9).is_err());
        let total: f64 = (0..m.num_nodes()).map(|z| m.star_volume(z).unwrap()).sum();
        assert!((total - 3.0).abs() < 1e-14);
    }

    #[test]
    fn locate_examples() {
        let m = unit(2);
        match m.locate([0.25, 0.25]) {
            PointLocation::Inside { bary, .. } => {
                assert!((bary.iter().sum::<f64>() - 1.0).abs() < 1e-14)
            }
            PointLocation::Outside => panic!("expected inside"),
        }
        assert_eq!(m.locate([2.0, 2.0]), PointLocation::Outside);
        assert_eq!(m.locate([-1e-6, 0.5]), PointLocation::Outside);
        match m.locate([0.5, 0.5]) {
            PointLocation::Inside { cell, bary } => {
                assert_eq!(cell, 0);
                assert!(bary.iter().any(|&l| (l - 1.0).abs() < 1e-14));
            }
            PointLocation::Outside => panic!("vertex must be inside"),
        }
    }

    #[test]
    fn shared_edge_resolves_to_lowest_cell() {
        let m = unit(4);
        // on the diagonal of the first square, shared by cells 0 and 1
        let p = [0.125, 0.125];
        assert!(matches!(m.locate(p), PointLocation::Inside { cell: 0, .. }));
        assert_eq!(m.locate(p), m.locate_exhaustive(p));
    }

    #[test]
    fn boundary_grazing_point_is_inside() {
        let m = unit(4);
        assert!(m.locate([1.0 + 1e-14, 0.3]).is_inside());
        assert!(m.locate([0.3, -1e-14]).is_inside());
    }

    #[test]
    fn refinement_halves_h() {
        for n in [1, 2, 4, 8, 16] {
            assert_eq!(unit(2 * n).h(), unit(n).h() / 2.0);
        }
    }

    #[test]
    fn area_matches_rectangle() {
        let r = Rect::new(-0.5, 0.25, 1.7, 1.3);
        let m = build_structured_mesh(7, r).unwrap();
        assert!((m.area() - r.area()).abs() <= 1e-12 * r.area());
        assert!(m.is_weakly_acute());
    }

    #[test]
    fn obtuse_mesh_detected() {
        let m = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.1]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(!m.is_weakly_acute());
        assert!(matches!(
            m.check_weakly_acute(),
            Err(Error::NotWeaklyAcute { cell: 0, .. })
        ));
    }

    #[test]
    fn clockwise_cells_are_reoriented() {
        let m = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 2, 1]],
        )
        .unwrap();
        assert_eq!(m.cells()[0], [0, 1, 2]);
    }

    #[test]
    fn table_round_trip() {
        let m = unit(3);
        let mut buf = Vec::new();
        m.write_tables(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with("boundary"));
        let back = Mesh::read_tables(buf.as_slice()).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.cells(), m.cells());
        assert_eq!(back.interior_nodes(), m.interior_nodes());
    }
}
