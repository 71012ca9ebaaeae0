//! Convex envelope, lower contact set and the discrete ABP ratio.
//!
//! The envelope of `-v^-` over a ball `B_R` containing the domain is the
//! lower convex hull of the lifted nodal values together with a ring of
//! samples at height zero on the circle of radius `R`.

use std::collections::HashSet;

use rayon::prelude::*;
use robust::{orient2d, orient3d, Coord, Coord3D};

use crate::error::{Error, Result};
use crate::fem::FeFunction;
use crate::mesh::Mesh;

pub const DEFAULT_RING_SAMPLES: usize = 64;

/// Ring radius relative to the domain's circumradius about its centroid.
pub const RING_INFLATION: f64 = 1.01;

fn c2(p: [f64; 3]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

fn c3(p: [f64; 3]) -> Coord3D<f64> {
    Coord3D {
        x: p[0],
        y: p[1],
        z: p[2],
    }
}

/// Facets of the lower convex hull, each clockwise in the plane projection.
///
/// Uses exact orientation predicates; returns an empty list when the points
/// do not span three dimensions.
pub fn lower_hull(points: &[[f64; 3]]) -> Vec<[usize; 3]> {
    let Some(seed) = initial_simplex(points) else {
        return Vec::new();
    };
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let [a, b, c, d] = seed;
    for (mut f, opp) in [([a, b, c], d), ([a, b, d], c), ([a, c, d], b), ([b, c, d], a)] {
        if orient3d(c3(points[f[0]]), c3(points[f[1]]), c3(points[f[2]]), c3(points[opp])) < 0.0 {
            f.swap(1, 2);
        }
        faces.push(f);
    }
    for (p, &q) in points.iter().enumerate() {
        if seed.contains(&p) {
            continue;
        }
        let visible: Vec<bool> = faces
            .iter()
            .map(|f| orient3d(c3(points[f[0]]), c3(points[f[1]]), c3(points[f[2]]), c3(q)) < 0.0)
            .collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let edges: HashSet<(usize, usize)> = faces
            .iter()
            .zip(&visible)
            .filter(|(_, &v)| v)
            .flat_map(|(f, _)| [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])])
            .collect();
        let mut next: Vec<[usize; 3]> = faces
            .iter()
            .zip(&visible)
            .filter(|(_, &v)| !v)
            .map(|(f, _)| *f)
            .collect();
        for &(u, w) in &edges {
            if !edges.contains(&(w, u)) {
                next.push([u, w, p]);
            }
        }
        faces = next;
    }
    faces.retain(|f| orient2d(c2(points[f[0]]), c2(points[f[1]]), c2(points[f[2]])) < 0.0);
    faces.sort_unstable();
    faces
}

fn initial_simplex(points: &[[f64; 3]]) -> Option<[usize; 4]> {
    let a = 0;
    let b = (1..points.len()).find(|&i| points[i] != points[a])?;
    let c = (1..points.len()).find(|&i| {
        let (pa, pb, pc) = (points[a], points[b], points[i]);
        // collinear iff all three coordinate-plane projections are
        let o = |u: usize, w: usize| {
            orient2d(
                Coord { x: pa[u], y: pa[w] },
                Coord { x: pb[u], y: pb[w] },
                Coord { x: pc[u], y: pc[w] },
            )
        };
        o(0, 1) != 0.0 || o(1, 2) != 0.0 || o(2, 0) != 0.0
    })?;
    let d = (1..points.len())
        .find(|&i| orient3d(c3(points[a]), c3(points[b]), c3(points[c]), c3(points[i])) != 0.0)?;
    Some([a, b, c, d])
}

/// Plane through the three points, evaluated at `x`.
fn plane_value(p: [[f64; 3]; 3], x: [f64; 2]) -> f64 {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let l1 = ((x[0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (x[1] - p[0][1])) / det;
    let l2 = ((p[1][0] - p[0][0]) * (x[1] - p[0][1]) - (x[0] - p[0][0]) * (p[1][1] - p[0][1])) / det;
    (1.0 - l1 - l2) * p[0][2] + l1 * p[1][2] + l2 * p[2][2]
}

/// Convex envelope `Gamma(v)` of `-v^-` over `B_R`.
#[derive(Debug, Clone)]
pub struct ConvexEnvelope {
    center: [f64; 2],
    radius: f64,
    points: Vec<[f64; 3]>,
    facets: Vec<[usize; 3]>,
    nodal: Vec<f64>,
}

impl ConvexEnvelope {
    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Lifted cloud: negative nodes followed by the ring.
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// Lower facets as indices into [`points`](Self::points).
    pub fn facets(&self) -> &[[usize; 3]] {
        &self.facets
    }

    /// `Gamma(v)` at every mesh node.
    pub fn nodal(&self) -> &[f64] {
        &self.nodal
    }

    fn containing_facet(&self, x: [f64; 2]) -> Option<[usize; 3]> {
        let q = Coord { x: x[0], y: x[1] };
        self.facets.iter().copied().find(|f| {
            let p = f.map(|i| c2(self.points[i]));
            orient2d(p[0], p[1], q) <= 0.0 && orient2d(p[1], p[2], q) <= 0.0 && orient2d(p[2], p[0], q) <= 0.0
        })
    }

    /// `Gamma(v)(x)` for plotting; `None` outside the ring polygon.
    pub fn eval(&self, x: [f64; 2]) -> Option<f64> {
        if self.facets.is_empty() {
            let d2 = (x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2);
            return (d2 <= self.radius * self.radius).then_some(0.0);
        }
        self.containing_facet(x)
            .map(|f| plane_value(f.map(|i| self.points[i]), x))
    }
}

/// Builds the envelope with `ring_samples` points at height zero on the
/// circle of radius `radius` (default: inflated circumradius) about the
/// mesh centroid.
pub fn convex_envelope(v: &FeFunction<'_>, radius: Option<f64>, ring_samples: usize) -> Result<ConvexEnvelope> {
    let mesh = v.mesh();
    if ring_samples < 3 {
        return Err(Error::InvalidParameter(format!(
            "ring needs at least 3 samples, got {ring_samples}"
        )));
    }
    let center = mesh.centroid();
    let min_radius = mesh.radius_about(center);
    let radius = radius.unwrap_or(RING_INFLATION * min_radius);
    if !(radius > min_radius) {
        return Err(Error::InvalidParameter(format!(
            "ring radius {radius} does not enclose the domain (circumradius {min_radius})"
        )));
    }

    let mut points = Vec::new();
    let mut owner = Vec::new();
    for (z, &val) in v.values().iter().enumerate() {
        if val < 0.0 {
            let x = mesh.vertex(z);
            points.push([x[0], x[1], val]);
            owner.push(z);
        }
    }
    let negatives = points.len();
    for k in 0..ring_samples {
        let t = std::f64::consts::TAU * k as f64 / ring_samples as f64;
        points.push([center[0] + radius * t.cos(), center[1] + radius * t.sin(), 0.0]);
    }

    let facets = if negatives == 0 { Vec::new() } else { lower_hull(&points) };
    let mut env = ConvexEnvelope {
        center,
        radius,
        points,
        facets,
        nodal: vec![0.0; mesh.num_nodes()],
    };
    if negatives > 0 {
        let mut on_hull = vec![false; negatives];
        for f in &env.facets {
            for &i in f {
                if i < negatives {
                    on_hull[i] = true;
                }
            }
        }
        let mut nodal: Vec<f64> = (0..mesh.num_nodes())
            .into_par_iter()
            .map(|z| {
                let x = mesh.vertex(z);
                let height = v.value(z).min(0.0);
                let g = env
                    .containing_facet(x)
                    .map(|f| plane_value(f.map(|i| env.points[i]), x))
                    .unwrap_or(height);
                g.min(height)
            })
            .collect();
        for (i, &z) in owner.iter().enumerate() {
            if on_hull[i] {
                nodal[z] = env.points[i][2];
            }
        }
        env.nodal = nodal;
    }
    Ok(env)
}

/// Interior nodes where `v` touches its envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactSet {
    pub nodes: Vec<usize>,
    pub tol: f64,
}

impl ContactSet {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `1e-9 (1 + ||v||_inf)`.
pub fn default_contact_tol(v: &FeFunction<'_>) -> f64 {
    1e-9 * (1.0 + v.max_abs())
}

pub fn contact_set(v: &FeFunction<'_>, env: &ConvexEnvelope, tol: Option<f64>) -> ContactSet {
    let tol = tol.unwrap_or_else(|| default_contact_tol(v));
    let nodes = v
        .mesh()
        .interior_nodes()
        .iter()
        .copied()
        .filter(|&z| (env.nodal()[z] - v.value(z)).abs() <= tol && v.value(z) <= tol)
        .collect();
    ContactSet { nodes, tol }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbpRatio {
    pub sup_neg: f64,
    pub rhs: f64,
    /// `f64::INFINITY` when `rhs = 0 < sup_neg`.
    pub ratio: f64,
    pub contact_size: usize,
}

/// `sup v^- / (sum_{contact} |f_z|^2 |omega_z|)^{1/2}`.
pub fn abp_ratio(v: &FeFunction<'_>, loads: &[f64]) -> Result<AbpRatio> {
    let mesh = v.mesh();
    if loads.len() != mesh.num_nodes() {
        return Err(Error::InvalidParameter(format!(
            "expected {} load coefficients, got {}",
            mesh.num_nodes(),
            loads.len()
        )));
    }
    let env = convex_envelope(v, None, DEFAULT_RING_SAMPLES)?;
    let contact = contact_set(v, &env, None);
    abp_ratio_with(mesh, v, loads, &contact)
}

pub fn abp_ratio_with(mesh: &Mesh, v: &FeFunction<'_>, loads: &[f64], contact: &ContactSet) -> Result<AbpRatio> {
    let sup_neg = (-v.min_value()).max(0.0);
    let mut sum = 0.0;
    for &z in &contact.nodes {
        sum += loads[z] * loads[z] * mesh.star_volume(z)?;
    }
    let rhs = sum.sqrt();
    let ratio = if sup_neg == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        sup_neg / rhs
    };
    Ok(AbpRatio {
        sup_neg,
        rhs,
        ratio,
        contact_size: contact.len(),
    })
}

/// Largest nodal change of the envelope between two ring resolutions.
pub fn ring_sensitivity(v: &FeFunction<'_>, coarse: usize, fine: usize) -> Result<f64> {
    let a = convex_envelope(v, None, coarse)?;
    let b = convex_envelope(v, None, fine)?;
    Ok(a.nodal()
        .iter()
        .zip(b.nodal())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}
