use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Point3;
use crate::error::{invalid, Error, Result};
use crate::quadrature::subdivided;

/// Analytic obstacle shapes. The ellipsoid is the image of the unit sphere
/// under `diag(a, b, c)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    UnitSphere,
    Ellipsoid { a: f64, b: f64, c: f64 },
}

impl Shape {
    pub fn axes(&self) -> [f64; 3] {
        match *self {
            Shape::UnitSphere => [1.0; 3],
            Shape::Ellipsoid { a, b, c } => [a, b, c],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Shape::Ellipsoid { a, b, c } = *self {
            if !(a > 0.0 && b > 0.0 && c > 0.0) || !(a.is_finite() && b.is_finite() && c.is_finite()) {
                return invalid(format!("degenerate ellipsoid axes ({a}, {b}, {c})"));
            }
        }
        Ok(())
    }

    /// Value of the implicit equation, zero on the surface.
    pub fn implicit(&self, x: &Point3) -> f64 {
        let [a, b, c] = self.axes();
        (x[0] / a).powi(2) + (x[1] / b).powi(2) + (x[2] / c).powi(2) - 1.0
    }

    pub fn enclosing_radius(&self) -> f64 {
        self.axes().into_iter().fold(0.0, f64::max)
    }

    /// Closest surface point to an exterior point: the foot point is
    /// `a_i^2 x_i / (a_i^2 + l)` where `l >= 0` solves a monotone scalar
    /// equation, found by bisection.
    fn closest_point_outside(&self, x: &Point3) -> Point3 {
        let ax = self.axes();
        let g = |l: f64| (0..3).map(|i| (ax[i] * x[i] / (ax[i] * ax[i] + l)).powi(2)).sum::<f64>() - 1.0;
        let (mut lo, mut hi) = (0.0, 1.0);
        while g(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
        }
        let l = 0.5 * (lo + hi);
        Point3::from_fn(|i, _| ax[i] * ax[i] * x[i] / (ax[i] * ax[i] + l))
    }

    fn map_unit(&self, q: &Point3) -> Point3 {
        let [a, b, c] = self.axes();
        Point3::new(a * q[0], b * q[1], c * q[2])
    }

    fn normal_at_unit(&self, q: &Point3) -> Point3 {
        let [a, b, c] = self.axes();
        Point3::new(q[0] / a, q[1] / b, q[2] / c).normalize()
    }
}

/// A point on a curved mesh triangle, with the area element that goes with
/// an area-normalised reference weight.
#[derive(Clone, Copy, Debug)]
pub struct SurfacePoint {
    pub x: Point3,
    pub normal: Point3,
    pub jacobian: f64,
}

/// Quadrature discretisation of the obstacle surface.
///
/// Nodes are the vertices of a recursively subdivided icosahedron pushed
/// onto the surface; triangles are the curved images of the flat faces and
/// node weights are one third of the adjacent curved triangle areas.
/// Refinement appends nodes, so the nodes of level `k` are the first nodes
/// of level `k + 1`.
#[derive(Clone, Debug)]
pub struct BoundaryMesh {
    pub shape: Shape,
    pub level: u32,
    pub nodes: Vec<Point3>,
    pub normals: Vec<Point3>,
    pub weights: Vec<f64>,
    /// Preimages of the nodes on the unit sphere.
    pub params: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
    pub triangle_areas: Vec<f64>,
    pub node_triangles: Vec<Vec<usize>>,
    /// Longest edge (chord) length.
    pub h: f64,
}

pub fn build_boundary_mesh(shape: Shape, refinement_level: u32) -> Result<BoundaryMesh> {
    shape.validate()?;
    let (params, triangles) = icosphere(refinement_level);
    Ok(BoundaryMesh::from_parts(shape, refinement_level, params, triangles))
}

fn icosphere(level: u32) -> (Vec<Point3>, Vec<[usize; 3]>) {
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let mut pts: Vec<Point3> = [
        (-1.0, g, 0.0),
        (1.0, g, 0.0),
        (-1.0, -g, 0.0),
        (1.0, -g, 0.0),
        (0.0, -1.0, g),
        (0.0, 1.0, g),
        (0.0, -1.0, -g),
        (0.0, 1.0, -g),
        (g, 0.0, -1.0),
        (g, 0.0, 1.0),
        (-g, 0.0, -1.0),
        (-g, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Point3::new(x, y, z).normalize())
    .collect();
    let mut tris: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(tris.len() * 4);
        let mut midpoint = |a: usize, b: usize, pts: &mut Vec<Point3>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                pts.push((pts[a] + pts[b]).normalize());
                pts.len() - 1
            })
        };
        for &[a, b, c] in &tris {
            let ab = midpoint(a, b, &mut pts);
            let bc = midpoint(b, c, &mut pts);
            let ca = midpoint(c, a, &mut pts);
            next.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        tris = next;
    }
    (pts, tris)
}

impl BoundaryMesh {
    fn from_parts(shape: Shape, level: u32, params: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Self {
        let nodes: Vec<Point3> = params.iter().map(|q| shape.map_unit(q)).collect();
        let normals: Vec<Point3> = params.iter().map(|q| shape.normal_at_unit(q)).collect();
        let mut node_triangles = vec![Vec::new(); nodes.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                node_triangles[v].push(t);
            }
        }
        let mut mesh = BoundaryMesh {
            shape,
            level,
            nodes,
            normals,
            weights: Vec::new(),
            params,
            triangles,
            triangle_areas: Vec::new(),
            node_triangles,
            h: 0.0,
        };
        let rule = subdivided(1);
        mesh.triangle_areas = (0..mesh.triangles.len())
            .map(|t| rule.iter().map(|p| p.weight * mesh.surface_point(t, p.bary).jacobian).sum())
            .collect();
        let mut weights = vec![0.0; mesh.nodes.len()];
        for (tri, &area) in mesh.triangles.iter().zip(&mesh.triangle_areas) {
            for &v in tri {
                weights[v] += area / 3.0;
            }
        }
        mesh.weights = weights;
        mesh.h = mesh
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(a, b)| (mesh.nodes[a] - mesh.nodes[b]).norm())
            .fold(0.0, f64::max);
        mesh
    }

    /// The same mesh with node `new` taken from node `perm[new]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.len();
        let mut inverse = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            if old >= n || inverse[old] != usize::MAX {
                return invalid("not a permutation of the mesh nodes");
            }
            inverse[old] = new;
        }
        if perm.len() != n {
            return invalid("permutation size does not match the mesh");
        }
        let params = perm.iter().map(|&old| self.params[old]).collect();
        let triangles = self.triangles.iter().map(|t| t.map(|v| inverse[v])).collect();
        Ok(Self::from_parts(self.shape, self.level, params, triangles))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn enclosing_radius(&self) -> f64 {
        self.shape.enclosing_radius()
    }

    /// Maps barycentric coordinates on triangle `t` onto the curved surface.
    pub fn surface_point(&self, t: usize, bary: [f64; 3]) -> SurfacePoint {
        let [i, j, k] = self.triangles[t];
        let (v1, v2, v3) = (self.params[i], self.params[j], self.params[k]);
        let p = v1 * bary[0] + v2 * bary[1] + v3 * bary[2];
        let pn = p.norm();
        let q = p / pn;
        let proj = |d: Point3| -> Point3 {
            let tangential = (d - q * q.dot(&d)) / pn;
            self.shape.map_unit(&tangential)
        };
        let d2 = proj(v2 - v1);
        let d3 = proj(v3 - v1);
        SurfacePoint { x: self.shape.map_unit(&q), normal: self.shape.normal_at_unit(&q), jacobian: 0.5 * d2.cross(&d3).norm() }
    }

    /// Longest edge of triangle `t`.
    pub fn triangle_size(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let n = &self.nodes;
        (n[a] - n[b]).norm().max((n[b] - n[c]).norm()).max((n[c] - n[a]).norm())
    }

    pub fn triangle_centroid(&self, t: usize) -> Point3 {
        let [a, b, c] = self.triangles[t];
        (self.nodes[a] + self.nodes[b] + self.nodes[c]) / 3.0
    }

    /// Lower estimate of the distance from `x` to the curved triangle `t`:
    /// distance to the flat triangle minus the chordal sag.
    pub fn distance_to_triangle(&self, x: &Point3, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let d = point_triangle_distance(x, &self.nodes[a], &self.nodes[b], &self.nodes[c]);
        let sag = 0.125 * self.triangle_size(t).powi(2) / self.min_curvature_radius();
        (d - sag).max(0.0)
    }

    fn min_curvature_radius(&self) -> f64 {
        let [a, b, c] = self.shape.axes();
        let lo = a.min(b).min(c);
        let hi = a.max(b).max(c);
        lo * lo / hi
    }

    /// Distance from `x` to the analytic surface. Points inside the obstacle
    /// fall back to the distance to the flat triangles.
    pub fn distance_to_surface(&self, x: &Point3) -> f64 {
        if self.shape.implicit(x) < 0.0 {
            return (0..self.triangles.len())
                .map(|t| {
                    let [a, b, c] = self.triangles[t];
                    point_triangle_distance(x, &self.nodes[a], &self.nodes[b], &self.nodes[c])
                })
                .fold(f64::INFINITY, f64::min);
        }
        (x - self.shape.closest_point_outside(x)).norm()
    }

    /// Writes the mesh as plain text.
    ///
    /// ```text
    /// # oseen boundary mesh v1
    /// shape unit-sphere | shape ellipsoid <a> <b> <c>
    /// level <k>
    /// nodes <N>
    /// <x1> <x2> <x3> <n1> <n2> <n3> <weight> <p1> <p2> <p3>   (N lines)
    /// triangles <M>
    /// <i> <j> <k>                                             (M lines)
    /// ```
    ///
    /// Reals are printed in shortest round-trip form, so a write/read cycle
    /// is bit-exact. `p` is the unit-sphere preimage of the node.
    pub fn write_text(&self, mut w: impl Write) -> Result<()> {
        let mut s = String::new();
        s.push_str("# oseen boundary mesh v1\n");
        match self.shape {
            Shape::UnitSphere => s.push_str("shape unit-sphere\n"),
            Shape::Ellipsoid { a, b, c } => {
                let _ = writeln!(s, "shape ellipsoid {a:e} {b:e} {c:e}");
            }
        }
        let _ = writeln!(s, "level {}", self.level);
        let _ = writeln!(s, "nodes {}", self.len());
        for i in 0..self.len() {
            let (x, n, p) = (self.nodes[i], self.normals[i], self.params[i]);
            let _ = writeln!(
                s,
                "{:e} {:e} {:e} {:e} {:e} {:e} {:e} {:e} {:e} {:e}",
                x[0], x[1], x[2], n[0], n[1], n[2], self.weights[i], p[0], p[1], p[2]
            );
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_text(r: impl BufRead) -> Result<Self> {
        let mut lines =
            r.lines().enumerate().filter(|(_, l)| l.as_ref().map(|s| !s.trim_start().starts_with('#')).unwrap_or(true));
        let mut next = |what: &str| -> Result<(usize, Vec<String>)> {
            let (n, line) =
                lines.next().ok_or_else(|| Error::Parse { line: 0, msg: format!("unexpected end of file, expected {what}") })?;
            Ok((n + 1, line?.split_whitespace().map(str::to_owned).collect()))
        };
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let num =
            |line: usize, s: &str| -> Result<f64> { s.parse::<f64>().map_err(|e| perr(line, format!("bad real {s:?}: {e}"))) };
        let int = |line: usize, s: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|e| perr(line, format!("bad integer {s:?}: {e}")))
        };

        let (ln, f) = next("shape")?;
        let shape = match f.as_slice() {
            [k, s] if k == "shape" && s == "unit-sphere" => Shape::UnitSphere,
            [k, s, a, b, c] if k == "shape" && s == "ellipsoid" => {
                Shape::Ellipsoid { a: num(ln, a)?, b: num(ln, b)?, c: num(ln, c)? }
            }
            _ => return Err(perr(ln, "expected shape line".into())),
        };
        let (ln, f) = next("level")?;
        let level = match f.as_slice() {
            [k, v] if k == "level" => int(ln, v)? as u32,
            _ => return Err(perr(ln, "expected level line".into())),
        };
        let (ln, f) = next("nodes")?;
        let n = match f.as_slice() {
            [k, v] if k == "nodes" => int(ln, v)?,
            _ => return Err(perr(ln, "expected nodes line".into())),
        };
        let (mut nodes, mut normals, mut weights, mut params) =
            (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            let (ln, f) = next("node")?;
            if f.len() != 10 {
                return Err(perr(ln, format!("node line needs 10 fields, found {}", f.len())));
            }
            let v: Vec<f64> = f.iter().map(|s| num(ln, s)).collect::<Result<_>>()?;
            nodes.push(Point3::new(v[0], v[1], v[2]));
            normals.push(Point3::new(v[3], v[4], v[5]));
            weights.push(v[6]);
            params.push(Point3::new(v[7], v[8], v[9]));
        }
        let (ln, f) = next("triangles")?;
        let m = match f.as_slice() {
            [k, v] if k == "triangles" => int(ln, v)?,
            _ => return Err(perr(ln, "expected triangles line".into())),
        };
        let mut triangles = Vec::with_capacity(m);
        for _ in 0..m {
            let (ln, f) = next("triangle")?;
            if f.len() != 3 {
                return Err(perr(ln, "triangle line needs 3 indices".into()));
            }
            let t = [int(ln, &f[0])?, int(ln, &f[1])?, int(ln, &f[2])?];
            if t.iter().any(|&i| i >= n) {
                return Err(perr(ln, "triangle index out of range".into()));
            }
            triangles.push(t);
        }
        let mut mesh = BoundaryMesh::from_parts(shape, level, params, triangles);
        // stored values take precedence so that replay is exact
        mesh.nodes = nodes;
        mesh.normals = normals;
        mesh.weights = weights;
        Ok(mesh)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_text(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_text(std::io::BufReader::new(f))
    }
}

fn point_triangle_distance(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> f64 {
    // Ericson, closest point on triangle
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (p - (a + ab * v)).norm();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (p - (a + ac * w)).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (p - (a + ab * v + ac * w)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_area_converges() {
        let mut prev = f64::INFINITY;
        for level in 0..=3 {
            let m = build_boundary_mesh(Shape::UnitSphere, level).unwrap();
            let err = (m.area() - 4.0 * PI).abs() / (4.0 * PI);
            if level == 0 {
                assert!(err < 0.02, "level 0 area error {err}");
            }
            if level == 3 {
                assert!(err < 1e-4, "level 3 area error {err}");
            }
            assert!(err < prev || err < 1e-13, "area error not decreasing at level {level}");
            prev = err;
        }
    }

    #[test]
    fn node_count_grows_fourfold() {
        let counts: Vec<usize> = (0..4).map(|l| build_boundary_mesh(Shape::UnitSphere, l).unwrap().len()).collect();
        assert_eq!(counts, vec![12, 42, 162, 642]);
    }

    #[test]
    fn invariants_hold_on_ellipsoid() {
        let shape = Shape::Ellipsoid { a: 1.5, b: 1.0, c: 0.75 };
        let m = build_boundary_mesh(shape, 2).unwrap();
        for i in 0..m.len() {
            assert!((m.normals[i].norm() - 1.0).abs() < 1e-12);
            assert!(shape.implicit(&m.nodes[i]).abs() < 1e-12);
            assert!(m.weights[i] > 0.0);
            assert!(m.nodes[i].norm() <= m.enclosing_radius() + 1e-12);
            // outward: normal points away from the centre
            assert!(m.normals[i].dot(&m.nodes[i]) > 0.0);
        }
    }

    #[test]
    fn unit_ellipsoid_matches_sphere() {
        let s = build_boundary_mesh(Shape::UnitSphere, 2).unwrap();
        let e = build_boundary_mesh(Shape::Ellipsoid { a: 1.0, b: 1.0, c: 1.0 }, 2).unwrap();
        assert_eq!(s.nodes, e.nodes);
    }

    #[test]
    fn degenerate_axes_rejected() {
        assert!(build_boundary_mesh(Shape::Ellipsoid { a: 1.0, b: 0.0, c: 1.0 }, 0).is_err());
        assert!(build_boundary_mesh(Shape::Ellipsoid { a: -1.0, b: 1.0, c: 1.0 }, 0).is_err());
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let m = build_boundary_mesh(Shape::Ellipsoid { a: 1.3, b: 0.9, c: 1.1 }, 1).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = BoundaryMesh::read_text(&buf[..]).unwrap();
        assert_eq!(back.nodes, m.nodes);
        assert_eq!(back.normals, m.normals);
        assert_eq!(back.weights, m.weights);
        assert_eq!(back.triangles, m.triangles);
        let mut buf2 = Vec::new();
        back.write_text(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn distance_queries() {
        let m = build_boundary_mesh(Shape::UnitSphere, 2).unwrap();
        let d = m.distance_to_surface(&Point3::new(0.0, 0.0, 3.0));
        assert!((d - 2.0).abs() < 1e-12, "{d}");
        let e = build_boundary_mesh(Shape::Ellipsoid { a: 2.0, b: 1.0, c: 1.0 }, 1).unwrap();
        assert!((e.distance_to_surface(&Point3::new(5.0, 0.0, 0.0)) - 3.0).abs() < 1e-12);
        assert!((e.distance_to_surface(&Point3::new(0.0, 0.0, 4.0)) - 3.0).abs() < 1e-12);
        assert!(m.distance_to_surface(&m.nodes[5]) < 1e-12);
    }
}
