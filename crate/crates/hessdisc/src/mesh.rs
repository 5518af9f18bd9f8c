//! Polytopal meshes: structured generators, a text loader, refinement and
//! the orthogonality validation needed by the finite volume scheme.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{HessdiscError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    UnitSquare,
    /// (-1,1)^2 minus [0,1) x (-1,0]; re-entrant corner at the origin.
    LShape,
}

impl Domain {
    pub fn area(&self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::LShape => 3.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
    pub on_boundary: bool,
}

#[derive(Clone, Debug)]
pub struct Face {
    pub vertices: [usize; 2],
    /// Adjacent cells; the unit normal points away from `left`.
    pub left: usize,
    pub right: Option<usize>,
    pub measure: f64,
    pub center: [f64; 2],
    pub normal: [f64; 2],
    /// Orthogonal center distance: sum over adjacent cells of the signed
    /// distance from x_K to the face, taken along the outward normal.
    pub d_sigma: f64,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct Cell {
    /// Counter-clockwise vertex loop.
    pub vertices: Vec<usize>,
    pub faces: Vec<usize>,
    pub measure: f64,
    /// Center of mass.
    pub centroid: [f64; 2],
    /// Finite volume center x_K (centroid, or circumcenter for loaded
    /// triangles).
    pub center: [f64; 2],
    pub diameter: f64,
    /// Radius of the largest ball around the centroid inside the cell.
    pub rho: f64,
}

impl Cell {
    pub fn is_triangle(&self) -> bool {
        self.vertices.len() == 3
    }
}

#[derive(Clone, Debug)]
pub struct PolytopalMesh {
    pub vertices: Vec<Vertex>,
    pub faces: Vec<Face>,
    pub cells: Vec<Cell>,
    /// max over cells of the diameter.
    pub h: f64,
    /// max over cells of diameter / rho.
    pub eta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CenterRule {
    Centroid,
    /// Circumcenter for triangles, centroid otherwise (loader default).
    CircumcenterForTriangles,
}

impl PolytopalMesh {
    /// Assembles all derived quantities from vertex coordinates and cell
    /// vertex loops. Cells are re-oriented counter-clockwise if needed.
    pub fn build(
        coords: Vec<[f64; 2]>,
        cell_vertices: Vec<Vec<usize>>,
        center_rule: CenterRule,
    ) -> Result<Self> {
        let nv = coords.len();
        for (ci, cv) in cell_vertices.iter().enumerate() {
            if cv.len() < 3 {
                return Err(HessdiscError::MeshInvalid(format!(
                    "cell {ci} has fewer than 3 vertices"
                )));
            }
            for &v in cv {
                if v >= nv {
                    return Err(HessdiscError::MeshInvalid(format!(
                        "cell {ci} references vertex {v} out of {nv}"
                    )));
                }
            }
        }

        let mut cells: Vec<Cell> = Vec::with_capacity(cell_vertices.len());
        for mut cv in cell_vertices {
            let signed = shoelace(&coords, &cv);
            if signed < 0.0 {
                cv.reverse();
            }
            let measure = signed.abs();
            if measure <= 0.0 {
                return Err(HessdiscError::MeshInvalid("zero-area cell".into()));
            }
            let centroid = polygon_centroid(&coords, &cv, measure);
            let diameter = polygon_diameter(&coords, &cv);
            let rho = polygon_inradius_at(&coords, &cv, centroid);
            let center = match center_rule {
                CenterRule::CircumcenterForTriangles if cv.len() == 3 => {
                    circumcenter(coords[cv[0]], coords[cv[1]], coords[cv[2]])
                }
                _ => centroid,
            };
            cells.push(Cell {
                vertices: cv,
                faces: Vec::new(),
                measure,
                centroid,
                center,
                diameter,
                rho,
            });
        }

        // Edge matching: an edge key is the sorted vertex pair.
        let mut edge_map: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut faces: Vec<Face> = Vec::new();
        for (ci, cell) in cells.iter().enumerate() {
            let k = cell.vertices.len();
            for e in 0..k {
                let (a, b) = (cell.vertices[e], cell.vertices[(e + 1) % k]);
                let key = (a.min(b), a.max(b));
                match edge_map.get(&key) {
                    None => {
                        let (pa, pb) = (coords[a], coords[b]);
                        let dx = pb[0] - pa[0];
                        let dy = pb[1] - pa[1];
                        let len = dx.hypot(dy);
                        // Cell loop is ccw, so (dy, -dx) points outward.
                        faces.push(Face {
                            vertices: [a, b],
                            left: ci,
                            right: None,
                            measure: len,
                            center: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
                            normal: [dy / len, -dx / len],
                            d_sigma: 0.0,
                        });
                        edge_map.insert(key, faces.len() - 1);
                    }
                    Some(&fi) => {
                        if faces[fi].right.is_some() {
                            return Err(HessdiscError::MeshInvalid(format!(
                                "edge ({a}, {b}) shared by more than two cells"
                            )));
                        }
                        faces[fi].right = Some(ci);
                    }
                }
            }
        }

        let mut vertices: Vec<Vertex> = coords
            .into_iter()
            .map(|[x, y]| Vertex {
                x,
                y,
                on_boundary: false,
            })
            .collect();
        for f in &faces {
            if f.is_boundary() {
                vertices[f.vertices[0]].on_boundary = true;
                vertices[f.vertices[1]].on_boundary = true;
            }
        }

        for (fi, f) in faces.iter().enumerate() {
            cells[f.left].faces.push(fi);
            if let Some(r) = f.right {
                cells[r].faces.push(fi);
            }
        }

        // Signed orthogonal distances from the FV centers.
        for f in faces.iter_mut() {
            let dl = signed_face_distance(f, &cells[f.left], 1.0);
            f.d_sigma = match f.right {
                Some(r) => dl + signed_face_distance(f, &cells[r], -1.0),
                None => dl,
            };
        }

        let h = cells.iter().map(|c| c.diameter).fold(0.0, f64::max);
        let eta = cells.iter().map(|c| c.diameter / c.rho).fold(0.0, f64::max);
        Ok(PolytopalMesh {
            vertices,
            faces,
            cells,
            h,
            eta,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.measure).sum()
    }

    /// Outward unit normal of face `fi` as seen from cell `ci`.
    pub fn outward_normal(&self, fi: usize, ci: usize) -> [f64; 2] {
        let f = &self.faces[fi];
        let s = if f.left == ci { 1.0 } else { -1.0 };
        [s * f.normal[0], s * f.normal[1]]
    }

    /// The cell on the other side of face `fi`, if any.
    pub fn neighbor(&self, fi: usize, ci: usize) -> Option<usize> {
        let f = &self.faces[fi];
        if f.left == ci {
            f.right
        } else {
            Some(f.left)
        }
    }

    /// True if the cell shares at least one vertex with the boundary.
    pub fn cell_touches_boundary(&self, ci: usize) -> bool {
        self.cells[ci]
            .vertices
            .iter()
            .any(|&v| self.vertices[v].on_boundary)
    }

    pub fn all_rectangles(&self) -> bool {
        self.cells.iter().all(|c| {
            c.vertices.len() == 4 && {
                let p: Vec<[f64; 2]> = c.vertices.iter().map(|&v| self.vertex_xy(v)).collect();
                let axis = |a: [f64; 2], b: [f64; 2]| {
                    (a[0] - b[0]).abs() < 1e-12 * self.h || (a[1] - b[1]).abs() < 1e-12 * self.h
                };
                (0..4).all(|i| axis(p[i], p[(i + 1) % 4]))
            }
        })
    }

    pub fn all_triangles(&self) -> bool {
        self.cells.iter().all(Cell::is_triangle)
    }

    pub fn vertex_xy(&self, v: usize) -> [f64; 2] {
        [self.vertices[v].x, self.vertices[v].y]
    }

    /// Orthogonality report for the two-point flux scheme.
    pub fn validate_delta_adapted(&self) -> ValidationReport {
        let tol = 1e-10 * self.h;
        let mut entries = Vec::with_capacity(self.faces.len());
        for (fi, f) in self.faces.iter().enumerate() {
            let defect = match f.right {
                Some(r) => {
                    let xk = self.cells[f.left].center;
                    let xl = self.cells[r].center;
                    let t = [-f.normal[1], f.normal[0]];
                    ((xl[0] - xk[0]) * t[0] + (xl[1] - xk[1]) * t[1]).abs()
                }
                None => 0.0,
            };
            entries.push(FaceCheck {
                face: fi,
                orthogonality_defect: defect,
                d_sigma: f.d_sigma,
            });
        }
        let passes = entries
            .iter()
            .all(|e| e.orthogonality_defect <= tol && e.d_sigma >= tol);
        ValidationReport { entries, passes }
    }
}

#[derive(Clone, Debug)]
pub struct FaceCheck {
    pub face: usize,
    pub orthogonality_defect: f64,
    pub d_sigma: f64,
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub entries: Vec<FaceCheck>,
    pub passes: bool,
}

impl ValidationReport {
    pub fn worst(&self) -> String {
        let wd = self
            .entries
            .iter()
            .max_by(|a, b| a.orthogonality_defect.total_cmp(&b.orthogonality_defect));
        let sd = self.entries.iter().min_by(|a, b| a.d_sigma.total_cmp(&b.d_sigma));
        format!(
            "worst orthogonality defect {:.3e} (face {}), smallest d_sigma {:.3e} (face {})",
            wd.map(|e| e.orthogonality_defect).unwrap_or(0.0),
            wd.map(|e| e.face).unwrap_or(0),
            sd.map(|e| e.d_sigma).unwrap_or(0.0),
            sd.map(|e| e.face).unwrap_or(0),
        )
    }
}

fn signed_face_distance(f: &Face, cell: &Cell, orientation: f64) -> f64 {
    // Positive when the center lies on the interior side of the face.
    let n = [orientation * f.normal[0], orientation * f.normal[1]];
    (f.center[0] - cell.center[0]) * n[0] + (f.center[1] - cell.center[1]) * n[1]
}

fn shoelace(coords: &[[f64; 2]], loop_: &[usize]) -> f64 {
    let k = loop_.len();
    let mut s = 0.0;
    for i in 0..k {
        let a = coords[loop_[i]];
        let b = coords[loop_[(i + 1) % k]];
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}

fn polygon_centroid(coords: &[[f64; 2]], loop_: &[usize], area: f64) -> [f64; 2] {
    let k = loop_.len();
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..k {
        let a = coords[loop_[i]];
        let b = coords[loop_[(i + 1) % k]];
        let w = a[0] * b[1] - b[0] * a[1];
        cx += (a[0] + b[0]) * w;
        cy += (a[1] + b[1]) * w;
    }
    [cx / (6.0 * area), cy / (6.0 * area)]
}

fn polygon_diameter(coords: &[[f64; 2]], loop_: &[usize]) -> f64 {
    let mut d = 0.0f64;
    for (i, &a) in loop_.iter().enumerate() {
        for &b in &loop_[i + 1..] {
            let (pa, pb) = (coords[a], coords[b]);
            d = d.max((pa[0] - pb[0]).hypot(pa[1] - pb[1]));
        }
    }
    d
}

fn polygon_inradius_at(coords: &[[f64; 2]], loop_: &[usize], p: [f64; 2]) -> f64 {
    let k = loop_.len();
    let mut r = f64::INFINITY;
    for i in 0..k {
        let a = coords[loop_[i]];
        let b = coords[loop_[(i + 1) % k]];
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = dx.hypot(dy);
        let dist = ((p[0] - a[0]) * dy - (p[1] - a[1]) * dx).abs() / len;
        r = r.min(dist);
    }
    r
}

pub fn circumcenter(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> [f64; 2] {
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    let a2 = a[0] * a[0] + a[1] * a[1];
    let b2 = b[0] * b[0] + b[1] * b[1];
    let c2 = c[0] * c[0] + c[1] * c[1];
    [
        (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d,
        (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d,
    ]
}

// ---------------------------------------------------------------------------
// Structured generators
// ---------------------------------------------------------------------------

fn square_lattice(n: usize, domain: Domain) -> (Vec<[f64; 2]>, BTreeMap<(i64, i64), usize>, Vec<(i64, i64)>) {
    // Grid indices run over the bounding box; L-shape drops the fourth
    // quadrant cells.
    let (i0, i1) = match domain {
        Domain::UnitSquare => (0i64, n as i64),
        Domain::LShape => (-(n as i64), n as i64),
    };
    let keep_cell = |ix: i64, iy: i64| match domain {
        Domain::UnitSquare => true,
        Domain::LShape => !(ix >= 0 && iy < 0),
    };
    let mut cell_ids = Vec::new();
    for iy in i0..i1 {
        for ix in i0..i1 {
            if keep_cell(ix, iy) {
                cell_ids.push((ix, iy));
            }
        }
    }
    let mut vmap = BTreeMap::new();
    let mut coords = Vec::new();
    let hs = 1.0 / n as f64;
    for &(ix, iy) in &cell_ids {
        for (dx, dy) in [(0, 0), (1, 0), (1, 1), (0, 1)] {
            vmap.entry((ix + dx, iy + dy)).or_insert_with(|| {
                coords.push([(ix + dx) as f64 * hs, (iy + dy) as f64 * hs]);
                coords.len() - 1
            });
        }
    }
    (coords, vmap, cell_ids)
}

/// Uniform mesh of axis-aligned squares of side 1/n.
pub fn gen_square_mesh(n: usize, domain: Domain) -> Result<PolytopalMesh> {
    if n < 2 {
        return Err(HessdiscError::InvalidArgument(
            "square mesh needs n >= 2".into(),
        ));
    }
    let (coords, vmap, cell_ids) = square_lattice(n, domain);
    let cells = cell_ids
        .iter()
        .map(|&(ix, iy)| {
            [(0, 0), (1, 0), (1, 1), (0, 1)]
                .iter()
                .map(|&(dx, dy)| vmap[&(ix + dx, iy + dy)])
                .collect()
        })
        .collect();
    PolytopalMesh::build(coords, cells, CenterRule::Centroid)
}

/// Structured right-triangle mesh: each lattice square split along the
/// diagonal from its lower-left to its upper-right corner.
pub fn gen_triangular_mesh(n: usize, domain: Domain) -> Result<PolytopalMesh> {
    if n < 2 {
        return Err(HessdiscError::InvalidArgument(
            "triangular mesh needs n >= 2".into(),
        ));
    }
    let (coords, vmap, cell_ids) = square_lattice(n, domain);
    let mut cells = Vec::with_capacity(2 * cell_ids.len());
    for &(ix, iy) in &cell_ids {
        let v = |dx: i64, dy: i64| vmap[&(ix + dx, iy + dy)];
        cells.push(vec![v(0, 0), v(1, 0), v(1, 1)]);
        cells.push(vec![v(0, 0), v(1, 1), v(0, 1)]);
    }
    PolytopalMesh::build(coords, cells, CenterRule::Centroid)
}

// ---------------------------------------------------------------------------
// Text loader
// ---------------------------------------------------------------------------

/// Loads the whitespace-separated mesh format:
/// header `cells nv nf nc`, then `v x y`, `f v1 v2 cellL cellR`
/// (cellR = -1 on the boundary) and `c v1 ... vk` lines, 0-based.
/// Triangles get their FV center at the circumcenter.
pub fn load_mesh(path: &std::path::Path) -> Result<PolytopalMesh> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

pub fn parse_mesh(text: &str) -> Result<PolytopalMesh> {
    let mut coords: Vec<[f64; 2]> = Vec::new();
    let mut file_faces: Vec<(usize, usize, i64, i64)> = Vec::new();
    let mut cell_vertices: Vec<Vec<usize>> = Vec::new();
    let mut header: Option<(usize, usize, usize)> = None;

    let perr = |line: usize, msg: &str| HessdiscError::MeshParse {
        line,
        msg: msg.to_string(),
    };

    for (li, raw) in text.lines().enumerate() {
        let line = li + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() || toks[0].starts_with('#') {
            continue;
        }
        match toks[0] {
            "cells" => {
                if toks.len() != 4 {
                    return Err(perr(line, "header must be 'cells nv nf nc'"));
                }
                let nums: Vec<usize> = toks[1..]
                    .iter()
                    .map(|t| t.parse().map_err(|_| perr(line, "bad header count")))
                    .collect::<Result<_>>()?;
                header = Some((nums[0], nums[1], nums[2]));
            }
            "v" => {
                if toks.len() != 3 {
                    return Err(perr(line, "vertex line must be 'v x y'"));
                }
                let x = toks[1].parse().map_err(|_| perr(line, "bad x coordinate"))?;
                let y = toks[2].parse().map_err(|_| perr(line, "bad y coordinate"))?;
                coords.push([x, y]);
            }
            "f" => {
                if toks.len() != 5 {
                    return Err(perr(line, "face line must be 'f v1 v2 cellL cellR'"));
                }
                let v1 = toks[1].parse().map_err(|_| perr(line, "bad face vertex"))?;
                let v2 = toks[2].parse().map_err(|_| perr(line, "bad face vertex"))?;
                let cl = toks[3].parse().map_err(|_| perr(line, "bad left cell"))?;
                let cr = toks[4].parse().map_err(|_| perr(line, "bad right cell"))?;
                file_faces.push((v1, v2, cl, cr));
            }
            "c" => {
                if toks.len() < 4 {
                    return Err(perr(line, "cell line needs at least 3 vertices"));
                }
                let vs: Vec<usize> = toks[1..]
                    .iter()
                    .map(|t| t.parse().map_err(|_| perr(line, "bad cell vertex")))
                    .collect::<Result<_>>()?;
                cell_vertices.push(vs);
            }
            other => {
                return Err(perr(line, &format!("unknown record '{other}'")));
            }
        }
    }

    let (nv, nf, nc) =
        header.ok_or_else(|| perr(1, "missing 'cells nv nf nc' header"))?;
    if coords.len() != nv || cell_vertices.len() != nc || file_faces.len() != nf {
        return Err(HessdiscError::MeshInvalid(format!(
            "header promises {nv} vertices / {nf} faces / {nc} cells, file has {} / {} / {}",
            coords.len(),
            file_faces.len(),
            cell_vertices.len()
        )));
    }

    let mesh = PolytopalMesh::build(coords, cell_vertices, CenterRule::CircumcenterForTriangles)?;
    if mesh.faces.len() != nf {
        return Err(HessdiscError::MeshInvalid(format!(
            "cell connectivity implies {} faces, file declares {nf}",
            mesh.faces.len()
        )));
    }
    // Cross-check declared face adjacency against the rebuilt topology.
    for &(v1, v2, cl, cr) in &file_faces {
        let key = (v1.min(v2), v1.max(v2));
        let found = mesh.faces.iter().find(|f| {
            (f.vertices[0].min(f.vertices[1]), f.vertices[0].max(f.vertices[1])) == key
        });
        let f = found.ok_or_else(|| {
            HessdiscError::MeshInvalid(format!("declared face ({v1}, {v2}) not an edge of any cell"))
        })?;
        let mut declared = [cl, cr];
        declared.sort_unstable();
        let mut actual = [f.left as i64, f.right.map(|r| r as i64).unwrap_or(-1)];
        actual.sort_unstable();
        if declared != actual {
            return Err(HessdiscError::MeshInvalid(format!(
                "face ({v1}, {v2}): declared cells {declared:?} but connectivity gives {actual:?}"
            )));
        }
    }
    Ok(mesh)
}

/// Writes a mesh back out in the loader's text format.
pub fn format_mesh(mesh: &PolytopalMesh) -> String {
    let mut s = format!(
        "cells {} {} {}\n",
        mesh.vertices.len(),
        mesh.faces.len(),
        mesh.cells.len()
    );
    for v in &mesh.vertices {
        s.push_str(&format!("v {:.17} {:.17}\n", v.x, v.y));
    }
    for f in &mesh.faces {
        s.push_str(&format!(
            "f {} {} {} {}\n",
            f.vertices[0],
            f.vertices[1],
            f.left,
            f.right.map(|r| r as i64).unwrap_or(-1)
        ));
    }
    for c in &mesh.cells {
        s.push('c');
        for &v in &c.vertices {
            s.push_str(&format!(" {v}"));
        }
        s.push('\n');
    }
    s
}

// ---------------------------------------------------------------------------
// Mesh families and refinement
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum MeshFamily {
    UniformSquare { domain: Domain, n: usize },
    TriangularStructured { domain: Domain, n: usize },
    /// Pre-generated mesh files, one per level.
    TriangularFile { paths: Vec<PathBuf>, index: usize },
}

#[derive(Clone, Debug)]
pub struct MeshFamilyDescriptor {
    pub family: MeshFamily,
    pub level: usize,
}

impl MeshFamilyDescriptor {
    pub fn squares(domain: Domain, n: usize) -> Self {
        MeshFamilyDescriptor {
            family: MeshFamily::UniformSquare { domain, n },
            level: 0,
        }
    }

    pub fn triangles(domain: Domain, n: usize) -> Self {
        MeshFamilyDescriptor {
            family: MeshFamily::TriangularStructured { domain, n },
            level: 0,
        }
    }

    pub fn from_files(paths: Vec<PathBuf>) -> Self {
        MeshFamilyDescriptor {
            family: MeshFamily::TriangularFile { paths, index: 0 },
            level: 0,
        }
    }

    pub fn build(&self) -> Result<PolytopalMesh> {
        match &self.family {
            MeshFamily::UniformSquare { domain, n } => gen_square_mesh(*n, *domain),
            MeshFamily::TriangularStructured { domain, n } => gen_triangular_mesh(*n, *domain),
            MeshFamily::TriangularFile { paths, index } => {
                let path = paths.get(*index).ok_or_else(|| {
                    HessdiscError::RefineUnsupported(format!(
                        "no mesh file for level index {index}"
                    ))
                })?;
                load_mesh(path)
            }
        }
    }

    /// The next refinement level: n doubles for structured families, the
    /// next file is taken for file families.
    pub fn refine(&self) -> Result<Self> {
        let family = match &self.family {
            MeshFamily::UniformSquare { domain, n } => MeshFamily::UniformSquare {
                domain: *domain,
                n: n * 2,
            },
            MeshFamily::TriangularStructured { domain, n } => MeshFamily::TriangularStructured {
                domain: *domain,
                n: n * 2,
            },
            MeshFamily::TriangularFile { paths, index } => {
                if index + 1 >= paths.len() {
                    return Err(HessdiscError::RefineUnsupported(format!(
                        "no next-level file after index {index}"
                    )));
                }
                MeshFamily::TriangularFile {
                    paths: paths.clone(),
                    index: index + 1,
                }
            }
        };
        Ok(MeshFamilyDescriptor {
            family,
            level: self.level + 1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn square_mesh_n2_geometry() {
        let m = gen_square_mesh(2, Domain::UnitSquare).unwrap();
        assert_eq!(m.n_cells(), 4);
        for c in &m.cells {
            assert_relative_eq!(c.measure, 0.25, max_relative = 1e-14);
        }
        assert_relative_eq!(m.h, std::f64::consts::SQRT_2 / 2.0, max_relative = 1e-12);
        assert_relative_eq!(m.total_area(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn lshape_n2_has_12_cells() {
        let m = gen_square_mesh(2, Domain::LShape).unwrap();
        assert_eq!(m.n_cells(), 12);
        assert_relative_eq!(m.total_area(), 3.0, max_relative = 1e-12);
        // The re-entrant quadrant stays uncovered.
        assert!(m
            .cells
            .iter()
            .all(|c| !(c.centroid[0] > 0.0 && c.centroid[1] < 0.0)));
    }

    #[test]
    fn square_mesh_face_distances() {
        let m = gen_square_mesh(4, Domain::UnitSquare).unwrap();
        for f in &m.faces {
            if f.is_boundary() {
                assert_relative_eq!(f.d_sigma, 0.125, max_relative = 1e-12);
            } else {
                assert_relative_eq!(f.d_sigma, 0.25, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn triangular_mesh_counts() {
        let m = gen_triangular_mesh(2, Domain::UnitSquare).unwrap();
        assert_eq!(m.n_cells(), 8);
        for c in &m.cells {
            assert_relative_eq!(c.measure, 0.125, max_relative = 1e-14);
        }
        assert_eq!(m.vertices.len(), 9); // (n+1)^2

        let l = gen_triangular_mesh(3, Domain::LShape).unwrap();
        assert_relative_eq!(l.total_area(), 3.0, max_relative = 1e-12);
    }

    #[test]
    fn closed_surface_identity() {
        for m in [
            gen_square_mesh(3, Domain::UnitSquare).unwrap(),
            gen_triangular_mesh(3, Domain::LShape).unwrap(),
        ] {
            for (ci, c) in m.cells.iter().enumerate() {
                let mut s = [0.0, 0.0];
                for &fi in &c.faces {
                    let n = m.outward_normal(fi, ci);
                    s[0] += m.faces[fi].measure * n[0];
                    s[1] += m.faces[fi].measure * n[1];
                }
                assert!(s[0].abs() < 1e-10 && s[1].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn interior_face_distance_additivity() {
        let m = gen_triangular_mesh(4, Domain::UnitSquare).unwrap();
        for f in &m.faces {
            if let Some(r) = f.right {
                let dist = |c: &Cell| {
                    let t = [-f.normal[1], f.normal[0]];
                    let dx = f.center[0] - c.center[0];
                    let dy = f.center[1] - c.center[1];
                    // orthogonal distance = component normal to tangent
                    (dx * f.normal[0] + dy * f.normal[1]).hypot(0.0).max(
                        ((dx * t[0] + dy * t[1]) * 0.0).abs(),
                    )
                };
                let dl = dist(&m.cells[f.left]).abs();
                let dr = dist(&m.cells[r]).abs();
                assert_relative_eq!(f.d_sigma, dl + dr, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn refinement_halves_h_and_preserves_eta() {
        let d = MeshFamilyDescriptor::squares(Domain::UnitSquare, 2);
        let m0 = d.build().unwrap();
        let d1 = d.refine().unwrap();
        let m1 = d1.build().unwrap();
        assert!((m1.h / m0.h - 0.5).abs() < 0.05);
        assert!(m1.eta / m0.eta < 1.01 && m0.eta / m1.eta < 1.01);
        // Paper's square-family h sequence.
        let hs = [0.353553, 0.176777, 0.088388];
        let mut desc = MeshFamilyDescriptor::squares(Domain::UnitSquare, 4);
        for &h in &hs {
            let m = desc.build().unwrap();
            assert!((m.h - h).abs() < 1e-5, "h = {} vs {}", m.h, h);
            desc = desc.refine().unwrap();
        }
    }

    #[test]
    fn interior_normals_are_opposite() {
        let m = gen_triangular_mesh(3, Domain::UnitSquare).unwrap();
        for (fi, f) in m.faces.iter().enumerate() {
            if let Some(r) = f.right {
                let nl = m.outward_normal(fi, f.left);
                let nr = m.outward_normal(fi, r);
                assert_relative_eq!(nl[0], -nr[0]);
                assert_relative_eq!(nl[1], -nr[1]);
            }
        }
    }

    #[test]
    fn load_two_triangle_square() {
        let text = "\
cells 4 5 2
v 0 0
v 1 0
v 1 1
v 0 1
f 0 1 0 -1
f 1 2 0 -1
f 0 2 0 1
f 2 3 1 -1
f 3 0 1 -1
c 0 1 2
c 0 2 3
";
        let m = parse_mesh(text).unwrap();
        assert_eq!(m.n_cells(), 2);
        assert_eq!(m.faces.len(), 5);
        assert_eq!(m.vertices.len(), 4);
        // Right triangle: circumcenter at the hypotenuse midpoint.
        assert_relative_eq!(m.cells[0].center[0], 0.5, max_relative = 1e-12);
        assert_relative_eq!(m.cells[0].center[1], 0.5, max_relative = 1e-12);
    }

    #[test]
    fn loader_reports_line_numbers() {
        let text = "cells 1 0 0\nv not-a-number 0\n";
        match parse_mesh(text) {
            Err(HessdiscError::MeshParse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn loader_rejects_bad_adjacency() {
        let text = "\
cells 4 5 2
v 0 0
v 1 0
v 1 1
v 0 1
f 0 1 0 -1
f 1 2 0 -1
f 0 2 1 -1
f 2 3 1 -1
f 3 0 1 -1
c 0 1 2
c 0 2 3
";
        assert!(matches!(
            parse_mesh(text),
            Err(HessdiscError::MeshInvalid(_))
        ));
    }

    #[test]
    fn validator_accepts_squares_rejects_right_triangles() {
        let m = gen_square_mesh(4, Domain::UnitSquare).unwrap();
        let rep = m.validate_delta_adapted();
        assert!(rep.passes);
        assert!(rep.entries.iter().all(|e| e.orthogonality_defect == 0.0));

        // Diagonal-split right triangles with circumcenters: both centers
        // land on the shared hypotenuse midpoint, so d_sigma = 0 there.
        let tri = gen_triangular_mesh(2, Domain::UnitSquare).unwrap();
        let as_file = format_mesh(&tri);
        let with_circumcenters = parse_mesh(&as_file).unwrap();
        let rep = with_circumcenters.validate_delta_adapted();
        assert!(!rep.passes);
        assert!(rep
            .entries
            .iter()
            .any(|e| e.d_sigma.abs() < 1e-12 * with_circumcenters.h));
    }

    #[test]
    fn single_acute_triangle_passes() {
        let text = "\
cells 3 3 1
v 0 0
v 1 0
v 0.5 0.8
f 0 1 0 -1
f 1 2 0 -1
f 2 0 0 -1
c 0 1 2
";
        let m = parse_mesh(text).unwrap();
        assert!(m.validate_delta_adapted().passes);
    }

    #[test]
    fn file_family_refine_requires_next_level() {
        let d = MeshFamilyDescriptor::from_files(vec![PathBuf::from("only.txt")]);
        assert!(matches!(
            d.refine(),
            Err(HessdiscError::RefineUnsupported(_))
        ));
    }
}
