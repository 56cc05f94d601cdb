//! Exact rational convex polytopes in dual H/V representation.
//!
//! Every polytope is full-dimensional, carries primitive integer facet
//! normals (so the lattice boundary measure dσ is well defined) and records
//! whether it is Delzant.  Volumes come from a pulling triangulation rooted
//! at the lexicographically lowest vertex of each face.

mod chop;
mod hull;
mod integrate;
mod mixed;

use std::collections::BTreeSet;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::rational::{affine_rank, det, dot_int, factorial, fmt_rat, parse_rat, solve, Rational};

pub use chop::corner_chop;
pub use integrate::{integrate, integrate_affine, Integrand, Region};
pub use mixed::{minkowski_volume, mixed_volume};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolytopeError {
    #[error("input is unbounded")]
    UnboundedInput,
    #[error("input is not full-dimensional")]
    DegenerateInput,
    #[error("inconsistent input: {0}")]
    InconsistentInput(String),
    #[error("integer overflow in exact hull computation")]
    Overflow,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("chop parameter too large: the new facet must cut only the edges at the vertex")]
    ChopTooLarge,
    #[error("vertex {0} is not a Delzant vertex")]
    NonDelzantVertex(usize),
    #[error("point is not a vertex of the polytope")]
    NotAVertex,
    #[error("polarization system is singular")]
    SingularPolarizationSystem,
    #[error("function domain does not match the polytope")]
    DomainMismatch,
    #[error("malformed polytope data: {0}")]
    Malformed(String),
}

/// `⟨normal, x⟩ ≤ offset` with a primitive integer normal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Halfspace {
    pub normal: Vec<i64>,
    pub offset: Rational,
}

impl Halfspace {
    pub fn new(normal: Vec<i64>, offset: Rational) -> Result<Self, PolytopeError> {
        hull::make_primitive(&normal, &offset).ok_or_else(|| PolytopeError::Malformed("zero normal".into()))
    }

    /// `offset − ⟨normal, x⟩`, nonnegative inside.
    pub fn slack(&self, x: &[Rational]) -> Rational {
        &self.offset - dot_int(&self.normal, x)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VolumeData {
    pub volume: Rational,
    pub boundary_sigma_volume: Rational,
    pub barycenter: Vec<Rational>,
    pub per_facet_sigma: Vec<Rational>,
    /// σ-weighted centroid of each facet, aligned with `per_facet_sigma`.
    pub facet_centroids: Vec<Vec<Rational>>,
}

#[derive(Debug, Clone)]
pub struct Polytope {
    dim: usize,
    halfspaces: Vec<Halfspace>,
    vertices: Vec<Vec<Rational>>,
    facets: Vec<Vec<usize>>,
    delzant: bool,
    volume: OnceLock<VolumeData>,
}

impl PartialEq for Polytope {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.halfspaces == other.halfspaces && self.vertices == other.vertices
    }
}

impl Polytope {
    pub fn from_vertices(points: Vec<Vec<Rational>>) -> Result<Self, PolytopeError> {
        let dim = points.first().map(|p| p.len()).ok_or(PolytopeError::DegenerateInput)?;
        if dim == 0 {
            return Err(PolytopeError::DegenerateInput);
        }
        for p in &points {
            if p.len() != dim {
                return Err(PolytopeError::DimensionMismatch { expected: dim, got: p.len() });
            }
        }
        let pts: Vec<Vec<Rational>> = points.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let refs: Vec<&Vec<Rational>> = pts.iter().collect();
        if affine_rank(&refs) < dim {
            return Err(PolytopeError::DegenerateInput);
        }
        let hs = hull::facets_of_points(&pts, dim)?;
        Self::assemble(dim, hs, pts)
    }

    pub fn from_halfspaces(dim: usize, input: Vec<Halfspace>) -> Result<Self, PolytopeError> {
        if dim == 0 {
            return Err(PolytopeError::DegenerateInput);
        }
        let mut hs = Vec::with_capacity(input.len());
        for h in input {
            if h.normal.len() != dim {
                return Err(PolytopeError::DimensionMismatch { expected: dim, got: h.normal.len() });
            }
            hs.push(Halfspace::new(h.normal, h.offset)?);
        }
        if !normals_positively_span(dim, &hs)? {
            return Err(PolytopeError::UnboundedInput);
        }
        let verts = enumerate_vertices(dim, &hs)?;
        if verts.is_empty() {
            return Err(PolytopeError::InconsistentInput("halfspaces have empty intersection".into()));
        }
        Self::from_vertices(verts)
    }

    /// Builds the axis box `∏ [lo_i, hi_i]`.
    pub fn cube(lo: &[Rational], hi: &[Rational]) -> Result<Self, PolytopeError> {
        let dim = lo.len();
        let mut hs = Vec::new();
        for i in 0..dim {
            let mut e = vec![0i64; dim];
            e[i] = 1;
            hs.push(Halfspace { normal: e.clone(), offset: hi[i].clone() });
            e[i] = -1;
            hs.push(Halfspace { normal: e, offset: -lo[i].clone() });
        }
        Self::from_halfspaces(dim, hs)
    }

    /// Standard simplex conv{0, e_1, …, e_n}.
    pub fn standard_simplex(n: usize) -> Self {
        let mut pts = vec![vec![Rational::zero(); n]];
        for i in 0..n {
            let mut e = vec![Rational::zero(); n];
            e[i] = Rational::from_integer(BigInt::from(1));
            pts.push(e);
        }
        Self::from_vertices(pts).expect("standard simplex is valid")
    }

    fn assemble(dim: usize, mut hs: Vec<Halfspace>, mut verts: Vec<Vec<Rational>>) -> Result<Self, PolytopeError> {
        hs.sort();
        hs.dedup();
        let incident =
            |v: &Vec<Rational>| -> Vec<usize> { (0..hs.len()).filter(|&i| hs[i].slack(v).is_zero()).collect() };
        // Keep only genuine vertices: points whose active normals have full rank.
        verts.retain(|v| {
            let act = incident(v);
            let rows: Vec<Vec<Rational>> =
                act.iter().map(|&i| hs[i].normal.iter().map(|&c| Rational::from_integer(c.into())).collect()).collect();
            crate::rational::rank(&rows) == dim
        });
        verts.sort();
        let facets: Vec<Vec<usize>> =
            hs.iter().map(|h| (0..verts.len()).filter(|&j| h.slack(&verts[j]).is_zero()).collect()).collect();
        let mut delzant = true;
        if dim > 1 {
            for v in &verts {
                let act = incident(v);
                if act.len() != dim {
                    delzant = false;
                    break;
                }
                let m: Vec<Vec<i128>> =
                    act.iter().map(|&i| hs[i].normal.iter().map(|&c| c as i128).collect()).collect();
                if hull::det_i128(&m)?.abs() != 1 {
                    delzant = false;
                    break;
                }
            }
        }
        Ok(Polytope { dim, halfspaces: hs, vertices: verts, facets, delzant, volume: OnceLock::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn vertices(&self) -> &[Vec<Rational>] {
        &self.vertices
    }

    /// Vertex indices lying on each facet, aligned with `halfspaces`.
    pub fn facets(&self) -> &[Vec<usize>] {
        &self.facets
    }

    pub fn is_delzant(&self) -> bool {
        self.delzant
    }

    pub fn vertex_index(&self, v: &[Rational]) -> Option<usize> {
        self.vertices.iter().position(|w| w.as_slice() == v)
    }

    /// Facet indices incident to vertex `v`.
    pub fn incident_facets(&self, v: usize) -> Vec<usize> {
        (0..self.facets.len()).filter(|&i| self.facets[i].contains(&v)).collect()
    }

    pub fn is_delzant_vertex(&self, v: usize) -> bool {
        if self.dim == 1 {
            return true;
        }
        let act = self.incident_facets(v);
        if act.len() != self.dim {
            return false;
        }
        let m: Vec<Vec<i128>> =
            act.iter().map(|&i| self.halfspaces[i].normal.iter().map(|&c| c as i128).collect()).collect();
        matches!(hull::det_i128(&m), Ok(d) if d.abs() == 1)
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        self.halfspaces.iter().all(|h| !h.slack(x).is_negative())
    }

    pub fn volume_data(&self) -> &VolumeData {
        self.volume.get_or_init(|| self.compute_volume_data())
    }

    pub fn volume(&self) -> Rational {
        self.volume_data().volume.clone()
    }

    /// Pulling triangulation of the face spanned by `face` (sorted vertex
    /// indices) of affine dimension `k`.
    fn triangulate(&self, face: &[usize], k: usize) -> Vec<Vec<usize>> {
        if face.len() == k + 1 {
            return vec![face.to_vec()];
        }
        let apex = face[0];
        let mut subfaces: BTreeSet<Vec<usize>> = BTreeSet::new();
        for f in &self.facets {
            let s: Vec<usize> = face.iter().copied().filter(|v| f.contains(v)).collect();
            if s.len() < k || s.len() == face.len() || s.contains(&apex) {
                continue;
            }
            let refs: Vec<&Vec<Rational>> = s.iter().map(|&i| &self.vertices[i]).collect();
            if affine_rank(&refs) == k - 1 {
                subfaces.insert(s);
            }
        }
        let mut out = Vec::new();
        for s in subfaces {
            for mut simplex in self.triangulate(&s, k - 1) {
                simplex.insert(0, apex);
                out.push(simplex);
            }
        }
        out
    }

    fn simplex_det(&self, apex: &[Rational], simplex: &[usize]) -> Rational {
        let rows: Vec<Vec<Rational>> =
            simplex.iter().map(|&i| self.vertices[i].iter().zip(apex).map(|(a, b)| a - b).collect()).collect();
        det(&rows).abs()
    }

    fn compute_volume_data(&self) -> VolumeData {
        let n = self.dim;
        let all: Vec<usize> = (0..self.vertices.len()).collect();
        let mut volume = Rational::zero();
        let mut moment = vec![Rational::zero(); n];
        let nf = factorial(n);
        for s in self.triangulate(&all, n) {
            let apex = &self.vertices[s[0]];
            let vol = self.simplex_det(apex, &s[1..]) / &nf;
            for c in 0..n {
                let sum: Rational = s.iter().map(|&i| &self.vertices[i][c]).sum();
                moment[c] += &vol * sum / BigInt::from(n + 1);
            }
            volume += vol;
        }
        let barycenter = moment.iter().map(|m| m / &volume).collect();
        let nf1 = factorial(n - 1);
        let mut per_facet_sigma = Vec::new();
        let mut facet_centroids = Vec::new();
        for (fi, face) in self.facets.iter().enumerate() {
            let h = &self.halfspaces[fi];
            let far = (0..self.vertices.len()).find(|v| !face.contains(v)).expect("full-dimensional");
            let p = &self.vertices[far];
            let height = h.slack(p).abs();
            let mut sigma = Rational::zero();
            let mut cm = vec![Rational::zero(); n];
            for s in self.triangulate(face, n - 1) {
                let sg = self.simplex_det(p, &s) / (&nf1 * &height);
                for c in 0..n {
                    let sum: Rational = s.iter().map(|&i| &self.vertices[i][c]).sum();
                    cm[c] += &sg * sum / BigInt::from(n);
                }
                sigma += sg;
            }
            facet_centroids.push(cm.iter().map(|m| m / &sigma).collect());
            per_facet_sigma.push(sigma);
        }
        let boundary_sigma_volume = per_facet_sigma.iter().sum();
        VolumeData { volume, boundary_sigma_volume, barycenter, per_facet_sigma, facet_centroids }
    }

    /// Image under `x ↦ λx + t`.
    pub fn affine_image(&self, scale: &Rational, shift: &[Rational]) -> Result<Self, PolytopeError> {
        let pts = self.vertices.iter().map(|v| v.iter().zip(shift).map(|(x, t)| x * scale + t).collect()).collect();
        Self::from_vertices(pts)
    }

    pub fn to_json(&self) -> PolytopeJson {
        PolytopeJson {
            dim: self.dim,
            halfspaces: self.halfspaces.iter().map(|h| (h.normal.clone(), fmt_rat(&h.offset))).collect(),
            vertices: self.vertices.iter().map(|v| v.iter().map(fmt_rat).collect()).collect(),
        }
    }

    pub fn from_json(j: &PolytopeJson) -> Result<Self, PolytopeError> {
        let verts: Vec<Vec<Rational>> = j
            .vertices
            .iter()
            .map(|v| v.iter().map(|s| parse_rat(s).map_err(|e| PolytopeError::Malformed(e.to_string()))).collect())
            .collect::<Result<_, _>>()?;
        if j.halfspaces.is_empty() {
            let p = Self::from_vertices(verts)?;
            if p.dim != j.dim {
                return Err(PolytopeError::DimensionMismatch { expected: j.dim, got: p.dim });
            }
            return Ok(p);
        }
        let hs = j
            .halfspaces
            .iter()
            .map(|(n, o)| {
                let off = parse_rat(o).map_err(|e| PolytopeError::Malformed(e.to_string()))?;
                Ok(Halfspace { normal: n.clone(), offset: off })
            })
            .collect::<Result<Vec<_>, PolytopeError>>()?;
        let p = Self::from_halfspaces(j.dim, hs)?;
        if !verts.is_empty() {
            let given: BTreeSet<Vec<Rational>> = verts.into_iter().collect();
            let have: BTreeSet<Vec<Rational>> = p.vertices.iter().cloned().collect();
            if given != have {
                return Err(PolytopeError::InconsistentInput("vertex list disagrees with halfspaces".into()));
            }
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolytopeJson {
    pub dim: usize,
    #[serde(default)]
    pub halfspaces: Vec<(Vec<i64>, String)>,
    #[serde(default)]
    pub vertices: Vec<Vec<String>>,
}

/// True when 0 lies in the interior of conv(normals).
fn normals_positively_span(dim: usize, hs: &[Halfspace]) -> Result<bool, PolytopeError> {
    let pts: Vec<Vec<Rational>> = hs
        .iter()
        .map(|h| h.normal.iter().map(|&c| Rational::from_integer(c.into())).collect())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let refs: Vec<&Vec<Rational>> = pts.iter().collect();
    if pts.len() <= dim || affine_rank(&refs) < dim {
        return Ok(false);
    }
    let facets = hull::facets_of_points(&pts, dim)?;
    Ok(facets.iter().all(|f| f.offset.is_positive()))
}

fn enumerate_vertices(dim: usize, hs: &[Halfspace]) -> Result<Vec<Vec<Rational>>, PolytopeError> {
    let mut out: BTreeSet<Vec<Rational>> = BTreeSet::new();
    hull::for_each_subset(hs.len(), dim, |idx| {
        let a: Vec<Vec<Rational>> =
            idx.iter().map(|&i| hs[i].normal.iter().map(|&c| Rational::from_integer(c.into())).collect()).collect();
        let b: Vec<Rational> = idx.iter().map(|&i| hs[i].offset.clone()).collect();
        if let Some(x) = solve(a, b) {
            if hs.iter().all(|h| !h.slack(&x).is_negative()) {
                out.insert(x);
            }
        }
        Ok(())
    })?;
    Ok(out.into_iter().collect())
}
