//! Mutual k-NN Gaussian-kernel graph over sampling locations.
//!
//! The graph carries everything the estimators need from the spatial design:
//! the adjacency `A`, degrees `d = A·1`, the symmetric normalized Laplacian
//! `L = I − D^{-1/2} A D^{-1/2}` and a component labelling. Deviation fields are
//! kept degree-weight centered on every component, so the graph also owns the
//! projectors onto that subspace.

use std::collections::{HashMap, VecDeque};
use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::sparse::CsrMatrix;

/// Spectra of graphs up to this size are computed densely.
pub const DENSE_SPECTRUM_MAX_N: usize = 2000;

pub const DEFAULT_K: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub u1: f64,
    pub u2: f64,
}

impl Location {
    pub fn new(u1: f64, u2: f64) -> Self {
        Self { u1, u2 }
    }

    pub fn dist2(&self, other: &Location) -> f64 {
        let a = self.u1 - other.u1;
        let b = self.u2 - other.u2;
        a * a + b * b
    }

    pub fn is_finite(&self) -> bool {
        self.u1.is_finite() && self.u2.is_finite()
    }
}

/// Isotropic affine map sending a point cloud into the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinateScaling {
    pub min1: f64,
    pub min2: f64,
    pub span: f64,
}

impl CoordinateScaling {
    /// Fits the map on `locations`; both axes share one scale so distances keep their ratios.
    pub fn fit(locations: &[Location]) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::Degenerate("no locations".into()));
        }
        let (mut lo1, mut hi1, mut lo2, mut hi2) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for l in locations {
            if !l.is_finite() {
                return Err(Error::InvalidParameter("non-finite coordinate".into()));
            }
            lo1 = lo1.min(l.u1);
            hi1 = hi1.max(l.u1);
            lo2 = lo2.min(l.u2);
            hi2 = hi2.max(l.u2);
        }
        let span = (hi1 - lo1).max(hi2 - lo2);
        if span <= 0.0 {
            return Err(Error::DegenerateGraph("all locations coincide".into()));
        }
        Ok(Self {
            min1: lo1,
            min2: lo2,
            span,
        })
    }

    pub fn apply(&self, l: &Location) -> Location {
        Location::new((l.u1 - self.min1) / self.span, (l.u2 - self.min2) / self.span)
    }
}

/// Kernel bandwidth choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    /// Median length of the k-NN edges.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct SpatialGraph {
    adjacency: CsrMatrix,
    degrees: Vec<f64>,
    laplacian: CsrMatrix,
    components: Vec<usize>,
    n_components: usize,
    // per component: Σ d_i and Σ d_i²
    comp_degree_sum: Vec<f64>,
    comp_degree_sq_sum: Vec<f64>,
    k: usize,
    sigma: f64,
}

/// Builds the mutual k-NN graph with Gaussian weights `exp(−‖u_i − u_ℓ‖²/σ²)`.
///
/// An edge joins `i` and `ℓ` when either is among the other's `k` nearest neighbours
/// (Euclidean distance, ties broken by index). Coincident locations are always joined
/// with weight one.
pub fn build_graph(locations: &[Location], k: usize, sigma: Bandwidth) -> Result<SpatialGraph> {
    let n = locations.len();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if let Bandwidth::Fixed(s) = sigma {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {s}")));
        }
    }
    if locations.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidParameter("non-finite location".into()));
    }
    if n < 2 {
        return Err(Error::DegenerateGraph(format!("need at least 2 locations, got {n}")));
    }
    if k >= n {
        return Err(Error::InvalidParameter(format!("k = {k} must be smaller than n = {n}")));
    }

    let mut groups: HashMap<(u64, u64), Vec<usize>> = HashMap::new();
    for (i, l) in locations.iter().enumerate() {
        // +0.0 normalises the sign of zero
        let key = ((l.u1 + 0.0).to_bits(), (l.u2 + 0.0).to_bits());
        groups.entry(key).or_default().push(i);
    }
    if groups.len() < 2 {
        return Err(Error::DegenerateGraph("fewer than 2 distinct locations".into()));
    }

    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(n * k);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        cand.clear();
        cand.extend(
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (locations[i].dist2(&locations[j]), j)),
        );
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        cand.select_nth_unstable_by(k - 1, order);
        for &(_, j) in &cand[..k] {
            pairs.push((i.min(j), i.max(j)));
        }
    }
    for members in groups.values() {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();

    let sigma = match sigma {
        Bandwidth::Fixed(s) => s,
        Bandwidth::Auto => {
            let mut d: Vec<f64> = pairs
                .iter()
                .map(|&(i, j)| locations[i].dist2(&locations[j]).sqrt())
                .filter(|&d| d > 0.0)
                .collect();
            if d.is_empty() {
                // every edge joins coincident points; the kernel is 1 regardless
                1.0
            } else {
                median_in_place(&mut d)
            }
        }
    };

    let s2 = sigma * sigma;
    let mut triplets = Vec::with_capacity(2 * pairs.len());
    for &(i, j) in &pairs {
        let w = (-locations[i].dist2(&locations[j]) / s2).exp();
        if w > 0.0 {
            triplets.push((i, j, w));
            triplets.push((j, i, w));
        }
    }
    let adjacency = CsrMatrix::from_triplets(n, &triplets);
    SpatialGraph::from_adjacency(adjacency, k, sigma)
}

impl SpatialGraph {
    /// Wraps an arbitrary adjacency matrix. It must be symmetric, nonnegative, with zero
    /// diagonal and no isolated nodes.
    pub fn from_adjacency(adjacency: CsrMatrix, k: usize, sigma: f64) -> Result<Self> {
        for (i, j, v) in adjacency.iter() {
            if i == j && v != 0.0 {
                return Err(Error::InvalidParameter(format!("nonzero diagonal at {i}")));
            }
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("bad weight {v} at ({i}, {j})")));
            }
        }
        if adjacency.asymmetry() != 0.0 {
            return Err(Error::InvalidParameter("adjacency is not symmetric".into()));
        }
        let degrees = adjacency.row_sums();
        if let Some(i) = degrees.iter().position(|&d| d <= 0.0) {
            return Err(Error::DegenerateGraph(format!("node {i} has zero degree")));
        }
        let laplacian = normalized_laplacian_from(&adjacency, &degrees);
        let (components, n_components) = connected_components(&adjacency);
        let mut comp_degree_sum = vec![0.0; n_components];
        let mut comp_degree_sq_sum = vec![0.0; n_components];
        for (i, &c) in components.iter().enumerate() {
            comp_degree_sum[c] += degrees[i];
            comp_degree_sq_sum[c] += degrees[i] * degrees[i];
        }
        Ok(Self {
            adjacency,
            degrees,
            laplacian,
            components,
            n_components,
            comp_degree_sum,
            comp_degree_sq_sum,
            k,
            sigma,
        })
    }

    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn laplacian(&self) -> &CsrMatrix {
        &self.laplacian
    }

    pub fn components(&self) -> &[usize] {
        &self.components
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Undirected edges `(i, ℓ, A_iℓ)` with `i < ℓ`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().filter(|&(i, j, _)| i < j)
    }

    /// Per-component degree-weighted sums `1_𝒞ᵀ D v`.
    pub fn weighted_component_sums(&self, v: &DVector<f64>) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_components];
        for (i, &c) in self.components.iter().enumerate() {
            sums[c] += self.degrees[i] * v[i];
        }
        sums
    }

    /// Removes the degree-weighted mean of `v` on every component:
    /// `v − Σ_𝒞 (1_𝒞ᵀDv / 1_𝒞ᵀD1_𝒞) 1_𝒞`.
    pub fn project_centered(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("project_centered", self.n(), v.len())?;
        let mut out = v.clone();
        self.project_centered_in_place(&mut out);
        Ok(out)
    }

    pub fn project_centered_in_place(&self, v: &mut DVector<f64>) {
        let sums = self.weighted_component_sums(v);
        let means: Vec<f64> = sums
            .iter()
            .zip(&self.comp_degree_sum)
            .map(|(s, d)| s / d)
            .collect();
        for (i, &c) in self.components.iter().enumerate() {
            v[i] -= means[c];
        }
    }

    /// Euclidean-orthogonal projection onto `{v : 1_𝒞ᵀ D v = 0 ∀𝒞}`, i.e. removal of the
    /// `D 1_𝒞` directions. Agrees with [`Self::project_centered`] on centered vectors.
    pub fn project_orthogonal_in_place(&self, v: &mut DVector<f64>) {
        let sums = self.weighted_component_sums(v);
        let coef: Vec<f64> = sums
            .iter()
            .zip(&self.comp_degree_sq_sum)
            .map(|(s, d2)| s / d2)
            .collect();
        for (i, &c) in self.components.iter().enumerate() {
            v[i] -= coef[c] * self.degrees[i];
        }
    }

    /// Largest |1_𝒞ᵀ D v| over components.
    pub fn centering_violation(&self, v: &DVector<f64>) -> f64 {
        self.weighted_component_sums(v)
            .into_iter()
            .fold(0.0, |m, s| m.max(s.abs()))
    }

    /// `δᵀ L δ`.
    pub fn roughness(&self, delta: &DVector<f64>) -> f64 {
        self.laplacian.quad_form(delta)
    }

    /// `½ Σ_{(i,ℓ)} A_iℓ (δ_i/√d_i − δ_ℓ/√d_ℓ)²` summed over ordered pairs.
    pub fn roughness_edge_sum(&self, delta: &DVector<f64>) -> f64 {
        let d = &self.degrees;
        0.5 * self
            .adjacency
            .iter()
            .map(|(i, j, a)| {
                let t = delta[i] / d[i].sqrt() - delta[j] / d[j].sqrt();
                a * t * t
            })
            .sum::<f64>()
    }

    /// Writes the undirected edge list as CSV with header `i,j,weight`.
    pub fn write_edge_list<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["i", "j", "weight"])?;
        for (i, j, a) in self.edges() {
            w.write_record([i.to_string(), j.to_string(), format!("{a:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `I − D^{-1/2} A D^{-1/2}` for the graph's adjacency.
pub fn normalized_laplacian(graph: &SpatialGraph) -> CsrMatrix {
    normalized_laplacian_from(&graph.adjacency, &graph.degrees)
}

fn normalized_laplacian_from(adjacency: &CsrMatrix, degrees: &[f64]) -> CsrMatrix {
    let n = adjacency.n();
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut triplets = Vec::with_capacity(adjacency.nnz() + n);
    for i in 0..n {
        triplets.push((i, i, 1.0));
    }
    for (i, j, a) in adjacency.iter() {
        triplets.push((i, j, -a * inv_sqrt[i] * inv_sqrt[j]));
    }
    CsrMatrix::from_triplets(n, &triplets)
}

fn connected_components(adjacency: &CsrMatrix) -> (Vec<usize>, usize) {
    let n = adjacency.n();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            for &j in adjacency.row(i).0 {
                if label[j] == usize::MAX {
                    label[j] = next;
                    queue.push_back(j);
                }
            }
        }
        next += 1;
    }
    (label, next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub max_eigenvalue: f64,
    pub median_nonzero_eigenvalue: f64,
    pub exact: bool,
}

/// Largest and median nonzero eigenvalue of `L`.
///
/// Exact for `n ≤ DENSE_SPECTRUM_MAX_N`. Larger graphs use stochastic Lanczos quadrature
/// with `m` Lanczos steps per probe: the Ritz values weighted by the squared first
/// components of their eigenvectors estimate the spectral distribution, from which the
/// zero mass (one eigenvalue per component) is removed before taking the median.
pub fn spectral_summary(graph: &SpatialGraph, m: usize) -> SpectralSummary {
    let n = graph.n();
    if n <= DENSE_SPECTRUM_MAX_N {
        let mut ev = dense_spectrum(graph);
        let nonzero = ev.split_off(graph.n_components.min(ev.len()));
        let max = nonzero.last().copied().unwrap_or(0.0);
        let median = if nonzero.is_empty() {
            0.0
        } else {
            let mut nz = nonzero;
            median_in_place(&mut nz)
        };
        return SpectralSummary {
            max_eigenvalue: max,
            median_nonzero_eigenvalue: median,
            exact: true,
        };
    }

    const PROBES: usize = 4;
    let steps = m.clamp(2, n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a9c);
    let mut nodes: Vec<(f64, f64)> = Vec::new();
    let mut max = 0.0_f64;
    for _ in 0..PROBES {
        let mut v = DVector::from_fn(n, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 });
        v /= v.norm();
        let (theta, weights) = lanczos_ritz(graph.laplacian(), v, steps);
        for (t, w) in theta.into_iter().zip(weights) {
            max = max.max(t);
            nodes.push((t, w / PROBES as f64));
        }
    }
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let zero_mass = graph.n_components as f64 / n as f64;
    let target = zero_mass + 0.5 * (1.0 - zero_mass);
    let mut acc = 0.0;
    let mut median = max;
    for &(t, w) in &nodes {
        acc += w;
        if acc >= target {
            median = t;
            break;
        }
    }
    SpectralSummary {
        max_eigenvalue: max,
        median_nonzero_eigenvalue: median,
        exact: false,
    }
}

/// Ascending eigenvalues of the dense Laplacian.
pub fn dense_spectrum(graph: &SpatialGraph) -> Vec<f64> {
    let dense: DMatrix<f64> = graph.laplacian.to_dense();
    let mut ev: Vec<f64> = SymmetricEigen::new(dense).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Lanczos with full reorthogonalisation; returns Ritz values and quadrature weights.
fn lanczos_ritz(op: &CsrMatrix, start: DVector<f64>, steps: usize) -> (Vec<f64>, Vec<f64>) {
    let n = op.n();
    let mut basis: Vec<DVector<f64>> = vec![start];
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut w = DVector::zeros(n);
    for k in 0..steps {
        op.matvec_into(basis[k].as_slice(), w.as_mut_slice());
        let a = basis[k].dot(&w);
        alpha.push(a);
        for q in &basis {
            let c = q.dot(&w);
            w.axpy(-c, q, 1.0);
        }
        let b = w.norm();
        if k + 1 == steps || b < 1e-12 {
            break;
        }
        beta.push(b);
        basis.push(&w / b);
    }
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let weights = (0..m).map(|i| eig.eigenvectors[(0, i)].powi(2)).collect();
    (eig.eigenvalues.iter().copied().collect(), weights)
}

pub(crate) fn median_in_place(v: &mut [f64]) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}
