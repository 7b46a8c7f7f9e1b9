//! Coupled fluxonium–resonator–fluxonium Hamiltonian, dressed spectrum and
//! bare-label assignment.
//!
//! Product basis order is A ⊗ coupler ⊗ B; the bare triple (i, k, j) lists the
//! fluxonium-A level, the photon number and the fluxonium-B level.

use std::collections::HashMap;

use log::{debug, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    diagonalize_fluxonium, resonator_spectrum, ElementSpectrum, FluxoniumSpec, ResonatorSpec,
};
use crate::error::{Error, Result};
use crate::linalg::{congruence, eigh, kron3};

pub type Label = [usize; 3];

/// Computational states in the order 00, 01, 10, 11 (first digit A).
pub const COMPUTATIONAL: [Label; 4] = [[0, 0, 0], [0, 0, 1], [1, 0, 0], [1, 0, 1]];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpec {
    pub fluxonium_a: FluxoniumSpec,
    pub fluxonium_b: FluxoniumSpec,
    pub resonator: ResonatorSpec,
    pub j_ac: f64,
    pub j_bc: f64,
    pub j_ab: f64,
}

impl CircuitSpec {
    pub fn validate(&self) -> Result<()> {
        self.fluxonium_a.validate()?;
        self.fluxonium_b.validate()?;
        self.resonator.validate()?;
        for (name, j) in [("j_ac", self.j_ac), ("j_bc", self.j_bc), ("j_ab", self.j_ab)] {
            if !j.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        Ok(())
    }

    /// All three couplings multiplied by `s`.
    pub fn with_coupling_scale(&self, s: f64) -> CircuitSpec {
        CircuitSpec { j_ac: self.j_ac * s, j_bc: self.j_bc * s, j_ab: self.j_ab * s, ..*self }
    }

    pub fn decoupled(&self) -> CircuitSpec {
        self.with_coupling_scale(0.0)
    }

    /// A and B exchanged.
    pub fn mirrored(&self) -> CircuitSpec {
        CircuitSpec {
            fluxonium_a: self.fluxonium_b,
            fluxonium_b: self.fluxonium_a,
            j_ac: self.j_bc,
            j_bc: self.j_ac,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductDims {
    pub a: usize,
    pub c: usize,
    pub b: usize,
}

impl Default for ProductDims {
    fn default() -> Self {
        ProductDims { a: 12, c: 8, b: 12 }
    }
}

impl ProductDims {
    pub fn total(&self) -> usize {
        self.a * self.c * self.b
    }

    pub fn index(&self, l: Label) -> usize {
        (l[0] * self.c + l[1]) * self.b + l[2]
    }

    pub fn label(&self, idx: usize) -> Label {
        [idx / (self.c * self.b), (idx / self.b) % self.c, idx % self.b]
    }
}

/// How ω̄_c in χ_ij = E(i,1,j) − E(i,0,j) − ω̄_c is chosen. Only δχ_ij is
/// consumed downstream, so this affects reporting alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplerReference {
    /// Bare resonator frequency: χ_00 is then the full dressed shift of |0,1,0⟩.
    #[default]
    Bare,
    /// ω̄_c = E(0,1,0) − E(0,0,0), so χ_00 ≡ 0.
    Dressed00,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeOptions {
    pub dims: ProductDims,
    /// Dressed states kept (energies, vectors, labels).
    pub retain: usize,
    pub reference: CouplerReference,
}

impl Default for CompositeOptions {
    fn default() -> Self {
        CompositeOptions { dims: ProductDims::default(), retain: 60, reference: CouplerReference::Bare }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Element {
    A,
    C,
    B,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElementSet {
    pub a: ElementSpectrum,
    pub c: ElementSpectrum,
    pub b: ElementSpectrum,
}

impl ElementSet {
    pub fn build(spec: &CircuitSpec) -> Result<ElementSet> {
        Ok(ElementSet {
            a: diagonalize_fluxonium(&spec.fluxonium_a)?,
            c: resonator_spectrum(&spec.resonator)?,
            b: diagonalize_fluxonium(&spec.fluxonium_b)?,
        })
    }

    pub fn get(&self, e: Element) -> &ElementSpectrum {
        match e {
            Element::A => &self.a,
            Element::C => &self.c,
            Element::B => &self.b,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DressedSpectrum {
    /// Retained dressed energies relative to the dressed ground state (GHz).
    pub energies: Vec<f64>,
    /// Retained eigenvectors as columns in the product basis.
    pub vectors: DMatrix<f64>,
    pub labels: Vec<Label>,
    /// |⟨bare label|dressed⟩|² for each retained state.
    pub overlaps: Vec<f64>,
    pub truncation_dim: usize,
    pub options: CompositeOptions,
    pub spec: CircuitSpec,
    /// Element spectra already cut to the product dimensions.
    pub elements: ElementSet,
    /// Every eigenvalue of the product-space Hamiltonian, unshifted.
    pub all_energies: Vec<f64>,
    /// Tr H in the product basis.
    pub hamiltonian_trace: f64,
}

/// Coupled Hamiltonian in the product basis.
pub fn composite_hamiltonian(spec: &CircuitSpec, el: &ElementSet) -> DMatrix<f64> {
    let (xa, xc, xb) = (&el.a.charge_im, &el.c.charge_im, &el.b.charge_im);
    let (ia, ic, ib) = (
        DMatrix::identity(el.a.dim(), el.a.dim()),
        DMatrix::identity(el.c.dim(), el.c.dim()),
        DMatrix::identity(el.b.dim(), el.b.dim()),
    );
    // n_x n_y = (i X)(i Y) = −X Y
    let mut h = kron3(xa, xc, &ib) * (-spec.j_ac)
        + kron3(&ia, xc, xb) * (-spec.j_bc)
        + kron3(xa, &ic, xb) * (-spec.j_ab);
    let dims = ProductDims { a: el.a.dim(), c: el.c.dim(), b: el.b.dim() };
    for idx in 0..dims.total() {
        let [i, k, j] = dims.label(idx);
        h[(idx, idx)] += el.a.energies[i] + el.c.energies[k] + el.b.energies[j];
    }
    h
}

pub fn build_composite(spec: &CircuitSpec) -> Result<DressedSpectrum> {
    build_composite_with(spec, &CompositeOptions::default())
}

pub fn build_composite_with(spec: &CircuitSpec, opts: &CompositeOptions) -> Result<DressedSpectrum> {
    spec.validate()?;
    let full = ElementSet::build(spec)?;
    let dims = opts.dims;
    if dims.a > full.a.converged || dims.b > full.b.converged {
        return Err(Error::invalid("dims", "fluxonium pre-truncation exceeds converged levels"));
    }
    if dims.c > spec.resonator.basis_dim {
        return Err(Error::invalid("dims.c", "exceeds resonator basis_dim"));
    }
    let el = ElementSet { a: full.a.truncated(dims.a), c: full.c.truncated(dims.c), b: full.b.truncated(dims.b) };

    let min_transition = [el.a.omega(1, 2), el.b.omega(1, 2), spec.resonator.omega_c]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    for j in [spec.j_ac, spec.j_bc, spec.j_ab] {
        if j.abs() >= min_transition {
            warn!("coupling {j} GHz is not small against transition {min_transition} GHz");
        }
    }

    let h = composite_hamiltonian(spec, &el);
    let trace = h.trace();
    let (vals, vecs) = eigh(h);
    let retain = opts.retain.min(dims.total());
    let e0 = vals[0];
    let energies: Vec<f64> = vals[..retain].iter().map(|e| e - e0).collect();
    let vectors = vecs.columns(0, retain).into_owned();

    let bare: Vec<f64> = (0..dims.total())
        .map(|idx| {
            let [i, k, j] = dims.label(idx);
            el.a.energies[i] + el.c.energies[k] + el.b.energies[j]
        })
        .collect();
    let (labels, overlaps) = assign_labels(&vectors, &vals[..retain], &bare, dims)?;

    Ok(DressedSpectrum {
        energies,
        vectors,
        labels,
        overlaps,
        truncation_dim: retain,
        options: *opts,
        spec: *spec,
        elements: el,
        all_energies: vals,
        hamiltonian_trace: trace,
    })
}

pub const OVERLAP_WARN: f64 = 0.5;
pub const OVERLAP_FAIL: f64 = 0.34;

/// Labels read by the gate metrics: |i,k,j⟩ with i, j ∈ {0,1} and k ≤ 2.
/// Weak overlaps elsewhere (hybridized two-plasmon manifolds) are only logged.
pub fn is_protected(l: Label) -> bool {
    l[0] <= 1 && l[2] <= 1 && l[1] <= 2
}

/// Greedy maximum-overlap assignment in descending overlap order; ties go to
/// the bare state closest in energy.
fn assign_labels(
    vectors: &DMatrix<f64>,
    dressed: &[f64],
    bare: &[f64],
    dims: ProductDims,
) -> Result<(Vec<Label>, Vec<f64>)> {
    let n = vectors.ncols();
    let mut cands: Vec<(f64, f64, usize, usize)> = Vec::new();
    for d in 0..n {
        for b in 0..vectors.nrows() {
            let w = vectors[(b, d)].powi(2);
            if w > 1e-3 {
                cands.push((w, (dressed[d] - bare[b]).abs(), d, b));
            }
        }
    }
    cands.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.total_cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut label_of: Vec<Option<(usize, f64)>> = vec![None; n];
    let mut taken: HashMap<usize, usize> = HashMap::new();
    for &(w, _, d, b) in &cands {
        if label_of[d].is_none() && !taken.contains_key(&b) {
            label_of[d] = Some((b, w));
            taken.insert(b, d);
        }
    }

    let mut labels = Vec::with_capacity(n);
    let mut overlaps = Vec::with_capacity(n);
    let mut report = String::new();
    for d in 0..n {
        // the dressed state's own favourite bare state
        let (best_b, best_w) = (0..vectors.nrows())
            .map(|b| (b, vectors[(b, d)].powi(2)))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let (b, w) = match label_of[d] {
            Some(x) => x,
            None => (best_b, 0.0),
        };
        let protected = is_protected(dims.label(b)) || is_protected(dims.label(best_b));
        if w < OVERLAP_FAIL && protected {
            let owner = taken.get(&best_b).copied();
            report.push_str(&format!(
                "  dressed {d} (E = {:.6}): best {:?} overlap {:.3} owned by {:?}; assigned {:?} overlap {:.3}\n",
                dressed[d] - dressed[0],
                dims.label(best_b),
                best_w,
                owner,
                dims.label(b),
                w
            ));
        } else if w < OVERLAP_WARN && protected {
            warn!("dressed state {d} labeled {:?} with weak overlap {w:.3}", dims.label(b));
        } else if w < OVERLAP_WARN {
            debug!("dressed state {d} labeled {:?} with weak overlap {w:.3}", dims.label(b));
        }
        labels.push(dims.label(b));
        overlaps.push(w);
    }
    if !report.is_empty() {
        return Err(Error::LabelCollision(report));
    }
    debug!("labeled {n} dressed states");
    Ok((labels, overlaps))
}

impl DressedSpectrum {
    pub fn dims(&self) -> ProductDims {
        self.options.dims
    }

    pub fn index_of(&self, l: Label) -> Result<usize> {
        self.labels[..self.truncation_dim]
            .iter()
            .position(|x| *x == l)
            .ok_or(Error::MissingLabel(l))
    }

    pub fn energy(&self, l: Label) -> Result<f64> {
        Ok(self.energies[self.index_of(l)?])
    }

    pub fn computational_indices(&self) -> Result<[usize; 4]> {
        let mut out = [0; 4];
        for (o, l) in out.iter_mut().zip(COMPUTATIONAL) {
            *o = self.index_of(l)?;
        }
        Ok(out)
    }

    /// Lowest `d` dressed states.
    pub fn truncate(&self, d: usize) -> Result<DressedSpectrum> {
        truncate_dressed(self, d)
    }

    /// Embed an element operator into the product basis.
    pub fn bare_operator(&self, which: Element, op: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let dims = self.dims();
        let want = match which {
            Element::A => dims.a,
            Element::C => dims.c,
            Element::B => dims.b,
        };
        if op.nrows() != want || op.ncols() != want {
            return Err(Error::DimensionMismatch { expected: want, got: op.nrows() });
        }
        let (ia, ic, ib) =
            (DMatrix::identity(dims.a, dims.a), DMatrix::identity(dims.c, dims.c), DMatrix::identity(dims.b, dims.b));
        Ok(match which {
            Element::A => kron3(op, &ic, &ib),
            Element::C => kron3(&ia, op, &ib),
            Element::B => kron3(&ia, &ic, op),
        })
    }

    /// Vᵀ O V on the retained states.
    pub fn dressed_operator(&self, bare_op: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.dims().total();
        if bare_op.nrows() != n || bare_op.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: bare_op.nrows() });
        }
        let v = self.vectors.columns(0, self.truncation_dim).into_owned();
        Ok(congruence(&v, bare_op))
    }

    /// Imaginary part of n̂ (A, coupler or B) in the dressed basis; n̂ = i·result.
    pub fn dressed_charge(&self, which: Element) -> Result<DMatrix<f64>> {
        let op = self.bare_operator(which, &self.elements.get(which).charge_im)?;
        self.dressed_operator(&op)
    }

    /// |⟨from|n̂_c|to⟩|.
    pub fn coupler_element(&self, nc: &DMatrix<f64>, from: Label, to: Label) -> Result<f64> {
        Ok(nc[(self.index_of(from)?, self.index_of(to)?)].abs())
    }

    /// Ratios m_ij = ⟨i,1,j|n̂_c|i,0,j⟩/⟨1,1,1|n̂_c|1,0,1⟩ for ij = 00, 01, 10, and
    /// the reference element |⟨1,1,1|n̂_c|1,0,1⟩|.
    pub fn coupler_ratios(&self) -> Result<([f64; 3], f64)> {
        let nc = self.dressed_charge(Element::C)?;
        let m11 = self.coupler_element(&nc, [1, 1, 1], [1, 0, 1])?;
        let mut m = [0.0; 3];
        for (slot, [i, _, j]) in m.iter_mut().zip(COMPUTATIONAL) {
            *slot = self.coupler_element(&nc, [i, 1, j], [i, 0, j])? / m11;
        }
        Ok((m, m11))
    }

    /// |⟨bare|dressed(l)⟩|² for an arbitrary bare triple.
    pub fn bare_weight(&self, dressed: Label, bare: Label) -> Result<f64> {
        let d = self.index_of(dressed)?;
        Ok(self.vectors[(self.dims().index(bare), d)].powi(2))
    }
}

pub fn truncate_dressed(s: &DressedSpectrum, d: usize) -> Result<DressedSpectrum> {
    if d > s.truncation_dim {
        return Err(Error::DimensionMismatch { expected: s.truncation_dim, got: d });
    }
    if d < 16 {
        return Err(Error::TruncationTooSmall { d, required: 16 });
    }
    let mut t = s.clone();
    t.energies.truncate(d);
    t.vectors = s.vectors.columns(0, d).into_owned();
    t.labels.truncate(d);
    t.overlaps.truncate(d);
    t.truncation_dim = d;
    for [i, _, j] in COMPUTATIONAL {
        for k in 0..2 {
            t.index_of([i, k, j]).map_err(|_| Error::TruncationTooSmall { d, required: 16 })?;
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionConstants {
    /// χ ≡ χ_11.
    pub chi: f64,
    pub chi_00: f64,
    pub chi_01: f64,
    pub chi_10: f64,
    pub alpha: f64,
    pub eta: f64,
    pub h_a: f64,
    pub h_b: f64,
    /// The ω̄_c used for the χ values.
    pub omega_ref: f64,
}

impl InteractionConstants {
    /// δχ_ij = χ − χ_ij in the order 00, 01, 10.
    pub fn delta_chi(&self) -> [f64; 3] {
        [self.chi - self.chi_00, self.chi - self.chi_01, self.chi - self.chi_10]
    }
}

pub fn interaction_constants(s: &DressedSpectrum) -> Result<InteractionConstants> {
    let e = |l: Label| s.energy(l);
    let omega_ref = match s.options.reference {
        CouplerReference::Bare => s.spec.resonator.omega_c,
        CouplerReference::Dressed00 => e([0, 1, 0])? - e([0, 0, 0])?,
    };
    let chi_of = |i: usize, j: usize| -> Result<f64> { Ok(e([i, 1, j])? - e([i, 0, j])? - omega_ref) };
    let e111 = e([1, 1, 1])?;
    Ok(InteractionConstants {
        chi: chi_of(1, 1)?,
        chi_00: chi_of(0, 0)?,
        chi_01: chi_of(0, 1)?,
        chi_10: chi_of(1, 0)?,
        alpha: (e([1, 2, 1])? - e111) - (e111 - e([1, 0, 1])?),
        eta: e([1, 0, 1])? - e([1, 0, 0])? - e([0, 0, 1])? + e([0, 0, 0])?,
        h_a: s.bare_weight([1, 1, 1], [2, 0, 1])?,
        h_b: s.bare_weight([1, 1, 1], [1, 0, 2])?,
        omega_ref,
    })
}
