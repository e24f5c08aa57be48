//! Spectral calculus on small dense Hermitian operators: Gibbs states,
//! relative entropy, fractional powers, logarithmic means.
//!
//! Eigendecomposition is the single route for every matrix function here.
//! Dimensions are tiny (2 or 4 in production paths, up to 2^8 in the
//! brute-force oracles), so exactness wins over asymptotics. Dimension 2 has
//! a closed-form decomposition since it sits on the Monte Carlo hot path.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Populations below this value are clamped and the state flagged; relative
/// entropies involving a clamped state are refused rather than silently wrong.
pub const POPULATION_CLAMP: f64 = 1e-300;

/// A finite-dimensional Hermitian matrix with its spectral decomposition
/// computed at construction.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    entries: CMatrix,
    eigenvalues: DVector<f64>,
    eigenvectors: CMatrix,
}

impl HermitianOperator {
    /// Validates finiteness and Hermiticity to 1e-12 (relative to the
    /// largest entry), symmetrizes, and eigendecomposes.
    pub fn new(entries: CMatrix) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n || n == 0 {
            return Err(Error::DimensionMismatch(n, entries.ncols()));
        }
        if entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::domain("operator has non-finite entries"));
        }
        let scale = entries.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
        let mut asym = 0.0f64;
        for r in 0..n {
            for c in r..n {
                asym = asym.max((entries[(r, c)] - entries[(c, r)].conj()).norm());
            }
        }
        if asym > 1e-12 * scale {
            return Err(Error::NotHermitian(asym));
        }
        let herm = (&entries + entries.adjoint()) * C64::new(0.5, 0.0);
        let (eigenvalues, eigenvectors) = hermitian_eigen(&herm);
        Ok(Self { entries: herm, eigenvalues, eigenvectors })
    }

    /// Builds from a real symmetric matrix given in row-major order.
    pub fn from_real(dim: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::DimensionMismatch(dim * dim, rows.len()));
        }
        let m = CMatrix::from_fn(dim, dim, |r, c| C64::new(rows[r * dim + c], 0.0));
        Self::new(m)
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: CMatrix::zeros(dim, dim),
            eigenvalues: DVector::zeros(dim),
            eigenvectors: CMatrix::identity(dim, dim),
        }
    }

    /// Σ_k coeff_k · op_k, revalidated and redecomposed.
    pub fn linear_combination(terms: &[(f64, &HermitianOperator)]) -> Result<Self> {
        let dim = terms
            .first()
            .map(|(_, op)| op.dim())
            .ok_or_else(|| Error::domain("empty linear combination"))?;
        let mut m = CMatrix::zeros(dim, dim);
        for (c, op) in terms {
            if op.dim() != dim {
                return Err(Error::DimensionMismatch(dim, op.dim()));
            }
            m += op.entries() * C64::new(*c, 0.0);
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Unitary of eigenvectors, one per column, matching `eigenvalues` order.
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    /// Tr[op · rho] for a density matrix given as a Gibbs state.
    pub fn expectation(&self, state: &GibbsState) -> f64 {
        let vb = state.basis().adjoint() * self.entries() * state.basis();
        (0..self.dim()).map(|a| state.populations()[a] * vb[(a, a)].re).sum()
    }
}

/// Eigendecomposition of a Hermitian matrix; dimension 2 uses the closed
/// form, larger dimensions a cyclic Jacobi iteration. Jacobi accumulates the
/// basis from exact unitary rotations, so eigenvectors stay orthonormal and
/// the decomposition stays backward-stable on degenerate spectra, which the
/// momentum-space oracles rely on at the 1e-9 level.
pub(crate) fn hermitian_eigen(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    if m.nrows() == 2 {
        let (vals, vecs) = eigen_2x2(m[(0, 0)].re, m[(1, 1)].re, m[(0, 1)]);
        return (DVector::from_column_slice(&vals), vecs);
    }
    jacobi_hermitian(m)
}

fn jacobi_hermitian(a: &CMatrix) -> (DVector<f64>, CMatrix) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut u = CMatrix::identity(n, n);
    let scale = a.iter().map(|z| z.norm()).fold(0.0f64, f64::max).max(1e-300);
    let tol = 1e-15 * scale;
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[(p, q)].norm());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let abs = apq.norm();
                if abs <= tol * 1e-2 {
                    continue;
                }
                // zero m[p][q] with the unitary plane rotation
                // V = [[c e^{i phi/2}, s e^{i phi/2}], [-s e^{-i phi/2}, c e^{-i phi/2}]]
                // where phi = arg(a_pq) and (c, s) diagonalize the
                // phase-absorbed real 2x2 block.
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let phase = apq / C64::new(abs, 0.0);
                let half = phase.sqrt();
                let tau = (aqq - app) / (2.0 * abs);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let vpp = half * c;
                let vpq = half * s;
                let vqp = half.conj() * (-s);
                let vqq = half.conj() * c;
                // columns p, q of M <- M V
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = mkp * vpp + mkq * vqp;
                    m[(k, q)] = mkp * vpq + mkq * vqq;
                }
                // rows p, q of M <- V^dagger M
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = vpp.conj() * mpk + vqp.conj() * mqk;
                    m[(q, k)] = vpq.conj() * mpk + vqq.conj() * mqk;
                }
                m[(p, q)] = C64::new(0.0, 0.0);
                m[(q, p)] = C64::new(0.0, 0.0);
                m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
                for k in 0..n {
                    let ukp = u[(k, p)];
                    let ukq = u[(k, q)];
                    u[(k, p)] = ukp * vpp + ukq * vqp;
                    u[(k, q)] = ukp * vpq + ukq * vqq;
                }
            }
        }
    }
    let vals = DVector::from_fn(n, |i, _| m[(i, i)].re);
    (vals, u)
}

/// Closed-form spectral decomposition of [[a, c], [c*, b]] with a, b real.
fn eigen_2x2(a: f64, b: f64, c: C64) -> ([f64; 2], CMatrix) {
    let d = 0.5 * (a - b);
    let cc = c.norm_sqr();
    if cc == 0.0 {
        return (
            [a, b],
            CMatrix::identity(2, 2),
        );
    }
    let r = (d * d + cc).sqrt();
    let mean = 0.5 * (a + b);
    // r - d via |c|^2/(r + d) when d > 0 to avoid cancellation
    let rmd = if d > 0.0 { cc / (r + d) } else { r - d };
    let vp = [c, C64::new(rmd, 0.0)];
    let vm = [C64::new(-rmd, 0.0), c.conj()];
    let norm = (cc + rmd * rmd).sqrt();
    let vecs = CMatrix::from_fn(2, 2, |row, col| {
        let v = if col == 0 { vp[row] } else { vm[row] };
        v / C64::new(norm, 0.0)
    });
    ([mean + r, mean - r], vecs)
}

/// Thermal state e^{-beta H}/Z stored spectrally: populations over the
/// eigenbasis of H, the eigenbasis itself, and log Z.
#[derive(Debug, Clone)]
pub struct GibbsState {
    populations: DVector<f64>,
    basis: CMatrix,
    beta: f64,
    log_partition: f64,
    clamped: bool,
}

impl GibbsState {
    pub fn dim(&self) -> usize {
        self.populations.len()
    }

    pub fn populations(&self) -> &DVector<f64> {
        &self.populations
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    /// True when some population underflowed and was clamped to 1e-300.
    pub fn clamped(&self) -> bool {
        self.clamped
    }

    /// Reconstructs the density matrix U diag(p) U^dagger.
    pub fn density_matrix(&self) -> CMatrix {
        let n = self.dim();
        let mut scaled = self.basis.clone();
        for c in 0..n {
            let p = C64::new(self.populations[c], 0.0);
            for r in 0..n {
                scaled[(r, c)] *= p;
            }
        }
        &scaled * self.basis.adjoint()
    }
}

/// Gibbs state of `h` at inverse temperature `beta`.
///
/// Populations are computed with a max-exponent shift so that large beta*||H||
/// cannot overflow; log Z = log Σ_a e^{-beta(E_a - E*)} - beta E* at the
/// shift point E* = min_a E_a.
pub fn gibbs_state(h: &HermitianOperator, beta: f64) -> Result<GibbsState> {
    if !beta.is_finite() {
        return Err(Error::domain(format!("non-finite beta {beta}")));
    }
    if beta <= 0.0 {
        return Err(Error::domain(format!("beta must be positive, got {beta}")));
    }
    if h.dim() < 2 {
        return Err(Error::domain("operator dimension must be at least 2"));
    }
    let (populations, log_partition, clamped) =
        populations_from_energies(h.eigenvalues().as_slice(), beta);
    Ok(GibbsState {
        populations: DVector::from_vec(populations),
        basis: h.eigenvectors().clone(),
        beta,
        log_partition,
        clamped,
    })
}

pub(crate) fn populations_from_energies(energies: &[f64], beta: f64) -> (Vec<f64>, f64, bool) {
    let emin = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut z = 0.0;
    let mut weights = Vec::with_capacity(energies.len());
    for &e in energies {
        let w = (-beta * (e - emin)).exp();
        weights.push(w);
        z += w;
    }
    let mut clamped = false;
    for w in &mut weights {
        *w /= z;
        if *w < POPULATION_CLAMP {
            *w = POPULATION_CLAMP;
            clamped = true;
        }
    }
    (weights, z.ln() - beta * emin, clamped)
}

/// Quantum relative entropy S(rho || sigma) = Tr[rho (log rho - log sigma)],
/// in nats, evaluated through both spectral decompositions.
pub fn relative_entropy(rho: &GibbsState, sigma: &GibbsState) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), sigma.dim()));
    }
    for state in [rho, sigma] {
        if state.clamped() {
            let min = state.populations().min();
            return Err(Error::DegenerateState(min));
        }
    }
    let overlap = rho.basis().adjoint() * sigma.basis();
    Ok(relative_entropy_spectral(
        rho.populations().as_slice(),
        sigma.populations().as_slice(),
        &overlap,
    ))
}

/// S(p, U || q, V) given the overlap matrix M = U^dagger V.
pub(crate) fn relative_entropy_spectral(p: &[f64], q: &[f64], overlap: &CMatrix) -> f64 {
    let n = p.len();
    let mut s = 0.0;
    for a in 0..n {
        s += p[a] * p[a].ln();
        for b in 0..n {
            s -= p[a] * overlap[(a, b)].norm_sqr() * q[b].ln();
        }
    }
    s
}

/// rho^s through eigen-population powers; rho^0 is the identity, rho^1 is rho.
pub fn fractional_power(rho: &GibbsState, s: f64) -> Result<CMatrix> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::domain(format!("fractional power exponent {s} outside [0, 1]")));
    }
    let n = rho.dim();
    let mut scaled = rho.basis().clone();
    for c in 0..n {
        let w = C64::new(rho.populations()[c].powf(s), 0.0);
        for r in 0..n {
            scaled[(r, c)] *= w;
        }
    }
    Ok(&scaled * rho.basis().adjoint())
}

/// Logarithmic mean (p - q)/(log p - log q), the closed form of
/// ∫_0^1 p^s q^{1-s} ds; continuous limit p at p = q.
pub fn log_mean(p: f64, q: f64) -> Result<f64> {
    if p <= 0.0 || q <= 0.0 || !p.is_finite() || !q.is_finite() {
        return Err(Error::domain(format!("log_mean requires positive finite arguments, got ({p}, {q})")));
    }
    Ok(log_mean_raw(p, q))
}

#[inline]
pub(crate) fn log_mean_raw(p: f64, q: f64) -> f64 {
    if (p - q).abs() <= 1e-12 * p.max(q) {
        0.5 * (p + q)
    } else {
        (p - q) / (p.ln() - q.ln())
    }
}
