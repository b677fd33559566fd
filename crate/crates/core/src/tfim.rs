//! Open-chain transverse-field Ising model: exact ground states and a
//! free-fermion energy oracle.
//!
//! Basis states are indexed by an integer `s` whose bit `i` is the
//! σ^z occupation of site `i` (1 = spin up, σ = +1).

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest chain length the exact solver accepts.
pub const MAX_EXACT_QUBITS: usize = 20;

const KRYLOV_DIM: usize = 30;
const MAX_RESTARTS: usize = 400;

/// `H = -J Σ σ^z_i σ^z_{i+1} - h Σ σ^x_i` on an open chain of `n_qubits` sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfimSpec {
    pub n_qubits: usize,
    pub coupling: f64,
    pub field: f64,
}

impl TfimSpec {
    pub fn new(n_qubits: usize, coupling: f64, field: f64) -> Result<Self> {
        let spec = Self {
            n_qubits,
            coupling,
            field,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Convenience constructor with `J = 1`.
    pub fn critical_ratio(n_qubits: usize, h_over_j: f64) -> Result<Self> {
        Self::new(n_qubits, 1.0, h_over_j)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::Invalid("n_qubits must be at least 1".into()));
        }
        if !(self.coupling.is_finite() && self.coupling >= 0.0) {
            return Err(Error::Invalid(format!("coupling J = {} must be >= 0", self.coupling)));
        }
        if !(self.field.is_finite() && self.field >= 0.0) {
            return Err(Error::Invalid(format!("field h = {} must be >= 0", self.field)));
        }
        Ok(())
    }

    pub fn n_bonds(&self) -> usize {
        self.n_qubits - 1
    }

    pub fn h_over_j(&self) -> f64 {
        self.field / self.coupling
    }

    /// Diagonal energy `-J Σ s_i s_{i+1}` of the basis state `s`.
    pub fn diagonal_energy(&self, s: usize) -> f64 {
        let n = self.n_qubits;
        // adjacent bits differ where (s ^ s>>1) has a one, restricted to the n-1 bonds
        let mask = if n >= 2 { (1usize << (n - 1)) - 1 } else { 0 };
        let unequal = ((s ^ (s >> 1)) & mask).count_ones() as f64;
        let bonds = self.n_bonds() as f64;
        -self.coupling * (bonds - 2.0 * unequal)
    }

    /// Matrix-free `out = H x` over the full 2^N basis.
    pub fn apply(&self, diag: &[f64], x: &[f64], out: &mut [f64]) {
        let n = self.n_qubits;
        let h = self.field;
        for (s, o) in out.iter_mut().enumerate() {
            let mut acc = diag[s] * x[s];
            for i in 0..n {
                acc -= h * x[s ^ (1 << i)];
            }
            *o = acc;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..1usize << self.n_qubits).map(|s| self.diagonal_energy(s)).collect()
    }

    /// Dense Hamiltonian; only intended for tests and tiny systems.
    pub fn dense_matrix(&self) -> Result<DMatrix<f64>> {
        check_cap(self.n_qubits, 12)?;
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for s in 0..dim {
            m[(s, s)] = self.diagonal_energy(s);
            for i in 0..self.n_qubits {
                m[(s ^ (1 << i), s)] -= self.field;
            }
        }
        Ok(m)
    }
}

/// Exact ground state of a [`TfimSpec`].
#[derive(Debug, Clone)]
pub struct GroundState {
    pub spec: TfimSpec,
    /// Non-negative, normalized amplitudes ψ(s) over the 2^N basis.
    pub amplitudes: Vec<f64>,
    pub energy: f64,
}

impl GroundState {
    /// Born probabilities ψ(s)².
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a * a).collect()
    }

    /// `<ψ|H|ψ> / <ψ|ψ>` evaluated directly from the amplitudes.
    pub fn rayleigh_quotient(&self) -> f64 {
        rayleigh(&self.spec, &self.spec.diagonal(), &self.amplitudes)
    }
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::Capacity {
            what: "n_qubits",
            value: n,
            cap,
        });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = dot(x, x).sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    norm
}

fn rayleigh(spec: &TfimSpec, diag: &[f64], x: &[f64]) -> f64 {
    let mut hx = vec![0.0; x.len()];
    spec.apply(diag, x, &mut hx);
    dot(x, &hx) / dot(x, x)
}

/// Project onto the global spin-flip-even sector, where the ground state lives.
fn symmetrize(x: &mut [f64]) {
    let full = x.len() - 1;
    for s in 0..x.len() / 2 {
        let avg = 0.5 * (x[s] + x[full ^ s]);
        x[s] = avg;
        x[full ^ s] = avg;
    }
}

/// Ground state via explicitly restarted Lanczos with full reorthogonalization,
/// seeded with the uniform positive vector.
pub fn solve_ground_state(spec: &TfimSpec) -> Result<GroundState> {
    solve_ground_state_with_cap(spec, MAX_EXACT_QUBITS)
}

pub fn solve_ground_state_with_cap(spec: &TfimSpec, cap: usize) -> Result<GroundState> {
    spec.validate()?;
    check_cap(spec.n_qubits, cap)?;
    let dim = 1usize << spec.n_qubits;
    let diag = spec.diagonal();
    let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs())) + spec.field * spec.n_qubits as f64;
    let tol = 1e-11 * scale.max(1.0);

    let mut x = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut hx = vec![0.0; dim];
    let mut residual = f64::INFINITY;
    let krylov = KRYLOV_DIM.min(dim);

    for restart in 0..MAX_RESTARTS {
        spec.apply(&diag, &x, &mut hx);
        let theta = dot(&x, &hx);
        residual = hx
            .iter()
            .zip(&x)
            .map(|(h, v)| (h - theta * v).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual < tol {
            return Ok(finish(spec, &diag, x));
        }

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(krylov);
        let mut alphas = Vec::with_capacity(krylov);
        let mut betas: Vec<f64> = Vec::with_capacity(krylov);
        basis.push(x.clone());
        let mut w = vec![0.0; dim];
        for j in 0..krylov {
            spec.apply(&diag, &basis[j], &mut w);
            let alpha = dot(&basis[j], &w);
            alphas.push(alpha);
            // two passes of classical Gram-Schmidt against the whole basis
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
                }
            }
            let beta = dot(&w, &w).sqrt();
            if j + 1 == krylov || beta < 1e-13 * scale.max(1.0) {
                break;
            }
            betas.push(beta);
            basis.push(w.iter().map(|v| v / beta).collect());
        }

        let k = alphas.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (lowest, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &e)| if e < acc.1 { (i, e) } else { acc });
        let y = eig.eigenvectors.column(lowest);
        x.iter_mut().for_each(|v| *v = 0.0);
        for (coef, v) in y.iter().zip(&basis) {
            x.iter_mut().zip(v).for_each(|(xi, vi)| *xi += coef * vi);
        }
        symmetrize(&mut x);
        if normalize(&mut x) == 0.0 {
            return Err(Error::NoConvergence {
                iterations: restart + 1,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_RESTARTS,
        residual,
    })
}

fn finish(spec: &TfimSpec, diag: &[f64], mut x: Vec<f64>) -> GroundState {
    // Perron-Frobenius: the ground state has a single sign; remove the global one
    // and any residual round-off of the wrong sign.
    let total: f64 = x.iter().sum();
    if total < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    x.iter_mut().for_each(|v| *v = v.abs());
    normalize(&mut x);
    let energy = rayleigh(spec, diag, &x);
    GroundState {
        spec: *spec,
        amplitudes: x,
        energy,
    }
}

/// Ground energy from the Jordan-Wigner quadratic form of the open chain.
///
/// In the Majorana basis the Hamiltonian is `(i/4) γ^T A γ` with `A` a real
/// antisymmetric tridiagonal 2N × 2N matrix whose couplings alternate
/// between `2h` (on-site) and `2J` (bond). Its singular values are the
/// single-particle energies, each appearing twice, so `E_0 = -¼ Σ |λ|` over
/// the spectrum of the sign-equivalent symmetric matrix.
pub fn free_fermion_energy(spec: &TfimSpec) -> Result<f64> {
    spec.validate()?;
    let dim = 2 * spec.n_qubits;
    let mut a = DMatrix::zeros(dim, dim);
    for k in 0..dim - 1 {
        let coupling = if k % 2 == 0 {
            2.0 * spec.field
        } else {
            2.0 * spec.coupling
        };
        a[(k, k + 1)] = coupling;
        a[(k + 1, k)] = coupling;
    }
    let eig = SymmetricEigen::try_new(a, f64::EPSILON, 0)
        .ok_or_else(|| Error::Domain("single-particle eigensolve failed".into()))?;
    Ok(-0.25 * eig.eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
}
