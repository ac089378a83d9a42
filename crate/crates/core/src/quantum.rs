//! Two-qubit polarization states.
//!
//! Basis order is (VV, VH, HV, HH): index 0 of each qubit is V, index 1 is
//! H, signal first.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Complex, Matrix2, Matrix4, SMatrix, SymmetricEigen, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::experiment::ChshSettings;

pub type C64 = Complex<f64>;
pub type Matrix4c = Matrix4<C64>;

/// Hermiticity and trace tolerance.
pub const STRUCTURE_TOLERANCE: f64 = 1e-10;
/// Most negative eigenvalue accepted by strict validation.
pub const EIGENVALUE_TOLERANCE: f64 = 1e-9;
/// Eigenvalue tolerance for printed, rounded linear-inversion fixtures.
pub const FIXTURE_EIGENVALUE_TOLERANCE: f64 = 0.15;

const VV: usize = 0;
const HH: usize = 3;

/// A Hermitian, unit-trace 4×4 matrix.
///
/// Positivity is enforced to a tolerance chosen at construction; use
/// [`DensityMatrix::min_eigenvalue`] to inspect how physical a state is.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: Matrix4c,
}

impl DensityMatrix {
    /// Strict validation: Hermitian and unit trace within 1e-10, eigenvalues
    /// ≥ −1e-9.
    pub fn new(m: Matrix4c) -> Result<Self> {
        Self::with_tolerance(m, EIGENVALUE_TOLERANCE)
    }

    /// As [`DensityMatrix::new`] with a custom eigenvalue tolerance.
    pub fn with_tolerance(m: Matrix4c, eigenvalue_tolerance: f64) -> Result<Self> {
        let rho = Self::structural(m)?;
        let min = rho.min_eigenvalue();
        if min < -eigenvalue_tolerance {
            return Err(Error::Validation(format!(
                "eigenvalue {min:.6e} is below -{eigenvalue_tolerance:e}"
            )));
        }
        Ok(rho)
    }

    /// Validation for published fixtures, which are rounded raw inversions.
    pub fn fixture(m: Matrix4c) -> Result<Self> {
        Self::with_tolerance(m, FIXTURE_EIGENVALUE_TOLERANCE)
    }

    /// Checks Hermiticity and trace only. Used for raw reconstructions,
    /// which may be non-positive.
    pub fn structural(m: Matrix4c) -> Result<Self> {
        if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Validation("non-finite entry".into()));
        }
        let asym = (m - m.adjoint())
            .iter()
            .fold(0.0f64, |a, z| a.max(z.norm()));
        if asym > STRUCTURE_TOLERANCE {
            return Err(Error::Validation(format!(
                "not Hermitian (deviation {asym:.3e})"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > STRUCTURE_TOLERANCE || tr.im.abs() > STRUCTURE_TOLERANCE {
            return Err(Error::Validation(format!("trace is {tr}, not 1")));
        }
        // symmetrize away sub-tolerance noise
        Ok(Self {
            m: (m + m.adjoint()).scale(0.5),
        })
    }

    /// Builds a state from separate real and imaginary parts, row-major.
    pub fn from_parts(real: &[[f64; 4]; 4], imag: &[[f64; 4]; 4]) -> Matrix4c {
        Matrix4c::from_fn(|i, j| C64::new(real[i][j], imag[i][j]))
    }

    pub fn matrix(&self) -> &Matrix4c {
        &self.m
    }

    /// Element `ρ_{ijkl}` in the 1 = V, 2 = H labelling, e.g. `(1,1,2,2)`.
    pub fn element(&self, i: usize, j: usize, k: usize, l: usize) -> Result<C64> {
        for x in [i, j, k, l] {
            if !(1..=2).contains(&x) {
                return Err(Error::Domain(format!(
                    "polarization label {x} is not 1 or 2"
                )));
            }
        }
        Ok(self.m[(2 * (i - 1) + (j - 1), 2 * (k - 1) + (l - 1))])
    }

    /// `ρ_{1122} = ⟨VV|ρ|HH⟩`.
    pub fn rho1122(&self) -> C64 {
        self.m[(VV, HH)]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let eig = SymmetricEigen::new(self.m);
        let mut v = [
            eig.eigenvalues[0],
            eig.eigenvalues[1],
            eig.eigenvalues[2],
            eig.eigenvalues[3],
        ];
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn is_positive(&self) -> bool {
        self.min_eigenvalue() >= -EIGENVALUE_TOLERANCE
    }

    /// `tr ρ²`.
    pub fn purity(&self) -> f64 {
        (self.m * self.m).trace().re
    }

    /// Nearest state obtained by clipping negative eigenvalues to zero and
    /// renormalizing the trace.
    pub fn project_positive(&self) -> Result<Self> {
        let eig = SymmetricEigen::new(self.m);
        let clipped = eig.eigenvalues.map(|x| x.max(0.0));
        let total: f64 = clipped.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Validation(
                "no positive spectral weight to project onto".into(),
            ));
        }
        let d = Matrix4c::from_diagonal(&clipped.map(|x| C64::new(x / total, 0.0)));
        let m = eig.eigenvectors * d * eig.eigenvectors.adjoint();
        Self::new(m)
    }
}

/// `(|VV⟩ + e^{iφ}|HH⟩)/√2`.
fn bell_vector(phi: f64) -> Vector4<C64> {
    Vector4::new(
        C64::new(FRAC_1_SQRT_2, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        C64::from_polar(FRAC_1_SQRT_2, phi),
    )
}

/// Projector onto `(|VV⟩ + e^{iφ}|HH⟩)/√2`.
pub fn bell_state(phi: f64) -> DensityMatrix {
    let v = bell_vector(phi);
    DensityMatrix { m: v * v.adjoint() }
}

/// `V·|Φ^φ⟩⟨Φ^φ| + (1 − V)·½(|VV⟩⟨VV| + |HH⟩⟨HH|)`.
pub fn visibility_mixed_state(visibility: f64, phi: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::Domain(format!(
            "visibility {visibility} is outside [0, 1]"
        )));
    }
    let mut m = bell_state(phi).m.scale(visibility);
    m[(VV, VV)] += C64::new(0.5 * (1.0 - visibility), 0.0);
    m[(HH, HH)] += C64::new(0.5 * (1.0 - visibility), 0.0);
    Ok(DensityMatrix { m })
}

/// `I/4`.
pub fn maximally_mixed() -> DensityMatrix {
    DensityMatrix {
        m: Matrix4c::identity().scale(0.25),
    }
}

/// `⟨Φ^φ|ρ|Φ^φ⟩`.
pub fn fidelity(rho: &DensityMatrix, phi: f64) -> f64 {
    let v = bell_vector(phi);
    (v.adjoint() * rho.m * v)[(0, 0)].re
}

/// Fidelity maximized over the Bell phase, with the maximizing φ in
/// `(−π, π]`.
pub fn max_fidelity(rho: &DensityMatrix) -> (f64, f64) {
    let c = rho.m[(VV, HH)];
    let base = 0.5 * (rho.m[(VV, VV)].re + rho.m[(HH, HH)].re);
    let phi = if c.norm() > 0.0 { -c.arg() } else { 0.0 };
    (base + c.norm(), phi)
}

/// Wootters concurrence `max(0, λ₁ − λ₂ − λ₃ − λ₄)`.
///
/// For positive states the λ's are the singular values of `Wᵀ(σ_y⊗σ_y)W`,
/// where the columns of `W` are the eigenvectors scaled by the square roots
/// of their eigenvalues. States with negative eigenvalues (raw
/// reconstructions) fall back to the square roots of the eigenvalues of
/// `ρ ρ̃`, `ρ̃ = (σ_y⊗σ_y) ρ* (σ_y⊗σ_y)`, with real parts clipped at zero.
pub fn concurrence(rho: &DensityMatrix) -> f64 {
    let yy = spin_flip();
    let eig = SymmetricEigen::new(rho.m);
    let mut l: Vec<f64> = if eig.eigenvalues.iter().all(|&x| x >= -EIGENVALUE_TOLERANCE) {
        let mut w = eig.eigenvectors;
        for (k, &p) in eig.eigenvalues.iter().enumerate() {
            let scale = p.max(0.0).sqrt();
            for r in 0..4 {
                w[(r, k)] *= scale;
            }
        }
        let tau = w.transpose() * yy * w;
        tau.singular_values().iter().copied().collect()
    } else {
        spin_flip_spectrum(&rho.m, &yy)
    };
    l.sort_by(|a, b| b.total_cmp(a));
    (l[0] - l[1] - l[2] - l[3]).clamp(0.0, 1.0)
}

fn spin_flip() -> Matrix4c {
    let sy = Matrix2::new(
        C64::new(0.0, 0.0),
        C64::new(0.0, -1.0),
        C64::new(0.0, 1.0),
        C64::new(0.0, 0.0),
    );
    sy.kronecker(&sy)
}

/// Square roots of the (clipped real parts of the) eigenvalues of `ρ ρ̃`.
fn spin_flip_spectrum(m: &Matrix4c, yy: &Matrix4c) -> Vec<f64> {
    let product = m * (yy * m.conjugate() * yy);
    // real 8×8 embedding [[A, −B], [B, A]] carries each eigenvalue and its
    // conjugate, so the real parts come in equal pairs
    let embed = SMatrix::<f64, 8, 8>::from_fn(|i, j| {
        let z = product[(i % 4, j % 4)];
        match (i < 4, j < 4) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let mut re: Vec<f64> = embed.complex_eigenvalues().iter().map(|z| z.re).collect();
    re.sort_by(|a, b| b.total_cmp(a));
    re.iter().step_by(2).map(|&x| x.max(0.0).sqrt()).collect()
}

fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }
}

/// Entanglement of formation from a concurrence value.
pub fn eof_from_concurrence(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    binary_entropy(0.5 * (1.0 + (1.0 - c * c).sqrt()))
}

/// Entanglement of formation.
pub fn eof(rho: &DensityMatrix) -> f64 {
    eof_from_concurrence(concurrence(rho))
}

/// Single-photon polarization observable for a half-wave plate at `hwp`
/// (rad) in front of a polarizer: the analyzer axis sits at `2·hwp`.
/// Eigenvalue +1 along the analyzer, −1 orthogonal to it; (V, H) order.
fn linear_observable(analyzer: f64) -> Matrix2<C64> {
    let (s, c) = (2.0 * analyzer).sin_cos();
    Matrix2::new(
        C64::new(-c, 0.0),
        C64::new(s, 0.0),
        C64::new(s, 0.0),
        C64::new(c, 0.0),
    )
}

/// Correlation `⟨A_s ⊗ A_i⟩` at half-wave-plate angles `phi_s`, `phi_i`.
///
/// The idler analyzer is mirrored (`−2φ_i`) so that the ideal state gives
/// `E = cos(4φ_s + 4φ_i)`.
pub fn correlation_from_density(rho: &DensityMatrix, phi_s: f64, phi_i: f64) -> f64 {
    let obs = linear_observable(2.0 * phi_s).kronecker(&linear_observable(-2.0 * phi_i));
    (rho.m * obs).trace().re
}

/// CHSH parameter `S = E₁₁ + E₁₂ + |E₂₁ − E₂₂|` from a state.
pub fn chsh_from_density(rho: &DensityMatrix, settings: &ChshSettings) -> Result<f64> {
    settings.validate()?;
    let [e11, e12, e21, e22] = settings
        .pairs()
        .map(|(s, i)| correlation_from_density(rho, s, i));
    Ok(e11 + e12 + (e21 - e22).abs())
}

/// Random full-rank state `G G† / tr(G G†)` from a complex Ginibre matrix.
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R) -> DensityMatrix {
    let g = Matrix4c::from_fn(|_, _| {
        C64::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
    });
    let m = g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix { m: m.unscale(tr) }
}
