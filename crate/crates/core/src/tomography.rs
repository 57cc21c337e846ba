//! Single-qubit state and process tomography in the Pauli basis.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};
use num_complex::Complex64;

use crate::engine::QubitState;
use crate::error::{Error, Result};

const BLOCH_TOLERANCE: f64 = 1e-6;

/// `I, X, Y, Z`.
pub fn pauli(index: usize) -> Matrix2<Complex64> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    match index {
        0 => Matrix2::identity(),
        1 => Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)),
        2 => Matrix2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)),
        3 => Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)),
        _ => panic!("Pauli index out of range: {index}"),
    }
}

/// The six cardinal states `+X, -X, +Y, -Y, +Z, -Z`.
pub fn cardinal_states() -> [QubitState; 6] {
    [
        QubitState::from_bloch([1.0, 0.0, 0.0]),
        QubitState::from_bloch([-1.0, 0.0, 0.0]),
        QubitState::from_bloch([0.0, 1.0, 0.0]),
        QubitState::from_bloch([0.0, -1.0, 0.0]),
        QubitState::from_bloch([0.0, 0.0, 1.0]),
        QubitState::from_bloch([0.0, 0.0, -1.0]),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateEstimate {
    pub state: QubitState,
    /// Set when the measured Bloch vector was longer than 1 + 1e-6.
    pub flagged: bool,
}

/// Linear-inversion state estimate, projected onto the Bloch ball.
pub fn state_tomography(expectations: [f64; 3]) -> Result<StateEstimate> {
    if expectations
        .iter()
        .any(|e| !e.is_finite() || e.abs() > 1.0 + BLOCH_TOLERANCE)
    {
        return Err(Error::Domain(format!(
            "expectation values must lie in [-1, 1], got {expectations:?}"
        )));
    }
    let r = expectations.iter().map(|e| e * e).sum::<f64>().sqrt();
    let flagged = r > 1.0 + BLOCH_TOLERANCE;
    if flagged {
        log::warn!("Bloch vector length {r:.9} exceeds 1; projecting onto the pure states");
    }
    let bloch = if r > 1.0 {
        expectations.map(|e| e / r)
    } else {
        expectations
    };
    Ok(StateEstimate {
        state: QubitState::from_bloch(bloch),
        flagged,
    })
}

/// Process matrix `chi` with `L(rho) = sum_mn chi_mn P_m rho P_n`, trace one
/// for trace-preserving channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessMatrix(pub Matrix4<Complex64>);

impl ProcessMatrix {
    pub fn from_kraus(kraus: &[Matrix2<Complex64>]) -> Self {
        let mut chi = Matrix4::zeros();
        for k in kraus {
            let coeffs: Vec<Complex64> = (0..4)
                .map(|m| (pauli(m).adjoint() * k).trace() * 0.5)
                .collect();
            for m in 0..4 {
                for n in 0..4 {
                    chi[(m, n)] += coeffs[m] * coeffs[n].conj();
                }
            }
        }
        Self(chi)
    }

    pub fn from_unitary(u: &Matrix2<Complex64>) -> Self {
        Self::from_kraus(std::slice::from_ref(u))
    }

    pub fn identity() -> Self {
        Self::from_unitary(&pauli(0))
    }

    /// A pi rotation about Y.
    pub fn pi_y() -> Self {
        Self::from_unitary(&pauli(2))
    }

    pub fn depolarizing() -> Self {
        Self(Matrix4::identity() * Complex64::new(0.25, 0.0))
    }

    pub fn apply(&self, rho: &QubitState) -> QubitState {
        let mut out = Matrix2::zeros();
        for m in 0..4 {
            for n in 0..4 {
                let c = self.0[(m, n)];
                if c.norm() != 0.0 {
                    out += pauli(m) * rho.0 * pauli(n) * c;
                }
            }
        }
        QubitState(out)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .0
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Hermitian part, negative eigenvalues clipped, trace renormalized to one.
    pub fn physical(&self) -> Self {
        let herm = (self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = herm.symmetric_eigen();
        let mut out = Matrix4::zeros();
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda > 0.0 {
                let v = eig.eigenvectors.column(k);
                out += v * v.adjoint() * Complex64::new(lambda, 0.0);
            }
        }
        let tr = out.trace().re;
        if tr > 0.0 {
            out /= Complex64::new(tr, 0.0);
        }
        Self(out)
    }
}

/// Linear-inversion process tomography from matched input/output states,
/// least squares over all pairs, followed by [`ProcessMatrix::physical`].
pub fn process_matrix(inputs: &[QubitState], outputs: &[QubitState]) -> Result<ProcessMatrix> {
    if inputs.len() != outputs.len() {
        return Err(Error::Shape(format!(
            "{} input states but {} output states",
            inputs.len(),
            outputs.len()
        )));
    }
    let rows = 4 * inputs.len();
    let mut design = DMatrix::<Complex64>::zeros(rows, 16);
    let mut rhs = DVector::<Complex64>::zeros(rows);
    let paulis: Vec<_> = (0..4).map(pauli).collect();
    for (j, (rho, out)) in inputs.iter().zip(outputs).enumerate() {
        for m in 0..4 {
            for n in 0..4 {
                let term = paulis[m] * rho.0 * paulis[n];
                for (e, value) in term.iter().enumerate() {
                    design[(4 * j + e, 4 * m + n)] = *value;
                }
            }
        }
        for (e, value) in out.0.iter().enumerate() {
            rhs[4 * j + e] = *value;
        }
    }
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * smax)
        .count();
    if rank < 16 {
        return Err(Error::Span(format!(
            "input states span only {rank} of 16 process dimensions"
        )));
    }
    let x = svd
        .solve(&rhs, 1e-12 * smax)
        .map_err(|e| Error::Runtime(e.to_string()))?;
    let chi = Matrix4::from_fn(|m, n| x[4 * m + n]);
    Ok(ProcessMatrix(chi).physical())
}

/// `Re Tr(chi_a chi_b)`, clamped to `[0, 1]`.
pub fn process_fidelity(a: &ProcessMatrix, b: &ProcessMatrix) -> f64 {
    let f = (a.0 * b.0).trace().re;
    if !(0.0..=1.0).contains(&f) {
        log::debug!("process fidelity {f:.3e} clamped to [0, 1]");
    }
    f.clamp(0.0, 1.0)
}
