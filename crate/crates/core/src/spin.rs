//! Static electron–nuclear spin Hamiltonian of a donor, its transition
//! frequencies, and the frequency derivatives that enter the Stark shift.
//!
//! Energies are in frequency units (Hz). The product basis is ordered
//! `|m_S, m_I>` with `m_S = +1/2, -1/2` outermost and `m_I = I .. -I` inner.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Bohr magneton over Planck's constant, Hz/T.
pub const BOHR_MAGNETON_HZ_PER_T: f64 = 1.399_624_493_61e10;

/// Minimum squared overlap with a product state required to label an eigenstate.
pub const LABEL_OVERLAP_THRESHOLD: f64 = 0.7;

/// Relative step used for the finite-difference derivative in `A`.
const HYPERFINE_REL_STEP: f64 = 1e-6;
/// Relative step for the `g_e` derivative; larger than the `A` step because
/// `df/dg_e` of a nuclear line is a small difference of ~10 GHz eigenvalues.
const G_FACTOR_REL_STEP: f64 = 1e-4;

/// A spin projection stored as twice its value, so `-5/2` is `HalfInt(-5)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInt(pub i32);

impl HalfInt {
    pub fn from_f64(value: f64) -> Option<Self> {
        let twice = value * 2.0;
        if twice.is_finite() && (twice - twice.round()).abs() < 1e-9 {
            Some(Self(twice.round() as i32))
        } else {
            None
        }
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{:+}", self.0 / 2)
        } else {
            write!(f, "{:+}/2", self.0)
        }
    }
}

/// Static parameters of one donor species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinSystem {
    /// Nuclear spin `I`, a positive multiple of 1/2.
    pub nuclear_spin: f64,
    /// Isotropic hyperfine constant `A`, Hz.
    pub hyperfine: f64,
    /// Electron g-factor.
    pub electron_g: f64,
    /// Nuclear gyromagnetic ratio `gamma_n / 2 pi`, Hz/T (signed).
    pub nuclear_gamma: f64,
    /// Quadratic Stark coefficient of `A`, um^2/V^2.
    pub eta_a: f64,
    /// Quadratic Stark coefficient of `g_e`, um^2/V^2.
    pub eta_g: f64,
}

impl SpinSystem {
    /// Antimony-121 in silicon-28, literature hyperfine/g/gamma values with the
    /// measured Stark coefficients.
    pub fn sb121() -> Self {
        Self {
            nuclear_spin: 2.5,
            hyperfine: 186.802e6,
            electron_g: 1.998_58,
            nuclear_gamma: 10.2551e6,
            eta_a: -3.54e-3,
            eta_g: 5.3e-6,
        }
    }

    pub fn with_hyperfine(self, hyperfine: f64) -> Self {
        Self { hyperfine, ..self }
    }

    pub fn with_electron_g(self, electron_g: f64) -> Self {
        Self { electron_g, ..self }
    }

    /// Twice the nuclear spin, validated.
    pub fn twice_spin(&self) -> Result<u32> {
        match HalfInt::from_f64(self.nuclear_spin) {
            Some(HalfInt(n)) if n >= 1 => Ok(n as u32),
            _ => Err(Error::Domain(format!(
                "nuclear spin must be a positive multiple of 1/2, got {}",
                self.nuclear_spin
            ))),
        }
    }

    /// Hilbert space dimension `2 (2I + 1)`.
    pub fn dimension(&self) -> Result<usize> {
        Ok(2 * (self.twice_spin()? as usize + 1))
    }

    fn validate(&self) -> Result<()> {
        self.twice_spin()?;
        let finite = [
            self.hyperfine,
            self.electron_g,
            self.nuclear_gamma,
            self.eta_a,
            self.eta_g,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain(
                "spin system parameters must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Which spin flips in a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransitionKind {
    Esr,
    Nmr,
}

/// A transition identified by its high-field quantum numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transition {
    /// Electron flip `m_S = +1/2 <-> -1/2` at fixed nuclear projection.
    Esr { m_i: HalfInt },
    /// Nuclear flip `m_I <-> m_I + 1` inside the `m_S` manifold.
    Nmr { m_s: HalfInt, m_i: HalfInt },
}

impl Transition {
    pub fn esr(m_i: f64) -> Self {
        Self::Esr {
            m_i: HalfInt::from_f64(m_i).expect("m_I must be a multiple of 1/2"),
        }
    }

    /// NMR transition between `m_i` and `m_i + 1`.
    pub fn nmr(m_s: f64, m_i: f64) -> Self {
        Self::Nmr {
            m_s: HalfInt::from_f64(m_s).expect("m_S must be +-1/2"),
            m_i: HalfInt::from_f64(m_i).expect("m_I must be a multiple of 1/2"),
        }
    }

    pub fn kind(&self) -> TransitionKind {
        match self {
            Self::Esr { .. } => TransitionKind::Esr,
            Self::Nmr { .. } => TransitionKind::Nmr,
        }
    }

    /// The two product-basis labels `(m_S, m_I)` the transition connects,
    /// lower `m_S`/`m_I` first.
    fn endpoints(&self) -> [(HalfInt, HalfInt); 2] {
        match *self {
            Self::Esr { m_i } => [(HalfInt(-1), m_i), (HalfInt(1), m_i)],
            Self::Nmr { m_s, m_i } => [(m_s, m_i), (m_s, HalfInt(m_i.0 + 2))],
        }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Esr { m_i } => write!(f, "esr mi={m_i}"),
            Self::Nmr { m_s, m_i } => write!(f, "nmr ms={m_s} mi={m_i}"),
        }
    }
}

/// Spin-j operators `(J_z, J_+)` in the basis `m = j .. -j`.
fn spin_operators(twice_j: u32) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = twice_j as usize + 1;
    let j = f64::from(twice_j) / 2.0;
    let mut jz = DMatrix::zeros(n, n);
    let mut jp = DMatrix::zeros(n, n);
    for k in 0..n {
        let m = j - k as f64;
        jz[(k, k)] = m;
        if k > 0 {
            // <m+1| J+ |m>, row k-1 holds m+1.
            jp[(k - 1, k)] = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
        }
    }
    (jz, jp)
}

/// `H/h = g_e mu_B B0 S_z - gamma_n B0 I_z + A S.I`, in Hz.
pub fn build_hamiltonian(sys: &SpinSystem, b0: f64) -> Result<DMatrix<Complex64>> {
    sys.validate()?;
    if !(b0 >= 0.0 && b0.is_finite()) {
        return Err(Error::Domain(format!(
            "B0 must be finite and >= 0, got {b0}"
        )));
    }
    let twice_i = sys.twice_spin()?;
    let (sz, sp) = spin_operators(1);
    let (iz, ip) = spin_operators(twice_i);
    let s_eye = DMatrix::<f64>::identity(2, 2);
    let i_eye = DMatrix::<f64>::identity(iz.nrows(), iz.nrows());
    let sm = sp.transpose();
    let im = ip.transpose();

    let electron_zeeman = sys.electron_g * BOHR_MAGNETON_HZ_PER_T * b0;
    let nuclear_zeeman = sys.nuclear_gamma * b0;
    let h = sz.kronecker(&i_eye) * electron_zeeman - s_eye.kronecker(&iz) * nuclear_zeeman
        + (sz.kronecker(&iz) + (sp.kronecker(&im) + sm.kronecker(&ip)) * 0.5) * sys.hyperfine;
    Ok(h.map(|x| Complex64::new(x, 0.0)))
}

/// Eigenenergies with their high-field labels.
#[derive(Debug, Clone)]
pub struct LabeledLevels {
    /// Energies in Hz, sorted ascending.
    pub energies: Vec<f64>,
    /// `(m_S, m_I)` of the dominant product state for each energy.
    pub labels: Vec<(HalfInt, HalfInt)>,
    /// Squared overlap with that product state.
    pub overlaps: Vec<f64>,
}

impl LabeledLevels {
    pub fn energy_of(&self, label: (HalfInt, HalfInt)) -> Option<f64> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .map(|k| self.energies[k])
    }
}

fn product_label(index: usize, twice_i: u32) -> (HalfInt, HalfInt) {
    let di = twice_i as usize + 1;
    let m_s = if index / di == 0 {
        HalfInt(1)
    } else {
        HalfInt(-1)
    };
    let m_i = HalfInt(twice_i as i32 - 2 * (index % di) as i32);
    (m_s, m_i)
}

/// Diagonalizes the Hamiltonian and labels each eigenstate by its dominant
/// product-basis component.
pub fn labeled_levels(sys: &SpinSystem, b0: f64) -> Result<LabeledLevels> {
    let h = build_hamiltonian(sys, b0)?;
    let twice_i = sys.twice_spin()?;
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut levels = LabeledLevels {
        energies: Vec::with_capacity(order.len()),
        labels: Vec::with_capacity(order.len()),
        overlaps: Vec::with_capacity(order.len()),
    };
    for &k in &order {
        let v = eig.eigenvectors.column(k);
        let (best, weight) =
            v.iter()
                .map(|c| c.norm_sqr())
                .enumerate()
                .fold(
                    (0, -1.0),
                    |acc, (i, w)| if w > acc.1 { (i, w) } else { acc },
                );
        let label = product_label(best, twice_i);
        if levels.labels.contains(&label) {
            return Err(Error::Identification(format!(
                "two eigenstates map to |m_S={}, m_I={}>",
                label.0, label.1
            )));
        }
        levels.energies.push(eig.eigenvalues[k]);
        levels.labels.push(label);
        levels.overlaps.push(weight);
    }
    Ok(levels)
}

fn check_label_exists(sys: &SpinSystem, t: &Transition) -> Result<()> {
    let twice_i = sys.twice_spin()? as i32;
    for (m_s, m_i) in t.endpoints() {
        if m_s.0.abs() != 1 || m_i.0.abs() > twice_i || (m_i.0 - twice_i) % 2 != 0 {
            return Err(Error::Identification(format!(
                "transition {t} does not exist for I = {}",
                sys.nuclear_spin
            )));
        }
    }
    Ok(())
}

/// Energies of the two levels of `t`, each required to be a nearly pure
/// product state.
fn transition_levels(levels: &LabeledLevels, t: &Transition) -> Result<(f64, f64)> {
    let mut out = [0.0; 2];
    for (slot, label) in out.iter_mut().zip(t.endpoints()) {
        let k = levels
            .labels
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| {
                Error::Identification(format!(
                    "no eigenstate labelled |m_S={}, m_I={}>",
                    label.0, label.1
                ))
            })?;
        if levels.overlaps[k] < LABEL_OVERLAP_THRESHOLD {
            return Err(Error::Identification(format!(
                "state |m_S={}, m_I={}> has overlap {:.3} < {LABEL_OVERLAP_THRESHOLD}; field too low to label",
                label.0, label.1, levels.overlaps[k]
            )));
        }
        *slot = levels.energies[k];
    }
    Ok((out[0], out[1]))
}

/// Transition frequency `|E_a - E_b|` from exact diagonalization, Hz.
pub fn transition_frequency(sys: &SpinSystem, b0: f64, t: &Transition) -> Result<f64> {
    check_label_exists(sys, t)?;
    let levels = labeled_levels(sys, b0)?;
    let (a, b) = transition_levels(&levels, t)?;
    Ok((a - b).abs())
}

/// `(df/dA, df/dg_e)` of a transition frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivities {
    /// Dimensionless.
    pub df_da: f64,
    /// Hz per unit g.
    pub df_dg: f64,
}

/// Central finite differences of [`transition_frequency`] in `A` and `g_e`.
pub fn transition_sensitivities(
    sys: &SpinSystem,
    b0: f64,
    t: &Transition,
) -> Result<Sensitivities> {
    let step = |x: f64, rel: f64| if x != 0.0 { x.abs() * rel } else { rel };
    let ha = step(sys.hyperfine, HYPERFINE_REL_STEP);
    let hg = step(sys.electron_g, G_FACTOR_REL_STEP);
    let f = |s: SpinSystem| transition_frequency(&s, b0, t);

    let df_da = (f(sys.with_hyperfine(sys.hyperfine + ha))?
        - f(sys.with_hyperfine(sys.hyperfine - ha))?)
        / (2.0 * ha);
    let df_dg = (f(sys.with_electron_g(sys.electron_g + hg))?
        - f(sys.with_electron_g(sys.electron_g - hg))?)
        / (2.0 * hg);
    Ok(Sensitivities { df_da, df_dg })
}
