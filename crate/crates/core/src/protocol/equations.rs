//! Numeric checks of the protocol's displayed state identities.
//!
//! Each [`Equation`] builds both sides as vectors from `ψ`. The reported
//! residual compares rays: both sides are normalized and aligned by the best
//! global phase. The literal (unnormalized, unaligned) distance and the
//! complex factor relating the two sides are kept for diagnostics.

use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use super::{build_resource, Resource};
use crate::error::{Error, Result};
use crate::measurement::{victor_kets, BellOutcome};
use crate::statevec::{Amplitude, PureQubit, StateVector, Unitary2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Equation {
    /// Input ⊗ singlet in the Bell basis of (1, 2).
    TeleportExpansion,
    /// Singlet in the preparer's `{x, y}` basis.
    SingletInVictorBasis,
    /// Ψ⁺, Φ⁺, Φ⁻ in the preparer's basis.
    OtherBellStatesInVictorBasis,
    /// Input ⊗ GHZ in the Bell basis of (1, 2).
    GhzExpansion,
    /// Post-Ψ⁻ state of (3, 4, 5) in the Bell basis of (3, 4).
    SecondBellExpansion,
    /// Post-(Ψ⁻, Ψ⁺) state in the preparer's basis on particles 1 and 3.
    TwoCopyVictorExpansion,
}

impl Equation {
    pub const ALL: [Equation; 6] = [
        Equation::TeleportExpansion,
        Equation::SingletInVictorBasis,
        Equation::OtherBellStatesInVictorBasis,
        Equation::GhzExpansion,
        Equation::SecondBellExpansion,
        Equation::TwoCopyVictorExpansion,
    ];

    /// Identifier used by `verify` and `decomposition_residual`.
    pub fn id(self) -> u32 {
        match self {
            Equation::TeleportExpansion => 3,
            Equation::SingletInVictorBasis => 6,
            Equation::OtherBellStatesInVictorBasis => 9,
            Equation::GhzExpansion => 14,
            Equation::SecondBellExpansion => 16,
            Equation::TwoCopyVictorExpansion => 19,
        }
    }

    pub fn from_id(id: u32) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.id() == id)
            .ok_or(Error::UnknownEquation(id))
    }

    /// `(lhs, rhs)` pairs; several for the three-state identity.
    pub fn sides(self, psi: &PureQubit) -> Result<Vec<(StateVector, StateVector)>> {
        let k = Kets::new(psi);
        match self {
            Equation::TeleportExpansion => {
                let lhs = k.psi.tensor(&build_resource(Resource::Epr)?)?;
                let terms = [
                    (BellOutcome::PsiPlus, Unitary2::sigma_z()),
                    (BellOutcome::PsiMinus, Unitary2::identity()),
                    (BellOutcome::PhiPlus, Unitary2::i_sigma_y()),
                    (BellOutcome::PhiMinus, Unitary2::sigma_x().scaled(r(-1.0))),
                ];
                let rhs = sum(terms.iter().map(|(b, op)| bell(*b).tensor(&apply(op, &k.psi))))?.scale(r(-0.5));
                Ok(vec![(lhs, rhs)])
            }
            Equation::SingletInVictorBasis => {
                let rhs = k.x.tensor(&k.perp)?.add(&k.y.tensor(&k.psi)?)?.scale(r(FRAC_1_SQRT_2));
                Ok(vec![(bell(BellOutcome::PsiMinus), rhs)])
            }
            Equation::OtherBellStatesInVictorBasis => {
                let rows = [
                    (BellOutcome::PsiPlus, Unitary2::sigma_z(), -FRAC_1_SQRT_2),
                    (BellOutcome::PhiPlus, Unitary2::i_sigma_y(), FRAC_1_SQRT_2),
                    (BellOutcome::PhiMinus, Unitary2::sigma_x(), FRAC_1_SQRT_2),
                ];
                rows.iter()
                    .map(|(b, op, coeff)| {
                        let rhs =
                            k.x.tensor(&apply(op, &k.perp))?
                                .add(&k.y.tensor(&apply(op, &k.psi))?)?
                                .scale(r(*coeff));
                        Ok((bell(*b), rhs))
                    })
                    .collect()
            }
            Equation::GhzExpansion => {
                let lhs = k.psi.tensor(&build_resource(Resource::Ghz4)?)?;
                Ok(vec![(lhs, ghz_expansion_rhs(psi)?)])
            }
            Equation::SecondBellExpansion => {
                let (a, b) = (r(psi.alpha()), psi.beta());
                let singlet = bell(BellOutcome::PsiMinus);
                // β|011⟩ + α|100⟩ on (3, 4, 5)
                let three = three_qubit(&[(0b011, b), (0b100, a)]);
                let lhs = singlet.tensor(&three)?.scale(r(-0.5));
                let flipped = StateVector::qubit(a, -b);
                let inner = bell(BellOutcome::PsiPlus)
                    .tensor(&k.psi)?
                    .sub(&bell(BellOutcome::PsiMinus).tensor(&flipped)?)?;
                let rhs = singlet.tensor(&inner)?.scale(r(-0.5));
                Ok(vec![(lhs, rhs)])
            }
            Equation::TwoCopyVictorExpansion => {
                let (a, b) = (r(psi.alpha()), psi.beta());
                let lhs = bell(BellOutcome::PsiMinus)
                    .tensor(&bell(BellOutcome::PsiPlus))?
                    .tensor(&k.psi)?
                    .scale(r(-0.5));
                // x₁(α|1⟩ − β*|0⟩)₂ + y₁(α|0⟩ + β|1⟩)₂
                let pair12 = k.x.tensor(&k.perp)?.add(&k.y.tensor(&k.psi)?)?;
                // x₃(α|1⟩ + β*|0⟩)₄ − y₃(α|0⟩ − β|1⟩)₄
                let pair34 =
                    k.x.tensor(&StateVector::qubit(b.conj(), a))?
                        .sub(&k.y.tensor(&StateVector::qubit(a, -b))?)?;
                let rhs = pair12.tensor(&pair34)?.tensor(&k.psi)?.scale(r(0.25));
                Ok(vec![(lhs, rhs)])
            }
        }
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualDetail {
    /// Ray distance: normalized sides, best global phase.
    pub ray: f64,
    /// `‖lhs − rhs‖` as written.
    pub literal: f64,
    /// `⟨rhs|lhs⟩ / ⟨rhs|rhs⟩`: the factor by which the sides differ when
    /// they are parallel.
    pub ratio: Complex64,
}

/// Worst pair of an equation (largest ray distance).
pub fn residual_detail(eq: Equation, psi: &PureQubit) -> Result<ResidualDetail> {
    let mut worst: Option<ResidualDetail> = None;
    for (lhs, rhs) in eq.sides(psi)? {
        let d = ResidualDetail {
            ray: lhs.ray_distance(&rhs)?,
            literal: lhs.sub(&rhs)?.norm(),
            ratio: rhs.inner(&lhs)? / rhs.norm_sqr(),
        };
        if worst.is_none_or(|w| d.ray > w.ray) {
            worst = Some(d);
        }
    }
    worst.ok_or(Error::UnknownEquation(eq.id()))
}

/// Ray residual of the displayed equation numbered `id`.
pub fn decomposition_residual(id: u32, psi: &PureQubit) -> Result<f64> {
    Ok(residual_detail(Equation::from_id(id)?, psi)?.ray)
}

/// The displayed GHZ expansion compared against `ψ ⊗ (|0011⟩ − |1100⟩)/√2`,
/// i.e. the four-particle resource with the opposite relative sign.
pub fn ghz_expansion_against_minus_resource(psi: &PureQubit) -> Result<f64> {
    let s = r(FRAC_1_SQRT_2);
    let mut amps = vec![r(0.0); 16];
    amps[0b0011] = s;
    amps[0b1100] = -s;
    let minus = StateVector::from_amplitudes(amps)?;
    psi.state().tensor(&minus)?.ray_distance(&ghz_expansion_rhs(psi)?)
}

fn ghz_expansion_rhs(psi: &PureQubit) -> Result<StateVector> {
    let (a, b) = (r(psi.alpha()), psi.beta());
    let three = |c011: Amplitude, c100: Amplitude| three_qubit(&[(0b011, c011), (0b100, c100)]);
    sum([
        bell(BellOutcome::PsiPlus).tensor(&three(b, -a)),
        bell(BellOutcome::PsiMinus).tensor(&three(-b, -a)),
        bell(BellOutcome::PhiPlus).tensor(&three(a, -b)),
        bell(BellOutcome::PhiMinus).tensor(&three(a, b)),
    ])
    .map(|v| v.scale(r(0.5)))
}

struct Kets {
    psi: StateVector,
    perp: StateVector,
    x: StateVector,
    y: StateVector,
}

impl Kets {
    fn new(psi: &PureQubit) -> Self {
        let (x, y) = victor_kets(psi);
        Self {
            psi: psi.state(),
            perp: psi.complement_state(),
            x: StateVector::qubit(x[0], x[1]),
            y: StateVector::qubit(y[0], y[1]),
        }
    }
}

fn r(x: f64) -> Amplitude {
    Complex64::new(x, 0.0)
}

fn bell(b: BellOutcome) -> StateVector {
    StateVector::from_amplitudes(b.local_vector()).expect("Bell vectors have length 4")
}

fn apply(op: &Unitary2, v: &StateVector) -> StateVector {
    let [a0, a1] = op.apply([v.amplitude(0), v.amplitude(1)]);
    StateVector::qubit(a0, a1)
}

fn three_qubit(terms: &[(usize, Amplitude)]) -> StateVector {
    let mut amps = vec![r(0.0); 8];
    for &(i, a) in terms {
        amps[i] += a;
    }
    StateVector::from_amplitudes(amps).expect("length 8")
}

fn sum(terms: impl IntoIterator<Item = Result<StateVector>>) -> Result<StateVector> {
    let mut acc: Option<StateVector> = None;
    for t in terms {
        let t = t?;
        acc = Some(match acc {
            None => t,
            Some(a) => a.add(&t)?,
        });
    }
    acc.ok_or(Error::ZeroNorm)
}
