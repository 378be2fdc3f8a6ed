//! Assisted cloning and orthogonal complementing.
//!
//! Stage one teleports the unknown qubit (over an EPR pair, a four-particle
//! GHZ state, or a 2N-particle chain state). Stage two has the preparer
//! measure the particles left entangled with each party's kept particle in
//! the `{|x⟩, |y⟩}` basis and send one bit per copy. Each party then holds
//! the input state (`y`) or its orthogonal complement (`x`) exactly.

mod engine;
pub mod equations;
pub mod tables;

use rand::Rng;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use crate::error::{Error, Result};
use crate::measurement::{bell_basis, project, victor_basis, BellFamily, BellOutcome, VictorOutcome};
use crate::parties::{PartyId, Transcript};
use crate::statevec::{fidelity_pure, Amplitude, DensityMatrix2, PureQubit, StateVector, Unitary2, MAX_PARTICLES};

pub use engine::Branch;
pub use tables::CorrectionTable;

/// Largest chain the CLI and engines accept (2N + 1 = 11 particles).
pub const MAX_CHAIN_COPIES: usize = 5;

/// Pauli fix-up, meaningful up to a global phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Correction {
    I,
    SigmaX,
    SigmaY,
    SigmaZ,
}

impl Correction {
    pub const ALL: [Correction; 4] = [
        Correction::I,
        Correction::SigmaX,
        Correction::SigmaY,
        Correction::SigmaZ,
    ];

    pub fn unitary(self) -> Unitary2 {
        match self {
            Correction::I => Unitary2::identity(),
            Correction::SigmaX => Unitary2::sigma_x(),
            Correction::SigmaY => Unitary2::sigma_y(),
            Correction::SigmaZ => Unitary2::sigma_z(),
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Correction::I => "I",
            Correction::SigmaX => "X",
            Correction::SigmaY => "Y",
            Correction::SigmaZ => "Z",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.code() == code)
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OutcomeClass {
    /// Holds the input state, produced via the preparer's bit.
    Copy,
    /// Holds the orthogonal complement of the input state.
    Complement,
    /// Holds the teleported input state.
    Original,
}

impl OutcomeClass {
    pub const ALL: [OutcomeClass; 3] = [OutcomeClass::Copy, OutcomeClass::Complement, OutcomeClass::Original];

    pub fn code(self) -> &'static str {
        match self {
            OutcomeClass::Copy => "copy",
            OutcomeClass::Complement => "complement",
            OutcomeClass::Original => "original",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.code() == code)
    }

    /// Whether the declared target is `ψ⊥` rather than `ψ`.
    pub fn targets_complement(self) -> bool {
        self == OutcomeClass::Complement
    }
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProtocolKind {
    Single,
    Double,
    Chain(usize),
}

impl ProtocolKind {
    /// Number of copies (and preparer bits) the protocol produces.
    pub fn copies(self) -> usize {
        match self {
            ProtocolKind::Single => 1,
            ProtocolKind::Double => 2,
            ProtocolKind::Chain(n) => n,
        }
    }

    pub fn name(self) -> String {
        match self {
            ProtocolKind::Single => "single".into(),
            ProtocolKind::Double => "double".into(),
            ProtocolKind::Chain(n) => format!("chain{n}"),
        }
    }
}

/// Size of an N-copy chain: 2N resource particles shared by N + 1 parties.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainConfig {
    copies: usize,
}

impl ChainConfig {
    pub fn new(copies: usize) -> Result<Self> {
        if copies < 2 {
            return Err(Error::ChainTooShort(copies));
        }
        if copies > MAX_CHAIN_COPIES {
            return Err(Error::TooManyParticles(2 * copies + 1));
        }
        Ok(Self { copies })
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn resource_particles(&self) -> usize {
        2 * self.copies
    }

    pub fn parties(&self) -> usize {
        self.copies + 1
    }

    /// Resource particles (numbered 2..=2N+1 in the full register) held by
    /// party `k`. The first and last hold one, the rest two.
    pub fn holdings(&self, k: usize) -> Vec<usize> {
        match k {
            1 => vec![2],
            k if k == self.parties() => vec![2 * self.copies + 1],
            k => vec![2 * k - 1, 2 * k],
        }
    }

    /// Bell family party `k` (2..=N) can observe on its pair. Known to every
    /// party from the resource layout; it is what lets a single sign bit
    /// identify the outcome.
    pub fn intermediate_family(&self, k: usize) -> BellFamily {
        // resource positions of the pair are 2k-2 and 2k-1; the chain state
        // flips value between positions N and N+1
        if 2 * k - 2 == self.copies {
            BellFamily::Psi
        } else {
            BellFamily::Phi
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resource {
    Epr,
    Ghz4,
    Chain(usize),
}

/// Shared entangled resource.
///
/// EPR is the singlet `(|01⟩ − |10⟩)/√2`, GHZ4 is `(|0011⟩ + |1100⟩)/√2`,
/// and `Chain(N)` is `(|0^N 1^N⟩ + |1^N 0^N⟩)/√2` on 2N particles.
pub fn build_resource(kind: Resource) -> Result<StateVector> {
    match kind {
        Resource::Epr => {
            let s = FRAC_1_SQRT_2;
            StateVector::from_amplitudes(vec![
                Amplitude::new(0.0, 0.0),
                Amplitude::new(s, 0.0),
                Amplitude::new(-s, 0.0),
                Amplitude::new(0.0, 0.0),
            ])
        }
        Resource::Ghz4 => build_resource(Resource::Chain(2)),
        Resource::Chain(n) => {
            if n < 2 {
                return Err(Error::ChainTooShort(n));
            }
            if 2 * n > MAX_PARTICLES {
                return Err(Error::TooManyParticles(2 * n));
            }
            let low = (1usize << n) - 1;
            let mut amps = vec![Amplitude::new(0.0, 0.0); 1 << (2 * n)];
            amps[low] = Amplitude::new(FRAC_1_SQRT_2, 0.0);
            amps[low << n] = Amplitude::new(FRAC_1_SQRT_2, 0.0);
            StateVector::from_amplitudes(amps)
        }
    }
}

pub fn prepare_unknown(theta: f64, phi: f64) -> Result<PureQubit> {
    PureQubit::from_angles(theta, phi)
}

/// The fix-up that turns the teleported particle into `ψ`.
pub fn bob_correction_lookup(outcome: BellOutcome) -> Correction {
    match outcome {
        BellOutcome::PsiMinus => Correction::I,
        BellOutcome::PsiPlus => Correction::SigmaZ,
        BellOutcome::PhiPlus => Correction::SigmaY,
        BellOutcome::PhiMinus => Correction::SigmaX,
    }
}

/// Alice's class and fix-up once she has her Bell outcome and the
/// preparer's bit. The rotation is Bob's; the bit only decides the class.
pub fn alice_interpretation(bell: BellOutcome, victor: VictorOutcome) -> (OutcomeClass, Correction) {
    let class = match victor {
        VictorOutcome::Y => OutcomeClass::Copy,
        VictorOutcome::X => OutcomeClass::Complement,
    };
    (class, bob_correction_lookup(bell))
}

#[derive(Debug, Clone)]
pub struct PartyResult {
    pub party: PartyId,
    pub particle: usize,
    pub state: DensityMatrix2,
    pub class: OutcomeClass,
    pub correction: Correction,
    pub fidelity_psi: f64,
    pub fidelity_perp: f64,
}

impl PartyResult {
    /// Fidelity to the declared target (`ψ⊥` for complements, else `ψ`).
    pub fn target_fidelity(&self) -> f64 {
        if self.class.targets_complement() {
            self.fidelity_perp
        } else {
            self.fidelity_psi
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolResult {
    pub kind: ProtocolKind,
    pub parties: Vec<PartyResult>,
    pub bell_outcomes: Vec<BellOutcome>,
    pub victor_outcomes: Vec<VictorOutcome>,
    /// Product of the Born probabilities along the realized branch.
    pub branch_probability: f64,
    pub final_state: StateVector,
    pub transcript: Transcript,
}

impl ProtocolResult {
    pub fn party(&self, id: PartyId) -> Option<&PartyResult> {
        self.parties.iter().find(|p| p.party == id)
    }

    /// Parties whose state came from the preparer's bit.
    pub fn assisted(&self) -> impl Iterator<Item = &PartyResult> {
        self.parties.iter().filter(|p| p.class != OutcomeClass::Original)
    }

    pub fn min_target_fidelity(&self) -> f64 {
        self.parties
            .iter()
            .map(PartyResult::target_fidelity)
            .fold(f64::INFINITY, f64::min)
    }
}

/// One-copy protocol over an EPR pair shared by Alice (2) and Bob (3).
pub fn run_single<R: Rng + ?Sized>(psi: &PureQubit, rng: &mut R) -> Result<ProtocolResult> {
    engine::single(psi, &mut engine::Sampled(rng))
}

/// Two-copy protocol over the four-particle GHZ state: Alice holds 2, Bob
/// 3 and 4, Carla 5.
pub fn run_double<R: Rng + ?Sized>(psi: &PureQubit, rng: &mut R) -> Result<ProtocolResult> {
    engine::chain(
        psi,
        ChainConfig::new(2)?,
        ProtocolKind::Double,
        &mut engine::Sampled(rng),
    )
}

/// N-copy generalization with parties named `party1..party{N+1}`.
pub fn run_chain<R: Rng + ?Sized>(psi: &PureQubit, config: ChainConfig, rng: &mut R) -> Result<ProtocolResult> {
    engine::chain(
        psi,
        config,
        ProtocolKind::Chain(config.copies()),
        &mut engine::Sampled(rng),
    )
}

pub fn run<R: Rng + ?Sized>(kind: ProtocolKind, psi: &PureQubit, rng: &mut R) -> Result<ProtocolResult> {
    match kind {
        ProtocolKind::Single => run_single(psi, rng),
        ProtocolKind::Double => run_double(psi, rng),
        ProtocolKind::Chain(n) => run_chain(psi, ChainConfig::new(n)?, rng),
    }
}

/// Every classical branch with nonzero probability, each run to completion.
pub fn enumerate_branches(kind: ProtocolKind, psi: &PureQubit) -> Result<Vec<Branch>> {
    engine::enumerate(kind, psi)
}

/// Alice's particle-2 state in the one-copy protocol after the preparer
/// has measured but before his bit reaches her, averaged over his outcome.
/// Returned per Alice Bell outcome (she knows it) together with its
/// probability. Computed by exact branch enumeration.
pub fn alice_state_before_victor_bit(psi: &PureQubit) -> Result<Vec<(BellOutcome, f64, DensityMatrix2)>> {
    let start = psi.state().tensor(&build_resource(Resource::Epr)?)?;
    let bells = bell_basis(3, 1, 2)?;
    let vb = victor_basis(psi, 3, 1)?;
    let mut out = Vec::with_capacity(4);
    for b in BellOutcome::ALL {
        let after_bell = project(&start, &bells, b)?;
        let corrected = after_bell
            .post_state
            .apply_one(&bob_correction_lookup(b).unitary(), 3)?;
        let mut parts = Vec::with_capacity(2);
        for v in VictorOutcome::ALL {
            let rec = project(&corrected, &vb, v)?;
            parts.push((rec.probability, rec.post_state.reduced_density(2)?));
        }
        let averaged = DensityMatrix2::mixture(parts.iter().map(|(w, rho)| (*w, rho)));
        out.push((b, after_bell.probability, averaged));
    }
    Ok(out)
}

/// Fidelity to `ψ` after the fixed rotation `iσy`. For real inputs this
/// turns every complement into a copy.
pub fn fidelity_after_real_rotation(result: &PartyResult, psi: &PureQubit) -> f64 {
    fidelity_pure(&result.state.conjugate_by(&Unitary2::i_sigma_y()), psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec::EXACT_TOL;

    #[test]
    fn resources() {
        let epr = build_resource(Resource::Epr).unwrap();
        let s = FRAC_1_SQRT_2;
        let expected = [0.0, s, -s, 0.0];
        for (a, e) in epr.amplitudes().iter().zip(expected) {
            assert!((a - Amplitude::new(e, 0.0)).norm() < 1e-15);
        }
        let ghz = build_resource(Resource::Ghz4).unwrap();
        for (i, a) in ghz.amplitudes().iter().enumerate() {
            let e = if i == 3 || i == 12 { s } else { 0.0 };
            assert!((a - Amplitude::new(e, 0.0)).norm() < 1e-15);
        }
        assert_eq!(ghz, build_resource(Resource::Chain(2)).unwrap());
        assert_eq!(build_resource(Resource::Chain(1)), Err(Error::ChainTooShort(1)));
        let c3 = build_resource(Resource::Chain(3)).unwrap();
        assert!((c3.amplitude(0b000111).re - s).abs() < 1e-15);
        assert!((c3.amplitude(0b111000).re - s).abs() < 1e-15);
    }

    #[test]
    fn chain_layout() {
        let c = ChainConfig::new(3).unwrap();
        assert_eq!(c.resource_particles(), 6);
        assert_eq!(c.parties(), 4);
        assert_eq!(c.holdings(1), vec![2]);
        assert_eq!(c.holdings(2), vec![3, 4]);
        assert_eq!(c.holdings(3), vec![5, 6]);
        assert_eq!(c.holdings(4), vec![7]);
        assert_eq!(ChainConfig::new(2).unwrap().intermediate_family(2), BellFamily::Psi);
        assert_eq!(c.intermediate_family(2), BellFamily::Phi);
        assert_eq!(ChainConfig::new(4).unwrap().intermediate_family(3), BellFamily::Psi);
        assert_eq!(ChainConfig::new(1), Err(Error::ChainTooShort(1)));
        assert!(ChainConfig::new(MAX_CHAIN_COPIES + 1).is_err());
    }

    #[test]
    fn correction_lookups() {
        assert_eq!(bob_correction_lookup(BellOutcome::PsiMinus), Correction::I);
        assert_eq!(bob_correction_lookup(BellOutcome::PsiPlus), Correction::SigmaZ);
        assert_eq!(bob_correction_lookup(BellOutcome::PhiPlus), Correction::SigmaY);
        assert_eq!(bob_correction_lookup(BellOutcome::PhiMinus), Correction::SigmaX);
        assert_eq!(
            alice_interpretation(BellOutcome::PsiMinus, VictorOutcome::Y),
            (OutcomeClass::Copy, Correction::I)
        );
        assert_eq!(
            alice_interpretation(BellOutcome::PsiMinus, VictorOutcome::X),
            (OutcomeClass::Complement, Correction::I)
        );
        assert_eq!(
            alice_interpretation(BellOutcome::PsiPlus, VictorOutcome::Y),
            (OutcomeClass::Copy, Correction::SigmaZ)
        );
        for b in BellOutcome::ALL {
            for v in VictorOutcome::ALL {
                assert_eq!(alice_interpretation(b, v).1, bob_correction_lookup(b));
            }
        }
    }

    #[test]
    fn corrections_square_to_identity() {
        for c in Correction::ALL {
            let u = c.unitary();
            assert!(u.mul(&u).equals_up_to_phase(&Unitary2::identity(), EXACT_TOL));
        }
    }

    #[test]
    fn bob_corrections_undo_the_branch_operators() {
        // the branch operators multiplying |ψ⟩₃ in the Bell expansion
        let branch_ops = [
            (BellOutcome::PsiPlus, Unitary2::sigma_z()),
            (BellOutcome::PsiMinus, Unitary2::identity()),
            (BellOutcome::PhiPlus, Unitary2::i_sigma_y()),
            (
                BellOutcome::PhiMinus,
                Unitary2::sigma_x().scaled(Amplitude::new(-1.0, 0.0)),
            ),
        ];
        for (b, op) in branch_ops {
            let fixed = bob_correction_lookup(b).unitary().mul(&op);
            assert!(fixed.equals_up_to_phase(&Unitary2::identity(), EXACT_TOL), "{b}");
        }
    }
}
