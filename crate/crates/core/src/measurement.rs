//! Projective measurements with seeded Born-rule sampling.
//!
//! A [`ProjectiveBasis`] is stored locally: orthonormal vectors on a few
//! target particles, tensored with the identity on the rest of the register.
//! Measured particles stay in the register after collapse.

use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use crate::error::{Error, Result};
use crate::statevec::{check_label, Amplitude, PureQubit, StateVector, EXACT_TOL};

/// Probabilities below this are treated as impossible outcomes.
pub const MIN_PROBABILITY: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BellOutcome {
    PsiPlus,
    PsiMinus,
    PhiPlus,
    PhiMinus,
}

/// Which pair of basis kets a Bell state superposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BellFamily {
    /// `|01⟩ ± |10⟩`
    Psi,
    /// `|00⟩ ± |11⟩`
    Phi,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::PsiPlus,
        BellOutcome::PsiMinus,
        BellOutcome::PhiPlus,
        BellOutcome::PhiMinus,
    ];

    pub fn family(self) -> BellFamily {
        match self {
            BellOutcome::PsiPlus | BellOutcome::PsiMinus => BellFamily::Psi,
            BellOutcome::PhiPlus | BellOutcome::PhiMinus => BellFamily::Phi,
        }
    }

    /// `false` for the `+` member of the family, `true` for `−`.
    pub fn sign_bit(self) -> bool {
        matches!(self, BellOutcome::PsiMinus | BellOutcome::PhiMinus)
    }

    pub fn from_family_sign(family: BellFamily, minus: bool) -> Self {
        match (family, minus) {
            (BellFamily::Psi, false) => BellOutcome::PsiPlus,
            (BellFamily::Psi, true) => BellOutcome::PsiMinus,
            (BellFamily::Phi, false) => BellOutcome::PhiPlus,
            (BellFamily::Phi, true) => BellOutcome::PhiMinus,
        }
    }

    /// Two-bit wire code: family bit then sign bit.
    pub fn bits(self) -> [bool; 2] {
        [self.family() == BellFamily::Phi, self.sign_bit()]
    }

    pub fn from_bits(bits: [bool; 2]) -> Self {
        let family = if bits[0] { BellFamily::Phi } else { BellFamily::Psi };
        Self::from_family_sign(family, bits[1])
    }

    /// Amplitudes on the ordered pair `(p, q)`, local index `2·b_p + b_q`.
    pub fn local_vector(self) -> Vec<Amplitude> {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        match self {
            BellOutcome::PsiPlus => vec![z, s, s, z],
            BellOutcome::PsiMinus => vec![z, s, -s, z],
            BellOutcome::PhiPlus => vec![s, z, z, s],
            BellOutcome::PhiMinus => vec![s, z, z, -s],
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            BellOutcome::PsiPlus => "psi+",
            BellOutcome::PsiMinus => "psi-",
            BellOutcome::PhiPlus => "phi+",
            BellOutcome::PhiMinus => "phi-",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.code() == code)
    }
}

impl fmt::Display for BellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Outcome of the preparer's single-particle measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VictorOutcome {
    X,
    Y,
}

impl VictorOutcome {
    pub const ALL: [VictorOutcome; 2] = [VictorOutcome::X, VictorOutcome::Y];

    pub fn bit(self) -> bool {
        self == VictorOutcome::Y
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            VictorOutcome::Y
        } else {
            VictorOutcome::X
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            VictorOutcome::X => "x",
            VictorOutcome::Y => "y",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.code() == code)
    }
}

impl fmt::Display for VictorOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Mutually orthogonal subspaces `span(vectors) ⊗ (rest of register)`.
#[derive(Debug, Clone)]
pub struct ProjectiveBasis<L> {
    n: usize,
    targets: Vec<usize>,
    elements: Vec<(L, Vec<Vec<Amplitude>>)>,
}

impl<L: Copy + PartialEq + fmt::Display> ProjectiveBasis<L> {
    /// Validates that the local vectors form an orthonormal basis of the
    /// targets' space, which makes the projector sum the identity.
    pub fn new(n: usize, targets: Vec<usize>, elements: Vec<(L, Vec<Vec<Amplitude>>)>) -> Result<Self> {
        for (k, &p) in targets.iter().enumerate() {
            check_label(n, p)?;
            if targets[..k].contains(&p) {
                return Err(Error::RepeatedParticle(p));
            }
        }
        let local_dim = 1usize << targets.len();
        let vectors: Vec<&Vec<Amplitude>> = elements.iter().flat_map(|(_, vs)| vs).collect();
        if vectors.len() != local_dim {
            return Err(Error::InvalidBasis(format!(
                "{} vectors for a {local_dim}-dimensional space",
                vectors.len()
            )));
        }
        for (i, a) in vectors.iter().enumerate() {
            if a.len() != local_dim {
                return Err(Error::BadLength(a.len()));
            }
            for (j, b) in vectors.iter().enumerate() {
                let ip: Amplitude = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                if (ip - expected).norm() > EXACT_TOL {
                    return Err(Error::InvalidBasis(format!("⟨v{i}|v{j}⟩ = {ip}")));
                }
            }
        }
        Ok(Self { n, targets, elements })
    }

    pub fn n_particles(&self) -> usize {
        self.n
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn labels(&self) -> impl Iterator<Item = L> + '_ {
        self.elements.iter().map(|(l, _)| *l)
    }

    /// Dimension of each subspace within the full register.
    pub fn subspace_dims(&self) -> Vec<usize> {
        let rest = 1usize << (self.n - self.targets.len());
        self.elements.iter().map(|(_, vs)| vs.len() * rest).collect()
    }

    /// `P_label |state⟩` (unnormalized).
    pub fn project_raw(&self, state: &StateVector, label: L) -> Result<StateVector> {
        let (_, vectors) = self
            .elements
            .iter()
            .find(|(l, _)| *l == label)
            .ok_or_else(|| Error::InvalidBasis(format!("no subspace labeled {label}")))?;
        self.check_register(state)?;
        state.apply_local_projector(&self.targets, vectors)
    }

    /// Born probabilities in label order.
    pub fn probabilities(&self, state: &StateVector) -> Result<Vec<(L, f64)>> {
        self.labels()
            .map(|l| Ok((l, self.project_raw(state, l)?.norm_sqr())))
            .collect()
    }

    /// Dense full-register projector for one label; only for small registers.
    pub fn dense_projector(&self, label: L) -> Result<Vec<Vec<Amplitude>>> {
        let dim = 1usize << self.n;
        let mut columns = Vec::with_capacity(dim);
        for k in 0..dim {
            let e = StateVector::basis_state(self.n, k)?;
            columns.push(self.project_raw(&e, label)?.amplitudes().to_vec());
        }
        // columns[k][i] = P[i][k]; transpose to row-major
        Ok((0..dim).map(|i| (0..dim).map(|k| columns[k][i]).collect()).collect())
    }

    fn check_register(&self, state: &StateVector) -> Result<()> {
        if state.n_particles() != self.n {
            return Err(Error::DimensionMismatch {
                left: state.n_particles(),
                right: self.n,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MeasurementRecord<L> {
    pub label: L,
    pub probability: f64,
    pub post_state: StateVector,
}

/// Bell basis on particles `(p, q)`, labels in the order Ψ⁺, Ψ⁻, Φ⁺, Φ⁻.
pub fn bell_basis(n: usize, p: usize, q: usize) -> Result<ProjectiveBasis<BellOutcome>> {
    if p == q {
        return Err(Error::RepeatedParticle(p));
    }
    let elements = BellOutcome::ALL
        .into_iter()
        .map(|b| (b, vec![b.local_vector()]))
        .collect();
    ProjectiveBasis::new(n, vec![p, q], elements)
}

/// The preparer's `{|x⟩, |y⟩}` basis on one particle, obtained by inverting
/// `|0⟩ = α|x⟩ + β|y⟩`, `|1⟩ = β*|x⟩ − α|y⟩`.
///
/// This gives `|x⟩ = ψ` and `|y⟩ = β*|0⟩ − α|1⟩ = −ψ⊥`; the sign is invisible
/// at the projector level.
pub fn victor_basis(psi: &PureQubit, n: usize, particle: usize) -> Result<ProjectiveBasis<VictorOutcome>> {
    let (x, y) = victor_kets(psi);
    ProjectiveBasis::new(
        n,
        vec![particle],
        vec![
            (VictorOutcome::X, vec![x.to_vec()]),
            (VictorOutcome::Y, vec![y.to_vec()]),
        ],
    )
}

/// Amplitudes of `|x⟩` and `|y⟩` in the computational basis.
pub fn victor_kets(psi: &PureQubit) -> ([Amplitude; 2], [Amplitude; 2]) {
    let (alpha, beta) = (Complex64::new(psi.alpha(), 0.0), psi.beta());
    // overlaps[label][k] = ⟨label|k⟩ read off the expansion of |k⟩
    let overlaps = [[alpha, beta.conj()], [beta, -alpha]];
    let ket = |row: [Amplitude; 2]| [row[0].conj(), row[1].conj()];
    (ket(overlaps[0]), ket(overlaps[1]))
}

/// Samples one outcome with Born probabilities from a single uniform draw
/// (inverse CDF over the basis' label order) and collapses the state.
pub fn measure<L, R>(state: &StateVector, basis: &ProjectiveBasis<L>, rng: &mut R) -> Result<MeasurementRecord<L>>
where
    L: Copy + PartialEq + fmt::Display,
    R: Rng + ?Sized,
{
    let probs = basis.probabilities(state)?;
    let viable: Vec<(L, f64)> = probs.into_iter().filter(|(_, p)| *p >= MIN_PROBABILITY).collect();
    let total: f64 = viable.iter().map(|(_, p)| p).sum();
    if viable.is_empty() {
        return Err(Error::NoViableOutcome);
    }
    let u: f64 = rng.gen::<f64>() * total;
    let mut cumulative = 0.0;
    let mut chosen = viable[viable.len() - 1].0;
    for (label, p) in &viable {
        cumulative += p;
        if u < cumulative {
            chosen = *label;
            break;
        }
    }
    project(state, basis, chosen)
}

/// Deterministic collapse onto `label`.
pub fn project<L>(state: &StateVector, basis: &ProjectiveBasis<L>, label: L) -> Result<MeasurementRecord<L>>
where
    L: Copy + PartialEq + fmt::Display,
{
    let raw = basis.project_raw(state, label)?;
    let probability = raw.norm_sqr();
    if probability < MIN_PROBABILITY {
        return Err(Error::ImpossibleOutcome(label.to_string()));
    }
    let post_state = raw.scale(Complex64::new(1.0 / probability.sqrt(), 0.0));
    Ok(MeasurementRecord {
        label,
        probability,
        post_state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec::fidelity_pure;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use std::f64::consts::PI;

    fn bell_state(b: BellOutcome) -> StateVector {
        StateVector::from_amplitudes(b.local_vector()).unwrap()
    }

    fn random_qubit(rng: &mut ChaCha20Rng) -> PureQubit {
        let theta = (1.0 - 2.0 * rng.gen::<f64>()).acos();
        PureQubit::from_angles(theta, 2.0 * PI * rng.gen::<f64>()).unwrap()
    }

    #[test]
    fn bell_probabilities_are_quarters_on_teleport_input() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let psi = random_qubit(&mut rng);
        let s = psi.state().tensor(&bell_state(BellOutcome::PsiMinus)).unwrap();
        let basis = bell_basis(3, 1, 2).unwrap();
        assert_eq!(basis.subspace_dims(), vec![2, 2, 2, 2]);
        for (_, p) in basis.probabilities(&s).unwrap() {
            assert!((p - 0.25).abs() < EXACT_TOL);
        }
    }

    #[test]
    fn bell_projectors_sum_to_identity() {
        let basis = bell_basis(3, 3, 1).unwrap();
        let dim = 8;
        let mut sum = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
        for b in BellOutcome::ALL {
            let p = basis.dense_projector(b).unwrap();
            for i in 0..dim {
                for j in 0..dim {
                    sum[i][j] += p[i][j];
                }
            }
        }
        for (i, row) in sum.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((x - expected).norm() < EXACT_TOL);
            }
        }
    }

    #[test]
    fn bell_basis_rejects_bad_pairs() {
        assert_eq!(bell_basis(3, 2, 2).unwrap_err(), Error::RepeatedParticle(2));
        assert_eq!(
            bell_basis(3, 1, 4).unwrap_err(),
            Error::LabelOutOfRange { label: 4, n: 3 }
        );
    }

    #[test]
    fn bell_codes_round_trip() {
        for b in BellOutcome::ALL {
            assert_eq!(BellOutcome::from_bits(b.bits()), b);
            assert_eq!(BellOutcome::from_family_sign(b.family(), b.sign_bit()), b);
            assert_eq!(BellOutcome::from_code(b.code()), Some(b));
        }
    }

    #[test]
    fn measuring_an_eigenstate_is_certain() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let rec = measure(
            &bell_state(BellOutcome::PsiMinus),
            &bell_basis(2, 1, 2).unwrap(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(rec.label, BellOutcome::PsiMinus);
        assert!((rec.probability - 1.0).abs() < EXACT_TOL);
    }

    #[test]
    fn bell_measurement_keeps_particles_and_teleports() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let psi = random_qubit(&mut rng);
        let s = psi.state().tensor(&bell_state(BellOutcome::PsiMinus)).unwrap();
        let rec = project(&s, &bell_basis(3, 1, 2).unwrap(), BellOutcome::PsiMinus).unwrap();
        assert_eq!(rec.post_state.n_particles(), 3);
        let expected = bell_state(BellOutcome::PsiMinus).tensor(&psi.state()).unwrap();
        assert!(rec.post_state.phase_insensitive_distance(&expected).unwrap() < EXACT_TOL);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let psi = PureQubit::from_angles(1.0, 2.0).unwrap();
        let s = psi.state().tensor(&bell_state(BellOutcome::PsiMinus)).unwrap();
        let basis = bell_basis(3, 1, 2).unwrap();
        let run = |seed| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| measure(&s, &basis, &mut rng).unwrap().label)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn corrupted_state_has_no_outcome() {
        let zero = StateVector::from_amplitudes(vec![Complex64::new(0.0, 0.0); 4]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let err = measure(&zero, &bell_basis(2, 1, 2).unwrap(), &mut rng).unwrap_err();
        assert_eq!(err, Error::NoViableOutcome);
    }

    #[test]
    fn victor_basis_degenerate_case() {
        let zero = PureQubit::from_angles(0.0, 0.0).unwrap();
        let basis = victor_basis(&zero, 1, 1).unwrap();
        let ket0 = StateVector::basis_state(1, 0).unwrap();
        let ket1 = StateVector::basis_state(1, 1).unwrap();
        assert!((basis.project_raw(&ket0, VictorOutcome::X).unwrap().norm_sqr() - 1.0).abs() < EXACT_TOL);
        assert!((basis.project_raw(&ket1, VictorOutcome::Y).unwrap().norm_sqr() - 1.0).abs() < EXACT_TOL);
        assert!(basis.project_raw(&ket1, VictorOutcome::X).unwrap().norm_sqr() < EXACT_TOL);
    }

    #[test]
    fn victor_projections_of_the_singlet() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        for _ in 0..20 {
            let psi = random_qubit(&mut rng);
            let singlet = bell_state(BellOutcome::PsiMinus);
            let basis = victor_basis(&psi, 2, 1).unwrap();
            let y = project(&singlet, &basis, VictorOutcome::Y).unwrap();
            assert!((y.probability - 0.5).abs() < EXACT_TOL);
            let rho = y.post_state.reduced_density(2).unwrap();
            assert!((fidelity_pure(&rho, &psi) - 1.0).abs() < EXACT_TOL);
            let x = project(&singlet, &basis, VictorOutcome::X).unwrap();
            let rho = x.post_state.reduced_density(2).unwrap();
            assert!(fidelity_pure(&rho, &psi).abs() < EXACT_TOL);
        }
    }

    proptest! {
        #[test]
        fn born_probabilities_are_complete_and_repeatable(
            theta in 0.0..PI, phi in 0.0..2.0 * PI, seed in any::<u64>(),
            p in 1usize..=3, q in 1usize..=3,
        ) {
            prop_assume!(p != q);
            let psi = PureQubit::from_angles(theta, phi).unwrap();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let other = random_qubit(&mut rng);
            let s = psi.state().tensor(&bell_state(BellOutcome::PhiPlus)).unwrap()
                .apply_one(&crate::statevec::Unitary2::sigma_y(), 2).unwrap();
            let basis = bell_basis(3, p, q).unwrap();
            let total: f64 = basis.probabilities(&s).unwrap().iter().map(|(_, p)| p).sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            let rec = measure(&s, &basis, &mut rng).unwrap();
            let again = basis.probabilities(&rec.post_state).unwrap();
            for (label, prob) in again {
                let expected = if label == rec.label { 1.0 } else { 0.0 };
                prop_assert!((prob - expected).abs() < EXACT_TOL);
            }
            let vb = victor_basis(&other, 3, q).unwrap();
            let vrec = measure(&s, &vb, &mut rng).unwrap();
            let direct = vb.project_raw(&s, vrec.label).unwrap().norm_sqr();
            prop_assert!((vrec.probability - direct).abs() < EXACT_TOL);
        }

        #[test]
        fn victor_basis_is_orthonormal(theta in 0.0..PI, phi in 0.0..2.0 * PI) {
            let psi = PureQubit::from_angles(theta, phi).unwrap();
            // construction validates orthonormality and completeness
            prop_assert!(victor_basis(&psi, 2, 2).is_ok());
        }
    }
}
