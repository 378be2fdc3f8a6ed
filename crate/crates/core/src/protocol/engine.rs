//! Sequential protocol drivers. One scheduler per trial walks the parties
//! through measurement, messaging and correction, writing the transcript.

use rand::Rng;

use super::tables::{self, PartyRules};
use super::{
    alice_interpretation, bob_correction_lookup, build_resource, ChainConfig, Correction, OutcomeClass, PartyResult,
    ProtocolKind, ProtocolResult, Resource,
};
use crate::error::{Error, Result};
use crate::measurement::{
    bell_basis, measure, project, victor_basis, BellOutcome, MeasurementRecord, ProjectiveBasis, VictorOutcome,
};
use crate::parties::{ClassicalMessage, InputDescriptor, MeasuredBasis, PartyId, Payload, Transcript};
use crate::statevec::{fidelity_pure, PureQubit, StateVector};

/// Where measurement outcomes come from.
pub(crate) trait OutcomeSource {
    fn bell(
        &mut self,
        state: &StateVector,
        basis: &ProjectiveBasis<BellOutcome>,
    ) -> Result<MeasurementRecord<BellOutcome>>;

    fn victor(
        &mut self,
        state: &StateVector,
        basis: &ProjectiveBasis<VictorOutcome>,
    ) -> Result<MeasurementRecord<VictorOutcome>>;
}

/// Born-rule sampling from a seeded stream.
pub(crate) struct Sampled<'a, R: ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> OutcomeSource for Sampled<'_, R> {
    fn bell(
        &mut self,
        state: &StateVector,
        basis: &ProjectiveBasis<BellOutcome>,
    ) -> Result<MeasurementRecord<BellOutcome>> {
        measure(state, basis, self.0)
    }

    fn victor(
        &mut self,
        state: &StateVector,
        basis: &ProjectiveBasis<VictorOutcome>,
    ) -> Result<MeasurementRecord<VictorOutcome>> {
        measure(state, basis, self.0)
    }
}

/// Replays a fixed outcome tuple.
pub(crate) struct Forced {
    bells: std::vec::IntoIter<BellOutcome>,
    victors: std::vec::IntoIter<VictorOutcome>,
}

impl Forced {
    pub(crate) fn new(bells: Vec<BellOutcome>, victors: Vec<VictorOutcome>) -> Self {
        Self {
            bells: bells.into_iter(),
            victors: victors.into_iter(),
        }
    }
}

impl OutcomeSource for Forced {
    fn bell(
        &mut self,
        state: &StateVector,
        basis: &ProjectiveBasis<BellOutcome>,
    ) -> Result<MeasurementRecord<BellOutcome>> {
        let label = self.bells.next().ok_or(Error::NoViableOutcome)?;
        project(state, basis, label)
    }

    fn victor(
        &mut self,
        state: &StateVector,
        basis: &ProjectiveBasis<VictorOutcome>,
    ) -> Result<MeasurementRecord<VictorOutcome>> {
        let label = self.victors.next().ok_or(Error::NoViableOutcome)?;
        project(state, basis, label)
    }
}

/// A fully executed classical branch.
#[derive(Debug, Clone)]
pub struct Branch {
    pub bells: Vec<BellOutcome>,
    pub victors: Vec<VictorOutcome>,
    pub probability: f64,
    pub result: ProtocolResult,
}

fn descriptor(psi: &PureQubit) -> InputDescriptor {
    InputDescriptor {
        theta: psi.theta(),
        phi: psi.phi(),
        seed: None,
        trial: None,
    }
}

fn send(t: &mut Transcript, from: PartyId, to: PartyId, payload: Payload) -> Payload {
    let msg = ClassicalMessage::new(from, to, payload);
    let delivered = msg.payload.clone();
    t.record_message(msg);
    delivered
}

fn apply(
    state: StateVector,
    t: &mut Transcript,
    party: PartyId,
    particle: usize,
    c: Correction,
) -> Result<StateVector> {
    t.record_correction(party, particle, c);
    state.apply_one(&c.unitary(), particle)
}

/// Verifier pass: scores each party's particle against `ψ` and `ψ⊥`.
fn score(
    state: &StateVector,
    psi: &PureQubit,
    t: &mut Transcript,
    holders: &[(PartyId, usize, OutcomeClass, Correction)],
) -> Result<Vec<PartyResult>> {
    let mut out = Vec::with_capacity(holders.len());
    for &(party, particle, class, correction) in holders {
        let rho = state.reduced_density(particle)?;
        let fidelity_psi = fidelity_pure(&rho, psi);
        let fidelity_perp = rho.expectation(psi.complement_amplitudes());
        t.record_final(party, particle, class, fidelity_psi, fidelity_perp);
        out.push(PartyResult {
            party,
            particle,
            state: rho,
            class,
            correction,
            fidelity_psi,
            fidelity_perp,
        });
    }
    t.mark_complete();
    Ok(out)
}

pub(crate) fn single(psi: &PureQubit, src: &mut impl OutcomeSource) -> Result<ProtocolResult> {
    let mut t = Transcript::new(descriptor(psi));
    let mut state = psi.state().tensor(&build_resource(Resource::Epr)?)?;
    let mut probability = 1.0;

    let rec = src.bell(&state, &bell_basis(3, 1, 2)?)?;
    probability *= rec.probability;
    state = rec.post_state;
    t.record_measurement(PartyId::Alice, MeasuredBasis::Bell, &[1, 2], rec.label.code());
    let bell = match send(&mut t, PartyId::Alice, PartyId::Bob, Payload::Bell(rec.label)) {
        Payload::Bell(b) => BellOutcome::from_bits(b.bits()),
        _ => unreachable!(),
    };
    let bob_fix = bob_correction_lookup(bell);
    state = apply(state, &mut t, PartyId::Bob, 3, bob_fix)?;

    // particle 1 travels to the preparer, who alone builds this basis
    let rec = src.victor(&state, &victor_basis(psi, 3, 1)?)?;
    probability *= rec.probability;
    state = rec.post_state;
    let victor = rec.label;
    t.record_measurement(PartyId::Victor, MeasuredBasis::Victor, &[1], victor.code());
    let received = match send(&mut t, PartyId::Victor, PartyId::Alice, Payload::Victor(victor)) {
        Payload::Victor(v) => VictorOutcome::from_bit(v.bit()),
        _ => unreachable!(),
    };
    let (class, alice_fix) = alice_interpretation(bell, received);
    state = apply(state, &mut t, PartyId::Alice, 2, alice_fix)?;

    let parties = score(
        &state,
        psi,
        &mut t,
        &[
            (PartyId::Alice, 2, class, alice_fix),
            (PartyId::Bob, 3, OutcomeClass::Original, bob_fix),
        ],
    )?;
    Ok(ProtocolResult {
        kind: ProtocolKind::Single,
        parties,
        bell_outcomes: vec![bell],
        victor_outcomes: vec![victor],
        branch_probability: probability,
        final_state: state,
        transcript: t,
    })
}

fn party_name(kind: ProtocolKind, k: usize) -> PartyId {
    match (kind, k) {
        (ProtocolKind::Double, 1) => PartyId::Alice,
        (ProtocolKind::Double, 2) => PartyId::Bob,
        (ProtocolKind::Double, 3) => PartyId::Carla,
        _ => PartyId::Chain(k),
    }
}

pub(crate) fn chain(
    psi: &PureQubit,
    config: ChainConfig,
    kind: ProtocolKind,
    src: &mut impl OutcomeSource,
) -> Result<ProtocolResult> {
    let copies = config.copies();
    let rules: &PartyRules = tables::rules(copies)?;
    let n = 2 * copies + 1;
    let last = config.parties();
    let name = |k| party_name(kind, k);

    let mut t = Transcript::new(descriptor(psi));
    let mut state = psi.state().tensor(&build_resource(Resource::Chain(copies))?)?;
    let mut probability = 1.0;
    let mut bells = Vec::with_capacity(copies);
    // what the last party has received, in order
    let mut inbox: Vec<Payload> = Vec::with_capacity(copies);

    // teleportation down the chain
    for k in 1..=copies {
        let pair = [2 * k - 1, 2 * k];
        let rec = src.bell(&state, &bell_basis(n, pair[0], pair[1])?)?;
        probability *= rec.probability;
        state = rec.post_state;
        t.record_measurement(name(k), MeasuredBasis::Bell, &pair, rec.label.code());
        bells.push(rec.label);
        if k == 1 {
            for to in 2..=last {
                let delivered = send(&mut t, name(1), name(to), Payload::Bell(rec.label));
                if to == last {
                    inbox.push(delivered);
                }
            }
        } else {
            if rec.label.family() != config.intermediate_family(k) {
                return Err(Error::Table(format!(
                    "party {k} observed {} outside its one-bit codebook",
                    rec.label
                )));
            }
            inbox.push(send(&mut t, name(k), name(last), Payload::BellSign(rec.label)));
        }
    }

    let decoded: Vec<BellOutcome> = inbox
        .iter()
        .enumerate()
        .map(|(i, p)| match p {
            Payload::Bell(b) => BellOutcome::from_bits(b.bits()),
            Payload::BellSign(b) => BellOutcome::from_family_sign(config.intermediate_family(i + 1), b.sign_bit()),
            _ => unreachable!(),
        })
        .collect();
    let last_fix = rules.last_party(&decoded)?;
    state = apply(state, &mut t, name(last), n, last_fix)?;

    // the preparer disentangles the leftover pairs, one bit per copy
    let mut victors = Vec::with_capacity(copies);
    for k in 1..=copies {
        let particle = 2 * k - 1;
        let rec = src.victor(&state, &victor_basis(psi, n, particle)?)?;
        probability *= rec.probability;
        state = rec.post_state;
        t.record_measurement(PartyId::Victor, MeasuredBasis::Victor, &[particle], rec.label.code());
        victors.push(rec.label);
    }
    let mut holders = Vec::with_capacity(last);
    for k in 1..=copies {
        let received = match send(&mut t, PartyId::Victor, name(k), Payload::Victor(victors[k - 1])) {
            Payload::Victor(v) => VictorOutcome::from_bit(v.bit()),
            _ => unreachable!(),
        };
        let (class, fix) = rules.copy_party(k, bells[k - 1], received)?;
        state = apply(state, &mut t, name(k), 2 * k, fix)?;
        holders.push((name(k), 2 * k, class, fix));
    }
    holders.push((name(last), n, OutcomeClass::Original, last_fix));

    let parties = score(&state, psi, &mut t, &holders)?;
    Ok(ProtocolResult {
        kind,
        parties,
        bell_outcomes: bells,
        victor_outcomes: victors,
        branch_probability: probability,
        final_state: state,
        transcript: t,
    })
}

pub(crate) fn run_forced(
    kind: ProtocolKind,
    psi: &PureQubit,
    bells: Vec<BellOutcome>,
    victors: Vec<VictorOutcome>,
) -> Result<ProtocolResult> {
    let mut src = Forced::new(bells, victors);
    match kind {
        ProtocolKind::Single => single(psi, &mut src),
        ProtocolKind::Double => chain(psi, ChainConfig::new(2)?, kind, &mut src),
        ProtocolKind::Chain(c) => chain(psi, ChainConfig::new(c)?, kind, &mut src),
    }
}

pub(crate) fn enumerate(kind: ProtocolKind, psi: &PureQubit) -> Result<Vec<Branch>> {
    let copies = kind.copies();
    let mut out = Vec::new();
    for bells in product(&BellOutcome::ALL, copies) {
        for victors in product(&VictorOutcome::ALL, copies) {
            match run_forced(kind, psi, bells.clone(), victors.clone()) {
                Ok(result) => out.push(Branch {
                    bells: bells.clone(),
                    victors,
                    probability: result.branch_probability,
                    result,
                }),
                Err(Error::ImpossibleOutcome(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// All length-`len` sequences over `items`, first position slowest.
pub(crate) fn product<T: Copy>(items: &[T], len: usize) -> Vec<Vec<T>> {
    let mut acc: Vec<Vec<T>> = vec![Vec::new()];
    for _ in 0..len {
        acc = acc
            .into_iter()
            .flat_map(|prefix| {
                items.iter().map(move |&x| {
                    let mut next = prefix.clone();
                    next.push(x);
                    next
                })
            })
            .collect();
    }
    acc
}
