use accm::measurement::{BellOutcome, VictorOutcome};
use accm::montecarlo::{sample_haar_qubit, trial_rng};
use accm::parties::{leakage_audit, ClassicalMessage, EventKind, PartyId, Payload};
use accm::protocol::{
    enumerate_branches, run, run_chain, run_double, ChainConfig, Correction, OutcomeClass, ProtocolKind,
};
use accm::statevec::{PureQubit, PIPELINE_TOL};

fn inputs(seed: u64, n: u64) -> Vec<PureQubit> {
    (0..n).map(|i| sample_haar_qubit(&mut trial_rng(seed, i))).collect()
}

fn is_one(x: f64) -> bool {
    (x - 1.0).abs() < PIPELINE_TOL
}

#[test]
fn single_branches_are_exhaustive_and_exact() {
    for psi in inputs(1, 10) {
        let branches = enumerate_branches(ProtocolKind::Single, &psi).unwrap();
        assert_eq!(branches.len(), 8);
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        assert!(is_one(total));
        for b in &branches {
            assert!((b.probability - 0.125).abs() < 1e-12);
            let alice = b.result.party(PartyId::Alice).unwrap();
            let bob = b.result.party(PartyId::Bob).unwrap();
            assert!(is_one(bob.fidelity_psi));
            match b.victors[0] {
                VictorOutcome::Y => {
                    assert_eq!(alice.class, OutcomeClass::Copy);
                    assert!(is_one(alice.fidelity_psi));
                }
                VictorOutcome::X => {
                    assert_eq!(alice.class, OutcomeClass::Complement);
                    assert!(is_one(alice.fidelity_perp));
                }
            }
        }
    }
}

#[test]
fn single_phi_plus_copy_uses_sigma_y() {
    let psi = inputs(2, 1)[0];
    let b = enumerate_branches(ProtocolKind::Single, &psi)
        .unwrap()
        .into_iter()
        .find(|b| b.bells == [BellOutcome::PhiPlus] && b.victors == [VictorOutcome::Y])
        .unwrap();
    let alice = b.result.party(PartyId::Alice).unwrap();
    assert_eq!(alice.correction, Correction::SigmaY);
    assert!(is_one(alice.fidelity_psi));
}

#[test]
fn double_named_branches() {
    for psi in inputs(3, 10) {
        let branches = enumerate_branches(ProtocolKind::Double, &psi).unwrap();
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        assert!(is_one(total));
        let find = |v: VictorOutcome| {
            branches
                .iter()
                .find(|b| b.bells == [BellOutcome::PsiMinus, BellOutcome::PsiPlus] && b.victors == [v, v])
                .unwrap()
        };
        let yy = &find(VictorOutcome::Y).result;
        let xx = &find(VictorOutcome::X).result;
        for (r, class) in [(yy, OutcomeClass::Copy), (xx, OutcomeClass::Complement)] {
            let alice = r.party(PartyId::Alice).unwrap();
            let bob = r.party(PartyId::Bob).unwrap();
            let carla = r.party(PartyId::Carla).unwrap();
            assert_eq!((alice.class, bob.class), (class, class));
            assert_eq!(bob.correction, Correction::SigmaZ);
            assert!(is_one(alice.target_fidelity()) && is_one(bob.target_fidelity()));
            assert!(is_one(carla.fidelity_psi));
        }
    }
}

#[test]
fn double_joint_probabilities_are_exact_per_input() {
    for psi in inputs(4, 5) {
        let branches = enumerate_branches(ProtocolKind::Double, &psi).unwrap();
        let p = |pred: &dyn Fn(&accm::protocol::Branch) -> bool| -> f64 {
            branches.iter().filter(|b| pred(b)).map(|b| b.probability).sum()
        };
        let xs = |b: &accm::protocol::Branch| b.victors.iter().filter(|v| **v == VictorOutcome::X).count();
        let minus = |b: &accm::protocol::Branch| b.bells[0] == BellOutcome::PsiMinus;
        assert!((p(&|b| minus(b) && xs(b) == 0) - 1.0 / 16.0).abs() < 1e-12);
        assert!((p(&|b| minus(b) && xs(b) == 1) - 1.0 / 8.0).abs() < 1e-12);
        assert!((p(&|b| xs(b) == 0) - 0.25).abs() < 1e-12);
        assert!((p(&|b| xs(b) == 2) - 0.25).abs() < 1e-12);
    }
}

#[test]
fn chain_of_two_matches_double() {
    for (i, psi) in inputs(5, 20).into_iter().enumerate() {
        let a = run_double(&psi, &mut trial_rng(5, i as u64)).unwrap();
        let b = run_chain(&psi, ChainConfig::new(2).unwrap(), &mut trial_rng(5, i as u64)).unwrap();
        assert_eq!(a.bell_outcomes, b.bell_outcomes);
        assert_eq!(a.victor_outcomes, b.victor_outcomes);
        for (p, q) in a.parties.iter().zip(&b.parties) {
            assert_eq!((p.class, p.correction), (q.class, q.correction));
            assert!((p.fidelity_psi - q.fidelity_psi).abs() < 1e-12);
        }
    }
}

#[test]
fn chain_three_every_branch_is_exact() {
    for psi in inputs(6, 10) {
        let branches = enumerate_branches(ProtocolKind::Chain(3), &psi).unwrap();
        assert!(is_one(branches.iter().map(|b| b.probability).sum::<f64>()));
        for b in &branches {
            assert_eq!(b.result.parties.len(), 4);
            assert!(is_one(b.result.min_target_fidelity()));
            assert_eq!(b.result.transcript.cbits_from(PartyId::Victor), 3);
        }
    }
}

#[test]
fn chain_limits() {
    assert!(ChainConfig::new(1).is_err());
    assert!(ChainConfig::new(6).is_err());
    let psi = inputs(7, 1)[0];
    let r = run(ProtocolKind::Chain(4), &psi, &mut trial_rng(7, 0)).unwrap();
    assert!(is_one(r.min_target_fidelity()));
    assert_eq!(r.transcript.cbits_from(PartyId::Victor), 4);
}

#[test]
fn transcript_summaries() {
    let psi = inputs(8, 1)[0];
    let single = run(ProtocolKind::Single, &psi, &mut trial_rng(8, 0)).unwrap();
    let s = single.transcript.summary().unwrap();
    assert_eq!(s.victor_cbits, 1);
    assert_eq!(s.total_cbits, 3);
    let double = run(ProtocolKind::Double, &psi, &mut trial_rng(8, 1)).unwrap();
    let d = double.transcript.summary().unwrap();
    assert_eq!(d.victor_cbits, 2);
    assert_eq!(d.cbits["alice->bob"], 2);
    assert_eq!(d.cbits["alice->carla"], 2);
    assert_eq!(d.cbits["bob->carla"], 1);
    assert_eq!(d.classes.len(), 3);
    let audit = leakage_audit(&double.transcript);
    assert!(audit.pass);
    assert_eq!(audit.victor_messages, 2);
}

#[test]
fn jsonl_is_one_event_per_line() {
    let psi = inputs(9, 1)[0];
    let r = run(ProtocolKind::Double, &psi, &mut trial_rng(9, 0)).unwrap();
    let text = r.transcript.to_jsonl();
    assert_eq!(text.lines().count(), r.transcript.events().len());
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["step", "party", "kind", "payload", "bits"] {
            assert!(v.get(key).is_some(), "{key} missing in {line}");
        }
    }
    let again = run(ProtocolKind::Double, &psi, &mut trial_rng(9, 0)).unwrap();
    assert_eq!(text, again.transcript.to_jsonl());
}

#[test]
fn tampered_transcripts_fail_the_audit() {
    let psi = PureQubit::from_angles(1.047, 0.785).unwrap();
    let honest = run(ProtocolKind::Single, &psi, &mut trial_rng(10, 0)).unwrap();

    let mut leaky = honest.transcript.clone();
    leaky.push_event(
        PartyId::Victor,
        EventKind::Message(ClassicalMessage::new(
            PartyId::Victor,
            PartyId::Alice,
            Payload::Raw("1.047".into()),
        )),
    );
    let audit = leakage_audit(&leaky);
    assert!(!audit.pass);
    assert!(
        audit.diagnostics.iter().any(|d| d.contains("theta")),
        "{:?}",
        audit.diagnostics
    );

    let mut wide = honest.transcript.clone();
    wide.push_event(
        PartyId::Victor,
        EventKind::Message(ClassicalMessage::new(
            PartyId::Victor,
            PartyId::Alice,
            Payload::Bell(BellOutcome::PsiMinus),
        )),
    );
    assert!(!leakage_audit(&wide).pass);
}
