//! Named protocol parties, the classical channel between them, and the
//! transcript every run produces.
//!
//! The event stream never carries the input parameters; those live in the
//! transcript's [`InputDescriptor`], which only the verifier reads.

use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::measurement::{BellOutcome, VictorOutcome};
use crate::protocol::{Correction, OutcomeClass};
use crate::statevec::PIPELINE_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PartyId {
    Victor,
    Alice,
    Bob,
    Carla,
    /// Party `k` (1-based) of an N-copy chain.
    Chain(usize),
    /// Out-of-band scorer. Knows the input, never sends messages.
    Verifier,
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartyId::Victor => f.write_str("victor"),
            PartyId::Alice => f.write_str("alice"),
            PartyId::Bob => f.write_str("bob"),
            PartyId::Carla => f.write_str("carla"),
            PartyId::Chain(k) => write!(f, "party{k}"),
            PartyId::Verifier => f.write_str("verifier"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Full Bell outcome, 2 bits.
    Bell(BellOutcome),
    /// Bell outcome whose family the receiver already knows from the
    /// resource layout; only the sign bit is sent.
    BellSign(BellOutcome),
    Victor(VictorOutcome),
    /// Anything else. Never produced by an honest run.
    Raw(String),
}

impl Payload {
    pub fn bit_width(&self) -> u32 {
        match self {
            Payload::Bell(_) => 2,
            Payload::BellSign(_) | Payload::Victor(_) => 1,
            Payload::Raw(s) => 8 * s.len() as u32,
        }
    }

    /// The bits actually put on the wire.
    pub fn wire(&self) -> String {
        let bit = |b: bool| if b { '1' } else { '0' };
        match self {
            Payload::Bell(b) => b.bits().iter().map(|&x| bit(x)).collect(),
            Payload::BellSign(b) => bit(b.sign_bit()).to_string(),
            Payload::Victor(v) => bit(v.bit()).to_string(),
            Payload::Raw(s) => s.bytes().map(|b| format!("{b:08b}")).collect(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Payload::Bell(b) | Payload::BellSign(b) => b.code().to_string(),
            Payload::Victor(v) => v.code().to_string(),
            Payload::Raw(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalMessage {
    pub from: PartyId,
    pub to: PartyId,
    pub payload: Payload,
    pub bit_width: u32,
}

impl ClassicalMessage {
    pub fn new(from: PartyId, to: PartyId, payload: Payload) -> Self {
        let bit_width = payload.bit_width();
        Self {
            from,
            to,
            payload,
            bit_width,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    Measurement {
        basis: MeasuredBasis,
        particles: Vec<usize>,
        outcome: String,
    },
    Message(ClassicalMessage),
    Correction {
        particle: usize,
        correction: Correction,
    },
    FinalReport {
        subject: PartyId,
        particle: usize,
        class: OutcomeClass,
        fidelity_psi: f64,
        fidelity_perp: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasuredBasis {
    Bell,
    Victor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub step: usize,
    pub party: PartyId,
    pub kind: EventKind,
}

impl Event {
    fn kind_name(&self) -> &'static str {
        match self.kind {
            EventKind::Measurement { .. } => "measurement",
            EventKind::Message(_) => "message",
            EventKind::Correction { .. } => "correction",
            EventKind::FinalReport { .. } => "final-report",
        }
    }

    /// Structured form with fields `step, party, kind, payload, bits`.
    pub fn to_json(&self) -> Value {
        let (payload, bits) = match &self.kind {
            EventKind::Measurement {
                basis,
                particles,
                outcome,
            } => (
                json!({
                    "basis": match basis { MeasuredBasis::Bell => "bell", MeasuredBasis::Victor => "victor" },
                    "particles": particles,
                    "outcome": outcome,
                }),
                0,
            ),
            EventKind::Message(m) => (
                json!({ "to": m.to.to_string(), "label": m.payload.label(), "wire": m.payload.wire() }),
                m.bit_width,
            ),
            EventKind::Correction { particle, correction } => {
                (json!({ "particle": particle, "pauli": correction.code() }), 0)
            }
            EventKind::FinalReport {
                subject,
                particle,
                class,
                fidelity_psi,
                fidelity_perp,
            } => (
                json!({
                    "subject": subject.to_string(),
                    "particle": particle,
                    "class": class.code(),
                    "fidelity_psi": fidelity_psi,
                    "fidelity_perp": fidelity_perp,
                }),
                0,
            ),
        };
        json!({
            "step": self.step,
            "party": self.party.to_string(),
            "kind": self.kind_name(),
            "payload": payload,
            "bits": bits,
        })
    }
}

/// Run parameters, kept apart from the event stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InputDescriptor {
    pub theta: f64,
    pub phi: f64,
    pub seed: Option<u64>,
    pub trial: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    input: InputDescriptor,
    events: Vec<Event>,
    cbits: BTreeMap<(PartyId, PartyId), u32>,
    complete: bool,
}

impl Transcript {
    pub fn new(input: InputDescriptor) -> Self {
        Self {
            input,
            events: Vec::new(),
            cbits: BTreeMap::new(),
            complete: false,
        }
    }

    pub fn input(&self) -> &InputDescriptor {
        &self.input
    }

    pub fn set_seed(&mut self, seed: u64, trial: u64) {
        self.input.seed = Some(seed);
        self.input.trial = Some(trial);
    }

    /// Records the angles exactly as requested rather than as recovered
    /// from the amplitudes.
    pub fn set_angles(&mut self, theta: f64, phi: f64) {
        self.input.theta = theta;
        self.input.phi = phi;
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub(crate) fn mark_complete(&mut self) {
        self.complete = true;
    }

    fn push(&mut self, party: PartyId, kind: EventKind) {
        let step = self.events.len();
        self.events.push(Event { step, party, kind });
    }

    /// Appends a message and adds its width to the `(from, to)` counter.
    pub fn record_message(&mut self, msg: ClassicalMessage) {
        *self.cbits.entry((msg.from, msg.to)).or_insert(0) += msg.bit_width;
        self.push(msg.from, EventKind::Message(msg));
    }

    pub(crate) fn record_measurement(
        &mut self,
        party: PartyId,
        basis: MeasuredBasis,
        particles: &[usize],
        outcome: &str,
    ) {
        self.push(
            party,
            EventKind::Measurement {
                basis,
                particles: particles.to_vec(),
                outcome: outcome.to_string(),
            },
        );
    }

    pub(crate) fn record_correction(&mut self, party: PartyId, particle: usize, correction: Correction) {
        self.push(party, EventKind::Correction { particle, correction });
    }

    pub(crate) fn record_final(
        &mut self,
        subject: PartyId,
        particle: usize,
        class: OutcomeClass,
        fidelity_psi: f64,
        fidelity_perp: f64,
    ) {
        self.push(
            PartyId::Verifier,
            EventKind::FinalReport {
                subject,
                particle,
                class,
                fidelity_psi,
                fidelity_perp,
            },
        );
    }

    /// Pushes an arbitrary event. Used to build tampered transcripts.
    pub fn push_event(&mut self, party: PartyId, kind: EventKind) {
        if let EventKind::Message(m) = &kind {
            *self.cbits.entry((m.from, m.to)).or_insert(0) += m.bit_width;
        }
        self.push(party, kind);
    }

    pub fn cbits_between(&self, from: PartyId, to: PartyId) -> u32 {
        self.cbits.get(&(from, to)).copied().unwrap_or(0)
    }

    pub fn cbits_from(&self, from: PartyId) -> u32 {
        self.cbits.iter().filter(|((f, _), _)| *f == from).map(|(_, b)| b).sum()
    }

    pub fn total_cbits(&self) -> u32 {
        self.cbits.values().sum()
    }

    pub fn cbit_counters(&self) -> impl Iterator<Item = ((PartyId, PartyId), u32)> + '_ {
        self.cbits.iter().map(|(k, v)| (*k, *v))
    }

    /// One JSON object per line, terminated by a newline.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_json().to_string());
            out.push('\n');
        }
        out
    }

    pub fn summary(&self) -> Result<TranscriptSummary> {
        transcript_summary(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranscriptSummary {
    /// Keyed `"from->to"`.
    pub cbits: BTreeMap<String, u32>,
    pub total_cbits: u32,
    pub victor_cbits: u32,
    pub classes: BTreeMap<String, String>,
    /// Bell outcomes in order, then the preparer's outcomes, e.g. `psi-,psi+|y,x`.
    pub branch: String,
}

pub fn transcript_summary(log: &Transcript) -> Result<TranscriptSummary> {
    if !log.is_complete() {
        return Err(Error::IncompleteTranscript("run did not finish".into()));
    }
    let mut classes = BTreeMap::new();
    let mut bells = Vec::new();
    let mut victors = Vec::new();
    for e in log.events() {
        match &e.kind {
            EventKind::FinalReport { subject, class, .. } => {
                classes.insert(subject.to_string(), class.code().to_string());
            }
            EventKind::Measurement { basis, outcome, .. } => match basis {
                MeasuredBasis::Bell => bells.push(outcome.clone()),
                MeasuredBasis::Victor => victors.push(outcome.clone()),
            },
            _ => {}
        }
    }
    if classes.is_empty() {
        return Err(Error::IncompleteTranscript("no final reports".into()));
    }
    Ok(TranscriptSummary {
        cbits: log
            .cbit_counters()
            .map(|((f, t), b)| (format!("{f}->{t}"), b))
            .collect(),
        total_cbits: log.total_cbits(),
        victor_cbits: log.cbits_from(PartyId::Victor),
        classes,
        branch: format!("{}|{}", bells.join(","), victors.join(",")),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub pass: bool,
    pub victor_messages: usize,
    pub diagnostics: Vec<String>,
}

/// Checks that the preparer only ever sends single-bit `x`/`y` labels and
/// that nothing in the event stream carries state parameters.
pub fn leakage_audit(log: &Transcript) -> AuditReport {
    let mut diagnostics = Vec::new();
    let mut victor_messages = 0;
    let input = log.input();
    let params = [
        ("theta", input.theta),
        ("phi", input.phi),
        ("alpha", (input.theta / 2.0).cos()),
        ("|beta|", (input.theta / 2.0).sin()),
    ];
    for e in log.events() {
        match &e.kind {
            EventKind::Message(m) => {
                if m.from == PartyId::Verifier {
                    diagnostics.push(format!("step {}: verifier sent a message", e.step));
                }
                if m.bit_width != m.payload.bit_width() {
                    diagnostics.push(format!(
                        "step {}: declared width {} does not match payload",
                        e.step, m.bit_width
                    ));
                }
                if m.from == PartyId::Victor {
                    victor_messages += 1;
                    if !matches!(m.payload, Payload::Victor(_)) || m.bit_width != 1 {
                        diagnostics.push(format!(
                            "step {}: victor sent {:?} ({} bits)",
                            e.step, m.payload, m.bit_width
                        ));
                    }
                }
                if let Payload::Raw(s) = &m.payload {
                    let mut note = format!("step {}: free-form payload {s:?}", e.step);
                    if let Some(name) = encodes_parameter(s, &params) {
                        note.push_str(&format!(" encodes {name}"));
                    }
                    diagnostics.push(note);
                }
            }
            EventKind::Measurement { outcome, .. } => {
                if BellOutcome::from_code(outcome).is_none() && VictorOutcome::from_code(outcome).is_none() {
                    diagnostics.push(format!(
                        "step {}: measurement outcome {outcome:?} is not a label",
                        e.step
                    ));
                }
            }
            EventKind::FinalReport {
                fidelity_psi,
                fidelity_perp,
                ..
            } => {
                for f in [fidelity_psi, fidelity_perp] {
                    if f.abs() > PIPELINE_TOL && (f - 1.0).abs() > PIPELINE_TOL {
                        diagnostics.push(format!("step {}: verifier reported non-binary fidelity {f}", e.step));
                    }
                }
                if e.party != PartyId::Verifier {
                    diagnostics.push(format!("step {}: final report from {}", e.step, e.party));
                }
            }
            EventKind::Correction { .. } => {}
        }
    }
    AuditReport {
        pass: diagnostics.is_empty(),
        victor_messages,
        diagnostics,
    }
}

fn encodes_parameter(s: &str, params: &[(&'static str, f64)]) -> Option<&'static str> {
    let numbers = s
        .split(|ch: char| !(ch.is_ascii_digit() || ch == '.' || ch == '-' || ch == 'e'))
        .filter_map(|tok| tok.parse::<f64>().ok());
    for x in numbers {
        if let Some((name, _)) = params.iter().find(|(_, v)| (x - v).abs() < 1e-6 * v.abs().max(1e-3)) {
            return Some(name);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty() -> Transcript {
        Transcript::new(InputDescriptor {
            theta: 1.047,
            phi: 0.785,
            seed: Some(42),
            trial: Some(0),
        })
    }

    #[test]
    fn message_counters() {
        let mut t = empty();
        t.record_message(ClassicalMessage::new(
            PartyId::Alice,
            PartyId::Bob,
            Payload::Bell(BellOutcome::PhiMinus),
        ));
        assert_eq!(t.cbits_between(PartyId::Alice, PartyId::Bob), 2);
        t.record_message(ClassicalMessage::new(
            PartyId::Victor,
            PartyId::Alice,
            Payload::Victor(VictorOutcome::Y),
        ));
        assert_eq!(t.cbits_between(PartyId::Victor, PartyId::Alice), 1);
        t.record_message(ClassicalMessage::new(
            PartyId::Bob,
            PartyId::Carla,
            Payload::BellSign(BellOutcome::PsiMinus),
        ));
        assert_eq!(t.cbits_between(PartyId::Bob, PartyId::Carla), 1);
        assert_eq!(t.total_cbits(), 4);
        assert_eq!(t.events()[2].step, 2);
    }

    #[test]
    fn wire_encodings() {
        assert_eq!(Payload::Bell(BellOutcome::PsiPlus).wire(), "00");
        assert_eq!(Payload::Bell(BellOutcome::PhiMinus).wire(), "11");
        assert_eq!(Payload::BellSign(BellOutcome::PhiMinus).wire(), "1");
        assert_eq!(Payload::Victor(VictorOutcome::X).wire(), "0");
        assert_eq!(Payload::Raw("a".into()).wire(), "01100001");
    }

    #[test]
    fn summary_requires_completion() {
        assert!(matches!(
            transcript_summary(&empty()),
            Err(Error::IncompleteTranscript(_))
        ));
    }

    #[test]
    fn audit_flags_injected_parameter() {
        let mut t = empty();
        t.record_message(ClassicalMessage::new(
            PartyId::Victor,
            PartyId::Alice,
            Payload::Victor(VictorOutcome::X),
        ));
        assert!(leakage_audit(&t).pass);
        t.push_event(
            PartyId::Victor,
            EventKind::Message(ClassicalMessage::new(
                PartyId::Victor,
                PartyId::Bob,
                Payload::Raw("theta=1.047".into()),
            )),
        );
        let report = leakage_audit(&t);
        assert!(!report.pass);
        assert_eq!(report.victor_messages, 2);
        assert!(
            report.diagnostics.iter().any(|d| d.contains("encodes theta")),
            "{report:?}"
        );
    }

    #[test]
    fn audit_flags_wide_victor_message_and_leaky_verifier() {
        let mut t = empty();
        t.push_event(
            PartyId::Victor,
            EventKind::Message(ClassicalMessage::new(
                PartyId::Victor,
                PartyId::Alice,
                Payload::Bell(BellOutcome::PsiPlus),
            )),
        );
        assert!(!leakage_audit(&t).pass);

        let mut t = empty();
        t.record_final(PartyId::Alice, 2, OutcomeClass::Copy, 0.75, 0.25);
        assert!(!leakage_audit(&t).pass);
    }
}
