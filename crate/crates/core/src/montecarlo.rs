//! Seeded Monte Carlo over protocol trials.
//!
//! Trial `i` of a run seeded with `s` draws everything (input and
//! measurement outcomes) from ChaCha20 stream `i` of key `s`, so the
//! aggregate does not depend on scheduling or thread count.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measurement::{BellOutcome, VictorOutcome};
use crate::protocol::{self, fidelity_after_real_rotation, OutcomeClass, ProtocolKind, ProtocolResult};
use crate::statevec::{PureQubit, PIPELINE_TOL};

/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.5758293035489004;

/// Width of the acceptance bands in binomial standard errors.
pub const BAND_SIGMAS: f64 = 6.0;

/// RNG for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Uniform on the Bloch sphere: `cos θ` uniform on `[−1, 1]`, `φ` on `[0, 2π)`.
pub fn sample_haar_qubit<R: Rng + ?Sized>(rng: &mut R) -> PureQubit {
    let cos_theta = 1.0 - 2.0 * rng.gen::<f64>();
    let phi = 2.0 * PI * rng.gen::<f64>();
    PureQubit::from_angles(cos_theta.clamp(-1.0, 1.0).acos(), phi).expect("angles in range")
}

/// `φ = 0`, `θ` uniform on `[0, π]`.
pub fn sample_real_qubit<R: Rng + ?Sized>(rng: &mut R) -> PureQubit {
    PureQubit::from_angles(PI * rng.gen::<f64>(), 0.0).expect("angles in range")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputMode {
    Fixed { theta: f64, phi: f64 },
    Haar,
    RealEquatorial,
}

impl InputMode {
    pub fn name(&self) -> &'static str {
        match self {
            InputMode::Fixed { .. } => "fixed",
            InputMode::Haar => "haar",
            InputMode::RealEquatorial => "real",
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PureQubit> {
        match *self {
            InputMode::Fixed { theta, phi } => PureQubit::from_angles(theta, phi),
            InputMode::Haar => Ok(sample_haar_qubit(rng)),
            InputMode::RealEquatorial => Ok(sample_real_qubit(rng)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub kind: ProtocolKind,
    pub trials: u64,
    pub seed: u64,
    pub input: InputMode,
}

impl TrialConfig {
    pub fn new(kind: ProtocolKind, trials: u64, seed: u64, input: InputMode) -> Result<Self> {
        if trials == 0 {
            return Err(Error::InvalidConfig("trial count must be at least 1".into()));
        }
        Ok(Self {
            kind,
            trials,
            seed,
            input,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremes {
    pub min: f64,
    pub max: f64,
}

impl Extremes {
    fn of(x: f64) -> Self {
        Self { min: x, max: x }
    }

    fn merge(self, other: Self) -> Self {
        Self {
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }
}

/// Aggregate counts. Merging is commutative and associative.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialStats {
    pub trials: u64,
    /// First Bell outcome (the input holder's).
    pub first_bell: BTreeMap<BellOutcome, u64>,
    /// Class of each assisted party, summed over parties.
    pub classes: BTreeMap<OutcomeClass, u64>,
    /// Number of assisted parties that ended with a copy.
    pub copies: BTreeMap<usize, u64>,
    /// `(first Bell outcome, number of X bits from the preparer)`.
    pub first_bell_by_x: BTreeMap<(BellOutcome, usize), u64>,
    /// Full branch `(Bell outcomes, preparer outcomes)`.
    pub branches: BTreeMap<(Vec<BellOutcome>, Vec<VictorOutcome>), u64>,
    /// Trials where every party reached its target within tolerance.
    pub exact: u64,
    /// Trials where every assisted party holds `ψ` after the fixed
    /// rotation on complements.
    pub recoverable: u64,
    /// Target-fidelity extremes per class.
    pub fidelity: BTreeMap<OutcomeClass, Extremes>,
}

impl TrialStats {
    pub fn record(&mut self, result: &ProtocolResult, psi: &PureQubit) {
        self.trials += 1;
        if let Some(b) = result.bell_outcomes.first() {
            *self.first_bell.entry(*b).or_default() += 1;
            let xs = result
                .victor_outcomes
                .iter()
                .filter(|v| **v == VictorOutcome::X)
                .count();
            *self.first_bell_by_x.entry((*b, xs)).or_default() += 1;
        }
        let mut copies = 0;
        let mut recoverable = true;
        for p in result.assisted() {
            *self.classes.entry(p.class).or_default() += 1;
            if p.class == OutcomeClass::Copy {
                copies += 1;
            }
            let f = match p.class {
                OutcomeClass::Complement => fidelity_after_real_rotation(p, psi),
                _ => p.fidelity_psi,
            };
            recoverable &= f >= 1.0 - PIPELINE_TOL;
        }
        *self.copies.entry(copies).or_default() += 1;
        *self
            .branches
            .entry((result.bell_outcomes.clone(), result.victor_outcomes.clone()))
            .or_default() += 1;
        if result.min_target_fidelity() >= 1.0 - PIPELINE_TOL {
            self.exact += 1;
        }
        if recoverable {
            self.recoverable += 1;
        }
        for p in &result.parties {
            let e = Extremes::of(p.target_fidelity());
            self.fidelity
                .entry(p.class)
                .and_modify(|x| *x = x.merge(e))
                .or_insert(e);
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        fn add<K: Ord>(into: &mut BTreeMap<K, u64>, from: BTreeMap<K, u64>) {
            for (k, v) in from {
                *into.entry(k).or_default() += v;
            }
        }
        self.trials += other.trials;
        add(&mut self.first_bell, other.first_bell);
        add(&mut self.classes, other.classes);
        add(&mut self.copies, other.copies);
        add(&mut self.first_bell_by_x, other.first_bell_by_x);
        add(&mut self.branches, other.branches);
        self.exact += other.exact;
        self.recoverable += other.recoverable;
        for (k, e) in other.fidelity {
            self.fidelity.entry(k).and_modify(|x| *x = x.merge(e)).or_insert(e);
        }
        self
    }

    fn count_copies(&self, k: usize) -> u64 {
        self.copies.get(&k).copied().unwrap_or(0)
    }
}

/// Runs trial `index` of `config` and returns its input and result.
pub fn run_trial(config: &TrialConfig, index: u64) -> Result<(PureQubit, ProtocolResult)> {
    let mut rng = trial_rng(config.seed, index);
    let psi = config.input.sample(&mut rng)?;
    let mut result = protocol::run(config.kind, &psi, &mut rng)?;
    result.transcript.set_seed(config.seed, index);
    Ok((psi, result))
}

pub fn run_trials(config: &TrialConfig) -> Result<TrialStats> {
    (0..config.trials)
        .into_par_iter()
        .try_fold(TrialStats::default, |mut acc, i| {
            let (psi, result) = run_trial(config, i)?;
            acc.record(&result, &psi);
            Ok::<_, Error>(acc)
        })
        .try_reduce(TrialStats::default, |a, b| Ok(a.merge(b)))
}

/// Wilson score interval at the 99% level.
pub fn wilson_interval(count: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = count as f64 / n;
    let z2 = Z_99 * Z_99;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z_99 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub count: u64,
    pub trials: u64,
    pub frequency: f64,
    pub expected: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Allowed `|frequency − expected|`; zero means exact.
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, count: u64, trials: u64, expected: f64) -> Self {
        let n = trials as f64;
        let frequency = count as f64 / n;
        let (ci_low, ci_high) = wilson_interval(count, trials);
        let exact = expected == 0.0 || expected == 1.0;
        let tolerance = if exact {
            0.0
        } else {
            BAND_SIGMAS * (expected * (1.0 - expected) / n).sqrt()
        };
        let pass = if exact {
            frequency == expected
        } else {
            (frequency - expected).abs() <= tolerance
        };
        Self {
            name: name.into(),
            count,
            trials,
            frequency,
            expected,
            ci_low,
            ci_high,
            tolerance,
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityRange {
    pub class: String,
    pub min: f64,
    pub max: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub protocol: String,
    pub input: String,
    pub seed: u64,
    pub trials: u64,
    pub checks: Vec<Check>,
    pub fidelity: Vec<FidelityRange>,
    pub pass: bool,
}

impl Report {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Frequencies, intervals and pass/fail against the expected values for
/// the configured protocol and input mode.
pub fn summarize_stats(config: &TrialConfig, stats: &TrialStats) -> Report {
    let n = stats.trials;
    let mut checks = Vec::new();
    for b in BellOutcome::ALL {
        let c = stats.first_bell.get(&b).copied().unwrap_or(0);
        checks.push(Check::new(format!("bell_{}", bell_name(b)), c, n, 0.25));
    }
    let copies = config.kind.copies();
    let by_x = |b: BellOutcome, xs: usize| stats.first_bell_by_x.get(&(b, xs)).copied().unwrap_or(0);
    match config.kind {
        ProtocolKind::Single => {
            checks.push(Check::new("copy_rate", stats.count_copies(1), n, 0.5));
            checks.push(Check::new("complement_rate", stats.count_copies(0), n, 0.5));
            checks.push(Check::new("psi_minus_y", by_x(BellOutcome::PsiMinus, 0), n, 0.125));
        }
        ProtocolKind::Double => {
            let mixed = n - stats.count_copies(2) - stats.count_copies(0);
            checks.push(Check::new("two_clone_rate", stats.count_copies(2), n, 0.25));
            checks.push(Check::new("two_complement_rate", stats.count_copies(0), n, 0.25));
            checks.push(Check::new("mixed_rate", mixed, n, 0.5));
            checks.push(Check::new(
                "psi_minus_both_y",
                by_x(BellOutcome::PsiMinus, 0),
                n,
                1.0 / 16.0,
            ));
            checks.push(Check::new("psi_minus_one_x", by_x(BellOutcome::PsiMinus, 1), n, 0.125));
        }
        ProtocolKind::Chain(_) => {
            let p = 0.5f64.powi(copies as i32);
            checks.push(Check::new("all_clone_rate", stats.count_copies(copies), n, p));
            checks.push(Check::new("all_complement_rate", stats.count_copies(0), n, p));
        }
    }
    checks.push(Check::new("exact_fidelity_rate", stats.exact, n, 1.0));
    if config.input == InputMode::RealEquatorial {
        checks.push(Check::new("recoverable_copy_rate", stats.recoverable, n, 1.0));
    }
    let fidelity: Vec<FidelityRange> = stats
        .fidelity
        .iter()
        .map(|(class, e)| FidelityRange {
            class: class.code().to_string(),
            min: e.min,
            max: e.max,
            pass: e.min >= 1.0 - PIPELINE_TOL && e.max <= 1.0 + PIPELINE_TOL,
        })
        .collect();
    let pass = checks.iter().all(|c| c.pass) && fidelity.iter().all(|f| f.pass);
    Report {
        protocol: config.kind.name(),
        input: config.input.name().to_string(),
        seed: config.seed,
        trials: n,
        checks,
        fidelity,
        pass,
    }
}

fn bell_name(b: BellOutcome) -> &'static str {
    match b {
        BellOutcome::PsiPlus => "psi_plus",
        BellOutcome::PsiMinus => "psi_minus",
        BellOutcome::PhiPlus => "phi_plus",
        BellOutcome::PhiMinus => "phi_minus",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn haar_cos_theta_is_centred() {
        let mut rng = trial_rng(11, 0);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| sample_haar_qubit(&mut rng).theta().cos()).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "{mean}");
    }

    #[test]
    fn haar_mean_fidelity_to_zero_is_half() {
        let mut rng = trial_rng(12, 0);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| sample_haar_qubit(&mut rng).alpha().powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn same_seed_same_samples() {
        let a: Vec<_> = (0..5).map(|i| sample_haar_qubit(&mut trial_rng(3, i))).collect();
        let b: Vec<_> = (0..5).map(|i| sample_haar_qubit(&mut trial_rng(3, i))).collect();
        assert_eq!(a, b);
        assert_ne!(a[0], sample_haar_qubit(&mut trial_rng(4, 0)));
    }

    #[test]
    fn streams_differ_per_trial() {
        assert_ne!(trial_rng(1, 0).gen::<u64>(), trial_rng(1, 1).gen::<u64>());
    }

    #[test]
    fn real_mode_has_zero_phase() {
        let mut rng = trial_rng(5, 0);
        for _ in 0..100 {
            let q = sample_real_qubit(&mut rng);
            assert_eq!(q.beta().im, 0.0);
            assert!(q.beta().re >= 0.0);
        }
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(TrialConfig::new(ProtocolKind::Single, 0, 1, InputMode::Haar).is_err());
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(0, 10);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 1.0);
        let (lo, hi) = wilson_interval(10, 10);
        assert!(lo < 1.0);
        assert_eq!(hi, 1.0);
        let (lo, hi) = wilson_interval(500, 1000);
        assert!(lo < 0.5 && hi > 0.5);
        assert!((0.5 - lo - (hi - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn exact_checks_need_equality() {
        assert!(Check::new("x", 10, 10, 1.0).pass);
        assert!(!Check::new("x", 9, 10, 1.0).pass);
        assert_eq!(Check::new("x", 9, 10, 1.0).tolerance, 0.0);
    }

    #[test]
    fn counts_sum_to_trials() {
        let config = TrialConfig::new(ProtocolKind::Double, 400, 8, InputMode::Haar).unwrap();
        let stats = run_trials(&config).unwrap();
        assert_eq!(stats.trials, 400);
        assert_eq!(stats.first_bell.values().sum::<u64>(), 400);
        assert_eq!(stats.copies.values().sum::<u64>(), 400);
        assert_eq!(stats.branches.values().sum::<u64>(), 400);
        assert_eq!(stats.classes.values().sum::<u64>(), 800);
        assert_eq!(stats.exact, 400);
        let report = summarize_stats(&config, &stats);
        for c in &report.checks {
            assert!(0.0 <= c.ci_low && c.ci_low <= c.ci_high && c.ci_high <= 1.0);
        }
    }

    #[test]
    fn thread_count_does_not_matter() {
        let config = TrialConfig::new(ProtocolKind::Single, 300, 21, InputMode::Haar).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_trials(&config)).unwrap();
        let b = four.install(|| run_trials(&config)).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn aggregation_is_order_independent(order in Just((0u64..40).collect::<Vec<_>>()).prop_shuffle()) {
            let config = TrialConfig::new(ProtocolKind::Double, 40, 77, InputMode::Haar).unwrap();
            let singles: Vec<TrialStats> = (0..40)
                .map(|i| {
                    let (psi, r) = run_trial(&config, i).unwrap();
                    let mut s = TrialStats::default();
                    s.record(&r, &psi);
                    s
                })
                .collect();
            let forward = singles.iter().cloned().fold(TrialStats::default(), TrialStats::merge);
            let shuffled = order
                .iter()
                .map(|&i| singles[i as usize].clone())
                .fold(TrialStats::default(), TrialStats::merge);
            prop_assert_eq!(forward, shuffled);
        }
    }
}
