//! Dense state vectors over registers of labeled two-level particles.
//!
//! Particles are labeled `1..=n`. Particle 1 is the most significant bit of
//! the basis index, so the ket `|0011⟩` on particles `(1, 2, 3, 4)` is index 3.
//! Values are immutable; every operation returns a new value.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// A single complex amplitude.
pub type Amplitude = Complex64;

/// Hard cap on register size for the dense representation.
pub const MAX_PARTICLES: usize = 24;

/// Tolerance for single-step identities.
pub const EXACT_TOL: f64 = 1e-12;

/// Tolerance for multi-step pipelines.
pub const PIPELINE_TOL: f64 = 1e-10;

const ZERO: Amplitude = Complex64::new(0.0, 0.0);
const ONE: Amplitude = Complex64::new(1.0, 0.0);

#[inline]
fn c(re: f64, im: f64) -> Amplitude {
    Complex64::new(re, im)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Amplitude>,
}

impl StateVector {
    /// Computational basis state `|index⟩` on `n` particles.
    pub fn basis_state(n: usize, index: usize) -> Result<Self> {
        check_size(n)?;
        let dim = 1usize << n;
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, n });
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { n, amps })
    }

    /// Wraps raw amplitudes. The vector is not normalized; use
    /// [`StateVector::normalized`] when a physical state is required.
    pub fn from_amplitudes(amps: Vec<Amplitude>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::BadLength(len));
        }
        let n = len.trailing_zeros() as usize;
        check_size(n)?;
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { n, amps })
    }

    /// Single-particle state `a0|0⟩ + a1|1⟩` (not normalized).
    pub fn qubit(a0: Amplitude, a1: Amplitude) -> Self {
        Self {
            n: 1,
            amps: vec![a0, a1],
        }
    }

    pub fn n_particles(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Amplitude {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok(self.scale(c(1.0 / norm, 0.0)))
    }

    pub fn scale(&self, factor: Amplitude) -> Self {
        Self {
            n: self.n,
            amps: self.amps.iter().map(|a| a * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_size(other)?;
        Ok(Self {
            n: self.n,
            amps: self.amps.iter().zip(&other.amps).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(c(-1.0, 0.0)))
    }

    /// Kronecker product; `self` occupies the more significant positions.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let n = self.n + other.n;
        check_size(n)?;
        let mut amps = Vec::with_capacity(1 << n);
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(Self { n, amps })
    }

    /// Applies `u` to the tensor factor of `particle`.
    pub fn apply_one(&self, u: &Unitary2, particle: usize) -> Result<Self> {
        let mask = self.bit_mask(particle)?;
        let mut amps = self.amps.clone();
        for i in 0..self.dim() {
            if i & mask != 0 {
                continue;
            }
            let j = i | mask;
            let (a0, a1) = (self.amps[i], self.amps[j]);
            amps[i] = u.m[0][0] * a0 + u.m[0][1] * a1;
            amps[j] = u.m[1][0] * a0 + u.m[1][1] * a1;
        }
        Ok(Self { n: self.n, amps })
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Result<Amplitude> {
        self.same_size(other)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Single-particle marginal, normalized to unit trace.
    pub fn reduced_density(&self, particle: usize) -> Result<DensityMatrix2> {
        let mask = self.bit_mask(particle)?;
        let mut m = [[ZERO; 2]; 2];
        for i in 0..self.dim() {
            if i & mask != 0 {
                continue;
            }
            let (a0, a1) = (self.amps[i], self.amps[i | mask]);
            m[0][0] += a0 * a0.conj();
            m[0][1] += a0 * a1.conj();
            m[1][0] += a1 * a0.conj();
            m[1][1] += a1 * a1.conj();
        }
        let tr = (m[0][0] + m[1][1]).re;
        if tr <= 0.0 || !tr.is_finite() {
            return Err(Error::ZeroNorm);
        }
        for row in &mut m {
            for x in row.iter_mut() {
                *x /= tr;
            }
        }
        Ok(DensityMatrix2 { m })
    }

    /// `Σ_k (|v_k⟩⟨v_k| ⊗ I) |self⟩` where each `v_k` lives on `targets`
    /// (listed most significant first) and the identity acts on the rest.
    pub fn apply_local_projector(&self, targets: &[usize], vectors: &[Vec<Amplitude>]) -> Result<Self> {
        let layout = LocalLayout::new(self.n, targets)?;
        let local_dim = 1usize << targets.len();
        if let Some(v) = vectors.iter().find(|v| v.len() != local_dim) {
            return Err(Error::BadLength(v.len()));
        }
        let rest_dim = 1usize << (self.n - targets.len());
        let mut amps = vec![ZERO; self.dim()];
        let mut contracted = vec![ZERO; rest_dim];
        for v in vectors {
            contracted.iter_mut().for_each(|x| *x = ZERO);
            for (i, a) in self.amps.iter().enumerate() {
                let (t, r) = layout.split(i);
                contracted[r] += v[t].conj() * a;
            }
            for (i, out) in amps.iter_mut().enumerate() {
                let (t, r) = layout.split(i);
                *out += v[t] * contracted[r];
            }
        }
        Ok(Self { n: self.n, amps })
    }

    /// `min_χ ‖self − e^{iχ} other‖`.
    pub fn phase_insensitive_distance(&self, other: &Self) -> Result<f64> {
        let overlap = self.inner(other)?.norm();
        let d2 = self.norm_sqr() + other.norm_sqr() - 2.0 * overlap;
        Ok(d2.max(0.0).sqrt())
    }

    /// Distance between the rays of two nonzero vectors: both sides are
    /// normalized, then compared up to a global phase.
    pub fn ray_distance(&self, other: &Self) -> Result<f64> {
        self.normalized()?.phase_insensitive_distance(&other.normalized()?)
    }

    /// `|⟨self|other⟩|²` for normalized states.
    pub fn overlap_sqr(&self, other: &Self) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    fn same_size(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }

    fn bit_mask(&self, particle: usize) -> Result<usize> {
        check_label(self.n, particle)?;
        Ok(1usize << (self.n - particle))
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm() < 1e-15 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i)|{:0width$b}⟩", a.re, a.im, i, width = self.n)?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

pub(crate) fn check_size(n: usize) -> Result<()> {
    if n == 0 || n > MAX_PARTICLES {
        return Err(Error::TooManyParticles(n));
    }
    Ok(())
}

pub(crate) fn check_label(n: usize, particle: usize) -> Result<()> {
    if particle == 0 || particle > n {
        return Err(Error::LabelOutOfRange { label: particle, n });
    }
    Ok(())
}

/// Splits a full basis index into (target-local index, rest index).
struct LocalLayout {
    target_shifts: Vec<usize>,
    rest_shifts: Vec<usize>,
}

impl LocalLayout {
    fn new(n: usize, targets: &[usize]) -> Result<Self> {
        for (k, &p) in targets.iter().enumerate() {
            check_label(n, p)?;
            if targets[..k].contains(&p) {
                return Err(Error::RepeatedParticle(p));
            }
        }
        let rest = (1..=n).filter(|p| !targets.contains(p));
        Ok(Self {
            target_shifts: targets.iter().map(|&p| n - p).collect(),
            rest_shifts: rest.map(|p| n - p).collect(),
        })
    }

    fn split(&self, index: usize) -> (usize, usize) {
        let gather = |shifts: &[usize]| shifts.iter().fold(0usize, |acc, &s| (acc << 1) | ((index >> s) & 1));
        (gather(&self.target_shifts), gather(&self.rest_shifts))
    }
}

/// A 2×2 unitary, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2 {
    m: [[Amplitude; 2]; 2],
}

impl Unitary2 {
    pub fn new(m: [[Amplitude; 2]; 2]) -> Result<Self> {
        let u = Self { m };
        let dev = u.dagger().mul(&u).max_deviation(&Self::identity());
        if !(dev <= EXACT_TOL) {
            return Err(Error::NotUnitary(dev));
        }
        Ok(u)
    }

    pub fn identity() -> Self {
        Self {
            m: [[ONE, ZERO], [ZERO, ONE]],
        }
    }

    pub fn sigma_x() -> Self {
        Self {
            m: [[ZERO, ONE], [ONE, ZERO]],
        }
    }

    pub fn sigma_y() -> Self {
        Self {
            m: [[ZERO, c(0.0, -1.0)], [c(0.0, 1.0), ZERO]],
        }
    }

    pub fn sigma_z() -> Self {
        Self {
            m: [[ONE, ZERO], [ZERO, -ONE]],
        }
    }

    /// `iσy = [[0, 1], [−1, 0]]`, the real rotation mapping a real `ψ` to `ψ⊥`.
    pub fn i_sigma_y() -> Self {
        Self::sigma_y().scaled(c(0.0, 1.0))
    }

    pub fn matrix(&self) -> [[Amplitude; 2]; 2] {
        self.m
    }

    pub fn scaled(&self, factor: Amplitude) -> Self {
        let mut m = self.m;
        m.iter_mut().flatten().for_each(|x| *x *= factor);
        Self { m }
    }

    pub fn dagger(&self) -> Self {
        let m = self.m;
        Self {
            m: [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]],
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let (a, b) = (&self.m, &rhs.m);
        let mut m = [[ZERO; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Self { m }
    }

    pub fn apply(&self, v: [Amplitude; 2]) -> [Amplitude; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_deviation(&self, other: &Self) -> f64 {
        self.m
            .iter()
            .flatten()
            .zip(other.m.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// True when `self = e^{iχ} other` for some χ.
    pub fn equals_up_to_phase(&self, other: &Self, tol: f64) -> bool {
        // tr(other† self) = 2 e^{iχ} exactly when the two agree up to phase
        let t = other.dagger().mul(self);
        let tr = t.m[0][0] + t.m[1][1];
        (2.0 - tr.norm()).abs() <= tol
    }
}

/// A single-particle density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix2 {
    m: [[Amplitude; 2]; 2],
}

impl DensityMatrix2 {
    /// Validates Hermiticity, unit trace and positivity (all within 1e-12).
    pub fn new(m: [[Amplitude; 2]; 2]) -> Result<Self> {
        let rho = Self { m };
        let herm = (m[0][1] - m[1][0].conj())
            .norm()
            .max(m[0][0].im.abs())
            .max(m[1][1].im.abs());
        if herm > EXACT_TOL {
            return Err(Error::InvalidDensity(format!("not Hermitian ({herm:e})")));
        }
        if (rho.trace() - 1.0).abs() > EXACT_TOL {
            return Err(Error::InvalidDensity(format!("trace {}", rho.trace())));
        }
        let (lo, _) = rho.eigenvalues();
        if lo < -EXACT_TOL {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {lo}")));
        }
        Ok(rho)
    }

    pub fn pure(v: [Amplitude; 2]) -> Self {
        let mut m = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = v[i] * v[j].conj();
            }
        }
        Self { m }
    }

    pub fn maximally_mixed() -> Self {
        Self {
            m: [[c(0.5, 0.0), ZERO], [ZERO, c(0.5, 0.0)]],
        }
    }

    pub fn matrix(&self) -> [[Amplitude; 2]; 2] {
        self.m
    }

    pub fn trace(&self) -> f64 {
        (self.m[0][0] + self.m[1][1]).re
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        let m = &self.m;
        (m[0][0] * m[0][0] + m[0][1] * m[1][0] + m[1][0] * m[0][1] + m[1][1] * m[1][1]).re
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let (a, d) = (self.m[0][0].re, self.m[1][1].re);
        let disc = ((a - d) * (a - d) + 4.0 * self.m[0][1].norm_sqr()).sqrt();
        ((a + d - disc) / 2.0, (a + d + disc) / 2.0)
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &Unitary2) -> Self {
        let um = u.matrix();
        let mut out = [[ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                for k in 0..2 {
                    for l in 0..2 {
                        *x += um[i][k] * self.m[k][l] * um[j][l].conj();
                    }
                }
            }
        }
        Self { m: out }
    }

    /// Weighted sum `Σ w_k ρ_k`.
    pub fn mixture<'a>(terms: impl IntoIterator<Item = (f64, &'a DensityMatrix2)>) -> Self {
        let mut m = [[ZERO; 2]; 2];
        for (w, rho) in terms {
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] += rho.m[i][j] * w;
                }
            }
        }
        Self { m }
    }

    pub fn max_deviation(&self, other: &Self) -> f64 {
        self.m
            .iter()
            .flatten()
            .zip(other.m.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `⟨v|ρ|v⟩` for a normalized two-vector.
    pub fn expectation(&self, v: [Amplitude; 2]) -> f64 {
        let mut acc = ZERO;
        for i in 0..2 {
            for j in 0..2 {
                acc += v[i].conj() * self.m[i][j] * v[j];
            }
        }
        acc.re
    }
}

/// Fidelity `⟨ψ|ρ|ψ⟩` of a single-particle state to a pure target.
pub fn fidelity_pure(rho: &DensityMatrix2, target: &PureQubit) -> f64 {
    rho.expectation(target.amplitudes())
}

/// `α|0⟩ + β|1⟩` with `α` real and non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureQubit {
    alpha: f64,
    beta: Amplitude,
}

impl PureQubit {
    pub fn new(alpha: f64, beta: Amplitude) -> Result<Self> {
        if !alpha.is_finite() || !beta.re.is_finite() || !beta.im.is_finite() {
            return Err(Error::NonFinite);
        }
        if alpha < 0.0 {
            return Err(Error::InvalidQubit(format!("alpha = {alpha} is negative")));
        }
        let norm = alpha * alpha + beta.norm_sqr();
        if (norm - 1.0).abs() > EXACT_TOL {
            return Err(Error::InvalidQubit(format!("alpha² + |beta|² = {norm}")));
        }
        Ok(Self { alpha, beta })
    }

    /// Bloch-sphere parametrization: `α = cos(θ/2)`, `β = sin(θ/2) e^{iφ}`.
    pub fn from_angles(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::AngleOutOfRange {
                name: "theta",
                value: theta,
                range: "[0, π]",
            });
        }
        if !(0.0..2.0 * PI).contains(&phi) {
            return Err(Error::AngleOutOfRange {
                name: "phi",
                value: phi,
                range: "[0, 2π)",
            });
        }
        let half = theta / 2.0;
        Ok(Self {
            alpha: half.cos(),
            beta: Complex64::from_polar(half.sin(), phi),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> Amplitude {
        self.beta
    }

    pub fn theta(&self) -> f64 {
        2.0 * self.alpha.clamp(-1.0, 1.0).acos()
    }

    pub fn phi(&self) -> f64 {
        if self.beta.norm() < 1e-15 {
            return 0.0;
        }
        self.beta.arg().rem_euclid(2.0 * PI)
    }

    pub fn amplitudes(&self) -> [Amplitude; 2] {
        [c(self.alpha, 0.0), self.beta]
    }

    /// `ψ⊥ = α|1⟩ − β*|0⟩`.
    pub fn complement_amplitudes(&self) -> [Amplitude; 2] {
        [-self.beta.conj(), c(self.alpha, 0.0)]
    }

    pub fn state(&self) -> StateVector {
        let [a0, a1] = self.amplitudes();
        StateVector::qubit(a0, a1)
    }

    pub fn complement_state(&self) -> StateVector {
        let [a0, a1] = self.complement_amplitudes();
        StateVector::qubit(a0, a1)
    }
}
