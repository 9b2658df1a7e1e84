//! QPSK mapping of per-eigenvalue common/differential phases onto the
//! spectral coefficients, and the receiver-side estimators.
//!
//! Encoding: `b1 = |b1| e^{jφ_c}`, `b2 = |b2| e^{j(φ_c + φ_d)}`. The
//! differential phase is recovered without any channel knowledge from
//! `φ̂_d = arg(b̂1* · b̂2)` — the `e^{-4jλ²z}` channel rotation cancels in the
//! product. The common phase needs a back-rotation; the receiver estimate
//! uses the two-point trapezoid `φ̂_c = arg(b̂1 · e^{2j(λ²(0) + λ̂²(L)) L})`
//! built from the design eigenvalue and the detected one.

use crate::darboux::{SolitonSpec, SpectralLine};
use crate::error::{Error, Result};
use crate::nft::SpectrumEstimate;
use crate::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// The QPSK constellation phases, in index order.
pub const QPSK_PHASES: [f64; 4] = [PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0, 7.0 * PI / 4.0];

/// Wrap a phase into `(-π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let r = (x + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderMode {
    /// Both `φ_c` and `φ_d` carry QPSK data.
    Differential,
    /// `φ_d = -2φ_c`: the coefficients form a phase-conjugated pair.
    TwinWave,
    /// `φ_c = 0`: the common phase is a pilot for the back-rotation.
    Pilot,
}

impl EncoderMode {
    pub fn name(&self) -> &'static str {
        match self {
            EncoderMode::Differential => "differential",
            EncoderMode::TwinWave => "twin-wave",
            EncoderMode::Pilot => "pilot",
        }
    }
}

/// Per-eigenvalue transmitted phase pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolPair {
    pub phi_c: f64,
    pub phi_d: f64,
}

/// The transmitted frame: one `(φ_c, φ_d)` pair per eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolFrame {
    symbols: Vec<SymbolPair>,
    mode: EncoderMode,
}

fn is_qpsk(phi: f64) -> bool {
    QPSK_PHASES.iter().any(|&c| wrap_phase(phi - c).abs() < 1e-9)
}

impl SymbolFrame {
    /// Validate the per-mode constraints: data phases must be QPSK points;
    /// twin-wave forces `φ_d = -2φ_c` and pilot forces `φ_c = 0`.
    pub fn new(symbols: Vec<SymbolPair>, mode: EncoderMode) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidSpec("frame must carry at least one symbol".into()));
        }
        for (k, s) in symbols.iter().enumerate() {
            match mode {
                EncoderMode::Differential => {
                    if !is_qpsk(s.phi_c) || !is_qpsk(s.phi_d) {
                        return Err(Error::InvalidSpec(format!(
                            "symbol {k}: differential mode requires QPSK phases"
                        )));
                    }
                }
                EncoderMode::TwinWave => {
                    if !is_qpsk(s.phi_c) {
                        return Err(Error::InvalidSpec(format!(
                            "symbol {k}: twin-wave mode requires a QPSK common phase"
                        )));
                    }
                    if wrap_phase(s.phi_d + 2.0 * s.phi_c).abs() > 1e-9 {
                        return Err(Error::InvalidSpec(format!(
                            "symbol {k}: twin-wave mode requires φ_d = -2φ_c"
                        )));
                    }
                }
                EncoderMode::Pilot => {
                    if s.phi_c.abs() > 1e-9 {
                        return Err(Error::InvalidSpec(format!(
                            "symbol {k}: pilot mode requires φ_c = 0"
                        )));
                    }
                    if !is_qpsk(s.phi_d) {
                        return Err(Error::InvalidSpec(format!(
                            "symbol {k}: pilot mode requires a QPSK differential phase"
                        )));
                    }
                }
            }
        }
        Ok(Self { symbols, mode })
    }

    /// Draw a uniform random frame for `n_eigenvalues` in the given mode.
    pub fn random<R: Rng>(mode: EncoderMode, n_eigenvalues: usize, rng: &mut R) -> Self {
        let symbols = (0..n_eigenvalues)
            .map(|_| {
                let pick = |rng: &mut R| QPSK_PHASES[rng.gen_range(0..4)];
                match mode {
                    EncoderMode::Differential => SymbolPair {
                        phi_c: pick(rng),
                        phi_d: pick(rng),
                    },
                    EncoderMode::TwinWave => {
                        let phi_c = pick(rng);
                        SymbolPair {
                            phi_c,
                            phi_d: wrap_phase(-2.0 * phi_c),
                        }
                    }
                    EncoderMode::Pilot => SymbolPair {
                        phi_c: 0.0,
                        phi_d: pick(rng),
                    },
                }
            })
            .collect();
        Self { symbols, mode }
    }

    pub fn symbols(&self) -> &[SymbolPair] {
        &self.symbols
    }

    pub fn mode(&self) -> EncoderMode {
        self.mode
    }
}

/// Map a frame onto a soliton spec: `b1 = |b1| e^{jφ_c}`,
/// `b2 = |b2| e^{j(φ_c+φ_d)}` per eigenvalue.
pub fn encode_frame(
    frame: &SymbolFrame,
    eigenvalues: &[Complex],
    magnitudes: &[(f64, f64)],
) -> Result<SolitonSpec> {
    if frame.symbols.len() != eigenvalues.len() || magnitudes.len() != eigenvalues.len() {
        return Err(Error::InvalidSpec(format!(
            "frame ({}), eigenvalues ({}) and magnitudes ({}) must agree in length",
            frame.symbols.len(),
            eigenvalues.len(),
            magnitudes.len()
        )));
    }
    let entries = frame
        .symbols
        .iter()
        .zip(eigenvalues)
        .zip(magnitudes)
        .map(|((s, &lambda), &(m1, m2))| {
            let b1 = Complex::from_polar(m1, s.phi_c);
            let b2 = Complex::from_polar(m2, s.phi_c + s.phi_d);
            SpectralLine::new(lambda, b1, b2)
        })
        .collect();
    SolitonSpec::new(entries)
}

/// Invert the ideal channel rotation: multiply by `e^{+4jλ²L}`.
pub fn ideal_backrotation(b: Complex, lambda: Complex, l: f64) -> Complex {
    b * (Complex::new(0.0, 4.0) * lambda * lambda * l).exp()
}

/// Sampled eigenvalue path along the link, in normalized distance units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenTrace {
    samples: Vec<(f64, Complex)>,
}

impl EigenTrace {
    /// `samples` must start at `z = 0` and be strictly increasing in `z`.
    pub fn new(samples: Vec<(f64, Complex)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidSpec("eigenvalue trace must not be empty".into()));
        }
        if samples[0].0.abs() > 1e-12 {
            return Err(Error::InvalidSpec("eigenvalue trace must start at z = 0".into()));
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidSpec("eigenvalue trace must be strictly increasing in z".into()));
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(f64, Complex)] {
        &self.samples
    }

    /// Trapezoidal estimate of `∫ λ²(z) dz` over the trace.
    pub fn lambda_sq_integral(&self) -> Complex {
        let mut acc = Complex::new(0.0, 0.0);
        for w in self.samples.windows(2) {
            let (z0, l0) = w[0];
            let (z1, l1) = w[1];
            acc += (l0 * l0 + l1 * l1) * 0.5 * (z1 - z0);
        }
        acc
    }
}

/// Back-rotate using the recorded eigenvalue path: multiply by
/// `e^{+4j ∫λ²(z)dz}` (trapezoidal quadrature). Only available for model
/// validation — a receiver has no access to the trace.
pub fn trace_backrotation(b: Complex, trace: &EigenTrace) -> Complex {
    b * (Complex::new(0.0, 4.0) * trace.lambda_sq_integral()).exp()
}

/// Differential-phase estimates `φ̂_d = arg(b̂1* b̂2)`, one per design slot;
/// failed eigenvalues yield `None`.
pub fn decode_differential(estimate: &SpectrumEstimate) -> Vec<Option<f64>> {
    estimate
        .points
        .iter()
        .map(|p| p.as_ref().ok().map(|r| (r.b1.conj() * r.b2).arg()))
        .collect()
}

/// Which received coefficient feeds the common-phase estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolComponent {
    B1,
    B2,
}

/// Common-phase estimates via the two-point back-rotation
/// `arg(b̂ · e^{2j(λ²(0)+λ̂²(L))L})` (Eq.-(5)-style trapezoid of `∫λ²dz`).
pub fn decode_common_component(
    estimate: &SpectrumEstimate,
    design: &SolitonSpec,
    l_norm: f64,
    component: PolComponent,
) -> Vec<Option<f64>> {
    estimate
        .points
        .iter()
        .zip(design.entries())
        .map(|(p, line)| {
            p.as_ref().ok().map(|r| {
                let b = match component {
                    PolComponent::B1 => r.b1,
                    PolComponent::B2 => r.b2,
                };
                let l0 = line.lambda;
                let rot = (Complex::new(0.0, 2.0) * (l0 * l0 + r.lambda * r.lambda) * l_norm).exp();
                (b * rot).arg()
            })
        })
        .collect()
}

/// Common-phase estimates from `b̂1` (the paper's `φ̂_c`).
pub fn decode_common(estimate: &SpectrumEstimate, design: &SolitonSpec, l_norm: f64) -> Vec<Option<f64>> {
    decode_common_component(estimate, design, l_norm, PolComponent::B1)
}

/// Hard QPSK decision with the documented tie rule (lower index wins).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardDecision {
    pub index: usize,
    pub wrapped_error: f64,
}

/// Nearest-constellation decision on `phi_hat`, plus the wrapped error
/// against the transmitted phase.
pub fn hard_decide(phi_hat: f64, transmitted: f64) -> Result<HardDecision> {
    if !phi_hat.is_finite() {
        return Err(Error::Numerical(format!("cannot decide on non-finite phase {phi_hat}")));
    }
    let mut index = 0;
    let mut best = f64::INFINITY;
    for (i, &c) in QPSK_PHASES.iter().enumerate() {
        let d = wrap_phase(phi_hat - c).abs();
        if d < best - 1e-12 {
            best = d;
            index = i;
        }
    }
    Ok(HardDecision {
        index,
        wrapped_error: wrap_phase(phi_hat - transmitted),
    })
}

/// Decoded frame: per design eigenvalue the two phase estimates, hard
/// decisions and wrapped errors (`None` where the NFT failed).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodedFrame {
    pub symbols: Vec<Option<DecodedSymbol>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecodedSymbol {
    pub phi_c: f64,
    pub phi_d: f64,
    pub decision_c: HardDecision,
    pub decision_d: HardDecision,
}

/// Run both estimators against a transmitted frame.
pub fn decode_frame(
    estimate: &SpectrumEstimate,
    design: &SolitonSpec,
    l_norm: f64,
    tx: &SymbolFrame,
) -> Result<DecodedFrame> {
    if tx.symbols().len() != design.entries().len() || estimate.points.len() != design.entries().len() {
        return Err(Error::InvalidSpec(
            "frame, design and estimate must have matching eigenvalue counts".into(),
        ));
    }
    let phi_d = decode_differential(estimate);
    let phi_c = decode_common(estimate, design, l_norm);
    let mut symbols = Vec::with_capacity(tx.symbols().len());
    for ((d, c), s) in phi_d.iter().zip(&phi_c).zip(tx.symbols()) {
        match (d, c) {
            (Some(pd), Some(pc)) => symbols.push(Some(DecodedSymbol {
                phi_c: *pc,
                phi_d: *pd,
                decision_c: hard_decide(*pc, s.phi_c)?,
                decision_d: hard_decide(*pd, s.phi_d)?,
            })),
            _ => symbols.push(None),
        }
    }
    Ok(DecodedFrame { symbols })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nft::{ScatteringResult, SpectrumEstimate};
    use proptest::prelude::*;
    use rand::SeedableRng;

    const TAU_LIMIT: f64 = 2.0 * PI;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn fake_estimate(points: Vec<(Complex, Complex, Complex)>, distance_km: f64) -> SpectrumEstimate {
        SpectrumEstimate {
            points: points
                .into_iter()
                .map(|(lambda, b1, b2)| {
                    Ok(ScatteringResult {
                        lambda,
                        a: c(0.0, 0.0),
                        a_prime: c(1.0, 0.0),
                        b1,
                        b2,
                        residual: 0.0,
                    })
                })
                .collect(),
            distance_km,
        }
    }

    #[test]
    fn encode_direct_substitution() {
        let frame = SymbolFrame::new(
            vec![SymbolPair {
                phi_c: PI / 4.0,
                phi_d: 3.0 * PI / 4.0,
            }],
            EncoderMode::Differential,
        )
        .unwrap();
        let spec = encode_frame(&frame, &[c(0.0, 0.5)], &[(1.0, 1.0)]).unwrap();
        let e = spec.entries()[0];
        assert!((e.b1 - Complex::from_polar(1.0, PI / 4.0)).norm() < 1e-15);
        assert!((e.b2 - Complex::from_polar(1.0, PI)).norm() < 1e-15);

        // φ_d = 0 (not a QPSK point, so built directly): b2/b1 positive real
        let spec = encode_frame(
            &SymbolFrame {
                symbols: vec![SymbolPair {
                    phi_c: 5.0 * PI / 4.0,
                    phi_d: 0.0,
                }],
                mode: EncoderMode::Differential,
            },
            &[c(0.0, 0.5)],
            &[(1.0, 2.0)],
        )
        .unwrap();
        let e = spec.entries()[0];
        let ratio = e.b2 / e.b1;
        assert!(ratio.im.abs() < 1e-15 && ratio.re > 0.0);
    }

    #[test]
    fn twin_wave_is_conjugate_pair() {
        let frame = SymbolFrame::new(
            vec![SymbolPair {
                phi_c: PI / 4.0,
                phi_d: wrap_phase(-PI / 2.0),
            }],
            EncoderMode::TwinWave,
        )
        .unwrap();
        let spec = encode_frame(&frame, &[c(0.0, 0.5)], &[(1.0, 1.0)]).unwrap();
        let e = spec.entries()[0];
        assert!((e.b2 - e.b1.conj()).norm() < 1e-15);
    }

    #[test]
    fn pilot_mode_fixes_common_phase() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let frame = SymbolFrame::random(EncoderMode::Pilot, 4, &mut rng);
        for s in frame.symbols() {
            assert_eq!(s.phi_c, 0.0);
            assert!(is_qpsk(s.phi_d));
        }
        let twin = SymbolFrame::random(EncoderMode::TwinWave, 4, &mut rng);
        for s in twin.symbols() {
            assert!(wrap_phase(s.phi_d + 2.0 * s.phi_c).abs() < 1e-12);
        }
    }

    #[test]
    fn ideal_backrotation_examples() {
        // λ = 1j, L = π/2: e^{4j(-1)(π/2)} inverted is the identity
        let b = c(0.3, -0.7);
        let out = ideal_backrotation(b, c(0.0, 1.0), PI / 2.0);
        assert!((out - b).norm() < 1e-12);
        // L = 0: identity
        assert_eq!(ideal_backrotation(b, c(0.2, 0.8), 0.0), b);
        // inverse pair with the channel rotation
        let lambda = c(0.1, 0.7);
        let l = 3.7;
        let through = b * (Complex::new(0.0, -4.0) * lambda * lambda * l).exp();
        assert!((ideal_backrotation(through, lambda, l) - b).norm() < 1e-10);
    }

    #[test]
    fn trace_backrotation_examples() {
        let b = c(1.0, 0.4);
        // constant trace equals the ideal rotation
        let lambda = c(0.05, 0.9);
        let l = 2.4;
        let trace = EigenTrace::new(vec![(0.0, lambda), (l / 2.0, lambda), (l, lambda)]).unwrap();
        let via_trace = trace_backrotation(b, &trace);
        let via_ideal = ideal_backrotation(b, lambda, l);
        assert!((via_trace - via_ideal).norm() < 1e-12);

        // two-segment piecewise-constant path: rotation e^{2j(λ²+λ'²)L}
        let (l1, l2) = (c(0.0, 0.5), c(0.0, 1.0));
        let total = 1.6;
        let eps = 1e-9;
        let trace = EigenTrace::new(vec![
            (0.0, l1),
            (total / 2.0 - eps, l1),
            (total / 2.0 + eps, l2),
            (total, l2),
        ])
        .unwrap();
        let expect = b * (Complex::new(0.0, 2.0) * (l1 * l1 + l2 * l2) * total).exp();
        assert!((trace_backrotation(b, &trace) - expect).norm() < 1e-6);

        // unsorted trace rejected
        assert!(EigenTrace::new(vec![(0.0, l1), (1.0, l1), (0.5, l2)]).is_err());
    }

    #[test]
    fn decode_differential_noiseless_identity() {
        let frame = SymbolFrame::new(
            vec![
                SymbolPair {
                    phi_c: PI / 4.0,
                    phi_d: 7.0 * PI / 4.0,
                },
                SymbolPair {
                    phi_c: 5.0 * PI / 4.0,
                    phi_d: 3.0 * PI / 4.0,
                },
            ],
            EncoderMode::Differential,
        )
        .unwrap();
        let eigens = [c(0.0, 0.5), c(0.0, 1.0)];
        let spec = encode_frame(&frame, &eigens, &[(1.0, 1.0), (1.0, 1.0)]).unwrap();
        let est = fake_estimate(
            spec.entries().iter().map(|e| (e.lambda, e.b1, e.b2)).collect(),
            0.0,
        );
        for (got, s) in decode_differential(&est).iter().zip(frame.symbols()) {
            assert!(wrap_phase(got.unwrap() - s.phi_d).abs() < 1e-12);
        }
        // common phase at L = 0 is arg b1 directly
        for (got, s) in decode_common(&est, &spec, 0.0).iter().zip(frame.symbols()) {
            assert!(wrap_phase(got.unwrap() - s.phi_c).abs() < 1e-12);
        }
    }

    #[test]
    fn decode_common_inverts_ideal_channel() {
        // λ̂ = λ(0): the trapezoid degenerates to the exact inverse
        let lambda = c(0.0, 1.0);
        let l = 4.76;
        let b1 = Complex::from_polar(1.0, 3.0 * PI / 4.0);
        let rx = b1 * (Complex::new(0.0, -4.0) * lambda * lambda * l).exp();
        let spec = SolitonSpec::new(vec![SpectralLine::new(lambda, b1, b1)]).unwrap();
        let est = fake_estimate(vec![(lambda, rx, rx)], 0.0);
        let got = decode_common(&est, &spec, l)[0].unwrap();
        assert!(wrap_phase(got - 3.0 * PI / 4.0).abs() < 1e-10);
    }

    #[test]
    fn purely_imaginary_eigenvalue_preserves_product_magnitude() {
        // ω = 0 throughout: |b̂1* b̂2| = |b1||b2| under the ideal rotation
        let lambda = c(0.0, 0.8);
        let (b1, b2) = (Complex::from_polar(1.3, 0.4), Complex::from_polar(0.9, -1.1));
        let l = 2.9;
        let rot = (Complex::new(0.0, -4.0) * lambda * lambda * l).exp();
        let prod = (b1 * rot).conj() * (b2 * rot);
        assert!((prod.norm() - b1.norm() * b2.norm()).abs() < 1e-12);
    }

    #[test]
    fn hard_decide_examples() {
        // 0.8 rad is 0.015 rad from π/4, 1.55 rad from the next point
        let d = hard_decide(0.8, QPSK_PHASES[0]).unwrap();
        assert_eq!(d.index, 0);
        assert!((d.wrapped_error - (0.8 - PI / 4.0)).abs() < 1e-15);

        // exact tie at π between 3π/4 and 5π/4: lower index wins
        let d = hard_decide(PI, QPSK_PHASES[1]).unwrap();
        assert_eq!(d.index, 1);

        // transmitted phase decodes with zero error
        let d = hard_decide(5.0 * PI / 4.0, 5.0 * PI / 4.0).unwrap();
        assert_eq!(d.index, 2);
        assert_eq!(d.wrapped_error, 0.0);
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(0.1) - 0.1).abs() < 1e-15);
    }

    proptest! {
        // φ̂_d is invariant under any common phase applied to (b̂1, b̂2)
        #[test]
        fn differential_ignores_common_phase(
            a1 in 0.0f64..TAU_LIMIT, a2 in 0.0f64..TAU_LIMIT, g in 0.0f64..TAU_LIMIT,
            m1 in 0.1f64..3.0, m2 in 0.1f64..3.0
        ) {
            let b1 = Complex::from_polar(m1, a1);
            let b2 = Complex::from_polar(m2, a2);
            let rot = Complex::from_polar(1.0, g);
            let base = (b1.conj() * b2).arg();
            let rotated = ((b1 * rot).conj() * (b2 * rot)).arg();
            prop_assert!(wrap_phase(base - rotated).abs() < 1e-12);
        }

        // φ̂_d is invariant under the ideal channel rotation for any λ, L
        #[test]
        fn differential_ignores_channel_rotation(
            a1 in 0.0f64..TAU_LIMIT, a2 in 0.0f64..TAU_LIMIT,
            re in -1.0f64..1.0, im in 0.05f64..1.5, l in 0.0f64..10.0
        ) {
            let b1 = Complex::from_polar(1.0, a1);
            let b2 = Complex::from_polar(1.0, a2);
            let lambda = Complex::new(re, im);
            let rot = (Complex::new(0.0, -4.0) * lambda * lambda * l).exp();
            let base = (b1.conj() * b2).arg();
            let through = ((b1 * rot).conj() * (b2 * rot)).arg();
            prop_assert!(wrap_phase(base - through).abs() < 1e-12);
        }
    }
}
