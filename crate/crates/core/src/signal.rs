//! Time grids, dual-polarization envelopes and scalar waveform metrics.
//!
//! A [`DualPolEnvelope`] carries the two complex field components on a shared
//! uniform grid, either in physical units (time in ps, amplitude in √W) or in
//! normalized units (time in `t/T0`, dimensionless amplitude). The conversion
//! between the two is governed by [`NormalizationScales`].

use crate::channel::FiberParams;
use crate::darboux::SolitonSpec;
use crate::error::{Error, Result};
use crate::Complex;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Uniform sampling grid. In physical envelopes `dt` and `t0` are in ps, in
/// normalized envelopes they are in units of the time scale `T0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    n_samples: usize,
    dt: f64,
    t0: f64,
}

impl TimeGrid {
    /// Build a grid of `n_samples` points spaced `dt` apart, starting at `t0`.
    ///
    /// `n_samples` must be a power of two (required by the spectral
    /// propagator) and `dt` strictly positive.
    pub fn new(n_samples: usize, dt: f64, t0: f64) -> Result<Self> {
        if n_samples == 0 || !n_samples.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_samples must be a power of two, got {n_samples}"
            )));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidGrid(format!("t0 must be finite, got {t0}")));
        }
        Ok(Self { n_samples, dt, t0 })
    }

    /// Grid spanning `span` time units centered on zero.
    pub fn centered(n_samples: usize, span: f64) -> Result<Self> {
        let dt = span / n_samples as f64;
        Self::new(n_samples, dt, -span / 2.0)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Total covered span `n_samples * dt`.
    pub fn span(&self) -> f64 {
        self.n_samples as f64 * self.dt
    }

    pub fn time_at(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_samples).map(|i| self.time_at(i))
    }

    /// Angular frequencies (rad per time unit) in FFT bin order.
    pub fn angular_frequencies(&self) -> Vec<f64> {
        let n = self.n_samples as i64;
        let scale = 2.0 * PI / (self.n_samples as f64 * self.dt);
        (0..n)
            .map(|k| {
                let k = if k <= n / 2 - 1 { k } else { k - n };
                k as f64 * scale
            })
            .collect()
    }

    /// Rescale the time axis by `1/factor` (used by unit conversions).
    fn scaled(&self, factor: f64) -> Self {
        Self {
            n_samples: self.n_samples,
            dt: self.dt / factor,
            t0: self.t0 / factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnitSystem {
    /// Time in ps, amplitude in √W.
    Physical,
    /// Time in `t/T0`, dimensionless amplitude `q = A/√P0`.
    Normalized,
}

impl UnitSystem {
    pub fn name(&self) -> &'static str {
        match self {
            UnitSystem::Physical => "physical",
            UnitSystem::Normalized => "normalized",
        }
    }
}

/// Two complex field envelopes on a shared grid: the pulse `q = (q1, q2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPolEnvelope {
    pub grid: TimeGrid,
    pub q1: Vec<Complex>,
    pub q2: Vec<Complex>,
    pub units: UnitSystem,
}

impl DualPolEnvelope {
    pub fn new(grid: TimeGrid, q1: Vec<Complex>, q2: Vec<Complex>, units: UnitSystem) -> Result<Self> {
        if q1.len() != grid.n_samples() || q2.len() != grid.n_samples() {
            return Err(Error::InvalidEnvelope(format!(
                "component lengths ({}, {}) do not match grid ({} samples)",
                q1.len(),
                q2.len(),
                grid.n_samples()
            )));
        }
        Ok(Self { grid, q1, q2, units })
    }

    pub fn zeros(grid: TimeGrid, units: UnitSystem) -> Self {
        let n = grid.n_samples();
        Self {
            grid,
            q1: vec![Complex::new(0.0, 0.0); n],
            q2: vec![Complex::new(0.0, 0.0); n],
            units,
        }
    }

    /// Instantaneous total power `|q1|² + |q2|²` at sample `i`.
    pub fn power_at(&self, i: usize) -> f64 {
        self.q1[i].norm_sqr() + self.q2[i].norm_sqr()
    }

    pub fn require_units(&self, expected: UnitSystem) -> Result<()> {
        if self.units != expected {
            return Err(Error::UnitMismatch {
                expected: expected.name(),
                found: self.units.name(),
            });
        }
        Ok(())
    }

    /// Convert a physical envelope to normalized units: `q = A/√P0`, `t → t/T0`.
    pub fn to_normalized(&self, scales: &NormalizationScales) -> Result<Self> {
        self.require_units(UnitSystem::Physical)?;
        let s = 1.0 / scales.p0_w().sqrt();
        Ok(Self {
            grid: self.grid.scaled(scales.t0_ps()),
            q1: self.q1.iter().map(|v| v * s).collect(),
            q2: self.q2.iter().map(|v| v * s).collect(),
            units: UnitSystem::Normalized,
        })
    }

    /// Convert a normalized envelope back to physical units.
    pub fn to_physical(&self, scales: &NormalizationScales) -> Result<Self> {
        self.require_units(UnitSystem::Normalized)?;
        let s = scales.p0_w().sqrt();
        Ok(Self {
            grid: self.grid.scaled(1.0 / scales.t0_ps()),
            q1: self.q1.iter().map(|v| v * s).collect(),
            q2: self.q2.iter().map(|v| v * s).collect(),
            units: UnitSystem::Physical,
        })
    }
}

/// Scales linking normalized soliton units to SI units.
///
/// `P0 = |β2| / (γ T0²)` and `L_D = T0² / |β2|` hold by construction. One unit
/// of normalized propagation distance corresponds to `2 L_D` km (the factor of
/// two comes from the coefficient convention `j q_z = q_tt + 2‖q‖² q`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationScales {
    t0_ps: f64,
    p0_w: f64,
    dispersion_length_km: f64,
}

impl NormalizationScales {
    pub fn from_time_scale(t0_ps: f64, fiber: &FiberParams) -> Result<Self> {
        if !(t0_ps > 0.0) || !t0_ps.is_finite() {
            return Err(Error::Config(format!("time scale must be positive, got {t0_ps}")));
        }
        let beta2 = fiber.beta2_ps2_km.abs();
        Ok(Self {
            t0_ps,
            p0_w: beta2 / (fiber.gamma_per_w_km * t0_ps * t0_ps),
            dispersion_length_km: t0_ps * t0_ps / beta2,
        })
    }

    /// Time scale `T0` in ps.
    pub fn t0_ps(&self) -> f64 {
        self.t0_ps
    }

    /// Power scale `P0` in W.
    pub fn p0_w(&self) -> f64 {
        self.p0_w
    }

    /// Dispersion length `L_D = T0²/|β2|` in km.
    pub fn dispersion_length_km(&self) -> f64 {
        self.dispersion_length_km
    }

    /// Physical length of one normalized distance unit: `2 L_D` km.
    pub fn distance_unit_km(&self) -> f64 {
        2.0 * self.dispersion_length_km
    }

    pub fn normalized_distance(&self, z_km: f64) -> f64 {
        z_km / self.distance_unit_km()
    }
}

/// Pick the time scale so a frame carrying the design solitons meets a target
/// average launch power.
///
/// The normalized pulse energy is `4 Σ σ_k`, so in physical units
/// `E = 4 Σσ_k · P0 · T0 = 4 Σσ_k |β2| / (γ T0)`, and requiring
/// `E = P_avg · T_s` fixes `T0 = 4 Σσ_k |β2| / (γ P_avg T_s)`.
pub fn derive_time_scale(
    design: &SolitonSpec,
    target_avg_power_dbm: f64,
    interval_ps: f64,
    fiber: &FiberParams,
) -> Result<NormalizationScales> {
    let sigma_sum: f64 = design.entries().iter().map(|e| e.lambda.im).sum();
    if !(sigma_sum > 0.0) {
        return Err(Error::InvalidSpec(
            "design must contain at least one eigenvalue with positive imaginary part".into(),
        ));
    }
    if !target_avg_power_dbm.is_finite() {
        return Err(Error::Config(format!(
            "target average power must be finite, got {target_avg_power_dbm} dBm"
        )));
    }
    if !(interval_ps > 0.0) {
        return Err(Error::Config(format!(
            "frame interval must be positive, got {interval_ps} ps"
        )));
    }
    let p_avg_w = dbm_to_watts(target_avg_power_dbm);
    if !(p_avg_w > 0.0) {
        return Err(Error::Config("target average power must be positive".into()));
    }
    let t0 = 4.0 * sigma_sum * fiber.beta2_ps2_km.abs() / (fiber.gamma_per_w_km * p_avg_w * interval_ps);
    NormalizationScales::from_time_scale(t0, fiber)
}

/// Pulse energy: trapezoidal integral of `|q1|² + |q2|²` over the grid.
/// Physical envelopes yield pJ (√W amplitudes on a ps grid).
pub fn energy(env: &DualPolEnvelope) -> f64 {
    let n = env.grid.n_samples();
    if n == 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += w * env.power_at(i);
    }
    acc * env.grid.dt()
}

/// Average power over `interval_ps`, in dBm. Physical units only.
/// A zero field reports `-inf` dBm as a sentinel.
pub fn average_power_dbm(env: &DualPolEnvelope, interval_ps: f64) -> Result<f64> {
    env.require_units(UnitSystem::Physical)?;
    if !(interval_ps > 0.0) {
        return Err(Error::Config(format!(
            "interval must be positive, got {interval_ps} ps"
        )));
    }
    let e_pj = energy(env);
    Ok(watts_to_dbm(e_pj / interval_ps))
}

/// Peak-to-average power ratio in dB over the given interval (interval in the
/// grid's own time units).
pub fn papr_db(env: &DualPolEnvelope, interval: f64) -> Result<f64> {
    if !(interval > 0.0) {
        return Err(Error::Config(format!("interval must be positive, got {interval}")));
    }
    let peak = (0..env.grid.n_samples())
        .map(|i| env.power_at(i))
        .fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return Err(Error::InvalidEnvelope("PAPR of a zero field is undefined".into()));
    }
    let avg = energy(env) / interval;
    Ok(10.0 * (peak / avg).log10())
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// `-inf` is returned for zero power.
pub fn watts_to_dbm(watts: f64) -> f64 {
    if watts <= 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (watts / 1e-3).log10()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::darboux::SpectralLine;

    fn paper_fiber() -> FiberParams {
        FiberParams::paper_defaults()
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(TimeGrid::new(8192, 0.0, 0.0).is_err());
        assert!(TimeGrid::new(8191, 0.1, 0.0).is_err());
        assert!(TimeGrid::new(0, 0.1, 0.0).is_err());
        assert!(TimeGrid::new(8192, -0.5, 0.0).is_err());
    }

    #[test]
    fn grid_paper_window() {
        let g = TimeGrid::new(8192, 500.0 / 8192.0, -250.0).unwrap();
        assert!((g.span() - 500.0).abs() < 1e-12);
        assert!((g.time_at(0) + 250.0).abs() < 1e-12);
        // centered on zero up to half a sample
        let mid = g.time_at(4096);
        assert!(mid.abs() < g.dt() + 1e-12);
    }

    #[test]
    fn grid_minimal() {
        let g = TimeGrid::new(2, 1.0, 0.0).unwrap();
        assert_eq!(g.span(), 2.0);
    }

    #[test]
    fn energy_of_zero_field() {
        let g = TimeGrid::centered(64, 10.0).unwrap();
        let env = DualPolEnvelope::zeros(g, UnitSystem::Normalized);
        assert_eq!(energy(&env), 0.0);
    }

    #[test]
    fn constant_one_milliwatt_is_zero_dbm() {
        let g = TimeGrid::new(256, 2.0, -256.0).unwrap();
        let amp = Complex::new((1e-3f64).sqrt(), 0.0);
        let env = DualPolEnvelope::new(g, vec![amp; 256], vec![Complex::new(0.0, 0.0); 256], UnitSystem::Physical)
            .unwrap();
        // trapezoid loses half a sample at each edge; integrate over the grid span
        let p = average_power_dbm(&env, g.span() - g.dt()).unwrap();
        assert!(p.abs() < 1e-9, "got {p} dBm");
        let papr = papr_db(&env, g.span() - g.dt()).unwrap();
        assert!(papr.abs() < 1e-9, "got {papr} dB");
    }

    #[test]
    fn zero_field_power_is_neg_infinity() {
        let g = TimeGrid::centered(64, 500.0).unwrap();
        let env = DualPolEnvelope::zeros(g, UnitSystem::Physical);
        assert_eq!(average_power_dbm(&env, 500.0).unwrap(), f64::NEG_INFINITY);
        assert!(papr_db(&env, 500.0).is_err());
    }

    #[test]
    fn normalized_envelope_rejects_power_metric() {
        let g = TimeGrid::centered(64, 10.0).unwrap();
        let env = DualPolEnvelope::zeros(g, UnitSystem::Normalized);
        assert!(matches!(
            average_power_dbm(&env, 10.0),
            Err(Error::UnitMismatch { .. })
        ));
    }

    #[test]
    fn scales_identities() {
        let fiber = paper_fiber();
        let s = NormalizationScales::from_time_scale(51.0, &fiber).unwrap();
        let beta2 = fiber.beta2_ps2_km.abs();
        let p0 = beta2 / (fiber.gamma_per_w_km * 51.0 * 51.0);
        let ld = 51.0 * 51.0 / beta2;
        assert!((s.p0_w() - p0).abs() / p0 < 1e-12);
        assert!((s.dispersion_length_km() - ld).abs() / ld < 1e-12);
        assert!((s.distance_unit_km() - 2.0 * ld).abs() / ld < 1e-12);
    }

    #[test]
    fn derive_time_scale_paper_budget() {
        // closed-form oracle: T0 = 4 Σσ |β2| / (γ P T_s) with Σσ = 1.5,
        // P = 10^(-0.075) mW  =>  T0 = 51.2542 ps
        let design = SolitonSpec::new(vec![
            SpectralLine::new(Complex::new(0.0, 0.5), Complex::new(1.0, 0.0), Complex::new(1.0, 0.0)),
            SpectralLine::new(Complex::new(0.0, 1.0), Complex::new(1.0, 0.0), Complex::new(1.0, 0.0)),
        ])
        .unwrap();
        let s = derive_time_scale(&design, -0.75, 500.0, &paper_fiber()).unwrap();
        let p_w = 1e-3 * 10f64.powf(-0.075);
        let t0_oracle = 4.0 * 1.5 * 5.75 / (1.6 * p_w * 500.0);
        assert!((s.t0_ps() - t0_oracle).abs() < 1e-9);
        assert!((s.t0_ps() - 51.2542).abs() < 1e-3, "T0 = {}", s.t0_ps());

        // doubling the target power halves T0
        let s2 = derive_time_scale(&design, -0.75 + 10.0 * 2f64.log10(), 500.0, &paper_fiber()).unwrap();
        assert!((s2.t0_ps() - s.t0_ps() / 2.0).abs() < 1e-9);

        // single eigenvalue: T0 scales with Σσ
        let single = SolitonSpec::new(vec![SpectralLine::new(
            Complex::new(0.0, 0.5),
            Complex::new(1.0, 0.0),
            Complex::new(0.0, 0.0),
        )])
        .unwrap();
        let s1 = derive_time_scale(&single, -0.75, 500.0, &paper_fiber()).unwrap();
        assert!((s1.t0_ps() - s.t0_ps() / 3.0).abs() < 1e-9);
        assert!((s1.t0_ps() - 17.0847).abs() < 1e-3, "T0 = {}", s1.t0_ps());
    }

    #[test]
    fn unit_conversion_round_trip() {
        let fiber = paper_fiber();
        let scales = NormalizationScales::from_time_scale(51.25, &fiber).unwrap();
        let g = TimeGrid::centered(128, 500.0).unwrap();
        let mut env = DualPolEnvelope::zeros(g, UnitSystem::Physical);
        for i in 0..128 {
            let t = g.time_at(i) / 80.0;
            env.q1[i] = Complex::new((-t * t).exp() * 0.03, 0.01 * t.sin());
            env.q2[i] = Complex::new(0.02 * t.cos(), (-t.abs()).exp() * 0.01);
        }
        let back = env.to_normalized(&scales).unwrap().to_physical(&scales).unwrap();
        for i in 0..128 {
            let d1 = (back.q1[i] - env.q1[i]).norm();
            let d2 = (back.q2[i] - env.q2[i]).norm();
            let m = env.q1[i].norm().max(env.q2[i].norm()).max(1e-300);
            assert!(d1 / m < 1e-12 && d2 / m < 1e-12);
        }
        assert!((back.grid.dt() - env.grid.dt()).abs() / env.grid.dt() < 1e-12);
        assert!((back.grid.t0() - env.grid.t0()).abs() / env.grid.t0().abs() < 1e-12);

        // energy invariance: E_phys = E_norm * P0 * T0
        let e_phys = energy(&env);
        let e_norm = energy(&env.to_normalized(&scales).unwrap());
        let rescaled = e_norm * scales.p0_w() * scales.t0_ps();
        assert!((e_phys - rescaled).abs() / e_phys < 1e-10);
    }

    #[test]
    fn energy_polarization_swap_symmetry() {
        let g = TimeGrid::centered(64, 20.0).unwrap();
        let mut env = DualPolEnvelope::zeros(g, UnitSystem::Normalized);
        for i in 0..64 {
            env.q1[i] = Complex::new(i as f64 * 0.01, -(i as f64) * 0.003);
            env.q2[i] = Complex::new(0.5 - i as f64 * 0.02, 0.04);
        }
        let swapped = DualPolEnvelope::new(g, env.q2.clone(), env.q1.clone(), UnitSystem::Normalized).unwrap();
        assert!((energy(&env) - energy(&swapped)).abs() < 1e-14);
    }
}
