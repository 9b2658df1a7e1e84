//! Experiment configuration, Monte Carlo orchestration, statistics and
//! CSV reporting.
//!
//! A run draws one random QPSK frame per realization, synthesizes the
//! 2-soliton, propagates it through the noisy link, analyzes the spectrum at
//! every probe distance and decodes all estimators. Seeding is counter-based:
//! realization `i` derives its child seed from the master seed alone, so
//! results are bit-identical under any parallel schedule, and aggregation
//! runs in fixed realization order.

use crate::channel::{self, FiberParams, LinkConfig, SnrConvention};
use crate::darboux::{synthesize, SolitonSpec, SpectralLine};
use crate::error::{Error, Result};
use crate::modem::{
    self, decode_common, decode_common_component, decode_differential, wrap_phase, EigenTrace,
    EncoderMode, PolComponent, SymbolFrame, QPSK_PHASES,
};
use crate::nft::analyze;
use crate::signal::{derive_time_scale, NormalizationScales, TimeGrid};
use crate::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const CONFIG_VERSION: u32 = 1;
pub const STATS_SCHEMA_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub config_version: u32,
    pub fiber: FiberParams,
    pub link: LinkSettings,
    pub grid: GridSettings,
    pub design: DesignSettings,
    pub modulation: ModulationSettings,
    pub run: RunSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSettings {
    pub length_km: f64,
    pub step_km: f64,
    pub filter_bandwidth_ghz: f64,
    pub filter_spacing_km: f64,
    /// Probe every this many km (multiples up to the link length)...
    #[serde(default)]
    pub probe_spacing_km: Option<f64>,
    /// ...or give the distances explicitly (takes precedence).
    #[serde(default)]
    pub probe_distances_km: Option<Vec<f64>>,
    /// Read `N_ASE` as the total two-polarization PSD instead of per
    /// polarization.
    #[serde(default)]
    pub ase_total_psd: bool,
    /// SNR denominator over both polarizations instead of per polarization.
    #[serde(default)]
    pub snr_noise_total: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    pub n_samples: usize,
    pub frame_ps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSettings {
    /// Design eigenvalues as (re, im) pairs, normalized units.
    pub eigenvalues: Vec<(f64, f64)>,
    /// Per-eigenvalue coefficient magnitudes (|b1|, |b2|).
    pub b_magnitudes: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationSettings {
    pub mode: EncoderMode,
    pub target_power_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub n_realizations: usize,
    pub master_seed: u64,
    /// 0 = use the default thread pool size.
    #[serde(default)]
    pub threads: usize,
    /// Measure the received SNR on this many leading realizations. Each
    /// measurement re-propagates the frame noiselessly to build the
    /// reference, doubling that realization's cost.
    #[serde(default = "default_snr_realizations")]
    pub snr_realizations: usize,
}

fn default_snr_realizations() -> usize {
    50
}

impl ExperimentConfig {
    /// The reference setup: 2-solitons at λ = {0.5j, 1j} over 4350 km of
    /// Raman-amplified fiber, -0.75 dBm launch, 50 GHz inline filtering,
    /// probes every 435 km.
    pub fn paper_defaults() -> Self {
        Self {
            config_version: CONFIG_VERSION,
            fiber: FiberParams::paper_defaults(),
            link: LinkSettings {
                length_km: 4350.0,
                step_km: 0.1,
                filter_bandwidth_ghz: 50.0,
                filter_spacing_km: 50.0,
                probe_spacing_km: Some(435.0),
                probe_distances_km: None,
                ase_total_psd: false,
                snr_noise_total: false,
            },
            grid: GridSettings {
                n_samples: 8192,
                frame_ps: 500.0,
            },
            design: DesignSettings {
                eigenvalues: vec![(0.0, 0.5), (0.0, 1.0)],
                b_magnitudes: vec![(1.0, 1.0), (1.0, 1.0)],
            },
            modulation: ModulationSettings {
                mode: EncoderMode::Differential,
                target_power_dbm: -0.75,
            },
            run: RunSettings {
                n_realizations: 200,
                master_seed: 1,
                threads: 0,
                snr_realizations: 50,
            },
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(format!("cannot parse config: {e}")))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Validate and derive everything a run needs.
    pub fn prepare(&self) -> Result<Prepared> {
        if self.config_version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.config_version
            )));
        }
        if self.run.n_realizations < 1 {
            return Err(Error::Config("n_realizations must be at least 1".into()));
        }
        if self.design.eigenvalues.is_empty() || self.design.eigenvalues.len() != self.design.b_magnitudes.len() {
            return Err(Error::Config(
                "design eigenvalues and b_magnitudes must be non-empty and equal length".into(),
            ));
        }
        let eigenvalues: Vec<Complex> = self.design.eigenvalues.iter().map(|&(re, im)| Complex::new(re, im)).collect();
        for m in &self.design.b_magnitudes {
            if !(m.0 >= 0.0 && m.1 >= 0.0) || m.0 + m.1 <= 0.0 {
                return Err(Error::Config("coefficient magnitudes must be non-negative, not both zero".into()));
            }
        }

        // design spec template (phases zero) for the time-scale budget
        let template = SolitonSpec::new(
            eigenvalues
                .iter()
                .zip(&self.design.b_magnitudes)
                .map(|(&l, &(m1, m2))| SpectralLine::new(l, Complex::new(m1, 0.0), Complex::new(m2, 0.0)))
                .collect(),
        )?;
        let scales = derive_time_scale(&template, self.modulation.target_power_dbm, self.grid.frame_ps, &self.fiber)?;
        let grid_ps = TimeGrid::centered(self.grid.n_samples, self.grid.frame_ps)?;
        let norm_grid = TimeGrid::new(
            self.grid.n_samples,
            grid_ps.dt() / scales.t0_ps(),
            grid_ps.t0() / scales.t0_ps(),
        )?;

        let probes = match (&self.link.probe_distances_km, self.link.probe_spacing_km) {
            (Some(list), _) => list.clone(),
            (None, Some(spacing)) => {
                if !(spacing > 0.0) {
                    return Err(Error::Config("probe spacing must be positive".into()));
                }
                let n = (self.link.length_km / spacing).round() as usize;
                (1..=n).map(|i| i as f64 * spacing).collect()
            }
            (None, None) => vec![self.link.length_km],
        };
        if probes.is_empty() {
            return Err(Error::Config("at least one probe distance is required".into()));
        }

        let link = LinkConfig {
            fiber: self.fiber,
            length_km: self.link.length_km,
            step_km: self.link.step_km,
            filter_bandwidth_ghz: self.link.filter_bandwidth_ghz,
            filter_spacing_km: self.link.filter_spacing_km,
            probe_distances_km: probes.clone(),
            noise_seed: 0,
            ase_total: self.link.ase_total_psd,
        };
        link.validate()?;
        let max_sigma = eigenvalues.iter().map(|l| l.im).fold(0.0, f64::max);
        link.validate_signal_guard(max_sigma, &scales)?;

        Ok(Prepared {
            scales,
            norm_grid,
            eigenvalues,
            magnitudes: self.design.b_magnitudes.clone(),
            probes_km: probes,
            link,
            snr_convention: if self.link.snr_noise_total {
                SnrConvention::TotalNoise
            } else {
                SnrConvention::PerPolarization
            },
        })
    }
}

/// Everything derived from a validated config.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scales: NormalizationScales,
    pub norm_grid: TimeGrid,
    pub eigenvalues: Vec<Complex>,
    pub magnitudes: Vec<(f64, f64)>,
    pub probes_km: Vec<f64>,
    pub link: LinkConfig,
    pub snr_convention: SnrConvention,
}

// ---------------------------------------------------------------------------
// seeding
// ---------------------------------------------------------------------------

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Counter-based child-seed derivation: depends only on the master seed and
/// the realization index.
pub fn child_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ index.wrapping_add(1).wrapping_mul(0x9E3779B97F4A7C15))
}

// ---------------------------------------------------------------------------
// estimators and statistics
// ---------------------------------------------------------------------------

/// The reported phase estimators. `arg_b1` coincides with `phi_c` by
/// construction (the common-phase estimate *is* the back-rotated `arg b̂1`);
/// both columns are emitted. `phi_c_trace` is the validation estimator that
/// back-rotates with the trapezoid over all probed eigenvalues, which a real
/// receiver cannot do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    PhiD,
    PhiC,
    ArgB1,
    ArgB2,
    PhiCTrace,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::PhiD,
        Estimator::PhiC,
        Estimator::ArgB1,
        Estimator::ArgB2,
        Estimator::PhiCTrace,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::PhiD => "phi_d",
            Estimator::PhiC => "phi_c",
            Estimator::ArgB1 => "arg_b1",
            Estimator::ArgB2 => "arg_b2",
            Estimator::PhiCTrace => "phi_c_trace",
        }
    }
}

/// One decoded constellation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub re: f64,
    pub im: f64,
    pub tx_phase: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CellStats {
    pub points: Vec<PointRecord>,
    pub circular_std_rad: f64,
    pub n_included: usize,
    /// Hard-decision errors (only counted where the transmitted phase is a
    /// constellation point).
    pub symbol_errors: usize,
    pub symbol_decisions: usize,
}

/// Aggregated Monte Carlo results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunStats {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub probes_km: Vec<f64>,
    pub child_seeds: Vec<u64>,
    /// Flattened `[probe][eigenvalue][estimator]`.
    pub cells: Vec<CellStats>,
    /// SNR at the final probe, one entry per realization (`None` where not
    /// measured).
    pub snr_db: Vec<Option<f64>>,
    /// Per-realization eigenvalue traces: `[realization][eigenvalue]` →
    /// list of (z_km, Re λ̂, Im λ̂).
    pub eigen_traces: Vec<Vec<Vec<(f64, f64, f64)>>>,
    pub excluded_slots: usize,
    pub total_slots: usize,
}

impl RunStats {
    fn cell_index(&self, probe: usize, eigen: usize, est: Estimator) -> usize {
        let k = self.config.design.eigenvalues.len();
        let e = Estimator::ALL.iter().position(|x| *x == est).unwrap();
        (probe * k + eigen) * Estimator::ALL.len() + e
    }

    pub fn cell(&self, probe: usize, eigen: usize, est: Estimator) -> &CellStats {
        &self.cells[self.cell_index(probe, eigen, est)]
    }

    pub fn exclusion_rate(&self) -> f64 {
        if self.total_slots == 0 {
            0.0
        } else {
            self.excluded_slots as f64 / self.total_slots as f64
        }
    }

    pub fn n_realizations(&self) -> usize {
        self.child_seeds.len()
    }
}

/// Circular standard deviation: `sqrt(mean of wrapped squared errors)`.
pub fn circular_std(wrapped_errors: &[f64]) -> f64 {
    if wrapped_errors.is_empty() {
        return 0.0;
    }
    let mean_sq = wrapped_errors.iter().map(|e| e * e).sum::<f64>() / wrapped_errors.len() as f64;
    mean_sq.sqrt()
}

// ---------------------------------------------------------------------------
// the Monte Carlo itself
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct EstValues {
    phi_d: f64,
    phi_c: f64,
    arg_b2: f64,
    phi_c_trace: f64,
}

#[derive(Debug, Clone)]
struct RealizationRecord {
    frame: SymbolFrame,
    /// `[probe][eigenvalue]`.
    decoded: Vec<Vec<Option<EstValues>>>,
    snr_db: Option<f64>,
    traces: Vec<Vec<(f64, f64, f64)>>,
}

fn realize(index: u64, cfg: &ExperimentConfig, prep: &Prepared) -> Result<RealizationRecord> {
    let seed = child_seed(cfg.run.master_seed, index);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let frame = SymbolFrame::random(cfg.modulation.mode, prep.eigenvalues.len(), &mut rng);
    let noise_seed: u64 = rng.gen();

    let spec = modem::encode_frame(&frame, &prep.eigenvalues, &prep.magnitudes)?;
    let launch = synthesize(&spec, &prep.norm_grid)?.envelope.to_physical(&prep.scales)?;
    let mut link = prep.link.clone();
    link.noise_seed = noise_seed;
    let probes = channel::propagate(&launch, &link, &prep.scales)?;

    // the SNR reference is the noiseless propagation of the same frame
    // through the same link (filters included): the residual is pure ASE
    let snr_reference = if (index as usize) < cfg.run.snr_realizations {
        let mut quiet = prep.link.clone();
        quiet.fiber.n_sp = 0.0;
        quiet.probe_distances_km = vec![*prep.probes_km.last().unwrap()];
        Some(channel::propagate(&launch, &quiet, &prep.scales)?.remove(0).1)
    } else {
        None
    };

    let k_count = prep.eigenvalues.len();
    let mut traces: Vec<Vec<(f64, Complex)>> = prep.eigenvalues.iter().map(|&l| vec![(0.0, l)]).collect();
    let mut decoded = Vec::with_capacity(probes.len());
    let mut snr_db = None;
    for (pi, (z_km, env_phys)) in probes.iter().enumerate() {
        let env_norm = env_phys.to_normalized(&prep.scales)?;
        let est = analyze(&env_norm, &spec, *z_km)?;
        let l_norm = prep.scales.normalized_distance(*z_km);
        let phi_d = decode_differential(&est);
        let phi_c = decode_common(&est, &spec, l_norm);
        let arg_b2 = decode_common_component(&est, &spec, l_norm, PolComponent::B2);
        let mut per_k = Vec::with_capacity(k_count);
        for k in 0..k_count {
            match &est.points[k] {
                Ok(r) => {
                    traces[k].push((l_norm, r.lambda));
                    let trace = EigenTrace::new(traces[k].clone())?;
                    let rotated = modem::trace_backrotation(r.b1, &trace);
                    per_k.push(Some(EstValues {
                        phi_d: phi_d[k].unwrap(),
                        phi_c: phi_c[k].unwrap(),
                        arg_b2: arg_b2[k].unwrap(),
                        phi_c_trace: rotated.arg(),
                    }));
                }
                Err(_) => per_k.push(None),
            }
        }
        decoded.push(per_k);

        if pi == probes.len() - 1 {
            if let Some(reference) = &snr_reference {
                snr_db = Some(channel::measure_snr(
                    env_phys,
                    reference,
                    link.filter_bandwidth_ghz,
                    prep.snr_convention,
                )?);
            }
        }
    }
    let traces_out = traces
        .into_iter()
        .map(|t| {
            t.into_iter()
                .map(|(z, l)| (z * prep.scales.distance_unit_km(), l.re, l.im))
                .collect()
        })
        .collect();
    Ok(RealizationRecord {
        frame,
        decoded,
        snr_db,
        traces: traces_out,
    })
}

#[cfg(feature = "parallel")]
fn run_realizations(cfg: &ExperimentConfig, prep: &Prepared) -> Result<Vec<RealizationRecord>> {
    use rayon::prelude::*;
    let n = cfg.run.n_realizations as u64;
    let work = || (0..n).into_par_iter().map(|i| realize(i, cfg, prep)).collect::<Result<Vec<_>>>();
    match cfg.run.threads {
        0 => work(),
        1 => (0..n).map(|i| realize(i, cfg, prep)).collect(),
        t => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?
            .install(work),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_realizations(cfg: &ExperimentConfig, prep: &Prepared) -> Result<Vec<RealizationRecord>> {
    (0..cfg.run.n_realizations as u64).map(|i| realize(i, cfg, prep)).collect()
}

/// Run the full Monte Carlo described by `config`. Deterministic for a fixed
/// master seed, independent of the thread count.
pub fn run_montecarlo(config: &ExperimentConfig) -> Result<RunStats> {
    let prep = config.prepare()?;
    let records = run_realizations(config, &prep)?;

    let k_count = prep.eigenvalues.len();
    let n_probes = prep.probes_km.len();
    let n_cells = n_probes * k_count * Estimator::ALL.len();
    let mut stats = RunStats {
        schema_version: STATS_SCHEMA_VERSION,
        config: config.clone(),
        probes_km: prep.probes_km.clone(),
        child_seeds: (0..config.run.n_realizations as u64)
            .map(|i| child_seed(config.run.master_seed, i))
            .collect(),
        cells: vec![CellStats::default(); n_cells],
        snr_db: Vec::with_capacity(records.len()),
        eigen_traces: Vec::with_capacity(records.len()),
        excluded_slots: 0,
        total_slots: records.len() * n_probes * k_count,
    };

    let mut sq_sums = vec![[0.0f64; 5]; n_cells / Estimator::ALL.len()];
    for rec in &records {
        stats.snr_db.push(rec.snr_db);
        stats.eigen_traces.push(rec.traces.clone());
        for (pi, per_k) in rec.decoded.iter().enumerate() {
            for (k, slot) in per_k.iter().enumerate() {
                let Some(v) = slot else {
                    stats.excluded_slots += 1;
                    continue;
                };
                let tx = rec.frame.symbols()[k];
                let values = [
                    (Estimator::PhiD, v.phi_d, tx.phi_d),
                    (Estimator::PhiC, v.phi_c, tx.phi_c),
                    (Estimator::ArgB1, v.phi_c, tx.phi_c),
                    (Estimator::ArgB2, v.arg_b2, wrap_phase(tx.phi_c + tx.phi_d)),
                    (Estimator::PhiCTrace, v.phi_c_trace, tx.phi_c),
                ];
                for (est, phi_hat, tx_phase) in values {
                    let idx = stats.cell_index(pi, k, est);
                    let err = wrap_phase(phi_hat - tx_phase);
                    sq_sums[idx / Estimator::ALL.len()]
                        [Estimator::ALL.iter().position(|x| *x == est).unwrap()] += err * err;
                    let cell = &mut stats.cells[idx];
                    cell.points.push(PointRecord {
                        re: phi_hat.cos(),
                        im: phi_hat.sin(),
                        tx_phase,
                    });
                    cell.n_included += 1;
                    // hard decisions only where the target is a constellation point
                    if QPSK_PHASES.iter().any(|&c| wrap_phase(tx_phase - c).abs() < 1e-9) {
                        let decision = modem::hard_decide(phi_hat, tx_phase)?;
                        let tx_index = QPSK_PHASES
                            .iter()
                            .enumerate()
                            .min_by(|(_, a), (_, b)| {
                                wrap_phase(tx_phase - **a)
                                    .abs()
                                    .partial_cmp(&wrap_phase(tx_phase - **b).abs())
                                    .unwrap()
                            })
                            .map(|(i, _)| i)
                            .unwrap();
                        cell.symbol_decisions += 1;
                        if decision.index != tx_index {
                            cell.symbol_errors += 1;
                        }
                    }
                }
            }
        }
    }
    for (idx, cell) in stats.cells.iter_mut().enumerate() {
        if cell.n_included > 0 {
            let sq = sq_sums[idx / Estimator::ALL.len()][idx % Estimator::ALL.len()];
            cell.circular_std_rad = (sq / cell.n_included as f64).sqrt();
        }
    }
    Ok(stats)
}

// ---------------------------------------------------------------------------
// reporting
// ---------------------------------------------------------------------------

pub fn save_stats<P: AsRef<Path>>(stats: &RunStats, path: P) -> Result<()> {
    let f = std::fs::File::create(path)?;
    serde_json::to_writer(std::io::BufWriter::new(f), stats)
        .map_err(|e| Error::Config(format!("cannot write stats: {e}")))
}

pub fn load_stats<P: AsRef<Path>>(path: P) -> Result<RunStats> {
    let f = std::fs::File::open(path)?;
    serde_json::from_reader(std::io::BufReader::new(f))
        .map_err(|e| Error::Config(format!("cannot read stats: {e}")))
}

#[derive(Debug, Clone)]
pub struct ReportPaths {
    pub constellation_csv: PathBuf,
    pub stddev_csv: PathBuf,
    pub manifest_json: PathBuf,
}

/// Write the constellation CSV, the std-dev CSV and the run manifest.
pub fn report<P: AsRef<Path>>(stats: &RunStats, out_dir: P) -> Result<ReportPaths> {
    if stats.cells.iter().all(|c| c.n_included == 0) {
        return Err(Error::Config("nothing to report: statistics are empty".into()));
    }
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let k_count = stats.config.design.eigenvalues.len();

    let constellation = dir.join("constellation.csv");
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(&constellation)?);
        writeln!(w, "distance_km,eigenvalue_index,estimator,re,im,tx_phase")?;
        for (pi, &z) in stats.probes_km.iter().enumerate() {
            for k in 0..k_count {
                for est in Estimator::ALL {
                    for p in &stats.cell(pi, k, est).points {
                        writeln!(w, "{z},{k},{},{},{},{}", est.name(), p.re, p.im, p.tx_phase)?;
                    }
                }
            }
        }
    }

    let stddev = dir.join("stddev.csv");
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(&stddev)?);
        writeln!(w, "distance_km,eigenvalue_index,estimator,circular_std_rad,n_included")?;
        for (pi, &z) in stats.probes_km.iter().enumerate() {
            for k in 0..k_count {
                for est in Estimator::ALL {
                    let c = stats.cell(pi, k, est);
                    writeln!(w, "{z},{k},{},{},{}", est.name(), c.circular_std_rad, c.n_included)?;
                }
            }
        }
    }

    let manifest = dir.join("manifest.json");
    {
        #[derive(Serialize)]
        struct Manifest<'a> {
            schema_version: u32,
            crate_version: &'static str,
            config: &'a ExperimentConfig,
            child_seeds: &'a [u64],
            probes_km: &'a [f64],
            n_realizations: usize,
            exclusion_rate: f64,
            mean_snr_db: f64,
        }
        let finite: Vec<f64> = stats.snr_db.iter().flatten().copied().filter(|s| s.is_finite()).collect();
        let mean_snr = if finite.is_empty() {
            f64::NAN
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        let m = Manifest {
            schema_version: STATS_SCHEMA_VERSION,
            crate_version: env!("CARGO_PKG_VERSION"),
            config: &stats.config,
            child_seeds: &stats.child_seeds,
            probes_km: &stats.probes_km,
            n_realizations: stats.n_realizations(),
            exclusion_rate: stats.exclusion_rate(),
            mean_snr_db: mean_snr,
        };
        let f = std::fs::File::create(&manifest)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), &m)
            .map_err(|e| Error::Config(format!("cannot write manifest: {e}")))?;
    }

    Ok(ReportPaths {
        constellation_csv: constellation,
        stddev_csv: stddev,
        manifest_json: manifest,
    })
}
