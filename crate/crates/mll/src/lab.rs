//! Experiment configuration, epsilon sweeps, slope fits and reports.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::algebra::C64;
use crate::error::{EvolveError, SpectralError, WkbError};
use crate::evolve::{diagnostics, evolve_profile_with, EvolveOptions};
use crate::profile::{ProfileFft, ProfileGrid};
use crate::spectral::{solve_phase, Phase, Sign};
use crate::wkb::{envelope_to_lab, initial_data, EnvelopeState, Line, NlsConfig, NlsSolver, Preparation, WkbModel};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("sweep failed: only {ok} of {total} eps points succeeded")]
    SweepFailed { ok: usize, total: usize },
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Wkb(#[from] WkbError),
    #[error("io: {0}")]
    Io(String),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            _ => 3,
        }
    }
}

impl From<SpectralError> for LabError {
    fn from(e: SpectralError) -> Self {
        LabError::Config(e.to_string())
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<crate::io::IoError> for LabError {
    fn from(e: crate::io::IoError) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

/// Either (omega, delta) or an explicit (omega, k) on the dispersion relation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpec {
    pub omega: f64,
    #[serde(default)]
    pub delta: Option<i32>,
    #[serde(default)]
    pub k: Option<f64>,
}

impl PhaseSpec {
    pub fn resolve(&self) -> Result<Phase, LabError> {
        match (self.delta, self.k) {
            (Some(_), Some(_)) => Err(LabError::Config("phase: give either delta or k, not both".into())),
            (None, Some(k)) => Ok(Phase::from_omega_k(self.omega, k)?),
            (d, None) => {
                let sign = match d.unwrap_or(1) {
                    1 => Sign::Plus,
                    -1 => Sign::Minus,
                    x => return Err(LabError::Config(format!("phase.delta must be +1 or -1, got {x}"))),
                };
                Ok(solve_phase(self.omega, sign)?)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Gaussian,
    Sech,
}

/// a0(y) = A exp(-(y - y0)^2 / sigma^2), or A sech((y - y0) / sigma).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSpec {
    pub shape: Shape,
    pub amplitude: f64,
    pub sigma: f64,
    /// Defaults to the middle of the domain.
    #[serde(default)]
    pub y0: Option<f64>,
}

impl EnvelopeSpec {
    pub fn sample(&self, line: &Line) -> Vec<C64> {
        let y0 = self.y0.unwrap_or(0.5 * line.ly);
        (0..line.n)
            .map(|j| {
                let s = (line.y(j) - y0) / self.sigma;
                let v = match self.shape {
                    Shape::Gaussian => (-s * s).exp(),
                    Shape::Sech => 1.0 / s.cosh(),
                };
                C64::new(self.amplitude * v, 0.0)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub p_max: usize,
    pub ny: usize,
    pub ly: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrepMode {
    Prepared,
    Matched,
    Unprepared,
}

impl PrepMode {
    pub fn preparation(self) -> Preparation {
        match self {
            PrepMode::Prepared => Preparation::Prepared,
            PrepMode::Matched => Preparation::Matched,
            PrepMode::Unprepared => Preparation::Unprepared,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub phase: PhaseSpec,
    pub envelope: EnvelopeSpec,
    pub eps_list: Vec<f64>,
    /// Diffractive horizon; runs end at t = T / eps.
    pub t_horizon: f64,
    /// When set, runs end at t = eps^(alpha - 1) |ln eps| instead.
    pub horizon_alpha: Option<f64>,
    pub preparation: PrepMode,
    pub grid: GridSpec,
    pub dt: f64,
    pub nls_dtau: f64,
    /// Largest slow time the NLS envelope is trusted to reach.
    pub nls_horizon: f64,
    pub tail_threshold: f64,
    pub blowup_bound: f64,
    pub snapshots: usize,
    /// Absolute tolerance of the WKB residual identity; rows above it are excluded from fits.
    pub residual_tol: f64,
    pub out: PathBuf,
    pub seed: u64,
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            phase: PhaseSpec {
                omega: 2.0,
                delta: Some(1),
                k: None,
            },
            envelope: EnvelopeSpec {
                shape: Shape::Gaussian,
                amplitude: 0.5,
                sigma: 4.0,
                y0: None,
            },
            eps_list: vec![0.08, 0.04, 0.02, 0.01],
            t_horizon: 0.5,
            horizon_alpha: None,
            preparation: PrepMode::Prepared,
            grid: GridSpec {
                p_max: 8,
                ny: 256,
                ly: 64.0,
            },
            dt: 5e-3,
            nls_dtau: 1e-3,
            nls_horizon: 2.0,
            tail_threshold: 1e-8,
            blowup_bound: 100.0,
            snapshots: 64,
            residual_tol: 1e-9,
            out: PathBuf::from("out"),
            seed: 0,
            record_timing: true,
        }
    }
}

fn parse_scalar(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Apply `key.sub=value` overrides to a JSON document.
pub fn apply_overrides(mut doc: Value, sets: &[String]) -> Result<Value, LabError> {
    for s in sets {
        let (key, raw) = s
            .split_once('=')
            .ok_or_else(|| LabError::Config(format!("--set expects key=value, got `{s}`")))?;
        let mut cur = &mut doc;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = cur
                .as_object_mut()
                .ok_or_else(|| LabError::Config(format!("--set {key}: `{part}` is not inside an object")))?;
            if i + 1 == parts.len() {
                obj.insert(part.to_string(), parse_scalar(raw));
                break;
            }
            cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
        }
    }
    Ok(doc)
}

impl ExperimentConfig {
    pub fn from_value(v: Value) -> Result<Self, LabError> {
        let cfg: ExperimentConfig = serde_json::from_value(v).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults, then the optional JSON file, then the overrides.
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Self, LabError> {
        let mut doc = serde_json::to_value(ExperimentConfig::default()).expect("serializable");
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| LabError::Config(format!("{}: {e}", p.display())))?;
            let file: Value = serde_json::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", p.display())))?;
            merge(&mut doc, file);
        }
        Self::from_value(apply_overrides(doc, sets)?)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |m: String| Err(LabError::Config(m));
        if self.eps_list.is_empty() {
            return bad("eps_list is empty".into());
        }
        for &e in &self.eps_list {
            if !(e > 0.0 && e < 1.0) {
                return bad(format!("eps_list: {e} is not in (0, 1)"));
            }
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return bad("eps_list must be strictly decreasing".into());
        }
        if !(self.t_horizon > 0.0) {
            return bad("t_horizon must be positive".into());
        }
        if self.t_horizon >= self.nls_horizon {
            return bad(format!(
                "t_horizon {} must stay below the NLS horizon guard {}",
                self.t_horizon, self.nls_horizon
            ));
        }
        if let Some(a) = self.horizon_alpha {
            if !(a > 0.0 && a < 1.0) {
                return bad(format!("horizon_alpha {a} must lie in (0, 1)"));
            }
        }
        if self.grid.ny < 8 || self.grid.p_max < 2 || !(self.grid.ly > 0.0) {
            return bad("grid needs ny >= 8, p_max >= 2 and ly > 0".into());
        }
        if !(self.dt > 0.0) || !(self.nls_dtau > 0.0) {
            return bad("dt and nls_dtau must be positive".into());
        }
        if !(self.envelope.sigma > 0.0) {
            return bad("envelope.sigma must be positive".into());
        }
        self.phase.resolve()?;
        let line = Line::new(self.grid.ny, self.grid.ly);
        let a0 = self.envelope.sample(&line);
        let edge = a0[0].norm().max(a0[line.n - 1].norm());
        if edge > 1e-12 * self.envelope.amplitude.abs().max(1e-300) {
            return bad(format!("envelope does not decay at the cell boundary (|a0| = {edge:e})"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, output directory excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        let text = serde_json::to_string(&c).expect("serializable");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn grid(&self) -> ProfileGrid {
        ProfileGrid::new(self.grid.p_max, self.grid.ny, self.grid.ly)
    }

    pub fn t_end(&self, eps: f64) -> f64 {
        match self.horizon_alpha {
            Some(a) => eps.powf(a - 1.0) * eps.ln().abs(),
            None => self.t_horizon / eps,
        }
    }

    pub fn evolve_options(&self) -> EvolveOptions {
        EvolveOptions {
            snapshots: self.snapshots,
            tail_threshold: self.tail_threshold,
            blowup_bound: self.blowup_bound,
            linear_only: false,
            max_dt: self.dt.max(0.05),
        }
    }

    pub fn nls_config(&self) -> NlsConfig {
        NlsConfig {
            max_step: self.nls_dtau,
            horizon_factor: 10.0,
        }
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub err_pi0_inf: f64,
    pub err_pis_inf: f64,
    pub res_pi0: f64,
    pub res_pis: f64,
    pub wall_s: f64,
    #[serde(skip)]
    pub valid: bool,
    #[serde(skip)]
    pub identity_defect: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedPoint {
    pub eps: f64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub pi0: Fit,
    pub pis: Fit,
    pub mode: PrepMode,
    pub config_hash: String,
    /// eps values whose residual identity check failed.
    pub excluded: Vec<f64>,
    pub failed: Vec<FailedPoint>,
}

/// Least squares on (ln eps, ln err); half width is twice the slope's standard error.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<Fit, LabError> {
    if points.len() < 3 {
        return Err(LabError::DegenerateFit(format!("{} points, need at least 3", points.len())));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0) || !(p.0 > 0.0)) {
        return Err(LabError::DegenerateFit(format!("non-positive value at eps = {}", p.0)));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(LabError::DegenerateFit("all eps equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let se = (sse / (n - 2.0) / sxx).sqrt();
    Ok(Fit {
        slope,
        intercept,
        half_width: 2.0 * se,
    })
}

/// One eps point: exact run against the WKB trajectory, sup errors over snapshots.
pub fn run_point(cfg: &ExperimentConfig, eps: f64) -> Result<SweepRow, LabError> {
    let start = Instant::now();
    let phase = cfg.phase.resolve()?;
    let model = WkbModel::new(&phase)?;
    let grid = cfg.grid();
    let fft = ProfileFft::new(grid);
    let line = Line::new(grid.ny, grid.ly);
    let a0 = cfg.envelope.sample(&line);
    let mode = cfg.preparation.preparation();
    let data = initial_data(&a0, &mode, eps, &model, &fft)?;

    let full = data.wkb.full_residual(&fft);
    let pred = data.wkb.predicted_residual(&fft);
    let cascade = data.wkb.cascade_residuals(&fft);
    let defect = fft
        .sup_norm(&full.sub(&pred))
        .max(cascade.iter().cloned().fold(0.0, f64::max));
    let res_pi0 = fft.sup_norm(&full.pi0());
    let res_pis = fft.sup_norm(&full.pis());

    let rho = model.coeffs.rho;
    let nls = NlsSolver::new(line.clone(), model.nls(), cfg.nls_config(), &EnvelopeState { g1: a0.clone(), tau: 0.0 });
    let mut env = EnvelopeState { g1: a0, tau: 0.0 };
    let (mut e0, mut es) = (0.0f64, 0.0f64);
    let mut wkb_err: Option<WkbError> = None;
    evolve_profile_with(&data.exact, cfg.t_end(eps), cfg.dt, &phase, &cfg.evolve_options(), |snap| {
        let step = nls
            .advance_to(&env, eps * snap.t, cfg.nls_dtau)
            .and_then(|next| {
                env = next;
                let g = envelope_to_lab(&env, snap.t, rho, &line);
                model.assemble(&g, &fft, eps)
            });
        match step {
            Ok(w) => {
                let d = diagnostics(&fft, &snap.profile.sub(&w.total()), snap.t);
                e0 = e0.max(d.linf_pi0);
                es = es.max(d.linf_pis);
                Ok(())
            }
            Err(e) => {
                wkb_err = Some(e);
                Err(EvolveError::Blowup {
                    t: snap.t,
                    sup: f64::NAN,
                    bound: cfg.blowup_bound,
                })
            }
        }
    })
    .map_err(|e| match wkb_err.take() {
        Some(w) => LabError::Wkb(w),
        None => LabError::Evolve(e),
    })?;
    Ok(SweepRow {
        eps,
        err_pi0_inf: e0,
        err_pis_inf: es,
        res_pi0,
        res_pis,
        wall_s: if cfg.record_timing {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        },
        valid: defect <= cfg.residual_tol,
        identity_defect: defect,
    })
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult, LabError> {
    cfg.validate()?;
    let results: Vec<Result<SweepRow, LabError>> = cfg.eps_list.par_iter().map(|&e| run_point(cfg, e)).collect();
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for (eps, r) in cfg.eps_list.iter().zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failed.push(FailedPoint {
                eps: *eps,
                error: e.to_string(),
            }),
        }
    }
    let good: Vec<&SweepRow> = rows.iter().filter(|r| r.valid).collect();
    let excluded = rows.iter().filter(|r| !r.valid).map(|r| r.eps).collect();
    if good.len() < 3 {
        return Err(LabError::SweepFailed {
            ok: good.len(),
            total: cfg.eps_list.len(),
        });
    }
    let pi0 = fit_slope(&good.iter().map(|r| (r.eps, r.err_pi0_inf)).collect::<Vec<_>>())?;
    let pis = fit_slope(&good.iter().map(|r| (r.eps, r.err_pis_inf)).collect::<Vec<_>>())?;
    Ok(SweepResult {
        rows,
        pi0,
        pis,
        mode: cfg.preparation,
        config_hash: cfg.hash(),
        excluded,
        failed,
    })
}

pub fn write_sweep_csv<W: std::io::Write>(w: W, rows: &[SweepRow]) -> Result<(), LabError> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["eps", "err_pi0_inf", "err_pis_inf", "res_pi0", "res_pis", "wall_s"])?;
    for r in rows {
        c.write_record(
            [r.eps, r.err_pi0_inf, r.err_pis_inf, r.res_pi0, r.res_pis, r.wall_s]
                .iter()
                .map(|x| format!("{x:.17e}")),
        )?;
    }
    c.flush().map_err(LabError::from)
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>, LabError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        let mut row: SweepRow = rec?;
        row.valid = true;
        rows.push(row);
    }
    Ok(rows)
}

/// slopes.json content.
pub fn slopes_json(res: &SweepResult) -> Value {
    serde_json::json!({
        "pi0": {"slope": res.pi0.slope, "half_width": res.pi0.half_width},
        "pis": {"slope": res.pis.slope, "half_width": res.pis.half_width},
        "mode": res.mode,
        "config_hash": res.config_hash,
        "excluded": res.excluded,
        "failed": res.failed,
    })
}

pub fn write_sweep(dir: &Path, res: &SweepResult) -> Result<(), LabError> {
    std::fs::create_dir_all(dir)?;
    write_sweep_csv(std::fs::File::create(dir.join("sweep.csv"))?, &res.rows)?;
    let text = serde_json::to_string_pretty(&slopes_json(res)).expect("json");
    std::fs::write(dir.join("slopes.json"), text + "\n")?;
    Ok(())
}

/// Markdown summary of a sweep.csv, with fitted slopes recomputed from the rows.
pub fn render_report(rows: &[SweepRow]) -> String {
    let mut s = String::from("| eps | err_pi0_inf | err_pis_inf | res_pi0 | res_pis | wall_s |\n|---|---|---|---|---|---|\n");
    for r in rows {
        s += &format!(
            "| {} | {:.3e} | {:.3e} | {:.3e} | {:.3e} | {:.1} |\n",
            r.eps, r.err_pi0_inf, r.err_pis_inf, r.res_pi0, r.res_pis, r.wall_s
        );
    }
    let fit = |f: fn(&SweepRow) -> f64, name: &str| match fit_slope(&rows.iter().map(|r| (r.eps, f(r))).collect::<Vec<_>>()) {
        Ok(fit) => format!("\n{name} slope: {:.3} +- {:.3}", fit.slope, fit.half_width),
        Err(e) => format!("\n{name} slope: n/a ({e})"),
    };
    s += &fit(|r| r.err_pi0_inf, "Pi0 error");
    s += &fit(|r| r.err_pis_inf, "Pis error");
    s += &fit(|r| r.res_pi0, "Pi0 residual");
    s += &fit(|r| r.res_pis, "Pis residual");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [0.08, 0.04, 0.02, 0.01].iter().map(|&e| (e, e * e)).collect();
        let f = fit_slope(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && f.half_width < 1e-12);
        let pts: Vec<(f64, f64)> = [0.08, 0.04, 0.02].iter().map(|&e| (e, 3.0 * e)).collect();
        let f = fit_slope(&pts).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn noisy_fit_covers_truth() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<(f64, f64)> = (0..12)
            .map(|i| {
                let e = 0.1 * 0.8f64.powi(i);
                (e, e * e * (1.0 + 0.05 * rng.gen_range(-1.0..1.0)))
            })
            .collect();
        let f = fit_slope(&pts).unwrap();
        assert!((f.slope - 2.0).abs() <= f.half_width, "{f:?}");
    }

    #[test]
    fn degenerate_fit() {
        assert!(matches!(fit_slope(&[(0.1, 1.0), (0.1, 2.0), (0.1, 3.0)]), Err(LabError::DegenerateFit(_))));
        assert!(matches!(fit_slope(&[(0.1, 1.0), (0.05, 2.0)]), Err(LabError::DegenerateFit(_))));
    }

    #[test]
    fn overrides_and_validation() {
        let c = ExperimentConfig::load(None, &["grid.ny=64".into(), "preparation=unprepared".into()]).unwrap();
        assert_eq!(c.grid.ny, 64);
        assert_eq!(c.preparation, PrepMode::Unprepared);
        let e = ExperimentConfig::load(None, &["eps_list=[0.01,0.02,0.04]".into()]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = ExperimentConfig::load(None, &["eps_list=[0.5,1.5]".into()]).unwrap_err();
        assert!(e.to_string().contains("(0, 1)"));
        let e = ExperimentConfig::load(None, &["t_horizon=5".into()]).unwrap_err();
        assert!(e.to_string().contains("horizon"));
        assert!(ExperimentConfig::load(None, &["bogus=1".into()]).is_err());
        assert!(ExperimentConfig::load(None, &["phase.delta=3".into()]).is_err());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.out = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.dt = 1e-3;
        assert_ne!(a.hash(), b.hash());
    }
}
