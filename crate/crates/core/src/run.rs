//! Batch driver behind the `hornlab` binary.
//!
//! A run reads one JSON configuration, applies `key=value` overrides to its leaves,
//! executes a command pipeline and writes CSV/JSON artifacts plus `manifest.json`.
//! The manifest is written on every exit path; its `stage` names where a failed run
//! stopped.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::elliptic::{check_i_lower, check_log_i_identity, check_u_growth, elliptic_scan, ModeState};
use crate::error::{HornError, Result};
use crate::frequency::{make_grid, EllipticReport, FitSummary, FrequencyScan, ParabolicReport, Spacing};
use crate::geometry::{sphere_eigenvalue, HornParams};
use crate::modes::{decay_exponent_fit, normalization_bound, profile_from_k2, RadialProfile};
use crate::numerics::LineFit;
use crate::output::{write_json, Cell, CsvTable};
use crate::parabolic::{check_d_lower, check_id_relation, check_n_bound, parabolic_scan_with, CaloricField, UnitField};
use crate::spectral::{
    analyticity_probe, caloric_decay_check, caloric_table, dirichlet_eigenvalues_with, eigen_table, weyl_check,
    evaluate_caloric, CaloricSeries, EigenOptions, EigenPair,
};

/// Identity defects and one-sided shortfalls above these fail a run with exit code 4.
pub const LOG_I_IDENTITY_LIMIT: f64 = 1e-3;
pub const ID_RELATION_LIMIT: f64 = 1e-4;
pub const GROWTH_SHORTFALL_LIMIT: f64 = 1e-6;
/// Largest fit residual, as a fraction of the fitted range, for lower-bound and decay fits.
pub const FIT_RESIDUAL_LIMIT: f64 = 0.1;
pub const PROFILE_FIT_RESIDUAL_LIMIT: f64 = 0.05;
/// Largest spread `(max - min)/|mean|` of caloric decay slopes across the time list.
pub const DECAY_SLOPE_SPREAD_LIMIT: f64 = 0.15;

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "HORNLAB_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Command {
    Modes,
    Eigs,
    FreqElliptic,
    FreqParabolic,
    Heat,
    Analyticity,
    DemoCounterexample,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Modes,
        Command::Eigs,
        Command::FreqElliptic,
        Command::FreqParabolic,
        Command::Heat,
        Command::Analyticity,
        Command::DemoCounterexample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Modes => "modes",
            Command::Eigs => "eigs",
            Command::FreqElliptic => "freq-elliptic",
            Command::FreqParabolic => "freq-parabolic",
            Command::Heat => "heat",
            Command::Analyticity => "analyticity",
            Command::DemoCounterexample => "demo-counterexample",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = HornError;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| HornError::Config(format!("unknown command {s:?}")))
    }
}

/// `points` values from `lo` to `hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
}

fn default_spacing() -> Spacing {
    Spacing::Log
}

impl GridSpec {
    pub fn log(lo: f64, hi: f64, points: usize) -> Self {
        GridSpec { lo, hi, points, spacing: Spacing::Log }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        make_grid(self.lo, self.hi, self.points, self.spacing)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeBlock {
    pub i: u32,
    pub mu: f64,
    pub r_min: f64,
    pub n_grid: usize,
}

impl Default for ModeBlock {
    fn default() -> Self {
        ModeBlock { i: 1, mu: 1.0, r_min: 0.02, n_grid: 64 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigsBlock {
    pub i: u32,
    pub r_out: f64,
    pub count: usize,
}

impl Default for EigsBlock {
    fn default() -> Self {
        EigsBlock { i: 1, r_out: 4.0, count: 8 }
    }
}

/// Which solution the frequency commands evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    /// `u ≡ 1` as a mode-0 state (elliptic or parabolic).
    Constant,
    /// Regular radial part `e^{-μt} f_0(r)` with `μ = mode.mu`.
    Bessel,
    /// Tip-decaying mode `(mode.i, mode.mu)`; elliptic only.
    Tip,
    /// `u ≡ 1` with its full sphere mass; parabolic only.
    Unit,
    /// Caloric series from the `eigs` and `heat` blocks; parabolic only.
    Series,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FreqBlock {
    /// Defaults to `tip` for elliptic scans and `series` for parabolic ones.
    pub state: Option<StateKind>,
    pub r_grid: GridSpec,
    #[serde(rename = "R_grid")]
    pub big_r_grid: GridSpec,
    /// Central-difference step of the `I = (R/4)D'` check, relative to `R`.
    pub h_rel: f64,
}

impl Default for FreqBlock {
    fn default() -> Self {
        FreqBlock {
            state: None,
            r_grid: GridSpec::log(0.02, 0.13, 64),
            big_r_grid: GridSpec::log(0.02, 0.2, 16),
            h_rel: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatBlock {
    /// One coefficient per eigenpair, lowest first; the series uses this many pairs.
    pub coeffs: Vec<f64>,
    pub t_list: Vec<f64>,
    pub r_grid: GridSpec,
}

impl Default for HeatBlock {
    fn default() -> Self {
        HeatBlock { coeffs: vec![1.0, 0.5, 0.25, 0.125], t_list: vec![0.25, 0.5, 1.0], r_grid: GridSpec::log(0.005, 0.1, 32) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyticityBlock {
    pub r0: f64,
    pub t0: f64,
    pub kmax: u32,
}

impl Default for AnalyticityBlock {
    fn default() -> Self {
        AnalyticityBlock { r0: 1.0, t0: 0.5, kmax: 16 }
    }
}

/// Relative tolerances of the eigenvalue integrator, the quadratures behind the
/// parabolic slices and the eigenvalue root refinement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub ode: f64,
    pub quad: f64,
    pub root: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        // The `I = (R/4)D'` check differences D at step 1e-3 R, so D needs ~1e-12.
        Tolerances { ode: 1e-10, quad: 1e-12, root: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: HornParams,
    pub mode: ModeBlock,
    pub eigs: EigsBlock,
    pub freq: FreqBlock,
    pub heat: HeatBlock,
    pub analyticity: AnalyticityBlock,
    pub output: Option<PathBuf>,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: HornParams::standard(),
            mode: ModeBlock::default(),
            eigs: EigsBlock::default(),
            freq: FreqBlock::default(),
            heat: HeatBlock::default(),
            analyticity: AnalyticityBlock::default(),
            output: None,
            tolerances: Tolerances::default(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> HornError {
    HornError::Config(msg.into())
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(config_err(msg()))
    }
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

impl RunConfig {
    /// Parses a JSON document, lays it over the defaults and applies `key=value`
    /// overrides before validation. Blocks may therefore be given partially.
    pub fn from_json_str(text: &str, overrides: &[String]) -> Result<Self> {
        let given: Value =
            serde_json::from_str(text).map_err(|e| config_err(format!("config is not valid JSON: {e}")))?;
        if !given.is_object() {
            return Err(config_err("config must be a JSON object"));
        }
        let mut doc = serde_json::to_value(RunConfig::default())?;
        merge(&mut doc, given);
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        Self::from_value(doc)
    }

    pub fn from_value(doc: Value) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json_str(&text, overrides)
    }

    /// Checks that apply to every command.
    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        require(positive(t.ode) && positive(t.quad) && positive(t.root), || {
            format!("tolerances must be positive, got {t:?}")
        })?;
        for (name, g) in [
            ("freq.r_grid", &self.freq.r_grid),
            ("freq.R_grid", &self.freq.big_r_grid),
            ("heat.r_grid", &self.heat.r_grid),
        ] {
            g.values().map_err(|e| config_err(format!("{name}: {e}")))?;
        }
        let m = &self.mode;
        require(m.mu >= 0.0 && m.mu.is_finite(), || format!("mode.mu must be non-negative, got {}", m.mu))?;
        require(positive(m.r_min), || format!("mode.r_min must be positive, got {}", m.r_min))?;
        require(m.n_grid >= 8, || format!("mode.n_grid must be at least 8, got {}", m.n_grid))?;
        let e = &self.eigs;
        require(positive(e.r_out), || format!("eigs.r_out must be positive, got {}", e.r_out))?;
        require(e.count >= 1, || "eigs.count must be at least 1".into())?;
        let h = &self.heat;
        require(!h.coeffs.is_empty() && h.coeffs.iter().all(|c| c.is_finite()), || {
            "heat.coeffs must be a non-empty list of finite numbers".into()
        })?;
        require(!h.t_list.is_empty() && h.t_list.iter().all(|&t| positive(t)), || {
            "heat.t_list must be a non-empty list of positive times".into()
        })?;
        require(h.t_list.windows(2).all(|w| w[1] > w[0]), || "heat.t_list must be increasing".into())?;
        let a = &self.analyticity;
        require(positive(a.r0) && positive(a.t0), || "analyticity.r0 and analyticity.t0 must be positive".into())?;
        require(a.kmax >= 8, || format!("analyticity.kmax must be at least 8, got {}", a.kmax))?;
        require(self.freq.h_rel > 0.0 && self.freq.h_rel < 0.5, || {
            format!("freq.h_rel must lie in (0, 0.5), got {}", self.freq.h_rel)
        })?;
        Ok(())
    }

    fn eigen_options(&self) -> EigenOptions {
        EigenOptions {
            ode_rtol: self.tolerances.ode,
            ode_atol: 1e-2 * self.tolerances.ode,
            root_rtol: self.tolerances.root,
            ..EigenOptions::default()
        }
    }

    /// Pairs needed by the caloric series: one per coefficient, at least `eigs.count`.
    fn series_pair_count(&self) -> usize {
        self.heat.coeffs.len().max(self.eigs.count)
    }
}

/// Recursively replaces leaves of `base` by those of `over`.
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

/// Sets the leaf at a dotted path such as `mode.mu=2` or `params.N=5`. The value is read
/// as JSON when it parses and as a string otherwise; missing objects on the path are
/// created.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override {assignment:?} is not of the form key=value")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(config_err(format!("override key {path:?} has an empty component")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| config_err(format!("override {path:?} descends into a non-object")))?;
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| config_err(format!("override {path:?} descends into a non-object")))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    ConfigError,
    NumericalFailure,
    BoundCheckFailure,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::ConfigError => 2,
            RunStatus::NumericalFailure => 3,
            RunStatus::BoundCheckFailure => 4,
        }
    }
}

/// One pass/fail comparison against a pinned limit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub value: f64,
    /// `"<="`, `">="`, `"<"` or `"in"`.
    pub relation: &'static str,
    pub limit: Vec<f64>,
    pub passed: bool,
}

impl BoundCheck {
    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        BoundCheck { name: name.into(), value, relation: "<=", limit: vec![limit], passed: value <= limit }
    }

    fn at_least(name: &str, value: f64, limit: f64) -> Self {
        BoundCheck { name: name.into(), value, relation: ">=", limit: vec![limit], passed: value >= limit }
    }

    fn below(name: &str, value: f64, limit: f64) -> Self {
        BoundCheck { name: name.into(), value, relation: "<", limit: vec![limit], passed: value < limit }
    }

    fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        BoundCheck { name: name.into(), value, relation: "in", limit: vec![lo, hi], passed: lo <= value && value <= hi }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub status: RunStatus,
    pub exit_code: i32,
    /// Last stage entered; for failed runs, the stage that failed.
    pub stage: String,
    pub error: Option<String>,
    pub config: Value,
    pub versions: BTreeMap<String, String>,
    pub threads: usize,
    pub wall_time_s: f64,
    /// Artifacts written, relative to the output directory.
    pub files: Vec<String>,
    pub checks: Vec<BoundCheck>,
    pub results: Map<String, Value>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Accumulated state of one command pipeline.
struct Pipeline<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    stage: &'static str,
    files: Vec<String>,
    checks: Vec<BoundCheck>,
    results: Map<String, Value>,
}

impl<'a> Pipeline<'a> {
    fn enter(&mut self, stage: &'static str) {
        self.stage = stage;
    }

    fn write_csv(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        table.write(&self.out.join(name))?;
        self.files.push(name.into());
        Ok(())
    }

    fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        write_json(&self.out.join(name), value)?;
        self.files.push(name.into());
        Ok(())
    }

    fn record<T: Serialize + ?Sized>(&mut self, key: &str, value: &T) -> Result<()> {
        self.results.insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }

    fn check(&mut self, c: BoundCheck) {
        self.checks.push(c);
    }

    fn params(&self) -> &HornParams {
        &self.cfg.params
    }

    fn eigenpairs(&mut self, count: usize) -> Result<Vec<EigenPair>> {
        self.enter("eigenvalues");
        let e = self.cfg.eigs;
        dirichlet_eigenvalues_with(self.params(), e.i, e.r_out, count, &self.cfg.eigen_options())
    }

    fn series(&mut self, t_min: f64) -> Result<CaloricSeries> {
        let pairs = self.eigenpairs(self.cfg.series_pair_count())?;
        self.enter("series");
        let coeffs = self.cfg.heat.coeffs.clone();
        let used = pairs[..coeffs.len()].to_vec();
        let s = CaloricSeries::new(used, coeffs, t_min)?;
        self.record(
            "series",
            &serde_json::json!({
                "mode_index": s.mode_index(),
                "nu": s.pairs().iter().map(|q| q.nu()).collect::<Vec<_>>(),
                "coeffs": s.coeffs(),
                "t_min": s.t_min(),
                "tail_certificate": s.tail_certificate(),
                "coefficient_bound": s.coefficient_bound(),
                "growth_constant": s.growth_constant(),
            }),
        )?;
        Ok(s)
    }
}

fn fit_summary(fit: &LineFit, ys: &[f64]) -> FitSummary {
    FitSummary::new(fit, ys)
}

fn profile_table(profile: &RadialProfile) -> CsvTable {
    let mut t = CsvTable::new(&["r", "s", "sign", "log_mag", "log_deriv"]);
    let r = profile.r_grid();
    for (k, &rk) in r.iter().enumerate() {
        t.push(vec![
            Cell::Real(rk),
            Cell::Real(profile.s_grid()[k]),
            Cell::Int(profile.sign()[k] as i64),
            Cell::Real(profile.log_mag()[k]),
            Cell::Real(profile.log_deriv()[k]),
        ]);
    }
    t
}

fn run_modes(pl: &mut Pipeline) -> Result<()> {
    let m = pl.cfg.mode;
    let p = *pl.params();
    pl.enter("profile");
    let profile = profile_from_k2(&p, m.i, m.mu, m.r_min, m.n_grid)?;
    pl.write_csv("modes.csv", &profile_table(&profile))?;

    // log_mag must decrease toward r_min; the s grid increases toward the tip.
    let rising = profile.log_mag().windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    pl.check(BoundCheck::below("log_mag_step_toward_tip", rising, 0.0));

    pl.enter("decay-fit");
    let fit = decay_exponent_fit(&profile)?;
    let summary = fit_summary(&fit, profile.log_mag());
    let root = (4.0 * sphere_eigenvalue(p.n(), m.i)).sqrt() / p.eps();
    let bracket = [-(root + 2.0), -(root - 1.0)];
    pl.record("decay_fit", &serde_json::json!({ "fit": summary, "bracket": bracket }))?;
    if m.i >= 1 {
        pl.check(BoundCheck::within("decay_slope", summary.slope, bracket[0], bracket[1]));
        pl.check(BoundCheck::at_most("decay_fit_residual", summary.residual, PROFILE_FIT_RESIDUAL_LIMIT));

        pl.enter("normalization");
        let (computed, bound) = normalization_bound(&p, m.i, m.mu)?;
        pl.record("normalization", &serde_json::json!({ "computed": computed, "bound": bound }))?;
    }
    Ok(())
}

fn run_eigs(pl: &mut Pipeline) -> Result<()> {
    let count = pl.cfg.eigs.count;
    let pairs = pl.eigenpairs(count)?;
    pl.write_csv("eigs.csv", &eigen_table(&pairs))?;
    pl.enter("sturm");
    let misplaced = pairs.iter().enumerate().filter(|(k, q)| q.zeros() != *k).count();
    pl.check(BoundCheck::at_most("zero_count_mismatches", misplaced as f64, 0.0));
    let worst_norm = pairs.iter().map(|q| q.norm_defect()).fold(0.0, f64::max);
    pl.record("max_norm_defect", &worst_norm)?;
    if count >= 8 {
        pl.enter("weyl");
        let w = weyl_check(&pairs, pl.params())?;
        pl.write_json("weyl.json", &w)?;
        pl.record("weyl", &w)?;
        let lo = 2.0 / pl.params().big_n() - 0.1;
        pl.check(BoundCheck::within("weyl_exponent", w.exponent, lo, 2.1));
    }
    Ok(())
}

/// Elliptic scan and the checks on it; returns the report.
fn elliptic_stage(pl: &mut Pipeline, state: &ModeState, grid: &[f64], prefix: &str) -> Result<EllipticReport> {
    pl.enter("elliptic-scan");
    let scan = elliptic_scan(state, grid)?;
    pl.write_csv(&format!("{prefix}.csv"), &scan.to_table())?;

    pl.enter("elliptic-checks");
    let identity_defect = check_log_i_identity(state, &scan)?;
    let (growth_defect, u_c) = check_u_growth(state, &scan)?;
    let i_fit = check_i_lower(state, &scan)?;
    let ys: Vec<f64> = scan.rows().iter().map(|r| r.i.ln()).collect();
    let report = EllipticReport { identity_defect, u_c, i_fit: fit_summary(&i_fit, &ys) };
    pl.check(BoundCheck::at_most("log_i_identity_defect", identity_defect, LOG_I_IDENTITY_LIMIT));
    pl.check(BoundCheck::at_most("u_growth_shortfall", growth_defect, GROWTH_SHORTFALL_LIMIT));
    pl.check(BoundCheck::at_least("i_lower_slope", report.i_fit.slope, 0.0));
    if state.mode_index() >= 1 {
        pl.check(BoundCheck::at_most("i_lower_residual", report.i_fit.residual, FIT_RESIDUAL_LIMIT));
    }
    pl.record("u_growth_shortfall", &growth_defect)?;
    Ok(report)
}

fn run_freq_elliptic(pl: &mut Pipeline) -> Result<()> {
    let p = *pl.params();
    let m = pl.cfg.mode;
    let grid = pl.cfg.freq.r_grid;
    pl.enter("state");
    let state = match pl.cfg.freq.state.unwrap_or(StateKind::Tip) {
        StateKind::Constant => ModeState::constant(&p),
        StateKind::Bessel => ModeState::bessel(&p, m.mu)?,
        StateKind::Tip => ModeState::tip(&p, m.i, m.mu, grid.lo, grid.hi)?,
        other => return Err(config_err(format!("freq.state {other:?} has no elliptic scan"))),
    };
    let report = elliptic_stage(pl, &state, &grid.values()?, "freq_elliptic")?;
    pl.write_json("freq_elliptic.json", &report)?;
    pl.record("elliptic", &report)
}

/// Parabolic scan, the `I = (R/4)D'` check at the middle scale, and the bound checks.
fn parabolic_stage(pl: &mut Pipeline, u: &dyn CaloricField, prefix: &str) -> Result<ParabolicReport> {
    let grid = pl.cfg.freq.big_r_grid.values()?;
    pl.enter("parabolic-scan");
    let scan: FrequencyScan = parabolic_scan_with(u, &grid, pl.cfg.tolerances.quad)?;
    pl.write_csv(&format!("{prefix}.csv"), &scan.to_table())?;

    pl.enter("id-relation");
    let big_r = grid[grid.len() / 2];
    let id = check_id_relation(u, big_r, pl.cfg.freq.h_rel * big_r)?;
    pl.check(BoundCheck::at_most("id_relation_defect", id.relative, ID_RELATION_LIMIT));

    pl.enter("parabolic-checks");
    let (n_defect, n_c) = check_n_bound(u, &scan)?;
    pl.check(BoundCheck::at_most("log_n_shortfall", n_defect, GROWTH_SHORTFALL_LIMIT));
    let d_fit = check_d_lower(u, &scan)?;
    let ys: Vec<f64> = scan.rows().iter().map(|r| r.energy.ln()).collect();
    let report = ParabolicReport { id_defect: id.relative, n_c, d_fit: fit_summary(&d_fit, &ys) };
    pl.check(BoundCheck::at_least("d_lower_slope", report.d_fit.slope, 0.0));
    pl.check(BoundCheck::at_most("d_lower_residual", report.d_fit.residual, FIT_RESIDUAL_LIMIT));
    pl.record("id_relation", &serde_json::json!({ "R": big_r, "absolute": id.absolute, "relative": id.relative }))?;
    pl.record("log_n_shortfall", &n_defect)?;
    Ok(report)
}

fn run_freq_parabolic(pl: &mut Pipeline) -> Result<()> {
    let p = *pl.params();
    pl.enter("state");
    let report = match pl.cfg.freq.state.unwrap_or(StateKind::Series) {
        StateKind::Unit => parabolic_stage(pl, &UnitField { params: p }, "freq_parabolic")?,
        StateKind::Constant => parabolic_stage(pl, &ModeState::constant(&p), "freq_parabolic")?,
        StateKind::Bessel => {
            let state = ModeState::bessel(&p, pl.cfg.mode.mu)?;
            parabolic_stage(pl, &state, "freq_parabolic")?
        }
        StateKind::Series => {
            let t_min = pl.cfg.heat.t_list[0];
            let s = pl.series(t_min)?;
            parabolic_stage(pl, &s, "freq_parabolic")?
        }
        StateKind::Tip => return Err(config_err("freq.state tip has no parabolic scan; use series")),
    };
    pl.write_json("freq_parabolic.json", &report)?;
    pl.record("parabolic", &report)
}

#[derive(Clone, Copy, Debug, Serialize)]
struct DecayRow {
    t: f64,
    #[serde(flatten)]
    fit: FitSummary,
}

/// Decay fits of the series at each listed time, with their checks.
fn decay_stage(pl: &mut Pipeline, s: &CaloricSeries) -> Result<Vec<DecayRow>> {
    pl.enter("decay-check");
    let grid = pl.cfg.heat.r_grid.values()?;
    let mut rows = Vec::new();
    for &t in &pl.cfg.heat.t_list {
        let fit = caloric_decay_check(s, &grid, t)?;
        let ys: Vec<f64> = grid.iter().map(|&r| Ok(evaluate_caloric(s, r, t)?.ln_abs)).collect::<Result<_>>()?;
        let summary = fit_summary(&fit, &ys);
        pl.check(BoundCheck::below(&format!("decay_slope_t{t}"), summary.slope, 0.0));
        pl.check(BoundCheck::at_most(&format!("decay_residual_t{t}"), summary.residual, FIT_RESIDUAL_LIMIT));
        rows.push(DecayRow { t, fit: summary });
    }
    if rows.len() >= 2 {
        let slopes: Vec<f64> = rows.iter().map(|r| r.fit.slope).collect();
        let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
        let spread = range(&slopes) / mean.abs();
        pl.check(BoundCheck::at_most("decay_slope_spread", spread, DECAY_SLOPE_SPREAD_LIMIT));
    }
    pl.record("decay", &rows)?;
    Ok(rows)
}

fn range(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

fn run_heat(pl: &mut Pipeline) -> Result<()> {
    let t_list = pl.cfg.heat.t_list.clone();
    let s = pl.series(t_list[0])?;
    pl.enter("caloric-table");
    let grid = pl.cfg.heat.r_grid.values()?;
    let table = caloric_table(&s, &grid, &t_list)?;
    pl.write_csv("heat.csv", &table)?;
    let decay = if s.mode_index() >= 1 { decay_stage(pl, &s)? } else { Vec::new() };
    let summary = serde_json::json!({
        "tail_certificate": s.tail_certificate(),
        "coefficient_bound": s.coefficient_bound(),
        "growth_constant": s.growth_constant(),
        "decay": decay,
    });
    pl.write_json("heat.json", &summary)
}

fn run_analyticity(pl: &mut Pipeline) -> Result<()> {
    let a = pl.cfg.analyticity;
    let s = pl.series(a.t0)?;
    pl.enter("probe");
    let report = analyticity_probe(&s, a.r0, a.t0, a.kmax)?;
    pl.write_json("analyticity.json", &report)?;
    let longer = analyticity_probe(&s, a.r0, a.t0, a.kmax + a.kmax / 2)?;
    pl.record("fitted_radius", &report.fitted_radius)?;
    pl.record("fitted_radius_longer", &serde_json::json!({ "kmax": longer.kmax, "radius": longer.fitted_radius }))?;
    pl.check(BoundCheck::at_least("fitted_radius", report.fitted_radius, a.t0));
    pl.check(BoundCheck::at_least("fitted_radius_longer", longer.fitted_radius, report.fitted_radius));
    Ok(())
}

fn run_demo(pl: &mut Pipeline) -> Result<()> {
    let p = *pl.params();
    let t_list = pl.cfg.heat.t_list.clone();
    let s = pl.series(t_list[0])?;
    if s.mode_index() == 0 {
        return Err(config_err("demo-counterexample needs eigs.i >= 1"));
    }
    let decay = decay_stage(pl, &s)?;
    let mid = &decay[decay.len() / 2];

    // The lowest eigenfunction on its tip region solves the mode equation with μ = ν_1.
    pl.enter("state");
    let grid = pl.cfg.freq.r_grid;
    let nu1 = s.pairs()[0].nu();
    let state = ModeState::tip(&p, s.mode_index(), nu1, grid.lo, grid.hi)?;
    let elliptic = elliptic_stage(pl, &state, &grid.values()?, "demo_elliptic")?;
    let parabolic = parabolic_stage(pl, &s, "demo_parabolic")?;

    pl.enter("summary");
    let passed = pl.checks.iter().all(|c| c.passed);
    let summary = serde_json::json!({
        "mode_index": s.mode_index(),
        "nu_1": nu1,
        "decay_t": mid.t,
        "decay_slope": mid.fit.slope,
        "decay_residual": mid.fit.residual,
        "elliptic": elliptic,
        "parabolic": parabolic,
        "thresholds": {
            "log_i_identity": LOG_I_IDENTITY_LIMIT,
            "id_relation": ID_RELATION_LIMIT,
            "growth_shortfall": GROWTH_SHORTFALL_LIMIT,
            "fit_residual": FIT_RESIDUAL_LIMIT,
        },
        "passed": passed,
    });
    pl.write_json("demo_counterexample.json", &summary)
}

fn classify(err: &HornError) -> RunStatus {
    match err {
        HornError::Config(_) => RunStatus::ConfigError,
        _ => RunStatus::NumericalFailure,
    }
}

/// Worker count from `HORNLAB_THREADS`, or `None` when unset.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(config_err(format!("{THREADS_VAR} must be a positive integer, got {v:?}"))),
        },
    }
}

fn versions() -> BTreeMap<String, String> {
    let mut v = BTreeMap::new();
    v.insert("hornlab".into(), env!("CARGO_PKG_VERSION").into());
    v.insert("manifest".into(), "1".into());
    v
}

/// Runs `command` with a validated configuration, writing artifacts and the manifest
/// into `out`.
pub fn run(command: Command, cfg: &RunConfig, out: &Path) -> Manifest {
    let start = Instant::now();
    let mut manifest = Manifest {
        command: command.name().into(),
        status: RunStatus::Ok,
        exit_code: 0,
        stage: "setup".into(),
        error: None,
        config: serde_json::to_value(cfg).unwrap_or(Value::Null),
        versions: versions(),
        threads: rayon::current_num_threads(),
        wall_time_s: 0.0,
        files: Vec::new(),
        checks: Vec::new(),
        results: Map::new(),
    };
    let outcome = thread_cap().and_then(|cap| {
        std::fs::create_dir_all(out)?;
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cap {
            builder = builder.num_threads(n);
        }
        let pool = builder.build().map_err(|e| HornError::Config(format!("cannot start worker pool: {e}")))?;
        manifest.threads = pool.current_num_threads();
        let mut pl =
            Pipeline { cfg, out, stage: "setup", files: Vec::new(), checks: Vec::new(), results: Map::new() };
        let result = pool.install(|| match command {
            Command::Modes => run_modes(&mut pl),
            Command::Eigs => run_eigs(&mut pl),
            Command::FreqElliptic => run_freq_elliptic(&mut pl),
            Command::FreqParabolic => run_freq_parabolic(&mut pl),
            Command::Heat => run_heat(&mut pl),
            Command::Analyticity => run_analyticity(&mut pl),
            Command::DemoCounterexample => run_demo(&mut pl),
        });
        manifest.stage = pl.stage.into();
        manifest.files = pl.files;
        manifest.checks = pl.checks;
        manifest.results = pl.results;
        result
    });
    match outcome {
        Err(e) => {
            manifest.status = classify(&e);
            manifest.error = Some(e.to_string());
        }
        Ok(()) => {
            if let Some(c) = manifest.checks.iter().find(|c| !c.passed) {
                manifest.status = RunStatus::BoundCheckFailure;
                manifest.stage = "bound-checks".into();
                manifest.error = Some(format!("bound check {} failed: {} {} {:?}", c.name, c.value, c.relation, c.limit));
            } else {
                manifest.stage = "done".into();
            }
        }
    }
    manifest.exit_code = manifest.status.exit_code();
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    write_manifest(out, &mut manifest);
    manifest
}

fn write_manifest(out: &Path, manifest: &mut Manifest) {
    let written = std::fs::create_dir_all(out).map_err(HornError::from).and_then(|_| {
        write_json(&out.join(MANIFEST_FILE), manifest)
    });
    if let Err(e) = written {
        eprintln!("hornlab: cannot write {}: {e}", out.join(MANIFEST_FILE).display());
    }
}

/// Command-line request as parsed by the binary.
#[derive(Clone, Debug, PartialEq)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub overrides: Vec<String>,
}

/// Output directory used when neither `--out` nor `output` is given.
pub const DEFAULT_OUTPUT: &str = "hornlab-out";

/// Loads the configuration and runs the command. Configuration failures still produce
/// a manifest, in `--out` (or the default directory) with whatever config could be read.
pub fn execute(inv: &Invocation) -> Manifest {
    match RunConfig::load(&inv.config, &inv.overrides) {
        Ok(cfg) => {
            let out = inv.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
            run(inv.command, &cfg, &out)
        }
        Err(e) => {
            let out = inv.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
            let echo = std::fs::read_to_string(&inv.config)
                .ok()
                .and_then(|t| serde_json::from_str::<Value>(&t).ok())
                .unwrap_or(Value::Null);
            let mut manifest = Manifest {
                command: inv.command.name().into(),
                status: RunStatus::ConfigError,
                exit_code: RunStatus::ConfigError.exit_code(),
                stage: "config".into(),
                error: Some(e.to_string()),
                config: echo,
                versions: versions(),
                threads: 0,
                wall_time_s: 0.0,
                files: Vec::new(),
                checks: Vec::new(),
                results: Map::new(),
            };
            write_manifest(&out, &mut manifest);
            manifest
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert!("mode".parse::<Command>().is_err());
    }

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json_str(&text, &[]).unwrap(), cfg);
        assert_eq!(RunConfig::from_json_str("{}", &[]).unwrap(), cfg);
    }

    #[test]
    fn overrides_set_leaves() {
        let sets = vec!["mode.mu=2.5".to_string(), "params.N=5".to_string(), "output=run-a".to_string()];
        let cfg = RunConfig::from_json_str("{}", &sets).unwrap();
        assert_eq!(cfg.mode.mu, 2.5);
        assert_eq!(cfg.params.big_n(), 5.0);
        assert_eq!(cfg.output, Some(PathBuf::from("run-a")));
        let partial = RunConfig::from_json_str(r#"{"freq": {"R_grid": {"points": 9}}}"#, &[]).unwrap();
        assert_eq!(partial.freq.big_r_grid.points, 9);
        assert_eq!(partial.freq.big_r_grid.lo, FreqBlock::default().big_r_grid.lo);
        assert!(RunConfig::from_json_str("{}", &["mode.nu=1".to_string()]).is_err());
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        let bad = [
            r#"{"modes": {}}"#,
            r#"{"tolerances": {"ode": 0}}"#,
            r#"{"freq": {"r_grid": {"lo": 0.2, "hi": 0.1, "points": 8}}}"#,
            r#"{"heat": {"t_list": [1.0, 0.5]}}"#,
            r#"{"params": {"n": 3, "N": 2, "eps": 0.5, "eta": 0.25}}"#,
            "not json",
            "[1, 2]",
        ];
        for text in bad {
            assert!(matches!(RunConfig::from_json_str(text, &[]), Err(HornError::Config(_))), "{text}");
        }
        let mut doc = serde_json::json!({"mode": 3});
        assert!(apply_override(&mut doc, "mode.mu=1").is_err());
        assert!(apply_override(&mut doc, "novalue").is_err());
        assert!(apply_override(&mut doc, "a..b=1").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(RunStatus::Ok.exit_code(), 0);
        assert_eq!(RunStatus::ConfigError.exit_code(), 2);
        assert_eq!(RunStatus::NumericalFailure.exit_code(), 3);
        assert_eq!(RunStatus::BoundCheckFailure.exit_code(), 4);
    }
}
