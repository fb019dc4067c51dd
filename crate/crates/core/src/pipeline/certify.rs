use serde::Serialize;

use super::region::{dwell_region, window_for, DwellRegion};
use super::spec::{DwellChoice, NetworkSpec};
use super::PipelineError;
use crate::augment::{augment_certs, build_augmented_network, classify, default_l, l_bound, ClockEntry, ClockMode, ClockSpec, IndexSets};
use crate::hybridtime::DwellWindow;
use crate::lyapunov::{
    build_iss_estimate, check_flow, check_jump, check_sandwich, check_subsystem_flow, check_subsystem_jump, CheckReport,
    FlowRate, IssEstimate, JumpRate, LyapCert, SamplePlan, Verdict as CheckVerdict,
};
use crate::scalarfn::{LogGrid, ScalarFn};
use crate::smallgain::{
    compose_exponential, compose_lyapunov, exponential_rates, linear_omega_path, power_path_rates, power_law_omega_path, small_gain_check,
    small_gain_holds, validate_omega_path, GainForm, GainStructure, OmegaPath, OmegaReport, SmallGainReport,
};
use crate::system::{CompiledSystem, Interconnection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CertifiedIss,
    CertifiedGas,
    CertifiedForSolutionClass,
    Inconclusive,
    Refuted,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::CertifiedIss | Verdict::CertifiedGas | Verdict::CertifiedForSolutionClass => 0,
            Verdict::Inconclusive => 1,
            Verdict::Refuted => 2,
        }
    }

    pub fn certified(self) -> bool {
        self.exit_code() == 0
    }
}

/// What is certified. The `pre-` forms hold for every maximal solution,
/// complete or not; the others for the solutions in the certified class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    PreIss,
    PreGas,
    Iss,
    Gas,
}

/// One dwell condition on the network's jump times.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "condition", rename_all = "lowercase")]
pub enum Constraint {
    Adt { delta: f64, n0: f64, origin: String },
    Radt { delta_star: f64, n0_star: f64, origin: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rates {
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckEntry {
    pub step: String,
    pub target: String,
    #[serde(flatten)]
    pub report: CheckReport,
}

/// Supremum of `L` keeping the small-gain condition; `sup` is absent when
/// unbounded and `blocked` when the condition fails already at `L = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LBound {
    pub subsystem: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup: Option<f64>,
    pub blocked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaSummary {
    pub components: Vec<ScalarFn>,
    pub automatic: bool,
    #[serde(flatten)]
    pub report: OmegaReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    /// `V = max_i V_i / s_i` with linear gains.
    ScaledMax,
    /// `V = max_i σ_i⁻¹(V_i)` along an Ω-path.
    PathMax,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexReport {
    /// 1-based subsystems with `d_i < 0`.
    pub jump_unstable: Vec<usize>,
    /// 1-based subsystems with `c_i < 0`.
    pub flow_unstable: Vec<usize>,
}

impl From<&IndexSets> for IndexReport {
    fn from(s: &IndexSets) -> Self {
        IndexReport {
            jump_unstable: s.jump_unstable.iter().map(|i| i + 1).collect(),
            flow_unstable: s.flow_unstable.iter().map(|i| i + 1).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub steps: Vec<String>,
    pub samples: usize,
    pub gain_form: GainForm,
    pub grid: (f64, f64, usize),
    pub mode: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub property: Option<Property>,
    pub solution_class: Vec<Constraint>,
    /// False when the class constraints cannot all hold on an unbounded domain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_admits_complete: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<Rates>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dwell_region: Option<DwellRegion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dwell_choice: Option<DwellChoice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<DwellWindow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<IssEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub composite: Option<LyapCert>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub composition: Option<Composition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index_sets: Option<IndexReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<ClockSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub small_gain: Option<SmallGainReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub l_bounds: Vec<LBound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<OmegaSummary>,
    pub checks: Vec<CheckEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_step: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub summary: Vec<String>,
    pub provenance: Provenance,
}

/// Which clocks to add.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModeChoice {
    /// The spec's augmentation if any; otherwise ADT, then RADT.
    #[default]
    Auto,
    Adt,
    Radt,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub mode: ModeChoice,
    pub grid: LogGrid,
    /// Margin of the default `L` past the sign change.
    pub margin: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { mode: ModeChoice::Auto, grid: LogGrid::default(), margin: 0.5 }
    }
}

/// Pipeline result with the network the certificate speaks about.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub certificate: Certificate,
    /// The network with any clocks added.
    pub network: Interconnection,
    pub certs: Vec<LyapCert>,
}

struct Run<'a> {
    spec: &'a NetworkSpec,
    opts: RunOptions,
    cert: Certificate,
}

enum Stop {
    Refuted(String, String),
    Inconclusive(String, String),
}

type Step<T> = Result<T, Stop>;

fn inconclusive<T>(step: &str, why: impl Into<String>) -> Step<T> {
    Err(Stop::Inconclusive(step.into(), why.into()))
}

impl Run<'_> {
    fn step(&mut self, name: &str) {
        self.cert.provenance.steps.push(name.into());
    }

    fn note(&mut self, line: impl Into<String>) {
        self.cert.summary.push(line.into());
    }

    /// Record a falsifier report; a failure refutes the claim when
    /// `refutes`, otherwise it exposes an internal inconsistency.
    fn record(&mut self, step: &str, target: String, rep: CheckReport, refutes: bool) -> Step<()> {
        let verdict = rep.verdict;
        self.cert.checks.push(CheckEntry { step: step.into(), target: target.clone(), report: rep });
        match verdict {
            CheckVerdict::Pass => Ok(()),
            CheckVerdict::Fail if refutes => Err(Stop::Refuted(step.into(), format!("{target} fails"))),
            CheckVerdict::Fail => inconclusive(step, format!("{target} fails after construction")),
            CheckVerdict::Inconclusive => inconclusive(step, format!("{target} could not be decided numerically")),
        }
    }

    fn check_subsystems(&mut self, step: &str, sys: &CompiledSystem, certs: &[LyapCert], plan: &SamplePlan, refutes: bool) -> Step<()> {
        for i in 0..certs.len() {
            let name = |what: &str| format!("subsystem {} {what}", i + 1);
            let rep = check_subsystem_flow(sys, certs, i, plan).map_err(|e| Stop::Inconclusive(step.into(), e.to_string()))?;
            self.record(step, name("flow"), rep, refutes)?;
            let rep = check_subsystem_jump(sys, certs, i, plan).map_err(|e| Stop::Inconclusive(step.into(), e.to_string()))?;
            self.record(step, name("jump"), rep, refutes)?;
            let rep = check_sandwich(sys, &certs[i], Some(i), plan).map_err(|e| Stop::Inconclusive(step.into(), e.to_string()))?;
            self.record(step, name("sandwich"), rep, refutes)?;
        }
        Ok(())
    }

    fn check_composite(&mut self, sys: &CompiledSystem, comp: &LyapCert, plan: &SamplePlan) -> Step<()> {
        let step = "compose";
        let err = |e: crate::lyapunov::LyapError| Stop::Inconclusive(step.into(), e.to_string());
        let rep = check_flow(sys, comp, plan).map_err(err)?;
        self.record(step, "composite flow".into(), rep, false)?;
        let rep = check_jump(sys, comp, plan).map_err(err)?;
        self.record(step, "composite jump".into(), rep, false)?;
        let rep = check_sandwich(sys, comp, None, plan).map_err(err)?;
        self.record(step, "composite sandwich".into(), rep, false)
    }
}

fn compile(net: &Interconnection) -> Result<CompiledSystem, PipelineError> {
    net.compile().map_err(PipelineError::Model)
}

/// Default clock parameters for the subsystems of the target set that
/// have no entry. `δ` (resp. `δ*`) matches the augmented rate to the worst
/// rate the other mode leaves in place, or keeps it at 10% of its
/// original value when nothing is left.
fn fill_entries(certs: &[LyapCert], sets: &IndexSets, mode: ClockMode, given: &[ClockEntry], margin: f64) -> ClockSpec {
    let mut entries: Vec<ClockEntry> = given.to_vec();
    let (target, other) = match mode {
        ClockMode::Adt => (&sets.jump_unstable, &sets.flow_unstable),
        ClockMode::Radt => (&sets.flow_unstable, &sets.jump_unstable),
    };
    for &i in target {
        if entries.iter().any(|e| e.i == i + 1) {
            continue;
        }
        let (c, d) = certs[i].rates().expect("classified certificates are exponential");
        let l = default_l(&certs[i], mode, margin).expect("exponential");
        let worst = other.iter().map(|&j| certs[j].rates().unwrap()).map(|(cj, dj)| match mode {
            ClockMode::Adt => cj,
            ClockMode::Radt => dj,
        });
        let worst = worst.fold(f64::INFINITY, f64::min);
        let own = match mode {
            ClockMode::Adt => c,
            ClockMode::Radt => d,
        };
        let rate = if worst.is_finite() && worst < own { (own - worst) / l } else if own > 0.0 { 0.9 * own / l } else { 1.0 };
        let rate = if rate > 0.0 { rate } else { 1.0 };
        entries.push(match mode {
            ClockMode::Adt => ClockEntry { i: i + 1, l, delta: Some(rate), delta_star: None, n0: 1.0 },
            ClockMode::Radt => ClockEntry { i: i + 1, l, delta: None, delta_star: Some(rate), n0: 1.0 },
        });
    }
    entries.sort_by_key(|e| e.i);
    ClockSpec { mode, entries }
}

fn gains(certs: &[LyapCert], form: GainForm) -> Step<GainStructure> {
    GainStructure::from_certs(certs, form).map_err(|e| Stop::Inconclusive("small_gain".into(), e.to_string()))
}

/// Choose the clock setup, shrinking default `L`s toward the
/// feasible side when they break the small-gain condition.
fn choose_augmentation(run: &mut Run, certs: &[LyapCert], sets: &IndexSets) -> Step<Option<ClockSpec>> {
    let form = run.spec.gain_form;
    let grid = run.opts.grid;
    let given = run.spec.augmentation.as_ref();
    let modes: Vec<ClockMode> = match run.opts.mode {
        ModeChoice::None => vec![],
        ModeChoice::Adt => vec![ClockMode::Adt],
        ModeChoice::Radt => vec![ClockMode::Radt],
        ModeChoice::Auto => match given {
            Some(g) => vec![g.mode],
            None => {
                let mut m = Vec::new();
                if !sets.jump_unstable.is_empty() {
                    m.push(ClockMode::Adt);
                }
                if !sets.flow_unstable.is_empty() {
                    m.push(ClockMode::Radt);
                }
                m
            }
        },
    };
    run.cert.provenance.mode = match run.opts.mode {
        ModeChoice::Auto => "auto",
        ModeChoice::Adt => "adt",
        ModeChoice::Radt => "radt",
        ModeChoice::None => "none",
    }
    .into();
    let mut last = None;
    for mode in modes {
        let explicit: Vec<ClockEntry> = given.filter(|g| g.mode == mode).map(|g| g.entries.clone()).unwrap_or_default();
        let mut spec = fill_entries(certs, sets, mode, &explicit, run.opts.margin);
        let aug = augment_certs(certs, &spec).map_err(|e| Stop::Inconclusive("augment".into(), e.to_string()))?;
        let ok = small_gain_holds(&gains(&aug, form)?, &grid).map_err(|e| Stop::Inconclusive("small_gain".into(), e.to_string()))?;
        if !ok {
            // Pull defaulted L's back between the sign change and the bound.
            for k in 0..spec.entries.len() {
                if explicit.iter().any(|e| e.i == spec.entries[k].i) {
                    continue;
                }
                let i = spec.entries[k].i - 1;
                let floor = default_l(&certs[i], mode, 0.0).unwrap();
                if let Ok(Some(sup)) = l_bound(certs, &spec, k, form, &grid) {
                    if sup.is_finite() && sup > floor {
                        let filled = fill_entries(certs, sets, mode, &[], (sup - floor) / 2.0);
                        if let Some(e) = filled.entries.iter().find(|e| e.i == i + 1) {
                            spec.entries[k] = *e;
                        }
                    }
                }
            }
            let aug = augment_certs(certs, &spec).map_err(|e| Stop::Inconclusive("augment".into(), e.to_string()))?;
            let ok = small_gain_holds(&gains(&aug, form)?, &grid).map_err(|e| Stop::Inconclusive("small_gain".into(), e.to_string()))?;
            if !ok && run.opts.mode == ModeChoice::Auto && given.is_none() {
                last = Some(spec);
                continue;
            }
        }
        tune_rates(&mut spec, &explicit, certs, form, &grid, run.spec.omega_path.as_deref());
        return Ok(Some(spec));
    }
    Ok(last)
}

/// Composite rates the augmented certificates would yield, without
/// building or checking the composite.
fn predicted_rates(aug: &[LyapCert], form: GainForm, grid: &LogGrid, path: Option<&[ScalarFn]>) -> Option<(f64, f64)> {
    let g = GainStructure::from_certs(aug, form).ok()?;
    if all_linear(aug) && path.is_none() {
        let s = linear_omega_path(&g.linear_matrix()?).ok()?;
        return compose_exponential(aug, &s).ok().map(|c| (c.c, c.d));
    }
    let path = match path {
        Some(p) => OmegaPath { components: p.to_vec() },
        None => power_law_omega_path(&g, grid).ok()?,
    };
    power_path_rates(aug, &path)
}

/// Log-size of the solution class the clocks and the default dwell choice
/// leave; negative when it holds no complete solution.
fn class_score(spec: &ClockSpec, (c, d): (f64, f64)) -> f64 {
    let region = dwell_region(c, d);
    if region == DwellRegion::EmptyForComplete {
        return f64::NEG_INFINITY;
    }
    let mut rate = f64::INFINITY;
    let mut gap = f64::INFINITY;
    for e in &spec.entries {
        rate = rate.min(e.delta.unwrap_or(f64::INFINITY));
        gap = gap.min(e.delta_star.unwrap_or(f64::INFINITY));
    }
    match region.default_choice() {
        Some(DwellChoice::Adt(p)) => rate = rate.min(p.delta),
        Some(DwellChoice::Radt(p)) => gap = gap.min(p.delta_star),
        None => {}
    }
    // A missing side is unconstrained; count it as very permissive.
    let side = |x: f64| if x.is_finite() { x.ln() } else { 10.0 };
    side(rate) + side(gap)
}

/// Rescan each defaulted `δ` (or `δ*`) over a geometric ladder and keep
/// the value giving the largest class. `L` and hence the gains do not
/// depend on it, so only the recovered rates move.
fn tune_rates(spec: &mut ClockSpec, explicit: &[ClockEntry], certs: &[LyapCert], form: GainForm, grid: &LogGrid, path: Option<&[ScalarFn]>) {
    let score = |s: &ClockSpec| {
        augment_certs(certs, s)
            .ok()
            .and_then(|aug| predicted_rates(&aug, form, grid, path))
            .map_or(f64::NEG_INFINITY, |r| class_score(s, r))
    };
    for k in 0..spec.entries.len() {
        if explicit.iter().any(|e| e.i == spec.entries[k].i) {
            continue;
        }
        let mut best = (score(spec), spec.entries[k]);
        let base = spec.entries[k];
        for m in -40..=24 {
            let f = 2f64.powf(m as f64 / 8.0);
            let mut trial = spec.clone();
            let e = &mut trial.entries[k];
            e.delta = base.delta.map(|x| x * f);
            e.delta_star = base.delta_star.map(|x| x * f);
            let sc = score(&trial);
            if sc > best.0 + 1e-12 {
                best = (sc, trial.entries[k]);
            }
        }
        spec.entries[k] = best.1;
    }
}

fn l_bounds(run: &Run, certs: &[LyapCert], spec: &ClockSpec) -> Vec<LBound> {
    (0..spec.entries.len())
        .map(|k| {
            let b = l_bound(certs, spec, k, run.spec.gain_form, &run.opts.grid).ok().flatten();
            LBound {
                subsystem: spec.entries[k].i,
                sup: b.filter(|x| x.is_finite()),
                blocked: b.is_none(),
            }
        })
        .collect()
}

fn all_linear(certs: &[LyapCert]) -> bool {
    let n = certs.len();
    certs.iter().all(|c| {
        let (f, j) = c.gain_rows(n);
        c.rates().is_some() && f.iter().chain(&j).all(|g| g.linear_coefficient().is_some())
    })
}

fn body(run: &mut Run, net: &Interconnection, certs: &[LyapCert]) -> Step<Outcome> {
    let plan = run.spec.plan();
    let grid = run.opts.grid;
    let form = run.spec.gain_form;
    let input_err = |e: PipelineError| Stop::Inconclusive("input".into(), e.to_string());

    run.step("validate");
    let sys = compile(net).map_err(input_err)?;
    run.check_subsystems("validate", &sys, certs, &plan, true)?;

    run.step("classify");
    let exponential = certs.iter().all(|c| c.rates().is_some());
    let (aug_net, aug_certs) = if exponential {
        let sets = classify(certs).map_err(|e| Stop::Inconclusive("classify".into(), e.to_string()))?;
        run.cert.index_sets = Some(IndexReport::from(&sets));
        run.step("augment");
        match choose_augmentation(run, certs, &sets)? {
            Some(spec) => {
                let (n2, c2) = build_augmented_network(net, certs, &spec)
                    .map_err(|e| Stop::Inconclusive("augment".into(), e.to_string()))?;
                run.cert.l_bounds = l_bounds(run, certs, &spec);
                for e in &spec.entries {
                    let mode = match spec.mode {
                        ClockMode::Adt => "ADT",
                        ClockMode::Radt => "RADT",
                    };
                    run.note(format!("subsystem {} augmented with an {mode} clock, L = {}", e.i, e.l));
                }
                run.cert.augmentation = Some(spec);
                (n2, c2)
            }
            None => (net.clone(), certs.to_vec()),
        }
    } else {
        run.note("general rates: no dwell-time analysis, composite must decay on its own");
        (net.clone(), certs.to_vec())
    };
    let aug_sys = compile(&aug_net).map_err(input_err)?;
    if !aug_net.clocks.is_empty() {
        run.check_subsystems("augment", &aug_sys, &aug_certs, &plan, false)?;
    }

    run.step("small_gain");
    let g = gains(&aug_certs, form)?;
    let sg = small_gain_check(&g, &grid).map_err(|e| Stop::Inconclusive("small_gain".into(), e.to_string()))?;
    let pass = sg.pass;
    run.cert.small_gain = Some(sg);
    if !pass {
        let bound = run.cert.l_bounds.iter().filter_map(|b| b.sup.map(|s| format!("L{} < {s}", b.subsystem))).collect::<Vec<_>>();
        let why = if bound.is_empty() {
            "small-gain condition fails".to_string()
        } else {
            format!("small-gain condition fails; it needs {}", bound.join(", "))
        };
        return inconclusive("small_gain", why);
    }

    run.step("compose");
    let (composite, c, d) = if all_linear(&aug_certs) && run.spec.omega_path.is_none() {
        let m = g.linear_matrix().expect("linear gains");
        let s = linear_omega_path(&m).map_err(|e| Stop::Inconclusive("omega_path".into(), e.to_string()))?;
        let path = OmegaPath::linear(&s);
        let rep = validate_omega_path(&path, &g, &grid).map_err(|e| Stop::Inconclusive("omega_path".into(), e.to_string()))?;
        run.cert.omega = Some(OmegaSummary { components: path.components.clone(), automatic: true, report: rep });
        let comp = compose_exponential(&aug_certs, &s).map_err(|e| Stop::Inconclusive("compose".into(), e.to_string()))?;
        run.cert.composition = Some(Composition::ScaledMax);
        if let Some(pf) = comp.pf_bound {
            run.note(format!("jump rate {} against the spectral bound {pf}", comp.d));
        }
        (comp.cert, comp.c, comp.d)
    } else {
        let (path, automatic) = match &run.spec.omega_path {
            Some(p) => (OmegaPath { components: p.clone() }, false),
            None => (
                power_law_omega_path(&g, &grid).map_err(|e| Stop::Inconclusive("omega_path".into(), e.to_string()))?,
                true,
            ),
        };
        let rep = validate_omega_path(&path, &g, &grid).map_err(|e| Stop::Inconclusive("omega_path".into(), e.to_string()))?;
        let ok = rep.pass;
        if rep.assumed {
            run.note("Ω-path has DSL components; its derivative bounds are assumed, not checked");
        }
        run.cert.omega = Some(OmegaSummary { components: path.components.clone(), automatic, report: rep });
        if !ok {
            return inconclusive("omega_path", "Γ(σ(r)) < σ(r) fails on the grid");
        }
        let comp = compose_lyapunov(&aug_certs, &path).map_err(|e| Stop::Inconclusive("compose".into(), e.to_string()))?;
        run.cert.composition = Some(Composition::PathMax);
        match exponential_rates(&comp, &grid) {
            Some((c, d)) => match power_path_rates(&aug_certs, &path) {
                // Closed form, accepted only where the sampled slopes agree.
                Some((c2, d2)) if (c2 - c).abs() <= 1e-9 * c.abs().max(1.0) && (d2 - d).abs() <= 1e-9 * d.abs().max(1.0) => {
                    (comp, c2, d2)
                }
                Some((c2, d2)) => {
                    return inconclusive("compose", format!("closed-form rates ({c2}, {d2}) disagree with sampled ({c}, {d})"))
                }
                None => (comp, c, d),
            },
            None if !exponential => {
                let decays = grid.points().all(|r| {
                    comp.flow_rate.phi().eval(r).is_ok_and(|v| v > 0.0) && comp.jump_rate.alpha().eval(r).is_ok_and(|v| v < r)
                });
                run.cert.composite = Some(comp.clone());
                run.check_composite(&aug_sys, &comp, &plan)?;
                if !decays {
                    return inconclusive("region", "composite rates are neither exponential nor decaying on the grid");
                }
                run.step("region");
                let gas = net.input_dim == 0;
                run.cert.property = Some(if gas { Property::PreGas } else { Property::PreIss });
                run.cert.verdict = if gas { Verdict::CertifiedGas } else { Verdict::CertifiedIss };
                run.note("composite flows and jumps both decay: no dwell-time restriction");
                return Ok(Outcome { certificate: run.cert.clone(), network: aug_net, certs: aug_certs });
            }
            None => return inconclusive("compose", "composite rates are not exponential on the grid"),
        }
    };
    // The certificate states the recovered rates; the falsifiers check them as stated.
    let mut composite = composite;
    composite.flow_rate = FlowRate::Exponential(c);
    composite.jump_rate = JumpRate::Exponential(d);
    run.cert.composite = Some(composite.clone());
    run.cert.rates = Some(Rates { c, d });
    run.note(format!("composite rates c = {c}, d = {d}"));
    run.check_composite(&aug_sys, &composite, &plan)?;

    run.step("region");
    let region = dwell_region(c, d);
    run.cert.dwell_region = Some(region);
    if region == DwellRegion::EmptyForComplete {
        return inconclusive("region", "both composite rates are nonpositive: no complete solution is covered");
    }
    let choice = match (run.spec.dwell_choice, region.default_choice()) {
        (Some(ch), _) => Some(ch),
        (None, def) => def,
    };
    if let Some(ch) = &choice {
        if !region.contains(ch) {
            return inconclusive("region", format!("dwell choice {ch:?} lies outside the region {region:?}"));
        }
    }
    let Some(window) = window_for(c, d, choice.as_ref()) else {
        return inconclusive("region", "no window realizes the dwell choice");
    };
    run.cert.dwell_choice = choice.filter(|_| region != DwellRegion::Unrestricted);
    run.cert.window = Some(window);
    let chi = ScalarFn::max_of(vec![composite.external_gain.clone(), composite.jump_external().clone()]);
    let chi = if chi.is_zero() { ScalarFn::zero() } else { chi };
    let est = build_iss_estimate(c, d, window, &composite.psi1, &composite.psi2, &chi)
        .map_err(|e| Stop::Inconclusive("region".into(), e.to_string()))?;
    run.cert.estimate = Some(est);

    let mut class = Vec::new();
    for clock in &aug_net.clocks {
        let origin = format!("clock of subsystem {}", clock.owner + 1);
        class.push(match clock.kind {
            crate::system::ClockKind::Adt(p) => Constraint::Adt { delta: p.delta, n0: p.n0, origin },
            crate::system::ClockKind::Radt(p) => Constraint::Radt { delta_star: p.delta_star, n0_star: p.n0_star, origin },
        });
    }
    match run.cert.dwell_choice {
        Some(DwellChoice::Adt(p)) => class.push(Constraint::Adt { delta: p.delta, n0: p.n0, origin: "composite".into() }),
        Some(DwellChoice::Radt(p)) => {
            class.push(Constraint::Radt { delta_star: p.delta_star, n0_star: p.n0_star, origin: "composite".into() })
        }
        None => {}
    }
    let gas = net.input_dim == 0;
    if class.is_empty() {
        run.cert.verdict = if gas { Verdict::CertifiedGas } else { Verdict::CertifiedIss };
        run.cert.property = Some(if gas { Property::PreGas } else { Property::PreIss });
        run.note("no dwell-time restriction");
    } else {
        // Average jump rates at most δ and gaps at most δ* coexist iff 1/δ ≤ δ*.
        let max_rate = class
            .iter()
            .filter_map(|k| if let Constraint::Adt { delta, .. } = k { Some(*delta) } else { None })
            .fold(f64::INFINITY, f64::min);
        let max_gap = class
            .iter()
            .filter_map(|k| if let Constraint::Radt { delta_star, .. } = k { Some(*delta_star) } else { None })
            .fold(f64::INFINITY, f64::min);
        let feasible = max_rate * max_gap >= 1.0;
        run.cert.class_admits_complete = Some(feasible);
        if !feasible {
            run.note("the dwell conditions together admit no complete solution");
        }
        run.cert.verdict = Verdict::CertifiedForSolutionClass;
        run.cert.property = Some(if gas { Property::Gas } else { Property::Iss });
        let parts: Vec<String> = class
            .iter()
            .map(|k| match k {
                Constraint::Adt { delta, n0, .. } => format!("ADT({delta}, {n0})"),
                Constraint::Radt { delta_star, n0_star, .. } => format!("RADT({delta_star}, {n0_star})"),
            })
            .collect();
        run.note(format!("{} for solutions in {}", if gas { "GAS" } else { "ISS" }, parts.join(" ∧ ")));
    }
    run.cert.solution_class = class;
    Ok(Outcome { certificate: run.cert.clone(), network: aug_net, certs: aug_certs })
}

/// Classify, augment, check small gain, compose, and pick a dwell region;
/// every claim is re-checked by the falsifiers before it is emitted.
/// Errors are reserved for malformed input.
pub fn run_pipeline(spec: &NetworkSpec, opts: &RunOptions) -> Result<Outcome, PipelineError> {
    spec.validate()?;
    let net = spec.interconnection();
    let certs = spec.certificates();
    let sys = compile(&net)?;
    for (i, c) in certs.iter().enumerate() {
        c.bind(&sys, i).map_err(|e| PipelineError::Spec(e.to_string()))?;
    }
    let mut run = Run {
        spec,
        opts: *opts,
        cert: Certificate {
            verdict: Verdict::Inconclusive,
            property: None,
            solution_class: Vec::new(),
            class_admits_complete: None,
            rates: None,
            dwell_region: None,
            dwell_choice: None,
            window: None,
            estimate: None,
            composite: None,
            composition: None,
            index_sets: None,
            augmentation: None,
            small_gain: None,
            l_bounds: Vec::new(),
            omega: None,
            checks: Vec::new(),
            failed_step: None,
            reason: None,
            summary: Vec::new(),
            provenance: Provenance {
                steps: Vec::new(),
                samples: spec.samples,
                gain_form: spec.gain_form,
                grid: (opts.grid.lo, opts.grid.hi, opts.grid.n),
                mode: String::new(),
            },
        },
    };
    match body(&mut run, &net, &certs) {
        Ok(out) => Ok(out),
        Err(stop) => {
            let (verdict, step, why) = match stop {
                Stop::Refuted(s, w) => (Verdict::Refuted, s, w),
                Stop::Inconclusive(s, w) => (Verdict::Inconclusive, s, w),
            };
            run.cert.verdict = verdict;
            run.cert.property = None;
            run.cert.solution_class.clear();
            run.cert.failed_step = Some(step);
            run.note(why.clone());
            run.cert.reason = Some(why);
            let (network, certs) = match &run.cert.augmentation {
                Some(a) => build_augmented_network(&net, &certs, a).unwrap_or((net.clone(), certs.clone())),
                None => (net.clone(), certs.clone()),
            };
            Ok(Outcome { certificate: run.cert, network, certs })
        }
    }
}
