//! Subcommand schemas and runners.

use rayon::prelude::*;
use serde::Deserialize;
use tubelab::augment::{augment_rigid, augment_translates, AugmentParams, DirectionalFamily, LossMode};
use tubelab::constructions::{area_saturation, bush_example, maximal_random, spread_bushes, train_track};
use tubelab::energy::{cantor_measure, energy3, exponent_fit, mu_hat_moments, sample_curve_set, ExponentFit, SampleKind};
use tubelab::highlow::{fourier_split, heavy_ball_scale, HighLowSplit};
use tubelab::incidence::{incidence_count, richness_map, st_ratio, RichnessHistogram};
use tubelab::multiscale::{decompose_family, good_intervals, random_monotone};
use tubelab::scalar::rational_to_f64;
use tubelab::sets::{
    check_delta_set, check_dyadic_katz_tao, check_katz_tao, dyadic_katz_tao_constant, extract_uniform,
    generate_ad_regular, is_uniform, partition_katz_tao,
};
use tubelab::two_ends::{two_ends_refine, TwoEndsParams};
use tubelab::{AnyFamily, Cell, Family, LabError, Rational, Scale, Square, Tube};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{need, CurveSpec, OneOrMany, Q};
use crate::error::{invalid, CliError, CliResult};
use crate::output::{num, Chart, Series, Table};
use crate::source::SourceSpec;

/// Everything a run produces besides the provenance line.
#[derive(Debug)]
pub struct Outcome {
    pub table: Table,
    pub passed: bool,
    pub verdict: String,
    /// Extra `# ` lines written after the CSV body.
    pub notes: Vec<String>,
    pub chart: Option<Chart>,
    pub family: Option<AnyFamily>,
}

impl Outcome {
    fn new(table: Table, passed: bool, verdict: String) -> Self {
        Outcome { table, passed, verdict, notes: Vec::new(), chart: None, family: None }
    }
}

macro_rules! with_family {
    ($fam:expr, $f:ident => $body:expr) => {
        match $fam {
            AnyFamily::Intervals($f) => $body,
            AnyFamily::Squares($f) => $body,
            AnyFamily::Tubes($f) => $body,
        }
    };
}

fn q(p: i128, d: i128) -> Rational {
    Rational::new(p, d)
}

fn flag(b: bool) -> String {
    b.to_string()
}

/// Seed of the `i`-th sweep point.
fn point_seed(seed: u64, i: u64) -> u64 {
    seed.wrapping_add(i)
}

fn fit_note(fit: &ExponentFit, against: &str) -> String {
    format!(
        "fit exponent={} intercept={} residual={} slope_error={} against={against}",
        num(fit.slope),
        num(fit.intercept),
        num(fit.residual),
        num(fit.slope_error)
    )
}

fn exponent_bounds(slope: f64, max: Option<f64>, min: Option<f64>) -> bool {
    max.is_none_or(|m| slope <= m) && min.is_none_or(|m| slope >= m)
}

fn loglog(title: &str, x: &str, y: &str, points: Vec<(f64, f64)>) -> Chart {
    Chart {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
        log: true,
        series: vec![Series { name: y.into(), points }],
    }
}

// ---- gen ---------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub source: SourceSpec,
}

pub fn gen(cfg: &GenConfig, seed: u64) -> CliResult<Outcome> {
    let fam = cfg.source.build(seed)?;
    let scale = fam.scale();
    let thickness = with_family!(&fam, f => f.thickness());
    let mut table = Table::new(&["kind", "e", "T", "thickness", "size"]);
    table.push(vec![
        fam.kind().name().into(),
        scale.delta_exp().to_string(),
        scale.block_exp().to_string(),
        thickness.to_string(),
        fam.len().to_string(),
    ]);
    let verdict = format!("generated {} {} at e={}", fam.len(), fam.kind().name(), scale.delta_exp());
    let mut out = Outcome::new(table, true, verdict);
    out.family = Some(fam);
    Ok(out)
}

// ---- check -------------------------------------------------------------

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SetTest {
    Delta,
    KatzTao,
    DyadicKatzTao,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub source: SourceSpec,
    pub test: SetTest,
    pub s: Q,
    pub constant: Q,
}

pub fn check(cfg: &CheckConfig, seed: u64) -> CliResult<Outcome> {
    let fam = cfg.source.build(seed)?;
    let (s, c) = (cfg.s.0, cfg.constant.0);
    let (ok, achieved, center, radius) = with_family!(&fam, f => match cfg.test {
        SetTest::Delta => {
            let r = check_delta_set(f, &s, &c)?;
            (r.ok, r.achieved_constant, r.worst_center.to_string(), r.worst_radius_exp.to_string())
        }
        SetTest::KatzTao => {
            let r = check_katz_tao(f, &s, &c)?;
            (r.ok, r.achieved_constant, r.worst_center.to_string(), r.worst_radius_exp.to_string())
        }
        SetTest::DyadicKatzTao => {
            let (k, level) = dyadic_katz_tao_constant(f, &s);
            (check_dyadic_katz_tao(f, &s, &c), k, String::new(), level.to_string())
        }
    });
    let mut table =
        Table::new(&["kind", "size", "test", "s", "constant", "ok", "achieved_constant", "worst_center", "worst_radius_exp"]);
    let test = format!("{:?}", cfg.test);
    table.push(vec![
        fam.kind().name().into(),
        fam.len().to_string(),
        test.clone(),
        s.to_string(),
        c.to_string(),
        flag(ok),
        num(achieved),
        center,
        radius,
    ]);
    let verdict = format!(
        "{test} check with s={s}, C={c} on {} {}: {} (achieved constant {achieved:.4})",
        fam.len(),
        fam.kind().name(),
        if ok { "pass" } else { "FAIL" }
    );
    Ok(Outcome::new(table, ok, verdict))
}

// ---- incidence ---------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidenceConfig {
    pub tubes: SourceSpec,
    /// All squares of the tube scale when absent.
    pub squares: Option<SourceSpec>,
}

pub fn incidence(cfg: &IncidenceConfig, seed: u64) -> CliResult<Outcome> {
    let tubes = cfg.tubes.tubes(seed)?;
    let squares = match &cfg.squares {
        None => Family::<Square>::full_grid(tubes.scale()),
        Some(spec) => match spec.build(point_seed(seed, 1))? {
            AnyFamily::Squares(p) => p,
            other => return invalid(format!("squares source produced {}", other.kind().name())),
        },
    };
    let rep = incidence_count(&squares, &tubes)?;
    let max_richness = richness_map(&tubes).max();
    let mut table =
        Table::new(&["squares", "tubes", "incidences", "ratio", "trivial_bound", "within_trivial", "max_richness"]);
    table.push(vec![
        squares.len().to_string(),
        tubes.len().to_string(),
        rep.incidences.to_string(),
        num(rep.ratio),
        num(rep.trivial_bound),
        flag(rep.within_trivial),
        max_richness.to_string(),
    ]);
    let verdict = format!(
        "{} incidences between {} squares and {} tubes, ratio {:.4}; {}",
        rep.incidences,
        squares.len(),
        tubes.len(),
        rep.ratio,
        if rep.within_trivial { "within the trivial bound" } else { "ABOVE the trivial bound" }
    );
    Ok(Outcome::new(table, rep.within_trivial, verdict))
}

// ---- st-scan -----------------------------------------------------------

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ScanGenerator {
    MaximalRandom,
    Bush,
    TrainTrack,
    AreaSaturation,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StScanConfig {
    pub generator: ScanGenerator,
    pub e: Vec<u32>,
    pub s: Option<Q>,
    pub t: Option<Q>,
    pub seeds: Option<u32>,
    pub max_exponent: Option<f64>,
    pub min_exponent: Option<f64>,
}

fn scan_tubes(cfg: &StScanConfig, e: u32, seed: u64) -> CliResult<Family<Tube>> {
    let s = || need(&cfg.s, "s").map(|q| q.0);
    Ok(match cfg.generator {
        ScanGenerator::MaximalRandom => maximal_random(e, &s()?, seed)?.tubes,
        ScanGenerator::Bush => bush_example(e, &s()?)?.tubes,
        ScanGenerator::TrainTrack => train_track(e)?.tubes,
        ScanGenerator::AreaSaturation => area_saturation(e, &s()?, &need(&cfg.t, "t")?.0, seed)?.tubes,
    })
}

pub fn st_scan(cfg: &StScanConfig, seed: u64) -> CliResult<Outcome> {
    if cfg.e.is_empty() {
        return invalid("st-scan needs at least one value of e");
    }
    let seeds = cfg.seeds.unwrap_or(1).max(1) as u64;
    let points: Vec<(u32, u64)> = cfg.e.iter().flat_map(|&e| (0..seeds).map(move |i| (e, i))).collect();
    let results: Vec<CliResult<(u32, u64, usize, f64, u64)>> = points
        .par_iter()
        .map(|&(e, i)| {
            let tubes = scan_tubes(cfg, e, point_seed(seed, i))?;
            let st = st_ratio(&tubes);
            Ok((e, i, tubes.len(), st.max_ratio, st.argmax_r))
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        rows.push(r?);
    }
    let mut table = Table::new(&["e", "tubes", "max_st_ratio", "argmax_r", "worst_seed"]);
    let mut fit_points = Vec::new();
    for &e in &cfg.e {
        let best = rows
            .iter()
            .filter(|r| r.0 == e)
            .fold(None::<&(u32, u64, usize, f64, u64)>, |b, r| match b {
                Some(b) if b.3 >= r.3 => Some(b),
                _ => Some(r),
            })
            .expect("every e has a point");
        table.push(vec![
            e.to_string(),
            best.2.to_string(),
            num(best.3),
            best.4.to_string(),
            point_seed(seed, best.1).to_string(),
        ]);
        fit_points.push(((e as f64).exp2(), best.3));
    }
    let mut out = Outcome::new(table, true, String::new());
    if fit_points.len() >= 2 {
        let fit = exponent_fit(&fit_points)?;
        out.passed = exponent_bounds(fit.slope, cfg.max_exponent, cfg.min_exponent);
        out.notes.push(fit_note(&fit, "2^e"));
        out.verdict = format!(
            "st-scan {:?}: fitted exponent of max ST ratio vs 2^e is {:.4} over {} scales{}",
            cfg.generator,
            fit.slope,
            fit_points.len(),
            if out.passed { "" } else { " (outside the configured bounds)" }
        );
    } else {
        out.verdict = format!("st-scan {:?}: max ST ratio {:.4} at a single scale", cfg.generator, fit_points[0].1);
    }
    out.chart = Some(loglog("ST ratio sweep", "1/delta", "max ST ratio", fit_points));
    Ok(out)
}

// ---- decompose ---------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    /// Family to decompose; random functions are used when absent.
    pub source: Option<SourceSpec>,
    pub eps: OneOrMany<Q>,
    pub eps0: Option<Q>,
    /// Number of random monotone 1-Lipschitz functions per `eps`.
    pub functions: Option<u32>,
    pub n: Option<usize>,
}

pub fn decompose(cfg: &DecomposeConfig, seed: u64) -> CliResult<Outcome> {
    let eps: Vec<Rational> = cfg.eps.to_vec().into_iter().map(|q| q.0).collect();
    if eps.is_empty() {
        return invalid("decompose needs at least one eps");
    }
    match &cfg.source {
        Some(spec) => decompose_family_run(spec, &eps, cfg.eps0.map(|q| q.0), seed),
        None => decompose_functions(cfg, &eps, seed),
    }
}

fn decompose_family_run(spec: &SourceSpec, eps: &[Rational], eps0: Option<Rational>, seed: u64) -> CliResult<Outcome> {
    let fam = spec.build(seed)?;
    let mut table = Table::new(&[
        "eps",
        "layer",
        "from_level",
        "to_level",
        "dimension",
        "max_constant",
        "min_children",
        "max_children",
        "expected_children",
        "growth_ok",
    ]);
    let mut passed = true;
    let mut layers = 0;
    for ep in eps {
        let dec = match &fam {
            AnyFamily::Intervals(f) => decompose_family(f, ep, eps0.as_ref())?,
            AnyFamily::Squares(f) => decompose_family(f, ep, eps0.as_ref())?,
            AnyFamily::Tubes(_) => return invalid("decompose works on interval or square families"),
        };
        passed &= dec.first_slope_ok;
        layers += dec.layers.len();
        for (l, layer) in dec.layers.iter().enumerate() {
            passed &= layer.growth_ok;
            table.push(vec![
                ep.to_string(),
                l.to_string(),
                layer.from_level.to_string(),
                layer.to_level.to_string(),
                layer.dimension.to_string(),
                num(layer.max_constant),
                layer.min_children.to_string(),
                layer.max_children.to_string(),
                num(layer.expected_children),
                flag(layer.growth_ok),
            ]);
        }
    }
    let verdict = format!(
        "decomposed {} {} into {layers} layers over {} eps values: {}",
        fam.len(),
        fam.kind().name(),
        eps.len(),
        if passed { "all bounds hold" } else { "a layer bound FAILED" }
    );
    Ok(Outcome::new(table, passed, verdict))
}

fn decompose_functions(cfg: &DecomposeConfig, eps: &[Rational], seed: u64) -> CliResult<Outcome> {
    let count = need(&cfg.functions, "functions")? as u64;
    let n = cfg.n.unwrap_or(1024);
    let eps0 = cfg.eps0.map(|q| q.0).unwrap_or(q(4, n as i128));
    let jobs: Vec<(Rational, u64)> = eps.iter().flat_map(|&ep| (0..count).map(move |i| (ep, i))).collect();
    let results: Vec<CliResult<Vec<String>>> = jobs
        .par_iter()
        .map(|&(ep, i)| {
            let fseed = point_seed(seed, i);
            let f = random_monotone(n, fseed)?;
            let res = good_intervals(&f, &ep, &eps0);
            let (ok, intervals, message) = match res {
                Ok(p) => (true, p.len(), String::new()),
                Err(LabError::Postcondition(m)) => (false, 0, m),
                Err(e) => return Err(CliError::Lab(e)),
            };
            Ok(vec![ep.to_string(), fseed.to_string(), intervals.to_string(), flag(ok), message])
        })
        .collect();
    let mut table = Table::new(&["eps", "seed", "intervals", "ok", "failure"]);
    let mut failures = 0;
    for r in results {
        let row = r?;
        if row[3] != "true" {
            failures += 1;
        }
        table.push(row);
    }
    let verdict = format!(
        "good_intervals on {} random functions (n={n}): {failures} postcondition failures",
        jobs.len()
    );
    Ok(Outcome::new(table, failures == 0, verdict))
}

// ---- uniformize --------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformizeConfig {
    pub source: SourceSpec,
    pub s: Q,
    pub trials: Option<u32>,
}

pub fn uniformize(cfg: &UniformizeConfig, seed: u64) -> CliResult<Outcome> {
    let trials = cfg.trials.unwrap_or(1).max(1) as u64;
    let s = cfg.s.0;
    let results: Vec<CliResult<Vec<String>>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let tseed = point_seed(seed, i);
            let fam = cfg.source.build(tseed)?;
            with_family!(&fam, f => uniformize_one(f, &s, tseed))
        })
        .collect();
    let mut table = Table::new(&[
        "seed",
        "input_size",
        "uniform_size",
        "ratio",
        "guaranteed",
        "uniform_ok",
        "parts",
        "part_bound",
        "parts_ok",
    ]);
    let mut bad = 0;
    for r in results {
        let row = r?;
        if row[5] != "true" || row[8] != "true" {
            bad += 1;
        }
        table.push(row);
    }
    let verdict = format!("uniformized {trials} families: {bad} failed exact uniformity or the part bounds");
    Ok(Outcome::new(table, bad == 0, verdict))
}

fn uniformize_one<E: Cell>(f: &Family<E>, s: &Rational, seed: u64) -> CliResult<Vec<String>> {
    let ext = extract_uniform(f, seed);
    let uniform_ok = is_uniform(&ext.family) && ext.ratio >= ext.guaranteed;
    let part = partition_katz_tao(&ext.family, s)?;
    let cap = Rational::from_integer(1i128 << (2 * f.scale().block_exp()));
    let parts_ok = part.parts.len() as f64 <= part.part_bound
        && part.parts.iter().all(|p| check_dyadic_katz_tao(p, s, &cap));
    Ok(vec![
        seed.to_string(),
        f.len().to_string(),
        ext.family.len().to_string(),
        num(ext.ratio),
        num(ext.guaranteed),
        flag(uniform_ok),
        part.parts.len().to_string(),
        num(part.part_bound),
        flag(parts_ok),
    ])
}

// ---- augment -----------------------------------------------------------

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum AugmentMode {
    Translates,
    Rigid,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum LossSpec {
    Named(String),
    Power(f64),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    pub mode: AugmentMode,
    pub e: u32,
    pub s: Q,
    pub k: Option<Q>,
    pub k2: Option<Q>,
    /// `"log"` or an exponent `υ` for the loss `δ^{-υ}`.
    pub loss: Option<LossSpec>,
    pub constant: Option<Q>,
    pub retries: Option<u32>,
    pub trials: Option<u32>,
    /// Translates start from the part of an AD-regular `(δ, s)` set inside one
    /// dyadic cell of this level; `2 floor(e/4)` when absent.
    pub input_level: Option<u32>,
    pub min_success: Option<f64>,
}

pub fn augment(cfg: &AugmentConfig, seed: u64) -> CliResult<Outcome> {
    let mut params = AugmentParams::default();
    params.loss = match &cfg.loss {
        None => LossMode::Log,
        Some(LossSpec::Named(n)) if n == "log" => LossMode::Log,
        Some(LossSpec::Named(n)) => return invalid(format!("unknown loss {n:?}; use \"log\" or an exponent")),
        Some(LossSpec::Power(u)) if *u >= 0.0 => LossMode::Power(*u),
        Some(LossSpec::Power(u)) => return invalid(format!("loss exponent {u} must be nonnegative")),
    };
    if let Some(c) = cfg.constant {
        params.constant = c.0;
    }
    if let Some(r) = cfg.retries {
        params.retries = r;
    }
    let trials = cfg.trials.unwrap_or(1).max(1) as u64;
    let s = cfg.s.0;
    let k = cfg.k.map(|q| q.0).unwrap_or(Rational::from_integer(1));
    let k2 = cfg.k2.map(|q| q.0).unwrap_or(k);
    let scale = Scale::new(cfg.e, 2)?;
    let input_level = cfg.input_level.unwrap_or(cfg.e / 4 * 2);
    if input_level > cfg.e {
        return invalid(format!("input_level {input_level} exceeds e = {}", cfg.e));
    }
    let results: Vec<CliResult<Vec<String>>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let tseed = point_seed(seed, i);
            let outcome = match cfg.mode {
                AugmentMode::Translates => {
                    let cantor = generate_ad_regular(scale, &s, tseed)?;
                    let mut rng = ChaCha8Rng::seed_from_u64(tseed);
                    let root = cantor.elements()[rng.gen_range(0..cantor.len())];
                    let input = cantor.under(input_level, root.ancestor(&scale, input_level));
                    let own = check_katz_tao(&input, &s, &Rational::from_integer(1))?.achieved_constant;
                    let kk = k.max(Rational::from_integer(own.ceil() as i128));
                    augment_translates(&input, &s, &kk, &params, tseed).map(|a| {
                        (a.attempts, a.checks.all_ok(), a.family.len(), a.checks.katz_tao_constant, a.checks.max_multiplicity)
                    })
                }
                AugmentMode::Rigid => {
                    let n = scale.side();
                    let mut rng = ChaCha8Rng::seed_from_u64(tseed);
                    let start = Tube::new(rng.gen_range(0..n), rng.gen_range(0..n));
                    let base = DirectionalFamily::new(Family::new(scale, [start])?)?;
                    augment_rigid(&base, &s, &k, &k2, &params, tseed).map(|a| {
                        (a.attempts, a.all_ok(), a.tubes.tubes.len(), a.fibers.katz_tao_constant, a.max_multiplicity)
                    })
                }
            };
            let (attempts, ok, size, kt, mult) = match outcome {
                Ok(v) => v,
                Err(LabError::RetriesExhausted { attempts, .. }) => (attempts, false, 0, 0.0, 0),
                Err(e) => return Err(CliError::Lab(e)),
            };
            Ok(vec![
                tseed.to_string(),
                attempts.to_string(),
                flag(ok),
                size.to_string(),
                num(kt),
                mult.to_string(),
            ])
        })
        .collect();
    let mut table = Table::new(&["seed", "attempts", "ok", "size", "katz_tao_constant", "max_multiplicity"]);
    let mut successes = 0u64;
    for r in results {
        let row = r?;
        if row[2] == "true" {
            successes += 1;
        }
        table.push(row);
    }
    let min_success = cfg.min_success.unwrap_or(0.99);
    let rate = successes as f64 / trials as f64;
    let passed = rate >= min_success;
    let verdict = format!(
        "{:?} augmentation at e={}: {successes}/{trials} trials passed all checks within {} retries",
        cfg.mode, cfg.e, params.retries
    );
    Ok(Outcome::new(table, passed, verdict))
}

// ---- two-ends ----------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoEndsConfig {
    pub e: u32,
    pub s: Q,
    pub eps: Q,
    pub fraction: Option<f64>,
    pub seeds: Option<u32>,
    pub kappa: Option<Q>,
    pub constant: Option<Q>,
}

pub fn two_ends(cfg: &TwoEndsConfig, seed: u64) -> CliResult<Outcome> {
    let seeds = cfg.seeds.unwrap_or(1).max(1) as u64;
    let fraction = cfg.fraction.unwrap_or(0.25);
    let mut params = TwoEndsParams { kappa: cfg.kappa.map(|q| q.0), ..TwoEndsParams::default() };
    if let Some(c) = cfg.constant {
        params.constant = c.0;
    }
    let results: Vec<CliResult<Vec<String>>> = (0..seeds)
        .into_par_iter()
        .map(|i| {
            let tseed = point_seed(seed, i);
            let sys = spread_bushes(cfg.e, &cfg.s.0, fraction, tseed)?;
            let r = two_ends_refine(&sys, &cfg.eps.0, &params)?;
            let dc = r.stages.iter().all(|st| st.double_count_ok());
            let ok = r.all_ok() && dc;
            Ok(vec![
                tseed.to_string(),
                sys.len().to_string(),
                sys.union().len().to_string(),
                sys.incidences().to_string(),
                num(r.hypothesis_ratio),
                r.rho_level.to_string(),
                flag(r.rho_ok),
                num(r.two_ends_constant),
                flag(r.two_ends_ok),
                num(r.mass_constant),
                flag(r.mass_ok),
                num(r.density_constant),
                flag(r.density_ok),
                flag(dc),
                flag(ok),
            ])
        })
        .collect();
    let mut table = Table::new(&[
        "seed",
        "squares",
        "tubes",
        "incidences",
        "hypothesis_ratio",
        "rho_level",
        "rho_ok",
        "two_ends_constant",
        "two_ends_ok",
        "mass_constant",
        "mass_ok",
        "density_constant",
        "density_ok",
        "double_count_ok",
        "all_ok",
    ]);
    let mut good = 0;
    for r in results {
        let row = r?;
        if row[14] == "true" {
            good += 1;
        }
        table.push(row);
    }
    let verdict = format!("two-ends refinement at e={}: {good}/{seeds} systems passed every postcondition", cfg.e);
    Ok(Outcome::new(table, good == seeds, verdict))
}

// ---- highlow -----------------------------------------------------------

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum HighLowMode {
    Split,
    Heavy,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HighLowConfig {
    pub mode: HighLowMode,
    /// Tube source; maximal random families at `e`, `s` when absent.
    pub source: Option<SourceSpec>,
    pub e: Option<u32>,
    pub s: Option<Q>,
    pub seeds: Option<u32>,
    pub beta: f64,
    pub r0: Option<u64>,
    pub upsilon: Option<f64>,
    pub c: Option<f64>,
    pub max_ratio: Option<f64>,
    pub max_delta_tilde: Option<f64>,
}

pub fn highlow(cfg: &HighLowConfig, seed: u64) -> CliResult<Outcome> {
    match cfg.mode {
        HighLowMode::Split => highlow_split(cfg, seed),
        HighLowMode::Heavy => highlow_heavy(cfg, seed),
    }
}

fn highlow_split(cfg: &HighLowConfig, seed: u64) -> CliResult<Outcome> {
    let seeds = cfg.seeds.unwrap_or(1).max(1) as u64;
    let max_ratio = cfg.max_ratio.unwrap_or(16.0);
    let mut table = Table::new(&[
        "seed",
        "tubes",
        "total_energy",
        "low_energy",
        "high_energy",
        "ratio",
        "cross_term",
        "band_energy",
        "low_sup",
    ]);
    let mut worst = 0.0f64;
    for i in 0..seeds {
        let tseed = point_seed(seed, i);
        let tubes = match &cfg.source {
            Some(spec) => spec.tubes(tseed)?,
            None => maximal_random(need(&cfg.e, "e")?, &need(&cfg.s, "s")?.0, tseed)?.tubes,
        };
        let sp: HighLowSplit<f64> = fourier_split(&tubes, cfg.beta)?;
        worst = worst.max(sp.ratio);
        table.push(vec![
            tseed.to_string(),
            tubes.len().to_string(),
            num(sp.total_energy),
            num(sp.low_energy),
            num(sp.high_energy),
            num(sp.ratio),
            num(sp.cross_term),
            num(sp.band_energy),
            num(sp.low_sup),
        ]);
    }
    let passed = worst <= max_ratio;
    let verdict = format!("high-low split over {seeds} families: worst high-energy ratio {worst:.5} (limit {max_ratio})");
    Ok(Outcome::new(table, passed, verdict))
}

fn highlow_heavy(cfg: &HighLowConfig, seed: u64) -> CliResult<Outcome> {
    let spec = cfg.source.as_ref().ok_or_else(|| CliError::Invalid("heavy mode needs a [source]".into()))?;
    let tubes = spec.tubes(seed)?;
    let e = tubes.scale().delta_exp();
    let r0 = cfg.r0.unwrap_or(1u64 << (e / 2).saturating_sub(1));
    let hb = heavy_ball_scale(&tubes, r0, cfg.beta, cfg.upsilon.unwrap_or(0.0), cfg.c.unwrap_or(0.125))?;
    let limit = cfg.max_delta_tilde.unwrap_or(4.0 * (-(e as f64) / 2.0).exp2());
    let mut table = Table::new(&["level", "delta_tilde", "heavy_fraction"]);
    for &(j, frac) in &hb.candidates {
        table.push(vec![j.to_string(), num((-(j as f64)).exp2()), num(frac)]);
    }
    let passed = hb.delta_tilde().is_some_and(|d| d <= limit);
    let verdict = match hb.delta_tilde() {
        Some(d) => format!(
            "heavy balls at delta~={d} over {} rich squares (r0={r0}, limit {limit}){}",
            hb.rich_squares,
            if hb.hypothesis_ok { "" } else { "; richness hypothesis not met" }
        ),
        None => format!("no heavy scale found over {} rich squares (r0={r0})", hb.rich_squares),
    };
    Ok(Outcome::new(table, passed, verdict))
}

// ---- energy ------------------------------------------------------------

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SampleName {
    Cantor,
    Frostman,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    pub curve: CurveSpec,
    pub s: Q,
    pub e: Vec<u32>,
    pub c: Option<f64>,
    pub sample: Option<SampleName>,
    pub max_exponent: Option<f64>,
}

pub fn energy(cfg: &EnergyConfig, seed: u64) -> CliResult<Outcome> {
    let curve = cfg.curve.curve()?;
    let kind = match cfg.sample.unwrap_or(SampleName::Cantor) {
        SampleName::Cantor => SampleKind::Cantor,
        SampleName::Frostman => SampleKind::RandomFrostman,
    };
    let c = cfg.c.unwrap_or(1.0);
    let sf = rational_to_f64(&cfg.s.0);
    let results: Vec<CliResult<(u32, usize, u64, u64, f64)>> = cfg
        .e
        .par_iter()
        .map(|&e| {
            let set = sample_curve_set(curve.clone(), e, &cfg.s.0, seed, kind)?;
            let en = energy3(&set, c)?;
            Ok((e, set.points.len(), en.lower, en.upper, set.frostman.constant))
        })
        .collect();
    let mut table = Table::new(&["e", "points", "lower", "upper", "frostman_constant"]);
    let mut pts = Vec::new();
    for r in results {
        let (e, m, lo, hi, fc) = r?;
        table.push(vec![e.to_string(), m.to_string(), lo.to_string(), hi.to_string(), num(fc)]);
        pts.push(((e as f64 * sf).exp2(), hi as f64));
    }
    let mut out = Outcome::new(table, true, String::new());
    if pts.len() >= 2 {
        let fit = exponent_fit(&pts)?;
        out.passed = exponent_bounds(fit.slope, cfg.max_exponent, None);
        out.notes.push(fit_note(&fit, "delta^-s"));
        out.verdict = format!("energy3 upper bound grows like (1/delta^s)^{:.4} over {} scales", fit.slope, pts.len());
    } else {
        out.verdict = format!("energy3 bracket [{}, {}]", out.table.rows[0][2], out.table.rows[0][3]);
    }
    out.chart = Some(loglog("Additive energy", "1/delta^s", "energy3 upper", pts));
    Ok(out)
}

// ---- l6 ----------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct L6Config {
    pub curve: CurveSpec,
    pub s: Q,
    /// Resolution exponents, `R = 2^k`.
    pub k: Vec<u32>,
    pub p: Option<u32>,
    pub parseval_tolerance: Option<f64>,
    pub max_exponent: Option<f64>,
}

pub fn l6(cfg: &L6Config, _seed: u64) -> CliResult<Outcome> {
    let curve = cfg.curve.curve()?;
    let p = cfg.p.unwrap_or(6);
    let tol = cfg.parseval_tolerance.unwrap_or(1e-9);
    let mut table = Table::new(&["k", "R", "moment", "l2", "parseval_rhs", "parseval_error", "sup"]);
    let mut pts = Vec::new();
    let mut parseval_ok = true;
    for &k in &cfg.k {
        let mu = cantor_measure(&curve, &cfg.s.0, k)?;
        let m = mu_hat_moments(&mu, k, p)?;
        parseval_ok &= m.parseval_error <= tol;
        table.push(vec![
            k.to_string(),
            (1u64 << k).to_string(),
            num(m.moment),
            num(m.l2),
            num(m.parseval_rhs),
            num(m.parseval_error),
            num(m.sup),
        ]);
        pts.push(((k as f64).exp2(), m.moment));
    }
    let mut out = Outcome::new(table, parseval_ok, String::new());
    if pts.len() >= 2 {
        let fit = exponent_fit(&pts)?;
        out.passed &= exponent_bounds(fit.slope, cfg.max_exponent, None);
        out.notes.push(fit_note(&fit, "R"));
        out.verdict = format!(
            "L^{p} moment grows like R^{:.4}; Parseval {}",
            fit.slope,
            if parseval_ok { "holds" } else { "FAILS" }
        );
    } else {
        out.verdict = format!("L^{p} moment {}; Parseval {}", out.table.rows.first().map_or("", |r| &r[2]), parseval_ok);
    }
    out.chart = Some(loglog("Fourier moment sweep", "R", "moment", pts));
    Ok(out)
}

// ---- sharpness ---------------------------------------------------------

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Construction {
    Bush,
    TrainTrack,
    AreaSaturation,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharpnessConfig {
    pub construction: Construction,
    pub e: u32,
    pub s: Option<Q>,
    pub t: Option<Q>,
    /// Constant of the richness reference curve (bush) or of the failed set check (train track).
    pub constant: Option<Q>,
    pub min_covered: Option<f64>,
}

fn histogram_table(hist: &RichnessHistogram, reference: impl Fn(u64) -> Option<f64>) -> (Table, bool, Vec<(f64, f64)>) {
    let mut table = Table::new(&["r", "count", "reference", "ok"]);
    let mut all = true;
    let mut pts = Vec::new();
    for &(r, count) in &hist.bins {
        let (refv, ok) = match reference(r) {
            Some(v) => (num(v), count as f64 >= v),
            None => (String::new(), true),
        };
        all &= ok;
        table.push(vec![r.to_string(), count.to_string(), refv, flag(ok)]);
        pts.push((r as f64, count as f64));
    }
    (table, all, pts)
}

pub fn sharpness(cfg: &SharpnessConfig, seed: u64) -> CliResult<Outcome> {
    let e = cfg.e;
    let s = || need(&cfg.s, "s").map(|q| q.0);
    let (tubes, table, passed, verdict, pts) = match cfg.construction {
        Construction::Bush => {
            let s = s()?;
            let sf = rational_to_f64(&s);
            let b = bush_example(e, &s)?;
            let c = cfg.constant.map(|q| rational_to_f64(&q.0)).unwrap_or(0.125);
            let top = (e as f64 * sf).exp2() / 4.0;
            let hist = RichnessHistogram::from_map(&richness_map(&b.tubes));
            let (table, ok, pts) = histogram_table(&hist, |r| {
                (r >= 2 && r as f64 <= top).then(|| c * (2.0 * e as f64).exp2() * (r as f64).powf(-(sf + 1.0) / sf))
            });
            let verdict = format!(
                "bush s={s}, e={e}: {} tubes; richness counts {} the reference c delta^-2 r^-(s+1)/s for r in [2, {top:.1}]",
                b.tubes.len(),
                if ok { "meet" } else { "do NOT meet" }
            );
            (b.tubes, table, ok, verdict, pts)
        }
        Construction::TrainTrack => {
            let t = train_track(e)?;
            let c = cfg.constant.map(|q| q.0).unwrap_or(Rational::from_integer(8));
            let map = richness_map(&t.tubes);
            let (lo, hi) = (1u32 << (e / 2).saturating_sub(2), 1u32 << (e / 2 + 2));
            let rich = map.nonzero().filter(|&(_, r)| r >= lo && r <= hi).count();
            let need_rich = (1usize << e) / 4;
            let ds = check_delta_set(&t.directions, &q(1, 2), &c)?;
            let hist = RichnessHistogram::from_map(&map);
            let (table, _, pts) = histogram_table(&hist, |_| None);
            let ok = rich >= need_rich && !ds.ok;
            let verdict = format!(
                "train track e={e}: {rich} squares with richness in [{lo}, {hi}] (need {need_rich}); direction set {} the (1/2, {c}) check with constant {:.4}",
                if ds.ok { "PASSES" } else { "fails" },
                ds.achieved_constant
            );
            (t.tubes, table, ok, verdict, pts)
        }
        Construction::AreaSaturation => {
            let a = area_saturation(e, &s()?, &need(&cfg.t, "t")?.0, seed)?;
            let min_covered = cfg.min_covered.unwrap_or(0.5);
            let hist = RichnessHistogram::from_map(&richness_map(&a.tubes));
            let (table, _, pts) = histogram_table(&hist, |_| None);
            let ok = a.covered >= min_covered;
            let verdict = format!(
                "area saturation e={e}: covered fraction {:.4}, typical fraction {:.4}, mean richness {:.3}",
                a.covered, a.typical, a.mean_richness
            );
            (a.tubes, table, ok, verdict, pts)
        }
    };
    let mut out = Outcome::new(table, passed, verdict);
    out.chart = Some(loglog("Richness histogram", "r", "squares", pts));
    out.family = Some(tubes.into());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;

    fn parse<T: serde::de::DeserializeOwned>(text: &str) -> T {
        Config::parse(text).unwrap().command().unwrap()
    }

    #[test]
    fn st_scan_rows_follow_e() {
        let cfg: StScanConfig = parse("generator = \"maximal-random\"\ne = [4, 6]\ns = \"1/2\"\n");
        let out = st_scan(&cfg, 1).unwrap();
        assert_eq!(out.table.rows.len(), 2);
        assert_eq!(out.table.rows[0][0], "4");
        assert_eq!(out.notes.len(), 1);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let r: CliResult<CheckConfig> = Config::parse("test = \"delta\"\ns = 1\nconstant = 1\nbogus = 2\n").unwrap().command();
        assert!(r.is_err());
    }

    #[test]
    fn train_track_check_fails_at_e12() {
        let cfg: CheckConfig = parse(
            "test = \"delta\"\ns = \"1/2\"\nconstant = 8\n[source]\ngenerator = \"train-track\"\ne = 12\npart = \"directions\"\n",
        );
        let out = check(&cfg, 0).unwrap();
        assert!(!out.passed);
    }
}
