//! One runner per subcommand. Runners are pure: they turn a configuration
//! into records and tables without touching the file system.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::lattice::{cover_disjointness_check, dangerous_cover, LatticeBox, Site};
use crate::localization::{yeung_oono_experiment, EnsembleConfig};
use crate::msa::{
    coupling_check, estimate_bad_pair_prob, ladder, minimal_log_l0, next_scale, pair_resonance_check, wegner_check,
    CouplingOutcome,
};
use crate::stats::{Estimate, Executor};
use crate::weight::{quasi_metric_constant, verify_quasi_metric};

/// Subcommands of the `msalab` binary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Command {
    QuasiMetric,
    Wegner,
    PairResonance,
    BadPair,
    Coupling,
    Ladder,
    EigenDecay,
    CoverCheck,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::QuasiMetric,
        Command::Wegner,
        Command::PairResonance,
        Command::BadPair,
        Command::Coupling,
        Command::Ladder,
        Command::EigenDecay,
        Command::CoverCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::QuasiMetric => "quasi-metric",
            Command::Wegner => "wegner",
            Command::PairResonance => "pair-resonance",
            Command::BadPair => "bad-pair",
            Command::Coupling => "coupling",
            Command::Ladder => "ladder",
            Command::EigenDecay => "eigen-decay",
            Command::CoverCheck => "cover-check",
        }
    }

    /// Whether the command draws disorder realisations.
    pub fn is_monte_carlo(self) -> bool {
        matches!(
            self,
            Command::Wegner | Command::PairResonance | Command::BadPair | Command::Coupling | Command::EigenDecay
        )
    }
}

/// A CSV table: header plus rows of already formatted cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    /// Appended to the command name to form the file name.
    pub suffix: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(suffix: &'static str, header: &[&'static str]) -> Self {
        Table {
            suffix,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Everything a runner produces.
#[derive(Clone, Debug, Default)]
pub struct CommandOutput {
    pub records: Vec<Value>,
    pub tables: Vec<Table>,
    /// Human-readable lines for the terminal.
    pub summary: Vec<String>,
}

fn record<T: Serialize>(kind: &str, value: &T) -> Value {
    let mut v = serde_json::to_value(value).expect("records serialise");
    if let Value::Object(map) = &mut v {
        map.insert("record".into(), Value::String(kind.into()));
    }
    v
}

/// The serialised name of a unit enum variant.
fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn estimate_cells(e: Option<Estimate>) -> [String; 3] {
    match e {
        Some(e) => [e.frequency.to_string(), e.ci_low.to_string(), e.ci_high.to_string()],
        None => [String::new(), String::new(), String::new()],
    }
}

/// Deterministic generator for auxiliary draws keyed by `(seed, stream)`.
fn keyed_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<CommandOutput> {
    cfg.validate()?;
    let executor = Executor::new(cfg.execution.workers)?;
    match cmd {
        Command::QuasiMetric => quasi_metric(cfg),
        Command::Wegner => wegner(cfg, &executor),
        Command::PairResonance => pair_resonance(cfg, &executor),
        Command::BadPair => bad_pair(cfg, &executor),
        Command::Coupling => coupling(cfg, &executor),
        Command::Ladder => run_ladder(cfg),
        Command::EigenDecay => eigen_decay(cfg, &executor),
        Command::CoverCheck => cover_check(cfg, &executor),
    }
}

/// Random positive `n`-tuples: half log-uniform over `[e^{−4}, e^{12}]`,
/// half scattered around the diagonal maximiser `x0`.
pub fn quasi_metric_samples(rho: f64, n: u32, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let x0 = match quasi_metric_constant(rho, n)?.x0 {
        x if x > 0.0 => x,
        _ => 1.0,
    };
    let mut rng = keyed_rng(seed ^ rho.to_bits(), u64::from(n));
    Ok((0..count)
        .map(|k| {
            (0..n)
                .map(|_| {
                    if k % 2 == 0 {
                        rng.random_range(-4.0..12.0f64).exp()
                    } else {
                        x0 * rng.random_range(-0.5..0.5f64).exp()
                    }
                })
                .collect()
        })
        .collect())
}

fn quasi_metric(cfg: &RunConfig) -> Result<CommandOutput> {
    let qc = &cfg.quasi_metric;
    if qc.n_max < 1 {
        return Err(Error::invalid("n_max≥1", "n_max = 0"));
    }
    let rhos = qc.rho.clone().unwrap_or_else(|| vec![cfg.msa.rho]);
    let mut out = CommandOutput::default();
    let mut table = Table::new(
        "",
        &["rho", "n", "x0", "sup_f", "c_rho", "checked", "violations"],
    );
    for &rho in &rhos {
        for n in 1..=qc.n_max {
            let samples = quasi_metric_samples(rho, n, qc.samples, cfg.execution.seed)?;
            let report = verify_quasi_metric(rho, n, &samples)?;
            let c = &report.certificate;
            table.push(vec![
                rho.to_string(),
                n.to_string(),
                c.x0.to_string(),
                c.sup_f.to_string(),
                c.c_rho.to_string(),
                report.checked.to_string(),
                report.violations.len().to_string(),
            ]);
            out.records.push(json!({
                "record": "certificate",
                "rho": rho,
                "n": n,
                "x0": c.x0,
                "sup_f": c.sup_f,
                "c_rho": c.c_rho,
                "checked": report.checked,
                "violations": report.violations.len(),
            }));
            out.summary.push(format!(
                "ρ={rho} n={n}: x0={:.6} supF={:.6} C={:.6} violations={}/{}",
                c.x0,
                c.sup_f,
                c.c_rho,
                report.violations.len(),
                report.checked
            ));
        }
    }
    out.tables.push(table);
    Ok(out)
}

fn wegner(cfg: &RunConfig, executor: &Executor) -> Result<CommandOutput> {
    let wc = &cfg.wegner;
    let model = cfg.model()?;
    let d = cfg.model.d;
    let spec = &model.disorder;
    let radii = wc.radii.clone().unwrap_or_else(|| vec![cfg.geometry.big_l]);
    let mut out = CommandOutput::default();
    let mut table = Table::new(
        "",
        &["L", "E", "eps", "trials", "hits", "frequency", "ci_low", "ci_high", "bound", "within"],
    );
    for &radius in &radii {
        let eps = match wc.eps {
            Some(e) => e,
            None => {
                let n = (2.0 * radius as f64 + 1.0).powi(d as i32);
                (wc.target_bound * spec.beta / (2f64.powf(spec.lambda) * n.powf(1.0 + spec.lambda)))
                    .powf(1.0 / spec.lambda)
            }
        };
        let r = wegner_check(
            &model,
            d,
            radius,
            wc.energy,
            eps,
            0..cfg.execution.trials,
            cfg.execution.seed,
            executor,
        )?;
        let [f, lo, hi] = estimate_cells(r.estimate);
        table.push(vec![
            radius.to_string(),
            r.energy.to_string(),
            r.eps.to_string(),
            r.tally.trials.to_string(),
            r.tally.hits.to_string(),
            f,
            lo,
            hi,
            r.bound.to_string(),
            (r.frequency_within && r.ci_within).to_string(),
        ]);
        out.summary.push(format!(
            "L={radius} ε={:.3e}: {}/{} hits, bound {:.4}, {}",
            r.eps,
            r.tally.hits,
            r.tally.trials,
            r.bound,
            if r.frequency_within && r.ci_within { "within" } else { "EXCEEDS" }
        ));
        out.records.push(record("wegner", &r));
    }
    out.tables.push(table);
    Ok(out)
}

fn pair_resonance(cfg: &RunConfig, executor: &Executor) -> Result<CommandOutput> {
    let model = cfg.model()?;
    let r = pair_resonance_check(
        &model,
        cfg.model.d,
        cfg.geometry.big_l,
        cfg.geometry.l,
        &cfg.weights()?,
        0..cfg.execution.trials,
        cfg.execution.seed,
        cfg.pair_resonance.diagnostic,
        executor,
    )?;
    let mut table = Table::new(
        "",
        &[
            "L", "l", "threshold", "trials", "hits", "frequency", "ci_low", "ci_high", "event_bound", "pair_bound",
        ],
    );
    let [f, lo, hi] = estimate_cells(r.estimate);
    table.push(vec![
        r.big_l.to_string(),
        r.l.to_string(),
        r.threshold.to_string(),
        r.tally.trials.to_string(),
        r.tally.hits.to_string(),
        f,
        lo,
        hi,
        r.event_bound.to_string(),
        r.pair_bound.to_string(),
    ]);
    let vacuous = |v: bool| if v { " (vacuous)" } else { "" };
    let summary = vec![format!(
        "L={} l={} threshold {:.3e}: {}/{} near-coincidences; event bound {:.3e}{}, pair bound {:.3e}{}",
        r.big_l,
        r.l,
        r.threshold,
        r.tally.hits,
        r.tally.trials,
        r.event_bound,
        vacuous(r.event_bound_vacuous),
        r.pair_bound,
        vacuous(r.pair_bound_vacuous)
    )];
    Ok(CommandOutput {
        records: vec![record("pair-resonance", &r)],
        tables: vec![table],
        summary,
    })
}

fn bad_pair(cfg: &RunConfig, executor: &Executor) -> Result<CommandOutput> {
    let model = cfg.model()?;
    let weights = cfg.weights()?;
    let energies = cfg.msa.energy_grid()?;
    let radii = cfg.bad_pair.radii.clone().unwrap_or_else(|| vec![cfg.geometry.l]);
    let mut out = CommandOutput::default();
    let mut table = Table::new("", &["L", "kappa", "trials", "hits", "frequency", "ci_low", "ci_high"]);
    for &radius in &radii {
        let r = estimate_bad_pair_prob(
            &model,
            cfg.model.d,
            radius,
            cfg.bad_pair.kappa,
            &energies,
            &weights,
            0..cfg.execution.trials,
            cfg.execution.seed,
            executor,
        )?;
        let [f, lo, hi] = estimate_cells(r.estimate);
        table.push(vec![
            radius.to_string(),
            r.kappa.to_string(),
            r.tally.trials.to_string(),
            r.tally.hits.to_string(),
            f,
            lo,
            hi,
        ]);
        out.summary.push(match r.estimate {
            Some(e) => format!(
                "L={radius}: both-bad frequency {:.4} [{:.4}, {:.4}] over {} trials",
                e.frequency, e.ci_low, e.ci_high, r.tally.trials
            ),
            None => format!("L={radius}: no data"),
        });
        let mut v = record("bad-pair", &r);
        if r.estimate.is_none() {
            v["no_data"] = Value::Bool(true);
        }
        out.records.push(v);
    }
    out.tables.push(table);
    Ok(out)
}

fn coupling(cfg: &RunConfig, executor: &Executor) -> Result<CommandOutput> {
    let model = cfg.model()?;
    let params = cfg.msa_params()?;
    let l = cfg.geometry.l;
    let big_l = next_scale(l as u64, params.alpha)?.scale as i64;
    let energies = cfg.msa.energy_grid()?;
    let b = LatticeBox::centered(cfg.model.d, big_l)?;
    let kappa = cfg.coupling.kappa;
    let seed = cfg.execution.seed;
    let reports = executor.run(0..cfg.execution.trials, |t| {
        let sample = model.sample(&b, seed, t)?;
        let energy = energies[(t % energies.len() as u64) as usize];
        coupling_check(&sample, energy, l, kappa, &params).map(|r| (t, r))
    })?;
    let mut out = CommandOutput::default();
    let mut table = Table::new(
        "",
        &[
            "trial",
            "energy",
            "outcome",
            "outer_log_margin",
            "subcube_log_margin",
            "bad_cubes",
            "kappa_prime",
            "conclusion_log_excess",
            "tightest",
        ],
    );
    let (mut pass, mut counter, mut na) = (0u64, 0u64, 0u64);
    for (t, r) in &reports {
        match r.outcome {
            CouplingOutcome::Pass => pass += 1,
            CouplingOutcome::Counterexample => counter += 1,
            CouplingOutcome::NotApplicable => na += 1,
        }
        table.push(vec![
            t.to_string(),
            r.energy.to_string(),
            label(&r.outcome),
            r.outer_log_margin.to_string(),
            opt(r.subcube_log_margin),
            r.bad_cubes.len().to_string(),
            r.kappa_prime.to_string(),
            opt(r.conclusion_log_excess),
            label(&r.tightest),
        ]);
        let mut v = record("coupling", r);
        v["trial"] = json!(t);
        out.records.push(v);
    }
    out.summary.push(format!(
        "l={l} L={big_l} κ={kappa}: {pass} pass, {counter} counterexample, {na} not applicable"
    ));
    out.records.push(json!({
        "record": "coupling-summary",
        "l": l,
        "L": big_l,
        "kappa": kappa,
        "pass": pass,
        "counterexample": counter,
        "not_applicable": na,
    }));
    out.tables.push(table);
    Ok(out)
}

fn run_ladder(cfg: &RunConfig) -> Result<CommandOutput> {
    let params = cfg.msa_params()?;
    let minimal = minimal_log_l0(&params)?;
    let log_l0 = match (cfg.ladder.log_l0, minimal) {
        (Some(v), _) => v,
        (None, Some(m)) => m,
        (None, None) => {
            return Err(Error::NumericalRefusal(
                "no admissible log L₀: the series bound never drops below κ₀ − κ∞".into(),
            ))
        }
    };
    let lad = ladder(&params, log_l0, cfg.ladder.horizon)?;
    let mut out = CommandOutput::default();
    out.summary.push(format!(
        "minimal log L₀ = {}; ladder from log L₀ = {log_l0}: valid = {}, total loss {:.6e} ≤ series bound {:.6e}, κ_{} = {:.6}",
        opt(minimal),
        lad.valid,
        lad.total_loss,
        lad.series_bound,
        lad.horizon,
        lad.kappa[lad.horizon]
    ));
    out.records.push(json!({
        "record": "ladder-summary",
        "minimal_log_l0": minimal,
        "log_l0": log_l0,
        "horizon": lad.horizon,
        "valid": lad.valid,
        "total_loss": lad.total_loss,
        "series_bound": lad.series_bound,
        "series_valid": lad.series_valid,
    }));
    let mut table = Table::new("", &["s", "log_l", "kappa"]);
    for (s, (&ll, &k)) in lad.log_l.iter().zip(&lad.kappa).enumerate() {
        table.push(vec![s.to_string(), ll.to_string(), k.to_string()]);
        out.records.push(json!({"record": "ladder-step", "s": s, "log_l": ll, "kappa": k}));
    }
    out.tables.push(table);
    Ok(out)
}

fn eigen_decay(cfg: &RunConfig, executor: &Executor) -> Result<CommandOutput> {
    let ec = &cfg.eigen_decay;
    let proven = cfg
        .msa_params()
        .ok()
        .map(|p| p.kappa_inf / (2.0 * p.alpha.powf(p.weights.rho)));
    let ens = EnsembleConfig {
        model: cfg.model()?,
        d: cfg.model.d,
        radius: ec.radius,
        seed: cfg.execution.seed,
        realisations: cfg.execution.trials,
        energy_window: ec.window.map(|w| (w[0], w[1])),
        edge_fraction: ec.edge_fraction,
        fit: ec.fit_options(),
        plot: ec.plot_selection(),
        hopping: cfg.model.kernel.log_power_params(),
        proven_coefficient: proven,
    };
    let report = yeung_oono_experiment(&ens, executor)?;
    let mut out = CommandOutput::default();
    let mut table = Table::new("", &["seed", "eigenvalue", "center", "c", "rho_fit", "r2", "PR"]);
    for row in &report.rows {
        table.push(vec![
            row.seed.to_string(),
            row.eigenvalue.to_string(),
            row.center.to_string(),
            opt(row.c),
            opt(row.rho_fit),
            opt(row.r2),
            row.participation_ratio.to_string(),
        ]);
        out.records.push(record("eigenvector", row));
    }
    let mut plot = Table::new("-plot", &["seed", "eigenvalue", "x", "y"]);
    for series in &report.plots {
        for &(x, y) in &series.points {
            plot.push(vec![
                series.seed.to_string(),
                series.eigenvalue.to_string(),
                x.to_string(),
                y.to_string(),
            ]);
        }
    }
    let s = &report.summary;
    let q = |q: Option<crate::localization::Quartiles>| {
        q.map_or("n/a".to_string(), |q| format!("{:.4} [{:.4}, {:.4}]", q.median, q.q1, q.q3))
    };
    out.summary.push(format!(
        "{} states selected, {} fitted, {} without fit",
        s.selected, s.fitted, s.no_fit
    ));
    out.summary.push(format!("median c   {}  (hopping γ = {})", q(s.c), opt(s.hopping_gamma)));
    out.summary.push(format!("median ρ   {}  (hopping ρ = {})", q(s.rho_fit), opt(s.hopping_rho)));
    out.summary.push(format!("median r²  {}", q(s.r2)));
    out.summary.push(format!("median PR  {}", q(s.participation_ratio)));
    out.summary.push(format!("proven coefficient κ∞/(2α^ρ) = {}", opt(s.proven_coefficient)));
    out.records.push(record("ensemble-summary", s));
    out.tables.push(table);
    out.tables.push(plot);
    Ok(out)
}

/// Three bad centers inside `B_{L−l}(0)`: the first uniform, the others
/// uniform or near the previous one with equal odds, so that close pairs
/// and triples occur often.
pub fn random_bad_triple(d: usize, big_l: i64, l: i64, rng: &mut ChaCha8Rng) -> Vec<Site> {
    let reach = big_l - l;
    let mut centers: Vec<Site> = Vec::with_capacity(3);
    for k in 0..3 {
        let coords = (0..d)
            .map(|axis| {
                if k > 0 && rng.random_bool(0.5) {
                    let prev = centers[k - 1].coords()[axis];
                    (prev + rng.random_range(-10 * l..=10 * l)).clamp(-reach, reach)
                } else {
                    rng.random_range(-reach..=reach)
                }
            })
            .collect();
        centers.push(Site(coords));
    }
    centers
}

fn cover_check(cfg: &RunConfig, executor: &Executor) -> Result<CommandOutput> {
    let cc = &cfg.cover_check;
    let dims = cc.d.clone().unwrap_or_else(|| vec![cfg.model.d]);
    let ls = cc.l.clone().unwrap_or_else(|| vec![cfg.geometry.l]);
    let seed = cfg.execution.seed;
    let mut out = CommandOutput::default();
    let mut table = Table::new("", &["d", "l", "L", "trials", "failures", "max_total_diameter"]);
    for &d in &dims {
        for &l in &ls {
            let big_l = cc.parent_factor * l;
            let parent = LatticeBox::centered(d, big_l)?;
            let stream = (d as u64) << 32 | l as u64;
            let results = executor.run(0..cfg.execution.trials, |t| {
                let mut rng = keyed_rng(seed ^ t.wrapping_mul(0x9E37_79B9_7F4A_7C15), stream);
                let bad = random_bad_triple(d, big_l, l, &mut rng);
                let cover = dangerous_cover(&bad, &parent, l)?;
                let inv = cover.invariants();
                let disjoint = cover_disjointness_check(&cover, &bad, l);
                Ok((t, bad, cover.total_diameter(), inv, disjoint))
            })?;
            let mut failures = 0;
            let mut max_diam = 0;
            for (t, bad, diam, inv, disjoint) in results {
                max_diam = max_diam.max(diam);
                if !(inv.all() && disjoint.passed()) {
                    failures += 1;
                    out.records.push(json!({
                        "record": "cover-failure",
                        "d": d, "l": l, "trial": t,
                        "bad_centers": bad,
                        "invariants": inv,
                        "disjointness": disjoint,
                    }));
                }
            }
            out.records.push(json!({
                "record": "cover-summary",
                "d": d, "l": l, "L": big_l,
                "trials": cfg.execution.trials,
                "failures": failures,
                "max_total_diameter": max_diam,
            }));
            table.push(vec![
                d.to_string(),
                l.to_string(),
                big_l.to_string(),
                cfg.execution.trials.to_string(),
                failures.to_string(),
                max_diam.to_string(),
            ]);
            out.summary.push(format!(
                "d={d} l={l} L={big_l}: {failures} failures in {} triples, max Σdiam {max_diam} (budget {})",
                cfg.execution.trials,
                52 * l
            ));
        }
    }
    out.tables.push(table);
    Ok(out)
}
