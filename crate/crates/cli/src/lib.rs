//! Scenario parsing and the computations behind each subcommand. Every
//! command renders to a `String` so output is identical whether written to a
//! file or to stdout.

pub mod scenario;

use std::fmt::Write as _;

use jscsi::channel::{capacity, critical_rate_with_step, is_gallager_symmetric, Which};
use jscsi::joint::{
    both_si_bounds, check_constant_optimal_input, game_solve, matching_check_with,
    separation_from_curves, theorem1_bounds, JointBoundResult, JointCurves, SeparationCase,
};
use jscsi::optim::rate_grid;
use jscsi::probkit::{conditional_entropy, fmt_bits};
use jscsi::sim::{build_codebook_with, exact_error_probability, CompositionRule, Decoder};
use jscsi::{ConditionalDistribution, Distribution, Error, JointDistribution};
use thiserror::Error as ThisError;

pub use scenario::{parse_scenario, Scenario};

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration, 3 for budgets, 4 for a violated premise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(Error::BudgetExceeded { .. } | Error::GridTooLarge { .. }) => 3,
            CliError::Core(Error::PremiseViolated(_)) => 4,
            CliError::Core(
                Error::EmptyAlphabet
                | Error::InvalidProbability { .. }
                | Error::NotNormalized { .. }
                | Error::RowNotNormalized { .. }
                | Error::RaggedMatrix { .. }
                | Error::AlphabetMismatch { .. }
                | Error::InvalidParameter(_),
            ) => 2,
            _ => 1,
        }
    }
}

pub const CURVE_HEADER: &str = "R,e_L,e_U,E_r,E_sp,e_U_plus_E_r,e_U_plus_E_sp";

struct Instance {
    p: JointDistribution,
    w: ConditionalDistribution,
}

fn instance(scenario: &Scenario) -> Result<Instance, CliError> {
    Ok(Instance {
        p: scenario.source_distribution()?,
        w: scenario.channel_distribution()?,
    })
}

fn check_step(step: f64) -> Result<(), CliError> {
    if step > 0.0 && step <= 0.5 {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "rate step must lie in (0, 0.5], got {step}"
        )))
    }
}

/// Curves on `step, 2·step, …` up to the larger of `log2|A|` and `log2|X|`.
pub fn curve_table(p: &JointDistribution, w: &ConditionalDistribution, step: f64) -> JointCurves {
    let top = (p.rows() as f64).log2().max((w.inputs() as f64).log2());
    JointCurves::on_rates(p, w, rate_grid(step, top))
}

fn render_curves(curves: &JointCurves) -> String {
    let mut out = String::new();
    out.push_str(CURVE_HEADER);
    out.push('\n');
    let lower = curves.lower_sum();
    let upper = curves.upper_sum();
    for i in 0..curves.rates.len() {
        let row = [
            curves.rates[i],
            curves.e_lower[i],
            curves.e_upper[i],
            curves.random[i],
            curves.sphere[i],
            lower[i],
            upper[i],
        ];
        let cells: Vec<String> = row.iter().map(|&v| fmt_bits(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn curves(scenario: &Scenario, rate_step: Option<f64>) -> Result<String, CliError> {
    let step = rate_step.unwrap_or(scenario.grids.rate_step);
    check_step(step)?;
    let inst = instance(scenario)?;
    Ok(render_curves(&curve_table(&inst.p, &inst.w, step)))
}

fn fmt_dist(d: &Distribution) -> String {
    let cells: Vec<String> = d.probs().iter().map(|&v| fmt_bits(v)).collect();
    format!("[{}]", cells.join(", "))
}

fn case_name(case: SeparationCase) -> &'static str {
    match case {
        SeparationCase::Equal => "equal",
        SeparationCase::JointBelow => "joint-below",
        SeparationCase::JointAbove => "joint-above",
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ReportOptions {
    /// Run the nested composition optimization.
    pub nested: bool,
    /// Require the constant-optimal-input premise; fail with exit code 4 otherwise.
    pub flat: bool,
    pub rate_step: Option<f64>,
}

struct Lines(String);

impl Lines {
    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        writeln!(self.0, "{key} = {value}").expect("writing to a String cannot fail");
    }

    fn num(&mut self, key: &str, value: f64) {
        self.kv(key, fmt_bits(value));
    }
}

fn bounds_lines(out: &mut Lines, prefix: &str, r: &JointBoundResult) {
    out.num(&format!("{prefix}.lower"), r.lower);
    out.num(&format!("{prefix}.upper"), r.upper);
    out.num(&format!("{prefix}.r_star_lower"), r.r_star_lower);
    out.num(&format!("{prefix}.r_star_upper"), r.r_star_upper);
    if let Some(q) = &r.q_a_star {
        out.kv(&format!("{prefix}.q_a_star"), fmt_dist(q));
    }
    if let Some(s) = &r.s_x_star {
        out.kv(&format!("{prefix}.s_x_star"), fmt_dist(s));
    }
}

pub fn report(scenario: &Scenario, opts: ReportOptions) -> Result<String, CliError> {
    let step = opts.rate_step.unwrap_or(scenario.grids.rate_step);
    check_step(step)?;
    let Instance { p, w } = instance(scenario)?;
    let premise_holds = match check_constant_optimal_input(&w, step) {
        Ok(()) => true,
        Err(Error::PremiseViolated(_)) if !opts.flat => false,
        Err(e) => return Err(e.into()),
    };
    let mut out = Lines(String::new());
    let c = capacity(&w);
    let h = conditional_entropy(&p);
    out.num("capacity", c);
    out.num("conditional_entropy", h);
    out.kv("reliable", h < c);
    out.kv("gallager_symmetric", is_gallager_symmetric(&w).symmetric);
    out.kv(
        "flat_premise",
        if premise_holds { "holds" } else { "violated" },
    );
    let critical = critical_rate_with_step(&w, step).ok();
    match &critical {
        Some(cr) => {
            out.num("critical_rate", cr.value);
            out.num("critical_rate_slope", cr.analytic);
        }
        None => out.kv("critical_rate", "none"),
    }

    let curves = JointCurves::new(&p, &w, step);
    let flat = both_si_bounds(&p, &w, step)?;
    let (flat, diag) = matching_check_with(flat, &w, scenario.tolerances.matching);
    bounds_lines(&mut out, "both_si", &flat);
    out.kv("matched", diag.matched);
    let complete = diag.complete_characterization && premise_holds;
    out.kv("complete_characterization", complete);
    if complete {
        out.num("exponent", flat.lower);
        out.kv(
            "statement",
            "E = E_both = e_U(R*) + E_r(R*): side information at the encoder does not increase the exponent",
        );
    } else {
        out.kv(
            "statement",
            "the exponent lies in [both_si.lower, both_si.upper]",
        );
    }

    let sep = separation_from_curves(&curves, step);
    out.num("separate.exponent", sep.separate);
    out.num("separate.rate", sep.r_bar);
    out.kv("separation.case", case_name(sep.case));
    out.num("separation.margin", sep.margin);
    out.kv("separation.claim_holds", sep.claim_holds);

    let grid = scenario.grid_options();
    let grid = jscsi::joint::GridOptions {
        rate_step: step,
        ..grid
    };
    let game = game_solve(&p, &w, Which::Random, &grid)?;
    out.num("game.maxmin", game.maxmin_value);
    out.num("game.minmax", game.minmax_value);
    out.num("game.gap", game.gap);
    out.num("game.max_inner_gap", game.max_inner_gap);
    out.kv("game.interchange_certified", game.interchange_certified);

    if opts.nested || !premise_holds {
        let nested = theorem1_bounds(&p, &w, &grid)?;
        bounds_lines(&mut out, "nested", &nested);
        out.num("nested.gap", nested.upper - nested.lower);
        let agree = (nested.lower - flat.lower).abs() <= scenario.tolerances.agreement
            && (nested.upper - flat.upper).abs() <= scenario.tolerances.agreement;
        out.kv("nested.agrees_with_flat", agree);
    }
    Ok(out.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecoderChoice {
    Mmi,
    Map,
    Both,
}

fn decoder_name(d: Decoder) -> &'static str {
    match d {
        Decoder::MmiSi => "mmi",
        Decoder::Map => "map",
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// One row per (seed, decoder) with exact error probabilities, then
/// min/median/max per decoder as comment lines.
pub fn simulate(
    scenario: &Scenario,
    n: usize,
    seeds: u64,
    choice: DecoderChoice,
) -> Result<String, CliError> {
    if seeds == 0 {
        return Err(CliError::Config("at least one seed is needed".into()));
    }
    let Instance { p, w } = instance(scenario)?;
    let rule = match scenario.simulation.rule {
        scenario::Rule::Optimized => CompositionRule::Optimized,
        scenario::Rule::Uniform => CompositionRule::Uniform,
    };
    let decoders: &[Decoder] = match choice {
        DecoderChoice::Mmi => &[Decoder::MmiSi],
        DecoderChoice::Map => &[Decoder::Map],
        DecoderChoice::Both => &[Decoder::Map, Decoder::MmiSi],
    };
    let mut out = String::from("seed,decoder,n,error_probability,empirical_exponent\n");
    let mut per_decoder: Vec<Vec<f64>> = vec![Vec::new(); decoders.len()];
    for seed in scenario.seed..scenario.seed + seeds {
        let cb = build_codebook_with(n, &p, &w, rule, seed, scenario.simulation.max_blocklength)?;
        for (k, &d) in decoders.iter().enumerate() {
            let r = exact_error_probability(&cb, d, &p, &w)?;
            per_decoder[k].push(r.error_probability);
            writeln!(
                out,
                "{seed},{},{n},{},{}",
                decoder_name(d),
                fmt_bits(r.error_probability),
                fmt_bits(r.empirical_exponent)
            )
            .expect("writing to a String cannot fail");
        }
    }
    for (k, &d) in decoders.iter().enumerate() {
        let mut v = per_decoder[k].clone();
        v.sort_by(f64::total_cmp);
        writeln!(
            out,
            "# {} error_probability min = {}, median = {}, max = {}",
            decoder_name(d),
            fmt_bits(v[0]),
            fmt_bits(median(&v)),
            fmt_bits(v[v.len() - 1])
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}

fn annotate(out: &mut String, key: &str, value: impl std::fmt::Display) {
    writeln!(out, "# {key} = {value}").expect("writing to a String cannot fail");
}

/// Source and channel exponent curves of the reference scenario, headed by
/// `H(A|B)`, capacity and the critical rate.
pub fn reproduce_fig1(rate_step: Option<f64>) -> Result<String, CliError> {
    let scenario = Scenario::reference();
    let step = rate_step.unwrap_or(scenario.grids.rate_step);
    check_step(step)?;
    let Instance { p, w } = instance(&scenario)?;
    let mut out = String::new();
    annotate(
        &mut out,
        "conditional_entropy",
        fmt_bits(conditional_entropy(&p)),
    );
    annotate(&mut out, "capacity", fmt_bits(capacity(&w)));
    let cr = critical_rate_with_step(&w, step)?;
    annotate(&mut out, "critical_rate", fmt_bits(cr.value));
    out.push_str(&render_curves(&curve_table(&p, &w, step)));
    Ok(out)
}

/// The same curves headed by both minima over `R`, their minimizers, the
/// separate-coding exponent and the matching verdict.
pub fn reproduce_fig2(rate_step: Option<f64>) -> Result<String, CliError> {
    let scenario = Scenario::reference();
    let step = rate_step.unwrap_or(scenario.grids.rate_step);
    check_step(step)?;
    let Instance { p, w } = instance(&scenario)?;
    let curves = JointCurves::new(&p, &w, step);
    let bounds = both_si_bounds(&p, &w, step)?;
    let sep = separation_from_curves(&curves, step);
    let mut out = String::new();
    annotate(&mut out, "min_e_U_plus_E_r", fmt_bits(bounds.lower));
    annotate(
        &mut out,
        "argmin_e_U_plus_E_r",
        fmt_bits(bounds.r_star_lower),
    );
    annotate(&mut out, "min_e_U_plus_E_sp", fmt_bits(bounds.upper));
    annotate(
        &mut out,
        "argmin_e_U_plus_E_sp",
        fmt_bits(bounds.r_star_upper),
    );
    annotate(&mut out, "matched", bounds.matched);
    annotate(
        &mut out,
        "complete_characterization",
        bounds.complete_characterization,
    );
    annotate(&mut out, "separate_exponent", fmt_bits(sep.separate));
    annotate(&mut out, "separate_rate", fmt_bits(sep.r_bar));
    annotate(&mut out, "separation_case", case_name(sep.case));
    out.push_str(&render_curves(&curve_table(&p, &w, step)));
    Ok(out)
}
