use std::collections::BTreeMap;
use std::fs;
use std::process::ExitCode;
use std::time::SystemTime;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use stabcert::certify::{build_certificate, certify_end_to_end, spectral_exponent, Claim, CriterionConstants, PipelineOptions};
use stabcert::domain::GridDomain;
use stabcert::feedback::{
    build_finite_rank_feedback, damping_decay_bound, damping_lambda_min, linear_spectral_c1, simulate_many,
    FeedbackOperator,
};
use stabcert::geometry::{check_thick, check_weakly_thick, SetIndicator};
use stabcert::hash::{content_hash, hash_bytes};
use stabcert::operators::{cache_dir_from_env, diagonalize, diagonalize_cached, Discretization, OperatorSpec, PotentialCondition, SpectralDecomposition};
use stabcert::probes::{falsify_weak_observability, hermite_ground_state_probe};
use stabcert::rng::trial_rng;
use stabcert::specineq::{constant_curve, fit_growth, GrowthModel};
use stabcert::Error;

use crate::output::{write_atomic, write_json, Metadata, ResultDocument, Status, SCHEMA_VERSION};
use crate::spec::{parse_centers, parse_domain, parse_potential, parse_set, SetSource};
use crate::{
    CertifyOptions, CheckThickOptions, Command, Common, ConditionArg, FeedbackKind, FeedbackOptions, ModelArg, OperatorArgs,
    OperatorKind, ProbeOptions, SimulateOptions, SpectralOptions,
};

/// Snapshot of everything that determines a run's numeric output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub domain: Option<GridDomain<f64>>,
    pub operator: Option<Value>,
    pub set: Option<SetSource>,
    pub options: Value,
}

/// What a command hands back for the result document.
struct Outcome {
    outputs: Value,
    csv: Vec<(String, String)>,
    failure: Option<String>,
}

impl Outcome {
    fn ok(outputs: Value) -> Self {
        Self { outputs, csv: vec![], failure: None }
    }

    fn with_csv(mut self, name: &str, body: String) -> Self {
        self.csv.push((name.into(), body));
        self
    }

    fn fail_if(mut self, failed: bool, reason: impl FnOnce() -> String) -> Self {
        if failed {
            self.failure = Some(reason());
        }
        self
    }
}

/// Errors that report a mathematical "no" rather than a misuse.
fn is_mathematical(err: &Error) -> bool {
    matches!(
        err,
        Error::HypothesisUnverifiable(_)
            | Error::AlreadyStable
            | Error::SingularGram { .. }
            | Error::NoDecayRate
            | Error::Instability { .. }
            | Error::BetaOutOfRange { .. }
    )
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    let math = err.chain().filter_map(|e| e.downcast_ref::<Error>()).any(is_mathematical);
    if math {
        1
    } else {
        2
    }
}

/// Shared inputs resolved from the common flags.
struct Inputs {
    config: RunConfig,
    hashes: BTreeMap<String, String>,
    domain: Option<GridDomain<f64>>,
    set: Option<SetIndicator<f64>>,
}

fn resolve(name: &str, common: &Common, options: Value, needs_domain: bool) -> Result<Inputs> {
    let domain = match (&common.domain, needs_domain) {
        (Some(text), _) => Some(parse_domain(text).context("--domain")?),
        (None, true) => bail!("--domain is required for {name}"),
        (None, false) => None,
    };
    let mut hashes = BTreeMap::new();
    let (set, source) = match &domain {
        Some(d) => {
            let (set, source) = parse_set(&common.set, d).context("--set")?;
            if let Some(h) = &source.file_hash {
                hashes.insert("set".to_string(), h.clone());
            }
            (Some(set), Some(source))
        }
        None => (None, None),
    };
    let config = RunConfig { command: name.into(), seed: common.seed, domain, operator: None, set: source, options };
    Ok(Inputs { config, hashes, domain, set })
}

fn build_operator(args: &OperatorArgs, domain: &GridDomain<f64>, inputs: &mut Inputs) -> Result<SpectralDecomposition<f64>> {
    let spec = match args.operator {
        OperatorKind::Frac => OperatorSpec::fractional(args.s, args.c),
        OperatorKind::Hermite => OperatorSpec::hermite(args.c),
        OperatorKind::Schrodinger => {
            let text = args.potential.as_deref().ok_or_else(|| anyhow!("--potential is required for the schrodinger operator"))?;
            let (potential, hash) = parse_potential(text, domain)?;
            if let Some(h) = hash {
                inputs.hashes.insert("potential".into(), h);
            }
            let condition = match args.condition {
                ConditionArg::II => PotentialCondition::Confining,
                ConditionArg::I => PotentialCondition::FormSmall {
                    delta: args.delta.ok_or_else(|| anyhow!("condition I needs --delta"))?,
                },
            };
            OperatorSpec::Schrodinger { potential, condition }
        }
    };
    inputs.config.operator = Some(serde_json::to_value(args)?);
    let disc = Discretization { stencil_half_width: args.stencil };
    let dir = cache_dir_from_env();
    diagonalize_cached(&spec, domain, disc, dir.as_deref()).context("building the operator")
}

pub fn run(command: Command) -> Result<ExitCode> {
    let started = SystemTime::now();
    let (name, common, result) = match command {
        Command::CheckThick { common, options } => {
            let r = with_inputs("check-thick", &common, &options, true, |inp| check_thick_cmd(inp, &options));
            ("check-thick", common, r)
        }
        Command::SpectralConstant { common, operator, options } => {
            let r = with_inputs("spectral-constant", &common, &options, true, |inp| spectral_cmd(inp, &operator, &options));
            ("spectral-constant", common, r)
        }
        Command::Certify { common, operator, options } => {
            let needs = options.constants.is_none();
            let r = with_inputs("certify", &common, &options, needs, |inp| certify_cmd(inp, &operator, &options));
            ("certify", common, r)
        }
        Command::FeedbackBuild { common, operator, options } => {
            let r = with_inputs("feedback-build", &common, &options, true, |inp| feedback_cmd(inp, &operator, &options));
            ("feedback-build", common, r)
        }
        Command::Simulate { common, operator, options } => {
            let r = with_inputs("simulate", &common, &options, true, |inp| simulate_cmd(inp, &operator, &options, &common));
            ("simulate", common, r)
        }
        Command::Probe { common, operator, options } => {
            let r = with_inputs("probe", &common, &options, true, |inp| probe_cmd(inp, &operator, &options));
            ("probe", common, r)
        }
    };
    let (inputs, outcome) = result?;
    let outcome = match outcome {
        Ok(o) => o,
        Err(err) if exit_code(&err) == 1 => Outcome { outputs: json!({}), csv: vec![], failure: Some(format!("{err:#}")) },
        Err(err) => return Err(err),
    };

    let mut hashes = inputs.hashes;
    hashes.insert("config".into(), content_hash(&inputs.config)?);
    let mut files = Vec::new();
    for (file, body) in &outcome.csv {
        write_atomic(&common.out.join(file), body.as_bytes())?;
        files.push(file.clone());
    }
    let status = if outcome.failure.is_some() { Status::Failed } else { Status::Ok };
    let doc = ResultDocument {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: name.into(),
        status,
        reason: outcome.failure.clone(),
        config: serde_json::to_value(&inputs.config)?,
        input_hashes: hashes,
        outputs: outcome.outputs,
        files,
        metadata: Metadata::collect(started),
    };
    let path = common.out.join(format!("{name}.json"));
    write_json(&path, &doc)?;
    match &outcome.failure {
        None => {
            println!("{name}: ok ({})", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Some(reason) => {
            println!("{name}: failed: {reason} ({})", path.display());
            Ok(ExitCode::from(1))
        }
    }
}

/// Resolves the common inputs, then runs `body`. The outer error is a usage
/// error; the inner one comes from the computation.
fn with_inputs<O: Serialize>(
    name: &str,
    common: &Common,
    options: &O,
    needs_domain: bool,
    body: impl FnOnce(&mut Inputs) -> Result<Outcome>,
) -> Result<(Inputs, Result<Outcome>)> {
    let mut inputs = resolve(name, common, serde_json::to_value(options)?, needs_domain)?;
    let outcome = body(&mut inputs);
    Ok((inputs, outcome))
}

fn domain_and_set(inputs: &Inputs) -> Result<(GridDomain<f64>, SetIndicator<f64>)> {
    let domain = inputs.domain.ok_or_else(|| anyhow!("--domain is required"))?;
    let set = inputs.set.clone().ok_or_else(|| anyhow!("--set is required"))?;
    Ok((domain, set))
}

fn check_thick_cmd(inputs: &mut Inputs, options: &CheckThickOptions) -> Result<Outcome> {
    let (_, set) = domain_and_set(inputs)?;
    let thickness = check_thick(&set, &options.sides)?;
    let weak = if options.radii.is_empty() { None } else { Some(check_weakly_thick(&set, &options.radii)?) };
    let mut csv = String::from("side_length,gamma\n");
    for s in &thickness.per_side {
        csv.push_str(&format!("{:.16e},{:.16e}\n", s.side_length, s.gamma));
    }
    let thick = thickness.is_thick;
    Ok(Outcome::ok(json!({ "thickness": thickness, "weak_thickness": weak }))
        .with_csv("thickness.csv", csv)
        .fail_if(!thick, || "set is not thick at any tested side length".into()))
}

fn spectral_cmd(inputs: &mut Inputs, op: &OperatorArgs, options: &SpectralOptions) -> Result<Outcome> {
    let (domain, set) = domain_and_set(inputs)?;
    let dec = build_operator(op, &domain, inputs)?;
    let ks: Vec<f64> = (1..=options.k_max).map(|k| k as f64).collect();
    let curve = constant_curve(&dec, &set, &ks)?;
    let model = match options.model {
        ModelArg::Exp => GrowthModel::ExpPower { a: options.a.unwrap_or_else(|| spectral_exponent(dec.spec())) },
        ModelArg::Klogk => GrowthModel::KLogK { n: domain.dim() },
    };
    let fit = fit_growth(&curve, model).ok();
    let infinite = curve.constants.iter().any(|c| !c.is_finite());
    let csv = curve.to_csv();
    Ok(Outcome::ok(json!({ "curve": curve, "fit": fit }))
        .with_csv("spectral_constant.csv", csv)
        .fail_if(infinite, || "spectral constant is infinite: the set does not observe every low mode".into()))
}

fn parse_constants(text: &str) -> Result<CriterionConstants<f64>> {
    let v: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| anyhow!("bad constant {p:?}: {e}")))
        .collect::<Result<_>>()?;
    let [c1, a, c2, b, m, delta0] = v[..] else {
        bail!("--constants needs six values c1,a,c2,b,M,delta0");
    };
    Ok(CriterionConstants::new(c1, a, c2, b, m, delta0)?)
}

fn certify_cmd(inputs: &mut Inputs, op: &OperatorArgs, options: &CertifyOptions) -> Result<Outcome> {
    if let Some(text) = &options.constants {
        let constants = parse_constants(text).context("--constants")?;
        let certificate = build_certificate(&constants)?;
        return Ok(Outcome::ok(json!({ "certificate": certificate })));
    }
    let (domain, set) = domain_and_set(inputs)?;
    let dec = build_operator(op, &domain, inputs)?;
    let pipeline = PipelineOptions {
        safety_factor: options.safety,
        recurrence_trials: options.recurrence_trials,
        tau_count: options.tau_count,
        weak_trials: options.trials,
        seed: inputs.config.seed,
    };
    let report = certify_end_to_end(&dec, &set, options.k_max, &pipeline)?;
    let passed = report.passed();
    let csv = report.hypothesis.curve.to_csv();
    Ok(Outcome::ok(json!({ "certificate": report.certificate, "claim": report.certificate.claim(), "report": report }))
        .with_csv("spectral_constant.csv", csv)
        .fail_if(!passed, || "the certificate was violated by a sampled state".into()))
}

fn feedback_summary(fb: &FeedbackOperator<f64>) -> Value {
    match fb {
        FeedbackOperator::Damping { .. } => json!({ "kind": "damping" }),
        FeedbackOperator::FiniteRank { rho, unstable_count, gram, gram_inverse, condition, .. } => json!({
            "kind": "finite_rank",
            "rho": rho,
            "N": unstable_count,
            "gram": gram.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
            "gram_inverse": gram_inverse.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
            "condition": condition,
            "norm_bound": fb.norm_bound(),
            "suggested_dt": fb.suggested_dt(),
        }),
    }
}

fn feedback_cmd(inputs: &mut Inputs, op: &OperatorArgs, options: &FeedbackOptions) -> Result<Outcome> {
    let (domain, set) = domain_and_set(inputs)?;
    let dec = build_operator(op, &domain, inputs)?;
    match options.kind {
        FeedbackKind::FiniteRank => {
            let fb = build_finite_rank_feedback(&dec, &set)?;
            let eigenvalues = &dec.eigenvalues()[..dec.range_dimension(0.0)];
            let mut out = feedback_summary(&fb);
            out["unstable_eigenvalues"] = json!(eigenvalues);
            Ok(Outcome::ok(out))
        }
        FeedbackKind::Damping => {
            if !domain.periodic() {
                bail!("the damping rate splits frequencies with |ξ| ≤ N and needs a periodic --domain");
            }
            let splitter = diagonalize(&OperatorSpec::fractional(1.0, 0.0), &domain)?;
            let c1 = linear_spectral_c1(&splitter, &set, options.n_max)?;
            let bound = damping_decay_bound(options.damping_delta, c1, 1..=options.n_max)?;
            let lambda_min = damping_lambda_min(&dec, &set)?;
            let holds = lambda_min >= bound.omega;
            Ok(Outcome::ok(json!({ "kind": "damping", "c1": c1, "bound": bound, "lambda_min": lambda_min, "holds": holds }))
                .fail_if(!holds, || format!("lambda_min = {lambda_min} is below omega = {}", bound.omega)))
        }
    }
}

fn simulate_cmd(inputs: &mut Inputs, op: &OperatorArgs, options: &SimulateOptions, common: &Common) -> Result<Outcome> {
    let (domain, set) = domain_and_set(inputs)?;
    let dec = build_operator(op, &domain, inputs)?;
    let fb = match options.kind {
        FeedbackKind::FiniteRank => build_finite_rank_feedback(&dec, &set)?,
        FeedbackKind::Damping => FeedbackOperator::Damping { e: set.clone() },
    };
    let dt = options.dt.unwrap_or_else(|| (options.t_end / 100.0).min(fb.suggested_dt()));
    if options.trajectories == 0 {
        bail!("--trajectories must be at least 1");
    }
    let initial: Vec<_> = match options.initial.as_str() {
        "random" => (0..options.trajectories)
            .map(|i| dec.random_unit(&mut trial_rng(common.seed, i as u64)))
            .collect(),
        other => {
            let j: usize = other
                .strip_prefix("mode:")
                .and_then(|j| j.parse().ok())
                .ok_or_else(|| anyhow!("--initial must be `random` or `mode:j`, got {other:?}"))?;
            if j >= dec.len() {
                bail!("mode {j} out of range (0..{})", dec.len());
            }
            vec![dec.basis_function(j); options.trajectories]
        }
    };
    let reports = simulate_many(&dec, &fb, &set, &initial, options.t_end, dt)?;
    let mut outcome = Outcome::ok(json!({
        "feedback": feedback_summary(&fb),
        "dt": dt,
        "trajectories": reports.iter().map(|r| json!({
            "fitted_omega": r.fitted_omega,
            "fitted_prefactor": r.fitted_prefactor,
            "residual": r.residual,
            "monotone_tail": r.monotone_tail(1e-12),
            "final_norm": r.norms.last(),
        })).collect::<Vec<_>>(),
    }));
    for (i, r) in reports.iter().enumerate() {
        let name = if i == 0 { "decay.csv".to_string() } else { format!("decay_{i}.csv") };
        outcome = outcome.with_csv(&name, r.to_csv());
    }
    let worst = reports.iter().map(|r| r.fitted_omega).fold(f64::INFINITY, f64::min);
    Ok(outcome.fail_if(worst <= 0.0, || format!("no decay: fitted omega = {worst}")))
}

#[derive(Deserialize)]
struct ClaimFile {
    #[serde(rename = "C")]
    c: f64,
    #[serde(rename = "T")]
    t: f64,
    alpha: f64,
}

fn probe_cmd(inputs: &mut Inputs, op: &OperatorArgs, options: &ProbeOptions) -> Result<Outcome> {
    let (domain, set) = domain_and_set(inputs)?;
    let claim = match &options.claim {
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("reading claim {}", path.display()))?;
            inputs.hashes.insert("claim".into(), hash_bytes(&bytes));
            let f: ClaimFile = serde_json::from_slice(&bytes).with_context(|| format!("parsing claim {}", path.display()))?;
            Claim::new(f.c, f.t, f.alpha)?
        }
        None => {
            let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| anyhow!("--claim or {flag} is required"));
            Claim::new(need(options.claim_c, "--claim-c")?, need(options.claim_t, "--claim-t")?, need(options.claim_alpha, "--claim-alpha")?)?
        }
    };
    let dec = build_operator(op, &domain, inputs)?;
    match op.operator {
        OperatorKind::Frac => {
            let centers = parse_centers(&options.centers, domain.dim())?;
            let report = falsify_weak_observability(&dec, &set, &claim, &centers)?;
            let violations = report.violations;
            let csv = report.to_csv(domain.dim());
            Ok(Outcome::ok(json!({ "falsification": report }))
                .with_csv("probe.csv", csv)
                .fail_if(violations > 0, || format!("claim violated at {violations} probe centre(s)")))
        }
        OperatorKind::Hermite => {
            let report = hermite_ground_state_probe(&dec, &set, &claim)?;
            let violated = report.violated;
            Ok(Outcome::ok(json!({ "ground_state": report })).fail_if(violated, || "claim violated by the ground state".into()))
        }
        OperatorKind::Schrodinger => bail!("probes exist for the frac and hermite operators"),
    }
}
