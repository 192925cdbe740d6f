use clap::{Args, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use igc_core::deformed::{
    escort_expect, make_deformed, phi_arc, phi_chart, phi_connected, phi_cumulant,
    phi_cumulant_derivative, phi_norm, phi_patch, DeformedLogarithm, EscortDensity,
};
use igc_core::exp_manifold::{chart_m, chart_s, cumulant, divergence, kl, patch_e, pythagorean_check};
use igc_core::flows::{e_geodesic, heat_flow, integrate_e_chart, natural_gradient_ascent, VectorField};
use igc_core::hilbert::hilbert_transport;
use igc_core::orlicz::{
    dual_norm, luxemburg_norm, modular, steepness_profile, NonSteepExample, ProfileRow,
    YoungFunction,
};
use igc_core::special::Extended;
use igc_core::{expect, random, Density, HilbertVector, Measure, RandomVariable, TangentVector};

use crate::report::{Check, Outcome, Table};
use crate::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(igc_core::Error),
}

impl CliError {
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            CliError::Usage(_) | CliError::Core(igc_core::Error::InvalidArgument(_))
        )
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<igc_core::Error> for CliError {
    fn from(e: igc_core::Error) -> Self {
        CliError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

const DEFAULT_ALPHAS: [f64; 11] = [-1.2, -1.1, -1.0, -0.75, -0.5, 0.0, 0.5, 0.75, 1.0, 1.1, 1.2];

#[derive(Debug, Clone, Args, Serialize)]
pub struct SizeArgs {
    /// Number of support points.
    #[arg(long, default_value_t = 8)]
    pub n: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SteepnessArgs {
    /// Shift `a > 0` of the density `(a+x)^{-3/2} e^{-x}`.
    #[arg(long, default_value_t = 0.5)]
    pub a: f64,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = DEFAULT_ALPHAS)]
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrliczCommand {
    /// `α ↦ E_p[Φ(α u)]` for the non-steep example on a Gauss–Legendre grid.
    Profile {
        #[arg(long, default_value_t = 0.5)]
        a: f64,
        /// Young function: a, b, c, two, cosh (append `*` for the conjugate).
        #[arg(long, default_value = "cosh")]
        phi: String,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = DEFAULT_ALPHAS)]
        alphas: Vec<f64>,
        /// Truncation length of the grid.
        #[arg(long, default_value_t = 120.0)]
        length: f64,
        #[arg(long, default_value_t = 240)]
        panels: usize,
        #[arg(long, default_value_t = 12)]
        order: usize,
    },
    /// Luxemburg and dual norms of a random variable under a random density.
    Norm {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value = "cosh")]
        phi: String,
    },
}

impl OrliczCommand {
    pub fn name(&self) -> &'static str {
        match self {
            OrliczCommand::Profile { .. } => "profile",
            OrliczCommand::Norm { .. } => "norm",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TransportArgs {
    /// Run the seeded isometry and round-trip trials.
    #[arg(long)]
    pub check_isometry: bool,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Largest support size drawn in the trials.
    #[arg(long, default_value_t = 64)]
    pub max_n: usize,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowCommand {
    /// RK4 integration of `q ↦ f - E_q f` against the closed-form geodesic.
    Geodesic {
        #[arg(long = "T", default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 8)]
        n: usize,
    },
    /// Heat equation on a periodic grid, chart solution against finite differences.
    Heat {
        #[arg(long = "T", default_value_t = 0.1)]
        t_end: f64,
        /// Time step; a quarter of the squared grid spacing when absent.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 64)]
        nodes: usize,
    },
    /// Natural-gradient ascent of a random linear objective on the cube.
    Opt {
        #[arg(long, default_value_t = 8)]
        sites: usize,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
    },
}

impl FlowCommand {
    pub fn name(&self) -> &'static str {
        match self {
            FlowCommand::Geodesic { .. } => "geodesic",
            FlowCommand::Heat { .. } => "heat",
            FlowCommand::Opt { .. } => "opt",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FamilyArgs {
    /// tsallis, kaniadakis, newton or classical.
    #[arg(long, default_value = "tsallis")]
    pub family: String,
    /// q for Tsallis, κ for Kaniadakis.
    #[arg(long)]
    pub param: Option<f64>,
    #[arg(long, default_value_t = 6)]
    pub n: usize,
}

impl FamilyArgs {
    fn deformed(&self) -> Result<DeformedLogarithm> {
        let param = match (self.family.as_str(), self.param) {
            ("tsallis", None) => Some(0.5),
            ("kaniadakis", None) => Some(0.5),
            (_, p) => p,
        };
        Ok(make_deformed(&self.family, param)?)
    }
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeformedCommand {
    /// Mass and ψ along the deformed arc between two random densities.
    Arc {
        #[command(flatten)]
        family: FamilyArgs,
        /// Number of steps on `[0, 1]`.
        #[arg(long, default_value_t = 10)]
        steps: usize,
    },
    /// φ-norm of a random variable and the escort inclusion bound.
    Norm {
        #[command(flatten)]
        family: FamilyArgs,
    },
    /// φ-cumulant of a random escort-centered variable.
    Cumulant {
        #[command(flatten)]
        family: FamilyArgs,
    },
}

impl DeformedCommand {
    pub fn name(&self) -> &'static str {
        match self {
            DeformedCommand::Arc { .. } => "arc",
            DeformedCommand::Norm { .. } => "norm",
            DeformedCommand::Cumulant { .. } => "cumulant",
        }
    }
}

pub fn run(command: &crate::Command, config: &RunConfig) -> Result<Outcome> {
    use crate::Command as C;
    match command {
        C::Orlicz(OrliczCommand::Profile {
            a,
            phi,
            alphas,
            length,
            panels,
            order,
        }) => orlicz_profile(*a, phi, alphas, *length, *panels, *order),
        C::Orlicz(OrliczCommand::Norm { n, phi }) => orlicz_norm(config, *n, phi),
        C::Steepness(args) => steepness(args),
        C::Chart(args) => chart(config, args.n),
        C::Div(args) => div(config, args.n),
        C::Pyth(args) => pyth(config, args.n),
        C::Transport(args) => transport(config, args),
        C::Flow(FlowCommand::Geodesic { t_end, dt, n }) => flow_geodesic(config, *t_end, *dt, *n),
        C::Flow(FlowCommand::Heat { t_end, dt, nodes }) => flow_heat(config, *t_end, *dt, *nodes),
        C::Flow(FlowCommand::Opt { sites, iters, gamma }) => {
            flow_opt(config, *sites, *iters, *gamma)
        }
        C::Deformed(DeformedCommand::Arc { family, steps }) => deformed_arc(config, family, *steps),
        C::Deformed(DeformedCommand::Norm { family }) => deformed_norm(config, family),
        C::Deformed(DeformedCommand::Cumulant { family }) => deformed_cumulant(config, family),
    }
}

fn rng(config: &RunConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(config.seed)
}

fn support(n: usize) -> Result<std::sync::Arc<Measure>> {
    if n < 2 {
        return Err(CliError::Usage(format!("--n must be at least 2, got {n}")));
    }
    Ok(Measure::counting_n(n)?)
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn young(label: &str) -> Result<YoungFunction> {
    label.parse::<YoungFunction>().map_err(CliError::from)
}

fn profile_table(rows: &[ProfileRow]) -> Table {
    let mut table = Table::new(&["alpha", "value", "divergent"]);
    for r in rows {
        table.push(vec![
            r.alpha.into(),
            r.value.to_f64().into(),
            (!r.value.is_finite()).into(),
        ]);
    }
    table
}

#[derive(Serialize)]
struct ProfileValues<'a> {
    a: f64,
    phi: String,
    rows: &'a [ProfileRow],
}

fn orlicz_profile(
    a: f64,
    phi: &str,
    alphas: &[f64],
    length: f64,
    panels: usize,
    order: usize,
) -> Result<Outcome> {
    let phi = young(phi)?;
    let ex = NonSteepExample::new(a)?;
    let (p, u) = ex.discretize(length, panels, order)?;
    let rows = steepness_profile(&p, &u, phi, alphas)?;
    let at_zero = rows
        .iter()
        .filter(|r| r.alpha == 0.0)
        .all(|r| r.value == Extended::Finite(0.0));
    let checks = vec![Check::holds("zero_at_origin", at_zero)];
    Ok(Outcome::new(ProfileValues {
        a,
        phi: phi.label(),
        rows: &rows,
    })
    .with_table(profile_table(&rows))
    .with_checks(checks))
}

fn steepness(args: &SteepnessArgs) -> Result<Outcome> {
    let ex = NonSteepExample::new(args.a)?;
    let rows = ex.profile(&args.alphas)?;
    let edge_ok = rows
        .iter()
        .all(|r| r.value.is_finite() == (r.alpha.abs() <= 1.0));
    let symmetric = rows.iter().all(|r| {
        let mirror = ex.expected_phi(-r.alpha).map(|v| v.to_f64());
        matches!(mirror, Ok(m) if m == r.value.to_f64())
    });
    let checks = vec![
        Check::holds("finite_exactly_on_unit_interval", edge_ok),
        Check::holds("even_in_alpha", symmetric),
    ];
    Ok(Outcome::new(ProfileValues {
        a: args.a,
        phi: "cosh".into(),
        rows: &rows,
    })
    .with_table(profile_table(&rows))
    .with_checks(checks))
}

#[derive(Serialize)]
struct NormValues {
    phi: String,
    luxemburg: f64,
    dual: f64,
    pairing: f64,
    modular_at_unit: f64,
}

fn orlicz_norm(config: &RunConfig, n: usize, phi: &str) -> Result<Outcome> {
    let phi = young(phi)?;
    let base = support(n)?;
    let mut rng = rng(config);
    let p = random::density(&base, &mut rng, 1.0);
    let u = random::random_variable(&base, &mut rng, 1.0);
    let v = random::random_variable(&base, &mut rng, 1.0);
    let lux = luxemburg_norm(&p, &u, phi)?;
    let dual = dual_norm(&p, &v, phi)?;
    let pairing = expect(&p, &u.mul(&v)?)?;
    let level = modular(&p, &u, phi, 1.0 / lux)?;
    let tol = config.tol_or(1e-8);
    let checks = vec![
        Check::at_most("unit_modular_gap", (level - 1.0).abs(), tol),
        Check::holds("holder", pairing.abs() <= lux * dual * (1.0 + tol)),
    ];
    let mut table = Table::new(&["quantity", "value"]);
    for (k, val) in [("luxemburg", lux), ("dual", dual), ("pairing", pairing)] {
        table.push(vec![k.into(), val.into()]);
    }
    Ok(Outcome::new(NormValues {
        phi: phi.label(),
        luxemburg: lux,
        dual,
        pairing,
        modular_at_unit: level,
    })
    .with_table(table)
    .with_checks(checks))
}

#[derive(Serialize)]
struct ChartValues {
    p: Vec<f64>,
    q: Vec<f64>,
    e_coordinate: Vec<f64>,
    m_coordinate: Vec<f64>,
    cumulant: f64,
    roundtrip_defect: f64,
}

fn chart(config: &RunConfig, n: usize) -> Result<Outcome> {
    let base = support(n)?;
    let mut rng = rng(config);
    let p = random::density(&base, &mut rng, 1.0);
    let q = random::density(&base, &mut rng, 1.0);
    let u = chart_s(&p, &q)?;
    let eta = chart_m(&p, &q.as_rv())?;
    let k = cumulant(&p, &u)?;
    let defect = sup_gap(patch_e(&p, &u)?.values(), q.values());
    let mut table = Table::new(&["index", "p", "q", "e_coordinate", "m_coordinate"]);
    for i in 0..n {
        table.push(vec![
            i.into(),
            p.values()[i].into(),
            q.values()[i].into(),
            u.values()[i].into(),
            eta.values()[i].into(),
        ]);
    }
    let checks = vec![Check::at_most("roundtrip_defect", defect, config.tol_or(1e-10))];
    Ok(Outcome::new(ChartValues {
        p: p.values().to_vec(),
        q: q.values().to_vec(),
        e_coordinate: u.values().to_vec(),
        m_coordinate: eta.values().to_vec(),
        cumulant: k,
        roundtrip_defect: defect,
    })
    .with_table(table)
    .with_checks(checks))
}

#[derive(Serialize)]
struct DivValues {
    direct: f64,
    bregman: f64,
    gap: f64,
}

fn div(config: &RunConfig, n: usize) -> Result<Outcome> {
    let base = support(n)?;
    let mut rng = rng(config);
    let q = random::density(&base, &mut rng, 1.0);
    let r = random::density(&base, &mut rng, 1.0);
    let d = divergence(&q, &r)?;
    let gap = (d.direct - d.bregman).abs();
    let mut table = Table::new(&["direct", "bregman", "gap"]);
    table.push(vec![d.direct.into(), d.bregman.into(), gap.into()]);
    let checks = vec![Check::at_most("bregman_gap", gap, config.tol_or(1e-10))];
    Ok(Outcome::new(DivValues {
        direct: d.direct,
        bregman: d.bregman,
        gap,
    })
    .with_table(table)
    .with_checks(checks))
}

#[derive(Serialize)]
struct PythValues {
    pairing: f64,
    defect: f64,
    orthogonal_pairing: f64,
    orthogonal_defect: f64,
}

/// `r = p(1 + η)` with `η` orthogonal to `1` and to `s_p(q)` under `p`.
fn orthogonal_partner(p: &Density, q: &Density, rng: &mut ChaCha8Rng) -> Result<Density> {
    let s = chart_s(p, q)?;
    let w = random::tangent(p, rng, 1.0);
    let ss = expect(p, &s.rv().mul(s.rv())?)?;
    let ws = expect(p, &w.rv().mul(s.rv())?)?;
    let eta = w.rv().lin_comb(1.0, s.rv(), -ws / ss)?;
    let scale = 0.5 / eta.sup_norm().max(f64::MIN_POSITIVE);
    let values = p
        .values()
        .iter()
        .zip(eta.values())
        .map(|(p, e)| p * (1.0 + scale * e))
        .collect();
    Ok(Density::new(p.base().clone(), values)?)
}

fn pyth(config: &RunConfig, n: usize) -> Result<Outcome> {
    let base = support(n)?;
    let mut rng = rng(config);
    let p = random::density(&base, &mut rng, 1.0);
    let q = random::density(&base, &mut rng, 1.0);
    let r = random::density(&base, &mut rng, 1.0);
    let generic = pythagorean_check(&p, &q, &r)?;
    let r_perp = orthogonal_partner(&p, &q, &mut rng)?;
    let orth = pythagorean_check(&p, &q, &r_perp)?;
    let orthogonal_defect = (kl(&r_perp, &q)? - kl(&r_perp, &p)? - kl(&p, &q)?).abs();
    let tol = config.tol_or(1e-10);
    let mut table = Table::new(&["triple", "pairing", "d_rq", "d_rp", "d_pq", "defect"]);
    table.push(vec![
        "random".into(),
        generic.pairing.into(),
        generic.d_rq.into(),
        generic.d_rp.into(),
        generic.d_pq.into(),
        generic.defect.abs().into(),
    ]);
    table.push(vec![
        "orthogonal".into(),
        orth.pairing.into(),
        orth.d_rq.into(),
        orth.d_rp.into(),
        orth.d_pq.into(),
        orthogonal_defect.into(),
    ]);
    let checks = vec![
        Check::at_most("defect", generic.defect.abs(), tol),
        Check::at_most("orthogonal_defect", orthogonal_defect, tol),
    ];
    Ok(Outcome::new(PythValues {
        pairing: generic.pairing,
        defect: generic.defect.abs(),
        orthogonal_pairing: orth.pairing,
        orthogonal_defect,
    })
    .with_table(table)
    .with_checks(checks))
}

#[derive(Serialize)]
struct TransportValues {
    n_trials: usize,
    max_defect: f64,
    max_roundtrip_defect: f64,
    max_centering_defect: f64,
}

struct TrialDefects {
    isometry: f64,
    roundtrip: f64,
    centering: f64,
}

fn transport_trial(seed: u64, index: usize, max_n: usize) -> Result<TrialDefects> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let n = rand::Rng::random_range(&mut rng, 2..=max_n);
    let base = Measure::counting_n(n)?;
    let p = random::density(&base, &mut rng, 1.0);
    let q = random::density(&base, &mut rng, 1.0);
    let u = HilbertVector::centered(p.clone(), random::random_variable(&base, &mut rng, 1.0))?;
    let moved = hilbert_transport(&q, &u)?;
    let back = hilbert_transport(&p, &moved)?;
    let sq = |v: &HilbertVector| expect(v.at(), &v.rv().map(|x| x * x));
    Ok(TrialDefects {
        isometry: (sq(&moved)? - sq(&u)?).abs(),
        roundtrip: sup_gap(back.values(), u.values()),
        centering: expect(&q, moved.rv())?.abs(),
    })
}

fn transport(config: &RunConfig, args: &TransportArgs) -> Result<Outcome> {
    if args.max_n < 2 {
        return Err(CliError::Usage("--max-n must be at least 2".into()));
    }
    let trials = if args.check_isometry { args.trials } else { 1 };
    let defects = (0..trials)
        .into_par_iter()
        .map(|i| transport_trial(config.seed, i, args.max_n))
        .collect::<Result<Vec<_>>>()?;
    let max = |f: fn(&TrialDefects) -> f64| defects.iter().map(f).fold(0.0f64, f64::max);
    let values = TransportValues {
        n_trials: trials,
        max_defect: max(|d| d.isometry),
        max_roundtrip_defect: max(|d| d.roundtrip),
        max_centering_defect: max(|d| d.centering),
    };
    let tol = config.tol_or(1e-12);
    let mut table = Table::new(&["trial", "isometry_defect", "roundtrip_defect", "centering_defect"]);
    for (i, d) in defects.iter().enumerate() {
        table.push(vec![i.into(), d.isometry.into(), d.roundtrip.into(), d.centering.into()]);
    }
    let checks = vec![
        Check::at_most("max_defect", values.max_defect, tol),
        Check::at_most("max_roundtrip_defect", values.max_roundtrip_defect, tol),
    ];
    Ok(Outcome::new(values).with_table(table).with_checks(checks))
}

#[derive(Serialize, Default)]
struct FlowSummary {
    final_objective: Option<f64>,
    mass_drift: f64,
    max_gap: Option<f64>,
    steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    weak_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    argmax_mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    regularized: Option<bool>,
}

fn with_curve(summary: FlowSummary, csv: String, checks: Vec<Check>) -> Outcome {
    let mut outcome = Outcome::new(summary).with_checks(checks);
    outcome.raw_csv = Some(csv);
    outcome
}

fn flow_geodesic(config: &RunConfig, t_end: f64, dt: f64, n: usize) -> Result<Outcome> {
    let base = support(n)?;
    let mut rng = rng(config);
    let p = random::density(&base, &mut rng, 1.0);
    let f = random::tangent(&p, &mut rng, 1.0);
    let curve = integrate_e_chart(&VectorField::exponential_family(f.rv().clone()), &p, t_end, dt)?;
    let mut gap = 0.0f64;
    for (t, q) in curve.times.iter().zip(&curve.densities) {
        gap = gap.max(sup_gap(e_geodesic(&p, &f, *t)?.values(), q.values()));
    }
    let summary = FlowSummary {
        final_objective: Some(expect(curve.last(), f.rv())?),
        mass_drift: curve.mass_drift(),
        max_gap: Some(gap),
        steps: curve.times.len() - 1,
        ..Default::default()
    };
    let checks = vec![
        Check::at_most("max_gap", gap, config.tol_or(1e-6)),
        Check::at_most("mass_drift", summary.mass_drift, 1e-12),
    ];
    Ok(with_curve(summary, curve.to_csv(), checks))
}

fn flow_heat(config: &RunConfig, t_end: f64, dt: Option<f64>, nodes: usize) -> Result<Outcome> {
    if nodes < 4 {
        return Err(CliError::Usage("--nodes must be at least 4".into()));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let base = Measure::periodic(0.0, two_pi, nodes)?;
    let values = base
        .real_points()
        .iter()
        .map(|x| (1.0 + 0.5 * x.cos()) / two_pi)
        .collect();
    let p0 = Density::new(base, values)?;
    let h = two_pi / nodes as f64;
    let report = heat_flow(&p0, t_end, dt.unwrap_or(h * h / 4.0))?;
    let summary = FlowSummary {
        final_objective: None,
        mass_drift: report.mass_drift,
        max_gap: Some(report.max_gap),
        steps: report.curve.times.len() - 1,
        weak_residual: Some(report.weak_residual),
        ..Default::default()
    };
    let checks = vec![
        Check::at_most("max_gap", report.max_gap, config.tol_or(1e-4)),
        Check::at_most("mass_drift", report.mass_drift, 1e-12),
    ];
    Ok(with_curve(summary, report.curve.to_csv(), checks))
}

fn flow_opt(config: &RunConfig, sites: usize, iters: usize, gamma: f64) -> Result<Outcome> {
    if !(1..=16).contains(&sites) {
        return Err(CliError::Usage("--sites must be between 1 and 16".into()));
    }
    let base = Measure::boolean(sites)?;
    let mut rng = rng(config);
    let spins = (0..sites)
        .map(|i| RandomVariable::spin(base.clone(), i))
        .collect::<igc_core::Result<Vec<_>>>()?;
    let mut objective = RandomVariable::constant(base.clone(), 0.0);
    for s in &spins {
        let size = 0.5 + rand::Rng::random::<f64>(&mut rng);
        let sign = if rand::Rng::random::<bool>(&mut rng) { 1.0 } else { -1.0 };
        objective = objective.lin_comb(1.0, s, sign * size)?;
    }
    let (argmax, best) = objective
        .values()
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let p0 = Density::uniform(base);
    let basis = spins
        .into_iter()
        .map(|s| TangentVector::centered(p0.clone(), s))
        .collect::<igc_core::Result<Vec<_>>>()?;
    let run = natural_gradient_ascent(&objective, &p0, Some(&basis), gamma, iters)?;
    let mass = run.curve.last().values()[argmax];
    let summary = FlowSummary {
        final_objective: run.objective.last().copied(),
        mass_drift: run.curve.mass_drift(),
        max_gap: Some(best - run.objective.last().copied().unwrap_or(f64::NAN)),
        steps: iters,
        argmax_mass: Some(mass),
        best_objective: Some(best),
        regularized: Some(run.regularized),
        ..Default::default()
    };
    let checks = vec![Check::at_most("missing_argmax_mass", 1.0 - mass, config.tol_or(0.01))];
    Ok(with_curve(summary, run.curve.to_csv(), checks))
}

fn deformed_instance(config: &RunConfig, args: &FamilyArgs) -> Result<(DeformedLogarithm, Density, Density, ChaCha8Rng)> {
    let d = args.deformed()?;
    let base = support(args.n)?;
    let mut rng = rng(config);
    let p = random::density(&base, &mut rng, 0.7);
    let q = random::density(&base, &mut rng, 0.7);
    Ok((d, p, q, rng))
}

#[derive(Serialize)]
struct ArcRow {
    t: f64,
    mass: f64,
    psi_printed: f64,
    psi_unit_mass: f64,
    model_gap: f64,
}

#[derive(Serialize)]
struct ArcValues {
    family: String,
    chart_cumulant: f64,
    reconstruction_defect: f64,
    rows: Vec<ArcRow>,
}

fn deformed_arc(config: &RunConfig, args: &FamilyArgs, steps: usize) -> Result<Outcome> {
    if steps == 0 {
        return Err(CliError::Usage("--steps must be positive".into()));
    }
    let (d, p0, p1, _) = deformed_instance(config, args)?;
    let chart = phi_chart(&p0, &p1, &d)?;
    let grid: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
    let masses = phi_connected(&p0, &p1, &d, &grid)?;
    let mut rows = Vec::with_capacity(grid.len());
    for t in &grid {
        let point = phi_arc(&p0, &p1, &d, *t)?;
        rows.push(ArcRow {
            t: *t,
            mass: point.mass,
            psi_printed: point.psi_printed,
            psi_unit_mass: point.psi_unit_mass,
            model_gap: point.model_gap,
        });
    }
    let tol = config.tol_or(1e-10);
    let max_mass = masses.iter().map(|m| m.mass.to_f64()).fold(0.0f64, f64::max);
    let end_gap = rows.last().map(|r| r.model_gap).unwrap_or(0.0);
    let checks = vec![
        Check::at_most("max_arc_mass_minus_one", max_mass - 1.0, 1e-12),
        Check::at_most("reconstruction_defect", chart.reconstruction_defect, tol),
        Check::at_most("endpoint_model_gap", end_gap, tol),
    ];
    let mut table = Table::new(&["t", "mass", "psi_printed", "psi_unit_mass", "model_gap"]);
    for r in &rows {
        table.push(vec![
            r.t.into(),
            r.mass.into(),
            r.psi_printed.into(),
            r.psi_unit_mass.into(),
            r.model_gap.into(),
        ]);
    }
    Ok(Outcome::new(ArcValues {
        family: d.label(),
        chart_cumulant: chart.k,
        reconstruction_defect: chart.reconstruction_defect,
        rows,
    })
    .with_table(table)
    .with_checks(checks))
}

#[derive(Serialize)]
struct DeformedNormValues {
    family: String,
    norm: f64,
    escort_l1: f64,
    escort_mean: f64,
}

fn deformed_norm(config: &RunConfig, args: &FamilyArgs) -> Result<Outcome> {
    let (d, p, _, mut rng) = deformed_instance(config, args)?;
    let u = random::random_variable(p.base(), &mut rng, 1.0);
    let norm = phi_norm(&p, &u, &d)?;
    let escort_l1 = EscortDensity::new(&p, &d).pairing(&u.map(f64::abs))?;
    let escort_mean = escort_expect(&p, &u, &d)?;
    let checks = vec![Check::holds(
        "escort_inclusion",
        escort_l1 <= norm * (1.0 + config.tol_or(1e-10)),
    )];
    let mut table = Table::new(&["quantity", "value"]);
    for (k, v) in [("norm", norm), ("escort_l1", escort_l1), ("escort_mean", escort_mean)] {
        table.push(vec![k.into(), v.into()]);
    }
    Ok(Outcome::new(DeformedNormValues {
        family: d.label(),
        norm,
        escort_l1,
        escort_mean,
    })
    .with_table(table)
    .with_checks(checks))
}

#[derive(Serialize)]
struct DeformedCumulantValues {
    family: String,
    cumulant: f64,
    derivative: f64,
    derivative_fd: f64,
    patch_mass: f64,
}

fn deformed_cumulant(config: &RunConfig, args: &FamilyArgs) -> Result<Outcome> {
    let (d, p, _, mut rng) = deformed_instance(config, args)?;
    let raw = random::random_variable(p.base(), &mut rng, 0.3);
    let u = raw.shift(-escort_expect(&p, &raw, &d)?);
    let v = random::random_variable(p.base(), &mut rng, 0.3);
    let k = phi_cumulant(&p, &u, &d)?;
    let derivative = phi_cumulant_derivative(&p, &u, &v, &d)?;
    let h = 1e-5;
    let derivative_fd = (phi_cumulant(&p, &u.lin_comb(1.0, &v, h)?, &d)?
        - phi_cumulant(&p, &u.lin_comb(1.0, &v, -h)?, &d)?)
        / (2.0 * h);
    let patch_mass = phi_patch(&p, &u, &d)?.mass();
    let checks = vec![
        Check::at_most(
            "derivative_relative_gap",
            (derivative - derivative_fd).abs() / derivative.abs().max(f64::MIN_POSITIVE),
            config.tol_or(1e-5),
        ),
        Check::at_most("patch_mass_gap", (patch_mass - 1.0).abs(), 1e-12),
        Check::holds("nonnegative", k >= 0.0),
    ];
    let mut table = Table::new(&["quantity", "value"]);
    for (name, val) in [
        ("cumulant", k),
        ("derivative", derivative),
        ("derivative_fd", derivative_fd),
        ("patch_mass", patch_mass),
    ] {
        table.push(vec![name.into(), val.into()]);
    }
    Ok(Outcome::new(DeformedCumulantValues {
        family: d.label(),
        cumulant: k,
        derivative,
        derivative_fd,
        patch_mass,
    })
    .with_table(table)
    .with_checks(checks))
}
