//! Scenario configuration: flat TOML sections, validated by hand so that every
//! problem is reported at once.
//!
//! ```toml
//! scenario = "fpl"            # two-trader-exact | effective-L | meanfield | stochastic-verdict | fpl
//! name = "fig1"               # optional
//!
//! [grid]                      # t_max (10), samples (201); not used by stochastic-verdict
//! [output]                    # dir, stem, plots (false), fixtures
//! [check]                     # conserved (false); two-trader-exact and effective-L
//! [model]                     # alpha, beta, interaction (effective-L), price (effective-L), gamma (effective-L)
//! [state]                     # occupations
//! [meanfield]                 # phi, nu, x0_re, x0_im, n0, k0, gamma_share, ode_check
//! [stochastic]                # omega_a, omega_c, omega_p, p_mean, zero_tol, reservoir_state
//! [[stochastic.reservoir]]    # omega_share, omega_cash, omega_supply, f_re, f_im, g_re, g_im
//! [fpl]                       # figure, m, o, lam, omega_a, omega_c, big_omega_a, big_omega_c,
//!                             # n, k, n_res, k_res, f_re, f_im, w1, w2, weights,
//!                             # omega_p, big_omega_o, g_norm_sq
//! [sweep]                     # "section.key" = [values, ...]; cartesian product
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use fockmarket::fock::NumberState;
use fockmarket::fpl::FplParams;
use fockmarket::meanfield::MeanFieldParams;
use fockmarket::models::{ModelParams, ReservoirTrader};
use fockmarket::stochastic::{ReservoirState, DEFAULT_ZERO_TOL};
use fockmarket::timeseries::format_g12;
use num_complex::Complex64;
use toml::{Table, Value};

pub const SCENARIOS: [&str; 5] = [
    "two-trader-exact",
    "effective-L",
    "meanfield",
    "stochastic-verdict",
    "fpl",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub t_max: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    TwoTraderExact {
        params: ModelParams,
        state: NumberState,
        conserved: bool,
    },
    EffectiveL {
        params: ModelParams,
        price: u32,
        gamma: Option<f64>,
        state: NumberState,
        conserved: bool,
    },
    MeanField {
        params: MeanFieldParams,
        ode_check: bool,
    },
    StochasticVerdict {
        params: ModelParams,
        reservoir: ReservoirState,
        p_mean: f64,
        zero_tol: f64,
    },
    Fpl {
        params: FplParams,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub scenario: Scenario,
    pub grid: Grid,
    /// File stem of the main output.
    pub stem: String,
    pub out_dir: Option<PathBuf>,
    pub plots: bool,
    pub fixtures: Option<PathBuf>,
    /// Expanded sweep runs, each with an empty `sweep` of its own.
    pub sweep: Vec<SweepRun>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    /// Subdirectory name, `run-000` and up.
    pub dir: String,
    /// `section.key=value` pairs joined by `,`.
    pub label: String,
    pub config: ScenarioConfig,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {msg}")]
    Read { path: String, msg: String },
    #[error("{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

/// Typed access to one table, recording every key touched and every problem.
struct Section<'a> {
    name: String,
    table: Option<&'a Table>,
    seen: BTreeSet<String>,
    errors: Vec<String>,
}

impl<'a> Section<'a> {
    fn new(name: impl Into<String>, table: Option<&'a Table>) -> Self {
        Section {
            name: name.into(),
            table,
            seen: BTreeSet::new(),
            errors: Vec::new(),
        }
    }

    fn raw(&mut self, key: &str) -> Option<&'a Value> {
        self.seen.insert(key.to_string());
        self.table.and_then(|t| t.get(key))
    }

    fn fail(&mut self, key: &str, msg: &str) {
        self.errors.push(format!("{}.{key}: {msg}", self.name));
    }

    fn missing(&mut self, key: &str) {
        self.fail(key, "missing required key");
    }

    fn f64(&mut self, key: &str) -> Option<f64> {
        match self.raw(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.fail(key, "expected a number");
                None
            }
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> f64 {
        self.f64(key).unwrap_or(default)
    }

    fn req_f64(&mut self, key: &str) -> f64 {
        if self.raw(key).is_none() {
            self.missing(key);
        }
        self.f64(key).unwrap_or(0.0)
    }

    fn uint(&mut self, key: &str) -> Option<u32> {
        match self.raw(key)? {
            Value::Integer(i) if (0..=i64::from(u32::MAX)).contains(i) => Some(*i as u32),
            _ => {
                self.fail(key, "expected a nonnegative integer");
                None
            }
        }
    }

    fn req_uint(&mut self, key: &str) -> u32 {
        if self.raw(key).is_none() {
            self.missing(key);
        }
        self.uint(key).unwrap_or(0)
    }

    fn bool_or(&mut self, key: &str, default: bool) -> bool {
        match self.raw(key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(_) => {
                self.fail(key, "expected true or false");
                default
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.raw(key)? {
            Value::String(s) => Some(s.clone()),
            _ => {
                self.fail(key, "expected a string");
                None
            }
        }
    }

    fn list(&mut self, key: &str, required: bool) -> Option<Vec<f64>> {
        let Some(v) = self.raw(key) else {
            if required {
                self.missing(key);
            }
            return None;
        };
        let parsed = v.as_array().and_then(|a| {
            a.iter()
                .map(|x| x.as_float().or_else(|| x.as_integer().map(|i| i as f64)))
                .collect::<Option<Vec<f64>>>()
        });
        if parsed.is_none() {
            self.fail(key, "expected a list of numbers");
        }
        parsed
    }

    fn uint_list(&mut self, key: &str) -> Option<Vec<usize>> {
        let Some(v) = self.raw(key) else {
            self.missing(key);
            return None;
        };
        let parsed = v.as_array().and_then(|a| {
            a.iter()
                .map(|x| x.as_integer().filter(|i| *i >= 0).map(|i| i as usize))
                .collect::<Option<Vec<usize>>>()
        });
        if parsed.is_none() {
            self.fail(key, "expected a list of nonnegative integers");
        }
        parsed
    }

    fn matrix(&mut self, key: &str) -> Option<Vec<Vec<f64>>> {
        let v = self.raw(key)?;
        let parsed = v.as_array().and_then(|rows| {
            rows.iter()
                .map(|r| {
                    r.as_array()?
                        .iter()
                        .map(|x| x.as_float().or_else(|| x.as_integer().map(|i| i as f64)))
                        .collect::<Option<Vec<f64>>>()
                })
                .collect::<Option<Vec<_>>>()
        });
        if parsed.is_none() {
            self.fail(key, "expected a list of lists of numbers");
        }
        parsed
    }

    fn finish(mut self, errors: &mut Vec<String>) {
        if let Some(t) = self.table {
            for key in t.keys().filter(|k| !self.seen.contains(*k)) {
                self.errors
                    .push(format!("{}.{key}: unknown key", self.name));
            }
        }
        errors.append(&mut self.errors);
    }
}

fn sub_table<'a>(root: &'a Table, key: &str, errors: &mut Vec<String>) -> Option<&'a Table> {
    match root.get(key)? {
        Value::Table(t) => Some(t),
        _ => {
            errors.push(format!("{key}: expected a table"));
            None
        }
    }
}

/// Reads and validates a configuration file. Relative paths inside are
/// resolved against the file's directory.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_str(&text, base)
}

pub fn parse_str(text: &str, base_dir: &Path) -> Result<ScenarioConfig, ConfigError> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Invalid(vec![e.message().to_string()]))?;
    let mut errors = Vec::new();
    let sweep = match root.get("sweep") {
        None => Vec::new(),
        Some(Value::Table(t)) => expand_sweep(&root, t, base_dir, &mut errors),
        Some(_) => {
            errors.push("sweep: expected a table".into());
            Vec::new()
        }
    };
    let mut single = root.clone();
    single.remove("sweep");
    let cfg = validate(&single, base_dir, &mut errors);
    match cfg {
        Some(mut cfg) if errors.is_empty() => {
            cfg.sweep = sweep;
            Ok(cfg)
        }
        _ => Err(ConfigError::Invalid(errors)),
    }
}

fn expand_sweep(
    root: &Table,
    sweep: &Table,
    base_dir: &Path,
    errors: &mut Vec<String>,
) -> Vec<SweepRun> {
    let mut axes = Vec::new();
    for (key, values) in sweep {
        let Some((section, field)) = key.split_once('.') else {
            errors.push(format!("sweep.{key}: expected \"section.key\""));
            continue;
        };
        match values.as_array() {
            Some(v) if !v.is_empty() => axes.push((section, field, v.clone())),
            _ => errors.push(format!("sweep.{key}: expected a nonempty list")),
        }
    }
    if axes.is_empty() {
        return Vec::new();
    }
    let total: usize = axes.iter().map(|a| a.2.len()).product();
    let mut runs = Vec::with_capacity(total);
    for index in 0..total {
        let mut table = root.clone();
        table.remove("sweep");
        let mut rest = index;
        let mut label = Vec::new();
        // last axis varies fastest
        let mut picks = vec![0; axes.len()];
        for (a, axis) in axes.iter().enumerate().rev() {
            picks[a] = rest % axis.2.len();
            rest /= axis.2.len();
        }
        for ((section, field, values), &pick) in axes.iter().zip(&picks) {
            let value = values[pick].clone();
            label.push(format!("{section}.{field}={}", render(&value)));
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| Value::Table(Table::new()));
            match entry {
                Value::Table(t) => {
                    t.insert(field.to_string(), value);
                }
                _ => errors.push(format!("sweep: {section} is not a table")),
            }
        }
        let label = label.join(",");
        let mut run_errors = Vec::new();
        if let Some(config) = validate(&table, base_dir, &mut run_errors) {
            runs.push(SweepRun {
                dir: format!("run-{index:03}"),
                label: label.clone(),
                config,
            });
        }
        errors.extend(run_errors.into_iter().map(|e| format!("sweep run {label}: {e}")));
    }
    runs
}

fn render(v: &Value) -> String {
    match v {
        Value::Float(x) => format_g12(*x),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn validate(root: &Table, base_dir: &Path, errors: &mut Vec<String>) -> Option<ScenarioConfig> {
    let mut top = Section::new("config", Some(root));
    let scenario = top.string("scenario");
    let name = top.string("name");
    let sections = [
        "grid",
        "output",
        "check",
        "model",
        "state",
        "meanfield",
        "stochastic",
        "fpl",
    ];
    for s in sections {
        top.seen.insert(s.to_string());
    }
    if scenario.is_none() && root.get("scenario").is_none() {
        top.missing("scenario");
    }
    top.finish(errors);
    let scenario_name = scenario?;
    if !SCENARIOS.contains(&scenario_name.as_str()) {
        errors.push(format!(
            "config.scenario: unknown scenario \"{scenario_name}\"; expected one of {}",
            SCENARIOS.join(", ")
        ));
        return None;
    }
    let used: &[&str] = match scenario_name.as_str() {
        "two-trader-exact" => &["grid", "output", "check", "model", "state"],
        "effective-L" => &["grid", "output", "check", "model", "state"],
        "meanfield" => &["grid", "output", "meanfield"],
        "stochastic-verdict" => &["output", "stochastic"],
        _ => &["grid", "output", "fpl"],
    };
    for s in sections {
        if root.contains_key(s) && !used.contains(&s) {
            errors.push(format!("[{s}]: not used by scenario {scenario_name}"));
        }
    }

    let mut g = Section::new("grid", sub_table(root, "grid", errors));
    let t_max = g.f64_or("t_max", 10.0);
    let samples = g.uint("samples").unwrap_or(201) as usize;
    if !(t_max > 0.0 && t_max.is_finite()) {
        g.fail("t_max", "must be positive and finite");
    }
    if samples < 2 {
        g.fail("samples", "must be at least 2");
    }
    g.finish(errors);

    let mut o = Section::new("output", sub_table(root, "output", errors));
    let out_dir = o.string("dir").map(|d| base_dir.join(d));
    let stem = o.string("stem");
    let plots = o.bool_or("plots", false);
    let fixtures = o.string("fixtures").map(|d| base_dir.join(d));
    if let Some(s) = &stem {
        if s.is_empty() || s.contains(['/', '\\']) {
            o.fail("stem", "must be a plain file stem");
        }
    }
    o.finish(errors);

    let scenario = match scenario_name.as_str() {
        "two-trader-exact" | "effective-L" => closed_scenario(root, &scenario_name, errors),
        "meanfield" => meanfield_scenario(root, errors),
        "stochastic-verdict" => stochastic_scenario(root, errors),
        _ => fpl_scenario(root, errors),
    }?;
    let default_stem = match &scenario {
        Scenario::Fpl { params } => fpl_stem(root, params),
        _ => scenario_name.replace('-', "_").to_lowercase(),
    };
    Some(ScenarioConfig {
        name: name.unwrap_or_else(|| scenario_name.clone()),
        scenario,
        grid: Grid { t_max, samples },
        stem: stem.unwrap_or(default_stem),
        out_dir,
        plots,
        fixtures,
        sweep: Vec::new(),
    })
}

fn closed_scenario(root: &Table, which: &str, errors: &mut Vec<String>) -> Option<Scenario> {
    let effective = which == "effective-L";
    let mut m = Section::new("model", sub_table(root, "model", errors));
    let alpha = m.list("alpha", true);
    let beta = m.list("beta", true);
    let (interaction, price, gamma) = if effective {
        let p = m.req_uint("price");
        (m.matrix("interaction"), p, m.f64("gamma"))
    } else {
        (None, 0, None)
    };
    let mut s = Section::new("state", sub_table(root, "state", errors));
    let occ = s.uint_list("occupations");
    let mut c = Section::new("check", sub_table(root, "check", errors));
    let conserved = c.bool_or("conserved", false);
    c.finish(errors);

    let traders = alpha.as_ref().map_or(0, Vec::len);
    if let (Some(a), Some(b)) = (&alpha, &beta) {
        if a.len() != b.len() {
            m.fail("beta", "must have as many entries as alpha");
        }
        if !effective && a.len() != 2 {
            m.fail("alpha", "the two-trader model needs exactly 2 entries");
        }
        if a.len() < 2 {
            m.fail("alpha", "needs at least 2 traders");
        }
    }
    let interaction = interaction.unwrap_or_else(|| {
        (0..traders)
            .map(|i| (0..traders).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect()
    });
    if let Some(o) = &occ {
        if o.len() != 2 * traders + 2 {
            s.fail(
                "occupations",
                &format!("expected {} entries [n.., k.., O, P]", 2 * traders + 2),
            );
        }
    }
    m.finish(errors);
    s.finish(errors);
    let params = ModelParams {
        alpha: alpha?,
        beta: beta?,
        interaction,
        ..Default::default()
    };
    let state = NumberState::new(occ?);
    Some(if effective {
        Scenario::EffectiveL {
            params,
            price,
            gamma,
            state,
            conserved,
        }
    } else {
        Scenario::TwoTraderExact {
            params,
            state,
            conserved,
        }
    })
}

fn meanfield_scenario(root: &Table, errors: &mut Vec<String>) -> Option<Scenario> {
    let mut m = Section::new("meanfield", sub_table(root, "meanfield", errors));
    let params = MeanFieldParams {
        phi: m.req_f64("phi"),
        nu: m.req_f64("nu"),
        x0: Complex64::new(m.req_f64("x0_re"), m.f64_or("x0_im", 0.0)),
        n0: m.req_f64("n0"),
        k0: m.req_f64("k0"),
        gamma_share: m.f64_or("gamma_share", 1.0),
    };
    let ode_check = m.bool_or("ode_check", true);
    if params.omega().is_err() {
        m.fail("nu", "Φ = ν with X0 = 0 leaves no oscillation");
    }
    let ok = m.errors.is_empty();
    m.finish(errors);
    ok.then_some(Scenario::MeanField { params, ode_check })
}

fn stochastic_scenario(root: &Table, errors: &mut Vec<String>) -> Option<Scenario> {
    let table = sub_table(root, "stochastic", errors);
    let mut s = Section::new("stochastic", table);
    let omega_a = s.req_f64("omega_a");
    let omega_c = s.req_f64("omega_c");
    let omega_p = s.req_f64("omega_p");
    let p_mean = s.req_f64("p_mean");
    let zero_tol = s.f64_or("zero_tol", DEFAULT_ZERO_TOL);
    let occ = s.uint_list("reservoir_state");
    let mut reservoir = Vec::new();
    match s.raw("reservoir") {
        Some(Value::Array(items)) if !items.is_empty() => {
            for (i, item) in items.iter().enumerate() {
                let Value::Table(t) = item else {
                    s.fail("reservoir", "entries must be tables");
                    continue;
                };
                let mut r = Section::new(format!("stochastic.reservoir[{i}]"), Some(t));
                reservoir.push(ReservoirTrader {
                    omega_share: r.req_f64("omega_share"),
                    omega_cash: r.req_f64("omega_cash"),
                    omega_supply: r.req_f64("omega_supply"),
                    f: Complex64::new(r.f64_or("f_re", 1.0), r.f64_or("f_im", 0.0)),
                    g: Complex64::new(r.f64_or("g_re", 1.0), r.f64_or("g_im", 0.0)),
                });
                r.finish(errors);
            }
        }
        Some(_) => s.fail("reservoir", "expected [[stochastic.reservoir]] tables"),
        None => s.missing("reservoir"),
    }
    if p_mean < 0.0 || p_mean.fract() != 0.0 {
        s.fail("p_mean", "must be a nonnegative integer");
    }
    if let Some(o) = &occ {
        if o.len() != 3 * reservoir.len() {
            s.fail(
                "reservoir_state",
                &format!("expected {} entries [N.., K.., O..]", 3 * reservoir.len()),
            );
        }
    }
    let ok = s.errors.is_empty();
    s.finish(errors);
    if !ok {
        return None;
    }
    let r = reservoir.len();
    let state = ReservoirState::from_number_state(&NumberState::new(occ?), r).ok()?;
    Some(Scenario::StochasticVerdict {
        params: ModelParams {
            omega_a,
            omega_c,
            omega_p,
            reservoir,
            ..Default::default()
        },
        reservoir: state,
        p_mean,
        zero_tol,
    })
}

fn fpl_scenario(root: &Table, errors: &mut Vec<String>) -> Option<Scenario> {
    let mut f = Section::new("fpl", sub_table(root, "fpl", errors));
    let figure = f.uint("figure").unwrap_or(1);
    let Ok(base) = FplParams::figure(figure.min(255) as u8, 1.0, 1.0) else {
        f.fail("figure", "expected 1, 2, 3 or 4");
        f.finish(errors);
        return None;
    };
    let lam = f.f64_or("lam", base.lam);
    let w1 = f.f64_or("w1", 1.0);
    let w2 = f.f64_or("w2", 1.0);
    let weights = match f.string("weights").as_deref() {
        None | Some("explicit") => Some((w1, w2)),
        Some("occupations") => None,
        Some(_) => {
            f.fail("weights", "expected \"explicit\" or \"occupations\"");
            None
        }
    };
    let params = FplParams {
        m: f.uint("m").unwrap_or(base.m),
        o: f.uint("o").unwrap_or(base.o),
        lam,
        omega_a: f.f64_or("omega_a", base.omega_a),
        omega_c: f.f64_or("omega_c", base.omega_c),
        big_omega_a: f.f64_or("big_omega_a", base.big_omega_a),
        big_omega_c: f.f64_or("big_omega_c", base.big_omega_c),
        n: f.uint("n").unwrap_or(base.n),
        k: f.uint("k").unwrap_or(base.k),
        n_res: f.uint("n_res").unwrap_or(base.n_res),
        k_res: f.uint("k_res").unwrap_or(base.k_res),
        f: Complex64::new(f.f64_or("f_re", 1.0), f.f64_or("f_im", 0.0)),
        weights,
        omega_p: f.f64_or("omega_p", lam),
        big_omega_o: f.f64_or("big_omega_o", lam),
        g_norm_sq: f.f64_or("g_norm_sq", lam),
    };
    if let Err(e) = params.validate() {
        f.errors.push(format!("fpl: {e}"));
    }
    let ok = f.errors.is_empty();
    f.finish(errors);
    ok.then_some(Scenario::Fpl { params })
}

/// `fig{N}_w1_{w1}_w2_{w2}` when the figure preset is used unchanged apart
/// from the weights, `fpl` otherwise.
fn fpl_stem(root: &Table, params: &FplParams) -> String {
    let Some(Value::Table(t)) = root.get("fpl") else {
        return "fig1_w1_1_w2_1".into();
    };
    let preset_only = t
        .keys()
        .all(|k| matches!(k.as_str(), "figure" | "w1" | "w2" | "weights"));
    let figure = t.get("figure").and_then(Value::as_integer).unwrap_or(1);
    match params.weights {
        Some((w1, w2)) if preset_only => format!(
            "fig{figure}_w1_{}_w2_{}",
            format_g12(w1).replace('.', "p"),
            format_g12(w2).replace('.', "p")
        ),
        _ => "fpl".into(),
    }
}
