//! Scenario execution. Every run produces its outputs in memory first; writing,
//! hashing and fixture comparison happen afterwards.

use std::collections::BTreeMap;

use fockmarket::dynamics::{portfolio_operator, PortfolioForm, Propagator};
use fockmarket::fock::{MatrixOperator, ModeLabel, NumberState};
use fockmarket::fpl;
use fockmarket::meanfield::{self, MeanFieldParams};
use fockmarket::models::{
    build_effective_l, build_two_trader, closed_market_space_for, conserved_operators, MarketModel,
};
use fockmarket::stochastic::stationarity_verdict;
use fockmarket::timeseries::{csv_columns, format_g12, uniform_grid, TimeSeries};

use crate::config::{Grid, Scenario, ScenarioConfig};

/// Relative path to file content, in sorted order.
pub type Outputs = BTreeMap<String, String>;

fn report(kv: &BTreeMap<String, String>) -> String {
    kv.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub fn run_scenario(cfg: &ScenarioConfig) -> fockmarket::Result<Outputs> {
    let stem = &cfg.stem;
    let mut out = Outputs::new();
    match &cfg.scenario {
        Scenario::TwoTraderExact {
            params,
            state,
            conserved,
        } => {
            let space = closed_market_space_for(state)?;
            let model = build_two_trader(params, &space)?;
            let form = PortfolioForm::Price;
            closed_outputs(&model, state, &cfg.grid, *conserved, form, stem, &mut out)?;
        }
        Scenario::EffectiveL {
            params,
            price,
            gamma,
            state,
            conserved,
        } => {
            let space = closed_market_space_for(state)?;
            let model = build_effective_l(params, *price, &space)?;
            let form = gamma.map_or(PortfolioForm::Price, PortfolioForm::Gamma);
            closed_outputs(&model, state, &cfg.grid, *conserved, form, stem, &mut out)?;
        }
        Scenario::MeanField { params, ode_check } => {
            meanfield_outputs(params, *ode_check, &cfg.grid, stem, &mut out)?;
        }
        Scenario::StochasticVerdict {
            params,
            reservoir,
            p_mean,
            zero_tol,
        } => {
            let verdict = stationarity_verdict(params, reservoir, *p_mean, *zero_tol)?;
            out.insert(format!("{stem}.txt"), verdict.to_report());
        }
        Scenario::Fpl { params } => {
            let times = uniform_grid(cfg.grid.t_max, cfg.grid.samples)?;
            let tr = fpl::trajectory(params, &times)?;
            out.insert(format!("{stem}.csv"), tr.to_csv());
        }
    }
    Ok(out)
}

fn closed_outputs(
    model: &MarketModel,
    state: &NumberState,
    grid: &Grid,
    conserved: bool,
    form: PortfolioForm,
    stem: &str,
    out: &mut Outputs,
) -> fockmarket::Result<()> {
    let times = uniform_grid(grid.t_max, grid.samples)?;
    let prop = Propagator::new(&model.hamiltonian, state)?;
    let series = |op: &MatrixOperator| -> fockmarket::Result<Vec<f64>> {
        Ok(prop
            .expectation_series(op, &times)?
            .into_iter()
            .map(|z| z.re)
            .collect())
    };
    let traders = model.traders();
    let mut headers = vec!["t".to_string()];
    let mut columns = vec![times.clone()];
    for (prefix, label) in [("n", ModeLabel::Share as fn(usize) -> ModeLabel), ("k", ModeLabel::Cash)] {
        for j in 0..traders {
            headers.push(format!("{prefix}{}", j + 1));
            columns.push(series(&model.number(label(j))?)?);
        }
    }
    headers.push("O".into());
    columns.push(series(&model.number(ModeLabel::Supply(0))?)?);
    headers.push("P".into());
    columns.push(series(&model.number(ModeLabel::Price)?)?);
    for j in 0..traders {
        headers.push(format!("Pi{}", j + 1));
        columns.push(series(&portfolio_operator(model, j, form)?)?);
    }
    let header_refs: Vec<&str> = headers.iter().map(String::as_str).collect();
    let column_refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    out.insert(format!("{stem}.csv"), csv_columns(&header_refs, &column_refs));

    if conserved {
        let mut kv = BTreeMap::new();
        let mut worst = 0.0f64;
        for c in conserved_operators(model)? {
            let ts = TimeSeries::new(times.clone(), series(&c.op)?, c.name.clone())?;
            let drift = ts.max_abs_drift();
            worst = worst.max(drift);
            kv.insert(format!("drift_{}", c.name), format_g12(drift));
        }
        kv.insert("max_drift".into(), format_g12(worst));
        kv.insert("tolerance".into(), format_g12(CONSERVED_TOL));
        kv.insert("conserved".into(), (worst < CONSERVED_TOL).to_string());
        out.insert(format!("{stem}_conserved.txt"), report(&kv));
    }
    Ok(())
}

pub const CONSERVED_TOL: f64 = 1e-8;

fn meanfield_outputs(
    p: &MeanFieldParams,
    ode_check: bool,
    grid: &Grid,
    stem: &str,
    out: &mut Outputs,
) -> fockmarket::Result<()> {
    let times = uniform_grid(grid.t_max, grid.samples)?;
    let n: Vec<f64> = times
        .iter()
        .map(|&t| meanfield::meanfield_n(t, p))
        .collect::<fockmarket::Result<_>>()?;
    let pi: Vec<f64> = times
        .iter()
        .map(|&t| meanfield::meanfield_portfolio(t, p))
        .collect::<fockmarket::Result<_>>()?;
    let mut kv = BTreeMap::new();
    kv.insert("omega".to_string(), format_g12(p.omega()?));
    kv.insert("influence_bound".to_string(), format_g12(p.influence_bound()?));
    let csv = if ode_check {
        let ode = meanfield::integrate_meanfield_ode(p, &times)?;
        let gap = n
            .iter()
            .zip(&ode.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let cal = meanfield::calibrate_nu(p, &ode)?;
        kv.insert("ode_max_abs_diff".into(), format_g12(gap));
        kv.insert("nu_detuning".into(), format_g12(cal.detuning));
        kv.insert("nu_candidate_lo".into(), format_g12(cal.candidates[0]));
        kv.insert("nu_candidate_hi".into(), format_g12(cal.candidates[1]));
        kv.insert("calibration_max_residual".into(), format_g12(cal.max_residual));
        csv_columns(&["t", "n", "pi", "n_ode"], &[&times, &n, &pi, &ode.values])
    } else {
        csv_columns(&["t", "n", "pi"], &[&times, &n, &pi])
    };
    out.insert(format!("{stem}.csv"), csv);
    out.insert(format!("{stem}.txt"), report(&kv));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_str;
    use std::path::Path;

    fn run(text: &str) -> Outputs {
        run_scenario(&parse_str(text, Path::new(".")).unwrap()).unwrap()
    }

    #[test]
    fn two_trader_conserved_report() {
        let out = run(
            "scenario = \"two-trader-exact\"\n[grid]\nt_max = 5\nsamples = 51\n[model]\nalpha=[1,2]\nbeta=[0.5,1]\n[state]\noccupations=[2,1,3,4,1,1]\n[check]\nconserved=true\n",
        );
        let csv = &out["two_trader_exact.csv"];
        assert!(csv.starts_with("t,n1,n2,k1,k2,O,P,Pi1,Pi2\n0,2,1,3,4,1,1,5,5\n"));
        assert_eq!(csv.lines().count(), 52);
        let rep = &out["two_trader_exact_conserved.txt"];
        assert!(rep.contains("conserved=true\n"));
        assert!(rep.contains("drift_Gamma="));
        assert!(!rep.contains("drift_Delta"));
    }

    #[test]
    fn effective_model_outputs() {
        let out = run(
            "scenario = \"effective-L\"\n[grid]\nt_max = 2\nsamples = 5\n[model]\nalpha=[1,2,3]\nbeta=[1,1,1]\nprice=1\ngamma=2\n[state]\noccupations=[1,1,1,1,1,1,2,1]\n[check]\nconserved=true\n",
        );
        assert!(out["effective_l.csv"].starts_with("t,n1,n2,n3,k1,k2,k3,O,P,Pi1,Pi2,Pi3\n0,1,1,1,1,1,1,2,1,3,3,3\n"));
        let rep = &out["effective_l_conserved.txt"];
        assert!(rep.contains("drift_Delta=") && rep.contains("drift_Q3="));
        assert!(rep.contains("conserved=true\n"));
    }

    #[test]
    fn meanfield_report() {
        let out = run(
            "scenario = \"meanfield\"\n[grid]\nt_max = 6\nsamples = 61\n[meanfield]\nphi=1\nnu=0.5\nx0_re=0.2\nn0=3\nk0=2\n",
        );
        let rep = &out["meanfield.txt"];
        let gap: f64 = rep
            .lines()
            .find_map(|l| l.strip_prefix("ode_max_abs_diff="))
            .unwrap()
            .parse()
            .unwrap();
        assert!(gap < 1e-6);
        assert!(rep.contains("nu_candidate_lo="));
    }

    #[test]
    fn stochastic_verdict_report() {
        let out = run(
            "scenario = \"stochastic-verdict\"\n[stochastic]\nomega_a=1\nomega_c=1\nomega_p=1\np_mean=1\nreservoir_state=[1,2,1]\n[[stochastic.reservoir]]\nomega_share=1\nomega_cash=1\nomega_supply=2\n",
        );
        assert!(out["stochastic_verdict.txt"].contains("portfolio_stationary=true\n"));
    }

    #[test]
    fn runtime_errors_surface() {
        let cfg = parse_str(
            "scenario = \"two-trader-exact\"\n[model]\nalpha=[-1,2]\nbeta=[0.5,1]\n[state]\noccupations=[2,1,3,4,1,1]\n",
            Path::new("."),
        )
        .unwrap();
        assert!(run_scenario(&cfg).is_err());
    }
}
