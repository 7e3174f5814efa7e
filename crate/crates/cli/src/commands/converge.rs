use anyhow::{bail, Result};
use cubature::greeks::{expectation_one_step, gamma_partition, greek_iterated, GreekRequest};
use cubature::oracle::bs_closed_form;
use cubature::{ModelConfig, VectorFieldSystem};
use serde::Serialize;

use super::loglog_slope;
use crate::args::{parse_payoff, parse_state, ConvergeArgs, Format, Global, Study};
use crate::direction::{parse_scale, Direction};
use crate::output::write_rows;

/// One study point: `param` is the horizon `t` or the step count `k`. The
/// last row carries the fitted log-log slope of `abs_error` in `estimate`.
#[derive(Debug, Serialize)]
pub struct ConvergeRow {
    pub quantity: String,
    pub param: Option<f64>,
    pub estimate: f64,
    pub reference: Option<f64>,
    pub abs_error: Option<f64>,
}

fn point(quantity: &str, param: f64, estimate: f64, reference: f64) -> ConvergeRow {
    ConvergeRow {
        quantity: quantity.to_string(),
        param: Some(param),
        estimate,
        reference: Some(reference),
        abs_error: Some((estimate - reference).abs()),
    }
}

pub fn study(global: &Global, args: &ConvergeArgs) -> Result<Vec<ConvergeRow>> {
    let model = global.model_config()?;
    let ModelConfig::BlackScholes { r, sigma } = model else {
        bail!("convergence studies need the black_scholes model for closed-form references");
    };
    let system = VectorFieldSystem::from_config(&model)?;
    let y = parse_state(&args.y)?;
    if y.len() != 1 {
        bail!("--y must be a single value for black_scholes");
    }
    let payoff = parse_payoff(&args.payoff)?;
    let m = global.m.unwrap_or(2) as usize;
    let m_prime = global.mprime as usize;
    let mut rows = Vec::new();

    match args.study {
        Study::Expectation => {
            for &t in &args.ts {
                let est = expectation_one_step(&system, &payoff, &y, t, m_prime)?;
                let (price, _) = bs_closed_form(r, sigma, y[0], t, &payoff)?;
                rows.push(point("expectation", t, est, price));
            }
        }
        Study::Greek => {
            let dir = Direction::parse(&args.direction)?;
            for &t in &args.ts {
                let scale = parse_scale(&args.scale, t)?;
                let v: Vec<f64> = dir.resolve(&system, &y)?.iter().map(|c| c * scale).collect();
                let req = GreekRequest::new(&system, payoff.clone(), y.clone(), v.clone(), t, m, m_prime, vec![t])?;
                let est = greek_iterated(&req)?.estimate;
                let (_, delta) = bs_closed_form(r, sigma, y[0], t, &payoff)?;
                rows.push(point("greek", t, est, delta * v[0]));
            }
        }
        Study::Iterated => {
            let t = global.horizon(1.0)?;
            let s0 = global.s0.unwrap_or(t / 10.0);
            let (_, delta) = bs_closed_form(r, sigma, y[0], t, &payoff)?;
            for &k in &args.ks {
                let partition = gamma_partition(t, s0, k, args.gamma)?;
                let req = GreekRequest::new(&system, payoff.clone(), y.clone(), vec![1.0], t, m, m_prime, partition)?;
                let est = greek_iterated(&req)?.estimate;
                rows.push(point("iterated_greek", k as f64, est, delta));
            }
        }
    }

    let xs: Vec<f64> = rows.iter().filter_map(|r| r.param).collect();
    let errs: Vec<f64> = rows.iter().filter_map(|r| r.abs_error).collect();
    if xs.len() >= 2 {
        rows.push(ConvergeRow {
            quantity: "slope".to_string(),
            param: None,
            estimate: loglog_slope(&xs, &errs),
            reference: None,
            abs_error: None,
        });
    }
    Ok(rows)
}

pub fn run(global: &Global, args: &ConvergeArgs) -> Result<()> {
    let rows = study(global, args)?;
    write_rows(&rows, global.format_or(Format::Csv), global.out.as_deref())
}
