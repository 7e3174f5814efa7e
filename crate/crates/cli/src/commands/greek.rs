use anyhow::{bail, Result};
use cubature::greeks::{gamma_partition, greek_iterated, GreekRequest, GreekResult};
use cubature::oracle::{bs_closed_form, ReportRow};
use cubature::{ModelConfig, Payoff, VectorFieldSystem};
use serde::Serialize;

use crate::args::{parse_payoff, parse_state, Format, GreekArgs, Global};
use crate::direction::{parse_scale, Direction};
use crate::output::{write_json, write_rows};

#[derive(Debug, Serialize)]
pub struct GreekReport {
    pub model: String,
    pub y: Vec<f64>,
    /// Resolved state-space direction, including the scale factor.
    pub v: Vec<f64>,
    pub t: f64,
    pub m: usize,
    pub m_prime: usize,
    pub partition: Vec<f64>,
    pub result: GreekResult,
    /// Closed-form directional derivative when one is available.
    pub reference: Option<f64>,
}

pub fn default_state(system: &VectorFieldSystem) -> Vec<f64> {
    if system.n() == 1 {
        vec![1.0]
    } else {
        vec![0.0; system.n()]
    }
}

/// `∂_v E f(Y_t^y)` in closed form for Black–Scholes payoffs that have one.
pub fn reference_derivative(model: &ModelConfig, f: &Payoff, y: &[f64], v: &[f64], t: f64) -> Option<f64> {
    match model {
        ModelConfig::BlackScholes { r, sigma } => {
            bs_closed_form(*r, *sigma, y[0], t, f).ok().map(|(_, delta)| delta * v[0])
        }
        _ => None,
    }
}

pub fn compute(global: &Global, args: &GreekArgs) -> Result<GreekReport> {
    let model = global.model_config()?;
    let system = VectorFieldSystem::from_config(&model)?;
    let y = match &args.y {
        Some(s) => parse_state(s)?,
        None => default_state(&system),
    };
    if y.len() != system.n() {
        bail!("--y has {} entries but the model state has {}", y.len(), system.n());
    }
    let t = global.horizon(0.1)?;
    let m = global.m.unwrap_or(2) as usize;
    let m_prime = global.mprime as usize;
    let payoff = parse_payoff(&args.payoff)?;
    let scale = parse_scale(&args.scale, t)?;
    let v: Vec<f64> = Direction::parse(&args.direction)?
        .resolve(&system, &y)?
        .into_iter()
        .map(|c| c * scale)
        .collect();
    if v.len() != system.n() {
        bail!("direction has {} entries but the model state has {}", v.len(), system.n());
    }
    let partition = match global.partition()? {
        Some((k, gamma)) => gamma_partition(t, global.s0.unwrap_or(t / 10.0), k, gamma)?,
        None => vec![t],
    };
    let req = GreekRequest::new(&system, payoff.clone(), y.clone(), v.clone(), t, m, m_prime, partition.clone())?;
    let result = greek_iterated(&req)?;
    let reference = reference_derivative(&model, &payoff, &y, &v, t);
    Ok(GreekReport {
        model: system.name().to_string(),
        y,
        v,
        t,
        m,
        m_prime,
        partition,
        result,
        reference,
    })
}

pub fn run(global: &Global, args: &GreekArgs) -> Result<()> {
    let report = compute(global, args)?;
    match global.format_or(Format::Json) {
        Format::Json => write_json(&report, global.out.as_deref()),
        Format::Csv => {
            let mut greek = ReportRow::value("greek", report.result.estimate);
            if let Some(r) = report.reference {
                greek = greek.with_reference(r);
            }
            let rows = vec![
                greek,
                ReportRow::value("paths_evaluated", report.result.paths_evaluated as f64),
                ReportRow::value("k", report.result.k as f64),
                ReportRow::value("direction_norm", report.result.direction_norm),
            ];
            write_rows(&rows, Format::Csv, global.out.as_deref())
        }
    }
}
