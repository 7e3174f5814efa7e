use anyhow::{bail, Context, Result};
use cubature::algebra::AlgebraContext;
use cubature::cubature::{expectation_formula, VERIFY_TOL};
use cubature::greeks::greeks_formula;
use cubature::oracle::ReportRow;
use cubature::CubatureFormula;

use crate::args::{CubatureArgs, FlavorArg, Format, FormulaAction, Global};
use crate::direction::Direction;
use crate::output::{write_rows, write_text};

pub fn build(global: &Global, flavor: FlavorArg, direction: Option<&str>) -> Result<CubatureFormula> {
    let d = global.d.unwrap_or(1) as usize;
    let m = global.m.unwrap_or(3) as usize;
    let t = global.horizon(1.0)?;
    let ctx = AlgebraContext::new(d, m)?;
    Ok(match flavor {
        FlavorArg::Expectation => {
            if direction.is_some() {
                bail!("--direction only applies to Greeks formulas");
            }
            expectation_formula(&ctx, t)?
        }
        FlavorArg::Greeks => {
            let w = Direction::parse(direction.unwrap_or("V1"))?.to_element(&ctx)?;
            greeks_formula(&ctx, &w, t)?
        }
    })
}

pub fn summary(f: &CubatureFormula) -> Result<Vec<ReportRow>> {
    let r = f.residuals()?;
    let mut rows = vec![
        ReportRow::value("paths", f.len() as f64),
        ReportRow::value("weight_sum", f.weight_sum()),
        ReportRow::value("abs_weight_sum", f.abs_weight_sum()),
        ReportRow::value("max_moment_residual", r.max).with_reference(VERIFY_TOL),
    ];
    for (deg, v) in r.per_degree.iter().enumerate() {
        rows.push(ReportRow::value(format!("moment_residual_degree_{deg}"), *v));
    }
    Ok(rows)
}

pub fn run(global: &Global, args: &CubatureArgs) -> Result<()> {
    match &args.action {
        FormulaAction::Export { flavor, direction } => {
            if global.format == Some(Format::Csv) {
                bail!("formulas are exported as JSON only");
            }
            let f = build(global, *flavor, direction.as_deref())?;
            write_text(&format!("{}\n", f.to_json()?), global.out.as_deref())
        }
        FormulaAction::Import { input } => {
            let text = std::fs::read_to_string(input)
                .with_context(|| format!("cannot read formula file {}", input.display()))?;
            let f = CubatureFormula::from_json(&text)
                .with_context(|| format!("formula file {} rejected", input.display()))?;
            write_rows(&summary(&f)?, global.format_or(Format::Csv), global.out.as_deref())
        }
    }
}
