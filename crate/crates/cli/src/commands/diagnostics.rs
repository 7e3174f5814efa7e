use anyhow::Result;
use cubature::algebra::AlgebraContext;
use cubature::oracle::{
    covariance_diagnostics, fd_greek, malliavin_delta_m1, signature_expectation_mc, ReportRow,
    COVARIANCE_BASIS,
};
use cubature::{heat_element, VectorFieldSystem};

use super::greek::{default_state, reference_derivative};
use crate::args::{parse_payoff, DiagnosticsArgs, Format, Global};
use crate::output::write_rows;
use crate::ToleranceFailure;

const DET_TOL: f64 = 1e-10;
const Z_MAX: f64 = 4.0;

pub fn report(global: &Global, args: &DiagnosticsArgs) -> Result<(Vec<ReportRow>, Vec<String>)> {
    let cfg = global.mc()?;
    let t = global.horizon(1.0)?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();

    let cov = covariance_diagnostics(t, &cfg)?;
    rows.push(ReportRow::value("covariance.max_det_violation", cov.max_det_violation).with_reference(0.0));
    rows.push(ReportRow::value("covariance.positivity_failures", cov.positivity_failures as f64).with_reference(0.0));
    rows.push(ReportRow::value("covariance.e0_max_abs", cov.e0_max_abs).with_reference(0.0));
    for s in &cov.scaling {
        let mut row = ReportRow::from_mc(
            format!("covariance.C[{},{}]", COVARIANCE_BASIS[s.row], COVARIANCE_BASIS[s.col]),
            &s.mean_t,
        );
        row.reference = Some(s.scaled_unit.mean);
        row.z_score = Some(s.z);
        rows.push(row);
    }
    if cov.max_det_violation > DET_TOL {
        failures.push(format!("determinant identity violated by {:.3e}", cov.max_det_violation));
    }
    if cov.positivity_failures > 0 || cov.asymmetric_paths > 0 || cov.e0_max_abs != 0.0 {
        failures.push("covariance matrix structure".into());
    }
    if cov.max_scaling_z > Z_MAX {
        failures.push(format!("covariance scaling |z| = {:.2}", cov.max_scaling_z));
    }

    let d = global.d.unwrap_or(2) as usize;
    let m = global.m.unwrap_or(3) as usize;
    let ctx = AlgebraContext::new(d, m)?;
    let sig = signature_expectation_mc(&ctx, t, &cfg)?;
    let heat = heat_element(&ctx, t)?;
    for (k, w) in ctx.basis().iter().enumerate() {
        let (mean, se, h) = (sig.mean.as_slice()[k], sig.stderr.as_slice()[k], heat.as_slice()[k]);
        let z = if se > 0.0 {
            (mean - h) / se
        } else if (mean - h).abs() <= 1e-12 * h.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY
        };
        if z.abs() > Z_MAX {
            failures.push(format!("signature mean of word {w}: |z| = {:.2}", z.abs()));
        }
        rows.push(ReportRow {
            quantity: format!("signature[{w}]"),
            estimate: mean,
            stderr: Some(se),
            reference: Some(h),
            z_score: Some(z),
        });
    }

    let model = global.model_config()?;
    let system = VectorFieldSystem::from_config(&model)?;
    if system.n() == system.d() {
        let f = parse_payoff(&args.payoff)?;
        let y = default_state(&system);
        let mut v = vec![0.0; system.n()];
        v[0] = 1.0;
        let reference = reference_derivative(&model, &f, &y, &v, t);
        let mal = malliavin_delta_m1(&system, &f, &y, &v, t, &cfg)?;
        let fd = fd_greek(&system, &f, &y, &v, t, &cfg, args.h)?;
        let mut delta_rows = vec![
            ReportRow::from_mc("delta.malliavin", &mal.precise),
            ReportRow::from_mc("delta.malliavin_leading", &mal.leading),
            ReportRow::from_mc("delta.finite_difference", &fd),
        ];
        if let Some(r) = reference {
            for row in &mut delta_rows[..] {
                *row = row.clone().with_reference(r);
            }
            for row in [&delta_rows[0], &delta_rows[2]] {
                if row.z_score.is_some_and(|z| z.abs() > Z_MAX) {
                    failures.push(format!("{} off the closed form", row.quantity));
                }
            }
        }
        rows.extend(delta_rows);
        rows.push(ReportRow::from_mc("delta.weight_gap", &mal.gap));
    }
    Ok((rows, failures))
}

pub fn run(global: &Global, args: &DiagnosticsArgs) -> Result<()> {
    let (rows, failures) = report(global, args)?;
    write_rows(&rows, global.format_or(Format::Csv), global.out.as_deref())?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(ToleranceFailure(failures.join("; ")).into())
    }
}
