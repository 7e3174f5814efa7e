use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use super::nnls::nnls;
use super::{rescale_formula, CubatureFormula, Flavor, FormulaItem, VERIFY_TOL};
use crate::algebra::{heat_element, AlgebraContext, LieBasis, TensorElement, Word};
use crate::error::{CubatureError, Result};
use crate::signature::{signature, PiecewisePath};

/// Degree-3 formula: `2d` straight lines with time increment `t`, space
/// increment `±√(d t)` along one axis, weights `1/(2d)`.
pub fn expectation_degree3(ctx: &Arc<AlgebraContext>, t: f64) -> Result<CubatureFormula> {
    if ctx.m() > 3 {
        return Err(CubatureError::UnsupportedDegree {
            m: ctx.m(),
            reason: "the straight-line formula matches moments up to degree 3".into(),
        });
    }
    check_horizon(t)?;
    let d = ctx.d();
    let a = (d as f64 * t).sqrt();
    let w = 1.0 / (2 * d) as f64;
    let mut items = Vec::with_capacity(2 * d);
    for i in 1..=d {
        for sign in [1.0, -1.0] {
            let mut inc = vec![0.0; d + 1];
            inc[0] = t;
            inc[i] = sign * a;
            items.push(FormulaItem {
                weight: w,
                path: PiecewisePath::line(t, &inc)?,
            });
        }
    }
    CubatureFormula::from_parts(ctx, t, Flavor::Expectation, None, items).verified()
}

/// Five-point Gauss–Hermite nodes for the standard normal.
fn gauss_hermite5() -> [f64; 5] {
    let s10 = 10f64.sqrt();
    let a = (5.0 - s10).sqrt();
    let b = (5.0 + s10).sqrt();
    [-b, -a, 0.0, a, b]
}

type RawFormula = Vec<(f64, Vec<Vec<f64>>)>;

/// Positive weights over three-segment paths at horizon 1, found by NNLS
/// on a Gauss–Hermite dictionary.
fn degree5_d1_unit() -> Result<&'static RawFormula> {
    static CELL: OnceLock<std::result::Result<RawFormula, CubatureError>> = OnceLock::new();
    CELL.get_or_init(|| {
        let ctx = AlgebraContext::new(1, 5)?;
        let nodes = gauss_hermite5();
        let h: f64 = 1.0 / 3.0;
        let sh = h.sqrt();
        let mut dict: Vec<Vec<Vec<f64>>> = Vec::with_capacity(125);
        for &z1 in &nodes {
            for &z2 in &nodes {
                for &z3 in &nodes {
                    dict.push(vec![vec![h, z1 * sh], vec![h, z2 * sh], vec![h, z3 * sh]]);
                }
            }
        }
        let cols: Vec<TensorElement> = dict
            .iter()
            .map(|incs| signature(&ctx, &PiecewisePath::from_increments(1.0, incs)?))
            .collect::<Result<_>>()?;
        let a = DMatrix::from_fn(ctx.dim(), dict.len(), |i, j| cols[j].as_slice()[i]);
        let b = DVector::from_column_slice(heat_element(&ctx, 1.0)?.as_slice());
        let (x, res) = nnls(&a, &b);
        if res > VERIFY_TOL {
            return Err(CubatureError::NoFormulaFound { residual: res });
        }
        Ok(x.iter()
            .zip(dict)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, p)| (*w, p))
            .collect())
    })
    .as_ref()
    .map_err(Clone::clone)
}

/// Degree-5 formula for one driver: at most `dim A` paths of three
/// segments each, with positive weights.
pub fn expectation_degree5_d1(ctx: &Arc<AlgebraContext>, t: f64) -> Result<CubatureFormula> {
    if ctx.d() != 1 || ctx.m() > 5 {
        return Err(CubatureError::UnsupportedDegree {
            m: ctx.m(),
            reason: "the degree-5 formula needs d = 1 and m <= 5".into(),
        });
    }
    check_horizon(t)?;
    let raw = degree5_d1_unit()?;
    let items = raw
        .iter()
        .map(|(w, incs)| {
            Ok(FormulaItem {
                weight: *w,
                path: PiecewisePath::from_increments(1.0, incs)?,
            })
        })
        .collect::<Result<_>>()?;
    let unit = CubatureFormula::from_parts(ctx, 1.0, Flavor::Expectation, None, items).verified()?;
    if t == 1.0 {
        Ok(unit)
    } else {
        rescale_formula(&unit, t)
    }
}

/// The built-in expectation formula of lowest degree covering `ctx.m()`.
pub fn expectation_formula(ctx: &Arc<AlgebraContext>, t: f64) -> Result<CubatureFormula> {
    match ctx.m() {
        1..=3 => expectation_degree3(ctx, t),
        4 | 5 if ctx.d() == 1 => expectation_degree5_d1(ctx, t),
        m => Err(CubatureError::UnsupportedDegree {
            m,
            reason: format!("no built-in expectation formula for d = {}", ctx.d()),
        }),
    }
}

/// `Δ_√t(w) · heat_element(t)` for a Lie element `w` with no `e_0` part.
pub fn greek_target(ctx: &Arc<AlgebraContext>, w: &TensorElement, t: f64) -> Result<TensorElement> {
    ctx.check_same(w.context())?;
    check_horizon(t)?;
    let scale = 1.0 + w.max_abs();
    if w.constant().abs() > 1e-14 * scale {
        return Err(CubatureError::Domain(
            "direction must have zero constant term".into(),
        ));
    }
    // Only the bracket monomial e_0 itself has support on the word (0).
    if w.coeff(&Word::letter(0)).abs() > 1e-14 * scale {
        return Err(CubatureError::Domain(
            "direction has an e_0 component; there is no derivative in that direction".into(),
        ));
    }
    let lie = LieBasis::new(ctx)?;
    let r = lie.residual(w)?;
    if r > 1e-10 * scale {
        return Err(CubatureError::Domain(format!(
            "direction is not a Lie element (residual {r:.3e})"
        )));
    }
    w.dilate(t.sqrt())?.mul(&heat_element(ctx, t)?)
}

/// Two straight lines `±√t w` with weights `±½`, valid for `m <= 2` and
/// `w` of degree one.
pub fn greeks_two_point(ctx: &Arc<AlgebraContext>, w: &TensorElement, t: f64) -> Result<CubatureFormula> {
    if ctx.m() > 2 {
        return Err(CubatureError::UnsupportedDegree {
            m: ctx.m(),
            reason: "two-point Greeks formula leaves degree-3 terms unmatched".into(),
        });
    }
    ctx.check_same(w.context())?;
    check_horizon(t)?;
    for (word, c) in w.terms() {
        if word.degree() != 1 && c.abs() > 1e-14 {
            return Err(CubatureError::Domain(format!(
                "two-point formula needs a degree-1 direction, found {word}"
            )));
        }
    }
    let d = ctx.d();
    let st = t.sqrt();
    let mut inc = vec![0.0; d + 1];
    for (i, v) in inc.iter_mut().enumerate().skip(1) {
        *v = st * w.coeff(&Word::letter(i));
    }
    let neg: Vec<f64> = inc.iter().map(|v| -v).collect();
    let items = vec![
        FormulaItem {
            weight: 0.5,
            path: PiecewisePath::line(t, &inc)?,
        },
        FormulaItem {
            weight: -0.5,
            path: PiecewisePath::line(t, &neg)?,
        },
    ];
    let direction = w.dilate(st)?;
    CubatureFormula::from_parts(ctx, t, Flavor::Greeks, Some(direction), items).verified()
}

fn check_horizon(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(CubatureError::Domain(format!("horizon must be positive, got {t}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cubature::VERIFY_TOL;

    #[test]
    fn degree3_one_driver() {
        let ctx = AlgebraContext::new(1, 3).unwrap();
        let t: f64 = 0.7;
        let f = expectation_degree3(&ctx, t).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f.items()[0].weight, 0.5);
        assert_eq!(f.items()[0].path.increment(), vec![t, t.sqrt()]);
        assert!(f.residuals().unwrap().max < 1e-12);
    }

    #[test]
    fn degree3_two_drivers() {
        let ctx = AlgebraContext::new(2, 3).unwrap();
        let t: f64 = 0.4;
        let f = expectation_degree3(&ctx, t).unwrap();
        assert_eq!(f.len(), 4);
        assert!(f.items().iter().all(|it| it.weight == 0.25));
        assert!((f.items()[0].path.increment()[1] - (2.0 * t).sqrt()).abs() < 1e-15);
        assert!((f.weight_sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degree3_rejects_higher_m() {
        let ctx = AlgebraContext::new(1, 4).unwrap();
        assert!(matches!(
            expectation_degree3(&ctx, 1.0),
            Err(CubatureError::UnsupportedDegree { .. })
        ));
    }

    #[test]
    fn degree5_positive_and_small() {
        let ctx = AlgebraContext::new(1, 5).unwrap();
        let f = expectation_degree5_d1(&ctx, 1.0).unwrap();
        assert!(f.len() <= ctx.dim());
        assert!(f.items().iter().all(|it| it.weight > 0.0));
        assert!(f.items().iter().all(|it| it.path.num_segments() <= 3));
        assert!((f.weight_sum() - 1.0).abs() < 1e-12);
        assert!(f.residuals().unwrap().max < VERIFY_TOL);
        let g = expectation_degree5_d1(&ctx, 0.05).unwrap();
        assert!(g.residuals().unwrap().max < VERIFY_TOL);
    }

    #[test]
    fn target_of_generator_at_degree_two() {
        let ctx = AlgebraContext::new(2, 2).unwrap();
        let t: f64 = 0.3;
        let e1 = TensorElement::generator(&ctx, 1).unwrap();
        let g = greek_target(&ctx, &e1, t).unwrap();
        assert!(g.distance(&e1.scale(t.sqrt())).unwrap() < 1e-16);
        let zero = TensorElement::zero(&ctx);
        assert_eq!(greek_target(&ctx, &zero, t).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn target_rejects_time_direction() {
        let ctx = AlgebraContext::new(2, 3).unwrap();
        let e0 = TensorElement::generator(&ctx, 0).unwrap();
        assert!(matches!(greek_target(&ctx, &e0, 1.0), Err(CubatureError::Domain(_))));
        let sq = TensorElement::monomial(&ctx, &Word::new(&[1, 1], 2).unwrap(), 1.0).unwrap();
        assert!(greek_target(&ctx, &sq, 1.0).is_err());
    }

    #[test]
    fn target_of_bracket_matches_series() {
        let ctx = AlgebraContext::new(2, 3).unwrap();
        let t = 0.2;
        let e1 = TensorElement::generator(&ctx, 1).unwrap();
        let e2 = TensorElement::generator(&ctx, 2).unwrap();
        let b = e1.bracket(&e2).unwrap();
        // Degree-2 direction times (1 + O(degree 2)) leaves only t[e1,e2] at m = 3.
        let g = greek_target(&ctx, &b, t).unwrap();
        assert!(g.distance(&b.scale(t)).unwrap() < 1e-16);
    }

    #[test]
    fn two_point_structure() {
        let ctx = AlgebraContext::new(2, 2).unwrap();
        let t: f64 = 0.25;
        let e1 = TensorElement::generator(&ctx, 1).unwrap();
        let f = greeks_two_point(&ctx, &e1, t).unwrap();
        assert_eq!(f.items()[0].weight, 0.5);
        assert_eq!(f.items()[1].weight, -0.5);
        assert_eq!(f.items()[0].path.increment(), vec![0.0, t.sqrt(), 0.0]);
        assert_eq!(f.items()[1].path.increment(), vec![0.0, -t.sqrt(), 0.0]);
        assert_eq!(f.weight_sum(), 0.0);
        assert_eq!(f.abs_weight_sum(), 1.0);
        assert!(f.residuals().unwrap().max < 1e-12);
    }

    #[test]
    fn two_point_needs_low_degree() {
        let ctx = AlgebraContext::new(2, 3).unwrap();
        let e1 = TensorElement::generator(&ctx, 1).unwrap();
        assert!(greeks_two_point(&ctx, &e1, 1.0).is_err());
    }
}
