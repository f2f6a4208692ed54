//! Closed-form constants of the estimate pipeline: geometric radii R and R₃,
//! the interpolation exponent γ, the H¹-comparison constant D₃, the
//! observability constants C_sfuc for both decay classes, the D_B-from-D_A
//! conversion, and least-squares fitting of the free dimensional exponents.
//!
//! The dimensional exponents N_A, N_B, N₁, N₂ have no numeric values; they
//! enter every formula as configuration parameters and reports always state
//! which value was used. D₁ and D₂ are available through those parameters as
//! δ-powers; all potentially huge outputs are carried in the log domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logdom::{log_add_exp, LogVal};

const PI: f64 = std::f64::consts::PI;
const E: f64 = std::f64::consts::E;

/// (R, R₃) for the extension geometry: R the least odd integer strictly
/// greater than 18e√d + 2, R₃ = 9e√d.
pub fn r_values(d: usize) -> Result<(i64, f64)> {
    if d != 1 && d != 2 {
        return Err(Error::InvalidParameter(format!("d must be 1 or 2, got {d}")));
    }
    let sqrt_d = (d as f64).sqrt();
    let x = 18.0 * E * sqrt_d + 2.0;
    let mut r = x.floor() as i64 + 1;
    if r % 2 == 0 {
        r += 1;
    }
    Ok((r, 9.0 * E * sqrt_d))
}

/// Critical grid size κ/(18e√d) of the κ–G relation.
pub fn g_critical(kappa: f64, d: usize) -> f64 {
    kappa / (18.0 * E * (d as f64).sqrt())
}

/// Interpolation exponent γ = (log₂(6e√d / (1/2 - (1/8)√(16-δ²))))⁻¹.
///
/// The denominator 1/2 - (1/8)√(16-δ²) cancels catastrophically as δ → 0; it
/// is evaluated through the equivalent form δ²/(8(4+√(16-δ²))).
pub fn gamma_of(delta: f64, d: usize) -> Result<f64> {
    if d != 1 && d != 2 {
        return Err(Error::InvalidParameter(format!("d must be 1 or 2, got {d}")));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "gamma needs delta in (0, 1/2), got {delta}"
        )));
    }
    let inner = delta * delta / (8.0 * (4.0 + (16.0 - delta * delta).sqrt()));
    Ok(std::f64::consts::LN_2 / (6.0 * E * (d as f64).sqrt() / inner).ln())
}

/// D₃ = √(4 R^d R₃ (1 + (1+‖V‖_∞)R₃²)), the constant comparing
/// ‖F_n‖_{H¹(Λ_{RL}×[-R₃,R₃])} against the X₁ norm.
pub fn d3_of(d: usize, v_inf: f64) -> Result<f64> {
    if v_inf < 0.0 {
        return Err(Error::InvalidParameter(format!("v_inf must be >= 0, got {v_inf}")));
    }
    let (r, r3) = r_values(d)?;
    Ok((4.0 * (r as f64).powi(d as i32) * r3 * (1.0 + (1.0 + v_inf) * r3 * r3)).sqrt())
}

/// D₁ = δ^{-N₁(1+‖V‖^{2/3})/4} with the user-supplied exponent N₁.
pub fn d1_of(delta: f64, v_inf: f64, n1: f64) -> LogVal {
    LogVal::from_ln(-n1 * (1.0 + v_inf.powf(2.0 / 3.0)) / 4.0 * delta.ln())
}

/// D₂ = δ^{-γ N₂(1+‖V‖^{2/3})/4} with the user-supplied exponent N₂.
pub fn d2_of(delta: f64, v_inf: f64, n2: f64, d: usize) -> Result<LogVal> {
    let gamma = gamma_of(delta, d)?;
    Ok(LogVal::from_ln(-gamma * n2 * (1.0 + v_inf.powf(2.0 / 3.0)) / 4.0 * delta.ln()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Variant {
    A,
    B,
}

/// Every scalar parameter the theorems consume, with the free exponents.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConstantBundle {
    pub d: usize,
    pub g: f64,
    pub delta: f64,
    pub kappa: f64,
    /// D_A ≥ 1 as a log-domain value.
    pub d_a: LogVal,
    /// D_B ≥ 1 as a log-domain value.
    pub d_b: LogVal,
    pub v_inf: f64,
    pub v_plus: f64,
    pub v_minus: f64,
    pub n_a: f64,
    pub n_b: f64,
}

impl ConstantBundle {
    pub fn validate(&self) -> Result<()> {
        if self.d != 1 && self.d != 2 {
            return Err(Error::InvalidParameter(format!("d must be 1 or 2, got {}", self.d)));
        }
        if !(self.g > 0.0) {
            return Err(Error::InvalidParameter("G must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < self.g / 2.0) {
            return Err(Error::HypothesisViolation(format!(
                "delta must lie in (0, G/2) = (0, {}), got {}",
                self.g / 2.0,
                self.delta
            )));
        }
        if self.d_a.ln < 0.0 || self.d_b.ln < 0.0 {
            return Err(Error::HypothesisViolation("D_A and D_B must be >= 1".into()));
        }
        Ok(())
    }

    /// All derived constants; per-variant observability constants are None
    /// with the violated hypothesis recorded when the κ–G relation fails.
    pub fn derive(&self) -> Result<DerivedConstants> {
        self.validate()?;
        let (r, r3) = r_values(self.d)?;
        let gamma = gamma_of(self.delta / self.g, self.d)?;
        let d3 = d3_of(self.d, self.g * self.g * self.v_inf)?;
        let eps = self.kappa / self.g - 2.0 * r3;
        let (c_a, hyp_a) = match c_sfuc(Variant::A, self) {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let (c_b, hyp_b) = match c_sfuc(Variant::B, self) {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Ok(DerivedConstants {
            r,
            r3,
            gamma,
            d3,
            epsilon: if eps > 0.0 { Some(eps) } else { None },
            c_sfuc_a: c_a,
            c_sfuc_b: c_b,
            hypothesis_a: hyp_a,
            hypothesis_b: hyp_b,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub r: i64,
    pub r3: f64,
    pub gamma: f64,
    pub d3: f64,
    /// κ/G - 2R₃ when positive (the conversion split of variant A).
    pub epsilon: Option<f64>,
    pub c_sfuc_a: Option<LogVal>,
    pub c_sfuc_b: Option<LogVal>,
    pub hypothesis_a: Option<String>,
    pub hypothesis_b: Option<String>,
}

/// The scale-free observability constant:
///
/// variant A: (δ/G)^{N_A(1 + G^{4/3}‖V‖^{2/3} + ln D_A + G/(κ - 18e√d·G))},
/// variant B: (δ/G)^{N_B(1 + G^{4/3}‖V‖^{2/3} + ln D_B)}.
///
/// Variant A requires G strictly below κ/(18e√d); variant B allows equality.
pub fn c_sfuc(variant: Variant, bundle: &ConstantBundle) -> Result<LogVal> {
    bundle.validate()?;
    let g_crit = g_critical(bundle.kappa, bundle.d);
    let (n, ln_d) = match variant {
        Variant::A => (bundle.n_a, bundle.d_a.ln),
        Variant::B => (bundle.n_b, bundle.d_b.ln),
    };
    if !(n > 0.0) {
        return Err(Error::InvalidParameter(format!("exponent N must be positive, got {n}")));
    }
    match variant {
        Variant::A => {
            if !(bundle.g < g_crit) {
                return Err(Error::HypothesisViolation(format!(
                    "variant A requires G in (0, kappa/(18e sqrt(d))), strictly: G = {} vs kappa/(18e sqrt(d)) = {g_crit}",
                    bundle.g
                )));
            }
        }
        Variant::B => {
            if !(bundle.g <= g_crit) {
                return Err(Error::HypothesisViolation(format!(
                    "variant B requires G in (0, kappa/(18e sqrt(d))]: G = {} vs kappa/(18e sqrt(d)) = {g_crit}",
                    bundle.g
                )));
            }
        }
    }
    let v_term = bundle.g.powf(4.0 / 3.0) * bundle.v_inf.powf(2.0 / 3.0);
    let mut exponent = 1.0 + v_term + ln_d;
    if variant == Variant::A {
        exponent += bundle.g / (bundle.kappa - bundle.g * 18.0 * E * (bundle.d as f64).sqrt());
    }
    Ok(LogVal::from_ln(n * exponent * (bundle.delta / bundle.g).ln()))
}

/// D_B produced from a class-B certificate:
/// D_B = e^{2R₃(π+‖V₊‖^{1/2})}(1 + 2 D_A R₃ π/(1 - e^{-επ})),
/// together with the closed-form upper bound on ln D_B
/// 2R₃(π+1) + 2R₃‖V₊‖^{2/3} + ln D_A + ln(3R₃π) + (επ)⁻¹.
pub fn db_from_da(d_a: LogVal, epsilon: f64, v_plus: f64, d: usize) -> Result<(LogVal, f64)> {
    if d_a.ln < 0.0 {
        return Err(Error::HypothesisViolation(format!("D_A must be >= 1, got ln D_A = {}", d_a.ln)));
    }
    if !(epsilon > 0.0) {
        return Err(Error::HypothesisViolation(format!("epsilon must be positive, got {epsilon}")));
    }
    if v_plus < 0.0 {
        return Err(Error::InvalidParameter(format!("v_plus must be >= 0, got {v_plus}")));
    }
    let (_, r3) = r_values(d)?;
    let one_minus = -(-epsilon * PI).exp_m1();
    let ln_db = 2.0 * r3 * (PI + v_plus.sqrt()) + log_add_exp(0.0, d_a.ln + (2.0 * r3 * PI / one_minus).ln());
    let bound = 2.0 * r3 * (PI + 1.0)
        + 2.0 * r3 * v_plus.powf(2.0 / 3.0)
        + d_a.ln
        + (3.0 * r3 * PI).ln()
        + 1.0 / (epsilon * PI);
    Ok((LogVal::from_ln(ln_db), bound))
}

/// One data point for exponent fitting: a measured constant together with the
/// parameters entering the theorem's exponent.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Measurement {
    pub delta_over_g: f64,
    pub v_inf: f64,
    pub ln_d: f64,
    pub c_measured: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExponentFit {
    pub n: f64,
    /// Root-mean-square residual of ln C against the model.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares fit of N in ln C = N·(1 + v^{2/3} + ln D)·ln(δ/G) over the
/// measurements (grid size normalized to G = 1, the canonical scale of every
/// sweep; other scales reduce to it via the scaling map).
pub fn fit_exponent(measurements: &[Measurement]) -> Result<ExponentFit> {
    if measurements.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "exponent fit needs at least 3 measurements, got {}",
            measurements.len()
        )));
    }
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut xs = Vec::with_capacity(measurements.len());
    let mut ys = Vec::with_capacity(measurements.len());
    for m in measurements {
        if !(m.c_measured > 0.0 && m.c_measured <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "measured constants must lie in (0, 1], got {}",
                m.c_measured
            )));
        }
        if !(m.delta_over_g > 0.0 && m.delta_over_g < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "delta/G must lie in (0, 1/2), got {}",
                m.delta_over_g
            )));
        }
        let x = (1.0 + m.v_inf.powf(2.0 / 3.0) + m.ln_d) * m.delta_over_g.ln();
        let y = m.c_measured.ln();
        sxx += x * x;
        sxy += x * y;
        xs.push(x);
        ys.push(y);
    }
    if sxx < 1e-30 {
        return Err(Error::InvalidParameter("degenerate design: all regressors vanish".into()));
    }
    let n = sxy / sxx;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - n * x) * (y - n * x)).sum();
    Ok(ExponentFit { n, residual: (ss / measurements.len() as f64).sqrt(), points: measurements.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Expected values below are frozen from 50-digit mpmath evaluations of
    // the same formulas; agreement is required to 12 significant digits.

    #[test]
    fn r_values_frozen() {
        let (r1, r31) = r_values(1).unwrap();
        assert_eq!(r1, 51);
        assert!((r31 - 24.464536456131407118).abs() < 1e-12 * r31);
        let (r2, r32) = r_values(2).unwrap();
        assert_eq!(r2, 73);
        assert!((r32 - 34.598079253432051424).abs() < 1e-12 * r32);
        assert!(r2 > r1);
    }

    #[test]
    fn gamma_frozen_and_stable() {
        let g = gamma_of(0.1, 1).unwrap();
        assert!((g - 0.059983366885527078384).abs() < 1e-12 * g);
        let g2 = gamma_of(0.2, 2).unwrap();
        assert!((g2 - 0.065916922316776195629).abs() < 1e-12 * g2);

        // naive form agrees to 12 digits at δ=0.3 where cancellation is mild
        let delta: f64 = 0.3;
        let naive_inner = 0.5 - (16.0 - delta * delta).sqrt() / 8.0;
        let naive = std::f64::consts::LN_2 / (6.0 * E / naive_inner).ln();
        let stable = gamma_of(delta, 1).unwrap();
        assert!((naive - stable).abs() < 1e-12 * stable);
        assert!((stable - 0.074076512304453893515).abs() < 1e-12 * stable);
    }

    #[test]
    fn gamma_monotone_to_zero() {
        let mut prev = 0.0;
        for k in 1..40 {
            let delta = k as f64 / 81.0;
            let g = gamma_of(delta, 1).unwrap();
            assert!(g > prev);
            prev = g;
        }
        // γ → 0 only logarithmically in δ
        assert!(gamma_of(1e-8, 1).unwrap() < gamma_of(1e-4, 1).unwrap());
        assert!(gamma_of(1e-8, 1).unwrap() > 0.0);
        assert!(gamma_of(0.5, 1).is_err());
        assert!(gamma_of(0.0, 1).is_err());
    }

    #[test]
    fn d3_frozen() {
        let v = d3_of(1, 0.0).unwrap();
        assert!((v - 1729.7489628572777389).abs() < 1e-12 * v);
        let w = d3_of(2, 1.0).unwrap();
        assert!((w - 42027.786865758603959).abs() < 1e-12 * w);
        let u = d3_of(1, 2.5).unwrap();
        assert!((u - 3234.1356259714543691).abs() < 1e-12 * u);
        assert!(d3_of(1, 1.0).unwrap() > v);
    }

    fn bundle() -> ConstantBundle {
        ConstantBundle {
            d: 1,
            g: 1.0,
            delta: 0.1,
            kappa: 50.0,
            d_a: LogVal::ONE,
            d_b: LogVal::ONE,
            v_inf: 0.0,
            v_plus: 0.0,
            v_minus: 0.0,
            n_a: 1.0,
            n_b: 1.0,
        }
    }

    #[test]
    fn c_sfuc_unit_exponent() {
        // B with δ/G = 0.1, v = 0, D_B = 1, N_B = 1 → 0.1
        let b = bundle();
        let c = c_sfuc(Variant::B, &b).unwrap();
        assert!((c.value() - 0.1).abs() < 1e-15);

        // D_B = e adds one to the exponent → 0.01
        let mut b2 = b;
        b2.d_b = LogVal::from_ln(1.0);
        let c2 = c_sfuc(Variant::B, &b2).unwrap();
        assert!((c2.value() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn c_sfuc_kappa_g_relation() {
        // A at exact equality G = κ/(18e√d) must be rejected (strict).
        let mut b = bundle();
        b.kappa = 18.0 * E; // g_critical = 1 = G
        match c_sfuc(Variant::A, &b) {
            Err(Error::HypothesisViolation(msg)) => assert!(msg.contains("strictly")),
            other => panic!("expected strict-inequality violation, got {other:?}"),
        }
        // B allows equality.
        assert!(c_sfuc(Variant::B, &b).is_ok());
        // B just past equality fails.
        b.kappa = 18.0 * E - 1e-9;
        assert!(matches!(c_sfuc(Variant::B, &b), Err(Error::HypothesisViolation(_))));
    }

    #[test]
    fn c_sfuc_log_domain_never_overflows() {
        let mut b = bundle();
        b.n_b = 1e6;
        let c = c_sfuc(Variant::B, &b).unwrap();
        assert!(c.ln.is_finite());
        assert_eq!(c.value(), 0.0); // plain value underflows, log survives
    }

    #[test]
    fn db_from_da_frozen() {
        let (db, bound) = db_from_da(LogVal::ONE, 1.0, 0.0, 1).unwrap();
        assert!((db.ln - 158.80069820992995717).abs() < 1e-12 * db.ln);
        assert!(db.ln > 153.0); // > e^153
        assert!(db.ln <= bound);

        let (db2, bound2) = db_from_da(LogVal::from_value(3.0), 0.5, 2.0, 2).unwrap();
        assert!((db2.ln - 321.95883229412214821).abs() < 1e-12 * db2.ln);
        assert!(db2.ln <= bound2);
    }

    #[test]
    fn db_from_da_epsilon_limit() {
        // ε → ∞: D_B → e^{2R₃(π+√v₊)}(1 + 2R₃π D_A)
        let (_, r3) = r_values(1).unwrap();
        let d_a = LogVal::from_value(2.0);
        let (db, _) = db_from_da(d_a, 1e6, 0.25, 1).unwrap();
        let limit = 2.0 * r3 * (PI + 0.5) + (1.0 + 2.0 * r3 * PI * 2.0).ln();
        assert!((db.ln - limit).abs() < 1e-9);
    }

    #[test]
    fn fit_exponent_exact_recovery() {
        // synthetic data from the formula with N = 3
        let mk = |delta: f64, v: f64, ln_d: f64| Measurement {
            delta_over_g: delta,
            v_inf: v,
            ln_d,
            c_measured: (3.0 * (1.0 + v.powf(2.0 / 3.0) + ln_d) * delta.ln()).exp(),
        };
        let data = vec![mk(0.05, 0.0, 0.0), mk(0.1, 1.0, 0.5), mk(0.2, 2.0, 1.0), mk(0.3, 0.5, 0.0)];
        let fit = fit_exponent(&data).unwrap();
        assert!((fit.n - 3.0).abs() < 1e-10);
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn fit_exponent_handles_c_equal_one() {
        let mk = |delta: f64, c: f64| Measurement { delta_over_g: delta, v_inf: 0.0, ln_d: 0.0, c_measured: c };
        let data = vec![mk(0.05, 0.4), mk(0.1, 0.6), mk(0.49, 1.0)];
        let fit = fit_exponent(&data).unwrap();
        assert!(fit.n.is_finite());
        assert!(fit.n > 0.0);
    }

    #[test]
    fn fit_exponent_guards() {
        let m = Measurement { delta_over_g: 0.1, v_inf: 0.0, ln_d: 0.0, c_measured: 0.5 };
        assert!(fit_exponent(&[m, m]).is_err());
        let bad = Measurement { c_measured: 1.5, ..m };
        assert!(fit_exponent(&[m, m, bad]).is_err());
    }

    #[test]
    fn bundle_derive_reports_both_variants() {
        let b = bundle(); // κ=50 > 18e ≈ 48.93: both hypotheses hold at G=1
        let d = b.derive().unwrap();
        assert!(d.c_sfuc_a.is_some());
        assert!(d.c_sfuc_b.is_some());
        assert!(d.epsilon.unwrap() > 0.0);
        assert_eq!(d.r, 51);
        // variant A pays the extra G/(κ-18e√d G) term, so C^A < C^B
        assert!(d.c_sfuc_a.unwrap().ln < d.c_sfuc_b.unwrap().ln);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn db_bound_holds_on_random_draws(
            ln_da in 0.0f64..20.0,
            eps in 0.01f64..10.0,
            v_plus in 0.0f64..50.0,
            d in 1usize..3,
        ) {
            let (db, bound) = db_from_da(LogVal::from_ln(ln_da), eps, v_plus, d).unwrap();
            prop_assert!(db.ln <= bound + 1e-9);
        }

        #[test]
        fn c_sfuc_in_unit_interval_and_monotone(
            delta in 0.01f64..0.49,
            v in 0.0f64..10.0,
            ln_d in 0.0f64..20.0,
        ) {
            let mut b = bundle();
            b.delta = delta;
            b.v_inf = v;
            b.d_b = LogVal::from_ln(ln_d);
            let c = c_sfuc(Variant::B, &b).unwrap();
            prop_assert!(c.ln <= 0.0); // value in (0, 1]

            let mut b_more_d = b;
            b_more_d.d_b = LogVal::from_ln(ln_d + 1.0);
            prop_assert!(c_sfuc(Variant::B, &b_more_d).unwrap().ln <= c.ln);

            let mut b_more_v = b;
            b_more_v.v_inf = v + 1.0;
            prop_assert!(c_sfuc(Variant::B, &b_more_v).unwrap().ln <= c.ln);

            if delta + 0.005 < 0.5 {
                let mut b_more_delta = b;
                b_more_delta.delta = delta + 0.005;
                prop_assert!(c_sfuc(Variant::B, &b_more_delta).unwrap().ln >= c.ln);
            }
        }
    }
}
