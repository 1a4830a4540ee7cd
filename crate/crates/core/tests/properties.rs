mod common;

use common::*;
use lifetime_poverty::model::*;
use lifetime_poverty::{constant, proportional, Side};
use proptest::prelude::*;

fn market_strategy() -> impl Strategy<Value = MarketParams> {
    (0.005..0.08f64, 0.005..0.15f64, 0.05..0.6f64, 0.005..0.2f64, 0.0..2.0f64).prop_map(
        |(r, premium, sigma, lambda, income)| MarketParams { r, mu: r + premium, sigma, lambda, income },
    )
}

/// Relative mismatch of `x` and `y` measured against `scale`.
fn close(x: f64, y: f64, scale: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * scale.abs().max(1e-300)
}

fn any_f64() -> impl Strategy<Value = f64> {
    prop_oneof![
        4 => -100.0..100.0f64,
        1 => Just(0.0),
        1 => Just(f64::NAN),
        1 => Just(f64::INFINITY),
        1 => Just(f64::NEG_INFINITY),
        1 => Just(1e-14),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exponents_satisfy_vieta(market in market_strategy(), extra in 0.001..0.2f64) {
        let kappa = market.r + extra;
        let d = exponents(&market, &ConsumptionSpec::Proportional { kappa });
        let m = d.m;
        let lam = market.lambda;
        let b = market.r - lam + m;
        prop_assert!(d.beta1 > 1.0 && d.beta2 < 0.0);
        let scale = d.beta1.abs() + d.beta2.abs();
        prop_assert!(close(d.beta1 + d.beta2, b / m, scale, 1e-12));
        prop_assert!(close(d.beta1 * d.beta2, -lam / m, d.beta1 * d.beta2.abs(), 1e-12));

        let (g1, g2) = (d.gamma1.unwrap(), d.gamma2.unwrap());
        prop_assert!(g1 > 0.0 && g1 < 1.0 && g2 < 0.0);
        let bg = market.r - kappa - lam + m;
        prop_assert!(close(g1 + g2, bg / m, g1.abs() + g2.abs(), 1e-12));
        prop_assert!(close(g1 * g2, -lam / m, g1 * g2.abs(), 1e-12));
    }

    #[test]
    fn validation_is_total(
        r in any_f64(), mu in any_f64(), sigma in any_f64(), lambda in any_f64(), income in any_f64(),
        c in any_f64(), a in any_f64(), d in any_f64(), l in any_f64(), rho in any_f64(),
        proportional in any::<bool>(), ruin_mode in any::<bool>(),
    ) {
        let consumption = if proportional {
            ConsumptionSpec::Proportional { kappa: c }
        } else {
            ConsumptionSpec::Constant { c }
        };
        let poverty = if ruin_mode {
            PovertySpec { a, d: None, l: None, rho, staircase: None, ruin_probability_mode: true }
        } else {
            PovertySpec::step(a, d, l, rho)
        };
        let spec = ProblemSpec { market: MarketParams { r, mu, sigma, lambda, income }, consumption, poverty };
        match validate(&spec) {
            Ok(p) => {
                prop_assert!(p.ruin_level() < p.safe_level());
                prop_assert!(p.ruin_penalty() > 0.0);
            }
            Err(errors) => prop_assert!(!errors.is_empty()),
        }
    }

    #[test]
    fn staircase_is_non_increasing(
        increments in prop::collection::vec(0.01..1.0f64, 1..6),
        gaps in prop::collection::vec(0.5..5.0f64, 6),
        base in 0.0..0.5f64,
        probes in prop::collection::vec(0.0..50.0f64, 40),
    ) {
        let mut level = 0.0;
        let steps: Vec<PovertyStep> = increments
            .iter()
            .zip(&gaps)
            .map(|(&increment, &g)| {
                level += g;
                PovertyStep { level, increment }
            })
            .collect();
        let total: f64 = increments.iter().sum::<f64>() + base;
        let spec = ProblemSpec {
            market: market(),
            consumption: ConsumptionSpec::Constant { c: 1.0 },
            poverty: PovertySpec {
                a: 0.0,
                d: None,
                l: None,
                rho: 2.0 * total / 0.04,
                staircase: Some(StaircasePoverty { base, steps }),
                ruin_probability_mode: false,
            },
        };
        let p = problem(&spec);
        let mut ws: Vec<f64> = probes;
        ws.sort_by(f64::total_cmp);
        let costs: Vec<f64> = ws.iter().map(|&w| p.poverty_cost(w)).collect();
        prop_assert!(costs.iter().all(|&x| x >= 0.0));
        prop_assert!(costs.windows(2).all(|c| c[1] <= c[0]), "{costs:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constant_solution_shape(seed in any::<u64>(), t in prop::collection::vec(0.001..0.999f64, 12)) {
        let spec = &random_constant_specs(1, seed)[0];
        let p = problem(spec);
        let sol = constant::assemble(&p).unwrap();
        let (a, ws, d) = (p.ruin_level(), p.safe_level(), sol.poverty_level());
        for &u in &t {
            let w = a + u * (ws - a);
            if (w - d).abs() < 1e-9 * ws {
                continue;
            }
            let side = if w < d { Side::Below } else { Side::Above };
            let v = sol.value_point(w, side).unwrap();
            prop_assert!(v.v > 0.0 && v.v < p.ruin_penalty() * (1.0 + 1e-12));
            prop_assert!(v.v_w < 0.0 && v.v_ww > 0.0, "w = {w}: {v:?}");
            let pi = sol.pi_star_sided(w, side).unwrap();
            prop_assert!(pi > 0.0);
            if w < d {
                prop_assert!(pi > p.pi_zero(w));
            }
        }
    }

    #[test]
    fn proportional_solution_shape(seed in any::<u64>(), t in prop::collection::vec(0.001..0.999f64, 12)) {
        let spec = &random_proportional_specs(1, seed)[0];
        let p = problem(spec);
        let sol = proportional::assemble(&p).unwrap();
        let (a, d) = (p.ruin_level(), sol.poverty_level());
        for &u in &t {
            // Spread probes over [a, 100 d] on a log scale above d.
            let w = if u < 0.5 { a + 2.0 * u * (d - a) } else { d * 100f64.powf(2.0 * u - 1.0) };
            if (w - d).abs() < 1e-9 * d {
                continue;
            }
            let side = if w < d { Side::Below } else { Side::Above };
            let v = sol.value_point(w, side).unwrap();
            prop_assert!(v.v > 0.0 && v.v < p.ruin_penalty() * (1.0 + 1e-12));
            prop_assert!(v.v_w < 0.0 && v.v_ww > 0.0, "w = {w}: {v:?}");
            prop_assert!(sol.pi_star_sided(w, side).unwrap() > 0.0);
        }
    }

    #[test]
    fn spec_json_round_trips(seed in any::<u64>()) {
        for spec in random_constant_specs(1, seed).into_iter().chain(random_proportional_specs(1, seed)) {
            let back = ProblemSpec::from_json(&spec.to_json()).unwrap();
            prop_assert_eq!(back, spec);
        }
    }
}
