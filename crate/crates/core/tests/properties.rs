use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, RngSeed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use pfcoding::bounds::{
    chernoff_upper, chernoff_upper_raw, curvature_margin, deadline_margin, exact_error,
    lower_bound, rate_function, theta_star,
};
use pfcoding::model::{end_to_end_crossover, symbol_error};
use pfcoding::oracle::{fd_gradient_check, monte_carlo_error, parity_enumeration_crossover};
use pfcoding::scenario::{parse_scenario, to_json};
use pfcoding::solver::{
    classical_baseline, dual_value, flow_log_gradient, inverse_rate, solve_delay_insensitive,
    Prices,
};
use pfcoding::{solve, Cell, Deadline, Flow, Hop, Network, SolverConfig};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn deadline() -> impl Strategy<Value = Deadline> {
    prop_oneof![
        3 => (1u32..=5).prop_map(Deadline::Finite),
        1 => Just(Deadline::Infinite),
    ]
}

/// Up to two cells and three flows; each flow crosses one or both cells.
fn small_network() -> impl Strategy<Value = Network> {
    let flow = (
        0usize..3,
        prop::collection::vec((1e-3f64..0.08, 5.0f64..20.0), 2),
        deadline(),
    );
    (1usize..=2, prop::collection::vec(flow, 1..=3)).prop_map(|(cells, flows)| Network {
        cells: (0..cells)
            .map(|i| Cell {
                id: format!("c{i}"),
                period: 1.0,
            })
            .collect(),
        flows: flows
            .into_iter()
            .enumerate()
            .map(|(i, (shape, hops, deadline))| {
                let cells_on_route: Vec<usize> = match (cells, shape) {
                    (1, _) => vec![0],
                    (_, 0) => vec![0],
                    (_, 1) => vec![1],
                    _ => vec![0, 1],
                };
                Flow {
                    id: format!("f{i}"),
                    route: cells_on_route
                        .iter()
                        .zip(&hops)
                        .map(|(&c, &(a, w))| Hop {
                            cell: format!("c{c}"),
                            crossover: a,
                            phy_rate: w,
                        })
                        .collect(),
                    deadline,
                    alphabet_bits: 1,
                }
            })
            .collect(),
    })
}

fn one_cell(flows: &[(f64, Deadline)]) -> Network {
    Network {
        cells: vec![Cell {
            id: "ap".into(),
            period: 1.0,
        }],
        flows: flows
            .iter()
            .enumerate()
            .map(|(i, &(a, d))| Flow {
                id: format!("f{i}"),
                route: vec![Hop {
                    cell: "ap".into(),
                    crossover: a,
                    phy_rate: 10.0,
                }],
                deadline: d,
                alphabet_bits: 1,
            })
            .collect(),
    }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn crossover_matches_parity_enumeration(hops in prop::collection::vec(0.0f64..0.5, 1..=6)) {
        let closed = end_to_end_crossover(hops.iter().copied());
        let brute = parity_enumeration_crossover(&hops).unwrap();
        prop_assert!((closed - brute).abs() <= 1e-12, "{closed} vs {brute}");
        prop_assert!(closed < 0.5);
    }

    #[test]
    fn crossover_monotone_per_hop(
        hops in prop::collection::vec(0.0f64..0.49, 1..=6),
        pick in any::<prop::sample::Index>(),
        bump in 0.0f64..0.01,
    ) {
        let i = pick.index(hops.len());
        let mut up = hops.clone();
        up[i] += bump;
        prop_assert!(end_to_end_crossover(up) >= end_to_end_crossover(hops) - 1e-15);
    }

    #[test]
    fn symbol_error_monotone(alpha in 1e-4f64..0.49, m in 1u32..16) {
        prop_assert_eq!(symbol_error(alpha, 1), alpha);
        prop_assert!(symbol_error(alpha, m + 1) > symbol_error(alpha, m));
        prop_assert!(symbol_error(alpha * 1.01, m) > symbol_error(alpha, m));
    }

    #[test]
    fn cell_load_is_linear(net in small_network(), scale in 0.1f64..5.0) {
        let ns: Vec<f64> = (0..net.flows.len()).map(|i| 1.0 + i as f64).collect();
        let base = net.cell_load(&ns);
        let scaled = net.cell_load(&ns.iter().map(|n| n * scale).collect::<Vec<_>>());
        for (a, b) in base.load.iter().zip(&scaled.load) {
            prop_assert!((a * scale - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn sandwich_holds(dn in 1u64..=200, frac in 0.0f64..1.0, beta in 0.01f64..0.3) {
        let dk = ((dn as f64 * frac).floor() as u64).max(1);
        let x = (dn - dk) as f64 / (2.0 * dn as f64);
        prop_assume!(x > beta);
        let n = dn as f64;
        let lo = lower_bound(1, n, x, beta).unwrap();
        let ex = exact_error(1, dn, dk, beta).unwrap();
        let up = chernoff_upper(1, n, x, beta).unwrap();
        prop_assert!(lo <= ex && ex <= up, "{lo} {ex} {up}");
    }

    #[test]
    fn theta_star_minimizes_chernoff(
        beta in 1e-3f64..0.3,
        t in 0.05f64..0.95,
        theta in 1e-3f64..20.0,
        n in 1.0f64..50.0,
    ) {
        let x = beta + t * (0.5 - beta);
        let best = chernoff_upper(1, n, x, beta).unwrap();
        prop_assert!(chernoff_upper_raw(1, n, x, beta, theta).unwrap() >= best * (1.0 - 1e-12));
    }

    #[test]
    fn rate_function_increasing(beta in 1e-4f64..0.4, t in 0.0f64..0.99) {
        let x = beta + t * (0.5 - beta);
        let h = 1e-3 * (0.5 - beta);
        prop_assert!(rate_function(x + h, beta).unwrap() > rate_function(x, beta).unwrap());
    }

    #[test]
    fn concavity_certificates(beta in 1e-4f64..0.3, t in 1e-3f64..0.999, y in 1e-3f64..100.0, d in 1u32..1000) {
        let x = beta + t * (0.5 - beta);
        prop_assert!(curvature_margin(x, beta).unwrap() > 0.0);
        prop_assert!(deadline_margin(y, d).unwrap() > 0.0);
    }

    #[test]
    fn inverse_rate_round_trips(beta in 1e-3f64..0.3, t in 1e-3f64..0.99) {
        let x = beta + t * (0.5 - 1e-9 - beta);
        let back = inverse_rate(rate_function(x, beta).unwrap().ln(), beta, 1e-9).unwrap();
        prop_assert!((back - x).abs() < 1e-10, "{x} -> {back}");
    }

    #[test]
    fn scenario_json_round_trips(net in small_network()) {
        prop_assert_eq!(parse_scenario(&to_json(&net)).unwrap(), net);
    }
}

#[derive(Debug, Clone, Copy)]
struct LogPoint {
    n_tilde: f64,
    i_tilde: f64,
    beta: f64,
    deadline: Deadline,
}

fn log_point() -> impl Strategy<Value = LogPoint> {
    (
        (0.5f64..50.0).prop_map(f64::ln),
        1e-3f64..0.2,
        0.05f64..0.9,
        prop_oneof![Just(1u32), Just(2), Just(10)],
    )
        .prop_map(|(n_tilde, beta, t, d)| {
            let x = beta + t * (0.5 - beta);
            LogPoint {
                n_tilde,
                i_tilde: rate_function(x, beta).unwrap().ln(),
                beta,
                deadline: Deadline::Finite(d),
            }
        })
}

fn one_flow(p: &LogPoint) -> Network {
    let mut net = one_cell(&[(p.beta, p.deadline)]);
    net.flows[0].route[0].crossover = p.beta;
    net
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn log_gradient_matches_differences(p in log_point()) {
        let dev = fd_gradient_check(&[p.n_tilde], &[p.i_tilde], &one_flow(&p), 1e-6).unwrap();
        prop_assert!(dev < 1e-4, "{dev}");
    }

    #[test]
    fn log_objective_hessian_nonpositive(p in log_point()) {
        let g = |a: f64, b: f64| flow_log_gradient(a, b, p.beta, p.deadline, 1e-9).unwrap();
        let h = 1e-5;
        let (nu, nd) = (g(p.n_tilde + h, p.i_tilde), g(p.n_tilde - h, p.i_tilde));
        let (iu, id) = (g(p.n_tilde, p.i_tilde + h), g(p.n_tilde, p.i_tilde - h));
        let hnn = (nu.d_n_tilde - nd.d_n_tilde) / (2.0 * h);
        let hii = (iu.d_i_tilde - id.d_i_tilde) / (2.0 * h);
        let hni = 0.5 * ((nu.d_i_tilde - nd.d_i_tilde) + (iu.d_n_tilde - id.d_n_tilde)) / (2.0 * h);
        let tol = 1e-6 * (hnn.abs() + hii.abs()).max(1.0);
        prop_assert!(hnn + hii <= tol, "trace {}", hnn + hii);
        prop_assert!(hnn * hii - hni * hni >= -tol, "det {}", hnn * hii - hni * hni);
    }

    #[test]
    fn fd_error_shrinks_with_step(
        n in 0.5f64..5.0,
        beta in 0.01f64..0.1,
        t in 0.75f64..0.9,
        d in 1u32..=3,
    ) {
        // near x = 0.5 truncation dominates the ~1e-10 noise left by inverting I
        let x = beta + t * (0.5 - beta);
        let p = LogPoint {
            n_tilde: n.ln(),
            i_tilde: rate_function(x, beta).unwrap().ln(),
            beta,
            deadline: Deadline::Finite(d),
        };
        let net = one_flow(&p);
        let coarse = fd_gradient_check(&[p.n_tilde], &[p.i_tilde], &net, 1e-4).unwrap();
        let fine = fd_gradient_check(&[p.n_tilde], &[p.i_tilde], &net, 5e-5).unwrap();
        prop_assume!(coarse > 1e-8);
        prop_assert!(fine < coarse / 3.0, "{coarse} -> {fine}");
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn solver_satisfies_kkt(net in small_network()) {
        let cfg = SolverConfig::default();
        let sol = solve(&net, &cfg).unwrap();
        for (r1, r2) in sol.kkt.iter().flatten() {
            prop_assert!(r1.abs() < cfg.tol_kkt && r2.abs() < cfg.tol_kkt, "{r1} {r2}");
        }
        for cs in &sol.complementary_slackness {
            prop_assert!(cs.abs() < 1e-6);
        }
        prop_assert!(sol.slack.iter().all(|s| *s >= 0.0));
        prop_assert!(sol.duality_gap.abs() < 1e-6, "{}", sol.duality_gap);
        prop_assert!(sol.iterations <= cfg.max_iterations);
        prop_assert_eq!(&sol, &solve(&net, &cfg).unwrap());
    }

    #[test]
    fn dual_is_convex_and_bounds_primal(
        net in small_network(),
        p in prop::collection::vec(0.05f64..20.0, 2),
        q in prop::collection::vec(0.05f64..20.0, 2),
    ) {
        let cfg = SolverConfig::default();
        let cells = net.cells.len();
        let p = Prices(p[..cells].to_vec());
        let q = Prices(q[..cells].to_vec());
        let mid = Prices(p.0.iter().zip(&q.0).map(|(a, b)| 0.5 * (a + b)).collect());
        let (dp, dq, dm) = (
            dual_value(&p, &net, &cfg).unwrap(),
            dual_value(&q, &net, &cfg).unwrap(),
            dual_value(&mid, &net, &cfg).unwrap(),
        );
        prop_assert!(dm <= 0.5 * (dp + dq) + 1e-9 * dp.abs().max(1.0));
        let feasible = classical_baseline(&net, &cfg).unwrap().utility;
        prop_assert!(dp >= feasible && dq >= feasible && dm >= feasible);
    }

    #[test]
    fn worse_channel_gets_more_airtime(b1 in 1e-4f64..0.02, ratio in 3.0f64..20.0) {
        let b2 = (b1 * ratio).min(0.3);
        let net = one_cell(&[(b1, Deadline::Finite(1)), (b2, Deadline::Finite(1))]);
        let sol = solve(&net, &SolverConfig::default()).unwrap();
        let a = &sol.allocation.flows;
        prop_assert!(a[1].airtime_fraction(&net) > a[0].airtime_fraction(&net));
    }

    #[test]
    fn delay_insensitive_flows_decouple(net in small_network(), factor in 1.5f64..10.0) {
        let mut net = net;
        for f in &mut net.flows {
            f.deadline = Deadline::Infinite;
        }
        let cfg = SolverConfig::default();
        let base = solve_delay_insensitive(&net, &cfg).unwrap().allocation;

        // channel quality does not move packet sizes
        let mut lossier = net.clone();
        for h in lossier.flows.iter_mut().flat_map(|f| f.route.iter_mut()) {
            h.crossover = (h.crossover * factor).min(0.45);
        }
        let other = solve_delay_insensitive(&lossier, &cfg).unwrap().allocation;
        for (a, b) in base.flows.iter().zip(&other.flows) {
            prop_assert!((a.n - b.n).abs() <= 1e-9 * a.n);
        }

        // topology and rates do not move coding
        let mut faster = net.clone();
        for h in faster.flows.iter_mut().flat_map(|f| f.route.iter_mut()) {
            h.phy_rate *= factor;
        }
        let other = solve_delay_insensitive(&faster, &cfg).unwrap().allocation;
        for (a, b) in base.flows.iter().zip(&other.flows) {
            prop_assert_eq!(a.coding.x, b.coding.x);
        }
    }
}

#[test]
fn monte_carlo_brackets_exact_error() {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let mut inside = 0;
    for i in 0..20 {
        let dn: u64 = rng.gen_range(8..=80);
        let beta: f64 = rng.gen_range(0.02..0.25);
        let dk: u64 = rng.gen_range(1..=dn);
        let exact = exact_error(1, dn, dk, beta).unwrap();
        let mc = monte_carlo_error(1, dn, dk, beta, 20_000, 100 + i).unwrap();
        assert!((0.0..=1.0).contains(&mc.estimate));
        assert!(0.0 <= mc.ci_low && mc.ci_high <= 1.0);
        if mc.contains(exact) {
            inside += 1;
        }
    }
    // a 99% interval misses about once in 100; all 20 inside happens only 82% of the time
    assert!(inside >= 19, "{inside}/20");
}

#[test]
fn theta_star_is_numerical_minimizer() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    for _ in 0..200 {
        let beta: f64 = rng.gen_range(1e-3..0.3);
        let x = beta + rng.gen_range(0.05..0.95) * (0.5 - beta);
        let exponent = |t: f64| chernoff_upper_raw(1, 1.0, x, beta, t).unwrap();
        // golden-section search on the convex bound
        let (mut lo, mut hi) = (1e-9, 50.0);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if exponent(a) < exponent(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let found = 0.5 * (lo + hi);
        let expect = theta_star(x, beta).unwrap();
        assert!(
            (found - expect).abs() < 1e-6 * expect.max(1.0),
            "{found} vs {expect}"
        );
    }
}
