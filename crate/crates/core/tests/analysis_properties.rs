//! Properties of the whole analysis on small generated networks.

use ludbfp_core::ludb::{
    analyze_feedforward, evaluate, foi_terms, in_domain, optimize_delay, term, theta_grid_refine, Arrival,
    AnalysisConfig, AnalysisError, Budget, GridSpec, Objective, TermBuilder,
};
use ludbfp_core::minplus::Assignment;
use ludbfp_core::netmodel::{generate, parse_network, serialize_network, GeneratorConfig, Topology};
use ludbfp_core::netmodel::{ServerGraph, TandemView};
use ludbfp_core::prolong::{enumerate_all, exhaustive_count, hfp_alternatives, run_method, Method};
use ludbfp_core::sim::{simulate, SimConfig};
use ludbfp_core::{rat, to_f64, Rational};
use proptest::prelude::*;
use std::rc::Rc;

fn small(seed: u64) -> ServerGraph {
    generate(&GeneratorConfig {
        topology: Topology::Mixed {
            weights: [2.0, 1.0, 1.0],
            p: 0.5,
        },
        servers: 3..=5,
        flows: 3..=5,
        path_len: 2..=4,
        utilization: (0.1, 0.8),
        seed,
    })
    .expect("small networks are always satisfiable")
}

/// Bursts and `R·T` large enough for a simulation with few packets.
fn simulable(mut net: ServerGraph) -> ServerGraph {
    for s in &mut net.servers {
        let need = rat(1, 20) / &s.rate;
        if s.latency < need {
            s.latency = need;
        }
    }
    for f in &mut net.flows {
        if f.burst < rat(1, 20) {
            f.burst = rat(1, 20);
        }
    }
    net
}

const METHODS: [Method; 5] = [
    Method::LudbFf,
    Method::FpExhaustive,
    Method::FpHeuristic,
    Method::RndFp(2),
    Method::RndHfp(2),
];

/// `None` when every alternative tried overloads a server, which only
/// random selections can run into.
fn bounds(net: &ServerGraph, seed: u64) -> Vec<(Method, Option<Rational>)> {
    let cfg = AnalysisConfig::default();
    METHODS
        .iter()
        .map(|&m| match run_method(net, m, seed, None, &cfg, &Budget::unlimited()) {
            Ok(out) => (m, Some(out.delay)),
            Err(AnalysisError::Invalid(_)) if m.k().is_some() => (m, None),
            Err(e) => panic!("{m}: {e}"),
        })
        .collect()
}

fn le(a: &Rational, b: &Option<Rational>) -> bool {
    b.as_ref().map_or(true, |b| a <= b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dominance_chain(seed in 0u64..1_000_000) {
        let net = small(seed);
        let b = bounds(&net, seed);
        let get = |m: Method| b.iter().find(|(x, _)| *x == m).unwrap().1.clone();
        let ex = get(Method::FpExhaustive).unwrap();
        let heur = get(Method::FpHeuristic).unwrap();
        let plain = get(Method::LudbFf).unwrap();
        prop_assert!(ex <= heur, "exhaustive {ex} > heuristic {heur}");
        prop_assert!(heur <= plain, "heuristic {heur} > plain {plain}");
        prop_assert!(le(&ex, &get(Method::RndFp(2))));
        prop_assert!(le(&heur, &get(Method::RndHfp(2))));
    }

    #[test]
    fn simulation_stays_below_every_bound(seed in 0u64..1_000_000) {
        let net = simulable(small(seed));
        let foi = net.foi.unwrap();
        let report = simulate(&net, &SimConfig { horizon: 4.0, runs: 3, seed, ..Default::default() }).unwrap();
        for (m, bound) in bounds(&net, seed).into_iter().filter_map(|(m, b)| b.map(|b| (m, b))) {
            prop_assert!(
                report.max_delay[foi] <= to_f64(&bound) + 1e-9,
                "{m}: simulated {} above bound {}", report.max_delay[foi], to_f64(&bound)
            );
        }
    }

    #[test]
    fn lp_is_below_the_theta_grid(seed in 0u64..1_000_000) {
        let net = small(seed);
        let cfg = AnalysisConfig::default();
        let budget = Budget::unlimited();
        let foi = net.foi.unwrap();
        let mut b = TermBuilder::new(&net, &cfg, &budget, false);
        let terms = foi_terms(&mut b, &net).unwrap();
        let z = b.spare_theta();
        let arrival = Rc::new(Arrival::Source { label: "foi".into(), curve: net.flows[foi].arrival() });
        for (_, service) in terms {
            let thetas: Vec<_> = term::thetas(&service).into_iter().collect();
            if thetas.len() > 3 {
                continue;
            }
            let opt = optimize_delay(&service, &arrival, z, &budget).unwrap();
            prop_assert_eq!(evaluate(&service, &arrival, Objective::Delay, &opt.assignment).unwrap(), opt.value.clone());
            let spec = GridSpec::uniform(9);
            prop_assert_eq!(theta_grid_refine(&service, &arrival, &spec, &opt, &budget).unwrap(), opt.value.clone());
            let hi = ludbfp_core::ludb::default_range(&service, &arrival);
            let mut idx = vec![0usize; thetas.len()];
            'grid: loop {
                let asg: Assignment = thetas.iter().zip(&idx).map(|(t, k)| (*t, &hi * rat(*k as i64, 8))).collect();
                if in_domain(&service, &arrival, &asg).unwrap() {
                    let v = evaluate(&service, &arrival, Objective::Delay, &asg).unwrap();
                    prop_assert!(to_f64(&opt.value) <= to_f64(&v) + 1e-9, "LP {} above grid {}", opt.value, v);
                }
                for d in 0..=idx.len() {
                    if d == idx.len() {
                        break 'grid;
                    }
                    idx[d] += 1;
                    if idx[d] <= 8 {
                        break;
                    }
                    idx[d] = 0;
                }
            }
        }
    }

    #[test]
    fn network_files_round_trip(seed in 0u64..1_000_000) {
        let net = small(seed);
        let text = serialize_network(&net);
        let back = parse_network(&text).unwrap();
        prop_assert_eq!(serialize_network(&back), text);
        prop_assert_eq!(back, net);
    }

    #[test]
    fn alternative_counts(seed in 0u64..1_000_000) {
        let net = small(seed);
        for f in 0..net.flows.len() {
            let net = net.with_foi(f);
            let view = TandemView::for_foi(&net).unwrap();
            let all = enumerate_all(&view).count() as u128;
            prop_assert_eq!(all, exhaustive_count(&view));
            prop_assert!(hfp_alternatives(&view).len() as u128 <= all);
        }
    }

    #[test]
    fn analysis_is_deterministic(seed in 0u64..1_000_000) {
        let net = small(seed);
        let cfg = AnalysisConfig::default();
        let a = analyze_feedforward(&net, &cfg, &Budget::unlimited()).unwrap();
        let b = analyze_feedforward(&net, &cfg, &Budget::unlimited()).unwrap();
        prop_assert_eq!(a.delay, b.delay);
        prop_assert_eq!(a.output, b.output);
    }
}

#[test]
fn overloaded_random_pick_is_unbounded_not_a_violation() {
    let net = small(253344);
    let b = bounds(&net, 253344);
    assert!(b.iter().any(|(_, v)| v.is_none()));
    for (m, v) in b {
        assert!(v.is_some() || m.k().is_some(), "{m}");
    }
}
