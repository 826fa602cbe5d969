use edgecloud::caching::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[path = "support/caching_oracle.rs"]
mod caching_oracle;
use caching_oracle::{random_toy, BruteForce};

#[test]
fn toy_bounds_against_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut compared = 0;
    let mut with_baseline = 0;
    for _ in 0..150 {
        let net = random_toy(&mut rng);
        let ignore = rng.random::<bool>();
        let exact = BruteForce::solve(&net, ignore);
        let relaxed = solve_caching(&net, true, ignore);
        match (exact, &relaxed) {
            (Some(b), Ok(r)) => {
                validate_schedule(&net, &r.schedule, 1e-7).unwrap();
                assert!(r.cost <= b + 1e-9, "relaxed {} above binary {b}", r.cost);
                compared += 1;
                if let Ok(sp) = shortest_path_baseline(&net, ignore) {
                    validate_schedule(&net, &sp.schedule, 0.0).unwrap();
                    assert!(b <= sp.cost + 1e-9, "binary {b} above shortest path {}", sp.cost);
                    with_baseline += 1;
                }
            }
            (Some(b), Err(e)) => panic!("binary optimum {b} but relaxation failed: {e}"),
            (None, _) => assert!(shortest_path_baseline(&net, ignore).is_err()),
        }
    }
    assert!(compared >= 60 && with_baseline >= 40, "{compared} / {with_baseline}");
}

fn line3() -> CachingNetwork {
    let link = |from, to| Link { from, to, capacity: 1, cost: vec![1.0] };
    CachingNetwork {
        nodes: 3,
        objects: 1,
        horizon: 4,
        dtau: 1.0,
        storage: vec![1; 3],
        links: vec![link(0, 1), link(1, 0), link(1, 2), link(2, 1)],
        repositories: vec![vec![0], vec![], vec![]],
        requests: vec![Request { node: 2, object: 0, slot: 2, deadline: 1 }],
        popularity: vec![vec![0.0]; 3],
        c0: 1.0,
        p0: 1.0,
    }
}

#[test]
fn three_node_line_bounds() {
    let net = line3();
    assert_eq!(BruteForce::solve(&net, true), Some(2.0));
    let sp = shortest_path_baseline(&net, true).unwrap();
    assert_eq!(sp.cost, 2.0);
    for ignore in [true, false] {
        let b = BruteForce::solve(&net, ignore).unwrap();
        let r = solve_caching(&net, true, ignore).unwrap();
        assert!(r.cost <= b + 1e-9, "ignore {ignore}: {} vs {b}", r.cost);
    }
}

#[test]
fn single_slot_single_hop_is_tight() {
    // with a zero deadline there is no room to reuse a fractional copy
    let mut net = line3();
    net.links[0].cost = vec![4.0];
    net.requests = vec![Request { node: 1, object: 0, slot: 1, deadline: 0 }];
    assert_eq!(BruteForce::solve(&net, true), Some(4.0));
    assert_eq!(shortest_path_baseline(&net, true).unwrap().cost, 4.0);
    let r = solve_caching(&net, true, true).unwrap();
    assert!((r.cost - 4.0).abs() < 1e-9, "{}", r.cost);
}

#[test]
fn zero_requests_cost_nothing() {
    let spec = CachingSpec { arrival_rate: 0.0, ..CachingSpec::default() };
    let net = generate_caching_network(&spec, 1).unwrap();
    assert!(net.requests.is_empty());
    assert_eq!(solve_caching(&net, true, true).unwrap().cost, 0.0);
    assert_eq!(shortest_path_baseline(&net, true).unwrap().cost, 0.0);
}

fn small_spec(rate: f64) -> CachingSpec {
    CachingSpec { nodes: 6, horizon: 10, arrival_rate: rate, ..CachingSpec::default() }
}

#[test]
fn lp_cost_monotone_in_deadline_and_caps() {
    for seed in 0..6 {
        let base = generate_caching_network(&small_spec(1.5), seed).unwrap();
        let cost = |net: &CachingNetwork| solve_caching(net, true, true).map(|s| s.cost).unwrap_or(f64::INFINITY);
        let mut last = f64::INFINITY;
        for d in 0..=3 {
            let mut net = base.clone();
            net.requests.iter_mut().for_each(|r| r.deadline = d);
            let c = cost(&net);
            assert!(c <= last + 1e-9, "seed {seed} D {d}: {c} > {last}");
            last = c;
        }
        let mut last = f64::INFINITY;
        for cap in 1..=4 {
            let mut net = base.clone();
            net.links.iter_mut().for_each(|l| l.capacity = cap);
            let c = cost(&net);
            assert!(c <= last + 1e-9, "seed {seed} T_uv {cap}");
            last = c;
        }
        let mut last = f64::INFINITY;
        for cap in 4..=6 {
            let mut net = base.clone();
            net.storage.iter_mut().for_each(|s| *s = cap);
            let c = cost(&net);
            assert!(c <= last + 1e-9, "seed {seed} S_u {cap}");
            last = c;
        }
    }
}

#[test]
fn storage_cap_limits_caching() {
    // two objects requested at the far end of a line; a relay that holds one
    // object at a time cannot stage both ahead of time
    let link = |from, to| Link { from, to, capacity: 2, cost: vec![1.0, 1.0] };
    let mut net = CachingNetwork {
        nodes: 3,
        objects: 2,
        horizon: 4,
        dtau: 1.0,
        storage: vec![2, 2, 2],
        links: vec![link(0, 1), link(1, 0), link(1, 2), link(2, 1)],
        repositories: vec![vec![0, 1], vec![], vec![]],
        requests: vec![
            Request { node: 2, object: 0, slot: 3, deadline: 0 },
            Request { node: 2, object: 1, slot: 3, deadline: 0 },
            Request { node: 1, object: 0, slot: 1, deadline: 0 },
            Request { node: 1, object: 1, slot: 1, deadline: 0 },
        ],
        popularity: vec![vec![0.0; 2]; 3],
        c0: 1.0,
        p0: 1.0,
    };
    let wide = solve_caching(&net, true, true).unwrap().cost;
    net.storage[1] = 1;
    let narrow = solve_caching(&net, true, true).unwrap().cost;
    assert_eq!(BruteForce::solve(&net, true).map(|b| b >= narrow - 1e-9), Some(true));
    assert!(narrow >= wide - 1e-9);
}

#[test]
fn lp_below_shortest_path_on_generated_instances() {
    for seed in 0..4 {
        let net = generate_caching_network(&small_spec(2.0), seed).unwrap();
        let lp = solve_caching(&net, true, true).unwrap();
        let sp = shortest_path_baseline(&net, true).unwrap();
        validate_schedule(&net, &lp.schedule, 1e-7).unwrap();
        validate_schedule(&net, &sp.schedule, 0.0).unwrap();
        assert!(lp.cost <= sp.cost + 1e-9);
        let with_storage = solve_caching(&net, true, false).unwrap();
        assert!((with_storage.cost - with_storage.breakdown.total).abs() < 1e-9);
    }
}

#[test]
fn validator_catches_violations() {
    let net = line3();
    let sol = solve_caching(&net, true, true).unwrap();
    let mut x = sol.schedule.clone();
    // drop the final hop
    for e in 0..net.links.len() {
        x.t[e][0][3] = 0.0;
        x.t[e][0][2] = 0.0;
    }
    assert!(validate_schedule(&net, &x, 1e-9).unwrap_err().starts_with("(a)"));
    let mut y = CacheSchedule::zeros(&net);
    y.s[0][0] = vec![1.0; 4];
    y.t[2][0][1] = 1.0;
    assert!(validate_schedule(&net, &y, 1e-9).unwrap_err().starts_with("(c)"));
    let mut z = sol.schedule;
    z.s[2][0][1] = 1.0;
    assert!(validate_schedule(&net, &z, 1e-9).unwrap_err().starts_with("(b)"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn relaxed_schedules_satisfy_every_constraint(seed in 0u64..10_000, rate in 0.5f64..3.0, d in 0usize..3) {
        let spec = CachingSpec { nodes: 5, horizon: 8, arrival_rate: rate, deadline: d, ..CachingSpec::default() };
        let net = generate_caching_network(&spec, seed).unwrap();
        if let Ok(sol) = solve_caching(&net, true, true) {
            prop_assert!(validate_schedule(&net, &sol.schedule, 1e-7).is_ok());
            let c = schedule_cost(&net, &sol.schedule).unwrap();
            prop_assert!((c.transport - sol.cost).abs() < 1e-7);
            if let Ok(sp) = shortest_path_baseline(&net, true) {
                prop_assert!(sol.cost <= sp.cost + 1e-7);
            }
        }
    }
}
