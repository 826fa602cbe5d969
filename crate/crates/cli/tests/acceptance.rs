//! End-to-end acceptance checks, one PASS/FAIL line each.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use edgecloud::caching::*;
use edgecloud::graph::*;
use edgecloud::offloading::*;
use edgecloud::reliability::*;
use edgecloud::rem::*;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[path = "../../core/tests/support/caching_oracle.rs"]
#[allow(dead_code)]
mod caching_oracle;
#[path = "../../core/tests/support/single_mec_oracle.rs"]
#[allow(dead_code)]
mod single_mec_oracle;

use caching_oracle::{random_toy, BruteForce};
use single_mec_oracle::{numeric_single, random_single};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn single_mec_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0_f64;
    let mut elapsed = 0.0;
    let mut checked = 0;
    while checked < 100 {
        let k = rng.random_range(1..=5);
        let (tasks, ch, cap) = random_single(&mut rng, k);
        let Some(want) = numeric_single(&tasks, &ch, cap) else {
            continue;
        };
        let t = Instant::now();
        let got = solve_single_mec(&tasks, &ch, cap).map_err(|e| format!("instance {checked}: {e}"))?;
        elapsed += t.elapsed().as_secs_f64();
        worst = worst.max((got.total_power - want).abs() / want);
        checked += 1;
    }
    check(worst <= 1e-5, || format!("worst relative error {worst:e}"))?;
    check(elapsed < 1.0, || format!("closed form took {elapsed:.3} s"))?;
    Ok(format!("100 instances, worst rel err {worst:.2e}, {elapsed:.4} s"))
}

fn psca_near_optimality() -> Outcome {
    let spec = ScenarioSpec::default();
    check(spec.users == 4 && spec.mec_capacity == [2.7e9, 6e8] && spec.power_cap == 0.2, || "generator defaults".into())?;
    let params = PscaParams::default();
    check(params.p_exp == 0.025, || "penalty exponent".into())?;
    // only the PSCA solves count toward the runtime; the references are oracles
    let rows: Vec<Result<([f64; 4], f64), String>> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let s = generate_scenario(&spec, seed);
            let err = |what: &str, e: OffloadError| format!("seed {seed} {what}: {e}");
            let t = Instant::now();
            let ps = solve_multi_mec_psca(&s, &params).map_err(|e| err("psca", e))?;
            let elapsed = t.elapsed().as_secs_f64();
            let ex = exhaustive_baseline(&s).map_err(|e| err("exhaustive", e))?;
            let joint = snr_association_baseline(&s, true).map_err(|e| err("snr joint", e))?;
            let disjoint = snr_association_baseline(&s, false).map_err(|e| err("snr disjoint", e))?;
            Ok(([ps.total_power, ex.total_power(), joint.total_power(), disjoint.total_power()], elapsed))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let elapsed: f64 = rows.iter().map(|r| r.1).sum();
    let within = rows.iter().filter(|r| r.0[0] <= 1.1 * r.0[1]).count();
    let mean = |c: usize| rows.iter().map(|r| r.0[c]).sum::<f64>() / rows.len() as f64;
    let (ps, joint, disjoint) = (mean(0), mean(2), mean(3));
    check(within >= 45, || format!("{within}/50 within 10% of exhaustive"))?;
    check(ps <= joint && joint <= disjoint, || format!("means psca {ps:e} joint {joint:e} disjoint {disjoint:e}"))?;
    check(elapsed < 60.0, || format!("PSCA took {elapsed:.1} s"))?;
    Ok(format!("{within}/50 within 10%, means {ps:.4} <= {joint:.4} <= {disjoint:.4} W, PSCA {elapsed:.1} s"))
}

fn caching_bounds() -> Outcome {
    let start = Instant::now();
    let spec = CachingSpec::default();
    check(spec.nodes == 10 && spec.objects == 4 && spec.horizon == 25 && spec.repositories == 3, || "generator defaults".into())?;
    let draws = 6u64;
    let jobs: Vec<(u64, usize)> = (0..draws).flat_map(|s| (1..=3).map(move |d| (s, d))).collect();
    let costs: Vec<Result<(f64, f64), String>> = jobs
        .par_iter()
        .map(|&(seed, d)| {
            let mut net = generate_caching_network(&spec, seed).map_err(|e| e.to_string())?;
            net.requests.iter_mut().for_each(|r| r.deadline = d);
            let lp = solve_caching(&net, true, true).map_err(|e| format!("seed {seed} D {d} lp: {e}"))?;
            let sp = shortest_path_baseline(&net, true).map_err(|e| format!("seed {seed} D {d} sp: {e}"))?;
            validate_schedule(&net, &lp.schedule, 1e-7).map_err(|e| format!("seed {seed} D {d}: {e}"))?;
            Ok((lp.cost, sp.cost))
        })
        .collect();
    let costs = costs.into_iter().collect::<Result<Vec<_>, _>>()?;
    if let Some((i, c)) = costs.iter().enumerate().find(|(_, c)| c.0 > c.1 + 1e-9) {
        return Err(format!("draw {i}: relaxed {} above shortest path {}", c.0, c.1));
    }
    let gaps: Vec<f64> = (0..3)
        .map(|d| (0..draws as usize).map(|s| costs[s * 3 + d].1 - costs[s * 3 + d].0).sum::<f64>() / draws as f64)
        .collect();
    check(gaps.windows(2).all(|w| w[1] >= w[0] - 1e-9), || format!("mean gap by D {gaps:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut toys = 0;
    for _ in 0..150 {
        let net = random_toy(&mut rng);
        let ignore = rng.random::<bool>();
        let (Some(b), Ok(sp)) = (BruteForce::solve(&net, ignore), shortest_path_baseline(&net, ignore)) else {
            continue;
        };
        let r = solve_caching(&net, true, ignore).map_err(|e| format!("toy relaxation: {e}"))?;
        check(r.cost <= b + 1e-9 && b <= sp.cost + 1e-9, || format!("toy: relaxed {} binary {b} sp {}", r.cost, sp.cost))?;
        toys += 1;
    }
    check(toys >= 40, || format!("only {toys} toys compared"))?;
    let elapsed = start.elapsed().as_secs_f64();
    check(elapsed < 120.0, || format!("took {elapsed:.1} s"))?;
    Ok(format!("{} draws lp <= sp, mean gap by D {:.3?}, {toys} toys bracketed, {elapsed:.1} s", costs.len(), gaps))
}

fn rem_recovery() -> Outcome {
    let spec = SyntheticSpec { nodes: 150, ..SyntheticSpec::default() };
    let params = SimilarityParams { sigma: 5.0, r0: (1.5 * spec.spacing()).powi(2), rule: DistanceRule::Squared };
    let grids = synthetic_grids(&spec, 3).map_err(|e| e.to_string())?;
    let dict = build_dictionary(&grids, &params, 6).map_err(|e| e.to_string())?;
    let rank = check_sampling(&SamplingMask::full(150), &dict).dictionary_rank;
    let active: Vec<usize> = (0..dict.num_aps()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0_f64;
    let mut trials = 0;
    while trials < 200 {
        let mask = SamplingMask::random(150, rank + 10, &mut rng).map_err(|e| e.to_string())?;
        if !check_sampling(&mask, &dict).recoverable {
            continue;
        }
        let (x, _) = bandlimited_signal(&dict, &active, &mut rng);
        let y = sample_field(&x, &mask, 0.0, &mut rng).map_err(|e| e.to_string())?;
        let r = recover_bp(&y, &mask, &dict, 0.0).map_err(|e| e.to_string())?;
        worst = worst.max(nmse(&r.map, &x).map_err(|e| e.to_string())?);
        trials += 1;
    }
    check(worst <= 1e-6, || format!("worst nmse {worst:e}"))?;

    let mut means = Vec::new();
    for size in [rank, rank * 3 / 4, rank / 2, rank / 4] {
        let mut total = 0.0;
        for _ in 0..30 {
            let (x, _) = bandlimited_signal(&dict, &active, &mut rng);
            let mask = SamplingMask::random(150, size, &mut rng).map_err(|e| e.to_string())?;
            let y = sample_field(&x, &mask, 0.0, &mut rng).map_err(|e| e.to_string())?;
            let r = recover_bp(&y, &mask, &dict, 0.0).map_err(|e| e.to_string())?;
            total += nmse(&r.map, &x).map_err(|e| e.to_string())?;
        }
        means.push(total / 30.0);
    }
    check(means.windows(2).all(|w| w[1] >= w[0]), || format!("mean nmse as samples drop {means:?}"))?;
    Ok(format!("200/200 recoverable masks, worst nmse {worst:.1e}; undersampled means {means:.3?}"))
}

fn oracle_eigenvalues(g: &Graph) -> Vec<f64> {
    let mut l = DMatrix::<f64>::zeros(g.num_vertices(), g.num_vertices());
    for e in g.edges() {
        l[(e.i, e.i)] += e.w;
        l[(e.j, e.j)] += e.w;
        l[(e.i, e.j)] -= e.w;
        l[(e.j, e.i)] -= e.w;
    }
    let mut v: Vec<f64> = SymmetricEigen::new(l).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn random_graph(n: usize, extra: usize, rng: &mut ChaCha8Rng) -> Graph {
    let mut edges: Vec<Edge> = (1..n).map(|v| Edge::new(rng.random_range(0..v), v, rng.random_range(0.5..2.0))).collect();
    let mut tries = 0;
    while edges.len() < n - 1 + extra && tries < 10 * extra {
        tries += 1;
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        if i != j && !edges.iter().any(|e| e.key() == (i.min(j), i.max(j))) {
            edges.push(Edge::new(i, j, rng.random_range(0.5..2.0)));
        }
    }
    Graph::new(n, edges).unwrap()
}

fn spectrum(g: &Graph) -> Result<LaplacianSpectrum, String> {
    eigendecompose(&build_laplacian(g)).map_err(|e| e.to_string())
}

fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / xs.len() as f64, ys.iter().sum::<f64>() / ys.len() as f64);
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

fn perturbation_correctness() -> Outcome {
    let p2 = Graph::new(2, [Edge::unit(0, 1)]).unwrap();
    let exact = oracle_eigenvalues(&Graph::new(2, []).unwrap())[1] - oracle_eigenvalues(&p2)[1];
    let first =
        eigenvalue_perturbation(&spectrum(&p2)?, &Edge::unit(0, 1), 1, EdgeChange::Deletion).map_err(|e| e.to_string())?;
    check((first + 2.0).abs() < 1e-12 && (first - exact).abs() < 1e-12, || format!("P2: first order {first}, exact {exact}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut slopes = Vec::new();
    let mut trace_err = 0.0_f64;
    while slopes.len() < 20 {
        let g = random_graph(rng.random_range(6..14), 8, &mut rng);
        let s = spectrum(&g)?;
        for e in g.edges() {
            let p = edge_perturbation(&s, e, EdgeChange::Deletion).map_err(|e| e.to_string())?;
            trace_err = trace_err.max((p.delta_lambda.iter().sum::<f64>() + 2.0 * e.w).abs());
        }
        let e = g.edges()[rng.random_range(0..g.num_edges())];
        let k = rng.random_range(1..g.num_vertices());
        if !s.is_simple(k) {
            continue;
        }
        let first = eigenvalue_perturbation(&s, &e, k, EdgeChange::Deletion).map_err(|e| e.to_string())?;
        let base = oracle_eigenvalues(&g)[k];
        let points: Vec<(f64, f64)> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&d| {
                let shrunk = g.with_edge_weight(e.i, e.j, e.w * (1.0 - d)).unwrap();
                (d, (oracle_eigenvalues(&shrunk)[k] - base - d * first).abs())
            })
            .collect();
        if points.iter().any(|p| p.1 < 1e-12) {
            continue;
        }
        slopes.push(loglog_slope(&points));
    }
    let (lo, hi) = slopes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
    check(lo >= 1.7 && hi <= 2.3, || format!("slopes {slopes:.3?}"))?;
    check(trace_err <= 1e-10, || format!("trace error {trace_err:e}"))?;
    Ok(format!("P2 -2 exact, slopes in [{lo:.3}, {hi:.3}] over 20 graphs, trace err {trace_err:.1e}"))
}

fn centrality_bridges() -> Outcome {
    let mut hits = 0;
    for seed in 0..20 {
        let tc = generate_two_cluster_graph((20, 20), 0.4, 4, seed).map_err(|e| e.to_string())?;
        let ranked = centrality_ranking(&spectrum(&tc.graph)?, tc.graph.edges(), 2).map_err(|e| e.to_string())?;
        if ranked[..4].iter().all(|(e, _)| tc.is_bridge(e.i, e.j)) {
            hits += 1;
        }
    }
    check(hits >= 19, || format!("{hits}/20"))?;
    Ok(format!("bridges top-4 in {hits}/20 graphs"))
}

fn triangle_grid_gap() -> Result<f64, String> {
    let g = Graph::new(3, [Edge::new(0, 1, 1.0), Edge::new(1, 2, 1.6), Edge::new(0, 2, 0.7)]).unwrap();
    let s = spectrum(&g)?;
    let r = [1.0, 1.2, 0.8];
    let m = FadingLinkModel { distances: r.to_vec(), ..FadingLinkModel::default() };
    let c: Vec<f64> = g
        .edges()
        .iter()
        .map(|e| eigenvalue_perturbation(&s, e, 1, EdgeChange::Deletion).map(|d| -d))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let w: Vec<f64> = r.iter().map(|r| r * r).collect();
    let (floor, cap, h) = (m.t_floor(), 3.0, 1e-3);
    let loss = |t: [f64; 3]| -> f64 { (0..3).map(|i| c[i] * gamma_cdf(1.0 / t[i], 1, 1.0)).sum() };
    let mut best = f64::INFINITY;
    for a in 0.. {
        let t0 = floor + a as f64 * h;
        if cap - w[0] * t0 - w[2] * floor < w[1] * floor {
            break;
        }
        for b in 0.. {
            let t1 = floor + b as f64 * h;
            let t2 = (cap - w[0] * t0 - w[1] * t1) / w[2];
            if t2 < floor {
                break;
            }
            best = best.min(loss([t0, t1, t2]));
        }
    }
    let opt = solve_robust_allocation(&s, g.edges(), &m, cap).map_err(|e| e.to_string())?;
    Ok((opt.objective - best).abs())
}

fn robust_allocation() -> Outcome {
    let start = Instant::now();
    let tc = generate_two_cluster_graph_exact((30, 30), (378, 379), 4, 7).map_err(|e| e.to_string())?;
    let edges = tc.graph.edges();
    let bridges = edges.iter().filter(|e| tc.is_bridge(e.i, e.j)).count();
    check(edges.len() == 761 && bridges == 4, || format!("{} edges, {bridges} bridges", edges.len()))?;
    let s = connected_spectrum(&tc.graph).map_err(|e| e.to_string())?;
    let budgets = [400.0, 500.0, 600.0, 800.0, 1000.0, 1500.0, 2000.0, 3000.0, 4000.0, 6000.0];
    let rows: Vec<Result<[f64; 4], String>> = budgets
        .par_iter()
        .map(|&p| {
            let run = |n: u32| -> Result<(f64, f64), String> {
                let m = FadingLinkModel { n, ..FadingLinkModel::default() };
                let c = m.c_max(p);
                let opt = solve_robust_allocation(&s, edges, &m, c).map_err(|e| format!("budget {p} n {n}: {e}"))?;
                let uni = uniform_power_baseline(&s, edges, &m, c).map_err(|e| e.to_string())?;
                Ok((opt.normalized, uni.normalized))
            };
            let (o1, u1) = run(1)?;
            let (o4, u4) = run(4)?;
            Ok([o1, u1, o4, u4])
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    for (p, r) in budgets.iter().zip(&rows) {
        check(r[0] < r[1] && r[2] < r[3], || {
            format!("budget {p}: optimized {:e}/{:e} vs uniform {:e}/{:e}", r[0], r[2], r[1], r[3])
        })?;
        check(r[2] <= r[0], || format!("budget {p}: n=4 {:e} above n=1 {:e}", r[2], r[0]))?;
    }
    let gap = triangle_grid_gap()?;
    check(gap <= 1e-4, || format!("triangle optimizer off the grid optimum by {gap:e}"))?;
    let elapsed = start.elapsed().as_secs_f64();
    check(elapsed < 120.0, || format!("took {elapsed:.1} s"))?;
    Ok(format!("761 edges, 10 budgets ordered, triangle gap {gap:.1e}, {elapsed:.1} s"))
}

const SCENARIOS: [(&str, &str); 5] = [
    ("offload", r#"{"L": [0.8, 1.2], "instances": 3}"#),
    ("cache", r#"{"arrival_rates": [1.0], "D": [1, 2], "instances": 2, "nodes": 6, "T": 10}"#),
    ("rem", r#"{"K": 6, "synthetic": {"nodes": 150}, "samples": 40}"#),
    ("reliability", r#"{"graph": {"two_cluster": {"sizes": [8, 8], "p_in": 0.5, "bridges": 2}}, "budgets": [60, 120]}"#),
    ("centrality", r#"{}"#),
];

fn run_cli(cmd: &str, scenario: &Path, out: &Path, threads: &str) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_edgecloud"))
        .args([cmd, "--scenario"])
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .args(["--seed", "42"])
        .env("EDGECLOUD_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    check(status.status.success(), || format!("{cmd}: {}", String::from_utf8_lossy(&status.stderr)))?;
    std::fs::read(out).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance_determinism");
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    for (cmd, text) in SCENARIOS {
        let scenario = dir.join(format!("{cmd}.json"));
        std::fs::write(&scenario, text).map_err(|e| e.to_string())?;
        let first = run_cli(cmd, &scenario, &dir.join(format!("{cmd}_a.csv")), "0")?;
        let second = run_cli(cmd, &scenario, &dir.join(format!("{cmd}_b.csv")), "0")?;
        let serial = run_cli(cmd, &scenario, &dir.join(format!("{cmd}_c.csv")), "1")?;
        check(!first.is_empty() && first == second, || format!("{cmd}: runs differ"))?;
        check(first == serial, || format!("{cmd}: output depends on thread count"))?;
    }
    Ok("5 subcommands byte-identical across runs and thread counts".into())
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("single-MEC optimality", single_mec_optimality),
        ("PSCA near-optimality", psca_near_optimality),
        ("caching bounds", caching_bounds),
        ("REM exact recovery", rem_recovery),
        ("perturbation correctness", perturbation_correctness),
        ("centrality ranking", centrality_bridges),
        ("robust allocation", robust_allocation),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                println!("FAIL {} {name}: {detail}", i + 1);
                failed += 1;
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
