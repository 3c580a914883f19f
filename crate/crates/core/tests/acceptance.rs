//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the report is printed even under `cargo test`.

use std::collections::HashSet;
use std::fs;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use ubnin::builder::CohortTable;
use ubnin::codec::{complete_graph_oracle, decode, encode, encode_float64_emulation};
use ubnin::graph::{threshold_sweep, upper_pairs, BinaryNetwork, WeightedNetwork};
use ubnin::io::write_subjects;
use ubnin::metrics::{
    characteristic_path_length, generators, mean_clustering, nodal_clustering, reference_network,
    small_world_index, SmallWorldConfig,
};
use ubnin::pipeline::{run_fingerprint, synthetic, RunConfig, Sweep};
use ubnin::stats::{one_way_anova, permutation_test, PermutationConfig};
use ubnin::Execution;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn criterion_1() -> Outcome {
    let got = encode(&BinaryNetwork::complete(10).unwrap()).to_decimal_string();
    let want = "511.999999999985448084771633148193359375";
    check(got == want, format!("got {got}"))?;
    Ok(format!("K10 = {got}"))
}

fn criterion_2() -> Outcome {
    let table = [
        (20, 524288.0),
        (30, 536870912.0),
        (40, 549755813888.0),
        (50, 562949953421312.0),
    ];
    for (n, want) in table {
        let got = encode(&BinaryNetwork::complete(n).unwrap()).to_f64();
        check(got == want, format!("K{n}: got {got:e}, want {want:e}"))?;
    }
    let k1024 = encode_float64_emulation(&BinaryNetwork::complete(1024).unwrap());
    let shown = format!("{k1024:.14e}");
    check(shown == "8.98846567431158e307", format!("K1024 emulation: {shown}"))?;
    let k1025 = encode_float64_emulation(&BinaryNetwork::complete(1025).unwrap());
    check(!k1025.is_finite(), format!("K1025 emulation is finite: {k1025}"))?;
    Ok(format!("K20..K50 exact, K1024 emulated {shown}, K1025 emulated {k1025}"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let code = encode(&BinaryNetwork::complete(1025).unwrap());
    let elapsed = start.elapsed();
    let oracle = complete_graph_oracle(1025).map_err(|e| e.to_string())?;
    check(code == oracle, "K1025 differs from the closed form")?;
    // 2^1024 - 2^-523776 written over the denominator 2^523776.
    let t = 523_776u64;
    let expected = (BigUint::one() << (1024 + t)) - BigUint::one();
    check(code.scale() == t && *code.numerator() == expected, "K1025 numerator/scale mismatch")?;
    check(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    Ok(format!("exact K1025 with scale {t} in {elapsed:.2?}"))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let pairs: Vec<(usize, usize)> = upper_pairs(5).collect();
    let mut seen = HashSet::new();
    for mask in 0u32..1 << pairs.len() {
        let edges: Vec<_> = pairs
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        let b = BinaryNetwork::from_edges(5, &edges).unwrap();
        let code = encode(&b);
        let back = decode(&code).map_err(|e| e.to_string())?;
        check(back == b, format!("round trip failed for mask {mask:#x}"))?;
        seen.insert(code);
    }
    let elapsed = start.elapsed();
    check(seen.len() == 1024, format!("{} distinct codes", seen.len()))?;
    check(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("1024 distinct codes, all round trips exact, {elapsed:.2?}"))
}

/// Triangle-count clustering and Floyd-Warshall path length on a dense matrix.
fn brute_force(m: &[Vec<bool>]) -> (Vec<f64>, Option<f64>) {
    let n = m.len();
    let clustering = (0..n)
        .map(|i| {
            let nb: Vec<usize> = (0..n).filter(|&j| m[i][j]).collect();
            let k = nb.len();
            if k < 2 {
                return 0.0;
            }
            let mut links = 0;
            for a in 0..k {
                for b in a + 1..k {
                    if m[nb[a]][nb[b]] {
                        links += 1;
                    }
                }
            }
            links as f64 / (k * (k - 1) / 2) as f64
        })
        .collect();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if m[i][j] {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    let (mut sum, mut count) = (0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            if i != j && d[i][j] < inf {
                sum += d[i][j];
                count += 1;
            }
        }
    }
    (clustering, (count > 0).then(|| sum as f64 / count as f64))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tol = 1e-12;
    for g in 0..200 {
        let n = rng.random_range(2..=12);
        let p = rng.random_range(0.1..0.9);
        let b = generators::gnp(n, p, rng.random()).unwrap();
        let (clustering, path) = brute_force(&b.to_matrix());
        for (i, c) in clustering.iter().enumerate() {
            let got = nodal_clustering(&b, i);
            check((got - c).abs() <= tol, format!("graph {g} node {i}: {got} vs {c}"))?;
        }
        let mean = clustering.iter().sum::<f64>() / n as f64;
        check((mean_clustering(&b) - mean).abs() <= tol, format!("graph {g}: mean clustering"))?;
        match (characteristic_path_length(&b), path) {
            (Ok(l), Some(want)) => {
                check((l.length - want).abs() <= tol, format!("graph {g}: L {} vs {want}", l.length))?
            }
            (Err(_), None) => {}
            (got, want) => return Err(format!("graph {g}: path length {got:?} vs {want:?}")),
        }
    }
    Ok("200 random graphs (n <= 12) agree with brute force".into())
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let levels = Sweep::default().levels().map_err(|e| e.to_string())?;
    for net in 0..100 {
        let n = rng.random_range(5..=60);
        let w = WeightedNetwork::from_fn(ubnin::graph::default_labels(n), |_, _| rng.random::<f64>())
            .map_err(|e| e.to_string())?;
        let total = n * (n - 1) / 2;
        let sweep = threshold_sweep(&w, &levels).map_err(|e| e.to_string())?;
        let mut ranked: Vec<f64> = upper_pairs(n).map(|(i, j)| w.weight(i, j)).collect();
        ranked.sort_by(|a, b| b.total_cmp(a));
        for (s, b) in levels.iter().zip(&sweep) {
            let want = (s * total as f64).round() as usize;
            check(b.edge_count() == want, format!("net {net} s={s}: {} edges, want {want}", b.edge_count()))?;
            // Every kept weight beats every dropped one.
            if want > 0 && want < total {
                let cutoff = ranked[want - 1];
                for (i, j) in upper_pairs(n) {
                    check(b.has_edge(i, j) == (w.weight(i, j) >= cutoff), format!("net {net} s={s}: wrong edge set"))?;
                }
            }
        }
        for pair in sweep.windows(2) {
            check(pair[0].edges().all(|(i, j)| pair[1].has_edge(i, j)), format!("net {net}: not nested"))?;
        }
    }
    Ok(format!("100 networks x {} levels: counts and nesting exact", levels.len()))
}

fn criterion_7() -> Outcome {
    let b = generators::watts_strogatz(56, 6, 0.1, 7).map_err(|e| e.to_string())?;
    let cfg = SmallWorldConfig {
        n_rand: 100,
        seed: 7,
        swaps_per_edge: 10,
    };
    let sw = small_world_index(&b, &cfg, Execution::default()).map_err(|e| e.to_string())?;
    check(sw.sigma > 1.0, format!("sigma = {}", sw.sigma))?;
    let degrees = b.degrees();
    for r in 0..cfg.n_rand as u64 {
        let reference = reference_network(&b, cfg.seed, r, cfg.swaps_per_edge).map_err(|e| e.to_string())?;
        check(reference.degrees() == degrees, format!("reference {r} changed the degree sequence"))?;
    }
    Ok(format!("sigma = {:.3} (gamma {:.3}, lambda {:.3}); 100 references keep degrees", sw.sigma, sw.gamma, sw.lambda))
}

fn null_cohorts(run: u64) -> (CohortTable, CohortTable) {
    let labels = synthetic::region_labels(56);
    let a = synthetic::subjects("A", 20, 56, 2 * run);
    let b = synthetic::subjects("B", 20, 56, 2 * run + 1);
    (
        CohortTable::new("A", labels.clone(), a).unwrap(),
        CohortTable::new("B", labels, b).unwrap(),
    )
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

fn criterion_8() -> Outcome {
    let runs = 50;
    let mut above = 0;
    let mut slowest = Duration::ZERO;
    for run in 0..runs {
        let (a, b) = null_cohorts(run);
        let cfg = PermutationConfig::new(vec![0.8], 1000 + run);
        let start = Instant::now();
        let result = permutation_test(&a, &b, &cfg).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        if result.p_value[0] > 0.05 {
            above += 1;
        }
    }
    check(slowest < Duration::from_secs(60), format!("slowest run took {slowest:?}"))?;
    check(above >= 45, format!("only {above}/{runs} runs with p > 0.05"))?;

    let (a, b) = null_cohorts(0);
    let cfg = PermutationConfig::new(vec![0.8], 1000);
    let results: Vec<_> = [1, 2, 8]
        .into_iter()
        .map(|t| in_pool(t, || permutation_test(&a, &b, &cfg)))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let bits = |r: &ubnin::PermutationResult| {
        r.observed_diff
            .iter()
            .chain(&r.perm_mean_diff)
            .chain(&r.p_value)
            .map(|x| x.to_bits())
            .collect::<Vec<_>>()
    };
    check(
        results.iter().all(|r| r == &results[0] && bits(r) == bits(&results[0])),
        "results differ across thread counts",
    )?;
    Ok(format!(
        "{above}/{runs} null runs with p > 0.05; slowest run {slowest:.2?}; identical on 1, 2, 8 threads"
    ))
}

fn criterion_9() -> Outcome {
    let r = one_way_anova(&[vec![1.0, 2.0], vec![5.0, 6.0]]).map_err(|e| e.to_string())?;
    // Hand oracle: SSB = 16, SSW = 1, df = (1, 2); the F(1, 2) tail is 1 - sqrt(F / (F + 2)).
    let f_want = 32.0;
    let p_want = 1.0 - (32.0f64 / 34.0).sqrt();
    let rel = |x: f64, y: f64| ((x - y) / y).abs();
    check((r.df_between, r.df_within) == (1, 2), format!("df = ({}, {})", r.df_between, r.df_within))?;
    check(rel(r.f, f_want) <= 1e-10, format!("F = {}", r.f))?;
    check(rel(r.p, p_want) <= 1e-10, format!("p = {} vs {p_want}", r.p))?;
    let other = FisherSnedecor::new(1.0, 2.0).unwrap().sf(f_want);
    check(rel(r.p, other) <= 1e-10, format!("p = {} vs statrs {other}", r.p))?;
    let same = one_way_anova(&[[1.0, 2.0, 3.0]; 3]).map_err(|e| e.to_string())?;
    check(same.f == 0.0 && same.p == 1.0, format!("identical groups: F = {}, p = {}", same.f, same.p))?;
    Ok(format!("F = {}, p = {:.12}; identical groups F = 0, p = 1", r.f, r.p))
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let labels = synthetic::region_labels(56);
    let subjects = synthetic::subjects("S", 250, 56, 10);
    let input = dir.path().join("subjects.csv");
    fs::write(&input, write_subjects(&labels, &subjects)).map_err(|e| e.to_string())?;
    let config = RunConfig::new(&input, dir.path().join("out"));

    let mut snapshots = Vec::new();
    for _ in 0..2 {
        let out = run_fingerprint(&config, Execution::default()).map_err(|e| e.to_string())?;
        let distinct: HashSet<_> = out.codes.iter().collect();
        check(distinct.len() == 250, format!("{} distinct codes", distinct.len()))?;
        let files: Vec<Vec<u8>> = out.files.iter().map(|p| fs::read(p).unwrap()).collect();
        snapshots.push(files);
    }
    check(snapshots[0] == snapshots[1], "output files differ between runs")?;
    Ok(format!("250 distinct codes twice, {} byte-identical files", snapshots[0].len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("exact K10 decimal", criterion_1),
        ("binary64 agreement", criterion_2),
        ("exact K1025", criterion_3),
        ("5-node bijection", criterion_4),
        ("metric oracles", criterion_5),
        ("thresholding", criterion_6),
        ("small-world sanity", criterion_7),
        ("permutation calibration", criterion_8),
        ("ANOVA oracle", criterion_9),
        ("fingerprint reproducibility", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        match outcome {
            Ok(msg) => println!("criterion {:2} PASS  {name}: {msg} [{took:.2?}]", k + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:2} FAIL  {name}: {msg} [{took:.2?}]", k + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
