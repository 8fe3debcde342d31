//! End-to-end acceptance gate. Each numbered criterion prints one PASS/FAIL
//! line; the single test fails if any criterion fails. Criteria run
//! sequentially so the per-criterion wall times are meaningful.

use graphon_osc::coupling::{CouplingSpec, InitialLaw};
use graphon_osc::experiments::{
    run_experiment, AnnealedGapConfig, ChaosConfig, ExperimentConfig, HolderConfig,
    InitialLawConfig, LlnConfig, RandomMeanfieldConfig, ResultTable,
};
use graphon_osc::fokker_planck::{
    kuramoto_self_consistent_r, solve_labeled_fp, solve_mckean_vlasov, FieldInit, FpConfig,
    Integrator,
};
use graphon_osc::graphon::{
    cut_norm_exact, inf_to_one_norm_exact, inf_to_one_norm_heuristic, Graphon,
};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::time::Instant;

const BASE_SEED: u64 = 0x2026_0826;

fn random_matrix(n: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Entries quantized to multiples of 2^-20: subset sums of up to 100 such
    // values are exact in f64, so summation order cannot perturb the norms
    // and exact equality against the oracle is well defined.
    let scale = f64::from(1 << 20);
    Array2::from_shape_fn((n, n), |_| (rng.gen_range(-1.0..=1.0) * scale).round() / scale)
}

/// Unpruned double-exhaustive cut norm: max over all 2^n × 2^n subset pairs.
fn cut_norm_oracle(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut best = 0.0f64;
    for s in 0u32..(1 << n) {
        let row_sums: Vec<f64> = (0..n)
            .map(|i| (0..n).filter(|&j| s >> j & 1 == 1).map(|j| a[[i, j]]).sum())
            .collect();
        for t in 0u32..(1 << n) {
            let total: f64 = (0..n).filter(|&i| t >> i & 1 == 1).map(|i| row_sums[i]).sum();
            best = best.max(total.abs());
        }
    }
    best / (n * n) as f64
}

fn two_mode_coupling() -> CouplingSpec {
    // F(θ) = 0.2 sin θ, Γ(θ,ψ) = −sin(θ−ψ) + 0.3 cos(2θ + ψ + 0.7)
    let mut drift = BTreeMap::new();
    drift.insert(1, Complex64::new(0.0, -0.1));
    drift.insert(-1, Complex64::new(0.0, 0.1));
    let mut inter = BTreeMap::new();
    inter.insert((1, -1), Complex64::new(0.0, 0.5));
    inter.insert((-1, 1), Complex64::new(0.0, -0.5));
    let c = 0.15 * Complex64::new(0.0, 0.7).exp();
    inter.insert((2, 1), c);
    inter.insert((-2, -1), c.conj());
    CouplingSpec::new(drift, inter).unwrap()
}

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn check(&mut self, id: u32, label: &str, run: impl FnOnce() -> Result<(), String>) {
        let start = Instant::now();
        let outcome = run();
        let dt = start.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => println!("criterion {id:02} PASS  {label} ({dt:.1}s)"),
            Err(msg) => {
                println!("criterion {id:02} FAIL  {label} ({dt:.1}s): {msg}");
                self.failures.push(format!("criterion {id}: {msg}"));
            }
        }
    }
}

fn fail(msg: impl Into<String>) -> Result<(), String> {
    Err(msg.into())
}

struct NormInstances {
    eight: Vec<Array2<f64>>,
    ten: Vec<Array2<f64>>,
}

fn norm_instances() -> NormInstances {
    NormInstances {
        eight: (0..200).map(|i| random_matrix(8, BASE_SEED.wrapping_add(i))).collect(),
        ten: (0..100).map(|i| random_matrix(10, BASE_SEED.wrapping_add(1000 + i))).collect(),
    }
}

fn criterion_1(inst: &NormInstances) -> Result<(), String> {
    for (i, a) in inst.eight.iter().enumerate() {
        let exact = cut_norm_exact(a).map_err(|e| e.to_string())?;
        let oracle = cut_norm_oracle(a);
        if exact != oracle {
            return fail(format!("8x8 instance {i}: exact {exact} != oracle {oracle}"));
        }
    }
    let mut hits = 0usize;
    for (i, a) in inst.ten.iter().enumerate() {
        let (exact, _) = inf_to_one_norm_exact(a).map_err(|e| e.to_string())?;
        let (heur, _) =
            inf_to_one_norm_heuristic(a, 50, BASE_SEED.wrapping_add(2000 + i as u64))
                .map_err(|e| e.to_string())?;
        if heur > exact * (1.0 + 1e-12) {
            return fail(format!("10x10 instance {i}: heuristic {heur} exceeds exact {exact}"));
        }
        if heur >= 0.95 * exact {
            hits += 1;
        }
    }
    if hits < 95 {
        return fail(format!("heuristic reached 0.95x exact on only {hits}/100 instances"));
    }
    Ok(())
}

fn criterion_2(inst: &NormInstances) -> Result<(), String> {
    for (i, a) in inst.eight.iter().chain(inst.ten.iter()).enumerate() {
        let cut = cut_norm_exact(a).map_err(|e| e.to_string())?;
        let (i2o, _) = inf_to_one_norm_exact(a).map_err(|e| e.to_string())?;
        if !(cut <= i2o + 1e-12 && i2o <= 4.0 * cut + 1e-12) {
            return fail(format!("instance {i}: cut {cut}, inf-to-one {i2o} break the sandwich"));
        }
    }
    Ok(())
}

fn check_field_invariants(m: usize, k_max: usize, integ: Integrator, coupling: &CouplingSpec) -> Result<(), String> {
    let dt = 1e-3;
    let t_end = if integ == Integrator::Explicit { 0.05 } else { 0.1 };
    let mut cfg = FpConfig::new(m, k_max, t_end, dt);
    cfg.integrator = integ;
    let mut cfg1 = FpConfig::new(1, k_max, t_end, dt);
    cfg1.integrator = integ;
    let shared = FieldInit::Shared(InitialLaw::VonMises { loc: 0.4, concentration: 1.2 });

    // class collapse on a constant graphon, and mass conservation
    let w = Graphon::constant(0.6).map_err(|e| e.to_string())?;
    let field = solve_labeled_fp(&w, coupling, &shared, &cfg).map_err(|e| e.to_string())?;
    let single = solve_labeled_fp(&w, coupling, &shared, &cfg1).map_err(|e| e.to_string())?;
    let zero = field.mode_index(0);
    for t in 0..=field.steps() {
        let c = field.coeffs_at_step(t);
        let s = single.coeffs_at_step(t);
        for x in 0..m {
            if (c[[x, zero]] - Complex64::new(1.0, 0.0)).norm() > 1e-14 {
                return fail(format!("mode 0 drifts from 1 at step {t}, class {x}"));
            }
            for col in 0..2 * k_max + 1 {
                if (c[[x, col]] - s[[0, col]]).norm() > 1e-12 {
                    return fail(format!("class collapse violated at step {t}, class {x}"));
                }
            }
        }
    }
    if m == 1 {
        return Ok(());
    }

    // label-permutation equivariance, bit exact
    let mut rng = ChaCha8Rng::seed_from_u64(BASE_SEED ^ (m as u64) << 8 ^ k_max as u64);
    let mut blocks = Array2::zeros((m, m));
    for i in 0..m {
        for j in 0..=i {
            let v: f64 = rng.gen_range(0.05..0.95);
            blocks[[i, j]] = v;
            blocks[[j, i]] = v;
        }
    }
    let mut perm: Vec<usize> = (0..m).collect();
    perm.rotate_left(1);
    perm.swap(0, m - 1);
    let rows: Vec<Vec<Complex64>> = (0..m)
        .map(|x| {
            (-(k_max as i64)..=k_max as i64)
                .map(|k| InitialLaw::PointMass(0.3 + 0.7 * x as f64).moment(k))
                .collect()
        })
        .collect();
    let perm_blocks = Array2::from_shape_fn((m, m), |(i, j)| blocks[[perm[i], perm[j]]]);
    let perm_rows: Vec<Vec<Complex64>> = (0..m).map(|x| rows[perm[x]].clone()).collect();
    let base = solve_labeled_fp(
        &Graphon::step(blocks).map_err(|e| e.to_string())?,
        coupling,
        &FieldInit::PerClass(rows),
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    let permuted = solve_labeled_fp(
        &Graphon::step(perm_blocks).map_err(|e| e.to_string())?,
        coupling,
        &FieldInit::PerClass(perm_rows),
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    for t in 0..=base.steps() {
        let b = base.coeffs_at_step(t);
        let p = permuted.coeffs_at_step(t);
        for x in 0..m {
            for col in 0..2 * k_max + 1 {
                if p[[x, col]] != b[[perm[x], col]] {
                    return fail(format!("equivariance not bit-exact at step {t}, class {x}"));
                }
            }
        }
    }
    Ok(())
}

fn criterion_3() -> Result<(), String> {
    let kuramoto = CouplingSpec::kuramoto(1.5);
    let generic = two_mode_coupling();
    let mut configs = Vec::new();
    for &m in &[1usize, 4, 8] {
        for &k in &[16usize, 32] {
            for g in [&kuramoto, &generic] {
                configs.push((m, k, Integrator::SemiImplicit, g));
            }
        }
    }
    for &m in &[1usize, 4] {
        for &k in &[16usize, 32] {
            for g in [&kuramoto, &generic] {
                configs.push((m, k, Integrator::Explicit, g));
            }
        }
    }
    assert_eq!(configs.len(), 20);
    for (m, k, integ, g) in configs {
        check_field_invariants(m, k, integ, g)
            .map_err(|e| format!("config M={m} K={k} {integ:?}: {e}"))?;
    }
    Ok(())
}

fn criterion_4() -> Result<(), String> {
    let w = Graphon::constant(0.0).map_err(|e| e.to_string())?;
    let init = InitialLaw::VonMises { loc: 0.0, concentration: 1.5 };
    let c = init.moment(1);
    let field = solve_labeled_fp(
        &w,
        &CouplingSpec::zero(),
        &FieldInit::Shared(init),
        &FpConfig::new(1, 4, 2.0, 1e-3),
    )
    .map_err(|e| e.to_string())?;
    for t in [0.5, 1.0, 2.0] {
        let m = field.moments_at(t).map_err(|e| e.to_string())?;
        let got = m[[0, field.mode_index(1)]];
        let want = c * (-t / 2.0).exp();
        if (got - want).norm() > 1e-8 {
            return fail(format!("t={t}: |mu1 - c e^(-t/2)| = {:.2e}", (got - want).norm()));
        }
    }
    Ok(())
}

fn criterion_5() -> Result<(), String> {
    for pk in [0.2, 0.5, 0.9, 1.0] {
        let r = kuramoto_self_consistent_r(pk, 1e-10);
        if r != 0.0 {
            return fail(format!("pK={pk}: r={r}, expected 0"));
        }
    }
    let mut prev = 0.0;
    for pk in [1.2, 1.5, 2.0, 3.0] {
        let r = kuramoto_self_consistent_r(pk, 1e-10);
        if r <= prev {
            return fail(format!("pK={pk}: r={r} not strictly above {prev}"));
        }
        prev = r;
    }
    let coupling = CouplingSpec::kuramoto(2.0);
    let init = FieldInit::Shared(InitialLaw::VonMises { loc: 0.0, concentration: 2.0 });
    let f = solve_mckean_vlasov(1.0, &coupling, &init, 16, 50.0, 1e-4)
        .map_err(|e| e.to_string())?;
    let r_pde = *f.order_parameter_series().last().unwrap();
    let r_fix = kuramoto_self_consistent_r(2.0, 1e-10);
    if (r_pde - r_fix).abs() > 1e-3 {
        return fail(format!("pK=2: long-time PDE r={r_pde} vs fixed point {r_fix}"));
    }
    Ok(())
}

fn lln_config() -> ExperimentConfig {
    ExperimentConfig::Lln(LlnConfig {
        seed: BASE_SEED,
        n_list: vec![100, 400, 1600],
        replicas: 10,
        p: 0.5,
        kuramoto_k: 1.0,
        t_end: 1.0,
        dt: 1e-2,
        k_max: 16,
        m_classes: 1,
        initial: InitialLawConfig::Uniform,
    })
}

fn holder_config() -> ExperimentConfig {
    ExperimentConfig::Holder(HolderConfig {
        seed: BASE_SEED,
        base_p: 0.5,
        p_list: vec![0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9],
        kuramoto_k: 2.0,
        t_end: 1.0,
        dt: 1e-3,
        k_max: 16,
        initial: InitialLawConfig::VonMises { loc: 0.0, concentration: 1.0 },
    })
}

fn chaos_config() -> ExperimentConfig {
    ExperimentConfig::Chaos(ChaosConfig {
        seed: BASE_SEED,
        n_list: vec![50, 800],
        replicas: 400,
        p: 0.5,
        kuramoto_k: 1.0,
        t_end: 1.0,
        dt: 1e-2,
        initial: InitialLawConfig::Uniform,
    })
}

fn meanfield_config() -> ExperimentConfig {
    ExperimentConfig::RandomMeanfield(RandomMeanfieldConfig {
        seed: BASE_SEED,
        n: 800,
        replicas: 30,
        kuramoto_k: 3.0,
        t_end: 16.0,
        dt: 1e-2,
        graph: Default::default(),
        initial: InitialLawConfig::VonMises { loc: 0.0, concentration: 1.0 },
        r_threshold: 0.1,
    })
}

fn annealed_config() -> ExperimentConfig {
    ExperimentConfig::AnnealedGap(AnnealedGapConfig {
        seed: BASE_SEED,
        n: 400,
        replicas: 20,
        kuramoto_k: 1.0,
        t_end: 1.0,
        dt: 1e-2,
        mean: 0.5f64.sqrt(),
        concentrations: vec![f64::INFINITY, 40.0, 2.0],
        initial: InitialLawConfig::Uniform,
    })
}

fn value(t: &ResultTable, params: &str, stat: &str) -> Result<f64, String> {
    t.value(params, stat).ok_or_else(|| format!("missing row {params}/{stat}"))
}

fn criterion_6(t: &ResultTable) -> Result<(), String> {
    let m100 = value(t, "n=100", "lln_estimator_mean")?;
    let m400 = value(t, "n=400", "lln_estimator_mean")?;
    let m1600 = value(t, "n=1600", "lln_estimator_mean")?;
    if !(m100 > m400 && m400 > m1600) {
        return fail(format!("means not strictly decreasing: {m100}, {m400}, {m1600}"));
    }
    if m1600 > 0.5 * m100 {
        return fail(format!("n=1600 mean {m1600} above half of n=100 mean {m100}"));
    }
    Ok(())
}

fn criterion_7(t: &ResultTable, cfg: &ExperimentConfig) -> Result<(), String> {
    let ExperimentConfig::Holder(c) = cfg else { unreachable!() };
    let big_c = value(t, "sweep", "holder_constant")?;
    if !big_c.is_finite() || big_c <= 0.0 {
        return fail(format!("degenerate sweep constant {big_c}"));
    }
    for &p in &c.p_list {
        let params = format!("p={p}");
        let delta = value(t, &params, "cut_delta")?;
        let dist = value(t, &params, "field_distance")?;
        if dist > big_c * delta.sqrt() * (1.0 + 1e-12) {
            return fail(format!("p={p}: distance {dist} above C sqrt(delta) = {}", big_c * delta.sqrt()));
        }
    }
    let exponent = value(t, "sweep", "holder_exponent")?;
    if exponent < 0.35 {
        return fail(format!("fitted exponent {exponent} below 0.35"));
    }
    Ok(())
}

fn criterion_8(t: &ResultTable) -> Result<(), String> {
    let c50 = value(t, "n=50", "cov_cos")?;
    let c800 = value(t, "n=800", "cov_cos")?;
    if c800.abs() >= c50.abs() {
        return fail(format!("|cov| did not shrink: n=50 {c50}, n=800 {c800}"));
    }
    if c800.abs() >= 0.02 {
        return fail(format!("n=800 covariance {c800} not below 0.02"));
    }
    Ok(())
}

fn criterion_9(t: &ResultTable) -> Result<(), String> {
    let var = value(t, "summary", "p_hat_variance")?;
    if var <= 0.0 {
        return fail(format!("sample variance of p_hat is {var}"));
    }
    let agree = value(t, "summary", "agreement_fraction")?;
    if agree < 0.9 {
        return fail(format!("classification agreement {agree} below 0.9"));
    }
    Ok(())
}

fn criterion_10(t: &ResultTable) -> Result<(), String> {
    let mut gaps = Vec::new();
    for li in 0..3 {
        let params = format!("level={li}");
        gaps.push((value(t, &params, "variance")?, value(t, &params, "gap_mean")?));
    }
    for w in gaps.windows(2) {
        if w[1].0 < w[0].0 {
            return fail("variance levels not increasing");
        }
        if w[1].1 < w[0].1 {
            return fail(format!("gap means not monotone: {gaps:?}"));
        }
    }
    let floor = value(t, "floor", "noise_floor")?;
    if gaps[0].1 >= floor {
        return fail(format!("zero-variance gap {} not below noise floor {floor}", gaps[0].1));
    }
    Ok(())
}

fn criterion_11(configs: &[ExperimentConfig], first: &[String]) -> Result<(), String> {
    for (cfg, baseline) in configs.iter().zip(first) {
        let rerun = run_experiment(cfg).map_err(|e| e.to_string())?.to_csv_string();
        if &rerun != baseline {
            return fail(format!("{} rerun CSV differs from first run", cfg.name()));
        }
    }
    Ok(())
}

#[test]
fn acceptance() {
    let mut gate = Gate { failures: Vec::new() };

    let inst = norm_instances();
    gate.check(1, "cut-norm oracle and inf-to-one heuristic", || criterion_1(&inst));
    gate.check(2, "cut / inf-to-one norm sandwich", || criterion_2(&inst));
    gate.check(3, "FP conservation, collapse, equivariance (20 configs)", criterion_3);
    gate.check(4, "heat-kernel exactness", criterion_4);
    gate.check(5, "Kuramoto phase transition and fixed point", criterion_5);

    let configs = vec![
        lln_config(),
        holder_config(),
        chaos_config(),
        meanfield_config(),
        annealed_config(),
    ];
    let mut csvs = Vec::new();
    let mut tables = Vec::new();
    for cfg in &configs {
        let table = run_experiment(cfg).unwrap_or_else(|e| panic!("{} failed: {e}", cfg.name()));
        csvs.push(table.to_csv_string());
        tables.push(table);
    }
    gate.check(6, "law of large numbers trend", || criterion_6(&tables[0]));
    gate.check(7, "Holder modulus in the graphon parameter", || {
        criterion_7(&tables[1], &configs[1])
    });
    gate.check(8, "propagation of chaos covariance decay", || criterion_8(&tables[2]));
    gate.check(9, "random mean-field classification", || criterion_9(&tables[3]));
    gate.check(10, "annealed gap monotone in Var[g]", || criterion_10(&tables[4]));
    gate.check(11, "experiment determinism (byte-identical CSVs)", || {
        criterion_11(&configs, &csvs)
    });

    assert!(gate.failures.is_empty(), "failed criteria:\n{}", gate.failures.join("\n"));
}
