use lassobo::benchmarks::{rho_alpha_correlation, BaseFunction, EffectivePlacement, PaddedObjective};
use lassobo::gp::{Dataset, KernelFamily, KernelHyperparams};
use lassobo::lasso::{fit_hyperparams, FitConfig};
use lassobo::selection::{selection_metrics, ImportanceState};
use rand::{Rng, SeedableRng};

fn alpha_range(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| 10f64.powf(lo.log10() + (hi.log10() - lo.log10()) * i as f64 / (n - 1) as f64)).collect()
}

fn scan(lo: f64, hi: f64, kernel: KernelFamily, init_scale: f64, steps: usize, rounds: usize) {
    let alpha = alpha_range(lo, hi, 8);
    let obj = PaddedObjective::new(BaseFunction::SumSquares { alpha: alpha.clone() }, 50, EffectivePlacement::Prefix).unwrap();
    let effective: Vec<usize> = (0..8).collect();
    let t0 = std::time::Instant::now();
    let (mut pr_ok, mut corr_med_ok, mut corr_mean_ok) = (0, 0, 0);
    for seed in 0..10u64 {
        let mut rng = lassobo::RunRng::seed_from_u64(9000 + seed);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..50).map(|_| rng.gen()).collect()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| obj.evaluate_noiseless(r).unwrap()).collect();
        let data = Dataset::from_rows(&rows, &ys).unwrap();
        let canon = KernelHyperparams::new(kernel, vec![init_scale; 50], 1.0, 1e-6).unwrap();
        let mut st = ImportanceState::new(rounds).unwrap();
        let mut i_t = Vec::new();
        let mut mean_rho = vec![0.0; 50];
        for r in 0..rounds {
            let cfg = FitConfig { lambda: 1e-3, kernel, rho_init_scale: init_scale,
                seed: seed * 100 + r as u64, adam_steps: steps,
                n_init_samples: 6, n_refine: 2, ..FitConfig::default() };
            let (fit, _) = fit_hyperparams(&data, &cfg, Some(&canon)).unwrap();
            for (m, v) in mean_rho.iter_mut().zip(&fit.rho) { *m += v / rounds as f64; }
            i_t = st.push_and_classify(&fit.rho).unwrap().0;
        }
        let median = st.last_medians().unwrap().to_vec();
        let (prec, rec) = selection_metrics(&i_t, &effective).unwrap();
        let c_med = rho_alpha_correlation(&median, &alpha, &effective).unwrap_or(f64::NAN);
        let c_mean = rho_alpha_correlation(&mean_rho, &alpha, &effective).unwrap_or(f64::NAN);
        if prec >= 0.8 && rec >= 0.8 { pr_ok += 1; }
        if c_med >= 0.8 { corr_med_ok += 1; }
        if c_mean >= 0.8 { corr_mean_ok += 1; }
        println!("  seed {seed}: prec {prec:.2} rec {rec:.2} c_med {c_med:.3} c_mean {c_mean:.3} |I| {}", i_t.len());
    }
    println!("[{lo},{hi}] {kernel:?} steps={steps} rounds={rounds}: pr {pr_ok}/10 c_med {corr_med_ok}/10 c_mean {corr_mean_ok}/10 in {:.0}s", t0.elapsed().as_secs_f64());
}

#[test]
fn probe_c4() {
    scan(2.0, 10.0, KernelFamily::Matern52, 0.1, 400, 4);
}
