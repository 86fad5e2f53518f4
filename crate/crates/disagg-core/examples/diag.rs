use disagg_core::*;
use nalgebra::DVector;

fn pearson(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.sum() / n, b.sum() / n);
    let (mut c, mut va, mut vb) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        c += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    if va <= 0.0 || vb <= 0.0 { 0.0 } else { c / (va * vb).sqrt() }
}

fn flat(y: &DVector<f64>, spec: &AggregationSpec) -> DVector<f64> {
    let mut out = DVector::zeros(spec.n_high());
    for i in 0..spec.n_low() {
        for k in 0..spec.ratio() {
            out[i * spec.ratio() + k] = y[i] / spec.ratio() as f64;
        }
    }
    out
}

fn main() {
    for (sparsity, mag) in [(0.98, 5.0), (0.95, 4.0), (0.9, 5.0), (0.95, 10.0)] {
        let mut sp_w = 0; let mut ad_w = 0;
        let mut sp_c = 0.0; let mut ad_c = 0.0; let mut fl_c = 0.0;
        let mut rho_sum = 0.0; let mut k_sum = 0.0; let mut recall_sum = 0.0;
        let n_rep = 30u64;
        for seed in 0..n_rep {
            let mut config = DgpConfig::new(17, 68, 4);
            config.d = 100; config.rho = 0.8; config.sparsity = sparsity; config.beta_magnitude = mag;
            config.seed = Some(50_000 + seed);
            let out = generate(&config).unwrap();
            let spec = config.spec().unwrap();
            let panel = IndicatorPanel::unnamed(out.x.clone());
            let grid = default_rho_grid();
            let f = flat(&out.y_low, &spec);
            let cf = pearson(&f, &out.y_high);
            let sp = sp_td(&out.y_low, &panel, &spec, &grid).unwrap();
            let ad = adaptive_sp_td(&out.y_low, &panel, &spec, &grid).unwrap();
            let cs = pearson(&sp.y_high, &out.y_high);
            let ca = pearson(&ad.y_high, &out.y_high);
            if cs > cf { sp_w += 1; }
            if ca > cf { ad_w += 1; }
            sp_c += cs; ad_c += ca; fl_c += cf;
            let fit = sp.fit.as_sparse().unwrap();
            rho_sum += fit.rho;
            k_sum += fit.support.len() as f64;
            let truth: Vec<usize> = (0..100).filter(|&j| out.beta_true[j] != 0.0).collect();
            if !truth.is_empty() {
                recall_sum += truth.iter().filter(|j| fit.support.contains(j)).count() as f64 / truth.len() as f64;
            }
        }
        let nf = n_rep as f64;
        println!("sparsity {sparsity} mag {mag}: sp wins {sp_w}/{n_rep} ad wins {ad_w}/{n_rep} | corr sp {:.3} ad {:.3} flat {:.3} | rho_hat {:.2} k {:.1} recall {:.2}",
            sp_c / nf, ad_c / nf, fl_c / nf, rho_sum / nf, k_sum / nf, recall_sum / nf);
    }
}
