//! Acceptance suite: one test per criterion, each printing a single
//! pass/fail line (visible with `cargo test --test acceptance -- --nocapture`).

mod common;

use std::collections::BTreeMap;

use common::{random_corpus, KnOracle};
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use psylm::eval::{EvalConfig, SourceRegistry, SynthModelSpec, SynthParams};
use psylm::gam::{
    bspline_basis, delta_loglik, difference_penalty, fit, AssembledDesign, BlockKind,
    DesignBlock, LambdaPolicy, Penalty,
};
use psylm::metrics::{pnc, spearman, HumanSurprisalSeries};
use psylm::surprisal::{perplexity_of_sum, WordSurprisalSeries};

fn criterion(name: &str, body: impl FnOnce() -> Result<(), String>) {
    match body() {
        Ok(()) => println!("acceptance: {name} ... PASS"),
        Err(msg) => {
            println!("acceptance: {name} ... FAIL ({msg})");
            panic!("{name}: {msg}");
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

#[test]
fn kn_oracle_equivalence() {
    criterion("KN oracle equivalence (25 corpora, orders 1-5, 1e-9)", || {
        let start = std::time::Instant::now();
        for seed in 100..125u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let corpus = random_corpus(&mut rng, 6, 50);
            for order in 1..=5 {
                let model = psylm::ngram::train(&corpus, order)
                    .map_err(|e| format!("train failed: {e}"))?;
                let oracle = KnOracle::train(&corpus, order);
                for context in oracle.observed_contexts() {
                    let refs: Vec<&str> = context.iter().map(|s| s.as_str()).collect();
                    let mut sum = 0.0;
                    for word in oracle.vocab() {
                        let got = model.score(&refs, word);
                        let want = oracle.score(&refs, word);
                        sum += got;
                        check((got - want).abs() < 1e-9, || {
                            format!(
                                "seed {seed} order {order} ctx {context:?} word {word}: \
                                 {got} vs {want}"
                            )
                        })?;
                    }
                    check((sum - 1.0).abs() < 1e-9, || {
                        format!("seed {seed} order {order} ctx {context:?} sums to {sum}")
                    })?;
                }
            }
        }
        check(start.elapsed().as_secs() < 10, || {
            format!("took {:?}, budget 10 s", start.elapsed())
        })
    });
}

#[test]
fn perplexity_identity() {
    criterion("perplexity identity (100 random series, 1e-9)", || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            let n = rng.gen_range(1..=200usize);
            let surprisals: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 5.0).collect();
            let total: f64 = surprisals.iter().sum();
            let ppl = perplexity_of_sum(total, n as u64)
                .map_err(|e| format!("trial {trial}: {e}"))?;
            // independent product form: (prod p_i)^(-1/N)
            let product: f64 = surprisals.iter().map(|s| (-s).exp()).product();
            let ppl_product = product.powf(-1.0 / n as f64);
            check((ppl - ppl_product).abs() <= 1e-9 * ppl.max(1.0), || {
                format!("trial {trial}: exp-mean {ppl} vs product-form {ppl_product}")
            })?;
        }
        for v in [10u64, 1_000, 50_257] {
            let n = 37u64;
            let ppl = perplexity_of_sum(n as f64 * (v as f64).ln(), n).unwrap();
            check((ppl - v as f64).abs() <= 1e-9 * v as f64, || {
                format!("uniform ln({v}) series gives perplexity {ppl}")
            })?;
        }
        Ok(())
    });
}

fn human_series(values: &[(u32, f64)]) -> HumanSurprisalSeries {
    HumanSurprisalSeries {
        values: values.iter().map(|&(i, v)| ((1, i), v)).collect(),
        smoothing_alpha: 0.0,
        excluded: Default::default(),
    }
}

fn model_series(values: &[(u32, f64)]) -> WordSurprisalSeries {
    WordSurprisalSeries {
        model_id: "m".into(),
        values: values.iter().map(|&(i, v)| ((1, i), v)).collect(),
        token_count_lm: values.len() as u64,
    }
}

#[test]
fn pnc_correctness() {
    criterion("PNC vs Pearson oracle (100 random pairs, 1e-12)", || {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for trial in 0..100 {
            let n = rng.gen_range(3..=80usize);
            let xs: Vec<(u32, f64)> = (0..n)
                .map(|i| (i as u32, rng.gen::<f64>() * 8.0))
                .collect();
            let ys: Vec<(u32, f64)> = (0..n)
                .map(|i| (i as u32, rng.gen::<f64>() * 8.0))
                .collect();
            let r = pnc(&model_series(&xs), &human_series(&ys))
                .map_err(|e| format!("trial {trial}: {e}"))?
                .r;
            // direct two-pass Pearson, written out in place
            let mx = xs.iter().map(|p| p.1).sum::<f64>() / n as f64;
            let my = ys.iter().map(|p| p.1).sum::<f64>() / n as f64;
            let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
            for (x, y) in xs.iter().zip(&ys) {
                sxy += (x.1 - mx) * (y.1 - my);
                sxx += (x.1 - mx) * (x.1 - mx);
                syy += (y.1 - my) * (y.1 - my);
            }
            let want = sxy / (sxx * syy).sqrt();
            check((r - want).abs() < 1e-12, || {
                format!("trial {trial}: {r} vs oracle {want}")
            })?;

            // affine equivariance: pnc(a*s + b, h) = sign(a) * pnc(s, h)
            let (a, b) = (rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 6.0 - 3.0);
            if a.abs() > 1e-3 {
                let scaled: Vec<(u32, f64)> =
                    xs.iter().map(|&(i, v)| (i, a * v + b)).collect();
                let r2 = pnc(&model_series(&scaled), &human_series(&ys))
                    .map_err(|e| format!("trial {trial}: {e}"))?
                    .r;
                check((r2 - a.signum() * r).abs() < 1e-12, || {
                    format!("trial {trial}: affine map a={a} b={b}: {r2} vs {}", a.signum() * r)
                })?;
            }
        }
        // hand case
        let r = pnc(
            &model_series(&[(0, 0.0), (1, 1.0), (2, 2.0), (3, 4.0)]),
            &human_series(&[(0, 0.0), (1, 1.0), (2, 2.0), (3, 3.0)]),
        )
        .unwrap()
        .r;
        let want = 6.5 / 43.75f64.sqrt();
        check((r - want).abs() < 1e-12, || {
            format!("hand case: {r} vs 6.5/sqrt(43.75) = {want}")
        })?;
        check((want - 0.98270).abs() < 1e-5, || {
            format!("hand value drifted: {want}")
        })
    });
}

fn random_full_rank(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>) {
    let x = DMatrix::from_fn(n, p, |_, j| {
        if j == 0 {
            1.0
        } else {
            rng.gen::<f64>() * 2.0 - 1.0
        }
    });
    let y = DVector::from_fn(n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    (x, y)
}

fn linear_design(x: DMatrix<f64>, y: DVector<f64>) -> AssembledDesign {
    AssembledDesign {
        blocks: vec![DesignBlock {
            name: "x".into(),
            kind: BlockKind::Linear,
            columns: x,
            penalties: vec![],
            constrained: false,
        }],
        response: y,
        n_lambdas: 0,
        dropped: vec![],
    }
}

fn spline_design(rng: &mut ChaCha8Rng, n: usize) -> AssembledDesign {
    let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let (b, _) = bspline_basis(&xs, 8, 3).unwrap();
    let s = difference_penalty(8, 3, 2);
    let y = DVector::from_iterator(
        n,
        xs.iter()
            .map(|&x| (x * 7.0).sin() + 0.4 * (rng.gen::<f64>() - 0.5)),
    );
    AssembledDesign {
        blocks: vec![DesignBlock {
            name: "s(x)".into(),
            kind: BlockKind::Spline,
            columns: b,
            penalties: vec![Penalty {
                matrix: s,
                lambda_index: 0,
            }],
            constrained: false,
        }],
        response: y,
        n_lambdas: 1,
        dropped: vec![],
    }
}

#[test]
fn gam_engine() {
    criterion("GAM engine (OLS, stationarity, gradient, GCV certificate)", || {
        let start = std::time::Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(9);

        // lambda = 0 equals OLS on full-rank designs
        for trial in 0..5 {
            let (x, y) = random_full_rank(&mut rng, 80, 6);
            let f = fit(&linear_design(x.clone(), y.clone()), &LambdaPolicy::Fixed(vec![]))
                .map_err(|e| format!("OLS trial {trial}: {e}"))?;
            let ols = x.svd(true, true).solve(&y, 1e-12).unwrap();
            for (j, (a, b)) in f.coefficients.iter().zip(ols.iter()).enumerate() {
                check((a - b).abs() < 1e-6, || {
                    format!("OLS trial {trial} coefficient {j}: {a} vs {b}")
                })?;
            }
        }

        // stationarity of the penalized objective at the solution
        for trial in 0..5 {
            let design = spline_design(&mut rng, 90);
            let lambda = 10f64.powf(rng.gen::<f64>() * 4.0 - 2.0);
            let f = fit(&design, &LambdaPolicy::Fixed(vec![lambda]))
                .map_err(|e| format!("stationarity trial {trial}: {e}"))?;
            let x = &design.blocks[0].columns;
            let s = &design.blocks[0].penalties[0].matrix;
            let beta = DVector::from_vec(f.coefficients.clone());
            let grad = x.transpose() * (&design.response - x * &beta) - s * &beta * lambda;
            let scale = (x.transpose() * &design.response).norm();
            check(grad.norm() <= 1e-6 * scale, || {
                format!(
                    "stationarity trial {trial}: residual {} vs budget {}",
                    grad.norm(),
                    1e-6 * scale
                )
            })?;
        }

        // analytic objective gradient vs central finite differences
        for trial in 0..3 {
            let design = spline_design(&mut rng, 40);
            let lambda = 0.7;
            let x = &design.blocks[0].columns;
            let s = &design.blocks[0].penalties[0].matrix;
            let y = &design.response;
            let beta = DVector::from_fn(x.ncols(), |_, _| rng.gen::<f64>() - 0.5);
            let objective = |b: &DVector<f64>| {
                let r = y - x * b;
                r.dot(&r) + lambda * (b.transpose() * s * b)[(0, 0)]
            };
            let analytic = -2.0 * x.transpose() * (y - x * &beta) + 2.0 * lambda * s * &beta;
            let h = 1e-6;
            for i in 0..beta.len() {
                let mut bp = beta.clone();
                let mut bm = beta.clone();
                bp[i] += h;
                bm[i] -= h;
                let fd = (objective(&bp) - objective(&bm)) / (2.0 * h);
                let denom = analytic[i].abs().max(1.0);
                check((analytic[i] - fd).abs() / denom < 1e-5, || {
                    format!(
                        "gradient trial {trial} coordinate {i}: {} vs {}",
                        analytic[i], fd
                    )
                })?;
            }
        }

        // GCV local-minimum certificate: +/- 0.05 log10 probes never improve
        for trial in 0..10 {
            let design = spline_design(&mut rng, 100 + 10 * trial);
            let f = fit(&design, &LambdaPolicy::Gcv)
                .map_err(|e| format!("GCV trial {trial}: {e}"))?;
            check(f.converged, || format!("GCV trial {trial} did not converge"))?;
            let log0 = f.lambdas[0].log10();
            for probe in [log0 - 0.05, log0 + 0.05] {
                let probe = probe.clamp(-6.0, 6.0);
                let g = fit(&design, &LambdaPolicy::Fixed(vec![10f64.powf(probe)]))
                    .map_err(|e| format!("GCV trial {trial} probe: {e}"))?
                    .gcv;
                check(g >= f.gcv * (1.0 - 1e-6), || {
                    format!(
                        "GCV trial {trial}: probe log10 {probe} has GCV {g} < optimum {}",
                        f.gcv
                    )
                })?;
            }
        }

        check(start.elapsed().as_secs() < 60, || {
            format!("took {:?}, budget 60 s", start.elapsed())
        })
    });
}

#[test]
fn coefficient_recovery() {
    criterion("coefficient recovery (y = 3 + 2*surp, 2000 rows, +/- 0.01)", || {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 2000;
        let surp: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 5.0).collect();
        let noise: Vec<f64> = (0..n)
            .map(|_| {
                // Box-Muller
                let u1: f64 = rng.gen::<f64>().clamp(1e-12, 1.0);
                let u2: f64 = rng.gen();
                0.01 * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        let y = DVector::from_iterator(
            n,
            surp.iter().zip(&noise).map(|(&s, &e)| 3.0 + 2.0 * s + e),
        );

        let intercept = DesignBlock {
            name: "intercept".into(),
            kind: BlockKind::Intercept,
            columns: DMatrix::from_element(n, 1, 1.0),
            penalties: vec![],
            constrained: false,
        };
        let surp_block = DesignBlock {
            name: "surp".into(),
            kind: BlockKind::Linear,
            columns: DMatrix::from_iterator(n, 1, surp.iter().cloned()),
            penalties: vec![],
            constrained: false,
        };
        let full = AssembledDesign {
            blocks: vec![intercept.clone(), surp_block],
            response: y.clone(),
            n_lambdas: 0,
            dropped: vec![],
        };
        let baseline = AssembledDesign {
            blocks: vec![intercept],
            response: y,
            n_lambdas: 0,
            dropped: vec![],
        };
        let f_full = fit(&full, &LambdaPolicy::Fixed(vec![])).map_err(|e| e.to_string())?;
        let f_base = fit(&baseline, &LambdaPolicy::Fixed(vec![])).map_err(|e| e.to_string())?;
        let coef = f_full.coefficients[1];
        check((coef - 2.0).abs() <= 0.01, || {
            format!("surprisal coefficient {coef}, expected 2.00 +/- 0.01")
        })?;
        let dll = delta_loglik(&f_full, &f_base).map_err(|e| e.to_string())?;
        check(dll > 0.0, || format!("delta loglik {dll} not positive"))
    });
}

struct PipelineRanks {
    ppl: Vec<f64>,
    pnc: Vec<f64>,
    dll_gd: Vec<f64>,
}

fn run_pipeline(params: &SynthParams) -> Result<PipelineRanks, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    psylm::eval::synth_fixtures(params, dir.path()).map_err(|e| e.to_string())?;
    let config = EvalConfig::load(&dir.path().join("config.toml")).map_err(|e| e.to_string())?;
    let registry = SourceRegistry::builtin();
    let report = psylm::eval::run(&config, &registry, 5).map_err(|e| e.to_string())?;
    if !report.failures.is_empty() {
        return Err(format!("model failures: {:?}", report.failures));
    }
    let mut out = PipelineRanks {
        ppl: vec![],
        pnc: vec![],
        dll_gd: vec![],
    };
    for row in &report.rows {
        out.ppl.push(row.ppl);
        out.pnc.push(row.pnc);
        out.dll_gd
            .push(row.dll_gd.ok_or_else(|| format!("{} has no GD fit", row.model_id))?);
    }
    Ok(out)
}

#[test]
fn pipeline_qualitative_reproduction() {
    criterion("pipeline: Spearman(PNC, dLL_GD) = 1, confounded ppl ranks lower", || {
        let start = std::time::Instant::now();

        let plain = run_pipeline(&SynthParams::default())?;
        let rho_pnc = spearman(&plain.pnc, &plain.dll_gd).map_err(|e| e.to_string())?;
        check((rho_pnc - 1.0).abs() < 1e-12, || {
            format!("Spearman(PNC, dLL_GD) = {rho_pnc}, expected exactly 1")
        })?;

        // two dump families with different vocabularies: constant offsets
        // confound perplexity without touching PNC or delta log-likelihood
        let offsets = [3.0, 0.0, 2.0, -1.0, 1.0];
        let confounded = SynthParams {
            models: [0.95, 0.8, 0.6, 0.4, 0.2]
                .iter()
                .enumerate()
                .map(|(i, &rho)| SynthModelSpec {
                    id: format!("conf{}", i + 1),
                    rho,
                    vocab_size: if i % 2 == 0 { 5_000 } else { 50_000 },
                    surprisal_offset: offsets[i],
                })
                .collect(),
            ..SynthParams::default()
        };
        let conf = run_pipeline(&confounded)?;
        let rho_pnc_c = spearman(&conf.pnc, &conf.dll_gd).map_err(|e| e.to_string())?;
        let rho_ppl_c = spearman(&conf.ppl, &conf.dll_gd).map_err(|e| e.to_string())?;
        check(rho_ppl_c.abs() < rho_pnc_c.abs(), || {
            format!(
                "perplexity rank correlation {rho_ppl_c} not strictly below PNC's {rho_pnc_c}"
            )
        })?;
        check(start.elapsed().as_secs() < 300, || {
            format!("took {:?}, budget 5 min", start.elapsed())
        })
    });
}

#[test]
fn report_determinism() {
    criterion("determinism: two eval runs give byte-identical csv/json", || {
        let params = SynthParams {
            n_texts: 4,
            words_per_text: 30,
            n_subjects: 3,
            cloze_texts: 2,
            ..SynthParams::default()
        };
        let mut outputs: Vec<(String, String)> = vec![];
        for _ in 0..2 {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            psylm::eval::synth_fixtures(&params, dir.path()).map_err(|e| e.to_string())?;
            let config =
                EvalConfig::load(&dir.path().join("config.toml")).map_err(|e| e.to_string())?;
            let report = psylm::eval::run(&config, &SourceRegistry::builtin(), 5)
                .map_err(|e| e.to_string())?;
            outputs.push((
                psylm::eval::report::to_csv(&report),
                psylm::eval::report::to_json(&report).map_err(|e| e.to_string())?,
            ));
        }
        check(outputs[0].0 == outputs[1].0, || "csv outputs differ".to_string())?;
        check(outputs[0].1 == outputs[1].1, || "json outputs differ".to_string())
    });
}

#[test]
fn reference_values_real_data() {
    criterion("reference values on real data (gated by PSYLM_REAL_DATA_CONFIG)", || {
        let Some(path) = std::env::var_os("PSYLM_REAL_DATA_CONFIG") else {
            println!("acceptance: reference values ... SKIP (set PSYLM_REAL_DATA_CONFIG to run)");
            return Ok(());
        };
        let config =
            EvalConfig::load(std::path::Path::new(&path)).map_err(|e| e.to_string())?;
        let report = psylm::eval::run(&config, &SourceRegistry::builtin(), 4)
            .map_err(|e| e.to_string())?;
        let row = report
            .rows
            .iter()
            .find(|r| r.model_id.to_lowercase().contains("gpt2"))
            .ok_or_else(|| "no gpt2 model in real-data config".to_string())?;
        let within = |got: f64, want: f64| (got - want).abs() <= 0.05 * want.abs();
        let expected: BTreeMap<&str, (f64, Option<f64>)> = [
            ("ppl", (87.6, Some(row.ppl))),
            ("pnc", (0.633, Some(row.pnc))),
            ("dll_ffd", (180.9, row.dll_ffd)),
            ("dll_gd", (332.7, row.dll_gd)),
            ("dll_td", (841.2, row.dll_td)),
        ]
        .into_iter()
        .collect();
        for (name, (want, got)) in expected {
            let got = got.ok_or_else(|| format!("{name} missing from report"))?;
            check(within(got, want), || {
                format!("{name}: {got} outside 5% of {want}")
            })?;
        }
        Ok(())
    });
}
