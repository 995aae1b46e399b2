//! One check per acceptance criterion. Each test prints a single
//! `criterion N ...: PASS|FAIL (...)` line before asserting, so
//! `cargo test --test acceptance -- --nocapture` doubles as a report.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use latent_sentiment::data::{generate_toy_corpus, load_checkpoint, Corpus, Sentiment, EOS, PAD};
use latent_sentiment::decoder::{decode_teacher_forced, decoder_backward, DecoderConfig, DecoderParams};
use latent_sentiment::encoder::{encode, encode_with_context, encoder_backward, EncoderConfig, EncoderParams};
use latent_sentiment::kernels::{gaussian_kernel, median_heuristic_sigma, mmd, witness, witness_grad, KernelConfig, SampleSet};
use latent_sentiment::numerics::{dot, softmax_cross_entropy, Activation, Matrix, ParamTensors, Vector};
use latent_sentiment::optim::{bfgs_minimize, BfgsConfig};
use latent_sentiment::pipeline::{evaluate, Metrics};
use latent_sentiment::transfer::{encode_corpus, topic_of, TransferSettings, Transformer};
use latent_sentiment::traversal::{build_v, objective, objective_grad, traverse, TraversalProblem, DEFAULT_LAMBDA};
use latent_sentiment::Model;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOPICS: [&str; 2] = ["movie", "phone"];

fn report(n: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {n} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
}

fn central_diff(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    const STEP: f64 = 1e-5;
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + STEP;
            let up = f(&probe);
            probe[i] = orig - STEP;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = Vector::new(a.to_vec()).norm().max(Vector::new(b.to_vec()).norm());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize, offset: f64) -> SampleSet {
    SampleSet::new(
        (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0) + offset).collect())
            .collect(),
    )
    .unwrap()
}

fn point(v: f64) -> Vector {
    Vector::new(vec![v])
}

// ---- shared trained model -------------------------------------------------

struct Trained {
    dir: tempfile::TempDir,
    corpus_path: PathBuf,
    checkpoint: PathBuf,
    model: Model,
    train: Corpus,
    test: Corpus,
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_latent-sentiment"))
}

fn run_ok(cmd: &mut Command) -> Vec<u8> {
    let out = cmd.output().expect("binary runs");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn train_cli(corpus: &Path, out: &Path) {
    run_ok(bin().arg("train").arg("--corpus").arg(corpus).arg("--out").arg(out).args(["--seed", "7"]));
}

/// The desk-scale model, trained once through the binary with the default
/// plan on 100 training sentences.
fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let corpus_path = dir.path().join("toy.tsv");
        run_ok(bin().args(["gen-toy", "--seed", "7", "--n", "28", "--out"]).arg(&corpus_path));
        let checkpoint = dir.path().join("run1.ckpt");
        train_cli(&corpus_path, &checkpoint);
        let model = load_checkpoint(&checkpoint).unwrap().model;
        let (train, test) = generate_toy_corpus(7, 28).split(7);
        Trained {
            dir,
            corpus_path,
            checkpoint,
            model,
            train,
            test,
        }
    })
}

// ---- 1 --------------------------------------------------------------------

#[test]
fn criterion_01_kernel_and_witness_values() {
    let cfg = KernelConfig::new(0.5).unwrap();
    let source = SampleSet::new(vec![point(0.0)]).unwrap();
    let target = SampleSet::new(vec![point(2.0)]).unwrap();
    let expected_w = 1.0 - (-4.0_f64).exp();
    let k = gaussian_kernel(&[0.0], &[2.0], cfg).unwrap();
    let w = witness(&[0.0], &source, &target, cfg).unwrap();
    let m = mmd(&source, &target, cfg).unwrap();
    let errs = [
        (k - (-4.0_f64).exp()).abs(),
        (w - expected_w).abs(),
        (m - 2.0 * expected_w).abs(),
        (gaussian_kernel(&[1.5], &[1.5], cfg).unwrap() - 1.0).abs(),
    ];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    let pass = worst < 1e-9;
    report(1, "kernel/witness/mmd oracles", pass, format!("witness {w:.6} mmd {m:.6} max err {worst:.1e}"));
    assert!(pass);
}

// ---- 2 --------------------------------------------------------------------

const GRAD_TOL: f64 = 1e-5;
const INSTANCES: usize = 20;

fn witness_grad_worst(rng: &mut ChaCha8Rng) -> f64 {
    (0..INSTANCES)
        .map(|_| {
            let dim = rng.random_range(1..6);
            let (m, n) = (rng.random_range(1..6), rng.random_range(1..6));
            let s = cloud(rng, m, dim, 0.0);
            let t = cloud(rng, n, dim, 1.0);
            let cfg = KernelConfig::new(rng.random_range(0.3..3.0)).unwrap();
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..2.0)).collect();
            let g = witness_grad(&x, &s, &t, cfg).unwrap();
            let fd = central_diff(&x, |p| witness(p, &s, &t, cfg).unwrap());
            rel_err(&g, &fd)
        })
        .fold(0.0, f64::max)
}

fn traversal_grad_worst(rng: &mut ChaCha8Rng) -> f64 {
    (0..INSTANCES)
        .map(|_| {
            let dim = rng.random_range(2..6);
            let s = cloud(rng, 5, dim, 0.0);
            let t = cloud(rng, 4, dim, 1.5);
            let sigma = median_heuristic_sigma(&s.union(&t).unwrap()).unwrap();
            let z = s.points()[0].clone();
            let lambda = rng.random_range(1e-4..1e-1);
            let p = TraversalProblem::new(z, s, t, lambda, KernelConfig::new(sigma).unwrap()).unwrap();
            let v = build_v(&p).unwrap();
            let delta: Vec<f64> = (0..v.cols()).map(|_| rng.random_range(-0.2..0.2)).collect();
            let g = objective_grad(&p, &v, &delta).unwrap();
            let fd = central_diff(&delta, |d| objective(&p, &v, d).unwrap());
            rel_err(&g, &fd)
        })
        .fold(0.0, f64::max)
}

fn random_table(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let mut m = Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    m.row_mut(PAD).fill(0.0);
    m
}

/// Worst relative error over encoder parameters and embedding rows.
fn encoder_grad_worst(rng: &mut ChaCha8Rng) -> f64 {
    let acts = [Activation::Relu, Activation::Tanh, Activation::Identity];
    (0..INSTANCES)
        .map(|i| {
            let cfg = EncoderConfig {
                embed_dim: 3,
                filter_heights: vec![1, 2, 3],
                filters_per_height: 2,
                activation: acts[i % acts.len()],
                num_classes: 2,
            };
            let emb = random_table(rng, 8, 3);
            let mut p = EncoderParams::init(&cfg, rng);
            // Positive biases keep ReLU filters away from the kink.
            p.biases.iter_mut().for_each(|b| *b = rng.random_range(0.2..0.5));
            let tokens: Vec<usize> = (0..6).map(|_| rng.random_range(4..8)).chain([PAD]).collect();
            let proj: Vec<f64> = (0..cfg.feature_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let label = rng.random_range(0..2);
            let loss = |p: &EncoderParams, emb: &Matrix| {
                let e = encode(&tokens, emb, p, &cfg).unwrap();
                dot(&e.z, &proj) + softmax_cross_entropy(&e.logits, label).unwrap().0
            };
            let ctx = encode_with_context(&tokens, &emb, &p, &cfg).unwrap();
            let (_, d_logits) = softmax_cross_entropy(&ctx.encoding.logits, label).unwrap();
            let g = encoder_backward(&ctx, &p, &proj, &d_logits).unwrap();
            let fd = central_diff(&p.flatten(), |flat| {
                let mut q = p.clone();
                q.load_flat(flat).unwrap();
                loss(&q, &emb)
            });
            let mut fd_emb = Matrix::new(8, 3, central_diff(emb.data(), |flat| {
                loss(&p, &Matrix::new(8, 3, flat.to_vec()).unwrap())
            }))
            .unwrap();
            fd_emb.row_mut(PAD).fill(0.0);
            let mut analytic = Matrix::zeros(8, 3);
            for (row, gv) in &g.embedding_rows {
                analytic.row_mut(*row).copy_from_slice(gv);
            }
            rel_err(&g.params.flatten(), &fd).max(rel_err(analytic.data(), fd_emb.data()))
        })
        .fold(0.0, f64::max)
}

/// Worst relative error over decoder parameters, `h₀` and tied embedding rows.
fn decoder_grad_worst(rng: &mut ChaCha8Rng) -> f64 {
    (0..INSTANCES)
        .map(|i| {
            let tied = i % 2 == 0;
            let vocab = 9;
            let cfg = DecoderConfig {
                tie_input_embeddings: tied,
                ..DecoderConfig::new(4, 3)
            };
            let p = DecoderParams::init(&cfg, vocab, rng);
            let emb = random_table(rng, vocab, 3);
            let z: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let gold: Vec<usize> = (0..rng.random_range(1..6)).map(|_| rng.random_range(4..vocab)).chain([EOS]).collect();
            let loss = |p: &DecoderParams, z: &[f64], emb: &Matrix| {
                decode_teacher_forced(z, &gold, p, emb, &cfg).unwrap().loss
            };
            let tf = decode_teacher_forced(&z, &gold, &p, &emb, &cfg).unwrap();
            let g = decoder_backward(&tf, &p);
            let fd = central_diff(&p.flatten(), |flat| {
                let mut q = p.clone();
                q.load_flat(flat).unwrap();
                loss(&q, &z, &emb)
            });
            let fd_z = central_diff(&z, |zz| loss(&p, zz, &emb));
            let mut worst = rel_err(&g.params.flatten(), &fd).max(rel_err(&g.d_z, &fd_z));
            if tied {
                let fd_emb = central_diff(emb.data(), |flat| {
                    loss(&p, &z, &Matrix::new(vocab, 3, flat.to_vec()).unwrap())
                });
                let mut analytic = Matrix::zeros(vocab, 3);
                for (r, gv) in &g.embedding_rows {
                    analytic.row_mut(*r).copy_from_slice(gv);
                }
                worst = worst.max(rel_err(analytic.data(), &fd_emb));
            }
            worst
        })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_02_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let worst = [
        ("witness", witness_grad_worst(&mut rng)),
        ("traversal", traversal_grad_worst(&mut rng)),
        ("encoder", encoder_grad_worst(&mut rng)),
        ("decoder", decoder_grad_worst(&mut rng)),
    ];
    let pass = worst.iter().all(|(_, e)| *e < GRAD_TOL);
    let detail: Vec<String> = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    report(2, &format!("gradient suite, {INSTANCES} instances per family"), pass, detail.join(", "));
    assert!(pass);
}

// ---- 3 --------------------------------------------------------------------

#[test]
fn criterion_03_one_dimensional_traversal_matches_grid_search() {
    let source = SampleSet::new(vec![point(0.0)]).unwrap();
    let target = SampleSet::new(vec![point(2.0)]).unwrap();
    let problem = TraversalProblem::new(point(0.0), source, target, DEFAULT_LAMBDA, KernelConfig::new(0.5).unwrap()).unwrap();
    let result = traverse(&problem, &BfgsConfig::default()).unwrap();

    let g = |x: f64| problem.witness_at(&[x]) + DEFAULT_LAMBDA * x * x;
    let (mut best_x, mut best_g) = (-1.0, g(-1.0));
    for i in 0..=50_000 {
        let x = -1.0 + i as f64 * 1e-4;
        let v = g(x);
        if v < best_g {
            best_x = x;
            best_g = v;
        }
    }
    let dz = (result.z_star[0] - best_x).abs();
    let dg = (result.objective_value - best_g).abs();
    let pass = dz <= 2e-2 && dg <= 1e-6;
    report(
        3,
        "1-D traversal vs grid search",
        pass,
        format!("z* {:.4} grid {best_x:.4} |dz| {dz:.1e} |dg| {dg:.1e}", result.z_star[0]),
    );
    assert!(pass);
}

// ---- 4 --------------------------------------------------------------------

#[test]
fn criterion_04_displacement_shrinks_as_lambda_grows() {
    let lambdas = [1e-6, 7e-5, 1e-3, 1e-1, 10.0];
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut violations = 0;
    let mut worst_increase = 0.0_f64;
    for _ in 0..10 {
        let s = cloud(&mut rng, 8, 8, 0.0);
        let t = cloud(&mut rng, 8, 8, 1.0);
        let sigma = median_heuristic_sigma(&s.union(&t).unwrap()).unwrap();
        let z = s.points()[0].clone();
        let norms: Vec<f64> = lambdas
            .iter()
            .map(|&l| {
                let p = TraversalProblem::new(z.clone(), s.clone(), t.clone(), l, KernelConfig::new(sigma).unwrap()).unwrap();
                traverse(&p, &BfgsConfig::default()).unwrap().displacement_norm
            })
            .collect();
        for w in norms.windows(2) {
            worst_increase = worst_increase.max(w[1] - w[0]);
            if w[1] > w[0] + 1e-8 {
                violations += 1;
            }
        }
    }
    let pass = violations == 0;
    report(
        4,
        "budget monotonicity on 10 random 8-D instances",
        pass,
        format!("violations {violations}, largest increase {worst_increase:.1e}"),
    );
    assert!(pass);
}

// ---- 5 --------------------------------------------------------------------

#[test]
fn criterion_05_bfgs_on_quadratic_and_rosenbrock() {
    let cfg = BfgsConfig {
        max_iters: 1000,
        grad_tol: 1e-12,
        ..BfgsConfig::default()
    };
    // f(x) = ½ xᵀAx − bᵀx with A symmetric positive definite.
    let a = Matrix::from_rows(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 0.5], vec![0.0, 0.5, 2.0]]).unwrap();
    let b = [1.0, -2.0, 0.5];
    let quad = |x: &[f64]| 0.5 * dot(x, &a.matvec(x).unwrap()) - dot(x, &b);
    let quad_grad = |x: &[f64]| a.matvec(x).unwrap().sub(&b);
    let q = bfgs_minimize(quad, quad_grad, &[5.0, 5.0, -5.0], &cfg).unwrap();
    // Solve A x = b by Cramer's rule for the analytic minimum.
    let det3 = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let am = [[4.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 2.0]];
    let d = det3(am);
    let exact: Vec<f64> = (0..3)
        .map(|c| {
            let mut m = am;
            for r in 0..3 {
                m[r][c] = b[r];
            }
            det3(m) / d
        })
        .collect();
    let quad_err = q.x.sub(&exact).norm();

    let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
    let rosen_grad = |x: &[f64]| {
        Vector::new(vec![
            -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
            200.0 * (x[1] - x[0] * x[0]),
        ])
    };
    let r = bfgs_minimize(rosen, rosen_grad, &[-1.2, 1.0], &cfg).unwrap();
    let rosen_err = r.x.sub(&[1.0, 1.0]).norm();
    let pass = quad_err < 1e-8 && rosen_err < 1e-6;
    report(
        5,
        "BFGS sanity",
        pass,
        format!("quadratic err {quad_err:.1e} ({} it), rosenbrock err {rosen_err:.1e} ({} it)", q.iterations, r.iterations),
    );
    assert!(pass);
}

// ---- 6 --------------------------------------------------------------------

#[test]
fn criterion_06_desk_scale_training() {
    let t = trained();
    let test: Metrics = evaluate(&t.model, &t.test).unwrap();
    let train: Metrics = evaluate(&t.model, &t.train).unwrap();
    let shape_ok = t.model.encoder_config.embed_dim == 16
        && t.model.feature_dim() == 32
        && t.model.vocab.len() <= 60
        && t.train.len() == 100;
    let pass = shape_ok && test.classification_accuracy >= 0.95 && train.reconstruction_token_accuracy >= 0.90;
    report(
        6,
        "desk-scale training",
        pass,
        format!(
            "d {} z {} vocab {} train {} | test acc {:.3} train recon token acc {:.3}",
            t.model.encoder_config.embed_dim,
            t.model.feature_dim(),
            t.model.vocab.len(),
            t.train.len(),
            test.classification_accuracy,
            train.reconstruction_token_accuracy
        ),
    );
    assert!(pass);
}

// ---- 7 --------------------------------------------------------------------

fn centroid(points: &[&Vector]) -> Vector {
    let mut c = Vector::zeros(points[0].dim());
    for p in points {
        c.axpy(1.0 / points.len() as f64, p);
    }
    c
}

#[test]
fn criterion_07_traversed_negative_movie_vectors_reach_positive_movie_cluster() {
    let t = trained();
    let encoded = encode_corpus(&t.model, &t.train).unwrap();
    let topic = |text: &str| topic_of(&latent_sentiment::data::tokenize(text), &TOPICS);
    let cell = |label: Sentiment| -> Vec<&Vector> {
        encoded
            .iter()
            .filter(|e| e.label == label && topic(&e.text) == Some("movie"))
            .map(|e| &e.z)
            .collect()
    };
    let origin = centroid(&cell(Sentiment::Negative));
    let goal = centroid(&cell(Sentiment::Positive));
    let transformer = Transformer::new(&t.model, &t.train, TransferSettings::default()).unwrap();

    let (mut total, mut nearer, mut kept) = (0, 0, 0);
    for e in encoded.iter().filter(|e| e.label == Sentiment::Negative && topic(&e.text) == Some("movie")) {
        let z_star = transformer.traverse_z(&e.z, Sentiment::Negative).unwrap().z_star;
        total += 1;
        if z_star.squared_distance(&goal) < z_star.squared_distance(&origin) {
            nearer += 1;
        }
        let nearest = encoded
            .iter()
            .min_by(|a, b| a.z.squared_distance(&z_star).total_cmp(&b.z.squared_distance(&z_star)))
            .unwrap();
        if topic(&nearest.text) == Some("movie") {
            kept += 1;
        }
    }
    let nearer_frac = nearer as f64 / total as f64;
    let kept_frac = kept as f64 / total as f64;
    let pass = nearer_frac >= 0.8 && kept_frac >= 0.7;
    report(
        7,
        "neg/movie traversal lands in the pos/movie cluster",
        pass,
        format!("nearer {nearer}/{total} = {nearer_frac:.2}, keep topic {kept}/{total} = {kept_frac:.2}"),
    );
    assert!(pass);
}

// ---- 8 --------------------------------------------------------------------

#[test]
fn criterion_08_end_to_end_sentiment_flip() {
    let t = trained();
    let transformer = Transformer::new(&t.model, &t.train, TransferSettings::default()).unwrap();
    let (mut flipped, mut kept) = (0, 0);
    for ex in &t.test.examples {
        let out = transformer.transform(&ex.text).unwrap();
        if t.model.encode_text(&out.transformed).unwrap().predicted_label == out.to {
            flipped += 1;
        }
        let topic = topic_of(&ex.tokens, &TOPICS).expect("toy sentences name a topic");
        if latent_sentiment::data::tokenize(&out.transformed).iter().any(|w| w == topic) {
            kept += 1;
        }
        println!("  {} -> {}", ex.text, out.transformed);
    }
    let n = t.test.len() as f64;
    let pass = flipped as f64 / n >= 0.7 && kept as f64 / n >= 0.6;
    report(
        8,
        "end-to-end sentiment flip",
        pass,
        format!(
            "flipped {flipped}/{} = {:.2}, topic kept {kept}/{} = {:.2}",
            t.test.len(),
            flipped as f64 / n,
            t.test.len(),
            kept as f64 / n
        ),
    );
    assert!(pass);
}

// ---- 9 --------------------------------------------------------------------

fn transform_cli(checkpoint: &Path, corpus: &Path, test: &Corpus) -> Vec<u8> {
    let mut cmd = bin();
    cmd.arg("transform").arg("--checkpoint").arg(checkpoint).arg("--corpus").arg(corpus);
    for ex in &test.examples {
        cmd.arg("--sentence").arg(&ex.text);
    }
    run_ok(&mut cmd)
}

#[test]
fn criterion_09_identical_seeds_give_identical_bytes() {
    let t = trained();
    let second = t.dir.path().join("run2.ckpt");
    train_cli(&t.corpus_path, &second);
    let same_ckpt = std::fs::read(&t.checkpoint).unwrap() == std::fs::read(&second).unwrap();
    let out1 = transform_cli(&t.checkpoint, &t.corpus_path, &t.test);
    let out2 = transform_cli(&second, &t.corpus_path, &t.test);
    let same_out = !out1.is_empty() && out1 == out2;
    let pass = same_ckpt && same_out;
    report(
        9,
        "determinism of train + transform",
        pass,
        format!("checkpoints equal {same_ckpt}, transform output equal {same_out} ({} bytes)", out1.len()),
    );
    assert!(pass);
}

// ---- 10 -------------------------------------------------------------------

#[test]
fn criterion_10_witness_means_equal_expanded_mmd() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let dim = rng.random_range(1..6);
        let (m, n) = (rng.random_range(1..12), rng.random_range(1..12));
        let s = cloud(&mut rng, m, dim, 0.0);
        let t = cloud(&mut rng, n, dim, 0.5);
        let cfg = KernelConfig::new(rng.random_range(0.2..5.0)).unwrap();
        let mean_k = |a: &SampleSet, b: &SampleSet| {
            let mut sum = 0.0;
            for x in a.points() {
                for y in b.points() {
                    sum += gaussian_kernel(x, y, cfg).unwrap();
                }
            }
            sum / (a.len() * b.len()) as f64
        };
        let expanded = mean_k(&s, &s) + mean_k(&t, &t) - 2.0 * mean_k(&s, &t);
        worst = worst.max((mmd(&s, &t, cfg).unwrap() - expanded).abs());
    }
    let pass = worst <= 1e-10;
    report(10, "witness means equal the biased MMD² estimator", pass, format!("50 pairs, max |diff| {worst:.1e}"));
    assert!(pass);
}
