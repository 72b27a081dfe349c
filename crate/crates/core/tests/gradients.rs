//! Central finite-difference oracle for dense layers and both losses.

use lvx_core::nn::{loss_bce, loss_mse, Activation, DenseLayer, ForwardCache, Matrix};
use lvx_core::Rng;

const H: f64 = 1e-6;
const TOL: f64 = 1e-6;
// below this the comparison is absolute; central differences carry ~1e-10 noise
const FLOOR: f64 = 1e-3;
const KINK: f64 = 1e-3;

#[derive(Clone, Copy, Debug)]
enum LossKind {
    Mse,
    Bce,
}

struct Case {
    layers: Vec<DenseLayer<f64>>,
    masks: Vec<Option<Matrix<f64>>>,
    x: Matrix<f64>,
    target: Matrix<f64>,
    labels: Vec<u8>,
    loss: LossKind,
}

fn pick(rng: &mut Rng, n: usize) -> usize {
    ((rng.uniform() * n as f64) as usize).min(n - 1)
}

fn random_matrix(rng: &mut Rng, r: usize, c: usize, scale: f64) -> Matrix<f64> {
    Matrix::from_vec(r, c, (0..r * c).map(|_| (2.0 * rng.uniform() - 1.0) * scale).collect()).unwrap()
}

fn forward(case: &Case, layers: &[DenseLayer<f64>], x: &Matrix<f64>) -> (f64, Vec<ForwardCache<f64>>) {
    let mut caches = Vec::new();
    let mut cur = x.clone();
    for (layer, mask) in layers.iter().zip(&case.masks) {
        let (out, cache) = layer.forward_with_mask(&cur, mask.clone()).unwrap();
        caches.push(cache);
        cur = out;
    }
    let loss = match case.loss {
        LossKind::Mse => loss_mse(&cur, &case.target).unwrap().0,
        LossKind::Bce => {
            let z = caches.last().unwrap().pre_activation().as_slice().to_vec();
            loss_bce(&z, &case.labels).unwrap().0
        }
    };
    (loss, caches)
}

/// Analytic gradients: (per-layer weights, per-layer bias, input).
fn analytic(case: &Case) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    let (_, caches) = forward(case, &case.layers, &case.x);
    let last = case.layers.len() - 1;
    let mut upstream = match case.loss {
        LossKind::Mse => {
            let mut out = case.x.clone();
            for (layer, mask) in case.layers.iter().zip(&case.masks) {
                out = layer.forward_with_mask(&out, mask.clone()).unwrap().0;
            }
            loss_mse(&out, &case.target).unwrap().1
        }
        LossKind::Bce => {
            let z = caches[last].pre_activation().as_slice().to_vec();
            let g = loss_bce(&z, &case.labels).unwrap().1;
            Matrix::from_vec(g.len(), 1, g).unwrap()
        }
    };
    let mut w = vec![Vec::new(); case.layers.len()];
    let mut b = vec![Vec::new(); case.layers.len()];
    for i in (0..case.layers.len()).rev() {
        let g = match case.loss {
            LossKind::Bce if i == last => case.layers[i].backward_pre_activation(&caches[i], &upstream),
            _ => case.layers[i].backward(&caches[i], &upstream),
        }
        .unwrap();
        w[i] = g.weights.as_slice().to_vec();
        b[i] = g.bias.clone();
        upstream = g.input;
    }
    (w, b, upstream.as_slice().to_vec())
}

fn central<F: FnMut(f64) -> f64>(mut f: F, v: f64) -> f64 {
    (f(v + H) - f(v - H)) / (2.0 * H)
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FLOOR)
}

fn near_kink(case: &Case) -> bool {
    let (_, caches) = forward(case, &case.layers, &case.x);
    case.layers.iter().zip(&caches).any(|(l, c)| {
        l.activation() == Activation::Relu && c.pre_activation().as_slice().iter().any(|z| z.abs() < KINK)
    })
}

fn random_case(rng: &mut Rng, train_mode: bool) -> Case {
    loop {
        let depth = 1 + pick(rng, 3);
        let loss = if rng.uniform() < 0.5 { LossKind::Mse } else { LossKind::Bce };
        let batch = 1 + pick(rng, 6);
        let mut dims = vec![1 + pick(rng, 16)];
        for i in 0..depth {
            let out = if i == depth - 1 && matches!(loss, LossKind::Bce) {
                1
            } else {
                1 + pick(rng, 16)
            };
            dims.push(out);
        }
        let acts = [Activation::None, Activation::Relu, Activation::Sigmoid, Activation::LogSigmoid];
        let mut layers = Vec::new();
        let mut masks = Vec::new();
        for i in 0..depth {
            let act = if i == depth - 1 && matches!(loss, LossKind::Bce) {
                Activation::LogSigmoid
            } else {
                acts[pick(rng, acts.len())]
            };
            let rate = if train_mode { 0.1 + 0.6 * rng.uniform() } else { 0.0 };
            let mut layer = DenseLayer::init(dims[i], dims[i + 1], act, rate, rng).unwrap();
            // non-zero biases so the bias path is exercised
            for v in layer.params_mut().1.iter_mut() {
                *v = 2.0 * rng.uniform() - 1.0;
            }
            masks.push(layer.train_mask(batch, rng).unwrap());
            layers.push(layer);
        }
        let case = Case {
            x: random_matrix(rng, batch, dims[0], 1.5),
            target: Matrix::from_vec(batch, dims[depth], (0..batch * dims[depth]).map(|_| rng.uniform()).collect())
                .unwrap(),
            labels: (0..batch).map(|_| (rng.uniform() < 0.5) as u8).collect(),
            layers,
            masks,
            loss,
        };
        if !near_kink(&case) {
            return case;
        }
    }
}

fn check_case(case: &Case) -> f64 {
    let (aw, ab, ax) = analytic(case);
    let mut worst: f64 = 0.0;
    for li in 0..case.layers.len() {
        for which in 0..2 {
            let n = if which == 0 { aw[li].len() } else { ab[li].len() };
            for p in 0..n {
                let mut layers = case.layers.clone();
                let base = {
                    let (w, b) = layers[li].params_mut();
                    if which == 0 { w[p] } else { b[p] }
                };
                let numeric = central(
                    |v| {
                        let (w, b) = layers[li].params_mut();
                        if which == 0 {
                            w[p] = v
                        } else {
                            b[p] = v
                        }
                        forward(case, &layers, &case.x).0
                    },
                    base,
                );
                let a = if which == 0 { aw[li][p] } else { ab[li][p] };
                worst = worst.max(rel_err(a, numeric));
            }
        }
    }
    for p in 0..case.x.len() {
        let mut x = case.x.clone();
        let base = x.as_slice()[p];
        let numeric = central(
            |v| {
                x.as_mut_slice()[p] = v;
                forward(case, &case.layers, &x).0
            },
            base,
        );
        worst = worst.max(rel_err(ax[p], numeric));
    }
    worst
}

#[test]
fn fifty_random_configurations_eval_mode() {
    let mut rng = Rng::new(2024);
    for i in 0..50 {
        let case = random_case(&mut rng, false);
        let err = check_case(&case);
        assert!(err < TOL, "case {i} ({:?}, depth {}): max rel err {err:e}", case.loss, case.layers.len());
    }
}

#[test]
fn fifty_random_configurations_frozen_dropout() {
    let mut rng = Rng::new(77);
    for i in 0..50 {
        let case = random_case(&mut rng, true);
        assert!(case.masks.iter().all(Option::is_some));
        let err = check_case(&case);
        assert!(err < TOL, "case {i} ({:?}, depth {}): max rel err {err:e}", case.loss, case.layers.len());
    }
}
