//! Central finite-difference checks for every differentiable op.
//!
//! Inputs are random but kept away from activation kinks; dropout masks are
//! frozen by reseeding inside the builder. Tolerance is a relative error
//! with a unit floor (see `gradcheck::rel_err`).

use agtc_tensor::gradcheck::{check_gradients, offzero_tensor, DEFAULT_STEP};
use agtc_tensor::{
    multi_head_attention, positional_encoding, MhaVars, Mode, Padding, RngStream, Tensor,
};

const TOL: f64 = 1e-5;

fn rng() -> RngStream {
    RngStream::new(0x5EED)
}

#[test]
fn conv2d_grad() {
    let mut r = rng();
    let x = offzero_tensor(&[2, 3, 7, 2], &mut r);
    let k = offzero_tensor(&[2, 3, 2, 3], &mut r);
    let report = check_gradients(&[x, k], DEFAULT_STEP, |t, v| {
        t.conv2d(v[0], v[1], (1, 2), Padding::Valid)
    })
    .unwrap();
    // tighter bound for the convolution oracle instance
    assert!(report.max_err < 1e-6, "{report:?}");
}

#[test]
fn conv2d_same_padding_grad() {
    let mut r = rng();
    let x = offzero_tensor(&[1, 2, 9, 2], &mut r);
    let k = offzero_tensor(&[1, 4, 2, 2], &mut r);
    let report = check_gradients(&[x, k], DEFAULT_STEP, |t, v| {
        t.conv2d(v[0], v[1], (1, 2), Padding::Same)
    })
    .unwrap();
    assert!(report.max_err < TOL, "{report:?}");
}

#[test]
fn depthwise_grad() {
    let mut r = rng();
    let x = offzero_tensor(&[2, 2, 6, 3], &mut r);
    let k = offzero_tensor(&[2, 3, 3, 2], &mut r);
    let report = check_gradients(&[x, k], DEFAULT_STEP, |t, v| {
        t.depthwise_conv2d(v[0], v[1], (1, 1), Padding::Valid)
    })
    .unwrap();
    assert!(report.max_err < TOL, "{report:?}");
}

#[test]
fn separable_grad() {
    let mut r = rng();
    let x = offzero_tensor(&[1, 1, 9, 2], &mut r);
    let dw = offzero_tensor(&[1, 3, 2, 2], &mut r);
    let pw = offzero_tensor(&[1, 1, 4, 3], &mut r);
    let report = check_gradients(&[x, dw, pw], DEFAULT_STEP, |t, v| {
        t.separable_conv2d(v[0], v[1], v[2], (1, 1), Padding::Same)
    })
    .unwrap();
    assert!(report.max_err < TOL, "{report:?}");
}

#[test]
fn batch_norm_train_grad() {
    let mut r = rng();
    let x = offzero_tensor(&[4, 2, 3, 2], &mut r);
    let gamma = offzero_tensor(&[2], &mut r);
    let beta = offzero_tensor(&[2], &mut r);
    let report = check_gradients(&[x, gamma, beta], DEFAULT_STEP, |t, v| {
        Ok(t.batch_norm_train(v[0], v[1], v[2], 1e-3).0)
    })
    .unwrap();
    assert!(report.max_err < TOL, "{report:?}");
}

#[test]
fn batch_norm_infer_grad() {
    let mut r = rng();
    let x = offzero_tensor(&[2, 1, 4, 3], &mut r);
    let gamma = offzero_tensor(&[3], &mut r);
    let beta = offzero_tensor(&[3], &mut r);
    let mean = offzero_tensor(&[3], &mut r);
    let var = Tensor::new(&[3], vec![0.9, 1.3, 0.4]);
    let report = check_gradients(&[x, gamma, beta], DEFAULT_STEP, move |t, v| {
        Ok(t.batch_norm_infer(v[0], v[1], v[2], &mean, &var, 1e-3))
    })
    .unwrap();
    assert!(report.max_err < TOL, "{report:?}");
}

#[test]
fn selu_grad() {
    let mut r = rng();
    let x = offzero_tensor(&[3, 5, 4], &mut r);
    let report =
        check_gradients(&[x], DEFAULT_STEP, |t, v| Ok(t.selu(v[0]))).unwrap();
    assert!(report.max_err < TOL, "{report:?}");
}

#[test]
fn prelu_grad() {
    let mut r = rng();
    let x = offzero_tensor(&[4, 6], &mut r);
    let alpha = Tensor::scalar(0.37);
    let report =
        check_gradients(&[x, alpha], DEFAULT_STEP, |t, v| t.prelu(v[0], v[1])).unwrap();
    assert!(report.max_err < TOL, "{report:?}");
}

#[test]
fn avg_pool_grad() {
    let mut r = rng();
    let x = offzero_tensor(&[2, 1, 12, 3], &mut r);
    let report = check_gradients(&[x], DEFAULT_STEP, |t, v| {
        t.avg_pool(v[0], (1, 4), (1, 2))
    })
    .unwrap();
    assert!(report.max_err < TOL, "{report:?}");
}

#[test]
fn dropout_frozen_mask_grad() {
    let mut r = rng();
    let x = offzero_tensor(&[6, 7], &mut r);
    let report = check_gradients(&[x], DEFAULT_STEP, |t, v| {
        // reseeding freezes the mask across finite-difference evaluations
        let mut rng = RngStream::new(42);
        t.dropout(v[0], 0.25, Mode::Train, &mut rng)
    })
    .unwrap();
    assert!(report.max_err < TOL, "{report:?}");
}

#[test]
fn linear_grad() {
    let mut r = rng();
    let x = offzero_tensor(&[3, 4, 5], &mut r);
    let w = offzero_tensor(&[5, 3], &mut r);
    let b = offzero_tensor(&[3], &mut r);
    let report = check_gradients(&[x, w, b], DEFAULT_STEP, |t, v| {
        t.linear(v[0], v[1], Some(v[2]))
    })
    .unwrap();
    assert!(report.max_err < TOL, "{report:?}");
}

#[test]
fn softmax_grad() {
    let mut r = rng();
    let x = offzero_tensor(&[3, 6], &mut r);
    let report = check_gradients(&[x], DEFAULT_STEP, |t, v| t.softmax(v[0], 1)).unwrap();
    assert!(report.max_err < TOL, "{report:?}");
}

#[test]
fn masked_softmax_grad_and_zero_masked_grad() {
    let mut r = rng();
    let x = offzero_tensor(&[2, 5], &mut r);
    let mask = Tensor::new(&[1, 5], vec![1.0, 1.0, 0.0, 1.0, 0.0]);
    let m2 = mask.clone();
    let report = check_gradients(std::slice::from_ref(&x), DEFAULT_STEP, move |t, v| {
        t.masked_softmax(v[0], 1, &m2)
    })
    .unwrap();
    assert!(report.max_err < TOL, "{report:?}");

    // masked positions receive exactly zero gradient
    let mut tape = agtc_tensor::Tape::new();
    let xv = tape.leaf(x, true);
    let y = tape.masked_softmax(xv, 1, &mask).unwrap();
    let seed = Tensor::full(&[2, 5], 1.0);
    let grads = tape.backward(y, seed).unwrap();
    let gx = grads.get(xv).unwrap();
    for row in 0..2 {
        assert_eq!(gx.at(&[row, 2]), 0.0);
        assert_eq!(gx.at(&[row, 4]), 0.0);
    }
}

#[test]
fn matmul_and_transpose_grad() {
    let mut r = rng();
    let a = offzero_tensor(&[2, 3, 4], &mut r);
    let b = offzero_tensor(&[2, 3, 4], &mut r);
    let report = check_gradients(&[a, b], DEFAULT_STEP, |t, v| {
        let bt = t.transpose_last2(v[1])?;
        t.matmul(v[0], bt)
    })
    .unwrap();
    assert!(report.max_err < TOL, "{report:?}");
}

#[test]
fn add_bias_and_scaled_const_grad() {
    let mut r = rng();
    let x = offzero_tensor(&[2, 4, 6], &mut r);
    let b = offzero_tensor(&[6], &mut r);
    let s = Tensor::scalar(0.42);
    let pe = positional_encoding(4, 6).unwrap();
    let report = check_gradients(&[x, b, s], DEFAULT_STEP, move |t, v| {
        let biased = t.add_bias(v[0], v[1])?;
        t.add_scaled_const(biased, v[2], pe.clone())
    })
    .unwrap();
    assert!(report.max_err < TOL, "{report:?}");
}

#[test]
fn pairwise_add_grad() {
    let mut r = rng();
    let s = offzero_tensor(&[2, 3, 4, 1], &mut r);
    let d = offzero_tensor(&[2, 3, 4, 1], &mut r);
    let report =
        check_gradients(&[s, d], DEFAULT_STEP, |t, v| t.pairwise_add(v[0], v[1])).unwrap();
    assert!(report.max_err < TOL, "{report:?}");
}

#[test]
fn edge_weighted_sum_grad() {
    let mut r = rng();
    let alpha = offzero_tensor(&[1, 3, 3, 4], &mut r);
    let v = offzero_tensor(&[1, 3, 4, 2], &mut r);
    let report = check_gradients(&[alpha, v], DEFAULT_STEP, |t, vars| {
        t.edge_weighted_sum(vars[0], vars[1])
    })
    .unwrap();
    assert!(report.max_err < TOL, "{report:?}");
}

#[test]
fn mha_grad() {
    let dm = 4;
    let dk = 2;
    let mut r = rng();
    let x = offzero_tensor(&[1, 3, dm], &mut r);
    let mut proj = Vec::new();
    for _ in 0..2 {
        // per-head wq, bq, wk, bk, wv, bv
        proj.push(offzero_tensor(&[dm, dk], &mut r));
        proj.push(offzero_tensor(&[dk], &mut r));
        proj.push(offzero_tensor(&[dm, dk], &mut r));
        proj.push(offzero_tensor(&[dk], &mut r));
        proj.push(offzero_tensor(&[dm, dk], &mut r));
        proj.push(offzero_tensor(&[dk], &mut r));
    }
    let wo = offzero_tensor(&[2 * dk, dm], &mut r);
    let bo = offzero_tensor(&[dm], &mut r);
    let mut inputs = vec![x];
    inputs.extend(proj);
    inputs.push(wo);
    inputs.push(bo);

    let report = check_gradients(&inputs, DEFAULT_STEP, |t, v| {
        let vars = MhaVars {
            wq: vec![v[1], v[7]],
            bq: vec![v[2], v[8]],
            wk: vec![v[3], v[9]],
            bk: vec![v[4], v[10]],
            wv: vec![v[5], v[11]],
            bv: vec![v[6], v[12]],
            wo: v[13],
            bo: v[14],
        };
        let mut rng = RngStream::new(7);
        Ok(multi_head_attention(t, v[0], &vars, dk, 0.6, Mode::Train, &mut rng)?.out)
    })
    .unwrap();
    assert!(report.max_err < TOL, "{report:?}");
}

#[test]
fn grad_accumulates_on_reused_nodes() {
    // y = x + x: gradient must be 2
    let mut tape = agtc_tensor::Tape::new();
    let x = tape.leaf(Tensor::new(&[2], vec![1.0, -1.0]), true);
    let y = tape.add(x, x).unwrap();
    let grads = tape.backward(y, Tensor::new(&[2], vec![1.0, 1.0])).unwrap();
    assert_eq!(grads.get(x).unwrap().data(), &[2.0, 2.0]);
}
