//! Reverse-mode autodiff on a two-layer perceptron, checked against a
//! central difference.
//!
//! `cargo run --example autodiff`

use auditmatch::numcore::{Graph, Tensor};

fn loss_of(w1: &Tensor<f64>, w2: &Tensor<f64>, x: &Tensor<f64>, record: bool) -> (f64, Option<Vec<f64>>) {
    let mut g = Graph::<f64>::new();
    let (w1v, w2v) = if record { (g.param(w1.clone()), g.param(w2.clone())) } else { (g.constant(w1.clone()), g.constant(w2.clone())) };
    let xv = g.constant(x.clone());
    let h = g.matmul(xv, w1v).unwrap();
    let h = g.gelu(h);
    let y = g.matmul(h, w2v).unwrap();
    let loss = g.cross_entropy(y, &[0, 2]).unwrap();
    let value = g.value(loss).item();
    if !record {
        return (value, None);
    }
    g.backward(loss).unwrap();
    (value, Some(g.grad(w1v).unwrap().to_vec()))
}

fn main() {
    let x = Tensor::new(vec![2, 3], vec![0.5, -1.0, 0.25, 1.5, 0.0, -0.5]).unwrap();
    let w1 = Tensor::new(vec![3, 4], (0..12).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
    let w2 = Tensor::new(vec![4, 3], (0..12).map(|i| (i as f64 * 0.71).cos()).collect()).unwrap();

    let (loss, grad) = loss_of(&w1, &w2, &x, true);
    let grad = grad.unwrap();
    println!("loss {loss:.6}");

    let h = 1e-5;
    for j in [0, 5, 11] {
        let mut up = w1.clone();
        up.data_mut()[j] += h;
        let mut down = w1.clone();
        down.data_mut()[j] -= h;
        let numeric = (loss_of(&up, &w2, &x, false).0 - loss_of(&down, &w2, &x, false).0) / (2.0 * h);
        println!("dL/dw1[{j}]: backprop {:+.8}  finite difference {numeric:+.8}", grad[j]);
    }
}
