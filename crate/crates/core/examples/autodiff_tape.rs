//! The reverse-mode tape on its own: a logistic unit trained by hand, with
//! one gradient compared against a central difference.

use graphcm::autodiff::*;
use ndarray::array;

fn loss(store: &ParamStore, w: ParamId, x: &Matrix, y: &[f64]) -> (f64, Gradients) {
    let mut tape = Tape::new(store);
    let xv = tape.constant(x.clone());
    let wv = tape.param(w);
    let z = tape.matmul(xv, wv).unwrap();
    let p = tape.sigmoid(z);
    let weights = vec![1.0; y.len()];
    let l = tape.bce(p, y, &weights).unwrap();
    (tape.scalar(l), tape.backward(l).unwrap())
}

fn main() {
    let x = array![[1.0, 0.5], [1.0, -1.0], [1.0, 2.0], [1.0, -0.3]];
    let y = [1.0, 0.0, 1.0, 0.0];
    let mut store = ParamStore::new();
    let w = store.insert("w", Matrix::zeros((2, 1))).unwrap();

    let (_, g) = loss(&store, w, &x, &y);
    let h = 1e-6;
    store.get_mut(w)[[1, 0]] = h;
    let up = loss(&store, w, &x, &y).0;
    store.get_mut(w)[[1, 0]] = -h;
    let down = loss(&store, w, &x, &y).0;
    store.get_mut(w)[[1, 0]] = 0.0;
    println!("dL/dw1 analytic {:.8} numeric {:.8}", g.get(w).unwrap()[[1, 0]], (up - down) / (2.0 * h));

    let adam = AdamConfig::new(0.1, 0.0);
    for step in 0..=200 {
        let (l, g) = loss(&store, w, &x, &y);
        if step % 50 == 0 {
            println!("step {step:>3} loss {l:.5}");
        }
        adam_step(&mut store, &g, &adam).unwrap();
    }
}
