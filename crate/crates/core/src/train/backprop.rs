//! Softmax cross-entropy loss and reverse-mode gradients.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::net::Network;

/// Gradient of one dense layer. `None` for layers skipped by the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Gradients for every layer of [`Network::layers`] (hidden, then readout).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Option<LayerGrad>>,
}

/// Row-wise log-softmax.
fn log_softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

fn check_batch(net: &Network, x: ArrayView2<f64>, labels: &[u8]) -> Result<usize> {
    if x.nrows() == 0 {
        return Err(Error::invalid("batch is empty"));
    }
    if x.nrows() != labels.len() {
        return Err(Error::dims("batch labels", x.nrows(), labels.len()));
    }
    let classes = net
        .readout()
        .ok_or_else(|| Error::invalid("training needs a readout layer"))?
        .fan_out();
    if let Some(bad) = labels.iter().find(|&&l| l as usize >= classes) {
        return Err(Error::invalid(format!("label {bad} outside 0..{classes}")));
    }
    Ok(classes)
}

/// Mean cross-entropy and the number of correct argmax predictions.
pub fn loss_and_correct(net: &Network, x: ArrayView2<f64>, labels: &[u8]) -> Result<(f64, usize)> {
    check_batch(net, x, labels)?;
    let logp = log_softmax(&net.logits_batch(x)?);
    let mut loss = 0.0;
    let mut correct = 0;
    for (row, &y) in logp.rows().into_iter().zip(labels) {
        loss -= row[y as usize];
        // First maximum wins ties.
        let best = row
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
            .0;
        correct += usize::from(best == y as usize);
    }
    Ok((loss / labels.len() as f64, correct))
}

/// Mean softmax cross-entropy over the batch and its exact gradients, with
/// the activation subgradient taken as 0 at breakpoints.
pub fn loss_and_gradients(net: &Network, x: ArrayView2<f64>, labels: &[u8]) -> Result<(f64, Gradients)> {
    loss_and_gradients_masked(net, x, labels, &vec![true; net.num_layers()])
}

/// As [`loss_and_gradients`] but only for layers with `wanted[i]` set; the
/// backward pass stops below the lowest wanted layer.
pub fn loss_and_gradients_masked(
    net: &Network,
    x: ArrayView2<f64>,
    labels: &[u8],
    wanted: &[bool],
) -> Result<(f64, Gradients)> {
    let classes = check_batch(net, x, labels)?;
    if wanted.len() != net.num_layers() {
        return Err(Error::dims("gradient mask", net.num_layers(), wanted.len()));
    }
    let act = net.activation();
    let layers: Vec<_> = net.layers().collect();
    let batch = x.nrows() as f64;

    // Forward, keeping pre-activations and activations.
    let mut pre: Vec<Array2<f64>> = Vec::with_capacity(layers.len() - 1);
    let mut acts: Vec<Array2<f64>> = Vec::with_capacity(layers.len() - 1);
    for layer in &layers[..layers.len() - 1] {
        let h = match acts.last() {
            None => layer.apply_batch(x),
            Some(z) => layer.apply_batch(z.view()),
        };
        acts.push(h.mapv(|v| act.apply(v)));
        pre.push(h);
    }
    let logits = layers[layers.len() - 1].apply_batch(acts.last().expect("hidden layers").view());
    let logp = log_softmax(&logits);
    let loss = -labels
        .iter()
        .enumerate()
        .map(|(i, &y)| logp[[i, y as usize]])
        .sum::<f64>()
        / batch;
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            location: "loss".into(),
            value: loss,
        });
    }

    // d loss / d logits = (softmax - onehot) / batch.
    let mut delta = logp.mapv(f64::exp);
    for (i, &y) in labels.iter().enumerate() {
        delta[[i, y as usize]] -= 1.0;
    }
    delta /= batch;
    debug_assert_eq!(delta.ncols(), classes);

    let lowest = wanted.iter().position(|&w| w).unwrap_or(layers.len());
    let mut grads: Vec<Option<LayerGrad>> = vec![None; layers.len()];
    for l in (lowest..layers.len()).rev() {
        let input = if l == 0 { x } else { acts[l - 1].view() };
        if wanted[l] {
            grads[l] = Some(LayerGrad {
                weights: delta.t().dot(&input),
                bias: delta.sum_axis(Axis(0)),
            });
        }
        if l > lowest {
            let mut back = delta.dot(&layers[l].weights);
            back.zip_mut_with(&pre[l - 1], |d, &h| *d *= act.derivative(h));
            delta = back;
        }
    }
    Ok((loss, Gradients { layers: grads }))
}
