use rayon::prelude::*;

use super::{Gradient, LossKind, NetSpec, Params, Sample};
use crate::error::{Error, Result};
use crate::sum::VecSum;

/// Pre- and post-activations of one forward pass.
///
/// `post[0]` is the input; `pre[k]` and `post[k + 1]` belong to layer `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl ForwardTrace {
    /// Network output a^(K).
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("trace always holds the input")
    }
}

fn check_params(params: &Params, spec: &NetSpec) -> Result<()> {
    if !params.matches(spec) {
        return Err(Error::shape("parameters do not match the network spec"));
    }
    Ok(())
}

pub fn forward(params: &Params, spec: &NetSpec, input: &[f64]) -> Result<ForwardTrace> {
    check_params(params, spec)?;
    if input.len() != spec.input_dim() {
        return Err(Error::shape(format!(
            "input has length {}, network expects {}",
            input.len(),
            spec.input_dim()
        )));
    }
    if input.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("input contains non-finite values"));
    }
    let depth = spec.depth();
    let mut pre = Vec::with_capacity(depth);
    let mut post = Vec::with_capacity(depth + 1);
    post.push(input.to_vec());
    for k in 0..depth {
        let (rows, cols) = spec.weight_shape(k);
        let w = params.weight(k);
        let b = params.bias(k);
        let a_prev = &post[k];
        let u: Vec<f64> = (0..rows)
            .map(|i| {
                let row = &w[i * cols..(i + 1) * cols];
                row.iter().zip(a_prev).map(|(w, a)| w * a).sum::<f64>() + b[i]
            })
            .collect();
        let act = spec.activations()[k];
        let a = u.iter().map(|&x| act.apply(x)).collect();
        pre.push(u);
        post.push(a);
    }
    Ok(ForwardTrace { pre, post })
}

fn check_target(output_len: usize, target: &[f64], kind: LossKind) -> Result<()> {
    if target.len() != output_len {
        return Err(Error::shape(format!(
            "target has length {}, output has {}",
            target.len(),
            output_len
        )));
    }
    if target.iter().any(|y| !y.is_finite()) {
        return Err(Error::validation("target contains non-finite values"));
    }
    if kind == LossKind::CrossEntropy {
        let total: f64 = target.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "cross-entropy target must sum to 1, sums to {total}"
            )));
        }
        if target.iter().any(|&y| y < 0.0) {
            return Err(Error::validation("cross-entropy target has negative mass"));
        }
    }
    Ok(())
}

/// Index of the largest logit and `ln(sum_j exp(a_j - a_max))`, computed as
/// `ln_1p` of the non-maximal terms so that confident outputs keep full
/// relative precision.
fn log_sum_exp_shift(logits: &[f64]) -> (usize, f64) {
    let (imax, &amax) = logits
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty logits");
    let rest: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != imax)
        .map(|(_, &a)| (a - amax).exp())
        .sum();
    (imax, rest.ln_1p())
}

pub fn per_sample_loss(trace: &ForwardTrace, target: &[f64], kind: LossKind) -> Result<f64> {
    let out = trace.output();
    check_target(out.len(), target, kind)?;
    Ok(loss_unchecked(out, target, kind))
}

fn loss_unchecked(out: &[f64], target: &[f64], kind: LossKind) -> f64 {
    match kind {
        LossKind::Mse => out.iter().zip(target).map(|(a, y)| (y - a) * (y - a)).sum(),
        LossKind::CrossEntropy => {
            let (imax, shift) = log_sum_exp_shift(out);
            let amax = out[imax];
            // -sum_j y_j (a_j - lse) with lse = amax + shift
            let mass: f64 = target.iter().sum();
            let linear: f64 = out.iter().zip(target).map(|(a, y)| y * (amax - a)).sum();
            linear + mass * shift
        }
    }
}

/// dℓ/da^(K) for the given trace and target.
pub fn output_gradient(trace: &ForwardTrace, target: &[f64], kind: LossKind) -> Result<Vec<f64>> {
    let out = trace.output();
    check_target(out.len(), target, kind)?;
    Ok(output_gradient_unchecked(out, target, kind))
}

fn output_gradient_unchecked(out: &[f64], target: &[f64], kind: LossKind) -> Vec<f64> {
    match kind {
        LossKind::Mse => out.iter().zip(target).map(|(a, y)| 2.0 * (a - y)).collect(),
        LossKind::CrossEntropy => {
            let (imax, _) = log_sum_exp_shift(out);
            let amax = out[imax];
            let exps: Vec<f64> = out.iter().map(|a| (a - amax).exp()).collect();
            let z: f64 = exps.iter().sum();
            let mass: f64 = target.iter().sum();
            exps.iter().zip(target).map(|(e, y)| mass * e / z - y).collect()
        }
    }
}

/// Loss and gradient of one sample.
pub fn loss_and_gradient(
    params: &Params,
    spec: &NetSpec,
    input: &[f64],
    target: &[f64],
) -> Result<(f64, Gradient)> {
    let trace = forward(params, spec, input)?;
    check_target(spec.output_dim(), target, spec.loss())?;
    let out = trace.output();
    let loss = loss_unchecked(out, target, spec.loss());

    let depth = spec.depth();
    let mut grad = vec![0.0; params.len()];
    // delta = dℓ/du^(k), starting at the output layer
    let out_act = spec.activations()[depth - 1];
    let mut delta: Vec<f64> = output_gradient_unchecked(out, target, spec.loss())
        .into_iter()
        .zip(&trace.pre[depth - 1])
        .map(|(g, &u)| g * out_act.derivative(u))
        .collect();

    for k in (0..depth).rev() {
        let (rows, cols) = spec.weight_shape(k);
        let a_prev = &trace.post[k];
        let range = params.layer_range(k);
        let layer_grad = &mut grad[range];
        let (gw, gb) = layer_grad.split_at_mut(rows * cols);
        for i in 0..rows {
            let d = delta[i];
            gb[i] = d;
            if d != 0.0 {
                for (g, a) in gw[i * cols..(i + 1) * cols].iter_mut().zip(a_prev) {
                    *g = d * a;
                }
            }
        }
        if k > 0 {
            let w = params.weight(k);
            let act = spec.activations()[k - 1];
            let mut next = vec![0.0; cols];
            for (i, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (n, wij) in next.iter_mut().zip(&w[i * cols..(i + 1) * cols]) {
                    *n += wij * d;
                }
            }
            for (n, &u) in next.iter_mut().zip(&trace.pre[k - 1]) {
                *n *= act.derivative(u);
            }
            delta = next;
        }
    }
    Ok((loss, Gradient(grad)))
}

/// dℓ(x; θ)/dθ for one sample.
pub fn per_sample_gradient(
    params: &Params,
    spec: &NetSpec,
    input: &[f64],
    target: &[f64],
) -> Result<Gradient> {
    loss_and_gradient(params, spec, input, target).map(|(_, g)| g)
}

// Fixed chunking keeps the reduction order independent of the thread count.
const CHUNK: usize = 32;

/// Mean per-sample gradient over `batch`, accumulated with compensated
/// summation in a fixed order. Also returns the mean loss.
pub fn batch_loss_and_gradient(
    params: &Params,
    spec: &NetSpec,
    batch: &[&Sample],
) -> Result<(f64, Gradient)> {
    if batch.is_empty() {
        return Err(Error::validation("batch must not be empty"));
    }
    let d = params.len();
    let partials: Vec<(VecSum, f64)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = VecSum::zeros(d);
            let mut loss = crate::sum::NeumaierSum::new();
            for s in chunk {
                let (l, g) = loss_and_gradient(params, spec, &s.input, &s.target)?;
                acc.add(&g.0);
                loss.add(l);
            }
            Ok((acc, loss.value()))
        })
        .collect::<Result<_>>()?;
    let mut total = VecSum::zeros(d);
    let mut loss = crate::sum::NeumaierSum::new();
    for (acc, l) in &partials {
        total.add(&acc.total());
        loss.add(*l);
    }
    let n = batch.len() as f64;
    let grad = total.total().into_iter().map(|x| x / n).collect();
    Ok((loss.value() / n, Gradient(grad)))
}

/// (1/|S|) Σ_s dℓ(x_s; θ)/dθ.
pub fn batch_gradient(params: &Params, spec: &NetSpec, batch: &[Sample]) -> Result<Gradient> {
    let refs: Vec<&Sample> = batch.iter().collect();
    batch_loss_and_gradient(params, spec, &refs).map(|(_, g)| g)
}

/// Mean loss over a dataset.
pub fn mean_loss(params: &Params, spec: &NetSpec, data: &[Sample]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::validation("dataset must not be empty"));
    }
    let losses: Vec<f64> = data
        .par_iter()
        .map(|s| {
            let trace = forward(params, spec, &s.input)?;
            per_sample_loss(&trace, &s.target, spec.loss())
        })
        .collect::<Result<_>>()?;
    Ok(crate::sum::sum(&losses) / data.len() as f64)
}

/// Fraction of samples whose arg-max output matches the arg-max target.
pub fn accuracy(params: &Params, spec: &NetSpec, data: &[Sample]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::validation("dataset must not be empty"));
    }
    let argmax = |v: &[f64]| {
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    };
    let hits = data
        .par_iter()
        .map(|s| {
            let trace = forward(params, spec, &s.input)?;
            Ok(usize::from(argmax(trace.output()) == argmax(&s.target)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Activation;

    fn one_layer(act: Activation, w: f64, b: f64, loss: LossKind) -> (NetSpec, Params) {
        let spec = NetSpec::new(vec![1, 1], vec![act], loss).unwrap();
        let p = Params::from_flat(&spec, vec![w, b]).unwrap();
        (spec, p)
    }

    #[test]
    fn forward_hand_arithmetic() {
        let (spec, p) = one_layer(Activation::Relu, 2.0, 1.0, LossKind::Mse);
        let t = forward(&p, &spec, &[3.0]).unwrap();
        assert_eq!(t.pre[0], vec![7.0]);
        assert_eq!(t.output(), &[7.0]);
        let t = forward(&p, &spec, &[-3.0]).unwrap();
        assert_eq!(t.pre[0], vec![-5.0]);
        assert_eq!(t.output(), &[0.0]);
    }

    #[test]
    fn zero_weights_output_bias() {
        let spec = NetSpec::new(vec![3, 2], vec![Activation::Identity], LossKind::Mse).unwrap();
        let mut p = Params::zeros(&spec);
        p.bias_mut(0).copy_from_slice(&[0.25, -4.0]);
        let t = forward(&p, &spec, &[9.0, -1.0, 3.0]).unwrap();
        assert_eq!(t.output(), &[0.25, -4.0]);
    }

    #[test]
    fn forward_errors() {
        let (spec, p) = one_layer(Activation::Relu, 2.0, 1.0, LossKind::Mse);
        assert!(matches!(forward(&p, &spec, &[1.0, 2.0]), Err(Error::Shape(_))));
        assert!(matches!(forward(&p, &spec, &[f64::NAN]), Err(Error::Validation(_))));
        let other = NetSpec::new(vec![2, 1], vec![Activation::Relu], LossKind::Mse).unwrap();
        assert!(matches!(forward(&p, &other, &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn losses() {
        let spec = NetSpec::new(vec![1, 3], vec![Activation::Identity], LossKind::CrossEntropy).unwrap();
        let mut p = Params::zeros(&spec);
        p.bias_mut(0).copy_from_slice(&[0.7, 0.7, 0.7]);
        let t = forward(&p, &spec, &[1.0]).unwrap();
        let ce = per_sample_loss(&t, &[0.0, 1.0, 0.0], LossKind::CrossEntropy).unwrap();
        assert!((ce - 3f64.ln()).abs() < 1e-15);
        assert!(per_sample_loss(&t, &[0.5, 0.6, 0.0], LossKind::CrossEntropy).is_err());

        let mse = per_sample_loss(&t, &[0.7, 0.7, 0.7], LossKind::Mse).unwrap();
        assert_eq!(mse, 0.0);
    }

    #[test]
    fn confident_cross_entropy_keeps_precision() {
        // ln(1 + e^-10), evaluated with mpmath at 30 digits
        let expected = 4.539889921686464e-5;
        let trace = ForwardTrace {
            pre: vec![vec![10.0, 0.0]],
            post: vec![vec![0.0], vec![10.0, 0.0]],
        };
        let ce = per_sample_loss(&trace, &[1.0, 0.0], LossKind::CrossEntropy).unwrap();
        assert!(((ce - expected) / expected).abs() < 1e-13, "{ce}");
    }

    #[test]
    fn scalar_gradient() {
        let spec = NetSpec::new(vec![1, 1], vec![Activation::Identity], LossKind::Mse).unwrap();
        let p = Params::from_flat(&spec, vec![3.0, 0.0]).unwrap();
        let (loss, g) = loss_and_gradient(&p, &spec, &[1.0], &[0.0]).unwrap();
        assert_eq!(loss, 9.0);
        // d(wx - y)²/dw = 2(wx - y)x
        assert_eq!(g.0[0], 6.0);
    }

    #[test]
    fn relu_kink_uses_zero_subgradient() {
        let (spec, p) = one_layer(Activation::Relu, 1.0, 0.0, LossKind::Mse);
        let g = per_sample_gradient(&p, &spec, &[0.0], &[1.0]).unwrap();
        assert_eq!(g.0, vec![0.0, 0.0]);
    }

    #[test]
    fn batch_means() {
        let spec = NetSpec::new(
            vec![2, 3, 2],
            vec![Activation::Tanh, Activation::Identity],
            LossKind::CrossEntropy,
        )
        .unwrap();
        let p = Params::init_uniform(&spec, 11);
        let s1 = Sample::new(vec![0.3, -0.2], vec![1.0, 0.0]);
        let s2 = Sample::new(vec![-0.9, 0.5], vec![0.0, 1.0]);
        let g1 = per_sample_gradient(&p, &spec, &s1.input, &s1.target).unwrap();
        let g2 = per_sample_gradient(&p, &spec, &s2.input, &s2.target).unwrap();

        assert_eq!(batch_gradient(&p, &spec, &[s1.clone()]).unwrap(), g1);
        assert_eq!(batch_gradient(&p, &spec, &[s1.clone(), s1.clone()]).unwrap(), g1);
        let mean = batch_gradient(&p, &spec, &[s1, s2]).unwrap();
        for ((m, a), b) in mean.0.iter().zip(&g1.0).zip(&g2.0) {
            let expected = (a + b) / 2.0;
            assert!((m - expected).abs() <= 1e-15 * expected.abs().max(1e-300));
        }
        assert!(batch_gradient(&p, &spec, &[]).is_err());
    }
}
