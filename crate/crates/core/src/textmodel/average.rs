use super::params::ModelParams;
use crate::{Error, Result};

/// Correctly rounded sum of `values` (Shewchuk's partials with the final
/// half-even fix-up), so the result does not depend on input order.
pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }

    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        let yr = x - hi;
        if y == yr {
            hi = x;
        }
    }
    hi
}

/// Correctly rounded arithmetic mean of `values` (ties to even).
pub fn exact_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let n = values.len() as f64;
    let q = exact_sum(values.iter().copied()) / n;
    if !q.is_finite() || q == 0.0 && values.iter().any(|v| *v != 0.0) {
        return q;
    }
    // Sign-exact residual `sum - c·n` for candidate means `c`.
    let split = |c: f64| {
        let a = c * n;
        (a, c.mul_add(n, -a))
    };
    let residual = |cs: &[f64]| {
        let mut terms: Vec<f64> = Vec::with_capacity(cs.len() * (values.len() + 2));
        for &c in cs {
            let (a, b) = split(c);
            terms.extend_from_slice(values);
            terms.push(-a);
            terms.push(-b);
        }
        exact_sum(terms)
    };
    let r = residual(&[q]);
    if r == 0.0 {
        return q;
    }
    let (mut lo, mut hi) = if r > 0.0 { (q, q.next_up()) } else { (q.next_down(), q) };
    while residual(&[hi]) > 0.0 {
        lo = hi;
        hi = hi.next_up();
    }
    while residual(&[lo]) < 0.0 {
        hi = lo;
        lo = lo.next_down();
    }
    if residual(&[lo]) == 0.0 {
        return lo;
    }
    if residual(&[hi]) == 0.0 {
        return hi;
    }
    // The mean lies strictly between `lo` and `hi`.
    let t = residual(&[lo, hi]);
    if t < 0.0 || t == 0.0 && lo.to_bits() & 1 == 0 {
        lo
    } else {
        hi
    }
}

/// Element-wise mean of parameter snapshots. Each element is the correctly
/// rounded mean, so the result is invariant under any permutation of
/// `snapshots`.
pub fn average_checkpoints(snapshots: &[ModelParams]) -> Result<ModelParams> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::Type("cannot average zero checkpoints".into()))?;
    if let Some(bad) = snapshots.iter().find(|s| !s.same_shape(first)) {
        return Err(Error::Type(format!(
            "checkpoint shape mismatch: {} weights vs {}",
            bad.weights.len(),
            first.weights.len()
        )));
    }
    let mean_at = |get: &dyn Fn(&ModelParams) -> f64| {
        exact_mean(&snapshots.iter().map(get).collect::<Vec<_>>())
    };
    let weights = (0..first.weights.len())
        .map(|i| mean_at(&|s: &ModelParams| s.weights[i]))
        .collect();
    let bias = (0..first.bias.len())
        .map(|i| mean_at(&|s: &ModelParams| s.bias[i]))
        .collect();
    Ok(ModelParams {
        weights,
        bias,
        ..first.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabelSpace;
    use crate::textmodel::{init_params, FeatureConfig, InitScheme, PairMode};

    fn scalar(w: f64) -> ModelParams {
        let space = LabelSpace::continuous(0.0, 1.0).unwrap();
        let cfg = FeatureConfig {
            ngram_orders: vec![1],
            hash_dim: 1,
            pair_mode: PairMode::Concat,
        };
        let mut p = init_params(&space, &cfg, 0, InitScheme::Zeros).unwrap();
        p.weights[0] = w;
        p
    }

    #[test]
    fn exact_sum_known_cases() {
        assert_eq!(exact_sum([0.1; 10]), 1.0);
        assert_eq!(exact_sum([1e100, 1.0, -1e100, 1e-100]), 1.0);
        assert_eq!(exact_sum([1e-16, 1.0, 1e16]), 10000000000000002.0);
        assert_eq!(exact_sum(std::iter::empty()), 0.0);
    }

    #[test]
    fn identity_symmetry_and_mean() {
        let a = scalar(0.3);
        assert_eq!(average_checkpoints(std::slice::from_ref(&a)).unwrap(), a);
        let space = LabelSpace::categorical(["x", "y"]).unwrap();
        let w = init_params(&space, &FeatureConfig { hash_dim: 8, ..Default::default() }, 1, InitScheme::Random { scale: 1.0 }).unwrap();
        let mut neg = w.clone();
        neg.weights.iter_mut().for_each(|v| *v = -*v);
        neg.bias.iter_mut().for_each(|v| *v = -*v);
        let avg = average_checkpoints(&[w, neg]).unwrap();
        assert!(avg.weights.iter().chain(&avg.bias).all(|v| *v == 0.0));
        assert_eq!(average_checkpoints(&[scalar(1.0), scalar(3.0)]).unwrap().weights[0], 2.0);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let space = LabelSpace::categorical(["x", "y"]).unwrap();
        let big = init_params(&space, &FeatureConfig { hash_dim: 8, ..Default::default() }, 0, InitScheme::Zeros).unwrap();
        assert!(matches!(average_checkpoints(&[scalar(1.0), big]), Err(Error::Type(_))));
        assert!(average_checkpoints(&[]).is_err());
    }
}
