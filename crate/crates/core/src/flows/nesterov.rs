//! Finite-dimensional accelerated gradient recursion, used as a reference
//! for the `O(1/t^2)` rate the continuous flows inherit.

/// State after one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct NesterovIterate {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lambda: f64,
    pub gamma: f64,
}

/// `lambda_k = (1 + sqrt(1 + 4 lambda_{k-1}^2)) / 2`.
pub fn nesterov_lambda(prev: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * prev * prev).sqrt())
}

/// Runs `n` iterations of
///
/// `y_{k+1} = x_k - grad E(x_k) / beta`,
/// `x_{k+1} = (1 - gamma_k) y_{k+1} + gamma_k y_k`,
/// `gamma_k = (1 - lambda_k) / (lambda_k + 1)`,
///
/// starting from `y_0 = x_0` and `lambda_{-1} = 0` (so `lambda_0 = 1`,
/// `gamma_0 = 0`). Returns the iterates `x_1 ..= x_n`.
pub fn nesterov_reference(
    grad: impl Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    beta_lip: f64,
    n: usize,
) -> Vec<NesterovIterate> {
    assert!(beta_lip > 0.0, "Lipschitz constant must be positive");
    let mut x = x0.to_vec();
    let mut y = x0.to_vec();
    let mut lambda = 0.0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        lambda = nesterov_lambda(lambda);
        let gamma = (1.0 - lambda) / (lambda + 1.0);
        let g = grad(&x);
        let y_next: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - gi / beta_lip).collect();
        x = y_next
            .iter()
            .zip(&y)
            .map(|(a, b)| a + gamma * (b - a))
            .collect();
        y = y_next;
        out.push(NesterovIterate {
            x: x.clone(),
            y: y.clone(),
            lambda,
            gamma,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_recursion() {
        assert_eq!(nesterov_lambda(0.0), 1.0);
        assert!((nesterov_lambda(1.0) - 1.618_033_988_7).abs() < 1e-10);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let it = nesterov_reference(|x| vec![0.0; x.len()], &[1.0, -2.0], 3.0, 10);
        assert!(it.iter().all(|s| s.x == vec![1.0, -2.0]));
    }

    #[test]
    fn scalar_quadratic_meets_rate() {
        let it = nesterov_reference(|x| vec![x[0]], &[1.0], 1.0, 200);
        for (k, s) in it.iter().enumerate() {
            let n = (k + 1) as f64;
            let e = 0.5 * s.x[0] * s.x[0];
            assert!(e <= 2.0 / ((n + 1.0) * (n + 1.0)), "n={n}: {e}");
        }
    }
}
