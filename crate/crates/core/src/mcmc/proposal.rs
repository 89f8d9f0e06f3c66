//! Prior-preserving random walk `theta_p = sqrt(1 - beta^2) theta + beta eps`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::kle::ThetaVector;

/// Which coordinates a proposal touched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    All,
    Single(usize),
}

/// Draws a proposal. In single-component mode one index is picked uniformly
/// and only that coordinate is moved.
pub fn rws_propose<R: Rng + ?Sized>(
    theta: &[f64],
    beta: f64,
    single_component: bool,
    rng: &mut R,
) -> (ThetaVector, Move) {
    let keep = (1.0 - beta * beta).max(0.0).sqrt();
    let mut prop = theta.to_vec();
    let mv = if single_component {
        let k = rng.random_range(0..theta.len());
        let eps: f64 = rng.sample(StandardNormal);
        prop[k] = keep * theta[k] + beta * eps;
        Move::Single(k)
    } else {
        for p in prop.iter_mut() {
            let eps: f64 = rng.sample(StandardNormal);
            *p = keep * *p + beta * eps;
        }
        Move::All
    };
    (ThetaVector::from_vec_unchecked(prop), mv)
}

/// `log q(from | to) - log q(to | from)` for the moved coordinates.
pub fn log_proposal_ratio(from: &[f64], to: &[f64], beta: f64, mv: Move) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    let keep = (1.0 - beta * beta).max(0.0).sqrt();
    let log_q = |dst: f64, src: f64| -> f64 {
        let r = dst - keep * src;
        -r * r / (2.0 * beta * beta)
    };
    let term = |k: usize| log_q(from[k], to[k]) - log_q(to[k], from[k]);
    match mv {
        Move::All => (0..from.len()).map(term).sum(),
        Move::Single(k) => term(k),
    }
}

/// Standard-normal prior, up to a constant.
pub fn log_prior(theta: &[f64]) -> f64 {
    -0.5 * theta.iter().map(|t| t * t).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn beta_zero_keeps_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let theta = [0.3, -1.2, 2.0];
        for single in [true, false] {
            let (p, _) = rws_propose(&theta, 0.0, single, &mut rng);
            assert_eq!(&*p, &theta);
        }
    }

    #[test]
    fn beta_one_is_fresh_draw() {
        let theta = [5.0, 5.0, 5.0];
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        let (p, _) = rws_propose(&theta, 1.0, false, &mut a);
        for &v in p.iter() {
            let eps: f64 = b.sample(StandardNormal);
            assert_eq!(v, eps);
        }
    }

    #[test]
    fn single_component_touches_one_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let theta = vec![0.5; 20];
        for _ in 0..100 {
            let (p, mv) = rws_propose(&theta, 0.85, true, &mut rng);
            let Move::Single(k) = mv else { panic!() };
            for (i, (&a, &b)) in p.iter().zip(&theta).enumerate() {
                if i != k {
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn stationary_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let beta = 0.85;
        let draws = 100_000;
        let mut s2 = 0.0;
        for _ in 0..draws {
            let t: f64 = rng.sample(StandardNormal);
            let (p, _) = rws_propose(&[t], beta, false, &mut rng);
            s2 += p[0] * p[0];
        }
        let var = s2 / draws as f64;
        assert!((var - 1.0).abs() <= 0.03, "variance {var}");
    }

    #[test]
    fn proposal_ratio_cancels_prior_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for single in [true, false] {
            let theta: Vec<f64> = (0..6).map(|_| rng.sample(StandardNormal)).collect();
            let (p, mv) = rws_propose(&theta, 0.6, single, &mut rng);
            let explicit = log_proposal_ratio(&theta, &p, 0.6, mv) + log_prior(&p) - log_prior(&theta);
            assert!(explicit.abs() < 1e-12, "{explicit}");
        }
    }
}
