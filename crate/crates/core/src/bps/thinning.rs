use crate::error::Result;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// First arrival before `budget` of a Poisson process with intensity `rate(s)`,
/// by thinning against piecewise-constant bounds. `bound(t, w)` must dominate
/// the rate on [t, t + w]. The window starts at `h0` and doubles (up to
/// `h_max`) whenever it is exhausted without a proposal.
pub(crate) fn first_arrival<R, F, B>(rng: &mut R, budget: f64, h0: f64, h_max: f64, mut rate: F, mut bound: B) -> Result<Option<f64>>
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> f64,
    B: FnMut(f64, f64) -> Result<f64>,
{
    let mut t = 0.0;
    let mut h = h0;
    loop {
        if t >= budget {
            return Ok(None);
        }
        let w = h.min(budget - t);
        let b = bound(t, w)?;
        if !(b > 0.0) {
            t += w;
            h = (2.0 * h).min(h_max);
            continue;
        }
        let e: f64 = Exp1.sample(rng);
        let step = e / b;
        if step >= w {
            t += w;
            h = (2.0 * h).min(h_max);
            continue;
        }
        t += step;
        if t >= budget {
            return Ok(None);
        }
        let r = rate(t);
        debug_assert!(r <= b * (1.0 + 1e-9) + 1e-12, "thinning bound violated: rate {r} > bound {b}");
        let u: f64 = rng.gen();
        if u * b < r {
            return Ok(Some(t));
        }
    }
}
