//! Zero-potential BPS on the flat torus D = (ℝ/ℤ) × (ℝ/ηℤ)^{d−1} with Gaussian
//! refreshment, its coupling-based total variation bound and the
//! dimension-scaling experiment.
//!
//! The coupled pair reads its velocities off a pair of reflection-coupled
//! Brownian motions W, W̃ started from the positions at the first refreshment
//! S₁. The k-th velocity is G_k = (W_{τ_{k+1}} − W_{τ_k})/(S_{k+1} − S_k) with
//! the clock τ_k = Σ_{1≤i<k} (S_{i+1} − S_i)², so each G_k is exactly N(0, I)
//! and X_{S_k} = X_{S₁} + W_{τ_k}. The positions meet at the first S_k, k ≥ 2,
//! with τ_k ≥ T_c, the coupling time of the Brownian pair.

use crate::bps::KineticState;
use crate::coupling::MergeReport;
use crate::error::{check_dim, Error, Result};
use crate::par::{map_indexed, Execution};
use crate::rng::{ChainSeed, Clock};
use crate::stats::{mean_se, normal_cdf};
use nalgebra::{DVector, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

/// The torus (ℝ/ℤ) × (ℝ/ηℤ)^{d−1}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGeom {
    dim: usize,
    eta: f64,
}

impl TorusGeom {
    pub fn new(dim: usize, eta: f64) -> Result<Self> {
        if dim < 2 || !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!("need d ≥ 2 and η > 0, got d = {dim}, η = {eta}")));
        }
        Ok(TorusGeom { dim, eta })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn period(&self, i: usize) -> f64 {
        if i == 0 {
            1.0
        } else {
            self.eta
        }
    }

    /// (1 + η²(d − 1))^{1/2}, the norm cap used by the bound; twice the true diameter.
    pub fn diameter_bound(&self) -> f64 {
        (1.0 + self.eta * self.eta * (self.dim - 1) as f64).sqrt()
    }

    /// Shortest representative of x̃ − x, each coordinate in [−p_i/2, p_i/2).
    pub fn separation(&self, x: &DVector<f64>, x_tilde: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim, |i, _| {
            let p = self.period(i);
            let v = (x_tilde[i] - x[i]).rem_euclid(p);
            if v >= 0.5 * p {
                v - p
            } else {
                v
            }
        })
    }
}

/// Componentwise reduction into [0, p_i).
pub fn proj_torus(geom: &TorusGeom, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let p = geom.period(i);
        let v = x[i].rem_euclid(p);
        // rem_euclid can round up to p itself
        if v >= p {
            0.0
        } else {
            v
        }
    })
}

/// Monte Carlo value of the coupling bound on ‖δ_z P_t − δ_z̃ P_t‖_TV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusBound {
    /// e^{−λt}(1 + λt), exact.
    pub few_refreshes: f64,
    /// 2[P(N_t ≤ 1) + E[1{N_t ≥ 2}(2Φ(D/(2(S_{N_t} − S₁))) − 1)]] with D the diameter bound.
    pub bound: f64,
    pub se: f64,
    /// Same with S_{N_t} − S₁ replaced by √τ_{N_t}, the clock of the simulated coupling.
    pub clock_bound: f64,
    pub clock_se: f64,
}

/// Evaluates the bound by sampling the refreshment times on [0, t]; the
/// N_t ≤ 1 part is exact.
pub fn torus_bound(geom: &TorusGeom, refresh_rate: f64, t: f64, n_mc: usize, seed: u64) -> Result<TorusBound> {
    if !(refresh_rate > 0.0) || !(t >= 0.0) || n_mc == 0 {
        return Err(Error::InvalidParameter("need λ_r > 0, t ≥ 0 and n_mc ≥ 1".into()));
    }
    let lt = refresh_rate * t;
    let few_refreshes = (-lt).exp() * (1.0 + lt);
    if t == 0.0 {
        return Ok(TorusBound { few_refreshes, bound: 2.0, se: 0.0, clock_bound: 2.0, clock_se: 0.0 });
    }
    let diam = geom.diameter_bound();
    let fail = |span: f64| 2.0 * normal_cdf(diam / (2.0 * span)) - 1.0;
    let poisson = Poisson::new(lt).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChainSeed::new(seed, 0x70b).stream(Clock::Aux(4));
    let (mut a, mut b) = (Vec::with_capacity(n_mc), Vec::with_capacity(n_mc));
    for _ in 0..n_mc {
        let n = poisson.sample(&mut rng) as usize;
        if n < 2 {
            a.push(0.0);
            b.push(0.0);
            continue;
        }
        // given N_t = n the jump times are sorted uniforms on [0, t]
        let mut s: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * t).collect();
        s.sort_by(f64::total_cmp);
        let clock: f64 = s.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
        a.push(fail(s[n - 1] - s[0]));
        b.push(fail(clock.sqrt()));
    }
    let (ma, sa) = mean_se(&a);
    let (mb, sb) = mean_se(&b);
    Ok(TorusBound {
        few_refreshes,
        bound: 2.0 * (few_refreshes + ma),
        se: 2.0 * sa,
        clock_bound: 2.0 * (few_refreshes + mb),
        clock_se: 2.0 * sb,
    })
}

/// Starting states of a coupled pair; positions are reduced onto D.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusPair {
    pub first: KineticState,
    pub second: KineticState,
}

/// A coupled run with the states of both chains at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusRun {
    pub report: MergeReport,
    pub finals: [KineticState; 2],
    pub refreshes: usize,
    /// Coupling time of the Brownian pair, in clock units.
    pub coupling_time: f64,
}

/// Brownian motion along the separation direction, conditioned on the coupling time.
///
/// Before T_c the process a − B is a three-dimensional Bessel bridge from a to 0,
/// sampled as the norm of a Brownian bridge in ℝ³; after T_c it is free.
struct SeparationPath {
    a: f64,
    t_c: f64,
    time: f64,
    bridge: Vector3<f64>,
    value: f64,
}

impl SeparationPath {
    fn new(a: f64, t_c: f64) -> Self {
        SeparationPath { a, t_c, time: 0.0, bridge: Vector3::new(a, 0.0, 0.0), value: 0.0 }
    }

    fn advance(&mut self, to: f64, rng: &mut ChaCha8Rng) -> f64 {
        if to <= self.time {
            return self.value;
        }
        if self.time < self.t_c {
            let stop = to.min(self.t_c);
            let (span, left) = (self.t_c - self.time, self.t_c - stop);
            let sd = ((stop - self.time) * left / span).sqrt();
            let mean = self.bridge * (left / span);
            self.bridge = mean + Vector3::from_fn(|_, _| sd * rng.sample::<f64, _>(StandardNormal));
            self.value = self.a - self.bridge.norm();
            self.time = stop;
        }
        if to > self.time {
            self.value += (to - self.time).sqrt() * rng.sample::<f64, _>(StandardNormal);
            self.time = to;
        }
        self.value
    }

    /// Value of the reflected partner B̃: −B before T_c, B − 2a after.
    fn mirrored(&self) -> f64 {
        if self.time >= self.t_c {
            self.value - 2.0 * self.a
        } else {
            -self.value
        }
    }
}

fn check_pair(geom: &TorusGeom, pair: &TorusPair) -> Result<()> {
    for s in [&pair.first, &pair.second] {
        check_dim(geom.dim(), s.x.len())?;
        check_dim(geom.dim(), s.y.len())?;
    }
    Ok(())
}

fn gap(rng: &mut ChaCha8Rng, lam: f64) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e / lam
}

/// Merge time of the coupled pair without the horizon: the first S_k, k ≥ 2,
/// with τ_k ≥ T_c. Uses the same streams as [`couple_torus_pair`].
pub fn torus_merge_time(geom: &TorusGeom, refresh_rate: f64, pair: &TorusPair, seed: &ChainSeed) -> Result<f64> {
    check_pair(geom, pair)?;
    let mut clock = seed.stream(Clock::Refresh);
    let mut coupling = seed.stream(Clock::Coupling);
    let s1 = gap(&mut clock, refresh_rate);
    let x1 = proj_torus(geom, &(&pair.first.x + &pair.first.y * s1));
    let x2 = proj_torus(geom, &(&pair.second.x + &pair.second.y * s1));
    let t_c = coupling_time(geom.separation(&x1, &x2).norm(), &mut coupling);
    let (mut s, mut tau) = (s1, 0.0);
    loop {
        let g = gap(&mut clock, refresh_rate);
        s += g;
        tau += g * g;
        if tau >= t_c {
            return Ok(s);
        }
    }
}

/// T_c = a²/Z² for a = r/2: the Lévy law of the hitting time of a.
fn coupling_time(r: f64, rng: &mut ChaCha8Rng) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    if r == 0.0 {
        0.0
    } else if z == 0.0 {
        f64::INFINITY
    } else {
        (0.5 * r / z).powi(2)
    }
}

/// Simulates the coupled pair up to `horizon`.
pub fn couple_torus_pair(
    geom: &TorusGeom,
    refresh_rate: f64,
    pair: &TorusPair,
    horizon: f64,
    seed: &ChainSeed,
) -> Result<TorusRun> {
    check_pair(geom, pair)?;
    if !(refresh_rate > 0.0) || !(horizon >= 0.0) {
        return Err(Error::InvalidParameter("need λ_r > 0 and horizon ≥ 0".into()));
    }
    let d = geom.dim();
    let lam = refresh_rate;
    let mut clock = seed.stream(Clock::Refresh);
    let mut coupling = seed.stream(Clock::Coupling);
    let mut shared = seed.stream(Clock::Velocity);
    let report = |merged: Option<f64>, first: Option<f64>, dist: Option<f64>, hit: bool| MergeReport {
        merged: merged.is_some(),
        merge_time: merged,
        bounce_before_merge: false,
        gaussian_merged: hit,
        first_refresh: first,
        reflection_distance: dist,
        seed_base: seed.base,
        seed_index: seed.index,
    };

    let s1 = gap(&mut clock, lam);
    if s1 > horizon {
        let fin = |s: &KineticState| KineticState::new(proj_torus(geom, &(&s.x + &s.y * horizon)), s.y.clone());
        return Ok(TorusRun {
            report: report(None, None, None, false),
            finals: [fin(&pair.first), fin(&pair.second)],
            refreshes: 0,
            coupling_time: f64::INFINITY,
        });
    }
    let x1 = proj_torus(geom, &(&pair.first.x + &pair.first.y * s1));
    let x2 = proj_torus(geom, &(&pair.second.x + &pair.second.y * s1));
    let delta = geom.separation(&x1, &x2);
    let r = delta.norm();
    let t_c = coupling_time(r, &mut coupling);
    let n = if r > 0.0 { &delta / r } else { DVector::zeros(d) };
    let mut path = SeparationPath::new(0.5 * r, t_c);

    // W = B n + P with P the shared component orthogonal to n
    let (mut b_prev, mut bt_prev) = (0.0, 0.0);
    let (mut s, mut tau) = (s1, 0.0);
    let (mut pos1, mut pos2) = (x1, x2);
    let mut refreshes = 1usize;
    let mut merged = None;
    loop {
        let g = gap(&mut clock, lam);
        tau += g * g;
        let xi = DVector::from_fn(d, |_, _| g * shared.sample::<f64, _>(StandardNormal));
        let orth = &xi - &n * n.dot(&xi);
        let b = path.advance(tau, &mut coupling);
        let bt = path.mirrored();
        let v1 = (&orth + &n * (b - b_prev)) / g;
        let v2 = (&orth + &n * (bt - bt_prev)) / g;
        (b_prev, bt_prev) = (b, bt);
        if s + g > horizon {
            let dt = horizon - s;
            let f1 = KineticState::new(proj_torus(geom, &(&pos1 + &v1 * dt)), v1.clone());
            let f2 = if merged.is_some() {
                f1.clone()
            } else {
                KineticState::new(proj_torus(geom, &(&pos2 + &v2 * dt)), v2)
            };
            return Ok(TorusRun {
                report: report(merged, Some(s1), Some(r), t_c <= tau),
                finals: [f1, f2],
                refreshes,
                coupling_time: t_c,
            });
        }
        pos1 = proj_torus(geom, &(&pos1 + &v1 * g));
        pos2 = if merged.is_some() { pos1.clone() } else { proj_torus(geom, &(&pos2 + &v2 * g)) };
        s += g;
        refreshes += 1;
        if merged.is_none() && tau >= t_c {
            merged = Some(s);
            pos2 = pos1.clone();
        }
    }
}

/// Independent torus BPS chain; zero potential means refreshments only.
pub fn simulate_torus(
    geom: &TorusGeom,
    refresh_rate: f64,
    start: &KineticState,
    horizon: f64,
    seed: &ChainSeed,
) -> Result<(KineticState, usize)> {
    check_dim(geom.dim(), start.x.len())?;
    let mut clock = seed.stream(Clock::Refresh);
    let mut vel = seed.stream(Clock::Velocity);
    let (mut x, mut y) = (start.x.clone(), start.y.clone());
    let mut t = 0.0;
    let mut count = 0;
    loop {
        let g = gap(&mut clock, refresh_rate);
        if t + g > horizon {
            x += &y * (horizon - t);
            return Ok((KineticState::new(proj_torus(geom, &x), y), count));
        }
        x = proj_torus(geom, &(&x + &y * g));
        t += g;
        count += 1;
        y = DVector::from_fn(geom.dim(), |_, _| vel.sample::<f64, _>(StandardNormal));
    }
}

/// Empirical coupling estimate at one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusCell {
    pub dim: usize,
    pub t: f64,
    pub merged: usize,
    pub runs: usize,
    /// 2(1 − merge rate).
    pub tv_upper: f64,
    pub tv_se: f64,
}

/// Merge times of `runs` coupled pairs started at the antipodal pair
/// x = 0, x̃ = (1/2, η/2, …), zero velocities.
pub fn antipodal_merge_times(geom: &TorusGeom, refresh_rate: f64, runs: usize, base: u64, exec: Execution) -> Result<Vec<f64>> {
    let pair = antipodal_pair(geom);
    map_indexed(runs, exec, |i| torus_merge_time(geom, refresh_rate, &pair, &ChainSeed::new(base, i as u64)))
        .into_iter()
        .collect()
}

pub fn antipodal_pair(geom: &TorusGeom) -> TorusPair {
    let d = geom.dim();
    TorusPair {
        first: KineticState::new(DVector::zeros(d), DVector::zeros(d)),
        second: KineticState::new(DVector::from_fn(d, |i, _| 0.5 * geom.period(i)), DVector::zeros(d)),
    }
}

/// 2(1 − P̂(merge ≤ t)) from precomputed merge times.
pub fn cell_from_merge_times(dim: usize, t: f64, times: &[f64]) -> TorusCell {
    let runs = times.len();
    let merged = times.iter().filter(|&&m| m <= t).count();
    let p = merged as f64 / runs as f64;
    TorusCell { dim, t, merged, runs, tv_upper: 2.0 * (1.0 - p), tv_se: 2.0 * (p * (1.0 - p) / runs as f64).sqrt() }
}

/// Fitted coupling time for one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub dim: usize,
    /// Smallest t with empirical TV bound ≤ 1 − ε; `None` when censored at the cap.
    pub t_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub eta: f64,
    pub refresh_rate: f64,
    pub epsilon: f64,
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of ln t_c against ln d over uncensored rows.
    pub exponent: Option<f64>,
}

/// For each d, the smallest horizon at which 2(1 − P̂(merged by t)) ≤ 1 − ε.
///
/// Since the merge event is monotone in t for a fixed seed, the bisection
/// on t reduces to an order statistic of the merge times; horizons above
/// `t_cap` are reported as censored.
pub fn scaling_experiment(
    eta: f64,
    refresh_rate: f64,
    dims: &[usize],
    epsilon: f64,
    runs: usize,
    t_cap: f64,
    base: u64,
    exec: Execution,
) -> Result<ScalingReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) || runs == 0 {
        return Err(Error::InvalidParameter("need ε ∈ (0, 1) and at least one run".into()));
    }
    let mut rows = Vec::with_capacity(dims.len());
    for &d in dims {
        let geom = TorusGeom::new(d, eta)?;
        let mut times = antipodal_merge_times(&geom, refresh_rate, runs, base ^ d as u64, exec)?;
        times.sort_by(f64::total_cmp);
        // 2(1 − k/n) ≤ 1 − ε  ⇔  k ≥ n(1 + ε)/2
        let k = ((runs as f64) * (1.0 + epsilon) / 2.0).ceil() as usize;
        let t = times[k.clamp(1, runs) - 1];
        rows.push(ScalingRow { dim: d, t_c: (t <= t_cap).then_some(t) });
    }
    let pts: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.t_c.map(|t| ((r.dim as f64).ln(), t.ln()))).collect();
    let exponent = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(ScalingReport { eta, refresh_rate, epsilon, rows, exponent })
}
