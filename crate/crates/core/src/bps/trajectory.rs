use super::{Event, EventKind, KineticState};
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::rng::ChainSeed;
use nalgebra::DVector;

/// Sparse record of a piecewise-linear path: initial state plus jump events.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    initial: KineticState,
    events: Vec<Event>,
    horizon: f64,
    seed: Option<ChainSeed>,
}

/// One linear piece: starts at `start` with state (x, y) and lasts `len`.
#[derive(Debug, Clone, Copy)]
pub struct Segment<'a> {
    pub start: f64,
    pub len: f64,
    pub x: &'a DVector<f64>,
    pub y: &'a DVector<f64>,
}

impl Trajectory {
    pub fn new(initial: KineticState, events: Vec<Event>, horizon: f64, seed: Option<ChainSeed>) -> Self {
        Trajectory { initial, events, horizon, seed }
    }

    pub fn initial(&self) -> &KineticState {
        &self.initial
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn seed(&self) -> Option<&ChainSeed> {
        self.seed.as_ref()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Linear pieces covering [0, horizon].
    pub fn segments(&self) -> impl Iterator<Item = Segment<'_>> {
        let starts = std::iter::once((0.0, &self.initial.x, &self.initial.y))
            .chain(self.events.iter().map(|e| (e.time, &e.position, &e.velocity_after)));
        let ends = self.events.iter().map(|e| e.time).chain(std::iter::once(self.horizon));
        starts.zip(ends).map(|((start, x, y), end)| Segment { start, len: end - start, x, y })
    }

    /// State at time t ∈ [0, horizon] (right-continuous in the velocity).
    pub fn state_at(&self, t: f64) -> Result<KineticState> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::OutOfRange { t, horizon: self.horizon });
        }
        let k = self.events.partition_point(|e| e.time <= t);
        let (t0, x0, y0) = if k == 0 {
            (0.0, &self.initial.x, &self.initial.y)
        } else {
            let e = &self.events[k - 1];
            (e.time, &e.position, &e.velocity_after)
        };
        let mut x = x0.clone();
        x.axpy(t - t0, y0, 1.0);
        Ok(KineticState { x, y: y0.clone() })
    }

    pub fn final_state(&self) -> KineticState {
        self.state_at(self.horizon).expect("horizon is in range")
    }

    /// (1/T) ∫₀ᵀ g(X_s, Y_s) ds with a Gauss–Legendre rule of the given order on every segment.
    pub fn time_average<G>(&self, g: G, order: usize) -> f64
    where
        G: Fn(&DVector<f64>, &DVector<f64>) -> f64,
    {
        let rule = GaussLegendre::new(order);
        self.integrate_window(&g, &rule, 0.0, self.horizon) / self.horizon
    }

    fn integrate_window<G>(&self, g: &G, rule: &GaussLegendre, a: f64, b: f64) -> f64
    where
        G: Fn(&DVector<f64>, &DVector<f64>) -> f64,
    {
        let mut total = 0.0;
        for seg in self.segments() {
            let lo = seg.start.max(a);
            let hi = (seg.start + seg.len).min(b);
            if hi <= lo {
                continue;
            }
            total += rule.integrate(lo - seg.start, hi - seg.start, |s| {
                let mut x = seg.x.clone();
                x.axpy(s, seg.y, 1.0);
                g(&x, seg.y)
            });
        }
        total
    }

    /// Time average with a batch-means standard error over `batches` equal windows.
    pub fn batch_means<G>(&self, g: G, order: usize, batches: usize) -> (f64, f64)
    where
        G: Fn(&DVector<f64>, &DVector<f64>) -> f64,
    {
        let rule = GaussLegendre::new(order);
        let w = self.horizon / batches as f64;
        let mut means = vec![0.0; batches];
        // single pass over segments, splitting at batch boundaries
        for seg in self.segments() {
            let end = seg.start + seg.len;
            let mut lo = seg.start;
            while lo < end {
                let k = ((lo / w).floor() as usize).min(batches - 1);
                let hi = end.min((k + 1) as f64 * w);
                let hi = if k == batches - 1 { end } else { hi };
                if hi > lo {
                    means[k] += rule.integrate(lo - seg.start, hi - seg.start, |s| {
                        let mut x = seg.x.clone();
                        x.axpy(s, seg.y, 1.0);
                        g(&x, seg.y)
                    });
                }
                lo = hi;
            }
        }
        for m in means.iter_mut() {
            *m /= w;
        }
        crate::stats::mean_se(&means)
    }
}
