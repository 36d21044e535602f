use super::{first_arrival, reflect, Event, EventKind, KineticState, SimConfig, Trajectory};
use crate::error::{Error, Result};
use crate::potentials::PotentialModel;
use crate::rng::{ChainSeed, ChainStreams, Clock};
use crate::velocity::VelocityLaw;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// First bounce time within `budget` from `state`, by thinning.
pub fn next_bounce<R: Rng + ?Sized>(
    model: &PotentialModel,
    state: &KineticState,
    rng: &mut R,
    budget: f64,
    config: &SimConfig,
) -> Result<Option<f64>> {
    if !(budget > 0.0) {
        return Err(Error::InvalidParameter("budget must be positive".into()));
    }
    if matches!(model, PotentialModel::Zero { .. }) {
        return Ok(None);
    }
    let (x, y) = (&state.x, &state.y);
    first_arrival(
        rng,
        budget,
        config.thinning_step,
        config.thinning_step_max,
        |s| model.bounce_rate(&(x + y * s), y),
        |t, w| model.segment_rate_bound(&(x + y * t), y, w),
    )
}

fn check_initial(model: &PotentialModel, law: &VelocityLaw, config: &SimConfig, initial: &KineticState) -> Result<()> {
    config.validate()?;
    crate::error::check_dim(model.dim(), initial.x.len())?;
    crate::error::check_dim(model.dim(), initial.y.len())?;
    crate::error::check_dim(model.dim(), law.dim())?;
    if initial.x.iter().chain(initial.y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("initial state must be finite".into()));
    }
    Ok(())
}

/// Moves the particle from its last event time to `t_new`, so that the
/// stored event position equals the left limit of the previous segment bit for bit.
fn transport(x: &mut nalgebra::DVector<f64>, y: &nalgebra::DVector<f64>, t_old: f64, t_new: f64) {
    x.axpy(t_new - t_old, y, 1.0);
}

/// Competing-clocks construction: an exponential refresh clock races the
/// bounce clock of the current segment.
pub fn simulate(
    model: &PotentialModel,
    law: &VelocityLaw,
    config: &SimConfig,
    initial: &KineticState,
    seed: &ChainSeed,
) -> Result<Trajectory> {
    check_initial(model, law, config, initial)?;
    let mut streams = ChainStreams::new(seed);
    let mut x = initial.x.clone();
    let mut y = initial.y.clone();
    let mut t = 0.0;
    let mut events = Vec::new();
    loop {
        if events.len() >= config.event_cap {
            return Err(Error::Runaway { cap: config.event_cap, time: t });
        }
        let remaining = config.horizon - t;
        let refresh_in = if config.refresh_rate > 0.0 {
            let e: f64 = Exp1.sample(&mut streams.refresh);
            e / config.refresh_rate
        } else {
            f64::INFINITY
        };
        let budget = refresh_in.min(remaining);
        let state = KineticState { x: x.clone(), y: y.clone() };
        let bounce_in = next_bounce(model, &state, &mut streams.bounce, budget, config)?;
        match bounce_in {
            Some(s) => {
                let t_new = t + s;
                transport(&mut x, &y, t, t_new);
                t = t_new;
                y = reflect(&model.grad(&x), &y);
                events.push(Event { time: t, kind: EventKind::Bounce, position: x.clone(), velocity_after: y.clone() });
            }
            None if refresh_in < remaining => {
                let t_new = t + refresh_in;
                transport(&mut x, &y, t, t_new);
                t = t_new;
                y = law.sample(&mut streams.velocity);
                events.push(Event { time: t, kind: EventKind::Refresh, position: x.clone(), velocity_after: y.clone() });
            }
            None => break,
        }
    }
    Ok(Trajectory::new(initial.clone(), events, config.horizon, Some(*seed)))
}

/// Single-clock construction with total rate ⟨y, ∇U⟩₊ + λ_r; each event is a
/// refreshment with probability λ_r / total rate and a bounce otherwise.
pub fn simulate_global(
    model: &PotentialModel,
    law: &VelocityLaw,
    config: &SimConfig,
    initial: &KineticState,
    seed: &ChainSeed,
) -> Result<Trajectory> {
    check_initial(model, law, config, initial)?;
    let mut clock = seed.stream(Clock::Bounce);
    let mut select = seed.stream(Clock::Refresh);
    let mut draws = seed.stream(Clock::Velocity);
    let lam = config.refresh_rate;
    let mut x = initial.x.clone();
    let mut y = initial.y.clone();
    let mut t = 0.0;
    let mut events = Vec::new();
    loop {
        if events.len() >= config.event_cap {
            return Err(Error::Runaway { cap: config.event_cap, time: t });
        }
        let remaining = config.horizon - t;
        let (xs, ys) = (&x, &y);
        let arrival = first_arrival(
            &mut clock,
            remaining,
            config.thinning_step,
            config.thinning_step_max,
            |s| model.bounce_rate(&(xs + ys * s), ys) + lam,
            |s, w| Ok(model.segment_rate_bound(&(xs + ys * s), ys, w)? + lam),
        )?;
        let Some(s) = arrival else { break };
        let t_new = t + s;
        transport(&mut x, &y, t, t_new);
        t = t_new;
        let g = model.grad(&x);
        let total = y.dot(&g).max(0.0) + lam;
        let u: f64 = select.gen();
        if u * total < lam {
            y = law.sample(&mut draws);
            events.push(Event { time: t, kind: EventKind::Refresh, position: x.clone(), velocity_after: y.clone() });
        } else {
            y = reflect(&g, &y);
            events.push(Event { time: t, kind: EventKind::Bounce, position: x.clone(), velocity_after: y.clone() });
        }
    }
    Ok(Trajectory::new(initial.clone(), events, config.horizon, Some(*seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_one_sample, ks_two_sample, mean_se};
    use nalgebra::DVector;

    #[test]
    fn zero_potential_without_refresh_is_free_transport() {
        let m = PotentialModel::zero(2).unwrap();
        let law = VelocityLaw::standard_gaussian(2);
        let cfg = SimConfig::new(0.0, 5.0);
        let init = KineticState::from_slices(&[1.0, 2.0], &[0.5, -1.0]);
        let tr = simulate(&m, &law, &cfg, &init, &ChainSeed::new(1, 0)).unwrap();
        assert!(tr.events().is_empty());
        let s = tr.state_at(2.0).unwrap();
        assert_eq!(s.x.as_slice(), &[2.0, 0.0]);
        assert_eq!(s.y, init.y);
    }

    #[test]
    fn refresh_only_event_count_is_poisson() {
        let m = PotentialModel::zero(1).unwrap();
        let law = VelocityLaw::standard_gaussian(1);
        let cfg = SimConfig::new(1.0, 1000.0);
        let init = KineticState::from_slices(&[0.0], &[1.0]);
        let counts: Vec<f64> = (0..50)
            .map(|i| simulate(&m, &law, &cfg, &init, &ChainSeed::new(2, i)).unwrap().events().len() as f64)
            .collect();
        for &c in &counts {
            assert!((c - 1000.0).abs() < 5.0 * 1000f64.sqrt());
        }
        let (mean, se) = mean_se(&counts);
        assert!((mean - 1000.0).abs() < 4.0 * se.max(1000f64.sqrt() / 50f64.sqrt()));
    }

    #[test]
    fn bounce_times_follow_inverse_cdf_law() {
        let m = PotentialModel::standard_gaussian(1);
        let state = KineticState::from_slices(&[0.3], &[1.0]);
        let cfg = SimConfig::new(1.0, 1.0);
        let mut rng = ChainSeed::new(3, 0).stream(Clock::Bounce);
        let times: Vec<f64> = (0..20_000)
            .map(|_| next_bounce(&m, &state, &mut rng, f64::INFINITY, &cfg).unwrap().unwrap())
            .collect();
        // Λ(t) = 0.3 t + t²/2
        let ks = ks_one_sample(&times, |t| 1.0 - (-(0.3 * t + 0.5 * t * t)).exp()).unwrap();
        assert!(ks.p_value > 0.01, "{ks:?}");
        assert_eq!(next_bounce(&PotentialModel::zero(1).unwrap(), &state, &mut rng, 10.0, &cfg).unwrap(), None);
    }

    #[test]
    fn event_invariants_hold() {
        let m = PotentialModel::aniso_power(vec![2.5, 3.0]).unwrap();
        let law = VelocityLaw::sphere(2, 1.0).unwrap();
        let cfg = SimConfig::new(0.7, 300.0);
        let init = KineticState::from_slices(&[1.0, -2.0], &[0.6, 0.8]);
        for sim in [simulate, simulate_global] {
            let tr = sim(&m, &law, &cfg, &init, &ChainSeed::new(4, 1)).unwrap();
            let mut prev_t = 0.0;
            let mut prev_x = init.x.clone();
            let mut prev_y = init.y.clone();
            for e in tr.events() {
                assert!(e.time > prev_t);
                let mut left = prev_x.clone();
                left.axpy(e.time - prev_t, &prev_y, 1.0);
                assert_eq!(left, e.position, "position must be continuous");
                if e.kind == EventKind::Bounce {
                    let expected = reflect(&m.grad(&e.position), &prev_y);
                    assert_eq!(expected, e.velocity_after);
                    assert!((e.velocity_after.norm() - prev_y.norm()).abs() < 1e-12);
                }
                prev_t = e.time;
                prev_x = e.position.clone();
                prev_y = e.velocity_after.clone();
            }
        }
    }

    #[test]
    fn constructions_agree_in_law_1d() {
        let m = PotentialModel::standard_gaussian(1);
        let law = VelocityLaw::standard_gaussian(1);
        let cfg = SimConfig::new(1.0, 2.0);
        let init = KineticState::from_slices(&[1.0], &[0.5]);
        let a: Vec<f64> = (0..4000)
            .map(|i| simulate(&m, &law, &cfg, &init, &ChainSeed::new(5, i)).unwrap().final_state().x[0])
            .collect();
        let b: Vec<f64> = (0..4000)
            .map(|i| simulate_global(&m, &law, &cfg, &init, &ChainSeed::new(6, i)).unwrap().final_state().x[0])
            .collect();
        let ks = ks_two_sample(&a, &b).unwrap();
        assert!(ks.p_value > 0.01, "{ks:?}");
    }

    #[test]
    fn runaway_cap_is_enforced() {
        let m = PotentialModel::zero(1).unwrap();
        let law = VelocityLaw::standard_gaussian(1);
        let mut cfg = SimConfig::new(10.0, 100.0);
        cfg.event_cap = 5;
        let init = KineticState::from_slices(&[0.0], &[1.0]);
        assert!(matches!(simulate(&m, &law, &cfg, &init, &ChainSeed::new(7, 0)), Err(Error::Runaway { .. })));
    }

    #[test]
    fn rejects_mismatched_initial_state() {
        let m = PotentialModel::standard_gaussian(2);
        let law = VelocityLaw::standard_gaussian(2);
        let cfg = SimConfig::new(1.0, 1.0);
        let init = KineticState::new(DVector::zeros(3), DVector::zeros(3));
        assert!(simulate(&m, &law, &cfg, &init, &ChainSeed::new(8, 0)).is_err());
    }
}
