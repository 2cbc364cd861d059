//! Populations of independent trajectories with reproducible random streams.
//!
//! Trajectory `i` draws from the ChaCha8 stream `i` of the generator keyed by
//! the master seed. Only the stream position is stored between segments, so
//! the noise seen by a trajectory depends on `(master_seed, i)` and on nothing
//! else, whatever the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

/// The per-trajectory random stream handed to step functions.
pub type TrajectoryRng = ChaCha8Rng;

/// A state whose components can be checked for NaN and infinities.
pub trait Finite {
    fn is_finite(&self) -> bool;
}

/// The random stream of trajectory `index` positioned at its start.
pub fn trajectory_rng(master_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    rng
}

#[derive(Clone, Debug)]
pub struct Ensemble<S> {
    pub states: Vec<S>,
    word_pos: Vec<u128>,
    master_seed: u64,
    /// Number of fixed steps taken since construction.
    pub steps: u64,
    pub time: f64,
}

impl<S: Send + Sync> Ensemble<S> {
    /// Builds `n` states, each drawn from the start of its own stream.
    pub fn from_fn<F>(n: usize, master_seed: u64, init: F) -> Self
    where
        F: Fn(usize, &mut ChaCha8Rng) -> S + Sync,
    {
        let (states, word_pos): (Vec<S>, Vec<u128>) = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = trajectory_rng(master_seed, i);
                let s = init(i, &mut rng);
                (s, rng.get_word_pos())
            })
            .unzip();
        Self {
            states,
            word_pos,
            master_seed,
            steps: 0,
            time: 0.0,
        }
    }

    /// Deterministic initial states; the streams start untouched.
    pub fn from_states(states: Vec<S>, master_seed: u64) -> Self {
        let word_pos = vec![0; states.len()];
        Self {
            states,
            word_pos,
            master_seed,
            steps: 0,
            time: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Applies `step` `n_steps` times to every trajectory.
    ///
    /// On failure the error of the lowest-indexed failing trajectory is
    /// returned and the ensemble is left unchanged.
    pub fn advance<F>(&mut self, n_steps: u64, dt: f64, step: F) -> Result<()>
    where
        S: Finite + Clone,
        F: Fn(&mut S, &mut ChaCha8Rng) -> Result<()> + Sync,
    {
        if n_steps == 0 {
            return Ok(());
        }
        let seed = self.master_seed;
        let base_step = self.steps;
        let results: Vec<std::result::Result<(S, u128), Error>> = self
            .states
            .par_iter()
            .zip(self.word_pos.par_iter())
            .enumerate()
            .map(|(i, (s, &pos))| {
                let mut rng = trajectory_rng(seed, i);
                rng.set_word_pos(pos);
                let mut s = s.clone();
                for k in 0..n_steps {
                    let nan = |_| Error::NonFinite {
                        trajectory: i,
                        step: base_step + k + 1,
                    };
                    match step(&mut s, &mut rng) {
                        Err(Error::NonFinite { .. }) => return Err(nan(())),
                        Err(e) => return Err(e),
                        Ok(()) => {}
                    }
                    if !s.is_finite() {
                        return Err(nan(()));
                    }
                }
                Ok((s, rng.get_word_pos()))
            })
            .collect();
        if let Some(e) = results.iter().find_map(|r| r.as_ref().err()) {
            return Err(e.clone());
        }
        for (i, r) in results.into_iter().enumerate() {
            let (s, pos) = r.expect("checked above");
            self.states[i] = s;
            self.word_pos[i] = pos;
        }
        self.steps += n_steps;
        self.time = self.steps as f64 * dt;
        Ok(())
    }

    /// Runs fixed steps of size `dt` up to `t_final`, calling `observer` at
    /// the current time and at every entry of `sample_times` (rounded to the
    /// step grid) that lies in (time, t_final].
    pub fn simulate<F, O>(
        &mut self,
        dt: f64,
        t_final: f64,
        sample_times: &[f64],
        step: F,
        mut observer: O,
    ) -> Result<()>
    where
        S: Finite + Clone,
        F: Fn(&mut S, &mut ChaCha8Rng) -> Result<()> + Sync,
        O: FnMut(&Self),
    {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        if t_final < self.time - 1e-12 * dt {
            return Err(invalid(
                "t_final",
                format!("{t_final} precedes the ensemble time {}", self.time),
            ));
        }
        let to_step = |t: f64| (t / dt).round() as u64;
        let final_step = to_step(t_final).max(self.steps);
        let mut marks: Vec<u64> = sample_times
            .iter()
            .map(|&t| to_step(t))
            .filter(|&k| k > self.steps && k <= final_step)
            .collect();
        marks.sort_unstable();
        marks.dedup();
        observer(self);
        for k in marks {
            self.advance(k - self.steps, dt, &step)?;
            observer(self);
        }
        let rest = final_step - self.steps;
        self.advance(rest, dt, &step)
    }
}
