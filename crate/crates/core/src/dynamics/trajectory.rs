//! Trajectory sampling and trapezoidal time averages ⟨f⟩_t.

use crate::error::{Error, Result};
use crate::state::StateVector;

use super::Propagator;

/// A named real-valued function of the state.
pub struct Observable<'a> {
    pub name: String,
    pub func: Box<dyn Fn(&StateVector) -> f64 + 'a>,
}

impl<'a> Observable<'a> {
    pub fn new(name: impl Into<String>, func: impl Fn(&StateVector) -> f64 + 'a) -> Self {
        Self {
            name: name.into(),
            func: Box::new(func),
        }
    }
}

/// Sample times 0, dt, 2dt, …, up to and including `t_max` (rounded to the
/// nearest whole number of steps).
pub fn uniform_times(t_max: f64, dt: f64) -> Vec<f64> {
    let steps = (t_max / dt).round().max(0.0) as usize;
    (0..=steps).map(|i| i as f64 * dt).collect()
}

/// Sampled observable values along one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    names: Vec<String>,
    values: Vec<Vec<f64>>,
    running: Vec<Vec<f64>>,
    tail_variation: Vec<f64>,
    characteristic_period: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeAverage {
    pub mean: f64,
    /// Spread (max − min) of the running average over the last quarter of samples.
    pub tail_variation: f64,
    pub span: f64,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, names: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "sample times must be strictly increasing".into(),
            ));
        }
        if names.len() != values.len() || values.iter().any(|v| v.len() != times.len()) {
            return Err(Error::InvalidParameter(
                "observable columns must match the sample times".into(),
            ));
        }
        let running: Vec<Vec<f64>> = values.iter().map(|v| running_average(&times, v)).collect();
        let tail_variation = running.iter().map(|r| tail_spread(r)).collect();
        Ok(Self {
            times,
            names,
            values,
            running,
            tail_variation,
            characteristic_period: None,
        })
    }

    /// Time scale used to warn about averages taken over too short a span.
    pub fn with_characteristic_period(mut self, period: f64) -> Self {
        self.characteristic_period = Some(period);
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn column(&self, id: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == id)
            .ok_or_else(|| Error::UnknownObservable(id.to_string()))
    }

    pub fn values(&self, id: &str) -> Result<&[f64]> {
        Ok(&self.values[self.column(id)?])
    }

    pub fn running_average(&self, id: &str) -> Result<&[f64]> {
        Ok(&self.running[self.column(id)?])
    }

    pub fn tail_variation(&self, id: &str) -> Result<f64> {
        Ok(self.tail_variation[self.column(id)?])
    }

    pub fn span(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}

fn running_average(times: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len());
    let mut integral = 0.0;
    for i in 0..v.len() {
        if i == 0 {
            out.push(v[0]);
            continue;
        }
        integral += 0.5 * (v[i] + v[i - 1]) * (times[i] - times[i - 1]);
        out.push(integral / (times[i] - times[0]));
    }
    out
}

fn tail_spread(running: &[f64]) -> f64 {
    if running.is_empty() {
        return 0.0;
    }
    let start = (3 * running.len()) / 4;
    let tail = &running[start.min(running.len() - 1)..];
    let max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// Evolves `s0` through `times` (starting at 0) and records every observable.
/// States are not retained.
pub fn sample_trajectory(
    prop: &mut Propagator<'_>,
    s0: &StateVector,
    times: &[f64],
    observables: &[Observable<'_>],
) -> Result<TimeSeries> {
    if times.first().is_some_and(|&t| t != 0.0) {
        return Err(Error::InvalidParameter("sample times must start at 0".into()));
    }
    let mut state = s0.clone();
    let mut values = vec![Vec::with_capacity(times.len()); observables.len()];
    let mut prev = 0.0;
    for &t in times {
        if t != prev {
            prop.advance(state.amplitudes_mut(), t - prev)?;
            prev = t;
        }
        for (col, obs) in values.iter_mut().zip(observables) {
            col.push((obs.func)(&state));
        }
    }
    TimeSeries::new(
        times.to_vec(),
        observables.iter().map(|o| o.name.clone()).collect(),
        values,
    )
}

/// Trapezoidal average over the full span plus the tail-variation diagnostic.
pub fn time_average(series: &TimeSeries, id: &str) -> Result<TimeAverage> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let col = series.column(id)?;
    let span = series.span();
    if let Some(period) = series.characteristic_period {
        if span < 10.0 * period {
            log::warn!(
                "time average of `{id}` spans {span:.3} < 10 characteristic periods ({period:.3})"
            );
        }
    }
    Ok(TimeAverage {
        mean: *series.running[col].last().expect("non-empty"),
        tail_variation: series.tail_variation[col],
        span,
    })
}
