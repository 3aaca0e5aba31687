//! Wall-clock accounting per pipeline stage.

use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
    /// Pixels processed by the stage (for throughput).
    pub pixels: u64,
}

impl Stage {
    pub fn megapixels_per_second(&self) -> f64 {
        if self.seconds > 0.0 {
            self.pixels as f64 / self.seconds / 1e6
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stages: Vec<Stage>,
    /// Wall-clock time of the whole run, including bookkeeping between stages.
    pub total_seconds: f64,
}

impl StageTiming {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `elapsed` to stage `name`, creating it on first use.
    pub fn record(&mut self, name: &str, elapsed: Duration, pixels: u64) {
        let secs = elapsed.as_secs_f64();
        match self.stages.iter_mut().find(|s| s.name == name) {
            Some(s) => {
                s.seconds += secs;
                s.pixels += pixels;
            }
            None => self.stages.push(Stage {
                name: name.to_string(),
                seconds: secs,
                pixels,
            }),
        }
    }

    pub fn time<T>(&mut self, name: &str, pixels: u64, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.record(name, start.elapsed(), pixels);
        out
    }

    pub fn stage(&self, name: &str) -> Option<&Stage> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn stage_sum(&self) -> f64 {
        self.stages.iter().map(|s| s.seconds).sum()
    }

    /// Per-stage median over repeated runs with the same stage layout.
    pub fn median_of(runs: &[StageTiming]) -> StageTiming {
        let Some(first) = runs.first() else { return StageTiming::default() };
        let med = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            let mid = v.len() / 2;
            if v.len() % 2 == 0 {
                (v[mid - 1] + v[mid]) / 2.0
            } else {
                v[mid]
            }
        };
        let stages = first
            .stages
            .iter()
            .map(|s| Stage {
                name: s.name.clone(),
                seconds: med(runs
                    .iter()
                    .map(|r| r.stage(&s.name).map_or(0.0, |x| x.seconds))
                    .collect()),
                pixels: s.pixels,
            })
            .collect();
        StageTiming {
            stages,
            total_seconds: med(runs.iter().map(|r| r.total_seconds).collect()),
        }
    }
}

impl fmt::Display for StageTiming {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.stages {
            writeln!(
                f,
                "{:<12} {:>9.4} s  {:>9.2} Mpx/s",
                s.name,
                s.seconds,
                s.megapixels_per_second()
            )?;
        }
        write!(f, "{:<12} {:>9.4} s", "total", self.total_seconds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulates_by_name() {
        let mut t = StageTiming::new();
        t.record("census", Duration::from_millis(10), 100);
        t.record("cost", Duration::from_millis(5), 100);
        t.record("census", Duration::from_millis(10), 100);
        assert_eq!(t.stages.len(), 2);
        assert!((t.stage("census").unwrap().seconds - 0.02).abs() < 1e-9);
        assert_eq!(t.stage("census").unwrap().pixels, 200);
        assert!((t.stage_sum() - 0.025).abs() < 1e-9);
    }

    #[test]
    fn median_over_runs() {
        let run = |s: f64| StageTiming {
            stages: vec![Stage {
                name: "a".into(),
                seconds: s,
                pixels: 1,
            }],
            total_seconds: s,
        };
        let m = StageTiming::median_of(&[run(3.0), run(1.0), run(2.0)]);
        assert_eq!(m.stage("a").unwrap().seconds, 2.0);
        assert_eq!(m.total_seconds, 2.0);
    }
}
