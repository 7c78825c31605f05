//! Synthetic datasets with a known answer.
//!
//! [`PlantedSignal`] draws i.i.d. standard-normal noise for every parameter
//! and adds a constant mean shift to one parameter inside a fixed sub-interval
//! for positive instances only. Any pipeline that works should find that
//! parameter, and only that one.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{binarize_label, Dataset, FlareClass, FlareLabel, TimeSeriesInstance};
use crate::error::{Error, Result};

/// The 24 active-region magnetic-field parameters of the SWAN-SF benchmark.
pub const SWAN_SF_PARAMETERS: [&str; 24] = [
    "TOTUSJH", "TOTBSQ", "TOTPOT", "TOTUSJZ", "ABSNJZH", "SAVNCPP", "USFLUX", "TOTFZ", "MEANPOT",
    "EPSZ", "MEANSHR", "SHRGT45", "MEANGAM", "MEANGBT", "MEANGBZ", "MEANGBH", "MEANJZH", "TOTFY",
    "MEANJZD", "MEANALP", "TOTFX", "EPSY", "EPSX", "R_VALUE",
];

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedSignal {
    pub n_instances: usize,
    pub n_parameters: usize,
    pub timesteps: usize,
    /// Index of the parameter that carries the signal.
    pub planted_parameter: usize,
    /// Added to the planted parameter over `signal_window` for positives.
    pub shift: f64,
    /// Half-open timestep range of the shift.
    pub signal_window: (usize, usize),
    pub positive_fraction: f64,
    pub n_partitions: usize,
    pub seed: u64,
}

impl Default for PlantedSignal {
    fn default() -> Self {
        Self {
            n_instances: 500,
            n_parameters: 10,
            timesteps: 60,
            planted_parameter: 3,
            shift: 3.0,
            signal_window: (24, 36),
            positive_fraction: 0.2,
            n_partitions: 5,
            seed: 7,
        }
    }
}

impl PlantedSignal {
    pub fn parameter_names(&self) -> Vec<String> {
        (0..self.n_parameters)
            .map(|i| match SWAN_SF_PARAMETERS.get(i) {
                Some(name) => name.to_string(),
                None => format!("PARAM{i:02}"),
            })
            .collect()
    }

    pub fn planted_parameter_name(&self) -> String {
        self.parameter_names()[self.planted_parameter].clone()
    }

    fn check(&self) -> Result<()> {
        let (lo, hi) = self.signal_window;
        if self.n_parameters == 0 || self.planted_parameter >= self.n_parameters {
            return Err(Error::Argument("planted parameter out of range".into()));
        }
        if self.timesteps < 2 || lo >= hi {
            return Err(Error::Argument("need T >= 2 and a nonempty signal window".into()));
        }
        if self.n_partitions == 0 || self.n_instances < self.n_partitions {
            return Err(Error::Argument("need at least one instance per partition".into()));
        }
        if !(0.0..=1.0).contains(&self.positive_fraction) {
            return Err(Error::Argument("positive fraction outside [0, 1]".into()));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Dataset> {
        self.check()?;
        let (lo, hi) = self.signal_window;
        let hi = hi.min(self.timesteps);
        let lo = lo.min(hi);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let names = self.parameter_names();
        let epoch: DateTime<Utc> = Utc.with_ymd_and_hms(2010, 5, 1, 0, 0, 0).unwrap();
        let cadence = Duration::seconds(12 * 3600 / self.timesteps as i64);

        let mut instances = Vec::with_capacity(self.n_instances);
        for part in 0..self.n_partitions {
            let size = self.n_instances / self.n_partitions
                + usize::from(part < self.n_instances % self.n_partitions);
            let n_pos = (self.positive_fraction * size as f64).round() as usize;
            let mut flags: Vec<bool> = (0..size).map(|j| j < n_pos).collect();
            flags.shuffle(&mut rng);
            let part_start = epoch + Duration::days(400 * part as i64);

            for (j, &positive) in flags.iter().enumerate() {
                let mut values = vec![vec![0.0; self.timesteps]; self.n_parameters];
                for row in values.iter_mut() {
                    for v in row.iter_mut() {
                        *v = rng.sample::<f64, _>(StandardNormal);
                    }
                }
                if positive {
                    values[self.planted_parameter][lo..hi]
                        .iter_mut()
                        .for_each(|v| *v += self.shift);
                }
                let raw_label = random_label(&mut rng, positive);
                let start_ts = part_start + Duration::hours(j as i64);
                instances.push(TimeSeriesInstance {
                    instance_id: format!("P{}-{:05}", part + 1, j),
                    ar_number: Some(11000 + (j % 97) as i64),
                    partition_id: format!("P{}", part + 1),
                    start_ts,
                    end_ts: start_ts + Duration::hours(12),
                    timestamps: (0..self.timesteps)
                        .map(|t| start_ts + cadence * t as i32)
                        .collect(),
                    parameter_names: names.clone(),
                    values,
                    label: binarize_label(&raw_label),
                    raw_label,
                });
            }
        }
        Dataset::new(names, instances)
    }
}

fn random_label(rng: &mut ChaCha8Rng, positive: bool) -> FlareLabel {
    let magnitude = (rng.random_range(10..100) as f64) / 10.0;
    let class = if positive {
        [FlareClass::M, FlareClass::M, FlareClass::X][rng.random_range(0..3)]
    } else {
        [FlareClass::C, FlareClass::B, FlareClass::FQ][rng.random_range(0..3)]
    };
    let magnitude = (class != FlareClass::FQ).then_some(magnitude);
    FlareLabel::new(class, magnitude).expect("valid synthetic label")
}
