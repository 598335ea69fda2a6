//! Seeded generators for the two simulated two-class curve designs and the
//! train/test and labeled/unlabeled partition protocol.
//!
//! Every random draw flows from `SimConfig::seed` through explicitly seeded
//! ChaCha streams, so a dataset is a pure function of its configuration.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smoother::RawCurve;

pub const N_CLASSES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseKind {
    /// Scaled sines `u sin(c t π)` on 50 points in `[0, 2]`.
    Case1,
    /// Mixtures of a triangle and a shifted triangle on 101 points in `[1, 21]`.
    Case2,
}

impl CaseKind {
    pub fn from_number(n: u32) -> Result<Self> {
        match n {
            1 => Ok(CaseKind::Case1),
            2 => Ok(CaseKind::Case2),
            _ => Err(Error::invalid(format!("unknown case {n}; expected 1 or 2"))),
        }
    }

    pub fn number(self) -> u32 {
        match self {
            CaseKind::Case1 => 1,
            CaseKind::Case2 => 2,
        }
    }

    pub fn default_noise_variance(self) -> f64 {
        match self {
            CaseKind::Case1 => 0.1,
            CaseKind::Case2 => 1.0,
        }
    }

    pub fn times(self) -> Vec<f64> {
        match self {
            CaseKind::Case1 => (1..=50).map(|i| (2 * i - 2) as f64 / 49.0).collect(),
            CaseKind::Case2 => (1..=101).map(|i| (i + 4) as f64 / 5.0).collect(),
        }
    }

    /// Range of the per-curve random weight `u` for a 1-based class.
    fn weight_range(self, class: usize) -> (f64, f64) {
        match (self, class) {
            (CaseKind::Case1, 1) => (0.3, 1.3),
            (CaseKind::Case1, _) => (0.1, 0.6),
            (CaseKind::Case2, _) => (0.0, 1.0),
        }
    }

    /// Noise-free curve value for a 1-based class at weight `u`.
    pub fn signal(self, class: usize, u: f64, t: f64) -> f64 {
        match self {
            CaseKind::Case1 => {
                let c = if class == 1 { 1.0 } else { 1.02 };
                (c * t * PI).sin() * u
            }
            CaseKind::Case2 => {
                let w = triangle(t);
                let v = if class == 1 { w - 4.0 } else { w + 4.0 };
                u * w + (1.0 - u) * v
            }
        }
    }
}

/// `max(6 − |t − 11|, 0)`.
pub fn triangle(t: f64) -> f64 {
    (6.0 - (t - 11.0).abs()).max(0.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub case: CaseKind,
    /// Total curves, split evenly between the two classes.
    pub n: usize,
    pub seed: u64,
    pub label_fraction: f64,
    pub train_size: usize,
    pub noise_variance: f64,
}

impl SimConfig {
    pub fn new(case: CaseKind, seed: u64) -> Self {
        Self {
            case,
            n: 600,
            seed,
            label_fraction: 1.0,
            train_size: 300,
            noise_variance: case.default_noise_variance(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n % N_CLASSES != 0 {
            return Err(Error::invalid(format!("n must be a positive multiple of 2, got {}", self.n)));
        }
        if self.train_size > self.n || self.train_size % N_CLASSES != 0 || self.train_size == 0 {
            return Err(Error::invalid(format!(
                "train size must be even and at most n = {}, got {}",
                self.n, self.train_size
            )));
        }
        if self.train_size == self.n {
            return Err(Error::invalid("train size must leave curves for testing"));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::invalid(format!("noise variance must be >= 0, got {}", self.noise_variance)));
        }
        Ok(())
    }
}

/// Disjoint index sets into the dataset's curves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train_labeled: Vec<usize>,
    pub train_unlabeled: Vec<usize>,
    pub test: Vec<usize>,
}

impl Partition {
    pub fn train(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.train_labeled.iter().chain(&self.train_unlabeled).copied().collect();
        t.sort_unstable();
        t
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub config: SimConfig,
    pub curves: Vec<RawCurve>,
    /// 1-based true classes; hidden from fitting for unlabeled and test curves.
    pub true_labels: Vec<usize>,
    /// The per-curve weight `u` drawn for each curve.
    pub weights: Vec<f64>,
    pub partition: Partition,
}

impl SimulatedDataset {
    /// Labels as seen by the fitting code: train-labeled curves only.
    pub fn visible_labels(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.curves.len()];
        for &i in &self.partition.train_labeled {
            out[i] = Some(self.true_labels[i]);
        }
        out
    }
}

/// SplitMix64 finalizer applied to `base + index`; used to derive the
/// seed of repetition `index` and of the independent streams within one.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_CURVES: u64 = 1;
const STREAM_SPLIT: u64 = 2;
const STREAM_LABELS: u64 = 3;

/// Draws the curves: the first `n/2` belong to class 1, the rest to class 2.
fn draw_curves(config: &SimConfig) -> (Vec<RawCurve>, Vec<usize>, Vec<f64>) {
    let times = config.case.times();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, STREAM_CURVES));
    let noise = Normal::new(0.0, config.noise_variance.sqrt()).expect("finite non-negative sd");
    let per_class = config.n / N_CLASSES;
    let mut curves = Vec::with_capacity(config.n);
    let mut labels = Vec::with_capacity(config.n);
    let mut weights = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let class = i / per_class + 1;
        let (lo, hi) = config.case.weight_range(class);
        let u = Uniform::new_inclusive(lo, hi).expect("valid range").sample(&mut rng);
        let values = times
            .iter()
            .map(|&t| config.case.signal(class, u, t) + noise.sample(&mut rng))
            .collect();
        curves.push(RawCurve::new(format!("c{:04}", i + 1), times.clone(), values));
        labels.push(class);
        weights.push(u);
    }
    (curves, labels, weights)
}

/// Generates a dataset and its partition for `config.label_fraction`.
pub fn generate(config: &SimConfig) -> Result<SimulatedDataset> {
    config.validate()?;
    let (curves, true_labels, weights) = draw_curves(config);
    let (train, test) = split_train_test(&true_labels, config.train_size, config.seed)?;
    let (train_labeled, train_unlabeled) =
        choose_labeled(&train, &true_labels, config.label_fraction, config.seed)?;
    Ok(SimulatedDataset {
        config: config.clone(),
        curves,
        true_labels,
        weights,
        partition: Partition {
            train_labeled,
            train_unlabeled,
            test,
        },
    })
}

pub fn generate_case1(config: &SimConfig) -> Result<SimulatedDataset> {
    if config.case != CaseKind::Case1 {
        return Err(Error::invalid("generate_case1 called with a Case 2 configuration"));
    }
    generate(config)
}

pub fn generate_case2(config: &SimConfig) -> Result<SimulatedDataset> {
    if config.case != CaseKind::Case2 {
        return Err(Error::invalid("generate_case2 called with a Case 1 configuration"));
    }
    generate(config)
}

/// Re-partitions an existing dataset at another label fraction. The
/// train/test split depends only on the seed, and for a fixed seed the
/// labeled sets are nested as the fraction grows.
pub fn partition(dataset: &SimulatedDataset, label_fraction: f64, seed: u64) -> Result<SimulatedDataset> {
    let (train, test) = split_train_test(&dataset.true_labels, dataset.config.train_size, seed)?;
    let (train_labeled, train_unlabeled) = choose_labeled(&train, &dataset.true_labels, label_fraction, seed)?;
    let mut out = dataset.clone();
    out.config.label_fraction = label_fraction;
    out.config.seed = seed;
    out.partition = Partition {
        train_labeled,
        train_unlabeled,
        test,
    };
    Ok(out)
}

/// Class-balanced split: `train_size / L` curves of each class go to
/// training. Both halves come back sorted.
pub fn split_train_test(labels: &[usize], train_size: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_classes = labels.iter().copied().max().unwrap_or(0);
    if n_classes == 0 || train_size % n_classes != 0 {
        return Err(Error::invalid(format!(
            "train size {train_size} cannot be split evenly over {n_classes} classes"
        )));
    }
    let per_class = train_size / n_classes;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, STREAM_SPLIT));
    let mut train = Vec::with_capacity(train_size);
    let mut test = Vec::new();
    for class in 1..=n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() <= per_class {
            return Err(Error::invalid(format!(
                "class {class} has {} curves, need more than {per_class}",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..per_class]);
        test.extend_from_slice(&members[per_class..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// `⌈fraction · |train|⌉`, guarding against round-off pushing an exact
/// product over an integer.
pub fn labeled_count(fraction: f64, train_size: usize) -> usize {
    let raw = fraction * train_size as f64;
    (raw - 1e-9 * raw.max(1.0)).ceil().max(0.0) as usize
}

/// Picks the labeled subset of `train`: one random curve of every class,
/// then uniformly without replacement from the rest. Returns sorted
/// (labeled, unlabeled).
pub fn choose_labeled(
    train: &[usize],
    labels: &[usize],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("label fraction must be in (0, 1], got {fraction}")));
    }
    let mut classes: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    classes.sort_unstable();
    classes.dedup();
    let k = labeled_count(fraction, train.len());
    if k < classes.len() {
        return Err(Error::invalid(format!(
            "fraction {fraction} labels {k} of {} curves, fewer than the {} classes",
            train.len(),
            classes.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, STREAM_LABELS));
    let mut order = train.to_vec();
    order.shuffle(&mut rng);
    let mut forced = Vec::with_capacity(classes.len());
    for &c in &classes {
        let pos = order.iter().position(|&i| labels[i] == c).expect("class present in train");
        forced.push(order[pos]);
    }
    let mut labeled = forced.clone();
    labeled.extend(order.iter().filter(|i| !forced.contains(i)).take(k - forced.len()));
    labeled.sort_unstable();
    let unlabeled: Vec<usize> = {
        let mut u: Vec<usize> = train.iter().copied().filter(|i| labeled.binary_search(i).is_err()).collect();
        u.sort_unstable();
        u
    };
    Ok((labeled, unlabeled))
}

/// Draws `count` weights for a class, for distribution checks.
pub fn sample_weights(case: CaseKind, class: usize, count: usize, seed: u64) -> Vec<f64> {
    let (lo, hi) = case.weight_range(class);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random_range(lo..=hi)).collect()
}
