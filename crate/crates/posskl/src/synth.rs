//! Synthetic dataset generator: Gaussian class prototypes, noisy inputs, and
//! distance-ranked possibility annotations.
//!
//! Randomness is drawn from named ChaCha8 streams of a single seed, so the
//! prototypes and labeled inputs are bitwise identical across runs that only
//! change the plausibility level: the level touches nothing but how the
//! per-record perturbation stream is consumed.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::antipignistic::PossVec;
use crate::error::{Error, Result};

/// Stream assignment of the dataset seed.
const STREAM_PROTOTYPES: u64 = 0;
const STREAM_TRAIN_DRAWS: u64 = 1;
const STREAM_TEST_DRAWS: u64 = 2;
const STREAM_TRAIN_LEVEL: u64 = 3;
const STREAM_TEST_LEVEL: u64 = 4;

/// Identification string written into dataset headers so regeneration is
/// auditable.
pub const GENERATOR_ID: &str = "chacha8(seed_from_u64); streams 0=prototypes 1=train-label-noise \
     2=test-label-noise 3=train-level 4=test-level; normal=rand_distr::StandardNormal (ziggurat); \
     labels=uniform integers; draw order per record: label, input noise, level noise";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Number of classes.
    pub n_classes: usize,
    /// Input dimension.
    pub dim: usize,
    /// Prototype scale.
    pub beta: f64,
    /// Input noise level.
    pub noise: f64,
    /// Base plausibility level assigned to non-label classes.
    pub alpha: f64,
    /// Noise on the per-sample plausibility level.
    pub alpha_noise: f64,
    /// Step by which the plausibility decreases along the distance ranking.
    pub delta_pi: f64,
    /// Lower possibility floor.
    pub rho_pi: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_classes: 20,
            dim: 30,
            beta: 1.5,
            noise: 2.0,
            alpha: 0.95,
            alpha_noise: 0.15,
            delta_pi: 0.01,
            rho_pi: 1e-6,
            n_train: 200,
            n_test: 3000,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 || self.dim == 0 || self.n_train == 0 || self.n_test == 0 {
            return Err(Error::InvalidParameter(
                "class count, dimension and set sizes must be positive".into(),
            ));
        }
        if !(self.beta > 0.0
            && self.noise >= 0.0
            && self.alpha_noise >= 0.0
            && self.delta_pi >= 0.0)
        {
            return Err(Error::InvalidParameter(
                "scales must be nonnegative and beta positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter("alpha must lie in [0, 1]".into()));
        }
        if !(self.rho_pi > 0.0 && self.rho_pi < 0.5) {
            return Err(Error::InvalidParameter(
                "rho_pi must lie in (0, 0.5)".into(),
            ));
        }
        Ok(())
    }
}

/// One supervised item: input, evaluation-only label, possibility annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub x: Vec<f64>,
    /// 0-based class label, used only for evaluation.
    pub label: usize,
    pub pi: PossVec,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normals(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    (0..count).map(|_| rng.sample(StandardNormal)).collect()
}

/// Possibility annotation of one labeled input.
///
/// Ranks the non-label classes by squared distance to their prototypes (ties
/// by index order), perturbs the base level by `alpha_noise * eta`, and walks
/// the level down by `delta_pi` per rank, floored at `rho_pi` and capped at
/// `1 - rho_pi`. The label itself gets possibility 1.
pub fn annotate(
    x: &[f64],
    label: usize,
    prototypes: &[Vec<f64>],
    config: &SynthConfig,
    eta: f64,
) -> Result<PossVec> {
    let n = config.n_classes;
    if label >= n || prototypes.len() != n {
        return Err(Error::InvalidParameter(
            "label or prototypes mismatch".into(),
        ));
    }
    let sq_dist = |j: usize| -> f64 {
        x.iter()
            .zip(&prototypes[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };
    let mut others: Vec<usize> = (0..n).filter(|&j| j != label).collect();
    let dists: Vec<f64> = (0..n).map(sq_dist).collect();
    others.sort_by(|&a, &b| {
        dists[a]
            .partial_cmp(&dists[b])
            .expect("finite")
            .then(a.cmp(&b))
    });

    let level = (config.alpha + config.alpha_noise * eta)
        .max(0.0)
        .min(1.0 - config.rho_pi);
    let mut pi = vec![0.0; n];
    pi[label] = 1.0;
    for (rank, &j) in others.iter().enumerate() {
        let stepped = (level - rank as f64 * config.delta_pi).max(0.0);
        pi[j] = (config.rho_pi + stepped).min(1.0 - config.rho_pi);
    }
    PossVec::new(pi)
}

fn draw_split(
    config: &SynthConfig,
    prototypes: &[Vec<f64>],
    count: usize,
    draw_stream: u64,
    level_stream: u64,
) -> Result<Vec<DatasetRecord>> {
    let mut draws = stream_rng(config.seed, draw_stream);
    let mut levels = stream_rng(config.seed, level_stream);
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let label = draws.random_range(0..config.n_classes);
        let nu = normals(&mut draws, config.dim);
        let x: Vec<f64> = prototypes[label]
            .iter()
            .zip(&nu)
            .map(|(m, v)| m + config.noise * v)
            .collect();
        let eta: f64 = levels.sample(StandardNormal);
        let pi = annotate(&x, label, prototypes, config, eta)?;
        records.push(DatasetRecord { x, label, pi });
    }
    Ok(records)
}

/// Train split, test split, and the class prototypes.
pub type GeneratedData = (Vec<DatasetRecord>, Vec<DatasetRecord>, Vec<Vec<f64>>);

/// Generate prototypes plus independent train and test splits, fully
/// determined by the config seed.
pub fn generate(config: &SynthConfig) -> Result<GeneratedData> {
    config.validate()?;
    let mut proto_rng = stream_rng(config.seed, STREAM_PROTOTYPES);
    let prototypes: Vec<Vec<f64>> = (0..config.n_classes)
        .map(|_| {
            normals(&mut proto_rng, config.dim)
                .into_iter()
                .map(|z| config.beta * z)
                .collect()
        })
        .collect();
    let train = draw_split(
        config,
        &prototypes,
        config.n_train,
        STREAM_TRAIN_DRAWS,
        STREAM_TRAIN_LEVEL,
    )?;
    let test = draw_split(
        config,
        &prototypes,
        config.n_test,
        STREAM_TEST_DRAWS,
        STREAM_TEST_LEVEL,
    )?;
    Ok((train, test, prototypes))
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    meta: Meta,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    config: SynthConfig,
    generator: String,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    x: Vec<f64>,
    /// 1-based on disk.
    c: usize,
    pi: Vec<f64>,
}

/// Write one dataset as JSONL: a `{"meta": ...}` header line, then one
/// record per line with a 1-based class index.
pub fn write_dataset<W: Write>(
    mut w: W,
    config: &SynthConfig,
    records: &[DatasetRecord],
) -> Result<()> {
    let header = HeaderLine {
        meta: Meta {
            config: config.clone(),
            generator: GENERATOR_ID.to_string(),
        },
    };
    let io_err = |e: std::io::Error| Error::MalformedData(e.to_string());
    writeln!(
        w,
        "{}",
        serde_json::to_string(&header).expect("serializable")
    )
    .map_err(io_err)?;
    for r in records {
        let line = RecordLine {
            x: r.x.clone(),
            c: r.label + 1,
            pi: r.pi.as_slice().to_vec(),
        };
        writeln!(w, "{}", serde_json::to_string(&line).expect("serializable")).map_err(io_err)?;
    }
    Ok(())
}

/// Read a JSONL dataset written by [`write_dataset`].
pub fn read_dataset<R: BufRead>(r: R) -> Result<(SynthConfig, Vec<DatasetRecord>)> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::MalformedData("empty dataset file".into()))?
        .map_err(|e| Error::MalformedData(e.to_string()))?;
    let header: HeaderLine = serde_json::from_str(&header)
        .map_err(|e| Error::MalformedData(format!("bad header line: {e}")))?;
    let mut records = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::MalformedData(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordLine = serde_json::from_str(&line)
            .map_err(|e| Error::MalformedData(format!("bad record line: {e}")))?;
        if rec.c == 0 || rec.c > header.meta.config.n_classes {
            return Err(Error::MalformedData(format!(
                "class index {} out of range",
                rec.c
            )));
        }
        records.push(DatasetRecord {
            x: rec.x,
            label: rec.c - 1,
            pi: PossVec::new(rec.pi)?,
        });
    }
    Ok((header.meta.config, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SynthConfig {
        SynthConfig {
            n_classes: 5,
            dim: 4,
            beta: 1.5,
            noise: 2.0,
            alpha: 0.4,
            alpha_noise: 0.15,
            delta_pi: 0.01,
            rho_pi: 1e-6,
            n_train: 50,
            n_test: 80,
            seed: 42,
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let config = small_config();
        let (tr1, te1, pr1) = generate(&config).unwrap();
        let (tr2, te2, pr2) = generate(&config).unwrap();
        assert_eq!(tr1, tr2);
        assert_eq!(te1, te2);
        assert_eq!(pr1, pr2);
    }

    #[test]
    fn zero_noise_reproduces_prototypes() {
        let config = SynthConfig {
            noise: 0.0,
            ..small_config()
        };
        let (train, _, prototypes) = generate(&config).unwrap();
        for r in &train {
            for (a, b) in r.x.iter().zip(&prototypes[r.label]) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn inputs_and_labels_are_invariant_to_the_plausibility_level() {
        let base = small_config();
        let other = SynthConfig {
            alpha: 0.95,
            ..base.clone()
        };
        let (tr_a, te_a, pr_a) = generate(&base).unwrap();
        let (tr_b, te_b, pr_b) = generate(&other).unwrap();
        assert_eq!(pr_a, pr_b);
        for (a, b) in tr_a.iter().zip(&tr_b).chain(te_a.iter().zip(&te_b)) {
            assert_eq!(a.x, b.x);
            assert_eq!(a.label, b.label);
        }
    }

    #[test]
    fn annotations_satisfy_the_bounds_and_monotonicity() {
        let config = small_config();
        let (train, test, prototypes) = generate(&config).unwrap();
        for r in train.iter().chain(&test) {
            let pi = r.pi.as_slice();
            assert_eq!(pi[r.label], 1.0);
            for (j, &v) in pi.iter().enumerate() {
                if j != r.label {
                    assert!(v >= config.rho_pi && v <= 1.0 - config.rho_pi);
                }
            }
            // non-increasing along the distance ranking
            let dists: Vec<f64> = (0..config.n_classes)
                .map(|j| {
                    r.x.iter()
                        .zip(&prototypes[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum()
                })
                .collect();
            let mut others: Vec<usize> = (0..config.n_classes).filter(|&j| j != r.label).collect();
            others.sort_by(|&a, &b| dists[a].partial_cmp(&dists[b]).unwrap().then(a.cmp(&b)));
            for w in others.windows(2) {
                assert!(pi[w[0]] >= pi[w[1]]);
            }
        }
    }

    #[test]
    fn annotate_with_zero_level_floors_everything() {
        let config = SynthConfig {
            alpha: 0.0,
            alpha_noise: 0.0,
            ..small_config()
        };
        let prototypes = vec![vec![0.0; config.dim]; config.n_classes];
        let pi = annotate(&vec![0.0; config.dim], 2, &prototypes, &config, 0.0).unwrap();
        for (j, &v) in pi.as_slice().iter().enumerate() {
            if j == 2 {
                assert_eq!(v, 1.0);
            } else {
                assert_eq!(v, config.rho_pi);
            }
        }
    }

    #[test]
    fn annotate_steps_down_by_delta() {
        let config = SynthConfig {
            alpha: 0.4,
            alpha_noise: 0.0,
            delta_pi: 0.01,
            ..small_config()
        };
        // place prototypes so the ranking of classes != 0 is 1, 2, 3, 4
        let prototypes: Vec<Vec<f64>> = (0..config.n_classes)
            .map(|j| vec![j as f64; config.dim])
            .collect();
        let pi = annotate(&vec![0.0; config.dim], 0, &prototypes, &config, 0.0).unwrap();
        let rho = config.rho_pi;
        let expected = [1.0, rho + 0.4, rho + 0.39, rho + 0.38, rho + 0.37];
        for (a, b) in pi.as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn label_frequencies_are_roughly_uniform() {
        let config = SynthConfig {
            n_train: 4000,
            n_test: 1,
            ..small_config()
        };
        let (train, _, _) = generate(&config).unwrap();
        let n = config.n_classes as f64;
        let mut counts = vec![0usize; config.n_classes];
        for r in &train {
            counts[r.label] += 1;
        }
        let expected = config.n_train as f64 / n;
        let sigma = (config.n_train as f64 * (1.0 / n) * (1.0 - 1.0 / n)).sqrt();
        for &c in &counts {
            assert!((c as f64 - expected).abs() < 3.0 * sigma, "count {c}");
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let config = small_config();
        let (train, _, _) = generate(&config).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &config, &train).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().contains("\"meta\""));
        let (config2, records) = read_dataset(&buf[..]).unwrap();
        assert_eq!(config, config2);
        assert_eq!(train, records);
    }
}
