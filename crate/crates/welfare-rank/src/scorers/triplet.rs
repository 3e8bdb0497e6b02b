//! Margin-based training of the block-bilinear scorer.
//!
//! Each observed match provides one positive; negatives are subsampled
//! uniformly from the vacancy pool. A triplet contributes
//! `max(0, margin - score(pos) + score(neg))`, so the trained scorer
//! separates realized matches from the pool by at least the margin where
//! it can.

use crate::error::{Error, Result};
use crate::scorers::bilinear::{bilinear_score, BilinearScorer, Block, FeatureMap, TripletHyper};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shape of one block of the scorer to be trained.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BlockSpec {
    pub seeker_dim: usize,
    pub vacancy_dim: usize,
    pub embed_dim: usize,
    /// Width of the optional hidden tanh layer on both side maps.
    pub hidden: Option<usize>,
}

impl BlockSpec {
    fn validate(&self) -> Result<()> {
        if self.seeker_dim == 0 || self.vacancy_dim == 0 || self.embed_dim == 0 {
            return Err(Error::config(format!("block dimensions must be >= 1, got {self:?}")));
        }
        if self.hidden == Some(0) {
            return Err(Error::config("hidden width must be >= 1 when present"));
        }
        Ok(())
    }
}

/// One observed match: the seeker's features and the features of the
/// vacancy where the hire happened.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchPair {
    pub seeker: Vec<f64>,
    pub positive: Vec<f64>,
}

fn init_map(rng: &mut ChaCha8Rng, din: usize, dout: usize, hidden: Option<usize>) -> FeatureMap {
    let scale = |fan_in: usize| 1.0 / (fan_in as f64).sqrt();
    match hidden {
        None => {
            let a = scale(din);
            FeatureMap::Affine {
                weight: DMatrix::from_fn(dout, din, |_, _| rng.gen_range(-a..a)),
                bias: DVector::zeros(dout),
            }
        }
        Some(h) => {
            let a1 = scale(din);
            let a2 = scale(h);
            FeatureMap::OneHidden {
                w1: DMatrix::from_fn(h, din, |_, _| rng.gen_range(-a1..a1)),
                b1: DVector::zeros(h),
                w2: DMatrix::from_fn(dout, h, |_, _| rng.gen_range(-a2..a2)),
                b2: DVector::zeros(dout),
            }
        }
    }
}

fn init_scorer(
    specs: &[BlockSpec],
    hyper: TripletHyper,
    rng: &mut ChaCha8Rng,
) -> Result<BilinearScorer> {
    if specs.is_empty() {
        return Err(Error::config("scorer needs at least one block spec"));
    }
    let mut blocks = Vec::with_capacity(specs.len());
    for spec in specs {
        spec.validate()?;
        let seeker_map = init_map(rng, spec.seeker_dim, spec.embed_dim, spec.hidden);
        let vacancy_map = init_map(rng, spec.vacancy_dim, spec.embed_dim, spec.hidden);
        let a = 1.0 / (spec.embed_dim as f64).sqrt();
        let affinity = DMatrix::from_fn(spec.embed_dim, spec.embed_dim, |_, _| rng.gen_range(-a..a));
        blocks.push(Block::new(seeker_map, vacancy_map, affinity)?);
    }
    BilinearScorer::new(blocks, hyper)
}

fn zero_map_like(map: &FeatureMap) -> FeatureMap {
    match map {
        FeatureMap::Affine { weight, bias } => FeatureMap::Affine {
            weight: DMatrix::zeros(weight.nrows(), weight.ncols()),
            bias: DVector::zeros(bias.len()),
        },
        FeatureMap::OneHidden { w1, b1, w2, b2 } => FeatureMap::OneHidden {
            w1: DMatrix::zeros(w1.nrows(), w1.ncols()),
            b1: DVector::zeros(b1.len()),
            w2: DMatrix::zeros(w2.nrows(), w2.ncols()),
            b2: DVector::zeros(b2.len()),
        },
    }
}

fn zeros_like(scorer: &BilinearScorer) -> Vec<Block> {
    scorer
        .blocks
        .iter()
        .map(|b| Block {
            seeker_map: zero_map_like(&b.seeker_map),
            vacancy_map: zero_map_like(&b.vacancy_map),
            affinity: DMatrix::zeros(b.affinity.nrows(), b.affinity.ncols()),
        })
        .collect()
}

fn mat_axpy(target: &mut DMatrix<f64>, alpha: f64, source: &DMatrix<f64>) {
    target.zip_apply(source, |t, s| *t += alpha * s);
}

fn map_axpy(target: &mut FeatureMap, alpha: f64, source: &FeatureMap) {
    match (target, source) {
        (
            FeatureMap::Affine { weight, bias },
            FeatureMap::Affine { weight: gw, bias: gb },
        ) => {
            mat_axpy(weight, alpha, gw);
            bias.axpy(alpha, gb, 1.0);
        }
        (
            FeatureMap::OneHidden { w1, b1, w2, b2 },
            FeatureMap::OneHidden { w1: g1, b1: gb1, w2: g2, b2: gb2 },
        ) => {
            mat_axpy(w1, alpha, g1);
            b1.axpy(alpha, gb1, 1.0);
            mat_axpy(w2, alpha, g2);
            b2.axpy(alpha, gb2, 1.0);
        }
        // Gradients are built with zeros_like, so shapes always agree.
        _ => unreachable!("gradient and parameter maps have different kinds"),
    }
}

fn scorer_axpy(scorer: &mut BilinearScorer, alpha: f64, grads: &[Block]) {
    for (block, grad) in scorer.blocks.iter_mut().zip(grads) {
        map_axpy(&mut block.seeker_map, alpha, &grad.seeker_map);
        map_axpy(&mut block.vacancy_map, alpha, &grad.vacancy_map);
        mat_axpy(&mut block.affinity, alpha, &grad.affinity);
    }
}

/// Adds `factor` times the gradient of the map's output (contracted with
/// `upstream`) to `grad`; returns nothing extra because the inputs are
/// data, not parameters.
fn accumulate_map_grad(
    map: &FeatureMap,
    grad: &mut FeatureMap,
    input: &DVector<f64>,
    upstream: &DVector<f64>,
    factor: f64,
) {
    match (map, grad) {
        (FeatureMap::Affine { .. }, FeatureMap::Affine { weight: gw, bias: gb }) => {
            gw.gemm(factor, upstream, &input.transpose(), 1.0);
            gb.axpy(factor, upstream, 1.0);
        }
        (
            FeatureMap::OneHidden { w1, b1, w2, .. },
            FeatureMap::OneHidden { w1: g1, b1: gb1, w2: g2, b2: gb2 },
        ) => {
            let hidden = (w1 * input + b1).map(f64::tanh);
            g2.gemm(factor, upstream, &hidden.transpose(), 1.0);
            gb2.axpy(factor, upstream, 1.0);
            let mut g_hidden = w2.transpose() * upstream;
            for (g, h) in g_hidden.iter_mut().zip(hidden.iter()) {
                *g *= 1.0 - h * h;
            }
            g1.gemm(factor, &g_hidden, &input.transpose(), 1.0);
            gb1.axpy(factor, &g_hidden, 1.0);
        }
        _ => unreachable!("gradient and parameter maps have different kinds"),
    }
}

/// Adds `factor * d score(seeker, vacancy) / d theta` to `grads`.
fn accumulate_score_grad(
    scorer: &BilinearScorer,
    seeker: &[f64],
    vacancy: &[f64],
    factor: f64,
    grads: &mut [Block],
) -> Result<()> {
    let s_blocks = scorer.split(seeker, |b| &b.seeker_map, "seeker")?;
    let v_blocks = scorer.split(vacancy, |b| &b.vacancy_map, "vacancy")?;
    for ((block, grad), (s, v)) in scorer
        .blocks
        .iter()
        .zip(grads.iter_mut())
        .zip(s_blocks.into_iter().zip(v_blocks))
    {
        let x = DVector::from_column_slice(s);
        let y = DVector::from_column_slice(v);
        let phi = block.seeker_map.apply(&x);
        let psi = block.vacancy_map.apply(&y);
        grad.affinity.gemm(factor, &phi, &psi.transpose(), 1.0);
        let g_phi = &block.affinity * &psi;
        let g_psi = block.affinity.transpose() * &phi;
        accumulate_map_grad(&block.seeker_map, &mut grad.seeker_map, &x, &g_phi, factor);
        accumulate_map_grad(&block.vacancy_map, &mut grad.vacancy_map, &y, &g_psi, factor);
    }
    Ok(())
}

/// Summed hinge loss and its gradient over explicit triplets.
fn triplet_loss_and_grad(
    scorer: &BilinearScorer,
    triplets: &[(&[f64], &[f64], &[f64])],
) -> Result<(f64, Vec<Block>)> {
    let margin = scorer.hyper.margin;
    let mut loss = 0.0;
    let mut grads = zeros_like(scorer);
    for &(seeker, positive, negative) in triplets {
        let s_pos = bilinear_score(seeker, positive, scorer)?;
        let s_neg = bilinear_score(seeker, negative, scorer)?;
        let hinge = margin - s_pos + s_neg;
        if hinge > 0.0 {
            loss += hinge;
            accumulate_score_grad(scorer, seeker, positive, -1.0, &mut grads)?;
            accumulate_score_grad(scorer, seeker, negative, 1.0, &mut grads)?;
        }
    }
    Ok((loss, grads))
}

fn sample_negatives<'a>(
    pool: &'a [Vec<f64>],
    positive: &[f64],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<&'a [f64]> {
    let take = count.min(pool.len());
    rand::seq::index::sample(rng, pool.len(), take)
        .into_iter()
        .map(|i| pool[i].as_slice())
        .filter(|cand| *cand != positive)
        .collect()
}

fn mean_epoch_loss(
    scorer: &BilinearScorer,
    matches: &[MatchPair],
    pool: &[Vec<f64>],
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for pair in matches {
        for negative in sample_negatives(pool, &pair.positive, scorer.hyper.negatives, rng) {
            let s_pos = bilinear_score(&pair.seeker, &pair.positive, scorer)?;
            let s_neg = bilinear_score(&pair.seeker, negative, scorer)?;
            total += (scorer.hyper.margin - s_pos + s_neg).max(0.0);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::schema("no usable triplets: pool offers no negatives"));
    }
    Ok(total / count as f64)
}

/// Continues training an existing scorer on the given matches. Each epoch
/// shuffles the matches, resamples negatives uniformly without
/// replacement, and takes one averaged subgradient step per mini-batch.
/// Records the mean triplet loss of a final full pass.
pub fn train_triplet_from(
    mut scorer: BilinearScorer,
    matches: &[MatchPair],
    pool: &[Vec<f64>],
    rng: &mut ChaCha8Rng,
) -> Result<BilinearScorer> {
    if matches.is_empty() {
        return Err(Error::schema("triplet training needs at least one match"));
    }
    if pool.is_empty() {
        return Err(Error::schema("triplet training needs a nonempty vacancy pool"));
    }
    let hyper = scorer.hyper;
    let mut order: Vec<usize> = (0..matches.len()).collect();
    for _ in 0..hyper.epochs {
        order.shuffle(rng);
        for batch in order.chunks(hyper.batch_size) {
            let mut owned: Vec<(usize, Vec<&[f64]>)> = Vec::with_capacity(batch.len());
            for &i in batch {
                let negatives =
                    sample_negatives(pool, &matches[i].positive, hyper.negatives, rng);
                owned.push((i, negatives));
            }
            let triplets: Vec<(&[f64], &[f64], &[f64])> = owned
                .iter()
                .flat_map(|(i, negatives)| {
                    let pair = &matches[*i];
                    negatives
                        .iter()
                        .map(move |neg| (pair.seeker.as_slice(), pair.positive.as_slice(), *neg))
                })
                .collect();
            if triplets.is_empty() {
                continue;
            }
            let (_, grads) = triplet_loss_and_grad(&scorer, &triplets)?;
            scorer_axpy(&mut scorer, -hyper.learning_rate / triplets.len() as f64, &grads);
        }
    }
    scorer.final_loss = Some(mean_epoch_loss(&scorer, matches, pool, rng)?);
    Ok(scorer)
}

/// Trains a fresh scorer of the given shape. Initialization, shuffling,
/// and negative sampling all derive from the hyperparameter seed, so the
/// result is a deterministic function of its inputs.
pub fn train_triplet(
    matches: &[MatchPair],
    pool: &[Vec<f64>],
    specs: &[BlockSpec],
    hyper: TripletHyper,
) -> Result<BilinearScorer> {
    hyper.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let scorer = init_scorer(specs, hyper, &mut rng)?;
    train_triplet_from(scorer, matches, pool, &mut rng)
}
