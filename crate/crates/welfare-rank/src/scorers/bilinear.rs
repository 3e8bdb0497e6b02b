//! Block-bilinear similarity scorer and its on-disk formats.
//!
//! A seeker and a vacancy are each described by concatenated feature
//! blocks (geography, skills, other). Every block maps its two sides into
//! a common embedding and scores them through a learned affinity matrix;
//! the final score is the sum over blocks.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::io::{BufRead, Read, Write};

const BINARY_MAGIC: &[u8; 8] = b"WRSCBIN1";
const TEXT_HEADER: &str = "welfare-rank-scorer text 1";

/// Learned map from raw block features into the embedding space: affine,
/// or affine with one hidden tanh layer.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMap {
    Affine {
        weight: DMatrix<f64>,
        bias: DVector<f64>,
    },
    OneHidden {
        w1: DMatrix<f64>,
        b1: DVector<f64>,
        w2: DMatrix<f64>,
        b2: DVector<f64>,
    },
}

impl FeatureMap {
    /// Identity embedding of a given dimension.
    pub fn identity(dim: usize) -> Self {
        FeatureMap::Affine {
            weight: DMatrix::identity(dim, dim),
            bias: DVector::zeros(dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            FeatureMap::Affine { weight, .. } => weight.ncols(),
            FeatureMap::OneHidden { w1, .. } => w1.ncols(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            FeatureMap::Affine { weight, .. } => weight.nrows(),
            FeatureMap::OneHidden { w2, .. } => w2.nrows(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            FeatureMap::Affine { weight, bias } => {
                if weight.nrows() != bias.len() {
                    return Err(Error::schema(format!(
                        "affine map weight has {} rows but bias has {} entries",
                        weight.nrows(),
                        bias.len()
                    )));
                }
            }
            FeatureMap::OneHidden { w1, b1, w2, b2 } => {
                if w1.nrows() != b1.len() || w2.nrows() != b2.len() || w2.ncols() != w1.nrows() {
                    return Err(Error::schema(format!(
                        "hidden map dimensions inconsistent: w1 {}x{}, b1 {}, w2 {}x{}, b2 {}",
                        w1.nrows(),
                        w1.ncols(),
                        b1.len(),
                        w2.nrows(),
                        w2.ncols(),
                        b2.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Embeds one feature vector.
    pub(crate) fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            FeatureMap::Affine { weight, bias } => weight * x + bias,
            FeatureMap::OneHidden { w1, b1, w2, b2 } => {
                let hidden = (w1 * x + b1).map(f64::tanh);
                w2 * hidden + b2
            }
        }
    }
}

/// One feature block: the two side maps and the affinity between their
/// embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub seeker_map: FeatureMap,
    pub vacancy_map: FeatureMap,
    pub affinity: DMatrix<f64>,
}

impl Block {
    pub fn new(seeker_map: FeatureMap, vacancy_map: FeatureMap, affinity: DMatrix<f64>) -> Result<Self> {
        seeker_map.validate()?;
        vacancy_map.validate()?;
        if affinity.nrows() != seeker_map.output_dim() || affinity.ncols() != vacancy_map.output_dim() {
            return Err(Error::schema(format!(
                "affinity is {}x{} but embeddings are {} (seeker) and {} (vacancy)",
                affinity.nrows(),
                affinity.ncols(),
                seeker_map.output_dim(),
                vacancy_map.output_dim()
            )));
        }
        Ok(Block {
            seeker_map,
            vacancy_map,
            affinity,
        })
    }
}

/// Training hyperparameters, recorded with the scorer. The margin and the
/// optimization settings are not published anywhere; these defaults are
/// this implementation's own.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TripletHyper {
    pub margin: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub negatives: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TripletHyper {
    fn default() -> Self {
        TripletHyper {
            margin: 1.0,
            learning_rate: 0.05,
            epochs: 40,
            negatives: 10,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TripletHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0) {
            return Err(Error::config(format!("margin must be > 0, got {}", self.margin)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.negatives == 0 || self.batch_size == 0 {
            return Err(Error::config(
                "epochs, negatives, and batch size must all be >= 1",
            ));
        }
        Ok(())
    }
}

/// Sum-over-blocks bilinear scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearScorer {
    pub blocks: Vec<Block>,
    pub hyper: TripletHyper,
    /// Mean triplet loss over the training data after the last epoch;
    /// `None` for hand-built scorers.
    pub final_loss: Option<f64>,
}

impl BilinearScorer {
    pub fn new(blocks: Vec<Block>, hyper: TripletHyper) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::schema("scorer needs at least one block"));
        }
        hyper.validate()?;
        Ok(BilinearScorer {
            blocks,
            hyper,
            final_loss: None,
        })
    }

    pub fn seeker_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.seeker_map.input_dim()).sum()
    }

    pub fn vacancy_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.vacancy_map.input_dim()).sum()
    }

    /// Splits concatenated features into per-block vectors.
    pub(crate) fn split<'a>(
        &self,
        features: &'a [f64],
        side: fn(&Block) -> &FeatureMap,
        what: &str,
    ) -> Result<Vec<&'a [f64]>> {
        let total: usize = self.blocks.iter().map(|b| side(b).input_dim()).sum();
        if features.len() != total {
            return Err(Error::schema(format!(
                "{what} features have {} entries, scorer expects {total}",
                features.len()
            )));
        }
        let mut out = Vec::with_capacity(self.blocks.len());
        let mut offset = 0;
        for block in &self.blocks {
            let d = side(block).input_dim();
            out.push(&features[offset..offset + d]);
            offset += d;
        }
        Ok(out)
    }
}

/// Scores one (seeker, vacancy) pair: sum over blocks of the bilinear
/// form between the embedded sides.
pub fn bilinear_score(
    seeker: &[f64],
    vacancy: &[f64],
    scorer: &BilinearScorer,
) -> Result<f64> {
    let s_blocks = scorer.split(seeker, |b| &b.seeker_map, "seeker")?;
    let v_blocks = scorer.split(vacancy, |b| &b.vacancy_map, "vacancy")?;
    let mut total = 0.0;
    for ((block, s), v) in scorer.blocks.iter().zip(s_blocks).zip(v_blocks) {
        let phi = block.seeker_map.apply(&DVector::from_column_slice(s));
        let psi = block.vacancy_map.apply(&DVector::from_column_slice(v));
        total += (phi.transpose() * &block.affinity * psi)[(0, 0)];
    }
    Ok(total)
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_matrix<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<()> {
    write_u32(w, m.nrows() as u32)?;
    write_u32(w, m.ncols() as u32)?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            write_f64(w, m[(i, j)])?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_matrix<R: Read>(r: &mut R) -> Result<DMatrix<f64>> {
    let rows = read_u32(r)? as usize;
    let cols = read_u32(r)? as usize;
    if rows == 0 || cols == 0 || rows.saturating_mul(cols) > 64_000_000 {
        return Err(Error::schema(format!("unreasonable matrix shape {rows}x{cols}")));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = read_f64(r)?;
        }
    }
    Ok(m)
}

fn write_map_binary<W: Write>(w: &mut W, map: &FeatureMap) -> Result<()> {
    match map {
        FeatureMap::Affine { weight, bias } => {
            w.write_all(&[0u8])?;
            write_matrix(w, weight)?;
            write_matrix(w, &DMatrix::from_column_slice(bias.len(), 1, bias.as_slice()))?;
        }
        FeatureMap::OneHidden { w1, b1, w2, b2 } => {
            w.write_all(&[1u8])?;
            write_matrix(w, w1)?;
            write_matrix(w, &DMatrix::from_column_slice(b1.len(), 1, b1.as_slice()))?;
            write_matrix(w, w2)?;
            write_matrix(w, &DMatrix::from_column_slice(b2.len(), 1, b2.as_slice()))?;
        }
    }
    Ok(())
}

fn read_map_binary<R: Read>(r: &mut R) -> Result<FeatureMap> {
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    let vector = |m: DMatrix<f64>| -> Result<DVector<f64>> {
        if m.ncols() != 1 {
            return Err(Error::schema(format!("expected a column vector, got {} columns", m.ncols())));
        }
        Ok(DVector::from_column_slice(m.as_slice()))
    };
    match kind[0] {
        0 => Ok(FeatureMap::Affine {
            weight: read_matrix(r)?,
            bias: vector(read_matrix(r)?)?,
        }),
        1 => Ok(FeatureMap::OneHidden {
            w1: read_matrix(r)?,
            b1: vector(read_matrix(r)?)?,
            w2: read_matrix(r)?,
            b2: vector(read_matrix(r)?)?,
        }),
        k => Err(Error::schema(format!("unknown feature-map kind {k}"))),
    }
}

impl BilinearScorer {
    /// Writes the versioned binary format: magic, block count, per-block
    /// maps and affinity, hyperparameters, final loss.
    pub fn save_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        write_u32(w, self.blocks.len() as u32)?;
        for block in &self.blocks {
            write_map_binary(w, &block.seeker_map)?;
            write_map_binary(w, &block.vacancy_map)?;
            write_matrix(w, &block.affinity)?;
        }
        write_f64(w, self.hyper.margin)?;
        write_f64(w, self.hyper.learning_rate)?;
        write_u32(w, self.hyper.epochs as u32)?;
        write_u32(w, self.hyper.negatives as u32)?;
        write_u32(w, self.hyper.batch_size as u32)?;
        write_u64(w, self.hyper.seed)?;
        match self.final_loss {
            Some(loss) => {
                w.write_all(&[1u8])?;
                write_f64(w, loss)?;
            }
            None => w.write_all(&[0u8])?,
        }
        Ok(())
    }

    pub fn load_binary<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::schema(format!(
                "not a scorer file (magic {:?})",
                String::from_utf8_lossy(&magic)
            )));
        }
        let n_blocks = read_u32(r)? as usize;
        if n_blocks == 0 || n_blocks > 1024 {
            return Err(Error::schema(format!("unreasonable block count {n_blocks}")));
        }
        let mut blocks = Vec::with_capacity(n_blocks);
        for _ in 0..n_blocks {
            let seeker_map = read_map_binary(r)?;
            let vacancy_map = read_map_binary(r)?;
            let affinity = read_matrix(r)?;
            blocks.push(Block::new(seeker_map, vacancy_map, affinity)?);
        }
        let hyper = TripletHyper {
            margin: read_f64(r)?,
            learning_rate: read_f64(r)?,
            epochs: read_u32(r)? as usize,
            negatives: read_u32(r)? as usize,
            batch_size: read_u32(r)? as usize,
            seed: read_u64(r)?,
        };
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let final_loss = match flag[0] {
            0 => None,
            1 => Some(read_f64(r)?),
            k => return Err(Error::schema(format!("bad final-loss flag {k}"))),
        };
        let mut scorer = BilinearScorer::new(blocks, hyper)?;
        scorer.final_loss = final_loss;
        Ok(scorer)
    }

    /// Writes the diff-friendly text format. Values use the shortest
    /// decimal representation that round-trips exactly.
    pub fn save_text<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{TEXT_HEADER}")?;
        writeln!(w, "blocks {}", self.blocks.len())?;
        let write_matrix_text = |w: &mut W, name: &str, m: &DMatrix<f64>| -> Result<()> {
            writeln!(w, "{name} {} {}", m.nrows(), m.ncols())?;
            for i in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
                writeln!(w, "{}", row.join(" "))?;
            }
            Ok(())
        };
        let write_map_text = |w: &mut W, side: &str, map: &FeatureMap| -> Result<()> {
            match map {
                FeatureMap::Affine { weight, bias } => {
                    writeln!(w, "{side} affine")?;
                    write_matrix_text(w, "weight", weight)?;
                    write_matrix_text(
                        w,
                        "bias",
                        &DMatrix::from_column_slice(bias.len(), 1, bias.as_slice()),
                    )?;
                }
                FeatureMap::OneHidden { w1, b1, w2, b2 } => {
                    writeln!(w, "{side} hidden")?;
                    write_matrix_text(w, "w1", w1)?;
                    write_matrix_text(w, "b1", &DMatrix::from_column_slice(b1.len(), 1, b1.as_slice()))?;
                    write_matrix_text(w, "w2", w2)?;
                    write_matrix_text(w, "b2", &DMatrix::from_column_slice(b2.len(), 1, b2.as_slice()))?;
                }
            }
            Ok(())
        };
        for (i, block) in self.blocks.iter().enumerate() {
            writeln!(w, "block {i}")?;
            write_map_text(w, "seeker-map", &block.seeker_map)?;
            write_map_text(w, "vacancy-map", &block.vacancy_map)?;
            write_matrix_text(w, "affinity", &block.affinity)?;
        }
        writeln!(
            w,
            "hyper {} {} {} {} {} {}",
            self.hyper.margin,
            self.hyper.learning_rate,
            self.hyper.epochs,
            self.hyper.negatives,
            self.hyper.batch_size,
            self.hyper.seed
        )?;
        match self.final_loss {
            Some(loss) => writeln!(w, "final-loss {loss}")?,
            None => writeln!(w, "final-loss none")?,
        }
        Ok(())
    }

    pub fn load_text<R: BufRead>(r: &mut R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::schema(format!("scorer text ended before {what}")))
        };
        let header = next("header")?;
        if header.trim() != TEXT_HEADER {
            return Err(Error::schema(format!("unknown scorer text header: {header}")));
        }
        let parse_f64 = |tok: &str, what: &str| -> Result<f64> {
            tok.parse::<f64>()
                .map_err(|_| Error::schema(format!("bad {what} value: {tok}")))
        };
        let parse_usize = |tok: &str, what: &str| -> Result<usize> {
            tok.parse::<usize>()
                .map_err(|_| Error::schema(format!("bad {what} value: {tok}")))
        };

        let blocks_line = next("block count")?;
        let n_blocks = match blocks_line.split_whitespace().collect::<Vec<_>>()[..] {
            ["blocks", n] => parse_usize(n, "block count")?,
            _ => return Err(Error::schema(format!("expected 'blocks <n>', got {blocks_line}"))),
        };

        let read_matrix_text = |next: &mut dyn FnMut(&str) -> Result<String>,
                                    expect_name: &str|
         -> Result<DMatrix<f64>> {
            let head = next(expect_name)?;
            let toks: Vec<&str> = head.split_whitespace().collect();
            if toks.len() != 3 || toks[0] != expect_name {
                return Err(Error::schema(format!(
                    "expected '{expect_name} <rows> <cols>', got {head}"
                )));
            }
            let rows = parse_usize(toks[1], "rows")?;
            let cols = parse_usize(toks[2], "cols")?;
            let mut m = DMatrix::zeros(rows, cols);
            for i in 0..rows {
                let line = next("matrix row")?;
                let vals: Vec<&str> = line.split_whitespace().collect();
                if vals.len() != cols {
                    return Err(Error::schema(format!(
                        "matrix row {i} has {} values, expected {cols}",
                        vals.len()
                    )));
                }
                for (j, v) in vals.iter().enumerate() {
                    m[(i, j)] = parse_f64(v, "matrix entry")?;
                }
            }
            Ok(m)
        };

        let read_map_text = |next: &mut dyn FnMut(&str) -> Result<String>,
                                 side: &str|
         -> Result<FeatureMap> {
            let head = next(side)?;
            let toks: Vec<&str> = head.split_whitespace().collect();
            if toks.len() != 2 || toks[0] != side {
                return Err(Error::schema(format!("expected '{side} <kind>', got {head}")));
            }
            let vector = |m: DMatrix<f64>| DVector::from_column_slice(m.as_slice());
            match toks[1] {
                "affine" => Ok(FeatureMap::Affine {
                    weight: read_matrix_text(next, "weight")?,
                    bias: vector(read_matrix_text(next, "bias")?),
                }),
                "hidden" => Ok(FeatureMap::OneHidden {
                    w1: read_matrix_text(next, "w1")?,
                    b1: vector(read_matrix_text(next, "b1")?),
                    w2: read_matrix_text(next, "w2")?,
                    b2: vector(read_matrix_text(next, "b2")?),
                }),
                kind => Err(Error::schema(format!("unknown feature-map kind {kind}"))),
            }
        };

        let mut blocks = Vec::with_capacity(n_blocks);
        for i in 0..n_blocks {
            let head = next("block header")?;
            if head.trim() != format!("block {i}") {
                return Err(Error::schema(format!("expected 'block {i}', got {head}")));
            }
            let seeker_map = read_map_text(&mut next, "seeker-map")?;
            let vacancy_map = read_map_text(&mut next, "vacancy-map")?;
            let affinity = read_matrix_text(&mut next, "affinity")?;
            blocks.push(Block::new(seeker_map, vacancy_map, affinity)?);
        }

        let hyper_line = next("hyper")?;
        let toks: Vec<&str> = hyper_line.split_whitespace().collect();
        if toks.len() != 7 || toks[0] != "hyper" {
            return Err(Error::schema(format!("expected 'hyper <6 values>', got {hyper_line}")));
        }
        let hyper = TripletHyper {
            margin: parse_f64(toks[1], "margin")?,
            learning_rate: parse_f64(toks[2], "learning rate")?,
            epochs: parse_usize(toks[3], "epochs")?,
            negatives: parse_usize(toks[4], "negatives")?,
            batch_size: parse_usize(toks[5], "batch size")?,
            seed: toks[6]
                .parse::<u64>()
                .map_err(|_| Error::schema(format!("bad seed value: {}", toks[6])))?,
        };
        let loss_line = next("final loss")?;
        let toks: Vec<&str> = loss_line.split_whitespace().collect();
        let final_loss = match toks[..] {
            ["final-loss", "none"] => None,
            ["final-loss", v] => Some(parse_f64(v, "final loss")?),
            _ => return Err(Error::schema(format!("expected 'final-loss <v>', got {loss_line}"))),
        };
        let mut scorer = BilinearScorer::new(blocks, hyper)?;
        scorer.final_loss = final_loss;
        Ok(scorer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_scorer(rng: &mut ChaCha8Rng, hidden: bool) -> BilinearScorer {
        let map = |rng: &mut ChaCha8Rng, din: usize, dout: usize| {
            if hidden {
                FeatureMap::OneHidden {
                    w1: DMatrix::from_fn(dout + 1, din, |_, _| rng.gen_range(-1.0..1.0)),
                    b1: DVector::from_fn(dout + 1, |_, _| rng.gen_range(-0.5..0.5)),
                    w2: DMatrix::from_fn(dout, dout + 1, |_, _| rng.gen_range(-1.0..1.0)),
                    b2: DVector::from_fn(dout, |_, _| rng.gen_range(-0.5..0.5)),
                }
            } else {
                FeatureMap::Affine {
                    weight: DMatrix::from_fn(dout, din, |_, _| rng.gen_range(-1.0..1.0)),
                    bias: DVector::from_fn(dout, |_, _| rng.gen_range(-0.5..0.5)),
                }
            }
        };
        let dims = [(3usize, 2usize, 2usize), (2, 3, 2), (4, 2, 3)];
        let blocks = dims
            .iter()
            .map(|&(ds, dv, de)| {
                Block::new(
                    map(rng, ds, de),
                    map(rng, dv, de),
                    DMatrix::from_fn(de, de, |_, _| rng.gen_range(-1.0..1.0)),
                )
                .unwrap()
            })
            .collect();
        let mut scorer = BilinearScorer::new(blocks, TripletHyper::default()).unwrap();
        scorer.final_loss = Some(rng.gen_range(0.0..2.0));
        scorer
    }

    #[test]
    fn zero_affinity_scores_zero() {
        let block = Block::new(
            FeatureMap::identity(3),
            FeatureMap::identity(3),
            DMatrix::zeros(3, 3),
        )
        .unwrap();
        let scorer = BilinearScorer::new(vec![block], TripletHyper::default()).unwrap();
        let s = bilinear_score(&[1.0, -2.0, 0.5], &[3.0, 1.0, 7.0], &scorer).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn identity_block_reduces_to_dot_product() {
        let block = Block::new(
            FeatureMap::identity(4),
            FeatureMap::identity(4),
            DMatrix::identity(4, 4),
        )
        .unwrap();
        let scorer = BilinearScorer::new(vec![block], TripletHyper::default()).unwrap();
        let x = [1.0, 2.0, -1.0, 0.5];
        let y = [0.5, -1.0, 2.0, 4.0];
        let s = bilinear_score(&x, &y, &scorer).unwrap();
        let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        assert!((s - dot).abs() < 1e-14);
    }

    #[test]
    fn block_sum_equals_block_diagonal_monolith() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a1 = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
        let a2 = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        let two_blocks = BilinearScorer::new(
            vec![
                Block::new(FeatureMap::identity(2), FeatureMap::identity(2), a1.clone()).unwrap(),
                Block::new(FeatureMap::identity(3), FeatureMap::identity(3), a2.clone()).unwrap(),
            ],
            TripletHyper::default(),
        )
        .unwrap();

        let mut big = DMatrix::zeros(5, 5);
        big.view_mut((0, 0), (2, 2)).copy_from(&a1);
        big.view_mut((2, 2), (3, 3)).copy_from(&a2);
        let monolith = BilinearScorer::new(
            vec![Block::new(FeatureMap::identity(5), FeatureMap::identity(5), big).unwrap()],
            TripletHyper::default(),
        )
        .unwrap();

        for _ in 0..20 {
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let a = bilinear_score(&x, &y, &two_blocks).unwrap();
            let b = bilinear_score(&x, &y, &monolith).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn dimension_mismatch_is_schema_error() {
        let scorer = BilinearScorer::new(
            vec![Block::new(
                FeatureMap::identity(3),
                FeatureMap::identity(2),
                DMatrix::identity(3, 2),
            )
            .unwrap()],
            TripletHyper::default(),
        )
        .unwrap();
        assert!(matches!(
            bilinear_score(&[1.0, 2.0], &[1.0, 2.0], &scorer),
            Err(crate::Error::Schema(_))
        ));
        assert!(matches!(
            bilinear_score(&[1.0, 2.0, 3.0], &[1.0], &scorer),
            Err(crate::Error::Schema(_))
        ));
        assert!(Block::new(
            FeatureMap::identity(2),
            FeatureMap::identity(2),
            DMatrix::identity(3, 3)
        )
        .is_err());
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for hidden in [false, true] {
            let scorer = random_scorer(&mut rng, hidden);
            let mut buf = Vec::new();
            scorer.save_binary(&mut buf).unwrap();
            let loaded = BilinearScorer::load_binary(&mut buf.as_slice()).unwrap();
            assert_eq!(scorer, loaded);
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for hidden in [false, true] {
            let scorer = random_scorer(&mut rng, hidden);
            let mut buf = Vec::new();
            scorer.save_text(&mut buf).unwrap();
            let loaded = BilinearScorer::load_text(&mut buf.as_slice()).unwrap();
            assert_eq!(scorer, loaded);
        }
    }

    #[test]
    fn corrupted_headers_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let scorer = random_scorer(&mut rng, false);
        let mut buf = Vec::new();
        scorer.save_binary(&mut buf).unwrap();
        buf[0] = b'X';
        assert!(BilinearScorer::load_binary(&mut buf.as_slice()).is_err());

        let mut text = Vec::new();
        scorer.save_text(&mut text).unwrap();
        let mut wrong = b"some other file\n".to_vec();
        wrong.extend_from_slice(&text);
        assert!(BilinearScorer::load_text(&mut wrong.as_slice()).is_err());
    }

    #[test]
    fn scoring_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let scorer = random_scorer(&mut rng, true);
        let x: Vec<f64> = (0..scorer.seeker_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..scorer.vacancy_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = bilinear_score(&x, &y, &scorer).unwrap();
        let b = bilinear_score(&x, &y, &scorer).unwrap();
        assert_eq!(a, b);
    }
}
