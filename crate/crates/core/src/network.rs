//! Feed-forward scorer with tanh hidden groups and skip arcs to a sigmoid
//! output.
//!
//! Pairwise variant, for a question q and comments c1, c2:
//!
//! ```text
//! h_q1 = tanh(W_q1 [x_q, x_c1] + b_q1)
//! h_q2 = tanh(W_q2 [x_q, x_c2] + b_q2)
//! h_12 = tanh(W_12 [x_c1, x_c2] + b_12)
//! f    = sigmoid(w_v . [h_q1, h_q2, h_12, psi1, psi2] + b_v)
//! ```
//!
//! The classification variant has a single group `h_q = tanh(W_q [x_q, x_c] + b_q)`
//! and output `sigmoid(w_v . [h_q, psi] + b_v)`.
//!
//! Loss per example is binary cross-entropy plus `(lambda/2) * |W|^2` over
//! weight blocks (biases are not regularized). Hidden pre-activations are
//! clamped to ±40 and the output logit to ±36; the latter keeps the output
//! strictly inside (0, 1) in f64. Clamped units pass no gradient.
//!
//! All parameters live in one flat vector; [`NetParams::blocks`] gives the
//! layout.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HIDDEN_CLAMP: f64 = 40.0;
pub const OUTPUT_CLAMP: f64 = 36.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Pairwise,
    Classification,
}

impl Variant {
    fn groups(self) -> usize {
        match self {
            Variant::Pairwise => 3,
            Variant::Classification => 1,
        }
    }

    fn skips(self) -> usize {
        match self {
            Variant::Pairwise => 2,
            Variant::Classification => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub variant: Variant,
    /// Hidden units per group.
    pub hidden: usize,
    /// Width of one embedded text vector.
    pub input_dim: usize,
    /// Width of one skip-arc vector.
    pub skip_dim: usize,
    pub seed: u64,
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::Config("hidden size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
    /// Weight blocks are regularized, bias blocks are not.
    pub weight: bool,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

const PAIR_GROUPS: [(&str, &str); 3] = [("W_q1", "b_q1"), ("W_q2", "b_q2"), ("W_12", "b_12")];
const CLASS_GROUPS: [(&str, &str); 1] = [("W_q", "b_q")];

pub fn layout(config: &NetConfig) -> Vec<Block> {
    let names: &[(&str, &str)] = match config.variant {
        Variant::Pairwise => &PAIR_GROUPS,
        Variant::Classification => &CLASS_GROUPS,
    };
    let h = config.hidden;
    let mut blocks = Vec::new();
    let mut offset = 0;
    let mut push = |name, rows, cols, weight| {
        blocks.push(Block {
            name,
            rows,
            cols,
            offset,
            weight,
        });
        offset += rows * cols;
    };
    for &(w, b) in names {
        push(w, h, 2 * config.input_dim, true);
        push(b, h, 1, false);
    }
    let v = config.variant;
    push("w_v", 1, v.groups() * h + v.skips() * config.skip_dim, true);
    push("b_v", 1, 1, false);
    blocks
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub config: NetConfig,
    pub values: Vec<f64>,
}

/// Activations of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    /// Clamped pre-activations per group.
    pub pre: Vec<Vec<f64>>,
    /// Post-tanh activations per group.
    pub hidden: Vec<Vec<f64>>,
    /// Clamped output logit.
    pub logit: f64,
    /// Whether the output logit hit the clamp.
    pub logit_clamped: bool,
    pub output: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct PairInput<'a> {
    pub xq: &'a [f64],
    pub xc1: &'a [f64],
    pub xc2: &'a [f64],
    pub psi1: &'a [f64],
    pub psi2: &'a [f64],
}

#[derive(Debug, Clone, Copy)]
pub struct SingleInput<'a> {
    pub xq: &'a [f64],
    pub xc: &'a [f64],
    pub psi: &'a [f64],
}

#[derive(Debug, Clone, Copy)]
pub enum NetInput<'a> {
    Pair(PairInput<'a>),
    Single(SingleInput<'a>),
}

impl<'a> NetInput<'a> {
    fn variant(&self) -> Variant {
        match self {
            NetInput::Pair(_) => Variant::Pairwise,
            NetInput::Single(_) => Variant::Classification,
        }
    }

    fn groups(&self) -> Vec<[(&'static str, &'a [f64]); 2]> {
        match *self {
            NetInput::Pair(p) => vec![
                [("x_q", p.xq), ("x_c1", p.xc1)],
                [("x_q", p.xq), ("x_c2", p.xc2)],
                [("x_c1", p.xc1), ("x_c2", p.xc2)],
            ],
            NetInput::Single(s) => vec![[("x_q", s.xq), ("x_c", s.xc)]],
        }
    }

    fn skips(&self) -> Vec<(&'static str, &'a [f64])> {
        match *self {
            NetInput::Pair(p) => vec![("psi1", p.psi1), ("psi2", p.psi2)],
            NetInput::Single(s) => vec![("psi", s.psi)],
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Cross-entropy of a sigmoid output given its logit, computed stably.
fn bce_from_logit(z: f64, label: f64) -> f64 {
    z.max(0.0) - z * label + (-z.abs()).exp().ln_1p()
}

impl NetParams {
    pub fn zeros(config: NetConfig) -> Self {
        let n = layout(&config).iter().map(Block::len).sum();
        NetParams {
            config,
            values: vec![0.0; n],
        }
    }

    /// Xavier-uniform weights in ±sqrt(6 / (rows + cols)), zero biases.
    /// The output vector is treated as a 1 × (width) matrix.
    pub fn init(config: NetConfig) -> Self {
        let mut p = Self::zeros(config);
        let mut rng = ChaCha8Rng::seed_from_u64(p.config.seed);
        for block in p.blocks() {
            if !block.weight || block.is_empty() {
                continue;
            }
            let bound = (6.0 / (block.rows + block.cols) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            for v in &mut p.values[block.range()] {
                *v = dist.sample(&mut rng);
            }
        }
        p
    }

    pub fn blocks(&self) -> Vec<Block> {
        layout(&self.config)
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.blocks()
            .into_iter()
            .find(|b| b.name == name)
            .map(|b| &self.values[b.range()])
    }

    pub fn block_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let b = self.blocks().into_iter().find(|b| b.name == name)?;
        Some(&mut self.values[b.range()])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn check(&self, input: &NetInput) -> Result<()> {
        if input.variant() != self.config.variant {
            return Err(Error::Model(format!(
                "{:?} input given to a {:?} network",
                input.variant(),
                self.config.variant
            )));
        }
        for group in input.groups() {
            for (name, x) in group {
                if x.len() != self.config.input_dim {
                    return Err(Error::Shape {
                        block: name,
                        expected: self.config.input_dim,
                        actual: x.len(),
                    });
                }
            }
        }
        for (name, psi) in input.skips() {
            if psi.len() != self.config.skip_dim {
                return Err(Error::Shape {
                    block: name,
                    expected: self.config.skip_dim,
                    actual: psi.len(),
                });
            }
        }
        Ok(())
    }

    pub fn forward_input(&self, input: &NetInput) -> Result<ForwardCache> {
        self.check(input)?;
        let h = self.config.hidden;
        let d = self.config.input_dim;
        let blocks = self.blocks();
        let wv = &self.values[blocks[blocks.len() - 2].range()];
        let bv = self.values[blocks[blocks.len() - 1].offset];
        let mut pre = Vec::new();
        let mut hidden = Vec::new();
        let mut z = bv;
        for (g, [(_, a), (_, b)]) in input.groups().into_iter().enumerate() {
            let w = &self.values[blocks[2 * g].range()];
            let bias = &self.values[blocks[2 * g + 1].range()];
            let mut pg = Vec::with_capacity(h);
            let mut hg = Vec::with_capacity(h);
            for u in 0..h {
                let row = &w[u * 2 * d..(u + 1) * 2 * d];
                let mut s = bias[u];
                s += row[..d].iter().zip(a).map(|(w, x)| w * x).sum::<f64>();
                s += row[d..].iter().zip(b).map(|(w, x)| w * x).sum::<f64>();
                let s = s.clamp(-HIDDEN_CLAMP, HIDDEN_CLAMP);
                let t = s.tanh();
                z += wv[g * h + u] * t;
                pg.push(s);
                hg.push(t);
            }
            pre.push(pg);
            hidden.push(hg);
        }
        let mut k = hidden.len() * h;
        for (_, psi) in input.skips() {
            z += wv[k..k + psi.len()].iter().zip(psi).map(|(w, x)| w * x).sum::<f64>();
            k += psi.len();
        }
        let logit = z.clamp(-OUTPUT_CLAMP, OUTPUT_CLAMP);
        Ok(ForwardCache {
            pre,
            hidden,
            logit,
            logit_clamped: logit != z,
            output: sigmoid(logit),
        })
    }

    pub fn forward(&self, input: &PairInput) -> Result<ForwardCache> {
        self.forward_input(&NetInput::Pair(*input))
    }

    pub fn forward_classify(&self, input: &SingleInput) -> Result<f64> {
        Ok(self.forward_input(&NetInput::Single(*input))?.output)
    }

    /// Squared norm of all weight blocks.
    pub fn weight_norm_sq(&self) -> f64 {
        self.blocks()
            .iter()
            .filter(|b| b.weight)
            .flat_map(|b| &self.values[b.range()])
            .map(|v| v * v)
            .sum()
    }

    /// Loss of one example including the regularizer.
    pub fn loss(&self, input: &NetInput, label: f64, lambda: f64) -> Result<f64> {
        let cache = self.forward_input(input)?;
        Ok(bce_from_logit(cache.logit, label) + 0.5 * lambda * self.weight_norm_sq())
    }

    /// Adds the data-term gradient of one example to `grad` and returns its
    /// cross-entropy. The regularizer is added separately by
    /// [`NetParams::add_regularizer`].
    pub fn accumulate_gradient(
        &self,
        input: &NetInput,
        cache: &ForwardCache,
        label: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        self.check(input)?;
        if grad.len() != self.len() {
            return Err(Error::Shape {
                block: "gradient",
                expected: self.len(),
                actual: grad.len(),
            });
        }
        let h = self.config.hidden;
        let d = self.config.input_dim;
        let blocks = self.blocks();
        let wv_block = &blocks[blocks.len() - 2];
        let bv_offset = blocks[blocks.len() - 1].offset;
        let wv = &self.values[wv_block.range()];
        let dz = if cache.logit_clamped {
            0.0
        } else {
            cache.output - label
        };
        grad[bv_offset] += dz;
        for (g, [(_, a), (_, b)]) in input.groups().into_iter().enumerate() {
            let w_off = blocks[2 * g].offset;
            let b_off = blocks[2 * g + 1].offset;
            for u in 0..h {
                let t = cache.hidden[g][u];
                grad[wv_block.offset + g * h + u] += dz * t;
                let pre = cache.pre[g][u];
                if pre.abs() >= HIDDEN_CLAMP {
                    continue;
                }
                let dpre = dz * wv[g * h + u] * (1.0 - t * t);
                grad[b_off + u] += dpre;
                let row = w_off + u * 2 * d;
                for (i, x) in a.iter().enumerate() {
                    grad[row + i] += dpre * x;
                }
                for (i, x) in b.iter().enumerate() {
                    grad[row + d + i] += dpre * x;
                }
            }
        }
        let mut k = wv_block.offset + cache.hidden.len() * h;
        for (_, psi) in input.skips() {
            for (i, x) in psi.iter().enumerate() {
                grad[k + i] += dz * x;
            }
            k += psi.len();
        }
        Ok(bce_from_logit(cache.logit, label))
    }

    /// Adds `lambda * W` for every weight block.
    pub fn add_regularizer(&self, lambda: f64, grad: &mut [f64]) {
        if lambda == 0.0 {
            return;
        }
        for b in self.blocks().iter().filter(|b| b.weight) {
            for i in b.range() {
                grad[i] += lambda * self.values[i];
            }
        }
    }

    /// Full gradient of one example's loss, regularizer included.
    pub fn backward(
        &self,
        input: &NetInput,
        cache: &ForwardCache,
        label: f64,
        lambda: f64,
    ) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.len()];
        self.accumulate_gradient(input, cache, label, &mut grad)?;
        self.add_regularizer(lambda, &mut grad);
        Ok(grad)
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

/// Adagrad with a decaying base rate `eta / (1 + decay * t)`, where `t`
/// counts completed updates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdagradState {
    pub accumulators: Vec<f64>,
    pub eta: f64,
    pub decay: f64,
    pub epsilon: f64,
    pub t: u64,
}

impl AdagradState {
    pub fn new(len: usize, eta: f64, decay: f64) -> Self {
        AdagradState {
            accumulators: vec![0.0; len],
            eta,
            decay,
            epsilon: 1e-8,
            t: 0,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.eta / (1.0 + self.decay * self.t as f64)
    }

    pub fn step(&mut self, params: &mut NetParams, grad: &[f64]) -> Result<()> {
        if grad.len() != params.len() || self.accumulators.len() != params.len() {
            return Err(Error::Shape {
                block: "adagrad",
                expected: params.len(),
                actual: grad.len(),
            });
        }
        let lr = self.learning_rate();
        for ((p, acc), g) in params.values.iter_mut().zip(&mut self.accumulators).zip(grad) {
            *acc += g * g;
            *p -= lr * g / (acc.sqrt() + self.epsilon);
        }
        self.t += 1;
        Ok(())
    }
}

pub fn adagrad_step(state: &mut AdagradState, params: &mut NetParams, grad: &[f64]) -> Result<()> {
    state.step(params, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn config(variant: Variant, h: usize, d: usize, s: usize, seed: u64) -> NetConfig {
        NetConfig {
            variant,
            hidden: h,
            input_dim: d,
            skip_dim: s,
            seed,
        }
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
    }

    struct Draw {
        params: NetParams,
        inputs: Vec<Vec<f64>>,
        label: f64,
        lambda: f64,
    }

    impl Draw {
        fn input(&self) -> NetInput<'_> {
            let i = &self.inputs;
            match self.params.config.variant {
                Variant::Pairwise => NetInput::Pair(PairInput {
                    xq: &i[0],
                    xc1: &i[1],
                    xc2: &i[2],
                    psi1: &i[3],
                    psi2: &i[4],
                }),
                Variant::Classification => NetInput::Single(SingleInput {
                    xq: &i[0],
                    xc: &i[1],
                    psi: &i[2],
                }),
            }
        }
    }

    fn draw(variant: Variant, seed: u64) -> Draw {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = rng.gen_range(1..4);
        let d = rng.gen_range(1..5);
        let s = rng.gen_range(0..4);
        let mut params = NetParams::init(config(variant, h, d, s, seed));
        for v in &mut params.values {
            *v = rng.gen_range(-1.0..1.0);
        }
        let widths = match variant {
            Variant::Pairwise => vec![d, d, d, s, s],
            Variant::Classification => vec![d, d, s],
        };
        Draw {
            params,
            inputs: widths.into_iter().map(|w| rand_vec(&mut rng, w, 1.0)).collect(),
            label: f64::from(rng.gen_range(0..2u8)),
            lambda: if seed % 2 == 0 { 0.0 } else { 0.005 },
        }
    }

    fn max_rel_error(d: &Draw) -> f64 {
        let input = d.input();
        let cache = d.params.forward_input(&input).unwrap();
        let analytic = d.params.backward(&input, &cache, d.label, d.lambda).unwrap();
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..d.params.len() {
            let mut plus = d.params.clone();
            plus.values[i] += eps;
            let mut minus = d.params.clone();
            minus.values[i] -= eps;
            let numeric = (plus.loss(&input, d.label, d.lambda).unwrap()
                - minus.loss(&input, d.label, d.lambda).unwrap())
                / (2.0 * eps);
            let denom = (analytic[i].abs() + numeric.abs()).max(1e-6);
            worst = worst.max((analytic[i] - numeric).abs() / denom);
        }
        worst
    }

    #[test]
    fn gradient_check_both_variants() {
        for variant in [Variant::Pairwise, Variant::Classification] {
            for seed in 0..60 {
                let err = max_rel_error(&draw(variant, seed));
                assert!(err < 1e-4, "{variant:?} seed {seed}: {err}");
            }
        }
    }

    #[test]
    fn init_bounds_and_determinism() {
        let c = config(Variant::Pairwise, 3, 5, 4, 11);
        let a = NetParams::init(c.clone());
        let b = NetParams::init(c);
        assert_eq!(a.to_le_bytes(), b.to_le_bytes());
        let bound = (6.0f64 / 13.0).sqrt();
        assert!(a.block("W_q1").unwrap().iter().all(|v| v.abs() <= bound));
        for name in ["b_q1", "b_q2", "b_12", "b_v"] {
            assert!(a.block(name).unwrap().iter().all(|&v| v == 0.0));
        }
        assert_eq!(a.block("w_v").unwrap().len(), 3 * 3 + 2 * 4);
        let other = NetParams::init(config(Variant::Pairwise, 3, 5, 4, 12));
        assert_ne!(a.values, other.values);
    }

    #[test]
    fn zero_params_give_half() {
        let p = NetParams::zeros(config(Variant::Pairwise, 3, 2, 1, 0));
        let x = [0.3, -2.0];
        let psi = [5.0];
        let input = PairInput {
            xq: &x,
            xc1: &x,
            xc2: &x,
            psi1: &psi,
            psi2: &psi,
        };
        assert_eq!(p.forward(&input).unwrap().output, 0.5);
        let c = NetParams::zeros(config(Variant::Classification, 3, 2, 1, 0));
        let single = SingleInput {
            xq: &x,
            xc: &x,
            psi: &psi,
        };
        assert_eq!(c.forward_classify(&single).unwrap(), 0.5);
    }

    #[test]
    fn saturation_stays_open_interval() {
        let mut p = NetParams::zeros(config(Variant::Pairwise, 2, 1, 1, 0));
        let x = [1e6];
        let psi = [1e6];
        let input = PairInput {
            xq: &x,
            xc1: &x,
            xc2: &x,
            psi1: &psi,
            psi2: &psi,
        };
        p.block_mut("b_v").unwrap()[0] = 100.0;
        let out = p.forward(&input).unwrap().output;
        assert!(out > 0.999 && out < 1.0);
        for v in &mut p.values {
            *v = -1e3;
        }
        let out = p.forward(&input).unwrap().output;
        assert!(out > 0.0 && out < 1e-12, "{out}");
    }

    #[test]
    fn classification_monotone_in_output_bias() {
        let mut c = NetParams::init(config(Variant::Classification, 3, 2, 2, 4));
        let x = [0.5, -0.5];
        let psi = [0.1, 0.9];
        let input = SingleInput {
            xq: &x,
            xc: &x,
            psi: &psi,
        };
        let mut last = 0.0;
        for bv in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            c.block_mut("b_v").unwrap()[0] = bv;
            let out = c.forward_classify(&input).unwrap();
            assert!(out > last);
            last = out;
        }
    }

    #[test]
    fn swap_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (h, d, s) = (3, 4, 2);
        let mut p = NetParams::init(config(Variant::Pairwise, h, d, s, 9));
        let wq1 = p.block("W_q1").unwrap().to_vec();
        p.block_mut("W_q2").unwrap().copy_from_slice(&wq1);
        let bq1 = p.block("b_q1").unwrap().to_vec();
        p.block_mut("b_q2").unwrap().copy_from_slice(&bq1);
        // W_12 acting on [c2, c1] must equal W_12 on [c1, c2]: make the two
        // halves of every row equal.
        let w12 = p.block_mut("W_12").unwrap();
        for u in 0..h {
            for i in 0..d {
                w12[u * 2 * d + d + i] = w12[u * 2 * d + i];
            }
        }
        let mut swapped = p.clone();
        let wv = p.block("w_v").unwrap().to_vec();
        let sw = swapped.block_mut("w_v").unwrap();
        sw[..h].copy_from_slice(&wv[h..2 * h]);
        sw[h..2 * h].copy_from_slice(&wv[..h]);
        sw[3 * h..3 * h + s].copy_from_slice(&wv[3 * h + s..]);
        sw[3 * h + s..].copy_from_slice(&wv[3 * h..3 * h + s]);
        let v: Vec<Vec<f64>> = [d, d, d, s, s].iter().map(|&w| rand_vec(&mut rng, w, 1.0)).collect();
        let a = p
            .forward(&PairInput {
                xq: &v[0],
                xc1: &v[1],
                xc2: &v[2],
                psi1: &v[3],
                psi2: &v[4],
            })
            .unwrap();
        let b = swapped
            .forward(&PairInput {
                xq: &v[0],
                xc1: &v[2],
                xc2: &v[1],
                psi1: &v[4],
                psi2: &v[3],
            })
            .unwrap();
        assert!((a.output - b.output).abs() < 1e-15);
    }

    #[test]
    fn shape_errors_name_the_block() {
        let p = NetParams::zeros(config(Variant::Pairwise, 3, 2, 1, 0));
        let x = [0.0, 0.0];
        let short = [0.0];
        let err = p
            .forward(&PairInput {
                xq: &x,
                xc1: &short,
                xc2: &x,
                psi1: &short,
                psi2: &short,
            })
            .unwrap_err();
        assert!(matches!(err, Error::Shape { block: "x_c1", .. }));
        let single = SingleInput {
            xq: &x,
            xc: &x,
            psi: &short,
        };
        assert!(matches!(p.forward_classify(&single), Err(Error::Model(_))));
    }

    #[test]
    fn output_bias_gradient_zero_when_label_matches() {
        let p = NetParams::zeros(config(Variant::Classification, 1, 1, 1, 0));
        let x = [0.0];
        let input = NetInput::Single(SingleInput {
            xq: &x,
            xc: &x,
            psi: &x,
        });
        let cache = p.forward_input(&input).unwrap();
        let g = p.backward(&input, &cache, cache.output, 0.005).unwrap();
        assert_eq!(*g.last().unwrap(), 0.0);
        let g2 = p.backward(&input, &cache, cache.output, 0.005).unwrap();
        assert_eq!(g, g2);
    }

    #[test]
    fn adagrad_examples() {
        let mut p = NetParams::init(config(Variant::Classification, 1, 1, 1, 3));
        let before = p.clone();
        let zero = vec![0.0; p.len()];
        let mut st = AdagradState::new(p.len(), 0.1, 1e-4);
        st.step(&mut p, &zero).unwrap();
        assert_eq!(p, before);
        assert!(st.accumulators.iter().all(|&a| a == 0.0));

        let mut st = AdagradState::new(p.len(), 0.1, 0.0);
        let g = vec![0.5; p.len()];
        let start = p.values[0];
        st.step(&mut p, &g).unwrap();
        let d1 = start - p.values[0];
        assert!((d1 - 0.1 * 0.5 / (0.5 + 1e-8)).abs() < 1e-15);
        let mid = p.values[0];
        st.step(&mut p, &g).unwrap();
        let d2 = mid - p.values[0];
        assert!(d2.abs() < d1.abs());

        let mut st = AdagradState::new(1, 0.1, 1e-4);
        st.t = 10_000;
        assert!((st.learning_rate() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn loss_decreases_on_separable_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = NetParams::init(config(Variant::Classification, 3, 2, 1, 5));
        let data: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..60)
            .map(|_| {
                let y = f64::from(rng.gen_range(0..2u8));
                let x = rand_vec(&mut rng, 2, 1.0);
                (x, vec![if y > 0.5 { 1.0 } else { -1.0 }], y)
            })
            .collect();
        let total = |p: &NetParams| -> f64 {
            data.iter()
                .map(|(x, psi, y)| {
                    let input = NetInput::Single(SingleInput { xq: x, xc: x, psi });
                    p.loss(&input, *y, 0.0).unwrap()
                })
                .sum()
        };
        let before = total(&p);
        let mut st = AdagradState::new(p.len(), 0.1, 1e-4);
        for (x, psi, y) in &data {
            let input = NetInput::Single(SingleInput { xq: x, xc: x, psi });
            let cache = p.forward_input(&input).unwrap();
            let g = p.backward(&input, &cache, *y, 0.005).unwrap();
            st.step(&mut p, &g).unwrap();
        }
        assert!(total(&p) < before);
    }
}
