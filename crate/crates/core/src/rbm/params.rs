use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::math::{fmt_f64, softplus};

/// Learnable parameters `(W, b, c)` of a binary-binary RBM.
///
/// `weights` is row-major with shape `n_visible × n_hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams {
    pub n_visible: usize,
    pub n_hidden: usize,
    pub weights: Vec<f64>,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
}

impl RbmParams {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            n_visible,
            n_hidden,
            weights: vec![0.0; n_visible * n_hidden],
            visible_bias: vec![0.0; n_visible],
            hidden_bias: vec![0.0; n_hidden],
        }
    }

    /// Gaussian weights with standard deviation `scale`, zero biases.
    pub fn random(n_visible: usize, n_hidden: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(n_visible, n_hidden);
        if scale > 0.0 {
            let normal = Normal::new(0.0, scale).expect("finite positive scale");
            p.weights.iter_mut().for_each(|w| *w = normal.sample(&mut rng));
        }
        p
    }

    pub fn from_parts(
        n_visible: usize,
        n_hidden: usize,
        weights: Vec<f64>,
        visible_bias: Vec<f64>,
        hidden_bias: Vec<f64>,
    ) -> Result<Self> {
        let p = Self {
            n_visible,
            n_hidden,
            weights,
            visible_bias,
            hidden_bias,
        };
        p.check_shape()?;
        Ok(p)
    }

    pub fn check_shape(&self) -> Result<()> {
        if self.weights.len() != self.n_visible * self.n_hidden
            || self.visible_bias.len() != self.n_visible
            || self.hidden_bias.len() != self.n_hidden
        {
            return Err(Error::Dimension(format!(
                "parameter arrays do not match {} x {}",
                self.n_visible, self.n_hidden
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n_hidden + j]
    }

    #[inline]
    pub fn weight_row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n_hidden..(i + 1) * self.n_hidden]
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.visible_bias)
            .chain(&self.hidden_bias)
            .all(|x| x.is_finite())
    }

    pub fn nonzero_weights(&self) -> usize {
        self.weights.iter().filter(|&&w| w != 0.0).count()
    }

    fn check_visible(&self, v: &[u8]) -> Result<()> {
        if v.len() != self.n_visible {
            return Err(Error::Dimension(format!(
                "visible vector has {} units, model has {}",
                v.len(),
                self.n_visible
            )));
        }
        Ok(())
    }

    /// `θ_j = c_j + Σ_i W_ij v_i`, written into `out`.
    #[inline]
    pub fn hidden_field_into(&self, v: &[u8], out: &mut [f64]) {
        out.copy_from_slice(&self.hidden_bias);
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0 {
                for (o, w) in out.iter_mut().zip(self.weight_row(i)) {
                    *o += w;
                }
            }
        }
    }

    pub fn hidden_field(&self, v: &[u8]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_hidden];
        self.hidden_field_into(v, &mut out);
        out
    }

    /// Joint energy `E(v, h) = -Σ W_ij v_i h_j - Σ b_i v_i - Σ c_j h_j`.
    pub fn config_energy(&self, v: &[u8], h: &[u8]) -> Result<f64> {
        self.check_visible(v)?;
        if h.len() != self.n_hidden {
            return Err(Error::Dimension(format!(
                "hidden vector has {} units, model has {}",
                h.len(),
                self.n_hidden
            )));
        }
        let mut e = 0.0;
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0 {
                continue;
            }
            e -= self.visible_bias[i];
            for (j, &hj) in h.iter().enumerate() {
                if hj != 0 {
                    e -= self.weight(i, j);
                }
            }
        }
        for (c, &hj) in self.hidden_bias.iter().zip(h) {
            if hj != 0 {
                e -= c;
            }
        }
        Ok(e)
    }

    /// Free energy `F(v) = -Σ b_i v_i - Σ_j softplus(θ_j)`, so that the
    /// unnormalized marginal is `exp(-F(v))`.
    ///
    /// Panics if `v` has the wrong length.
    pub fn free_energy(&self, v: &[u8]) -> f64 {
        assert_eq!(v.len(), self.n_visible, "visible vector length");
        let mut field = vec![0.0; self.n_hidden];
        self.free_energy_with(v, &mut field)
    }

    /// [`free_energy`](Self::free_energy) with caller-provided scratch for `θ`.
    #[inline]
    pub fn free_energy_with(&self, v: &[u8], field: &mut [f64]) -> f64 {
        self.hidden_field_into(v, field);
        let visible: f64 = v
            .iter()
            .zip(&self.visible_bias)
            .filter(|(&vi, _)| vi != 0)
            .map(|(_, b)| b)
            .sum();
        -visible - field.iter().map(|&t| softplus(t)).sum::<f64>()
    }

    /// `ψ(v_num) / ψ(v_den)` with `ψ = sqrt(p)`.
    pub fn amplitude_ratio(&self, v_num: &[u8], v_den: &[u8]) -> f64 {
        (-(self.free_energy(v_num) - self.free_energy(v_den)) / 2.0).exp()
    }

    /// Text checkpoint: header `N N_h`, then `N` weight rows, the visible
    /// biases, the hidden biases, and an optional `MASK` block.
    pub fn write_checkpoint<W: Write>(&self, mut w: W, mask: Option<&FreezeMask>) -> Result<()> {
        writeln!(w, "{} {}", self.n_visible, self.n_hidden)?;
        for i in 0..self.n_visible {
            writeln!(w, "{}", join_floats(self.weight_row(i)))?;
        }
        writeln!(w, "{}", join_floats(&self.visible_bias))?;
        writeln!(w, "{}", join_floats(&self.hidden_bias))?;
        if let Some(mask) = mask {
            writeln!(w, "MASK")?;
            for i in 0..self.n_visible {
                let row: Vec<&str> = (0..self.n_hidden)
                    .map(|j| if mask.is_frozen(i, j) { "1" } else { "0" })
                    .collect();
                writeln!(w, "{}", row.join(" "))?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: BufRead>(r: R) -> Result<(Self, Option<FreezeMask>)> {
        let lines: Vec<String> = r.lines().collect::<std::io::Result<_>>()?;
        let mut it = lines.iter().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| {
            it.next().ok_or_else(|| Error::Parse {
                line: lines.len() + 1,
                msg: format!("unexpected end of checkpoint, expected {what}"),
            })
        };
        let (ln, header) = next("header")?;
        let dims = parse_row::<usize>(header, ln)?;
        if dims.len() != 2 {
            return Err(Error::Parse {
                line: ln + 1,
                msg: "expected \"N N_h\"".into(),
            });
        }
        let (n, nh) = (dims[0], dims[1]);
        let mut weights = Vec::with_capacity(n * nh);
        for _ in 0..n {
            let (ln, row) = next("weight row")?;
            weights.extend(parse_exact::<f64>(row, ln, nh)?);
        }
        let (ln, row) = next("visible biases")?;
        let visible_bias = parse_exact::<f64>(row, ln, n)?;
        let (ln, row) = next("hidden biases")?;
        let hidden_bias = parse_exact::<f64>(row, ln, nh)?;
        let params = Self::from_parts(n, nh, weights, visible_bias, hidden_bias)?;
        if !params.is_finite() {
            return Err(Error::Parse {
                line: 0,
                msg: "checkpoint contains non-finite values".into(),
            });
        }
        let mask = match next("MASK") {
            Err(_) => None,
            Ok((ln, tag)) => {
                if tag.trim() != "MASK" {
                    return Err(Error::Parse {
                        line: ln + 1,
                        msg: format!("unexpected trailing line {tag:?}"),
                    });
                }
                let mut frozen = Vec::with_capacity(n * nh);
                for _ in 0..n {
                    let (ln, row) = next("mask row")?;
                    for flag in parse_exact::<u8>(row, ln, nh)? {
                        match flag {
                            0 => frozen.push(false),
                            1 => frozen.push(true),
                            _ => {
                                return Err(Error::Parse {
                                    line: ln + 1,
                                    msg: "mask flags must be 0 or 1".into(),
                                })
                            }
                        }
                    }
                }
                Some(FreezeMask {
                    n_visible: n,
                    n_hidden: nh,
                    frozen,
                })
            }
        };
        Ok((params, mask))
    }
}

fn join_floats(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ")
}

fn parse_row<T: std::str::FromStr>(line: &str, ln: usize) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<T>().map_err(|_| Error::Parse {
                line: ln + 1,
                msg: format!("cannot parse {tok:?}"),
            })
        })
        .collect()
}

fn parse_exact<T: std::str::FromStr>(line: &str, ln: usize, len: usize) -> Result<Vec<T>> {
    let row = parse_row(line, ln)?;
    if row.len() != len {
        return Err(Error::Parse {
            line: ln + 1,
            msg: format!("expected {len} values, found {}", row.len()),
        });
    }
    Ok(row)
}

/// Per-weight freeze flags; a frozen weight is held at exactly zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreezeMask {
    pub n_visible: usize,
    pub n_hidden: usize,
    frozen: Vec<bool>,
}

impl FreezeMask {
    pub fn none(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            n_visible,
            n_hidden,
            frozen: vec![false; n_visible * n_hidden],
        }
    }

    pub fn all(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            n_visible,
            n_hidden,
            frozen: vec![true; n_visible * n_hidden],
        }
    }

    #[inline]
    pub fn is_frozen(&self, i: usize, j: usize) -> bool {
        self.frozen[i * self.n_hidden + j]
    }

    #[inline]
    pub fn is_frozen_flat(&self, k: usize) -> bool {
        self.frozen[k]
    }

    pub fn freeze_flat(&mut self, k: usize) {
        self.frozen[k] = true;
    }

    pub fn frozen_count(&self) -> usize {
        self.frozen.iter().filter(|&&f| f).count()
    }

    pub fn matches(&self, params: &RbmParams) -> bool {
        self.n_visible == params.n_visible && self.n_hidden == params.n_hidden
    }

    /// Zero every frozen weight in place.
    pub fn apply(&self, params: &mut RbmParams) {
        for (w, &f) in params.weights.iter_mut().zip(&self.frozen) {
            if f {
                *w = 0.0;
            }
        }
    }
}

/// A gradient (or update) with the same layout as [`RbmParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
}

impl Gradient {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            weights: vec![0.0; n_visible * n_hidden],
            visible_bias: vec![0.0; n_visible],
            hidden_bias: vec![0.0; n_hidden],
        }
    }

    pub fn components(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .chain(&self.visible_bias)
            .chain(&self.hidden_bias)
            .copied()
    }

    pub fn components_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.weights
            .iter_mut()
            .chain(self.visible_bias.iter_mut())
            .chain(self.hidden_bias.iter_mut())
    }

    pub fn norm(&self) -> f64 {
        self.components().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.components().fold(0.0, |m, g| m.max(g.abs()))
    }

    pub fn scale(&mut self, s: f64) {
        self.components_mut().for_each(|g| *g *= s);
    }
}
