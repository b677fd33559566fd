//! Projective σ^z measurement datasets drawn from an exact ground state.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tfim::GroundState;

/// M shots of N bits each, stored row-major as 0/1 bytes.
///
/// Character `i` of a shot's text form is site `i`; `'1'` is spin up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementDataset {
    n_qubits: usize,
    seed: u64,
    bits: Vec<u8>,
}

impl MeasurementDataset {
    pub fn from_shots(n_qubits: usize, seed: u64, shots: &[Vec<u8>]) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::Invalid("n_qubits must be at least 1".into()));
        }
        let mut bits = Vec::with_capacity(shots.len() * n_qubits);
        for (k, shot) in shots.iter().enumerate() {
            if shot.len() != n_qubits {
                return Err(Error::Dimension(format!(
                    "shot {k} has {} bits, expected {n_qubits}",
                    shot.len()
                )));
            }
            if shot.iter().any(|&b| b > 1) {
                return Err(Error::Invalid(format!("shot {k} contains a non-binary value")));
            }
            bits.extend_from_slice(shot);
        }
        Ok(Self { n_qubits, seed, bits })
    }

    /// Build from basis-state indices (bit `i` of the index is site `i`).
    pub fn from_indices(n_qubits: usize, seed: u64, indices: &[usize]) -> Self {
        let mut bits = Vec::with_capacity(indices.len() * n_qubits);
        for &s in indices {
            bits.extend((0..n_qubits).map(|i| ((s >> i) & 1) as u8));
        }
        Self { n_qubits, seed, bits }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.bits.len() / self.n_qubits
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn shot(&self, k: usize) -> &[u8] {
        &self.bits[k * self.n_qubits..(k + 1) * self.n_qubits]
    }

    pub fn shots(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.bits.chunks_exact(self.n_qubits)
    }

    /// The first `m` shots as a new dataset.
    pub fn prefix(&self, m: usize) -> Self {
        let m = m.min(self.len());
        Self {
            n_qubits: self.n_qubits,
            seed: self.seed,
            bits: self.bits[..m * self.n_qubits].to_vec(),
        }
    }

    /// Empirical distribution over the 2^N basis states.
    pub fn empirical_distribution(&self) -> Result<Vec<f64>> {
        if self.n_qubits > 24 {
            return Err(Error::Capacity {
                what: "n_qubits",
                value: self.n_qubits,
                cap: 24,
            });
        }
        let mut counts = vec![0.0; 1 << self.n_qubits];
        for shot in self.shots() {
            counts[bits_to_index(shot)] += 1.0;
        }
        let m = self.len() as f64;
        counts.iter_mut().for_each(|c| *c /= m);
        Ok(counts)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.n_qubits, self.len(), self.seed)?;
        let mut line = String::with_capacity(self.n_qubits + 1);
        for shot in self.shots() {
            line.clear();
            line.extend(shot.iter().map(|&b| if b == 1 { '1' } else { '0' }));
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse = |i: usize, name: &str| -> Result<u64> {
            fields.get(i).and_then(|f| f.parse().ok()).ok_or_else(|| Error::Parse {
                line: 1,
                msg: format!("expected \"N M seed\", bad {name}"),
            })
        };
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: 1,
                msg: "expected \"N M seed\"".into(),
            });
        }
        let n = parse(0, "N")? as usize;
        let m = parse(1, "M")? as usize;
        let seed = parse(2, "seed")?;
        if n == 0 {
            return Err(Error::Parse {
                line: 1,
                msg: "N must be positive".into(),
            });
        }
        let mut bits = Vec::with_capacity(n * m);
        for k in 0..m {
            let line = lines.next().ok_or(Error::Parse {
                line: k + 2,
                msg: format!("expected {m} shots, found {k}"),
            })??;
            let line = line.trim_end();
            if line.len() != n {
                return Err(Error::Parse {
                    line: k + 2,
                    msg: format!("shot has {} characters, expected {n}", line.len()),
                });
            }
            for c in line.chars() {
                bits.push(match c {
                    '0' => 0,
                    '1' => 1,
                    _ => {
                        return Err(Error::Parse {
                            line: k + 2,
                            msg: format!("invalid character {c:?}"),
                        })
                    }
                });
            }
        }
        Ok(Self {
            n_qubits: n,
            seed,
            bits,
        })
    }
}

pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | ((b as usize) << i))
}

pub fn index_to_bits(s: usize, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((s >> i) & 1) as u8).collect()
}

pub fn bits_to_string(bits: &[u8]) -> String {
    let mut out = String::with_capacity(bits.len());
    for &b in bits {
        let _ = write!(out, "{b}");
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SamplingOptions {
    /// Keep only the half of each spin-flip pair with positive magnetization
    /// (zero-magnetization pairs keep the member with site 0 up), emulating a
    /// symmetry-broken data source.
    pub symmetry_break: bool,
}

pub fn sample_measurements(gs: &GroundState, m: usize, seed: u64) -> Result<MeasurementDataset> {
    sample_measurements_with(gs, m, seed, SamplingOptions::default())
}

/// Draw `m` i.i.d. shots from ψ² by inverse-CDF lookup.
pub fn sample_measurements_with(
    gs: &GroundState,
    m: usize,
    seed: u64,
    opts: SamplingOptions,
) -> Result<MeasurementDataset> {
    if m == 0 {
        return Err(Error::Invalid("sample count must be at least 1".into()));
    }
    let n = gs.spec.n_qubits;
    let mut cdf = Vec::with_capacity(gs.amplitudes.len());
    let mut total = 0.0;
    for (s, a) in gs.amplitudes.iter().enumerate() {
        if !opts.symmetry_break || in_positive_sector(s, n) {
            total += a * a;
        }
        cdf.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = Vec::with_capacity(m);
    for _ in 0..m {
        let u: f64 = rng.random::<f64>() * total;
        let s = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        indices.push(s);
    }
    Ok(MeasurementDataset::from_indices(n, seed, &indices))
}

fn in_positive_sector(s: usize, n: usize) -> bool {
    let up = s.count_ones() as i64;
    let mag = 2 * up - n as i64;
    mag > 0 || (mag == 0 && s & 1 == 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    /// Mean of `v_i` per site.
    pub occupation: Vec<f64>,
    /// Mean of Σ_i σ_i with σ_i = 2v_i − 1.
    pub magnetization: f64,
    /// Sample standard deviation of the per-shot magnetization.
    pub magnetization_std: f64,
}

pub fn dataset_statistics(ds: &MeasurementDataset) -> Result<DatasetStats> {
    if ds.is_empty() {
        return Err(Error::Domain("dataset has no shots".into()));
    }
    let n = ds.n_qubits();
    let m = ds.len() as f64;
    let mut occupation = vec![0.0; n];
    let mut mags = Vec::with_capacity(ds.len());
    for shot in ds.shots() {
        let mut up = 0i64;
        for (o, &b) in occupation.iter_mut().zip(shot) {
            *o += b as f64;
            up += b as i64;
        }
        mags.push((2 * up - n as i64) as f64);
    }
    occupation.iter_mut().for_each(|o| *o /= m);
    let magnetization = mags.iter().sum::<f64>() / m;
    let magnetization_std = if ds.len() > 1 {
        (mags.iter().map(|x| (x - magnetization).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(DatasetStats {
        occupation,
        magnetization,
        magnetization_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tfim::{solve_ground_state, TfimSpec};

    fn point_mass(n: usize) -> GroundState {
        let mut amplitudes = vec![0.0; 1 << n];
        amplitudes[0] = 1.0;
        GroundState {
            spec: TfimSpec::new(n, 1.0, 0.0).unwrap(),
            amplitudes,
            energy: -((n - 1) as f64),
        }
    }

    #[test]
    fn deterministic_distribution_gives_constant_shots() {
        let ds = sample_measurements(&point_mass(5), 200, 3).unwrap();
        assert_eq!(ds.len(), 200);
        assert!(ds.shots().all(|s| s.iter().all(|&b| b == 0)));
    }

    #[test]
    fn same_seed_same_shots() {
        let gs = solve_ground_state(&TfimSpec::new(4, 1.0, 1.0).unwrap()).unwrap();
        let a = sample_measurements(&gs, 1000, 17).unwrap();
        let b = sample_measurements(&gs, 1000, 17).unwrap();
        let c = sample_measurements(&gs, 1000, 18).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(sample_measurements(&point_mass(2), 0, 0).is_err());
    }

    #[test]
    fn two_site_frequencies_match_born_rule() {
        let gs = solve_ground_state(&TfimSpec::new(2, 1.0, 1.0).unwrap()).unwrap();
        let m = 1_000_000;
        let ds = sample_measurements(&gs, m, 5).unwrap();
        let emp = ds.empirical_distribution().unwrap();
        for (p, q) in gs.probabilities().iter().zip(&emp) {
            let se = (p * (1.0 - p) / m as f64).sqrt();
            assert!((p - q).abs() < 4.0 * se, "p={p} q={q}");
        }
    }

    #[test]
    fn symmetry_break_keeps_one_sector() {
        let gs = solve_ground_state(&TfimSpec::new(4, 1.0, 0.5).unwrap()).unwrap();
        let opts = SamplingOptions { symmetry_break: true };
        let ds = sample_measurements_with(&gs, 5000, 1, opts).unwrap();
        let stats = dataset_statistics(&ds).unwrap();
        assert!(stats.magnetization > 1.0);
        for shot in ds.shots() {
            assert!(in_positive_sector(bits_to_index(shot), 4));
        }
    }

    #[test]
    fn statistics_edge_cases() {
        let ones = MeasurementDataset::from_shots(3, 0, &[vec![1, 1, 1], vec![1, 1, 1]]).unwrap();
        let st = dataset_statistics(&ones).unwrap();
        assert_eq!(st.occupation, vec![1.0; 3]);
        assert_eq!(st.magnetization, 3.0);

        let mixed = MeasurementDataset::from_shots(2, 0, &[vec![0, 0], vec![1, 1]]).unwrap();
        assert_eq!(dataset_statistics(&mixed).unwrap().magnetization, 0.0);

        let empty = MeasurementDataset::from_shots(2, 0, &[]).unwrap();
        assert!(matches!(dataset_statistics(&empty), Err(Error::Domain(_))));
    }

    #[test]
    fn exact_sampler_is_z2_balanced() {
        let gs = solve_ground_state(&TfimSpec::new(8, 1.0, 1.0).unwrap()).unwrap();
        let ds = sample_measurements(&gs, 100_000, 9).unwrap();
        let st = dataset_statistics(&ds).unwrap();
        let se = st.magnetization_std / (ds.len() as f64).sqrt();
        assert!(st.magnetization.abs() < 4.0 * se, "m={} se={se}", st.magnetization);
    }

    #[test]
    fn file_format_round_trip_and_errors() {
        let ds = MeasurementDataset::from_shots(3, 42, &[vec![1, 0, 0], vec![0, 1, 1]]).unwrap();
        let mut buf = Vec::new();
        ds.write_to(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "3 2 42\n100\n011\n");
        assert_eq!(MeasurementDataset::read_from(&buf[..]).unwrap(), ds);

        assert!(MeasurementDataset::read_from(&b"3 2 42\n100\n"[..]).is_err());
        assert!(MeasurementDataset::read_from(&b"3 1 42\n1x0\n"[..]).is_err());
        assert!(MeasurementDataset::read_from(&b"3 1 42\n10\n"[..]).is_err());
        assert!(MeasurementDataset::read_from(&b"3 1\n100\n"[..]).is_err());
    }

    #[test]
    fn index_bit_conventions() {
        assert_eq!(index_to_bits(0b110, 3), vec![0, 1, 1]);
        assert_eq!(bits_to_index(&[0, 1, 1]), 0b110);
        assert_eq!(bits_to_string(&[0, 1, 1]), "011");
    }
}
