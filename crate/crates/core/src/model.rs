//! Model family, parameter decomposition into knots and tiles, and the
//! compressed histogram representation of discrete data.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MosaicError, Result};

/// Conditional density of an observed count given its latent Gaussian
/// coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkFamily {
    /// `y | x ~ Poisson(exp(x))`.
    PoissonLogNormal,
    /// `y = ceil(x)` for `x > 0`, otherwise `y = 0`.
    RoundedGaussian,
}

impl LinkFamily {
    /// `log h(y | x)`; `-inf` outside the support.
    pub fn log_density(self, y: i64, x: f64) -> f64 {
        match self {
            LinkFamily::PoissonLogNormal => log_poisson(y, x),
            LinkFamily::RoundedGaussian => {
                let (lo, hi) = rounding_cell(y);
                if x > lo && x <= hi {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Draws an observation given the latent value.
    pub fn observe<R: rand::Rng + ?Sized>(self, x: f64, rng: &mut R) -> i64 {
        match self {
            LinkFamily::PoissonLogNormal => {
                let rate = x.exp();
                if rate <= 0.0 || !rate.is_finite() {
                    return 0;
                }
                let d = rand_distr::Poisson::new(rate).expect("positive finite rate");
                rand_distr::Distribution::<f64>::sample(&d, rng) as i64
            }
            LinkFamily::RoundedGaussian => round_up_positive(x),
        }
    }
}

/// Poisson log-pmf with rate `exp(log_rate)`, via log-gamma.
#[inline]
pub fn log_poisson(y: i64, log_rate: f64) -> f64 {
    if y < 0 {
        return f64::NEG_INFINITY;
    }
    y as f64 * log_rate - log_rate.exp() - libm::lgamma(y as f64 + 1.0)
}

/// Latent interval `(lo, hi]` that rounds to `y` under the rounded Gaussian
/// link.
#[inline]
pub fn rounding_cell(y: i64) -> (f64, f64) {
    if y <= 0 {
        (f64::NEG_INFINITY, 0.0)
    } else {
        ((y - 1) as f64, y as f64)
    }
}

#[inline]
pub fn round_up_positive(x: f64) -> i64 {
    if x > 0.0 {
        x.ceil() as i64
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    links: Vec<LinkFamily>,
}

impl ModelSpec {
    pub fn new(links: Vec<LinkFamily>) -> Result<Self> {
        if links.is_empty() {
            return Err(MosaicError::InvalidInput("model needs p >= 1".into()));
        }
        Ok(Self { links })
    }

    pub fn uniform(link: LinkFamily, p: usize) -> Result<Self> {
        Self::new(vec![link; p])
    }

    pub fn p(&self) -> usize {
        self.links.len()
    }

    pub fn link(&self, j: usize) -> LinkFamily {
        self.links[j]
    }

    pub fn links(&self) -> &[LinkFamily] {
        &self.links
    }
}

/// Number of unordered dimension pairs.
pub fn pair_count(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// Position of pair `(s, t)`, `s < t`, in row-major order
/// `(0,1), (0,2), ..., (0,p-1), (1,2), ...`.
pub fn pair_index(s: usize, t: usize, p: usize) -> usize {
    debug_assert!(s < t && t < p);
    s * (2 * p - s - 1) / 2 + (t - s - 1)
}

/// All pairs in row-major order.
pub fn pairs(p: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..p).flat_map(move |s| (s + 1..p).map(move |t| (s, t)))
}

/// Symmetric matrix stored once per unordered index pair, so `get(i, j)` and
/// `get(j, i)` read the same cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    dim: usize,
    packed: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            packed: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Accepts only exactly symmetric input.
    pub fn from_dmatrix(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(MosaicError::Structure(format!(
                "matrix is {}x{}, expected square",
                a.nrows(),
                a.ncols()
            )));
        }
        for i in 0..a.nrows() {
            for j in 0..i {
                if a[(i, j)] != a[(j, i)] {
                    return Err(MosaicError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self::from_fn(a.nrows(), |i, j| a[(i, j)]))
    }

    /// Symmetrizes by averaging mirrored entries.
    pub fn from_dmatrix_lossy(a: &DMatrix<f64>) -> Self {
        Self::from_fn(a.nrows(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(MosaicError::Structure("ragged matrix rows".into()));
        }
        Self::from_dmatrix(&DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
    }

    #[inline]
    fn offset(i: usize, j: usize) -> usize {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        hi * (hi + 1) / 2 + lo
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[Self::offset(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.packed[Self::offset(i, j)] = v;
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).fold(f64::MIN, f64::max)
    }

    pub fn frobenius_distance(&self, other: &SymMatrix) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let d = self.get(i, j) - other.get(i, j);
                acc += d * d;
            }
        }
        acc.sqrt()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_distance(&SymMatrix::zeros(self.dim))
    }

    /// Positive definiteness via Cholesky.
    pub fn is_positive_definite(&self) -> bool {
        nalgebra::Cholesky::new(self.to_dmatrix()).is_some()
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = MosaicError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

/// Mean vector and covariance matrix of the latent Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub mu: Vec<f64>,
    pub sigma: SymMatrix,
}

impl Parameters {
    pub fn new(mu: Vec<f64>, sigma: SymMatrix) -> Result<Self> {
        if mu.len() != sigma.dim() {
            return Err(MosaicError::Structure(format!(
                "mean has length {} but covariance is {}x{}",
                mu.len(),
                sigma.dim(),
                sigma.dim()
            )));
        }
        Ok(Self { mu, sigma })
    }

    pub fn p(&self) -> usize {
        self.mu.len()
    }

    pub fn correlation(&self, s: usize, t: usize) -> f64 {
        self.sigma.get(s, t) / (self.sigma.get(s, s) * self.sigma.get(t, t)).sqrt()
    }
}

/// Parameters of one univariate marginal: `(mu_j, sigma_jj)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnotParam {
    pub mu: f64,
    pub sigma: f64,
}

impl KnotParam {
    pub fn new(mu: f64, sigma: f64) -> Self {
        Self { mu, sigma }
    }
}

/// Off-diagonal covariance `sigma_st` for the 0-based pair `s < t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileParam {
    pub s: usize,
    pub t: usize,
    pub sigma: f64,
}

impl TileParam {
    pub fn new(s: usize, t: usize, sigma: f64) -> Self {
        Self { s, t, sigma }
    }
}

/// Splits parameters into `p` knots and `p(p-1)/2` row-major tiles.
pub fn split_parameters(theta: &Parameters) -> (Vec<KnotParam>, Vec<TileParam>) {
    let p = theta.p();
    let knots = (0..p)
        .map(|j| KnotParam::new(theta.mu[j], theta.sigma.get(j, j)))
        .collect();
    let tiles = pairs(p)
        .map(|(s, t)| TileParam::new(s, t, theta.sigma.get(s, t)))
        .collect();
    (knots, tiles)
}

/// Inverse of [`split_parameters`]. Tiles may come in any order but every
/// pair must appear exactly once.
pub fn assemble_parameters(knots: &[KnotParam], tiles: &[TileParam]) -> Result<Parameters> {
    let p = knots.len();
    if p == 0 {
        return Err(MosaicError::Structure("no knots".into()));
    }
    if tiles.len() != pair_count(p) {
        return Err(MosaicError::Structure(format!(
            "{} tiles for p = {p}, expected {}",
            tiles.len(),
            pair_count(p)
        )));
    }
    let mut sigma = SymMatrix::zeros(p);
    for (j, k) in knots.iter().enumerate() {
        sigma.set(j, j, k.sigma);
    }
    let mut seen = vec![false; tiles.len()];
    for tile in tiles {
        if tile.s >= tile.t || tile.t >= p {
            return Err(MosaicError::Structure(format!(
                "tile index ({}, {}) invalid for p = {p}",
                tile.s, tile.t
            )));
        }
        let idx = pair_index(tile.s, tile.t, p);
        if std::mem::replace(&mut seen[idx], true) {
            return Err(MosaicError::Structure(format!(
                "duplicate tile ({}, {})",
                tile.s, tile.t
            )));
        }
        sigma.set(tile.s, tile.t, tile.sigma);
    }
    Parameters::new(knots.iter().map(|k| k.mu).collect(), sigma)
}

/// Integer observations, row-major `n x p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    n: usize,
    p: usize,
    data: Vec<i64>,
}

impl CountMatrix {
    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(MosaicError::InvalidInput("no observations".into()));
        }
        let p = rows[0].len();
        if p == 0 {
            return Err(MosaicError::InvalidInput("no columns".into()));
        }
        let mut data = Vec::with_capacity(n * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(MosaicError::Structure(format!(
                    "row {i} has {} entries, expected {p}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, p, data })
    }

    pub fn from_vec(n: usize, p: usize, data: Vec<i64>) -> Result<Self> {
        if n == 0 || p == 0 || data.len() != n * p {
            return Err(MosaicError::Structure(format!(
                "buffer of {} values does not form a {n}x{p} matrix",
                data.len()
            )));
        }
        Ok(Self { n, p, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.p + j]
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = i64> + '_ {
        (0..self.n).map(move |i| self.get(i, j))
    }

    pub fn zero_fraction(&self) -> f64 {
        self.data.iter().filter(|&&v| v == 0).count() as f64 / self.data.len() as f64
    }

    /// Reads a CSV with a header row `y1,...,yp`.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let p = reader.headers()?.len();
        let mut data = Vec::new();
        let mut n = 0;
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != p {
                return Err(MosaicError::Structure(format!(
                    "row {i} has {} fields, expected {p}",
                    record.len()
                )));
            }
            for (j, field) in record.iter().enumerate() {
                let v: i64 = field.trim().parse().map_err(|_| {
                    MosaicError::InvalidInput(format!("row {i}, column {j}: '{field}' is not an integer"))
                })?;
                data.push(v);
            }
            n += 1;
        }
        Self::from_vec(n, p, data)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record((1..=self.p).map(|j| format!("y{j}")))?;
        for i in 0..self.n {
            w.write_record(self.row(i).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Value -> count histogram of one dimension.
pub type Histogram = BTreeMap<i64, u64>;

/// `(value_s, value_t)` -> count histogram of one dimension pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairHistogram {
    pub counts: BTreeMap<(i64, i64), u64>,
}

impl PairHistogram {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Swaps the roles of the two dimensions.
    pub fn transposed(&self) -> Self {
        Self {
            counts: self.counts.iter().map(|(&(a, b), &c)| ((b, a), c)).collect(),
        }
    }

    pub fn marginal_first(&self) -> Histogram {
        let mut h = Histogram::new();
        for (&(a, _), &c) in &self.counts {
            *h.entry(a).or_default() += c;
        }
        h
    }

    pub fn marginal_second(&self) -> Histogram {
        let mut h = Histogram::new();
        for (&(_, b), &c) in &self.counts {
            *h.entry(b).or_default() += c;
        }
        h
    }

    /// Scales every count by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        Self {
            counts: self.counts.iter().map(|(&k, &c)| (k, c * factor)).collect(),
        }
    }
}

/// Sufficient statistics: univariate and pairwise value histograms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedDataset {
    pub n: u64,
    pub p: usize,
    pub uni: Vec<Histogram>,
    /// Row-major pair order, see [`pair_index`].
    pub biv: Vec<PairHistogram>,
}

impl CompressedDataset {
    pub fn pair(&self, s: usize, t: usize) -> &PairHistogram {
        &self.biv[pair_index(s, t, self.p)]
    }

    /// Cardinality of observed values in dimension `j`.
    pub fn cardinality(&self, j: usize) -> usize {
        self.uni[j].len()
    }

    /// Checks the count and marginal-consistency invariants.
    pub fn check_consistency(&self) -> Result<()> {
        for (j, h) in self.uni.iter().enumerate() {
            let total: u64 = h.values().sum();
            if total != self.n {
                return Err(MosaicError::Structure(format!(
                    "histogram {j} sums to {total}, expected {}",
                    self.n
                )));
            }
        }
        for (s, t) in pairs(self.p) {
            let ph = self.pair(s, t);
            if ph.total() != self.n {
                return Err(MosaicError::Structure(format!(
                    "pair ({s}, {t}) sums to {}, expected {}",
                    ph.total(),
                    self.n
                )));
            }
            if ph.marginal_first() != self.uni[s] || ph.marginal_second() != self.uni[t] {
                return Err(MosaicError::Structure(format!(
                    "pair ({s}, {t}) marginals disagree with univariate histograms"
                )));
            }
        }
        Ok(())
    }
}

/// Builds all univariate and pairwise histograms in one pass.
pub fn compress(raw: &CountMatrix) -> Result<CompressedDataset> {
    let (n, p) = (raw.n(), raw.p());
    let mut uni = vec![Histogram::new(); p];
    let mut biv = vec![PairHistogram::default(); pair_count(p)];
    for i in 0..n {
        let row = raw.row(i);
        for (j, &v) in row.iter().enumerate() {
            if v < 0 {
                return Err(MosaicError::NegativeEntry { row: i, col: j, value: v });
            }
            *uni[j].entry(v).or_default() += 1;
        }
        for (idx, (s, t)) in pairs(p).enumerate() {
            *biv[idx].counts.entry((row[s], row[t])).or_default() += 1;
        }
    }
    Ok(CompressedDataset {
        n: n as u64,
        p,
        uni,
        biv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn compress_counts_single_column() {
        let raw = CountMatrix::from_rows(&[vec![0], vec![0], vec![1], vec![2], vec![0]]).unwrap();
        let c = compress(&raw).unwrap();
        let expected: Histogram = [(0, 3), (1, 1), (2, 1)].into_iter().collect();
        assert_eq!(c.uni[0], expected);
        assert!(c.biv.is_empty());
    }

    #[test]
    fn compress_rejects_negative_with_location() {
        let raw = CountMatrix::from_rows(&[vec![0, 1], vec![3, -2]]).unwrap();
        match compress(&raw) {
            Err(MosaicError::NegativeEntry { row, col, value }) => {
                assert_eq!((row, col, value), (1, 1, -2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn split_p1_has_no_tiles() {
        let theta = Parameters::new(vec![2.0], SymMatrix::from_fn(1, |_, _| 3.0)).unwrap();
        let (k, t) = split_parameters(&theta);
        assert_eq!(k, vec![KnotParam::new(2.0, 3.0)]);
        assert!(t.is_empty());
        let back = assemble_parameters(&k, &t).unwrap();
        assert_eq!(back.sigma.to_rows(), vec![vec![3.0]]);
    }

    #[test]
    fn split_p2_reads_off_tile() {
        let sigma = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 2.0]]).unwrap();
        let theta = Parameters::new(vec![0.0, 0.0], sigma).unwrap();
        let (_, t) = split_parameters(&theta);
        assert_eq!(t, vec![TileParam::new(0, 1, 0.5)]);
    }

    #[test]
    fn tile_order_is_row_major() {
        let order: Vec<_> = pairs(3).collect();
        assert_eq!(order, vec![(0, 1), (0, 2), (1, 2)]);
        let order4: Vec<_> = pairs(4).collect();
        for (k, &(s, t)) in order4.iter().enumerate() {
            assert_eq!(pair_index(s, t, 4), k);
        }
    }

    #[test]
    fn assemble_rejects_duplicates_and_bad_indices() {
        let knots = vec![KnotParam::new(0.0, 1.0); 3];
        let dup = vec![
            TileParam::new(0, 1, 0.1),
            TileParam::new(0, 1, 0.2),
            TileParam::new(1, 2, 0.3),
        ];
        assert!(matches!(assemble_parameters(&knots, &dup), Err(MosaicError::Structure(_))));
        let bad = vec![
            TileParam::new(0, 1, 0.1),
            TileParam::new(2, 1, 0.2),
            TileParam::new(1, 2, 0.3),
        ];
        assert!(assemble_parameters(&knots, &bad).is_err());
        assert!(assemble_parameters(&knots, &dup[..2]).is_err());
    }

    #[test]
    fn symmetric_storage_is_exact() {
        let mut m = SymMatrix::zeros(3);
        m.set(2, 0, 0.7);
        assert_eq!(m.get(0, 2), 0.7);
        let dm = m.to_dmatrix();
        assert_eq!(dm, dm.transpose());
        let mut asym = dm.clone();
        asym[(0, 2)] = 0.70000001;
        assert!(matches!(SymMatrix::from_dmatrix(&asym), Err(MosaicError::NotSymmetric { .. })));
    }

    fn small_rows() -> impl Strategy<Value = Vec<Vec<i64>>> {
        (1usize..4).prop_flat_map(|p| prop::collection::vec(prop::collection::vec(0i64..6, p), 1..40))
    }

    proptest! {
        #[test]
        fn split_assemble_round_trip(vals in prop::collection::vec(-5.0f64..5.0, 9), sd in prop::collection::vec(0.1f64..3.0, 3)) {
            let sigma = SymMatrix::from_fn(3, |i, j| if i == j { sd[i] } else { vals[i + 3 * j] });
            let theta = Parameters::new(vals[..3].to_vec(), sigma).unwrap();
            let (k, t) = split_parameters(&theta);
            let back = assemble_parameters(&k, &t).unwrap();
            prop_assert_eq!(&back, &theta);
            prop_assert_eq!(split_parameters(&back), (k, t));
        }

        #[test]
        fn compress_is_consistent_and_order_invariant(rows in small_rows(), seed in any::<u64>()) {
            let raw = CountMatrix::from_rows(&rows).unwrap();
            let c = compress(&raw).unwrap();
            c.check_consistency().unwrap();
            for j in 0..raw.p() {
                let (lo, hi) = (raw.column(j).min().unwrap(), raw.column(j).max().unwrap());
                prop_assert!(c.cardinality(j) as i64 <= hi - lo + 1);
            }
            let mut shuffled = rows.clone();
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let c2 = compress(&CountMatrix::from_rows(&shuffled).unwrap()).unwrap();
            prop_assert_eq!(c, c2);
        }
    }
}
