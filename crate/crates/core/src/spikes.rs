//! Binary spike rasters.
//!
//! A [`SpikeMatrix`] stores the 1-entries of an `N x T` binary matrix as
//! per-neuron sorted lists of time bins. Recordings are sparse (background
//! densities of a few spikes per thousand bins), so the engine iterates over
//! spikes rather than over cells. [`SpikeMatrix::to_dense`] gives the full view
//! when one is needed.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// On-disk raster formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeFormat {
    /// `N=<int> T=<int>` header, then one `neuron bin` pair per line.
    CooText,
    /// Rows are neurons, columns are bins, cells are `0` or `1`.
    DenseCsv,
}

impl SpikeFormat {
    /// Guess the format from a file extension; `.csv` is dense, anything else COO.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => SpikeFormat::DenseCsv,
            _ => SpikeFormat::CooText,
        }
    }
}

impl FromStr for SpikeFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coo" | "coo-text" => Ok(SpikeFormat::CooText),
            "csv" | "dense-csv" => Ok(SpikeFormat::DenseCsv),
            other => Err(Error::invalid(format!("unknown spike format '{other}'"))),
        }
    }
}

/// A bijection on `[0, len)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; indices.len()];
        for &i in &indices {
            if i >= indices.len() || seen[i] {
                return Err(Error::invalid(format!(
                    "not a permutation of 0..{}",
                    indices.len()
                )));
            }
            seen[i] = true;
        }
        Ok(Permutation(indices))
    }

    pub fn identity(len: usize) -> Self {
        Permutation((0..len).collect())
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut v: Vec<usize> = (0..len).collect();
        v.shuffle(rng);
        Permutation(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &p) in self.0.iter().enumerate() {
            inv[p] = i;
        }
        Permutation(inv)
    }

    /// `r[n] = self[then[n]]`, so that reordering by `self` and then by `then`
    /// equals a single reorder by `self.compose(then)`.
    pub fn compose(&self, then: &Permutation) -> Result<Self> {
        if self.len() != then.len() {
            return Err(Error::dims(format!(
                "cannot compose permutations of length {} and {}",
                self.len(),
                then.len()
            )));
        }
        Ok(Permutation(then.0.iter().map(|&i| self.0[i]).collect()))
    }
}

impl std::ops::Index<usize> for Permutation {
    type Output = usize;
    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

/// Binary `N x T` raster. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeMatrix {
    n_neurons: usize,
    n_bins: usize,
    /// `offsets[n]..offsets[n + 1]` indexes neuron `n`'s bins.
    offsets: Vec<usize>,
    bins: Vec<u32>,
}

impl SpikeMatrix {
    /// Build from `(neuron, bin)` pairs. Duplicate pairs collapse to one spike.
    pub fn new<I>(n_neurons: usize, n_bins: usize, spikes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n_bins > u32::MAX as usize {
            return Err(Error::invalid("too many time bins"));
        }
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n_neurons];
        for (n, t) in spikes {
            if n >= n_neurons || t >= n_bins {
                return Err(Error::OutOfRange(format!(
                    "spike ({n}, {t}) outside {n_neurons}x{n_bins}"
                )));
            }
            rows[n].push(t as u32);
        }
        Ok(Self::from_rows(n_neurons, n_bins, rows))
    }

    pub fn empty(n_neurons: usize, n_bins: usize) -> Self {
        SpikeMatrix {
            n_neurons,
            n_bins,
            offsets: vec![0; n_neurons + 1],
            bins: Vec::new(),
        }
    }

    fn from_rows(n_neurons: usize, n_bins: usize, mut rows: Vec<Vec<u32>>) -> Self {
        let mut offsets = Vec::with_capacity(n_neurons + 1);
        let mut bins = Vec::new();
        offsets.push(0);
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            bins.extend_from_slice(row);
            offsets.push(bins.len());
        }
        SpikeMatrix {
            n_neurons,
            n_bins,
            offsets,
            bins,
        }
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Number of spikes.
    pub fn nnz(&self) -> usize {
        self.bins.len()
    }

    /// Fraction of cells that hold a spike.
    pub fn density(&self) -> f64 {
        let cells = self.n_neurons * self.n_bins;
        if cells == 0 {
            0.0
        } else {
            self.nnz() as f64 / cells as f64
        }
    }

    /// Sorted spike bins of neuron `n`.
    pub fn row(&self, n: usize) -> &[u32] {
        &self.bins[self.offsets[n]..self.offsets[n + 1]]
    }

    pub fn contains(&self, n: usize, t: usize) -> bool {
        n < self.n_neurons && self.row(n).binary_search(&(t as u32)).is_ok()
    }

    /// All spikes in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_neurons).flat_map(move |n| self.row(n).iter().map(move |&t| (n, t as usize)))
    }

    /// Row-major dense view, `N * T` bytes.
    pub fn to_dense(&self) -> Vec<u8> {
        let mut dense = vec![0u8; self.n_neurons * self.n_bins];
        for (n, t) in self.iter() {
            dense[n * self.n_bins + t] = 1;
        }
        dense
    }

    /// Total spike count per time bin.
    pub fn column_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_bins];
        for &t in &self.bins {
            counts[t as usize] += 1;
        }
        counts
    }

    /// Binary OR of two rasters of the same shape.
    pub fn union(&self, other: &SpikeMatrix) -> Result<SpikeMatrix> {
        self.check_same_shape(other)?;
        let rows = (0..self.n_neurons)
            .map(|n| {
                let mut r = self.row(n).to_vec();
                r.extend_from_slice(other.row(n));
                r
            })
            .collect();
        Ok(Self::from_rows(self.n_neurons, self.n_bins, rows))
    }

    fn check_same_shape(&self, other: &SpikeMatrix) -> Result<()> {
        if self.n_neurons != other.n_neurons || self.n_bins != other.n_bins {
            return Err(Error::dims(format!(
                "{}x{} vs {}x{}",
                self.n_neurons, self.n_bins, other.n_neurons, other.n_bins
            )));
        }
        Ok(())
    }

    /// `X'[row_perm[n], col_perm[t]] = X[n, t]`.
    pub fn permute(&self, row_perm: &Permutation, col_perm: &Permutation) -> Result<SpikeMatrix> {
        if row_perm.len() != self.n_neurons || col_perm.len() != self.n_bins {
            return Err(Error::dims(format!(
                "permutations of length {}/{} for a {}x{} matrix",
                row_perm.len(),
                col_perm.len(),
                self.n_neurons,
                self.n_bins
            )));
        }
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); self.n_neurons];
        for n in 0..self.n_neurons {
            let dst = &mut rows[row_perm[n]];
            dst.extend(self.row(n).iter().map(|&t| col_perm[t as usize] as u32));
        }
        Ok(Self::from_rows(self.n_neurons, self.n_bins, rows))
    }

    /// Row `n` of the result is row `order[n]` of `self`.
    pub fn reorder_rows(&self, order: &Permutation) -> Result<SpikeMatrix> {
        if order.len() != self.n_neurons {
            return Err(Error::dims(format!(
                "row order of length {} for {} neurons",
                order.len(),
                self.n_neurons
            )));
        }
        let rows = (0..self.n_neurons)
            .map(|n| self.row(order[n]).to_vec())
            .collect();
        Ok(Self::from_rows(self.n_neurons, self.n_bins, rows))
    }

    pub fn load(path: &Path, format: SpikeFormat) -> Result<SpikeMatrix> {
        let text = fs::read_to_string(path)?;
        match format {
            SpikeFormat::CooText => Self::parse_coo(&text),
            SpikeFormat::DenseCsv => Self::parse_dense_csv(&text),
        }
    }

    pub fn save(&self, path: &Path, format: SpikeFormat) -> Result<()> {
        let text = match format {
            SpikeFormat::CooText => self.to_coo_string(),
            SpikeFormat::DenseCsv => self.to_dense_csv_string(),
        };
        let mut f = fs::File::create(path)?;
        f.write_all(text.as_bytes())?;
        Ok(())
    }

    pub fn parse_coo(text: &str) -> Result<SpikeMatrix> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing N=<int> T=<int> header"))?;
        let (n_neurons, n_bins) = parse_dims_header(header)
            .ok_or_else(|| Error::parse(hline, format!("malformed header '{header}'")))?;
        let mut spikes = Vec::new();
        for (line, l) in lines {
            let mut it = l.split_whitespace();
            let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::parse(line, "expected 'neuron bin'"));
            };
            let n: usize = a
                .parse()
                .map_err(|_| Error::parse(line, format!("bad neuron index '{a}'")))?;
            let t: usize = b
                .parse()
                .map_err(|_| Error::parse(line, format!("bad bin index '{b}'")))?;
            if n >= n_neurons || t >= n_bins {
                return Err(Error::parse(
                    line,
                    format!("index ({n}, {t}) out of range for {n_neurons}x{n_bins}"),
                ));
            }
            spikes.push((n, t));
        }
        SpikeMatrix::new(n_neurons, n_bins, spikes)
    }

    pub fn parse_dense_csv(text: &str) -> Result<SpikeMatrix> {
        let mut declared = None;
        let mut rows: Vec<Vec<u32>> = Vec::new();
        let mut width: Option<usize> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() {
                continue;
            }
            if let Some(rest) = l.strip_prefix('#') {
                if rows.is_empty() && declared.is_none() {
                    declared = Some(parse_dims_header(rest.trim()).ok_or_else(|| {
                        Error::parse(line, format!("malformed header '{l}'"))
                    })?);
                    continue;
                }
                return Err(Error::parse(line, "unexpected comment line"));
            }
            let mut row = Vec::new();
            let mut cols = 0;
            for (t, cell) in l.split(',').enumerate() {
                match cell.trim() {
                    "1" => row.push(t as u32),
                    "0" => {}
                    other => {
                        return Err(Error::parse(
                            line,
                            format!("non-binary value '{other}' in column {t}"),
                        ))
                    }
                }
                cols += 1;
            }
            match width {
                None => width = Some(cols),
                Some(w) if w != cols => {
                    return Err(Error::parse(line, format!("expected {w} columns, found {cols}")))
                }
                _ => {}
            }
            rows.push(row);
        }
        let (n_neurons, n_bins) = match declared {
            Some((n, t)) => {
                if rows.len() != n || width.is_some_and(|w| w != t) {
                    return Err(Error::parse(
                        1,
                        format!(
                            "header declares {n}x{t} but body is {}x{}",
                            rows.len(),
                            width.unwrap_or(0)
                        ),
                    ));
                }
                (n, t)
            }
            None => (rows.len(), width.unwrap_or(0)),
        };
        Ok(Self::from_rows(n_neurons, n_bins, rows))
    }

    pub fn to_coo_string(&self) -> String {
        let mut s = String::with_capacity(16 + self.nnz() * 12);
        let _ = writeln!(s, "N={} T={}", self.n_neurons, self.n_bins);
        for (n, t) in self.iter() {
            let _ = writeln!(s, "{n} {t}");
        }
        s
    }

    pub fn to_dense_csv_string(&self) -> String {
        let mut s = String::with_capacity(16 + self.n_neurons * self.n_bins * 2);
        let _ = writeln!(s, "# N={} T={}", self.n_neurons, self.n_bins);
        let mut cells = vec![b'0'; self.n_bins];
        for n in 0..self.n_neurons {
            cells.iter_mut().for_each(|c| *c = b'0');
            for &t in self.row(n) {
                cells[t as usize] = b'1';
            }
            for (t, c) in cells.iter().enumerate() {
                if t > 0 {
                    s.push(',');
                }
                s.push(*c as char);
            }
            s.push('\n');
        }
        s
    }
}

/// Parse `N=<int> T=<int>`.
fn parse_dims_header(s: &str) -> Option<(usize, usize)> {
    let mut n = None;
    let mut t = None;
    for tok in s.split_whitespace() {
        let (k, v) = tok.split_once('=')?;
        let v: usize = v.parse().ok()?;
        match k {
            "N" => n = Some(v),
            "T" => t = Some(v),
            _ => return None,
        }
    }
    Some((n?, t?))
}
