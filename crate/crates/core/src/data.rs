//! Pooled-sample data model, group labels, and permutations.
//!
//! Observations never move once loaded. Every permutation in this crate acts
//! on the label vector only, which lets kernel matrices and other
//! data-derived caches be shared across all reference evaluations.
//!
//! Block designs built from the pooled data are label-independent but still
//! data-dependent; the restricted permutation set is therefore fixed only
//! conditionally on the pooled multiset.

use std::collections::HashSet;
use std::fmt;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// Group membership of one pooled observation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    A,
    B,
}

impl Group {
    pub fn flip(self) -> Self {
        match self {
            Group::A => Group::B,
            Group::B => Group::A,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Group::A => 'A',
            Group::B => 'B',
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Effective two-sample resolution `1/n1 + 1/n2`.
pub fn effective_resolution(n1: usize, n2: usize) -> Result<f64> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "group sizes must be positive, got ({n1}, {n2})"
        )));
    }
    Ok(1.0 / n1 as f64 + 1.0 / n2 as f64)
}

/// The N = n1 + n2 observations of both groups, stored row-major.
#[derive(Clone, Debug)]
pub struct PooledSample {
    data: Vec<f64>,
    dim: usize,
    n1: usize,
    n2: usize,
}

impl PooledSample {
    /// Build from a row-major buffer of `(n1 + n2) * dim` finite values.
    pub fn new(data: Vec<f64>, dim: usize, n1: usize, n2: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "both groups need at least one point, got ({n1}, {n2})"
            )));
        }
        let n = n1 + n2;
        if data.len() != n * dim {
            return Err(Error::InvalidArgument(format!(
                "expected {} values for {n} rows of dimension {dim}, got {}",
                n * dim,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self { data, dim, n1, n2 })
    }

    /// Univariate convenience constructor.
    pub fn from_scalars(values: Vec<f64>, n1: usize, n2: usize) -> Result<Self> {
        Self::new(values, 1, n1, n2)
    }

    /// Pool two groups given as row lists; returns the sample and the
    /// labeling with the first `a.len()` rows in group A.
    pub fn from_groups(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<(Self, LabelState)> {
        let dim = a.first().or_else(|| b.first()).map_or(0, Vec::len);
        let mut data = Vec::with_capacity((a.len() + b.len()) * dim);
        for row in a.iter().chain(b) {
            if row.len() != dim {
                return Err(Error::InvalidArgument("ragged rows".into()));
            }
            data.extend_from_slice(row);
        }
        let sample = Self::new(data, dim, a.len(), b.len())?;
        let labels = LabelState::first_n1(a.len(), b.len());
        Ok((sample, labels))
    }

    pub fn len(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n1 as f64 + 1.0 / self.n2 as f64
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Read `d` numeric columns plus a trailing `group` column (A or B).
    pub fn read_csv<R: Read>(reader: R) -> Result<(Self, LabelState)> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let ncols = headers.len();
        if ncols < 2 {
            return Err(Error::Parse {
                line: 1,
                msg: "need at least one data column and a group column".into(),
            });
        }
        if !headers[ncols - 1].eq_ignore_ascii_case("group") {
            return Err(Error::Parse {
                line: 1,
                msg: format!("last column must be `group`, found `{}`", &headers[ncols - 1]),
            });
        }
        let dim = ncols - 1;
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = k + 2;
            for c in 0..dim {
                let v: f64 = rec[c].parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("column {} is not numeric: `{}`", c + 1, &rec[c]),
                })?;
                data.push(v);
            }
            labels.push(match &rec[dim] {
                "A" | "a" => Group::A,
                "B" | "b" => Group::B,
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("group must be A or B, found `{other}`"),
                    })
                }
            });
        }
        let n1 = labels.iter().filter(|g| **g == Group::A).count();
        let n2 = labels.len() - n1;
        let sample = Self::new(data, dim, n1, n2)?;
        let labels = LabelState::new(labels, n1, n2)?;
        Ok((sample, labels))
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<(Self, LabelState)> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file)
    }
}

/// Current A/B assignment of the pooled indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabelState {
    labels: Vec<Group>,
    n1: usize,
    n2: usize,
}

impl LabelState {
    pub fn new(labels: Vec<Group>, n1: usize, n2: usize) -> Result<Self> {
        let got_a = labels.iter().filter(|g| **g == Group::A).count();
        let got_b = labels.len() - got_a;
        if got_a != n1 || got_b != n2 {
            return Err(Error::LabelCounts {
                got_a,
                got_b,
                n1,
                n2,
            });
        }
        Ok(Self { labels, n1, n2 })
    }

    /// Infer the group sizes from the labels themselves.
    pub fn from_labels(labels: Vec<Group>) -> Self {
        let n1 = labels.iter().filter(|g| **g == Group::A).count();
        let n2 = labels.len() - n1;
        Self { labels, n1, n2 }
    }

    /// First `n1` indices in A, the remaining `n2` in B.
    pub fn first_n1(n1: usize, n2: usize) -> Self {
        let mut labels = vec![Group::A; n1];
        labels.resize(n1 + n2, Group::B);
        Self { labels, n1, n2 }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn get(&self, i: usize) -> Group {
        self.labels[i]
    }

    pub fn as_slice(&self) -> &[Group] {
        &self.labels
    }

    pub fn indices_of(&self, group: Group) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, g)| **g == group)
            .map(|(i, _)| i)
    }

    pub(crate) fn check_cross_swap(&self, i: usize, j: usize) -> Result<()> {
        let n = self.len();
        for index in [i, j] {
            if index >= n {
                return Err(Error::IndexOutOfRange { index, len: n });
            }
        }
        if self.labels[i] != Group::A || self.labels[j] != Group::B {
            return Err(Error::SwapOrientation { i, j });
        }
        Ok(())
    }

    /// Exchange the labels of an A-labeled `i` and a B-labeled `j` in place.
    pub fn swap_cross(&mut self, i: usize, j: usize) -> Result<()> {
        self.check_cross_swap(i, j)?;
        self.labels[i] = Group::B;
        self.labels[j] = Group::A;
        Ok(())
    }

    /// Indices whose label differs between `self` and `other`, split into
    /// those that are A here (and B there) and those that are B here.
    pub fn diff(&self, other: &LabelState) -> (Vec<usize>, Vec<usize>) {
        let mut a_to_b = Vec::new();
        let mut b_to_a = Vec::new();
        for (k, (x, y)) in self.labels.iter().zip(&other.labels).enumerate() {
            match (x, y) {
                (Group::A, Group::B) => a_to_b.push(k),
                (Group::B, Group::A) => b_to_a.push(k),
                _ => {}
            }
        }
        (a_to_b, b_to_a)
    }
}

/// A set of disjoint cross-swaps `(i, j)`; `i` is A-labeled and `j` is
/// B-labeled in the labeling the permutation is applied to. The empty set is
/// the identity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct RestrictedPermutation {
    swaps: Vec<(usize, usize)>,
}

impl RestrictedPermutation {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(swaps: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(2 * swaps.len());
        for &(i, j) in &swaps {
            if !seen.insert(i) {
                return Err(Error::NotDisjoint(i));
            }
            if !seen.insert(j) {
                return Err(Error::NotDisjoint(j));
            }
        }
        Ok(Self { swaps })
    }

    /// Caller guarantees disjointness (used by the samplers, which produce
    /// disjoint swaps by construction).
    pub(crate) fn from_disjoint(swaps: Vec<(usize, usize)>) -> Self {
        debug_assert!(Self::new(swaps.clone()).is_ok());
        Self { swaps }
    }

    pub fn swaps(&self) -> &[(usize, usize)] {
        &self.swaps
    }

    /// Number of swaps `L`.
    pub fn len(&self) -> usize {
        self.swaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.swaps.is_empty()
    }

    /// Exchange labels across every swap; group sizes stay fixed.
    pub fn apply(&self, labels: &LabelState) -> Result<LabelState> {
        let mut out = labels.clone();
        let mut seen = HashSet::with_capacity(2 * self.swaps.len());
        for &(i, j) in &self.swaps {
            labels.check_cross_swap(i, j)?;
            if !seen.insert(i) {
                return Err(Error::NotDisjoint(i));
            }
            if !seen.insert(j) {
                return Err(Error::NotDisjoint(j));
            }
            out.labels[i] = Group::B;
            out.labels[j] = Group::A;
        }
        Ok(out)
    }

    /// The same permutation written as an explicit index mapping on `n`
    /// indices.
    pub fn to_index_permutation(&self, n: usize) -> Result<IndexPermutation> {
        let mut map: Vec<usize> = (0..n).collect();
        for &(i, j) in &self.swaps {
            for index in [i, j] {
                if index >= n {
                    return Err(Error::IndexOutOfRange { index, len: n });
                }
            }
            map.swap(i, j);
        }
        Ok(IndexPermutation { map })
    }

    /// With labels `g` in which every swap has A/B orientation, applying the
    /// same swap set to `apply(g)` returns `g`; this is the reversed set that
    /// is valid on `apply(g)`.
    pub fn reversed(&self) -> Self {
        Self {
            swaps: self.swaps.iter().map(|&(i, j)| (j, i)).collect(),
        }
    }
}

/// A general permutation of `0..n`, stored as `k -> sigma(k)`.
///
/// Acting on data, `Z_sigma = (Z_sigma(0), ..., Z_sigma(n-1))` evaluated with
/// the fixed labels is the same as relabeling index `sigma(l)` with the
/// original label of `l`; [`IndexPermutation::apply`] returns that relabeling.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexPermutation {
    map: Vec<usize>,
}

impl IndexPermutation {
    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
        }
    }

    pub fn from_map(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &k in &map {
            if k >= n {
                return Err(Error::IndexOutOfRange { index: k, len: n });
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::InvalidArgument(format!(
                    "index {k} appears twice in permutation"
                )));
            }
        }
        Ok(Self { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(k, &v)| k == v)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (k, &v) in self.map.iter().enumerate() {
            inv[v] = k;
        }
        Self { map: inv }
    }

    /// `self ∘ other`, i.e. `k -> self(other(k))`.
    pub fn compose(&self, other: &IndexPermutation) -> Self {
        assert_eq!(self.len(), other.len(), "permutation sizes differ");
        Self {
            map: other.map.iter().map(|&k| self.map[k]).collect(),
        }
    }

    /// Labels induced by the permutation: `g'(sigma(l)) = g(l)`.
    pub fn apply(&self, labels: &LabelState) -> Result<LabelState> {
        if labels.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "permutation of {} indices applied to {} labels",
                self.len(),
                labels.len()
            )));
        }
        let mut out = vec![Group::A; labels.len()];
        for (l, &target) in self.map.iter().enumerate() {
            out[target] = labels.labels[l];
        }
        Ok(LabelState {
            labels: out,
            n1: labels.n1,
            n2: labels.n2,
        })
    }
}

/// `sigma_m ∘ sigma_0^{-1}` as an explicit index mapping.
pub fn compose_with_inverse(
    perm_m: &RestrictedPermutation,
    perm_0: &RestrictedPermutation,
    n: usize,
) -> Result<IndexPermutation> {
    let m = perm_m.to_index_permutation(n)?;
    let zero_inv = perm_0.to_index_permutation(n)?.inverse();
    Ok(m.compose(&zero_inv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Group::{A, B};

    fn labels(v: &[Group]) -> LabelState {
        LabelState::from_labels(v.to_vec())
    }

    #[test]
    fn resolution_values() {
        assert_eq!(effective_resolution(32, 32).unwrap(), 0.0625);
        assert_eq!(effective_resolution(1, 1).unwrap(), 2.0);
        let h = effective_resolution(64, 192).unwrap();
        assert!((h - (1.0 / 64.0 + 1.0 / 192.0)).abs() < 1e-15);
        assert!((h - 0.020_833_333_333_333_33).abs() < 1e-15);
        assert!(matches!(
            effective_resolution(0, 3),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn sample_rejects_bad_input() {
        assert!(PooledSample::new(vec![1.0, f64::NAN], 1, 1, 1).is_err());
        assert!(PooledSample::new(vec![1.0, 2.0, 3.0], 1, 1, 1).is_err());
        assert!(PooledSample::new(vec![1.0], 1, 1, 0).is_err());
        assert!(PooledSample::new(vec![], 0, 1, 1).is_err());
    }

    #[test]
    fn apply_permutation_examples() {
        let g = labels(&[A, A, B, B]);
        assert_eq!(RestrictedPermutation::identity().apply(&g).unwrap(), g);
        let one = RestrictedPermutation::new(vec![(0, 2)]).unwrap();
        assert_eq!(one.apply(&g).unwrap().as_slice(), &[B, A, A, B]);
        let two = RestrictedPermutation::new(vec![(0, 2), (1, 3)]).unwrap();
        assert_eq!(two.apply(&g).unwrap().as_slice(), &[B, B, A, A]);
    }

    #[test]
    fn apply_permutation_errors() {
        let g = labels(&[A, A, B, B]);
        let wrong = RestrictedPermutation::new(vec![(2, 0)]).unwrap();
        assert!(matches!(
            wrong.apply(&g),
            Err(Error::SwapOrientation { i: 2, j: 0 })
        ));
        assert!(matches!(
            RestrictedPermutation::new(vec![(0, 2), (0, 3)]),
            Err(Error::NotDisjoint(0))
        ));
    }

    #[test]
    fn applying_reversed_set_undoes_permutation() {
        let g = labels(&[A, B, A, B, A, B]);
        let p = RestrictedPermutation::new(vec![(0, 1), (4, 3)]).unwrap();
        let moved = p.apply(&g).unwrap();
        assert_eq!(p.reversed().apply(&moved).unwrap(), g);
        // as an index permutation it is an involution
        let ip = p.to_index_permutation(6).unwrap();
        assert!(ip.compose(&ip).is_identity());
        assert_eq!(ip.apply(&ip.apply(&g).unwrap()).unwrap(), g);
    }

    #[test]
    fn compose_examples() {
        let id = RestrictedPermutation::identity();
        assert!(compose_with_inverse(&id, &id, 4).unwrap().is_identity());

        let s = RestrictedPermutation::new(vec![(0, 2), (1, 3)]).unwrap();
        assert!(compose_with_inverse(&s, &s, 4).unwrap().is_identity());

        let m = RestrictedPermutation::new(vec![(0, 2)]).unwrap();
        let z = RestrictedPermutation::new(vec![(1, 3)]).unwrap();
        let c = compose_with_inverse(&m, &z, 4).unwrap();
        assert_eq!(c.as_slice(), &[2, 3, 0, 1]);
    }

    #[test]
    fn index_permutation_preserves_counts() {
        let g = labels(&[A, A, A, B, B]);
        let p = IndexPermutation::from_map(vec![4, 0, 1, 2, 3]).unwrap();
        let out = p.apply(&g).unwrap();
        assert_eq!(out.as_slice(), &[A, A, B, B, A]);
        assert_eq!(out.n1(), 3);
        assert!(IndexPermutation::from_map(vec![0, 0, 1]).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let text = "x,y,group\n1,2,A\n3,4,B\n5,6,A\n";
        let (s, g) = PooledSample::read_csv(text.as_bytes()).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!((s.n1(), s.n2()), (2, 1));
        assert_eq!(s.row(1), &[3.0, 4.0]);
        assert_eq!(g.as_slice(), &[A, B, A]);

        assert!(PooledSample::read_csv("x,label\n1,A\n".as_bytes()).is_err());
        assert!(PooledSample::read_csv("x,group\n1,C\n2,A\n".as_bytes()).is_err());
        assert!(PooledSample::read_csv("x,group\nfoo,A\n2,B\n".as_bytes()).is_err());
        assert!(PooledSample::read_csv("x,group\n1,A\n2,A\n".as_bytes()).is_err());
    }
}
