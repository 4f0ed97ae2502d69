use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::separation::SeparationDist;

/// Leaf counts up to this are stored densely.
pub const DENSE_MAX_LEAVES: usize = 3;

#[derive(Clone, Debug, PartialEq)]
enum Cells {
    Dense(Vec<f64>),
    Sparse(BTreeMap<u64, f64>),
}

/// Joint law of the separations observed at the leaves, each axis over
/// `1..=n3`. Mass that fell outside the table is kept as `overflow`.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafJointDist {
    leaves: Vec<usize>,
    n3: usize,
    cells: Cells,
    overflow: f64,
    renormalized_from: Option<f64>,
}

impl LeafJointDist {
    pub fn zeros(leaves: Vec<usize>, n3: usize) -> Self {
        let cells = if leaves.len() <= DENSE_MAX_LEAVES {
            Cells::Dense(vec![0.0; n3.pow(leaves.len() as u32)])
        } else {
            Cells::Sparse(BTreeMap::new())
        };
        Self {
            leaves,
            n3,
            cells,
            overflow: 0.0,
            renormalized_from: None,
        }
    }

    pub fn from_separation(leaf: usize, sep: &SeparationDist, n3: usize) -> Self {
        let mut out = Self::zeros(vec![leaf], n3);
        for s in 1..=n3 {
            let v = sep.get(s);
            if v != 0.0 {
                out.add((s - 1) as u64, v);
            }
        }
        out.overflow = (1.0 - out.total()).max(0.0);
        out
    }

    /// All mass on one separation vector.
    pub fn point(leaves: Vec<usize>, n3: usize, at: &[usize]) -> Result<Self> {
        let mut out = Self::zeros(leaves, n3);
        let code = out.encode(at)?;
        out.add(code, 1.0);
        Ok(out)
    }

    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn kappa(&self) -> usize {
        self.leaves.len()
    }

    pub fn n3(&self) -> usize {
        self.n3
    }

    /// Mass outside the table: truncation leakage for analytic laws, samples
    /// beyond `n3` for empirical ones.
    pub fn overflow(&self) -> f64 {
        self.overflow
    }

    pub(crate) fn set_overflow(&mut self, v: f64) {
        self.overflow = v.max(0.0);
    }

    pub fn renormalized_from(&self) -> Option<f64> {
        self.renormalized_from
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.cells, Cells::Dense(_))
    }

    /// Flat cell index of a separation vector (first leaf most significant).
    pub fn encode(&self, at: &[usize]) -> Result<u64> {
        if at.len() != self.kappa() {
            return Err(Error::Usage(format!(
                "expected {} separations, got {}",
                self.kappa(),
                at.len()
            )));
        }
        let mut code = 0u64;
        for &s in at {
            if s < 1 || s > self.n3 {
                return Err(Error::Domain(format!("separation {s} outside 1..={}", self.n3)));
            }
            code = code * self.n3 as u64 + (s - 1) as u64;
        }
        Ok(code)
    }

    pub fn decode(&self, mut code: u64) -> Vec<usize> {
        let mut out = vec![0; self.kappa()];
        for slot in out.iter_mut().rev() {
            *slot = (code % self.n3 as u64) as usize + 1;
            code /= self.n3 as u64;
        }
        out
    }

    pub fn get(&self, at: &[usize]) -> f64 {
        match self.encode(at) {
            Ok(code) => self.get_code(code),
            Err(_) => 0.0,
        }
    }

    pub(crate) fn get_code(&self, code: u64) -> f64 {
        match &self.cells {
            Cells::Dense(v) => v.get(code as usize).copied().unwrap_or(0.0),
            Cells::Sparse(m) => m.get(&code).copied().unwrap_or(0.0),
        }
    }

    pub(crate) fn add(&mut self, code: u64, v: f64) {
        match &mut self.cells {
            Cells::Dense(d) => d[code as usize] += v,
            Cells::Sparse(m) => *m.entry(code).or_insert(0.0) += v,
        }
    }

    /// Non-zero cells in increasing code order.
    pub fn cells(&self) -> Vec<(u64, f64)> {
        match &self.cells {
            Cells::Dense(v) => v
                .iter()
                .enumerate()
                .filter(|(_, &p)| p != 0.0)
                .map(|(i, &p)| (i as u64, p))
                .collect(),
            Cells::Sparse(m) => m.iter().filter(|(_, &p)| p != 0.0).map(|(&c, &p)| (c, p)).collect(),
        }
    }

    pub(crate) fn dense_cells(&self) -> Option<&[f64]> {
        match &self.cells {
            Cells::Dense(v) => Some(v),
            Cells::Sparse(_) => None,
        }
    }

    /// Number of cells in the truncated support, `n3^κ`.
    pub fn support_size(&self) -> f64 {
        (self.n3 as f64).powi(self.kappa() as i32)
    }

    pub fn total(&self) -> f64 {
        match &self.cells {
            Cells::Dense(v) => v.iter().sum(),
            Cells::Sparse(m) => m.values().sum(),
        }
    }

    /// `self += w * other`; both must share leaves and `n3`.
    pub fn add_scaled(&mut self, w: f64, other: &LeafJointDist) -> Result<()> {
        self.check_shape(other)?;
        match (&mut self.cells, &other.cells) {
            (Cells::Dense(a), Cells::Dense(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += w * y;
                }
            }
            _ => {
                for (c, v) in other.cells() {
                    self.add(c, w * v);
                }
            }
        }
        self.overflow += w * other.overflow;
        Ok(())
    }

    pub fn scale(&mut self, w: f64) {
        match &mut self.cells {
            Cells::Dense(v) => v.iter_mut().for_each(|x| *x *= w),
            Cells::Sparse(m) => m.values_mut().for_each(|x| *x *= w),
        }
        self.overflow *= w;
    }

    pub(crate) fn check_shape(&self, other: &LeafJointDist) -> Result<()> {
        if self.leaves != other.leaves || self.n3 != other.n3 {
            return Err(Error::Usage(format!(
                "leaf tables differ in shape: leaves {:?}/{:?}, n3 {}/{}",
                self.leaves, other.leaves, self.n3, other.n3
            )));
        }
        Ok(())
    }

    /// `self += w * (parts[0] ⊗ parts[1] ⊗ ...)`; the parts' leaves,
    /// concatenated, must equal `self`'s.
    pub(crate) fn add_product(&mut self, w: f64, parts: &[&LeafJointDist]) {
        let mut multipliers = Vec::with_capacity(parts.len());
        let mut after = 0u32;
        for p in parts.iter().rev() {
            multipliers.push((self.n3 as u64).pow(after));
            after += p.kappa() as u32;
        }
        multipliers.reverse();
        let lists: Vec<Vec<(u64, f64)>> = parts.iter().map(|p| p.cells()).collect();
        self.product_rec(&lists, &multipliers, 0, 0, w);
    }

    fn product_rec(&mut self, lists: &[Vec<(u64, f64)>], mult: &[u64], k: usize, code: u64, w: f64) {
        if k == lists.len() {
            self.add(code, w);
            return;
        }
        for &(c, v) in &lists[k] {
            self.product_rec(lists, mult, k + 1, code + c * mult[k], w * v);
        }
    }

    /// Same law with axes listed in `order` (a permutation of the leaves).
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order == self.leaves.as_slice() {
            return Ok(self.clone());
        }
        let positions: Vec<usize> = order
            .iter()
            .map(|id| {
                self.leaves
                    .iter()
                    .position(|x| x == id)
                    .ok_or_else(|| Error::Usage(format!("leaf {id} not in table")))
            })
            .collect::<Result<_>>()?;
        if positions.len() != self.kappa() {
            return Err(Error::Usage("leaf order must be a permutation".into()));
        }
        let mut out = Self::zeros(order.to_vec(), self.n3);
        for (c, v) in self.cells() {
            let s = self.decode(c);
            let t: Vec<usize> = positions.iter().map(|&p| s[p]).collect();
            let code = out.encode(&t)?;
            out.add(code, v);
        }
        out.overflow = self.overflow;
        out.renormalized_from = self.renormalized_from;
        Ok(out)
    }

    /// Law of one leaf's separation.
    pub fn marginal(&self, axis: usize) -> SeparationDist {
        let mut mass = vec![0.0; self.n3];
        for (c, v) in self.cells() {
            mass[self.decode(c)[axis] - 1] += v;
        }
        let total: f64 = mass.iter().sum();
        SeparationDist::from_parts(mass, 1.0 - total)
    }

    /// Single-leaf tables as a separation distribution.
    pub fn to_separation(&self) -> Result<SeparationDist> {
        if self.kappa() != 1 {
            return Err(Error::Usage(format!("{} leaves, expected one", self.kappa())));
        }
        Ok(self.marginal(0))
    }

    /// Rescales to unit total, recording the previous total.
    pub fn renormalize(mut self) -> Self {
        let total = self.total();
        if total > 0.0 {
            self.scale(1.0 / total);
            self.overflow = 0.0;
            if total < 1.0 {
                log::debug!("renormalized leaf joint distribution by 1/{total}");
            }
        }
        self.renormalized_from = Some(total);
        self
    }

    pub fn tv_distance(&self, other: &LeafJointDist) -> Result<f64> {
        self.check_shape(other)?;
        if let (Some(a), Some(b)) = (self.dense_cells(), other.dense_cells()) {
            return Ok(0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>());
        }
        let mut diff: BTreeMap<u64, f64> = self.cells().into_iter().collect();
        for (c, v) in other.cells() {
            *diff.entry(c).or_insert(0.0) -= v;
        }
        Ok(0.5 * diff.values().map(|v| v.abs()).sum::<f64>())
    }

    /// `leaf_<id>,...,probability` rows for non-zero cells.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::new();
        for (k, id) in self.leaves.iter().enumerate() {
            match names.get(k) {
                Some(n) => out.push_str(n),
                None => out.push_str(&format!("leaf_{id}")),
            }
            out.push(',');
        }
        out.push_str("probability\n");
        for (c, v) in self.cells() {
            for s in self.decode(c) {
                out.push_str(&format!("{s},"));
            }
            out.push_str(&format!("{v}\n"));
        }
        out
    }
}
