use crate::error::{Error, Result};
use crate::morphology::RadialProfile;
use crate::scalar::Scalar;

/// One profile per row, all of equal length, with a map id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileMatrix<T> {
    ids: Vec<String>,
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> ProfileMatrix<T> {
    pub fn new(ids: Vec<String>, rows: Vec<Vec<T>>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::argument(format!("{} ids for {} rows", ids.len(), rows.len())));
        }
        let dim = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || dim == 0 {
            return Err(Error::argument("profile matrix needs at least one non-empty row"));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::shape(format!("profile row {} ({})", i, ids[i]), &[dim], &[r.len()]));
        }
        Ok(ProfileMatrix {
            ids,
            dim,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Rows with generated ids `row-00000`, `row-00001`, ...
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| format!("row-{i:05}")).collect();
        Self::new(ids, rows)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim)
    }

    /// Each row divided by its maximum (rows with zero maximum unchanged).
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(self.dim) {
            let max = row.iter().copied().fold(T::zero(), T::max);
            if max > T::zero() {
                row.iter_mut().for_each(|v| *v /= max);
            }
        }
        out
    }
}

impl ProfileMatrix<f64> {
    pub fn from_profiles(ids: Vec<String>, profiles: &[RadialProfile]) -> Result<Self> {
        Self::new(ids, profiles.iter().map(|p| p.values.clone()).collect())
    }
}
