use std::collections::HashMap;

/// Entries above this many slots go into a hash map instead of a dense array.
const DENSE_LIMIT: usize = 1 << 22;

/// Memo over `(node, t, r)` for one station.
#[derive(Clone, Debug)]
pub(crate) enum Store<T> {
    Dense { data: Vec<T>, tn: usize, rn: usize },
    Sparse { data: HashMap<(u32, u32, u32), T> },
}

impl<T: Copy + Default> Store<T> {
    pub fn new(nodes: usize, tn: usize, rn: usize) -> Self {
        let size = nodes.saturating_mul(tn).saturating_mul(rn);
        if size <= DENSE_LIMIT {
            Store::Dense {
                data: vec![T::default(); size],
                tn,
                rn,
            }
        } else {
            Store::Sparse { data: HashMap::new() }
        }
    }

    pub fn get(&self, node: usize, t: usize, r: usize) -> T {
        match self {
            Store::Dense { data, tn, rn } => data[(node * tn + t) * rn + r],
            Store::Sparse { data, .. } => data
                .get(&(node as u32, t as u32, r as u32))
                .copied()
                .unwrap_or_default(),
        }
    }

    pub fn set(&mut self, node: usize, t: usize, r: usize, value: T) {
        match self {
            Store::Dense { data, tn, rn } => data[(node * *tn + t) * *rn + r] = value,
            Store::Sparse { data, .. } => {
                data.insert((node as u32, t as u32, r as u32), value);
            }
        }
    }

    #[cfg(test)]
    pub fn is_dense(&self) -> bool {
        matches!(self, Store::Dense { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_and_sparse_agree() {
        let mut dense: Store<f64> = Store::new(3, 4, 5);
        let mut sparse: Store<f64> = Store::new(1 << 12, 1 << 6, 1 << 6);
        assert!(dense.is_dense());
        assert!(!sparse.is_dense());
        dense.set(2, 3, 4, 0.5);
        sparse.set(2, 3, 4, 0.5);
        assert_eq!(dense.get(2, 3, 4), 0.5);
        assert_eq!(sparse.get(2, 3, 4), 0.5);
        assert_eq!(sparse.get(1, 1, 1), 0.0);
    }
}
