//! The training set: every simulation performed during a run, with
//! radius-bounded nearest-neighbor retrieval under a caller-supplied metric.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// One archived simulation result.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub record_id: u64,
    pub generation: u64,
    /// One-based realization index the value was simulated on.
    pub realization_id: u32,
    pub value: f64,
    pub point: Vec<f64>,
}

/// Records selected for a query, ascending by distance, ties by record id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeighborSet<'a> {
    pub entries: Vec<(&'a EvaluationRecord, f64)>,
}

impl<'a> NeighborSet<'a> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Archive {
    records: Vec<EvaluationRecord>,
    next_id: u64,
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a simulation result and returns its record id. Repeated
    /// `(point, realization)` pairs are stored as separate records.
    pub fn insert(
        &mut self,
        point: &[f64],
        realization_id: u32,
        value: f64,
        generation: u64,
    ) -> Result<u64> {
        if !value.is_finite() {
            return Err(Error::NonFiniteValue(value));
        }
        if realization_id == 0 {
            return Err(invalid("realization ids are one-based"));
        }
        let id = self.next_id;
        self.records.push(EvaluationRecord {
            record_id: id,
            generation,
            realization_id,
            value,
            point: point.to_vec(),
        });
        self.next_id += 1;
        Ok(id)
    }

    /// Re-inserts a previously dumped record, preserving its id. Ids must
    /// arrive in strictly increasing order.
    pub fn restore(&mut self, record: EvaluationRecord) -> Result<()> {
        if !self.records.is_empty() && record.record_id < self.next_id {
            return Err(invalid("record ids must be strictly increasing"));
        }
        if !record.value.is_finite() {
            return Err(Error::NonFiniteValue(record.value));
        }
        if record.realization_id == 0 {
            return Err(invalid("realization ids are one-based"));
        }
        self.next_id = record.record_id + 1;
        self.records.push(record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Total simulations recorded since construction.
    pub fn count_simulations(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn records(&self) -> &[EvaluationRecord] {
        &self.records
    }

    /// At most `n_max` records with `distance(query, record) <= d_max`,
    /// closest first. Exhaustive scan: the metric changes every generation, so
    /// no spatial index would stay valid.
    pub fn nearest_within<F>(
        &self,
        query: &[f64],
        mut distance: F,
        d_max: f64,
        n_max: usize,
    ) -> Result<NeighborSet<'_>>
    where
        F: FnMut(&[f64], &[f64]) -> f64,
    {
        self.nearest_by(|r| distance(query, &r.point), d_max, n_max)
    }

    /// Same selection as [`Archive::nearest_within`] with the distance to the
    /// query supplied per record, which lets callers cache transformed points.
    pub fn nearest_by<F>(
        &self,
        mut distance_to: F,
        d_max: f64,
        n_max: usize,
    ) -> Result<NeighborSet<'_>>
    where
        F: FnMut(&EvaluationRecord) -> f64,
    {
        if !(d_max > 0.0) {
            return Err(invalid("selection distance must be positive"));
        }
        if n_max == 0 {
            return Err(invalid("neighbor limit must be at least 1"));
        }
        let mut entries: Vec<(&EvaluationRecord, f64)> = self
            .records
            .iter()
            .filter_map(|r| {
                let d = distance_to(r);
                (d <= d_max).then_some((r, d))
            })
            .collect();
        let order = |a: &(&EvaluationRecord, f64), b: &(&EvaluationRecord, f64)| {
            a.1.total_cmp(&b.1).then(a.0.record_id.cmp(&b.0.record_id))
        };
        if entries.len() > n_max {
            entries.select_nth_unstable_by(n_max - 1, order);
            entries.truncate(n_max);
        }
        entries.sort_unstable_by(order);
        Ok(NeighborSet { entries })
    }
}
