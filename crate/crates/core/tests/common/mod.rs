//! Brute-force reference implementations over plain row vectors.
#![allow(dead_code)]

use std::collections::HashMap;

use idtrace_core::{Attribute, AttributeSchema, Observation, Universe, MISSING};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct RawTable {
    pub rows: Vec<Vec<u16>>,
    pub k: Vec<usize>,
}

impl RawTable {
    pub fn random<R: Rng>(
        rng: &mut R,
        n: usize,
        m: usize,
        max_k: usize,
        missing_rate: f64,
    ) -> Self {
        let k: Vec<usize> = (0..m).map(|_| rng.gen_range(1..=max_k)).collect();
        let rows = (0..n)
            .map(|_| {
                k.iter()
                    .map(|&ki| {
                        if missing_rate > 0.0 && rng.gen_bool(missing_rate) {
                            MISSING
                        } else {
                            rng.gen_range(0..ki) as u16
                        }
                    })
                    .collect()
            })
            .collect();
        Self { rows, k }
    }

    /// Codes in the universe equal the raw codes.
    pub fn universe(&self) -> Universe {
        let attributes = self
            .k
            .iter()
            .enumerate()
            .map(|(id, &k)| Attribute {
                id,
                name: format!("a{id}"),
                values: (0..k).map(|v| format!("v{v}")).collect(),
            })
            .collect();
        let schema = AttributeSchema::new(attributes).unwrap();
        let ids = (0..self.rows.len()).map(|i| format!("o{i}")).collect();
        let cells = self.rows.iter().flatten().copied().collect();
        Universe::from_parts(schema, ids, cells).unwrap()
    }

    pub fn m(&self) -> usize {
        self.k.len()
    }

    pub fn scan(&self, base: &[usize], obs: &[Observation]) -> Vec<usize> {
        base.iter()
            .copied()
            .filter(|&i| obs.iter().all(|o| self.rows[i][o.attribute] == o.value))
            .collect()
    }

    pub fn all(&self) -> Vec<usize> {
        (0..self.rows.len()).collect()
    }

    pub fn tally(&self, base: &[usize], attr: usize) -> HashMap<u16, usize> {
        let mut counts = HashMap::new();
        for &i in base {
            *counts.entry(self.rows[i][attr]).or_insert(0) += 1;
        }
        counts
    }

    /// `-sum p log2 p` over non-missing values, summed term by term.
    pub fn category_entropy(&self, base: &[usize], attr: usize) -> Option<f64> {
        let counts = self.tally(base, attr);
        let present: usize = counts
            .iter()
            .filter(|(&v, _)| v != MISSING)
            .map(|(_, &c)| c)
            .sum();
        if present == 0 {
            return None;
        }
        let mut h = 0.0;
        for (&v, &c) in &counts {
            if v == MISSING {
                continue;
            }
            let p = c as f64 / present as f64;
            h -= p * p.log2();
        }
        Some(h.max(0.0))
    }

    /// Does filtering `base` by the target's values on `attrs` leave only the target?
    pub fn identifies(&self, base: &[usize], target: usize, attrs: &[usize]) -> bool {
        let obs: Vec<Observation> = attrs
            .iter()
            .map(|&a| Observation::new(a, self.rows[target][a]))
            .collect();
        self.scan(base, &obs) == vec![target]
    }

    /// Core sets by checking every subset and every proper subset of it.
    pub fn core_sets(&self, base: &[usize], target: usize, max_size: usize) -> Vec<Vec<usize>> {
        let m = self.m();
        let mut out = Vec::new();
        for mask in 0u32..(1 << m) {
            let attrs: Vec<usize> = (0..m).filter(|a| mask & (1 << a) != 0).collect();
            if attrs.len() > max_size || attrs.iter().any(|&a| self.rows[target][a] == MISSING) {
                continue;
            }
            if !self.identifies(base, target, &attrs) {
                continue;
            }
            let minimal = (0..mask).filter(|sub| sub & !mask == 0).all(|sub| {
                let sub_attrs: Vec<usize> = (0..m).filter(|a| sub & (1 << a) != 0).collect();
                !self.identifies(base, target, &sub_attrs)
            });
            if minimal {
                out.push(attrs);
            }
        }
        out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        out
    }
}

/// Observations copied from a random row on a random subset of attributes.
pub fn observed_subset<R: Rng>(rng: &mut R, table: &RawTable, max_len: usize) -> Vec<Observation> {
    let row = &table.rows[rng.gen_range(0..table.rows.len())];
    let mut attrs: Vec<usize> = (0..table.m()).collect();
    let len = rng.gen_range(1..=max_len.min(attrs.len()));
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let a = attrs.swap_remove(rng.gen_range(0..attrs.len()));
        if row[a] != MISSING {
            out.push(Observation::new(a, row[a]));
        }
        if attrs.is_empty() {
            break;
        }
    }
    out
}

/// All permutations of `items` (Heap's algorithm).
pub fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    fn heap<T: Clone>(k: usize, a: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        heap(k - 1, a, out);
        for i in 0..k - 1 {
            if k % 2 == 0 {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut a = items.to_vec();
    let mut out = Vec::new();
    heap(a.len(), &mut a, &mut out);
    out
}
