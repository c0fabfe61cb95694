//! Label-skew partitioning controlled by a similarity parameter `pi`.
//!
//! Client `k` is assigned home class `k mod C`. It first draws
//! `round((1 - pi) * |shard|)` samples of its home class, then fills the rest
//! of its shard from the pool left over after every client took its home
//! samples. The pool is dealt in proportionally interleaved class order, so
//! each client's shared portion mirrors the class mix of the pool (and can
//! include the home class). `pi = 1` gives an IID split with equal class
//! counts; `pi = 0` gives single-label shards.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use super::{DataError, Dataset};
use crate::rng::rng_from_seed;

/// What to do when a client's home class runs out of samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShortfallPolicy {
    /// Fill the missing home draws from the currently most plentiful class and
    /// record the substitution.
    #[default]
    FillFromLargest,
    /// Fail with [`DataError::HomeLabelShortfall`].
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub clients: usize,
    pub pi: f64,
    pub seed: u64,
    #[serde(default)]
    pub shortfall: ShortfallPolicy,
}

impl PartitionSpec {
    pub fn new(clients: usize, pi: f64, seed: u64) -> Self {
        PartitionSpec {
            clients,
            pi,
            seed,
            shortfall: ShortfallPolicy::default(),
        }
    }
}

/// One client's local data.
#[derive(Debug, Clone)]
pub struct ClientShard {
    pub client_id: usize,
    pub dataset: Dataset,
    /// `q_k = D_k / D`.
    pub weight: f64,
    pub home_label: usize,
    /// Samples drawn in the home-class phase.
    pub home_count: usize,
    /// Row indices into the partitioned dataset.
    pub indices: Vec<usize>,
}

impl ClientShard {
    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }

    /// Wraps a whole dataset as the only client.
    pub fn single(dataset: Dataset) -> Self {
        let n = dataset.len();
        ClientShard {
            client_id: 0,
            dataset,
            weight: 1.0,
            home_label: 0,
            home_count: 0,
            indices: (0..n).collect(),
        }
    }
}

/// Home draws that had to come from another class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Substitution {
    pub client_id: usize,
    pub home_label: usize,
    pub substituted_class: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardManifestEntry {
    pub client_id: usize,
    pub size: usize,
    pub home_label: usize,
    pub class_histogram: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Partition {
    pub shards: Vec<ClientShard>,
    pub substitutions: Vec<Substitution>,
}

impl Partition {
    pub fn manifest(&self) -> Vec<ShardManifestEntry> {
        self.shards
            .iter()
            .map(|s| ShardManifestEntry {
                client_id: s.client_id,
                size: s.len(),
                home_label: s.home_label,
                class_histogram: s.dataset.class_counts(),
            })
            .collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.shards.iter().map(|s| s.weight).collect()
    }
}

pub fn partition_heterogeneous(ds: &Dataset, spec: &PartitionSpec) -> Result<Partition, DataError> {
    let k_clients = spec.clients;
    if k_clients == 0 {
        return Err(DataError::InvalidArgument("client count must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&spec.pi) {
        return Err(DataError::InvalidArgument(format!(
            "pi must lie in [0, 1], got {}",
            spec.pi
        )));
    }
    let n = ds.len();
    if n < k_clients {
        return Err(DataError::InvalidArgument(format!(
            "{n} samples cannot cover {k_clients} clients"
        )));
    }
    let n_classes = ds.n_classes();
    let mut rng = rng_from_seed(spec.seed);

    let mut pools: Vec<VecDeque<usize>> = {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
        for i in 0..n {
            by_class[ds.label(i)].push(i);
        }
        by_class
            .into_iter()
            .map(|mut v| {
                v.shuffle(&mut rng);
                v.into()
            })
            .collect()
    };

    let sizes: Vec<usize> = (0..k_clients)
        .map(|k| n / k_clients + usize::from(k < n % k_clients))
        .collect();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k_clients];
    let mut home_counts = vec![0usize; k_clients];
    let mut substitutions = Vec::new();

    for k in 0..k_clients {
        let home = k % n_classes;
        let quota = ((1.0 - spec.pi) * sizes[k] as f64).round() as usize;
        let available = pools[home].len();
        let take = quota.min(available);
        members[k].extend(pools[home].drain(..take));
        home_counts[k] = take;
        if take < quota {
            if spec.shortfall == ShortfallPolicy::Error {
                return Err(DataError::HomeLabelShortfall {
                    class: home,
                    client: k,
                    needed: quota,
                    available,
                });
            }
            let mut filled = vec![0usize; n_classes];
            for _ in take..quota {
                // Most plentiful class, lowest id on ties.
                let (c, _) = pools
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)))
                    .expect("at least one class");
                let idx = pools[c].pop_front().expect("pool holds the remaining samples");
                members[k].push(idx);
                filled[c] += 1;
            }
            for (c, count) in filled.into_iter().enumerate().filter(|(_, n)| *n > 0) {
                log::warn!(
                    "client {k}: home class {home} exhausted, substituted {count} samples of class {c}"
                );
                substitutions.push(Substitution {
                    client_id: k,
                    home_label: home,
                    substituted_class: c,
                    count,
                });
            }
        }
    }

    let shared = interleave_proportionally(&pools);
    let mut cursor = 0;
    for k in 0..k_clients {
        let need = sizes[k] - members[k].len();
        members[k].extend_from_slice(&shared[cursor..cursor + need]);
        cursor += need;
    }
    debug_assert_eq!(cursor, shared.len());

    let shards = members
        .into_iter()
        .enumerate()
        .map(|(k, idx)| ClientShard {
            client_id: k,
            dataset: ds.subset(&idx),
            weight: idx.len() as f64 / n as f64,
            home_label: k % n_classes,
            home_count: home_counts[k],
            indices: idx,
        })
        .collect();
    Ok(Partition {
        shards,
        substitutions,
    })
}

/// Orders the pooled samples so that every contiguous window has a class mix
/// close to the pool's: the `j`-th sample of a class with `n_c` members is
/// placed at key `(j + 0.5) / n_c`.
fn interleave_proportionally(pools: &[VecDeque<usize>]) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize, usize)> = Vec::new();
    for (c, pool) in pools.iter().enumerate() {
        let len = pool.len() as f64;
        for (j, &idx) in pool.iter().enumerate() {
            keyed.push(((j as f64 + 0.5) / len, c, idx));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, _, idx)| idx).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::gen_synthetic_classification;

    fn balanced(n: usize, c: usize) -> Dataset {
        gen_synthetic_classification(n, 2, c, 1.0, 42).unwrap()
    }

    #[test]
    fn iid_split_has_equal_class_counts() {
        let ds = balanced(90, 3);
        let p = partition_heterogeneous(&ds, &PartitionSpec::new(3, 1.0, 5)).unwrap();
        for s in &p.shards {
            let h = s.dataset.class_counts();
            assert!(h.iter().max().unwrap() - h.iter().min().unwrap() <= 1, "{h:?}");
        }
    }

    #[test]
    fn pi_zero_gives_single_label_shards() {
        let ds = balanced(40, 2);
        let p = partition_heterogeneous(&ds, &PartitionSpec::new(2, 0.0, 5)).unwrap();
        for s in &p.shards {
            let h = s.dataset.class_counts();
            assert_eq!(h[s.home_label], s.len());
        }
    }

    #[test]
    fn home_fraction_matches_pi() {
        let ds = gen_synthetic_classification(3000, 4, 10, 1.0, 8).unwrap();
        let p = partition_heterogeneous(&ds, &PartitionSpec::new(30, 0.5, 1)).unwrap();
        for s in &p.shards {
            let frac = s.home_count as f64 / s.len() as f64;
            assert!((frac - 0.5).abs() <= 1.0 / s.len() as f64);
        }
        assert!(p.substitutions.is_empty());
    }

    #[test]
    fn shortfall_fills_or_errors() {
        // Three clients share home class 0 under K = 3, C = 2 with pi = 0.
        let ds = balanced(60, 2);
        let p = partition_heterogeneous(&ds, &PartitionSpec::new(3, 0.0, 2)).unwrap();
        assert!(!p.substitutions.is_empty());
        assert_eq!(p.shards.iter().map(|s| s.len()).sum::<usize>(), 60);

        let strict = PartitionSpec {
            shortfall: ShortfallPolicy::Error,
            ..PartitionSpec::new(3, 0.0, 2)
        };
        match partition_heterogeneous(&ds, &strict) {
            Err(DataError::HomeLabelShortfall { class, .. }) => assert_eq!(class, 0),
            other => panic!("expected shortfall, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let ds = balanced(10, 2);
        assert!(partition_heterogeneous(&ds, &PartitionSpec::new(0, 0.5, 0)).is_err());
        assert!(partition_heterogeneous(&ds, &PartitionSpec::new(11, 0.5, 0)).is_err());
        assert!(partition_heterogeneous(&ds, &PartitionSpec::new(2, 1.5, 0)).is_err());
    }

    #[test]
    fn manifest_serializes() {
        let ds = balanced(30, 3);
        let p = partition_heterogeneous(&ds, &PartitionSpec::new(3, 0.5, 0)).unwrap();
        let json = serde_json::to_string(&p.manifest()).unwrap();
        assert!(json.contains("\"class_histogram\""));
        assert!(json.contains("\"home_label\""));
    }
}
