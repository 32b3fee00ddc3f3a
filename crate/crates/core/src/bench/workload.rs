use crate::error::{domain, Result};
use crate::hashmaps::hash64;
use crate::primitives::{Key, RESERVED_KEY};
use crate::shard::{Op, OpKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::str::FromStr;

/// Operation percentages. Set workloads use add/find/del, queue workloads
/// push/pop.
#[derive(Clone, Debug, PartialEq)]
pub struct Mix {
    parts: Vec<(OpKind, f64)>,
}

impl Mix {
    pub fn set(add: f64, find: f64, del: f64) -> Result<Mix> {
        Mix::new(vec![(OpKind::Add, add), (OpKind::Find, find), (OpKind::Del, del)])
    }

    pub fn queue(push: f64, pop: f64) -> Result<Mix> {
        Mix::new(vec![(OpKind::Push, push), (OpKind::Pop, pop)])
    }

    fn new(parts: Vec<(OpKind, f64)>) -> Result<Mix> {
        if parts.iter().any(|&(_, p)| !p.is_finite() || p < 0.0) {
            return Err(domain("mix percentages must be finite and non-negative"));
        }
        let sum: f64 = parts.iter().map(|&(_, p)| p).sum();
        if (sum - 100.0).abs() > 1e-9 {
            return Err(domain(format!("mix sums to {sum}, not 100")));
        }
        Ok(Mix { parts })
    }

    pub fn is_queue(&self) -> bool {
        self.parts[0].0 == OpKind::Push
    }

    pub fn parts(&self) -> &[(OpKind, f64)] {
        &self.parts
    }

    /// Reinterprets a set mix `push:pop[:0]` as a queue mix.
    pub fn as_queue(&self) -> Result<Mix> {
        if self.is_queue() {
            return Ok(self.clone());
        }
        if self.parts[2].1 != 0.0 {
            return Err(domain("queue mixes have two parts, push:pop"));
        }
        Mix::queue(self.parts[0].1, self.parts[1].1)
    }

    /// Per-kind counts for `total` operations by largest remainder, ties
    /// going to the earlier kind.
    pub fn apportion(&self, total: u64) -> Vec<(OpKind, u64)> {
        let exact: Vec<f64> = self.parts.iter().map(|&(_, p)| p * total as f64 / 100.0).collect();
        let mut counts: Vec<u64> = exact.iter().map(|e| e.floor() as u64).collect();
        let mut left = total - counts.iter().sum::<u64>();
        let mut order: Vec<usize> = (0..exact.len()).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        self.parts.iter().map(|&(k, _)| k).zip(counts).collect()
    }
}

impl FromStr for Mix {
    type Err = crate::Error;

    /// `add:find:del` or `push:pop`.
    fn from_str(s: &str) -> Result<Mix> {
        let nums = s
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| domain(format!("bad mix component {p:?}"))))
            .collect::<Result<Vec<_>>>()?;
        match nums[..] {
            [a, f, d] => Mix::set(a, f, d),
            [push, pop] => Mix::queue(push, pop),
            _ => Err(domain(format!("mix {s:?} needs two or three parts"))),
        }
    }
}

impl fmt::Display for Mix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.parts.iter().map(|(_, p)| p.to_string()).collect();
        f.write_str(&parts.join(":"))
    }
}

/// Scrambled key for draw `i`: never the reserved key.
#[inline]
pub fn scrambled_key(seed: u64, i: u64) -> Key {
    hash64(seed ^ hash64(i)).min(RESERVED_KEY - 1)
}

/// Deterministic stream of `total` operations. Kinds follow the mix exactly
/// up to rounding and are shuffled; keys are scrambled draws from
/// `0..key_space`.
pub fn gen_workload(mix: &Mix, total: u64, key_space: u64, seed: u64) -> Result<Vec<Op>> {
    if key_space == 0 {
        return Err(domain("key space must be non-empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kinds = Vec::with_capacity(total as usize);
    for (kind, n) in mix.apportion(total) {
        kinds.extend(std::iter::repeat_n(kind, n as usize));
    }
    for i in (1..kinds.len()).rev() {
        let j = rng.gen_range(0..=i as u64) as usize;
        kinds.swap(i, j);
    }
    Ok(kinds
        .into_iter()
        .map(|kind| {
            let key = if kind == OpKind::Pop { 0 } else { scrambled_key(seed, rng.gen_range(0..key_space)) };
            Op { kind, key }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let m = Mix::set(50.0, 50.0, 0.0).unwrap();
        assert_eq!(gen_workload(&m, 1_000, 500, 7).unwrap(), gen_workload(&m, 1_000, 500, 7).unwrap());
        assert_ne!(gen_workload(&m, 1_000, 500, 7).unwrap(), gen_workload(&m, 1_000, 500, 8).unwrap());
    }

    #[test]
    fn fifty_fifty_exact() {
        let m: Mix = "50:50:0".parse().unwrap();
        let ops = gen_workload(&m, 10_000, 10_000, 1).unwrap();
        assert_eq!(ops.iter().filter(|o| o.kind == OpKind::Add).count(), 5_000);
        assert_eq!(ops.iter().filter(|o| o.kind == OpKind::Find).count(), 5_000);
    }

    #[test]
    fn one_percent_deletion() {
        let m: Mix = "49.5:49.5:1".parse().unwrap();
        assert_eq!(m.apportion(100_000), vec![(OpKind::Add, 49_500), (OpKind::Find, 49_500), (OpKind::Del, 1_000)]);
        // 3 ops: 1.485 / 1.485 / 0.03 floors to 1/1/0, the leftover goes to the
        // largest remainder (first kind on a tie).
        assert_eq!(m.apportion(3), vec![(OpKind::Add, 2), (OpKind::Find, 1), (OpKind::Del, 0)]);
    }

    #[test]
    fn bad_mixes_rejected() {
        assert!("50:40:0".parse::<Mix>().is_err());
        assert!("50:x:50".parse::<Mix>().is_err());
        assert!("100".parse::<Mix>().is_err());
        assert!(Mix::set(-1.0, 101.0, 0.0).is_err());
        assert!("50:50:0".parse::<Mix>().unwrap().as_queue().unwrap().is_queue());
        assert!("50:40:10".parse::<Mix>().unwrap().as_queue().is_err());
    }

    #[test]
    fn keys_avoid_the_reserved_value() {
        let m: Mix = "50:50".parse().unwrap();
        let ops = gen_workload(&m, 5_000, 100, 3).unwrap();
        assert!(ops.iter().all(|o| o.key != RESERVED_KEY));
        assert!(ops.iter().filter(|o| o.kind == OpKind::Pop).all(|o| o.key == 0));
    }
}
