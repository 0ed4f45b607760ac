//! Fixed-capacity experience replay with uniform and disjoint sampling,
//! plus a flat little-endian dump format.
//!
//! Dump layout: magic `DRRB`, version `u32`, capacity `u64`, count `u64`,
//! obs_dim `u32`, action_dim `u32`, then `count` records of
//! `obs f64 x obs_dim, action f64 x action_dim, reward f64,
//! next_obs f64 x obs_dim, done u8, truncated u8`, oldest first.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
    pub truncated: bool,
}

impl Transition {
    /// `obs ++ action`, the input row of every `(s, a)` network.
    pub fn state_action(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.obs.len() + self.action.len());
        x.extend_from_slice(&self.obs);
        x.extend_from_slice(&self.action);
        x
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    action_dim: usize,
    storage: Vec<Transition>,
    write_index: usize,
}

const MAGIC: &[u8; 4] = b"DRRB";
const VERSION: u32 = 1;

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, action_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            obs_dim,
            action_dim,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            write_index: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn write_index(&self) -> usize {
        self.write_index
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// Raw slot access; slots are not in insertion order once wrapped.
    pub fn get(&self, slot: usize) -> Option<&Transition> {
        self.storage.get(slot)
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.obs.len() != self.obs_dim
            || t.next_obs.len() != self.obs_dim
            || t.action.len() != self.action_dim
        {
            return Err(Error::Usage(format!(
                "transition dims ({}, {}, {}) do not match buffer ({}, {})",
                t.obs.len(),
                t.action.len(),
                t.next_obs.len(),
                self.obs_dim,
                self.action_dim
            )));
        }
        if !t.reward.is_finite() {
            return Err(Error::Usage("transition reward is not finite".into()));
        }
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.write_index] = t;
        }
        self.write_index = (self.write_index + 1) % self.capacity;
        Ok(())
    }

    /// Stored transitions from oldest to newest.
    pub fn iter_chronological(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() < self.capacity {
            0
        } else {
            self.write_index
        };
        self.storage[split..].iter().chain(&self.storage[..split])
    }

    /// Uniform draw with replacement; returns slot indices.
    pub fn sample_indices<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<usize>> {
        if self.storage.is_empty() {
            return Err(Error::InsufficientData {
                needed: 1,
                available: 0,
            });
        }
        if n == 0 {
            return Err(Error::Usage("batch size must be at least 1".into()));
        }
        let len = self.storage.len();
        Ok((0..n).map(|_| rng.random_range(0..len)).collect())
    }

    pub fn sample_batch<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<&Transition>> {
        Ok(self.resolve(&self.sample_indices(rng, n)?))
    }

    /// Two batches drawn without replacement from distinct slots.
    pub fn sample_disjoint_indices<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        n_model: usize,
        n_ac: usize,
    ) -> Result<(Vec<usize>, Vec<usize>)> {
        if n_model == 0 || n_ac == 0 {
            return Err(Error::Usage("batch sizes must be at least 1".into()));
        }
        let needed = n_model + n_ac;
        if self.storage.len() < needed {
            return Err(Error::InsufficientData {
                needed,
                available: self.storage.len(),
            });
        }
        let mut all = index::sample(rng, self.storage.len(), needed).into_vec();
        let ac = all.split_off(n_model);
        Ok((all, ac))
    }

    /// `n` distinct slots drawn without replacement.
    pub fn sample_distinct_indices<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<usize>> {
        if n == 0 {
            return Err(Error::Usage("batch size must be at least 1".into()));
        }
        if self.storage.len() < n {
            return Err(Error::InsufficientData {
                needed: n,
                available: self.storage.len(),
            });
        }
        Ok(index::sample(rng, self.storage.len(), n).into_vec())
    }

    pub fn sample_disjoint_pair<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        n_model: usize,
        n_ac: usize,
    ) -> Result<(Vec<&Transition>, Vec<&Transition>)> {
        let (m, a) = self.sample_disjoint_indices(rng, n_model, n_ac)?;
        Ok((self.resolve(&m), self.resolve(&a)))
    }

    pub fn resolve(&self, slots: &[usize]) -> Vec<&Transition> {
        slots.iter().map(|&i| &self.storage[i]).collect()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.capacity as u64).to_le_bytes())?;
        w.write_all(&(self.storage.len() as u64).to_le_bytes())?;
        w.write_all(&(self.obs_dim as u32).to_le_bytes())?;
        w.write_all(&(self.action_dim as u32).to_le_bytes())?;
        for t in self.iter_chronological() {
            for x in t.obs.iter().chain(&t.action).chain([&t.reward]).chain(&t.next_obs) {
                w.write_all(&x.to_le_bytes())?;
            }
            w.write_all(&[t.done as u8, t.truncated as u8])?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let fmt = |d: &str| Error::Format {
            path: "<replay dump>".into(),
            detail: d.into(),
        };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| fmt("truncated header"))?;
        if &magic != MAGIC {
            return Err(fmt("bad magic"));
        }
        let version = read_u32(&mut r).ok_or_else(|| fmt("truncated header"))?;
        if version != VERSION {
            return Err(fmt(&format!("unsupported version {version}")));
        }
        let capacity = read_u64(&mut r).ok_or_else(|| fmt("truncated header"))? as usize;
        let count = read_u64(&mut r).ok_or_else(|| fmt("truncated header"))? as usize;
        let obs_dim = read_u32(&mut r).ok_or_else(|| fmt("truncated header"))? as usize;
        let action_dim = read_u32(&mut r).ok_or_else(|| fmt("truncated header"))? as usize;
        if count > capacity {
            return Err(fmt("count exceeds capacity"));
        }
        let mut buf = ReplayBuffer::new(capacity, obs_dim, action_dim)?;
        let vec = |n: usize, r: &mut R| -> Result<Vec<f64>> {
            (0..n)
                .map(|_| read_f64(r).ok_or_else(|| fmt("truncated record")))
                .collect()
        };
        for _ in 0..count {
            let obs = vec(obs_dim, &mut r)?;
            let action = vec(action_dim, &mut r)?;
            let reward = vec(1, &mut r)?[0];
            let next_obs = vec(obs_dim, &mut r)?;
            let mut flags = [0u8; 2];
            r.read_exact(&mut flags).map_err(|_| fmt("truncated record"))?;
            buf.push(Transition {
                obs,
                action,
                reward,
                next_obs,
                done: flags[0] != 0,
                truncated: flags[1] != 0,
            })?;
        }
        Ok(buf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f)).map_err(|e| match e {
            Error::Format { detail, .. } => Error::Format {
                path: path.display().to_string(),
                detail,
            },
            other => other,
        })
    }
}

fn read_u32<R: Read>(r: &mut R) -> Option<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).ok()?;
    Some(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Option<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).ok()?;
    Some(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Option<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).ok()?;
    Some(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    fn t(id: f64) -> Transition {
        Transition {
            obs: vec![id],
            action: vec![0.0],
            reward: id,
            next_obs: vec![id + 1.0],
            done: false,
            truncated: false,
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(2, 1, 1).unwrap();
        for i in 1..=3 {
            b.push(t(i as f64)).unwrap();
        }
        let ids: Vec<f64> = b.iter_chronological().map(|x| x.reward).collect();
        assert_eq!(ids, vec![2.0, 3.0]);
    }

    #[test]
    fn single_push_counts_one() {
        let mut b = ReplayBuffer::new(10, 1, 1).unwrap();
        b.push(t(0.0)).unwrap();
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn full_buffer_wraps_write_index() {
        let mut b = ReplayBuffer::new(10_000, 1, 1).unwrap();
        for i in 0..10_000 {
            b.push(t(i as f64)).unwrap();
        }
        assert_eq!(b.len(), 10_000);
        assert_eq!(b.write_index(), 0);
    }

    #[test]
    fn wrong_dims_rejected() {
        let mut b = ReplayBuffer::new(4, 2, 1).unwrap();
        assert!(matches!(b.push(t(0.0)), Err(Error::Usage(_))));
    }

    #[test]
    fn single_element_sampled_repeatedly() {
        let mut b = ReplayBuffer::new(4, 1, 1).unwrap();
        b.push(t(5.0)).unwrap();
        let batch = b.sample_batch(&mut from_seed(0), 4).unwrap();
        assert_eq!(batch.len(), 4);
        assert!(batch.iter().all(|x| x.reward == 5.0));
    }

    #[test]
    fn uniform_frequencies() {
        let mut b = ReplayBuffer::new(100, 1, 1).unwrap();
        for i in 0..100 {
            b.push(t(i as f64)).unwrap();
        }
        let mut counts = [0usize; 100];
        let mut rng = from_seed(123);
        for _ in 0..100_000 {
            counts[b.sample_indices(&mut rng, 1).unwrap()[0]] += 1;
        }
        assert!(counts.iter().all(|&c| (700..=1300).contains(&c)), "{counts:?}");
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let mut b = ReplayBuffer::new(50, 1, 1).unwrap();
        for i in 0..50 {
            b.push(t(i as f64)).unwrap();
        }
        let a = b.sample_indices(&mut from_seed(9), 32).unwrap();
        let c = b.sample_indices(&mut from_seed(9), 32).unwrap();
        assert_eq!(a, c);
        let d1 = b.sample_disjoint_indices(&mut from_seed(9), 10, 20).unwrap();
        let d2 = b.sample_disjoint_indices(&mut from_seed(9), 10, 20).unwrap();
        assert_eq!(d1, d2);
    }

    #[test]
    fn empty_buffer_sample_errors() {
        let b = ReplayBuffer::new(4, 1, 1).unwrap();
        assert!(b.sample_batch(&mut from_seed(0), 1).is_err());
    }

    #[test]
    fn disjoint_pair_exact_partition_and_boundary() {
        let mut b = ReplayBuffer::new(16, 1, 1).unwrap();
        for i in 0..12 {
            b.push(t(i as f64)).unwrap();
        }
        let (m, a) = b.sample_disjoint_indices(&mut from_seed(1), 5, 7).unwrap();
        let mut all: Vec<usize> = m.iter().chain(&a).copied().collect();
        all.sort();
        assert_eq!(all, (0..12).collect::<Vec<_>>());
        assert!(matches!(
            b.sample_disjoint_indices(&mut from_seed(1), 6, 7),
            Err(Error::InsufficientData { needed: 13, available: 12 })
        ));
    }

    #[test]
    fn dump_layout_and_round_trip() {
        let mut b = ReplayBuffer::new(3, 1, 1).unwrap();
        for i in 0..5 {
            let mut x = t(i as f64);
            x.done = i == 4;
            x.truncated = i == 3;
            b.push(x).unwrap();
        }
        let mut bytes = Vec::new();
        b.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"DRRB");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), 32 + 3 * (4 * 8 + 2));
        // first record is the oldest surviving transition, id 2
        assert_eq!(f64::from_le_bytes(bytes[32..40].try_into().unwrap()), 2.0);
        let back = ReplayBuffer::read_from(&bytes[..]).unwrap();
        let x: Vec<_> = back.iter_chronological().cloned().collect();
        let y: Vec<_> = b.iter_chronological().cloned().collect();
        assert_eq!(x, y);
        assert!(ReplayBuffer::read_from(&bytes[..40]).is_err());
    }
}
