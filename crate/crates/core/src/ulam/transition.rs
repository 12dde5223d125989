use rand::Rng as _;
use rayon::prelude::*;
use std::io::{Read, Write};

use super::partition::Partition;
use crate::dynamics::collide;
use crate::error::{Error, Result};
use crate::geometry::Table;
use crate::rng;

/// Largest tolerated fraction of grazing draws.
pub const MAX_DISCARD_FRACTION: f64 = 0.01;

const MAGIC: &[u8; 8] = b"ULAMTD01";

/// One tally: `count` samples of the source cell landed in `target` with
/// displacement `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Tally {
    pub target: u32,
    pub f: [i8; 2],
    pub count: u32,
}

/// Monte Carlo image statistics of every Ulam cell. One simulation serves all
/// twists: `M(w)_ij = Σ_F tally(i, F | j) e^{i<w,F>} / samples_per_cell`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionData {
    partition: Partition,
    samples_per_cell: u32,
    seed: u64,
    table_hash: u64,
    grazing_discards: u64,
    col_ptr: Vec<usize>,
    tallies: Vec<Tally>,
}

fn simulate_cell(table: &Table, partition: &Partition, cell: usize, samples: u32, seed: u64) -> Result<(Vec<Tally>, u64)> {
    let mut r = rng::stream(seed, rng::TAG_TRANSITION, cell as u64);
    let mut hits: Vec<(u32, [i8; 2])> = Vec::with_capacity(samples as usize);
    let mut discards = 0u64;
    while hits.len() < samples as usize {
        let x = partition.sample_in_cell(cell, &mut r);
        match collide(table, &x) {
            Ok(s) => hits.push((partition.cell_of(&s.next) as u32, s.displacement)),
            Err(Error::GrazingCollision { .. }) => {
                discards += 1;
                if discards > u64::from(samples) {
                    return Err(Error::TooManyDiscards { fraction: 0.5 });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok((aggregate(hits), discards))
}

fn aggregate(mut hits: Vec<(u32, [i8; 2])>) -> Vec<Tally> {
    hits.sort_unstable();
    let mut out: Vec<Tally> = Vec::new();
    for (target, f) in hits {
        match out.last_mut() {
            Some(t) if t.target == target && t.f == f => t.count += 1,
            _ => out.push(Tally { target, f, count: 1 }),
        }
    }
    out
}

impl TransitionData {
    /// Samples `samples_per_cell` points of `μ` in each cell and records where
    /// `T` sends them. Per-cell streams make the result independent of the
    /// thread count.
    pub fn build(table: &Table, partition: &Partition, samples_per_cell: u32, seed: u64) -> Result<Self> {
        if samples_per_cell == 0 {
            return Err(Error::InvalidArgument("samples_per_cell must be at least 1".into()));
        }
        if partition.radii().len() != table.discs().len() {
            return Err(Error::InvalidArgument("partition does not match the table".into()));
        }
        let cols: Vec<(Vec<Tally>, u64)> = (0..partition.n_cells())
            .into_par_iter()
            .map(|cell| simulate_cell(table, partition, cell, samples_per_cell, seed))
            .collect::<Result<_>>()?;
        let grazing_discards: u64 = cols.iter().map(|c| c.1).sum();
        let total = partition.n_cells() as f64 * f64::from(samples_per_cell);
        let fraction = grazing_discards as f64 / (total + grazing_discards as f64);
        if fraction > MAX_DISCARD_FRACTION {
            return Err(Error::TooManyDiscards { fraction });
        }
        Ok(Self::from_columns(
            partition.clone(),
            samples_per_cell,
            seed,
            table.geometry_hash(),
            grazing_discards,
            cols.into_iter().map(|c| c.0),
        ))
    }

    fn from_columns(
        partition: Partition,
        samples_per_cell: u32,
        seed: u64,
        table_hash: u64,
        grazing_discards: u64,
        cols: impl Iterator<Item = Vec<Tally>>,
    ) -> Self {
        let mut col_ptr = vec![0];
        let mut tallies = Vec::new();
        for c in cols {
            tallies.extend(c);
            col_ptr.push(tallies.len());
        }
        TransitionData {
            partition,
            samples_per_cell,
            seed,
            table_hash,
            grazing_discards,
            col_ptr,
            tallies,
        }
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn samples_per_cell(&self) -> u32 {
        self.samples_per_cell
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn table_hash(&self) -> u64 {
        self.table_hash
    }

    pub fn grazing_discards(&self) -> u64 {
        self.grazing_discards
    }

    pub fn n_cells(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.tallies.len()
    }

    /// Tallies of source cell `j`, sorted by `(target, F)`.
    pub fn column(&self, j: usize) -> &[Tally] {
        &self.tallies[self.col_ptr[j]..self.col_ptr[j + 1]]
    }

    pub fn total_count(&self) -> u64 {
        self.tallies.iter().map(|t| u64::from(t.count)).sum()
    }

    pub fn max_displacement(&self) -> i32 {
        self.tallies
            .iter()
            .map(|t| i32::from(t.f[0].abs().max(t.f[1].abs())))
            .max()
            .unwrap_or(0)
    }

    /// Multinomial resample of every column; used for bootstrap error bars.
    pub fn bootstrap(&self, replicate: u64) -> TransitionData {
        let n = self.samples_per_cell;
        let cols = (0..self.n_cells()).into_par_iter().map(|j| {
            let mut r = rng::stream(self.seed ^ replicate.rotate_left(32), rng::TAG_BOOTSTRAP, j as u64);
            let col = self.column(j);
            let mut cum = Vec::with_capacity(col.len());
            let mut acc = 0u32;
            for t in col {
                acc += t.count;
                cum.push(acc);
            }
            let mut counts = vec![0u32; col.len()];
            for _ in 0..n {
                let u = r.random_range(0..n);
                let idx = cum.partition_point(|&c| c <= u);
                counts[idx] += 1;
            }
            col.iter()
                .zip(counts)
                .filter(|(_, c)| *c > 0)
                .map(|(t, count)| Tally { count, ..*t })
                .collect::<Vec<_>>()
        });
        let cols: Vec<Vec<Tally>> = cols.collect();
        Self::from_columns(
            self.partition.clone(),
            n,
            self.seed,
            self.table_hash,
            self.grazing_discards,
            cols.into_iter(),
        )
    }

    /// Little-endian container: magic, table hash, partition dims and radii,
    /// samples per cell, seed, grazing discards, then per cell an entry count
    /// followed by `(target: u32, F1: i8, F2: i8, count: u32)` records.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&self.table_hash.to_le_bytes())?;
        let p = &self.partition;
        w.write_all(&(p.radii().len() as u32).to_le_bytes())?;
        w.write_all(&(p.n_phi() as u32).to_le_bytes())?;
        w.write_all(&(p.n_s() as u32).to_le_bytes())?;
        for r in p.radii() {
            w.write_all(&r.to_le_bytes())?;
        }
        w.write_all(&self.samples_per_cell.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.grazing_discards.to_le_bytes())?;
        for j in 0..self.n_cells() {
            let col = self.column(j);
            w.write_all(&(col.len() as u32).to_le_bytes())?;
            for t in col {
                w.write_all(&t.target.to_le_bytes())?;
                w.write_all(&[t.f[0] as u8, t.f[1] as u8])?;
                w.write_all(&t.count.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
            let mut buf = [0u8; N];
            r.read_exact(&mut buf)
                .map_err(|e| Error::Container(format!("truncated input: {e}")))?;
            Ok(buf)
        }
        let magic: [u8; 8] = take(&mut r)?;
        if &magic != MAGIC {
            return Err(Error::Container("bad magic".into()));
        }
        let table_hash = u64::from_le_bytes(take(&mut r)?);
        let n_obst = u32::from_le_bytes(take(&mut r)?) as usize;
        let n_phi = u32::from_le_bytes(take(&mut r)?) as usize;
        let n_s = u32::from_le_bytes(take(&mut r)?) as usize;
        if n_obst == 0 || n_obst > 1024 {
            return Err(Error::Container(format!("implausible obstacle count {n_obst}")));
        }
        let radii = (0..n_obst)
            .map(|_| take(&mut r).map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        let partition = Partition::from_radii(radii, n_phi, n_s).map_err(|e| Error::Container(e.to_string()))?;
        let samples_per_cell = u32::from_le_bytes(take(&mut r)?);
        let seed = u64::from_le_bytes(take(&mut r)?);
        let grazing_discards = u64::from_le_bytes(take(&mut r)?);
        let n_cells = partition.n_cells();
        let mut cols = Vec::with_capacity(n_cells);
        for j in 0..n_cells {
            let len = u32::from_le_bytes(take(&mut r)?) as usize;
            let mut col = Vec::with_capacity(len.min(1 << 16));
            let mut sum = 0u64;
            for _ in 0..len {
                let target = u32::from_le_bytes(take(&mut r)?);
                let [f1, f2]: [u8; 2] = take(&mut r)?;
                let count = u32::from_le_bytes(take(&mut r)?);
                if target as usize >= n_cells {
                    return Err(Error::Container(format!("cell {j}: target {target} out of range")));
                }
                sum += u64::from(count);
                col.push(Tally { target, f: [f1 as i8, f2 as i8], count });
            }
            if sum != u64::from(samples_per_cell) {
                return Err(Error::Container(format!("cell {j}: tallies sum to {sum}")));
            }
            cols.push(col);
        }
        Ok(Self::from_columns(partition, samples_per_cell, seed, table_hash, grazing_discards, cols.into_iter()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::reference_table;

    fn small() -> TransitionData {
        let t = reference_table();
        let p = Partition::new(&t, 12, 10).unwrap();
        TransitionData::build(&t, &p, 50, 7).unwrap()
    }

    #[test]
    fn tallies_sum_per_cell() {
        let td = small();
        assert_eq!(td.total_count(), 2 * 12 * 10 * 50);
        for j in 0..td.n_cells() {
            let s: u32 = td.column(j).iter().map(|t| t.count).sum();
            assert_eq!(s, 50);
        }
        assert!(td.max_displacement() <= reference_table().tau_max().ceil() as i32 + 1);
    }

    #[test]
    fn build_is_deterministic() {
        assert_eq!(small(), small());
    }

    #[test]
    fn container_round_trip_and_corruption() {
        let td = small();
        let mut buf = Vec::new();
        td.write_to(&mut buf).unwrap();
        let back = TransitionData::read_from(&buf[..]).unwrap();
        assert_eq!(td, back);
        assert!(TransitionData::read_from(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(TransitionData::read_from(&bad[..]).is_err());
    }

    #[test]
    fn bootstrap_preserves_column_totals() {
        let td = small();
        let b = td.bootstrap(3);
        assert_eq!(b.total_count(), td.total_count());
        assert_ne!(b, td);
        for j in 0..b.n_cells() {
            let s: u32 = b.column(j).iter().map(|t| t.count).sum();
            assert_eq!(s, 50);
        }
    }

    #[test]
    fn zero_samples_rejected() {
        let t = reference_table();
        let p = Partition::new(&t, 2, 2).unwrap();
        assert!(TransitionData::build(&t, &p, 0, 0).is_err());
    }
}
