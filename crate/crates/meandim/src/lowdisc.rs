//! Sobol' low-discrepancy points with ingested direction numbers, nested
//! uniform (Owen) scrambling, and midpoint-rule grids.
//!
//! Direction numbers are read from the published Joe–Kuo text layout
//! (`d s a m_1 .. m_s`, one record per dimension starting at d = 2).
//! Dimension 1 is the van der Corput column and needs no file entry.
//!
//! Scrambling is a full nested uniform scramble: every bit of every
//! coordinate is flipped according to a keyed counter-based hash of the
//! bit-path prefix above it, so points sharing a dyadic prefix share the
//! permutation below it.  Output is deterministic in (batch, seed).

use std::io::BufRead;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LowdiscError {
    #[error("direction file line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("direction file has no records")]
    NoRecords,
    #[error("direction file line {line}: expected dimension {expected}, found {found}")]
    DimensionGap {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("requested dimension {requested} exceeds table maximum {max_dim}")]
    DimensionTooLarge { requested: usize, max_dim: usize },
    #[error("point count {0} is not a power of two in [1, 2^32]")]
    BadPointCount(u64),
    #[error("midpoint grid requires n >= 1")]
    EmptyGrid,
    #[error("batch has no Sobol' integer lattice to scramble")]
    NotScrambleable,
    #[error("io error reading direction file: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-dimension Sobol' direction integers, 32-bit precision.
pub struct DirectionTable {
    // dirs[j][k] = v_{j+1, k+1} as a 32-bit fixed point fraction
    dirs: Vec<[u32; 32]>,
}

impl DirectionTable {
    pub fn max_dim(&self) -> usize {
        self.dirs.len()
    }

}

/// Parse a Joe–Kuo style direction-number stream.
///
/// Records are `d s a m_1 .. m_s`, sorted by d with the first data record at
/// d = 2.  An optional header line starting with a non-digit is skipped.
/// Parsing is strict: odd m_i with m_i < 2^i are required, dimensions must be
/// contiguous.
pub fn load_direction_table<R: BufRead>(reader: R) -> Result<DirectionTable, LowdiscError> {
    let mut dirs: Vec<[u32; 32]> = Vec::new();
    // dimension 1: van der Corput, v_k = 2^(32-k)
    let mut vdc = [0u32; 32];
    for (k, v) in vdc.iter_mut().enumerate() {
        *v = 1u32 << (31 - k);
    }
    dirs.push(vdc);

    let mut expected_dim = 2usize;
    let mut saw_record = false;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if !trimmed.chars().next().unwrap().is_ascii_digit() {
            if !saw_record && line_no == 1 {
                continue; // header
            }
            return Err(LowdiscError::MalformedRecord {
                line: line_no,
                reason: "non-numeric record".into(),
            });
        }
        let fields: Vec<u64> = trimmed
            .split_whitespace()
            .map(|f| {
                f.parse::<u64>().map_err(|_| LowdiscError::MalformedRecord {
                    line: line_no,
                    reason: format!("bad integer {f:?}"),
                })
            })
            .collect::<Result<_, _>>()?;
        if fields.len() < 3 {
            return Err(LowdiscError::MalformedRecord {
                line: line_no,
                reason: "record needs at least d, s, a".into(),
            });
        }
        let (d, s, a) = (fields[0] as usize, fields[1] as usize, fields[2] as u32);
        if d != expected_dim {
            return Err(LowdiscError::DimensionGap {
                line: line_no,
                expected: expected_dim,
                found: d,
            });
        }
        if s == 0 || s > 31 {
            return Err(LowdiscError::MalformedRecord {
                line: line_no,
                reason: format!("degree s = {s} out of range"),
            });
        }
        if fields.len() != 3 + s {
            return Err(LowdiscError::MalformedRecord {
                line: line_no,
                reason: format!("expected {s} initial direction integers", s = s),
            });
        }
        let mut v = [0u32; 32];
        for i in 0..s.min(32) {
            let m = fields[3 + i];
            if m % 2 == 0 {
                return Err(LowdiscError::MalformedRecord {
                    line: line_no,
                    reason: format!("m_{} = {m} is even", i + 1),
                });
            }
            if m >= (1u64 << (i + 1)) {
                return Err(LowdiscError::MalformedRecord {
                    line: line_no,
                    reason: format!("m_{} = {m} is not below 2^{}", i + 1, i + 1),
                });
            }
            v[i] = (m as u32) << (31 - i);
        }
        // standard recurrence for k > s
        for k in s..32 {
            let mut acc = v[k - s] ^ (v[k - s] >> s);
            for i in 1..s {
                if (a >> (s - 1 - i)) & 1 == 1 {
                    acc ^= v[k - i];
                }
            }
            v[k] = acc;
        }
        dirs.push(v);
        expected_dim += 1;
        saw_record = true;
    }
    if !saw_record {
        return Err(LowdiscError::NoRecords);
    }
    Ok(DirectionTable { dirs })
}

/// A block of points in the unit cube.  Sobol' batches retain their 32-bit
/// integer lattice so they can be scrambled; midpoint grids do not.
pub struct PointBatch {
    pub n: usize,
    pub dim: usize,
    /// n x dim, row-major, every value strictly inside (0,1)
    pub values: Vec<f64>,
    pub replicate_id: u64,
    pub scramble_seed: Option<u64>,
    pub(crate) ints: Option<Vec<u32>>,
}

impl PointBatch {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim + j]
    }
}

// Exact-zero coordinates are pushed to 2^-33 so downstream quantile
// transforms always see open-interval inputs.
pub(crate) fn int_to_unit(x: u32) -> f64 {
    if x == 0 {
        0.5f64.powi(33)
    } else {
        (x as f64) * 0.5f64.powi(32)
    }
}

fn check_pow2(n: u64) -> Result<u32, LowdiscError> {
    if n == 0 || !n.is_power_of_two() || n > (1u64 << 32) {
        return Err(LowdiscError::BadPointCount(n));
    }
    Ok(n.trailing_zeros())
}

/// First n points of the Sobol' sequence in `dim` dimensions, Gray-code
/// order.  Point 0 is all zeros before the in-(0,1) adjustment.
pub fn sobol_points(
    table: &DirectionTable,
    n: usize,
    dim: usize,
) -> Result<PointBatch, LowdiscError> {
    check_pow2(n as u64)?;
    if dim == 0 || dim > table.max_dim() {
        return Err(LowdiscError::DimensionTooLarge {
            requested: dim,
            max_dim: table.max_dim(),
        });
    }
    let mut ints = vec![0u32; n * dim];
    let mut state = vec![0u32; dim];
    for i in 1..n {
        let bit = (i as u32).trailing_zeros() as usize;
        for (j, s) in state.iter_mut().enumerate() {
            *s ^= table.dirs[j][bit];
            ints[i * dim + j] = *s;
        }
    }
    let values = ints.iter().map(|&x| int_to_unit(x)).collect();
    Ok(PointBatch {
        n,
        dim,
        values,
        replicate_id: 0,
        scramble_seed: None,
        ints: Some(ints),
    })
}

// splitmix64 finalizer; the counter-based hash underlying the scramble
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Per-coordinate scramble key derived from (seed, dimension index).
pub(crate) fn scramble_key(seed: u64, dim_index: usize) -> u64 {
    mix64(seed ^ mix64(0x5ca1ab1e ^ dim_index as u64))
}

/// Nested uniform scramble of a single 32-bit coordinate.  Bit k (from the
/// top) is flipped by a hash of the path prefix above it, so the flip is
/// shared by all points in the same dyadic interval at depth k.
pub(crate) fn scramble_u32(key: u64, x: u32) -> u32 {
    let mut out = 0u32;
    for k in 0..32u32 {
        let prefix = if k == 0 { 0 } else { x >> (32 - k) };
        // 1-prepended prefix is unique across depths
        let node = (1u64 << k) | prefix as u64;
        let flip = (mix64(key ^ node.wrapping_mul(0x9e3779b97f4a7c15)) & 1) as u32;
        let bit = (x >> (31 - k)) & 1;
        out = (out << 1) | (bit ^ flip);
    }
    out
}

/// Owen-scramble an unscrambled Sobol' batch.  Deterministic in
/// (batch, seed); preserves the base-2 net structure of the input.
pub fn owen_scramble(batch: &PointBatch, seed: u64) -> Result<PointBatch, LowdiscError> {
    let ints = batch.ints.as_ref().ok_or(LowdiscError::NotScrambleable)?;
    let keys: Vec<u64> = (0..batch.dim).map(|j| scramble_key(seed, j)).collect();
    let mut out_ints = vec![0u32; ints.len()];
    for i in 0..batch.n {
        for j in 0..batch.dim {
            out_ints[i * batch.dim + j] = scramble_u32(keys[j], ints[i * batch.dim + j]);
        }
    }
    let values = out_ints.iter().map(|&x| int_to_unit(x)).collect();
    Ok(PointBatch {
        n: batch.n,
        dim: batch.dim,
        values,
        replicate_id: batch.replicate_id,
        scramble_seed: Some(seed),
        ints: Some(out_ints),
    })
}

/// One-dimensional midpoint grid: (i + 0.5)/n for i = 0..n-1.
pub fn midpoint_grid(n: usize) -> Result<PointBatch, LowdiscError> {
    if n == 0 {
        return Err(LowdiscError::EmptyGrid);
    }
    let values = (0..n).map(|i| ((i as f64) + 0.5) / (n as f64)).collect();
    Ok(PointBatch {
        n,
        dim: 1,
        values,
        replicate_id: 0,
        scramble_seed: None,
        ints: None,
    })
}

/// Streaming Sobol' generator: yields one (optionally scrambled) point at a
/// time without materializing the batch.  Used by the high-dimensional
/// estimators where n x dim would not fit comfortably in memory.
pub struct SobolStream<'a> {
    table: &'a DirectionTable,
    dim: usize,
    state: Vec<u32>,
    index: u64,
    n: u64,
    keys: Option<Vec<u64>>,
}

impl<'a> SobolStream<'a> {
    pub fn new(
        table: &'a DirectionTable,
        n: usize,
        dim: usize,
        scramble_seed: Option<u64>,
    ) -> Result<Self, LowdiscError> {
        check_pow2(n as u64)?;
        if dim == 0 || dim > table.max_dim() {
            return Err(LowdiscError::DimensionTooLarge {
                requested: dim,
                max_dim: table.max_dim(),
            });
        }
        let keys = scramble_seed.map(|s| (0..dim).map(|j| scramble_key(s, j)).collect());
        Ok(Self {
            table,
            dim,
            state: vec![0u32; dim],
            index: 0,
            n: n as u64,
            keys,
        })
    }

    /// Fill `out` (length dim) with the next point; returns false when the
    /// stream is exhausted.
    pub fn next_point(&mut self, out: &mut [f64]) -> bool {
        if self.index >= self.n {
            return false;
        }
        if self.index > 0 {
            let bit = (self.index as u32).trailing_zeros() as usize;
            for (j, s) in self.state.iter_mut().enumerate() {
                *s ^= self.table.dirs[j][bit];
            }
        }
        match &self.keys {
            Some(keys) => {
                for j in 0..self.dim {
                    out[j] = int_to_unit(scramble_u32(keys[j], self.state[j]));
                }
            }
            None => {
                for j in 0..self.dim {
                    out[j] = int_to_unit(self.state[j]);
                }
            }
        }
        self.index += 1;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_table() -> DirectionTable {
        // head of the published Joe-Kuo file
        let text = "d s a m_i\n2 1 0 1\n3 2 1 1 3\n4 3 1 1 3 1\n5 3 2 1 1 1\n6 4 1 1 1 3 3\n";
        load_direction_table(text.as_bytes()).unwrap()
    }

    #[test]
    fn parses_joe_kuo_head() {
        let t = tiny_table();
        assert_eq!(t.max_dim(), 6);
        // dimension 2 with s=1, a=0, m=(1): v_1 = 1/2, recurrence gives 3/4...
        assert_eq!(t.dirs[1][0], 1u32 << 31);
        // v_2 = v_1 ^ (v_1 >> 1) = 0.11b
        assert_eq!(t.dirs[1][1], (1u32 << 31) | (1u32 << 30));
    }

    #[test]
    fn empty_stream_errors() {
        assert!(matches!(
            load_direction_table("".as_bytes()),
            Err(LowdiscError::NoRecords)
        ));
        assert!(matches!(
            load_direction_table("d s a m_i\n".as_bytes()),
            Err(LowdiscError::NoRecords)
        ));
    }

    #[test]
    fn even_m_rejected() {
        let res = load_direction_table("2 2 1 1 2\n".as_bytes());
        match res {
            Err(LowdiscError::MalformedRecord { line, reason }) => {
                assert_eq!(line, 1);
                assert!(reason.contains("even"), "{reason}");
            }
            other => panic!("expected malformed record, got {other:?}", other = other.err()),
        }
    }

    #[test]
    fn dimension_gap_rejected() {
        let res = load_direction_table("2 1 0 1\n4 3 1 1 3 1\n".as_bytes());
        assert!(matches!(res, Err(LowdiscError::DimensionGap { .. })));
    }

    #[test]
    fn first_two_points() {
        let t = tiny_table();
        let b = sobol_points(&t, 2, 3).unwrap();
        // raw point 0 is all zeros (adjusted to 2^-33), point 1 is all halves
        for j in 0..3 {
            assert_eq!(b.value(0, j), 0.5f64.powi(33));
            assert_eq!(b.value(1, j), 0.5);
        }
    }

    #[test]
    fn van_der_corput_multiset() {
        let t = tiny_table();
        let b = sobol_points(&t, 4, 1).unwrap();
        let mut vals: Vec<f64> = (0..4).map(|i| b.value(i, 0)).collect();
        vals[0] = 0.0; // undo the in-(0,1) adjustment on the origin
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals, vec![0.0, 0.25, 0.5, 0.75]);
    }

    #[test]
    fn non_power_of_two_rejected() {
        let t = tiny_table();
        assert!(matches!(
            sobol_points(&t, 3, 2),
            Err(LowdiscError::BadPointCount(3))
        ));
    }

    #[test]
    fn dim_out_of_range_rejected() {
        let t = tiny_table();
        assert!(sobol_points(&t, 4, 7).is_err());
        assert!(sobol_points(&t, 4, 0).is_err());
    }

    #[test]
    fn gray_code_matches_binary_expansion() {
        let t = tiny_table();
        let m = 6;
        let n = 1usize << m;
        let b = sobol_points(&t, n, 4).unwrap();
        // direct generation: x_i = XOR of v_k over set bits of i
        for dim in 0..4 {
            let mut direct: Vec<u32> = (0..n)
                .map(|i| {
                    let mut x = 0u32;
                    for k in 0..32 {
                        if (i >> k) & 1 == 1 {
                            x ^= t.dirs[dim][k];
                        }
                    }
                    x
                })
                .collect();
            let mut gray: Vec<u32> = (0..n)
                .map(|i| b.ints.as_ref().unwrap()[i * 4 + dim])
                .collect();
            direct.sort_unstable();
            gray.sort_unstable();
            assert_eq!(direct, gray, "dim {dim}");
        }
    }

    fn assert_net_property(ints: &[u32], n: usize, dim: usize, m: u32) {
        for j in 0..dim {
            for k in 1..=m {
                let mut counts = vec![0usize; 1 << k];
                for i in 0..n {
                    let x = ints[i * dim + j];
                    counts[(x >> (32 - k)) as usize] += 1;
                }
                let expect = n >> k;
                assert!(
                    counts.iter().all(|&c| c == expect),
                    "dim {j} depth {k}: {counts:?}"
                );
            }
        }
    }

    #[test]
    fn net_property_raw_and_scrambled() {
        let t = tiny_table();
        let m = 8;
        let n = 1usize << m;
        let b = sobol_points(&t, n, 5).unwrap();
        assert_net_property(b.ints.as_ref().unwrap(), n, 5, m);
        let s = owen_scramble(&b, 0xfeed_beef).unwrap();
        assert_net_property(s.ints.as_ref().unwrap(), n, 5, m);
    }

    #[test]
    fn scramble_deterministic() {
        let t = tiny_table();
        let b = sobol_points(&t, 64, 3).unwrap();
        let s1 = owen_scramble(&b, 42).unwrap();
        let s2 = owen_scramble(&b, 42).unwrap();
        assert_eq!(s1.values, s2.values);
        let s3 = owen_scramble(&b, 43).unwrap();
        assert_ne!(s1.values, s3.values);
    }

    #[test]
    fn scramble_marginally_uniform_at_origin() {
        // averaging the scrambled origin over many seeds: mean near 0.5
        let t = tiny_table();
        let b = sobol_points(&t, 2, 1).unwrap();
        let mut acc = 0.0;
        let seeds = 1000;
        for seed in 0..seeds {
            let s = owen_scramble(&b, seed).unwrap();
            acc += s.value(0, 0);
        }
        let mean = acc / (seeds as f64);
        assert!((mean - 0.5).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn midpoint_values() {
        let g = midpoint_grid(2).unwrap();
        assert_eq!(g.values, vec![0.25, 0.75]);
        let g = midpoint_grid(4).unwrap();
        assert_eq!(g.values, vec![0.125, 0.375, 0.625, 0.875]);
        let g = midpoint_grid(16384).unwrap();
        assert_eq!(g.values[0], 0.5f64.powi(15));
        assert!(matches!(midpoint_grid(0), Err(LowdiscError::EmptyGrid)));
    }

    #[test]
    fn stream_matches_batch() {
        let t = tiny_table();
        let n = 128;
        let b = sobol_points(&t, n, 4).unwrap();
        let sb = owen_scramble(&b, 7).unwrap();
        let mut stream = SobolStream::new(&t, n, 4, Some(7)).unwrap();
        let mut buf = [0.0; 4];
        for i in 0..n {
            assert!(stream.next_point(&mut buf));
            for j in 0..4 {
                assert_eq!(buf[j], sb.value(i, j), "point {i} dim {j}");
            }
        }
        assert!(!stream.next_point(&mut buf));
    }
}
