//! The m x l parameter matrix with a cyclic write cursor.
//!
//! Columns are target-period positions on the pattern period (1..=m); rows
//! are stored cycles (1..=l). Writes walk the positions of one row, then move
//! to the next row, wrapping back to row 1 once all `l` rows are filled, so
//! the oldest cycle is always the one overwritten.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::poisson::PoissonParam;

const SNAPSHOT_MAGIC: &str = "reqcast-pdata";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicDataset {
    m: usize,
    l: usize,
    /// Row-major by cycle: `cells[(w - 1) * m + (p - 1)]`.
    cells: Vec<Option<PoissonParam>>,
    p: usize,
    w: usize,
    t: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowEntry {
    /// Offset within the window, 1..=n; `n` is the cursor position.
    pub x: usize,
    pub tp_index: usize,
    pub cycle: usize,
    pub lambda: f64,
}

/// The trailing `n` positions ending at the cursor, every stored cycle
/// stacked at its offset.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilizationWindow {
    pub n: usize,
    pub entries: Vec<WindowEntry>,
}

impl UtilizationWindow {
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.entries.iter().map(|e| (e.x as f64, e.lambda)).collect()
    }
}

impl CyclicDataset {
    pub fn new(m: usize, l: usize) -> Result<Self> {
        if m == 0 || l == 0 {
            return Err(Error::config(format!("dataset dimensions must be positive, got {m}x{l}")));
        }
        Ok(Self { m, l, cells: vec![None; m * l], p: 1, w: 1, t: 1 })
    }

    pub fn tps_per_period(&self) -> usize {
        self.m
    }

    pub fn cycles(&self) -> usize {
        self.l
    }

    /// Position (1..=m) the next update writes to.
    pub fn cursor(&self) -> usize {
        self.p
    }

    /// Row (1..=l) the next update writes to.
    pub fn row(&self) -> usize {
        self.w
    }

    /// Step counter; starts at 1 and grows by one per update.
    pub fn step(&self) -> u64 {
        self.t
    }

    pub fn get(&self, p: usize, w: usize) -> Option<PoissonParam> {
        if (1..=self.m).contains(&p) && (1..=self.l).contains(&w) {
            self.cells[(w - 1) * self.m + (p - 1)]
        } else {
            None
        }
    }

    pub fn populated(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn update(&mut self, param: PoissonParam) {
        self.cells[(self.w - 1) * self.m + (self.p - 1)] = Some(param);
        self.t += 1;
        if self.p < self.m {
            self.p += 1;
        } else {
            self.p = 1;
            self.w = if self.w < self.l { self.w + 1 } else { 1 };
        }
    }

    /// Position on the pattern period `offset` steps before the cursor
    /// (offset 0 is the cursor itself).
    fn position_back(&self, offset: usize) -> usize {
        (self.p as isize - 1 - offset as isize).rem_euclid(self.m as isize) as usize + 1
    }

    pub fn extract_window(&self, n: usize) -> Result<UtilizationWindow> {
        if n == 0 || n > self.m {
            return Err(Error::config(format!(
                "utilization window of {n} positions does not fit a period of {}",
                self.m
            )));
        }
        let mut entries = Vec::with_capacity(n * self.l);
        for x in 1..=n {
            let tp_index = self.position_back(n - x);
            for cycle in 1..=self.l {
                if let Some(param) = self.get(tp_index, cycle) {
                    entries.push(WindowEntry { x, tp_index, cycle, lambda: param.lambda() });
                }
            }
        }
        if entries.is_empty() {
            return Err(Error::EmptyWindow);
        }
        Ok(UtilizationWindow { n, entries })
    }

    /// Text image: header, one line per cell in row-major order, checksum.
    pub fn snapshot(&self) -> String {
        let mut body = String::new();
        let _ = writeln!(body, "{SNAPSHOT_MAGIC} v{SNAPSHOT_VERSION}");
        let _ = writeln!(body, "m={} l={} p={} w={} t={}", self.m, self.l, self.p, self.w, self.t);
        for cell in &self.cells {
            match cell {
                Some(param) => {
                    let _ = writeln!(body, "1 {}", param.lambda());
                }
                None => body.push_str("0\n"),
            }
        }
        let digest = hex_digest(body.as_bytes());
        let _ = writeln!(body, "sha256={digest}");
        body
    }

    pub fn restore(image: &str) -> Result<Self> {
        let corrupt = |msg: &str| Error::CorruptSnapshot(msg.to_string());
        let body_end = image
            .trim_end_matches('\n')
            .rfind('\n')
            .map(|i| i + 1)
            .ok_or_else(|| corrupt("missing checksum line"))?;
        let (body, trailer) = image.split_at(body_end);
        let expected = trailer
            .trim()
            .strip_prefix("sha256=")
            .ok_or_else(|| corrupt("missing checksum line"))?;
        if hex_digest(body.as_bytes()) != expected {
            return Err(corrupt("checksum mismatch"));
        }

        let mut lines = body.lines();
        if lines.next() != Some(&format!("{SNAPSHOT_MAGIC} v{SNAPSHOT_VERSION}")) {
            return Err(corrupt("unknown magic or version"));
        }
        let header = lines.next().ok_or_else(|| corrupt("missing header"))?;
        let mut fields = [0u64; 5];
        for (slot, (token, key)) in
            fields.iter_mut().zip(header.split_whitespace().zip(["m", "l", "p", "w", "t"]))
        {
            *slot = token
                .strip_prefix(key)
                .and_then(|s| s.strip_prefix('='))
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| corrupt("malformed header"))?;
        }
        let [m, l, p, w, t] = fields;
        let (m, l, p, w) = (m as usize, l as usize, p as usize, w as usize);
        let mut ds = Self::new(m, l).map_err(|_| corrupt("bad dimensions"))?;
        if !(1..=m).contains(&p) || !(1..=l).contains(&w) || t == 0 {
            return Err(corrupt("cursor out of range"));
        }
        for cell in ds.cells.iter_mut() {
            let line = lines.next().ok_or_else(|| corrupt("too few cells"))?;
            *cell = match line.split_once(' ') {
                None if line == "0" => None,
                Some(("1", v)) => {
                    let lambda: f64 = v.parse().map_err(|_| corrupt("bad cell value"))?;
                    Some(PoissonParam::new(lambda).map_err(|_| corrupt("bad cell value"))?)
                }
                _ => return Err(corrupt("bad cell flag")),
            };
        }
        if lines.next().is_some() {
            return Err(corrupt("trailing data"));
        }
        ds.p = p;
        ds.w = w;
        ds.t = t;
        Ok(ds)
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lam(v: f64) -> PoissonParam {
        PoissonParam::new(v).unwrap()
    }

    #[test]
    fn construction() {
        let ds = CyclicDataset::new(336, 4).unwrap();
        assert_eq!((ds.tps_per_period(), ds.cycles(), ds.populated()), (336, 4, 0));
        assert_eq!((ds.cursor(), ds.row(), ds.step()), (1, 1, 1));
        assert!(CyclicDataset::new(1, 1).is_ok());
        assert!(CyclicDataset::new(0, 3).is_err());
        assert!(CyclicDataset::new(3, 0).is_err());
    }

    #[test]
    fn cursor_walk_and_overwrite() {
        let mut ds = CyclicDataset::new(3, 2).unwrap();
        let mut visited = Vec::new();
        for i in 0..7 {
            visited.push((ds.cursor(), ds.row()));
            ds.update(lam(i as f64));
        }
        assert_eq!(visited, vec![(1, 1), (2, 1), (3, 1), (1, 2), (2, 2), (3, 2), (1, 1)]);
        assert_eq!(ds.get(1, 1), Some(lam(6.0)));
        assert_eq!(ds.populated(), 6);
        assert_eq!(ds.step(), 8);
    }

    #[test]
    fn single_cell_store() {
        let mut ds = CyclicDataset::new(1, 1).unwrap();
        for i in 0..4 {
            ds.update(lam(i as f64));
            assert_eq!(ds.get(1, 1), Some(lam(i as f64)));
            assert_eq!((ds.cursor(), ds.row()), (1, 1));
        }
    }

    #[test]
    fn window_wraps_across_period_boundary() {
        let mut ds = CyclicDataset::new(7, 1).unwrap();
        for i in 1..=8 {
            ds.update(lam(i as f64));
        }
        assert_eq!(ds.cursor(), 2);
        let win = ds.extract_window(3).unwrap();
        let pos: Vec<(usize, usize)> = win.entries.iter().map(|e| (e.x, e.tp_index)).collect();
        assert_eq!(pos, vec![(1, 7), (2, 1), (3, 2)]);

        for i in 0..3 {
            ds.update(lam(i as f64));
        }
        assert_eq!(ds.cursor(), 5);
        let tps: Vec<usize> = ds.extract_window(3).unwrap().entries.iter().map(|e| e.tp_index).collect();
        assert_eq!(tps, vec![3, 4, 5]);
    }

    #[test]
    fn window_stacks_cycles() {
        let mut ds = CyclicDataset::new(5, 2).unwrap();
        for i in 0..10 {
            ds.update(lam(i as f64));
        }
        let win = ds.extract_window(3).unwrap();
        assert_eq!(win.entries.len(), 6);
        for x in 1..=3 {
            assert_eq!(win.entries.iter().filter(|e| e.x == x).count(), 2);
        }
    }

    #[test]
    fn window_errors() {
        let ds = CyclicDataset::new(4, 2).unwrap();
        assert!(matches!(ds.extract_window(2), Err(Error::EmptyWindow)));
        assert!(ds.extract_window(5).is_err());
        assert!(ds.extract_window(0).is_err());
    }

    #[test]
    fn warm_up_skips_empty_cells() {
        let mut ds = CyclicDataset::new(6, 2).unwrap();
        ds.update(lam(2.0));
        ds.update(lam(3.0));
        // Cursor at position 3: window {1,2,3}, only the two written cells exist.
        let win = ds.extract_window(3).unwrap();
        assert_eq!(win.points(), vec![(1.0, 2.0), (2.0, 3.0)]);
    }

    #[test]
    fn snapshot_round_trip() {
        let empty = CyclicDataset::new(3, 2).unwrap();
        assert_eq!(CyclicDataset::restore(&empty.snapshot()).unwrap(), empty);

        let mut ds = CyclicDataset::new(4, 3).unwrap();
        for i in 0..9 {
            ds.update(lam(0.1 * i as f64 + 1.0 / 3.0));
        }
        let image = ds.snapshot();
        assert_eq!(CyclicDataset::restore(&image).unwrap(), ds);
    }

    #[test]
    fn snapshot_detects_corruption() {
        let mut ds = CyclicDataset::new(4, 3).unwrap();
        ds.update(lam(1.5));
        let image = ds.snapshot();
        let truncated = &image[..image.len() / 2];
        assert!(matches!(CyclicDataset::restore(truncated), Err(Error::CorruptSnapshot(_))));
        let tampered = image.replacen("1 1.5", "1 1.6", 1);
        assert!(matches!(CyclicDataset::restore(&tampered), Err(Error::CorruptSnapshot(_))));
        assert!(CyclicDataset::restore("").is_err());
    }

    proptest! {
        #[test]
        fn snapshot_identity(m in 1usize..20, l in 1usize..5, values in prop::collection::vec(0.0f64..1e6, 0..120)) {
            let mut ds = CyclicDataset::new(m, l).unwrap();
            for v in values {
                ds.update(lam(v));
            }
            prop_assert_eq!(CyclicDataset::restore(&ds.snapshot()).unwrap(), ds);
        }
    }
}
