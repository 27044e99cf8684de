use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One configuration of the enhancement study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_speakers: u32,
    pub range_mm: f64,
    pub carrier_hz: f64,
    pub max_spl_db: f64,
}

/// Measured optimum per speaker count.
pub fn shipped_sweep_table() -> Vec<SweepRow> {
    [
        (2, 22.0, 40_500.0, 128.0),
        (4, 14.0, 40_000.0, 130.0),
        (6, 14.0, 40_000.0, 134.0),
        (8, 11.0, 39_500.0, 135.0),
        (10, 15.0, 40_500.0, 138.0),
        (12, 18.0, 40_200.0, 142.0),
        (14, 18.0, 40_200.0, 142.0),
        (16, 18.0, 40_200.0, 142.0),
    ]
    .into_iter()
    .map(|(n_speakers, range_mm, carrier_hz, max_spl_db)| SweepRow {
        n_speakers,
        range_mm,
        carrier_hz,
        max_spl_db,
    })
    .collect()
}

/// Highest `max_spl_db`; ties go to fewer speakers, then the lower carrier.
pub fn sweep_parameters(table: &[SweepRow]) -> Result<SweepRow> {
    if table.is_empty() {
        return Err(Error::param("table", "empty sweep table"));
    }
    let mut seen = HashSet::new();
    for row in table {
        if !seen.insert(row.n_speakers) {
            return Err(Error::param(
                "table",
                format!("duplicate row for {} speakers", row.n_speakers),
            ));
        }
        if !(row.max_spl_db.is_finite() && row.carrier_hz.is_finite() && row.range_mm.is_finite()) {
            return Err(Error::param(
                "table",
                format!("row for {} speakers has a non-finite value", row.n_speakers),
            ));
        }
    }
    let best = table
        .iter()
        .min_by(|a, b| {
            b.max_spl_db
                .total_cmp(&a.max_spl_db)
                .then(a.n_speakers.cmp(&b.n_speakers))
                .then(a.carrier_hz.total_cmp(&b.carrier_hz))
        })
        .copied()
        .expect("non-empty");
    Ok(best)
}

/// Reads `n_speakers,range_mm,carrier_hz,max_spl_db` CSV.
pub fn load_sweep_table(reader: impl Read) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let want = ["n_speakers", "range_mm", "carrier_hz", "max_spl_db"];
    if headers.iter().ne(want) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`", want.join(",")),
        });
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn load_sweep_table_path(path: impl AsRef<Path>) -> Result<Vec<SweepRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_sweep_table(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(n: u32, spl: f64, f: f64) -> SweepRow {
        SweepRow {
            n_speakers: n,
            range_mm: 10.0,
            carrier_hz: f,
            max_spl_db: spl,
        }
    }

    #[test]
    fn shipped_table_optimum() {
        let best = sweep_parameters(&shipped_sweep_table()).unwrap();
        assert_eq!(
            best,
            SweepRow {
                n_speakers: 12,
                range_mm: 18.0,
                carrier_hz: 40_200.0,
                max_spl_db: 142.0
            }
        );
    }

    #[test]
    fn csv_file_matches_builtin() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/enhancement_table.csv");
        assert_eq!(load_sweep_table_path(path).unwrap(), shipped_sweep_table());
    }

    #[test]
    fn tie_breaks() {
        let t = [row(16, 142.0, 40_000.0), row(12, 142.0, 40_500.0)];
        assert_eq!(sweep_parameters(&t).unwrap().n_speakers, 12);
        assert_eq!(sweep_parameters(&[row(4, 100.0, 1.0)]).unwrap().n_speakers, 4);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(sweep_parameters(&[]).is_err());
        assert!(sweep_parameters(&[row(4, 1.0, 1.0), row(4, 2.0, 1.0)]).is_err());
        assert!(matches!(
            load_sweep_table("a,b\n1,2\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn order_independent(mut perm in Just(shipped_sweep_table()).prop_shuffle()) {
            let best = sweep_parameters(&perm).unwrap();
            perm.reverse();
            prop_assert_eq!(best, sweep_parameters(&perm).unwrap());
            prop_assert_eq!(best.n_speakers, 12);
        }
    }
}
