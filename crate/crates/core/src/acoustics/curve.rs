use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frequency → dB map, interpolated linearly in dB over log frequency.
/// Evaluation outside the knot span clamps to the end knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct ThresholdCurve {
    points: Vec<(f64, f64)>,
}

impl ThresholdCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::param("curve", "no knots"));
        }
        for (i, &(f, db)) in points.iter().enumerate() {
            if !(f > 0.0 && f.is_finite()) || !db.is_finite() {
                return Err(Error::param(
                    "curve",
                    format!("knot {i} ({f}, {db}) must have positive finite frequency and finite level"),
                ));
            }
        }
        if let Some(w) = points.windows(2).find(|w| w[1].0 <= w[0].0) {
            return Err(Error::param(
                "curve",
                format!("frequencies must strictly increase ({} then {})", w[0].0, w[1].0),
            ));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn span(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    pub fn eval(&self, f: f64) -> f64 {
        let pts = &self.points;
        if f <= pts[0].0 {
            return pts[0].1;
        }
        let last = pts[pts.len() - 1];
        if f >= last.0 {
            return last.1;
        }
        let i = pts.partition_point(|p| p.0 <= f);
        let (f0, y0) = pts[i - 1];
        let (f1, y1) = pts[i];
        let t = (f / f0).ln() / (f1 / f0).ln();
        y0 + t * (y1 - y0)
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            points: self.points.iter().map(|&(x, y)| (x, f(y))).collect(),
        }
    }

    /// Parses `freq_hz,value_db` CSV (header required).
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "freq_hz" || &headers[1] != "value_db" {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "expected header `freq_hz,value_db`, found `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut points = Vec::new();
        for (i, rec) in rdr.deserialize::<(f64, f64)>().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })?;
            points.push(rec);
        }
        Self::new(points)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,value_db\n");
        for (f, v) in &self.points {
            out.push_str(&format!("{f},{v}\n"));
        }
        out
    }
}

impl TryFrom<Vec<(f64, f64)>> for ThresholdCurve {
    type Error = Error;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<ThresholdCurve> for Vec<(f64, f64)> {
    fn from(c: ThresholdCurve) -> Self {
        c.points
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> ThresholdCurve {
        ThresholdCurve::new(vec![(100.0, 20.0), (1000.0, 0.0), (10_000.0, 10.0)]).unwrap()
    }

    #[test]
    fn knots_are_exact_and_log_interpolated() {
        let c = sample();
        assert_eq!(c.eval(100.0), 20.0);
        assert_eq!(c.eval(1000.0), 0.0);
        assert!((c.eval(316.227766) - 10.0).abs() < 1e-6);
        assert_eq!(c.eval(50.0), 20.0);
        assert_eq!(c.eval(20_000.0), 10.0);
    }

    #[test]
    fn rejects_unsorted_or_nonpositive() {
        assert!(ThresholdCurve::new(vec![]).is_err());
        assert!(ThresholdCurve::new(vec![(100.0, 1.0), (100.0, 2.0)]).is_err());
        assert!(ThresholdCurve::new(vec![(0.0, 1.0)]).is_err());
        assert!(ThresholdCurve::new(vec![(10.0, f64::NAN)]).is_err());
    }

    #[test]
    fn csv_parsing() {
        let c = ThresholdCurve::from_csv_reader("freq_hz,value_db\n100,3\n200, 4.5\n".as_bytes()).unwrap();
        assert_eq!(c.points(), &[(100.0, 3.0), (200.0, 4.5)]);
        assert_eq!(ThresholdCurve::from_csv_reader(c.to_csv().as_bytes()).unwrap(), c);
        let bad = ThresholdCurve::from_csv_reader("f,v\n1,2\n".as_bytes());
        assert!(matches!(bad, Err(Error::Parse { line: 1, .. })));
        let bad = ThresholdCurve::from_csv_reader("freq_hz,value_db\n1,2\nx,3\n".as_bytes());
        assert!(matches!(bad, Err(Error::Parse { line: 3, .. })));
    }

    proptest! {
        #[test]
        fn interpolant_stays_between_neighbours(f in 100.0f64..10_000.0) {
            let c = sample();
            let pts = c.points();
            let i = pts.partition_point(|p| p.0 <= f).clamp(1, pts.len() - 1);
            let (lo, hi) = (pts[i - 1].1.min(pts[i].1), pts[i - 1].1.max(pts[i].1));
            let y = c.eval(f);
            prop_assert!(y >= lo - 1e-12 && y <= hi + 1e-12);
        }
    }
}
