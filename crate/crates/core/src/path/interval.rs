use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Adjacent intervals closer than this are merged.
pub const MERGE_TOL: f64 = 1e-10;

/// A finite union of disjoint closed intervals on the extended real line,
/// stored sorted and canonical.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl IntervalUnion {
    pub fn empty() -> Self {
        IntervalUnion {
            intervals: Vec::new(),
        }
    }

    pub fn real_line() -> Self {
        IntervalUnion {
            intervals: vec![(f64::NEG_INFINITY, f64::INFINITY)],
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Self::from_intervals(vec![(lo, hi)])
    }

    /// Canonicalizes arbitrary (possibly overlapping, unsorted) pieces.
    /// Pieces with `hi <= lo` or NaN endpoints are dropped.
    pub fn from_intervals(mut pieces: Vec<(f64, f64)>) -> Self {
        pieces.retain(|&(lo, hi)| lo < hi);
        pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(pieces.len());
        for (lo, hi) in pieces {
            match out.last_mut() {
                Some(last) if lo <= last.1 + MERGE_TOL => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
        }
        IntervalUnion { intervals: out }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn contains(&self, x: f64) -> bool {
        // Intervals are sorted, so binary search on the left endpoints.
        let k = self.intervals.partition_point(|&(lo, _)| lo <= x);
        k > 0 && x <= self.intervals[k - 1].1
    }

    /// Interval containing `x`, if any.
    pub fn component(&self, x: f64) -> Option<(f64, f64)> {
        let k = self.intervals.partition_point(|&(lo, _)| lo <= x);
        (k > 0 && x <= self.intervals[k - 1].1).then(|| self.intervals[k - 1])
    }

    /// Total length (possibly infinite).
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo).sum()
    }

    pub fn intersect(&self, other: &IntervalUnion) -> IntervalUnion {
        let (a, b) = (&self.intervals, &other.intervals);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            let lo = a[i].0.max(b[j].0);
            let hi = a[i].1.min(b[j].1);
            if lo < hi {
                out.push((lo, hi));
            }
            if a[i].1 < b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalUnion::from_intervals(out)
    }

    pub fn union(&self, other: &IntervalUnion) -> IntervalUnion {
        let mut all = self.intervals.clone();
        all.extend_from_slice(&other.intervals);
        IntervalUnion::from_intervals(all)
    }

    pub fn hull(&self) -> Option<(f64, f64)> {
        Some((self.intervals.first()?.0, self.intervals.last()?.1))
    }
}

impl fmt::Display for IntervalUnion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return f.write_str("∅");
        }
        for (k, (lo, hi)) in self.intervals.iter().enumerate() {
            if k > 0 {
                f.write_str(" ∪ ")?;
            }
            write!(f, "[{lo}, {hi}]")?;
        }
        Ok(())
    }
}

/// Serde helpers writing ±∞ as the strings `"inf"` / `"-inf"`.
pub mod bound {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    struct BoundVisitor;

    impl Visitor<'_> for BoundVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(E::custom(format!("invalid bound '{other}'"))),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(BoundVisitor)
    }

    /// Text form used in CSV output.
    pub fn to_text(v: f64) -> String {
        if v == f64::INFINITY {
            "inf".into()
        } else if v == f64::NEG_INFINITY {
            "-inf".into()
        } else {
            format!("{v}")
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Piece(#[serde(with = "bound")] f64, #[serde(with = "bound")] f64);

impl Serialize for IntervalUnion {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.intervals.iter().map(|&(lo, hi)| Piece(lo, hi)))
    }
}

impl<'de> Deserialize<'de> for IntervalUnion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pieces = Vec::<Piece>::deserialize(d)?;
        Ok(IntervalUnion::from_intervals(
            pieces.into_iter().map(|Piece(a, b)| (a, b)).collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intersect_example() {
        let a = IntervalUnion::from_intervals(vec![(0.0, 1.0), (2.0, 3.0)]);
        let b = IntervalUnion::interval(0.5, 2.5);
        let c = a.intersect(&b);
        assert_eq!(c.intervals(), &[(0.5, 1.0), (2.0, 2.5)]);
        assert_eq!(a.intersect(&IntervalUnion::real_line()), a);
        assert!(a.intersect(&IntervalUnion::empty()).is_empty());
    }

    #[test]
    fn canonicalizes_touching_and_overlapping() {
        let u = IntervalUnion::from_intervals(vec![
            (2.0, 3.0),
            (0.0, 1.0),
            (1.0, 1.5),
            (2.5, 4.0),
            (5.0, 5.0),
        ]);
        assert_eq!(u.intervals(), &[(0.0, 1.5), (2.0, 4.0)]);
        assert_eq!(u.measure(), 3.5);
        assert!(u.contains(1.5) && u.contains(2.0) && !u.contains(1.7) && !u.contains(5.0));
        assert_eq!(u.component(3.0), Some((2.0, 4.0)));
    }

    #[test]
    fn infinite_endpoints_round_trip_through_json() {
        let u =
            IntervalUnion::from_intervals(vec![(f64::NEG_INFINITY, -1.0), (0.5, f64::INFINITY)]);
        let s = serde_json::to_string(&u).unwrap();
        assert_eq!(s, r#"[["-inf",-1.0],[0.5,"inf"]]"#);
        let back: IntervalUnion = serde_json::from_str(&s).unwrap();
        assert_eq!(back, u);
        assert_eq!(u.measure(), f64::INFINITY);
    }
}
