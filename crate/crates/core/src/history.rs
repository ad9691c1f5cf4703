//! Observation histories over an interval.
//!
//! A history is a set of (location, value) pairs on a closed interval
//! [a, b], always containing observations at both endpoints. Its sorted
//! gaps — consecutive observation pairs — are the independent sub-problems
//! everything downstream works on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One measurement of the process: value `y` observed at location `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub x: f64,
    pub y: f64,
}

impl Observation {
    pub fn new(x: f64, y: f64) -> Self {
        debug_assert!(x >= 0.0, "locations live on the nonnegative half-line");
        Observation { x, y }
    }
}

/// Sorted set of observations on `[a, b]`, endpoints always observed.
///
/// Value semantics: [`ObservationHistory::insert`] returns a new history,
/// the original is untouched. Locations are compared exactly; every
/// policy-generated location is a grid point, so duplicate detection never
/// needs a tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationHistory {
    a: f64,
    b: f64,
    obs: Vec<Observation>,
}

impl ObservationHistory {
    /// Fresh history holding only the two endpoint observations.
    pub fn from_endpoints(a: f64, b: f64, ya: f64, yb: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() || a < 0.0 {
            return Err(Error::invalid(format!(
                "interval endpoints must satisfy 0 <= a < b, got [{a}, {b}]"
            )));
        }
        Ok(ObservationHistory {
            a,
            b,
            obs: vec![Observation::new(a, ya), Observation::new(b, yb)],
        })
    }

    /// Builds a history from raw parts, validating every invariant:
    /// endpoints observed, locations strictly ascending, all inside [a, b].
    pub fn from_parts(a: f64, b: f64, obs: Vec<Observation>) -> Result<Self> {
        if !(a < b) || a < 0.0 {
            return Err(Error::invalid(format!(
                "interval endpoints must satisfy 0 <= a < b, got [{a}, {b}]"
            )));
        }
        if obs.first().map(|o| o.x) != Some(a) || obs.last().map(|o| o.x) != Some(b) {
            return Err(Error::invalid(
                "history must contain observations at both endpoints".to_string(),
            ));
        }
        for pair in obs.windows(2) {
            if !(pair[0].x < pair[1].x) {
                return Err(Error::invalid(format!(
                    "observation locations must be strictly ascending, got {} then {}",
                    pair[0].x, pair[1].x
                )));
            }
        }
        // Observations outside [a, b] never affect the value, but silently
        // dropping them would hide caller bugs; reject instead.
        if let Some(o) = obs.iter().find(|o| o.x < a || o.x > b) {
            return Err(Error::OutsideInterval { x: o.x, a, b });
        }
        Ok(ObservationHistory { a, b, obs })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn observations(&self) -> &[Observation] {
        &self.obs
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        false // endpoints are always present
    }

    pub fn contains_location(&self, x: f64) -> bool {
        self.obs.iter().any(|o| o.x == x)
    }

    /// Returns a new history with `o` merged in sorted position.
    ///
    /// Re-measuring an already observed location leaves the history
    /// unchanged; locations outside [a, b] are rejected.
    pub fn insert(&self, o: Observation) -> Result<Self> {
        if o.x < self.a || o.x > self.b {
            return Err(Error::OutsideInterval {
                x: o.x,
                a: self.a,
                b: self.b,
            });
        }
        let mut out = self.clone();
        match out.obs.binary_search_by(|p| p.x.partial_cmp(&o.x).unwrap()) {
            Ok(_) => {} // already sampled: unchanged
            Err(pos) => out.obs.insert(pos, o),
        }
        Ok(out)
    }

    /// Consecutive observation pairs covering [a, b] exactly.
    pub fn gaps(&self) -> impl Iterator<Item = (Observation, Observation)> + '_ {
        self.obs.windows(2).map(|w| (w[0], w[1]))
    }

    /// History translated by `shift` along the location axis (values kept).
    pub fn translate(&self, shift: f64) -> Result<Self> {
        let obs = self
            .obs
            .iter()
            .map(|o| Observation::new(o.x + shift, o.y))
            .collect();
        ObservationHistory::from_parts(self.a + shift, self.b + shift, obs)
    }
}

#[derive(Serialize, Deserialize)]
struct HistoryRepr {
    a: f64,
    b: f64,
    obs: Vec<[f64; 2]>,
}

impl Serialize for ObservationHistory {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        HistoryRepr {
            a: self.a,
            b: self.b,
            obs: self.obs.iter().map(|o| [o.x, o.y]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ObservationHistory {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = HistoryRepr::deserialize(d)?;
        let obs = repr.obs.iter().map(|p| Observation::new(p[0], p[1])).collect();
        ObservationHistory::from_parts(repr.a, repr.b, obs).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h01() -> ObservationHistory {
        ObservationHistory::from_endpoints(0.0, 1.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn insert_sorts_between_endpoints() {
        let h = h01().insert(Observation::new(0.5, 0.3)).unwrap();
        let xs: Vec<f64> = h.observations().iter().map(|o| o.x).collect();
        assert_eq!(xs, vec![0.0, 0.5, 1.0]);
        assert_eq!(h.observations()[1].y, 0.3);
    }

    #[test]
    fn insert_at_existing_location_is_identity() {
        let h = h01();
        let h2 = h.insert(Observation::new(0.0, 7.0)).unwrap();
        assert_eq!(h, h2);
    }

    #[test]
    fn insert_outside_interval_errors() {
        let err = h01().insert(Observation::new(1.5, 0.0)).unwrap_err();
        assert!(matches!(err, Error::OutsideInterval { .. }));
    }

    #[test]
    fn gaps_cover_interval() {
        let h = h01()
            .insert(Observation::new(0.25, -1.0))
            .unwrap()
            .insert(Observation::new(0.75, 2.0))
            .unwrap();
        let gaps: Vec<_> = h.gaps().collect();
        assert_eq!(gaps.len(), 3);
        assert_eq!(gaps[0].0.x, 0.0);
        for w in gaps.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
        assert_eq!(gaps[2].1.x, 1.0);
    }

    #[test]
    fn two_point_history_has_single_gap() {
        assert_eq!(h01().gaps().count(), 1);
    }

    #[test]
    fn from_parts_requires_endpoints() {
        let err = ObservationHistory::from_parts(
            0.0,
            1.0,
            vec![Observation::new(0.2, 0.0), Observation::new(1.0, 0.0)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn json_shape_is_stable() {
        let h = h01().insert(Observation::new(0.5, 0.3)).unwrap();
        let s = serde_json::to_string(&h).unwrap();
        assert_eq!(s, r#"{"a":0.0,"b":1.0,"obs":[[0.0,0.0],[0.5,0.3],[1.0,0.0]]}"#);
        let back: ObservationHistory = serde_json::from_str(&s).unwrap();
        assert_eq!(back, h);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn insert_then_gaps_partitions(points in proptest::collection::vec(0.0f64..1.0, 0..12)) {
                let mut h = h01();
                for (i, x) in points.iter().enumerate() {
                    let before = h.gaps().count();
                    let existed = h.contains_location(*x);
                    h = h.insert(Observation::new(*x, i as f64)).unwrap();
                    let after = h.gaps().count();
                    // Inserting a fresh point splits exactly one gap in two.
                    prop_assert_eq!(after, if existed { before } else { before + 1 });
                }
                // Gap intervals tile [a, b]: consecutive gaps share endpoints.
                let gaps: Vec<_> = h.gaps().collect();
                prop_assert_eq!(gaps[0].0.x, 0.0);
                prop_assert_eq!(gaps[gaps.len() - 1].1.x, 1.0);
                for w in gaps.windows(2) {
                    prop_assert_eq!(w[0].1.x, w[1].0.x);
                }
                // Idempotence at every existing location.
                let snapshot = h.clone();
                for o in snapshot.observations() {
                    h = h.insert(Observation::new(o.x, o.y + 1.0)).unwrap();
                }
                prop_assert_eq!(h, snapshot);
            }
        }
    }
}
