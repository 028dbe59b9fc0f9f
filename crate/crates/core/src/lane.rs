//! Lane identity and the lane-frame <-> world-frame mapping.
//!
//! Both flows use one lane frame: travel direction is positive and the
//! intersection center is at 0. North-south traffic starts at world
//! y = +200 and ends at y = -200; west-east starts at x = -200 and ends at
//! x = +200. Both map to "lane coordinate -200 -> +200".

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lane {
    #[serde(rename = "ns")]
    NorthSouth,
    #[serde(rename = "we")]
    WestEast,
}

impl Lane {
    pub const ALL: [Lane; 2] = [Lane::NorthSouth, Lane::WestEast];

    /// World (x, y) of a lane-frame coordinate.
    pub fn world(self, pos: f64) -> (f64, f64) {
        match self {
            Lane::NorthSouth => (0.0, -pos),
            Lane::WestEast => (pos, 0.0),
        }
    }

    /// Lane-frame coordinate of a world point on this lane.
    pub fn lane_pos(self, x: f64, y: f64) -> f64 {
        match self {
            Lane::NorthSouth => -y,
            Lane::WestEast => x,
        }
    }

    pub fn other(self) -> Lane {
        match self {
            Lane::NorthSouth => Lane::WestEast,
            Lane::WestEast => Lane::NorthSouth,
        }
    }
}

impl std::fmt::Display for Lane {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Lane::NorthSouth => write!(f, "ns"),
            Lane::WestEast => write!(f, "we"),
        }
    }
}

impl std::str::FromStr for Lane {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ns" | "north-south" | "NS" => Ok(Lane::NorthSouth),
            "we" | "west-east" | "WE" => Ok(Lane::WestEast),
            other => Err(format!("unknown lane `{other}` (expected ns or we)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn world_round_trip() {
        for lane in Lane::ALL {
            for pos in [-200.0, -37.5, 0.0, 120.0] {
                let (x, y) = lane.world(pos);
                assert_eq!(lane.lane_pos(x, y), pos);
            }
        }
        // NS starts at +200 north, WE at -200 west
        assert_eq!(Lane::NorthSouth.world(-200.0), (0.0, 200.0));
        assert_eq!(Lane::WestEast.world(-200.0), (-200.0, 0.0));
    }
}
