use super::MediaError;
use serde::{Deserialize, Serialize};

pub const NUM_KEYPOINTS: usize = 18;

/// COCO-body ordering of the 18 skeleton keypoints.
pub const KEYPOINT_NAMES: [&str; NUM_KEYPOINTS] = [
    "nose",
    "neck",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "right_hip",
    "right_knee",
    "right_ankle",
    "left_hip",
    "left_knee",
    "left_ankle",
    "right_eye",
    "left_eye",
    "right_ear",
    "left_ear",
];

/// Connected keypoint pairs drawn as limbs.
pub const LIMBS: [(usize, usize); 17] = [
    (1, 2),
    (1, 5),
    (2, 3),
    (3, 4),
    (5, 6),
    (6, 7),
    (1, 8),
    (8, 9),
    (9, 10),
    (1, 11),
    (11, 12),
    (12, 13),
    (1, 0),
    (0, 14),
    (14, 16),
    (0, 15),
    (15, 17),
];

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Keypoint {
    pub fn new(x: f64, y: f64, confidence: f64) -> Self {
        Keypoint { x, y, confidence }
    }

    pub fn missing() -> Self {
        Keypoint::default()
    }

    pub fn is_visible(&self) -> bool {
        self.confidence > 0.0
    }
}

/// One 18-keypoint skeleton in image coordinates (origin top-left).
#[derive(Clone, Debug, PartialEq)]
pub struct PoseFrame {
    keypoints: [Keypoint; NUM_KEYPOINTS],
}

impl PoseFrame {
    pub fn new(keypoints: Vec<Keypoint>) -> Result<Self, MediaError> {
        let n = keypoints.len();
        let keypoints: [Keypoint; NUM_KEYPOINTS] = keypoints.try_into().map_err(|_| {
            MediaError::InvalidBuffer(format!("expected {NUM_KEYPOINTS} keypoints, got {n}"))
        })?;
        for (i, k) in keypoints.iter().enumerate() {
            if !(0.0..=1.0).contains(&k.confidence) {
                return Err(MediaError::InvalidBuffer(format!(
                    "keypoint {i} confidence {} outside [0, 1]",
                    k.confidence
                )));
            }
            if k.is_visible() && !(k.x.is_finite() && k.y.is_finite()) {
                return Err(MediaError::InvalidBuffer(format!("keypoint {i} is not finite")));
            }
        }
        Ok(PoseFrame { keypoints })
    }

    /// All keypoints missing.
    pub fn empty() -> Self {
        PoseFrame {
            keypoints: [Keypoint::missing(); NUM_KEYPOINTS],
        }
    }

    /// A synthetic standing figure about 84 px tall centered at `(cx, cy)`.
    /// `phase` swings the arms and legs, so a sweep of phases gives a simple
    /// walk cycle for demos and tests.
    pub fn stick_figure(cx: f64, cy: f64, phase: f64) -> Self {
        let s = phase.sin();
        let rel: [(f64, f64); NUM_KEYPOINTS] = [
            (0.0, -40.0),
            (0.0, -28.0),
            (-10.0, -28.0),
            (-16.0 - 4.0 * s, -14.0),
            (-20.0 - 8.0 * s, 0.0),
            (10.0, -28.0),
            (16.0 + 4.0 * s, -14.0),
            (20.0 + 8.0 * s, 0.0),
            (-7.0, 2.0),
            (-9.0 + 5.0 * s, 20.0),
            (-10.0 + 9.0 * s, 38.0),
            (7.0, 2.0),
            (9.0 - 5.0 * s, 20.0),
            (10.0 - 9.0 * s, 38.0),
            (-4.0, -44.0),
            (4.0, -44.0),
            (-9.0, -40.0),
            (9.0, -40.0),
        ];
        PoseFrame {
            keypoints: rel.map(|(dx, dy)| Keypoint::new(cx + dx, cy + dy, 1.0)),
        }
    }

    /// Parses the flat `[x0, y0, c0, ..., x17, y17, c17]` layout.
    pub fn from_flat(values: &[f64]) -> Result<Self, MediaError> {
        if values.len() != 3 * NUM_KEYPOINTS {
            return Err(MediaError::InvalidBuffer(format!(
                "expected {} values ({NUM_KEYPOINTS} keypoints), got {}",
                3 * NUM_KEYPOINTS,
                values.len()
            )));
        }
        PoseFrame::new(
            values
                .chunks_exact(3)
                .map(|t| Keypoint::new(t[0], t[1], t[2]))
                .collect(),
        )
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.keypoints
            .iter()
            .flat_map(|k| [k.x, k.y, k.confidence])
            .collect()
    }

    pub fn keypoints(&self) -> &[Keypoint; NUM_KEYPOINTS] {
        &self.keypoints
    }

    pub fn keypoint(&self, i: usize) -> Keypoint {
        self.keypoints[i]
    }

    pub fn visible_count(&self) -> usize {
        self.keypoints.iter().filter(|k| k.is_visible()).count()
    }

    /// Checks that every visible keypoint lies inside a `width x height` frame.
    pub fn check_bounds(&self, width: usize, height: usize) -> Result<(), MediaError> {
        for (i, k) in self.keypoints.iter().enumerate() {
            if k.is_visible()
                && !(k.x >= 0.0 && k.x < width as f64 && k.y >= 0.0 && k.y < height as f64)
            {
                return Err(MediaError::InvalidBuffer(format!(
                    "keypoint {i} ({}, {}) outside {width}x{height}",
                    k.x, k.y
                )));
            }
        }
        Ok(())
    }

    /// Every keypoint moved by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> PoseFrame {
        let mut out = self.clone();
        for k in out.keypoints.iter_mut() {
            k.x += dx;
            k.y += dy;
        }
        out
    }
}
