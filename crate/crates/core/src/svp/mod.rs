//! Shared-visual-perspective planning.
//!
//! For every landmark a [`VisibilityGrid`] records, per free cell, the
//! fraction of rays from the cell center to the landmark's sample points that
//! reach it without touching a blocked cell. [`plan_svp`] then chooses where
//! the human should stand to see the landmark and where the robot should stand
//! to point at it while facing the human.

pub mod raycast;

use crate::geometry::{angle_between, Point2, Polygon, Pose2};
use crate::grid::{Cell, OccupancyGrid};
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, GrayImage, ImageEncoder, Luma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Height of the robot's shoulder joint above the floor, meters.
pub const SHOULDER_HEIGHT: f64 = 0.9;
const ELEVATION_MIN: f64 = -0.5;
const ELEVATION_MAX: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SvpError {
    #[error("no cell sees landmark '{landmark}' with visibility >= {v_min}")]
    NoSharedPerspective { landmark: String, v_min: f64 },
    #[error("no robot pose satisfies the conformation constraints for landmark '{landmark}'")]
    NoRobotPose { landmark: String },
    #[error("pointing target coincides with the robot position")]
    DegenerateTarget,
    #[error("landmark '{0}' has no sample points")]
    EmptyLandmark(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvpConfig {
    /// Sample points per landmark.
    pub samples: usize,
    pub v_min: f64,
    /// Visibility weight.
    pub alpha: f64,
    /// Human travel weight, per meter.
    pub beta: f64,
    pub robot_distance_min: f64,
    pub robot_distance_max: f64,
    /// Largest angle at the robot between its bearings to the landmark and to the human.
    pub phi_max: f64,
    /// Robot cells must be at least this far from blocked cells.
    pub robot_clearance: f64,
}

impl Default for SvpConfig {
    fn default() -> Self {
        SvpConfig {
            samples: 8,
            v_min: 0.8,
            alpha: 1.0,
            beta: 0.05,
            robot_distance_min: 1.0,
            robot_distance_max: 2.0,
            phi_max: 2.1,
            robot_clearance: 0.0,
        }
    }
}

/// Something the human may need to see: a shop front, a staircase, a passage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: String,
    pub samples: Vec<Point2>,
    /// Point the robot aims at when pointing.
    pub aim: Point2,
}

impl Landmark {
    /// `k` samples evenly spaced on the footprint boundary, aimed at its centroid.
    pub fn from_footprint(id: impl Into<String>, footprint: &Polygon, k: usize) -> Self {
        Landmark { id: id.into(), samples: footprint.boundary_samples(k), aim: footprint.centroid() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityGrid {
    pub landmark: String,
    pub width: usize,
    pub height: usize,
    /// Number of rays used per cell.
    pub rays: usize,
    /// Unoccluded ray count per cell, row-major; 0 for blocked cells.
    pub visible: Vec<u32>,
}

impl VisibilityGrid {
    pub fn value(&self, cell: Cell) -> f64 {
        self.visible[cell.row * self.width + cell.col] as f64 / self.rays as f64
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.visible.iter().map(|v| *v as f64 / self.rays as f64)
    }

    /// Numeric matrix, one text row per grid row, top row = highest y.
    pub fn to_matrix_text(&self) -> String {
        let mut out = String::new();
        for row in (0..self.height).rev() {
            let line: Vec<String> = (0..self.width)
                .map(|col| format!("{:.4}", self.value(Cell::new(col, row))))
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Greyscale image, 0 = invisible/blocked, 255 = fully visible; north up.
    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let row = self.height - 1 - y as usize;
            Luma([grey_level(self.value(Cell::new(x as usize, row)))])
        })
    }

    /// Binary PGM encoding of [`to_image`](Self::to_image).
    pub fn to_pgm(&self) -> Vec<u8> {
        let img = self.to_image();
        let mut buf = Vec::new();
        PnmEncoder::new(&mut buf)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(img.as_raw(), img.width(), img.height(), ExtendedColorType::L8)
            .expect("in-memory PNM encoding cannot fail");
        buf
    }
}

pub fn grey_level(value: f64) -> u8 {
    (value.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Visibility of `landmark` from every free cell of `grid`.
pub fn compute_visibility_grid(
    grid: &OccupancyGrid,
    landmark: &Landmark,
) -> Result<VisibilityGrid, SvpError> {
    if landmark.samples.is_empty() {
        return Err(SvpError::EmptyLandmark(landmark.id.clone()));
    }
    let targets: Vec<_> = landmark.samples.iter().map(|p| raycast::to_lattice(grid, p)).collect();
    let visible = grid
        .cells()
        .map(|cell| {
            if grid.is_blocked(cell) {
                return 0;
            }
            let from = raycast::cell_center_lattice(cell);
            targets.iter().filter(|t| raycast::line_of_sight(grid, from, **t)).count() as u32
        })
        .collect();
    Ok(VisibilityGrid {
        landmark: landmark.id.clone(),
        width: grid.width,
        height: grid.height,
        rays: targets.len(),
        visible,
    })
}

/// A human standing cell plus a robot pose from which the robot can point at
/// the landmark and face the human.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub landmark: String,
    pub human_cell: Cell,
    pub human_target: Point2,
    pub visibility: f64,
    pub score: f64,
    pub robot_cell: Cell,
    pub robot: Pose2,
}

/// Human cell score: `alpha * visibility - beta * travel`.
pub fn human_score(config: &SvpConfig, visibility: f64, travel: f64) -> f64 {
    config.alpha * visibility - config.beta * travel
}

/// Chooses the human target cell and the robot pose.
///
/// The human cell maximizes [`human_score`] among free cells with visibility
/// at least `v_min` (ties: nearer cell, then row-major order). The robot cell
/// is a free cell at a distance within the configured band from the human
/// cell whose angle between landmark and human bearings is at most `phi_max`;
/// the smallest such angle wins (ties: nearer to the human, then row-major).
/// The robot faces the human.
pub fn plan_svp(
    human: Point2,
    landmark: &Landmark,
    visibility: &VisibilityGrid,
    grid: &OccupancyGrid,
    config: &SvpConfig,
) -> Result<Placement, SvpError> {
    let mut best: Option<(f64, f64, Cell)> = None;
    for cell in grid.cells() {
        if grid.is_blocked(cell) {
            continue;
        }
        let v = visibility.value(cell);
        if v < config.v_min {
            continue;
        }
        let travel = human.distance(&grid.center(cell));
        let score = human_score(config, v, travel);
        let better = match best {
            None => true,
            Some((bs, bt, _)) => score > bs || (score == bs && travel < bt),
        };
        if better {
            best = Some((score, travel, cell));
        }
    }
    let (score, _, human_cell) = best.ok_or_else(|| SvpError::NoSharedPerspective {
        landmark: landmark.id.clone(),
        v_min: config.v_min,
    })?;
    let human_target = grid.center(human_cell);

    let clearance_grid;
    let robot_grid = if config.robot_clearance > 0.0 {
        clearance_grid = grid.inflated(config.robot_clearance);
        &clearance_grid
    } else {
        grid
    };
    let mut robot_best: Option<(f64, f64, Cell)> = None;
    for cell in robot_grid.cells() {
        if robot_grid.is_blocked(cell) || cell == human_cell {
            continue;
        }
        let at = grid.center(cell);
        let d = at.distance(&human_target);
        if d < config.robot_distance_min || d > config.robot_distance_max {
            continue;
        }
        let phi = angle_between(at.bearing_to(&landmark.aim), at.bearing_to(&human_target));
        if phi > config.phi_max {
            continue;
        }
        let better = match robot_best {
            None => true,
            Some((bp, bd, _)) => phi < bp || (phi == bp && d < bd),
        };
        if better {
            robot_best = Some((phi, d, cell));
        }
    }
    let (_, _, robot_cell) =
        robot_best.ok_or_else(|| SvpError::NoRobotPose { landmark: landmark.id.clone() })?;
    let robot_at = grid.center(robot_cell);
    Ok(Placement {
        landmark: landmark.id.clone(),
        human_cell,
        human_target,
        visibility: visibility.value(human_cell),
        score,
        robot_cell,
        robot: Pose2::at(robot_at, robot_at.bearing_to(&human_target)),
    })
}

/// Gesture expressiveness, both in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GestureParams {
    pub amplitude: f64,
    pub speed: f64,
}

impl GestureParams {
    /// Values are clamped into `[0, 1]`.
    pub fn new(amplitude: f64, speed: f64) -> Self {
        GestureParams { amplitude: amplitude.clamp(0.0, 1.0), speed: speed.clamp(0.0, 1.0) }
    }
}

impl Default for GestureParams {
    fn default() -> Self {
        GestureParams { amplitude: 0.8, speed: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointingAngles {
    pub base_yaw: f64,
    pub arm_elevation: f64,
    pub params: GestureParams,
}

/// Base yaw toward the target and arm elevation from the shoulder, clamped
/// to `[-0.5, 1.2]` rad.
pub fn pointing_angles(
    robot: &Pose2,
    target: Point2,
    target_height: f64,
    params: GestureParams,
) -> Result<PointingAngles, SvpError> {
    let from = robot.position();
    let planar = from.distance(&target);
    if planar < 1e-9 {
        return Err(SvpError::DegenerateTarget);
    }
    let elevation = ((target_height - SHOULDER_HEIGHT) / planar).atan();
    Ok(PointingAngles {
        base_yaw: from.bearing_to(&target),
        arm_elevation: elevation.clamp(ELEVATION_MIN, ELEVATION_MAX),
        params,
    })
}
