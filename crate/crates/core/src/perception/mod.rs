//! Simulated sensing: noisy person tracks and speech events derived from
//! ground truth, visual focus of attention from head pose, speech-to-person
//! assignment, and descriptor-vote re-identification.

mod reid;

pub use reid::{reidentify, Gallery, ReidDecision, Reidentifier};

use crate::geometry::{angle_between, wrap_angle, Point2, Pose2};
use crate::rng::{self, SimRng};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub const DESCRIPTOR_DIM: usize = 16;
/// Two tracks closer than this in azimuth cannot be told apart by sound.
pub const SPEAKER_SEPARATION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerceptionError {
    #[error("speech at azimuth {azimuth:.3} is ambiguous between tracks {a} and {b}")]
    AmbiguousSpeaker { azimuth: f64, a: u64, b: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthPerson {
    pub id: String,
    pub position: Point2,
    pub head_yaw: f64,
    pub head_pitch: f64,
    pub speaking: bool,
    pub descriptor: Vec<f64>,
    /// Words spoken this tick, if any (stands in for speech recognition).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    pub range_max: f64,
    /// Camera half-angle.
    pub fov: f64,
    pub sigma_pos: f64,
    pub sigma_angle: f64,
    pub sigma_descriptor: f64,
    pub dropout: f64,
    pub vfoa_cone: f64,
    pub speech_tolerance: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            range_max: 5.0,
            fov: 0.61,
            sigma_pos: 0.02,
            sigma_angle: 0.02,
            sigma_descriptor: 0.02,
            dropout: 0.0,
            vfoa_cone: 0.26,
            speech_tolerance: 0.35,
        }
    }
}

impl SensorConfig {
    pub fn noiseless() -> Self {
        SensorConfig { sigma_pos: 0.0, sigma_angle: 0.0, sigma_descriptor: 0.0, dropout: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        let non_neg = [
            ("range_max", self.range_max),
            ("fov", self.fov),
            ("sigma_pos", self.sigma_pos),
            ("sigma_angle", self.sigma_angle),
            ("sigma_descriptor", self.sigma_descriptor),
            ("vfoa_cone", self.vfoa_cone),
            ("speech_tolerance", self.speech_tolerance),
        ];
        for (name, v) in non_neg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be a non-negative number"));
            }
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            return Err("dropout must be in [0, 1]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonTrack {
    pub track_id: u64,
    pub position: Point2,
    pub head_yaw: f64,
    pub head_pitch: f64,
    pub distance: f64,
    /// Bearing in the sensor frame.
    pub azimuth: f64,
    pub tick: u64,
    pub descriptor: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechEvent {
    pub azimuth: f64,
    pub p_speech: f64,
    pub tick: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub tracks: Vec<PersonTrack>,
    pub speech: Vec<SpeechEvent>,
}

/// Unit-norm descriptor for a synthetic identity, derived from its label.
pub fn descriptor_for(label: &str) -> Vec<f64> {
    let mut r = rng::stream(0, &format!("descriptor:{label}"));
    let v: Vec<f64> = (0..DESCRIPTOR_DIM).map(|_| StandardNormal.sample(&mut r)).collect();
    normalize(v)
}

pub fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

fn gauss(rng: &mut SimRng, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * sigma
}

/// Sensor with its tracklet table: a person keeps a track id while seen on
/// consecutive ticks and gets a fresh one after any gap.
#[derive(Debug, Clone)]
pub struct Sensor {
    pub config: SensorConfig,
    rng: SimRng,
    tracklets: BTreeMap<String, (u64, u64)>,
    next_track: u64,
}

impl Sensor {
    pub fn new(config: SensorConfig, seed: u64) -> Self {
        Sensor { config, rng: rng::stream(seed, "perception"), tracklets: BTreeMap::new(), next_track: 1 }
    }

    /// One sensing pass from `sensor` (position plus gaze heading).
    ///
    /// Every person consumes the same random draws whether or not it is
    /// seen, so one person's visibility never shifts another's noise.
    pub fn sense(&mut self, persons: &[GroundTruthPerson], sensor: &Pose2, tick: u64) -> Observation {
        let c = self.config.clone();
        let origin = sensor.position();
        let mut obs = Observation::default();
        for p in persons {
            let drop: f64 = self.rng.random();
            let (nx, ny) = (gauss(&mut self.rng, c.sigma_pos), gauss(&mut self.rng, c.sigma_pos));
            let (nyaw, npitch) = (gauss(&mut self.rng, c.sigma_angle), gauss(&mut self.rng, c.sigma_angle));
            let nspeech = gauss(&mut self.rng, c.sigma_angle);
            let ndesc: Vec<f64> =
                (0..p.descriptor.len()).map(|_| gauss(&mut self.rng, c.sigma_descriptor)).collect();

            let distance = origin.distance(&p.position);
            let azimuth = if distance > 0.0 { wrap_angle(origin.bearing_to(&p.position) - sensor.yaw) } else { 0.0 };
            let in_range = distance <= c.range_max;
            if in_range && p.speaking {
                obs.speech.push(SpeechEvent {
                    azimuth: wrap_angle(azimuth + nspeech),
                    p_speech: 0.9,
                    tick,
                    text: p.utterance.clone(),
                });
            }
            let seen = in_range && azimuth.abs() <= c.fov && drop >= c.dropout;
            if !seen {
                continue;
            }
            let track_id = match self.tracklets.get(&p.id) {
                Some(&(id, last)) if last + 1 == tick => id,
                _ => {
                    self.next_track += 1;
                    self.next_track - 1
                }
            };
            self.tracklets.insert(p.id.clone(), (track_id, tick));
            let position = Point2::new(p.position.x + nx, p.position.y + ny);
            let descriptor = normalize(p.descriptor.iter().zip(&ndesc).map(|(d, n)| d + n).collect());
            obs.tracks.push(PersonTrack {
                track_id,
                position,
                head_yaw: wrap_angle(p.head_yaw + nyaw),
                head_pitch: p.head_pitch + npitch,
                distance: origin.distance(&position),
                azimuth: if distance > 0.0 { wrap_angle(origin.bearing_to(&position) - sensor.yaw) } else { 0.0 },
                tick,
                descriptor,
            });
        }
        obs.tracks.sort_by_key(|t| t.track_id);
        obs
    }
}

/// Target the head points at: the one with the smallest angular offset
/// between head direction and the bearing to it, if under `cone`. Ties go to
/// the earlier target in the list.
pub fn estimate_vfoa<'a>(track: &PersonTrack, targets: &'a [(String, Point2)], cone: f64) -> Option<&'a str> {
    let mut best: Option<(f64, &str)> = None;
    for (id, at) in targets {
        if at.distance(&track.position) == 0.0 {
            continue;
        }
        let offset = angle_between(track.head_yaw, track.position.bearing_to(at));
        if best.is_none_or(|(b, _)| offset < b) {
            best = Some((offset, id));
        }
    }
    best.filter(|(o, _)| *o < cone).map(|(_, id)| id)
}

/// Track standing in the direction the speech came from.
///
/// The track with the nearest azimuth within `tolerance` wins; when another
/// candidate is within [`SPEAKER_SEPARATION`] of the winner the speaker is
/// ambiguous.
pub fn assign_speech(event: &SpeechEvent, tracks: &[PersonTrack], tolerance: f64) -> Result<Option<u64>, PerceptionError> {
    let mut candidates: Vec<(f64, &PersonTrack)> = tracks
        .iter()
        .map(|t| (angle_between(event.azimuth, t.azimuth), t))
        .filter(|(off, _)| *off <= tolerance)
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.track_id.cmp(&b.1.track_id)));
    let Some(&(_, best)) = candidates.first() else {
        return Ok(None);
    };
    if let Some((_, other)) = candidates[1..]
        .iter()
        .find(|(_, t)| angle_between(t.azimuth, best.azimuth) < SPEAKER_SEPARATION)
    {
        return Err(PerceptionError::AmbiguousSpeaker { azimuth: event.azimuth, a: best.track_id, b: other.track_id });
    }
    Ok(Some(best.track_id))
}

/// Noise radius for tests and scenario generators: descriptor perturbation
/// scaled to the dimension.
pub fn descriptor_noise_radius(sigma: f64) -> f64 {
    sigma * (DESCRIPTOR_DIM as f64).sqrt()
}

/// Draws `n` noisy samples of `base`.
pub fn sample_descriptors(base: &[f64], sigma: f64, n: usize, rng: &mut SimRng) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    (0..n)
        .map(|_| normalize(base.iter().map(|x| x + normal.sample(rng)).collect()))
        .collect()
}
