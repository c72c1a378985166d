//! Multi-object track lifecycle on top of the per-target filter.

use crate::association::{solve_assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::filter::{self, VelocityPrior, CHI2_INV_95};
use crate::model::ModelMatrices;
use crate::mot::Detection;
use crate::state::{
    from_state, to_measurement, BoundingBox, GaussianState, NoiseParams, Parameterization,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Deleted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub param: Parameterization,
    pub noise: NoiseParams,
    /// Minimum IoU between a predicted box and a detection for them to match.
    pub iou_threshold: f64,
    /// A track is deleted once it has gone more than this many frames unmatched.
    pub max_age: u32,
    /// Hits needed to confirm a track; the spawning detection counts as one.
    pub min_hits: u32,
    /// Also reject pairs whose Mahalanobis distance exceeds the 95% chi-square gate.
    pub use_mahalanobis_gate: bool,
    /// Include tentative tracks in per-frame output.
    pub emit_tentative: bool,
    pub velocity_prior: VelocityPrior,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            param: Parameterization::Cxcywh,
            noise: NoiseParams::default(),
            iou_threshold: 0.3,
            max_age: 5,
            min_hits: 3,
            use_mahalanobis_gate: false,
            emit_tentative: false,
            velocity_prior: VelocityPrior::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return Err(Error::InvalidConfig(format!(
                "iou_threshold must lie in [0, 1], got {}",
                self.iou_threshold
            )));
        }
        if self.max_age < 1 {
            return Err(Error::InvalidConfig("max_age must be at least 1".into()));
        }
        if self.min_hits < 1 {
            return Err(Error::InvalidConfig("min_hits must be at least 1".into()));
        }
        let prior_ok = match self.velocity_prior {
            VelocityPrior::MeasurementScaled(f) | VelocityPrior::Fixed(f) => {
                f.is_finite() && f >= 0.0
            }
        };
        if !prior_ok {
            return Err(Error::InvalidConfig(
                "velocity prior must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Track {
    id: u64,
    state: GaussianState,
    hits: u32,
    misses: u32,
    status: TrackStatus,
    confirmed_once: bool,
    history: Vec<(u64, BoundingBox)>,
}

impl Track {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn state(&self) -> &GaussianState {
        &self.state
    }

    pub fn hits(&self) -> u32 {
        self.hits
    }

    pub fn misses(&self) -> u32 {
        self.misses
    }

    pub fn status(&self) -> TrackStatus {
        self.status
    }

    /// Frames at which this track was updated by a detection, with the posterior box.
    pub fn history(&self) -> &[(u64, BoundingBox)] {
        &self.history
    }
}

/// One track reported for a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOutput {
    pub id: u64,
    pub bbox: BoundingBox,
    pub status: TrackStatus,
}

/// Boxes of one confirmed track at the frames where it was updated.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackHistory {
    pub id: u64,
    pub boxes: Vec<(u64, BoundingBox)>,
}

/// SORT-style tracker for a single sequence.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    models: ModelMatrices,
    live: Vec<Track>,
    retired: Vec<Track>,
    next_id: u64,
    last_frame: Option<u64>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        let models = ModelMatrices::build(config.param, &config.noise)?;
        Ok(Self {
            config,
            models,
            live: Vec::new(),
            retired: Vec::new(),
            next_id: 1,
            last_frame: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn tracks(&self) -> &[Track] {
        &self.live
    }

    /// Advances one frame: predict every live track, associate, update, spawn, retire.
    ///
    /// `frame` is the 0-based frame index; all detections must carry it.
    pub fn step(&mut self, frame: u64, detections: &[Detection]) -> Result<Vec<TrackOutput>> {
        if let Some(last) = self.last_frame {
            if frame < last {
                return Err(Error::OutOfOrderFrame { frame, last });
            }
        }
        if let Some(d) = detections.iter().find(|d| d.frame != frame) {
            return Err(Error::FrameMismatch {
                frame,
                detection: d.frame,
            });
        }
        self.last_frame = Some(frame);

        let param = self.config.param;
        let mut predicted_boxes = Vec::with_capacity(self.live.len());
        let mut survivors = Vec::with_capacity(self.live.len());
        for mut track in std::mem::take(&mut self.live) {
            track.state = filter::predict(&track.state, &self.models.f, &self.models.q)?;
            match from_state(track.state.mean(), param) {
                Ok(b) => {
                    predicted_boxes.push(b);
                    survivors.push(track);
                }
                // predicted size left the valid region
                Err(_) => self.retire(track),
            }
        }
        self.live = survivors;

        let det_boxes: Vec<BoundingBox> = detections.iter().map(|d| d.bbox).collect();
        let measurements: Vec<_> = det_boxes.iter().map(|b| to_measurement(b, param)).collect();
        let mut costs = CostMatrix::iou_costs(&predicted_boxes, &det_boxes);
        if self.config.use_mahalanobis_gate {
            let gate = CHI2_INV_95[param.meas_dim() - 1];
            let (h, r) = (&self.models.h, &self.models.r);
            let live = &self.live;
            costs.gate(|i, j| {
                filter::gating_distance(&live[i].state, &measurements[j], h, r)
                    .map_or(true, |d| d > gate)
            });
        }
        let assignment = solve_assignment(&costs, 1.0 - self.config.iou_threshold);

        let mut degenerate = vec![false; self.live.len()];
        for &(ti, di) in &assignment.matches {
            let track = &mut self.live[ti];
            let (posterior, _) = filter::update(
                &track.state,
                &measurements[di],
                &self.models.h,
                &self.models.r,
            )?;
            track.state = posterior;
            track.hits += 1;
            track.misses = 0;
            if track.status == TrackStatus::Tentative && track.hits >= self.config.min_hits {
                track.status = TrackStatus::Confirmed;
                track.confirmed_once = true;
            }
            match from_state(track.state.mean(), param) {
                Ok(b) => track.history.push((frame, b)),
                Err(_) => degenerate[ti] = true,
            }
        }
        for &ti in &assignment.unmatched_tracks {
            self.live[ti].misses += 1;
        }

        let max_age = self.config.max_age;
        let (keep, drop): (Vec<_>, Vec<_>) = std::mem::take(&mut self.live)
            .into_iter()
            .zip(degenerate)
            .partition(|(t, bad)| !bad && t.misses <= max_age);
        self.live = keep.into_iter().map(|(t, _)| t).collect();
        for (t, _) in drop {
            self.retire(t);
        }

        for &di in &assignment.unmatched_detections {
            self.spawn(frame, &measurements[di], det_boxes[di])?;
        }

        Ok(self.outputs())
    }

    fn spawn(&mut self, frame: u64, z: &nalgebra::DVector<f64>, bbox: BoundingBox) -> Result<()> {
        let state = filter::initiate(
            z,
            self.config.param,
            &self.config.noise,
            self.config.velocity_prior,
        )?;
        let confirmed = self.config.min_hits <= 1;
        self.live.push(Track {
            id: self.next_id,
            state,
            hits: 1,
            misses: 0,
            status: if confirmed {
                TrackStatus::Confirmed
            } else {
                TrackStatus::Tentative
            },
            confirmed_once: confirmed,
            history: vec![(frame, bbox)],
        });
        self.next_id += 1;
        Ok(())
    }

    fn retire(&mut self, mut track: Track) {
        track.status = TrackStatus::Deleted;
        if track.confirmed_once {
            self.retired.push(track);
        }
    }

    fn outputs(&self) -> Vec<TrackOutput> {
        self.live
            .iter()
            .filter(|t| {
                t.status == TrackStatus::Confirmed
                    || (self.config.emit_tentative && t.status == TrackStatus::Tentative)
            })
            .filter_map(|t| {
                from_state(t.state.mean(), self.config.param)
                    .ok()
                    .map(|bbox| TrackOutput {
                        id: t.id,
                        bbox,
                        status: t.status,
                    })
            })
            .collect()
    }

    /// Histories of every track that was ever confirmed, ordered by id.
    pub fn flush(&self) -> Vec<TrackHistory> {
        let mut out: Vec<TrackHistory> = self
            .retired
            .iter()
            .chain(self.live.iter().filter(|t| t.confirmed_once))
            .map(|t| TrackHistory {
                id: t.id,
                boxes: t.history.clone(),
            })
            .collect();
        out.sort_by_key(|h| h.id);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(frame: u64, cx: f64, cy: f64) -> Detection {
        Detection {
            frame,
            bbox: BoundingBox::new(cx, cy, 20.0, 40.0).unwrap(),
            confidence: 1.0,
        }
    }

    #[test]
    fn spawns_tentative_tracks_with_sequential_ids() {
        let mut t = Tracker::new(TrackerConfig {
            emit_tentative: true,
            ..Default::default()
        })
        .unwrap();
        let out = t
            .step(
                0,
                &[det(0, 0.0, 0.0), det(0, 100.0, 0.0), det(0, 200.0, 0.0)],
            )
            .unwrap();
        let ids: Vec<_> = out.iter().map(|o| o.id).collect();
        assert_eq!(ids, vec![1, 2, 3]);
        assert!(out.iter().all(|o| o.status == TrackStatus::Tentative));
    }

    #[test]
    fn default_output_hides_tentative_tracks() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        assert!(t.step(0, &[det(0, 0.0, 0.0)]).unwrap().is_empty());
        assert_eq!(t.tracks().len(), 1);
    }

    #[test]
    fn confirmation_after_min_hits_and_persisting_id() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        for f in 0..3 {
            t.step(f, &[det(f, 50.0, 50.0)]).unwrap();
        }
        let track = &t.tracks()[0];
        assert_eq!((track.status(), track.hits()), (TrackStatus::Confirmed, 3));

        // detection exactly at the predicted location
        let predicted = from_state(
            &(&t.models.f * t.tracks()[0].state().mean()),
            Parameterization::Cxcywh,
        )
        .unwrap();
        let out = t
            .step(
                3,
                &[Detection {
                    frame: 3,
                    bbox: predicted,
                    confidence: 1.0,
                }],
            )
            .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id, 1);
        assert_eq!(t.tracks()[0].hits(), 4);
    }

    #[test]
    fn out_of_order_and_mismatched_frames() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        t.step(5, &[]).unwrap();
        assert!(matches!(
            t.step(4, &[]),
            Err(Error::OutOfOrderFrame { frame: 4, last: 5 })
        ));
        assert!(matches!(
            t.step(6, &[det(7, 0.0, 0.0)]),
            Err(Error::FrameMismatch { .. })
        ));
        // repeated frame index is allowed
        t.step(5, &[]).unwrap();
    }

    #[test]
    fn coasting_then_deletion_after_max_age() {
        let mut t = Tracker::new(TrackerConfig {
            max_age: 2,
            min_hits: 1,
            ..Default::default()
        })
        .unwrap();
        t.step(0, &[det(0, 10.0, 10.0)]).unwrap();
        for f in 1..=2 {
            let out = t.step(f, &[]).unwrap();
            assert_eq!(out.len(), 1, "coasting confirmed track still reported");
            assert_eq!(t.tracks()[0].misses(), f as u32);
        }
        assert!(t.step(3, &[]).unwrap().is_empty());
        assert!(t.tracks().is_empty());
        // a new detection at the same place gets a fresh id
        t.step(4, &[det(4, 10.0, 10.0)]).unwrap();
        assert_eq!(t.tracks()[0].id(), 2);
    }

    #[test]
    fn flush_is_idempotent_and_skips_unconfirmed() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        assert!(t.flush().is_empty());
        t.step(0, &[det(0, 0.0, 0.0)]).unwrap();
        assert!(t.flush().is_empty());
        for f in 1..4 {
            t.step(f, &[det(f, 0.0, 0.0)]).unwrap();
        }
        let a = t.flush();
        assert_eq!(a, t.flush());
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].boxes.len(), 4);
    }

    #[test]
    fn negative_predicted_size_deletes_track() {
        let mut t = Tracker::new(TrackerConfig {
            param: Parameterization::CxcywhV,
            min_hits: 1,
            ..Default::default()
        })
        .unwrap();
        // width collapses by 15 px per frame
        for (f, w) in [(0u64, 40.0), (1, 25.0), (2, 10.0)] {
            let d = Detection {
                frame: f,
                bbox: BoundingBox::new(0.0, 0.0, w, 40.0).unwrap(),
                confidence: 1.0,
            };
            t.step(f, &[d]).unwrap();
        }
        let mut deleted = false;
        for f in 3..6 {
            t.step(f, &[]).unwrap();
            if t.tracks().is_empty() {
                deleted = true;
                break;
            }
        }
        assert!(deleted);
        assert_eq!(t.flush().len(), 1);
    }

    #[test]
    fn mahalanobis_gate_blocks_far_match() {
        let base = TrackerConfig {
            min_hits: 1,
            iou_threshold: 0.01,
            noise: NoiseParams::uniform(1.0, 0.1, 0.1).unwrap(),
            ..Default::default()
        };
        let far = |f| det(f, 8.0, 0.0);
        let mut plain = Tracker::new(base.clone()).unwrap();
        plain.step(0, &[det(0, 0.0, 0.0)]).unwrap();
        plain.step(1, &[far(1)]).unwrap();
        assert_eq!(plain.tracks().len(), 1, "IoU alone accepts the match");

        let mut gated = Tracker::new(TrackerConfig {
            use_mahalanobis_gate: true,
            ..base
        })
        .unwrap();
        gated.step(0, &[det(0, 0.0, 0.0)]).unwrap();
        gated.step(1, &[far(1)]).unwrap();
        assert_eq!(gated.tracks().len(), 2);
    }

    #[test]
    fn config_validation() {
        for cfg in [
            TrackerConfig {
                max_age: 0,
                ..Default::default()
            },
            TrackerConfig {
                min_hits: 0,
                ..Default::default()
            },
            TrackerConfig {
                iou_threshold: 1.5,
                ..Default::default()
            },
            TrackerConfig {
                velocity_prior: VelocityPrior::Fixed(f64::NAN),
                ..Default::default()
            },
        ] {
            assert!(matches!(Tracker::new(cfg), Err(Error::InvalidConfig(_))));
        }
    }
}
