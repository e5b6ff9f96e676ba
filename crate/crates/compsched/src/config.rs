//! Experiment configuration, read from TOML.
//!
//! Every field has a default matching the three-cell evaluation setup, so an
//! empty file is a valid configuration. Unknown keys are rejected.

use std::fmt;
use std::path::Path;

use compsched_core::feedback::FeedbackClass;
use compsched_core::netgeom::{LayoutConfig, PathlossModel, Topology};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    Rus,
    Lus,
    Nus,
    Localnus,
    Sus,
    Gus,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 6] =
        [SchedulerKind::Rus, SchedulerKind::Lus, SchedulerKind::Nus, SchedulerKind::Localnus, SchedulerKind::Sus, SchedulerKind::Gus];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::Rus => "rus",
            SchedulerKind::Lus => "lus",
            SchedulerKind::Nus => "nus",
            SchedulerKind::Localnus => "localnus",
            SchedulerKind::Sus => "sus",
            SchedulerKind::Gus => "gus",
        }
    }

    pub fn feedback_class(self) -> FeedbackClass {
        match self {
            SchedulerKind::Sus | SchedulerKind::Gus => FeedbackClass::OnePhase,
            SchedulerKind::Localnus => FeedbackClass::TwoPhaseLocal,
            SchedulerKind::Rus | SchedulerKind::Lus | SchedulerKind::Nus => FeedbackClass::TwoPhase,
        }
    }

    /// Schedulers driven by an orthogonality threshold.
    pub fn uses_threshold(self) -> bool {
        !matches!(self, SchedulerKind::Rus | SchedulerKind::Gus)
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Named threshold sets for NUS, LocalNUS and LUS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdPreset {
    /// NUS 0.4, LocalNUS 0.8, LUS 0.8.
    #[default]
    Text,
    /// NUS 0.8, LocalNUS 0.4, LUS 0.8.
    Caption,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub nus: f64,
    pub localnus: f64,
    pub lus: f64,
    pub sus: f64,
}

impl Thresholds {
    pub fn preset(preset: ThresholdPreset) -> Self {
        match preset {
            ThresholdPreset::Text => Thresholds { nus: 0.4, localnus: 0.8, lus: 0.8, sus: 0.5 },
            ThresholdPreset::Caption => Thresholds { nus: 0.8, localnus: 0.4, lus: 0.8, sus: 0.5 },
        }
    }

    /// Threshold of `kind`; `1.0` for schedulers without one.
    pub fn get(&self, kind: SchedulerKind) -> f64 {
        match kind {
            SchedulerKind::Nus => self.nus,
            SchedulerKind::Localnus => self.localnus,
            SchedulerKind::Lus => self.lus,
            SchedulerKind::Sus => self.sus,
            SchedulerKind::Rus | SchedulerKind::Gus => 1.0,
        }
    }

    pub fn set(&mut self, kind: SchedulerKind, eps: f64) {
        match kind {
            SchedulerKind::Nus => self.nus = eps,
            SchedulerKind::Localnus => self.localnus = eps,
            SchedulerKind::Lus => self.lus = eps,
            SchedulerKind::Sus => self.sus = eps,
            SchedulerKind::Rus | SchedulerKind::Gus => {}
        }
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds::preset(ThresholdPreset::default())
    }
}

/// Hexagonal cluster of coordinated cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutSection {
    pub cells: usize,
    pub interferer_rings: usize,
    pub bs_spacing_m: f64,
    pub antennas_per_bs: usize,
    pub users_per_cell: usize,
    pub max_power_w: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub shadowing_db: f64,
    pub angular_spread_deg: f64,
    pub antenna_spacing_wavelengths: f64,
}

impl Default for LayoutSection {
    fn default() -> Self {
        let c = LayoutConfig::main_campaign();
        LayoutSection {
            cells: 3,
            interferer_rings: 1,
            bs_spacing_m: c.bs_spacing_m,
            antennas_per_bs: c.antennas_per_bs,
            users_per_cell: c.users_per_cell,
            max_power_w: c.max_power_w,
            bandwidth_hz: c.bandwidth_hz,
            noise_figure_db: c.noise_figure_db,
            shadowing_db: 8.0,
            angular_spread_deg: 15.0,
            antenna_spacing_wavelengths: 0.5,
        }
    }
}

impl LayoutSection {
    pub fn layout_config(&self) -> LayoutConfig {
        LayoutConfig {
            topology: Topology::Hexagonal { cluster_size: self.cells, interferer_rings: self.interferer_rings },
            bs_spacing_m: self.bs_spacing_m,
            antennas_per_bs: self.antennas_per_bs,
            users_per_cell: self.users_per_cell,
            max_power_w: self.max_power_w,
            bandwidth_hz: self.bandwidth_hz,
            noise_figure_db: self.noise_figure_db,
        }
    }

    pub fn pathloss(&self) -> PathlossModel {
        PathlossModel::Campaign
    }
}

/// CSI available at the control unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum CsiMode {
    #[default]
    Perfect,
    /// Random-codebook direction feedback under a per-user (`B_u`) and total (`B_t`) bit cap.
    Quantized { per_user_bits: u32, total_bits: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Mobility {
    pub speed_kmh: f64,
    pub carrier_hz: f64,
    pub slot_s: f64,
}

impl Default for Mobility {
    fn default() -> Self {
        Mobility { speed_kmh: 30.0, carrier_hz: 2e9, slot_s: 5e-3 }
    }
}

impl Mobility {
    pub fn doppler_hz(&self) -> f64 {
        compsched_core::channel::doppler_hz(self.speed_kmh, self.carrier_hz)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub schedulers: Vec<SchedulerKind>,
    pub eps: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            schedulers: vec![SchedulerKind::Nus, SchedulerKind::Localnus, SchedulerKind::Lus],
            eps: (1..=10).map(|k| k as f64 / 10.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TightnessSection {
    pub half_distance_m: f64,
    pub antennas_per_bs: usize,
    pub selected_position_m: f64,
    pub candidate_positions_m: Vec<f64>,
    pub realizations: usize,
}

impl Default for TightnessSection {
    fn default() -> Self {
        TightnessSection {
            half_distance_m: 250.0,
            antennas_per_bs: 2,
            selected_position_m: -50.0,
            candidate_positions_m: (-21..=21).map(|k| k as f64 * 10.0).collect(),
            realizations: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnglePdfSection {
    pub half_distance_m: f64,
    pub antennas_per_bs: usize,
    /// `(d1, d2)` user positions on the line through both BSs.
    pub cases: Vec<(f64, f64)>,
    pub mc_samples: usize,
    pub directions: usize,
    pub bins: usize,
    pub truncation_tol: f64,
    pub max_truncation: usize,
}

impl Default for AnglePdfSection {
    fn default() -> Self {
        AnglePdfSection {
            half_distance_m: 250.0,
            antennas_per_bs: 1,
            cases: vec![(0.0, 0.0), (50.0, 100.0), (100.0, 100.0), (-50.0, 100.0), (-100.0, 100.0)],
            mc_samples: 1_000_000,
            directions: 8000,
            bins: 50,
            truncation_tol: 1e-4,
            max_truncation: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub drops: usize,
    pub schedulers: Vec<SchedulerKind>,
    pub threshold_preset: ThresholdPreset,
    /// Overrides the preset when given.
    pub thresholds: Option<Thresholds>,
    pub layout: LayoutSection,
    pub csi: CsiMode,
    pub mobility: Mobility,
    /// Run drops on the rayon pool.
    pub parallel: bool,
    pub sweep: SweepSection,
    pub tightness: TightnessSection,
    pub angle_pdf: AnglePdfSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            drops: 100,
            schedulers: SchedulerKind::ALL.to_vec(),
            threshold_preset: ThresholdPreset::default(),
            thresholds: None,
            layout: LayoutSection::default(),
            csi: CsiMode::default(),
            mobility: Mobility::default(),
            parallel: true,
            sweep: SweepSection::default(),
            tightness: TightnessSection::default(),
            angle_pdf: AnglePdfSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let config = Self::from_toml(&text).map_err(|source| HarnessError::ConfigParse { path: path.into(), source })?;
        config.validate()?;
        Ok(config)
    }

    pub fn thresholds(&self) -> Thresholds {
        self.thresholds.unwrap_or_else(|| Thresholds::preset(self.threshold_preset))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_owned()));
        if self.drops == 0 {
            return bad("drops must be at least 1");
        }
        if self.schedulers.is_empty() {
            return bad("scheduler list is empty");
        }
        let t = self.thresholds();
        for eps in [t.nus, t.localnus, t.lus, t.sus] {
            if !(eps > 0.0 && eps <= 1.0) {
                return bad("thresholds must lie in (0, 1]");
            }
        }
        if self.sweep.eps.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return bad("sweep thresholds must lie in (0, 1]");
        }
        if !(self.layout.angular_spread_deg > 0.0) {
            return bad("angular spread must be positive");
        }
        if let CsiMode::Quantized { per_user_bits, total_bits } = self.csi {
            if per_user_bits == 0 || total_bits == 0 {
                return bad("feedback budgets must be positive");
            }
        }
        if !(self.mobility.speed_kmh >= 0.0 && self.mobility.carrier_hz > 0.0 && self.mobility.slot_s > 0.0) {
            return bad("mobility needs speed >= 0 and positive carrier and slot");
        }
        if self.tightness.realizations == 0
            || self.tightness.antennas_per_bs == 0
            || self.angle_pdf.antennas_per_bs == 0
            || self.angle_pdf.bins == 0
            || self.angle_pdf.directions == 0
        {
            return bad("realization, bin and direction counts must be positive");
        }
        Ok(())
    }
}
