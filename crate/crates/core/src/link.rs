//! Beamformed line-of-sight link budget: steering vectors, spreading and
//! absorption loss, aligned-beam array gain, SINR and multi-sub-band capacity.
//!
//! Beams are assumed perfectly aligned at both ends, so a link with `S_tx`
//! transmitting and `S_rx` receiving sub-arrays collects the full array gain of
//! both apertures. The combiner noise factor is folded into the noise power.

use crate::error::{Error, Result};
use crate::geo::{Vec3, BOLTZMANN_J_K, SPEED_OF_LIGHT_M_S};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    pub mx: usize,
    pub my: usize,
    /// Element spacing in wavelengths.
    pub spacing_wavelengths: f64,
    /// Per-element gain of both transmitter and receiver, dBi.
    pub element_gain_dbi: f64,
    /// Transmitting sub-arrays per satellite and phase.
    pub max_tx_subarrays: usize,
    /// Receiving sub-arrays dedicated to each incoming link.
    pub rx_subarrays_per_link: usize,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            mx: 4,
            my: 4,
            spacing_wavelengths: 0.5,
            element_gain_dbi: 10.0,
            max_tx_subarrays: 64,
            rx_subarrays_per_link: 1,
        }
    }
}

impl ArrayConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mx == 0 || self.my == 0 {
            return Err(Error::config("array.mx/my", "must be at least 1"));
        }
        if self.max_tx_subarrays < 4 {
            return Err(Error::config(
                "array.max_tx_subarrays",
                "must cover the four simultaneous ISLs",
            ));
        }
        if self.rx_subarrays_per_link == 0 {
            return Err(Error::config("array.rx_subarrays_per_link", "must be at least 1"));
        }
        Ok(())
    }

    pub fn elements(&self) -> usize {
        self.mx * self.my
    }

    pub fn steering(&self, phi: f64, theta: f64, wavelength_m: f64) -> Vec<Complex64> {
        steering_vector(
            phi,
            theta,
            self.mx,
            self.my,
            self.spacing_wavelengths * wavelength_m,
            wavelength_m,
        )
    }
}

/// Planar-array steering vector, `mx`-major element order, unit norm.
pub fn steering_vector(
    phi: f64,
    theta: f64,
    mx: usize,
    my: usize,
    spacing_m: f64,
    wavelength_m: f64,
) -> Vec<Complex64> {
    let scale = 1.0 / ((mx * my) as f64).sqrt();
    let k = 2.0 * PI * spacing_m / wavelength_m;
    let (st, ct) = theta.sin_cos();
    let cp = phi.cos();
    let mut out = Vec::with_capacity(mx * my);
    for ix in 0..mx {
        for iy in 0..my {
            let phase = k * (ix as f64 * st * cp + iy as f64 * ct);
            out.push(Complex64::from_polar(scale, phase));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainInterpretation {
    /// Element gain multiplies the channel amplitude, so it enters `|h|^2` squared.
    #[default]
    Amplitude,
    Power,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InterferenceModel {
    #[default]
    None,
    Fixed {
        mean_w: f64,
    },
    /// Drawn once per slot, clamped at zero.
    Gaussian {
        mean_w: f64,
        std_w: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBudgetParams {
    pub max_power_w: f64,
    pub noise_temperature_k: f64,
    pub interference: InterferenceModel,
    pub gain_interpretation: GainInterpretation,
    /// A sub-band is marked used when its power exceeds this threshold.
    pub psi_threshold_w: f64,
}

impl Default for LinkBudgetParams {
    fn default() -> Self {
        Self {
            max_power_w: 10.0,
            noise_temperature_k: 290.0,
            interference: InterferenceModel::None,
            gain_interpretation: GainInterpretation::Amplitude,
            psi_threshold_w: 0.0,
        }
    }
}

impl LinkBudgetParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_power_w > 0.0) {
            return Err(Error::config("link.max_power_w", "must be positive"));
        }
        if !(self.noise_temperature_k > 0.0) {
            return Err(Error::config("link.noise_temperature_k", "must be positive"));
        }
        match self.interference {
            InterferenceModel::Fixed { mean_w } if !(mean_w >= 0.0) => {
                Err(Error::config("link.interference.mean_w", "must be non-negative"))
            }
            InterferenceModel::Gaussian { mean_w, std_w } if !(mean_w >= 0.0 && std_w >= 0.0) => {
                Err(Error::config("link.interference", "mean and std must be non-negative"))
            }
            _ => Ok(()),
        }
    }
}

/// Exponential atmosphere: `g(f, h) = g0 * exp(-h / H)` below `ceiling_km`, zero above.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbsorptionProfile {
    pub sea_level_coeff_per_km: f64,
    pub scale_height_km: f64,
    pub ceiling_km: f64,
    pub segments: usize,
}

impl Default for AbsorptionProfile {
    fn default() -> Self {
        Self {
            sea_level_coeff_per_km: 0.0,
            scale_height_km: 6.0,
            ceiling_km: 100.0,
            segments: 256,
        }
    }
}

impl AbsorptionProfile {
    pub fn with_coeff(g0: f64) -> Self {
        Self {
            sea_level_coeff_per_km: g0,
            ..Default::default()
        }
    }

    /// `exp(-integral of g along the segment)`; exactly 1 when the segment never
    /// dips below the ceiling.
    pub fn transmittance(&self, a: Vec3, b: Vec3, earth_radius_km: f64) -> f64 {
        let lowest = lowest_altitude(a, b, earth_radius_km);
        if lowest >= self.ceiling_km || self.sea_level_coeff_per_km == 0.0 {
            return 1.0;
        }
        let n = self.segments.max(32);
        let len = a.distance(b);
        let coeff = |s: f64| {
            let h = a.lerp(b, s).norm() - earth_radius_km;
            if h >= self.ceiling_km {
                0.0
            } else {
                self.sea_level_coeff_per_km * (-h.max(0.0) / self.scale_height_km).exp()
            }
        };
        let step = 1.0 / n as f64;
        let mut acc = 0.5 * (coeff(0.0) + coeff(1.0));
        for k in 1..n {
            acc += coeff(k as f64 * step);
        }
        (-(acc * step * len)).exp()
    }
}

fn lowest_altitude(a: Vec3, b: Vec3, earth_radius_km: f64) -> f64 {
    let ab = b - a;
    let denom = ab.dot(ab);
    let s = if denom > 0.0 {
        (-a.dot(ab) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    a.lerp(b, s).norm() - earth_radius_km
}

/// `|alpha|^2` of a line-of-sight path at carrier `f_hz`.
pub fn path_gain(
    f_hz: f64,
    tx: Vec3,
    rx: Vec3,
    profile: &AbsorptionProfile,
    earth_radius_km: f64,
) -> Result<f64> {
    let d_km = tx.distance(rx);
    if !(d_km > 0.0) {
        return Err(Error::Domain("path gain needs distinct endpoints".into()));
    }
    Ok(spreading_gain(f_hz, d_km * 1e3) * profile.transmittance(tx, rx, earth_radius_km))
}

/// Free-space spreading term `(c / (4 pi f d))^2`.
pub fn spreading_gain(f_hz: f64, d_m: f64) -> f64 {
    let a = SPEED_OF_LIGHT_M_S / (4.0 * PI * f_hz * d_m);
    a * a
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Aligned-beam effective channel power `|h|^2`.
pub fn link_gain(
    s_tx: usize,
    s_rx: usize,
    array: &ArrayConfig,
    element_gain_linear: f64,
    interpretation: GainInterpretation,
    alpha2: f64,
) -> f64 {
    let m = array.elements() as f64;
    let g = match interpretation {
        GainInterpretation::Power => element_gain_linear,
        GainInterpretation::Amplitude => element_gain_linear * element_gain_linear,
    };
    (s_tx as f64 * m) * (s_rx as f64 * m) * g * g * alpha2
}

pub fn sinr(power_w: f64, h2: f64, interference_w: f64, noise_w: f64) -> f64 {
    power_w * h2 / (interference_w + noise_w)
}

/// Thermal noise `k T B` in watts.
pub fn noise_power(temperature_k: f64, bandwidth_hz: f64) -> f64 {
    BOLTZMANN_J_K * temperature_k * bandwidth_hz
}

/// `sum_k psi_k * B * log2(1 + sinr_k)` in bit/s.
pub fn link_rate(subbands: &[(bool, f64)], bandwidth_hz: f64) -> f64 {
    subbands
        .iter()
        .filter(|(used, _)| *used)
        .map(|(_, g)| bandwidth_hz * (1.0 + g).log2())
        .sum()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[default]
    Offloading,
    Outcome,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandPreset {
    #[default]
    Thz,
    Ka,
    Ku,
}

impl BandPreset {
    pub const ALL: [BandPreset; 3] = [BandPreset::Thz, BandPreset::Ka, BandPreset::Ku];

    pub fn name(self) -> &'static str {
        match self {
            BandPreset::Thz => "thz",
            BandPreset::Ka => "ka",
            BandPreset::Ku => "ku",
        }
    }

    /// Phase carrier center in Hz.
    pub fn center_hz(self, phase: Phase) -> f64 {
        match (self, phase) {
            (BandPreset::Thz, Phase::Offloading) => 135e9,
            (BandPreset::Thz, Phase::Outcome) => 215e9,
            (BandPreset::Ka, Phase::Offloading) => 30e9,
            (BandPreset::Ka, Phase::Outcome) => 35e9,
            (BandPreset::Ku, Phase::Offloading) => 14e9,
            (BandPreset::Ku, Phase::Outcome) => 16e9,
        }
    }
}

impl std::str::FromStr for BandPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thz" => Ok(BandPreset::Thz),
            "ka" => Ok(BandPreset::Ka),
            "ku" => Ok(BandPreset::Ku),
            other => Err(Error::config("band", format!("unknown band `{other}`"))),
        }
    }
}

/// Per-band sea-level absorption coefficients (1/km) for the two phases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbsorptionTable {
    pub thz: [f64; 2],
    pub ka: [f64; 2],
    pub ku: [f64; 2],
}

impl Default for AbsorptionTable {
    fn default() -> Self {
        Self {
            thz: [0.05, 0.1],
            ka: [0.01, 0.012],
            ku: [0.004, 0.005],
        }
    }
}

impl AbsorptionTable {
    pub fn coeff(&self, band: BandPreset, phase: Phase) -> f64 {
        let row = match band {
            BandPreset::Thz => self.thz,
            BandPreset::Ka => self.ka,
            BandPreset::Ku => self.ku,
        };
        match phase {
            Phase::Offloading => row[0],
            Phase::Outcome => row[1],
        }
    }
}

/// Sub-band layout and propagation profile of one phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandPlan {
    pub band: BandPreset,
    pub phase: Phase,
    pub centers_hz: Vec<f64>,
    pub bandwidth_hz: f64,
    /// Multiplier on the linear per-element gain relative to the THz design.
    pub element_gain_scale: f64,
    pub absorption: AbsorptionProfile,
}

impl BandPlan {
    /// `subbands` contiguous sub-bands around the band center. Lower bands keep
    /// the THz fractional bandwidth and effective aperture, so bandwidth scales
    /// with `f / f_thz` and per-element gain with `(f / f_thz)^2`.
    pub fn new(
        band: BandPreset,
        phase: Phase,
        subbands: usize,
        thz_bandwidth_hz: f64,
        absorption: &AbsorptionTable,
    ) -> Result<Self> {
        if subbands == 0 {
            return Err(Error::config("band.subbands", "must be at least 1"));
        }
        if !(thz_bandwidth_hz > 0.0) {
            return Err(Error::config("band.bandwidth_hz", "must be positive"));
        }
        let center = band.center_hz(phase);
        let ratio = center / BandPreset::Thz.center_hz(phase);
        let bw = thz_bandwidth_hz * ratio;
        let mid = (subbands as f64 - 1.0) / 2.0;
        let centers_hz = (0..subbands).map(|k| center + (k as f64 - mid) * bw).collect();
        Ok(Self {
            band,
            phase,
            centers_hz,
            bandwidth_hz: bw,
            element_gain_scale: ratio * ratio,
            absorption: AbsorptionProfile::with_coeff(absorption.coeff(band, phase)),
        })
    }

    pub fn subbands(&self) -> usize {
        self.centers_hz.len()
    }
}

/// Per-sub-band SINR and capacity of one directed link.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkEvaluation {
    pub sinr: Vec<f64>,
    pub used: Vec<bool>,
    pub rate_bps: f64,
}

impl LinkEvaluation {
    /// Mean SINR over used sub-bands, in dB; `None` if no sub-band is used.
    pub fn mean_sinr_db(&self) -> Option<f64> {
        let used: Vec<f64> = self
            .sinr
            .iter()
            .zip(&self.used)
            .filter(|(_, u)| **u)
            .map(|(g, _)| *g)
            .collect();
        if used.is_empty() {
            return None;
        }
        let mean = used.iter().sum::<f64>() / used.len() as f64;
        Some(linear_to_db(mean.max(1e-300)))
    }
}

/// Everything needed to turn an allocation into a rate on one phase.
#[derive(Clone, Debug)]
pub struct LinkModel<'a> {
    pub plan: &'a BandPlan,
    pub array: &'a ArrayConfig,
    pub budget: &'a LinkBudgetParams,
    pub earth_radius_km: f64,
}

impl LinkModel<'_> {
    pub fn noise_w(&self) -> f64 {
        noise_power(self.budget.noise_temperature_k, self.plan.bandwidth_hz)
    }

    pub fn evaluate(
        &self,
        tx: Vec3,
        rx: Vec3,
        s_tx: usize,
        powers_w: &[f64],
        interference_w: f64,
    ) -> Result<LinkEvaluation> {
        if powers_w.len() != self.plan.subbands() {
            return Err(Error::Dimension(format!(
                "{} sub-band powers for {} sub-bands",
                powers_w.len(),
                self.plan.subbands()
            )));
        }
        let g_elem = db_to_linear(self.array.element_gain_dbi) * self.plan.element_gain_scale;
        let noise = self.noise_w();
        let mut sinrs = Vec::with_capacity(powers_w.len());
        let mut used = Vec::with_capacity(powers_w.len());
        for (f, p) in self.plan.centers_hz.iter().zip(powers_w) {
            let a2 = path_gain(*f, tx, rx, &self.plan.absorption, self.earth_radius_km)?;
            let h2 = link_gain(
                s_tx,
                self.array.rx_subarrays_per_link,
                self.array,
                g_elem,
                self.budget.gain_interpretation,
                a2,
            );
            let on = *p > self.budget.psi_threshold_w;
            used.push(on);
            sinrs.push(if on { sinr(*p, h2, interference_w, noise) } else { 0.0 });
        }
        let pairs: Vec<(bool, f64)> = used.iter().copied().zip(sinrs.iter().copied()).collect();
        Ok(LinkEvaluation {
            rate_bps: link_rate(&pairs, self.plan.bandwidth_hz),
            sinr: sinrs,
            used,
        })
    }
}
