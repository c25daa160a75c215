use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::rates::{
    calibrate_balance, GlauberRateSpec, JumpRate, JumpRateKind, ModelCurves, RateModel, TailRule,
};
use crate::sharp::signed_distance_circle;
use crate::sim::LatticeTorus;

/// Jump-rate section of a model config (`g.kind`, `g.table`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailRule>,
}

impl GConfig {
    pub fn build(&self) -> Result<JumpRate, HarnessError> {
        let kind = match self.kind.as_str() {
            "linear" => JumpRateKind::Linear {
                slope: self.slope.unwrap_or(1.0),
            },
            "indicator" => JumpRateKind::Indicator,
            "capped" => JumpRateKind::Capped {
                cap: self.cap.ok_or_else(|| {
                    HarnessError::Invalid("g.kind=capped requires g.cap".into())
                })?,
            },
            "table" => JumpRateKind::Table {
                values: self
                    .table
                    .clone()
                    .ok_or_else(|| HarnessError::Invalid("g.kind=table requires g.table".into()))?,
                tail: self.tail.unwrap_or(TailRule::Constant),
            },
            other => {
                return Err(HarnessError::Invalid(format!(
                    "unknown g.kind `{other}` (expected linear|indicator|capped|table)"
                )))
            }
        };
        Ok(JumpRate::new(kind)?)
    }
}

/// `a_star` is either an explicit level or `"auto"`, which triggers balance
/// calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AStar {
    Value(f64),
    Auto(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlauberConfig {
    #[serde(rename = "C")]
    pub c: f64,
    pub a_minus: f64,
    pub a_plus: f64,
    pub a_star: AStar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Microscopic zero-range + Glauber model; `phi` and `f` come from the
    /// equilibrium computations.
    ZeroRange {
        g: GConfig,
        glauber: GlauberConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offsets: Option<Vec<Vec<i64>>>,
    },
    /// Linear diffusion with a balanced cubic reaction; the classical
    /// benchmark with `lambda0 = 1`.
    Synthetic {
        alpha_minus: f64,
        alpha_star: f64,
        alpha_plus: f64,
        scale: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Copy> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }

    pub fn first(&self) -> T {
        self.values()[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub d: usize,
    pub n: OneOrMany<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant {
        value: f64,
    },
    /// Sharp split along the first axis: `left` on `v1 < 1/2`, `right` after.
    TwoPhase {
        left: f64,
        right: f64,
    },
    /// Smoothed disk with the `alpha*` level set exactly at radius `r0`.
    Disk {
        center: [f64; 2],
        r0: f64,
        width: f64,
    },
    /// `base + amp cos(2 pi v1) [cos(2 pi v2)]`.
    Cosine {
        base: f64,
        amp: f64,
    },
    /// Explicit per-site values, row-major in the flat site index.
    Table {
        values: Vec<f64>,
    },
}

fn default_replicas() -> u32 {
    1
}
fn default_snapshots() -> u32 {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeKnobs {
    /// CFL factor in (0, 1].
    pub safety: f64,
    pub spline_knots: usize,
    pub trunc_tol: f64,
}

impl Default for PdeKnobs {
    fn default() -> Self {
        Self {
            safety: 0.25,
            spline_knots: 2048,
            trunc_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationKnobs {
    pub delta: Vec<f64>,
    pub m0: Vec<f64>,
    /// Envelope margin constant; `None` uses `2 max|f| / gamma`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c4: Option<f64>,
    pub envelope_times: usize,
}

impl Default for GenerationKnobs {
    fn default() -> Self {
        Self {
            delta: vec![0.05],
            m0: vec![0.5, 1.0, 2.0, 4.0],
            c4: None,
            envelope_times: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationKnobs {
    /// Track the radius law down to this radius.
    pub r_min: f64,
    /// Relative radius error allowed against the fitted reference.
    pub radius_tol: f64,
    /// The doubled-speed negative control must exceed this error.
    pub control_tol: f64,
    /// Far-field plateau tolerance.
    pub far_field_delta: f64,
}

impl Default for PropagationKnobs {
    fn default() -> Self {
        Self {
            r_min: 0.1,
            radius_tol: 0.03,
            control_tol: 0.10,
            far_field_delta: 0.02,
        }
    }
}

/// One experiment: model, lattice, speeds, initial profile, horizon, and the
/// per-experiment knobs. Unknown keys are schema errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub lattice: LatticeConfig,
    pub k: OneOrMany<f64>,
    pub profile: ProfileSpec,
    pub t_end: f64,
    #[serde(default = "default_replicas")]
    pub replicas: u32,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default = "default_snapshots")]
    pub snapshots: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub pde: PdeKnobs,
    #[serde(default)]
    pub generation: GenerationKnobs,
    #[serde(default)]
    pub propagation: PropagationKnobs,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Schema {
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        Ok(std::fs::write(path, self.to_json())?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization")
    }

    /// Stable hash of the canonical (sorted-key, compact) JSON form; every
    /// metrics row carries it.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config to value");
        let mut canon = String::new();
        canonical_json(&value, &mut canon);
        let digest = Sha256::digest(canon.as_bytes());
        let mut hex = String::with_capacity(16);
        for b in digest.iter().take(8) {
            hex.push_str(&format!("{b:02x}"));
        }
        hex
    }
}

fn canonical_json(v: &serde_json::Value, out: &mut String) {
    match v {
        serde_json::Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).unwrap());
                out.push(':');
                canonical_json(&map[*k], out);
            }
            out.push('}');
        }
        serde_json::Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                canonical_json(item, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

/// A model config resolved into usable pieces: the memoized curves, and the
/// microscopic rate model when one exists (synthetic models have none).
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub curves: ModelCurves,
    pub rate_model: Option<RateModel>,
    pub a_star_used: Option<f64>,
}

/// Resolve a model config for a lattice dimension `d`: build the jump rate,
/// calibrate `a*` when requested, and memoize the curves.
pub fn build_model(
    cfg: &ModelConfig,
    d: usize,
    knobs: &PdeKnobs,
) -> Result<BuiltModel, HarnessError> {
    match cfg {
        ModelConfig::Synthetic {
            alpha_minus,
            alpha_star,
            alpha_plus,
            scale,
        } => {
            let mid = 0.5 * (alpha_minus + alpha_plus);
            if (alpha_star - mid).abs() > 1e-12 {
                return Err(HarnessError::Invalid(format!(
                    "synthetic cubic balance requires alpha_star = midpoint {mid}, got {alpha_star}"
                )));
            }
            Ok(BuiltModel {
                curves: ModelCurves::synthetic_cubic(*alpha_minus, *alpha_star, *alpha_plus, *scale),
                rate_model: None,
                a_star_used: None,
            })
        }
        ModelConfig::ZeroRange { g, glauber, offsets } => {
            let jump = g.build()?;
            let offs: [Vec<i64>; 3] = match offsets {
                Some(list) => {
                    if list.len() != 3 {
                        return Err(HarnessError::Invalid(
                            "offsets must hold exactly three vectors".into(),
                        ));
                    }
                    [list[0].clone(), list[1].clone(), list[2].clone()]
                }
                None => GlauberRateSpec::default_offsets(d),
            };
            if offs.iter().any(|e| e.len() != d) {
                return Err(HarnessError::Invalid(format!(
                    "offsets must have dimension d={d}"
                )));
            }
            let (a_star, auto) = match &glauber.a_star {
                AStar::Value(v) => (*v, false),
                AStar::Auto(word) if word == "auto" => {
                    (0.5 * (glauber.a_minus + glauber.a_plus), true)
                }
                AStar::Auto(word) => {
                    return Err(HarnessError::Invalid(format!(
                        "a_star must be a number or \"auto\", got \"{word}\""
                    )))
                }
            };
            let spec = GlauberRateSpec::new(glauber.c, glauber.a_minus, a_star, glauber.a_plus, offs)?;
            let mut model = RateModel::new(jump, spec);
            model.trunc_tol = knobs.trunc_tol;
            let a_star_used = if auto {
                let calibrated = calibrate_balance(&model)?;
                model.glauber.a_star = calibrated;
                calibrated
            } else {
                a_star
            };
            let curves = ModelCurves::from_rate_model(&model, knobs.spline_knots, None)?;
            Ok(BuiltModel {
                curves,
                rate_model: Some(model),
                a_star_used: Some(a_star_used),
            })
        }
    }
}

/// Materialize an initial profile on the torus. Disk profiles place the
/// `alpha*` level exactly at `r0` and are checked against a transversality
/// proxy: away from a 3-width annulus, `|u0 - alpha*|` must clear a gap.
pub fn build_profile(
    spec: &ProfileSpec,
    torus: &LatticeTorus,
    curves: &ModelCurves,
) -> Result<Vec<f64>, HarnessError> {
    let sites = torus.sites();
    let d = torus.dim();
    match spec {
        ProfileSpec::Constant { value } => {
            if !(*value >= 0.0) {
                return Err(HarnessError::Invalid("constant profile must be >= 0".into()));
            }
            Ok(vec![*value; sites])
        }
        ProfileSpec::TwoPhase { left, right } => Ok((0..sites)
            .map(|x| {
                if torus.position(x)[0] < 0.5 {
                    *left
                } else {
                    *right
                }
            })
            .collect()),
        ProfileSpec::Cosine { base, amp } => {
            let two_pi = 2.0 * std::f64::consts::PI;
            Ok((0..sites)
                .map(|x| {
                    let p = torus.position(x);
                    let mut v = (two_pi * p[0]).cos();
                    if d >= 2 {
                        v *= (two_pi * p[1]).cos();
                    }
                    base + amp * v
                })
                .collect())
        }
        ProfileSpec::Table { values } => {
            if values.len() != sites {
                return Err(HarnessError::Invalid(format!(
                    "profile table has {} values for {} sites",
                    values.len(),
                    sites
                )));
            }
            Ok(values.clone())
        }
        ProfileSpec::Disk { center, r0, width } => {
            if d != 2 {
                return Err(HarnessError::Invalid("disk profiles need d = 2".into()));
            }
            if !(*r0 > 0.0 && *r0 < 0.5 && *width > 0.0) {
                return Err(HarnessError::Invalid(format!(
                    "disk needs 0 < r0 < 1/2 and width > 0, got r0={r0}, width={width}"
                )));
            }
            let (lo, hi, astar) = (curves.alpha_minus, curves.alpha_plus, curves.alpha_star);
            let range = hi - lo;
            let theta = (astar - lo) / range;
            // Shift so the alpha* level sits exactly on the circle.
            let shift = 0.5 * ((1.0 - theta) / theta).ln();
            let u0: Vec<f64> = (0..sites)
                .map(|x| {
                    let p = torus.position(x);
                    let dist = signed_distance_circle([p[0], p[1]], *center, *r0);
                    lo + range * 0.5 * (1.0 + (-(dist / width) + shift).tanh())
                })
                .collect();
            // Transversality proxy: outside a 3-width annulus the profile
            // clears a gap around alpha*, and that annulus must not cover
            // the whole torus.
            let gap = 0.5 * range * theta.min(1.0 - theta);
            let mut outside_annulus = 0usize;
            for (x, &v) in u0.iter().enumerate() {
                let p = torus.position(x);
                let dist = signed_distance_circle([p[0], p[1]], *center, *r0);
                if dist.abs() > 3.0 * width {
                    outside_annulus += 1;
                    if (v - astar).abs() < gap {
                        return Err(HarnessError::Invalid(format!(
                            "disk profile too shallow at site {x}: |u0 - alpha*| = {} inside gap {gap} \
                             (width {width} too large for r0 {r0}?)",
                            (v - astar).abs()
                        )));
                    }
                }
            }
            if outside_annulus == 0 {
                return Err(HarnessError::Invalid(format!(
                    "disk smoothing width {width} leaves no sites outside the 3-width annulus"
                )));
            }
            Ok(u0)
        }
    }
}

/// Deterministic per-replica RNG seed, mixed from the base seed, the lattice
/// side, and the replica index.
pub fn replica_seed(seed_base: u64, n: usize, replica: u32) -> u64 {
    let mut h = seed_base ^ 0x9E37_79B9_7F4A_7C15u64;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9) ^ (n as u64).wrapping_mul(0x94D0_49BB_1331_11EB);
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9) ^ ((replica as u64) << 1 | 1);
    h ^ (h >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_config() -> ExperimentConfig {
        ExperimentConfig {
            model: ModelConfig::ZeroRange {
                g: GConfig {
                    kind: "linear".into(),
                    slope: None,
                    cap: None,
                    table: None,
                    tail: None,
                },
                glauber: GlauberConfig {
                    c: 1.0,
                    a_minus: 0.2,
                    a_plus: 0.8,
                    a_star: AStar::Auto("auto".into()),
                },
                offsets: None,
            },
            lattice: LatticeConfig {
                d: 2,
                n: OneOrMany::Many(vec![16, 32]),
            },
            k: OneOrMany::One(2.0),
            profile: ProfileSpec::Constant { value: 1.0 },
            t_end: 0.01,
            replicas: 3,
            seed_base: 7,
            snapshots: 4,
            out_dir: None,
            pde: PdeKnobs::default(),
            generation: GenerationKnobs::default(),
            propagation: PropagationKnobs::default(),
        }
    }

    #[test]
    fn json_round_trip_is_identity() {
        let cfg = sample_config();
        let text = cfg.to_json();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_key_is_a_schema_error_naming_the_key() {
        let mut v: serde_json::Value = serde_json::from_str(&sample_config().to_json()).unwrap();
        v.as_object_mut()
            .unwrap()
            .insert("bogus_key".into(), serde_json::json!(1));
        let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        match err {
            HarnessError::Schema { message } => {
                assert!(message.contains("bogus_key"), "message: {message}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn hash_is_stable_and_key_order_independent() {
        let cfg = sample_config();
        let h1 = cfg.hash();
        // Re-parse from JSON with the same content: same hash.
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(h1, back.hash());
        assert_eq!(h1.len(), 16);
        // A changed field changes the hash.
        let mut other = cfg.clone();
        other.seed_base = 8;
        assert_ne!(h1, other.hash());
    }

    #[test]
    fn a_star_accepts_number_or_auto() {
        let mut cfg = sample_config();
        if let ModelConfig::ZeroRange { glauber, .. } = &mut cfg.model {
            glauber.a_star = AStar::Value(0.5);
        }
        let text = cfg.to_json();
        assert!(text.contains("\"a_star\": 0.5"));
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn build_synthetic_model_requires_midpoint() {
        let bad = ModelConfig::Synthetic {
            alpha_minus: 0.2,
            alpha_star: 0.6,
            alpha_plus: 0.8,
            scale: 1.0,
        };
        assert!(build_model(&bad, 2, &PdeKnobs::default()).is_err());
    }

    #[test]
    fn build_zero_range_with_auto_calibration() {
        let cfg = sample_config();
        let built = build_model(&cfg.model, 2, &cfg.pde).unwrap();
        let a_star = built.a_star_used.unwrap();
        assert!(a_star > 0.2 && a_star < 0.8);
        assert!(built.rate_model.is_some());
        assert!(built.curves.gamma > 0.0);
    }

    #[test]
    fn disk_profile_levels_and_transversality() {
        let curves = ModelCurves::synthetic_cubic(0.2, 0.5, 0.8, 1.0);
        let torus = LatticeTorus::new(2, 64);
        let spec = ProfileSpec::Disk {
            center: [0.5, 0.5],
            r0: 0.25,
            width: 0.02,
        };
        let u0 = build_profile(&spec, &torus, &curves).unwrap();
        // Inside the disk near the center: close to alpha+.
        let center_idx = torus.index(&[32, 32]);
        assert!((u0[center_idx] - 0.8).abs() < 1e-3);
        // Far corner: close to alpha-.
        assert!((u0[0] - 0.2).abs() < 1e-3);
        // Level alpha* on the circle: check a site near radius r0.
        let mut best = f64::INFINITY;
        for (x, &v) in u0.iter().enumerate() {
            let p = torus.position(x);
            let d = signed_distance_circle([p[0], p[1]], [0.5, 0.5], 0.25);
            if d.abs() < 0.5 / 64.0 {
                best = best.min((v - 0.5).abs());
            }
        }
        assert!(best < 0.05, "alpha* not near the nominal circle: {best}");
        // Too-wide smoothing violates the transversality proxy.
        let too_wide = ProfileSpec::Disk {
            center: [0.5, 0.5],
            r0: 0.25,
            width: 0.2,
        };
        assert!(build_profile(&too_wide, &torus, &curves).is_err());
    }

    #[test]
    fn replica_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for n in [16usize, 32, 64] {
            for r in 0..50u32 {
                assert!(seen.insert(replica_seed(42, n, r)));
            }
        }
    }
}
