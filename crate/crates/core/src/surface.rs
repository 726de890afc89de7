//! Reference surfaces: four height-field families sampled on a U x V
//! control net, and the CadQuery script that rebuilds each one as a spline
//! approximation.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::{self, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurfaceError {
    #[error("bad surface parameters: {0}")]
    BadParams(String),
    #[error("unknown surface family {0:?}; valid families: gaussian, saddle, wave, ripple")]
    UnknownFamily(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Saddle,
    Wave,
    Ripple,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Gaussian, Family::Saddle, Family::Wave, Family::Ripple];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Saddle => "saddle",
            Family::Wave => "wave",
            Family::Ripple => "ripple",
        }
    }

    /// Names of the family-specific shape parameters, as used in scripts
    /// and parameter maps.
    pub fn shape_keys(self) -> &'static [&'static str] {
        match self {
            Family::Gaussian => &["H"],
            Family::Saddle => &["CURV"],
            Family::Wave => &["A", "WAVELEN"],
            Family::Ripple => &["A", "K", "D"],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = SurfaceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| SurfaceError::UnknownFamily(s.to_string()))
    }
}

/// Height function of a family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Shape {
    /// `z = H * exp(-(x^2 + y^2) / (SPAN/3)^2)`
    Gaussian { height: f64 },
    /// `z = CURV * (x^2 - y^2)`
    Saddle { curvature: f64 },
    /// `z = A * sin(2 pi x / WAVELEN)`
    Wave { amplitude: f64, wavelength: f64 },
    /// `z = A * sin(K r) * exp(-D r)`, `r = sqrt(x^2 + y^2)`
    Ripple {
        amplitude: f64,
        frequency: f64,
        decay: f64,
    },
}

impl Shape {
    pub fn family(&self) -> Family {
        match self {
            Shape::Gaussian { .. } => Family::Gaussian,
            Shape::Saddle { .. } => Family::Saddle,
            Shape::Wave { .. } => Family::Wave,
            Shape::Ripple { .. } => Family::Ripple,
        }
    }

    /// Height at `(x, y)` for a patch of width `span`.
    pub fn height(&self, x: f64, y: f64, span: f64) -> f64 {
        match *self {
            Shape::Gaussian { height } => {
                let r2 = (x * x + y * y) / ((span / 3.0) * (span / 3.0));
                height * (-r2).exp()
            }
            Shape::Saddle { curvature } => curvature * (x * x - y * y),
            Shape::Wave {
                amplitude,
                wavelength,
            } => amplitude * (2.0 * PI * x / wavelength).sin(),
            Shape::Ripple {
                amplitude,
                frequency,
                decay,
            } => {
                let r = (x * x + y * y).sqrt();
                amplitude * (frequency * r).sin() * (-decay * r).exp()
            }
        }
    }

    fn shape_values(&self) -> Vec<f64> {
        match *self {
            Shape::Gaussian { height } => vec![height],
            Shape::Saddle { curvature } => vec![curvature],
            Shape::Wave {
                amplitude,
                wavelength,
            } => vec![amplitude, wavelength],
            Shape::Ripple {
                amplitude,
                frequency,
                decay,
            } => vec![amplitude, frequency, decay],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceParams {
    pub u: usize,
    pub v: usize,
    pub span: f64,
    pub shape: Shape,
}

impl SurfaceParams {
    pub fn family(&self) -> Family {
        self.shape.family()
    }

    pub fn validate(&self) -> Result<(), SurfaceError> {
        if self.u < 2 || self.v < 2 {
            return Err(SurfaceError::BadParams(format!(
                "net must be at least 2x2, got {}x{}",
                self.u, self.v
            )));
        }
        if !(self.span > 0.0 && self.span.is_finite()) {
            return Err(SurfaceError::BadParams(format!(
                "SPAN must be positive, got {}",
                self.span
            )));
        }
        if let Shape::Wave { wavelength, .. } = self.shape {
            if wavelength.is_nan() || wavelength <= 0.0 {
                return Err(SurfaceError::BadParams(format!(
                    "WAVELEN must be positive, got {wavelength}"
                )));
            }
        }
        if self.shape.shape_values().iter().any(|v| !v.is_finite()) {
            return Err(SurfaceError::BadParams("non-finite shape parameter".into()));
        }
        Ok(())
    }

    /// Named-value view: `U`, `V`, `SPAN` plus the family's shape keys.
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        let mut map = BTreeMap::from([
            ("U".to_string(), self.u as f64),
            ("V".to_string(), self.v as f64),
            ("SPAN".to_string(), self.span),
        ]);
        for (k, v) in self.family().shape_keys().iter().zip(self.shape.shape_values()) {
            map.insert(k.to_string(), v);
        }
        map
    }

    pub fn from_map(family: Family, map: &BTreeMap<String, f64>) -> Result<Self, SurfaceError> {
        let get = |k: &str| {
            map.get(k)
                .copied()
                .ok_or_else(|| SurfaceError::BadParams(format!("missing {k} for {family}")))
        };
        let count = |k: &str| -> Result<usize, SurfaceError> {
            let v = get(k)?;
            if v.fract() != 0.0 || v < 0.0 {
                return Err(SurfaceError::BadParams(format!("{k} must be a whole number, got {v}")));
            }
            Ok(v as usize)
        };
        let (u, v, span) = (count("U")?, count("V")?, get("SPAN")?);
        let shape = match family {
            Family::Gaussian => Shape::Gaussian { height: get("H")? },
            Family::Saddle => Shape::Saddle {
                curvature: get("CURV")?,
            },
            Family::Wave => Shape::Wave {
                amplitude: get("A")?,
                wavelength: get("WAVELEN")?,
            },
            Family::Ripple => Shape::Ripple {
                amplitude: get("A")?,
                frequency: get("K")?,
                decay: get("D")?,
            },
        };
        let params = SurfaceParams { u, v, span, shape };
        params.validate()?;
        Ok(params)
    }
}

pub type Point3 = [f64; 3];

/// Control net, `points[i][j]` for `i < u`, `j < v`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlNet {
    pub points: Vec<Vec<Point3>>,
}

impl ControlNet {
    pub fn dims(&self) -> (usize, usize) {
        (self.points.len(), self.points.first().map_or(0, Vec::len))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Point3> {
        self.points.iter().flatten()
    }
}

/// Samples the height field on the uniform lattice
/// `x = (i/(U-1) - 0.5) * SPAN`, `y = (j/(V-1) - 0.5) * SPAN`.
pub fn make_net(params: &SurfaceParams) -> Result<ControlNet, SurfaceError> {
    params.validate()?;
    let points = (0..params.u)
        .map(|i| {
            let x = (i as f64 / (params.u - 1) as f64 - 0.5) * params.span;
            (0..params.v)
                .map(|j| {
                    let y = (j as f64 / (params.v - 1) as f64 - 0.5) * params.span;
                    [x, y, params.shape.height(x, y, params.span)]
                })
                .collect()
        })
        .collect();
    Ok(ControlNet { points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub params: SurfaceParams,
    pub script_text: String,
}

impl SurfaceSpec {
    /// Validates the parameters and renders the script.
    pub fn new(params: SurfaceParams) -> Result<Self, SurfaceError> {
        params.validate()?;
        Ok(SurfaceSpec {
            script_text: emit_script(&params),
            params,
        })
    }

    pub fn family(&self) -> Family {
        self.params.family()
    }

    /// Samples the control net. Not cached: a 300x300 net is 90k points.
    pub fn net(&self) -> Result<ControlNet, SurfaceError> {
        make_net(&self.params)
    }
}

/// Python literal for a parameter value.
fn py(v: f64) -> String {
    // f64 Display never uses exponent notation and drops a trailing ".0",
    // both of which Python reads back unchanged.
    format!("{v}")
}

/// Renders the CadQuery program that rebuilds the surface from its control
/// net. Identical parameters give identical bytes.
pub fn emit_script(params: &SurfaceParams) -> String {
    let family = params.family();
    let mut names = vec!["U", "V", "SPAN"];
    names.extend(family.shape_keys());
    let mut values = vec![params.u.to_string(), params.v.to_string(), py(params.span)];
    values.extend(params.shape.shape_values().into_iter().map(py));

    let (height_lines, finish) = match family {
        Family::Saddle => (
            vec!["z = CURV*(x**2 - y**2)"],
            "surf = cq.Face.makeSplineApprox(net)",
        ),
        Family::Gaussian => (
            vec![
                "r2 = (x**2 + y**2)/((SPAN/3)**2)",
                "z = H * math.exp(-r2)                # Gaussian height",
            ],
            "surf = cq.Face.makeSplineApprox(net).thicken(2).translate((0,0,-1))",
        ),
        Family::Wave => (
            vec!["z = A * math.sin(2*math.pi*x/WAVELEN)"],
            "surf = cq.Face.makeSplineApprox(net)",
        ),
        Family::Ripple => (
            vec![
                "r = math.sqrt(x**2 + y**2)",
                "z = A * math.sin(K*r) * math.exp(-D*r)",
            ],
            "surf = cq.Face.makeSplineApprox(net)",
        ),
    };

    let mut s = String::new();
    let _ = writeln!(s, "# {}.py", family.name());
    s.push_str("import cadquery as cq, math\n");
    let _ = writeln!(s, "{} = {}", names.join(", "), values.join(", "));
    s.push_str("\nnet = []\nfor i in range(U):\n    u = i/(U-1);  x = (u-0.5)*SPAN\n    row = []\n");
    s.push_str("    for j in range(V):\n        v = j/(V-1);  y = (v-0.5)*SPAN\n");
    for line in height_lines {
        let _ = writeln!(s, "        {line}");
    }
    s.push_str("        row.append(cq.Vector(x, y, z))\n    net.append(row)\n\n");
    let _ = writeln!(s, "{finish}");
    let _ = writeln!(s, "cq.exporters.export(surf, \"{}.step\")", family.name());
    s
}

/// Closed interval `[lo, hi]`; `lo == hi` pins the value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    fn draw(&self, name: &str, rng: &mut impl Rng) -> Result<f64, SurfaceError> {
        if !self.lo.is_finite() || !self.hi.is_finite() || self.lo > self.hi {
            return Err(SurfaceError::BadParams(format!(
                "empty range for {name}: [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.lo == self.hi {
            return Ok(self.lo);
        }
        Ok(rng.random_range(self.lo..=self.hi))
    }
}

/// Parameter ranges for [`sample_specs`]. Wave wavelength is drawn as a
/// fraction of the drawn SPAN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingRanges {
    pub span: Range,
    pub resolutions: Vec<usize>,
    pub saddle_curvature: Range,
    pub gaussian_height: Range,
    pub wave_amplitude: Range,
    pub wave_wavelength_fraction: Range,
    pub ripple_amplitude: Range,
    pub ripple_frequency: Range,
    pub ripple_decay: Range,
}

impl Default for SamplingRanges {
    fn default() -> Self {
        SamplingRanges {
            span: Range::new(50.0, 300.0),
            resolutions: vec![50, 100, 300],
            saddle_curvature: Range::new(0.001, 0.01),
            gaussian_height: Range::new(2.0, 15.0),
            wave_amplitude: Range::new(1.0, 8.0),
            wave_wavelength_fraction: Range::new(1.0 / 6.0, 0.5),
            ripple_amplitude: Range::new(1.0, 6.0),
            ripple_frequency: Range::new(0.1, 0.5),
            ripple_decay: Range::new(0.0, 0.05),
        }
    }
}

fn draw_params(
    family: Family,
    ranges: &SamplingRanges,
    rng: &mut impl Rng,
) -> Result<SurfaceParams, SurfaceError> {
    if ranges.resolutions.is_empty() {
        return Err(SurfaceError::BadParams("no net resolutions to draw from".into()));
    }
    let res = ranges.resolutions[rng.random_range(0..ranges.resolutions.len())];
    let span = ranges.span.draw("SPAN", rng)?;
    let shape = match family {
        Family::Gaussian => Shape::Gaussian {
            height: ranges.gaussian_height.draw("H", rng)?,
        },
        Family::Saddle => Shape::Saddle {
            curvature: ranges.saddle_curvature.draw("CURV", rng)?,
        },
        Family::Wave => Shape::Wave {
            amplitude: ranges.wave_amplitude.draw("A", rng)?,
            wavelength: span * ranges.wave_wavelength_fraction.draw("WAVELEN", rng)?,
        },
        Family::Ripple => Shape::Ripple {
            amplitude: ranges.ripple_amplitude.draw("A", rng)?,
            frequency: ranges.ripple_frequency.draw("K", rng)?,
            decay: ranges.ripple_decay.draw("D", rng)?,
        },
    };
    let params = SurfaceParams {
        u: res,
        v: res,
        span,
        shape,
    };
    params.validate()?;
    Ok(params)
}

/// `count` seeded parameter draws for one family. The same
/// `(family, count, seed, ranges)` always yields the same list.
pub fn sample_specs(
    family: Family,
    count: usize,
    seed: u64,
    ranges: &SamplingRanges,
) -> Result<Vec<SurfaceSpec>, SurfaceError> {
    if count == 0 {
        return Err(SurfaceError::BadParams("count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let params = draw_params(family, ranges, &mut rng)?;
            Ok(SurfaceSpec {
                script_text: emit_script(&params),
                params,
            })
        })
        .collect()
}

/// File stem for the `index`-th script of a seeded draw.
pub fn script_stem(family: Family, seed: u64, index: usize) -> String {
    format!("{}_{seed}_{index}", family.name())
}
