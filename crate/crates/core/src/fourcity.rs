//! Closed forms for four cities and the 16-projector measurement scheme.
//!
//! With city 1 pinned as the first departure, `U_d` keeps `|1⟩` fixed and `U_a`
//! sends `|4⟩` to `|1⟩`, leaving three angles per register.
//!
//! The photonic chip carries triangular meshes with one detected output
//! (mode 2). Running the four idler settings against the four signal settings
//! gives 16 coincidence probabilities `p_ij = (U_d U_aᵀ)_ij² / 4`, which is the
//! same readout a pair of universal meshes would give.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::linalg::{compose_mesh, ComplexMatrix, MeshSpec};
use crate::measurement::{counts_to_correlation, CoincidenceRecord, CorrelationMatrix, ReadoutMode};
use crate::oracle::RoutePermutation;
use crate::state::VariationalParams;

/// Mode read out by every triangular projector (0-based).
pub const DETECTED_MODE: usize = 1;

/// Tolerance on arcsine/arccosine arguments before clamping.
pub const ARC_ARGUMENT_TOL: f64 = 1e-9;

/// Below this the `√(1−x²)` denominator is treated as zero.
pub const DEGENERATE_EPS: f64 = 1e-12;

/// `(α₁, α₂, α₃)` for departures, `(α₄, α₅, α₆)` for arrivals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourCityParams {
    pub alpha: [f64; 6],
}

impl FourCityParams {
    pub fn new(alpha: [f64; 6]) -> Self {
        Self { alpha }
    }

    pub fn from_slice(alpha: &[f64]) -> Result<Self> {
        let alpha: [f64; 6] = alpha
            .try_into()
            .map_err(|_| Error::Dimension(format!("expected 6 angles, got {}", alpha.len())))?;
        Ok(Self { alpha })
    }

    pub fn departure(&self) -> [f64; 3] {
        [self.alpha[0], self.alpha[1], self.alpha[2]]
    }

    pub fn arrival(&self) -> [f64; 3] {
        [self.alpha[3], self.alpha[4], self.alpha[5]]
    }

    pub fn to_variational(&self) -> VariationalParams {
        VariationalParams::new(4, self.alpha.to_vec()).expect("six angles fit N = 4")
    }
}

impl TryFrom<&VariationalParams> for FourCityParams {
    type Error = Error;

    fn try_from(p: &VariationalParams) -> Result<Self> {
        if p.n_cities() != 4 {
            return Err(Error::InvalidArgument(format!(
                "four-city closed forms need N = 4, got {}",
                p.n_cities()
            )));
        }
        Self::from_slice(p.angles())
    }
}

fn sc(a: f64) -> (f64, f64) {
    a.sin_cos()
}

fn real4(rows: [[f64; 4]; 4]) -> ComplexMatrix {
    ComplexMatrix::from_real(4, 4, rows.as_flattened()).expect("4x4")
}

fn rows_d(a: [f64; 3]) -> [[f64; 4]; 4] {
    let (s1, c1) = sc(a[0]);
    let (s2, c2) = sc(a[1]);
    let (s3, c3) = sc(a[2]);
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, s1 * s3 - c1 * s2 * c3, s1 * c3 + c1 * s2 * s3, -c1 * c2],
        [0.0, -c1 * s3 - s1 * s2 * c3, -c1 * c3 + s1 * s2 * s3, -s1 * c2],
        [0.0, -c2 * c3, c2 * s3, s2],
    ]
}

fn rows_a(a: [f64; 3]) -> [[f64; 4]; 4] {
    let (s4, c4) = sc(a[0]);
    let (s5, c5) = sc(a[1]);
    let (s6, c6) = sc(a[2]);
    [
        [0.0, 0.0, 0.0, 1.0],
        [s5, c5 * s6, c5 * c6, 0.0],
        [s4 * c5, c4 * c6 - s4 * s5 * s6, -c4 * s6 - s4 * s5 * c6, 0.0],
        [c4 * c5, -s4 * c6 - c4 * s5 * s6, s4 * s6 - c4 * s5 * c6, 0.0],
    ]
}

/// Departure unitary `U_d[α₁, α₂, α₃]`.
pub fn u_d_4(alpha: [f64; 3]) -> ComplexMatrix {
    real4(rows_d(alpha))
}

/// Arrival unitary `U_a[α₄, α₅, α₆]`.
pub fn u_a_4(alpha: [f64; 3]) -> ComplexMatrix {
    real4(rows_a(alpha))
}

/// The sixteen closed-form entries of `X⁽⁴⁾`.
pub fn x_4_analytic(params: &FourCityParams) -> CorrelationMatrix {
    let [a1, a2, a3, a4, a5, a6] = params.alpha;
    let (s1, c1) = sc(a1);
    let (s2, c2) = sc(a2);
    let (s3, c3) = sc(a3);
    let (s4, c4) = sc(a4);
    let (s5, c5) = sc(a5);
    let (s6, c6) = sc(a6);
    let (sd, cd) = sc(a6 - a3);
    let sq = |v: f64| v * v;

    let x = [
        0.0,
        sq(s5),
        sq(s4) * sq(c5),
        sq(c4) * sq(c5),
        sq(c1) * sq(c2),
        sq(c5) * sq(s1 * cd - c1 * s2 * sd),
        sq((c4 * c6 - s4 * s5 * s6) * (s1 * s3 - c1 * s2 * c3) - (c4 * s6 + s4 * s5 * c6) * (s1 * c3 + c1 * s2 * s3)),
        sq(cd * (s4 * c1 * s2 - c4 * s5 * s1) + sd * (c4 * s5 * c1 * s2 + s4 * s1)),
        sq(s1) * sq(c2),
        sq(c5) * sq(s1 * s2 * sd + c1 * cd),
        sq((s4 * s5 * c6 + c4 * s6) * (c1 * c3 - s1 * s2 * s3) - (c4 * c6 - s4 * s5 * s6) * (s1 * s2 * c3 + c1 * s3)),
        sq(cd * (c4 * s5 * c1 + s4 * s1 * s2) + sd * (c4 * s5 * s1 * s2 - s4 * c1)),
        sq(s2),
        sq(c5) * sq(c2) * sq(sd),
        sq(c2) * sq(s4 * s5 * sd - c4 * cd),
        sq(c2) * sq(c4 * s5 * sd + s4 * cd),
    ];
    CorrelationMatrix::from_entries(4, x.to_vec(), ReadoutMode::Exact).expect("squares are non-negative")
}

/// Angle triples for the triangular meshes `U_i^(j)` (idler, departures) and
/// `U_s^(j)` (signal, arrivals), `j = 1..4` stored at index `j − 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectorSettings {
    pub idler: [[f64; 3]; 4],
    pub signal: [[f64; 3]; 4],
}

impl ProjectorSettings {
    /// Detected row of `U_i^(j)`; row `j` of `U_d` up to signs that cancel
    /// in `X`.
    pub fn idler_row(&self, j: usize) -> [f64; 4] {
        detected_row(self.idler[j])
    }

    /// Detected row of `U_s^(j)`; row `j` of `U_a` up to signs that cancel
    /// in `X`.
    pub fn signal_row(&self, j: usize) -> [f64; 4] {
        detected_row(self.signal[j])
    }
}

fn detected_row(theta: [f64; 3]) -> [f64; 4] {
    let u = compose_mesh(&MeshSpec::triangular4(theta));
    std::array::from_fn(|k| u[(DETECTED_MODE, k)].re)
}

fn checked_asin(x: f64) -> Result<f64> {
    Ok(clamp_arc(x)?.asin())
}

fn checked_acos(x: f64) -> Result<f64> {
    Ok(clamp_arc(x)?.acos())
}

fn clamp_arc(x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > 1.0 + ARC_ARGUMENT_TOL {
        return Err(Error::Consistency(format!("arc argument {x} outside [-1, 1]")));
    }
    Ok(x.clamp(-1.0, 1.0))
}

/// `num / √(1−x²)` where `√(1−x²) = hypot(p, q)` for the two remaining row
/// entries. A vanishing denominator gives 0.
fn ratio(num: f64, p: f64, q: f64) -> f64 {
    let den = p.hypot(q);
    if den < DEGENERATE_EPS {
        0.0
    } else {
        num / den
    }
}

/// Projector angles from the printed formula set.
///
/// The printed arccosines fix each angle only up to sign. The sign is chosen so
/// that the detected row reproduces the signed entries of `U_d` or `U_a` that
/// the cross terms of `X` depend on.
pub fn projector_settings(params: &FourCityParams) -> Result<ProjectorSettings> {
    let [a1, a2, a3, a4, a5, a6] = params.alpha;
    let (s1, c1) = sc(a1);
    let (s2, c2) = sc(a2);
    let (s3, c3) = sc(a3);
    let (s4, c4) = sc(a4);
    let (s5, c5) = sc(a5);
    let (s6, c6) = sc(a6);
    let d = rows_d([a1, a2, a3]);
    let a = rows_a([a4, a5, a6]);
    let h = FRAC_PI_2;
    let signed = |angle: f64, negate: bool| if negate { -angle } else { angle };

    let idler_rest = |x: f64, num: f64, j: usize| -> Result<[f64; 3]> {
        let t3 = checked_acos(ratio(num, d[j][2], d[j][3]))?;
        Ok([checked_asin(x)?, h, signed(t3, d[j][2] < 0.0)])
    };
    let idler = [
        [h, 0.0, h],
        idler_rest(c1 * s2 * c3 - s1 * s3, c1 * c2, 1)?,
        idler_rest(s1 * s2 * c3 + c1 * s3, s1 * c2, 2)?,
        idler_rest(c2 * c3, s2, 3)?,
    ];

    let signal_rest = |y: f64, num: f64, j: usize, negate: bool| -> Result<[f64; 3]> {
        let t2 = checked_acos(ratio(num, a[j][0], a[j][1]))?;
        Ok([checked_acos(y)?, signed(t2, negate), h])
    };
    let signal = [
        [0.0, h, 0.0],
        signal_rest(c5 * c6, s5, 1, a[1][1] > 0.0)?,
        signal_rest(s4 * s5 * c6 + c4 * s6, s4 * c5, 2, a[2][1] < 0.0)?,
        signal_rest(c4 * s5 * c6 - s4 * s6, c4 * c5, 3, a[3][1] < 0.0)?,
    ];
    Ok(ProjectorSettings { idler, signal })
}

/// Coincidence probabilities of the 16 setting pairs on `|ψ₀⟩`, row-major by
/// (idler setting, signal setting).
pub fn projector_probabilities(settings: &ProjectorSettings) -> [f64; 16] {
    let idler: [[f64; 4]; 4] = std::array::from_fn(|j| settings.idler_row(j));
    let signal: [[f64; 4]; 4] = std::array::from_fn(|j| settings.signal_row(j));
    std::array::from_fn(|k| {
        let (i, j) = (k / 4, k % 4);
        let amp: f64 = (0..4).map(|m| idler[i][m] * signal[j][m]).sum();
        amp * amp / 4.0
    })
}

/// `X` assembled from the 16 projectors, either exactly or from `shots`
/// coincidence events shared across all settings.
pub fn emulate_16_projectors(
    params: &FourCityParams,
    mode: ReadoutMode,
    seed: u64,
) -> Result<(CorrelationMatrix, Option<CoincidenceRecord>)> {
    let probs = projector_probabilities(&projector_settings(params)?);
    match mode {
        ReadoutMode::Exact => {
            let x = probs.iter().map(|p| 4.0 * p).collect();
            Ok((CorrelationMatrix::from_entries(4, x, ReadoutMode::Exact)?, None))
        }
        ReadoutMode::Sampled { shots } => {
            let (x, record) = counts_to_correlation(4, &probs, shots, seed)?;
            Ok((x, Some(record)))
        }
    }
}

/// Phase settings for the six tours through four cities.
pub fn tour_phase_settings(route: &RoutePermutation) -> Result<FourCityParams> {
    let h = FRAC_PI_2;
    let table: [([usize; 4], [f64; 6]); 6] = [
        ([1, 2, 3, 4], [h, h, h, h, h, h]),
        ([1, 2, 4, 3], [h, 0.0, h, h, h, 0.0]),
        ([1, 3, 2, 4], [h, h, 0.0, h, 0.0, h]),
        ([1, 3, 4, 2], [0.0, 0.0, h, h, 0.0, 0.0]),
        ([1, 4, 2, 3], [h, 0.0, 0.0, 0.0, 0.0, h]),
        ([1, 4, 3, 2], [0.0; 6]),
    ];
    let seq = route.to_route().ok();
    table
        .iter()
        .find(|(r, _)| route.n_cities() == 4 && seq.as_deref() == Some(&r[..]))
        .map(|&(_, alpha)| FourCityParams::new(alpha))
        .ok_or_else(|| Error::InvalidArgument(format!("{route:?} is not one of the six four-city tours")))
}
