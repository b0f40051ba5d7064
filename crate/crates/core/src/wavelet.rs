//! Compactly supported orthonormal wavelets (Haar and Daubechies with `Q`
//! vanishing moments), materialized by the cascade algorithm as piecewise
//! linear functions on `[0, 2Q − 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;

/// Daubechies low-pass filters, `Q = 1..=10`, in analysis order.
const DAUBECHIES: [&[f64]; 10] = [
    &[
        0.7071067811865475244,
        0.7071067811865475244,
    ],
    &[
        0.48296291314453414337,
        0.83651630373780790558,
        0.22414386804201338103,
        -0.12940952255126038117,
    ],
    &[
        0.332670552950082616,
        0.80689150931109257649,
        0.4598775021184915701,
        -0.1350110200102545887,
        -0.085441273882026661693,
        0.035226291885709536603,
    ],
    &[
        0.23037781330889650086,
        0.71484657055291564709,
        0.63088076792985890788,
        -0.027983769416859854211,
        -0.18703481171909308408,
        0.030841381835560763627,
        0.032883011666885199735,
        -0.010597401785069032105,
    ],
    &[
        0.16010239797419291448,
        0.60382926979718967054,
        0.72430852843777292773,
        0.13842814590132073151,
        -0.24229488706638203186,
        -0.032244869584638374648,
        0.077571493840045713523,
        -0.0062414902127982742742,
        -0.012580751999081999469,
        0.003335725285473771278,
    ],
    &[
        0.11154074335010946362,
        0.49462389039845308568,
        0.75113390802109535068,
        0.31525035170919762909,
        -0.22626469396543982008,
        -0.12976686756726193556,
        0.097501605587323049102,
        0.027522865530305728626,
        -0.031582039317486029565,
        0.00055384220116149613925,
        0.0047772575109455106396,
        -0.0010773010853084795649,
    ],
    &[
        0.07785205408500917902,
        0.39653931948191730654,
        0.72913209084623511992,
        0.46978228740519312247,
        -0.14390600392856497541,
        -0.22403618499387498264,
        0.071309219266830264751,
        0.080612609151083071913,
        -0.03802993693501441358,
        -0.016574541630666880654,
        0.012550998556099840613,
        0.00042957797292136652113,
        -0.0018016407040474909153,
        0.00035371379997452024845,
    ],
    &[
        0.054415842243104009955,
        0.31287159091429997066,
        0.67563073629728980681,
        0.58535468365420671277,
        -0.015829105256349305667,
        -0.28401554296154692652,
        0.00047248457391328277036,
        0.12874742662047845886,
        -0.01736930100180754617,
        -0.044088253930794751507,
        0.013981027917398281649,
        0.0087460940474057767164,
        -0.0048703529934515743104,
        -0.0003917403733769470463,
        0.00067544940645056936637,
        -0.00011747678412476953373,
    ],
    &[
        0.038077947363878346589,
        0.24383467461259035373,
        0.6048231236901111119,
        0.65728807805130053808,
        0.13319738582500757619,
        -0.29327378327917490881,
        -0.096840783222976460514,
        0.14854074933810638014,
        0.030725681479333379212,
        -0.067632829061329973676,
        0.00025094711483145195759,
        0.022361662123679097205,
        -0.0047232047577513972779,
        -0.0042815036824634298345,
        0.0018476468830562264766,
        0.00023038576352319596721,
        -0.00025196318894271013697,
        0.000039347320316271599481,
    ],
    &[
        0.026670057900555553587,
        0.18817680007769148902,
        0.52720118893172558648,
        0.68845903945360356574,
        0.28117234366057746075,
        -0.24984642432731537942,
        -0.1959462743773770435,
        0.12736934033579326008,
        0.09305736460357235116,
        -0.071394147166397087145,
        -0.029457536821875812858,
        0.03321267405934100174,
        0.0036065535669561696554,
        -0.010733175483330575044,
        0.0013953517470529011658,
        0.0019924052951850561172,
        -0.00068585669495971162656,
        -0.00011646685512928545095,
        0.000093588670320069591334,
        -0.000013264202894521244812,
    ],
];

pub const MAX_DAUBECHIES_Q: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveletFamily {
    Haar,
    Daubechies,
}

impl std::str::FromStr for WaveletFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "haar" => Ok(Self::Haar),
            "daubechies" | "db" => Ok(Self::Daubechies),
            other => Err(Error::param(format!("unknown wavelet family '{other}'"))),
        }
    }
}

/// One linear piece of ψ: value `y0` at `t0` rising linearly to `y1` at `t1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub y0: f64,
    pub y1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletSpec {
    pub family: WaveletFamily,
    pub q: usize,
    pub resolution: u32,
    /// Low-pass analysis filter `h`.
    pub lowpass: Vec<f64>,
    /// High-pass analysis filter `g_m = (−1)^m h_{2Q−1−m}`.
    pub highpass: Vec<f64>,
    pub segments: Vec<Segment>,
}

impl WaveletSpec {
    /// Right end of the support `[0, 2Q − 1]`.
    pub fn support(&self) -> f64 {
        (2 * self.q - 1) as f64
    }

    pub fn psi(&self, t: f64) -> f64 {
        if t < 0.0 || t >= self.support() {
            return 0.0;
        }
        let step = self.segments[0].t1 - self.segments[0].t0;
        let i = ((t / step) as usize).min(self.segments.len() - 1);
        let s = &self.segments[i];
        if s.t1 == s.t0 {
            return s.y0;
        }
        s.y0 + (s.y1 - s.y0) * (t - s.t0) / (s.t1 - s.t0)
    }

    /// `∫ ψ(t) t^m dt`, exact for the piecewise-linear representation.
    pub fn moment(&self, m: u32) -> f64 {
        self.segment_integral(|t, y| y * t.powi(m as i32))
    }

    /// `∫ |ψ(t)| |t|^m dt` (Gauss–Legendre per piece).
    pub fn abs_moment(&self, m: u32) -> f64 {
        self.segment_integral(|t, y| y.abs() * t.abs().powi(m as i32))
    }

    fn segment_integral(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let (x, w) = gauss_legendre(8);
        let mut total = 0.0;
        for s in &self.segments {
            let half = 0.5 * (s.t1 - s.t0);
            let mid = 0.5 * (s.t1 + s.t0);
            let mut acc = 0.0;
            for (xi, wi) in x.iter().zip(&w) {
                let y = 0.5 * (s.y0 + s.y1) + 0.5 * (s.y1 - s.y0) * xi;
                acc += wi * f(mid + half * xi, y);
            }
            total += acc * half;
        }
        total
    }

    /// Checks the vanishing-moment invariants: `|∫ψ t^m| ≤ 10⁻⁶ ∫|ψ||t|^m` for
    /// `m < Q` and a non-vanishing moment of order `Q` (measured against the
    /// absolute moment about the centre of the support).
    pub fn check_moments(&self) -> Result<Vec<f64>> {
        let mut moments = Vec::with_capacity(self.q + 1);
        for m in 0..=self.q as u32 {
            let mo = self.moment(m);
            let scale = self.abs_moment(m);
            let small = mo.abs() <= 1e-6 * scale;
            if (m as usize) < self.q && !small {
                return Err(Error::diag(format!(
                    "moment {m} of the {}-moment wavelet is {mo:e}, not vanishing",
                    self.q
                )));
            }
            let centre = 0.5 * self.support();
            let centred = self.segment_integral(|t, y| y.abs() * (t - centre).abs().powi(m as i32));
            if m as usize == self.q && mo.abs() <= 1e-6 * centred {
                return Err(Error::diag(format!("moment {m} unexpectedly vanishes")));
            }
            moments.push(mo);
        }
        Ok(moments)
    }
}

/// Builds Haar (`Q = 1`) or Daubechies(`Q`) with ψ resolved at `2^{−r}`.
pub fn build_wavelet(family: WaveletFamily, q: usize, resolution: u32) -> Result<WaveletSpec> {
    if resolution < 6 {
        return Err(Error::param("wavelet resolution r must be at least 6"));
    }
    if resolution > 16 {
        return Err(Error::param("wavelet resolution r must be at most 16"));
    }
    match family {
        WaveletFamily::Haar if q != 1 => {
            return Err(Error::param("the Haar wavelet has exactly Q = 1"));
        }
        WaveletFamily::Daubechies if q == 0 || q > MAX_DAUBECHIES_Q => {
            return Err(Error::param(format!(
                "Daubechies wavelets are available for Q in 1..={MAX_DAUBECHIES_Q}, got {q}"
            )));
        }
        _ => {}
    }
    let lowpass = DAUBECHIES[q - 1].to_vec();
    let len = lowpass.len();
    let highpass: Vec<f64> = (0..len)
        .map(|m| if m % 2 == 0 { 1.0 } else { -1.0 } * lowpass[len - 1 - m])
        .collect();
    let segments = if q == 1 {
        vec![
            Segment { t0: 0.0, t1: 0.5, y0: 1.0, y1: 1.0 },
            Segment { t0: 0.5, t1: 1.0, y0: -1.0, y1: -1.0 },
        ]
    } else {
        let psi = cascade_psi(&lowpass, &highpass, resolution)?;
        let step = (resolution as f64).exp2().recip();
        psi.windows(2)
            .enumerate()
            .map(|(i, y)| Segment {
                t0: i as f64 * step,
                t1: (i + 1) as f64 * step,
                y0: y[0],
                y1: y[1],
            })
            .collect()
    };
    let spec = WaveletSpec {
        family,
        q,
        resolution,
        lowpass,
        highpass,
        segments,
    };
    spec.check_moments()?;
    Ok(spec)
}

/// ψ at the dyadic points `i·2^{−r}` of `[0, 2Q − 1]`.
fn cascade_psi(h: &[f64], g: &[f64], r: u32) -> Result<Vec<f64>> {
    let len = h.len();
    let support = len - 1;
    let s2 = std::f64::consts::SQRT_2;
    let phi0 = integer_phi(h)?;
    // φ on the grid of step 2^{−level}; refine until level r + 1
    let mut level = 0u32;
    let mut phi = phi0;
    while level < r + 1 {
        let n_new = support << (level + 1);
        let mut next = vec![0.0; n_new + 1];
        for (i, slot) in next.iter_mut().enumerate() {
            if i % 2 == 0 {
                *slot = phi[i / 2];
                continue;
            }
            // φ(t) = √2 Σ h_k φ(2t − k), t = i·2^{−level−1}
            let mut acc = 0.0;
            for (k, hk) in h.iter().enumerate() {
                let idx = i as i64 - ((k as i64) << level);
                if idx >= 0 && (idx as usize) < phi.len() {
                    acc += hk * phi[idx as usize];
                }
            }
            *slot = s2 * acc;
        }
        phi = next;
        level += 1;
    }
    // ψ(t) = √2 Σ g_k φ(2t − k) on step 2^{−r}
    let n_psi = support << r;
    let psi = (0..=n_psi)
        .map(|i| {
            let mut acc = 0.0;
            for (k, gk) in g.iter().enumerate() {
                let idx = 4 * i as i64 - ((k as i64) << (r + 1));
                if idx >= 0 && (idx as usize) < phi.len() {
                    acc += gk * phi[idx as usize];
                }
            }
            s2 * acc
        })
        .collect();
    Ok(psi)
}

/// φ at the integers `0..=2Q−1`: the eigenvector of `√2 h_{2n−m}` for
/// eigenvalue 1, normalized to unit sum.
fn integer_phi(h: &[f64]) -> Result<Vec<f64>> {
    let n = h.len();
    let s2 = std::f64::consts::SQRT_2;
    let mut a = vec![vec![0.0; n + 1]; n];
    for (i, row) in a.iter_mut().enumerate() {
        for (m, cell) in row.iter_mut().take(n).enumerate() {
            let k = 2 * i as i64 - m as i64;
            if k >= 0 && (k as usize) < n {
                *cell = s2 * h[k as usize];
            }
            if i == m {
                *cell -= 1.0;
            }
        }
    }
    // Replace the last equation by the normalization Σφ = 1.
    a[n - 1].iter_mut().for_each(|c| *c = 1.0);
    solve_in_place(&mut a).ok_or_else(|| Error::diag("singular cascade eigen-system"))
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve_in_place(a: &mut [Vec<f64>]) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                if f != 0.0 {
                    for k in col..=n {
                        a[row][k] -= f * a[col][k];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_moments() {
        let w = build_wavelet(WaveletFamily::Haar, 1, 6).unwrap();
        assert_eq!(w.moment(0), 0.0);
        assert!((w.moment(1) + 0.25).abs() < 1e-15);
        let fine = build_wavelet(WaveletFamily::Haar, 1, 12).unwrap();
        assert_eq!(fine.moment(1), w.moment(1));
        assert_eq!(w.psi(0.25), 1.0);
        assert_eq!(w.psi(0.75), -1.0);
    }

    #[test]
    fn db2_has_two_vanishing_moments() {
        let w = build_wavelet(WaveletFamily::Daubechies, 2, 10).unwrap();
        let scale0 = w.abs_moment(0);
        assert!(w.moment(0).abs() < 1e-12 * scale0);
        assert!(w.moment(1).abs() < 1e-12 * w.abs_moment(1));
        assert!(w.moment(2).abs() > 1e-3);
        // ‖ψ‖₂ = 1 for an orthonormal wavelet
        let l2 = w.segment_integral(|_, y| y * y);
        assert!((l2 - 1.0).abs() < 1e-4, "{l2}");
    }

    #[test]
    fn all_daubechies_build() {
        for q in 1..=MAX_DAUBECHIES_Q {
            let w = build_wavelet(WaveletFamily::Daubechies, q, 8).unwrap();
            assert_eq!(w.support(), (2 * q - 1) as f64);
            let s: f64 = w.lowpass.iter().sum();
            assert!((s - std::f64::consts::SQRT_2).abs() < 1e-14);
            assert!(w.highpass.iter().sum::<f64>().abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_requests() {
        assert!(build_wavelet(WaveletFamily::Haar, 2, 8).is_err());
        assert!(build_wavelet(WaveletFamily::Daubechies, 11, 8).is_err());
        assert!(build_wavelet(WaveletFamily::Daubechies, 2, 5).is_err());
    }
}
