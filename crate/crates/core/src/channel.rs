//! Line-of-sight channel synthesis for the BS -> surface -> UE link.
//!
//! All internal quantities are linear SI units. Gains and powers given in
//! dB are converted once, when a [`LinkBudget`] is built.

use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{angles_between, radiation_pattern, RisLayout, Vec3};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// `K` contiguous sub-bands of width `f_d`, centered on `F_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubbandGrid {
    pub center_frequency: f64,
    pub subband_width: f64,
    pub count: usize,
}

impl SubbandGrid {
    pub fn new(center_frequency: f64, subband_width: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidInput("sub-band count must be positive".into()));
        }
        if !(center_frequency > 0.0 && subband_width > 0.0) {
            return Err(Error::InvalidInput("frequencies must be positive".into()));
        }
        let grid = Self {
            center_frequency,
            subband_width,
            count,
        };
        if grid.frequency(0) <= 0.0 {
            return Err(Error::InvalidInput("lowest sub-band frequency is not positive".into()));
        }
        Ok(grid)
    }

    /// 128 sub-bands of 3.6 MHz around 28 GHz.
    pub fn baseline() -> Self {
        Self::new(28e9, 3.6e6, 128).expect("valid default grid")
    }

    /// Center frequency of sub-band `k` (0-based).
    pub fn frequency(&self, k: usize) -> f64 {
        self.first_frequency() + k as f64 * self.subband_width
    }

    pub fn first_frequency(&self) -> f64 {
        self.center_frequency - 0.5 * (self.count as f64 - 1.0) * self.subband_width
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.frequency(k)).collect()
    }

    pub fn wavelength(&self, k: usize) -> f64 {
        SPEED_OF_LIGHT / self.frequency(k)
    }

    pub fn wavelengths(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.wavelength(k)).collect()
    }

    pub fn center_wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.center_frequency
    }

    pub fn bandwidth(&self) -> f64 {
        self.count as f64 * self.subband_width
    }

    /// Delay period of the sub-band phase progression, `1 / f_d`.
    pub fn alias_period(&self) -> f64 {
        1.0 / self.subband_width
    }
}

/// Antenna gains, transmit power and noise, held in linear units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub element_gain: f64,
    /// Total transmit power in watts.
    pub total_power: f64,
    /// Noise power spectral density in W/Hz.
    pub noise_psd: f64,
    /// JMMSE regularization weight.
    pub alpha: f64,
}

impl LinkBudget {
    pub fn from_db(
        tx_gain_dbi: f64,
        rx_gain_dbi: f64,
        element_gain_dbi: f64,
        total_power_dbm: f64,
        noise_psd_dbm_hz: f64,
        alpha: f64,
    ) -> Self {
        Self {
            tx_gain: db_to_linear(tx_gain_dbi),
            rx_gain: db_to_linear(rx_gain_dbi),
            element_gain: db_to_linear(element_gain_dbi),
            total_power: dbm_to_watts(total_power_dbm),
            noise_psd: dbm_to_watts(noise_psd_dbm_hz),
            alpha,
        }
    }

    /// G_t = G_r = 21 dBi, G_u = 9.03 dBi, P_t = 30 dBm, -170 dBm/Hz, alpha = 1e4.
    pub fn baseline() -> Self {
        Self::from_db(21.0, 21.0, 9.03, 30.0, -170.0, 1e4)
    }

    pub fn with_total_power(mut self, watts: f64) -> Self {
        self.total_power = watts;
        self
    }

    /// `sqrt(G_r G_u G_t)`.
    pub fn gain_amplitude(&self) -> f64 {
        (self.rx_gain * self.element_gain * self.tx_gain).sqrt()
    }

    /// Per-sub-band transmit power `P_t / K`.
    pub fn subband_power(&self, grid: &SubbandGrid) -> f64 {
        self.total_power / grid.count as f64
    }

    /// Per-sub-band noise power `psd * f_d`.
    pub fn subband_noise(&self, grid: &SubbandGrid) -> f64 {
        self.noise_psd * grid.subband_width
    }

    /// Known pilot symbol, constant across sub-bands.
    pub fn pilot(&self, grid: &SubbandGrid) -> Complex64 {
        Complex64::new(self.subband_power(grid).sqrt(), 0.0)
    }
}

/// Complex coefficients over surface elements or over sub-bands.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelVector(pub Vec<Complex64>);

impl ChannelVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }
}

impl Deref for ChannelVector {
    type Target = [Complex64];
    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

impl DerefMut for ChannelVector {
    fn deref_mut(&mut self) -> &mut [Complex64] {
        &mut self.0
    }
}

impl From<Vec<Complex64>> for ChannelVector {
    fn from(v: Vec<Complex64>) -> Self {
        Self(v)
    }
}

/// Per-element reflection coefficients with `|theta_n| <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionCoefficients(Vec<Complex64>);

impl ReflectionCoefficients {
    pub fn new(theta: Vec<Complex64>) -> Result<Self> {
        if let Some(bad) = theta.iter().find(|t| !(t.norm() <= 1.0 + 1e-12)) {
            return Err(Error::InvalidInput(format!(
                "reflection amplitude {} exceeds 1",
                bad.norm()
            )));
        }
        Ok(Self(theta))
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![Complex64::new(1.0, 0.0); len])
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); len])
    }

    /// Unit-modulus coefficients from phases.
    pub fn from_phases(phases: impl IntoIterator<Item = f64>) -> Self {
        Self(phases.into_iter().map(|p| Complex64::from_polar(1.0, p)).collect())
    }

    /// Independent phases uniform on `[0, 2*pi)`.
    pub fn random_phase<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self::from_phases((0..len).map(|_| rng.random_range(0.0..2.0 * PI)))
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn element_channel(surface_point: Vec3, terminal: Vec3, aperture: f64, wavelength: f64) -> Result<Complex64> {
    if !(wavelength > 0.0) {
        return Err(Error::InvalidInput("wavelength must be positive".into()));
    }
    let d = surface_point.distance(terminal);
    if d == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let pattern = radiation_pattern(angles_between(surface_point, terminal)?);
    let amp = (aperture * pattern / (4.0 * PI * d * d)).sqrt();
    Ok(Complex64::from_polar(amp, -2.0 * PI * d / wavelength))
}

/// BS to element `n` channel `h_n`; the BS antenna pattern is isotropic.
pub fn bs_element_channel(bs: Vec3, layout: &RisLayout, n: usize, wavelength: f64) -> Result<Complex64> {
    element_channel(layout.element_position(n)?, bs, layout.element_area(), wavelength)
}

/// Effective aperture of an isotropic receive antenna, `lambda^2 / (4 pi)`.
pub fn receive_aperture(wavelength: f64) -> f64 {
    wavelength * wavelength / (4.0 * PI)
}

/// Element `n` to UE channel `g_n`.
pub fn ue_element_channel(ue: Vec3, layout: &RisLayout, n: usize, wavelength: f64) -> Result<Complex64> {
    element_channel(
        layout.element_position(n)?,
        ue,
        receive_aperture(wavelength),
        wavelength,
    )
}

/// `sqrt(G_r G_u G_t) * sum_n g_n h_n theta_n`.
pub fn cascaded_channel(
    h: &[Complex64],
    g: &[Complex64],
    theta: &ReflectionCoefficients,
    budget: &LinkBudget,
) -> Result<Complex64> {
    if g.len() != h.len() {
        return Err(Error::LengthMismatch {
            expected: h.len(),
            found: g.len(),
        });
    }
    if theta.len() != h.len() {
        return Err(Error::LengthMismatch {
            expected: h.len(),
            found: theta.len(),
        });
    }
    let sum: Complex64 = h.iter().zip(g).zip(theta.as_slice()).map(|((h, g), t)| g * h * t).sum();
    Ok(sum * budget.gain_amplitude())
}

/// Phase-conjugate coefficients maximizing `|(g .* h)^T theta|`.
/// A zero product gets phase 0.
pub fn optimal_theta(h: &[Complex64], g: &[Complex64]) -> Result<ReflectionCoefficients> {
    if g.len() != h.len() {
        return Err(Error::LengthMismatch {
            expected: h.len(),
            found: g.len(),
        });
    }
    Ok(ReflectionCoefficients(
        h.iter()
            .zip(g)
            .map(|(h, g)| {
                let p = g * h;
                let m = p.norm();
                if m > 0.0 {
                    p.conj() / m
                } else {
                    Complex64::new(1.0, 0.0)
                }
            })
            .collect(),
    ))
}

/// Frequency-independent part of each element's cascaded response.
///
/// The cascaded term of element `n` at wavelength `lambda` is
/// `amplitude[n] * lambda * exp(-j 2 pi path_length[n] / lambda)`; the factor
/// `lambda` carries the receive aperture `lambda^2 / 4pi` under the root.
#[derive(Debug, Clone)]
pub struct CascadeTerms {
    pub amplitude: Vec<f64>,
    pub path_length: Vec<f64>,
}

impl CascadeTerms {
    /// Terms for the listed 1-based element indices.
    pub fn new(bs: Vec3, ue: Vec3, layout: &RisLayout, elements: &[usize], budget: &LinkBudget) -> Result<Self> {
        let positions = elements
            .iter()
            .map(|&n| layout.element_position(n))
            .collect::<Result<Vec<_>>>()?;
        Self::from_positions(bs, ue, &positions, layout.element_area(), budget)
    }

    pub fn from_positions(
        bs: Vec3,
        ue: Vec3,
        positions: &[Vec3],
        element_area: f64,
        budget: &LinkBudget,
    ) -> Result<Self> {
        let scale = budget.gain_amplitude() * element_area.sqrt() / (4.0 * PI * (4.0 * PI).sqrt());
        let mut amplitude = Vec::with_capacity(positions.len());
        let mut path_length = Vec::with_capacity(positions.len());
        for &p in positions {
            let dt = p.distance(bs);
            let dr = p.distance(ue);
            if dt == 0.0 || dr == 0.0 {
                return Err(Error::CoincidentPoints);
            }
            let ft = radiation_pattern(angles_between(p, bs)?);
            let fr = radiation_pattern(angles_between(p, ue)?);
            amplitude.push(scale * (ft * fr).sqrt() / (dt * dr));
            path_length.push(dt + dr);
        }
        Ok(Self { amplitude, path_length })
    }

    pub fn len(&self) -> usize {
        self.amplitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitude.is_empty()
    }

    /// Per-element `sqrt(G) g_n h_n` at one frequency.
    pub fn products(&self, frequency: f64) -> Vec<Complex64> {
        let lambda = SPEED_OF_LIGHT / frequency;
        self.amplitude
            .iter()
            .zip(&self.path_length)
            .map(|(&a, &d)| Complex64::from_polar(a * lambda, -2.0 * PI * d / lambda))
            .collect()
    }

    /// Scalar cascaded channel at one frequency.
    pub fn narrowband(&self, theta: &[Complex64], frequency: f64) -> Result<Complex64> {
        self.check_len(theta.len())?;
        let lambda = SPEED_OF_LIGHT / frequency;
        let sum: Complex64 = self
            .amplitude
            .iter()
            .zip(&self.path_length)
            .zip(theta)
            .map(|((&a, &d), t)| t * Complex64::from_polar(a, -2.0 * PI * d / lambda))
            .sum();
        Ok(sum * lambda)
    }

    /// Cascaded channel on every sub-band of `grid`.
    pub fn wideband(&self, theta: &[Complex64], grid: &SubbandGrid) -> Result<ChannelVector> {
        self.check_len(theta.len())?;
        let f1 = grid.first_frequency();
        let mut acc = vec![Complex64::new(0.0, 0.0); grid.count];
        for ((&a, &d), t) in self.amplitude.iter().zip(&self.path_length).zip(theta) {
            if a == 0.0 || *t == Complex64::new(0.0, 0.0) {
                continue;
            }
            let step = Complex64::from_polar(1.0, -2.0 * PI * grid.subband_width * d / SPEED_OF_LIGHT);
            let mut phasor = t * Complex64::from_polar(a, -2.0 * PI * f1 * d / SPEED_OF_LIGHT);
            for slot in acc.iter_mut() {
                *slot += phasor;
                phasor *= step;
            }
        }
        for (k, slot) in acc.iter_mut().enumerate() {
            *slot *= grid.wavelength(k);
        }
        Ok(ChannelVector(acc))
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: n,
            });
        }
        Ok(())
    }
}

/// Cascaded channel through the listed elements on every sub-band.
pub fn wideband_cascaded(
    bs: Vec3,
    ue: Vec3,
    layout: &RisLayout,
    elements: &[usize],
    theta: &ReflectionCoefficients,
    grid: &SubbandGrid,
    budget: &LinkBudget,
) -> Result<ChannelVector> {
    CascadeTerms::new(bs, ue, layout, elements, budget)?.wideband(theta.as_slice(), grid)
}

/// Circular complex Gaussian sample with variance `variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// `r_k = s w_k + eta_k` with the constant pilot `s = sqrt(P_t / K)`.
pub fn receive_pilots<R: Rng + ?Sized>(
    channel: &[Complex64],
    grid: &SubbandGrid,
    budget: &LinkBudget,
    rng: &mut R,
) -> ChannelVector {
    let s = budget.pilot(grid);
    let noise = budget.subband_noise(grid);
    ChannelVector(
        channel
            .iter()
            .map(|w| {
                let clean = s * w;
                if noise > 0.0 {
                    clean + complex_gaussian(rng, noise)
                } else {
                    clean
                }
            })
            .collect(),
    )
}

/// Received SNR in dB, `P_t ||w||^2 / (psd K f_d)`.
pub fn link_snr(channel: &[Complex64], grid: &SubbandGrid, budget: &LinkBudget) -> f64 {
    let energy: f64 = channel.iter().map(|c| c.norm_sqr()).sum();
    linear_to_db(budget.total_power * energy / (budget.noise_psd * grid.bandwidth()))
}

/// Received pilot SNR `||S w||^2 / E||eta||^2 = P_t ||w||^2 / (psd K^2 f_d)`
/// in dB: the per-sample ratio, `link_snr` less `10 log10 K`.
pub fn received_snr(channel: &[Complex64], grid: &SubbandGrid, budget: &LinkBudget) -> f64 {
    link_snr(channel, grid, budget) - linear_to_db(grid.count as f64)
}

/// Spectral efficiency `log2(1 + SNR)` in bps/Hz.
pub fn throughput(snr_db: f64) -> f64 {
    (1.0 + db_to_linear(snr_db)).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn grid_structure() {
        let g = SubbandGrid::baseline();
        let f = g.frequencies();
        for k in 1..f.len() {
            assert_relative_eq!(f[k] - f[k - 1], 3.6e6, epsilon = 1e-3);
        }
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        assert!((mean - 28e9).abs() < 3.6e6);
        assert_relative_eq!(g.wavelength(5) * g.frequency(5), SPEED_OF_LIGHT);
        // unambiguous path-length range
        assert_relative_eq!(SPEED_OF_LIGHT * g.alias_period(), 83.2757, epsilon = 1e-3);
        assert!(SubbandGrid::new(28e9, 3.6e6, 0).is_err());
    }

    #[test]
    fn budget_conversions() {
        let b = LinkBudget::baseline();
        let g = SubbandGrid::baseline();
        assert_relative_eq!(b.total_power, 1.0, epsilon = 1e-12);
        assert_relative_eq!(b.noise_psd, 1e-20, max_relative = 1e-12);
        let noise_dbm = linear_to_db(b.subband_noise(&g)) + 30.0;
        assert_relative_eq!(noise_dbm, -104.437, epsilon = 1e-3);
        assert_relative_eq!(b.subband_power(&g), 1.0 / 128.0);
    }

    #[test]
    fn element_channel_amplitude_and_phase() {
        // one element at the origin, BS on boresight at 1 m
        let l = RisLayout::new(1, 1, 0.005, 0.005).unwrap();
        let lambda = 0.0107;
        let h = bs_element_channel(Vec3::new(1.0, 0.0, 0.0), &l, 1, lambda).unwrap();
        assert_relative_eq!(h.norm_sqr(), 2.5e-5 / (4.0 * PI), max_relative = 1e-12);
        assert_relative_eq!(h.norm_sqr(), 1.9894e-6, max_relative = 1e-4);
        let h2 = bs_element_channel(Vec3::new(2.0, 0.0, 0.0), &l, 1, lambda).unwrap();
        assert_relative_eq!(h.norm_sqr() / h2.norm_sqr(), 4.0, max_relative = 1e-12);
        let hl = bs_element_channel(Vec3::new(lambda, 0.0, 0.0), &l, 1, lambda).unwrap();
        assert_relative_eq!(hl.arg(), 0.0, epsilon = 1e-9);
        let g = ue_element_channel(Vec3::new(lambda / 2.0, 0.0, 0.0), &l, 1, lambda).unwrap();
        assert_relative_eq!(g.arg().abs(), PI, epsilon = 1e-9);
        let g1 = ue_element_channel(Vec3::new(3.0, 0.0, 0.0), &l, 1, lambda).unwrap();
        let g2 = ue_element_channel(Vec3::new(6.0, 0.0, 0.0), &l, 1, lambda).unwrap();
        assert_relative_eq!(g1.norm_sqr() / g2.norm_sqr(), 4.0, max_relative = 1e-12);
        assert!(bs_element_channel(Vec3::ZERO, &l, 1, lambda).is_err());
    }

    #[test]
    fn receive_aperture_at_28ghz() {
        let lambda = SPEED_OF_LIGHT / 28e9;
        assert_relative_eq!(lambda, 1.0707e-2, max_relative = 1e-4);
        assert_relative_eq!(receive_aperture(lambda), 9.122e-6, max_relative = 1e-3);
    }

    #[test]
    fn cascaded_cases() {
        let b = LinkBudget::baseline();
        let h = vec![c(0.3, 0.1), c(-0.2, 0.5)];
        let g = vec![c(0.1, -0.4), c(0.7, 0.2)];
        let w0 = cascaded_channel(&h, &g, &ReflectionCoefficients::zeros(2), &b).unwrap();
        assert_eq!(w0, c(0.0, 0.0));
        let single = cascaded_channel(&h[..1], &g[..1], &ReflectionCoefficients::ones(1), &b).unwrap();
        assert_relative_eq!((single - b.gain_amplitude() * g[0] * h[0]).norm(), 0.0, epsilon = 1e-12);
        let opt = optimal_theta(&h, &g).unwrap();
        let w = cascaded_channel(&h, &g, &opt, &b).unwrap();
        let coherent: f64 = h.iter().zip(&g).map(|(h, g)| (g * h).norm()).sum();
        assert_relative_eq!(w.norm(), b.gain_amplitude() * coherent, max_relative = 1e-12);
        assert!(matches!(
            cascaded_channel(&h, &g[..1], &opt, &b),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn optimal_theta_cases() {
        let one = [c(1.0, 0.0)];
        assert_eq!(optimal_theta(&one, &[c(2.0, 0.0)]).unwrap().as_slice()[0], c(1.0, 0.0));
        let t = optimal_theta(&one, &[c(0.0, 1.0)]).unwrap().as_slice()[0];
        assert_relative_eq!((t - c(0.0, -1.0)).norm(), 0.0, epsilon = 1e-15);
        let zero = optimal_theta(&one, &[c(0.0, 0.0)]).unwrap().as_slice()[0];
        assert_eq!(zero, c(1.0, 0.0));
        // two elements with channels (1, j): coherent 4 vs all-ones 2
        let h = [c(1.0, 0.0), c(1.0, 0.0)];
        let g = [c(1.0, 0.0), c(0.0, 1.0)];
        let b = LinkBudget::from_db(0.0, 0.0, 0.0, 0.0, -170.0, 1.0);
        let opt = cascaded_channel(&h, &g, &optimal_theta(&h, &g).unwrap(), &b).unwrap();
        let ones = cascaded_channel(&h, &g, &ReflectionCoefficients::ones(2), &b).unwrap();
        assert_relative_eq!(opt.norm_sqr() / ones.norm_sqr(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn wideband_matches_elementwise_route() {
        let l = RisLayout::new(4, 6, 0.005, 0.005).unwrap();
        let bs = Vec3::new(5.0, -5.0, 2.0);
        let ue = Vec3::new(3.0, 0.4, -0.2);
        let b = LinkBudget::baseline();
        let grid = SubbandGrid::new(28e9, 3.6e6, 16).unwrap();
        let idx: Vec<usize> = (1..=l.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta = ReflectionCoefficients::random_phase(idx.len(), &mut rng);
        let w = wideband_cascaded(bs, ue, &l, &idx, &theta, &grid, &b).unwrap();
        for k in 0..grid.count {
            let lambda = grid.wavelength(k);
            let h: Vec<_> = idx
                .iter()
                .map(|&n| bs_element_channel(bs, &l, n, lambda).unwrap())
                .collect();
            let g: Vec<_> = idx
                .iter()
                .map(|&n| ue_element_channel(ue, &l, n, lambda).unwrap())
                .collect();
            let direct = cascaded_channel(&h, &g, &theta, &b).unwrap();
            assert_relative_eq!((w[k] - direct).norm(), 0.0, epsilon = 1e-9 * direct.norm());
        }
    }

    #[test]
    fn single_band_reduces_to_narrowband() {
        let l = RisLayout::new(2, 2, 0.005, 0.005).unwrap();
        let b = LinkBudget::baseline();
        let grid = SubbandGrid::new(28e9, 3.6e6, 1).unwrap();
        let terms = CascadeTerms::new(
            Vec3::new(5.0, -5.0, 2.0),
            Vec3::new(4.0, 0.0, 0.0),
            &l,
            &[1, 2, 3, 4],
            &b,
        )
        .unwrap();
        let th = [c(1.0, 0.0); 4];
        let wb = terms.wideband(&th, &grid).unwrap();
        let nb = terms.narrowband(&th, 28e9).unwrap();
        assert_relative_eq!((wb[0] - nb).norm(), 0.0, epsilon = 1e-14 * nb.norm());
    }

    #[test]
    fn point_rus_phase_slope() {
        let l = RisLayout::baseline();
        let bs = Vec3::new(5.0, -5.0, 2.0);
        let ue = Vec3::new(5.0, 0.32, 0.16);
        let grid = SubbandGrid::baseline();
        let terms = CascadeTerms::new(bs, ue, &l, &[1], &LinkBudget::baseline()).unwrap();
        let w = terms.wideband(&[c(1.0, 0.0)], &grid).unwrap();
        let path = terms.path_length[0];
        let expected = -2.0 * PI * grid.subband_width * path / SPEED_OF_LIGHT;
        for k in 1..grid.count {
            let step = (w[k] / w[k - 1]).arg();
            let diff = (step - expected).rem_euclid(2.0 * PI);
            assert!(diff.min(2.0 * PI - diff) < 1e-9);
            // modulus only changes through lambda_k
            assert_relative_eq!(
                w[k].norm() / w[k - 1].norm(),
                grid.wavelength(k) / grid.wavelength(k - 1),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn pilots_noiseless_and_noise_variance() {
        let grid = SubbandGrid::baseline();
        let mut b = LinkBudget::baseline();
        let w: Vec<Complex64> = (0..grid.count).map(|k| c(k as f64, -1.0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        b.noise_psd = 0.0;
        let r = receive_pilots(&w, &grid, &b, &mut rng);
        let s = b.pilot(&grid);
        for (r, w) in r.iter().zip(&w) {
            assert_eq!(*r, s * w);
        }
        let b = LinkBudget::baseline();
        let zero = vec![c(0.0, 0.0); grid.count];
        let mut acc = 0.0;
        let draws = 400;
        for _ in 0..draws {
            acc += receive_pilots(&zero, &grid, &b, &mut rng).norm_sqr();
        }
        let var = acc / (draws * grid.count) as f64;
        assert_relative_eq!(var, b.subband_noise(&grid), max_relative = 0.02);
    }

    #[test]
    fn snr_and_throughput() {
        let grid = SubbandGrid::baseline();
        let b = LinkBudget::baseline();
        assert_eq!(link_snr(&[c(0.0, 0.0)], &grid, &b), f64::NEG_INFINITY);
        let w = [c(1e-5, 0.0)];
        let base = link_snr(&w, &grid, &b);
        // 1 W * 1e-10 / (1e-20 * 128 * 3.6e6)
        assert_relative_eq!(base, 10.0 * (1e-10f64 / 4.608e-12).log10(), epsilon = 1e-9);
        assert_relative_eq!(base, 13.365, epsilon = 1e-3);
        let doubled = link_snr(&w, &grid, &b.with_total_power(2.0));
        assert_relative_eq!(doubled - base, 3.0103, epsilon = 1e-4);
        assert_relative_eq!(throughput(0.0), 1.0);
        assert_eq!(throughput(f64::NEG_INFINITY), 0.0);
        assert_relative_eq!(throughput(40.0), (1.0f64 + 1e4).log2());
        assert_relative_eq!(throughput(40.0), 13.29, epsilon = 1e-2);
    }

    #[test]
    fn received_snr_is_signal_to_noise_energy() {
        let grid = SubbandGrid::new(28e9, 3.6e6, 64).unwrap();
        let b = LinkBudget::baseline();
        let w: Vec<Complex64> = (0..64).map(|k| Complex64::from_polar(2e-8, 0.3 * k as f64)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = b.pilot(&grid);
        let (mut sig, mut noise) = (0.0, 0.0);
        for _ in 0..400 {
            let r = receive_pilots(&w, &grid, &b, &mut rng);
            for (r, w) in r.iter().zip(&w) {
                sig += (s * w).norm_sqr();
                noise += (r - s * w).norm_sqr();
            }
        }
        assert_relative_eq!(received_snr(&w, &grid, &b), linear_to_db(sig / noise), epsilon = 0.05);
        assert_relative_eq!(
            link_snr(&w, &grid, &b) - received_snr(&w, &grid, &b),
            linear_to_db(64.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn random_phase_gain_equals_element_count() {
        let n = 64;
        let h = vec![c(1.0, 0.0); n];
        let g: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(1.0, 0.37 * i as f64)).collect();
        let b = LinkBudget::from_db(0.0, 0.0, 0.0, 0.0, -170.0, 1.0);
        let opt = cascaded_channel(&h, &g, &optimal_theta(&h, &g).unwrap(), &b)
            .unwrap()
            .norm_sqr();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 4000;
        let mean: f64 = (0..draws)
            .map(|_| {
                let th = ReflectionCoefficients::random_phase(n, &mut rng);
                cascaded_channel(&h, &g, &th, &b).unwrap().norm_sqr()
            })
            .sum::<f64>()
            / draws as f64;
        assert_relative_eq!(opt, (n * n) as f64, max_relative = 1e-9);
        assert_relative_eq!(mean, n as f64, max_relative = 0.06);
    }

    proptest! {
        #[test]
        fn optimal_theta_dominates(
            parts in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.0..6.3f64), 1..12)
        ) {
            let h: Vec<_> = parts.iter().map(|p| c(p.0, p.1)).collect();
            let g: Vec<_> = parts.iter().map(|p| c(p.2, p.3)).collect();
            let other = ReflectionCoefficients::from_phases(parts.iter().map(|p| p.4));
            let b = LinkBudget::from_db(3.0, 1.0, 2.0, 0.0, -170.0, 1.0);
            let opt = optimal_theta(&h, &g).unwrap();
            prop_assert!(opt.as_slice().iter().all(|t| (t.norm() - 1.0).abs() < 1e-12));
            let best = cascaded_channel(&h, &g, &opt, &b).unwrap().norm();
            let any = cascaded_channel(&h, &g, &other, &b).unwrap().norm();
            prop_assert!(any <= best * (1.0 + 1e-12) + 1e-15);
        }

        #[test]
        fn amplitude_inverse_distance(d in 0.5..50.0f64) {
            let l = RisLayout::new(1, 1, 0.005, 0.005).unwrap();
            let h1 = bs_element_channel(Vec3::new(d, 0.0, 0.0), &l, 1, 0.01).unwrap();
            let h2 = bs_element_channel(Vec3::new(2.0 * d, 0.0, 0.0), &l, 1, 0.01).unwrap();
            prop_assert!((h1.norm() / h2.norm() - 2.0).abs() < 1e-12);
        }
    }
}
