use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;

/// ULA response: entry `p` is `exp(j·2π·spacing·p·sin(angle))`.
pub fn steering_vector(angle: f64, n_elements: usize, spacing: f64) -> Array1<Complex64> {
    steering_from_sine(angle.sin(), n_elements, spacing)
}

pub(crate) fn steering_from_sine(sin_angle: f64, n_elements: usize, spacing: f64) -> Array1<Complex64> {
    Array1::from_iter(
        (0..n_elements).map(|p| Complex64::from_polar(1.0, std::f64::consts::TAU * spacing * p as f64 * sin_angle)),
    )
}

/// Uniform-angle DFT-style codebook. Column `c` steers towards
/// `-π/2 + π(c + 0.5)/C` and has unit norm.
#[derive(Clone, Debug)]
pub struct Codebook {
    pub words: Array2<Complex64>,
}

impl Codebook {
    pub fn uniform(n_elements: usize, size: usize, spacing: f64) -> Self {
        let scale = 1.0 / (n_elements as f64).sqrt();
        let mut words = Array2::zeros((n_elements, size));
        for c in 0..size {
            let angle = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * (c as f64 + 0.5) / size as f64;
            let a = steering_vector(angle, n_elements, spacing);
            words.column_mut(c).assign(&a.mapv(|z| z * scale));
        }
        Self { words }
    }

    pub fn len(&self) -> usize {
        self.words.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_elements(&self) -> usize {
        self.words.nrows()
    }

    pub fn codeword(&self, c: usize) -> ArrayView1<'_, Complex64> {
        self.words.column(c)
    }
}

/// First index of the largest value; NaN never wins.
pub(crate) fn argmax_first(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

/// Codeword maximizing `|hᴴw|` for a vector channel.
pub fn beamform_vector(h: ArrayView1<'_, Complex64>, codebook: &Codebook) -> usize {
    let gains = h.mapv(|z| z.conj()).dot(&codebook.words);
    argmax_first(gains.iter().map(|g| g.norm_sqr()))
}

/// Codeword maximizing `‖Hᴴw‖` for a matrix channel whose rows are indexed
/// by the transmitting array.
pub fn beamform_matrix(h: ArrayView2<'_, Complex64>, codebook: &Codebook) -> usize {
    let gains = h.t().mapv(|z| z.conj()).dot(&codebook.words);
    argmax_first(gains.columns().into_iter().map(|col| col.iter().map(|g| g.norm_sqr()).sum::<f64>()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn broadside_is_all_ones() {
        let a = steering_vector(0.0, 7, 0.5);
        assert!(a.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        assert_eq!(steering_vector(1.2, 1, 0.5).to_vec(), vec![Complex64::new(1.0, 0.0)]);
    }

    #[test]
    fn thirty_degrees_half_wavelength_phases() {
        let a = steering_vector(PI / 6.0, 4, 0.5);
        for (p, z) in a.iter().enumerate() {
            let expected = Complex64::from_polar(1.0, p as f64 * FRAC_PI_2);
            assert!((z - expected).norm() < 1e-12, "{p}: {z}");
            assert!((z.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn codewords_have_unit_norm() {
        let cb = Codebook::uniform(32, 64, 0.5);
        for c in 0..cb.len() {
            let n: f64 = cb.codeword(c).iter().map(|z| z.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn channel_equal_to_codeword_selects_it() {
        let cb = Codebook::uniform(16, 32, 0.5);
        for c in [0, 3, 17, 31] {
            assert_eq!(beamform_vector(cb.codeword(c), &cb), c);
        }
    }

    fn complex_vec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
        proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(r, i)| Complex64::new(r, i)), n)
    }

    proptest! {
        #[test]
        fn vector_beam_matches_exhaustive_scan(h in complex_vec(8)) {
            let cb = Codebook::uniform(8, 16, 0.5);
            // scalar re-implementation with explicit loops
            let mut best = 0;
            let mut best_g = -1.0;
            for c in 0..16 {
                let angle = -FRAC_PI_2 + PI * (c as f64 + 0.5) / 16.0;
                let mut acc = Complex64::new(0.0, 0.0);
                for (p, hp) in h.iter().enumerate() {
                    let w = Complex64::from_polar(1.0 / 8f64.sqrt(), PI * p as f64 * angle.sin());
                    acc += hp.conj() * w;
                }
                if acc.norm_sqr() > best_g {
                    best_g = acc.norm_sqr();
                    best = c;
                }
            }
            let h = Array1::from(h);
            let chosen = beamform_vector(h.view(), &cb);
            let g = |c: usize| h.iter().zip(cb.codeword(c)).map(|(a, w)| a.conj() * w).sum::<Complex64>().norm_sqr();
            prop_assert!(chosen == best || (g(chosen) - best_g).abs() <= 1e-12 * best_g.max(1.0));
        }

        #[test]
        fn matrix_beam_matches_exhaustive_scan(h in complex_vec(8 * 3)) {
            let cb = Codebook::uniform(8, 16, 0.5);
            let h = Array2::from_shape_vec((8, 3), h).unwrap();
            let power = |c: usize| -> f64 {
                (0..3).map(|u| (0..8).map(|r| h[[r, u]].conj() * cb.words[[r, c]]).sum::<Complex64>().norm_sqr()).sum()
            };
            let best = (0..16).map(power).fold(f64::NEG_INFINITY, f64::max);
            let chosen = beamform_matrix(h.view(), &cb);
            prop_assert!((power(chosen) - best).abs() <= 1e-12 * best.max(1.0));
        }
    }
}
