//! Kernelized correlation filter: ridge regression over all circular shifts
//! of a patch, solved elementwise in the Fourier domain.

use ndarray::{Array2, Zip};
use rustfft::num_complex::Complex64;

use super::features::FeaturePatch;
use super::fft::{fft2_real, ifft2};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    /// Ridge regularizer.
    pub lambda: f64,
    /// Gaussian kernel bandwidth.
    pub kernel_sigma: f64,
    /// Autoregressive update rate.
    pub learn_rate: f64,
    /// Label bandwidth in target-size units: sigma = factor * sqrt(w * h) / cell.
    pub label_sigma_factor: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            lambda: 1e-4,
            kernel_sigma: 0.5,
            learn_rate: 0.02,
            label_sigma_factor: 0.1,
        }
    }
}

impl FilterParams {
    /// Label sigma in cells for a target of `size` pixels.
    pub fn label_sigma(&self, size: (f64, f64), cell_size: usize) -> f64 {
        (self.label_sigma_factor * (size.0 * size.1).sqrt() / cell_size as f64).max(0.25)
    }
}

/// Periodic Gaussian labels peaking at zero shift (index `(0, 0)`).
pub fn gaussian_labels(rows: usize, cols: usize, sigma: f64) -> Result<Array2<f64>> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument(format!("label grid {rows}x{cols} is empty")));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("label sigma must be positive, got {sigma}")));
    }
    let wrap = |i: usize, n: usize| -> f64 {
        let d = i.min(n - i);
        d as f64
    };
    Ok(Array2::from_shape_fn((rows, cols), |(r, c)| {
        let (dr, dc) = (wrap(r, rows), wrap(c, cols));
        (-(dr * dr + dc * dc) / (2.0 * sigma * sigma)).exp()
    }))
}

fn spectra(patch: &FeaturePatch) -> Vec<Array2<Complex64>> {
    let (_, _, channels) = patch.shape();
    (0..channels)
        .map(|k| fft2_real(&patch.channels.index_axis(ndarray::Axis(2), k).to_owned()))
        .collect()
}

fn gaussian_from_spectra(
    x_spec: &[Array2<Complex64>],
    z_spec: &[Array2<Complex64>],
    x_norm: f64,
    z_norm: f64,
    numel: usize,
    sigma: f64,
) -> Array2<f64> {
    let dim = x_spec[0].dim();
    let mut cross = Array2::<Complex64>::zeros(dim);
    for (xf, zf) in x_spec.iter().zip(z_spec) {
        Zip::from(&mut cross).and(xf).and(zf).for_each(|acc, &x, &z| *acc += x * z.conj());
    }
    let cross = ifft2(&cross);
    cross.mapv(|c| {
        let dist = (x_norm + z_norm - 2.0 * c.re).max(0.0);
        (-dist / (sigma * sigma * numel as f64)).exp()
    })
}

/// `u(m, n) = exp(-|x_(m,n) - z|^2 / (sigma^2 N))` where `x_(m,n)` is `x`
/// circularly shifted so that `x_(m,n)[p] = x[p + (m, n)]` and `N` is the
/// number of feature values.
pub fn kernel_correlation(x: &FeaturePatch, z: &FeaturePatch, sigma: f64) -> Result<Array2<f64>> {
    if x.shape() != z.shape() {
        return Err(Error::ShapeMismatch {
            expected: z.shape(),
            found: x.shape(),
        });
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("kernel sigma must be positive, got {sigma}")));
    }
    let numel = x.channels.len();
    Ok(gaussian_from_spectra(
        &spectra(x),
        &spectra(z),
        x.norm_sq(),
        z.norm_sq(),
        numel,
        sigma,
    ))
}

/// A trained filter. The dual solution is kept as separate numerator and
/// denominator spectra so both can be blended independently on update.
#[derive(Debug, Clone)]
pub struct Filter {
    pub alphaf_num: Array2<Complex64>,
    pub alphaf_den: Array2<Complex64>,
    pub template: FeaturePatch,
    pub labels_f: Array2<Complex64>,
    pub lambda: f64,
    pub kernel_sigma: f64,
    pub learn_rate: f64,
    pub label_sigma: f64,
    template_spec: Vec<Array2<Complex64>>,
}

pub fn train(patch: &FeaturePatch, labels: &Array2<f64>, lambda: f64, kernel_sigma: f64) -> Result<Filter> {
    if labels.dim() != patch.grid() {
        let (r, c) = labels.dim();
        return Err(Error::ShapeMismatch {
            expected: patch.shape(),
            found: (r, c, patch.shape().2),
        });
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let template_spec = spectra(patch);
    let norm = patch.norm_sq();
    let auto = gaussian_from_spectra(&template_spec, &template_spec, norm, norm, patch.channels.len(), kernel_sigma);
    let labels_f = fft2_real(labels);
    Ok(Filter {
        alphaf_num: labels_f.clone(),
        alphaf_den: fft2_real(&auto).mapv(|v| v + lambda),
        template: patch.clone(),
        labels_f,
        lambda,
        kernel_sigma,
        learn_rate: FilterParams::default().learn_rate,
        label_sigma: f64::NAN,
        template_spec,
    })
}

impl Filter {
    /// Trains with Gaussian labels sized for a target of `target_size` pixels.
    pub fn fit(patch: &FeaturePatch, target_size: (f64, f64), params: &FilterParams) -> Result<Filter> {
        let (rows, cols) = patch.grid();
        let sigma = params.label_sigma(target_size, patch.cell_size);
        let labels = gaussian_labels(rows, cols, sigma)?;
        let mut f = train(patch, &labels, params.lambda, params.kernel_sigma)?;
        f.learn_rate = params.learn_rate;
        f.label_sigma = sigma;
        Ok(f)
    }

    /// `F^-1[A . U_y]` including the (numerically tiny) imaginary part.
    pub fn respond_complex(&self, patch: &FeaturePatch) -> Result<Array2<Complex64>> {
        if patch.shape() != self.template.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.template.shape(),
                found: patch.shape(),
            });
        }
        let u = gaussian_from_spectra(
            &spectra(patch),
            &self.template_spec,
            patch.norm_sq(),
            self.template.norm_sq(),
            patch.channels.len(),
            self.kernel_sigma,
        );
        let uf = fft2_real(&u);
        let mut prod = Array2::<Complex64>::zeros(uf.dim());
        Zip::from(&mut prod)
            .and(&uf)
            .and(&self.alphaf_num)
            .and(&self.alphaf_den)
            .for_each(|p, &u, &n, &d| *p = n / d * u);
        Ok(ifft2(&prod))
    }

    /// Response map indexed by circular shift; `(0, 0)` is zero displacement.
    pub fn respond(&self, patch: &FeaturePatch) -> Result<Array2<f64>> {
        Ok(self.respond_complex(patch)?.mapv(|c| c.re))
    }

    /// Blends numerator, denominator and template towards a filter freshly
    /// trained on `patch`: `new = old * (1 - rate) + fresh * rate`.
    pub fn update(&self, patch: &FeaturePatch, rate: f64) -> Result<Filter> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!("update rate {rate} outside [0, 1]")));
        }
        if patch.shape() != self.template.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.template.shape(),
                found: patch.shape(),
            });
        }
        if rate == 0.0 {
            return Ok(self.clone());
        }
        let labels = ifft2(&self.labels_f).mapv(|c| c.re);
        let fresh = train(patch, &labels, self.lambda, self.kernel_sigma)?;
        if rate == 1.0 {
            return Ok(Filter {
                learn_rate: self.learn_rate,
                label_sigma: self.label_sigma,
                labels_f: self.labels_f.clone(),
                ..fresh
            });
        }
        let blend_c = |old: &Array2<Complex64>, new: &Array2<Complex64>| {
            let mut out = old.clone();
            Zip::from(&mut out).and(new).for_each(|o, &n| *o = *o * (1.0 - rate) + n * rate);
            out
        };
        let mut template = self.template.clone();
        Zip::from(&mut template.channels)
            .and(&patch.channels)
            .for_each(|o, &n| *o = *o * (1.0 - rate) + n * rate);
        template.origin = patch.origin;
        let template_spec = spectra(&template);
        Ok(Filter {
            alphaf_num: blend_c(&self.alphaf_num, &fresh.alphaf_num),
            alphaf_den: blend_c(&self.alphaf_den, &fresh.alphaf_den),
            template,
            labels_f: self.labels_f.clone(),
            lambda: self.lambda,
            kernel_sigma: self.kernel_sigma,
            learn_rate: self.learn_rate,
            label_sigma: self.label_sigma,
            template_spec,
        })
    }

    /// [`update`](Self::update) at the filter's own learning rate.
    pub fn adapt(&self, patch: &FeaturePatch) -> Result<Filter> {
        self.update(patch, self.learn_rate)
    }
}
