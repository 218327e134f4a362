use serde::{Deserialize, Serialize};

use crate::scene::{ImageStack, Raster};

/// Channels whose standard deviation falls below this are treated as constant.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Per-channel mean and standard deviation of one view before normalization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: f64,
    pub std: f64,
    /// True when the σ-floor rule replaced `std` by 1.
    pub floored: bool,
}

/// One normalized (and usually downscaled) view, channel-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloatRaster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FloatRaster {
    pub fn get(&self, c: usize, row: usize, col: usize) -> f64 {
        self.data[(c * self.height + row) * self.width + col]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedImageStack {
    pub views: Vec<FloatRaster>,
    pub stats: Vec<Vec<ChannelStats>>,
}

/// Z-score normalization of every channel of one view, at full resolution.
pub fn normalize_view(raster: &Raster) -> (FloatRaster, Vec<ChannelStats>) {
    let n = raster.width * raster.height;
    let mut data = Vec::with_capacity(raster.data.len());
    let mut stats = Vec::with_capacity(raster.channels);
    for c in 0..raster.channels {
        let ch = raster.channel(c);
        let mean = ch.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        let var = ch.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        let floored = std < SIGMA_FLOOR;
        let scale = if floored { 1.0 } else { std };
        data.extend(ch.iter().map(|&v| (v as f64 - mean) / scale));
        stats.push(ChannelStats {
            mean,
            std: scale,
            floored,
        });
    }
    (
        FloatRaster {
            width: raster.width,
            height: raster.height,
            channels: raster.channels,
            data,
        },
        stats,
    )
}

/// Output size for a resize fraction; never below one pixel.
pub fn resized_dim(dim: usize, fraction: f64) -> usize {
    ((dim as f64 * fraction).round() as usize).max(1)
}

/// 1-D area-averaging weights: `weights[o]` lists `(input index, weight)`
/// pairs whose weights sum to one.
fn area_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = (o + 1) as f64 * scale;
            let mut w = Vec::new();
            let mut i = lo.floor() as usize;
            while (i as f64) < hi && i < n_in {
                let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                if overlap > 0.0 {
                    w.push((i, overlap / scale));
                }
                i += 1;
            }
            w
        })
        .collect()
}

/// Box-filter resampling; exact block means when the factor is an integer.
pub fn resize_area(src: &FloatRaster, out_w: usize, out_h: usize) -> FloatRaster {
    let wx = area_weights(src.width, out_w);
    let wy = area_weights(src.height, out_h);
    let mut data = vec![0.0; src.channels * out_w * out_h];
    for c in 0..src.channels {
        for (r, ry) in wy.iter().enumerate() {
            for (q, qx) in wx.iter().enumerate() {
                let mut acc = 0.0;
                for &(iy, wyv) in ry {
                    for &(ix, wxv) in qx {
                        acc += wyv * wxv * src.get(c, iy, ix);
                    }
                }
                data[(c * out_h + r) * out_w + q] = acc;
            }
        }
    }
    FloatRaster {
        width: out_w,
        height: out_h,
        channels: src.channels,
        data,
    }
}

/// Normalizes each view per channel, then downsizes it to `resize_fraction`
/// of its resolution.
pub fn normalize_images(stack: &ImageStack, resize_fraction: f64) -> NormalizedImageStack {
    let mut views = Vec::with_capacity(stack.views.len());
    let mut stats = Vec::with_capacity(stack.views.len());
    for raster in &stack.views {
        let (full, s) = normalize_view(raster);
        let out_w = resized_dim(raster.width, resize_fraction);
        let out_h = resized_dim(raster.height, resize_fraction);
        views.push(resize_area(&full, out_w, out_h));
        stats.push(s);
    }
    NormalizedImageStack { views, stats }
}
