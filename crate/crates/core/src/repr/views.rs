//! Multi-view channel grouping and right-angle spatial rotations.
//!
//! Grouping packs consecutive channel triples of an `[H, W, F]` volume into
//! `ceil(F/3)` three-channel views so a pretrained RGB feature extractor can
//! process each view unchanged; a short final view is zero-padded.

use crate::repr::ReprError;
use crate::tensor::Tensor;

/// An `[V, H, W, 3]` stack of three-channel views plus the number of
/// zero-filled channels appended to the last view.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    views: Tensor,
    pad_channels: usize,
}

impl ViewSet {
    pub fn views(&self) -> &Tensor {
        &self.views
    }

    pub fn pad_channels(&self) -> usize {
        self.pad_channels
    }

    pub fn view_count(&self) -> usize {
        self.views.dims()[0]
    }

    pub fn height(&self) -> usize {
        self.views.dims()[1]
    }

    pub fn width(&self) -> usize {
        self.views.dims()[2]
    }

    /// Rebuild from parts, checking the shape contract.
    pub fn from_tensor(views: Tensor, pad_channels: usize) -> Result<Self, ReprError> {
        if views.ndim() != 4 || views.dims()[3] != 3 {
            return Err(ReprError::InvalidConfig(format!(
                "view tensor must be [V, H, W, 3], got {:?}",
                views.dims()
            )));
        }
        if pad_channels > 2 {
            return Err(ReprError::InvalidConfig(format!(
                "pad_channels must be 0..=2, got {pad_channels}"
            )));
        }
        Ok(Self { views, pad_channels })
    }
}

/// Group an `[H, W, F]` volume into `ceil(F/3)` views, zero-padding the last
/// view when F is not a multiple of 3.
pub fn group_views(tensor: &Tensor) -> Result<ViewSet, ReprError> {
    let dims = tensor.dims();
    if dims.len() != 3 || dims[2] == 0 {
        return Err(ReprError::InvalidConfig(format!(
            "group_views needs an [H, W, F] tensor with F >= 1, got {dims:?}"
        )));
    }
    let (h, w, f) = (dims[0], dims[1], dims[2]);
    let v = f.div_ceil(3);
    let pad = 3 * v - f;
    let mut out = Tensor::zeros(&[v, h, w, 3]);
    for vi in 0..v {
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let src = 3 * vi + c;
                    if src < f {
                        out.set(&[vi, y, x, c], tensor.at(&[y, x, src]));
                    }
                }
            }
        }
    }
    Ok(ViewSet { views: out, pad_channels: pad })
}

/// Inverse of [`group_views`]: drop pad channels and restore `[H, W, F]`.
pub fn ungroup_views(set: &ViewSet) -> Tensor {
    let dims = set.views.dims();
    let (v, h, w) = (dims[0], dims[1], dims[2]);
    let f = 3 * v - set.pad_channels;
    let mut out = Tensor::zeros(&[h, w, f]);
    for vi in 0..v {
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let dst = 3 * vi + c;
                    if dst < f {
                        out.set(&[y, x, dst], set.views.at(&[vi, y, x, c]));
                    }
                }
            }
        }
    }
    out
}

/// Right-angle counterclockwise rotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rotation {
    Deg0,
    Deg90,
    Deg180,
    Deg270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::Deg0, Rotation::Deg90, Rotation::Deg180, Rotation::Deg270];

    pub fn from_degrees(deg: u32) -> Result<Self, ReprError> {
        match deg {
            0 => Ok(Rotation::Deg0),
            90 => Ok(Rotation::Deg90),
            180 => Ok(Rotation::Deg180),
            270 => Ok(Rotation::Deg270),
            other => Err(ReprError::InvalidAngle(other)),
        }
    }

    pub fn degrees(self) -> u32 {
        match self {
            Rotation::Deg0 => 0,
            Rotation::Deg90 => 90,
            Rotation::Deg180 => 180,
            Rotation::Deg270 => 270,
        }
    }
}

/// Rotate the spatial grid of an `[H, W, F]` tensor counterclockwise, all
/// channels alike. 90 and 270 degrees swap H and W.
pub fn rotate(tensor: &Tensor, rotation: Rotation) -> Tensor {
    let dims = tensor.dims();
    assert_eq!(dims.len(), 3, "rotate needs an [H, W, F] tensor");
    let (h, w, f) = (dims[0], dims[1], dims[2]);
    match rotation {
        Rotation::Deg0 => tensor.clone(),
        Rotation::Deg90 => {
            let mut out = Tensor::zeros(&[w, h, f]);
            for r in 0..h {
                for c in 0..w {
                    for ch in 0..f {
                        out.set(&[w - 1 - c, r, ch], tensor.at(&[r, c, ch]));
                    }
                }
            }
            out
        }
        Rotation::Deg180 => {
            let mut out = Tensor::zeros(&[h, w, f]);
            for r in 0..h {
                for c in 0..w {
                    for ch in 0..f {
                        out.set(&[h - 1 - r, w - 1 - c, ch], tensor.at(&[r, c, ch]));
                    }
                }
            }
            out
        }
        Rotation::Deg270 => {
            let mut out = Tensor::zeros(&[w, h, f]);
            for r in 0..h {
                for c in 0..w {
                    for ch in 0..f {
                        out.set(&[c, h - 1 - r, ch], tensor.at(&[r, c, ch]));
                    }
                }
            }
            out
        }
    }
}
