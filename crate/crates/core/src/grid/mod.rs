//! Gridded multichannel hazard fields and datasets.

mod io;
mod ops;
mod synth;

pub use io::{load_dataset, save_dataset};
pub use ops::{crop, daily_maxima, resize_bilinear, resize_dataset, zero_pad, zero_pad_dataset};
pub use synth::{stratified_gev_dataset, synth_dataset, SynthSpec};

use ndarray::{Array2, Array3, Array4, Axis};

use crate::error::{Error, Result};

/// Temporal cadence of a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cadence {
    Hourly,
    DailyMax,
}

impl Cadence {
    pub fn code(self) -> u8 {
        match self {
            Cadence::Hourly => 0,
            Cadence::DailyMax => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Cadence::Hourly),
            1 => Some(Cadence::DailyMax),
            _ => None,
        }
    }
}

/// Which role a dataset plays in an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Test,
    Generated,
}

impl SplitTag {
    pub fn label(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Test => "test",
            SplitTag::Generated => "generated",
        }
    }
}

/// One day's multichannel image on a lat/lon grid.
///
/// `valid_mask` is false where the variable is undefined (for example
/// wave height on land); values there carry no information and are
/// conventionally zero. Values on valid pixels are always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    values: Array3<f64>,
    channel_names: Vec<String>,
    valid_mask: Array2<bool>,
}

impl GridField {
    pub fn new(
        values: Array3<f64>,
        channel_names: Vec<String>,
        valid_mask: Array2<bool>,
    ) -> Result<Self> {
        let (c, h, w) = values.dim();
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::Shape(format!(
                "field dimensions must be positive, got {}x{}x{}",
                c, h, w
            )));
        }
        if channel_names.len() != c {
            return Err(Error::Shape(format!(
                "{} channel names for {} channels",
                channel_names.len(),
                c
            )));
        }
        if valid_mask.dim() != (h, w) {
            return Err(Error::Shape(format!(
                "mask {}x{} does not match field {}x{}",
                valid_mask.dim().0,
                valid_mask.dim().1,
                h,
                w
            )));
        }
        for ci in 0..c {
            for y in 0..h {
                for x in 0..w {
                    if valid_mask[[y, x]] && !values[[ci, y, x]].is_finite() {
                        return Err(Error::NonFinite(format!(
                            "value at channel {} pixel ({}, {})",
                            ci, y, x
                        )));
                    }
                }
            }
        }
        Ok(Self {
            values,
            channel_names,
            valid_mask,
        })
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn valid_mask(&self) -> &Array2<bool> {
        &self.valid_mask
    }

    pub fn channels(&self) -> usize {
        self.values.dim().0
    }

    pub fn height(&self) -> usize {
        self.values.dim().1
    }

    pub fn width(&self) -> usize {
        self.values.dim().2
    }
}

/// An ordered sequence of fields sharing shape and mask.
///
/// Values are stored packed as `[N, C, H, W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    values: Array4<f64>,
    channel_names: Vec<String>,
    valid_mask: Array2<bool>,
    cadence: Cadence,
    split_tag: SplitTag,
}

impl Dataset {
    pub fn from_values(
        values: Array4<f64>,
        channel_names: Vec<String>,
        valid_mask: Array2<bool>,
        cadence: Cadence,
        split_tag: SplitTag,
    ) -> Result<Self> {
        let (n, c, h, w) = values.dim();
        if n == 0 {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::Shape(format!(
                "dataset dimensions must be positive, got {}x{}x{}x{}",
                n, c, h, w
            )));
        }
        if channel_names.len() != c {
            return Err(Error::Shape(format!(
                "{} channel names for {} channels",
                channel_names.len(),
                c
            )));
        }
        if valid_mask.dim() != (h, w) {
            return Err(Error::Shape(format!(
                "mask {}x{} does not match fields {}x{}",
                valid_mask.dim().0,
                valid_mask.dim().1,
                h,
                w
            )));
        }
        for y in 0..h {
            for x in 0..w {
                if !valid_mask[[y, x]] {
                    continue;
                }
                for i in 0..n {
                    for ci in 0..c {
                        if !values[[i, ci, y, x]].is_finite() {
                            return Err(Error::NonFinite(format!(
                                "value at field {} channel {} pixel ({}, {})",
                                i, ci, y, x
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self {
            values,
            channel_names,
            valid_mask,
            cadence,
            split_tag,
        })
    }

    pub fn from_fields(fields: Vec<GridField>, cadence: Cadence, split_tag: SplitTag) -> Result<Self> {
        let first = fields
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty dataset".into()))?;
        let (c, h, w) = first.values.dim();
        let names = first.channel_names.clone();
        let mask = first.valid_mask.clone();
        let mut values = Array4::zeros((fields.len(), c, h, w));
        for (i, f) in fields.iter().enumerate() {
            if f.values.dim() != (c, h, w) {
                return Err(Error::Shape(format!(
                    "field {} has shape {:?}, expected {:?}",
                    i,
                    f.values.dim(),
                    (c, h, w)
                )));
            }
            if f.valid_mask != mask {
                return Err(Error::Shape(format!("field {} mask differs from field 0", i)));
            }
            values.index_axis_mut(Axis(0), i).assign(&f.values);
        }
        Self::from_values(values, names, mask, cadence, split_tag)
    }

    pub fn len(&self) -> usize {
        self.values.dim().0
    }

    pub fn is_empty(&self) -> bool {
        false // N >= 1 by construction
    }

    pub fn channels(&self) -> usize {
        self.values.dim().1
    }

    pub fn height(&self) -> usize {
        self.values.dim().2
    }

    pub fn width(&self) -> usize {
        self.values.dim().3
    }

    /// `(C, H, W)` of every member field.
    pub fn field_shape(&self) -> (usize, usize, usize) {
        let (_, c, h, w) = self.values.dim();
        (c, h, w)
    }

    pub fn values(&self) -> &Array4<f64> {
        &self.values
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn valid_mask(&self) -> &Array2<bool> {
        &self.valid_mask
    }

    pub fn cadence(&self) -> Cadence {
        self.cadence
    }

    pub fn split_tag(&self) -> SplitTag {
        self.split_tag
    }

    pub fn with_split_tag(mut self, tag: SplitTag) -> Self {
        self.split_tag = tag;
        self
    }

    pub fn with_channel_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.channels() {
            return Err(Error::Shape(format!(
                "{} channel names for {} channels",
                names.len(),
                self.channels()
            )));
        }
        self.channel_names = names;
        Ok(self)
    }

    /// Owned copy of field `i`.
    pub fn field(&self, i: usize) -> GridField {
        GridField {
            values: self.values.index_axis(Axis(0), i).to_owned(),
            channel_names: self.channel_names.clone(),
            valid_mask: self.valid_mask.clone(),
        }
    }

    /// Time series of one pixel-channel across all fields.
    pub fn pixel_series(&self, channel: usize, y: usize, x: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.values[[i, channel, y, x]]).collect()
    }

    /// Valid pixel coordinates in row-major order.
    pub fn valid_pixels(&self) -> Vec<(usize, usize)> {
        let (h, w) = self.valid_mask.dim();
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if self.valid_mask[[y, x]] {
                    out.push((y, x));
                }
            }
        }
        out
    }

    /// Subset of fields by index order given.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        let (_, c, h, w) = self.values.dim();
        let mut values = Array4::zeros((indices.len(), c, h, w));
        for (k, &i) in indices.iter().enumerate() {
            if i >= self.len() {
                return Err(Error::InvalidArgument(format!(
                    "field index {} out of range ({} fields)",
                    i,
                    self.len()
                )));
            }
            values
                .index_axis_mut(Axis(0), k)
                .assign(&self.values.index_axis(Axis(0), i));
        }
        Self::from_values(
            values,
            self.channel_names.clone(),
            self.valid_mask.clone(),
            self.cadence,
            self.split_tag,
        )
    }
}

pub(crate) fn default_channel_names(c: usize) -> Vec<String> {
    (0..c).map(|i| format!("ch{}", i)).collect()
}
