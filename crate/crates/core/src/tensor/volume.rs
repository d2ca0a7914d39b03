use crate::error::{Error, Result};

use super::Real;

/// Dense `(channel, time, height, width)` volume, row-major with width fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    shape: [usize; 4],
    data: Vec<T>,
}

impl<T: Real> Volume<T> {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            shape,
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn filled(shape: [usize; 4], value: T) -> Self {
        Self {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<T>) -> Result<Self> {
        let want: usize = shape.iter().product();
        if data.len() != want {
            return Err(Error::dim("elements", want, data.len()));
        }
        Ok(Self { shape, data })
    }

    pub fn from_fn(shape: [usize; 4], mut f: impl FnMut([usize; 4]) -> T) -> Self {
        let mut data = Vec::with_capacity(shape.iter().product());
        for c in 0..shape[0] {
            for t in 0..shape[1] {
                for h in 0..shape[2] {
                    for w in 0..shape[3] {
                        data.push(f([c, t, h, w]));
                    }
                }
            }
        }
        Self { shape, data }
    }

    /// Converts every element to another precision.
    pub fn cast<U: Real>(&self) -> Volume<U> {
        Volume {
            shape: self.shape,
            data: self
                .data
                .iter()
                .map(|&x| U::from_f64(x.as_f64()).expect("float cast"))
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }
}

impl<T> Volume<T> {
    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.shape[0]
    }

    /// `(t, h, w)`.
    pub fn dims(&self) -> [usize; 3] {
        [self.shape[1], self.shape[2], self.shape[3]]
    }

    /// Elements in one channel.
    pub fn plane_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn index(&self, [c, t, h, w]: [usize; 4]) -> usize {
        ((c * self.shape[1] + t) * self.shape[2] + h) * self.shape[3] + w
    }
}

impl<T: Copy> Volume<T> {
    #[inline]
    pub fn get(&self, at: [usize; 4]) -> T {
        self.data[self.index(at)]
    }

    #[inline]
    pub fn set(&mut self, at: [usize; 4], v: T) {
        let i = self.index(at);
        self.data[i] = v;
    }
}

/// Single-channel video with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip(Volume<f32>);

impl VideoClip {
    pub fn new(volume: Volume<f32>) -> Result<Self> {
        if volume.channels() != 1 {
            return Err(Error::dim("channel", 1, volume.channels()));
        }
        for (axis, &n) in ["t", "h", "w"].iter().zip(volume.dims().iter()) {
            if n == 0 {
                return Err(Error::Validation(format!("clip axis {axis} is empty")));
            }
        }
        if let Some(bad) = volume
            .data()
            .iter()
            .find(|x| !(x.is_finite() && (0.0..=1.0).contains(*x)))
        {
            return Err(Error::Validation(format!(
                "clip intensity {bad} outside [0, 1]"
            )));
        }
        Ok(Self(volume))
    }

    pub fn from_frames(dims: [usize; 3], data: Vec<f32>) -> Result<Self> {
        Self::new(Volume::from_vec([1, dims[0], dims[1], dims[2]], data)?)
    }

    pub fn zeros(dims: [usize; 3]) -> Self {
        Self(Volume::zeros([1, dims[0], dims[1], dims[2]]))
    }

    /// `(t, h, w)`.
    pub fn dims(&self) -> [usize; 3] {
        self.0.dims()
    }

    pub fn frames(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn height(&self) -> usize {
        self.0.shape()[2]
    }

    pub fn width(&self) -> usize {
        self.0.shape()[3]
    }

    #[inline]
    pub fn at(&self, t: usize, h: usize, w: usize) -> f32 {
        self.0.get([0, t, h, w])
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        let n = self.height() * self.width();
        &self.0.data()[t * n..(t + 1) * n]
    }

    pub fn volume(&self) -> &Volume<f32> {
        &self.0
    }

    pub fn data(&self) -> &[f32] {
        self.0.data()
    }
}

/// Multi-channel activation volume captured at a tap point.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T>(Volume<T>);

impl<T: Real> FeatureMap<T> {
    pub fn new(volume: Volume<T>) -> Result<Self> {
        if volume.shape().contains(&0) {
            return Err(Error::Validation("feature map has an empty axis".into()));
        }
        if !volume.all_finite() {
            return Err(Error::Validation("feature map holds non-finite values".into()));
        }
        Ok(Self(volume))
    }

    pub fn volume(&self) -> &Volume<T> {
        &self.0
    }

    pub fn into_volume(self) -> Volume<T> {
        self.0
    }

    pub fn shape(&self) -> [usize; 4] {
        self.0.shape()
    }
}

/// Nonnegative single-channel volume; feature-map grid or clip grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyVolume<T>(Volume<T>);

impl<T: Real> SaliencyVolume<T> {
    pub fn new(volume: Volume<T>) -> Result<Self> {
        if volume.channels() != 1 {
            return Err(Error::dim("channel", 1, volume.channels()));
        }
        if volume
            .data()
            .iter()
            .any(|x| !x.is_finite() || *x < T::zero())
        {
            return Err(Error::Validation(
                "saliency must be finite and nonnegative".into(),
            ));
        }
        Ok(Self(volume))
    }

    pub(crate) fn new_unchecked(volume: Volume<T>) -> Self {
        debug_assert_eq!(volume.channels(), 1);
        Self(volume)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.0.dims()
    }

    pub fn volume(&self) -> &Volume<T> {
        &self.0
    }

    pub fn data(&self) -> &[T] {
        self.0.data()
    }

    #[inline]
    pub fn at(&self, t: usize, h: usize, w: usize) -> T {
        self.0.get([0, t, h, w])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_rejects_out_of_range() {
        let v = Volume::from_vec([1, 1, 1, 2], vec![0.5f32, 1.5]).unwrap();
        assert!(matches!(VideoClip::new(v), Err(Error::Validation(_))));
        let v = Volume::from_vec([1, 1, 1, 1], vec![f32::NAN]).unwrap();
        assert!(VideoClip::new(v).is_err());
    }

    #[test]
    fn clip_rejects_multichannel() {
        let v = Volume::<f32>::zeros([2, 1, 1, 1]);
        assert!(matches!(
            VideoClip::new(v),
            Err(Error::Dimension { expected: 1, actual: 2, .. })
        ));
    }

    #[test]
    fn indexing_is_width_fastest() {
        let v = Volume::from_fn([2, 2, 3, 4], |[c, t, h, w]| (c * 1000 + t * 100 + h * 10 + w) as f64);
        assert_eq!(v.get([1, 0, 2, 3]), 1023.0);
        assert_eq!(v.data()[1], 1.0);
        assert_eq!(v.channel(1)[0], 1000.0);
    }

    #[test]
    fn saliency_rejects_negative() {
        let v = Volume::from_vec([1, 1, 1, 2], vec![0.0f64, -1e-9]).unwrap();
        assert!(SaliencyVolume::new(v).is_err());
    }
}
