//! Dense row-major containers shared by every stage of the pipeline.

/// An `H x W` row-major grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }
}

impl<T> Grid<T> {
    /// Panics if `data.len() != width * height`.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "grid data length mismatch");
        Self { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, u: usize, v: usize) -> usize {
        v * self.width + u
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> &T {
        &self.data[v * self.width + u]
    }

    #[inline]
    pub fn get_mut(&mut self, u: usize, v: usize) -> &mut T {
        &mut self.data[v * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: T) {
        self.data[v * self.width + u] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid { width: self.width, height: self.height, data: self.data.iter().map(f).collect() }
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// A `D x H x W` volume stored slice-major (depth outermost).
#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    depth: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Clone> Volume<T> {
    pub fn filled(depth: usize, height: usize, width: usize, value: T) -> Self {
        Self { depth, height, width, data: vec![value; depth * height * width] }
    }
}

impl<T> Volume<T> {
    pub fn from_vec(depth: usize, height: usize, width: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), depth * height * width, "volume data length mismatch");
        Self { depth, height, width, data }
    }

    #[inline]
    pub fn depth(&self) -> usize {
        self.depth
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn index(&self, d: usize, v: usize, u: usize) -> usize {
        (d * self.height + v) * self.width + u
    }

    #[inline]
    pub fn get(&self, d: usize, v: usize, u: usize) -> &T {
        &self.data[(d * self.height + v) * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, d: usize, v: usize, u: usize, value: T) {
        let i = self.index(d, v, u);
        self.data[i] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.depth, self.height, self.width)
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Volume<U> {
        Volume { depth: self.depth, height: self.height, width: self.width, data: self.data.iter().map(f).collect() }
    }
}

/// Grayscale or RGB image with channel-interleaved samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn gray(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height);
        Self { width, height, channels: 1, data }
    }

    pub fn rgb(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height * 3);
        Self { width, height, channels: 3, data }
    }

    /// Rec. 601 luma for RGB, identity for grayscale.
    pub fn luma(&self) -> Grid<f64> {
        match self.channels {
            1 => Grid::from_vec(self.width, self.height, self.data.clone()),
            _ => Grid::from_vec(
                self.width,
                self.height,
                self.data.chunks_exact(self.channels).map(|px| 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]).collect(),
            ),
        }
    }

    /// 8-bit RGB color at a pixel.
    pub fn color_u8(&self, u: usize, v: usize) -> [u8; 3] {
        let i = (v * self.width + u) * self.channels;
        let q = |x: f64| (x.clamp(0.0, 1.0) * 255.0).round() as u8;
        if self.channels == 1 {
            let g = q(self.data[i]);
            [g, g, g]
        } else {
            [q(self.data[i]), q(self.data[i + 1]), q(self.data[i + 2])]
        }
    }
}

/// Bilinear sample with all four taps required in bounds; `None` otherwise.
#[inline]
pub fn bilinear(grid: &Grid<f64>, x: f64, y: f64) -> Option<f64> {
    let w = grid.width();
    let h = grid.height();
    if !(x >= 0.0 && y >= 0.0) || x > (w - 1) as f64 || y > (h - 1) as f64 {
        return None;
    }
    let x0 = (x.floor() as usize).min(w.saturating_sub(2));
    let y0 = (y.floor() as usize).min(h.saturating_sub(2));
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = grid.get(x0, y0) * (1.0 - fx) + grid.get(x1, y0) * fx;
    let bottom = grid.get(x0, y1) * (1.0 - fx) + grid.get(x1, y1) * fx;
    Some(top * (1.0 - fy) + bottom * fy)
}

/// Average-pool by an integer factor. Dimensions must be divisible by `factor`.
pub fn area_downsample(grid: &Grid<f64>, factor: usize) -> Grid<f64> {
    if factor == 1 {
        return grid.clone();
    }
    let w = grid.width() / factor;
    let h = grid.height() / factor;
    let norm = 1.0 / (factor * factor) as f64;
    Grid::from_fn(w, h, |u, v| {
        let mut acc = 0.0;
        for dy in 0..factor {
            for dx in 0..factor {
                acc += grid.get(u * factor + dx, v * factor + dy);
            }
        }
        acc * norm
    })
}
