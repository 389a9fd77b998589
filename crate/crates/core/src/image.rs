//! Interleaved 8-bit image buffers and the float grayscale planes used by stereo.

/// Row-major, channel-interleaved 8-bit image with 1 or 3 channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl Image {
    /// Returns `None` when the buffer length does not match the dimensions
    /// or the channel count is not 1 or 3.
    pub fn from_raw(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Option<Self> {
        if !(channels == 1 || channels == 3) {
            return None;
        }
        let expected = (width as usize).checked_mul(height as usize)?.checked_mul(channels as usize)?;
        (data.len() == expected).then_some(Self { width, height, channels, data })
    }

    pub fn new(width: u32, height: u32, channels: u8) -> Self {
        let len = width as usize * height as usize * channels as usize;
        Self::from_raw(width, height, channels, vec![0; len]).expect("channels must be 1 or 3")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    pub fn byte_len(&self) -> usize {
        self.data.len()
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels as usize;
        let i = (y as usize * self.width as usize + x as usize) * c;
        &self.data[i..i + c]
    }

    /// RGB triple of a pixel; grayscale images replicate the single channel.
    pub fn rgb(&self, x: u32, y: u32) -> [u8; 3] {
        let p = self.pixel(x, y);
        if self.channels == 1 {
            [p[0]; 3]
        } else {
            [p[0], p[1], p[2]]
        }
    }

    /// Copies the rectangle `[x, x + w) x [y, y + h)`. The caller guarantees it is in bounds.
    pub fn crop(&self, x: u32, y: u32, w: u32, h: u32) -> Image {
        assert!(x + w <= self.width && y + h <= self.height, "crop outside image");
        let c = self.channels as usize;
        let row_len = w as usize * c;
        let mut data = Vec::with_capacity(row_len * h as usize);
        for row in y..y + h {
            let start = (row as usize * self.width as usize + x as usize) * c;
            data.extend_from_slice(&self.data[start..start + row_len]);
        }
        Image { width: w, height: h, channels: self.channels, data }
    }

    /// Writes `tile` into this image with its top-left corner at `(x, y)`.
    pub fn blit(&mut self, tile: &Image, x: u32, y: u32) {
        assert_eq!(tile.channels, self.channels, "channel mismatch");
        assert!(x + tile.width <= self.width && y + tile.height <= self.height, "blit outside image");
        let c = self.channels as usize;
        let row_len = tile.width as usize * c;
        for row in 0..tile.height {
            let dst = ((y + row) as usize * self.width as usize + x as usize) * c;
            let src = row as usize * row_len;
            self.data[dst..dst + row_len].copy_from_slice(&tile.data[src..src + row_len]);
        }
    }

    /// Luma plane scaled to `[0, 1]`.
    pub fn to_gray(&self) -> GrayImage {
        let data = match self.channels {
            1 => self.data.iter().map(|&v| v as f32 / 255.0).collect(),
            _ => self
                .data
                .chunks_exact(3)
                .map(|p| (0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32) / 255.0)
                .collect(),
        };
        GrayImage { width: self.width, height: self.height, data }
    }
}

/// Single-channel float plane.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width as usize * height as usize, "gray buffer size mismatch");
        Self { width, height, data }
    }

    pub fn filled(width: u32, height: u32, value: f32) -> Self {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn byte_len(&self) -> usize {
        self.data.len() * std::mem::size_of::<f32>()
    }
}
