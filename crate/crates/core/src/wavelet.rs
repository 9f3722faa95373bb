//! Orthonormal single- and multi-level 2-D Haar analysis/synthesis.
//!
//! Sub-band `X_pq = F_pᵀ · X · F_q` with `F_L = [1, 1]/√2` and
//! `F_H = [1, −1]/√2` placed block-diagonally. `p` filters rows and `q`
//! filters columns, so for the 2×2 block `[[a, b], [c, d]]`:
//!
//! ```text
//! LL = (a + b + c + d) / 2
//! LH = (a − b + c − d) / 2   // low-pass over rows, high-pass across columns
//! HL = (a + b − c − d) / 2   // high-pass over rows, low-pass across columns
//! HH = (a − b − c + d) / 2
//! ```
//!
//! The matrix definition fixes the naming; `LH` therefore responds to
//! changes *along* a row (vertical edges) and `HL` to changes down a column.

use crate::error::{Axis, Error, Result};
use crate::image::ImageBuffer;

/// The four half-resolution Haar planes of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct SubBands {
    pub ll: ImageBuffer,
    pub lh: ImageBuffer,
    pub hl: ImageBuffer,
    pub hh: ImageBuffer,
}

/// Names one Haar plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    LL,
    LH,
    HL,
    HH,
}

impl Band {
    pub const ALL: [Band; 4] = [Band::LL, Band::LH, Band::HL, Band::HH];
    pub const DETAIL: [Band; 3] = [Band::LH, Band::HL, Band::HH];

    pub fn name(self) -> &'static str {
        match self {
            Band::LL => "ll",
            Band::LH => "lh",
            Band::HL => "hl",
            Band::HH => "hh",
        }
    }
}

impl SubBands {
    pub fn new(ll: ImageBuffer, lh: ImageBuffer, hl: ImageBuffer, hh: ImageBuffer) -> Result<Self> {
        let bands = Self { ll, lh, hl, hh };
        bands.check_shapes()?;
        Ok(bands)
    }

    pub fn check_shapes(&self) -> Result<()> {
        let s = self.ll.shape();
        for band in Band::DETAIL {
            if self.get(band).shape() != s {
                return Err(Error::shape(format!(
                    "sub-band {} has shape {:?}, ll has {:?}",
                    band.name(),
                    self.get(band).shape(),
                    s
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, band: Band) -> &ImageBuffer {
        match band {
            Band::LL => &self.ll,
            Band::LH => &self.lh,
            Band::HL => &self.hl,
            Band::HH => &self.hh,
        }
    }

    pub fn get_mut(&mut self, band: Band) -> &mut ImageBuffer {
        match band {
            Band::LL => &mut self.ll,
            Band::LH => &mut self.lh,
            Band::HL => &mut self.hl,
            Band::HH => &mut self.hh,
        }
    }

    /// `(height, width, channels)` of each plane.
    pub fn plane_shape(&self) -> (usize, usize, usize) {
        self.ll.shape()
    }

    pub fn energy(&self) -> f64 {
        Band::ALL
            .iter()
            .map(|&b| self.get(b).sum_of_squares())
            .sum()
    }

    pub fn into_array(self) -> [ImageBuffer; 4] {
        [self.ll, self.lh, self.hl, self.hh]
    }
}

fn check_divisible(img: &ImageBuffer, divisor: usize) -> Result<()> {
    if !img.height().is_multiple_of(divisor) {
        return Err(Error::Dimension {
            axis: Axis::Height,
            size: img.height(),
            divisor,
        });
    }
    if !img.width().is_multiple_of(divisor) {
        return Err(Error::Dimension {
            axis: Axis::Width,
            size: img.width(),
            divisor,
        });
    }
    Ok(())
}

/// Single-level forward transform; channels are transformed independently.
pub fn dwt_haar(img: &ImageBuffer) -> Result<SubBands> {
    check_divisible(img, 2)?;
    let (h, w, ch) = img.shape();
    let (h2, w2) = (h / 2, w / 2);
    let n = h2 * w2 * ch;
    let (mut ll, mut lh, mut hl, mut hh) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    let src = img.data();
    let row = w * ch;
    for i in 0..h2 {
        let top = &src[2 * i * row..(2 * i + 1) * row];
        let bot = &src[(2 * i + 1) * row..(2 * i + 2) * row];
        for j in 0..w2 {
            for k in 0..ch {
                let a = top[2 * j * ch + k];
                let b = top[(2 * j + 1) * ch + k];
                let c = bot[2 * j * ch + k];
                let d = bot[(2 * j + 1) * ch + k];
                ll.push(0.5 * ((a + b) + (c + d)));
                lh.push(0.5 * ((a - b) + (c - d)));
                hl.push(0.5 * ((a + b) - (c + d)));
                hh.push(0.5 * ((a - b) - (c - d)));
            }
        }
    }
    Ok(SubBands {
        ll: ImageBuffer::new(h2, w2, ch, ll)?,
        lh: ImageBuffer::new(h2, w2, ch, lh)?,
        hl: ImageBuffer::new(h2, w2, ch, hl)?,
        hh: ImageBuffer::new(h2, w2, ch, hh)?,
    })
}

/// Single-level inverse transform (the transpose of [`dwt_haar`]).
pub fn iwt_haar(bands: &SubBands) -> Result<ImageBuffer> {
    bands.check_shapes()?;
    let (h2, w2, ch) = bands.plane_shape();
    let (h, w) = (2 * h2, 2 * w2);
    let mut out = vec![0.0; h * w * ch];
    let row = w * ch;
    let (ll, lh, hl, hh) = (
        bands.ll.data(),
        bands.lh.data(),
        bands.hl.data(),
        bands.hh.data(),
    );
    for i in 0..h2 {
        for j in 0..w2 {
            for k in 0..ch {
                let s = (i * w2 + j) * ch + k;
                let (p, q, r, t) = (ll[s], lh[s], hl[s], hh[s]);
                out[2 * i * row + 2 * j * ch + k] = 0.5 * ((p + q) + (r + t));
                out[2 * i * row + (2 * j + 1) * ch + k] = 0.5 * ((p - q) + (r - t));
                out[(2 * i + 1) * row + 2 * j * ch + k] = 0.5 * ((p + q) - (r + t));
                out[(2 * i + 1) * row + (2 * j + 1) * ch + k] = 0.5 * ((p - q) - (r - t));
            }
        }
    }
    ImageBuffer::new(h, w, ch, out)
}

/// Which planes [`average_subbands`] blends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BandSelection {
    /// LH, HL and HH; LL is left to the diffusion path.
    #[default]
    Detail,
    All,
    Only(Band),
}

impl BandSelection {
    pub fn contains(self, band: Band) -> bool {
        match self {
            BandSelection::Detail => band != Band::LL,
            BandSelection::All => true,
            BandSelection::Only(b) => b == band,
        }
    }
}

/// Result of [`average_subbands`]: only the selected planes are present.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PartialSubBands {
    pub ll: Option<ImageBuffer>,
    pub lh: Option<ImageBuffer>,
    pub hl: Option<ImageBuffer>,
    pub hh: Option<ImageBuffer>,
}

impl PartialSubBands {
    pub fn get(&self, band: Band) -> Option<&ImageBuffer> {
        match band {
            Band::LL => self.ll.as_ref(),
            Band::LH => self.lh.as_ref(),
            Band::HL => self.hl.as_ref(),
            Band::HH => self.hh.as_ref(),
        }
    }

    fn slot(&mut self, band: Band) -> &mut Option<ImageBuffer> {
        match band {
            Band::LL => &mut self.ll,
            Band::LH => &mut self.lh,
            Band::HL => &mut self.hl,
            Band::HH => &mut self.hh,
        }
    }

    /// Fills any missing planes from `fill`, in band order.
    pub fn complete_with(
        mut self,
        fill: impl IntoIterator<Item = (Band, ImageBuffer)>,
    ) -> Result<SubBands> {
        for (band, plane) in fill {
            let slot = self.slot(band);
            if slot.is_none() {
                *slot = Some(plane);
            }
        }
        let take = |p: Option<ImageBuffer>, band: Band| {
            p.ok_or_else(|| Error::shape(format!("sub-band {} missing", band.name())))
        };
        SubBands::new(
            take(self.ll, Band::LL)?,
            take(self.lh, Band::LH)?,
            take(self.hl, Band::HL)?,
            take(self.hh, Band::HH)?,
        )
    }
}

/// Element-wise arithmetic mean of the selected planes of `a` and `b`.
pub fn average_subbands(
    a: &SubBands,
    b: &SubBands,
    which: BandSelection,
) -> Result<PartialSubBands> {
    a.check_shapes()?;
    b.check_shapes()?;
    if a.plane_shape() != b.plane_shape() {
        return Err(Error::shape(format!(
            "cannot average sub-bands of shape {:?} and {:?}",
            a.plane_shape(),
            b.plane_shape()
        )));
    }
    let mut out = PartialSubBands::default();
    for band in Band::ALL.into_iter().filter(|&b| which.contains(b)) {
        let (pa, pb) = (a.get(band), b.get(band));
        let data = pa
            .data()
            .iter()
            .zip(pb.data())
            .map(|(x, y)| 0.5 * (x + y))
            .collect();
        *out.slot(band) = Some(pa.with_data(data)?);
    }
    Ok(out)
}

/// Multi-level decomposition; `levels[0]` is the finest level and each
/// subsequent level decomposes the previous level's LL plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    pub levels: Vec<SubBands>,
}

impl Pyramid {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// The coarsest approximation plane.
    pub fn deepest_ll(&self) -> &ImageBuffer {
        &self
            .levels
            .last()
            .expect("pyramid has at least one level")
            .ll
    }
}

pub fn dwt_multilevel(img: &ImageBuffer, levels: usize) -> Result<Pyramid> {
    if levels == 0 {
        return Err(Error::invalid("levels", "must be at least 1"));
    }
    let divisor = 1usize
        .checked_shl(levels as u32)
        .filter(|&d| d <= img.height().max(img.width()))
        .ok_or_else(|| Error::invalid("levels", format!("{levels} levels exceed image size")))?;
    check_divisible(img, divisor)?;
    let mut out = Vec::with_capacity(levels);
    let mut current = dwt_haar(img)?;
    for _ in 1..levels {
        let next = dwt_haar(&current.ll)?;
        out.push(current);
        current = next;
    }
    out.push(current);
    Ok(Pyramid { levels: out })
}

/// Inverse of [`dwt_multilevel`], using each level's LL only at the coarsest
/// level (finer LL planes are rebuilt from below).
pub fn iwt_multilevel(pyramid: &Pyramid) -> Result<ImageBuffer> {
    let mut iter = pyramid.levels.iter().rev();
    let coarsest = iter.next().ok_or_else(|| Error::shape("empty pyramid"))?;
    let mut img = iwt_haar(coarsest)?;
    for level in iter {
        let bands = SubBands::new(img, level.lh.clone(), level.hl.clone(), level.hh.clone())?;
        img = iwt_haar(&bands)?;
    }
    Ok(img)
}
