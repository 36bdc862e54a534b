use super::grid::GridSpec;
use crate::error::{Error, Result};
use crate::types::Histogram;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PgmOptions {
    /// Density is `maxval − value`, so white pixels carry no mass.
    pub invert: bool,
    /// Gray levels used when writing.
    pub maxval: u16,
}

impl Default for PgmOptions {
    fn default() -> Self {
        Self { invert: false, maxval: 255 }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self, what: &str) -> Result<&str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Image(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::Image(format!("{what} is not ASCII")))
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token(what)?;
        tok.parse().map_err(|_| Error::Image(format!("bad {what}: {tok:?}")))
    }
}

/// Parses a P2 or P5 graymap into a row-major histogram.
pub fn read_pgm(bytes: &[u8], opts: PgmOptions) -> Result<(Histogram, GridSpec)> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.token("magic number")?.to_owned();
    if magic != "P2" && magic != "P5" {
        return Err(Error::Image(format!("unsupported magic number {magic:?}")));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if !(1..=65535).contains(&maxval) {
        return Err(Error::Image(format!("maxval {maxval} outside 1..=65535")));
    }
    let spec = GridSpec::new(height, width).map_err(|e| Error::Image(e.to_string()))?;
    let n = spec.len();
    let mut raw = Vec::with_capacity(n);
    if magic == "P2" {
        for _ in 0..n {
            raw.push(cur.number("pixel")?);
        }
    } else {
        // Exactly one whitespace byte separates the header from the raster.
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(Error::Image("missing raster separator".into()));
        }
        let data = &bytes[cur.pos + 1..];
        let wide = maxval > 255;
        let need = if wide { 2 * n } else { n };
        if data.len() < need {
            return Err(Error::Image(format!("raster has {} bytes, expected {need}", data.len())));
        }
        for i in 0..n {
            raw.push(if wide {
                u16::from_be_bytes([data[2 * i], data[2 * i + 1]]) as usize
            } else {
                data[i] as usize
            });
        }
    }
    let mut weights = Vec::with_capacity(n);
    for (i, &v) in raw.iter().enumerate() {
        if v > maxval {
            return Err(Error::Image(format!("pixel {i} = {v} exceeds maxval {maxval}")));
        }
        let d = if opts.invert { maxval - v } else { v };
        weights.push(d as f64);
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::Image("zero total intensity".into()));
    }
    let hist = Histogram::from_weights(weights)?;
    Ok((hist, spec))
}

/// Writes an ASCII graymap, mapping the heaviest pixel to `opts.maxval`
/// and rounding half to even.
pub fn write_pgm(h: &Histogram, spec: &GridSpec, opts: PgmOptions) -> Result<Vec<u8>> {
    if h.len() != spec.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} pixels", spec.len()),
            got: format!("{}", h.len()),
        });
    }
    if opts.maxval == 0 {
        return Err(Error::InvalidParameter("maxval must be positive".into()));
    }
    let top = h.values().iter().copied().fold(0.0, f64::max);
    let maxval = f64::from(opts.maxval);
    let mut out = format!("P2\n{} {}\n{}\n", spec.width, spec.height, opts.maxval);
    for row in h.values().chunks(spec.width) {
        let levels: Vec<String> = row
            .iter()
            .map(|&v| {
                let g = (v / top * maxval).round_ties_even() as u32;
                let g = if opts.invert { u32::from(opts.maxval) - g } else { g };
                g.to_string()
            })
            .collect();
        out.push_str(&levels.join(" "));
        out.push('\n');
    }
    Ok(out.into_bytes())
}
