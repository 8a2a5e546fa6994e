// SPDX-License-Identifier: Apache-2.0

//! GDSII stream subset: HEADER, BGNLIB, LIBNAME, UNITS, BGNSTR, STRNAME,
//! BOUNDARY, SREF, LAYER, DATATYPE, SNAME, XY, ENDEL, ENDSTR, ENDLIB.
//!
//! Records are `u16 length | u8 type | u8 datatype | payload`, big-endian,
//! with ASCII payloads padded to even length by a NUL byte. Rectangles are
//! written as closed 5-point boundaries starting at the lower-left corner
//! and running counter-clockwise.

use std::time::{SystemTime, UNIX_EPOCH};

use super::{Element, LayerId, LayoutDb, LayoutError, Rect, Structure, DB_PER_USER, DB_UNIT_M};

const HEADER: u8 = 0x00;
const BGNLIB: u8 = 0x01;
const LIBNAME: u8 = 0x02;
const UNITS: u8 = 0x03;
const ENDLIB: u8 = 0x04;
const BGNSTR: u8 = 0x05;
const STRNAME: u8 = 0x06;
const ENDSTR: u8 = 0x07;
const BOUNDARY: u8 = 0x08;
const SREF: u8 = 0x0A;
const LAYER: u8 = 0x0D;
const DATATYPE: u8 = 0x0E;
const XY: u8 = 0x10;
const ENDEL: u8 = 0x11;
const SNAME: u8 = 0x12;

const NO_DATA: u8 = 0x00;
const INT2: u8 = 0x02;
const INT4: u8 = 0x03;
const REAL8: u8 = 0x05;
const ASCII: u8 = 0x06;

const STREAM_VERSION: i16 = 600;
/// 1970-01-01 00:00:00 as (year, month, day, hour, minute, second).
const EPOCH: [i16; 6] = [1970, 1, 1, 0, 0, 0];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GdsOptions {
    /// Stamp BGNLIB/BGNSTR with the current UTC time instead of the epoch.
    pub real_timestamps: bool,
}

/// Encodes a value as an excess-64 base-16 GDSII real.
pub(crate) fn encode_real8(v: f64) -> [u8; 8] {
    if v == 0.0 {
        return [0; 8];
    }
    let sign = if v < 0.0 { 0x80u8 } else { 0 };
    let mut m = v.abs();
    let mut exp: i32 = 64;
    while m >= 1.0 {
        m /= 16.0;
        exp += 1;
    }
    while m < 1.0 / 16.0 {
        m *= 16.0;
        exp -= 1;
    }
    let mut mantissa = (m * (1u64 << 56) as f64).round() as u64;
    if mantissa >= 1 << 56 {
        mantissa >>= 4;
        exp += 1;
    }
    let mut out = [0u8; 8];
    out[0] = sign | exp as u8;
    out[1..].copy_from_slice(&mantissa.to_be_bytes()[1..]);
    out
}

pub(crate) fn decode_real8(b: [u8; 8]) -> f64 {
    let sign = if b[0] & 0x80 != 0 { -1.0 } else { 1.0 };
    let exp = (b[0] & 0x7F) as i32 - 64;
    let mut m = [0u8; 8];
    m[1..].copy_from_slice(&b[1..]);
    let mantissa = u64::from_be_bytes(m) as f64 / (1u64 << 56) as f64;
    sign * mantissa * 16f64.powi(exp)
}

/// Civil UTC date from seconds since the Unix epoch.
fn civil_from_unix(secs: u64) -> [i16; 6] {
    let days = (secs / 86_400) as i64;
    let rem = secs % 86_400;
    // days-to-civil over 400-year eras
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = yoe + era * 400 + i64::from(month <= 2);
    [
        year as i16,
        month as i16,
        day as i16,
        (rem / 3600) as i16,
        (rem % 3600 / 60) as i16,
        (rem % 60) as i16,
    ]
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn record(&mut self, rtype: u8, dtype: u8, payload: &[u8]) {
        let len = (payload.len() + 4) as u16;
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.push(rtype);
        self.buf.push(dtype);
        self.buf.extend_from_slice(payload);
    }

    fn int2(&mut self, rtype: u8, values: &[i16]) {
        let p: Vec<u8> = values.iter().flat_map(|v| v.to_be_bytes()).collect();
        self.record(rtype, INT2, &p);
    }

    fn int4(&mut self, rtype: u8, values: &[i32]) {
        let p: Vec<u8> = values.iter().flat_map(|v| v.to_be_bytes()).collect();
        self.record(rtype, INT4, &p);
    }

    fn ascii(&mut self, rtype: u8, s: &str) {
        let mut p = s.as_bytes().to_vec();
        if p.len() % 2 == 1 {
            p.push(0);
        }
        self.record(rtype, ASCII, &p);
    }
}

fn coord(v: i64) -> Result<i32, LayoutError> {
    i32::try_from(v).map_err(|_| LayoutError::CoordinateOverflow(v))
}

pub fn emit_gdsii(db: &LayoutDb) -> Result<Vec<u8>, LayoutError> {
    emit_gdsii_with(db, GdsOptions::default())
}

pub fn emit_gdsii_with(db: &LayoutDb, options: GdsOptions) -> Result<Vec<u8>, LayoutError> {
    let stamp = if options.real_timestamps {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        civil_from_unix(secs)
    } else {
        EPOCH
    };
    let stamps: Vec<i16> = stamp.iter().chain(stamp.iter()).copied().collect();
    let mut w = Writer { buf: Vec::new() };
    w.int2(HEADER, &[STREAM_VERSION]);
    w.int2(BGNLIB, &stamps);
    w.ascii(LIBNAME, db.lib_name());
    let mut units = Vec::with_capacity(16);
    units.extend_from_slice(&encode_real8(1.0 / DB_PER_USER as f64));
    units.extend_from_slice(&encode_real8(DB_UNIT_M));
    w.record(UNITS, REAL8, &units);
    for s in db.structures() {
        w.int2(BGNSTR, &stamps);
        w.ascii(STRNAME, &s.name);
        for e in &s.elements {
            match e {
                Element::Rect(r) => {
                    w.record(BOUNDARY, NO_DATA, &[]);
                    w.int2(LAYER, &[r.layer.layer]);
                    w.int2(DATATYPE, &[r.layer.datatype]);
                    let (x0, y0, x1, y1) = (coord(r.x0)?, coord(r.y0)?, coord(r.x1)?, coord(r.y1)?);
                    w.int4(XY, &[x0, y0, x1, y0, x1, y1, x0, y1, x0, y0]);
                }
                Element::Ref { structure, x, y } => {
                    w.record(SREF, NO_DATA, &[]);
                    w.ascii(SNAME, structure);
                    w.int4(XY, &[coord(*x)?, coord(*y)?]);
                }
            }
            w.record(ENDEL, NO_DATA, &[]);
        }
        w.record(ENDSTR, NO_DATA, &[]);
    }
    w.record(ENDLIB, NO_DATA, &[]);
    Ok(w.buf)
}

struct Record<'a> {
    offset: usize,
    rtype: u8,
    dtype: u8,
    payload: &'a [u8],
}

impl Record<'_> {
    fn malformed(&self, reason: impl Into<String>) -> LayoutError {
        LayoutError::MalformedRecord {
            offset: self.offset,
            reason: reason.into(),
        }
    }

    fn expect_dtype(&self, dtype: u8) -> Result<(), LayoutError> {
        if self.dtype != dtype {
            return Err(self.malformed(format!(
                "record 0x{:02x} has data type {}, expected {dtype}",
                self.rtype, self.dtype
            )));
        }
        Ok(())
    }

    fn int2(&self) -> Result<Vec<i16>, LayoutError> {
        self.expect_dtype(INT2)?;
        if self.payload.len() % 2 != 0 {
            return Err(self.malformed("odd INT2 payload"));
        }
        Ok(self
            .payload
            .chunks_exact(2)
            .map(|c| i16::from_be_bytes([c[0], c[1]]))
            .collect())
    }

    fn single_int2(&self) -> Result<i16, LayoutError> {
        match self.int2()?.as_slice() {
            [v] => Ok(*v),
            _ => Err(self.malformed("expected one INT2 value")),
        }
    }

    fn int4(&self) -> Result<Vec<i32>, LayoutError> {
        self.expect_dtype(INT4)?;
        if self.payload.len() % 4 != 0 {
            return Err(self.malformed("INT4 payload not a multiple of 4"));
        }
        Ok(self
            .payload
            .chunks_exact(4)
            .map(|c| i32::from_be_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    fn ascii(&self) -> Result<String, LayoutError> {
        self.expect_dtype(ASCII)?;
        let trimmed = match self.payload.last() {
            Some(0) => &self.payload[..self.payload.len() - 1],
            _ => self.payload,
        };
        String::from_utf8(trimmed.to_vec()).map_err(|_| self.malformed("non-ASCII string"))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn next(&mut self) -> Result<Record<'a>, LayoutError> {
        let offset = self.pos;
        let eof = || LayoutError::MalformedRecord {
            offset,
            reason: "unexpected end of stream".into(),
        };
        let head = self.bytes.get(offset..offset + 4).ok_or_else(eof)?;
        let len = u16::from_be_bytes([head[0], head[1]]) as usize;
        if len < 4 || len % 2 != 0 {
            return Err(LayoutError::MalformedRecord {
                offset,
                reason: format!("record length {len}"),
            });
        }
        let payload = self.bytes.get(offset + 4..offset + len).ok_or_else(eof)?;
        self.pos += len;
        let rec = Record {
            offset,
            rtype: head[2],
            dtype: head[3],
            payload,
        };
        let known = [
            HEADER, BGNLIB, LIBNAME, UNITS, ENDLIB, BGNSTR, STRNAME, ENDSTR, BOUNDARY, SREF, LAYER,
            DATATYPE, XY, ENDEL, SNAME,
        ];
        if !known.contains(&rec.rtype) {
            return Err(LayoutError::UnsupportedRecord {
                id: rec.rtype,
                offset,
            });
        }
        Ok(rec)
    }

    fn expect(&mut self, rtype: u8) -> Result<Record<'a>, LayoutError> {
        let rec = self.next()?;
        if rec.rtype != rtype {
            return Err(rec.malformed(format!(
                "expected record 0x{rtype:02x}, found 0x{:02x}",
                rec.rtype
            )));
        }
        Ok(rec)
    }
}

fn units_match(found: f64, expected: f64) -> bool {
    ((found - expected) / expected).abs() < 1e-9
}

fn parse_rect(rec: &Record<'_>, layer: LayerId, xy: &[i32]) -> Result<Rect, LayoutError> {
    let pts: Vec<(i64, i64)> = xy
        .chunks_exact(2)
        .map(|c| (i64::from(c[0]), i64::from(c[1])))
        .collect();
    if pts.len() != 5 || pts[0] != pts[4] {
        return Err(rec.malformed("boundary is not a closed 4-corner ring"));
    }
    let (x0, x1) = (pts.iter().map(|p| p.0).min(), pts.iter().map(|p| p.0).max());
    let (y0, y1) = (pts.iter().map(|p| p.1).min(), pts.iter().map(|p| p.1).max());
    let (x0, x1, y0, y1) = (x0.unwrap_or(0), x1.unwrap_or(0), y0.unwrap_or(0), y1.unwrap_or(0));
    let rect_ring = [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)];
    if pts != rect_ring {
        return Err(rec.malformed("boundary is not an axis-aligned rectangle"));
    }
    Rect::new(layer, x0, y0, x1, y1).map_err(|e| rec.malformed(e.to_string()))
}

fn parse_element(r: &mut Reader<'_>, head: &Record<'_>) -> Result<Element, LayoutError> {
    let element = if head.rtype == BOUNDARY {
        let layer = r.expect(LAYER)?.single_int2()?;
        let datatype = r.expect(DATATYPE)?.single_int2()?;
        let xy = r.expect(XY)?;
        Element::Rect(parse_rect(&xy, LayerId::new(layer, datatype), &xy.int4()?)?)
    } else {
        let structure = r.expect(SNAME)?.ascii()?;
        let xy = r.expect(XY)?;
        match xy.int4()?.as_slice() {
            [x, y] => Element::Ref {
                structure,
                x: i64::from(*x),
                y: i64::from(*y),
            },
            _ => return Err(xy.malformed("SREF needs exactly one point")),
        }
    };
    r.expect(ENDEL)?;
    Ok(element)
}

/// Parses a stream in the emitted subset back into a [`LayoutDb`].
pub fn parse_gdsii(bytes: &[u8]) -> Result<LayoutDb, LayoutError> {
    let mut r = Reader { bytes, pos: 0 };
    let header = r.expect(HEADER)?;
    header.single_int2()?;
    let bgn = r.expect(BGNLIB)?;
    if bgn.int2()?.len() != 12 {
        return Err(bgn.malformed("BGNLIB needs 12 date fields"));
    }
    let mut db = LayoutDb::new(r.expect(LIBNAME)?.ascii()?);
    let units = r.expect(UNITS)?;
    units.expect_dtype(REAL8)?;
    if units.payload.len() != 16 {
        return Err(units.malformed("UNITS needs two reals"));
    }
    let mut a = [0u8; 8];
    let mut b = [0u8; 8];
    a.copy_from_slice(&units.payload[..8]);
    b.copy_from_slice(&units.payload[8..]);
    if !units_match(decode_real8(a), 1.0 / DB_PER_USER as f64)
        || !units_match(decode_real8(b), DB_UNIT_M)
    {
        return Err(units.malformed("only a 1 nm database unit is supported"));
    }
    loop {
        let rec = r.next()?;
        match rec.rtype {
            ENDLIB => break,
            BGNSTR => {
                if rec.int2()?.len() != 12 {
                    return Err(rec.malformed("BGNSTR needs 12 date fields"));
                }
                let name_rec = r.expect(STRNAME)?;
                let mut s = Structure::new(name_rec.ascii()?);
                loop {
                    let el = r.next()?;
                    match el.rtype {
                        ENDSTR => break,
                        BOUNDARY | SREF => s.elements.push(parse_element(&mut r, &el)?),
                        other => {
                            return Err(el.malformed(format!(
                                "record 0x{other:02x} inside a structure"
                            )))
                        }
                    }
                }
                db.add_structure(s)
                    .map_err(|e| name_rec.malformed(e.to_string()))?;
            }
            other => return Err(rec.malformed(format!("record 0x{other:02x} at library level"))),
        }
    }
    if r.pos != bytes.len() {
        return Err(LayoutError::MalformedRecord {
            offset: r.pos,
            reason: "trailing bytes after ENDLIB".into(),
        });
    }
    Ok(db)
}
