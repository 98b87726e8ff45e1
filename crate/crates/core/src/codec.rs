//! Binary template files.
//!
//! Layout (little-endian):
//!
//! ```text
//! "LFRT" | version: u16 | kind: u8 | section_count: u16
//! section* = tag: u8 | byte_len: u32 | payload
//! ```
//!
//! Every float is written with its exact bit pattern, so `decode(encode(t))`
//! reproduces `t` bit for bit.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{
    Descriptor, Minutia, MinutiaKind, MinutiaeTemplate, OrientationField, Template,
    TemplateVariant, TextureSide, TextureTemplate,
};

pub const MAGIC: &[u8; 4] = b"LFRT";
pub const FORMAT_VERSION: u16 = 1;

const KIND_MINUTIAE: u8 = 1;
const KIND_TEXTURE: u8 = 2;

const SEC_META: u8 = 1;
const SEC_FIELD: u8 = 2;
const SEC_MINUTIAE: u8 = 3;
const SEC_DESCRIPTORS: u8 = 4;

pub fn encode_template(t: &Template) -> Vec<u8> {
    let mut sections: Vec<(u8, Vec<u8>)> = Vec::new();
    let kind = match t {
        Template::Minutiae(m) => {
            let mut meta = Writer::default();
            meta.str(&m.source_id);
            meta.u8(match m.variant {
                TemplateVariant::Latent1 => 1,
                TemplateVariant::Latent2 => 2,
                TemplateVariant::Reference => 3,
            });
            sections.push((SEC_META, meta.0));
            sections.push((SEC_FIELD, encode_field(&m.orientation_field)));
            sections.push((SEC_MINUTIAE, encode_minutiae(&m.minutiae)));
            sections.push((SEC_DESCRIPTORS, encode_descriptors(&m.descriptors)));
            KIND_MINUTIAE
        }
        Template::Texture(tt) => {
            let mut meta = Writer::default();
            meta.str(&tt.source_id);
            meta.u8(match tt.side {
                TextureSide::Latent => 1,
                TextureSide::Reference => 2,
            });
            meta.u32(tt.width);
            meta.u32(tt.height);
            meta.u32(tt.block_size);
            sections.push((SEC_META, meta.0));
            sections.push((SEC_MINUTIAE, encode_minutiae(&tt.virtual_minutiae)));
            sections.push((SEC_DESCRIPTORS, encode_descriptors(&tt.descriptors)));
            KIND_TEXTURE
        }
    };

    let mut w = Writer::default();
    w.0.extend_from_slice(MAGIC);
    w.u16(FORMAT_VERSION);
    w.u8(kind);
    w.u16(sections.len() as u16);
    for (tag, payload) in sections {
        w.u8(tag);
        w.u32(payload.len() as u32);
        w.0.extend_from_slice(&payload);
    }
    w.0
}

pub fn decode_template(bytes: &[u8]) -> Result<Template> {
    if bytes.len() < MAGIC.len() {
        return if MAGIC.starts_with(bytes) {
            Err(Error::TruncatedPayload { context: "magic" })
        } else {
            Err(Error::MagicMismatch)
        };
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::MagicMismatch);
    }
    let mut r = Reader::new(&bytes[4..]);
    let version = r.u16("header")?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let kind = r.u8("header")?;
    let count = r.u16("header")?;

    let mut meta = None;
    let mut field = None;
    let mut minutiae = None;
    let mut descriptors = None;
    for _ in 0..count {
        let tag = r.u8("section header")?;
        let len = r.u32("section header")? as usize;
        let payload = r.take(len, "section payload")?;
        match tag {
            SEC_META => meta = Some(payload),
            SEC_FIELD => field = Some(decode_field(payload)?),
            SEC_MINUTIAE => minutiae = Some(decode_minutiae(payload)?),
            SEC_DESCRIPTORS => descriptors = Some(decode_descriptors(payload)?),
            // unknown sections are skipped
            _ => {}
        }
    }
    if !r.is_empty() {
        return Err(Error::MalformedPayload(format!(
            "{} trailing bytes after last section",
            r.remaining()
        )));
    }
    let missing = |name: &str| Error::MalformedPayload(format!("missing {name} section"));
    let meta = meta.ok_or_else(|| missing("meta"))?;
    let minutiae = minutiae.ok_or_else(|| missing("minutiae"))?;
    let descriptors = descriptors.ok_or_else(|| missing("descriptors"))?;

    let mut m = Payload::new(meta);
    let source_id = m.str()?;
    match kind {
        KIND_MINUTIAE => {
            let variant = match m.u8()? {
                1 => TemplateVariant::Latent1,
                2 => TemplateVariant::Latent2,
                3 => TemplateVariant::Reference,
                v => return Err(Error::MalformedPayload(format!("unknown variant {v}"))),
            };
            m.finish()?;
            Ok(Template::Minutiae(MinutiaeTemplate {
                source_id,
                variant,
                minutiae,
                descriptors,
                orientation_field: field.ok_or_else(|| missing("orientation field"))?,
            }))
        }
        KIND_TEXTURE => {
            let side = match m.u8()? {
                1 => TextureSide::Latent,
                2 => TextureSide::Reference,
                v => return Err(Error::MalformedPayload(format!("unknown texture side {v}"))),
            };
            let width = m.u32()?;
            let height = m.u32()?;
            let block_size = m.u32()?;
            m.finish()?;
            Ok(Template::Texture(TextureTemplate {
                source_id,
                side,
                width,
                height,
                block_size,
                virtual_minutiae: minutiae,
                descriptors,
            }))
        }
        k => Err(Error::MalformedPayload(format!("unknown template kind {k}"))),
    }
}

pub fn save_template(t: &Template, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_template(t))?;
    Ok(())
}

pub fn load_template(path: impl AsRef<Path>) -> Result<Template> {
    decode_template(&std::fs::read(path)?)
}

pub fn load_minutiae_template(path: impl AsRef<Path>) -> Result<MinutiaeTemplate> {
    match load_template(path)? {
        Template::Minutiae(m) => Ok(m),
        Template::Texture(_) => Err(Error::InvalidInput(
            "expected a minutiae template, found a texture template".into(),
        )),
    }
}

pub fn load_texture_template(path: impl AsRef<Path>) -> Result<TextureTemplate> {
    match load_template(path)? {
        Template::Texture(t) => Ok(t),
        Template::Minutiae(_) => Err(Error::InvalidInput(
            "expected a texture template, found a minutiae template".into(),
        )),
    }
}

fn encode_field(of: &OrientationField) -> Vec<u8> {
    let mut w = Writer::default();
    w.u32(of.block_size);
    w.u32(of.width_blocks);
    w.u32(of.height_blocks);
    for t in &of.theta {
        w.f64(*t);
    }
    for m in &of.mask {
        w.u8(*m as u8);
    }
    w.0
}

fn decode_field(bytes: &[u8]) -> Result<OrientationField> {
    let mut p = Payload::new(bytes);
    let block_size = p.u32()?;
    let width_blocks = p.u32()?;
    let height_blocks = p.u32()?;
    let n = width_blocks as usize * height_blocks as usize;
    let theta = (0..n).map(|_| p.f64()).collect::<Result<Vec<_>>>()?;
    let mask = (0..n)
        .map(|_| match p.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::MalformedPayload(format!("mask byte {v}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    p.finish()?;
    // raw construction keeps stored angles bit-exact
    Ok(OrientationField {
        block_size,
        width_blocks,
        height_blocks,
        theta,
        mask,
    })
}

fn encode_minutiae(ms: &[Minutia]) -> Vec<u8> {
    let mut w = Writer::default();
    w.u32(ms.len() as u32);
    for m in ms {
        w.f64(m.x);
        w.f64(m.y);
        w.f64(m.alpha);
        w.u8(match m.kind {
            MinutiaKind::True => 0,
            MinutiaKind::Virtual => 1,
        });
    }
    w.0
}

fn decode_minutiae(bytes: &[u8]) -> Result<Vec<Minutia>> {
    let mut p = Payload::new(bytes);
    let n = p.u32()? as usize;
    let mut out = Vec::with_capacity(n.min(bytes.len() / 25));
    for _ in 0..n {
        let x = p.f64()?;
        let y = p.f64()?;
        let alpha = p.f64()?;
        let kind = match p.u8()? {
            0 => MinutiaKind::True,
            1 => MinutiaKind::Virtual,
            v => return Err(Error::MalformedPayload(format!("minutia kind {v}"))),
        };
        out.push(Minutia { x, y, alpha, kind });
    }
    p.finish()?;
    Ok(out)
}

fn encode_descriptors(ds: &[Descriptor]) -> Vec<u8> {
    let mut w = Writer::default();
    w.u32(ds.len() as u32);
    for d in ds {
        w.u8(d.patch_types().len() as u8);
        w.0.extend_from_slice(d.patch_types());
        w.u32(d.dim() as u32);
        for v in d.raw_data() {
            w.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.0
}

fn decode_descriptors(bytes: &[u8]) -> Result<Vec<Descriptor>> {
    let mut p = Payload::new(bytes);
    let n = p.u32()? as usize;
    let mut out = Vec::with_capacity(n.min(bytes.len()));
    for _ in 0..n {
        let k = p.u8()? as usize;
        let types = p.take(k)?.to_vec();
        let dim = p.u32()? as usize;
        let data = (0..k * dim).map(|_| p.f32()).collect::<Result<Vec<_>>>()?;
        out.push(Descriptor::from_raw_parts(types, dim, data)?);
    }
    p.finish()?;
    Ok(out)
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}

/// Reads the outer framing; running out of bytes means the file was cut short.
struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }
    fn take(&mut self, n: usize, context: &'static str) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::TruncatedPayload { context });
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }
    fn u8(&mut self, c: &'static str) -> Result<u8> {
        Ok(self.take(1, c)?[0])
    }
    fn u16(&mut self, c: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, c)?.try_into().unwrap()))
    }
    fn u32(&mut self, c: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, c)?.try_into().unwrap()))
    }
    fn remaining(&self) -> usize {
        self.buf.len()
    }
    fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}

/// Reads inside a section whose length was already checked; running out of
/// bytes here means the section header lied about its contents.
struct Payload<'a> {
    buf: &'a [u8],
}

impl<'a> Payload<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::MalformedPayload(
                "section shorter than its contents".into(),
            ));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::MalformedPayload("source id is not UTF-8".into()))
    }
    fn finish(self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(Error::MalformedPayload(format!(
                "{} unread bytes in section",
                self.buf.len()
            )))
        }
    }
}
