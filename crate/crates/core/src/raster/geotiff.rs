//! GeoTIFF encoding and decoding.
//!
//! Tiles are written uncompressed, pixel-interleaved, one strip, with the
//! georeferencing carried by ModelPixelScale/ModelTiepoint (or
//! ModelTransformation for rotated grids) and a GeoKeyDirectory naming the EPSG
//! code. Band names travel in the GDAL_METADATA XML tag and the nodata value in
//! GDAL_NODATA, so GDAL-based tools read them back too. Decoding accepts
//! any compression the `tiff` crate was built with.

use std::io::{Cursor, Read, Seek};
use std::path::Path;

use tiff::decoder::{Decoder, DecodingResult, Limits};
use tiff::encoder::TiffEncoder;
use tiff::tags::Tag;

use super::{GeoTransform, PixelData, RasterTile};
use crate::crs::Crs;
use crate::error::{Error, Result};

const GDAL_METADATA: u16 = 42112;
const GDAL_NODATA: u16 = 42113;

const GT_MODEL_TYPE: u16 = 1024;
const GT_RASTER_TYPE: u16 = 1025;
const GEOGRAPHIC_TYPE: u16 = 2048;
const PROJECTED_CS_TYPE: u16 = 3072;
const MODEL_TYPE_PROJECTED: u16 = 1;
const MODEL_TYPE_GEOGRAPHIC: u16 = 2;
const RASTER_PIXEL_IS_AREA: u16 = 1;

/// A single-band integer raster, e.g. a landcover map.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalGrid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<i64>,
    pub geotransform: GeoTransform,
    pub crs: Crs,
    pub nodata: Option<i64>,
}

pub fn read_geotiff(path: &Path) -> Result<RasterTile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_geotiff(&bytes).map_err(|e| Error::Raster(format!("{}: {e}", path.display())))
}

pub fn write_geotiff(path: &Path, tile: &RasterTile) -> Result<()> {
    let bytes = encode_geotiff(tile)?;
    crate::fsutil::atomic_write(path, &bytes)
}

pub fn read_categorical(path: &Path) -> Result<CategoricalGrid> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_categorical(&bytes).map_err(|e| Error::Raster(format!("{}: {e}", path.display())))
}

struct Decoded {
    width: usize,
    height: usize,
    samples: usize,
    /// band-sequential
    values: DecodingResult,
    geotransform: GeoTransform,
    crs: Crs,
    nodata: Option<f64>,
    band_names: Vec<Option<String>>,
}

pub fn decode_geotiff(bytes: &[u8]) -> Result<RasterTile> {
    let d = decode(Cursor::new(bytes))?;
    let bands = d
        .band_names
        .iter()
        .enumerate()
        .map(|(i, n)| n.clone().unwrap_or_else(|| format!("band{}", i + 1)))
        .collect();
    let pixels = match d.values {
        DecodingResult::U16(v) => PixelData::U16(v),
        DecodingResult::U8(v) => PixelData::U16(v.into_iter().map(u16::from).collect()),
        DecodingResult::F32(v) => PixelData::F32(v),
        DecodingResult::F64(v) => PixelData::F32(v.into_iter().map(|x| x as f32).collect()),
        DecodingResult::I16(v) => PixelData::F32(v.into_iter().map(f32::from).collect()),
        DecodingResult::I8(v) => PixelData::F32(v.into_iter().map(f32::from).collect()),
        DecodingResult::U32(v) => PixelData::F32(v.into_iter().map(|x| x as f32).collect()),
        DecodingResult::I32(v) => PixelData::F32(v.into_iter().map(|x| x as f32).collect()),
        _ => return Err(Error::Raster("unsupported sample type".into())),
    };
    RasterTile::new(bands, d.height, d.width, pixels, d.geotransform, d.crs, d.nodata)
}

pub fn decode_categorical(bytes: &[u8]) -> Result<CategoricalGrid> {
    let d = decode(Cursor::new(bytes))?;
    if d.samples != 1 {
        return Err(Error::Raster(format!(
            "categorical map must have one band, found {}",
            d.samples
        )));
    }
    let values: Vec<i64> = match d.values {
        DecodingResult::U8(v) => v.into_iter().map(i64::from).collect(),
        DecodingResult::U16(v) => v.into_iter().map(i64::from).collect(),
        DecodingResult::U32(v) => v.into_iter().map(i64::from).collect(),
        DecodingResult::I8(v) => v.into_iter().map(i64::from).collect(),
        DecodingResult::I16(v) => v.into_iter().map(i64::from).collect(),
        DecodingResult::I32(v) => v.into_iter().map(i64::from).collect(),
        _ => return Err(Error::Raster("categorical map must hold integer classes".into())),
    };
    d.geotransform.validate()?;
    Ok(CategoricalGrid {
        width: d.width,
        height: d.height,
        values,
        geotransform: d.geotransform,
        crs: d.crs,
        nodata: d.nodata.map(|v| v as i64),
    })
}

fn decode<R: Read + Seek>(reader: R) -> Result<Decoded> {
    let mut dec = Decoder::new(reader)?.with_limits(Limits::unlimited());
    let (width, height) = dec.dimensions()?;
    let (width, height) = (width as usize, height as usize);
    let samples: usize = dec.find_tag_unsigned::<u16>(Tag::SamplesPerPixel)?.unwrap_or(1).into();
    let planar = dec.find_tag_unsigned::<u16>(Tag::PlanarConfiguration)?.unwrap_or(1);

    let values = if samples > 1 && planar == 2 {
        read_planar(&mut dec, width, height, samples)?
    } else {
        deinterleave(dec.read_image()?, samples)
    };

    let geotransform = read_geotransform(&mut dec)?;
    let crs = read_crs(&mut dec)?;
    let nodata = match dec.find_tag(Tag::Unknown(GDAL_NODATA))? {
        Some(v) => {
            let s = v.into_string()?;
            let s = s.trim_matches(char::from(0)).trim();
            Some(parse_nodata(s)?)
        }
        None => None,
    };
    let mut band_names = vec![None; samples];
    if let Some(v) = dec.find_tag(Tag::Unknown(GDAL_METADATA))? {
        for (i, name) in parse_band_descriptions(&v.into_string()?) {
            if i < samples {
                band_names[i] = Some(name);
            }
        }
    }
    Ok(Decoded {
        width,
        height,
        samples,
        values,
        geotransform,
        crs,
        nodata,
        band_names,
    })
}

fn read_planar<R: Read + Seek>(
    dec: &mut Decoder<R>,
    width: usize,
    height: usize,
    samples: usize,
) -> Result<DecodingResult> {
    if dec.find_tag(Tag::TileWidth)?.is_some() {
        return Err(Error::Raster("tiled planar GeoTIFFs are not supported".into()));
    }
    let chunks = dec.strip_count()?;
    let mut parts = Vec::with_capacity(chunks as usize);
    for c in 0..chunks {
        parts.push(dec.read_chunk(c)?);
    }
    let expected = width * height * samples;
    macro_rules! concat {
        ($variant:ident) => {{
            let mut out = Vec::with_capacity(expected);
            for p in parts {
                match p {
                    DecodingResult::$variant(v) => out.extend(v),
                    _ => return Err(Error::Raster("mixed sample types across strips".into())),
                }
            }
            DecodingResult::$variant(out)
        }};
    }
    let merged = match parts.first() {
        Some(DecodingResult::U8(_)) => concat!(U8),
        Some(DecodingResult::U16(_)) => concat!(U16),
        Some(DecodingResult::I16(_)) => concat!(I16),
        Some(DecodingResult::U32(_)) => concat!(U32),
        Some(DecodingResult::I32(_)) => concat!(I32),
        Some(DecodingResult::F32(_)) => concat!(F32),
        Some(DecodingResult::F64(_)) => concat!(F64),
        _ => return Err(Error::Raster("unsupported planar sample type".into())),
    };
    Ok(merged)
}

fn deinterleave(data: DecodingResult, samples: usize) -> DecodingResult {
    fn split<T: Copy>(v: Vec<T>, samples: usize) -> Vec<T> {
        if samples == 1 {
            return v;
        }
        let n = v.len() / samples;
        let mut out = Vec::with_capacity(v.len());
        for b in 0..samples {
            out.extend((0..n).map(|i| v[i * samples + b]));
        }
        out
    }
    match data {
        DecodingResult::U8(v) => DecodingResult::U8(split(v, samples)),
        DecodingResult::U16(v) => DecodingResult::U16(split(v, samples)),
        DecodingResult::U32(v) => DecodingResult::U32(split(v, samples)),
        DecodingResult::U64(v) => DecodingResult::U64(split(v, samples)),
        DecodingResult::I8(v) => DecodingResult::I8(split(v, samples)),
        DecodingResult::I16(v) => DecodingResult::I16(split(v, samples)),
        DecodingResult::I32(v) => DecodingResult::I32(split(v, samples)),
        DecodingResult::I64(v) => DecodingResult::I64(split(v, samples)),
        DecodingResult::F32(v) => DecodingResult::F32(split(v, samples)),
        DecodingResult::F64(v) => DecodingResult::F64(split(v, samples)),
        other => other,
    }
}

fn read_geotransform<R: Read + Seek>(dec: &mut Decoder<R>) -> Result<GeoTransform> {
    if let Some(v) = dec.find_tag(Tag::ModelTransformationTag)? {
        let m = v.into_f64_vec()?;
        if m.len() < 8 {
            return Err(Error::Raster("ModelTransformation needs 16 values".into()));
        }
        return Ok(GeoTransform([m[3], m[0], m[1], m[7], m[4], m[5]]));
    }
    let scale = dec.find_tag(Tag::ModelPixelScaleTag)?;
    let tie = dec.find_tag(Tag::ModelTiepointTag)?;
    match (scale, tie) {
        (Some(s), Some(t)) => {
            let s = s.into_f64_vec()?;
            let t = t.into_f64_vec()?;
            if s.len() < 2 || t.len() < 6 {
                return Err(Error::Raster("malformed ModelPixelScale/ModelTiepoint".into()));
            }
            // tiepoint maps raster (i, j) to model (x, y)
            let (i, j, x, y) = (t[0], t[1], t[3], t[4]);
            Ok(GeoTransform([x - i * s[0], s[0], 0.0, y + j * s[1], 0.0, -s[1]]))
        }
        _ => Err(Error::Raster("missing georeferencing tags".into())),
    }
}

fn read_crs<R: Read + Seek>(dec: &mut Decoder<R>) -> Result<Crs> {
    let keys: Vec<u16> = dec
        .find_tag(Tag::GeoKeyDirectoryTag)?
        .ok_or_else(|| Error::Raster("missing GeoKeyDirectory".into()))?
        .into_u16_vec()?;
    if keys.len() < 4 {
        return Err(Error::Raster("truncated GeoKeyDirectory".into()));
    }
    let count = keys[3] as usize;
    let mut geographic = None;
    let mut projected = None;
    for k in 0..count {
        let base = 4 + 4 * k;
        let Some(entry) = keys.get(base..base + 4) else {
            break;
        };
        // inline SHORT values have location 0
        if entry[1] != 0 {
            continue;
        }
        match entry[0] {
            GEOGRAPHIC_TYPE => geographic = Some(entry[3]),
            PROJECTED_CS_TYPE => projected = Some(entry[3]),
            _ => {}
        }
    }
    match (projected, geographic) {
        (Some(p), _) if p != 0 && p != 32767 => Crs::from_epsg(p as u32),
        (_, Some(g)) if g != 0 && g != 32767 => Crs::from_epsg(g as u32),
        _ => Err(Error::Config("GeoTIFF does not declare an EPSG code".into())),
    }
}

fn parse_nodata(s: &str) -> Result<f64> {
    match s.to_ascii_lowercase().as_str() {
        "nan" | "-nan" => Ok(f64::NAN),
        other => other
            .parse()
            .map_err(|_| Error::Raster(format!("unparseable GDAL_NODATA value `{s}`"))),
    }
}

fn format_nodata(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

/// Extracts `(sample, name)` pairs from `<Item name="DESCRIPTION" sample="k" role="description">`.
fn parse_band_descriptions(xml: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for item in xml.split("<Item").skip(1) {
        let Some((attrs, rest)) = item.split_once('>') else {
            continue;
        };
        if !attrs.contains("role=\"description\"") {
            continue;
        }
        let sample = attrs
            .split("sample=\"")
            .nth(1)
            .and_then(|s| s.split('"').next())
            .and_then(|s| s.parse::<usize>().ok());
        let text = rest.split("</Item>").next().unwrap_or("");
        if let Some(sample) = sample {
            out.push((sample, xml_unescape(text)));
        }
    }
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn xml_unescape(s: &str) -> String {
    s.replace("&lt;", "<").replace("&gt;", ">").replace("&quot;", "\"").replace("&amp;", "&")
}

pub fn encode_geotiff(tile: &RasterTile) -> Result<Vec<u8>> {
    tile.validate()?;
    let mut buf = Cursor::new(Vec::new());
    {
        let mut enc = TiffEncoder::new(&mut buf)?;
        let mut dir = enc.image_directory()?;
        let bands = tile.bands.len();
        dir.write_tag(Tag::ImageWidth, tile.width as u32)?;
        dir.write_tag(Tag::ImageLength, tile.height as u32)?;
        let (bits, format) = match tile.pixels {
            PixelData::U16(_) => (16u16, 1u16),
            PixelData::F32(_) => (32u16, 3u16),
        };
        dir.write_tag(Tag::BitsPerSample, vec![bits; bands].as_slice())?;
        dir.write_tag(Tag::Compression, 1u16)?;
        dir.write_tag(Tag::PhotometricInterpretation, 1u16)?;
        dir.write_tag(Tag::SamplesPerPixel, bands as u16)?;
        dir.write_tag(Tag::SampleFormat, vec![format; bands].as_slice())?;
        dir.write_tag(Tag::PlanarConfiguration, 1u16)?;
        dir.write_tag(Tag::RowsPerStrip, tile.height as u32)?;
        if bands > 1 {
            dir.write_tag(Tag::ExtraSamples, vec![0u16; bands - 1].as_slice())?;
        }

        let gt = tile.geotransform.0;
        if gt[2] == 0.0 && gt[4] == 0.0 {
            dir.write_tag(Tag::ModelPixelScaleTag, &[gt[1], -gt[5], 0.0][..])?;
            dir.write_tag(Tag::ModelTiepointTag, &[0.0, 0.0, 0.0, gt[0], gt[3], 0.0][..])?;
        } else {
            let m = [
                gt[1], gt[2], 0.0, gt[0], gt[4], gt[5], 0.0, gt[3], 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
            ];
            dir.write_tag(Tag::ModelTransformationTag, &m[..])?;
        }
        let (model, key) = if tile.crs.is_geographic() {
            (MODEL_TYPE_GEOGRAPHIC, GEOGRAPHIC_TYPE)
        } else {
            (MODEL_TYPE_PROJECTED, PROJECTED_CS_TYPE)
        };
        let geokeys: [u16; 16] = [
            1, 1, 0, 3,
            GT_MODEL_TYPE, 0, 1, model,
            GT_RASTER_TYPE, 0, 1, RASTER_PIXEL_IS_AREA,
            key, 0, 1, tile.crs.epsg() as u16,
        ];
        dir.write_tag(Tag::GeoKeyDirectoryTag, &geokeys[..])?;

        let mut meta = String::from("<GDALMetadata>\n");
        for (i, b) in tile.bands.iter().enumerate() {
            meta.push_str(&format!(
                "  <Item name=\"DESCRIPTION\" sample=\"{i}\" role=\"description\">{}</Item>\n",
                xml_escape(b)
            ));
        }
        meta.push_str("</GDALMetadata>");
        dir.write_tag(Tag::Unknown(GDAL_METADATA), meta.as_str())?;
        if let Some(nd) = tile.nodata {
            dir.write_tag(Tag::Unknown(GDAL_NODATA), format_nodata(nd).as_str())?;
        }

        let n = tile.band_len();
        let offset = match &tile.pixels {
            PixelData::U16(v) => {
                let inter: Vec<u16> = (0..n).flat_map(|i| (0..bands).map(move |b| v[b * n + i])).collect();
                dir.write_data(inter.as_slice())?
            }
            PixelData::F32(v) => {
                let inter: Vec<f32> = (0..n).flat_map(|i| (0..bands).map(move |b| v[b * n + i])).collect();
                dir.write_data(inter.as_slice())?
            }
        };
        let byte_count = (n * bands * (bits as usize / 8)) as u32;
        dir.write_tag(Tag::StripOffsets, offset as u32)?;
        dir.write_tag(Tag::StripByteCounts, byte_count)?;
        dir.finish()?;
    }
    Ok(buf.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_tile(pixels: PixelData, crs: Crs, gt: GeoTransform) -> RasterTile {
        RasterTile::new(vec!["B2".into(), "B3".into(), "B4".into()], 4, 5, pixels, gt, crs, None).unwrap()
    }

    #[test]
    fn u16_round_trip() {
        let t = sample_tile(
            PixelData::U16((0..60).map(|i| i * 100).collect()),
            Crs::Wgs84,
            GeoTransform::north_up(12.5, 45.0, 0.001, 0.001),
        );
        let bytes = encode_geotiff(&t).unwrap();
        assert_eq!(decode_geotiff(&bytes).unwrap(), t);
    }

    #[test]
    fn f32_round_trip_with_nan_nodata() {
        let mut px: Vec<f32> = (0..60).map(|i| i as f32 * 0.25 - 3.0).collect();
        px[7] = f32::NAN;
        let mut t = sample_tile(
            PixelData::F32(px),
            Crs::Utm { zone: 32, north: true },
            GeoTransform::north_up(600_000.0, 5_000_000.0, 10.0, 10.0),
        );
        t.nodata = Some(f64::NAN);
        let back = decode_geotiff(&encode_geotiff(&t).unwrap()).unwrap();
        assert!(back.nodata.unwrap().is_nan());
        assert_eq!(back.crs, t.crs);
        assert_eq!(back.geotransform, t.geotransform);
        let (PixelData::F32(a), PixelData::F32(b)) = (&t.pixels, &back.pixels) else {
            panic!("dtype changed")
        };
        assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn rotated_transform_round_trip() {
        let t = sample_tile(
            PixelData::U16(vec![1; 60]),
            Crs::WebMercator,
            GeoTransform([1000.0, 9.0, 1.5, 2000.0, -1.5, -9.0]),
        );
        let back = decode_geotiff(&encode_geotiff(&t).unwrap()).unwrap();
        assert_eq!(back.geotransform, t.geotransform);
    }

    #[test]
    fn encoding_is_deterministic() {
        let t = sample_tile(
            PixelData::U16(vec![7; 60]),
            Crs::Wgs84,
            GeoTransform::north_up(0.0, 0.0, 1.0, 1.0),
        );
        assert_eq!(encode_geotiff(&t).unwrap(), encode_geotiff(&t).unwrap());
    }

    #[test]
    fn deflate_single_band_is_readable() {
        use tiff::encoder::{colortype::Gray16, Compression, DeflateLevel};
        let mut buf = Cursor::new(Vec::new());
        {
            let mut enc = TiffEncoder::new(&mut buf)
                .unwrap()
                .with_compression(Compression::Deflate(DeflateLevel::Balanced));
            let mut img = enc.new_image::<Gray16>(3, 2).unwrap();
            let d = img.encoder();
            d.write_tag(Tag::ModelPixelScaleTag, &[1.0, 1.0, 0.0][..]).unwrap();
            d.write_tag(Tag::ModelTiepointTag, &[0.0, 0.0, 0.0, 5.0, 6.0, 0.0][..]).unwrap();
            d.write_tag(Tag::GeoKeyDirectoryTag, &[1u16, 1, 0, 1, GEOGRAPHIC_TYPE, 0, 1, 4326][..])
                .unwrap();
            img.write_data(&[10, 20, 30, 40, 50, 60]).unwrap();
        }
        let grid = decode_categorical(&buf.into_inner()).unwrap();
        assert_eq!(grid.values, vec![10, 20, 30, 40, 50, 60]);
        assert_eq!(grid.geotransform, GeoTransform::north_up(5.0, 6.0, 1.0, 1.0));
    }

    #[test]
    fn band_descriptions_parsed() {
        let xml = r#"<GDALMetadata><Item name="DESCRIPTION" sample="1" role="description">B8A</Item><Item name="OFFSET" sample="0" role="offset">0</Item></GDALMetadata>"#;
        assert_eq!(parse_band_descriptions(xml), vec![(1, "B8A".to_string())]);
    }
}
