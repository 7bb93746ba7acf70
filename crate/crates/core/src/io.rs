//! File formats: CSV clouds and traces, binary PGM images and JSON with
//! 17 significant digits.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::julia::{GrayImage, JuliaCloud};
use crate::measure::{Atom, WeightedCloud};
use crate::numkernel::SpherePoint;
use crate::transfer::IterationTrace;

pub const JSON_SCHEMA: u32 = 1;

/// `x` with 17 significant digits, which round-trips every `f64`.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn point_fields(p: &SpherePoint) -> [String; 3] {
    match p {
        SpherePoint::Finite(z) => [fmt17(z.re), fmt17(z.im), "0".into()],
        SpherePoint::Infinity => ["0".into(), "0".into(), "1".into()],
    }
}

pub fn write_julia_csv<W: Write>(out: W, cloud: &JuliaCloud) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["re", "im", "is_infinity"])?;
    for p in &cloud.points {
        w.write_record(point_fields(p))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cloud_csv<W: Write>(out: W, cloud: &WeightedCloud) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["re", "im", "is_infinity", "weight"])?;
    for a in &cloud.atoms {
        let [re, im, inf] = point_fields(&a.point);
        w.write_record([re, im, inf, fmt17(a.weight)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cloud_csv<R: Read>(input: R) -> Result<WeightedCloud> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["re", "im", "is_infinity", "weight"] {
        return Err(Error::Parse(format!("unexpected cloud header {headers:?}")));
    }
    let mut atoms = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number '{}'", &rec[i])))
        };
        let point = match rec[2].trim() {
            "1" => SpherePoint::Infinity,
            "0" => SpherePoint::from_parts(num(0)?, num(1)?),
            other => return Err(Error::Parse(format!("bad is_infinity flag '{other}'"))),
        };
        atoms.push(Atom { point, weight: num(3)? });
    }
    Ok(WeightedCloud::from_atoms(atoms))
}

/// One row per level and probe: `level,probe_index,re,im`.
pub fn write_trace_csv<W: Write>(out: W, traces: &[IterationTrace]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["level", "probe_index", "re", "im"])?;
    for t in traces {
        for (i, v) in t.values.iter().enumerate() {
            w.write_record([t.level.to_string(), i.to_string(), fmt17(v.re), fmt17(v.im)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_pgm<W: Write>(mut out: W, img: &GrayImage) -> Result<()> {
    write!(out, "P5\n{} {}\n255\n", img.width, img.height)?;
    out.write_all(&img.pixels)?;
    Ok(())
}

/// Serializer formatter printing every float with 17 significant digits.
struct Digits17;

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Pretty-enough JSON: compact, one document, trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// `{"schema": 1, "kind": ..., "data": ...}`
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema: u32,
    pub kind: &'a str,
    pub data: &'a T,
}

pub fn report_json<T: Serialize>(kind: &str, data: &T) -> Result<String> {
    to_json(&Envelope {
        schema: JSON_SCHEMA,
        kind,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::lyubich_exact;
    use crate::numkernel::Polynomial;
    use crate::ratmap::RationalMap;
    use crate::transfer::TestFunction;

    #[test]
    fn cloud_round_trip() {
        let m = RationalMap::polynomial(Polynomial::from_real(&[0.2, 0.0, 1.0])).unwrap();
        let cloud = lyubich_exact(&m, &SpherePoint::real(0.3), 6).unwrap();
        let mut buf = Vec::new();
        write_cloud_csv(&mut buf, &cloud).unwrap();
        let back = read_cloud_csv(&buf[..]).unwrap();
        for t in TestFunction::monomial_family(3) {
            let a = cloud.integrate(&t).unwrap();
            let b = back.integrate(&t).unwrap();
            assert!((a - b).norm() < 1e-12);
        }
        assert_eq!(back.atoms, cloud.atoms);
    }

    #[test]
    fn infinity_rows() {
        let cloud = WeightedCloud::from_atoms(vec![Atom {
            point: SpherePoint::Infinity,
            weight: 1.0,
        }]);
        let mut buf = Vec::new();
        write_cloud_csv(&mut buf, &cloud).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().contains("0,0,1,"));
        assert_eq!(read_cloud_csv(&buf[..]).unwrap().atoms[0].point, SpherePoint::Infinity);
    }

    #[test]
    fn json_digits() {
        let s = report_json("x", &vec![0.1f64, 1.0 / 3.0]).unwrap();
        assert_eq!(
            s,
            "{\"schema\":1,\"kind\":\"x\",\"data\":[1.0000000000000001e-1,3.3333333333333331e-1]}\n"
        );
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["data"][1].as_f64().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn pgm_header() {
        let img = GrayImage {
            width: 2,
            height: 1,
            pixels: vec![0, 255],
        };
        let mut buf = Vec::new();
        write_pgm(&mut buf, &img).unwrap();
        assert_eq!(buf, b"P5\n2 1\n255\n\x00\xff");
    }
}
