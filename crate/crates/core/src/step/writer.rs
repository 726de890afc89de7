use std::fmt::{self, Write};

use super::{Arg, Entity, EntityBody, Record, StepFile};

/// Writes a Part 21 document: header records, one DATA section with one
/// instance per line in graph order.
pub fn serialize_step(file: &StepFile) -> String {
    let mut out = String::with_capacity(64 * (file.data.len() + 8));
    out.push_str("ISO-10303-21;\nHEADER;\n");
    for rec in &file.header {
        let _ = writeln!(out, "{rec};");
    }
    out.push_str("ENDSEC;\nDATA;\n");
    for entity in file.data.iter() {
        let _ = writeln!(out, "{}", DisplayEntity(entity));
    }
    out.push_str("ENDSEC;\nEND-ISO-10303-21;\n");
    out
}

/// Part 21 spelling of a real: always has a decimal point, exponent in
/// upper case (`1.E-07` style). Non-finite values have no Part 21 spelling
/// and come out unparseable.
pub fn format_real(value: f64) -> String {
    let s = format!("{value:?}");
    match s.split_once('e') {
        Some((mantissa, exp)) => {
            let mantissa = if mantissa.contains('.') {
                mantissa.to_string()
            } else {
                format!("{mantissa}.")
            };
            format!("{mantissa}E{exp}")
        }
        None => s,
    }
}

struct DisplayEntity<'a>(&'a Entity);

impl fmt::Display for DisplayEntity<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}=", self.0.id)?;
        match &self.0.body {
            EntityBody::Simple(rec) => write_record(f, rec)?,
            EntityBody::Complex(parts) => {
                f.write_char('(')?;
                for (i, part) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_char(' ')?;
                    }
                    write_record(f, part)?;
                }
                f.write_char(')')?;
            }
        }
        f.write_char(';')
    }
}

pub(super) fn write_record(f: &mut fmt::Formatter<'_>, rec: &Record) -> fmt::Result {
    f.write_str(&rec.keyword)?;
    write_list(f, &rec.args)
}

fn write_list(f: &mut fmt::Formatter<'_>, args: &[Arg]) -> fmt::Result {
    f.write_char('(')?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_char(',')?;
        }
        write_arg(f, a)?;
    }
    f.write_char(')')
}

pub(super) fn write_arg(f: &mut fmt::Formatter<'_>, arg: &Arg) -> fmt::Result {
    match arg {
        Arg::Integer { text, .. } | Arg::Real { text, .. } => f.write_str(text),
        Arg::String(s) => {
            f.write_char('\'')?;
            f.write_str(&s.replace('\'', "''"))?;
            f.write_char('\'')
        }
        Arg::Binary(hex) => write!(f, "\"{hex}\""),
        Arg::Enum(e) => write!(f, ".{e}."),
        Arg::Ref(id) => write!(f, "#{id}"),
        Arg::Star => f.write_char('*'),
        Arg::Dollar => f.write_char('$'),
        Arg::List(items) => write_list(f, items),
        Arg::Typed { keyword, arg } => {
            write!(f, "{keyword}(")?;
            write_arg(f, arg)?;
            f.write_char(')')
        }
    }
}
