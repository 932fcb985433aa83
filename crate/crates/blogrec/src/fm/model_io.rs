//! Versioned text serialization for trained models.
//!
//! Parameters are printed with 12 significant digits, which reloads to
//! predictions within 1e-9 of the originals while staying diffable and
//! greppable. The header pins shape and encoding so a file cannot be read
//! back into the wrong space.

use std::io::{self, BufRead, Write};

use super::{Encoding, FeatureSpace, FmError, FmModel};
use crate::scalar::real;
use crate::Real;

/// Write the model in the `fm v1` text format.
pub fn write_model<S: Real>(mut w: impl Write, model: &FmModel<S>) -> io::Result<()> {
    let space = model.space();
    writeln!(w, "fm v1")?;
    writeln!(w, "encoding {}", space.encoding().label())?;
    writeln!(w, "k {}", model.k())?;
    writeln!(w, "users {}", space.user_count())?;
    writeln!(w, "blogs {}", space.blog_count())?;
    writeln!(w, "apps {}", space.app_count())?;
    writeln!(w, "w0 {:.11e}", model.w0)?;
    write!(w, "w")?;
    for v in &model.w {
        write!(w, " {v:.11e}")?;
    }
    writeln!(w)?;
    write!(w, "z")?;
    for v in &model.z {
        write!(w, " {v:.11e}")?;
    }
    writeln!(w)?;
    Ok(())
}

/// Read a model written by [`write_model`].
pub fn read_model<S: Real>(reader: impl BufRead) -> Result<FmModel<S>, FmError> {
    let mut lines = reader.lines().enumerate();
    let mut next_field = |key: &'static str| -> Result<(usize, String), FmError> {
        let (no, line) = lines.next().ok_or(FmError::ParseModel {
            line: 0,
            message: format!("missing {key} line"),
        })?;
        let line = line?;
        let rest = line.strip_prefix(key).and_then(|r| r.strip_prefix(' '));
        match rest {
            Some(value) => Ok((no + 1, value.to_owned())),
            None => Err(FmError::ParseModel {
                line: no + 1,
                message: format!("expected `{key} ...`"),
            }),
        }
    };

    let (first_no, version) = next_field("fm")?;
    if version != "v1" {
        return Err(FmError::ParseModel {
            line: first_no,
            message: format!("unsupported version {version:?}"),
        });
    }
    let (enc_no, encoding) = next_field("encoding")?;
    let encoding = match encoding.as_str() {
        "mf" => Encoding::Mf,
        "app-fm" => Encoding::AppFm,
        other => {
            return Err(FmError::ParseModel {
                line: enc_no,
                message: format!("unknown encoding {other:?}"),
            })
        }
    };
    let parse_usize = |(no, s): (usize, String)| -> Result<usize, FmError> {
        s.parse().map_err(|_| FmError::ParseModel {
            line: no,
            message: format!("expected an integer, got {s:?}"),
        })
    };
    let k = parse_usize(next_field("k")?)?;
    let users = parse_usize(next_field("users")?)?;
    let blogs = parse_usize(next_field("blogs")?)?;
    let apps = parse_usize(next_field("apps")?)?;

    let space = match encoding {
        Encoding::Mf if apps == 0 => FeatureSpace::mf(users, blogs),
        Encoding::Mf => {
            return Err(FmError::ParseModel {
                line: enc_no,
                message: "mf encoding cannot carry apps".into(),
            })
        }
        Encoding::AppFm => FeatureSpace::app_fm(users, blogs, apps),
    };
    if k < 1 {
        return Err(FmError::ParseModel {
            line: enc_no,
            message: "k must be at least 1".into(),
        });
    }

    let parse_scalar = |no: usize, s: &str| -> Result<S, FmError> {
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(real::<S>(v)),
            _ => Err(FmError::ParseModel {
                line: no,
                message: format!("expected a finite number, got {s:?}"),
            }),
        }
    };
    let (w0_no, w0_str) = next_field("w0")?;
    let w0 = parse_scalar(w0_no, &w0_str)?;

    let mut parse_vec = |key: &'static str, want: usize| -> Result<Vec<S>, FmError> {
        let (no, joined) = next_field(key)?;
        let vals: Vec<S> = joined
            .split_whitespace()
            .map(|s| parse_scalar(no, s))
            .collect::<Result<_, _>>()?;
        if vals.len() != want {
            return Err(FmError::ParseModel {
                line: no,
                message: format!("{key} has {} values, expected {want}", vals.len()),
            });
        }
        Ok(vals)
    };
    let f = space.feature_count();
    let w = parse_vec("w", f)?;
    let z = parse_vec("z", f * k)?;
    Ok(FmModel::from_params(space, k, w0, w, z))
}
