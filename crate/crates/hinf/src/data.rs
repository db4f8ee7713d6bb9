//! Line-oriented text form of a [`DataSet`].
//!
//! ```text
//! hinf-dataset 1
//! n m q windows dt substeps seed
//! 2 1 1 50 5e-2 10 1
//! window <t_start> <u_1..u_m> <w_1..w_q>
//! <x_1..x_n>            (substeps + 1 lines)
//! window ...
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so writing and reading
//! back reproduces every bit.

use std::fmt::Write as _;
use std::path::Path;

use hinf_core::dynamics::SampleWindow;
use hinf_core::offpolicy::{DataSet, Fingerprint};
use hinf_core::DVector;

use crate::error::{Error, Result};

const MAGIC: &str = "hinf-dataset 1";
const FIELDS: &str = "n m q windows dt substeps seed";

fn push_floats(out: &mut String, values: impl IntoIterator<Item = f64>) {
    for v in values {
        write!(out, " {v:e}").expect("writing to a String");
    }
}

pub fn to_text(data: &DataSet) -> String {
    let fp = &data.fingerprint;
    let mut out = format!("{MAGIC}\n{FIELDS}\n");
    out += &format!(
        "{} {} {} {} {:e} {} {}\n",
        fp.state_dim,
        fp.control_dim,
        fp.disturbance_dim,
        data.len(),
        fp.dt,
        fp.substeps,
        data.seed
    );
    for win in &data.windows {
        out += "window";
        push_floats(&mut out, [win.t_start]);
        push_floats(&mut out, win.behavior_control.iter().copied());
        push_floats(&mut out, win.behavior_disturbance.iter().copied());
        out.push('\n');
        for x in &win.substep_states {
            let mut line = String::new();
            push_floats(&mut line, x.iter().copied());
            out += line.trim_start();
            out.push('\n');
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        let (i, l) = self.inner.next().ok_or_else(|| Error::DataFormat {
            line: self.line + 1,
            message: format!("file ends where {what} was expected"),
        })?;
        self.line = i + 1;
        Ok(l)
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::DataFormat {
            line: self.line,
            message: message.into(),
        }
    }

    fn numbers<T: std::str::FromStr>(&self, fields: &[&str]) -> Result<Vec<T>> {
        fields
            .iter()
            .map(|f| f.parse().map_err(|_| self.error(format!("cannot parse {f:?}"))))
            .collect()
    }
}

pub fn from_text(text: &str) -> Result<DataSet> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    if lines.next("the header")?.trim() != MAGIC {
        return Err(lines.error(format!("expected {MAGIC:?}")));
    }
    if lines.next("the field names")?.split_whitespace().ne(FIELDS.split_whitespace()) {
        return Err(lines.error(format!("expected {FIELDS:?}")));
    }
    let head: Vec<&str> = lines.next("the header values")?.split_whitespace().collect();
    if head.len() != 7 {
        return Err(lines.error("header needs 7 values"));
    }
    let ints: Vec<usize> = lines.numbers(&[head[0], head[1], head[2], head[3], head[5]])?;
    let (n, m, q, count, substeps) = (ints[0], ints[1], ints[2], ints[3], ints[4]);
    let dt: f64 = lines.numbers(&head[4..5])?[0];
    let seed: u64 = lines.numbers(&head[6..7])?[0];

    let mut windows = Vec::with_capacity(count);
    for _ in 0..count {
        let fields: Vec<&str> = lines.next("a window line")?.split_whitespace().collect();
        if fields.first() != Some(&"window") || fields.len() != 2 + m + q {
            return Err(lines.error(format!("expected \"window\" followed by {} numbers", 1 + m + q)));
        }
        let v: Vec<f64> = lines.numbers(&fields[1..])?;
        let mut states = Vec::with_capacity(substeps + 1);
        for _ in 0..=substeps {
            let fields: Vec<&str> = lines.next("a state line")?.split_whitespace().collect();
            if fields.len() != n {
                return Err(lines.error(format!("expected {n} state entries, found {}", fields.len())));
            }
            states.push(DVector::from_vec(lines.numbers(&fields)?));
        }
        windows.push(SampleWindow {
            t_start: v[0],
            dt,
            substep_states: states,
            behavior_control: DVector::from_column_slice(&v[1..1 + m]),
            behavior_disturbance: DVector::from_column_slice(&v[1 + m..]),
        });
    }
    if let Some((i, extra)) = lines.inner.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::DataFormat {
            line: i + 1,
            message: format!("unexpected trailing content {extra:?}"),
        });
    }
    Ok(DataSet {
        windows,
        fingerprint: Fingerprint {
            state_dim: n,
            control_dim: m,
            disturbance_dim: q,
            dt,
            substeps,
        },
        seed,
    })
}

pub fn write(path: &Path, data: &DataSet) -> Result<()> {
    std::fs::write(path, to_text(data)).map_err(Error::io(path))
}

pub fn read(path: &Path) -> Result<DataSet> {
    from_text(&std::fs::read_to_string(path).map_err(Error::io(path))?)
}
