//! Finite empirical measures, stored as sample lists.

use std::fmt::{self, Write as _};
use std::io::BufRead;

use crate::error::{invalid, Error, Result};

/// Whether samples are log-likelihood ratios (any finite real) or
/// probabilities (strictly inside (0, 1)).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Theta,
    Mu,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Theta => "THETA",
            Kind::Mu => "MU",
        })
    }
}

impl std::str::FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "THETA" => Ok(Kind::Theta),
            "MU" => Ok(Kind::Mu),
            _ => Err(invalid(format!("unknown population kind `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PopMeta {
    pub d: f64,
    pub generation: u64,
    pub seed: u64,
}

impl PopMeta {
    pub fn new(d: f64, seed: u64) -> Self {
        PopMeta {
            d,
            generation: 0,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Population {
    samples: Vec<f64>,
    kind: Kind,
    meta: PopMeta,
}

impl Population {
    pub fn new(kind: Kind, samples: Vec<f64>, meta: PopMeta) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("population must be nonempty"));
        }
        let bad = match kind {
            Kind::Theta => samples.iter().position(|x| !x.is_finite()),
            Kind::Mu => samples.iter().position(|x| !(*x > 0.0 && *x < 1.0)),
        };
        if let Some(i) = bad {
            return Err(invalid(format!(
                "sample {i} = {} is not a valid {kind} value",
                samples[i]
            )));
        }
        Ok(Population {
            samples,
            kind,
            meta,
        })
    }

    pub fn zeros(size: usize, meta: PopMeta) -> Result<Self> {
        Population::new(Kind::Theta, vec![0.0; size], meta)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn meta(&self) -> PopMeta {
        self.meta
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.samples.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Fraction of samples exactly equal to `x`.
    pub fn mass_at(&self, x: f64) -> f64 {
        self.samples.iter().filter(|&&s| s == x).count() as f64 / self.len() as f64
    }

    /// Header line, then one value per line with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(32 + 24 * self.samples.len());
        writeln!(
            s,
            "# pop v1 kind={} d={} gen={} seed={}",
            self.kind, self.meta.d, self.meta.generation, self.meta.seed
        )
        .unwrap();
        for x in &self.samples {
            writeln!(s, "{x:.16e}").unwrap();
        }
        s
    }

    /// Parses the format written by `to_text`. Lines after the header that
    /// start with `#` are comments.
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            msg: "empty population file".into(),
        })??;
        let bad_header = |msg: &str| Error::Parse {
            line: 1,
            msg: format!("{msg} in `{header}`"),
        };
        let rest = header
            .strip_prefix("# pop v1")
            .ok_or_else(|| bad_header("missing `# pop v1`"))?;
        let (mut kind, mut d, mut generation, mut seed) = (None, None, None, None);
        for field in rest.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| bad_header("malformed field"))?;
            match k {
                "kind" => kind = Some(v.parse::<Kind>()?),
                "d" => d = Some(v.parse::<f64>().map_err(|_| bad_header("bad d"))?),
                "gen" => generation = Some(v.parse::<u64>().map_err(|_| bad_header("bad gen"))?),
                "seed" => seed = Some(v.parse::<u64>().map_err(|_| bad_header("bad seed"))?),
                _ => return Err(bad_header("unknown field")),
            }
        }
        let meta = PopMeta {
            d: d.ok_or_else(|| bad_header("missing d"))?,
            generation: generation.ok_or_else(|| bad_header("missing gen"))?,
            seed: seed.ok_or_else(|| bad_header("missing seed"))?,
        };
        let kind = kind.ok_or_else(|| bad_header("missing kind"))?;
        let mut samples = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            samples.push(t.parse::<f64>().map_err(|_| Error::Parse {
                line: k + 2,
                msg: format!("bad value `{t}`"),
            })?);
        }
        Population::new(kind, samples, meta)
    }
}
