//! Tab-separated parameter dump, one parameter per line:
//!
//! ```text
//! model   pbm|ubm|dcm|sdbn
//! prior   <value>
//! gamma   <rank> [<prev click rank>] <value>
//! lambda  <rank> <value>
//! satisfaction_prior  <value>
//! satisfaction  <query> <doc> <value>
//! alpha   <query> <doc> <value>
//! ```

use std::io::{BufRead, Write};

use super::cascade::{Cascade, CascadeVariant};
use super::em::{Pbm, Ubm};
use super::params::Attractiveness;
use super::{Baseline, BaselineKind};
use crate::error::{Error, Result};
use crate::session_log::{Corpus, DocId, QueryId};

fn token<'a>(corpus: &'a Corpus, q: QueryId, d: DocId) -> Result<(&'a str, &'a str)> {
    let qt = corpus
        .queries
        .token(q.0)
        .ok_or_else(|| Error::invalid(format!("query id {q} has no token")))?;
    let dt = corpus
        .docs
        .token(d.0)
        .ok_or_else(|| Error::invalid(format!("document id {d} has no token")))?;
    for t in [qt, dt] {
        if t.contains('\t') || t.contains('\n') {
            return Err(Error::invalid(format!("token {t:?} cannot be written tab-separated")));
        }
    }
    Ok((qt, dt))
}

fn write_pairs<W: Write>(w: &mut W, family: &str, a: &Attractiveness, corpus: &Corpus) -> Result<()> {
    for ((q, d), v) in a.sorted() {
        let (qt, dt) = token(corpus, q, d)?;
        writeln!(w, "{family}\t{qt}\t{dt}\t{v}")?;
    }
    Ok(())
}

pub fn write_baseline<W: Write>(mut w: W, model: &Baseline, corpus: &Corpus) -> Result<()> {
    writeln!(w, "model\t{}", model.kind().as_str())?;
    writeln!(w, "prior\t{}", model.attractiveness().prior)?;
    match model {
        Baseline::Pbm(m) => {
            for (r, g) in m.gamma.iter().enumerate() {
                writeln!(w, "gamma\t{}\t{g}", r + 1)?;
            }
        }
        Baseline::Ubm(m) => {
            for (r, row) in m.gamma.iter().enumerate() {
                for (rp, g) in row.iter().enumerate() {
                    writeln!(w, "gamma\t{}\t{rp}\t{g}", r + 1)?;
                }
            }
        }
        Baseline::Cascade(m) => {
            for (r, l) in m.lambda.iter().enumerate() {
                writeln!(w, "lambda\t{}\t{l}", r + 1)?;
            }
            writeln!(w, "satisfaction_prior\t{}", m.satisfaction.prior)?;
            write_pairs(&mut w, "satisfaction", &m.satisfaction, corpus)?;
        }
    }
    write_pairs(&mut w, "alpha", model.attractiveness(), corpus)
}

fn set_at(v: &mut Vec<f64>, i: usize, x: f64) {
    if v.len() <= i {
        v.resize(i + 1, 0.5);
    }
    v[i] = x;
}

/// Reads a dump written by [`write_baseline`], interning tokens into `corpus`.
pub fn read_baseline<R: BufRead>(reader: R, corpus: &mut Corpus) -> Result<Baseline> {
    let mut kind = None;
    let mut alpha = Attractiveness::default();
    let mut sat = Attractiveness::default();
    let mut gamma: Vec<f64> = Vec::new();
    let mut gamma2: Vec<Vec<f64>> = Vec::new();
    let mut lambda: Vec<f64> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = |m: String| Error::Parse { line: i + 1, message: m };
        let f: Vec<&str> = line.split('\t').collect();
        let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| bad(format!("bad number {s:?}"))) };
        let idx = |s: &str| -> Result<usize> { s.parse().map_err(|_| bad(format!("bad index {s:?}"))) };
        let rank = |s: &str| -> Result<usize> {
            match idx(s)? {
                0 => Err(bad("ranks are 1-based".into())),
                r => Ok(r),
            }
        };
        match (f[0], f.len()) {
            ("model", 2) => {
                kind = Some(BaselineKind::parse(f[1]).ok_or_else(|| bad(format!("unknown model {:?}", f[1])))?)
            }
            ("prior", 2) => alpha.prior = num(f[1])?,
            ("gamma", 3) => set_at(&mut gamma, rank(f[1])? - 1, num(f[2])?),
            ("gamma", 4) => {
                let r = rank(f[1])? - 1;
                if gamma2.len() <= r {
                    gamma2.resize(r + 1, Vec::new());
                }
                set_at(&mut gamma2[r], idx(f[2])?, num(f[3])?);
            }
            ("lambda", 3) => set_at(&mut lambda, rank(f[1])? - 1, num(f[2])?),
            ("satisfaction_prior", 2) => sat.prior = num(f[1])?,
            ("alpha" | "satisfaction", 4) => {
                let q = QueryId(corpus.queries.intern(f[1]));
                let d = DocId(corpus.docs.intern(f[2]));
                let target = if f[0] == "alpha" { &mut alpha } else { &mut sat };
                target.values.insert((q, d), num(f[3])?);
            }
            _ => return Err(bad(format!("unrecognized line {line:?}"))),
        }
    }
    let kind = kind.ok_or_else(|| Error::format("baseline dump has no model line"))?;
    Ok(match kind {
        BaselineKind::Pbm => Baseline::Pbm(Pbm { gamma, alpha }),
        BaselineKind::Ubm => Baseline::Ubm(Ubm { gamma: gamma2, alpha }),
        BaselineKind::Dcm | BaselineKind::Sdbn => Baseline::Cascade(Cascade {
            variant: if kind == BaselineKind::Dcm {
                CascadeVariant::Dcm
            } else {
                CascadeVariant::Sdbn
            },
            alpha,
            lambda,
            satisfaction: sat,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::EmConfig;
    use crate::session_log::{parse_log, Corpus};

    const LOG: &str = r#"{"sid":"a","queries":[{"qid":"q1","docs":[{"did":"d1","pos":1,"click":1},{"did":"d2","pos":2,"click":0},{"did":"d3","pos":3,"click":1}]}]}
{"sid":"b","queries":[{"qid":"q1","docs":[{"did":"d2","pos":1,"click":0},{"did":"d1","pos":2,"click":1},{"did":"d3","pos":3,"click":0}]},{"qid":"q2","docs":[{"did":"d4","pos":1,"click":0},{"did":"d1","pos":2,"click":0}]}]}
"#;

    #[test]
    fn every_kind_round_trips() {
        let mut corpus = Corpus::new();
        let sessions = parse_log(LOG.as_bytes(), &mut corpus).unwrap().into_strict().unwrap();
        for kind in BaselineKind::ALL {
            let (m, _) = Baseline::fit(kind, &sessions, &EmConfig::default()).unwrap();
            let mut buf = Vec::new();
            write_baseline(&mut buf, &m, &corpus).unwrap();
            let mut c2 = corpus.clone();
            let back = read_baseline(buf.as_slice(), &mut c2).unwrap();
            assert_eq!(back, m, "{kind:?}");
        }
    }

    #[test]
    fn rejects_garbage() {
        let mut corpus = Corpus::new();
        assert!(read_baseline("prior\t0.5\n".as_bytes(), &mut corpus).is_err());
        assert!(read_baseline("model\tpbm\ngamma\t0\t0.5\n".as_bytes(), &mut corpus).is_err());
        assert!(read_baseline("model\txyz\n".as_bytes(), &mut corpus).is_err());
    }
}
