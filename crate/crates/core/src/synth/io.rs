//! Flat text persistence for fitted synthesizers.
//!
//! ```text
//! synthmodel v1
//! method tvae
//! label y
//! latent_dim 16
//! recon_weight 2
//! begin spec
//! transformspec v1
//! ...
//! end spec
//! begin encoder
//! densenet v1
//! ...
//! end encoder
//! ...
//! ```
//!
//! The transform spec, networks, and (for the independent baseline) the
//! schema are embedded as delimited blocks in their own text formats, so
//! one file restores the whole sampling pipeline. Training curves are not
//! persisted: a reloaded model samples identically but reports empty
//! histories.

use super::independent::ColumnSampler;
use super::{CtganModel, IndependentModel, Method, SynthError, SynthModel, TvaeModel};
use crate::neural::{net_from_text, net_to_text, NeuralError};
use crate::tabular::{schema_from_text, schema_to_text};
use crate::transform::{spec_from_text, spec_to_text, Mode, TransformError, STD_FLOOR};

pub(super) fn model_to_text(model: &SynthModel) -> String {
    let mut out = String::from("synthmodel v1\n");
    match model {
        SynthModel::Tvae(m) => {
            out.push_str("method tvae\n");
            out.push_str(&format!("label {}\n", m.label().unwrap_or("-")));
            out.push_str(&format!("latent_dim {}\n", m.latent_dim()));
            out.push_str(&format!("recon_weight {}\n", m.recon_weight()));
            push_floats(&mut out, "sigmas", m.output_noise());
            push_block(&mut out, "spec", &spec_to_text(m.spec()));
            push_block(&mut out, "encoder", &net_to_text(m.encoder()));
            push_block(&mut out, "decoder", &net_to_text(m.decoder()));
        }
        SynthModel::Ctgan(m) => {
            out.push_str("method ctgan\n");
            out.push_str(&format!("label {}\n", m.label().unwrap_or("-")));
            out.push_str(&format!("latent_dim {}\n", m.latent_dim()));
            push_block(&mut out, "spec", &spec_to_text(m.spec()));
            let mut conds = String::new();
            for c in m.conditions() {
                conds.push_str(&format!("cond {} {}\n", c.name, c.log_probs.len()));
                push_floats(&mut conds, "logfreq", &c.log_probs);
                push_floats(&mut conds, "freq", &c.frequencies);
            }
            push_block(&mut out, "conditions", &conds);
            push_block(&mut out, "generator", &net_to_text(m.generator()));
            push_block(&mut out, "discriminator", &net_to_text(m.discriminator()));
        }
        SynthModel::Independent(m) => {
            out.push_str("method independent\n");
            push_block(&mut out, "schema", &schema_to_text(m.schema()));
            let mut marginals = String::new();
            for (col, sampler) in m.schema().columns().iter().zip(m.samplers()) {
                match sampler {
                    ColumnSampler::Numeric(modes) => {
                        marginals
                            .push_str(&format!("colnum {} {}\n", col.name(), modes.len()));
                        for mode in modes {
                            marginals.push_str(&format!(
                                "mode {} {} {}\n",
                                mode.mean, mode.std, mode.weight
                            ));
                        }
                    }
                    ColumnSampler::Categorical(probs) => {
                        marginals
                            .push_str(&format!("colcat {} {}\n", col.name(), probs.len()));
                        push_floats(&mut marginals, "prob", probs);
                    }
                }
            }
            push_block(&mut out, "marginals", &marginals);
        }
    }
    out
}

fn push_block(out: &mut String, name: &str, content: &str) {
    out.push_str(&format!("begin {name}\n"));
    out.push_str(content);
    if !content.ends_with('\n') && !content.is_empty() {
        out.push('\n');
    }
    out.push_str(&format!("end {name}\n"));
}

fn push_floats(out: &mut String, tag: &str, values: &[f64]) {
    out.push_str(tag);
    for v in values {
        out.push(' ');
        out.push_str(&format!("{v}"));
    }
    out.push('\n');
}

struct Block<'a> {
    name: &'a str,
    /// 1-based line number of the first content line.
    start: usize,
    lines: Vec<&'a str>,
}

struct Scanned<'a> {
    headers: Vec<(usize, &'a str, &'a str)>,
    blocks: Vec<Block<'a>>,
}

fn perr(line: usize, msg: impl Into<String>) -> SynthError {
    SynthError::Parse {
        line,
        msg: msg.into(),
    }
}

fn scan(text: &str) -> Result<Scanned<'_>, SynthError> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.first().map(|l| l.trim()) != Some("synthmodel v1") {
        return Err(perr(1, "expected header \"synthmodel v1\""));
    }
    let mut headers = Vec::new();
    let mut blocks: Vec<Block> = Vec::new();
    let mut i = 1;
    while i < lines.len() {
        let line = lines[i];
        if let Some(name) = line.strip_prefix("begin ") {
            let name = name.trim();
            let close = format!("end {name}");
            let Some(end) = (i + 1..lines.len()).find(|&j| lines[j] == close) else {
                return Err(perr(i + 1, format!("block {name:?} is never closed")));
            };
            if blocks.iter().any(|b| b.name == name) {
                return Err(perr(i + 1, format!("block {name:?} appears twice")));
            }
            blocks.push(Block {
                name,
                start: i + 2,
                lines: lines[i + 1..end].to_vec(),
            });
            i = end + 1;
        } else if line.trim().is_empty() {
            return Err(perr(i + 1, "blank line outside a block"));
        } else {
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            headers.push((i + 1, key, rest.trim()));
            i += 1;
        }
    }
    Ok(Scanned { headers, blocks })
}

impl<'a> Scanned<'a> {
    fn take_header(&mut self, key: &str) -> Result<(usize, &'a str), SynthError> {
        let pos = self
            .headers
            .iter()
            .position(|(_, k, _)| *k == key)
            .ok_or_else(|| perr(0, format!("missing {key:?} line")))?;
        let (line, _, rest) = self.headers.remove(pos);
        Ok((line, rest))
    }

    fn take_block(&mut self, name: &str) -> Result<Block<'a>, SynthError> {
        let pos = self
            .blocks
            .iter()
            .position(|b| b.name == name)
            .ok_or_else(|| perr(0, format!("missing block {name:?}")))?;
        Ok(self.blocks.remove(pos))
    }

    fn finish(self) -> Result<(), SynthError> {
        if let Some((line, key, _)) = self.headers.first() {
            return Err(perr(*line, format!("unexpected line starting with {key:?}")));
        }
        if let Some(b) = self.blocks.first() {
            return Err(perr(b.start - 1, format!("unexpected block {:?}", b.name)));
        }
        Ok(())
    }
}

impl Block<'_> {
    fn text(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

fn remap_transform(e: TransformError, block_start: usize) -> SynthError {
    match e {
        TransformError::Parse { line, msg } if line > 0 => SynthError::Parse {
            line: block_start + line - 1,
            msg,
        },
        other => SynthError::Transform(other),
    }
}

fn remap_neural(e: NeuralError, block_start: usize) -> SynthError {
    match e {
        NeuralError::Parse { line, msg } if line > 0 => SynthError::Parse {
            line: block_start + line - 1,
            msg,
        },
        other => SynthError::Neural(other),
    }
}

fn parse_usize(line: usize, s: &str) -> Result<usize, SynthError> {
    s.parse().map_err(|_| perr(line, format!("cannot parse {s:?}")))
}

fn parse_f64(line: usize, s: &str) -> Result<f64, SynthError> {
    let v: f64 = s
        .parse()
        .map_err(|_| perr(line, format!("cannot parse {s:?}")))?;
    if !v.is_finite() {
        return Err(perr(line, format!("non-finite value {s:?}")));
    }
    Ok(v)
}

fn parse_float_line(line_no: usize, line: &str, tag: &str) -> Result<Vec<f64>, SynthError> {
    let rest = line
        .strip_prefix(tag)
        .ok_or_else(|| perr(line_no, format!("expected a {tag:?} line")))?;
    rest.split_whitespace()
        .map(|tok| parse_f64(line_no, tok))
        .collect()
}

fn parse_label(rest: &str) -> Option<String> {
    if rest == "-" {
        None
    } else {
        Some(rest.to_string())
    }
}

pub(super) fn model_from_text(text: &str) -> Result<SynthModel, SynthError> {
    let mut doc = scan(text)?;
    let (line, method) = doc.take_header("method")?;
    let method: Method = method
        .parse()
        .map_err(|msg: String| perr(line, msg))?;
    match method {
        Method::Tvae => tvae_from_doc(doc),
        Method::Ctgan => ctgan_from_doc(doc),
        Method::Independent => independent_from_doc(doc),
    }
}

fn tvae_from_doc(mut doc: Scanned<'_>) -> Result<SynthModel, SynthError> {
    let (_, label) = doc.take_header("label")?;
    let label = parse_label(label);
    let (line, latent) = doc.take_header("latent_dim")?;
    let latent_dim = parse_usize(line, latent)?;
    let (line, weight) = doc.take_header("recon_weight")?;
    let recon_weight = parse_f64(line, weight)?;
    let (line, sig) = doc.take_header("sigmas")?;
    let sigmas = sig
        .split_whitespace()
        .map(|tok| parse_f64(line, tok))
        .collect::<Result<Vec<f64>, SynthError>>()?;

    let spec_block = doc.take_block("spec")?;
    let spec =
        spec_from_text(&spec_block.text()).map_err(|e| remap_transform(e, spec_block.start))?;
    let enc_block = doc.take_block("encoder")?;
    let encoder =
        net_from_text(&enc_block.text()).map_err(|e| remap_neural(e, enc_block.start))?;
    let dec_block = doc.take_block("decoder")?;
    let decoder =
        net_from_text(&dec_block.text()).map_err(|e| remap_neural(e, dec_block.start))?;
    doc.finish()?;

    if let Some(name) = &label {
        if spec.schema().index_of(name).is_none() {
            return Err(SynthError::BadConfig(format!(
                "label column {name:?} is not in the embedded spec"
            )));
        }
    }
    Ok(SynthModel::Tvae(TvaeModel::from_parts(
        spec,
        encoder,
        decoder,
        sigmas,
        latent_dim,
        recon_weight,
        label,
    )?))
}

fn ctgan_from_doc(mut doc: Scanned<'_>) -> Result<SynthModel, SynthError> {
    let (_, label) = doc.take_header("label")?;
    let label = parse_label(label);
    let (line, latent) = doc.take_header("latent_dim")?;
    let latent_dim = parse_usize(line, latent)?;

    let spec_block = doc.take_block("spec")?;
    let spec =
        spec_from_text(&spec_block.text()).map_err(|e| remap_transform(e, spec_block.start))?;

    let cond_block = doc.take_block("conditions")?;
    let mut tables = Vec::new();
    let mut it = cond_block
        .lines
        .iter()
        .enumerate()
        .map(|(i, l)| (cond_block.start + i, *l));
    while let Some((line_no, line)) = it.next() {
        let rest = line
            .strip_prefix("cond ")
            .ok_or_else(|| perr(line_no, "expected a \"cond\" line"))?;
        let mut parts = rest.split_whitespace();
        let name = parts
            .next()
            .ok_or_else(|| perr(line_no, "cond line needs a column name"))?;
        let count = parse_usize(
            line_no,
            parts
                .next()
                .ok_or_else(|| perr(line_no, "cond line needs a category count"))?,
        )?;
        if parts.next().is_some() {
            return Err(perr(line_no, "trailing tokens on cond line"));
        }
        let (lno, l) = it
            .next()
            .ok_or_else(|| perr(line_no, "cond entry is missing its logfreq line"))?;
        let log_probs = parse_float_line(lno, l, "logfreq")?;
        let (fno, f) = it
            .next()
            .ok_or_else(|| perr(line_no, "cond entry is missing its freq line"))?;
        let frequencies = parse_float_line(fno, f, "freq")?;
        if log_probs.len() != count || frequencies.len() != count {
            return Err(perr(
                line_no,
                format!("cond {name:?} declares {count} categories"),
            ));
        }
        tables.push((name.to_string(), log_probs, frequencies));
    }

    let gen_block = doc.take_block("generator")?;
    let generator =
        net_from_text(&gen_block.text()).map_err(|e| remap_neural(e, gen_block.start))?;
    let disc_block = doc.take_block("discriminator")?;
    let discriminator =
        net_from_text(&disc_block.text()).map_err(|e| remap_neural(e, disc_block.start))?;
    doc.finish()?;

    if let Some(name) = &label {
        if spec.schema().index_of(name).is_none() {
            return Err(SynthError::BadConfig(format!(
                "label column {name:?} is not in the embedded spec"
            )));
        }
    }
    Ok(SynthModel::Ctgan(CtganModel::from_parts(
        spec,
        generator,
        discriminator,
        latent_dim,
        label,
        tables,
    )?))
}

fn independent_from_doc(mut doc: Scanned<'_>) -> Result<SynthModel, SynthError> {
    let schema_block = doc.take_block("schema")?;
    let schema = schema_from_text(&schema_block.text())?;

    let block = doc.take_block("marginals")?;
    doc.finish()?;
    let mut samplers = Vec::new();
    let mut order = Vec::new();
    let mut it = block
        .lines
        .iter()
        .enumerate()
        .map(|(i, l)| (block.start + i, *l));
    while let Some((line_no, line)) = it.next() {
        let mut parts = line.split_whitespace();
        let tag = parts.next().unwrap_or("");
        let name = parts
            .next()
            .ok_or_else(|| perr(line_no, "marginal line needs a column name"))?;
        let count = parse_usize(
            line_no,
            parts
                .next()
                .ok_or_else(|| perr(line_no, "marginal line needs a count"))?,
        )?;
        if parts.next().is_some() {
            return Err(perr(line_no, "trailing tokens on marginal line"));
        }
        match tag {
            "colnum" => {
                if count < 1 {
                    return Err(perr(line_no, "a numeric column needs at least one mode"));
                }
                let mut modes = Vec::with_capacity(count);
                for _ in 0..count {
                    let (mno, ml) = it
                        .next()
                        .ok_or_else(|| perr(line_no, "missing mode line"))?;
                    let nums = parse_float_line(mno, ml, "mode")?;
                    if nums.len() != 3 {
                        return Err(perr(mno, "mode line needs: mean std weight"));
                    }
                    let (mean, std, weight) = (nums[0], nums[1], nums[2]);
                    if std < STD_FLOOR || !(0.0..=1.0).contains(&weight) {
                        return Err(perr(mno, "mode std/weight out of range"));
                    }
                    modes.push(Mode { mean, std, weight });
                }
                let total: f64 = modes.iter().map(|m| m.weight).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(perr(
                        line_no,
                        format!("mode weights sum to {total}, expected 1"),
                    ));
                }
                samplers.push(ColumnSampler::Numeric(modes));
            }
            "colcat" => {
                let (pno, pl) = it
                    .next()
                    .ok_or_else(|| perr(line_no, "missing prob line"))?;
                let probs = parse_float_line(pno, pl, "prob")?;
                if probs.len() != count {
                    return Err(perr(pno, format!("expected {count} probabilities")));
                }
                samplers.push(ColumnSampler::Categorical(probs));
            }
            other => {
                return Err(perr(line_no, format!("unknown marginal tag {other:?}")));
            }
        }
        order.push(name.to_string());
    }

    let expected: Vec<&str> = schema.columns().iter().map(|c| c.name()).collect();
    if order != expected {
        return Err(SynthError::BadConfig(
            "marginals must list every schema column in order".into(),
        ));
    }
    Ok(SynthModel::Independent(IndependentModel::from_parts(
        schema, samplers,
    )?))
}
