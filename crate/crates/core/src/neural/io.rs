//! Flat text persistence for [`DenseNet`] parameters.
//!
//! ```text
//! densenet v1
//! input_dim 4
//! layers 2
//! layer units 6 residual 1 activation relu
//! w 24 0.1 -0.2 ...
//! b 6 0 0 0 0 0 0
//! layer units 7 residual 0 activation spans;0.2;tanh=0;softmax=1:3,4:3
//! ...
//! ```
//!
//! Floats use `f64`'s shortest round-trip `Display`, so save/load
//! reproduces parameters bit for bit. The activation token is a single
//! whitespace-free word; span heads carry their temperature and layout in
//! `;`-separated fields.

use super::net::{Activation, DenseNet, Layer, NeuralError, SpanActivation};
use super::Mat;

pub fn net_to_text(net: &DenseNet) -> String {
    let mut out = String::new();
    out.push_str("densenet v1\n");
    out.push_str(&format!("input_dim {}\n", net.input_dim()));
    out.push_str(&format!("layers {}\n", net.layers().len()));
    for layer in net.layers() {
        out.push_str(&format!(
            "layer units {} residual {} activation {}\n",
            layer.units(),
            u8::from(layer.residual()),
            activation_token(layer.activation()),
        ));
        push_floats(&mut out, "w", layer.weights().data());
        push_floats(&mut out, "b", layer.bias());
    }
    out
}

fn push_floats(out: &mut String, tag: &str, values: &[f64]) {
    out.push_str(tag);
    out.push(' ');
    out.push_str(&values.len().to_string());
    for v in values {
        out.push(' ');
        out.push_str(&format!("{v}"));
    }
    out.push('\n');
}

fn activation_token(a: &Activation) -> String {
    match a {
        Activation::Identity => "identity".into(),
        Activation::Relu => "relu".into(),
        Activation::Tanh => "tanh".into(),
        Activation::Sigmoid => "sigmoid".into(),
        Activation::Spans(sa) => {
            let tanh = sa
                .tanh_positions()
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(",");
            let softmax = sa
                .softmax_spans()
                .iter()
                .map(|(s, l)| format!("{s}:{l}"))
                .collect::<Vec<_>>()
                .join(",");
            format!("spans;{};tanh={tanh};softmax={softmax}", sa.temperature())
        }
    }
}

fn parse_activation(token: &str, line: usize) -> Result<Activation, NeuralError> {
    match token {
        "identity" => return Ok(Activation::Identity),
        "relu" => return Ok(Activation::Relu),
        "tanh" => return Ok(Activation::Tanh),
        "sigmoid" => return Ok(Activation::Sigmoid),
        _ => {}
    }
    let parts: Vec<&str> = token.split(';').collect();
    if parts.len() != 4 || parts[0] != "spans" {
        return Err(NeuralError::Parse {
            line,
            msg: format!("unknown activation {token:?}"),
        });
    }
    let temperature: f64 = parts[1].parse().map_err(|_| NeuralError::Parse {
        line,
        msg: format!("bad temperature {:?}", parts[1]),
    })?;
    let tanh_str = parts[2].strip_prefix("tanh=").ok_or(NeuralError::Parse {
        line,
        msg: "expected tanh= field".into(),
    })?;
    let softmax_str = parts[3]
        .strip_prefix("softmax=")
        .ok_or(NeuralError::Parse {
            line,
            msg: "expected softmax= field".into(),
        })?;
    let mut tanh_positions = Vec::new();
    for p in tanh_str.split(',').filter(|s| !s.is_empty()) {
        tanh_positions.push(p.parse().map_err(|_| NeuralError::Parse {
            line,
            msg: format!("bad tanh position {p:?}"),
        })?);
    }
    let mut softmax_spans = Vec::new();
    for s in softmax_str.split(',').filter(|s| !s.is_empty()) {
        let (start, len) = s.split_once(':').ok_or(NeuralError::Parse {
            line,
            msg: format!("bad span {s:?}"),
        })?;
        let start = start.parse().map_err(|_| NeuralError::Parse {
            line,
            msg: format!("bad span start {start:?}"),
        })?;
        let len = len.parse().map_err(|_| NeuralError::Parse {
            line,
            msg: format!("bad span length {len:?}"),
        })?;
        softmax_spans.push((start, len));
    }
    Ok(Activation::Spans(SpanActivation::new(
        tanh_positions,
        softmax_spans,
        temperature,
    )?))
}

fn parse_floats(line_no: usize, line: &str, tag: &str, expected: usize) -> Result<Vec<f64>, NeuralError> {
    let mut it = line.split_whitespace();
    if it.next() != Some(tag) {
        return Err(NeuralError::Parse {
            line: line_no,
            msg: format!("expected a {tag:?} line"),
        });
    }
    let count: usize = it
        .next()
        .and_then(|c| c.parse().ok())
        .ok_or(NeuralError::Parse {
            line: line_no,
            msg: "missing value count".into(),
        })?;
    if count != expected {
        return Err(NeuralError::Parse {
            line: line_no,
            msg: format!("expected {expected} values, header says {count}"),
        });
    }
    let mut values = Vec::with_capacity(count);
    for tok in it {
        let v: f64 = tok.parse().map_err(|_| NeuralError::Parse {
            line: line_no,
            msg: format!("bad float {tok:?}"),
        })?;
        if !v.is_finite() {
            return Err(NeuralError::Parse {
                line: line_no,
                msg: format!("non-finite parameter {tok:?}"),
            });
        }
        values.push(v);
    }
    if values.len() != count {
        return Err(NeuralError::Parse {
            line: line_no,
            msg: format!("expected {count} values, found {}", values.len()),
        });
    }
    Ok(values)
}

pub fn net_from_text(text: &str) -> Result<DenseNet, NeuralError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| {
        lines.next().ok_or(NeuralError::Parse {
            line: 0,
            msg: format!("unexpected end of input, expected {what}"),
        })
    };

    let (ln, header) = next("header")?;
    if header.trim() != "densenet v1" {
        return Err(NeuralError::Parse {
            line: ln,
            msg: format!("unsupported header {header:?}"),
        });
    }
    let (ln, l) = next("input_dim")?;
    let input_dim: usize = parse_tagged(ln, l, "input_dim")?;
    let (ln, l) = next("layers")?;
    let n_layers: usize = parse_tagged(ln, l, "layers")?;

    let mut layers = Vec::with_capacity(n_layers);
    let mut dim = input_dim;
    for _ in 0..n_layers {
        let (ln, l) = next("layer")?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 7
            || parts[0] != "layer"
            || parts[1] != "units"
            || parts[3] != "residual"
            || parts[5] != "activation"
        {
            return Err(NeuralError::Parse {
                line: ln,
                msg: "layer line needs: layer units N residual 0|1 activation A".into(),
            });
        }
        let units: usize = parts[2].parse().map_err(|_| NeuralError::Parse {
            line: ln,
            msg: format!("bad unit count {:?}", parts[2]),
        })?;
        let residual = match parts[4] {
            "0" => false,
            "1" => true,
            other => {
                return Err(NeuralError::Parse {
                    line: ln,
                    msg: format!("bad residual flag {other:?}"),
                })
            }
        };
        let activation = parse_activation(parts[6], ln)?;

        let (wln, wl) = next("weights")?;
        let w = parse_floats(wln, wl, "w", units * dim)?;
        let (bln, bl) = next("bias")?;
        let b = parse_floats(bln, bl, "b", units)?;

        let w = Mat::from_vec(units, dim, w).map_err(|e| NeuralError::Parse {
            line: wln,
            msg: e.to_string(),
        })?;
        let layer =
            Layer::from_parts(w, b, activation, residual).map_err(|e| NeuralError::Parse {
                line: ln,
                msg: e.to_string(),
            })?;
        dim = if residual { dim + units } else { units };
        layers.push(layer);
    }

    Ok(DenseNet::from_parts(input_dim, layers))
}

fn parse_tagged(line: usize, text: &str, tag: &str) -> Result<usize, NeuralError> {
    let rest = text.strip_prefix(tag).ok_or(NeuralError::Parse {
        line,
        msg: format!("expected {tag:?}"),
    })?;
    rest.trim().parse().map_err(|_| NeuralError::Parse {
        line,
        msg: format!("bad number {:?}", rest.trim()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::net::{Activation, LayerSpec};

    fn sample_net() -> DenseNet {
        let head = SpanActivation::new(vec![0], vec![(1, 3)], 0.2).unwrap();
        DenseNet::new(
            3,
            &[
                LayerSpec::residual(5, Activation::Relu),
                LayerSpec::new(4, Activation::Spans(head)),
            ],
            123,
        )
        .unwrap()
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let net = sample_net();
        let text = net_to_text(&net);
        let back = net_from_text(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(net_to_text(&back), text);
    }

    #[test]
    fn rejects_corrupt_text() {
        let net = sample_net();
        let text = net_to_text(&net);
        assert!(net_from_text(&text.replace("densenet v1", "densenet v2")).is_err());
        assert!(net_from_text(&text.replace("activation relu", "activation bogus")).is_err());
        let truncated: String = text
            .lines()
            .take(5)
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(net_from_text(&truncated).is_err());
        assert!(net_from_text(&text.replace("w 15", "w 14")).is_err());
    }
}
