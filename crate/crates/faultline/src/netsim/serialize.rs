//! Structured-text model files, bit-exact on round trip.
//!
//! Layout (`#` starts a comment line, tokens are whitespace-separated):
//!
//! ```text
//! faultline-model v1
//! mlp classes=4 features=2 augment_bias=1 layers=2
//! layer out=2 in=3 fmt=float:8:23:127:ieee activation=relu
//! w 3f800000 bf000000 00000000      # one line per output row, hex words
//! w ...
//! mask 011                          # optional, one line per row, col j = char j
//! aq scale=38 scale_fmt=float:4:3:7:ieee zero=03 zero_fmt=int:8
//! endlayer
//! ...
//! end
//! ```
//!
//! ```text
//! faultline-model v1
//! lut classes=2 features=2 layers=1
//! binarizer features=2
//! thr 0.25 0.5 0.75                 # one line per feature, f64 display
//! thr 0.25 0.5 0.75
//! lutlayer luts=2 k=2
//! lut conn=0,3 table=6              # hex of the 2^K table bits
//! lut conn=1,2 table=9
//! endlayer
//! head 0 1
//! end
//! ```
//!
//! Word payloads are lowercase hex of the raw bits, zero-padded to the
//! format width; reals use Rust's shortest round-trip decimal display, so
//! parsing restores the exact f64.

use std::fs;
use std::path::Path;

use crate::formats::{
    AffineQuantLayerParams, BitWord, FloatFormat, IntFormat, LutTable, NumericFormat,
    SpecialsMode,
};

use super::{
    Activation, Binarizer, DenseLayer, LutLayer, LutNetwork, MlpNetwork, NetError, Network,
};

const HEADER: &str = "faultline-model v1";

fn fmt_label(fmt: &NumericFormat) -> String {
    match fmt {
        NumericFormat::Int(f) => format!("int:{}", f.bits()),
        NumericFormat::Binary => "binary".into(),
        NumericFormat::Float(f) => {
            let mode = match f.specials() {
                SpecialsMode::IeeeLike => "ieee",
                SpecialsMode::Extended => "ext",
            };
            format!(
                "float:{}:{}:{}:{}",
                f.exponent_bits(),
                f.mantissa_bits(),
                f.bias(),
                mode
            )
        }
    }
}

fn parse_fmt(text: &str, line: usize) -> Result<NumericFormat, NetError> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || NetError::Parse { line, message: format!("bad format tag {text:?}") };
    match parts.as_slice() {
        ["binary"] => Ok(NumericFormat::Binary),
        ["int", bits] => {
            let bits = bits.parse().map_err(|_| bad())?;
            Ok(NumericFormat::Int(IntFormat::new(bits).map_err(|_| bad())?))
        }
        ["float", e, m, bias, mode] => {
            let e = e.parse().map_err(|_| bad())?;
            let m = m.parse().map_err(|_| bad())?;
            let bias = bias.parse().map_err(|_| bad())?;
            let mode = match *mode {
                "ieee" => SpecialsMode::IeeeLike,
                "ext" => SpecialsMode::Extended,
                _ => return Err(bad()),
            };
            Ok(NumericFormat::Float(
                FloatFormat::new(e, m, bias, mode).map_err(|_| bad())?,
            ))
        }
        _ => Err(bad()),
    }
}

fn parse_float_fmt(text: &str, line: usize) -> Result<FloatFormat, NetError> {
    match parse_fmt(text, line)? {
        NumericFormat::Float(f) => Ok(f),
        _ => Err(NetError::Parse { line, message: format!("{text:?} is not a float format") }),
    }
}

fn parse_int_fmt(text: &str, line: usize) -> Result<IntFormat, NetError> {
    match parse_fmt(text, line)? {
        NumericFormat::Int(f) => Ok(f),
        _ => Err(NetError::Parse { line, message: format!("{text:?} is not an int format") }),
    }
}

pub fn write_model(net: &Network) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    match net {
        Network::Mlp(mlp) => {
            out.push_str(&format!(
                "mlp classes={} features={} augment_bias={} layers={}\n",
                mlp.classes,
                mlp.features,
                u8::from(mlp.augment_bias),
                mlp.layers.len()
            ));
            for layer in &mlp.layers {
                out.push_str(&format!(
                    "layer out={} in={} fmt={} activation={}\n",
                    layer.output_size(),
                    layer.input_size(),
                    fmt_label(&layer.fmt),
                    layer.activation.label()
                ));
                for row in &layer.weights {
                    out.push('w');
                    for word in row {
                        out.push(' ');
                        out.push_str(&word.to_hex());
                    }
                    out.push('\n');
                }
                if let Some(mask) = &layer.mask {
                    for row in mask {
                        out.push_str("mask ");
                        out.extend(row.iter().map(|&a| if a { '1' } else { '0' }));
                        out.push('\n');
                    }
                }
                if let Some(aq) = &layer.aq {
                    out.push_str(&format!(
                        "aq scale={} scale_fmt={} zero={} zero_fmt={}\n",
                        aq.scale_word().to_hex(),
                        fmt_label(&NumericFormat::Float(*aq.scale_fmt())),
                        aq.zero_word().to_hex(),
                        fmt_label(&NumericFormat::Int(*aq.zero_fmt())),
                    ));
                }
                out.push_str("endlayer\n");
            }
        }
        Network::Lut(lut) => {
            out.push_str(&format!(
                "lut classes={} features={} layers={}\n",
                lut.classes,
                lut.binarizer.feature_count(),
                lut.layers.len()
            ));
            out.push_str(&format!("binarizer features={}\n", lut.binarizer.feature_count()));
            for ts in &lut.binarizer.thresholds {
                out.push_str("thr");
                for t in ts {
                    out.push_str(&format!(" {t}"));
                }
                out.push('\n');
            }
            for layer in &lut.layers {
                let k = layer.luts.first().map_or(1, |l| l.fan_in());
                out.push_str(&format!("lutlayer luts={} k={}\n", layer.luts.len(), k));
                for (table, conn) in layer.luts.iter().zip(&layer.connections) {
                    let conn_text: Vec<String> = conn.iter().map(u32::to_string).collect();
                    out.push_str(&format!(
                        "lut conn={} table={}\n",
                        conn_text.join(","),
                        table.entries().to_hex()
                    ));
                }
                out.push_str("endlayer\n");
            }
            out.push_str("head");
            for &class in &lut.head {
                out.push_str(&format!(" {class}"));
            }
            out.push('\n');
        }
    }
    out.push_str("end\n");
    out
}

struct LineReader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> LineReader<'a> {
    fn new(text: &'a str) -> Self {
        Self { lines: text.lines().enumerate() }
    }

    /// Next non-blank, non-comment line with its 1-based number.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, raw) in self.lines.by_ref() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Some((i + 1, line));
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), NetError> {
        self.next().ok_or_else(|| NetError::Parse {
            line: 0,
            message: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn kv<'a>(tokens: &[&'a str], key: &str, line: usize) -> Result<&'a str, NetError> {
    tokens
        .iter()
        .find_map(|t| t.strip_prefix(key).and_then(|rest| rest.strip_prefix('=')))
        .ok_or_else(|| NetError::Parse { line, message: format!("missing {key}=") })
}

fn kv_parse<T: std::str::FromStr>(tokens: &[&str], key: &str, line: usize) -> Result<T, NetError> {
    kv(tokens, key, line)?
        .parse()
        .map_err(|_| NetError::Parse { line, message: format!("bad value for {key}") })
}

pub fn parse_model(text: &str) -> Result<Network, NetError> {
    let mut reader = LineReader::new(text);
    let (line, header) = reader.expect("header")?;
    if header != HEADER {
        return Err(NetError::Parse { line, message: format!("expected {HEADER:?}") });
    }
    let (line, decl) = reader.expect("model declaration")?;
    let tokens: Vec<&str> = decl.split_whitespace().collect();
    match tokens.first() {
        Some(&"mlp") => parse_mlp(&mut reader, &tokens, line),
        Some(&"lut") => parse_lut(&mut reader, &tokens, line),
        _ => Err(NetError::Parse { line, message: "expected mlp or lut declaration".into() }),
    }
}

fn parse_mlp(reader: &mut LineReader, decl: &[&str], decl_line: usize) -> Result<Network, NetError> {
    let classes: usize = kv_parse(decl, "classes", decl_line)?;
    let features: usize = kv_parse(decl, "features", decl_line)?;
    let augment_bias: u8 = kv_parse(decl, "augment_bias", decl_line)?;
    let layer_count: usize = kv_parse(decl, "layers", decl_line)?;
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let (line, text) = reader.expect("layer declaration")?;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.first() != Some(&"layer") {
            return Err(NetError::Parse { line, message: "expected layer".into() });
        }
        let out: usize = kv_parse(&tokens, "out", line)?;
        let fan_in: usize = kv_parse(&tokens, "in", line)?;
        let fmt = parse_fmt(kv(&tokens, "fmt", line)?, line)?;
        let activation_text = kv(&tokens, "activation", line)?;
        let activation = Activation::parse(activation_text).ok_or_else(|| NetError::Parse {
            line,
            message: format!("bad activation {activation_text:?}"),
        })?;
        let mut weights = Vec::with_capacity(out);
        for _ in 0..out {
            let (line, text) = reader.expect("weight row")?;
            let mut fields = text.split_whitespace();
            if fields.next() != Some("w") {
                return Err(NetError::Parse { line, message: "expected weight row".into() });
            }
            let row: Vec<BitWord> = fields
                .map(|hex| BitWord::from_hex(hex, fmt.width()))
                .collect::<Result<_, _>>()
                .map_err(|e| NetError::Parse { line, message: e.to_string() })?;
            if row.len() != fan_in {
                return Err(NetError::Parse {
                    line,
                    message: format!("expected {fan_in} words, got {}", row.len()),
                });
            }
            weights.push(row);
        }
        // Optional mask rows and aq line, then endlayer.
        let mut mask: Option<Vec<Vec<bool>>> = None;
        let mut aq: Option<AffineQuantLayerParams> = None;
        loop {
            let (line, text) = reader.expect("endlayer")?;
            let tokens: Vec<&str> = text.split_whitespace().collect();
            match tokens.first() {
                Some(&"endlayer") => break,
                Some(&"mask") => {
                    let bits = tokens.get(1).ok_or_else(|| NetError::Parse {
                        line,
                        message: "mask row missing bits".into(),
                    })?;
                    if bits.len() != fan_in || bits.chars().any(|c| c != '0' && c != '1') {
                        return Err(NetError::Parse {
                            line,
                            message: format!("mask row must be {fan_in} binary digits"),
                        });
                    }
                    mask.get_or_insert_with(Vec::new)
                        .push(bits.chars().map(|c| c == '1').collect());
                }
                Some(&"aq") => {
                    let scale_fmt = parse_float_fmt(kv(&tokens, "scale_fmt", line)?, line)?;
                    let zero_fmt = parse_int_fmt(kv(&tokens, "zero_fmt", line)?, line)?;
                    let scale_word = BitWord::from_hex(kv(&tokens, "scale", line)?, scale_fmt.width())
                        .map_err(|e| NetError::Parse { line, message: e.to_string() })?;
                    let zero_word = BitWord::from_hex(kv(&tokens, "zero", line)?, zero_fmt.bits())
                        .map_err(|e| NetError::Parse { line, message: e.to_string() })?;
                    let weight_fmt = match fmt {
                        NumericFormat::Int(f) => f,
                        _ => {
                            return Err(NetError::Parse {
                                line,
                                message: "aq layer requires an int weight format".into(),
                            })
                        }
                    };
                    aq = Some(
                        AffineQuantLayerParams::new(
                            scale_word, scale_fmt, zero_word, zero_fmt, weight_fmt,
                        )
                        .map_err(|e| NetError::Parse { line, message: e.to_string() })?,
                    );
                }
                _ => return Err(NetError::Parse { line, message: format!("unexpected {text:?}") }),
            }
        }
        if let Some(mask) = &mask {
            if mask.len() != out {
                return Err(NetError::Parse {
                    line: decl_line,
                    message: format!("expected {out} mask rows, got {}", mask.len()),
                });
            }
        }
        layers.push(DenseLayer::new(weights, fmt, aq, activation, mask)?);
    }
    expect_end(reader)?;
    Ok(Network::Mlp(MlpNetwork::new(features, layers, augment_bias != 0, classes)?))
}

fn parse_lut(reader: &mut LineReader, decl: &[&str], decl_line: usize) -> Result<Network, NetError> {
    let classes: usize = kv_parse(decl, "classes", decl_line)?;
    let layer_count: usize = kv_parse(decl, "layers", decl_line)?;
    let (line, text) = reader.expect("binarizer")?;
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.first() != Some(&"binarizer") {
        return Err(NetError::Parse { line, message: "expected binarizer".into() });
    }
    let features: usize = kv_parse(&tokens, "features", line)?;
    let mut thresholds = Vec::with_capacity(features);
    for _ in 0..features {
        let (line, text) = reader.expect("thr row")?;
        let mut fields = text.split_whitespace();
        if fields.next() != Some("thr") {
            return Err(NetError::Parse { line, message: "expected thr row".into() });
        }
        let ts: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| NetError::Parse {
                    line,
                    message: format!("bad threshold {f:?}"),
                })
            })
            .collect::<Result<_, _>>()?;
        thresholds.push(ts);
    }
    let binarizer = Binarizer { thresholds };

    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let (line, text) = reader.expect("lutlayer declaration")?;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.first() != Some(&"lutlayer") {
            return Err(NetError::Parse { line, message: "expected lutlayer".into() });
        }
        let luts: usize = kv_parse(&tokens, "luts", line)?;
        let k: u8 = kv_parse(&tokens, "k", line)?;
        let mut tables = Vec::with_capacity(luts);
        let mut connections = Vec::with_capacity(luts);
        for _ in 0..luts {
            let (line, text) = reader.expect("lut row")?;
            let tokens: Vec<&str> = text.split_whitespace().collect();
            if tokens.first() != Some(&"lut") {
                return Err(NetError::Parse { line, message: "expected lut row".into() });
            }
            let conn: Vec<u32> = kv(&tokens, "conn", line)?
                .split(',')
                .map(|c| {
                    c.parse::<u32>().map_err(|_| NetError::Parse {
                        line,
                        message: format!("bad connection index {c:?}"),
                    })
                })
                .collect::<Result<_, _>>()?;
            let table = BitWord::from_hex(kv(&tokens, "table", line)?, 1 << k)
                .map_err(|e| NetError::Parse { line, message: e.to_string() })?;
            tables.push(
                LutTable::new(k, table)
                    .map_err(|e| NetError::Parse { line, message: e.to_string() })?,
            );
            connections.push(conn);
        }
        let (line, text) = reader.expect("endlayer")?;
        if text != "endlayer" {
            return Err(NetError::Parse { line, message: "expected endlayer".into() });
        }
        layers.push(LutLayer::new(tables, connections)?);
    }
    let (line, text) = reader.expect("head")?;
    let mut fields = text.split_whitespace();
    if fields.next() != Some("head") {
        return Err(NetError::Parse { line, message: "expected head".into() });
    }
    let head: Vec<u16> = fields
        .map(|f| {
            f.parse::<u16>().map_err(|_| NetError::Parse {
                line,
                message: format!("bad head class {f:?}"),
            })
        })
        .collect::<Result<_, _>>()?;
    expect_end(reader)?;
    Ok(Network::Lut(LutNetwork::new(binarizer, layers, head, classes)?))
}

fn expect_end(reader: &mut LineReader) -> Result<(), NetError> {
    let (line, text) = reader.expect("end")?;
    if text != "end" {
        return Err(NetError::Parse { line, message: format!("expected end, got {text:?}") });
    }
    Ok(())
}

pub fn save_model(net: &Network, path: &Path) -> Result<(), NetError> {
    fs::write(path, write_model(net)).map_err(|source| NetError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<Network, NetError> {
    let text = fs::read_to_string(path).map_err(|source| NetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_model(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_mlp_round_trip(net: &MlpNetwork) {
        let text = write_model(&Network::Mlp(net.clone()));
        let parsed = match parse_model(&text).unwrap() {
            Network::Mlp(m) => m,
            _ => panic!("wrong variant"),
        };
        assert_eq!(parsed.classes, net.classes);
        assert_eq!(parsed.features, net.features);
        assert_eq!(parsed.augment_bias, net.augment_bias);
        assert_eq!(parsed.layers.len(), net.layers.len());
        for (a, b) in parsed.layers.iter().zip(&net.layers) {
            assert_eq!(a.weights, b.weights, "weight words must round trip bit-exactly");
            assert_eq!(a.mask, b.mask);
            assert_eq!(a.activation, b.activation);
            match (&a.aq, &b.aq) {
                (None, None) => {}
                (Some(x), Some(y)) => {
                    assert_eq!(x.scale_word(), y.scale_word());
                    assert_eq!(x.zero_word(), y.zero_word());
                }
                _ => panic!("aq presence must round trip"),
            }
        }
        // Second serialization is byte-identical.
        assert_eq!(text, write_model(&Network::Mlp(parsed)));
    }

    #[test]
    fn mlp_round_trip_with_aq_and_mask() {
        use crate::formats::{FloatFormat, IntFormat};
        use crate::netsim::Activation;
        let weight_fmt = IntFormat::new(8).unwrap();
        let zero_fmt = IntFormat::new(8).unwrap();
        let scale_fmt = FloatFormat::fp16();
        let aq = AffineQuantLayerParams::new(
            scale_fmt.encode(0.037).unwrap(),
            scale_fmt,
            zero_fmt.encode(-5).unwrap(),
            zero_fmt,
            weight_fmt,
        )
        .unwrap();
        let words = vec![
            vec![weight_fmt.encode(13).unwrap(), weight_fmt.encode(-100).unwrap(), weight_fmt.encode(5).unwrap()],
            vec![weight_fmt.encode(0).unwrap(), weight_fmt.encode(127).unwrap(), weight_fmt.encode(-128).unwrap()],
        ];
        let hidden = DenseLayer::new(
            words,
            NumericFormat::Int(weight_fmt),
            Some(aq),
            Activation::Sigmoid { tau: 0.7 },
            Some(vec![vec![true, false, true], vec![true, true, true]]),
        )
        .unwrap();
        let out_fmt = FloatFormat::fp32();
        let readout = DenseLayer::new(
            vec![vec![out_fmt.encode(1.25).unwrap(), out_fmt.encode(-0.1).unwrap(), out_fmt.encode(0.0).unwrap()]],
            NumericFormat::Float(out_fmt),
            None,
            Activation::Identity,
            None,
        )
        .unwrap();
        let net = MlpNetwork::new(2, vec![hidden, readout], true, 1).unwrap();
        assert_mlp_round_trip(&net);
    }

    #[test]
    fn lut_round_trip() {
        let binarizer = Binarizer::fit(&[(-1.5, 2.25), (0.0, 0.1)], 3);
        let l1 = LutLayer::new(
            vec![
                LutTable::new(2, BitWord::new(0b0110, 4).unwrap()).unwrap(),
                LutTable::new(2, BitWord::new(0b1011, 4).unwrap()).unwrap(),
            ],
            vec![vec![0, 4], vec![5, 2]],
        )
        .unwrap();
        let l2 = LutLayer::new(
            vec![
                LutTable::new(1, BitWord::new(0b01, 2).unwrap()).unwrap(),
                LutTable::new(1, BitWord::new(0b10, 2).unwrap()).unwrap(),
            ],
            vec![vec![1], vec![0]],
        )
        .unwrap();
        let net = LutNetwork::new(binarizer, vec![l1, l2], vec![0, 1], 2).unwrap();
        let text = write_model(&Network::Lut(net.clone()));
        let parsed = match parse_model(&text).unwrap() {
            Network::Lut(l) => l,
            _ => panic!("wrong variant"),
        };
        assert_eq!(parsed.binarizer, net.binarizer, "thresholds must round trip exactly");
        assert_eq!(parsed.head, net.head);
        for (a, b) in parsed.layers.iter().zip(&net.layers) {
            for (x, y) in a.luts.iter().zip(&b.luts) {
                assert_eq!(x.entries(), y.entries());
            }
            assert_eq!(a.connections, b.connections);
        }
        assert_eq!(text, write_model(&Network::Lut(parsed)));
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_model("nonsense\n").is_err());
        assert!(parse_model("faultline-model v1\nmlp classes=2\n").is_err());
        let truncated = "faultline-model v1\nmlp classes=1 features=1 augment_bias=0 layers=1\n";
        assert!(parse_model(truncated).is_err());
    }
}
