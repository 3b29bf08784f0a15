use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use lmstego::{BitString, LanguageModel, TokenId};

use crate::args::{BitsFormat, StegoFormat};
use crate::error::CliError;

pub fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    let res = if path == Path::new("-") {
        std::io::stdin().read_to_end(&mut buf).map(|_| ())
    } else {
        std::fs::File::open(path).and_then(|mut f| f.read_to_end(&mut buf).map(|_| ()))
    };
    res.map_err(|e| CliError::data(format!("reading {}: {e}", path.display())))?;
    Ok(buf)
}

pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    let res = match path {
        Some(p) => std::fs::write(p, bytes),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush())
        }
    };
    res.map_err(|e| {
        let name = path.map_or("stdout".into(), |p| p.display().to_string());
        CliError::data(format!("writing {name}: {e}"))
    })
}

/// Where an unaligned bit length is recorded next to a bits file.
pub fn bitlen_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".bitlen");
    PathBuf::from(s)
}

/// Reads a payload. Without an explicit length, a `<path>.bitlen` sidecar is
/// honoured, otherwise the whole input is used.
pub fn read_bits(
    path: &Path,
    format: BitsFormat,
    len: Option<usize>,
) -> Result<BitString, CliError> {
    let raw = read_input(path)?;
    let len = match len {
        Some(n) => Some(n),
        None if path != Path::new("-") => match std::fs::read_to_string(bitlen_sidecar(path)) {
            Ok(s) => Some(s.trim().parse().map_err(|_| {
                CliError::data(format!(
                    "bad bit length in {}",
                    bitlen_sidecar(path).display()
                ))
            })?),
            Err(_) => None,
        },
        None => None,
    };
    let bits = match format {
        BitsFormat::Raw => BitString::from_bytes(&raw, len.unwrap_or(8 * raw.len()))?,
        BitsFormat::Hex => {
            let text = std::str::from_utf8(&raw)
                .map_err(|_| CliError::data("hex payload is not text"))?
                .trim();
            BitString::from_hex(text, len.unwrap_or(4 * text.len()))?
        }
    };
    Ok(bits)
}

pub fn write_bits(
    path: Option<&Path>,
    bits: &BitString,
    format: BitsFormat,
) -> Result<(), CliError> {
    let bytes = match format {
        BitsFormat::Raw => bits.to_bytes(),
        BitsFormat::Hex => format!("{}\n", bits.to_hex()).into_bytes(),
    };
    write_output(path, &bytes)?;
    // both forms pad to whole bytes
    if !bits.len().is_multiple_of(8) {
        match path {
            Some(p) => write_output(
                Some(&bitlen_sidecar(p)),
                format!("{}\n", bits.len()).as_bytes(),
            )?,
            None => log::warn!(
                "payload is {} bits; the zero padding written to stdout is not marked",
                bits.len()
            ),
        }
    }
    Ok(())
}

pub fn render_stegotext<M: LanguageModel + ?Sized>(
    model: &M,
    tokens: &[TokenId],
    format: StegoFormat,
) -> Result<String, CliError> {
    Ok(match format {
        StegoFormat::Text => {
            let text = model.detokenize(tokens)?;
            if model.tokenize(&text).ok().as_deref() != Some(tokens) {
                log::warn!(
                    "stegotext does not re-tokenize to the generated ids; \
                     use --stegotext ids if seek fails"
                );
            }
            format!("{text}\n")
        }
        StegoFormat::Ids => {
            let ids: Vec<String> = tokens.iter().map(|t| t.0.to_string()).collect();
            format!("{}\n", ids.join(" "))
        }
    })
}

pub fn parse_stegotext<M: LanguageModel + ?Sized>(
    model: &M,
    raw: &[u8],
    format: StegoFormat,
) -> Result<Vec<TokenId>, CliError> {
    let text = std::str::from_utf8(raw).map_err(|_| CliError::data("stegotext is not UTF-8"))?;
    match format {
        StegoFormat::Text => {
            let text = text.strip_suffix('\n').unwrap_or(text);
            Ok(model.tokenize(text)?)
        }
        StegoFormat::Ids => text
            .split_whitespace()
            .map(|s| {
                s.parse::<u32>()
                    .map(TokenId)
                    .map_err(|_| CliError::data(format!("bad token id {s:?}")))
            })
            .collect(),
    }
}
