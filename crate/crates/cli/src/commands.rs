use std::path::{Path, PathBuf};

use lmstego::analysis::{run_experiment, ExperimentSpec, PrefixSource};
use lmstego::{
    diagnostics_csv, hide, keystream_xor, seek, Algorithm, BitString, BridgeModel, CodecConfig,
    DivergenceKind, LanguageModel, LengthMode, NgramModel, Prefix, Tokenization, WeightMode,
};

use crate::args::{
    AlgoArg, AnalyzeArgs, CodecArgs, DivergenceArg, HideArgs, ModelArgs, SeekArgs, TokenizeArg,
    TrainArgs, WeightsArg,
};
use crate::error::{CliError, Exit};
use crate::io::{
    parse_stegotext, read_bits, read_input, render_stegotext, write_bits, write_output,
};

type Model = Box<dyn LanguageModel>;

fn load_model(args: &ModelArgs) -> Result<Model, CliError> {
    match (&args.model, &args.bridge_cmd) {
        (Some(path), _) => {
            let m = NgramModel::load(path)
                .map_err(|e| CliError::from(e).context(format!("loading {}", path.display())))?;
            Ok(Box::new(m))
        }
        (None, Some(cmd)) => {
            let m = BridgeModel::spawn(cmd).map_err(|e| {
                CliError::new(Exit::Backend, e).context(format!("starting bridge `{cmd}`"))
            })?;
            log::info!(
                "bridge model {:?}, vocabulary {}",
                m.model_name(),
                m.vocab_size()
            );
            Ok(Box::new(m))
        }
        (None, None) => Err(CliError::usage(
            "one of --model or --bridge-cmd is required",
        )),
    }
}

fn seed_prefix(model: &Model, text: &str) -> Result<Prefix, CliError> {
    let ids = model
        .tokenize(text)
        .map_err(|e| CliError::from(e).context("tokenizing --seed-text"))?;
    Ok(Prefix::new(ids, model.vocab_size())?)
}

fn codec_config(args: &CodecArgs) -> CodecConfig {
    let divergence = match args.divergence {
        DivergenceArg::Tvd => DivergenceKind::Tvd,
        DivergenceArg::Kl => DivergenceKind::Kl,
    };
    let algorithm = match args.algo {
        AlgoArg::Bins => Algorithm::Bins {
            k: args.k,
            partition_seed: args.partition_seed,
        },
        AlgoArg::Vlc => Algorithm::Vlc,
        AlgoArg::Patient => Algorithm::Patient {
            delta: args.delta,
            divergence,
        },
    };
    let mode = if args.length_header {
        LengthMode::Header32
    } else {
        LengthMode::OutOfBand
    };
    let weights = match args.huffman_weights {
        WeightsArg::Exact => WeightMode::Exact,
        WeightsArg::Quantized => WeightMode::Quantized,
    };
    CodecConfig::new(algorithm)
        .with_length_mode(mode)
        .with_rng_seed(args.rng_seed)
        .with_weight_mode(weights)
}

fn whiten(bits: BitString, key: Option<&str>) -> Result<BitString, CliError> {
    match key {
        Some(k) => Ok(keystream_xor(&bits, k.as_bytes())?),
        None => Ok(bits),
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let corpus = read_input(&args.corpus)?;
    let corpus = String::from_utf8(corpus).map_err(|_| CliError::data("corpus is not UTF-8"))?;
    let tokenization = match args.tokenize {
        TokenizeArg::Words => Tokenization::Words,
        TokenizeArg::Chars => Tokenization::Chars,
    };
    let model = NgramModel::train(
        &corpus,
        tokenization,
        args.order,
        args.alpha,
        &args.specials,
    )?;
    model
        .save(&args.out)
        .map_err(|e| CliError::from(e).context(format!("writing {}", args.out.display())))?;
    eprintln!(
        "trained order-{} model: {} tokens in vocabulary, {} contexts -> {}",
        model.order(),
        model.vocab_size(),
        model.num_contexts(),
        args.out.display()
    );
    Ok(())
}

pub fn hide_cmd(args: HideArgs) -> Result<(), CliError> {
    let diag_path = match (&args.diagnostics_out, &args.out, args.no_diagnostics) {
        (_, _, true) => None,
        (Some(p), _, _) => Some(p.clone()),
        (None, Some(out), _) => Some(sibling(out, ".diag.csv")),
        (None, None, false) => {
            return Err(CliError::usage(
                "stegotext goes to stdout: give --diagnostics-out or --no-diagnostics",
            ))
        }
    };
    let model = load_model(&args.model)?;
    let config = codec_config(&args.codec).with_trailing_tokens(args.trailing_tokens);
    config.validate(model.vocab_size())?;
    let prefix = seed_prefix(&model, &args.codec.seed_text)?;
    let bits = read_bits(&args.bits_in, args.bits_format, args.bits_len)?;
    let payload = whiten(bits, args.codec.xor_key.as_deref())?;

    let result = hide(&model, &config, &prefix, &payload)?;
    let text = render_stegotext(&model, &result.stegotext_tokens, args.stegotext)?;
    write_output(args.out.as_deref(), text.as_bytes())?;
    if let Some(p) = &diag_path {
        write_output(Some(p), diagnostics_csv(&result.diagnostics).as_bytes())?;
    }

    let bound = result.cumulative();
    eprintln!(
        "{}: {} bits in {} tokens; KL {:.4} bits, TVD bound {:.4}",
        config.algorithm.name(),
        result.bits_embedded_total,
        result.stegotext_tokens.len(),
        bound.kl_sum_bits,
        bound.reported()
    );
    Ok(())
}

pub fn seek_cmd(args: SeekArgs) -> Result<(), CliError> {
    if !args.codec.length_header && args.bits_len.is_none() {
        return Err(CliError::usage(
            "--bits-len is required without --length-header",
        ));
    }
    let model = load_model(&args.model)?;
    let config = codec_config(&args.codec);
    config.validate(model.vocab_size())?;
    let prefix = seed_prefix(&model, &args.codec.seed_text)?;
    let raw = read_input(&args.stegotext_in)?;
    let tokens = parse_stegotext(&model, &raw, args.stegotext)?;
    let bits = seek(&model, &config, &prefix, &tokens, args.bits_len)?;
    let bits = whiten(bits, args.codec.xor_key.as_deref())?;
    write_bits(args.bits_out.as_deref(), &bits, args.bits_format)
}

pub fn analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let prefixes = match &args.prefix_file {
        None => PrefixSource::Sampled,
        Some(path) => {
            let raw = read_input(path)?;
            let text =
                String::from_utf8(raw).map_err(|_| CliError::data("prefix file is not UTF-8"))?;
            let list = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| seed_prefix(&model, l))
                .collect::<Result<Vec<_>, _>>()?;
            PrefixSource::Given(list)
        }
    };
    let spec = ExperimentSpec {
        num_prefixes: args.prefixes,
        steps_per_prefix: args.steps,
        bins_k: args.k,
        include_vlc: !args.no_vlc,
        partition_seed: args.partition_seed,
        rng_seed: args.rng_seed,
        prefixes,
    };
    let table = run_experiment(&model, &spec)?;
    write_output(args.out.as_deref(), table.to_csv().as_bytes())?;
    if let Some(p) = &args.summary_out {
        write_output(Some(p), table.summary_csv().as_bytes())?;
    }
    if let Some(p) = &args.histogram_out {
        write_output(Some(p), table.histogram_csv(args.histogram_bins).as_bytes())?;
    }
    Ok(())
}
