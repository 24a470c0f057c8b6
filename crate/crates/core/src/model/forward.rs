use super::{EmbeddingInjection, ModelParams, ParamVars, Side};
use crate::autodiff::{Tape, Tensor, Var};
use crate::data::{Batch, TokenId, PAD};
use crate::error::{Error, Result};

const MASKED: f64 = -1e9;

static NO_INJECTION: EmbeddingInjection = EmbeddingInjection {
    dropout_mask: None,
    offsets: None,
};

/// Token matrices (row-major, `batch_size * len`) plus per-side injections.
#[derive(Debug, Clone, Copy)]
pub struct ModelInput<'a> {
    pub batch_size: usize,
    pub src_len: usize,
    pub tgt_len: usize,
    pub src: &'a [TokenId],
    pub tgt_in: &'a [TokenId],
    pub src_injection: &'a EmbeddingInjection,
    pub tgt_injection: &'a EmbeddingInjection,
}

impl<'a> ModelInput<'a> {
    pub fn clean(batch: &'a Batch) -> Self {
        ModelInput {
            batch_size: batch.size,
            src_len: batch.src_len,
            tgt_len: batch.tgt_len,
            src: &batch.src,
            tgt_in: &batch.tgt_in,
            src_injection: &NO_INJECTION,
            tgt_injection: &NO_INJECTION,
        }
    }

    pub fn with_injections(self, src: &'a EmbeddingInjection, tgt: &'a EmbeddingInjection) -> Self {
        ModelInput {
            src_injection: src,
            tgt_injection: tgt,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardOutput {
    /// `(batch_size * tgt_len, vocab_tgt)` log-probabilities.
    pub log_probs: Var,
    /// Looked-up source word embeddings `e(x_i)`, before mask/offset/position.
    pub src_embed: Var,
    /// Looked-up target-input word embeddings `e(y_i)`.
    pub tgt_embed: Var,
}

/// Sinusoidal position table of shape `(len, d)`.
pub fn positional_encoding(len: usize, d: usize) -> Tensor {
    let mut data = Vec::with_capacity(len * d);
    for pos in 0..len {
        for j in 0..d {
            let rate = 10000f64.powf((2 * (j / 2)) as f64 / d as f64);
            let angle = pos as f64 / rate;
            data.push(if j % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    Tensor::from_parts(vec![len, d], data)
}

fn check_tokens(ids: &[TokenId], vocab_size: usize) -> Result<()> {
    match ids.iter().find(|&&id| id as usize >= vocab_size) {
        Some(&id) => Err(Error::TokenOutOfRange { id, vocab_size }),
        None => Ok(()),
    }
}

/// Word embeddings for `rows` positions laid out as sequences of `seq_len`:
/// row `i` is `b_i * e(tok_i) + r_i + pos(i mod seq_len)`.
/// Returns the final rows and the raw lookup node.
pub(crate) fn embed_on_tape(
    tape: &mut Tape,
    pv: &ParamVars,
    ids: &[TokenId],
    seq_len: usize,
    side: Side,
    injection: &EmbeddingInjection,
) -> Result<(Var, Var)> {
    let cfg = pv.config();
    let d = cfg.d_model;
    let n = ids.len();
    check_tokens(ids, cfg.vocab_size(side))?;
    let table = pv.get(match side {
        Side::Src => "src_embed",
        Side::Tgt => "tgt_embed",
    });
    let lookup = tape.embedding_lookup(table, ids.iter().map(|&i| i as usize).collect())?;
    let mut x = lookup;
    if let Some(mask) = &injection.dropout_mask {
        if mask.len() != n {
            return Err(Error::shape(
                "embed",
                format!("dropout mask has {} entries for {n} positions", mask.len()),
            ));
        }
        let mut m = Vec::with_capacity(n * d);
        for &b in mask {
            m.extend(std::iter::repeat_n(b, d));
        }
        let mv = tape.constant(Tensor::from_parts(vec![n, d], m))?;
        x = tape.mul(x, mv)?;
    }
    if let Some(off) = &injection.offsets {
        if off.shape() != [n, d] {
            return Err(Error::shape(
                "embed",
                format!("offsets {:?} for ({n}, {d}) positions", off.shape()),
            ));
        }
        let ov = tape.constant(off.clone())?;
        x = tape.add(x, ov)?;
    }
    let pe = positional_encoding(seq_len, d);
    let mut tiled = Vec::with_capacity(n * d);
    while tiled.len() < n * d {
        tiled.extend_from_slice(pe.data());
    }
    tiled.truncate(n * d);
    let pv_ = tape.constant(Tensor::from_parts(vec![n, d], tiled))?;
    let out = tape.add(x, pv_)?;
    Ok((out, lookup))
}

/// Embeds a single sequence outside of any training tape.
pub fn embed(
    params: &ModelParams,
    tokens: &[TokenId],
    side: Side,
    injection: &EmbeddingInjection,
) -> Result<Tensor> {
    if tokens.is_empty() {
        return Err(Error::EmptySource);
    }
    let mut tape = Tape::no_grad();
    let pv = params.register(&mut tape)?;
    let (out, _) = embed_on_tape(&mut tape, &pv, tokens, tokens.len(), side, injection)?;
    Ok(tape.value(out).clone())
}

fn layer_norm(tape: &mut Tape, pv: &ParamVars, x: Var, prefix: &str) -> Result<Var> {
    let g = pv.get(&format!("{prefix}.g"));
    let b = pv.get(&format!("{prefix}.b"));
    tape.layer_norm(x, g, b)
}

fn ffn(tape: &mut Tape, pv: &ParamVars, x: Var, prefix: &str) -> Result<Var> {
    let h = tape.matmul(x, pv.get(&format!("{prefix}.w1")))?;
    let h = tape.relu(h)?;
    tape.matmul(h, pv.get(&format!("{prefix}.w2")))
}

/// Multi-head attention over a batch. `q_in` has `batch * tq` rows and
/// `kv_in` has `batch * tk` rows; `masks[b]` is a `(tq, tk)` additive mask.
#[allow(clippy::too_many_arguments)]
fn attention(
    tape: &mut Tape,
    pv: &ParamVars,
    prefix: &str,
    q_in: Var,
    kv_in: Var,
    batch: usize,
    tq: usize,
    tk: usize,
    masks: &[Var],
) -> Result<Var> {
    let cfg = pv.config();
    let heads = cfg.n_heads;
    let dh = cfg.d_model / heads;
    let q = tape.matmul(q_in, pv.get(&format!("{prefix}.wq")))?;
    let k = tape.matmul(kv_in, pv.get(&format!("{prefix}.wk")))?;
    let v = tape.matmul(kv_in, pv.get(&format!("{prefix}.wv")))?;
    let kt = tape.transpose(k)?;
    let inv_sqrt = 1.0 / (dh as f64).sqrt();
    let mut per_seq = Vec::with_capacity(batch);
    for b in 0..batch {
        let (qr, kr) = (b * tq..(b + 1) * tq, b * tk..(b + 1) * tk);
        let mut per_head = Vec::with_capacity(heads);
        for h in 0..heads {
            let cols = h * dh..(h + 1) * dh;
            let qh = tape.slice(q, qr.clone(), cols.clone())?;
            let kh = tape.slice(kt, cols.clone(), kr.clone())?;
            let vh = tape.slice(v, kr.clone(), cols)?;
            let s = tape.matmul(qh, kh)?;
            let s = tape.scale(s, inv_sqrt)?;
            let s = tape.add(s, masks[b])?;
            let p = tape.softmax(s)?;
            per_head.push(tape.matmul(p, vh)?);
        }
        per_seq.push(if heads == 1 {
            per_head[0]
        } else {
            tape.concat(&per_head, 1)?
        });
    }
    let o = if batch == 1 {
        per_seq[0]
    } else {
        tape.concat(&per_seq, 0)?
    };
    tape.matmul(o, pv.get(&format!("{prefix}.wo")))
}

/// `(tq, tk)` additive masks: key padding, plus causality when `causal`.
fn build_masks(
    tape: &mut Tape,
    keys: &[TokenId],
    batch: usize,
    tq: usize,
    tk: usize,
    causal: bool,
) -> Result<Vec<Var>> {
    (0..batch)
        .map(|b| {
            let key_row = &keys[b * tk..(b + 1) * tk];
            let mut m = vec![0.0; tq * tk];
            for i in 0..tq {
                for (j, &key) in key_row.iter().enumerate() {
                    if key == PAD || (causal && j > i) {
                        m[i * tk + j] = MASKED;
                    }
                }
            }
            tape.constant(Tensor::from_parts(vec![tq, tk], m))
        })
        .collect()
}

fn validate_input(pv: &ParamVars, input: &ModelInput) -> Result<()> {
    let cfg = pv.config();
    let (b, s, t) = (input.batch_size, input.src_len, input.tgt_len);
    if input.src.len() != b * s || input.tgt_in.len() != b * t {
        return Err(Error::shape(
            "forward",
            "token matrices do not match batch dimensions",
        ));
    }
    for len in [s, t] {
        if len > cfg.max_len {
            return Err(Error::TooLong {
                len,
                max_len: cfg.max_len,
            });
        }
    }
    if (0..b).any(|i| input.src[i * s] == PAD) {
        return Err(Error::EmptySource);
    }
    Ok(())
}

pub(crate) struct Encoded {
    pub out: Var,
    pub embed: Var,
    pub cross_masks_keys: Vec<TokenId>,
}

pub(crate) fn encode(tape: &mut Tape, pv: &ParamVars, input: &ModelInput) -> Result<Encoded> {
    let cfg = pv.config().clone();
    let (b, s) = (input.batch_size, input.src_len);
    let (mut x, embed) = embed_on_tape(tape, pv, input.src, s, Side::Src, input.src_injection)?;
    let masks = build_masks(tape, input.src, b, s, s, false)?;
    for l in 0..cfg.n_layers_enc {
        let h = layer_norm(tape, pv, x, &format!("enc.{l}.ln1"))?;
        let a = attention(
            tape,
            pv,
            &format!("enc.{l}.self_attn"),
            h,
            h,
            b,
            s,
            s,
            &masks,
        )?;
        x = tape.add(x, a)?;
        let h = layer_norm(tape, pv, x, &format!("enc.{l}.ln2"))?;
        let f = ffn(tape, pv, h, &format!("enc.{l}.ffn"))?;
        x = tape.add(x, f)?;
    }
    let out = layer_norm(tape, pv, x, "enc.ln_f")?;
    Ok(Encoded {
        out,
        embed,
        cross_masks_keys: input.src.to_vec(),
    })
}

/// Runs the decoder over `tgt_in`; returns `(log_probs, tgt_embed)`.
pub(crate) fn decode(
    tape: &mut Tape,
    pv: &ParamVars,
    enc: &Encoded,
    batch: usize,
    src_len: usize,
    tgt_in: &[TokenId],
    tgt_len: usize,
    injection: &EmbeddingInjection,
) -> Result<(Var, Var)> {
    let cfg = pv.config().clone();
    let (mut x, embed) = embed_on_tape(tape, pv, tgt_in, tgt_len, Side::Tgt, injection)?;
    let self_masks = build_masks(tape, tgt_in, batch, tgt_len, tgt_len, true)?;
    let cross_masks = build_masks(tape, &enc.cross_masks_keys, batch, tgt_len, src_len, false)?;
    for l in 0..cfg.n_layers_dec {
        let h = layer_norm(tape, pv, x, &format!("dec.{l}.ln1"))?;
        let a = attention(
            tape,
            pv,
            &format!("dec.{l}.self_attn"),
            h,
            h,
            batch,
            tgt_len,
            tgt_len,
            &self_masks,
        )?;
        x = tape.add(x, a)?;
        let h = layer_norm(tape, pv, x, &format!("dec.{l}.ln2"))?;
        let a = attention(
            tape,
            pv,
            &format!("dec.{l}.cross_attn"),
            h,
            enc.out,
            batch,
            tgt_len,
            src_len,
            &cross_masks,
        )?;
        x = tape.add(x, a)?;
        let h = layer_norm(tape, pv, x, &format!("dec.{l}.ln3"))?;
        let f = ffn(tape, pv, h, &format!("dec.{l}.ffn"))?;
        x = tape.add(x, f)?;
    }
    let h = layer_norm(tape, pv, x, "dec.ln_f")?;
    let logits = tape.matmul(h, pv.get("out_proj"))?;
    Ok((tape.log_softmax(logits)?, embed))
}

/// Full teacher-forced forward pass on `tape`.
pub fn forward_batch(tape: &mut Tape, pv: &ParamVars, input: &ModelInput) -> Result<ForwardOutput> {
    validate_input(pv, input)?;
    let enc = encode(tape, pv, input)?;
    let (log_probs, tgt_embed) = decode(
        tape,
        pv,
        &enc,
        input.batch_size,
        input.src_len,
        input.tgt_in,
        input.tgt_len,
        input.tgt_injection,
    )?;
    Ok(ForwardOutput {
        log_probs,
        src_embed: enc.embed,
        tgt_embed,
    })
}

/// Log-probabilities `(tgt_in.len(), vocab_tgt)` for one pair; row `j` is
/// `log p(. | tgt_in[..=j], src)`. `src` is the encoder input as given
/// (batches append `</s>`); trailing `<pad>` entries are masked out.
pub fn forward(
    params: &ModelParams,
    src: &[TokenId],
    tgt_in: &[TokenId],
    src_injection: &EmbeddingInjection,
    tgt_injection: &EmbeddingInjection,
) -> Result<Tensor> {
    if src.is_empty() || src[0] == PAD {
        return Err(Error::EmptySource);
    }
    if tgt_in.is_empty() {
        return Err(Error::shape("forward", "empty target input"));
    }
    let mut tape = Tape::no_grad();
    let pv = params.register(&mut tape)?;
    let input = ModelInput {
        batch_size: 1,
        src_len: src.len(),
        tgt_len: tgt_in.len(),
        src,
        tgt_in,
        src_injection,
        tgt_injection,
    };
    let out = forward_batch(&mut tape, &pv, &input)?;
    Ok(tape.value(out.log_probs).clone())
}
