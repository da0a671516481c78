use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use ndarray::{concatenate, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Config, DecodeMode};
use super::manifest::{Manifest, ManifestEntry};
use super::store::{FeatureRecord, FeatureStore, ERRORS_FILE};
use crate::decode::{beam_search, greedy_decode, train_markov, Hypothesis, MarkovModel, StepModel, TokenId};
use crate::dsp::{self, wav::read_wav, NormStats, ProsodyTrack};
use crate::error::{Error, Result};
use crate::eval::{self, divergence_csv, hypothesis_divergence, EvalReport, GpeCounts, PitchTrack};
use crate::prosody::{phoneme_prosody, train_pl_codebook, Alignment, PLProsodyCodebook, PLProsodyRepr};
use crate::vq::{train_codebook, Codebook, TokenVocabulary};

pub const VQ_CODEBOOK_FILE: &str = "vq.vqcb";
pub const VOCAB_FILE: &str = "vocab.json";
pub const PL_CODEBOOK_FILE: &str = "pl.vqcb";
pub const PL_LM_FILE: &str = "pl_lm.json";
pub const VQ_LM_FILE: &str = "vq_lm.json";
pub const HYPOTHESES_FILE: &str = "hypotheses.jsonl";
pub const REPORT_FILE: &str = "report.json";

/// The two autoregressive decoding tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Phoneme-level prosody labels, one per segment.
    Pl,
    /// Acoustic tokens, one per frame.
    Vq,
}

/// One ranked hypothesis for one utterance and task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRecord {
    pub utt: String,
    pub task: Task,
    pub rank: usize,
    pub log_prob: f64,
    /// Emitted tokens; BOS is not stored.
    pub tokens: Vec<TokenId>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractSummary {
    pub records: usize,
    pub failed: usize,
}

#[derive(Debug, Serialize)]
struct UtteranceError<'a> {
    id: &'a str,
    kind: &'a str,
    message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub kind: String,
    pub seed: Option<u64>,
    pub params: BTreeMap<String, f64>,
}

fn write_meta(path: &Path, meta: &ModelMeta) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(meta)?)?;
    Ok(())
}

struct Extracted {
    entry_idx: usize,
    sample_rate: u32,
    segments: Vec<crate::prosody::PhonemeSegment>,
    prosody: ProsodyTrack,
    mel: Array2<f64>,
}

fn extract_one(cfg: &Config, entry: &ManifestEntry, idx: usize) -> Result<Extracted> {
    let spec = cfg.features.frame_spec()?;
    let wave = read_wav(&entry.wav)?;
    let alignment = Alignment::load(&entry.alignment)?;
    if alignment.utt_id != entry.id {
        return Err(Error::Format {
            path: entry.alignment.clone(),
            message: format!("alignment is for {}, manifest says {}", alignment.utt_id, entry.id),
        });
    }
    let prosody = dsp::extract_prosody(&wave, &spec, &cfg.features.pitch())?;
    let mel = dsp::mel_spectrogram(&wave, &spec, cfg.features.n_fft, cfg.features.n_mels)?;
    if prosody.len() != alignment.n_frames {
        return Err(Error::LengthMismatch { left: prosody.len(), right: alignment.n_frames });
    }
    Ok(Extracted {
        entry_idx: idx,
        sample_rate: wave.sample_rate(),
        segments: alignment.segments,
        prosody,
        mel: mel.frames,
    })
}

/// Reads every manifest entry, extracts prosody and mel features, computes
/// normalization statistics on the training split and writes the store.
///
/// Failed utterances are listed in `errors.jsonl`; the store still holds the
/// rest, and the call returns [`Error::UtteranceFailures`].
pub fn cmd_extract(cfg: &Config) -> Result<ExtractSummary> {
    let manifest = Manifest::load(&cfg.manifest_path())?;
    if manifest.entries.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let results: Vec<Result<Extracted>> = manifest
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| extract_one(cfg, e, i))
        .collect();

    let mut ok = Vec::new();
    let mut errors = String::new();
    let mut failed = 0;
    for (entry, res) in manifest.entries.iter().zip(results) {
        match res {
            Ok(x) => ok.push(x),
            Err(e) => {
                failed += 1;
                let line = UtteranceError { id: &entry.id, kind: e.kind(), message: e.to_string() };
                let _ = writeln!(errors, "{}", serde_json::to_string(&line)?);
            }
        }
    }
    for x in &ok {
        if x.sample_rate != cfg.features.sample_rate {
            eprintln!(
                "warning: {} is {} Hz, expected {} Hz; processed without resampling",
                manifest.entries[x.entry_idx].id, x.sample_rate, cfg.features.sample_rate
            );
        }
    }

    let train: Vec<ProsodyTrack> = ok
        .iter()
        .filter(|x| manifest.entries[x.entry_idx].split == "train")
        .map(|x| x.prosody.clone())
        .collect();
    if train.is_empty() && !ok.is_empty() {
        return Err(Error::InsufficientData("no training utterances for normalization statistics".into()));
    }
    let stats = if ok.is_empty() { NormStats::identity() } else { dsp::compute_stats(&train)? };

    let delta_window = cfg.features.delta_window;
    let records = ok
        .into_par_iter()
        .map(|x| {
            let entry = &manifest.entries[x.entry_idx];
            let normalized = dsp::normalize(&x.prosody, &stats);
            let delta = dsp::delta_features(normalized.frames.view(), delta_window)?;
            Ok(FeatureRecord {
                id: entry.id.clone(),
                split: entry.split.clone(),
                sample_rate: x.sample_rate,
                segments: x.segments,
                prosody: x.prosody,
                delta,
                mel: x.mel,
                tokens: Vec::new(),
                pl_labels: Vec::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let store = FeatureStore::new(stats, records);
    let dir = cfg.store_path();
    store.save(&dir)?;
    std::fs::write(dir.join(ERRORS_FILE), errors)?;
    let summary = ExtractSummary { records: store.records.len(), failed };
    if failed > 0 {
        return Err(Error::UtteranceFailures { failed, total: manifest.entries.len() });
    }
    Ok(summary)
}

fn stack_rows<'a>(mats: impl Iterator<Item = &'a Array2<f64>>) -> Result<Array2<f64>> {
    let views: Vec<_> = mats.map(|m| m.view()).collect();
    if views.is_empty() {
        return Err(Error::InsufficientData("no training frames".into()));
    }
    concatenate(Axis(0), &views).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Trains the grouped acoustic codebook on training-split mel frames,
/// quantizes every utterance, and assigns dense token ids over all splits.
pub fn cmd_train_vq(cfg: &Config, seed: Option<u64>) -> Result<usize> {
    let store_dir = cfg.store_path();
    let mut store = FeatureStore::load(&store_dir)?;
    let seed = seed.unwrap_or(cfg.vq.seed);
    let frames = stack_rows(store.split("train").map(|r| &r.mel))?;
    let trained = train_codebook(frames.view(), cfg.vq.groups, cfg.vq.entries_per_group, cfg.vq.max_iters, seed)?;

    let model_dir = cfg.model_path();
    std::fs::create_dir_all(&model_dir)?;
    let bytes = trained.to_bytes();
    std::fs::write(model_dir.join(VQ_CODEBOOK_FILE), &bytes)?;
    // Quantize against exactly what was persisted.
    let codebook = Codebook::read_from(&bytes[..])?;

    let grouped: Vec<Vec<crate::vq::GroupedToken>> = store
        .records
        .par_iter()
        .map(|r| {
            r.mel
                .rows()
                .into_iter()
                .map(|row| codebook.quantize(row.as_slice().expect("standard layout")))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let vocab = TokenVocabulary::build(grouped.iter().flatten());
    for (r, toks) in store.records.iter_mut().zip(&grouped) {
        r.tokens = toks.iter().map(|t| vocab.encode(t.combined_id).expect("observed")).collect();
    }
    vocab.save(&model_dir.join(VOCAB_FILE))?;
    write_meta(
        &model_dir.join("vq.meta.json"),
        &ModelMeta {
            kind: "vq_codebook".into(),
            seed: Some(seed),
            params: BTreeMap::from([
                ("groups".into(), cfg.vq.groups as f64),
                ("entries_per_group".into(), cfg.vq.entries_per_group as f64),
                ("max_iters".into(), cfg.vq.max_iters as f64),
                ("vocab_size".into(), vocab.len() as f64),
            ]),
        },
    )?;
    store.save(&store_dir)?;
    Ok(vocab.len())
}

/// Trains the phoneme-level prosody codebook on training-split segments and
/// labels every segment of every utterance.
pub fn cmd_label_prosody(cfg: &Config, seed: Option<u64>) -> Result<usize> {
    let store_dir = cfg.store_path();
    let mut store = FeatureStore::load(&store_dir)?;
    let seed = seed.unwrap_or(cfg.prosody.seed);
    let reprs_of = |r: &FeatureRecord| -> Result<Vec<PLProsodyRepr>> {
        r.segments.iter().map(|s| phoneme_prosody(r.delta.view(), s)).collect()
    };
    let mut train = Vec::new();
    for r in store.split("train") {
        train.extend(reprs_of(r)?);
    }
    let trained = train_pl_codebook(&train, cfg.prosody.clusters, cfg.prosody.max_iters, seed)?;

    let model_dir = cfg.model_path();
    std::fs::create_dir_all(&model_dir)?;
    let bytes = trained.to_codebook().to_bytes();
    std::fs::write(model_dir.join(PL_CODEBOOK_FILE), &bytes)?;
    let codebook = PLProsodyCodebook::from_codebook(&Codebook::read_from(&bytes[..])?)?;

    let labels: Vec<Vec<TokenId>> = store
        .records
        .par_iter()
        .map(|r| {
            reprs_of(r)?
                .iter()
                .map(|p| codebook.label(p.as_slice()).map(|l| l as TokenId))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    for (r, l) in store.records.iter_mut().zip(labels) {
        r.pl_labels = l;
    }
    write_meta(
        &model_dir.join("pl.meta.json"),
        &ModelMeta {
            kind: "pl_codebook".into(),
            seed: Some(seed),
            params: BTreeMap::from([
                ("clusters".into(), cfg.prosody.clusters as f64),
                ("max_iters".into(), cfg.prosody.max_iters as f64),
                ("training_phonemes".into(), train.len() as f64),
            ]),
        },
    )?;
    store.save(&store_dir)?;
    Ok(codebook.n())
}

fn require_labelled(store: &FeatureStore) -> Result<()> {
    for r in &store.records {
        if r.tokens.len() != r.n_frames() {
            return Err(Error::InsufficientData(format!("{} has no acoustic tokens; run train-vq", r.id)));
        }
        if r.pl_labels.len() != r.segments.len() {
            return Err(Error::InsufficientData(format!("{} has no prosody labels; run label-prosody", r.id)));
        }
    }
    Ok(())
}

/// Trains the two Markov step models on training-split label and token
/// sequences.
pub fn cmd_train_lm(cfg: &Config) -> Result<(usize, usize)> {
    let store = FeatureStore::load(&cfg.store_path())?;
    require_labelled(&store)?;
    let model_dir = cfg.model_path();
    let vocab = TokenVocabulary::load(&model_dir.join(VOCAB_FILE))?;
    let pl = PLProsodyCodebook::load(&model_dir.join(PL_CODEBOOK_FILE))?;

    let pl_seqs: Vec<Vec<TokenId>> = store.split("train").map(|r| r.pl_labels.clone()).collect();
    let vq_seqs: Vec<Vec<TokenId>> = store.split("train").map(|r| r.tokens.clone()).collect();
    let pl_lm = train_markov(&pl_seqs, cfg.lm.order, cfg.lm.lambda, pl.n() + 1)?;
    let vq_lm = train_markov(&vq_seqs, cfg.lm.order, cfg.lm.lambda, vocab.size_with_bos())?;
    pl_lm.save(&model_dir.join(PL_LM_FILE))?;
    vq_lm.save(&model_dir.join(VQ_LM_FILE))?;
    write_meta(
        &model_dir.join("lm.meta.json"),
        &ModelMeta {
            kind: "markov".into(),
            seed: None,
            params: BTreeMap::from([
                ("order".into(), cfg.lm.order as f64),
                ("lambda".into(), cfg.lm.lambda),
                ("pl_vocab_size".into(), pl_lm.vocab_size() as f64),
                ("vq_vocab_size".into(), vq_lm.vocab_size() as f64),
            ]),
        },
    )?;
    Ok((pl_lm.vocab_size(), vq_lm.vocab_size()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeOptions {
    pub mode: DecodeMode,
    pub beam_pl: usize,
    pub beam_vq: usize,
}

impl DecodeOptions {
    pub fn from_config(cfg: &Config, mode: Option<DecodeMode>, beam: Option<usize>) -> Self {
        Self {
            mode: mode.unwrap_or(cfg.decode.mode),
            beam_pl: beam.unwrap_or(cfg.decode.beam_pl),
            beam_vq: beam.unwrap_or(cfg.decode.beam_vq),
        }
    }
}

fn decode_task<M: StepModel>(model: &M, length: usize, mode: DecodeMode, beam: usize) -> Result<Vec<Hypothesis>> {
    if length == 0 {
        return Ok(Vec::new());
    }
    match mode {
        DecodeMode::Greedy => Ok(vec![greedy_decode(model, length)?]),
        DecodeMode::Beam => beam_search(model, length, beam),
    }
}

fn to_records(utt: &str, task: Task, hyps: Vec<Hypothesis>) -> Vec<HypothesisRecord> {
    hyps.into_iter()
        .enumerate()
        .map(|(rank, h)| HypothesisRecord {
            utt: utt.to_string(),
            task,
            rank,
            log_prob: h.log_prob,
            tokens: h.emitted().to_vec(),
        })
        .collect()
}

/// Decodes prosody labels (one per segment) and acoustic tokens (one per
/// frame) for every utterance of the configured split. Lengths come from the
/// reference segmentation.
pub fn cmd_decode(cfg: &Config, opts: DecodeOptions) -> Result<Vec<HypothesisRecord>> {
    let store = FeatureStore::load(&cfg.store_path())?;
    let model_dir = cfg.model_path();
    let vocab = TokenVocabulary::load(&model_dir.join(VOCAB_FILE))?;
    let pl = PLProsodyCodebook::load(&model_dir.join(PL_CODEBOOK_FILE))?;
    let pl_lm = MarkovModel::load(&model_dir.join(PL_LM_FILE))?;
    let vq_lm = MarkovModel::load(&model_dir.join(VQ_LM_FILE))?;
    if vq_lm.vocab_size() != vocab.size_with_bos() {
        return Err(Error::VocabMismatch(format!(
            "acoustic model has {} entries, vocabulary has {} + BOS",
            vq_lm.vocab_size(),
            vocab.len()
        )));
    }
    if pl_lm.vocab_size() != pl.n() + 1 {
        return Err(Error::VocabMismatch(format!(
            "prosody model has {} entries, codebook has {} + BOS",
            pl_lm.vocab_size(),
            pl.n()
        )));
    }
    for r in &store.records {
        if let Some(&t) = r.tokens.iter().find(|&&t| t as usize >= vocab.len()) {
            return Err(Error::VocabMismatch(format!("{} holds token {t} outside the vocabulary", r.id)));
        }
    }

    let targets: Vec<&FeatureRecord> = store.split(&cfg.decode.split).collect();
    let per_utt: Vec<Vec<HypothesisRecord>> = targets
        .par_iter()
        .map(|r| {
            let mut out = to_records(&r.id, Task::Pl, decode_task(&pl_lm, r.segments.len(), opts.mode, opts.beam_pl)?);
            out.extend(to_records(&r.id, Task::Vq, decode_task(&vq_lm, r.n_frames(), opts.mode, opts.beam_vq)?));
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let records: Vec<HypothesisRecord> = per_utt.into_iter().flatten().collect();

    let out_dir = cfg.output_path();
    std::fs::create_dir_all(&out_dir)?;
    write_hypotheses(&out_dir.join(HYPOTHESES_FILE), &records)?;
    Ok(records)
}

pub fn write_hypotheses(path: &Path, records: &[HypothesisRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_hypotheses(path: &Path) -> Result<Vec<HypothesisRecord>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Frame-level pitch realized from per-segment prosody labels: each
/// segment's frames take its centroid's de-normalized log pitch, and are
/// voiced when the centroid's de-normalized voicing probability reaches the
/// threshold. Frames outside segments are unvoiced, with pitch interpolated.
pub fn render_pitch(
    record: &FeatureRecord,
    labels: &[TokenId],
    codebook: &PLProsodyCodebook,
    stats: &NormStats,
    voicing_threshold: f64,
) -> Result<PitchTrack> {
    if labels.len() != record.segments.len() {
        return Err(Error::LengthMismatch { left: labels.len(), right: record.segments.len() });
    }
    let t = record.n_frames();
    let mut pitch: Vec<Option<f64>> = vec![None; t];
    let mut voiced = vec![false; t];
    for (seg, &label) in record.segments.iter().zip(labels) {
        let c = codebook.quantized_prosody(label as usize)?;
        let log_pitch = c[0] * stats.std[0] + stats.mean[0];
        let pov = c[2] * stats.std[2] + stats.mean[2];
        for f in seg.start_frame..seg.end_frame {
            pitch[f] = Some(log_pitch);
            voiced[f] = pov >= voicing_threshold;
        }
    }
    let fallback = stats.mean[0];
    PitchTrack::new(dsp::interpolate_gaps(&pitch, fallback), voiced)
}

fn index_hypotheses<'a>(
    store: &FeatureStore,
    hyps: &'a [HypothesisRecord],
) -> Result<BTreeMap<(&'a str, Task), Vec<&'a HypothesisRecord>>> {
    let mut by_key: BTreeMap<(&str, Task), Vec<&HypothesisRecord>> = BTreeMap::new();
    for h in hyps {
        if store.get(&h.utt).is_none() {
            return Err(Error::MissingReference(h.utt.clone()));
        }
        by_key.entry((h.utt.as_str(), h.task)).or_default().push(h);
    }
    for v in by_key.values_mut() {
        v.sort_by_key(|h| h.rank);
    }
    Ok(by_key)
}

/// Scores the top hypothesis of each utterance against its references:
/// acoustic-token accuracy, prosody-label accuracy, and gross pitch error
/// between the pitch realized from reference labels and from hypothesized
/// labels.
pub fn cmd_evaluate(cfg: &Config) -> Result<EvalReport> {
    let store = FeatureStore::load(&cfg.store_path())?;
    let model_dir = cfg.model_path();
    let codebook = PLProsodyCodebook::load(&model_dir.join(PL_CODEBOOK_FILE))?;
    let out_dir = cfg.output_path();
    let hyps = read_hypotheses(&out_dir.join(HYPOTHESES_FILE))?;
    let by_key = index_hypotheses(&store, &hyps)?;

    let (mut tok_hits, mut tok_total) = (0usize, 0usize);
    let (mut lab_hits, mut lab_total) = (0usize, 0usize);
    let mut gpe = GpeCounts::default();
    for ((utt, task), list) in &by_key {
        let record = store.get(utt).expect("checked above");
        let top = list[0];
        let reference = match task {
            Task::Vq => &record.tokens,
            Task::Pl => &record.pl_labels,
        };
        if reference.len() != top.tokens.len() {
            return Err(Error::LengthMismatch { left: reference.len(), right: top.tokens.len() });
        }
        let hits = reference.iter().zip(&top.tokens).filter(|(a, b)| a == b).count();
        match task {
            Task::Vq => {
                tok_hits += hits;
                tok_total += reference.len();
            }
            Task::Pl => {
                lab_hits += hits;
                lab_total += reference.len();
                let thr = cfg.features.voicing_threshold;
                let r = render_pitch(record, &record.pl_labels, &codebook, &store.stats, thr)?;
                let h = render_pitch(record, &top.tokens, &codebook, &store.stats, thr)?;
                gpe.add(eval::gpe_counts_raw(&r.log_pitch, &r.voiced, &h.log_pitch, &h.voiced, cfg.eval.gpe_threshold)?);
            }
        }
    }
    if tok_total == 0 && lab_total == 0 {
        return Err(Error::MissingReference("no hypotheses to evaluate".into()));
    }
    let ratio = |hits: usize, total: usize| if total == 0 { 0.0 } else { hits as f64 / total as f64 };
    let report = EvalReport {
        gpe: if gpe.voiced == 0 { 0.0 } else { gpe.ratio()? },
        token_accuracy: ratio(tok_hits, tok_total),
        n_voiced_frames: gpe.voiced,
        n_tokens: tok_total,
        pl_label_accuracy: ratio(lab_hits, lab_total),
        n_labels: lab_total,
    };
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(out_dir.join(REPORT_FILE), serde_json::to_vec_pretty(&report)?)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PitchExport {
    pub utt: String,
    pub csv_path: PathBuf,
    pub divergence_path: Option<PathBuf>,
    pub tracks: Vec<PitchTrack>,
    pub divergence: Option<Vec<Vec<f64>>>,
}

/// Long-format CSV: `frame_index,hypothesis_id,log_pitch,voiced`.
pub fn pitch_csv(tracks: &[PitchTrack]) -> String {
    let mut out = String::from("frame_index,hypothesis_id,log_pitch,voiced\n");
    for (h, tr) in tracks.iter().enumerate() {
        for t in 0..tr.len() {
            let _ = writeln!(out, "{t},{h},{},{}", tr.log_pitch[t], u8::from(tr.voiced[t]));
        }
    }
    out
}

/// Writes the pitch contour realized from each prosody-label hypothesis of
/// one utterance, plus their pairwise divergence matrix when there are at
/// least two hypotheses.
pub fn cmd_export_pitch(cfg: &Config, utt: Option<&str>, out: Option<&Path>) -> Result<PitchExport> {
    let store = FeatureStore::load(&cfg.store_path())?;
    let codebook = PLProsodyCodebook::load(&cfg.model_path().join(PL_CODEBOOK_FILE))?;
    let out_dir = cfg.output_path();
    let hyps = read_hypotheses(&out_dir.join(HYPOTHESES_FILE))?;
    let by_key = index_hypotheses(&store, &hyps)?;

    let wanted = utt.map(str::to_string).or_else(|| cfg.export.utterance.clone());
    let (utt, list) = match &wanted {
        Some(u) => {
            let list = by_key
                .get(&(u.as_str(), Task::Pl))
                .ok_or_else(|| Error::MissingReference(format!("no prosody hypotheses for {u}")))?;
            (u.clone(), list)
        }
        None => by_key
            .iter()
            .find(|((_, task), _)| *task == Task::Pl)
            .map(|((u, _), list)| (u.to_string(), list))
            .ok_or_else(|| Error::MissingReference("no prosody hypotheses".into()))?,
    };
    let record = store.get(&utt).expect("indexed hypotheses have records");
    let tracks = list
        .iter()
        .map(|h| render_pitch(record, &h.tokens, &codebook, &store.stats, cfg.features.voicing_threshold))
        .collect::<Result<Vec<_>>>()?;

    let csv_path = out.map(Path::to_path_buf).unwrap_or_else(|| out_dir.join(format!("pitch_{utt}.csv")));
    if let Some(parent) = csv_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&csv_path, pitch_csv(&tracks))?;
    let (divergence, divergence_path) = if tracks.len() >= 2 {
        let m = hypothesis_divergence(&tracks)?;
        let path = csv_path.with_extension("divergence.csv");
        std::fs::write(&path, divergence_csv(&m))?;
        (Some(m), Some(path))
    } else {
        (None, None)
    };
    Ok(PitchExport { utt, csv_path, divergence_path, tracks, divergence })
}

/// Runs `f` on a pool of `threads` workers, or on the global pool when
/// `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}
