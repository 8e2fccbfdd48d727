#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "checkpoint.hpp"
#include "config.hpp"
#include "encoder.hpp"
#include "errors.hpp"
#include "instance.hpp"
#include "lattice.hpp"
#include "packing.hpp"
#include "trainer.hpp"
#include "utf8.hpp"
#include "vocabulary.hpp"

namespace lattice_bert {

namespace fs = std::filesystem;

// Unreadable or malformed inputs; the CLI maps it to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitConfig = 3;

struct PipelineConfig {
  fs::path input;
  fs::path vocab;
  fs::path output;
  fs::path words;       // word-frequency list for build-vocab
  fs::path checkpoint;  // attn-summary
  fs::path resume;      // train-toy
  std::string preset = "toy";
  int phase = 1;
  double mask_ratio = 0.15;
  std::uint64_t seed = 12345;
  int shards = 1;
  std::int64_t steps = 200;
  bool grad_check = false;
  std::size_t max_words = 102000;
  InstanceFormat format = InstanceFormat::text;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  std::string text;  // attn-summary sentence

  // Config errors (exit 3).
  void validate() const {
    if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw ShapeError("mask ratio must lie in (0, 1)");
    if (shards < 1) throw ShapeError("shards must be at least 1");
    if (steps < 0) throw ShapeError("steps must be non-negative");
    if (batch_size == 0) throw ShapeError("batch size must be positive");
    phase_preset(phase);
    EncoderConfig::preset(preset);
  }
};

// ---------------------------------------------------------------------------
// Input helpers

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// FNV-1a 64-bit, hex encoded; identifies inputs in manifests.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

inline Vocabulary load_vocabulary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read vocabulary '" + path.string() + "'");
  try {
    return Vocabulary::load(in);
  } catch (const FormatError& e) {
    throw InputError(e.what());
  }
}

struct Corpus {
  std::vector<std::vector<std::u32string>> documents;  // normalized, non-empty sentences
  std::size_t files = 0;
  std::size_t decode_failures = 0;  // dropped invalid bytes
  std::string digest;               // over file names and contents
};

inline bool is_sentence_end(char32_t c) { return c == U'。' || c == U'！' || c == U'？'; }

// Splits one document into sentences on 。！？ (kept with their sentence)
// and on newlines.
inline std::vector<std::u32string> split_sentences(std::u32string_view doc) {
  std::vector<std::u32string> out;
  std::u32string current;
  auto flush = [&] {
    auto norm = normalize_text(to_utf8(current)).text;
    if (!norm.empty()) out.push_back(std::move(norm));
    current.clear();
  };
  for (char32_t c : doc) {
    if (c == U'\n') {
      flush();
      continue;
    }
    current.push_back(c);
    if (is_sentence_end(c)) flush();
  }
  flush();
  return out;
}

// Documents are separated by files and by blank lines inside a file.
inline Corpus ingest_text(std::string_view bytes, Corpus corpus = {}) {
  auto decoded = decode_utf8(bytes);
  corpus.decode_failures += decoded.invalid_bytes;
  std::u32string text;
  text.reserve(decoded.text.size());
  for (std::size_t i = 0; i < decoded.text.size(); ++i) {
    if (decoded.text[i] == U'\r' && i + 1 < decoded.text.size() && decoded.text[i + 1] == U'\n') continue;
    text.push_back(decoded.text[i] == U'\r' ? U'\n' : decoded.text[i]);
  }
  std::u32string doc;
  auto flush = [&] {
    auto sentences = split_sentences(doc);
    if (!sentences.empty()) corpus.documents.push_back(std::move(sentences));
    doc.clear();
  };
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(U'\n', start);
    if (end == std::u32string::npos) end = text.size();
    const auto line = std::u32string_view(text).substr(start, end - start);
    const bool blank = std::all_of(line.begin(), line.end(), is_whitespace);
    if (blank) {
      flush();
    } else {
      doc.append(line);
      doc.push_back(U'\n');
    }
    start = end + 1;
  }
  flush();
  return corpus;
}

// A file, or every regular file below a directory in path order.
inline Corpus ingest_corpus(const fs::path& path) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    for (const auto& entry : fs::recursive_directory_iterator(path))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(path, ec)) {
    files.push_back(path);
  } else {
    throw InputError("corpus path '" + path.string() + "' does not exist");
  }
  Corpus corpus;
  std::string digest_input;
  for (const auto& file : files) {
    const auto bytes = read_file(file);
    digest_input += file.filename().string();
    digest_input.push_back('\0');
    digest_input += fnv1a_hex(bytes);
    corpus = ingest_text(bytes, std::move(corpus));
    ++corpus.files;
  }
  corpus.digest = fnv1a_hex(digest_input);
  return corpus;
}

inline std::string shard_name(std::string_view stem, int shard, std::string_view ext) {
  std::ostringstream ss;
  ss << stem << '-' << std::setw(5) << std::setfill('0') << shard << ext;
  return ss.str();
}

// Contiguous [begin, end) of n items for shard k of s.
inline std::pair<std::size_t, std::size_t> shard_range(std::size_t n, int k, int s) {
  const auto begin = n * static_cast<std::size_t>(k) / static_cast<std::size_t>(s);
  const auto end = n * static_cast<std::size_t>(k + 1) / static_cast<std::size_t>(s);
  return {begin, end};
}

inline void write_text_file(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << content;
}

// ---------------------------------------------------------------------------
// build-vocab

struct VocabSummary {
  std::size_t characters = 0;
  std::size_t words = 0;
  std::size_t pieces = 0;
  std::size_t specials = 0;
  std::size_t rejected_records = 0;
};

inline VocabSummary cmd_build_vocab(const PipelineConfig& cfg, std::ostream& log) {
  const auto corpus = ingest_corpus(cfg.input);
  std::vector<std::string> records;
  for (const auto& doc : corpus.documents)
    for (const auto& s : doc) records.push_back(to_utf8(s));
  std::map<std::u32string, std::uint64_t> words;
  if (!cfg.words.empty()) {
    std::ifstream in(cfg.words, std::ios::binary);
    if (!in) throw InputError("cannot read word list '" + cfg.words.string() + "'");
    try {
      words = read_word_frequencies(in);
    } catch (const FormatError& e) {
      throw InputError(e.what());
    }
  }
  VocabularyDiagnostics diag;
  const auto vocab = build_vocabulary(records, words, cfg.max_words, &diag);
  std::ostringstream out;
  vocab.save(out);
  write_text_file(cfg.output, out.str());
  VocabSummary s{vocab.count(Granularity::character), vocab.count(Granularity::word),
                 vocab.count(Granularity::word_piece), vocab.count(Granularity::special), diag.rejected_records};
  log << "vocabulary: " << vocab.size() << " entries (char " << s.characters << ", word " << s.words << ", piece "
      << s.pieces << ", special " << s.specials << "), " << corpus.decode_failures << " undecodable bytes dropped\n";
  return s;
}

// ---------------------------------------------------------------------------
// lattice

struct LatticeSummary {
  std::size_t records = 0;
  std::size_t skipped_empty = 0;
};

// One lattice record per non-empty input line, written to
// <output>/lattices-NNNNN.jsonl. Shards are contiguous line ranges, so the
// concatenation of all shard files does not depend on the shard count.
inline LatticeSummary cmd_lattice(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto vocab = load_vocabulary(cfg.vocab);
  const auto matcher = compile_matcher(vocab);
  const auto bytes = read_file(cfg.input);
  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start < bytes.size();) {
    auto end = bytes.find('\n', start);
    if (end == std::string::npos) end = bytes.size();
    lines.push_back(std::string_view(bytes).substr(start, end - start));
    start = end + 1;
  }
  fs::create_directories(cfg.output);

  auto run_shard = [&](int k) {
    const auto [begin, end] = shard_range(lines.size(), k, cfg.shards);
    std::string out;
    LatticeSummary s;
    for (std::size_t i = begin; i < end; ++i) {
      const auto text = normalize_text(lines[i]).text;
      if (text.empty()) {
        ++s.skipped_empty;
        continue;
      }
      out += lattice_to_json(build_lattice(std::u32string_view(text), matcher, vocab));
      out.push_back('\n');
      ++s.records;
    }
    write_text_file(cfg.output / shard_name("lattices", k, ".jsonl"), out);
    return s;
  };
  std::vector<std::future<LatticeSummary>> jobs;
  for (int k = 0; k < cfg.shards; ++k) jobs.push_back(std::async(std::launch::async, run_shard, k));
  LatticeSummary total;
  for (auto& j : jobs) {
    const auto s = j.get();
    total.records += s.records;
    total.skipped_empty += s.skipped_empty;
  }
  nlohmann::ordered_json manifest;
  manifest["schema_version"] = 1;
  manifest["kind"] = "lattices";
  manifest["inputs"] = {{"input_digest", fnv1a_hex(bytes)}, {"vocab_digest", fnv1a_hex(read_file(cfg.vocab))}};
  manifest["shards"] = cfg.shards;
  manifest["records"] = total.records;
  manifest["skipped_empty"] = total.skipped_empty;
  write_text_file(cfg.output / "manifest.json", manifest.dump(2) + "\n");
  log << "lattice: " << total.records << " records, " << total.skipped_empty << " empty lines skipped\n";
  return total;
}

// ---------------------------------------------------------------------------
// make-instances

struct InstancesSummary {
  PackingStats stats;
  double mask_rate = 0.0;
  std::size_t max_tokens = 0;
};

inline InstancesSummary cmd_make_instances(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto vocab = load_vocabulary(cfg.vocab);
  const auto matcher = compile_matcher(vocab);
  const auto corpus = ingest_corpus(cfg.input);
  const auto phase = phase_preset(cfg.phase);
  const GeneratorConfig gen_cfg{phase, cfg.mask_ratio, {}};
  fs::create_directories(cfg.output);
  const std::string ext = cfg.format == InstanceFormat::text ? ".jsonl" : ".bin";

  struct ShardResult {
    PackingStats stats;
    std::map<std::size_t, std::size_t> histogram;
    std::size_t max_tokens = 0;
  };
  auto run_shard = [&](int k) {
    const auto [begin, end] = shard_range(corpus.documents.size(), k, cfg.shards);
    std::ofstream out(cfg.output / shard_name("instances", k, ext), std::ios::binary);
    if (!out) throw InputError("cannot write instance shard");
    InstanceWriter writer(out, cfg.format);
    InstanceGenerator gen(vocab, matcher, gen_cfg);
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(k)));
    ShardResult r;
    for (std::size_t d = begin; d < end; ++d) {
      gen.process_document(corpus.documents[d], rng, [&](PretrainInstance inst) {
        if (inst.size() > phase.token_cap) throw std::logic_error("instance exceeds the token cap");
        ++r.histogram[inst.size() / 16 * 16];
        r.max_tokens = std::max(r.max_tokens, inst.size());
        writer.write(inst);
      });
    }
    r.stats = gen.stats();
    return r;
  };
  std::vector<std::future<ShardResult>> jobs;
  for (int k = 0; k < cfg.shards; ++k) jobs.push_back(std::async(std::launch::async, run_shard, k));

  InstancesSummary summary;
  std::map<std::size_t, std::size_t> histogram;
  auto shard_list = nlohmann::ordered_json::array();
  for (int k = 0; k < cfg.shards; ++k) {
    const auto r = jobs[k].get();
    summary.stats += r.stats;
    summary.max_tokens = std::max(summary.max_tokens, r.max_tokens);
    for (auto [b, c] : r.histogram) histogram[b] += c;
    shard_list.push_back({{"file", shard_name("instances", k, ext)}, {"instances", r.stats.instances}});
  }
  const auto& st = summary.stats;
  summary.mask_rate = st.tokens ? static_cast<double>(st.targets) / static_cast<double>(st.tokens) : 0.0;

  nlohmann::ordered_json manifest;
  manifest["schema_version"] = kInstanceSchemaVersion;
  manifest["kind"] = "pretrain_instances";
  manifest["config"] = {{"phase", cfg.phase},
                        {"char_budget", phase.char_budget},
                        {"token_cap", phase.token_cap},
                        {"mask_ratio", cfg.mask_ratio},
                        {"seed", cfg.seed},
                        {"shards", cfg.shards},
                        {"format", cfg.format == InstanceFormat::text ? "text" : "binary"}};
  manifest["inputs"] = {{"corpus_digest", corpus.digest}, {"vocab_digest", fnv1a_hex(read_file(cfg.vocab))}};
  manifest["shards"] = std::move(shard_list);
  manifest["documents"] = corpus.documents.size();
  manifest["sentences"] = st.sentences;
  manifest["split_sentences"] = st.split_sentences;
  manifest["unsplittable_chunks"] = st.unsplittable_chunks;
  manifest["decode_failures"] = corpus.decode_failures;
  manifest["instances"] = st.instances;
  manifest["tokens"] = st.tokens;
  manifest["targets"] = st.targets;
  manifest["mask_rate"] = summary.mask_rate;
  manifest["max_tokens"] = summary.max_tokens;
  auto hist = nlohmann::ordered_json::object();
  for (auto [b, c] : histogram) hist[std::to_string(b) + "-" + std::to_string(b + 15)] = c;
  manifest["token_histogram"] = std::move(hist);
  write_text_file(cfg.output / "manifest.json", manifest.dump(2) + "\n");
  log << "make-instances: " << st.instances << " instances, mask rate " << summary.mask_rate << ", max tokens "
      << summary.max_tokens << "\n";
  return summary;
}

// ---------------------------------------------------------------------------
// train-toy

// A single instance file, or every instances-*.{jsonl,bin} file of a directory.
inline std::vector<PretrainInstance> load_instances(const fs::path& path) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      const auto name = entry.path().filename().string();
      if (entry.is_regular_file() && name.rfind("instances-", 0) == 0) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(path, ec)) {
    files.push_back(path);
  } else {
    throw InputError("instance path '" + path.string() + "' does not exist");
  }
  std::vector<PretrainInstance> out;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw InputError("cannot read '" + f.string() + "'");
    try {
      auto part = read_instances(in);
      out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    } catch (const FormatError& e) {
      throw InputError(f.string() + ": " + e.what());
    }
  }
  return out;
}

struct TrainSummary {
  std::int64_t first_step = 0;
  std::int64_t last_step = 0;
  BatchReport initial;
  BatchReport final;
  double grad_check_max_rel_error = -1.0;
};

inline std::string metrics_line(std::int64_t step, const BatchReport& r) {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["msp_loss"] = r.msp_loss;
  j["sop_loss"] = r.sop_loss;
  j["msp_acc"] = r.msp_accuracy;
  return j.dump();
}

// Trains for cfg.steps optimizer steps, writing <output>/checkpoint.bin and
// appending one metrics record per step to <output>/metrics.jsonl.
inline TrainSummary cmd_train_toy(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto vocab = load_vocabulary(cfg.vocab);
  const auto instances = load_instances(cfg.input);
  if (instances.empty()) throw InputError("no instances found under '" + cfg.input.string() + "'");

  EncoderConfig enc = EncoderConfig::preset(cfg.preset);
  enc.vocab_size = static_cast<int>(vocab.size());
  for (const auto& inst : instances) {
    if (static_cast<int>(inst.size()) > enc.l_max) throw ShapeError("instance longer than l_max");
    for (auto id : inst.token_ids)
      if (id < 0 || id >= enc.vocab_size) throw ShapeError("instance token id outside the vocabulary");
    for (std::size_t i = 0; i < inst.size(); ++i)
      if (inst.starts[i] >= enc.l_max || inst.ends[i] >= enc.l_max) throw PositionOverflow("instance position beyond l_max");
  }

  AdamConfig opt;
  opt.learning_rate = cfg.learning_rate;
  opt.warmup_steps = std::max<std::int64_t>(1, cfg.steps / 20);
  Rng rng(cfg.seed);
  Checkpoint ckpt;
  if (!cfg.resume.empty()) {
    std::ifstream in(cfg.resume, std::ios::binary);
    if (!in) throw InputError("cannot read checkpoint '" + cfg.resume.string() + "'");
    try {
      ckpt = load_checkpoint(in);
    } catch (const FormatError& e) {
      throw InputError(e.what());
    }
    if (!(ckpt.state.config == enc)) throw ShapeError("checkpoint config does not match preset/vocabulary");
    rng = Rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(ckpt.step)));
  } else {
    ckpt.state = init_encoder<double>(enc, rng);
  }
  opt.total_steps = ckpt.step + cfg.steps;
  Adam<double> adam(enc, opt);
  adam.set_steps_taken(ckpt.step);
  if (ckpt.adam_m && ckpt.adam_v) {
    adam.first_moment() = *ckpt.adam_m;
    adam.second_moment() = *ckpt.adam_v;
  }

  TrainSummary summary;
  summary.first_step = ckpt.step;
  if (cfg.grad_check) {
    auto probe = ckpt.state;
    probe.config.dropout = probe.config.attention_dropout = 0.0;
    const auto report = grad_check(probe, encoder_input(instances.front()), encoder_targets(instances.front()));
    for (const auto& g : report.groups) log << "grad-check " << g.name << " max_rel_err " << g.max_rel_error << "\n";
    summary.grad_check_max_rel_error = report.max_rel_error();
    log << "grad-check max relative error " << summary.grad_check_max_rel_error << "\n";
  }

  fs::create_directories(cfg.output);
  std::ofstream metrics(cfg.output / "metrics.jsonl", cfg.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!metrics) throw InputError("cannot write metrics log");
  summary.initial = evaluate(ckpt.state, std::span(instances).first(std::min<std::size_t>(instances.size(), 64)));

  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t cursor = 0;
  std::vector<PretrainInstance> batch;
  for (std::int64_t s = 0; s < cfg.steps; ++s) {
    batch.clear();
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(instances[order[cursor++]]);
    }
    const auto report = train_step(ckpt.state, adam, std::span<const PretrainInstance>(batch), rng);
    metrics << metrics_line(adam.steps_taken(), report) << '\n';
  }
  ckpt.step = adam.steps_taken();
  ckpt.adam_m = adam.first_moment();
  ckpt.adam_v = adam.second_moment();
  summary.last_step = ckpt.step;
  summary.final = evaluate(ckpt.state, std::span(instances).first(std::min<std::size_t>(instances.size(), 64)));
  std::ofstream out(cfg.output / "checkpoint.bin", std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint");
  save_checkpoint(out, ckpt);
  log << "train-toy: steps " << summary.first_step << " -> " << summary.last_step << ", eval loss "
      << summary.initial.total() << " -> " << summary.final.total() << "\n";
  return summary;
}

// ---------------------------------------------------------------------------
// attn-summary

struct AttentionRow {
  std::u32string surface;
  Span span;
  double score = 0.0;
};

// Mean attention each lattice token receives over all layers, heads and
// lattice-token queries. The sentence is encoded as [CLS] tokens [SEP];
// [CLS]/[SEP] rows are excluded and each remaining row is renormalized over
// the lattice-token columns, so the scores sum to 1.
template <typename Scalar>
std::vector<AttentionRow> attention_summary(const EncoderState<Scalar>& state, const Lattice& lattice) {
  EncoderInput input;
  input.cls_index = 0;
  input.ids.push_back(Vocabulary::kCls);
  input.starts.push_back(0);
  input.ends.push_back(0);
  for (const auto& t : lattice.tokens) {
    input.ids.push_back(t.id < state.config.vocab_size ? t.id : Vocabulary::kUnk);
    input.starts.push_back(t.span.start);
    input.ends.push_back(t.span.end);
  }
  input.ids.push_back(Vocabulary::kSep);
  input.starts.push_back(lattice.n_chars + 1);
  input.ends.push_back(lattice.n_chars + 1);

  const auto fwd = forward(state, input);
  const auto m = static_cast<Eigen::Index>(lattice.tokens.size());
  std::vector<double> received(lattice.tokens.size(), 0.0);
  std::size_t rows = 0;
  for (const auto& layer : fwd.cache.layers) {
    for (const auto& probs : layer.probs) {
      for (Eigen::Index i = 1; i <= m; ++i) {
        const auto row = probs.row(i).segment(1, m);
        const double norm = static_cast<double>(row.sum());
        for (Eigen::Index j = 0; j < m; ++j) received[j] += static_cast<double>(row(j)) / norm;
        ++rows;
      }
    }
  }
  std::vector<AttentionRow> out;
  for (std::size_t j = 0; j < lattice.tokens.size(); ++j)
    out.push_back({lattice.tokens[j].surface, lattice.tokens[j].span, received[j] / static_cast<double>(rows)});
  return out;
}

inline std::vector<AttentionRow> cmd_attn_summary(const PipelineConfig& cfg, std::ostream& out) {
  const auto vocab = load_vocabulary(cfg.vocab);
  const auto matcher = compile_matcher(vocab);
  std::ifstream in(cfg.checkpoint, std::ios::binary);
  if (!in) throw InputError("cannot read checkpoint '" + cfg.checkpoint.string() + "'");
  Checkpoint ckpt;
  try {
    ckpt = load_checkpoint(in);
  } catch (const FormatError& e) {
    throw InputError(e.what());
  }
  std::string sentence = cfg.text;
  if (sentence.empty() && !cfg.input.empty()) {
    std::istringstream lines(read_file(cfg.input));
    std::string line;
    while (std::getline(lines, line))
      if (!normalize_text(line).text.empty()) {
        sentence = line;
        break;
      }
  }
  const auto text = normalize_text(sentence).text;
  if (text.empty()) throw InputError("attn-summary needs a non-empty sentence");
  const auto lattice = build_lattice(std::u32string_view(text), matcher, vocab);
  const auto rows = attention_summary(ckpt.state, lattice);
  out << "token\ts\te\tmean_attention\n";
  for (const auto& r : rows) out << to_utf8(r.surface) << '\t' << r.span.start << '\t' << r.span.end << '\t' << r.score << '\n';
  return rows;
}

}  // namespace lattice_bert
