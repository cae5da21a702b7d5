#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "isf/acoustic.hpp"
#include "isf/config.hpp"
#include "isf/corpus.hpp"
#include "isf/decoder.hpp"
#include "isf/eval.hpp"
#include "isf/harness.hpp"
#include "isf/ngram_lm.hpp"
#include "isf/parallel.hpp"
#include "isf/random.hpp"
#include "isf/text_io.hpp"
#include "isf/vocab.hpp"

#ifndef ISF_VERSION
#define ISF_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace isf;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2 };

bool verbose = false;

void log(const std::string& msg) {
  if (verbose) std::cerr << "[isf] " << msg << '\n';
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string file_hash(const fs::path& p) { return to_hex(fnv1a64(read_file(p))); }

/// Everything needed to repeat a run: resolved settings, input digests, seed.
class RunManifest {
 public:
  explicit RunManifest(std::string subcommand) : started_(utc_now()) {
    doc_["subcommand"] = std::move(subcommand);
    doc_["version"] = ISF_VERSION;
    doc_["config"] = json::object();
    doc_["inputs"] = json::object();
    doc_["outputs"] = json::array();
  }

  template <class T>
  void set(const std::string& key, const T& value) {
    doc_["config"][key] = value;
  }
  void set_seed(std::uint64_t seed) { doc_["seed"] = seed; }
  void input(const fs::path& p) { doc_["inputs"][p.string()] = file_hash(p); }
  void output(const fs::path& p) { doc_["outputs"].push_back(p.string()); }

  void write(const fs::path& p) {
    if (!doc_.contains("seed")) doc_["seed"] = nullptr;
    doc_["started"] = started_;
    doc_["finished"] = utc_now();
    auto out = open_output(p);
    out << doc_.dump(2) << '\n';
    log("manifest written to " + p.string());
  }

 private:
  json doc_;
  std::string started_;
};

fs::path manifest_path(const std::string& override_path, const fs::path& primary, bool primary_is_dir) {
  if (!override_path.empty()) return override_path;
  if (primary.empty()) return {};
  return primary_is_dir ? primary / "manifest.json" : fs::path(primary.string() + ".manifest.json");
}

void finish_manifest(RunManifest& m, const std::string& override_path, const fs::path& primary,
                     bool primary_is_dir = false) {
  const auto p = manifest_path(override_path, primary, primary_is_dir);
  if (!p.empty()) m.write(p);
}

std::vector<TokenSeq> encode_corpus(const std::vector<std::vector<std::string>>& text, const Vocabulary& vocab) {
  std::vector<TokenSeq> out;
  out.reserve(text.size());
  for (const auto& s : text) out.push_back(vocab.encode(s));
  return out;
}

void require_same_vocab(const std::string& what, const std::string& have, const Vocabulary& vocab) {
  if (have != vocab.hash()) {
    throw ValidationError("vocabulary mismatch: " + what + " " + have + " vs vocabulary " + vocab.hash());
  }
}

// Fusion options shared by decode: preset, config file, ISF_* environment,
// then explicit flags, each overriding the previous.
struct FusionFlags {
  std::string preset = "none";
  std::string config_file;
  std::optional<double> alpha, beta, gamma;
  std::optional<std::size_t> beam;
  std::string interval, limit;
  bool no_post = false;

  void add_to(CLI::App* app) {
    app->add_option("--preset", preset, "Starting weights")
        ->check(CLI::IsMember({"none", "sf", "isf", "combined"}))
        ->capture_default_str();
    app->add_option("--config", config_file, "Flat key=value fusion config")->check(CLI::ExistingFile);
    app->add_option("--alpha", alpha, "Forward LM weight");
    app->add_option("--beta", beta, "Backward LM weight");
    app->add_option("--gamma", gamma, "Length reward per token");
    app->add_option("--beam", beam, "Beam size");
    app->add_option("--interval", interval, "Backward rescoring interval (integer or inf)");
    app->add_option("--limit", limit, "Longest partial hypothesis rescored (integer or inf)");
    app->add_flag("--no-post", no_post, "Skip backward rescoring of completed hypotheses");
  }

  FusionConfig resolve(RunManifest& m) const {
    FusionConfig c = preset == "sf"         ? FusionConfig::shallow_fusion()
                     : preset == "isf"      ? FusionConfig::isf_only()
                     : preset == "combined" ? FusionConfig::combined()
                                            : FusionConfig::no_fusion();
    Settings s;
    if (!config_file.empty()) {
      s = load_settings(config_file);
      m.input(config_file);
    }
    for (const auto& var : apply_env_overrides(s, fusion_keys())) log("override from " + var);
    if (alpha) s["alpha"] = format_double(*alpha);
    if (beta) s["beta"] = format_double(*beta);
    if (gamma) s["gamma"] = format_double(*gamma);
    if (beam) s["beam"] = std::to_string(*beam);
    if (!interval.empty()) s["interval"] = interval;
    if (!limit.empty()) s["limit"] = limit;
    if (no_post) s["post"] = "off";
    apply_fusion_settings(c, s);
    for (const auto& [k, v] : fusion_settings(c)) m.set(k, v);
    return c;
  }
};

// ---------------------------------------------------------------- vocab

struct VocabCmd {
  std::string corpus, out, manifest;
  std::size_t max_size = 100000;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("vocab", "Build a frequency-ordered vocabulary from a text corpus");
    sub->add_option("--corpus", corpus, "Whitespace-tokenized text, one sentence per line")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--max-size", max_size, "Most frequent tokens kept (unk excluded)")->capture_default_str();
    sub->add_option("--out", out, "Vocabulary file")->required();
    sub->callback([this] { run(); });
  }

  void run() {
    RunManifest m("vocab");
    m.input(corpus);
    m.set("max_size", max_size);
    auto v = Vocabulary::build(read_text_corpus(corpus), max_size);
    v.save(out);
    m.output(out);
    log("vocabulary of " + std::to_string(v.size()) + " tokens, hash " + v.hash());
    finish_manifest(m, manifest, out);
  }
};

// ---------------------------------------------------------------- gen-text

struct GenTextCmd {
  std::string out, manifest;
  std::size_t sentences = 1000, vocab_size = 40;
  std::uint64_t seed = 0, language_seed = 7;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("gen-text", "Sample sentences from the seeded synthetic language");
    sub->add_option("--sentences", sentences)->capture_default_str();
    sub->add_option("--vocab-size", vocab_size)->capture_default_str();
    sub->add_option("--seed", seed, "Sampling seed")->capture_default_str();
    sub->add_option("--language-seed", language_seed, "Seed fixing the language itself")->capture_default_str();
    sub->add_option("--out", out)->required();
    sub->callback([this] { run(); });
  }

  void run() {
    RunManifest m("gen-text");
    m.set_seed(seed);
    m.set("sentences", sentences);
    m.set("vocab_size", vocab_size);
    m.set("language_seed", language_seed);
    SyntheticLanguageOptions lo;
    lo.vocab_size = vocab_size;
    SyntheticLanguage lang(lo, language_seed);
    write_text_corpus(out, lang.generate(sentences, seed));
    m.output(out);
    finish_manifest(m, manifest, out);
  }
};

// ---------------------------------------------------------------- gen-pblm-data

struct GenPartialCmd {
  std::string in, out, manifest;
  bool reverse_only = false;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("gen-pblm-data",
                                   "Write reversed sentence prefixes (or reversed sentences) for backward LM training");
    sub->add_option("--in", in, "Forward text, one sentence per line")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out)->required();
    sub->add_flag("--reverse-only", reverse_only, "Only reverse each sentence");
    sub->callback([this] { run(); });
  }

  void run() {
    RunManifest m("gen-pblm-data");
    m.input(in);
    m.set("reverse_only", reverse_only);
    auto text = read_text_corpus(in);
    std::erase_if(text, [](const auto& s) { return s.empty(); });
    auto os = open_output(out);
    CorpusStats written;
    auto emit = [&](std::span<const std::string> s) {
      os << join(s) << '\n';
      written.add(s.size());
    };
    using Sentences = std::span<const std::vector<std::string>>;
    if (reverse_only) {
      for (const auto& s : reverse_corpus(Sentences(text))) emit(s);
    } else {
      for_each_partial(Sentences(text), [&](std::span<const std::string> p) { emit(p); });
    }
    os.close();
    const auto in_stats = corpus_stats(Sentences(text));
    std::cerr << "input: " << in_stats.sentence_count << " sentences, " << in_stats.token_count
              << " tokens; output: " << written.sentence_count << " sentences, " << written.token_count
              << " tokens\n";
    m.output(out);
    finish_manifest(m, manifest, out);
  }
};

// ---------------------------------------------------------------- train-lm

struct TrainCmd {
  std::string corpus, vocab, out, orientation = "fwd", manifest;
  int order = 3;
  std::vector<double> lambdas;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("train-lm", "Train an interpolated n-gram model");
    sub->add_option("--corpus", corpus, "Text in the model's reading order (reversed for bwd)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--vocab", vocab)->required()->check(CLI::ExistingFile);
    sub->add_option("--order", order)->capture_default_str();
    sub->add_option("--lambda", lambdas, "Interpolation weights, lowest order first (default 0.1 0.3 0.5 for order 3)");
    sub->add_option("--orientation", orientation)->check(CLI::IsMember({"fwd", "bwd"}))->capture_default_str();
    sub->add_option("--out", out)->required();
    sub->callback([this] { run(); });
  }

  void run() {
    RunManifest m("train-lm");
    m.input(corpus);
    m.input(vocab);
    NGramOptions opt;
    opt.order = order;
    opt.orientation = parse_orientation(orientation);
    if (!lambdas.empty()) {
      opt.lambdas = lambdas;
    } else if (order != 3) {
      throw ConfigError("--lambda is required when --order is not 3");
    }
    m.set("order", order);
    m.set("lambdas", opt.lambdas);
    m.set("orientation", orientation);
    auto v = Vocabulary::load(vocab);
    auto text = read_text_corpus(corpus);
    std::erase_if(text, [](const auto& s) { return s.empty(); });
    auto lm = NGramLM::train(encode_corpus(text, v), v, opt);
    lm.save(out);
    m.output(out);
    finish_manifest(m, manifest, out);
  }
};

// ---------------------------------------------------------------- ppl

struct PplCmd {
  std::string lm, data, vocab, manifest;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("ppl", "Token perplexity of a model on a text file");
    sub->add_option("--lm", lm)->required()->check(CLI::ExistingFile);
    sub->add_option("--data", data, "Text in the model's reading order")->required()->check(CLI::ExistingFile);
    sub->add_option("--vocab", vocab)->required()->check(CLI::ExistingFile);
    sub->callback([this] { run(); });
  }

  void run() {
    RunManifest m("ppl");
    m.input(lm);
    m.input(data);
    m.input(vocab);
    auto v = Vocabulary::load(vocab);
    auto model = NGramLM::load(lm);
    require_same_vocab("model", model.vocab_hash(), v);
    auto text = read_text_corpus(data);
    std::erase_if(text, [](const auto& s) { return s.empty(); });
    const auto r = evaluate_perplexity(model, encode_corpus(text, v));
    std::cout << "# predictions = tokens + one terminal symbol per sentence; the start symbol is not predicted\n"
              << "sentences\tpredictions\tlogprob\tperplexity\n"
              << r.sentences << '\t' << r.predictions << '\t' << format_double(r.total_logprob) << '\t'
              << format_double(r.perplexity()) << '\n';
    finish_manifest(m, manifest, {});
  }
};

// ---------------------------------------------------------------- synth

struct SynthCmd {
  std::string ref_file, vocab, out_dir, manifest;
  double eps = 0.4;
  std::size_t spread = 3, slack = 10;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("synth", "Generate noisy posterior grids for reference sentences");
    sub->add_option("--ref-file", ref_file, "Reference text, one utterance per line")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--vocab", vocab)->required()->check(CLI::ExistingFile);
    sub->add_option("--eps", eps, "Mean mass moved off the reference token")->capture_default_str();
    sub->add_option("--spread", spread, "Confusable tokens per step")->capture_default_str();
    sub->add_option("--slack", slack, "Extra eos rows after the reference")->capture_default_str();
    sub->add_option("--seed", seed)->capture_default_str();
    sub->add_option("--out-dir", out_dir)->required();
    sub->callback([this] { run(); });
  }

  void run() {
    RunManifest m("synth");
    m.input(ref_file);
    m.input(vocab);
    m.set_seed(seed);
    m.set("eps", eps);
    m.set("spread", spread);
    m.set("slack", slack);
    auto v = Vocabulary::load(vocab);
    auto text = read_text_corpus(ref_file);
    fs::create_directories(out_dir);
    auto refs = open_output(fs::path(out_dir) / "refs.tsv");
    std::size_t n = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i].empty()) continue;
      char id[32];
      std::snprintf(id, sizeof id, "utt%04zu", i);
      SynthOptions so;
      so.noise = eps;
      so.spread = spread;
      so.slack = slack;
      so.seed = mix_seed(seed, 1000 + i);
      synth_grid(v.encode(text[i]), v, so).save(fs::path(out_dir) / (std::string(id) + ".grid"));
      refs << id << '\t' << join(text[i]) << '\n';
      ++n;
    }
    m.output(fs::path(out_dir) / "refs.tsv");
    log(std::to_string(n) + " grids written to " + out_dir);
    finish_manifest(m, manifest, out_dir, true);
  }
};

// ---------------------------------------------------------------- decode

std::vector<std::pair<std::string, fs::path>> list_grids(const fs::path& dir) {
  std::vector<std::pair<std::string, fs::path>> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".grid") out.emplace_back(e.path().stem().string(), e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw ValidationError("no .grid files in " + dir.string());
  return out;
}

struct DecodeCmd {
  std::string grids, flm, blm, vocab, out, stats, manifest;
  std::size_t nbest = 1, jobs = 1;
  FusionFlags fusion;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("decode", "Beam search over posterior grids with forward and backward LM fusion");
    sub->add_option("--grids", grids, "Directory of .grid files")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--flm", flm, "Forward model")->required()->check(CLI::ExistingFile);
    sub->add_option("--blm", blm, "Backward model (needed when beta > 0 or post-processing applies)")
        ->check(CLI::ExistingFile);
    sub->add_option("--vocab", vocab)->required()->check(CLI::ExistingFile);
    sub->add_option("--nbest", nbest)->capture_default_str();
    sub->add_option("--out", out, "Output TSV: utterance, rank, score, hypothesis")->required();
    sub->add_option("--stats", stats, "Per-step search counters as JSON");
    sub->add_option("--jobs", jobs, "Utterances decoded in parallel")->capture_default_str();
    fusion.add_to(sub);
    sub->callback([this] { run(); });
  }

  void run() {
    RunManifest m("decode");
    const auto config = fusion.resolve(m);
    m.set("nbest", nbest);
    m.input(flm);
    m.input(vocab);
    if (!blm.empty()) m.input(blm);
    auto v = Vocabulary::load(vocab);
    auto f = NGramLM::load(flm);
    std::optional<NGramLM> b;
    if (!blm.empty()) b = NGramLM::load(blm);
    const bool needs_backward = config.beta != 0.0;
    if (needs_backward && !b) throw ConfigError("beta > 0 needs --blm");
    require_same_vocab("forward model", f.vocab_hash(), v);
    if (b) require_same_vocab("backward model", b->vocab_hash(), v);

    const auto files = list_grids(grids);
    std::vector<PosteriorGrid> loaded;
    for (const auto& [id, path] : files) {
      m.input(path);
      loaded.push_back(PosteriorGrid::load(path));
      check_compatible(loaded.back(), f, b && needs_backward ? &*b : nullptr);
    }

    std::vector<std::optional<DecodeResult>> results(files.size());
    parallel_for(files.size(), jobs, [&](std::size_t i) {
      results[i] = needs_backward ? beam_search(loaded[i], f, *b, config) : beam_search_without_isf(loaded[i], f, config);
    });

    auto os = open_output(out);
    os << "utterance\trank\tscore\thypothesis\n";
    json js = json::object();
    std::size_t isf_total = 0, cand_total = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
      const auto& r = *results[i];
      for (std::size_t k = 0; k < std::min(nbest, r.nbest.size()); ++k) {
        os << files[i].first << '\t' << k + 1 << '\t' << format_double(r.nbest[k].total_score) << '\t'
           << v.to_text(r.nbest[k].body) << '\n';
      }
      json steps = json::array();
      for (const auto& s : r.steps) {
        steps.push_back({{"step", s.step},
                         {"candidates_scored", s.candidates_scored},
                         {"isf_evaluations", s.isf_evaluations},
                         {"hypotheses_ended", s.hypotheses_ended},
                         {"isf_step", s.isf_step}});
      }
      js[files[i].first] = {{"isf_evaluations", r.isf_evaluations()},
                            {"candidates_scored", r.candidates_scored()},
                            {"hypotheses_ended", r.hypotheses_ended()},
                            {"steps", std::move(steps)}};
      isf_total += r.isf_evaluations();
      cand_total += r.candidates_scored();
    }
    os.close();
    m.output(out);
    if (!stats.empty()) {
      json doc = {{"config", describe(config)},
                  {"totals", {{"isf_evaluations", isf_total}, {"candidates_scored", cand_total}}},
                  {"utterances", std::move(js)}};
      auto ss = open_output(stats);
      ss << doc.dump(2) << '\n';
      m.output(stats);
    }
    log("decoded " + std::to_string(files.size()) + " utterances with " + describe(config));
    finish_manifest(m, manifest, out);
  }
};

// ---------------------------------------------------------------- score

std::map<std::string, std::vector<std::string>> read_id_text(const fs::path& p, bool* decode_format) {
  auto in = open_input(p);
  std::map<std::string, std::vector<std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  bool decoded = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.rfind("utterance\trank\t", 0) == 0) {
      decoded = true;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, '\t');) cols.push_back(c);
    if (decoded) {
      if (cols.size() < 3) throw ParseError(p.string(), lineno, "expected utterance, rank, score, hypothesis");
      if (cols[1] != "1") continue;
      out[cols[0]] = split_whitespace(cols.size() > 3 ? cols[3] : "");
    } else {
      if (cols.empty()) throw ParseError(p.string(), lineno, "expected utterance id");
      if (!out.emplace(cols[0], split_whitespace(cols.size() > 1 ? cols[1] : "")).second) {
        throw ParseError(p.string(), lineno, "duplicate utterance '" + cols[0] + "'");
      }
    }
  }
  if (decode_format) *decode_format = decoded;
  return out;
}

struct ScoreCmd {
  std::string ref, hyp, out, manifest;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("score", "Word error rate of hypotheses against references");
    sub->add_option("--ref", ref, "id<TAB>tokens per line")->required()->check(CLI::ExistingFile);
    sub->add_option("--hyp", hyp, "decode output TSV (rank 1 is scored) or id<TAB>tokens")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Per-utterance JSON report");
    sub->callback([this] { run(); });
  }

  void run() {
    RunManifest m("score");
    m.input(ref);
    m.input(hyp);
    const auto refs = read_id_text(ref, nullptr);
    const auto hyps = read_id_text(hyp, nullptr);
    // Shared id space for both sides; token ids only need to be consistent.
    std::map<std::string, TokenId> ids;
    auto encode = [&](const std::vector<std::string>& toks) {
      TokenSeq s;
      for (const auto& t : toks) s.push_back(ids.emplace(t, static_cast<TokenId>(ids.size())).first->second);
      return s;
    };
    WerReport total;
    json per = json::object();
    for (const auto& [id, r] : refs) {
      auto it = hyps.find(id);
      if (it == hyps.end()) throw ValidationError("no hypothesis for utterance '" + id + "'");
      const auto w = edit_distance_wer(encode(r), encode(it->second));
      total += w;
      per[id] = {{"substitutions", w.substitutions}, {"deletions", w.deletions}, {"insertions", w.insertions},
                 {"reference_tokens", w.reference_length}};
    }
    std::cout << "utterances\tS\tD\tI\tN\twer\n"
              << refs.size() << '\t' << total.substitutions << '\t' << total.deletions << '\t' << total.insertions
              << '\t' << total.reference_length << '\t' << format_double(total.wer()) << '\n';
    if (!out.empty()) {
      json doc = {{"wer", total.wer()},
                  {"substitutions", total.substitutions},
                  {"deletions", total.deletions},
                  {"insertions", total.insertions},
                  {"reference_tokens", total.reference_length},
                  {"utterances", std::move(per)}};
      auto os = open_output(out);
      os << doc.dump(2) << '\n';
      m.output(out);
    }
    finish_manifest(m, manifest, out);
  }
};

// ---------------------------------------------------------------- sweep

std::vector<std::string> split_list(const std::string& s) {
  std::string spaced = s;
  std::replace(spaced.begin(), spaced.end(), ',', ' ');
  return split_whitespace(spaced);
}

struct SweepCmd {
  std::string spec, out_dir, manifest;
  std::size_t jobs = 1;
  std::vector<std::uint64_t> seeds;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("sweep", "Compare decoding methods listed in a spec file");
    sub->add_option("--spec", spec, "Spec file: global data settings, then one [section] per method")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out-dir", out_dir)->required();
    sub->add_option("--jobs", jobs, "Utterances decoded in parallel")->capture_default_str();
    sub->add_option("--seed", seeds, "Override the spec's seeds");
    sub->callback([this] { run(); });
  }

  ExperimentOptions experiment_options(const Settings& g) const {
    ExperimentOptions o;
    auto count = [&](const char* key, std::size_t& dst) {
      if (auto it = g.find(key); it != g.end()) {
        auto v = parse_count_or_inf(it->second, key);
        if (!v) throw ConfigError(std::string(key) + " must be finite");
        dst = *v;
      }
    };
    count("lm_sentences", o.lm_sentences);
    count("heldout_sentences", o.heldout_sentences);
    count("utterances", o.test_utterances);
    count("spread", o.spread);
    count("vocab_size", o.language.vocab_size);
    std::size_t order = static_cast<std::size_t>(o.lm.order);
    count("order", order);
    o.lm.order = static_cast<int>(order);
    if (auto it = g.find("noise"); it != g.end()) o.noise = parse_double(it->second);
    if (auto it = g.find("lambdas"); it != g.end()) {
      o.lm.lambdas.clear();
      for (const auto& x : split_list(it->second)) o.lm.lambdas.push_back(parse_double(x));
    }
    return o;
  }

  void run() {
    static const std::set<std::string> kGlobal{"seeds", "language_seed", "lm_sentences", "heldout_sentences",
                                               "utterances", "noise", "spread", "vocab_size", "order", "lambdas"};
    RunManifest m("sweep");
    m.input(spec);
    const auto file = load_spec_file(spec);
    for (const auto& [k, _] : file.global) {
      if (!kGlobal.count(k)) throw ConfigError("unknown global setting '" + k + "' in " + spec);
    }
    if (file.sections.empty()) throw ConfigError("spec file defines no methods");
    const auto opts = experiment_options(file.global);
    std::uint64_t language_seed = 7;
    if (auto it = file.global.find("language_seed"); it != file.global.end()) {
      language_seed = static_cast<std::uint64_t>(parse_int(it->second));
    }
    auto run_seeds = seeds;
    if (run_seeds.empty()) {
      if (auto it = file.global.find("seeds"); it != file.global.end()) {
        for (const auto& s : split_list(it->second)) run_seeds.push_back(static_cast<std::uint64_t>(parse_int(s)));
      } else {
        run_seeds.push_back(0);
      }
    }
    for (const auto& [k, v] : file.global) m.set(k, v);
    m.set("seeds", run_seeds);

    struct MethodSpec {
      std::string name;
      FusionConfig config;
      std::string backward;
    };
    std::vector<MethodSpec> specs;
    for (const auto& [name, settings] : file.sections) {
      MethodSpec ms{name, FusionConfig::no_fusion(), "pblm"};
      apply_fusion_settings(ms.config, settings, {"backward"});
      if (auto it = settings.find("backward"); it != settings.end()) ms.backward = it->second;
      if (ms.backward != "blm" && ms.backward != "pblm" && ms.backward != "none") {
        throw ConfigError("method '" + name + "': backward must be blm, pblm or none");
      }
      if (ms.backward == "none" && ms.config.beta != 0.0) {
        throw ConfigError("method '" + name + "' has beta > 0 but backward = none");
      }
      if (ms.config.beta == 0.0) ms.backward = "none";
      json cfg = json::object();
      for (const auto& [k, v] : fusion_settings(ms.config)) cfg[k] = v;
      cfg["backward"] = ms.backward;
      m.set("method " + name, cfg);
      specs.push_back(std::move(ms));
    }

    fs::create_directories(out_dir);
    std::vector<SweepResult> results;
    for (auto seed : run_seeds) {
      log("seed " + std::to_string(seed) + ": building data and models");
      const auto ex = build_experiment(opts, seed, language_seed);
      std::vector<Method> methods;
      for (const auto& s : specs) {
        const NGramLM* bwd = s.backward == "blm" ? &ex.blm : s.backward == "pblm" ? &ex.pblm : nullptr;
        methods.push_back({s.name, s.config, bwd});
      }
      results.push_back(run_method_comparison(ex.test_set, ex.flm, methods, jobs));
      const auto stem = fs::path(out_dir) / ("seed" + std::to_string(seed));
      {
        auto os = open_output(stem.string() + ".tsv");
        os << results.back().to_tsv();
        auto js = open_output(stem.string() + ".json");
        js << results.back().to_json() << '\n';
        auto ds = open_output(stem.string() + ".deltas.tsv");
        ds << results.back().deltas_tsv();
      }
      m.output(stem.string() + ".tsv");
      m.output(stem.string() + ".json");
      m.output(stem.string() + ".deltas.tsv");
    }

    auto summary = open_output(fs::path(out_dir) / "summary.tsv");
    summary << "method\tconfig\tmean_wer";
    for (auto s : run_seeds) summary << "\twer_seed" << s;
    summary << "\tisf_evaluations\tcandidates_scored\n";
    for (std::size_t k = 0; k < specs.size(); ++k) {
      double sum = 0.0;
      std::size_t isf = 0, cand = 0;
      for (const auto& r : results) {
        sum += r.rows[k].wer();
        isf += r.rows[k].isf_evaluations;
        cand += r.rows[k].candidates_scored;
      }
      summary << specs[k].name << '\t' << describe(specs[k].config) << " backward=" << specs[k].backward << '\t'
              << format_double(sum / static_cast<double>(results.size()));
      for (const auto& r : results) summary << '\t' << format_double(r.rows[k].wer());
      summary << '\t' << isf << '\t' << cand << '\n';
    }
    summary.close();
    m.output(fs::path(out_dir) / "summary.tsv");
    std::cout << read_file(fs::path(out_dir) / "summary.tsv");
    finish_manifest(m, manifest, out_dir, true);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Beam search with forward and iterative backward language model fusion"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ISF_VERSION);
  std::string manifest;
  app.add_flag("-v,--verbose", verbose, "Progress messages on stderr");
  app.add_option("--manifest", manifest, "Write the run manifest here instead of next to the outputs");

  VocabCmd vocab;
  GenTextCmd gen_text;
  GenPartialCmd gen_partial;
  TrainCmd train;
  PplCmd ppl;
  SynthCmd synth;
  DecodeCmd decode;
  ScoreCmd score;
  SweepCmd sweep;
  vocab.add(app);
  gen_text.add(app);
  gen_partial.add(app);
  train.add(app);
  ppl.add(app);
  synth.add(app);
  decode.add(app);
  score.add(app);
  sweep.add(app);
  app.parse_complete_callback([&] {
    for (auto* m : {&vocab.manifest, &gen_text.manifest, &gen_partial.manifest, &train.manifest, &ppl.manifest,
                    &synth.manifest, &decode.manifest, &score.manifest, &sweep.manifest}) {
      *m = manifest;
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    std::cerr << "error: " << e.what() << "\n\n" << (subs.empty() ? app.help() : subs.front()->help());
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
