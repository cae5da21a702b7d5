#include "isf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "isf/parallel.hpp"
#include "isf/text_io.hpp"

namespace isf {

double WerReport::wer() const {
  if (reference_length == 0) return 0.0;
  return 100.0 * static_cast<double>(errors()) / static_cast<double>(reference_length);
}

WerReport& WerReport::operator+=(const WerReport& o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  reference_length += o.reference_length;
  return *this;
}

WerReport edit_distance_wer(std::span<const TokenId> ref, std::span<const TokenId> hyp) {
  if (ref.empty()) throw ConfigError("WER needs a non-empty reference");
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({sub, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  WerReport r;
  r.reference_length = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++r.substitutions;
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++r.deletions;
      --i;
    } else {
      ++r.insertions;
      --j;
    }
  }
  return r;
}

const SweepRow& SweepResult::row(std::string_view name) const {
  for (const auto& r : rows) {
    if (r.name == name) return r;
  }
  throw std::out_of_range("no sweep row named '" + std::string(name) + "'");
}

std::string SweepResult::to_tsv() const {
  std::ostringstream os;
  os << "method\tconfig\twer\tsub\tdel\tins\tref_tokens\tisf_evaluations\tcandidates\n";
  for (const auto& r : rows) {
    os << r.name << '\t' << describe(r.config) << '\t' << format_double(r.wer()) << '\t'
       << r.total.substitutions << '\t' << r.total.deletions << '\t' << r.total.insertions
       << '\t' << r.total.reference_length << '\t' << r.isf_evaluations << '\t'
       << r.candidates_scored << '\n';
  }
  return os.str();
}

std::string SweepResult::deltas_tsv() const {
  std::ostringstream os;
  os << "method\tversus\twer_delta\trelative\n";
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = 0; b < rows.size(); ++b) {
      if (a == b) continue;
      const double delta = rows[a].wer() - rows[b].wer();
      const double rel = rows[b].wer() > 0 ? delta / rows[b].wer() : 0.0;
      os << rows[a].name << '\t' << rows[b].name << '\t' << format_double(delta) << '\t'
         << format_double(rel) << '\n';
    }
  }
  return os.str();
}

std::string SweepResult::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["method"] = r.name;
    row["config"] = describe(r.config);
    row["wer"] = r.wer();
    row["substitutions"] = r.total.substitutions;
    row["deletions"] = r.total.deletions;
    row["insertions"] = r.total.insertions;
    row["reference_tokens"] = r.total.reference_length;
    row["isf_evaluations"] = r.isf_evaluations;
    row["candidates_scored"] = r.candidates_scored;
    auto per = nlohmann::ordered_json::array();
    for (const auto& u : r.per_utterance) per.push_back(u.wer());
    row["per_utterance_wer"] = std::move(per);
    j.push_back(std::move(row));
  }
  return j.dump(2);
}

namespace {

SweepRow decode_all(std::span<const Utterance> test_set, const NGramLM& flm, const Method& m,
                    std::size_t jobs) {
  SweepRow row;
  row.name = m.name;
  row.config = m.config;
  const std::size_t n = test_set.size();
  std::vector<DecodeResult> results(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    try {
      if (m.backward) {
        results[i] = beam_search(test_set[i].grid, flm, *m.backward, m.config);
      } else {
        results[i] = beam_search_without_isf(test_set[i].grid, flm, m.config);
      }
    } catch (const std::exception& e) {
      throw DecodeError("utterance " + test_set[i].id + " (" + m.name + "): " + e.what());
    }
  });
  row.per_utterance.reserve(n);
  row.hypotheses.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& best = results[i].nbest.front().body;
    row.per_utterance.push_back(edit_distance_wer(test_set[i].reference, best));
    row.total += row.per_utterance.back();
    row.hypotheses.push_back(best);
    row.isf_evaluations += results[i].isf_evaluations();
    row.candidates_scored += results[i].candidates_scored();
  }
  return row;
}

}  // namespace

SweepResult run_method_comparison(std::span<const Utterance> test_set, const NGramLM& flm,
                                  std::span<const Method> methods, std::size_t jobs) {
  SweepResult out;
  for (const auto& m : methods) {
    if (!m.backward && m.config.beta != 0.0) {
      throw ConfigError("method '" + m.name + "' has beta > 0 but no backward model");
    }
    out.rows.push_back(decode_all(test_set, flm, m, jobs));
  }
  return out;
}

SweepResult run_length_sweep(std::span<const Utterance> test_set, const NGramLM& flm,
                             const NGramLM& blm, const FusionConfig& base,
                             std::span<const std::size_t> limits, std::size_t jobs) {
  if (base.interval != std::optional<std::size_t>(1)) {
    throw ConfigError("length sweep needs a base config with interval 1");
  }
  std::vector<std::optional<std::size_t>> all(limits.begin(), limits.end());
  all.push_back(std::nullopt);
  std::vector<Method> methods;
  for (const auto& l : all) {
    for (bool post : {true, false}) {
      Method m;
      m.name = "L=" + (l ? std::to_string(*l) : std::string("inf")) + (post ? " post" : " no-post");
      m.config = base;
      m.config.limit = l;
      m.config.post_processing = post;
      m.backward = &blm;
      methods.push_back(std::move(m));
    }
  }
  return run_method_comparison(test_set, flm, methods, jobs);
}

double sign_test_p(std::size_t wins, std::size_t losses) {
  const std::size_t n = wins + losses;
  if (n == 0) return 1.0;
  double p = 0.0;
  for (std::size_t k = wins; k <= n; ++k) {
    p += std::exp(std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
                  std::lgamma(static_cast<double>(n - k) + 1) - static_cast<double>(n) * std::log(2.0));
  }
  return std::min(p, 1.0);
}

}  // namespace isf
