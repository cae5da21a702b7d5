#include "isf/fusion.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "isf/text_io.hpp"

namespace isf {

void FusionConfig::validate() const {
  auto check_weight = [](double w, const char* name) {
    if (!std::isfinite(w) || w < 0.0) {
      throw ConfigError(std::string(name) + " must be finite and non-negative");
    }
  };
  check_weight(alpha, "alpha");
  check_weight(beta, "beta");
  check_weight(gamma, "gamma");
  if (beam < 1) throw ConfigError("beam must be >= 1");
  if (interval && *interval < 1) throw ConfigError("interval must be >= 1 (or inf)");
}

FusionConfig FusionConfig::shallow_fusion() {
  FusionConfig c;
  c.alpha = 0.5;
  c.beta = 0.0;
  c.gamma = 2.0;
  return c;
}

FusionConfig FusionConfig::isf_only() {
  FusionConfig c;
  c.alpha = 0.0;
  c.beta = 0.5;
  c.gamma = 2.0;
  return c;
}

FusionConfig FusionConfig::combined() {
  FusionConfig c;
  c.alpha = 0.5;
  c.beta = 0.5;
  c.gamma = 5.0;
  return c;
}

FusionConfig FusionConfig::no_fusion() { return FusionConfig{}; }

double backward_sequence_score(const NGramLM& blm, std::span<const TokenId> body) {
  if (blm.orientation() != Orientation::kBackward) {
    throw std::invalid_argument("backward_sequence_score needs a backward model");
  }
  std::vector<TokenId> ctx;
  ctx.reserve(body.size() + 1);
  ctx.push_back(Vocabulary::kEos);
  double total = 0.0;
  for (std::size_t i = body.size(); i-- > 0;) {
    total += blm.logprob(body[i], ctx);
    ctx.push_back(body[i]);
  }
  total += blm.logprob(Vocabulary::kSos, ctx);
  return total;
}

BlmBookkeeping initial_bookkeeping(const NGramLM& blm) {
  return {backward_sequence_score(blm, {}), 0};
}

IsfDelta isf_delta(const NGramLM& blm, std::span<const TokenId> body, std::size_t step,
                   const BlmBookkeeping& book) {
  if (book.last_step >= step) {
    throw std::invalid_argument("isf_delta: step " + std::to_string(step) +
                                " does not follow the last application at step " +
                                std::to_string(book.last_step));
  }
  const double score = backward_sequence_score(blm, body);
  return {score - book.last_score, {score, step}};
}

bool isf_applies(const FusionConfig& config, std::size_t step, bool is_final) {
  if (is_final && config.post_processing) return true;
  if (!config.interval) return false;
  if (config.limit && step > *config.limit) return false;
  return step % *config.interval == 0;
}

std::string describe(const FusionConfig& c) {
  std::ostringstream os;
  os << "alpha=" << format_double(c.alpha) << " beta=" << format_double(c.beta)
     << " gamma=" << format_double(c.gamma) << " beam=" << c.beam
     << " interval=" << (c.interval ? std::to_string(*c.interval) : "inf")
     << " limit=" << (c.limit ? std::to_string(*c.limit) : "inf")
     << " post=" << (c.post_processing ? "on" : "off");
  if (c.per_parent_first_prune) os << " per_parent_first_prune=on";
  return os.str();
}

}  // namespace isf
