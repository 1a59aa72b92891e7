#include "stars/style.hpp"

#include "stars/error.hpp"

namespace stars {

TechniqueMatrix decode_techniques(const RowMatrixXf& prob, std::span<const std::string> phonemes, double threshold) {
  if (prob.cols() != kNumTechniques)
    throw DimensionError("technique posteriors have " + std::to_string(prob.cols()) + " columns, expected " +
                         std::to_string(kNumTechniques));
  if (prob.rows() != static_cast<Eigen::Index>(phonemes.size()))
    throw DimensionError("technique posteriors have " + std::to_string(prob.rows()) + " rows for " +
                         std::to_string(phonemes.size()) + " phonemes");
  TechniqueMatrix out = TechniqueMatrix::Zero(prob.rows(), kNumTechniques);
  for (Eigen::Index j = 0; j < prob.rows(); ++j) {
    if (is_silence(phonemes[static_cast<std::size_t>(j)])) continue;
    for (int k = 0; k < kNumTechniques; ++k) out(j, k) = prob(j, k) >= threshold ? 1 : 0;
  }
  return out;
}

GlobalStyle decode_global_style(const std::array<Eigen::VectorXf, kNumStyleAttributes>& style_prob,
                                const StyleVocab& vocab) {
  GlobalStyle style;
  for (int attr = 0; attr < kNumStyleAttributes; ++attr) {
    const auto& p = style_prob[static_cast<std::size_t>(attr)];
    if (p.size() == 0 || static_cast<std::size_t>(p.size()) != vocab.size(attr))
      throw DimensionError("style attribute '" + std::string(kStyleAttributes[static_cast<std::size_t>(attr)]) +
                           "' has " + std::to_string(p.size()) + " probabilities for " +
                           std::to_string(vocab.size(attr)) + " categories");
    Eigen::Index best = 0;
    p.maxCoeff(&best);
    style.index[static_cast<std::size_t>(attr)] = static_cast<int>(best);
  }
  return style;
}

}  // namespace stars
