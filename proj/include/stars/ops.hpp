#pragma once

// Inference-time tensor operators: FreqMOE, vector quantization, boundary pooling,
// length regulation, and the CTC / CE / BCE losses. Everything is templated on the
// scalar type and accepts any dense Eigen expression.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace stars::ops {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

inline constexpr double kProbFloor = 1e-10;

/// y = x W + b, applied row-wise.
template <typename Scalar>
struct AffineExpert {
  Matrix<Scalar> weight;
  RowVector<Scalar> bias;

  template <typename Derived>
  Matrix<Scalar> operator()(const Eigen::MatrixBase<Derived>& x) const {
    return (x * weight).rowwise() + bias;
  }
};

template <typename Scalar>
struct ExpertBank {
  std::vector<AffineExpert<Scalar>> experts;

  std::size_t size() const { return experts.size(); }

  static ExpertBank identity(std::size_t num_experts, Eigen::Index chunk_dim) {
    ExpertBank bank;
    for (std::size_t k = 0; k < num_experts; ++k)
      bank.experts.push_back({Matrix<Scalar>::Identity(chunk_dim, chunk_dim), RowVector<Scalar>::Zero(chunk_dim)});
    return bank;
  }
};

/// Concat_k E_k(X^(k)): X is split along columns into K equal chunks, chunk k goes through expert k.
template <typename Derived>
Matrix<typename Derived::Scalar> freq_moe(const Eigen::MatrixBase<Derived>& x,
                                          const ExpertBank<typename Derived::Scalar>& bank) {
  using Scalar = typename Derived::Scalar;
  const auto k = static_cast<Eigen::Index>(bank.size());
  if (k == 0) throw std::invalid_argument("freq_moe: no experts");
  if (x.cols() % k != 0)
    throw std::invalid_argument("freq_moe: feature dimension " + std::to_string(x.cols()) +
                                " is not divisible by " + std::to_string(k) + " experts");
  const Eigen::Index chunk = x.cols() / k;

  std::vector<Matrix<Scalar>> outs;
  Eigen::Index width = 0;
  for (Eigen::Index e = 0; e < k; ++e) {
    const auto& expert = bank.experts[static_cast<std::size_t>(e)];
    if (expert.weight.rows() != chunk || expert.bias.size() != expert.weight.cols())
      throw std::invalid_argument("freq_moe: expert " + std::to_string(e) + " has mismatched shape");
    outs.push_back(expert(x.middleCols(e * chunk, chunk)));
    width += outs.back().cols();
  }
  Matrix<Scalar> y(x.rows(), width);
  Eigen::Index col = 0;
  for (auto& o : outs) {
    y.middleCols(col, o.cols()) = o;
    col += o.cols();
  }
  return y;
}

/// K x D table of code vectors.
template <typename Scalar>
struct Codebook {
  Matrix<Scalar> entries;

  Eigen::Index size() const { return entries.rows(); }
};

template <typename Scalar>
struct Quantized {
  Matrix<Scalar> values;
  std::vector<Eigen::Index> indices;
  /// mean over rows and dimensions of (S - sg[q])^2
  Scalar commitment_loss = 0;
};

/// Nearest codebook entry per row (squared Euclidean, lowest index on ties).
template <typename Derived>
Quantized<typename Derived::Scalar> vq_quantize(const Eigen::MatrixBase<Derived>& s,
                                                const Codebook<typename Derived::Scalar>& cb) {
  using Scalar = typename Derived::Scalar;
  if (cb.size() == 0) throw std::invalid_argument("vq_quantize: empty codebook");
  if (cb.entries.cols() != s.cols()) throw std::invalid_argument("vq_quantize: codebook dimension mismatch");

  Quantized<Scalar> q;
  q.values.resize(s.rows(), s.cols());
  q.indices.resize(static_cast<std::size_t>(s.rows()));
  Scalar total = 0;
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    Eigen::Index best = 0;
    Scalar best_d = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index c = 0; c < cb.size(); ++c) {
      Scalar d = (s.row(r) - cb.entries.row(c)).squaredNorm();
      if (d < best_d) best_d = d, best = c;
    }
    q.indices[static_cast<std::size_t>(r)] = best;
    q.values.row(r) = cb.entries.row(best);
    total += best_d;
  }
  if (s.size() > 0) q.commitment_loss = total / static_cast<Scalar>(s.size());
  return q;
}

/// Row l = mean of X over [b_l, b_{l+1}). Boundaries must start at 0, end at T and strictly increase.
template <typename Derived>
Matrix<typename Derived::Scalar> boundary_pool(const Eigen::MatrixBase<Derived>& x,
                                               std::span<const Eigen::Index> boundaries) {
  using Scalar = typename Derived::Scalar;
  if (boundaries.size() < 2 || boundaries.front() != 0 || boundaries.back() != x.rows())
    throw std::invalid_argument("boundary_pool: boundaries must start at 0 and end at T");
  Matrix<Scalar> out(static_cast<Eigen::Index>(boundaries.size() - 1), x.cols());
  for (std::size_t l = 0; l + 1 < boundaries.size(); ++l) {
    const Eigen::Index b0 = boundaries[l], b1 = boundaries[l + 1];
    if (b1 <= b0) throw std::invalid_argument("boundary_pool: empty segment " + std::to_string(l));
    out.row(static_cast<Eigen::Index>(l)) = x.middleRows(b0, b1 - b0).colwise().mean();
  }
  return out;
}

/// Row l repeated lengths[l] times; the lengths must sum to `total_frames` when it is given.
template <typename Derived>
Matrix<typename Derived::Scalar> length_regulate(const Eigen::MatrixBase<Derived>& x,
                                                 std::span<const Eigen::Index> lengths,
                                                 Eigen::Index total_frames = -1) {
  using Scalar = typename Derived::Scalar;
  if (static_cast<Eigen::Index>(lengths.size()) != x.rows())
    throw std::invalid_argument("length_regulate: one length per row required");
  Eigen::Index t = 0;
  for (auto len : lengths) {
    if (len < 0) throw std::invalid_argument("length_regulate: negative length");
    t += len;
  }
  if (total_frames >= 0 && t != total_frames)
    throw std::invalid_argument("length_regulate: lengths sum to " + std::to_string(t) + ", expected " +
                                std::to_string(total_frames));
  Matrix<Scalar> out(t, x.cols());
  Eigen::Index row = 0;
  for (std::size_t l = 0; l < lengths.size(); ++l) {
    const auto n = lengths[l];
    out.middleRows(row, n) = x.row(static_cast<Eigen::Index>(l)).replicate(n, 1);
    row += n;
  }
  return out;
}

template <typename Scalar>
Scalar log_add(Scalar a, Scalar b) {
  constexpr Scalar ninf = -std::numeric_limits<Scalar>::infinity();
  if (a == ninf) return b;
  if (b == ninf) return a;
  const Scalar m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

/// Fewest frames that can emit `labels` under CTC (a blank is forced between repeats).
inline Eigen::Index ctc_min_frames(std::span<const int> labels) {
  Eigen::Index n = static_cast<Eigen::Index>(labels.size());
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i] == labels[i - 1]) ++n;
  return n;
}

/// -log sum over all alignments collapsing to `labels`. logprobs is T x (|V|+1) with the blank
/// in the last column. Forward recursion in log domain.
template <typename Derived>
typename Derived::Scalar ctc_loss(const Eigen::MatrixBase<Derived>& logprobs, std::span<const int> labels) {
  using Scalar = typename Derived::Scalar;
  constexpr Scalar ninf = -std::numeric_limits<Scalar>::infinity();
  const Eigen::Index frames = logprobs.rows();
  const int blank = static_cast<int>(logprobs.cols()) - 1;
  if (blank < 0) throw std::invalid_argument("ctc_loss: no classes");
  for (int l : labels)
    if (l < 0 || l >= blank) throw std::invalid_argument("ctc_loss: label out of range");
  if (frames < ctc_min_frames(labels))
    throw std::invalid_argument("ctc_loss: label sequence unsatisfiable in " + std::to_string(frames) + " frames");

  const auto s = static_cast<Eigen::Index>(2 * labels.size() + 1);
  auto symbol = [&](Eigen::Index k) { return k % 2 == 0 ? blank : labels[static_cast<std::size_t>(k / 2)]; };

  std::vector<Scalar> alpha(static_cast<std::size_t>(s), ninf), next(static_cast<std::size_t>(s));
  alpha[0] = logprobs(0, blank);
  if (s > 1) alpha[1] = logprobs(0, symbol(1));
  for (Eigen::Index t = 1; t < frames; ++t) {
    for (Eigen::Index k = 0; k < s; ++k) {
      Scalar acc = alpha[static_cast<std::size_t>(k)];
      if (k >= 1) acc = log_add(acc, alpha[static_cast<std::size_t>(k - 1)]);
      if (k >= 2 && k % 2 == 1 && symbol(k) != symbol(k - 2)) acc = log_add(acc, alpha[static_cast<std::size_t>(k - 2)]);
      next[static_cast<std::size_t>(k)] = acc == ninf ? ninf : acc + logprobs(t, symbol(k));
    }
    std::swap(alpha, next);
  }
  Scalar total = alpha[static_cast<std::size_t>(s - 1)];
  if (s > 1) total = log_add(total, alpha[static_cast<std::size_t>(s - 2)]);
  return -total;
}

/// -log p(target) for a row of log-probabilities.
template <typename Derived>
typename Derived::Scalar ce_loss(const Eigen::MatrixBase<Derived>& logprobs, Eigen::Index target) {
  if (target < 0 || target >= logprobs.size()) throw std::out_of_range("ce_loss: target out of range");
  return -logprobs(target);
}

/// Cross-entropy on unnormalized logits (log-softmax first).
template <typename Derived>
typename Derived::Scalar ce_loss_logits(const Eigen::MatrixBase<Derived>& logits, Eigen::Index target) {
  using Scalar = typename Derived::Scalar;
  if (target < 0 || target >= logits.size()) throw std::out_of_range("ce_loss: target out of range");
  const Scalar m = logits.maxCoeff();
  const Scalar lse = m + std::log((logits.array() - m).exp().sum());
  return lse - logits(target);
}

/// -[y log p + (1-y) log(1-p)], probabilities floored at 1e-10.
template <typename Scalar>
Scalar bce_loss(Scalar p, int target) {
  if (target != 0 && target != 1) throw std::out_of_range("bce_loss: target must be 0 or 1");
  if (p < 0 || p > 1) throw std::invalid_argument("bce_loss: probability outside [0,1]");
  const Scalar floor = static_cast<Scalar>(kProbFloor);
  return target ? -std::log(std::max(p, floor)) : -std::log(std::max(Scalar(1) - p, floor));
}

}  // namespace stars::ops
