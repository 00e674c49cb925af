#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>

namespace lanemodel {

// Mass assignment over a frame of K mutually exclusive hypotheses whose
// focal elements are the singletons and the whole frame (index K, "unknown").
template <std::size_t K>
struct MassFunction {
  std::array<double, K + 1> mass{};

  static MassFunction vacuous() {
    MassFunction m;
    m.mass[K] = 1.0;
    return m;
  }

  static MassFunction certain(std::size_t hypothesis, double confidence) {
    MassFunction m;
    m.mass[hypothesis] = confidence;
    m.mass[K] += 1.0 - confidence;
    return m;
  }

  double unknown() const { return mass[K]; }

  double total() const {
    double sum = 0.0;
    for (double v : mass) sum += v;
    return sum;
  }

  // Index of the largest mass, K when the frame itself dominates. Ties go to the lower index.
  std::size_t argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i <= K; ++i) {
      if (mass[i] > mass[best]) best = i;
    }
    return best;
  }
};

struct CombineResult {
  bool total_conflict = false;
  double conflict = 0.0;
};

// Dempster's rule of combination. Returns nullopt on total conflict
// (normalization mass zero).
template <std::size_t K>
std::optional<MassFunction<K>> combine(const MassFunction<K>& a, const MassFunction<K>& b,
                                       double* conflict_out = nullptr) {
  MassFunction<K> out;
  double conflict = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    out.mass[i] = a.mass[i] * b.mass[i] + a.mass[i] * b.mass[K] + a.mass[K] * b.mass[i];
    for (std::size_t j = 0; j < K; ++j) {
      if (j != i) conflict += a.mass[i] * b.mass[j];
    }
  }
  out.mass[K] = a.mass[K] * b.mass[K];
  if (conflict_out != nullptr) *conflict_out = conflict;
  const double norm = 1.0 - conflict;
  if (norm <= 1e-15) return std::nullopt;
  for (double& v : out.mass) v /= norm;
  return out;
}

// Shafer discounting: scales singleton masses by `reliability` and moves the
// remainder to the whole frame.
template <std::size_t K>
MassFunction<K> discount(const MassFunction<K>& m, double reliability) {
  MassFunction<K> out;
  double assigned = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    out.mass[i] = m.mass[i] * reliability;
    assigned += out.mass[i];
  }
  out.mass[K] = 1.0 - assigned;
  return out;
}

}  // namespace lanemodel
