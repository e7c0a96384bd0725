#pragma once

#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include "patchdrift/errors.hpp"

namespace patchdrift {

// Direct product of cyclic groups Z_{n_1} x ... x Z_{n_k}. Elements are
// addressed in mixed radix with the first factor most significant, so an
// index decomposes as ((g_1 n_2 + g_2) n_3 + g_3) ...
class CyclicProductGroup {
 public:
  explicit CyclicProductGroup(std::vector<int> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) throw Error(ErrorCode::ModelError, "group needs at least one factor");
    order_ = 1;
    for (int f : factors_) {
      if (f < 1) throw Error(ErrorCode::ModelError, "cyclic factors must be >= 1");
      order_ *= f;
    }
  }

  int order() const { return order_; }
  int scales() const { return static_cast<int>(factors_.size()); }
  int factor(int j) const { return factors_[j]; }
  const std::vector<int>& factors() const { return factors_; }

  std::vector<int> digits(int index) const {
    std::vector<int> g(factors_.size());
    for (int j = scales() - 1; j >= 0; --j) {
      g[j] = index % factors_[j];
      index /= factors_[j];
    }
    return g;
  }

  int index(const std::vector<int>& g) const {
    int idx = 0;
    for (int j = 0; j < scales(); ++j) idx = idx * factors_[j] + (g[j] % factors_[j]);
    return idx;
  }

  // Index of g - h with componentwise wraparound.
  int subtract(int gi, int hi) const {
    int idx = 0;
    for (int j = scales() - 1, place = 1; j >= 0; --j) {
      int d = (gi / place) % factors_[j] - (hi / place) % factors_[j];
      if (d < 0) d += factors_[j];
      idx += d * place;
      place *= factors_[j];
    }
    return idx;
  }

  // 1-based position of the leftmost nonzero digit; scales()+1 for the
  // identity element.
  int scale_level(int index) const {
    std::vector<int> g = digits(index);
    for (int j = 0; j < scales(); ++j)
      if (g[j] != 0) return j + 1;
    return scales() + 1;
  }

 private:
  std::vector<int> factors_;
  int order_;
};

inline constexpr int kCharacterTransformGuard = 4096;

// Value of the character indexed by m at the element indexed by g:
// the product of exp(2 pi i m_j g_j / n_j) over the factors.
inline std::complex<double> character_value(const CyclicProductGroup& group, int m, int g) {
  double phase = 0.0;
  for (int j = group.scales() - 1, place = 1; j >= 0; --j) {
    int nj = group.factor(j);
    int mj = (m / place) % nj;
    int gj = (g / place) % nj;
    phase += 2.0 * M_PI * static_cast<double>(mj) * static_cast<double>(gj) / nj;
    place *= nj;
  }
  return {std::cos(phase), std::sin(phase)};
}

// f_tilde(kappa) = sum_g f(g) kappa(g), one value per character, in the
// same mixed-radix order as the elements.
inline std::vector<std::complex<double>> character_transform(
    const CyclicProductGroup& group, const std::vector<double>& f,
    int guard = kCharacterTransformGuard) {
  const int n = group.order();
  if (static_cast<int>(f.size()) != n)
    throw Error(ErrorCode::ModelError, "class function length does not match group order");
  if (n > guard)
    throw Error(ErrorCode::ModelError, "group order exceeds the transform size guard");
  std::vector<std::complex<double>> out(n);
  for (int m = 0; m < n; ++m) {
    std::complex<double> acc = 0.0;
    for (int g = 0; g < n; ++g) acc += f[g] * character_value(group, m, g);
    out[m] = acc;
  }
  return out;
}

// Dense matrix M_{gh} = f(g - h) of a function on the group.
template <typename MatrixType>
MatrixType class_function_matrix(const CyclicProductGroup& group, const std::vector<double>& f) {
  const int n = group.order();
  if (static_cast<int>(f.size()) != n)
    throw Error(ErrorCode::ModelError, "class function length does not match group order");
  MatrixType m(n, n);
  for (int g = 0; g < n; ++g)
    for (int h = 0; h < n; ++h) m(g, h) = f[group.subtract(g, h)];
  return m;
}

inline std::vector<std::complex<double>> inverse_character_transform(
    const CyclicProductGroup& group, const std::vector<std::complex<double>>& ft,
    int guard = kCharacterTransformGuard) {
  const int n = group.order();
  if (static_cast<int>(ft.size()) != n)
    throw Error(ErrorCode::ModelError, "transform length does not match group order");
  if (n > guard)
    throw Error(ErrorCode::ModelError, "group order exceeds the transform size guard");
  std::vector<std::complex<double>> out(n);
  for (int g = 0; g < n; ++g) {
    std::complex<double> acc = 0.0;
    for (int m = 0; m < n; ++m) acc += ft[m] * std::conj(character_value(group, m, g));
    out[g] = acc / static_cast<double>(n);
  }
  return out;
}

}  // namespace patchdrift
