#ifndef KAMTORI_EVALUATE_HPP
#define KAMTORI_EVALUATE_HPP

// Fast repeated point evaluation of a fixed set of series (typically the
// components of a vector field) at real phase points ordered (y, x, z).

#include <span>
#include <vector>

#include "kamtori/series.hpp"

namespace kamtori {

class FieldEvaluator {
 public:
  FieldEvaluator() = default;
  explicit FieldEvaluator(const std::vector<Series>& components);

  std::size_t size() const { return terms_.size(); }
  const Dims& dims() const { return dims_; }

  /// Real parts of all components at `state` = (y, x, z).
  void operator()(std::span<const double> state, std::span<double> out) const;

 private:
  struct Term {
    std::uint32_t mode;
    std::uint32_t mono;
    cplx c;
  };
  Dims dims_{};
  int k_max_ = 0;
  std::size_t mono_count_ = 1;
  std::shared_ptr<const MonomialBasis> basis_;
  std::vector<Mode> modes_;
  std::vector<std::vector<Term>> terms_;
};

/// Evaluates `field` at `count` states stored row-major with stride
/// dims().phase_dim(); results stored row-major with stride field.size().
void evaluate_points_serial(const FieldEvaluator& field, std::span<const double> states,
                            std::span<double> out);
void evaluate_points_parallel(const FieldEvaluator& field, std::span<const double> states,
                              std::span<double> out);

}  // namespace kamtori

#endif  // KAMTORI_EVALUATE_HPP
