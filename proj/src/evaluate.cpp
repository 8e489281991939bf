#include "kamtori/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "kamtori/kernels.hpp"

namespace kamtori {

FieldEvaluator::FieldEvaluator(const std::vector<Series>& components) {
  if (components.empty()) return;
  dims_ = components.front().dims();
  int d_max = 0;
  for (const auto& c : components) {
    if (!(c.dims() == dims_)) throw DimensionError("field components disagree on dimensions");
    d_max = std::max(d_max, c.d_max());
    k_max_ = std::max(k_max_, c.k_max());
  }
  basis_ = MonomialBasis::get(dims_.nvars(), d_max);
  mono_count_ = basis_->size();

  std::map<Mode, std::uint32_t> mode_slot;
  for (const auto& c : components) {
    for (const auto& [k, blk] : c.blocks()) mode_slot.emplace(k, 0);
  }
  for (auto& [k, slot] : mode_slot) {
    slot = static_cast<std::uint32_t>(modes_.size());
    modes_.push_back(k);
  }
  terms_.resize(components.size());
  for (std::size_t ci = 0; ci < components.size(); ++ci) {
    for (const auto& [k, blk] : components[ci].blocks()) {
      const auto slot = mode_slot.at(k);
      for (std::size_t i = 0; i < blk.size(); ++i) {
        if (blk[i] != cplx{}) terms_[ci].push_back({slot, static_cast<std::uint32_t>(i), blk[i]});
      }
    }
  }
}

void FieldEvaluator::operator()(std::span<const double> state, std::span<double> out) const {
  if (out.size() != terms_.size()) throw DimensionError("output span has the wrong length");
  if (terms_.empty()) return;
  const int n = dims_.n;
  const int l = dims_.l;
  if (state.size() != static_cast<std::size_t>(dims_.phase_dim())) {
    throw DimensionError("state length does not match (y, x, z)");
  }
  thread_local std::vector<cplx> powers;
  thread_local std::vector<cplx> phase;
  thread_local std::vector<double> mono;
  thread_local std::vector<double> vars;

  const int width = 2 * k_max_ + 1;
  powers.assign(static_cast<std::size_t>(n * width), cplx{1.0, 0.0});
  for (int a = 0; a < n; ++a) {
    const cplx w = std::polar(1.0, state[l + a]);
    cplx* row = powers.data() + a * width + k_max_;
    for (int j = 1; j <= k_max_; ++j) {
      row[j] = row[j - 1] * w;
      row[-j] = std::conj(row[j]);
    }
  }
  phase.resize(modes_.size());
  for (std::size_t q = 0; q < modes_.size(); ++q) {
    cplx p{1.0, 0.0};
    for (int a = 0; a < n; ++a) {
      const int ka = modes_[q].k[a];
      if (ka != 0) p *= powers[a * width + k_max_ + ka];
    }
    phase[q] = p;
  }
  vars.assign(state.begin(), state.begin() + l);
  vars.insert(vars.end(), state.begin() + l + n, state.end());
  mono.resize(mono_count_);
  mono[0] = 1.0;
  for (std::size_t i = 1; i < mono_count_; ++i) {
    mono[i] = mono[basis_->parent(i)] * vars[basis_->parent_var(i)];
  }
  for (std::size_t ci = 0; ci < terms_.size(); ++ci) {
    double acc = 0.0;
    for (const Term& t : terms_[ci]) {
      const cplx& ph = phase[t.mode];
      acc += (t.c.real() * ph.real() - t.c.imag() * ph.imag()) * mono[t.mono];
    }
    out[ci] = acc;
  }
}

void evaluate_points_serial(const FieldEvaluator& field, std::span<const double> states,
                            std::span<double> out) {
  const std::size_t dim = static_cast<std::size_t>(field.dims().phase_dim());
  const std::size_t width = field.size();
  const std::size_t count = dim == 0 ? 0 : states.size() / dim;
  for (std::size_t p = 0; p < count; ++p) {
    field(states.subspan(p * dim, dim), out.subspan(p * width, width));
  }
}

void evaluate_points_parallel(const FieldEvaluator& field, std::span<const double> states,
                              std::span<double> out) {
  const std::size_t dim = static_cast<std::size_t>(field.dims().phase_dim());
  const std::size_t width = field.size();
  const auto count = static_cast<std::ptrdiff_t>(dim == 0 ? 0 : states.size() / dim);
#pragma omp parallel for schedule(static) num_threads(kernels::thread_count())
  for (std::ptrdiff_t p = 0; p < count; ++p) {
    const auto up = static_cast<std::size_t>(p);
    field(states.subspan(up * dim, dim), out.subspan(up * width, width));
  }
}

}  // namespace kamtori
