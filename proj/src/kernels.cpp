#include "kamtori/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace kamtori::kernels {

namespace {

std::atomic<int> g_threads{0};  // 0: not yet initialised

}  // namespace

int thread_count() {
  int t = g_threads.load();
  if (t > 0) return t;
#ifdef _OPENMP
  t = omp_get_max_threads();
#else
  t = 1;
#endif
  g_threads.store(t);
  return t;
}

void set_thread_count(int n) { g_threads.store(std::max(1, n)); }

// ---------------------------------------------------------------- convolution

namespace {

struct Entry {
  std::uint32_t slot;  // position in the operand's distinct-monomial list
  cplx value;
};

struct SparseBlock {
  Mode k;
  std::vector<Entry> entries;
};

// Nonzero entries of every block, plus the list of distinct monomials used.
struct Compressed {
  std::vector<SparseBlock> blocks;
  std::vector<std::size_t> monos;
};

Compressed compress(const Series& s) {
  Compressed out;
  std::vector<std::int64_t> slot_of(s.block_size(), -1);
  for (const auto& [k, blk] : s.blocks()) {
    SparseBlock sb{k, {}};
    for (std::size_t i = 0; i < blk.size(); ++i) {
      if (blk[i] == cplx{}) continue;
      if (slot_of[i] < 0) {
        slot_of[i] = static_cast<std::int64_t>(out.monos.size());
        out.monos.push_back(i);
      }
      sb.entries.push_back({static_cast<std::uint32_t>(slot_of[i]), blk[i]});
    }
    if (!sb.entries.empty()) out.blocks.push_back(std::move(sb));
  }
  return out;
}

struct ProductPlan {
  Compressed a;
  Compressed b;
  std::vector<std::int64_t> index;  // [slot_a * |monos_b| + slot_b] -> big-basis index
  std::vector<std::uint8_t> in_cap; // same layout: degree within d_cap
  std::size_t stride = 0;
};

ProductPlan plan(const Series& a, const Series& b, int d_cap) {
  ProductPlan p{compress(a), compress(b), {}, {}, 0};
  const auto big = MonomialBasis::get(a.dims().nvars(), a.d_max() + b.d_max());
  p.stride = p.b.monos.size();
  p.index.resize(p.a.monos.size() * p.stride);
  p.in_cap.resize(p.index.size());
  for (std::size_t ia = 0; ia < p.a.monos.size(); ++ia) {
    for (std::size_t ib = 0; ib < p.stride; ++ib) {
      const auto r = big->product(p.a.monos[ia], p.b.monos[ib]);
      p.index[ia * p.stride + ib] = r;
      p.in_cap[ia * p.stride + ib] = big->degree(static_cast<std::size_t>(r)) <= d_cap ? 1 : 0;
    }
  }
  return p;
}

void accumulate(const ProductPlan& p, std::size_t a_begin, std::size_t a_end, int K_cap,
                Series& kept, Series& tail) {
  for (std::size_t ai = a_begin; ai < a_end; ++ai) {
    const SparseBlock& ba = p.a.blocks[ai];
    for (const SparseBlock& bb : p.b.blocks) {
      const Mode kc = ba.k + bb.k;
      const bool keep_k = kc.l1() <= K_cap;
      Series::Block* dst_keep = keep_k ? &kept.block(kc) : nullptr;
      Series::Block* dst_tail = nullptr;
      for (const Entry& ea : ba.entries) {
        const std::size_t row = ea.slot * p.stride;
        for (const Entry& eb : bb.entries) {
          const auto r = static_cast<std::size_t>(p.index[row + eb.slot]);
          const cplx v = ea.value * eb.value;
          if (keep_k && p.in_cap[row + eb.slot]) {
            (*dst_keep)[r] += v;
          } else {
            if (!dst_tail) dst_tail = &tail.block(kc);
            (*dst_tail)[r] += v;
          }
        }
      }
    }
  }
}

}  // namespace

void convolve_serial(const Series& a, const Series& b, int d_cap, int K_cap, Series& kept,
                     Series& tail) {
  const ProductPlan p = plan(a, b, d_cap);
  accumulate(p, 0, p.a.blocks.size(), K_cap, kept, tail);
  kept.prune();
  tail.prune();
}

void convolve_parallel(const Series& a, const Series& b, int d_cap, int K_cap, Series& kept,
                       Series& tail) {
  // Work is split by output mode: each output block is owned by one thread and
  // receives its contributions in the same order as in the serial kernel, so
  // the result is bitwise independent of the thread count.
  const ProductPlan p = plan(a, b, d_cap);
  struct Task {
    Mode k;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    Series::Block* keep = nullptr;
    Series::Block* tail = nullptr;
  };
  std::map<Mode, std::size_t> slot;
  std::vector<Task> tasks;
  for (std::size_t ai = 0; ai < p.a.blocks.size(); ++ai) {
    for (std::size_t bi = 0; bi < p.b.blocks.size(); ++bi) {
      const Mode kc = p.a.blocks[ai].k + p.b.blocks[bi].k;
      auto [it, fresh] = slot.try_emplace(kc, tasks.size());
      if (fresh) tasks.push_back(Task{kc, {}, nullptr, nullptr});
      tasks[it->second].pairs.emplace_back(static_cast<std::uint32_t>(ai), static_cast<std::uint32_t>(bi));
    }
  }
  // Block creation touches the maps, so it happens before the parallel region.
  for (Task& t : tasks) {
    if (t.k.l1() <= K_cap) t.keep = &kept.block(t.k);
    t.tail = &tail.block(t.k);
  }
  const auto ntasks = static_cast<std::ptrdiff_t>(tasks.size());
#pragma omp parallel for schedule(dynamic, 4) num_threads(thread_count())
  for (std::ptrdiff_t ti = 0; ti < ntasks; ++ti) {
    const Task& t = tasks[static_cast<std::size_t>(ti)];
    for (const auto& [ai, bi] : t.pairs) {
      for (const Entry& ea : p.a.blocks[ai].entries) {
        const std::size_t row = ea.slot * p.stride;
        for (const Entry& eb : p.b.blocks[bi].entries) {
          const auto r = static_cast<std::size_t>(p.index[row + eb.slot]);
          const cplx v = ea.value * eb.value;
          if (t.keep && p.in_cap[row + eb.slot]) {
            (*t.keep)[r] += v;
          } else {
            (*t.tail)[r] += v;
          }
        }
      }
    }
  }
  kept.prune();
  tail.prune();
}

void convolve(const Series& a, const Series& b, int d_cap, int K_cap, Series& kept, Series& tail) {
  if (thread_count() > 1 && a.blocks().size() > 8) {
    convolve_parallel(a, b, d_cap, K_cap, kept, tail);
  } else {
    convolve_serial(a, b, d_cap, K_cap, kept, tail);
  }
}

// ---------------------------------------------------------------- sieve

namespace {

bool point_excluded(const double* w, int n, std::span<const Mode> modes, double gamma, double tau) {
  for (const Mode& k : modes) {
    double s = 0.0;
    for (int a = 0; a < n; ++a) s += k.k[a] * w[a];
    if (std::abs(s) <= gamma / std::pow(static_cast<double>(k.l1()), tau)) return true;
  }
  return false;
}

}  // namespace

void sieve_mask_serial(std::span<const double> omegas, int n, std::span<const Mode> modes,
                       double gamma, double tau, std::span<std::uint8_t> excluded) {
  const std::size_t count = excluded.size();
  for (std::size_t p = 0; p < count; ++p) {
    excluded[p] = point_excluded(omegas.data() + p * n, n, modes, gamma, tau) ? 1 : 0;
  }
}

void sieve_mask_parallel(std::span<const double> omegas, int n, std::span<const Mode> modes,
                         double gamma, double tau, std::span<std::uint8_t> excluded) {
  const auto count = static_cast<std::ptrdiff_t>(excluded.size());
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::ptrdiff_t p = 0; p < count; ++p) {
    excluded[p] = point_excluded(omegas.data() + p * n, n, modes, gamma, tau) ? 1 : 0;
  }
}

}  // namespace kamtori::kernels
