// Shared aliases, error types, seeding and a minimal parallel-for used
// throughout the library.  Everything here is header-only and dependency-free
// apart from Eigen and <thread>.
#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cohgraph {

using cx = std::complex<double>;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Error types.  Library operations throw; callers that want flags instead
// (e.g. the de-bias denominator guard) get them as result fields.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define COHGRAPH_DEFINE_ERROR(NAME)            \
  class NAME : public Error {                  \
   public:                                     \
    using Error::Error;                        \
  };

COHGRAPH_DEFINE_ERROR(InvalidInput)
COHGRAPH_DEFINE_ERROR(InvalidLag)
COHGRAPH_DEFINE_ERROR(InvalidBandwidth)
COHGRAPH_DEFINE_ERROR(InvalidOrder)
COHGRAPH_DEFINE_ERROR(SingularTransfer)
COHGRAPH_DEFINE_ERROR(InfeasiblePenalty)
COHGRAPH_DEFINE_ERROR(DegenerateSpectrum)
COHGRAPH_DEFINE_ERROR(DegenerateInverse)
COHGRAPH_DEFINE_ERROR(EmptyGrid)
COHGRAPH_DEFINE_ERROR(GenerationFailure)

#undef COHGRAPH_DEFINE_ERROR

// Non-convergence carries the last iterate so callers can inspect it.
class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, CMat last_iterate)
      : Error(what), last_iterate(std::move(last_iterate)) {}
  CMat last_iterate;
};

// ---------------------------------------------------------------------------
// Seeding.  Replication r of a run with base seed s uses derive_seed(s, r);
// the mixing is a splitmix64 round so nearby indices give unrelated streams
// and parallel execution over replications is order-independent.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(base ^ splitmix64(index + 1));
}

// ---------------------------------------------------------------------------
// Parallel loop over [0, count).  Results must be written to disjoint slots;
// the helper guarantees nothing about ordering.  workers <= 1 runs inline.
// ---------------------------------------------------------------------------

inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

inline void parallel_for(std::size_t count, int workers,
                         const std::function<void(std::size_t)>& body) {
  workers = resolve_workers(workers);
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto run = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  int spawn = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  pool.reserve(spawn);
  for (int w = 0; w < spawn; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Small matrix helpers.
// ---------------------------------------------------------------------------

inline double max_abs(const CMat& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

inline double max_abs(const Mat& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

inline double hermitian_defect(const CMat& s) {
  return max_abs(CMat(s - s.adjoint()));
}

inline bool is_hermitian(const CMat& s, double tol) {
  if (s.rows() != s.cols()) return false;
  return hermitian_defect(s) <= tol * std::max(1.0, max_abs(s));
}

inline CMat hermitize(const CMat& s) { return 0.5 * (s + s.adjoint()); }

}  // namespace cohgraph
