#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hydrofmm/evaluator.hpp"
#include "hydrofmm/geometry.hpp"
#include "hydrofmm/rpy.hpp"

namespace hydrofmm {

enum class Distribution { cube, sphere };

Distribution parse_distribution(const std::string& name);
std::string to_string(Distribution d);

/// Benchmark run configuration. Kernel constants default to k_B = T = 1,
/// eta = 1/(6 pi), and a bead radius comfortably below the expected leaf
/// size when not explicitly set.
struct RunConfig {
  std::size_t nsources = 10000;
  Distribution distribution = Distribution::cube;
  int digits = 3;
  int threshold = 0;        // 0: default for the digit setting
  std::uint64_t seed = 42;
  int threads = 0;          // 0: all hardware threads
  int verify_samples = 400;
  int repeats = 1;
  std::string input_path;
  std::string output_path;
  double radius = 0.0;      // 0: default radius rule
  double k_B = 1.0;
  double T = 1.0;
  double eta = 0.0;         // 0: 1/(6 pi)
};

/// Deterministic test distributions: positions i.i.d. uniform in [0,1]^3
/// (cube) or uniform on the unit sphere surface (z and azimuth uniform);
/// forces i.i.d. uniform in [-1,1]^3.
std::vector<Bead> generate(Distribution d, std::size_t n, std::uint64_t seed);

/// Text bead file: header line `x y z fx fy fz`, one bead per line. When
/// results are attached the header and rows gain `ux uy uz` columns.
/// Values round-trip at 17 significant digits.
std::vector<Bead> io_read(const std::string& path);
void io_write(const std::string& path, std::span<const Bead> beads,
              std::span<const Vec3> results = {});

/// Relative L2 error over sampled targets:
/// sqrt(sum |approx - exact|^2 / sum |exact|^2).
double error_metric(std::span<const Vec3> approx, std::span<const Vec3> exact);

/// Exact result for a single target, used for sampled verification.
Vec3 direct_rpy_target(std::span<const Bead> beads, std::size_t i,
                       const RPYParams& params);

/// Default bead radius for a run: 2a = 0.1 (N / threshold)^(-1/3).
double default_radius(std::size_t n, int threshold);

struct RunRecord {
  EvaluationReport report;   // last repeat
  double error = -1.0;       // < 0 when verification was skipped
  double radius = 0.0;
  int digits = 0;
  std::vector<Vec3> results;
};

/// Execute a configured run: evaluate (repeating if asked), verify sampled
/// targets against the direct oracle, emit a human summary plus one
/// machine-readable record line per repeat, and optionally write results.
RunRecord run(const RunConfig& config, std::ostream& out);

}  // namespace hydrofmm
