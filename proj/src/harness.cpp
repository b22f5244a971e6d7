#include "hydrofmm/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace hydrofmm {

namespace {

double uniform01(std::mt19937_64& eng) {
  // Explicit mapping keeps streams identical across standard libraries.
  return double(eng() >> 11) * 0x1.0p-53;
}

}  // namespace

Distribution parse_distribution(const std::string& name) {
  if (name == "cube") return Distribution::cube;
  if (name == "sphere") return Distribution::sphere;
  throw std::invalid_argument("unknown distribution: " + name);
}

std::string to_string(Distribution d) {
  return d == Distribution::cube ? "cube" : "sphere";
}

std::vector<Bead> generate(Distribution d, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("nsources must be >= 1");
  std::mt19937_64 eng(seed);
  std::vector<Bead> beads(n);
  for (Bead& b : beads) {
    if (d == Distribution::cube) {
      b.position = {uniform01(eng), uniform01(eng), uniform01(eng)};
    } else {
      const double z = -1.0 + 2.0 * uniform01(eng);
      const double phi = 2.0 * std::numbers::pi * uniform01(eng);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      b.position = {r * std::cos(phi), r * std::sin(phi), z};
    }
    b.force = {-1.0 + 2.0 * uniform01(eng), -1.0 + 2.0 * uniform01(eng),
               -1.0 + 2.0 * uniform01(eng)};
  }
  return beads;
}

std::vector<Bead> io_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error(path + ": line 1: missing header");
  }
  {
    std::istringstream hs(line);
    std::string tok;
    int ntok = 0;
    while (hs >> tok) ++ntok;
    if (ntok != 6 && ntok != 9) {
      throw std::runtime_error(path + ": line 1: expected header `x y z fx fy fz`");
    }
  }
  std::vector<Bead> beads;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    Bead b;
    if (!(ls >> b.position.x >> b.position.y >> b.position.z >> b.force.x >>
          b.force.y >> b.force.z)) {
      // allow trailing blank lines
      std::istringstream probe(line);
      std::string tok;
      if (probe >> tok) {
        throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                                 ": malformed bead record");
      }
      continue;
    }
    double extra;
    ls >> extra >> extra >> extra;  // optional result columns
    beads.push_back(b);
  }
  if (beads.empty()) {
    throw std::runtime_error(path + ": no beads");
  }
  return beads;
}

void io_write(const std::string& path, std::span<const Bead> beads,
              std::span<const Vec3> results) {
  if (!results.empty() && results.size() != beads.size()) {
    throw std::invalid_argument("results size does not match beads");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << (results.empty() ? "x y z fx fy fz" : "x y z fx fy fz ux uy uz") << "\n";
  char buf[512];
  for (std::size_t i = 0; i < beads.size(); ++i) {
    const Bead& b = beads[i];
    int len = std::snprintf(buf, sizeof buf,
                            "%.17g %.17g %.17g %.17g %.17g %.17g",
                            b.position.x, b.position.y, b.position.z,
                            b.force.x, b.force.y, b.force.z);
    if (!results.empty()) {
      len += std::snprintf(buf + len, sizeof buf - len, " %.17g %.17g %.17g",
                           results[i].x, results[i].y, results[i].z);
    }
    out << buf << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

double error_metric(std::span<const Vec3> approx, std::span<const Vec3> exact) {
  if (approx.size() != exact.size()) {
    throw std::invalid_argument("error_metric: size mismatch");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < approx.size(); ++i) {
    num += (approx[i] - exact[i]).norm2();
    den += exact[i].norm2();
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num / den);
}

Vec3 direct_rpy_target(std::span<const Bead> beads, std::size_t i,
                       const RPYParams& params) {
  Vec3 acc = params.C0 * beads[i].force;
  for (std::size_t j = 0; j < beads.size(); ++j) {
    if (j == i) continue;
    if (!rpy_pair_accumulate(acc, beads[i].position, beads[j].position,
                             beads[j].force, params)) {
      throw std::domain_error("coincident beads at indices (" +
                              std::to_string(i) + ", " + std::to_string(j) +
                              ")");
    }
  }
  return acc;
}

double default_radius(std::size_t n, int threshold) {
  return 0.05 * std::pow(double(n) / double(threshold), -1.0 / 3.0);
}

RunRecord run(const RunConfig& config, std::ostream& out) {
  const AccuracySetting base = AccuracySetting::from_digits(config.digits);
  if (config.threshold < 0) {
    throw std::invalid_argument("threshold must be >= 1 (or 0 for the default)");
  }
  const int threshold = config.threshold > 0 ? config.threshold : base.threshold;
  if (config.verify_samples < 0) {
    throw std::invalid_argument("verify-samples must be >= 0");
  }
  if (config.repeats < 1) throw std::invalid_argument("repeats must be >= 1");

  std::vector<Bead> beads;
  if (!config.input_path.empty()) {
    beads = io_read(config.input_path);
  } else {
    beads = generate(config.distribution, config.nsources, config.seed);
  }
  const std::size_t n = beads.size();

  const double eta = config.eta > 0.0 ? config.eta : 1.0 / (6.0 * std::numbers::pi);
  const double radius =
      config.radius > 0.0 ? config.radius : default_radius(n, threshold);
  const RPYParams params = RPYParams::make(radius, config.k_B, config.T, eta);

  RunRecord record;
  record.radius = radius;
  record.digits = config.digits;

  out << "hydrofmm bench: N=" << n << " " << to_string(config.distribution)
      << " digits=" << config.digits << " (p=" << base.p
      << ", threshold=" << threshold << ") seed=" << config.seed
      << " radius=" << radius << "\n";

  double t_total_sum = 0.0;
  for (int rep = 0; rep < config.repeats; ++rep) {
    EvaluateResult res = evaluate(beads, params, base, threshold, config.threads);
    record.report = res.report;
    record.results = std::move(res.results);
    t_total_sum += res.report.t_total;

    char line[640];
    std::snprintf(line, sizeof line,
                  "  phases: tree %.4f s | upward %.4f s | interaction %.4f s "
                  "| downward %.4f s | near %.4f s | total %.4f s (threads=%d)",
                  res.report.t_tree, res.report.t_upward,
                  res.report.t_interaction, res.report.t_downward,
                  res.report.t_near, res.report.t_total, res.report.threads);
    out << line << "\n";
  }

  const int samples = int(std::min<std::size_t>(config.verify_samples, n));
  if (samples > 0) {
    // Sample distinct targets with a seed-derived generator.
    std::mt19937_64 eng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::uint32_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = std::uint32_t(i);
    for (int s = 0; s < samples; ++s) {
      const std::size_t j = s + std::size_t(eng() % (n - s));
      std::swap(idx[s], idx[j]);
    }
    std::vector<Vec3> approx(samples), exact(samples);
    for (int s = 0; s < samples; ++s) {
      approx[s] = record.results[idx[s]];
      exact[s] = direct_rpy_target(beads, idx[s], params);
    }
    record.error = error_metric(approx, exact);
    out << "  sampled relative L2 error (" << samples
        << " targets): " << record.error << "\n";
  }

  if (config.repeats > 1) {
    out << "  mean total over " << config.repeats
        << " repeats: " << t_total_sum / config.repeats << " s\n";
  }

  char rec[768];
  int len = std::snprintf(
      rec, sizeof rec,
      "RESULT n=%zu distribution=%s digits=%d p=%d threshold=%d seed=%llu "
      "threads=%d samples=%d radius=%.9g",
      n, to_string(config.distribution).c_str(), config.digits, base.p,
      threshold, (unsigned long long)config.seed, record.report.threads,
      samples, radius);
  if (record.error >= 0.0) {
    len += std::snprintf(rec + len, sizeof rec - len, " error=%.6e", record.error);
  }
  std::snprintf(rec + len, sizeof rec - len,
                " t_tree=%.6f t_upward=%.6f t_interaction=%.6f "
                "t_downward=%.6f t_near=%.6f t_total=%.6f",
                record.report.t_tree, record.report.t_upward,
                record.report.t_interaction, record.report.t_downward,
                record.report.t_near, record.report.t_total);
  out << rec << "\n";

  if (!config.output_path.empty()) {
    io_write(config.output_path, beads, record.results);
  }
  return record;
}

}  // namespace hydrofmm
