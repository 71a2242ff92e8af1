#pragma once

// Histograms and damped nonlinear least squares for the three fitted forms:
// the truncated power law of normalised air speed, the k-c power law, and the
// sigmoid in log-time for the inverse mean clustering coefficient.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "unsatnet/error.hpp"

namespace unsatnet {

enum class Binning { kLinear, kLogarithmic };

struct Histogram {
  std::vector<double> edges;    // bins + 1
  std::vector<double> centers;  // arithmetic (linear) or geometric (log) centre
  std::vector<double> widths;
  std::vector<std::size_t> counts;
  std::vector<double> densities;  // sum(density * width) == 1
};

/// Density histogram. The last bin is closed on the right.
inline Histogram histogram(std::span<const double> values, std::size_t bins,
                           Binning binning) {
  if (bins < 2) throw ValidationError("bins", "need at least 2 bins");
  if (values.empty()) throw ValidationError("values", "empty sample");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("values", "non-finite sample");
    if (binning == Binning::kLogarithmic && !(v > 0.0))
      throw DomainError("log binning requires strictly positive values");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Histogram h;
  h.edges.resize(bins + 1);
  if (binning == Binning::kLinear) {
    if (hi == lo) {
      const double half = std::max(0.5 * std::abs(lo), 0.5);
      lo -= half;
      hi += half;
    }
    for (std::size_t b = 0; b <= bins; ++b)
      h.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  } else {
    if (hi == lo) {
      lo /= 2.0;
      hi *= 2.0;
    }
    const double llo = std::log(lo), lhi = std::log(hi);
    for (std::size_t b = 0; b <= bins; ++b)
      h.edges[b] = std::exp(llo + (lhi - llo) * static_cast<double>(b) / static_cast<double>(bins));
  }
  h.edges.front() = lo;
  h.edges.back() = hi;
  h.counts.assign(bins, 0);
  for (double v : values) {
    auto it = std::upper_bound(h.edges.begin(), h.edges.end(), v);
    std::size_t b = static_cast<std::size_t>(std::distance(h.edges.begin(), it));
    b = b == 0 ? 0 : b - 1;
    h.counts[std::min(b, bins - 1)] += 1;
  }
  const double total = static_cast<double>(values.size());
  h.centers.resize(bins);
  h.widths.resize(bins);
  h.densities.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    h.widths[b] = h.edges[b + 1] - h.edges[b];
    h.centers[b] = binning == Binning::kLinear ? 0.5 * (h.edges[b] + h.edges[b + 1])
                                               : std::sqrt(h.edges[b] * h.edges[b + 1]);
    h.densities[b] = static_cast<double>(h.counts[b]) / (total * h.widths[b]);
  }
  return h;
}

/// y = model(x, params). A model returns NaN where its parameters are outside
/// its domain; such trial steps are rejected.
using ModelFn = std::function<double(double, std::span<const double>)>;

struct NlsProblem {
  ModelFn model;
  std::vector<double> x, y;
  std::vector<double> weights;  // empty means unit weights
  std::vector<double> lower, upper;
};

struct NlsOptions {
  int max_iterations = 500;
  double step_tol = 1e-10;
};

struct NlsResult {
  std::vector<double> params;
  double residual_norm = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<bool> at_bound;
  bool any_at_bound() const {
    return std::any_of(at_bound.begin(), at_bound.end(), [](bool b) { return b; });
  }
};

namespace detail {

inline bool residuals(const NlsProblem& pb, std::span<const double> p, Eigen::VectorXd& r) {
  r.resize(static_cast<Eigen::Index>(pb.x.size()));
  for (std::size_t i = 0; i < pb.x.size(); ++i) {
    const double w = pb.weights.empty() ? 1.0 : pb.weights[i];
    const double f = pb.model(pb.x[i], p);
    if (!std::isfinite(f)) return false;
    r[static_cast<Eigen::Index>(i)] = w * (pb.y[i] - f);
  }
  return true;
}

}  // namespace detail

/// Levenberg-Marquardt with additive damping and projection onto box bounds.
/// Stops when the relative parameter step falls below `step_tol`.
inline NlsResult nls_fit(const NlsProblem& pb, std::vector<double> guess,
                         const NlsOptions& opt = {}) {
  const std::size_t np = guess.size();
  if (pb.x.size() != pb.y.size()) throw ValidationError("data", "x and y differ in length");
  if (pb.x.size() < np) throw ValidationError("data", "fewer points than parameters");
  if (!pb.weights.empty() && pb.weights.size() != pb.x.size())
    throw ValidationError("weights", "length mismatch");
  std::vector<double> lower = pb.lower, upper = pb.upper;
  if (lower.empty()) lower.assign(np, -std::numeric_limits<double>::infinity());
  if (upper.empty()) upper.assign(np, std::numeric_limits<double>::infinity());
  if (lower.size() != np || upper.size() != np) throw ValidationError("bounds", "size mismatch");
  for (std::size_t j = 0; j < np; ++j)
    if (!(guess[j] >= lower[j] && guess[j] <= upper[j]))
      throw ValidationError("initial_guess", "outside bounds");

  Eigen::VectorXd r;
  if (!detail::residuals(pb, guess, r))
    throw DomainError("nls_fit: model undefined at the initial guess");
  double cost = r.squaredNorm();
  double mu = 1e-3;
  NlsResult out;
  const auto m = static_cast<Eigen::Index>(pb.x.size());
  Eigen::MatrixXd J(m, static_cast<Eigen::Index>(np));
  std::vector<double> trial(np);
  Eigen::VectorXd rt;
  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    out.iterations = iter;
    // Central-difference Jacobian of the residuals.
    for (std::size_t j = 0; j < np; ++j) {
      const double h = 1e-6 * std::max(std::abs(guess[j]), 1e-3);
      std::vector<double> pp = guess, pm = guess;
      pp[j] += h;
      pm[j] -= h;
      Eigen::VectorXd rp, rm;
      const bool okp = detail::residuals(pb, pp, rp);
      const bool okm = detail::residuals(pb, pm, rm);
      if (okp && okm) {
        J.col(static_cast<Eigen::Index>(j)) = (rp - rm) / (2.0 * h);
      } else if (okp) {
        J.col(static_cast<Eigen::Index>(j)) = (rp - r) / h;
      } else if (okm) {
        J.col(static_cast<Eigen::Index>(j)) = (r - rm) / h;
      } else {
        throw DomainError("nls_fit: model undefined around the current parameters");
      }
    }
    if (iter == 1 && !J.allFinite()) throw ConvergenceError("singular Jacobian", iter, cost);
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    if (cost == 0.0) {
      out.converged = true;
      break;
    }
    // Parameters pinned at a bound whose descent direction points outward are
    // held fixed for this iteration (active set).
    std::vector<bool> free(np, true);
    for (std::size_t j = 0; j < np; ++j) {
      const double descent = -g[static_cast<Eigen::Index>(j)];
      if ((guess[j] <= lower[j] && descent <= 0.0) || (guess[j] >= upper[j] && descent >= 0.0))
        free[j] = false;
    }
    bool accepted = false;
    double rel_step = 0.0;
    for (int attempt = 0; attempt < 60; ++attempt) {
      Eigen::MatrixXd Adamp = JtJ;
      const double scale = std::max(JtJ.diagonal().maxCoeff(), 1e-300);
      Adamp.diagonal().array() += mu * scale;
      Eigen::VectorXd rhs = -g;
      for (std::size_t j = 0; j < np; ++j) {
        if (free[j]) continue;
        const auto jj = static_cast<Eigen::Index>(j);
        Adamp.row(jj).setZero();
        Adamp.col(jj).setZero();
        Adamp(jj, jj) = 1.0;
        rhs[jj] = 0.0;
      }
      // Residuals are y - f, so the Gauss-Newton step solves (J^T J) d = -J^T r.
      const Eigen::VectorXd d = Adamp.ldlt().solve(rhs);
      if (!d.allFinite()) {
        mu *= 10.0;
        continue;
      }
      double num = 0.0, den = 0.0;
      for (std::size_t j = 0; j < np; ++j) {
        trial[j] = std::clamp(guess[j] + d[static_cast<Eigen::Index>(j)], lower[j], upper[j]);
        num = std::max(num, std::abs(trial[j] - guess[j]));
        den = std::max(den, std::abs(guess[j]));
      }
      rel_step = num / std::max(den, 1e-12);
      if (detail::residuals(pb, trial, rt)) {
        const double c2 = rt.squaredNorm();
        if (c2 <= cost) {
          guess = trial;
          r = rt;
          cost = c2;
          mu = std::max(mu / 3.0, 1e-15);
          accepted = true;
          break;
        }
      }
      if (rel_step < opt.step_tol) break;
      mu *= 4.0;
    }
    if (rel_step < opt.step_tol || cost == 0.0) {
      out.converged = true;
      break;
    }
    if (!accepted) {
      // No descent possible from here within the damping range.
      out.converged = rel_step < 1e-6;
      break;
    }
  }
  out.params = guess;
  out.residual_norm = std::sqrt(cost);
  out.at_bound.resize(np);
  for (std::size_t j = 0; j < np; ++j)
    out.at_bound[j] = guess[j] <= lower[j] || guess[j] >= upper[j];
  return out;
}

// ---------------------------------------------------------------------------
// Truncated power law N(v) = A (v + v0)^-beta exp(-v / kappa)

struct TruncatedPowerLawFit {
  double amplitude = 0.0;
  double v0 = 0.0;
  double beta = 0.0;
  double kappa = 0.0;
  double residual_norm = 0.0;
  bool converged = false;
  std::size_t samples_used = 0;
  std::size_t samples_dropped = 0;  // nonpositive samples excluded from log bins
  std::size_t bins_used = 0;
};

inline constexpr std::size_t kMinPowerLawSamples = 100;

/// Log-binned density histogram (empty bins dropped) fitted in log space,
/// each bin weighted by the square root of its count and compared with the
/// model averaged over the same bin.
inline TruncatedPowerLawFit fit_truncated_power_law(std::span<const double> samples,
                                                    std::size_t bins = 30) {
  std::vector<double> positive;
  positive.reserve(samples.size());
  for (double v : samples) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw ValidationError("samples", "must be normalised to [0, 1]");
    if (v > 0.0) positive.push_back(v);
  }
  if (positive.size() < kMinPowerLawSamples)
    throw ValidationError("samples", "too few positive samples for a power-law fit");
  const Histogram h = histogram(positive, bins, Binning::kLogarithmic);
  NlsProblem pb;
  std::vector<std::pair<double, double>> spans;  // occupied bins in ln v
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    if (h.counts[b] == 0) continue;
    pb.x.push_back(static_cast<double>(spans.size()));
    spans.emplace_back(std::log(h.edges[b]), std::log(h.edges[b + 1]));
    pb.y.push_back(std::log(h.densities[b]));
    pb.weights.push_back(std::sqrt(static_cast<double>(h.counts[b])));
  }
  if (pb.x.size() < 4) throw ValidationError("samples", "fewer than 4 occupied bins");
  // params: log A, v0, beta, kappa. The model is averaged over each bin like
  // the histogram is; evaluating it at the bin centre biases steep decays
  // towards a spurious power-law factor on the wide upper bins.
  pb.model = [spans](double x, std::span<const double> p) {
    if (p[1] < 0.0 || p[3] <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    const auto& [a, b] = spans[static_cast<std::size_t>(x)];
    auto f = [&](double u) {
      const double v = std::exp(u);
      return std::exp(u - p[2] * std::log(v + p[1]) - v / p[3]);
    };
    const double mass = boost::math::quadrature::gauss<double, 20>::integrate(f, a, b);
    return p[0] + std::log(mass / (std::exp(b) - std::exp(a)));
  };
  // The power-law factor is only identifiable from an exponential when it
  // spans at least a decade on [0, 1], so v0 <= 0.1. Strongly negative beta
  // is no longer a decaying law.
  pb.lower = {-1e3, 0.0, -5.0, 1e-3};
  pb.upper = {1e3, 0.1, 10.0, 1e3};
  std::vector<double> guess{0.0, 0.05, 1.5, 0.85};
  // Start the amplitude at its least-squares value for the initial shape.
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pb.x.size(); ++i) {
    const double w2 = pb.weights[i] * pb.weights[i];
    num += w2 * (pb.y[i] - pb.model(pb.x[i], guess));
    den += w2;
  }
  guess[0] = num / den;
  const NlsResult r = nls_fit(pb, guess);
  TruncatedPowerLawFit fit;
  fit.amplitude = std::exp(r.params[0]);
  fit.v0 = r.params[1];
  fit.beta = r.params[2];
  fit.kappa = r.params[3];
  fit.residual_norm = r.residual_norm;
  fit.converged = r.converged;
  fit.samples_used = positive.size();
  fit.samples_dropped = samples.size() - positive.size();
  fit.bins_used = pb.x.size();
  return fit;
}

// ---------------------------------------------------------------------------
// k-c power law c = a k^b

struct PowerLawFit {
  double amplitude = 0.0;
  double exponent = 0.0;
  double residual_norm = 0.0;  // in log space
  std::size_t pairs_used = 0;
};

/// Ordinary least squares of ln c on ln k over pairs with k >= 2 and c > 0.
inline PowerLawFit fit_kc_power_law(std::span<const std::pair<double, double>> pairs) {
  std::vector<double> lx, ly;
  for (const auto& [k, c] : pairs) {
    if (k >= 2.0 && c > 0.0) {
      lx.push_back(std::log(k));
      ly.push_back(std::log(c));
    }
  }
  if (lx.size() < 3) throw ValidationError("pairs", "need at least 3 pairs with k >= 2, c > 0");
  if (std::all_of(lx.begin(), lx.end(), [&](double v) { return v == lx[0]; }))
    throw ValidationError("pairs", "all degrees identical; slope undefined");
  const double n = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  PowerLawFit fit;
  fit.exponent = sxy / sxx;
  const double intercept = my - fit.exponent * mx;
  fit.amplitude = std::exp(intercept);
  double rss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double e = ly[i] - (intercept + fit.exponent * lx[i]);
    rss += e * e;
  }
  fit.residual_norm = std::sqrt(rss);
  fit.pairs_used = lx.size();
  return fit;
}

// ---------------------------------------------------------------------------
// Sigmoid in log-time: y = A (1 + exp(-beta (1 + ln t / (1 + delta ln t))))

struct SigmoidFit {
  double scale = 0.0;
  double beta = 0.0;
  double delta = 0.0;
  double residual_norm = 0.0;
  double constant_residual_norm = 0.0;  // best constant model, for comparison
  bool converged = false;
};

inline double sigmoid_inverse_clustering(double t, double scale, double beta, double delta) {
  const double u = std::log(t);
  const double den = 1.0 + delta * u;
  return scale * (1.0 + std::exp(-beta * (1.0 + u / den)));
}

/// Multi-start fit; every start keeps 1 + delta ln t > 0 on the data so the
/// pole never crosses the sampled times.
inline SigmoidFit fit_sigmoid_inverse_clustering(std::span<const std::pair<double, double>> series) {
  if (series.size() < 4) throw ValidationError("series", "need at least 4 points");
  NlsProblem pb;
  double umin = 0.0, umax = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& [t, y] = series[i];
    if (!(t > 0.0)) throw DomainError("sigmoid fit: times must be > 0");
    pb.x.push_back(t);
    pb.y.push_back(y);
    const double u = std::log(t);
    umin = i == 0 ? u : std::min(umin, u);
    umax = i == 0 ? u : std::max(umax, u);
  }
  pb.model = [](double t, std::span<const double> p) {
    const double u = std::log(t);
    const double den = 1.0 + p[2] * u;
    if (!(den > 1e-9)) return std::numeric_limits<double>::quiet_NaN();
    return p[0] * (1.0 + std::exp(-p[1] * (1.0 + u / den)));
  };
  pb.lower = {-1e6, -50.0, -10.0};
  pb.upper = {1e6, 50.0, 10.0};
  const double mean_y = std::accumulate(pb.y.begin(), pb.y.end(), 0.0) / static_cast<double>(pb.y.size());
  double const_rss = 0.0;
  for (double y : pb.y) const_rss += (y - mean_y) * (y - mean_y);

  SigmoidFit best;
  best.residual_norm = std::numeric_limits<double>::infinity();
  best.constant_residual_norm = std::sqrt(const_rss);
  const double starts_beta[] = {0.0, 1.0, 3.0, -1.0};
  const double starts_delta[] = {0.0, 0.1, -0.1, 0.5};
  for (double b0 : starts_beta) {
    for (double d0 : starts_delta) {
      // Skip starts that place the pole inside the data.
      if (!(1.0 + d0 * umin > 1e-9 && 1.0 + d0 * umax > 1e-9)) continue;
      std::vector<double> guess{0.0, b0, d0};
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < pb.x.size(); ++i) {
        const double shape = pb.model(pb.x[i], std::vector<double>{1.0, b0, d0});
        num += shape * pb.y[i];
        den += shape * shape;
      }
      guess[0] = num / den;
      NlsResult r;
      try {
        r = nls_fit(pb, guess);
      } catch (const Error&) {
        continue;
      }
      if (r.residual_norm < best.residual_norm) {
        best.scale = r.params[0];
        best.beta = r.params[1];
        best.delta = r.params[2];
        best.residual_norm = r.residual_norm;
        best.converged = r.converged;
      }
    }
  }
  if (!std::isfinite(best.residual_norm))
    throw ConvergenceError("sigmoid fit failed from every start", 0, 0.0);
  return best;
}

/// One point of an inverse-clustering series.
struct ClusteringSample {
  double t = 0.0;
  double mean_clustering = 0.0;
  std::vector<double> node_clustering;  // used by the per-node mode
};

enum class InverseClusteringMode {
  kReciprocalOfMean,  // 1 / C
  kMeanOfReciprocals  // mean of 1 / c_i over nodes with c_i > 0
};

struct InverseClusteringSeries {
  std::vector<std::pair<double, double>> points;  // (t, value)
  std::vector<double> dropped_times;
};

inline InverseClusteringSeries inverse_mean_clustering_series(
    std::span<const ClusteringSample> samples,
    InverseClusteringMode mode = InverseClusteringMode::kReciprocalOfMean) {
  InverseClusteringSeries out;
  for (const auto& s : samples) {
    if (mode == InverseClusteringMode::kReciprocalOfMean) {
      if (s.mean_clustering > 0.0) {
        out.points.emplace_back(s.t, 1.0 / s.mean_clustering);
      } else {
        out.dropped_times.push_back(s.t);
      }
    } else {
      double sum = 0.0;
      std::size_t n = 0;
      for (double c : s.node_clustering)
        if (c > 0.0) {
          sum += 1.0 / c;
          ++n;
        }
      if (n > 0) {
        out.points.emplace_back(s.t, sum / static_cast<double>(n));
      } else {
        out.dropped_times.push_back(s.t);
      }
    }
  }
  if (out.points.empty()) throw ValidationError("series", "every point has zero clustering");
  return out;
}

}  // namespace unsatnet
