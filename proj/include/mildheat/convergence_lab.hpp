#pragma once

// Monte-Carlo studies over coupled noise: mollification convergence, the
// Cauchy property of the smoothed solutions, the stability ratio of paired
// runs, kernel exponent fits, and the Hurst-range sweep.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "mildheat/errors.hpp"
#include "mildheat/fractional_calculus.hpp"
#include "mildheat/mild_solver.hpp"
#include "mildheat/noise_fields.hpp"
#include "mildheat/numfmt.hpp"
#include "mildheat/random.hpp"
#include "mildheat/spectral_domain.hpp"

namespace mildheat {

enum class StudyKind { mollify, cauchy, lemma3, kernel, hrange };

inline std::string to_string(StudyKind k) {
  switch (k) {
    case StudyKind::mollify: return "mollify";
    case StudyKind::cauchy: return "cauchy";
    case StudyKind::lemma3: return "lemma3";
    case StudyKind::kernel: return "kernel";
    case StudyKind::hrange: return "hrange";
  }
  return "mollify";
}

inline bool is_statistical(StudyKind k) { return k != StudyKind::kernel; }

struct StudyConfig {
  StudyKind kind = StudyKind::mollify;
  std::vector<std::size_t> ladder{16, 32, 64, 128, 256};  // mollification rates n
  std::size_t replicates = 200;                          // R_mc
  ProblemSpec spec;
  std::size_t steps = 4096;  // K; dt = T / K
  double level = 100.0;      // stopping level N
  std::uint64_t seed = 1;
  double epsilon = 0.05;             // exceedance threshold of the Cauchy metric
  std::optional<double> lemma3_R;    // restriction radius; empty = 90th percentile of Besov norms
  std::vector<double> hurst_ladder{0.60, 0.70, 0.75, 0.85};
  std::size_t kernel_rungs = 9;
  std::size_t seminorm_stride = 1;  // left-point stride of noise seminorm scans
  SolverOptions options;            // options.besov_stride applies to every Besov norm
  bool exploratory = false;         // allows R_mc < 100 (unit tests, smoke runs)

  double dt() const { return spec.horizon / static_cast<double>(steps); }

  void validate() const {
    if (is_statistical(kind)) {
      if (ladder.empty()) throw DomainError("StudyConfig: ladder must not be empty");
      for (std::size_t i = 0; i < ladder.size(); ++i) {
        if (ladder[i] == 0) throw DomainError("StudyConfig: ladder rates must be positive");
        if (i > 0 && ladder[i] <= ladder[i - 1]) throw DomainError("StudyConfig: ladder must be strictly increasing");
      }
      if (replicates == 0) throw DomainError("StudyConfig: need at least one replicate");
      if (replicates < 100 && !exploratory)
        throw DomainError("StudyConfig: R_mc must be >= 100 for statistical studies (exploratory runs excepted)");
      if (steps < 2) throw DomainError("StudyConfig: need K >= 2 steps");
      if (!(level >= 1.0)) throw DomainError("StudyConfig: stopping level N must be >= 1");
      const std::size_t stride = std::max<std::size_t>(options.besov_stride, 1);
      if (steps % stride != 0 || steps / stride < 2)
        throw DomainError("StudyConfig: besov_stride must divide K and leave >= 2 intervals");
    }
    if (kind == StudyKind::kernel && kernel_rungs < 5)
      throw DomainError("StudyConfig: kernel regression needs at least 5 rungs");
    if (kind == StudyKind::hrange) {
      if (hurst_ladder.empty()) throw DomainError("StudyConfig: hurst_ladder must not be empty");
      for (std::size_t i = 0; i < hurst_ladder.size(); ++i) {
        if (!(hurst_ladder[i] > 0.5 && hurst_ladder[i] < 1.0))
          throw DomainError("StudyConfig: hrange needs every H in (1/2, 1)");
        if (i > 0 && hurst_ladder[i] <= hurst_ladder[i - 1])
          throw DomainError("StudyConfig: hurst_ladder must be strictly increasing");
      }
    }
    if (lemma3_R && !(*lemma3_R > 0.0)) throw DomainError("StudyConfig: lemma3_R must be positive");
  }
};

// ----------------------------------------------------------------------------
// Statistics

struct RungStats {
  std::string label;
  double x = 0.0;  // ladder coordinate (n, lag, ...)
  std::optional<double> hurst;
  std::size_t count = 0;
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
  double median = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
  std::optional<double> exceedance;
  std::vector<std::pair<std::string, double>> extras;

  std::optional<double> extra(const std::string& key) const {
    for (const auto& [k, v] : extras)
      if (k == key) return v;
    return std::nullopt;
  }
};

/// Quantile with linear interpolation between order statistics (Hyndman-Fan type 7).
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw DomainError("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Summary of a sample; se = s / sqrt(n), 0 for a single observation.
inline RungStats summarize(const std::vector<double>& sample, double x, std::string label = {}) {
  if (sample.empty()) throw DomainError("summarize: empty sample");
  RungStats r;
  r.label = std::move(label);
  r.x = x;
  r.count = sample.size();
  const double n = static_cast<double>(sample.size());
  double sum = 0.0;
  for (double v : sample) sum += v;
  r.mean = sum / n;
  if (sample.size() > 1) {
    double ss = 0.0;
    for (double v : sample) ss += (v - r.mean) * (v - r.mean);
    r.se = std::sqrt(ss / (n - 1.0) / n);
  }
  r.median = quantile(sample, 0.5);
  r.q10 = quantile(sample, 0.1);
  r.q90 = quantile(sample, 0.9);
  return r;
}

struct SlopeFit {
  std::string name;
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double confidence = 0.95;
  std::size_t points = 0;
};

/// Least-squares line y = a + b x with a Student-t interval on b (n - 2 dof).
inline SlopeFit fit_line(const std::vector<double>& x, const std::vector<double>& y, std::string name,
                         double confidence = 0.95) {
  if (x.size() != y.size()) throw DomainError("fit_line: x and y differ in length");
  if (x.size() < 3) throw DomainError("fit_line: need at least 3 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("fit_line: x values are all equal");
  SlopeFit f;
  f.name = std::move(name);
  f.points = x.size();
  f.confidence = confidence;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - f.intercept - f.slope * x[i];
    ssr += e * e;
  }
  f.slope_se = std::sqrt(ssr / (n - 2.0) / sxx);
  const boost::math::students_t dist(n - 2.0);
  const double t = boost::math::quantile(dist, 0.5 + confidence / 2.0);
  f.ci_low = f.slope - t * f.slope_se;
  f.ci_high = f.slope + t * f.slope_se;
  return f;
}

/// Slope of log y against log x; empty when some y is not positive.
inline std::optional<SlopeFit> fit_loglog(const std::vector<double>& x, const std::vector<double>& y,
                                          std::string name) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(y[i] > 0.0) || !(x[i] > 0.0)) return std::nullopt;
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  if (lx.size() < 3) return std::nullopt;
  return fit_line(lx, ly, std::move(name));
}

struct StudyReport {
  StudyKind kind = StudyKind::mollify;
  std::vector<RungStats> rungs;
  std::vector<SlopeFit> fits;
  std::vector<std::pair<std::string, double>> summary;
  std::vector<std::string> flags;
  bool inconclusive = false;
  nlohmann::ordered_json config;

  std::optional<double> value(const std::string& key) const {
    for (const auto& [k, v] : summary)
      if (k == key) return v;
    return std::nullopt;
  }
  const SlopeFit* fit(const std::string& name) const {
    for (const auto& f : fits)
      if (f.name == name) return &f;
    return nullptr;
  }
};

inline nlohmann::ordered_json to_json(const RungStats& r) {
  nlohmann::ordered_json j;
  j["label"] = r.label;
  j["x"] = r.x;
  if (r.hurst) j["hurst"] = *r.hurst;
  j["count"] = r.count;
  j["mean"] = r.mean;
  j["se"] = r.se;
  j["median"] = r.median;
  j["q10"] = r.q10;
  j["q90"] = r.q90;
  if (r.exceedance) j["exceedance"] = *r.exceedance;
  auto extras = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.extras) extras[k] = v;
  j["extras"] = extras;
  return j;
}

inline nlohmann::ordered_json to_json(const SlopeFit& f) {
  return {{"name", f.name},         {"slope", f.slope},     {"intercept", f.intercept},
          {"slope_se", f.slope_se}, {"ci_low", f.ci_low},   {"ci_high", f.ci_high},
          {"confidence", f.confidence}, {"points", f.points}};
}

inline nlohmann::ordered_json to_json(const StudyReport& rep) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(rep.kind);
  j["inconclusive"] = rep.inconclusive;
  j["flags"] = rep.flags;
  auto summary = nlohmann::ordered_json::object();
  for (const auto& [k, v] : rep.summary) summary[k] = v;
  j["summary"] = summary;
  auto rungs = nlohmann::ordered_json::array();
  for (const auto& r : rep.rungs) rungs.push_back(to_json(r));
  j["rungs"] = rungs;
  auto fits = nlohmann::ordered_json::array();
  for (const auto& f : rep.fits) fits.push_back(to_json(f));
  j["fits"] = fits;
  j["config"] = rep.config;
  return j;
}

/// Flat CSV, one row per rung; extras are written as key=value pairs in the last column.
inline void write_report_csv(std::ostream& os, const StudyReport& rep) {
  os << "kind,label,x,hurst,count,mean,se,median,q10,q90,exceedance,extras\n";
  for (const auto& r : rep.rungs) {
    os << to_string(rep.kind) << ',' << r.label << ',' << format_double(r.x) << ','
       << (r.hurst ? format_double(*r.hurst) : "") << ',' << r.count << ',' << format_double(r.mean) << ','
       << format_double(r.se) << ',' << format_double(r.median) << ',' << format_double(r.q10) << ','
       << format_double(r.q90) << ',' << (r.exceedance ? format_double(*r.exceedance) : "") << ',';
    for (std::size_t i = 0; i < r.extras.size(); ++i)
      os << (i ? ";" : "") << r.extras[i].first << '=' << format_double(r.extras[i].second);
    os << '\n';
  }
}

inline nlohmann::ordered_json study_config_json(const StudyConfig& cfg) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(cfg.kind);
  j["ladder"] = cfg.ladder;
  j["replicates"] = cfg.replicates;
  j["steps"] = cfg.steps;
  j["dt"] = cfg.dt();
  j["level"] = cfg.level;
  j["seed"] = cfg.seed;
  j["epsilon"] = cfg.epsilon;
  if (cfg.lemma3_R) j["lemma3_R"] = *cfg.lemma3_R;
  j["hurst_ladder"] = cfg.hurst_ladder;
  j["kernel_rungs"] = cfg.kernel_rungs;
  j["besov_stride"] = cfg.options.besov_stride;
  j["seminorm_stride"] = cfg.seminorm_stride;
  j["wiener_weighting"] = to_string(cfg.options.wiener_weighting);
  j["hurst"] = cfg.spec.exponent.hurst;
  j["alpha"] = cfg.spec.exponent.alpha;
  j["horizon"] = cfg.spec.horizon;
  j["modes"] = cfg.spec.modes();
  j["noise_modes"] = cfg.spec.qspec.modes();
  j["exploratory"] = cfg.exploratory;
  return j;
}

// ----------------------------------------------------------------------------
// Shared machinery

namespace detail {

/// Runs body(r) for r < count over OpenMP threads. Results must be written by
/// index; the first exception (lowest r) is rethrown after the loop.
template <class Body>
void parallel_replicates(std::size_t count, Body&& body) {
  std::vector<std::exception_ptr> errors(count);
  const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long r = 0; r < n; ++r) {
    try {
      body(static_cast<std::size_t>(r));
    } catch (...) {
      errors[static_cast<std::size_t>(r)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::uint64_t replicate_seed(std::uint64_t master, std::size_t r) {
  return derive_seed(master, {stream::replicate, r});
}

inline double seminorm_at_end(const GridFunction& g, double alpha, std::size_t stride) {
  return holder_seminorm_profile(g, alpha, stride).back();
}

inline GridFunction difference(const GridFunction& a, const GridFunction& b) {
  std::vector<double> v(a.values.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = a.values[k] - b.values[k];
  return GridFunction(a.t0, a.t1, std::move(v));
}

inline std::vector<FieldVector> difference(const std::vector<FieldVector>& a, const std::vector<FieldVector>& b) {
  std::vector<FieldVector> out(a.size(), FieldVector(a.front().size()));
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t j = 0; j < a[k].size(); ++j) out[k][j] = a[k][j] - b[k][j];
  return out;
}

/// Label form of a ladder value (%g), not used for data.
inline std::string label_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

inline void require_window(const StudyConfig& cfg, std::size_t largest_rate) {
  const double h = cfg.dt();
  if (h * 4.0 * static_cast<double>(largest_rate) > 1.0 + 1e-12)
    throw DomainError("study: mollification window unresolved at n = " + std::to_string(largest_rate) +
                      "; need dt * 4n <= 1, i.e. K >= " +
                      std::to_string(static_cast<long long>(std::ceil(4.0 * largest_rate * cfg.spec.horizon))));
}

}  // namespace detail

/// Distances between a stopped field and its mollifications, one entry per rate.
struct MollificationDistances {
  std::vector<double> seminorm;  // sum_j mu_j^(1/2) ||B^{N,n}_j - B^N_j||_{alpha,0;T}
  std::vector<double> sup;       // sum_j mu_j^(1/2) sup_{t >= 1/n} |B^{N,n}_j(t) - B^N_j(t)|
};

inline MollificationDistances mollification_distances(const FieldPath& field, double alpha,
                                                      const std::vector<std::size_t>& rates,
                                                      std::size_t stride = 1) {
  require_order(alpha, "mollification_distances");
  MollificationDistances out{std::vector<double>(rates.size(), 0.0), std::vector<double>(rates.size(), 0.0)};
  for (std::size_t j = 0; j < field.size(); ++j) {
    if (field.weights[j] == 0.0) continue;
    const auto& base = field.modes[j];
    for (std::size_t i = 0; i < rates.size(); ++i) {
      const auto diff = detail::difference(mollify(base, rates[i]).values, base);
      out.seminorm[i] += field.weights[j] * detail::seminorm_at_end(diff, alpha, stride);
      const double start = base.t0 + 1.0 / static_cast<double>(rates[i]);
      double sup = 0.0;
      for (std::size_t k = 0; k <= diff.steps(); ++k)
        if (diff.time(k) >= start - 1e-12) sup = std::max(sup, std::abs(diff.values[k]));
      out.sup[i] += field.weights[j] * sup;
    }
  }
  return out;
}

/// One replicate of the coupled ladder: every rate shares the noise draw.
struct CauchyReplicate {
  std::vector<double> besov;      // ||u_{N,n}||_{alpha,2,T} per entry of CauchyEnsemble::rates
  std::vector<double> gap;        // ||u_{N,n} - u_{N,2n}||_{alpha,2,T} per ladder rung
  std::vector<double> noise_gap;  // sum_j mu_j^(1/2) ||B^{N,n}_j - B^{N,2n}_j||_{alpha,0;T} per ladder rung
  double tau = 0.0;
  bool stopped = false;
};

struct CauchyEnsemble {
  std::vector<std::size_t> ladder;  // rung n pairs u_{N,n} with u_{N,2n}
  std::vector<std::size_t> rates;   // sorted union of n and 2n
  std::vector<CauchyReplicate> replicates;
  bool diagnostic = false;

  std::size_t rate_index(std::size_t n) const {
    return static_cast<std::size_t>(std::lower_bound(rates.begin(), rates.end(), n) - rates.begin());
  }
  std::vector<double> gaps(std::size_t rung) const {
    std::vector<double> v;
    for (const auto& r : replicates) v.push_back(r.gap[rung]);
    return v;
  }
};

/// Monte-Carlo ensemble of smoothed solutions u_{N,n}, n and 2n for every
/// ladder rung, on per-replicate noise derived from (cfg.seed, r).
inline CauchyEnsemble run_cauchy_ensemble(const StudyConfig& cfg, const ProblemSpec& spec,
                                          bool diagnostic = false, bool with_noise_gap = true) {
  spec.validate(diagnostic);
  CauchyEnsemble ens;
  ens.ladder = cfg.ladder;
  ens.diagnostic = diagnostic;
  std::set<std::size_t> rs;
  for (std::size_t n : cfg.ladder) {
    rs.insert(n);
    rs.insert(2 * n);
  }
  ens.rates.assign(rs.begin(), rs.end());
  detail::require_window(cfg, ens.rates.back());
  const double alpha = spec.exponent.alpha;
  const double dt = cfg.dt();
  const FbmSampler sampler(spec.exponent.hurst, cfg.steps, spec.horizon);
  ens.replicates.resize(cfg.replicates);
  detail::parallel_replicates(cfg.replicates, [&](std::size_t r) {
    const auto noise = make_noise(spec.qspec, sampler, detail::replicate_seed(cfg.seed, r), spec.modes());
    const auto stopped = stop_at_level(noise.fbm, alpha, cfg.level, diagnostic);
    std::vector<std::vector<FieldVector>> states;
    CauchyReplicate out;
    for (std::size_t n : ens.rates) {
      auto sol = solve_smoothed(spec, noise, stopped, n, dt, cfg.options, diagnostic);
      out.besov.push_back(sol.ledger.norm);
      states.push_back(std::move(sol.states));
    }
    std::vector<std::vector<GridFunction>> moll;
    if (with_noise_gap) {
      moll.resize(ens.rates.size());
      for (std::size_t i = 0; i < ens.rates.size(); ++i)
        for (const auto& m : stopped.field.modes) moll[i].push_back(mollify(m, ens.rates[i]).values);
    }
    for (std::size_t n : ens.ladder) {
      const std::size_t a = ens.rate_index(n), b = ens.rate_index(2 * n);
      const auto diff = detail::difference(states[a], states[b]);
      out.gap.push_back(besov_norm_path(diff, alpha, spec.horizon, cfg.options.besov_stride).norm);
      double ng = 0.0;
      if (with_noise_gap)
        for (std::size_t j = 0; j < stopped.field.size(); ++j)
          if (stopped.field.weights[j] != 0.0)
            ng += stopped.field.weights[j] *
                  detail::seminorm_at_end(detail::difference(moll[a][j], moll[b][j]), alpha, cfg.seminorm_stride);
      out.noise_gap.push_back(ng);
    }
    out.tau = stopped.tau.time;
    out.stopped = stopped.tau.early;
    ens.replicates[r] = std::move(out);
  });
  return ens;
}

// ----------------------------------------------------------------------------
// Studies

/// Monte-Carlo mean of the weighted seminorm distance between the stopped fBm
/// field and its mollification at each ladder rate.
inline StudyReport study_mollification(const StudyConfig& cfg) {
  if (cfg.kind != StudyKind::mollify) throw DomainError("study_mollification: config kind must be mollify");
  cfg.validate();
  const auto& spec = cfg.spec;
  spec.validate();
  detail::require_window(cfg, cfg.ladder.back());
  const double alpha = spec.exponent.alpha;
  const FbmSampler sampler(spec.exponent.hurst, cfg.steps, spec.horizon);
  std::vector<MollificationDistances> rows(cfg.replicates);
  std::vector<char> stopped(cfg.replicates, 0);
  detail::parallel_replicates(cfg.replicates, [&](std::size_t r) {
    const auto fbm = build_fbm_field(spec.qspec, sampler, detail::replicate_seed(cfg.seed, r), spec.modes());
    const auto st = stop_at_level(fbm, alpha, cfg.level);
    stopped[r] = st.tau.early ? 1 : 0;
    rows[r] = mollification_distances(st.field, alpha, cfg.ladder, cfg.seminorm_stride);
  });

  StudyReport rep;
  rep.kind = StudyKind::mollify;
  rep.config = study_config_json(cfg);
  std::vector<double> xs, means, sups;
  for (std::size_t i = 0; i < cfg.ladder.size(); ++i) {
    std::vector<double> sample, sup;
    for (const auto& row : rows) {
      sample.push_back(row.seminorm[i]);
      sup.push_back(row.sup[i]);
    }
    auto rs = summarize(sample, static_cast<double>(cfg.ladder[i]), "n=" + std::to_string(cfg.ladder[i]));
    const auto ss = summarize(sup, rs.x);
    rs.extras = {{"sup_distance_mean", ss.mean}, {"sup_distance_se", ss.se}};
    xs.push_back(rs.x);
    means.push_back(rs.mean);
    sups.push_back(ss.mean);
    rep.rungs.push_back(std::move(rs));
  }
  if (auto f = fit_loglog(xs, means, "log_mean_vs_log_n")) rep.fits.push_back(*f);
  else rep.flags.push_back("seminorm fit skipped: nonpositive means");
  if (auto f = fit_loglog(xs, sups, "log_sup_vs_log_n")) rep.fits.push_back(*f);
  const double stopped_fraction =
      static_cast<double>(std::count(stopped.begin(), stopped.end(), 1)) / static_cast<double>(cfg.replicates);
  rep.summary = {{"strictly_decreasing", detail::strictly_decreasing(means) ? 1.0 : 0.0},
                 {"final_over_first", means.front() > 0.0 ? means.back() / means.front() : 0.0},
                 {"stopped_fraction", stopped_fraction}};
  return rep;
}

inline StudyReport summarize_cauchy(const CauchyEnsemble& ens, const StudyConfig& cfg) {
  StudyReport rep;
  rep.kind = StudyKind::cauchy;
  rep.config = study_config_json(cfg);
  std::vector<double> xs, medians;
  for (std::size_t i = 0; i < ens.ladder.size(); ++i) {
    const auto sample = ens.gaps(i);
    auto rs = summarize(sample, static_cast<double>(ens.ladder[i]),
                        "n=" + std::to_string(ens.ladder[i]) + ",2n=" + std::to_string(2 * ens.ladder[i]));
    const auto above = std::count_if(sample.begin(), sample.end(), [&](double v) { return v > cfg.epsilon; });
    rs.exceedance = static_cast<double>(above) / static_cast<double>(sample.size());
    xs.push_back(rs.x);
    medians.push_back(rs.median);
    rep.rungs.push_back(std::move(rs));
  }
  if (auto f = fit_loglog(xs, medians, "log_median_vs_log_n")) rep.fits.push_back(*f);
  else rep.flags.push_back("fit skipped: nonpositive medians (metric identically zero when h = 0)");
  std::size_t per_path = 0, stopped = 0;
  for (const auto& r : ens.replicates) {
    per_path += detail::strictly_decreasing(r.gap) ? 1 : 0;
    stopped += r.stopped ? 1 : 0;
  }
  const double R = static_cast<double>(ens.replicates.size());
  rep.summary = {{"median_strictly_decreasing", detail::strictly_decreasing(medians) ? 1.0 : 0.0},
                 {"final_over_first", medians.front() > 0.0 ? medians.back() / medians.front() : 0.0},
                 {"paths_decreasing_fraction", static_cast<double>(per_path) / R},
                 {"stopped_fraction", static_cast<double>(stopped) / R}};
  if (ens.diagnostic) rep.flags.push_back("diagnostic: parameters outside the existence range");
  return rep;
}

/// Distribution of ||u_{N,n} - u_{N,2n}||_{alpha,2,T} per rung with coupled noise.
inline StudyReport study_cauchy(const StudyConfig& cfg) {
  if (cfg.kind != StudyKind::cauchy) throw DomainError("study_cauchy: config kind must be cauchy");
  cfg.validate();
  return summarize_cauchy(run_cauchy_ensemble(cfg, cfg.spec, false, false), cfg);
}

/// Ratio E[||u_{N,n} - u_{N,2n}||^2 1_A] / E[(sum_j mu_j^(1/2) ||B^{N,n}_j - B^{N,2n}_j||_{alpha,0;T})^2]
/// for the rungs n in `rungs` (all ladder rungs when empty), with A the event
/// that both Besov norms are <= R.
inline StudyReport summarize_lemma3(const CauchyEnsemble& ens, const StudyConfig& cfg,
                                    std::vector<std::size_t> rungs = {}) {
  StudyReport rep;
  rep.kind = StudyKind::lemma3;
  rep.config = study_config_json(cfg);
  if (rungs.empty()) rungs = ens.ladder;
  double R = 0.0;
  if (cfg.lemma3_R) {
    R = *cfg.lemma3_R;
  } else {
    std::vector<double> pooled;
    for (const auto& r : ens.replicates) pooled.insert(pooled.end(), r.besov.begin(), r.besov.end());
    R = quantile(pooled, 0.9);
  }
  const double total = static_cast<double>(ens.replicates.size());
  std::vector<double> ratios;
  for (std::size_t n : rungs) {
    const auto it = std::find(ens.ladder.begin(), ens.ladder.end(), n);
    if (it == ens.ladder.end()) throw DomainError("summarize_lemma3: rung not on the ensemble ladder");
    const auto i = static_cast<std::size_t>(it - ens.ladder.begin());
    const std::size_t a = ens.rate_index(n), b = ens.rate_index(2 * n);
    std::vector<double> num, den;
    std::size_t kept = 0;
    for (const auto& r : ens.replicates) {
      const bool in = r.besov[a] <= R && r.besov[b] <= R;
      kept += in ? 1 : 0;
      num.push_back(in ? r.gap[i] * r.gap[i] : 0.0);
      den.push_back(r.noise_gap[i] * r.noise_gap[i]);
    }
    const auto sn = summarize(num, 0.0), sd = summarize(den, 0.0);
    RungStats rs;
    rs.label = "n=" + std::to_string(n) + ",m=" + std::to_string(2 * n);
    rs.x = static_cast<double>(n);
    rs.count = ens.replicates.size();
    rs.mean = sn.mean == 0.0 ? 0.0 : sn.mean / sd.mean;
    // Delta-method standard error of a ratio of means.
    if (sn.mean > 0.0 && sd.mean > 0.0) {
      double cov = 0.0;
      for (std::size_t k = 0; k < num.size(); ++k) cov += (num[k] - sn.mean) * (den[k] - sd.mean);
      cov /= std::max(total - 1.0, 1.0) * total;
      const double rel = sn.se * sn.se / (sn.mean * sn.mean) + sd.se * sd.se / (sd.mean * sd.mean) -
                         2.0 * cov / (sn.mean * sd.mean);
      rs.se = rs.mean * std::sqrt(std::max(rel, 0.0));
    }
    rs.median = rs.q10 = rs.q90 = rs.mean;
    rs.extras = {{"numerator", sn.mean},
                 {"numerator_se", sn.se},
                 {"denominator", sd.mean},
                 {"denominator_se", sd.se},
                 {"restricted_count", static_cast<double>(kept)},
                 {"R", R}};
    if (kept == 0) {
      rep.inconclusive = true;
      rep.flags.push_back("inconclusive: restricted sample empty at " + rs.label + " (R too small)");
    }
    if (sd.mean == 0.0 && sn.mean > 0.0) {
      rep.inconclusive = true;
      rep.flags.push_back("inconclusive: zero noise distance at " + rs.label);
    }
    ratios.push_back(rs.mean);
    rep.rungs.push_back(std::move(rs));
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  rep.summary = {{"R", R}, {"ratio_min", *lo}, {"ratio_max", *hi}, {"ratio_spread", *lo > 0.0 ? *hi / *lo : 0.0}};
  if (ens.diagnostic) rep.flags.push_back("diagnostic: parameters outside the existence range");
  return rep;
}

inline StudyReport study_lemma3(const StudyConfig& cfg) {
  if (cfg.kind != StudyKind::lemma3) throw DomainError("study_lemma3: config kind must be lemma3");
  cfg.validate();
  return summarize_lemma3(run_cauchy_ensemble(cfg, cfg.spec, false, true), cfg);
}

/// Smallest M with green_tail_bound(M, diffusion) <= tol.
inline std::size_t kernel_modes_for(double diffusion, double tol = 1e-12) {
  std::size_t m = 8;
  while (green_tail_bound(m, diffusion) > tol) m += 8;
  return m;
}

/// Exponent fits on the exact spectral kernel: sup_x G(x, 1/2; 0, lag) against
/// the lag, and |G(x,t;y,v) - G(x,t;y,r)| against v - r.
inline StudyReport study_kernel(const StudyConfig& cfg) {
  if (cfg.kind != StudyKind::kernel) throw DomainError("study_kernel: config kind must be kernel");
  cfg.validate();
  const auto& kappa = cfg.spec.diffusivity;
  if (kappa.kind() != "constant") throw DomainError("study_kernel: requires constant diffusivity");
  const double k0 = kappa.params().at(0);
  const std::size_t rungs = cfg.kernel_rungs;
  const double lag_lo = 1e-4, lag_hi = 1e-2;
  const std::size_t M = kernel_modes_for(k0 * lag_lo);
  const auto basis = build_basis(M);

  StudyReport rep;
  rep.kind = StudyKind::kernel;
  rep.config = study_config_json(cfg);
  rep.config["kernel_modes"] = M;
  std::vector<double> lags, sups;
  for (std::size_t i = 0; i < rungs; ++i) {
    const double lag = lag_lo * std::pow(lag_hi / lag_lo, static_cast<double>(i) / static_cast<double>(rungs - 1));
    double sup = 0.0;
    for (int xi = 0; xi <= 200; ++xi)
      sup = std::max(sup, std::abs(green_from_diffusion(xi / 200.0, 0.5, k0 * lag, basis, 1e-12)));
    RungStats rs;
    rs.label = "sup_kernel";
    rs.x = lag;
    rs.count = 1;
    rs.mean = rs.median = rs.q10 = rs.q90 = sup;
    lags.push_back(lag);
    sups.push_back(sup);
    rep.rungs.push_back(std::move(rs));
  }
  rep.fits.push_back(*fit_loglog(lags, sups, "sup_kernel_time_exponent"));

  const double t = 0.3, r = 0.05, x = 0.3, y = 0.4;
  const double inc_lo = 1e-3, inc_hi = 0.128;
  const std::size_t Mi = kernel_modes_for(k0 * (t - r - inc_hi));
  const auto bi = build_basis(Mi);
  const double base = green_from_diffusion(x, y, k0 * (t - r), bi, 1e-12);
  std::vector<double> incs, diffs;
  for (std::size_t i = 0; i < rungs; ++i) {
    const double d = inc_lo * std::pow(inc_hi / inc_lo, static_cast<double>(i) / static_cast<double>(rungs - 1));
    const double value = std::abs(green_from_diffusion(x, y, k0 * (t - r - d), bi, 1e-12) - base);
    RungStats rs;
    rs.label = "time_increment";
    rs.x = d;
    rs.count = 1;
    rs.mean = rs.median = rs.q10 = rs.q90 = value;
    incs.push_back(d);
    diffs.push_back(value);
    rep.rungs.push_back(std::move(rs));
  }
  if (auto f = fit_loglog(incs, diffs, "time_increment_exponent")) rep.fits.push_back(*f);
  else rep.flags.push_back("increment fit skipped: zero increments");

  double asym = 0.0;
  for (int a = 0; a <= 20; ++a)
    for (int b = 0; b <= 20; ++b)
      asym = std::max(asym, std::abs(green_from_diffusion(a / 20.0, b / 20.0, k0 * 1e-3, basis, 1e-12) -
                                     green_from_diffusion(b / 20.0, a / 20.0, k0 * 1e-3, basis, 1e-12)));
  rep.summary = {{"sup_kernel_exponent", rep.fits[0].slope},
                 {"time_increment_exponent", rep.fits.size() > 1 ? rep.fits[1].slope : 0.0},
                 {"symmetry_residual", asym},
                 {"modes", static_cast<double>(M)}};
  return rep;
}

/// Exponent used by the Hurst sweep: the configured alpha when admissible for
/// H, the midpoint of (1 - H, 1/3) when that interval is nonempty, and
/// 1 - H + 0.01 (diagnostic only) below H = 2/3.
inline HolderExponent hrange_exponent(double hurst, double alpha) {
  if (HolderExponent::admissible(alpha, hurst)) return {alpha, hurst};
  if (hurst > 2.0 / 3.0) return {0.5 * ((1.0 - hurst) + 1.0 / 3.0), hurst};
  return {1.0 - hurst + 0.01, hurst};
}

/// Cauchy study repeated across the Hurst ladder; rungs carry their H.
inline StudyReport study_hrange(const StudyConfig& cfg) {
  if (cfg.kind != StudyKind::hrange) throw DomainError("study_hrange: config kind must be hrange");
  cfg.validate();
  StudyReport rep;
  rep.kind = StudyKind::hrange;
  rep.config = study_config_json(cfg);
  for (double H : cfg.hurst_ladder) {
    ProblemSpec spec = cfg.spec;
    spec.exponent = hrange_exponent(H, cfg.spec.exponent.alpha);
    const bool diagnostic = !spec.exponent.admissible();
    const auto ens = run_cauchy_ensemble(cfg, spec, diagnostic, false);
    auto sub = summarize_cauchy(ens, cfg);
    const std::string tag = "H=" + detail::label_number(H);
    for (auto& r : sub.rungs) {
      r.hurst = H;
      r.label = tag + "," + r.label;
      r.extras.push_back({"alpha", spec.exponent.alpha});
      r.extras.push_back({"diagnostic", diagnostic ? 1.0 : 0.0});
      rep.rungs.push_back(std::move(r));
    }
    for (auto& f : sub.fits) {
      f.name = tag + "," + f.name;
      rep.fits.push_back(std::move(f));
    }
    if (diagnostic)
      rep.flags.push_back(tag + ": diagnostic only, no admissible alpha since 1 - H >= 1/3; run at alpha = " +
                          format_double(spec.exponent.alpha));
    for (const auto& [k, v] : sub.summary) rep.summary.push_back({tag + "," + k, v});
  }
  return rep;
}

inline StudyReport run_study(const StudyConfig& cfg) {
  switch (cfg.kind) {
    case StudyKind::mollify: return study_mollification(cfg);
    case StudyKind::cauchy: return study_cauchy(cfg);
    case StudyKind::lemma3: return study_lemma3(cfg);
    case StudyKind::kernel: return study_kernel(cfg);
    case StudyKind::hrange: return study_hrange(cfg);
  }
  throw DomainError("run_study: unknown study kind");
}

}  // namespace mildheat
