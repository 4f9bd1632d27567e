#include "psfdecon/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

namespace psfdecon {

namespace {

Index mirror(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

// Running-sum box mean along one axis.
void smooth_axis(Eigen::ArrayXd& v, const Dims& d, int axis, int s) {
  const Index n = d[axis];
  const Index stride = axis == 0 ? 1 : (axis == 1 ? d.nx : d.nx * d.ny);
  const Index r = s / 2;
  const Index lines = d.count() / n;
  std::vector<double> line(static_cast<size_t>(n)), out(static_cast<size_t>(n));
  for (Index l = 0; l < lines; ++l) {
    Index start;
    if (axis == 0) start = l * n;
    else if (axis == 1) start = (l % d.nx) + (l / d.nx) * d.nx * d.ny;
    else start = l;
    for (Index i = 0; i < n; ++i) line[i] = v[start + i * stride];
    double acc = 0.0;
    for (Index t = -r; t <= r; ++t) acc += line[mirror(t, n)];
    for (Index i = 0; i < n; ++i) {
      out[i] = acc / static_cast<double>(s);
      acc += line[mirror(i + r + 1, n)] - line[mirror(i - r, n)];
    }
    for (Index i = 0; i < n; ++i) v[start + i * stride] = out[i];
  }
}

}  // namespace

Volume box_smooth(const Volume& v, int s) {
  if (s < 1 || s % 2 == 0) throw ConfigError("box_smooth: window size must be odd and >= 1");
  Eigen::ArrayXd out = v.values();
  if (s > 1)
    for (int a = 0; a < 3; ++a) smooth_axis(out, v.dims(), a, s);
  return v.with_values(out);
}

Quantization lloyd_max_quantize(const Eigen::ArrayXd& values, int levels, int max_sweeps,
                                double tol) {
  if (levels < 1) throw ConfigError("lloyd_max_quantize: need at least one level");
  if (values.size() == 0) throw ConfigError("lloyd_max_quantize: no values");
  if (!values.allFinite()) throw ConfigError("lloyd_max_quantize: non-finite value");

  const Index m = values.size();
  std::vector<Index> order(static_cast<size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return values[a] < values[b]; });
  std::vector<double> sorted(static_cast<size_t>(m));
  for (Index i = 0; i < m; ++i) sorted[i] = values[order[i]];

  std::vector<double> distinct;
  for (double v : sorted)
    if (distinct.empty() || v != distinct.back()) distinct.push_back(v);

  Quantization q;
  q.requested_levels = levels;
  const int j_count = std::min<int>(levels, static_cast<int>(distinct.size()));

  // Quantile start, deduplicated and topped up from the distinct values.
  std::vector<double> lv;
  for (int j = 0; j < j_count; ++j) {
    const double p = (static_cast<double>(j) + 0.5) / j_count;
    lv.push_back(sorted[std::min<Index>(m - 1, static_cast<Index>(p * static_cast<double>(m)))]);
  }
  std::sort(lv.begin(), lv.end());
  lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
  for (size_t k = 0; lv.size() < static_cast<size_t>(j_count) && k < distinct.size(); ++k) {
    const size_t idx = (k * 7919) % distinct.size();
    if (!std::binary_search(lv.begin(), lv.end(), distinct[idx])) {
      lv.insert(std::upper_bound(lv.begin(), lv.end(), distinct[idx]), distinct[idx]);
    }
  }

  std::vector<double> s1(static_cast<size_t>(m) + 1, 0.0);
  for (Index i = 0; i < m; ++i) s1[i + 1] = s1[i] + sorted[i];

  // Interval k covers sorted[b[k], b[k+1]).
  std::vector<Index> bounds(lv.size() + 1);
  auto assign = [&] {
    bounds.front() = 0;
    bounds.back() = m;
    for (size_t k = 1; k < lv.size(); ++k) {
      const double cut = 0.5 * (lv[k - 1] + lv[k]);
      bounds[k] = std::upper_bound(sorted.begin(), sorted.end(), cut) - sorted.begin();
    }
  };
  auto mse_now = [&] {
    double acc = 0.0;
    for (size_t k = 0; k < lv.size(); ++k)
      for (Index i = bounds[k]; i < bounds[k + 1]; ++i) acc += (sorted[i] - lv[k]) * (sorted[i] - lv[k]);
    return acc / static_cast<double>(m);
  };

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    assign();
    double move = 0.0;
    for (size_t k = 0; k < lv.size(); ++k) {
      const Index c = bounds[k + 1] - bounds[k];
      if (c == 0) continue;
      const double mean = (s1[bounds[k + 1]] - s1[bounds[k]]) / static_cast<double>(c);
      move = std::max(move, std::abs(mean - lv[k]));
      lv[k] = mean;
    }
    std::sort(lv.begin(), lv.end());
    assign();
    const double mse = mse_now();
    if (!q.mse.empty() && mse > q.mse.back() * (1.0 + 1e-12) + 1e-300)
      throw NumericError("lloyd_max_quantize: distortion increased", q.mse);
    q.mse.push_back(mse);
    q.sweeps = sweep + 1;
    if (move < tol) break;
  }

  q.levels = lv;
  q.assignment.resize(m);
  for (size_t k = 0; k < lv.size(); ++k)
    for (Index i = bounds[k]; i < bounds[k + 1]; ++i) q.assignment[order[i]] = static_cast<int>(k);
  return q;
}

NoiseEstimate estimate_noise(const Volume& y, const NoiseEstimateOptions& opts) {
  if (opts.levels < 2) throw ConfigError("estimate_noise: need at least two levels");
  const Volume ys = box_smooth(y, opts.s);
  const Quantization q = lloyd_max_quantize(ys.values(), opts.levels);

  NoiseEstimate est;
  est.levels_used = static_cast<int>(q.levels.size());
  const size_t nl = q.levels.size();
  std::vector<double> sum(nl, 0.0);
  std::vector<Index> count(nl, 0);
  for (Index i = 0; i < y.size(); ++i) {
    sum[q.assignment[i]] += y.values()[i];
    ++count[q.assignment[i]];
  }
  std::vector<double> ss(nl, 0.0);
  for (Index i = 0; i < y.size(); ++i) {
    const int k = q.assignment[i];
    const double dv = y.values()[i] - sum[k] / static_cast<double>(count[k]);
    ss[k] += dv * dv;
  }

  std::vector<double> xs, vs, ws;
  for (size_t k = 0; k < nl; ++k) {
    SegmentStat st;
    st.j = static_cast<int>(k) + 1;
    st.level = q.levels[k];
    st.count = count[k];
    if (count[k] > 0) st.mean = sum[k] / static_cast<double>(count[k]);
    if (count[k] > 1) st.var = ss[k] / static_cast<double>(count[k] - 1);
    st.used = count[k] >= std::max<Index>(opts.min_count, 2);
    if (st.used) {
      xs.push_back(st.mean);
      vs.push_back(st.var);
      ws.push_back(opts.weighted ? static_cast<double>(count[k]) : 1.0);
    }
    est.segments.push_back(st);
  }
  if (xs.size() < 2)
    throw NumericError("estimate_noise: fewer than two segments with enough voxels");

  // Weighted least squares var = a mean + b restricted to a, b >= 0.
  double sw = 0, sx = 0, sv = 0, sxx = 0, sxv = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sw += ws[i];
    sx += ws[i] * xs[i];
    sv += ws[i] * vs[i];
    sxx += ws[i] * xs[i] * xs[i];
    sxv += ws[i] * xs[i] * vs[i];
  }
  auto sse = [&](double a, double b) {
    double acc = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) acc += ws[i] * std::pow(vs[i] - a * xs[i] - b, 2);
    return acc;
  };
  std::vector<NoiseParams> cands{{0.0, 0.0}, {0.0, std::max(0.0, sv / sw)}};
  if (sxx > 0.0) cands.push_back({std::max(0.0, sxv / sxx), 0.0});
  const double det = sw * sxx - sx * sx;
  if (det > 0.0) {
    const double a = (sw * sxv - sx * sv) / det;
    const double b = (sv - a * sx) / sw;
    if (a >= 0.0 && b >= 0.0) cands.push_back({a, b});
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : cands) {
    const double e = sse(c.a, c.b);
    if (e < best) {
      best = e;
      est.params = c;
    }
  }

  const double vbar = sv / sw;
  double sst = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) sst += ws[i] * std::pow(vs[i] - vbar, 2);
  est.r2 = sst > 0.0 ? 1.0 - best / sst : (best == 0.0 ? 1.0 : 0.0);
  return est;
}

void write_noise_report_csv(std::ostream& os, const NoiseEstimate& est) {
  const auto prec = os.precision(17);
  os << "j,level,I_hat,var_hat,count,a,b,r2\n";
  for (const auto& s : est.segments)
    os << s.j << ',' << s.level << ',' << s.mean << ',' << s.var << ',' << s.count << ",,,\n";
  os << "fit,,,,," << est.params.a << ',' << est.params.b << ',' << est.r2 << '\n';
  os.precision(prec);
}

NoiseParams read_noise_report_csv(std::istream& is) {
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("fit,", 0) != 0) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (cells.size() < 7) break;
    try {
      return {std::stod(cells[5]), std::stod(cells[6])};
    } catch (const std::exception&) {
      break;
    }
  }
  throw IoError("noise report: no valid fit row");
}

}  // namespace psfdecon
