#include "decaylab/lorentz.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "decaylab/errors.hpp"
#include "decaylab/quadrature.hpp"

namespace decaylab {
namespace {

constexpr int kOrder = 16;

bool is_integer(double x) { return x == std::floor(x); }

// x^e with repeated squaring for small nonnegative integer e.
double power(double x, double e) {
  if (e >= 0.0 && e <= 64.0 && is_integer(e)) {
    auto m = static_cast<unsigned>(e);
    double r = 1.0;
    while (m) {
      if (m & 1u) r *= x;
      x *= x;
      m >>= 1u;
    }
    return r;
  }
  return std::pow(x, e);
}

// u^N - v^N given d = u - v, without cancellation.
double pow_diff(double u, double v, double d, int n) {
  double s = 0.0;
  double up = 1.0;
  for (int k = 0; k < n; ++k) {
    s += up * std::pow(v, n - 1 - k);
    up *= u;
  }
  return d * s;
}

// ∫_u^v r^gexp ℓ(r)^k dr for ℓ linear through (u0, l0), (v0, l1) with ℓ ≥ 0 on [u, v] ⊂ [u0, v0].
struct LinearPower {
  double u0, v0, l0, l1, k, gexp;

  double ell(double r) const {
    if (r == u0) return l0;
    if (r == v0) return l1;
    return l0 + (l1 - l0) * (r - u0) / (v0 - u0);
  }
  bool gexp_smooth() const { return is_integer(gexp) && gexp >= 0.0; }

  double leaf(double u, double v) const {
    const double lu = ell(u), lv = ell(v);
    if (lu <= 0.0 && lv <= 0.0) return 0.0;
    const bool zero_hi = lv <= 0.0 && k > 0.0;
    const bool zero_lo = lu <= 0.0 && k > 0.0;
    const bool origin = u == 0.0 && !gexp_smooth();
    const double wa = zero_hi ? k : 0.0;
    const double wb = (zero_lo ? k : 0.0) + (origin ? gexp : 0.0);
    const quad::Rule& rule = quad::gauss_jacobi_cached(kOrder, wa, wb);
    const double h = v - u;
    double sum = 0.0;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      const double x = rule.nodes[j];
      const double r = u + 0.5 * (1.0 + x) * h;
      double lf;
      if (zero_hi) lf = std::pow(lu / h, k);
      else if (zero_lo) lf = std::pow(lv / h, k);
      else lf = std::pow(std::max(ell(r), 0.0), k);
      const double rf = origin ? 1.0 : std::pow(r, gexp);
      sum += rule.weights[j] * lf * rf;
    }
    return sum * std::pow(0.5 * h, 1.0 + wa + wb);
  }

  double integrate(double u, double v, int depth = 0) const {
    if (depth < 60) {
      const double h = v - u;
      bool split = false;
      if (!gexp_smooth() && u > 0.0 && u < h) split = true;
      if (!is_integer(k) && l0 != l1) {
        const double z = u0 + l0 * (v0 - u0) / (l0 - l1);  // zero of ℓ
        const double dist = z > v ? z - v : (z < u ? u - z : 0.0);
        if (dist > 0.0 && dist < h) split = true;
      }
      if (split) {
        const double m = 0.5 * (u + v);
        return integrate(u, m, depth + 1) + integrate(m, v, depth + 1);
      }
    }
    return leaf(u, v);
  }
};

double cell_power_integral(double a, double b, double la, double lb, double k, double gexp) {
  if (la <= 0.0 && lb <= 0.0) return 0.0;
  LinearPower lp{a, b, la, lb, k, gexp};
  auto legendre = [&](int order) {
    return quad::integrate(quad::gauss_legendre(order), a, b, [&](double r) {
      return power(r, gexp) * power(lp.ell(r), k);
    });
  };
  if (is_integer(k) && lp.gexp_smooth())
    for (int order : {4, 8, 16})
      if (k + gexp <= 2 * order - 1) return legendre(order);
  if (la > 0.0 && lb > 0.0 && a > 0.0) {
    // Distance to the nearest singular point sets the Bernstein ellipse, hence the order.
    const double h = b - a;
    double d = lp.gexp_smooth() ? INFINITY : a;
    if (!is_integer(k) && la != lb) {
      const double z = a + la * h / (la - lb);
      d = std::min(d, z > b ? z - b : a - z);
    }
    const double rho = 2.0 * (1.0 + 2.0 * d / h);
    for (int order : {4, 8})
      if (2.0 * order * std::log(rho) > 40.0) return legendre(order);
  }
  return lp.integrate(a, b);
}

// Maximizes g over [a, b] by sampling then golden-section refinement.
double maximize(double a, double b, const std::function<double(double)>& g) {
  constexpr int kSamples = 16;
  double best = std::max(g(a), g(b));
  int best_j = -1;
  for (int j = 1; j < kSamples; ++j) {
    const double v = g(a + (b - a) * j / kSamples);
    if (v > best) {
      best = v;
      best_j = j;
    }
  }
  if (best_j < 0) return best;
  double lo = a + (b - a) * (best_j - 1) / kSamples;
  double hi = a + (b - a) * (best_j + 1) / kSamples;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double g1 = g(x1), g2 = g(x2);
  for (int it = 0; it < 80 && hi - lo > 1e-15 * std::max(1.0, std::fabs(hi)); ++it) {
    if (g1 < g2) {
      lo = x1;
      x1 = x2;
      g1 = g2;
      x2 = lo + phi * (hi - lo);
      g2 = g(x2);
    } else {
      hi = x2;
      x2 = x1;
      g2 = g1;
      x1 = hi - phi * (hi - lo);
      g1 = g(x1);
    }
  }
  return std::max({best, g1, g2});
}

}  // namespace

double distribution_function(const RadialFunction& f, double lambda) {
  require(lambda > 0.0, "distribution function needs λ > 0");
  const RadialFunction g = f.abs();
  const RadialGrid& grid = g.grid();
  const int n = grid.dimension();
  double total = 0.0;
  for (std::size_t i = 0; i < g.cells(); ++i) {
    const double a = grid.r(i), b = grid.r(i + 1);
    const double la = g.left(i), lb = g.right(i);
    double lo, hi;  // subinterval of [a, b] where the interpolant exceeds λ
    if (la > lambda && lb > lambda) {
      lo = a;
      hi = b;
    } else if (la <= lambda && lb <= lambda) {
      continue;
    } else if (la > lambda) {
      lo = a;
      hi = a + (la - lambda) / (la - lb) * (b - a);
    } else {
      lo = b - (lb - lambda) / (lb - la) * (b - a);
      hi = b;
    }
    total += pow_diff(hi, lo, hi - lo, n);
  }
  return grid.ball_volume() * total;
}

LayerCake::LayerCake(const RadialFunction& f)
    : dimension_(f.grid().dimension()), ball_volume_(f.grid().ball_volume()) {
  const RadialFunction g = f.abs();
  const RadialGrid& grid = g.grid();
  std::vector<double> levels{0.0};
  cells_.reserve(g.cells());
  for (std::size_t i = 0; i < g.cells(); ++i) {
    const double la = g.left(i), lb = g.right(i);
    if (la <= 0.0 && lb <= 0.0) continue;
    cells_.push_back({grid.r(i), grid.r(i + 1), std::min(la, lb), std::max(la, lb), lb > la});
    levels.push_back(la);
    levels.push_back(lb);
  }
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  sup_ = levels.back();
  if (levels.size() < 2) return;
  const std::size_t np = levels.size() - 1;
  pieces_.resize(np);
  for (std::size_t k = 0; k < np; ++k) {
    pieces_[k].lo = levels[k];
    pieces_[k].hi = levels[k + 1];
    pieces_[k].full = 0.0;
  }
  // Cells with minimum value levels[j] lie entirely above every piece k < j.
  std::vector<double> bucket(levels.size(), 0.0);
  auto index_of = [&](double v) {
    return static_cast<std::size_t>(std::lower_bound(levels.begin(), levels.end(), v) - levels.begin());
  };
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const Cell& cell = cells_[c];
    const std::size_t ilo = index_of(cell.lo), ihi = index_of(cell.hi);
    bucket[ilo] += pow_diff(cell.b, cell.a, cell.b - cell.a, dimension_);
    for (std::size_t k = ilo; k < ihi; ++k) pieces_[k].active.push_back(static_cast<int>(c));
  }
  double running = 0.0;
  for (std::size_t k = np; k-- > 0;) {
    running += bucket[k + 1];
    pieces_[k].full = ball_volume_ * running;
  }
  Piece& top = pieces_.back();
  if (top.full == 0.0) {
    int order = dimension_;
    for (int c : top.active) {
      const Cell& cell = cells_[c];
      const double peak_r = cell.increasing ? cell.b : cell.a;
      if (peak_r > 0.0) order = 1;
    }
    top.top_order = order;
  }
}

double LayerCake::piece_measure(const Piece& piece, double y) const {
  const double lambda = piece.hi - y;
  double m = 0.0;
  for (int c : piece.active) {
    const Cell& cell = cells_[c];
    const double h = cell.b - cell.a;
    double d = ((cell.hi - piece.hi) + y) / (cell.hi - cell.lo) * h;
    if (lambda <= cell.lo) d = h;
    d = std::clamp(d, 0.0, h);
    if (cell.increasing) m += pow_diff(cell.b, cell.b - d, d, dimension_);
    else m += pow_diff(cell.a + d, cell.a, d, dimension_);
  }
  return piece.full + ball_volume_ * m;
}

double LayerCake::support_measure() const {
  if (pieces_.empty()) return 0.0;
  const Piece& p = pieces_.front();
  return piece_measure(p, p.hi - p.lo);
}

double LayerCake::measure(double lambda) const {
  if (pieces_.empty() || lambda >= sup_) return 0.0;
  if (lambda <= 0.0) return support_measure();
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), lambda,
                             [](double v, const Piece& p) { return v < p.lo; });
  const Piece& p = *(it - 1);
  return piece_measure(p, p.hi - lambda);
}

double LayerCake::rearranged(double s) const {
  require(s >= 0.0, "measure coordinate must be nonnegative");
  if (pieces_.empty() || s >= support_measure()) return 0.0;
  for (std::size_t k = 0; k < pieces_.size(); ++k) {
    const Piece& p = pieces_[k];
    const double at_hi = (k + 1 < pieces_.size()) ? piece_measure(pieces_[k + 1], pieces_[k + 1].hi - p.hi) : 0.0;
    if (at_hi > s) continue;
    if (piece_measure(p, 0.0) > s) return p.hi;
    if (piece_measure(p, p.hi - p.lo) <= s) return p.lo;
    // μ(hi - y) is non-decreasing in y; find the smallest λ with μ(λ) ≤ s.
    double ylo = 0.0, yhi = p.hi - p.lo;
    for (int it = 0; it < 200 && yhi - ylo > 1e-17 * p.hi; ++it) {
      const double ym = 0.5 * (ylo + yhi);
      if (piece_measure(p, ym) <= s) ylo = ym;
      else yhi = ym;
    }
    return p.hi - ylo;
  }
  return 0.0;
}

double LayerCake::piece_sup(const Piece& piece, double inv_p) const {
  const double len = piece.hi - piece.lo;
  return maximize(0.0, len, [&](double y) {
    return (piece.hi - y) * std::pow(piece_measure(piece, y), inv_p);
  });
}

double LayerCake::lorentz_norm(const LorentzExponents& e) const {
  if (pieces_.empty()) return 0.0;
  if (e.p.is_infinite()) return sup_;
  const double inv_p = e.p.reciprocal().to_double();
  if (e.sigma.is_infinite()) {
    double best = 0.0;
    for (const Piece& p : pieces_) best = std::max(best, piece_sup(p, inv_p));
    return std::pow(ball_volume_, -inv_p) * best;
  }
  const double sigma = e.sigma.value();
  const double sp = sigma * inv_p;
  const double s1 = sigma - 1.0;
  const bool smooth_level = is_integer(s1);
  const bool smooth_measure = is_integer(sp);
  double total = 0.0;
  for (std::size_t k = 0; k < pieces_.size(); ++k) {
    const Piece& p = pieces_[k];
    const bool is_top = (k + 1 == pieces_.size()) && p.top_order > 0;
    // Integrates over λ in [hi - yb, hi - ya].
    std::function<double(double, double, int)> sub = [&](double ya, double yb, int depth) -> double {
      const double l = p.hi - yb, h = p.hi - ya, len = yb - ya;
      if (depth < 60) {
        const bool near_zero = !smooth_level && l > 0.0 && l < len;
        const double to_sup = sup_ - h;
        const bool near_top = !smooth_measure && to_sup > 0.0 && to_sup < len;
        if (near_zero || near_top) {
          const double ym = 0.5 * (ya + yb);
          return sub(ya, ym, depth + 1) + sub(ym, yb, depth + 1);
        }
      }
      const bool top_w = is_top && ya == 0.0;
      const bool bottom_w = l == 0.0 && s1 > 0.0 && !is_integer(s1);
      const double wa = top_w ? p.top_order * sp : 0.0;
      const double wb = bottom_w ? s1 : 0.0;
      const quad::Rule& rule = (wa == 0.0 && wb == 0.0) ? quad::gauss_legendre(kOrder)
                                                        : quad::gauss_jacobi_cached(kOrder, wa, wb);
      double acc = 0.0;
      for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
        const double x = rule.nodes[j];
        const double y = ya + 0.5 * (1.0 - x) * len;
        const double lambda = p.hi - y;
        double mu = piece_measure(p, y);
        if (top_w) mu /= std::pow(y, p.top_order);
        const double lf = bottom_w ? 1.0 : std::pow(lambda, s1);
        acc += rule.weights[j] * lf * std::pow(mu, sp);
      }
      return acc * std::pow(0.5 * len, 1.0 + wa + wb);
    };
    total += sub(0.0, p.hi - p.lo, 0);
  }
  const double value = std::pow(ball_volume_, 1.0 - sp) * e.p.value() * total;
  return std::pow(value, 1.0 / sigma);
}

RadialFunction LayerCake::spherical(double rel_tol) const {
  const int n = dimension_;
  if (pieces_.empty()) {
    auto g = RadialGrid::from_nodes(n, {0.0, 1.0});
    return RadialFunction::from_nodal(g, {0.0, 0.0});
  }
  auto radius = [&](double mu) { return std::pow(std::max(mu, 0.0) / ball_volume_, 1.0 / n); };
  const double tol = rel_tol * sup_;
  struct Seg {
    double r0, r1, v0, v1;
  };
  std::vector<Seg> segs;
  auto push = [&](double r0, double r1, double v0, double v1) {
    if (!(r1 > r0)) return;
    if (!segs.empty()) r0 = segs.back().r1;
    if (r1 > r0) segs.push_back({r0, r1, v0, v1});
  };
  double r_cur = 0.0;
  for (std::size_t kk = pieces_.size(); kk-- > 0;) {
    const Piece& p = pieces_[kk];
    const double len = p.hi - p.lo;
    const double r_hm = radius(piece_measure(p, 0.0));
    if (r_hm > r_cur) push(r_cur, r_hm, p.hi, p.hi);
    r_cur = std::max(r_cur, r_hm);
    const double r_lp = radius(piece_measure(p, len));
    if (r_lp > r_cur) {
      std::function<void(double, double, double, double, int)> refine =
          [&](double ya, double ra, double yb, double rb, int depth) {
            const double ym = 0.5 * (ya + yb);
            const double rm = radius(piece_measure(p, ym));
            const double interp = (p.hi - ya) + ((p.hi - yb) - (p.hi - ya)) * (rm - ra) / (rb - ra);
            if (depth >= 40 || segs.size() > 2'000'000 || std::fabs(interp - (p.hi - ym)) <= tol || !(rm > ra && rm < rb)) {
              push(ra, rm, p.hi - ya, p.hi - ym);
              push(rm, rb, p.hi - ym, p.hi - yb);
              return;
            }
            refine(ya, ra, ym, rm, depth + 1);
            refine(ym, rm, yb, rb, depth + 1);
          };
      refine(0.0, r_cur, len, r_lp, 0);
      r_cur = r_lp;
    }
  }
  std::vector<double> nodes{0.0};
  std::vector<double> left, right;
  for (const Seg& s : segs) {
    nodes.push_back(s.r1);
    left.push_back(s.v0);
    right.push_back(s.v1);
  }
  if (segs.empty()) {
    auto g = RadialGrid::from_nodes(n, {0.0, 1.0});
    return RadialFunction::from_nodal(g, {0.0, 0.0});
  }
  return RadialFunction::from_cells(RadialGrid::from_nodes(n, std::move(nodes)), std::move(left), std::move(right));
}

double DecreasingProfile::operator()(double s) const {
  if (breakpoints.size() < 2 || s >= breakpoints.back() || s < 0.0) return 0.0;
  auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), s);
  const std::size_t k = static_cast<std::size_t>(it - breakpoints.begin()) - 1;
  const double c = unit_ball_volume(dimension);
  auto radius = [&](double v) { return std::pow(v / c, 1.0 / dimension); };
  const double ra = radius(breakpoints[k]), rb = radius(breakpoints[k + 1]);
  const double w = (radius(s) - ra) / (rb - ra);
  return left[k] + w * (right[k] - left[k]);
}

bool DecreasingProfile::is_nonincreasing() const {
  for (std::size_t k = 0; k < left.size(); ++k) {
    if (right[k] > left[k] || right[k] < 0.0) return false;
    if (k + 1 < left.size() && left[k + 1] > right[k]) return false;
  }
  return true;
}

RadialFunction spherical_rearrangement(const RadialFunction& f) { return LayerCake(f).spherical(); }

DecreasingProfile decreasing_rearrangement(const RadialFunction& f) {
  const RadialFunction sharp = spherical_rearrangement(f);
  DecreasingProfile prof;
  prof.dimension = sharp.grid().dimension();
  const double c = sharp.grid().ball_volume();
  for (double r : sharp.grid().nodes()) prof.breakpoints.push_back(c * std::pow(r, prof.dimension));
  prof.left.assign(sharp.left_values().begin(), sharp.left_values().end());
  prof.right.assign(sharp.right_values().begin(), sharp.right_values().end());
  return prof;
}

double lorentz_norm_radial(const RadialFunction& f, const LorentzExponents& e) {
  require(f.is_nonincreasing_nonnegative(), "radial Lorentz quadrature needs a non-increasing nonnegative profile");
  if (e.p.is_infinite()) return f.max_abs();
  const RadialGrid& grid = f.grid();
  const int n = grid.dimension();
  const double inv_p = e.p.reciprocal().to_double();
  const double k = n * inv_p;
  if (e.sigma.is_infinite()) {
    // sup of r^{N/p} f(r); on a cell f = l + s (r - a) has its stationary point in closed form.
    double best = 0.0;
    for (std::size_t i = 0; i < f.cells(); ++i) {
      const double a = grid.r(i), b = grid.r(i + 1), l = f.left(i), rr = f.right(i);
      best = std::max({best, std::pow(a, k) * l, std::pow(b, k) * rr});
      const double s = (rr - l) / (b - a);
      if (s < 0.0) {
        const double r = k * (a - l / s) / (k + 1.0);
        if (r > a && r < b) best = std::max(best, std::pow(r, k) * (l + s * (r - a)));
      }
    }
    return best;
  }
  const double sigma = e.sigma.value();
  const double gexp = n * sigma * inv_p - 1.0;
  double total = 0.0;
  for (std::size_t i = 0; i < f.cells(); ++i)
    total += cell_power_integral(grid.r(i), grid.r(i + 1), f.left(i), f.right(i), sigma, gexp);
  return std::pow(n * grid.ball_volume() * total, 1.0 / sigma);
}

double lorentz_norm_layer_cake(const RadialFunction& f, const LorentzExponents& e) {
  return LayerCake(f).lorentz_norm(e);
}

double lorentz_norm(const RadialFunction& f, const LorentzExponents& e) {
  return LorentzEvaluator(f).norm(e);
}

double lp_norm(const RadialFunction& f, const Exponent& p) {
  if (p.is_infinite()) return f.max_abs();
  const RadialFunction g = f.abs();
  const RadialGrid& grid = g.grid();
  const int n = grid.dimension();
  const double pv = p.value();
  double total = 0.0;
  for (std::size_t i = 0; i < g.cells(); ++i)
    total += cell_power_integral(grid.r(i), grid.r(i + 1), g.left(i), g.right(i), pv, n - 1.0);
  return std::pow(n * grid.ball_volume() * total, 1.0 / pv);
}

LorentzEvaluator::LorentzEvaluator(const RadialFunction& f)
    : f_(&f), monotone_(f.is_nonincreasing_nonnegative()) {}

double LorentzEvaluator::norm(const LorentzExponents& e) const {
  if (e.p.is_infinite()) return f_->max_abs();
  if (monotone_) return lorentz_norm_radial(*f_, e);
  if (!cake_) cake_.emplace(*f_);
  return cake_->lorentz_norm(e);
}

TruncatedNorms truncated_norms(const RadialFunction& f, const LorentzExponents& e, double delta, double t) {
  require(delta > 0.0, "cutoff scale δ must be positive");
  require(t >= 0.0, "time must be nonnegative");
  const double rho = delta * std::sqrt(1.0 + t);
  TruncatedNorms out{0.0, 0.0};
  out.inner = lorentz_norm(f.restricted(0.0, rho), e);
  if (rho < f.grid().r_max()) out.outer = lorentz_norm(f.restricted(rho, std::numeric_limits<double>::infinity()), e);
  return out;
}

}  // namespace decaylab
