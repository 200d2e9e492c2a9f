#include "decaylab/radial.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "decaylab/errors.hpp"

namespace decaylab {

double unit_ball_volume(int dimension) {
  const double half = 0.5 * dimension;
  return std::pow(std::numbers::pi, half) / std::tgamma(half + 1.0);
}

RadialGrid::RadialGrid(int dimension, std::vector<double> nodes, std::optional<GridSpacing> spacing)
    : dimension_(dimension), nodes_(std::move(nodes)), spacing_(spacing),
      ball_volume_(unit_ball_volume(dimension)) {}

GridPtr RadialGrid::from_nodes(int dimension, std::vector<double> nodes) {
  require(dimension >= 2, "dimension must be at least 2");
  require(nodes.size() >= 2, "a radial grid needs at least two nodes");
  require(nodes.front() == 0.0, "radial grid must start at r = 0");
  for (std::size_t i = 1; i < nodes.size(); ++i)
    require(std::isfinite(nodes[i]) && nodes[i] > nodes[i - 1], "radial grid nodes must be strictly increasing");
  return GridPtr(new RadialGrid(dimension, std::move(nodes), std::nullopt));
}

GridPtr RadialGrid::make(int dimension, const GridSpacing& s, double r_max) {
  require(dimension >= 2, "dimension must be at least 2");
  require(s.inner_spacing > 0 && s.inner_radius > 0, "grid spacing and inner radius must be positive");
  require(s.ratio >= 1.0 && s.ratio <= 1.1, "geometric spacing ratio must lie in [1, 1.1]");
  require(r_max > 0, "R_max must be positive");
  std::vector<double> nodes{0.0};
  const double inner = std::min(s.inner_radius, r_max);
  const auto n_inner = static_cast<std::size_t>(std::ceil(inner / s.inner_spacing - 1e-9));
  const double h = inner / static_cast<double>(n_inner);
  for (std::size_t i = 1; i <= n_inner; ++i) nodes.push_back(h * static_cast<double>(i));
  double spacing = h;
  while (nodes.back() < r_max * (1.0 - 1e-14)) {
    spacing *= s.ratio;
    nodes.push_back(nodes.back() + spacing);
  }
  return GridPtr(new RadialGrid(dimension, std::move(nodes), s));
}

std::size_t RadialGrid::locate(double r) const {
  if (r <= 0.0) return 0;
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), r);
  if (it == nodes_.end()) return cells() - 1;
  return static_cast<std::size_t>(it - nodes_.begin()) - 1;
}

std::optional<std::size_t> RadialGrid::find_node(double r) const {
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), r * (1.0 - 1e-12) - 1e-300);
  if (it != nodes_.end() && std::fabs(*it - r) <= 1e-12 * std::max(1.0, std::fabs(r)))
    return static_cast<std::size_t>(it - nodes_.begin());
  return std::nullopt;
}

GridPtr RadialGrid::with_breakpoints(std::span<const double> extra) const {
  std::vector<double> nodes = nodes_;
  for (double x : extra) {
    if (!(x > 0.0) || !std::isfinite(x)) continue;
    if (find_node(x)) continue;
    nodes.push_back(x);
  }
  std::sort(nodes.begin(), nodes.end());
  return from_nodes(dimension_, std::move(nodes));
}

RadialFunction::RadialFunction(GridPtr grid, std::vector<double> left, std::vector<double> right)
    : grid_(std::move(grid)), left_(std::move(left)), right_(std::move(right)) {
  require(grid_ != nullptr, "radial function needs a grid");
  require(left_.size() == grid_->cells() && right_.size() == grid_->cells(),
          "radial function needs one value pair per cell");
  require(all_finite(), "radial function values must be finite");
}

RadialFunction RadialFunction::from_nodal(GridPtr grid, std::vector<double> values) {
  require(grid != nullptr, "radial function needs a grid");
  require(values.size() == grid->size(), "value count must equal node count");
  std::vector<double> left(values.begin(), values.end() - 1);
  std::vector<double> right(values.begin() + 1, values.end());
  return RadialFunction(std::move(grid), std::move(left), std::move(right));
}

RadialFunction RadialFunction::from_cells(GridPtr grid, std::vector<double> left, std::vector<double> right) {
  return RadialFunction(std::move(grid), std::move(left), std::move(right));
}

RadialFunction RadialFunction::sample(GridPtr grid, const std::function<double(double)>& f) {
  std::vector<double> values(grid->size());
  for (std::size_t i = 0; i < grid->size(); ++i) values[i] = f(grid->r(i));
  return from_nodal(std::move(grid), std::move(values));
}

RadialFunction RadialFunction::sample_cells(GridPtr grid, const std::function<double(double)>& f) {
  const std::size_t m = grid->cells();
  std::vector<double> left(m), right(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double a = grid->r(i), b = grid->r(i + 1);
    const double eps = 1e-9 * (b - a);
    // Evaluate slightly inside and extrapolate back to the exact endpoints.
    const double fa = f(a + eps), fb = f(b - eps);
    const double slope = (fb - fa) / (b - a - 2 * eps);
    left[i] = fa - slope * eps;
    right[i] = fb + slope * eps;
  }
  return RadialFunction(std::move(grid), std::move(left), std::move(right));
}

RadialFunction RadialFunction::indicator(GridPtr grid, double a, double b, double value) {
  require(a >= 0.0 && b > a, "indicator needs 0 <= a < b");
  if (a > 0.0) require(grid->find_node(a).has_value(), "indicator inner radius must be a grid node");
  if (std::isfinite(b) && b < grid->r_max())
    require(grid->find_node(b).has_value(), "indicator outer radius must be a grid node");
  const std::size_t m = grid->cells();
  std::vector<double> left(m, 0.0), right(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double mid = 0.5 * (grid->r(i) + grid->r(i + 1));
    if (mid > a && mid < b) left[i] = right[i] = value;
  }
  return RadialFunction(std::move(grid), std::move(left), std::move(right));
}

double RadialFunction::operator()(double r) const {
  if (r < 0.0) r = -r;
  if (r >= grid_->r_max()) return 0.0;
  const std::size_t i = grid_->locate(r);
  const double a = grid_->r(i), b = grid_->r(i + 1);
  const double w = (r - a) / (b - a);
  return left_[i] + w * (right_[i] - left_[i]);
}

bool RadialFunction::is_continuous() const {
  for (std::size_t i = 0; i + 1 < cells(); ++i)
    if (right_[i] != left_[i + 1]) return false;
  return true;
}

std::vector<double> RadialFunction::nodal_values() const {
  require(is_continuous(), "nodal values requested for a discontinuous radial function");
  std::vector<double> v(left_.begin(), left_.end());
  v.push_back(right_.back());
  return v;
}

double RadialFunction::max_abs() const {
  double m = 0.0;
  for (std::size_t i = 0; i < cells(); ++i) m = std::max({m, std::fabs(left_[i]), std::fabs(right_[i])});
  return m;
}

bool RadialFunction::is_nonincreasing_nonnegative() const {
  double prev = left_.empty() ? 0.0 : left_[0];
  for (std::size_t i = 0; i < cells(); ++i) {
    if (left_[i] < 0.0 || right_[i] < 0.0) return false;
    if (left_[i] > prev || right_[i] > left_[i]) return false;
    prev = right_[i];
  }
  return true;
}

bool RadialFunction::all_finite() const {
  return std::all_of(left_.begin(), left_.end(), [](double v) { return std::isfinite(v); }) &&
         std::all_of(right_.begin(), right_.end(), [](double v) { return std::isfinite(v); });
}

RadialFunction RadialFunction::abs() const {
  // |f| is linear on a cell only if f keeps its sign there; split at zero crossings.
  std::vector<double> extra;
  for (std::size_t i = 0; i < cells(); ++i) {
    if ((left_[i] < 0.0 && right_[i] > 0.0) || (left_[i] > 0.0 && right_[i] < 0.0)) {
      const double a = grid_->r(i), b = grid_->r(i + 1);
      extra.push_back(a + left_[i] / (left_[i] - right_[i]) * (b - a));
    }
  }
  if (extra.empty()) {
    RadialFunction out = *this;
    for (auto& v : out.left_) v = std::fabs(v);
    for (auto& v : out.right_) v = std::fabs(v);
    return out;
  }
  GridPtr g = grid_->with_breakpoints(extra);
  const std::size_t m = g->cells();
  std::vector<double> left(m), right(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double a = g->r(i), b = g->r(i + 1);
    const std::size_t src = grid_->locate(0.5 * (a + b));
    const double a0 = grid_->r(src), b0 = grid_->r(src + 1);
    auto at = [&](double r) { return left_[src] + (r - a0) / (b0 - a0) * (right_[src] - left_[src]); };
    left[i] = std::fabs(a == a0 ? left_[src] : at(a));
    right[i] = std::fabs(b == b0 ? right_[src] : at(b));
  }
  return RadialFunction(std::move(g), std::move(left), std::move(right));
}

RadialFunction RadialFunction::scaled(double factor) const {
  RadialFunction out = *this;
  for (auto& v : out.left_) v *= factor;
  for (auto& v : out.right_) v *= factor;
  return out;
}

RadialFunction RadialFunction::restricted(double a, double b) const {
  require(a >= 0.0 && b > a, "restriction needs 0 <= a < b");
  std::vector<double> extra;
  if (a > 0.0 && a < grid_->r_max()) extra.push_back(a);
  if (std::isfinite(b) && b < grid_->r_max()) extra.push_back(b);
  GridPtr g = extra.empty() ? grid_ : grid_->with_breakpoints(extra);
  const std::size_t m = g->cells();
  std::vector<double> left(m, 0.0), right(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double lo = g->r(i), hi = g->r(i + 1);
    const double mid = 0.5 * (lo + hi);
    if (!(mid >= a && mid < b)) continue;
    const std::size_t src = grid_->locate(mid);
    const double a0 = grid_->r(src), b0 = grid_->r(src + 1);
    auto at = [&](double r) { return left_[src] + (r - a0) / (b0 - a0) * (right_[src] - left_[src]); };
    left[i] = (lo == a0) ? left_[src] : at(lo);
    right[i] = (hi == b0) ? right_[src] : at(hi);
  }
  return RadialFunction(std::move(g), std::move(left), std::move(right));
}

RadialFunction RadialFunction::dilated(double lambda) const {
  require(lambda > 0.0, "dilation factor must be positive");
  std::vector<double> nodes(grid_->nodes().begin(), grid_->nodes().end());
  for (auto& r : nodes) r *= lambda;
  return RadialFunction(RadialGrid::from_nodes(grid_->dimension(), std::move(nodes)), left_, right_);
}

RadialFunction operator+(const RadialFunction& f, const RadialFunction& g) {
  require(f.grid().dimension() == g.grid().dimension(), "sum of radial functions in different dimensions");
  GridPtr grid = f.grid_ptr();
  if (f.grid_ptr() != g.grid_ptr()) grid = f.grid().with_breakpoints(g.grid().nodes());
  const std::size_t m = grid->cells();
  std::vector<double> left(m), right(m);
  auto one_sided = [](const RadialFunction& h, double r, bool from_right) {
    if (r >= h.grid().r_max() && from_right) return 0.0;
    if (r > h.grid().r_max()) return 0.0;
    const std::size_t c = from_right ? h.grid().locate(r) : h.grid().locate(std::nextafter(r, 0.0));
    const double a = h.grid().r(c), b = h.grid().r(c + 1);
    if (from_right && r == a) return h.left(c);
    if (!from_right && r == b) return h.right(c);
    return h.left(c) + (r - a) / (b - a) * (h.right(c) - h.left(c));
  };
  for (std::size_t i = 0; i < m; ++i) {
    left[i] = one_sided(f, grid->r(i), true) + one_sided(g, grid->r(i), true);
    right[i] = one_sided(f, grid->r(i + 1), false) + one_sided(g, grid->r(i + 1), false);
  }
  return RadialFunction::from_cells(std::move(grid), std::move(left), std::move(right));
}

}  // namespace decaylab
